use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cryptvault::bench::{parse_table, TableFormat};

const BIN: &str = env!("CARGO_BIN_EXE_cryptvault");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

struct Vault {
    dir: tempfile::TempDir,
}

impl Vault {
    fn new() -> Self {
        let v = Vault {
            dir: tempfile::tempdir().unwrap(),
        };
        let out = v.run(&["init"]);
        assert!(out.status.success(), "{}", stderr(&out));
        v
    }

    fn path(&self, p: &str) -> PathBuf {
        self.dir.path().join(p)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(BIN)
            .args(args)
            .env("CRYPTVAULT_DATA_ROOT", self.path("data"))
            .env("CRYPTVAULT_KEY_ROOT", self.path("card"))
            .output()
            .unwrap()
    }
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn put_get_binary_identity() {
    let v = Vault::new();
    let data: Vec<u8> = (0..=255u8).cycle().take(70_001).collect();
    let src = v.path("blob.bin");
    std::fs::write(&src, &data).unwrap();

    let out = v.run(&["put", src.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let listing = String::from_utf8(out.stdout).unwrap();
    assert!(listing.contains("blob.bin,70001,70016,15,"), "{listing}");

    let out = v.run(&["get", "blob.bin"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(out.stdout, data);

    let dest = v.path("restored.bin");
    let out = v.run(&["get", "blob.bin", "--out", dest.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read(dest).unwrap(), data);
}

#[test]
fn ls_rm_and_json() {
    let v = Vault::new();
    for name in ["b", "a"] {
        let src = v.path(name);
        std::fs::write(&src, name.repeat(20)).unwrap();
        assert!(v.run(&["put", src.to_str().unwrap()]).status.success());
    }
    let out = v.run(&["ls"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("name,original_size"));
    assert!(lines[1].starts_with("a,20,32,12,"));
    assert!(lines[2].starts_with("b,20,32,12,"));

    let out = v.run(&["--format", "json", "ls"]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 2);

    let out = v.run(&["stat", "a"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("a,20,32,12,"));

    assert!(v.run(&["rm", "a"]).status.success());
    let out = v.run(&["rm", "a"]);
    assert_eq!(out.status.code(), Some(1));
    let out = v.run(&["ls"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 2);
}

#[test]
fn duplicate_put_needs_overwrite() {
    let v = Vault::new();
    let src = v.path("f");
    std::fs::write(&src, b"one").unwrap();
    assert!(v.run(&["put", src.to_str().unwrap()]).status.success());
    std::fs::write(&src, b"two").unwrap();
    let out = v.run(&["put", src.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("already exists"));
    let out = v.run(&["put", src.to_str().unwrap(), "--overwrite"]);
    assert!(out.status.success());
    assert_eq!(v.run(&["get", "f"]).stdout, b"two");
}

#[test]
fn missing_entry_exit_code() {
    let v = Vault::new();
    let out = v.run(&["get", "missing-name"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("not found"));
    assert!(out.stdout.is_empty());
}

#[test]
fn corruption_exit_code() {
    let v = Vault::new();
    let src = v.path("doc");
    std::fs::write(&src, vec![9u8; 1000]).unwrap();
    assert!(v.run(&["put", src.to_str().unwrap()]).status.success());

    let object = std::fs::read_dir(v.path("data/objects"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let ct = std::fs::read(&object).unwrap();
    std::fs::write(&object, &ct[..ct.len() - 16]).unwrap();
    let out = v.run(&["get", "doc"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(out.stdout.is_empty());

    std::fs::write(&object, &ct).unwrap();
    assert_eq!(v.run(&["get", "doc"]).stdout, vec![9u8; 1000]);

    for key in std::fs::read_dir(v.path("card")).unwrap() {
        std::fs::remove_file(key.unwrap().path()).unwrap();
    }
    let out = v.run(&["get", "doc"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("key"));
}

#[test]
fn nested_key_root_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = Command::new(BIN)
        .args(["--data-root", data.to_str().unwrap()])
        .args(["--key-root", data.join("keys").to_str().unwrap()])
        .arg("init")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("overlaps"));
}

#[test]
fn flags_override_environment() {
    let v = Vault::new();
    let other = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["--data-root", other.path().join("d").to_str().unwrap()])
        .args(["--key-root", other.path().join("k").to_str().unwrap()])
        .arg("init")
        .env("CRYPTVAULT_DATA_ROOT", v.path("data"))
        .env("CRYPTVAULT_KEY_ROOT", v.path("card"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(other.path().join("d/INDEX").exists());
}

#[test]
fn bad_arguments() {
    let out = Command::new(BIN).arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let out = Command::new(BIN).arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("bench"));
}

#[test]
fn uninitialized_vault() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .arg("ls")
        .env("CRYPTVAULT_DATA_ROOT", dir.path().join("d"))
        .env("CRYPTVAULT_KEY_ROOT", dir.path().join("k"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("not initialized"));
}

#[test]
fn report_on_reference_table() {
    let out = Command::new(BIN)
        .arg("report")
        .arg(fixture("reference_table.csv"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("r^2 = 0.4383"), "{text}");
    assert!(text.contains("r^2 = 0.0377"), "{text}");
    assert!(text.contains("constant y = 141"), "{text}");
    assert!(text.contains("total_worst_overhead 157"), "{text}");

    let plots = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["--format", "json", "report"])
        .arg(fixture("reference_table.csv"))
        .arg("--plots")
        .arg(plots.path())
        .output()
        .unwrap();
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let r2 = json["fit_time_vs_index"]["r_squared"].as_f64().unwrap();
    assert!((r2 - 0.438).abs() <= 0.005);
    assert_eq!(json["fit_keysize_vs_index"]["kind"], "constant");
    assert_eq!(json["total_worst_overhead"], 157);
    for f in cryptvault::stats::PLOT_FILES {
        assert!(plots.path().join(f).exists(), "{f}");
    }
}

#[test]
fn report_missing_table() {
    let out = Command::new(BIN).args(["report", "/nonexistent/t.csv"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
}

#[test]
fn small_bench_is_stable_except_time() {
    let run = || {
        let out = Command::new(BIN)
            .args(["bench", "--seed", "7", "--reps", "1"])
            .args(["--entry", "Text:75", "--entry", "Image:5024", "--entry", "Empty:0"])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
        out.stdout
    };
    let strip_time = |bytes: &[u8]| -> Vec<String> {
        String::from_utf8(bytes.to_vec())
            .unwrap()
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f.remove(5);
                f.join(",")
            })
            .collect()
    };
    let a = run();
    let b = run();
    assert_eq!(strip_time(&a), strip_time(&b));
    let samples = parse_table(&a, TableFormat::Csv).unwrap();
    let sizes: Vec<_> = samples
        .iter()
        .map(|s| (s.original_size, s.encrypted_size, s.overhead, s.key_size))
        .collect();
    assert_eq!(sizes, [(75, 80, 5, 141), (5024, 5040, 16, 141), (0, 16, 16, 141)]);
}

#[test]
fn bench_writes_table_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.json");
    let plots = dir.path().join("plots");
    std::fs::create_dir(&plots).unwrap();
    let out = Command::new(BIN)
        .args(["--format", "json", "bench", "--reps", "1"])
        .args(["--entry", "A:10", "--entry", "B:100", "--entry", "C:1000"])
        .arg("--out")
        .arg(&table)
        .arg("--plots")
        .arg(&plots)
        .arg("--workdir")
        .arg(dir.path().join("work"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let samples = parse_table(&std::fs::read(&table).unwrap(), TableFormat::Json).unwrap();
    assert_eq!(samples.len(), 3);
    assert_eq!(std::fs::read_dir(&plots).unwrap().count(), 4);

    // The JSON table feeds straight back into `report`.
    let out = Command::new(BIN).arg("report").arg(&table).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
}
