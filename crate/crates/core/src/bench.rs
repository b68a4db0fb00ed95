//! Encryption-overhead microbenchmark.
//!
//! Builds a seeded corpus of files at fixed sizes, stores each one in a vault,
//! and reports sizes read back from storage alongside the median wall time of
//! the store operation.

use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fs::FsAdapter;
use crate::vault::{Vault, VaultError};

pub const DEFAULT_SEED: u64 = 0x4A46_5353;
pub const DEFAULT_REPETITIONS: usize = 5;

/// File types and sizes of the reference workload.
pub const REFERENCE_CORPUS: [(&str, u64); 10] = [
    ("Text", 75),
    ("Image", 5024),
    ("Excel", 8746),
    ("Bitmap", 20032),
    ("Document", 22016),
    ("PowerPoint", 27553),
    ("Executable", 43040),
    ("PDF", 905446),
    ("Audio", 9180972),
    ("Video", 26246026),
];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("corpus label {0:?} is not usable as a file name")]
    BadLabel(String),
    #[error("storage full: {0}")]
    StorageFull(io::Error),
    #[error(transparent)]
    Io(io::Error),
    #[error(transparent)]
    Vault(#[from] VaultError),
    #[error("table: {0}")]
    Table(String),
}

impl From<io::Error> for BenchError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::StorageFull => BenchError::StorageFull(e),
            _ => BenchError::Io(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSpec {
    pub entries: Vec<(String, u64)>,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn reference(seed: u64) -> Self {
        Self {
            entries: REFERENCE_CORPUS
                .iter()
                .map(|&(l, s)| (l.to_owned(), s))
                .collect(),
            seed,
        }
    }
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self::reference(DEFAULT_SEED)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSample {
    pub label: String,
    pub original_size: u64,
    pub encrypted_size: u64,
    pub overhead: u64,
    pub exec_time: f64,
    pub key_size: u64,
}

/// Pseudorandom content for corpus entry `index`; depends only on `seed`,
/// `index` and `len`.
pub fn corpus_bytes(seed: u64, index: usize, len: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut buf = vec![0u8; len as usize];
    rng.fill_bytes(&mut buf);
    buf
}

/// Writes one file per corpus entry into `workdir`, named by its label.
pub fn make_corpus(spec: &CorpusSpec, workdir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    std::fs::create_dir_all(workdir)?;
    let mut paths = Vec::with_capacity(spec.entries.len());
    for (i, (label, size)) in spec.entries.iter().enumerate() {
        crate::vault::validate_name(label).map_err(|_| BenchError::BadLabel(label.clone()))?;
        let path = workdir.join(label);
        std::fs::write(&path, corpus_bytes(spec.seed, i, *size))?;
        paths.push(path);
    }
    Ok(paths)
}

fn median(times: &mut [f64]) -> f64 {
    times.sort_by(f64::total_cmp);
    let mid = times.len() / 2;
    if times.len() % 2 == 1 {
        times[mid]
    } else {
        (times[mid - 1] + times[mid]) / 2.0
    }
}

/// Stores every corpus file in `vault` `repetitions` times, timing each put.
/// Each file is stored under its file name; later repetitions overwrite.
pub fn run_bench<F: FsAdapter>(
    corpus: &[PathBuf],
    vault: &Vault<F>,
    repetitions: usize,
) -> Result<Vec<BenchSample>, BenchError> {
    if repetitions == 0 {
        return Err(BenchError::NoRepetitions);
    }
    let mut samples = Vec::with_capacity(corpus.len());
    for path in corpus {
        let label = path
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| BenchError::BadLabel(path.display().to_string()))?
            .to_owned();
        let data = std::fs::read(path)?;
        let mut times = Vec::with_capacity(repetitions);
        for _ in 0..repetitions {
            let start = Instant::now();
            vault.overwrite(&label, &data)?;
            times.push(start.elapsed().as_secs_f64());
        }
        let entry = vault.stat(&label)?;
        let key_size = vault.key_size(&label)?;
        let exec_time = median(&mut times).max(f64::MIN_POSITIVE);
        log::info!("{label}: {} bytes in {exec_time:.6}s", entry.original_size);
        samples.push(BenchSample {
            label,
            original_size: entry.original_size,
            encrypted_size: entry.encrypted_size,
            overhead: entry.encrypted_size - entry.original_size,
            exec_time,
            key_size,
        });
    }
    Ok(samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

pub const CSV_HEADER: [&str; 7] = [
    "sr_no",
    "file_type",
    "original_size_bytes",
    "encrypted_size_bytes",
    "overhead_bytes",
    "exec_time_seconds",
    "key_size_bytes",
];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    sr_no: usize,
    file_type: String,
    original_size_bytes: u64,
    encrypted_size_bytes: u64,
    overhead_bytes: u64,
    exec_time_seconds: f64,
    key_size_bytes: u64,
}

impl From<Row> for BenchSample {
    fn from(r: Row) -> Self {
        BenchSample {
            label: r.file_type,
            original_size: r.original_size_bytes,
            encrypted_size: r.encrypted_size_bytes,
            overhead: r.overhead_bytes,
            exec_time: r.exec_time_seconds,
            key_size: r.key_size_bytes,
        }
    }
}

fn rows(samples: &[BenchSample]) -> impl Iterator<Item = Row> + '_ {
    samples.iter().enumerate().map(|(i, s)| Row {
        sr_no: i + 1,
        file_type: s.label.clone(),
        original_size_bytes: s.original_size,
        encrypted_size_bytes: s.encrypted_size,
        overhead_bytes: s.overhead,
        exec_time_seconds: s.exec_time,
        key_size_bytes: s.key_size,
    })
}

pub fn emit_table(samples: &[BenchSample], format: TableFormat) -> Vec<u8> {
    match format {
        TableFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(Vec::new());
            w.write_record(CSV_HEADER).expect("write to Vec");
            for row in rows(samples) {
                w.serialize(row).expect("write to Vec");
            }
            w.into_inner().expect("flush to Vec")
        }
        TableFormat::Json => {
            let rows: Vec<Row> = rows(samples).collect();
            let mut out = serde_json::to_vec_pretty(&rows).expect("rows serialize");
            out.push(b'\n');
            out
        }
    }
}

pub fn parse_table(bytes: &[u8], format: TableFormat) -> Result<Vec<BenchSample>, BenchError> {
    let rows: Vec<Row> = match format {
        TableFormat::Csv => csv::Reader::from_reader(bytes)
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(|e| BenchError::Table(e.to_string()))?,
        TableFormat::Json => {
            serde_json::from_slice(bytes).map_err(|e| BenchError::Table(e.to_string()))?
        }
    };
    Ok(rows.into_iter().map(BenchSample::from).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(label: &str, n: u64, t: f64) -> BenchSample {
        let enc = crate::cipher::padded_size(n);
        BenchSample {
            label: label.into(),
            original_size: n,
            encrypted_size: enc,
            overhead: enc - n,
            exec_time: t,
            key_size: 141,
        }
    }

    #[test]
    fn reference_corpus_sizes() {
        let spec = CorpusSpec::default();
        assert_eq!(spec.entries.len(), 10);
        assert_eq!(spec.entries[0], ("Text".to_string(), 75));
        assert_eq!(spec.entries[9], ("Video".to_string(), 26246026));
    }

    #[test]
    fn corpus_bytes_are_seeded() {
        assert_eq!(corpus_bytes(1, 0, 100), corpus_bytes(1, 0, 100));
        assert_ne!(corpus_bytes(1, 0, 100), corpus_bytes(2, 0, 100));
        assert_ne!(corpus_bytes(1, 0, 100), corpus_bytes(1, 1, 100));
        assert!(corpus_bytes(1, 0, 0).is_empty());
    }

    #[test]
    fn make_corpus_sizes_and_zero_entry() {
        let tmp = tempfile::tempdir().unwrap();
        let spec = CorpusSpec {
            entries: vec![("A".into(), 0), ("B".into(), 33)],
            seed: 5,
        };
        let paths = make_corpus(&spec, tmp.path()).unwrap();
        assert_eq!(std::fs::metadata(&paths[0]).unwrap().len(), 0);
        assert_eq!(std::fs::metadata(&paths[1]).unwrap().len(), 33);

        let bad = CorpusSpec {
            entries: vec![("a/b".into(), 1)],
            seed: 5,
        };
        assert!(matches!(make_corpus(&bad, tmp.path()), Err(BenchError::BadLabel(_))));
    }

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn csv_shape() {
        let samples: Vec<_> = (0..10)
            .map(|i| sample(&format!("f{i}"), 100 * i as u64, 0.5 + i as f64))
            .collect();
        let csv = String::from_utf8(emit_table(&samples, TableFormat::Csv)).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 11);
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert_eq!(lines[1], "1,f0,0,16,16,0.5,141");

        let empty = String::from_utf8(emit_table(&[], TableFormat::Csv)).unwrap();
        assert_eq!(empty, format!("{}\n", CSV_HEADER.join(",")));
        assert!(parse_table(empty.as_bytes(), TableFormat::Csv).unwrap().is_empty());
    }

    #[test]
    fn json_field_names() {
        let json = emit_table(&[sample("Text", 75, 0.724)], TableFormat::Json);
        let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
        let obj = v[0].as_object().unwrap();
        for key in CSV_HEADER {
            assert!(obj.contains_key(key), "{key}");
        }
        assert_eq!(obj["file_type"], "Text");
    }

    #[test]
    fn table_roundtrip() {
        let samples = vec![
            sample("Text", 75, 0.724),
            sample("Power Point Presentation", 27553, 1.0 / 3.0),
            sample("Video, large", 26246026, 174.0),
        ];
        for fmt in [TableFormat::Csv, TableFormat::Json] {
            let bytes = emit_table(&samples, fmt);
            assert_eq!(parse_table(&bytes, fmt).unwrap(), samples);
        }
    }

    #[test]
    fn zero_repetitions_rejected() {
        let fs = std::sync::Arc::new(crate::fs::MemFs::new());
        let v = Vault::init(
            fs,
            Path::new("/d"),
            Path::new("/k"),
            crate::cipher::CipherConfig::default(),
        )
        .unwrap();
        assert!(matches!(run_bench(&[], &v, 0), Err(BenchError::NoRepetitions)));
    }
}
