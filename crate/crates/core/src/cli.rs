//! Command-line front end.
//!
//! Data goes to the output stream only after a command has fully succeeded;
//! diagnostics go to the error stream. Exit status is 0 on success, 1 for
//! usage and environment errors, 2 when stored data or keys are damaged.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{self, BenchError, CorpusSpec, TableFormat};
use crate::cipher::CipherConfig;
use crate::stats::{self, StatsError};
use crate::vault::{DiskVault, VaultError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_CORRUPT: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl From<OutputFormat> for TableFormat {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Csv => TableFormat::Csv,
            OutputFormat::Json => TableFormat::Json,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cryptvault", version, about = "Per-file encryption vault with a separate key store")]
pub struct Cli {
    #[command(flatten)]
    pub config: CliConfig,

    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by all subcommands: flags first, then environment, then
/// defaults.
#[derive(Debug, Clone, clap::Args)]
pub struct CliConfig {
    /// Directory holding ciphertexts and the index.
    #[arg(long, global = true, env = "CRYPTVAULT_DATA_ROOT", default_value = "cryptvault-data")]
    pub data_root: PathBuf,

    /// Directory holding key envelopes; must not overlap the data root.
    #[arg(long, global = true, env = "CRYPTVAULT_KEY_ROOT", default_value = "cryptvault-keys")]
    pub key_root: PathBuf,

    /// Machine-readable output format.
    #[arg(long = "format", global = true, value_enum, default_value = "csv")]
    pub output_format: OutputFormat,

    /// Corpus seed for `bench`.
    #[arg(long, global = true, default_value_t = bench::DEFAULT_SEED)]
    pub seed: u64,

    /// Timed repetitions per file for `bench`.
    #[arg(long = "reps", global = true, default_value_t = bench::DEFAULT_REPETITIONS)]
    pub repetitions: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create an empty vault.
    Init,
    /// Encrypt a file into the vault.
    Put {
        file: PathBuf,
        /// Logical name; defaults to the file name.
        #[arg(long)]
        name: Option<String>,
        /// Replace an existing entry, rotating its key.
        #[arg(long)]
        overwrite: bool,
    },
    /// Decrypt an entry to the output stream or a file.
    Get {
        name: String,
        /// Write the plaintext here instead of the output stream.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List entries.
    Ls,
    /// Show one entry, with sizes read from storage.
    Stat { name: String },
    /// Delete an entry, its ciphertext and its key.
    Rm { name: String },
    /// Run the encryption-overhead benchmark in a scratch vault.
    Bench {
        /// Write the table here instead of the output stream.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write plot-data files into this directory.
        #[arg(long)]
        plots: Option<PathBuf>,
        /// Scratch directory for corpus and vault; a temporary one by default.
        #[arg(long)]
        workdir: Option<PathBuf>,
        /// Custom corpus entry LABEL:SIZE, repeatable. Replaces the default corpus.
        #[arg(long = "entry", value_parser = parse_entry)]
        entries: Vec<(String, u64)>,
    },
    /// Fit the relations in a benchmark table.
    Report {
        /// Benchmark table, CSV or JSON (chosen by extension).
        table: PathBuf,
        /// Also write plot-data files into this directory.
        #[arg(long)]
        plots: Option<PathBuf>,
    },
}

fn parse_entry(s: &str) -> Result<(String, u64), String> {
    let (label, size) = s
        .rsplit_once(':')
        .ok_or_else(|| format!("expected LABEL:SIZE, got {s:?}"))?;
    let size = size.parse().map_err(|e| format!("bad size in {s:?}: {e}"))?;
    Ok((label.to_owned(), size))
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<VaultError> for Failure {
    fn from(e: VaultError) -> Self {
        let code = if e.is_corruption() { EXIT_CORRUPT } else { EXIT_USER };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Vault(v) => v.into(),
            other => user(other),
        }
    }
}

impl From<StatsError> for Failure {
    fn from(e: StatsError) -> Self {
        user(e)
    }
}

fn user(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_USER,
        message: e.to_string(),
    }
}

#[derive(Serialize)]
struct ListRow<'a> {
    name: &'a str,
    original_size: u64,
    encrypted_size: u64,
    overhead: u64,
    created_at: u64,
    checksum: String,
}

fn render_entries(entries: &[crate::vault::VaultEntry], format: OutputFormat) -> Vec<u8> {
    let rows: Vec<ListRow> = entries
        .iter()
        .map(|e| ListRow {
            name: &e.logical_name,
            original_size: e.original_size,
            encrypted_size: e.encrypted_size,
            overhead: e.overhead(),
            created_at: e.created_at,
            checksum: hex::encode(e.plaintext_checksum),
        })
        .collect();
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            w.write_record(["name", "original_size", "encrypted_size", "overhead", "created_at", "checksum"])
                .expect("write to Vec");
            for r in &rows {
                w.serialize(r).expect("write to Vec");
            }
            w.into_inner().expect("flush to Vec")
        }
        OutputFormat::Json => {
            let mut out = serde_json::to_vec_pretty(&rows).expect("rows serialize");
            out.push(b'\n');
            out
        }
    }
}

fn open_vault(cfg: &CliConfig) -> Result<DiskVault, Failure> {
    Ok(DiskVault::open_disk(&cfg.data_root, &cfg.key_root)?)
}

fn write_file(path: &Path, data: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, data).map_err(|e| user(format!("{}: {e}", path.display())))
}

fn table_format_for(path: &Path) -> TableFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => TableFormat::Json,
        _ => TableFormat::Csv,
    }
}

fn execute(cli: Cli, err: &mut dyn Write) -> Result<Vec<u8>, Failure> {
    let cfg = cli.config;
    match cli.command {
        Command::Init => {
            let v = DiskVault::init_disk(&cfg.data_root, &cfg.key_root, CipherConfig::default())?;
            let _ = writeln!(
                err,
                "initialized vault: data {} keys {}",
                v.data_root().display(),
                v.key_root().display()
            );
            Ok(Vec::new())
        }
        Command::Put {
            file,
            name,
            overwrite,
        } => {
            let name = match name {
                Some(n) => n,
                None => file
                    .file_name()
                    .and_then(|n| n.to_str())
                    .map(str::to_owned)
                    .ok_or_else(|| user(format!("cannot derive a name from {}", file.display())))?,
            };
            let data = std::fs::read(&file).map_err(|e| user(format!("{}: {e}", file.display())))?;
            let v = open_vault(&cfg)?;
            let entry = v.put_with(&name, &data, overwrite)?;
            Ok(render_entries(&[entry], cfg.output_format))
        }
        Command::Get { name, out } => {
            let v = open_vault(&cfg)?;
            let data = v.get(&name)?;
            match out {
                Some(path) => {
                    write_file(&path, &data)?;
                    Ok(Vec::new())
                }
                None => Ok(data),
            }
        }
        Command::Ls => {
            let v = open_vault(&cfg)?;
            Ok(render_entries(&v.list(), cfg.output_format))
        }
        Command::Stat { name } => {
            let v = open_vault(&cfg)?;
            Ok(render_entries(&[v.stat(&name)?], cfg.output_format))
        }
        Command::Rm { name } => {
            let v = open_vault(&cfg)?;
            let entry = v.remove(&name)?;
            let _ = writeln!(err, "removed {:?}", entry.logical_name);
            Ok(Vec::new())
        }
        Command::Bench {
            out,
            plots,
            workdir,
            entries,
        } => {
            let scratch;
            let work = match workdir {
                Some(w) => w,
                None => {
                    scratch = tempfile::tempdir().map_err(user)?;
                    scratch.path().to_path_buf()
                }
            };
            let spec = if entries.is_empty() {
                CorpusSpec::reference(cfg.seed)
            } else {
                CorpusSpec {
                    entries,
                    seed: cfg.seed,
                }
            };
            let corpus = bench::make_corpus(&spec, &work.join("corpus"))?;
            let vault = DiskVault::init_disk(&work.join("data"), &work.join("keys"), CipherConfig::default())?;
            let samples = bench::run_bench(&corpus, &vault, cfg.repetitions)?;
            let table = bench::emit_table(&samples, cfg.output_format.into());
            if let Some(dir) = plots {
                let report = stats::analyze(&samples)?;
                stats::emit_plot_data(&report, &samples, &dir)?;
            }
            match out {
                Some(path) => {
                    write_file(&path, &table)?;
                    Ok(Vec::new())
                }
                None => Ok(table),
            }
        }
        Command::Report { table, plots } => {
            let bytes = std::fs::read(&table).map_err(|e| user(format!("{}: {e}", table.display())))?;
            let samples = bench::parse_table(&bytes, table_format_for(&table))?;
            let report = stats::analyze(&samples)?;
            if let Some(dir) = plots {
                stats::emit_plot_data(&report, &samples, &dir)?;
            }
            Ok(match cfg.output_format {
                OutputFormat::Json => {
                    let mut v = serde_json::to_vec_pretty(&report).expect("report serializes");
                    v.push(b'\n');
                    v
                }
                OutputFormat::Csv => stats::render_report(&report).into_bytes(),
            })
        }
    }
}

/// Runs the CLI over `args` (including the program name) and returns the
/// exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USER
                }
            };
        }
    };
    match execute(cli, err) {
        Ok(data) => {
            if let Err(e) = out.write_all(&data).and_then(|_| out.flush()) {
                let _ = writeln!(err, "error: {e}");
                return EXIT_USER;
            }
            EXIT_OK
        }
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
