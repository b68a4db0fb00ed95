//! The `INDEX` file: one tab-separated line per entry, in field order
//! `name  ciphertext_path  original_size  encrypted_size  checksum  created_at`.
//! Names are percent-encoded; the ciphertext path is relative to the data root.

use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};

use super::VaultEntry;

pub const INDEX_FILE: &str = "INDEX";
const HEADER_PREFIX: &str = "# cryptvault-index v1 algorithm=";

const NAME_ESCAPES: &AsciiSet = &CONTROLS.add(b'%').add(b'\t').add(b' ').add(b'#');

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexFile {
    pub algorithm_id: u8,
    pub entries: BTreeMap<String, VaultEntry>,
}

pub fn render(algorithm_id: u8, entries: &BTreeMap<String, VaultEntry>, data_root: &Path) -> String {
    let mut out = format!("{HEADER_PREFIX}{algorithm_id}\n");
    for e in entries.values() {
        let rel = e
            .ciphertext_path
            .strip_prefix(data_root)
            .unwrap_or(&e.ciphertext_path);
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            utf8_percent_encode(&e.logical_name, NAME_ESCAPES),
            rel.display(),
            e.original_size,
            e.encrypted_size,
            hex::encode(e.plaintext_checksum),
            e.created_at,
        ));
    }
    out
}

pub fn parse(text: &str, data_root: &Path) -> Result<IndexFile, String> {
    let mut lines = text.lines().enumerate();
    let algorithm_id = match lines.next() {
        Some((_, header)) => header
            .strip_prefix(HEADER_PREFIX)
            .and_then(|s| s.trim().parse::<u8>().ok())
            .ok_or_else(|| format!("bad index header {header:?}"))?,
        None => return Err("empty index".into()),
    };
    let mut entries = BTreeMap::new();
    for (lineno, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |what: &str| format!("index line {}: {what}", lineno + 1);
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(err("expected 6 fields"));
        }
        let logical_name = percent_decode_str(fields[0])
            .decode_utf8()
            .map_err(|_| err("name is not utf-8"))?
            .into_owned();
        let rel = Path::new(fields[1]);
        if rel.is_absolute() || rel.components().any(|c| !matches!(c, Component::Normal(_))) {
            return Err(err("ciphertext path escapes the data root"));
        }
        let mut checksum = [0u8; 32];
        hex::decode_to_slice(fields[4], &mut checksum).map_err(|_| err("bad checksum"))?;
        let entry = VaultEntry {
            logical_name: logical_name.clone(),
            ciphertext_path: data_root.join(rel),
            original_size: fields[2].parse().map_err(|_| err("bad original size"))?,
            encrypted_size: fields[3].parse().map_err(|_| err("bad encrypted size"))?,
            plaintext_checksum: checksum,
            created_at: fields[5].parse().map_err(|_| err("bad timestamp"))?,
        };
        if entries.insert(logical_name, entry).is_some() {
            return Err(err("duplicate name"));
        }
    }
    Ok(IndexFile {
        algorithm_id,
        entries,
    })
}

pub fn object_rel_path(hash_hex: &str) -> PathBuf {
    PathBuf::from("objects").join(format!("{hash_hex}.enc"))
}
