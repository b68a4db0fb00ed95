//! Per-file key envelopes and the key root that holds them.
//!
//! An envelope serializes to exactly [`ENVELOPE_LEN`] bytes:
//!
//! | offset | len | field                               |
//! |--------|-----|-------------------------------------|
//! | 0      | 4   | magic `CVKE`                        |
//! | 4      | 1   | format version                      |
//! | 5      | 1   | cipher algorithm id                 |
//! | 6      | 32  | SHA-256 of the logical file name    |
//! | 38     | 16  | key bytes                           |
//! | 54     | 8   | creation time, epoch seconds, LE    |
//! | 62     | 32  | SHA-256 of the plaintext            |
//! | 94     | 47  | reserved, zero in version 1         |
//!
//! Key files are named by the lowercase hex of the file-name digest and live
//! under a key root that must not overlap the vault data root.

use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::rngs::OsRng;
use rand::RngCore;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cipher::{CipherConfig, RawKey};
use crate::fs::{disjoint, FsAdapter};

pub const ENVELOPE_LEN: usize = 141;
pub const ENVELOPE_MAGIC: [u8; 4] = *b"CVKE";
pub const ENVELOPE_VERSION: u8 = 1;
pub const RESERVED_LEN: usize = 47;

const _: () = assert!(4 + 1 + 1 + 32 + 16 + 8 + 32 + RESERVED_LEN == ENVELOPE_LEN);

pub type Digest32 = [u8; 32];

#[derive(Debug, Error)]
pub enum KeystoreError {
    #[error("file id must not be empty")]
    EmptyFileId,
    #[error("key envelope must be {ENVELOPE_LEN} bytes, got {0}")]
    BadLength(usize),
    #[error("key envelope has bad magic")]
    BadMagic,
    #[error("unsupported key envelope version {0}")]
    UnsupportedVersion(u8),
    #[error("key for {0:?} not found")]
    KeyNotFound(String),
    #[error("key root {key_root} overlaps data root {data_root}")]
    SeparationViolation { key_root: PathBuf, data_root: PathBuf },
    #[error("storage full: {0}")]
    StorageFull(io::Error),
    #[error("permission denied: {0}")]
    PermissionDenied(io::Error),
    #[error(transparent)]
    Io(io::Error),
}

impl From<io::Error> for KeystoreError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::StorageFull => KeystoreError::StorageFull(e),
            io::ErrorKind::PermissionDenied => KeystoreError::PermissionDenied(e),
            _ => KeystoreError::Io(e),
        }
    }
}

pub fn sha256(data: &[u8]) -> Digest32 {
    Sha256::digest(data).into()
}

/// Digest used to name both the key file and the ciphertext object.
pub fn file_id_hash(file_id: &str) -> Digest32 {
    sha256(file_id.as_bytes())
}

#[derive(Clone, PartialEq, Eq)]
pub struct KeyEnvelope {
    pub version: u8,
    pub algorithm_id: u8,
    pub file_id_hash: Digest32,
    pub key_bytes: [u8; 16],
    pub created_at: u64,
    pub plaintext_checksum: Digest32,
    pub reserved: [u8; RESERVED_LEN],
}

impl std::fmt::Debug for KeyEnvelope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyEnvelope")
            .field("version", &self.version)
            .field("algorithm_id", &self.algorithm_id)
            .field("file_id_hash", &hex::encode(self.file_id_hash))
            .field("created_at", &self.created_at)
            .field("plaintext_checksum", &hex::encode(self.plaintext_checksum))
            .finish_non_exhaustive()
    }
}

impl KeyEnvelope {
    /// Fresh envelope with a random key from the OS generator.
    pub fn generate(
        file_id: &str,
        plaintext_checksum: Digest32,
        cfg: CipherConfig,
    ) -> Result<Self, KeystoreError> {
        if file_id.is_empty() {
            return Err(KeystoreError::EmptyFileId);
        }
        let mut key_bytes = [0u8; 16];
        OsRng.fill_bytes(&mut key_bytes);
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(Self {
            version: ENVELOPE_VERSION,
            algorithm_id: cfg.algorithm_id(),
            file_id_hash: file_id_hash(file_id),
            key_bytes,
            created_at,
            plaintext_checksum,
            reserved: [0u8; RESERVED_LEN],
        })
    }

    pub fn cipher_config(&self) -> CipherConfig {
        CipherConfig::from_algorithm_id(self.algorithm_id)
    }

    /// IV derived from the file-name digest and the creation time; never
    /// stored.
    pub fn iv(&self) -> [u8; 16] {
        let mut h = Sha256::new();
        h.update(b"cryptvault-iv");
        h.update(self.file_id_hash);
        h.update(self.created_at.to_le_bytes());
        let digest = h.finalize();
        let mut iv = [0u8; 16];
        iv.copy_from_slice(&digest[..16]);
        iv
    }

    pub fn raw_key(&self) -> RawKey {
        RawKey {
            key: self.key_bytes,
            iv: self.iv(),
        }
    }

    pub fn to_bytes(&self) -> [u8; ENVELOPE_LEN] {
        let mut out = [0u8; ENVELOPE_LEN];
        out[0..4].copy_from_slice(&ENVELOPE_MAGIC);
        out[4] = self.version;
        out[5] = self.algorithm_id;
        out[6..38].copy_from_slice(&self.file_id_hash);
        out[38..54].copy_from_slice(&self.key_bytes);
        out[54..62].copy_from_slice(&self.created_at.to_le_bytes());
        out[62..94].copy_from_slice(&self.plaintext_checksum);
        out[94..].copy_from_slice(&self.reserved);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, KeystoreError> {
        if bytes.len() != ENVELOPE_LEN {
            return Err(KeystoreError::BadLength(bytes.len()));
        }
        if bytes[0..4] != ENVELOPE_MAGIC {
            return Err(KeystoreError::BadMagic);
        }
        let version = bytes[4];
        if version == 0 || version > ENVELOPE_VERSION {
            return Err(KeystoreError::UnsupportedVersion(version));
        }
        let mut env = KeyEnvelope {
            version,
            algorithm_id: bytes[5],
            file_id_hash: [0; 32],
            key_bytes: [0; 16],
            created_at: u64::from_le_bytes(bytes[54..62].try_into().unwrap()),
            plaintext_checksum: [0; 32],
            reserved: [0; RESERVED_LEN],
        };
        env.file_id_hash.copy_from_slice(&bytes[6..38]);
        env.key_bytes.copy_from_slice(&bytes[38..54]);
        env.plaintext_checksum.copy_from_slice(&bytes[62..94]);
        env.reserved.copy_from_slice(&bytes[94..]);
        Ok(env)
    }
}

pub fn generate_key(
    file_id: &str,
    plaintext_digest: Digest32,
    cfg: CipherConfig,
) -> Result<KeyEnvelope, KeystoreError> {
    KeyEnvelope::generate(file_id, plaintext_digest, cfg)
}

pub fn serialize_envelope(env: &KeyEnvelope) -> Vec<u8> {
    env.to_bytes().to_vec()
}

pub fn parse_envelope(bytes: &[u8]) -> Result<KeyEnvelope, KeystoreError> {
    KeyEnvelope::from_bytes(bytes)
}

/// Directory of key envelopes kept apart from a vault's data root.
pub struct KeyStore<F: FsAdapter> {
    fs: Arc<F>,
    root: PathBuf,
}

impl<F: FsAdapter> KeyStore<F> {
    /// Opens (creating if needed) the key root, refusing any layout where it
    /// overlaps `data_root`.
    pub fn open(fs: Arc<F>, key_root: &Path, data_root: &Path) -> Result<Self, KeystoreError> {
        fs.create_dir_all(key_root)?;
        let root = fs.resolve(key_root)?;
        let data = match fs.resolve(data_root) {
            Ok(p) => p,
            Err(e) if e.kind() == io::ErrorKind::NotFound => data_root.to_path_buf(),
            Err(e) => return Err(e.into()),
        };
        if !disjoint(&root, &data) {
            return Err(KeystoreError::SeparationViolation {
                key_root: root,
                data_root: data,
            });
        }
        Ok(Self { fs, root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for_hash(&self, hash: &Digest32) -> PathBuf {
        self.root.join(hex::encode(hash))
    }

    pub fn path_for(&self, file_id: &str) -> PathBuf {
        self.path_for_hash(&file_id_hash(file_id))
    }

    pub fn store(&self, env: &KeyEnvelope) -> Result<PathBuf, KeystoreError> {
        let path = self.path_for_hash(&env.file_id_hash);
        self.fs.write_file_atomic(&path, &env.to_bytes())?;
        Ok(path)
    }

    pub fn load(&self, file_id: &str) -> Result<KeyEnvelope, KeystoreError> {
        let path = self.path_for(file_id);
        let bytes = self.fs.read_file(&path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => KeystoreError::KeyNotFound(file_id.to_owned()),
            _ => e.into(),
        })?;
        KeyEnvelope::from_bytes(&bytes)
    }

    pub fn remove(&self, file_id: &str) -> Result<(), KeystoreError> {
        self.fs
            .remove(&self.path_for(file_id))
            .map_err(|e| match e.kind() {
                io::ErrorKind::NotFound => KeystoreError::KeyNotFound(file_id.to_owned()),
                _ => e.into(),
            })
    }

    /// Size in bytes of the stored key file for `file_id`.
    pub fn stored_len(&self, file_id: &str) -> Result<u64, KeystoreError> {
        self.fs
            .stat(&self.path_for(file_id))
            .map(|s| s.len)
            .map_err(|e| match e.kind() {
                io::ErrorKind::NotFound => KeystoreError::KeyNotFound(file_id.to_owned()),
                _ => e.into(),
            })
    }
}
