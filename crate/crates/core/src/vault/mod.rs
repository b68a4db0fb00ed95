//! On-demand per-file encryption against a data root.
//!
//! Layout:
//!
//! ```text
//! data_root/INDEX
//! data_root/objects/<hex(sha256(name))>.enc   ciphertext, padded_size(n) bytes
//! key_root/<hex(sha256(name))>                key envelope, 141 bytes
//! ```
//!
//! All storage goes through an [`FsAdapter`], so the same vault runs on the
//! host filesystem or fully in memory.

mod index;

use std::collections::{BTreeMap, HashMap};
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::cipher::{self, CipherConfig, CipherError};
use crate::fs::{DiskFs, FsAdapter};
use crate::keystore::{self, Digest32, KeyEnvelope, KeyStore, KeystoreError};

pub use index::INDEX_FILE;

const OBJECTS_DIR: &str = "objects";

#[derive(Debug, Error)]
pub enum VaultError {
    #[error("invalid logical name {0:?}")]
    InvalidName(String),
    #[error("{0:?} already exists")]
    DuplicateName(String),
    #[error("{0:?} not found")]
    EntryNotFound(String),
    #[error("key for {0:?} not found")]
    KeyNotFound(String),
    #[error("integrity check failed for {name:?}: {reason}")]
    IntegrityFailure { name: String, reason: String },
    #[error("malformed ciphertext for {name:?}: {len} bytes")]
    MalformedCiphertext { name: String, len: usize },
    #[error("corrupt index: {0}")]
    CorruptIndex(String),
    #[error("data root {0} is already initialized")]
    AlreadyInitialized(PathBuf),
    #[error("data root {0} is not initialized")]
    NotInitialized(PathBuf),
    #[error("key root {key_root} overlaps data root {data_root}")]
    SeparationViolation { key_root: PathBuf, data_root: PathBuf },
    #[error("storage full: {0}")]
    StorageFull(io::Error),
    #[error("permission denied: {0}")]
    PermissionDenied(io::Error),
    #[error(transparent)]
    Keystore(KeystoreError),
    #[error(transparent)]
    Cipher(CipherError),
    #[error(transparent)]
    Io(io::Error),
}

impl VaultError {
    /// True for errors that mean stored data or keys are damaged, as opposed
    /// to bad requests or environment problems.
    pub fn is_corruption(&self) -> bool {
        matches!(
            self,
            VaultError::KeyNotFound(_)
                | VaultError::IntegrityFailure { .. }
                | VaultError::MalformedCiphertext { .. }
                | VaultError::CorruptIndex(_)
                | VaultError::Keystore(
                    KeystoreError::BadLength(_)
                        | KeystoreError::BadMagic
                        | KeystoreError::UnsupportedVersion(_)
                )
        )
    }
}

impl From<io::Error> for VaultError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::StorageFull => VaultError::StorageFull(e),
            io::ErrorKind::PermissionDenied => VaultError::PermissionDenied(e),
            _ => VaultError::Io(e),
        }
    }
}

impl From<KeystoreError> for VaultError {
    fn from(e: KeystoreError) -> Self {
        match e {
            KeystoreError::KeyNotFound(name) => VaultError::KeyNotFound(name),
            KeystoreError::SeparationViolation {
                key_root,
                data_root,
            } => VaultError::SeparationViolation {
                key_root,
                data_root,
            },
            KeystoreError::StorageFull(e) => VaultError::StorageFull(e),
            KeystoreError::PermissionDenied(e) => VaultError::PermissionDenied(e),
            KeystoreError::Io(e) => VaultError::Io(e),
            other => VaultError::Keystore(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VaultEntry {
    pub logical_name: String,
    pub ciphertext_path: PathBuf,
    pub original_size: u64,
    pub encrypted_size: u64,
    pub plaintext_checksum: Digest32,
    pub created_at: u64,
}

impl VaultEntry {
    pub fn overhead(&self) -> u64 {
        self.encrypted_size.saturating_sub(self.original_size)
    }
}

pub fn validate_name(name: &str) -> Result<(), VaultError> {
    if name.is_empty() || name.contains(['/', '\\', '\0']) || name == "." || name == ".." {
        return Err(VaultError::InvalidName(name.to_owned()));
    }
    Ok(())
}

pub type DiskVault = Vault<DiskFs>;

pub struct Vault<F: FsAdapter> {
    fs: Arc<F>,
    data_root: PathBuf,
    keys: KeyStore<F>,
    cfg: CipherConfig,
    index: Mutex<BTreeMap<String, VaultEntry>>,
    name_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl<F: FsAdapter> std::fmt::Debug for Vault<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Vault")
            .field("data_root", &self.data_root)
            .field("key_root", &self.keys.root())
            .field("cfg", &self.cfg)
            .finish_non_exhaustive()
    }
}

impl DiskVault {
    pub fn init_disk(data_root: &Path, key_root: &Path, cfg: CipherConfig) -> Result<Self, VaultError> {
        Vault::init(Arc::new(DiskFs), data_root, key_root, cfg)
    }

    pub fn open_disk(data_root: &Path, key_root: &Path) -> Result<Self, VaultError> {
        Vault::open(Arc::new(DiskFs), data_root, key_root)
    }
}

impl<F: FsAdapter> Vault<F> {
    /// Creates a new vault with an empty, persisted index.
    pub fn init(fs: Arc<F>, data_root: &Path, key_root: &Path, cfg: CipherConfig) -> Result<Self, VaultError> {
        let (data_root, keys) = Self::prepare_roots(&fs, data_root, key_root)?;
        if fs.exists(&data_root.join(INDEX_FILE)) {
            return Err(VaultError::AlreadyInitialized(data_root));
        }
        cfg.algorithm().map_err(VaultError::Cipher)?;
        fs.create_dir_all(&data_root.join(OBJECTS_DIR))?;
        let vault = Vault {
            fs,
            data_root,
            keys,
            cfg,
            index: Mutex::new(BTreeMap::new()),
            name_locks: Mutex::new(HashMap::new()),
        };
        vault.persist(&vault.index.lock().unwrap())?;
        Ok(vault)
    }

    /// Reopens a vault previously created with [`Vault::init`].
    pub fn open(fs: Arc<F>, data_root: &Path, key_root: &Path) -> Result<Self, VaultError> {
        let (data_root, keys) = Self::prepare_roots(&fs, data_root, key_root)?;
        let text = match fs.read_file(&data_root.join(INDEX_FILE)) {
            Ok(bytes) => String::from_utf8(bytes).map_err(|_| VaultError::CorruptIndex("not utf-8".into()))?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(VaultError::NotInitialized(data_root))
            }
            Err(e) => return Err(e.into()),
        };
        let parsed = index::parse(&text, &data_root).map_err(VaultError::CorruptIndex)?;
        fs.create_dir_all(&data_root.join(OBJECTS_DIR))?;
        Ok(Vault {
            fs,
            data_root,
            keys,
            cfg: CipherConfig::from_algorithm_id(parsed.algorithm_id),
            index: Mutex::new(parsed.entries),
            name_locks: Mutex::new(HashMap::new()),
        })
    }

    fn prepare_roots(fs: &Arc<F>, data_root: &Path, key_root: &Path) -> Result<(PathBuf, KeyStore<F>), VaultError> {
        fs.create_dir_all(data_root)?;
        let data_root = fs.resolve(data_root)?;
        let keys = KeyStore::open(fs.clone(), key_root, &data_root)?;
        Ok((data_root, keys))
    }

    pub fn data_root(&self) -> &Path {
        &self.data_root
    }

    pub fn key_root(&self) -> &Path {
        self.keys.root()
    }

    pub fn config(&self) -> CipherConfig {
        self.cfg
    }

    pub fn key_store(&self) -> &KeyStore<F> {
        &self.keys
    }

    fn name_lock(&self, name: &str) -> Arc<Mutex<()>> {
        self.name_locks
            .lock()
            .unwrap()
            .entry(name.to_owned())
            .or_default()
            .clone()
    }

    fn persist(&self, entries: &BTreeMap<String, VaultEntry>) -> Result<(), VaultError> {
        let text = index::render(self.cfg.algorithm_id(), entries, &self.data_root);
        self.fs
            .write_file_atomic(&self.data_root.join(INDEX_FILE), text.as_bytes())?;
        Ok(())
    }

    fn object_path(&self, name: &str) -> PathBuf {
        let hash = hex::encode(keystore::file_id_hash(name));
        self.data_root.join(index::object_rel_path(&hash))
    }

    /// Encrypts `plaintext` under a fresh key. Fails with
    /// [`VaultError::DuplicateName`] if `logical_name` is already stored.
    pub fn put(&self, logical_name: &str, plaintext: &[u8]) -> Result<VaultEntry, VaultError> {
        self.put_with(logical_name, plaintext, false)
    }

    /// Like [`Vault::put`] but replaces an existing entry, rotating its key.
    pub fn overwrite(&self, logical_name: &str, plaintext: &[u8]) -> Result<VaultEntry, VaultError> {
        self.put_with(logical_name, plaintext, true)
    }

    pub fn put_with(&self, logical_name: &str, plaintext: &[u8], overwrite: bool) -> Result<VaultEntry, VaultError> {
        validate_name(logical_name)?;
        let lock = self.name_lock(logical_name);
        let _guard = lock.lock().unwrap();

        let existed = self.index.lock().unwrap().contains_key(logical_name);
        if existed && !overwrite {
            return Err(VaultError::DuplicateName(logical_name.to_owned()));
        }

        let checksum = keystore::sha256(plaintext);
        let env = KeyEnvelope::generate(logical_name, checksum, self.cfg)?;
        let ciphertext = cipher::encrypt(plaintext, &env.raw_key(), self.cfg).map_err(VaultError::Cipher)?;
        let object = self.object_path(logical_name);

        self.fs.write_file_atomic(&object, &ciphertext)?;
        if let Err(e) = self.keys.store(&env) {
            if !existed {
                let _ = self.fs.remove(&object);
            }
            return Err(e.into());
        }

        let entry = VaultEntry {
            logical_name: logical_name.to_owned(),
            ciphertext_path: object.clone(),
            original_size: plaintext.len() as u64,
            encrypted_size: ciphertext.len() as u64,
            plaintext_checksum: checksum,
            created_at: env.created_at,
        };
        let mut index = self.index.lock().unwrap();
        let previous = index.insert(logical_name.to_owned(), entry.clone());
        if let Err(e) = self.persist(&index) {
            match previous {
                Some(prev) => {
                    index.insert(logical_name.to_owned(), prev);
                }
                None => {
                    index.remove(logical_name);
                    let _ = self.fs.remove(&object);
                    let _ = self.keys.remove(logical_name);
                }
            }
            return Err(e);
        }
        log::debug!(
            "put {logical_name:?}: {} -> {} bytes",
            entry.original_size,
            entry.encrypted_size
        );
        Ok(entry)
    }

    fn entry(&self, logical_name: &str) -> Result<VaultEntry, VaultError> {
        self.index
            .lock()
            .unwrap()
            .get(logical_name)
            .cloned()
            .ok_or_else(|| VaultError::EntryNotFound(logical_name.to_owned()))
    }

    /// Decrypts and verifies a stored file.
    pub fn get(&self, logical_name: &str) -> Result<Vec<u8>, VaultError> {
        let lock = self.name_lock(logical_name);
        let _guard = lock.lock().unwrap();

        let entry = self.entry(logical_name)?;
        let integrity = |reason: &str| VaultError::IntegrityFailure {
            name: logical_name.to_owned(),
            reason: reason.to_owned(),
        };

        let env = self.keys.load(logical_name)?;
        if env.file_id_hash != keystore::file_id_hash(logical_name) {
            return Err(integrity("key envelope belongs to a different file"));
        }
        if env.plaintext_checksum != entry.plaintext_checksum {
            return Err(integrity("key envelope does not match index entry"));
        }

        let ciphertext = match self.fs.read_file(&entry.ciphertext_path) {
            Ok(ct) => ct,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(integrity("ciphertext missing"))
            }
            Err(e) => return Err(e.into()),
        };

        let plaintext = match cipher::decrypt(&ciphertext, &env.raw_key(), env.cipher_config()) {
            Ok(p) => p,
            Err(CipherError::MalformedCiphertext(len)) => {
                return Err(VaultError::MalformedCiphertext {
                    name: logical_name.to_owned(),
                    len,
                })
            }
            Err(CipherError::InvalidPadding) => return Err(integrity("invalid padding after decryption")),
            Err(e) => return Err(VaultError::Cipher(e)),
        };

        if plaintext.len() as u64 != entry.original_size {
            return Err(integrity("decrypted length differs from recorded size"));
        }
        if keystore::sha256(&plaintext) != entry.plaintext_checksum {
            return Err(integrity("checksum mismatch"));
        }
        Ok(plaintext)
    }

    /// Entries sorted by logical name.
    pub fn list(&self) -> Vec<VaultEntry> {
        self.index.lock().unwrap().values().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.index.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entry metadata with `encrypted_size` read from the ciphertext on
    /// storage.
    pub fn stat(&self, logical_name: &str) -> Result<VaultEntry, VaultError> {
        let mut entry = self.entry(logical_name)?;
        match self.fs.stat(&entry.ciphertext_path) {
            Ok(st) => entry.encrypted_size = st.len,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(VaultError::IntegrityFailure {
                    name: logical_name.to_owned(),
                    reason: "ciphertext missing".into(),
                })
            }
            Err(e) => return Err(e.into()),
        }
        Ok(entry)
    }

    /// Size in bytes of the stored key envelope for `logical_name`.
    pub fn key_size(&self, logical_name: &str) -> Result<u64, VaultError> {
        self.entry(logical_name)?;
        Ok(self.keys.stored_len(logical_name)?)
    }

    /// Deletes the ciphertext, the key envelope and the index entry.
    pub fn remove(&self, logical_name: &str) -> Result<VaultEntry, VaultError> {
        let lock = self.name_lock(logical_name);
        let _guard = lock.lock().unwrap();

        let entry = {
            let mut index = self.index.lock().unwrap();
            let entry = index
                .remove(logical_name)
                .ok_or_else(|| VaultError::EntryNotFound(logical_name.to_owned()))?;
            if let Err(e) = self.persist(&index) {
                index.insert(logical_name.to_owned(), entry);
                return Err(e);
            }
            entry
        };
        match self.fs.remove(&entry.ciphertext_path) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e.into()),
            _ => {}
        }
        match self.keys.remove(logical_name) {
            Ok(()) | Err(KeystoreError::KeyNotFound(_)) => {}
            Err(e) => return Err(e.into()),
        }
        Ok(entry)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn name_validation() {
        for bad in ["", "a/b", "a\\b", ".", "..", "x\0y"] {
            assert!(matches!(validate_name(bad), Err(VaultError::InvalidName(_))), "{bad:?}");
        }
        for good in ["a.txt", "Power Point", "ünïcode", "100%"] {
            validate_name(good).unwrap();
        }
    }

    #[test]
    fn corruption_classification() {
        assert!(VaultError::KeyNotFound("x".into()).is_corruption());
        assert!(VaultError::Keystore(KeystoreError::BadMagic).is_corruption());
        assert!(!VaultError::EntryNotFound("x".into()).is_corruption());
        assert!(!VaultError::DuplicateName("x".into()).is_corruption());
    }
}
