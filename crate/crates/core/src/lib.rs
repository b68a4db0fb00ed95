//! Per-file, on-demand encryption vault.
//!
//! Each stored file gets its own key. The ciphertext lives under a data root
//! and is exactly [`cipher::padded_size`] bytes long; the key is kept in a
//! fixed-size envelope under a separate key root. The [`bench`] and [`stats`]
//! modules measure the space and time cost of that scheme.

pub mod bench;
pub mod cipher;
pub mod cli;
pub mod fs;
pub mod keystore;
pub mod stats;
pub mod vault;

pub use cipher::{padded_size, CipherConfig, RawKey, BLOCK_SIZE};
pub use keystore::{KeyEnvelope, KeyStore, ENVELOPE_LEN};
pub use vault::{DiskVault, Vault, VaultEntry, VaultError};
