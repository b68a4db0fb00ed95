//! Block-cipher envelope with full-block padding.
//!
//! Ciphertext carries no IV, header or tag: its length is exactly
//! [`padded_size`] of the plaintext length. The IV is recomputed from the key
//! envelope (see [`crate::keystore::KeyEnvelope::iv`]) and integrity is checked
//! by the vault against a plaintext digest.

use aes::Aes128;
use cbc::cipher::block_padding::NoPadding;
use cbc::cipher::{BlockDecryptMut, BlockEncryptMut, KeyIvInit};
use thiserror::Error;

/// Cipher block size in bytes. Every ciphertext length is a multiple of this.
pub const BLOCK_SIZE: usize = 16;

/// Largest number of bytes padding can add to a plaintext.
pub const MAX_PADDING: usize = BLOCK_SIZE;

type Aes128CbcEnc = cbc::Encryptor<Aes128>;
type Aes128CbcDec = cbc::Decryptor<Aes128>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CipherError {
    #[error("invalid padding")]
    InvalidPadding,
    #[error("malformed ciphertext: length {0} is not a positive multiple of {BLOCK_SIZE}")]
    MalformedCiphertext(usize),
    #[error("unsupported algorithm id {0}")]
    UnsupportedAlgorithm(u8),
}

/// Cipher identifiers as recorded in key envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Algorithm {
    Aes128Cbc = 1,
}

impl Algorithm {
    pub fn id(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for Algorithm {
    type Error = CipherError;

    fn try_from(id: u8) -> Result<Self, Self::Error> {
        match id {
            1 => Ok(Algorithm::Aes128Cbc),
            other => Err(CipherError::UnsupportedAlgorithm(other)),
        }
    }
}

/// Cipher selection. The block size is fixed at [`BLOCK_SIZE`]; only the
/// algorithm tag varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CipherConfig {
    algorithm_id: u8,
}

impl CipherConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm_id: algorithm.id(),
        }
    }

    /// Builds a config from a raw tag without validating it. Unknown tags are
    /// rejected by [`encrypt`] and [`decrypt`].
    pub fn from_algorithm_id(algorithm_id: u8) -> Self {
        Self { algorithm_id }
    }

    pub fn block_size(&self) -> usize {
        BLOCK_SIZE
    }

    pub fn algorithm_id(&self) -> u8 {
        self.algorithm_id
    }

    pub fn algorithm(&self) -> Result<Algorithm, CipherError> {
        Algorithm::try_from(self.algorithm_id)
    }
}

impl Default for CipherConfig {
    fn default() -> Self {
        Self::new(Algorithm::Aes128Cbc)
    }
}

/// Per-file secret material.
#[derive(Clone, PartialEq, Eq)]
pub struct RawKey {
    pub key: [u8; 16],
    pub iv: [u8; 16],
}

impl std::fmt::Debug for RawKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RawKey").finish_non_exhaustive()
    }
}

/// Size of the padded plaintext (and therefore of the ciphertext) for an
/// input of `len` bytes: the smallest multiple of 16 strictly greater than
/// `len`.
pub const fn padded_size(len: u64) -> u64 {
    (len / BLOCK_SIZE as u64) * BLOCK_SIZE as u64 + BLOCK_SIZE as u64
}

/// Bytes added by encryption for an input of `len` bytes, in `1..=16`.
pub const fn overhead(len: u64) -> u64 {
    padded_size(len) - len
}

/// Appends `k` copies of the byte `k`, where `k = 16 - len % 16`.
pub fn pad(plaintext: &[u8]) -> Vec<u8> {
    let k = BLOCK_SIZE - plaintext.len() % BLOCK_SIZE;
    let mut out = Vec::with_capacity(plaintext.len() + k);
    out.extend_from_slice(plaintext);
    out.resize(plaintext.len() + k, k as u8);
    out
}

/// Inverse of [`pad`].
pub fn unpad(padded: &[u8]) -> Result<&[u8], CipherError> {
    if padded.is_empty() || !padded.len().is_multiple_of(BLOCK_SIZE) {
        return Err(CipherError::InvalidPadding);
    }
    let k = padded[padded.len() - 1] as usize;
    if k == 0 || k > BLOCK_SIZE {
        return Err(CipherError::InvalidPadding);
    }
    let (body, tail) = padded.split_at(padded.len() - k);
    if tail.iter().any(|&b| b as usize != k) {
        return Err(CipherError::InvalidPadding);
    }
    Ok(body)
}

pub fn encrypt(plaintext: &[u8], key: &RawKey, cfg: CipherConfig) -> Result<Vec<u8>, CipherError> {
    match cfg.algorithm()? {
        Algorithm::Aes128Cbc => {
            let mut buf = pad(plaintext);
            let len = buf.len();
            Aes128CbcEnc::new(&key.key.into(), &key.iv.into())
                .encrypt_padded_mut::<NoPadding>(&mut buf, len)
                .expect("buffer is block aligned");
            Ok(buf)
        }
    }
}

pub fn decrypt(ciphertext: &[u8], key: &RawKey, cfg: CipherConfig) -> Result<Vec<u8>, CipherError> {
    let algorithm = cfg.algorithm()?;
    if ciphertext.is_empty() || !ciphertext.len().is_multiple_of(BLOCK_SIZE) {
        return Err(CipherError::MalformedCiphertext(ciphertext.len()));
    }
    match algorithm {
        Algorithm::Aes128Cbc => {
            let mut buf = ciphertext.to_vec();
            Aes128CbcDec::new(&key.key.into(), &key.iv.into())
                .decrypt_padded_mut::<NoPadding>(&mut buf)
                .map_err(|_| CipherError::MalformedCiphertext(ciphertext.len()))?;
            let plain_len = unpad(&buf)?.len();
            buf.truncate(plain_len);
            Ok(buf)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TABLE_SIZES: [(u64, u64); 10] = [
        (75, 80),
        (5024, 5040),
        (8746, 8752),
        (20032, 20048),
        (22016, 22032),
        (27553, 27568),
        (43040, 43056),
        (905446, 905456),
        (9180972, 9180976),
        (26246026, 26246032),
    ];

    fn key() -> RawKey {
        RawKey {
            key: *b"0123456789abcdef",
            iv: *b"fedcba9876543210",
        }
    }

    #[test]
    fn padded_size_matches_table() {
        for (orig, enc) in TABLE_SIZES {
            assert_eq!(padded_size(orig), enc, "original size {orig}");
        }
        assert_eq!(padded_size(0), 16);
        assert_eq!(overhead(75), 5);
        assert_eq!(overhead(5024), 16);
        assert_eq!(overhead(27553), 15);
    }

    #[test]
    fn pad_examples() {
        let p = pad(&[b'x'; 75]);
        assert_eq!(p.len(), 80);
        assert!(p[75..].iter().all(|&b| b == 5));

        let p = pad(&[0u8; 16]);
        assert_eq!(p.len(), 32);
        assert!(p[16..].iter().all(|&b| b == 16));

        assert_eq!(pad(&[]), vec![16u8; 16]);
    }

    #[test]
    fn unpad_rejects_bad_padding() {
        assert_eq!(unpad(&[16u8; 16]).unwrap(), &[] as &[u8]);

        let mut block = [7u8; 16];
        block[15] = 0;
        assert_eq!(unpad(&block), Err(CipherError::InvalidPadding));

        let mut block = [3u8; 16];
        block[15] = 17;
        assert_eq!(unpad(&block), Err(CipherError::InvalidPadding));

        let mut block = [0u8; 16];
        block[13] = 9;
        block[14] = 3;
        block[15] = 3;
        assert_eq!(unpad(&block), Err(CipherError::InvalidPadding));

        assert_eq!(unpad(&[]), Err(CipherError::InvalidPadding));
        assert_eq!(unpad(&[1u8; 17]), Err(CipherError::InvalidPadding));
    }

    #[test]
    fn encrypt_boundary_sizes_roundtrip() {
        for n in [0usize, 1, 15, 16, 17, 75, 5024] {
            let plain: Vec<u8> = (0..n).map(|i| (i * 31 + 7) as u8).collect();
            let ct = encrypt(&plain, &key(), CipherConfig::default()).unwrap();
            assert_eq!(ct.len() as u64, padded_size(n as u64));
            assert_eq!(decrypt(&ct, &key(), CipherConfig::default()).unwrap(), plain);
        }
    }

    #[test]
    fn encrypt_large_table_rows() {
        for (orig, enc) in [TABLE_SIZES[7], TABLE_SIZES[9]] {
            let plain = vec![0xA5u8; orig as usize];
            let ct = encrypt(&plain, &key(), CipherConfig::default()).unwrap();
            assert_eq!(ct.len() as u64, enc);
        }
    }

    #[test]
    fn encrypt_is_deterministic_and_hides_plaintext() {
        let plain = b"the same plaintext, encrypted twice".to_vec();
        let a = encrypt(&plain, &key(), CipherConfig::default()).unwrap();
        let b = encrypt(&plain, &key(), CipherConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_ne!(&a[..plain.len()], &plain[..]);
    }

    #[test]
    fn decrypt_rejects_non_block_lengths() {
        let cfg = CipherConfig::default();
        assert_eq!(
            decrypt(&[0u8; 81], &key(), cfg),
            Err(CipherError::MalformedCiphertext(81))
        );
        assert_eq!(
            decrypt(&[], &key(), cfg),
            Err(CipherError::MalformedCiphertext(0))
        );
    }

    #[test]
    fn unknown_algorithm_is_rejected() {
        let cfg = CipherConfig::from_algorithm_id(99);
        assert_eq!(
            encrypt(b"abc", &key(), cfg),
            Err(CipherError::UnsupportedAlgorithm(99))
        );
        assert_eq!(
            decrypt(&[0u8; 16], &key(), cfg),
            Err(CipherError::UnsupportedAlgorithm(99))
        );
    }

    #[test]
    fn wrong_key_never_returns_original() {
        let plain = vec![42u8; 300];
        let ct = encrypt(&plain, &key(), CipherConfig::default()).unwrap();
        let mut other = key();
        other.key[0] ^= 1;
        match decrypt(&ct, &other, CipherConfig::default()) {
            Ok(out) => assert_ne!(out, plain),
            Err(e) => assert_eq!(e, CipherError::InvalidPadding),
        }
    }

    proptest! {
        #[test]
        fn overhead_bounds(n in 0u64..1_000_000_000) {
            let p = padded_size(n);
            prop_assert_eq!(p % 16, 0);
            prop_assert!((1..=16).contains(&(p - n)));
        }

        #[test]
        fn pad_unpad_roundtrip(data in proptest::collection::vec(any::<u8>(), 0..1024)) {
            let padded = pad(&data);
            prop_assert_eq!(padded.len() as u64, padded_size(data.len() as u64));
            let k = *padded.last().unwrap() as usize;
            prop_assert!((1..=16).contains(&k));
            prop_assert_eq!(unpad(&padded).unwrap(), &data[..]);
        }

        #[test]
        fn encrypt_decrypt_roundtrip(
            data in proptest::collection::vec(any::<u8>(), 0..1024),
            k in any::<[u8; 16]>(),
            iv in any::<[u8; 16]>(),
        ) {
            let key = RawKey { key: k, iv };
            let ct = encrypt(&data, &key, CipherConfig::default()).unwrap();
            prop_assert_eq!(ct.len() as u64, padded_size(data.len() as u64));
            prop_assert_eq!(decrypt(&ct, &key, CipherConfig::default()).unwrap(), data);
        }
    }
}
