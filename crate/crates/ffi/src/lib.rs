//! C ABI for cryptvault.
//!
//! Vaults are exposed as an opaque `CvVault` handle. Every fallible call
//! returns a [`CvStatus`]; on failure a message for the calling thread is
//! available from [`cv_last_error_message`]. Buffers returned by the library
//! must be released with [`cv_buffer_free`].
//!
//! Panics never cross the boundary: they are caught and reported as
//! [`CvStatus::Panic`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use cryptvault::stats::{linear_fit, StatsError};
use cryptvault::{CipherConfig, DiskVault, VaultEntry, VaultError};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvStatus {
    Ok = 0,
    InvalidArgument = 1,
    NotFound = 2,
    Duplicate = 3,
    KeyNotFound = 4,
    IntegrityFailure = 5,
    SeparationViolation = 6,
    NotInitialized = 7,
    AlreadyInitialized = 8,
    Io = 9,
    DegenerateInput = 10,
    BufferTooSmall = 11,
    Panic = 99,
}

/// Opaque vault handle.
pub struct CvVault {
    inner: DiskVault,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CvEntry {
    pub original_size: u64,
    pub encrypted_size: u64,
    pub created_at: u64,
    pub plaintext_checksum: [u8; 32],
}

impl From<&VaultEntry> for CvEntry {
    fn from(e: &VaultEntry) -> Self {
        CvEntry {
            original_size: e.original_size,
            encrypted_size: e.encrypted_size,
            created_at: e.created_at,
            plaintext_checksum: e.plaintext_checksum,
        }
    }
}

/// Library-owned byte buffer.
#[repr(C)]
#[derive(Debug)]
pub struct CvBuffer {
    pub data: *mut u8,
    pub len: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CvFit {
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub r_squared: f64,
    pub n: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &VaultError) -> CvStatus {
    match e {
        VaultError::InvalidName(_) => CvStatus::InvalidArgument,
        VaultError::DuplicateName(_) => CvStatus::Duplicate,
        VaultError::EntryNotFound(_) => CvStatus::NotFound,
        VaultError::KeyNotFound(_) => CvStatus::KeyNotFound,
        VaultError::SeparationViolation { .. } => CvStatus::SeparationViolation,
        VaultError::NotInitialized(_) => CvStatus::NotInitialized,
        VaultError::AlreadyInitialized(_) => CvStatus::AlreadyInitialized,
        e if e.is_corruption() => CvStatus::IntegrityFailure,
        _ => CvStatus::Io,
    }
}

struct Fail(CvStatus, String);

impl From<VaultError> for Fail {
    fn from(e: VaultError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn invalid(msg: &str) -> Fail {
    Fail(CvStatus::InvalidArgument, msg.to_owned())
}

/// Runs `f`, converting errors and panics to a status and recording the
/// message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CvStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CvStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(&format!("{what} is not valid UTF-8")))
}

unsafe fn vault_ref<'a>(v: *const CvVault) -> Result<&'a DiskVault, Fail> {
    v.as_ref()
        .map(|v| &v.inner)
        .ok_or_else(|| invalid("vault handle is null"))
}

/// Creates a new vault. `*out` receives a handle to free with
/// [`cv_vault_free`].
#[no_mangle]
pub unsafe extern "C" fn cv_vault_init(
    data_root: *const c_char,
    key_root: *const c_char,
    out: *mut *mut CvVault,
) -> CvStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        let data = PathBuf::from(str_arg(data_root, "data_root")?);
        let keys = PathBuf::from(str_arg(key_root, "key_root")?);
        let inner = DiskVault::init_disk(&data, &keys, CipherConfig::default())?;
        *out = Box::into_raw(Box::new(CvVault { inner }));
        Ok(())
    })
}

/// Opens an existing vault.
#[no_mangle]
pub unsafe extern "C" fn cv_vault_open(
    data_root: *const c_char,
    key_root: *const c_char,
    out: *mut *mut CvVault,
) -> CvStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        let data = PathBuf::from(str_arg(data_root, "data_root")?);
        let keys = PathBuf::from(str_arg(key_root, "key_root")?);
        let inner = DiskVault::open_disk(&data, &keys)?;
        *out = Box::into_raw(Box::new(CvVault { inner }));
        Ok(())
    })
}

/// Releases a vault handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cv_vault_free(vault: *mut CvVault) {
    if !vault.is_null() {
        drop(Box::from_raw(vault));
    }
}

/// Encrypts `len` bytes at `data` under `name`. With `overwrite` false an
/// existing name yields `Duplicate`. `out_entry` may be null.
#[no_mangle]
pub unsafe extern "C" fn cv_vault_put(
    vault: *const CvVault,
    name: *const c_char,
    data: *const u8,
    len: usize,
    overwrite: bool,
    out_entry: *mut CvEntry,
) -> CvStatus {
    guard(|| {
        let v = vault_ref(vault)?;
        let name = str_arg(name, "name")?;
        let bytes = if len == 0 {
            &[][..]
        } else if data.is_null() {
            return Err(invalid("data is null"));
        } else {
            std::slice::from_raw_parts(data, len)
        };
        let entry = v.put_with(name, bytes, overwrite)?;
        if let Some(out) = out_entry.as_mut() {
            *out = CvEntry::from(&entry);
        }
        Ok(())
    })
}

/// Decrypts `name` into a new buffer owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn cv_vault_get(
    vault: *const CvVault,
    name: *const c_char,
    out: *mut CvBuffer,
) -> CvStatus {
    guard(|| {
        let v = vault_ref(vault)?;
        let name = str_arg(name, "name")?;
        let out = out.as_mut().ok_or_else(|| invalid("out is null"))?;
        let data = v.get(name)?.into_boxed_slice();
        out.len = data.len();
        out.data = Box::into_raw(data) as *mut u8;
        Ok(())
    })
}

/// Releases a buffer from [`cv_vault_get`]. Empty buffers are ignored.
#[no_mangle]
pub unsafe extern "C" fn cv_buffer_free(buf: CvBuffer) {
    if !buf.data.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(buf.data, buf.len)));
    }
}

#[no_mangle]
pub unsafe extern "C" fn cv_vault_stat(
    vault: *const CvVault,
    name: *const c_char,
    out: *mut CvEntry,
) -> CvStatus {
    guard(|| {
        let v = vault_ref(vault)?;
        let name = str_arg(name, "name")?;
        let out = out.as_mut().ok_or_else(|| invalid("out is null"))?;
        *out = CvEntry::from(&v.stat(name)?);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cv_vault_remove(vault: *const CvVault, name: *const c_char) -> CvStatus {
    guard(|| {
        let v = vault_ref(vault)?;
        v.remove(str_arg(name, "name")?)?;
        Ok(())
    })
}

/// Number of entries; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn cv_vault_len(vault: *const CvVault) -> usize {
    vault.as_ref().map(|v| v.inner.len()).unwrap_or(0)
}

/// Copies the name of the `index`-th entry (sorted by name) into `buf` as a
/// NUL-terminated string. `*out_len` receives the name length without the
/// terminator, also when the buffer is too small.
#[no_mangle]
pub unsafe extern "C" fn cv_vault_name_at(
    vault: *const CvVault,
    index: usize,
    buf: *mut c_char,
    cap: usize,
    out_len: *mut usize,
) -> CvStatus {
    guard(|| {
        let v = vault_ref(vault)?;
        let entries = v.list();
        let entry = entries
            .get(index)
            .ok_or_else(|| Fail(CvStatus::NotFound, format!("no entry at index {index}")))?;
        let name = entry.logical_name.as_bytes();
        if let Some(l) = out_len.as_mut() {
            *l = name.len();
        }
        if buf.is_null() || cap < name.len() + 1 {
            return Err(Fail(
                CvStatus::BufferTooSmall,
                format!("need {} bytes", name.len() + 1),
            ));
        }
        ptr::copy_nonoverlapping(name.as_ptr(), buf as *mut u8, name.len());
        *buf.add(name.len()) = 0;
        Ok(())
    })
}

/// Ciphertext size for a plaintext of `len` bytes.
#[no_mangle]
pub extern "C" fn cv_padded_size(len: u64) -> u64 {
    cryptvault::padded_size(len)
}

/// Size of every stored key envelope.
#[no_mangle]
pub extern "C" fn cv_envelope_len() -> usize {
    cryptvault::ENVELOPE_LEN
}

/// Least-squares line through `n` points.
#[no_mangle]
pub unsafe extern "C" fn cv_linear_fit(
    xs: *const f64,
    ys: *const f64,
    n: usize,
    out: *mut CvFit,
) -> CvStatus {
    guard(|| {
        if xs.is_null() || ys.is_null() {
            return Err(invalid("xs or ys is null"));
        }
        let out = out.as_mut().ok_or_else(|| invalid("out is null"))?;
        let xs = std::slice::from_raw_parts(xs, n);
        let ys = std::slice::from_raw_parts(ys, n);
        let points: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
        let fit = linear_fit(&points).map_err(|e| match e {
            StatsError::DegenerateInput(_) => Fail(CvStatus::DegenerateInput, e.to_string()),
            other => Fail(CvStatus::Io, other.to_string()),
        })?;
        *out = CvFit {
            a: fit.a,
            b: fit.b,
            r: fit.r,
            r_squared: fit.r_squared,
            n: fit.n,
        };
        Ok(())
    })
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread; empty if none.
#[no_mangle]
pub extern "C" fn cv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn cv_status_str(status: CvStatus) -> *const c_char {
    let s: &'static CStr = match status {
        CvStatus::Ok => c"ok",
        CvStatus::InvalidArgument => c"invalid argument",
        CvStatus::NotFound => c"not found",
        CvStatus::Duplicate => c"duplicate name",
        CvStatus::KeyNotFound => c"key not found",
        CvStatus::IntegrityFailure => c"integrity failure",
        CvStatus::SeparationViolation => c"separation violation",
        CvStatus::NotInitialized => c"not initialized",
        CvStatus::AlreadyInitialized => c"already initialized",
        CvStatus::Io => c"i/o error",
        CvStatus::DegenerateInput => c"degenerate input",
        CvStatus::BufferTooSmall => c"buffer too small",
        CvStatus::Panic => c"panic",
    };
    s.as_ptr()
}
