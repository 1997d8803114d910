//! C interface: load a trained model, compute signatures from descriptors and
//! query a signature database.
//!
//! Models and databases are opaque heap handles released with the matching
//! `_free` function. Every fallible call returns an [`HprnStatus`]; on failure
//! the message is kept per thread and read with [`hprn_last_error_message`].
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use hprn_core::descriptor::Modality;
use hprn_core::io::decode_checkpoint;
use hprn_core::net::{Architecture, MAP_COLS, MAP_ROWS};
use hprn_core::retrieval::{query_top_k, DatabaseEntry, SignatureDatabase};
use hprn_core::spectral::SpectralSignature;
use hprn_core::train::Model;
use hprn_core::trajectory::Pose2D;
use hprn_core::{Error, Grid};

/// Rows and columns of a signature.
pub const HPRN_SIGNATURE_SIDE: usize = 32;
pub const HPRN_DESCRIPTOR_ROWS: usize = 40;
pub const HPRN_DESCRIPTOR_COLS: usize = 120;

// Literal values keep the generated header self-contained.
const _: () = assert!(HPRN_DESCRIPTOR_ROWS == MAP_ROWS && HPRN_DESCRIPTOR_COLS == MAP_COLS);

pub const HPRN_MODALITY_LIDAR: u8 = 0;
pub const HPRN_MODALITY_RADAR: u8 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HprnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Data = 5,
    Panic = 6,
}

/// Opaque trained model.
pub struct HprnModel {
    model: Model,
}

/// Opaque signature database.
pub struct HprnDatabase {
    db: SignatureDatabase,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> HprnStatus {
    match e {
        Error::Io(_) => HprnStatus::Io,
        Error::Format(_) => HprnStatus::Format,
        Error::InvalidConfig(_) | Error::ShapeMismatch(_) | Error::DuplicateId(_) => HprnStatus::InvalidArgument,
        _ => HprnStatus::Data,
    }
}

/// Runs `f`, recording its error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (HprnStatus, String)>) -> HprnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HprnStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HprnStatus::Panic
        }
    }
}

fn core(e: Error) -> (HprnStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (HprnStatus, String) {
    (HprnStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (HprnStatus, String) {
    (HprnStatus::InvalidArgument, msg.into())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hprn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated and
/// always NUL-terminated when `len > 0`). Returns the full message length
/// including the terminator, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hprn_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            // SAFETY: caller guarantees `len` writable bytes at `buf`.
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n - 1) = 0;
            }
        }
        bytes.len()
    })
}

/// Loads a checkpoint file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hprn_model_load(path: *const c_char, out: *mut *mut HprnModel) -> HprnStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: checked non-null; caller guarantees NUL termination.
        let path = unsafe { CStr::from_ptr(path) }.to_str().map_err(|_| invalid("path is not UTF-8"))?;
        let bytes = std::fs::read(Path::new(path)).map_err(|e| core(Error::Io(e)))?;
        let state = decode_checkpoint(&bytes).map_err(core)?;
        // SAFETY: checked non-null.
        unsafe { *out = Box::into_raw(Box::new(HprnModel { model: state.model })) };
        Ok(())
    })
}

/// Creates an untrained shared model; `reduced` selects the narrow network.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hprn_model_init(seed: u64, reduced: bool, out: *mut *mut HprnModel) -> HprnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let arch = if reduced { Architecture::reduced() } else { Architecture::standard() };
        let model = Model::init(seed, arch, false);
        // SAFETY: checked non-null.
        unsafe { *out = Box::into_raw(Box::new(HprnModel { model })) };
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hprn_model_free(model: *mut HprnModel) {
    if !model.is_null() {
        // SAFETY: caller passes a handle created by `Box::into_raw`.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Computes the signature of one row-major descriptor of
/// `HPRN_DESCRIPTOR_ROWS x HPRN_DESCRIPTOR_COLS` values, writing
/// `HPRN_SIGNATURE_SIDE^2` values to `out`.
///
/// # Safety
/// `model` must be a live handle, `descriptor` must point to `descriptor_len`
/// readable doubles and `out` to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hprn_model_signature(
    model: *const HprnModel,
    modality: u8,
    descriptor: *const f64,
    descriptor_len: usize,
    out: *mut f64,
    out_len: usize,
) -> HprnStatus {
    guard(|| {
        if model.is_null() || descriptor.is_null() || out.is_null() {
            return Err(null("model, descriptor or out"));
        }
        let modality = Modality::from_code(modality).ok_or_else(|| invalid(format!("unknown modality code {modality}")))?;
        if descriptor_len != MAP_ROWS * MAP_COLS {
            return Err(invalid(format!("descriptor needs {} values, got {descriptor_len}", MAP_ROWS * MAP_COLS)));
        }
        if out_len < HPRN_SIGNATURE_SIDE * HPRN_SIGNATURE_SIDE {
            return Err(invalid(format!("output needs {} values", HPRN_SIGNATURE_SIDE * HPRN_SIGNATURE_SIDE)));
        }
        // SAFETY: caller guarantees `descriptor_len` readable values.
        let input = unsafe { std::slice::from_raw_parts(descriptor, descriptor_len) };
        if input.iter().any(|v| !v.is_finite()) {
            return Err(invalid("descriptor holds non-finite values"));
        }
        let grid = Grid::from_vec(MAP_ROWS, MAP_COLS, input.to_vec()).map_err(core)?;
        // SAFETY: checked non-null; handle is live per contract.
        let sig = unsafe { &(*model).model }.signature(modality, &grid).map_err(core)?;
        let values = sig.values.as_slice();
        // SAFETY: caller guarantees `out_len` writable values, checked above.
        unsafe { std::ptr::copy_nonoverlapping(values.as_ptr(), out, values.len()) };
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hprn_database_new(out: *mut *mut HprnDatabase) -> HprnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: checked non-null.
        unsafe { *out = Box::into_raw(Box::new(HprnDatabase { db: SignatureDatabase::new() })) };
        Ok(())
    })
}

/// # Safety
/// `db` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hprn_database_free(db: *mut HprnDatabase) {
    if !db.is_null() {
        // SAFETY: caller passes a handle created by `Box::into_raw`.
        drop(unsafe { Box::from_raw(db) });
    }
}

/// Number of entries, or 0 for a null handle.
///
/// # Safety
/// `db` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hprn_database_len(db: *const HprnDatabase) -> usize {
    if db.is_null() {
        return 0;
    }
    // SAFETY: live handle per contract.
    unsafe { &(*db).db }.len()
}

unsafe fn read_signature(sig: *const f64, len: usize) -> Result<SpectralSignature, (HprnStatus, String)> {
    if sig.is_null() {
        return Err(null("signature"));
    }
    if len != HPRN_SIGNATURE_SIDE * HPRN_SIGNATURE_SIDE {
        return Err(invalid(format!("signature needs {} values, got {len}", HPRN_SIGNATURE_SIDE * HPRN_SIGNATURE_SIDE)));
    }
    // SAFETY: caller guarantees `len` readable values.
    let values = unsafe { std::slice::from_raw_parts(sig, len) }.to_vec();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("signature holds non-finite values"));
    }
    let values = Grid::from_vec(HPRN_SIGNATURE_SIDE, HPRN_SIGNATURE_SIDE, values).map_err(core)?;
    Ok(SpectralSignature { values })
}

/// Adds a signature with its pose under a unique `id`.
///
/// # Safety
/// `db` must be a live handle and `signature` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hprn_database_add(
    db: *mut HprnDatabase,
    id: u64,
    signature: *const f64,
    len: usize,
    x: f64,
    y: f64,
    yaw: f64,
) -> HprnStatus {
    guard(|| {
        if db.is_null() {
            return Err(null("db"));
        }
        // SAFETY: forwarded caller contract.
        let signature = unsafe { read_signature(signature, len) }?;
        let entry = DatabaseEntry { id, signature, pose: Pose2D::new(0.0, x, y, yaw), session: String::new() };
        // SAFETY: live handle per contract.
        unsafe { &mut (*db).db }.add(entry).map_err(core)
    })
}

/// Writes up to `k` nearest entries, closest first, into `ids` and
/// `distances`; `found` receives how many were written.
///
/// # Safety
/// `db` must be a live handle, `signature` must point to `len` doubles, and
/// `ids`/`distances` to `k` writable slots each.
#[no_mangle]
pub unsafe extern "C" fn hprn_database_query(
    db: *const HprnDatabase,
    signature: *const f64,
    len: usize,
    k: usize,
    ids: *mut u64,
    distances: *mut f64,
    found: *mut usize,
) -> HprnStatus {
    guard(|| {
        if db.is_null() || ids.is_null() || distances.is_null() || found.is_null() {
            return Err(null("db, ids, distances or found"));
        }
        // SAFETY: forwarded caller contract.
        let q = unsafe { read_signature(signature, len) }?;
        // SAFETY: live handle per contract.
        let table = unsafe { &(*db).db };
        let hits = query_top_k(table, &q, k.min(table.len())).map_err(core)?;
        for (i, (id, d)) in hits.iter().enumerate() {
            // SAFETY: `hits.len() <= k` slots are writable.
            unsafe {
                *ids.add(i) = *id;
                *distances.add(i) = *d;
            }
        }
        // SAFETY: checked non-null.
        unsafe { *found = hits.len() };
        Ok(())
    })
}
