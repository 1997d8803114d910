//! Exercises the C interface through its Rust symbols.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use hprn_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { hprn_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn descriptor(seed: usize) -> Vec<f64> {
    (0..HPRN_DESCRIPTOR_ROWS * HPRN_DESCRIPTOR_COLS).map(|i| if (i * 7 + seed * 13) % 17 == 0 { 1.0 } else { 0.0 }).collect()
}

const SIG: usize = HPRN_SIGNATURE_SIDE * HPRN_SIGNATURE_SIDE;

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(hprn_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn signatures_and_queries_round_trip() {
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { hprn_model_init(3, true, &mut model) }, HprnStatus::Ok);
    let mut db = ptr::null_mut();
    assert_eq!(unsafe { hprn_database_new(&mut db) }, HprnStatus::Ok);

    let mut sigs = Vec::new();
    for i in 0..5 {
        let d = descriptor(i);
        let mut s = vec![0.0; SIG];
        let st = unsafe { hprn_model_signature(model, HPRN_MODALITY_LIDAR, d.as_ptr(), d.len(), s.as_mut_ptr(), s.len()) };
        assert_eq!(st, HprnStatus::Ok);
        let norm: f64 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        assert_eq!(unsafe { hprn_database_add(db, 10 + i as u64, s.as_ptr(), s.len(), i as f64, 0.0, 0.0) }, HprnStatus::Ok);
        sigs.push(s);
    }
    assert_eq!(unsafe { hprn_database_len(db) }, 5);

    let (mut ids, mut dists, mut found) = ([0u64; 8], [0.0f64; 8], 0usize);
    let st = unsafe { hprn_database_query(db, sigs[2].as_ptr(), SIG, 8, ids.as_mut_ptr(), dists.as_mut_ptr(), &mut found) };
    assert_eq!(st, HprnStatus::Ok);
    assert_eq!(found, 5);
    assert_eq!(ids[0], 12);
    assert_eq!(dists[0], 0.0);
    assert!(dists[..found].windows(2).all(|w| w[0] <= w[1]));

    // Duplicate id.
    assert_eq!(unsafe { hprn_database_add(db, 10, sigs[0].as_ptr(), SIG, 0.0, 0.0, 0.0) }, HprnStatus::InvalidArgument);
    assert!(last_error().contains("duplicate"));

    unsafe {
        hprn_database_free(db);
        hprn_model_free(model);
    }
}

#[test]
fn argument_errors_are_reported() {
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { hprn_model_init(1, true, &mut model) }, HprnStatus::Ok);
    let d = descriptor(0);
    let mut s = vec![0.0; SIG];
    let st = unsafe { hprn_model_signature(model, 9, d.as_ptr(), d.len(), s.as_mut_ptr(), s.len()) };
    assert_eq!(st, HprnStatus::InvalidArgument);
    assert!(last_error().contains("modality"));
    let st = unsafe { hprn_model_signature(model, 0, d.as_ptr(), 10, s.as_mut_ptr(), s.len()) };
    assert_eq!(st, HprnStatus::InvalidArgument);
    let st = unsafe { hprn_model_signature(ptr::null(), 0, d.as_ptr(), d.len(), s.as_mut_ptr(), s.len()) };
    assert_eq!(st, HprnStatus::NullPointer);
    assert_eq!(unsafe { hprn_model_init(1, true, ptr::null_mut()) }, HprnStatus::NullPointer);
    unsafe { hprn_model_free(model) };
    unsafe { hprn_model_free(ptr::null_mut()) };
    assert_eq!(unsafe { hprn_database_len(ptr::null()) }, 0);
}

#[test]
fn loading_bad_files_fails_cleanly() {
    let dir = std::env::temp_dir().join(format!("hprn-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let missing = CString::new(dir.join("missing.hprn").to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { hprn_model_load(missing.as_ptr(), &mut model) }, HprnStatus::Io);
    let junk_path = dir.join("junk.hprn");
    std::fs::write(&junk_path, b"HPRX\x01\0\0\0").unwrap();
    let junk = CString::new(junk_path.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { hprn_model_load(junk.as_ptr(), &mut model) }, HprnStatus::Format);
    assert!(last_error().contains("magic"));
    assert!(model.is_null());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn generated_header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/hprn.h")).unwrap();
    for name in ["hprn_model_load", "hprn_model_signature", "hprn_database_query", "hprn_last_error_message", "HPRN_STATUS_OK", "HprnModel"] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
