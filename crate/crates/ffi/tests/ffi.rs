use std::ffi::{c_char, CStr, CString};
use std::ptr;

use lsc_ffi::*;

fn fixture(name: &str) -> CString {
    let path = format!("{}/../core/tests/fixtures/{name}.json", env!("CARGO_MANIFEST_DIR"));
    CString::new(std::fs::read_to_string(path).unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(lsc_last_error()) }.to_string_lossy().into_owned()
}

unsafe fn take_string(p: *mut c_char) -> String {
    let s = CStr::from_ptr(p).to_string_lossy().into_owned();
    lsc_string_free(p);
    s
}

unsafe fn graph(name: &str) -> *mut LscGraph {
    let mut g = ptr::null_mut();
    assert_eq!(lsc_graph_from_json(fixture(name).as_ptr(), &mut g), LscStatus::Ok);
    g
}

#[test]
fn decide_verify_recover_round_trip() {
    unsafe {
        let g = graph("fig4");
        let (mut n_o, mut n_l) = (0usize, 0usize);
        assert_eq!(lsc_graph_counts(g, &mut n_o, &mut n_l), LscStatus::Ok);
        assert_eq!((n_o, n_l), (6, 3));

        let mut ident = false;
        let mut cert = ptr::null_mut();
        assert_eq!(lsc_decide(g, -1, &mut ident, &mut cert), LscStatus::Ok);
        assert!(ident);

        let mut json = ptr::null_mut();
        assert_eq!(lsc_certificate_to_json(cert, &mut json), LscStatus::Ok);
        let text = take_string(json);
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc.as_array().map(Vec::len), Some(6));

        let c_text = CString::new(text).unwrap();
        let mut cert2 = ptr::null_mut();
        assert_eq!(lsc_certificate_from_json(g, c_text.as_ptr(), &mut cert2), LscStatus::Ok);
        let mut valid = false;
        assert_eq!(lsc_certificate_verify(cert2, &mut valid), LscStatus::Ok);
        assert!(valid, "{}", last_error());

        let (mut el, mut eo) = (f64::NAN, f64::NAN);
        assert_eq!(lsc_recover_round_trip(cert2, 7, &mut el, &mut eo), LscStatus::Ok);
        assert!(el < 1e-8 && eo < 1e-8, "{el} {eo}");

        lsc_certificate_free(cert);
        lsc_certificate_free(cert2);
        lsc_graph_free(g);
    }
}

#[test]
fn non_identifiable_graph_gives_partial_certificate() {
    unsafe {
        let g = graph("fig6");
        let mut ident = true;
        let mut cert = ptr::null_mut();
        assert_eq!(lsc_decide(g, -1, &mut ident, &mut cert), LscStatus::Ok);
        assert!(!ident);
        let mut valid = true;
        assert_eq!(lsc_certificate_verify(cert, &mut valid), LscStatus::Ok);
        assert!(!valid);
        assert!(!last_error().is_empty());
        let (mut el, mut eo) = (0.0, 0.0);
        assert_eq!(lsc_recover_round_trip(cert, 1, &mut el, &mut eo), LscStatus::Numeric);
        lsc_certificate_free(cert);

        let mut can = ptr::null_mut();
        assert_eq!(lsc_graph_canonicalize(g, &mut can), LscStatus::Ok);
        assert_eq!(lsc_decide(can, 2, &mut ident, ptr::null_mut()), LscStatus::Ok);
        assert!(ident);
        let mut json = ptr::null_mut();
        assert_eq!(lsc_graph_to_json(can, &mut json), LscStatus::Ok);
        let doc: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        assert!(doc["edges"].is_array());
        lsc_graph_free(can);
        lsc_graph_free(g);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(lsc_graph_from_json(ptr::null(), &mut g), LscStatus::NullPointer);
        assert!(g.is_null());
        let bad = CString::new("{\"observed\": [\"a\"], \"latent\": [], \"edges\": [[\"a\", \"b\"]]}").unwrap();
        assert_eq!(lsc_graph_from_json(bad.as_ptr(), &mut g), LscStatus::Parse);
        assert!(g.is_null());
        assert!(!last_error().is_empty());

        let bytes = [0xffu8, 0xfe, 0];
        assert_eq!(lsc_graph_from_json(bytes.as_ptr().cast(), &mut g), LscStatus::InvalidUtf8);

        let mut ident = false;
        assert_eq!(lsc_decide(ptr::null(), 1, &mut ident, ptr::null_mut()), LscStatus::NullPointer);

        let g = graph("fig2a");
        assert!(last_error().is_empty());
        let garbage = CString::new("[{\"v\": \"nope\"}]").unwrap();
        let mut cert = ptr::null_mut();
        assert_eq!(lsc_certificate_from_json(g, garbage.as_ptr(), &mut cert), LscStatus::Parse);
        assert!(cert.is_null());
        lsc_graph_free(g);

        let s = CStr::from_ptr(lsc_status_str(LscStatus::Numeric));
        assert_eq!(s.to_str().unwrap(), "numeric failure");
        lsc_graph_free(ptr::null_mut());
        lsc_certificate_free(ptr::null_mut());
        lsc_string_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/lsc.h")).unwrap();
    for name in [
        "lsc_last_error",
        "lsc_status_str",
        "lsc_string_free",
        "lsc_graph_from_json",
        "lsc_graph_free",
        "lsc_graph_to_json",
        "lsc_graph_counts",
        "lsc_graph_canonicalize",
        "lsc_decide",
        "lsc_certificate_from_json",
        "lsc_certificate_free",
        "lsc_certificate_to_json",
        "lsc_certificate_verify",
        "lsc_recover_round_trip",
        "typedef struct LscGraph LscGraph",
        "LSC_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}
