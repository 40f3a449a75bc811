//! C interface to the `lsc` library.
//!
//! Objects are opaque handles created by the `lsc_*_from_json`, `lsc_decide`
//! and `lsc_graph_canonicalize` calls and released with the matching `*_free`. Every fallible
//! call returns an [`LscStatus`]; on failure a message is available from
//! [`lsc_last_error`] until the next call on the same thread. Strings
//! returned through `char **` belong to the caller and are released with
//! [`lsc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lsc::graph::LatentDigraph;
use lsc::lsc::{decide, verify_certificate, DecideOptions, LscCertificate as Certificate};
use lsc::numeric::{
    max_abs_diff, omega_matrix, recover_effects, sample_parameters, semi_direct_matrix, sigma_matrix, SamplingConfig,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LscStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    Numeric = 5,
    Panic = 6,
}

/// Graph with observed and latent nodes.
pub struct LscGraph {
    inner: LatentDigraph,
}

/// Certificate tied to the graph it was built for.
pub struct LscCertificate {
    inner: Certificate,
    graph: LatentDigraph,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn guard(f: impl FnOnce() -> Result<(), (LscStatus, String)>) -> LscStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LscStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LscStatus::Panic
        }
    }
}

fn null(what: &str) -> (LscStatus, String) {
    (LscStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (LscStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| (LscStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn out_string(out: *mut *mut c_char, s: String) -> Result<(), (LscStatus, String)> {
    let c = CString::new(s).map_err(|e| (LscStatus::InvalidArgument, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

/// Message of the last failed call on this thread; empty after success.
/// Valid until the next `lsc_*` call on the same thread.
#[no_mangle]
pub extern "C" fn lsc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn lsc_status_str(status: LscStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        LscStatus::Ok => b"ok\0",
        LscStatus::NullPointer => b"null pointer\0",
        LscStatus::InvalidUtf8 => b"invalid UTF-8\0",
        LscStatus::Parse => b"parse error\0",
        LscStatus::InvalidArgument => b"invalid argument\0",
        LscStatus::Numeric => b"numeric failure\0",
        LscStatus::Panic => b"internal panic\0",
    };
    s.as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn lsc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses `{"observed": [...], "latent": [...], "edges": [[tail, head], ...]}`.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lsc_graph_from_json(json: *const c_char, out: *mut *mut LscGraph) -> LscStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = str_arg(json, "json")?;
        let inner = LatentDigraph::parse_json(text).map_err(|e| (LscStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(LscGraph { inner }));
        Ok(())
    })
}

/// # Safety
/// `g` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn lsc_graph_free(g: *mut LscGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a valid graph handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lsc_graph_to_json(g: *const LscGraph, out: *mut *mut c_char) -> LscStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("graph"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        out_string(out, g.inner.to_json())
    })
}

/// # Safety
/// `g` must be a valid graph handle; null out-pointers are skipped.
#[no_mangle]
pub unsafe extern "C" fn lsc_graph_counts(g: *const LscGraph, n_observed: *mut usize, n_latent: *mut usize) -> LscStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("graph"))?;
        if let Some(o) = n_observed.as_mut() {
            *o = g.inner.n_observed();
        }
        if let Some(l) = n_latent.as_mut() {
            *l = g.inner.n_latent();
        }
        Ok(())
    })
}

/// Canonical graph of `g` as a new handle.
///
/// # Safety
/// `g` must be a valid graph handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lsc_graph_canonicalize(g: *const LscGraph, out: *mut *mut LscGraph) -> LscStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("graph"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(LscGraph { inner: g.inner.canonicalize() }));
        Ok(())
    })
}

/// Runs the decision procedure with `|H1| + |H2| <= k`, or no bound when
/// `k < 0`. Writes whether every node was solved; `cert` (if not null)
/// receives the certificate of the solved nodes.
///
/// # Safety
/// `g` must be a valid graph handle and `identifiable` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lsc_decide(
    g: *const LscGraph,
    k: i64,
    identifiable: *mut bool,
    cert: *mut *mut LscCertificate,
) -> LscStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("graph"))?;
        let flag = identifiable.as_mut().ok_or_else(|| null("identifiable"))?;
        let bound = usize::try_from(k).ok();
        let res = decide(&g.inner, bound, &DecideOptions::default());
        *flag = res.identifiable();
        if let Some(c) = cert.as_mut() {
            *c = Box::into_raw(Box::new(LscCertificate { inner: res.certificate, graph: g.inner.clone() }));
        }
        Ok(())
    })
}

/// # Safety
/// `g` must be a valid graph handle, `json` a nul-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lsc_certificate_from_json(
    g: *const LscGraph,
    json: *const c_char,
    out: *mut *mut LscCertificate,
) -> LscStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("graph"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = str_arg(json, "json")?;
        let inner = Certificate::from_json(&g.inner, text).map_err(|e| (LscStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(LscCertificate { inner, graph: g.inner.clone() }));
        Ok(())
    })
}

/// # Safety
/// `c` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn lsc_certificate_free(c: *mut LscCertificate) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// # Safety
/// `c` must be a valid certificate handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lsc_certificate_to_json(c: *const LscCertificate, out: *mut *mut c_char) -> LscStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("certificate"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        out_string(out, c.inner.to_json(&c.graph))
    })
}

/// Checks every step, the step order and completeness. `valid` is false
/// for a certificate that parses but does not verify; the reason is then
/// available from [`lsc_last_error`].
///
/// # Safety
/// `c` must be a valid certificate handle and `valid` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lsc_certificate_verify(c: *const LscCertificate, valid: *mut bool) -> LscStatus {
    let mut reason = None;
    let status = guard(|| {
        let c = c.as_ref().ok_or_else(|| null("certificate"))?;
        let flag = valid.as_mut().ok_or_else(|| null("valid"))?;
        let res = verify_certificate(&c.graph, &c.inner).map_err(|e| (LscStatus::InvalidArgument, e.to_string()))?;
        *flag = match res {
            Err(f) => {
                reason = Some(f.to_string());
                false
            }
            Ok(()) if !c.inner.is_complete(&c.graph) => {
                reason = Some("some observed node has no step".into());
                false
            }
            Ok(()) => true,
        };
        Ok(())
    });
    if let Some(r) = reason {
        set_error(r);
    }
    status
}

/// Samples parameters from `seed`, recovers the semi-direct effects along
/// the certificate from the implied covariance matrix and writes the
/// largest absolute errors of the recovered effects and of the recovered
/// latent-subgraph covariance. Null out-pointers are skipped.
///
/// # Safety
/// `c` must be a valid certificate handle.
#[no_mangle]
pub unsafe extern "C" fn lsc_recover_round_trip(
    c: *const LscCertificate,
    seed: u64,
    lambda_error: *mut f64,
    omega_error: *mut f64,
) -> LscStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("certificate"))?;
        let numeric = |e: lsc::numeric::NumericError| (LscStatus::Numeric, e.to_string());
        let g = &c.graph;
        let p = sample_parameters(g, seed, &SamplingConfig::default()).map_err(numeric)?;
        let sigma = sigma_matrix(g, &p).map_err(numeric)?;
        let rep = recover_effects(g, &c.inner, &sigma).map_err(numeric)?;
        if let Some(out) = lambda_error.as_mut() {
            *out = max_abs_diff(&rep.lambda_bar_hat, &semi_direct_matrix(g, &p).map_err(numeric)?);
        }
        if let Some(out) = omega_error.as_mut() {
            *out = max_abs_diff(&rep.omega_hat, &omega_matrix(g, &p).map_err(numeric)?);
        }
        Ok(())
    })
}
