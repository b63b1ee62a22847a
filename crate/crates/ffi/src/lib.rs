//! C ABI over `hexqg`.
//!
//! Objects cross the boundary as opaque handles that must be released with
//! the matching `*_free`.  Every fallible call returns a [`HexqgStatus`];
//! the message of the last failure on the calling thread is available from
//! [`hexqg_last_error`].  Output buffers follow one convention: the
//! required length is always written to `*len_out`, and
//! `HEXQG_STATUS_BUFFER_TOO_SMALL` is returned when `cap` is not enough.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use hexqg::dataset::{run_forward, Dataset};
use hexqg::inverse::oracle::LiveOracle;
use hexqg::inverse::reconstruct::reconstruct_partial;
use hexqg::report::{build_report, Report};
use hexqg::scenario::Scenario;
use hexqg::sturm::{dirichlet_spectrum, s_value, Potential};
use hexqg::vertex::{dn_map, DnModel};
use hexqg::Error;

/// Status codes; the positive ones match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HexqgStatus {
    Ok = 0,
    Io = 1,
    Validation = 2,
    Numeric = 3,
    Coverage = 4,
    NullPointer = -1,
    BufferTooSmall = -2,
    InvalidUtf8 = -3,
    Panic = -4,
}

/// Parsed and validated scenario.
pub struct HexqgScenario(Scenario);

/// Forward-generated D-N dataset.
pub struct HexqgDataset(Dataset);

/// Reconstruction report.
pub struct HexqgReport(Report);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> HexqgStatus {
    match e.exit_code() {
        1 => HexqgStatus::Io,
        2 => HexqgStatus::Validation,
        4 => HexqgStatus::Coverage,
        _ => HexqgStatus::Numeric,
    }
}

fn guard(f: impl FnOnce() -> Result<(), HexqgStatus>) -> HexqgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HexqgStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            HexqgStatus::Panic
        }
    }
}

fn fail(e: Error) -> HexqgStatus {
    set_error(&e.to_string());
    status_of(&e)
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, HexqgStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(HexqgStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not UTF-8");
        HexqgStatus::InvalidUtf8
    })
}

unsafe fn ref_arg<'a, T>(p: *const T) -> Result<&'a T, HexqgStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null handle");
        HexqgStatus::NullPointer
    })
}

unsafe fn out_arg<'a, T>(p: *mut T) -> Result<&'a mut T, HexqgStatus> {
    p.as_mut().ok_or_else(|| {
        set_error("null output pointer");
        HexqgStatus::NullPointer
    })
}

unsafe fn write_f64s(src: &[f64], out: *mut f64, cap: usize, len_out: *mut usize) -> Result<(), HexqgStatus> {
    *out_arg(len_out)? = src.len();
    if cap < src.len() {
        set_error(&format!("buffer holds {cap} values, {} needed", src.len()));
        return Err(HexqgStatus::BufferTooSmall);
    }
    if !src.is_empty() {
        if out.is_null() {
            set_error("null output buffer");
            return Err(HexqgStatus::NullPointer);
        }
        std::ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    }
    Ok(())
}

/// Writes a NUL-terminated string; `*len_out` excludes the terminator.
unsafe fn write_str(s: &str, out: *mut c_char, cap: usize, len_out: *mut usize) -> Result<(), HexqgStatus> {
    *out_arg(len_out)? = s.len();
    if cap < s.len() + 1 {
        set_error(&format!("buffer holds {cap} bytes, {} needed", s.len() + 1));
        return Err(HexqgStatus::BufferTooSmall);
    }
    if out.is_null() {
        set_error("null output buffer");
        return Err(HexqgStatus::NullPointer);
    }
    std::ptr::copy_nonoverlapping(s.as_ptr(), out as *mut u8, s.len());
    *out.add(s.len()) = 0;
    Ok(())
}

unsafe fn modes_arg(modes: *const f64, n_modes: usize) -> Result<Potential, HexqgStatus> {
    if n_modes == 0 {
        return Ok(Potential::zero());
    }
    if modes.is_null() {
        set_error("null modes pointer");
        return Err(HexqgStatus::NullPointer);
    }
    Potential::new(std::slice::from_raw_parts(modes, n_modes).to_vec()).map_err(fail)
}

/// Message of the last failure on this thread (empty if none).
///
/// # Safety
/// `buf` must point to `cap` writable bytes; `len_out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hexqg_last_error(buf: *mut c_char, cap: usize, len_out: *mut usize) -> HexqgStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().to_string_lossy().into_owned());
    match write_str(&msg, buf, cap, len_out) {
        Ok(()) => HexqgStatus::Ok,
        Err(s) => s,
    }
}

/// `s(λ) = φ(1, λ)` for the potential `Σ modes[m] cos(2πmz)`.
///
/// # Safety
/// `modes` must point to `n_modes` doubles (may be null when `n_modes == 0`).
#[no_mangle]
pub unsafe extern "C" fn hexqg_s_value(modes: *const f64, n_modes: usize, lambda: f64, out: *mut f64) -> HexqgStatus {
    guard(|| {
        let q = modes_arg(modes, n_modes)?;
        *out_arg(out)? = s_value(&q, lambda).map_err(fail)?;
        Ok(())
    })
}

/// First `count` Dirichlet eigenvalues of the potential.
///
/// # Safety
/// `modes` as in [`hexqg_s_value`]; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn hexqg_dirichlet_spectrum(
    modes: *const f64,
    n_modes: usize,
    count: usize,
    out: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> HexqgStatus {
    guard(|| {
        let q = modes_arg(modes, n_modes)?;
        let eigs = dirichlet_spectrum(&q, count).map_err(fail)?;
        write_f64s(&eigs.eigenvalues, out, cap, len_out)
    })
}

/// Parse and validate a scenario from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hexqg_scenario_from_json(json: *const c_char, out: *mut *mut HexqgScenario) -> HexqgStatus {
    guard(|| {
        let text = str_arg(json)?;
        let slot = out_arg(out)?;
        let sc = Scenario::from_json(text).map_err(fail)?;
        *slot = Box::into_raw(Box::new(HexqgScenario(sc)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hexqg_scenario_load(path: *const c_char, out: *mut *mut HexqgScenario) -> HexqgStatus {
    guard(|| {
        let p = str_arg(path)?;
        let slot = out_arg(out)?;
        let sc = hexqg::scenario::load_scenario(Path::new(p)).map_err(fail)?;
        *slot = Box::into_raw(Box::new(HexqgScenario(sc)));
        Ok(())
    })
}

/// # Safety
/// `sc` must come from a scenario constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hexqg_scenario_free(sc: *mut HexqgScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// Hex SHA-256 of the canonical scenario JSON.
///
/// # Safety
/// `sc` must be a live handle; `buf` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn hexqg_scenario_hash(
    sc: *const HexqgScenario,
    buf: *mut c_char,
    cap: usize,
    len_out: *mut usize,
) -> HexqgStatus {
    guard(|| {
        let sc = ref_arg(sc)?;
        write_str(&sc.0.hash(), buf, cap, len_out)
    })
}

/// Vertex-model D-N map of the scenario's domain at `lambda`, row-major;
/// `*dim_out` receives the number of boundary vertices.
///
/// # Safety
/// `sc` must be a live handle; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn hexqg_dn_map(
    sc: *const HexqgScenario,
    lambda: f64,
    out: *mut f64,
    cap: usize,
    len_out: *mut usize,
    dim_out: *mut usize,
) -> HexqgStatus {
    guard(|| {
        let sc = ref_arg(sc)?;
        let domain = sc.0.domain().map_err(fail)?;
        let pm = sc.0.potential_map().map_err(fail)?;
        let dn = dn_map(&domain, &pm, lambda, DnModel::Vertex).map_err(fail)?;
        let m = dn.dim();
        *out_arg(dim_out)? = m;
        let flat: Vec<f64> = (0..m * m).map(|k| dn.matrix[(k / m, k % m)]).collect();
        write_f64s(&flat, out, cap, len_out)
    })
}

/// Forward-generate the scenario's dataset.
///
/// # Safety
/// `sc` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hexqg_forward(sc: *const HexqgScenario, out: *mut *mut HexqgDataset) -> HexqgStatus {
    guard(|| {
        let sc = ref_arg(sc)?;
        let slot = out_arg(out)?;
        let ds = run_forward(&sc.0, None, None).map_err(fail)?;
        *slot = Box::into_raw(Box::new(HexqgDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `ds` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hexqg_dataset_save(ds: *const HexqgDataset, path: *const c_char) -> HexqgStatus {
    guard(|| {
        let ds = ref_arg(ds)?;
        let p = str_arg(path)?;
        ds.0.save(Path::new(p)).map_err(fail)
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hexqg_dataset_load(path: *const c_char, out: *mut *mut HexqgDataset) -> HexqgStatus {
    guard(|| {
        let p = str_arg(path)?;
        let slot = out_arg(out)?;
        let ds = Dataset::load(Path::new(p)).map_err(fail)?;
        *slot = Box::into_raw(Box::new(HexqgDataset(ds)));
        Ok(())
    })
}

/// Number of D-N records.
///
/// # Safety
/// `ds` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hexqg_dataset_len(ds: *const HexqgDataset, out: *mut usize) -> HexqgStatus {
    guard(|| {
        let ds = ref_arg(ds)?;
        *out_arg(out)? = ds.0.records.len();
        Ok(())
    })
}

/// # Safety
/// `ds` must come from a dataset constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hexqg_dataset_free(ds: *mut HexqgDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

fn finish(sc: &Scenario, outcome: hexqg::inverse::Outcome, mode: &str, out: &mut *mut HexqgReport) -> Result<(), HexqgStatus> {
    let report = build_report(sc, &outcome, mode).map_err(fail)?;
    *out = Box::into_raw(Box::new(HexqgReport(report)));
    match outcome.error {
        // the partial report is still handed out
        Some(e) => Err(fail(e)),
        None => Ok(()),
    }
}

/// Reconstruct with forward solves on demand.  On a stage failure the
/// partial report is still returned through `out`.
///
/// # Safety
/// `sc` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hexqg_invert_live(sc: *const HexqgScenario, out: *mut *mut HexqgReport) -> HexqgStatus {
    guard(|| {
        let sc = ref_arg(sc)?;
        let slot = out_arg(out)?;
        *slot = std::ptr::null_mut();
        let cfg = sc
            .0
            .reconstruct_config()
            .map_err(fail)?
            .ok_or_else(|| fail(Error::Validation("scenario has no inverse section".into())))?;
        let pm = sc.0.potential_map().map_err(fail)?;
        let oracle = LiveOracle::new(sc.0.domain.n as usize, pm);
        let outcome = reconstruct_partial(&oracle, &cfg).map_err(fail)?;
        finish(&sc.0, outcome, "live", slot)
    })
}

/// Reconstruct from recorded D-N maps only.
///
/// # Safety
/// `ds` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hexqg_invert_dataset(ds: *const HexqgDataset, out: *mut *mut HexqgReport) -> HexqgStatus {
    guard(|| {
        let ds = ref_arg(ds)?;
        let slot = out_arg(out)?;
        *slot = std::ptr::null_mut();
        let sc = &ds.0.header.scenario;
        let cfg = sc
            .reconstruct_config()
            .map_err(fail)?
            .ok_or_else(|| fail(Error::Validation("scenario has no inverse section".into())))?;
        let oracle = ds.0.oracle().map_err(fail)?;
        let outcome = reconstruct_partial(&oracle, &cfg).map_err(fail)?;
        finish(sc, outcome, "dataset", slot)
    })
}

/// # Safety
/// `r` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hexqg_report_edge_count(r: *const HexqgReport, out: *mut usize) -> HexqgStatus {
    guard(|| {
        let r = ref_arg(r)?;
        *out_arg(out)? = r.0.edges.len();
        Ok(())
    })
}

/// Recovered cosine coefficients of edge `index`.
///
/// # Safety
/// `r` must be a live handle; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn hexqg_report_edge_modes(
    r: *const HexqgReport,
    index: usize,
    out: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> HexqgStatus {
    guard(|| {
        let r = ref_arg(r)?;
        let e = r.0.edges.get(index).ok_or_else(|| {
            fail(Error::InvalidArgument(format!("edge index {index} out of range")))
        })?;
        write_f64s(&e.recovered, out, cap, len_out)
    })
}

/// Largest coefficient error against the scenario's true potentials
/// (NaN when there is nothing to compare).
///
/// # Safety
/// `r` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hexqg_report_max_error(r: *const HexqgReport, out: *mut f64) -> HexqgStatus {
    guard(|| {
        let r = ref_arg(r)?;
        *out_arg(out)? = r.0.max_error.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// The report as JSON.
///
/// # Safety
/// `r` must be a live handle; `buf` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn hexqg_report_json(
    r: *const HexqgReport,
    buf: *mut c_char,
    cap: usize,
    len_out: *mut usize,
) -> HexqgStatus {
    guard(|| {
        let r = ref_arg(r)?;
        let s = serde_json::to_string(&r.0).map_err(|e| fail(e.into()))?;
        write_str(&s, buf, cap, len_out)
    })
}

/// # Safety
/// `r` must come from an inversion call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hexqg_report_free(r: *mut HexqgReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
