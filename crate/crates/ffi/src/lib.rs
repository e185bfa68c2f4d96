//! C ABI for the qcollide simulator.
//!
//! Objects cross the boundary as opaque handles created by `qc_*_new` style
//! functions and released with the matching `qc_*_free`. Every fallible call
//! returns a [`QcStatus`]; on failure a description is stored per thread and
//! can be read with [`qc_last_error_message`].
//!
//! Matrices are exchanged as two row-major `double` arrays (real and
//! imaginary parts) of length `dim * dim`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use qcollide::bench::{convergence_scan, run_config, ConvergenceRow, ExperimentConfig, RunOptions, ScanReport};
use qcollide::engine::{Collider, ExactCollisionMap};
use qcollide::ops::{outer_product, DensityMatrix};
use qcollide::{CMatrix, Error};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Runtime = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// One row of a convergence scan.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QcConvergenceRow {
    pub k: u64,
    pub n_collisions: u64,
    pub d: f64,
    pub max_elem_dev: f64,
    pub wall_ms: u64,
}

impl From<&ConvergenceRow> for QcConvergenceRow {
    fn from(r: &ConvergenceRow) -> Self {
        QcConvergenceRow {
            k: r.k as u64,
            n_collisions: r.n_collisions as u64,
            d: r.d,
            max_elem_dev: r.max_elem_dev,
            wall_ms: r.wall_ms.min(u64::MAX as u128) as u64,
        }
    }
}

/// Parsed and validated experiment configuration.
pub struct QcExperiment {
    config: ExperimentConfig,
}

/// Completed convergence scan.
pub struct QcScanResult {
    report: ScanReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> QcStatus {
    match err {
        Error::Config(_) => QcStatus::Config,
        Error::InvalidParameter(_)
        | Error::InvalidLabel { .. }
        | Error::DimensionMismatch { .. }
        | Error::QubitOutOfRange { .. }
        | Error::InvalidCoupling { .. }
        | Error::UnsupportedQubitCount(_) => QcStatus::InvalidArgument,
        _ => QcStatus::Runtime,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F>(f: F) -> QcStatus
where
    F: FnOnce() -> Result<(), (QcStatus, String)>,
{
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            QcStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (QcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (QcStatus, String) {
    (QcStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, (QcStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    // SAFETY: caller passes a NUL-terminated string that outlives the call.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| (QcStatus::InvalidArgument, format!("`{name}` is not valid UTF-8")))
}

unsafe fn write_matrix(m: &CMatrix, re: *mut f64, im: *mut f64, len: usize) -> Result<(), (QcStatus, String)> {
    if re.is_null() {
        return Err(null("re"));
    }
    if im.is_null() {
        return Err(null("im"));
    }
    let dim = m.nrows();
    if len < dim * dim {
        return Err((
            QcStatus::BufferTooSmall,
            format!("buffers hold {len} entries, need {}", dim * dim),
        ));
    }
    // SAFETY: caller guarantees both buffers hold `len` doubles.
    let (re, im) = unsafe { (std::slice::from_raw_parts_mut(re, len), std::slice::from_raw_parts_mut(im, len)) };
    for r in 0..dim {
        for c in 0..dim {
            let z = m[(r, c)];
            re[r * dim + c] = z.re;
            im[r * dim + c] = z.im;
        }
    }
    Ok(())
}

fn with_pool<T>(threads: u32, f: impl FnOnce() -> T + Send) -> Result<T, (QcStatus, String)>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads as usize)
        .build()
        .map_err(|e| (QcStatus::Runtime, format!("cannot start thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Message describing the last failed call on this thread, or null. The
/// pointer stays valid until the next call into this library on the same
/// thread.
#[no_mangle]
pub extern "C" fn qc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a JSON experiment config.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qc_experiment_from_json(json: *const c_char, out: *mut *mut QcExperiment) -> QcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: forwarded caller contract.
        let text = unsafe { str_arg(json, "json") }?;
        let config = ExperimentConfig::from_json_str(text).map_err(lib_err)?;
        let handle = Box::into_raw(Box::new(QcExperiment { config }));
        // SAFETY: `out` checked non-null above.
        unsafe { *out = handle };
        Ok(())
    })
}

/// # Safety
/// `exp` must be null or a handle from [`qc_experiment_from_json`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn qc_experiment_free(exp: *mut QcExperiment) {
    if !exp.is_null() {
        // SAFETY: handle was produced by Box::into_raw.
        drop(unsafe { Box::from_raw(exp) });
    }
}

/// Overrides the master seed.
///
/// # Safety
/// `exp` must be a live experiment handle.
#[no_mangle]
pub unsafe extern "C" fn qc_experiment_set_seed(exp: *mut QcExperiment, seed: u64) -> QcStatus {
    guard(|| {
        // SAFETY: caller contract.
        let exp = unsafe { exp.as_mut() }.ok_or_else(|| null("exp"))?;
        exp.config.seed = seed;
        Ok(())
    })
}

/// Number of system qubits.
///
/// # Safety
/// `exp` must be a live experiment handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qc_experiment_n_qubits(exp: *const QcExperiment, out: *mut u32) -> QcStatus {
    guard(|| {
        // SAFETY: caller contract.
        let exp = unsafe { exp.as_ref() }.ok_or_else(|| null("exp"))?;
        // SAFETY: caller contract.
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = exp.config.n_qubits as u32;
        Ok(())
    })
}

/// Runs the convergence scan. `threads == 0` uses one worker per core.
///
/// # Safety
/// `exp` must be a live experiment handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qc_experiment_scan(
    exp: *const QcExperiment,
    threads: u32,
    out: *mut *mut QcScanResult,
) -> QcStatus {
    guard(|| {
        // SAFETY: caller contract.
        let exp = unsafe { exp.as_ref() }.ok_or_else(|| null("exp"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let report = with_pool(threads, || convergence_scan(&exp.config, |_| Ok(())))?.map_err(lib_err)?;
        // SAFETY: `out` checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(QcScanResult { report })) };
        Ok(())
    })
}

/// Runs the experiment and writes CSV, matrix dumps and manifest into
/// `out_dir` (or the config's directory when null).
///
/// # Safety
/// `exp` must be a live experiment handle; `out_dir` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn qc_experiment_run(exp: *const QcExperiment, out_dir: *const c_char, threads: u32) -> QcStatus {
    guard(|| {
        // SAFETY: caller contract.
        let exp = unsafe { exp.as_ref() }.ok_or_else(|| null("exp"))?;
        let mut cfg = exp.config.clone();
        if !out_dir.is_null() {
            // SAFETY: caller contract.
            cfg.out_dir = PathBuf::from(unsafe { str_arg(out_dir, "out_dir") }?);
        }
        let opts = RunOptions {
            threads: threads as usize,
            quiet: true,
            ..Default::default()
        };
        run_config(&cfg, &opts).map(|_| ()).map_err(lib_err)
    })
}

/// Ensemble average `Θ_n(K)` over `k` trajectories on streams `0..k`.
/// Buffers must hold `4^n_qubits` doubles each.
///
/// # Safety
/// `exp` must be a live experiment handle; `re` and `im` must point to `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qc_experiment_ensemble_density(
    exp: *const QcExperiment,
    k: u64,
    threads: u32,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> QcStatus {
    guard(|| {
        // SAFETY: caller contract.
        let exp = unsafe { exp.as_ref() }.ok_or_else(|| null("exp"))?;
        if k == 0 {
            return Err((QcStatus::InvalidArgument, "k must be >= 1".into()));
        }
        let collision = exp.config.collision_config();
        let theta = with_pool(threads, || -> qcollide::Result<DensityMatrix> {
            let psi0 = exp.config.initial_state()?;
            Collider::new(&collision)?.ensemble(&psi0, k as usize, 0)?.finalize()
        })?
        .map_err(lib_err)?;
        // SAFETY: forwarded caller contract.
        unsafe { write_matrix(theta.matrix(), re, im, len) }
    })
}

/// Exact density matrix `ρ_n` after the configured number of collisions.
///
/// # Safety
/// As [`qc_experiment_ensemble_density`].
#[no_mangle]
pub unsafe extern "C" fn qc_experiment_exact_density(
    exp: *const QcExperiment,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> QcStatus {
    guard(|| {
        // SAFETY: caller contract.
        let exp = unsafe { exp.as_ref() }.ok_or_else(|| null("exp"))?;
        let collision = exp.config.collision_config();
        let rho = exp
            .config
            .initial_state()
            .and_then(|psi0| ExactCollisionMap::new(&collision)?.iterate(&outer_product(&psi0), collision.n_collisions))
            .map_err(lib_err)?;
        // SAFETY: forwarded caller contract.
        unsafe { write_matrix(rho.matrix(), re, im, len) }
    })
}

/// # Safety
/// `res` must be null or a handle from [`qc_experiment_scan`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn qc_scan_result_free(res: *mut QcScanResult) {
    if !res.is_null() {
        // SAFETY: handle was produced by Box::into_raw.
        drop(unsafe { Box::from_raw(res) });
    }
}

/// Number of rows in the scan; 0 for a null handle.
///
/// # Safety
/// `res` must be null or a live scan handle.
#[no_mangle]
pub unsafe extern "C" fn qc_scan_result_len(res: *const QcScanResult) -> usize {
    // SAFETY: caller contract.
    unsafe { res.as_ref() }.map_or(0, |r| r.report.rows.len())
}

/// # Safety
/// `res` must be a live scan handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qc_scan_result_row(res: *const QcScanResult, index: usize, out: *mut QcConvergenceRow) -> QcStatus {
    guard(|| {
        // SAFETY: caller contract.
        let res = unsafe { res.as_ref() }.ok_or_else(|| null("res"))?;
        // SAFETY: caller contract.
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let row = res.report.rows.get(index).ok_or_else(|| {
            (
                QcStatus::InvalidArgument,
                format!("row {index} out of range ({} rows)", res.report.rows.len()),
            )
        })?;
        *out = row.into();
        Ok(())
    })
}

/// Fitted log-log slope of D against K. Fails with `InvalidArgument` when
/// the scan has fewer than three rows with positive D.
///
/// # Safety
/// `res` must be a live scan handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qc_scan_result_slope(res: *const QcScanResult, out: *mut f64) -> QcStatus {
    guard(|| {
        // SAFETY: caller contract.
        let res = unsafe { res.as_ref() }.ok_or_else(|| null("res"))?;
        // SAFETY: caller contract.
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = res
            .report
            .slope
            .ok_or_else(|| (QcStatus::InvalidArgument, "slope needs three rows with D > 0".to_string()))?;
        Ok(())
    })
}
