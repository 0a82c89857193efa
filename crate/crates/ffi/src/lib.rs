//! C ABI over `cilgraph`.
//!
//! Matrices cross the boundary as opaque [`CgMatrix`] handles built from
//! column-major `double` buffers. Every fallible call returns a [`CgStatus`];
//! on failure [`cg_last_error`] describes the problem. Handles returned
//! through out-pointers are owned by the caller and released with
//! [`cg_matrix_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nalgebra::DMatrix;

use cilgraph::matio::{load_matrix, normalize_columns, write_matrix};
use cilgraph::method::{default_epsilon, MethodParams};
use cilgraph::metrics::evaluate;
use cilgraph::{build_affinity, ncut_cluster, CoefficientMatrix, DataMatrix, Error, MatrixFormat, Method, SigmaMode, SolveOptions};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Unreadable, malformed or degenerate input data.
    DataError = 3,
    /// The solver failed (non-convergence, singular system).
    SolverError = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

/// Opaque dense matrix.
pub struct CgMatrix {
    values: DMatrix<f64>,
}

/// Options for [`cg_solve`]. Start from [`cg_solve_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CgSolveOptions {
    pub lambda: f64,
    pub gamma: f64,
    /// Smoothing for the L1 / L21 / nuclear surrogates; `<= 0` selects the
    /// data-scaled default.
    pub epsilon: f64,
    /// Correntropy kernel size (the starting value unless `sigma_fixed`).
    pub sigma2: f64,
    pub sigma_fixed: bool,
    pub tol: f64,
    pub max_iter: usize,
    /// `-1` uses the method's default, `0` off, `1` on.
    pub zero_diagonal: i32,
    /// Scale data columns to unit norm first.
    pub normalize: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

type Failure = (CgStatus, String);

fn classify(e: Error) -> Failure {
    let status = if e.is_solver_error() {
        CgStatus::SolverError
    } else if e.is_data_error() {
        CgStatus::DataError
    } else {
        CgStatus::InvalidArgument
    };
    (status, e.to_string())
}

fn null(what: &str) -> Failure {
    (CgStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    (CgStatus::InvalidArgument, message.into())
}

/// Runs `f`, records any failure and converts panics into `Panic`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CgStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CgStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {message}"));
            CgStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn matrix_arg<'a>(p: *const CgMatrix, what: &str) -> Result<&'a CgMatrix, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn hand_out(out: *mut *mut CgMatrix, values: DMatrix<f64>) {
    let handle = Box::into_raw(Box::new(CgMatrix { values }));
    unsafe { *out = handle };
}

/// Message for the most recent failure on this thread, or null. Valid until
/// the next `cg_*` call on the same thread.
#[no_mangle]
pub extern "C" fn cg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies a `rows × cols` column-major buffer into a new matrix.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cg_matrix_new(rows: usize, cols: usize, data: *const f64, out: *mut *mut CgMatrix) -> CgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if data.is_null() {
            return Err(null("data"));
        }
        let len = rows.checked_mul(cols).ok_or_else(|| invalid("rows * cols overflows"))?;
        if len == 0 {
            return Err(invalid("matrix must be non-empty"));
        }
        let slice = std::slice::from_raw_parts(data, len);
        hand_out(out, DMatrix::from_column_slice(rows, cols, slice));
        Ok(())
    })
}

/// Reads a matrix file; `.bin` selects the binary format, anything else CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cg_matrix_load(path: *const c_char, out: *mut *mut CgMatrix) -> CgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = Path::new(str_arg(path, "path")?);
        let m = load_matrix(path, MatrixFormat::from_path(path)).map_err(classify)?;
        hand_out(out, m.into_values());
        Ok(())
    })
}

/// Writes a matrix file; the format follows the extension as in [`cg_matrix_load`].
///
/// # Safety
/// `m` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cg_matrix_save(m: *const CgMatrix, path: *const c_char) -> CgStatus {
    guard(|| {
        let m = matrix_arg(m, "matrix")?;
        let path = Path::new(str_arg(path, "path")?);
        write_matrix(&m.values, path, MatrixFormat::from_path(path)).map_err(classify)
    })
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cg_matrix_rows(m: *const CgMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.values.nrows())
}

/// Number of columns, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cg_matrix_cols(m: *const CgMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.values.ncols())
}

/// Copies the entries, column-major, into `buf` of length `len`
/// (which must equal rows × cols).
///
/// # Safety
/// `m` must be a live handle; `buf` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cg_matrix_copy(m: *const CgMatrix, buf: *mut f64, len: usize) -> CgStatus {
    guard(|| {
        let m = matrix_arg(m, "matrix")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len != m.values.len() {
            return Err(invalid(format!("buffer holds {len} values, matrix has {}", m.values.len())));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(m.values.as_slice());
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cg_matrix_free(m: *mut CgMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

#[no_mangle]
pub extern "C" fn cg_solve_options_default() -> CgSolveOptions {
    let defaults = SolveOptions::default();
    CgSolveOptions {
        lambda: 0.1,
        gamma: 1.0,
        epsilon: 0.0,
        sigma2: 1.0,
        sigma_fixed: false,
        tol: defaults.tol,
        max_iter: defaults.max_iter,
        zero_diagonal: -1,
        normalize: true,
    }
}

/// Learns the `n × n` coefficient matrix of the `d × n` data `x` with the
/// named method (`cil2`, `rcil2`, `lsr`, `ssc_irls`, `lrr_irls`, `msr_irls`).
/// `options` may be null for the defaults; `iterations` may be null.
///
/// # Safety
/// `x` must be a live handle, `method` a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cg_solve(
    x: *const CgMatrix,
    method: *const c_char,
    options: *const CgSolveOptions,
    out: *mut *mut CgMatrix,
    iterations: *mut usize,
) -> CgStatus {
    guard(|| {
        let x = matrix_arg(x, "x")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let method: Method = str_arg(method, "method")?.parse().map_err(classify)?;
        let o = options.as_ref().copied().unwrap_or_else(|| cg_solve_options_default());
        let mut data = DataMatrix::new(x.values.clone()).map_err(classify)?;
        if o.normalize {
            data = normalize_columns(&data).map_err(classify)?;
        }
        let params = MethodParams {
            lambda: o.lambda,
            gamma: o.gamma,
            epsilon: if o.epsilon > 0.0 { o.epsilon } else { default_epsilon(data.values()) },
            sigma_mode: if o.sigma_fixed { SigmaMode::Fixed } else { SigmaMode::Auto },
            sigma2: o.sigma2,
        };
        let zero_diagonal = match o.zero_diagonal {
            -1 => method.default_zero_diagonal(),
            0 => false,
            1 => true,
            other => return Err(invalid(format!("zero_diagonal must be -1, 0 or 1, got {other}"))),
        };
        let opts = SolveOptions {
            tol: o.tol,
            max_iter: o.max_iter,
            zero_diagonal,
            ..SolveOptions::default()
        };
        let report = method.solve(&data, &params, &opts).map_err(classify)?;
        if !iterations.is_null() {
            *iterations = report.iterations;
        }
        hand_out(out, report.z.into_inner());
        Ok(())
    })
}

/// Spectral clustering of the affinity `(|Z| + |Zᵀ|)/2` into `k` groups.
/// Writes `len` labels (which must equal n) in `0..k`.
///
/// # Safety
/// `z` must be a live handle; `labels` must hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn cg_cluster(z: *const CgMatrix, k: usize, seed: u64, labels: *mut usize, len: usize) -> CgStatus {
    guard(|| {
        let z = matrix_arg(z, "z")?;
        if labels.is_null() {
            return Err(null("labels"));
        }
        let coef = CoefficientMatrix::new(z.values.clone()).map_err(classify)?;
        if len != coef.len() {
            return Err(invalid(format!("label buffer holds {len}, graph has {} vertices", coef.len())));
        }
        let result = ncut_cluster(&build_affinity(&coef), k, seed).map_err(classify)?;
        std::slice::from_raw_parts_mut(labels, len).copy_from_slice(result.labels());
        Ok(())
    })
}

/// Clustering accuracy (best label matching) and NMI of `pred` against
/// `truth`, both of length `n`. Either output may be null.
///
/// # Safety
/// `truth` and `pred` must hold `n` readable values.
#[no_mangle]
pub unsafe extern "C" fn cg_evaluate(
    truth: *const usize,
    pred: *const usize,
    n: usize,
    accuracy: *mut f64,
    nmi: *mut f64,
) -> CgStatus {
    guard(|| {
        if truth.is_null() || pred.is_null() {
            return Err(null("label array"));
        }
        if n == 0 {
            return Err((CgStatus::DataError, "label arrays are empty".into()));
        }
        let y = std::slice::from_raw_parts(truth, n);
        let p = std::slice::from_raw_parts(pred, n);
        let report = evaluate(y, p).map_err(classify)?;
        if !accuracy.is_null() {
            *accuracy = report.accuracy;
        }
        if !nmi.is_null() {
            *nmi = report.nmi;
        }
        Ok(())
    })
}
