//! C ABI over `markov-fiber`.
//!
//! Tables and models cross the boundary as opaque handles owned by the
//! caller; release them with the matching `*_free`. Every fallible call
//! returns an [`MfStatus`]; on failure [`mf_last_error`] describes the
//! problem until the next failing call on the same thread. Panics never
//! cross the boundary and surface as [`MfStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use markov_fiber::datasets::{named_model, Dataset};
use markov_fiber::fit::{llr_from_fits, FittedStatistic};
use markov_fiber::oracle::exact_pvalue_in;
use markov_fiber::{
    chi_square, enumerate_fiber, g_squared, ipf_fit, is_nested, markov_basis, run_chains, BasisOptions, ChainConfig,
    Configuration, Error, FitOptions, Model, ModelSpec, Table,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidTable = 3,
    InvalidModel = 4,
    DimensionMismatch = 5,
    NotNested = 6,
    InvalidChain = 7,
    FiberOverflow = 8,
    Numerical = 9,
    Io = 10,
    Panic = 11,
}

/// Test statistic selector.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MfStatistic {
    Chi2 = 0,
    G2 = 1,
    /// Nested log-likelihood ratio; needs an alternative model.
    Llr = 2,
}

/// Opaque contingency table.
pub struct MfTable(Table);

/// Opaque model bound to a grid.
pub struct MfModel(Model);

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MfFit {
    pub chi2: f64,
    pub g2: f64,
    pub df: usize,
    pub iterations: usize,
    pub converged: bool,
    pub max_discrepancy: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct MfChainOptions {
    pub steps: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
    /// Independent chains seeded `seed, seed+1, …`; 0 is treated as 1.
    pub chains: u32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MfPValue {
    pub observed: f64,
    pub p_value: f64,
    pub std_error: f64,
    pub acceptance_rate: f64,
    pub samples: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(MfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidTable(_) | Error::CellOutOfGrid { .. } => MfStatus::InvalidTable,
            Error::InvalidModel(_) => MfStatus::InvalidModel,
            Error::DimensionMismatch { .. } => MfStatus::DimensionMismatch,
            Error::NotNested(_) => MfStatus::NotNested,
            Error::InvalidChain(_) => MfStatus::InvalidChain,
            Error::FiberOverflow { .. } => MfStatus::FiberOverflow,
            Error::ZeroFitted { .. } | Error::NonFiniteStatistic { .. } | Error::ReductionLimit(_) => MfStatus::Numerical,
            Error::Parse(_) => MfStatus::InvalidArgument,
            Error::Io(_) => MfStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: MfStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> MfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MfStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            MfStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: the caller guarantees `p` is null or valid for reads.
    unsafe { p.as_ref() }.ok_or_else(|| fail(MfStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller guarantees `p` is null or valid for writes.
    unsafe { p.as_mut() }.ok_or_else(|| fail(MfStatus::NullPointer, format!("{what} is null")))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(MfStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: non-null and, per the contract, NUL-terminated.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| fail(MfStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a table from `rows * cols` row-major counts.
///
/// # Safety
/// `counts` must point to `rows * cols` readable values; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn mf_table_new(rows: usize, cols: usize, counts: *const u64, out: *mut *mut MfTable) -> MfStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        if counts.is_null() {
            return Err(fail(MfStatus::NullPointer, "counts is null"));
        }
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| fail(MfStatus::InvalidArgument, "grid size overflows"))?;
        // SAFETY: caller provides `rows * cols` readable counts.
        let data = unsafe { std::slice::from_raw_parts(counts, n) }.to_vec();
        let t = Table::new(rows, cols, data)?;
        *out = Box::into_raw(Box::new(MfTable(t)));
        Ok(())
    })
}

/// One of the embedded datasets, `"gilby"` or `"victoria"`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_table_dataset(name: *const c_char, out: *mut *mut MfTable) -> MfStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        let name = unsafe { string(name, "name") }?;
        let d = Dataset::from_name(name).ok_or_else(|| fail(MfStatus::InvalidArgument, format!("unknown dataset {name:?}")))?;
        *out = Box::into_raw(Box::new(MfTable(d.table())));
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mf_table_free(t: *mut MfTable) {
    if !t.is_null() {
        // SAFETY: handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(t) });
    }
}

/// Grid shape and grand total of a table; any output may be null.
///
/// # Safety
/// `t` must be a valid handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_table_shape(t: *const MfTable, rows: *mut usize, cols: *mut usize, total: *mut u64) -> MfStatus {
    guard(|| {
        let t = &unsafe { deref(t, "table") }?.0;
        // SAFETY: null outputs are skipped.
        unsafe {
            if let Some(r) = rows.as_mut() {
                *r = t.rows();
            }
            if let Some(c) = cols.as_mut() {
                *c = t.cols();
            }
            if let Some(n) = total.as_mut() {
                *n = t.total();
            }
        }
        Ok(())
    })
}

/// Copies the row-major counts into `buf`, which holds `len` values.
///
/// # Safety
/// `t` must be a valid handle and `buf` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn mf_table_counts(t: *const MfTable, buf: *mut u64, len: usize) -> MfStatus {
    guard(|| {
        let t = &unsafe { deref(t, "table") }?.0;
        if buf.is_null() {
            return Err(fail(MfStatus::NullPointer, "buf is null"));
        }
        let counts = t.counts();
        if len < counts.len() {
            return Err(fail(MfStatus::InvalidArgument, format!("buffer holds {len} values, need {}", counts.len())));
        }
        // SAFETY: checked length; caller guarantees writability.
        unsafe { ptr::copy_nonoverlapping(counts.as_ptr(), buf, counts.len()) };
        Ok(())
    })
}

fn bind_model(spec: ModelSpec, rows: usize, cols: usize) -> Result<*mut MfModel, Failure> {
    Ok(Box::into_raw(Box::new(MfModel(Model::new(spec, rows, cols)?))))
}

/// Parses a JSON model spec and validates it on a `rows × cols` grid.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_model_from_json(json: *const c_char, rows: usize, cols: usize, out: *mut *mut MfModel) -> MfStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        let spec = ModelSpec::from_json(unsafe { string(json, "json") }?)?;
        *out = bind_model(spec, rows, cols)?;
        Ok(())
    })
}

/// A built-in model (`"independence"`, `"changepoint-gilby"`,
/// `"common-blocks"`, `"own-blocks"`) on a `rows × cols` grid.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_model_named(name: *const c_char, rows: usize, cols: usize, out: *mut *mut MfModel) -> MfStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        let name = unsafe { string(name, "name") }?;
        let spec = named_model(name).ok_or_else(|| fail(MfStatus::InvalidArgument, format!("unknown model {name:?}")))?;
        *out = bind_model(spec, rows, cols)?;
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mf_model_free(m: *mut MfModel) {
    if !m.is_null() {
        // SAFETY: handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(m) });
    }
}

/// Residual degrees of freedom `R·C − rank A`.
///
/// # Safety
/// `m` must be a valid handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mf_model_df(m: *const MfModel, out: *mut usize) -> MfStatus {
    guard(|| {
        let m = &unsafe { deref(m, "model") }?.0;
        *unsafe { out_ref(out, "out") }? = Configuration::new(m).degrees_of_freedom();
        Ok(())
    })
}

/// Fits `model` to `table`. When `expected` is non-null it receives the
/// `rows * cols` fitted means (row-major); `len` is its capacity.
///
/// # Safety
/// Handles must be valid; `out` writable; `expected` null or writable for
/// `len` values.
#[no_mangle]
pub unsafe extern "C" fn mf_fit(
    table: *const MfTable,
    model: *const MfModel,
    expected: *mut f64,
    len: usize,
    out: *mut MfFit,
) -> MfStatus {
    guard(|| {
        let t = &unsafe { deref(table, "table") }?.0;
        let m = &unsafe { deref(model, "model") }?.0;
        let out = unsafe { out_ref(out, "out") }?;
        let fit = ipf_fit(t, m, &FitOptions::default())?;
        if !expected.is_null() {
            if len < fit.expected.len() {
                return Err(fail(MfStatus::InvalidArgument, format!("buffer holds {len} values, need {}", fit.expected.len())));
            }
            // SAFETY: checked length; caller guarantees writability.
            unsafe { ptr::copy_nonoverlapping(fit.expected.as_ptr(), expected, fit.expected.len()) };
        }
        *out = MfFit {
            chi2: chi_square(t, &fit.expected),
            g2: g_squared(t, &fit.expected),
            df: Configuration::new(m).degrees_of_freedom(),
            iterations: fit.iterations,
            converged: fit.converged,
            max_discrepancy: fit.max_discrepancy,
        };
        Ok(())
    })
}

/// `2 Σ x log(m̂_outer / m̂_inner)` for nested `inner ⊂ outer`.
///
/// # Safety
/// Handles must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mf_llr(table: *const MfTable, inner: *const MfModel, outer: *const MfModel, out: *mut f64) -> MfStatus {
    guard(|| {
        let t = &unsafe { deref(table, "table") }?.0;
        let a = &unsafe { deref(inner, "inner") }?.0;
        let b = &unsafe { deref(outer, "outer") }?.0;
        let out = unsafe { out_ref(out, "out") }?;
        if !is_nested(a, b) {
            return Err(fail(MfStatus::NotNested, "inner is not a submodel of outer"));
        }
        let opts = FitOptions::default();
        *out = llr_from_fits(t, &ipf_fit(t, a, &opts)?, &ipf_fit(t, b, &opts)?)?;
        Ok(())
    })
}

fn statistic(stat: MfStatistic, null: &Model, alt: Option<&Model>) -> Result<FittedStatistic, Failure> {
    let opts = FitOptions::default();
    Ok(match (stat, alt) {
        (MfStatistic::Chi2, _) => FittedStatistic::chi_square(null, opts),
        (MfStatistic::G2, _) => FittedStatistic::g_squared(null, opts),
        (MfStatistic::Llr, Some(alt)) => FittedStatistic::llr(null, alt, opts)?,
        (MfStatistic::Llr, None) => return Err(fail(MfStatus::InvalidArgument, "llr needs an alternative model")),
    })
}

unsafe fn optional_model<'a>(p: *const MfModel) -> Option<&'a Model> {
    // SAFETY: null or valid per the caller.
    unsafe { p.as_ref() }.map(|m| &m.0)
}

/// Monte Carlo conditional p-value from a Metropolis–Hastings walk on the
/// fiber of `table` under `null`. `alt` may be null unless `stat` is
/// `Llr`.
///
/// # Safety
/// Handles must be valid (or null for `alt`); `opts` readable; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn mf_mcmc_pvalue(
    table: *const MfTable,
    null: *const MfModel,
    alt: *const MfModel,
    stat: MfStatistic,
    opts: *const MfChainOptions,
    out: *mut MfPValue,
) -> MfStatus {
    guard(|| {
        let t = &unsafe { deref(table, "table") }?.0;
        let m = &unsafe { deref(null, "null") }?.0;
        let alt = unsafe { optional_model(alt) };
        let o = unsafe { deref(opts, "opts") }?;
        let out = unsafe { out_ref(out, "out") }?;
        let as_usize = |v: u64| usize::try_from(v).map_err(|_| fail(MfStatus::InvalidArgument, "chain length overflows"));
        let chain = ChainConfig {
            steps: as_usize(o.steps)?,
            burn_in: as_usize(o.burn_in)?,
            thin: as_usize(o.thin)?,
            seed: o.seed,
        };
        statistic(stat, m, alt)?;
        let basis = markov_basis(m, &BasisOptions::default());
        let pooled = run_chains(t, basis.configuration(), &basis, &chain, o.chains.max(1) as usize, None, || {
            let mut s = statistic(stat, m, alt).ok().expect("statistic was checked");
            move |x: &Table| s.evaluate(x)
        })?;
        let (acc, all) = pooled
            .chains
            .iter()
            .fold((0, 0), |(a, n), c| (a + c.accepted, n + c.accepted + c.stayed));
        *out = MfPValue {
            observed: pooled.observed,
            p_value: pooled.p_value,
            std_error: pooled.std_error,
            acceptance_rate: if all == 0 { 0.0 } else { acc as f64 / all as f64 },
            samples: pooled.total_samples() as u64,
        };
        Ok(())
    })
}

/// Exact conditional p-value by enumerating the fiber (at most `cap`
/// members).
///
/// # Safety
/// Handles must be valid (or null for `alt`); `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mf_exact_pvalue(
    table: *const MfTable,
    null: *const MfModel,
    alt: *const MfModel,
    stat: MfStatistic,
    cap: usize,
    out: *mut f64,
) -> MfStatus {
    guard(|| {
        let t = &unsafe { deref(table, "table") }?.0;
        let m = &unsafe { deref(null, "null") }?.0;
        let alt = unsafe { optional_model(alt) };
        let out = unsafe { out_ref(out, "out") }?;
        let mut s = statistic(stat, m, alt)?;
        let cfg = Configuration::new(m);
        let fiber = enumerate_fiber(&cfg.sufficient_statistic(t)?, &cfg, cap)?;
        *out = exact_pvalue_in(&fiber, t, |x| s.evaluate(x));
        Ok(())
    })
}
