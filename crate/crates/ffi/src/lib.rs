//! C ABI over the `clemo` library.
//!
//! Objects cross the boundary as opaque handles created by the
//! `clemo_problem_*`, `clemo_explain` and `clemo_explanation_model` calls and
//! released with the matching `*_free`. Every fallible call
//! returns a [`ClemoStatus`]; on failure [`clemo_last_error`] holds a message
//! for the calling thread. Output buffers are caller-allocated with an
//! explicit length.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use clemo::experiments::{default_sampler, default_spp_problem, run_explain, ExplainConfig, ExplainOutcome, Method};
use clemo::instances::{gen_cvrp, gen_kp, CvrpGenConfig, KpGenConfig, KpType};
use clemo::problem::{Problem, ProblemInstance};
use clemo::surrogate::{ClemoOptions, SurrogateModel, DEFAULT_MAX_ITER, DEFAULT_TOL};
use clemo::ClemoError;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClemoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    DimensionMismatch = 4,
    Precondition = 5,
    Infeasible = 6,
    OracleRefused = 7,
    SamplerStarvation = 8,
    Config = 9,
    Data = 10,
    NonFiniteLoss = 11,
    Io = 12,
    Parse = 13,
    Panic = 14,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClemoMethod {
    Dtr = 0,
    Lr = 1,
    Clemo = 2,
}

pub const CLEMO_METHODS_DTR: u32 = 1;
pub const CLEMO_METHODS_LR: u32 = 2;
pub const CLEMO_METHODS_CLEMO: u32 = 4;

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct ClemoExplainOptions {
    pub samples: usize,
    pub seed: u64,
    /// Bitwise OR of `CLEMO_METHODS_*`.
    pub methods: u32,
    pub max_iter: usize,
    pub tol: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ClemoMetrics {
    pub accuracy_objective: f64,
    pub accuracy_decisions: f64,
    pub incoherence_objective: f64,
    pub incoherence_feasibility: f64,
}

pub struct ClemoProblem(ProblemInstance);

pub struct ClemoExplanation(ExplainOutcome);

pub struct ClemoModel(SurrogateModel);

#[derive(Debug, thiserror::Error)]
enum FfiError {
    #[error("null pointer passed for {0}")]
    Null(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error("buffer holds {got} elements, {need} needed")]
    Buffer { need: usize, got: usize },
    #[error(transparent)]
    Core(#[from] ClemoError),
}

impl FfiError {
    fn status(&self) -> ClemoStatus {
        match self {
            FfiError::Null(_) => ClemoStatus::NullPointer,
            FfiError::Invalid(_) => ClemoStatus::InvalidArgument,
            FfiError::Buffer { .. } => ClemoStatus::BufferTooSmall,
            FfiError::Core(e) => match e {
                ClemoError::DimensionMismatch { .. } => ClemoStatus::DimensionMismatch,
                ClemoError::Precondition(_) => ClemoStatus::Precondition,
                ClemoError::Infeasible(_) => ClemoStatus::Infeasible,
                ClemoError::OracleRefused(_) => ClemoStatus::OracleRefused,
                ClemoError::SamplerStarvation { .. } => ClemoStatus::SamplerStarvation,
                ClemoError::Config(_) => ClemoStatus::Config,
                ClemoError::Data(_) => ClemoStatus::Data,
                ClemoError::NonFiniteLoss => ClemoStatus::NonFiniteLoss,
                ClemoError::Io(_) => ClemoStatus::Io,
                ClemoError::Json(_) | ClemoError::Csv(_) => ClemoStatus::Parse,
            },
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), FfiError>) -> ClemoStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ClemoStatus::Ok,
        Ok(Err(e)) => {
            set_last_error(e.to_string());
            e.status()
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            ClemoStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, FfiError> {
    p.as_ref().ok_or(FfiError::Null(what))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], FfiError> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(FfiError::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out(src: &[f64], out: *mut f64, len: usize) -> Result<(), FfiError> {
    if len < src.len() {
        return Err(FfiError::Buffer { need: src.len(), got: len });
    }
    if !src.is_empty() {
        if out.is_null() {
            return Err(FfiError::Null("output buffer"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    }
    Ok(())
}

unsafe fn put_handle<T>(out: *mut *mut T, value: T) -> Result<(), FfiError> {
    if out.is_null() {
        return Err(FfiError::Null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), FfiError> {
    if out.is_null() {
        return Err(FfiError::Null("output string"));
    }
    *out = CString::new(s)
        .map_err(|_| FfiError::Invalid("string contains a nul byte".into()))?
        .into_raw();
    Ok(())
}

unsafe fn drop_handle<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn clemo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until
/// the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn clemo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from a `*_to_json` call and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn clemo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn clemo_explain_options_default() -> ClemoExplainOptions {
    ClemoExplainOptions {
        samples: 1000,
        seed: 0,
        methods: CLEMO_METHODS_LR | CLEMO_METHODS_CLEMO,
        max_iter: DEFAULT_MAX_ITER,
        tol: DEFAULT_TOL,
    }
}

/// Parses an instance document (the CLI's `instance.json` format).
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clemo_problem_from_json(
    json: *const c_char,
    out: *mut *mut ClemoProblem,
) -> ClemoStatus {
    guard(|| {
        if json.is_null() {
            return Err(FfiError::Null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| FfiError::Invalid("json is not UTF-8".into()))?;
        put_handle(out, ClemoProblem(ProblemInstance::from_json(text)?))
    })
}

/// Generated knapsack with capacity 1; `kp_type` is 1 to 4.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clemo_problem_generate_kp(
    kp_type: u8,
    items: usize,
    seed: u64,
    out: *mut *mut ClemoProblem,
) -> ClemoStatus {
    guard(|| {
        let kind = KpType::from_index(kp_type)?;
        let kp = gen_kp(&KpGenConfig::new(kind, seed).with_items(items))?;
        put_handle(out, ClemoProblem(ProblemInstance::Kp(kp)))
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clemo_problem_generate_cvrp(seed: u64, out: *mut *mut ClemoProblem) -> ClemoStatus {
    guard(|| put_handle(out, ClemoProblem(ProblemInstance::Cvrp(gen_cvrp(&CvrpGenConfig::new(seed))?))))
}

/// The shipped six-node shortest-path instance.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clemo_problem_default_spp(out: *mut *mut ClemoProblem) -> ClemoStatus {
    guard(|| put_handle(out, ClemoProblem(default_spp_problem())))
}

/// # Safety
/// `p` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clemo_problem_free(p: *mut ClemoProblem) {
    drop_handle(p);
}

/// Number of parameters, or 0 for a NULL handle.
///
/// # Safety
/// `p` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clemo_problem_num_params(p: *const ClemoProblem) -> usize {
    p.as_ref().map_or(0, |p| p.0.num_params())
}

/// Number of decision variables, or 0 for a NULL handle.
///
/// # Safety
/// `p` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clemo_problem_num_vars(p: *const ClemoProblem) -> usize {
    p.as_ref().map_or(0, |p| p.0.num_vars())
}

/// Copies the present parameter vector into `out`.
///
/// # Safety
/// `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn clemo_problem_nominal(
    p: *const ClemoProblem,
    out: *mut f64,
    out_len: usize,
) -> ClemoStatus {
    guard(|| write_out(&deref(p, "problem")?.0.nominal().values, out, out_len))
}

/// Solves the problem at `theta`, writing the decision vector and objective value.
///
/// # Safety
/// `theta` must hold `theta_len` doubles, `x_out` `x_len` doubles, and
/// `objective_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clemo_problem_solve(
    p: *const ClemoProblem,
    theta: *const f64,
    theta_len: usize,
    x_out: *mut f64,
    x_len: usize,
    objective_out: *mut f64,
) -> ClemoStatus {
    guard(|| {
        let problem = &deref(p, "problem")?.0;
        let theta = input(theta, theta_len, "theta")?;
        if theta.len() != problem.num_params() {
            return Err(ClemoError::DimensionMismatch {
                what: "parameter vector",
                expected: problem.num_params(),
                got: theta.len(),
            }
            .into());
        }
        if objective_out.is_null() {
            return Err(FfiError::Null("objective_out"));
        }
        let record = problem.solve(theta)?;
        write_out(&record.decision.values, x_out, x_len)?;
        *objective_out = record.objective_value;
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clemo_problem_to_json(p: *const ClemoProblem, out: *mut *mut c_char) -> ClemoStatus {
    guard(|| put_string(out, deref(p, "problem")?.0.to_json()?))
}

fn methods_from_mask(mask: u32) -> Result<Vec<Method>, FfiError> {
    if mask == 0 || mask & !(CLEMO_METHODS_DTR | CLEMO_METHODS_LR | CLEMO_METHODS_CLEMO) != 0 {
        return Err(FfiError::Invalid(format!("invalid method mask {mask:#x}")));
    }
    Ok([
        (CLEMO_METHODS_DTR, Method::Dtr),
        (CLEMO_METHODS_LR, Method::Lr),
        (CLEMO_METHODS_CLEMO, Method::Clemo),
    ]
    .into_iter()
    .filter(|(bit, _)| mask & bit != 0)
    .map(|(_, m)| m)
    .collect())
}

/// Samples around the present problem and fits the selected methods.
/// `opts` may be NULL for the defaults.
///
/// # Safety
/// `p` must be a live handle, `opts` NULL or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn clemo_explain(
    p: *const ClemoProblem,
    opts: *const ClemoExplainOptions,
    out: *mut *mut ClemoExplanation,
) -> ClemoStatus {
    guard(|| {
        let problem = &deref(p, "problem")?.0;
        let opts = opts.as_ref().copied().unwrap_or_else(|| clemo_explain_options_default());
        let cfg = ExplainConfig {
            sampler: default_sampler(problem, opts.samples, opts.seed),
            methods: methods_from_mask(opts.methods)?,
            lambda: Default::default(),
            clemo: ClemoOptions {
                max_iter: opts.max_iter,
                tol: opts.tol,
            },
        };
        let outcome = run_explain(problem, &problem.nominal(), &cfg)?;
        put_handle(out, ClemoExplanation(outcome))
    })
}

/// # Safety
/// `e` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clemo_explanation_free(e: *mut ClemoExplanation) {
    drop_handle(e);
}

fn method_name(m: ClemoMethod) -> &'static str {
    match m {
        ClemoMethod::Dtr => "dtr",
        ClemoMethod::Lr => "lr",
        ClemoMethod::Clemo => "clemo",
    }
}

/// Evaluation metrics of one fitted method.
///
/// # Safety
/// `e` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn clemo_explanation_metrics(
    e: *const ClemoExplanation,
    method: ClemoMethod,
    out: *mut ClemoMetrics,
) -> ClemoStatus {
    guard(|| {
        let e = &deref(e, "explanation")?.0;
        let row = e
            .report
            .get(method_name(method))
            .ok_or_else(|| FfiError::Invalid(format!("{} was not fitted", method_name(method))))?;
        if out.is_null() {
            return Err(FfiError::Null("metrics"));
        }
        *out = ClemoMetrics {
            accuracy_objective: row.accuracy_objective,
            accuracy_decisions: row.accuracy_decisions,
            incoherence_objective: row.incoherence_objective,
            incoherence_feasibility: row.incoherence_feasibility,
        };
        Ok(())
    })
}

/// Loss weights (a1, a2, c1, c2) used by the CLEMO fit.
///
/// # Safety
/// `out` must hold 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn clemo_explanation_lambda(e: *const ClemoExplanation, out: *mut f64) -> ClemoStatus {
    guard(|| {
        let lambda = deref(e, "explanation")?
            .0
            .lambda
            .ok_or_else(|| FfiError::Invalid("clemo was not fitted".into()))?;
        write_out(&lambda.as_array(), out, 4)
    })
}

/// CLEMO loss trace. With `out_len` too small, `BufferTooSmall` is returned
/// and `needed` still receives the length.
///
/// # Safety
/// `out` must hold `out_len` doubles and `needed` must be writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn clemo_explanation_loss_trace(
    e: *const ClemoExplanation,
    out: *mut f64,
    out_len: usize,
    needed: *mut usize,
) -> ClemoStatus {
    guard(|| {
        let fit = deref(e, "explanation")?
            .0
            .clemo
            .as_ref()
            .ok_or_else(|| FfiError::Invalid("clemo was not fitted".into()))?;
        if !needed.is_null() {
            *needed = fit.loss_trace.len();
        }
        write_out(&fit.loss_trace, out, out_len)
    })
}

/// Copy of a fitted linear model (`Lr` or `Clemo`).
///
/// # Safety
/// `e` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn clemo_explanation_model(
    e: *const ClemoExplanation,
    method: ClemoMethod,
    out: *mut *mut ClemoModel,
) -> ClemoStatus {
    guard(|| {
        let e = &deref(e, "explanation")?.0;
        let model = match method {
            ClemoMethod::Lr => e.lr.as_ref(),
            ClemoMethod::Clemo => e.clemo.as_ref().map(|f| &f.model),
            ClemoMethod::Dtr => {
                return Err(FfiError::Invalid("the tree benchmark has no coefficient model".into()))
            }
        };
        let model = model.ok_or_else(|| FfiError::Invalid(format!("{} was not fitted", method_name(method))))?;
        put_handle(out, ClemoModel(model.clone()))
    })
}

/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clemo_model_free(m: *mut ClemoModel) {
    drop_handle(m);
}

/// Rows of the coefficient matrix: the objective followed by explained variables.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clemo_model_num_components(m: *const ClemoModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.num_components())
}

/// Columns of the coefficient matrix: intercept plus one per parameter.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clemo_model_num_features(m: *const ClemoModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.num_features())
}

/// Row-major coefficients, `components × features`.
///
/// # Safety
/// `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn clemo_model_coefficients(m: *const ClemoModel, out: *mut f64, out_len: usize) -> ClemoStatus {
    guard(|| write_out(&deref(m, "model")?.0.beta, out, out_len))
}

/// Predicted objective and explained variables at `theta`.
///
/// # Safety
/// `theta` must hold `theta_len` doubles and `out` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn clemo_model_predict(
    m: *const ClemoModel,
    theta: *const f64,
    theta_len: usize,
    out: *mut f64,
    out_len: usize,
) -> ClemoStatus {
    guard(|| {
        let model = &deref(m, "model")?.0;
        let theta = input(theta, theta_len, "theta")?;
        let pred = clemo::surrogate::predict(model, theta)?;
        write_out(&pred, out, out_len)
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clemo_model_to_json(m: *const ClemoModel, out: *mut *mut c_char) -> ClemoStatus {
    guard(|| put_string(out, deref(m, "model")?.0.to_json()?))
}

