//! C ABI for the group sequential design toolkit.
//!
//! The interface follows the usual C conventions: opaque handles created
//! and destroyed by paired functions, integer status codes, out-pointers
//! for results, and a thread-local error message readable after any
//! failure. The build script generates `include/seqdesign.h` with
//! cbindgen.
//!
//! Every entry point catches panics at the boundary; a panic becomes
//! [`SeqStatus::Panic`] instead of unwinding into the caller.

use std::cell::RefCell;
use std::ffi::CStr;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use seqdesign::evaluate::exact_rates;
use seqdesign::gaussnum::{boundaries_from_spending, RecursionGrid, SpendingKind};
use seqdesign::milp::MilpStatus;
use seqdesign::sampling::{DesignSpec, Sidedness, TestFamily};
use seqdesign::smilp::{
    solve_design, solve_symmetric_design, CutoffVector, DesignOutcome, SolverParams,
};
use seqdesign::Error;

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullArg = 1,
    /// Invalid argument, configuration, or input file.
    Invalid = 2,
    /// A numerical routine failed to converge or hit a degenerate case.
    Numerical = 3,
    /// No design satisfies the requested error budgets.
    Infeasible = 4,
    /// The solver exhausted its work budget without any design.
    WorkBudget = 5,
    /// Internal panic caught at the boundary; see the error message.
    Panic = 6,
}

/// Opaque trial design specification.
pub struct SeqSpec {
    inner: DesignSpec,
}

/// Opaque solved design.
pub struct SeqDesign {
    outcome: DesignOutcome,
    cutoffs: CutoffVector,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
}

fn status_of(error: &Error) -> SeqStatus {
    match error {
        Error::Infeasible(_) => SeqStatus::Infeasible,
        Error::Numerical(_) => SeqStatus::Numerical,
        _ => SeqStatus::Invalid,
    }
}

fn fail(error: Error) -> SeqStatus {
    let status = status_of(&error);
    set_error(error.to_string());
    status
}

/// Run `body` with panics converted to [`SeqStatus::Panic`].
fn guarded(body: impl FnOnce() -> SeqStatus) -> SeqStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".into());
            set_error(message);
            SeqStatus::Panic
        }
    }
}

/// Copy the most recent error message on this thread into `buf`
/// (NUL-terminated, truncated to `len` bytes) and return the full
/// message length in bytes, excluding the terminator. Pass a null `buf`
/// or zero `len` to query the length alone.
///
/// # Safety
/// `buf`, when non-null, must point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn seqdesign_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let message = e.borrow();
        let bytes = message.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// ABI version of this header; bumps on breaking changes.
#[no_mangle]
pub extern "C" fn seqdesign_abi_version() -> u32 {
    1
}

unsafe fn collect_spec(
    family: TestFamily,
    two_sided: bool,
    stage_sizes: *const u32,
    n_stages: usize,
    alpha: f64,
    alpha_tilde: f64,
    beta: f64,
    lambda: f64,
    out: *mut *mut SeqSpec,
) -> SeqStatus {
    if stage_sizes.is_null() || out.is_null() {
        set_error("stage_sizes and out must be non-null");
        return SeqStatus::NullArg;
    }
    let sizes = std::slice::from_raw_parts(stage_sizes, n_stages).to_vec();
    let spec = DesignSpec {
        family,
        sidedness: if two_sided { Sidedness::Two } else { Sidedness::One },
        stage_sizes: sizes,
        alpha,
        alpha_buffer: if alpha_tilde.is_finite() && alpha_tilde > 0.0 {
            Some(alpha_tilde)
        } else {
            None
        },
        beta,
        lambda,
    };
    if let Err(e) = spec.validate() {
        return fail(e);
    }
    *out = Box::into_raw(Box::new(SeqSpec { inner: spec }));
    SeqStatus::Ok
}

/// Create a z-test design specification.
///
/// `stage_sizes` lists per-stage enrollments (`n_stages` entries). Pass a
/// non-positive `alpha_tilde` to use the default training budget, and
/// `beta = 1` / `lambda = 1` to disable the power constraint and
/// alternative scaling. On success `*out` owns the new handle; release it
/// with [`seqdesign_spec_free`].
///
/// # Safety
/// `stage_sizes` must point to `n_stages` readable entries and `out` to a
/// writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn seqdesign_spec_new_z(
    mu_alt: f64,
    sigma: f64,
    two_sided: bool,
    stage_sizes: *const u32,
    n_stages: usize,
    alpha: f64,
    alpha_tilde: f64,
    beta: f64,
    lambda: f64,
    out: *mut *mut SeqSpec,
) -> SeqStatus {
    guarded(|| {
        collect_spec(
            TestFamily::Z { mu_alt, sigma },
            two_sided,
            stage_sizes,
            n_stages,
            alpha,
            alpha_tilde,
            beta,
            lambda,
            out,
        )
    })
}

/// Create a two-proportion design specification; arguments as in
/// [`seqdesign_spec_new_z`] with success rates `p_x` (treatment) and
/// `p_y` (control).
///
/// # Safety
/// Same as [`seqdesign_spec_new_z`].
#[no_mangle]
pub unsafe extern "C" fn seqdesign_spec_new_two_prop(
    p_x: f64,
    p_y: f64,
    two_sided: bool,
    stage_sizes: *const u32,
    n_stages: usize,
    alpha: f64,
    alpha_tilde: f64,
    beta: f64,
    lambda: f64,
    out: *mut *mut SeqSpec,
) -> SeqStatus {
    guarded(|| {
        collect_spec(
            TestFamily::TwoProp { p_x, p_y },
            two_sided,
            stage_sizes,
            n_stages,
            alpha,
            alpha_tilde,
            beta,
            lambda,
            out,
        )
    })
}

/// Destroy a specification handle. Null is ignored.
///
/// # Safety
/// `spec` must be null or a pointer from a `seqdesign_spec_new_*` call,
/// not yet freed.
#[no_mangle]
pub unsafe extern "C" fn seqdesign_spec_free(spec: *mut SeqSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Number of interim analyses in a specification.
///
/// # Safety
/// `spec` must be a live specification handle.
#[no_mangle]
pub unsafe extern "C" fn seqdesign_spec_stages(spec: *const SeqSpec) -> usize {
    if spec.is_null() {
        return 0;
    }
    (*spec).inner.k_stages()
}

/// Solve the optimal design problem on `m_paths` simulated paths per
/// hypothesis. `tick_limit = 0` means unlimited deterministic work;
/// `symmetric` requests the two-boundary (accept and reject) design.
/// Returns `Ok` when a design was found — call
/// [`seqdesign_design_proven`] to see whether it is proven optimal —
/// and an error status otherwise.
///
/// # Safety
/// `spec` must be a live specification handle and `out` a writable
/// pointer slot. Release the design with [`seqdesign_design_free`].
#[no_mangle]
pub unsafe extern "C" fn seqdesign_solve(
    spec: *const SeqSpec,
    m_paths: usize,
    seed: u64,
    tick_limit: u64,
    symmetric: bool,
    out: *mut *mut SeqDesign,
) -> SeqStatus {
    guarded(|| {
        if spec.is_null() || out.is_null() {
            set_error("spec and out must be non-null");
            return SeqStatus::NullArg;
        }
        let params = SolverParams {
            tick_limit: if tick_limit == 0 { u64::MAX } else { tick_limit },
            ..SolverParams::default()
        };
        let inner = &(*spec).inner;
        let solved = if symmetric {
            solve_symmetric_design(inner, m_paths, seed, &params)
        } else {
            solve_design(inner, m_paths, seed, &params)
        };
        let outcome = match solved {
            Ok(o) => o,
            Err(e) => return fail(e),
        };
        match outcome.cutoffs.clone() {
            Some(cutoffs) => {
                *out = Box::into_raw(Box::new(SeqDesign { outcome, cutoffs }));
                SeqStatus::Ok
            }
            None => {
                let status = match outcome.solution.status {
                    MilpStatus::Infeasible => SeqStatus::Infeasible,
                    _ => SeqStatus::WorkBudget,
                };
                set_error(format!(
                    "solver finished with status {:?} and no design",
                    outcome.solution.status
                ));
                status
            }
        }
    })
}

/// Destroy a design handle. Null is ignored.
///
/// # Safety
/// `design` must be null or a pointer from [`seqdesign_solve`], not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn seqdesign_design_free(design: *mut SeqDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// Number of stages in a solved design.
///
/// # Safety
/// `design` must be a live design handle.
#[no_mangle]
pub unsafe extern "C" fn seqdesign_design_stages(design: *const SeqDesign) -> usize {
    if design.is_null() {
        return 0;
    }
    (*design).cutoffs.k_stages()
}

/// 1 when the design is proven optimal, 0 when it is the best incumbent
/// found within the work budget.
///
/// # Safety
/// `design` must be a live design handle.
#[no_mangle]
pub unsafe extern "C" fn seqdesign_design_proven(design: *const SeqDesign) -> i32 {
    if design.is_null() {
        return 0;
    }
    i32::from((*design).outcome.solution.status == MilpStatus::Optimal)
}

/// Empirical objective value (average stages-weighted sample size on the
/// training paths); NaN when unavailable.
///
/// # Safety
/// `design` must be a live design handle.
#[no_mangle]
pub unsafe extern "C" fn seqdesign_design_objective(design: *const SeqDesign) -> f64 {
    if design.is_null() {
        return f64::NAN;
    }
    (*design)
        .outcome
        .objective_empirical
        .unwrap_or(f64::NAN)
}

unsafe fn read_threshold(
    design: *const SeqDesign,
    stage: usize,
    lower: bool,
    out: *mut f64,
) -> SeqStatus {
    if design.is_null() || out.is_null() {
        set_error("design and out must be non-null");
        return SeqStatus::NullArg;
    }
    let cutoffs = &(*design).cutoffs;
    if stage >= cutoffs.k_stages() {
        set_error(format!(
            "stage {stage} out of range for a {}-stage design",
            cutoffs.k_stages()
        ));
        return SeqStatus::Invalid;
    }
    let value = match (cutoffs, lower) {
        (CutoffVector::Standard { thresholds }, false) => thresholds[stage],
        (CutoffVector::Standard { .. }, true) => {
            set_error("single-boundary designs have no lower cutoffs");
            return SeqStatus::Invalid;
        }
        (CutoffVector::Symmetric { upper, .. }, false) => upper[stage],
        (CutoffVector::Symmetric { lower, .. }, true) => lower[stage],
    };
    *out = value;
    SeqStatus::Ok
}

/// Read the rejection (upper) cutoff of `stage` (0-based).
///
/// # Safety
/// `design` must be a live design handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn seqdesign_design_threshold(
    design: *const SeqDesign,
    stage: usize,
    out: *mut f64,
) -> SeqStatus {
    guarded(|| read_threshold(design, stage, false, out))
}

/// Read the acceptance (lower) cutoff of `stage` (0-based); only
/// two-boundary designs have one.
///
/// # Safety
/// `design` must be a live design handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn seqdesign_design_lower(
    design: *const SeqDesign,
    stage: usize,
    out: *mut f64,
) -> SeqStatus {
    guarded(|| read_threshold(design, stage, true, out))
}

/// Exact operating characteristics of a solved design under its
/// specification: type-1 error, type-2 error, and expected sample size.
/// Available for Gaussian-law families (z and two-proportion).
///
/// # Safety
/// `spec` and `design` must be live handles; `type1`, `type2`, and `ess`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn seqdesign_exact_rates(
    spec: *const SeqSpec,
    design: *const SeqDesign,
    type1: *mut f64,
    type2: *mut f64,
    ess: *mut f64,
) -> SeqStatus {
    guarded(|| {
        if spec.is_null() || design.is_null() || type1.is_null() || type2.is_null() || ess.is_null()
        {
            set_error("all arguments must be non-null");
            return SeqStatus::NullArg;
        }
        match exact_rates(&(*spec).inner, &(*design).cutoffs, &RecursionGrid::default()) {
            Ok(rates) => {
                *type1 = rates.type1;
                *type2 = rates.type2;
                *ess = rates.ess;
                SeqStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Alpha-spending boundaries for the specification's schedule and level.
/// `kind` is one of `"pocock"`, `"obf"`, or `"lan-demets"`; `out_theta`
/// receives one cutoff per stage and `len` must equal the stage count.
///
/// # Safety
/// `spec` must be a live handle, `kind` a NUL-terminated string, and
/// `out_theta` writable for `len` entries.
#[no_mangle]
pub unsafe extern "C" fn seqdesign_spending_boundaries(
    spec: *const SeqSpec,
    kind: *const c_char,
    out_theta: *mut f64,
    len: usize,
) -> SeqStatus {
    guarded(|| {
        if spec.is_null() || kind.is_null() || out_theta.is_null() {
            set_error("spec, kind, and out_theta must be non-null");
            return SeqStatus::NullArg;
        }
        let kind = match CStr::from_ptr(kind).to_str() {
            Ok(s) => s,
            Err(_) => {
                set_error("kind is not valid UTF-8");
                return SeqStatus::Invalid;
            }
        };
        let kind: SpendingKind = match kind.parse() {
            Ok(k) => k,
            Err(e) => return fail(e),
        };
        let inner = &(*spec).inner;
        if len != inner.k_stages() {
            set_error(format!(
                "out_theta holds {len} entries but the design has {} stages",
                inner.k_stages()
            ));
            return SeqStatus::Invalid;
        }
        let two_sided = inner.sidedness.is_two();
        let bracket = if two_sided { (0.0, 10.0) } else { (-10.0, 10.0) };
        let result = boundaries_from_spending(
            &inner.stages_cum(),
            kind,
            inner.alpha,
            two_sided,
            bracket,
            &RecursionGrid::default(),
        );
        match result {
            Ok(res) => {
                std::ptr::copy_nonoverlapping(res.theta.as_ptr(), out_theta, len);
                SeqStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
