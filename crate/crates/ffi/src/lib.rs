//! C ABI over `causal_frames`.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every fallible call returns a
//! [`CfStatus`]; on failure a message is available from
//! [`cf_last_error_message`] on the same thread until the next failing call.
//! Panics are caught and reported as `CF_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use causal_frames::frames::{prob_in_frame, JointDistribution};
use causal_frames::io::{parse_scenario, preset, serialize_scenario};
use causal_frames::random::random_scenario;
use causal_frames::verify::{batch_verify, verify_frame_equality, verify_no_signalling, BatchConfig, FrameReport};
use causal_frames::{CausalFrame, Error, Scenario};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Dimension = 4,
    /// A state, POVM or channel failed validation.
    Validation = 5,
    InvalidArgument = 6,
    /// Eigensolver failure, exhausted retries or a broken internal invariant.
    Numerical = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

pub const CF_FRAME_ALPHA: u32 = 0;
pub const CF_FRAME_BETA: u32 = 1;
pub const CF_FRAME_GAMMA: u32 = 2;

/// Opaque scenario handle.
pub struct CfScenario {
    inner: Scenario,
}

/// Opaque result of a frame-equality check.
pub struct CfFrameReport {
    inner: FrameReport,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CfFrameSummary {
    pub passed: bool,
    pub alpha_beta: f64,
    pub alpha_gamma: f64,
    pub beta_gamma: f64,
    pub choi: f64,
    pub star_acausal: f64,
    pub star_causal: f64,
    pub tol: f64,
    pub wall_time_secs: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CfNoSignallingSummary {
    pub passed: bool,
    pub max_deviation: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CfBatchSummary {
    pub n_trials: usize,
    pub passed: usize,
    pub failed: usize,
    pub errored: usize,
    pub worst_frame_deviation: f64,
    pub worst_no_signalling: f64,
    pub total_secs: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(CfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.root() {
            Error::Parse(_) => CfStatus::Parse,
            Error::Dimension(_) => CfStatus::Dimension,
            Error::Hermiticity { .. }
            | Error::Negativity { .. }
            | Error::Trace { .. }
            | Error::Completeness { .. }
            | Error::TracePreservation { .. }
            | Error::Rank(_)
            | Error::NonFinite { .. } => CfStatus::Validation,
            Error::InvalidArgument(_) | Error::UnknownPreset(_) | Error::MissingAltPovm | Error::ZeroMarginal { .. } => {
                CfStatus::InvalidArgument
            }
            _ => CfStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn guard(f: impl FnOnce() -> Outcome) -> CfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CfStatus::Ok,
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
            CfStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(CfStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_param<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(CfStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("JSON never contains nul").into_raw()
}

fn frame_from(code: u32) -> Result<CausalFrame, Failure> {
    match code {
        CF_FRAME_ALPHA => Ok(CausalFrame::AlphaForward),
        CF_FRAME_BETA => Ok(CausalFrame::BetaReverse),
        CF_FRAME_GAMMA => Ok(CausalFrame::GammaSpacelike),
        other => Err(Failure(CfStatus::InvalidArgument, format!("unknown frame code {other}"))),
    }
}

fn copy_table(joint: &JointDistribution, out: *mut f64, len: usize) -> Outcome {
    let needed = joint.n_a() * joint.n_b();
    if out.is_null() {
        return Err(null("out"));
    }
    if len < needed {
        return Err(Failure(
            CfStatus::BufferTooSmall,
            format!("buffer holds {len} values but the table has {needed}"),
        ));
    }
    let flat: Vec<f64> = joint.probabilities.iter().flatten().copied().collect();
    unsafe { ptr::copy_nonoverlapping(flat.as_ptr(), out, needed) };
    Ok(())
}

fn emit(out: *mut *mut CfScenario, scenario: Scenario) {
    unsafe { *out = Box::into_raw(Box::new(CfScenario { inner: scenario })) };
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn cf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failing call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parse and validate a scenario from JSON text.
#[no_mangle]
pub unsafe extern "C" fn cf_scenario_from_json(json: *const c_char, out: *mut *mut CfScenario) -> CfStatus {
    guard(|| {
        out_param(out, "out")?;
        let s = parse_scenario(read_str(json, "json")?)?;
        emit(out, s);
        Ok(())
    })
}

/// Built-in scenario by name: `stern-gerlach`, `depolarizing` or `bell`.
#[no_mangle]
pub unsafe extern "C" fn cf_scenario_preset(name: *const c_char, out: *mut *mut CfScenario) -> CfStatus {
    guard(|| {
        out_param(out, "out")?;
        let s = preset(read_str(name, "name")?)?;
        emit(out, s);
        Ok(())
    })
}

/// Seeded random scenario with full-rank state and an alternative POVM for A.
#[no_mangle]
pub unsafe extern "C" fn cf_scenario_random(
    d1: usize,
    d2: usize,
    n_kraus: usize,
    seed: u64,
    out: *mut *mut CfScenario,
) -> CfStatus {
    guard(|| {
        out_param(out, "out")?;
        if d1 < 2 || d2 < 2 || n_kraus == 0 || n_kraus * d2 < d1 {
            return Err(Failure(
                CfStatus::InvalidArgument,
                format!("no channel with d1={d1}, d2={d2} and {n_kraus} Kraus operators"),
            ));
        }
        let s = random_scenario(d1, d2, n_kraus, seed)?;
        emit(out, s);
        Ok(())
    })
}

/// Free a scenario. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn cf_scenario_free(scenario: *mut CfScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

#[no_mangle]
pub unsafe extern "C" fn cf_scenario_dims(scenario: *const CfScenario, d1: *mut usize, d2: *mut usize) -> CfStatus {
    guard(|| {
        let s = &borrow(scenario, "scenario")?.inner;
        *out_param(d1, "d1")? = s.dims().d1();
        *out_param(d2, "d2")? = s.dims().d2();
        Ok(())
    })
}

/// Number of outcomes of A's and B's measurements.
#[no_mangle]
pub unsafe extern "C" fn cf_scenario_outcomes(scenario: *const CfScenario, n_a: *mut usize, n_b: *mut usize) -> CfStatus {
    guard(|| {
        let s = &borrow(scenario, "scenario")?.inner;
        *out_param(n_a, "n_a")? = s.povm_a().len();
        *out_param(n_b, "n_b")? = s.povm_b().len();
        Ok(())
    })
}

/// Serialize a scenario. Free the result with [`cf_string_free`].
#[no_mangle]
pub unsafe extern "C" fn cf_scenario_to_json(scenario: *const CfScenario, out: *mut *mut c_char) -> CfStatus {
    guard(|| {
        let s = &borrow(scenario, "scenario")?.inner;
        *out_param(out, "out")? = to_c_string(serialize_scenario(s));
        Ok(())
    })
}

/// Row-major `n_a x n_b` joint distribution in one frame (`CF_FRAME_*`).
#[no_mangle]
pub unsafe extern "C" fn cf_joint_probabilities(
    scenario: *const CfScenario,
    frame: u32,
    out: *mut f64,
    len: usize,
) -> CfStatus {
    guard(|| {
        let s = &borrow(scenario, "scenario")?.inner;
        copy_table(&prob_in_frame(s, frame_from(frame)?)?, out, len)
    })
}

/// Run every frame and operator identity check. A report is produced even
/// when a check fails; inspect `passed` in its summary.
#[no_mangle]
pub unsafe extern "C" fn cf_verify_frames(
    scenario: *const CfScenario,
    tol: f64,
    out: *mut *mut CfFrameReport,
) -> CfStatus {
    guard(|| {
        let s = &borrow(scenario, "scenario")?.inner;
        let slot = out_param(out, "out")?;
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(Failure(CfStatus::InvalidArgument, format!("tolerance must be nonnegative, got {tol}")));
        }
        *slot = Box::into_raw(Box::new(CfFrameReport {
            inner: verify_frame_equality(s, tol)?,
        }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cf_frame_report_free(report: *mut CfFrameReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

#[no_mangle]
pub unsafe extern "C" fn cf_frame_report_summary(report: *const CfFrameReport, out: *mut CfFrameSummary) -> CfStatus {
    guard(|| {
        let r = &borrow(report, "report")?.inner;
        *out_param(out, "out")? = CfFrameSummary {
            passed: r.passed,
            alpha_beta: r.alpha_beta,
            alpha_gamma: r.alpha_gamma,
            beta_gamma: r.beta_gamma,
            choi: r.choi,
            star_acausal: r.star_acausal,
            star_causal: r.star_causal,
            tol: r.tol,
            wall_time_secs: r.wall_time_secs,
        };
        Ok(())
    })
}

/// The joint table a report holds for one frame, row-major.
#[no_mangle]
pub unsafe extern "C" fn cf_frame_report_joint(
    report: *const CfFrameReport,
    frame: u32,
    out: *mut f64,
    len: usize,
) -> CfStatus {
    guard(|| {
        let r = &borrow(report, "report")?.inner;
        let joint = match frame_from(frame)? {
            CausalFrame::AlphaForward => &r.alpha,
            CausalFrame::BetaReverse => &r.beta,
            CausalFrame::GammaSpacelike => &r.gamma,
        };
        copy_table(joint, out, len)
    })
}

/// Full report as JSON. Free the result with [`cf_string_free`].
#[no_mangle]
pub unsafe extern "C" fn cf_frame_report_to_json(report: *const CfFrameReport, out: *mut *mut c_char) -> CfStatus {
    guard(|| {
        let r = &borrow(report, "report")?.inner;
        let text = serde_json::to_string_pretty(r).map_err(|e| Failure(CfStatus::Numerical, e.to_string()))?;
        *out_param(out, "out")? = to_c_string(text);
        Ok(())
    })
}

/// Compare B's marginals under A's two measurements. The scenario needs an
/// alternative POVM for A.
#[no_mangle]
pub unsafe extern "C" fn cf_verify_no_signalling(
    scenario: *const CfScenario,
    tol: f64,
    out: *mut CfNoSignallingSummary,
) -> CfStatus {
    guard(|| {
        let s = &borrow(scenario, "scenario")?.inner;
        let slot = out_param(out, "out")?;
        let r = verify_no_signalling(s, tol)?;
        *slot = CfNoSignallingSummary {
            passed: r.passed,
            max_deviation: r.max_deviation,
        };
        Ok(())
    })
}

/// Frame equality on `n_trials` random scenarios seeded `seed, seed+1, ...`.
#[no_mangle]
pub unsafe extern "C" fn cf_batch_verify(
    d1: usize,
    d2: usize,
    n_kraus: usize,
    n_trials: usize,
    seed: u64,
    tol: f64,
    out: *mut CfBatchSummary,
) -> CfStatus {
    guard(|| {
        let slot = out_param(out, "out")?;
        let report = batch_verify(&BatchConfig {
            dims: vec![(d1, d2)],
            kraus_counts: vec![n_kraus],
            n_trials,
            base_seed: seed,
            tol,
        })?;
        let s = &report.summary;
        *slot = CfBatchSummary {
            n_trials: s.n_trials,
            passed: s.passed,
            failed: s.failed,
            errored: s.errored,
            worst_frame_deviation: s.worst_frame_deviation,
            worst_no_signalling: s.worst_no_signalling,
            total_secs: report.timing.total_secs,
        };
        Ok(())
    })
}

/// Free a string returned by this library. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn cf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
