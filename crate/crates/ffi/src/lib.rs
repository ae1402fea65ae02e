//! C interface to the aqem simulator.
//!
//! Objects cross the boundary as opaque handles created by `*_new` or
//! `*_from_json` functions and released with the matching `*_free`. Every
//! fallible call returns an [`AqemStatus`]; on failure the message is kept
//! per thread and can be copied out with [`aqem_last_error`]. Panics never
//! unwind into C; they are reported as [`AqemStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use aqem::engine::{estimate_sharpness_variance, Campaign, Controller, Probe, TrialRule};
use aqem::noise::{NoiseModel, NoiseSpec};
use aqem::policies::{bayes_init, markov_next_phase, BayesState, MarkovPolicy};
use aqem::state::{Port, SymmetricState};
use aqem::{Error, PhaseAngle};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AqemStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Precision = 3,
    ZeroProbability = 4,
    FlatPosterior = 5,
    InvalidNoise = 6,
    Parse = 7,
    MissingPolicy = 8,
    Io = 9,
    Resource = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AqemProbe {
    /// Minimum-variance sine state.
    Sine = 0,
    /// All photons in the same single-photon state.
    Product = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AqemNoiseModel {
    None = 0,
    Normal = 1,
    RandomTelegraph = 2,
    SkewNormal = 3,
    LogNormal = 4,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AqemNoise {
    pub model: AqemNoiseModel,
    pub variance: f64,
    pub skewness: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AqemEstimate {
    pub sharpness: f64,
    pub holevo: f64,
    pub holevo_se: f64,
    pub trials: usize,
    pub aborts: u64,
}

/// Permutation-symmetric probe state.
pub struct AqemState(SymmetricState);

/// Bayesian filter state.
pub struct AqemBayes(BayesState);

/// Trained Markov feedback policy.
pub struct AqemPolicy(MarkovPolicy);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn status_of(e: &Error) -> AqemStatus {
    match e {
        Error::Domain(_) | Error::Index { .. } | Error::Config(_) | Error::InfeasibleFit { .. } => {
            AqemStatus::InvalidArgument
        }
        Error::Precision(_) => AqemStatus::Precision,
        Error::Resource(_) => AqemStatus::Resource,
        Error::ZeroProbability => AqemStatus::ZeroProbability,
        Error::FlatPosterior => AqemStatus::FlatPosterior,
        Error::InvalidNoise(_) => AqemStatus::InvalidNoise,
        Error::Json(_) | Error::Csv(_) => AqemStatus::Parse,
        Error::MissingPolicies(_) => AqemStatus::MissingPolicy,
        Error::MissingInput(_) | Error::Io(_) => AqemStatus::Io,
    }
}

fn fail(status: AqemStatus, msg: impl Into<String>) -> AqemStatus {
    LAST_ERROR.with(|s| *s.borrow_mut() = msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), AqemStatus>) -> AqemStatus {
    LAST_ERROR.with(|s| s.borrow_mut().clear());
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AqemStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(AqemStatus::Panic, "internal panic"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, AqemStatus>;
}

impl<T> OrStatus<T> for aqem::Result<T> {
    fn or_status(self) -> Result<T, AqemStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, AqemStatus> {
    unsafe { p.as_ref() }.ok_or_else(|| fail(AqemStatus::NullPointer, "null handle"))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), AqemStatus> {
    if out.is_null() {
        return Err(fail(AqemStatus::NullPointer, "null output pointer"));
    }
    unsafe { out.write(value) };
    Ok(())
}

fn port(outcome: u32) -> Result<Port, AqemStatus> {
    match outcome {
        0 => Ok(Port::Zero),
        1 => Ok(Port::One),
        x => Err(fail(AqemStatus::InvalidArgument, format!("outcome must be 0 or 1, got {x}"))),
    }
}

fn noise_spec(n: &AqemNoise) -> NoiseSpec {
    let model = match n.model {
        AqemNoiseModel::None => NoiseModel::None,
        AqemNoiseModel::Normal => NoiseModel::Normal,
        AqemNoiseModel::RandomTelegraph => NoiseModel::RandomTelegraph,
        AqemNoiseModel::SkewNormal => NoiseModel::SkewNormal,
        AqemNoiseModel::LogNormal => NoiseModel::LogNormal,
    };
    NoiseSpec::new(model, n.variance, n.skewness)
}

/// Copy the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the buffer size needed for the
/// whole message; 1 when there is no error.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn aqem_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|s| {
        let msg = s.borrow();
        if !buf.is_null() && len > 0 {
            let k = msg.len().min(len - 1);
            unsafe {
                ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, k);
                *buf.add(k) = 0;
            }
        }
        msg.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn aqem_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn aqem_state_new(probe: AqemProbe, n: usize, out: *mut *mut AqemState) -> AqemStatus {
    guard(|| {
        let s = match probe {
            AqemProbe::Sine => SymmetricState::sine(n),
            AqemProbe::Product => SymmetricState::product(n),
        }
        .or_status()?;
        unsafe { put(out, Box::into_raw(Box::new(AqemState(s)))) }
    })
}

/// # Safety
/// `state` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aqem_state_free(state: *mut AqemState) {
    if !state.is_null() {
        drop(unsafe { Box::from_raw(state) });
    }
}

/// Undetected photons left in the state; 0 for a null handle.
///
/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aqem_state_remaining(state: *const AqemState) -> usize {
    unsafe { state.as_ref() }.map_or(0, |s| s.0.remaining())
}

/// Probability that the next photon leaves through `outcome` (0 or 1) when
/// the single-photon rotation angle is `theta`.
///
/// # Safety
/// `state` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn aqem_state_detection_probability(
    state: *const AqemState,
    theta: f64,
    outcome: u32,
    out: *mut f64,
) -> AqemStatus {
    guard(|| {
        let s = unsafe { deref(state) }?;
        let p = s.0.detection_probability(theta, port(outcome)?).or_status()?;
        unsafe { put(out, p) }
    })
}

/// Normalized state after detecting one photon in `outcome`; a new handle.
///
/// # Safety
/// `state` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn aqem_state_collapse(
    state: *const AqemState,
    theta: f64,
    outcome: u32,
    out: *mut *mut AqemState,
) -> AqemStatus {
    guard(|| {
        let s = unsafe { deref(state) }?;
        let next = s.0.collapse(theta, port(outcome)?).or_status()?;
        unsafe { put(out, Box::into_raw(Box::new(AqemState(next)))) }
    })
}

/// Bayesian filter primed with the `n`-photon sine state.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn aqem_bayes_new(n: usize, out: *mut *mut AqemBayes) -> AqemStatus {
    guard(|| {
        let b = bayes_init(n).or_status()?;
        unsafe { put(out, Box::into_raw(Box::new(AqemBayes(b)))) }
    })
}

/// # Safety
/// `bayes` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aqem_bayes_free(bayes: *mut AqemBayes) {
    if !bayes.is_null() {
        drop(unsafe { Box::from_raw(bayes) });
    }
}

/// Condition the filter on one detection, in place. The handle is left
/// unchanged on failure.
///
/// # Safety
/// `bayes` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn aqem_bayes_update(bayes: *mut AqemBayes, feedback: f64, outcome: u32) -> AqemStatus {
    guard(|| {
        let b = unsafe { bayes.as_mut() }.ok_or_else(|| fail(AqemStatus::NullPointer, "null handle"))?;
        b.0 = b.0.update(PhaseAngle::new(feedback), port(outcome)?).or_status()?;
        Ok(())
    })
}

/// Feedback phase maximizing the expected sharpness after the next photon.
///
/// # Safety
/// `bayes` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn aqem_bayes_optimal_phase(bayes: *const AqemBayes, out: *mut f64) -> AqemStatus {
    guard(|| {
        let b = unsafe { deref(bayes) }?;
        let phi = b.0.optimal_phase().or_status()?;
        unsafe { put(out, phi.value()) }
    })
}

/// Mean direction of the current posterior.
///
/// # Safety
/// `bayes` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn aqem_bayes_estimate(bayes: *const AqemBayes, out: *mut f64) -> AqemStatus {
    guard(|| {
        let b = unsafe { deref(bayes) }?;
        let phi = b.0.estimate().or_status()?;
        unsafe { put(out, phi.value()) }
    })
}

/// Parse a policy file's JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn aqem_policy_from_json(json: *const c_char, out: *mut *mut AqemPolicy) -> AqemStatus {
    guard(|| {
        if json.is_null() {
            return Err(fail(AqemStatus::NullPointer, "null string"));
        }
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|e| fail(AqemStatus::Parse, e.to_string()))?;
        let p = MarkovPolicy::from_json(text).or_status()?;
        unsafe { put(out, Box::into_raw(Box::new(AqemPolicy(p)))) }
    })
}

/// # Safety
/// `policy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aqem_policy_free(policy: *mut AqemPolicy) {
    if !policy.is_null() {
        drop(unsafe { Box::from_raw(policy) });
    }
}

/// Photon number the policy was trained for; 0 for a null handle.
///
/// # Safety
/// `policy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aqem_policy_photons(policy: *const AqemPolicy) -> usize {
    unsafe { policy.as_ref() }.map_or(0, |p| p.0.n)
}

/// Feedback phase after the `m`-th detection (1-based).
///
/// # Safety
/// `policy` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn aqem_policy_next_phase(
    policy: *const AqemPolicy,
    current: f64,
    m: usize,
    outcome: u32,
    out: *mut f64,
) -> AqemStatus {
    guard(|| {
        let p = unsafe { deref(policy) }?;
        let next = markov_next_phase(&p.0, PhaseAngle::new(current), m, port(outcome)?).or_status()?;
        unsafe { put(out, next.value()) }
    })
}

/// Monte Carlo sharpness and Holevo variance at `n` photons. With a null
/// `policy` the Bayesian controller runs on `probe`; otherwise the policy
/// drives the sine state and `probe` is ignored. `workers = 0` uses every
/// core; results do not depend on it.
///
/// # Safety
/// `policy` must be null or a live handle; `noise` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn aqem_estimate(
    probe: AqemProbe,
    policy: *const AqemPolicy,
    n: usize,
    noise: *const AqemNoise,
    trials: usize,
    seed: u64,
    workers: usize,
    out: *mut AqemEstimate,
) -> AqemStatus {
    guard(|| {
        let spec = noise_spec(unsafe { deref(noise) }?);
        spec.validate().or_status()?;
        let controller = match unsafe { policy.as_ref() } {
            Some(p) => Controller::Markov(std::sync::Arc::new(p.0.clone())),
            None => Controller::Bayes(match probe {
                AqemProbe::Sine => Probe::Sine,
                AqemProbe::Product => Probe::Product,
            }),
        };
        let campaign = Campaign::new(TrialRule::Fixed(trials), seed).with_workers(workers);
        let r = estimate_sharpness_variance(&controller, n, &spec, &campaign).or_status()?;
        let est = AqemEstimate {
            sharpness: r.sharpness,
            holevo: r.holevo,
            holevo_se: r.holevo_se,
            trials: r.trials,
            aborts: r.aborts,
        };
        unsafe { put(out, est) }
    })
}
