use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::phase::{wrap, PhaseAngle};
use crate::state::Port;

/// Markovian phase-adjustment policy: after photon `m` is detected in port
/// `x`, the feedback phase moves by `−(−1)^x Δ_m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovPolicy {
    pub n: usize,
    pub deltas: Vec<f64>,
    pub trained_on: NoiseSpec,
    pub seed: u64,
    /// Training objective (average sharpness) of the returned vector.
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingInfo>,
    /// Hash of the run configuration that produced the policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Training provenance recorded alongside a policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub population: usize,
    pub generations: usize,
    pub samples_per_eval: usize,
    pub validation_samples: usize,
    pub warm_started: bool,
    /// Validation sharpness of the search result and of the baseline.
    pub validation_candidate: f64,
    pub validation_baseline: f64,
    /// `true` if the search result passed the validation gate.
    pub accepted: bool,
    /// Generation at which the best objective last improved.
    pub last_improvement: usize,
}

impl MarkovPolicy {
    /// Policy with every `Δ` reduced to `[0, 2π)`.
    pub fn new(deltas: Vec<f64>, trained_on: NoiseSpec, seed: u64, objective: f64) -> Result<Self> {
        if deltas.is_empty() {
            return Err(Error::Domain("policy needs at least one adjustment".into()));
        }
        if let Some(bad) = deltas.iter().find(|d| !d.is_finite()) {
            return Err(Error::Domain(format!("non-finite adjustment {bad}")));
        }
        Ok(MarkovPolicy {
            n: deltas.len(),
            deltas: deltas.into_iter().map(wrap).collect(),
            trained_on,
            seed,
            objective,
            training: None,
            config_hash: None,
        })
    }

    /// Untrained policy with the given adjustments, used by tests and
    /// synthetic experiments.
    pub fn untrained(deltas: Vec<f64>) -> Result<Self> {
        MarkovPolicy::new(deltas, NoiseSpec::NONE, 0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.deltas.len() != self.n || self.n == 0 {
            return Err(Error::Domain(format!("policy for N = {} has {} adjustments", self.n, self.deltas.len())));
        }
        if let Some(d) = self.deltas.iter().find(|d| !(0.0..std::f64::consts::TAU).contains(*d)) {
            return Err(Error::Domain(format!("adjustment {d} outside [0, 2π)")));
        }
        self.trained_on.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: MarkovPolicy = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Feedback phase after the `m`-th detection (1-based).
pub fn markov_next_phase(policy: &MarkovPolicy, current: PhaseAngle, m: usize, outcome: Port) -> Result<PhaseAngle> {
    if m == 0 || m > policy.deltas.len() {
        return Err(Error::Index { index: m, len: policy.deltas.len() });
    }
    Ok(PhaseAngle::new(wrap(current.value() - outcome.sign() * policy.deltas[m - 1])))
}
