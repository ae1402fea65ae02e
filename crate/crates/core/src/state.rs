//! Permutation-symmetric N-photon states and single-photon detection.
//!
//! `amp[n]` is the coefficient of `|n, M−n⟩`, the normalized symmetric
//! superposition of all M-photon strings with `n` photons in mode 1. Splitting
//! one photon off gives
//!
//! ```text
//! |n, M−n⟩ = √(n/M) |1⟩⊗|n−1, M−n⟩ + √((M−n)/M) |0⟩⊗|n, M−n−1⟩
//! ```
//!
//! and the split photon is rotated by `exp(iθσ_y) = [[cos θ, sin θ], [−sin θ, cos θ]]`
//! on `(|0⟩, |1⟩)` before being projected onto an output port.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::wrap;
use crate::wigner::wigner_d_doubled;
use crate::MAX_PHOTONS;

/// Output port of the interferometer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Port {
    Zero = 0,
    One = 1,
}

impl Port {
    pub const BOTH: [Port; 2] = [Port::Zero, Port::One];

    #[inline]
    pub fn bit(self) -> u8 {
        self as u8
    }

    /// `(−1)^x`.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Port::Zero => 1.0,
            Port::One => -1.0,
        }
    }
}

impl TryFrom<u8> for Port {
    type Error = Error;
    fn try_from(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Port::Zero),
            1 => Ok(Port::One),
            _ => Err(Error::Domain(format!("port must be 0 or 1, got {b}"))),
        }
    }
}

impl From<bool> for Port {
    fn from(b: bool) -> Self {
        if b {
            Port::One
        } else {
            Port::Zero
        }
    }
}

/// Rotation angle applied to a photon when the interferometer phase is `phi`
/// and the controller's feedback phase is `feedback`.
///
/// A Mach–Zehnder interferometer rotates each photon by half the phase
/// difference; a full-angle rotation would make `phi` and `phi + π`
/// indistinguishable. Values differing by `π` give the same outcome
/// statistics, so reducing the difference mod 2π first is harmless.
#[inline]
pub fn rotation_angle(phi: f64, feedback: f64) -> f64 {
    0.5 * wrap(phi - feedback)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetricState {
    amp: Vec<Complex64>,
}

impl SymmetricState {
    /// State from raw amplitudes; renormalizes.
    pub fn from_amplitudes(amp: Vec<Complex64>) -> Result<Self> {
        if amp.is_empty() {
            return Err(Error::Domain("amplitude vector must have length ≥ 1".into()));
        }
        let norm = amp.iter().map(|a| a.norm_sqr()).sum::<f64>();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Domain("amplitude vector has zero or non-finite norm".into()));
        }
        let s = norm.sqrt().recip();
        Ok(SymmetricState { amp: amp.into_iter().map(|a| a * s).collect() })
    }

    /// The N-photon sine state in the symmetric basis.
    pub fn sine(n: usize) -> Result<Self> {
        let amp = sine_amplitudes(n)?;
        SymmetricState::from_amplitudes(amp)
    }

    /// Unentangled product state with every photon in `|0⟩`, i.e. `|0, N⟩`.
    pub fn product(n: usize) -> Result<Self> {
        check_photons(n)?;
        let mut amp = vec![Complex64::new(0.0, 0.0); n + 1];
        amp[0] = Complex64::new(1.0, 0.0);
        Ok(SymmetricState { amp })
    }

    /// Number of undetected photons M.
    #[inline]
    pub fn remaining(&self) -> usize {
        self.amp.len() - 1
    }

    #[inline]
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amp
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Unnormalized amplitudes of the remaining `M−1` photons after the next
    /// photon is rotated by `theta` and found in `port`.
    pub fn branch(&self, theta: f64, port: Port) -> Result<Vec<Complex64>> {
        let m = self.remaining();
        if m == 0 {
            return Err(Error::Domain("no photons left to detect".into()));
        }
        let (c, s) = (theta.cos(), theta.sin());
        let inv_m = 1.0 / m as f64;
        Ok((0..m)
            .map(|k| branch_element(&self.amp, k, inv_m, m, c, s, port))
            .collect())
    }

    /// Probability that the next photon, rotated by `theta`, exits `port`.
    pub fn detection_probability(&self, theta: f64, port: Port) -> Result<f64> {
        let m = self.remaining();
        if m == 0 {
            return Err(Error::Domain("no photons left to detect".into()));
        }
        let (c, s) = (theta.cos(), theta.sin());
        let inv_m = 1.0 / m as f64;
        let p: f64 = (0..m)
            .map(|k| branch_element(&self.amp, k, inv_m, m, c, s, port).norm_sqr())
            .sum();
        Ok(p / self.norm_sqr())
    }

    /// Post-measurement state conditioned on `port`.
    pub fn collapse(&self, theta: f64, port: Port) -> Result<SymmetricState> {
        let mut next = self.clone();
        next.measure(theta, port)?;
        Ok(next)
    }

    /// In-place detection: collapses onto `port` and returns the probability
    /// of that outcome.
    pub fn measure(&mut self, theta: f64, port: Port) -> Result<f64> {
        let m = self.remaining();
        if m == 0 {
            return Err(Error::Domain("no photons left to detect".into()));
        }
        let before = self.norm_sqr();
        let (c, s) = (theta.cos(), theta.sin());
        let inv_m = 1.0 / m as f64;
        // Ascending k only reads amp[k] and amp[k+1], so the overwrite is safe.
        for k in 0..m {
            self.amp[k] = branch_element(&self.amp, k, inv_m, m, c, s, port);
        }
        self.amp.truncate(m);
        let after = self.norm_sqr();
        let p = after / before;
        if !(p > 0.0) {
            return Err(Error::ZeroProbability);
        }
        let scale = after.sqrt().recip();
        self.amp.iter_mut().for_each(|a| *a *= scale);
        Ok(p)
    }
}

#[inline]
fn branch_element(
    amp: &[Complex64],
    k: usize,
    inv_m: f64,
    m: usize,
    c: f64,
    s: f64,
    port: Port,
) -> Complex64 {
    // Photon in |0⟩ leaves |k, M−1−k⟩ from |k, M−k⟩; photon in |1⟩ leaves it from |k+1, M−k−1⟩.
    let zero = amp[k] * ((m - k) as f64 * inv_m).sqrt();
    let one = amp[k + 1] * ((k + 1) as f64 * inv_m).sqrt();
    match port {
        Port::Zero => zero * c + one * s,
        Port::One => one * c - zero * s,
    }
}

fn check_photons(n: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    if n > MAX_PHOTONS {
        return Err(Error::Precision(n));
    }
    Ok(())
}

/// Sine-state amplitudes straight from the defining sum (not renormalized):
///
/// `amp[n] = (N/2+1)^{−1/2} Σ_k sin((k+1)π/(N+2)) e^{iπ(k−n)/2} d^{N/2}_{n−N/2, k−N/2}(π/2)`.
pub fn sine_amplitudes(n: usize) -> Result<Vec<Complex64>> {
    check_photons(n)?;
    let two_j = n as i64;
    let pref = (n as f64 / 2.0 + 1.0).sqrt().recip();
    let weights: Vec<f64> = (0..=n)
        .map(|k| ((k + 1) as f64 * PI / (n + 2) as f64).sin())
        .collect();
    (0..=n)
        .map(|row| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, w) in weights.iter().enumerate() {
                let d = wigner_d_doubled(two_j, 2 * row as i64 - two_j, 2 * k as i64 - two_j, FRAC_PI_2)?;
                let phase = Complex64::from_polar(1.0, FRAC_PI_2 * (k as f64 - row as f64));
                acc += phase * (w * d);
            }
            Ok(acc * pref)
        })
        .collect()
}
