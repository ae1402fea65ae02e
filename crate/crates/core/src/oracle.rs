//! Dense `2^N` reference simulation.
//!
//! Builds the full tensor-product state and applies each photon's rotation
//! and projection on its own qubit. Exists to cross-check the symmetric
//! subspace code path; exponential in N and capped at 8 photons.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::{Port, SymmetricState};

pub const MAX_DENSE_PHOTONS: usize = 8;

/// Expand a symmetric state into the `2^N` computational basis; bit `q` of
/// the index is the mode of photon `q`.
pub fn dense_from_symmetric(state: &SymmetricState) -> Result<Vec<Complex64>> {
    let n = state.remaining();
    if n > MAX_DENSE_PHOTONS {
        return Err(Error::Resource(format!("dense oracle limited to N ≤ {MAX_DENSE_PHOTONS}, got {n}")));
    }
    let binom = |k: usize| -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    };
    let amp = state.amplitudes();
    Ok((0..1usize << n)
        .map(|idx| {
            let w = idx.count_ones() as usize;
            amp[w] / binom(w).sqrt()
        })
        .collect())
}

/// Apply `exp(iθσ_y)` to qubit `q` and keep the `port` component.
/// Returns the unnormalized projected vector (same length; other half zero).
pub fn rotate_and_project(psi: &[Complex64], q: usize, theta: f64, port: Port) -> Vec<Complex64> {
    let (c, s) = (theta.cos(), theta.sin());
    let bit = 1usize << q;
    let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
    for idx in 0..psi.len() {
        if idx & bit != 0 {
            continue;
        }
        let a0 = psi[idx];
        let a1 = psi[idx | bit];
        match port {
            Port::Zero => out[idx] = a0 * c + a1 * s,
            Port::One => out[idx | bit] = a1 * c - a0 * s,
        }
    }
    out
}

/// Joint probability of an outcome string for a given initial symmetric
/// state and per-photon rotation angles.
pub fn dense_joint_probability_from(state: &SymmetricState, thetas: &[f64], outcomes: &[Port]) -> Result<f64> {
    let n = state.remaining();
    if thetas.len() != outcomes.len() || outcomes.len() > n {
        return Err(Error::Domain(format!(
            "{} angles and {} outcomes for {n} photons",
            thetas.len(),
            outcomes.len()
        )));
    }
    let mut psi = dense_from_symmetric(state)?;
    for (q, (&theta, &port)) in thetas.iter().zip(outcomes).enumerate() {
        psi = rotate_and_project(&psi, q, theta, port);
    }
    Ok(psi.iter().map(|a| a.norm_sqr()).sum())
}

/// Joint probability of `outcomes` for the N-photon sine state.
pub fn dense_oracle(n: usize, thetas: &[f64], outcomes: &[Port]) -> Result<f64> {
    if n > MAX_DENSE_PHOTONS {
        return Err(Error::Resource(format!("dense oracle limited to N ≤ {MAX_DENSE_PHOTONS}, got {n}")));
    }
    dense_joint_probability_from(&SymmetricState::sine(n)?, thetas, outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_photon_agrees_with_subspace() {
        let s = SymmetricState::sine(1).unwrap();
        for port in Port::BOTH {
            let d = dense_oracle(1, &[0.0], &[port]).unwrap();
            let p = s.detection_probability(0.0, port).unwrap();
            assert!((d - p).abs() < 1e-15);
        }
    }

    #[test]
    fn total_probability_is_one() {
        let n = 4;
        let mut total = 0.0;
        for bits in 0..1u32 << n {
            let outcomes: Vec<Port> = (0..n).map(|q| Port::from(bits >> q & 1 == 1)).collect();
            total += dense_oracle(n, &[0.0; 4], &outcomes).unwrap();
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_photons() {
        assert!(matches!(dense_oracle(9, &[], &[]), Err(Error::Resource(_))));
    }
}
