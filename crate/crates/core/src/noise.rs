//! Phase-noise models.
//!
//! Each photon entering the interferometer sees a phase drawn from a
//! unimodal distribution whose mode is the unknown phase `φ₀`. A model is
//! specified by its variance `V` and skewness `γ`; [`params_from_spec`] maps
//! those to the native parameters of the family with the mode placed at `φ₀`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{wrap, PhaseAngle};

/// Switching probability used for every random-telegraph run.
pub const RTN_SWITCH_PROBABILITY: f64 = 0.5;

/// Skewness used for the asymmetric models in the robustness grid.
pub const ASYMMETRIC_SKEWNESS: f64 = 0.8509;

/// Supremum of the skew-normal skewness (α → ∞).
pub const SKEW_NORMAL_MAX_SKEWNESS: f64 = 0.995_271_746_431_156;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    None,
    Normal,
    RandomTelegraph,
    SkewNormal,
    LogNormal,
}

impl NoiseModel {
    pub const ALL: [NoiseModel; 5] = [
        NoiseModel::None,
        NoiseModel::Normal,
        NoiseModel::RandomTelegraph,
        NoiseModel::SkewNormal,
        NoiseModel::LogNormal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseModel::None => "none",
            NoiseModel::Normal => "normal",
            NoiseModel::RandomTelegraph => "random_telegraph",
            NoiseModel::SkewNormal => "skew_normal",
            NoiseModel::LogNormal => "log_normal",
        }
    }

    pub fn is_symmetric(self) -> bool {
        matches!(self, NoiseModel::None | NoiseModel::Normal | NoiseModel::RandomTelegraph)
    }

    /// Default variance grid of the robustness test for this model.
    pub fn default_variances(self) -> &'static [f64] {
        match self {
            NoiseModel::None => &[0.0],
            NoiseModel::Normal | NoiseModel::RandomTelegraph => &[1.0, 2.0, 3.0],
            NoiseModel::SkewNormal | NoiseModel::LogNormal => &[1.0, 3.0, 5.0, 7.0],
        }
    }

    /// Default skewness of the robustness test for this model.
    pub fn default_skewness(self) -> f64 {
        if self.is_symmetric() {
            0.0
        } else {
            ASYMMETRIC_SKEWNESS
        }
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for NoiseModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        NoiseModel::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidNoise(format!("unknown noise model '{s}'")))
    }
}

/// Noise model plus the test knobs `(V, γ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub model: NoiseModel,
    pub variance: f64,
    pub skewness: f64,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec { model: NoiseModel::None, variance: 0.0, skewness: 0.0 };

    pub fn new(model: NoiseModel, variance: f64, skewness: f64) -> Self {
        NoiseSpec { model, variance, skewness }
    }

    /// `(model, V)` with the model's default skewness.
    pub fn with_default_skewness(model: NoiseModel, variance: f64) -> Self {
        NoiseSpec::new(model, variance, model.default_skewness())
    }

    pub fn validate(&self) -> Result<()> {
        let (v, g) = (self.variance, self.skewness);
        if !v.is_finite() || !g.is_finite() || v < 0.0 {
            return Err(Error::InvalidNoise(format!("variance {v} / skewness {g} not admissible")));
        }
        match self.model {
            NoiseModel::None => {
                if v != 0.0 || g != 0.0 {
                    return Err(Error::InvalidNoise("model 'none' requires V = 0 and γ = 0".into()));
                }
            }
            _ if v == 0.0 => {
                return Err(Error::InvalidNoise(format!("model '{}' requires V > 0", self.model)));
            }
            NoiseModel::Normal | NoiseModel::RandomTelegraph => {
                if g != 0.0 {
                    return Err(Error::InvalidNoise(format!("model '{}' is symmetric: γ must be 0", self.model)));
                }
            }
            NoiseModel::SkewNormal => {
                if g.abs() >= SKEW_NORMAL_MAX_SKEWNESS {
                    return Err(Error::InvalidNoise(format!(
                        "skew-normal skewness must satisfy |γ| < {SKEW_NORMAL_MAX_SKEWNESS}, got {g}"
                    )));
                }
            }
            NoiseModel::LogNormal => {
                if g == 0.0 {
                    return Err(Error::InvalidNoise("log-normal noise cannot have γ = 0".into()));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(V={}, γ={})", self.model, self.variance, self.skewness)
    }
}

/// Native parameters. Draws are generated as offsets from `φ₀`; every
/// variant places the mode of the offset distribution at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum NoiseParams {
    None,
    /// Mean `φ₀`, standard deviation `sigma`.
    Normal { sigma: f64 },
    /// Mass `1 − p_s` at `φ₀`, `p_s/2` at each of `φ₀ ± delta`.
    RandomTelegraph { p_switch: f64, delta: f64 },
    /// Location `φ₀ − mode_shift`, scale `sigma`, shape `alpha`.
    SkewNormal { sigma: f64, alpha: f64, mode_shift: f64 },
    /// `exp(N(mu, sigma²))`, shifted by `φ₀ − e^{mu − sigma²}`; mirrored when `reflect`.
    LogNormal { mu: f64, sigma: f64, reflect: bool },
}

/// Map a validated spec to native parameters.
pub fn params_from_spec(spec: &NoiseSpec) -> Result<NoiseParams> {
    spec.validate()?;
    let (v, g) = (spec.variance, spec.skewness);
    Ok(match spec.model {
        NoiseModel::None => NoiseParams::None,
        NoiseModel::Normal => NoiseParams::Normal { sigma: v.sqrt() },
        NoiseModel::RandomTelegraph => {
            let p_switch = RTN_SWITCH_PROBABILITY;
            if p_switch >= 2.0 / 3.0 {
                return Err(Error::InvalidNoise("random telegraph noise is multimodal for p_s ≥ 2/3".into()));
            }
            let delta = (v / p_switch).sqrt();
            if delta >= PI {
                return Err(Error::InvalidNoise(format!(
                    "random telegraph offset δ = {delta} must be below π (V = {v})"
                )));
            }
            NoiseParams::RandomTelegraph { p_switch, delta }
        }
        NoiseModel::SkewNormal => {
            let alpha = skew_normal_alpha(g)?;
            let beta = alpha * alpha / (1.0 + alpha * alpha);
            let sigma = (v / (1.0 - 2.0 * beta / PI)).sqrt();
            let mode_shift = sigma * skew_normal_standard_mode(alpha);
            NoiseParams::SkewNormal { sigma, alpha, mode_shift }
        }
        NoiseModel::LogNormal => {
            let sigma = log_normal_sigma(g.abs())?;
            let w = (sigma * sigma).exp();
            let mu = 0.5 * (v / ((w - 1.0) * w)).ln();
            NoiseParams::LogNormal { mu, sigma, reflect: g < 0.0 }
        }
    })
}

/// Skewness of the skew-normal family with shape `alpha`:
/// `γ = (4−π)/2 · (2β/(π−2β))^{3/2}`, `β = α²/(1+α²)`.
pub fn skew_normal_skewness(alpha: f64) -> f64 {
    let beta = alpha * alpha / (1.0 + alpha * alpha);
    let r = 2.0 * beta / (PI - 2.0 * beta);
    alpha.signum() * (4.0 - PI) / 2.0 * r.powf(1.5)
}

/// Inverse of [`skew_normal_skewness`].
pub fn skew_normal_alpha(gamma: f64) -> Result<f64> {
    if gamma.abs() >= SKEW_NORMAL_MAX_SKEWNESS {
        return Err(Error::InvalidNoise(format!("skew-normal cannot reach γ = {gamma}")));
    }
    let r = (2.0 * gamma.abs() / (4.0 - PI)).powf(2.0 / 3.0);
    let beta = PI * r / (2.0 * (1.0 + r));
    Ok(gamma.signum() * (beta / (1.0 - beta)).sqrt())
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Mode of the standard skew-normal density `2φ(z)Φ(αz)`: root of
/// `α φ(αz)/Φ(αz) = z`.
pub fn skew_normal_standard_mode(alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    let a = alpha.abs();
    let g = |z: f64| a * std_normal_pdf(a * z) / std_normal_cdf(a * z) - z;
    // g(0) > 0 and g(z) < 0 for z ≥ √(2/π).
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    alpha.signum() * 0.5 * (lo + hi)
}

/// Log-normal skewness `(e^{s²}+2)√(e^{s²}−1)`.
pub fn log_normal_skewness(sigma: f64) -> f64 {
    let w = (sigma * sigma).exp();
    (w + 2.0) * (w - 1.0).sqrt()
}

/// Shape `σ'` of the log-normal with skewness `gamma > 0`.
pub fn log_normal_sigma(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidNoise(format!("log-normal skewness must be positive, got {gamma}")));
    }
    // Skewness is increasing in w = e^{σ'²} > 1.
    let f = |w: f64| (w + 2.0) * (w - 1.0).sqrt() - gamma;
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).ln().sqrt())
}

impl NoiseParams {
    /// One offset from `φ₀` (unwrapped).
    pub fn sample_offset<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseParams::None => 0.0,
            NoiseParams::Normal { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            NoiseParams::RandomTelegraph { p_switch, delta } => {
                let u: f64 = rng.random();
                if u < 1.0 - p_switch {
                    0.0
                } else if u < 1.0 - p_switch / 2.0 {
                    delta
                } else {
                    -delta
                }
            }
            NoiseParams::SkewNormal { sigma, alpha, mode_shift } => {
                // δ|Z₀| + √(1−δ²)Z₁ is standard skew-normal with shape α.
                let d = alpha / (1.0 + alpha * alpha).sqrt();
                let z0: f64 = rng.sample(StandardNormal);
                let z1: f64 = rng.sample(StandardNormal);
                sigma * (d * z0.abs() + (1.0 - d * d).sqrt() * z1) - mode_shift
            }
            NoiseParams::LogNormal { mu, sigma, reflect } => {
                let z: f64 = rng.sample(StandardNormal);
                let x = (mu + sigma * z).exp() - (mu - sigma * sigma).exp();
                if reflect {
                    -x
                } else {
                    x
                }
            }
        }
    }

    /// One phase draw with mode `phi0`, reduced to `[0, 2π)`.
    pub fn sample_phase<R: Rng + ?Sized>(&self, phi0: PhaseAngle, rng: &mut R) -> PhaseAngle {
        match self {
            NoiseParams::None => phi0,
            _ => PhaseAngle::new(wrap(phi0.value() + self.sample_offset(rng))),
        }
    }

    /// Variance implied by the native parameters.
    pub fn variance(&self) -> f64 {
        match *self {
            NoiseParams::None => 0.0,
            NoiseParams::Normal { sigma } => sigma * sigma,
            NoiseParams::RandomTelegraph { p_switch, delta } => p_switch * delta * delta,
            NoiseParams::SkewNormal { sigma, alpha, .. } => {
                let beta = alpha * alpha / (1.0 + alpha * alpha);
                sigma * sigma * (1.0 - 2.0 * beta / PI)
            }
            NoiseParams::LogNormal { mu, sigma, .. } => {
                let w = (sigma * sigma).exp();
                (w - 1.0) * (2.0 * mu + sigma * sigma).exp()
            }
        }
    }

    /// Skewness implied by the native parameters.
    pub fn skewness(&self) -> f64 {
        match *self {
            NoiseParams::None | NoiseParams::Normal { .. } | NoiseParams::RandomTelegraph { .. } => 0.0,
            NoiseParams::SkewNormal { alpha, .. } => skew_normal_skewness(alpha),
            NoiseParams::LogNormal { sigma, reflect, .. } => {
                let g = log_normal_skewness(sigma);
                if reflect {
                    -g
                } else {
                    g
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub variance: f64,
    pub skewness: f64,
}

/// Sample variance and skewness of a slice.
pub fn moments_of(xs: &[f64]) -> Moments {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3) = (0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    Moments { variance: m2, skewness: if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 } }
}

/// Monte Carlo variance and skewness of unwrapped draws.
pub fn empirical_moments<R: Rng + ?Sized>(params: &NoiseParams, n_samples: usize, rng: &mut R) -> Result<Moments> {
    if n_samples < 10_000 {
        return Err(Error::Domain(format!("need at least 10^4 samples, got {n_samples}")));
    }
    let xs: Vec<f64> = (0..n_samples).map(|_| params.sample_offset(rng)).collect();
    Ok(moments_of(&xs))
}

/// Mode estimate of a sample.
///
/// Atoms holding at least 1% of the mass are returned exactly. Otherwise the
/// log-histogram in a window of ±0.8·`scale` around the coarse peak is fitted
/// with a weighted quartic and the window is re-centred on its maximum three
/// times. `scale` should be of the order of the standard deviation.
pub fn estimate_mode(samples: &[f64], scale: f64) -> f64 {
    assert!(!samples.is_empty() && scale > 0.0);
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));

    let (mut best, mut best_len, mut run) = (sorted[0], 1usize, 1usize);
    for w in sorted.windows(2) {
        run = if w[1] == w[0] { run + 1 } else { 1 };
        if run > best_len {
            best_len = run;
            best = w[1];
        }
    }
    if best_len * 100 >= samples.len() {
        return best;
    }

    let q = |p: f64| sorted[((sorted.len() - 1) as f64 * p) as usize];
    let (lo, hi) = (q(0.005), q(0.995));
    let width = scale / 10.0;
    let bins = ((hi - lo) / width).ceil().max(1.0) as usize;
    let mut counts = vec![0usize; bins];
    for &x in &sorted {
        if x >= lo && x < hi {
            counts[(((x - lo) / width) as usize).min(bins - 1)] += 1;
        }
    }
    let peak = counts.iter().enumerate().max_by_key(|(_, c)| **c).map(|(i, _)| i).unwrap_or(0);
    let mut centre = lo + (peak as f64 + 0.5) * width;

    let half = 0.8 * scale;
    const FIT_BINS: usize = 80;
    const DEGREE: usize = 4;
    for _ in 0..3 {
        let start = centre - half;
        let bw = 2.0 * half / FIT_BINS as f64;
        let mut c = vec![0usize; FIT_BINS];
        let from = sorted.partition_point(|&x| x < start);
        for &x in &sorted[from..] {
            let k = ((x - start) / bw) as usize;
            if k >= FIT_BINS {
                break;
            }
            c[k] += 1;
        }
        let mut design = nalgebra::DMatrix::<f64>::zeros(FIT_BINS, DEGREE + 1);
        let mut rhs = nalgebra::DVector::<f64>::zeros(FIT_BINS);
        for (k, &ck) in c.iter().enumerate() {
            let t = (start + (k as f64 + 0.5) * bw - centre) / half;
            let w = (ck.max(1) as f64).sqrt();
            for p in 0..=DEGREE {
                design[(k, p)] = w * t.powi(p as i32);
            }
            rhs[k] = w * (ck.max(1) as f64).ln();
        }
        let Ok(coef) = design.svd(true, true).solve(&rhs, 1e-12) else { break };
        let poly = |t: f64| (0..=DEGREE).rev().fold(0.0, |acc, p| acc * t + coef[p]);
        let (mut tb, mut vb) = (0.0, f64::NEG_INFINITY);
        for i in 0..=2000 {
            let t = -1.0 + i as f64 / 1000.0;
            let v = poly(t);
            if v > vb {
                vb = v;
                tb = t;
            }
        }
        let t = crate::optim::golden_max(&poly, (tb - 1e-3).max(-1.0), (tb + 1e-3).min(1.0), 1e-12);
        centre += t * half;
    }
    centre
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{domain, stream};

    #[test]
    fn normal_params() {
        let p = params_from_spec(&NoiseSpec::new(NoiseModel::Normal, 1.0, 0.0)).unwrap();
        assert_eq!(p, NoiseParams::Normal { sigma: 1.0 });
    }

    #[test]
    fn telegraph_params() {
        let p = params_from_spec(&NoiseSpec::new(NoiseModel::RandomTelegraph, 3.0, 0.0)).unwrap();
        match p {
            NoiseParams::RandomTelegraph { p_switch, delta } => {
                assert_eq!(p_switch, 0.5);
                assert!((delta - 6f64.sqrt()).abs() < 1e-15);
                assert!((delta - 2.4495).abs() < 1e-4);
            }
            other => panic!("{other:?}"),
        }
        // δ = √(V/p_s) must stay below π: V = 5 gives δ ≈ 3.16.
        assert!(params_from_spec(&NoiseSpec::new(NoiseModel::RandomTelegraph, 5.0, 0.0)).is_err());
    }

    #[test]
    fn asymmetric_grid_shapes() {
        // α = 5 and σ' = 0.2715 both correspond to γ = 0.8509.
        let alpha = skew_normal_alpha(ASYMMETRIC_SKEWNESS).unwrap();
        assert!((alpha - 5.0).abs() < 0.01, "alpha = {alpha}");
        assert!((skew_normal_skewness(5.0) - 0.8509).abs() < 1e-4);
        let s = log_normal_sigma(ASYMMETRIC_SKEWNESS).unwrap();
        assert!((s - 0.2715).abs() < 5e-5, "sigma' = {s}");
        for v in [1.0, 3.0, 5.0, 7.0] {
            match params_from_spec(&NoiseSpec::new(NoiseModel::SkewNormal, v, ASYMMETRIC_SKEWNESS)).unwrap() {
                NoiseParams::SkewNormal { alpha, .. } => assert!((alpha - 5.0).abs() < 0.01),
                other => panic!("{other:?}"),
            }
            match params_from_spec(&NoiseSpec::new(NoiseModel::LogNormal, v, ASYMMETRIC_SKEWNESS)).unwrap() {
                NoiseParams::LogNormal { sigma, .. } => assert!((sigma - 0.2715).abs() < 5e-5),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn analytic_round_trip() {
        let specs = [
            NoiseSpec::new(NoiseModel::Normal, 2.0, 0.0),
            NoiseSpec::new(NoiseModel::RandomTelegraph, 1.0, 0.0),
            NoiseSpec::new(NoiseModel::SkewNormal, 5.0, 0.8509),
            NoiseSpec::new(NoiseModel::SkewNormal, 2.0, -0.3),
            NoiseSpec::new(NoiseModel::LogNormal, 7.0, 0.8509),
            NoiseSpec::new(NoiseModel::LogNormal, 1.5, -2.0),
        ];
        for s in specs {
            let p = params_from_spec(&s).unwrap();
            assert!((p.variance() - s.variance).abs() < 1e-6, "{s}: V {}", p.variance());
            assert!((p.skewness() - s.skewness).abs() < 1e-6, "{s}: γ {}", p.skewness());
        }
    }

    #[test]
    fn invariant_violations() {
        assert!(NoiseSpec::new(NoiseModel::Normal, 1.0, 0.2).validate().is_err());
        assert!(NoiseSpec::new(NoiseModel::RandomTelegraph, 1.0, 0.1).validate().is_err());
        assert!(NoiseSpec::new(NoiseModel::None, 1.0, 0.0).validate().is_err());
        assert!(NoiseSpec::new(NoiseModel::Normal, 0.0, 0.0).validate().is_err());
        assert!(NoiseSpec::new(NoiseModel::SkewNormal, 1.0, 0.999).validate().is_err());
        assert!(NoiseSpec::new(NoiseModel::LogNormal, 1.0, 0.0).validate().is_err());
        assert!(NoiseSpec::NONE.validate().is_ok());
    }

    #[test]
    fn skew_normal_mode_is_stationary() {
        for alpha in [0.5, 2.0, 5.0, -3.0] {
            let z = skew_normal_standard_mode(alpha);
            let a = alpha;
            let dlog = -z + a * std_normal_pdf(a * z) / std_normal_cdf(a * z);
            assert!(dlog.abs() < 1e-12, "alpha {alpha}: {dlog}");
        }
    }

    #[test]
    fn no_noise_returns_mode_exactly() {
        let mut rng = stream(1, domain::NOISE_TEST, 0);
        let phi0 = PhaseAngle::new(1.234);
        assert_eq!(NoiseParams::None.sample_phase(phi0, &mut rng), phi0);
    }

    #[test]
    fn telegraph_support_and_frequency() {
        let p = params_from_spec(&NoiseSpec::new(NoiseModel::RandomTelegraph, 3.0, 0.0)).unwrap();
        let mut rng = stream(2, domain::NOISE_TEST, 0);
        let phi0 = PhaseAngle::new(0.3);
        let d = 6f64.sqrt();
        let support = [phi0.value(), wrap(0.3 + d), wrap(0.3 - d)];
        let mut at_mode = 0usize;
        let n = 100_000;
        for _ in 0..n {
            let x = p.sample_phase(phi0, &mut rng).value();
            assert!(support.iter().any(|s| (s - x).abs() < 1e-12), "{x}");
            if x == phi0.value() {
                at_mode += 1;
            }
        }
        assert!((at_mode as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn normal_empirical_variance() {
        let p = NoiseParams::Normal { sigma: 1.0 };
        let mut rng = stream(3, domain::NOISE_TEST, 0);
        let m = empirical_moments(&p, 1_000_000, &mut rng).unwrap();
        assert!((0.99..=1.01).contains(&m.variance), "{m:?}");
        assert!(m.skewness.abs() < 0.05);
        assert!(empirical_moments(&p, 10, &mut rng).is_err());
    }

    #[test]
    fn mode_of_atom_is_exact() {
        let xs: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 0.25 } else { i as f64 }).collect();
        assert_eq!(estimate_mode(&xs, 1.0), 0.25);
    }
}
