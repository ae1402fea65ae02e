//! Bayesian feedback under the noiseless likelihood.
//!
//! For every value of the unknown phase the conditional state of the
//! undetected photons is a symmetric vector whose entries are trigonometric
//! polynomials in `φ/2`. Row `n` stores the coefficients of `|n, M−n⟩` on the
//! basis `e^{ikφ/2}`, `k = 2j − m`, `j = 0..=m`, after `m` detections. The
//! unnormalized posterior density (w.r.t. `dφ/2π`) is
//! `Σ_n |Σ_j c[n,j] e^{i(2j−m)φ/2}|²`; its mean over a period is the
//! probability of the outcome string observed so far.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::optim::golden_max;
use crate::phase::{wrap, PhaseAngle};
use crate::state::{Port, SymmetricState};

const GRID_POINTS: usize = 1024;
const REFINE_TOL: f64 = 1e-10;
const FLAT_TOLERANCE: f64 = 1e-14;

struct Grid {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

fn grid() -> &'static Grid {
    static TABLE: OnceLock<Grid> = OnceLock::new();
    TABLE.get_or_init(|| {
        let angle = |i: usize| PI * i as f64 / GRID_POINTS as f64;
        Grid {
            cos: (0..GRID_POINTS).map(|i| angle(i).cos()).collect(),
            sin: (0..GRID_POINTS).map(|i| angle(i).sin()).collect(),
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BayesState {
    n_total: usize,
    detected: usize,
    /// Row-major, `(N − m + 1) × (m + 1)`.
    coeff: Vec<Complex64>,
    /// Coefficients are kept at unit norm; this is the log of the removed scale.
    ln_scale: f64,
}

/// Coefficients of the expected-sharpness function
/// `M(Φ) = (|A + z(Φ)| + |A − z(Φ)|) / 4`, `z(Φ) = e^{−iΦ}B + e^{iΦ}C`.
#[derive(Clone, Copy, Debug)]
pub struct SharpnessPolynomial {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
}

impl SharpnessPolynomial {
    #[inline]
    fn eval_phasor(&self, w: Complex64) -> f64 {
        let z = w.conj() * self.b + w * self.c;
        0.25 * ((self.a + z).norm_sqr().sqrt() + (self.a - z).norm_sqr().sqrt())
    }

    pub fn eval(&self, feedback: f64) -> f64 {
        self.eval_phasor(Complex64::from_polar(1.0, feedback))
    }
}

impl BayesState {
    /// Uniform prior over the phase with the given probe state.
    pub fn new(prior: &SymmetricState) -> Result<Self> {
        if prior.remaining() == 0 {
            return Err(Error::Domain("probe state has no photons".into()));
        }
        let mut coeff = prior.amplitudes().to_vec();
        let norm = coeff.iter().map(|c| c.norm_sqr()).sum::<f64>();
        let s = norm.sqrt().recip();
        coeff.iter_mut().for_each(|c| *c *= s);
        Ok(BayesState { n_total: prior.remaining(), detected: 0, coeff, ln_scale: 0.0 })
    }

    /// Arbitrary coefficient matrix, rows `n = 0..=N−m`, columns `j = 0..=m`.
    pub fn from_coefficients(n_total: usize, detected: usize, rows: Vec<Vec<Complex64>>) -> Result<Self> {
        if detected > n_total || rows.len() != n_total - detected + 1 || rows.iter().any(|r| r.len() != detected + 1) {
            return Err(Error::Domain(format!(
                "coefficient matrix must be {} × {}",
                n_total - detected.min(n_total) + 1,
                detected + 1
            )));
        }
        let coeff: Vec<Complex64> = rows.into_iter().flatten().collect();
        let norm = coeff.iter().map(|c| c.norm_sqr()).sum::<f64>();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroProbability);
        }
        let s = norm.sqrt().recip();
        Ok(BayesState {
            n_total,
            detected,
            coeff: coeff.into_iter().map(|c| c * s).collect(),
            ln_scale: norm.ln(),
        })
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn detected(&self) -> usize {
        self.detected
    }

    pub fn remaining(&self) -> usize {
        self.n_total - self.detected
    }

    fn cols(&self) -> usize {
        self.detected + 1
    }

    /// Number of stored complex coefficients.
    pub fn entry_count(&self) -> usize {
        self.coeff.len()
    }

    /// Shape `(rows, columns)` of the coefficient matrix.
    pub fn shape(&self) -> (usize, usize) {
        (self.remaining() + 1, self.cols())
    }

    /// Coefficient of `e^{ikφ/2}` in row `n`, scaled to the unnormalized
    /// filter. `None` outside the stored band.
    pub fn coefficient(&self, n: usize, k: i64) -> Option<Complex64> {
        let m = self.detected as i64;
        if n > self.remaining() || k < -m || k > m || (k + m) % 2 != 0 {
            return None;
        }
        let j = ((k + m) / 2) as usize;
        Some(self.coeff[n * self.cols() + j] * (0.5 * self.ln_scale).exp())
    }

    /// Mean of the unnormalized density over a period: the probability of the
    /// outcomes seen so far, averaged over a uniform phase.
    pub fn total_probability(&self) -> f64 {
        self.coeff.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.ln_scale.exp()
    }

    /// Natural log of [`BayesState::total_probability`].
    pub fn ln_total_probability(&self) -> f64 {
        self.coeff.iter().map(|c| c.norm_sqr()).sum::<f64>().ln() + self.ln_scale
    }

    /// Unnormalized posterior density at `phi`.
    pub fn density(&self, phi: f64) -> f64 {
        let cols = self.cols();
        let m = self.detected as f64;
        let basis: Vec<Complex64> = (0..cols)
            .map(|j| Complex64::from_polar(1.0, (2.0 * j as f64 - m) * phi / 2.0))
            .collect();
        let d: f64 = self
            .coeff
            .chunks_exact(cols)
            .map(|row| row.iter().zip(&basis).map(|(c, e)| c * e).sum::<Complex64>().norm_sqr())
            .sum();
        d * self.ln_scale.exp()
    }

    /// `∫ e^{iφ} p(φ) dφ/2π` of the unnormalized density.
    pub fn first_moment(&self) -> Complex64 {
        self.first_moment_unit() * self.ln_scale.exp()
    }

    fn first_moment_unit(&self) -> Complex64 {
        let cols = self.cols();
        self.coeff
            .chunks_exact(cols)
            .map(|row| row.windows(2).map(|w| w[0] * w[1].conj()).sum::<Complex64>())
            .sum()
    }

    /// Kraus split of row `n`: the next photon leaves `a = c[n]·√((M−n)/M)`
    /// if it is in `|0⟩` and `b = c[n+1]·√((n+1)/M)` if in `|1⟩`. Returns the
    /// "up" (`P = a − ib`) and "down" (`Q = a + ib`) Fourier components.
    #[inline]
    fn split_row<'a>(&'a self, n: usize) -> impl Iterator<Item = (Complex64, Complex64)> + 'a {
        let mrem = self.remaining();
        let cols = self.cols();
        let inv = 1.0 / mrem as f64;
        let wa = ((mrem - n) as f64 * inv).sqrt();
        let wb = ((n + 1) as f64 * inv).sqrt();
        let ra = &self.coeff[n * cols..(n + 1) * cols];
        let rb = &self.coeff[(n + 1) * cols..(n + 2) * cols];
        ra.iter().zip(rb).map(move |(x, y)| {
            let a = x * wa;
            let b = y * wb;
            (Complex64::new(a.re + b.im, a.im - b.re), Complex64::new(a.re - b.im, a.im + b.re))
        })
    }

    /// Condition on the next photon exiting `outcome` with feedback
    /// `feedback`.
    pub fn update(&self, feedback: PhaseAngle, outcome: Port) -> Result<BayesState> {
        if self.remaining() == 0 {
            return Err(Error::Domain("all photons already detected".into()));
        }
        let cols = self.cols();
        let new_cols = cols + 1;
        let rows = self.remaining();
        let u = Complex64::from_polar(0.5, -0.5 * feedback.value());
        let ubar = u.conj();
        let (su, sd) = match outcome {
            Port::Zero => (u, ubar),
            Port::One => (Complex64::i() * u, -Complex64::i() * ubar),
        };
        let mut coeff = vec![Complex64::new(0.0, 0.0); rows * new_cols];
        for n in 0..rows {
            let out = &mut coeff[n * new_cols..(n + 1) * new_cols];
            for (j, (p, q)) in self.split_row(n).enumerate() {
                out[j + 1] += su * p;
                out[j] += sd * q;
            }
        }
        let norm = coeff.iter().map(|c| c.norm_sqr()).sum::<f64>();
        if !(norm > 0.0) {
            return Err(Error::ZeroProbability);
        }
        let s = norm.sqrt().recip();
        coeff.iter_mut().for_each(|c| *c *= s);
        Ok(BayesState {
            n_total: self.n_total,
            detected: self.detected + 1,
            coeff,
            ln_scale: self.ln_scale + norm.ln(),
        })
    }

    /// Coefficients of the expected posterior sharpness after the next
    /// photon, as a function of its feedback phase (relative units).
    pub fn sharpness_polynomial(&self) -> Result<SharpnessPolynomial> {
        if self.remaining() == 0 {
            return Err(Error::Domain("all photons already detected".into()));
        }
        let zero = Complex64::new(0.0, 0.0);
        let (mut a, mut b, mut c) = (zero, zero, zero);
        for n in 0..self.remaining() {
            // P and Q at j−1 and j−2
            let (mut p1, mut q1, mut p2) = (zero, zero, zero);
            for (p, q) in self.split_row(n) {
                c += q * p.conj();
                a += p1 * p.conj() + q1 * q.conj();
                b += p2 * q.conj();
                p2 = p1;
                p1 = p;
                q1 = q;
            }
        }
        Ok(SharpnessPolynomial { a, b, c })
    }

    /// Feedback phase in `[0, π)` maximizing the expected posterior
    /// sharpness after the next photon. Plateaus resolve to 0.
    pub fn optimal_phase(&self) -> Result<PhaseAngle> {
        let poly = self.sharpness_polynomial()?;
        let SharpnessPolynomial { a, b, c } = poly;
        // z(Φ) = cos Φ · zc + sin Φ · zs
        let zc = b + c;
        let zs = Complex64::new(b.im - c.im, c.re - b.re);
        let g = grid();
        let (mut best_i, mut best, mut worst) = (0usize, f64::NEG_INFINITY, f64::INFINITY);
        for (i, (&co, &si)) in g.cos.iter().zip(&g.sin).enumerate() {
            let zr = co * zc.re + si * zs.re;
            let zi = co * zc.im + si * zs.im;
            let (pr, pi) = (a.re + zr, a.im + zi);
            let (mr, mi) = (a.re - zr, a.im - zi);
            let v = (pr * pr + pi * pi).sqrt() + (mr * mr + mi * mi).sqrt();
            if v > best {
                best = v;
                best_i = i;
            }
            worst = worst.min(v);
        }
        best *= 0.25;
        worst *= 0.25;
        if best - worst <= 1e-12 * best.abs() {
            return Ok(PhaseAngle::ZERO);
        }
        let step = PI / GRID_POINTS as f64;
        let x0 = best_i as f64 * step;
        let f = |x: f64| poly.eval(x);
        let x = golden_max(&f, x0 - step, x0 + step, REFINE_TOL);
        let x = if f(x) >= best { x } else { x0 };
        let x = wrap(x);
        Ok(PhaseAngle::new(if x >= PI { x - PI } else { x }))
    }

    /// Posterior mean direction.
    pub fn estimate(&self) -> Result<PhaseAngle> {
        let f1 = self.first_moment_unit();
        let total = self.coeff.iter().map(|c| c.norm_sqr()).sum::<f64>();
        if f1.norm() < FLAT_TOLERANCE * total {
            return Err(Error::FlatPosterior);
        }
        Ok(PhaseAngle::new(wrap(f1.arg())))
    }
}

/// Filter for the N-photon sine state with a uniform phase prior.
pub fn bayes_init(n: usize) -> Result<BayesState> {
    BayesState::new(&SymmetricState::sine(n)?)
}
