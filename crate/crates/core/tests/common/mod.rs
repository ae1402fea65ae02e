#![allow(dead_code)]

use aqem::regress::{Family, LogSeries};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// `ln N` for `N = 4..=100`.
pub fn log_ns() -> Vec<f64> {
    (4..=100).map(|n| (n as f64).ln()).collect()
}

/// Construction parameters of a synthetic curve.
pub struct Synthetic {
    pub family: Family,
    /// Knot indices; for the interpolation families the first entry is the
    /// end of the erratic prefix.
    pub knots: Vec<usize>,
    pub slopes: Vec<f64>,
}

impl Synthetic {
    pub fn canonical(family: Family) -> Self {
        let (knots, slopes) = match family {
            Family::L1 => (vec![], vec![-1.2]),
            Family::L2 => (vec![40], vec![-1.5, -1.0]),
            Family::L3 => (vec![12, 36], vec![-0.6, -1.6, -1.0]),
            Family::InterpLinear => (vec![15], vec![-1.2]),
            Family::InterpTwoLinear => (vec![15, 50], vec![-1.6, -1.0]),
        };
        Synthetic { family, knots, slopes }
    }

    fn linear_knots(&self) -> &[usize] {
        match self.family {
            Family::InterpLinear | Family::InterpTwoLinear => &self.knots[1..],
            _ => &self.knots,
        }
    }

    fn prefix(&self) -> usize {
        match self.family {
            Family::InterpLinear | Family::InterpTwoLinear => self.knots[0],
            _ => 0,
        }
    }

    /// Noise-free continuous piecewise line at `x`.
    pub fn line(&self, x: &[f64], xi: f64) -> f64 {
        let mut y = 0.5 + self.slopes[0] * xi;
        for (j, &k) in self.linear_knots().iter().enumerate() {
            y += (self.slopes[j + 1] - self.slopes[j]) * (xi - x[k]).max(0.0);
        }
        y
    }

    /// Curve with Gaussian log-noise `sigma`. In the interpolation families
    /// every prefix point sits off the line by a random sign times a
    /// magnitude drawn from `[0.15, 0.45]`.
    pub fn sample<R: Rng>(&self, sigma: f64, rng: &mut R) -> LogSeries {
        let x = log_ns();
        let pts: Vec<(f64, f64)> = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                let mut y = self.line(&x, xi);
                if i < self.prefix() {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    y += sign * rng.random_range(0.15..0.45);
                }
                if sigma > 0.0 {
                    y += Normal::new(0.0, sigma).unwrap().sample(rng);
                }
                (xi, y)
            })
            .collect();
        LogSeries::new(&pts).unwrap()
    }
}

use aqem::engine::Controller;
use aqem::phase::PhaseAngle;
use aqem::policies::{markov_next_phase, BayesState};
use aqem::state::{rotation_angle, Port};
use num_complex::Complex64;

/// Noise-free sharpness of a controller computed without sampling: every
/// outcome string is enumerated and the phase average is taken on a
/// uniform grid, which is exact for the trigonometric polynomials involved.
pub fn exact_sharpness(ctrl: &Controller, n: usize) -> f64 {
    let init = ctrl.probe().state(n).unwrap();
    let grid = 512;
    let mut acc = Complex64::new(0.0, 0.0);
    'strings: for bits in 0u32..(1 << n) {
        let xs: Vec<Port> = (0..n).map(|q| Port::from(bits >> q & 1 == 1)).collect();
        let mut fb = vec![PhaseAngle::ZERO];
        let mut post = BayesState::new(&init).unwrap();
        for m in 1..=n {
            let cur = fb[m - 1];
            let next = match ctrl {
                Controller::Markov(p) => markov_next_phase(p, cur, m, xs[m - 1]).unwrap(),
                Controller::Bayes(_) => {
                    post = match post.update(cur, xs[m - 1]) {
                        Ok(p) => p,
                        Err(_) => continue 'strings,
                    };
                    let step = if m < n { post.optimal_phase() } else { post.estimate() };
                    match step {
                        Ok(p) => p,
                        Err(_) => continue 'strings,
                    }
                }
            };
            fb.push(next);
        }
        for g in 0..grid {
            let phi = std::f64::consts::TAU * g as f64 / grid as f64;
            let mut s = init.clone();
            let mut p = 1.0;
            for m in 0..n {
                match s.measure(rotation_angle(phi, fb[m].value()), xs[m]) {
                    Ok(q) => p *= q,
                    Err(_) => {
                        p = 0.0;
                        break;
                    }
                }
            }
            acc += Complex64::from_polar(p, phi - fb[n].value());
        }
    }
    acc.norm() / grid as f64
}

pub fn holevo(sharpness: f64) -> f64 {
    sharpness.powi(-2) - 1.0
}
