//! Evolutionary training of Markov phase-adjustment policies.
//!
//! Differential evolution (rand/1/bin) over `Δ ∈ [0, 2π)^N` maximizing the
//! average sharpness of a handful of simulated shots. All vectors of one
//! generation, targets and trials alike, are scored on the same random
//! streams, so the noisy comparisons are paired. At the end the population
//! is re-scored on a separate validation run; the best member is kept only
//! if it does at least as well as the starting baseline.

use std::f64::consts::TAU;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{Controller, Simulator};
use crate::error::{Error, Result};
use crate::noise::{params_from_spec, NoiseSpec};
use crate::phase::{circular_diff, wrap, PhaseAngle};
use crate::policies::{MarkovPolicy, TrainingInfo};
use crate::rng::{domain, mix, stream, substream, SimRng};

/// Standard deviation of the jitter applied to warm-start seeds.
const WARM_JITTER: f64 = 0.15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n: usize,
    pub noise: NoiseSpec,
    pub population: usize,
    pub generations: usize,
    pub diff_weight: f64,
    pub crossover: f64,
    /// Shots per objective evaluation; `None` means `10 N`.
    pub samples_per_eval: Option<usize>,
    /// Shots for the validation gate; `None` means `100 N`.
    pub validation_samples: Option<usize>,
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n: 4,
            noise: NoiseSpec::NONE,
            population: 40,
            generations: 50,
            diff_weight: 0.7,
            crossover: 0.9,
            samples_per_eval: None,
            validation_samples: None,
            seed: 0,
            workers: 0,
        }
    }
}

impl TrainConfig {
    pub fn new(n: usize, noise: NoiseSpec, seed: u64) -> Self {
        TrainConfig { n, noise, seed, ..TrainConfig::default() }
    }

    pub fn samples(&self) -> usize {
        self.samples_per_eval.unwrap_or(10 * self.n)
    }

    pub fn validation(&self) -> usize {
        self.validation_samples.unwrap_or(100 * self.n)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n == 0 || self.n > crate::MAX_PHOTONS {
            return bad(format!("N = {} outside 1..={}", self.n, crate::MAX_PHOTONS));
        }
        if self.population < 4 {
            return bad(format!("population must be at least 4, got {}", self.population));
        }
        if self.samples() < 1 || self.validation() < 1 {
            return bad("sample counts must be positive".into());
        }
        for (name, v) in [("diff_weight", self.diff_weight), ("crossover", self.crossover)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        self.noise.validate()
    }
}

/// One row of the training log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub policy: MarkovPolicy,
    pub log: Vec<GenerationStats>,
}

/// Shared simulator state for scoring many adjustment vectors at one N.
struct Evaluator {
    template: Simulator,
    cfg: TrainConfig,
}

impl Evaluator {
    fn new(cfg: &TrainConfig) -> Result<Self> {
        let params = params_from_spec(&cfg.noise)?;
        let probe = MarkovPolicy::untrained(vec![0.0; cfg.n])?;
        let template = Simulator::new(Controller::Markov(Arc::new(probe)), cfg.n, params)?;
        Ok(Evaluator { template, cfg: cfg.clone() })
    }

    /// Average sharpness of `deltas` over `shots` shots; shot `k` runs on
    /// stream `(key, TRAIN, k)`.
    fn score(&self, deltas: &[f64], key: u64, shots: usize) -> Result<f64> {
        let policy = MarkovPolicy::new(deltas.to_vec(), self.cfg.noise, self.cfg.seed, 0.0)?;
        let sim = self.template.rebind(Controller::Markov(Arc::new(policy)))?;
        let (mut c, mut s) = (0.0, 0.0);
        for k in 0..shots {
            let mut rng = stream(key, domain::TRAIN, k as u64);
            let phi0 = rng.random::<f64>() * TAU;
            let est = sim.run(PhaseAngle::new(phi0), &mut rng)?.estimate.value();
            let e = phi0 - est;
            c += e.cos();
            s += e.sin();
        }
        Ok((c * c + s * s).sqrt() / shots as f64)
    }
}

/// Average sharpness `|K⁻¹ Σ e^{i(φ₀−φ̃)}|` of `deltas` over
/// `cfg.samples_per_eval` shots with uniform `φ₀`, using streams derived
/// from `rng`.
pub fn evaluate_candidate(deltas: &[f64], cfg: &TrainConfig, rng: &mut SimRng) -> Result<f64> {
    if deltas.len() != cfg.n {
        return Err(Error::Domain(format!("{} adjustments for N = {}", deltas.len(), cfg.n)));
    }
    let key: u64 = rng.random();
    Evaluator::new(cfg)?.score(deltas, key, cfg.samples())
}

/// Extend an `(N−1)`-vector to `N` entries by repeating its last entry.
pub fn extend_policy(deltas: &[f64]) -> Vec<f64> {
    let mut v = deltas.to_vec();
    v.push(*deltas.last().unwrap_or(&0.0));
    v
}

/// Resample an `(N−1)`-vector onto `N` evenly spaced positions by linear
/// interpolation.
pub fn interpolate_policy(deltas: &[f64]) -> Vec<f64> {
    let m = deltas.len();
    if m < 2 {
        return extend_policy(deltas);
    }
    let n = m + 1;
    (0..n)
        .map(|i| {
            let t = i as f64 * (m - 1) as f64 / (n - 1) as f64;
            let lo = (t.floor() as usize).min(m - 2);
            let f = t - lo as f64;
            wrap(deltas[lo] + f * circular_diff(deltas[lo + 1], deltas[lo]))
        })
        .collect()
}

fn initial_population(cfg: &TrainConfig, warm: Option<&MarkovPolicy>) -> Vec<Vec<f64>> {
    let mut rng = substream(cfg.seed, domain::INIT, &[cfg.n as u64]);
    match warm {
        None => (0..cfg.population)
            .map(|_| (0..cfg.n).map(|_| rng.random::<f64>() * TAU).collect())
            .collect(),
        Some(w) => {
            let seeds = [extend_policy(&w.deltas), interpolate_policy(&w.deltas)];
            let mut pop = seeds.to_vec();
            while pop.len() < cfg.population {
                let base = &seeds[pop.len() % 2];
                pop.push(
                    base.iter()
                        .map(|&d| wrap(d + WARM_JITTER * rng.sample::<f64, _>(StandardNormal)))
                        .collect(),
                );
            }
            pop.truncate(cfg.population);
            pop
        }
    }
}

/// Train a policy for `cfg.n` photons, optionally warm-started from an
/// `(N−1)`-photon policy.
pub fn train_policy(cfg: &TrainConfig, warm_start: Option<&MarkovPolicy>) -> Result<TrainOutcome> {
    cfg.validate()?;
    if let Some(w) = warm_start {
        if w.n + 1 != cfg.n {
            return Err(Error::Config(format!("warm start has N = {}, expected {}", w.n, cfg.n - 1)));
        }
    }
    let eval = Evaluator::new(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
    let samples = cfg.samples();
    let n = cfg.n as u64;
    let eval_key = |g: usize| mix(&[cfg.seed, n, g as u64]);

    let mut pop = initial_population(cfg, warm_start);
    let mut fitness: Vec<f64> = pool.install(|| {
        pop.par_iter().map(|x| eval.score(x, eval_key(0), samples)).collect::<Result<_>>()
    })?;
    let stats = |g: usize, f: &[f64]| GenerationStats {
        generation: g,
        best: f.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        mean: f.iter().sum::<f64>() / f.len() as f64,
    };
    let mut log = vec![stats(0, &fitness)];
    let argmax = |f: &[f64]| (0..f.len()).fold(0, |b, i| if f[i] > f[b] { i } else { b });
    let baseline = match warm_start {
        Some(w) => extend_policy(&w.deltas),
        None => pop[argmax(&fitness)].clone(),
    };

    let mut best_so_far = log[0].best;
    let mut last_improvement = 0;
    for g in 1..=cfg.generations {
        let mut rng = substream(cfg.seed, domain::TRAIN, &[n, g as u64]);
        let np = pop.len();
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let idx: Vec<usize> = loop {
                    let v = sample(&mut rng, np, 3).into_vec();
                    if !v.contains(&i) {
                        break v;
                    }
                };
                let (a, b, c) = (&pop[idx[0]], &pop[idx[1]], &pop[idx[2]]);
                let jrand = rng.random_range(0..cfg.n);
                (0..cfg.n)
                    .map(|j| {
                        if j == jrand || rng.random::<f64>() < cfg.crossover {
                            wrap(a[j] + cfg.diff_weight * (b[j] - c[j]))
                        } else {
                            pop[i][j]
                        }
                    })
                    .collect()
            })
            .collect();
        let scored: Vec<(f64, f64)> = pool.install(|| {
            (0..np)
                .into_par_iter()
                .map(|i| {
                    let key = eval_key(g);
                    Ok((eval.score(&pop[i], key, samples)?, eval.score(&trials[i], key, samples)?))
                })
                .collect::<Result<_>>()
        })?;
        for (i, (ft, fu)) in scored.into_iter().enumerate() {
            if fu >= ft {
                pop[i] = trials[i].clone();
                fitness[i] = fu;
            } else {
                fitness[i] = ft;
            }
        }
        let st = stats(g, &fitness);
        if st.best > best_so_far {
            best_so_far = st.best;
            last_improvement = g;
        }
        log.push(st);
    }

    let vkey = mix(&[cfg.seed, domain::VALIDATE, n]);
    let validation = cfg.validation();
    let v_base = eval.score(&baseline, vkey, validation)?;
    let (candidate, v_cand) = if cfg.generations == 0 && warm_start.is_some() {
        (baseline.clone(), v_base)
    } else {
        let scores: Vec<f64> = pool.install(|| {
            pop.par_iter().map(|x| eval.score(x, vkey, validation)).collect::<Result<_>>()
        })?;
        let i = argmax(&scores);
        (pop[i].clone(), scores[i])
    };
    let accepted = v_cand >= v_base;
    let (deltas, objective) = if accepted { (candidate, v_cand) } else { (baseline, v_base) };
    debug_assert!(objective >= v_base);

    let mut policy = MarkovPolicy::new(deltas, cfg.noise, cfg.seed, objective)?;
    policy.training = Some(TrainingInfo {
        population: cfg.population,
        generations: cfg.generations,
        samples_per_eval: samples,
        validation_samples: validation,
        warm_started: warm_start.is_some(),
        validation_candidate: v_cand,
        validation_baseline: v_base,
        accepted,
        last_improvement,
    });
    Ok(TrainOutcome { policy, log })
}

/// Write the training log as CSV, tagging every row with `config_hash`.
pub fn write_training_log(path: &Path, log: &[GenerationStats], config_hash: &str) -> Result<()> {
    let mut out = String::from("generation,best_sharpness,mean_sharpness,config_hash\n");
    for s in log {
        out.push_str(&format!("{},{:?},{:?},{config_hash}\n", s.generation, s.best, s.mean));
    }
    std::fs::File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}
