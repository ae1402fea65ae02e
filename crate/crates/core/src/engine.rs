//! Single-shot simulation and Monte Carlo estimation of sharpness and Holevo
//! variance.
//!
//! Trial `k` of a campaign draws everything it needs from its own
//! counter-based stream, and per-trial results are reduced in trial order,
//! so a campaign's numbers do not depend on the number of worker threads.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{params_from_spec, NoiseParams, NoiseSpec};
use crate::phase::{circular_diff, PhaseAngle};
use crate::policies::{markov_next_phase, BayesState, MarkovPolicy};
use crate::rng::{domain, stream, SimRng};
use crate::state::{rotation_angle, Port, SymmetricState};

/// Minimum trial count for a campaign.
pub const MIN_TRIALS: usize = 100;

/// Maximum abort fraction before a record is flagged invalid.
pub const MAX_ABORT_FRACTION: f64 = 1e-3;

const MAX_ATTEMPTS: u64 = 1 << 12;

pub const RESULTS_HEADER: &str =
    "n,policy,model,variance,skewness,trials,sharpness,holevo,seed,aborts,wall_ms,config_hash";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Probe {
    Sine,
    Product,
}

impl Probe {
    pub fn state(self, n: usize) -> Result<SymmetricState> {
        match self {
            Probe::Sine => SymmetricState::sine(n),
            Probe::Product => SymmetricState::product(n),
        }
    }
}

/// Feedback controller for one photon number.
#[derive(Clone, Debug)]
pub enum Controller {
    Markov(Arc<MarkovPolicy>),
    Bayes(Probe),
}

impl Controller {
    pub fn probe(&self) -> Probe {
        match self {
            Controller::Markov(_) => Probe::Sine,
            Controller::Bayes(p) => *p,
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Controller::Markov(_) => "rl",
            Controller::Bayes(Probe::Sine) => "bayes",
            Controller::Bayes(Probe::Product) => "sql",
        }
    }
}

/// Controllers for a range of photon numbers.
#[derive(Clone, Debug)]
pub enum ControllerFamily {
    Markov(BTreeMap<usize, Arc<MarkovPolicy>>),
    Bayes(Probe),
}

impl ControllerFamily {
    pub fn markov<I: IntoIterator<Item = MarkovPolicy>>(policies: I) -> Self {
        ControllerFamily::Markov(policies.into_iter().map(|p| (p.n, Arc::new(p))).collect())
    }

    pub fn id(&self) -> &'static str {
        match self {
            ControllerFamily::Markov(_) => "rl",
            ControllerFamily::Bayes(p) => Controller::Bayes(*p).id(),
        }
    }

    pub fn controller(&self, n: usize) -> Result<Controller> {
        match self {
            ControllerFamily::Markov(map) => map
                .get(&n)
                .map(|p| Controller::Markov(p.clone()))
                .ok_or(Error::MissingPolicies(vec![n])),
            ControllerFamily::Bayes(p) => Ok(Controller::Bayes(*p)),
        }
    }

    /// Photon numbers in `ns` with no controller.
    pub fn missing(&self, ns: &[usize]) -> Vec<usize> {
        match self {
            ControllerFamily::Markov(map) => ns.iter().copied().filter(|n| !map.contains_key(n)).collect(),
            ControllerFamily::Bayes(_) => Vec::new(),
        }
    }
}

/// Result of one adaptive estimation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Shot {
    pub estimate: PhaseAngle,
    /// Bit `m − 1` holds the outcome of photon `m`.
    pub outcomes: u128,
}

/// Controller, probe state and noise for one photon number, prepared once
/// and reused across shots.
#[derive(Clone, Debug)]
pub struct Simulator {
    n: usize,
    initial: SymmetricState,
    controller: Controller,
    params: NoiseParams,
}

impl Simulator {
    pub fn new(controller: Controller, n: usize, params: NoiseParams) -> Result<Self> {
        if let Controller::Markov(p) = &controller {
            if p.n != n {
                return Err(Error::Domain(format!("policy for N = {} used with N = {n}", p.n)));
            }
        }
        Ok(Simulator { n, initial: controller.probe().state(n)?, controller, params })
    }

    /// Same photon number, probe and noise with a different controller.
    pub fn rebind(&self, controller: Controller) -> Result<Self> {
        if controller.probe() != self.controller.probe() {
            return Simulator::new(controller, self.n, self.params);
        }
        if let Controller::Markov(p) = &controller {
            if p.n != self.n {
                return Err(Error::Domain(format!("policy for N = {} used with N = {}", p.n, self.n)));
            }
        }
        Ok(Simulator { n: self.n, initial: self.initial.clone(), controller, params: self.params })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    /// Simulate all photons for phase mode `phi0` and return the final
    /// feedback phase.
    pub fn run(&self, phi0: PhaseAngle, rng: &mut SimRng) -> Result<Shot> {
        let mut state = self.initial.clone();
        let mut feedback = PhaseAngle::ZERO;
        let mut bayes = match self.controller {
            Controller::Bayes(_) => Some(BayesState::new(&self.initial)?),
            Controller::Markov(_) => None,
        };
        let mut outcomes = 0u128;
        for m in 1..=self.n {
            let phi = self.params.sample_phase(phi0, rng);
            let theta = rotation_angle(phi.value(), feedback.value());
            let p0 = state.detection_probability(theta, Port::Zero)?;
            let u: f64 = rng.random();
            let x = Port::from(u >= p0);
            state.measure(theta, x)?;
            if x == Port::One {
                outcomes |= 1u128 << (m - 1);
            }
            feedback = match (&self.controller, bayes.as_mut()) {
                (Controller::Markov(p), _) => markov_next_phase(p, feedback, m, x)?,
                (Controller::Bayes(_), Some(b)) => {
                    *b = b.update(feedback, x)?;
                    if m < self.n {
                        b.optimal_phase()?
                    } else {
                        b.estimate()?
                    }
                }
                (Controller::Bayes(_), None) => unreachable!(),
            };
        }
        Ok(Shot { estimate: feedback, outcomes })
    }
}

/// One adaptive estimation; convenience wrapper over [`Simulator`].
pub fn run_single_shot(
    controller: &Controller,
    n: usize,
    params: &NoiseParams,
    phi0: PhaseAngle,
    rng: &mut SimRng,
) -> Result<PhaseAngle> {
    Ok(Simulator::new(controller.clone(), n, *params)?.run(phi0, rng)?.estimate)
}

/// How many trials a campaign point runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum TrialRule {
    /// `10 N²`.
    Quadratic,
    /// `max(10⁴, 10 N²)` capped at `10⁵`.
    Desk,
    Fixed(usize),
}

impl TrialRule {
    pub fn trials(self, n: usize) -> usize {
        match self {
            TrialRule::Quadratic => 10 * n * n,
            TrialRule::Desk => (10 * n * n).clamp(10_000, 100_000),
            TrialRule::Fixed(k) => k,
        }
    }

    pub fn is_override(self) -> bool {
        !matches!(self, TrialRule::Quadratic)
    }
}

/// Sharpness statistics of a set of estimation errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessStats {
    pub sharpness: f64,
    pub holevo: f64,
    /// Delta-method standard error of the Holevo variance.
    pub holevo_se: f64,
}

/// `S = |K⁻¹ Σ e^{iε_k}|`, `V_H = S⁻² − 1`, summed in slice order.
pub fn sharpness_from_errors(errors: &[f64]) -> SharpnessStats {
    let k = errors.len() as f64;
    let (mut c, mut s) = (0.0, 0.0);
    for &e in errors {
        c += e.cos();
        s += e.sin();
    }
    let (mc, ms) = (c / k, s / k);
    let sharp = (mc * mc + ms * ms).sqrt();
    // Spread of the phasors projected on the mean direction.
    let (ux, uy) = if sharp > 0.0 { (mc / sharp, ms / sharp) } else { (1.0, 0.0) };
    let mut var = 0.0;
    for &e in errors {
        let d = e.cos() * ux + e.sin() * uy - sharp;
        var += d * d;
    }
    var /= (k - 1.0).max(1.0);
    let se_s = (var / k).sqrt();
    SharpnessStats {
        sharpness: sharp,
        holevo: sharp.powi(-2) - 1.0,
        holevo_se: 2.0 * sharp.powi(-3) * se_s,
    }
}

/// Per-trial outcome of a campaign.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialOutcome {
    pub phi0: f64,
    pub estimate: f64,
    pub aborts: u32,
}

impl TrialOutcome {
    /// `φ₀ − φ̃` reduced to `(−π, π]`.
    pub fn error(&self) -> f64 {
        circular_diff(self.phi0, self.estimate)
    }
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Resource(format!("thread pool: {e}")))
}

/// Run `trials` independent estimations. Trial `k` draws `φ₀` uniformly and
/// then calls `shot`, both on stream `(seed, TRIAL, tag·2³² + k)`; trials
/// failing with a zero-probability or flat-posterior error are re-run on a
/// fresh stream and counted. `workers = 0` uses all cores.
pub fn run_trials<F>(trials: usize, seed: u64, tag: u64, workers: usize, shot: F) -> Result<Vec<TrialOutcome>>
where
    F: Fn(PhaseAngle, &mut SimRng) -> Result<PhaseAngle> + Sync,
{
    let one = |k: usize| -> Result<TrialOutcome> {
        for attempt in 0..MAX_ATTEMPTS {
            let index = (attempt << 48) | ((tag & 0xffff) << 32) | k as u64;
            let mut rng = stream(seed, domain::TRIAL, index);
            let phi0 = rng.random::<f64>() * TAU;
            match shot(PhaseAngle::new(phi0), &mut rng) {
                Ok(est) => return Ok(TrialOutcome { phi0, estimate: est.value(), aborts: attempt as u32 }),
                Err(Error::ZeroProbability | Error::FlatPosterior) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::Resource(format!("trial {k} aborted {MAX_ATTEMPTS} times")))
    };
    if workers == 1 {
        (0..trials).map(one).collect()
    } else {
        build_pool(workers)?.install(|| (0..trials).into_par_iter().map(one).collect())
    }
}

/// Monte Carlo record for one `(controller, N, noise)` point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: usize,
    pub policy: String,
    pub noise: NoiseSpec,
    pub trials: usize,
    pub trials_overridden: bool,
    pub sharpness: f64,
    pub holevo: f64,
    pub holevo_se: f64,
    pub seed: u64,
    pub aborts: u64,
    /// `false` if more than 0.1% of trials aborted.
    pub valid: bool,
    pub wall_ms: u64,
    /// Per-trial `φ₀ − φ̃` in trial order.
    #[serde(skip)]
    pub errors: Vec<f64>,
}

/// Campaign settings shared by every point of a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Campaign {
    pub trials: TrialRule,
    pub seed: u64,
    pub workers: usize,
}

impl Campaign {
    pub fn new(trials: TrialRule, seed: u64) -> Self {
        Campaign { trials, seed, workers: 0 }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

/// Estimate sharpness and Holevo variance of `controller` at `n` photons.
pub fn estimate_sharpness_variance(
    controller: &Controller,
    n: usize,
    noise: &NoiseSpec,
    campaign: &Campaign,
) -> Result<RunRecord> {
    let trials = campaign.trials.trials(n);
    if trials < MIN_TRIALS {
        return Err(Error::Domain(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    if n > u16::MAX as usize {
        return Err(Error::Precision(n));
    }
    let params = params_from_spec(noise)?;
    let sim = Simulator::new(controller.clone(), n, params)?;
    let start = Instant::now();
    let outcomes = run_trials(trials, campaign.seed, n as u64, campaign.workers, |phi0, rng| {
        Ok(sim.run(phi0, rng)?.estimate)
    })?;
    let wall_ms = start.elapsed().as_millis() as u64;
    let errors: Vec<f64> = outcomes.iter().map(TrialOutcome::error).collect();
    let aborts: u64 = outcomes.iter().map(|o| o.aborts as u64).sum();
    let stats = sharpness_from_errors(&errors);
    Ok(RunRecord {
        n,
        policy: controller.id().to_string(),
        noise: *noise,
        trials,
        trials_overridden: campaign.trials.is_override(),
        sharpness: stats.sharpness,
        holevo: stats.holevo,
        holevo_se: stats.holevo_se,
        seed: campaign.seed,
        aborts,
        valid: (aborts as f64) <= MAX_ABORT_FRACTION * trials as f64,
        wall_ms,
        errors,
    })
}

/// `(N, V_H)` points of one controller family under one noise setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceCurve {
    pub policy: String,
    pub noise: NoiseSpec,
    pub points: Vec<(usize, f64)>,
}

impl VarianceCurve {
    pub fn new(policy: String, noise: NoiseSpec, points: Vec<(usize, f64)>) -> Result<Self> {
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Domain("curve photon numbers must be strictly increasing".into()));
        }
        if let Some((n, v)) = points.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!("non-positive Holevo variance {v} at N = {n}")));
        }
        Ok(VarianceCurve { policy, noise, points })
    }

    /// `(ln N, ln V_H)` pairs.
    pub fn log_points(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|&(n, v)| ((n as f64).ln(), v.ln())).collect()
    }
}

/// Run a campaign for every photon number in `ns`.
pub fn sweep_curve(
    family: &ControllerFamily,
    ns: &[usize],
    noise: &NoiseSpec,
    campaign: &Campaign,
    mut progress: impl FnMut(&RunRecord),
) -> Result<(VarianceCurve, Vec<RunRecord>)> {
    if let Some(&n) = ns.iter().find(|&&n| !(1..=crate::MAX_PHOTONS).contains(&n)) {
        return Err(Error::Domain(format!("photon number {n} outside 1..={}", crate::MAX_PHOTONS)));
    }
    let missing = family.missing(ns);
    if !missing.is_empty() {
        return Err(Error::MissingPolicies(missing));
    }
    noise.validate()?;
    let mut records = Vec::with_capacity(ns.len());
    for &n in ns {
        let rec = estimate_sharpness_variance(&family.controller(n)?, n, noise, campaign)?;
        progress(&rec);
        records.push(rec);
    }
    let curve = VarianceCurve::new(
        family.id().to_string(),
        *noise,
        records.iter().map(|r| (r.n, r.holevo)).collect(),
    )?;
    Ok((curve, records))
}

/// One line of the results store.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub n: usize,
    pub policy: String,
    pub model: crate::noise::NoiseModel,
    pub variance: f64,
    pub skewness: f64,
    pub trials: usize,
    pub sharpness: f64,
    pub holevo: f64,
    pub seed: u64,
    pub aborts: u64,
    pub wall_ms: u64,
    /// Hash of the configuration that produced the row.
    pub config_hash: String,
}

impl ResultRow {
    /// Row for `record`; `wall_ms` is zeroed unless `timing` so that reruns
    /// produce identical files.
    pub fn from_record(r: &RunRecord, timing: bool, config_hash: &str) -> Self {
        ResultRow {
            n: r.n,
            policy: r.policy.clone(),
            model: r.noise.model,
            variance: r.noise.variance,
            skewness: r.noise.skewness,
            trials: r.trials,
            sharpness: r.sharpness,
            holevo: r.holevo,
            seed: r.seed,
            aborts: r.aborts,
            wall_ms: if timing { r.wall_ms } else { 0 },
            config_hash: config_hash.to_string(),
        }
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec::new(self.model, self.variance, self.skewness)
    }

    fn to_line(&self) -> String {
        format!(
            "{},{},{},{:?},{:?},{},{:?},{:?},{},{},{},{}",
            self.n,
            self.policy,
            self.model,
            self.variance,
            self.skewness,
            self.trials,
            self.sharpness,
            self.holevo,
            self.seed,
            self.aborts,
            self.wall_ms,
            self.config_hash
        )
    }
}

/// Append rows to a results CSV, writing the header if the file is new or
/// empty.
pub fn append_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut out = String::new();
    if f.metadata()?.len() == 0 {
        out.push_str(RESULTS_HEADER);
        out.push('\n');
    }
    for r in rows {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    f.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    if !path.exists() {
        return Err(Error::MissingInput(format!("results file {} not found", path.display())));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != RESULTS_HEADER {
        return Err(Error::Config(format!("{} does not have the results header", path.display())));
    }
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Group result rows into curves keyed by `(policy, noise)`; the last row
/// wins for repeated photon numbers.
pub fn curves_from_rows(rows: &[ResultRow]) -> Result<Vec<VarianceCurve>> {
    let mut groups: Vec<(String, NoiseSpec, BTreeMap<usize, f64>)> = Vec::new();
    for r in rows {
        let noise = r.noise();
        match groups.iter_mut().find(|(p, s, _)| *p == r.policy && *s == noise) {
            Some((_, _, pts)) => {
                pts.insert(r.n, r.holevo);
            }
            None => groups.push((r.policy.clone(), noise, BTreeMap::from([(r.n, r.holevo)]))),
        }
    }
    groups
        .into_iter()
        .map(|(p, s, pts)| VarianceCurve::new(p, s, pts.into_iter().collect()))
        .collect()
}

/// Mean wall-clock time per shot over `shots` noiseless shots.
pub fn mean_shot_seconds(controller: &Controller, n: usize, shots: usize, seed: u64) -> Result<f64> {
    let sim = Simulator::new(controller.clone(), n, NoiseParams::None)?;
    let start = Instant::now();
    for k in 0..shots {
        let mut rng = stream(seed, domain::TRIAL, k as u64);
        let phi0 = PhaseAngle::new(rng.random::<f64>() * TAU);
        match sim.run(phi0, &mut rng) {
            Ok(_) | Err(Error::ZeroProbability | Error::FlatPosterior) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(start.elapsed().as_secs_f64() / shots as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseModel;

    #[test]
    fn zero_adjustment_returns_initial_feedback() {
        let c = Controller::Markov(Arc::new(MarkovPolicy::untrained(vec![0.0]).unwrap()));
        for seed in 0..20 {
            let mut rng = stream(seed, domain::TRIAL, 0);
            let est = run_single_shot(&c, 1, &NoiseParams::None, PhaseAngle::new(1.0), &mut rng).unwrap();
            assert_eq!(est, PhaseAngle::ZERO);
        }
    }

    #[test]
    fn bayes_shot_is_deterministic() {
        let c = Controller::Bayes(Probe::Sine);
        let run = || {
            let mut rng = stream(5, domain::TRIAL, 9);
            run_single_shot(&c, 4, &NoiseParams::None, PhaseAngle::new(2.0), &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn perfect_and_biased_estimators() {
        let perfect = run_trials(1000, 1, 0, 1, |phi0, _| Ok(phi0)).unwrap();
        let s = sharpness_from_errors(&perfect.iter().map(TrialOutcome::error).collect::<Vec<_>>());
        assert!((s.sharpness - 1.0).abs() < 1e-12);
        assert!(s.holevo.abs() < 1e-10);
        let biased = run_trials(1000, 1, 0, 1, |phi0, _| Ok(phi0 + std::f64::consts::FRAC_PI_3)).unwrap();
        let s = sharpness_from_errors(&biased.iter().map(TrialOutcome::error).collect::<Vec<_>>());
        assert!((s.sharpness - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_estimates_have_small_sharpness() {
        let k = 10_000;
        let out = run_trials(k, 3, 0, 1, |_, rng| Ok(PhaseAngle::new(rng.random::<f64>() * TAU))).unwrap();
        let s = sharpness_from_errors(&out.iter().map(TrialOutcome::error).collect::<Vec<_>>());
        assert!(s.sharpness <= 3.0 / (k as f64).sqrt());
    }

    #[test]
    fn record_recomputes_from_errors() {
        let c = Controller::Bayes(Probe::Sine);
        let rec = estimate_sharpness_variance(&c, 4, &NoiseSpec::NONE, &Campaign::new(TrialRule::Fixed(400), 11)).unwrap();
        let again = sharpness_from_errors(&rec.errors);
        assert!((again.sharpness - rec.sharpness).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&rec.sharpness));
        assert!((rec.holevo - (rec.sharpness.powi(-2) - 1.0)).abs() < 1e-12);
        assert!(rec.trials_overridden);
        assert!(rec.valid);
    }

    #[test]
    fn too_few_trials() {
        let c = Controller::Bayes(Probe::Sine);
        let r = estimate_sharpness_variance(&c, 4, &NoiseSpec::NONE, &Campaign::new(TrialRule::Fixed(99), 1));
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn trial_rules() {
        assert_eq!(TrialRule::Quadratic.trials(7), 490);
        assert_eq!(TrialRule::Desk.trials(4), 10_000);
        assert_eq!(TrialRule::Desk.trials(50), 25_000);
        assert_eq!(TrialRule::Desk.trials(100), 100_000);
        assert_eq!(TrialRule::Fixed(123).trials(9), 123);
    }

    #[test]
    fn missing_policies_listed() {
        let fam = ControllerFamily::markov([MarkovPolicy::untrained(vec![0.1; 4]).unwrap()]);
        let r = sweep_curve(&fam, &[4, 5, 6], &NoiseSpec::NONE, &Campaign::new(TrialRule::Fixed(100), 1), |_| {});
        match r {
            Err(Error::MissingPolicies(v)) => assert_eq!(v, vec![5, 6]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_point_sweep() {
        let fam = ControllerFamily::Bayes(Probe::Sine);
        let (curve, recs) =
            sweep_curve(&fam, &[5], &NoiseSpec::NONE, &Campaign::new(TrialRule::Fixed(100), 2), |_| {}).unwrap();
        assert_eq!(curve.points.len(), 1);
        assert_eq!(recs.len(), 1);
    }

    #[test]
    fn results_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        let row = ResultRow {
            n: 4,
            policy: "bayes".into(),
            model: NoiseModel::SkewNormal,
            variance: 3.0,
            skewness: 0.8509,
            trials: 160,
            sharpness: 0.1 + 0.2,
            holevo: 1.0 / 3.0,
            seed: 7,
            aborts: 0,
            wall_ms: 0,
            config_hash: "abc123".into(),
        };
        append_results(&path, std::slice::from_ref(&row)).unwrap();
        append_results(&path, std::slice::from_ref(&row)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), RESULTS_HEADER);
        assert_eq!(text.lines().count(), 3);
        let back = read_results(&path).unwrap();
        assert_eq!(back, vec![row.clone(), row]);
    }

    #[test]
    fn noisy_shots_stay_in_range() {
        let c = Controller::Bayes(Probe::Sine);
        let spec = NoiseSpec::new(NoiseModel::RandomTelegraph, 2.0, 0.0);
        let rec = estimate_sharpness_variance(&c, 6, &spec, &Campaign::new(TrialRule::Fixed(200), 4)).unwrap();
        assert!((0.0..=1.0).contains(&rec.sharpness));
    }
}
