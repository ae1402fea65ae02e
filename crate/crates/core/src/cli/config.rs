//! Run configuration: JSON file, presets, command-line overrides and the
//! configuration hash embedded in every output.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::engine::TrialRule;
use crate::error::{Error, Result};
use crate::noise::{NoiseModel, NoiseSpec};
use crate::regress::FitOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Bayesian sweeps up to N = 50, trained policies up to N = 20, trial
    /// count `max(10⁴, 10N²)` capped at `10⁵`.
    Desk,
    /// Everything up to N = 100 with `10N²` trials.
    Paper,
}

impl Preset {
    fn overlay(self) -> Value {
        match self {
            Preset::Desk => serde_json::json!({
                "train": { "n_min": 4, "n_max": 20, "generations": 100, "samples_per_photon": 30 },
                "sweep": { "n_min": 4, "n_max": 50, "rl_n_min": 4, "rl_n_max": 20, "trial_rule": "desk" }
            }),
            Preset::Paper => serde_json::json!({
                "train": { "n_min": 4, "n_max": 100, "generations": 100 },
                "sweep": { "n_min": 4, "n_max": 100, "rl_n_min": 4, "rl_n_max": 100, "trial_rule": "quadratic" }
            }),
        }
    }
}

/// One noise setting in a config file; `skewness` defaults to the model's
/// protocol value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoisePoint {
    pub model: NoiseModel,
    #[serde(default)]
    pub variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skewness: Option<f64>,
}

impl NoisePoint {
    pub fn spec(&self) -> NoiseSpec {
        match self.skewness {
            Some(g) => NoiseSpec::new(self.model, self.variance, g),
            None => NoiseSpec::with_default_skewness(self.model, self.variance),
        }
    }
}

impl From<NoiseSpec> for NoisePoint {
    fn from(s: NoiseSpec) -> Self {
        NoisePoint { model: s.model, variance: s.variance, skewness: Some(s.skewness) }
    }
}

/// The noiseless point followed by every model at its protocol variances.
pub fn protocol_grid() -> Vec<NoiseSpec> {
    NoiseModel::ALL
        .into_iter()
        .flat_map(|m| m.default_variances().iter().map(move |&v| NoiseSpec::with_default_skewness(m, v)))
        .collect()
}

/// File-system friendly label of a noise setting.
pub fn noise_tag(spec: &NoiseSpec) -> String {
    match spec.model {
        NoiseModel::None => "none".into(),
        m if m.is_symmetric() => format!("{m}_v{}", spec.variance),
        m => format!("{m}_v{}_g{}", spec.variance, spec.skewness),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Bayesian feedback on the sine state.
    Bayes,
    /// Trained Markov policies.
    Rl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialRuleKind {
    Quadratic,
    Desk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub n_min: usize,
    pub n_max: usize,
    /// Noise settings to train under; one policy chain per entry.
    pub noise: Vec<NoisePoint>,
    pub population: usize,
    pub generations: usize,
    pub diff_weight: f64,
    pub crossover: f64,
    /// Shots per objective evaluation, per photon.
    pub samples_per_photon: usize,
    /// Shots of the final validation run, per photon.
    pub validation_per_photon: usize,
    pub warm_start: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            n_min: 4,
            n_max: 20,
            noise: vec![NoiseSpec::NONE.into()],
            population: 40,
            generations: 50,
            diff_weight: 0.7,
            crossover: 0.9,
            samples_per_photon: 10,
            validation_per_photon: 100,
            warm_start: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub n_min: usize,
    pub n_max: usize,
    pub controllers: Vec<ControllerKind>,
    /// Photon range of the trained-policy curves; defaults to the training
    /// range.
    pub rl_n_min: Option<usize>,
    pub rl_n_max: Option<usize>,
    /// Noise grid; the protocol grid when absent.
    pub noise: Option<Vec<NoisePoint>>,
    /// Train-time noise of the policies to sweep; when absent each grid
    /// point uses the policies trained under that same point.
    pub rl_trained_on: Option<NoisePoint>,
    pub trial_rule: TrialRuleKind,
    /// Fixed trial count overriding the rule.
    pub trials: Option<usize>,
    /// Also produce the product-state and Heisenberg reference curves.
    pub references: bool,
    /// Keep wall-clock times in the results file.
    pub timing: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            n_min: 4,
            n_max: 50,
            controllers: vec![ControllerKind::Bayes],
            rl_n_min: None,
            rl_n_max: None,
            noise: None,
            rl_trained_on: None,
            trial_rule: TrialRuleKind::Quadratic,
            trials: None,
            references: true,
            timing: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// A curve counts as robust when its `2℘` exceeds this value.
    pub pass_two_wp: f64,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection { pass_two_wp: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub seed: u64,
    /// Worker threads; 0 uses every core. Not part of the hash.
    pub workers: usize,
    /// Output directory, relative to the config file. Not part of the hash.
    pub output_dir: PathBuf,
    pub train: TrainSection,
    pub sweep: SweepSection,
    pub fit: FitOptions,
    pub report: ReportSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            preset: None,
            seed: 0,
            workers: 0,
            output_dir: PathBuf::from("aqem-out"),
            train: TrainSection::default(),
            sweep: SweepSection::default(),
            fit: FitOptions::default(),
            report: ReportSection::default(),
        }
    }
}

/// Command-line overrides applied after the file and preset.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub trials: Option<usize>,
}

fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    /// Parse a config from JSON text. Preset values fill in whatever the
    /// text leaves unset; `base_dir` anchors a relative output directory.
    pub fn from_json(text: &str, base_dir: &Path, ov: Overrides) -> Result<Self> {
        let file: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        if !file.is_object() {
            return Err(Error::Config("config must be a JSON object".into()));
        }
        let preset = match ov.preset {
            Some(p) => Some(p),
            None => match file.get("preset") {
                Some(v) if !v.is_null() => Some(
                    serde_json::from_value::<Preset>(v.clone())
                        .map_err(|e| Error::Config(format!("preset: {e}")))?,
                ),
                _ => None,
            },
        };
        let mut merged = preset.map_or_else(|| Value::Object(Map::new()), Preset::overlay);
        merge(&mut merged, file);
        let mut cfg: RunConfig = serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?;
        cfg.preset = preset;
        if let Some(s) = ov.seed {
            cfg.seed = s;
        }
        if let Some(w) = ov.workers {
            cfg.workers = w;
        }
        if let Some(k) = ov.trials {
            cfg.sweep.trials = Some(k);
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base_dir.join(&cfg.output_dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, ov: Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_json(&text, base, ov)
    }

    pub fn validate(&self) -> Result<()> {
        let range = |what: &str, lo: usize, hi: usize| {
            if lo == 0 || lo > hi || hi > crate::MAX_PHOTONS {
                Err(Error::Config(format!("{what} range {lo}..={hi} must lie in 1..={}", crate::MAX_PHOTONS)))
            } else {
                Ok(())
            }
        };
        range("train", self.train.n_min, self.train.n_max)?;
        range("sweep", self.sweep.n_min, self.sweep.n_max)?;
        let (lo, hi) = self.rl_range();
        range("rl sweep", lo, hi)?;
        for p in self.train.noise.iter().chain(self.sweep.noise.iter().flatten()).chain(&self.sweep.rl_trained_on) {
            p.spec().validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.train.noise.is_empty() {
            return Err(Error::Config("train.noise must list at least one setting".into()));
        }
        if self.train.samples_per_photon == 0 || self.train.validation_per_photon == 0 {
            return Err(Error::Config("training sample counts must be positive".into()));
        }
        if self.sweep.controllers.is_empty() && !self.sweep.references {
            return Err(Error::Config("sweep has nothing to run".into()));
        }
        if let Some(k) = self.sweep.trials {
            if k < crate::engine::MIN_TRIALS {
                return Err(Error::Config(format!("trials must be at least {}", crate::engine::MIN_TRIALS)));
            }
        }
        if !self.report.pass_two_wp.is_finite() {
            return Err(Error::Config("report.pass_two_wp must be finite".into()));
        }
        self.fit.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn rl_range(&self) -> (usize, usize) {
        (self.sweep.rl_n_min.unwrap_or(self.train.n_min), self.sweep.rl_n_max.unwrap_or(self.train.n_max))
    }

    pub fn sweep_grid(&self) -> Vec<NoiseSpec> {
        match &self.sweep.noise {
            Some(points) => points.iter().map(NoisePoint::spec).collect(),
            None => protocol_grid(),
        }
    }

    pub fn trial_rule(&self) -> TrialRule {
        match (self.sweep.trials, self.sweep.trial_rule) {
            (Some(k), _) => TrialRule::Fixed(k),
            (None, TrialRuleKind::Quadratic) => TrialRule::Quadratic,
            (None, TrialRuleKind::Desk) => TrialRule::Desk,
        }
    }

    /// First 16 hex digits of the SHA-256 of the effective configuration,
    /// leaving out the worker count and the output directory.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            m.remove("workers");
            m.remove("output_dir");
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn policy_dir(&self, spec: &NoiseSpec) -> PathBuf {
        self.output_dir.join("policies").join(noise_tag(spec))
    }

    pub fn results_path(&self) -> PathBuf {
        self.output_dir.join("results.csv")
    }

    pub fn hl_path(&self) -> PathBuf {
        self.output_dir.join("hl_reference.csv")
    }

    pub fn fits_dir(&self) -> PathBuf {
        self.output_dir.join("fits")
    }

    pub fn summary_json_path(&self) -> PathBuf {
        self.output_dir.join("summary.json")
    }

    pub fn summary_csv_path(&self) -> PathBuf {
        self.output_dir.join("summary.csv")
    }

    pub fn plot_dir(&self) -> PathBuf {
        self.output_dir.join("plot")
    }

    pub fn robustness_path(&self) -> PathBuf {
        self.output_dir.join("robustness.json")
    }
}

pub fn policy_file(dir: &Path, n: usize) -> PathBuf {
    dir.join(format!("policy_n{n:03}.json"))
}

pub fn training_log_file(dir: &Path, n: usize) -> PathBuf {
    dir.join(format!("train_log_n{n:03}.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, ov: Overrides) -> Result<RunConfig> {
        RunConfig::from_json(text, Path::new("/tmp/base"), ov)
    }

    #[test]
    fn defaults_and_relative_output() {
        let c = parse("{}", Overrides::default()).unwrap();
        assert_eq!(c.output_dir, Path::new("/tmp/base/aqem-out"));
        assert_eq!(c.train.population, 40);
        assert_eq!(c.trial_rule(), TrialRule::Quadratic);
    }

    #[test]
    fn protocol_grid_contents() {
        let g = protocol_grid();
        assert_eq!(g.len(), 1 + 3 + 3 + 4 + 4);
        assert_eq!(g[0], NoiseSpec::NONE);
        for s in &g {
            s.validate().unwrap();
            if !s.model.is_symmetric() {
                assert_eq!(s.skewness, 0.8509);
            }
        }
    }

    #[test]
    fn preset_fills_unset_fields_only() {
        let c = parse(r#"{"preset": "desk", "sweep": {"n_max": 30}}"#, Overrides::default()).unwrap();
        assert_eq!(c.sweep.n_max, 30);
        assert_eq!(c.rl_range(), (4, 20));
        assert_eq!(c.trial_rule(), TrialRule::Desk);
        assert_eq!(c.train.generations, 100);
        let ov = Overrides { preset: Some(Preset::Paper), trials: Some(500), seed: Some(9), workers: Some(2) };
        let c = parse(r#"{"preset": "desk"}"#, ov).unwrap();
        assert_eq!(c.sweep.n_max, 100);
        assert_eq!(c.trial_rule(), TrialRule::Fixed(500));
        assert_eq!((c.seed, c.workers), (9, 2));
    }

    #[test]
    fn bad_configs_are_config_errors() {
        for text in [
            "[1]",
            "{not json",
            r#"{"sweep": {"bogus": 1}}"#,
            r#"{"train": {"n_min": 0}}"#,
            r#"{"sweep": {"n_max": 101}}"#,
            r#"{"sweep": {"noise": [{"model": "normal", "variance": -1}]}}"#,
            r#"{"preset": "huge"}"#,
            r#"{"sweep": {"trials": 5}}"#,
        ] {
            let e = parse(text, Overrides::default()).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{text}: {e}");
        }
    }

    #[test]
    fn hash_ignores_workers_and_output() {
        let a = parse(r#"{"workers": 1, "output_dir": "a"}"#, Overrides::default()).unwrap();
        let b = parse(r#"{"workers": 8, "output_dir": "b"}"#, Overrides::default()).unwrap();
        let c = parse(r#"{"seed": 3}"#, Overrides::default()).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn noise_tags() {
        assert_eq!(noise_tag(&NoiseSpec::NONE), "none");
        assert_eq!(noise_tag(&NoiseSpec::with_default_skewness(NoiseModel::Normal, 2.0)), "normal_v2");
        assert_eq!(
            noise_tag(&NoiseSpec::with_default_skewness(NoiseModel::LogNormal, 5.0)),
            "log_normal_v5_g0.8509"
        );
    }
}
