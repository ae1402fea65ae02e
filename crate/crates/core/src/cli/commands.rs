//! The four pipeline stages. Each reads its inputs from the output
//! directory of the run configuration and writes back into it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{noise_tag, policy_file, training_log_file, ControllerKind, RunConfig};
use crate::engine::{
    append_results, curves_from_rows, read_results, sweep_curve, Campaign, ControllerFamily, Probe, ResultRow,
    RunRecord, VarianceCurve,
};
use crate::error::{Error, Result};
use crate::noise::{NoiseModel, NoiseSpec};
use crate::policies::MarkovPolicy;
use crate::regress::{analyze, fit_family, Family, FitReport, LogSeries, MIN_POINTS};
use crate::trainer::{train_policy, write_training_log, TrainConfig};

/// Policy id of the product-state reference curve.
pub const SQL_ID: &str = "sql";

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Train one policy chain per configured noise setting. Returns the
/// policy files written.
pub fn train(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let hash = cfg.hash();
    let t = &cfg.train;
    let mut written = Vec::new();
    for point in &t.noise {
        let spec = point.spec();
        let dir = cfg.policy_dir(&spec);
        fs::create_dir_all(&dir)?;
        let mut previous: Option<MarkovPolicy> = None;
        for n in t.n_min..=t.n_max {
            let tc = TrainConfig {
                n,
                noise: spec,
                population: t.population,
                generations: t.generations,
                diff_weight: t.diff_weight,
                crossover: t.crossover,
                samples_per_eval: Some(t.samples_per_photon * n),
                validation_samples: Some(t.validation_per_photon * n),
                seed: cfg.seed,
                workers: cfg.workers,
            };
            let warm = if t.warm_start { previous.as_ref() } else { None };
            let mut out = train_policy(&tc, warm)?;
            out.policy.config_hash = Some(hash.clone());
            let path = policy_file(&dir, n);
            fs::write(&path, out.policy.to_json()? + "\n")?;
            write_training_log(&training_log_file(&dir, n), &out.log, &hash)?;
            eprintln!("train {} N={n}: objective {:.5}", noise_tag(&spec), out.policy.objective);
            written.push(path);
            previous = Some(out.policy);
        }
    }
    Ok(written)
}

/// Load the policies for every `n` in `ns` from `dir`; photon numbers
/// without a policy file are reported together.
pub fn load_policies(dir: &Path, ns: &[usize]) -> Result<Vec<MarkovPolicy>> {
    let mut missing = Vec::new();
    let mut found = Vec::new();
    for &n in ns {
        let path = policy_file(dir, n);
        match fs::read_to_string(&path) {
            Ok(text) => {
                let p = MarkovPolicy::from_json(&text)?;
                if p.n != n {
                    return Err(Error::Domain(format!("{} holds a policy for N = {}", path.display(), p.n)));
                }
                found.push(p);
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => missing.push(n),
            Err(e) => return Err(e.into()),
        }
    }
    if missing.is_empty() {
        Ok(found)
    } else {
        Err(Error::MissingPolicies(missing))
    }
}

/// Heisenberg-limit reference: slope −2 through the single-line intercept
/// of the product-state curve.
pub fn heisenberg_reference(sql: &VarianceCurve) -> Result<Vec<(usize, f64)>> {
    let series = LogSeries::from_curve(sql)?;
    let line = fit_family(&series, Family::L1, &Default::default())?;
    let a = line.segments[0].intercept;
    Ok(sql.points.iter().map(|&(n, _)| (n, (a - 2.0 * (n as f64).ln()).exp())).collect())
}

/// What `sweep` produced.
#[derive(Clone, Debug, Default)]
pub struct SweepSummary {
    pub rows: usize,
    pub curves: Vec<VarianceCurve>,
}

/// Run every configured controller over the noise grid and append the rows
/// to the results file.
pub fn sweep(cfg: &RunConfig) -> Result<SweepSummary> {
    let hash = cfg.hash();
    let s = &cfg.sweep;
    let grid = cfg.sweep_grid();
    let bayes_ns: Vec<usize> = (s.n_min..=s.n_max).collect();
    let (rl_lo, rl_hi) = cfg.rl_range();
    let rl_ns: Vec<usize> = (rl_lo..=rl_hi).collect();

    // Resolve every input before any simulation starts.
    let mut jobs: Vec<(ControllerFamily, Vec<usize>, NoiseSpec)> = Vec::new();
    for kind in &s.controllers {
        for spec in &grid {
            match kind {
                ControllerKind::Bayes => jobs.push((ControllerFamily::Bayes(Probe::Sine), bayes_ns.clone(), *spec)),
                ControllerKind::Rl => {
                    let trained_on = s.rl_trained_on.map_or(*spec, |p| p.spec());
                    let policies = load_policies(&cfg.policy_dir(&trained_on), &rl_ns)?;
                    jobs.push((ControllerFamily::markov(policies), rl_ns.clone(), *spec));
                }
            }
        }
    }
    if s.references {
        jobs.push((ControllerFamily::Bayes(Probe::Product), bayes_ns.clone(), NoiseSpec::NONE));
    }

    fs::create_dir_all(&cfg.output_dir)?;
    let results = cfg.results_path();
    let campaign = Campaign::new(cfg.trial_rule(), cfg.seed).with_workers(cfg.workers);
    let mut summary = SweepSummary::default();
    for (family, ns, spec) in &jobs {
        let progress = |r: &RunRecord| {
            eprintln!("sweep {} {} N={}: V_H {:.5} ({} trials)", r.policy, noise_tag(&r.noise), r.n, r.holevo, r.trials);
            if !r.valid {
                eprintln!("warning: {} of {} trials aborted", r.aborts, r.trials);
            }
        };
        let (curve, records) = sweep_curve(family, ns, spec, &campaign, progress)?;
        let rows: Vec<ResultRow> = records.iter().map(|r| ResultRow::from_record(r, s.timing, &hash)).collect();
        append_results(&results, &rows)?;
        summary.rows += rows.len();
        summary.curves.push(curve);
    }

    if let Some(sql) = summary.curves.iter().find(|c| c.policy == SQL_ID) {
        let mut text = String::from("n,holevo,config_hash\n");
        for (n, v) in heisenberg_reference(sql)? {
            text.push_str(&format!("{n},{v:?},{hash}\n"));
        }
        fs::write(cfg.hl_path(), text)?;
    }
    Ok(summary)
}

/// Fit report of one curve, as stored under `fits/`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    pub config_hash: String,
    pub seed: u64,
    pub policy: String,
    pub noise: NoiseSpec,
    pub points: Vec<(usize, f64)>,
    pub report: FitReport,
}

impl CurveFit {
    pub fn stem(&self) -> String {
        format!("{}__{}", self.policy, noise_tag(&self.noise))
    }

    pub fn adj_r2(&self) -> Option<f64> {
        self.report.fits.iter().find(|f| f.chosen).and_then(|f| f.criteria.adj_r2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedCurve {
    pub policy: String,
    pub noise: NoiseSpec,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub config_hash: String,
    pub seed: u64,
    pub curves: Vec<CurveFit>,
    pub skipped: Vec<SkippedCurve>,
}

pub const SUMMARY_HEADER: &str = "policy,model,variance,skewness,points,family,two_wp,adj_r2,config_hash";

/// Fit every curve of the results file.
pub fn fit(cfg: &RunConfig) -> Result<FitSummary> {
    let hash = cfg.hash();
    let rows = read_results(&cfg.results_path())?;
    let curves = curves_from_rows(&rows)?;
    let mut summary = FitSummary { config_hash: hash.clone(), seed: cfg.seed, curves: Vec::new(), skipped: Vec::new() };
    for curve in curves {
        let outcome = if curve.points.len() < MIN_POINTS {
            Err(Error::Domain(format!("{} points, need at least {MIN_POINTS}", curve.points.len())))
        } else {
            LogSeries::from_curve(&curve).and_then(|s| analyze(&s, &cfg.fit))
        };
        match outcome {
            Ok(report) => summary.curves.push(CurveFit {
                config_hash: hash.clone(),
                seed: cfg.seed,
                policy: curve.policy,
                noise: curve.noise,
                points: curve.points,
                report,
            }),
            Err(e) => {
                eprintln!("warning: skipping {} {}: {e}", curve.policy, curve.noise);
                summary.skipped.push(SkippedCurve { policy: curve.policy, noise: curve.noise, reason: e.to_string() });
            }
        }
    }
    if summary.curves.is_empty() {
        return Err(Error::Domain("no curve has enough points to fit".into()));
    }

    fs::create_dir_all(cfg.fits_dir())?;
    let mut csv = String::from(SUMMARY_HEADER);
    csv.push('\n');
    for c in &summary.curves {
        write_json(&cfg.fits_dir().join(format!("{}.json", c.stem())), c)?;
        csv.push_str(&format!(
            "{},{},{:?},{:?},{},{},{:?},{},{}\n",
            c.policy,
            c.noise.model,
            c.noise.variance,
            c.noise.skewness,
            c.report.points,
            c.report.chosen,
            c.report.two_wp,
            c.adj_r2().map_or(String::new(), |r| format!("{r:?}")),
            hash
        ));
    }
    fs::write(cfg.summary_csv_path(), csv)?;
    write_json(&cfg.summary_json_path(), &summary)?;
    Ok(summary)
}

/// Largest variance `V` such that every tested `V' ≤ V` has `2℘` above
/// `pass`; `None` if the smallest tested variance already fails.
pub fn robustness_threshold(points: &[(f64, f64)], pass: f64) -> Option<f64> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    sorted.iter().take_while(|(_, e)| *e > pass).last().map(|&(v, _)| v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustPoint {
    pub variance: f64,
    pub two_wp: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelVerdict {
    pub model: NoiseModel,
    pub skewness: f64,
    pub points: Vec<RobustPoint>,
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyVerdict {
    pub policy: String,
    pub models: Vec<ModelVerdict>,
    /// Smallest per-model threshold; `None` if any model fails at its
    /// smallest variance.
    pub joint_threshold: Option<f64>,
    /// Variances tested under every model at which every model passes.
    pub jointly_robust: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Robustness {
    pub config_hash: String,
    pub seed: u64,
    pub pass_two_wp: f64,
    pub policies: Vec<PolicyVerdict>,
}

/// Robustness verdicts for every non-reference policy in `summary`.
pub fn robustness(summary: &FitSummary, pass: f64) -> Vec<PolicyVerdict> {
    let mut policies: Vec<&str> = Vec::new();
    for c in &summary.curves {
        if c.policy != SQL_ID && !policies.contains(&c.policy.as_str()) {
            policies.push(&c.policy);
        }
    }
    policies
        .into_iter()
        .map(|policy| {
            let mut models: Vec<ModelVerdict> = Vec::new();
            for c in summary.curves.iter().filter(|c| c.policy == policy && c.noise.model != NoiseModel::None) {
                let point = RobustPoint {
                    variance: c.noise.variance,
                    two_wp: c.report.two_wp,
                    pass: c.report.two_wp > pass,
                };
                match models.iter_mut().find(|m| m.model == c.noise.model && m.skewness == c.noise.skewness) {
                    Some(m) => m.points.push(point),
                    None => models.push(ModelVerdict {
                        model: c.noise.model,
                        skewness: c.noise.skewness,
                        points: vec![point],
                        threshold: None,
                    }),
                }
            }
            for m in &mut models {
                m.points.sort_by(|a, b| a.variance.total_cmp(&b.variance));
                let pts: Vec<(f64, f64)> = m.points.iter().map(|p| (p.variance, p.two_wp)).collect();
                m.threshold = robustness_threshold(&pts, pass);
            }
            let joint_threshold = if models.is_empty() {
                None
            } else {
                models.iter().map(|m| m.threshold).try_fold(f64::INFINITY, |acc, t| t.map(|t| acc.min(t)))
            };
            let mut tested: Vec<f64> = models.iter().flat_map(|m| m.points.iter().map(|p| p.variance)).collect();
            tested.sort_by(f64::total_cmp);
            tested.dedup();
            let jointly_robust = tested
                .into_iter()
                .filter(|&v| {
                    !models.is_empty()
                        && models.iter().all(|m| m.points.iter().any(|p| p.variance == v && p.pass))
                })
                .collect();
            PolicyVerdict { policy: policy.to_string(), models, joint_threshold, jointly_robust }
        })
        .collect()
}

/// Fitted `V_H` at each point of a curve: the chosen family's line where
/// one applies, the data itself where the fit interpolates.
pub fn fitted_values(c: &CurveFit) -> Vec<f64> {
    let entry = c.report.fits.iter().find(|f| f.chosen).expect("report has a chosen fit");
    c.points
        .iter()
        .map(|&(n, v)| {
            let n = n as u64;
            match entry.segments.iter().find(|s| s.from_n <= n && n <= s.to_n) {
                Some(s) => (s.intercept + s.slope * (n as f64).ln()).exp(),
                None => v,
            }
        })
        .collect()
}

/// Write plot tables and the robustness verdicts from the fit summary.
pub fn report(cfg: &RunConfig) -> Result<Robustness> {
    let path = cfg.summary_json_path();
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingInput(format!("fit summary {} not found; run `aqem fit` first", path.display())))
        }
        Err(e) => return Err(e.into()),
    };
    let summary: FitSummary = serde_json::from_str(&text)?;
    let hash = cfg.hash();
    fs::create_dir_all(cfg.plot_dir())?;
    for c in &summary.curves {
        let mut csv = String::from("n,holevo,fitted,config_hash\n");
        for (&(n, v), f) in c.points.iter().zip(fitted_values(c)) {
            csv.push_str(&format!("{n},{v:?},{f:?},{hash}\n"));
        }
        fs::write(cfg.plot_dir().join(format!("{}.csv", c.stem())), csv)?;
    }
    let verdict = Robustness {
        config_hash: hash,
        seed: cfg.seed,
        pass_two_wp: cfg.report.pass_two_wp,
        policies: robustness(&summary, cfg.report.pass_two_wp),
    };
    write_json(&cfg.robustness_path(), &verdict)?;
    Ok(verdict)
}
