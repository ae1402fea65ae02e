mod common;

use std::sync::Arc;

use aqem::engine::{
    append_results, curves_from_rows, estimate_sharpness_variance, read_results, Campaign, Controller, Probe,
    ResultRow, Simulator, TrialRule,
};
use aqem::noise::{NoiseModel, NoiseParams, NoiseSpec};
use aqem::oracle::dense_oracle;
use aqem::phase::PhaseAngle;
use aqem::policies::{markov_next_phase, MarkovPolicy};
use aqem::rng::{domain, stream};
use aqem::state::{rotation_angle, Port};
use common::{exact_sharpness, holevo};

fn markov(deltas: &[f64]) -> Controller {
    Controller::Markov(Arc::new(MarkovPolicy::untrained(deltas.to_vec()).unwrap()))
}

#[test]
fn monte_carlo_matches_exact_enumeration() {
    let cases = [
        (Controller::Bayes(Probe::Product), 4, 100_000),
        (Controller::Bayes(Probe::Sine), 4, 100_000),
        (markov(&[1.54, 0.926, 0.516, 3.5]), 4, 100_000),
        (markov(&[2.0, 1.1, 0.7]), 3, 100_000),
    ];
    for (ctrl, n, k) in cases {
        let exact = holevo(exact_sharpness(&ctrl, n));
        let r = estimate_sharpness_variance(&ctrl, n, &NoiseSpec::NONE, &Campaign::new(TrialRule::Fixed(k), 11))
            .unwrap();
        assert!(
            (r.holevo - exact).abs() < 3.0 * r.holevo_se,
            "{} N={n}: MC {} ± {} vs exact {exact}",
            ctrl.id(),
            r.holevo,
            r.holevo_se
        );
    }
}

#[test]
fn outcome_strings_follow_the_dense_oracle() {
    let n = 3;
    let pol = MarkovPolicy::untrained(vec![1.3, 0.4, 2.2]).unwrap();
    let sim = Simulator::new(Controller::Markov(Arc::new(pol.clone())), n, NoiseParams::None).unwrap();
    let phi0 = PhaseAngle::new(0.9);
    let shots = 200_000;
    let mut counts = vec![0usize; 1 << n];
    for k in 0..shots {
        let mut rng = stream(5, domain::TRIAL, k);
        counts[sim.run(phi0, &mut rng).unwrap().outcomes as usize] += 1;
    }
    let mut tv = 0.0;
    let mut total = 0.0;
    for bits in 0..1usize << n {
        let xs: Vec<Port> = (0..n).map(|q| Port::from(bits >> q & 1 == 1)).collect();
        let mut fb = PhaseAngle::ZERO;
        let mut thetas = Vec::new();
        for (m, &x) in xs.iter().enumerate() {
            thetas.push(rotation_angle(phi0.value(), fb.value()));
            fb = markov_next_phase(&pol, fb, m + 1, x).unwrap();
        }
        let p = dense_oracle(n, &thetas, &xs).unwrap();
        total += p;
        tv += 0.5 * (counts[bits] as f64 / shots as f64 - p).abs();
    }
    assert!((total - 1.0).abs() < 1e-12);
    assert!(tv < 0.006, "total variation {tv}");
}

#[test]
fn worker_count_does_not_change_estimates() {
    let spec = NoiseSpec::with_default_skewness(NoiseModel::SkewNormal, 1.0);
    let ctrl = Controller::Bayes(Probe::Sine);
    let base = Campaign::new(TrialRule::Fixed(3000), 99);
    let a = estimate_sharpness_variance(&ctrl, 9, &spec, &base.with_workers(1)).unwrap();
    for w in [2, 5, 0] {
        let b = estimate_sharpness_variance(&ctrl, 9, &spec, &base.with_workers(w)).unwrap();
        assert_eq!(a.errors, b.errors);
        assert_eq!(a.holevo.to_bits(), b.holevo.to_bits());
    }
}

#[test]
fn results_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");
    let camp = Campaign::new(TrialRule::Fixed(200), 3);
    let spec = NoiseSpec::with_default_skewness(NoiseModel::LogNormal, 3.0);
    let mut rows = Vec::new();
    for n in [4, 5, 6] {
        let r = estimate_sharpness_variance(&Controller::Bayes(Probe::Sine), n, &spec, &camp).unwrap();
        rows.push(ResultRow::from_record(&r, false, "feedbeef"));
    }
    append_results(&path, &rows[..1]).unwrap();
    append_results(&path, &rows[1..]).unwrap();
    let back = read_results(&path).unwrap();
    assert_eq!(back, rows);
    let curves = curves_from_rows(&back).unwrap();
    assert_eq!(curves.len(), 1);
    assert_eq!(curves[0].noise, spec);
    assert_eq!(curves[0].points.len(), 3);
}
