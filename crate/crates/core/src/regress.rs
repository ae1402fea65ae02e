//! Piecewise-linear regression of `ln V_H` against `ln N` and model selection.
//!
//! Five model families are fitted to a log-log variance curve: one, two or
//! three continuous linear segments (`L1`, `L2`, `L3`), and an exact
//! interpolation of the leading points followed by one or two segments
//! (`I+L`, `I+LL`). Knots sit on data points and are found by exhaustive
//! search. Four criteria vote on the best family and the slope of its last
//! segment gives the scaling exponent.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::engine::VarianceCurve;
use crate::error::{Error, Result};

/// Fewest points a series may have. Families that need more points are
/// skipped.
pub const MIN_POINTS: usize = 3;

/// Default relative one-step SSE drop that marks the end of the interpolated
/// region.
pub const DEFAULT_DROP_THRESHOLD: f64 = 0.2;

/// Largest difference in `℘` for which a three-segment winner yields to the
/// runner-up.
pub const GUARD_TOLERANCE: f64 = 0.001;

/// Fewest parameters of a fit eligible as the F and Cp reference; this
/// admits L3 and the interpolation families.
const REFERENCE_MIN_PARAMS: usize = 6;

/// Fewest intervals between two knots, or between a knot and the end of an
/// `m`-point series: an eighth of the series, and never fewer than two.
fn min_span(m: usize) -> usize {
    (m / 8).max(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    L1,
    L2,
    L3,
    #[serde(rename = "I+L")]
    InterpLinear,
    #[serde(rename = "I+LL")]
    InterpTwoLinear,
}

impl Family {
    pub const ALL: [Family; 5] =
        [Family::L1, Family::L2, Family::L3, Family::InterpLinear, Family::InterpTwoLinear];

    pub fn name(self) -> &'static str {
        match self {
            Family::L1 => "L1",
            Family::L2 => "L2",
            Family::L3 => "L3",
            Family::InterpLinear => "I+L",
            Family::InterpTwoLinear => "I+LL",
        }
    }

    /// Number of continuous linear segments after any interpolated prefix.
    fn segments(self) -> usize {
        match self {
            Family::L1 | Family::InterpLinear => 1,
            Family::L2 | Family::InterpTwoLinear => 2,
            Family::L3 => 3,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Points `(ln N, ln V_H)` with strictly increasing abscissae.
#[derive(Clone, Debug, PartialEq)]
pub struct LogSeries {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl LogSeries {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < MIN_POINTS {
            return Err(Error::Domain(format!("series has {} points, need at least {MIN_POINTS}", points.len())));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Domain("series contains non-finite values".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Domain("series abscissae must be strictly increasing".into()));
        }
        Ok(LogSeries { x: points.iter().map(|p| p.0).collect(), y: points.iter().map(|p| p.1).collect() })
    }

    pub fn from_curve(curve: &VarianceCurve) -> Result<Self> {
        LogSeries::new(&curve.log_points())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Photon number at index `i`, assuming `x = ln N`.
    pub fn n_at(&self, i: usize) -> u64 {
        self.x[i].exp().round() as u64
    }

    fn total_sum_of_squares(&self) -> f64 {
        let mean = self.y.iter().sum::<f64>() / self.y.len() as f64;
        self.y.iter().map(|y| (y - mean).powi(2)).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub sse: f64,
}

/// Ordinary least squares on the inclusive index window `lo..=hi`.
pub fn fit_linear(series: &LogSeries, lo: usize, hi: usize) -> Result<LineFit> {
    if hi >= series.len() || hi <= lo {
        return Err(Error::Domain(format!("invalid window {lo}..={hi} for {} points", series.len())));
    }
    Ok(line_fit(&series.x[lo..=hi], &series.y[lo..=hi]))
}

fn line_fit(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = x.iter().zip(y).map(|(&xi, &yi)| (yi - intercept - slope * xi).powi(2)).sum();
    LineFit { slope, intercept, sse }
}

/// One linear piece over the inclusive index range `from..=to`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub from: usize,
    pub to: usize,
    pub slope: f64,
    pub intercept: f64,
}

impl Segment {
    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Selection criteria; `None` where a criterion is undefined for the fit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Criteria {
    pub adj_r2: Option<f64>,
    pub aicc: Option<f64>,
    pub f_value: Option<f64>,
    pub mallows_cp: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseFit {
    pub family: Family,
    /// Knot indices. For the interpolation families the first entry is the
    /// index where interpolation stops and the linear part begins.
    pub breakpoints: Vec<usize>,
    pub segments: Vec<Segment>,
    pub sse: f64,
    pub b: usize,
    pub criteria: Criteria,
}

impl PiecewiseFit {
    pub fn last_slope(&self) -> f64 {
        self.segments.last().map_or(f64::NAN, |s| s.slope)
    }

    /// `2℘`, the negated slope of the last segment.
    pub fn asymptotic_exponent(&self) -> f64 {
        -self.last_slope()
    }

    /// Index of the first point covered by a linear segment.
    pub fn interp_stop(&self) -> Option<usize> {
        matches!(self.family, Family::InterpLinear | Family::InterpTwoLinear).then(|| self.breakpoints[0])
    }
}

pub fn asymptotic_exponent(fit: &PiecewiseFit) -> f64 {
    fit.asymptotic_exponent()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    /// Relative one-step SSE drop that ends the interpolated region.
    pub drop_threshold: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { drop_threshold: DEFAULT_DROP_THRESHOLD }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.drop_threshold > 0.0 && self.drop_threshold < 1.0) {
            return Err(Error::Config(format!("drop threshold {} outside (0, 1)", self.drop_threshold)));
        }
        Ok(())
    }
}

/// Continuous hinge model `y = c0 + c1 (x − xc) + Σ c_{2+i} (x − k_i)+`.
struct Hinge {
    xc: f64,
    knots: Vec<f64>,
    coef: Vec<f64>,
}

impl Hinge {
    fn eval(&self, x: f64) -> f64 {
        let mut v = self.coef[0] + self.coef[1] * (x - self.xc);
        for (k, c) in self.knots.iter().zip(&self.coef[2..]) {
            v += c * (x - k).max(0.0);
        }
        v
    }

    fn sse(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(&xi, &yi)| (yi - self.eval(xi)).powi(2)).sum()
    }

    /// Linear pieces with absolute indices, given knot indices relative to
    /// the slice that starts at `offset`.
    fn segments(&self, offset: usize, len: usize, knot_idx: &[usize]) -> Vec<Segment> {
        let mut slope = self.coef[1];
        let mut intercept = self.coef[0] - self.coef[1] * self.xc;
        let mut from = 0;
        let mut out = Vec::with_capacity(knot_idx.len() + 1);
        for (i, &k) in knot_idx.iter().enumerate() {
            out.push(Segment { from: offset + from, to: offset + k, slope, intercept });
            slope += self.coef[2 + i];
            intercept -= self.coef[2 + i] * self.knots[i];
            from = k;
        }
        out.push(Segment { from: offset + from, to: offset + len - 1, slope, intercept });
        out
    }
}

fn design_row(x: f64, xc: f64, knots: &[f64], row: &mut [f64]) {
    row[0] = 1.0;
    row[1] = x - xc;
    for (r, k) in row[2..].iter_mut().zip(knots) {
        *r = (x - k).max(0.0);
    }
}

/// Fast normal-equation solve used while scanning knot positions.
fn hinge_sse_fast(x: &[f64], y: &[f64], xc: f64, knots: &[f64]) -> f64 {
    let p = 2 + knots.len();
    let mut ata = DMatrix::<f64>::zeros(p, p);
    let mut aty = DVector::<f64>::zeros(p);
    let mut row = [0.0; 4];
    for (&xi, &yi) in x.iter().zip(y) {
        design_row(xi, xc, knots, &mut row[..p]);
        for i in 0..p {
            aty[i] += row[i] * yi;
            for j in 0..=i {
                ata[(i, j)] += row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            ata[(j, i)] = ata[(i, j)];
        }
    }
    match ata.cholesky() {
        Some(ch) => {
            let coef = ch.solve(&aty);
            Hinge { xc, knots: knots.to_vec(), coef: coef.iter().copied().collect() }.sse(x, y)
        }
        None => f64::INFINITY,
    }
}

/// Orthogonal least-squares solve used for the reported fit.
fn hinge_fit(x: &[f64], y: &[f64], knots: &[f64]) -> Result<Hinge> {
    let xc = x.iter().sum::<f64>() / x.len() as f64;
    let p = 2 + knots.len();
    let mut a = DMatrix::<f64>::zeros(x.len(), p);
    let mut row = [0.0; 4];
    for (i, &xi) in x.iter().enumerate() {
        design_row(xi, xc, knots, &mut row[..p]);
        for j in 0..p {
            a[(i, j)] = row[j];
        }
    }
    let rhs = DVector::from_column_slice(y);
    let coef = a
        .svd(true, true)
        .solve(&rhs, 1e-13)
        .map_err(|e| Error::Domain(format!("least-squares solve failed: {e}")))?;
    Ok(Hinge { xc, knots: knots.to_vec(), coef: coef.iter().copied().collect() })
}

/// Best continuous fit with `segments` pieces on a slice; knot indices are
/// relative to the slice.
fn best_continuous(x: &[f64], y: &[f64], segments: usize) -> Option<(Vec<usize>, Hinge)> {
    let m = x.len();
    let xc = x.iter().sum::<f64>() / m as f64;
    let knots = match segments {
        1 => {
            if m < 2 {
                return None;
            }
            vec![]
        }
        2 => {
            if m < 2 * min_span(m) + 1 {
                return None;
            }
            let mut best = (f64::INFINITY, 0);
            for k in min_span(m)..=m - 1 - min_span(m) {
                let s = hinge_sse_fast(x, y, xc, &[x[k]]);
                if s < best.0 {
                    best = (s, k);
                }
            }
            vec![best.1]
        }
        3 => {
            if m < 3 * min_span(m) + 1 {
                return None;
            }
            let mut best = (f64::INFINITY, 0, 0);
            for k1 in min_span(m)..=m - 1 - 2 * min_span(m) {
                for k2 in k1 + min_span(m)..=m - 1 - min_span(m) {
                    let s = hinge_sse_fast(x, y, xc, &[x[k1], x[k2]]);
                    if s < best.0 {
                        best = (s, k1, k2);
                    }
                }
            }
            vec![best.1, best.2]
        }
        _ => return None,
    };
    let knot_x: Vec<f64> = knots.iter().map(|&k| x[k]).collect();
    let h = hinge_fit(x, y, &knot_x).ok()?;
    Some((knots, h))
}

fn infeasible(family: Family, reason: impl Into<String>) -> Error {
    Error::InfeasibleFit { family: family.name(), reason: reason.into() }
}

/// Continuity-constrained best fit of one family. Criteria are left empty;
/// see [`fit_all`].
pub fn fit_family(series: &LogSeries, family: Family, opts: &FitOptions) -> Result<PiecewiseFit> {
    let (x, y) = (series.x(), series.y());
    let v = series.len();
    match family {
        Family::L1 | Family::L2 | Family::L3 => {
            let segs = family.segments();
            let (knots, h) = best_continuous(x, y, segs)
                .ok_or_else(|| infeasible(family, format!("{v} points are too few")))?;
            Ok(PiecewiseFit {
                family,
                segments: h.segments(0, v, &knots),
                sse: h.sse(x, y),
                b: 2 * segs,
                breakpoints: knots,
                criteria: Criteria::default(),
            })
        }
        Family::InterpLinear | Family::InterpTwoLinear => {
            let segs = family.segments();
            let stop = interpolation_stop(series, segs, opts.drop_threshold).map_err(|r| infeasible(family, r))?;
            let (knots, h) = best_continuous(&x[stop..], &y[stop..], segs)
                .ok_or_else(|| infeasible(family, "trailing region too short"))?;
            let mut breakpoints = vec![stop];
            breakpoints.extend(knots.iter().map(|k| k + stop));
            Ok(PiecewiseFit {
                family,
                segments: h.segments(stop, v - stop, &knots),
                sse: h.sse(&x[stop..], &y[stop..]),
                b: stop + 2 * segs + 1,
                breakpoints,
                criteria: Criteria::default(),
            })
        }
    }
}

/// SSE of the best trailing fit starting at every admissible index.
fn trailing_sse(series: &LogSeries, segments: usize, max_stop: usize) -> Vec<f64> {
    (0..=max_stop)
        .map(|s| {
            best_continuous(&series.x[s..], &series.y[s..], segments)
                .map_or(f64::INFINITY, |(_, h)| h.sse(&series.x[s..], &series.y[s..]))
        })
        .collect()
}

/// Index where interpolation stops: the largest relative one-step drop in
/// trailing SSE, provided it reaches `threshold`. The trailing part keeps at
/// least half of the points.
fn interpolation_stop(series: &LogSeries, segments: usize, threshold: f64) -> std::result::Result<usize, String> {
    let v = series.len();
    let min_trailing = (v.div_ceil(2)).max(segments * min_span(v) + 1);
    // Keep v > b + 1 so that every criterion stays defined.
    let max_stop = v.saturating_sub(min_trailing).min(v.saturating_sub(2 * segments + 3));
    if max_stop == 0 {
        return Err(format!("{v} points leave no room for an interpolated prefix"));
    }
    let sse = trailing_sse(series, segments, max_stop);
    let floor = 1e-20 * (1.0 + series.total_sum_of_squares());
    let mut best: Option<(f64, usize)> = None;
    for s in 1..=max_stop {
        if sse[s - 1] > floor && sse[s - 1].is_finite() {
            let drop = (sse[s - 1] - sse[s]) / sse[s - 1];
            if drop >= threshold && best.is_none_or(|(d, _)| drop > d) {
                best = Some((drop, s));
            }
        }
    }
    best.map(|(_, s)| s).ok_or_else(|| format!("no one-step SSE drop reaches {threshold}"))
}

/// Fill in the criteria of `fit` relative to the reference fit `full`.
pub fn criteria(fit: &PiecewiseFit, full: &PiecewiseFit, series: &LogSeries) -> Criteria {
    let v = series.len() as f64;
    let b = fit.b as f64;
    let mut c = Criteria::default();
    if v > b + 1.0 {
        let sst = series.total_sum_of_squares();
        if sst > 0.0 {
            let r2 = 1.0 - fit.sse / sst;
            c.adj_r2 = Some(r2 - b / (v - b - 1.0) * (1.0 - r2));
        }
        let sse = fit.sse.max(f64::MIN_POSITIVE);
        c.aicc = Some(v * (sse / v).ln() + 2.0 * b + 2.0 * b * (b + 1.0) / (v - b - 1.0));
    }
    let bf = full.b as f64;
    if fit.family != full.family && v > bf && full.sse > 0.0 {
        let sigma2 = full.sse / (v - bf);
        if b < bf {
            c.f_value = Some(((fit.sse - full.sse) / (bf - b)) / sigma2);
        }
        c.mallows_cp = Some(fit.sse / sigma2 - v + 2.0 * b);
    }
    c
}

/// Outcome of the vote over fitted families.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    /// Index into the fits passed to [`select_model`].
    pub chosen: usize,
    pub vote_winner: usize,
    pub runner_up: Option<usize>,
    /// Votes per fit, aligned with the input.
    pub votes: Vec<usize>,
    /// `true` when a three-segment winner was replaced by the runner-up.
    pub guard_applied: bool,
    pub two_wp: f64,
}

fn better_by<F: Fn(&PiecewiseFit) -> Option<f64>>(fits: &[PiecewiseFit], key: F) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (i, f) in fits.iter().enumerate() {
        if let Some(score) = key(f).filter(|s| s.is_finite()) {
            let replace = match best {
                None => true,
                Some((s, j)) => score < s || (score == s && (f.b, f.family) < (fits[j].b, fits[j].family)),
            };
            if replace {
                best = Some((score, i));
            }
        }
    }
    best.map(|(_, i)| i)
}

/// Majority vote of adjusted R², AICc, F and Mallows Cp, with the
/// three-segment guard.
pub fn select_model(fits: &[PiecewiseFit]) -> Result<Selection> {
    if fits.len() < 2 {
        return Err(Error::Domain(format!("model selection needs at least two fits, got {}", fits.len())));
    }
    let mut votes = vec![0usize; fits.len()];
    let ballots = [
        better_by(fits, |f| f.criteria.adj_r2.map(|r| -r)),
        better_by(fits, |f| f.criteria.aicc),
        better_by(fits, |f| f.criteria.f_value),
        better_by(fits, |f| f.criteria.mallows_cp.map(|cp| (cp - f.b as f64).abs())),
    ];
    for i in ballots.into_iter().flatten() {
        votes[i] += 1;
    }
    if votes.iter().all(|&v| v == 0) {
        return Err(Error::Domain("no criterion is defined for any fit".into()));
    }
    let mut order: Vec<usize> = (0..fits.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(votes[i]), fits[i].b, fits[i].family));
    let winner = order[0];
    let runner_up = order.get(1).copied();
    let mut chosen = winner;
    let mut guard_applied = false;
    if fits[winner].family == Family::L3 {
        if let Some(r) = runner_up {
            let dwp = (fits[winner].asymptotic_exponent() - fits[r].asymptotic_exponent()).abs() / 2.0;
            if dwp <= GUARD_TOLERANCE * (1.0 + 1e-9) {
                chosen = r;
                guard_applied = true;
            }
        }
    }
    Ok(Selection {
        chosen,
        vote_winner: winner,
        runner_up,
        votes,
        guard_applied,
        two_wp: fits[chosen].asymptotic_exponent(),
    })
}

fn residual_mean_square(fit: &PiecewiseFit, v: usize) -> f64 {
    fit.sse / (v - fit.b) as f64
}

/// Every feasible family with criteria filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct FitSet {
    pub fits: Vec<PiecewiseFit>,
    /// Families that could not be fitted, with the reason.
    pub skipped: Vec<(Family, String)>,
    /// Family whose residual variance scales F and Mallows Cp; `None` when
    /// no flexible family could be fitted, leaving both criteria undefined.
    pub reference: Option<Family>,
}

pub fn fit_all(series: &LogSeries, opts: &FitOptions) -> Result<FitSet> {
    opts.validate()?;
    let mut fits = Vec::new();
    let mut skipped = Vec::new();
    for family in Family::ALL {
        match fit_family(series, family, opts) {
            Ok(f) => fits.push(f),
            Err(Error::InfeasibleFit { reason, .. }) => skipped.push((family, reason)),
            Err(e) => return Err(e),
        }
    }
    let full = fits
        .iter()
        .filter(|f| series.len() > f.b && f.b >= REFERENCE_MIN_PARAMS)
        .min_by(|a, b| residual_mean_square(a, series.len()).total_cmp(&residual_mean_square(b, series.len())))
        .cloned();
    for f in &mut fits {
        f.criteria = match &full {
            Some(full) => criteria(f, full, series),
            None => criteria(f, f, series),
        };
    }
    Ok(FitSet { fits, skipped, reference: full.map(|f| f.family) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub from_n: u64,
    pub to_n: u64,
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitEntry {
    pub family: Family,
    pub breakpoints_n: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interp_stop_n: Option<u64>,
    pub segments: Vec<SegmentReport>,
    pub sse: f64,
    pub b: usize,
    pub criteria: Criteria,
    pub votes: usize,
    pub chosen: bool,
    pub two_wp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedFamily {
    pub family: Family,
    pub reason: String,
}

/// Complete fit report for one curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub points: usize,
    pub chosen: Family,
    pub vote_winner: Family,
    pub reference: Option<Family>,
    pub guard_applied: bool,
    pub two_wp: f64,
    pub fits: Vec<FitEntry>,
    pub skipped: Vec<SkippedFamily>,
    pub options: FitOptions,
    pub notes: Vec<String>,
}

/// Conventions applied by this module, carried in every report.
pub fn method_notes() -> Vec<String> {
    vec![
        "knots are placed on data points and found by exhaustive search".into(),
        "segments are continuous at every knot".into(),
        "parameter counts: L1=2, L2=4, L3=6, I+L=s+3, I+LL=s+5 with s interpolated points".into(),
        "interpolation stops at the largest relative one-step drop in trailing SSE that reaches the threshold".into(),
        "F and Mallows Cp use as reference the fit with the smallest SSE/(v-b) among L3, I+L and I+LL; neither is defined for the reference itself".into(),
        "each linear segment spans at least max(2, v/8) point intervals".into(),
        "ranking: highest adjusted R2, lowest AICc, lowest F, smallest |Cp - b|".into(),
        "vote ties go to the family with fewer parameters".into(),
        format!("an L3 winner yields to the runner-up when their exponents differ by at most {GUARD_TOLERANCE}"),
    ]
}

/// Fit every family, vote and assemble the report. A lone feasible family
/// is chosen without a vote.
pub fn analyze(series: &LogSeries, opts: &FitOptions) -> Result<FitReport> {
    let FitSet { fits, skipped, reference } = fit_all(series, opts)?;
    let sel = if fits.len() == 1 {
        Selection {
            chosen: 0,
            vote_winner: 0,
            runner_up: None,
            votes: vec![0],
            guard_applied: false,
            two_wp: fits[0].asymptotic_exponent(),
        }
    } else {
        select_model(&fits)?
    };
    let entries = fits
        .iter()
        .enumerate()
        .map(|(i, f)| FitEntry {
            family: f.family,
            breakpoints_n: f.breakpoints.iter().map(|&k| series.n_at(k)).collect(),
            interp_stop_n: f.interp_stop().map(|k| series.n_at(k)),
            segments: f
                .segments
                .iter()
                .map(|s| SegmentReport {
                    from_n: series.n_at(s.from),
                    to_n: series.n_at(s.to),
                    slope: s.slope,
                    intercept: s.intercept,
                })
                .collect(),
            sse: f.sse,
            b: f.b,
            criteria: f.criteria,
            votes: sel.votes[i],
            chosen: i == sel.chosen,
            two_wp: f.asymptotic_exponent(),
        })
        .collect();
    Ok(FitReport {
        points: series.len(),
        chosen: fits[sel.chosen].family,
        vote_winner: fits[sel.vote_winner].family,
        reference,
        guard_applied: sel.guard_applied,
        two_wp: sel.two_wp,
        fits: entries,
        skipped: skipped.into_iter().map(|(family, reason)| SkippedFamily { family, reason }).collect(),
        options: *opts,
        notes: method_notes(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn log_ns() -> Vec<f64> {
        (4..=100).map(|n| (n as f64).ln()).collect()
    }

    fn series_from(x: &[f64], f: impl Fn(usize, f64) -> f64) -> LogSeries {
        let pts: Vec<(f64, f64)> = x.iter().enumerate().map(|(i, &xi)| (xi, f(i, xi))).collect();
        LogSeries::new(&pts).unwrap()
    }

    fn random_series(seed: u64, len: usize) -> LogSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = 1.0;
        let pts: Vec<(f64, f64)> = (0..len)
            .map(|_| {
                x += rng.random_range(0.01..0.2);
                (x, rng.random_range(-2.0..2.0) - x)
            })
            .collect();
        LogSeries::new(&pts).unwrap()
    }

    #[test]
    fn series_validation() {
        assert!(LogSeries::new(&[(0.0, 0.0), (1.0, 0.0)]).is_err());
        assert!(LogSeries::new(&[(0.0, 0.0); 3]).is_err());
        let mut pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 0.0)).collect();
        assert!(LogSeries::new(&pts).is_ok());
        pts[4].0 = pts[3].0;
        assert!(LogSeries::new(&pts).is_err());
        pts[4] = (3.5, f64::NAN);
        assert!(LogSeries::new(&pts).is_err());
    }

    #[test]
    fn exact_line() {
        let s = series_from(&log_ns(), |_, x| 2.0 * x + 1.0);
        let f = fit_linear(&s, 0, s.len() - 1).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!(f.sse < 1e-24);
    }

    #[test]
    fn two_points_interpolate() {
        let s = random_series(3, 20);
        let f = fit_linear(&s, 5, 6).unwrap();
        for i in [5, 6] {
            assert!((f.intercept + f.slope * s.x()[i] - s.y()[i]).abs() < 1e-12);
        }
        assert!(f.sse < 1e-24);
        assert!(fit_linear(&s, 6, 6).is_err());
        assert!(fit_linear(&s, 0, 20).is_err());
    }

    #[test]
    fn linear_sse_matches_direct_residuals() {
        let s = random_series(11, 50);
        let f = fit_linear(&s, 0, 49).unwrap();
        let direct: f64 = s.x().iter().zip(s.y()).map(|(x, y)| (y - f.intercept - f.slope * x).powi(2)).sum();
        assert!((f.sse - direct).abs() < 1e-10);
        // Normal equations: residuals orthogonal to 1 and x.
        let r: Vec<f64> = s.x().iter().zip(s.y()).map(|(x, y)| y - f.intercept - f.slope * x).collect();
        assert!(r.iter().sum::<f64>().abs() < 1e-10);
        assert!(r.iter().zip(s.x()).map(|(r, x)| r * x).sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn noiseless_two_segments_recovered() {
        let x = log_ns();
        let k = x[40];
        let s = series_from(&x, |_, xi| if xi <= k { -1.5 * (xi - k) } else { -1.0 * (xi - k) });
        let f = fit_family(&s, Family::L2, &FitOptions::default()).unwrap();
        assert_eq!(f.breakpoints, vec![40]);
        assert!((f.segments[0].slope + 1.5).abs() < 1e-12);
        assert!((f.segments[1].slope + 1.0).abs() < 1e-12);
        assert!(f.sse < 1e-20);
        assert_eq!(f.b, 4);
        assert_eq!((f.segments[0].from, f.segments[0].to, f.segments[1].from, f.segments[1].to), (0, 40, 40, 96));
    }

    #[test]
    fn noiseless_three_segments_recovered() {
        let x = log_ns();
        let (k1, k2) = (x[25], x[65]);
        let s = series_from(&x, |_, xi| {
            0.3 - 0.6 * xi.min(k1) - 1.7 * (xi.clamp(k1, k2) - k1) - 1.0 * (xi.max(k2) - k2)
        });
        let f = fit_family(&s, Family::L3, &FitOptions::default()).unwrap();
        assert_eq!(f.breakpoints, vec![25, 65]);
        assert!(f.sse < 1e-20);
        let slopes: Vec<f64> = f.segments.iter().map(|s| s.slope).collect();
        for (a, b) in slopes.iter().zip([-0.6, -1.7, -1.0]) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn noiseless_interpolation_recovered() {
        let x = log_ns();
        let bumps = [0.4, -0.3, 0.5, -0.6, 0.2, 0.7, -0.4, 0.3, -0.5, 0.6, -0.2, 0.45, -0.35, 0.55, -0.65];
        let s = series_from(&x, |i, xi| 0.5 - 1.2 * xi + bumps.get(i).copied().unwrap_or(0.0));
        let f = fit_family(&s, Family::InterpLinear, &FitOptions::default()).unwrap();
        assert_eq!(f.interp_stop(), Some(15));
        assert_eq!(f.b, 18);
        assert!(f.sse < 1e-20);
        assert!((f.last_slope() + 1.2).abs() < 1e-10);

        let k = x[50];
        let s = series_from(&x, |i, xi| {
            let base = if xi <= k { -1.6 * (xi - k) } else { -1.0 * (xi - k) };
            base + bumps.get(i).copied().unwrap_or(0.0)
        });
        let f = fit_family(&s, Family::InterpTwoLinear, &FitOptions::default()).unwrap();
        assert_eq!(f.breakpoints, vec![15, 50]);
        assert_eq!(f.b, 20);
        assert!(f.sse < 1e-20);
    }

    #[test]
    fn short_series_skip_families() {
        let x: Vec<f64> = (4..=8).map(|n| (n as f64).ln()).collect();
        let s = series_from(&x, |i, xi| 0.2 - xi + 0.01 * (i % 2) as f64);
        let set = fit_all(&s, &FitOptions::default()).unwrap();
        let fitted: Vec<Family> = set.fits.iter().map(|f| f.family).collect();
        assert_eq!(fitted, vec![Family::L1, Family::L2]);
        assert_eq!(set.skipped.len(), 3);
        assert_eq!(set.reference, None);
        let report = analyze(&s, &FitOptions::default()).unwrap();
        assert_eq!(report.chosen, Family::L1);
        assert_eq!(report.skipped.len(), 3);
        for tiny in 3..5 {
            let x: Vec<f64> = (1..=tiny).map(|n| (n as f64).ln()).collect();
            let r = analyze(&series_from(&x, |_, xi| -xi), &FitOptions::default()).unwrap();
            assert_eq!(r.chosen, Family::L1);
            assert!((r.two_wp - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_needs_a_drop() {
        let s = series_from(&log_ns(), |_, x| 0.5 - x);
        assert!(matches!(
            fit_family(&s, Family::InterpLinear, &FitOptions::default()),
            Err(Error::InfeasibleFit { family: "I+L", .. })
        ));
    }

    #[test]
    fn continuity_and_nesting() {
        for seed in 0..8 {
            let s = random_series(seed, 30 + 9 * seed as usize);
            let fits: Vec<PiecewiseFit> = [Family::L1, Family::L2, Family::L3]
                .into_iter()
                .map(|f| fit_family(&s, f, &FitOptions::default()).unwrap())
                .collect();
            assert!(fits[2].sse <= fits[1].sse * (1.0 + 1e-12));
            assert!(fits[1].sse <= fits[0].sse * (1.0 + 1e-12));
            for f in &fits {
                assert_eq!(f.segments.first().unwrap().from, 0);
                assert_eq!(f.segments.last().unwrap().to, s.len() - 1);
                for w in f.segments.windows(2) {
                    assert_eq!(w[0].to, w[1].from);
                    let xk = s.x()[w[0].to];
                    assert!((w[0].at(xk) - w[1].at(xk)).abs() < 1e-10);
                }
                let direct: f64 = f
                    .segments
                    .iter()
                    .enumerate()
                    .flat_map(|(j, seg)| {
                        let start = if j == 0 { seg.from } else { seg.from + 1 };
                        (start..=seg.to).map(move |i| (i, *seg))
                    })
                    .map(|(i, seg)| (s.y()[i] - seg.at(s.x()[i])).powi(2))
                    .sum();
                assert!((direct - f.sse).abs() < 1e-9 * (1.0 + f.sse));
            }
        }
    }

    fn stub(family: Family, b: usize, last_slope: f64, criteria: Criteria) -> PiecewiseFit {
        PiecewiseFit {
            family,
            breakpoints: vec![],
            segments: vec![Segment { from: 0, to: 10, slope: last_slope, intercept: 0.0 }],
            sse: 1.0,
            b,
            criteria,
        }
    }

    #[test]
    fn criteria_formulas() {
        let s = random_series(5, 97);
        let sst = s.total_sum_of_squares();
        let mut fit = stub(Family::L1, 2, -1.0, Criteria::default());
        fit.sse = 0.01 * sst;
        let mut full = stub(Family::L3, 6, -1.0, Criteria::default());
        full.sse = 0.005 * sst;
        let c = criteria(&fit, &full, &s);
        assert!((c.adj_r2.unwrap() - (0.99 - 2.0 / 94.0 * 0.01)).abs() < 1e-12);
        assert!((c.adj_r2.unwrap() - 0.989787).abs() < 1e-6);
        let aicc = 97.0 * (fit.sse / 97.0).ln() + 4.0 + 12.0 / 94.0;
        assert!((c.aicc.unwrap() - aicc).abs() < 1e-9);
        let sigma2 = full.sse / 91.0;
        assert!((c.f_value.unwrap() - (fit.sse - full.sse) / 4.0 / sigma2).abs() < 1e-9);
        assert!((c.mallows_cp.unwrap() - (fit.sse / sigma2 - 97.0 + 4.0)).abs() < 1e-9);

        fit.sse = 0.0;
        assert_eq!(criteria(&fit, &full, &s).adj_r2, Some(1.0));

        let mut same = stub(Family::L2, 4, -1.0, Criteria::default());
        same.sse = full.sse;
        assert_eq!(criteria(&same, &full, &s).f_value, Some(0.0));

        let c = criteria(&full, &full, &s);
        assert!(c.f_value.is_none() && c.mallows_cp.is_none());
    }

    #[test]
    fn criteria_undefined_for_too_many_parameters() {
        let s = random_series(1, 10);
        let fit = stub(Family::InterpLinear, 9, -1.0, Criteria::default());
        let full = stub(Family::L3, 6, -1.0, Criteria::default());
        let c = criteria(&fit, &full, &s);
        assert!(c.adj_r2.is_none() && c.aicc.is_none() && c.f_value.is_none());
    }

    fn crit(r2: f64, aicc: f64, f: Option<f64>, cp: Option<f64>) -> Criteria {
        Criteria { adj_r2: Some(r2), aicc: Some(aicc), f_value: f, mallows_cp: cp }
    }

    #[test]
    fn unanimous_vote() {
        let fits = vec![
            stub(Family::L1, 2, -1.0, crit(0.90, -10.0, Some(9.0), Some(30.0))),
            stub(Family::L2, 4, -1.2, crit(0.99, -50.0, Some(0.5), Some(4.2))),
            stub(Family::L3, 6, -1.3, crit(0.98, -45.0, None, None)),
        ];
        let sel = select_model(&fits).unwrap();
        assert_eq!(sel.chosen, 1);
        assert_eq!(sel.votes, vec![0, 4, 0]);
        assert!(!sel.guard_applied);
        assert!((sel.two_wp - 1.2).abs() < 1e-15);
    }

    #[test]
    fn guard_in_both_directions() {
        let make = |runner_two_wp: f64| {
            vec![
                stub(Family::L2, 4, -runner_two_wp, crit(0.97, -40.0, Some(0.5), Some(4.1))),
                stub(Family::L3, 6, -1.267, crit(0.99, -50.0, None, None)),
                stub(Family::L1, 2, -1.0, crit(0.90, -10.0, Some(9.0), Some(30.0))),
                stub(Family::InterpTwoLinear, 20, -1.1, crit(0.95, -30.0, None, Some(20.05))),
            ]
        };
        let sel = select_model(&make(1.2665)).unwrap();
        assert_eq!(sel.vote_winner, 1);
        assert_eq!(sel.runner_up, Some(0));
        assert!(sel.guard_applied);
        assert_eq!(sel.chosen, 0);
        assert!((sel.two_wp - 1.2665).abs() < 1e-15);

        let sel = select_model(&make(1.264)).unwrap();
        assert!(!sel.guard_applied);
        assert_eq!(sel.chosen, 1);
        assert!((sel.two_wp - 1.267).abs() < 1e-15);
    }

    #[test]
    fn vote_tie_prefers_fewer_parameters() {
        let fits = vec![
            stub(Family::L3, 6, -1.5, crit(0.99, -60.0, None, None)),
            stub(Family::L1, 2, -1.0, crit(0.90, -10.0, Some(0.1), Some(2.0))),
        ];
        let sel = select_model(&fits).unwrap();
        assert_eq!(sel.votes, vec![2, 2]);
        assert_eq!(sel.chosen, 1);
        assert!(select_model(&fits[..1]).is_err());
    }

    #[test]
    fn exponent_sign() {
        for (slope, want) in [(-1.0, 1.0), (-2.0, 2.0), (-1.459, 1.459)] {
            let f = stub(Family::L1, 2, slope, Criteria::default());
            assert_eq!(asymptotic_exponent(&f), want);
        }
    }

    #[test]
    fn analysis_is_deterministic_and_serializable() {
        let s = random_series(21, 40);
        let a = analyze(&s, &FitOptions::default()).unwrap();
        let b = analyze(&s, &FitOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fits.iter().filter(|f| f.chosen).count(), 1);
        let json = serde_json::to_value(&a).unwrap();
        for key in ["chosen", "two_wp", "fits", "notes", "skipped"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert!(FitOptions { drop_threshold: 1.5 }.validate().is_err());
    }
}
