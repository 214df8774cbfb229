//! Monte-Carlo phase diagrams and logistic estimation of the transition.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{gen_instance, Amplitude, EnsembleKind, InstanceSpec};
use crate::rng::derive_seed;
use crate::solvers::{relative_error, solve, Algorithm, Lambda, SolverConfig, StopRule};
use crate::state_evolution::rho_se;
use crate::thresholds::Case;

/// Default undersampling grid: 30 values equispaced on `[0.02, 0.99]`.
pub fn default_delta_grid() -> Vec<f64> {
    linspace(0.02, 0.99, 30)
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

/// Layout of the sparsity grid at each `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Design {
    /// `points` values spanning `rho_SE(delta) +- halfwidth`, clipped to `[0.005, 1]`.
    Focused { halfwidth: f64, points: usize },
    /// `rho = i / points` for `i = 1..=points`.
    General { points: usize },
    /// `points` values spanning `[lo, hi] * rho_SE(delta)`, capped at 1.
    Relative { lo: f64, hi: f64, points: usize },
}

impl Design {
    pub const FOCUSED: Design = Design::Focused { halfwidth: 0.1, points: 20 };
    pub const GENERAL: Design = Design::General { points: 40 };

    pub fn rho_values(&self, delta: f64, case: Case) -> Vec<f64> {
        match *self {
            Design::Focused { halfwidth, points } => {
                let c = rho_se(delta, case).rho;
                linspace((c - halfwidth).max(0.005), (c + halfwidth).min(1.0), points)
            }
            Design::General { points } => (1..=points).map(|i| i as f64 / points as f64).collect(),
            Design::Relative { lo, hi, points } => {
                let c = rho_se(delta, case).rho;
                linspace(lo * c, hi * c, points).into_iter().map(|r| r.min(1.0)).collect()
            }
        }
    }
}

/// How a trial's reconstruction error is compared with `tol`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuccessRule {
    /// `|x - x0| / |x0| <= tol`.
    #[default]
    Relative,
    /// `|x - x0| / sqrt(N) <= tol`.
    Rms,
}

impl std::str::FromStr for SuccessRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relative" => Ok(SuccessRule::Relative),
            "rms" => Ok(SuccessRule::Rms),
            _ => Err(Error::InvalidParameter(format!("unknown success rule '{s}' (expected relative or rms)"))),
        }
    }
}

impl SuccessRule {
    pub fn error(self, x: &[f64], x0: &[f64]) -> f64 {
        match self {
            SuccessRule::Relative => relative_error(x, x0),
            SuccessRule::Rms => {
                let sq: f64 = x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
                (sq / x.len() as f64).sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub case: Case,
    pub deltas: Vec<f64>,
    pub design: Design,
    /// Trials per grid point.
    pub trials: usize,
    pub dim: usize,
    pub t_max: usize,
    pub tol: f64,
    pub success: SuccessRule,
    pub algorithm: Algorithm,
    pub lambda: Lambda,
    pub relaxation: Option<f64>,
    pub ensemble: EnsembleKind,
    pub amplitude: Amplitude,
    pub seed: u64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("need at least one trial per point".into()));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance {} must be > 0", self.tol)));
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
            return Err(Error::InvalidParameter("delta grid must be nonempty and inside (0,1]".into()));
        }
        if self.t_max == 0 || self.dim == 0 {
            return Err(Error::InvalidParameter("N and T must be positive".into()));
        }
        let ok = match self.design {
            Design::Focused { halfwidth, points } => points > 0 && halfwidth >= 0.0,
            Design::General { points } => points > 0,
            Design::Relative { lo, hi, points } => points > 0 && lo > 0.0 && lo <= hi,
        };
        if !ok {
            return Err(Error::InvalidParameter(format!("bad design {:?}", self.design)));
        }
        Ok(())
    }

    /// All `(delta, rho)` points in sweep order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.deltas
            .iter()
            .flat_map(|&d| self.design.rho_values(d, self.case).into_iter().map(move |r| (d, r)))
            .collect()
    }

    fn solver_config(&self) -> SolverConfig {
        let mut c = SolverConfig::new(self.algorithm, self.case, self.lambda, self.t_max).with_stop(StopRule::FixedT);
        c.relaxation = self.relaxation;
        c
    }
}

/// Outcome of all trials at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub case: Case,
    pub algorithm: Algorithm,
    pub ensemble: EnsembleKind,
    pub amplitude: Amplitude,
    /// Threshold control actually used.
    pub lambda: f64,
    pub dim: usize,
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub rho: f64,
    pub trials: usize,
    pub successes: usize,
    /// Seed from which the point's trial seeds derive.
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialDataset {
    pub records: Vec<TrialRecord>,
}

struct TrialOutcome {
    n: usize,
    k: usize,
    lambda: f64,
    success: bool,
}

fn run_trial(spec: &GridSpec, config: &SolverConfig, delta: f64, rho: f64, seed: u64) -> Result<TrialOutcome> {
    let inst = gen_instance(&InstanceSpec {
        delta,
        rho,
        dim: spec.dim,
        ensemble: spec.ensemble,
        amplitude: spec.amplitude,
        case: spec.case,
        seed,
    })?;
    let lambda = config.lambda.resolve(inst.n as f64 / inst.dim as f64, spec.case);
    // A diverged trial is a failed trial.
    let success = match solve(&inst, config) {
        Ok(res) => spec.success.error(&res.x_hat, &inst.x0) <= spec.tol,
        Err(Error::Diverged { .. }) => false,
        Err(e) => return Err(e),
    };
    Ok(TrialOutcome { n: inst.n, k: inst.k, lambda, success })
}

/// Run every trial of the sweep. Trials execute in parallel on the current
/// rayon pool; the result does not depend on scheduling.
pub fn run_grid(spec: &GridSpec) -> Result<TrialDataset> {
    spec.validate()?;
    let config = spec.solver_config();
    config.validate()?;
    let points = spec.points();
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..spec.trials).map(move |t| (p, t))).collect();
    let outcomes: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(p, t)| {
            let (delta, rho) = points[p];
            run_trial(spec, &config, delta, rho, derive_seed(spec.seed, &[p as u64, t as u64]))
        })
        .collect::<Result<_>>()?;
    let records = points
        .iter()
        .enumerate()
        .zip(outcomes.chunks(spec.trials))
        .map(|((p, &(delta, rho)), chunk)| TrialRecord {
            case: spec.case,
            algorithm: spec.algorithm,
            ensemble: spec.ensemble,
            amplitude: spec.amplitude,
            lambda: chunk[0].lambda,
            dim: spec.dim,
            n: chunk[0].n,
            k: chunk[0].k,
            delta,
            rho,
            trials: spec.trials,
            successes: chunk.iter().filter(|o| o.success).count(),
            seed: derive_seed(spec.seed, &[p as u64]),
        })
        .collect();
    Ok(TrialDataset { records })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitStatus {
    Converged,
    /// Outcomes split cleanly by `rho`; only a midpoint is available.
    Separated,
    /// No variation to fit.
    Flat,
}

impl fmt::Display for FitStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitStatus::Converged => "converged",
            FitStatus::Separated => "separated",
            FitStatus::Flat => "flat",
        })
    }
}

/// Fitted 50% point of `P(success) = logistic(a + b rho)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionEstimate {
    pub delta: f64,
    pub status: FitStatus,
    pub rho_hat: Option<f64>,
    /// `1 / |b|`.
    pub width: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub se_a: Option<f64>,
    pub se_b: Option<f64>,
    pub se_rho: Option<f64>,
}

impl TransitionEstimate {
    fn empty(delta: f64, status: FitStatus) -> Self {
        Self { delta, status, rho_hat: None, width: None, a: None, b: None, se_a: None, se_b: None, se_rho: None }
    }

    /// Two-sided normal confidence interval for `rho_hat`.
    pub fn confidence_interval(&self, level: f64) -> Option<(f64, f64)> {
        let q = crate::gauss::quantile(0.5 + level / 2.0);
        Some((self.rho_hat? - q * self.se_rho?, self.rho_hat? + q * self.se_rho?))
    }
}

/// Binomial observation `successes` out of `trials` at sparsity `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialPoint {
    pub rho: f64,
    pub trials: usize,
    pub successes: usize,
}

impl From<&TrialRecord> for BinomialPoint {
    fn from(r: &TrialRecord) -> Self {
        Self { rho: r.rho, trials: r.trials, successes: r.successes }
    }
}

const IRLS_MAX_ITER: usize = 100;
const IRLS_TOL: f64 = 1e-10;
const RIDGE: f64 = 1e-8;

fn separation_midpoint(points: &[BinomialPoint]) -> Option<f64> {
    let all_ok = points.iter().filter(|p| p.successes == p.trials).map(|p| p.rho).fold(f64::NEG_INFINITY, f64::max);
    let all_bad = points.iter().filter(|p| p.successes == 0).map(|p| p.rho).fold(f64::INFINITY, f64::min);
    (all_ok.is_finite() && all_bad.is_finite() && all_ok < all_bad).then_some(0.5 * (all_ok + all_bad))
}

fn is_separated(points: &[BinomialPoint]) -> bool {
    if !points.iter().all(|p| p.successes == 0 || p.successes == p.trials) {
        return false;
    }
    let max_ok = points.iter().filter(|p| p.successes == p.trials).map(|p| p.rho).fold(f64::NEG_INFINITY, f64::max);
    let min_bad = points.iter().filter(|p| p.successes == 0).map(|p| p.rho).fold(f64::INFINITY, f64::min);
    max_ok < min_bad
}

/// Invert a symmetric 2x2 matrix, damping the diagonal if it is singular.
fn invert2(h: [f64; 3]) -> [f64; 3] {
    let [mut a, b, mut c] = h;
    let mut det = a * c - b * b;
    if !(det.is_finite() && det.abs() > 1e-300) {
        a += RIDGE;
        c += RIDGE;
        det = a * c - b * b;
    }
    [c / det, -b / det, a / det]
}

/// Maximum-likelihood logistic regression of success counts on `rho`, by
/// iteratively reweighted least squares.
pub fn logistic_fit(delta: f64, points: &[BinomialPoint]) -> TransitionEstimate {
    let trials: usize = points.iter().map(|p| p.trials).sum();
    let successes: usize = points.iter().map(|p| p.successes).sum();
    let mut distinct: Vec<f64> = points.iter().filter(|p| p.trials > 0).map(|p| p.rho).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let proportions_equal = points
        .iter()
        .filter(|p| p.trials > 0)
        .all(|p| p.successes * points[0].trials.max(1) == points[0].successes * p.trials);
    if successes == 0 || successes == trials || distinct.len() < 2 || proportions_equal {
        return TransitionEstimate::empty(delta, FitStatus::Flat);
    }
    let separated = |delta| TransitionEstimate {
        rho_hat: separation_midpoint(points),
        ..TransitionEstimate::empty(delta, FitStatus::Separated)
    };
    if is_separated(points) {
        return separated(delta);
    }

    let pooled = successes as f64 / trials as f64;
    let mut beta = [(pooled / (1.0 - pooled)).ln(), 0.0];
    let mut cov = [0.0; 3];
    let mut converged = false;
    for _ in 0..IRLS_MAX_ITER {
        let (mut g0, mut g1) = (0.0, 0.0);
        let mut h = [0.0; 3];
        for p in points {
            let m = p.trials as f64;
            let pi = 1.0 / (1.0 + (-(beta[0] + beta[1] * p.rho)).exp());
            let resid = p.successes as f64 - m * pi;
            let w = m * pi * (1.0 - pi);
            g0 += resid;
            g1 += resid * p.rho;
            h[0] += w;
            h[1] += w * p.rho;
            h[2] += w * p.rho * p.rho;
        }
        cov = invert2(h);
        let step = [cov[0] * g0 + cov[1] * g1, cov[1] * g0 + cov[2] * g1];
        beta[0] += step[0];
        beta[1] += step[1];
        if !(beta[0].is_finite() && beta[1].is_finite()) {
            break;
        }
        if step[0].abs().max(step[1].abs()) < IRLS_TOL * (1.0 + beta[0].abs().max(beta[1].abs())) {
            converged = true;
            break;
        }
    }
    if !converged || beta[1] == 0.0 {
        return if separation_midpoint(points).is_some() {
            separated(delta)
        } else {
            TransitionEstimate::empty(delta, FitStatus::Flat)
        };
    }
    let [a, b] = beta;
    let rho_hat = -a / b;
    let var_rho = (cov[0] + 2.0 * rho_hat * cov[1] + rho_hat * rho_hat * cov[2]) / (b * b);
    TransitionEstimate {
        delta,
        status: FitStatus::Converged,
        rho_hat: Some(rho_hat),
        width: Some(1.0 / b.abs()),
        a: Some(a),
        b: Some(b),
        se_a: Some(cov[0].sqrt()),
        se_b: Some(cov[2].sqrt()),
        se_rho: Some(var_rho.max(0.0).sqrt()),
    }
}

/// Group records by `delta` (ascending) and fit each slice.
pub fn transition_curve(dataset: &TrialDataset) -> Vec<TransitionEstimate> {
    let mut deltas: Vec<f64> = dataset.records.iter().map(|r| r.delta).collect();
    deltas.sort_by(f64::total_cmp);
    deltas.dedup();
    deltas
        .into_iter()
        .map(|d| {
            let pts: Vec<BinomialPoint> = dataset.records.iter().filter(|r| r.delta == d).map(Into::into).collect();
            logistic_fit(d, &pts)
        })
        .collect()
}

/// Dataset of one sweep at a fixed threshold control, from one problem suite.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaRun {
    pub lambda: f64,
    /// Name of the problem suite (ensemble, coefficients, ...).
    pub suite: String,
    pub dataset: TrialDataset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TunedPoint {
    pub delta: f64,
    pub lambda: f64,
    pub rho_hat: f64,
    /// Worst-suite transition at each candidate `lambda` (absent if any
    /// suite failed to give a converged fit).
    pub candidates: Vec<(f64, Option<f64>)>,
}

/// Pick the `lambda` with the highest fitted transition at each `delta`.
/// With several suites the transition at each `lambda` is first minimised
/// over suites.
pub fn tune_lambda(runs: &[LambdaRun]) -> Result<Vec<TunedPoint>> {
    let mut lambdas: Vec<f64> = runs.iter().map(|r| r.lambda).collect();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    let mut suites: Vec<&str> = runs.iter().map(|r| r.suite.as_str()).collect();
    suites.sort_unstable();
    suites.dedup();
    let fits: Vec<(f64, &str, Vec<TransitionEstimate>)> =
        runs.iter().map(|r| (r.lambda, r.suite.as_str(), transition_curve(&r.dataset))).collect();
    let mut deltas: Vec<f64> = fits.iter().flat_map(|f| f.2.iter().map(|e| e.delta)).collect();
    deltas.sort_by(f64::total_cmp);
    deltas.dedup();

    let mut out = Vec::with_capacity(deltas.len());
    for &delta in &deltas {
        let candidates: Vec<(f64, Option<f64>)> = lambdas
            .iter()
            .map(|&lam| {
                let worst = suites.iter().try_fold(f64::INFINITY, |acc, s| {
                    let est = fits
                        .iter()
                        .filter(|f| f.0 == lam && f.1 == *s)
                        .flat_map(|f| f.2.iter())
                        .find(|e| e.delta == delta)?;
                    match est.status {
                        FitStatus::Converged => Some(acc.min(est.rho_hat?)),
                        _ => None,
                    }
                });
                (lam, worst)
            })
            .collect();
        let best = candidates
            .iter()
            .filter_map(|&(l, r)| Some((l, r?)))
            .fold(None, |acc: Option<(f64, f64)>, (l, r)| match acc {
                Some((_, br)) if br >= r => acc,
                _ => Some((l, r)),
            })
            .ok_or_else(|| Error::NoEstimate(format!("no converged fit at delta={delta}")))?;
        out.push(TunedPoint { delta, lambda: best.0, rho_hat: best.1, candidates });
    }
    Ok(out)
}
