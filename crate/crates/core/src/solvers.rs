//! AMP, iterative soft thresholding and full message passing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{axpy, norm2, LinearOperator, ProblemInstance};
use crate::state_evolution::lambda_opt;
use crate::thresholds::{eta, eta_prime, Case};

/// Largest `N * n` message count `mp_solve` accepts.
pub const MP_MESSAGE_LIMIT: usize = 40_000_000;
/// Abort once the noise estimate exceeds its starting value by this factor.
pub const DIVERGENCE_FACTOR: f64 = 1e6;
/// Relative residual under which a fixed-length run counts as converged.
pub const FIXED_T_TOL: f64 = 1e-6;
const MAD_SCALE: f64 = 0.6745;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Amp,
    Ist,
    Mp,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Amp => "amp",
            Algorithm::Ist => "ist",
            Algorithm::Mp => "mp",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amp" => Ok(Algorithm::Amp),
            "ist" => Ok(Algorithm::Ist),
            "mp" => Ok(Algorithm::Mp),
            _ => Err(Error::InvalidParameter(format!("unknown algorithm '{s}' (expected amp, ist or mp)"))),
        }
    }
}

/// Threshold control: a fixed value, or the optimal one for the realised
/// undersampling ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LambdaRepr", into = "LambdaRepr")]
pub enum Lambda {
    Optimal,
    Value(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LambdaRepr {
    Num(f64),
    Word(String),
}

impl TryFrom<LambdaRepr> for Lambda {
    type Error = Error;

    fn try_from(r: LambdaRepr) -> Result<Self> {
        match r {
            LambdaRepr::Num(v) => Lambda::value(v),
            LambdaRepr::Word(s) => s.parse(),
        }
    }
}

impl From<Lambda> for LambdaRepr {
    fn from(l: Lambda) -> Self {
        match l {
            Lambda::Optimal => LambdaRepr::Word("optimal".into()),
            Lambda::Value(v) => LambdaRepr::Num(v),
        }
    }
}

impl Lambda {
    pub fn value(v: f64) -> Result<Self> {
        if v >= 0.0 && v.is_finite() {
            Ok(Lambda::Value(v))
        } else {
            Err(Error::InvalidParameter(format!("lambda={v} must be finite and >= 0")))
        }
    }

    pub fn resolve(self, delta: f64, case: Case) -> f64 {
        match self {
            Lambda::Value(v) => v,
            Lambda::Optimal => lambda_opt(delta, case).unwrap_or(0.0),
        }
    }
}

impl FromStr for Lambda {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "optimal" {
            return Ok(Lambda::Optimal);
        }
        let v = s
            .parse::<f64>()
            .map_err(|_| Error::InvalidParameter(format!("lambda '{s}' is neither a number nor 'optimal'")))?;
        Lambda::value(v)
    }
}

impl fmt::Display for Lambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lambda::Optimal => f.write_str("optimal"),
            Lambda::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Run exactly `t_max` iterations.
    FixedT,
    /// Stop once `|y - A x| / |y|` drops below the given value.
    RelResidual(f64),
    /// Stop once the true per-coordinate MSE drops to the given value.
    MseTarget(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaEstimator {
    #[default]
    ResidualNorm,
    Mad,
}

impl FromStr for SigmaEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "residual_norm" | "residual" => Ok(SigmaEstimator::ResidualNorm),
            "mad" => Ok(SigmaEstimator::Mad),
            _ => Err(Error::InvalidParameter(format!("unknown sigma estimator '{s}' (expected residual or mad)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub case: Case,
    pub lambda: Lambda,
    pub t_max: usize,
    pub stop: StopRule,
    pub sigma_estimator: SigmaEstimator,
    /// Step size on the matched filter for IST. `None` picks `1 / |A|^2`;
    /// AMP and MP always use a unit step.
    #[serde(default)]
    pub relaxation: Option<f64>,
    /// Iterations at which to record the interference vector.
    #[serde(default)]
    pub mai_at: Vec<usize>,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, case: Case, lambda: Lambda, t_max: usize) -> Self {
        Self {
            algorithm,
            case,
            lambda,
            t_max,
            stop: StopRule::FixedT,
            sigma_estimator: SigmaEstimator::ResidualNorm,
            relaxation: None,
            mai_at: Vec::new(),
        }
    }

    pub fn with_stop(mut self, stop: StopRule) -> Self {
        self.stop = stop;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_max == 0 {
            return Err(Error::InvalidParameter("t_max must be at least 1".into()));
        }
        if let Some(k) = self.relaxation {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::InvalidParameter(format!("relaxation {k} must be positive")));
            }
        }
        match self.stop {
            StopRule::RelResidual(c) if !(c > 0.0 && c < 1.0) => {
                Err(Error::InvalidParameter(format!("relative residual target {c} outside (0,1)")))
            }
            StopRule::MseTarget(m) if !(m.is_finite() && m > 0.0) => {
                Err(Error::InvalidParameter(format!("mse target {m} must be > 0")))
            }
            _ => Ok(()),
        }
    }
}

/// Error statistics of an estimate against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Observables {
    pub mse: f64,
    /// Over the nonzeros of the truth; absent if there are none.
    pub msenz: Option<f64>,
    /// Over the zeros of the truth; absent if there are none.
    pub msez: Option<f64>,
    /// Missed detections among the nonzeros.
    pub mdr: Option<f64>,
    /// False alarms among the zeros.
    pub far: Option<f64>,
}

pub fn observe(x: &[f64], x0: &[f64]) -> Observables {
    assert_eq!(x.len(), x0.len(), "estimate and truth differ in length");
    let (mut se_nz, mut se_z, mut k, mut missed, mut alarms) = (0.0, 0.0, 0usize, 0usize, 0usize);
    for (&a, &b) in x.iter().zip(x0) {
        let e = (a - b) * (a - b);
        if b != 0.0 {
            k += 1;
            se_nz += e;
            missed += (a == 0.0) as usize;
        } else {
            se_z += e;
            alarms += (a != 0.0) as usize;
        }
    }
    let dim = x.len();
    let zeros = dim - k;
    let ratio = |num: f64, den: usize| if den > 0 { Some(num / den as f64) } else { None };
    Observables {
        mse: if dim > 0 { (se_nz + se_z) / dim as f64 } else { 0.0 },
        msenz: ratio(se_nz, k),
        msez: ratio(se_z, zeros),
        mdr: ratio(missed as f64, k),
        far: ratio(alarms as f64, zeros),
    }
}

/// One row of a solver trace, describing the estimate `x^t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    /// Estimated RMSE of `x^t`, i.e. `sqrt(delta)` times the noise estimate.
    pub sigma_hat: f64,
    pub obs: Observables,
    /// `|y - A x^t|`.
    pub residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    /// `(t, MAI_t)` for each requested iteration that was reached.
    pub mai: Vec<(usize, Vec<f64>)>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn mai_at(&self, t: usize) -> Option<&[f64]> {
        self.mai.iter().find(|(s, _)| *s == t).map(|(_, v)| v.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub x_hat: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub lambda: f64,
    pub trace: IterationTrace,
}

/// Effective noise level of a residual.
pub fn estimate_tau(z: &[f64], estimator: SigmaEstimator) -> f64 {
    if z.is_empty() {
        return 0.0;
    }
    match estimator {
        SigmaEstimator::ResidualNorm => norm2(z) / (z.len() as f64).sqrt(),
        SigmaEstimator::Mad => {
            let mut a: Vec<f64> = z.iter().map(|v| v.abs()).collect();
            let m = a.len() / 2;
            let (lower, upper, _) = a.select_nth_unstable_by(m, f64::total_cmp);
            let median = if z.len() % 2 == 1 {
                *upper
            } else {
                let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                0.5 * (below + *upper)
            };
            median / MAD_SCALE
        }
    }
}

/// `(A^T A - I)(x - x0)`.
pub fn extract_mai(instance: &ProblemInstance, x: &[f64]) -> Vec<f64> {
    let d: Vec<f64> = x.iter().zip(&instance.x0).map(|(a, b)| a - b).collect();
    let mut out = instance.operator.adjoint(&instance.operator.apply(&d));
    for (o, v) in out.iter_mut().zip(&d) {
        *o -= v;
    }
    out
}

fn realised_delta(instance: &ProblemInstance) -> f64 {
    instance.n as f64 / instance.dim as f64
}

struct Monitor<'a> {
    instance: &'a ProblemInstance,
    config: &'a SolverConfig,
    y_norm: f64,
    tau0: f64,
    trace: IterationTrace,
}

enum Step {
    Continue,
    Stop { converged: bool },
}

impl<'a> Monitor<'a> {
    fn new(instance: &'a ProblemInstance, config: &'a SolverConfig, tau0: f64) -> Self {
        Self { instance, config, y_norm: norm2(&instance.y), tau0, trace: IterationTrace::default() }
    }

    /// Record `x^t` and decide whether to stop.
    fn record(&mut self, t: usize, x: &[f64], tau: f64, residual: f64, settled: bool) -> Result<Step> {
        if !tau.is_finite() || tau > DIVERGENCE_FACTOR * self.tau0 || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { iteration: t });
        }
        let obs = observe(x, &self.instance.x0);
        let sigma_hat = realised_delta(self.instance).sqrt() * tau;
        self.trace.records.push(IterationRecord { t, sigma_hat, obs, residual });
        if self.config.mai_at.contains(&t) {
            self.trace.mai.push((t, extract_mai(self.instance, x)));
        }
        let rel = if self.y_norm > 0.0 { residual / self.y_norm } else { 0.0 };
        if settled {
            return Ok(Step::Stop { converged: true });
        }
        let reached = match self.config.stop {
            StopRule::FixedT => None,
            StopRule::RelResidual(c) => Some(rel < c),
            StopRule::MseTarget(m) => Some(obs.mse <= m),
        };
        match reached {
            Some(true) => Ok(Step::Stop { converged: true }),
            _ if t >= self.config.t_max => Ok(Step::Stop { converged: reached.unwrap_or(rel <= FIXED_T_TOL) }),
            _ => Ok(Step::Continue),
        }
    }

    fn finish(self, x_hat: Vec<f64>, converged: bool, lambda: f64) -> SolveResult {
        SolveResult { iterations: self.trace.records.len(), x_hat, converged, lambda, trace: self.trace }
    }
}

/// Largest eigenvalue of `A^T A` by power iteration from a fixed start.
pub fn operator_norm_sq(op: &LinearOperator, iterations: usize) -> f64 {
    let dim = op.dim();
    let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + (i % 7) as f64 / 7.0).collect();
    let mut est = 0.0;
    for _ in 0..iterations {
        let nv = norm2(&v);
        v.iter_mut().for_each(|e| *e /= nv);
        let w = op.adjoint(&op.apply(&v));
        est = norm2(&w);
        v = w;
    }
    est
}

const POWER_ITERATIONS: usize = 50;

/// Shared AMP / IST loop; `memory` toggles the Onsager correction and a
/// unit step.
fn thresholding_loop(instance: &ProblemInstance, config: &SolverConfig, memory: bool) -> Result<SolveResult> {
    config.validate()?;
    let op = &instance.operator;
    let (n, dim) = (instance.n, instance.dim);
    let delta = realised_delta(instance);
    let case = config.case;
    let lambda = config.lambda.resolve(delta, case);
    let sd_lambda = lambda * delta.sqrt();
    let step =
        if memory { 1.0 } else { config.relaxation.unwrap_or_else(|| 1.0 / operator_norm_sq(op, POWER_ITERATIONS)) };

    let mut x = vec![0.0; dim];
    let mut z = instance.y.clone();
    let mut pseudo = vec![0.0; dim];
    let mut r = vec![0.0; n];
    let mut tau = estimate_tau(&z, config.sigma_estimator);
    let mut monitor = Monitor::new(instance, config, tau);

    for t in 1.. {
        let theta = step * sd_lambda * tau;
        op.adjoint_into(&z, &mut pseudo);
        let mut active = 0usize;
        for (p, xi) in pseudo.iter_mut().zip(x.iter_mut()) {
            *p = *xi + step * *p;
            *xi = eta(*p, theta, case);
            if memory {
                active += (eta_prime(*p, theta, case) == 1.0) as usize;
            }
        }
        op.apply_into(&x, &mut r);
        for (ra, ya) in r.iter_mut().zip(&instance.y) {
            *ra = ya - *ra;
        }
        let residual = norm2(&r);
        if memory {
            let onsager = active as f64 / dim as f64 / delta;
            for (za, ra) in z.iter_mut().zip(&r) {
                *za = ra + onsager * *za;
            }
        } else {
            z.copy_from_slice(&r);
        }
        tau = estimate_tau(&z, config.sigma_estimator);
        let settled = z.iter().all(|v| *v == 0.0);
        if let Step::Stop { converged } = monitor.record(t, &x, tau, residual, settled)? {
            return Ok(monitor.finish(x, converged, lambda));
        }
    }
    unreachable!("the loop only exits through the stop rule")
}

/// Approximate message passing.
pub fn amp_solve(instance: &ProblemInstance, config: &SolverConfig) -> Result<SolveResult> {
    thresholding_loop(instance, config, true)
}

/// Iterative soft thresholding: the AMP loop without the memory term, with
/// step `config.relaxation` on the matched filter.
pub fn ist_solve(instance: &ProblemInstance, config: &SolverConfig) -> Result<SolveResult> {
    thresholding_loop(instance, config, false)
}

/// Full message passing on the complete bipartite graph, `N n` messages
/// in each direction.
pub fn mp_solve(instance: &ProblemInstance, config: &SolverConfig) -> Result<SolveResult> {
    mp_solve_with_limit(instance, config, MP_MESSAGE_LIMIT)
}

pub fn mp_solve_with_limit(instance: &ProblemInstance, config: &SolverConfig, limit: usize) -> Result<SolveResult> {
    config.validate()?;
    let (n, dim) = (instance.n, instance.dim);
    if n.saturating_mul(dim) > limit {
        return Err(Error::ResourceLimit(format!("{n} x {dim} messages exceed the limit of {limit}")));
    }
    let a = instance.operator.to_dense();
    let delta = realised_delta(instance);
    let case = config.case;
    let lambda = config.lambda.resolve(delta, case);
    let sd_lambda = lambda * delta.sqrt();
    let y = &instance.y;

    // msg[a * dim + i] is the variable-to-factor message x_{i -> a}.
    let mut msg = vec![0.0; n * dim];
    let mut r = y.clone();
    let mut s = vec![0.0; dim];
    let mut x = vec![0.0; dim];
    let mut ax = vec![0.0; n];
    let mut tau = estimate_tau(&r, config.sigma_estimator);
    let mut monitor = Monitor::new(instance, config, tau);

    for t in 1.. {
        let theta = sd_lambda * tau;
        // Factor-to-variable messages are z_{a -> i} = r_a + A_ai x_{i -> a}.
        s.iter_mut().for_each(|v| *v = 0.0);
        for (row, (m, &ra)) in a.chunks_exact(dim).zip(msg.chunks_exact(dim).zip(&r)) {
            for ((si, &aij), &mij) in s.iter_mut().zip(row).zip(m) {
                *si += aij * (ra + aij * mij);
            }
        }
        for (xi, &si) in x.iter_mut().zip(&s) {
            *xi = eta(si, theta, case);
        }
        for ((row, m), (ra, ya)) in a.chunks_exact(dim).zip(msg.chunks_exact_mut(dim)).zip(r.iter_mut().zip(y)) {
            let za = *ra;
            let mut fitted = 0.0;
            for ((mij, &aij), &si) in m.iter_mut().zip(row).zip(&s) {
                *mij = eta(si - aij * (za + aij * *mij), theta, case);
                fitted += aij * *mij;
            }
            *ra = ya - fitted;
        }
        instance.operator.apply_into(&x, &mut ax);
        axpy(-1.0, y, &mut ax);
        let residual = norm2(&ax);
        tau = estimate_tau(&r, config.sigma_estimator);
        let settled = r.iter().all(|v| *v == 0.0);
        if let Step::Stop { converged } = monitor.record(t, &x, tau, residual, settled)? {
            return Ok(monitor.finish(x, converged, lambda));
        }
    }
    unreachable!("the loop only exits through the stop rule")
}

/// Dispatch on `config.algorithm`.
pub fn solve(instance: &ProblemInstance, config: &SolverConfig) -> Result<SolveResult> {
    match config.algorithm {
        Algorithm::Amp => amp_solve(instance, config),
        Algorithm::Ist => ist_solve(instance, config),
        Algorithm::Mp => mp_solve(instance, config),
    }
}

/// `|x - x0| / |x0|`, or `|x|` when the truth is zero.
pub fn relative_error(x: &[f64], x0: &[f64]) -> f64 {
    let err = x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let scale = norm2(x0);
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}
