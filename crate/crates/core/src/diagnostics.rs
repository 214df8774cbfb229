//! Checks of the state-evolution predictions against simulation: formal
//! vs. empirical traces, interference Gaussianity and iteration timing.

use std::time::{Duration, Instant};

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss;
use crate::operators::{gen_instance, Amplitude, EnsembleKind, InstanceSpec, ProblemInstance};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::solvers::{amp_solve, Algorithm, Lambda, Observables, SolveResult, SolverConfig, StopRule};
use crate::state_evolution::{formal_observables, FormalObservables, PriorShape, SEParams, SignalPrior};
use crate::thresholds::Case;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSpec {
    pub delta: f64,
    pub rho: f64,
    pub dim: usize,
    pub trials: usize,
    pub case: Case,
    pub lambda: Lambda,
    pub t_max: usize,
    pub ensemble: EnsembleKind,
    pub amplitude: Amplitude,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub t: usize,
    pub formal: FormalObservables,
    /// Means across trials.
    pub empirical: Observables,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTrace {
    /// Realised `n / N`.
    pub delta: f64,
    /// Realised `k / n`.
    pub rho: f64,
    pub dim: usize,
    pub trials: usize,
    pub case: Case,
    pub lambda: f64,
    pub rows: Vec<ComparisonRow>,
}

fn mean_option(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (s, c) = values.flatten().fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (c > 0).then(|| s / c as f64)
}

/// Run `trials` AMP reconstructions and pair their averaged observables
/// with the state-evolution predictions for the realised `(delta, rho)`.
pub fn compare_se(spec: &CompareSpec) -> Result<ComparisonTrace> {
    if spec.trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let shape = PriorShape::try_from(spec.amplitude)?;
    let instances: Vec<ProblemInstance> = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            gen_instance(&InstanceSpec {
                delta: spec.delta,
                rho: spec.rho,
                dim: spec.dim,
                ensemble: spec.ensemble,
                amplitude: spec.amplitude,
                case: spec.case,
                seed: derive_seed(spec.seed, &[t as u64]),
            })
        })
        .collect::<Result<_>>()?;
    let (n, k, dim) = (instances[0].n, instances[0].k, spec.dim);
    let delta = n as f64 / dim as f64;
    let lambda = spec.lambda.resolve(delta, spec.case);
    let config = SolverConfig::new(Algorithm::Amp, spec.case, Lambda::Value(lambda), spec.t_max);
    let results: Vec<SolveResult> = instances.par_iter().map(|inst| amp_solve(inst, &config)).collect::<Result<_>>()?;

    let prior = SignalPrior::canonical(spec.case, k as f64 / dim as f64, shape)?;
    let params = SEParams::with_prior(delta, k as f64 / n as f64, lambda, prior)?;
    let mut sigma2 = params.second_moment();
    let mut rows = Vec::with_capacity(spec.t_max);
    for t in 1..=spec.t_max {
        let formal = formal_observables(sigma2.sqrt(), &params);
        sigma2 = formal.mse;
        // A run that stopped early sits at a fixed point; carry its last row.
        let recs: Vec<&Observables> =
            results.iter().map(|r| &r.trace.records[(t - 1).min(r.trace.len() - 1)].obs).collect();
        let empirical = Observables {
            mse: recs.iter().map(|o| o.mse).sum::<f64>() / recs.len() as f64,
            msenz: mean_option(recs.iter().map(|o| o.msenz)),
            msez: mean_option(recs.iter().map(|o| o.msez)),
            mdr: mean_option(recs.iter().map(|o| o.mdr)),
            far: mean_option(recs.iter().map(|o| o.far)),
        };
        rows.push(ComparisonRow { t, formal, empirical });
    }
    Ok(ComparisonTrace { delta, rho: k as f64 / n as f64, dim, trials: spec.trials, case: spec.case, lambda, rows })
}

/// Normality summary of one interference vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianityReport {
    pub iteration: usize,
    pub sample_size: usize,
    pub mean: f64,
    pub sd: f64,
    /// Kolmogorov-Smirnov distance to the fitted normal.
    pub ks: f64,
    /// Critical value of `ks` at the requested level.
    pub critical: f64,
    pub rejected: bool,
    /// `(normal quantile, sorted sample value)` pairs.
    pub qq: Vec<(f64, f64)>,
}

/// Sample mean, sample sd and the KS distance to `N(mean, sd^2)`. The input
/// is sorted in place.
pub fn ks_fitted_normal(sample: &mut [f64]) -> (f64, f64, f64) {
    let n = sample.len();
    if n == 0 {
        return (0.0, 0.0, 0.0);
    }
    let mean = sample.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 { (sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
    sample.sort_by(f64::total_cmp);
    if sd == 0.0 {
        return (mean, 0.0, 0.0);
    }
    let nf = n as f64;
    let d = sample.iter().enumerate().fold(0.0f64, |d, (i, v)| {
        let f = gauss::cdf((v - mean) / sd);
        d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf)
    });
    (mean, sd, d)
}

/// Upper `alpha` quantile of the KS distance when mean and sd are fitted
/// from the same normal sample of size `n`, by simulation.
pub fn lilliefors_critical(n: usize, alpha: f64, reps: usize, seed: u64) -> f64 {
    let mut stats: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(seed, &[stream::CALIBRATION, n as u64, r as u64]));
            let mut s: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            ks_fitted_normal(&mut s).2
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let idx = (((1.0 - alpha) * reps as f64).ceil() as usize).clamp(1, reps) - 1;
    stats[idx]
}

/// Replications behind each simulated critical value.
pub const CALIBRATION_REPS: usize = 2000;

/// Summarise one interference vector against a precomputed critical value.
pub fn gaussianity_report(iteration: usize, mai: &[f64], critical: f64) -> GaussianityReport {
    let mut s = mai.to_vec();
    let (mean, sd, ks) = ks_fitted_normal(&mut s);
    let n = s.len() as f64;
    let qq = s.iter().enumerate().map(|(i, v)| (gauss::quantile((i as f64 + 0.5) / n), *v)).collect();
    GaussianityReport { iteration, sample_size: s.len(), mean, sd, ks, critical, rejected: ks > critical, qq }
}

/// Run AMP on `instance` and test the interference vector for normality at
/// each requested iteration, at level `alpha`.
pub fn mai_gaussianity(
    instance: &ProblemInstance,
    config: &SolverConfig,
    iterations: &[usize],
    alpha: f64,
) -> Result<Vec<GaussianityReport>> {
    let last = *iterations.iter().max().ok_or_else(|| Error::InvalidParameter("no iterations requested".into()))?;
    if iterations.contains(&0) {
        return Err(Error::IterationOutOfRange { requested: 0, executed: 0 });
    }
    let mut cfg = config.clone();
    cfg.t_max = last;
    cfg.stop = StopRule::FixedT;
    cfg.mai_at = iterations.to_vec();
    let res = amp_solve(instance, &cfg)?;
    let critical = lilliefors_critical(instance.dim, alpha, CALIBRATION_REPS, instance.seed);
    iterations
        .iter()
        .map(|&t| {
            let mai =
                res.trace.mai_at(t).ok_or(Error::IterationOutOfRange { requested: t, executed: res.iterations })?;
            Ok(gaussianity_report(t, mai, critical))
        })
        .collect()
}

/// MSE targets `12e-5 * 2^(4 - l)` for `l = 0..=3`.
pub fn default_timing_targets() -> Vec<f64> {
    (0..4).map(|l| 12e-5 * 2f64.powi(4 - l)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSpec {
    pub delta: f64,
    pub rho: f64,
    pub dims: Vec<usize>,
    pub targets: Vec<f64>,
    pub trials: usize,
    pub case: Case,
    pub lambda: Lambda,
    pub t_max: usize,
    pub ensemble: EnsembleKind,
    pub seed: u64,
    /// Each solve is repeated until this much time has accumulated, to
    /// resolve very short runs.
    pub min_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub dim: usize,
    pub target: f64,
    pub mean_iterations: f64,
    pub mean_seconds: f64,
    /// Trials that met the target within `t_max`.
    pub reached: usize,
    pub trials: usize,
}

/// Iterations and solve-loop wall time to reach each MSE target, averaged
/// over trials. Runs sequentially; operator construction is not timed.
pub fn timing_study(spec: &TimingSpec) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::new();
    for (di, &dim) in spec.dims.iter().enumerate() {
        let mut iters = vec![0.0; spec.targets.len()];
        let mut secs = vec![0.0; spec.targets.len()];
        let mut reached = vec![0usize; spec.targets.len()];
        for trial in 0..spec.trials {
            let inst = gen_instance(&InstanceSpec {
                delta: spec.delta,
                rho: spec.rho,
                dim,
                ensemble: spec.ensemble,
                amplitude: Amplitude::Unit,
                case: spec.case,
                seed: derive_seed(spec.seed, &[di as u64, trial as u64]),
            })?;
            for (j, &target) in spec.targets.iter().enumerate() {
                let cfg = SolverConfig::new(Algorithm::Amp, spec.case, spec.lambda, spec.t_max)
                    .with_stop(StopRule::MseTarget(target));
                let mut reps = 0u32;
                let start = Instant::now();
                let res = loop {
                    let res = amp_solve(&inst, &cfg)?;
                    reps += 1;
                    if start.elapsed() >= Duration::from_secs_f64(spec.min_seconds) {
                        break res;
                    }
                };
                secs[j] += start.elapsed().as_secs_f64() / reps as f64;
                iters[j] += res.iterations as f64;
                reached[j] += res.converged as usize;
            }
        }
        for (j, &target) in spec.targets.iter().enumerate() {
            rows.push(TimingRow {
                dim,
                target,
                mean_iterations: iters[j] / spec.trials as f64,
                mean_seconds: secs[j] / spec.trials as f64,
                reached: reached[j],
                trials: spec.trials,
            });
        }
    }
    Ok(rows)
}
