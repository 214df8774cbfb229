use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use ampcs_core::diagnostics::{compare_se, mai_gaussianity, timing_study, CompareSpec, TimingSpec};
use ampcs_core::io::{
    format_num, format_opt, write_comparison, write_dataset, write_minimax_curve, write_qq, write_se_curve,
    write_table, write_timing, write_trace, write_transitions, Metadata,
};
use ampcs_core::minimax::minimax_risk;
use ampcs_core::phasediag::{
    run_grid, transition_curve, tune_lambda, GridSpec, LambdaRun, TransitionEstimate, TrialDataset,
};
use ampcs_core::rng::derive_seed;
use ampcs_core::solvers::{relative_error, solve, Lambda, SolverConfig, StopRule};
use ampcs_core::state_evolution::rho_se;
use ampcs_core::{gen_instance, Amplitude, Case, EnsembleKind, InstanceSpec};
use rayon::prelude::*;

use crate::config::{
    GridArgs, PhaseArgs, QqMaiArgs, SeCurveArgs, SePredictArgs, SolveArgs, TimingArgs, TuneArgs, UniversalityArgs,
};
use crate::Failure;

/// Settings every command sees.
pub struct Ctx {
    pub seed: u64,
    pub case: Case,
    pub out: Option<PathBuf>,
    /// Stamped into every output file.
    pub meta: Metadata,
}

impl Ctx {
    fn out_or(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

/// `-` writes to stdout.
fn open_file(path: &Path) -> Result<Box<dyn Write>, Failure> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(io::stdout().lock()));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    let f = File::create(path).map_err(|e| Failure::io(path, e))?;
    Ok(Box::new(BufWriter::new(f)))
}

fn open_dir(path: &Path) -> Result<PathBuf, Failure> {
    fs::create_dir_all(path).map_err(|e| Failure::io(path, e))?;
    Ok(path.to_path_buf())
}

fn grid_spec(
    ctx: &Ctx,
    grid: &GridArgs,
    lambda: Lambda,
    ensemble: EnsembleKind,
    coef: Amplitude,
    seed: u64,
) -> GridSpec {
    GridSpec {
        case: ctx.case,
        deltas: grid.deltas(),
        design: grid.design(),
        trials: grid.trials,
        dim: grid.dim,
        t_max: grid.t_max,
        tol: grid.tol,
        success: grid.success,
        algorithm: grid.algorithm,
        lambda,
        relaxation: grid.relaxation,
        ensemble,
        amplitude: coef,
        seed,
    }
}

fn fit_row(f: &TransitionEstimate) -> [String; 5] {
    [format_num(f.delta), format_opt(f.rho_hat), format_opt(f.width), format_opt(f.se_rho), f.status.to_string()]
}

fn print_fits(case: Case, label: &str, fits: &[TransitionEstimate]) {
    println!("{label:<20} {:>7} {:>8} {:>8} {:>19}  status", "delta", "rho_se", "rho_hat", "95% CI");
    for f in fits {
        let ci = f.confidence_interval(0.95).map_or(String::new(), |(lo, hi)| format!("[{lo:.4}, {hi:.4}]"));
        let rho_hat = f.rho_hat.map_or(String::from("-"), |r| format!("{r:.4}"));
        println!("{:<20} {:>7.4} {:>8.4} {rho_hat:>8} {ci:>19}  {}", "", f.delta, rho_se(f.delta, case).rho, f.status);
    }
}

pub fn se_curve(ctx: &Ctx, args: &SeCurveArgs) -> Result<(), Failure> {
    let mut grid =
        if args.deltas.is_empty() { ampcs_core::phasediag::default_delta_grid() } else { args.deltas.clone() };
    if let Some(bad) = grid.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
        return Err(Failure::invalid(format!("grid value {bad} is outside (0, 1]")));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut w = open_file(&ctx.out_or("se_curve.csv"))?;
    if args.minimax {
        let curve: Vec<_> = grid.par_iter().map(|&eps| minimax_risk(eps, ctx.case)).collect();
        write_minimax_curve(&mut w, &ctx.meta, &curve)?;
    } else {
        let curve: Vec<_> = grid.par_iter().map(|&d| rho_se(d, ctx.case)).collect();
        write_se_curve(&mut w, &ctx.meta, &curve)?;
    }
    w.flush().map_err(|e| Failure::io(Path::new("output"), e))
}

pub fn phase(ctx: &Ctx, args: &PhaseArgs) -> Result<(), Failure> {
    let spec = grid_spec(ctx, &args.grid, args.lambda, args.ensemble, args.coef, ctx.seed);
    let data = run_grid(&spec)?;
    let fits = transition_curve(&data);
    let dir = open_dir(&ctx.out_or("phase"))?;
    write_dataset(open_file(&dir.join("dataset.csv"))?, &ctx.meta, &data)?;
    write_transitions(open_file(&dir.join("transitions.csv"))?, &ctx.meta, ctx.case, &fits)?;
    print_fits(ctx.case, &format!("{}/{}", args.ensemble, args.coef), &fits);
    Ok(())
}

pub fn solve_one(ctx: &Ctx, args: &SolveArgs) -> Result<(), Failure> {
    let inst = gen_instance(&InstanceSpec {
        delta: args.delta,
        rho: args.rho,
        dim: args.dim,
        ensemble: args.ensemble,
        amplitude: args.coef,
        case: ctx.case,
        seed: ctx.seed,
    })?;
    let stop = match (args.rel_residual, args.mse_target) {
        (Some(r), _) => StopRule::RelResidual(r),
        (None, Some(m)) => StopRule::MseTarget(m),
        (None, None) => StopRule::FixedT,
    };
    let mut cfg = SolverConfig::new(args.algorithm, ctx.case, args.lambda, args.t_max).with_stop(stop);
    cfg.sigma_estimator = args.sigma;
    cfg.relaxation = args.relaxation;
    let res = solve(&inst, &cfg)?;
    let meta = ctx.meta.clone().with("n", inst.n).with("k", inst.k).with("lambda_used", res.lambda);
    write_trace(open_file(&ctx.out_or("trace.csv"))?, &meta, &res.trace)?;
    eprintln!(
        "{} N={} n={} k={}: {} iterations, converged={}, relative error {:.3e}",
        args.algorithm,
        inst.dim,
        inst.n,
        inst.k,
        res.iterations,
        res.converged,
        relative_error(&res.x_hat, &inst.x0)
    );
    Ok(())
}

pub fn se_predict(ctx: &Ctx, args: &SePredictArgs) -> Result<(), Failure> {
    let trace = compare_se(&CompareSpec {
        delta: args.delta,
        rho: args.rho,
        dim: args.dim,
        trials: args.trials,
        case: ctx.case,
        lambda: args.lambda,
        t_max: args.t_max,
        ensemble: args.ensemble,
        amplitude: args.coef,
        seed: ctx.seed,
    })?;
    write_comparison(open_file(&ctx.out_or("se_predict.csv"))?, &ctx.meta, &trace)?;
    Ok(())
}

pub fn timing(ctx: &Ctx, args: &TimingArgs) -> Result<(), Failure> {
    let rows = timing_study(&TimingSpec {
        delta: args.delta,
        rho: args.rho,
        dims: args.dims.clone(),
        targets: args.targets(),
        trials: args.trials,
        case: ctx.case,
        lambda: args.lambda,
        t_max: args.t_max,
        ensemble: args.ensemble,
        seed: ctx.seed,
        min_seconds: args.min_seconds,
    })?;
    write_timing(open_file(&ctx.out_or("timing.csv"))?, &ctx.meta, &rows)?;
    Ok(())
}

pub fn qq_mai(ctx: &Ctx, args: &QqMaiArgs) -> Result<(), Failure> {
    let inst = gen_instance(&InstanceSpec {
        delta: args.delta,
        rho: args.rho,
        dim: args.dim,
        ensemble: args.ensemble,
        amplitude: args.coef,
        case: ctx.case,
        seed: ctx.seed,
    })?;
    let cfg = SolverConfig::new(ampcs_core::solvers::Algorithm::Amp, ctx.case, args.lambda, 1);
    let reports = mai_gaussianity(&inst, &cfg, &args.iterations, args.alpha)?;
    let dir = open_dir(&ctx.out_or("qq_mai"))?;
    for r in &reports {
        write_qq(open_file(&dir.join(format!("qq_t{}.csv", r.iteration)))?, &ctx.meta, r)?;
    }
    let rows = reports
        .iter()
        .map(|r| {
            vec![
                r.iteration.to_string(),
                r.sample_size.to_string(),
                format_num(r.mean),
                format_num(r.sd),
                format_num(r.ks),
                format_num(r.critical),
                r.rejected.to_string(),
            ]
        })
        .collect();
    let header = ["iteration", "sample_size", "mean", "sd", "ks", "critical", "rejected"];
    write_table(open_file(&dir.join("summary.csv"))?, &ctx.meta, &header, rows)?;
    println!("{:>9} {:>10} {:>8} {:>8}  normal", "iteration", "sd", "ks", "critical");
    for r in &reports {
        println!("{:>9} {:>10.3e} {:>8.4} {:>8.4}  {}", r.iteration, r.sd, r.ks, r.critical, !r.rejected);
    }
    Ok(())
}

fn suites(ensembles: &[EnsembleKind], coefs: &[Amplitude]) -> Vec<(EnsembleKind, Amplitude)> {
    ensembles.iter().flat_map(|&e| coefs.iter().map(move |&c| (e, c))).collect()
}

pub fn universality(ctx: &Ctx, args: &UniversalityArgs) -> Result<(), Failure> {
    let suites = suites(&args.ensembles, &args.coefs);
    if suites.is_empty() {
        return Err(Failure::invalid("need at least one ensemble and one coefficient kind".into()));
    }
    let mut all = TrialDataset::default();
    let mut rows = Vec::new();
    for (i, &(ens, coef)) in suites.iter().enumerate() {
        let spec = grid_spec(ctx, &args.grid, args.lambda, ens, coef, derive_seed(ctx.seed, &[i as u64]));
        let data = run_grid(&spec)?;
        let fits = transition_curve(&data);
        print_fits(ctx.case, &format!("{ens}/{coef}"), &fits);
        for f in &fits {
            let mut row = vec![ens.to_string(), coef.to_string()];
            row.extend(fit_row(f));
            rows.push(row);
        }
        all.records.extend(data.records);
    }
    let dir = open_dir(&ctx.out_or("universality"))?;
    write_dataset(open_file(&dir.join("dataset.csv"))?, &ctx.meta, &all)?;
    let header = ["ensemble", "coef", "delta", "rho_hat", "width", "se_rho", "status"];
    write_table(open_file(&dir.join("fits.csv"))?, &ctx.meta, &header, rows)?;
    Ok(())
}

pub fn tune(ctx: &Ctx, args: &TuneArgs) -> Result<(), Failure> {
    let suites = suites(&args.ensembles, &args.coefs);
    if suites.is_empty() || args.lambdas.is_empty() {
        return Err(Failure::invalid("need at least one lambda, ensemble and coefficient kind".into()));
    }
    let mut runs = Vec::new();
    for &lambda in &args.lambdas {
        // Every lambda sees the same problem instances.
        for (i, &(ens, coef)) in suites.iter().enumerate() {
            let spec =
                grid_spec(ctx, &args.grid, Lambda::value(lambda)?, ens, coef, derive_seed(ctx.seed, &[i as u64]));
            runs.push(LambdaRun { lambda, suite: format!("{ens}/{coef}"), dataset: run_grid(&spec)? });
        }
    }
    let tuned = tune_lambda(&runs)?;
    let dir = open_dir(&ctx.out_or("tune"))?;
    let all = TrialDataset { records: runs.iter().flat_map(|r| r.dataset.records.iter().cloned()).collect() };
    write_dataset(open_file(&dir.join("dataset.csv"))?, &ctx.meta, &all)?;
    let rows = tuned.iter().map(|p| vec![format_num(p.delta), format_num(p.lambda), format_num(p.rho_hat)]).collect();
    write_table(open_file(&dir.join("tuned.csv"))?, &ctx.meta, &["delta", "lambda", "rho_hat"], rows)?;
    let rows = tuned
        .iter()
        .flat_map(|p| p.candidates.iter().map(|&(l, r)| vec![format_num(p.delta), format_num(l), format_opt(r)]))
        .collect();
    write_table(open_file(&dir.join("candidates.csv"))?, &ctx.meta, &["delta", "lambda", "rho_hat"], rows)?;
    println!("{:>7} {:>7} {:>8}", "delta", "lambda", "rho_hat");
    for p in &tuned {
        println!("{:>7.4} {:>7.3} {:>8.4}", p.delta, p.lambda, p.rho_hat);
    }
    Ok(())
}
