//! Per-command parameter records. Each one is both a clap argument group and
//! a section of the TOML run file, so a run can be replayed from either. The
//! sweep commands keep their grid options in a nested `grid` table.

use ampcs_core::diagnostics::default_timing_targets;
use ampcs_core::io::VERSION;
use ampcs_core::phasediag::{default_delta_grid, Design, SuccessRule};
use ampcs_core::solvers::{Algorithm, Lambda, SigmaEstimator};
use ampcs_core::{Amplitude, Case, EnsembleKind};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

/// Parse a number, allowing a ratio such as `1/6`.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let bad = || format!("'{s}' is not a number or ratio");
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            if b == 0.0 {
                return Err(format!("'{s}' divides by zero"));
            }
            a / b
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    Focused,
    General,
    Relative,
}

/// Sparsity grid options shared by the sweep commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct GridArgs {
    /// Undersampling values (comma separated; default 30 points on [0.02, 0.99]).
    #[arg(long, value_delimiter = ',', value_parser = parse_number)]
    pub deltas: Vec<f64>,
    #[arg(long, value_enum, default_value = "focused")]
    pub design: DesignKind,
    /// Sparsity values per delta (default 20 focused, 40 general).
    #[arg(long)]
    pub points: Option<usize>,
    /// Focused design: half-width around the predicted boundary.
    #[arg(long, default_value_t = 0.1, value_parser = parse_number)]
    pub halfwidth: f64,
    /// Relative design: span as multiples of the predicted boundary.
    #[arg(long, default_value_t = 0.5, value_parser = parse_number)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.5, value_parser = parse_number)]
    pub hi: f64,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Signal length N.
    #[arg(long, default_value_t = 500)]
    pub dim: usize,
    #[arg(long, default_value_t = 500)]
    pub t_max: usize,
    /// Success threshold on the reconstruction error.
    #[arg(long, default_value_t = 1e-4, value_parser = parse_number)]
    pub tol: f64,
    #[arg(long, default_value = "relative")]
    pub success: SuccessRule,
    #[arg(long, default_value = "amp")]
    pub algorithm: Algorithm,
    /// IST step size (default 1/|A|^2).
    #[arg(long, value_parser = parse_number)]
    pub relaxation: Option<f64>,
}

impl Default for GridArgs {
    fn default() -> Self {
        GridArgs {
            deltas: Vec::new(),
            design: DesignKind::Focused,
            points: None,
            halfwidth: 0.1,
            lo: 0.5,
            hi: 1.5,
            trials: 20,
            dim: 500,
            t_max: 500,
            tol: 1e-4,
            success: SuccessRule::Relative,
            algorithm: Algorithm::Amp,
            relaxation: None,
        }
    }
}

impl GridArgs {
    pub fn deltas(&self) -> Vec<f64> {
        if self.deltas.is_empty() {
            default_delta_grid()
        } else {
            self.deltas.clone()
        }
    }

    pub fn design(&self) -> Design {
        match self.design {
            DesignKind::Focused => Design::Focused { halfwidth: self.halfwidth, points: self.points.unwrap_or(20) },
            DesignKind::General => Design::General { points: self.points.unwrap_or(40) },
            DesignKind::Relative => Design::Relative { lo: self.lo, hi: self.hi, points: self.points.unwrap_or(20) },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SeCurveArgs {
    /// Undersampling values (default 30 points on [0.02, 0.99]).
    #[arg(long, value_delimiter = ',', value_parser = parse_number)]
    pub deltas: Vec<f64>,
    /// Emit the minimax MSE curve over the same grid, read as sparsity values.
    #[arg(long)]
    pub minimax: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct PhaseArgs {
    #[arg(long, default_value = "optimal")]
    pub lambda: Lambda,
    #[arg(long, default_value = "gaussian")]
    pub ensemble: EnsembleKind,
    #[arg(long, default_value = "unit")]
    pub coef: Amplitude,
    // Nested `grid` table in run files.
    #[command(flatten)]
    pub grid: GridArgs,
}

impl Default for PhaseArgs {
    fn default() -> Self {
        PhaseArgs {
            grid: GridArgs::default(),
            lambda: Lambda::Optimal,
            ensemble: EnsembleKind::GaussianIid,
            coef: Amplitude::Unit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SolveArgs {
    #[arg(long, default_value_t = 0.5, value_parser = parse_number)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.1, value_parser = parse_number)]
    pub rho: f64,
    #[arg(long, default_value_t = 1000)]
    pub dim: usize,
    #[arg(long, default_value = "amp")]
    pub algorithm: Algorithm,
    #[arg(long, default_value = "optimal")]
    pub lambda: Lambda,
    #[arg(long, default_value_t = 500)]
    pub t_max: usize,
    /// Stop once |y - Ax| / |y| falls below this.
    #[arg(long, value_parser = parse_number, conflicts_with = "mse_target")]
    pub rel_residual: Option<f64>,
    /// Stop once the true MSE falls below this.
    #[arg(long, value_parser = parse_number)]
    pub mse_target: Option<f64>,
    #[arg(long, default_value = "residual")]
    pub sigma: SigmaEstimator,
    #[arg(long, value_parser = parse_number)]
    pub relaxation: Option<f64>,
    #[arg(long, default_value = "gaussian")]
    pub ensemble: EnsembleKind,
    #[arg(long, default_value = "unit")]
    pub coef: Amplitude,
}

impl Default for SolveArgs {
    fn default() -> Self {
        SolveArgs {
            delta: 0.5,
            rho: 0.1,
            dim: 1000,
            algorithm: Algorithm::Amp,
            lambda: Lambda::Optimal,
            t_max: 500,
            rel_residual: None,
            mse_target: None,
            sigma: SigmaEstimator::ResidualNorm,
            relaxation: None,
            ensemble: EnsembleKind::GaussianIid,
            coef: Amplitude::Unit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SePredictArgs {
    #[arg(long, default_value_t = 0.3, value_parser = parse_number)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.15, value_parser = parse_number)]
    pub rho: f64,
    #[arg(long, default_value_t = 2000)]
    pub dim: usize,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 30)]
    pub t_max: usize,
    #[arg(long, default_value = "optimal")]
    pub lambda: Lambda,
    #[arg(long, default_value = "gaussian")]
    pub ensemble: EnsembleKind,
    #[arg(long, default_value = "unit")]
    pub coef: Amplitude,
}

impl Default for SePredictArgs {
    fn default() -> Self {
        SePredictArgs {
            delta: 0.3,
            rho: 0.15,
            dim: 2000,
            trials: 50,
            t_max: 30,
            lambda: Lambda::Optimal,
            ensemble: EnsembleKind::GaussianIid,
            coef: Amplitude::Unit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct TimingArgs {
    #[arg(long, default_value_t = 1.0 / 6.0, value_parser = parse_number)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0 / 8.0, value_parser = parse_number)]
    pub rho: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [1024, 2048, 4096, 8192, 16384])]
    pub dims: Vec<usize>,
    /// MSE targets (default 1.92e-3 halving down to 2.4e-4).
    #[arg(long, value_delimiter = ',', value_parser = parse_number)]
    pub targets: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 1000)]
    pub t_max: usize,
    #[arg(long, default_value = "optimal")]
    pub lambda: Lambda,
    #[arg(long, default_value = "fourier")]
    pub ensemble: EnsembleKind,
    /// Repeat each solve until this much time has accumulated.
    #[arg(long, default_value_t = 0.05, value_parser = parse_number)]
    pub min_seconds: f64,
}

impl Default for TimingArgs {
    fn default() -> Self {
        TimingArgs {
            delta: 1.0 / 6.0,
            rho: 1.0 / 8.0,
            dims: vec![1024, 2048, 4096, 8192, 16384],
            targets: Vec::new(),
            trials: 10,
            t_max: 1000,
            lambda: Lambda::Optimal,
            ensemble: EnsembleKind::PartialFourier,
            min_seconds: 0.05,
        }
    }
}

impl TimingArgs {
    pub fn targets(&self) -> Vec<f64> {
        if self.targets.is_empty() {
            default_timing_targets()
        } else {
            self.targets.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct QqMaiArgs {
    #[arg(long, default_value_t = 0.9, value_parser = parse_number)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.52, value_parser = parse_number)]
    pub rho: f64,
    #[arg(long, default_value_t = 2000)]
    pub dim: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [10, 20, 30, 40, 50, 60, 70, 80, 90])]
    pub iterations: Vec<usize>,
    /// Level of the normality test.
    #[arg(long, default_value_t = 0.01, value_parser = parse_number)]
    pub alpha: f64,
    #[arg(long, default_value = "optimal")]
    pub lambda: Lambda,
    #[arg(long, default_value = "use")]
    pub ensemble: EnsembleKind,
    #[arg(long, default_value = "unit")]
    pub coef: Amplitude,
}

impl Default for QqMaiArgs {
    fn default() -> Self {
        QqMaiArgs {
            delta: 0.9,
            rho: 0.52,
            dim: 2000,
            iterations: (1..=9).map(|i| 10 * i).collect(),
            alpha: 0.01,
            lambda: Lambda::Optimal,
            ensemble: EnsembleKind::Use,
            coef: Amplitude::Unit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct UniversalityArgs {
    #[arg(long, default_value = "optimal")]
    pub lambda: Lambda,
    #[arg(long, value_delimiter = ',', default_values_t = EnsembleKind::ALL)]
    pub ensembles: Vec<EnsembleKind>,
    #[arg(long, value_delimiter = ',', default_values_t = [Amplitude::Unit, Amplitude::Uniform, Amplitude::Gauss])]
    pub coefs: Vec<Amplitude>,
    // Nested `grid` table in run files.
    #[command(flatten)]
    pub grid: GridArgs,
}

impl Default for UniversalityArgs {
    fn default() -> Self {
        UniversalityArgs {
            grid: GridArgs::default(),
            lambda: Lambda::Optimal,
            ensembles: EnsembleKind::ALL.to_vec(),
            coefs: vec![Amplitude::Unit, Amplitude::Uniform, Amplitude::Gauss],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct TuneArgs {
    /// Candidate threshold controls.
    #[arg(long, value_delimiter = ',', value_parser = parse_number, default_values_t = [0.75, 1.0, 1.25, 1.5, 2.0, 2.5])]
    pub lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [EnsembleKind::GaussianIid])]
    pub ensembles: Vec<EnsembleKind>,
    #[arg(long, value_delimiter = ',', default_values_t = [Amplitude::Unit])]
    pub coefs: Vec<Amplitude>,
    // Nested `grid` table in run files.
    #[command(flatten)]
    pub grid: GridArgs,
}

impl Default for TuneArgs {
    fn default() -> Self {
        TuneArgs {
            grid: GridArgs::default(),
            lambdas: vec![0.75, 1.0, 1.25, 1.5, 2.0, 2.5],
            ensembles: vec![EnsembleKind::GaussianIid],
            coefs: vec![Amplitude::Unit],
        }
    }
}

/// A replayable run file: global settings plus any number of command sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    #[serde(default = "default_version")]
    pub version: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_case")]
    pub case: Case,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se_curve: Option<SeCurveArgs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<PhaseArgs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveArgs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se_predict: Option<SePredictArgs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingArgs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qq_mai: Option<QqMaiArgs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub universality: Option<UniversalityArgs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune: Option<TuneArgs>,
}

fn default_version() -> String {
    VERSION.to_string()
}

fn default_case() -> Case {
    Case::Signed
}

impl RunConfig {
    pub fn new(seed: u64, case: Case) -> Self {
        RunConfig {
            version: default_version(),
            seed,
            case,
            se_curve: None,
            phase: None,
            solve: None,
            se_predict: None,
            timing: None,
            qq_mai: None,
            universality: None,
            tune: None,
        }
    }

    /// Parse a run file. Errors carry the line and column of the offending key.
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string().trim_end().replace('\n', " | "))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }
}
