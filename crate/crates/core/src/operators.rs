//! Measurement operators, sparse signals and problem instances.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Cauchy, Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream, Rng};
use crate::thresholds::Case;

/// Random matrix ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnsembleKind {
    /// i.i.d. `N(0, 1/n)` entries.
    #[serde(rename = "gaussian")]
    GaussianIid,
    /// Columns uniform on the unit sphere.
    #[serde(rename = "use")]
    Use,
    /// i.i.d. `±1/sqrt(n)` entries.
    #[serde(rename = "rademacher")]
    Rademacher,
    /// Random real rows of the DFT, applied with an FFT.
    #[serde(rename = "fourier")]
    PartialFourier,
}

impl EnsembleKind {
    pub const ALL: [EnsembleKind; 4] =
        [EnsembleKind::GaussianIid, EnsembleKind::Use, EnsembleKind::Rademacher, EnsembleKind::PartialFourier];

    pub fn name(self) -> &'static str {
        match self {
            EnsembleKind::GaussianIid => "gaussian",
            EnsembleKind::Use => "use",
            EnsembleKind::Rademacher => "rademacher",
            EnsembleKind::PartialFourier => "fourier",
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown ensemble '{s}'")))
    }
}

/// Distribution of the nonzero amplitudes of a sparse signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Amplitude {
    Unit,
    Uniform,
    Gauss,
    Cauchy,
}

impl Amplitude {
    pub const ALL: [Amplitude; 4] = [Amplitude::Unit, Amplitude::Uniform, Amplitude::Gauss, Amplitude::Cauchy];

    pub fn name(self) -> &'static str {
        match self {
            Amplitude::Unit => "unit",
            Amplitude::Uniform => "uniform",
            Amplitude::Gauss => "gauss",
            Amplitude::Cauchy => "cauchy",
        }
    }
}

impl fmt::Display for Amplitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Amplitude {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown coefficient kind '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    /// Number of measurements.
    pub n: usize,
    /// Signal length.
    pub dim: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowPart {
    Re,
    Im,
}

/// One real row of a partial Fourier operator: `weight * Re/Im(exp(-2 pi i f j / N))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierRow {
    pub freq: usize,
    pub part: RowPart,
    pub weight: f64,
}

struct FourierPlan {
    rows: Vec<FourierRow>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

enum Repr {
    /// Row-major `n x dim`.
    Dense(Vec<f64>),
    Fourier(FourierPlan),
}

/// An `n x N` real measurement map with forward and adjoint application.
pub struct LinearOperator {
    spec: EnsembleSpec,
    repr: Repr,
}

impl fmt::Debug for LinearOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearOperator").field("spec", &self.spec).finish_non_exhaustive()
    }
}

/// Draw an operator from the ensemble named in `spec`.
pub fn build_operator(spec: EnsembleSpec) -> Result<LinearOperator> {
    let EnsembleSpec { kind, n, dim, seed } = spec;
    if n == 0 || n > dim {
        return Err(Error::InvalidDimensions(format!("need 0 < n <= N, got n={n}, N={dim}")));
    }
    let mut rng = rng_from_seed(seed);
    let repr = match kind {
        EnsembleKind::GaussianIid => {
            let s = 1.0 / (n as f64).sqrt();
            Repr::Dense((0..n * dim).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect())
        }
        EnsembleKind::Rademacher => {
            let s = 1.0 / (n as f64).sqrt();
            Repr::Dense((0..n * dim).map(|_| if rng.random::<bool>() { s } else { -s }).collect())
        }
        EnsembleKind::Use => {
            let mut a: Vec<f64> = (0..n * dim).map(|_| rng.sample(StandardNormal)).collect();
            let mut norms = vec![0.0; dim];
            for row in a.chunks_exact(dim) {
                for (acc, v) in norms.iter_mut().zip(row) {
                    *acc += v * v;
                }
            }
            let inv: Vec<f64> = norms.iter().map(|s| 1.0 / s.sqrt()).collect();
            for row in a.chunks_exact_mut(dim) {
                for (v, s) in row.iter_mut().zip(&inv) {
                    *v *= s;
                }
            }
            Repr::Dense(a)
        }
        EnsembleKind::PartialFourier => Repr::Fourier(fourier_plan(n, dim, &mut rng)),
    };
    Ok(LinearOperator { spec, repr })
}

fn fourier_plan(n: usize, dim: usize, rng: &mut Rng) -> FourierPlan {
    // Conjugate pairs f in 1..ceil(N/2) give two real rows (cos, sin) each;
    // DC and, for even N, Nyquist give one row each.
    let max_pairs = dim.div_ceil(2) - 1;
    let pairs = (n / 2).min(max_pairs);
    let singles = n - 2 * pairs;
    let scale = (2.0 / n as f64).sqrt();
    let mut freqs: Vec<usize> = sample(rng, max_pairs, pairs).into_iter().map(|i| i + 1).collect();
    freqs.sort_unstable();
    let mut rows = Vec::with_capacity(n);
    let single_freqs = [0, dim / 2];
    for &f in single_freqs.iter().take(singles) {
        rows.push(FourierRow { freq: f, part: RowPart::Re, weight: scale * std::f64::consts::FRAC_1_SQRT_2 });
    }
    for f in freqs {
        rows.push(FourierRow { freq: f, part: RowPart::Re, weight: scale });
        rows.push(FourierRow { freq: f, part: RowPart::Im, weight: scale });
    }
    let mut planner = FftPlanner::new();
    FourierPlan { rows, forward: planner.plan_fft_forward(dim), inverse: planner.plan_fft_inverse(dim) }
}

impl LinearOperator {
    /// Wrap an explicit row-major `n x dim` matrix.
    pub fn from_dense(n: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || n > dim || data.len() != n * dim {
            return Err(Error::InvalidDimensions(format!("matrix of {} entries is not {n} x {dim}", data.len())));
        }
        let spec = EnsembleSpec { kind: EnsembleKind::GaussianIid, n, dim, seed: 0 };
        Ok(Self { spec, repr: Repr::Dense(data) })
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    /// Rows of a partial Fourier operator; `None` for dense ensembles.
    pub fn fourier_rows(&self) -> Option<&[FourierRow]> {
        match &self.repr {
            Repr::Fourier(p) => Some(&p.rows),
            Repr::Dense(_) => None,
        }
    }

    /// Row-major dense entries, if the operator is stored densely.
    pub fn dense(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Dense(a) => Some(a),
            Repr::Fourier(_) => None,
        }
    }

    /// Materialise the operator as a row-major matrix.
    pub fn to_dense(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Dense(a) => a.clone(),
            Repr::Fourier(_) => {
                let (n, dim) = (self.n(), self.dim());
                let mut out = vec![0.0; n * dim];
                let mut e = vec![0.0; dim];
                let mut col = vec![0.0; n];
                for j in 0..dim {
                    e[j] = 1.0;
                    self.apply_into(&e, &mut col);
                    e[j] = 0.0;
                    for (a, v) in col.iter().enumerate() {
                        out[a * dim + j] = *v;
                    }
                }
                out
            }
        }
    }

    /// `out = A x`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(out.len(), self.n());
        match &self.repr {
            Repr::Dense(a) => {
                for (o, row) in out.iter_mut().zip(a.chunks_exact(self.dim())) {
                    *o = dot(row, x);
                }
            }
            Repr::Fourier(p) => {
                with_fft_buffers(self.dim(), p.forward.get_inplace_scratch_len(), |buf, scratch| {
                    for (b, &v) in buf.iter_mut().zip(x) {
                        *b = Complex64::new(v, 0.0);
                    }
                    p.forward.process_with_scratch(buf, scratch);
                    for (o, r) in out.iter_mut().zip(&p.rows) {
                        let c = buf[r.freq];
                        *o = r.weight
                            * match r.part {
                                RowPart::Re => c.re,
                                RowPart::Im => c.im,
                            };
                    }
                });
            }
        }
    }

    /// `out = A^T z`.
    pub fn adjoint_into(&self, z: &[f64], out: &mut [f64]) {
        assert_eq!(z.len(), self.n());
        assert_eq!(out.len(), self.dim());
        match &self.repr {
            Repr::Dense(a) => {
                out.fill(0.0);
                for (&za, row) in z.iter().zip(a.chunks_exact(self.dim())) {
                    axpy(za, row, out);
                }
            }
            Repr::Fourier(p) => {
                with_fft_buffers(self.dim(), p.inverse.get_inplace_scratch_len(), |buf, scratch| {
                    buf.fill(Complex64::new(0.0, 0.0));
                    for (&za, r) in z.iter().zip(&p.rows) {
                        let w = r.weight * za;
                        match r.part {
                            RowPart::Re => buf[r.freq].re += w,
                            RowPart::Im => buf[r.freq].im += w,
                        }
                    }
                    p.inverse.process_with_scratch(buf, scratch);
                    for (o, c) in out.iter_mut().zip(buf.iter()) {
                        *o = c.re;
                    }
                });
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.apply_into(x, &mut out);
        out
    }

    pub fn adjoint(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.adjoint_into(z, &mut out);
        out
    }
}

thread_local! {
    static FFT_BUFFERS: RefCell<(Vec<Complex64>, Vec<Complex64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}

// Large per-call allocations go through mmap and page faults, which swamps the FFT at big N.
fn with_fft_buffers<R>(len: usize, scratch_len: usize, f: impl FnOnce(&mut [Complex64], &mut [Complex64]) -> R) -> R {
    FFT_BUFFERS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (buf, scratch) = &mut *guard;
        buf.resize(len, Complex64::new(0.0, 0.0));
        scratch.resize(scratch_len, Complex64::new(0.0, 0.0));
        f(&mut buf[..len], &mut scratch[..scratch_len])
    })
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// How to draw a sparse coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSpec {
    pub case: Case,
    /// Nonzero count; for the box case, the number of interior entries.
    pub k: usize,
    pub amplitude: Amplitude,
    pub seed: u64,
}

fn draw_magnitude(amplitude: Amplitude, rng: &mut Rng) -> f64 {
    loop {
        let v: f64 = match amplitude {
            Amplitude::Unit => 1.0,
            Amplitude::Uniform => rng.random::<f64>(),
            Amplitude::Gauss => rng.sample::<f64, _>(StandardNormal).abs(),
            Amplitude::Cauchy => Cauchy::<f64>::new(0.0, 1.0).expect("valid scale").sample(rng).abs(),
        };
        if v > 0.0 {
            return v;
        }
    }
}

/// Draw a signal of length `dim` with support (or interior) chosen uniformly.
///
/// For the box case the `N - k` exterior entries are `±1`; interior entries
/// are `0` for unit amplitudes and otherwise drawn from the amplitude law
/// restricted to `(-1, 1)`.
pub fn gen_signal(coef: &CoefficientSpec, dim: usize) -> Result<Vec<f64>> {
    let k = coef.k;
    if k > dim {
        return Err(Error::InvalidParameter(format!("k={k} exceeds N={dim}")));
    }
    let mut rng = rng_from_seed(coef.seed);
    let support = sample(&mut rng, dim, k).into_vec();
    match coef.case {
        Case::Plus | Case::Signed => {
            let mut x = vec![0.0; dim];
            for i in support {
                let m = draw_magnitude(coef.amplitude, &mut rng);
                x[i] = if coef.case == Case::Signed && rng.random::<bool>() { -m } else { m };
            }
            Ok(x)
        }
        Case::Box => {
            let mut x: Vec<f64> = (0..dim).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            for i in support {
                x[i] = match coef.amplitude {
                    Amplitude::Unit => 0.0,
                    kind => loop {
                        let m = draw_magnitude(kind, &mut rng);
                        if m < 1.0 {
                            break if rng.random::<bool>() { -m } else { m };
                        }
                    },
                };
            }
            Ok(x)
        }
    }
}

/// `ceil` that ignores representation error in products like `0.101 * 1000`.
pub fn ceil_count(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// A measured sparse problem `y = A x0`.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub operator: Arc<LinearOperator>,
    pub x0: Vec<f64>,
    pub y: Vec<f64>,
    pub dim: usize,
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub rho: f64,
    pub case: Case,
    pub seed: u64,
}

/// Parameters of [`gen_instance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub delta: f64,
    pub rho: f64,
    pub dim: usize,
    pub ensemble: EnsembleKind,
    pub amplitude: Amplitude,
    pub case: Case,
    pub seed: u64,
}

impl ProblemInstance {
    /// Assemble an instance from an operator and a signal; `k` counts entries
    /// that are nonzero (or interior, for the box case).
    pub fn from_parts(operator: Arc<LinearOperator>, x0: Vec<f64>, case: Case, seed: u64) -> Result<Self> {
        if x0.len() != operator.dim() {
            return Err(Error::InvalidDimensions(format!("signal length {} != N={}", x0.len(), operator.dim())));
        }
        let (n, dim) = (operator.n(), operator.dim());
        let k = match case {
            Case::Box => x0.iter().filter(|v| v.abs() < 1.0).count(),
            _ => x0.iter().filter(|v| **v != 0.0).count(),
        };
        let y = operator.apply(&x0);
        Ok(Self { operator, x0, y, dim, n, k, delta: n as f64 / dim as f64, rho: k as f64 / n as f64, case, seed })
    }
}

/// Generate an instance with `n = ceil(delta N)` and `k = ceil(rho n)`.
pub fn gen_instance(spec: &InstanceSpec) -> Result<ProblemInstance> {
    let InstanceSpec { delta, rho, dim, ensemble, amplitude, case, seed } = *spec;
    if !(delta > 0.0 && delta <= 1.0) || !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("need delta in (0,1] and rho in [0,1], got ({delta}, {rho})")));
    }
    let n = ceil_count(delta * dim as f64).max(1);
    let k = ceil_count(rho * n as f64).min(n);
    let operator = build_operator(EnsembleSpec { kind: ensemble, n, dim, seed: derive_seed(seed, &[stream::MATRIX]) })?;
    let x0 = gen_signal(&CoefficientSpec { case, k, amplitude, seed: derive_seed(seed, &[stream::SIGNAL]) }, dim)?;
    let y = operator.apply(&x0);
    Ok(ProblemInstance { operator: Arc::new(operator), x0, y, dim, n, k, delta, rho, case, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::Uniform;

    fn random_vec(len: usize, rng: &mut Rng) -> Vec<f64> {
        (0..len).map(|_| rng.sample(Uniform::new(-1.0, 1.0).unwrap())).collect()
    }

    #[test]
    fn rejects_bad_dimensions() {
        let spec = EnsembleSpec { kind: EnsembleKind::GaussianIid, n: 11, dim: 10, seed: 1 };
        assert!(matches!(build_operator(spec), Err(Error::InvalidDimensions(_))));
        let spec = EnsembleSpec { n: 0, ..spec };
        assert!(build_operator(spec).is_err());
    }

    #[test]
    fn gaussian_column_norms_concentrate() {
        let (n, dim) = (100, 400);
        let a = build_operator(EnsembleSpec { kind: EnsembleKind::GaussianIid, n, dim, seed: 5 }).unwrap();
        let m = a.dense().unwrap();
        let mean: f64 = (0..dim).map(|j| (0..n).map(|i| m[i * dim + j].powi(2)).sum::<f64>()).sum::<f64>() / dim as f64;
        assert!((mean - 1.0).abs() <= 3.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn use_and_fourier_columns_are_unit_norm() {
        for kind in [EnsembleKind::Use, EnsembleKind::PartialFourier] {
            for (n, dim) in [(30, 64), (31, 64), (63, 64), (64, 64), (20, 45), (45, 45)] {
                let a = build_operator(EnsembleSpec { kind, n, dim, seed: 9 }).unwrap().to_dense();
                for j in 0..dim {
                    let s: f64 = (0..n).map(|i| a[i * dim + j].powi(2)).sum();
                    assert!((s - 1.0).abs() < 1e-12, "{kind} n={n} N={dim} col {j}: {s}");
                }
            }
        }
    }

    #[test]
    fn rademacher_entries() {
        let n = 16;
        let a = build_operator(EnsembleSpec { kind: EnsembleKind::Rademacher, n, dim: 40, seed: 2 }).unwrap();
        assert!(a.dense().unwrap().iter().all(|v| (v.abs() - 0.25).abs() < 1e-15));
    }

    #[test]
    fn adjoint_consistency_all_ensembles() {
        let mut rng = rng_from_seed(11);
        for kind in EnsembleKind::ALL {
            for draw in 0..100u64 {
                let dim = 8 + (draw as usize * 7) % 120;
                let n = 1 + (draw as usize * 13) % dim;
                let a = build_operator(EnsembleSpec { kind, n, dim, seed: draw }).unwrap();
                let x = random_vec(dim, &mut rng);
                let z = random_vec(n, &mut rng);
                let lhs = dot(&a.apply(&x), &z);
                let rhs = dot(&x, &a.adjoint(&z));
                assert!((lhs - rhs).abs() <= 1e-10 * norm2(&x) * norm2(&z), "{kind} {n}x{dim}");
            }
        }
    }

    /// Dense DFT submatrix built straight from complex exponentials.
    fn explicit_fourier(rows: &[FourierRow], dim: usize) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                (0..dim)
                    .map(|j| {
                        let e =
                            Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (r.freq * j) as f64 / dim as f64);
                        r.weight * if r.part == RowPart::Re { e.re } else { e.im }
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn fourier_fast_apply_matches_dense_submatrix() {
        let mut rng = rng_from_seed(4);
        for dim in [7, 16, 33, 64] {
            for n in [1, dim / 3, dim / 2, dim - 1, dim] {
                let a = build_operator(EnsembleSpec { kind: EnsembleKind::PartialFourier, n, dim, seed: 3 }).unwrap();
                let rows = a.fourier_rows().unwrap();
                assert_eq!(rows.len(), n);
                let m = explicit_fourier(rows, dim);
                let x = random_vec(dim, &mut rng);
                let fast = a.apply(&x);
                for (r, v) in m.iter().zip(&fast) {
                    assert!((dot(r, &x) - v).abs() < 1e-12);
                }
                let z = random_vec(n, &mut rng);
                let fast = a.adjoint(&z);
                for j in 0..dim {
                    let slow: f64 = m.iter().zip(&z).map(|(r, za)| r[j] * za).sum();
                    assert!((slow - fast[j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fourier_rows_are_distinct_and_isotropic() {
        let (n, dim) = (512, 1024);
        let a = build_operator(EnsembleSpec { kind: EnsembleKind::PartialFourier, n, dim, seed: 8 }).unwrap();
        let rows = a.fourier_rows().unwrap();
        let mut keys: Vec<(usize, bool)> = rows.iter().map(|r| (r.freq, r.part == RowPart::Re)).collect();
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), n);
        // Unit columns, and orthogonal rows: A A^T = (N/n) I.
        let mut e = vec![0.0; dim];
        e[17] = 1.0;
        let y = a.apply(&e);
        assert!((dot(&y, &y) - 1.0).abs() < 1e-12);
        for row in [0, 5, n - 1] {
            let mut u = vec![0.0; n];
            u[row] = 1.0;
            let back = a.apply(&a.adjoint(&u));
            for (i, v) in back.iter().enumerate() {
                let want = if i == row { dim as f64 / n as f64 } else { 0.0 };
                assert!((v - want).abs() < 1e-10, "row {row}, entry {i}: {v}");
            }
        }
    }

    #[test]
    fn signal_edge_cases() {
        let z = gen_signal(&CoefficientSpec { case: Case::Signed, k: 0, amplitude: Amplitude::Gauss, seed: 1 }, 50)
            .unwrap();
        assert!(z.iter().all(|v| *v == 0.0));
        let one =
            gen_signal(&CoefficientSpec { case: Case::Plus, k: 50, amplitude: Amplitude::Unit, seed: 1 }, 50).unwrap();
        assert!(one.iter().all(|v| *v == 1.0));
        let b = gen_signal(&CoefficientSpec { case: Case::Box, k: 10, amplitude: Amplitude::Uniform, seed: 1 }, 100)
            .unwrap();
        assert_eq!(b.iter().filter(|v| v.abs() == 1.0).count(), 90);
        assert_eq!(b.iter().filter(|v| v.abs() < 1.0).count(), 10);
        assert!(
            gen_signal(&CoefficientSpec { case: Case::Plus, k: 51, amplitude: Amplitude::Unit, seed: 1 }, 50).is_err()
        );
    }

    #[test]
    fn signal_support_and_signs() {
        for amplitude in Amplitude::ALL {
            let dim = 2000;
            let k = 600;
            let x = gen_signal(&CoefficientSpec { case: Case::Signed, k, amplitude, seed: 21 }, dim).unwrap();
            assert_eq!(x.iter().filter(|v| **v != 0.0).count(), k);
            let pos = x.iter().filter(|v| **v > 0.0).count() as f64;
            let sd = (k as f64 * 0.25).sqrt();
            assert!((pos - k as f64 / 2.0).abs() <= 3.0 * sd, "{amplitude}: {pos}");
            let p = gen_signal(&CoefficientSpec { case: Case::Plus, k, amplitude, seed: 21 }, dim).unwrap();
            assert!(p.iter().all(|v| *v >= 0.0));
            assert_eq!(p.iter().filter(|v| **v > 0.0).count(), k);
        }
    }

    #[test]
    fn instance_sizes() {
        let spec = InstanceSpec {
            delta: 0.5,
            rho: 0.2,
            dim: 1000,
            ensemble: EnsembleKind::GaussianIid,
            amplitude: Amplitude::Unit,
            case: Case::Signed,
            seed: 1,
        };
        let inst = gen_instance(&spec).unwrap();
        assert_eq!((inst.n, inst.k), (500, 100));
        let inst = gen_instance(&InstanceSpec { delta: 0.101, rho: 0.5, ..spec }).unwrap();
        assert_eq!((inst.n, inst.k), (101, 51));
        assert_eq!(ceil_count(1000.0 / 6.0), 167);
    }

    #[test]
    fn instances_are_seed_deterministic() {
        let spec = InstanceSpec {
            delta: 0.3,
            rho: 0.3,
            dim: 200,
            ensemble: EnsembleKind::Use,
            amplitude: Amplitude::Gauss,
            case: Case::Signed,
            seed: 77,
        };
        let a = gen_instance(&spec).unwrap();
        let b = gen_instance(&spec).unwrap();
        assert_eq!(a.operator.to_dense(), b.operator.to_dense());
        assert_eq!(a.x0, b.x0);
        assert_eq!(a.y, b.y);
        let c = gen_instance(&InstanceSpec { seed: 78, ..spec }).unwrap();
        assert_ne!(a.x0, c.x0);
    }
}
