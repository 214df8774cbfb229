//! One-dimensional search utilities shared by the tuning and minimax code.

/// Grid step of the coarse scan.
pub const SCAN_STEP: f64 = 0.01;
/// Upper end of the scanned threshold range.
pub const SCAN_MAX: f64 = 10.0;
/// Bracket width at which golden-section refinement stops.
pub const GOLDEN_TOL: f64 = 1e-10;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Maximise `f` on `[lo, hi]`: coarse scan at `step`, then golden-section
/// search inside the bracket around the best scan point.
///
/// Non-finite objective values count as `-inf`.
pub fn scan_golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64, tol: f64) -> (f64, f64) {
    let g = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let steps = ((hi - lo) / step).round().max(1.0) as usize;
    let mut best_x = lo;
    let mut best = g(lo);
    for i in 1..=steps {
        let x = (lo + i as f64 * step).min(hi);
        let v = g(x);
        if v > best {
            best = v;
            best_x = x;
        }
    }
    let mut a = (best_x - step).max(lo);
    let mut b = (best_x + step).min(hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = g(c);
    let mut fd = g(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = g(d);
        }
    }
    let x = 0.5 * (a + b);
    let v = g(x);
    // Keep the scan point when the refinement wandered onto a plateau edge.
    if v >= best {
        (x, v)
    } else {
        (best_x, best)
    }
}

/// Minimise `f` on `[lo, hi]` with the same scan + golden-section scheme.
pub fn scan_golden_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64, tol: f64) -> (f64, f64) {
    let (x, v) = scan_golden_max(|x| -f(x), lo, hi, step, tol);
    (x, -v)
}

/// Locate the switch point of a predicate that holds on `[lo, b)` and fails
/// on `(b, hi]`. Returns `lo` if it fails everywhere and `hi` if it holds
/// everywhere (checked at the end points only).
pub fn bisect_boundary(pred: impl Fn(f64) -> bool, lo: f64, hi: f64, tol: f64) -> f64 {
    if pred(hi) {
        return hi;
    }
    if !pred(lo) {
        return lo;
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let m = 0.5 * (a + b);
        if pred(m) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Root of a continuous function with a sign change on `[lo, hi]`.
pub fn bisect_root(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let sign_lo = f(lo) < 0.0;
    bisect_boundary(|x| (f(x) < 0.0) == sign_lo, lo, hi, tol)
}
