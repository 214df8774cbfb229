//! Gaussian quadrature rules.

use std::f64::consts::PI;

/// Nodes and weights of a quadrature rule.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss-Hermite rule normalised for the standard normal: `E f(Z) ~ sum w_i f(x_i)`.
///
/// Roots of the physicists' Hermite polynomial are located by Newton's
/// method on the orthonormal recurrence, which stays finite for large orders.
pub fn gauss_hermite(order: usize) -> Rule {
    assert!(order >= 1);
    let n = order;
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    // Physicists' weight exp(-x^2) -> standard normal.
    let norm = PI.sqrt();
    let nodes = x.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
    let weights = w.iter().map(|v| v / norm).collect();
    Rule { nodes, weights }
}

/// Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> Rule {
    assert!(order >= 1);
    let n = order;
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    Rule { nodes: x, weights: w }
}

/// Integrate `f` over `[lo, hi]` with panels graded geometrically towards
/// each feature point, so kinks of width `scale` are resolved.
pub fn graded_integral(rule: &Rule, lo: f64, hi: f64, features: &[f64], scale: f64, f: impl Fn(f64) -> f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let mut cuts = vec![lo, hi];
    if scale > 0.0 {
        for &c in features {
            if c < lo || c > hi {
                continue;
            }
            cuts.push(c);
            let mut h = scale / 4.0;
            while h < hi - lo {
                for p in [c - h, c + h] {
                    if p > lo && p < hi {
                        cuts.push(p);
                    }
                }
                h *= 2.0;
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            s += w * f(mid + half * x);
        }
        total += half * s;
    }
    total
}
