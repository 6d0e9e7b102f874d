//! Quadrature rules: Gauss–Legendre (adaptive), Clenshaw–Curtis and
//! Gauss–Jacobi for integrands with an algebraic endpoint singularity.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

use crate::C64;

/// Nodes per panel of the adaptive Gauss–Legendre scheme.
const PANEL_NODES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-13,
            max_depth: 44,
        }
    }
}

/// A quadrature rule on the reference interval [-1, 1].
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Integrates `f` over `[l, r]` with the rule mapped affinely.
    pub fn integrate(&self, l: f64, r: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (r - l);
        let mid = 0.5 * (r + l);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// Gauss–Legendre rule with `n` nodes, computed by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn panel_rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_NODES))
}

/// Clenshaw–Curtis rule on the `n` Chebyshev–Lobatto points `cos(πj/(n-1))`.
/// Exact for polynomials of degree `n - 1`.
pub fn clenshaw_curtis(n: usize) -> Rule {
    assert!(n >= 2, "Clenshaw–Curtis needs at least two points");
    let big_n = n - 1;
    let nf = big_n as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for j in 0..=big_n {
        let theta = PI * j as f64 / nf;
        nodes.push(theta.cos());
        let mut s = 0.0;
        for k in 1..=big_n / 2 {
            let bk = if 2 * k == big_n { 1.0 } else { 2.0 };
            s += bk / (4.0 * (k * k) as f64 - 1.0) * (2.0 * k as f64 * theta).cos();
        }
        let cj = if j == 0 || j == big_n { 1.0 } else { 2.0 };
        weights.push(cj / nf * (1.0 - s));
    }
    Rule { nodes, weights }
}

/// Gauss–Jacobi rule for the weight `(1 - x)^alpha (1 + x)^beta` on [-1, 1]
/// via the Golub–Welsch eigenvalue method. Requires `alpha, beta > -1`.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> Rule {
    assert!(n >= 1 && alpha > -1.0 && beta > -1.0);
    let ab = alpha + beta;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let diag = if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        jac[(k, k)] = diag;
        if k + 1 < n {
            let j = kf + 1.0;
            let off2 = if k == 0 {
                4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * j * (j + alpha) * (j + beta) * (j + ab)
                    / ((2.0 * j + ab).powi(2) * (2.0 * j + ab + 1.0) * (2.0 * j + ab - 1.0))
            };
            let off = off2.sqrt();
            jac[(k, k + 1)] = off;
            jac[(k + 1, k)] = off;
        }
    }
    let mu0 = ((ab + 1.0) * 2f64.ln() + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0)
        - ln_gamma(ab + 2.0))
    .exp();
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Adaptive Gauss–Legendre integration of a real integrand over `[l, r]`.
pub fn integrate(l: f64, r: f64, f: &dyn Fn(f64) -> f64, opts: &QuadratureOptions) -> f64 {
    if r <= l {
        return 0.0;
    }
    let rule = panel_rule();
    let whole = rule.integrate(l, r, f);
    adapt_real(rule, l, r, whole, f, opts, r - l, 0)
}

#[allow(clippy::too_many_arguments)]
fn adapt_real(
    rule: &Rule,
    l: f64,
    r: f64,
    whole: f64,
    f: &dyn Fn(f64) -> f64,
    opts: &QuadratureOptions,
    total: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (l + r);
    let left = rule.integrate(l, m, f);
    let right = rule.integrate(m, r, f);
    let refined = left + right;
    let tol = (opts.abs_tol * (r - l) / total).max(opts.rel_tol * refined.abs());
    // a non-finite integrand never converges; stop rather than split forever
    if !refined.is_finite() || (refined - whole).abs() <= tol || depth >= opts.max_depth {
        return refined;
    }
    adapt_real(rule, l, m, left, f, opts, total, depth + 1)
        + adapt_real(rule, m, r, right, f, opts, total, depth + 1)
}

/// Adaptive Gauss–Legendre integration of a complex vector-valued integrand.
/// `f(t, out)` writes the integrand value into `out` (length `dim`).
pub fn integrate_vec(
    l: f64,
    r: f64,
    dim: usize,
    f: &dyn Fn(f64, &mut [C64]),
    opts: &QuadratureOptions,
) -> Vec<C64> {
    if r <= l {
        return vec![C64::new(0.0, 0.0); dim];
    }
    let rule = panel_rule();
    let mut scratch = vec![C64::new(0.0, 0.0); dim];
    let whole = panel_vec(rule, l, r, f, &mut scratch);
    adapt_vec(rule, l, r, whole, f, opts, r - l, 0, &mut scratch)
}

fn panel_vec(rule: &Rule, l: f64, r: f64, f: &dyn Fn(f64, &mut [C64]), scratch: &mut [C64]) -> Vec<C64> {
    let half = 0.5 * (r - l);
    let mid = 0.5 * (r + l);
    let mut acc = vec![C64::new(0.0, 0.0); scratch.len()];
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        f(mid + half * x, scratch);
        for (a, v) in acc.iter_mut().zip(scratch.iter()) {
            *a += *v * (w * half);
        }
    }
    acc
}

#[allow(clippy::too_many_arguments)]
fn adapt_vec(
    rule: &Rule,
    l: f64,
    r: f64,
    whole: Vec<C64>,
    f: &dyn Fn(f64, &mut [C64]),
    opts: &QuadratureOptions,
    total: f64,
    depth: usize,
    scratch: &mut [C64],
) -> Vec<C64> {
    let m = 0.5 * (l + r);
    let left = panel_vec(rule, l, m, f, scratch);
    let right = panel_vec(rule, m, r, f, scratch);
    let refined: Vec<C64> = left.iter().zip(&right).map(|(a, b)| a + b).collect();
    let diff = refined
        .iter()
        .zip(&whole)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let scale = refined.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let tol = (opts.abs_tol * (r - l) / total).max(opts.rel_tol * scale);
    if !diff.is_finite() || diff <= tol || depth >= opts.max_depth {
        return refined;
    }
    let mut lo = adapt_vec(rule, l, m, left, f, opts, total, depth + 1, scratch);
    let hi = adapt_vec(rule, m, r, right, f, opts, total, depth + 1, scratch);
    for (a, b) in lo.iter_mut().zip(hi) {
        *a += b;
    }
    lo
}
