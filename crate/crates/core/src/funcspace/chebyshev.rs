//! Coefficient-space Chebyshev routines on the reference interval [-1, 1].
//!
//! A series is stored as `c[0..=N]` with `f(x) = Σ c_k T_k(x)` (no halved
//! leading term).

use std::f64::consts::PI;

use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Chebyshev–Lobatto points `cos(πj/N)`, j = 0..=N, in decreasing order.
pub fn lobatto_points(degree: usize) -> Vec<f64> {
    if degree == 0 {
        return vec![0.0];
    }
    let n = degree as f64;
    (0..=degree).map(|j| (PI * j as f64 / n).cos()).collect()
}

/// Clenshaw evaluation at `x ∈ [-1, 1]`.
pub fn evaluate(c: &[C64], x: f64) -> C64 {
    match c.len() {
        0 => ZERO,
        1 => c[0],
        _ => {
            let mut b1 = ZERO;
            let mut b2 = ZERO;
            for &ck in c[1..].iter().rev() {
                let b0 = ck + b1 * (2.0 * x) - b2;
                b2 = b1;
                b1 = b0;
            }
            c[0] + b1 * x - b2
        }
    }
}

/// Coefficients of the interpolant through values sampled at
/// `lobatto_points(values.len() - 1)`.
pub fn interpolate_lobatto(values: &[C64]) -> Vec<C64> {
    let len = values.len();
    if len == 1 {
        return vec![values[0]];
    }
    let n = len - 1;
    let two_n = 2 * n;
    let cos_table: Vec<f64> = (0..two_n).map(|i| (PI * i as f64 / n as f64).cos()).collect();
    let mut coeffs = vec![ZERO; len];
    for (k, ck) in coeffs.iter_mut().enumerate() {
        let mut s = ZERO;
        for (j, &v) in values.iter().enumerate() {
            let w = if j == 0 || j == n { 0.5 } else { 1.0 };
            s += v * (w * cos_table[(j * k) % two_n]);
        }
        let scale = if k == 0 || k == n { 1.0 / n as f64 } else { 2.0 / n as f64 };
        *ck = s * scale;
    }
    coeffs
}

/// Derivative on [-1, 1]; the caller rescales by `2 / (b - a)`.
pub fn differentiate(c: &[C64]) -> Vec<C64> {
    let n = c.len();
    if n <= 1 {
        return vec![ZERO];
    }
    let mut d = vec![ZERO; n + 1];
    for k in (1..n).rev() {
        d[k - 1] = d[k + 1] + c[k] * (2.0 * k as f64);
    }
    d[0] *= 0.5;
    d.truncate(n - 1);
    d
}

/// Definite integral over [-1, 1].
pub fn definite_integral(c: &[C64]) -> C64 {
    c.iter()
        .enumerate()
        .filter(|(k, _)| k % 2 == 0)
        .map(|(k, &ck)| ck * (2.0 / (1.0 - (k * k) as f64)))
        .sum()
}

/// Exact product of two series via `T_i T_j = (T_{i+j} + T_{|i-j|}) / 2`.
pub fn multiply(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return vec![ZERO];
    }
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == ZERO {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            let p = ai * bj * 0.5;
            out[i + j] += p;
            out[i.abs_diff(j)] += p;
        }
    }
    out
}

/// Drops trailing coefficients that are zero to within `rel * max|c|`.
pub fn trim(c: &mut Vec<C64>, rel: f64) {
    let scale = c.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let cut = rel * scale;
    while c.len() > 1 && c.last().is_some_and(|v| v.norm() <= cut) {
        c.pop();
    }
}

/// Whether the trailing part of a series is below `tol * max|c|`.
pub fn is_resolved(c: &[C64], tol: f64) -> bool {
    let scale = c.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return true;
    }
    let tail = (c.len() / 8).max(3).min(c.len());
    c[c.len() - tail..].iter().all(|v| v.norm() <= tol * scale)
}
