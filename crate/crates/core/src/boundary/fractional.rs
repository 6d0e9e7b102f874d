//! Boundary operators built from Caputo derivatives,
//! `B y = Σ_j ∫_a^b β_j(t) (D_{a+}^{l_j} y)(t) dt`.

use nalgebra::DMatrix;
use statrs::function::gamma::gamma;

use super::{check_derivs, check_matrices, CanonicalBoundaryOperator, ZERO};
use crate::error::{BvpError, Result};
use crate::funcspace::quadrature::{self, gauss_jacobi, QuadratureOptions};
use crate::funcspace::{union_breaks, FunctionRep, Interval, SobolevIndex};
use crate::C64;

/// Grading exponent for the outer integral near the base point.
const GRADING: f64 = 4.0;
const MAX_KERNEL_DEGREE: usize = 512;
/// Cells of the kernel mesh halving toward the right end, and the degree
/// used on each, for kernels with a fractional power singularity there.
const GRADED_CELLS: i32 = 30;
const GRADED_DEGREE: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct FractionalTerm {
    pub order: f64,
    pub weight: FunctionRep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FractionalBoundaryOperator {
    index: SobolevIndex,
    interval: Interval,
    terms: Vec<FractionalTerm>,
}

fn is_integer(l: f64) -> bool {
    l.fract() == 0.0
}

fn ceil_order(l: f64) -> usize {
    l.ceil() as usize
}

/// Number of Gauss–Jacobi nodes that integrates a degree-`d` polynomial
/// exactly, with some headroom.
fn jacobi_nodes(degree: usize) -> usize {
    (degree / 2 + 4).max(16)
}

/// Caputo derivative `D_{a+}^l y(t)` of a function given through its
/// derivative list, returned as row-major entries of `y`'s shape.
pub fn caputo_derivative(derivs: &[FunctionRep], order: f64, a: f64, t: f64) -> Result<Vec<C64>> {
    if !(order >= 0.0) {
        return Err(BvpError::OrderOutOfRange { order, bound: f64::INFINITY });
    }
    let c = ceil_order(order);
    let g = derivs.get(c).ok_or_else(|| BvpError::UnsupportedDerivative {
        order: c,
        reason: "derivative list too short for this Caputo order".into(),
    })?;
    let mut out = vec![ZERO; g.rows() * g.cols()];
    if is_integer(order) {
        g.eval_into(t, &mut out);
        return Ok(out);
    }
    if t <= a {
        return Ok(out);
    }
    let nu = c as f64 - order - 1.0;
    let rule = gauss_jacobi(jacobi_nodes(g.degree()), nu, 0.0);
    Ok(caputo_with_rule(g, &rule, nu, a, t))
}

fn caputo_with_rule(g: &FunctionRep, rule: &quadrature::Rule, nu: f64, a: f64, t: f64) -> Vec<C64> {
    let entries = g.rows() * g.cols();
    let mut out = vec![ZERO; entries];
    if t <= a {
        return out;
    }
    let half = 0.5 * (t - a);
    let mut buf = vec![ZERO; entries];
    // s = a + (t-a)(1+x)/2 so that (t-s)^ν = ((t-a)/2)^ν (1-x)^ν
    let mut breaks = g.breakpoints();
    breaks.retain(|&b| b > a && b < t);
    if breaks.is_empty() {
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            g.eval_into(a + half * (1.0 + x), &mut buf);
            for (o, v) in out.iter_mut().zip(&buf) {
                *o += *v * w;
            }
        }
        let scale = half.powf(nu + 1.0) / gamma(nu + 1.0);
        out.iter_mut().for_each(|o| *o *= scale);
        return out;
    }
    // piecewise integrand: singular last segment by Gauss–Jacobi, the rest adaptively
    let last = *breaks.last().unwrap();
    let tail = caputo_with_rule(g, rule, nu, last, t);
    let opts = QuadratureOptions::default();
    let mut pts = vec![a];
    pts.extend(breaks);
    let scratch = std::cell::RefCell::new(vec![ZERO; entries]);
    let integrand = |s: f64, o: &mut [C64]| {
        let mut b = scratch.borrow_mut();
        g.eval_into(s, &mut b);
        let k = (t - s).powf(nu) / gamma(nu + 1.0);
        for (oi, v) in o.iter_mut().zip(b.iter()) {
            *oi = *v * k;
        }
    };
    for w in pts.windows(2) {
        for (o, v) in out.iter_mut().zip(quadrature::integrate_vec(w[0], w[1], entries, &integrand, &opts)) {
            *o += v;
        }
    }
    for (o, v) in out.iter_mut().zip(tail) {
        *o += v;
    }
    out
}

/// `∫_lo^hi w(t) (t - lo)^e dt` for `e > -1`, entrywise on the matrix `w`.
fn moment_from(weight: &FunctionRep, lo: f64, hi: f64, e: f64) -> Vec<C64> {
    let entries = weight.rows() * weight.cols();
    let mut out = vec![ZERO; entries];
    if hi <= lo {
        return out;
    }
    let mut breaks = weight.breakpoints();
    breaks.retain(|&b| b > lo && b < hi);
    let first_end = breaks.first().copied().unwrap_or(hi);
    let mut buf = vec![ZERO; entries];
    if is_integer(e) {
        breaks.insert(0, lo);
    } else {
        let rule = gauss_jacobi(jacobi_nodes(weight.degree()), 0.0, e);
        let half = 0.5 * (first_end - lo);
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            weight.eval_into(lo + half * (1.0 + x), &mut buf);
            for (o, v) in out.iter_mut().zip(&buf) {
                *o += *v * w;
            }
        }
        let scale = half.powf(e + 1.0);
        out.iter_mut().for_each(|o| *o *= scale);
    }
    breaks.push(hi);
    let scratch = std::cell::RefCell::new(vec![ZERO; entries]);
    let integrand = |t: f64, o: &mut [C64]| {
        let mut b = scratch.borrow_mut();
        weight.eval_into(t, &mut b);
        let k = (t - lo).powf(e);
        for (oi, v) in o.iter_mut().zip(b.iter()) {
            *oi = *v * k;
        }
    };
    let opts = QuadratureOptions::default();
    for w in breaks.windows(2) {
        for (o, v) in out.iter_mut().zip(quadrature::integrate_vec(w[0], w[1], entries, &integrand, &opts)) {
            *o += v;
        }
    }
    out
}

impl FractionalBoundaryOperator {
    pub fn new(index: SobolevIndex, interval: Interval, terms: Vec<FractionalTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(BvpError::InvalidInput("fractional operator needs at least one term".into()));
        }
        let inv_p = if index.p.is_infinite() { 0.0 } else { 1.0 / index.p };
        let bound = index.order() as f64 - inv_p;
        let mut prev = f64::NEG_INFINITY;
        for term in &terms {
            let l = term.order;
            if !(l >= 0.0) || l >= bound {
                return Err(BvpError::OrderOutOfRange { order: l, bound });
            }
            if l <= prev {
                return Err(BvpError::InvalidInput(format!(
                    "fractional orders must be strictly increasing ({prev} then {l})"
                )));
            }
            prev = l;
            if term.weight.interval() != interval {
                return Err(BvpError::DimensionMismatch("weight lives on a different interval".into()));
            }
            if term.weight.shape() != (index.boundary_dim(), index.m) {
                return Err(BvpError::DimensionMismatch(format!(
                    "weight of order {l} has shape {:?}, expected {}x{}",
                    term.weight.shape(),
                    index.boundary_dim(),
                    index.m
                )));
            }
        }
        Ok(Self { index, interval, terms })
    }

    pub fn index(&self) -> SobolevIndex {
        self.index
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn terms(&self) -> &[FractionalTerm] {
        &self.terms
    }

    /// Applies the operator to `[y, …, y^(⌈l_max⌉)]`.
    pub fn apply(&self, derivs: &[FunctionRep]) -> Result<DMatrix<C64>> {
        let (rm, m) = (self.index.boundary_dim(), self.index.m);
        let top = ceil_order(self.terms.last().unwrap().order);
        let k = check_derivs(derivs, top + 1, m)?;
        let a = self.interval.a();
        let b = self.interval.b();
        let len = b - a;
        let mut total = vec![ZERO; rm * k];
        for term in &self.terms {
            let l = term.order;
            let c = ceil_order(l);
            let g = &derivs[c];
            let nu = c as f64 - l - 1.0;
            let rule = (!is_integer(l)).then(|| gauss_jacobi(jacobi_nodes(g.degree()), nu, 0.0));
            let wbuf = std::cell::RefCell::new(vec![ZERO; rm * m]);
            let dbuf = std::cell::RefCell::new(vec![ZERO; m * k]);
            // t = a + len·u^GRADING clusters nodes at the base point
            let integrand = |u: f64, out: &mut [C64]| {
                let t = a + len * u.powf(GRADING);
                let jac = len * GRADING * u.powf(GRADING - 1.0);
                let mut w = wbuf.borrow_mut();
                let mut d = dbuf.borrow_mut();
                term.weight.eval_into(t, &mut w);
                match &rule {
                    Some(rule) => d.copy_from_slice(&caputo_with_rule(g, rule, nu, a, t)),
                    None => g.eval_into(t, &mut d),
                }
                for i in 0..rm {
                    for col in 0..k {
                        let mut s = ZERO;
                        for j in 0..m {
                            s += w[i * m + j] * d[j * k + col];
                        }
                        out[i * k + col] = s * jac;
                    }
                }
            };
            let breaks = union_breaks(&term.weight.breakpoints(), &g.breakpoints());
            let ubreaks: Vec<f64> = breaks.iter().map(|&t| ((t - a) / len).max(0.0).powf(1.0 / GRADING)).collect();
            let opts = QuadratureOptions::default();
            for w in ubreaks.windows(2) {
                for (o, v) in total.iter_mut().zip(quadrature::integrate_vec(w[0], w[1], rm * k, &integrand, &opts)) {
                    *o += v;
                }
            }
        }
        Ok(DMatrix::from_row_slice(rm, k, &total))
    }

    /// Canonical form by Taylor expansion of `y^(⌈l⌉)` about `a`:
    /// `α_k = Σ_j ∫ β_j(t)(t-a)^{k-l_j}/Γ(k-l_j+1) dt` for `⌈l_j⌉ ≤ k < n+r`
    /// and `Φ(τ) = Σ_j ∫_τ^b β_j(t)(t-τ)^{n+r-1-l_j}/Γ(n+r-l_j) dt`.
    pub fn to_canonical(&self) -> Result<CanonicalBoundaryOperator> {
        let order = self.index.order();
        let (rm, m) = (self.index.boundary_dim(), self.index.m);
        let (a, b) = (self.interval.a(), self.interval.b());
        let mut alphas = vec![DMatrix::<C64>::zeros(rm, m); order];
        for term in &self.terms {
            let l = term.order;
            for (k, alpha) in alphas.iter_mut().enumerate().skip(ceil_order(l)) {
                let e = k as f64 - l;
                let mom = moment_from(&term.weight, a, b, e);
                *alpha += DMatrix::from_row_slice(rm, m, &mom) / C64::new(gamma(e + 1.0), 0.0);
            }
        }
        check_matrices(&self.index, &alphas, "alpha")?;
        let terms = &self.terms;
        let kernel = |tau: f64, out: &mut [C64]| {
            out.iter_mut().for_each(|o| *o = ZERO);
            for term in terms {
                let e = order as f64 - 1.0 - term.order;
                let g = gamma(e + 1.0);
                for (o, v) in out.iter_mut().zip(moment_from(&term.weight, tau, b, e)) {
                    *o += v / g;
                }
            }
        };
        // Φ behaves like (b-τ)^{n+r-l} at the right end
        let singular = self.terms.iter().any(|t| !is_integer(t.order));
        let phi = if singular {
            let len = b - a;
            let mut breaks = vec![a];
            breaks.extend((1..=GRADED_CELLS).map(|k| b - len * 0.5f64.powi(k)));
            breaks.push(b);
            FunctionRep::piecewise_from_fn(self.interval, rm, m, breaks, GRADED_DEGREE, kernel)?
        } else {
            let mut degree = 16;
            loop {
                let f = FunctionRep::from_fn(self.interval, rm, m, degree, kernel)?;
                let resolved = f
                    .chebyshev_coeffs()
                    .map(|c| c.iter().all(|ce| ce.len() < degree / 2 || crate::funcspace::chebyshev::is_resolved(ce, 1e-13)))
                    .unwrap_or(true);
                if resolved || degree >= MAX_KERNEL_DEGREE {
                    break f;
                }
                degree *= 2;
            }
        };
        CanonicalBoundaryOperator::new(self.index, self.interval, a, alphas, phi)
    }
}
