//! Boundary operators `B: (W_p^{n+r})^m → C^{rm}` in canonical, multipoint
//! and Caputo-fractional form.
//!
//! Every operator acts on a derivative list `[y, y', …]` whose entries are
//! `m × k` functions; the result is an `rm × k` matrix, so applying an
//! operator to the stacked fundamental system yields the characteristic
//! matrix directly.

mod fractional;
mod stieltjes;

pub use fractional::{caputo_derivative, FractionalBoundaryOperator, FractionalTerm};
pub use stieltjes::{dyadic_partition, stieltjes_multipoint, uniform_partition};

use nalgebra::DMatrix;

use crate::error::{BvpError, Result};
use crate::funcspace::quadrature::{self, QuadratureOptions};
use crate::funcspace::{lp_norm, union_breaks, FunctionRep, Interval, Kind, SobolevIndex};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// `B y = Σ_{s<n+r} α_s y^(s)(t0) + ∫_a^b Φ(t) y^(n+r)(t) dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalBoundaryOperator {
    index: SobolevIndex,
    interval: Interval,
    t0: f64,
    alphas: Vec<DMatrix<C64>>,
    phi: FunctionRep,
}

/// `B y = Σ_{s<n+r} α_s y^(s)(t0) + Σ_j β_j y^(n+r-1)(t_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipointBoundaryOperator {
    index: SobolevIndex,
    interval: Interval,
    t0: f64,
    alphas: Vec<DMatrix<C64>>,
    points: Vec<f64>,
    betas: Vec<DMatrix<C64>>,
}

/// A point evaluation `C · y^(order)(point)` with `C ∈ C^{rm×m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEvaluation {
    pub order: usize,
    pub point: f64,
    pub coefficient: DMatrix<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryOperator {
    Canonical(CanonicalBoundaryOperator),
    Multipoint(MultipointBoundaryOperator),
    Fractional(FractionalBoundaryOperator),
}

fn check_alphas(index: &SobolevIndex, alphas: &[DMatrix<C64>]) -> Result<()> {
    let order = index.order();
    if alphas.len() != order {
        return Err(BvpError::DimensionMismatch(format!(
            "expected {order} alpha matrices (orders 0..n+r-1), got {}",
            alphas.len()
        )));
    }
    check_matrices(index, alphas, "alpha")
}

fn check_matrices(index: &SobolevIndex, mats: &[DMatrix<C64>], what: &str) -> Result<()> {
    let (rm, m) = (index.boundary_dim(), index.m);
    for (s, a) in mats.iter().enumerate() {
        if a.shape() != (rm, m) {
            return Err(BvpError::DimensionMismatch(format!(
                "{what}[{s}] has shape {:?}, expected {rm}x{m}",
                a.shape()
            )));
        }
    }
    Ok(())
}

fn check_point(interval: &Interval, t: f64) -> Result<()> {
    if !interval.contains(t) {
        return Err(BvpError::PointOutOfInterval {
            point: t,
            a: interval.a(),
            b: interval.b(),
        });
    }
    Ok(())
}

fn check_derivs(derivs: &[FunctionRep], needed: usize, m: usize) -> Result<usize> {
    if derivs.len() < needed {
        return Err(BvpError::DimensionMismatch(format!(
            "boundary operator needs derivatives up to order {}, got {}",
            needed - 1,
            derivs.len().saturating_sub(1)
        )));
    }
    let k = derivs[0].cols();
    if derivs[..needed].iter().any(|d| d.shape() != (m, k)) {
        return Err(BvpError::DimensionMismatch(format!("derivatives must all be {m}x{k}")));
    }
    Ok(k)
}

fn alpha_part(alphas: &[DMatrix<C64>], t0: f64, derivs: &[FunctionRep]) -> DMatrix<C64> {
    let mut acc = DMatrix::zeros(alphas[0].nrows(), derivs[0].cols());
    for (alpha, d) in alphas.iter().zip(derivs) {
        if alpha.iter().all(|v| *v == ZERO) {
            continue;
        }
        acc += alpha * d.eval(t0);
    }
    acc
}

/// Whether a function is identically zero in its stored representation.
fn is_zero_function(f: &FunctionRep) -> bool {
    match f.kind() {
        Kind::Chebyshev(c) => c.iter().flatten().all(|v| *v == ZERO),
        Kind::Piecewise { pieces, .. } => pieces.iter().flatten().flatten().all(|v| *v == ZERO),
        Kind::Step { values, .. } => values.iter().flatten().all(|v| *v == ZERO),
    }
}

impl CanonicalBoundaryOperator {
    pub fn new(
        index: SobolevIndex,
        interval: Interval,
        t0: f64,
        alphas: Vec<DMatrix<C64>>,
        phi: FunctionRep,
    ) -> Result<Self> {
        check_alphas(&index, &alphas)?;
        check_point(&interval, t0)?;
        if phi.shape() != (index.boundary_dim(), index.m) || phi.interval() != interval {
            return Err(BvpError::DimensionMismatch(format!(
                "kernel Φ must be {}x{} on the problem interval",
                index.boundary_dim(),
                index.m
            )));
        }
        let norm = lp_norm(&phi, index.p_conj)?;
        if !norm.is_finite() {
            return Err(BvpError::InvalidInput("kernel Φ has infinite L_p' norm".into()));
        }
        Ok(Self {
            index,
            interval,
            t0,
            alphas,
            phi,
        })
    }

    /// Builds a canonical operator from point evaluations of derivatives of
    /// order `< n + r` at arbitrary points, plus optional extra α-terms at
    /// `t0` and an extra kernel. Each evaluation `y^(s)(τ)` is rewritten by
    /// Taylor's formula with integral remainder around `t0`.
    pub fn from_point_evaluations(
        index: SobolevIndex,
        interval: Interval,
        t0: f64,
        evaluations: &[PointEvaluation],
        extra_alphas: Option<Vec<DMatrix<C64>>>,
        extra_phi: Option<FunctionRep>,
    ) -> Result<Self> {
        let order = index.order();
        let (rm, m) = (index.boundary_dim(), index.m);
        check_point(&interval, t0)?;
        let mut alphas = match extra_alphas {
            Some(a) => {
                check_alphas(&index, &a)?;
                a
            }
            None => vec![DMatrix::zeros(rm, m); order],
        };
        let mut breaks = vec![interval.a(), interval.b(), t0];
        for ev in evaluations {
            if ev.order >= order {
                return Err(BvpError::UnsupportedDerivative {
                    order: ev.order,
                    reason: format!("point evaluations are limited to orders below n + r = {order}"),
                });
            }
            check_point(&interval, ev.point)?;
            check_matrices(&index, std::slice::from_ref(&ev.coefficient), "point coefficient")?;
            let dt = ev.point - t0;
            let mut fact = 1.0;
            for k in ev.order..order {
                if k > ev.order {
                    fact *= (k - ev.order) as f64;
                }
                alphas[k] += &ev.coefficient * C64::new(dt.powi((k - ev.order) as i32) / fact, 0.0);
            }
            breaks.push(ev.point.clamp(interval.a(), interval.b()));
        }
        breaks.sort_by(f64::total_cmp);
        let breaks = union_breaks(&breaks, &[]);
        let entries = rm * m;
        let mut pieces = Vec::with_capacity(breaks.len() - 1);
        for w in breaks.windows(2) {
            let (l, r) = (w[0], w[1]);
            let mid = 0.5 * (l + r);
            let mut cell = vec![vec![ZERO; order]; entries];
            for ev in evaluations {
                let (lo, hi) = if ev.point >= t0 { (t0, ev.point) } else { (ev.point, t0) };
                if !(mid > lo && mid < hi) {
                    continue;
                }
                let sign = if ev.point >= t0 { 1.0 } else { -1.0 };
                let q = order - 1 - ev.order;
                let qfact: f64 = (1..=q).map(|i| i as f64).product();
                // (τ - t)^q / q! with t = l + h, expanded in powers of h
                let base = ev.point - l;
                let mut binom = 1.0;
                for j in 0..=q {
                    let c = sign * binom * base.powi((q - j) as i32) * if j % 2 == 0 { 1.0 } else { -1.0 } / qfact;
                    for e in 0..entries {
                        cell[e][j] += ev.coefficient[(e / m, e % m)] * c;
                    }
                    binom *= (q - j) as f64 / (j + 1) as f64;
                }
            }
            pieces.push(cell);
        }
        let mut phi = FunctionRep::piecewise(interval, rm, m, breaks, pieces)?;
        if let Some(extra) = extra_phi {
            phi = phi.add(&extra)?;
        }
        Self::new(index, interval, t0, alphas, phi)
    }

    pub fn index(&self) -> SobolevIndex {
        self.index
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn alphas(&self) -> &[DMatrix<C64>] {
        &self.alphas
    }

    pub fn phi(&self) -> &FunctionRep {
        &self.phi
    }

    /// Applies the operator to `[y, …, y^(n+r)]`.
    pub fn apply(&self, derivs: &[FunctionRep]) -> Result<DMatrix<C64>> {
        let order = self.index.order();
        let phi_zero = is_zero_function(&self.phi);
        let needed = if phi_zero { order } else { order + 1 };
        let k = check_derivs(derivs, needed, self.index.m)?;
        let mut out = alpha_part(&self.alphas, self.t0, derivs);
        if !phi_zero {
            out += integrate_product(&self.phi, &derivs[order], k)?;
        }
        Ok(out)
    }

    /// `C(B)` with `|B y| ≤ C(B) ‖y‖_{n+r,p}`; on a unit interval with
    /// `m = 1` this is `Σ_s ‖α_s‖ + ‖Φ‖_{p'}`.
    pub fn bound_constant(&self) -> Result<f64> {
        let p = self.index.p;
        let len = self.interval.length();
        let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
        let embed = len.powf(-inv_p).max(len.powf(1.0 - inv_p));
        let m = self.index.m as f64;
        let rm = self.index.boundary_dim() as f64;
        let alpha_sum: f64 = self.alphas.iter().map(|a| a.clone().svd(false, false).singular_values.max()).sum();
        Ok(embed * m.powf(1.0 - inv_p) * alpha_sum + rm.powf(inv_p) * lp_norm(&self.phi, self.index.p_conj)?)
    }
}

/// `∫_a^b Φ(t) Y(t) dt` for `Φ: rm × m`, `Y: m × k`, split at breakpoints.
fn integrate_product(phi: &FunctionRep, y: &FunctionRep, k: usize) -> Result<DMatrix<C64>> {
    let (rows, inner) = phi.shape();
    if y.rows() != inner {
        return Err(BvpError::DimensionMismatch("kernel and derivative shapes disagree".into()));
    }
    let breaks = union_breaks(&phi.breakpoints(), &y.breakpoints());
    let opts = QuadratureOptions::default();
    let mut acc = vec![ZERO; rows * k];
    let pbuf = std::cell::RefCell::new(vec![ZERO; rows * inner]);
    let ybuf = std::cell::RefCell::new(vec![ZERO; inner * k]);
    let integrand = |t: f64, out: &mut [C64]| {
        let mut pb = pbuf.borrow_mut();
        let mut yb = ybuf.borrow_mut();
        phi.eval_into(t, &mut pb);
        y.eval_into(t, &mut yb);
        for i in 0..rows {
            for c in 0..k {
                let mut s = ZERO;
                for j in 0..inner {
                    s += pb[i * inner + j] * yb[j * k + c];
                }
                out[i * k + c] = s;
            }
        }
    };
    for w in breaks.windows(2) {
        let part = quadrature::integrate_vec(w[0], w[1], rows * k, &integrand, &opts);
        for (a, v) in acc.iter_mut().zip(part) {
            *a += v;
        }
    }
    Ok(DMatrix::from_row_slice(rows, k, &acc))
}

impl MultipointBoundaryOperator {
    pub fn new(
        index: SobolevIndex,
        interval: Interval,
        t0: f64,
        alphas: Vec<DMatrix<C64>>,
        points: Vec<f64>,
        betas: Vec<DMatrix<C64>>,
    ) -> Result<Self> {
        check_alphas(&index, &alphas)?;
        check_point(&interval, t0)?;
        if points.len() != betas.len() {
            return Err(BvpError::DimensionMismatch(format!(
                "{} points but {} beta matrices",
                points.len(),
                betas.len()
            )));
        }
        for &t in &points {
            check_point(&interval, t)?;
        }
        check_matrices(&index, &betas, "beta")?;
        Ok(Self {
            index,
            interval,
            t0,
            alphas,
            points,
            betas,
        })
    }

    pub fn index(&self) -> SobolevIndex {
        self.index
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn alphas(&self) -> &[DMatrix<C64>] {
        &self.alphas
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn betas(&self) -> &[DMatrix<C64>] {
        &self.betas
    }

    /// Applies the operator to `[y, …, y^(n+r-1)]`.
    pub fn apply(&self, derivs: &[FunctionRep]) -> Result<DMatrix<C64>> {
        let order = self.index.order();
        check_derivs(derivs, order, self.index.m)?;
        let mut out = alpha_part(&self.alphas, self.t0, derivs);
        let top = &derivs[order - 1];
        for (&t, beta) in self.points.iter().zip(&self.betas) {
            out += beta * top.eval(t);
        }
        Ok(out)
    }

    /// Canonical form: `β_j y^(n+r-1)(t_j)` becomes an α-term at `t0` plus a
    /// step kernel supported between `t0` and `t_j`.
    pub fn to_canonical(&self) -> Result<CanonicalBoundaryOperator> {
        let order = self.index.order();
        let (rm, m) = (self.index.boundary_dim(), self.index.m);
        let mut alphas = self.alphas.clone();
        for beta in &self.betas {
            alphas[order - 1] += beta;
        }
        let mut pts = self.points.clone();
        pts.extend([self.interval.a(), self.interval.b(), self.t0]);
        pts.sort_by(f64::total_cmp);
        let breaks = union_breaks(&pts, &[]);
        let values = breaks
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let mut v = DMatrix::<C64>::zeros(rm, m);
                for (&t, beta) in self.points.iter().zip(&self.betas) {
                    if t > self.t0 && mid > self.t0 && mid < t {
                        v += beta;
                    } else if t < self.t0 && mid > t && mid < self.t0 {
                        v -= beta;
                    }
                }
                (0..rm).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| v[(i, j)]).collect()
            })
            .collect();
        let phi = FunctionRep::step(self.interval, rm, m, breaks, values)?;
        CanonicalBoundaryOperator::new(self.index, self.interval, self.t0, alphas, phi)
    }
}

impl BoundaryOperator {
    pub fn index(&self) -> SobolevIndex {
        match self {
            Self::Canonical(b) => b.index,
            Self::Multipoint(b) => b.index,
            Self::Fractional(b) => b.index(),
        }
    }

    pub fn interval(&self) -> Interval {
        match self {
            Self::Canonical(b) => b.interval,
            Self::Multipoint(b) => b.interval,
            Self::Fractional(b) => b.interval(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Canonical(_) => "canonical",
            Self::Multipoint(_) => "multipoint",
            Self::Fractional(_) => "fractional",
        }
    }

    /// Applies the operator to a derivative list reaching order `n + r`.
    pub fn apply(&self, derivs: &[FunctionRep]) -> Result<DMatrix<C64>> {
        match self {
            Self::Canonical(b) => b.apply(derivs),
            Self::Multipoint(b) => b.apply(derivs),
            Self::Fractional(b) => b.apply(derivs),
        }
    }

    /// The equivalent canonical representation.
    pub fn to_canonical(&self) -> Result<CanonicalBoundaryOperator> {
        match self {
            Self::Canonical(b) => Ok(b.clone()),
            Self::Multipoint(b) => b.to_canonical(),
            Self::Fractional(b) => b.to_canonical(),
        }
    }
}
