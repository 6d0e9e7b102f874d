//! Functions on a finite interval: Chebyshev series, piecewise polynomials
//! and step functions, with differentiation, quadrature and L_p / Sobolev
//! norms.

pub mod chebyshev;
pub mod expr;
pub mod quadrature;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{BvpError, Result};
use crate::C64;
use quadrature::QuadratureOptions;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Degree ceiling for adaptive Chebyshev construction.
pub const MAX_ADAPTIVE_DEGREE: usize = 1024;

/// A finite interval `[a, b]` with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    a: f64,
    b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(BvpError::InvalidInterval { a, b });
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    /// Maps `t ∈ [a, b]` to `x ∈ [-1, 1]`.
    pub fn to_reference(&self, t: f64) -> f64 {
        ((2.0 * t - self.a - self.b) / (self.b - self.a)).clamp(-1.0, 1.0)
    }

    pub fn from_reference(&self, x: f64) -> f64 {
        0.5 * (self.a + self.b) + 0.5 * (self.b - self.a) * x
    }

    /// Membership with a relative slack of `1e-12`.
    pub fn contains(&self, t: f64) -> bool {
        let slack = 1e-12 * self.length();
        t >= self.a - slack && t <= self.b + slack
    }

    /// Chebyshev–Lobatto points mapped to `[a, b]`, increasing.
    pub fn lobatto_points(&self, degree: usize) -> Vec<f64> {
        let mut pts: Vec<f64> = chebyshev::lobatto_points(degree)
            .into_iter()
            .map(|x| self.from_reference(x))
            .collect();
        pts.reverse();
        pts
    }
}

/// The smoothness/size parameters `(n, r, m, p)` of a problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevIndex {
    pub n: usize,
    pub r: usize,
    pub m: usize,
    pub p: f64,
    pub p_conj: f64,
}

impl SobolevIndex {
    pub fn new(n: usize, r: usize, m: usize, p: f64) -> Result<Self> {
        if r == 0 || m == 0 {
            return Err(BvpError::InvalidInput(format!(
                "equation order r and system size m must be positive (r = {r}, m = {m})"
            )));
        }
        Ok(Self {
            n,
            r,
            m,
            p,
            p_conj: conjugate_exponent(p)?,
        })
    }

    /// Highest derivative order `n + r` of the solution space.
    pub fn order(&self) -> usize {
        self.n + self.r
    }

    /// Dimension `r m` of the boundary data.
    pub fn boundary_dim(&self) -> usize {
        self.r * self.m
    }
}

/// Hölder conjugate of `p`.
pub fn conjugate_exponent(p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(BvpError::InvalidExponent(p));
    }
    Ok(if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    })
}

/// Representation family of a [`FunctionRep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Kind {
    /// One coefficient vector per entry (row-major), mapped from [-1, 1].
    Chebyshev(Vec<Vec<C64>>),
    /// Local monomial coefficients in `(t - breaks[cell])`, indexed
    /// `[cell][entry][power]`.
    Piecewise {
        breaks: Vec<f64>,
        pieces: Vec<Vec<Vec<C64>>>,
    },
    /// Right-continuous constant values, indexed `[cell][entry]`.
    Step {
        breaks: Vec<f64>,
        values: Vec<Vec<C64>>,
    },
}

/// A scalar-, vector- or matrix-valued function on an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionRep {
    interval: Interval,
    rows: usize,
    cols: usize,
    kind: Kind,
    #[serde(default)]
    rough: bool,
}

impl FunctionRep {
    pub fn chebyshev(interval: Interval, rows: usize, cols: usize, coeffs: Vec<Vec<C64>>) -> Result<Self> {
        check_shape(rows, cols)?;
        if coeffs.len() != rows * cols {
            return Err(BvpError::DimensionMismatch(format!(
                "expected {} coefficient vectors, got {}",
                rows * cols,
                coeffs.len()
            )));
        }
        let coeffs = coeffs
            .into_iter()
            .map(|c| if c.is_empty() { vec![ZERO] } else { c })
            .collect();
        Ok(Self {
            interval,
            rows,
            cols,
            kind: Kind::Chebyshev(coeffs),
            rough: false,
        })
    }

    /// Scalar Chebyshev series with real coefficients.
    pub fn chebyshev_real(interval: Interval, coeffs: &[f64]) -> Self {
        let c = coeffs.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::chebyshev(interval, 1, 1, vec![c]).expect("1x1 shape")
    }

    /// Interpolates `f` at the `degree + 1` Chebyshev–Lobatto points.
    /// `f(t, out)` fills the row-major entries.
    pub fn from_fn(
        interval: Interval,
        rows: usize,
        cols: usize,
        degree: usize,
        f: impl Fn(f64, &mut [C64]),
    ) -> Result<Self> {
        check_shape(rows, cols)?;
        let entries = rows * cols;
        let pts = chebyshev::lobatto_points(degree);
        let mut samples = vec![vec![ZERO; pts.len()]; entries];
        let mut buf = vec![ZERO; entries];
        for (j, &x) in pts.iter().enumerate() {
            f(interval.from_reference(x), &mut buf);
            for (e, v) in buf.iter().enumerate() {
                samples[e][j] = *v;
            }
        }
        let coeffs = samples
            .iter()
            .map(|s| {
                let mut c = chebyshev::interpolate_lobatto(s);
                chebyshev::trim(&mut c, 4.0 * f64::EPSILON);
                c
            })
            .collect();
        Self::chebyshev(interval, rows, cols, coeffs)
    }

    /// Interpolates with doubling degree until the trailing coefficients
    /// fall below `tol` relative to the largest one.
    pub fn from_fn_adaptive(
        interval: Interval,
        rows: usize,
        cols: usize,
        tol: f64,
        f: impl Fn(f64, &mut [C64]),
    ) -> Result<Self> {
        let mut degree = 16;
        loop {
            let g = Self::from_fn(interval, rows, cols, degree, &f)?;
            let resolved = match &g.kind {
                Kind::Chebyshev(c) => c.iter().all(|ce| ce.len() < degree / 2 || chebyshev::is_resolved(ce, tol)),
                _ => unreachable!(),
            };
            if resolved || degree >= MAX_ADAPTIVE_DEGREE {
                return Ok(g.chop(tol * 1e-3));
            }
            degree *= 2;
        }
    }

    /// Scalar polynomial from monomial coefficients `Σ c_k t^k`.
    pub fn polynomial(interval: Interval, monomial: &[f64]) -> Self {
        let degree = monomial.len().saturating_sub(1);
        Self::from_fn(interval, 1, 1, degree, |t, out| {
            let v = monomial.iter().rev().fold(0.0, |acc, &c| acc * t + c);
            out[0] = C64::new(v, 0.0);
        })
        .expect("1x1 shape")
    }

    /// Constant matrix-valued function.
    pub fn constant(interval: Interval, value: &DMatrix<C64>) -> Self {
        let (rows, cols) = value.shape();
        let coeffs = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| vec![value[(i, j)]])
            .collect();
        Self::chebyshev(interval, rows, cols, coeffs).expect("non-empty matrix")
    }

    pub fn scalar_constant(interval: Interval, value: f64) -> Self {
        Self::chebyshev_real(interval, &[value])
    }

    pub fn zeros(interval: Interval, rows: usize, cols: usize) -> Self {
        Self::constant(interval, &DMatrix::zeros(rows, cols))
    }

    pub fn piecewise(
        interval: Interval,
        rows: usize,
        cols: usize,
        breaks: Vec<f64>,
        pieces: Vec<Vec<Vec<C64>>>,
    ) -> Result<Self> {
        check_shape(rows, cols)?;
        check_breaks(&interval, &breaks)?;
        if pieces.len() + 1 != breaks.len() || pieces.iter().any(|p| p.len() != rows * cols) {
            return Err(BvpError::DimensionMismatch(
                "piecewise polynomial needs one entry list per cell".into(),
            ));
        }
        Ok(Self {
            interval,
            rows,
            cols,
            kind: Kind::Piecewise { breaks, pieces },
            rough: false,
        })
    }

    pub fn step(
        interval: Interval,
        rows: usize,
        cols: usize,
        breaks: Vec<f64>,
        values: Vec<Vec<C64>>,
    ) -> Result<Self> {
        check_shape(rows, cols)?;
        check_breaks(&interval, &breaks)?;
        if values.len() + 1 != breaks.len() || values.iter().any(|v| v.len() != rows * cols) {
            return Err(BvpError::DimensionMismatch(
                "step function needs one value list per cell".into(),
            ));
        }
        Ok(Self {
            interval,
            rows,
            cols,
            kind: Kind::Step { breaks, values },
            rough: false,
        })
    }

    /// Marks the function as a declared rough (non-regulated) kernel.
    pub fn declare_rough(mut self) -> Self {
        self.rough = true;
        self
    }

    pub fn is_declared_rough(&self) -> bool {
        self.rough
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn is_chebyshev(&self) -> bool {
        matches!(self.kind, Kind::Chebyshev(_))
    }

    /// Polynomial degree (Chebyshev or local), 0 for step functions.
    pub fn degree(&self) -> usize {
        match &self.kind {
            Kind::Chebyshev(c) => c.iter().map(|e| e.len()).max().unwrap_or(1) - 1,
            Kind::Piecewise { pieces, .. } => pieces
                .iter()
                .flat_map(|p| p.iter().map(|e| e.len()))
                .max()
                .unwrap_or(1)
                .saturating_sub(1),
            Kind::Step { .. } => 0,
        }
    }

    /// Cell boundaries of the representation; `[a, b]` for Chebyshev series.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            Kind::Chebyshev(_) => vec![self.interval.a, self.interval.b],
            Kind::Piecewise { breaks, .. } | Kind::Step { breaks, .. } => breaks.clone(),
        }
    }

    pub fn chebyshev_coeffs(&self) -> Option<&[Vec<C64>]> {
        match &self.kind {
            Kind::Chebyshev(c) => Some(c),
            _ => None,
        }
    }

    /// Writes the row-major entries at `t` into `out`.
    pub fn eval_into(&self, t: f64, out: &mut [C64]) {
        match &self.kind {
            Kind::Chebyshev(c) => {
                let x = self.interval.to_reference(t);
                for (o, ce) in out.iter_mut().zip(c) {
                    *o = chebyshev::evaluate(ce, x);
                }
            }
            Kind::Piecewise { breaks, pieces } => {
                let cell = cell_index(breaks, t);
                let h = t - breaks[cell];
                for (o, poly) in out.iter_mut().zip(&pieces[cell]) {
                    *o = poly.iter().rev().fold(ZERO, |acc, &c| acc * h + c);
                }
            }
            Kind::Step { breaks, values } => {
                let cell = cell_index(breaks, t);
                out.copy_from_slice(&values[cell]);
            }
        }
    }

    pub fn eval(&self, t: f64) -> DMatrix<C64> {
        let mut buf = vec![ZERO; self.rows * self.cols];
        self.eval_into(t, &mut buf);
        DMatrix::from_row_slice(self.rows, self.cols, &buf)
    }

    /// Value of a scalar (1×1) function.
    pub fn eval_scalar(&self, t: f64) -> C64 {
        let mut buf = [ZERO];
        self.eval_into(t, &mut buf[..1.min(self.rows * self.cols)]);
        buf[0]
    }

    /// `order`-th derivative in the same representation family.
    pub fn derivative(&self, order: usize) -> Result<Self> {
        if order == 0 {
            return Ok(self.clone());
        }
        let kind = match &self.kind {
            Kind::Chebyshev(c) => {
                let scale = 2.0 / self.interval.length();
                Kind::Chebyshev(
                    c.iter()
                        .map(|ce| {
                            let mut d = ce.clone();
                            for _ in 0..order {
                                d = chebyshev::differentiate(&d);
                                d.iter_mut().for_each(|v| *v *= scale);
                            }
                            d
                        })
                        .collect(),
                )
            }
            Kind::Piecewise { breaks, pieces } => Kind::Piecewise {
                breaks: breaks.clone(),
                pieces: pieces
                    .iter()
                    .map(|cell| cell.iter().map(|poly| monomial_derivative(poly, order)).collect())
                    .collect(),
            },
            Kind::Step { .. } => {
                return Err(BvpError::UnsupportedDerivative {
                    order,
                    reason: "step functions are not differentiated".into(),
                })
            }
        };
        Ok(Self { kind, ..self.clone() })
    }

    /// Definite integral over `[a, b]` of every entry (row-major).
    pub fn integral(&self) -> Vec<C64> {
        match &self.kind {
            Kind::Chebyshev(c) => {
                let half = 0.5 * self.interval.length();
                c.iter().map(|ce| chebyshev::definite_integral(ce) * half).collect()
            }
            Kind::Piecewise { breaks, pieces } => {
                let mut acc = vec![ZERO; self.rows * self.cols];
                for (cell, polys) in pieces.iter().enumerate() {
                    let h = breaks[cell + 1] - breaks[cell];
                    for (a, poly) in acc.iter_mut().zip(polys) {
                        *a += poly
                            .iter()
                            .enumerate()
                            .map(|(k, &c)| c * h.powi(k as i32 + 1) / (k as f64 + 1.0))
                            .sum::<C64>();
                    }
                }
                acc
            }
            Kind::Step { breaks, values } => {
                let mut acc = vec![ZERO; self.rows * self.cols];
                for (cell, vals) in values.iter().enumerate() {
                    let h = breaks[cell + 1] - breaks[cell];
                    for (a, v) in acc.iter_mut().zip(vals) {
                        *a += *v * h;
                    }
                }
                acc
            }
        }
    }

    /// Converts any representation into a Chebyshev series (identity for
    /// Chebyshev input).
    pub fn to_chebyshev(&self, tol: f64) -> Result<Self> {
        if self.is_chebyshev() {
            return Ok(self.clone());
        }
        let mut out = Self::from_fn_adaptive(self.interval, self.rows, self.cols, tol, |t, o| self.eval_into(t, o))?;
        out.rough = self.rough;
        Ok(out)
    }

    /// Drops trailing Chebyshev coefficients below `rel` times the largest.
    pub fn chop(mut self, rel: f64) -> Self {
        if let Kind::Chebyshev(c) = &mut self.kind {
            for ce in c.iter_mut() {
                chebyshev::trim(ce, rel);
            }
        }
        self
    }

    pub fn scale(&self, factor: C64) -> Self {
        let kind = match &self.kind {
            Kind::Chebyshev(c) => Kind::Chebyshev(c.iter().map(|e| e.iter().map(|v| v * factor).collect()).collect()),
            Kind::Piecewise { breaks, pieces } => Kind::Piecewise {
                breaks: breaks.clone(),
                pieces: pieces
                    .iter()
                    .map(|cell| cell.iter().map(|p| p.iter().map(|v| v * factor).collect()).collect())
                    .collect(),
            },
            Kind::Step { breaks, values } => Kind::Step {
                breaks: breaks.clone(),
                values: values.iter().map(|cell| cell.iter().map(|v| v * factor).collect()).collect(),
            },
        };
        Self { kind, ..self.clone() }
    }

    /// Sum of two functions of the same shape; non-Chebyshev operands are
    /// combined cellwise on the union of their breakpoints.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        match (&self.kind, &other.kind) {
            (Kind::Chebyshev(a), Kind::Chebyshev(b)) => {
                let coeffs = a.iter().zip(b).map(|(x, y)| add_coeffs(x, y)).collect();
                Self::chebyshev(self.interval, self.rows, self.cols, coeffs)
            }
            _ => self.add_piecewise(other),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    fn add_piecewise(&self, other: &Self) -> Result<Self> {
        let breaks = union_breaks(&self.breakpoints(), &other.breakpoints());
        let both_step = matches!(self.kind, Kind::Step { .. }) && matches!(other.kind, Kind::Step { .. });
        let entries = self.rows * self.cols;
        if both_step {
            let mut values = Vec::with_capacity(breaks.len() - 1);
            let (mut x, mut y) = (vec![ZERO; entries], vec![ZERO; entries]);
            for w in breaks.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                self.eval_into(mid, &mut x);
                other.eval_into(mid, &mut y);
                values.push(x.iter().zip(&y).map(|(u, v)| u + v).collect());
            }
            return Self::step(self.interval, self.rows, self.cols, breaks, values);
        }
        let mut pieces = Vec::with_capacity(breaks.len() - 1);
        for w in breaks.windows(2) {
            let a = self.local_monomials(w[0], w[1])?;
            let b = other.local_monomials(w[0], w[1])?;
            pieces.push(a.iter().zip(&b).map(|(p, q)| add_coeffs(p, q)).collect());
        }
        Self::piecewise(self.interval, self.rows, self.cols, breaks, pieces)
    }

    /// Local monomial coefficients in `(t - l)` on a cell `[l, r]` that lies
    /// inside one smooth piece.
    fn local_monomials(&self, l: f64, r: f64) -> Result<Vec<Vec<C64>>> {
        let entries = self.rows * self.cols;
        match &self.kind {
            Kind::Step { .. } => {
                let mut v = vec![ZERO; entries];
                self.eval_into(0.5 * (l + r), &mut v);
                Ok(v.into_iter().map(|x| vec![x]).collect())
            }
            Kind::Piecewise { breaks, pieces } => {
                let cell = cell_index(breaks, 0.5 * (l + r));
                let shift = l - breaks[cell];
                Ok(pieces[cell].iter().map(|p| shift_monomial(p, shift)).collect())
            }
            Kind::Chebyshev(_) => {
                // Taylor coefficients at l from exact derivatives.
                let degree = self.degree();
                let mut out = vec![Vec::with_capacity(degree + 1); entries];
                let mut d = self.clone();
                let mut buf = vec![ZERO; entries];
                let mut fact = 1.0;
                for k in 0..=degree {
                    if k > 0 {
                        d = d.derivative(1)?;
                        fact *= k as f64;
                    }
                    d.eval_into(l, &mut buf);
                    for (o, v) in out.iter_mut().zip(&buf) {
                        o.push(v / fact);
                    }
                }
                Ok(out)
            }
        }
    }

    /// Matrix product `self · other` of Chebyshev representations.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(BvpError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let a = self.to_chebyshev(1e-14)?;
        let b = other.to_chebyshev(1e-14)?;
        let (ca, cb) = (a.chebyshev_coeffs().unwrap(), b.chebyshev_coeffs().unwrap());
        let mut coeffs = Vec::with_capacity(self.rows * other.cols);
        for i in 0..self.rows {
            for k in 0..other.cols {
                let mut acc = vec![ZERO];
                for j in 0..self.cols {
                    let p = chebyshev::multiply(&ca[i * self.cols + j], &cb[j * other.cols + k]);
                    acc = add_coeffs(&acc, &p);
                }
                coeffs.push(acc);
            }
        }
        Self::chebyshev(self.interval, self.rows, other.cols, coeffs)
    }

    /// Piecewise interpolant of `f` with one degree-`degree` polynomial per
    /// cell of `breaks`. Suited to functions that are smooth inside cells
    /// but singular at a cell boundary.
    pub fn piecewise_from_fn(
        interval: Interval,
        rows: usize,
        cols: usize,
        breaks: Vec<f64>,
        degree: usize,
        f: impl Fn(f64, &mut [C64]),
    ) -> Result<Self> {
        check_shape(rows, cols)?;
        check_breaks(&interval, &breaks)?;
        let pieces = breaks
            .windows(2)
            .map(|w| Self::from_fn(Interval::new(w[0], w[1])?, rows, cols, degree, &f)?.local_monomials(w[0], w[1]))
            .collect::<Result<Vec<_>>>()?;
        Self::piecewise(interval, rows, cols, breaks, pieces)
    }

    /// Assembles a `rows × cols` function from scalar entries in row-major
    /// order. Mixed kinds are combined on the union of their breakpoints.
    pub fn from_entries(rows: usize, cols: usize, entries: &[FunctionRep]) -> Result<Self> {
        check_shape(rows, cols)?;
        if entries.len() != rows * cols || entries.iter().any(|e| e.shape() != (1, 1)) {
            return Err(BvpError::DimensionMismatch(format!(
                "expected {} scalar entries for a {rows}x{cols} function",
                rows * cols
            )));
        }
        let interval = entries[0].interval;
        if entries.iter().any(|e| e.interval != interval) {
            return Err(BvpError::DimensionMismatch("entries live on different intervals".into()));
        }
        let rough = entries.iter().any(|e| e.rough);
        let mut out = if entries.iter().all(|e| e.is_chebyshev()) {
            let coeffs = entries.iter().map(|e| e.chebyshev_coeffs().unwrap()[0].clone()).collect();
            Self::chebyshev(interval, rows, cols, coeffs)?
        } else {
            let mut acc: Option<Self> = None;
            for (idx, e) in entries.iter().enumerate() {
                let embedded = e.embed(rows, cols, idx);
                acc = Some(match acc {
                    None => embedded,
                    Some(a) => a.add(&embedded)?,
                });
            }
            acc.unwrap()
        };
        out.rough = rough;
        Ok(out)
    }

    /// Places a scalar function at row-major position `at` of a zero matrix.
    fn embed(&self, rows: usize, cols: usize, at: usize) -> Self {
        let entries = rows * cols;
        let spread = |v: &C64| -> Vec<C64> {
            let mut cell = vec![ZERO; entries];
            cell[at] = *v;
            cell
        };
        let kind = match &self.kind {
            Kind::Chebyshev(c) => {
                let mut all = vec![vec![ZERO]; entries];
                all[at] = c[0].clone();
                Kind::Chebyshev(all)
            }
            Kind::Piecewise { breaks, pieces } => Kind::Piecewise {
                breaks: breaks.clone(),
                pieces: pieces
                    .iter()
                    .map(|cell| {
                        let mut all = vec![vec![ZERO]; entries];
                        all[at] = cell[0].clone();
                        all
                    })
                    .collect(),
            },
            Kind::Step { breaks, values } => Kind::Step {
                breaks: breaks.clone(),
                values: values.iter().map(|cell| spread(&cell[0])).collect(),
            },
        };
        Self {
            interval: self.interval,
            rows,
            cols,
            kind,
            rough: self.rough,
        }
    }

    /// Extracts column `j` as a `rows × 1` function.
    pub fn column(&self, j: usize) -> Self {
        let pick = |entries: &Vec<Vec<C64>>| -> Vec<Vec<C64>> {
            (0..self.rows).map(|i| entries[i * self.cols + j].clone()).collect()
        };
        let kind = match &self.kind {
            Kind::Chebyshev(c) => Kind::Chebyshev(pick(c)),
            Kind::Piecewise { breaks, pieces } => Kind::Piecewise {
                breaks: breaks.clone(),
                pieces: pieces.iter().map(pick).collect(),
            },
            Kind::Step { breaks, values } => Kind::Step {
                breaks: breaks.clone(),
                values: values
                    .iter()
                    .map(|cell| (0..self.rows).map(|i| cell[i * self.cols + j]).collect())
                    .collect(),
            },
        };
        Self {
            cols: 1,
            kind,
            ..self.clone()
        }
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(BvpError::DimensionMismatch(format!(
                "shapes {:?} and {:?} differ",
                self.shape(),
                other.shape()
            )));
        }
        if self.interval != other.interval {
            return Err(BvpError::DimensionMismatch("functions live on different intervals".into()));
        }
        Ok(())
    }
}

fn check_shape(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(BvpError::DimensionMismatch(format!("empty shape {rows}x{cols}")));
    }
    Ok(())
}

fn check_breaks(interval: &Interval, breaks: &[f64]) -> Result<()> {
    let tol = 1e-12 * interval.length();
    if breaks.len() < 2
        || (breaks[0] - interval.a).abs() > tol
        || (breaks[breaks.len() - 1] - interval.b).abs() > tol
        || breaks.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(BvpError::InvalidPartition(
            "breakpoints must increase strictly from a to b".into(),
        ));
    }
    Ok(())
}

fn cell_index(breaks: &[f64], t: f64) -> usize {
    let cells = breaks.len() - 1;
    breaks.partition_point(|&b| b <= t).saturating_sub(1).min(cells - 1)
}

fn monomial_derivative(poly: &[C64], order: usize) -> Vec<C64> {
    if poly.len() <= order {
        return vec![ZERO];
    }
    (order..poly.len())
        .map(|k| {
            let falling: f64 = ((k - order + 1)..=k).map(|i| i as f64).product();
            poly[k] * falling
        })
        .collect()
}

/// Re-expands `Σ c_k h^k` around `h = shift`.
fn shift_monomial(poly: &[C64], shift: f64) -> Vec<C64> {
    let n = poly.len();
    let mut out = vec![ZERO; n];
    for (k, &c) in poly.iter().enumerate() {
        let mut binom = 1.0;
        for j in 0..=k {
            // coefficient of h'^j in (h' + shift)^k
            out[j] += c * binom * shift.powi((k - j) as i32);
            binom *= (k - j) as f64 / (j + 1) as f64;
        }
    }
    out
}

fn add_coeffs(a: &[C64], b: &[C64]) -> Vec<C64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|k| a.get(k).copied().unwrap_or(ZERO) + b.get(k).copied().unwrap_or(ZERO))
        .collect()
}

/// Sorted union of two breakpoint lists with near-duplicates merged.
pub fn union_breaks(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = x.iter().chain(y).copied().collect();
    all.sort_by(f64::total_cmp);
    let span = all[all.len() - 1] - all[0];
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for v in all {
        if out.last().is_none_or(|&last| v - last > 1e-13 * span) {
            out.push(v);
        }
    }
    out
}

/// L_p norm `(∫ Σ_entries |f|^p)^{1/p}`, or the sampled supremum for `p = ∞`.
pub fn lp_norm(f: &FunctionRep, p: f64) -> Result<f64> {
    lp_norm_with(f, p, &QuadratureOptions::default())
}

pub fn lp_norm_with(f: &FunctionRep, p: f64, opts: &QuadratureOptions) -> Result<f64> {
    let entries = f.rows * f.cols;
    lp_norm_generic(&f.breakpoints(), entries, f.degree(), p, opts, &|t, out| f.eval_into(t, out))
}

/// `lp_norm(f - g, p)` for functions of any representation.
pub fn lp_norm_diff(f: &FunctionRep, g: &FunctionRep, p: f64) -> Result<f64> {
    f.check_same_shape(g)?;
    let entries = f.rows * f.cols;
    let breaks = union_breaks(&f.breakpoints(), &g.breakpoints());
    let degree = f.degree().max(g.degree());
    let gbuf = std::cell::RefCell::new(vec![ZERO; entries]);
    lp_norm_generic(&breaks, entries, degree, p, &QuadratureOptions::default(), &|t, out| {
        f.eval_into(t, out);
        let mut gb = gbuf.borrow_mut();
        g.eval_into(t, &mut gb);
        for (o, v) in out.iter_mut().zip(gb.iter()) {
            *o -= v;
        }
    })
}

fn lp_norm_generic(
    breaks: &[f64],
    entries: usize,
    degree: usize,
    p: f64,
    opts: &QuadratureOptions,
    eval: &dyn Fn(f64, &mut [C64]),
) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(BvpError::InvalidExponent(p));
    }
    let buf = std::cell::RefCell::new(vec![ZERO; entries]);
    let cells = breaks.len() - 1;
    if p.is_infinite() {
        let per_cell = (2048 / cells).max(16 * degree).max(16);
        let mut sup: f64 = 0.0;
        for w in breaks.windows(2) {
            // stay strictly inside the cell so one-sided limits are sampled
            let shrink = 1e-12 * (w[1] - w[0]);
            let cell = Interval::new(w[0] + shrink, w[1] - shrink)?;
            for t in cell.lobatto_points(per_cell) {
                let mut b = buf.borrow_mut();
                eval(t, &mut b);
                sup = b.iter().map(|v| v.norm()).fold(sup, f64::max);
            }
        }
        return Ok(sup);
    }
    let integrand = |t: f64| {
        let mut b = buf.borrow_mut();
        eval(t, &mut b);
        b.iter().map(|v| v.norm().powf(p)).sum::<f64>()
    };
    let total: f64 = breaks
        .windows(2)
        .map(|w| quadrature::integrate(w[0], w[1], &integrand, opts))
        .sum();
    Ok(total.max(0.0).powf(1.0 / p))
}

/// `Σ_{s=0}^{k} ‖f^{(s)}‖_p`.
pub fn sobolev_norm(f: &FunctionRep, k: usize, p: f64) -> Result<f64> {
    let mut total = lp_norm(f, p)?;
    let mut d = f.clone();
    for _ in 0..k {
        d = d.derivative(1)?;
        total += lp_norm(&d, p)?;
    }
    Ok(total)
}

/// Sobolev norm from an explicit derivative list `[f, f', …]`.
pub fn sobolev_norm_of_derivs(derivs: &[FunctionRep], p: f64) -> Result<f64> {
    derivs.iter().map(|d| lp_norm(d, p)).sum()
}

/// Sobolev distance between two derivative lists of equal length.
pub fn sobolev_distance(x: &[FunctionRep], y: &[FunctionRep], p: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(BvpError::DimensionMismatch(format!(
            "derivative lists of lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    x.iter().zip(y).map(|(u, v)| lp_norm_diff(u, v, p)).sum()
}

/// Degree-truncated Chebyshev projection. Chebyshev inputs of degree at
/// most `degree` are returned unchanged.
pub fn project_polynomial(f: &FunctionRep, degree: usize) -> Result<FunctionRep> {
    let cheb = if f.is_chebyshev() {
        f.clone()
    } else {
        let sample_degree = (4 * (degree + 1)).max(1024);
        FunctionRep::from_fn(f.interval, f.rows, f.cols, sample_degree, |t, o| f.eval_into(t, o))?
    };
    let coeffs = cheb
        .chebyshev_coeffs()
        .unwrap()
        .iter()
        .map(|c| c.iter().take(degree + 1).copied().collect())
        .collect();
    FunctionRep::chebyshev(f.interval, f.rows, f.cols, coeffs)
}

/// Cumulative integrals `∫_a^{t_i} f` for increasing `ts` (row-major entries).
pub fn cumulative_integrals(f: &FunctionRep, ts: &[f64]) -> Vec<Vec<C64>> {
    let entries = f.rows * f.cols;
    let breaks = f.breakpoints();
    let opts = QuadratureOptions::default();
    let mut acc = vec![ZERO; entries];
    let mut last = f.interval.a;
    let mut out = Vec::with_capacity(ts.len());
    for &t in ts {
        let mut nodes: Vec<f64> = vec![last];
        nodes.extend(breaks.iter().copied().filter(|&b| b > last && b < t));
        nodes.push(t);
        for w in nodes.windows(2) {
            let part = quadrature::integrate_vec(w[0], w[1], entries, &|s, o| f.eval_into(s, o), &opts);
            for (a, v) in acc.iter_mut().zip(part) {
                *a += v;
            }
        }
        last = t;
        out.push(acc.clone());
    }
    out
}
