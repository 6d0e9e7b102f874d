//! Matrix Cauchy problems for `y^(r) + Σ_j A_j y^(j) = f`: the fundamental
//! system, particular solutions, and derivatives beyond order `r` obtained
//! from the equation itself.

pub mod rk;

use nalgebra::DMatrix;

use crate::error::{BvpError, Result};
use crate::funcspace::{chebyshev, lp_norm_diff, FunctionRep, Interval, SobolevIndex};
use crate::C64;
use rk::RkOptions;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Default solver tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// The differential expression `L y = y^(r) + Σ_{j<r} A_j y^(j)`.
///
/// `coefficients[j]` is the `m × m` matrix function multiplying `y^(j)`,
/// for `j = 0, …, r-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSystem {
    index: SobolevIndex,
    interval: Interval,
    coefficients: Vec<FunctionRep>,
    /// `coefficient_derivs[j][i]` = i-th derivative of `A_j`, i = 0..=n.
    coefficient_derivs: Vec<Vec<FunctionRep>>,
}

impl OdeSystem {
    pub fn new(index: SobolevIndex, interval: Interval, coefficients: Vec<FunctionRep>) -> Result<Self> {
        if coefficients.len() != index.r {
            return Err(BvpError::DimensionMismatch(format!(
                "expected {} coefficient matrices, got {}",
                index.r,
                coefficients.len()
            )));
        }
        let mut cheb = Vec::with_capacity(index.r);
        for (j, a) in coefficients.into_iter().enumerate() {
            if a.shape() != (index.m, index.m) {
                return Err(BvpError::DimensionMismatch(format!(
                    "coefficient A_{j} has shape {:?}, expected {m}x{m}",
                    a.shape(),
                    m = index.m
                )));
            }
            if a.interval() != interval {
                return Err(BvpError::DimensionMismatch(format!("coefficient A_{j} lives on another interval")));
            }
            cheb.push(a.to_chebyshev(1e-14)?);
        }
        let coefficient_derivs = cheb
            .iter()
            .map(|a| {
                let mut list = vec![a.clone()];
                for i in 1..=index.n {
                    list.push(list[i - 1].derivative(1)?);
                }
                Ok(list)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            index,
            interval,
            coefficients: cheb,
            coefficient_derivs,
        })
    }

    /// Constant-coefficient system from numeric `m × m` matrices.
    pub fn constant(index: SobolevIndex, interval: Interval, matrices: &[DMatrix<C64>]) -> Result<Self> {
        let coeffs = matrices.iter().map(|a| FunctionRep::constant(interval, a)).collect();
        Self::new(index, interval, coeffs)
    }

    pub fn index(&self) -> SobolevIndex {
        self.index
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    /// `A_j`, the coefficient of `y^(j)`.
    pub fn coefficient(&self, j: usize) -> &FunctionRep {
        &self.coefficients[j]
    }

    pub fn coefficients(&self) -> &[FunctionRep] {
        &self.coefficients
    }

    fn max_degree(&self) -> usize {
        self.coefficients.iter().map(|a| a.degree()).max().unwrap_or(0)
    }

    /// Applies `L` to a derivative list `[y, …, y^(r)]` (m × k functions).
    pub fn apply(&self, derivs: &[FunctionRep]) -> Result<FunctionRep> {
        let r = self.index.r;
        if derivs.len() <= r {
            return Err(BvpError::DimensionMismatch(format!(
                "applying L needs derivatives up to order {r}"
            )));
        }
        let mut acc = derivs[r].to_chebyshev(1e-14)?;
        for j in 0..r {
            acc = acc.add(&self.coefficients[j].matmul(&derivs[j])?)?;
        }
        Ok(acc)
    }

    /// `(L y)^(k)` for `k = 0..=order` by the product rule, from a
    /// derivative list reaching order `r + order`.
    pub fn apply_derivatives(&self, derivs: &[FunctionRep], order: usize) -> Result<Vec<FunctionRep>> {
        let r = self.index.r;
        if order > self.index.n || derivs.len() <= r + order {
            return Err(BvpError::UnsupportedDerivative {
                order,
                reason: format!(
                    "need derivative list up to order {} and order <= n = {}",
                    r + order,
                    self.index.n
                ),
            });
        }
        (0..=order)
            .map(|k| {
                let mut acc = derivs[r + k].to_chebyshev(1e-14)?;
                for j in 0..r {
                    for i in 0..=k {
                        let term = self.coefficient_derivs[j][i].matmul(&derivs[j + k - i])?;
                        acc = acc.add(&term.scale(C64::new(binomial(k, i), 0.0)))?;
                    }
                }
                Ok(acc.chop(1e-16))
            })
            .collect()
    }

    fn check_rhs(&self, f: &FunctionRep) -> Result<()> {
        if f.shape() != (self.index.m, 1) {
            return Err(BvpError::DimensionMismatch(format!(
                "right-hand side has shape {:?}, expected {}x1",
                f.shape(),
                self.index.m
            )));
        }
        if f.interval() != self.interval {
            return Err(BvpError::DimensionMismatch("right-hand side lives on another interval".into()));
        }
        Ok(())
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// The matrix solutions `Y_1, …, Y_r` with `Y_i^(j-1)(a) = δ_ij I`.
#[derive(Debug, Clone)]
pub struct FundamentalSystem {
    index: SobolevIndex,
    /// `stacked[s]` = `[Y_1^(s) … Y_r^(s)]`, an `m × rm` function.
    stacked: Vec<FunctionRep>,
}

impl FundamentalSystem {
    pub fn index(&self) -> SobolevIndex {
        self.index
    }

    /// Derivatives `s = 0..=n+r` of the horizontally stacked `[Y_1 … Y_r]`.
    pub fn stacked_derivatives(&self) -> &[FunctionRep] {
        &self.stacked
    }

    /// `Y_i^(s)` for `i = 1..=r`.
    pub fn block(&self, i: usize, s: usize) -> FunctionRep {
        let m = self.index.m;
        let cols: Vec<FunctionRep> = ((i - 1) * m..i * m).map(|c| self.stacked[s].column(c)).collect();
        hstack(&cols)
    }

    /// The `rm × rm` block matrix `[Y_i^(j-1)(t)]` (rows j, block columns i).
    pub fn wronskian(&self, t: f64) -> DMatrix<C64> {
        let (r, m) = (self.index.r, self.index.m);
        let mut w = DMatrix::zeros(r * m, r * m);
        for j in 0..r {
            let v = self.stacked[j].eval(t);
            w.view_mut((j * m, 0), (m, r * m)).copy_from(&v);
        }
        w
    }
}

fn hstack(cols: &[FunctionRep]) -> FunctionRep {
    let rows = cols[0].rows();
    let interval = cols[0].interval();
    let coeffs: Vec<Vec<C64>> = (0..rows)
        .flat_map(|i| cols.iter().map(move |c| c.chebyshev_coeffs().expect("chebyshev")[i].clone()))
        .collect();
    FunctionRep::chebyshev(interval, rows, cols.len(), coeffs).expect("consistent shapes")
}

/// Solves the `r` matrix Cauchy problems in one pass over the first-order
/// system of size `rm` with an `rm × rm` state.
pub fn solve_fundamental(system: &OdeSystem, tol: f64) -> Result<FundamentalSystem> {
    let rm = system.index.boundary_dim();
    let init = DMatrix::<C64>::identity(rm, rm);
    let lower = integrate_columns(system, &init, None, tol)?;
    let stacked = extend_derivatives(system, lower, None, system.index.order())?;
    Ok(FundamentalSystem {
        index: system.index,
        stacked,
    })
}

/// The solution of `L y = f` with zero Cauchy data at `a`.
pub fn solve_particular(system: &OdeSystem, f: &FunctionRep, tol: f64) -> Result<FunctionRep> {
    Ok(solve_particular_derivs(system, f, tol)?.swap_remove(0))
}

/// Like [`solve_particular`] but returns the derivative list up to `n + r`.
pub fn solve_particular_derivs(system: &OdeSystem, f: &FunctionRep, tol: f64) -> Result<Vec<FunctionRep>> {
    system.check_rhs(f)?;
    let f = f.to_chebyshev(1e-14)?;
    let rm = system.index.boundary_dim();
    let init = DMatrix::<C64>::zeros(rm, 1);
    let lower = integrate_columns(system, &init, Some(&f), tol)?;
    extend_derivatives(system, lower, Some(&f), system.index.order())
}

/// `[y, y', …, y^(upto)]` where orders below `r` come from differentiating
/// `y` and orders from `r` on come from the rearranged equation.
pub fn higher_derivatives(
    system: &OdeSystem,
    y: &FunctionRep,
    f: Option<&FunctionRep>,
    upto: usize,
) -> Result<Vec<FunctionRep>> {
    let order = system.index.order();
    if upto > order {
        return Err(BvpError::UnsupportedDerivative {
            order: upto,
            reason: format!("derivatives are available up to n + r = {order}"),
        });
    }
    if let Some(f) = f {
        system.check_rhs(f)?;
    }
    let r = system.index.r;
    let y = y.to_chebyshev(1e-14)?;
    let mut lower = vec![y];
    for s in 1..r.min(upto + 1) {
        lower.push(lower[s - 1].derivative(1)?);
    }
    if upto < r {
        return Ok(lower);
    }
    let f = f.map(|f| f.to_chebyshev(1e-14)).transpose()?;
    extend_derivatives(system, lower, f.as_ref(), upto)
}

/// Applies the recurrence
/// `y^(r+k) = f^(k) - Σ_j Σ_i C(k,i) A_j^(i) y^(j+k-i)`.
fn extend_derivatives(
    system: &OdeSystem,
    mut derivs: Vec<FunctionRep>,
    f: Option<&FunctionRep>,
    upto: usize,
) -> Result<Vec<FunctionRep>> {
    let r = system.index.r;
    let (rows, cols) = derivs[0].shape();
    let interval = system.interval;
    let mut f_derivs = Vec::new();
    if let Some(f) = f {
        f_derivs.push(f.clone());
        for k in 1..=upto.saturating_sub(r) {
            f_derivs.push(f_derivs[k - 1].derivative(1)?);
        }
    }
    for k in 0..=upto.saturating_sub(r) {
        if r + k > upto {
            break;
        }
        let mut acc = match f_derivs.get(k) {
            Some(fk) => fk.clone(),
            None => FunctionRep::zeros(interval, rows, cols),
        };
        for j in 0..r {
            for i in 0..=k {
                let term = system.coefficient_derivs[j][i].matmul(&derivs[j + k - i])?;
                acc = acc.sub(&term.scale(C64::new(binomial(k, i), 0.0)))?;
            }
        }
        derivs.push(acc.chop(1e-16));
    }
    Ok(derivs)
}

/// Integrates the first-order system for every column of `init` and
/// returns Chebyshev interpolants of `y, …, y^(r-1)` (each `m × K`).
fn integrate_columns(
    system: &OdeSystem,
    init: &DMatrix<C64>,
    forcing: Option<&FunctionRep>,
    tol: f64,
) -> Result<Vec<FunctionRep>> {
    if !(tol > 0.0) {
        return Err(BvpError::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let (r, m) = (system.index.r, system.index.m);
    let rm = r * m;
    let ncols = init.ncols();
    let interval = system.interval;
    let coeff_degree = system
        .max_degree()
        .max(forcing.map_or(0, |f| f.degree()));
    let mut degree = 64usize.max(4 * coeff_degree).next_power_of_two();

    // state layout: column c occupies [c*rm, (c+1)*rm), block j holds y^(j)
    let y0: Vec<C64> = (0..ncols).flat_map(|c| (0..rm).map(move |i| init[(i, c)])).collect();
    let coeffs = &system.coefficients;
    let rhs = |t: f64, z: &[C64], dz: &mut [C64]| {
        let mut a = vec![ZERO; m * m];
        let mut g = vec![ZERO; m];
        if let Some(f) = forcing {
            f.eval_into(t, &mut g);
        }
        for c in 0..ncols {
            let base = c * rm;
            dz[base..base + rm - m].copy_from_slice(&z[base + m..base + rm]);
            let top = base + rm - m;
            dz[top..top + m].copy_from_slice(&g);
        }
        for (j, aj) in coeffs.iter().enumerate() {
            aj.eval_into(t, &mut a);
            for c in 0..ncols {
                let base = c * rm;
                let top = base + rm - m;
                let yj = &z[base + j * m..base + (j + 1) * m];
                for row in 0..m {
                    let mut s = ZERO;
                    for col in 0..m {
                        s += a[row * m + col] * yj[col];
                    }
                    dz[top + row] -= s;
                }
            }
        }
    };
    let inner = (tol * 1e-2).max(1e-14);
    let opts = RkOptions {
        rtol: inner,
        atol: inner,
        ..RkOptions::default()
    };
    let resolve_tol = (100.0 * tol).max(1e-13);
    loop {
        let stops = interval.lobatto_points(degree);
        let states = rk::integrate_to_stops(&rhs, &y0, &stops, &opts)?;
        // samples were taken at increasing t; Lobatto order is decreasing
        let mut derivs = Vec::with_capacity(r);
        let mut resolved = true;
        for j in 0..r {
            let mut coeffs = Vec::with_capacity(m * ncols);
            for row in 0..m {
                for c in 0..ncols {
                    let idx = c * rm + j * m + row;
                    let samples: Vec<C64> = states.iter().rev().map(|s| s[idx]).collect();
                    let mut ce = chebyshev::interpolate_lobatto(&samples);
                    resolved &= chebyshev::is_resolved(&ce, resolve_tol);
                    chebyshev::trim(&mut ce, 1e-16);
                    coeffs.push(ce);
                }
            }
            derivs.push(FunctionRep::chebyshev(interval, m, ncols, coeffs)?);
        }
        if resolved || degree >= crate::funcspace::MAX_ADAPTIVE_DEGREE {
            return Ok(derivs);
        }
        degree *= 2;
    }
}

/// Sup-norm consistency residual `‖(y^(r-1))' - y^(r)‖_∞` of a derivative
/// list produced by the solvers.
pub fn ode_residual(derivs: &[FunctionRep], r: usize) -> Result<f64> {
    let d = derivs[r - 1].derivative(1)?;
    lp_norm_diff(&d, &derivs[r], f64::INFINITY)
}
