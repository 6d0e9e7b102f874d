//! Characteristic matrix, d-characteristics and solution of well-posed
//! boundary-value problems `L y = f`, `B y = c`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::BoundaryOperator;
use crate::error::{BvpError, Result};
use crate::funcspace::{
    cumulative_integrals, lp_norm, sobolev_distance, sobolev_norm, FunctionRep, SobolevIndex,
};
use crate::odecore::{solve_fundamental, solve_particular_derivs, FundamentalSystem, OdeSystem, DEFAULT_TOL};
use crate::C64;

/// Condition number above which a square solve is refused.
pub const MAX_CONDITION: f64 = 1e12;
/// Singular values within this factor of `rank_tol` raise the margin flag.
const MARGIN_FACTOR: f64 = 100.0;

#[derive(Debug, Clone)]
pub struct BvProblem {
    system: OdeSystem,
    rhs: FunctionRep,
    boundary: BoundaryOperator,
    target: DVector<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Tolerance for the Cauchy problems and the residual checks.
    pub tol: f64,
    /// Absolute rank threshold; `None` selects `rm · σ_max · 1e-10`.
    pub rank_tol: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            rank_tol: None,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CharMatrix {
    #[serde(serialize_with = "crate::serde_util::complex_matrix")]
    pub matrix: DMatrix<C64>,
    pub rank: usize,
    pub dim_ker: usize,
    pub dim_coker: usize,
    pub singular_values: Vec<f64>,
    pub rank_tol: f64,
    pub condition: f64,
    /// Some singular value lies within a factor 100 of `rank_tol`, so the
    /// rank decision is fragile.
    pub near_threshold: bool,
}

#[derive(Debug, Clone)]
pub struct BvpSolution {
    pub y: FunctionRep,
    /// `[y, y', …, y^(n+r)]`.
    pub derivs: Vec<FunctionRep>,
    /// Coefficients `d` of `y = Σ_i Y_i d_i + y_p`.
    pub constants: DVector<C64>,
    pub residual_ode: f64,
    pub residual_boundary: f64,
}

impl BvProblem {
    pub fn new(system: OdeSystem, rhs: FunctionRep, boundary: BoundaryOperator, target: DVector<C64>) -> Result<Self> {
        let index = system.index();
        if boundary.index() != index {
            return Err(BvpError::DimensionMismatch(
                "boundary operator and system use different Sobolev indices".into(),
            ));
        }
        if boundary.interval() != system.interval() || rhs.interval() != system.interval() {
            return Err(BvpError::DimensionMismatch("problem data live on different intervals".into()));
        }
        if rhs.shape() != (index.m, 1) {
            return Err(BvpError::DimensionMismatch(format!(
                "right-hand side has shape {:?}, expected {}x1",
                rhs.shape(),
                index.m
            )));
        }
        if target.len() != index.boundary_dim() {
            return Err(BvpError::DimensionMismatch(format!(
                "target has length {}, expected {}",
                target.len(),
                index.boundary_dim()
            )));
        }
        Ok(Self {
            system,
            rhs,
            boundary,
            target,
        })
    }

    pub fn index(&self) -> SobolevIndex {
        self.system.index()
    }

    pub fn system(&self) -> &OdeSystem {
        &self.system
    }

    pub fn rhs(&self) -> &FunctionRep {
        &self.rhs
    }

    pub fn boundary(&self) -> &BoundaryOperator {
        &self.boundary
    }

    pub fn target(&self) -> &DVector<C64> {
        &self.target
    }

    /// The same operator pair with new data `(f, c)`.
    pub fn with_data(&self, rhs: FunctionRep, target: DVector<C64>) -> Result<Self> {
        Self::new(self.system.clone(), rhs, self.boundary.clone(), target)
    }
}

fn numeric_rank(s: &[f64], tol: f64) -> usize {
    s.iter().filter(|&&v| v > tol).count()
}

impl CharMatrix {
    /// Rank data of a square matrix. `rank_tol = None` selects
    /// `rm · σ_max · 1e-10`.
    pub fn from_matrix(matrix: DMatrix<C64>, rank_tol: Option<f64>) -> Self {
        let rm = matrix.nrows();
        let mut sv: Vec<f64> = matrix.clone().svd(false, false).singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        let smax = sv.first().copied().unwrap_or(0.0);
        let smin = sv.last().copied().unwrap_or(0.0);
        let tol = rank_tol.unwrap_or(rm as f64 * smax * 1e-10);
        let rank = numeric_rank(&sv, tol);
        // cokernel from the adjoint, computed on its own
        let mut sv_adj: Vec<f64> = matrix.adjoint().svd(false, false).singular_values.iter().copied().collect();
        sv_adj.sort_by(|a, b| b.total_cmp(a));
        let rank_adj = numeric_rank(&sv_adj, tol);
        let near_threshold = sv.iter().any(|&s| s > tol / MARGIN_FACTOR && s < tol * MARGIN_FACTOR);
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        Self {
            matrix,
            rank,
            dim_ker: rm - rank,
            dim_coker: rm - rank_adj,
            singular_values: sv,
            rank_tol: tol,
            condition,
            near_threshold,
        }
    }

    pub fn is_well_posed(&self) -> bool {
        self.dim_ker == 0 && self.dim_coker == 0 && self.condition <= MAX_CONDITION
    }

    fn singular_error(&self) -> BvpError {
        BvpError::SingularProblem {
            dim_ker: self.dim_ker,
            dim_coker: self.dim_coker,
            condition: self.condition,
        }
    }
}

/// `(dim ker M, dim coker M)`.
pub fn d_characteristics(m: &CharMatrix) -> (usize, usize) {
    (m.dim_ker, m.dim_coker)
}

/// `M(L, B) = [B Y_1 … B Y_r]` from a precomputed fundamental system.
pub fn characteristic_matrix_from(
    fundamental: &FundamentalSystem,
    boundary: &BoundaryOperator,
    rank_tol: Option<f64>,
) -> Result<CharMatrix> {
    let m = boundary.apply(fundamental.stacked_derivatives())?;
    Ok(CharMatrix::from_matrix(m, rank_tol))
}

pub fn characteristic_matrix(system: &OdeSystem, boundary: &BoundaryOperator) -> Result<CharMatrix> {
    characteristic_matrix_with(system, boundary, &SolveOptions::default())
}

pub fn characteristic_matrix_with(
    system: &OdeSystem,
    boundary: &BoundaryOperator,
    opts: &SolveOptions,
) -> Result<CharMatrix> {
    let fundamental = solve_fundamental(system, opts.tol)?;
    characteristic_matrix_from(&fundamental, boundary, opts.rank_tol)
}

/// A factorized operator pair `(L, B)` ready for many right-hand sides.
#[derive(Debug, Clone)]
pub struct PreparedProblem {
    system: OdeSystem,
    boundary: BoundaryOperator,
    fundamental: FundamentalSystem,
    char_matrix: CharMatrix,
    tol: f64,
}

impl PreparedProblem {
    /// Fails with `SingularProblem` unless `M(L, B)` is well conditioned.
    pub fn new(system: &OdeSystem, boundary: &BoundaryOperator, opts: &SolveOptions) -> Result<Self> {
        let fundamental = solve_fundamental(system, opts.tol)?;
        let char_matrix = characteristic_matrix_from(&fundamental, boundary, opts.rank_tol)?;
        if !char_matrix.is_well_posed() {
            return Err(char_matrix.singular_error());
        }
        Ok(Self {
            system: system.clone(),
            boundary: boundary.clone(),
            fundamental,
            char_matrix,
            tol: opts.tol,
        })
    }

    pub fn char_matrix(&self) -> &CharMatrix {
        &self.char_matrix
    }

    pub fn fundamental(&self) -> &FundamentalSystem {
        &self.fundamental
    }

    pub fn system(&self) -> &OdeSystem {
        &self.system
    }

    pub fn boundary(&self) -> &BoundaryOperator {
        &self.boundary
    }

    /// Solves `L y = f`, `B y = c`.
    pub fn solve(&self, rhs: &FunctionRep, target: &DVector<C64>) -> Result<BvpSolution> {
        let index = self.system.index();
        if target.len() != index.boundary_dim() {
            return Err(BvpError::DimensionMismatch(format!(
                "target has length {}, expected {}",
                target.len(),
                index.boundary_dim()
            )));
        }
        let particular = solve_particular_derivs(&self.system, rhs, self.tol)?;
        let by_p = self.boundary.apply(&particular)?;
        let rhs_vec = target - by_p.column(0);
        let qr = self.char_matrix.matrix.clone().col_piv_qr();
        let d = qr.solve(&rhs_vec).ok_or_else(|| self.char_matrix.singular_error())?;
        let d_fn = FunctionRep::constant(self.system.interval(), &DMatrix::from_column_slice(d.len(), 1, d.as_slice()));
        let derivs = self
            .fundamental
            .stacked_derivatives()
            .iter()
            .zip(&particular)
            .map(|(ys, yp)| Ok(ys.matmul(&d_fn)?.add(yp)?.chop(1e-16)))
            .collect::<Result<Vec<_>>>()?;
        let residual_ode = integrated_residual(&derivs, index.r)?;
        let by = self.boundary.apply(&derivs)?;
        let residual_boundary = (by.column(0) - target).norm() / target.norm().max(1.0);
        Ok(BvpSolution {
            y: derivs[0].clone(),
            derivs,
            constants: d,
            residual_ode,
            residual_boundary,
        })
    }
}

/// `max_s sup_t |y^(s)(t) - y^(s)(a) - ∫_a^t y^(s+1)|` for `s < r`,
/// relative to `max(1, ‖y‖_∞)`. With `y^(r)` taken from the equation this
/// measures how well the integrated form of `L y = f` holds.
fn integrated_residual(derivs: &[FunctionRep], r: usize) -> Result<f64> {
    let interval = derivs[0].interval();
    let ts = interval.lobatto_points(64);
    let a = interval.a();
    let mut worst: f64 = 0.0;
    for s in 0..r {
        let ints = cumulative_integrals(&derivs[s + 1], &ts);
        let base = derivs[s].eval(a);
        for (t, int) in ts.iter().zip(ints) {
            let v = derivs[s].eval(*t);
            for (i, (vi, bi)) in v.iter().zip(base.iter()).enumerate() {
                worst = worst.max((vi - bi - int[i]).norm());
            }
        }
    }
    let scale = lp_norm(&derivs[0], f64::INFINITY)?.max(1.0);
    Ok(worst / scale)
}

pub fn solve_bvp(problem: &BvProblem, tol: f64) -> Result<BvpSolution> {
    solve_bvp_with(problem, &SolveOptions::with_tol(tol))
}

pub fn solve_bvp_with(problem: &BvProblem, opts: &SolveOptions) -> Result<BvpSolution> {
    PreparedProblem::new(&problem.system, &problem.boundary, opts)?.solve(&problem.rhs, &problem.target)
}

/// A random polynomial right-hand side `(f, c)` of unit
/// `(W_p^n)^m ⊕ C^{rm}` norm.
pub fn random_data(index: SobolevIndex, interval: crate::funcspace::Interval, rng: &mut ChaCha8Rng) -> Result<(FunctionRep, DVector<C64>)> {
    const DEGREE: usize = 6;
    let coeffs = (0..index.m)
        .map(|_| {
            (0..=DEGREE)
                .map(|k| {
                    let scale = 1.0 / ((k + 1) * (k + 1)) as f64;
                    C64::new(rng.gen_range(-1.0..1.0) * scale, rng.gen_range(-1.0..1.0) * scale)
                })
                .collect()
        })
        .collect();
    let f = FunctionRep::chebyshev(interval, index.m, 1, coeffs)?;
    let c = DVector::from_fn(index.boundary_dim(), |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let norm = sobolev_norm(&f, index.n, index.p)? + c.norm();
    let inv = C64::new(1.0 / norm, 0.0);
    Ok((f.scale(inv), c * inv))
}

/// Lower bound on `‖(L_A, B_A)^{-1} - (L_B, B_B)^{-1}‖` from `probes`
/// seeded random right-hand sides.
pub fn operator_gap(a: &BvProblem, b: &BvProblem, probes: usize, seed: u64) -> Result<f64> {
    let opts = SolveOptions::default();
    let pa = PreparedProblem::new(&a.system, &a.boundary, &opts)?;
    let pb = PreparedProblem::new(&b.system, &b.boundary, &opts)?;
    prepared_gap(&pa, &pb, probes, seed)
}

/// [`operator_gap`] for already factorized problems.
pub fn prepared_gap(a: &PreparedProblem, b: &PreparedProblem, probes: usize, seed: u64) -> Result<f64> {
    let index = a.system.index();
    if b.system.index() != index || b.system.interval() != a.system.interval() {
        return Err(BvpError::DimensionMismatch("problems must share interval and Sobolev index".into()));
    }
    let gaps = (0..probes)
        .into_par_iter()
        .map(|probe| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(probe as u64));
            let (f, c) = random_data(index, a.system.interval(), &mut rng)?;
            let ya = a.solve(&f, &c)?;
            let yb = b.solve(&f, &c)?;
            sobolev_distance(&ya.derivs, &yb.derivs, index.p)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(gaps.into_iter().fold(0.0, f64::max))
}
