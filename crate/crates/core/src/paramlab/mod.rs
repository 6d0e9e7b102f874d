//! Parameter dependence of boundary-value problems: Condition (0), limit
//! conditions for coefficients and boundary operators, the convergence
//! criteria (a)–(d) for canonical kernels, and the discrepancy band.

mod trend;

pub use trend::{loglog_slope, stays_bounded, tends_to_zero};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::CanonicalBoundaryOperator;
use crate::bvpsolve::{
    characteristic_matrix_with, solve_bvp_with, BvProblem, BvpSolution, CharMatrix, SolveOptions,
};
use crate::error::{BvpError, Result};
use crate::funcspace::{
    cumulative_integrals, lp_norm, lp_norm_diff, sobolev_distance, sobolev_norm_of_derivs, FunctionRep, Interval,
    SobolevIndex,
};
use crate::C64;

/// Default maximal Chebyshev degree of the probe basis.
pub const DEFAULT_PROBE_DEGREE: usize = 12;
/// Grid size for the primitive comparison in condition (c).
const PRIMITIVE_GRID: usize = 1024;

#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub label: String,
    /// Distance to the base point `μ₀` in the parameter metric space.
    pub distance: f64,
    pub problem: BvProblem,
}

/// A finite sample of a parameter family around a base point `μ₀`.
#[derive(Debug, Clone)]
pub struct ParameterFamily {
    members: Vec<FamilyMember>,
    base: usize,
}

impl ParameterFamily {
    pub fn new(members: Vec<FamilyMember>, mu0: &str) -> Result<Self> {
        let base = members
            .iter()
            .position(|m| m.label == mu0)
            .ok_or_else(|| BvpError::InvalidInput(format!("base point `{mu0}` is not a member of the family")))?;
        if members[base].distance != 0.0 {
            return Err(BvpError::InvalidInput("the base point must have distance 0".into()));
        }
        let first = &members[base].problem;
        for (i, m) in members.iter().enumerate() {
            if members[..i].iter().any(|o| o.label == m.label) {
                return Err(BvpError::InvalidInput(format!("duplicate label `{}`", m.label)));
            }
            if !(m.distance >= 0.0) || !m.distance.is_finite() {
                return Err(BvpError::InvalidInput(format!("member `{}` has an invalid distance", m.label)));
            }
            if m.problem.index() != first.index() || m.problem.system().interval() != first.system().interval() {
                return Err(BvpError::DimensionMismatch(format!(
                    "member `{}` uses a different interval or Sobolev index",
                    m.label
                )));
            }
        }
        Ok(Self { members, base })
    }

    /// A sequence `k ↦ problem_k` with the metric `d(0, k) = 1/k`.
    pub fn sequence(base: BvProblem, terms: Vec<(usize, BvProblem)>) -> Result<Self> {
        let mut members = vec![FamilyMember {
            label: "0".into(),
            distance: 0.0,
            problem: base,
        }];
        for (k, problem) in terms {
            if k == 0 {
                return Err(BvpError::InvalidInput("sequence indices start at 1".into()));
            }
            members.push(FamilyMember {
                label: k.to_string(),
                distance: 1.0 / k as f64,
                problem,
            });
        }
        Self::new(members, "0")
    }

    pub fn base(&self) -> &FamilyMember {
        &self.members[self.base]
    }

    pub fn members(&self) -> &[FamilyMember] {
        &self.members
    }

    pub fn index(&self) -> SobolevIndex {
        self.base().problem.index()
    }

    pub fn interval(&self) -> Interval {
        self.base().problem.system().interval()
    }

    /// Members other than the base, ordered by decreasing distance.
    pub fn others(&self) -> Vec<&FamilyMember> {
        let mut v: Vec<&FamilyMember> = self
            .members
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.base)
            .map(|(_, m)| m)
            .collect();
        v.sort_by(|a, b| b.distance.total_cmp(&a.distance).then_with(|| a.label.cmp(&b.label)));
        v
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Condition0Report {
    pub holds: bool,
    pub dim_ker: usize,
    pub dim_coker: usize,
    pub condition: f64,
    pub near_threshold: bool,
    pub char_matrix: CharMatrix,
}

/// Whether the homogeneous base problem has only the trivial solution.
pub fn check_condition0(family: &ParameterFamily, opts: &SolveOptions) -> Result<Condition0Report> {
    let p = &family.base().problem;
    let cm = characteristic_matrix_with(p.system(), p.boundary(), opts)?;
    Ok(Condition0Report {
        holds: cm.is_well_posed(),
        dim_ker: cm.dim_ker,
        dim_coker: cm.dim_coker,
        condition: cm.condition,
        near_threshold: cm.near_threshold,
        char_matrix: cm,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitRow {
    pub label: String,
    pub distance: f64,
    /// The headline deviation (maximum of `details`).
    pub value: f64,
    pub details: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitReport {
    pub rows: Vec<LimitRow>,
    /// Deviations tend to zero with the distance.
    pub converges: bool,
}

fn limit_report(rows: Vec<LimitRow>) -> LimitReport {
    let d: Vec<f64> = rows.iter().map(|r| r.distance).collect();
    let v: Vec<f64> = rows.iter().map(|r| r.value).collect();
    LimitReport {
        converges: tends_to_zero(&d, &v),
        rows,
    }
}

/// `‖A_{r-ℓ}(μ) - A_{r-ℓ}(μ₀)‖_{n,p}` for `ℓ = 1..r`, per member.
pub fn check_limit_condition_i(family: &ParameterFamily) -> Result<LimitReport> {
    let index = family.index();
    let base = family.base().problem.system();
    let rows = family
        .others()
        .into_iter()
        .map(|m| {
            let sys = m.problem.system();
            let details = (1..=index.r)
                .map(|l| {
                    let diff = sys.coefficient(index.r - l).sub(base.coefficient(index.r - l))?;
                    crate::funcspace::sobolev_norm(&diff, index.n, index.p)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(LimitRow {
                label: m.label.clone(),
                distance: m.distance,
                value: details.iter().copied().fold(0.0, f64::max),
                details,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(limit_report(rows))
}

/// A finite probe set in `(W_p^{n+r})^m`, stored as the derivative list of
/// one `m × K` function whose columns are the probes.
#[derive(Debug, Clone)]
pub struct ProbeSet {
    derivs: Vec<FunctionRep>,
}

impl ProbeSet {
    /// Tensorized probes `T_k e_i` for `k ≤ degree` and `i < m`.
    pub fn chebyshev(index: SobolevIndex, interval: Interval, degree: usize) -> Result<Self> {
        let m = index.m;
        let count = m * (degree + 1);
        let zero = C64::new(0.0, 0.0);
        let mut coeffs = vec![vec![zero]; m * count];
        for i in 0..m {
            for k in 0..=degree {
                let col = i * (degree + 1) + k;
                let mut c = vec![zero; k + 1];
                c[k] = C64::new(1.0, 0.0);
                coeffs[i * count + col] = c;
            }
        }
        let y = FunctionRep::chebyshev(interval, m, count, coeffs)?;
        Self::from_function(&y, index.order())
    }

    /// Probes given as the columns of a smooth `m × K` function.
    pub fn from_function(y: &FunctionRep, order: usize) -> Result<Self> {
        let mut derivs = vec![y.to_chebyshev(1e-14)?];
        for s in 1..=order {
            derivs.push(derivs[s - 1].derivative(1)?);
        }
        Ok(Self { derivs })
    }

    pub fn derivatives(&self) -> &[FunctionRep] {
        &self.derivs
    }

    pub fn len(&self) -> usize {
        self.derivs[0].cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn column_norms(m: &DMatrix<C64>) -> Vec<f64> {
    m.column_iter().map(|c| c.norm()).collect()
}

/// `max_probe |B(μ) y - B(μ₀) y|` per member.
pub fn check_limit_condition_ii(family: &ParameterFamily, probes: &ProbeSet) -> Result<LimitReport> {
    let base = family.base().problem.boundary().apply(probes.derivatives())?;
    let rows = family
        .others()
        .into_iter()
        .map(|m| {
            let v = m.problem.boundary().apply(probes.derivatives())?;
            let details = column_norms(&(v - &base));
            Ok(LimitRow {
                label: m.label.clone(),
                distance: m.distance,
                value: details.iter().copied().fold(0.0, f64::max),
                details,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(limit_report(rows))
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsRow {
    pub label: String,
    pub distance: f64,
    /// `max_s ‖α_s(μ) - α_s(μ₀)‖`.
    pub alpha_dev: f64,
    /// `‖Φ(μ)‖_{p'}`.
    pub phi_norm: f64,
    /// `sup_t |∫_a^t Φ(μ) - ∫_a^t Φ(μ₀)|` on a grid.
    pub primitive_dev: f64,
    /// `‖Φ(μ) - Φ(μ₀)‖_{p'}`.
    pub phi_dev: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsReport {
    pub rows: Vec<AsymptoticsRow>,
    pub a: bool,
    pub b: bool,
    pub c: bool,
    pub d: bool,
    /// (a) ∧ (b) ∧ (c): strong convergence `B(μ) → B(μ₀)`.
    pub strong: bool,
    /// (a) ∧ (d): convergence in operator norm.
    pub uniform: bool,
}

fn primitive_gap(x: &FunctionRep, y: &FunctionRep) -> Result<f64> {
    let iv = x.interval();
    let ts: Vec<f64> = (1..=PRIMITIVE_GRID)
        .map(|j| iv.a() + iv.length() * j as f64 / PRIMITIVE_GRID as f64)
        .collect();
    let diff = x.sub(y)?;
    Ok(cumulative_integrals(&diff, &ts)
        .iter()
        .map(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max))
}

/// Conditions (a)–(d) on the canonical forms of the family's boundary
/// operators. Defined for `1 ≤ p < ∞` only.
pub fn check_b_asymptotics(family: &ParameterFamily) -> Result<AsymptoticsReport> {
    let index = family.index();
    if index.p.is_infinite() {
        return Err(BvpError::UnsupportedExponent(index.p));
    }
    let base = family.base().problem.boundary().to_canonical()?;
    let others = family.others();
    let rows = others
        .par_iter()
        .map(|m| {
            let b = m.problem.boundary().to_canonical()?;
            asymptotics_row(&m.label, m.distance, &b, &base, index.p_conj)
        })
        .collect::<Result<Vec<_>>>()?;
    let dist: Vec<f64> = rows.iter().map(|r| r.distance).collect();
    let col = |f: fn(&AsymptoticsRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let a = tends_to_zero(&dist, &col(|r| r.alpha_dev));
    let b = stays_bounded(&dist, &col(|r| r.phi_norm));
    let c = tends_to_zero(&dist, &col(|r| r.primitive_dev));
    let d = tends_to_zero(&dist, &col(|r| r.phi_dev));
    Ok(AsymptoticsReport {
        rows,
        a,
        b,
        c,
        d,
        strong: a && b && c,
        uniform: a && d,
    })
}

fn asymptotics_row(
    label: &str,
    distance: f64,
    b: &CanonicalBoundaryOperator,
    base: &CanonicalBoundaryOperator,
    p_conj: f64,
) -> Result<AsymptoticsRow> {
    if (b.t0() - base.t0()).abs() > 0.0 {
        return Err(BvpError::InvalidInput(format!(
            "member `{label}` uses base point {} but μ₀ uses {}",
            b.t0(),
            base.t0()
        )));
    }
    let alpha_dev = b
        .alphas()
        .iter()
        .zip(base.alphas())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    Ok(AsymptoticsRow {
        label: label.to_string(),
        distance,
        alpha_dev,
        phi_norm: lp_norm(b.phi(), p_conj)?,
        primitive_dev: primitive_gap(b.phi(), base.phi())?,
        phi_dev: lp_norm_diff(b.phi(), base.phi(), p_conj)?,
    })
}

/// `‖L(μ) y₀ - f(μ)‖_{n,p} + |B(μ) y₀ - c(μ)|`.
pub fn discrepancy(problem: &BvProblem, y0: &BvpSolution) -> Result<f64> {
    let index = problem.index();
    let ly = problem.system().apply_derivatives(&y0.derivs, index.n)?;
    let mut f_derivs = vec![problem.rhs().clone()];
    for s in 1..=index.n {
        f_derivs.push(f_derivs[s - 1].derivative(1)?);
    }
    let ode = sobolev_distance(&ly, &f_derivs, index.p)?;
    let by = problem.boundary().apply(&y0.derivs)?;
    let bnd = (by.column(0) - problem.target()).norm();
    Ok(ode + bnd)
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscrepancyRow {
    pub label: String,
    pub distance: f64,
    pub solvable: bool,
    pub d_tilde: f64,
    pub solution_error: f64,
    /// `solution_error / d_tilde`, absent when `d_tilde = 0` or unsolvable.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscrepancyReport {
    pub rows: Vec<DiscrepancyRow>,
    pub gamma_lo: Option<f64>,
    pub gamma_hi: Option<f64>,
    /// Largest distance up to which every member is solvable.
    pub trust_radius: f64,
    pub condition0_holds: bool,
    pub limit_i_norms: Vec<f64>,
    pub limit_ii_probe_errors: Vec<f64>,
    /// The base solution's residuals, for judging tiny discrepancies.
    pub base_residual: f64,
}

impl DiscrepancyReport {
    /// `gamma_hi / gamma_lo`, when both exist.
    pub fn band_width(&self) -> Option<f64> {
        match (self.gamma_lo, self.gamma_hi) {
            (Some(lo), Some(hi)) if lo > 0.0 => Some(hi / lo),
            _ => None,
        }
    }
}

/// Solves every member and compares with the base solution.
pub fn two_sided_estimate(family: &ParameterFamily, probes: &ProbeSet, opts: &SolveOptions) -> Result<DiscrepancyReport> {
    let c0 = check_condition0(family, opts)?;
    if !c0.holds {
        return Err(BvpError::SingularProblem {
            dim_ker: c0.dim_ker,
            dim_coker: c0.dim_coker,
            condition: c0.condition,
        });
    }
    let index = family.index();
    let y0 = solve_bvp_with(&family.base().problem, opts)?;
    let base_residual = y0.residual_ode.max(y0.residual_boundary);
    let others = family.others();
    let rows = others
        .par_iter()
        .map(|m| {
            let d_tilde = discrepancy(&m.problem, &y0)?;
            match solve_bvp_with(&m.problem, opts) {
                Ok(sol) => {
                    let err = sobolev_distance(&sol.derivs, &y0.derivs, index.p)?;
                    Ok(DiscrepancyRow {
                        label: m.label.clone(),
                        distance: m.distance,
                        solvable: true,
                        d_tilde,
                        solution_error: err,
                        ratio: (d_tilde > 0.0).then(|| err / d_tilde),
                    })
                }
                Err(BvpError::SingularProblem { .. }) => Ok(DiscrepancyRow {
                    label: m.label.clone(),
                    distance: m.distance,
                    solvable: false,
                    d_tilde,
                    solution_error: f64::NAN,
                    ratio: None,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let trust_radius = trust_radius(&rows);
    let ratios: Vec<f64> = rows
        .iter()
        .filter(|r| r.distance <= trust_radius)
        .filter_map(|r| r.ratio)
        .collect();
    let gamma_lo = ratios.iter().copied().reduce(f64::min);
    let gamma_hi = ratios.iter().copied().reduce(f64::max);
    let limit_i = check_limit_condition_i(family)?;
    let limit_ii = check_limit_condition_ii(family, probes)?;
    Ok(DiscrepancyReport {
        rows,
        gamma_lo,
        gamma_hi,
        trust_radius,
        condition0_holds: true,
        limit_i_norms: limit_i.rows.iter().map(|r| r.value).collect(),
        limit_ii_probe_errors: limit_ii.rows.iter().map(|r| r.value).collect(),
        base_residual,
    })
}

fn trust_radius(rows: &[DiscrepancyRow]) -> f64 {
    let mut sorted: Vec<&DiscrepancyRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    let mut radius = 0.0;
    for r in sorted {
        if !r.solvable {
            break;
        }
        radius = r.distance;
    }
    radius
}

/// Sobolev norm of a solution's derivative list, re-exported for reports.
pub fn solution_norm(sol: &BvpSolution, p: f64) -> Result<f64> {
    sobolev_norm_of_derivs(&sol.derivs, p)
}
