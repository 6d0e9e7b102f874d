//! Approximating sequences of multipoint problems with polynomial data and
//! their convergence studies.

use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::{stieltjes_multipoint, uniform_partition, BoundaryOperator, MultipointBoundaryOperator};
use crate::bvpsolve::{prepared_gap, BvProblem, BvpSolution, PreparedProblem, SolveOptions};
use crate::error::{BvpError, Result};
use crate::funcspace::{lp_norm_diff, project_polynomial, sobolev_distance, sobolev_norm, FunctionRep};
use crate::odecore::OdeSystem;
use crate::paramlab::{loglog_slope, ParameterFamily, ProbeSet, DEFAULT_PROBE_DEGREE};

/// Largest number of partition cells a plan may request.
pub const MAX_CELLS: usize = 1 << 20;

/// How the number of partition cells `N(k)` follows the degree `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum CellRule {
    /// `N(k) = 2^k`.
    PowerOfTwo,
    /// Smallest power of two `≥ k²`.
    DegreeSquared,
    /// Explicit cell counts (powers of two), one per degree.
    Fixed(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct ApproximationPlan {
    pub target: BvProblem,
    pub degrees: Vec<usize>,
    pub cells: Vec<usize>,
    /// Random right-hand sides used for the inverse gap.
    pub probes: usize,
    pub probe_degree: usize,
    pub seed: u64,
}

impl ApproximationPlan {
    pub fn new(target: BvProblem, degrees: Vec<usize>, rule: &CellRule, probes: usize, seed: u64) -> Result<Self> {
        if degrees.is_empty() || degrees.windows(2).any(|w| w[1] <= w[0]) {
            return Err(BvpError::InvalidInput("degrees must be a non-empty increasing list".into()));
        }
        let cells: Vec<usize> = match rule {
            CellRule::PowerOfTwo => degrees
                .iter()
                .map(|&k| if k >= 20 { MAX_CELLS } else { 1 << k })
                .collect(),
            CellRule::DegreeSquared => degrees.iter().map(|&k| (k * k).max(1).next_power_of_two()).collect(),
            CellRule::Fixed(c) => {
                if c.len() != degrees.len() {
                    return Err(BvpError::InvalidInput(format!(
                        "{} cell counts for {} degrees",
                        c.len(),
                        degrees.len()
                    )));
                }
                c.clone()
            }
        };
        if let Some(&bad) = cells.iter().find(|&&n| n == 0 || !n.is_power_of_two() || n > MAX_CELLS) {
            return Err(BvpError::InvalidPartition(format!(
                "cell count {bad} is not a power of two in [1, {MAX_CELLS}]"
            )));
        }
        if cells.windows(2).any(|w| w[1] <= w[0]) {
            return Err(BvpError::InvalidPartition(
                "cell counts must strictly increase along the plan; they are capped at 2^20".into(),
            ));
        }
        Ok(Self {
            target,
            degrees,
            cells,
            probes,
            probe_degree: DEFAULT_PROBE_DEGREE,
            seed,
        })
    }

    pub fn partition(&self, i: usize) -> Result<Vec<f64>> {
        uniform_partition(self.target.system().interval(), self.cells[i])
    }

    pub fn mesh(&self, i: usize) -> f64 {
        self.target.system().interval().length() / self.cells[i] as f64
    }
}

/// The multipoint problem with degree-`k` polynomial coefficients and
/// right-hand side and the Stieltjes image of the canonical kernel.
pub fn build_approximant(target: &BvProblem, k: usize, partition: &[f64]) -> Result<BvProblem> {
    let system = target.system();
    let index = system.index();
    let coeffs = system
        .coefficients()
        .iter()
        .map(|a| project_polynomial(a, k))
        .collect::<Result<Vec<_>>>()?;
    let sys_k = OdeSystem::new(index, system.interval(), coeffs)?;
    let f_k = project_polynomial(target.rhs(), k)?;
    let canon = target.boundary().to_canonical()?;
    let (points, betas) = stieltjes_multipoint(canon.phi(), partition)?;
    let b_k = MultipointBoundaryOperator::new(index, system.interval(), canon.t0(), canon.alphas().to_vec(), points, betas)?;
    BvProblem::new(sys_k, f_k, BoundaryOperator::Multipoint(b_k), target.target().clone())
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub k: usize,
    pub cells: usize,
    /// `max_ℓ ‖A_{r-ℓ,k} - A_{r-ℓ,0}‖_{n,p}`.
    pub coeff_error: f64,
    /// `‖f_k - f_0‖_{n,p}`.
    pub rhs_error: f64,
    /// `max_probe |B_k y - B_0 y|`.
    pub boundary_gap: f64,
    /// `‖y_k - y_0‖_{n+r,p}`; NaN when the approximant is singular.
    pub solution_error: f64,
    /// Probe lower bound on `‖(L_k,B_k)^{-1} - (L_0,B_0)^{-1}‖`; NaN when singular.
    pub inverse_gap: f64,
    /// `‖Φ_k - Φ_0‖_{p'}` of the step kernel against the target kernel.
    pub kernel_gap: f64,
    pub well_posed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Slopes {
    pub coeff_error: Option<f64>,
    pub rhs_error: Option<f64>,
    pub boundary_gap: Option<f64>,
    pub solution_error: Option<f64>,
    pub inverse_gap: Option<f64>,
    pub kernel_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceSummary {
    /// Log-log slopes against the mesh width `(b-a)/N(k)`.
    pub slopes_vs_mesh: Slopes,
    /// Log-log slopes against `1/k`.
    pub slopes_vs_inverse_degree: Slopes,
    pub regulated_kernel: bool,
    pub p: f64,
    pub seed: u64,
    pub probes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    pub summary: ConvergenceSummary,
}

fn slopes(x: &[f64], rows: &[ConvergenceRow]) -> Slopes {
    let col = |f: fn(&ConvergenceRow) -> f64| {
        let (xs, ys): (Vec<f64>, Vec<f64>) =
            x.iter().zip(rows).filter(|(_, r)| r.well_posed).map(|(a, r)| (*a, f(r))).unzip();
        loglog_slope(&xs, &ys)
    };
    Slopes {
        coeff_error: col(|r| r.coeff_error),
        rhs_error: col(|r| r.rhs_error),
        boundary_gap: col(|r| r.boundary_gap),
        solution_error: col(|r| r.solution_error),
        inverse_gap: col(|r| r.inverse_gap),
        kernel_gap: col(|r| r.kernel_gap),
    }
}

/// Whether a kernel is regulated; only kernels declared rough are not.
pub fn regulated_check(phi: &FunctionRep) -> bool {
    !phi.is_declared_rough()
}

fn coefficient_error(target: &BvProblem, approx: &BvProblem) -> Result<f64> {
    let index = target.index();
    let mut worst: f64 = 0.0;
    for (a0, ak) in target.system().coefficients().iter().zip(approx.system().coefficients()) {
        worst = worst.max(sobolev_norm(&ak.sub(a0)?, index.n, index.p)?);
    }
    Ok(worst)
}

/// Builds and solves every approximant of the plan.
pub fn convergence_study(plan: &ApproximationPlan, opts: &SolveOptions) -> Result<ConvergenceStudy> {
    let target = &plan.target;
    let index = target.index();
    let prepared0 = PreparedProblem::new(target.system(), target.boundary(), opts)?;
    let y0: BvpSolution = prepared0.solve(target.rhs(), target.target())?;
    let canon = target.boundary().to_canonical()?;
    let probes = ProbeSet::chebyshev(index, target.system().interval(), plan.probe_degree)?;
    let b0_probes = target.boundary().apply(probes.derivatives())?;
    let rows = (0..plan.degrees.len())
        .into_par_iter()
        .map(|i| {
            let k = plan.degrees[i];
            let approx = build_approximant(target, k, &plan.partition(i)?)?;
            let coeff_error = coefficient_error(target, &approx)?;
            let rhs_error = sobolev_norm(&approx.rhs().sub(target.rhs())?, index.n, index.p)?;
            let bk = approx.boundary().apply(probes.derivatives())?;
            let boundary_gap = (bk - &b0_probes).column_iter().map(|c| c.norm()).fold(0.0, f64::max);
            let kernel_gap = lp_norm_diff(approx.boundary().to_canonical()?.phi(), canon.phi(), index.p_conj)?;
            let (solution_error, inverse_gap, well_posed) =
                match PreparedProblem::new(approx.system(), approx.boundary(), opts) {
                    Ok(pk) => {
                        let yk = pk.solve(approx.rhs(), approx.target())?;
                        let err = sobolev_distance(&yk.derivs, &y0.derivs, index.p)?;
                        let gap = prepared_gap(&pk, &prepared0, plan.probes, plan.seed)?;
                        (err, gap, true)
                    }
                    Err(BvpError::SingularProblem { .. }) => (f64::NAN, f64::NAN, false),
                    Err(e) => return Err(e),
                };
            Ok(ConvergenceRow {
                k,
                cells: plan.cells[i],
                coeff_error,
                rhs_error,
                boundary_gap,
                solution_error,
                inverse_gap,
                kernel_gap,
                well_posed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.iter().all(|r| !r.well_posed) {
        return Err(BvpError::NeverWellPosed);
    }
    let mesh: Vec<f64> = (0..rows.len()).map(|i| plan.mesh(i)).collect();
    let inv_k: Vec<f64> = plan.degrees.iter().map(|&k| 1.0 / k.max(1) as f64).collect();
    let summary = ConvergenceSummary {
        slopes_vs_mesh: slopes(&mesh, &rows),
        slopes_vs_inverse_degree: slopes(&inv_k, &rows),
        regulated_kernel: regulated_check(canon.phi()),
        p: index.p,
        seed: plan.seed,
        probes: plan.probes,
    };
    Ok(ConvergenceStudy { rows, summary })
}

/// The plan's approximants as a sequence family with `d(0, k) = 1/k`.
pub fn approximant_family(plan: &ApproximationPlan) -> Result<ParameterFamily> {
    let terms = (0..plan.degrees.len())
        .map(|i| Ok((plan.degrees[i], build_approximant(&plan.target, plan.degrees[i], &plan.partition(i)?)?)))
        .collect::<Result<Vec<_>>>()?;
    ParameterFamily::sequence(plan.target.clone(), terms)
}
