//! Acceptance criteria 1–10. Runs sequentially (timings are part of the
//! criteria), prints one PASS/FAIL line per criterion and exits non-zero if
//! any criterion fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::*;
use genbvp::approx::{convergence_study, ApproximationPlan, CellRule, ConvergenceStudy};
use genbvp::boundary::{caputo_derivative, stieltjes_multipoint, uniform_partition, BoundaryOperator, CanonicalBoundaryOperator, MultipointBoundaryOperator};
use genbvp::bvpsolve::{characteristic_matrix, solve_bvp_with, BvProblem, SolveOptions};
use genbvp::cli::parse_config;
use genbvp::funcspace::{sobolev_distance, FunctionRep, Interval, SobolevIndex};
use genbvp::odecore::{solve_fundamental, OdeSystem, DEFAULT_TOL};
use genbvp::paramlab::{check_b_asymptotics, loglog_slope, tends_to_zero, two_sided_estimate, FamilyMember, ParameterFamily, ProbeSet};
use genbvp::BvpError;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;

type Outcome = (bool, String);

fn fmt_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let iv = Interval::new(0.0, std::f64::consts::PI).unwrap();
    let idx = SobolevIndex::new(0, 2, 1, 2.0).unwrap();
    let sys = OdeSystem::new(idx, iv, vec![FunctionRep::scalar_constant(iv, 1.0), FunctionRep::zeros(iv, 1, 1)]).unwrap();
    let fund = solve_fundamental(&sys, DEFAULT_TOL).unwrap();
    let e1 = sup_diff(&fund.block(1, 0), |t| vec![c(t.cos())], 400);
    let e2 = sup_diff(&fund.block(2, 0), |t| vec![c(t.sin())], 400);
    let secs = start.elapsed().as_secs_f64();
    let err = e1.max(e2);
    (err <= 1e-8 && secs < 1.0, format!("Y1 = cos, Y2 = sin: sup error {err:.2e} (<= 1e-8), {secs:.3} s (< 1 s)"))
}

fn criterion_2() -> Outcome {
    let zero = FunctionRep::zeros(unit(), 1, 1);
    let p = second_order(unit(), zero.clone(), zero, [0.0, 1.0], 2.0);
    let m1 = characteristic_matrix(p.system(), p.boundary()).unwrap();
    let want1 = DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(1.0), c(1.0)]);
    let e1 = (&m1.matrix - &want1).iter().map(|z| z.norm()).fold(0.0, f64::max);

    let ivp = Interval::new(0.0, std::f64::consts::PI).unwrap();
    let p = second_order(ivp, FunctionRep::scalar_constant(ivp, 1.0), FunctionRep::zeros(ivp, 1, 1), [0.0, 0.0], 2.0);
    let m2 = characteristic_matrix(p.system(), p.boundary()).unwrap();
    let want2 = DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(-1.0), c(0.0)]);
    let e2 = (&m2.matrix - &want2).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let ok = e1 <= 1e-8 && e2 <= 1e-8 && (m2.dim_ker, m2.dim_coker) == (1, 1) && m1.is_well_posed();
    (
        ok,
        format!(
            "y''=0 entry error {e1:.2e}; y''+y=0 entry error {e2:.2e}, d-characteristics ({}, {})",
            m2.dim_ker, m2.dim_coker
        ),
    )
}

/// Rank-deficient row mixing `P B` with `rank P = rm - deficit`.
fn degrade(rng: &mut ChaCha8Rng, b: &CanonicalBoundaryOperator, deficit: usize) -> CanonicalBoundaryOperator {
    let idx = b.index();
    let rm = idx.boundary_dim();
    let keep = rm - deficit;
    let p = rand_matrix(rng, rm, keep) * rand_matrix(rng, keep, rm);
    let alphas = b.alphas().iter().map(|a| &p * a).collect();
    let phi = FunctionRep::constant(b.interval(), &p).matmul(b.phi()).unwrap();
    CanonicalBoundaryOperator::new(idx, b.interval(), b.t0(), alphas, phi).unwrap()
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let iv = unit();
    let (mut total, mut singular, mut mismatches) = (0, 0, 0);
    while total < 120 {
        let idx = rand_index(&mut rng, 2.0);
        let sys = rand_system(&mut rng, idx, iv);
        let kernel = rng.gen_bool(0.5);
        let mut b = rand_canonical(&mut rng, idx, iv, kernel);
        if total % 2 == 1 {
            let deficit = rng.gen_range(1..=idx.boundary_dim().min(3));
            b = degrade(&mut rng, &b, deficit);
        }
        let m = characteristic_matrix(&sys, &BoundaryOperator::Canonical(b)).unwrap();
        total += 1;
        if m.dim_ker > 0 {
            singular += 1;
        }
        if m.dim_ker != m.dim_coker {
            mismatches += 1;
        }
    }
    (
        mismatches == 0 && singular > 0 && singular < total,
        format!("{total} problems ({singular} singular): dim_ker != dim_coker in {mismatches}"),
    )
}

fn criterion_4() -> Outcome {
    let iv = unit();
    let mut worst: f64 = 0.0;
    let mut counts = Vec::new();
    for (k, &p) in [1.0, 2.0, f64::INFINITY].iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(40 + k as u64);
        let mut accepted = 0;
        let mut with_kernel = 0;
        while accepted < 50 {
            let idx = rand_index(&mut rng, p);
            let sys = rand_system(&mut rng, idx, iv);
            let kernel = accepted % 5 != 4;
            let b = BoundaryOperator::Canonical(rand_canonical(&mut rng, idx, iv, kernel));
            let y = rand_poly_matrix(&mut rng, iv, idx.m, 1, 6);
            let derivs = derivs_of(&y, idx.order());
            let f = sys.apply(&derivs).unwrap();
            let target = b.apply(&derivs).unwrap().column(0).into_owned();
            let problem = BvProblem::new(sys, f, b, target).unwrap();
            let sol = match solve_bvp_with(&problem, &SolveOptions::default()) {
                Ok(s) => s,
                // a random draw may be singular or badly conditioned; the
                // criterion concerns recoverable problems
                Err(BvpError::SingularProblem { .. }) => continue,
                Err(e) => panic!("{e}"),
            };
            let err = sobolev_distance(&sol.derivs, &derivs, p).unwrap();
            worst = worst.max(err);
            accepted += 1;
            with_kernel += usize::from(kernel);
        }
        counts.push(format!("p={p}: 50 ({with_kernel} with kernel)"));
    }
    (worst <= 1e-6, format!("{}; worst W^(n+r)_p error {worst:.2e} (<= 1e-6)", counts.join(", ")))
}

fn criterion_5() -> Outcome {
    let iv = unit();
    let t = FunctionRep::polynomial(iv, &[0.0, 1.0]);
    let t2 = FunctionRep::polynomial(iv, &[0.0, 0.0, 1.0]);
    let one = FunctionRep::scalar_constant(iv, 1.0);
    let g = gamma(1.5);
    let mut err_pow: f64 = 0.0;
    let mut err_const: f64 = 0.0;
    for &x in &[0.1, 0.25, 0.5, 0.8, 1.0] {
        let a = caputo_derivative(&derivs_of(&t, 1), 0.5, 0.0, x).unwrap()[0];
        let b = caputo_derivative(&derivs_of(&t2, 2), 1.5, 0.0, x).unwrap()[0];
        err_pow = err_pow.max((a - c(x.sqrt() / g)).norm()).max((b - c(2.0 * x.sqrt() / g)).norm());
        for &l in &[0.5, 1.5] {
            let z = caputo_derivative(&derivs_of(&one, 2), l, 0.0, x).unwrap()[0];
            err_const = err_const.max(z.norm());
        }
    }
    (
        err_pow <= 1e-7 && err_const <= 1e-12,
        format!("power error {err_pow:.2e} (<= 1e-7), constant error {err_const:.2e} (<= 1e-12)"),
    )
}

fn criterion_6() -> Outcome {
    let iv = unit();
    let idx = SobolevIndex::new(0, 1, 1, 2.0).unwrap();
    let b = BoundaryOperator::Canonical(
        CanonicalBoundaryOperator::new(idx, iv, 0.0, vec![DMatrix::from_element(1, 1, c(1.0))], FunctionRep::zeros(iv, 1, 1)).unwrap(),
    );
    let mk = |mu: f64| {
        let sys = OdeSystem::new(idx, iv, vec![FunctionRep::scalar_constant(iv, mu)]).unwrap();
        BvProblem::new(sys, FunctionRep::scalar_constant(iv, 1.0), b.clone(), DVector::zeros(1)).unwrap()
    };
    let mus = [1e-1, 1e-2, 1e-3, 1e-4];
    let mut members = vec![FamilyMember { label: "0".into(), distance: 0.0, problem: mk(0.0) }];
    members.extend(mus.iter().map(|&mu| FamilyMember { label: format!("{mu}"), distance: mu, problem: mk(mu) }));
    let family = ParameterFamily::new(members, "0").unwrap();
    let probes = ProbeSet::chebyshev(idx, iv, 4).unwrap();
    let rep = two_sided_estimate(&family, &probes, &SolveOptions::default()).unwrap();
    let d: Vec<f64> = rep.rows.iter().map(|r| r.distance).collect();
    let s_dt = loglog_slope(&d, &rep.rows.iter().map(|r| r.d_tilde).collect::<Vec<_>>()).unwrap();
    let s_err = loglog_slope(&d, &rep.rows.iter().map(|r| r.solution_error).collect::<Vec<_>>()).unwrap();
    let band = rep.band_width().unwrap_or(f64::INFINITY);
    let ok = band <= 100.0 && (s_dt - 1.0).abs() <= 0.1 && (s_err - 1.0).abs() <= 0.1;
    (ok, format!("band width {band:.3} (<= 100), slope d~ {s_dt:.3}, slope error {s_err:.3} (1 +- 0.1)"))
}

fn study(target: BvProblem, degrees: Vec<usize>, rule: CellRule, seed: u64) -> ConvergenceStudy {
    let plan = ApproximationPlan::new(target, degrees, &rule, 4, seed).unwrap();
    convergence_study(&plan, &SolveOptions::default()).unwrap()
}

/// Triangle wave of period `1/2048`: every midpoint of a uniform mesh with
/// at most 1024 cells hits a zero, while the mean value is 1/4.
fn fine_triangle_wave() -> FunctionRep {
    let n = 4096;
    let t: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
    let pieces = (0..n).map(|j| {
        let (v0, v1) = if j % 2 == 0 { (0.0, 0.5) } else { (0.5, 0.0) };
        vec![vec![c(v0), c((v1 - v0) * n as f64)]]
    });
    FunctionRep::piecewise(unit(), 1, 1, t, pieces.collect()).unwrap().declare_rough()
}

fn criterion_7() -> (bool, String) {
    let iv = unit();
    let p = 1.0;
    let phi0 = second_row(FunctionRep::polynomial(iv, &[0.0, 1.0]));
    let target = kernel_problem(phi0.clone(), p);
    let canon = target.boundary().to_canonical().unwrap();
    let mut members = vec![FamilyMember { label: "0".into(), distance: 0.0, problem: target.clone() }];
    for level in 2..=8 {
        let cells = 1usize << level;
        let (pts, betas) = stieltjes_multipoint(&phi0, &uniform_partition(iv, cells).unwrap()).unwrap();
        let b = MultipointBoundaryOperator::new(target.index(), iv, canon.t0(), canon.alphas().to_vec(), pts, betas).unwrap();
        let problem = BvProblem::new(target.system().clone(), target.rhs().clone(), BoundaryOperator::Multipoint(b), target.target().clone()).unwrap();
        members.push(FamilyMember { label: cells.to_string(), distance: 1.0 / cells as f64, problem });
    }
    let asym = check_b_asymptotics(&ParameterFamily::new(members, "0").unwrap()).unwrap();
    let phi_dev: Vec<f64> = asym.rows.iter().map(|r| r.phi_dev).collect();

    let degrees = vec![2, 4, 6, 8, 10];
    let regulated = study(target, degrees.clone(), CellRule::PowerOfTwo, 7);
    let errs: Vec<f64> = regulated.rows.iter().map(|r| r.solution_error).collect();
    let mesh: Vec<f64> = regulated.rows.iter().map(|r| 1.0 / r.cells as f64).collect();
    let converges = tends_to_zero(&mesh, &errs) && *errs.last().unwrap() <= 1e-4;

    let rough = study(kernel_problem(second_row(fine_triangle_wave()), p), degrees, CellRule::PowerOfTwo, 7);
    let gaps: Vec<f64> = rough.rows.iter().map(|r| r.inverse_gap).collect();
    let plateau = !rough.summary.regulated_kernel && gaps.last().unwrap() >= &(0.1 * gaps[0]);

    let dichotomy = asym.a && asym.b && asym.c && !asym.d;
    (
        dichotomy && converges && plateau,
        format!(
            "(a,b,c,d) = ({},{},{},{}) [want d false; sup-norm kernel gap {}]; regulated solution_error {} (finest <= 1e-4); rough inverse_gap {} (plateau: {})",
            asym.a,
            asym.b,
            asym.c,
            asym.d,
            fmt_list(&phi_dev),
            fmt_list(&errs),
            fmt_list(&gaps),
            plateau
        ),
    )
}

const EXAMPLE: &str = r#"{
  "version": 1,
  "problem": {
    "interval": [0, 1], "r": 2, "m": 1, "n": 1, "p": 2,
    "coefficients": ["-exp(t)", 0],
    "rhs": "-cos(2*t)",
    "boundary": {"kind": "fractional", "terms": [
      {"order": 0, "weight": [1, "t"]},
      {"order": 0.5, "weight": [0, 1]},
      {"order": 1.5, "weight": ["1 + t", 0]}
    ]},
    "target": [1, 0.25]
  }
}"#;

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let cfg = parse_config(EXAMPLE).unwrap();
    let s = study(cfg.problem, vec![4, 8, 16, 32], CellRule::DegreeSquared, 8);
    let secs = start.elapsed().as_secs_f64();
    let errs: Vec<f64> = s.rows.iter().map(|r| r.solution_error).collect();
    let gaps: Vec<f64> = s.rows.iter().map(|r| r.inverse_gap).collect();
    let factors: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let gap_ratio = gaps[3] / gaps[0];
    let ok = factors.iter().all(|&f| f >= 10.0) && gap_ratio <= 1e-3 && secs < 60.0;
    (
        ok,
        format!(
            "solution_error {} (decrease factors {}, >= 10), inverse_gap(32)/inverse_gap(4) = {gap_ratio:.2e} (<= 1e-3), {secs:.2} s (< 60 s)",
            fmt_list(&errs),
            fmt_list(&factors)
        ),
    )
}

fn criterion_9() -> Outcome {
    let iv = unit();
    let degrees = vec![5, 6, 7, 8, 9, 10];
    let smooth = FunctionRep::from_entries(2, 1, &[column(iv, |t| (3.0 * t).sin()), column(iv, f64::cos)]).unwrap();
    let s_smooth = study(kernel_problem(smooth, 2.0), degrees.clone(), CellRule::PowerOfTwo, 9);
    // |t - 1/3|: Lipschitz, one kink away from every dyadic point
    let third = 1.0 / 3.0;
    let kink = FunctionRep::piecewise(iv, 1, 1, vec![0.0, third, 1.0], vec![vec![vec![c(third), c(-1.0)]], vec![vec![c(0.0), c(1.0)]]]).unwrap();
    let s_kink = study(kernel_problem(second_row(kink), 2.0), degrees, CellRule::PowerOfTwo, 9);
    let a = s_smooth.summary.slopes_vs_mesh.boundary_gap.unwrap();
    let b = s_kink.summary.slopes_vs_mesh.boundary_gap.unwrap();
    let gaps: Vec<f64> = s_kink.rows.iter().map(|r| r.boundary_gap).collect();
    let sg: Vec<f64> = s_smooth.rows.iter().map(|r| r.boundary_gap).collect();
    (
        (a - 2.0).abs() <= 0.2 && (b - 1.0).abs() <= 0.2,
        format!("smooth slope {a:.3} (2 +- 0.2), smooth gaps {}; kinked slope {b:.3} (1 +- 0.2), kinked gaps {}", fmt_list(&sg), fmt_list(&gaps)),
    )
}

fn run_cli(cmd: &str, input: &Path, out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_genbvp"))
        .args([cmd, "--seed", "11", "--input"])
        .arg(input)
        .arg("--out")
        .arg(out)
        .status()
        .unwrap()
        .code()
        .unwrap_or(-1)
}

fn criterion_10() -> Outcome {
    let docs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples");
    let dir = tempfile::tempdir().unwrap();
    let mut notes = Vec::new();
    let mut ok = true;
    for (cmd, file, artifacts) in [
        ("sweep", "family.json", &["sweep.csv", "verdict.json", "report.json"][..]),
        ("approximate", "fractional.json", &["convergence.csv", "summary.json"][..]),
    ] {
        let (a, b) = (dir.path().join(format!("{cmd}-1")), dir.path().join(format!("{cmd}-2")));
        let codes = (run_cli(cmd, &docs.join(file), &a), run_cli(cmd, &docs.join(file), &b));
        let same = artifacts
            .iter()
            .all(|f| std::fs::read(a.join(f)).ok().is_some_and(|x| Some(x) == std::fs::read(b.join(f)).ok()));
        ok &= codes == (0, 0) && same;
        notes.push(format!("{cmd}: exit {codes:?}, identical {same}"));
    }
    (ok, notes.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("fundamental-system oracle", criterion_1),
        ("characteristic-matrix oracles", criterion_2),
        ("zero-index invariant", criterion_3),
        ("manufactured solutions", criterion_4),
        ("Caputo oracle", criterion_5),
        ("two-sided estimate", criterion_6),
        ("strong vs uniform at p = 1", criterion_7),
        ("approximation pipeline", criterion_8),
        ("Stieltjes conversion order", criterion_9),
        ("determinism", criterion_10),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let (pass, detail) = match std::panic::catch_unwind(run) {
            Ok(r) => r,
            Err(e) => {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                (false, format!("panicked: {}", msg.unwrap_or_default()))
            }
        };
        println!("{} criterion {n:>2} ({name}): {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed.push(n);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
