//! Randomized properties across modules. Each case draws a seed and builds
//! its problem with a ChaCha generator so failures replay exactly.

mod common;

use common::*;
use genbvp::boundary::{
    BoundaryOperator, CanonicalBoundaryOperator, FractionalBoundaryOperator, FractionalTerm, MultipointBoundaryOperator,
};
use genbvp::bvpsolve::{characteristic_matrix, solve_bvp_with, BvProblem, SolveOptions};
use genbvp::funcspace::{lp_norm, sobolev_distance, sobolev_norm_of_derivs, FunctionRep, Interval, SobolevIndex};
use genbvp::BvpError;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn exponent(rng: &mut ChaCha8Rng) -> f64 {
    [1.0, 1.5, 2.0, 4.0, f64::INFINITY][rng.gen_range(0..5)]
}

fn rand_interval(rng: &mut ChaCha8Rng) -> Interval {
    let a = rng.gen_range(-1.0..1.0);
    Interval::new(a, a + rng.gen_range(0.5..2.0)).unwrap()
}

/// A well-conditioned random problem, or `None` for a singular draw.
fn well_posed(rng: &mut ChaCha8Rng, idx: SobolevIndex, iv: Interval) -> Option<(BvProblem, genbvp::bvpsolve::BvpSolution)> {
    let sys = rand_system(rng, idx, iv);
    let kernel = rng.gen_bool(0.7);
    let b = BoundaryOperator::Canonical(rand_canonical(rng, idx, iv, kernel));
    let f = rand_poly_matrix(rng, iv, idx.m, 1, 4);
    let target = DVector::from_fn(idx.boundary_dim(), |_, _| rand_c(rng));
    let problem = BvProblem::new(sys, f, b, target).unwrap();
    match solve_bvp_with(&problem, &SolveOptions::default()) {
        Ok(sol) => Some((problem, sol)),
        Err(BvpError::SingularProblem { .. }) => None,
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solution_is_linear_in_data(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx = rand_index(&mut rng, 2.0);
        let iv = rand_interval(&mut rng);
        let Some((p1, y1)) = well_posed(&mut rng, idx, iv) else { return Ok(()) };
        let f2 = rand_poly_matrix(&mut rng, iv, idx.m, 1, 3);
        let c2 = DVector::from_fn(idx.boundary_dim(), |_, _| rand_c(&mut rng));
        let y2 = solve_bvp_with(&p1.with_data(f2.clone(), c2.clone()).unwrap(), &SolveOptions::default()).unwrap();
        let k = c(2.0);
        let sum = p1.with_data(p1.rhs().add(&f2.scale(k)).unwrap(), p1.target() + &c2 * k).unwrap();
        let ys = solve_bvp_with(&sum, &SolveOptions::default()).unwrap();
        let combo: Vec<FunctionRep> = y1.derivs.iter().zip(&y2.derivs).map(|(a, b)| a.add(&b.scale(k)).unwrap()).collect();
        let scale = 1.0 + sobolev_norm_of_derivs(&combo, 2.0).unwrap();
        let err = sobolev_distance(&ys.derivs, &combo, 2.0).unwrap();
        prop_assert!(err <= 1e-7 * scale, "err {err:e}, scale {scale}");
    }

    #[test]
    fn canonical_operator_is_bounded(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = exponent(&mut rng);
        let idx = rand_index(&mut rng, p);
        let iv = rand_interval(&mut rng);
        let b = rand_canonical(&mut rng, idx, iv, true);
        let y = rand_poly_matrix(&mut rng, iv, idx.m, 1, 7);
        let derivs = derivs_of(&y, idx.order());
        let by = b.apply(&derivs).unwrap().norm();
        let bound = b.bound_constant().unwrap() * sobolev_norm_of_derivs(&derivs, p).unwrap();
        prop_assert!(by <= bound * (1.0 + 1e-10), "|By| = {by}, bound = {bound}");
    }

    #[test]
    fn kernel_and_cokernel_dimensions_agree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx = rand_index(&mut rng, 2.0);
        let iv = rand_interval(&mut rng);
        let sys = rand_system(&mut rng, idx, iv);
        let kernel = rng.gen_bool(0.5);
        let b = rand_canonical(&mut rng, idx, iv, kernel);
        let m = characteristic_matrix(&sys, &BoundaryOperator::Canonical(b)).unwrap();
        prop_assert_eq!(m.dim_ker, m.dim_coker);
        prop_assert_eq!(m.rank + m.dim_ker, idx.boundary_dim());
    }

    #[test]
    fn rank_deficient_rows_give_known_kernel(seed in any::<u64>()) {
        // brute force: B' = P B with rank P = rm - k has exactly k kernel
        // directions whenever (L, B) itself is well-posed
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx = rand_index(&mut rng, 2.0);
        let iv = unit();
        let sys = rand_system(&mut rng, idx, iv);
        let b = rand_canonical(&mut rng, idx, iv, true);
        let full = characteristic_matrix(&sys, &BoundaryOperator::Canonical(b.clone())).unwrap();
        prop_assume!(full.is_well_posed() && full.condition < 1e6);
        let rm = idx.boundary_dim();
        let k = rng.gen_range(1..=rm);
        let p = rand_matrix(&mut rng, rm, rm - k) * rand_matrix(&mut rng, rm - k, rm);
        let alphas = b.alphas().iter().map(|a| &p * a).collect();
        let phi = FunctionRep::constant(iv, &p).matmul(b.phi()).unwrap();
        let degraded = CanonicalBoundaryOperator::new(idx, iv, b.t0(), alphas, phi).unwrap();
        let m = characteristic_matrix(&sys, &BoundaryOperator::Canonical(degraded)).unwrap();
        prop_assert_eq!((m.dim_ker, m.dim_coker), (k, k));
    }

    #[test]
    fn manufactured_polynomials_are_recovered(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = exponent(&mut rng);
        let idx = rand_index(&mut rng, p);
        let iv = rand_interval(&mut rng);
        let sys = rand_system(&mut rng, idx, iv);
        let b = BoundaryOperator::Canonical(rand_canonical(&mut rng, idx, iv, true));
        let y = rand_poly_matrix(&mut rng, iv, idx.m, 1, 5);
        let derivs = derivs_of(&y, idx.order());
        let target = b.apply(&derivs).unwrap().column(0).into_owned();
        let problem = BvProblem::new(sys.clone(), sys.apply(&derivs).unwrap(), b, target).unwrap();
        match solve_bvp_with(&problem, &SolveOptions::default()) {
            Ok(sol) => {
                let err = sobolev_distance(&sol.derivs, &derivs, p).unwrap();
                prop_assert!(err <= 1e-6, "error {err:e}");
                prop_assert!(sol.residual_boundary <= 1e-8);
            }
            Err(BvpError::SingularProblem { .. }) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn multipoint_matches_its_canonical_form(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = exponent(&mut rng).min(4.0);
        let idx = rand_index(&mut rng, p);
        let iv = rand_interval(&mut rng);
        let (rm, m) = (idx.boundary_dim(), idx.m);
        let count = rng.gen_range(1..6);
        let points: Vec<f64> = (0..count).map(|_| iv.a() + iv.length() * rng.gen_range(0.0..=1.0)).collect();
        let betas = (0..count).map(|_| rand_matrix(&mut rng, rm, m)).collect();
        let alphas = (0..idx.order()).map(|_| rand_matrix(&mut rng, rm, m)).collect();
        let t0 = iv.a() + iv.length() * rng.gen_range(0.0..1.0);
        let op = MultipointBoundaryOperator::new(idx, iv, t0, alphas, points, betas).unwrap();
        let y = rand_poly_matrix(&mut rng, iv, m, 1, 8);
        let derivs = derivs_of(&y, idx.order());
        let direct = op.apply(&derivs[..idx.order()]).unwrap();
        let canon = op.to_canonical().unwrap().apply(&derivs).unwrap();
        let scale = 1.0 + direct.norm();
        prop_assert!((direct - canon).norm() <= 1e-10 * scale);
    }

    #[test]
    fn fractional_matches_its_canonical_form(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx = SobolevIndex::new(rng.gen_range(0..=1), 2, rng.gen_range(1..=2), 2.0).unwrap();
        let iv = unit();
        let bound = idx.order() as f64 - 0.5;
        let mut orders: Vec<f64> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(0.0..bound)).collect();
        orders.sort_by(f64::total_cmp);
        orders.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let terms = orders
            .iter()
            .map(|&order| FractionalTerm { order, weight: rand_poly_matrix(&mut rng, iv, idx.boundary_dim(), idx.m, 2) })
            .collect();
        let op = FractionalBoundaryOperator::new(idx, iv, terms).unwrap();
        let y = rand_poly_matrix(&mut rng, iv, idx.m, 1, 6);
        let derivs = derivs_of(&y, idx.order());
        let direct = op.apply(&derivs).unwrap();
        let canon = op.to_canonical().unwrap().apply(&derivs).unwrap();
        prop_assert!((&direct - &canon).norm() <= 1e-8 * (1.0 + direct.norm()), "{direct} vs {canon}");
    }

    #[test]
    fn lp_norm_is_a_norm(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = exponent(&mut rng);
        let iv = rand_interval(&mut rng);
        let f = rand_poly_matrix(&mut rng, iv, 2, 1, 6);
        let g = rand_poly_matrix(&mut rng, iv, 2, 1, 6);
        let (nf, ng) = (lp_norm(&f, p).unwrap(), lp_norm(&g, p).unwrap());
        let nsum = lp_norm(&f.add(&g).unwrap(), p).unwrap();
        prop_assert!(nsum <= (nf + ng) * (1.0 + 1e-12));
        let k = rand_c(&mut rng);
        let scaled = lp_norm(&f.scale(k), p).unwrap();
        prop_assert!((scaled - k.norm() * nf).abs() <= 1e-10 * (1.0 + scaled));
    }
}
