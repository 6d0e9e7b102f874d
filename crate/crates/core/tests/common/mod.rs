#![allow(dead_code)]

use genbvp::boundary::{BoundaryOperator, CanonicalBoundaryOperator, PointEvaluation};
use genbvp::bvpsolve::BvProblem;
use genbvp::funcspace::{FunctionRep, Interval, SobolevIndex};
use genbvp::odecore::OdeSystem;
use genbvp::C64;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn c(v: f64) -> C64 {
    C64::new(v, 0.0)
}

pub fn unit() -> Interval {
    Interval::new(0.0, 1.0).unwrap()
}

pub fn derivs_of(y: &FunctionRep, upto: usize) -> Vec<FunctionRep> {
    (0..=upto).map(|s| y.derivative(s).unwrap()).collect()
}

pub fn column(iv: Interval, f: impl Fn(f64) -> f64 + Copy) -> FunctionRep {
    FunctionRep::from_fn_adaptive(iv, 1, 1, 1e-15, move |t, o| o[0] = c(f(t))).unwrap()
}

/// Sup-norm distance between two functions sampled at Lobatto points.
pub fn sup_diff(f: &FunctionRep, g: impl Fn(f64) -> Vec<C64>, samples: usize) -> f64 {
    f.interval()
        .lobatto_points(samples)
        .into_iter()
        .map(|t| {
            let mut buf = vec![C64::new(0.0, 0.0); f.rows() * f.cols()];
            f.eval_into(t, &mut buf);
            buf.iter().zip(g(t)).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Dirichlet rows `y(a) = c₁`, `y(b) = c₂` for a scalar second-order problem.
pub fn dirichlet(iv: Interval, idx: SobolevIndex) -> BoundaryOperator {
    let evals = [
        PointEvaluation { order: 0, point: iv.a(), coefficient: DMatrix::from_column_slice(2, 1, &[c(1.0), c(0.0)]) },
        PointEvaluation { order: 0, point: iv.b(), coefficient: DMatrix::from_column_slice(2, 1, &[c(0.0), c(1.0)]) },
    ];
    BoundaryOperator::Canonical(CanonicalBoundaryOperator::from_point_evaluations(idx, iv, iv.a(), &evals, None, None).unwrap())
}

/// `y'' + q y = f` on `iv` with Dirichlet data.
pub fn second_order(iv: Interval, q: FunctionRep, f: FunctionRep, target: [f64; 2], p: f64) -> BvProblem {
    let idx = SobolevIndex::new(0, 2, 1, p).unwrap();
    let sys = OdeSystem::new(idx, iv, vec![q, FunctionRep::zeros(iv, 1, 1)]).unwrap();
    BvProblem::new(sys, f, dirichlet(iv, idx), DVector::from_vec(vec![c(target[0]), c(target[1])])).unwrap()
}

/// `y'' - e^t y = -cos 2t` with rows `y(0) + ∫Φ₁ y''` and `y'(0) + ∫Φ₂ y''`.
pub fn kernel_problem(phi: FunctionRep, p: f64) -> BvProblem {
    let iv = unit();
    let idx = SobolevIndex::new(0, 2, 1, p).unwrap();
    let sys = OdeSystem::new(idx, iv, vec![column(iv, |t| -t.exp()), FunctionRep::zeros(iv, 1, 1)]).unwrap();
    let alphas = vec![DMatrix::from_column_slice(2, 1, &[c(1.0), c(0.0)]), DMatrix::from_column_slice(2, 1, &[c(0.0), c(1.0)])];
    let b = CanonicalBoundaryOperator::new(idx, iv, 0.0, alphas, phi).unwrap();
    BvProblem::new(sys, column(iv, |t| -(2.0 * t).cos()), BoundaryOperator::Canonical(b), DVector::from_vec(vec![c(1.0), c(0.25)]))
        .unwrap()
}

/// The 2×1 kernel `[0; g(t)]`.
pub fn second_row(g: FunctionRep) -> FunctionRep {
    FunctionRep::from_entries(2, 1, &[FunctionRep::zeros(g.interval(), 1, 1), g]).unwrap()
}

pub fn rand_c(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| rand_c(rng))
}

/// `rows × cols` polynomial matrix function with complex coefficients of
/// the given degree, sized so that entries stay O(1) on `iv`.
pub fn rand_poly_matrix(rng: &mut ChaCha8Rng, iv: Interval, rows: usize, cols: usize, degree: usize) -> FunctionRep {
    let coeffs = (0..rows * cols)
        .map(|_| (0..=degree).map(|k| rand_c(rng) / ((k + 1) as f64)).collect())
        .collect();
    FunctionRep::chebyshev(iv, rows, cols, coeffs).unwrap()
}

/// Random system with polynomial coefficients of degree ≤ 2.
pub fn rand_system(rng: &mut ChaCha8Rng, idx: SobolevIndex, iv: Interval) -> OdeSystem {
    let coeffs = (0..idx.r).map(|_| rand_poly_matrix(rng, iv, idx.m, idx.m, 2)).collect();
    OdeSystem::new(idx, iv, coeffs).unwrap()
}

/// Random canonical operator with a polynomial kernel and random `t0`.
pub fn rand_canonical(rng: &mut ChaCha8Rng, idx: SobolevIndex, iv: Interval, with_kernel: bool) -> CanonicalBoundaryOperator {
    let (rm, m) = (idx.boundary_dim(), idx.m);
    let alphas = (0..idx.order()).map(|_| rand_matrix(rng, rm, m)).collect();
    let phi = if with_kernel { rand_poly_matrix(rng, iv, rm, m, 3) } else { FunctionRep::zeros(iv, rm, m) };
    let t0 = iv.a() + iv.length() * rng.gen_range(0.0..1.0);
    CanonicalBoundaryOperator::new(idx, iv, t0, alphas, phi).unwrap()
}

pub fn rand_index(rng: &mut ChaCha8Rng, p: f64) -> SobolevIndex {
    SobolevIndex::new(rng.gen_range(0..=2), rng.gen_range(1..=3), rng.gen_range(1..=3), p).unwrap()
}
