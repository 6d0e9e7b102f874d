//! Riemann–Stieltjes discretization of `∫ Φ y^(n+r) dt` into point terms on
//! `y^(n+r-1)` with midpoint sampling of the kernel.

use nalgebra::DMatrix;

use crate::error::{BvpError, Result};
use crate::funcspace::{FunctionRep, Interval};
use crate::C64;

/// `cells + 1` equispaced points `a + (b-a) j / cells`.
pub fn uniform_partition(interval: Interval, cells: usize) -> Result<Vec<f64>> {
    if cells == 0 {
        return Err(BvpError::InvalidPartition("a partition needs at least one cell".into()));
    }
    let (a, len) = (interval.a(), interval.length());
    Ok((0..=cells)
        .map(|j| if j == cells { interval.b() } else { a + len * j as f64 / cells as f64 })
        .collect())
}

/// Uniform partition with `2^level` cells.
pub fn dyadic_partition(interval: Interval, level: u32) -> Result<Vec<f64>> {
    if level > 30 {
        return Err(BvpError::InvalidPartition(format!("dyadic level {level} is too fine")));
    }
    uniform_partition(interval, 1 << level)
}

/// Points `t_j` and weights `β_j` with
/// `Σ_j β_j y^(n+r-1)(t_j) = Σ_cells Φ(mid)·(y^(n+r-1)(t_{j+1}) - y^(n+r-1)(t_j))`.
pub fn stieltjes_multipoint(phi: &FunctionRep, partition: &[f64]) -> Result<(Vec<f64>, Vec<DMatrix<C64>>)> {
    let iv = phi.interval();
    if partition.len() < 2 {
        return Err(BvpError::InvalidPartition("need at least two points".into()));
    }
    let tol = 1e-12 * iv.length();
    if (partition[0] - iv.a()).abs() > tol || (partition[partition.len() - 1] - iv.b()).abs() > tol {
        return Err(BvpError::InvalidPartition(format!(
            "partition must start at {} and end at {}",
            iv.a(),
            iv.b()
        )));
    }
    if let Some(w) = partition.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(BvpError::InvalidPartition(format!(
            "points must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    let mids: Vec<DMatrix<C64>> = partition.windows(2).map(|w| phi.eval(0.5 * (w[0] + w[1]))).collect();
    let cells = mids.len();
    let mut betas = Vec::with_capacity(cells + 1);
    betas.push(-&mids[0]);
    for j in 1..cells {
        betas.push(&mids[j - 1] - &mids[j]);
    }
    betas.push(mids[cells - 1].clone());
    Ok((partition.to_vec(), betas))
}
