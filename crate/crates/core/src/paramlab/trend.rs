//! Heuristic verdicts on finite samples `distance ↦ value`.

/// Values at or below this level count as zero.
const ZERO_LEVEL: f64 = 1e-9;

/// Least-squares slope of `log y` against `log x` over pairs with positive
/// entries; `None` with fewer than two such pairs.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

fn by_distance(d: &[f64], v: &[f64]) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = d.iter().copied().zip(v.iter().copied()).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

/// Values vanish as the distance shrinks: the value at the smallest
/// distance is negligible, or the values decay with log-log slope ≥ 1/2.
pub fn tends_to_zero(distances: &[f64], values: &[f64]) -> bool {
    let pairs = by_distance(distances, values);
    let (Some(first), Some(last)) = (pairs.first(), pairs.last()) else {
        return true;
    };
    if last.1 <= ZERO_LEVEL {
        return true;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    matches!(loglog_slope(&x, &y), Some(s) if s >= 0.5) && last.1 < first.1
}

/// Values do not blow up as the distance shrinks.
pub fn stays_bounded(distances: &[f64], values: &[f64]) -> bool {
    if values.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let pairs = by_distance(distances, values);
    let (Some(first), Some(last)) = (pairs.first(), pairs.last()) else {
        return true;
    };
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let growing = matches!(loglog_slope(&x, &y), Some(s) if s < -0.5);
    !(growing && last.1 > 2.0 * first.1)
}
