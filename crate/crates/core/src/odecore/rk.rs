//! Dormand–Prince 5(4) with adaptive steps that land exactly on a list of
//! output times.

use crate::error::{BvpError, Result};
use crate::C64;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// difference between the 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct RkOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest admissible step as a fraction of the integration span.
    pub min_step_fraction: f64,
    pub max_steps: usize,
}

impl Default for RkOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-12,
            min_step_fraction: 1e-12,
            max_steps: 2_000_000,
        }
    }
}

/// Integrates `y' = rhs(t, y)` from `stops[0]` and returns the state at
/// every entry of `stops` (increasing).
pub fn integrate_to_stops(
    rhs: &dyn Fn(f64, &[C64], &mut [C64]),
    y0: &[C64],
    stops: &[f64],
    opts: &RkOptions,
) -> Result<Vec<Vec<C64>>> {
    let n = y0.len();
    let t_start = stops[0];
    let span = stops[stops.len() - 1] - t_start;
    let h_min = opts.min_step_fraction * span;
    let mut out = Vec::with_capacity(stops.len());
    out.push(y0.to_vec());

    let mut k: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); n]; 7];
    let mut stage = vec![C64::new(0.0, 0.0); n];
    let mut y = y0.to_vec();
    let mut y_new = vec![C64::new(0.0, 0.0); n];
    let mut t = t_start;
    let mut h = span / 100.0;
    let mut steps = 0usize;
    rhs(t, &y, &mut k[0]);

    for &stop in &stops[1..] {
        while t < stop {
            let remaining = stop - t;
            let landing = h >= remaining;
            let h_try = if landing { remaining } else { h };
            steps += 1;
            if steps > opts.max_steps {
                return Err(BvpError::IntegrationFailure {
                    t,
                    reason: format!("exceeded {} steps", opts.max_steps),
                });
            }

            let combos: [&[f64]; 5] = [
                &[A21],
                &[A31, A32],
                &[A41, A42, A43],
                &[A51, A52, A53, A54],
                &[A61, A62, A63, A64, A65],
            ];
            let cs = [C2, C3, C4, C5, 1.0];
            for (s, (weights, c)) in combos.iter().zip(cs).enumerate() {
                for i in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for (j, w) in weights.iter().enumerate() {
                        acc += k[j][i] * *w;
                    }
                    stage[i] = y[i] + acc * h_try;
                }
                rhs(t + c * h_try, &stage, &mut k[s + 1]);
            }
            for i in 0..n {
                y_new[i] = y[i]
                    + (k[0][i] * B1 + k[2][i] * B3 + k[3][i] * B4 + k[4][i] * B5 + k[5][i] * B6) * h_try;
            }
            rhs(t + h_try, &y_new, &mut k[6]);
            let mut err_sq = 0.0;
            for i in 0..n {
                let e = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7)
                    * h_try;
                let scale = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
                err_sq += (e.norm() / scale).powi(2);
            }
            let err = (err_sq / n.max(1) as f64).sqrt();
            if !err.is_finite() {
                return Err(BvpError::IntegrationFailure {
                    t,
                    reason: "non-finite state (coefficient blow-up?)".into(),
                });
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if landing { stop } else { t + h_try };
                y.copy_from_slice(&y_new);
                k.swap(0, 6);
                // a step shortened to land on a stop does not shrink the next one
                h = if landing { h.max(h_try * factor) } else { h_try * factor };
            } else {
                h = h_try * factor;
                if h < h_min {
                    return Err(BvpError::IntegrationFailure {
                        t,
                        reason: format!("step size {h:e} fell below the floor {h_min:e}"),
                    });
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let rhs = |_t: f64, y: &[C64], dy: &mut [C64]| dy[0] = y[0];
        let stops = [0.0, 0.5, 1.0];
        let out = integrate_to_stops(&rhs, &[C64::new(1.0, 0.0)], &stops, &RkOptions::default()).unwrap();
        for (s, y) in stops.iter().zip(&out) {
            assert!((y[0].re - s.exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn fifth_order_convergence() {
        // fixed-step behaviour via a loose tolerance: error shrinks with tol
        let rhs = |t: f64, y: &[C64], dy: &mut [C64]| dy[0] = y[0] * t.cos();
        let exact = 1f64.sin().exp();
        let run = |tol: f64| {
            let opts = RkOptions { rtol: tol, atol: tol, ..Default::default() };
            let out = integrate_to_stops(&rhs, &[C64::new(1.0, 0.0)], &[0.0, 1.0], &opts).unwrap();
            (out[1][0].re - exact).abs()
        };
        assert!(run(1e-6) < 1e-5);
        assert!(run(1e-11) < 1e-10);
    }

    #[test]
    fn blow_up_is_reported() {
        let rhs = |_t: f64, y: &[C64], dy: &mut [C64]| dy[0] = y[0] * y[0];
        let res = integrate_to_stops(&rhs, &[C64::new(1.0, 0.0)], &[0.0, 2.0], &RkOptions::default());
        assert!(matches!(res, Err(BvpError::IntegrationFailure { .. })));
    }
}
