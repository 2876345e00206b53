//! Adaptive Dormand-Prince 5(4) integration of linear systems `y' = f(t, y)`
//! over a sequence of smooth pieces.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::Side;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights equal the last row of A (FSAL)
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OdeStats {
    pub steps: usize,
    pub rejected: usize,
    /// Sum of accepted local error estimates.
    pub error: f64,
}

/// Integrates `y' = rhs(t, side, y)` across `pieces`, modifying `y` in place.
///
/// Steps never cross a piece boundary, so `rhs` is only sampled on smooth
/// pieces; `side` tells it which one-sided limit applies at a boundary.
/// A step is accepted when its max-norm local error is at most `tol * h`.
pub fn integrate<F>(y: &mut [Complex64], pieces: &[(f64, f64)], tol: f64, mut rhs: F) -> Result<OdeStats>
where
    F: FnMut(f64, Side, &[Complex64], &mut [Complex64]) -> Result<()>,
{
    let dim = y.len();
    let mut k: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); dim]; 7];
    let mut stage = vec![Complex64::new(0.0, 0.0); dim];
    let mut y5 = vec![Complex64::new(0.0, 0.0); dim];
    let mut stats = OdeStats::default();

    for &(a, b) in pieces {
        let len = b - a;
        if len <= 0.0 {
            continue;
        }
        let side_at = |t: f64| if t >= b { Side::Left } else { Side::Right };
        let mut t = a;
        let mut h = len / 16.0;
        let mut have_k0 = false;
        while t < b {
            if h < 1e-13 * len {
                return Err(Error::Convergence { t });
            }
            let last = t + h >= b - 1e-15 * len;
            if last {
                h = b - t;
            }
            if !have_k0 {
                rhs(t, side_at(t), y, &mut k[0])?;
                have_k0 = true;
            }
            for s in 1..7 {
                for i in 0..dim {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        if A[s][j] != 0.0 {
                            acc += kj[i] * (h * A[s][j]);
                        }
                    }
                    stage[i] = acc;
                }
                let ts = if s >= 5 && last { b } else { t + C[s] * h };
                let (_, tail) = k.split_at_mut(s);
                rhs(ts, side_at(ts), &stage, &mut tail[0])?;
            }
            let mut err: f64 = 0.0;
            for i in 0..dim {
                let mut hi = y[i];
                let mut diff = Complex64::new(0.0, 0.0);
                for s in 0..7 {
                    hi += k[s][i] * (h * B5[s]);
                    diff += k[s][i] * (h * (B5[s] - B4[s]));
                }
                y5[i] = hi;
                err = err.max(diff.norm());
            }
            if !err.is_finite() || y5.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                h *= 0.25;
                stats.rejected += 1;
                have_k0 = true;
                continue;
            }
            let allowed = tol * h;
            if err <= allowed {
                y.copy_from_slice(&y5);
                t = if last { b } else { t + h };
                stats.steps += 1;
                stats.error += err;
                // first-same-as-last
                let (first, rest) = k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                let grow = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * (allowed / err).powf(0.25)).clamp(0.2, 5.0)
                };
                h *= grow;
            } else {
                stats.rejected += 1;
                h *= (0.9 * (allowed / err).powf(0.25)).clamp(0.1, 0.9);
            }
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_is_accurate() {
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let lambda = Complex64::new(0.5, 3.0);
        let stats = integrate(&mut y, &[(0.0, 1.0)], 1e-12, |_, _, y, dy| {
            dy[0] = lambda * y[0];
            Ok(())
        })
        .unwrap();
        assert!((y[0] - lambda.exp()).norm() < 1e-11, "{}", (y[0] - lambda.exp()).norm());
        assert!(stats.steps > 0);
    }

    #[test]
    fn piecewise_right_hand_side_uses_the_correct_side() {
        // y' = 1 on the first piece and 2 on the second, switching at 0.3
        let mut y = vec![Complex64::new(0.0, 0.0)];
        integrate(&mut y, &[(0.0, 0.3), (0.3, 1.0)], 1e-12, |t, side, _, dy| {
            let first = t < 0.3 || (t == 0.3 && side == Side::Left);
            dy[0] = Complex64::new(if first { 1.0 } else { 2.0 }, 0.0);
            Ok(())
        })
        .unwrap();
        assert!((y[0].re - 1.7).abs() < 1e-14);
    }

    #[test]
    fn singular_rhs_reports_the_parameter() {
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let err = integrate(&mut y, &[(0.0, 1.0)], 1e-10, |t, _, y, dy| {
            dy[0] = Complex64::new(1.0 / (0.5 - t), 0.0);
            let _ = y;
            Ok(())
        })
        .unwrap_err();
        match err {
            Error::Convergence { t } => assert!((t - 0.5).abs() < 1e-3, "t = {t}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
