//! Explicit Runge–Kutta integration: Dormand–Prince 5(4) with adaptive steps, and
//! classic fixed-step RK4.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Step-size policy for [`solve`].
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum StepControl {
    Adaptive {
        rtol: f64,
        atol: f64,
        /// Smallest admissible step before the run is declared failed.
        min_step: f64,
        max_steps: usize,
    },
    Fixed {
        dt: f64,
    },
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl::Adaptive {
            rtol: 1e-8,
            atol: 1e-10,
            min_step: 1e-12,
            max_steps: 2_000_000,
        }
    }
}

/// Where a run ended.
#[derive(Clone, Debug)]
pub(crate) struct OdeEnd {
    pub t: f64,
    pub y: Vec<f64>,
    /// The velocity norm dropped below the stop tolerance before `t_end`.
    pub stopped: bool,
}

// Dormand–Prince tableau. The system is autonomous, so the nodes c_i are unused.
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
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Integrates `y' = rhs(y)` from `t = 0` to `t_end`.
///
/// `observe(t, y)` sees the initial point and every accepted step. When `stop_tol`
/// is set the run ends as soon as `max |rhs(y)| < stop_tol`.
pub(crate) fn solve<F, O>(
    mut rhs: F,
    y0: &[f64],
    t_end: f64,
    control: StepControl,
    stop_tol: Option<f64>,
    mut observe: O,
) -> Result<OdeEnd>
where
    F: FnMut(&[f64], &mut [f64]),
    O: FnMut(f64, &[f64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = 0.0;
    observe(t, &y);
    let mut k1 = vec![0.0; n];
    rhs(&y, &mut k1);
    if let Some(tol) = stop_tol {
        if max_norm(&k1) < tol {
            return Ok(OdeEnd { t, y, stopped: true });
        }
    }
    if n == 0 {
        return Ok(OdeEnd { t: t_end, y, stopped: false });
    }
    match control {
        StepControl::Fixed { dt } => {
            if !(dt > 0.0) {
                return Err(Error::InvalidArgument("fixed step must be positive"));
            }
            let mut k2 = vec![0.0; n];
            let mut k3 = vec![0.0; n];
            let mut k4 = vec![0.0; n];
            let mut tmp = vec![0.0; n];
            while t < t_end {
                let h = dt.min(t_end - t);
                for i in 0..n {
                    tmp[i] = y[i] + 0.5 * h * k1[i];
                }
                rhs(&tmp, &mut k2);
                for i in 0..n {
                    tmp[i] = y[i] + 0.5 * h * k2[i];
                }
                rhs(&tmp, &mut k3);
                for i in 0..n {
                    tmp[i] = y[i] + h * k3[i];
                }
                rhs(&tmp, &mut k4);
                for i in 0..n {
                    y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
                t = if t_end - t <= dt { t_end } else { t + h };
                observe(t, &y);
                rhs(&y, &mut k1);
                if let Some(tol) = stop_tol {
                    if max_norm(&k1) < tol {
                        return Ok(OdeEnd { t, y, stopped: true });
                    }
                }
            }
            Ok(OdeEnd { t, y, stopped: false })
        }
        StepControl::Adaptive {
            rtol,
            atol,
            min_step,
            max_steps,
        } => {
            let mut k2 = vec![0.0; n];
            let mut k3 = vec![0.0; n];
            let mut k4 = vec![0.0; n];
            let mut k5 = vec![0.0; n];
            let mut k6 = vec![0.0; n];
            let mut k7 = vec![0.0; n];
            let mut tmp = vec![0.0; n];
            let mut ynew = vec![0.0; n];
            // Initial step from the velocity scale.
            let scale = max_norm(&k1);
            let mut h = if scale > 0.0 {
                (0.01 * (1.0 + max_norm(&y)) / scale).min(t_end)
            } else {
                t_end
            };
            h = h.max(min_step);
            let mut steps = 0usize;
            while t < t_end {
                if steps >= max_steps {
                    return Err(Error::IntegrationFailure { time: t, last_state: y });
                }
                steps += 1;
                let last = t + h >= t_end;
                if last {
                    h = t_end - t;
                }
                for i in 0..n {
                    tmp[i] = y[i] + h * A21 * k1[i];
                }
                rhs(&tmp, &mut k2);
                for i in 0..n {
                    tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
                }
                rhs(&tmp, &mut k3);
                for i in 0..n {
                    tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
                }
                rhs(&tmp, &mut k4);
                for i in 0..n {
                    tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
                }
                rhs(&tmp, &mut k5);
                for i in 0..n {
                    tmp[i] = y[i]
                        + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
                }
                rhs(&tmp, &mut k6);
                for i in 0..n {
                    ynew[i] = y[i]
                        + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
                }
                rhs(&ynew, &mut k7);
                // Near rest an explicit method parks stiff modes at the error tolerance,
                // which can leave the velocity above the stop threshold for good. Tie
                // the tolerance to the motion per step so it shrinks as the flow settles.
                let cap = match stop_tol {
                    Some(tol) => (0.01 * tol).max(1e-3 * h * max_norm(&k1)),
                    None => f64::INFINITY,
                };
                let mut err: f64 = 0.0;
                for i in 0..n {
                    let e = h
                        * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                            + E7 * k7[i]);
                    let sc = (atol + rtol * y[i].abs().max(ynew[i].abs())).min(cap);
                    err = err.max(e.abs() / sc);
                }
                if !err.is_finite() {
                    err = f64::INFINITY;
                }
                if err <= 1.0 {
                    t = if last { t_end } else { t + h };
                    core::mem::swap(&mut y, &mut ynew);
                    core::mem::swap(&mut k1, &mut k7);
                    observe(t, &y);
                    if let Some(tol) = stop_tol {
                        if max_norm(&k1) < tol {
                            return Ok(OdeEnd { t, y, stopped: true });
                        }
                    }
                }
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * math::exp(-0.2 * math::ln(err))).clamp(0.2, 5.0)
                };
                h *= factor;
                if h < min_step && t < t_end {
                    return Err(Error::IntegrationFailure { time: t, last_state: y });
                }
            }
            Ok(OdeEnd { t, y, stopped: false })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_adaptive() {
        let end = solve(
            |y, dy| dy[0] = -y[0],
            &[1.0],
            3.0,
            StepControl::default(),
            None,
            |_, _| {},
        )
        .unwrap();
        assert!((end.y[0] - math::exp(-3.0)).abs() < 1e-8);
        assert!(!end.stopped);
    }

    #[test]
    fn harmonic_oscillator_rk4() {
        let end = solve(
            |y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            &[1.0, 0.0],
            1.0,
            StepControl::Fixed { dt: 1e-3 },
            None,
            |_, _| {},
        )
        .unwrap();
        assert!((end.y[0] - math::cos(1.0)).abs() < 1e-11);
    }

    #[test]
    fn stops_early_at_rest() {
        let end = solve(
            |y, dy| dy[0] = -y[0],
            &[1.0],
            1e4,
            StepControl::default(),
            Some(1e-10),
            |_, _| {},
        )
        .unwrap();
        assert!(end.stopped);
        assert!(end.t < 1e4);
        assert!(end.y[0].abs() < 1e-10);
    }

    #[test]
    fn underflow_reports_failure() {
        // y' = y^2 blows up at t = 1
        let r = solve(
            |y, dy| dy[0] = y[0] * y[0],
            &[1.0],
            2.0,
            StepControl::default(),
            None,
            |_, _| {},
        );
        assert!(matches!(r, Err(Error::IntegrationFailure { .. })));
    }
}
