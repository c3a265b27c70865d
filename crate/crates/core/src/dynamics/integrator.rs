//! Dormand-Prince 5(4) with adaptive steps on complex state vectors.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub first_step: f64,
}

impl StepControl {
    pub fn new(rtol: f64, atol: f64, max_step: f64) -> Self {
        Self {
            rtol,
            atol,
            max_step,
            min_step: max_step * 1e-9,
            first_step: max_step * 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

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
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `dy/dt = f(t, y)` and calls `observe(t, y)` at every time in
/// `t_out` (ascending, `t_out[0]` is the initial time). Steps are clipped so
/// every output time is hit exactly.
pub fn dopri5<F, O>(
    mut f: F,
    y0: Vec<Complex64>,
    t_out: &[f64],
    ctl: &StepControl,
    mut observe: O,
) -> Result<IntegrationStats>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
    O: FnMut(f64, &[Complex64]) -> Result<()>,
{
    let n = y0.len();
    let mut stats = IntegrationStats::default();
    let Some(&t0) = t_out.first() else {
        return Ok(stats);
    };
    if t_out.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("output times must be ascending".into()));
    }
    let mut y = y0;
    let mut t = t0;
    observe(t, &y)?;

    let zero = Complex64::new(0.0, 0.0);
    let mut k1 = vec![zero; n];
    let mut k2 = vec![zero; n];
    let mut k3 = vec![zero; n];
    let mut k4 = vec![zero; n];
    let mut k5 = vec![zero; n];
    let mut k6 = vec![zero; n];
    let mut k7 = vec![zero; n];
    let mut tmp = vec![zero; n];
    let mut y_new = vec![zero; n];

    f(t, &y, &mut k1);
    stats.rhs_evals += 1;
    let mut h = ctl.first_step.min(ctl.max_step);

    for &t_target in &t_out[1..] {
        while t < t_target {
            let remaining = t_target - t;
            let mut step = h.min(ctl.max_step);
            let mut last = false;
            if step >= remaining * (1.0 - 1e-12) {
                step = remaining;
                last = true;
            }
            if step < ctl.min_step && !last {
                return Err(Error::Integration {
                    time: t,
                    reason: format!("step size underflow (h = {step:e})"),
                });
            }

            let stage = |tmp: &mut [Complex64], coeffs: &[(f64, &[Complex64])]| {
                for i in 0..n {
                    let mut acc = zero;
                    for (c, k) in coeffs {
                        acc += k[i] * *c;
                    }
                    tmp[i] = y[i] + acc * step;
                }
            };
            stage(&mut tmp, &[(A21, &k1)]);
            f(t + C2 * step, &tmp, &mut k2);
            stage(&mut tmp, &[(A31, &k1), (A32, &k2)]);
            f(t + C3 * step, &tmp, &mut k3);
            stage(&mut tmp, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            f(t + C4 * step, &tmp, &mut k4);
            stage(&mut tmp, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
            f(t + C5 * step, &tmp, &mut k5);
            stage(
                &mut tmp,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            );
            f(t + step, &tmp, &mut k6);
            for i in 0..n {
                y_new[i] = y[i] + (k1[i] * B1 + k3[i] * B3 + k4[i] * B4 + k5[i] * B5 + k6[i] * B6) * step;
            }
            f(t + step, &y_new, &mut k7);
            stats.rhs_evals += 6;

            let mut err2 = 0.0;
            for i in 0..n {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * step;
                let sc = ctl.atol + ctl.rtol * y[i].norm().max(y_new[i].norm());
                err2 += (e.norm() / sc).powi(2);
            }
            let err = (err2 / n as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Integration {
                    time: t,
                    reason: "non-finite state or error estimate".into(),
                });
            }

            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                t = if last { t_target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                std::mem::swap(&mut k1, &mut k7);
                stats.accepted += 1;
                // a clipped final step says nothing about the natural step size
                if !last || factor < 1.0 {
                    h = step * factor;
                }
            } else {
                stats.rejected += 1;
                h = step * factor.min(1.0);
            }
        }
        observe(t, &y)?;
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_to_tolerance() {
        let lam = Complex64::new(-1.3, 4.0);
        let ts: Vec<f64> = (0..=10).map(|k| k as f64 * 0.3).collect();
        let mut out = Vec::new();
        let ctl = StepControl::new(1e-10, 1e-12, 0.05);
        dopri5(
            |_, y, dy| dy[0] = lam * y[0],
            vec![Complex64::new(1.0, 0.0)],
            &ts,
            &ctl,
            |t, y| {
                out.push((t, y[0]));
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(out.len(), ts.len());
        for (t, y) in out {
            let exact = (lam * t).exp();
            assert!((y - exact).norm() < 1e-9, "t {t}: {y} vs {exact}");
        }
    }

    #[test]
    fn harmonic_oscillator_energy() {
        // y0' = y1, y1' = -y0 over many periods
        let ctl = StepControl::new(1e-9, 1e-12, 0.1);
        let mut last = vec![];
        dopri5(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            &[0.0, 20.0 * std::f64::consts::PI],
            &ctl,
            |_, y| {
                last = y.to_vec();
                Ok(())
            },
        )
        .unwrap();
        assert!((last[0].re - 1.0).abs() < 1e-7);
        assert!(last[1].re.abs() < 1e-7);
    }

    #[test]
    fn observer_errors_propagate() {
        let ctl = StepControl::new(1e-6, 1e-9, 0.1);
        let res = dopri5(
            |_, _, dy| dy[0] = Complex64::new(1.0, 0.0),
            vec![Complex64::new(0.0, 0.0)],
            &[0.0, 1.0],
            &ctl,
            |t, _| {
                if t > 0.5 {
                    Err(Error::Integration {
                        time: t,
                        reason: "stop".into(),
                    })
                } else {
                    Ok(())
                }
            },
        );
        assert!(matches!(res, Err(Error::Integration { .. })));
    }

    #[test]
    fn descending_times_rejected() {
        let ctl = StepControl::new(1e-6, 1e-9, 0.1);
        let res = dopri5(|_, _, _| {}, vec![Complex64::new(0.0, 0.0)], &[1.0, 0.0], &ctl, |_, _| Ok(()));
        assert!(res.is_err());
    }
}
