//! Pure-state family fits, by Wigner overlap or by fidelity.

use std::f64::consts::PI;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::state::{make_pure_state, DensityMatrix, StateSpec};
use super::wigner::{weighted_kernel, wigner, WignerMap};
use super::{CMatrix, CVector};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateFamily {
    /// `S(zeta)|0>`, parameters `(Re zeta, Im zeta)`.
    Squeezed,
    /// `T(tau)|0>`, parameters `(Re tau, Im tau)`.
    Trisqueezed,
    /// `R(theta) D(alpha) C(gamma) S(zeta)|0>` with real `zeta`, parameters
    /// `(zeta, gamma, Re alpha, Im alpha, theta)`.
    Cubic,
}

impl StateFamily {
    pub fn encode(&self, spec: &StateSpec) -> Result<Vec<f64>> {
        match (self, spec) {
            (StateFamily::Squeezed, StateSpec::Squeezed { zeta }) => Ok(vec![zeta.re, zeta.im]),
            (StateFamily::Squeezed, StateSpec::Vacuum) => Ok(vec![0.0, 0.0]),
            (StateFamily::Trisqueezed, StateSpec::Trisqueezed { tau }) => Ok(vec![tau.re, tau.im]),
            (StateFamily::Trisqueezed, StateSpec::Vacuum) => Ok(vec![0.0, 0.0]),
            (
                StateFamily::Cubic,
                StateSpec::Cubic {
                    zeta,
                    gamma,
                    alpha,
                    theta,
                },
            ) => Ok(vec![zeta.re, *gamma, alpha.re, alpha.im, *theta]),
            (StateFamily::Cubic, StateSpec::Vacuum) => Ok(vec![0.0; 5]),
            _ => Err(Error::InvalidParameter(format!("guess {spec:?} is not in family {self:?}"))),
        }
    }

    pub fn decode(&self, p: &[f64]) -> StateSpec {
        match self {
            StateFamily::Squeezed => StateSpec::Squeezed {
                zeta: Complex64::new(p[0], p[1]),
            },
            StateFamily::Trisqueezed => StateSpec::Trisqueezed {
                tau: Complex64::new(p[0], p[1]),
            },
            StateFamily::Cubic => StateSpec::Cubic {
                zeta: Complex64::new(p[0], 0.0),
                gamma: p[1],
                alpha: Complex64::new(p[2], p[3]),
                theta: p[4],
            },
        }
    }

    fn steps(&self) -> Vec<f64> {
        match self {
            StateFamily::Squeezed => vec![0.1, 0.1],
            StateFamily::Trisqueezed => vec![0.03, 0.03],
            StateFamily::Cubic => vec![0.1, 0.03, 0.05, 0.05, 0.1],
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub dim: usize,
    /// Extra simplex searches started from perturbed guesses.
    pub restarts: usize,
    pub x_tol: f64,
    pub max_evals: usize,
}

impl FitOptions {
    pub fn for_family(family: StateFamily) -> Self {
        Self {
            dim: match family {
                StateFamily::Squeezed => 40,
                _ => 60,
            },
            restarts: 3,
            x_tol: 1e-5,
            max_evals: 3000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFitResult {
    pub family: StateFamily,
    pub params: StateSpec,
    /// Normalised Wigner overlap or fidelity, depending on the fit.
    pub overlap: f64,
    pub converged: bool,
}

fn quadratic_form(q: &CMatrix, psi: &CVector) -> f64 {
    (psi.adjoint() * q * psi)[(0, 0)].re
}

/// Deterministic perturbed starting points.
fn starts(x0: &[f64], steps: &[f64], count: usize) -> Vec<Vec<f64>> {
    let mut out = vec![x0.to_vec()];
    for r in 0..count {
        let p = x0
            .iter()
            .zip(steps)
            .enumerate()
            .map(|(k, (x, s))| {
                let sign = if (k + r) % 2 == 0 { 1.0 } else { -1.0 };
                x + sign * s * (1.0 + r as f64)
            })
            .collect();
        out.push(p);
    }
    out
}

fn search<F: FnMut(&[f64]) -> f64>(
    mut cost: F,
    family: StateFamily,
    x0: &[f64],
    opts: &FitOptions,
) -> (Vec<f64>, f64, bool) {
    let steps = family.steps();
    let mut nm = NelderMeadOptions::new(steps.clone());
    nm.x_tol = opts.x_tol;
    nm.max_evals = opts.max_evals;
    nm.restarts = 1;
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for s in starts(x0, &steps, opts.restarts) {
        let m = nelder_mead(&mut cost, &s, &nm);
        if best.as_ref().map_or(true, |b| m.f < b.1) {
            best = Some((m.x, m.f, m.converged));
        }
    }
    best.expect("at least one start")
}

/// Maximises the normalised Wigner overlap between `map` and a pure member
/// of `family`.
///
/// The numerator is evaluated as `psi^dag Q psi` with `Q` the map-weighted
/// parity kernel; the model norm uses `sum W^2 ~ 1/(pi dA)` for pure states
/// inside the grid. The reported overlap is recomputed on the grid.
pub fn fit_state(map: &WignerMap, family: StateFamily, guess: &StateSpec, opts: &FitOptions) -> Result<StateFitResult> {
    let x0 = family.encode(guess)?;
    let q = weighted_kernel(map, opts.dim);
    let meas_norm = map.sum_squares();
    if meas_norm == 0.0 {
        return Err(Error::InvalidParameter("Wigner map is identically zero".into()));
    }
    let model_norm = 1.0 / (PI * map.grid.cell_area());
    let scale = (meas_norm * model_norm).sqrt();
    let cost = |p: &[f64]| match make_pure_state(&family.decode(p), opts.dim) {
        Ok((psi, lost)) if lost < 1e-2 => -quadratic_form(&q, &psi) / scale,
        _ => f64::NAN,
    };
    let (x, _, converged) = search(cost, family, &x0, opts);
    if !converged {
        warn!("{family:?} Wigner fit hit its evaluation cap; returning best iterate");
    }
    let params = family.decode(&x);
    let (psi, _) = make_pure_state(&params, opts.dim)?;
    let model = wigner(&DensityMatrix::from_pure(&psi), &map.grid);
    Ok(StateFitResult {
        family,
        params,
        overlap: map.overlap(&model),
        converged,
    })
}

/// Pure member of `family` with the largest fidelity `<psi|rho|psi>`.
pub fn closest_pure_state(rho: &DensityMatrix, family: StateFamily, guess: &StateSpec, opts: &FitOptions) -> Result<StateFitResult> {
    let x0 = family.encode(guess)?;
    let dim = rho.dim();
    let cost = |p: &[f64]| match make_pure_state(&family.decode(p), dim) {
        Ok((psi, lost)) if lost < 1e-2 => -quadratic_form(rho.matrix(), &psi),
        _ => f64::NAN,
    };
    let (x, f, converged) = search(cost, family, &x0, opts);
    Ok(StateFitResult {
        family,
        params: family.decode(&x),
        overlap: -f,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::state::make_state;
    use crate::quantum::wigner::PhaseGrid;

    #[test]
    fn recovers_synthetic_squeezing() {
        let grid = PhaseGrid::standard();
        let truth = StateSpec::Squeezed {
            zeta: Complex64::new(-0.8, 0.0),
        };
        let map = wigner(&make_state(&truth, 40).unwrap(), &grid);
        let fit = fit_state(
            &map,
            StateFamily::Squeezed,
            &StateSpec::Squeezed {
                zeta: Complex64::new(-0.5, 0.1),
            },
            &FitOptions::for_family(StateFamily::Squeezed),
        )
        .unwrap();
        let StateSpec::Squeezed { zeta } = fit.params else { panic!() };
        assert!((zeta - Complex64::new(-0.8, 0.0)).norm() < 1e-3, "{zeta}");
        assert!(fit.overlap > 0.999, "{}", fit.overlap);
    }

    #[test]
    fn vacuum_fits_to_zero_squeezing() {
        let map = wigner(&DensityMatrix::vacuum(40), &PhaseGrid::standard());
        let fit = fit_state(
            &map,
            StateFamily::Squeezed,
            &StateSpec::Squeezed {
                zeta: Complex64::new(0.2, -0.1),
            },
            &FitOptions::for_family(StateFamily::Squeezed),
        )
        .unwrap();
        let StateSpec::Squeezed { zeta } = fit.params else { panic!() };
        assert!(zeta.norm() < 1e-3, "{zeta}");
    }

    #[test]
    fn closest_state_of_pure_member_is_itself() {
        let truth = StateSpec::Trisqueezed {
            tau: Complex64::new(-0.1, 0.02),
        };
        let rho = make_state(&truth, 40).unwrap();
        let mut opts = FitOptions::for_family(StateFamily::Trisqueezed);
        opts.dim = 40;
        let fit = closest_pure_state(&rho, StateFamily::Trisqueezed, &StateSpec::Vacuum, &opts).unwrap();
        assert!(fit.overlap > 1.0 - 1e-8);
    }

    #[test]
    fn family_mismatch_is_rejected() {
        let map = wigner(&DensityMatrix::vacuum(10), &PhaseGrid::square(5, 1.0));
        let guess = StateSpec::Coherent {
            alpha: Complex64::new(0.0, 0.0),
        };
        let opts = FitOptions::for_family(StateFamily::Squeezed);
        assert!(fit_state(&map, StateFamily::Squeezed, &guess, &opts).is_err());
    }
}
