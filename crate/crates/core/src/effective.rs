//! Leading-order rotating-wave quantities: frequency renormalisation, Kerr,
//! Kerr-free flux, coherent-state drift and drive-activated gate rates.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::circuit::{hamiltonian_coefficients, CircuitParams, TaylorCoefficients, DEFAULT_N_MAX};
use crate::error::{Error, Result};
use crate::roots::{brent, DEFAULT_MAX_ITER};

/// Static effective Hamiltonian `omega_r a^dag a + K/2 a^dag^2 a^2` in the
/// frame rotating at `omega0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCoefficients {
    /// `omega_r - omega0` (rad/s).
    pub delta_omega: f64,
    /// First-order Kerr `K^(1)` (rad/s).
    pub k1: f64,
    pub source: TaylorCoefficients,
}

/// Gate rates per unit flux amplitude and per second of effective gate time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveRates {
    /// Displacement rate `d|alpha|/dT` per unit `phi_e^ac` (rad/s).
    pub alpha_rate: f64,
    /// Squeezing rate `d|zeta|/dT` per unit `phi_e^ac` (rad/s).
    pub zeta_rate: f64,
    /// Trisqueezing rate `d|tau|/dT` per unit `phi_e^ac` (rad/s).
    pub tau_rate: f64,
}

fn leading_kerr(coeffs: &TaylorCoefficients) -> f64 {
    let g3 = coeffs.gdc(3);
    let g4 = coeffs.gdc(4);
    12.0 * g4 - 60.0 * g3 * g3 / coeffs.omega0
}

/// Leading-order `omega_r - omega0` and `K^(1)`. Both print the same
/// combination `12 g4 - 60 g3^2 / omega0`.
pub fn effective_static(coeffs: &TaylorCoefficients) -> Result<EffectiveCoefficients> {
    if coeffs.n_max() < 4 {
        return Err(Error::InvalidParameter(format!(
            "coefficients up to order 4 required (have {})",
            coeffs.n_max()
        )));
    }
    let k = leading_kerr(coeffs);
    Ok(EffectiveCoefficients {
        delta_omega: k,
        k1: k,
        source: coeffs.clone(),
    })
}

/// `K^(1)` at a static flux.
pub fn kerr_at(phi_e: f64, params: &CircuitParams) -> Result<f64> {
    let coeffs = hamiltonian_coefficients(phi_e, params, 4)?;
    Ok(leading_kerr(&coeffs))
}

/// Flux in `bracket` where `K^(1)` vanishes.
pub fn find_kerr_free_flux(params: &CircuitParams, bracket: (f64, f64)) -> Result<f64> {
    let (a, b) = bracket;
    let mut failure = None;
    let root = brent(
        |phi| match kerr_at(phi, params) {
            Ok(k) => k,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        a,
        b,
        1e-9,
        DEFAULT_MAX_ITER,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    root.map_err(|e| match e {
        Error::Solver(msg) => Error::Solver(format!("K^(1) has no sign change on [{a}, {b}]: {msg}")),
        other => other,
    })
}

/// Static Hamiltonian `omega0 n + sum g_n^dc x^n` in a `dim`-level Fock space,
/// built in a padded space and then cropped so that powers of `x` are exact
/// in the retained block.
pub fn static_hamiltonian(coeffs: &TaylorCoefficients, dim: usize) -> DMatrix<f64> {
    let n_max = coeffs.n_max();
    let big = dim + n_max;
    let mut x = DMatrix::<f64>::zeros(big, big);
    for j in 1..big {
        let s = (j as f64).sqrt();
        x[(j - 1, j)] = s;
        x[(j, j - 1)] = s;
    }
    let mut h = DMatrix::<f64>::zeros(big, big);
    let mut power = x.clone();
    for n in 2..=n_max {
        power = &power * &x;
        if n >= 3 {
            h += coeffs.gdc(n) * &power;
        }
    }
    for j in 0..big {
        h[(j, j)] += coeffs.omega0 * j as f64;
    }
    h.view((0, 0), (dim, dim)).into_owned()
}

/// Energies of the dressed levels continuously connected to Fock states
/// `0..levels`, identified by maximum overlap.
pub fn dressed_levels(coeffs: &TaylorCoefficients, dim: usize, levels: usize) -> Result<Vec<f64>> {
    let h = static_hamiltonian(coeffs, dim);
    let eig = SymmetricEigen::new(h);
    let mut out = Vec::with_capacity(levels);
    let mut taken = vec![false; dim];
    for k in 0..levels {
        let mut best: Option<(usize, f64)> = None;
        for col in 0..dim {
            if taken[col] {
                continue;
            }
            let w = eig.eigenvectors[(k, col)].powi(2);
            let better = match best {
                None => true,
                Some((bc, bw)) => {
                    w > bw + 1e-12
                        || ((w - bw).abs() <= 1e-12 && eig.eigenvalues[col] < eig.eigenvalues[bc])
                }
            };
            if better {
                best = Some((col, w));
            }
        }
        let (col, w) = best.ok_or_else(|| Error::Oracle("no eigenvector left".into()))?;
        if w < 0.5 {
            return Err(Error::Oracle(format!(
                "Fock state {k}: max overlap {w:.3} < 0.5; increase dim or reduce coupling"
            )));
        }
        taken[col] = true;
        out.push(eig.eigenvalues[col]);
    }
    Ok(out)
}

/// Kerr from exact diagonalisation, `E_2 - 2 E_1 + E_0`.
pub fn numeric_kerr_oracle(coeffs: &TaylorCoefficients, dim: usize) -> Result<f64> {
    if dim < 20 {
        return Err(Error::InvalidParameter(format!("dim >= 20 required (got {dim})")));
    }
    if (3..=coeffs.n_max()).all(|n| coeffs.gdc(n) == 0.0) {
        return Ok(0.0);
    }
    let e = dressed_levels(coeffs, dim, 3)?;
    Ok(e[2] - 2.0 * e[1] + e[0])
}

/// Frequency shift `E_1 - E_0 - omega0` from exact diagonalisation.
pub fn numeric_frequency_shift(coeffs: &TaylorCoefficients, dim: usize) -> Result<f64> {
    let e = dressed_levels(coeffs, dim, 2)?;
    Ok(e[1] - e[0] - coeffs.omega0)
}

/// Phase of a coherent state amplitude `|a|` after time `t`, in the frame
/// rotating at `omega0`: `-(delta_omega + sum_n K^(n) |a|^(2n)) t`.
/// `k_higher[i]` is `K^(i+2)`.
pub fn drift_angle(a_mag: f64, t: f64, eff: &EffectiveCoefficients, k_higher: Option<&[f64]>) -> f64 {
    let a2 = a_mag * a_mag;
    let mut rate = eff.delta_omega + eff.k1 * a2;
    if let Some(ks) = k_higher {
        let mut p = a2;
        for k in ks {
            p *= a2;
            rate += k * p;
        }
    }
    -rate * t
}

/// Leading-order rates for a flux tone at `omega_d`: `g1^ac/2`,
/// `g2^ac + 3 g1^ac g3^dc / omega_d` and `g3^ac/2`.
pub fn drive_rates(coeffs: &TaylorCoefficients, omega_d: f64) -> DriveRates {
    let cross = if omega_d != 0.0 {
        3.0 * coeffs.gac(1) * coeffs.gdc(3) / omega_d
    } else {
        0.0
    };
    DriveRates {
        alpha_rate: coeffs.gac(1) / 2.0,
        zeta_rate: coeffs.gac(2) + cross,
        tau_rate: coeffs.gac(3) / 2.0,
    }
}

/// Coefficients at the Kerr-free flux of the reference bracket `[0.3, 0.45]`.
pub fn kerr_free_coefficients(params: &CircuitParams) -> Result<TaylorCoefficients> {
    let phi = find_kerr_free_flux(params, (0.3, 0.45))?;
    hamiltonian_coefficients(phi, params, DEFAULT_N_MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const TWO_PI: f64 = 2.0 * PI;

    fn synthetic(omega0: f64, g_dc: &[(usize, f64)]) -> TaylorCoefficients {
        let mut dc = vec![0.0; 7];
        for &(n, g) in g_dc {
            dc[n] = g;
        }
        TaylorCoefficients::from_parts(omega0, dc, vec![0.0; 7])
    }

    #[test]
    fn harmonic_has_no_kerr() {
        let c = synthetic(TWO_PI * 4e9, &[]);
        let eff = effective_static(&c).unwrap();
        assert_eq!(eff.k1, 0.0);
        assert_eq!(eff.delta_omega, 0.0);
        assert_eq!(numeric_kerr_oracle(&c, 30).unwrap(), 0.0);
    }

    #[test]
    fn quartic_only_kerr_matches_first_order() {
        let w0 = TWO_PI * 4e9;
        let g4 = w0 * 5e-5; // |12 g4|/w0 = 6e-4
        let c = synthetic(w0, &[(4, g4)]);
        let k = numeric_kerr_oracle(&c, 30).unwrap();
        assert!((k / (12.0 * g4) - 1.0).abs() < 0.01, "{}", k / (12.0 * g4));
    }

    #[test]
    fn oracle_rejects_small_dim() {
        let c = synthetic(1.0, &[(4, 1e-5)]);
        assert!(numeric_kerr_oracle(&c, 10).is_err());
    }

    #[test]
    fn drift_angle_arithmetic() {
        let mut eff = effective_static(&synthetic(1.0, &[])).unwrap();
        assert_eq!(drift_angle(1.7, 1e-7, &eff, None), 0.0);
        eff.k1 = -TWO_PI * 100e3;
        let theta = drift_angle(1.0, 100e-9, &eff, None);
        assert!((theta - 0.062_831_853).abs() < 1e-8);
    }

    #[test]
    fn drift_angle_higher_orders() {
        let mut eff = effective_static(&synthetic(1.0, &[])).unwrap();
        eff.k1 = 1.0;
        let theta = drift_angle(2.0, 1.0, &eff, Some(&[0.5, 0.25]));
        // -(4 + 0.5*16 + 0.25*64)
        assert!((theta + 28.0).abs() < 1e-12);
    }

    #[test]
    fn zero_ac_gives_zero_rates() {
        let c = synthetic(TWO_PI * 4e9, &[(3, 1e6)]);
        let r = drive_rates(&c, 2.0 * c.omega0);
        assert_eq!(r.alpha_rate, 0.0);
        assert_eq!(r.zeta_rate, 0.0);
        assert_eq!(r.tau_rate, 0.0);
    }

    #[test]
    fn kerr_free_root_is_bracket_order_independent() {
        let p = CircuitParams::reference_device();
        let a = find_kerr_free_flux(&p, (0.3, 0.45)).unwrap();
        let b = find_kerr_free_flux(&p, (0.45, 0.3)).unwrap();
        assert!((a - b).abs() < 1e-8);
        assert!(kerr_at(a, &p).unwrap().abs() < TWO_PI * 1e3);
    }

    #[test]
    fn no_sign_change_is_reported() {
        let p = CircuitParams::reference_device();
        let err = find_kerr_free_flux(&p, (0.1, 0.2)).unwrap_err();
        assert!(err.to_string().contains("sign change"), "{err}");
    }
}
