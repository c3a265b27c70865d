//! SNAIL-terminated resonator: from circuit parameters and static flux to the
//! mode frequency, the zero-point phase amplitude and the Taylor coefficients
//! `g_n^dc`, `g_n^ac` of the driven Hamiltonian.
//!
//! Public functions take the external flux in units of the flux quantum.
//! Internally the potential is written in the `hbar = 2e = 1` system, where
//! one flux quantum corresponds to `2 pi` of phase.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::{brent, DEFAULT_MAX_ITER};

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Elementary charge (C).
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Impedance unit of the `hbar = 2e = 1` system, `hbar / (2e)^2` (Ohm).
pub const IMPEDANCE_UNIT_OHM: f64 = HBAR / (4.0 * E_CHARGE * E_CHARGE);

/// Default Taylor order, matching the simulated Hamiltonian.
pub const DEFAULT_N_MAX: usize = 6;

const TWO_PI: f64 = 2.0 * PI;

/// Microscopic description of the SNAIL-terminated resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    /// Small-to-large junction asymmetry.
    pub beta: f64,
    /// Large-junction Josephson energy, frequency units (GHz).
    pub ej_ghz: f64,
    /// Number of large junctions in series.
    pub n_junctions: u32,
    /// Bare lowest-mode angular frequency (rad/s).
    pub omega_inf: f64,
    /// Bare resonator impedance (Ohm).
    pub impedance: f64,
}

impl CircuitParams {
    /// Device parameters of the reference SNAIL resonator.
    pub fn reference_device() -> Self {
        Self {
            beta: 0.097,
            ej_ghz: 245.0,
            n_junctions: 3,
            omega_inf: TWO_PI * 8.99e9,
            impedance: 57.94,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_junctions < 1 {
            return Err(Error::InvalidParameter(
                "n_junctions >= 1 required".to_string(),
            ));
        }
        let n = f64::from(self.n_junctions);
        if !(self.beta > 0.0 && self.beta < 1.0 / n) {
            return Err(Error::InvalidParameter(format!(
                "0 < beta < 1/n_junctions required for a single well (beta = {}, n = {})",
                self.beta, self.n_junctions
            )));
        }
        if !(self.ej_ghz > 0.0 && self.ej_ghz.is_finite()) {
            return Err(Error::InvalidParameter(format!("ej > 0 required (got {})", self.ej_ghz)));
        }
        if !(self.omega_inf > 0.0 && self.omega_inf.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "omega_inf > 0 required (got {})",
                self.omega_inf
            )));
        }
        if !(self.impedance > 0.0 && self.impedance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "impedance > 0 required (got {})",
                self.impedance
            )));
        }
        Ok(())
    }

    /// Josephson energy as an angular frequency (rad/s).
    pub fn ej_angular(&self) -> f64 {
        TWO_PI * self.ej_ghz * 1e9
    }

    /// Impedance in units of `hbar / (2e)^2`.
    pub fn impedance_dimensionless(&self) -> f64 {
        self.impedance / IMPEDANCE_UNIT_OHM
    }

    fn n(&self) -> f64 {
        f64::from(self.n_junctions)
    }
}

/// `order`-th phase derivative of `U/E_J = -(beta cos(phi) + n cos((phi_e - phi)/n))`,
/// with `phi_e_rad` in radians. Order 0 is the potential itself.
pub fn potential_phase_derivative(params: &CircuitParams, order: usize, phi: f64, phi_e_rad: f64) -> f64 {
    let n = params.n();
    let shift = order as f64 * PI / 2.0;
    let small = -params.beta * (phi + shift).cos();
    let large = -n * (-1.0 / n).powi(order as i32) * ((phi_e_rad - phi) / n + shift).cos();
    small + large
}

/// Partial derivative with respect to `phi_e` (flux-quantum units) of the
/// `order`-th phase derivative of `U/E_J`, at fixed phase.
pub fn potential_flux_derivative(params: &CircuitParams, order: usize, phi: f64, phi_e_rad: f64) -> f64 {
    let n = params.n();
    let shift = (order + 1) as f64 * PI / 2.0;
    // d/dphi_e_rad of -n (-1/n)^k cos(u + k pi/2), u = (phi_e - phi)/n
    let d_rad = -n * (-1.0 / n).powi(order as i32) * (1.0 / n) * ((phi_e_rad - phi) / n + shift).cos();
    TWO_PI * d_rad
}

/// Splits a flux into its nearest integer number of flux quanta and the
/// remainder in `[-1/2, 1/2]`.
fn reduce_flux(phi_e: f64) -> (f64, f64) {
    let k = phi_e.round();
    (k, phi_e - k)
}

/// Phase at the global minimum of the SNAIL potential.
///
/// Solves `beta sin(phi_m) = sin((phi_e - phi_m)/n)` by bracketing every
/// sign change of `dU/dphi` on a dense scan and keeping the stationary point
/// with the lowest potential. The returned branch is continuous in `phi_e`:
/// `phi_m(phi_e + 1) = phi_m(phi_e) + 2 pi`.
pub fn potential_minimum(phi_e: f64, params: &CircuitParams) -> Result<f64> {
    params.validate()?;
    if !phi_e.is_finite() {
        return Err(Error::InvalidParameter(format!("phi_e must be finite (got {phi_e})")));
    }
    let (k, r) = reduce_flux(phi_e);
    let r_rad = TWO_PI * r;
    let du = |phi: f64| potential_phase_derivative(params, 1, phi, r_rad);
    let u = |phi: f64| potential_phase_derivative(params, 0, phi, r_rad);

    // |r| <= 1/2 keeps the minimum inside [-pi, pi]; pad the scan slightly.
    const SCAN: usize = 512;
    let (lo, hi) = (-PI - 0.05, PI + 0.05);
    let step = (hi - lo) / SCAN as f64;
    let mut best: Option<(f64, f64)> = None;
    let mut x0 = lo;
    let mut f0 = du(x0);
    for i in 1..=SCAN {
        let x1 = lo + step * i as f64;
        let f1 = du(x1);
        // minima only: dU/dphi goes from negative to non-negative
        if f0 < 0.0 && f1 >= 0.0 {
            let root = brent(du, x0, x1, 1e-15, DEFAULT_MAX_ITER)?;
            let val = u(root);
            if best.map_or(true, |(_, b)| val < b) {
                best = Some((root, val));
            }
        }
        x0 = x1;
        f0 = f1;
    }
    let (phi_m, _) = best.ok_or_else(|| {
        Error::Solver(format!("no potential minimum found for phi_e = {phi_e}"))
    })?;
    Ok(phi_m + TWO_PI * k)
}

/// Derivatives `c_n = d^n (U/E_J) / dphi^n` at the potential minimum for
/// `n = 1..=max_order`. Index 0 of the returned vector holds `n = 1`.
pub fn potential_derivatives(phi_e: f64, params: &CircuitParams, max_order: usize) -> Result<Vec<f64>> {
    if max_order < 2 {
        return Err(Error::InvalidParameter(format!("max_order >= 2 required (got {max_order})")));
    }
    let phi_m = potential_minimum(phi_e, params)?;
    let phi_e_rad = TWO_PI * phi_e;
    Ok((1..=max_order)
        .map(|n| potential_phase_derivative(params, n, phi_m, phi_e_rad))
        .collect())
}

/// Harmonic mode of the resonator with the SNAIL replaced by its linear inductance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSolution {
    /// Dressed mode angular frequency (rad/s).
    pub omega0: f64,
    /// SNAIL linear inductance (H).
    pub l_j: f64,
    /// Zero-point phase amplitude across the SNAIL.
    pub participation: f64,
}

/// Solves `omega0/omega_inf = (2/pi) arctan(Z / (L_J omega0))` for a given
/// `E_J c_2` (the SNAIL inverse inductance in the `hbar = 2e = 1` system).
pub fn mode_from_curvature(params: &CircuitParams, c2: f64) -> Result<ModeSolution> {
    if !(c2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "c_2 > 0 required for a positive SNAIL inductance (got {c2})"
        )));
    }
    let z = params.impedance_dimensionless();
    // Z/(L_J omega0) = z * E_J c_2 / omega0, in units of omega_inf.
    let kappa = z * params.ej_angular() * c2 / params.omega_inf;
    let g = |x: f64| x - 2.0 / PI * (kappa / x).atan();
    let x = if kappa.is_infinite() {
        1.0
    } else {
        brent(g, 1e-12, 1.0, 1e-15, DEFAULT_MAX_ITER)?
    };
    let omega0 = x * params.omega_inf;
    let l_j = HBAR / (4.0 * E_CHARGE * E_CHARGE * params.ej_angular() * c2);
    let y = PI * x;
    let sinc = if y.abs() < 1e-12 { 1.0 } else { y.sin() / y };
    let participation = (z / y * (1.0 + y.cos()) / (1.0 + sinc)).sqrt();
    Ok(ModeSolution {
        omega0,
        l_j,
        participation,
    })
}

/// Resonator frequency, SNAIL inductance and participation at static flux `phi_e`.
pub fn resonator_frequency(phi_e: f64, params: &CircuitParams) -> Result<ModeSolution> {
    let c = potential_derivatives(phi_e, params, 2)?;
    mode_from_curvature(params, c[1])
}

/// Flux step of [`frequency_slope`] (flux quanta).
pub const SLOPE_STEP: f64 = 1e-6;

/// `d omega0 / d phi_e` (rad/s per flux quantum) by central differences of
/// the implicit mode solution.
pub fn frequency_slope(phi_e: f64, params: &CircuitParams) -> Result<f64> {
    let up = resonator_frequency(phi_e + SLOPE_STEP, params)?.omega0;
    let down = resonator_frequency(phi_e - SLOPE_STEP, params)?.omega0;
    Ok((up - down) / (2.0 * SLOPE_STEP))
}

/// Flux-dependent expansion of the SNAIL-resonator Hamiltonian.
///
/// The `c`, `g_dc` and `g_ac` vectors are indexed by order: slot `n` holds
/// the order-`n` coefficient, slot 0 is unused and zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorCoefficients {
    /// Static flux (flux quanta).
    pub phi_e: f64,
    /// Potential minimum (rad).
    pub phi_m: f64,
    pub c: Vec<f64>,
    /// Static coefficients (rad/s); orders 1 and 2 are zero.
    pub g_dc: Vec<f64>,
    /// Flux-modulation coefficients (rad/s per flux quantum).
    pub g_ac: Vec<f64>,
    /// Dressed mode frequency (rad/s).
    pub omega0: f64,
    /// Zero-point phase amplitude.
    pub participation: f64,
    /// SNAIL linear inductance (H).
    pub l_j: f64,
}

impl TaylorCoefficients {
    /// Builds a coefficient set directly, e.g. for synthetic models.
    /// `g_dc` and `g_ac` are indexed by order (slot 0 ignored).
    pub fn from_parts(omega0: f64, g_dc: Vec<f64>, g_ac: Vec<f64>) -> Self {
        let len = g_dc.len().max(g_ac.len());
        let mut g_dc = g_dc;
        let mut g_ac = g_ac;
        g_dc.resize(len, 0.0);
        g_ac.resize(len, 0.0);
        g_dc[0] = 0.0;
        g_ac[0] = 0.0;
        for slot in g_dc.iter_mut().take(3).skip(1) {
            *slot = 0.0;
        }
        Self {
            phi_e: 0.0,
            phi_m: 0.0,
            c: vec![0.0; len],
            g_dc,
            g_ac,
            omega0,
            participation: 0.0,
            l_j: 0.0,
        }
    }

    /// Highest populated order.
    pub fn n_max(&self) -> usize {
        self.g_dc.len().saturating_sub(1)
    }

    pub fn gdc(&self, n: usize) -> f64 {
        self.g_dc.get(n).copied().unwrap_or(0.0)
    }

    pub fn gac(&self, n: usize) -> f64 {
        self.g_ac.get(n).copied().unwrap_or(0.0)
    }

    /// Copy with every order above `n_max` removed.
    pub fn truncated(&self, n_max: usize) -> Self {
        let mut out = self.clone();
        let len = (n_max + 1).min(out.g_dc.len());
        out.c.truncate(len);
        out.g_dc.truncate(len);
        out.g_ac.truncate(len);
        out
    }

    /// Copy with the static coefficients of order `>= from` set to zero.
    pub fn without_static_orders_from(&self, from: usize) -> Self {
        let mut out = self.clone();
        for g in out.g_dc.iter_mut().skip(from) {
            *g = 0.0;
        }
        out
    }
}

/// Coefficients `g_n^dc = E_J Phi^n/n! d^nU/dphi^n` and
/// `g_n^ac = E_J Phi^n/n! d/dphi_e d^nU/dphi^n` at the potential minimum.
///
/// The flux derivative is partial (phase held at `phi_m`): the ac flux
/// modulates the potential around the fixed static expansion point. It is
/// taken per flux quantum, so it carries the `2 pi` Jacobian from radians.
pub fn hamiltonian_coefficients(phi_e: f64, params: &CircuitParams, n_max: usize) -> Result<TaylorCoefficients> {
    if n_max < 3 {
        return Err(Error::InvalidParameter(format!("n_max >= 3 required (got {n_max})")));
    }
    let phi_m = potential_minimum(phi_e, params)?;
    let phi_e_rad = TWO_PI * phi_e;
    let mut c = vec![0.0; n_max + 1];
    for (n, slot) in c.iter_mut().enumerate().skip(1) {
        *slot = potential_phase_derivative(params, n, phi_m, phi_e_rad);
    }
    let mode = mode_from_curvature(params, c[2])?;
    let ej = params.ej_angular();
    let phi_zpf = mode.participation;

    let mut g_dc = vec![0.0; n_max + 1];
    let mut g_ac = vec![0.0; n_max + 1];
    let mut prefactor = ej; // E_J Phi^n / n!
    for n in 1..=n_max {
        prefactor *= phi_zpf / n as f64;
        if n >= 3 {
            g_dc[n] = prefactor * c[n];
        }
        g_ac[n] = prefactor * potential_flux_derivative(params, n, phi_m, phi_e_rad);
    }
    Ok(TaylorCoefficients {
        phi_e,
        phi_m,
        c,
        g_dc,
        g_ac,
        omega0: mode.omega0,
        participation: phi_zpf,
        l_j: mode.l_j,
    })
}

/// Writes a coefficient sweep as CSV (frequencies in GHz, couplings in MHz,
/// Kerr and frequency shift in kHz).
pub fn write_coefficient_csv<W: Write>(out: W, rows: &[TaylorCoefficients]) -> Result<()> {
    let n_max = rows.iter().map(TaylorCoefficients::n_max).max().unwrap_or(DEFAULT_N_MAX);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["phi_e".to_string(), "omega0_GHz".to_string()];
    header.extend((3..=n_max).map(|n| format!("g{n}dc_MHz")));
    header.extend((1..=n_max).map(|n| format!("g{n}ac_MHz")));
    header.extend(
        ["k1_kHz", "delta_omega_kHz", "phi_m", "participation"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&header)?;
    let mhz = |g: f64| g / TWO_PI / 1e6;
    for row in rows {
        let mut rec = vec![row.phi_e.to_string(), (row.omega0 / TWO_PI / 1e9).to_string()];
        rec.extend((3..=n_max).map(|n| mhz(row.gdc(n)).to_string()));
        rec.extend((1..=n_max).map(|n| mhz(row.gac(n)).to_string()));
        let (k1, dw) = match crate::effective::effective_static(row) {
            Ok(eff) => (eff.k1, eff.delta_omega),
            Err(_) => (f64::NAN, f64::NAN),
        };
        rec.push((k1 / TWO_PI / 1e3).to_string());
        rec.push((dw / TWO_PI / 1e3).to_string());
        rec.push(row.phi_m.to_string());
        rec.push(row.participation.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
