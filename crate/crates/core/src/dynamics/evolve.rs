//! Time integration in the frame rotating at `omega0`.
//!
//! `H_I(t)_{jk} = e^{i omega0 (j-k) t} sum_n c_n(t) (x^n)_{jk}` is banded
//! (`|j-k| <= 6`), so both the Schrodinger and the Lindblad right-hand sides
//! are applied band by band without forming dense products.

use log::warn;
use num_complex::Complex64;

use super::integrator::{dopri5, StepControl};
use super::{SimulationConfig, Trajectory, MAX_ORDER};
use crate::error::{Error, Result};
use crate::quantum::ops::position_powers;
use crate::quantum::state::{TRUNCATION_FAIL, TRUNCATION_WARN};
use crate::quantum::{CMatrix, CVector, DensityMatrix};

const BANDS: usize = 2 * MAX_ORDER + 1;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const TRACE_TOL: f64 = 1e-8;
const PURE_TOL_FACTOR: f64 = 1e-2;

struct BandModel<'a> {
    cfg: &'a SimulationConfig,
    dim: usize,
    /// `xband[n][d + 6][j] = (x^n)_{j, j+d}` (zero where out of range).
    xband: Vec<Vec<Vec<f64>>>,
    /// Orders with a nonzero coefficient somewhere in the run.
    orders: Vec<usize>,
    bands: Vec<Vec<Complex64>>,
}

impl<'a> BandModel<'a> {
    fn new(cfg: &'a SimulationConfig) -> Self {
        let dim = cfg.dim;
        let xs = position_powers(dim, MAX_ORDER);
        let mut xband = vec![vec![vec![0.0; dim]; BANDS]; MAX_ORDER + 1];
        for (n, x) in xs.iter().enumerate() {
            for (b, band) in xband[n].iter_mut().enumerate() {
                let d = b as isize - MAX_ORDER as isize;
                for (j, slot) in band.iter_mut().enumerate() {
                    let k = j as isize + d;
                    if (0..dim as isize).contains(&k) {
                        *slot = x[(j, k as usize)].re;
                    }
                }
            }
        }
        let orders = (1..=MAX_ORDER)
            .filter(|&n| {
                cfg.coeffs.gdc(n) != 0.0
                    || (n == 1 && !cfg.drives.is_empty())
                    || cfg.drives.iter().any(|d| d.line == super::DriveLine::Flux && cfg.coeffs.gac(n) != 0.0)
            })
            .collect();
        Self {
            cfg,
            dim,
            xband,
            orders,
            bands: vec![vec![ZERO; dim]; BANDS],
        }
    }

    fn update(&mut self, t: f64) {
        let c = self.cfg.order_coefficients(t);
        let rot = Complex64::from_polar(1.0, -self.cfg.coeffs.omega0 * t);
        for b in 0..BANDS {
            let d = b as i32 - MAX_ORDER as i32;
            let phase = rot.powi(d);
            let band = &mut self.bands[b];
            band.iter_mut().for_each(|z| *z = ZERO);
            for &n in &self.orders {
                if c[n] == 0.0 || (n as i32) < d.abs() || (n as i32 - d) % 2 != 0 {
                    continue;
                }
                let w = c[n];
                for (slot, x) in band.iter_mut().zip(&self.xband[n][b]) {
                    slot.re += w * x;
                }
            }
            band.iter_mut().for_each(|z| *z *= phase);
        }
    }

    fn active_bands(&self) -> impl Iterator<Item = (isize, &Vec<Complex64>)> {
        self.bands
            .iter()
            .enumerate()
            .map(|(b, v)| (b as isize - MAX_ORDER as isize, v))
    }

    /// `dpsi = -i H_I psi`.
    fn schrodinger(&mut self, t: f64, psi: &[Complex64], dpsi: &mut [Complex64]) {
        self.update(t);
        let dim = self.dim;
        dpsi.iter_mut().for_each(|z| *z = ZERO);
        for (d, band) in self.active_bands() {
            let lo = (-d).max(0) as usize;
            let hi = (dim as isize - d.max(0)) as usize;
            for j in lo..hi {
                dpsi[j] += band[j] * psi[(j as isize + d) as usize];
            }
        }
        for z in dpsi.iter_mut() {
            *z = Complex64::new(z.im, -z.re);
        }
    }
}

/// Right-hand side of the Lindblad equation on a row-major density matrix.
struct Lindblad<'a> {
    model: BandModel<'a>,
    down: f64,
    up: f64,
    dephase: f64,
    sqrt_n: Vec<f64>,
    scratch: Vec<Complex64>,
}

impl<'a> Lindblad<'a> {
    fn new(cfg: &'a SimulationConfig) -> Self {
        let (down, up, dephase) = cfg.noise.map(|n| n.rates()).unwrap_or((0.0, 0.0, 0.0));
        let dim = cfg.dim;
        Self {
            model: BandModel::new(cfg),
            down,
            up,
            dephase,
            sqrt_n: (0..dim).map(|j| (j as f64).sqrt()).collect(),
            scratch: vec![ZERO; dim * dim],
        }
    }

    fn rhs(&mut self, t: f64, rho: &[Complex64], out: &mut [Complex64]) {
        self.model.update(t);
        let dim = self.model.dim;
        // M = H rho
        let m = &mut self.scratch;
        m.iter_mut().for_each(|z| *z = ZERO);
        for (d, band) in self.model.active_bands() {
            let lo = (-d).max(0) as usize;
            let hi = (dim as isize - d.max(0)) as usize;
            for j in lo..hi {
                let h = band[j];
                if h == ZERO {
                    continue;
                }
                let src = (j as isize + d) as usize * dim;
                let row = &mut m[j * dim..(j + 1) * dim];
                for (slot, r) in row.iter_mut().zip(&rho[src..src + dim]) {
                    *slot += h * r;
                }
            }
        }
        // -i (M - M^dag)
        for j in 0..dim {
            for k in 0..dim {
                let c = m[j * dim + k] - m[k * dim + j].conj();
                out[j * dim + k] = Complex64::new(c.im, -c.re);
            }
        }
        let n_top = dim - 1;
        for j in 0..dim {
            for k in 0..dim {
                let idx = j * dim + k;
                let mut acc = ZERO;
                if self.down != 0.0 {
                    // a rho a^dag - {n, rho}/2
                    if j < n_top && k < n_top {
                        acc += rho[idx + dim + 1] * (self.down * self.sqrt_n[j + 1] * self.sqrt_n[k + 1]);
                    }
                    acc -= rho[idx] * (0.5 * self.down * (j + k) as f64);
                }
                if self.up != 0.0 {
                    // a^dag rho a - {a a^dag, rho}/2, with a a^dag truncated so
                    // the trace is conserved exactly
                    if j > 0 && k > 0 {
                        acc += rho[idx - dim - 1] * (self.up * self.sqrt_n[j] * self.sqrt_n[k]);
                    }
                    let aad = |i: usize| if i < n_top { (i + 1) as f64 } else { 0.0 };
                    acc -= rho[idx] * (0.5 * self.up * (aad(j) + aad(k)));
                }
                if self.dephase != 0.0 {
                    let dn = j as f64 - k as f64;
                    acc -= rho[idx] * (0.5 * self.dephase * dn * dn);
                }
                out[idx] += acc;
            }
        }
    }
}

fn to_density(rho: &[Complex64], dim: usize) -> DensityMatrix {
    let m = CMatrix::from_fn(dim, dim, |j, k| rho[j * dim + k]);
    // symmetrise away integrator round-off before storage
    let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    DensityMatrix::from_matrix_unchecked(h)
}

fn integration_error(t: f64, reason: String) -> Error {
    Error::Integration { time: t, reason }
}

fn record(traj: &mut Trajectory, t: f64, rho: DensityMatrix) {
    traj.times.push(t);
    traj.mean_a.push(rho.mean_a());
    traj.mean_n.push(rho.mean_n());
    traj.purity.push(rho.purity());
    traj.states.push(rho);
}

fn check_top(t: f64, top: f64, dim: usize, warned: &mut bool) -> Result<()> {
    if top > TRUNCATION_FAIL {
        return Err(integration_error(
            t,
            format!("Fock truncation at dim {dim} is unfaithful (top level holds {top:.3e})"),
        ));
    }
    if top > TRUNCATION_WARN && !*warned {
        warn!("top Fock level population {top:.2e} at t = {t:e} s (dim {dim})");
        *warned = true;
    }
    Ok(())
}

/// Integrates from `cfg.initial`.
pub fn evolve(cfg: &SimulationConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let rho0 = crate::quantum::make_state(&cfg.initial, cfg.dim)?;
    evolve_from(cfg, &rho0)
}

/// Integrates from an explicit initial state (ignores `cfg.initial`).
///
/// Noise-free runs from a pure state propagate the state vector; all other
/// runs integrate the Lindblad equation.
pub fn evolve_from(cfg: &SimulationConfig, rho0: &DensityMatrix) -> Result<Trajectory> {
    cfg.validate()?;
    if rho0.dim() != cfg.dim {
        return Err(Error::InvalidParameter(format!(
            "initial state has dim {} but the run uses {}",
            rho0.dim(),
            cfg.dim
        )));
    }
    rho0.check_invariants()?;
    let ctl = StepControl::new(cfg.solver.rtol, cfg.solver.atol, cfg.max_step());
    // Runge-Kutta keeps the (linear) trace of rho exactly but not the
    // (quadratic) norm of psi, so the vector route runs tighter.
    let pure_ctl = StepControl::new(ctl.rtol * PURE_TOL_FACTOR, ctl.atol * PURE_TOL_FACTOR, ctl.max_step);
    let dim = cfg.dim;
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        mean_a: Vec::new(),
        mean_n: Vec::new(),
        purity: Vec::new(),
    };
    let mut warned = false;

    if cfg.noise.is_none() && rho0.purity() > 1.0 - 1e-12 {
        let eig = rho0.matrix().clone().symmetric_eigen();
        let top = eig.eigenvalues.imax();
        let psi0: Vec<Complex64> = eig.eigenvectors.column(top).iter().copied().collect();
        let mut model = BandModel::new(cfg);
        dopri5(
            |t, y, dy| model.schrodinger(t, y, dy),
            psi0,
            &cfg.t_grid,
            &pure_ctl,
            |t, y| {
                let norm: f64 = y.iter().map(|z| z.norm_sqr()).sum();
                if (norm - 1.0).abs() > TRACE_TOL {
                    return Err(integration_error(t, format!("norm drift {:e}", norm - 1.0)));
                }
                check_top(t, y[dim - 1].norm_sqr(), dim, &mut warned)?;
                let psi = CVector::from_column_slice(y);
                record(&mut traj, t, DensityMatrix::from_pure(&psi));
                Ok(())
            },
        )?;
        return Ok(traj);
    }

    let y0: Vec<Complex64> = (0..dim * dim).map(|i| rho0.matrix()[(i / dim, i % dim)]).collect();
    let mut lind = Lindblad::new(cfg);
    dopri5(
        |t, y, dy| lind.rhs(t, y, dy),
        y0,
        &cfg.t_grid,
        &ctl,
        |t, y| {
            let rho = to_density(y, dim);
            let tr = rho.trace();
            if (tr - 1.0).abs() > TRACE_TOL {
                return Err(integration_error(t, format!("trace drift {:e}", tr - 1.0)));
            }
            let min = rho.min_eigenvalue();
            if min < -TRACE_TOL {
                return Err(integration_error(t, format!("negative eigenvalue {min:e}")));
            }
            check_top(t, rho.top_occupation(), dim, &mut warned)?;
            record(&mut traj, t, rho);
            Ok(())
        },
    )?;
    Ok(traj)
}
