//! Driven, damped resonator dynamics and the calibration protocols built on
//! them.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::TaylorCoefficients;
use crate::error::{Error, Result};
use crate::quantum::{ops::position_powers, CMatrix, DensityMatrix, StateSpec};

mod evolve;
pub mod integrator;
pub mod protocols;

pub use evolve::{evolve, evolve_from};

/// Highest nonlinear order kept in the Hamiltonian.
pub const MAX_ORDER: usize = 6;

/// Flat top with raised-cosine ramps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseEnvelope {
    /// Ramp duration (s).
    pub rise: f64,
    /// Flat-top duration (s).
    pub hold: f64,
}

impl PulseEnvelope {
    pub fn new(rise: f64, hold: f64) -> Result<Self> {
        let env = Self { rise, hold };
        env.validate()?;
        Ok(env)
    }

    /// Envelope of the given total length with ramps of `rise` each side.
    pub fn with_total(total: f64, rise: f64) -> Result<Self> {
        Self::new(rise, total - 2.0 * rise)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rise >= 0.0 && self.hold >= 0.0) || !self.rise.is_finite() || !self.hold.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "envelope needs rise >= 0 and hold >= 0 (got {}, {})",
                self.rise, self.hold
            )));
        }
        if self.total() <= 0.0 {
            return Err(Error::InvalidParameter("envelope has zero length".into()));
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        2.0 * self.rise + self.hold
    }

    /// `T = integral of f`, exactly `hold + rise` for raised-cosine ramps.
    pub fn gate_time(&self) -> f64 {
        self.hold + self.rise
    }

    /// `integral_0^t f`, reaching `gate_time()` at the end of the pulse.
    pub fn area(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.total());
        let ramp = |s: f64| {
            if self.rise == 0.0 {
                0.0
            } else {
                0.5 * s - 0.5 * self.rise / PI * (PI * s / self.rise).sin()
            }
        };
        if t < self.rise {
            ramp(t)
        } else if t <= self.rise + self.hold {
            ramp(self.rise) + (t - self.rise)
        } else {
            self.gate_time() - ramp(self.total() - t)
        }
    }

    /// `f(t)` for `t` measured from the pulse start; zero outside.
    pub fn value(&self, t: f64) -> f64 {
        let total = self.total();
        if !(0.0..=total).contains(&t) {
            return 0.0;
        }
        let ramp = |s: f64| 0.5 * (1.0 - (PI * s / self.rise).cos());
        if t < self.rise {
            ramp(t)
        } else if t <= self.rise + self.hold {
            1.0
        } else {
            ramp(total - t)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveLine {
    Flux,
    Charge,
}

/// One pulsed tone at a harmonic of `omega0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub line: DriveLine,
    pub harmonic: u32,
    /// Flux: `phi_e^ac` in flux quanta. Charge: `xi` in rad/s.
    pub amplitude: f64,
    /// Carrier phase at the pulse start (rad).
    pub phase: f64,
    /// Pulse start (s).
    pub delay: f64,
    pub envelope: PulseEnvelope,
}

impl DriveSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.harmonic) {
            return Err(Error::InvalidParameter(format!("harmonic must be 1, 2 or 3 (got {})", self.harmonic)));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("drive amplitude >= 0 required (got {})", self.amplitude)));
        }
        if !self.phase.is_finite() || !self.delay.is_finite() {
            return Err(Error::InvalidParameter("drive phase and delay must be finite".into()));
        }
        self.envelope.validate()
    }

    /// Sets the phase so the carrier reads `cos(harmonic omega0 t + phase_abs)`
    /// in absolute time, whatever the delay.
    pub fn with_clock_phase(mut self, phase_abs: f64, omega0: f64) -> Self {
        self.phase = phase_abs + self.harmonic as f64 * omega0 * self.delay;
        self
    }

    /// `amplitude f(t - delay) cos(omega_d (t - delay) + phase)`.
    pub fn signal(&self, t: f64, omega0: f64) -> f64 {
        let s = t - self.delay;
        let f = self.envelope.value(s);
        if f == 0.0 {
            return 0.0;
        }
        self.amplitude * f * (self.harmonic as f64 * omega0 * s + self.phase).cos()
    }

    pub fn end(&self) -> f64 {
        self.delay + self.envelope.total()
    }
}

/// Markovian loss channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Energy relaxation time (s); infinite disables relaxation.
    pub t1: f64,
    /// Pure dephasing time (s); infinite disables dephasing.
    pub t_phi: f64,
    /// Thermal occupation of the bath.
    pub n_th: f64,
}

impl NoiseModel {
    /// `1/t_phi = 1/t2* - 1/(2 t1)`.
    pub fn from_t2_star(t1: f64, t2_star: f64, n_th: f64) -> Result<Self> {
        let rate = 1.0 / t2_star - 0.5 / t1;
        if !(rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t2* = {t2_star:e} s exceeds 2 t1 = {:e} s, no pure dephasing left",
                2.0 * t1
            )));
        }
        let m = Self {
            t1,
            t_phi: 1.0 / rate,
            n_th,
        };
        m.validate()?;
        Ok(m)
    }

    /// T1 = 28 us, T2* = 2.80 us, 2.4 % residual population.
    pub fn reference_device() -> Self {
        Self::from_t2_star(28e-6, 2.80e-6, 0.024).expect("reference noise is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0) {
            return Err(Error::InvalidParameter(format!("t1 > 0 required (got {})", self.t1)));
        }
        if !(self.t_phi > 0.0) {
            return Err(Error::InvalidParameter(format!("t_phi > 0 required (got {})", self.t_phi)));
        }
        if !(0.0..1.0).contains(&self.n_th) {
            return Err(Error::InvalidParameter(format!("0 <= n_th < 1 required (got {})", self.n_th)));
        }
        Ok(())
    }

    /// `(down, up, dephasing)` rates multiplying `D[a]`, `D[a^dag]`, `D[n]`.
    pub fn rates(&self) -> (f64, f64, f64) {
        let g1 = 1.0 / self.t1;
        (g1 * (1.0 + self.n_th), g1 * self.n_th, 2.0 / self.t_phi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Defaults to 50 steps per period of the third harmonic.
    pub max_step: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_step: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub coeffs: TaylorCoefficients,
    pub drives: Vec<DriveSpec>,
    pub noise: Option<NoiseModel>,
    pub dim: usize,
    /// Output times (s), ascending; the first entry is the start time.
    pub t_grid: Vec<f64>,
    pub initial: StateSpec,
    pub solver: SolverOptions,
}

impl SimulationConfig {
    /// Drive-free, noise-free run from vacuum sampled at `[0, t_end]`.
    pub fn new(coeffs: TaylorCoefficients, dim: usize, t_end: f64) -> Self {
        Self {
            coeffs,
            drives: Vec::new(),
            noise: None,
            dim,
            t_grid: vec![0.0, t_end],
            initial: StateSpec::Vacuum,
            solver: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 4 {
            return Err(Error::InvalidParameter(format!("dim >= 4 required (got {})", self.dim)));
        }
        if !(self.coeffs.omega0 > 0.0) {
            return Err(Error::InvalidParameter("omega0 > 0 required".into()));
        }
        if self.coeffs.n_max() > MAX_ORDER {
            return Err(Error::InvalidParameter(format!(
                "coefficients beyond order {MAX_ORDER} are not supported (have {})",
                self.coeffs.n_max()
            )));
        }
        if self.t_grid.is_empty() {
            return Err(Error::InvalidParameter("empty time grid".into()));
        }
        if self.t_grid.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::InvalidParameter("time grid must be ascending".into()));
        }
        for d in &self.drives {
            d.validate()?;
        }
        if let Some(n) = &self.noise {
            n.validate()?;
        }
        if !(self.solver.rtol > 0.0 && self.solver.atol > 0.0) {
            return Err(Error::InvalidParameter("solver tolerances must be positive".into()));
        }
        Ok(())
    }

    pub fn max_step(&self) -> f64 {
        self.solver
            .max_step
            .unwrap_or(2.0 * PI / (50.0 * 3.0 * self.coeffs.omega0))
    }

    /// Uniform grid of `samples` points over `[0, t_end]`.
    pub fn with_uniform_grid(mut self, t_end: f64, samples: usize) -> Self {
        let n = samples.max(2);
        self.t_grid = (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect();
        self
    }

    /// Coefficient of `(a + a^dag)^n` at time `t`, lab frame, `n = 0..=6`.
    pub(crate) fn order_coefficients(&self, t: f64) -> [f64; MAX_ORDER + 1] {
        let mut c = [0.0; MAX_ORDER + 1];
        for (n, slot) in c.iter_mut().enumerate().skip(1) {
            *slot = self.coeffs.gdc(n);
        }
        for d in &self.drives {
            let s = d.signal(t, self.coeffs.omega0);
            if s == 0.0 {
                continue;
            }
            match d.line {
                DriveLine::Flux => {
                    for (n, slot) in c.iter_mut().enumerate().skip(1) {
                        *slot += self.coeffs.gac(n) * s;
                    }
                }
                DriveLine::Charge => c[1] += s,
            }
        }
        c
    }
}

/// Lab-frame `H(t) = omega0 n + sum_n c_n(t) (a + a^dag)^n`.
pub fn hamiltonian_at(t: f64, cfg: &SimulationConfig) -> CMatrix {
    let xs = position_powers(cfg.dim, MAX_ORDER);
    let c = cfg.order_coefficients(t);
    let mut h = CMatrix::zeros(cfg.dim, cfg.dim);
    for j in 0..cfg.dim {
        h[(j, j)] = Complex64::new(cfg.coeffs.omega0 * j as f64, 0.0);
    }
    for (n, x) in xs.iter().enumerate().skip(1) {
        if c[n] != 0.0 {
            h += x * Complex64::new(c[n], 0.0);
        }
    }
    h
}

/// Sampled evolution; states are in the frame rotating at `omega0`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub mean_a: Vec<Complex64>,
    pub mean_n: Vec<f64>,
    pub purity: Vec<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory has at least one sample")
    }

    /// Columns `t_ns, re_a, im_a, n, purity`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_ns", "re_a", "im_a", "n", "purity"])?;
        for k in 0..self.times.len() {
            w.write_record(&[
                format!("{}", self.times[k] * 1e9),
                format!("{}", self.mean_a[k].re),
                format!("{}", self.mean_a[k].im),
                format!("{}", self.mean_n[k]),
                format!("{}", self.purity[k]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
