//! Simulated versions of the calibration and state-preparation sequences:
//! out-and-back drift measurement, generalized-squeezing amplitude sweeps,
//! the squeeze-then-cubic sequence, inter-line delay calibration and the
//! cubic-state error budget.
//!
//! Phase convention: a gate angle `angle` asks for the leading-order gate
//! parameter `-|p| e^{i angle}`, so angle 0 gives real negative `alpha`,
//! `zeta` and `tau`. Carrier phases are referenced to a common clock, so
//! pulse delays move envelopes and leave carriers coherent.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use log::{debug, info};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evolve_from, DriveLine, DriveSpec, NoiseModel, PulseEnvelope, SimulationConfig, SolverOptions};
use crate::circuit::TaylorCoefficients;
use crate::effective::drive_rates;
use crate::error::{Error, Result};
use crate::quantum::fit::closest_pure_state;
use crate::quantum::ops::position_powers;
use crate::quantum::{
    fit_state, make_state, wigner, CVector, DensityMatrix, FitOptions, PhaseGrid, StateFamily, StateFitResult,
    StateSpec, WignerMap,
};
use crate::roots::{golden_section_min, least_squares_vertex};

/// Shared inputs of every protocol.
#[derive(Debug, Clone)]
pub struct ProtocolBase {
    pub coeffs: TaylorCoefficients,
    pub dim: usize,
    pub noise: Option<NoiseModel>,
    pub solver: SolverOptions,
}

impl ProtocolBase {
    pub fn new(coeffs: TaylorCoefficients, dim: usize) -> Self {
        Self {
            coeffs,
            dim,
            noise: None,
            solver: SolverOptions::default(),
        }
    }

    pub fn with_noise(mut self, noise: Option<NoiseModel>) -> Self {
        self.noise = noise;
        self
    }

    /// Thermal state at the bath occupation, vacuum without noise.
    pub fn initial_state(&self) -> StateSpec {
        match self.noise {
            Some(n) if n.n_th > 0.0 => StateSpec::Thermal { n_th: n.n_th },
            _ => StateSpec::Vacuum,
        }
    }

    pub fn omega0(&self) -> f64 {
        self.coeffs.omega0
    }

    fn config(&self, drives: Vec<DriveSpec>, t_grid: Vec<f64>) -> SimulationConfig {
        SimulationConfig {
            coeffs: self.coeffs.clone(),
            drives,
            noise: self.noise,
            dim: self.dim,
            t_grid,
            initial: self.initial_state(),
            solver: self.solver,
        }
    }

    fn run(&self, drives: Vec<DriveSpec>, t_grid: Vec<f64>) -> Result<super::Trajectory> {
        let cfg = self.config(drives, t_grid);
        let rho0 = make_state(&cfg.initial, cfg.dim)?;
        evolve_from(&cfg, &rho0)
    }
}

/// Clock phase of a tone whose leading-order gate parameter is
/// `-i rate amp T e^{-i phase}`, chosen so the parameter is
/// `-|p| e^{i angle}`.
pub fn tone_phase(rate: f64, angle: f64) -> f64 {
    rate.signum() * FRAC_PI_2 - angle
}

fn tone(line: DriveLine, harmonic: u32, amplitude: f64, clock_phase: f64, delay: f64, envelope: PulseEnvelope, omega0: f64) -> DriveSpec {
    DriveSpec {
        line,
        harmonic,
        amplitude,
        phase: 0.0,
        delay,
        envelope,
    }
    .with_clock_phase(clock_phase, omega0)
}

/// `|beta>` cropped to `dim` levels (not renormalised).
fn coherent_vector(beta: Complex64, dim: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    let mut c = Complex64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        v[n] = c;
        c *= beta / ((n + 1) as f64).sqrt();
    }
    v
}

fn coherent_overlap(rho: &DensityMatrix, beta: Complex64) -> f64 {
    let v = coherent_vector(beta, rho.dim());
    (v.adjoint() * rho.matrix() * &v)[(0, 0)].re
}

// ---------------------------------------------------------------- out-and-back

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutAndBackOptions {
    pub pulse: PulseEnvelope,
    /// Free evolution after the displacement pulse (s).
    pub free_time: f64,
    pub scan_points: usize,
}

impl Default for OutAndBackOptions {
    fn default() -> Self {
        Self {
            pulse: PulseEnvelope { rise: 5e-9, hold: 0.0 },
            free_time: 100e-9,
            scan_points: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutAndBackPoint {
    pub phi_e: f64,
    pub a_mag: f64,
    /// Return angle maximising the vacuum overlap (rad), `arg a` convention.
    pub theta: f64,
    pub overlap: f64,
    /// Calibrated charge amplitude (rad/s).
    pub xi: f64,
}

/// Charge amplitude whose pulse leaves `<n> - <n>_0 = a_mag^2`.
pub fn calibrate_displacement(base: &ProtocolBase, pulse: PulseEnvelope, a_mag: f64) -> Result<f64> {
    if !(a_mag > 0.0) {
        return Err(Error::InvalidParameter(format!("a_mag > 0 required (got {a_mag})")));
    }
    let omega0 = base.omega0();
    let n0 = make_state(&base.initial_state(), base.dim)?.mean_n();
    let mut xi = 2.0 * a_mag / pulse.gate_time();
    let phase = tone_phase(1.0, PI);
    for _ in 0..8 {
        let d = tone(DriveLine::Charge, 1, xi, phase, 0.0, pulse, omega0);
        let tr = base.run(vec![d], vec![0.0, pulse.total()])?;
        let reached = (tr.mean_n[1] - n0).max(0.0).sqrt();
        if reached == 0.0 {
            return Err(Error::Calibration("displacement pulse left the mode empty".into()));
        }
        if (reached - a_mag).abs() < 1e-5 * a_mag {
            return Ok(xi);
        }
        xi *= a_mag / reached;
    }
    Ok(xi)
}

/// Displace to `a_mag`, evolve freely, then find the return angle `theta`
/// for which `D(-a_mag e^{i theta})` best restores the initial state.
pub fn protocol_out_and_back(base: &ProtocolBase, opts: &OutAndBackOptions, a_mag: f64) -> Result<OutAndBackPoint> {
    let xi = calibrate_displacement(base, opts.pulse, a_mag)?;
    let d = tone(DriveLine::Charge, 1, xi, tone_phase(1.0, PI), 0.0, opts.pulse, base.omega0());
    let t_end = opts.pulse.total() + opts.free_time;
    let tr = base.run(vec![d], vec![0.0, t_end])?;
    let rho = tr.final_state();
    let overlap = |theta: f64| coherent_overlap(rho, Complex64::from_polar(a_mag, theta));

    let n = opts.scan_points.max(8);
    let step = 2.0 * PI / n as f64;
    let (best, _) = (0..n)
        .map(|k| {
            let th = -PI + k as f64 * step;
            (th, overlap(th))
        })
        .fold((0.0, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc });
    let (theta, neg) = golden_section_min(|th| -overlap(th), best - step, best + step, 1e-7);
    let theta = (theta + PI).rem_euclid(2.0 * PI) - PI;
    let overlap = -neg;
    if overlap < 0.5 {
        return Err(Error::Calibration(format!(
            "state too distorted for the drift measurement (best vacuum overlap {overlap:.3})"
        )));
    }
    Ok(OutAndBackPoint {
        phi_e: base.coeffs.phi_e,
        a_mag,
        theta,
        overlap,
        xi,
    })
}

/// Out-and-back over a grid of amplitudes, in parallel.
pub fn out_and_back_sweep(base: &ProtocolBase, opts: &OutAndBackOptions, a_mags: &[f64]) -> Result<Vec<OutAndBackPoint>> {
    a_mags
        .par_iter()
        .map(|&a| protocol_out_and_back(base, opts, a))
        .collect()
}

// ------------------------------------------------------ generalized squeezing

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    Displacement,
    Squeezing,
    Trisqueezing,
}

impl GateKind {
    pub fn harmonic(&self) -> u32 {
        match self {
            GateKind::Displacement => 1,
            GateKind::Squeezing => 2,
            GateKind::Trisqueezing => 3,
        }
    }

    /// Leading-order rate per unit flux amplitude and gate time.
    pub fn rate(&self, coeffs: &TaylorCoefficients) -> f64 {
        let r = drive_rates(coeffs, self.harmonic() as f64 * coeffs.omega0);
        match self {
            GateKind::Displacement => r.alpha_rate,
            GateKind::Squeezing => r.zeta_rate,
            GateKind::Trisqueezing => r.tau_rate,
        }
    }

    /// Clock phase giving the parameter `-|p| e^{i angle}`. The squeezing
    /// gate is defined with the opposite sign of its generator, which flips
    /// the tone.
    pub fn clock_phase(&self, rate: f64, angle: f64) -> f64 {
        match self {
            GateKind::Squeezing => tone_phase(-rate, angle),
            _ => tone_phase(rate, angle),
        }
    }

    fn family(&self) -> Option<StateFamily> {
        match self {
            GateKind::Displacement => None,
            GateKind::Squeezing => Some(StateFamily::Squeezed),
            GateKind::Trisqueezing => Some(StateFamily::Trisqueezed),
        }
    }

    fn spec(&self, p: Complex64) -> StateSpec {
        match self {
            GateKind::Displacement => StateSpec::Coherent { alpha: p },
            GateKind::Squeezing => StateSpec::Squeezed { zeta: p },
            GateKind::Trisqueezing => StateSpec::Trisqueezed { tau: p },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatePoint {
    pub amplitude: f64,
    /// Fitted gate parameter (`<a>` for displacement).
    pub param: Complex64,
    /// Component of `param` along the requested direction `-e^{i angle}`.
    pub along: f64,
    /// Wigner overlap of the fit (1 for displacement).
    pub overlap: f64,
    /// Fidelity of the simulated state to the fitted pure state.
    pub fidelity: f64,
    pub min_wigner: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateCalibration {
    pub kind: GateKind,
    pub gate_time: f64,
    pub points: Vec<GatePoint>,
    /// Least-squares `|p| / (amplitude T)` over the sweep (rad/s).
    pub slope: f64,
    /// `|rate|` of the leading-order formula (rad/s).
    pub predicted: f64,
}

impl GateCalibration {
    /// `slope / predicted`, the simulated-over-formula amplitude scale.
    pub fn scale(&self) -> f64 {
        self.slope / self.predicted
    }

    /// Flux amplitude expected to reach `|target|` with the calibrated slope.
    pub fn amplitude_for(&self, target: f64) -> f64 {
        target.abs() / (self.slope * self.gate_time)
    }
}

#[derive(Debug, Clone)]
pub struct GateSweepOptions {
    pub envelope: PulseEnvelope,
    pub angle: f64,
    pub grid: PhaseGrid,
}

impl GateSweepOptions {
    pub fn new(envelope: PulseEnvelope) -> Self {
        Self {
            envelope,
            angle: 0.0,
            grid: PhaseGrid::standard(),
        }
    }
}

/// Single flux pulse at the gate harmonic, fitted against its family.
pub fn run_gate_point(base: &ProtocolBase, kind: GateKind, opts: &GateSweepOptions, amplitude: f64) -> Result<(GatePoint, DensityMatrix)> {
    let rate = kind.rate(&base.coeffs);
    let env = opts.envelope;
    let d = tone(
        DriveLine::Flux,
        kind.harmonic(),
        amplitude,
        kind.clock_phase(rate, opts.angle),
        0.0,
        env,
        base.omega0(),
    );
    let tr = base.run(vec![d], vec![0.0, env.total()])?;
    let rho = tr.final_state().clone();
    let dir = -Complex64::from_polar(1.0, opts.angle);
    let predicted = dir * (rate.abs() * amplitude * env.gate_time());
    let map = wigner(&rho, &opts.grid);
    let (param, overlap, fidelity) = match kind.family() {
        None => {
            let a = rho.mean_a();
            (a, 1.0, coherent_overlap(&rho, a))
        }
        Some(family) => {
            let fit = fit_state(&map, family, &kind.spec(predicted), &FitOptions::for_family(family))?;
            let mut fopts = FitOptions::for_family(family);
            fopts.dim = rho.dim();
            let closest = closest_pure_state(&rho, family, &fit.params, &fopts)?;
            let p = match fit.params {
                StateSpec::Squeezed { zeta } => zeta,
                StateSpec::Trisqueezed { tau } => tau,
                _ => unreachable!("family fit returns its own family"),
            };
            (p, fit.overlap, closest.overlap)
        }
    };
    let along = (param * dir.conj()).re;
    Ok((
        GatePoint {
            amplitude,
            param,
            along,
            overlap,
            fidelity,
            min_wigner: map.min(),
        },
        rho,
    ))
}

/// Sweeps the flux amplitude of one gate and fits the linear response.
pub fn protocol_generalized_squeezing(base: &ProtocolBase, kind: GateKind, opts: &GateSweepOptions, amplitudes: &[f64]) -> Result<GateCalibration> {
    let points: Vec<GatePoint> = amplitudes
        .par_iter()
        .enumerate()
        .map(|(i, &amp)| {
            run_gate_point(base, kind, opts, amp).map(|(p, _)| p).map_err(|e| match e {
                Error::Fit { reason, last_iterate } => Error::Fit {
                    reason: format!("amplitude #{i} ({amp}): {reason}"),
                    last_iterate,
                },
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    let t = opts.envelope.gate_time();
    let sxx: f64 = points.iter().map(|p| (p.amplitude * t).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| p.amplitude * t * p.along).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    Ok(GateCalibration {
        kind,
        gate_time: t,
        points,
        slope,
        predicted: kind.rate(&base.coeffs).abs(),
    })
}

/// Relative miss on `|target|` at which [`target_gate_point`] stops.
pub const TARGET_TOL: f64 = 0.01;
const TARGET_ITERS: usize = 6;

/// Pulse whose fitted parameter reaches `|target|` along the gate direction.
///
/// Starts from the calibrated linear estimate and refines the amplitude by
/// secant steps, since the response bends over at large amplitude.
pub fn target_gate_point(
    base: &ProtocolBase,
    kind: GateKind,
    opts: &GateSweepOptions,
    cal: &GateCalibration,
    target: f64,
) -> Result<(GatePoint, DensityMatrix)> {
    let goal = target.abs();
    let mut amp = cal.amplitude_for(goal);
    let mut best = run_gate_point(base, kind, opts, amp)?;
    // the origin is an exact point of the response curve
    let (mut prev_amp, mut prev_along) = (0.0, 0.0);
    for _ in 0..TARGET_ITERS {
        let along = best.0.along;
        if (along - goal).abs() <= TARGET_TOL * goal {
            break;
        }
        let slope = (along - prev_along) / (amp - prev_amp);
        if !(slope > 0.0) {
            break;
        }
        let next = amp + (goal - along) / slope;
        (prev_amp, prev_along) = (amp, along);
        amp = next.clamp(0.5 * amp, 2.0 * amp);
        let trial = run_gate_point(base, kind, opts, amp)?;
        debug!("{kind:?} target {goal}: amplitude {amp:.5e} gives {:.4}", trial.0.along);
        best = trial;
    }
    Ok(best)
}

// ---------------------------------------------------------------- cubic state

#[derive(Debug, Clone)]
pub struct CubicOptions {
    pub squeeze_envelope: PulseEnvelope,
    pub cubic_envelope: PulseEnvelope,
    pub zeta_target: f64,
    pub gamma_target: f64,
    /// `|zeta| / (amplitude T)` used to set the 2 omega0 amplitude (rad/s).
    pub squeeze_slope: f64,
    /// `|tau| / (amplitude T)` used to set the 3 omega0 and 1 omega0
    /// amplitudes (rad/s).
    pub cubic_rate: f64,
    pub grid: PhaseGrid,
    /// Samples taken during the cubic pulse to monitor `<a>`.
    pub monitor_samples: usize,
}

impl CubicOptions {
    /// Targets with leading-order rates taken from the coefficients.
    pub fn leading_order(coeffs: &TaylorCoefficients, zeta_target: f64, gamma_target: f64) -> Self {
        Self {
            squeeze_envelope: PulseEnvelope { rise: 5e-9, hold: 10e-9 },
            cubic_envelope: PulseEnvelope { rise: 5e-9, hold: 30e-9 },
            zeta_target,
            gamma_target,
            squeeze_slope: GateKind::Squeezing.rate(coeffs).abs(),
            cubic_rate: GateKind::Trisqueezing.rate(coeffs).abs(),
            grid: PhaseGrid::standard(),
            monitor_samples: 8,
        }
    }

    /// `(squeeze, cubic flux)` amplitudes in flux quanta.
    pub fn amplitudes(&self) -> (f64, f64) {
        let sq = self.zeta_target.abs() / (self.squeeze_slope * self.squeeze_envelope.gate_time());
        // gamma = 2 sqrt2 T eps tau_rate for matched 1 and 3 omega0 tones
        let cubic = self.gamma_target.abs() / (2.0 * SQRT_2 * self.cubic_rate * self.cubic_envelope.gate_time());
        (sq, cubic)
    }
}

/// The squeeze-then-cubic drive list.
pub fn cubic_drives(coeffs: &TaylorCoefficients, opts: &CubicOptions) -> Vec<DriveSpec> {
    let omega0 = coeffs.omega0;
    let (eps_sq, eps_c) = opts.amplitudes();
    let zeta_rate = GateKind::Squeezing.rate(coeffs);
    let sq_angle = if opts.zeta_target > 0.0 { PI } else { 0.0 };
    let start = opts.squeeze_envelope.total();
    let env = opts.cubic_envelope;
    // (g3 eps/2)(a + a^dag)^3 at clock phase 0 gives gamma = -sqrt2 T eps g3
    let g3 = coeffs.gac(3);
    let phase = if opts.gamma_target * g3 < 0.0 { 0.0 } else { PI };
    let g1 = coeffs.gac(1);
    let charge_phase = if g1 > 0.0 { phase + PI } else { phase };
    let mut drives = Vec::new();
    if eps_sq > 0.0 {
        drives.push(tone(
            DriveLine::Flux,
            2,
            eps_sq,
            GateKind::Squeezing.clock_phase(zeta_rate, sq_angle),
            0.0,
            opts.squeeze_envelope,
            omega0,
        ));
    }
    if eps_c > 0.0 {
        drives.push(tone(DriveLine::Flux, 3, eps_c, phase, start, env, omega0));
        drives.push(tone(DriveLine::Flux, 1, eps_c, phase, start, env, omega0));
        drives.push(tone(DriveLine::Charge, 1, g1.abs() * eps_c, charge_phase, start, env, omega0));
    }
    drives
}

#[derive(Debug, Clone)]
pub struct CubicResult {
    pub state: DensityMatrix,
    pub wigner: WignerMap,
    /// Fit of the Wigner map with the cubic family.
    pub fit: StateFitResult,
    /// Best fidelity over the ideal cubic family.
    pub fidelity: f64,
    pub closest: StateSpec,
    /// Largest `|<a>|` during the cubic pulse beyond the shift the ideal
    /// gate produces.
    pub max_displacement: f64,
}

fn cubic_guess(opts: &CubicOptions) -> StateSpec {
    StateSpec::Cubic {
        zeta: Complex64::new(opts.zeta_target, 0.0),
        gamma: opts.gamma_target,
        alpha: Complex64::new(0.0, 0.0),
        theta: 0.0,
    }
}

/// Runs the 2 omega0 squeeze followed by the matched 3 omega0 / 1 omega0
/// flux tones with the cancelling charge tone, then fits the result.
pub fn protocol_cubic_state(base: &ProtocolBase, opts: &CubicOptions) -> Result<CubicResult> {
    let drives = cubic_drives(&base.coeffs, opts);
    let start = opts.squeeze_envelope.total();
    let total = start + opts.cubic_envelope.total();
    let m = opts.monitor_samples.max(1);
    let mut grid = vec![0.0, start];
    grid.extend((1..=m).map(|k| start + opts.cubic_envelope.total() * k as f64 / m as f64));
    let tr = base.run(drives, grid)?;
    // exp(i gamma x^3) itself moves <p> by 3 gamma <x^2>; only the rest is a
    // cancellation residual
    let x2 = tr.states[1].expect(&position_powers(base.dim, 2)[2]).re / 2.0;
    let a_start = tr.mean_a[1];
    let gamma_t = |t: f64| opts.gamma_target * opts.cubic_envelope.area(t - start) / opts.cubic_envelope.gate_time();
    let max_displacement = tr.times[1..]
        .iter()
        .zip(&tr.mean_a[1..])
        .map(|(t, a)| (a - a_start - Complex64::new(0.0, 3.0 * gamma_t(*t) * x2 / SQRT_2)).norm())
        .fold(0.0, f64::max);
    if max_displacement > 0.3 {
        return Err(Error::Calibration(format!(
            "charge tone fails to cancel the flux displacement (residual |<a>| reached {max_displacement:.3})"
        )));
    }
    let state = tr.final_state().clone();
    debug_assert!((tr.times.last().copied().unwrap_or(0.0) - total).abs() < 1e-15);

    let map = wigner(&state, &opts.grid);
    let guess = cubic_guess(opts);
    let fit = fit_state(&map, StateFamily::Cubic, &guess, &FitOptions::for_family(StateFamily::Cubic))?;
    let (fidelity, closest) = closest_cubic(&state, &fit.params)?;
    Ok(CubicResult {
        state,
        wigner: map,
        fit,
        fidelity,
        closest,
        max_displacement,
    })
}

/// Largest fidelity to an ideal cubic state, starting from `guess`.
pub fn closest_cubic(state: &DensityMatrix, guess: &StateSpec) -> Result<(f64, StateSpec)> {
    let mut fopts = FitOptions::for_family(StateFamily::Cubic);
    fopts.dim = state.dim();
    let r = closest_pure_state(state, StateFamily::Cubic, guess, &fopts)?;
    Ok((r.overlap, r.params))
}

// ---------------------------------------------------------- delay calibration

#[derive(Debug, Clone)]
pub struct DelayCalOptions {
    pub envelope: PulseEnvelope,
    /// 1 omega0 flux amplitude; the charge tone matches it.
    pub flux_amplitude: f64,
    /// Hardware latency of the charge line being emulated (s).
    pub injected_offset: f64,
    /// Programmed flux-line delays of the coarse sweep (s).
    pub sweep: Vec<f64>,
    pub grid: PhaseGrid,
}

impl DelayCalOptions {
    pub fn new(injected_offset: f64) -> Self {
        let sweep = (-4..=16).map(|k| k as f64 * 1e-9).collect();
        Self {
            envelope: PulseEnvelope { rise: 5e-9, hold: 30e-9 },
            flux_amplitude: 2e-3,
            injected_offset,
            sweep,
            grid: PhaseGrid::square(41, 3.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayCalResult {
    /// Every evaluated `(delay, cost)` pair, sorted by delay.
    pub curve: Vec<(f64, f64)>,
    pub optimum: f64,
    pub cost_at_optimum: f64,
}

impl DelayCalResult {
    /// Linear interpolation of the sampled cost curve.
    pub fn cost_at(&self, delay: f64) -> Option<f64> {
        self.curve.windows(2).find_map(|w| {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            (x0..=x1).contains(&delay).then(|| {
                if x1 == x0 {
                    y0
                } else {
                    y0 + (y1 - y0) * (delay - x0) / (x1 - x0)
                }
            })
        })
    }
}

/// Normalised mean squared Wigner distance of `rho` to the vacuum.
pub fn vacuum_distance(map: &WignerMap, vacuum: &WignerMap) -> f64 {
    let num: f64 = map
        .values
        .iter()
        .zip(vacuum.values.iter())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    num / vacuum.sum_squares()
}

/// Coefficient of `x` left by normal-ordering the flux drive terms
/// `sum_n g_n^ac x^n`, i.e. the linear drive the vacuum actually feels.
pub fn vacuum_linear_coupling(coeffs: &TaylorCoefficients) -> f64 {
    // :x^n: leaves n (n-2)!! single-x terms for odd n
    let mut total = 0.0;
    let mut pairings = 1.0;
    for n in (1..=coeffs.n_max()).step_by(2) {
        if n > 1 {
            pairings *= (n - 2) as f64;
        }
        total += n as f64 * pairings * coeffs.gac(n);
    }
    total
}

/// Cost for one programmed flux-line delay.
pub fn delay_cost(base: &ProtocolBase, opts: &DelayCalOptions, delay: f64, vacuum: &WignerMap) -> Result<f64> {
    let omega0 = base.omega0();
    let g1 = vacuum_linear_coupling(&base.coeffs);
    let shift = (-delay).max(0.0).max(-opts.injected_offset);
    let flux_start = shift + delay;
    let charge_start = shift + opts.injected_offset;
    let env = opts.envelope;
    let charge_phase = if g1 > 0.0 { PI } else { 0.0 };
    let drives = vec![
        tone(DriveLine::Flux, 1, opts.flux_amplitude, 0.0, flux_start, env, omega0),
        tone(DriveLine::Charge, 1, g1.abs() * opts.flux_amplitude, charge_phase, charge_start, env, omega0),
    ];
    let end = flux_start.max(charge_start) + env.total();
    let tr = base.run(drives, vec![0.0, end])?;
    let rho = tr.final_state();
    debug!("delay {delay:e}: <a> = {:.4e}, <n> = {:.4e}", rho.mean_a(), rho.mean_n());
    Ok(vacuum_distance(&wigner(rho, &opts.grid), vacuum))
}

const REFINE_POINTS: usize = 17;
/// Refinement half-window in coarse sweep steps.
const REFINE_HALF_WIDTH: f64 = 2.0;

/// Sweeps the programmed delay, then refines the minimum with two rounds of
/// least-squares parabolas.
pub fn calibrate_delay(base: &ProtocolBase, opts: &DelayCalOptions) -> Result<DelayCalResult> {
    if opts.sweep.len() < 3 {
        return Err(Error::InvalidParameter("delay sweep needs at least three points".into()));
    }
    let vacuum = wigner(&DensityMatrix::vacuum(base.dim), &opts.grid);
    let eval = |d: f64| delay_cost(base, opts, d, &vacuum).map(|c| (d, c));
    let mut curve: Vec<(f64, f64)> = opts.sweep.par_iter().map(|&d| eval(d)).collect::<Result<_>>()?;
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (lo, hi) = curve
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    if hi - lo < 1e-3 || hi < 10.0 * lo {
        return Err(Error::Calibration(format!(
            "cost curve is flat (min {lo:.3e}, max {hi:.3e}); increase the drive amplitude"
        )));
    }
    let mut centre = curve
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|p| p.0)
        .expect("non-empty sweep");
    let coarse = (opts.sweep.iter().copied().fold(f64::INFINITY, f64::min)
        - opts.sweep.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    .abs()
        / (opts.sweep.len() - 1) as f64;
    // the dip carries a sub-ns ripple, so the vertex comes from a
    // least-squares parabola over a window wider than the ripple, recentred once
    let half = REFINE_HALF_WIDTH * coarse;
    for _ in 0..2 {
        let xs: Vec<f64> = (0..REFINE_POINTS)
            .map(|k| centre - half + 2.0 * half * k as f64 / (REFINE_POINTS - 1) as f64)
            .collect();
        let pts: Vec<(f64, f64)> = xs.par_iter().map(|&d| eval(d)).collect::<Result<_>>()?;
        curve.extend(pts);
        let window: Vec<(f64, f64)> = curve.iter().copied().filter(|p| (p.0 - centre).abs() <= half).collect();
        let v = least_squares_vertex(&window).ok_or_else(|| {
            Error::Calibration(format!("cost curve has no minimum near {:.3} ns", centre * 1e9))
        })?;
        centre = v.clamp(centre - half, centre + half);
        info!("delay refinement: vertex at {centre:e}");
    }
    let (_, cost_at_optimum) = eval(centre)?;
    curve.push((centre, cost_at_optimum));
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(DelayCalResult {
        curve,
        optimum: centre,
        cost_at_optimum,
    })
}

// ----------------------------------------------------------------- error budget

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Dephasing,
    T1,
    Thermal,
    G5G6,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Dephasing, Channel::T1, Channel::Thermal, Channel::G5G6];

    pub fn label(&self) -> &'static str {
        match self {
            Channel::Dephasing => "dephasing",
            Channel::T1 => "t1",
            Channel::Thermal => "thermal",
            Channel::G5G6 => "g5_g6",
        }
    }
}

impl std::str::FromStr for Channel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Channel::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown loss channel '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub removed: Vec<Channel>,
    pub infidelity: f64,
    pub closest: StateSpec,
}

impl BudgetRow {
    pub fn label(&self) -> String {
        if self.removed.is_empty() {
            "nominal".into()
        } else if Channel::ALL.iter().all(|c| self.removed.contains(c)) {
            "all".into()
        } else {
            self.removed.iter().map(|c| c.label()).collect::<Vec<_>>().join("+")
        }
    }
}

/// Base with the listed channels switched off.
pub fn without_channels(base: &ProtocolBase, removed: &[Channel]) -> ProtocolBase {
    let mut out = base.clone();
    if removed.contains(&Channel::G5G6) {
        out.coeffs = out.coeffs.without_static_orders_from(5);
    }
    if let Some(mut n) = out.noise {
        if removed.contains(&Channel::Dephasing) {
            n.t_phi = f64::INFINITY;
        }
        if removed.contains(&Channel::T1) {
            n.t1 = f64::INFINITY;
        }
        if removed.contains(&Channel::Thermal) {
            n.n_th = 0.0;
        }
        let silent = n.t1.is_infinite() && n.t_phi.is_infinite() && n.n_th == 0.0;
        out.noise = if silent { None } else { Some(n) };
    }
    out
}

/// Re-runs the cubic sequence per case (each a set of removed channels) and
/// reports `1 - max fidelity` over the ideal cubic family.
pub fn error_budget(base: &ProtocolBase, opts: &CubicOptions, cases: &[Vec<Channel>]) -> Result<Vec<BudgetRow>> {
    let guess = cubic_guess(opts);
    cases
        .par_iter()
        .map(|removed| {
            let b = without_channels(base, removed);
            let drives = cubic_drives(&b.coeffs, opts);
            let total = opts.squeeze_envelope.total() + opts.cubic_envelope.total();
            let tr = b.run(drives, vec![0.0, total])?;
            let (fidelity, closest) = closest_cubic(tr.final_state(), &guess)?;
            info!("budget case {removed:?}: infidelity {:.4}", 1.0 - fidelity);
            Ok(BudgetRow {
                removed: removed.clone(),
                infidelity: 1.0 - fidelity,
                closest,
            })
        })
        .collect()
}

/// Nominal, each channel alone, thermal with dephasing, and everything.
pub fn standard_budget_cases() -> Vec<Vec<Channel>> {
    let mut cases = vec![vec![]];
    cases.extend(Channel::ALL.iter().map(|c| vec![*c]));
    cases.push(vec![Channel::Thermal, Channel::Dephasing]);
    cases.push(Channel::ALL.to_vec());
    cases
}
