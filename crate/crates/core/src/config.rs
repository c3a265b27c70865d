//! TOML run configuration. Every physical quantity carries its unit in the
//! key name; unknown keys are rejected.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{hamiltonian_coefficients, CircuitParams, TaylorCoefficients, DEFAULT_N_MAX};
use crate::dynamics::protocols::{Channel, GateKind};
use crate::dynamics::{DriveLine, DriveSpec, NoiseModel, PulseEnvelope, SolverOptions};
use crate::effective::find_kerr_free_flux;
use crate::error::{Error, Result};
use crate::fitting::FluxCalibration;
use crate::quantum::{PhaseGrid, StateSpec};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    pub beta: f64,
    pub ej_ghz: f64,
    #[serde(default = "default_junctions")]
    pub n_junctions: u32,
    pub omega_inf_ghz: f64,
    pub impedance_ohm: f64,
    /// Static flux for simulations; the Kerr-free flux when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_e_phi0: Option<f64>,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

fn default_junctions() -> u32 {
    3
}

fn default_n_max() -> usize {
    DEFAULT_N_MAX
}

impl CircuitSection {
    pub fn params(&self) -> CircuitParams {
        CircuitParams {
            beta: self.beta,
            ej_ghz: self.ej_ghz,
            n_junctions: self.n_junctions,
            omega_inf: TWO_PI * self.omega_inf_ghz * 1e9,
            impedance: self.impedance_ohm,
        }
    }

    pub fn from_params(p: &CircuitParams, phi_e: Option<f64>) -> Self {
        Self {
            beta: p.beta,
            ej_ghz: p.ej_ghz,
            n_junctions: p.n_junctions,
            omega_inf_ghz: p.omega_inf / TWO_PI / 1e9,
            impedance_ohm: p.impedance,
            phi_e_phi0: phi_e,
            n_max: DEFAULT_N_MAX,
        }
    }

    /// Coefficients at the configured flux.
    pub fn coefficients(&self, kerr_bracket: (f64, f64)) -> Result<TaylorCoefficients> {
        let p = self.params();
        let phi = match self.phi_e_phi0 {
            Some(phi) => phi,
            None => find_kerr_free_flux(&p, kerr_bracket)?,
        };
        hamiltonian_coefficients(phi, &p, self.n_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxCalibrationSection {
    pub v0_volt: f64,
    #[serde(default)]
    pub offset_phi0: f64,
}

impl FluxCalibrationSection {
    pub fn calibration(&self) -> FluxCalibration {
        FluxCalibration {
            v0: self.v0_volt,
            offset: self.offset_phi0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub t1_us: f64,
    pub t2_star_us: f64,
    #[serde(default)]
    pub n_th: f64,
}

impl NoiseSection {
    pub fn model(&self) -> Result<NoiseModel> {
        if !(self.t1_us > 0.0) {
            return Err(Error::Config(format!("noise.t1_us: t1 > 0 required (got {})", self.t1_us)));
        }
        if !(self.t2_star_us > 0.0) {
            return Err(Error::Config(format!(
                "noise.t2_star_us: t2* > 0 required (got {})",
                self.t2_star_us
            )));
        }
        NoiseModel::from_t2_star(self.t1_us * 1e-6, self.t2_star_us * 1e-6, self.n_th)
            .map_err(|e| Error::Config(format!("noise: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step_ps: Option<f64>,
    /// Raised-cosine ramp of every pulse.
    #[serde(default = "default_rise")]
    pub rise_ns: f64,
    #[serde(default = "default_grid_points")]
    pub wigner_points: usize,
    #[serde(default = "default_extent")]
    pub wigner_extent: f64,
}

fn default_dim() -> usize {
    40
}
fn default_rtol() -> f64 {
    1e-8
}
fn default_atol() -> f64 {
    1e-10
}
fn default_rise() -> f64 {
    5.0
}
fn default_grid_points() -> usize {
    81
}
fn default_extent() -> f64 {
    3.5
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            dim: default_dim(),
            rtol: default_rtol(),
            atol: default_atol(),
            max_step_ps: None,
            rise_ns: default_rise(),
            wigner_points: default_grid_points(),
            wigner_extent: default_extent(),
        }
    }
}

impl SimulationSection {
    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            rtol: self.rtol,
            atol: self.atol,
            max_step: self.max_step_ps.map(|p| p * 1e-12),
        }
    }

    pub fn grid(&self) -> PhaseGrid {
        PhaseGrid::square(self.wigner_points, self.wigner_extent)
    }

    /// Envelope of `total_ns` with the configured ramps.
    pub fn envelope(&self, total_ns: f64) -> Result<PulseEnvelope> {
        PulseEnvelope::with_total(total_ns * 1e-9, self.rise_ns * 1e-9)
            .map_err(|e| Error::Config(format!("pulse of {total_ns} ns with {} ns ramps: {e}", self.rise_ns)))
    }

    fn validate(&self) -> Result<()> {
        if self.dim < 4 {
            return Err(Error::Config(format!("simulation.dim >= 4 required (got {})", self.dim)));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::Config("simulation.rtol and atol must be > 0".into()));
        }
        if self.wigner_points < 2 || !(self.wigner_extent > 0.0) {
            return Err(Error::Config("simulation.wigner_points >= 2 and wigner_extent > 0 required".into()));
        }
        if !(self.rise_ns >= 0.0) {
            return Err(Error::Config("simulation.rise_ns >= 0 required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// CSV with `voltage_v,freq_ghz[,sigma_mhz]`.
    pub data: PathBuf,
    /// Optional CSV with `phi_e_phi0,t2_us` for the dephasing model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_data: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffsSection {
    pub phi_start_phi0: f64,
    pub phi_stop_phi0: f64,
    pub points: usize,
}

impl Default for CoeffsSection {
    fn default() -> Self {
        Self {
            phi_start_phi0: 0.0,
            phi_stop_phi0: 0.5,
            points: 501,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KerrFreeSection {
    pub bracket_phi0: [f64; 2],
}

impl Default for KerrFreeSection {
    fn default() -> Self {
        Self { bracket_phi0: [0.3, 0.45] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub line: DriveLine,
    pub harmonic: u32,
    /// Flux drives only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_phi0: Option<f64>,
    /// Charge drives only, `xi / 2 pi`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_mhz: Option<f64>,
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default)]
    pub delay_ns: f64,
    pub duration_ns: f64,
}

impl DriveSection {
    pub fn drive(&self, sim: &SimulationSection) -> Result<DriveSpec> {
        let amplitude = match (self.line, self.amplitude_phi0, self.xi_mhz) {
            (DriveLine::Flux, Some(a), None) => a,
            (DriveLine::Charge, None, Some(x)) => TWO_PI * x * 1e6,
            (DriveLine::Flux, _, _) => {
                return Err(Error::Config("flux drives take amplitude_phi0 (and no xi_mhz)".into()));
            }
            (DriveLine::Charge, _, _) => {
                return Err(Error::Config("charge drives take xi_mhz (and no amplitude_phi0)".into()));
            }
        };
        let d = DriveSpec {
            line: self.line,
            harmonic: self.harmonic,
            amplitude,
            phase: self.phase_rad,
            delay: self.delay_ns * 1e-9,
            envelope: sim.envelope(self.duration_ns)?,
        };
        d.validate().map_err(|e| Error::Config(format!("drive: {e}")))?;
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub duration_ns: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_initial")]
    pub initial: StateSpec,
    #[serde(default)]
    pub drives: Vec<DriveSection>,
    /// Sample times at which Wigner maps are written.
    #[serde(default)]
    pub wigner_times_ns: Vec<f64>,
}

fn default_samples() -> usize {
    101
}

fn default_initial() -> StateSpec {
    StateSpec::Vacuum
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutAndBackSection {
    /// Flux points; the configured circuit flux when empty.
    #[serde(default)]
    pub phi_e_phi0: Vec<f64>,
    pub a_mag: Vec<f64>,
    #[serde(default = "default_oab_pulse")]
    pub pulse_ns: f64,
    #[serde(default = "default_free")]
    pub free_ns: f64,
    #[serde(default = "default_scan")]
    pub scan_points: usize,
}

fn default_oab_pulse() -> f64 {
    10.0
}
fn default_free() -> f64 {
    100.0
}
fn default_scan() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqueezeCalSection {
    pub kind: GateKind,
    pub pulse_ns: f64,
    pub amplitudes_phi0: Vec<f64>,
    /// Optional gate parameter magnitude to hit with the fitted slope.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(default)]
    pub angle_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubicSection {
    pub zeta: f64,
    pub gamma: f64,
    #[serde(default = "default_squeeze_ns")]
    pub squeeze_ns: f64,
    #[serde(default = "default_cubic_ns")]
    pub cubic_ns: f64,
    /// Calibrate the 2 and 3 omega0 amplitudes by simulated sweeps; the
    /// leading-order rates are used otherwise.
    #[serde(default = "default_true")]
    pub calibrate: bool,
    #[serde(default = "default_sq_cal")]
    pub squeeze_cal_phi0: Vec<f64>,
    #[serde(default = "default_tri_cal")]
    pub trisqueeze_cal_phi0: Vec<f64>,
    /// Pulse length of the trisqueezing calibration sweep.
    #[serde(default = "default_tri_ns")]
    pub trisqueeze_cal_ns: f64,
}

fn default_squeeze_ns() -> f64 {
    20.0
}
fn default_cubic_ns() -> f64 {
    40.0
}
fn default_true() -> bool {
    true
}
fn default_sq_cal() -> Vec<f64> {
    vec![0.002, 0.004, 0.006]
}
fn default_tri_cal() -> Vec<f64> {
    vec![0.004, 0.008]
}
fn default_tri_ns() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayCalSection {
    pub injected_offset_ns: f64,
    pub sweep_ns: Vec<f64>,
    #[serde(default = "default_delay_pulse")]
    pub pulse_ns: f64,
    #[serde(default = "default_delay_amp")]
    pub flux_amplitude_phi0: f64,
    #[serde(default = "default_delay_grid")]
    pub grid_points: usize,
}

fn default_delay_pulse() -> f64 {
    40.0
}
fn default_delay_amp() -> f64 {
    2e-3
}
fn default_delay_grid() -> usize {
    41
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    /// Each case lists removed channels; an empty list is the nominal run.
    pub cases: Vec<Vec<Channel>>,
}

/// One file drives any subcommand; only the sections it needs must exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub circuit: CircuitSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flux_calibration: Option<FluxCalibrationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<CoeffsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kerr_free: Option<KerrFreeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_and_back: Option<OutAndBackSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub squeeze_cal: Option<SqueezeCalSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cubic: Option<CubicSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_cal: Option<DelayCalSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<BudgetSection>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialise config: {e}")))
    }

    /// Checks every present block against its module invariants.
    pub fn validate(&self) -> Result<()> {
        self.circuit
            .params()
            .validate()
            .map_err(|e| Error::Config(format!("circuit: {e}")))?;
        if self.circuit.n_max < 4 || self.circuit.n_max > crate::dynamics::MAX_ORDER {
            return Err(Error::Config(format!(
                "circuit.n_max must lie in 4..=6 (got {})",
                self.circuit.n_max
            )));
        }
        if let Some(c) = &self.flux_calibration {
            c.calibration()
                .validate()
                .map_err(|e| Error::Config(format!("flux_calibration: {e}")))?;
        }
        if let Some(n) = &self.noise {
            n.model()?;
        }
        self.simulation.validate()?;
        if let Some(c) = &self.coeffs {
            if c.points < 1 {
                return Err(Error::Config("coeffs.points >= 1 required".into()));
            }
        }
        if let Some(s) = &self.simulate {
            if !(s.duration_ns > 0.0) || s.samples < 2 {
                return Err(Error::Config("simulate.duration_ns > 0 and samples >= 2 required".into()));
            }
            for d in &s.drives {
                d.drive(&self.simulation)?;
            }
        }
        if let Some(o) = &self.out_and_back {
            if o.a_mag.iter().any(|a| !(*a > 0.0)) || o.a_mag.is_empty() {
                return Err(Error::Config("out_and_back.a_mag: non-empty list of values > 0 required".into()));
            }
        }
        if let Some(s) = &self.squeeze_cal {
            if s.amplitudes_phi0.iter().any(|a| !(*a >= 0.0)) || s.amplitudes_phi0.is_empty() {
                return Err(Error::Config("squeeze_cal.amplitudes_phi0: non-empty list of values >= 0 required".into()));
            }
        }
        if let Some(d) = &self.delay_cal {
            if d.sweep_ns.len() < 3 {
                return Err(Error::Config("delay_cal.sweep_ns needs at least three delays".into()));
            }
        }
        Ok(())
    }

    pub fn noise_model(&self) -> Result<Option<NoiseModel>> {
        self.noise.as_ref().map(|n| n.model()).transpose()
    }

    pub fn kerr_bracket(&self) -> (f64, f64) {
        let b = self.kerr_free.unwrap_or_default().bracket_phi0;
        (b[0], b[1])
    }

    /// Pins an absent static flux to the Kerr-free point so the manifest
    /// records the value actually used.
    pub fn resolve_flux(&mut self) -> Result<f64> {
        let phi = match self.circuit.phi_e_phi0 {
            Some(phi) => phi,
            None => find_kerr_free_flux(&self.circuit.params(), self.kerr_bracket())?,
        };
        self.circuit.phi_e_phi0 = Some(phi);
        Ok(phi)
    }
}

/// `(re, im)` pair, for readable CSV headers.
pub fn split(z: Complex64) -> (f64, f64) {
    (z.re, z.im)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[circuit]
beta = 0.097
ej_ghz = 245.0
omega_inf_ghz = 8.99
impedance_ohm = 57.94
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.circuit.n_junctions, 3);
        assert_eq!(cfg.simulation.dim, 40);
        let p = cfg.circuit.params();
        let r = CircuitParams::reference_device();
        assert_eq!(p.beta, r.beta);
        approx::assert_relative_eq!(p.omega_inf, r.omega_inf, max_relative = 1e-15);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\ncolour = 3\n");
        let err = RunConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("colour"), "{err}");
    }

    #[test]
    fn negative_t1_names_the_invariant() {
        let text = format!("{MINIMAL}\n[noise]\nt1_us = -1.0\nt2_star_us = 2.8\n");
        let err = RunConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("t1 > 0"), "{err}");
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = RunConfig::from_toml_str("[circuit]\nbeta = = 1\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn round_trip_is_exact() {
        let text = format!(
            "{MINIMAL}\n[noise]\nt1_us = 28.0\nt2_star_us = 2.8\nn_th = 0.024\n\
             [simulate]\nduration_ns = 50.0\ninitial = {{ family = \"coherent\", alpha = [0.5, -0.25] }}\n\
             [[simulate.drives]]\nline = \"charge\"\nharmonic = 1\nxi_mhz = 12.5\nduration_ns = 10.0\n\
             [budget]\ncases = [[], [\"dephasing\"], [\"thermal\", \"g5_g6\"]]\n"
        );
        let mut cfg = RunConfig::from_toml_str(&text).unwrap();
        cfg.resolve_flux().unwrap();
        let back = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn drive_amplitude_must_match_line() {
        let d = DriveSection {
            line: DriveLine::Flux,
            harmonic: 2,
            amplitude_phi0: None,
            xi_mhz: Some(1.0),
            phase_rad: 0.0,
            delay_ns: 0.0,
            duration_ns: 20.0,
        };
        assert!(d.drive(&SimulationSection::default()).is_err());
    }
}
