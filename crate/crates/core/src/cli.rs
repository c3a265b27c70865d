//! Command-line surface: one config file, one subcommand, one output
//! directory holding CSV results and `manifest.toml`.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::info;

use crate::circuit::{hamiltonian_coefficients, write_coefficient_csv, TaylorCoefficients};
use crate::config::{CubicSection, RunConfig};
use crate::dynamics::protocols::{
    calibrate_delay, error_budget, out_and_back_sweep, protocol_cubic_state, protocol_generalized_squeezing,
    target_gate_point, CubicOptions, DelayCalOptions, GateKind, GateSweepOptions, OutAndBackOptions, ProtocolBase,
};
use crate::dynamics::{evolve, SimulationConfig};
use crate::effective::{drift_angle, effective_static, find_kerr_free_flux, kerr_at};
use crate::error::{Error, Result};
use crate::fitting::{fit_circuit_params, fit_dephasing, FrequencyDataset, FIT_PARAMETERS};
use crate::quantum::{squeezing_to_db, wigner, PhaseGrid, StateSpec};

const TWO_PI: f64 = 2.0 * PI;
const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Parser)]
#[command(name = "snailkit", version, about = "SNAIL-resonator simulation, fitting and calibration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "SNAILKIT_OUT", default_value = "snailkit-out")]
    pub out: PathBuf,
    /// Overrides `simulation.dim`.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Fit circuit parameters to frequency-vs-voltage data.
    Fit,
    /// Sweep the Taylor coefficients over static flux.
    Coeffs,
    /// Locate the Kerr-free flux.
    KerrFree,
    /// Evolve the configured drive sequence.
    Simulate,
    /// Drift angle of displaced states.
    OutAndBack,
    /// Gate parameter versus flux amplitude.
    SqueezeCal,
    /// Squeeze-then-cubic sequence.
    Cubic,
    /// Inter-line delay calibration.
    DelayCal,
    /// Infidelity with loss channels removed.
    Budget,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Fit,
        Command::Coeffs,
        Command::KerrFree,
        Command::Simulate,
        Command::OutAndBack,
        Command::SqueezeCal,
        Command::Cubic,
        Command::DelayCal,
        Command::Budget,
    ];

    /// Inverse of [`Command::name`].
    pub fn from_name(name: &str) -> Option<Command> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Coeffs => "coeffs",
            Command::KerrFree => "kerr-free",
            Command::Simulate => "simulate",
            Command::OutAndBack => "out-and-back",
            Command::SqueezeCal => "squeeze-cal",
            Command::Cubic => "cubic",
            Command::DelayCal => "delay-cal",
            Command::Budget => "budget",
        }
    }
}

/// Loads, validates, applies overrides, writes the manifest and runs the
/// subcommand. Returns the output files written (manifest first).
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(dim) = cli.dim {
        cfg.simulation.dim = dim;
    }
    if let Some(fit) = cfg.fit.as_mut() {
        let base = path.parent().unwrap_or(Path::new("."));
        fit.data = absolute(base, &fit.data)?;
        if let Some(t2) = fit.t2_data.as_mut() {
            *t2 = absolute(base, t2)?;
        }
    }
    if let Some(n) = cli.threads {
        // ignore the error of a pool that already exists (tests, library use)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    execute(cli.command, cfg, &cli.out)
}

/// Runs a resolved config; the manifest it writes re-runs bit-exactly.
pub fn execute(command: Command, mut cfg: RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    if command != Command::Fit && command != Command::Coeffs {
        cfg.resolve_flux()?;
    }
    check_sections(command, &cfg)?;
    std::fs::create_dir_all(out)?;
    let mut sink = Outputs::new(out);
    let manifest = sink.path(MANIFEST);
    std::fs::write(&manifest, cfg.to_toml_string()?)?;
    info!("{}: manifest at {}", command.name(), manifest.display());
    match command {
        Command::Fit => run_fit(&cfg, &mut sink)?,
        Command::Coeffs => run_coeffs(&cfg, &mut sink)?,
        Command::KerrFree => run_kerr_free(&cfg, &mut sink)?,
        Command::Simulate => run_simulate(&cfg, &mut sink)?,
        Command::OutAndBack => run_out_and_back(&cfg, &mut sink)?,
        Command::SqueezeCal => run_squeeze_cal(&cfg, &mut sink)?,
        Command::Cubic => run_cubic(&cfg, &mut sink)?,
        Command::DelayCal => run_delay_cal(&cfg, &mut sink)?,
        Command::Budget => run_budget(&cfg, &mut sink)?,
    }
    Ok(sink.written)
}

fn absolute(base: &Path, p: &Path) -> Result<PathBuf> {
    let joined = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    joined
        .canonicalize()
        .map_err(|e| Error::Config(format!("cannot resolve {}: {e}", joined.display())))
}

fn check_sections(command: Command, cfg: &RunConfig) -> Result<()> {
    let missing = |s: &str| Err(Error::Config(format!("`{}` needs a [{s}] section", command.name())));
    match command {
        Command::Fit if cfg.fit.is_none() => missing("fit"),
        Command::Fit if cfg.flux_calibration.is_none() => missing("flux_calibration"),
        Command::Simulate if cfg.simulate.is_none() => missing("simulate"),
        Command::OutAndBack if cfg.out_and_back.is_none() => missing("out_and_back"),
        Command::SqueezeCal if cfg.squeeze_cal.is_none() => missing("squeeze_cal"),
        Command::Cubic if cfg.cubic.is_none() => missing("cubic"),
        Command::DelayCal if cfg.delay_cal.is_none() => missing("delay_cal"),
        Command::Budget if cfg.budget.is_none() => missing("budget"),
        Command::Budget if cfg.cubic.is_none() => missing("cubic"),
        Command::Budget if cfg.noise.is_none() => missing("noise"),
        _ => Ok(()),
    }
}

struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            written: vec![dir.join(MANIFEST)],
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let p = self.path(name);
        let f = File::create(&p)?;
        self.written.push(p);
        Ok(BufWriter::new(f))
    }

    fn csv(&mut self, name: &str, header: &[&str]) -> Result<csv::Writer<BufWriter<File>>> {
        let mut w = csv::Writer::from_writer(self.create(name)?);
        w.write_record(header)?;
        Ok(w)
    }
}

fn row<I: IntoIterator<Item = f64>>(w: &mut csv::Writer<BufWriter<File>>, values: I) -> Result<()> {
    w.write_record(values.into_iter().map(|v| v.to_string()))?;
    Ok(())
}

fn coefficients(cfg: &RunConfig) -> Result<TaylorCoefficients> {
    cfg.circuit.coefficients(cfg.kerr_bracket())
}

fn base(cfg: &RunConfig, coeffs: TaylorCoefficients) -> Result<ProtocolBase> {
    let mut b = ProtocolBase::new(coeffs, cfg.simulation.dim).with_noise(cfg.noise_model()?);
    b.solver = cfg.simulation.solver();
    Ok(b)
}

fn mhz(w: f64) -> f64 {
    w / TWO_PI / 1e6
}

// ------------------------------------------------------------------------ fit

fn run_fit(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let fit = cfg.fit.as_ref().expect("checked");
    let data = FrequencyDataset::read_csv(File::open(&fit.data)?)?;
    let guess = cfg.circuit.params();
    let cal = cfg.flux_calibration.expect("checked").calibration();
    let (params, fitted_cal, report) = fit_circuit_params(&data, &guess, &cal)?;
    info!("fit: chi2 {:.4e} after {} iterations", report.chi2, report.iterations);

    let mut fitted = RunConfig {
        circuit: crate::config::CircuitSection {
            n_max: cfg.circuit.n_max,
            ..crate::config::CircuitSection::from_params(&params, cfg.circuit.phi_e_phi0)
        },
        flux_calibration: Some(crate::config::FluxCalibrationSection {
            v0_volt: fitted_cal.v0,
            offset_phi0: fitted_cal.offset,
        }),
        ..cfg.clone()
    };
    fitted.fit = None;
    out.create("fitted.toml")?.write_all(fitted.to_toml_string()?.as_bytes())?;

    let mut w = out.csv("fit_report.csv", &["parameter", "value", "std_error"])?;
    let values = [params.beta, params.omega_inf, params.impedance / params.ej_ghz, fitted_cal.v0, fitted_cal.offset];
    for (k, name) in FIT_PARAMETERS.iter().enumerate() {
        w.write_record([name.to_string(), values[k].to_string(), report.std_errors[k].to_string()])?;
    }
    w.write_record(["chi2".to_string(), report.chi2.to_string(), String::new()])?;
    w.write_record(["reduced_chi2".to_string(), report.reduced_chi2.to_string(), String::new()])?;
    w.flush()?;

    let mut w = out.csv("fit_history.csv", &["iteration", "cost"])?;
    for (k, c) in report.cost_history.iter().enumerate() {
        row(&mut w, [k as f64, *c])?;
    }
    w.flush()?;

    if let Some(t2_path) = &fit.t2_data {
        let noise = cfg
            .noise
            .ok_or_else(|| Error::Config("dephasing fit needs [noise] for t1_us".into()))?;
        let rows = read_t2_csv(t2_path)?;
        let dep = fit_dephasing(&rows, noise.t1_us * 1e-6, |phi| crate::circuit::frequency_slope(phi, &params))?;
        let mut w = out.csv("dephasing.csv", &["phi_e", "t2_us", "t2_model_us"])?;
        for (phi, t2) in &rows {
            let model = crate::fitting::predict_t2(*phi, &dep, &params)?;
            row(&mut w, [*phi, t2 * 1e6, model * 1e6])?;
        }
        w.flush()?;
        let mut w = out.csv("dephasing_params.csv", &["a_oneoverf_phi0sq", "s_bb_phi0sq_per_hz", "t1_us"])?;
        row(&mut w, [dep.a_oneoverf, dep.s_bb, dep.t1 * 1e6])?;
        w.flush()?;
    }
    Ok(())
}

fn read_t2_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Config(format!("{}: missing column '{name}'", path.display())))
    };
    let (ip, it) = (col("phi_e_phi0")?, col("t2_us")?);
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Config(format!("{}: bad number on data row {}", path.display(), i + 1)))
        };
        rows.push((num(ip)?, num(it)? * 1e-6));
    }
    Ok(rows)
}

// ------------------------------------------------------------- coefficients

fn run_coeffs(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let s = cfg.coeffs.unwrap_or_default();
    let p = cfg.circuit.params();
    let n = s.points;
    let rows = (0..n)
        .map(|k| {
            let phi = if n == 1 {
                s.phi_start_phi0
            } else {
                s.phi_start_phi0 + (s.phi_stop_phi0 - s.phi_start_phi0) * k as f64 / (n - 1) as f64
            };
            hamiltonian_coefficients(phi, &p, cfg.circuit.n_max)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut w = out.create("coeffs.csv")?;
    write_coefficient_csv(&mut w, &rows)?;
    w.flush()?;
    Ok(())
}

fn run_kerr_free(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let p = cfg.circuit.params();
    let (a, b) = cfg.kerr_bracket();
    let root = find_kerr_free_flux(&p, (a, b))?;
    let c = hamiltonian_coefficients(root, &p, cfg.circuit.n_max)?;
    let eff = effective_static(&c)?;
    let mut w = out.csv("kerr_free.csv", &["phi_e", "omega0_GHz", "k1_kHz", "g3ac_MHz", "g1ac_over_g3ac"])?;
    row(&mut w, [root, c.omega0 / TWO_PI / 1e9, eff.k1 / TWO_PI / 1e3, mhz(c.gac(3)), c.gac(1) / c.gac(3)])?;
    w.flush()?;
    let mut w = out.csv("kerr_sweep.csv", &["phi_e", "k1_kHz"])?;
    for k in 0..=100 {
        let phi = a + (b - a) * k as f64 / 100.0;
        row(&mut w, [phi, kerr_at(phi, &p)? / TWO_PI / 1e3])?;
    }
    w.flush()?;
    println!("kerr-free flux {root:.6} phi0, omega0/2pi = {:.6} GHz", c.omega0 / TWO_PI / 1e9);
    Ok(())
}

// ---------------------------------------------------------------- simulate

fn run_simulate(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let s = cfg.simulate.as_ref().expect("checked");
    let coeffs = coefficients(cfg)?;
    let omega0 = coeffs.omega0;
    let drives = s
        .drives
        .iter()
        .map(|d| Ok(d.drive(&cfg.simulation)?.with_clock_phase(d.phase_rad, omega0)))
        .collect::<Result<Vec<_>>>()?;
    let t_end = s.duration_ns * 1e-9;
    let mut sim = SimulationConfig::new(coeffs, cfg.simulation.dim, t_end).with_uniform_grid(t_end, s.samples);
    for t in &s.wigner_times_ns {
        if !(0.0..=s.duration_ns).contains(t) {
            return Err(Error::Config(format!("simulate.wigner_times_ns: {t} lies outside [0, duration_ns]")));
        }
        sim.t_grid.push(t * 1e-9);
    }
    sim.t_grid.sort_by(f64::total_cmp);
    sim.t_grid.dedup();
    sim.drives = drives;
    sim.noise = cfg.noise_model()?;
    sim.initial = s.initial;
    sim.solver = cfg.simulation.solver();
    let tr = evolve(&sim)?;
    let mut w = out.create("trajectory.csv")?;
    tr.write_csv(&mut w)?;
    w.flush()?;
    let grid = cfg.simulation.grid();
    for t in &s.wigner_times_ns {
        let k = tr
            .times
            .iter()
            .position(|x| *x == t * 1e-9)
            .expect("sample time was inserted into the grid");
        let mut w = out.create(&format!("wigner_t{t}ns.csv"))?;
        wigner(&tr.states[k], &grid).write_csv(&mut w)?;
        w.flush()?;
    }
    let mut w = out.create("state_final.csv")?;
    tr.final_state().write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

// ------------------------------------------------------------ out-and-back

fn run_out_and_back(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let s = cfg.out_and_back.as_ref().expect("checked");
    let p = cfg.circuit.params();
    let fluxes = if s.phi_e_phi0.is_empty() {
        vec![cfg.circuit.phi_e_phi0.expect("resolved")]
    } else {
        s.phi_e_phi0.clone()
    };
    let opts = OutAndBackOptions {
        pulse: cfg.simulation.envelope(s.pulse_ns)?,
        free_time: s.free_ns * 1e-9,
        scan_points: s.scan_points,
    };
    let mut w = out.csv(
        "out_and_back.csv",
        &["phi_e", "a_mag", "theta_rad", "theta_formula_rad", "overlap", "xi_MHz"],
    )?;
    for phi in fluxes {
        let coeffs = hamiltonian_coefficients(phi, &p, cfg.circuit.n_max)?;
        let eff = effective_static(&coeffs)?;
        let b = base(cfg, coeffs)?;
        for pt in out_and_back_sweep(&b, &opts, &s.a_mag)? {
            let formula = wrap(drift_angle(pt.a_mag, opts.free_time, &eff, None));
            row(&mut w, [phi, pt.a_mag, pt.theta, formula, pt.overlap, mhz(pt.xi)])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn wrap(theta: f64) -> f64 {
    (theta + PI).rem_euclid(TWO_PI) - PI
}

// -------------------------------------------------------- squeeze calibration

fn run_squeeze_cal(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let s = cfg.squeeze_cal.as_ref().expect("checked");
    let b = base(cfg, coefficients(cfg)?)?;
    let mut opts = GateSweepOptions::new(cfg.simulation.envelope(s.pulse_ns)?);
    opts.angle = s.angle_rad;
    opts.grid = cfg.simulation.grid();
    let cal = protocol_generalized_squeezing(&b, s.kind, &opts, &s.amplitudes_phi0)?;
    let header = ["amplitude_phi0", "re_param", "im_param", "along", "overlap", "fidelity", "min_wigner"];
    let mut w = out.csv("squeeze_cal.csv", &header)?;
    for pt in &cal.points {
        row(&mut w, [pt.amplitude, pt.param.re, pt.param.im, pt.along, pt.overlap, pt.fidelity, pt.min_wigner])?;
    }
    w.flush()?;
    let mut w = out.csv("squeeze_cal_summary.csv", &["gate_time_ns", "slope_MHz", "predicted_MHz", "scale"])?;
    row(&mut w, [cal.gate_time * 1e9, mhz(cal.slope), mhz(cal.predicted), cal.scale()])?;
    w.flush()?;
    if let Some(target) = s.target {
        let (pt, rho) = target_gate_point(&b, s.kind, &opts, &cal, target)?;
        let mut w = out.csv("squeeze_target.csv", &[&header[..], &["db"]].concat())?;
        let db = if s.kind == GateKind::Squeezing { squeezing_to_db(pt.param.norm()) } else { f64::NAN };
        row(&mut w, [pt.amplitude, pt.param.re, pt.param.im, pt.along, pt.overlap, pt.fidelity, pt.min_wigner, db])?;
        w.flush()?;
        let mut w = out.create("wigner_target.csv")?;
        wigner(&rho, &opts.grid).write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

// ------------------------------------------------------------------- cubic

/// Cubic options with slopes from noiseless calibration sweeps when asked.
pub fn cubic_options(cfg: &RunConfig, coeffs: &TaylorCoefficients, c: &CubicSection) -> Result<CubicOptions> {
    let mut opts = CubicOptions::leading_order(coeffs, c.zeta, c.gamma);
    opts.squeeze_envelope = cfg.simulation.envelope(c.squeeze_ns)?;
    opts.cubic_envelope = cfg.simulation.envelope(c.cubic_ns)?;
    opts.grid = cfg.simulation.grid();
    if c.calibrate {
        let mut clean = base(cfg, coeffs.clone())?;
        clean.noise = None;
        let sq = GateSweepOptions::new(opts.squeeze_envelope);
        opts.squeeze_slope = protocol_generalized_squeezing(&clean, GateKind::Squeezing, &sq, &c.squeeze_cal_phi0)?.slope;
        let tri = GateSweepOptions::new(cfg.simulation.envelope(c.trisqueeze_cal_ns)?);
        opts.cubic_rate = protocol_generalized_squeezing(&clean, GateKind::Trisqueezing, &tri, &c.trisqueeze_cal_phi0)?.slope;
        info!(
            "cubic: calibrated slopes {:.4e} (squeeze), {:.4e} (trisqueeze) rad/s",
            opts.squeeze_slope, opts.cubic_rate
        );
    }
    Ok(opts)
}

fn run_cubic(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let c = cfg.cubic.as_ref().expect("checked");
    let coeffs = coefficients(cfg)?;
    let opts = cubic_options(cfg, &coeffs, c)?;
    let b = base(cfg, coeffs)?;
    let r = protocol_cubic_state(&b, &opts)?;
    let (eps_sq, eps_c) = opts.amplitudes();
    let mut w = out.csv(
        "cubic.csv",
        &[
            "zeta_re", "zeta_im", "gamma", "alpha_re", "alpha_im", "theta", "overlap", "fidelity", "closest_zeta_re",
            "closest_zeta_im", "closest_gamma", "max_displacement", "squeeze_amp_phi0", "cubic_amp_phi0",
        ],
    )?;
    let fit = cubic_parts(&r.fit.params);
    let closest = cubic_parts(&r.closest);
    row(
        &mut w,
        [
            fit[0], fit[1], fit[2], fit[3], fit[4], fit[5], r.fit.overlap, r.fidelity, closest[0], closest[1],
            closest[2], r.max_displacement, eps_sq, eps_c,
        ],
    )?;
    w.flush()?;
    let mut w = out.create("wigner_cubic.csv")?;
    r.wigner.write_csv(&mut w)?;
    w.flush()?;
    let mut w = out.create("state_cubic.csv")?;
    r.state.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn cubic_parts(spec: &StateSpec) -> [f64; 6] {
    match *spec {
        StateSpec::Cubic {
            zeta,
            gamma,
            alpha,
            theta,
        } => [zeta.re, zeta.im, gamma, alpha.re, alpha.im, theta],
        _ => [f64::NAN; 6],
    }
}

// ----------------------------------------------------------------- delay

fn run_delay_cal(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let s = cfg.delay_cal.as_ref().expect("checked");
    let b = base(cfg, coefficients(cfg)?)?;
    let mut opts = DelayCalOptions::new(s.injected_offset_ns * 1e-9);
    opts.envelope = cfg.simulation.envelope(s.pulse_ns)?;
    opts.flux_amplitude = s.flux_amplitude_phi0;
    opts.sweep = s.sweep_ns.iter().map(|t| t * 1e-9).collect();
    opts.grid = PhaseGrid::square(s.grid_points, cfg.simulation.wigner_extent);
    let r = calibrate_delay(&b, &opts)?;
    let mut w = out.csv("delay_cal.csv", &["delay_ns", "cost"])?;
    for (t, c) in &r.curve {
        row(&mut w, [t * 1e9, *c])?;
    }
    w.flush()?;
    let mut w = out.csv("delay_cal_optimum.csv", &["optimum_ns", "cost", "injected_ns"])?;
    row(&mut w, [r.optimum * 1e9, r.cost_at_optimum, s.injected_offset_ns])?;
    w.flush()?;
    println!("delay optimum {:.3} ns", r.optimum * 1e9);
    Ok(())
}

// ---------------------------------------------------------------- budget

fn run_budget(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let c = cfg.cubic.as_ref().expect("checked");
    let cases = &cfg.budget.as_ref().expect("checked").cases;
    let coeffs = coefficients(cfg)?;
    let opts = cubic_options(cfg, &coeffs, c)?;
    let b = base(cfg, coeffs)?;
    let rows = error_budget(&b, &opts, cases)?;
    let mut w = out.csv("budget.csv", &["removed", "infidelity", "zeta_re", "zeta_im", "gamma"])?;
    for r in &rows {
        let p = cubic_parts(&r.closest);
        w.write_record([
            r.label(),
            r.infidelity.to_string(),
            p[0].to_string(),
            p[1].to_string(),
            p[2].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
