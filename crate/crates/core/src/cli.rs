//! `hybridqed <subcommand> --config <file>` front end.
//!
//! Each subcommand writes `<name>.csv` and `<name>.json` into `--out`. The
//! JSON embeds the fully resolved configuration, both as a structure and
//! as config text that re-runs the job.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Experiment, RunConfig, SweepVariable};
use crate::device::{solve_phi_sq_for_frequency, transmon_frequency, FluxBias};
use crate::dynamics::{run_chevron, shape_flux_pulse};
use crate::error::{Error, Result};
use crate::estimate::{
    extract_dips, fit_damped_oscillation, fit_device, find_dips, synthetic_observations, FitProblem, FreeParameter,
    Observation, DEFAULT_DIP_PROMINENCE,
};
use crate::hamiltonian::{assemble, resolve_device, BareModel, TransmonCache};
use crate::operators::{OperatorMatrix, SpaceLayout};
use crate::output::{format_float, write_json, CsvTable};
use crate::spectra::{
    find_avoided_crossing, find_avoided_crossing_within, multiplexed_response, reflection_s11, spectrum_point,
    sweep_spectrum, tune_transmon_to_array, vacuum_rabi_trace, ReflectionSpec, Resonator, SweepAxis,
};

/// Exit status for malformed configuration or command lines.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for numerical failures.
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hybridqed", version, about = "Hybrid DQD-transmon-resonator simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigen-spectrum sweep with optional avoided-crossing search.
    Spectrum(RunArgs),
    /// Vacuum Rabi reflection trace with a two-Lorentzian fit.
    Rabi(RunArgs),
    /// Reflection of both resonators and the multiplexed trace.
    S11(RunArgs),
    /// Population-transfer map over pulse amplitude and plateau length.
    Chevron(RunArgs),
    /// Least-squares fit of device constants to transition frequencies.
    Fit(RunArgs),
}

impl Command {
    pub fn experiment(&self) -> Experiment {
        match self {
            Command::Spectrum(_) => Experiment::Spectrum,
            Command::Rabi(_) => Experiment::Rabi,
            Command::S11(_) => Experiment::S11,
            Command::Chevron(_) => Experiment::Chevron,
            Command::Fit(_) => Experiment::Fit,
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Spectrum(a) | Command::Rabi(a) | Command::S11(a) | Command::Chevron(a) | Command::Fit(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads for parallel sweeps.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Progress on stderr and extra trace files.
    #[arg(long)]
    pub verbose: bool,
}

/// Output directory and verbosity of one run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub verbose: bool,
}

/// Files written by a run and its JSON summary.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_NUMERIC
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(report) => {
            for f in &report.files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(command: &Command) -> Result<RunReport> {
    let a = command.args();
    let cfg = RunConfig::from_file(&a.config)?;
    if cfg.experiment != command.experiment() {
        return Err(Error::config(
            0,
            format!("config is for '{}' but subcommand is '{}'", cfg.experiment.name(), command.experiment().name()),
        ));
    }
    let threads = match a.threads {
        Some(0) => return Err(Error::config(0, "--threads must be >= 1")),
        Some(n) => n,
        None => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(0, format!("thread pool: {e}")))?;
    let opts = RunOptions { out: a.out.clone(), verbose: a.verbose };
    pool.install(|| run(&cfg, &opts))
}

/// Run the experiment named in `cfg`.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunReport> {
    std::fs::create_dir_all(&opts.out)?;
    match cfg.experiment {
        Experiment::Spectrum => cmd_spectrum(cfg, opts),
        Experiment::Rabi => cmd_rabi(cfg, opts),
        Experiment::S11 => cmd_s11(cfg, opts),
        Experiment::Chevron => cmd_chevron(cfg, opts),
        Experiment::Fit => cmd_fit(cfg, opts),
    }
}

fn log(opts: &RunOptions, msg: impl AsRef<str>) {
    if opts.verbose {
        eprintln!("[hybridqed] {}", msg.as_ref());
    }
}

fn layout(cfg: &RunConfig) -> Result<SpaceLayout> {
    SpaceLayout::canonical(cfg.layout.n_tr, cfg.layout.n_sq, cfg.layout.n_50)
}

fn finish(cfg: &RunConfig, opts: &RunOptions, csv: &CsvTable, results: Value, extra: Vec<PathBuf>) -> Result<RunReport> {
    let csv_path = opts.out.join(format!("{}.csv", cfg.name));
    let json_path = opts.out.join(format!("{}.json", cfg.name));
    csv.write(&csv_path)?;
    let summary = json!({
        "experiment": cfg.experiment.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "parameters": cfg,
        "config_text": cfg.render(),
        "results": results,
    });
    write_json(&json_path, &summary)?;
    let mut files = vec![csv_path, json_path];
    files.extend(extra);
    Ok(RunReport { files, summary })
}

/// Flux bias of a device-based run after solving the requested resonances.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResolvedBias {
    pub bias: FluxBias,
    /// Transmon–array gap at the tuned bias (MHz).
    pub tuned_gap_mhz: Option<f64>,
}

pub fn resolve_bias(cfg: &RunConfig, cache: &TransmonCache) -> Result<ResolvedBias> {
    let b = &cfg.bias;
    let mut bias = FluxBias::new(b.phi_sq, b.phi_tr);
    let Some(f) = b.array_frequency else {
        return Ok(ResolvedBias { bias, tuned_gap_mhz: None });
    };
    if b.transmon_resonant {
        let t = tune_transmon_to_array(&cfg.device, f, &layout(cfg)?, b.tune_half_window, b.tune_points, cache)?;
        return Ok(ResolvedBias { bias: t.bias, tuned_gap_mhz: Some(t.crossing.gap_mhz) });
    }
    bias.phi_sq = solve_phi_sq_for_frequency(&cfg.device.squid, f)?;
    Ok(ResolvedBias { bias, tuned_gap_mhz: None })
}

/// Bare model at the configured operating point or device bias.
pub fn point_model(cfg: &RunConfig, cache: &TransmonCache) -> Result<(BareModel, Option<ResolvedBias>)> {
    match &cfg.operating_point {
        Some((_, p)) => Ok((p.resolve(cache)?, None)),
        None => {
            let rb = resolve_bias(cfg, cache)?;
            Ok((resolve_device(&cfg.device, &rb.bias, &cfg.device.dqd, cache)?, Some(rb)))
        }
    }
}

fn model_summary(m: &BareModel) -> Value {
    json!({
        "omega_dqd_ghz": m.omega_dqd,
        "omega_r_sq_ghz": m.omega_r_sq,
        "omega_r_50_ghz": m.omega_r_50,
        "omega_tr_ghz": m.omega_tr(),
        "g_dqd_sq_ghz": m.g_dqd_sq,
        "g_tr_sq_ghz": m.g_tr_sq,
        "g_tr_50_ghz": m.g_tr_50,
    })
}

pub fn cmd_spectrum(cfg: &RunConfig, opts: &RunOptions) -> Result<RunReport> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| Error::config(0, "missing [sweep]"))?;
    let layout = layout(cfg)?;
    let cache = TransmonCache::global();
    let axis = SweepAxis::new(sw.axis.name(), sw.grid.values()?)?;
    log(opts, format!("sweeping {} over {} points", axis.name, axis.values.len()));
    let (sweep, bias) = match &cfg.operating_point {
        Some((_, op)) => {
            let op = *op;
            let build = |x: f64| -> Result<OperatorMatrix> {
                let p = match sw.axis {
                    SweepVariable::Delta => op.with_delta(x),
                    SweepVariable::PhiTr => op.with_phi_tr_offset(x),
                    SweepVariable::PhiSq => return Err(Error::InvalidArgument("phi_sq sweep needs a device".into())),
                };
                Ok(assemble(&p.resolve(cache)?, &layout)?.h)
            };
            (sweep_spectrum(&axis, sw.transitions, build)?, None)
        }
        None => {
            let rb = resolve_bias(cfg, cache)?;
            let build = |x: f64| -> Result<OperatorMatrix> {
                let (mut b, mut dqd) = (rb.bias, cfg.device.dqd);
                match sw.axis {
                    SweepVariable::Delta => dqd.delta = x,
                    SweepVariable::PhiTr => b.phi_tr = x,
                    SweepVariable::PhiSq => b.phi_sq = x,
                }
                Ok(assemble(&resolve_device(&cfg.device, &b, &dqd, cache)?, &layout)?.h)
            };
            (sweep_spectrum(&axis, sw.transitions, build)?, Some(rb))
        }
    };
    if sweep.failures() == sweep.points.len() {
        let msg = sweep.points.iter().find_map(|p| p.error.clone()).unwrap_or_default();
        return Err(Error::Convergence(format!("every sweep point failed: {msg}")));
    }
    let crossing = match sw.crossing {
        None => None,
        Some((a, b)) => Some(match sw.window {
            Some((lo, hi)) => find_avoided_crossing_within(&sweep, a, b, lo, hi)?,
            None => find_avoided_crossing(&sweep, a, b)?,
        }),
    };
    if let Some(c) = &crossing {
        log(opts, format!("gap {:.3} MHz at {} = {:.5}", c.gap_mhz, sw.axis.name(), c.location));
    }
    let failures: Vec<Value> = sweep
        .points
        .iter()
        .filter_map(|p| p.error.as_ref().map(|e| json!({"axis_value": p.axis_value, "error": e})))
        .collect();
    let results = json!({ "crossing": crossing, "bias": bias, "failures": failures });
    finish(cfg, opts, &sweep.to_csv(), results, Vec::new())
}

fn reflection_spec(cfg: &RunConfig) -> Result<ReflectionSpec> {
    let p = cfg.probe.as_ref().ok_or_else(|| Error::config(0, "missing [probe]"))?;
    let spec = ReflectionSpec { probe_grid: p.grid.values()?, squid: p.squid, cpw: p.cpw, multiplex_phase: p.multiplex_phase };
    spec.validate()?;
    Ok(spec)
}

pub fn cmd_rabi(cfg: &RunConfig, opts: &RunOptions) -> Result<RunReport> {
    let probe = cfg.probe.as_ref().ok_or_else(|| Error::config(0, "missing [probe]"))?;
    let spec = reflection_spec(cfg)?;
    let cache = TransmonCache::global();
    let (model, bias) = point_model(cfg, cache)?;
    let sys = assemble(&model, &layout(cfg)?)?;
    let trace = vacuum_rabi_trace(&sys.h, &spec, probe.resonator, probe.transitions)?;
    log(opts, format!("splitting {:.3} MHz (resolved: {})", 1e3 * trace.splitting, trace.resolved));
    let mut csv = CsvTable::new(["probe_ghz", "s11_mag", "fit_mag"]);
    for (&f, &m) in trace.probe.iter().zip(&trace.magnitude) {
        csv.push_floats(&[f, m, trace.fit.evaluate(f)]);
    }
    let results = json!({
        "splitting_mhz": 1e3 * trace.splitting,
        "linewidth_mhz": 1e3 * trace.linewidth,
        "resolved": trace.resolved,
        "fit": trace.fit,
        "model": model_summary(&model),
        "bias": bias,
    });
    finish(cfg, opts, &csv, results, Vec::new())
}

pub fn cmd_s11(cfg: &RunConfig, opts: &RunOptions) -> Result<RunReport> {
    let probe = cfg.probe.as_ref().ok_or_else(|| Error::config(0, "missing [probe]"))?;
    let spec = reflection_spec(cfg)?;
    let cache = TransmonCache::global();
    let (model, bias) = point_model(cfg, cache)?;
    let sys = assemble(&model, &layout(cfg)?)?;
    let point = spectrum_point(&sys.h, probe.transitions)?;
    let s_sq = reflection_s11(&spec, &point, Resonator::Squid)?;
    let s_50 = reflection_s11(&spec, &point, Resonator::Cpw)?;
    let mux = multiplexed_response(&s_sq, &s_50, spec.multiplex_phase)?;
    let mut csv = CsvTable::new(["probe_ghz", "sq_re", "sq_im", "sq_mag", "cpw_re", "cpw_im", "cpw_mag", "multiplexed_mag"]);
    for (i, &f) in spec.probe_grid.iter().enumerate() {
        let (a, b) = (s_sq[i], s_50[i]);
        csv.push_floats(&[f, a.re, a.im, a.norm(), b.re, b.im, b.norm(), mux[i]]);
    }
    let mags = |s: &[num_complex::Complex64]| s.iter().map(|z| z.norm()).collect::<Vec<_>>();
    let dips_sq = extract_dips(&spec.probe_grid, &mags(&s_sq), DEFAULT_DIP_PROMINENCE)?;
    let dips_50 = extract_dips(&spec.probe_grid, &mags(&s_50), DEFAULT_DIP_PROMINENCE)?;
    log(opts, format!("{} array dips, {} 50 ohm dips", dips_sq.len(), dips_50.len()));
    let results = json!({
        "dips_sq_ghz": dips_sq,
        "dips_50_ghz": dips_50,
        "transitions": point.transitions,
        "model": model_summary(&model),
        "bias": bias,
    });
    finish(cfg, opts, &csv, results, Vec::new())
}

pub fn cmd_chevron(cfg: &RunConfig, opts: &RunOptions) -> Result<RunReport> {
    let c = cfg.chevron.as_ref().ok_or_else(|| Error::config(0, "missing [chevron]"))?;
    let (amps, plats) = (c.amplitudes.values()?, c.plateaus.values()?);
    log(opts, format!("chevron grid {} x {}", amps.len(), plats.len()));
    let map = run_chevron(&c.setup, &amps, &plats)?;
    let mut csv = CsvTable::new(["amplitude", "detuning_ghz", "plateau_ns", "p_excited"]);
    for (i, &a) in amps.iter().enumerate() {
        let det = c.setup.map.frequency(a) - c.setup.omega_dqd;
        for (j, &t) in plats.iter().enumerate() {
            csv.push_floats(&[a, det, t, map.population[i][j]]);
        }
    }
    let columns: Vec<Value> = amps
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let det = c.setup.map.frequency(a) - c.setup.omega_dqd;
            let fit = fit_damped_oscillation(&plats, map.column(i)).ok();
            let first_min = find_dips(&plats, map.column(i), 0.0).ok().and_then(|d| d.first().map(|d| d.frequency));
            json!({
                "amplitude": a,
                "detuning_ghz": det,
                "expected_frequency_ghz": (c.setup.two_j.powi(2) + det * det).sqrt(),
                "fit": fit,
                "first_minimum_ns": first_min,
            })
        })
        .collect();
    let mut extra = Vec::new();
    if opts.verbose {
        let a0 = c.setup.map.resonant_amplitude;
        let p = c.setup.protocol(a0, plats.last().copied().unwrap_or(0.0));
        let n = (p.readout_time() / 0.5).ceil() as usize + 1;
        let t: Vec<f64> = (0..n).map(|k| 0.5 * k as f64).collect();
        let mut pulse = CsvTable::new(["time_ns", "envelope", "detuning_ghz"]);
        for (&ti, d) in t.iter().zip(shape_flux_pulse(&p, &t)) {
            pulse.push_floats(&[ti, p.envelope(ti), d]);
        }
        let path = opts.out.join(format!("{}_pulse.csv", cfg.name));
        pulse.write(&path)?;
        extra.push(path);
    }
    let results = json!({
        "max_trace_error": map.max_trace_error,
        "min_eigenvalue": map.min_eigenvalue,
        "max_hermiticity_error": map.max_hermiticity_error,
        "columns": columns,
    });
    finish(cfg, opts, &csv, results, extra)
}

/// Observations from a `phi_sq,phi_tr,branch,frequency_ghz[,weight]` CSV.
pub fn read_observations(path: &Path) -> Result<Vec<Observation>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(0, format!("cannot read observations {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().map(|(_, l)| l.split(',').map(str::trim).collect()).unwrap_or_default();
    let weighted = match header.as_slice() {
        ["phi_sq", "phi_tr", "branch", "frequency_ghz"] => false,
        ["phi_sq", "phi_tr", "branch", "frequency_ghz", "weight"] => true,
        _ => return Err(Error::config(1, "observations header must be phi_sq,phi_tr,branch,frequency_ghz[,weight]")),
    };
    let mut out = Vec::new();
    for (i, l) in lines {
        let bad = || Error::config(i + 1, format!("malformed observation row '{l}'"));
        let f: Vec<&str> = l.split(',').map(str::trim).collect();
        if f.len() != header.len() {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(bad);
        out.push(Observation {
            bias: FluxBias::new(num(f[0])?, num(f[1])?),
            branch: f[2].parse().map_err(|_| bad())?,
            frequency: num(f[3])?,
            weight: if weighted { num(f[4])? } else { 1.0 },
        });
    }
    Ok(out)
}

pub fn cmd_fit(cfg: &RunConfig, opts: &RunOptions) -> Result<RunReport> {
    let fc = cfg.fit.as_ref().ok_or_else(|| Error::config(0, "missing [fit]"))?;
    let reference = cfg.device;
    let observations = match &fc.observations {
        Some(p) => read_observations(p)?,
        None => {
            let biases: Vec<FluxBias> = fc
                .phi_sq
                .values()?
                .into_iter()
                .map(|phi| FluxBias::new(phi, fc.phi_tr))
                .filter(|b| transmon_frequency(&reference.transmon, b) >= fc.min_transmon_frequency)
                .collect();
            synthetic_observations(&reference, &fc.model, &biases, &fc.branches)?
        }
    };
    let mut start = reference;
    let mut free = Vec::new();
    for (k, &p) in fc.free.iter().enumerate() {
        let v = p.get(&reference);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        p.set(&mut start, v * (1.0 + sign * fc.start_offset));
        let (lo, hi) = (v * fc.lower_factor, v * fc.upper_factor);
        free.push(FreeParameter { param: p, lower: lo.min(hi), upper: lo.max(hi) });
    }
    let problem = FitProblem {
        observations,
        free,
        device: start,
        model: fc.model,
        max_iter: fc.max_iter,
        spread_tol: fc.spread_tol,
        restarts: fc.restarts,
    };
    problem.validate().map_err(|e| match e {
        Error::InvalidArgument(m) => Error::config(0, m),
        e => e,
    })?;
    log(opts, format!("fitting {} parameters to {} observations", problem.free.len(), problem.observations.len()));
    let fit = fit_device(&problem)?;
    log(opts, format!("rms {:.3e} GHz after {} iterations", fit.rms, fit.iterations));

    let mut csv = CsvTable::new(["phi_sq", "phi_tr", "branch", "observed_ghz", "model_ghz", "residual_mhz"]);
    for (o, r) in problem.observations.iter().zip(&fit.residuals) {
        csv.push_fields(vec![
            format_float(o.bias.phi_sq),
            format_float(o.bias.phi_tr),
            o.branch.to_string(),
            format_float(o.frequency),
            format_float(o.frequency + r),
            format_float(1e3 * r),
        ]);
    }
    let synthetic = fc.observations.is_none();
    let params: Vec<Value> = fit
        .values
        .iter()
        .map(|&(p, v)| {
            let r = p.get(&reference);
            json!({
                "name": p.name(),
                "start": p.get(&start),
                "fitted": v,
                "reference": r,
                "relative_error": if synthetic { Some((v - r) / r) } else { None },
            })
        })
        .collect();
    let mut extra = Vec::new();
    if opts.verbose {
        let mut h = CsvTable::new(["iteration", "rms_ghz"]);
        for (i, v) in fit.history.iter().enumerate() {
            h.push_fields(vec![i.to_string(), format_float(*v)]);
        }
        let path = opts.out.join(format!("{}_history.csv", cfg.name));
        h.write(&path)?;
        extra.push(path);
    }
    let results = json!({
        "synthetic": synthetic,
        "observations": problem.observations.len(),
        "parameters": params,
        "rms_ghz": fit.rms,
        "iterations": fit.iterations,
        "fitted_device": fit.device,
    });
    finish(cfg, opts, &csv, results, extra)
}
