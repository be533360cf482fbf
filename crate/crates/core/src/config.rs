//! Run configuration: a sectioned `key = value` text format.
//!
//! ```text
//! # comment
//! [experiment]
//! kind = spectrum
//!
//! [operating_point]
//! preset = table2
//!
//! [sweep]
//! axis = delta
//! start = -1.5 GHz
//! stop = 1.5 GHz
//! points = 301
//! ```
//!
//! Physical quantities must carry a unit: frequencies and energies take
//! `Hz`, `kHz`, `MHz` or `GHz`; times take `ps`, `ns`, `us`, `ms` or `s`;
//! fluxes take `Phi0` or `mPhi0`; phases take `rad` or `deg`. Unknown
//! sections, unknown keys and duplicate keys are rejected with the line
//! number. [`RunConfig::render`] writes a config that parses back to the
//! same value.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::device::{DeviceParams, KappaPreset};
use crate::dynamics::{AmplitudeMap, ChevronSetup};
use crate::error::{Error, Result};
use crate::estimate::{DeviceParameter, FitModel};
use crate::hamiltonian::OperatingPoint;
use crate::spectra::{uniform_grid, Resonator, ResonatorLoss};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Spectrum,
    Rabi,
    S11,
    Chevron,
    Fit,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Spectrum => "spectrum",
            Experiment::Rabi => "rabi",
            Experiment::S11 => "s11",
            Experiment::Chevron => "chevron",
            Experiment::Fit => "fit",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Experiment::Spectrum, Experiment::Rabi, Experiment::S11, Experiment::Chevron, Experiment::Fit]
            .into_iter()
            .find(|e| e.name() == s)
    }
}

/// How the flux bias of a device-based run is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasConfig {
    pub phi_sq: f64,
    pub phi_tr: f64,
    /// When set, Φ_Sq is solved so the bare array sits at this frequency.
    pub array_frequency: Option<f64>,
    /// Scan Φ_tr for the transmon–array anticrossing.
    pub transmon_resonant: bool,
    pub tune_half_window: f64,
    pub tune_points: usize,
}

impl Default for BiasConfig {
    fn default() -> Self {
        Self { phi_sq: 0.0, phi_tr: 0.0, array_frequency: None, transmon_resonant: false, tune_half_window: 0.02, tune_points: 81 }
    }
}

/// Hilbert-space truncation of the full model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutConfig {
    pub n_tr: usize,
    pub n_sq: usize,
    pub n_50: usize,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self { n_tr: 4, n_sq: 5, n_50: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// DQD detuning δ (GHz).
    Delta,
    /// Transmon flux (Φ0); an offset from the operating point when one is used.
    PhiTr,
    /// Array flux (Φ0); device-based runs only.
    PhiSq,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Delta => "delta",
            SweepVariable::PhiTr => "phi_tr",
            SweepVariable::PhiSq => "phi_sq",
        }
    }

    fn kind(self) -> Kind {
        match self {
            SweepVariable::Delta => Kind::Frequency,
            _ => Kind::Flux,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl GridConfig {
    pub fn values(&self) -> Result<Vec<f64>> {
        uniform_grid(self.start, self.stop, self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub axis: SweepVariable,
    pub grid: GridConfig,
    pub transitions: usize,
    /// Branch pair whose minimal gap is reported.
    pub crossing: Option<(usize, usize)>,
    /// Restricts the crossing search to this axis interval.
    pub window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub resonator: Resonator,
    pub grid: GridConfig,
    pub squid: ResonatorLoss,
    pub cpw: ResonatorLoss,
    pub multiplex_phase: f64,
    pub transitions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChevronConfig {
    pub setup: ChevronSetup,
    pub amplitudes: GridConfig,
    pub plateaus: GridConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub free: Vec<DeviceParameter>,
    /// Relative start displacement; signs alternate +, −, +, … over `free`.
    pub start_offset: f64,
    pub lower_factor: f64,
    pub upper_factor: f64,
    pub phi_sq: GridConfig,
    pub phi_tr: f64,
    /// Biases whose asymptotic transmon frequency falls below this are dropped.
    pub min_transmon_frequency: f64,
    pub branches: Vec<usize>,
    /// CSV of measured transitions; synthetic data from the device otherwise.
    pub observations: Option<PathBuf>,
    pub model: FitModel,
    pub max_iter: usize,
    pub restarts: usize,
    pub spread_tol: f64,
}

/// Fully resolved run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    /// Stem of the output files.
    pub name: String,
    pub device: DeviceParams,
    pub bias: BiasConfig,
    /// Tabulated operating point; replaces `device` and `bias` in the Hamiltonian.
    pub operating_point: Option<(String, OperatingPoint)>,
    pub layout: LayoutConfig,
    pub sweep: Option<SweepConfig>,
    pub probe: Option<ProbeConfig>,
    pub chevron: Option<ChevronConfig>,
    pub fit: Option<FitConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Frequency,
    Time,
    Flux,
    Phase,
}

/// Conversion to canonical units as `(factor, divide)`; dividing by an
/// exact power of ten keeps e.g. `243 MHz` correctly rounded.
fn unit_scale(kind: Kind, unit: &str) -> Option<(f64, bool)> {
    Some(match (kind, unit) {
        (Kind::Frequency, "Hz") => (1e9, true),
        (Kind::Frequency, "kHz") => (1e6, true),
        (Kind::Frequency, "MHz") => (1e3, true),
        (Kind::Frequency, "GHz") => (1.0, false),
        (Kind::Time, "ps") => (1e3, true),
        (Kind::Time, "ns") => (1.0, false),
        (Kind::Time, "us" | "µs") => (1e3, false),
        (Kind::Time, "ms") => (1e6, false),
        (Kind::Time, "s") => (1e9, false),
        (Kind::Flux, "Phi0") => (1.0, false),
        (Kind::Flux, "mPhi0") => (1e3, true),
        (Kind::Phase, "rad") => (1.0, false),
        (Kind::Phase, "deg") => (std::f64::consts::PI / 180.0, false),
        _ => return None,
    })
}

fn canonical_unit(kind: Kind) -> &'static str {
    match kind {
        Kind::Frequency => "GHz",
        Kind::Time => "ns",
        Kind::Flux => "Phi0",
        Kind::Phase => "rad",
    }
}

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

fn tokenize(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .map(str::trim)
                .filter(|n| !n.is_empty())
                .ok_or_else(|| Error::config(line, format!("malformed section header '{s}'")))?;
            if sections.iter().any(|x| x.name == name) {
                return Err(Error::config(line, format!("section [{name}] appears twice")));
            }
            sections.push(Section { name: name.to_string(), line, entries: Vec::new() });
            continue;
        }
        let (k, v) = s.split_once('=').ok_or_else(|| Error::config(line, format!("expected 'key = value', got '{s}'")))?;
        let (key, value) = (k.trim(), v.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::config(line, "empty key or value"));
        }
        let sec = sections.last_mut().ok_or_else(|| Error::config(line, "key outside of any [section]"))?;
        if let Some(prev) = sec.entries.iter().find(|e| e.key == key) {
            return Err(Error::config(line, format!("duplicate key '{key}' (first on line {})", prev.line)));
        }
        sec.entries.push(Entry { key: key.to_string(), value: value.to_string(), line });
    }
    Ok(sections)
}

/// Typed access to one section that remembers which keys were read.
struct Reader<'a> {
    name: &'a str,
    entries: &'a [Entry],
    used: Vec<bool>,
}

impl<'a> Reader<'a> {
    fn new(section: Option<&'a Section>, name: &'a str) -> Self {
        let entries = section.map_or(&[][..], |s| &s.entries[..]);
        Self { name, entries, used: vec![false; entries.len()] }
    }

    fn raw(&mut self, key: &str) -> Option<&'a Entry> {
        let i = self.entries.iter().position(|e| e.key == key)?;
        self.used[i] = true;
        Some(&self.entries[i])
    }

    fn quantity(&mut self, key: &str, kind: Kind) -> Result<Option<f64>> {
        let Some(e) = self.raw(key) else { return Ok(None) };
        let mut parts = e.value.split_whitespace();
        let num = parts.next().unwrap_or("");
        let unit = parts.next().ok_or_else(|| {
            Error::config(e.line, format!("[{}] {key}: missing unit (expected e.g. '{} {}')", self.name, e.value, canonical_unit(kind)))
        })?;
        if parts.next().is_some() {
            return Err(Error::config(e.line, format!("[{}] {key}: trailing text after unit", self.name)));
        }
        let x: f64 = num.parse().map_err(|_| Error::config(e.line, format!("[{}] {key}: '{num}' is not a number", self.name)))?;
        let scale = unit_scale(kind, unit)
            .ok_or_else(|| Error::config(e.line, format!("[{}] {key}: unit '{unit}' is not a valid {kind:?} unit", self.name)))?;
        if !x.is_finite() {
            return Err(Error::config(e.line, format!("[{}] {key}: value must be finite", self.name)));
        }
        Ok(Some(if scale.1 { x / scale.0 } else { x * scale.0 }))
    }

    fn number(&mut self, key: &str) -> Result<Option<f64>> {
        let Some(e) = self.raw(key) else { return Ok(None) };
        let x: f64 = e.value.parse().map_err(|_| {
            Error::config(e.line, format!("[{}] {key}: '{}' is not a dimensionless number", self.name, e.value))
        })?;
        if !x.is_finite() {
            return Err(Error::config(e.line, format!("[{}] {key}: value must be finite", self.name)));
        }
        Ok(Some(x))
    }

    fn integer(&mut self, key: &str) -> Result<Option<usize>> {
        let Some(e) = self.raw(key) else { return Ok(None) };
        e.value
            .parse()
            .map(Some)
            .map_err(|_| Error::config(e.line, format!("[{}] {key}: '{}' is not a non-negative integer", self.name, e.value)))
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>> {
        let Some(e) = self.raw(key) else { return Ok(None) };
        match e.value.as_str() {
            "true" => Ok(Some(true)),
            "false" => Ok(Some(false)),
            v => Err(Error::config(e.line, format!("[{}] {key}: expected true or false, got '{v}'", self.name))),
        }
    }

    fn peek(&self, key: &str) -> Option<&'a str> {
        self.entries.iter().find(|e| e.key == key).map(|e| e.value.as_str())
    }

    fn text(&mut self, key: &str) -> Option<(&'a str, usize)> {
        self.raw(key).map(|e| (e.value.as_str(), e.line))
    }

    fn integers(&mut self, key: &str) -> Result<Option<Vec<usize>>> {
        let Some(e) = self.raw(key) else { return Ok(None) };
        e.value
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::config(e.line, format!("[{}] {key}: '{}' is not an integer", self.name, s.trim())))
            })
            .collect::<Result<Vec<usize>>>()
            .map(Some)
    }

    fn set_quantity(&mut self, key: &str, kind: Kind, target: &mut f64) -> Result<()> {
        if let Some(v) = self.quantity(key, kind)? {
            *target = v;
        }
        Ok(())
    }

    fn set_number(&mut self, key: &str, target: &mut f64) -> Result<()> {
        if let Some(v) = self.number(key)? {
            *target = v;
        }
        Ok(())
    }

    fn set_integer(&mut self, key: &str, target: &mut usize) -> Result<()> {
        if let Some(v) = self.integer(key)? {
            *target = v;
        }
        Ok(())
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.iter().find(|e| e.key == key).map_or(0, |e| e.line)
    }

    /// Reject every key that was never read.
    fn finish(self) -> Result<()> {
        match self.entries.iter().zip(&self.used).find(|(_, u)| !**u) {
            Some((e, _)) => Err(Error::config(e.line, format!("unknown key '{}' in [{}]", e.key, self.name))),
            None => Ok(()),
        }
    }
}

const SECTIONS: [&str; 12] = [
    "experiment",
    "squid",
    "transmon",
    "dqd",
    "coupling",
    "bias",
    "operating_point",
    "layout",
    "sweep",
    "probe",
    "chevron",
    "fit",
];

fn check_positive(x: f64, what: &str, line: usize) -> Result<()> {
    if x > 0.0 {
        Ok(())
    } else {
        Err(Error::config(line, format!("{what} must be > 0, got {x}")))
    }
}

fn grid(r: &mut Reader, kind: Option<Kind>, prefix: &str, default: Option<GridConfig>) -> Result<GridConfig> {
    let key = |s: &str| if prefix.is_empty() { s.to_string() } else { format!("{prefix}_{s}") };
    let (ks, ke, kp) = (key("start"), key("stop"), key("points"));
    let value = |r: &mut Reader, k: &str| match kind {
        Some(kind) => r.quantity(k, kind),
        None => r.number(k),
    };
    let start = value(r, &ks)?.or(default.map(|d| d.start));
    let stop = value(r, &ke)?.or(default.map(|d| d.stop));
    let points = r.integer(&kp)?.or(default.map(|d| d.points));
    let (Some(start), Some(stop), Some(points)) = (start, stop, points) else {
        return Err(Error::config(0, format!("[{}] needs {ks}, {ke} and {kp}", r.name)));
    };
    let g = GridConfig { start, stop, points };
    g.values().map_err(|e| Error::config(r.line_of(&ks), format!("[{}] {e}", r.name)))?;
    Ok(g)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(0, format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let sections = tokenize(text)?;
        for s in &sections {
            if !SECTIONS.contains(&s.name.as_str()) {
                return Err(Error::config(s.line, format!("unknown section [{}]", s.name)));
            }
        }
        let get = |n: &str| find(&sections, n);

        let mut r = Reader::new(get("experiment"), "experiment");
        let (kind_s, kind_line) = r.text("kind").ok_or_else(|| Error::config(0, "[experiment] kind is required"))?;
        let experiment = Experiment::from_name(kind_s).ok_or_else(|| {
            Error::config(kind_line, format!("unknown experiment kind '{kind_s}' (spectrum, rabi, s11, chevron, fit)"))
        })?;
        let name = r.text("name").map_or_else(|| experiment.name().to_string(), |(s, _)| s.to_string());
        if name.is_empty() || name.contains(['/', '\\']) {
            return Err(Error::config(r.line_of("name"), "name must be a plain file stem"));
        }
        r.finish()?;

        let device = parse_device(&sections)?;

        let mut r = Reader::new(get("bias"), "bias");
        let mut bias = BiasConfig::default();
        r.set_quantity("phi_sq", Kind::Flux, &mut bias.phi_sq)?;
        r.set_quantity("phi_tr", Kind::Flux, &mut bias.phi_tr)?;
        bias.array_frequency = r.quantity("array_frequency", Kind::Frequency)?;
        bias.transmon_resonant = r.boolean("transmon_resonant")?.unwrap_or(false);
        r.set_quantity("tune_half_window", Kind::Flux, &mut bias.tune_half_window)?;
        r.set_integer("tune_points", &mut bias.tune_points)?;
        if bias.transmon_resonant && bias.array_frequency.is_none() {
            return Err(Error::config(r.line_of("transmon_resonant"), "transmon_resonant needs array_frequency"));
        }
        if bias.transmon_resonant && (bias.tune_points < 3 || !(bias.tune_half_window > 0.0)) {
            return Err(Error::config(r.line_of("tune_points"), "tune window needs > 0 width and >= 3 points"));
        }
        r.finish()?;

        let operating_point = match get("operating_point") {
            None => None,
            Some(sec) => Some(parse_operating_point(sec)?),
        };

        let mut r = Reader::new(get("layout"), "layout");
        let mut layout = LayoutConfig::default();
        r.set_integer("n_tr", &mut layout.n_tr)?;
        r.set_integer("n_sq", &mut layout.n_sq)?;
        r.set_integer("n_50", &mut layout.n_50)?;
        if layout.n_tr < 2 || layout.n_sq < 2 || layout.n_50 < 1 {
            return Err(Error::config(get("layout").map_or(0, |s| s.line), "layout needs n_tr >= 2, n_sq >= 2, n_50 >= 1"));
        }
        r.finish()?;

        let sweep = get("sweep").map(|s| parse_sweep(s, operating_point.is_some())).transpose()?;
        let probe = get("probe").map(|s| parse_probe(s, &device)).transpose()?;
        let chevron = get("chevron").map(|s| parse_chevron(s, &device)).transpose()?;
        let fit = get("fit").map(parse_fit).transpose()?;

        let cfg = RunConfig { experiment, name, device, bias, operating_point, layout, sweep, probe, chevron, fit };
        cfg.check_required()?;
        Ok(cfg)
    }

    fn check_required(&self) -> Result<()> {
        let need = |present: bool, section: &str| {
            if present {
                Ok(())
            } else {
                Err(Error::config(0, format!("experiment '{}' requires a [{section}] section", self.experiment.name())))
            }
        };
        match self.experiment {
            Experiment::Spectrum => need(self.sweep.is_some(), "sweep")?,
            Experiment::Rabi | Experiment::S11 => need(self.probe.is_some(), "probe")?,
            Experiment::Chevron => need(self.chevron.is_some(), "chevron")?,
            Experiment::Fit => need(self.fit.is_some(), "fit")?,
        }
        if let Some(s) = &self.sweep {
            if s.axis == SweepVariable::PhiSq && self.operating_point.is_some() {
                return Err(Error::config(0, "axis = phi_sq needs a device-based run (no [operating_point])"));
            }
        }
        self.device.validate().map_err(|e| Error::config(0, format!("device: {e}")))
    }

    /// Config text that parses back to `self`.
    pub fn render(&self) -> String {
        let mut o = String::new();
        let q = |o: &mut String, k: &str, v: f64, kind: Kind| {
            let _ = writeln!(o, "{k} = {v} {}", canonical_unit(kind));
        };
        let n = |o: &mut String, k: &str, v: f64| {
            let _ = writeln!(o, "{k} = {v}");
        };
        let i = |o: &mut String, k: &str, v: usize| {
            let _ = writeln!(o, "{k} = {v}");
        };
        let g = |o: &mut String, prefix: &str, gr: &GridConfig, kind: Option<Kind>| {
            let p = if prefix.is_empty() { String::new() } else { format!("{prefix}_") };
            let u = kind.map_or(String::new(), |k| format!(" {}", canonical_unit(k)));
            let _ = writeln!(o, "{p}start = {}{u}", gr.start);
            let _ = writeln!(o, "{p}stop = {}{u}", gr.stop);
            let _ = writeln!(o, "{p}points = {}", gr.points);
        };
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        use Kind::*;

        let _ = writeln!(o, "[experiment]\nkind = {}\nname = {}", self.experiment.name(), self.name);
        let d = &self.device;
        o.push_str("\n[squid]\n");
        q(&mut o, "omega0", d.squid.omega0, Frequency);
        n(&mut o, "beta", d.squid.beta);
        n(&mut o, "gamma", d.squid.gamma);
        q(&mut o, "phi_c", d.squid.phi_c, Flux);
        i(&mut o, "n_sq", d.squid.n_sq as usize);
        i(&mut o, "n_sj", d.squid.n_sj as usize);
        q(&mut o, "kappa_ext", d.squid.kappa_ext, Frequency);
        q(&mut o, "kappa_int", d.squid.kappa_int, Frequency);
        o.push_str("\n[transmon]\n");
        q(&mut o, "e_c", d.transmon.e_c, Frequency);
        q(&mut o, "e_j0", d.transmon.e_j0, Frequency);
        match d.transmon.omega_pl {
            Some(w) => q(&mut o, "omega_pl", w, Frequency),
            None => o.push_str("omega_pl = none\n"),
        }
        n(&mut o, "alpha", d.transmon.alpha);
        n(&mut o, "n_g", d.transmon.n_g);
        i(&mut o, "n_levels", d.transmon.n_levels);
        i(&mut o, "charge_cutoff", d.transmon.charge_cutoff);
        o.push_str("\n[dqd]\n");
        q(&mut o, "t_c", d.dqd.t_c, Frequency);
        q(&mut o, "delta", d.dqd.delta, Frequency);
        q(&mut o, "gamma2", d.dqd.gamma2, Frequency);
        o.push_str("\n[coupling]\n");
        q(&mut o, "g0_tr_sq", d.coupling.g0_tr_sq, Frequency);
        q(&mut o, "g0_tr_50", d.coupling.g0_tr_50, Frequency);
        q(&mut o, "g0_dqd_sq", d.coupling.g0_dqd_sq, Frequency);
        q(&mut o, "omega_r50", d.coupling.omega_r50, Frequency);

        let b = &self.bias;
        o.push_str("\n[bias]\n");
        q(&mut o, "phi_sq", b.phi_sq, Flux);
        q(&mut o, "phi_tr", b.phi_tr, Flux);
        if let Some(f) = b.array_frequency {
            q(&mut o, "array_frequency", f, Frequency);
        }
        let _ = writeln!(o, "transmon_resonant = {}", b.transmon_resonant);
        q(&mut o, "tune_half_window", b.tune_half_window, Flux);
        i(&mut o, "tune_points", b.tune_points);

        if let Some((preset, p)) = &self.operating_point {
            let _ = writeln!(o, "\n[operating_point]\npreset = {preset}");
            q(&mut o, "two_tc", p.two_tc, Frequency);
            q(&mut o, "delta", p.delta, Frequency);
            q(&mut o, "omega_tr", p.omega_tr, Frequency);
            q(&mut o, "omega_r_sq", p.omega_r_sq, Frequency);
            q(&mut o, "omega_r_50", p.omega_r_50, Frequency);
            q(&mut o, "g_tr_sq", p.g_tr_sq, Frequency);
            q(&mut o, "g_dqd_sq", p.g_dqd_sq, Frequency);
            q(&mut o, "g_tr_50", p.g_tr_50, Frequency);
            q(&mut o, "e_c", p.e_c, Frequency);
            q(&mut o, "omega_pl", p.omega_pl, Frequency);
            i(&mut o, "n_levels", p.n_levels);
            i(&mut o, "charge_cutoff", p.charge_cutoff);
            q(&mut o, "phi_tr_offset", p.phi_tr_offset, Flux);
        }

        let l = &self.layout;
        let _ = writeln!(o, "\n[layout]\nn_tr = {}\nn_sq = {}\nn_50 = {}", l.n_tr, l.n_sq, l.n_50);

        if let Some(s) = &self.sweep {
            let _ = writeln!(o, "\n[sweep]\naxis = {}", s.axis.name());
            g(&mut o, "", &s.grid, Some(s.axis.kind()));
            i(&mut o, "transitions", s.transitions);
            if let Some((a, c)) = s.crossing {
                let _ = writeln!(o, "crossing = {a}, {c}");
            }
            if let Some((lo, hi)) = s.window {
                q(&mut o, "window_start", lo, s.axis.kind());
                q(&mut o, "window_stop", hi, s.axis.kind());
            }
        }

        if let Some(p) = &self.probe {
            let r = match p.resonator {
                Resonator::Squid => "squid",
                Resonator::Cpw => "cpw",
            };
            let _ = writeln!(o, "\n[probe]\nresonator = {r}");
            g(&mut o, "", &p.grid, Some(Frequency));
            q(&mut o, "kappa_ext", p.squid.kappa_ext, Frequency);
            q(&mut o, "kappa_int", p.squid.kappa_int, Frequency);
            q(&mut o, "cpw_kappa_ext", p.cpw.kappa_ext, Frequency);
            q(&mut o, "cpw_kappa_int", p.cpw.kappa_int, Frequency);
            q(&mut o, "multiplex_phase", p.multiplex_phase, Phase);
            i(&mut o, "transitions", p.transitions);
        }

        if let Some(c) = &self.chevron {
            let s = &c.setup;
            o.push_str("\n[chevron]\n");
            q(&mut o, "two_j", s.two_j, Frequency);
            q(&mut o, "omega_dqd", s.omega_dqd, Frequency);
            q(&mut o, "t1", s.rates.t1_tr, Time);
            q(&mut o, "t2star", s.rates.t2star_tr, Time);
            q(&mut o, "gamma2", s.rates.gamma2_dqd, Frequency);
            q(&mut o, "filter_sigma", s.filter_sigma, Time);
            q(&mut o, "prep_offset", s.prep_offset, Time);
            q(&mut o, "max_step", s.max_step, Time);
            n(&mut o, "resonant_amplitude", s.map.resonant_amplitude);
            q(&mut o, "resonant_frequency", s.map.resonant_frequency, Frequency);
            q(&mut o, "slope", s.map.slope, Frequency);
            g(&mut o, "amplitude", &c.amplitudes, None);
            g(&mut o, "plateau", &c.plateaus, Some(Time));
        }

        if let Some(f) = &self.fit {
            let names: Vec<&str> = f.free.iter().map(|p| p.name()).collect();
            let _ = writeln!(o, "\n[fit]\nfree = {}", names.join(", "));
            n(&mut o, "start_offset", f.start_offset);
            n(&mut o, "lower_factor", f.lower_factor);
            n(&mut o, "upper_factor", f.upper_factor);
            g(&mut o, "phi_sq", &f.phi_sq, Some(Flux));
            q(&mut o, "phi_tr", f.phi_tr, Flux);
            q(&mut o, "min_transmon_frequency", f.min_transmon_frequency, Frequency);
            let _ = writeln!(o, "branches = {}", join(&f.branches));
            if let Some(p) = &f.observations {
                let _ = writeln!(o, "observations = {}", p.display());
            }
            let _ = writeln!(o, "include_dqd = {}", f.model.include_dqd);
            i(&mut o, "n_tr", f.model.n_tr);
            i(&mut o, "n_sq", f.model.n_sq);
            i(&mut o, "n_50", f.model.n_50);
            i(&mut o, "max_iter", f.max_iter);
            i(&mut o, "restarts", f.restarts);
            q(&mut o, "spread_tol", f.spread_tol, Frequency);
        }
        o
    }
}

fn parse_device(sections: &[Section]) -> Result<DeviceParams> {
    let get = |n: &str| find(sections, n);
    let mut d = DeviceParams::default();

    let mut r = Reader::new(get("squid"), "squid");
    let s = &mut d.squid;
    r.set_quantity("omega0", Kind::Frequency, &mut s.omega0)?;
    r.set_number("beta", &mut s.beta)?;
    r.set_number("gamma", &mut s.gamma)?;
    r.set_quantity("phi_c", Kind::Flux, &mut s.phi_c)?;
    if let Some(v) = r.integer("n_sq")? {
        s.n_sq = v as u32;
    }
    if let Some(v) = r.integer("n_sj")? {
        s.n_sj = v as u32;
    }
    if let Some((preset, line)) = r.text("kappa") {
        let k = match preset {
            "main_text" => KappaPreset::MainText,
            "undercoupled" => KappaPreset::Undercoupled,
            other => return Err(Error::config(line, format!("unknown kappa preset '{other}' (main_text, undercoupled)"))),
        };
        s.kappa_ext = k.kappa_ext();
        s.kappa_int = k.kappa_int();
    }
    r.set_quantity("kappa_ext", Kind::Frequency, &mut s.kappa_ext)?;
    r.set_quantity("kappa_int", Kind::Frequency, &mut s.kappa_int)?;
    r.finish()?;

    let mut r = Reader::new(get("transmon"), "transmon");
    let t = &mut d.transmon;
    r.set_quantity("e_c", Kind::Frequency, &mut t.e_c)?;
    r.set_quantity("e_j0", Kind::Frequency, &mut t.e_j0)?;
    if r.peek("omega_pl") == Some("none") {
        r.raw("omega_pl");
        t.omega_pl = None;
    } else if let Some(v) = r.quantity("omega_pl", Kind::Frequency)? {
        t.omega_pl = Some(v);
    }
    r.set_number("alpha", &mut t.alpha)?;
    r.set_number("n_g", &mut t.n_g)?;
    r.set_integer("n_levels", &mut t.n_levels)?;
    r.set_integer("charge_cutoff", &mut t.charge_cutoff)?;
    r.finish()?;

    let mut r = Reader::new(get("dqd"), "dqd");
    r.set_quantity("t_c", Kind::Frequency, &mut d.dqd.t_c)?;
    r.set_quantity("delta", Kind::Frequency, &mut d.dqd.delta)?;
    r.set_quantity("gamma2", Kind::Frequency, &mut d.dqd.gamma2)?;
    r.finish()?;

    let mut r = Reader::new(get("coupling"), "coupling");
    let c = &mut d.coupling;
    r.set_quantity("g0_tr_sq", Kind::Frequency, &mut c.g0_tr_sq)?;
    r.set_quantity("g0_tr_50", Kind::Frequency, &mut c.g0_tr_50)?;
    r.set_quantity("g0_dqd_sq", Kind::Frequency, &mut c.g0_dqd_sq)?;
    r.set_quantity("omega_r50", Kind::Frequency, &mut c.omega_r50)?;
    r.finish()?;
    Ok(d)
}

fn parse_operating_point(sec: &Section) -> Result<(String, OperatingPoint)> {
    let mut r = Reader::new(Some(sec), "operating_point");
    let (preset, line) = r.text("preset").ok_or_else(|| Error::config(sec.line, "[operating_point] preset is required"))?;
    let mut p = match preset {
        "table1" => OperatingPoint::table1(),
        "table2" => OperatingPoint::table2(),
        "table3" => OperatingPoint::table3(),
        "dqd_vacuum_rabi" => OperatingPoint::dqd_vacuum_rabi(),
        other => {
            return Err(Error::config(line, format!("unknown preset '{other}' (table1, table2, table3, dqd_vacuum_rabi)")))
        }
    };
    use Kind::*;
    r.set_quantity("two_tc", Frequency, &mut p.two_tc)?;
    r.set_quantity("delta", Frequency, &mut p.delta)?;
    r.set_quantity("omega_tr", Frequency, &mut p.omega_tr)?;
    r.set_quantity("omega_r_sq", Frequency, &mut p.omega_r_sq)?;
    r.set_quantity("omega_r_50", Frequency, &mut p.omega_r_50)?;
    r.set_quantity("g_tr_sq", Frequency, &mut p.g_tr_sq)?;
    r.set_quantity("g_dqd_sq", Frequency, &mut p.g_dqd_sq)?;
    r.set_quantity("g_tr_50", Frequency, &mut p.g_tr_50)?;
    r.set_quantity("e_c", Frequency, &mut p.e_c)?;
    r.set_quantity("omega_pl", Frequency, &mut p.omega_pl)?;
    r.set_integer("n_levels", &mut p.n_levels)?;
    r.set_integer("charge_cutoff", &mut p.charge_cutoff)?;
    r.set_quantity("phi_tr_offset", Flux, &mut p.phi_tr_offset)?;
    let preset = preset.to_string();
    r.finish()?;
    for (v, what) in [(p.two_tc, "two_tc"), (p.omega_tr, "omega_tr"), (p.e_c, "e_c"), (p.omega_pl, "omega_pl")] {
        check_positive(v, what, sec.line)?;
    }
    Ok((preset, p))
}

fn parse_sweep(sec: &Section, operating_point: bool) -> Result<SweepConfig> {
    let mut r = Reader::new(Some(sec), "sweep");
    let (axis_s, line) = r.text("axis").ok_or_else(|| Error::config(sec.line, "[sweep] axis is required"))?;
    let axis = match axis_s {
        "delta" => SweepVariable::Delta,
        "phi_tr" => SweepVariable::PhiTr,
        "phi_sq" => SweepVariable::PhiSq,
        other => return Err(Error::config(line, format!("unknown sweep axis '{other}' (delta, phi_tr, phi_sq)"))),
    };
    if axis == SweepVariable::PhiSq && operating_point {
        return Err(Error::config(line, "axis = phi_sq needs a device-based run (no [operating_point])"));
    }
    let g = grid(&mut r, Some(axis.kind()), "", None)?;
    let transitions = r.integer("transitions")?.unwrap_or(6);
    if transitions == 0 {
        return Err(Error::config(r.line_of("transitions"), "transitions must be >= 1"));
    }
    let crossing = match r.integers("crossing")? {
        None => None,
        Some(v) if v.len() == 2 && v[0] != v[1] && v[0].max(v[1]) < transitions => Some((v[0], v[1])),
        Some(_) => {
            return Err(Error::config(r.line_of("crossing"), "crossing needs two distinct branch indices below transitions"))
        }
    };
    let lo = r.quantity("window_start", axis.kind())?;
    let hi = r.quantity("window_stop", axis.kind())?;
    let window = match (lo, hi) {
        (None, None) => None,
        (Some(a), Some(b)) if a < b => Some((a, b)),
        _ => return Err(Error::config(r.line_of("window_start"), "window needs window_start < window_stop")),
    };
    r.finish()?;
    Ok(SweepConfig { axis, grid: g, transitions, crossing, window })
}

/// 50 Ω resonator loss used when the config does not give one.
pub const DEFAULT_CPW_LOSS: ResonatorLoss = ResonatorLoss { kappa_ext: 0.005, kappa_int: 0.002 };

fn parse_probe(sec: &Section, device: &DeviceParams) -> Result<ProbeConfig> {
    let mut r = Reader::new(Some(sec), "probe");
    let resonator = match r.text("resonator") {
        None | Some(("squid", _)) => Resonator::Squid,
        Some(("cpw", _)) => Resonator::Cpw,
        Some((other, line)) => return Err(Error::config(line, format!("unknown resonator '{other}' (squid, cpw)"))),
    };
    let g = grid(&mut r, Some(Kind::Frequency), "", None)?;
    let mut squid = ResonatorLoss { kappa_ext: device.squid.kappa_ext, kappa_int: device.squid.kappa_int };
    let mut cpw = DEFAULT_CPW_LOSS;
    r.set_quantity("kappa_ext", Kind::Frequency, &mut squid.kappa_ext)?;
    r.set_quantity("kappa_int", Kind::Frequency, &mut squid.kappa_int)?;
    r.set_quantity("cpw_kappa_ext", Kind::Frequency, &mut cpw.kappa_ext)?;
    r.set_quantity("cpw_kappa_int", Kind::Frequency, &mut cpw.kappa_int)?;
    let multiplex_phase = r.quantity("multiplex_phase", Kind::Phase)?.unwrap_or(0.0);
    let transitions = r.integer("transitions")?.unwrap_or(8);
    squid.validate().map_err(|e| Error::config(sec.line, format!("[probe] array loss: {e}")))?;
    cpw.validate().map_err(|e| Error::config(sec.line, format!("[probe] 50 ohm loss: {e}")))?;
    if transitions == 0 {
        return Err(Error::config(r.line_of("transitions"), "transitions must be >= 1"));
    }
    r.finish()?;
    Ok(ProbeConfig { resonator, grid: g, squid, cpw, multiplex_phase, transitions })
}

fn parse_chevron(sec: &Section, device: &DeviceParams) -> Result<ChevronConfig> {
    use Kind::*;
    let mut r = Reader::new(Some(sec), "chevron");
    let mut s = ChevronSetup::default();
    s.rates.gamma2_dqd = device.dqd.gamma2;
    r.set_quantity("two_j", Frequency, &mut s.two_j)?;
    r.set_quantity("omega_dqd", Frequency, &mut s.omega_dqd)?;
    r.set_quantity("t1", Time, &mut s.rates.t1_tr)?;
    r.set_quantity("t2star", Time, &mut s.rates.t2star_tr)?;
    r.set_quantity("gamma2", Frequency, &mut s.rates.gamma2_dqd)?;
    r.set_quantity("filter_sigma", Time, &mut s.filter_sigma)?;
    r.set_quantity("prep_offset", Time, &mut s.prep_offset)?;
    r.set_quantity("max_step", Time, &mut s.max_step)?;
    s.map = AmplitudeMap::calibrated(s.omega_dqd, s.two_j);
    r.set_number("resonant_amplitude", &mut s.map.resonant_amplitude)?;
    r.set_quantity("resonant_frequency", Frequency, &mut s.map.resonant_frequency)?;
    r.set_quantity("slope", Frequency, &mut s.map.slope)?;
    let amplitudes = grid(&mut r, None, "amplitude", Some(GridConfig { start: 0.0, stop: 1.0, points: 21 }))?;
    let plateaus = grid(&mut r, Some(Time), "plateau", Some(GridConfig { start: 0.0, stop: 250.0, points: 126 }))?;
    r.finish()?;
    s.rates.validate().map_err(|e| Error::config(sec.line, format!("[chevron] {e}")))?;
    check_positive(s.two_j, "two_j", r_line(sec, "two_j"))?;
    check_positive(s.max_step, "max_step", r_line(sec, "max_step"))?;
    if !(s.filter_sigma >= 0.0 && s.prep_offset >= 0.0) || plateaus.start < 0.0 {
        return Err(Error::config(sec.line, "filter_sigma, prep_offset and plateaus must be >= 0"));
    }
    Ok(ChevronConfig { setup: s, amplitudes, plateaus })
}

fn find<'a>(sections: &'a [Section], name: &str) -> Option<&'a Section> {
    sections.iter().find(|s| s.name == name)
}

fn r_line(sec: &Section, key: &str) -> usize {
    sec.entries.iter().find(|e| e.key == key).map_or(sec.line, |e| e.line)
}

fn parse_fit(sec: &Section) -> Result<FitConfig> {
    let mut r = Reader::new(Some(sec), "fit");
    let (free_s, line) = r.text("free").ok_or_else(|| Error::config(sec.line, "[fit] free is required"))?;
    let mut free = Vec::new();
    for name in free_s.split(',').map(str::trim) {
        let p = DeviceParameter::from_name(name).ok_or_else(|| {
            let known: Vec<&str> = DeviceParameter::ALL.iter().map(|p| p.name()).collect();
            Error::config(line, format!("unknown fit parameter '{name}' (known: {})", known.join(", ")))
        })?;
        if free.contains(&p) {
            return Err(Error::config(line, format!("fit parameter '{name}' listed twice")));
        }
        free.push(p);
    }
    let mut f = FitConfig {
        free,
        start_offset: 0.1,
        lower_factor: 0.5,
        upper_factor: 1.5,
        phi_sq: GridConfig { start: -0.3, stop: 0.3, points: 61 },
        phi_tr: 0.162,
        min_transmon_frequency: 4.3,
        branches: vec![0, 1, 2],
        observations: None,
        model: FitModel::default(),
        max_iter: 2000,
        restarts: 4,
        spread_tol: 1e-5,
    };
    r.set_number("start_offset", &mut f.start_offset)?;
    r.set_number("lower_factor", &mut f.lower_factor)?;
    r.set_number("upper_factor", &mut f.upper_factor)?;
    f.phi_sq = grid(&mut r, Some(Kind::Flux), "phi_sq", Some(f.phi_sq))?;
    r.set_quantity("phi_tr", Kind::Flux, &mut f.phi_tr)?;
    r.set_quantity("min_transmon_frequency", Kind::Frequency, &mut f.min_transmon_frequency)?;
    if let Some(b) = r.integers("branches")? {
        f.branches = b;
    }
    f.observations = r.text("observations").map(|(p, _)| PathBuf::from(p));
    if let Some(b) = r.boolean("include_dqd")? {
        f.model.include_dqd = b;
    }
    r.set_integer("n_tr", &mut f.model.n_tr)?;
    r.set_integer("n_sq", &mut f.model.n_sq)?;
    r.set_integer("n_50", &mut f.model.n_50)?;
    r.set_integer("max_iter", &mut f.max_iter)?;
    r.set_integer("restarts", &mut f.restarts)?;
    r.set_quantity("spread_tol", Kind::Frequency, &mut f.spread_tol)?;
    r.finish()?;
    if !(f.lower_factor > 0.0 && f.lower_factor < 1.0 && f.upper_factor > 1.0) {
        return Err(Error::config(sec.line, "need 0 < lower_factor < 1 < upper_factor"));
    }
    if !(f.start_offset >= 0.0 && 1.0 + f.start_offset < f.upper_factor && 1.0 - f.start_offset > f.lower_factor) {
        return Err(Error::config(sec.line, "start_offset must keep the start inside the bounds"));
    }
    if f.branches.is_empty() {
        return Err(Error::config(sec.line, "branches must not be empty"));
    }
    check_positive(f.spread_tol, "spread_tol", r_line(sec, "spread_tol"))?;
    Ok(f)
}
