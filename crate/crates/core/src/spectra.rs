//! Eigen-spectrum sweeps, avoided crossings and one-port reflection spectra.
//!
//! Transition frequencies are measured from the ground state. Photonic
//! weights are overlaps with the bare single-excitation states of each
//! factor, so they sum to at most one over any set of eigenstates.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{solve_phi_sq_for_frequency, solve_phi_tr_for_frequency, DeviceParams, FluxBias};
use crate::error::{Error, Result};
use crate::estimate::{fit_lorentzians, LorentzianFit};
use crate::hamiltonian::{assemble_device, TransmonCache};
use crate::operators::{self, OperatorMatrix, SpaceLayout, CPW, DQD, SQUID, TRANSMON};
use crate::output::CsvTable;

/// Default number of points in a probe-frequency grid.
pub const DEFAULT_PROBE_POINTS: usize = 2001;

const OVERLAP_THRESHOLD: f64 = 0.5;

/// Named sweep axis with its sample values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub name: String,
    pub values: Vec<f64>,
}

impl SweepAxis {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("sweep axis has no points".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("sweep axis contains non-finite values".into()));
        }
        Ok(Self { name: name.into(), values })
    }

    /// `points` evenly spaced values from `start` to `stop` inclusive.
    pub fn linspace(name: impl Into<String>, start: f64, stop: f64, points: usize) -> Result<Self> {
        Self::new(name, uniform_grid(start, stop, points)?)
    }
}

/// Evenly spaced, strictly increasing grid.
pub fn uniform_grid(start: f64, stop: f64, points: usize) -> Result<Vec<f64>> {
    if !start.is_finite() || !stop.is_finite() {
        return Err(Error::InvalidArgument("grid bounds must be finite".into()));
    }
    if points < 2 || stop <= start {
        return Err(Error::InvalidArgument(format!(
            "empty grid: need start < stop and >= 2 points (got {start}..{stop}, {points})"
        )));
    }
    let n = (points - 1) as f64;
    Ok((0..points).map(|i| start + (stop - start) * i as f64 / n).collect())
}

/// One excitation out of the ground state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// GHz.
    pub frequency: f64,
    pub weight_sq: f64,
    pub weight_50: f64,
    pub weight_tr: f64,
    pub weight_dqd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis_value: f64,
    /// Transitions in branch order (tracked across the sweep).
    pub transitions: Vec<Transition>,
    pub error: Option<String>,
}

impl SweepPoint {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: String,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn axis_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.axis_value).collect()
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| !p.is_ok()).count()
    }

    /// Frequencies of one branch; failed points are skipped.
    pub fn branch(&self, k: usize) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.transitions.get(k).map(|t| (p.axis_value, t.frequency)))
            .collect()
    }

    pub fn to_csv(&self) -> CsvTable {
        let n = self.points.iter().map(|p| p.transitions.len()).max().unwrap_or(0);
        let mut header = vec![self.axis.clone()];
        for k in 1..=n {
            header.push(format!("transition_{k}_freq_ghz"));
            header.push(format!("transition_{k}_weight_sq"));
            header.push(format!("transition_{k}_weight_50"));
        }
        let mut t = CsvTable::new(header);
        for p in &self.points {
            let mut row = vec![p.axis_value];
            for tr in &p.transitions {
                row.extend([tr.frequency, tr.weight_sq, tr.weight_50]);
            }
            t.push_floats(&row);
        }
        t
    }
}

/// Index of each factor's bare single-excitation state on `layout`.
fn single_excitation_indices(layout: &SpaceLayout) -> [Option<usize>; 4] {
    let vac: Vec<usize> = layout.labels().iter().map(|l| if l == DQD { 1 } else { 0 }).collect();
    let excite = |label: &str| {
        let pos = layout.position(label)?;
        let mut local = vac.clone();
        local[pos] = if label == DQD { 0 } else { 1 };
        layout.basis_index(&local).ok()
    };
    [excite(SQUID), excite(CPW), excite(TRANSMON), excite(DQD)]
}

struct RawPoint {
    freqs: Vec<f64>,
    weights: Vec<[f64; 4]>,
    vectors: DMatrix<Complex64>,
}

fn diagonalize_point(h: &OperatorMatrix, candidates: usize) -> Result<RawPoint> {
    let layout = h.layout();
    let n = h.dim();
    if n < 2 {
        return Err(Error::InvalidDimension("spectrum needs at least two states".into()));
    }
    let eig = h.eigh()?;
    let m = candidates.min(n - 1);
    let idx = single_excitation_indices(layout);
    let e0 = eig.values[0];
    let mut freqs = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for k in 1..=m {
        freqs.push(eig.values[k] - e0);
        let w = idx.map(|i| i.map_or(0.0, |i| eig.vectors[(i, k)].norm_sqr()));
        weights.push(w);
    }
    let vectors = eig.vectors.columns(1, m).into_owned();
    Ok(RawPoint { freqs, weights, vectors })
}

/// Map branch slots to candidate columns of `cur` by maximal overlap with
/// the previous branch vectors, falling back to frequency order.
fn assign_branches(prev: &DMatrix<Complex64>, cur: &RawPoint, n: usize) -> Vec<usize> {
    let m = cur.freqs.len();
    let overlaps = prev.adjoint() * &cur.vectors;
    let mut pairs = Vec::new();
    for b in 0..prev.ncols() {
        for c in 0..m {
            let ov = overlaps[(b, c)].norm_sqr();
            if ov >= OVERLAP_THRESHOLD {
                pairs.push((ov, b, c));
            }
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut slot: Vec<Option<usize>> = vec![None; n];
    let mut taken = vec![false; m];
    for (_, b, c) in pairs {
        if slot[b].is_none() && !taken[c] {
            slot[b] = Some(c);
            taken[c] = true;
        }
    }
    let mut free = (0..m).filter(|&c| !taken[c]);
    slot.into_iter().map(|s| s.unwrap_or_else(|| free.next().expect("enough candidates"))).collect()
}

/// Diagonalize `build(x)` at every axis value and emit the lowest
/// `n_transitions` transitions with photonic weights, tracked by
/// eigenvector overlap. Points run in parallel; failures are recorded per
/// point and the sweep continues.
pub fn sweep_spectrum<F>(axis: &SweepAxis, n_transitions: usize, build: F) -> Result<SweepResult>
where
    F: Fn(f64) -> Result<OperatorMatrix> + Sync,
{
    if n_transitions == 0 {
        return Err(Error::InvalidArgument("n_transitions must be >= 1".into()));
    }
    let candidates = 2 * n_transitions + 2;
    let raw: Vec<Result<RawPoint>> =
        axis.values.par_iter().map(|&x| build(x).and_then(|h| diagonalize_point(&h, candidates))).collect();

    let mut points = Vec::with_capacity(raw.len());
    let mut prev: Option<DMatrix<Complex64>> = None;
    for (&x, r) in axis.values.iter().zip(raw) {
        match r {
            Ok(rp) => {
                let n = n_transitions.min(rp.freqs.len());
                let order: Vec<usize> = match &prev {
                    Some(pv) if pv.ncols() == n && pv.nrows() == rp.vectors.nrows() => assign_branches(pv, &rp, n),
                    _ => (0..n).collect(),
                };
                let transitions = order
                    .iter()
                    .map(|&c| {
                        let [sq, c50, tr, dqd] = rp.weights[c];
                        Transition { frequency: rp.freqs[c], weight_sq: sq, weight_50: c50, weight_tr: tr, weight_dqd: dqd }
                    })
                    .collect();
                let cols: Vec<_> = order.iter().map(|&c| rp.vectors.column(c)).collect();
                prev = Some(DMatrix::from_columns(&cols));
                points.push(SweepPoint { axis_value: x, transitions, error: None });
            }
            Err(e) => points.push(SweepPoint { axis_value: x, transitions: Vec::new(), error: Some(e.to_string()) }),
        }
    }
    Ok(SweepResult { axis: axis.name.clone(), points })
}

/// Spectrum of a single Hamiltonian, transitions in frequency order.
pub fn spectrum_point(h: &OperatorMatrix, n_transitions: usize) -> Result<SweepPoint> {
    let rp = diagonalize_point(h, n_transitions)?;
    let transitions = rp
        .freqs
        .iter()
        .zip(&rp.weights)
        .map(|(&f, w)| Transition { frequency: f, weight_sq: w[0], weight_50: w[1], weight_tr: w[2], weight_dqd: w[3] })
        .collect();
    Ok(SweepPoint { axis_value: 0.0, transitions, error: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvoidedCrossing {
    /// Axis value of the minimal gap.
    pub location: f64,
    pub gap_mhz: f64,
    pub branches: (usize, usize),
}

/// Minimal gap between two tracked branches over the whole sweep.
pub fn find_avoided_crossing(sweep: &SweepResult, a: usize, b: usize) -> Result<AvoidedCrossing> {
    find_avoided_crossing_within(sweep, a, b, f64::NEG_INFINITY, f64::INFINITY)
}

/// Minimal gap between branches `a` and `b` restricted to axis values in
/// `[lo, hi]`, refined by a parabola through gap² at the three points
/// around the grid minimum.
pub fn find_avoided_crossing_within(sweep: &SweepResult, a: usize, b: usize, lo: f64, hi: f64) -> Result<AvoidedCrossing> {
    if a == b {
        return Err(Error::InvalidArgument("branch pair must be distinct".into()));
    }
    let pts: Vec<(f64, f64)> = sweep
        .points
        .iter()
        .filter(|p| p.axis_value >= lo && p.axis_value <= hi)
        .filter_map(|p| {
            let (ta, tb) = (p.transitions.get(a)?, p.transitions.get(b)?);
            Some((p.axis_value, (ta.frequency - tb.frequency).powi(2)))
        })
        .collect();
    if pts.len() < 3 {
        return Err(Error::CrossingNotFound(format!("fewer than 3 usable points for branches ({a}, {b})")));
    }
    let k = (0..pts.len()).min_by(|&i, &j| pts[i].1.total_cmp(&pts[j].1)).unwrap();
    if k == 0 || k == pts.len() - 1 {
        return Err(Error::CrossingNotFound(format!(
            "gap between branches ({a}, {b}) is smallest at the edge of the range ({})",
            pts[k].0
        )));
    }
    let (x0, y0) = pts[k - 1];
    let (x1, y1) = pts[k];
    let (x2, y2) = pts[k + 1];
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    let (location, gap2) = if curv > 0.0 {
        let slope = d01 - curv * (x0 + x1);
        let xv = (-slope / (2.0 * curv)).clamp(x0, x2);
        let yv = y1 + (xv - x1) * (d01 + curv * (xv - x0));
        (xv, yv.min(y1))
    } else {
        (x1, y1)
    };
    Ok(AvoidedCrossing { location, gap_mhz: 1e3 * gap2.max(0.0).sqrt(), branches: (a, b) })
}

/// External and internal loss rates of one resonator (GHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorLoss {
    pub kappa_ext: f64,
    pub kappa_int: f64,
}

impl ResonatorLoss {
    pub fn new(kappa_ext: f64, kappa_int: f64) -> Result<Self> {
        let l = Self { kappa_ext, kappa_int };
        l.validate()?;
        Ok(l)
    }

    pub fn kappa_tot(&self) -> f64 {
        self.kappa_ext + self.kappa_int
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_ext >= 0.0 && self.kappa_int >= 0.0) {
            return Err(Error::InvalidArgument("resonator loss rates must be >= 0".into()));
        }
        if self.kappa_tot() <= 0.0 {
            return Err(Error::InvalidArgument("total resonator linewidth must be > 0".into()));
        }
        Ok(())
    }
}

/// Which resonator a reflection measurement probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resonator {
    Squid,
    Cpw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionSpec {
    /// Probe frequencies (GHz), strictly increasing.
    pub probe_grid: Vec<f64>,
    pub squid: ResonatorLoss,
    pub cpw: ResonatorLoss,
    /// Phase between the two resonator responses in the multiplexed trace (rad).
    pub multiplex_phase: f64,
}

impl ReflectionSpec {
    pub fn validate(&self) -> Result<()> {
        self.squid.validate()?;
        self.cpw.validate()?;
        if self.probe_grid.is_empty() || self.probe_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("probe grid must be non-empty and strictly increasing".into()));
        }
        Ok(())
    }

    pub fn loss(&self, r: Resonator) -> ResonatorLoss {
        match r {
            Resonator::Squid => self.squid,
            Resonator::Cpw => self.cpw,
        }
    }
}

/// One-port linear response of transitions `(frequency, weight)`:
/// S11 = 1 − Σ κ_ext w / (i(f − f_p) + κ_tot/2).
pub fn one_port_s11(lines: &[(f64, f64)], probe: &[f64], loss: ResonatorLoss) -> Result<Vec<Complex64>> {
    loss.validate()?;
    let half = 0.5 * loss.kappa_tot();
    Ok(probe
        .iter()
        .map(|&fp| {
            let mut s = Complex64::new(1.0, 0.0);
            for &(f, w) in lines {
                s -= loss.kappa_ext * w / Complex64::new(half, f - fp);
            }
            s
        })
        .collect())
}

/// Reflection off `resonator` given the transitions of one sweep point.
pub fn reflection_s11(spec: &ReflectionSpec, point: &SweepPoint, resonator: Resonator) -> Result<Vec<Complex64>> {
    spec.validate()?;
    let lines: Vec<(f64, f64)> = point
        .transitions
        .iter()
        .map(|t| {
            let w = match resonator {
                Resonator::Squid => t.weight_sq,
                Resonator::Cpw => t.weight_50,
            };
            (t.frequency, w)
        })
        .collect();
    one_port_s11(&lines, &spec.probe_grid, spec.loss(resonator))
}

/// |S_sq + e^{iφ} S_50| pointwise.
pub fn multiplexed_response(s_sq: &[Complex64], s_50: &[Complex64], phi: f64) -> Result<Vec<f64>> {
    if s_sq.len() != s_50.len() {
        return Err(Error::GridMismatch(format!("{} vs {} probe points", s_sq.len(), s_50.len())));
    }
    let rot = Complex64::from_polar(1.0, phi);
    Ok(s_sq.iter().zip(s_50).map(|(&a, &b)| (a + rot * b).norm()).collect())
}

/// Reflection trace at a resonant bias with its two-Lorentzian fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VacuumRabiTrace {
    pub probe: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub fit: LorentzianFit,
    /// Dip separation (GHz); zero when the doublet is not resolved.
    pub splitting: f64,
    /// Mean fitted FWHM (GHz).
    pub linewidth: f64,
    pub resolved: bool,
}

/// Simulate |S11| of `resonator` for Hamiltonian `h` and fit two Lorentzians.
pub fn vacuum_rabi_trace(
    h: &OperatorMatrix,
    spec: &ReflectionSpec,
    resonator: Resonator,
    n_transitions: usize,
) -> Result<VacuumRabiTrace> {
    let point = spectrum_point(h, n_transitions)?;
    let s = reflection_s11(spec, &point, resonator)?;
    let magnitude: Vec<f64> = s.iter().map(|z| z.norm()).collect();
    let fit = fit_lorentzians(&spec.probe_grid, &magnitude, 2)?;
    let dmax = fit.depths.iter().cloned().fold(0.0, f64::max);
    let dmin = fit.depths.iter().cloned().fold(f64::INFINITY, f64::min);
    let resolved = !fit.ill_conditioned && dmin > 0.05 * dmax;
    let splitting = if resolved { (fit.centers[1] - fit.centers[0]).abs() } else { 0.0 };
    let linewidth = fit.widths.iter().sum::<f64>() / fit.widths.len() as f64;
    Ok(VacuumRabiTrace { probe: spec.probe_grid.clone(), magnitude, fit, splitting, linewidth, resolved })
}

/// Flux bias that puts the transmon on resonance with the array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonResonance {
    pub bias: FluxBias,
    pub crossing: AvoidedCrossing,
}

/// Fix Φ_Sq so the bare array sits at `omega_r_sq`, then scan Φ_tr around
/// the asymptotic resonance estimate (± `half_window` Φ0) for the minimal
/// gap between the two lowest transitions.
pub fn tune_transmon_to_array(
    device: &DeviceParams,
    omega_r_sq: f64,
    layout: &SpaceLayout,
    half_window: f64,
    points: usize,
    cache: &TransmonCache,
) -> Result<TransmonResonance> {
    let phi_sq = solve_phi_sq_for_frequency(&device.squid, omega_r_sq)?;
    let guess = solve_phi_tr_for_frequency(&device.transmon, phi_sq, omega_r_sq)?;
    let axis = SweepAxis::linspace("phi_tr", guess - half_window, guess + half_window, points)?;
    let sweep = sweep_spectrum(&axis, 2, |phi| {
        Ok(assemble_device(device, &FluxBias::new(phi_sq, phi), &device.dqd, layout, cache)?.h)
    })?;
    let crossing = find_avoided_crossing(&sweep, 0, 1)?;
    Ok(TransmonResonance { bias: FluxBias::new(phi_sq, crossing.location), crossing })
}

/// Hamiltonian of a two-level crossing σ₊σ₋ ω_q + a†a ω_r + g(σ₊a + σ₋a†)
/// on a DQD × resonator layout, useful as an analytic reference.
pub fn jaynes_cummings(omega_q: f64, omega_r: f64, g: f64, n_r: usize) -> Result<OperatorMatrix> {
    let layout = SpaceLayout::new(vec![2, n_r], vec![DQD, SQUID])?;
    let sp = operators::embed(&operators::pauli(operators::Pauli::Plus), DQD, &layout)?;
    let sm = operators::embed(&operators::pauli(operators::Pauli::Minus), DQD, &layout)?;
    let a = operators::embed(&operators::annihilation(n_r)?, SQUID, &layout)?;
    let ad = a.adjoint();
    let h = (&sp * &sm).scale(omega_q) + (&ad * &a).scale(omega_r) + ((&sp * &a) + (&sm * &ad)).scale(g);
    Ok(h)
}
