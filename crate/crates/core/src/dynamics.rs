//! Lindblad dynamics of the dispersive two-qubit exchange model and the
//! flux-pulse chevron experiment.
//!
//! Hamiltonians are in GHz and multiplied by 2π internally; times in ns;
//! collapse rates in 1/ns. Density matrices are vectorized column-major, so
//! vec(AρB) = (Bᵀ ⊗ A) vec(ρ).

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{self, eigh, Pauli, SpaceLayout, DQD, TRANSMON};

/// Default upper bound on the RK4 step (ns).
pub const DEFAULT_MAX_STEP: f64 = 0.05;
/// Trace drift that aborts an integration.
pub const TRACE_TOLERANCE: f64 = 1e-6;
/// Most negative eigenvalue tolerated in ρ.
pub const POSITIVITY_TOLERANCE: f64 = -1e-7;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Time-dependent scalar multiplying a drive operator.
pub type Coefficient = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Qubit coherence parameters of the exchange experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceRates {
    /// Transmon relaxation time (ns).
    pub t1_tr: f64,
    /// Transmon Ramsey time (ns).
    pub t2star_tr: f64,
    /// DQD spectroscopic half-width γ2/2π (GHz).
    pub gamma2_dqd: f64,
}

impl Default for DecoherenceRates {
    fn default() -> Self {
        Self { t1_tr: 185.0, t2star_tr: 127.0, gamma2_dqd: 0.0026 }
    }
}

impl DecoherenceRates {
    /// No decay or dephasing.
    pub fn none() -> Self {
        Self { t1_tr: f64::INFINITY, t2star_tr: f64::INFINITY, gamma2_dqd: 0.0 }
    }

    /// Transmon pure dephasing Γφ = 1/T2* − 1/(2T1) (1/ns).
    pub fn pure_dephasing(&self) -> f64 {
        1.0 / self.t2star_tr - 0.5 / self.t1_tr
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1_tr > 0.0 && self.t2star_tr > 0.0 && self.gamma2_dqd >= 0.0) {
            return Err(Error::InvalidArgument("T1, T2* must be > 0 and gamma2 >= 0".into()));
        }
        if self.pure_dephasing() < -1e-15 {
            return Err(Error::InvalidArgument(format!(
                "T2* = {} ns exceeds 2·T1 = {} ns (negative pure dephasing)",
                self.t2star_tr,
                2.0 * self.t1_tr
            )));
        }
        Ok(())
    }
}

/// Master-equation generator: H(t) = H0 + Σ c_k(t) V_k with collapse
/// operators L_j at rates r_j (dissipator r_j D[L_j]).
#[derive(Clone)]
pub struct LindbladModel {
    pub layout: SpaceLayout,
    pub h0: DMatrix<Complex64>,
    pub drives: Vec<(DMatrix<Complex64>, Coefficient)>,
    pub collapse: Vec<(DMatrix<Complex64>, f64)>,
}

impl std::fmt::Debug for LindbladModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LindbladModel")
            .field("layout", &self.layout)
            .field("h0", &self.h0)
            .field("drives", &self.drives.len())
            .field("collapse", &self.collapse)
            .finish()
    }
}

impl LindbladModel {
    pub fn new(layout: SpaceLayout, h0: DMatrix<Complex64>) -> Result<Self> {
        let n = layout.total_dim();
        if h0.nrows() != n || h0.ncols() != n {
            return Err(Error::InvalidDimension(format!("H0 is {}x{}, layout needs {n}", h0.nrows(), h0.ncols())));
        }
        Ok(Self { layout, h0, drives: Vec::new(), collapse: Vec::new() })
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn with_drive(mut self, op: DMatrix<Complex64>, c: Coefficient) -> Result<Self> {
        self.check(&op)?;
        self.drives.push((op, c));
        Ok(self)
    }

    pub fn with_collapse(mut self, op: DMatrix<Complex64>, rate: f64) -> Result<Self> {
        self.check(&op)?;
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::InvalidArgument(format!("collapse rate must be finite and >= 0, got {rate}")));
        }
        if rate > 0.0 {
            self.collapse.push((op, rate));
        }
        Ok(self)
    }

    fn check(&self, op: &DMatrix<Complex64>) -> Result<()> {
        let n = self.dim();
        if op.nrows() != n || op.ncols() != n {
            return Err(Error::InvalidDimension(format!("operator is {}x{}, expected {n}", op.nrows(), op.ncols())));
        }
        Ok(())
    }

    /// Hamiltonian at time `t` (GHz).
    pub fn hamiltonian(&self, t: f64) -> DMatrix<Complex64> {
        let mut h = self.h0.clone();
        for (v, c) in &self.drives {
            h += v * Complex64::new(c(t), 0.0);
        }
        h
    }
}

/// Compressed-row sparse complex matrix.
#[derive(Debug, Clone)]
struct Csr {
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<Complex64>,
}

impl Csr {
    fn from_dense(m: &DMatrix<Complex64>) -> Self {
        let mut row_ptr = vec![0];
        let (mut col, mut val) = (Vec::new(), Vec::new());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let z = m[(r, c)];
                if z.norm_sqr() > 0.0 {
                    col.push(c);
                    val.push(z);
                }
            }
            row_ptr.push(col.len());
        }
        Self { row_ptr, col, val }
    }

    /// out += s · A x
    fn mul_add(&self, x: &[Complex64], s: f64, out: &mut [Complex64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.val[k] * x[self.col[k]];
            }
            *o += acc * s;
        }
    }
}

fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

/// −2πi[H, ·] as a superoperator.
fn commutator_super(h: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = h.nrows();
    let id = DMatrix::<Complex64>::identity(n, n);
    (kron(&id, h) - kron(&h.transpose(), &id)) * Complex64::new(0.0, -TWO_PI)
}

fn dissipator_super(l: &DMatrix<Complex64>, rate: f64) -> DMatrix<Complex64> {
    let n = l.nrows();
    let id = DMatrix::<Complex64>::identity(n, n);
    let ldl = l.adjoint() * l;
    let lbar = l.map(|z| z.conj());
    let half = Complex64::new(0.5, 0.0);
    (kron(&lbar, l) - kron(&id, &ldl) * half - kron(&ldl.transpose(), &id) * half) * Complex64::new(rate, 0.0)
}

/// Vectorized generator L0 + Σ c_k(t) L_k.
struct Liouvillian {
    static_part: Csr,
    drives: Vec<(Csr, Coefficient)>,
}

impl Liouvillian {
    fn new(model: &LindbladModel) -> Self {
        let mut l0 = commutator_super(&model.h0);
        for (op, rate) in &model.collapse {
            l0 += dissipator_super(op, *rate);
        }
        let drives = model.drives.iter().map(|(v, c)| (Csr::from_dense(&commutator_super(v)), c.clone())).collect();
        Self { static_part: Csr::from_dense(&l0), drives }
    }

    fn apply(&self, t: f64, x: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
        self.static_part.mul_add(x, 1.0, out);
        for (l, c) in &self.drives {
            let s = c(t);
            if s != 0.0 {
                l.mul_add(x, s, out);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Largest RK4 step (ns).
    pub max_step: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { max_step: DEFAULT_MAX_STEP }
    }
}

/// States at the requested times plus integrity diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DMatrix<Complex64>>,
    pub max_trace_error: f64,
    pub min_eigenvalue: f64,
    pub max_hermiticity_error: f64,
    pub steps: usize,
}

fn hermiticity_error(m: &DMatrix<Complex64>) -> f64 {
    let d = m - m.adjoint();
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Validate ρ0 as a density matrix on `n` levels.
pub fn check_density_matrix(rho: &DMatrix<Complex64>, n: usize) -> Result<()> {
    if rho.nrows() != n || rho.ncols() != n {
        return Err(Error::InvalidDimension(format!("rho is {}x{}, expected {n}", rho.nrows(), rho.ncols())));
    }
    if hermiticity_error(rho) > 1e-10 {
        return Err(Error::InvalidArgument("initial state is not Hermitian".into()));
    }
    if (rho.trace().re - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument("initial state does not have unit trace".into()));
    }
    let min = eigh(rho)?.values[0];
    if min < POSITIVITY_TOLERANCE {
        return Err(Error::InvalidArgument(format!("initial state has negative eigenvalue {min:.3e}")));
    }
    Ok(())
}

/// Integrate the master equation from ρ0 at `t_grid[0]` and return ρ at
/// every grid time. Fixed-step RK4 with steps ≤ `opts.max_step`; each
/// returned state is checked for trace drift and positivity.
pub fn evolve(model: &LindbladModel, rho0: &DMatrix<Complex64>, t_grid: &[f64], opts: &EvolveOptions) -> Result<Trajectory> {
    let n = model.dim();
    check_density_matrix(rho0, n)?;
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("t_grid must be non-empty and strictly increasing".into()));
    }
    if !(opts.max_step > 0.0) {
        return Err(Error::InvalidArgument("max_step must be > 0".into()));
    }
    let liou = Liouvillian::new(model);
    let dim = n * n;
    let mut v: Vec<Complex64> = rho0.as_slice().to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![Complex64::default(); dim], vec![Complex64::default(); dim], vec![Complex64::default(); dim], vec![Complex64::default(); dim], vec![Complex64::default(); dim]);

    let mut traj = Trajectory {
        times: Vec::with_capacity(t_grid.len()),
        states: Vec::with_capacity(t_grid.len()),
        max_trace_error: 0.0,
        min_eigenvalue: f64::INFINITY,
        max_hermiticity_error: 0.0,
        steps: 0,
    };
    let mut t = t_grid[0];
    for &target in t_grid {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / opts.max_step).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for s in 0..steps {
                let t0 = t + h * s as f64;
                liou.apply(t0, &v, &mut k1);
                for i in 0..dim {
                    tmp[i] = v[i] + k1[i] * (0.5 * h);
                }
                liou.apply(t0 + 0.5 * h, &tmp, &mut k2);
                for i in 0..dim {
                    tmp[i] = v[i] + k2[i] * (0.5 * h);
                }
                liou.apply(t0 + 0.5 * h, &tmp, &mut k3);
                for i in 0..dim {
                    tmp[i] = v[i] + k3[i] * h;
                }
                liou.apply(t0 + h, &tmp, &mut k4);
                for i in 0..dim {
                    v[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
                }
            }
            traj.steps += steps;
            t = target;
        }
        let rho = DMatrix::from_column_slice(n, n, &v);
        let drift = (rho.trace() - Complex64::new(1.0, 0.0)).norm();
        if drift > TRACE_TOLERANCE {
            return Err(Error::StepSize { drift, time: target });
        }
        let herm = hermiticity_error(&rho);
        let sym = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
        let min_eig = eigh(&sym)?.values[0];
        if min_eig < POSITIVITY_TOLERANCE {
            return Err(Error::Integrator { min_eig, time: target });
        }
        traj.max_trace_error = traj.max_trace_error.max(drift);
        traj.max_hermiticity_error = traj.max_hermiticity_error.max(herm);
        traj.min_eigenvalue = traj.min_eigenvalue.min(min_eig);
        traj.times.push(target);
        traj.states.push(rho);
    }
    Ok(traj)
}

/// Layout of the two-qubit reduction: DQD then transmon, each with local
/// index 0 = excited, 1 = ground.
pub fn two_qubit_layout() -> SpaceLayout {
    SpaceLayout::new(vec![2, 2], vec![DQD, TRANSMON]).expect("valid layout")
}

fn local(p: Pauli, label: &str, layout: &SpaceLayout) -> DMatrix<Complex64> {
    operators::embed(&operators::pauli(p), label, layout).expect("label in layout").into_matrix()
}

/// Projector on the transmon excited state.
pub fn transmon_excited_projector() -> DMatrix<Complex64> {
    let l = two_qubit_layout();
    local(Pauli::Plus, TRANSMON, &l) * local(Pauli::Minus, TRANSMON, &l)
}

/// Pure product state |dqd, tr⟩⟨dqd, tr| with local indices (0 = excited).
pub fn product_state(dqd: usize, tr: usize) -> Result<DMatrix<Complex64>> {
    let l = two_qubit_layout();
    let i = l.basis_index(&[dqd, tr])?;
    let mut rho = DMatrix::zeros(4, 4);
    rho[(i, i)] = Complex64::new(1.0, 0.0);
    Ok(rho)
}

/// Dispersive exchange model in the frame rotating at ω_DQD:
/// H = Δ(t)|e⟩⟨e|_tr + J(σ₊σ₋ + h.c.), J = `two_j`/2, with transmon decay
/// √(1/T1)σ₋, transmon dephasing √(Γφ/2)σz and DQD dephasing √(πγ2)σz.
pub fn exchange_model(two_j: f64, rates: &DecoherenceRates, detuning: Coefficient) -> Result<LindbladModel> {
    rates.validate()?;
    let l = two_qubit_layout();
    let exchange = local(Pauli::Plus, TRANSMON, &l) * local(Pauli::Minus, DQD, &l)
        + local(Pauli::Minus, TRANSMON, &l) * local(Pauli::Plus, DQD, &l);
    let h0 = exchange * Complex64::new(0.5 * two_j, 0.0);
    LindbladModel::new(l.clone(), h0)?
        .with_drive(transmon_excited_projector(), detuning)?
        .with_collapse(local(Pauli::Minus, TRANSMON, &l), 1.0 / rates.t1_tr)?
        .with_collapse(local(Pauli::Z, TRANSMON, &l), 0.5 * rates.pure_dephasing().max(0.0))?
        .with_collapse(local(Pauli::Z, DQD, &l), std::f64::consts::PI * rates.gamma2_dqd)
}

/// Normalized pulse amplitude → transmon frequency (GHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeMap {
    /// Amplitude at which the transmon is resonant with the DQD.
    pub resonant_amplitude: f64,
    pub resonant_frequency: f64,
    /// GHz per unit amplitude.
    pub slope: f64,
}

impl AmplitudeMap {
    /// Linear map through (0.6, ω_DQD) whose [0, 1] range spans the
    /// resonance ± 4·(2J) on the upper side.
    pub fn calibrated(omega_dqd: f64, two_j: f64) -> Self {
        let resonant_amplitude = 0.6;
        Self { resonant_amplitude, resonant_frequency: omega_dqd, slope: 4.0 * two_j / (1.0 - resonant_amplitude) }
    }

    pub fn frequency(&self, a: f64) -> f64 {
        self.resonant_frequency + self.slope * (a - self.resonant_amplitude)
    }

    /// Amplitude giving transmon–DQD detuning `delta` (GHz).
    pub fn amplitude_for_detuning(&self, delta: f64) -> f64 {
        self.resonant_amplitude + delta / self.slope
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseProtocol {
    pub amplitude: f64,
    /// Plateau length Δτ (ns).
    pub plateau: f64,
    /// Gaussian filter σ (ns).
    pub filter_sigma: f64,
    /// Idle time between the π-pulse at t = 0 and the flux-pulse edge (ns).
    pub prep_offset: f64,
    pub map: AmplitudeMap,
    /// DQD frequency defining the rotating frame (GHz).
    pub omega_dqd: f64,
}

impl PulseProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(self.plateau >= 0.0) || !(self.filter_sigma > 0.0) || !(self.prep_offset >= 0.0) {
            return Err(Error::InvalidArgument("need plateau >= 0, filter_sigma > 0, prep_offset >= 0".into()));
        }
        Ok(())
    }

    pub fn t_on(&self) -> f64 {
        self.prep_offset
    }

    pub fn t_off(&self) -> f64 {
        self.prep_offset + self.plateau
    }

    /// Readout instant, after the filtered trailing edge has settled.
    pub fn readout_time(&self) -> f64 {
        self.t_off() + 5.0 * self.filter_sigma
    }

    /// Square plateau convolved with a unit-area Gaussian, in [0, 1].
    pub fn envelope(&self, t: f64) -> f64 {
        let k = 1.0 / (std::f64::consts::SQRT_2 * self.filter_sigma);
        0.5 * (libm::erf((t - self.t_on()) * k) - libm::erf((t - self.t_off()) * k))
    }

    /// Transmon–DQD detuning (GHz).
    pub fn detuning(&self, t: f64) -> f64 {
        self.map.frequency(self.amplitude * self.envelope(t)) - self.omega_dqd
    }
}

/// Detuning of the filtered flux pulse at each time of `t_grid`.
pub fn shape_flux_pulse(p: &PulseProtocol, t_grid: &[f64]) -> Vec<f64> {
    t_grid.iter().map(|&t| p.detuning(t)).collect()
}

/// Fixed inputs of a chevron map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChevronSetup {
    pub two_j: f64,
    pub rates: DecoherenceRates,
    pub omega_dqd: f64,
    pub filter_sigma: f64,
    pub prep_offset: f64,
    pub map: AmplitudeMap,
    pub max_step: f64,
}

impl Default for ChevronSetup {
    fn default() -> Self {
        let (two_j, omega_dqd) = (0.0216, 3.660);
        Self {
            two_j,
            rates: DecoherenceRates::default(),
            omega_dqd,
            filter_sigma: 3.0,
            prep_offset: 23.0,
            map: AmplitudeMap::calibrated(omega_dqd, two_j),
            max_step: DEFAULT_MAX_STEP,
        }
    }
}

impl ChevronSetup {
    pub fn protocol(&self, amplitude: f64, plateau: f64) -> PulseProtocol {
        PulseProtocol {
            amplitude,
            plateau,
            filter_sigma: self.filter_sigma,
            prep_offset: self.prep_offset,
            map: self.map,
            omega_dqd: self.omega_dqd,
        }
    }

    fn model(&self, p: PulseProtocol) -> Result<LindbladModel> {
        exchange_model(self.two_j, &self.rates, Arc::new(move |t| p.detuning(t)))
    }

    /// ρ(t) for one cell: transmon excited, DQD ground at t = 0.
    pub fn trajectory(&self, amplitude: f64, plateau: f64, t_grid: &[f64]) -> Result<Trajectory> {
        let p = self.protocol(amplitude, plateau);
        p.validate()?;
        let rho0 = product_state(1, 0)?;
        evolve(&self.model(p)?, &rho0, t_grid, &EvolveOptions { max_step: self.max_step })
    }

    /// Transmon excited population at readout.
    pub fn cell(&self, amplitude: f64, plateau: f64) -> Result<CellResult> {
        let p = self.protocol(amplitude, plateau);
        let traj = self.trajectory(amplitude, plateau, &[0.0, p.readout_time()])?;
        let rho = traj.states.last().expect("two grid points");
        let pe = (transmon_excited_projector() * rho).trace().re;
        Ok(CellResult {
            population: pe,
            trace_error: traj.max_trace_error,
            min_eigenvalue: traj.min_eigenvalue,
            hermiticity_error: traj.max_hermiticity_error,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub population: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
    pub hermiticity_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChevronResult {
    pub amplitudes: Vec<f64>,
    pub plateaus: Vec<f64>,
    /// `population[i][j]` at amplitude i, plateau j.
    pub population: Vec<Vec<f64>>,
    pub max_trace_error: f64,
    pub min_eigenvalue: f64,
    pub max_hermiticity_error: f64,
}

impl ChevronResult {
    /// Population versus plateau at amplitude index `i`.
    pub fn column(&self, i: usize) -> &[f64] {
        &self.population[i]
    }
}

/// Evaluate every (amplitude, plateau) cell in parallel.
pub fn run_chevron(setup: &ChevronSetup, amplitudes: &[f64], plateaus: &[f64]) -> Result<ChevronResult> {
    if amplitudes.is_empty() || plateaus.is_empty() {
        return Err(Error::InvalidArgument("chevron grid is empty".into()));
    }
    let cells: Vec<(usize, usize)> =
        (0..amplitudes.len()).flat_map(|i| (0..plateaus.len()).map(move |j| (i, j))).collect();
    let results: Vec<CellResult> =
        cells.par_iter().map(|&(i, j)| setup.cell(amplitudes[i], plateaus[j])).collect::<Result<_>>()?;
    let population = results.chunks(plateaus.len()).map(|row| row.iter().map(|c| c.population).collect()).collect();
    Ok(ChevronResult {
        amplitudes: amplitudes.to_vec(),
        plateaus: plateaus.to_vec(),
        population,
        max_trace_error: results.iter().map(|c| c.trace_error).fold(0.0, f64::max),
        min_eigenvalue: results.iter().map(|c| c.min_eigenvalue).fold(f64::INFINITY, f64::min),
        max_hermiticity_error: results.iter().map(|c| c.hermiticity_error).fold(0.0, f64::max),
    })
}

/// Purcell decay rate κ_tot·g²/Δ² (units of κ).
pub fn purcell_rate(g: f64, kappa_tot: f64, delta: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::DispersiveInvalid);
    }
    Ok(kappa_tot * g * g / (delta * delta))
}

/// tr ρ².
pub fn purity(rho: &DMatrix<Complex64>) -> f64 {
    (rho * rho).trace().re
}

/// Expectation value tr(Aρ).
pub fn expectation(a: &DMatrix<Complex64>, rho: &DMatrix<Complex64>) -> Complex64 {
    (a * rho).trace()
}
