//! Full system Hamiltonian: charge-basis transmon, DQD charge qubit, the two
//! resonator modes and their three couplings.
//!
//! The DQD–array coupling is rotating-wave, `g(σ⁻a† + σ⁺a)`, while both
//! transmon couplings keep the full `g·n_ij|i⟩⟨j|(a† + a)` form. Energies are
//! shifted so that the uncoupled ground configuration sits at zero.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::device::{
    coupling_dqd_sq, coupling_tr_50, coupling_tr_sq, dqd_frequency, josephson_energy, squid_array_frequency,
    DeviceParams, DqdParams, FluxBias, TransmonParams,
};
use crate::error::{Error, Result};
use crate::operators::{self, OperatorMatrix, Pauli, SpaceLayout, CPW, DQD, SQUID, TRANSMON};

pub const DEFAULT_CHARGE_CUTOFF: usize = 20;

/// Lowest transmon levels and Cooper-pair-number matrix elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmonSolution {
    /// Level frequencies referenced to the ground state (GHz).
    pub levels: Vec<f64>,
    /// `n_matrix[i][j] = ⟨i|n̂|j⟩`, phases fixed so that `n[i][i+1] > 0`.
    pub n_matrix: Vec<Vec<f64>>,
    pub e_c: f64,
    pub e_j: f64,
    pub n_g: f64,
}

impl TransmonSolution {
    pub fn omega_10(&self) -> f64 {
        self.levels[1]
    }

    /// (ω₂ − ω₁) − (ω₁ − ω₀).
    pub fn anharmonicity(&self) -> f64 {
        self.levels[2] - 2.0 * self.levels[1]
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }
}

/// Exact diagonalization of 4E_c(n̂ − n_g)² − E_J cos φ̂ in the charge basis
/// n ∈ [−N, N], keeping `p.n_levels` levels.
pub fn solve_transmon(p: &TransmonParams, e_j: f64, charge_cutoff: usize) -> Result<TransmonSolution> {
    if charge_cutoff < 10 {
        return Err(Error::Convergence(format!("charge cutoff {charge_cutoff} < 10")));
    }
    if !(p.e_c > 0.0) || !(e_j >= 0.0) {
        return Err(Error::InvalidArgument(format!("need e_c > 0 and e_j >= 0, got {} and {e_j}", p.e_c)));
    }
    let nl = p.n_levels;
    let dim = 2 * charge_cutoff + 1;
    if nl < 2 || nl > dim {
        return Err(Error::InvalidArgument(format!("cannot keep {nl} levels of a {dim}-state basis")));
    }
    let charge = |k: usize| k as f64 - charge_cutoff as f64;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..dim {
        h[(k, k)] = 4.0 * p.e_c * (charge(k) - p.n_g).powi(2);
        if k + 1 < dim {
            h[(k, k + 1)] = -0.5 * e_j;
            h[(k + 1, k)] = -0.5 * e_j;
        }
    }
    let eig = nalgebra::linalg::SymmetricEigen::try_new(h, 1e-14, 10_000)
        .ok_or_else(|| Error::Diagonalization("transmon charge-basis solver".into()))?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let band_edge = 4.0 * p.e_c * (charge_cutoff as f64 - p.n_g.abs()).powi(2);
    let top = eig.eigenvalues[order[nl - 1]];
    if top >= 0.99 * band_edge {
        return Err(Error::Convergence(format!(
            "level {} at {top:.4} GHz reaches the charge band edge {band_edge:.4} GHz",
            nl - 1
        )));
    }

    let mut vecs: Vec<Vec<f64>> =
        order[..nl].iter().map(|&c| (0..dim).map(|r| eig.eigenvectors[(r, c)]).collect()).collect();
    let n_elem = |a: &[f64], b: &[f64]| -> f64 { (0..dim).map(|k| a[k] * charge(k) * b[k]).sum() };
    for i in 1..nl {
        if n_elem(&vecs[i - 1], &vecs[i]) < 0.0 {
            vecs[i].iter_mut().for_each(|x| *x = -*x);
        }
    }
    let n_matrix = (0..nl).map(|i| (0..nl).map(|j| n_elem(&vecs[i], &vecs[j])).collect()).collect();
    let e0 = eig.eigenvalues[order[0]];
    let levels = order[..nl].iter().map(|&c| eig.eigenvalues[c] - e0).collect();
    Ok(TransmonSolution { levels, n_matrix, e_c: p.e_c, e_j, n_g: p.n_g })
}

/// Josephson energy at which the exact 0→1 transition equals `omega_10` (GHz).
pub fn solve_e_j_for_frequency(p: &TransmonParams, omega_10: f64, charge_cutoff: usize) -> Result<f64> {
    let f = |e_j: f64| -> Result<f64> { Ok(omega_10 - solve_transmon(p, e_j, charge_cutoff)?.omega_10()) };
    let (mut lo, mut hi) = (0.0, 1.0);
    if f(lo)? < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "transmon frequency {omega_10} GHz is below the E_J = 0 limit"
        )));
    }
    while f(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::InvalidArgument(format!("transmon frequency {omega_10} GHz unreachable")));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

type CacheKey = (u64, u64, u64, usize, usize);

/// Read-mostly memo of transmon solutions keyed by (E_c, E_J, n_g, cutoff, levels).
#[derive(Debug, Default)]
pub struct TransmonCache {
    map: RwLock<HashMap<CacheKey, Arc<TransmonSolution>>>,
}

impl TransmonCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Process-wide cache shared by all sweeps.
    pub fn global() -> &'static TransmonCache {
        static CACHE: OnceLock<TransmonCache> = OnceLock::new();
        CACHE.get_or_init(TransmonCache::new)
    }

    pub fn get_or_solve(&self, p: &TransmonParams, e_j: f64, cutoff: usize) -> Result<Arc<TransmonSolution>> {
        let key = (p.e_c.to_bits(), e_j.to_bits(), p.n_g.to_bits(), cutoff, p.n_levels);
        if let Some(s) = self.map.read().expect("transmon cache poisoned").get(&key) {
            return Ok(Arc::clone(s));
        }
        let sol = Arc::new(solve_transmon(p, e_j, cutoff)?);
        let mut w = self.map.write().expect("transmon cache poisoned");
        if w.len() > 100_000 {
            w.clear();
        }
        Ok(Arc::clone(w.entry(key).or_insert(sol)))
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("transmon cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Bare frequencies and couplings at one bias point (GHz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BareModel {
    pub omega_dqd: f64,
    pub omega_r_sq: f64,
    pub omega_r_50: f64,
    pub transmon: Arc<TransmonSolution>,
    pub g_dqd_sq: f64,
    pub g_tr_sq: f64,
    pub g_tr_50: f64,
}

impl BareModel {
    pub fn omega_tr(&self) -> f64 {
        self.transmon.omega_10()
    }

    pub fn without_couplings(&self) -> Self {
        Self { g_dqd_sq: 0.0, g_tr_sq: 0.0, g_tr_50: 0.0, ..self.clone() }
    }
}

/// Evaluate every flux law at `bias` with the DQD at `dqd`.
pub fn resolve_device(p: &DeviceParams, bias: &FluxBias, dqd: &DqdParams, cache: &TransmonCache) -> Result<BareModel> {
    p.validate()?;
    let e_j = josephson_energy(&p.transmon, bias);
    let transmon = cache.get_or_solve(&p.transmon, e_j, p.transmon.charge_cutoff)?;
    Ok(BareModel {
        omega_dqd: dqd_frequency(dqd),
        omega_r_sq: squid_array_frequency(&p.squid, bias),
        omega_r_50: p.coupling.omega_r50,
        transmon,
        g_dqd_sq: coupling_dqd_sq(&p.coupling, &p.squid, dqd, bias)?,
        g_tr_sq: coupling_tr_sq(&p.coupling, &p.squid, &p.transmon, bias),
        g_tr_50: coupling_tr_50(&p.coupling, &p.transmon, bias),
    })
}

/// Operating point given directly by its frequencies and couplings, as in
/// the tabulated parameter sets. The DQD coupling is the sweet-spot value
/// and is renormalized by 2t_c/ω_DQD away from δ = 0. A transmon flux
/// offset moves along the flux laws from the operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub two_tc: f64,
    pub delta: f64,
    pub omega_tr: f64,
    pub omega_r_sq: f64,
    pub omega_r_50: f64,
    pub g_tr_sq: f64,
    pub g_dqd_sq: f64,
    pub g_tr_50: f64,
    pub e_c: f64,
    pub omega_pl: f64,
    pub n_levels: usize,
    pub charge_cutoff: usize,
    /// Transmon flux displacement from the operating point (Φ0).
    pub phi_tr_offset: f64,
}

impl OperatingPoint {
    fn base(two_tc: f64, omega_tr: f64, omega_r_sq: f64, g_tr_sq: f64, g_dqd_sq: f64, g_tr_50: f64) -> Self {
        Self {
            two_tc,
            delta: 0.0,
            omega_tr,
            omega_r_sq,
            omega_r_50: 6.490,
            g_tr_sq,
            g_dqd_sq,
            g_tr_50,
            e_c: 0.243,
            omega_pl: 6.550,
            n_levels: 4,
            charge_cutoff: DEFAULT_CHARGE_CUTOFF,
            phi_tr_offset: 0.0,
        }
    }

    /// Three-body resonant configuration.
    pub fn table1() -> Self {
        Self::base(3.993, 4.150, 4.230, 0.166, 0.034, 0.098)
    }

    /// Dispersive configuration probed along the DQD detuning.
    pub fn table2() -> Self {
        Self::base(3.635, 3.695, 4.062, 0.128, 0.036, 0.093)
    }

    /// Dispersive configuration probed along the transmon flux.
    pub fn table3() -> Self {
        Self::base(3.638, 3.695, 4.062, 0.128, 0.036, 0.093)
    }

    /// DQD–array vacuum Rabi configuration with a far-detuned transmon.
    pub fn dqd_vacuum_rabi() -> Self {
        let dev = DeviceParams::default();
        let omega_tr = 1.720;
        let omega_r_sq = 4.089;
        let cos_tr = ((omega_tr + dev.transmon.e_c) / dev.transmon.plasma_frequency()).powi(2);
        let array = (dev.squid.omega0 / omega_r_sq).powi(2);
        let g_tr_sq = dev.coupling.g0_tr_sq * cos_tr.powf(0.25) / array.powf(0.25);
        let g_tr_50 = dev.coupling.g0_tr_50 * cos_tr.powf(0.25);
        Self::base(4.090, omega_tr, omega_r_sq, g_tr_sq, 0.033, g_tr_50)
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_phi_tr_offset(mut self, phi: f64) -> Self {
        self.phi_tr_offset = phi;
        self
    }

    fn transmon_params(&self) -> TransmonParams {
        TransmonParams {
            e_c: self.e_c,
            e_j0: self.omega_pl * self.omega_pl / (8.0 * self.e_c),
            omega_pl: Some(self.omega_pl),
            alpha: 0.0,
            n_g: 0.0,
            n_levels: self.n_levels,
            charge_cutoff: self.charge_cutoff,
        }
    }

    pub fn resolve(&self, cache: &TransmonCache) -> Result<BareModel> {
        let tp = self.transmon_params();
        let e_j_op = solve_e_j_for_frequency(&tp, self.omega_tr, self.charge_cutoff)?;
        let (e_j, flux_ratio) = if self.phi_tr_offset == 0.0 {
            (e_j_op, 1.0)
        } else {
            let e_j0 = tp.e_j0;
            if e_j_op > e_j0 {
                return Err(Error::InvalidArgument(format!(
                    "operating-point E_J {e_j_op:.4} exceeds E_J0 {e_j0:.4}; cannot place on flux law"
                )));
            }
            let cos_op = e_j_op / e_j0;
            let phase = cos_op.acos() + 2.0 * std::f64::consts::PI * self.phi_tr_offset;
            let cos_new = phase.cos().abs();
            (e_j0 * cos_new, cos_new / cos_op)
        };
        let transmon = cache.get_or_solve(&tp, e_j, self.charge_cutoff)?;
        let dqd = DqdParams { t_c: 0.5 * self.two_tc, delta: self.delta, gamma2: 0.0 };
        let omega_dqd = dqd_frequency(&dqd);
        if omega_dqd == 0.0 {
            return Err(Error::UndefinedMixing);
        }
        Ok(BareModel {
            omega_dqd,
            omega_r_sq: self.omega_r_sq,
            omega_r_50: self.omega_r_50,
            transmon,
            g_dqd_sq: self.g_dqd_sq * self.two_tc / omega_dqd,
            g_tr_sq: self.g_tr_sq * flux_ratio.powf(0.25),
            g_tr_50: self.g_tr_50 * flux_ratio.powf(0.25),
        })
    }
}

/// Assembled Hamiltonian with the scalars it was built from.
#[derive(Debug, Clone)]
pub struct SystemHamiltonian {
    pub h: OperatorMatrix,
    pub model: BareModel,
}

impl SystemHamiltonian {
    pub fn layout(&self) -> &SpaceLayout {
        self.h.layout()
    }

    /// Index of the uncoupled ground configuration (DQD in |−⟩, everything else in 0).
    pub fn vacuum_index(&self) -> usize {
        vacuum_index(self.layout())
    }
}

pub fn vacuum_index(layout: &SpaceLayout) -> usize {
    let local: Vec<usize> = layout.labels().iter().map(|l| if l == DQD { 1 } else { 0 }).collect();
    layout.basis_index(&local).expect("vacuum index within layout")
}

/// Kronecker product over the full layout of the given local operators,
/// identity on every other factor.
fn product_term(layout: &SpaceLayout, factors: &[(&str, DMatrix<f64>)]) -> DMatrix<f64> {
    let mut out = DMatrix::<f64>::from_element(1, 1, 1.0);
    for (label, &d) in layout.labels().iter().zip(layout.dims()) {
        let local = factors.iter().find(|(l, _)| l == label).map(|(_, m)| m.clone());
        let local = local.unwrap_or_else(|| DMatrix::identity(d, d));
        out = out.kronecker(&local);
    }
    out
}

fn real_local(op: &OperatorMatrix) -> DMatrix<f64> {
    op.matrix().map(|z| z.re)
}

/// Build the full Hamiltonian of `model` on `layout`. Factors absent from
/// the layout and their couplings are dropped.
pub fn assemble(model: &BareModel, layout: &SpaceLayout) -> Result<SystemHamiltonian> {
    let h = assemble_real(model, layout)?;
    let h = OperatorMatrix::new(layout.clone(), h.map(|x| Complex64::new(x, 0.0)))?;
    Ok(SystemHamiltonian { h, model: model.clone() })
}

/// Real-valued matrix of [`assemble`]; every term is real in the bare basis.
pub fn assemble_real(model: &BareModel, layout: &SpaceLayout) -> Result<DMatrix<f64>> {
    let n = layout.total_dim();
    let mut h = DMatrix::<f64>::zeros(n, n);
    let has = |l: &str| layout.contains(l);

    if let Some(d) = layout.dim_of(DQD) {
        if d != 2 {
            return Err(Error::InvalidDimension(format!("DQD factor must have dim 2, got {d}")));
        }
        // (ω/2)σz shifted so the ground state sits at 0.
        let proj = real_local(&(&operators::pauli(Pauli::Plus) * &operators::pauli(Pauli::Minus)));
        h += product_term(layout, &[(DQD, proj * model.omega_dqd)]);
    }
    let mut n_local = None;
    if let Some(d) = layout.dim_of(TRANSMON) {
        let sol = &model.transmon;
        if d > sol.n_levels() {
            return Err(Error::InvalidDimension(format!(
                "transmon factor dim {d} exceeds {} solved levels",
                sol.n_levels()
            )));
        }
        let levels = DMatrix::from_fn(d, d, |i, j| if i == j { sol.levels[i] } else { 0.0 });
        h += product_term(layout, &[(TRANSMON, levels)]);
        n_local = Some(DMatrix::from_fn(d, d, |i, j| sol.n_matrix[i][j]));
    }
    let mut ladder = |label: &str, omega: f64| -> Result<Option<DMatrix<f64>>> {
        match layout.dim_of(label) {
            Some(d) => {
                let a = real_local(&operators::annihilation(d)?);
                let num = a.transpose() * &a;
                h += product_term(layout, &[(label, num * omega)]);
                Ok(Some(a))
            }
            None => Ok(None),
        }
    };
    let a_sq = ladder(SQUID, model.omega_r_sq)?;
    let a_50 = ladder(CPW, model.omega_r_50)?;

    if let (true, Some(a)) = (has(DQD), &a_sq) {
        let sm = real_local(&operators::pauli(Pauli::Minus));
        let sp = real_local(&operators::pauli(Pauli::Plus));
        let t = product_term(layout, &[(DQD, sm), (SQUID, a.transpose())])
            + product_term(layout, &[(DQD, sp), (SQUID, a.clone())]);
        h += t * model.g_dqd_sq;
    }
    if let Some(nm) = &n_local {
        if let Some(a) = &a_sq {
            h += product_term(layout, &[(TRANSMON, nm.clone()), (SQUID, a + a.transpose())]) * model.g_tr_sq;
        }
        if let Some(b) = &a_50 {
            h += product_term(layout, &[(TRANSMON, nm.clone()), (CPW, b + b.transpose())]) * model.g_tr_50;
        }
    }

    Ok(h)
}

/// DQD eigenbasis in the (|R⟩, |L⟩) basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqdRotation {
    /// Mixing angle θ with tan θ = 2t_c/δ.
    pub theta: f64,
    /// Excited state |+⟩ as (R, L) amplitudes.
    pub plus: [f64; 2],
    /// Ground state |−⟩ as (R, L) amplitudes.
    pub minus: [f64; 2],
}

/// Mixing angle and eigenstates of (δ/2)τz + t_c τx.
pub fn dqd_basis_rotation(delta: f64, t_c: f64) -> Result<DqdRotation> {
    if delta == 0.0 && t_c == 0.0 {
        return Err(Error::UndefinedMixing);
    }
    let theta = (2.0 * t_c).atan2(delta);
    let (s, c) = (0.5 * theta).sin_cos();
    Ok(DqdRotation { theta, plus: [c, s], minus: [-s, c] })
}

/// Localized-charge Hamiltonian (δ/2)τz + t_c τx in the (|R⟩, |L⟩) basis.
pub fn dqd_charge_hamiltonian(delta: f64, t_c: f64) -> [[f64; 2]; 2] {
    [[0.5 * delta, t_c], [t_c, -0.5 * delta]]
}

/// Virtual-photon exchange 2J = g₁g₂(1/|Δ_tr| + 1/|Δ_DQD|).
pub fn dispersive_exchange(g1: f64, g2: f64, delta_tr: f64, delta_dqd: f64) -> Result<f64> {
    if delta_tr == 0.0 || delta_dqd == 0.0 {
        return Err(Error::DispersiveInvalid);
    }
    Ok(g1 * g2 * (1.0 / delta_tr.abs() + 1.0 / delta_dqd.abs()))
}

/// Rabi-mode mixing angle θ_m with tan 2θ_m = 2g/|Δ|.
pub fn rabi_mixing_angle(g: f64, delta: f64) -> f64 {
    0.5 * (2.0 * g).atan2(delta.abs())
}

/// Convenience: assemble at a flux bias of a full device.
pub fn assemble_device(
    p: &DeviceParams,
    bias: &FluxBias,
    dqd: &DqdParams,
    layout: &SpaceLayout,
    cache: &TransmonCache,
) -> Result<SystemHamiltonian> {
    assemble(&resolve_device(p, bias, dqd, cache)?, layout)
}

/// Asymptotic charge-basis matrix element |⟨0|n̂|1⟩| ≈ (E_J/8E_c)^¼/√2.
pub fn n01_asymptote(e_j: f64, e_c: f64) -> f64 {
    (e_j / (8.0 * e_c)).powf(0.25) / std::f64::consts::SQRT_2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tp() -> TransmonParams {
        TransmonParams { omega_pl: None, ..Default::default() }
    }

    #[test]
    fn charge_states_without_josephson() {
        let sol = solve_transmon(&tp(), 0.0, 20).unwrap();
        let ec = 0.243;
        let expect = [0.0, 4.0 * ec, 4.0 * ec, 16.0 * ec];
        for (l, e) in sol.levels.iter().zip(expect) {
            assert!((l - e).abs() < 1e-12);
        }
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(sol.n_matrix[i][j].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn transmon_regime() {
        let sol = solve_transmon(&tp(), 30.0, 20).unwrap();
        let asym = (8.0_f64 * 0.243 * 30.0).sqrt() - 0.243;
        assert!((sol.omega_10() - asym).abs() / asym < 0.02);
        assert!(sol.anharmonicity() < 0.0);
        assert!(sol.levels.windows(2).all(|w| w[1] > w[0]));
        let n01 = n01_asymptote(30.0, 0.243);
        assert!((sol.n_matrix[0][1] - n01).abs() / n01 < 0.05);
        for i in 0..4 {
            for j in 0..4 {
                assert!((sol.n_matrix[i][j] - sol.n_matrix[j][i]).abs() < 1e-12);
            }
            if i + 1 < 4 {
                assert!(sol.n_matrix[i][i + 1] > 0.0);
            }
        }
    }

    #[test]
    fn small_cutoff_rejected() {
        assert!(matches!(solve_transmon(&tp(), 30.0, 5), Err(Error::Convergence(_))));
        let mut p = tp();
        p.n_levels = 21;
        assert!(matches!(solve_transmon(&p, 0.0, 10), Err(Error::Convergence(_))));
    }

    #[test]
    fn e_j_inversion() {
        let p = tp();
        let e_j = solve_e_j_for_frequency(&p, 3.695, 20).unwrap();
        let sol = solve_transmon(&p, e_j, 20).unwrap();
        assert!((sol.omega_10() - 3.695).abs() < 1e-9);
        assert!(solve_e_j_for_frequency(&p, 0.5, 20).is_err());
    }

    #[test]
    fn cache_returns_same_solution() {
        let cache = TransmonCache::new();
        let a = cache.get_or_solve(&tp(), 12.0, 20).unwrap();
        let b = cache.get_or_solve(&tp(), 12.0, 20).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn uncoupled_spectrum_is_sum_of_bare_levels() {
        let cache = TransmonCache::new();
        let model = OperatingPoint::table1().resolve(&cache).unwrap().without_couplings();
        let layout = SpaceLayout::canonical(4, 3, 2).unwrap();
        let sys = assemble(&model, &layout).unwrap();
        let eig = sys.h.eigh().unwrap();
        let mut expect = Vec::new();
        for d in 0..2 {
            for t in 0..4 {
                for s in 0..3 {
                    for b in 0..2 {
                        expect.push(
                            d as f64 * model.omega_dqd
                                + model.transmon.levels[t]
                                + s as f64 * model.omega_r_sq
                                + b as f64 * model.omega_r_50,
                        );
                    }
                }
            }
        }
        expect.sort_by(f64::total_cmp);
        for (a, b) in eig.values.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn hermitian_and_sized() {
        let cache = TransmonCache::new();
        let model = OperatingPoint::table2().resolve(&cache).unwrap();
        let layout = SpaceLayout::canonical(4, 5, 3).unwrap();
        let sys = assemble(&model, &layout).unwrap();
        assert_eq!(sys.h.dim(), 2 * 4 * 5 * 3);
        assert!(sys.h.hermiticity_error() < 1e-10);
    }

    #[test]
    fn jaynes_cummings_doublet() {
        // DQD resonant with the array, nothing else coupled.
        let cache = TransmonCache::new();
        let mut model = OperatingPoint::table1().resolve(&cache).unwrap().without_couplings();
        model.omega_dqd = 4.0;
        model.omega_r_sq = 4.0;
        model.g_dqd_sq = 0.05;
        let layout = SpaceLayout::canonical_subset(true, None, Some(4), None).unwrap();
        let eig = assemble(&model, &layout).unwrap().h.eigh().unwrap();
        assert!((eig.values[2] - eig.values[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn dqd_rotation() {
        let r = dqd_basis_rotation(0.0, 1.0).unwrap();
        assert!((r.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((r.plus[0].abs() - r.plus[1].abs()).abs() < 1e-15);
        let r = dqd_basis_rotation(2.0, 0.0).unwrap();
        assert_eq!(r.theta, 0.0);
        assert_eq!(r.plus, [1.0, 0.0]);
        assert!(matches!(dqd_basis_rotation(0.0, 0.0), Err(Error::UndefinedMixing)));
        for &(delta, t_c) in &[(0.3, 1.2), (-2.0, 0.7), (1.0, 0.0), (0.0, 0.4)] {
            let h = dqd_charge_hamiltonian(delta, t_c);
            let r = dqd_basis_rotation(delta, t_c).unwrap();
            let apply = |v: [f64; 2]| [h[0][0] * v[0] + h[0][1] * v[1], h[1][0] * v[0] + h[1][1] * v[1]];
            let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
            let ep = dot(r.plus, apply(r.plus));
            let em = dot(r.minus, apply(r.minus));
            let off = dot(r.plus, apply(r.minus));
            let w = (delta * delta + 4.0 * t_c * t_c).sqrt();
            assert!(off.abs() < 1e-14);
            assert!((ep - em - w).abs() < 1e-14);
        }
    }

    #[test]
    fn exchange_formula() {
        let g = 0.1;
        let d = 0.5;
        assert!((dispersive_exchange(g, g, d, d).unwrap() - 2.0 * g * g / d).abs() < 1e-15);
        let two_j = dispersive_exchange(128.0, 36.0, 4062.0 - 3695.0, 4062.0 - 3635.0).unwrap();
        assert!((two_j - 23.35).abs() < 0.05, "2J = {two_j}");
        let doubled = dispersive_exchange(256.0, 36.0, 367.0, 427.0).unwrap();
        assert!((doubled - 2.0 * two_j).abs() < 1e-9);
        assert!(matches!(dispersive_exchange(1.0, 1.0, 0.0, 1.0), Err(Error::DispersiveInvalid)));
    }

    #[test]
    fn mixing_angle() {
        assert!((rabi_mixing_angle(0.1, 0.0) - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!(rabi_mixing_angle(1e-9, 0.1) < 1e-7);
        let t = rabi_mixing_angle(166.0, 4150.0 - 4230.0);
        assert!((t - 0.5 * (332.0_f64 / 80.0).atan()).abs() < 1e-15);
        assert!((t - 0.672).abs() < 0.01);
    }
}
