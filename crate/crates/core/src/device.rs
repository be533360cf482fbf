//! Flux- and bias-dependent scalar device models.
//!
//! All frequencies are ordinary frequencies (angular/2π) in GHz, all fluxes
//! in units of the flux quantum. The composite flux phase fed to every
//! `cos` is `2π(γ·Φ_Sq + Φ_c)` for the array and `2π(α·Φ_Sq + Φ_tr)` for the
//! transmon, so every model is Φ0-periodic in its composite flux.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquidArrayParams {
    /// Zero-flux bare frequency ω⁰_r,Sq (GHz).
    pub omega0: f64,
    /// Series single-junction inductance ratio N_sj·L_sj / (N_Sq·L_Sq).
    pub beta: f64,
    /// Coil flux lever.
    pub gamma: f64,
    /// Flux offset (Φ0).
    pub phi_c: f64,
    pub n_sq: u32,
    pub n_sj: u32,
    /// External coupling rate κ_ext/2π (GHz).
    pub kappa_ext: f64,
    /// Internal loss rate κ_int/2π (GHz).
    pub kappa_int: f64,
}

impl Default for SquidArrayParams {
    fn default() -> Self {
        let k = KappaPreset::Undercoupled;
        Self {
            omega0: 7.867,
            beta: 0.1,
            gamma: 0.43,
            phi_c: 0.0072,
            n_sq: 35,
            n_sj: 34,
            kappa_ext: k.kappa_ext(),
            kappa_int: k.kappa_int(),
        }
    }
}

impl SquidArrayParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0) {
            return Err(Error::InvalidArgument(format!("omega0 must be > 0, got {}", self.omega0)));
        }
        if !(self.beta >= 0.0) || !(self.kappa_ext >= 0.0) || !(self.kappa_int >= 0.0) {
            return Err(Error::InvalidArgument("beta and kappa rates must be >= 0".into()));
        }
        Ok(())
    }

    pub fn kappa_tot(&self) -> f64 {
        self.kappa_ext + self.kappa_int
    }
}

/// The two reported linewidth configurations of the array resonator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KappaPreset {
    /// κ_ext + κ_int = (3 + 5) MHz.
    MainText,
    /// κ_ext + κ_int = (4 + 8) MHz, undercoupled.
    Undercoupled,
}

impl KappaPreset {
    pub fn kappa_ext(self) -> f64 {
        match self {
            KappaPreset::MainText => 0.003,
            KappaPreset::Undercoupled => 0.004,
        }
    }

    pub fn kappa_int(self) -> f64 {
        match self {
            KappaPreset::MainText => 0.005,
            KappaPreset::Undercoupled => 0.008,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonParams {
    /// Charging energy E_c/h (GHz).
    pub e_c: f64,
    /// Zero-flux Josephson energy E⁰_J/h (GHz).
    pub e_j0: f64,
    /// Fitted plasma frequency; when set it overrides √(8 E_c E⁰_J).
    pub omega_pl: Option<f64>,
    /// Loop-area ratio between transmon SQUID and array SQUIDs.
    pub alpha: f64,
    pub n_g: f64,
    pub n_levels: usize,
    pub charge_cutoff: usize,
}

impl Default for TransmonParams {
    fn default() -> Self {
        Self {
            e_c: 0.243,
            e_j0: 30.0,
            omega_pl: Some(6.550),
            alpha: 4.41,
            n_g: 0.0,
            n_levels: 4,
            charge_cutoff: 20,
        }
    }
}

impl TransmonParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_c > 0.0) || !(self.e_j0 > 0.0) {
            return Err(Error::InvalidArgument("e_c and e_j0 must be > 0".into()));
        }
        if self.n_levels < 2 {
            return Err(Error::InvalidArgument(format!("n_levels must be >= 2, got {}", self.n_levels)));
        }
        if let Some(w) = self.omega_pl {
            if !(w > 0.0) {
                return Err(Error::InvalidArgument("omega_pl must be > 0".into()));
            }
        }
        Ok(())
    }

    /// Plasma frequency ω_pl = √(8 E_c E⁰_J) unless a fitted value is given.
    pub fn plasma_frequency(&self) -> f64 {
        self.omega_pl.unwrap_or_else(|| (8.0 * self.e_c * self.e_j0).sqrt())
    }

    /// Zero-flux Josephson energy consistent with `plasma_frequency`.
    pub fn effective_e_j0(&self) -> f64 {
        match self.omega_pl {
            Some(w) => w * w / (8.0 * self.e_c),
            None => self.e_j0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DqdParams {
    /// Tunnel coupling t_c/h (GHz); the qubit splitting at δ = 0 is 2t_c.
    pub t_c: f64,
    /// Detuning δ/h (GHz).
    pub delta: f64,
    /// Spectroscopic dephasing half-width γ2/2π (GHz).
    pub gamma2: f64,
}

impl Default for DqdParams {
    fn default() -> Self {
        Self { t_c: 3.660 / 2.0, delta: 0.0, gamma2: 0.0026 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub g0_tr_sq: f64,
    pub g0_tr_50: f64,
    pub g0_dqd_sq: f64,
    /// 50 Ω resonator frequency (GHz).
    pub omega_r50: f64,
}

impl Default for CouplingParams {
    fn default() -> Self {
        // g0_dqd_sq reproduces 33 MHz at ω_r,Sq = 4.089 GHz.
        Self { g0_tr_sq: 0.230, g0_tr_50: 0.120, g0_dqd_sq: 0.033 * (7.867_f64 / 4.089).sqrt(), omega_r50: 6.490 }
    }
}

impl CouplingParams {
    pub fn validate(&self) -> Result<()> {
        if [self.g0_tr_sq, self.g0_tr_50, self.g0_dqd_sq, self.omega_r50].iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidArgument("coupling strengths and omega_r50 must be >= 0".into()));
        }
        Ok(())
    }
}

/// External flux pair in units of Φ0.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FluxBias {
    pub phi_sq: f64,
    pub phi_tr: f64,
}

impl FluxBias {
    pub fn new(phi_sq: f64, phi_tr: f64) -> Self {
        Self { phi_sq, phi_tr }
    }
}

/// Every fitted device constant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DeviceParams {
    pub squid: SquidArrayParams,
    pub transmon: TransmonParams,
    pub dqd: DqdParams,
    pub coupling: CouplingParams,
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        self.squid.validate()?;
        self.transmon.validate()?;
        self.coupling.validate()?;
        if !(self.dqd.t_c >= 0.0) {
            return Err(Error::InvalidArgument("t_c must be >= 0".into()));
        }
        Ok(())
    }
}

/// Composite array flux phase 2π(γΦ_Sq + Φ_c) in radians.
pub fn total_flux_sq(p: &SquidArrayParams, b: &FluxBias) -> f64 {
    2.0 * PI * (p.gamma * b.phi_sq + p.phi_c)
}

/// Composite transmon flux phase 2π(αΦ_Sq + Φ_tr) in radians.
pub fn total_flux_tr(p: &TransmonParams, b: &FluxBias) -> f64 {
    2.0 * PI * (p.alpha * b.phi_sq + b.phi_tr)
}

/// β + 1/|cos Φ′_Sq|, the normalized array inductance. Infinite at the node.
pub fn array_inductance_factor(p: &SquidArrayParams, b: &FluxBias) -> f64 {
    let c = total_flux_sq(p, b).cos().abs();
    if c == 0.0 {
        f64::INFINITY
    } else {
        p.beta + 1.0 / c
    }
}

/// Lumped-element array frequency ω⁰ / (β + 1/|cos Φ′|)^½, → 0 at the node.
pub fn squid_array_frequency(p: &SquidArrayParams, b: &FluxBias) -> f64 {
    p.omega0 / array_inductance_factor(p, b).sqrt()
}

/// Z(Φ)/Z(0) = [(β + 1/|cos Φ′|)/(β + 1)]^½.
pub fn squid_impedance(p: &SquidArrayParams, b: &FluxBias) -> f64 {
    (array_inductance_factor(p, b) / (p.beta + 1.0)).sqrt()
}

pub fn josephson_energy(p: &TransmonParams, b: &FluxBias) -> f64 {
    p.effective_e_j0() * total_flux_tr(p, b).cos().abs()
}

/// Asymptotic 0→1 frequency ω_pl·|cos Φ′_tr|^½ − E_c. Goes negative near
/// the half flux quantum, where the transmon description breaks down.
pub fn transmon_frequency(p: &TransmonParams, b: &FluxBias) -> f64 {
    p.plasma_frequency() * total_flux_tr(p, b).cos().abs().sqrt() - p.e_c
}

/// True where the asymptotic transmon formula is outside its validity range.
pub fn transmon_model_breakdown(p: &TransmonParams, b: &FluxBias) -> bool {
    transmon_frequency(p, b) <= 0.0 || josephson_energy(p, b) < 5.0 * p.e_c
}

pub fn dqd_frequency(p: &DqdParams) -> f64 {
    (4.0 * p.t_c * p.t_c + p.delta * p.delta).sqrt()
}

pub fn coupling_tr_sq(c: &CouplingParams, p_sq: &SquidArrayParams, p_tr: &TransmonParams, b: &FluxBias) -> f64 {
    c.g0_tr_sq * total_flux_tr(p_tr, b).cos().abs().powf(0.25) / array_inductance_factor(p_sq, b).powf(0.25)
}

pub fn coupling_tr_50(c: &CouplingParams, p_tr: &TransmonParams, b: &FluxBias) -> f64 {
    c.g0_tr_50 * total_flux_tr(p_tr, b).cos().abs().powf(0.25)
}

/// DQD–array coupling including the 2t_c/ω_DQD mixing renormalization.
pub fn coupling_dqd_sq(c: &CouplingParams, p_sq: &SquidArrayParams, d: &DqdParams, b: &FluxBias) -> Result<f64> {
    let w = dqd_frequency(d);
    if w == 0.0 {
        return Err(Error::UndefinedMixing);
    }
    Ok(c.g0_dqd_sq / array_inductance_factor(p_sq, b).powf(0.25) * (2.0 * d.t_c / w))
}

/// Array flux Φ_Sq in the first decreasing lobe where the array sits at
/// `target` GHz. Errors when the target is above the maximum frequency.
pub fn solve_phi_sq_for_frequency(p: &SquidArrayParams, target: f64) -> Result<f64> {
    // Monotone decreasing from the maximum (phase 0) to the node (phase π/2).
    let lo = -p.phi_c / p.gamma;
    let hi = (0.25 - p.phi_c) / p.gamma;
    let f = |phi: f64| squid_array_frequency(p, &FluxBias::new(phi, 0.0)) - target;
    bisect_decreasing(f, lo, hi).ok_or_else(|| {
        Error::InvalidArgument(format!("array frequency {target} GHz not reachable in ({lo:.4}, {hi:.4}) Φ0"))
    })
}

/// Transmon flux Φ_tr (at fixed Φ_Sq) placing the asymptotic 0→1
/// frequency at `target` GHz, on the lobe with composite phase in [0, π/2).
pub fn solve_phi_tr_for_frequency(p: &TransmonParams, phi_sq: f64, target: f64) -> Result<f64> {
    let lo = -p.alpha * phi_sq;
    let hi = 0.25 - p.alpha * phi_sq;
    let f = |phi: f64| transmon_frequency(p, &FluxBias::new(phi_sq, phi)) - target;
    bisect_decreasing(f, lo, hi)
        .ok_or_else(|| Error::InvalidArgument(format!("transmon frequency {target} GHz not reachable")))
}

/// Bisection for f decreasing on [lo, hi]; None when no sign change.
pub(crate) fn bisect_decreasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Option<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo >= 0.0 && fhi <= 0.0) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq() -> SquidArrayParams {
        SquidArrayParams::default()
    }

    #[test]
    fn array_frequency_at_zero_phase() {
        let mut p = sq();
        p.phi_c = 0.0;
        let w = squid_array_frequency(&p, &FluxBias::default());
        assert!((w - 7.867 / 1.1_f64.sqrt()).abs() < 1e-12);
        assert!((w - 7.501).abs() < 1e-3);
    }

    #[test]
    fn flux_phase_offset_only() {
        let p = sq();
        let ph = total_flux_sq(&p, &FluxBias::default());
        assert!((ph - 2.0 * PI * 0.0072).abs() < 1e-15);
    }

    #[test]
    fn array_frequency_limits() {
        let mut p = sq();
        p.phi_c = 0.0;
        // Phase π/2 at Φ = 0.25/γ.
        let node = FluxBias::new(0.25 / p.gamma, 0.0);
        assert!(squid_array_frequency(&p, &node) < 1e-6);
        p.beta = 0.0;
        let b = FluxBias::new(0.1, 0.0);
        let c = total_flux_sq(&p, &b).cos().abs();
        assert!((squid_array_frequency(&p, &b) - p.omega0 * c.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn operating_point_root() {
        let phi = solve_phi_sq_for_frequency(&sq(), 4.060).unwrap();
        assert!(phi > 0.0 && phi < 0.5);
        assert!((squid_array_frequency(&sq(), &FluxBias::new(phi, 0.0)) - 4.060).abs() < 1e-9);
        assert!(solve_phi_sq_for_frequency(&sq(), 9.0).is_err());
    }

    #[test]
    fn transmon_asymptote() {
        let p = TransmonParams { omega_pl: None, ..Default::default() };
        let b = FluxBias::default();
        let w = transmon_frequency(&p, &b);
        assert!((w - ((8.0 * 0.243 * 30.0_f64).sqrt() - 0.243)).abs() < 1e-12);
        assert!((w - 7.394).abs() < 1e-3);
        let fitted = TransmonParams::default();
        assert!((transmon_frequency(&fitted, &b) - (6.550 - 0.243)).abs() < 1e-12);
        // Composite phase π/2: the SQUID node.
        let half = FluxBias::new(0.0, 0.25);
        assert!((transmon_frequency(&p, &half) + 0.243).abs() < 1e-6);
        assert!(transmon_model_breakdown(&p, &half));
    }

    #[test]
    fn dqd_splitting() {
        let d = |t_c: f64, delta: f64| dqd_frequency(&DqdParams { t_c, delta, gamma2: 0.0 });
        assert!((d(3.993 / 2.0, 0.0) - 3.993).abs() < 1e-12);
        assert!((d(0.0, -1.25) - 1.25).abs() < 1e-12);
        assert!((d(1.8, 2.7) - 4.5).abs() < 1e-12);
    }

    #[test]
    fn couplings_at_zero_phase() {
        let mut p = sq();
        p.phi_c = 0.0;
        let t = TransmonParams::default();
        let c = CouplingParams::default();
        let b = FluxBias::default();
        assert!((coupling_tr_sq(&c, &p, &t, &b) - 0.230 / 1.1_f64.powf(0.25)).abs() < 1e-12);
        assert!((coupling_tr_sq(&c, &p, &t, &b) * 1e3 - 224.6).abs() < 0.05);
        assert!((coupling_tr_50(&c, &t, &b) - 0.120).abs() < 1e-12);
        let half = FluxBias::new(0.0, 0.25);
        assert!(coupling_tr_sq(&c, &p, &t, &half) < 1e-3);
        assert!(coupling_tr_50(&c, &t, &half) < 1e-3);
    }

    #[test]
    fn dqd_coupling_mixing() {
        let mut p = sq();
        p.phi_c = 0.0;
        let c = CouplingParams::default();
        let b = FluxBias::default();
        let at = |delta: f64| coupling_dqd_sq(&c, &p, &DqdParams { t_c: 2.0, delta, gamma2: 0.0 }, &b).unwrap();
        assert!((at(0.0) - c.g0_dqd_sq / 1.1_f64.powf(0.25)).abs() < 1e-15);
        assert!(at(1e9) < 1e-9);
        let zero = DqdParams { t_c: 0.0, delta: 0.0, gamma2: 0.0 };
        assert!(matches!(coupling_dqd_sq(&c, &p, &zero, &b), Err(Error::UndefinedMixing)));
    }

    #[test]
    fn impedance_scaling() {
        let mut p = sq();
        p.phi_c = 0.0;
        assert!((squid_impedance(&p, &FluxBias::default()) - 1.0).abs() < 1e-15);
        let c = CouplingParams::default();
        let d = DqdParams { t_c: 2.0, delta: 0.0, gamma2: 0.0 };
        let g0 = coupling_dqd_sq(&c, &p, &d, &FluxBias::default()).unwrap();
        let mut last = 1.0;
        for i in 1..50 {
            let b = FluxBias::new(0.5 / p.gamma * i as f64 / 100.0, 0.0);
            let z = squid_impedance(&p, &b);
            assert!(z > last);
            last = z;
            let g = coupling_dqd_sq(&c, &p, &d, &b).unwrap();
            assert!((g / g0 - z.powf(-0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn table_two_couplings_from_flux_laws() {
        // Infer the fluxes from the quoted array and transmon frequencies,
        // then evaluate the coupling laws there.
        let p = DeviceParams::default();
        let phi_sq = solve_phi_sq_for_frequency(&p.squid, 4.062).unwrap();
        let phi_tr = solve_phi_tr_for_frequency(&p.transmon, phi_sq, 3.695).unwrap();
        let b = FluxBias::new(phi_sq, phi_tr);
        let g = coupling_tr_sq(&p.coupling, &p.squid, &p.transmon, &b) * 1e3;
        let g50 = coupling_tr_50(&p.coupling, &p.transmon, &b) * 1e3;
        assert!((g - 128.0).abs() < 1.0, "g_tr,Sq = {g}");
        assert!((g50 - 93.0).abs() < 1.0, "g_tr,50 = {g50}");
    }
}
