//! Dip extraction, Lorentzian fits and Nelder–Mead device fits.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::device::{DeviceParams, FluxBias};
use crate::error::{Error, Result};
use crate::hamiltonian::{assemble_real, resolve_device, TransmonCache};
use crate::operators::{eigvalsh_real, SpaceLayout};

/// Seed shared by every randomized start so runs are reproducible.
pub const FIT_SEED: u64 = 0x6879_6272_6964;
/// Number of starts in [`fit_lorentzians`].
pub const LORENTZIAN_STARTS: usize = 8;
/// Default absolute prominence for [`extract_dips`].
pub const DEFAULT_DIP_PROMINENCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Spread of objective values over the simplex.
    pub f_tol: f64,
    /// Largest coordinate distance from the best vertex.
    pub x_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_iter: 2000, f_tol: 1e-10, x_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Final objective spread over the simplex.
    pub spread: f64,
    /// Best objective value at the start of each iteration.
    pub history: Vec<f64>,
}

/// Derivative-free simplex minimization. Trial points are clamped into
/// `bounds`; NaN objective values count as +∞.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    bounds: Option<&[(f64, f64)]>,
    opts: &NelderMeadOptions,
) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(steps.len(), n, "one step per coordinate");
    let clamp = |x: &mut [f64]| {
        if let Some(b) = bounds {
            for (xi, &(lo, hi)) in x.iter_mut().zip(b) {
                *xi = xi.clamp(lo, hi);
            }
        }
    };
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut start = x0.to_vec();
    clamp(&mut start);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(&start);
    simplex.push((start.clone(), f0));
    for i in 0..n {
        let mut x = start.clone();
        x[i] += steps[i];
        clamp(&mut x);
        if x[i] == start[i] {
            x[i] -= steps[i];
            clamp(&mut x);
        }
        let fx = eval(&x);
        simplex.push((x, fx));
    }

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        history.push(simplex[0].1);
        let spread = simplex[n].1 - simplex[0].1;
        let xspread = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= opts.f_tol && xspread <= opts.x_tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let mut xr = combine(&centroid, &worst.0, -1.0);
        clamp(&mut xr);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let mut xe = combine(&centroid, &worst.0, -2.0);
            clamp(&mut xe);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc, accept) = if fr < worst.1 {
            let xc = combine(&centroid, &xr, 0.5);
            let fc = eval(&xc);
            (xc, fc, fc <= fr)
        } else {
            let xc = combine(&centroid, &worst.0, 0.5);
            let fc = eval(&xc);
            (xc, fc, fc < worst.1)
        };
        if accept {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for v in simplex.iter_mut().skip(1) {
            let mut x = combine(&best, &v.0, 0.5);
            clamp(&mut x);
            let fx = eval(&x);
            *v = (x, fx);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let spread = simplex[n].1 - simplex[0].1;
    let (x, fx) = simplex.swap_remove(0);
    NelderMeadResult { x, fx, iterations, evaluations, converged, spread, history }
}

/// A local minimum of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dip {
    /// Interpolated position.
    pub frequency: f64,
    /// Interpolated magnitude at the minimum.
    pub magnitude: f64,
    pub prominence: f64,
    /// Grid index of the sampled minimum.
    pub index: usize,
}

fn check_trace(freq: &[f64], mag: &[f64]) -> Result<()> {
    if freq.len() != mag.len() {
        return Err(Error::GridMismatch(format!("{} frequencies vs {} magnitudes", freq.len(), mag.len())));
    }
    if freq.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("trace frequencies must be strictly increasing".into()));
    }
    if mag.iter().any(|m| !m.is_finite()) {
        return Err(Error::InvalidArgument("trace contains non-finite values".into()));
    }
    Ok(())
}

/// Vertex of the parabola through three points.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> Option<(f64, f64)> {
    let d01 = (y[1] - y[0]) / (x[1] - x[0]);
    let d12 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d12 - d01) / (x[2] - x[0]);
    if !(a > 0.0) {
        return None;
    }
    let b = d01 - a * (x[0] + x[1]);
    let xv = (-b / (2.0 * a)).clamp(x[0], x[2]);
    let yv = y[1] + (xv - x[1]) * (d01 + a * (xv - x[0]));
    Some((xv, yv))
}

/// Local minima with prominence at least `min_prominence`, ordered by
/// frequency, each refined by 3-point quadratic interpolation.
pub fn find_dips(freq: &[f64], mag: &[f64], min_prominence: f64) -> Result<Vec<Dip>> {
    check_trace(freq, mag)?;
    let n = mag.len();
    let mut out = Vec::new();
    if n < 3 {
        return Ok(out);
    }
    let mut i = 1;
    while i < n - 1 {
        if !(mag[i] < mag[i - 1]) {
            i += 1;
            continue;
        }
        // Plateau-aware: extend over equal values.
        let mut j = i;
        while j + 1 < n && mag[j + 1] == mag[i] {
            j += 1;
        }
        if j + 1 >= n || !(mag[j + 1] > mag[i]) {
            i = j + 1;
            continue;
        }
        let m = mag[i];
        let mut left = m;
        for &v in mag[..i].iter().rev() {
            if v < m {
                break;
            }
            left = left.max(v);
        }
        let mut right = m;
        for &v in &mag[j + 1..] {
            if v < m {
                break;
            }
            right = right.max(v);
        }
        let prominence = left.min(right) - m;
        if prominence >= min_prominence && prominence > 0.0 {
            let k = (i + j) / 2;
            let (f, v) = if i == j {
                parabola_vertex([freq[k - 1], freq[k], freq[k + 1]], [mag[k - 1], mag[k], mag[k + 1]])
                    .unwrap_or((freq[k], m))
            } else {
                (0.5 * (freq[i] + freq[j]), m)
            };
            out.push(Dip { frequency: f, magnitude: v, prominence, index: k });
        }
        i = j + 1;
    }
    Ok(out)
}

/// Frequencies of the dips found by [`find_dips`].
pub fn extract_dips(freq: &[f64], mag: &[f64], min_prominence: f64) -> Result<Vec<f64>> {
    Ok(find_dips(freq, mag, min_prominence)?.into_iter().map(|d| d.frequency).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    /// Ascending.
    pub centers: Vec<f64>,
    /// Full widths at half depth.
    pub widths: Vec<f64>,
    pub depths: Vec<f64>,
    pub baseline: f64,
    /// RMS residual in trace units.
    pub residual: f64,
    /// Set when two centers are closer than half the larger width.
    pub ill_conditioned: bool,
}

impl LorentzianFit {
    pub fn evaluate(&self, f: f64) -> f64 {
        let mut y = self.baseline;
        for ((&c, &w), &d) in self.centers.iter().zip(&self.widths).zip(&self.depths) {
            y -= d * lorentzian(f, c, w);
        }
        y
    }
}

fn lorentzian(x: f64, c: f64, w: f64) -> f64 {
    let u = 2.0 * (x - c) / w;
    1.0 / (1.0 + u * u)
}

/// Linear least squares with a tiny-singular-value cutoff.
fn linear_lsq(a: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let ata = a.transpose() * a;
    let aty = a.transpose() * y;
    let svd = ata.svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(&aty, smax * 1e-13).ok()
}

/// Baseline and depths for fixed centers and widths.
fn lorentzian_linear(x: &[f64], y: &DVector<f64>, shape: &[(f64, f64)]) -> Option<(DVector<f64>, f64)> {
    let a = DMatrix::from_fn(x.len(), shape.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            let (c, w) = shape[j - 1];
            -lorentzian(x[i], c, w)
        }
    });
    let coef = linear_lsq(&a, y)?;
    let r = &a * &coef - y;
    Some((coef, (r.norm_squared() / x.len() as f64).sqrt()))
}

/// Initial half-depth width around sampled minimum `k`.
fn dip_width(x: &[f64], y: &[f64], k: usize) -> f64 {
    let top = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let half = 0.5 * (top + y[k]);
    let mut l = k;
    while l > 0 && y[l] < half {
        l -= 1;
    }
    let mut r = k;
    while r + 1 < y.len() && y[r] < half {
        r += 1;
    }
    (x[r] - x[l]).max(4.0 * (x[1] - x[0]))
}

/// Least-squares fit of `baseline − Σ d_i / (1 + (2(f − c_i)/w_i)²)` with
/// `n_peaks` ∈ {1, 2}. Baseline and depths are solved linearly for every
/// trial shape; centers and widths are found by Nelder–Mead from
/// [`LORENTZIAN_STARTS`] deterministic starts seeded at the deepest dips.
pub fn fit_lorentzians(freq: &[f64], mag: &[f64], n_peaks: usize) -> Result<LorentzianFit> {
    check_trace(freq, mag)?;
    if !(1..=2).contains(&n_peaks) {
        return Err(Error::InvalidArgument(format!("n_peaks must be 1 or 2, got {n_peaks}")));
    }
    if freq.len() < 5 * n_peaks {
        return Err(Error::InvalidArgument(format!("need >= {} trace points", 5 * n_peaks)));
    }
    let scale = mag.iter().cloned().fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::InvalidArgument("trace magnitude must be positive somewhere".into()));
    }
    let (f_first, f_last) = (freq[0], freq[freq.len() - 1]);
    let (mid, span) = (0.5 * (f_first + f_last), f_last - f_first);
    let x: Vec<f64> = freq.iter().map(|f| (f - mid) / span).collect();
    let yv: Vec<f64> = mag.iter().map(|m| m / scale).collect();
    let y = DVector::from_column_slice(&yv);

    let range = yv.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - yv.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut dips = find_dips(&x, &yv, 0.1 * range)?;
    if dips.is_empty() {
        let k = (0..yv.len()).min_by(|&a, &b| yv[a].total_cmp(&yv[b])).unwrap();
        dips.push(Dip { frequency: x[k], magnitude: yv[k], prominence: 0.0, index: k });
    }
    dips.sort_by(|a, b| b.prominence.total_cmp(&a.prominence));
    let mut guess: Vec<(f64, f64)> = dips.iter().take(n_peaks).map(|d| (d.frequency, dip_width(&x, &yv, d.index))).collect();
    while guess.len() < n_peaks {
        let (c, w) = guess[0];
        guess[0] = (c - 0.25 * w, 0.5 * w);
        guess.push((c + 0.25 * w, 0.5 * w));
    }

    let unpack = |p: &[f64]| -> Vec<(f64, f64)> { p.chunks(2).map(|s| (s[0], s[1].exp())).collect() };
    let objective = |p: &[f64]| -> f64 {
        let shape = unpack(p);
        lorentzian_linear(&x, &y, &shape).map_or(f64::INFINITY, |(_, r)| r)
    };
    let opts = NelderMeadOptions { max_iter: 3000, f_tol: 1e-13, x_tol: 1e-10 };
    let mut rng = ChaCha8Rng::seed_from_u64(FIT_SEED);
    let mut best: Option<NelderMeadResult> = None;
    let mut any_converged = false;
    for start in 0..LORENTZIAN_STARTS {
        let mut p0 = Vec::with_capacity(2 * n_peaks);
        let mut steps = Vec::with_capacity(2 * n_peaks);
        for &(c, w) in &guess {
            let (dc, dw) = if start == 0 {
                (0.0, 0.0)
            } else {
                (rng.random_range(-0.5..0.5) * w, rng.random_range(-0.5..0.5))
            };
            p0.extend([c + dc, w.ln() + dw]);
            steps.extend([0.25 * w, 0.3]);
        }
        let mut r = nelder_mead(objective, &p0, &steps, None, &opts);
        // One restart from the converged point guards against early collapse.
        let steps2: Vec<f64> = steps.iter().map(|s| 0.1 * s).collect();
        let r2 = nelder_mead(objective, &r.x, &steps2, None, &opts);
        if r2.fx <= r.fx {
            r = NelderMeadResult { converged: r2.converged, ..r2 };
        }
        any_converged |= r.converged;
        if best.as_ref().is_none_or(|b| r.fx < b.fx) {
            best = Some(r);
        }
    }
    let best = best.expect("at least one start");
    if !any_converged || !best.fx.is_finite() {
        return Err(Error::FitDivergence {
            message: format!("{n_peaks}-Lorentzian fit did not converge from {LORENTZIAN_STARTS} starts"),
            best_residual: best.fx * scale,
        });
    }
    let shape = unpack(&best.x);
    let (coef, rms) = lorentzian_linear(&x, &y, &shape).expect("best point is finite");
    let mut peaks: Vec<(f64, f64, f64)> =
        shape.iter().enumerate().map(|(i, &(c, w))| (mid + c * span, w * span, coef[i + 1] * scale)).collect();
    peaks.sort_by(|a, b| a.0.total_cmp(&b.0));
    let ill_conditioned = n_peaks == 2 && (peaks[1].0 - peaks[0].0).abs() < 0.5 * peaks[0].1.max(peaks[1].1);
    Ok(LorentzianFit {
        centers: peaks.iter().map(|p| p.0).collect(),
        widths: peaks.iter().map(|p| p.1).collect(),
        depths: peaks.iter().map(|p| p.2).collect(),
        baseline: coef[0] * scale,
        residual: rms * scale,
        ill_conditioned,
    })
}

/// y ≈ offset + B·e^{−t/τ_B} + A·e^{−t/τ}·cos(2πft + φ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillationFit {
    pub frequency: f64,
    pub decay_time: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    /// Amplitude B of the non-oscillating transient.
    pub trend_amplitude: f64,
    pub trend_time: f64,
    pub residual: f64,
}

fn oscillation_linear(t: &[f64], y: &DVector<f64>, f: f64, tau: f64, tau_b: f64) -> Option<(DVector<f64>, f64)> {
    let w = 2.0 * std::f64::consts::PI * f;
    let t0 = t[0];
    let a = DMatrix::from_fn(t.len(), 4, |i, j| {
        let s = t[i] - t0;
        let e = (-s / tau).exp();
        match j {
            0 => 1.0,
            1 => (-s / tau_b).exp(),
            2 => e * (w * t[i]).cos(),
            _ => e * (w * t[i]).sin(),
        }
    });
    let coef = linear_lsq(&a, y)?;
    let r = &a * &coef - y;
    Some((coef, (r.norm_squared() / t.len() as f64).sqrt()))
}

/// Frequencies of the strongest local maxima of the periodogram of the
/// first differences, which suppresses slow trends.
fn periodogram_peaks(t: &[f64], y: &[f64], f_lo: f64, f_hi: f64, count: usize) -> Vec<f64> {
    let d: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let tm: Vec<f64> = t.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let steps = 8 * t.len();
    let power: Vec<(f64, f64)> = (0..=steps)
        .map(|k| {
            let f = f_lo + (f_hi - f_lo) * k as f64 / steps as f64;
            let w = 2.0 * std::f64::consts::PI * f;
            let (mut c, mut s) = (0.0, 0.0);
            for (ti, di) in tm.iter().zip(&d) {
                c += di * (w * ti).cos();
                s += di * (w * ti).sin();
            }
            (f, c * c + s * s)
        })
        .collect();
    let mut peaks: Vec<(f64, f64)> =
        power.windows(3).filter(|w| w[1].1 >= w[0].1 && w[1].1 >= w[2].1).map(|w| w[1]).collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    peaks.into_iter().take(count).map(|p| p.0).collect()
}

/// Fit a damped cosine on top of a decaying offset. Starting frequencies
/// are the strongest periodogram peaks with at least one full period in
/// the record.
pub fn fit_damped_oscillation(t: &[f64], y: &[f64]) -> Result<OscillationFit> {
    check_trace(t, y)?;
    if t.len() < 8 {
        return Err(Error::InvalidArgument("need >= 8 samples for an oscillation fit".into()));
    }
    let span = t[t.len() - 1] - t[0];
    let dt = span / (t.len() - 1) as f64;
    let (f_lo, f_hi) = (1.0 / span, 0.5 / dt);
    let yv = DVector::from_column_slice(y);
    let objective = |p: &[f64]| {
        oscillation_linear(t, &yv, p[0], p[1].exp(), p[2].exp()).map_or(f64::INFINITY, |(_, r)| r)
    };
    let bounds = [(0.5 * f_lo, f_hi), ((0.05 * span).ln(), (1e3 * span).ln()), ((0.02 * span).ln(), (1e3 * span).ln())];
    let opts = NelderMeadOptions { max_iter: 3000, f_tol: 1e-14, x_tol: 1e-11 };
    let mut best: Option<NelderMeadResult> = None;
    for f0 in periodogram_peaks(t, y, f_lo, f_hi, 3) {
        for tau0 in [0.3, 1.0, 4.0] {
            let p0 = [f0, (tau0 * span).ln(), (0.2 * span).ln()];
            let r = nelder_mead(objective, &p0, &[0.05 * f0, 0.5, 0.5], Some(&bounds), &opts);
            if best.as_ref().is_none_or(|b| r.fx < b.fx) {
                best = Some(r);
            }
        }
    }
    let best = best.ok_or_else(|| Error::FitDivergence { message: "no periodogram peak".into(), best_residual: f64::NAN })?;
    let (f, tau, tau_b) = (best.x[0], best.x[1].exp(), best.x[2].exp());
    let (coef, residual) = oscillation_linear(t, &yv, f, tau, tau_b).ok_or_else(|| Error::FitDivergence {
        message: "singular oscillation basis".into(),
        best_residual: best.fx,
    })?;
    Ok(OscillationFit {
        frequency: f,
        decay_time: tau,
        amplitude: coef[2].hypot(coef[3]),
        phase: (-coef[3]).atan2(coef[2]),
        offset: coef[0],
        trend_amplitude: coef[1],
        trend_time: tau_b,
        residual,
    })
}

/// Device constants that a [`FitProblem`] may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceParameter {
    OmegaPl,
    Omega0Sq,
    Beta,
    Gamma,
    PhiC,
    Alpha,
    EC,
    G0TrSq,
    G0Tr50,
    G0DqdSq,
    OmegaR50,
}

impl DeviceParameter {
    pub const ALL: [DeviceParameter; 11] = [
        Self::OmegaPl,
        Self::Omega0Sq,
        Self::Beta,
        Self::Gamma,
        Self::PhiC,
        Self::Alpha,
        Self::EC,
        Self::G0TrSq,
        Self::G0Tr50,
        Self::G0DqdSq,
        Self::OmegaR50,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::OmegaPl => "omega_pl",
            Self::Omega0Sq => "omega0_sq",
            Self::Beta => "beta",
            Self::Gamma => "gamma",
            Self::PhiC => "phi_c",
            Self::Alpha => "alpha",
            Self::EC => "e_c",
            Self::G0TrSq => "g0_tr_sq",
            Self::G0Tr50 => "g0_tr_50",
            Self::G0DqdSq => "g0_dqd_sq",
            Self::OmegaR50 => "omega_r50",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn get(self, d: &DeviceParams) -> f64 {
        match self {
            Self::OmegaPl => d.transmon.plasma_frequency(),
            Self::Omega0Sq => d.squid.omega0,
            Self::Beta => d.squid.beta,
            Self::Gamma => d.squid.gamma,
            Self::PhiC => d.squid.phi_c,
            Self::Alpha => d.transmon.alpha,
            Self::EC => d.transmon.e_c,
            Self::G0TrSq => d.coupling.g0_tr_sq,
            Self::G0Tr50 => d.coupling.g0_tr_50,
            Self::G0DqdSq => d.coupling.g0_dqd_sq,
            Self::OmegaR50 => d.coupling.omega_r50,
        }
    }

    pub fn set(self, d: &mut DeviceParams, v: f64) {
        match self {
            Self::OmegaPl => d.transmon.omega_pl = Some(v),
            Self::Omega0Sq => d.squid.omega0 = v,
            Self::Beta => d.squid.beta = v,
            Self::Gamma => d.squid.gamma = v,
            Self::PhiC => d.squid.phi_c = v,
            Self::Alpha => d.transmon.alpha = v,
            Self::EC => d.transmon.e_c = v,
            Self::G0TrSq => d.coupling.g0_tr_sq = v,
            Self::G0Tr50 => d.coupling.g0_tr_50 = v,
            Self::G0DqdSq => d.coupling.g0_dqd_sq = v,
            Self::OmegaR50 => d.coupling.omega_r50 = v,
        }
    }
}

/// One extracted transition frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub bias: FluxBias,
    /// GHz.
    pub frequency: f64,
    pub weight: f64,
    /// Index of the transition in ascending order (0 = lowest).
    pub branch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeParameter {
    pub param: DeviceParameter,
    pub lower: f64,
    pub upper: f64,
}

/// Truncation used to compute model frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitModel {
    pub include_dqd: bool,
    pub n_tr: usize,
    pub n_sq: usize,
    pub n_50: usize,
}

impl Default for FitModel {
    fn default() -> Self {
        Self { include_dqd: false, n_tr: 4, n_sq: 5, n_50: 3 }
    }
}

impl FitModel {
    pub fn layout(&self) -> Result<SpaceLayout> {
        SpaceLayout::canonical_subset(self.include_dqd, Some(self.n_tr), Some(self.n_sq), Some(self.n_50))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitProblem {
    pub observations: Vec<Observation>,
    pub free: Vec<FreeParameter>,
    /// Fixed values and the starting point of the free parameters.
    pub device: DeviceParams,
    pub model: FitModel,
    pub max_iter: usize,
    /// Simplex spread tolerance on the RMS residual (GHz).
    pub spread_tol: f64,
    /// Simplex rebuilds around the best point after convergence.
    pub restarts: usize,
}

impl FitProblem {
    pub fn new(observations: Vec<Observation>, free: Vec<FreeParameter>, device: DeviceParams) -> Self {
        Self { observations, free, device, model: FitModel::default(), max_iter: 2000, spread_tol: 1e-5, restarts: 4 }
    }

    pub fn validate(&self) -> Result<()> {
        let active = self.observations.iter().filter(|o| o.weight > 0.0).count();
        if active < 2 * self.free.len() {
            return Err(Error::InvalidArgument(format!(
                "{active} weighted observations for {} free parameters; need at least twice as many",
                self.free.len()
            )));
        }
        if self.free.is_empty() {
            return Err(Error::InvalidArgument("no free parameters".into()));
        }
        for (i, f) in self.free.iter().enumerate() {
            if !(f.lower.is_finite() && f.upper.is_finite() && f.lower < f.upper) {
                return Err(Error::InvalidArgument(format!("bounds of {} must be finite and ordered", f.param.name())));
            }
            if self.free[..i].iter().any(|g| g.param == f.param) {
                return Err(Error::InvalidArgument(format!("{} listed twice", f.param.name())));
            }
        }
        if self.observations.iter().any(|o| !(o.weight >= 0.0) || !o.frequency.is_finite()) {
            return Err(Error::InvalidArgument("observation weights must be >= 0 and frequencies finite".into()));
        }
        self.device.validate()
    }
}

/// Lowest `n` transition frequencies of `device` at `bias`.
pub fn model_transitions(device: &DeviceParams, model: &FitModel, bias: &FluxBias, n: usize) -> Result<Vec<f64>> {
    let layout = model.layout()?;
    let cache = TransmonCache::new();
    let bare = resolve_device(device, bias, &device.dqd, &cache)?;
    let h = assemble_real(&bare, &layout)?;
    let e = eigvalsh_real(&h)?;
    Ok(e[1..=n.min(e.len() - 1)].iter().map(|x| x - e[0]).collect())
}

/// Noise-free observations of `branches` at every bias.
pub fn synthetic_observations(
    device: &DeviceParams,
    model: &FitModel,
    biases: &[FluxBias],
    branches: &[usize],
) -> Result<Vec<Observation>> {
    let top = branches.iter().max().map_or(0, |b| b + 1);
    let mut out = Vec::new();
    for b in biases {
        let f = model_transitions(device, model, b, top)?;
        for &k in branches {
            out.push(Observation { bias: *b, frequency: f[k], weight: 1.0, branch: k });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceFit {
    pub device: DeviceParams,
    pub values: Vec<(DeviceParameter, f64)>,
    /// Model minus observed frequency per observation (GHz).
    pub residuals: Vec<f64>,
    /// Weighted RMS residual (GHz).
    pub rms: f64,
    pub spread: f64,
    pub iterations: usize,
    /// Best RMS residual per simplex iteration across all rounds.
    pub history: Vec<f64>,
}

fn evaluate_residuals(problem: &FitProblem, device: &DeviceParams, groups: &[(FluxBias, Vec<usize>)], top: usize) -> Result<Vec<f64>> {
    let mut res = vec![0.0; problem.observations.len()];
    for (bias, idx) in groups {
        let f = model_transitions(device, &problem.model, bias, top)?;
        for &i in idx {
            let o = &problem.observations[i];
            let model = f.get(o.branch).copied().unwrap_or(f64::NAN);
            res[i] = model - o.frequency;
        }
    }
    Ok(res)
}

/// Weighted least-squares device fit by Nelder–Mead with restarts.
pub fn fit_device(problem: &FitProblem) -> Result<DeviceFit> {
    problem.validate()?;
    let mut groups: Vec<(FluxBias, Vec<usize>)> = Vec::new();
    for (i, o) in problem.observations.iter().enumerate() {
        if o.weight == 0.0 {
            continue;
        }
        match groups.iter_mut().find(|(b, _)| b == &o.bias) {
            Some((_, v)) => v.push(i),
            None => groups.push((o.bias, vec![i])),
        }
    }
    let top = problem.observations.iter().map(|o| o.branch + 1).max().unwrap_or(1);
    let wsum: f64 = problem.observations.iter().map(|o| o.weight).sum();
    let bounds: Vec<(f64, f64)> = problem.free.iter().map(|f| (f.lower, f.upper)).collect();
    let apply = |x: &[f64]| {
        let mut d = problem.device;
        for (f, &v) in problem.free.iter().zip(x) {
            f.param.set(&mut d, v);
        }
        d
    };
    let objective = |x: &[f64]| -> f64 {
        match evaluate_residuals(problem, &apply(x), &groups, top) {
            Ok(r) => {
                let s: f64 = r.iter().zip(&problem.observations).map(|(ri, o)| o.weight * ri * ri).sum();
                (s / wsum).sqrt()
            }
            Err(_) => f64::INFINITY,
        }
    };
    let opts = NelderMeadOptions { max_iter: problem.max_iter, f_tol: problem.spread_tol, x_tol: f64::INFINITY };
    let mut x: Vec<f64> = problem.free.iter().map(|f| f.param.get(&problem.device)).collect();
    let mut scale: Vec<f64> = x.iter().zip(&bounds).map(|(v, (lo, hi))| (0.05 * v.abs()).min(0.25 * (hi - lo)).max(1e-4)).collect();
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut last: Option<NelderMeadResult> = None;
    let mut converged = false;
    for _round in 0..=problem.restarts {
        let r = nelder_mead(objective, &x, &scale, Some(&bounds), &opts);
        iterations += r.iterations;
        history.extend(r.history.iter().copied());
        let improved = last.as_ref().map_or(f64::INFINITY, |l| l.fx - r.fx);
        converged = r.converged;
        x = r.x.clone();
        last = Some(r);
        if converged && improved < 0.1 * problem.spread_tol {
            break;
        }
        for s in scale.iter_mut() {
            *s *= 0.5;
        }
    }
    let last = last.expect("at least one round");
    // History across rounds is non-increasing because each round starts at the previous best.
    for i in 1..history.len() {
        history[i] = history[i].min(history[i - 1]);
    }
    if !converged {
        let best: Vec<String> = problem.free.iter().zip(&x).map(|(f, v)| format!("{}={v:.6}", f.param.name())).collect();
        return Err(Error::FitDivergence {
            message: format!("simplex did not reach spread {:.1e} GHz; best {}", problem.spread_tol, best.join(", ")),
            best_residual: last.fx,
        });
    }
    let device = apply(&x);
    let mut residuals = vec![0.0; problem.observations.len()];
    let all: Vec<(FluxBias, Vec<usize>)> = {
        let mut g: Vec<(FluxBias, Vec<usize>)> = Vec::new();
        for (i, o) in problem.observations.iter().enumerate() {
            match g.iter_mut().find(|(b, _)| b == &o.bias) {
                Some((_, v)) => v.push(i),
                None => g.push((o.bias, vec![i])),
            }
        }
        g
    };
    for (i, r) in evaluate_residuals(problem, &device, &all, top)?.into_iter().enumerate() {
        residuals[i] = r;
    }
    Ok(DeviceFit {
        device,
        values: problem.free.iter().zip(&x).map(|(f, &v)| (f.param, v)).collect(),
        residuals,
        rms: last.fx,
        spread: last.spread,
        iterations,
        history,
    })
}
