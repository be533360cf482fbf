//! Synthetic round trip: transitions from known constants, then a Nelder-Mead fit.

use hybridqed::device::{transmon_frequency, DeviceParams, FluxBias};
use hybridqed::estimate::{fit_device, synthetic_observations, DeviceParameter, FitModel, FitProblem, FreeParameter};

pub fn run() -> hybridqed::Result<()> {
    let mut truth = DeviceParams::default();
    truth.transmon.charge_cutoff = 12;
    let biases: Vec<FluxBias> = (0..61)
        .map(|k| FluxBias::new(-0.3 + 0.01 * k as f64, 0.162))
        .filter(|b| transmon_frequency(&truth.transmon, b) >= 4.3)
        .collect();
    let obs = synthetic_observations(&truth, &FitModel::default(), &biases, &[0, 1, 2])?;

    use DeviceParameter::*;
    let mut start = truth;
    let mut free = Vec::new();
    for (k, p) in [OmegaPl, Omega0Sq, Beta, G0TrSq, G0Tr50].into_iter().enumerate() {
        let v = p.get(&truth);
        p.set(&mut start, v * if k % 2 == 0 { 1.1 } else { 0.9 });
        free.push(FreeParameter { param: p, lower: 0.5 * v, upper: 1.5 * v });
    }
    let t = std::time::Instant::now();
    let fit = fit_device(&FitProblem::new(obs, free, start))?;
    println!("{} iterations, rms {:.2e} GHz, {:.2?}", fit.iterations, fit.rms, t.elapsed());
    for (p, v) in &fit.values {
        let r = p.get(&truth);
        println!("{:10} truth {r:.5}  fitted {v:.5}  rel. error {:+.1e}", p.name(), (v - r) / r);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> hybridqed::Result<()> {
    run()
}
