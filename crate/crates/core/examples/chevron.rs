//! Flux-pulse chevron: transmon population after a swap with the DQD.

use hybridqed::dynamics::{run_chevron, ChevronSetup};
use hybridqed::estimate::{find_dips, fit_damped_oscillation};
use hybridqed::spectra::uniform_grid;

pub fn run() -> hybridqed::Result<()> {
    let setup = ChevronSetup::default();
    let amps = uniform_grid(0.0, 1.0, 21)?;
    let plateaus = uniform_grid(0.0, 250.0, 126)?;
    let t = std::time::Instant::now();
    let map = run_chevron(&setup, &amps, &plateaus)?;
    println!("21 x 126 map in {:.2?}, max trace error {:.1e}", t.elapsed(), map.max_trace_error);
    for (i, &a) in amps.iter().enumerate().step_by(2) {
        let det = setup.map.frequency(a) - setup.omega_dqd;
        let fit = fit_damped_oscillation(&plateaus, map.column(i))?;
        let expect = (setup.two_j.powi(2) + det * det).sqrt();
        let first = find_dips(&plateaus, map.column(i), 0.0)?.first().map_or(f64::NAN, |d| d.frequency);
        println!(
            "a = {a:.1}  detuning {:+7.2} MHz  fitted {:6.2} MHz  expected {:6.2} MHz  first minimum {first:5.1} ns",
            1e3 * det,
            1e3 * fit.frequency,
            1e3 * expect
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> hybridqed::Result<()> {
    run()
}
