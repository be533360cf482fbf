//! Vacuum Rabi splittings of the DQD and the transmon seen in array reflection.

use hybridqed::device::DeviceParams;
use hybridqed::hamiltonian::{assemble, assemble_device, OperatingPoint, TransmonCache};
use hybridqed::operators::SpaceLayout;
use hybridqed::spectra::{tune_transmon_to_array, uniform_grid, vacuum_rabi_trace, ReflectionSpec, Resonator, ResonatorLoss};

pub fn run() -> hybridqed::Result<()> {
    let cache = TransmonCache::global();
    let layout = SpaceLayout::canonical(4, 5, 3)?;
    let loss = ResonatorLoss::new(0.004, 0.008)?;
    let cpw = ResonatorLoss::new(0.005, 0.002)?;

    let dqd = assemble(&OperatingPoint::dqd_vacuum_rabi().resolve(cache)?, &layout)?;
    let spec = ReflectionSpec { probe_grid: uniform_grid(3.9, 4.3, 2001)?, squid: loss, cpw, multiplex_phase: 0.0 };
    let t = vacuum_rabi_trace(&dqd.h, &spec, Resonator::Squid, 8)?;
    println!("DQD:      2g = {:.2} MHz, linewidth {:.2} MHz", 1e3 * t.splitting, 1e3 * t.linewidth);

    let mut dev = DeviceParams::default();
    dev.coupling.g0_tr_sq = 0.271;
    dev.dqd.t_c = 2.0;
    dev.dqd.delta = 10.0;
    let tuned = tune_transmon_to_array(&dev, 5.181, &layout, 0.02, 81, cache)?;
    let h = assemble_device(&dev, &tuned.bias, &dev.dqd, &layout, cache)?.h;
    let spec = ReflectionSpec { probe_grid: uniform_grid(4.6, 5.8, 2001)?, ..spec };
    let t = vacuum_rabi_trace(&h, &spec, Resonator::Squid, 8)?;
    println!(
        "transmon: 2g = {:.2} MHz at phi_sq = {:.5}, phi_tr = {:.5} (eigen-gap {:.2} MHz)",
        1e3 * t.splitting,
        tuned.bias.phi_sq,
        tuned.bias.phi_tr,
        tuned.crossing.gap_mhz
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> hybridqed::Result<()> {
    run()
}
