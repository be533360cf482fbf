//! Detuning sweep through the dispersive qubit-qubit anticrossing.

use hybridqed::hamiltonian::{assemble, dispersive_exchange, OperatingPoint, TransmonCache};
use hybridqed::operators::SpaceLayout;
use hybridqed::spectra::{find_avoided_crossing_within, sweep_spectrum, SweepAxis};

pub fn run() -> hybridqed::Result<()> {
    let op = OperatingPoint::table2();
    let layout = SpaceLayout::canonical(4, 5, 3)?;
    let cache = TransmonCache::global();
    let axis = SweepAxis::linspace("delta", -1.5, 1.5, 301)?;
    let sweep = sweep_spectrum(&axis, 6, |d| Ok(assemble(&op.with_delta(d).resolve(cache)?, &layout)?.h))?;
    let c = find_avoided_crossing_within(&sweep, 0, 1, 0.0, 1.5)?;
    println!("numerical gap {:.3} MHz at delta = {:.4} GHz", c.gap_mhz, c.location);

    let two_j = dispersive_exchange(op.g_tr_sq, op.g_dqd_sq, op.omega_tr - op.omega_r_sq, op.two_tc - op.omega_r_sq)?;
    println!("dispersive estimate 2J = {:.3} MHz", 1e3 * two_j);

    for p in sweep.points.iter().step_by(50) {
        let f: Vec<String> = p.transitions.iter().take(3).map(|t| format!("{:.4}", t.frequency)).collect();
        println!("delta = {:+.2}: {}", p.axis_value, f.join("  "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> hybridqed::Result<()> {
    run()
}
