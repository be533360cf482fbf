//! One-port reflection of a bare resonator and the multiplexed two-resonator trace.

use hybridqed::spectra::{multiplexed_response, one_port_s11, uniform_grid, ResonatorLoss};

pub fn run() -> hybridqed::Result<()> {
    let f0 = 5.0;
    for (ext, int) in [(0.004, 0.008), (0.008, 0.004), (0.004, 0.0)] {
        let loss = ResonatorLoss::new(ext, int)?;
        let s = one_port_s11(&[(f0, 1.0)], &[f0], loss)?[0];
        println!(
            "kappa_ext = {:.0} MHz, kappa_int = {:.0} MHz: |S11| = {:.6}, arg = {:+.4} rad",
            1e3 * ext,
            1e3 * int,
            s.norm(),
            s.arg()
        );
    }
    let probe = uniform_grid(4.9, 6.6, 1701)?;
    let s_sq = one_port_s11(&[(5.181, 1.0)], &probe, ResonatorLoss::new(0.003, 0.005)?)?;
    let s_50 = one_port_s11(&[(6.490, 1.0)], &probe, ResonatorLoss::new(0.005, 0.002)?)?;
    let mux = multiplexed_response(&s_sq, &s_50, 0.0)?;
    let (i, m) = mux.iter().enumerate().fold((0, f64::INFINITY), |b, (i, &m)| if m < b.1 { (i, m) } else { b });
    println!("multiplexed minimum {m:.4} at {:.4} GHz", probe[i]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> hybridqed::Result<()> {
    run()
}
