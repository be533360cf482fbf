//! Flux dependence of the array, transmon and couplings at the fitted constants.

use hybridqed::device::*;

pub fn run() -> hybridqed::Result<()> {
    let d = DeviceParams::default();
    println!("phi_sq   omega_r_sq  Z_sq/Z_0  omega_tr   g_tr_sq   g_tr_50   g_dqd_sq");
    for k in -6..=6 {
        let b = FluxBias::new(0.05 * k as f64, 0.162);
        println!(
            "{:+.2}   {:.4}      {:.4}    {:.4}    {:.4}    {:.4}    {:.4}",
            b.phi_sq,
            squid_array_frequency(&d.squid, &b),
            squid_impedance(&d.squid, &b),
            transmon_frequency(&d.transmon, &b),
            coupling_tr_sq(&d.coupling, &d.squid, &d.transmon, &b),
            coupling_tr_50(&d.coupling, &d.transmon, &b),
            coupling_dqd_sq(&d.coupling, &d.squid, &d.dqd, &b)?,
        );
    }
    let phi = solve_phi_sq_for_frequency(&d.squid, 4.089)?;
    println!("array at 4.089 GHz for phi_sq = {phi:.5} Phi0");
    Ok(())
}

#[allow(dead_code)]
fn main() -> hybridqed::Result<()> {
    run()
}
