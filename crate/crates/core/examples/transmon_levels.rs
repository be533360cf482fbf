//! Charge-basis transmon: exact levels against the asymptotic formulas.

use hybridqed::device::TransmonParams;
use hybridqed::hamiltonian::{n01_asymptote, solve_transmon};

pub fn run() -> hybridqed::Result<()> {
    let p = TransmonParams { e_c: 0.243, e_j0: 30.0, omega_pl: None, ..TransmonParams::default() };
    for n_g in [0.0, 0.25, 0.5] {
        let sol = solve_transmon(&TransmonParams { n_g, ..p }, p.e_j0, p.charge_cutoff)?;
        println!(
            "n_g = {n_g:4}: omega_10 = {:.6} GHz, anharmonicity = {:.4} GHz, |n_01| = {:.4}",
            sol.omega_10(),
            sol.anharmonicity(),
            sol.n_matrix[0][1].abs()
        );
    }
    let asym = (8.0 * p.e_c * p.e_j0).sqrt() - p.e_c;
    println!("asymptotic: omega_10 = {asym:.6} GHz, anharmonicity = {:.4} GHz, |n_01| = {:.4}", -p.e_c, n01_asymptote(p.e_j0, p.e_c));
    Ok(())
}

#[allow(dead_code)]
fn main() -> hybridqed::Result<()> {
    run()
}
