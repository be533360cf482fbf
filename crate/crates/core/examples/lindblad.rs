//! Lindblad evolution of a damped Jaynes-Cummings pair and the Purcell estimate.

use std::f64::consts::PI;

use hybridqed::dynamics::{evolve, expectation, purcell_rate, purity, EvolveOptions, LindbladModel};
use hybridqed::operators::{annihilation, embed, pauli, Pauli, DQD, SQUID};
use hybridqed::spectra::jaynes_cummings;
use nalgebra::DMatrix;
use num_complex::Complex64;

pub fn run() -> hybridqed::Result<()> {
    let (g, kappa) = (0.010, 0.004);
    let h = jaynes_cummings(5.0, 5.0, g, 3)?;
    let layout = h.layout().clone();
    let a = embed(&annihilation(3)?, SQUID, &layout)?.into_matrix();
    let model = LindbladModel::new(layout.clone(), h.into_matrix())?.with_collapse(a.clone(), 2.0 * PI * kappa)?;

    // Qubit excited (local index 0), resonator empty.
    let i = layout.basis_index(&[0, 0])?;
    let mut rho0 = DMatrix::<Complex64>::zeros(layout.total_dim(), layout.total_dim());
    rho0[(i, i)] = Complex64::new(1.0, 0.0);
    let p_e = embed(&(pauli(Pauli::Plus).try_mul(&pauli(Pauli::Minus))?), DQD, &layout)?.into_matrix();
    let n = a.adjoint() * &a;

    let times: Vec<f64> = (0..=10).map(|k| 10.0 * k as f64).collect();
    let traj = evolve(&model, &rho0, &times, &EvolveOptions::default())?;
    for (t, rho) in traj.times.iter().zip(&traj.states) {
        println!(
            "t = {t:5.1} ns  P_e = {:.4}  <n> = {:.4}  purity = {:.4}",
            expectation(&p_e, rho).re,
            expectation(&n, rho).re,
            purity(rho)
        );
    }
    println!("max trace error {:.1e}, min eigenvalue {:.1e}", traj.max_trace_error, traj.min_eigenvalue);
    println!("Purcell rate at g = 128 MHz, Delta = 367 MHz, kappa = 12 MHz: {:.3} MHz", 1e3 * purcell_rate(0.128, 0.012, 0.367)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> hybridqed::Result<()> {
    run()
}
