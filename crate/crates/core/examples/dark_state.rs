//! Driven cascade of two-level emitters: the steady state is a product of
//! dark dimers, and dephasing lifts it.

use qnet::dynamics::{cascaded_generator_with_noise, cascaded_two_level, dimer_product, NoiseSpec, TwoLevelChain};
use qnet::qops::trace_product;

fn main() -> qnet::Result<()> {
    for n in [2, 4] {
        let chain = TwoLevelChain { n_emitters: n, omega_rabi: 0.1, delta: 0.0, gamma_r: 1.0, phi_tilde: 0.0 };
        for gamma_phi in [0.0, 1e-3] {
            let g = cascaded_generator_with_noise(&chain, &NoiseSpec { gamma_phi, gamma_nr: 0.0 })?;
            let rho = g.steady_state()?;
            let (_, lr) = cascaded_two_level(&chain)?;
            let flux = trace_product(&(lr.dag().matrix() * lr.matrix()), rho.matrix()).re;
            let overlap = rho.fidelity_pure(&dimer_product(n, 0.1, 1.0)?);
            println!("N = {n}, gamma_phi = {gamma_phi:.0e}: 1 - <D|rho|D> = {:.2e}, flux = {flux:.2e}", 1.0 - overlap);
        }
    }
    Ok(())
}
