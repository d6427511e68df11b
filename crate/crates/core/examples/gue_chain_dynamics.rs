//! Two giant emitters in series, driven from the left, relaxing into their dimer.

use qnet::dynamics::{gue_chain, NoiseSpec};
use qnet::gue::{optimal_params, GueParams};
use qnet::qops::{Operator, StateVector};

fn main() -> qnet::Result<()> {
    let (r, gamma_r, omega) = (0.1, 1.0, 0.1);
    let gamma = gamma_r / optimal_params(r, 1.0)?.gamma_r;
    let p = GueParams::optimal(r, gamma, 0.0)?.with_cutoff(2);
    let chain = gue_chain(&[p, p], 0.0, omega, gamma_r, &NoiseSpec::default(), true)?;
    let dark = chain.dimer(&[0], omega, gamma_r, 0.0)?;

    let space = chain.generator.space().clone();
    let rho0 = StateVector::basis(&space, 0).projector();
    let proj = Operator::new(space, dark.projector().matrix().clone())?;
    let flux = &chain.lr.dag() * &chain.lr;
    let times: Vec<f64> = (0..=8).map(|k| 10.0 * k as f64).collect();
    let traj = chain.generator.evolve(&rho0, &times, &[proj, flux])?;
    println!("t      <D|rho|D>   output flux");
    for (k, t) in traj.times.iter().enumerate() {
        println!("{t:5.1}  {:.6}    {:.2e}", traj.values[k][0].re, traj.values[k][1].re);
    }
    Ok(())
}
