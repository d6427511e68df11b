//! A single emitter–qubit node acts as a photon–qubit phase gate.

use qnet::scatter::{node_amplitudes, transmission, NodeParams};

fn main() -> qnet::Result<()> {
    let g = 1.0;
    println!("bare: t(0) = {:.3}, t(-g/2) = {:.3}, t(+g/2) = {:.3}", transmission(0.0, g), transmission(-0.5 * g, g), transmission(0.5 * g, g));
    let node = NodeParams::with_gamma_r(0.1, g, -0.5 * g, g)?;
    println!("\ndelta_p   t(|0>)            t(|1>)            |r|");
    for dp in [-1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0] {
        let a = node_amplitudes(&node, dp)?;
        println!("{dp:+.1}      {:+.4}   {:+.4}   {:.1e}", a.t0, a.t1, a.r0.norm().max(a.r1.norm()));
    }
    Ok(())
}
