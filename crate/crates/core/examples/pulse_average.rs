//! Stabilizer fidelity averaged over the spectrum of a finite photon pulse.

use qnet::protocols::{parity_fidelity, parity_network, pulse_average, ProtocolParams, PulseSpec};

fn main() -> qnet::Result<()> {
    let params = ProtocolParams::default();
    let n = 4;
    let subset: Vec<usize> = (0..n).collect();
    let net = parity_network(n, &subset, &params)?;
    // γ_r = 2π × 50 MHz, so 1 ns = 0.1π / γ_r
    let ns = 2.0 * std::f64::consts::PI * 50e6 * 1e-9;
    for sigma_ns in [20.0, 50.0, 75.0] {
        let pulse = PulseSpec::truncated_gaussian(sigma_ns * ns, 400.0 * ns)?;
        let f = pulse_average(|dp| parity_fidelity(&net, n, &subset, dp, params.backend).unwrap_or(f64::NAN), &pulse)?;
        println!("sigma_t = {sigma_ns} ns, T = 400 ns: averaged F_Z = {f:.5}");
    }
    Ok(())
}
