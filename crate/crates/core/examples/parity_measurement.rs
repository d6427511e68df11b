//! Z-parity of a qubit subset read out by one photon.

use qnet::protocols::{parity_fidelity, parity_network, ProtocolParams};

fn main() -> qnet::Result<()> {
    let params = ProtocolParams::default();
    for n in [2, 4, 6] {
        let subset: Vec<usize> = (0..n).collect();
        let net = parity_network(n, &subset, &params)?;
        let f: Vec<String> = [0.0, 0.01, 0.05]
            .iter()
            .map(|&dp| parity_fidelity(&net, n, &subset, dp, params.backend).map(|f| format!("{f:.6}")))
            .collect::<qnet::Result<_>>()?;
        println!("n_G = {n}: F_Z at delta_p = 0, 0.01, 0.05 -> {}", f.join(", "));
    }

    // only qubits 1 and 3 of four enter the parity
    let net = parity_network(4, &[0, 2], &params)?;
    println!("subset {{1,3}} of 4: F_Z(0) = {:.12}", parity_fidelity(&net, 4, &[0, 2], 0.0, params.backend)?);
    Ok(())
}
