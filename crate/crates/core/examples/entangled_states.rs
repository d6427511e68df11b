//! GHZ and linear cluster states built from photon parity measurements.

use qnet::protocols::{prepare_cluster_1d, prepare_ghz, ProtocolParams};

fn main() -> qnet::Result<()> {
    let params = ProtocolParams::default();
    for n in [2, 3, 4] {
        for dp in [0.0, 0.05] {
            let g = prepare_ghz(n, dp, &params)?;
            let c = prepare_cluster_1d(n, dp, &params)?;
            println!(
                "n = {n}, delta_p = {dp:.2}: GHZ {:.6} ({} branches), cluster {:.6}",
                g.fidelity.unwrap_or(f64::NAN),
                g.branches.len(),
                c.fidelity.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
