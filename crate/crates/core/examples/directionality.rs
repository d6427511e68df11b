//! Emission direction of one giant emitter at and around the optimal point.

use qnet::gue::{self, GueParams};

fn main() -> qnet::Result<()> {
    for r in [0.0, 0.1, 0.2, 0.3] {
        let p = GueParams::optimal(r, 1.0, 0.0)?;
        let em = gue::emission(&p, gue::right_amplitudes())?;
        println!(
            "r = {r:.1}: J = {:+.4}, phi = {:.4}, beta_R = {:.10}, |[L_L†, L_R]| = {:.1e}",
            p.j_hop,
            p.phi,
            em.beta_right,
            p.collective_commutator().norm()
        );
    }

    // a cut through the (J, φ) plane with both transmons on resonance
    let base = GueParams::optimal(0.2, 1.0, 0.0)?;
    println!("\nJ - J_opt    beta_dir");
    for k in -4..=4 {
        let dj = 0.05 * k as f64;
        let p = GueParams { j_hop: base.j_hop + dj, delta1: 0.0, delta2: 0.0, ..base };
        println!("{dj:+.2}        {:.5}", gue::directionality(&p)?);
    }
    Ok(())
}
