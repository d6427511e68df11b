//! Toric code on a 2×2 torus: generation by photon plaquette measurements and a
//! logical write-in/read-out round trip.

use num_complex::Complex64 as C64;
use qnet::protocols::{toric_generate, toric_round_trip, toric_stabilizers, BranchMode, ProtocolParams, ToricLattice};

fn main() -> qnet::Result<()> {
    let lat = ToricLattice::new(2)?;
    let params = ProtocolParams::default();
    println!("{} qubits, {} independent stabilizers", lat.n_qubits(), lat.independent_stabilizers());
    let out = toric_generate(&lat, 0.0, BranchMode::Enumerate, &params)?;
    for b in &out.branches {
        let (p, v) = toric_stabilizers(&b.register, &lat);
        let rec: Vec<String> = b.measurements.iter().map(|m| format!("{}={:+}", m.name, m.outcome)).collect();
        println!("p = {:.3}  {}  plaquettes {:?}  vertices {:?}", b.probability(), rec.join(" "), p, v);
    }
    let input = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
    for dp in [0.0, 0.02] {
        let rt = toric_round_trip(&lat, input, dp, &params)?;
        println!("round trip at delta_p = {dp}: fidelity {:.10}", rt.fidelity.unwrap_or(f64::NAN));
    }
    Ok(())
}
