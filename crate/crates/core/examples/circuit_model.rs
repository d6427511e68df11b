//! Two transmons joined by a capacitor and a junction: analytic effective model
//! against numbers extracted from the quantized circuit.

use qnet::circuit::{self, capacitance_for, effective_model, renormalized_hamiltonian, CircuitParams};

fn main() -> qnet::Result<()> {
    let omega0 = circuit::from_ghz(8.0);
    let x: f64 = 100.0;
    let ec = omega0 / (8.0 * x).sqrt();
    let ceff = capacitance_for(ec);
    let (cc, cp) = (0.05 * ceff, 0.03 * ceff);
    let c = ceff - cc - cp;
    let params = CircuitParams { ej1: x * ec, ej2: x * ec, ejc: 0.02 * x * ec, c1: c, c2: c, cc, cp1: cp, cp2: cp, z0: 50.0, omega0 };

    let em = effective_model(&params)?;
    let (_, ex) = renormalized_hamiltonian(&params, 8)?;
    let mhz = |w: f64| circuit::to_ghz(w) * 1e3;
    println!("           analytic (MHz)   extracted (MHz)");
    for (name, a, e) in [("omega1", em.omega1, ex.omega1), ("U1", em.u1, ex.u1), ("J", em.j(), ex.j), ("chi", em.chi, ex.chi)] {
        println!("{name:<10} {:>14.3}   {:>14.3}", mhz(a), mhz(e));
    }
    println!("gamma1 = {:.3} MHz, r = {:.3}, warnings: {:?}", mhz(em.gamma1), em.r1, em.warnings);
    println!("label overlap {:.4}, ambiguous: {}", ex.min_overlap, ex.ambiguous);
    Ok(())
}
