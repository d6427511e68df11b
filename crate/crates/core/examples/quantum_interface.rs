//! Stationary qubit coupled to both transmons of a giant emitter: cross-Kerr
//! strength, cancelled exchange and subradiant protection.

use std::f64::consts::PI;

use qnet::circuit::{
    self, balancing_capacitance, capacitance_for, coupler_for_kerr, interface_model, subradiance, CircuitParams, InterfaceParams,
};

fn main() -> qnet::Result<()> {
    let mhz = |f: f64| 2.0 * PI * 1e6 * f;
    let omega0 = circuit::from_ghz(8.0);
    let ec = omega0 / 800f64.sqrt();
    let ceff = capacitance_for(ec);
    let cp = 0.03 * ceff;
    let emitter = CircuitParams { ej1: 100.0 * ec, ej2: 100.0 * ec, ejc: 0.0, c1: ceff - cp, c2: ceff - cp, cc: 0.0, cp1: cp, cp2: cp, z0: 50.0, omega0 };

    let ecq = mhz(300.0);
    let ejq = 100.0 * ecq;
    let cq = capacitance_for(ecq);
    let ejc = coupler_for_kerr(mhz(50.0), ecq, ejq, ec, emitter.ej1);
    let ccc = balancing_capacitance(ejc, cq, emitter.c_eff()[0], ejq, emitter.ej1);
    let ip = InterfaceParams {
        ejq,
        cq: cq - 2.0 * ccc,
        ejc1: ejc,
        ejc2: ejc,
        ccc1: ccc,
        ccc2: ccc,
        omega_q: (8.0 * ejq * ecq).sqrt(),
        phase_qd: PI,
        cpq1: 0.01 * cq,
        cpq2: 0.01 * cq,
    };
    let m = interface_model(&ip, &emitter)?;
    let f = |w: f64| w / (2.0 * PI * 1e6);
    println!("V = {:.3} MHz, residual exchange = {:.1e} MHz, Kerr ratio = {:.3}", f(m.v1), f(m.residual_exchange), m.kerr_ratio);
    println!("qubit decay: single point {:.4} MHz, both points {:.1e} MHz", f(m.gamma_q1_eff), f(m.gamma_q));

    println!("\nphase   shift   decay   (rates in units of the single-point rate)");
    for k in 0..=4 {
        let ph = PI * k as f64 / 2.0;
        let (d, g) = subradiance(ph, 1.0, 1.0);
        println!("{ph:.3}   {d:+.3}   {g:.3}");
    }
    Ok(())
}
