//! Largest attainable χ at the directional operating point versus E_J/E_C.

use qnet::circuit::{self, design_sweep, SweepSettings};

fn main() -> qnet::Result<()> {
    let s = SweepSettings::new(circuit::from_ghz(8.0), vec![80.0, 120.0, 180.0, 250.0]);
    let rep = design_sweep(&s)?;
    let mhz = |w: f64| circuit::to_ghz(w) * 1e3;
    println!("E_J/E_C   r_opt    chi (MHz)   gamma (MHz)");
    for p in &rep.points {
        println!("{:>7.0}   {:.3}   {:>8.2}    {:.3}", p.ratio, p.r, mhz(p.chi), mhz(p.gamma));
    }
    println!("log-log slope of chi: {:.3}", rep.slope);
    Ok(())
}
