//! Click probability of the interferometric single-photon detector.

use qnet::protocols::photon_detector;

fn main() -> qnet::Result<()> {
    println!("delta_p   P_det        (1 - P_det)/delta^4");
    for dp in [0.0, 0.01, 0.1, 0.5, 1.0, 2.0] {
        let r = photon_detector(dp, 1.0)?;
        let q = if dp > 0.0 { (1.0 - r.p_det) / dp.powi(4) } else { f64::NAN };
        println!("{dp:.2}      {:.8}   {q:.4}", r.p_det);
    }
    Ok(())
}
