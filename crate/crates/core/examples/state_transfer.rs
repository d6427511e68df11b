//! Photon-mediated state transfer, plain and with heralded retries under loss.

use num_complex::Complex64 as C64;
use qnet::protocols::{qst_entanglement_fidelity, qst_fidelity_closed_form, run_heralded_retry, ProtocolParams, RetrySettings};

fn main() -> qnet::Result<()> {
    let params = ProtocolParams::default();
    println!("delta_p   simulated     closed form");
    for dp in [0.0, 0.02, 0.05, 0.1, 0.3] {
        println!("{dp:.2}      {:.8}    {:.8}", qst_entanglement_fidelity(2, dp, &params)?, qst_fidelity_closed_form(dp, 1.0));
    }

    let s = 0.5f64.sqrt();
    let settings = RetrySettings { n_nodes: 2, loss_probability: 0.25, delta_p: 0.0, runs: 2000, seed: 1, max_trials: 1000 };
    let rep = run_heralded_retry([C64::new(s, 0.0), C64::new(0.0, s)], &settings, &params)?;
    println!(
        "\nretries: mean {:.3} ± {:.3} (expected {:.3}), min fidelity {:.10}",
        rep.mean_trials, rep.sem_trials, rep.expected_trials, rep.min_fidelity
    );
    Ok(())
}
