//! Random interferometric networks: exact resolvent scattering against the
//! factorized result, with and without unidirectionality.

use qnet::scatter::{general_scattering, ideal_scattering, random_network};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> qnet::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=4 {
        let spec = random_network(&mut rng, n, false)?;
        let a = ideal_scattering(&spec, 0.2)?;
        let b = general_scattering(&spec, 0.2)?;
        println!("N = {n}: backend difference {:.1e}", qnet::cli::max_amplitude_diff(&a, &b));
    }
    let spec = random_network(&mut rng, 3, true)?;
    let res = general_scattering(&spec, 0.2)?;
    let worst = (0..res.amplitudes.len())
        .flat_map(|s| (0..2).map(move |i| (i, s)))
        .map(|(i, s)| (res.total_probability(i, s) - 1.0).abs())
        .fold(0.0, f64::max);
    println!("broken network: max |P_out - 1| = {worst:.1e}");
    Ok(())
}
