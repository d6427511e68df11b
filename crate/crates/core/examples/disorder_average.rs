//! Directionality averaged over static disorder in the couplings.

use qnet::gue::averaged_directionality;

fn main() -> qnet::Result<()> {
    println!("sd_r   sd_gamma   mean beta_dir   sem");
    for (sd_r, sd_g) in [(0.0, 0.0), (0.01, 0.02), (0.02, 0.05), (0.05, 0.1)] {
        let a = averaged_directionality(0.2, 1.0, sd_r, sd_g, 500, 42)?;
        println!("{sd_r:.2}   {sd_g:.2}       {:.5}         {:.1e}", a.mean, a.sem);
    }
    Ok(())
}
