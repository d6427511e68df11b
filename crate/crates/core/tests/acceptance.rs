//! Acceptance runs. Each criterion replays a bundled config from
//! `examples/configs/` and prints one PASS/FAIL line.

use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex64 as C64;
use qnet::cli::{execute, Command, Dataset};
use qnet::protocols::{toric_apply_logical, Logical, ToricLattice};
use qnet::scatter::transmission;

fn config(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "examples", "configs", &format!("{name}.json")].iter().collect();
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn run(cmd: Command, name: &str) -> Result<(Dataset, f64), String> {
    let t = Instant::now();
    let d = execute(cmd, &config(name), 0).map_err(|e| format!("{name}: {e}"))?;
    Ok((d, t.elapsed().as_secs_f64()))
}

fn col(d: &Dataset, c: &str) -> Vec<f64> {
    d.column(c).unwrap_or_else(|| panic!("missing column {c}"))
}

fn sum(d: &Dataset, k: &str) -> f64 {
    d.summary_f64(k).unwrap_or(f64::NAN)
}

type Outcome = Result<(bool, String), String>;

fn c01() -> Outcome {
    let (d, t) = run(Command::Directionality, "c01_directionality_optimum")?;
    let b = col(&d, "beta_dir")[0];
    Ok((b >= 1.0 - 1e-6 && t < 1.0, format!("beta_dir = {b:.12}, {t:.3} s")))
}

fn c02() -> Outcome {
    let (d, t) = run(Command::Directionality, "c02_directionality_region")?;
    let m = sum(&d, "box_min_beta");
    Ok((m >= 0.99 && t < 30.0 && d.rows.len() == 101 * 101, format!("min beta_dir in box = {m:.4}, {t:.1} s")))
}

fn c03() -> Outcome {
    let (d, _) = run(Command::Directionality, "c03_directionality_disorder")?;
    let (m, s) = (col(&d, "beta_mean")[0], col(&d, "beta_sem")[0]);
    let n = sum(&d, "samples");
    Ok((m > 0.99 && s < 0.002 && n >= 500.0, format!("mean = {m:.5}, sem = {s:.2e}, {n} samples")))
}

fn c04() -> Outcome {
    let (sym, _) = run(Command::Directionality, "c01_directionality_optimum")?;
    let (asym, _) = run(Command::Directionality, "c04_commutator_asymmetric")?;
    let (a, b) = (col(&sym, "commutator_norm")[0], col(&asym, "commutator_norm")[0]);
    Ok((a <= 1e-12 && b > 1e-3, format!("symmetric {a:.2e}, gamma1/gamma2 = 1.2: {b:.3e}")))
}

fn c05() -> Outcome {
    let (d2, _) = run(Command::Dynamics, "c05_dark_state_n2")?;
    let (d4, _) = run(Command::Dynamics, "c05_dark_state_n4")?;
    let inf2 = col(&d2, "infidelity")[0];
    let flux = col(&d2, "output_flux")[0];
    let inf4 = col(&d4, "infidelity")[0];
    Ok((
        inf2 <= 1e-8 && flux <= 1e-8 && inf4 <= 1e-6,
        format!("N=2: 1-F = {inf2:.1e}, flux = {flux:.1e}; N=4 vs two dimers: 1-F = {inf4:.1e}"),
    ))
}

fn c06() -> Outcome {
    let (a, _) = run(Command::Dynamics, "c06_dephasing_slope")?;
    let (b, _) = run(Command::Dynamics, "c06_drive_slope")?;
    let (sg, so) = (sum(&a, "slope_gamma_phi"), sum(&b, "slope_omega"));
    Ok(((sg - 1.0).abs() <= 0.1 && (so - 2.0).abs() <= 0.1, format!("slope vs gamma_phi = {sg:.4}, vs Omega = {so:.4}")))
}

fn c07() -> Outcome {
    let (d, _) = run(Command::Scatter, "c07_scattering_unitarity")?;
    let e = sum(&d, "max_probability_error");
    let broken = sum(&d, "broken_samples");
    Ok((
        e <= 1e-10 && d.rows.len() >= 1000 && broken > 0.0,
        format!("max |P_out - 1| = {e:.1e} over {} sets ({broken} broken)", d.rows.len()),
    ))
}

fn c08() -> Outcome {
    let (d, _) = run(Command::Scatter, "c08_backend_equivalence")?;
    let e = sum(&d, "max_backend_diff");
    let nmax = col(&d, "n_nodes").into_iter().fold(0.0, f64::max);
    Ok((e <= 1e-8 && d.rows.len() >= 100 && nmax <= 4.0, format!("max amplitude difference = {e:.1e} over {} networks", d.rows.len())))
}

fn c09() -> Outcome {
    let g = 1.0;
    let t0 = transmission(0.0, g);
    let tm = transmission(-0.5 * g, g);
    let tp = transmission(0.5 * g, g);
    let bare = (t0 + 1.0).norm().max((tm - C64::i()).norm()).max((tp + C64::i()).norm());
    let (d, _) = run(Command::Scatter, "c09_phase_gate")?;
    let dp = col(&d, "delta_p");
    let (re, im) = (col(&d, "t_re"), col(&d, "t_im"));
    let mut gate: f64 = 0.0;
    for k in (0..dp.len()).filter(|&k| dp[k] == 0.0) {
        let want = if col(&d, "qubit")[k] == 0.0 { C64::i() } else { -C64::i() };
        gate = gate.max((C64::new(re[k], im[k]) - want).norm());
    }
    Ok((bare <= 1e-12 && gate <= 1e-12, format!("bare node error {bare:.1e}, node operator vs i sigma_z {gate:.1e}")))
}

fn c10() -> Outcome {
    let (d, _) = run(Command::Protocol, "c10_qst")?;
    let (dp, f, diff) = (col(&d, "delta_p"), col(&d, "fidelity"), col(&d, "difference"));
    let mut worst: f64 = 0.0;
    let mut coeff = f64::NAN;
    for k in 0..dp.len() {
        if [0.0, 0.02, 0.05, 0.1].contains(&dp[k]) {
            worst = worst.max(diff[k].abs());
        }
        if dp[k] > 0.0 && dp[k] < 0.01 {
            coeff = (1.0 - f[k]) / (dp[k] * dp[k]);
        }
    }
    let (r, _) = run(Command::Protocol, "c10_qst_retry")?;
    let (mean, sem, want) = (sum(&r, "mean_trials"), sum(&r, "sem_trials"), sum(&r, "expected_trials"));
    let fmin = sum(&r, "min_fidelity");
    let ok = worst <= 1e-6 && (coeff - 2.0).abs() <= 0.01 && (mean - want).abs() <= 3.0 * sem && fmin >= 1.0 - 1e-9 && sum(&r, "runs") >= 1e4;
    Ok((
        ok,
        format!(
            "closed form vs circuit {worst:.1e}, coefficient {coeff:.4}; retries {mean:.4} vs {want:.4} (3 sem = {:.4}), min F = {fmin:.12}",
            3.0 * sem
        ),
    ))
}

fn c11() -> Outcome {
    let (ideal, _) = run(Command::Scatter, "c11_stabilizer_ideal")?;
    let f0 = col(&ideal, "infidelity").into_iter().map(f64::abs).fold(0.0, f64::max);
    let (v, _) = run(Command::Scatter, "c11_stabilizer_v_fluctuation")?;
    let (j, _) = run(Command::Scatter, "c11_stabilizer_j_fluctuation")?;
    let (fv, fj) = (sum(&v, "min_fidelity"), sum(&j, "min_fidelity"));
    let (sd, _) = run(Command::Scatter, "c11_stabilizer_slope_delta")?;
    let (sv, _) = run(Command::Scatter, "c11_stabilizer_slope_v")?;
    let (sn, _) = run(Command::Scatter, "c11_stabilizer_slope_n")?;
    let s = [sum(&sd, "slope_delta_p"), sum(&sv, "slope_v"), sum(&sn, "slope_n_g")];
    let ok = f0 <= 1e-12 && fv >= 0.99 && fj >= 0.99 && s.iter().all(|x| (x - 2.0).abs() <= 0.1);
    Ok((
        ok,
        format!(
            "1-F_Z(0) = {f0:.1e}; 2% V: {fv:.4}, 5% J: {fj:.4}; slopes delta {:.3}, V {:.3}, n_G {:.3}",
            s[0], s[1], s[2]
        ),
    ))
}

fn c12() -> Outcome {
    let (d, t) = run(Command::Scatter, "c12_pulse_average")?;
    let b = sum(&d, "best_fidelity");
    let (sig, f) = (col(&d, "sigma_t_ns"), col(&d, "fidelity_avg"));
    let at = sig[f.iter().position(|&x| x == b).unwrap_or(0)];
    Ok((b >= 0.99 && t < 60.0, format!("best averaged F_Z = {b:.5} at sigma_t = {at} ns, {t:.1} s")))
}

fn c13() -> Outcome {
    let (d, _) = run(Command::Protocol, "c13_toric")?;
    let dev = sum(&d, "max_stabilizer_deviation");
    let rt = sum(&d, "round_trip_fidelity");
    let indep = sum(&d, "independent_stabilizers");
    let p: f64 = col(&d, "probability").iter().sum();
    let lat = ToricLattice::new(2).map_err(|e| e.to_string())?;
    let mut table = true;
    for (a, op) in [(1, Logical::X1), (2, Logical::X2)] {
        for b in 1..=4 {
            let s = lat.code_state(b).map_err(|e| e.to_string())?;
            let v = s.inner(&toric_apply_logical(&s, &lat, op));
            // X_a flips sign exactly on the states carrying Z_a
            let flipped = (a == 1 && (b == 2 || b == 4)) || (a == 2 && (b == 3 || b == 4));
            let want = if flipped { -1.0 } else { 1.0 };
            table &= (v - want).norm() <= 1e-12;
        }
    }
    let ok = dev <= 1e-10 && indep == 6.0 && (p - 1.0).abs() <= 1e-10 && rt >= 1.0 - 1e-9 && table;
    Ok((
        ok,
        format!(
            "{} branches, stabilizer deviation {dev:.1e}, {indep} independent, round trip {rt:.12}, sign table {}",
            d.rows.len(),
            if table { "ok" } else { "wrong" }
        ),
    ))
}

fn c14() -> Outcome {
    let (d, _) = run(Command::Protocol, "c14_detector")?;
    let (dp, p, tot) = (col(&d, "delta_p"), col(&d, "p_det"), col(&d, "total"));
    let at = |x: f64| dp.iter().position(|&v| v == x).map(|k| p[k]).unwrap_or(f64::NAN);
    let coeff = (1.0 - at(0.01)) / 0.01f64.powi(4);
    let sum_err = tot.iter().map(|t| (t - 1.0).abs()).fold(0.0, f64::max);
    let ok = (at(0.0) - 1.0).abs() <= 1e-12 && (at(1.0) - 0.2).abs() <= 1e-12 && (coeff - 4.0).abs() <= 0.05 && sum_err <= 1e-12;
    Ok((ok, format!("P(0) = {}, P(gamma_r) = {:.15}, quartic coefficient {coeff:.4}, sum error {sum_err:.1e}", at(0.0), at(1.0))))
}

fn c15() -> Outcome {
    let cfg: serde_json::Value = serde_json::from_str(&config("c15_circuit_renormalized")).map_err(|e| e.to_string())?;
    let ratio = cfg["circuit"]["ejc_ghz"].as_f64().unwrap_or(f64::NAN) / cfg["circuit"]["ej1_ghz"].as_f64().unwrap_or(f64::NAN);
    let (r, _) = run(Command::Circuit, "c15_circuit_renormalized")?;
    let q = col(&r, "relative_difference");
    let k = r.rows.iter().position(|row| row[0] == "chi").ok_or("no chi row")?;
    let chi_rel = q[k].abs();
    let (s, _) = run(Command::Circuit, "c15_circuit_sweep")?;
    let slope = sum(&s, "slope");
    let (sub, _) = run(Command::Circuit, "c15_subradiance")?;
    let (ph, gq) = (col(&sub, "phase"), col(&sub, "gamma_q_mhz"));
    let at_pi = ph.iter().position(|&x| x == std::f64::consts::PI).map(|k| gq[k]).unwrap_or(f64::NAN);
    let ok = ratio <= 0.02 && chi_rel <= 0.15 && (slope + 0.65).abs() <= 0.2 && at_pi.abs() <= 1e-12;
    Ok((ok, format!("chi analytic vs extracted {:.1}% at EJc/EJ = {ratio}, slope {slope:.3}, gamma_q(pi) = {at_pi:e}", 100.0 * chi_rel)))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 15] = [
        ("directionality optimum", c01),
        ("directionality region", c02),
        ("directionality under disorder", c03),
        ("collective operator orthogonality", c04),
        ("dark-state dimerization", c05),
        ("dephasing scaling", c06),
        ("scattering unitarity", c07),
        ("backend equivalence", c08),
        ("phase-gate anchors", c09),
        ("state transfer", c10),
        ("stabilizer fidelity", c11),
        ("pulse-averaged stabilizer", c12),
        ("toric code", c13),
        ("photon detector", c14),
        ("circuit mapping", c15),
    ];
    let mut failed = Vec::new();
    for (k, (name, f)) in criteria.iter().enumerate() {
        let (ok, detail) = match f() {
            Ok(x) => x,
            Err(e) => (false, format!("error: {e}")),
        };
        println!("{} {:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" }, k + 1);
        if !ok {
            failed.push(k + 1);
        }
    }
    if failed.is_empty() {
        println!("all {} criteria pass", criteria.len());
    } else {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
