use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qnet::circuit::{self, capacitance_for, effective_model, CircuitParams};
use qnet::gue::{self, GueParams};
use qnet::protocols::{photon_detector, qst_entanglement_fidelity, qst_fidelity_closed_form, ProtocolParams};
use qnet::scatter::{general_scattering, ideal_scattering, random_network, transmission};

fn circuit_at(x: f64, frac: f64, r: f64) -> CircuitParams {
    let omega0 = circuit::from_ghz(8.0);
    let ec = omega0 / (8.0 * x).sqrt();
    let ceff = capacitance_for(ec);
    let (cc, cp) = (r * ceff, 0.03 * ceff);
    let c = ceff - cc - cp;
    CircuitParams { ej1: x * ec, ej2: x * ec, ejc: frac * x * ec, c1: c, c2: c, cc, cp1: cp, cp2: cp, z0: 50.0, omega0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn circuit_rates_scale_with_energy(x in 40.0..250.0f64, frac in 0.0..0.05f64, r in 0.0..0.4f64, lambda in 0.2..5.0f64) {
        let cp = circuit_at(x, frac, r);
        let a = effective_model(&cp).unwrap();
        let b = effective_model(&cp.with_energy_scale(lambda)).unwrap();
        for (u, v) in [(a.omega1, b.omega1), (a.u1, b.u1), (a.j_c, b.j_c), (a.j_i, b.j_i), (a.chi, b.chi), (a.gamma1, b.gamma1)] {
            prop_assert!((v - lambda * u).abs() <= 1e-9 * (lambda * u).abs().max(1.0));
        }
        prop_assert!((a.r1 - b.r1).abs() < 1e-12);
    }

    #[test]
    fn subradiance_is_periodic_and_smallest_at_pi(phase in -10.0..10.0f64, g1 in 0.0..100.0f64, g2 in 0.0..100.0f64) {
        let (d0, g0) = circuit::subradiance(phase, g1, g2);
        let (d1, g1p) = circuit::subradiance(phase + 2.0 * std::f64::consts::PI, g1, g2);
        prop_assert!((d0 - d1).abs() < 1e-9 && (g0 - g1p).abs() < 1e-9);
        let (_, gpi) = circuit::subradiance(std::f64::consts::PI, g1, g2);
        prop_assert!(g0 >= gpi - 1e-12);
        prop_assert!(g0 <= g1 + g2 + 2.0 * (g1 * g2).sqrt() + 1e-9);
    }

    #[test]
    fn random_networks_conserve_probability(seed in any::<u64>(), n in 1usize..5, broken in any::<bool>(), dp in -3.0..3.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_network(&mut rng, n, broken).unwrap();
        let res = general_scattering(&spec, dp).unwrap();
        for s in 0..res.amplitudes.len() {
            for i in 0..2 {
                prop_assert!((res.total_probability(i, s) - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn unidirectional_backends_agree(seed in any::<u64>(), n in 1usize..4, dp in -2.0..2.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_network(&mut rng, n, false).unwrap();
        let a = ideal_scattering(&spec, dp).unwrap();
        let b = general_scattering(&spec, dp).unwrap();
        prop_assert!(qnet::cli::max_amplitude_diff(&a, &b) < 1e-8);
    }

    #[test]
    fn bare_transmission_is_a_phase(x in -50.0..50.0f64, g in 0.01..10.0f64) {
        prop_assert!((transmission(x, g).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn detector_probabilities(dp in -20.0..20.0f64, g in 0.1..5.0f64) {
        let a = photon_detector(dp, g).unwrap();
        let b = photon_detector(-dp, g).unwrap();
        prop_assert!((0.0..=1.0).contains(&a.p_det));
        prop_assert!((a.p_det + a.p_no_click - 1.0).abs() < 1e-12);
        prop_assert!((a.p_det - b.p_det).abs() < 1e-12);
    }

    #[test]
    fn qst_closed_form_matches_simulation(dp in -3.0..3.0f64) {
        let f = qst_fidelity_closed_form(dp, 1.0);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
        let sim = qst_entanglement_fidelity(2, dp, &ProtocolParams::default()).unwrap();
        prop_assert!((sim - f).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn optimum_is_unidirectional(r in 0.0..0.45f64, gamma in 0.2..5.0f64) {
        let p = GueParams::optimal(r, gamma, 0.0).unwrap();
        prop_assert!(p.collective_commutator().norm() < 1e-12 * gamma);
        let b = gue::directionality(&p).unwrap();
        prop_assert!(b > 1.0 - 1e-6);
    }

    #[test]
    fn emission_conserves_probability(r in 0.0..0.4f64, dj in -0.3..0.3f64, dphi in -0.5..0.5f64) {
        let mut p = GueParams::optimal(r, 1.0, 0.0).unwrap();
        p.j_hop += dj;
        p.phi += dphi;
        let e = gue::emission(&p, gue::right_amplitudes()).unwrap();
        prop_assert!((e.beta_right + e.beta_left + e.residual - 1.0).abs() < 1e-8);
    }
}
