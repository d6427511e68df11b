//! Library results against independent computations.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use num_complex::Complex64 as C64;
use qnet::dynamics::{cascaded_generator, dimer_state, TwoLevelChain};
use qnet::gue::{emission, GueParams};
use qnet::protocols::{pulse_average, PulseSpec};

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `∫_0^∞ |l·ψ(t)|² dt` for `ψ' = Aψ` from the Lyapunov equation
/// `A†X + XA = −l̄lᵀ`, solved as a 4×4 linear system.
fn lyapunov_rate(a: &Matrix2<C64>, l: &Vector2<C64>, psi: &Vector2<C64>) -> f64 {
    let q = l.conjugate() * l.transpose();
    let id = DMatrix::<C64>::identity(2, 2);
    let ad = DMatrix::from_iterator(2, 2, a.adjoint().iter().cloned());
    let am = DMatrix::from_iterator(2, 2, a.iter().cloned());
    // column stacking: vec(A†X) = (I⊗A†)vec X, vec(XA) = (Aᵀ⊗I)vec X
    let m = id.kronecker(&ad) + am.transpose().kronecker(&id);
    let rhs = DVector::from_iterator(4, q.iter().map(|z| -z));
    let x = m.lu().solve(&rhs).expect("Lyapunov system is regular");
    let x = Matrix2::from_iterator(x.iter().cloned());
    (psi.adjoint() * x * psi)[(0, 0)].re
}

#[test]
fn emission_matches_lyapunov_solution() {
    let psi = Vector2::new(c(1.0), c(0.0));
    for (r, dj, dphi) in [(0.0, 0.0, 0.0), (0.1, 0.05, -0.2), (0.2, -0.1, 0.3), (0.35, 0.2, 0.1)] {
        let mut p = GueParams::optimal(r, 1.0, 0.0).unwrap();
        p.j_hop += dj;
        p.phi += dphi;
        let em = emission(&p, psi).unwrap();
        let a = p.single_excitation_generator();
        let (lr, ll) = p.lr_ll();
        let (br, bl) = (lyapunov_rate(&a, &lr, &psi), lyapunov_rate(&a, &ll, &psi));
        assert!((em.beta_right - br).abs() < 1e-8, "r={r}: {} vs {br}", em.beta_right);
        assert!((em.beta_left - bl).abs() < 1e-8, "r={r}: {} vs {bl}", em.beta_left);
        assert!((br + bl - 1.0).abs() < 1e-9);
    }
}

fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// Steady state of the driven cascaded pair from a Liouvillian assembled
/// element by element in standard Lindblad form.
fn handbuilt_pair_steady_state(omega: f64, gamma: f64) -> DMatrix<C64> {
    let id2 = DMatrix::<C64>::identity(2, 2);
    let mut sm = DMatrix::<C64>::zeros(2, 2);
    sm[(0, 1)] = c(1.0); // |G⟩⟨R|, |G⟩ = index 0
    let s1 = kron(&sm, &id2);
    let s2 = kron(&id2, &sm);
    let i = C64::i();
    let drive = |s: &DMatrix<C64>| (s.adjoint() - s) * (-i * omega);
    // photons leave emitter 1 and pass emitter 2
    let h = drive(&s1) + drive(&s2) + (s2.adjoint() * &s1 - s1.adjoint() * &s2) * (-i * gamma / 2.0);
    let l = (&s1 + &s2) * c(gamma.sqrt());
    let id = DMatrix::<C64>::identity(4, 4);
    let ldl = l.adjoint() * &l;
    let liou = (kron(&id, &h) - kron(&h.transpose(), &id)) * (-i) + kron(&l.conjugate(), &l)
        - kron(&id, &ldl) * c(0.5)
        - kron(&ldl.transpose(), &id) * c(0.5);
    let svd = liou.svd(true, true);
    let k = svd.singular_values.imin();
    assert!(svd.singular_values[k] < 1e-10);
    let v = svd.v_t.unwrap().row(k).adjoint();
    let rho = DMatrix::from_iterator(4, 4, v.iter().cloned());
    let tr = rho.trace();
    rho / tr
}

#[test]
fn cascaded_pair_matches_handbuilt_liouvillian() {
    for omega in [0.05, 0.1, 0.3] {
        let want = handbuilt_pair_steady_state(omega, 1.0);
        let chain = TwoLevelChain { n_emitters: 2, omega_rabi: omega, delta: 0.0, gamma_r: 1.0, phi_tilde: 0.0 };
        let got = cascaded_generator(&chain).unwrap().steady_state().unwrap();
        let diff = (got.matrix() - &want).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "Ω={omega}: {diff}");
        // handbuilt state is the pure dimer
        let d = dimer_state(omega, 1.0).unwrap();
        let a = d.amplitudes();
        let f = (a.adjoint() * &want * a)[(0, 0)].re;
        assert!((f - 1.0).abs() < 1e-9, "Ω={omega}: {f}");
    }
}

#[test]
fn pulse_average_matches_brute_force_quadrature() {
    let (sigma, big_t) = (1.3, 6.0);
    let pulse = PulseSpec::truncated_gaussian(sigma, big_t).unwrap();
    let f = |d: f64| 1.0 / (1.0 + d * d);
    let avg = pulse_average(f, &pulse).unwrap();

    // spectrum by a midpoint rule in time, average by a midpoint rule in frequency
    let nt = 4000;
    let dt = big_t / nt as f64;
    let env: Vec<(f64, f64)> = (0..nt)
        .map(|k| {
            let t = -big_t / 2.0 + (k as f64 + 0.5) * dt;
            (t, (-t * t / (4.0 * sigma * sigma)).exp())
        })
        .collect();
    let norm: f64 = env.iter().map(|(_, e)| e * e * dt).sum();
    let spec2 = |d: f64| {
        let s: C64 = env.iter().map(|&(t, e)| C64::from_polar(e * dt, d * t)).sum();
        s.norm_sqr() / (2.0 * std::f64::consts::PI * norm)
    };
    let (lim, nd) = (200.0, 80_000);
    let dd = 2.0 * lim / nd as f64;
    let (mut mass, mut acc) = (0.0, 0.0);
    for k in 0..nd {
        let d = -lim + (k as f64 + 0.5) * dd;
        let w = spec2(d) * dd;
        mass += w;
        acc += w * f(d);
    }
    assert!((mass - 1.0).abs() < 2e-3, "{mass}");
    assert!((avg - acc).abs() < 1e-4, "{avg} vs {acc}");
}
