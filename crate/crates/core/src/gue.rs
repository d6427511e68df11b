//! Two-transmon giant unidirectional emitter.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2, Vector2};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QnetError, Result};
use crate::ode::{Integrator, Tolerances};
use crate::qops::{cr, phase, truncated_boson, HilbertSpace, Operator, I};

/// Parameters of one emitter. Rates in rad/s (or any common unit), frame at ω₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GueParams {
    pub delta1: f64,
    pub delta2: f64,
    #[serde(default)]
    pub u1: f64,
    #[serde(default)]
    pub u2: f64,
    pub j_hop: f64,
    #[serde(default)]
    pub chi: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub r1: f64,
    pub r2: f64,
    pub phi: f64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

fn default_n_max() -> usize {
    3
}

impl GueParams {
    /// Symmetric emitter at the optimal phase and hopping, with both
    /// transmons detuned so that `|R⟩`, `|L⟩` sit at energy `-delta`.
    pub fn optimal(r: f64, gamma: f64, delta: f64) -> Result<Self> {
        let o = optimal_params(r, gamma)?;
        Ok(Self {
            delta1: delta + o.delta_shift,
            delta2: delta + o.delta_shift,
            u1: 0.0,
            u2: 0.0,
            j_hop: o.j_opt,
            chi: 0.0,
            gamma1: gamma,
            gamma2: gamma,
            r1: r,
            r2: r,
            phi: o.phi_opt,
            n_max: default_n_max(),
        })
    }

    pub fn with_nonlinearity(mut self, u: f64, chi: f64) -> Self {
        self.u1 = u;
        self.u2 = u;
        self.chi = chi;
        self
    }

    pub fn with_cutoff(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(QnetError::InvalidParameter(m.to_string()));
        let all = [
            self.delta1, self.delta2, self.u1, self.u2, self.j_hop, self.chi, self.gamma1, self.gamma2, self.r1,
            self.r2, self.phi,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return bad("non-finite emitter parameter");
        }
        if self.gamma1 < 0.0 || self.gamma2 < 0.0 {
            return bad("coupling rates must be non-negative");
        }
        if self.u1 < 0.0 || self.u2 < 0.0 || self.chi < 0.0 {
            return bad("anharmonicities must be non-negative");
        }
        if self.r1.abs() >= 1.0 || self.r2.abs() >= 1.0 {
            return bad("cross-coupling coefficients must satisfy |r| < 1");
        }
        if self.n_max < 2 {
            return Err(QnetError::InvalidDimension(format!("n_max = {} < 2", self.n_max)));
        }
        Ok(())
    }

    /// Single-excitation row vectors of `L̂_1`, `L̂_2` on `(â_1†|G⟩, â_2†|G⟩)`.
    pub fn l1_l2(&self) -> (Vector2<C64>, Vector2<C64>) {
        let s1 = self.gamma1.sqrt();
        let s2 = self.gamma2.sqrt();
        (Vector2::new(cr(s1), cr(s1 * self.r2)), Vector2::new(cr(s2 * self.r1), cr(s2)))
    }

    /// Single-excitation row vectors of `L̂_R`, `L̂_L`.
    pub fn lr_ll(&self) -> (Vector2<C64>, Vector2<C64>) {
        let (l1, l2) = self.l1_l2();
        let e = phase(self.phi);
        (l1 * e + l2, l1 + l2 * e)
    }

    /// `Ĥ_eff` restricted to one excitation.
    pub fn single_excitation_hamiltonian(&self) -> Matrix2<C64> {
        let (l1, l2) = self.l1_l2();
        let mut h = Matrix2::new(cr(-self.delta1), cr(self.j_hop), cr(self.j_hop), cr(-self.delta2));
        let s = self.phi.sin();
        h += (l2.conjugate() * l1.transpose() + l1.conjugate() * l2.transpose()) * cr(s);
        h
    }

    /// `-iĤ_eff − ½(L̂_R†L̂_R + L̂_L†L̂_L)` restricted to one excitation.
    pub fn single_excitation_generator(&self) -> Matrix2<C64> {
        let (lr, ll) = self.lr_ll();
        self.single_excitation_hamiltonian() * (-I)
            - (lr.conjugate() * lr.transpose() + ll.conjugate() * ll.transpose()) * cr(0.5)
    }

    /// `[L̂_L†, L̂_R]`, a c-number for untruncated bosons.
    pub fn collective_commutator(&self) -> C64 {
        let (lr, ll) = self.lr_ll();
        -ll.dotc(&lr)
    }

    /// Mirror image: transmons 1 and 2 exchanged.
    pub fn mirrored(&self) -> Self {
        Self {
            delta1: self.delta2,
            delta2: self.delta1,
            u1: self.u2,
            u2: self.u1,
            gamma1: self.gamma2,
            gamma2: self.gamma1,
            r1: self.r2,
            r2: self.r1,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalParams {
    pub phi_opt: f64,
    pub j_opt: f64,
    pub gamma_r: f64,
    pub delta_shift: f64,
}

pub fn optimal_params(r: f64, gamma: f64) -> Result<OptimalParams> {
    if !(r.abs() < 1.0) {
        return Err(QnetError::InvalidParameter(format!("|r| = {} must be < 1", r.abs())));
    }
    if !(gamma > 0.0) {
        return Err(QnetError::InvalidParameter(format!("gamma = {gamma} must be > 0")));
    }
    let phi_opt = PI / 2.0 + 2.0 * r.atan();
    let (s, c) = phi_opt.sin_cos();
    Ok(OptimalParams {
        phi_opt,
        j_opt: -gamma * (1.0 + r * r) * s,
        gamma_r: 2.0 * gamma * (1.0 + 2.0 * r * c + r * r),
        delta_shift: 2.0 * r * gamma * s,
    })
}

/// Local operators of one emitter on its own subsystems.
#[derive(Debug, Clone)]
pub struct GueOperators {
    pub space: Arc<HilbertSpace>,
    pub a1: Operator,
    pub a2: Operator,
    pub h: Operator,
    pub l1: Operator,
    pub l2: Operator,
    pub lr: Operator,
    pub ll: Operator,
}

impl GueOperators {
    /// Fock-truncated transmons labelled `{label}.1`, `{label}.2`.
    pub fn fock(p: &GueParams, label: &str) -> Result<Self> {
        p.validate()?;
        let space = Arc::new(HilbertSpace::new(vec![
            (format!("{label}.1"), p.n_max),
            (format!("{label}.2"), p.n_max),
        ])?);
        let a = truncated_boson(p.n_max)?;
        let a1 = crate::qops::embed(a.matrix(), &space, &format!("{label}.1"))?;
        let a2 = crate::qops::embed(a.matrix(), &space, &format!("{label}.2"))?;
        Self::assemble(p, space, a1, a2)
    }

    /// Hard-core limit `U_k, χ → ∞`: one three-level subsystem `{G, |10⟩, |01⟩}`.
    pub fn hard_core(p: &GueParams, label: &str) -> Result<Self> {
        p.validate()?;
        let space = Arc::new(HilbertSpace::single(label, 3)?);
        let mut m1 = DMatrix::zeros(3, 3);
        m1[(0, 1)] = cr(1.0);
        let mut m2 = DMatrix::zeros(3, 3);
        m2[(0, 2)] = cr(1.0);
        let a1 = Operator::new(space.clone(), m1)?;
        let a2 = Operator::new(space.clone(), m2)?;
        Self::assemble(p, space, a1, a2)
    }

    fn assemble(p: &GueParams, space: Arc<HilbertSpace>, a1: Operator, a2: Operator) -> Result<Self> {
        let n1 = &a1.dag() * &a1;
        let n2 = &a2.dag() * &a2;
        let l1 = &(&a1 + &(&a2 * p.r2)) * p.gamma1.sqrt();
        let l2 = &(&a2 + &(&a1 * p.r1)) * p.gamma2.sqrt();
        let e = phase(p.phi);
        let lr = &(&l1 * e) + &l2;
        let ll = &l1 + &(&l2 * e);
        let kerr = |a: &Operator, u: f64| {
            let ad = a.dag();
            &(&(&(&ad * &ad) * a) * a) * (-0.5 * u)
        };
        let mut h = &(&n1 * -p.delta1) + &(&n2 * -p.delta2);
        h = &h + &kerr(&a1, p.u1);
        h = &h + &kerr(&a2, p.u2);
        h = &h + &(&(&n1 * &n2) * -p.chi);
        h = &h + &(&(&(&a1.dag() * &a2) + &(&a2.dag() * &a1)) * p.j_hop);
        h = &h + &(&(&(&l2.dag() * &l1) + &(&l1.dag() * &l2)) * p.phi.sin());
        Ok(Self { space, a1, a2, h, l1, l2, lr, ll })
    }

    pub fn ground(&self) -> crate::qops::StateVector {
        crate::qops::StateVector::basis(&self.space, 0)
    }

    /// `â_R†|G⟩` with `â_R = (iâ_1 + â_2)/√2`.
    pub fn right_state(&self) -> Result<crate::qops::StateVector> {
        let ar = &(&(&self.a1 * I) + &self.a2) * (1.0 / 2f64.sqrt());
        self.ground().apply(&ar.dag())
    }

    /// `â_L†|G⟩` with `â_L = (â_1 + iâ_2)/√2`.
    pub fn left_state(&self) -> Result<crate::qops::StateVector> {
        let al = &(&self.a1 + &(&self.a2 * I)) * (1.0 / 2f64.sqrt());
        self.ground().apply(&al.dag())
    }
}

pub fn build_hamiltonian(p: &GueParams) -> Result<Operator> {
    Ok(GueOperators::fock(p, "t")?.h)
}

/// `(L̂_1, L̂_2, L̂_R, L̂_L)`
pub fn build_coupling_ops(p: &GueParams) -> Result<(Operator, Operator, Operator, Operator)> {
    let o = GueOperators::fock(p, "t")?;
    Ok((o.l1, o.l2, o.lr, o.ll))
}

/// Single-excitation amplitudes of `â_R†|G⟩` and `â_L†|G⟩`.
pub fn right_amplitudes() -> Vector2<C64> {
    Vector2::new(-I, cr(1.0)) / cr(2f64.sqrt())
}

pub fn left_amplitudes() -> Vector2<C64> {
    Vector2::new(cr(1.0), -I) / cr(2f64.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Emission {
    pub beta_right: f64,
    pub beta_left: f64,
    /// Population left in the emitter at the horizon.
    pub residual: f64,
    pub horizon: f64,
}

/// Right- and left-emitted probabilities for a given initial single excitation.
pub fn emission(p: &GueParams, psi0: Vector2<C64>) -> Result<Emission> {
    p.validate()?;
    let gmin = p.gamma1.min(p.gamma2);
    if !(gmin > 0.0) {
        return Err(QnetError::InvalidParameter("directionality needs γ_1, γ_2 > 0".into()));
    }
    let horizon = 50.0 / gmin;
    let a = p.single_excitation_generator();
    let (lr, ll) = p.lr_ll();
    let rhs = move |_t: f64, y: &[C64], dy: &mut [C64]| {
        let (c1, c2) = (y[0], y[1]);
        dy[0] = a[(0, 0)] * c1 + a[(0, 1)] * c2;
        dy[1] = a[(1, 0)] * c1 + a[(1, 1)] * c2;
        dy[2] = cr((lr[0] * c1 + lr[1] * c2).norm_sqr());
        dy[3] = cr((ll[0] * c1 + ll[1] * c2).norm_sqr());
    };
    let tol = Tolerances { rtol: 1e-10, atol: 1e-10, ..Tolerances::default() };
    let mut y = vec![psi0[0], psi0[1], cr(0.0), cr(0.0)];
    Integrator::new(4, rhs, tol).integrate(0.0, horizon, &mut y)?;
    let residual = y[0].norm_sqr() + y[1].norm_sqr();
    if residual > 1e-8 {
        return Err(QnetError::Convergence(format!(
            "emitter population {residual:.3e} remains at horizon {horizon:.3e}"
        )));
    }
    Ok(Emission { beta_right: y[2].re, beta_left: y[3].re, residual, horizon })
}

/// `β_dir` for an emitter prepared in `â_R†|G⟩`.
pub fn directionality(p: &GueParams) -> Result<f64> {
    Ok(emission(p, right_amplitudes())?.beta_right)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Averaged {
    pub mean: f64,
    pub sem: f64,
}

/// Monte-Carlo mean of `β_dir` over uniform disorder in `r_k` and `γ_k`,
/// with `J`, `φ` fixed at their optimal values for the mean parameters and
/// `Δ_k = 0`.
pub fn averaged_directionality(
    mean_r: f64,
    mean_gamma: f64,
    sd_r: f64,
    sd_gamma: f64,
    samples: usize,
    seed: u64,
) -> Result<Averaged> {
    if sd_r < 0.0 || sd_gamma < 0.0 {
        return Err(QnetError::InvalidParameter("standard deviations must be >= 0".into()));
    }
    if samples == 0 {
        return Err(QnetError::InvalidParameter("samples must be >= 1".into()));
    }
    let o = optimal_params(mean_r, mean_gamma)?;
    let hw_r = 3f64.sqrt() * sd_r;
    let hw_g = 3f64.sqrt() * sd_gamma;
    let draw = |rng: &mut ChaCha8Rng, mean: f64, hw: f64| {
        if hw > 0.0 {
            rng.gen_range(mean - hw..mean + hw)
        } else {
            mean
        }
    };
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let p = GueParams {
                delta1: 0.0,
                delta2: 0.0,
                u1: 0.0,
                u2: 0.0,
                j_hop: o.j_opt,
                chi: 0.0,
                r1: draw(&mut rng, mean_r, hw_r),
                r2: draw(&mut rng, mean_r, hw_r),
                gamma1: draw(&mut rng, mean_gamma, hw_g),
                gamma2: draw(&mut rng, mean_gamma, hw_g),
                phi: o.phi_opt,
                n_max: 2,
            };
            directionality(&p)
        })
        .collect::<Result<_>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(Averaged { mean, sem: (var / n).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::max_abs;

    #[test]
    fn optimal_r_zero() {
        let o = optimal_params(0.0, 1.0).unwrap();
        assert!((o.phi_opt - PI / 2.0).abs() < 1e-15);
        assert!((o.j_opt + 1.0).abs() < 1e-15);
        assert!((o.gamma_r - 2.0).abs() < 1e-15);
    }

    #[test]
    fn optimal_closed_forms() {
        for r in [0.05, 0.2, -0.3] {
            let o = optimal_params(r, 1.0).unwrap();
            let want = 2.0 * (1.0 - r * r).powi(2) / (1.0 + r * r);
            assert!((o.gamma_r - want).abs() < 1e-14);
        }
        let o = optimal_params(0.2, 1.0).unwrap();
        assert!((o.phi_opt - 1.965587).abs() < 1e-6);
        assert!((o.j_opt + 0.96).abs() < 1e-14);
        assert!((o.gamma_r - 1.772308).abs() < 1e-6);
        assert!((optimal_params(0.05, 1.0).unwrap().gamma_r - 1.985050).abs() < 1e-6);
    }

    #[test]
    fn optimal_rejects_bad_input() {
        assert!(optimal_params(1.0, 1.0).is_err());
        assert!(optimal_params(0.1, 0.0).is_err());
    }

    #[test]
    fn decoupled_limit_is_bare_hamiltonian() {
        let p = GueParams {
            delta1: 0.3,
            delta2: -0.2,
            u1: 1.0,
            u2: 2.0,
            j_hop: 0.0,
            chi: 0.5,
            gamma1: 0.0,
            gamma2: 0.0,
            r1: 0.0,
            r2: 0.0,
            phi: 1.0,
            n_max: 3,
        };
        let h = build_hamiltonian(&p).unwrap();
        // |n1 n2⟩ with index 3 n1 + n2
        let e = |n1: usize, n2: usize| h.matrix()[(3 * n1 + n2, 3 * n1 + n2)].re;
        assert!((e(1, 0) + 0.3).abs() < 1e-14);
        assert!((e(2, 0) - (-0.6 - 1.0)).abs() < 1e-14);
        assert!((e(1, 1) - (-0.1 - 0.5)).abs() < 1e-14);
        assert!(h.is_hermitian(1e-12));
    }

    #[test]
    fn right_mode_is_eigenstate_at_optimum() {
        for (r, delta) in [(0.0, 0.0), (0.2, 0.3), (-0.1, -1.0)] {
            let p = GueParams::optimal(r, 1.0, delta).unwrap().with_nonlinearity(5.0, 2.0);
            let o = GueOperators::fock(&p, "g").unwrap();
            for psi in [o.right_state().unwrap(), o.left_state().unwrap()] {
                let hpsi = psi.apply(&o.h).unwrap();
                let res = hpsi.add(&psi, cr(delta)).norm();
                assert!(res < 1e-10, "r={r} residual {res}");
            }
        }
    }

    #[test]
    fn lr_is_delocalized_mode_at_r_zero() {
        let p = GueParams::optimal(0.0, 1.0, 0.0).unwrap();
        let o = GueOperators::fock(&p, "g").unwrap();
        let want = &(&(&o.a1 * I) + &o.a2) * 1.0;
        assert!(max_abs(&(o.lr.matrix() - want.matrix())) < 1e-15);
    }

    #[test]
    fn collective_ops_commute_only_when_symmetric() {
        let p = GueParams::optimal(0.2, 1.0, 0.0).unwrap().with_cutoff(4);
        assert!(p.collective_commutator().norm() <= 1e-12);
        // away from the cutoff the truncated commutator is exact
        let low = |c: &Operator| {
            let m = c.matrix();
            let mut worst = 0f64;
            for i in 0..16 {
                for j in 0..16 {
                    if i / 4 < 3 && i % 4 < 3 && j / 4 < 3 && j % 4 < 3 {
                        worst = worst.max(m[(i, j)].norm());
                    }
                }
            }
            worst
        };
        let (_, _, lr, ll) = build_coupling_ops(&p).unwrap();
        assert!(low(&ll.dag().commutator(&lr)) <= 1e-12);
        let q = GueParams { gamma1: 1.2, ..p };
        assert!(q.collective_commutator().norm() > 1e-3);
        let (_, _, lr, ll) = build_coupling_ops(&q).unwrap();
        assert!(low(&ll.dag().commutator(&lr)) > 1e-3);
    }

    #[test]
    fn perfect_directionality_at_optimum() {
        let p = GueParams::optimal(0.2, 1.0, 0.0).unwrap();
        let e = emission(&p, right_amplitudes()).unwrap();
        assert!(e.beta_right >= 1.0 - 1e-6);
        assert!((e.beta_right + e.beta_left - 1.0).abs() < 1e-8);
    }

    #[test]
    fn symmetric_reference_value() {
        let p = GueParams {
            delta1: 0.0,
            delta2: 0.0,
            u1: 0.0,
            u2: 0.0,
            j_hop: 0.0,
            chi: 0.0,
            gamma1: 1.0,
            gamma2: 1.0,
            r1: 0.0,
            r2: 0.0,
            phi: PI / 2.0,
            n_max: 2,
        };
        let e = emission(&p, right_amplitudes()).unwrap();
        assert!((e.beta_right - 0.75).abs() < 1e-8);
        assert!((e.beta_left - 0.25).abs() < 1e-8);
    }

    #[test]
    fn hopping_detuned_by_tenth_of_gamma() {
        let o = optimal_params(0.2, 1.0).unwrap();
        for dj in [-0.1, 0.1] {
            let p = GueParams { delta1: 0.0, delta2: 0.0, j_hop: o.j_opt + dj, ..GueParams::optimal(0.2, 1.0, 0.0).unwrap() };
            assert!(directionality(&p).unwrap() > 0.99);
        }
    }

    #[test]
    fn degenerate_average_equals_point_value() {
        let a = averaged_directionality(0.2, 1.0, 0.0, 0.0, 3, 1).unwrap();
        assert!(a.mean >= 1.0 - 1e-6);
        assert_eq!(a.sem, 0.0);
    }

    #[test]
    fn average_is_deterministic() {
        let a = averaged_directionality(0.2, 1.0, 0.02, 0.05, 40, 9).unwrap();
        let b = averaged_directionality(0.2, 1.0, 0.02, 0.05, 40, 9).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.sem.to_bits(), b.sem.to_bits());
    }

    #[test]
    fn zero_rate_is_rejected() {
        let p = GueParams { gamma1: 0.0, ..GueParams::optimal(0.0, 1.0, 0.0).unwrap() };
        assert!(directionality(&p).is_err());
    }
}
