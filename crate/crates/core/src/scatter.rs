//! Single-photon scattering through nodes made of an emitter and a
//! cross-Kerr coupled qubit.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{QnetError, Result};
use crate::gue::{optimal_params, GueParams};
use crate::qops::{cr, phase, I};
use crate::slh::{NetworkSpec, UP};

/// Emitter plus qubit. The emitter's own detunings are authoritative for the
/// dynamics; `delta_n` is the node detuning used by the ideal phase gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeParams {
    pub gue: GueParams,
    pub v1: f64,
    pub v2: f64,
    pub delta_n: f64,
}

impl NodeParams {
    /// Optimal symmetric emitter with coupling `gamma` per transmon.
    pub fn unidirectional(r: f64, gamma: f64, delta_n: f64, v: f64) -> Result<Self> {
        let gue = GueParams::optimal(r, gamma, delta_n)?.with_cutoff(2);
        let n = Self { gue, v1: v, v2: v, delta_n };
        n.validate()?;
        Ok(n)
    }

    /// Optimal symmetric emitter with effective rate `gamma_r`.
    pub fn with_gamma_r(r: f64, gamma_r: f64, delta_n: f64, v: f64) -> Result<Self> {
        let unit = optimal_params(r, 1.0)?.gamma_r;
        Self::unidirectional(r, gamma_r / unit, delta_n, v)
    }

    pub fn validate(&self) -> Result<()> {
        self.gue.validate()?;
        if !(self.v1 >= 0.0 && self.v2 >= 0.0) || !self.delta_n.is_finite() {
            return Err(QnetError::InvalidParameter("cross-Kerr V must be >= 0, Δ^n finite".into()));
        }
        Ok(())
    }

    /// `γ_r` of the symmetric emitter (uses transmon 1 when asymmetric).
    pub fn gamma_r(&self) -> f64 {
        let r = self.gue.r1;
        let c = (std::f64::consts::FRAC_PI_2 + 2.0 * r.atan()).cos();
        2.0 * self.gue.gamma1 * (1.0 + 2.0 * r * c + r * r)
    }

    fn symmetric(&self) -> bool {
        let g = &self.gue;
        (g.gamma1 - g.gamma2).abs() <= 1e-12 * g.gamma1.abs().max(1.0) && (g.r1 - g.r2).abs() <= 1e-12
    }

    /// Whether the emitter is at its unidirectional point for both qubit states.
    pub fn is_unidirectional(&self, tol: f64) -> bool {
        if !self.symmetric() || self.gue.gamma1 <= 0.0 {
            return false;
        }
        let g = &self.gue;
        let o = match optimal_params(g.r1, g.gamma1) {
            Ok(o) => o,
            Err(_) => return false,
        };
        let scale = o.gamma_r;
        let want = self.delta_n + o.delta_shift;
        let phase_ok = ((g.phi - o.phi_opt) / (2.0 * std::f64::consts::PI)).round() * 2.0 * std::f64::consts::PI;
        (g.phi - o.phi_opt - phase_ok).abs() <= tol
            && (g.j_hop - o.j_opt).abs() <= tol * scale
            && (g.delta1 - want).abs() <= tol * scale.max(want.abs())
            && (g.delta2 - want).abs() <= tol * scale.max(want.abs())
            && (self.v1 - self.v2).abs() <= tol * scale.max(self.v1)
    }

    /// Emitter parameters seen by the photon when the qubit is in `s`.
    pub fn conditioned(&self, s: usize) -> GueParams {
        let mut g = self.gue;
        if s == 1 {
            g.delta1 += self.v1;
            g.delta2 += self.v2;
        }
        g
    }
}

/// `t(x) = (2ix + γ_r)/(2ix − γ_r)`.
pub fn transmission(x: f64, gamma_r: f64) -> C64 {
    (cr(gamma_r) + I * (2.0 * x)) / (cr(-gamma_r) + I * (2.0 * x))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeAmplitudes {
    pub r0: C64,
    pub t0: C64,
    pub r1: C64,
    pub t1: C64,
}

fn closed_form(g: &GueParams, d: f64) -> (C64, C64) {
    let (gm, r, j, phi) = (g.gamma1, g.r1, g.j_hop, g.phi);
    let (d1, d2) = (g.delta1, g.delta2);
    let e = phase(phi);
    let r2 = r * r;
    let den = cr((d1 + d) * (d2 + d) - j * j)
        + I * 2.0 * gm * j * (e * (r2 + 1.0) + 2.0 * r)
        + (e * e - 1.0) * (gm * gm * (r2 - 1.0).powi(2))
        + I * gm * (e * 2.0 * r + r2 + 1.0) * (d1 + d2 + 2.0 * d);
    let sum = d1 + d2 + 2.0 * d;
    let t = cr((d1 + d) * (d2 + d) - j * j - 2.0 * gm * phi.sin() * (j * (1.0 + r2) + r * sum)) / den;
    let bracket = e * e * (d1 + r2 * d2 + 2.0 * j * r + r2 * d + d)
        + e * 2.0 * (j * (1.0 + r2) + r * sum)
        + cr(2.0 * j * r + d2 + r2 * d1 + r2 * d + d)
        + e * (2.0 * gm * (r2 - 1.0).powi(2) * phi.sin());
    let refl = -I * gm * e.conj() * bracket / den;
    (refl, t)
}

/// Reflection and transmission of a right-moving photon for both qubit states.
pub fn node_amplitudes(node: &NodeParams, delta_p: f64) -> Result<NodeAmplitudes> {
    node.validate()?;
    if !node.symmetric() {
        return Err(QnetError::UnsupportedClosedForm("asymmetric couplings (γ_1≠γ_2 or r_1≠r_2)".into()));
    }
    let (r0, t0) = closed_form(&node.conditioned(0), delta_p);
    let (r1, t1) = closed_form(&node.conditioned(1), delta_p);
    Ok(NodeAmplitudes { r0, t0, r1, t1 })
}

/// `diag(t(Δ^n + δ_p), t(Δ^n + δ_p + V))` in the qubit basis.
pub fn ideal_phase_gate(node: &NodeParams, delta_p: f64) -> Matrix2<C64> {
    let g = node.gamma_r();
    Matrix2::from_diagonal(&nalgebra::Vector2::new(
        transmission(node.delta_n + delta_p, g),
        transmission(node.delta_n + delta_p + node.v1, g),
    ))
}

pub const RIGHT: usize = 0;
pub const LEFT: usize = 1;

/// Scattering amplitudes at one photon frequency, per qubit bitstring.
/// Bitstring index `s` has node 1 as the most significant bit.
#[derive(Debug, Clone)]
pub struct ScatteringResult {
    pub delta_p: f64,
    pub n_nodes: usize,
    /// `amplitudes[s][dir][j][i]`: input on line `i` (right-moving), output on line `j` moving `dir`.
    pub amplitudes: Vec<[[[C64; 2]; 2]; 2]>,
    pub global_phase: C64,
}

impl ScatteringResult {
    pub fn amplitude(&self, dir: usize, j: usize, i: usize, s: usize) -> C64 {
        self.amplitudes[s][dir][j][i]
    }

    pub fn total_probability(&self, i: usize, s: usize) -> f64 {
        let a = &self.amplitudes[s];
        (0..2).flat_map(|d| (0..2).map(move |j| a[d][j][i].norm_sqr())).sum()
    }

    /// Bit of node `n` (from 0) in bitstring `s`.
    pub fn bit(&self, s: usize, n: usize) -> usize {
        (s >> (self.n_nodes - 1 - n)) & 1
    }

    /// Photon amplitude map on the qubit register for fixed `(dir, j, i)`:
    /// a diagonal operator stored as its diagonal.
    pub fn diagonal(&self, dir: usize, j: usize, i: usize) -> DVector<C64> {
        DVector::from_iterator(self.amplitudes.len(), self.amplitudes.iter().map(|a| a[dir][j][i]))
    }
}

fn check_size(n: usize) -> Result<()> {
    if n > 16 {
        return Err(QnetError::TooLarge(format!("{n} nodes: 2^N bitstrings exceed the cap of 2^16")));
    }
    Ok(())
}

fn bit(s: usize, n: usize, len: usize) -> usize {
    (s >> (len - 1 - n)) & 1
}

/// Haar-random 2×2 unitary.
pub fn random_unitary<R: Rng>(rng: &mut R) -> Matrix2<C64> {
    let theta = (1.0 - 2.0 * rng.gen::<f64>()).acos() / 2.0;
    let [a, b, c] = [0; 3].map(|_| rng.gen_range(0.0..2.0 * std::f64::consts::PI));
    let (ct, st) = (theta.cos(), theta.sin());
    Matrix2::new(phase(a) * ct, phase(b) * st, -phase(-b) * st, phase(-a) * ct) * phase(c)
}

/// Random node with `γ_r = 1` scale. With `broken`, hopping, phase and the
/// two couplings are perturbed away from unidirectionality.
pub fn random_node<R: Rng>(rng: &mut R, broken: bool) -> Result<NodeParams> {
    let r = rng.gen_range(0.0..0.4);
    let delta_n = rng.gen_range(-2.0..2.0);
    let v = rng.gen_range(0.0..2.0);
    let mut node = NodeParams::with_gamma_r(r, 1.0, delta_n, v)?;
    if broken {
        let g = &mut node.gue;
        g.j_hop *= rng.gen_range(0.7..1.3);
        g.phi += rng.gen_range(-0.5..0.5);
        g.gamma2 = g.gamma1 * rng.gen_range(0.6..1.4);
        g.r2 = rng.gen_range(0.0..0.4);
        g.delta2 += rng.gen_range(-0.5..0.5);
        node.v2 = v * rng.gen_range(0.5..1.5);
    }
    Ok(node)
}

/// Network of `n` random nodes and random beamsplitters.
pub fn random_network<R: Rng>(rng: &mut R, n: usize, broken: bool) -> Result<NetworkSpec> {
    let nodes = (0..n).map(|_| random_node(rng, broken)).collect::<Result<Vec<_>>>()?;
    let us = (0..=n).map(|_| random_unitary(rng)).collect();
    NetworkSpec::new(nodes, us, rng.gen_range(0.0..2.0 * std::f64::consts::PI))
}

/// Factorized network form, valid when every node is unidirectional.
pub fn ideal_scattering(spec: &NetworkSpec, delta_p: f64) -> Result<ScatteringResult> {
    spec.validate()?;
    let n = spec.len();
    check_size(n)?;
    for (k, node) in spec.nodes.iter().enumerate() {
        if !node.is_unidirectional(1e-9) {
            return Err(QnetError::Precondition(format!("node {} is not unidirectional", k + 1)));
        }
    }
    let gates: Vec<Matrix2<C64>> = spec.nodes.iter().map(|nd| ideal_phase_gate(nd, delta_p)).collect();
    let amplitudes = (0..1usize << n)
        .map(|s| {
            let mut m = spec.beamsplitters[0];
            for k in 0..n {
                let mut d = Matrix2::identity();
                let b = bit(s, k, n);
                d[(UP, UP)] = gates[k][(b, b)];
                m = spec.beamsplitters[k + 1] * d * m;
            }
            let mut a = [[[cr(0.0); 2]; 2]; 2];
            for j in 0..2 {
                for i in 0..2 {
                    a[0][j][i] = m[(j, i)];
                }
            }
            a
        })
        .collect();
    Ok(ScatteringResult { delta_p, n_nodes: n, amplitudes, global_phase: phase(spec.phi_tilde * n as f64) })
}

fn row_vectors(g: &GueParams) -> ([C64; 2], [C64; 2], Matrix2<C64>) {
    let (lr, ll) = g.lr_ll();
    ([lr[0], lr[1]], [ll[0], ll[1]], g.single_excitation_generator())
}

/// Resolvent form for arbitrary node parameters.
pub fn general_scattering(spec: &NetworkSpec, delta_p: f64) -> Result<ScatteringResult> {
    spec.validate()?;
    let n = spec.len();
    check_size(n)?;
    let us = &spec.beamsplitters;
    let pt = spec.phi_tilde;
    // prod(a, b) = U_b ⋯ U_a, identity when a > b
    let prod = |a: usize, b: usize| {
        let mut m = Matrix2::<C64>::identity();
        for u in us.iter().take(b + 1).skip(a) {
            m = u * m;
        }
        m
    };
    let s_r = prod(0, n);
    let fwd: Vec<Vec<C64>> = (0..n).map(|a| (0..n).map(|b| if b > a { prod(a + 1, b)[(UP, UP)] } else { cr(0.0) }).collect()).collect();
    let gph = phase(pt * n as f64);
    let amplitudes = (0..1usize << n)
        .into_par_iter()
        .map(|s| {
            let parts: Vec<_> = spec.nodes.iter().enumerate().map(|(k, nd)| row_vectors(&nd.conditioned(bit(s, k, n)))).collect();
            let dim = 2 * n;
            let mut f = DMatrix::<C64>::zeros(dim, dim);
            for (k, (_, _, gen)) in parts.iter().enumerate() {
                for a in 0..2 {
                    for b in 0..2 {
                        f[(2 * k + a, 2 * k + b)] = gen[(a, b)];
                    }
                    f[(2 * k + a, 2 * k + a)] += I * delta_p;
                }
            }
            for p in 0..n {
                for m in 0..n {
                    if p == m {
                        continue;
                    }
                    let (c, lo, hi) = if p > m {
                        (phase(pt * (p - m) as f64) * fwd[m][p], &parts[p].0, &parts[m].0)
                    } else {
                        (phase(pt * (m - p) as f64) * fwd[p][m], &parts[p].1, &parts[m].1)
                    };
                    for a in 0..2 {
                        for b in 0..2 {
                            f[(2 * p + a, 2 * m + b)] -= c * lo[a].conj() * hi[b];
                        }
                    }
                }
            }
            let lu = f.lu();
            let mut out = [[[cr(0.0); 2]; 2]; 2];
            for i in 0..2 {
                let b_in = DVector::from_iterator(
                    dim,
                    (0..n).flat_map(|k| {
                        let w = phase(pt * (k as f64 + 0.5)) * prod(0, k)[(UP, i)];
                        let lr = parts[k].0;
                        [w * lr[0].conj(), w * lr[1].conj()]
                    }),
                );
                let x = lu.solve(&b_in).ok_or_else(|| QnetError::Singular(format!("resolvent at δ_p = {delta_p}")))?;
                for j in 0..2 {
                    let mut ar = cr(0.0);
                    let mut al = cr(0.0);
                    for k in 0..n {
                        let wr = phase(pt * (n as f64 - k as f64 - 0.5)) * prod(k + 1, n)[(j, UP)];
                        let wl = phase(pt * (k as f64 + 0.5)) * prod(0, k)[(UP, j)];
                        let (lr, ll) = (parts[k].0, parts[k].1);
                        ar += wr * (lr[0] * x[2 * k] + lr[1] * x[2 * k + 1]);
                        al += wl * (ll[0] * x[2 * k] + ll[1] * x[2 * k + 1]);
                    }
                    out[0][j][i] = s_r[(j, i)] + ar / gph;
                    out[1][j][i] = al / gph;
                }
            }
            if out.iter().flatten().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(QnetError::Singular(format!("resolvent at δ_p = {delta_p}")));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScatteringResult { delta_p, n_nodes: n, amplitudes, global_phase: gph })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slh::hadamard;

    fn resolvent(g: &GueParams, d: f64) -> (C64, C64) {
        let (lr, ll, gen) = row_vectors(g);
        let m = (gen + Matrix2::identity() * (I * d)).try_inverse().unwrap();
        let v = nalgebra::Vector2::new(lr[0].conj(), lr[1].conj());
        let x = m * v;
        (ll[0] * x[0] + ll[1] * x[1], cr(1.0) + lr[0] * x[0] + lr[1] * x[1])
    }

    #[test]
    fn anchors_of_transmission() {
        assert!((transmission(0.0, 1.0) + 1.0).norm() < 1e-15);
        assert!((transmission(-0.5, 1.0) - I).norm() < 1e-15);
        assert!((transmission(0.5, 1.0) + I).norm() < 1e-15);
    }

    #[test]
    fn closed_form_matches_resolvent() {
        let mut x = 0.37f64;
        let mut next = || {
            x = (x * 7919.0 + 0.123).fract();
            x
        };
        for _ in 0..50 {
            let g = GueParams {
                delta1: 4.0 * next() - 2.0,
                delta2: 4.0 * next() - 2.0,
                u1: 0.0,
                u2: 0.0,
                j_hop: 4.0 * next() - 2.0,
                chi: 0.0,
                gamma1: 0.5 + next(),
                gamma2: 0.0,
                r1: 0.6 * next() - 0.3,
                r2: 0.0,
                phi: 6.0 * next(),
                n_max: 2,
            };
            let g = GueParams { gamma2: g.gamma1, r2: g.r1, ..g };
            let d = 2.0 * next() - 1.0;
            let (r_c, t_c) = closed_form(&g, d);
            let (r_o, t_o) = resolvent(&g, d);
            assert!((r_c - r_o).norm() < 1e-12 && (t_c - t_o).norm() < 1e-12);
            assert!((r_c.norm_sqr() + t_c.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unidirectional_node_is_a_phase_gate() {
        let node = NodeParams::with_gamma_r(0.2, 1.0, -0.5, 1.0).unwrap();
        let a = node_amplitudes(&node, 0.0).unwrap();
        assert!(a.r0.norm() < 1e-12 && a.r1.norm() < 1e-12);
        assert!((a.t0 - I).norm() < 1e-12);
        assert!((a.t1 + I).norm() < 1e-12);
        let a = node_amplitudes(&node, 0.13).unwrap();
        let gate = ideal_phase_gate(&node, 0.13);
        assert!((a.t0 - gate[(0, 0)]).norm() < 1e-12 && (a.t1 - gate[(1, 1)]).norm() < 1e-12);
    }

    #[test]
    fn far_detuned_gate_is_identity() {
        let node = NodeParams::with_gamma_r(0.0, 1.0, 1e3, 1.0).unwrap();
        let g = ideal_phase_gate(&node, 0.0);
        assert!((g[(0, 0)] - 1.0).norm() < 1e-3 && (g[(1, 1)] - 1.0).norm() < 1e-3);
    }

    #[test]
    fn asymmetric_node_needs_general_backend() {
        let mut node = NodeParams::with_gamma_r(0.1, 1.0, 0.0, 1.0).unwrap();
        node.gue.gamma2 *= 1.1;
        assert!(matches!(node_amplitudes(&node, 0.0), Err(QnetError::UnsupportedClosedForm(_))));
        let spec = NetworkSpec::interferometer(vec![node], 0.0).unwrap();
        let res = general_scattering(&spec, 0.2).unwrap();
        for s in 0..2 {
            assert!((res.total_probability(0, s) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn single_node_general_equals_phase_gate() {
        let node = NodeParams::with_gamma_r(0.2, 1.0, -0.5, 1.0).unwrap();
        let spec = NetworkSpec::new(vec![node], vec![Matrix2::identity(); 2], 0.0).unwrap();
        let res = general_scattering(&spec, 0.0).unwrap();
        assert!((res.amplitude(RIGHT, UP, UP, 0) - I).norm() < 1e-12);
        assert!(res.amplitude(LEFT, UP, UP, 0).norm() < 1e-12);
        assert!((res.amplitude(RIGHT, UP, UP, 1) + I).norm() < 1e-12);
    }

    #[test]
    fn perturbed_hopping_reflects() {
        let mut node = NodeParams::with_gamma_r(0.0, 1.0, -0.5, 1.0).unwrap();
        node.gue.j_hop += 0.3 * node.gue.gamma1;
        let spec = NetworkSpec::new(vec![node], vec![Matrix2::identity(); 2], 0.0).unwrap();
        let res = general_scattering(&spec, 0.0).unwrap();
        assert!(res.amplitude(LEFT, UP, UP, 0).norm() > 1e-3);
        assert!((res.total_probability(UP, 0) - 1.0).abs() < 1e-10);
        assert!(ideal_scattering(&spec, 0.0).is_err());
    }

    #[test]
    fn ideal_matches_general_three_nodes() {
        let nodes: Vec<_> = [-0.5, 0.3, 2.0]
            .iter()
            .map(|&d| NodeParams::with_gamma_r(0.15, 1.0, d, 1.0).unwrap())
            .collect();
        let spec = NetworkSpec::interferometer(nodes, 0.4).unwrap();
        let a = ideal_scattering(&spec, 0.05).unwrap();
        let b = general_scattering(&spec, 0.05).unwrap();
        for s in 0..8 {
            for d in 0..2 {
                for j in 0..2 {
                    for i in 0..2 {
                        assert!((a.amplitudes[s][d][j][i] - b.amplitudes[s][d][j][i]).norm() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn resonant_interferometer_projects_parity() {
        let nodes = vec![NodeParams::with_gamma_r(0.0, 1.0, -0.5, 1.0).unwrap(); 2];
        let spec = NetworkSpec::interferometer(nodes, 0.0).unwrap();
        let res = ideal_scattering(&spec, 0.0).unwrap();
        let h = hadamard();
        for s in 0..4 {
            let p = if (s as u32).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            // i² σ_z σ_z on the up arm
            let d = Matrix2::new(cr(1.0), cr(0.0), cr(0.0), cr(-p));
            let m = h * d * h;
            assert!((res.amplitude(RIGHT, UP, 0, s) - m[(UP, 0)]).norm() < 1e-12);
        }
    }
}
