//! Lumped-element transmon circuits: effective emitter parameters, second-order
//! renormalization of counter-rotating terms, and the qubit interface.
//!
//! Energies and rates are angular frequencies (ℏ = 1), capacitances in farads,
//! impedances in ohms.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QnetError, Result};
use crate::gue::GueParams;
use crate::qops::{HilbertSpace, Operator};

pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;
pub const HBAR: f64 = 1.054_571_817e-34;

/// `e²/(2C)` in rad/s.
pub fn charging_energy(c: f64) -> f64 {
    ELECTRON_CHARGE * ELECTRON_CHARGE / (2.0 * c * HBAR)
}

/// Capacitance with charging energy `ec` (rad/s).
pub fn capacitance_for(ec: f64) -> f64 {
    ELECTRON_CHARGE * ELECTRON_CHARGE / (2.0 * ec * HBAR)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitParams {
    pub ej1: f64,
    pub ej2: f64,
    pub ejc: f64,
    pub c1: f64,
    pub c2: f64,
    pub cc: f64,
    pub cp1: f64,
    pub cp2: f64,
    #[serde(default = "default_z0")]
    pub z0: f64,
    pub omega0: f64,
}

fn default_z0() -> f64 {
    50.0
}

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.ej1, self.ej2, self.c1, self.c2, self.cp1, self.cp2, self.z0, self.omega0];
        let nonneg = [self.ejc, self.cc];
        if pos.iter().chain(&nonneg).any(|x| !x.is_finite()) {
            return Err(QnetError::InvalidParameter("non-finite circuit parameter".into()));
        }
        if pos.iter().any(|&x| x <= 0.0) || nonneg.iter().any(|&x| x < 0.0) {
            return Err(QnetError::InvalidParameter(
                "E_J, C, c', Z_0, ω_0 must be positive; Ē_J and C̄ non-negative".into(),
            ));
        }
        Ok(())
    }

    /// `C_k + c'_k + C̄`.
    pub fn c_eff(&self) -> [f64; 2] {
        [self.c1 + self.cp1 + self.cc, self.c2 + self.cp2 + self.cc]
    }

    pub fn ec(&self) -> [f64; 2] {
        self.c_eff().map(charging_energy)
    }

    /// Inverse of the full transmon capacitance matrix.
    fn inverse_capacitance(&self) -> Matrix2<f64> {
        let [a, b] = self.c_eff();
        let det = a * b - self.cc * self.cc;
        Matrix2::new(b, self.cc, self.cc, a) / det
    }

    /// Coupling ratios `(C̄/C_k, Ē_J/E_J^k)`, the small parameters of the model.
    pub fn coupling_ratios(&self) -> (f64, f64) {
        (self.cc / self.c1.min(self.c2), self.ejc / self.ej1.min(self.ej2))
    }

    pub fn is_weak_coupling(&self) -> bool {
        let (c, j) = self.coupling_ratios();
        c < 0.1 && j < 0.1
    }

    /// Energies and `ω_0` multiplied by `lambda`, capacitances divided by it.
    pub fn with_energy_scale(&self, lambda: f64) -> Self {
        Self {
            ej1: self.ej1 * lambda,
            ej2: self.ej2 * lambda,
            ejc: self.ejc * lambda,
            c1: self.c1 / lambda,
            c2: self.c2 / lambda,
            cc: self.cc / lambda,
            cp1: self.cp1 / lambda,
            cp2: self.cp2 / lambda,
            z0: self.z0,
            omega0: self.omega0 * lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveModel {
    pub omega1: f64,
    pub omega2: f64,
    pub u1: f64,
    pub u2: f64,
    pub j_c: f64,
    pub j_i: f64,
    pub chi: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub r1: f64,
    pub r2: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl EffectiveModel {
    /// Net hopping `J_C − J_I`.
    pub fn j(&self) -> f64 {
        self.j_c - self.j_i
    }

    /// Emitter parameters in the frame rotating at `omega_frame`.
    pub fn to_gue(&self, phi: f64, omega_frame: f64) -> GueParams {
        GueParams {
            delta1: omega_frame - self.omega1,
            delta2: omega_frame - self.omega2,
            u1: self.u1,
            u2: self.u2,
            j_hop: self.j(),
            chi: self.chi,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            r1: self.r1,
            r2: self.r2,
            phi,
            n_max: 3,
        }
    }
}

/// Leading-order emitter parameters of the two-transmon circuit.
///
/// Outside the weak-coupling regime, or for unequal `E_J/E_C`, the result is
/// still returned with the reason listed in `warnings`.
pub fn effective_model(cp: &CircuitParams) -> Result<EffectiveModel> {
    cp.validate()?;
    let ceff = cp.c_eff();
    let ec = cp.ec();
    let ej = [cp.ej1, cp.ej2];
    let cpl = [cp.cp1, cp.cp2];
    let e2z = ELECTRON_CHARGE * ELECTRON_CHARGE * cp.z0 / HBAR;
    let gamma = |k: usize| (cpl[k] / ceff[k]).powi(2) * cp.omega0 * e2z * (ej[k] / (8.0 * ec[k])).sqrt();
    let mut warnings = Vec::new();
    if !cp.is_weak_coupling() {
        let (c, j) = cp.coupling_ratios();
        warnings.push(format!("outside weak coupling: C̄/C = {c:.3}, Ē_J/E_J = {j:.3}"));
    }
    let (x1, x2) = (ej[0] / ec[0], ej[1] / ec[1]);
    if ((x1 - x2) / x1.max(x2)).abs() > 0.05 {
        warnings.push(format!("asymmetric transmons: E_J/E_C = {x1:.1} vs {x2:.1}"));
    }
    if x1.min(x2) < 20.0 {
        warnings.push(format!("not in the transmon regime: E_J/E_C = {:.1}", x1.min(x2)));
    }
    Ok(EffectiveModel {
        omega1: (8.0 * ej[0] * ec[0]).sqrt(),
        omega2: (8.0 * ej[1] * ec[1]).sqrt(),
        u1: ec[0],
        u2: ec[1],
        j_c: cp.omega0 * cp.cc / (2.0 * (ceff[0] * ceff[1]).sqrt()),
        j_i: cp.omega0 * cp.ejc / (2.0 * (ej[0] * ej[1]).sqrt()),
        chi: 2.0 * cp.ejc * (ec[0] * ec[1] / (ej[0] * ej[1])).sqrt(),
        gamma1: gamma(0),
        gamma2: gamma(1),
        r1: cp.cc / ceff[0],
        r2: cp.cc / ceff[1],
        warnings,
    })
}

/// Parameters read off the renormalized Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extracted {
    pub omega1: f64,
    pub omega2: f64,
    pub u1: f64,
    pub u2: f64,
    pub j: f64,
    pub chi: f64,
    /// Smallest weight, over the labelled Fock states, of the best-matching
    /// exact eigenvector inside the label's excitation manifold.
    pub min_overlap: f64,
    pub ambiguous: bool,
}

const OVERLAP_FLOOR: f64 = 0.7;

/// Powers `x⁰..x⁴` of a single-mode quadrature, exact on `levels` Fock states.
fn quadrature_powers(levels: usize, scale: f64, momentum: bool) -> [DMatrix<f64>; 5] {
    let big = levels + 4;
    let mut x = DMatrix::<f64>::zeros(big, big);
    for n in 1..big {
        let s = scale * (n as f64).sqrt();
        // a|n⟩ = √n|n−1⟩; momentum is i(a†−a), kept real by pairing factors of i
        x[(n - 1, n)] = if momentum { -s } else { s };
        x[(n, n - 1)] = s;
    }
    let mut out: [DMatrix<f64>; 5] = std::array::from_fn(|_| DMatrix::identity(big, big));
    for k in 1..5 {
        out[k] = &out[k - 1] * &x;
    }
    out.map(|m| m.view((0, 0), (levels, levels)).into_owned())
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// `1 − x²/2 + x⁴/24`.
fn cos4(p: &[DMatrix<f64>; 5]) -> DMatrix<f64> {
    &p[0] - &p[2] * 0.5 + &p[4] * (1.0 / 24.0)
}

/// Full cosine-expanded circuit Hamiltonian on `(n_max + 1)²` Fock states.
fn circuit_hamiltonian(cp: &CircuitParams, n_max: usize) -> DMatrix<f64> {
    let levels = n_max + 1;
    let ci = cp.inverse_capacitance();
    let e2 = ELECTRON_CHARGE * ELECTRON_CHARGE / HBAR;
    let ec = [0.5 * e2 * ci[(0, 0)], 0.5 * e2 * ci[(1, 1)]];
    let e12 = e2 * ci[(0, 1)];
    let ej = [cp.ej1, cp.ej2];
    let xi = |k: usize| (2.0 * ec[k] / ej[k]).powf(0.25);
    let q = |k: usize| (ej[k] / (32.0 * ec[k])).powf(0.25);
    let x1 = quadrature_powers(levels, xi(0), false);
    let x2 = quadrature_powers(levels, xi(1), false);
    let p1 = quadrature_powers(levels, q(0), true);
    let p2 = quadrature_powers(levels, q(1), true);
    let id = DMatrix::<f64>::identity(levels, levels);
    // (i)² from the two momentum operators in P1P2, P_k² → −(a†−a)²
    let mut h = kron(&p1[2], &id) * (-4.0 * ec[0]) + kron(&id, &p2[2]) * (-4.0 * ec[1]);
    h += kron(&p1[1], &p2[1]) * (-4.0 * e12);
    h -= kron(&cos4(&x1), &id) * cp.ej1 + kron(&id, &cos4(&x2)) * cp.ej2;
    // cos(X2 − X1) through the binomial expansion of each power
    let binom = [[1.0, 0.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0, 0.0], [
        1.0, 3.0, 3.0, 1.0, 0.0,
    ], [1.0, 4.0, 6.0, 4.0, 1.0]];
    let diff_power = |n: usize| {
        let mut m = DMatrix::<f64>::zeros(levels * levels, levels * levels);
        for k in 0..=n {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            m += kron(&x1[k], &x2[n - k]) * (sign * binom[n][k]);
        }
        m
    };
    let cos_diff = DMatrix::identity(levels * levels, levels * levels) - diff_power(2) * 0.5
        + diff_power(4) * (1.0 / 24.0);
    h -= cos_diff * cp.ejc;
    (&h + h.transpose()) * 0.5
}

fn excitations(n_max: usize) -> Vec<usize> {
    let l = n_max + 1;
    (0..l * l).map(|i| i / l + i % l).collect()
}

/// Block-diagonal second-order Hamiltonian
/// `Σ_n P_n Ĥ P_n − Σ_{n'≠n} P_n Ĥ P_{n'} Ĥ P_n / (ω_0(n' − n))`.
fn second_order(h: &DMatrix<f64>, nexc: &[usize], omega0: f64) -> DMatrix<f64> {
    let d = h.nrows();
    let mut out = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            if nexc[i] != nexc[j] {
                continue;
            }
            let n = nexc[i] as f64;
            let mut corr = 0.0;
            for k in 0..d {
                if nexc[k] != nexc[i] {
                    corr += h[(i, k)] * h[(k, j)] / (omega0 * (nexc[k] as f64 - n));
                }
            }
            out[(i, j)] = h[(i, j)] - corr;
        }
    }
    out
}

/// Weight check for the level assignment: each labelled Fock state is matched
/// to the exact eigenvector with the largest overlap, whose weight inside the
/// label's excitation manifold is returned.
fn manifold_overlap(h: &DMatrix<f64>, nexc: &[usize], labels: &[usize]) -> f64 {
    let eig = SymmetricEigen::new(h.clone());
    let v = &eig.eigenvectors;
    labels
        .iter()
        .map(|&s| {
            let best = (0..v.ncols()).max_by(|&a, &b| v[(s, a)].abs().total_cmp(&v[(s, b)].abs())).unwrap_or(0);
            (0..v.nrows()).filter(|&i| nexc[i] == nexc[s]).map(|i| v[(i, best)].powi(2)).sum::<f64>()
        })
        .fold(1.0, f64::min)
}

fn extract(h2: &DMatrix<f64>, n_max: usize) -> (f64, f64, f64, f64, f64, f64) {
    let l = n_max + 1;
    let at = |a: usize, b: usize| a * l + b;
    let e0 = h2[(0, 0)];
    let w1 = h2[(at(1, 0), at(1, 0))] - e0;
    let w2 = h2[(at(0, 1), at(0, 1))] - e0;
    let j = h2[(at(1, 0), at(0, 1))];
    let chi = w1 + w2 - (h2[(at(1, 1), at(1, 1))] - e0);
    let u1 = 2.0 * w1 - (h2[(at(2, 0), at(2, 0))] - e0);
    let u2 = 2.0 * w2 - (h2[(at(0, 2), at(0, 2))] - e0);
    (w1, w2, u1, u2, j, chi)
}

fn check_cutoff(n_max: usize) -> Result<()> {
    if !(4..=20).contains(&n_max) {
        return Err(QnetError::InvalidDimension(format!("circuit cutoff n_max = {n_max} outside 4..=20")));
    }
    Ok(())
}

/// Renormalized Hamiltonian on `n_max + 1` levels per transmon and the
/// parameters read from its Fock-basis matrix elements. `χ` is reported
/// positive for an attractive cross-Kerr shift.
pub fn renormalized_hamiltonian(cp: &CircuitParams, n_max: usize) -> Result<(Operator, Extracted)> {
    cp.validate()?;
    check_cutoff(n_max)?;
    let h = circuit_hamiltonian(cp, n_max);
    let nexc = excitations(n_max);
    let h2 = second_order(&h, &nexc, cp.omega0);
    let (omega1, omega2, u1, u2, j, chi) = extract(&h2, n_max);
    let l = n_max + 1;
    let labels = [0, l, 1, l + 1, 2 * l, 2];
    let min_overlap = manifold_overlap(&h, &nexc, &labels);
    let space = Arc::new(HilbertSpace::new(vec![("t1", l), ("t2", l)])?);
    let op = Operator::new(space, h2.map(|x| num_complex::Complex64::new(x, 0.0)))?;
    let ex = Extracted { omega1, omega2, u1, u2, j, chi, min_overlap, ambiguous: min_overlap < OVERLAP_FLOOR };
    Ok((op, ex))
}

/// Extraction without building the operator or checking overlaps.
fn extract_fast(cp: &CircuitParams, n_max: usize) -> (f64, f64, f64, f64, f64, f64) {
    let h = circuit_hamiltonian(cp, n_max);
    let h2 = second_order(&h, &excitations(n_max), cp.omega0);
    extract(&h2, n_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceParams {
    pub ejq: f64,
    pub cq: f64,
    pub ejc1: f64,
    pub ejc2: f64,
    pub ccc1: f64,
    pub ccc2: f64,
    pub omega_q: f64,
    pub phase_qd: f64,
    /// Qubit-to-waveguide coupling capacitances at the two points.
    #[serde(default)]
    pub cpq1: f64,
    #[serde(default)]
    pub cpq2: f64,
}

impl InterfaceParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.ejq, self.cq, self.ejc1, self.ejc2, self.ccc1, self.ccc2, self.omega_q, self.phase_qd, self.cpq1,
            self.cpq2,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(QnetError::InvalidParameter("non-finite interface parameter".into()));
        }
        if self.ejq <= 0.0 || self.cq <= 0.0 || self.omega_q <= 0.0 {
            return Err(QnetError::InvalidParameter("qubit E_J, C and ω_q must be positive".into()));
        }
        if [self.ejc1, self.ejc2, self.ccc1, self.ccc2, self.cpq1, self.cpq2].iter().any(|&x| x < 0.0) {
            return Err(QnetError::InvalidParameter("coupler energies and capacitances must be non-negative".into()));
        }
        Ok(())
    }

    /// `C_q + Σ_k C̄_k`.
    pub fn cq_eff(&self) -> f64 {
        self.cq + self.ccc1 + self.ccc2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceModel {
    pub omega_q: f64,
    pub u_q: f64,
    pub v1: f64,
    pub v2: f64,
    pub jc1: f64,
    pub jc2: f64,
    pub ji1: f64,
    pub ji2: f64,
    pub gamma_q1: f64,
    pub gamma_q2: f64,
    pub gamma_q1_eff: f64,
    pub gamma_q2_eff: f64,
    /// `max_k |J_{C,k} − J_{I,k}|`.
    pub residual_exchange: f64,
    /// `max_k V_k / √(E_C^k E_C^q)`, small in the rotating-wave regime.
    pub kerr_ratio: f64,
    pub delta_q: f64,
    pub gamma_q: f64,
}

/// Qubit–emitter couplings for the interface circuit. `omega_q` in `ip` is the
/// design frequency used for the exchange and detuning terms.
pub fn interface_model(ip: &InterfaceParams, cp: &CircuitParams) -> Result<InterfaceModel> {
    ip.validate()?;
    let em = effective_model(cp)?;
    let ceff = cp.c_eff();
    let ec = cp.ec();
    let ej = [cp.ej1, cp.ej2];
    let cqe = ip.cq_eff();
    let ecq = charging_energy(cqe);
    let ejc = [ip.ejc1, ip.ejc2];
    let ccc = [ip.ccc1, ip.ccc2];
    let cpq = [ip.cpq1, ip.cpq2];
    let root = (cp.omega0 * ip.omega_q).sqrt() / 2.0;
    let v = |k: usize| 2.0 * ejc[k] * (ec[k] * ecq / (ej[k] * ip.ejq)).sqrt();
    let jc = |k: usize| root * ccc[k] / (cqe * ceff[k]).sqrt();
    let ji = |k: usize| root * ejc[k] / (ip.ejq * ej[k]).sqrt();
    let e2z = ELECTRON_CHARGE * ELECTRON_CHARGE * cp.z0 / HBAR;
    let gq = |k: usize| (cpq[k] / cqe).powi(2) * ip.omega_q * e2z * (ip.ejq / (8.0 * ecq)).sqrt();
    let gamma = [em.gamma1, em.gamma2];
    let detuning = cp.omega0 - ip.omega_q;
    let geff = |k: usize| {
        let x = jc(k) - ji(k);
        gq(k) + if x == 0.0 { 0.0 } else { gamma[k] * (x / detuning).powi(2) }
    };
    let (delta_q, gamma_q) = subradiance(ip.phase_qd, geff(0), geff(1));
    Ok(InterfaceModel {
        omega_q: (8.0 * ip.ejq * ecq).sqrt(),
        u_q: ecq,
        v1: v(0),
        v2: v(1),
        jc1: jc(0),
        jc2: jc(1),
        ji1: ji(0),
        ji2: ji(1),
        gamma_q1: gq(0),
        gamma_q2: gq(1),
        gamma_q1_eff: geff(0),
        gamma_q2_eff: geff(1),
        residual_exchange: (jc(0) - ji(0)).abs().max((jc(1) - ji(1)).abs()),
        kerr_ratio: (v(0) / (ec[0] * ecq).sqrt()).max(v(1) / (ec[1] * ecq).sqrt()),
        delta_q,
        gamma_q,
    })
}

/// Coupler Josephson energy giving cross-Kerr `v` between the qubit and transmon `k`.
pub fn coupler_for_kerr(v: f64, ecq: f64, ejq: f64, ec_k: f64, ej_k: f64) -> f64 {
    v / (2.0 * (ec_k * ecq / (ej_k * ejq)).sqrt())
}

/// Coupler capacitance that cancels the exchange, `J_{C,k} = J_{I,k}`.
pub fn balancing_capacitance(ejc_k: f64, cq_eff: f64, c_eff_k: f64, ejq: f64, ej_k: f64) -> f64 {
    ejc_k * (cq_eff * c_eff_k).sqrt() / (ejq * ej_k).sqrt()
}

/// Frequency shift and emission rate of a qubit coupled at two points
/// separated by propagation phase `phase`.
pub fn subradiance(phase: f64, geff1: f64, geff2: f64) -> (f64, f64) {
    let g1 = geff1.max(0.0);
    let g2 = geff2.max(0.0);
    let cross = 2.0 * (g1 * g2).sqrt();
    let gamma = g1 + g2 + cross * phase.cos();
    (cross * phase.sin(), gamma.max(0.0))
}

/// Design sweep at fixed `ω_1 = ω_0`, `J = J_opt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub omega0: f64,
    /// Values of `E_J/E_C` setting the charging energy `E_C = ω_0/√(8x)`.
    pub ratios: Vec<f64>,
    #[serde(default = "default_cp_fraction")]
    pub cp_fraction: f64,
    #[serde(default = "default_z0")]
    pub z0: f64,
    #[serde(default = "default_r_range")]
    pub r_range: [f64; 2],
    #[serde(default = "default_sweep_cutoff")]
    pub n_max: usize,
    #[serde(default = "default_r_tol")]
    pub r_tol: f64,
}

fn default_cp_fraction() -> f64 {
    0.03
}

fn default_r_range() -> [f64; 2] {
    [0.05, 0.45]
}

fn default_sweep_cutoff() -> usize {
    6
}

fn default_r_tol() -> f64 {
    1e-3
}

impl SweepSettings {
    pub fn new(omega0: f64, ratios: Vec<f64>) -> Self {
        Self {
            omega0,
            ratios,
            cp_fraction: default_cp_fraction(),
            z0: default_z0(),
            r_range: default_r_range(),
            n_max: default_sweep_cutoff(),
            r_tol: default_r_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(QnetError::InvalidParameter("ω_0 must be positive".into()));
        }
        if self.ratios.is_empty() || self.ratios.iter().any(|&x| !(x > 4.0 && x.is_finite())) {
            return Err(QnetError::InvalidParameter("ratios must be finite and > 4".into()));
        }
        if !(self.cp_fraction > 0.0 && self.cp_fraction < 0.5) {
            return Err(QnetError::InvalidParameter("cp_fraction must lie in (0, 0.5)".into()));
        }
        let [a, b] = self.r_range;
        if !(0.0 <= a && a < b && b + self.cp_fraction < 1.0) {
            return Err(QnetError::InvalidParameter("r_range must be increasing inside [0, 1 − cp_fraction)".into()));
        }
        if !(self.r_tol > 0.0) {
            return Err(QnetError::InvalidParameter("r_tol must be positive".into()));
        }
        check_cutoff(self.n_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    /// Nominal `E_J/E_C`.
    pub ratio: f64,
    pub r: f64,
    pub ej: f64,
    pub ejc: f64,
    pub ec: f64,
    /// `(E_J + Ē_J)/E_C`, the Josephson energy seen by each transmon.
    pub total_ratio: f64,
    pub gamma: f64,
    pub j_opt: f64,
    pub chi: f64,
    pub u: f64,
    pub outer_iterations: usize,
}

/// Symmetric circuit at nominal `E_J/E_C = x` and `C̄ = r C_eff`.
fn symmetric_circuit(s: &SweepSettings, x: f64, r: f64, ej: f64, ejc: f64) -> CircuitParams {
    let ec = s.omega0 / (8.0 * x).sqrt();
    let ceff = capacitance_for(ec);
    let cp = s.cp_fraction * ceff;
    let cc = r * ceff;
    let c = ceff - cc - cp;
    CircuitParams { ej1: ej, ej2: ej, ejc, c1: c, c2: c, cc, cp1: cp, cp2: cp, z0: s.z0, omega0: s.omega0 }
}

/// Tune `E_J` and `Ē_J` so that the renormalized `ω_1 = ω_0` and `J = J_opt`,
/// alternating bracketed root finds until both settle to 1e-9 relative.
pub fn design_point(s: &SweepSettings, x: f64, r: f64) -> Result<DesignPoint> {
    s.validate()?;
    let ec = s.omega0 / (8.0 * x).sqrt();
    let probe = symmetric_circuit(s, x, r, x * ec, 0.0);
    let gamma = effective_model(&probe)?.gamma1;
    let opt = crate::gue::optimal_params(r, gamma)?;
    let j_opt = opt.j_opt;
    let mut ej = x * ec;
    let mut ejc = r * ej;
    for it in 1..=50 {
        let ej_new = brent(|v| extract_fast(&symmetric_circuit(s, x, r, v, ejc), s.n_max).0 - s.omega0, 0.5 * ej, 2.0 * ej, 1e-12 * ej)?;
        let ejc_new = brent(
            |v| extract_fast(&symmetric_circuit(s, x, r, ej_new, v), s.n_max).4 - j_opt,
            0.0,
            ej_new,
            1e-12 * ej_new,
        )?;
        let done = ((ej_new - ej) / ej).abs() <= 1e-9 && ((ejc_new - ejc) / ejc.max(1e-300)).abs() <= 1e-9;
        ej = ej_new;
        ejc = ejc_new;
        if done {
            let (_, _, u, _, _, chi) = extract_fast(&symmetric_circuit(s, x, r, ej, ejc), s.n_max);
            let ec_n = charging_energy(1.0 / symmetric_circuit(s, x, r, ej, ejc).inverse_capacitance()[(0, 0)]);
            return Ok(DesignPoint {
                ratio: x,
                r,
                ej,
                ejc,
                ec: ec_n,
                total_ratio: (ej + ejc) / ec_n,
                gamma,
                j_opt,
                chi,
                u,
                outer_iterations: it,
            });
        }
    }
    Err(QnetError::Convergence(format!("design point x = {x}, r = {r} did not settle")))
}

/// Design point maximizing `χ` over `r` (golden-section search).
pub fn optimize_design(s: &SweepSettings, x: f64) -> Result<DesignPoint> {
    let [mut a, mut b] = s.r_range;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = design_point(s, x, c)?.chi;
    let mut fd = design_point(s, x, d)?.chi;
    while b - a > s.r_tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = design_point(s, x, c)?.chi;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = design_point(s, x, d)?.chi;
        }
    }
    design_point(s, x, 0.5 * (a + b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<DesignPoint>,
    /// Least-squares slope of `ln χ` against `ln((E_J + Ē_J)/E_C)`.
    pub slope: f64,
}

pub fn design_sweep(s: &SweepSettings) -> Result<SweepReport> {
    s.validate()?;
    let points = s.ratios.par_iter().map(|&x| optimize_design(s, x)).collect::<Result<Vec<_>>>()?;
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.total_ratio.ln(), p.chi.ln())).collect();
    Ok(SweepReport { slope: log_slope(&xy), points })
}

/// Least-squares slope of `(x, y)` pairs.
pub fn log_slope(xy: &[(f64, f64)]) -> f64 {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Brent's method on a sign-changing bracket; widens `b` up to 8 times if needed.
fn brent(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    let mut widen = 0;
    while fa * fb > 0.0 {
        if widen == 8 {
            return Err(QnetError::Convergence("root not bracketed".into()));
        }
        b = a + 2.0 * (b - a);
        fb = f(b);
        widen += 1;
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let (mut c, mut fc) = (a, fa);
    let mut mflag = true;
    let mut d = 0.0;
    for _ in 0..200 {
        if fb == 0.0 || (b - a).abs() < tol {
            return Ok(b);
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc)) + b * fa * fc / ((fb - fa) * (fb - fc)) + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let between = if lo < b { s > lo && s < b } else { s > b && s < lo };
        if !between
            || (mflag && (s - b).abs() >= 0.5 * (b - c).abs())
            || (!mflag && (s - b).abs() >= 0.5 * (c - d).abs())
            || (mflag && (b - c).abs() < tol)
            || (!mflag && (c - d).abs() < tol)
        {
            s = 0.5 * (a + b);
            mflag = true;
        } else {
            mflag = false;
        }
        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Err(QnetError::Convergence("root find exceeded 200 iterations".into()))
}

/// `ω/(2π)` in GHz.
pub fn to_ghz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e9)
}

/// `2π f` for `f` in GHz.
pub fn from_ghz(f: f64) -> f64 {
    2.0 * PI * 1e9 * f
}
