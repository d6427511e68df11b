//! Toric code on an `N_l × N_l` periodic lattice with qubits on the edges.
//!
//! Edge numbering: row `y` lists its horizontal edges `h(x, y)` followed by
//! the vertical edges `v(x, y+1)` above it. For `N_l = 2` this gives
//! `q1 q2` / `q3 q4` / `q5 q6` / `q7 q8` for `h(·,0)`, `v(·,1)`, `h(·,1)`,
//! `v(·,0)`.

use nalgebra::Vector2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::register::{ket_minus, ket_plus, pauli_matrix, Pauli, Register};
use super::{BranchMode, ProtocolOutcome, ProtocolParams};
use crate::error::{QnetError, Result};
use crate::qops::{cr, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Logical {
    Z1,
    Z2,
    X1,
    X2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToricLattice {
    pub n_side: usize,
    /// `A_p = ∏ σ_z` over these qubits.
    pub plaquettes: Vec<Vec<usize>>,
    /// `B_v = ∏ σ_x` over these qubits.
    pub vertices: Vec<Vec<usize>>,
    pub gamma1: Vec<usize>,
    pub gamma2: Vec<usize>,
    pub gamma1_dual: Vec<usize>,
    pub gamma2_dual: Vec<usize>,
}

impl ToricLattice {
    pub fn new(n_side: usize) -> Result<Self> {
        if n_side < 2 {
            return Err(QnetError::InvalidParameter("toric lattice needs N_l >= 2".into()));
        }
        if 2 * n_side * n_side + 1 > super::MAX_QUBITS {
            return Err(QnetError::TooLarge(format!("N_l = {n_side} needs {} qubits", 2 * n_side * n_side)));
        }
        let n = n_side;
        let h = |x: usize, y: usize| 2 * n * (y % n) + x % n;
        let v = |x: usize, y: usize| 2 * n * ((y + n - 1) % n) + n + x % n;
        let mut plaquettes = Vec::new();
        let mut vertices = Vec::new();
        for y in 0..n {
            for x in 0..n {
                plaquettes.push(vec![h(x, y), h(x, y + 1), v(x, y), v(x + 1, y)]);
                vertices.push(vec![h(x, y), h(x + n - 1, y), v(x, y), v(x, y + n - 1)]);
            }
        }
        Ok(Self {
            n_side,
            plaquettes,
            vertices,
            gamma1: (0..n).map(|x| h(x, 1)).collect(),
            gamma2: (0..n).map(|y| v(n - 1, y)).collect(),
            gamma1_dual: (0..n).map(|y| h(0, y)).collect(),
            gamma2_dual: (0..n).map(|x| v(x, 1)).collect(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        2 * self.n_side * self.n_side
    }

    pub fn labels(&self) -> Vec<String> {
        (1..=self.n_qubits()).map(|k| format!("q{k}")).collect()
    }

    pub fn plaquette_ops(&self, p: usize) -> Vec<(usize, Pauli)> {
        self.plaquettes[p].iter().map(|&q| (q, Pauli::Z)).collect()
    }

    pub fn vertex_ops(&self, v: usize) -> Vec<(usize, Pauli)> {
        self.vertices[v].iter().map(|&q| (q, Pauli::X)).collect()
    }

    /// `Z_α` along `γ_α`, `X_α` along `γ_α*`.
    pub fn logical_ops(&self, which: Logical) -> Vec<(usize, Pauli)> {
        let (path, p) = match which {
            Logical::Z1 => (&self.gamma1, Pauli::Z),
            Logical::Z2 => (&self.gamma2, Pauli::Z),
            Logical::X1 => (&self.gamma1_dual, Pauli::X),
            Logical::X2 => (&self.gamma2_dual, Pauli::X),
        };
        path.iter().map(|&q| (q, p)).collect()
    }

    fn mask(qs: &[usize]) -> u64 {
        qs.iter().fold(0, |m, &q| m ^ (1u64 << q))
    }

    /// Number of independent stabilizer generators.
    pub fn independent_stabilizers(&self) -> usize {
        let p: Vec<u64> = self.plaquettes.iter().map(|q| Self::mask(q)).collect();
        let v: Vec<u64> = self.vertices.iter().map(|q| Self::mask(q)).collect();
        gf2_rank(&p) + gf2_rank(&v)
    }

    /// `|Φ_1⟩ ∝ ∏_p (𝟙 + A_p)|+⟩^{⊗N}`, `|Φ_2⟩ = Z_1|Φ_1⟩`, `|Φ_3⟩ = Z_2|Φ_1⟩`,
    /// `|Φ_4⟩ = Z_2 Z_1|Φ_1⟩`.
    pub fn code_state(&self, k: usize) -> Result<Register> {
        let mut r = Register::plus(&self.labels())?;
        for p in 0..self.plaquettes.len() {
            r = r.project_pauli(&self.plaquette_ops(p), 1.0);
        }
        let mut r = r.normalized()?;
        match k {
            1 => {}
            2 => r.apply_pauli_string(&self.logical_ops(Logical::Z1)),
            3 => r.apply_pauli_string(&self.logical_ops(Logical::Z2)),
            4 => {
                r.apply_pauli_string(&self.logical_ops(Logical::Z1));
                r.apply_pauli_string(&self.logical_ops(Logical::Z2));
            }
            _ => return Err(QnetError::InvalidParameter(format!("code state index {k} not in 1..=4"))),
        }
        Ok(r)
    }
}

fn gf2_rank(rows: &[u64]) -> usize {
    let mut rows = rows.to_vec();
    let mut rank = 0;
    for bit in 0..64 {
        let Some(piv) = (rank..rows.len()).find(|&i| rows[i] >> bit & 1 == 1) else { continue };
        rows.swap(rank, piv);
        for i in 0..rows.len() {
            if i != rank && rows[i] >> bit & 1 == 1 {
                rows[i] ^= rows[rank];
            }
        }
        rank += 1;
    }
    rank
}

/// Qubit set `x` with `|rows[i] ∧ x|` odd exactly when `rhs[i]`.
fn solve_gf2(rows: &[u64], rhs: &[bool]) -> Option<u64> {
    let mut a: Vec<(u64, bool)> = rows.iter().copied().zip(rhs.iter().copied()).collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for bit in 0..64 {
        let Some(piv) = (r..a.len()).find(|&i| a[i].0 >> bit & 1 == 1) else { continue };
        a.swap(r, piv);
        for i in 0..a.len() {
            if i != r && a[i].0 >> bit & 1 == 1 {
                a[i].0 ^= a[r].0;
                a[i].1 ^= a[r].1;
            }
        }
        pivots.push(bit);
        r += 1;
    }
    if a[r..].iter().any(|row| row.1) {
        return None;
    }
    Some(pivots.iter().enumerate().filter(|(i, _)| a[*i].1).fold(0, |x, (_, &b)| x | 1 << b))
}

/// `(⟨A_p⟩, ⟨B_v⟩)` for the code qubits of `reg`.
pub fn toric_stabilizers(reg: &Register, lattice: &ToricLattice) -> (Vec<f64>, Vec<f64>) {
    let a = (0..lattice.plaquettes.len()).map(|p| reg.expectation(&lattice.plaquette_ops(p))).collect();
    let b = (0..lattice.vertices.len()).map(|v| reg.expectation(&lattice.vertex_ops(v))).collect();
    (a, b)
}

/// Photon measurements of every `A_p` on `|+⟩^{⊗N}`, then `σ_x` corrections
/// flipping the plaquettes found at `−1`.
pub fn toric_generate(lattice: &ToricLattice, delta_p: f64, mode: BranchMode, params: &ProtocolParams) -> Result<ProtocolOutcome> {
    let reg = Register::plus(&lattice.labels())?;
    let mut out = ProtocolOutcome::start(reg, mode);
    for p in 0..lattice.plaquettes.len() {
        out = out.measure_pauli_product(&lattice.plaquette_ops(p), &format!("A{}", p + 1), delta_p, params, false)?;
    }
    let rows: Vec<u64> = lattice.plaquettes.iter().map(|q| ToricLattice::mask(q)).collect();
    let x = pauli_matrix(Pauli::X);
    let out = out.map(|b| {
        let outcomes: Vec<i32> = (0..rows.len()).map(|p| b.outcome(&format!("A{}", p + 1)).unwrap_or(0)).collect();
        if outcomes.contains(&0) {
            return Ok(());
        }
        let rhs: Vec<bool> = outcomes.iter().map(|&o| o == -1).collect();
        let fix = solve_gf2(&rows, &rhs)
            .ok_or_else(|| QnetError::Precondition("plaquette outcomes admit no σ_x correction".into()))?;
        for q in 0..lattice.n_qubits() {
            if fix >> q & 1 == 1 {
                b.correct(q, &x, "X");
            }
        }
        Ok(())
    })?;
    let target = lattice.code_state(1)?;
    Ok(out.set_fidelity(|b| b.register.fidelity(&target)))
}

/// Exact application of a logical string operator.
pub fn toric_apply_logical(reg: &Register, lattice: &ToricLattice, which: Logical) -> Register {
    let mut r = reg.clone();
    r.apply_pauli_string(&lattice.logical_ops(which));
    r
}

/// Photon measurement of a logical string, as for the stabilizers.
pub fn toric_measure_logical(
    out: ProtocolOutcome,
    lattice: &ToricLattice,
    which: Logical,
    delta_p: f64,
    params: &ProtocolParams,
) -> Result<ProtocolOutcome> {
    out.measure_pauli_product(&lattice.logical_ops(which), &format!("{which:?}"), delta_p, params, false)
}

fn with_ancilla(ops: &[(usize, Pauli)], a: usize, p: Pauli) -> Vec<(usize, Pauli)> {
    let mut v = vec![(a, p)];
    v.extend_from_slice(ops);
    v
}

/// `e^{iφŜ}` for a logical string `Ŝ`, through an ancilla in `|+⟩` coupled
/// to node 0: a photon measures `σ_z^a Ŝ`, then the ancilla is read in the
/// basis `{cos φ|+⟩ − i sin φ|−⟩, −i sin φ|+⟩ + cos φ|−⟩}`. The second outcome
/// is followed by `Ŝ`.
pub fn toric_exp_string(
    out: ProtocolOutcome,
    lattice: &ToricLattice,
    which: Logical,
    phi: f64,
    delta_p: f64,
    params: &ProtocolParams,
) -> Result<ProtocolOutcome> {
    let n = lattice.n_qubits();
    let s = lattice.logical_ops(which);
    let x = pauli_matrix(Pauli::X);
    let out = out.map(|b| {
        b.register = b.register.append("a", &ket_plus())?;
        Ok(())
    })?;
    let out = out
        .measure_pauli_product(&with_ancilla(&s, n, Pauli::Z), "ZaS", delta_p, params, false)?
        .map(|b| {
            if b.outcome("ZaS") == Some(-1) {
                b.correct(n, &x, "X");
            }
            Ok(())
        })?;
    let (c, si) = (cr(phi.cos()), I * phi.sin());
    let chi0: Vector2<C64> = ket_plus() * c - ket_minus() * si;
    let chi1: Vector2<C64> = -ket_plus() * si + ket_minus() * c;
    out.measure_out(n, [chi0, chi1], "a_exp", [0, 1])?.map(|b| {
        if b.outcome("a_exp") == Some(1) {
            b.register.apply_pauli_string(&s);
            b.corrections.push(format!("{which:?}"));
        }
        Ok(())
    })
}

/// Map `c_0|0⟩ + c_1|1⟩` of an ancilla onto `c_0|Φ_1⟩ + c_1|Φ_2⟩`.
///
/// Starting from `|Φ_1⟩`: measure `Ẑ_1` (prepares `(|Φ_1⟩ + |Φ_2⟩)/√2`),
/// measure `σ_z^a X̂_1`, then read the ancilla in the `σ_x` basis. Each `−1`
/// is followed by `X̂_1`, `Ẑ_1`, `X̂_1` respectively.
pub fn toric_write_in(lattice: &ToricLattice, input: [C64; 2], delta_p: f64, params: &ProtocolParams) -> Result<ProtocolOutcome> {
    let psi = super::check_input(input)?;
    let n = lattice.n_qubits();
    let reg = lattice.code_state(1)?.append("a", &psi)?;
    let z1 = lattice.logical_ops(Logical::Z1);
    let x1 = lattice.logical_ops(Logical::X1);
    let out = ProtocolOutcome::start(reg, BranchMode::Enumerate)
        .measure_pauli_product(&z1, "Z1", delta_p, params, false)?
        .map(|b| {
            if b.outcome("Z1") == Some(-1) {
                b.register.apply_pauli_string(&x1);
                b.corrections.push("X1".into());
            }
            Ok(())
        })?
        .measure_pauli_product(&with_ancilla(&x1, n, Pauli::Z), "ZaX1", delta_p, params, false)?
        .map(|b| {
            if b.outcome("ZaX1") == Some(-1) {
                b.register.apply_pauli_string(&z1);
                b.corrections.push("Z1".into());
            }
            Ok(())
        })?
        .measure_out(n, [ket_plus(), ket_minus()], "a_x", [1, -1])?
        .map(|b| {
            if b.outcome("a_x") == Some(-1) {
                b.register.apply_pauli_string(&x1);
                b.corrections.push("X1".into());
            }
            Ok(())
        })?;
    let phi1 = lattice.code_state(1)?;
    let phi2 = lattice.code_state(2)?;
    let target = Register::new(lattice.labels(), phi1.amplitudes() * psi[0] + phi2.amplitudes() * psi[1])?;
    Ok(out.set_fidelity(|b| b.register.fidelity(&target)))
}

/// Inverse of [`toric_write_in`] with photons sent through the nodes from the
/// far end: a fresh ancilla `a` in `|+⟩`, then `σ_z^a X̂_1` and `Ẑ_1` are
/// measured, followed by `σ_x^a` and `σ_z^a` on `−1`. The ancilla ends in
/// `c_0|0⟩ + c_1|1⟩`.
pub fn toric_read_out(out: ProtocolOutcome, lattice: &ToricLattice, delta_p: f64, params: &ProtocolParams) -> Result<ProtocolOutcome> {
    let n = lattice.n_qubits();
    let z1 = lattice.logical_ops(Logical::Z1);
    let x1 = lattice.logical_ops(Logical::X1);
    let (x, z) = (pauli_matrix(Pauli::X), pauli_matrix(Pauli::Z));
    out.map(|b| {
        b.register = b.register.append("a", &ket_plus())?;
        Ok(())
    })?
    .measure_pauli_product(&with_ancilla(&x1, n, Pauli::Z), "ZaX1", delta_p, params, true)?
    .map(|b| {
        if b.outcome("ZaX1") == Some(-1) {
            b.correct(n, &x, "X");
        }
        Ok(())
    })?
    .measure_pauli_product(&z1, "Z1", delta_p, params, true)?
    .map(|b| {
        if b.outcome("Z1") == Some(-1) {
            b.correct(n, &z, "Z");
        }
        Ok(())
    })
}

/// Write-in followed by read-out; fidelity of the ancilla with the input.
pub fn toric_round_trip(lattice: &ToricLattice, input: [C64; 2], delta_p: f64, params: &ProtocolParams) -> Result<ProtocolOutcome> {
    let psi = super::check_input(input)?;
    let w = toric_write_in(lattice, input, delta_p, params)?;
    let r = toric_read_out(w, lattice, delta_p, params)?;
    let n = lattice.n_qubits();
    Ok(r.set_fidelity(|b| b.register.qubit_fidelity(n, &psi)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat() -> ToricLattice {
        ToricLattice::new(2).unwrap()
    }

    #[test]
    fn lattice_combinatorics() {
        let l = lat();
        assert_eq!(l.n_qubits(), 8);
        assert_eq!(l.independent_stabilizers(), 6);
        for s in l.plaquettes.iter().chain(&l.vertices) {
            let mut q = s.clone();
            q.sort();
            q.dedup();
            assert_eq!(q.len(), 4);
        }
        let one = |v: &[usize]| v.iter().map(|q| q + 1).collect::<Vec<_>>();
        assert_eq!(one(&l.gamma1), vec![5, 6]);
        assert_eq!(one(&l.gamma2), vec![8, 4]);
        assert_eq!(one(&l.gamma1_dual), vec![1, 5]);
        assert_eq!(one(&l.gamma2_dual), vec![3, 4]);
        let l3 = ToricLattice::new(3).unwrap();
        assert_eq!(l3.independent_stabilizers(), 16);
    }

    #[test]
    fn code_space_is_four_dimensional() {
        let l = lat();
        let states: Vec<_> = (1..=4).map(|k| l.code_state(k).unwrap()).collect();
        for (i, a) in states.iter().enumerate() {
            let (sa, sb) = toric_stabilizers(a, &l);
            assert!(sa.iter().chain(&sb).all(|&e| (e - 1.0).abs() < 1e-12));
            for (j, b) in states.iter().enumerate() {
                let o = a.inner(b).norm();
                assert!((o - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn logical_sign_table() {
        let l = lat();
        let plus = [(1, 1), (1, 3), (2, 1), (2, 2)];
        for (a, op) in [(1, Logical::X1), (2, Logical::X2)] {
            for b in 1..=4 {
                let s = l.code_state(b).unwrap();
                let t = toric_apply_logical(&s, &l, op);
                let want = if plus.contains(&(a, b)) { 1.0 } else { -1.0 };
                assert!((s.inner(&t).re - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gf2_solver_hits_syndrome() {
        let l = lat();
        let rows: Vec<u64> = l.plaquettes.iter().map(|q| ToricLattice::mask(q)).collect();
        let rhs = [true, false, true, false];
        let x = solve_gf2(&rows, &rhs).unwrap();
        for (r, &want) in rows.iter().zip(&rhs) {
            assert_eq!((r & x).count_ones() % 2 == 1, want);
        }
        assert!(solve_gf2(&rows, &[true, false, false, false]).is_none());
    }

    #[test]
    fn generation_reaches_code_space_on_every_branch() {
        let l = lat();
        let out = toric_generate(&l, 0.0, BranchMode::Enumerate, &ProtocolParams::default()).unwrap();
        assert!((out.total_probability() - 1.0).abs() < 1e-10);
        assert_eq!(out.branches.len(), 8);
        for b in &out.branches {
            let (a, v) = toric_stabilizers(&b.register, &l);
            assert!(a.iter().chain(&v).all(|&e| (e - 1.0).abs() < 1e-10));
            let all_plus = (1..=4).all(|p| b.outcome(&format!("A{p}")) == Some(1));
            assert_eq!(all_plus, b.corrections.is_empty());
        }
        assert!((out.fidelity.unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sampled_generation_is_seeded() {
        let l = lat();
        let p = ProtocolParams::default();
        let a = toric_generate(&l, 0.0, BranchMode::Sample { seed: 1 }, &p).unwrap();
        let b = toric_generate(&l, 0.0, BranchMode::Sample { seed: 1 }, &p).unwrap();
        assert_eq!(a.branches[0].measurements, b.branches[0].measurements);
        assert_eq!(a.branches.len(), 1);
        assert!((a.fidelity.unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn exp_string_matches_matrix_exponential() {
        let l = lat();
        let p = ProtocolParams::default();
        let phi1 = l.code_state(1).unwrap();
        let phi2 = l.code_state(2).unwrap();
        for phi in [0.3, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2] {
            let out = toric_exp_string(ProtocolOutcome::start(phi1.clone(), BranchMode::Enumerate), &l, Logical::Z1, phi, 0.0, &p).unwrap();
            // e^{iφZ_1}|Φ_1⟩ = cos φ|Φ_1⟩ + i sin φ|Φ_2⟩
            let want = Register::new(l.labels(), phi1.amplitudes() * cr(phi.cos()) + phi2.amplitudes() * (I * phi.sin())).unwrap();
            assert!((out.total_probability() - 1.0).abs() < 1e-10);
            for b in &out.branches {
                let ov = want.inner(&b.register.normalized().unwrap());
                assert!((ov.norm() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn write_in_read_out_round_trip() {
        let l = lat();
        let p = ProtocolParams::default();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for c in [[cr(h), cr(h)], [cr(0.6), I * 0.8], [cr(1.0), cr(0.0)]] {
            let w = toric_write_in(&l, c, 0.0, &p).unwrap();
            assert!((w.fidelity.unwrap() - 1.0).abs() < 1e-10);
            let r = toric_round_trip(&l, c, 0.0, &p).unwrap();
            assert!((r.total_probability() - 1.0).abs() < 1e-10);
            assert!(r.fidelity.unwrap() > 1.0 - 1e-9);
        }
    }
}
