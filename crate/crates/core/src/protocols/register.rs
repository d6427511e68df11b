//! Pure states of a few labelled qubits. Qubit 0 is the most significant bit.

use std::sync::Arc;

use nalgebra::{DVector, Matrix2, Vector2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{QnetError, Result};
use crate::qops::{cr, HilbertSpace, StateVector, I};

pub const MAX_QUBITS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

pub fn pauli_matrix(p: Pauli) -> Matrix2<C64> {
    let (o, z) = (cr(1.0), cr(0.0));
    match p {
        Pauli::X => Matrix2::new(z, o, o, z),
        Pauli::Y => Matrix2::new(z, -I, I, z),
        Pauli::Z => Matrix2::new(o, z, z, -o),
    }
}

/// `[[1, 1], [1, −1]]/√2` acting on a stationary qubit.
pub fn qubit_hadamard() -> Matrix2<C64> {
    let h = cr(std::f64::consts::FRAC_1_SQRT_2);
    Matrix2::new(h, h, h, -h)
}

pub fn ket0() -> Vector2<C64> {
    Vector2::new(cr(1.0), cr(0.0))
}

pub fn ket1() -> Vector2<C64> {
    Vector2::new(cr(0.0), cr(1.0))
}

pub fn ket_plus() -> Vector2<C64> {
    let h = cr(std::f64::consts::FRAC_1_SQRT_2);
    Vector2::new(h, h)
}

pub fn ket_minus() -> Vector2<C64> {
    let h = cr(std::f64::consts::FRAC_1_SQRT_2);
    Vector2::new(h, -h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Register {
    labels: Vec<String>,
    amp: DVector<C64>,
}

impl Register {
    pub fn new(labels: Vec<String>, amp: DVector<C64>) -> Result<Self> {
        if labels.len() > MAX_QUBITS {
            return Err(QnetError::TooLarge(format!("{} qubits, cap is {MAX_QUBITS}", labels.len())));
        }
        for (k, l) in labels.iter().enumerate() {
            if labels[..k].contains(l) {
                return Err(QnetError::InvalidParameter(format!("duplicate qubit label `{l}`")));
            }
        }
        if amp.len() != 1usize << labels.len() {
            return Err(QnetError::DimMismatch { expected: 1 << labels.len(), found: amp.len() });
        }
        Ok(Self { labels, amp })
    }

    pub fn product<S: AsRef<str>>(labels: &[S], states: &[Vector2<C64>]) -> Result<Self> {
        if labels.len() != states.len() {
            return Err(QnetError::DimMismatch { expected: labels.len(), found: states.len() });
        }
        let mut amp = DVector::from_element(1, cr(1.0));
        for s in states {
            amp = amp.kronecker(&DVector::from_column_slice(s.as_slice()));
        }
        Self::new(labels.iter().map(|l| l.as_ref().to_string()).collect(), amp)
    }

    /// `|+⟩` on every qubit.
    pub fn plus<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        Self::product(labels, &vec![ket_plus(); labels.len()])
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amp
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp.norm_squared()
    }

    pub fn qubit(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| QnetError::UnknownLabel(label.to_string()))
    }

    fn mask(&self, k: usize) -> usize {
        assert!(k < self.len(), "qubit {k} out of range");
        1 << (self.len() - 1 - k)
    }

    /// Bit of qubit `k` in basis index `x`.
    pub fn bit(&self, x: usize, k: usize) -> usize {
        usize::from(x & self.mask(k) != 0)
    }

    pub fn apply(&mut self, k: usize, u: &Matrix2<C64>) {
        let m = self.mask(k);
        for x in 0..self.amp.len() {
            if x & m == 0 {
                let (a0, a1) = (self.amp[x], self.amp[x | m]);
                self.amp[x] = u[(0, 0)] * a0 + u[(0, 1)] * a1;
                self.amp[x | m] = u[(1, 0)] * a0 + u[(1, 1)] * a1;
            }
        }
    }

    pub fn apply_pauli_string(&mut self, ops: &[(usize, Pauli)]) {
        for &(k, p) in ops {
            self.apply(k, &pauli_matrix(p));
        }
    }

    pub fn cnot(&mut self, control: usize, target: usize) {
        let (c, t) = (self.mask(control), self.mask(target));
        for x in 0..self.amp.len() {
            if x & c != 0 && x & t == 0 {
                self.amp.swap_rows(x, x | t);
            }
        }
    }

    pub fn cz(&mut self, a: usize, b: usize) {
        let m = self.mask(a) | self.mask(b);
        for x in 0..self.amp.len() {
            if x & m == m {
                self.amp[x] = -self.amp[x];
            }
        }
    }

    /// Multiply amplitude `x` by `f(x)`.
    pub fn diagonal(&mut self, f: impl Fn(usize) -> C64) {
        for (x, a) in self.amp.iter_mut().enumerate() {
            *a *= f(x);
        }
    }

    /// `(𝟙 + sign·P)/2` for a Pauli string `P`.
    pub fn project_pauli(&self, ops: &[(usize, Pauli)], sign: f64) -> Register {
        let mut p = self.clone();
        p.apply_pauli_string(ops);
        Register { labels: self.labels.clone(), amp: (&self.amp + &p.amp * cr(sign)) * cr(0.5) }
    }

    /// `|v⟩⟨v|` on qubit `k`.
    pub fn project(&self, k: usize, v: &Vector2<C64>) -> Register {
        let m = self.mask(k);
        let mut amp = self.amp.clone();
        for x in 0..amp.len() {
            if x & m == 0 {
                let c = v[0].conj() * self.amp[x] + v[1].conj() * self.amp[x | m];
                amp[x] = v[0] * c;
                amp[x | m] = v[1] * c;
            }
        }
        Register { labels: self.labels.clone(), amp }
    }

    /// Contract qubit `k` with `⟨v|` and remove it.
    pub fn contract(&self, k: usize, v: &Vector2<C64>) -> Register {
        let n = self.len();
        let m = self.mask(k);
        let low = m - 1;
        let amp = DVector::from_iterator(
            1 << (n - 1),
            (0..1usize << (n - 1)).map(|y| {
                let x = ((y & !low) << 1) | (y & low);
                v[0].conj() * self.amp[x] + v[1].conj() * self.amp[x | m]
            }),
        );
        let mut labels = self.labels.clone();
        labels.remove(k);
        Register { labels, amp }
    }

    /// Add a qubit in state `v` at the end.
    pub fn append(&self, label: &str, v: &Vector2<C64>) -> Result<Register> {
        let mut labels = self.labels.clone();
        labels.push(label.to_string());
        Register::new(labels, self.amp.kronecker(&DVector::from_column_slice(v.as_slice())))
    }

    pub fn scaled(&self, z: C64) -> Register {
        Register { labels: self.labels.clone(), amp: &self.amp * z }
    }

    pub fn normalized(&self) -> Result<Register> {
        let n = self.amp.norm();
        if n == 0.0 {
            return Err(QnetError::InvalidParameter("zero register state".into()));
        }
        Ok(self.scaled(cr(1.0 / n)))
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Register) -> C64 {
        self.amp.dotc(&other.amp)
    }

    /// `|⟨t|ψ⟩|²/(‖t‖²‖ψ‖²)`.
    pub fn fidelity(&self, target: &Register) -> f64 {
        let den = self.norm_sqr() * target.norm_sqr();
        if den == 0.0 {
            return 0.0;
        }
        target.inner(self).norm_sqr() / den
    }

    /// Normalized expectation value of a Pauli string.
    pub fn expectation(&self, ops: &[(usize, Pauli)]) -> f64 {
        let mut p = self.clone();
        p.apply_pauli_string(ops);
        self.inner(&p).re / self.norm_sqr()
    }

    /// Normalized reduced density matrix of qubit `k`.
    pub fn reduced_density(&self, k: usize) -> Matrix2<C64> {
        let m = self.mask(k);
        let mut rho = Matrix2::zeros();
        for x in 0..self.amp.len() {
            if x & m == 0 {
                let a = [self.amp[x], self.amp[x | m]];
                for i in 0..2 {
                    for j in 0..2 {
                        rho[(i, j)] += a[i] * a[j].conj();
                    }
                }
            }
        }
        rho / cr(self.norm_sqr())
    }

    /// `⟨v|ρ_k|v⟩` for normalized `v`.
    pub fn qubit_fidelity(&self, k: usize, v: &Vector2<C64>) -> f64 {
        let v = v / cr(v.norm());
        (v.adjoint() * self.reduced_density(k) * v)[(0, 0)].re
    }

    pub fn to_state_vector(&self) -> Result<StateVector> {
        let space = HilbertSpace::new(self.labels.iter().map(|l| (l.clone(), 2)).collect())?;
        StateVector::new(Arc::new(space), self.amp.clone())
    }
}

/// Name of a single-qubit gate up to global phase, when it is one of a few
/// Cliffords; otherwise its rounded entries.
pub fn gate_name(u: &Matrix2<C64>) -> String {
    let id = Matrix2::identity();
    let h = qubit_hadamard();
    let x = pauli_matrix(Pauli::X);
    let z = pauli_matrix(Pauli::Z);
    let candidates = [
        ("I", id),
        ("X", x),
        ("Z", z),
        ("XZ", x * z),
        ("H", h),
        ("XH", x * h),
        ("ZH", z * h),
        ("XZH", x * z * h),
    ];
    for (name, c) in candidates {
        if (c.adjoint() * u).trace().norm() > 2.0 - 1e-9 {
            return name.to_string();
        }
    }
    format!(
        "[[{:.4}, {:.4}], [{:.4}, {:.4}]]",
        u[(0, 0)],
        u[(0, 1)],
        u[(1, 0)],
        u[(1, 1)]
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contract_removes_the_right_qubit() {
        let r = Register::product(&["a", "b", "c"], &[ket0(), ket_plus(), ket1()]).unwrap();
        let s = r.contract(1, &ket_plus());
        assert_eq!(s.labels(), &["a".to_string(), "c".to_string()]);
        let want = Register::product(&["a", "c"], &[ket0(), ket1()]).unwrap();
        assert!((s.inner(&want).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cnot_makes_bell_state() {
        let mut r = Register::product(&["a", "b"], &[ket_plus(), ket0()]).unwrap();
        r.cnot(0, 1);
        assert!((r.expectation(&[(0, Pauli::Z), (1, Pauli::Z)]) - 1.0).abs() < 1e-14);
        assert!((r.expectation(&[(0, Pauli::X), (1, Pauli::X)]) - 1.0).abs() < 1e-14);
        let rho = r.reduced_density(0);
        assert!((rho - Matrix2::identity() * cr(0.5)).norm() < 1e-14);
    }

    #[test]
    fn projection_halves_plus_state() {
        let r = Register::plus(&["a", "b"]).unwrap();
        let p = r.project_pauli(&[(0, Pauli::Z), (1, Pauli::Z)], 1.0);
        assert!((p.norm_sqr() - 0.5).abs() < 1e-14);
        let q = r.project(1, &ket1());
        assert!((q.norm_sqr() - 0.5).abs() < 1e-14);
        assert!((q.expectation(&[(1, Pauli::Z)]) + 1.0).abs() < 1e-14);
    }

    #[test]
    fn names_cliffords_up_to_phase() {
        let h = qubit_hadamard();
        assert_eq!(gate_name(&(h * I)), "H");
        assert_eq!(gate_name(&(pauli_matrix(Pauli::Y))), "XZ");
    }
}
