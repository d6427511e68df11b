//! Operators on finite tensor-product Hilbert spaces.
//!
//! Subsystems are ordered by declaration; every Kronecker product follows
//! that order, with the first subsystem as the most significant index.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{QnetError, Result};

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `e^{iθ}`
pub fn phase(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpace {
    subsystems: Vec<(String, usize)>,
}

impl HilbertSpace {
    pub fn new<S: Into<String>>(subsystems: Vec<(S, usize)>) -> Result<Self> {
        let subsystems: Vec<(String, usize)> =
            subsystems.into_iter().map(|(l, d)| (l.into(), d)).collect();
        for (i, (label, dim)) in subsystems.iter().enumerate() {
            if *dim == 0 {
                return Err(QnetError::InvalidDimension(format!("subsystem `{label}` has dim 0")));
            }
            if subsystems[..i].iter().any(|(l, _)| l == label) {
                return Err(QnetError::InvalidParameter(format!("duplicate label `{label}`")));
            }
        }
        Ok(Self { subsystems })
    }

    pub fn single(label: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new(vec![(label.into(), dim)])
    }

    pub fn dim(&self) -> usize {
        self.subsystems.iter().map(|(_, d)| d).product()
    }

    pub fn subsystems(&self) -> &[(String, usize)] {
        &self.subsystems
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.subsystems.iter().map(|(l, _)| l.as_str())
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.subsystems
            .iter()
            .position(|(l, _)| l == label)
            .ok_or_else(|| QnetError::UnknownLabel(label.to_string()))
    }

    pub fn local_dim(&self, label: &str) -> Result<usize> {
        Ok(self.subsystems[self.position(label)?].1)
    }

    /// Product space `self ⊗ other`; labels must be disjoint.
    pub fn tensor(&self, other: &HilbertSpace) -> Result<Self> {
        let mut subs = self.subsystems.clone();
        subs.extend(other.subsystems.iter().cloned());
        Self::new(subs)
    }

    /// Smallest space containing both, in the order of `self` then the new
    /// subsystems of `other`.
    pub fn union(&self, other: &HilbertSpace) -> Result<Self> {
        let mut subs = self.subsystems.clone();
        for (l, d) in &other.subsystems {
            match subs.iter().find(|(m, _)| m == l) {
                Some((_, e)) if e != d => {
                    return Err(QnetError::DimMismatch { expected: *e, found: *d });
                }
                Some(_) => {}
                None => subs.push((l.clone(), *d)),
            }
        }
        Self::new(subs)
    }

    /// Mixed-radix digits of a basis index.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.subsystems.len()];
        for (k, (_, d)) in self.subsystems.iter().enumerate().rev() {
            out[k] = index % d;
            index /= d;
        }
        out
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        self.subsystems
            .iter()
            .zip(digits)
            .fold(0, |acc, ((_, d), x)| acc * d + x)
    }
}

impl fmt::Display for HilbertSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.subsystems.iter().map(|(l, d)| format!("{l}:{d}")).collect();
        write!(f, "[{}]", parts.join(" ⊗ "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: Arc<HilbertSpace>,
    mat: DMatrix<C64>,
}

impl Operator {
    pub fn new(space: Arc<HilbertSpace>, mat: DMatrix<C64>) -> Result<Self> {
        let d = space.dim();
        if mat.nrows() != d || mat.ncols() != d {
            return Err(QnetError::DimMismatch { expected: d, found: mat.nrows().max(mat.ncols()) });
        }
        Ok(Self { space, mat })
    }

    pub fn zeros(space: &Arc<HilbertSpace>) -> Self {
        let d = space.dim();
        Self { space: space.clone(), mat: DMatrix::zeros(d, d) }
    }

    pub fn identity(space: &Arc<HilbertSpace>) -> Self {
        let d = space.dim();
        Self { space: space.clone(), mat: DMatrix::identity(d, d) }
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn dag(&self) -> Self {
        Self { space: self.space.clone(), mat: self.mat.adjoint() }
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { space: self.space.clone(), mat: &self.mat * z }
    }

    /// Largest entry of `|A − A†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        max_abs(&(&self.mat - self.mat.adjoint()))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.mat)
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        spectral_norm(&self.mat)
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        self * other - other * self
    }

    pub fn kron(&self, other: &Operator) -> Result<Operator> {
        let space = Arc::new(self.space.tensor(&other.space)?);
        Ok(Operator { space, mat: self.mat.kronecker(&other.mat) })
    }

    /// Re-express on a larger space whose subsystems include all of ours,
    /// padding with identities.
    pub fn extend_to(&self, target: &Arc<HilbertSpace>) -> Result<Operator> {
        if **target == *self.space {
            return Ok(Operator { space: target.clone(), mat: self.mat.clone() });
        }
        let pos: Vec<usize> = self
            .space
            .labels()
            .map(|l| target.position(l))
            .collect::<Result<_>>()?;
        for (k, (_, d)) in self.space.subsystems().iter().enumerate() {
            let td = target.subsystems()[pos[k]].1;
            if td != *d {
                return Err(QnetError::DimMismatch { expected: td, found: *d });
            }
        }
        let rest: Vec<usize> = (0..target.subsystems().len()).filter(|k| !pos.contains(k)).collect();
        let rest_dims: Vec<usize> = rest.iter().map(|&k| target.subsystems()[k].1).collect();
        let n_rest: usize = rest_dims.iter().product();
        let d_op = self.space.dim();
        let mut digits = vec![0usize; target.subsystems().len()];
        let mut mat = DMatrix::<C64>::zeros(target.dim(), target.dim());
        // index of each op basis state with the rest held at a given value
        let mut rows = vec![0usize; d_op];
        for r in 0..n_rest {
            let mut rr = r;
            for (k, &slot) in rest.iter().enumerate().rev() {
                digits[slot] = rr % rest_dims[k];
                rr /= rest_dims[k];
            }
            for (i, row) in rows.iter_mut().enumerate() {
                for (k, x) in self.space.digits(i).into_iter().enumerate() {
                    digits[pos[k]] = x;
                }
                *row = target.index(&digits);
            }
            for j in 0..d_op {
                for i in 0..d_op {
                    let v = self.mat[(i, j)];
                    if v != C64::new(0.0, 0.0) {
                        mat[(rows[i], rows[j])] = v;
                    }
                }
            }
        }
        Ok(Operator { space: target.clone(), mat })
    }

    fn assert_same(&self, other: &Operator) {
        assert!(
            Arc::ptr_eq(&self.space, &other.space) || self.space == other.space,
            "operator spaces differ: {} vs {}",
            self.space,
            other.space
        );
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn mul(self, rhs: &'a Operator) -> Operator {
        self.assert_same(rhs);
        Operator { space: self.space.clone(), mat: &self.mat * &rhs.mat }
    }
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn add(self, rhs: &'a Operator) -> Operator {
        self.assert_same(rhs);
        Operator { space: self.space.clone(), mat: &self.mat + &rhs.mat }
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn sub(self, rhs: &'a Operator) -> Operator {
        self.assert_same(rhs);
        Operator { space: self.space.clone(), mat: &self.mat - &rhs.mat }
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        &self + &rhs
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        &self - &rhs
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { space: self.space.clone(), mat: -&self.mat }
    }
}

impl Mul<C64> for &Operator {
    type Output = Operator;
    fn mul(self, z: C64) -> Operator {
        self.scale(z)
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, x: f64) -> Operator {
        self.scale(cr(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    space: Arc<HilbertSpace>,
    amp: DVector<C64>,
}

impl StateVector {
    pub fn new(space: Arc<HilbertSpace>, amp: DVector<C64>) -> Result<Self> {
        if amp.len() != space.dim() {
            return Err(QnetError::DimMismatch { expected: space.dim(), found: amp.len() });
        }
        Ok(Self { space, amp })
    }

    pub fn basis(space: &Arc<HilbertSpace>, index: usize) -> Self {
        let mut amp = DVector::zeros(space.dim());
        amp[index] = cr(1.0);
        Self { space: space.clone(), amp }
    }

    /// Basis state from per-subsystem digits.
    pub fn basis_digits(space: &Arc<HilbertSpace>, digits: &[usize]) -> Self {
        Self::basis(space, space.index(digits))
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amp
    }

    pub fn norm(&self) -> f64 {
        self.amp.norm()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(QnetError::InvalidParameter("zero vector cannot be normalized".into()));
        }
        Ok(Self { space: self.space.clone(), amp: &self.amp / cr(n) })
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amp.dotc(&other.amp)
    }

    pub fn apply(&self, op: &Operator) -> Result<StateVector> {
        check_dim(op.dim(), self.amp.len())?;
        Ok(Self { space: self.space.clone(), amp: op.matrix() * &self.amp })
    }

    pub fn add(&self, other: &StateVector, z: C64) -> StateVector {
        Self { space: self.space.clone(), amp: &self.amp + &other.amp * z }
    }

    pub fn scale(&self, z: C64) -> StateVector {
        Self { space: self.space.clone(), amp: &self.amp * z }
    }

    pub fn kron(&self, other: &StateVector) -> Result<StateVector> {
        let space = Arc::new(self.space.tensor(&other.space)?);
        Ok(Self { space, amp: self.amp.kronecker(&other.amp) })
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix { space: self.space.clone(), mat: &self.amp * self.amp.adjoint() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: Arc<HilbertSpace>,
    mat: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(space: Arc<HilbertSpace>, mat: DMatrix<C64>) -> Result<Self> {
        let d = space.dim();
        if mat.nrows() != d || mat.ncols() != d {
            return Err(QnetError::DimMismatch { expected: d, found: mat.nrows() });
        }
        Ok(Self { space, mat })
    }

    pub fn maximally_mixed(space: &Arc<HilbertSpace>) -> Self {
        let d = space.dim();
        Self { space: space.clone(), mat: DMatrix::identity(d, d) / cr(d as f64) }
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }

    /// `⟨ψ|ρ|ψ⟩`
    pub fn fidelity_pure(&self, psi: &StateVector) -> f64 {
        psi.amp.dotc(&(&self.mat * &psi.amp)).re
    }

    pub fn hermiticity_defect(&self) -> f64 {
        max_abs(&(&self.mat - self.mat.adjoint()))
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.mat + self.mat.adjoint()) * cr(0.5);
        h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Reduced state on the listed subsystems, in the order of this space.
    pub fn partial_trace_keep(&self, keep: &[&str]) -> Result<DensityMatrix> {
        let keep_pos: Vec<usize> = keep.iter().map(|l| self.space.position(l)).collect::<Result<_>>()?;
        let subs: Vec<(String, usize)> = self
            .space
            .subsystems()
            .iter()
            .enumerate()
            .filter(|(k, _)| keep_pos.contains(k))
            .map(|(_, s)| s.clone())
            .collect();
        let reduced = Arc::new(HilbertSpace::new(subs)?);
        let mut out = DMatrix::<C64>::zeros(reduced.dim(), reduced.dim());
        let n = self.space.subsystems().len();
        let kept: Vec<usize> = (0..n).filter(|k| keep_pos.contains(k)).collect();
        let traced: Vec<usize> = (0..n).filter(|k| !keep_pos.contains(k)).collect();
        let dim = self.space.dim();
        for i in 0..dim {
            let di = self.space.digits(i);
            for j in 0..dim {
                let dj = self.space.digits(j);
                if traced.iter().any(|&k| di[k] != dj[k]) {
                    continue;
                }
                let ri: Vec<usize> = kept.iter().map(|&k| di[k]).collect();
                let rj: Vec<usize> = kept.iter().map(|&k| dj[k]).collect();
                out[(reduced.index(&ri), reduced.index(&rj))] += self.mat[(i, j)];
            }
        }
        Ok(DensityMatrix { space: reduced, mat: out })
    }
}

impl From<&StateVector> for DensityMatrix {
    fn from(psi: &StateVector) -> Self {
        psi.projector()
    }
}

/// Lowering operator on a Fock space truncated to `n_max` levels.
pub fn truncated_boson(n_max: usize) -> Result<Operator> {
    if n_max < 2 {
        return Err(QnetError::InvalidDimension(format!("n_max = {n_max} < 2")));
    }
    let space = Arc::new(HilbertSpace::single("mode", n_max)?);
    let mut m = DMatrix::zeros(n_max, n_max);
    for n in 1..n_max {
        m[(n - 1, n)] = cr((n as f64).sqrt());
    }
    Operator::new(space, m)
}

/// `op` placed at subsystem `target_label`, identities elsewhere.
pub fn embed(op: &DMatrix<C64>, space: &Arc<HilbertSpace>, target_label: &str) -> Result<Operator> {
    let d = space.local_dim(target_label)?;
    if op.nrows() != d || op.ncols() != d {
        return Err(QnetError::DimMismatch { expected: d, found: op.nrows() });
    }
    let local = Operator::new(Arc::new(HilbertSpace::single(target_label, d)?), op.clone())?;
    local.extend_to(space)
}

/// `D[L]ρ = LρL† − ½{L†L, ρ}`
pub fn dissipator_apply(l: &Operator, rho: &DensityMatrix) -> Result<DMatrix<C64>> {
    check_dim(l.dim(), rho.mat.nrows())?;
    let lm = l.matrix();
    let ldl = lm.adjoint() * lm;
    let lr = lm * &rho.mat;
    Ok(&lr * lm.adjoint() - (&ldl * &rho.mat + &rho.mat * &ldl) * cr(0.5))
}

pub trait Expectation {
    fn expectation(&self, op: &Operator) -> Result<C64>;
}

impl Expectation for StateVector {
    fn expectation(&self, op: &Operator) -> Result<C64> {
        check_dim(op.dim(), self.amp.len())?;
        Ok(self.amp.dotc(&(op.matrix() * &self.amp)))
    }
}

impl Expectation for DensityMatrix {
    fn expectation(&self, op: &Operator) -> Result<C64> {
        check_dim(op.dim(), self.mat.nrows())?;
        Ok(trace_product(op.matrix(), &self.mat))
    }
}

pub fn expectation<S: Expectation>(op: &Operator, state: &S) -> Result<C64> {
    state.expectation(op)
}

/// `Tr(AB)` without forming the product.
pub fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(QnetError::DimMismatch { expected, found });
    }
    Ok(())
}

/// Row-compressed sparse matrix used by the matrix-free Liouvillian.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    dim: usize,
    rows: Vec<Vec<(usize, C64)>>,
}

impl SparseMatrix {
    pub fn from_dense(m: &DMatrix<C64>, tol: f64) -> Self {
        let rows = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .filter_map(|j| {
                        let v = m[(i, j)];
                        (v.norm() > tol).then_some((j, v))
                    })
                    .collect()
            })
            .collect();
        Self { dim: m.nrows(), rows }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_diagonal(&self) -> bool {
        self.rows.iter().enumerate().all(|(i, r)| r.iter().all(|(j, _)| *j == i))
    }

    pub fn diagonal(&self) -> Vec<C64> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.iter().find(|(j, _)| *j == i).map_or(C64::new(0.0, 0.0), |(_, v)| *v))
            .collect()
    }

    /// `out += z · A·X` with X row-major `dim × dim`.
    pub fn left_mul_acc(&self, x: &[C64], z: C64, out: &mut [C64]) {
        let d = self.dim;
        for (i, row) in self.rows.iter().enumerate() {
            let o = &mut out[i * d..(i + 1) * d];
            for &(k, a) in row {
                let za = z * a;
                let xr = &x[k * d..(k + 1) * d];
                for (oj, xj) in o.iter_mut().zip(xr) {
                    *oj += za * xj;
                }
            }
        }
    }

    /// `out += z · X·A†` with X row-major.
    pub fn right_mul_dag_acc(&self, x: &[C64], z: C64, out: &mut [C64]) {
        let d = self.dim;
        // (X A†)_{ij} = Σ_k X_{ik} conj(A_{jk})
        for (j, row) in self.rows.iter().enumerate() {
            for &(k, a) in row {
                let za = z * a.conj();
                for i in 0..d {
                    out[i * d + j] += za * x[i * d + k];
                }
            }
        }
    }

    /// `out += z · A X A†`.
    pub fn sandwich_acc(&self, x: &[C64], z: C64, scratch: &mut [C64], out: &mut [C64]) {
        scratch.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        self.left_mul_acc(x, C64::new(1.0, 0.0), scratch);
        self.right_mul_dag_acc(scratch, z, out);
    }
}
