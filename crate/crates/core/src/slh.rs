//! SLH triplets and the network builders used for chains of emitters and
//! two-waveguide interferometers.

use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64 as C64;

use crate::error::{QnetError, Result};
use crate::gue::{GueOperators, GueParams};
use crate::qops::{cr, phase, HilbertSpace, Operator, I};
use crate::scatter::NodeParams;

/// Line index of the lower waveguide.
pub const DOWN: usize = 0;
/// Line index of the upper waveguide, the one carrying the nodes.
pub const UP: usize = 1;

/// Balanced beamsplitter on `(down, up)`: `|down⟩ → (|down⟩ + |up⟩)/√2`,
/// `|up⟩ → (−|down⟩ + |up⟩)/√2`.
pub fn hadamard() -> Matrix2<C64> {
    let h = 1.0 / 2f64.sqrt();
    Matrix2::new(cr(h), cr(-h), cr(h), cr(h))
}

pub fn is_unitary(u: &DMatrix<C64>, tol: f64) -> bool {
    u.is_square() && (u.adjoint() * u - DMatrix::identity(u.nrows(), u.ncols())).camax() <= tol
}

#[derive(Debug, Clone)]
pub struct SlhTriplet {
    s: DMatrix<C64>,
    l: Vec<Operator>,
    h: Operator,
}

impl SlhTriplet {
    pub fn new(s: DMatrix<C64>, l: Vec<Operator>, h: Operator) -> Result<Self> {
        if s.nrows() != l.len() {
            return Err(QnetError::DimMismatch { expected: s.nrows(), found: l.len() });
        }
        if !is_unitary(&s, 1e-12) {
            return Err(QnetError::InvalidParameter("scattering matrix not unitary".into()));
        }
        if l.iter().any(|op| op.space() != h.space()) {
            return Err(QnetError::InvalidParameter("couplings and Hamiltonian on different spaces".into()));
        }
        if !h.is_hermitian(1e-12 * h.max_abs().max(1.0)) {
            return Err(QnetError::InvalidParameter("Hamiltonian not Hermitian".into()));
        }
        Ok(Self { s, l, h })
    }

    fn trivial_space() -> Arc<HilbertSpace> {
        Arc::new(HilbertSpace::new(Vec::<(String, usize)>::new()).expect("empty space"))
    }

    /// Pure scattering element with no internal degrees of freedom.
    pub fn passive(s: DMatrix<C64>) -> Result<Self> {
        let space = Self::trivial_space();
        let l = (0..s.nrows()).map(|_| Operator::zeros(&space)).collect();
        Self::new(s, l, Operator::zeros(&space))
    }

    pub fn identity(channels: usize) -> Self {
        Self::passive(DMatrix::identity(channels, channels)).expect("identity is unitary")
    }

    pub fn phase(phi: f64) -> Self {
        Self::passive(DMatrix::from_element(1, 1, phase(phi))).expect("phase is unitary")
    }

    /// One channel, unit scattering.
    pub fn emitter(l: Operator, h: Operator) -> Result<Self> {
        Self::new(DMatrix::identity(1, 1), vec![l], h)
    }

    pub fn channels(&self) -> usize {
        self.l.len()
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        self.h.space()
    }

    pub fn s_matrix(&self) -> &DMatrix<C64> {
        &self.s
    }

    pub fn couplings(&self) -> &[Operator] {
        &self.l
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.h
    }

    pub fn extend_to(&self, target: &Arc<HilbertSpace>) -> Result<Self> {
        Ok(Self {
            s: self.s.clone(),
            l: self.l.iter().map(|op| op.extend_to(target)).collect::<Result<_>>()?,
            h: self.h.extend_to(target)?,
        })
    }

    /// Place the triplet on one channel out of `channels`, other lines pass through.
    pub fn on_channel(&self, channel: usize, channels: usize) -> Result<Self> {
        if self.channels() != 1 || channel >= channels {
            return Err(QnetError::InvalidParameter("on_channel needs a one-channel triplet".into()));
        }
        let mut s = DMatrix::identity(channels, channels);
        s[(channel, channel)] = self.s[(0, 0)];
        let l = (0..channels)
            .map(|k| if k == channel { self.l[0].clone() } else { Operator::zeros(self.space()) })
            .collect();
        Ok(Self { s, l, h: self.h.clone() })
    }

    /// Same triplet with the Hamiltonian dropped.
    pub fn without_hamiltonian(&self) -> Self {
        Self { h: Operator::zeros(self.space()), ..self.clone() }
    }
}

fn common(g2: &SlhTriplet, g1: &SlhTriplet) -> Result<(SlhTriplet, SlhTriplet)> {
    let space = if g1.space() == g2.space() {
        g1.space().clone()
    } else {
        Arc::new(g1.space().union(g2.space())?)
    };
    Ok((g2.extend_to(&space)?, g1.extend_to(&space)?))
}

/// `g2 ◁ g1`: output of `g1` feeds `g2`.
pub fn series(g2: &SlhTriplet, g1: &SlhTriplet) -> Result<SlhTriplet> {
    if g1.channels() != g2.channels() {
        return Err(QnetError::DimMismatch { expected: g2.channels(), found: g1.channels() });
    }
    let (b, a) = common(g2, g1)?;
    let n = a.channels();
    let s = &b.s * &a.s;
    let mut l = Vec::with_capacity(n);
    let mut x = Operator::zeros(a.space());
    for i in 0..n {
        let mut li = b.l[i].clone();
        let mut sl = Operator::zeros(a.space());
        for j in 0..n {
            if b.s[(i, j)] != cr(0.0) {
                sl = &sl + &(&a.l[j] * b.s[(i, j)]);
            }
        }
        li = &li + &sl;
        x = &x + &(&b.l[i].dag() * &sl);
        l.push(li);
    }
    let h = &(&a.h + &b.h) + &(&(&x - &x.dag()) * c_half_i());
    Ok(SlhTriplet { s, l, h })
}

fn c_half_i() -> C64 {
    -I * 0.5
}

/// `g2 ⊞ g1`: channels of `g2` first, then those of `g1`.
pub fn concatenate(g2: &SlhTriplet, g1: &SlhTriplet) -> Result<SlhTriplet> {
    let (a, b) = common(g1, g2)?;
    let (n2, n1) = (b.channels(), a.channels());
    let mut s = DMatrix::zeros(n1 + n2, n1 + n2);
    s.view_mut((0, 0), (n2, n2)).copy_from(&b.s);
    s.view_mut((n2, n2), (n1, n1)).copy_from(&a.s);
    let mut l = b.l.clone();
    l.extend(a.l.iter().cloned());
    Ok(SlhTriplet { s, l, h: &a.h + &b.h })
}

/// Left-to-right composition of a list of triplets: `gs[0]` is upstream.
pub fn cascade(gs: &[SlhTriplet]) -> Result<SlhTriplet> {
    let mut it = gs.iter();
    let mut acc = it
        .next()
        .ok_or_else(|| QnetError::InvalidParameter("empty cascade".into()))?
        .clone();
    for g in it {
        acc = series(g, &acc)?;
    }
    Ok(acc)
}

/// Right- and left-propagating triplets of a list of emitters, each given as
/// `(L_R, L_L, H)` on its own subsystems. Node Hamiltonians are carried by
/// the right chain only, so the network Hamiltonian is the sum of both.
fn chains(nodes: &[(Operator, Operator, Operator)], phi_tilde: f64) -> Result<(SlhTriplet, SlhTriplet)> {
    if nodes.is_empty() {
        return Err(QnetError::InvalidParameter("chain needs at least one emitter".into()));
    }
    let half = SlhTriplet::phase(phi_tilde / 2.0);
    let mut right = Vec::new();
    let mut left = Vec::new();
    for (lr, ll, h) in nodes {
        right.extend([half.clone(), SlhTriplet::emitter(lr.clone(), h.clone())?, half.clone()]);
        let z = Operator::zeros(ll.space());
        left.extend([half.clone(), SlhTriplet::emitter(ll.clone(), z)?, half.clone()]);
    }
    left.reverse();
    Ok((cascade(&right)?, cascade(&left)?))
}

/// Two-channel `(R, L)` triplet of a chain of emitters.
pub fn compose_chain(ops: &[GueOperators], phi_tilde: f64) -> Result<SlhTriplet> {
    let nodes: Vec<_> = ops.iter().map(|o| (o.lr.clone(), o.ll.clone(), o.h.clone())).collect();
    let (r, l) = chains(&nodes, phi_tilde)?;
    concatenate(&r, &l)
}

/// Fock-space chain with emitter `n` (from 1) on subsystems `g{n}.1`, `g{n}.2`.
pub fn compose_gue_chain(gues: &[GueParams], phi_tilde: f64) -> Result<SlhTriplet> {
    let ops: Vec<GueOperators> = gues
        .iter()
        .enumerate()
        .map(|(n, p)| GueOperators::fock(p, &format!("g{}", n + 1)))
        .collect::<Result<_>>()?;
    compose_chain(&ops, phi_tilde)
}

#[derive(Debug, Clone)]
pub struct NetworkSpec {
    pub nodes: Vec<NodeParams>,
    /// `U_0 … U_N` on `(down, up)`.
    pub beamsplitters: Vec<Matrix2<C64>>,
    pub phi_tilde: f64,
}

impl NetworkSpec {
    pub fn new(nodes: Vec<NodeParams>, beamsplitters: Vec<Matrix2<C64>>, phi_tilde: f64) -> Result<Self> {
        let s = Self { nodes, beamsplitters, phi_tilde };
        s.validate()?;
        Ok(s)
    }

    /// Hadamards at both ends, identities in between.
    pub fn interferometer(nodes: Vec<NodeParams>, phi_tilde: f64) -> Result<Self> {
        let n = nodes.len();
        let mut u = vec![Matrix2::identity(); n + 1];
        u[0] = hadamard();
        u[n] = hadamard();
        Self::new(nodes, u, phi_tilde)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(QnetError::InvalidParameter("network needs at least one node".into()));
        }
        if self.beamsplitters.len() != self.nodes.len() + 1 {
            return Err(QnetError::DimMismatch {
                expected: self.nodes.len() + 1,
                found: self.beamsplitters.len(),
            });
        }
        for (k, u) in self.beamsplitters.iter().enumerate() {
            if (u.adjoint() * u - Matrix2::identity()).camax() > 1e-12 {
                return Err(QnetError::InvalidParameter(format!("U_{k} is not unitary")));
            }
        }
        if !self.phi_tilde.is_finite() {
            return Err(QnetError::InvalidParameter("phi_tilde must be finite".into()));
        }
        for n in &self.nodes {
            n.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn to_dmatrix(u: &Matrix2<C64>) -> DMatrix<C64> {
    DMatrix::from_iterator(2, 2, u.iter().cloned())
}

/// Emitter of node `n` with its qubit `q{n}`: `(L_R, L_L, H)` where the qubit
/// in `|1⟩` shifts the transmon detunings by `V_k`.
pub fn node_operators(node: &NodeParams, n: usize) -> Result<(Operator, Operator, Operator)> {
    let g = GueOperators::fock(&node.gue, &format!("g{n}"))?;
    let qs = HilbertSpace::single(format!("q{n}"), 2)?;
    let space = Arc::new(g.space.tensor(&qs)?);
    let mut p1 = DMatrix::zeros(2, 2);
    p1[(1, 1)] = cr(1.0);
    let p1 = crate::qops::embed(&p1, &space, &format!("q{n}"))?;
    let n1 = (&g.a1.dag() * &g.a1).extend_to(&space)?;
    let n2 = (&g.a2.dag() * &g.a2).extend_to(&space)?;
    let hv = &(&(&n1 * node.v1) + &(&n2 * node.v2)) * &p1;
    let h = &g.h.extend_to(&space)? - &hv;
    Ok((g.lr.extend_to(&space)?, g.ll.extend_to(&space)?, h))
}

/// Right- and left-propagating triplets of an interferometer whose nodes sit
/// on the upper line. Node Hamiltonians are carried by the right triplet;
/// the network Hamiltonian is the sum of both.
pub fn compose_interferometer(spec: &NetworkSpec) -> Result<(SlhTriplet, SlhTriplet)> {
    spec.validate()?;
    let n = spec.len();
    let half = SlhTriplet::passive(DMatrix::identity(2, 2) * phase(spec.phi_tilde / 2.0))?;
    let mut right = vec![SlhTriplet::passive(to_dmatrix(&spec.beamsplitters[0]))?];
    let mut left = vec![SlhTriplet::passive(to_dmatrix(&spec.beamsplitters[n].transpose()))?];
    let mut nodes = Vec::with_capacity(n);
    for (k, node) in spec.nodes.iter().enumerate() {
        nodes.push(node_operators(node, k + 1)?);
    }
    for (k, (lr, _, h)) in nodes.iter().enumerate() {
        right.push(half.clone());
        right.push(SlhTriplet::emitter(lr.clone(), h.clone())?.on_channel(UP, 2)?);
        right.push(half.clone());
        right.push(SlhTriplet::passive(to_dmatrix(&spec.beamsplitters[k + 1]))?);
    }
    for k in (0..n).rev() {
        let ll = &nodes[k].1;
        left.push(half.clone());
        left.push(SlhTriplet::emitter(ll.clone(), Operator::zeros(ll.space()))?.on_channel(UP, 2)?);
        left.push(half.clone());
        left.push(SlhTriplet::passive(to_dmatrix(&spec.beamsplitters[k].transpose()))?);
    }
    Ok((cascade(&right)?, cascade(&left)?))
}
