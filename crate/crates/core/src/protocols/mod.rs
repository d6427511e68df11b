//! Photon-mediated protocols on registers of stationary qubits.
//!
//! Every protocol is a sequence of single-photon scatterings and qubit
//! measurements. Outcomes are tracked as branches holding unnormalized
//! register states, so branch probabilities are the squared norms.
//!
//! Conventions: the photon enters on the `down` line; the photonic Hadamard
//! is [`hadamard`]; each node's up-arm phase `t(Δ^n)` is cancelled by a fixed
//! phase shifter placed right after the node, so a resonant node acts as `σ_z`
//! on the up arm at `δ_p = 0`.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QnetError, Result};
use crate::qops::cr;
use crate::scatter::{general_scattering, ideal_scattering, transmission, NodeParams, ScatteringResult, LEFT, RIGHT};
use crate::slh::{hadamard, NetworkSpec, DOWN, UP};

mod pulse;
mod register;
mod toric;

pub use pulse::{pulse_average, PulseSpec};
pub use register::{gate_name, ket0, ket1, ket_minus, ket_plus, pauli_matrix, qubit_hadamard, Pauli, Register, MAX_QUBITS};
pub use toric::{
    toric_apply_logical, toric_exp_string, toric_generate, toric_measure_logical, toric_read_out, toric_round_trip,
    toric_stabilizers, toric_write_in, Logical, ToricLattice,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Ideal,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolParams {
    pub gamma_r: f64,
    pub r: f64,
    /// Cross-Kerr shift `V`, equal on both transmons.
    pub v: f64,
    pub phi_tilde: f64,
    /// Detuning of idle nodes in units of `γ_r`.
    pub far_detuning: f64,
    /// Treat idle nodes as exactly transparent and leave them out.
    pub prune_far: bool,
    pub backend: Backend,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self { gamma_r: 1.0, r: 0.1, v: 1.0, phi_tilde: 0.0, far_detuning: 1e3, prune_far: false, backend: Backend::Ideal }
    }
}

impl ProtocolParams {
    /// Defaults with `V = γ_r`.
    pub fn with_gamma_r(gamma_r: f64) -> Self {
        Self { gamma_r, v: gamma_r, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_r > 0.0 && self.gamma_r.is_finite()) {
            return Err(QnetError::InvalidParameter("gamma_r must be > 0".into()));
        }
        if !(self.v >= 0.0 && self.v.is_finite()) || !self.phi_tilde.is_finite() {
            return Err(QnetError::InvalidParameter("V must be >= 0 and phi_tilde finite".into()));
        }
        if !(self.far_detuning > 1.0 && self.far_detuning.is_finite()) {
            return Err(QnetError::InvalidParameter("far_detuning must exceed 1 (units of gamma_r)".into()));
        }
        if !(self.r > -1.0 && self.r < 1.0) {
            return Err(QnetError::InvalidParameter("r must lie in (-1, 1)".into()));
        }
        Ok(())
    }

    /// Node with `Δ^n = −γ_r/2`.
    pub fn resonant_node(&self) -> Result<NodeParams> {
        NodeParams::with_gamma_r(self.r, self.gamma_r, -0.5 * self.gamma_r, self.v)
    }

    pub fn idle_node(&self) -> Result<NodeParams> {
        NodeParams::with_gamma_r(self.r, self.gamma_r, self.far_detuning * self.gamma_r, self.v)
    }
}

/// Nodes along the waveguide and the register qubit each one couples to.
#[derive(Debug, Clone)]
pub struct PhotonNetwork {
    /// `None` when every node was pruned.
    pub spec: Option<NetworkSpec>,
    /// Line map of the empty network.
    pub passive: Matrix2<C64>,
    pub qubits: Vec<usize>,
}

impl PhotonNetwork {
    /// `nodes[k]` couples to `qubits[k]`; `beamsplitters` are `U_0 … U_N`.
    /// A phase shifter `diag(1, t(Δ^n)*)` is appended after every node.
    /// With `prune_far`, nodes flagged idle are removed and their neighbouring
    /// beamsplitters merged.
    pub fn build(
        qubits: &[usize],
        active: &[bool],
        beamsplitters: &[Matrix2<C64>],
        params: &ProtocolParams,
    ) -> Result<Self> {
        params.validate()?;
        if active.len() != qubits.len() {
            return Err(QnetError::DimMismatch { expected: qubits.len(), found: active.len() });
        }
        if beamsplitters.len() != qubits.len() + 1 {
            return Err(QnetError::DimMismatch { expected: qubits.len() + 1, found: beamsplitters.len() });
        }
        let mut nodes = Vec::new();
        let mut kept = Vec::new();
        let mut us = Vec::new();
        let mut pending = beamsplitters[0];
        for (k, (&q, &on)) in qubits.iter().zip(active).enumerate() {
            if !on && params.prune_far {
                pending = beamsplitters[k + 1] * pending;
                continue;
            }
            let node = if on { params.resonant_node()? } else { params.idle_node()? };
            let comp = transmission(node.delta_n, node.gamma_r()).conj();
            us.push(pending);
            nodes.push(node);
            kept.push(q);
            pending = beamsplitters[k + 1] * Matrix2::new(cr(1.0), cr(0.0), cr(0.0), comp);
        }
        us.push(pending);
        if nodes.is_empty() {
            return Ok(Self { spec: None, passive: pending, qubits: kept });
        }
        let spec = NetworkSpec::new(nodes, us, params.phi_tilde)?;
        Ok(Self { spec: Some(spec), passive: Matrix2::identity(), qubits: kept })
    }

    /// Hadamards at both ends, identities in between.
    pub fn interferometer(qubits: &[usize], active: &[bool], params: &ProtocolParams) -> Result<Self> {
        let n = qubits.len();
        let mut us = vec![Matrix2::identity(); n + 1];
        us[0] = hadamard();
        us[n] = hadamard();
        Self::build(qubits, active, &us, params)
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    pub fn scattering(&self, delta_p: f64, backend: Backend) -> Result<Option<ScatteringResult>> {
        match &self.spec {
            None => Ok(None),
            Some(spec) => Ok(Some(match backend {
                Backend::Ideal => ideal_scattering(spec, delta_p)?,
                Backend::General => general_scattering(spec, delta_p)?,
            })),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Right,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Line {
    Down,
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PhotonRecord {
    pub direction: Direction,
    pub line: Line,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Measurement {
    pub name: String,
    pub outcome: i32,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub register: Register,
    /// Path probability when sampling; 1 when enumerating.
    pub weight: f64,
    pub photons: Vec<PhotonRecord>,
    pub measurements: Vec<Measurement>,
    pub corrections: Vec<String>,
}

impl Branch {
    pub fn new(register: Register) -> Self {
        Self { register, weight: 1.0, photons: Vec::new(), measurements: Vec::new(), corrections: Vec::new() }
    }

    pub fn probability(&self) -> f64 {
        self.weight * self.register.norm_sqr()
    }

    pub fn correct(&mut self, k: usize, u: &Matrix2<C64>, name: &str) {
        self.register.apply(k, u);
        self.corrections.push(format!("{name} {}", self.register.labels()[k]));
    }

    pub fn outcome(&self, name: &str) -> Option<i32> {
        self.measurements.iter().rev().find(|m| m.name == name).map(|m| m.outcome)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum BranchMode {
    /// Keep every outcome with its probability.
    #[default]
    Enumerate,
    /// Follow one outcome drawn from a seeded generator.
    Sample { seed: u64 },
}

const NEGLIGIBLE: f64 = 1e-18;

#[derive(Debug, Clone)]
pub struct ProtocolOutcome {
    pub branches: Vec<Branch>,
    /// Probability-weighted fidelity with the protocol's target, when defined.
    pub fidelity: Option<f64>,
    rng: Option<ChaCha8Rng>,
}

impl ProtocolOutcome {
    pub fn start(register: Register, mode: BranchMode) -> Self {
        let rng = match mode {
            BranchMode::Enumerate => None,
            BranchMode::Sample { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        Self { branches: vec![Branch::new(register)], fidelity: None, rng }
    }

    fn with_rng(register: Register, rng: ChaCha8Rng) -> Self {
        Self { branches: vec![Branch::new(register)], fidelity: None, rng: Some(rng) }
    }

    pub fn is_sampled(&self) -> bool {
        self.rng.is_some()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.branches.iter().map(Branch::probability).collect()
    }

    pub fn total_probability(&self) -> f64 {
        self.probabilities().iter().sum()
    }

    /// `Σ p_b f(b) / Σ p_b`.
    pub fn average(&self, f: impl Fn(&Branch) -> f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for b in &self.branches {
            let p = b.probability();
            num += p * f(b);
            den += p;
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }

    /// Replace each branch by its children. Sampling keeps one child, drawn
    /// by probability and renormalized.
    pub(crate) fn split(mut self, f: impl Fn(&Branch) -> Result<Vec<Branch>>) -> Result<Self> {
        let mut out = Vec::new();
        for b in &self.branches {
            let children = f(b)?;
            match &mut self.rng {
                None => out.extend(children.into_iter().filter(|c| c.probability() > NEGLIGIBLE)),
                Some(rng) => {
                    let probs: Vec<f64> = children.iter().map(Branch::probability).collect();
                    let total: f64 = probs.iter().sum();
                    if total <= 0.0 {
                        return Err(QnetError::Precondition("all outcomes have zero probability".into()));
                    }
                    let mut u = rng.gen::<f64>() * total;
                    let mut pick = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
                    for (k, &p) in probs.iter().enumerate() {
                        if u < p {
                            pick = k;
                            break;
                        }
                        u -= p;
                    }
                    let mut c = children.into_iter().nth(pick).expect("child index");
                    let p = c.probability();
                    c.register = c.register.normalized()?;
                    c.weight = p;
                    out.push(c);
                }
            }
        }
        self.branches = out;
        Ok(self)
    }

    pub(crate) fn map(mut self, mut f: impl FnMut(&mut Branch) -> Result<()>) -> Result<Self> {
        for b in &mut self.branches {
            f(b)?;
        }
        Ok(self)
    }

    /// Scatter one photon entering on `input` through `net`.
    pub fn photon(self, net: &PhotonNetwork, delta_p: f64, backend: Backend, input: usize) -> Result<Self> {
        let res = net.scattering(delta_p, backend)?;
        self.split(|b| {
            Ok(scatter_register(&b.register, net, res.as_ref(), input)
                .into_iter()
                .map(|(rec, reg)| {
                    let mut c = b.clone();
                    c.register = reg;
                    c.photons.push(rec);
                    c
                })
                .collect())
        })
    }

    /// Projective measurement of qubit `k` in the orthonormal basis `basis`,
    /// recorded as `outcomes[m]`.
    pub fn measure(self, k: usize, basis: [Vector2<C64>; 2], name: &str, outcomes: [i32; 2]) -> Result<Self> {
        self.split(|b| {
            Ok((0..2)
                .map(|m| {
                    let mut c = b.clone();
                    c.register = b.register.project(k, &basis[m]);
                    c.measurements.push(Measurement { name: name.to_string(), outcome: outcomes[m] });
                    c
                })
                .collect())
        })
    }

    /// Measure qubit `k` in the chosen basis and drop it.
    pub fn measure_out(self, k: usize, basis: [Vector2<C64>; 2], name: &str, outcomes: [i32; 2]) -> Result<Self> {
        self.split(|b| {
            Ok((0..2)
                .map(|m| {
                    let mut c = b.clone();
                    c.register = b.register.contract(k, &basis[m]);
                    c.measurements.push(Measurement { name: name.to_string(), outcome: outcomes[m] });
                    c
                })
                .collect())
        })
    }

    /// Photon-mediated measurement of a Pauli product. The photon passes the
    /// listed qubits in order inside a Hadamard interferometer; exiting `up`
    /// heralds `+1`, `down` heralds `−1`, any left-moving output `0`.
    pub fn measure_pauli_product(
        self,
        ops: &[(usize, Pauli)],
        name: &str,
        delta_p: f64,
        params: &ProtocolParams,
        reversed: bool,
    ) -> Result<Self> {
        let mut qubits: Vec<usize> = ops.iter().map(|o| o.0).collect();
        if reversed {
            // entering from the far end: nodes met in the opposite order
            qubits.reverse();
        }
        let net = PhotonNetwork::interferometer(&qubits, &vec![true; qubits.len()], params)?;
        let h = qubit_hadamard();
        // V P V† = Z
        let sdag = Matrix2::new(cr(1.0), cr(0.0), cr(0.0), -crate::qops::I);
        let rot = |p: Pauli| match p {
            Pauli::X => Some(h),
            Pauli::Y => Some(h * sdag),
            Pauli::Z => None,
        };
        let out = self.map(|b| {
            for &(k, p) in ops {
                if let Some(v) = rot(p) {
                    b.register.apply(k, &v);
                }
            }
            Ok(())
        })?;
        let out = out.photon(&net, delta_p, params.backend, DOWN)?;
        out.map(|b| {
            for &(k, p) in ops {
                if let Some(v) = rot(p) {
                    b.register.apply(k, &v.adjoint());
                }
            }
            let rec = *b.photons.last().expect("photon record");
            let rec = if reversed { PhotonRecord { direction: flip(rec.direction), ..rec } } else { rec };
            *b.photons.last_mut().expect("photon record") = rec;
            let outcome = parity_outcome(&rec, reversed);
            b.measurements.push(Measurement { name: name.to_string(), outcome });
            Ok(())
        })
    }

    pub(crate) fn set_fidelity(mut self, f: impl Fn(&Branch) -> f64) -> Self {
        self.fidelity = Some(self.average(f));
        self
    }
}

fn flip(d: Direction) -> Direction {
    match d {
        Direction::Right => Direction::Left,
        Direction::Left => Direction::Right,
    }
}

fn parity_outcome(rec: &PhotonRecord, reversed: bool) -> i32 {
    let forward = if reversed { Direction::Left } else { Direction::Right };
    match (rec.direction == forward, rec.line) {
        (true, Line::Up) => 1,
        (true, Line::Down) => -1,
        _ => 0,
    }
}

/// Register states conditioned on each photon output channel.
pub fn scatter_register(
    reg: &Register,
    net: &PhotonNetwork,
    res: Option<&ScatteringResult>,
    input: usize,
) -> Vec<(PhotonRecord, Register)> {
    let mut out = Vec::with_capacity(4);
    let n = net.qubits.len();
    for dir in [RIGHT, LEFT] {
        for line in [DOWN, UP] {
            let mut r = reg.clone();
            match res {
                None => {
                    let a = if dir == RIGHT { net.passive[(line, input)] } else { cr(0.0) };
                    r = r.scaled(a);
                }
                Some(res) => r.diagonal(|x| {
                    let s = net.qubits.iter().enumerate().fold(0, |s, (k, &q)| s | (reg.bit(x, q) << (n - 1 - k)));
                    res.amplitude(dir, line, input, s)
                }),
            }
            let rec = PhotonRecord {
                direction: if dir == RIGHT { Direction::Right } else { Direction::Left },
                line: if line == UP { Line::Up } else { Line::Down },
            };
            out.push((rec, r));
        }
    }
    out
}

fn labels(n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("q{k}")).collect()
}

fn check_qubits(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(QnetError::InvalidParameter(format!("need at least {min} qubits, got {n}")));
    }
    if n > 16 {
        return Err(QnetError::TooLarge(format!("{n} nodes exceed the cap of 16")));
    }
    Ok(())
}

// ---------------------------------------------------------------- detector

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorResponse {
    pub p_det: f64,
    pub p_no_click: f64,
    /// `⟨−|σ̂|+⟩` with `|∓⟩ = (∓|0⟩ + |1⟩)/√2`.
    pub click_factor: C64,
    /// `⟨+|σ̂|+⟩`.
    pub no_click_factor: C64,
}

/// Qubit in `|+⟩` at a resonant node with `V = γ_r`, read out after the photon.
pub fn photon_detector(delta_p: f64, gamma_r: f64) -> Result<DetectorResponse> {
    if !(gamma_r > 0.0) {
        return Err(QnetError::InvalidParameter("gamma_r must be > 0".into()));
    }
    let comp = transmission(-0.5 * gamma_r, gamma_r).conj();
    let t0 = transmission(delta_p - 0.5 * gamma_r, gamma_r) * comp;
    let t1 = transmission(delta_p + 0.5 * gamma_r, gamma_r) * comp;
    let click = (t1 - t0) * 0.5;
    let none = (t0 + t1) * 0.5;
    Ok(DetectorResponse { p_det: click.norm_sqr(), p_no_click: none.norm_sqr(), click_factor: click, no_click_factor: none })
}

// ------------------------------------------------------------ state transfer

/// `F_QST(δ_p)` for resonant nodes at `V = γ_r`.
pub fn qst_fidelity_closed_form(delta_p: f64, gamma_r: f64) -> f64 {
    let (g, d) = (gamma_r, delta_p);
    let num = g.powi(8) - 2.0 * g.powi(6) * d.powi(2) - 2.0 * g.powi(5) * d.powi(3) + 3.0 * g.powi(4) * d.powi(4)
        + 2.0 * g.powi(3) * d.powi(5)
        + 4.0 * d.powi(8);
    let den = g.powi(4) + 4.0 * d.powi(4);
    num / (den * den)
}

/// Nodes 1 and N resonant, the rest idle; `U_0 = U_1 = U_N = H`.
pub fn qst_network(n_nodes: usize, params: &ProtocolParams) -> Result<PhotonNetwork> {
    check_qubits(n_nodes, 2)?;
    let qubits: Vec<usize> = (0..n_nodes).collect();
    let active: Vec<bool> = (0..n_nodes).map(|k| k == 0 || k == n_nodes - 1).collect();
    let mut us = vec![Matrix2::identity(); n_nodes + 1];
    us[0] = hadamard();
    us[1] = hadamard();
    us[n_nodes] = hadamard();
    PhotonNetwork::build(&qubits, &active, &us, params)
}

/// X basis used to read qubit 1.
fn x_basis() -> [Vector2<C64>; 2] {
    [ket_plus(), ket_minus()]
}

/// Maps from qubit 1 to qubit N for each (photon line, qubit-1 outcome),
/// with qubit N starting in `|+⟩` and idle qubits in `|0⟩`.
pub fn qst_kraus(net: &PhotonNetwork, n_nodes: usize, delta_p: f64, backend: Backend) -> Result<[[Matrix2<C64>; 2]; 2]> {
    let res = net.scattering(delta_p, backend)?;
    let mut k = [[Matrix2::zeros(); 2]; 2];
    for a in 0..2 {
        let mut states = vec![ket0(); n_nodes];
        states[0] = if a == 0 { ket0() } else { ket1() };
        states[n_nodes - 1] = ket_plus();
        let reg = Register::product(&labels(n_nodes), &states)?;
        for (rec, out) in scatter_register(&reg, net, res.as_ref(), DOWN) {
            if rec.direction != Direction::Right {
                continue;
            }
            let j = if rec.line == Line::Up { UP } else { DOWN };
            for (m, v) in x_basis().iter().enumerate() {
                let mut r = out.contract(0, v);
                while r.len() > 1 {
                    r = r.contract(0, &ket0());
                }
                k[j][m][(0, a)] = r.amplitudes()[0];
                k[j][m][(1, a)] = r.amplitudes()[1];
            }
        }
    }
    Ok(k)
}

/// Corrections `U_b†` from the `δ_p = 0` maps `K_b ∝ U_b`.
pub fn qst_corrections(net: &PhotonNetwork, n_nodes: usize, backend: Backend) -> Result<[[Matrix2<C64>; 2]; 2]> {
    let k0 = qst_kraus(net, n_nodes, 0.0, backend)?;
    let mut c = [[Matrix2::identity(); 2]; 2];
    for j in 0..2 {
        for m in 0..2 {
            let p = (k0[j][m].adjoint() * k0[j][m]).trace().re / 2.0;
            if p > 1e-12 {
                c[j][m] = (k0[j][m] / cr(p.sqrt())).adjoint();
            }
        }
    }
    Ok(c)
}

fn check_input(input: [C64; 2]) -> Result<Vector2<C64>> {
    let v = Vector2::new(input[0], input[1]);
    if (v.norm() - 1.0).abs() > 1e-10 {
        return Err(QnetError::InvalidParameter(format!("input state has norm {}", v.norm())));
    }
    Ok(v)
}

fn line_index(rec: &PhotonRecord) -> usize {
    if rec.line == Line::Up {
        UP
    } else {
        DOWN
    }
}

/// Transfer `c_0|0⟩ + c_1|1⟩` from qubit 1 to qubit N.
pub fn run_state_transfer(n_nodes: usize, input: [C64; 2], delta_p: f64, params: &ProtocolParams) -> Result<ProtocolOutcome> {
    let psi = check_input(input)?;
    let net = qst_network(n_nodes, params)?;
    let corr = qst_corrections(&net, n_nodes, params.backend)?;
    let mut states = vec![ket0(); n_nodes];
    states[0] = psi;
    states[n_nodes - 1] = ket_plus();
    let reg = Register::product(&labels(n_nodes), &states)?;
    let last = n_nodes - 1;
    let out = ProtocolOutcome::start(reg, BranchMode::Enumerate)
        .photon(&net, delta_p, params.backend, DOWN)?
        .measure(0, x_basis(), "q1_x", [1, -1])?
        .map(|b| {
            let rec = b.photons[0];
            if rec.direction == Direction::Right {
                let m = usize::from(b.outcome("q1_x") == Some(-1));
                let u = corr[line_index(&rec)][m];
                b.correct(last, &u, &gate_name(&u));
            }
            Ok(())
        })?;
    Ok(out.set_fidelity(|b| b.register.qubit_fidelity(last, &psi)))
}

/// Entanglement fidelity of the transfer: qubit 1 starts maximally entangled
/// with an ancilla, and the final (qubit N, ancilla) state is compared with
/// `(|00⟩ + |11⟩)/√2`, summed over heralded branches.
pub fn qst_entanglement_fidelity(n_nodes: usize, delta_p: f64, params: &ProtocolParams) -> Result<f64> {
    let net = qst_network(n_nodes, params)?;
    let corr = qst_corrections(&net, n_nodes, params.backend)?;
    let mut names = labels(n_nodes);
    names.push("a".into());
    let mut states = vec![ket0(); n_nodes + 1];
    states[0] = ket_plus();
    states[n_nodes - 1] = ket_plus();
    let mut reg = Register::product(&names, &states)?;
    reg.cnot(0, n_nodes);
    let bell = {
        let mut r = Register::product(&["qN", "a"], &[ket_plus(), ket0()])?;
        r.cnot(0, 1);
        r
    };
    let res = net.scattering(delta_p, params.backend)?;
    let mut f = 0.0;
    for (rec, out) in scatter_register(&reg, &net, res.as_ref(), DOWN) {
        if rec.direction != Direction::Right {
            continue;
        }
        for (m, v) in x_basis().iter().enumerate() {
            let mut r = out.contract(0, v);
            while r.len() > 2 {
                r = r.contract(0, &ket0());
            }
            r.apply(0, &corr[line_index(&rec)][m]);
            f += bell.inner(&r).norm_sqr();
        }
    }
    Ok(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrySettings {
    pub n_nodes: usize,
    pub loss_probability: f64,
    pub delta_p: f64,
    pub runs: usize,
    pub seed: u64,
    #[serde(default = "default_max_trials")]
    pub max_trials: usize,
}

fn default_max_trials() -> usize {
    100_000
}

#[derive(Debug, Clone, Serialize)]
pub struct RetryReport {
    pub runs: usize,
    pub expected_trials: f64,
    pub mean_trials: f64,
    pub sem_trials: f64,
    /// `histogram[k]` counts runs needing `k + 1` trials.
    pub histogram: Vec<usize>,
    pub min_fidelity: f64,
    pub mean_fidelity: f64,
    pub trials: Vec<usize>,
}

/// One heralded transfer with a backup qubit `b`. Returns the number of
/// trials and the final branch.
pub fn heralded_transfer(
    input: [C64; 2],
    settings: &RetrySettings,
    run: u64,
    params: &ProtocolParams,
) -> Result<(usize, ProtocolOutcome)> {
    let psi = check_input(input)?;
    let pd = settings.loss_probability;
    if !(0.0..1.0).contains(&pd) {
        return Err(QnetError::InvalidParameter("loss probability must lie in [0, 1)".into()));
    }
    let n = settings.n_nodes;
    let net = qst_network(n, params)?;
    let corr = qst_corrections(&net, n, params.backend)?;
    let mut names = labels(n);
    names.push("b".into());
    let (q1, qn, b) = (0, n - 1, n);
    let x = pauli_matrix(Pauli::X);
    let h = qubit_hadamard();
    // (|0⟩ σ_x|ψ⟩ + |1⟩ |ψ⟩)/√2 on (q1, b)
    let mut states = vec![ket0(); n + 1];
    states[q1] = ket_plus();
    states[qn] = ket_plus();
    states[b] = x * psi;
    let mut reg = Register::product(&names, &states)?;
    reg.cnot(q1, b);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    rng.set_stream(run);
    let mut out = ProtocolOutcome::with_rng(reg, rng);
    for trial in 1..=settings.max_trials {
        out = out.photon(&net, settings.delta_p, params.backend, DOWN)?;
        let lost = out.rng.as_mut().expect("sampling").gen_bool(pd);
        if lost {
            out = out.map(|br| {
                br.photons.pop();
                br.measurements.push(Measurement { name: "photon_lost".into(), outcome: trial as i32 });
                Ok(())
            })?;
            out = out.measure(q1, [ket0(), ket1()], "q1_z", [0, 1])?;
            out = out.measure(qn, [ket0(), ket1()], "qN_reset", [0, 1])?;
            out = out.map(|br| {
                if br.outcome("qN_reset") == Some(1) {
                    br.register.apply(qn, &x);
                }
                br.register.apply(qn, &h);
                if br.outcome("q1_z") == Some(1) {
                    br.register.apply(b, &x);
                    br.register.apply(q1, &x);
                }
                br.register.apply(q1, &h);
                br.register.cnot(q1, b);
                Ok(())
            })?;
            continue;
        }
        out = out.measure(q1, x_basis(), "q1_x", [1, -1])?.map(|br| {
            let rec = *br.photons.last().expect("photon");
            if rec.direction == Direction::Right {
                let m = usize::from(br.outcome("q1_x") == Some(-1));
                let u = corr[line_index(&rec)][m];
                br.correct(qn, &u, &gate_name(&u));
            }
            Ok(())
        })?;
        out = out.measure(b, [ket0(), ket1()], "b_z", [0, 1])?.map(|br| {
            if br.outcome("b_z") == Some(0) {
                br.correct(qn, &x, "X");
            }
            Ok(())
        })?;
        let out = out.set_fidelity(|br| br.register.qubit_fidelity(qn, &psi));
        return Ok((trial, out));
    }
    Err(QnetError::Convergence(format!("photon not detected within {} trials", settings.max_trials)))
}

/// Monte-Carlo statistics of [`heralded_transfer`]; run `k` uses stream `k`
/// of the seeded generator, so results do not depend on thread count.
pub fn run_heralded_retry(input: [C64; 2], settings: &RetrySettings, params: &ProtocolParams) -> Result<RetryReport> {
    if settings.runs == 0 {
        return Err(QnetError::InvalidParameter("runs must be > 0".into()));
    }
    let results: Vec<(usize, f64)> = (0..settings.runs as u64)
        .into_par_iter()
        .map(|k| heralded_transfer(input, settings, k, params).map(|(t, o)| (t, o.fidelity.unwrap_or(0.0))))
        .collect::<Result<_>>()?;
    let n = results.len() as f64;
    let trials: Vec<usize> = results.iter().map(|r| r.0).collect();
    let mean = trials.iter().map(|&t| t as f64).sum::<f64>() / n;
    let var = trials.iter().map(|&t| (t as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let mut histogram = vec![0; trials.iter().copied().max().unwrap_or(1)];
    for &t in &trials {
        histogram[t - 1] += 1;
    }
    Ok(RetryReport {
        runs: settings.runs,
        expected_trials: 1.0 / (1.0 - settings.loss_probability),
        mean_trials: mean,
        sem_trials: (var / n).sqrt(),
        histogram,
        min_fidelity: results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min),
        mean_fidelity: results.iter().map(|r| r.1).sum::<f64>() / n,
        trials,
    })
}

// ------------------------------------------------------------------ parity

/// Interferometer over `n_qubits` nodes with the nodes in `subset` resonant.
pub fn parity_network(n_qubits: usize, subset: &[usize], params: &ProtocolParams) -> Result<PhotonNetwork> {
    check_qubits(n_qubits, 1)?;
    for &q in subset {
        if q >= n_qubits {
            return Err(QnetError::InvalidParameter(format!("qubit {q} outside register of {n_qubits}")));
        }
    }
    let qubits: Vec<usize> = (0..n_qubits).collect();
    let active: Vec<bool> = qubits.iter().map(|q| subset.contains(q)).collect();
    PhotonNetwork::interferometer(&qubits, &active, params)
}

fn z_string(subset: &[usize]) -> Vec<(usize, Pauli)> {
    subset.iter().map(|&q| (q, Pauli::Z)).collect()
}

/// One photon through `net` with every qubit in `|+⟩`.
pub fn parity_measurement(net: &PhotonNetwork, n_qubits: usize, delta_p: f64, backend: Backend) -> Result<ProtocolOutcome> {
    let reg = Register::plus(&labels(n_qubits))?;
    ProtocolOutcome::start(reg, BranchMode::Enumerate).photon(net, delta_p, backend, DOWN)
}

/// `F_Z = Σ_j |⟨Ψ_j^ideal|Ψ_j⟩|²` over right-moving outputs, with
/// `Ψ_up^ideal ∝ (𝟙 + P̂)|Ψ_+⟩` and `Ψ_down^ideal ∝ (𝟙 − P̂)|Ψ_+⟩`.
pub fn parity_fidelity(net: &PhotonNetwork, n_qubits: usize, subset: &[usize], delta_p: f64, backend: Backend) -> Result<f64> {
    let plus = Register::plus(&labels(n_qubits))?;
    let p = z_string(subset);
    let ideal = [plus.project_pauli(&p, -1.0), plus.project_pauli(&p, 1.0)];
    let res = net.scattering(delta_p, backend)?;
    let mut f = 0.0;
    for (rec, out) in scatter_register(&plus, net, res.as_ref(), DOWN) {
        if rec.direction != Direction::Right {
            continue;
        }
        let id = &ideal[line_index(&rec)];
        if id.norm_sqr() > 1e-12 {
            f += id.inner(&out).norm_sqr() / id.norm_sqr();
        }
    }
    Ok(f)
}

// ------------------------------------------------------------ graph states

/// `(|+…+⟩ + |−…−⟩)/√2`.
pub fn ghz_target(n: usize) -> Result<Register> {
    let names = labels(n);
    let a = Register::product(&names, &vec![ket_plus(); n])?;
    let b = Register::product(&names, &vec![ket_minus(); n])?;
    Register::new(names, (a.amplitudes() + b.amplitudes()) * cr(std::f64::consts::FRAC_1_SQRT_2))
}

/// `∏ CZ_{m,m+1} |+⟩^{⊗N}`.
pub fn cluster_target(n: usize) -> Result<Register> {
    let mut r = Register::plus(&labels(n))?;
    for m in 0..n.saturating_sub(1) {
        r.cz(m, m + 1);
    }
    Ok(r)
}

/// All nodes resonant in a Hadamard interferometer; `σ_x` on qubit 1 when the
/// photon leaves on `down`.
pub fn prepare_ghz(n_qubits: usize, delta_p: f64, params: &ProtocolParams) -> Result<ProtocolOutcome> {
    check_qubits(n_qubits, 2)?;
    let qubits: Vec<usize> = (0..n_qubits).collect();
    let net = PhotonNetwork::interferometer(&qubits, &vec![true; n_qubits], params)?;
    let target = ghz_target(n_qubits)?;
    let x = pauli_matrix(Pauli::X);
    let out = ProtocolOutcome::start(Register::plus(&labels(n_qubits))?, BranchMode::Enumerate)
        .photon(&net, delta_p, params.backend, DOWN)?
        .map(|b| {
            let rec = b.photons[0];
            if rec.direction == Direction::Right && rec.line == Line::Down {
                b.correct(0, &x, "X");
            }
            Ok(())
        })?;
    Ok(out.set_fidelity(|b| b.register.fidelity(&target)))
}

/// Hadamard between every pair of nodes. The photon line selects the
/// correction: `Z·H` on every qubit for `down`, and `H` alone on qubit N for
/// `up`.
pub fn prepare_cluster_1d(n_qubits: usize, delta_p: f64, params: &ProtocolParams) -> Result<ProtocolOutcome> {
    check_qubits(n_qubits, 2)?;
    let qubits: Vec<usize> = (0..n_qubits).collect();
    let us = vec![hadamard(); n_qubits + 1];
    let net = PhotonNetwork::build(&qubits, &vec![true; n_qubits], &us, params)?;
    let target = cluster_target(n_qubits)?;
    let h = qubit_hadamard();
    let zh = pauli_matrix(Pauli::Z) * h;
    let out = ProtocolOutcome::start(Register::plus(&labels(n_qubits))?, BranchMode::Enumerate)
        .photon(&net, delta_p, params.backend, DOWN)?
        .map(|b| {
            let rec = b.photons[0];
            if rec.direction != Direction::Right {
                return Ok(());
            }
            for k in 0..n_qubits {
                if rec.line == Line::Up && k == n_qubits - 1 {
                    b.correct(k, &h, "H");
                } else {
                    b.correct(k, &zh, "ZH");
                }
            }
            Ok(())
        })?;
    Ok(out.set_fidelity(|b| b.register.fidelity(&target)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::I;

    fn p() -> ProtocolParams {
        ProtocolParams::default()
    }

    #[test]
    fn detector_closed_forms() {
        for d in [0.0, 0.1, 0.37, -0.8, 1.0] {
            let r = photon_detector(d, 1.0).unwrap();
            let den = cr(1.0) - I * (2.0 * d) - cr(2.0 * d * d);
            assert!((r.click_factor - cr(-1.0) / den).norm() < 1e-12);
            assert!((r.no_click_factor - I * (2.0 * d * d) / den).norm() < 1e-12);
            assert!((r.p_det - 1.0 / (1.0 + 4.0 * d.powi(4))).abs() < 1e-12);
            assert!((r.p_det + r.p_no_click - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn qst_closed_form_values() {
        assert_eq!(qst_fidelity_closed_form(0.0, 1.0), 1.0);
        assert!((qst_fidelity_closed_form(0.1, 1.0) - 0.977_537_853_311_294_5).abs() < 1e-12);
    }

    #[test]
    fn qst_simulation_matches_closed_form() {
        for n in [2, 3] {
            for d in [0.0, 0.02, 0.05, 0.1, -0.07] {
                let f = qst_entanglement_fidelity(n, d, &p()).unwrap();
                assert!((f - qst_fidelity_closed_form(d, 1.0)).abs() < 1e-6, "n={n} d={d} f={f}");
            }
        }
    }

    #[test]
    fn state_transfer_is_exact_on_resonance() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for input in [[cr(1.0), cr(0.0)], [cr(h), cr(h)], [cr(0.6), I * 0.8]] {
            let out = run_state_transfer(2, input, 0.0, &p()).unwrap();
            assert!((out.total_probability() - 1.0).abs() < 1e-10);
            assert_eq!(out.branches.len(), 4);
            assert!((out.fidelity.unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn transfer_circuit_is_controlled_z() {
        // the photon-conditioned (q1, qN) map equals H S_N H S_1 H with σ_z
        // arms, a controlled-Z up to local phases
        let net = qst_network(2, &p()).unwrap();
        let res = net.scattering(0.0, Backend::Ideal).unwrap().unwrap();
        let mut cz = Matrix2::<C64>::zeros();
        let h = hadamard();
        for a in 0..2 {
            for c in 0..2 {
                let z = |b: usize| if b == 0 { cr(1.0) } else { cr(-1.0) };
                let s1 = Matrix2::new(cr(1.0), cr(0.0), cr(0.0), z(a));
                let sn = Matrix2::new(cr(1.0), cr(0.0), cr(0.0), z(c));
                let m = h * sn * h * s1 * h;
                cz[(a, c)] = m[(UP, DOWN)];
                let s = (a << 1) | c;
                assert!((res.amplitude(RIGHT, UP, DOWN, s) - m[(UP, DOWN)]).norm() < 1e-12);
            }
        }
        let ratio = cz[(0, 0)] * cz[(1, 1)] / (cz[(0, 1)] * cz[(1, 0)]);
        assert!((ratio + 1.0).norm() < 1e-12);
    }

    #[test]
    fn parity_is_exact_on_resonance() {
        for subset in [vec![0, 1], vec![0, 2, 3], vec![1], vec![0, 1, 2, 3]] {
            let net = parity_network(4, &subset, &p()).unwrap();
            let f = parity_fidelity(&net, 4, &subset, 0.0, Backend::Ideal).unwrap();
            assert!((f - 1.0).abs() < 1e-12, "{subset:?} {f}");
            let out = parity_measurement(&net, 4, 0.0, Backend::Ideal).unwrap();
            let probs = out.probabilities();
            assert_eq!(probs.len(), 2);
            assert!(probs.iter().all(|&q| (q - 0.5).abs() < 1e-12));
        }
    }

    #[test]
    fn pruned_idle_nodes_agree() {
        let subset = [0, 2];
        let a = parity_network(4, &subset, &p()).unwrap();
        let b = parity_network(4, &subset, &ProtocolParams { prune_far: true, ..p() }).unwrap();
        assert_eq!(b.len(), 2);
        for d in [0.0, 0.05, 0.2] {
            let fa = parity_fidelity(&a, 4, &subset, d, Backend::Ideal).unwrap();
            let fb = parity_fidelity(&b, 4, &subset, d, Backend::Ideal).unwrap();
            assert!((fa - fb).abs() < 1e-5);
        }
    }

    #[test]
    fn empty_subset_is_deterministic() {
        let net = parity_network(3, &[], &ProtocolParams { prune_far: true, ..p() }).unwrap();
        assert!(net.spec.is_none());
        assert!((parity_fidelity(&net, 3, &[], 0.0, Backend::Ideal).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ghz_and_cluster_on_resonance() {
        for n in [2, 3, 4, 5] {
            let g = prepare_ghz(n, 0.0, &p()).unwrap();
            assert!((g.fidelity.unwrap() - 1.0).abs() < 1e-12);
            let c = prepare_cluster_1d(n, 0.0, &p()).unwrap();
            assert!((c.fidelity.unwrap() - 1.0).abs() < 1e-12);
            for b in &c.branches {
                assert!((b.register.fidelity(&cluster_target(n).unwrap()) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ghz_backends_agree_off_resonance() {
        let a = prepare_ghz(4, 0.05, &p()).unwrap().fidelity.unwrap();
        let b = prepare_ghz(4, 0.05, &ProtocolParams { backend: Backend::General, ..p() }).unwrap().fidelity.unwrap();
        assert!(a < 1.0 - 1e-4);
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn heralded_retry_survives_losses() {
        let s = RetrySettings { n_nodes: 2, loss_probability: 0.9, delta_p: 0.0, runs: 50, seed: 7, max_trials: 10_000 };
        let input = [cr(0.6), I * 0.8];
        let r = run_heralded_retry(input, &s, &p()).unwrap();
        assert!(r.min_fidelity > 1.0 - 1e-9);
        assert!(r.mean_trials > 3.0);
        let s0 = RetrySettings { loss_probability: 0.0, ..s };
        let r0 = run_heralded_retry(input, &s0, &p()).unwrap();
        assert!(r0.trials.iter().all(|&t| t == 1));
    }

    #[test]
    fn reversed_network_measures_the_same_parity() {
        let reg = Register::plus(&labels(3)).unwrap();
        let ops = [(0, Pauli::Z), (2, Pauli::X)];
        for rev in [false, true] {
            let out = ProtocolOutcome::start(reg.clone(), BranchMode::Enumerate)
                .measure_pauli_product(&ops, "p", 0.0, &p(), rev)
                .unwrap();
            for b in &out.branches {
                let s = b.outcome("p").unwrap() as f64;
                assert!((b.register.expectation(&ops) - s).abs() < 1e-12);
            }
        }
    }
}
