//! Driven-dissipative evolution: Lindblad generators, trajectories, steady
//! states and the cascaded two-level reduction.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{QnetError, Result};
use crate::gue::{GueOperators, GueParams};
use crate::ode::{Integrator, Tolerances};
use crate::qops::{cr, phase, trace_product, truncated_boson, DensityMatrix, HilbertSpace, Operator, SparseMatrix, StateVector, I};
use crate::slh::compose_chain;

/// Coherent drive entering through `L̂_R`: `−iαL̂_R† + iα*L̂_R`, with `Ω = √γ_r α`.
#[derive(Debug, Clone, PartialEq)]
pub enum DriveSpec {
    None,
    Constant(C64),
    /// Piecewise-linear `α(t)`, zero outside the table.
    Sampled { times: Vec<f64>, alpha: Vec<C64> },
}

impl DriveSpec {
    pub fn rabi(omega_rabi: f64, gamma_r: f64) -> Result<Self> {
        if !omega_rabi.is_finite() || !(gamma_r > 0.0) {
            return Err(QnetError::InvalidParameter("drive needs finite Ω and γ_r > 0".into()));
        }
        Ok(Self::Constant(cr(omega_rabi / gamma_r.sqrt())))
    }

    pub fn sampled(times: Vec<f64>, alpha: Vec<C64>) -> Result<Self> {
        if times.len() != alpha.len() || times.len() < 2 {
            return Err(QnetError::InvalidParameter("sampled drive needs matching tables of length >= 2".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(QnetError::InvalidParameter("drive times must increase".into()));
        }
        if alpha.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(QnetError::InvalidParameter("drive amplitude not finite".into()));
        }
        Ok(Self::Sampled { times, alpha })
    }

    pub fn alpha(&self, t: f64) -> C64 {
        match self {
            Self::None => cr(0.0),
            Self::Constant(a) => *a,
            Self::Sampled { times, alpha } => {
                if t < times[0] || t > times[times.len() - 1] {
                    return cr(0.0);
                }
                let k = times.partition_point(|&x| x <= t).clamp(1, times.len() - 1);
                let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
                alpha[k - 1] * (1.0 - w) + alpha[k] * w
            }
        }
    }

    pub fn is_static(&self) -> bool {
        !matches!(self, Self::Sampled { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseSpec {
    pub gamma_phi: f64,
    pub gamma_nr: f64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_phi >= 0.0 && self.gamma_nr >= 0.0) {
            return Err(QnetError::InvalidParameter("noise rates must be >= 0".into()));
        }
        Ok(())
    }

    /// `√(2γ_φ) n̂` and `√γ_nr â` for each mode operator `â`.
    pub fn jump_operators(&self, modes: &[Operator]) -> Result<Vec<Operator>> {
        self.validate()?;
        let mut out = Vec::new();
        for a in modes {
            if self.gamma_phi > 0.0 {
                out.push(&(&a.dag() * a) * (2.0 * self.gamma_phi).sqrt());
            }
            if self.gamma_nr > 0.0 {
                out.push(a * self.gamma_nr.sqrt());
            }
        }
        Ok(out)
    }
}

/// `dρ/dt = Kρ + ρK† + Σ LρL†` with `K = −iĤ − ½ΣL†L` plus drive, applied
/// matrix-free on row-major density matrices.
#[derive(Debug, Clone)]
pub struct Generator {
    space: Arc<HilbertSpace>,
    k: SparseMatrix,
    jumps: Vec<SparseMatrix>,
    /// Sum of `l_i conj(l_j)` over diagonal jump operators.
    diag_weight: Option<Vec<C64>>,
    lr: Option<(SparseMatrix, SparseMatrix)>,
    drive: DriveSpec,
    rate: f64,
}

const SPARSE_TOL: f64 = 1e-14;

impl Generator {
    /// Lindblad generator of `Ĥ` with jump operators `jumps` and a drive through `lr`.
    pub fn new(h: &Operator, jumps: &[Operator], drive: DriveSpec, lr: Option<&Operator>) -> Result<Self> {
        let mut k = h.matrix() * (-I);
        for l in jumps {
            check_space(h, l)?;
            k -= l.matrix().adjoint() * l.matrix() * cr(0.5);
        }
        Self::from_parts(h.space().clone(), k, jumps, drive, lr)
    }

    /// Cascaded form: `K = −iĤ_nh` given directly, with recycled jumps.
    pub fn non_hermitian(h_nh: &Operator, jumps: &[Operator], drive: DriveSpec, lr: Option<&Operator>) -> Result<Self> {
        for l in jumps {
            check_space(h_nh, l)?;
        }
        Self::from_parts(h_nh.space().clone(), h_nh.matrix() * (-I), jumps, drive, lr)
    }

    fn from_parts(
        space: Arc<HilbertSpace>,
        k: DMatrix<C64>,
        jumps: &[Operator],
        drive: DriveSpec,
        lr: Option<&Operator>,
    ) -> Result<Self> {
        let d = space.dim();
        if !matches!(drive, DriveSpec::None) && lr.is_none() {
            return Err(QnetError::InvalidParameter("a drive needs the coupling operator L_R".into()));
        }
        let lr = match lr {
            Some(op) => {
                if op.dim() != d {
                    return Err(QnetError::DimMismatch { expected: d, found: op.dim() });
                }
                Some((SparseMatrix::from_dense(&op.matrix().adjoint(), SPARSE_TOL), SparseMatrix::from_dense(op.matrix(), SPARSE_TOL)))
            }
            None => None,
        };
        let mut sparse = Vec::new();
        let mut diag: Option<Vec<C64>> = None;
        for l in jumps {
            let s = SparseMatrix::from_dense(l.matrix(), SPARSE_TOL);
            if s.nnz() == 0 {
                continue;
            }
            if s.is_diagonal() {
                let v = s.diagonal();
                let w = diag.get_or_insert_with(|| vec![cr(0.0); d * d]);
                for i in 0..d {
                    for j in 0..d {
                        w[i * d + j] += v[i] * v[j].conj();
                    }
                }
            } else {
                sparse.push(s);
            }
        }
        let rate = 2.0 * (0..d).map(|i| k[(i, i)].re.abs()).fold(0.0, f64::max);
        Ok(Self { space, k: SparseMatrix::from_dense(&k, SPARSE_TOL), jumps: sparse, diag_weight: diag, lr, drive, rate })
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Largest single-site decay rate, used to scale horizons and residuals.
    pub fn rate_scale(&self) -> f64 {
        self.rate
    }

    fn k_apply(&self, t: f64, x: &[C64], out: &mut [C64]) {
        self.k.left_mul_acc(x, cr(1.0), out);
        let a = self.drive.alpha(t);
        if a != cr(0.0) {
            let (lrd, lr) = self.lr.as_ref().expect("drive without L_R");
            lrd.left_mul_acc(x, -a, out);
            lr.left_mul_acc(x, a.conj(), out);
        }
    }

    fn k_apply_right_dag(&self, t: f64, x: &[C64], out: &mut [C64]) {
        self.k.right_mul_dag_acc(x, cr(1.0), out);
        let a = self.drive.alpha(t);
        if a != cr(0.0) {
            let (lrd, lr) = self.lr.as_ref().expect("drive without L_R");
            lrd.right_mul_dag_acc(x, -a.conj(), out);
            lr.right_mul_dag_acc(x, a, out);
        }
    }

    fn jumps_apply(&self, x: &[C64], scratch: &mut [C64], out: &mut [C64]) {
        for l in &self.jumps {
            l.sandwich_acc(x, cr(1.0), scratch, out);
        }
        if let Some(w) = &self.diag_weight {
            for ((o, xi), wi) in out.iter_mut().zip(x).zip(w) {
                *o += xi * wi;
            }
        }
    }

    /// General action on any row-major matrix.
    pub fn apply_raw(&self, t: f64, x: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|v| *v = cr(0.0));
        let mut scratch = vec![cr(0.0); x.len()];
        self.k_apply(t, x, out);
        self.k_apply_right_dag(t, x, out);
        self.jumps_apply(x, &mut scratch, out);
    }

    /// Action on a Hermitian row-major matrix, using `ρK† = (Kρ)†`.
    fn apply_hermitian(&self, t: f64, x: &[C64], out: &mut [C64], scratch: &mut [C64]) {
        let d = self.dim();
        scratch.iter_mut().for_each(|v| *v = cr(0.0));
        self.k_apply(t, x, scratch);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = scratch[i * d + j] + scratch[j * d + i].conj();
            }
        }
        self.jumps_apply(x, scratch, out);
    }

    pub fn apply(&self, t: f64, rho: &DensityMatrix) -> Result<DMatrix<C64>> {
        if rho.space().dim() != self.dim() {
            return Err(QnetError::DimMismatch { expected: self.dim(), found: rho.space().dim() });
        }
        let x = to_row_major(rho.matrix());
        let mut out = vec![cr(0.0); x.len()];
        self.apply_raw(t, &x, &mut out);
        Ok(from_row_major(&out, self.dim()))
    }

    /// Dense superoperator on row-major vectorized matrices.
    pub fn superoperator(&self, t: f64) -> DMatrix<C64> {
        let d = self.dim();
        let n = d * d;
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![cr(0.0); n];
        let mut col = vec![cr(0.0); n];
        for c in 0..n {
            e[c] = cr(1.0);
            self.apply_raw(t, &e, &mut col);
            m.column_mut(c).copy_from_slice(&col);
            e[c] = cr(0.0);
        }
        m
    }

    /// Adaptive integration sampled on `t_grid`, recording `⟨O⟩` and purity.
    pub fn evolve(&self, rho0: &DensityMatrix, t_grid: &[f64], observables: &[Operator]) -> Result<Trajectory> {
        let d = self.dim();
        if rho0.space().dim() != d {
            return Err(QnetError::DimMismatch { expected: d, found: rho0.space().dim() });
        }
        if t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(QnetError::InvalidParameter("time grid must increase".into()));
        }
        for o in observables {
            if o.dim() != d {
                return Err(QnetError::DimMismatch { expected: d, found: o.dim() });
            }
        }
        let tol = Tolerances { rtol: 1e-8, atol: 1e-10, ..Tolerances::default() };
        let mut scratch = vec![cr(0.0); d * d];
        let rhs = |t: f64, y: &[C64], dy: &mut [C64]| self.apply_hermitian(t, y, dy, &mut scratch);
        let mut integ = Integrator::new(d * d, rhs, tol);
        let mut y = to_row_major(rho0.matrix());
        let tr0 = rho0.trace();
        let mut traj = Trajectory { times: Vec::new(), values: Vec::new(), purity: Vec::new(), trace_drift: 0.0, final_state: rho0.clone() };
        let mut t = t_grid.first().copied().unwrap_or(0.0);
        for &tg in t_grid {
            integ.integrate(t, tg, &mut y)?;
            t = tg;
            let m = from_row_major(&y, d);
            let drift = (m.trace() - tr0).norm();
            traj.trace_drift = traj.trace_drift.max(drift);
            let herm = crate::qops::max_abs(&(&m - m.adjoint()));
            if drift > 1e-6 || herm > 1e-6 {
                return Err(QnetError::Convergence(format!(
                    "trace drift {drift:.2e}, hermiticity defect {herm:.2e} at t = {tg:e}"
                )));
            }
            traj.times.push(tg);
            traj.values.push(observables.iter().map(|o| trace_product(o.matrix(), &m)).collect());
            traj.purity.push(trace_product(&m, &m).re);
        }
        traj.final_state = DensityMatrix::new(self.space.clone(), from_row_major(&y, d))?;
        Ok(traj)
    }

    fn residual(&self, rho: &DensityMatrix) -> f64 {
        let x = to_row_major(rho.matrix());
        let mut out = vec![cr(0.0); x.len()];
        self.apply_raw(0.0, &x, &mut out);
        out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Unique stationary state. Direct solve for `dim ≤ 32`, long-time
    /// integration from the ground state otherwise.
    pub fn steady_state(&self) -> Result<DensityMatrix> {
        if !self.drive.is_static() {
            return Err(QnetError::Precondition("steady state needs a time-independent drive".into()));
        }
        let d = self.dim();
        let tol = 1e-9 * self.rate.max(f64::MIN_POSITIVE);
        if d <= DIRECT_MAX_DIM {
            return self.steady_state_direct(tol);
        }
        let mut rho = StateVector::basis(&self.space, 0).projector();
        let mut horizon = 200.0 / self.rate;
        let mut elapsed = 0.0;
        while horizon <= 1600.0 / self.rate * (1.0 + 1e-12) {
            let traj = self.evolve(&rho, &[elapsed, horizon], &[])?;
            rho = traj.final_state;
            elapsed = horizon;
            let r = self.residual(&rho);
            if r <= tol {
                return Ok(rho);
            }
            horizon *= 2.0;
        }
        Err(QnetError::Convergence(format!(
            "steady-state residual {:.2e} above {tol:.2e} after 1600/γ",
            self.residual(&rho)
        )))
    }

    fn steady_state_direct(&self, tol: f64) -> Result<DensityMatrix> {
        let d = self.dim();
        let n = d * d;
        let mut m = self.superoperator(0.0);
        let full = m.clone();
        for c in 0..n {
            m[(0, c)] = if c % (d + 1) == 0 { cr(1.0) } else { cr(0.0) };
        }
        let mut b = DVector::zeros(n);
        b[0] = cr(1.0);
        let lu = m.lu();
        let u_diag: Vec<f64> = (0..n).map(|i| lu.u()[(i, i)].norm()).collect();
        let umax = u_diag.iter().cloned().fold(0.0, f64::max);
        let umin = u_diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let x = lu.solve(&b);
        let ok = umin > 1e-11 * umax && x.is_some();
        if !ok {
            let sv = full.singular_values();
            let smax = sv.max();
            let nullity = sv.iter().filter(|s| **s <= 1e-10 * smax).count();
            return Err(QnetError::Multiplicity(nullity.max(2)));
        }
        let x = x.expect("checked");
        let rho = from_row_major(x.as_slice(), d);
        let rho = (&rho + rho.adjoint()) * cr(0.5);
        let rho = DensityMatrix::new(self.space.clone(), rho)?;
        let r = self.residual(&rho);
        if r > tol.max(1e-12) {
            return Err(QnetError::Convergence(format!("steady-state residual {r:.2e} above {tol:.2e}")));
        }
        Ok(rho)
    }
}

/// Largest Hilbert dimension solved by dense null-space elimination.
pub const DIRECT_MAX_DIM: usize = 32;

fn check_space(a: &Operator, b: &Operator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(QnetError::DimMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(())
}

pub fn to_row_major(m: &DMatrix<C64>) -> Vec<C64> {
    m.transpose().as_slice().to_vec()
}

pub fn from_row_major(x: &[C64], d: usize) -> DMatrix<C64> {
    DMatrix::from_row_slice(d, d, x)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `values[k][o]`: observable `o` at `times[k]`.
    pub values: Vec<Vec<C64>>,
    pub purity: Vec<f64>,
    pub trace_drift: f64,
    pub final_state: DensityMatrix,
}

/// `dρ/dt` of the emitter master equation with noise on each mode.
#[allow(clippy::too_many_arguments)]
pub fn liouvillian_apply(
    h_eff: &Operator,
    jump_ops: &[Operator],
    drive: &DriveSpec,
    noise: &NoiseSpec,
    modes: &[Operator],
    rho: &DensityMatrix,
    lr: &Operator,
    t: f64,
) -> Result<DMatrix<C64>> {
    let mut jumps = jump_ops.to_vec();
    jumps.extend(noise.jump_operators(modes)?);
    Generator::new(h_eff, &jumps, drive.clone(), Some(lr))?.apply(t, rho)
}

/// Driven single emitter with `{L̂_R, L̂_L}` and transmon noise.
pub fn gue_generator(ops: &GueOperators, omega_rabi: f64, gamma_r: f64, noise: &NoiseSpec) -> Result<Generator> {
    let mut jumps = vec![ops.lr.clone(), ops.ll.clone()];
    jumps.extend(noise.jump_operators(&[ops.a1.clone(), ops.a2.clone()])?);
    Generator::new(&ops.h, &jumps, DriveSpec::rabi(omega_rabi, gamma_r)?, Some(&ops.lr))
}

/// Chain of emitters driven from the left through the total right coupling.
#[derive(Debug, Clone)]
pub struct ChainModel {
    pub generator: Generator,
    pub emitters: Vec<GueOperators>,
    pub lr: Operator,
    pub ll: Operator,
    pub h: Operator,
}

impl ChainModel {
    /// `|R⟩_n = L̂_R^n†|G⟩/√γ_r` with the chain's propagation phase folded in,
    /// so that the total `L̂_R` maps it to `√γ_r|G⟩`.
    pub fn right_excitation(&self, n: usize, phi_tilde: f64, gamma_r: f64) -> Result<Operator> {
        let nn = self.emitters.len() as f64;
        let w = phase(phi_tilde * (nn - n as f64 - 0.5));
        let op = self.emitters[n].lr.extend_to(self.h.space())?;
        Ok(&op.dag() * (w.conj() / gamma_r.sqrt()))
    }

    /// Dimer `|D⟩` between emitters `m` and `m+1` (from 0), others in `|G⟩`.
    pub fn dimer(&self, pairs: &[usize], omega_rabi: f64, gamma_r: f64, phi_tilde: f64) -> Result<StateVector> {
        let c = -2.0 * 2f64.sqrt() * omega_rabi / gamma_r;
        let ground = StateVector::basis(self.h.space(), 0);
        let id = Operator::identity(self.h.space());
        let mut op = id.clone();
        for &m in pairs {
            let s = &(&self.right_excitation(m, phi_tilde, gamma_r)? - &self.right_excitation(m + 1, phi_tilde, gamma_r)?) * (c / 2f64.sqrt());
            op = &op * &(&id + &s);
        }
        ground.apply(&op)?.normalized()
    }
}

/// Cascaded chain of emitters built by SLH composition.
pub fn gue_chain(gues: &[GueParams], phi_tilde: f64, omega_rabi: f64, gamma_r: f64, noise: &NoiseSpec, hard_core: bool) -> Result<ChainModel> {
    let emitters: Vec<GueOperators> = gues
        .iter()
        .enumerate()
        .map(|(n, p)| {
            let label = format!("g{}", n + 1);
            if hard_core {
                GueOperators::hard_core(p, &label)
            } else {
                GueOperators::fock(p, &label)
            }
        })
        .collect::<Result<_>>()?;
    let t = compose_chain(&emitters, phi_tilde)?;
    let space = t.space().clone();
    let (lr, ll, h) = (t.couplings()[0].clone(), t.couplings()[1].clone(), t.hamiltonian().clone());
    let mut modes = Vec::new();
    for e in &emitters {
        modes.push(e.a1.extend_to(&space)?);
        modes.push(e.a2.extend_to(&space)?);
    }
    let mut jumps = vec![lr.clone(), ll.clone()];
    jumps.extend(noise.jump_operators(&modes)?);
    let generator = Generator::new(&h, &jumps, DriveSpec::rabi(omega_rabi, gamma_r)?, Some(&lr))?;
    Ok(ChainModel { generator, emitters, lr, ll, h })
}

/// Reduced chain of two-level emitters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelChain {
    pub n_emitters: usize,
    pub omega_rabi: f64,
    pub delta: f64,
    pub gamma_r: f64,
    pub phi_tilde: f64,
}

/// Largest two-level chain handled with dense `2^N` matrices.
pub const MAX_TWO_LEVEL: usize = 12;

/// `(Ĥ_nh, L̂_R)` on qubits `q1..qN` (basis `|G⟩ = 0`, `|R⟩ = 1`) with
/// `σ̂_+^n = e^{iφ̃n}|R⟩⟨G|`.
pub fn cascaded_two_level(chain: &TwoLevelChain) -> Result<(Operator, Operator)> {
    let n = chain.n_emitters;
    if n == 0 {
        return Err(QnetError::InvalidParameter("chain needs N >= 1".into()));
    }
    if n > MAX_TWO_LEVEL {
        return Err(QnetError::TooLarge(format!("N = {n} > {MAX_TWO_LEVEL}")));
    }
    if !(chain.gamma_r > 0.0) {
        return Err(QnetError::InvalidParameter("gamma_r must be > 0".into()));
    }
    let space = Arc::new(HilbertSpace::new((1..=n).map(|k| (format!("q{k}"), 2)).collect())?);
    let sm: Vec<Operator> = (1..=n)
        .map(|k| {
            let mut m = DMatrix::zeros(2, 2);
            m[(0, 1)] = phase(-chain.phi_tilde * k as f64);
            crate::qops::embed(&m, &space, &format!("q{k}"))
        })
        .collect::<Result<_>>()?;
    let mut h = Operator::zeros(&space);
    let mut lr = Operator::zeros(&space);
    for (k, s) in sm.iter().enumerate() {
        let sp = s.dag();
        let nk = &sp * s;
        h = &h + &(&nk * -chain.delta);
        h = &h + &(&nk * (-I * 0.5 * chain.gamma_r));
        h = &h + &(&(&sp - s) * (-I * chain.omega_rabi));
        for m in sm.iter().take(k) {
            h = &h + &(&(&sp * m) * (-I * chain.gamma_r));
        }
        lr = &lr + &(s * chain.gamma_r.sqrt());
    }
    Ok((h, lr))
}

pub fn cascaded_generator(chain: &TwoLevelChain) -> Result<Generator> {
    cascaded_generator_with_noise(chain, &NoiseSpec::default())
}

/// Cascaded chain with dephasing `√(2γ_φ)σ̂_+σ̂_−` and decay `√γ_nr σ̂_−` on each emitter.
pub fn cascaded_generator_with_noise(chain: &TwoLevelChain, noise: &NoiseSpec) -> Result<Generator> {
    let (mut h, lr) = cascaded_two_level(chain)?;
    let space = h.space().clone();
    let modes = (1..=chain.n_emitters)
        .map(|k| crate::qops::embed(&truncated_boson(2)?.into_matrix(), &space, &format!("q{k}")))
        .collect::<Result<Vec<_>>>()?;
    let mut jumps = vec![lr];
    for l in noise.jump_operators(&modes)? {
        h = &h + &(&(&l.dag() * &l) * (-I * 0.5));
        jumps.push(l);
    }
    Generator::non_hermitian(&h, &jumps, DriveSpec::None, None)
}

/// `|D⟩ ∝ |GG⟩ − 2√2(Ω/γ_r)|S⟩`, `|S⟩ = (|RG⟩ − |GR⟩)/√2`, emitter 1 upstream.
pub fn dimer_state(omega_rabi: f64, gamma_r: f64) -> Result<StateVector> {
    if !(gamma_r > 0.0) {
        return Err(QnetError::InvalidParameter("gamma_r must be > 0".into()));
    }
    let space = Arc::new(HilbertSpace::new(vec![("q1", 2), ("q2", 2)])?);
    let c = -2.0 * 2f64.sqrt() * omega_rabi / gamma_r / 2f64.sqrt();
    let amp = DVector::from_vec(vec![cr(1.0), cr(-c), cr(c), cr(0.0)]);
    StateVector::new(space, amp)?.normalized()
}

/// Product of dimers on qubits `(1,2), (3,4), …` for even `n`.
pub fn dimer_product(n: usize, omega_rabi: f64, gamma_r: f64) -> Result<StateVector> {
    if n == 0 || n % 2 == 1 {
        return Err(QnetError::InvalidParameter("dimer product needs even N".into()));
    }
    let d = dimer_state(omega_rabi, gamma_r)?;
    let mut out = d.amplitudes().clone();
    for _ in 1..n / 2 {
        out = out.kronecker(d.amplitudes());
    }
    let space = Arc::new(HilbertSpace::new((1..=n).map(|k| (format!("q{k}"), 2)).collect())?);
    StateVector::new(space, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::max_abs;

    fn two_level(omega: f64, gamma: f64) -> Generator {
        let space = Arc::new(HilbertSpace::single("q", 2).unwrap());
        let a = Operator::new(space.clone(), truncated_boson(2).unwrap().into_matrix()).unwrap();
        let l = &a * gamma.sqrt();
        Generator::new(&Operator::zeros(&space), &[l.clone()], DriveSpec::rabi(omega, gamma).unwrap(), Some(&l)).unwrap()
    }

    #[test]
    fn vacuum_is_stationary_without_drive() {
        let p = GueParams::optimal(0.2, 1.0, 0.0).unwrap();
        let o = GueOperators::fock(&p, "g").unwrap();
        let g = gue_generator(&o, 0.0, 1.77, &NoiseSpec { gamma_phi: 0.1, gamma_nr: 0.1 }).unwrap();
        let rho = o.ground().projector();
        assert!(max_abs(&g.apply(0.0, &rho).unwrap()) == 0.0);
    }

    #[test]
    fn generator_is_traceless_and_hermitian() {
        let p = GueParams::optimal(0.2, 1.0, 0.3).unwrap().with_nonlinearity(4.0, 2.0);
        let o = GueOperators::fock(&p, "g").unwrap();
        let g = gue_generator(&o, 0.7, 1.77, &NoiseSpec { gamma_phi: 0.05, gamma_nr: 0.02 }).unwrap();
        let psi = o.right_state().unwrap().add(&o.ground(), cr(0.6)).normalized().unwrap();
        let out = g.apply(0.0, &psi.projector()).unwrap();
        assert!(out.trace().norm() < 1e-12);
        assert!(max_abs(&(&out - out.adjoint())) < 1e-12);
    }

    #[test]
    fn resonance_fluorescence_steady_state() {
        for omega in [0.1, 0.4, 1.3] {
            let g = two_level(omega, 1.0);
            let rho = g.steady_state().unwrap();
            // Ω here is √γ α with H = −iα(σ+ − σ−)·√γ, i.e. Rabi frequency 2Ω
            let s = (2.0 * omega).powi(2);
            let want = s / 4.0 / (0.25 + s / 2.0);
            assert!((rho.matrix()[(1, 1)].re - want).abs() < 1e-10, "Ω={omega}");
        }
    }

    #[test]
    fn evolution_reaches_steady_state() {
        let g = two_level(0.3, 1.0);
        let rho0 = StateVector::basis(g.space(), 0).projector();
        let traj = g.evolve(&rho0, &[0.0, 10.0, 40.0], &[]).unwrap();
        let ss = g.steady_state().unwrap();
        assert!(max_abs(&(traj.final_state.matrix() - ss.matrix())) < 1e-7);
        assert!(traj.trace_drift < 1e-9);
    }

    #[test]
    fn complex_drive_matches_dense_lindblad() {
        let p = GueParams::optimal(0.1, 1.0, 0.2).unwrap().with_nonlinearity(3.0, 1.0);
        let o = GueOperators::fock(&p, "g").unwrap();
        let alpha = crate::qops::c(0.3, -0.4);
        let jumps = [o.lr.clone(), o.ll.clone()];
        let g = Generator::new(&o.h, &jumps, DriveSpec::Constant(alpha), Some(&o.lr)).unwrap();
        let h = &o.h + &(&(&(&o.lr.dag() * (-I * alpha)) + &(&o.lr * (I * alpha.conj()))) * 1.0);
        let psi = o.right_state().unwrap().add(&o.ground(), crate::qops::c(0.2, 0.5)).normalized().unwrap();
        let rho = psi.projector();
        let m = rho.matrix();
        let mut want = (h.matrix() * m - m * h.matrix()) * (-I);
        for l in &jumps {
            want += crate::qops::dissipator_apply(l, &rho).unwrap();
        }
        assert!(max_abs(&(g.apply(0.0, &rho).unwrap() - want)) < 1e-12);
    }

    #[test]
    fn zero_generator_keeps_state() {
        let space = Arc::new(HilbertSpace::single("q", 2).unwrap());
        let g = Generator::new(&Operator::zeros(&space), &[], DriveSpec::None, None).unwrap();
        let rho0 = DensityMatrix::maximally_mixed(&space);
        let traj = g.evolve(&rho0, &[0.0, 1.0, 2.0], &[]).unwrap();
        assert!(max_abs(&(traj.final_state.matrix() - rho0.matrix())) < 1e-15);
    }

    #[test]
    fn decoupled_generator_has_degenerate_steady_manifold() {
        let space = Arc::new(HilbertSpace::single("q", 2).unwrap());
        let g = Generator::new(&Operator::zeros(&space), &[], DriveSpec::None, None).unwrap();
        assert!(matches!(g.steady_state(), Err(QnetError::Multiplicity(n)) if n >= 2));
    }

    #[test]
    fn sampled_drive_interpolates() {
        let d = DriveSpec::sampled(vec![0.0, 1.0, 3.0], vec![cr(0.0), cr(2.0), cr(0.0)]).unwrap();
        assert_eq!(d.alpha(0.5), cr(1.0));
        assert_eq!(d.alpha(2.0), cr(1.0));
        assert_eq!(d.alpha(4.0), cr(0.0));
    }

    #[test]
    fn dimer_is_dark() {
        for omega in [0.0, 0.1, 0.3] {
            let chain = TwoLevelChain { n_emitters: 2, omega_rabi: omega, delta: 0.0, gamma_r: 1.0, phi_tilde: 0.0 };
            let g = cascaded_generator(&chain).unwrap();
            let d = dimer_state(omega, 1.0).unwrap();
            let out = g.apply(0.0, &d.projector()).unwrap();
            assert!(max_abs(&out) < 1e-12);
        }
    }

    #[test]
    fn dimer_reference_coefficient() {
        let d = dimer_state(1.0 / (2.0 * 2f64.sqrt()), 1.0).unwrap();
        let a = d.amplitudes();
        assert!((a[0] - cr(0.5f64.sqrt())).norm() < 1e-15);
        assert!((a[2] + cr(0.5)).norm() < 1e-15);
        assert!((a[1] - cr(0.5)).norm() < 1e-15);
    }

    #[test]
    fn cascaded_steady_state_is_dimer() {
        let chain = TwoLevelChain { n_emitters: 2, omega_rabi: 0.1, delta: 0.0, gamma_r: 1.0, phi_tilde: 0.0 };
        let rho = cascaded_generator(&chain).unwrap().steady_state().unwrap();
        let d = dimer_state(0.1, 1.0).unwrap();
        assert!(rho.fidelity_pure(&d) >= 1.0 - 1e-8);
        let undriven = TwoLevelChain { omega_rabi: 0.0, ..chain };
        let rho = cascaded_generator(&undriven).unwrap().steady_state().unwrap();
        assert!((rho.matrix()[(0, 0)].re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cascade_size_cap() {
        let chain = TwoLevelChain { n_emitters: 13, omega_rabi: 0.1, delta: 0.0, gamma_r: 1.0, phi_tilde: 0.0 };
        assert!(matches!(cascaded_two_level(&chain), Err(QnetError::TooLarge(_))));
    }
}
