//! Configuration-driven front end: JSON config in, CSV or JSON dataset out.
//!
//! Every command reads one JSON document selecting a `mode` (or `protocol`)
//! and its parameters. Unknown keys are rejected. Output tables have stable
//! column names; CSV files open with `# schema_version=…` comment lines and
//! JSON files carry a `schema_version` field.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use nalgebra::Matrix2;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::circuit::{self, CircuitParams, InterfaceParams, SweepSettings};
use crate::dynamics::{
    cascaded_generator_with_noise, cascaded_two_level, dimer_product, gue_chain, NoiseSpec, TwoLevelChain,
};
use crate::error::{QnetError, Result};
use crate::gue::{self, GueParams};
use crate::protocols::{self as proto, BranchMode, ProtocolParams, PulseSpec, ToricLattice};
use crate::qops::{trace_product, Operator, StateVector};
use crate::scatter::{self, NodeParams, RIGHT};
use crate::slh::{NetworkSpec, UP};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Directionality,
    Dynamics,
    Scatter,
    Protocol,
    Circuit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Directionality => "directionality",
            Self::Dynamics => "dynamics",
            Self::Scatter => "scatter",
            Self::Protocol => "protocol",
            Self::Circuit => "circuit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "qnet", version, about = "Giant unidirectional emitter networks: sweeps and protocols")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Table plus scalar summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub schema_version: u32,
    pub command: String,
    pub mode: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub summary: BTreeMap<String, Value>,
}

impl Dataset {
    fn new(command: Command, mode: &str, columns: &[&str]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.name().into(),
            mode: mode.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn note(&mut self, key: &str, v: impl Into<Value>) {
        self.summary.insert(key.into(), v.into());
    }

    /// Column `name` as numbers; non-numeric cells become NaN.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k].as_f64().unwrap_or(f64::NAN)).collect())
    }

    pub fn summary_f64(&self, key: &str) -> Option<f64> {
        self.summary.get(key).and_then(Value::as_f64)
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> Result<()> {
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, self).map_err(|e| QnetError::Io(e.into()))?;
                writeln!(out)?;
            }
            Format::Csv => {
                writeln!(out, "# schema_version={}", self.schema_version)?;
                writeln!(out, "# command={} mode={}", self.command, self.mode)?;
                for (k, v) in &self.summary {
                    writeln!(out, "# {k}={}", cell_text(v))?;
                }
                let mut w = csv::Writer::from_writer(&mut *out);
                let csv_err = |e: csv::Error| QnetError::Io(std::io::Error::other(e));
                w.write_record(&self.columns).map_err(csv_err)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(cell_text)).map_err(csv_err)?;
                }
                w.flush()?;
            }
        }
        Ok(())
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Finite numbers as JSON numbers, anything else as null.
fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

/// Process exit code for an error: 2 for configuration problems, 3 for
/// numerical failures, 1 for I/O.
pub fn exit_code(e: &QnetError) -> i32 {
    match e {
        QnetError::Convergence(_) | QnetError::Stiffness(_) | QnetError::Singular(_) | QnetError::Multiplicity(_) => 3,
        QnetError::Io(_) => 1,
        _ => 2,
    }
}

fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| QnetError::Config(e.to_string()))
}

/// Run `command` on a config document.
pub fn execute(command: Command, config: &str, seed: u64) -> Result<Dataset> {
    match command {
        Command::Directionality => directionality(parse(config)?, seed),
        Command::Dynamics => dynamics(parse(config)?),
        Command::Scatter => scatter_cmd(parse(config)?, seed),
        Command::Protocol => protocol(parse(config)?, seed),
        Command::Circuit => circuit_cmd(parse(config)?),
    }
}

/// Parse arguments, run, write output; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("qnet: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| QnetError::Config(format!("cannot read {}: {e}", cli.config.display())))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(QnetError::Config("--jobs must be >= 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| QnetError::Config(e.to_string()))?;
    let data = pool.install(|| execute(cli.command, &text, cli.seed))?;
    match &cli.out {
        Some(path) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            data.write(cli.format, &mut f)?;
            f.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            data.write(cli.format, &mut lock)?;
        }
    }
    Ok(())
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn check(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(QnetError::Config(msg.into()))
    }
}

/// Slope of `ln y` against `ln x` over pairs with positive entries.
fn loglog(x: &[f64], y: &[f64]) -> Option<f64> {
    let xy: Vec<(f64, f64)> =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    (xy.len() >= 2).then(|| circuit::log_slope(&xy))
}

// ------------------------------------------------------------ directionality

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DirectionalityConfig {
    /// One emitter at the optimal `J`, `φ`.
    Single {
        r: f64,
        #[serde(default = "one")]
        gamma: f64,
        /// Detune both transmons by the optimal shift.
        #[serde(default = "yes")]
        condition_ii: bool,
        /// Ratio `γ_1/γ_2` applied to transmon 1.
        #[serde(default = "one")]
        gamma_ratio: f64,
    },
    /// `β_dir` on a `(J, φ)` grid centred on the optimum.
    Grid {
        r: f64,
        #[serde(default = "one")]
        gamma: f64,
        #[serde(default)]
        condition_ii: bool,
        /// Half width in units of `γ`.
        j_half_width: f64,
        /// Half width in radians.
        phi_half_width: f64,
        n_j: usize,
        n_phi: usize,
        /// Box used for the summary: `|J − J_opt| ≤ box_j γ`, `|φ − φ_opt| ≤ box_phi`.
        #[serde(default)]
        box_j: Option<f64>,
        #[serde(default)]
        box_phi: Option<f64>,
    },
    /// Mean `β_dir` under static disorder in `r_k`, `γ_k`.
    MonteCarlo {
        r: f64,
        #[serde(default = "one")]
        gamma: f64,
        sd_r: Vec<f64>,
        /// In units of `γ`.
        sd_gamma: Vec<f64>,
        samples: usize,
    },
}

fn directionality(cfg: DirectionalityConfig, seed: u64) -> Result<Dataset> {
    const C: Command = Command::Directionality;
    match cfg {
        DirectionalityConfig::Single { r, gamma, condition_ii, gamma_ratio } => {
            let mut p = GueParams::optimal(r, gamma, 0.0)?;
            if !condition_ii {
                p.delta1 = 0.0;
                p.delta2 = 0.0;
            }
            p.gamma1 *= gamma_ratio;
            let start = std::time::Instant::now();
            let em = gue::emission(&p, gue::right_amplitudes())?;
            let mut d = Dataset::new(C, "single", &["r", "gamma", "j", "phi", "beta_dir", "beta_left", "commutator_norm"]);
            d.push(vec![
                num(r),
                num(gamma),
                num(p.j_hop),
                num(p.phi),
                num(em.beta_right),
                num(em.beta_left),
                num(p.collective_commutator().norm()),
            ]);
            d.note("runtime_s", num(start.elapsed().as_secs_f64()));
            Ok(d)
        }
        DirectionalityConfig::Grid { r, gamma, condition_ii, j_half_width, phi_half_width, n_j, n_phi, box_j, box_phi } => {
            check(n_j >= 1 && n_phi >= 1, "grid needs n_j, n_phi >= 1")?;
            check(j_half_width >= 0.0 && phi_half_width >= 0.0, "half widths must be >= 0")?;
            let base = GueParams::optimal(r, gamma, 0.0)?;
            let (j0, phi0) = (base.j_hop, base.phi);
            let js = linspace(j0 - j_half_width * gamma, j0 + j_half_width * gamma, n_j);
            let phis = linspace(phi0 - phi_half_width, phi0 + phi_half_width, n_phi);
            let pts: Vec<(f64, f64)> = js.iter().flat_map(|&j| phis.iter().map(move |&f| (j, f))).collect();
            let start = std::time::Instant::now();
            let betas = pts
                .par_iter()
                .map(|&(j, phi)| {
                    let mut p = GueParams { j_hop: j, phi, ..base };
                    if !condition_ii {
                        p.delta1 = 0.0;
                        p.delta2 = 0.0;
                    }
                    gue::directionality(&p)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut d = Dataset::new(C, "grid", &["j_over_gamma", "phi", "beta_dir"]);
            for (&(j, phi), &b) in pts.iter().zip(&betas) {
                d.push(vec![num(j / gamma), num(phi), num(b)]);
            }
            d.note("j_opt_over_gamma", num(j0 / gamma));
            d.note("phi_opt", num(phi0));
            d.note("runtime_s", num(start.elapsed().as_secs_f64()));
            if let (Some(bj), Some(bp)) = (box_j, box_phi) {
                let eps = 1e-12;
                let inside = pts
                    .iter()
                    .zip(&betas)
                    .filter(|((j, f), _)| (j - j0).abs() <= bj * gamma + eps && (f - phi0).abs() <= bp + eps)
                    .map(|(_, b)| *b);
                d.note("box_min_beta", num(inside.fold(f64::INFINITY, f64::min)));
            }
            Ok(d)
        }
        DirectionalityConfig::MonteCarlo { r, gamma, sd_r, sd_gamma, samples } => {
            let mut d = Dataset::new(C, "monte_carlo", &["sd_r", "sd_gamma", "beta_mean", "beta_sem"]);
            for &sr in &sd_r {
                for &sg in &sd_gamma {
                    let a = gue::averaged_directionality(r, gamma, sr, sg * gamma, samples, seed)?;
                    d.push(vec![num(sr), num(sg), num(a.mean), num(a.sem)]);
                }
            }
            d.note("samples", samples);
            d.note("seed", seed);
            Ok(d)
        }
    }
}

// ------------------------------------------------------------ dynamics

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Cascaded two-level emitters (`χ → ∞`).
    TwoLevel,
    /// Full emitters composed along the waveguide.
    Gue,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n_emitters: usize,
    #[serde(default = "one")]
    pub gamma_r: f64,
    /// Drive detuning (two-level model only).
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub phi_tilde: f64,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub u: f64,
    #[serde(default)]
    pub chi: f64,
    #[serde(default = "default_gue_cutoff")]
    pub n_max: usize,
    #[serde(default = "yes")]
    pub hard_core: bool,
}

fn default_gue_cutoff() -> usize {
    3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DynamicsConfig {
    /// Steady states on an `(Ω, γ_φ)` grid.
    SteadyMap {
        model: ModelSpec,
        omega_rabi: Vec<f64>,
        gamma_phi: Vec<f64>,
        #[serde(default)]
        gamma_nr: f64,
    },
    /// Evolution from the ground state.
    Trajectory {
        model: ModelSpec,
        omega_rabi: f64,
        #[serde(default)]
        gamma_phi: f64,
        #[serde(default)]
        gamma_nr: f64,
        t_end: f64,
        n_points: usize,
    },
}

/// Generator, output coupling and dark-state reference for one model.
struct DrivenModel {
    generator: crate::dynamics::Generator,
    lr: Operator,
    dark: StateVector,
}

fn driven_model(m: &ModelSpec, omega: f64, noise: &NoiseSpec) -> Result<DrivenModel> {
    check(m.n_emitters >= 2 && m.n_emitters % 2 == 0, "dark-state reference needs an even number of emitters >= 2")?;
    match m.kind {
        ModelKind::TwoLevel => {
            check(m.phi_tilde == 0.0, "two-level model uses phi_tilde = 0")?;
            let chain = TwoLevelChain { n_emitters: m.n_emitters, omega_rabi: omega, delta: m.delta, gamma_r: m.gamma_r, phi_tilde: 0.0 };
            let generator = cascaded_generator_with_noise(&chain, noise)?;
            let (_, lr) = cascaded_two_level(&chain)?;
            let dark = dimer_product(m.n_emitters, omega, m.gamma_r)?;
            Ok(DrivenModel { generator, lr, dark })
        }
        ModelKind::Gue => {
            check(m.delta == 0.0, "gue model: set detunings through the emitter, not delta")?;
            let unit = gue::optimal_params(m.r, 1.0)?.gamma_r;
            let p = GueParams::optimal(m.r, m.gamma_r / unit, 0.0)?.with_nonlinearity(m.u, m.chi).with_cutoff(m.n_max);
            let chain = gue_chain(&vec![p; m.n_emitters], m.phi_tilde, omega, m.gamma_r, noise, m.hard_core)?;
            let pairs: Vec<usize> = (0..m.n_emitters).step_by(2).collect();
            let dark = chain.dimer(&pairs, omega, m.gamma_r, m.phi_tilde)?;
            Ok(DrivenModel { generator: chain.generator, lr: chain.lr, dark })
        }
    }
}

fn dynamics(cfg: DynamicsConfig) -> Result<Dataset> {
    const C: Command = Command::Dynamics;
    match cfg {
        DynamicsConfig::SteadyMap { model, omega_rabi, gamma_phi, gamma_nr } => {
            let pts: Vec<(f64, f64)> =
                omega_rabi.iter().flat_map(|&o| gamma_phi.iter().map(move |&g| (o, g))).collect();
            let rows = pts
                .par_iter()
                .map(|&(o, g)| {
                    let m = driven_model(&model, o, &NoiseSpec { gamma_phi: g, gamma_nr })?;
                    let rho = m.generator.steady_state()?;
                    let overlap = rho.fidelity_pure(&m.dark);
                    let flux = trace_product(&(m.lr.dag().matrix() * m.lr.matrix()), rho.matrix()).re;
                    Ok((overlap, flux, rho.purity()))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut d = Dataset::new(
                C,
                "steady_map",
                &["omega_rabi", "gamma_phi", "dark_overlap", "infidelity", "output_flux", "flux_ratio", "purity"],
            );
            for (&(o, g), &(ov, flux, pur)) in pts.iter().zip(&rows) {
                let ratio = if o > 0.0 { flux * model.gamma_r / (o * o) } else { f64::NAN };
                d.push(vec![num(o), num(g), num(ov), num(1.0 - ov), num(flux), num(ratio), num(pur)]);
            }
            if gamma_phi.len() > 1 && omega_rabi.len() == 1 {
                let inf = d.column("infidelity").unwrap_or_default();
                if let Some(s) = loglog(&gamma_phi, &inf) {
                    d.note("slope_gamma_phi", num(s));
                }
            }
            if omega_rabi.len() > 1 && gamma_phi.len() == 1 {
                let inf = d.column("infidelity").unwrap_or_default();
                if let Some(s) = loglog(&omega_rabi, &inf) {
                    d.note("slope_omega", num(s));
                }
            }
            Ok(d)
        }
        DynamicsConfig::Trajectory { model, omega_rabi, gamma_phi, gamma_nr, t_end, n_points } => {
            check(t_end > 0.0 && n_points >= 2, "trajectory needs t_end > 0 and n_points >= 2")?;
            let m = driven_model(&model, omega_rabi, &NoiseSpec { gamma_phi, gamma_nr })?;
            let times = linspace(0.0, t_end, n_points);
            let rho0 = StateVector::basis(m.generator.space(), 0).projector();
            let proj = m.dark.projector();
            let dark_op = Operator::new(m.generator.space().clone(), proj.matrix().clone())?;
            let flux_op = &m.lr.dag() * &m.lr;
            let traj = m.generator.evolve(&rho0, &times, &[dark_op, flux_op])?;
            let mut d = Dataset::new(C, "trajectory", &["t", "dark_overlap", "output_flux", "purity"]);
            for (k, t) in traj.times.iter().enumerate() {
                d.push(vec![num(*t), num(traj.values[k][0].re), num(traj.values[k][1].re), num(traj.purity[k])]);
            }
            d.note("trace_drift", num(traj.trace_drift));
            d.note("final_dark_overlap", num(traj.values.last().map(|v| v[0].re).unwrap_or(f64::NAN)));
            Ok(d)
        }
    }
}

// ------------------------------------------------------------ scatter

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScatterConfig {
    /// One node on the upper line: transmission for both qubit states.
    Node {
        #[serde(default)]
        params: ProtocolParams,
        /// `Δ^n` in units of `γ_r`; resonant (−1/2) when omitted.
        #[serde(default)]
        delta_n: Option<f64>,
        delta_p: Vec<f64>,
    },
    /// Stabilizer fidelity `F_Z` of an `n_G`-node parity measurement.
    Stabilizer {
        #[serde(default)]
        params: ProtocolParams,
        n_g: Vec<usize>,
        delta_p: Vec<f64>,
        #[serde(default = "unit_scale")]
        v_scale: Vec<f64>,
        #[serde(default = "unit_scale")]
        j_scale: Vec<f64>,
    },
    /// `F_Z` averaged over a truncated Gaussian photon for a `σ_t` scan.
    PulseAverage {
        #[serde(default)]
        params: ProtocolParams,
        n_g: usize,
        gamma_r_mhz: f64,
        duration_ns: f64,
        sigma_t_ns: Vec<f64>,
    },
    /// Random networks: probability conservation and backend agreement.
    RandomCheck {
        n_nodes: Vec<usize>,
        samples: usize,
        /// Fraction of samples with unidirectionality deliberately broken.
        #[serde(default)]
        broken_fraction: f64,
        #[serde(default = "default_dp_range")]
        delta_p_range: [f64; 2],
    },
}

fn unit_scale() -> Vec<f64> {
    vec![1.0]
}

fn default_dp_range() -> [f64; 2] {
    [-2.0, 2.0]
}

/// Parity network with every node resonant and perturbed `V`, `J`.
fn stabilizer_network(params: &ProtocolParams, n_g: usize, v_scale: f64, j_scale: f64) -> Result<proto::PhotonNetwork> {
    let subset: Vec<usize> = (0..n_g).collect();
    let mut net = proto::parity_network(n_g, &subset, params)?;
    if let Some(spec) = &mut net.spec {
        for node in &mut spec.nodes {
            node.v1 *= v_scale;
            node.v2 *= v_scale;
            node.gue.j_hop *= j_scale;
        }
    }
    Ok(net)
}

fn scatter_cmd(cfg: ScatterConfig, seed: u64) -> Result<Dataset> {
    const C: Command = Command::Scatter;
    match cfg {
        ScatterConfig::Node { params, delta_n, delta_p } => {
            params.validate()?;
            let g = params.gamma_r;
            let node = NodeParams::with_gamma_r(params.r, g, delta_n.unwrap_or(-0.5) * g, params.v)?;
            let spec = NetworkSpec::new(vec![node], vec![Matrix2::identity(); 2], 0.0)?;
            let mut d = Dataset::new(
                C,
                "node",
                &["delta_p", "qubit", "t_re", "t_im", "t_abs", "t_arg", "reflection_abs", "general_re", "general_im", "backend_diff"],
            );
            for &dp in &delta_p {
                let a = scatter::node_amplitudes(&node, dp * g)?;
                let res = scatter::general_scattering(&spec, dp * g)?;
                for (s, t, r) in [(0usize, a.t0, a.r0), (1, a.t1, a.r1)] {
                    let gen = res.amplitude(RIGHT, UP, UP, s) * res.global_phase;
                    d.push(vec![
                        num(dp),
                        json!(s),
                        num(t.re),
                        num(t.im),
                        num(t.norm()),
                        num(t.arg()),
                        num(r.norm()),
                        num(gen.re),
                        num(gen.im),
                        num((gen - t).norm()),
                    ]);
                }
            }
            Ok(d)
        }
        ScatterConfig::Stabilizer { params, n_g, delta_p, v_scale, j_scale } => {
            params.validate()?;
            let mut pts = Vec::new();
            for &n in &n_g {
                for &dp in &delta_p {
                    for &v in &v_scale {
                        for &j in &j_scale {
                            pts.push((n, dp, v, j));
                        }
                    }
                }
            }
            let fids = pts
                .par_iter()
                .map(|&(n, dp, v, j)| {
                    let net = stabilizer_network(&params, n, v, j)?;
                    let subset: Vec<usize> = (0..n).collect();
                    proto::parity_fidelity(&net, n, &subset, dp * params.gamma_r, params.backend)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut d = Dataset::new(C, "stabilizer", &["n_g", "delta_p", "v_scale", "j_scale", "fidelity", "infidelity"]);
            for (&(n, dp, v, j), &f) in pts.iter().zip(&fids) {
                d.push(vec![json!(n), num(dp), num(v), num(j), num(f), num(1.0 - f)]);
            }
            let inf: Vec<f64> = fids.iter().map(|f| 1.0 - f).collect();
            let axes = [
                ("slope_delta_p", delta_p.len(), pts.iter().map(|p| p.1.abs()).collect::<Vec<_>>()),
                ("slope_n_g", n_g.len(), pts.iter().map(|p| p.0 as f64).collect()),
                ("slope_v", v_scale.len(), pts.iter().map(|p| (p.2 - 1.0).abs()).collect()),
                ("slope_j", j_scale.len(), pts.iter().map(|p| (p.3 - 1.0).abs()).collect()),
            ];
            let varying = axes.iter().filter(|a| a.1 > 1).count();
            for (key, len, x) in &axes {
                if *len > 1 && varying == 1 {
                    if let Some(s) = loglog(x, &inf).filter(|s| s.is_finite()) {
                        d.note(key, num(s));
                    }
                }
            }
            d.note("min_fidelity", num(fids.iter().cloned().fold(f64::INFINITY, f64::min)));
            Ok(d)
        }
        ScatterConfig::PulseAverage { params, n_g, gamma_r_mhz, duration_ns, sigma_t_ns } => {
            check(gamma_r_mhz > 0.0 && duration_ns > 0.0, "gamma_r_mhz and duration_ns must be > 0")?;
            let params = ProtocolParams { gamma_r: 1.0, v: params.v / params.gamma_r, ..params };
            let net = stabilizer_network(&params, n_g, 1.0, 1.0)?;
            let subset: Vec<usize> = (0..n_g).collect();
            // times in units of 1/γ_r
            let scale = 2.0 * PI * gamma_r_mhz * 1e6 * 1e-9;
            let start = std::time::Instant::now();
            let avgs = sigma_t_ns
                .par_iter()
                .map(|&s| {
                    let pulse = PulseSpec::truncated_gaussian(s * scale, duration_ns * scale)?;
                    let f = |dp: f64| proto::parity_fidelity(&net, n_g, &subset, dp, params.backend).unwrap_or(f64::NAN);
                    let v = proto::pulse_average(f, &pulse)?;
                    if v.is_nan() {
                        return Err(QnetError::Convergence("stabilizer fidelity failed inside the pulse average".into()));
                    }
                    Ok(v)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut d = Dataset::new(C, "pulse_average", &["sigma_t_ns", "fidelity_avg"]);
            for (&s, &f) in sigma_t_ns.iter().zip(&avgs) {
                d.push(vec![num(s), num(f)]);
            }
            let best = avgs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            d.note("best_fidelity", num(best));
            d.note("runtime_s", num(start.elapsed().as_secs_f64()));
            Ok(d)
        }
        ScatterConfig::RandomCheck { n_nodes, samples, broken_fraction, delta_p_range } => {
            check(!n_nodes.is_empty() && n_nodes.iter().all(|&n| (1..=8).contains(&n)), "n_nodes entries must lie in 1..=8")?;
            check(delta_p_range[0] <= delta_p_range[1], "delta_p_range must be increasing")?;
            check((0.0..=1.0).contains(&broken_fraction), "broken_fraction must lie in [0, 1]")?;
            let rows = (0..samples)
                .into_par_iter()
                .map(|k| {
                    use rand::Rng;
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(k as u64);
                    let n = n_nodes[k % n_nodes.len()];
                    let broken = rng.gen_bool(broken_fraction);
                    let spec = scatter::random_network(&mut rng, n, broken)?;
                    let dp = if delta_p_range[0] == delta_p_range[1] {
                        delta_p_range[0]
                    } else {
                        rng.gen_range(delta_p_range[0]..delta_p_range[1])
                    };
                    let gen = scatter::general_scattering(&spec, dp)?;
                    let mut perr: f64 = 0.0;
                    for s in 0..gen.amplitudes.len() {
                        for i in 0..2 {
                            perr = perr.max((gen.total_probability(i, s) - 1.0).abs());
                        }
                    }
                    let diff = if broken {
                        f64::NAN
                    } else {
                        let ideal = scatter::ideal_scattering(&spec, dp)?;
                        max_amplitude_diff(&ideal, &gen)
                    };
                    Ok((n, dp, perr, diff, broken))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut d = Dataset::new(C, "random_check", &["sample", "n_nodes", "broken", "delta_p", "probability_error", "backend_diff"]);
            for (k, &(n, dp, e, diff, broken)) in rows.iter().enumerate() {
                d.push(vec![json!(k), json!(n), json!(broken), num(dp), num(e), num(diff)]);
            }
            d.note("max_probability_error", num(rows.iter().map(|r| r.2).fold(0.0, f64::max)));
            let diffs = rows.iter().filter(|r| !r.4).map(|r| r.3);
            d.note("max_backend_diff", num(diffs.fold(0.0, f64::max)));
            d.note("broken_samples", rows.iter().filter(|r| r.4).count());
            Ok(d)
        }
    }
}

/// Largest amplitude difference including the global phase.
pub fn max_amplitude_diff(a: &scatter::ScatteringResult, b: &scatter::ScatteringResult) -> f64 {
    let mut m: f64 = 0.0;
    for (sa, sb) in a.amplitudes.iter().zip(&b.amplitudes) {
        for dir in 0..2 {
            for j in 0..2 {
                for i in 0..2 {
                    m = m.max((sa[dir][j][i] * a.global_phase - sb[dir][j][i] * b.global_phase).norm());
                }
            }
        }
    }
    m
}

// ------------------------------------------------------------ protocols

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryBlock {
    pub loss_probability: f64,
    pub runs: usize,
    #[serde(default = "default_max_trials")]
    pub max_trials: usize,
}

fn default_max_trials() -> usize {
    100_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProtocolConfig {
    /// State transfer from the first to the last of `n_nodes` qubits.
    Qst {
        n_nodes: usize,
        delta_p: Vec<f64>,
        #[serde(default)]
        params: ProtocolParams,
        /// Heralded retries under photon loss at `delta_p[0]`.
        #[serde(default)]
        retry: Option<RetryBlock>,
        /// Input amplitudes `[[re, im], [re, im]]` for the retry runs.
        #[serde(default = "default_input")]
        input: [[f64; 2]; 2],
    },
    /// `Z`-parity of the 1-based `qubits` among `n_qubits`.
    Parity {
        n_qubits: usize,
        qubits: Vec<usize>,
        delta_p: Vec<f64>,
        #[serde(default)]
        params: ProtocolParams,
    },
    Ghz {
        n_qubits: usize,
        delta_p: Vec<f64>,
        #[serde(default)]
        params: ProtocolParams,
    },
    Cluster {
        n_qubits: usize,
        delta_p: Vec<f64>,
        #[serde(default)]
        params: ProtocolParams,
    },
    /// Code generation on a `n_side × n_side` torus, then a logical round trip.
    Toric {
        #[serde(default = "default_side")]
        n_side: usize,
        #[serde(default)]
        delta_p: f64,
        /// Sample one measurement record per run instead of enumerating.
        #[serde(default)]
        sample: bool,
        #[serde(default)]
        params: ProtocolParams,
        #[serde(default = "default_input")]
        input: [[f64; 2]; 2],
    },
    Detector {
        #[serde(default = "one")]
        gamma_r: f64,
        delta_p: Vec<f64>,
    },
}

fn default_side() -> usize {
    2
}

fn default_input() -> [[f64; 2]; 2] {
    [[std::f64::consts::FRAC_1_SQRT_2, 0.0], [std::f64::consts::FRAC_1_SQRT_2, 0.0]]
}

fn amplitudes(x: [[f64; 2]; 2]) -> [C64; 2] {
    [C64::new(x[0][0], x[0][1]), C64::new(x[1][0], x[1][1])]
}

fn protocol(cfg: ProtocolConfig, seed: u64) -> Result<Dataset> {
    const C: Command = Command::Protocol;
    let ghz = matches!(cfg, ProtocolConfig::Ghz { .. });
    match cfg {
        ProtocolConfig::Qst { n_nodes, delta_p, params, retry, input } => {
            params.validate()?;
            let g = params.gamma_r;
            if let Some(rb) = retry {
                check(delta_p.len() == 1, "retry runs need exactly one delta_p")?;
                let settings = proto::RetrySettings {
                    n_nodes,
                    loss_probability: rb.loss_probability,
                    delta_p: delta_p[0] * g,
                    runs: rb.runs,
                    seed,
                    max_trials: rb.max_trials,
                };
                let rep = proto::run_heralded_retry(amplitudes(input), &settings, &params)?;
                let mut d = Dataset::new(C, "qst_retry", &["trials", "count", "fraction", "geometric"]);
                let p = rb.loss_probability;
                for (i, &c) in rep.histogram.iter().enumerate() {
                    let k = i + 1;
                    let geo = (1.0 - p) * p.powi(k as i32 - 1);
                    d.push(vec![json!(k), json!(c), num(c as f64 / rep.runs as f64), num(geo)]);
                }
                d.note("runs", rep.runs);
                d.note("expected_trials", num(rep.expected_trials));
                d.note("mean_trials", num(rep.mean_trials));
                d.note("sem_trials", num(rep.sem_trials));
                d.note("min_fidelity", num(rep.min_fidelity));
                d.note("mean_fidelity", num(rep.mean_fidelity));
                return Ok(d);
            }
            let rows = delta_p
                .par_iter()
                .map(|&dp| Ok((proto::qst_entanglement_fidelity(n_nodes, dp * g, &params)?, proto::qst_fidelity_closed_form(dp * g, g))))
                .collect::<Result<Vec<_>>>()?;
            let mut d = Dataset::new(C, "qst", &["delta_p", "fidelity", "closed_form", "difference"]);
            for (&dp, &(f, cf)) in delta_p.iter().zip(&rows) {
                d.push(vec![num(dp), num(f), num(cf), num(f - cf)]);
            }
            Ok(d)
        }
        ProtocolConfig::Parity { n_qubits, qubits, delta_p, params } => {
            check(qubits.iter().all(|&q| q >= 1 && q <= n_qubits), "qubits are 1-based and must lie in 1..=n_qubits")?;
            let subset: Vec<usize> = qubits.iter().map(|q| q - 1).collect();
            let net = proto::parity_network(n_qubits, &subset, &params)?;
            let g = params.gamma_r;
            let mut d = Dataset::new(C, "parity", &["delta_p", "fidelity", "p_up", "p_down", "p_left"]);
            for &dp in &delta_p {
                let f = proto::parity_fidelity(&net, n_qubits, &subset, dp * g, params.backend)?;
                let out = proto::parity_measurement(&net, n_qubits, dp * g, params.backend)?;
                let mut p = [0.0; 3];
                for b in &out.branches {
                    let k = match b.photons.last() {
                        Some(r) if r.direction == proto::Direction::Left => 2,
                        Some(r) if r.line == proto::Line::Up => 0,
                        _ => 1,
                    };
                    p[k] += b.probability();
                }
                d.push(vec![num(dp), num(f), num(p[0]), num(p[1]), num(p[2])]);
            }
            Ok(d)
        }
        ProtocolConfig::Ghz { n_qubits, delta_p, params } | ProtocolConfig::Cluster { n_qubits, delta_p, params } => {
            let g = params.gamma_r;
            let mut d = Dataset::new(C, if ghz { "ghz" } else { "cluster" }, &["delta_p", "fidelity", "branches", "total_probability"]);
            for &dp in &delta_p {
                let out = if ghz {
                    proto::prepare_ghz(n_qubits, dp * g, &params)?
                } else {
                    proto::prepare_cluster_1d(n_qubits, dp * g, &params)?
                };
                let f = out.fidelity.unwrap_or(f64::NAN);
                d.push(vec![num(dp), num(f), json!(out.branches.len()), num(out.total_probability())]);
            }
            Ok(d)
        }
        ProtocolConfig::Toric { n_side, delta_p, sample, params, input } => {
            let lat = ToricLattice::new(n_side)?;
            let g = params.gamma_r;
            let mode = if sample { BranchMode::Sample { seed } } else { BranchMode::Enumerate };
            let out = proto::toric_generate(&lat, delta_p * g, mode, &params)?;
            let mut d = Dataset::new(
                C,
                "toric",
                &["branch", "probability", "min_plaquette", "min_vertex", "fidelity", "record"],
            );
            let target = lat.code_state(1)?;
            let mut worst: f64 = 0.0;
            for (k, b) in out.branches.iter().enumerate() {
                let (pl, vx) = proto::toric_stabilizers(&b.register, &lat);
                let mp = pl.iter().cloned().fold(f64::INFINITY, f64::min);
                let mv = vx.iter().cloned().fold(f64::INFINITY, f64::min);
                worst = worst.max((1.0 - mp).abs()).max((1.0 - mv).abs());
                let record: Vec<String> = b.measurements.iter().map(|m| format!("{}={}", m.name, m.outcome)).collect();
                d.push(vec![
                    json!(k),
                    num(b.probability()),
                    num(mp),
                    num(mv),
                    num(b.register.normalized()?.fidelity(&target)),
                    json!(record.join(" ")),
                ]);
            }
            d.note("n_qubits", lat.n_qubits());
            d.note("independent_stabilizers", lat.independent_stabilizers());
            d.note("max_stabilizer_deviation", num(worst));
            let rt = proto::toric_round_trip(&lat, amplitudes(input), delta_p * g, &params)?;
            d.note("round_trip_fidelity", num(rt.fidelity.unwrap_or(f64::NAN)));
            Ok(d)
        }
        ProtocolConfig::Detector { gamma_r, delta_p } => {
            let mut d = Dataset::new(C, "detector", &["delta_p", "p_det", "p_no_click", "total"]);
            for &dp in &delta_p {
                let r = proto::photon_detector(dp * gamma_r, gamma_r)?;
                d.push(vec![num(dp), num(r.p_det), num(r.p_no_click), num(r.p_det + r.p_no_click)]);
            }
            Ok(d)
        }
    }
}

// ------------------------------------------------------------ circuit

/// Circuit in lab units: energies as `ω/2π` in GHz, capacitances in fF.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitInput {
    pub ej1_ghz: f64,
    pub ej2_ghz: f64,
    pub ejc_ghz: f64,
    pub c1_ff: f64,
    pub c2_ff: f64,
    pub cc_ff: f64,
    pub cp1_ff: f64,
    pub cp2_ff: f64,
    #[serde(default = "default_z0")]
    pub z0: f64,
    pub omega0_ghz: f64,
}

fn default_z0() -> f64 {
    50.0
}

const FF: f64 = 1e-15;

impl CircuitInput {
    pub fn to_params(&self) -> CircuitParams {
        CircuitParams {
            ej1: circuit::from_ghz(self.ej1_ghz),
            ej2: circuit::from_ghz(self.ej2_ghz),
            ejc: circuit::from_ghz(self.ejc_ghz),
            c1: self.c1_ff * FF,
            c2: self.c2_ff * FF,
            cc: self.cc_ff * FF,
            cp1: self.cp1_ff * FF,
            cp2: self.cp2_ff * FF,
            z0: self.z0,
            omega0: circuit::from_ghz(self.omega0_ghz),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceInput {
    pub ejq_ghz: f64,
    pub cq_ff: f64,
    pub ejc1_ghz: f64,
    pub ejc2_ghz: f64,
    pub ccc1_ff: f64,
    pub ccc2_ff: f64,
    pub omega_q_ghz: f64,
    pub phase_qd: f64,
    #[serde(default)]
    pub cpq1_ff: f64,
    #[serde(default)]
    pub cpq2_ff: f64,
}

impl InterfaceInput {
    pub fn to_params(&self) -> InterfaceParams {
        InterfaceParams {
            ejq: circuit::from_ghz(self.ejq_ghz),
            cq: self.cq_ff * FF,
            ejc1: circuit::from_ghz(self.ejc1_ghz),
            ejc2: circuit::from_ghz(self.ejc2_ghz),
            ccc1: self.ccc1_ff * FF,
            ccc2: self.ccc2_ff * FF,
            omega_q: circuit::from_ghz(self.omega_q_ghz),
            phase_qd: self.phase_qd,
            cpq1: self.cpq1_ff * FF,
            cpq2: self.cpq2_ff * FF,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum CircuitConfig {
    Effective {
        circuit: CircuitInput,
    },
    Renormalized {
        circuit: CircuitInput,
        #[serde(default = "default_circuit_cutoff")]
        n_max: usize,
    },
    Interface {
        circuit: CircuitInput,
        interface: InterfaceInput,
    },
    /// Rates as `γ/2π` in MHz.
    Subradiance {
        phase: Vec<f64>,
        geff1_mhz: f64,
        geff2_mhz: f64,
    },
    /// Optimal `χ` at `ω_1 = ω_0`, `J = J_opt` for a list of `E_J/E_C`.
    Sweep {
        omega0_ghz: f64,
        ratios: Vec<f64>,
        #[serde(default)]
        cp_fraction: Option<f64>,
        #[serde(default)]
        z0: Option<f64>,
        #[serde(default)]
        r_range: Option<[f64; 2]>,
        #[serde(default)]
        n_max: Option<usize>,
        #[serde(default)]
        r_tol: Option<f64>,
    },
}

fn default_circuit_cutoff() -> usize {
    8
}

fn rate_row(name: &str, x: f64) -> Vec<Value> {
    vec![json!(name), num(x), json!("rad/s"), num(circuit::to_ghz(x))]
}

fn plain_row(name: &str, x: f64) -> Vec<Value> {
    vec![json!(name), num(x), json!("1"), Value::Null]
}

fn circuit_cmd(cfg: CircuitConfig) -> Result<Dataset> {
    const C: Command = Command::Circuit;
    const COLS: [&str; 4] = ["quantity", "value", "unit", "freq_ghz"];
    match cfg {
        CircuitConfig::Effective { circuit: ci } => {
            let em = circuit::effective_model(&ci.to_params())?;
            let mut d = Dataset::new(C, "effective", &COLS);
            for (n, x) in [
                ("omega1", em.omega1),
                ("omega2", em.omega2),
                ("u1", em.u1),
                ("u2", em.u2),
                ("j_c", em.j_c),
                ("j_i", em.j_i),
                ("j", em.j()),
                ("chi", em.chi),
                ("gamma1", em.gamma1),
                ("gamma2", em.gamma2),
            ] {
                d.push(rate_row(n, x));
            }
            d.push(plain_row("r1", em.r1));
            d.push(plain_row("r2", em.r2));
            d.note("warnings", json!(em.warnings));
            Ok(d)
        }
        CircuitConfig::Renormalized { circuit: ci, n_max } => {
            let cp = ci.to_params();
            let em = circuit::effective_model(&cp)?;
            let (_, ex) = circuit::renormalized_hamiltonian(&cp, n_max)?;
            let mut d = Dataset::new(
                C,
                "renormalized",
                &["quantity", "analytic", "extracted", "analytic_ghz", "extracted_ghz", "relative_difference"],
            );
            for (n, a, e) in [
                ("omega1", em.omega1, ex.omega1),
                ("omega2", em.omega2, ex.omega2),
                ("u1", em.u1, ex.u1),
                ("u2", em.u2, ex.u2),
                ("j", em.j(), ex.j),
                ("chi", em.chi, ex.chi),
            ] {
                let rel = if a != 0.0 { (e - a) / a } else { f64::NAN };
                d.push(vec![json!(n), num(a), num(e), num(circuit::to_ghz(a)), num(circuit::to_ghz(e)), num(rel)]);
            }
            d.note("min_overlap", num(ex.min_overlap));
            d.note("ambiguous", ex.ambiguous);
            d.note("n_max", n_max);
            Ok(d)
        }
        CircuitConfig::Interface { circuit: ci, interface } => {
            let m = circuit::interface_model(&interface.to_params(), &ci.to_params())?;
            let mut d = Dataset::new(C, "interface", &COLS);
            for (n, x) in [
                ("omega_q", m.omega_q),
                ("u_q", m.u_q),
                ("v1", m.v1),
                ("v2", m.v2),
                ("jc1", m.jc1),
                ("jc2", m.jc2),
                ("ji1", m.ji1),
                ("ji2", m.ji2),
                ("gamma_q1", m.gamma_q1),
                ("gamma_q2", m.gamma_q2),
                ("gamma_q1_eff", m.gamma_q1_eff),
                ("gamma_q2_eff", m.gamma_q2_eff),
                ("residual_exchange", m.residual_exchange),
                ("delta_q", m.delta_q),
                ("gamma_q", m.gamma_q),
            ] {
                d.push(rate_row(n, x));
            }
            d.push(plain_row("kerr_ratio", m.kerr_ratio));
            Ok(d)
        }
        CircuitConfig::Subradiance { phase, geff1_mhz, geff2_mhz } => {
            check(geff1_mhz >= 0.0 && geff2_mhz >= 0.0, "rates must be >= 0")?;
            let mut d = Dataset::new(C, "subradiance", &["phase", "delta_q_mhz", "gamma_q_mhz"]);
            for &ph in &phase {
                let (dq, gq) = circuit::subradiance(ph, geff1_mhz, geff2_mhz);
                d.push(vec![num(ph), num(dq), num(gq)]);
            }
            Ok(d)
        }
        CircuitConfig::Sweep { omega0_ghz, ratios, cp_fraction, z0, r_range, n_max, r_tol } => {
            let mut s = SweepSettings::new(circuit::from_ghz(omega0_ghz), ratios);
            s.cp_fraction = cp_fraction.unwrap_or(s.cp_fraction);
            s.z0 = z0.unwrap_or(s.z0);
            s.r_range = r_range.unwrap_or(s.r_range);
            s.n_max = n_max.unwrap_or(s.n_max);
            s.r_tol = r_tol.unwrap_or(s.r_tol);
            let rep = circuit::design_sweep(&s)?;
            let mut d = Dataset::new(
                C,
                "sweep",
                &["ratio", "r", "ej_ghz", "ejc_ghz", "ec_ghz", "total_ratio", "chi_mhz", "u_mhz", "gamma_mhz", "j_opt_mhz"],
            );
            let mhz = |x: f64| circuit::to_ghz(x) * 1e3;
            for p in &rep.points {
                d.push(vec![
                    num(p.ratio),
                    num(p.r),
                    num(circuit::to_ghz(p.ej)),
                    num(circuit::to_ghz(p.ejc)),
                    num(circuit::to_ghz(p.ec)),
                    num(p.total_ratio),
                    num(mhz(p.chi)),
                    num(mhz(p.u)),
                    num(mhz(p.gamma)),
                    num(mhz(p.j_opt)),
                ]);
            }
            d.note("slope", num(rep.slope));
            Ok(d)
        }
    }
}
