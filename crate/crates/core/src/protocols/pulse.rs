//! Photon wavepackets and spectrally averaged fidelities.

use serde::{Deserialize, Serialize};

use crate::error::{QnetError, Result};

// 8-point Gauss–Legendre on [−1, 1]
const GL_X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL_W: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

fn gauss_legendre(a: f64, b: f64, panels: usize, f: &mut impl FnMut(f64) -> f64) -> f64 {
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        for k in 0..4 {
            sum += GL_W[k] * half * (f(mid - half * GL_X[k]) + f(mid + half * GL_X[k]));
        }
    }
    sum
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum PulseSpec {
    /// `f̃(t) = A e^{−t²/(4σ_t²)}` for `|t| < T/2`, zero outside.
    TruncatedGaussian { sigma_t: f64, duration_t: f64 },
    /// Spectral amplitudes on an increasing `δ_p` grid; only `|f|²` enters.
    Sampled { delta_p: Vec<f64>, amplitude: Vec<f64> },
}

impl PulseSpec {
    pub fn truncated_gaussian(sigma_t: f64, duration_t: f64) -> Result<Self> {
        let p = Self::TruncatedGaussian { sigma_t, duration_t };
        p.validate()?;
        Ok(p)
    }

    pub fn sampled(delta_p: Vec<f64>, amplitude: Vec<f64>) -> Result<Self> {
        let p = Self::Sampled { delta_p, amplitude };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::TruncatedGaussian { sigma_t, duration_t } => {
                if !(*sigma_t > 0.0 && sigma_t.is_finite() && *duration_t > 0.0 && duration_t.is_finite()) {
                    return Err(QnetError::InvalidParameter("pulse needs σ_t > 0 and T > 0".into()));
                }
            }
            Self::Sampled { delta_p, amplitude } => {
                if delta_p.len() != amplitude.len() || delta_p.len() < 2 {
                    return Err(QnetError::InvalidParameter("sampled pulse needs matching grids of ≥ 2 points".into()));
                }
                if delta_p.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(QnetError::InvalidParameter("sampled pulse grid must increase".into()));
                }
                let norm = trapezoid(delta_p, |k| amplitude[k] * amplitude[k]);
                if (norm - 1.0).abs() > 1e-10 {
                    return Err(QnetError::InvalidParameter(format!("pulse not normalized: ∫|f|² = {norm}")));
                }
            }
        }
        Ok(())
    }

    /// Amplitude `A` of the time envelope.
    fn envelope_amplitude(sigma_t: f64, duration_t: f64) -> f64 {
        let mut g = |t: f64| (-t * t / (2.0 * sigma_t * sigma_t)).exp();
        let half = 0.5 * duration_t;
        let panels = ((half / sigma_t).ceil() as usize * 4).max(16);
        let norm = 2.0 * gauss_legendre(0.0, half, panels, &mut g);
        1.0 / norm.sqrt()
    }

    /// Time envelope `f̃(t)`.
    pub fn envelope(&self, t: f64) -> Result<f64> {
        match *self {
            Self::TruncatedGaussian { sigma_t, duration_t } => {
                if t.abs() >= 0.5 * duration_t {
                    return Ok(0.0);
                }
                Ok(Self::envelope_amplitude(sigma_t, duration_t) * (-t * t / (4.0 * sigma_t * sigma_t)).exp())
            }
            Self::Sampled { .. } => Err(QnetError::Precondition("sampled pulses have no time envelope".into())),
        }
    }

    /// Spectral amplitude `f(δ_p) = (2π)^{−1/2} ∫ f̃(t) e^{iδ_p t} dt`.
    pub fn spectrum(&self, delta_p: f64) -> f64 {
        match self {
            Self::TruncatedGaussian { sigma_t, duration_t } => {
                let (s, half) = (*sigma_t, 0.5 * duration_t);
                let a = Self::envelope_amplitude(s, half * 2.0);
                let cycles = (delta_p.abs() * half / std::f64::consts::PI).ceil() as usize;
                let panels = (2 * cycles).max((half / s).ceil() as usize * 4).max(16);
                let mut g = |t: f64| (-t * t / (4.0 * s * s)).exp() * (delta_p * t).cos();
                2.0 * a * gauss_legendre(0.0, half, panels, &mut g) / (2.0 * std::f64::consts::PI).sqrt()
            }
            Self::Sampled { delta_p: grid, amplitude } => interpolate(grid, amplitude, delta_p),
        }
    }
}

fn trapezoid(x: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    (1..x.len()).map(|k| 0.5 * (x[k] - x[k - 1]) * (f(k) + f(k - 1))).sum()
}

fn interpolate(x: &[f64], y: &[f64], t: f64) -> f64 {
    if t < x[0] || t > x[x.len() - 1] {
        return 0.0;
    }
    let k = x.partition_point(|&v| v <= t).clamp(1, x.len() - 1);
    let w = (t - x[k - 1]) / (x[k] - x[k - 1]);
    y[k - 1] * (1.0 - w) + y[k] * w
}

/// `∫ dδ_p |f(δ_p)|² F(δ_p)`.
///
/// Truncated Gaussians are integrated on `[−D, D]` with `D` doubled until the
/// estimate settles; the remaining spectral weight `1 − ∫_{−D}^{D}|f|²` is
/// assigned the mean of `F(±D)`.
pub fn pulse_average(fidelity: impl Fn(f64) -> f64, pulse: &PulseSpec) -> Result<f64> {
    pulse.validate()?;
    match pulse {
        PulseSpec::Sampled { delta_p, amplitude } => {
            Ok(trapezoid(delta_p, |k| amplitude[k] * amplitude[k] * fidelity(delta_p[k])))
        }
        PulseSpec::TruncatedGaussian { sigma_t, duration_t } => {
            let h = (0.25 / sigma_t).min(std::f64::consts::PI / duration_t);
            let mut weighted = 0.0;
            let mut mass = 0.0;
            let mut add = |a: f64, b: f64| {
                let panels = ((b - a) / h).ceil() as usize;
                let half = 0.5 * (b - a) / panels as f64;
                for p in 0..panels {
                    let mid = a + (2 * p + 1) as f64 * half;
                    for k in 0..4 {
                        for x in [mid - half * GL_X[k], mid + half * GL_X[k]] {
                            let s = pulse.spectrum(x);
                            mass += GL_W[k] * half * s * s;
                            weighted += GL_W[k] * half * s * s * fidelity(x);
                        }
                    }
                }
                (weighted, mass)
            };
            let mut d = 16.0 / sigma_t;
            let (mut wsum, mut msum) = add(-d, d);
            let tail = |d: f64| 0.5 * (fidelity(d) + fidelity(-d));
            let mut prev = wsum + (1.0 - msum) * tail(d);
            for _ in 0..14 {
                add(-2.0 * d, -d);
                (wsum, msum) = add(d, 2.0 * d);
                d *= 2.0;
                let next = wsum + (1.0 - msum) * tail(d);
                if (next - prev).abs() <= 1e-8 * next.abs().max(1e-300) {
                    return Ok(next);
                }
                prev = next;
            }
            Err(QnetError::Convergence("pulse average did not settle".into()))
        }
    }
}
