//! Embedded Dormand–Prince 5(4) integrator on complex state vectors.

use num_complex::Complex64 as C64;

use crate::error::{QnetError, Result};

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest step accepted before reporting stiffness.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10, h_min: 1e-14, max_steps: 20_000_000 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

pub struct Integrator<F> {
    rhs: F,
    tol: Tolerances,
    n: usize,
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    y_new: Vec<C64>,
    fsal: bool,
    h: f64,
    pub steps: usize,
    pub rejected: usize,
}

impl<F> Integrator<F>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    pub fn new(n: usize, rhs: F, tol: Tolerances) -> Self {
        let z = vec![C64::new(0.0, 0.0); n];
        Self {
            rhs,
            tol,
            n,
            k: std::array::from_fn(|_| z.clone()),
            tmp: z.clone(),
            y_new: z,
            fsal: false,
            h: 0.0,
            steps: 0,
            rejected: 0,
        }
    }

    fn stage(&mut self, t: f64, y: &[C64], h: f64, coeffs: &[(usize, f64)], out: usize) {
        for i in 0..self.n {
            let mut acc = y[i];
            for &(j, a) in coeffs {
                acc += self.k[j][i] * (h * a);
            }
            self.tmp[i] = acc;
        }
        let (tmp, k) = (&self.tmp, &mut self.k[out]);
        (self.rhs)(t, tmp, k);
    }

    /// Advance `y` from `t0` to `t1` exactly.
    pub fn integrate(&mut self, t0: f64, t1: f64, y: &mut [C64]) -> Result<()> {
        let mut t = t0;
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(());
        }
        if !self.fsal {
            let (k0, rhs) = (&mut self.k[0], &mut self.rhs);
            rhs(t, y, k0);
            self.fsal = true;
        }
        if self.h <= 0.0 {
            let scale: f64 = y.iter().map(|v| v.norm()).fold(0.0, f64::max).max(self.tol.atol);
            let dn: f64 = self.k[0].iter().map(|v| v.norm()).fold(0.0, f64::max);
            self.h = if dn > 0.0 { (0.01 * scale / dn).min(span) } else { span * 1e-3 };
        }
        while t < t1 {
            if self.steps + self.rejected > self.tol.max_steps {
                return Err(QnetError::Convergence(format!("step budget exhausted at t = {t:e}")));
            }
            let last = t + self.h >= t1;
            let h = if last { t1 - t } else { self.h };
            self.stage(t + C2 * h, y, h, &[(0, A21)], 1);
            self.stage(t + C3 * h, y, h, &[(0, A31), (1, A32)], 2);
            self.stage(t + C4 * h, y, h, &[(0, A41), (1, A42), (2, A43)], 3);
            self.stage(t + C5 * h, y, h, &[(0, A51), (1, A52), (2, A53), (3, A54)], 4);
            self.stage(t + h, y, h, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], 5);
            for i in 0..self.n {
                self.y_new[i] = y[i]
                    + (self.k[0][i] * B1
                        + self.k[2][i] * B3
                        + self.k[3][i] * B4
                        + self.k[4][i] * B5
                        + self.k[5][i] * B6)
                        * h;
            }
            {
                let (yn, k6, rhs) = (&self.y_new, &mut self.k[6], &mut self.rhs);
                rhs(t + h, yn, k6);
            }
            let mut err2 = 0.0;
            for i in 0..self.n {
                let e = (self.k[0][i] * E1
                    + self.k[2][i] * E3
                    + self.k[3][i] * E4
                    + self.k[4][i] * E5
                    + self.k[5][i] * E6
                    + self.k[6][i] * E7)
                    * h;
                let sc = self.tol.atol + self.tol.rtol * y[i].norm().max(self.y_new[i].norm());
                err2 += (e.norm() / sc).powi(2);
            }
            let err = (err2 / self.n.max(1) as f64).sqrt();
            if err <= 1.0 {
                t = if last { t1 } else { t + h };
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                self.steps += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || fac < 1.0 {
                    self.h = h * fac;
                }
            } else {
                self.rejected += 1;
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
                self.h = h * fac;
                if self.h < self.tol.h_min * span.abs().max(1.0) {
                    return Err(QnetError::Stiffness(format!(
                        "step size {:.3e} underflow at t = {t:e} (error norm {err:.3e})",
                        self.h
                    )));
                }
            }
        }
        Ok(())
    }

    /// Invalidate cached derivative after an external change of `y`.
    pub fn reset(&mut self) {
        self.fsal = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let lam = C64::new(-0.7, 3.0);
        let mut integ = Integrator::new(1, |_, y: &[C64], dy: &mut [C64]| dy[0] = lam * y[0], Tolerances::default());
        let mut y = vec![C64::new(1.0, 0.0)];
        integ.integrate(0.0, 5.0, &mut y).unwrap();
        let want = (lam * 5.0).exp();
        assert!((y[0] - want).norm() < 1e-8);
    }

    #[test]
    fn zero_generator_is_constant() {
        let mut integ = Integrator::new(2, |_, _: &[C64], dy: &mut [C64]| dy.fill(C64::new(0.0, 0.0)), Tolerances::default());
        let mut y = vec![C64::new(0.3, 0.1), C64::new(-1.0, 2.0)];
        let y0 = y.clone();
        integ.integrate(0.0, 10.0, &mut y).unwrap();
        assert_eq!(y, y0);
    }

    #[test]
    fn hits_intermediate_times_exactly() {
        let mut integ = Integrator::new(1, |t, _: &[C64], dy: &mut [C64]| dy[0] = C64::new(t, 0.0), Tolerances::default());
        let mut y = vec![C64::new(0.0, 0.0)];
        for k in 1..=4 {
            integ.integrate((k - 1) as f64 * 0.5, k as f64 * 0.5, &mut y).unwrap();
            let t = k as f64 * 0.5;
            assert!((y[0].re - 0.5 * t * t).abs() < 1e-12);
        }
    }
}
