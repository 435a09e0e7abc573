//! Adaptive 4th-order Rosenbrock integrator with banded Jacobians.
//!
//! Uses Shampine's L-stable coefficient set with an embedded 3rd-order error
//! estimate. Jacobians are approximated by forward differences, perturbing
//! `kl + ku + 1` interleaved column groups at once.

use super::band::BandMatrix;
use super::OdeError;

const GAM: f64 = 0.5;
const A21: f64 = 2.0;
const A31: f64 = 48.0 / 25.0;
const A32: f64 = 6.0 / 25.0;
const C21: f64 = -8.0;
const C31: f64 = 372.0 / 25.0;
const C32: f64 = 12.0 / 5.0;
const C41: f64 = -112.0 / 125.0;
const C42: f64 = -54.0 / 125.0;
const C43: f64 = -2.0 / 5.0;
const B1: f64 = 19.0 / 9.0;
const B2: f64 = 0.5;
const B3: f64 = 25.0 / 108.0;
const B4: f64 = 125.0 / 108.0;
const E1: f64 = 17.0 / 54.0;
const E2: f64 = 7.0 / 36.0;
const E3: f64 = 0.0;
const E4: f64 = 125.0 / 108.0;

/// An autonomous system `y' = f(y)` with a banded Jacobian.
pub trait BandedSystem {
    fn n_states(&self) -> usize;
    /// (sub-diagonals, super-diagonals) of the Jacobian.
    fn bandwidth(&self) -> (usize, usize);
    fn rhs(&self, y: &[f64], dy: &mut [f64]);
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
    /// Step size below which the integration is abandoned.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            atol: 1e-8,
            rtol: 1e-6,
            h_min: 1e-12,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub jacobians: usize,
}

impl std::ops::AddAssign for Stats {
    fn add_assign(&mut self, o: Stats) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.rhs_evals += o.rhs_evals;
        self.jacobians += o.jacobians;
    }
}

/// Forward-difference Jacobian with column grouping.
pub fn banded_jacobian<S: BandedSystem + ?Sized>(
    sys: &S,
    y: &[f64],
    f0: &[f64],
    jac: &mut BandMatrix,
    work: &mut [f64],
    fp: &mut [f64],
) -> usize {
    let n = y.len();
    let (kl, ku) = sys.bandwidth();
    let stride = kl + ku + 1;
    let mut evals = 0;
    work.copy_from_slice(y);
    let step = |v: f64| f64::EPSILON.sqrt() * v.abs().max(1e-6);
    for start in 0..stride.min(n) {
        let mut j = start;
        while j < n {
            work[j] = y[j] + step(y[j]);
            j += stride;
        }
        sys.rhs(work, fp);
        evals += 1;
        let mut j = start;
        while j < n {
            let h = work[j] - y[j];
            let lo = j.saturating_sub(ku);
            let hi = (j + kl).min(n - 1);
            for i in lo..=hi {
                jac.set(i, j, (fp[i] - f0[i]) / h);
            }
            work[j] = y[j];
            j += stride;
        }
    }
    evals
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], tol: &Tolerances) -> f64 {
    let n = err.len() as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = tol.atol + tol.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

/// Reusable work buffers for one system size.
pub struct Rosenbrock {
    n: usize,
    f0: Vec<f64>,
    f: Vec<f64>,
    ytmp: Vec<f64>,
    ynew: Vec<f64>,
    g: [Vec<f64>; 4],
    err: Vec<f64>,
    work: Vec<f64>,
    fp: Vec<f64>,
    jac: BandMatrix,
    /// Last accepted step size, reused as the next initial guess.
    pub h: Option<f64>,
}

impl Rosenbrock {
    pub fn new<S: BandedSystem + ?Sized>(sys: &S) -> Self {
        let n = sys.n_states();
        let (kl, ku) = sys.bandwidth();
        let z = || vec![0.0; n];
        Rosenbrock {
            n,
            f0: z(),
            f: z(),
            ytmp: z(),
            ynew: z(),
            g: [z(), z(), z(), z()],
            err: z(),
            work: z(),
            fp: z(),
            jac: BandMatrix::zeros(n, kl, ku),
            h: None,
        }
    }

    /// Integrates `y` from `t0` to `t1` in place. `on_step` is called after
    /// every accepted step with the new time and state; it may modify the
    /// state (e.g. clip small negative values).
    pub fn integrate<S, F>(
        &mut self,
        sys: &S,
        t0: f64,
        t1: f64,
        y: &mut [f64],
        tol: &Tolerances,
        mut on_step: F,
    ) -> Result<Stats, OdeError>
    where
        S: BandedSystem + ?Sized,
        F: FnMut(f64, &mut [f64]),
    {
        assert_eq!(y.len(), self.n);
        let mut stats = Stats::default();
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(stats);
        }
        let mut t = t0;
        let mut h = self.h.unwrap_or(span * 1e-4).min(span);
        let (kl, ku) = sys.bandwidth();
        while t < t1 {
            if stats.accepted + stats.rejected >= tol.max_steps {
                return Err(OdeError::TooManySteps { t });
            }
            let last = t + h >= t1 || t1 - (t + h) < 1e-12 * span;
            if last {
                h = t1 - t;
            }
            sys.rhs(y, &mut self.f0);
            stats.rhs_evals += 1;
            self.jac.fill(0.0);
            stats.rhs_evals += banded_jacobian(
                sys,
                y,
                &self.f0,
                &mut self.jac,
                &mut self.work,
                &mut self.fp,
            );
            stats.jacobians += 1;

            loop {
                let mut a = self.jac.clone();
                debug_assert_eq!((a.kl(), a.ku()), (kl, ku));
                a.shift_scale(1.0 / (GAM * h), 1.0);
                let lu = a.lu().ok_or(OdeError::SingularMatrix { t })?;

                let n = self.n;
                let [g1, g2, g3, g4] = &mut self.g;
                g1.copy_from_slice(&self.f0);
                lu.solve(g1);
                for i in 0..n {
                    self.ytmp[i] = y[i] + A21 * g1[i];
                }
                sys.rhs(&self.ytmp, &mut self.f);
                for i in 0..n {
                    g2[i] = self.f[i] + C21 * g1[i] / h;
                }
                lu.solve(g2);
                for i in 0..n {
                    self.ytmp[i] = y[i] + A31 * g1[i] + A32 * g2[i];
                }
                sys.rhs(&self.ytmp, &mut self.f);
                for i in 0..n {
                    g3[i] = self.f[i] + (C31 * g1[i] + C32 * g2[i]) / h;
                }
                lu.solve(g3);
                for i in 0..n {
                    g4[i] = self.f[i] + (C41 * g1[i] + C42 * g2[i] + C43 * g3[i]) / h;
                }
                lu.solve(g4);
                stats.rhs_evals += 2;
                for i in 0..n {
                    self.ynew[i] = y[i] + B1 * g1[i] + B2 * g2[i] + B3 * g3[i] + B4 * g4[i];
                    self.err[i] = E1 * g1[i] + E2 * g2[i] + E3 * g3[i] + E4 * g4[i];
                }
                let e = error_norm(&self.err, y, &self.ynew, tol);
                if e.is_finite() && e <= 1.0 {
                    t = if h == t1 - t { t1 } else { t + h };
                    y.copy_from_slice(&self.ynew);
                    on_step(t, y);
                    stats.accepted += 1;
                    let fac = if e == 0.0 {
                        5.0
                    } else {
                        (0.9 * e.powf(-0.25)).clamp(0.2, 5.0)
                    };
                    // keep the untruncated step for the next segment
                    if !last {
                        self.h = Some(h * fac);
                    }
                    h = (h * fac).min(t1 - t).max(0.0);
                    break;
                }
                stats.rejected += 1;
                let fac = if e.is_finite() {
                    (0.9 * e.powf(-1.0 / 3.0)).clamp(0.1, 0.5)
                } else {
                    0.1
                };
                h *= fac;
                if h < tol.h_min {
                    return Err(OdeError::StepSizeCollapse { t, h });
                }
            }
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Robertson's chemical kinetics problem (stiff), tridiagonal ordering.
    struct Robertson;
    impl BandedSystem for Robertson {
        fn n_states(&self) -> usize {
            3
        }
        fn bandwidth(&self) -> (usize, usize) {
            (2, 2)
        }
        fn rhs(&self, y: &[f64], dy: &mut [f64]) {
            dy[0] = -0.04 * y[0] + 1e4 * y[1] * y[2];
            dy[2] = 3e7 * y[1] * y[1];
            dy[1] = -dy[0] - dy[2];
        }
    }

    struct Decay(f64);
    impl BandedSystem for Decay {
        fn n_states(&self) -> usize {
            1
        }
        fn bandwidth(&self) -> (usize, usize) {
            (0, 0)
        }
        fn rhs(&self, y: &[f64], dy: &mut [f64]) {
            dy[0] = -self.0 * y[0];
        }
    }

    /// Linear diffusion on a line, to exercise grouping with n > bandwidth.
    struct Heat(usize);
    impl BandedSystem for Heat {
        fn n_states(&self) -> usize {
            self.0
        }
        fn bandwidth(&self) -> (usize, usize) {
            (1, 1)
        }
        fn rhs(&self, y: &[f64], dy: &mut [f64]) {
            let n = self.0;
            for i in 0..n {
                let l = if i > 0 { y[i - 1] } else { 0.0 };
                let r = if i + 1 < n { y[i + 1] } else { 0.0 };
                dy[i] = 100.0 * (l - 2.0 * y[i] + r);
            }
        }
    }

    #[test]
    fn robertson_reference_values() {
        // reference at t = 40 from high-accuracy runs in the stiff test literature
        let mut y = vec![1.0, 0.0, 0.0];
        let tol = Tolerances {
            atol: 1e-10,
            rtol: 1e-8,
            ..Default::default()
        };
        let mut r = Rosenbrock::new(&Robertson);
        r.integrate(&Robertson, 0.0, 40.0, &mut y, &tol, |_, _| {})
            .unwrap();
        assert!((y[0] - 0.7158270687).abs() < 1e-6, "{}", y[0]);
        assert!((y[1] - 9.185534764e-6).abs() < 1e-10, "{}", y[1]);
        assert!((y[0] + y[1] + y[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fourth_order_convergence_at_fixed_steps() {
        // tolerances loose enough that every step is accepted, so the
        // error is controlled by the initial step only
        let run = |h: f64| {
            let sys = Decay(1.0);
            let mut r = Rosenbrock::new(&sys);
            let tol = Tolerances {
                atol: 1e3,
                rtol: 1e3,
                ..Default::default()
            };
            let mut y = vec![1.0];
            let mut t = 0.0;
            while t < 1.0 - 1e-12 {
                r.h = Some(h);
                r.integrate(&sys, t, t + h, &mut y, &tol, |_, _| {})
                    .unwrap();
                t += h;
            }
            (y[0] - (-1.0f64).exp()).abs()
        };
        let e1 = run(0.1);
        let e2 = run(0.05);
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.3, "observed order {order}");
    }

    #[test]
    fn heat_equation_matches_eigen_decay() {
        let n = 20;
        let sys = Heat(n);
        let dx = 1.0 / (n + 1) as f64;
        let mut y: Vec<f64> = (1..=n)
            .map(|i| (std::f64::consts::PI * i as f64 * dx).sin())
            .collect();
        let lambda = 100.0 * 2.0 * ((std::f64::consts::PI * dx).cos() - 1.0);
        let y0 = y.clone();
        let mut r = Rosenbrock::new(&sys);
        r.integrate(&sys, 0.0, 0.01, &mut y, &Tolerances::default(), |_, _| {})
            .unwrap();
        for (a, b) in y.iter().zip(&y0) {
            assert!((a - b * (lambda * 0.01).exp()).abs() < 1e-6);
        }
    }
}
