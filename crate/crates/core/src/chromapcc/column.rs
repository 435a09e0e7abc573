//! Method-of-lines right-hand side for a single column.
//!
//! Each grid node carries four interleaved states `[c, c_p, q1, q2]`.
//! Nodes sit at `x_i = i * L / (N - 1)`; the inlet uses a Danckwerts flux
//! condition through a ghost node and the outlet assumes zero curvature.

use super::kinetics::{adsorption_rhs, lumped_ktot};
use super::params::ColumnParams;

/// Number of states per grid node.
pub const STATES_PER_NODE: usize = 4;

/// Per-node concentrations of one column (mg/ml).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ColumnState {
    pub c: Vec<f64>,
    pub c_p: Vec<f64>,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
}

impl ColumnState {
    pub fn zeros(n: usize) -> Self {
        ColumnState {
            c: vec![0.0; n],
            c_p: vec![0.0; n],
            q1: vec![0.0; n],
            q2: vec![0.0; n],
        }
    }

    pub fn nodes(&self) -> usize {
        self.c.len()
    }

    pub fn from_interleaved(y: &[f64]) -> Self {
        let n = y.len() / STATES_PER_NODE;
        let mut s = Self::zeros(n);
        for i in 0..n {
            s.c[i] = y[4 * i];
            s.c_p[i] = y[4 * i + 1];
            s.q1[i] = y[4 * i + 2];
            s.q2[i] = y[4 * i + 3];
        }
        s
    }

    pub fn to_interleaved(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(STATES_PER_NODE * self.nodes());
        for i in 0..self.nodes() {
            y.extend_from_slice(&[self.c[i], self.c_p[i], self.q1[i], self.q2[i]]);
        }
        y
    }
}

/// Operating conditions of a column during one integration segment.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Flow {
    /// Interstitial velocity (cm/min).
    pub u: f64,
    /// Feed concentration used for the coverage in the pore coefficient.
    pub c_feed: f64,
}

/// Mass-transfer rate constant (1/min) multiplying `c_p - c` per node.
#[inline]
fn exchange_rate(p: &ColumnParams, q1: f64, flow: Flow) -> f64 {
    if flow.u == 0.0 {
        return 0.0;
    }
    let k = lumped_ktot(q1, p, flow.c_feed, flow.u / 60.0).k_tot * 60.0;
    3.0 / p.r_p * k
}

/// Derivatives of all four states of one column, written into `dy`.
/// `y` and `dy` hold `4 * N` interleaved values.
pub(crate) fn column_rhs(p: &ColumnParams, y: &[f64], c_in: f64, flow: Flow, dy: &mut [f64]) {
    let n = y.len() / STATES_PER_NODE;
    let dx = p.length / (n - 1) as f64;
    let d = p.d_ax * 60.0;
    let u = flow.u;
    let phase = (1.0 - p.eps_b) / p.eps_b;
    let solid = (1.0 - p.eps_p) / p.eps_p;
    let c = |i: usize| y[4 * i];
    for i in 0..n {
        let ci = c(i);
        let (left, right) = if i == 0 {
            let ghost = if d > 0.0 {
                c(1) - 2.0 * dx * u / d * (ci - c_in)
            } else {
                c_in
            };
            (ghost, c(1))
        } else if i == n - 1 {
            (c(i - 1), 2.0 * ci - c(i - 1))
        } else {
            (c(i - 1), c(i + 1))
        };
        let transport = if i == 0 && d == 0.0 {
            -u * (ci - c_in) / dx
        } else {
            d * (right - 2.0 * ci + left) / (dx * dx) - u * (right - left) / (2.0 * dx)
        };
        let (cp, q1, q2) = (y[4 * i + 1], y[4 * i + 2], y[4 * i + 3]);
        let k = exchange_rate(p, q1, flow);
        let (dq1, dq2) = adsorption_rhs(cp, q1, q2, p);
        dy[4 * i] = transport + phase * k * (cp - ci);
        dy[4 * i + 1] = k / p.eps_p * (ci - cp) - (dq1 + dq2) * solid;
        dy[4 * i + 2] = dq1;
        dy[4 * i + 3] = dq2;
    }
}

/// Bulk-phase derivatives `dc/dt` at interstitial velocity `velocity`
/// (cm/min) and inlet concentration `c_in`.
pub fn bulk_rhs(
    state: &ColumnState,
    p: &ColumnParams,
    c_in: f64,
    velocity: f64,
    c_feed: f64,
) -> Vec<f64> {
    let y = state.to_interleaved();
    let mut dy = vec![0.0; y.len()];
    column_rhs(
        p,
        &y,
        c_in,
        Flow {
            u: velocity,
            c_feed,
        },
        &mut dy,
    );
    dy.iter().step_by(STATES_PER_NODE).copied().collect()
}

/// Pore-phase derivatives `dc_p/dt`.
pub fn particle_rhs(state: &ColumnState, p: &ColumnParams, velocity: f64, c_feed: f64) -> Vec<f64> {
    let y = state.to_interleaved();
    let mut dy = vec![0.0; y.len()];
    column_rhs(
        p,
        &y,
        0.0,
        Flow {
            u: velocity,
            c_feed,
        },
        &mut dy,
    );
    dy.iter()
        .skip(1)
        .step_by(STATES_PER_NODE)
        .copied()
        .collect()
}

/// Outlet concentration carried downstream: total (advective plus
/// dispersive) flux through the outlet divided by the volumetric flow.
///
/// With the zero-curvature outlet closure the discrete scheme also loses
/// mass through `-D dc/dx`, so using the last node value alone would leak
/// about as much protein as sits in that gradient.
#[inline]
pub(crate) fn outlet_concentration(p: &ColumnParams, y: &[f64], u: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    let n = y.len() / STATES_PER_NODE;
    let dx = p.length / (n - 1) as f64;
    let (last, prev) = (y[4 * (n - 1)], y[4 * (n - 2)]);
    last - p.d_ax * 60.0 / u * (last - prev) / dx
}

/// Total protein held in the column (mg), trapezoidal in x.
pub fn inventory(p: &ColumnParams, y: &[f64]) -> f64 {
    let n = y.len() / STATES_PER_NODE;
    let dx = p.length / (n - 1) as f64;
    let mut total = 0.0;
    for i in 0..n {
        let (c, cp, q1, q2) = (y[4 * i], y[4 * i + 1], y[4 * i + 2], y[4 * i + 3]);
        let local = p.eps_b * c + (1.0 - p.eps_b) * (p.eps_p * cp + (1.0 - p.eps_p) * (q1 + q2));
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        total += w * local;
    }
    total * dx * p.area()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chromapcc::kinetics::equilibrium_loading;

    fn params() -> ColumnParams {
        ColumnParams::uncalibrated_default()
    }

    #[test]
    fn uniform_equilibrium_state_is_stationary() {
        let p = params();
        let n = p.n_nodes;
        let (q1, q2) = equilibrium_loading(0.3, &p);
        let s = ColumnState {
            c: vec![0.3; n],
            c_p: vec![0.3; n],
            q1: vec![q1; n],
            q2: vec![q2; n],
        };
        for v in bulk_rhs(&s, &p, 0.3, 0.0, 0.4) {
            assert_eq!(v, 0.0);
        }
        for v in particle_rhs(&s, &p, 0.0, 0.4) {
            assert!(v.abs() < 1e-12);
        }
        // the same state under flow with matching inlet is still stationary
        for v in bulk_rhs(&s, &p, 0.3, 10.0, 0.4) {
            assert!(v.abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn pure_advection_of_linear_profile() {
        let mut p = params();
        p.d_ax = 0.0;
        let n = p.n_nodes;
        let dx = p.length / (n - 1) as f64;
        let slope = 0.01;
        let c: Vec<f64> = (0..n).map(|i| 0.1 + slope * i as f64 * dx).collect();
        // c_p = c removes the exchange term
        let s = ColumnState {
            c: c.clone(),
            c_p: c,
            q1: vec![0.0; n],
            q2: vec![0.0; n],
        };
        let u = 12.0;
        let d = bulk_rhs(&s, &p, 0.1, u, 0.4);
        for v in &d[1..] {
            assert!((v + u * slope).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn exchange_pushes_pore_towards_bulk() {
        let p = params();
        let n = p.n_nodes;
        let mut p0 = p.clone();
        // freeze adsorption
        p0.k_a1 = 1e-300;
        p0.k_a2 = 1e-300;
        let s = ColumnState {
            c: vec![0.5; n],
            c_p: vec![0.1; n],
            q1: vec![0.0; n],
            q2: vec![0.0; n],
        };
        let u = 10.0;
        let dp = particle_rhs(&s, &p0, u, 0.4);
        let k = lumped_ktot(0.0, &p0, 0.4, u / 60.0).k_tot * 60.0;
        let expected = 3.0 / p0.r_p * k / p0.eps_p * 0.4;
        for v in dp {
            assert!((v - expected).abs() < 1e-9 * expected);
        }
    }

    #[test]
    fn random_state_matches_independent_stencil() {
        use rand::{Rng, SeedableRng};
        let p = params();
        let n = 12;
        let p = p.with_nodes(n);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut s = ColumnState::zeros(n);
        for i in 0..n {
            s.c[i] = rng.gen_range(0.0..1.0);
            s.c_p[i] = rng.gen_range(0.0..1.0);
            s.q1[i] = rng.gen_range(0.0..20.0);
            s.q2[i] = rng.gen_range(0.0..s.q1[i]);
        }
        let (u, c_in, c_feed) = (9.0, 0.45, 0.4);
        let got = bulk_rhs(&s, &p, c_in, u, c_feed);
        // stencil rebuilt from the PDE with explicit ghost values
        let dx = p.length / (n - 1) as f64;
        let dax = p.d_ax * 60.0;
        let mut ext = vec![0.0; n + 2];
        ext[1..=n].copy_from_slice(&s.c);
        ext[0] = s.c[1] - 2.0 * dx * u / dax * (s.c[0] - c_in);
        ext[n + 1] = 2.0 * s.c[n - 1] - s.c[n - 2];
        for i in 0..n {
            let alpha = (s.q1[i] / p.q_max * (1.0 / p.k_a + c_feed) / c_feed).min(1.0);
            let kf = p.d_m / (2.0 * p.r_p) * 1.09 / p.eps_b
                * (2.0 * (u / 60.0) * p.r_p / p.d_m).powf(1.0 / 3.0);
            let r = (1.0 - alpha).powf(1.0 / 3.0);
            let ks = p.eps_p * p.d_p / p.r_p * r / (1.0 - r);
            let ktot = 60.0 / (1.0 / kf + 1.0 / ks);
            let expected = dax * (ext[i + 2] - 2.0 * ext[i + 1] + ext[i]) / (dx * dx)
                - u * (ext[i + 2] - ext[i]) / (2.0 * dx)
                + (1.0 - p.eps_b) / p.eps_b * 3.0 / p.r_p * ktot * (s.c_p[i] - s.c[i]);
            assert!(
                (got[i] - expected).abs() < 1e-9 * expected.abs().max(1.0),
                "{i}"
            );
        }
    }

    #[test]
    fn inventory_of_uniform_column() {
        let p = params();
        let n = p.n_nodes;
        let s = ColumnState {
            c: vec![1.0; n],
            c_p: vec![1.0; n],
            q1: vec![0.0; n],
            q2: vec![0.0; n],
        };
        let expected = p.column_volume() * (p.eps_b + (1.0 - p.eps_b) * p.eps_p);
        let got = inventory(&p, &s.to_interleaved());
        assert!((got - expected).abs() < 1e-12 * expected);
    }
}
