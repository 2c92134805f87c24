//! The delayed strain `u_x(., t - tau)`, kept both as the transported
//! history field `z(x, rho, t)` and as an exact ring buffer of past strains.
//!
//! The history field is stored like [`State::z`](crate::discretization::State):
//! row-major in `x`, `z[j * (nrho + 1) + i]`.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::discretization::Grid;
use crate::error::{Error, Result};

/// How the delayed strain is advanced in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayMode {
    /// Exact ring buffer; requires `dt = tau / nrho`.
    #[default]
    Ring,
    /// Explicit first-order upwind transport in `rho`; requires CFL <= 1.
    Transport,
    /// Theta-method upwind transport in `rho`; unconditionally stable.
    TransportImplicit,
}

impl FromStr for DelayMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ring" => Ok(Self::Ring),
            "transport" => Ok(Self::Transport),
            "transport_implicit" => Ok(Self::TransportImplicit),
            other => Err(Error::Domain(format!(
                "unknown delay mode '{other}' (expected ring, transport or transport_implicit)"
            ))),
        }
    }
}

impl fmt::Display for DelayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ring => "ring",
            Self::Transport => "transport",
            Self::TransportImplicit => "transport_implicit",
        })
    }
}

/// Ring of the last `nrho + 1` strain snapshots, oldest first.
///
/// With `dt = tau / nrho` the oldest snapshot is exactly the strain one
/// delay ago, and the snapshot `k` steps back is `z(., rho = k / nrho)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBuffer {
    snapshots: VecDeque<Vec<f64>>,
    capacity: usize,
    dt_lock: f64,
}

impl HistoryBuffer {
    pub fn new(grid: &Grid, tau: f64) -> Self {
        Self {
            snapshots: VecDeque::with_capacity(grid.nrho_nodes()),
            capacity: grid.nrho_nodes(),
            dt_lock: tau / grid.nrho() as f64,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.snapshots.len() == self.capacity
    }

    /// Step size for which reading the tail is exact.
    pub fn dt_lock(&self) -> f64 {
        self.dt_lock
    }

    /// Append the newest snapshot, discarding the oldest when full.
    pub fn push(&mut self, ux: &[f64]) {
        if self.is_full() {
            let mut recycled = self.snapshots.pop_front().expect("full buffer");
            recycled.copy_from_slice(ux);
            self.snapshots.push_back(recycled);
        } else {
            self.snapshots.push_back(ux.to_vec());
        }
    }

    /// Snapshot recorded `lag` pushes before the newest one.
    pub fn lagged(&self, lag: usize) -> Result<&[f64]> {
        if !self.is_full() {
            return Err(Error::Uninitialized);
        }
        if lag >= self.capacity {
            return Err(Error::Domain(format!("lag {lag} exceeds history length {}", self.capacity - 1)));
        }
        Ok(&self.snapshots[self.capacity - 1 - lag])
    }

    /// The strain one delay ago.
    pub fn delayed(&self) -> Result<&[f64]> {
        self.lagged(self.capacity - 1)
    }

    /// Write the buffer into a history field: `z(., rho_i)` is the snapshot
    /// `i` steps back.
    pub fn write_field(&self, z: &mut [f64]) -> Result<()> {
        let n = self.capacity;
        for i in 0..n {
            let snap = self.lagged(i)?;
            for (j, &val) in snap.iter().enumerate() {
                z[j * n + i] = val;
            }
        }
        Ok(())
    }
}

/// Sample a history datum `f0(x, s)`, `s in [-tau, 0]`, on the grid.
///
/// Returns the history field `z(x_j, rho_i) = f0(x_j, -tau rho_i)` and a
/// ring buffer holding the same samples in time order.
pub fn init_history<F>(f0: F, grid: &Grid, tau: f64) -> Result<(Vec<f64>, HistoryBuffer)>
where
    F: Fn(f64, f64) -> f64,
{
    let (nc, nn) = (grid.ncells(), grid.nrho_nodes());
    let mut z = vec![0.0; nc * nn];
    for j in 0..nc {
        let x = grid.cell_x(j);
        for i in 0..nn {
            let s = -tau * grid.rho(i);
            let val = f0(x, s);
            if !val.is_finite() {
                return Err(Error::NonSampleable { x, s });
            }
            z[j * nn + i] = val;
        }
    }
    let mut ring = HistoryBuffer::new(grid, tau);
    for i in (0..nn).rev() {
        let snap: Vec<f64> = (0..nc).map(|j| z[j * nn + i]).collect();
        ring.push(&snap);
    }
    Ok((z, ring))
}

/// Largest deviation between the `rho = 0` slice of `z` and the strain of
/// the initial displacement; logs a warning above `tol`.
pub fn check_inflow_consistency(z: &[f64], ux: &[f64], nrho: usize, tol: f64) -> f64 {
    let dev = ux.iter().enumerate().map(|(j, &u)| (z[j * (nrho + 1)] - u).abs()).fold(0.0, f64::max);
    let scale = ux.iter().fold(1.0_f64, |m, u| m.max(u.abs()));
    if dev > tol * scale {
        log::warn!("history at s = 0 differs from the initial strain by {dev:.3e}; using the strain as inflow");
    }
    dev
}

/// Slice `z(., 1)`.
pub fn read_delayed(z: &[f64], nrho: usize) -> Vec<f64> {
    z.chunks_exact(nrho + 1).map(|col| col[nrho]).collect()
}

/// Courant number `dt / (tau drho)` of the transport.
pub fn courant(dt: f64, tau: f64, nrho: usize) -> f64 {
    dt * nrho as f64 / tau
}

/// One explicit upwind step of `tau z_t + z_rho = 0` with inflow
/// `z(., 0) = current_ux`.
pub fn advance_transport(z: &mut [f64], current_ux: &[f64], dt: f64, tau: f64) -> Result<()> {
    let nrho = z.len() / current_ux.len() - 1;
    let c = courant(dt, tau, nrho);
    if c > 1.0 + 1e-12 {
        return Err(Error::Cfl { courant: c });
    }
    for (col, &inflow) in z.chunks_exact_mut(nrho + 1).zip(current_ux) {
        for i in (1..=nrho).rev() {
            col[i] = if c == 1.0 { col[i - 1] } else { col[i] - c * (col[i] - col[i - 1]) };
        }
        col[0] = inflow;
    }
    Ok(())
}

/// One theta-method step of the upwind transport, given the inflow at the
/// new time. `theta_weight = 1` is backward Euler, `1/2` Crank–Nicolson.
pub fn advance_transport_implicit(
    z: &mut [f64],
    old_inflow: &[f64],
    new_inflow: &[f64],
    dt: f64,
    tau: f64,
    theta_weight: f64,
) {
    let nrho = z.len() / new_inflow.len() - 1;
    let c = courant(dt, tau, nrho);
    let (ci, ce) = (c * theta_weight, c * (1.0 - theta_weight));
    for ((col, &a), &b) in z.chunks_exact_mut(nrho + 1).zip(old_inflow).zip(new_inflow) {
        let mut prev_old = a;
        let mut prev_new = b;
        for zi in col.iter_mut().skip(1) {
            let old = *zi;
            let new = (old - ce * (old - prev_old) + ci * prev_new) / (1.0 + ci);
            prev_old = old;
            prev_new = new;
            *zi = new;
        }
        col[0] = b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_history_is_zero() {
        let g = Grid::new(5, 4, 1.0).unwrap();
        let (z, ring) = init_history(|_, _| 0.0, &g, 1.0).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        assert!(ring.delayed().unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_history_has_identical_slices() {
        let g = Grid::new(5, 4, 1.0).unwrap();
        let (z, _) = init_history(|x, _| x * x, &g, 0.5).unwrap();
        for col in z.chunks_exact(5) {
            assert!(col.iter().all(|&v| v == col[0]));
        }
    }

    #[test]
    fn separable_history_is_sampled_exactly() {
        let (ell, tau) = (2.0, 0.7);
        let g = Grid::new(8, 5, ell).unwrap();
        let (z, ring) = init_history(|x, s| (PI * x / ell).sin() * s.exp(), &g, tau).unwrap();
        let tail = read_delayed(&z, g.nrho());
        for (j, &v) in tail.iter().enumerate() {
            let expected = (-tau).exp() * (PI * g.cell_x(j) / ell).sin();
            assert!((v - expected).abs() < 1e-15);
        }
        assert_eq!(ring.delayed().unwrap(), tail.as_slice());
    }

    #[test]
    fn non_finite_history_is_rejected() {
        let g = Grid::new(5, 4, 1.0).unwrap();
        assert!(matches!(init_history(|_, s| 1.0 / s, &g, 1.0), Err(Error::NonSampleable { .. })));
    }

    #[test]
    fn uninitialized_ring_is_reported() {
        let g = Grid::new(5, 4, 1.0).unwrap();
        let ring = HistoryBuffer::new(&g, 1.0);
        assert!(matches!(ring.delayed(), Err(Error::Uninitialized)));
    }

    #[test]
    fn ring_returns_strain_from_nrho_steps_ago() {
        let g = Grid::new(3, 4, 1.0).unwrap();
        let (_, mut ring) = init_history(|_, _| 0.0, &g, 1.0).unwrap();
        for step in 1..=20 {
            ring.push(&[step as f64; 4]);
            let expected = if step >= 4 { (step - 4) as f64 } else { 0.0 };
            assert_eq!(ring.delayed().unwrap(), &[expected; 4]);
        }
    }

    #[test]
    fn unit_cfl_transport_is_a_shift_and_matches_ring() {
        let g = Grid::new(4, 6, 1.0).unwrap();
        let tau = 1.5;
        let (mut z, mut ring) = init_history(|x, s| (3.0 * x + s).sin(), &g, tau).unwrap();
        let dt = ring.dt_lock();
        for step in 0..15 {
            let ux: Vec<f64> = (0..g.ncells()).map(|j| (j as f64 + step as f64).cos()).collect();
            let before = z.clone();
            advance_transport(&mut z, &ux, dt, tau).unwrap();
            ring.push(&ux);
            for j in 0..g.ncells() {
                for i in 1..=g.nrho() {
                    assert_eq!(z[j * 7 + i], before[j * 7 + i - 1]);
                }
            }
            let mut field = vec![0.0; z.len()];
            ring.write_field(&mut field).unwrap();
            assert_eq!(field, z);
        }
    }

    #[test]
    fn constant_profile_is_preserved() {
        let g = Grid::new(4, 8, 1.0).unwrap();
        let mut z = vec![2.5; g.ncells() * g.nrho_nodes()];
        let ux = vec![2.5; g.ncells()];
        advance_transport(&mut z, &ux, 0.05, 1.0).unwrap();
        assert!(z.iter().all(|&v| (v - 2.5).abs() < 1e-15));
        advance_transport_implicit(&mut z, &ux, &ux, 0.3, 1.0, 0.5);
        assert!(z.iter().all(|&v| (v - 2.5).abs() < 1e-14));
    }

    #[test]
    fn cfl_violation_is_reported() {
        let g = Grid::new(4, 8, 1.0).unwrap();
        let mut z = vec![0.0; g.ncells() * g.nrho_nodes()];
        let err = advance_transport(&mut z, &[0.0; 5], 0.2, 1.0).unwrap_err();
        assert!(matches!(err, Error::Cfl { courant } if (courant - 1.6).abs() < 1e-12));
    }

    /// Transport a smooth pulse with inflow from the exact solution and
    /// return the max error of `z(., 1)` at `t_end`.
    fn transport_error(nrho: usize) -> f64 {
        let tau = 1.0;
        let profile = |t: f64| (2.0 * t).sin() + 0.5 * t.cos();
        let g = Grid::new(3, nrho, 1.0).unwrap();
        let (mut z, _) = init_history(|_, s| profile(s), &g, tau).unwrap();
        let dt = 0.5 * tau / nrho as f64;
        let steps = 2 * nrho;
        for n in 1..=steps {
            let ux = vec![profile(n as f64 * dt); g.ncells()];
            advance_transport(&mut z, &ux, dt, tau).unwrap();
        }
        let exact = profile(steps as f64 * dt - tau);
        read_delayed(&z, nrho).iter().map(|v| (v - exact).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn upwind_is_first_order() {
        let e: Vec<f64> = [32, 64, 128].iter().map(|&n| transport_error(n)).collect();
        for w in e.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 1.0).abs() < 0.2, "order {order}, errors {e:?}");
        }
    }

    #[test]
    fn upwind_is_monotone() {
        let g = Grid::new(3, 10, 1.0).unwrap();
        let mut z: Vec<f64> = (0..g.ncells() * g.nrho_nodes()).map(|k| ((k * 7919) % 13) as f64).collect();
        let ux = vec![6.0; g.ncells()];
        let before = z.clone();
        advance_transport(&mut z, &ux, 0.07, 1.0).unwrap();
        for j in 0..g.ncells() {
            for i in 1..=g.nrho() {
                let (a, b) = (before[j * 11 + i - 1], before[j * 11 + i]);
                let v = z[j * 11 + i];
                assert!(v >= a.min(b) - 1e-14 && v <= a.max(b) + 1e-14);
            }
        }
    }

    #[test]
    fn transport_and_ring_agree_to_first_order() {
        // Smooth strain history driven for several delays.
        let diff = |nrho: usize| {
            let tau = 1.0;
            let g = Grid::new(3, nrho, 1.0).unwrap();
            let f = |t: f64| (1.3 * t).sin();
            let (mut z, mut ring) = init_history(|_, s| f(s), &g, tau).unwrap();
            let dt = 0.5 * ring.dt_lock();
            let mut worst: f64 = 0.0;
            for n in 1..=(6 * nrho) {
                let ux = vec![f(n as f64 * dt); g.ncells()];
                advance_transport(&mut z, &ux, dt, tau).unwrap();
                if n % 2 == 0 {
                    ring.push(&ux);
                    let d = read_delayed(&z, nrho)[0] - ring.delayed().unwrap()[0];
                    worst = worst.max(d.abs());
                }
            }
            worst
        };
        let (a, b) = (diff(16), diff(32));
        assert!(a < 0.1 && (a / b - 2.0).abs() < 0.4, "{a} {b}");
    }

    #[test]
    fn mode_parses() {
        assert_eq!("ring".parse::<DelayMode>().unwrap(), DelayMode::Ring);
        assert_eq!("transport_implicit".parse::<DelayMode>().unwrap(), DelayMode::TransportImplicit);
        assert!("spline".parse::<DelayMode>().is_err());
        assert_eq!(DelayMode::Transport.to_string(), "transport");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

    /// Explicit upwind transport stays within the range of its stencil.
    #[test]
    fn upwind_transport_is_monotone(values in prop::collection::vec(-10.0..10.0f64, 4 * 7), inflow in prop::collection::vec(-10.0..10.0f64, 4), courant in 0.0..1.0f64) {
        let (nrho, tau) = (6usize, 1.0);
        let dt = courant * tau / nrho as f64;
        let mut z = values.clone();
        advance_transport(&mut z, &inflow, dt, tau).unwrap();
        for j in 0..4 {
            prop_assert_eq!(z[j * 7], inflow[j]);
            for i in 1..=nrho {
                let (a, b) = (values[j * 7 + i - 1], values[j * 7 + i]);
                prop_assert!(z[j * 7 + i] >= a.min(b) - 1e-12 && z[j * 7 + i] <= a.max(b) + 1e-12);
            }
        }
    }
    }
}
