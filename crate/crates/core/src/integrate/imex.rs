//! Implicit–explicit theta-method for the semi-discrete system.
//!
//! The velocity and temperature are advanced implicitly together (viscous
//! damping, heat conduction and the thermal coupling), while the delayed
//! stress `alpha z(., 1)` is explicit, taken as the theta-average of its
//! values at the two time levels from the delay pipeline. The displacement
//! follows from the same theta-average of the velocity.

use crate::banded::{BandedLu, BandedMatrix};
use crate::delay::{advance_transport, advance_transport_implicit, courant, DelayMode, HistoryBuffer};
use crate::discretization::{build_operators, Grid, Operators, State};
use crate::error::{Error, Result};
use crate::params::PhysParams;

/// Factored implicit `(v, theta)` operator for one `(dt, theta_weight)`.
///
/// Unknowns are interleaved as `theta_0, v_0, theta_1, v_1, ..., theta_nx`,
/// which makes the system pentadiagonal.
#[derive(Debug, Clone)]
pub struct ImplicitFactor {
    pub grid: Grid,
    pub params: PhysParams,
    pub dt: f64,
    pub theta_weight: f64,
    pub ops: Operators,
    matrix: BandedMatrix<f64>,
    lu: BandedLu<f64>,
}

fn v_index(a: usize) -> usize {
    2 * a + 1
}

fn theta_index(j: usize) -> usize {
    2 * j
}

pub fn factor_implicit(grid: &Grid, p: &PhysParams, dt: f64, theta_weight: f64) -> Result<ImplicitFactor> {
    p.validate_model()?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter { name: "dt", reason: format!("must be finite and > 0, got {dt}") });
    }
    if !(0.5..=1.0).contains(&theta_weight) {
        return Err(Error::InvalidParameter {
            name: "theta_weight",
            reason: format!("must lie in [1/2, 1], got {theta_weight}"),
        });
    }
    let ops = build_operators(grid, p.theta_bc)?;
    let n = 2 * grid.nx() + 1;
    let w = dt * theta_weight;
    let mut m = BandedMatrix::zeros(n, 2, 2);
    for k in 0..n {
        m.add_to(k, k, 1.0);
    }
    for (r, c, x) in ops.lap_u.triplets() {
        m.add_to(v_index(r), v_index(c), -w * p.beta * x);
    }
    // v-row: + gamma G^T theta = - gamma div_flux theta.
    for (a, j, x) in ops.div_flux.triplets() {
        m.add_to(v_index(a), theta_index(j), w * p.gamma * x);
    }
    for (j, a, x) in ops.grad_u.triplets() {
        m.add_to(theta_index(j), v_index(a), w * p.gamma * x);
    }
    for (r, c, x) in ops.lap_theta.triplets() {
        m.add_to(theta_index(r), theta_index(c), -w * p.kappa * x);
    }
    let lu = m.clone().factor()?;
    Ok(ImplicitFactor { grid: *grid, params: *p, dt, theta_weight, ops, matrix: m, lu })
}

impl ImplicitFactor {
    fn interleave(v: &[f64], theta: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; v.len() + theta.len()];
        for (a, &val) in v.iter().enumerate() {
            x[v_index(a)] = val;
        }
        for (j, &val) in theta.iter().enumerate() {
            x[theta_index(j)] = val;
        }
        x
    }

    fn split(x: &[f64], nx: usize) -> (Vec<f64>, Vec<f64>) {
        ((0..nx).map(|a| x[v_index(a)]).collect(), (0..=nx).map(|j| x[theta_index(j)]).collect())
    }

    /// Solve the implicit system for right-hand sides given per block.
    pub fn solve(&self, rhs_v: &[f64], rhs_theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut x = Self::interleave(rhs_v, rhs_theta);
        self.lu.solve_in_place(&mut x);
        Self::split(&x, self.grid.nx())
    }

    /// Apply the (unfactored) implicit operator.
    pub fn apply(&self, v: &[f64], theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let y = self.matrix.mul_vec(&Self::interleave(v, theta));
        Self::split(&y, self.grid.nx())
    }
}

/// Delay pipeline carried alongside the state.
#[derive(Debug, Clone)]
pub enum DelayState {
    Ring(HistoryBuffer),
    Transport,
    TransportImplicit,
}

impl DelayState {
    pub fn mode(&self) -> DelayMode {
        match self {
            Self::Ring(_) => DelayMode::Ring,
            Self::Transport => DelayMode::Transport,
            Self::TransportImplicit => DelayMode::TransportImplicit,
        }
    }

    /// Build the pipeline for `mode`, checking step-size compatibility.
    /// In ring mode the buffer is filled from the state's history field.
    pub fn new(mode: DelayMode, state: &State, grid: &Grid, tau: f64, dt: f64) -> Result<Self> {
        let nrho = grid.nrho();
        match mode {
            DelayMode::Ring => {
                let mut ring = HistoryBuffer::new(grid, tau);
                let lock = ring.dt_lock();
                if (dt - lock).abs() > 1e-12 * lock {
                    return Err(Error::Domain(format!("ring-buffer delay needs dt = tau/nrho = {lock}, got {dt}")));
                }
                for i in (0..=nrho).rev() {
                    ring.push(&state.z_slice(i));
                }
                Ok(Self::Ring(ring))
            }
            DelayMode::Transport => {
                let c = courant(dt, tau, nrho);
                if c > 1.0 + 1e-12 {
                    return Err(Error::Cfl { courant: c });
                }
                Ok(Self::Transport)
            }
            DelayMode::TransportImplicit => Ok(Self::TransportImplicit),
        }
    }
}

fn axpy_into(out: &mut [f64], s: f64, x: &[f64]) {
    out.iter_mut().zip(x).for_each(|(o, xi)| *o += s * xi);
}

/// Advance `state` by one step of size `factored.dt`.
///
/// `time` is the time at the start of the step, used only for diagnostics.
pub fn step_imex(state: &mut State, factored: &ImplicitFactor, delay: &mut DelayState, time: f64) -> Result<()> {
    let grid = &factored.grid;
    let p = &factored.params;
    let ops = &factored.ops;
    let (dt, th) = (factored.dt, factored.theta_weight);
    let (nx, nrho) = (grid.nx(), grid.nrho());
    let dx = grid.dx();

    let ux_old = state.strain(grid);
    let z_old = read_delayed(&state.z, nrho);
    let z_new = match delay {
        DelayState::Ring(ring) => ring.lagged(nrho - 1)?.to_vec(),
        DelayState::Transport => {
            let c = courant(dt, p.tau, nrho);
            state.z.chunks_exact(nrho + 1).map(|col| col[nrho] - c * (col[nrho] - col[nrho - 1])).collect()
        }
        DelayState::TransportImplicit => {
            let mut predicted_u = state.u.clone();
            axpy_into(&mut predicted_u, dt, &state.v);
            let inflow = crate::discretization::operators::strain(&predicted_u, dx);
            let mut z = state.z.clone();
            advance_transport_implicit(&mut z, &ux_old, &inflow, dt, p.tau, th);
            read_delayed(&z, nrho)
        }
    };
    let z_avg: Vec<f64> = z_old.iter().zip(&z_new).map(|(a, b)| th * b + (1.0 - th) * a).collect();

    // Explicit right-hand sides.
    let ex = dt * (1.0 - th);
    let mut rhs_v = state.v.clone();
    axpy_into(&mut rhs_v, dt * p.alpha, &ops.div_flux.mul_vec(&z_avg));
    if ex > 0.0 {
        axpy_into(&mut rhs_v, ex * p.beta, &ops.lap_u.mul_vec(&state.v));
        axpy_into(&mut rhs_v, -ex * p.gamma, &ops.div_flux.mul_vec(&state.theta));
    }
    let mut rhs_theta = state.theta.clone();
    if ex > 0.0 {
        axpy_into(&mut rhs_theta, -ex * p.gamma, &ops.grad_u.mul_vec(&state.v));
        axpy_into(&mut rhs_theta, ex * p.kappa, &ops.lap_theta.mul_vec(&state.theta));
    }
    let (v_new, theta_new) = factored.solve(&rhs_v, &rhs_theta);

    for a in 0..nx {
        state.u[a] += dt * (th * v_new[a] + (1.0 - th) * state.v[a]);
    }
    state.v = v_new;
    state.theta = theta_new;
    let ux_new = state.strain(grid);

    match delay {
        DelayState::Ring(ring) => {
            ring.push(&ux_new);
            ring.write_field(&mut state.z)?;
        }
        DelayState::Transport => advance_transport(&mut state.z, &ux_new, dt, p.tau)?,
        DelayState::TransportImplicit => advance_transport_implicit(&mut state.z, &ux_old, &ux_new, dt, p.tau, th),
    }

    let t_new = time + dt;
    for (what, block) in [("u", &state.u), ("v", &state.v), ("theta", &state.theta), ("z", &state.z)] {
        if block.iter().any(|x| !x.is_finite()) {
            return Err(Error::BlowUp { time: t_new, what: what.to_string() });
        }
    }
    Ok(())
}

fn read_delayed(z: &[f64], nrho: usize) -> Vec<f64> {
    crate::delay::read_delayed(z, nrho)
}

/// Theta-method stepper with a backward-Euler first step.
#[derive(Debug, Clone)]
pub struct Stepper {
    main: ImplicitFactor,
    startup: Option<ImplicitFactor>,
    pub delay: DelayState,
    pub time: f64,
    pub steps: u64,
}

impl Stepper {
    /// `startup_backward_euler` replaces the first step by a backward-Euler
    /// step of the same size (ignored when `theta_weight` is already 1).
    pub fn new(
        grid: &Grid,
        p: &PhysParams,
        dt: f64,
        theta_weight: f64,
        mode: DelayMode,
        state: &State,
        startup_backward_euler: bool,
    ) -> Result<Self> {
        let main = factor_implicit(grid, p, dt, theta_weight)?;
        let startup =
            if startup_backward_euler && theta_weight < 1.0 { Some(factor_implicit(grid, p, dt, 1.0)?) } else { None };
        let delay = DelayState::new(mode, state, grid, p.tau, dt)?;
        Ok(Self { main, startup, delay, time: 0.0, steps: 0 })
    }

    pub fn dt(&self) -> f64 {
        self.main.dt
    }

    pub fn step(&mut self, state: &mut State) -> Result<()> {
        let f = match (&self.startup, self.steps) {
            (Some(be), 0) => be,
            _ => &self.main,
        };
        step_imex(state, f, &mut self.delay, self.time)?;
        self.steps += 1;
        self.time = self.steps as f64 * self.main.dt;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ThetaBc;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn undamped_uncoupled_operator_is_identity() {
        let g = Grid::new(6, 3, 1.0).unwrap();
        let p = PhysParams { beta: 0.0, kappa: 0.0, gamma: 0.0, ..PhysParams::default() };
        let f = factor_implicit(&g, &p, 0.1, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (v, th) = (random_vec(6, &mut rng), random_vec(7, &mut rng));
        assert_eq!(f.solve(&v, &th), (v, th));
    }

    #[test]
    fn solve_residual_is_small_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for bc in [ThetaBc::Neumann, ThetaBc::Dirichlet] {
            let g = Grid::new(40, 3, 1.0).unwrap();
            let p = PhysParams { beta: 5.0, gamma: 2.0, kappa: 0.3, theta_bc: bc, ..PhysParams::default() };
            let f = factor_implicit(&g, &p, 0.01, 0.5).unwrap();
            let (rv, rt) = (random_vec(40, &mut rng), random_vec(41, &mut rng));
            let (v, th) = f.solve(&rv, &rt);
            let (av, at) = f.apply(&v, &th);
            let res = av.iter().zip(&rv).chain(at.iter().zip(&rt)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(res < 1e-12, "{res}");
            let again = factor_implicit(&g, &p, 0.01, 0.5).unwrap();
            assert_eq!(again.solve(&rv, &rt), (v, th));
        }
    }

    #[test]
    fn bad_step_parameters_are_rejected() {
        let g = Grid::new(6, 3, 1.0).unwrap();
        let p = PhysParams::default();
        assert!(factor_implicit(&g, &p, 0.0, 0.5).is_err());
        assert!(factor_implicit(&g, &p, 0.1, 0.3).is_err());
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = Grid::new(6, 4, 1.0).unwrap();
        let p = PhysParams::default();
        let mut s = State::zeros(&g);
        let mut st = Stepper::new(&g, &p, 0.25, 0.5, DelayMode::Ring, &s, true).unwrap();
        for _ in 0..20 {
            st.step(&mut s).unwrap();
        }
        assert!(s.is_zero());
    }

    #[test]
    fn decoupled_temperature_is_pure_heat_flow() {
        let g = Grid::new(10, 4, 1.0).unwrap();
        let p = PhysParams { gamma: 0.0, kappa: 0.7, ..PhysParams::default() };
        let mut s = State::zeros(&g);
        s.u.iter_mut().enumerate().for_each(|(a, u)| *u = (0.3 * a as f64).sin());
        s.sync_history_inflow(&g);
        for i in 1..=g.nrho() {
            let slice = s.z_slice(0);
            s.set_z_slice(i, &slice);
        }
        s.theta.iter_mut().enumerate().for_each(|(j, t)| *t = 1.0 + (j as f64).cos());
        let mass0: f64 = s.theta.iter().sum();
        let mut heat_only = s.theta.clone();
        let ops = build_operators(&g, ThetaBc::Neumann).unwrap();
        let dt = 0.25;
        let mut st = Stepper::new(&g, &p, dt, 0.5, DelayMode::Ring, &s, false).unwrap();
        // Independent Crank–Nicolson heat step via dense solve.
        let n = g.ncells();
        let l = ops.lap_theta.to_dense();
        let lhs = faer::Mat::from_fn(n, n, |i, j| (i == j) as u8 as f64 - 0.5 * dt * p.kappa * l[(i, j)]);
        use faer::linalg::solvers::Solve;
        let lu = lhs.partial_piv_lu();
        for _ in 0..10 {
            st.step(&mut s).unwrap();
            let lt = ops.lap_theta.mul_vec(&heat_only);
            let rhs = faer::Mat::from_fn(n, 1, |i, _| heat_only[i] + 0.5 * dt * p.kappa * lt[i]);
            let x = lu.solve(&rhs);
            heat_only = (0..n).map(|i| x[(i, 0)]).collect();
        }
        for (a, b) in s.theta.iter().zip(&heat_only) {
            assert!((a - b).abs() < 1e-13);
        }
        let mass: f64 = s.theta.iter().sum();
        assert!((mass - mass0).abs() < 1e-13 * mass0.abs());
    }

    #[test]
    fn ring_needs_locked_step() {
        let g = Grid::new(6, 4, 1.0).unwrap();
        let s = State::zeros(&g);
        let err = Stepper::new(&g, &PhysParams::default(), 0.2, 0.5, DelayMode::Ring, &s, true);
        assert!(err.is_err());
        let err = Stepper::new(&g, &PhysParams::default(), 0.5, 0.5, DelayMode::Transport, &s, true);
        assert!(matches!(err, Err(Error::Cfl { .. })));
    }

    #[test]
    fn delay_modes_agree_at_unit_courant_number() {
        let g = Grid::new(8, 4, 1.0).unwrap();
        let p = PhysParams { beta: 2.0, ..PhysParams::default() };
        let mut s = State::zeros(&g);
        s.u.iter_mut().enumerate().for_each(|(a, u)| *u = (0.4 * a as f64).sin());
        s.sync_history_inflow(&g);
        let mut a = s.clone();
        let mut b = s.clone();
        let mut ring = Stepper::new(&g, &p, 0.25, 0.5, DelayMode::Ring, &s, true).unwrap();
        let mut tr = Stepper::new(&g, &p, 0.25, 0.5, DelayMode::Transport, &s, true).unwrap();
        for _ in 0..12 {
            ring.step(&mut a).unwrap();
            tr.step(&mut b).unwrap();
        }
        let d = a.pack().iter().zip(b.pack()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-13, "{d}");
    }

    #[test]
    fn blow_up_is_detected() {
        let g = Grid::new(6, 4, 1.0).unwrap();
        let mut s = State::zeros(&g);
        s.v[2] = f64::NAN;
        let mut st = Stepper::new(&g, &PhysParams::default(), 0.25, 0.5, DelayMode::Ring, &s, true).unwrap();
        assert!(matches!(st.step(&mut s), Err(Error::BlowUp { .. })));
    }
}
