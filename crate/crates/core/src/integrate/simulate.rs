//! Trajectory driver: initial-data presets, the stepping loop and the
//! recording of observables.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constants::{lyapunov_constants, LyapunovConstants, LyapunovOptions};
use crate::delay::{check_inflow_consistency, init_history, DelayMode};
use crate::discretization::{Grid, State};
use crate::error::{Error, Result};
use crate::integrate::imex::Stepper;
use crate::observables::{energy, theta_mass, LyapunovQuadrature, LyapunovTerms, Trajectory};
use crate::params::{PhysParams, ThetaBc};

fn parse_mode_arg(s: &str, name: &str) -> Option<Result<u32>> {
    let rest = s.strip_prefix(name)?;
    let inner = rest.strip_prefix('(').and_then(|r| r.strip_suffix(')'));
    Some(match inner {
        Some(n) => n
            .trim()
            .parse::<u32>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::Domain(format!("bad mode number in '{s}'"))),
        None if rest.is_empty() => Ok(1),
        None => Err(Error::Domain(format!("cannot parse '{s}'"))),
    })
}

/// Initial displacement or velocity profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfilePreset {
    /// `sin(n pi x / ell)`
    Sine(u32),
    /// Smooth compactly supported bump centered at `ell / 2`, height 1.
    Bump,
    Zero,
}

impl FromStr for ProfilePreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if let Some(n) = parse_mode_arg(&s, "sine") {
            return n.map(Self::Sine);
        }
        match s.as_str() {
            "bump" => Ok(Self::Bump),
            "zero" => Ok(Self::Zero),
            _ => Err(Error::Domain(format!("unknown profile '{s}' (expected sine(n), bump or zero)"))),
        }
    }
}

impl fmt::Display for ProfilePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sine(n) => write!(f, "sine({n})"),
            Self::Bump => f.write_str("bump"),
            Self::Zero => f.write_str("zero"),
        }
    }
}

impl ProfilePreset {
    pub fn eval(&self, x: f64, ell: f64) -> f64 {
        match *self {
            Self::Sine(n) => (n as f64 * PI * x / ell).sin(),
            Self::Bump => {
                let r = (x - 0.5 * ell) / (0.25 * ell);
                if r.abs() < 1.0 {
                    (1.0 - 1.0 / (1.0 - r * r)).exp()
                } else {
                    0.0
                }
            }
            Self::Zero => 0.0,
        }
    }
}

/// Initial temperature profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemperaturePreset {
    /// `cos(n pi x / ell)`
    Cosine(u32),
    Zero,
}

impl FromStr for TemperaturePreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if let Some(n) = parse_mode_arg(&s, "cosine") {
            return n.map(Self::Cosine);
        }
        match s.as_str() {
            "zero" => Ok(Self::Zero),
            _ => Err(Error::Domain(format!("unknown temperature profile '{s}' (expected cosine(n) or zero)"))),
        }
    }
}

impl fmt::Display for TemperaturePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Cosine(n) => write!(f, "cosine({n})"),
            Self::Zero => f.write_str("zero"),
        }
    }
}

/// Strain history on `[-tau, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryPreset {
    /// The initial strain held constant in the past.
    ConstantHistory,
    /// The initial strain scaled by `exp(s)`.
    DecayingExponential,
    Zero,
}

impl FromStr for HistoryPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "constant_history" | "constant" => Ok(Self::ConstantHistory),
            "decaying_exponential" | "exponential" => Ok(Self::DecayingExponential),
            "zero" => Ok(Self::Zero),
            other => Err(Error::Domain(format!(
                "unknown history '{other}' (expected constant_history, decaying_exponential or zero)"
            ))),
        }
    }
}

impl fmt::Display for HistoryPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ConstantHistory => "constant_history",
            Self::DecayingExponential => "decaying_exponential",
            Self::Zero => "zero",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub u0: ProfilePreset,
    pub u1: ProfilePreset,
    pub theta0: TemperaturePreset,
    pub f0: HistoryPreset,
}

impl Default for InitialData {
    fn default() -> Self {
        Self {
            u0: ProfilePreset::Sine(1),
            u1: ProfilePreset::Zero,
            theta0: TemperaturePreset::Cosine(1),
            f0: HistoryPreset::ConstantHistory,
        }
    }
}

/// Sample the initial state. In Neumann mode the temperature is projected
/// to zero mean. A zero history with nonzero displacement leaves the
/// inflow slice at the initial strain (the history jumps at `s = 0`).
pub fn initial_state(grid: &Grid, p: &PhysParams, init: &InitialData) -> Result<State> {
    let ell = grid.ell();
    let mut s = State::zeros(grid);
    for a in 0..grid.nx() {
        let x = grid.node_x(a);
        s.u[a] = init.u0.eval(x, ell);
        s.v[a] = init.u1.eval(x, ell);
    }
    for j in 0..grid.ncells() {
        s.theta[j] = match init.theta0 {
            TemperaturePreset::Cosine(n) => (n as f64 * PI * grid.cell_x(j) / ell).cos(),
            TemperaturePreset::Zero => 0.0,
        };
    }
    if p.theta_bc == ThetaBc::Neumann {
        s.project_theta_mean();
    }
    let ux = s.strain(grid);
    let dx = grid.dx();
    let cell = |x: f64| ((x / dx - 0.5).round() as usize).min(ux.len() - 1);
    let (z, _) = match init.f0 {
        HistoryPreset::ConstantHistory => init_history(|x, _| ux[cell(x)], grid, p.tau)?,
        HistoryPreset::DecayingExponential => init_history(|x, t| ux[cell(x)] * t.exp(), grid, p.tau)?,
        HistoryPreset::Zero => init_history(|_, _| 0.0, grid, p.tau)?,
    };
    s.z = z;
    check_inflow_consistency(&s.z, &ux, grid.nrho(), 1e-12);
    s.sync_history_inflow(grid);
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: PhysParams,
    pub nx: usize,
    pub nrho: usize,
    /// Defaults to `tau / nrho`.
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Record every this many steps (the final step is always recorded).
    pub record_every: usize,
    pub theta_weight: f64,
    pub startup_backward_euler: bool,
    pub delay_mode: DelayMode,
    /// Rate parameter of the Lyapunov functional.
    pub lambda: f64,
    pub lyapunov: LyapunovOptions,
    pub initial: InitialData,
    pub keep_snapshots: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            params: PhysParams::default(),
            nx: 32,
            nrho: 32,
            dt: None,
            t_end: 10.0,
            record_every: 1,
            theta_weight: 0.5,
            startup_backward_euler: true,
            delay_mode: DelayMode::Ring,
            lambda: 1.0,
            lyapunov: LyapunovOptions::default(),
            initial: InitialData::default(),
            keep_snapshots: false,
        }
    }
}

impl SimConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.nx, self.nrho, self.params.ell)
    }

    pub fn time_step(&self) -> f64 {
        self.dt.unwrap_or(self.params.tau / self.nrho as f64)
    }

    pub fn steps(&self) -> Result<u64> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::InvalidParameter { name: "t_end", reason: format!("must be > 0, got {}", self.t_end) });
        }
        Ok((self.t_end / self.time_step()).round().max(1.0) as u64)
    }

    /// History weight used in the energy. Without damping the certified
    /// weight is infinite, so `xi_factor tau alpha^2` is used instead.
    pub fn energy_xi(&self) -> f64 {
        let p = &self.params;
        if p.beta > 0.0 {
            self.lyapunov.xi_factor * p.xi_lower_bound()
        } else {
            self.lyapunov.xi_factor * p.tau * p.alpha * p.alpha
        }
    }

    pub fn constants(&self) -> Result<LyapunovConstants> {
        lyapunov_constants(&self.params, self.lambda, self.lyapunov)
    }
}

/// Run the configured simulation and record observables.
///
/// Lyapunov terms are recorded when the constants exist for the configured
/// `lambda` (they do not without damping); otherwise they are NaN.
pub fn simulate(cfg: &SimConfig) -> Result<Trajectory> {
    let grid = cfg.grid()?;
    let p = cfg.params;
    if cfg.record_every == 0 {
        return Err(Error::InvalidParameter { name: "record_every", reason: "must be >= 1".into() });
    }
    let mut state = initial_state(&grid, &p, &cfg.initial)?;
    let steps = cfg.steps()?;
    let dt = cfg.time_step();
    let mut stepper =
        Stepper::new(&grid, &p, dt, cfg.theta_weight, cfg.delay_mode, &state, cfg.startup_backward_euler)?;
    let quad = match cfg.constants() {
        Ok(c) if p.beta > 0.0 => Some(LyapunovQuadrature::new(&grid, &c)?),
        _ => None,
    };
    let xi = cfg.energy_xi();
    let mut traj = Trajectory::default();
    let nan_terms = LyapunovTerms { terms: [f64::NAN; 6], v: f64::NAN, v_tilde: f64::NAN };
    let record = |traj: &mut Trajectory, t: f64, s: &State| {
        let terms = quad.as_ref().map_or(nan_terms, |q| q.evaluate(s, &grid));
        traj.push(t, energy(s, &grid, &p, xi), &terms, theta_mass(s, &grid));
        if cfg.keep_snapshots {
            traj.snapshots.push(s.clone());
        }
    };
    record(&mut traj, 0.0, &state);
    for k in 1..=steps {
        stepper.step(&mut state)?;
        if k % cfg.record_every as u64 == 0 || k == steps {
            record(&mut traj, stepper.time, &state);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_print() {
        assert_eq!("sine(3)".parse::<ProfilePreset>().unwrap(), ProfilePreset::Sine(3));
        assert_eq!("sine".parse::<ProfilePreset>().unwrap(), ProfilePreset::Sine(1));
        assert_eq!(" Bump ".parse::<ProfilePreset>().unwrap(), ProfilePreset::Bump);
        assert!("sine(0)".parse::<ProfilePreset>().is_err());
        assert!("sine(x)".parse::<ProfilePreset>().is_err());
        assert!("wave".parse::<ProfilePreset>().is_err());
        assert_eq!("cosine(2)".parse::<TemperaturePreset>().unwrap(), TemperaturePreset::Cosine(2));
        assert_eq!("decaying_exponential".parse::<HistoryPreset>().unwrap(), HistoryPreset::DecayingExponential);
        for s in ["sine(4)", "bump", "zero"] {
            assert_eq!(s.parse::<ProfilePreset>().unwrap().to_string(), s);
        }
        assert_eq!(HistoryPreset::ConstantHistory.to_string(), "constant_history");
    }

    #[test]
    fn bump_is_smooth_and_supported_in_the_middle() {
        let b = ProfilePreset::Bump;
        assert_eq!(b.eval(0.5, 1.0), 1.0);
        assert_eq!(b.eval(0.2, 1.0), 0.0);
        assert!(b.eval(0.26, 1.0) > 0.0 && b.eval(0.26, 1.0) < 1e-4);
    }

    #[test]
    fn initial_state_is_consistent() {
        let g = Grid::new(16, 8, 1.0).unwrap();
        let p = PhysParams::default();
        let s = initial_state(&g, &p, &InitialData::default()).unwrap();
        let ux = s.strain(&g);
        for i in 0..=8 {
            assert_eq!(s.z_slice(i), ux);
        }
        assert!(s.theta.iter().sum::<f64>().abs() < 1e-13);
        let init = InitialData { f0: HistoryPreset::DecayingExponential, ..InitialData::default() };
        let s = initial_state(&g, &p, &init).unwrap();
        let tail = s.z_slice(8);
        for (a, b) in tail.iter().zip(&ux) {
            assert!((a - b * (-1.0_f64).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_data_gives_zero_energy() {
        let cfg = SimConfig {
            nx: 8,
            nrho: 4,
            t_end: 2.0,
            params: PhysParams::default().with_beta(30.0),
            initial: InitialData {
                u0: ProfilePreset::Zero,
                u1: ProfilePreset::Zero,
                theta0: TemperaturePreset::Zero,
                f0: HistoryPreset::Zero,
            },
            ..SimConfig::default()
        };
        let t = simulate(&cfg).unwrap();
        assert_eq!(t.len(), 9);
        assert!(t.energy.iter().all(|&e| e == 0.0));
        assert!(t.v.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn simulation_is_deterministic_and_records_cadence() {
        let cfg = SimConfig {
            nx: 10,
            nrho: 4,
            t_end: 3.0,
            record_every: 5,
            params: PhysParams::default().with_beta(30.0),
            ..SimConfig::default()
        };
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a, b);
        // 12 steps: samples at 0, 5, 10 and the final step 12.
        assert_eq!(a.times.len(), 4);
        assert!((a.times[3] - 3.0).abs() < 1e-12);
        assert!(a.energy[3] < a.energy[0]);
    }

    #[test]
    fn undamped_run_has_nan_lyapunov_terms() {
        let cfg = SimConfig {
            nx: 8,
            nrho: 4,
            t_end: 1.0,
            params: PhysParams::default().with_beta(0.0),
            ..SimConfig::default()
        };
        match simulate(&cfg) {
            Ok(t) => assert!(t.v.iter().all(|v| v.is_nan()) && t.energy[0] > 0.0),
            Err(e) => assert!(matches!(e, Error::BlowUp { .. })),
        }
    }
}
