//! Energy, Lyapunov functional terms, decay-rate fits and the a posteriori
//! decay-inequality check along trajectories.

use serde::{Deserialize, Serialize};

use crate::constants::{f_weight, LyapunovConstants};
use crate::discretization::{Grid, State};
use crate::error::{Error, Result};
use crate::params::PhysParams;

/// Recorded observables of one run, aligned by sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub v: Vec<f64>,
    pub v_tilde: Vec<f64>,
    pub v_terms: Vec<[f64; 6]>,
    pub theta_mass: Vec<f64>,
    #[serde(skip)]
    pub snapshots: Vec<State>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, energy: f64, terms: &LyapunovTerms, theta_mass: f64) {
        self.times.push(t);
        self.energy.push(energy);
        self.v.push(terms.v);
        self.v_tilde.push(terms.v_tilde);
        self.v_terms.push(terms.terms);
        self.theta_mass.push(theta_mass);
    }
}

fn sum_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Energy `1/2 int (u_t^2 + alpha u_x^2 + theta^2) + xi int int z^2`.
///
/// The history integral uses the same uniform `drho` weights as the
/// discrete inner product, so `E = <U,U>/2 + (xi/2) int int z^2`.
pub fn energy(state: &State, grid: &Grid, p: &PhysParams, xi: f64) -> f64 {
    let dx = grid.dx();
    let ux = state.strain(grid);
    0.5 * dx * (sum_sq(&state.v) + p.alpha * sum_sq(&ux) + sum_sq(&state.theta))
        + xi * dx * grid.drho() * sum_sq(&state.z)
}

/// `sum theta dx`.
pub fn theta_mass(state: &State, grid: &Grid) -> f64 {
    grid.dx() * state.theta.iter().sum::<f64>()
}

/// The six terms and the two weighted sums of the Lyapunov functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovTerms {
    pub terms: [f64; 6],
    pub v: f64,
    pub v_tilde: f64,
}

/// Precomputed trapezoid weights in `rho` for the history terms.
#[derive(Debug, Clone)]
pub struct LyapunovQuadrature {
    weights: [f64; 6],
    alpha: f64,
    /// `trapezoid_i * exp(-2 lambda rho_i)`
    w4: Vec<f64>,
    /// `trapezoid_i * exp(-lambda rho_i) f(rho_i)`
    w5: Vec<f64>,
}

impl LyapunovQuadrature {
    pub fn new(grid: &Grid, consts: &LyapunovConstants) -> Result<Self> {
        let lambda = consts.lambda;
        let n = grid.nrho();
        let mut w4 = Vec::with_capacity(n + 1);
        let mut w5 = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let rho = grid.rho(i);
            let trap = if i == 0 || i == n { 0.5 * grid.drho() } else { grid.drho() };
            w4.push(trap * (-2.0 * lambda * rho).exp());
            w5.push(trap * (-lambda * rho).exp() * f_weight(rho, lambda)?);
        }
        Ok(Self { weights: consts.weights, alpha: consts.params.alpha, w4, w5 })
    }

    pub fn evaluate(&self, state: &State, grid: &Grid) -> LyapunovTerms {
        let dx = grid.dx();
        let ux = state.strain(grid);
        let n = grid.nrho();
        let (mut v4, mut v5) = (0.0, 0.0);
        for (j, col) in state.z.chunks_exact(n + 1).enumerate() {
            for i in 0..=n {
                v4 += self.w4[i] * col[i] * col[i];
                v5 -= self.w5[i] * col[i] * ux[j];
            }
        }
        let terms = [
            0.5 * dx * sum_sq(&state.v),
            0.5 * dx * sum_sq(&ux),
            0.5 * dx * sum_sq(&state.theta),
            dx * v4,
            dx * v5,
            dx * state.u.iter().zip(&state.v).map(|(a, b)| a * b).sum::<f64>(),
        ];
        let [n1, n2, n3, n4, n5, n6] = self.weights;
        let v_tilde = n1 * terms[0] + self.alpha * n2 * terms[1] + n3 * terms[2] + n4 * terms[3];
        LyapunovTerms { terms, v: v_tilde + n5 * terms[4] + n6 * terms[5], v_tilde }
    }
}

pub fn lyapunov_components(state: &State, grid: &Grid, consts: &LyapunovConstants) -> Result<LyapunovTerms> {
    Ok(LyapunovQuadrature::new(grid, consts)?.evaluate(state, grid))
}

/// Least-squares fit `log E = log C - a0 t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub a0: f64,
    pub c: f64,
    pub r2: f64,
    pub samples: usize,
}

pub fn decay_rate_fit(times: &[f64], energy: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> =
        times.iter().zip(energy).filter(|(t, _)| **t >= window.0 && **t <= window.1).map(|(&t, &e)| (t, e)).collect();
    if pts.len() < 2 {
        return Err(Error::TooFewSamples { need: 2, got: pts.len() });
    }
    if let Some((t, e)) = pts.iter().find(|(_, e)| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::DegenerateFit(format!("energy {e} at t = {t} is not positive")));
    }
    let n = pts.len() as f64;
    let (mt, my) = pts.iter().fold((0.0, 0.0), |(a, b), (t, e)| (a + t / n, b + e.ln() / n));
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (t, e) in &pts {
        let (dt, dy) = (t - mt, e.ln() - my);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if stt == 0.0 {
        return Err(Error::DegenerateFit("all samples at one time".into()));
    }
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let ss_res: f64 = pts.iter().map(|(t, e)| (e.ln() - intercept - slope * t).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(DecayFit { a0: -slope, c: intercept.exp(), r2, samples: pts.len() })
}

/// Outcome of checking `V' <= -n0 Vtilde` at interior samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    /// `max (V' + n0 Vtilde)` over interior samples.
    pub max_excess: f64,
    /// `max (V' + n0 Vtilde - band)`; nonpositive when no sample violates.
    pub max_excess_over_band: f64,
    pub violations: usize,
    pub samples: usize,
    pub violating_fraction: f64,
}

impl DecayCheck {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Three-point derivative on a nonuniform grid at the middle point.
fn central_derivative(t: [f64; 3], y: [f64; 3]) -> f64 {
    let (h0, h1) = (t[1] - t[0], t[2] - t[1]);
    (-h1 / (h0 * (h0 + h1))) * y[0] + ((h1 - h0) / (h0 * h1)) * y[1] + (h0 / (h1 * (h0 + h1))) * y[2]
}

/// Check the decay inequality along a sampled trajectory.
///
/// The tolerance band at sample `k` is `2 |d3 V| / (6 dt) + 64 eps |V| / dt`,
/// where `d3 V` is the largest adjacent third difference: the first part
/// bounds the truncation error `dt^2 |V'''| / 6` of the central difference,
/// the second its rounding error.
pub fn check_decay_inequality(times: &[f64], v: &[f64], v_tilde: &[f64], n0: f64) -> Result<DecayCheck> {
    let n = times.len();
    if n < 3 || v.len() != n || v_tilde.len() != n {
        return Err(Error::TooFewSamples { need: 3, got: n.min(v.len()).min(v_tilde.len()) });
    }
    let third = |k: usize| -> f64 {
        if k + 3 < n {
            (v[k + 3] - 3.0 * v[k + 2] + 3.0 * v[k + 1] - v[k]).abs()
        } else {
            0.0
        }
    };
    let mut out = DecayCheck {
        max_excess: f64::NEG_INFINITY,
        max_excess_over_band: f64::NEG_INFINITY,
        violations: 0,
        samples: n - 2,
        violating_fraction: 0.0,
    };
    for k in 1..n - 1 {
        let dv = central_derivative([times[k - 1], times[k], times[k + 1]], [v[k - 1], v[k], v[k + 1]]);
        let excess = dv + n0 * v_tilde[k];
        let dt = 0.5 * (times[k + 1] - times[k - 1]);
        let d3 = third(k - 1).max(third(k.saturating_sub(2))).max(third(k));
        let band =
            2.0 * d3 / (6.0 * dt) + 64.0 * f64::EPSILON * v[k].abs().max(v[k + 1].abs()).max(v[k - 1].abs()) / dt;
        out.max_excess = out.max_excess.max(excess);
        out.max_excess_over_band = out.max_excess_over_band.max(excess - band);
        if excess > band {
            out.violations += 1;
        }
    }
    out.violating_fraction = out.violations as f64 / out.samples as f64;
    Ok(out)
}

/// Empirical `(min, max)` of `V / Vtilde` over samples with `Vtilde > 0`.
pub fn equivalence_ratios(v: &[f64], v_tilde: &[f64]) -> Option<(f64, f64)> {
    let ratios: Vec<f64> = v.iter().zip(v_tilde).filter(|(_, &w)| w > 0.0).map(|(a, b)| a / b).collect();
    if ratios.is_empty() {
        return None;
    }
    Some((
        ratios.iter().cloned().fold(f64::INFINITY, f64::min),
        ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    ))
}
