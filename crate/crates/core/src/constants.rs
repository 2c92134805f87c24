//! Closed-form constants of the Lyapunov functional and the sufficient
//! conditions for exponential decay.
//!
//! Every quantity is a function of the physical parameters and a single
//! exponent parameter `lambda`. With `h = exp(-2 lambda)` the history weight
//! `f` solves `(exp(-lambda rho) f)' = -exp(-2 lambda rho)` with
//! `f(1) exp(-lambda) = h * Gamma`, which gives
//!
//! ```text
//! f(rho)  = exp(lambda rho) (exp(-2 lambda rho) - exp(-4 lambda)) / (2 lambda)
//! Gamma   = (1 - exp(-2 lambda)) / (2 lambda)      Psi = h Gamma
//! Lambda  = f(0) = Psi + Gamma                     Phi = int_0^1 f^2
//! A       = 1 + h - h^2 - 2h^3 - 4h^4              k   = 1 - h^4
//! ```
//!
//! Several of the sufficient conditions compare quantities that agree to
//! `O(h^3)`; for `lambda >= 6` that is below double precision. The
//! differences are therefore evaluated through exact polynomial identities in
//! `h` rather than by subtracting nearly equal numbers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::PhysParams;

/// Tuning knobs for [`lyapunov_constants`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovOptions {
    /// `xi = xi_factor * 2 tau alpha^2 / beta`; must exceed 1.
    pub xi_factor: f64,
    /// Use the sharp Dirichlet Poincare constant `(ell/pi)^2` instead of `ell^2/2`.
    pub sharp_poincare: bool,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self { xi_factor: 2.0, sharp_poincare: false }
    }
}

/// All constants entering the Lyapunov functional `V = sum N_i V_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConstants {
    pub params: PhysParams,
    pub lambda: f64,
    pub xi: f64,
    pub c_p: f64,
    pub m: f64,
    pub h: f64,
    /// `int_0^1 exp(-2 lambda rho) drho`
    pub big_gamma: f64,
    /// `f(1) exp(-lambda)`
    pub psi: f64,
    /// `f(0)`
    pub big_lambda: f64,
    /// `int_0^1 f^2`
    pub phi: f64,
    pub big_a: f64,
    pub k: f64,
    pub a: f64,
    pub b: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    /// Midpoint of the admissible window for the heat-coupling Young parameter, if nonempty.
    pub eps4: Option<f64>,
    pub eps5: f64,
    pub eps6: f64,
    /// Weights `N1..N6`, normalized by `N1 = 1`.
    pub weights: [f64; 6],
}

/// One inequality of the certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub lambda: f64,
    pub beta: f64,
    pub records: Vec<ConditionRecord>,
    pub eps4: Option<f64>,
    pub verdict: bool,
}

impl ConditionReport {
    pub fn record(&self, name: &str) -> Option<&ConditionRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn failed(&self) -> impl Iterator<Item = &ConditionRecord> {
        self.records.iter().filter(|r| !r.satisfied)
    }
}

pub const XI_BOUND: &str = "xi-bound";
pub const RATIO_WINDOW: &str = "ratio-window";
pub const VISCOUS_MARGIN: &str = "viscous-margin";
pub const HEAT_WINDOW: &str = "heat-coupling-window";
pub const EQUIV_PAIR: &str = "equivalence-pair";
pub const EQUIV_STRAIN: &str = "equivalence-strain";

/// History weight `f(rho)`.
pub fn f_weight(rho: f64, lambda: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be > 0, got {lambda}")));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!("rho must lie in [0, 1], got {rho}")));
    }
    Ok(f_unchecked(rho, lambda))
}

#[inline]
pub(crate) fn f_unchecked(rho: f64, lambda: f64) -> f64 {
    ((-lambda * rho).exp() - (lambda * rho - 4.0 * lambda).exp()) / (2.0 * lambda)
}

/// `(1+h)^2 (1-h) k - A`, the common numerator of both upper-window margins.
fn window_defect(h: f64) -> f64 {
    h.powi(3) * (1.0 + h * (3.0 + h * (-1.0 + h * (1.0 + h))))
}

/// `A - 1`
fn a_minus_one(h: f64) -> f64 {
    h * (1.0 - h * (1.0 + h * (2.0 + 4.0 * h)))
}

/// `A - k`
fn a_minus_k(h: f64) -> f64 {
    h * (1.0 - h * (1.0 + h * (2.0 + 3.0 * h)))
}

/// Poincare constant used by the certificate.
pub fn poincare_constant(ell: f64, sharp: bool) -> f64 {
    if sharp {
        (ell / std::f64::consts::PI).powi(2)
    } else {
        ell * ell / 2.0
    }
}

/// Evaluate every constant of the functional at the given `lambda`.
///
/// `beta = 0` is accepted: the beta-dependent fields become infinite and the
/// resulting certificate fails, which is what the undamped system deserves.
pub fn lyapunov_constants(p: &PhysParams, lambda: f64, opts: LyapunovOptions) -> Result<LyapunovConstants> {
    p.validate()?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be > 0, got {lambda}")));
    }
    if !(opts.xi_factor > 1.0) {
        return Err(Error::InvalidParameter {
            name: "xi_factor",
            reason: format!("must exceed 1, got {}", opts.xi_factor),
        });
    }
    let PhysParams { alpha, beta, gamma, kappa, tau, ell, .. } = *p;

    let h = (-2.0 * lambda).exp();
    let big_gamma = -(-2.0 * lambda).exp_m1() / (2.0 * lambda);
    let psi = h * big_gamma;
    let big_lambda = psi + big_gamma;
    let phi = (big_gamma - 2.0 * (-4.0 * lambda).exp()
        + (-6.0 * lambda).exp() * -(-2.0 * lambda).exp_m1() / (2.0 * lambda))
        / (4.0 * lambda * lambda);

    let big_a = 1.0 + h - h * h - 2.0 * h.powi(3) - 4.0 * h.powi(4);
    let k = 1.0 - h.powi(4);
    // 1 - k = h^4 exactly; k itself rounds to 1 once lambda >= 5.
    if !(a_minus_one(h) > 0.0 && a_minus_k(h) > 0.0 && h.powi(4) > 0.0 && h < 1.0) {
        return Err(Error::LambdaInfeasible {
            lambda,
            reason: format!("need A > 1, 0 < k < 1 and A/k > 1 (A = {big_a}, k = {k})"),
        });
    }
    let defect = window_defect(h);
    if !(defect > 0.0) {
        return Err(Error::LambdaInfeasible { lambda, reason: "A/k is not below 2 lambda Lambda^2 / Gamma".into() });
    }
    // Lambda - sqrt(A Gamma / (2 lambda k)), rationalized.
    let root = (big_a * big_gamma / (2.0 * lambda * k)).sqrt();
    let lambda_gap = big_gamma * big_gamma * defect / (k * (1.0 - h)) / (big_lambda + root);
    if !(lambda_gap > 0.0) {
        return Err(Error::LambdaInfeasible { lambda, reason: "Lambda <= sqrt(A Gamma / (2 lambda k))".into() });
    }

    let c_p = poincare_constant(ell, opts.sharp_poincare);
    let xi = opts.xi_factor * 2.0 * tau * alpha * alpha / beta;
    let m = alpha * alpha / beta + xi / (2.0 * tau);

    let eps1 = alpha / beta;
    let a = 0.5 * alpha * alpha * tau * (2.0 * lambda).exp() / beta;
    let eps2 = (2.0 * lambda * big_gamma * k / big_a).sqrt();
    let eps3 = big_a * tau / (4.0 * lambda * k * lambda_gap);
    let b = 4.0 * lambda * k / (eps2 + tau / eps3);

    let (lo, hi) = heat_window(alpha, beta, gamma, kappa, big_gamma, psi, b, h, c_p);
    let eps4 = (lo < hi).then_some(0.5 * (lo + hi));

    let eps5 = b;
    let eps6 = 2.0 * a * b * psi / (tau * alpha);

    let n1 = 1.0;
    let n4 = a * n1;
    let n5 = a * b * n1;
    let n6 = psi / (alpha * tau) * n5;
    let n2 = beta / alpha * n6;
    let n3 = n1;

    Ok(LyapunovConstants {
        params: *p,
        lambda,
        xi,
        c_p,
        m,
        h,
        big_gamma,
        psi,
        big_lambda,
        phi,
        big_a,
        k,
        a,
        b,
        eps1,
        eps2,
        eps3,
        eps4,
        eps5,
        eps6,
        weights: [n1, n2, n3, n4, n5, n6],
    })
}

/// Admissible window `(lo, hi)` for the heat-coupling Young parameter.
#[allow(clippy::too_many_arguments)]
fn heat_window(
    alpha: f64,
    beta: f64,
    gamma: f64,
    kappa: f64,
    big_gamma: f64,
    psi: f64,
    b: f64,
    h: f64,
    c_p: f64,
) -> (f64, f64) {
    // psi * exp(2 lambda) == Gamma exactly.
    let lo = alpha * gamma * b * big_gamma / (4.0 * beta * kappa);
    let hi = 2.0 * alpha * a_minus_one(h) / (gamma * b * psi * c_p);
    (lo, hi)
}

fn record(name: &str, lhs: f64, rhs: f64, satisfied: bool) -> ConditionRecord {
    ConditionRecord { name: name.to_string(), lhs, rhs, satisfied }
}

/// Evaluate the exact (non-asymptotic) sufficient conditions.
pub fn check_conditions(c: &LyapunovConstants) -> ConditionReport {
    let PhysParams { alpha, beta, tau, .. } = c.params;
    let lambda = c.lambda;
    let e2l = (2.0 * lambda).exp();
    let mut records = Vec::with_capacity(6);

    let xi_lo = 2.0 * tau * alpha * alpha / beta;
    records.push(record(XI_BOUND, xi_lo, c.xi, xi_lo < c.xi));

    let ratio = c.big_a / c.k;
    let ratio_hi = (1.0 - c.h) * (1.0 + c.h).powi(2);
    let ratio_ok = a_minus_k(c.h) > 0.0 && window_defect(c.h) > 0.0;
    records.push(record(RATIO_WINDOW, ratio, ratio_hi, ratio_ok));

    let visc_lhs = c.b * c.psi * alpha * e2l * c.c_p + 0.5 * tau * c.b * c.phi * c.eps3 * alpha * alpha * e2l;
    let visc_rhs = beta * beta;
    records.push(record(VISCOUS_MARGIN, visc_lhs, visc_rhs, visc_lhs < visc_rhs));

    let PhysParams { gamma, kappa, .. } = c.params;
    let (lo, hi) = heat_window(alpha, beta, gamma, kappa, c.big_gamma, c.psi, c.b, c.h, c.c_p);
    records.push(record(HEAT_WINDOW, lo, hi, lo < hi));

    let [n1, n2, _, n4, n5, n6] = c.weights;
    let pair = (n6 / (c.eps6 * n1)).max(n5 / (2.0 * c.eps5 * n4));
    records.push(record(EQUIV_PAIR, pair, 1.0, pair < 1.0));

    let strain_lhs = c.b * c.psi * c.psi * c.c_p / (beta * tau) + c.phi * c.b;
    let strain_rhs = beta * c.psi / (alpha * tau);
    records.push(record(EQUIV_STRAIN, strain_lhs, strain_rhs, strain_lhs < strain_rhs));
    debug_assert!(n2.is_nan() || n2 >= 0.0);

    let verdict = records.iter().all(|r| r.satisfied);
    ConditionReport { lambda, beta, records, eps4: c.eps4, verdict }
}

/// Convenience: constants plus certificate at `(p.beta, lambda)`.
pub fn certify(p: &PhysParams, lambda: f64, opts: LyapunovOptions) -> Result<ConditionReport> {
    Ok(check_conditions(&lyapunov_constants(p, lambda, opts)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beta0 {
    pub beta0: f64,
    pub lambda_star: f64,
}

/// Smallest certified damping at one `lambda`, by log-space bisection on
/// `[tiny, alpha tau exp(4 lambda)]`. `None` when the upper end of the
/// bracket is not certified (or `lambda` is infeasible).
pub fn beta0_at(p: &PhysParams, lambda: f64, opts: LyapunovOptions, rel_tol: f64) -> Result<Option<f64>> {
    let passes = |beta: f64| -> Result<bool> { Ok(certify(&p.with_beta(beta), lambda, opts)?.verdict) };
    let mut hi = p.alpha * p.tau * (4.0 * lambda).exp();
    match passes(hi) {
        Ok(true) => {}
        Ok(false) | Err(Error::LambdaInfeasible { .. }) => return Ok(None),
        Err(e) => return Err(e),
    }
    let mut lo = hi * 1e-12;
    if passes(lo)? {
        return Ok(Some(lo));
    }
    while hi / lo - 1.0 > rel_tol {
        let mid = (lo * hi).sqrt();
        if passes(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Default search grid for `lambda`: `0.25, 0.5, ..., 10`.
pub fn default_lambda_grid() -> Vec<f64> {
    (1..=40).map(|k| 0.25 * k as f64).collect()
}

/// Damping threshold over a `lambda` grid: the minimum of the per-`lambda`
/// bisection results. This is an upper bound on the true threshold since the
/// conditions are only sufficient.
pub fn find_beta0(p: &PhysParams, lambda_grid: &[f64], opts: LyapunovOptions, rel_tol: f64) -> Result<Beta0> {
    let mut best: Option<Beta0> = None;
    for &lambda in lambda_grid {
        if let Some(beta0) = beta0_at(p, lambda, opts, rel_tol)? {
            if best.is_none_or(|b| beta0 < b.beta0) {
                best = Some(Beta0 { beta0, lambda_star: lambda });
            }
        }
    }
    best.ok_or(Error::NoFeasibleLambda)
}

/// Coefficients `n1..n4` of `V4`, `|u_x|^2`, `|u_tx|^2` and `|theta_x|^2` in the
/// upper bound for `V'`. All four are negative when the certificate holds.
///
/// The `|z(1)|^2` coefficient vanishes identically because `N4 = a N1`.
pub fn decay_coefficients(c: &LyapunovConstants) -> [f64; 4] {
    let PhysParams { alpha, beta, gamma, kappa, tau, .. } = c.params;
    let [n1w, _, _, n4w, n5w, _] = c.weights;
    let eps4 = c.eps4.unwrap_or(f64::NAN);
    // -2 lambda N4/tau + N5 (eps2 + tau/eps3)/(2 tau) with b (eps2 + tau/eps3) = 4 lambda k.
    let n1 = -2.0 * c.lambda * c.h.powi(4) * n4w / tau;
    let n2 = n4w / tau
        + n5w / tau * (c.big_gamma / (2.0 * c.eps2) - c.big_lambda)
        + n5w * c.psi * gamma * eps4 * c.c_p / (2.0 * alpha * tau);
    let n3 = n1w * (alpha / (2.0 * c.eps1) - beta) + n5w * (c.eps3 * c.phi / 2.0 + c.psi * c.c_p / (alpha * tau));
    let n4 = -n1w * kappa + n5w * c.psi * gamma / (2.0 * alpha * tau * eps4);
    [n1, n2, n3, n4]
}

/// Residual of the `|z(1)|^2` row, `-N4 exp(-2 lambda)/tau + N1 alpha eps1 / 2`.
pub fn delayed_strain_residual(c: &LyapunovConstants) -> f64 {
    let [n1w, _, _, n4w, _, _] = c.weights;
    -n4w * (-2.0 * c.lambda).exp() / c.params.tau + n1w * c.params.alpha * c.eps1 / 2.0
}

/// Decay constant `n0` with `V' <= -n0 Vtilde`.
///
/// Each row coefficient is divided by the weight of the matching term of
/// `Vtilde`, using Poincare to pass from `|u_tx|` to `|u_t|` and from
/// `|theta_x|` to `|theta|`.
pub fn n0_from_constants(c: &LyapunovConstants) -> Result<f64> {
    let rows = decay_coefficients(c);
    if let Some(i) = rows.iter().position(|r| !(*r < 0.0)) {
        return Err(Error::ConditionViolated(format!("decay coefficient n{} = {} is not negative", i + 1, rows[i])));
    }
    let [n1w, n2w, n3w, n4w, _, _] = c.weights;
    let alpha = c.params.alpha;
    let [r1, r2, r3, r4] = rows.map(f64::abs);
    Ok((r1 / n4w).min(2.0 * r2 / (alpha * n2w)).min(2.0 * r3 / (c.c_p * n1w)).min(2.0 * r4 / (c.c_p * n3w)))
}

/// Constants `(c1, c2)` with `c1 Vtilde <= V <= c2 Vtilde` implied by the
/// Young splittings with the chosen `eps5`, `eps6`.
pub fn equivalence_bounds(c: &LyapunovConstants) -> (f64, f64) {
    let [n1, n2, _, n4, n5, n6] = c.weights;
    let alpha = c.params.alpha;
    let slack =
        [n6 / (c.eps6 * n1), n5 / (2.0 * c.eps5 * n4), (n6 * c.eps6 * c.c_p + n5 * c.phi * c.eps5) / (alpha * n2)];
    let worst = slack.iter().cloned().fold(0.0, f64::max);
    (1.0 - worst, 1.0 + worst)
}
