//! Physical parameters of the delayed thermoelastic rod.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary condition imposed on the temperature at `x = 0` and `x = ell`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ThetaBc {
    /// Insulated ends, `theta_x = 0`. Total heat is conserved.
    #[default]
    Neumann,
    /// Fixed temperature, `theta = 0`.
    Dirichlet,
}

impl std::str::FromStr for ThetaBc {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "neumann" => Ok(Self::Neumann),
            "dirichlet" => Ok(Self::Dirichlet),
            other => Err(Error::InvalidParameter {
                name: "theta_bc",
                reason: format!("expected `neumann` or `dirichlet`, got `{other}`"),
            }),
        }
    }
}

impl std::fmt::Display for ThetaBc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Neumann => "neumann",
            Self::Dirichlet => "dirichlet",
        })
    }
}

/// Coefficients of
///
/// ```text
/// u_tt - alpha u_xx(t - tau) - beta u_xxt + gamma theta_x = 0
/// theta_t - kappa theta_xx + gamma u_xt = 0
/// ```
///
/// on `(0, ell)` with `u = 0` at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub alpha: f64,
    /// Kelvin-Voigt damping. Zero is only meaningful for the undamped instability demo.
    pub beta: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub tau: f64,
    pub ell: f64,
    #[serde(default)]
    pub theta_bc: ThetaBc,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 1.0, gamma: 1.0, kappa: 1.0, tau: 1.0, ell: 1.0, theta_bc: ThetaBc::Neumann }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: format!("must be finite and > 0, got {v}") })
    }
}

impl PhysParams {
    pub fn validate(&self) -> Result<()> {
        positive("alpha", self.alpha)?;
        positive("gamma", self.gamma)?;
        positive("kappa", self.kappa)?;
        positive("tau", self.tau)?;
        positive("ell", self.ell)?;
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("must be finite and >= 0, got {}", self.beta),
            });
        }
        Ok(())
    }

    /// Weaker check for the discrete model, which also admits the
    /// degenerate limits `alpha = 0`, `gamma = 0` and `kappa = 0`.
    pub fn validate_model(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma), ("kappa", self.kappa)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter { name, reason: format!("must be finite and >= 0, got {v}") });
            }
        }
        positive("tau", self.tau)?;
        positive("ell", self.ell)
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    /// Lower bound on the history weight `xi` for which the shifted generator is dissipative.
    pub fn xi_lower_bound(&self) -> f64 {
        2.0 * self.tau * self.alpha * self.alpha / self.beta
    }

    /// Shift `m = alpha^2/beta + xi/(2 tau)` that makes the generator dissipative.
    pub fn dissipativity_shift(&self, xi: f64) -> f64 {
        self.alpha * self.alpha / self.beta + xi / (2.0 * self.tau)
    }
}
