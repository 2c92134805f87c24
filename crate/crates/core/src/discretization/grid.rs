use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on `(0, ell) x (0, 1)`.
///
/// Displacement and velocity live on the `nx` interior nodes `x_a = (a+1) dx`.
/// Strain, history and temperature live on the `nx + 1` cells centered at
/// `x_j = (j + 1/2) dx`, whose faces are the nodes (including both walls).
/// The delay variable `rho` is sampled at `rho_i = i drho`, `i = 0..=nrho`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    nx: usize,
    nrho: usize,
    ell_bits: u64,
}

impl Grid {
    pub fn new(nx: usize, nrho: usize, ell: f64) -> Result<Self> {
        if nx < 3 {
            return Err(Error::GridTooSmall(format!("nx = {nx}, need at least 3")));
        }
        if nrho < 2 {
            return Err(Error::GridTooSmall(format!("nrho = {nrho}, need at least 2")));
        }
        if !(ell.is_finite() && ell > 0.0) {
            return Err(Error::InvalidParameter { name: "ell", reason: format!("{ell}") });
        }
        Ok(Self { nx, nrho, ell_bits: ell.to_bits() })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nrho(&self) -> usize {
        self.nrho
    }

    pub fn ell(&self) -> f64 {
        f64::from_bits(self.ell_bits)
    }

    pub fn dx(&self) -> f64 {
        self.ell() / (self.nx + 1) as f64
    }

    pub fn drho(&self) -> f64 {
        1.0 / self.nrho as f64
    }

    /// Number of cells (flux points), also the temperature count.
    pub fn ncells(&self) -> usize {
        self.nx + 1
    }

    pub fn nrho_nodes(&self) -> usize {
        self.nrho + 1
    }

    pub fn node_x(&self, a: usize) -> f64 {
        (a + 1) as f64 * self.dx()
    }

    pub fn cell_x(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dx()
    }

    pub fn rho(&self, i: usize) -> f64 {
        i as f64 / self.nrho as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nx).map(|a| self.node_x(a))
    }

    pub fn cells(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.ncells()).map(|j| self.cell_x(j))
    }
}
