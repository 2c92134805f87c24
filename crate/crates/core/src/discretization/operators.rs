//! Second-order finite-difference operators on the staggered grid.
//!
//! `grad_u` maps nodal values (with zero wall values) to cell values,
//! `(G w)_j = (w_j - w_{j-1}) / dx`. Its negative transpose is both the
//! divergence back to the nodes and the nodal temperature gradient, so
//! `sum_j q_j (G w)_j dx = -sum_a (div q)_a w_a dx` holds exactly.

use crate::discretization::grid::Grid;
use crate::discretization::sparse::CsrMatrix;
use crate::error::Result;
use crate::params::ThetaBc;

#[derive(Debug, Clone)]
pub struct Operators {
    /// nodes -> cells
    pub grad_u: CsrMatrix,
    /// cells -> nodes, `-grad_u^T`
    pub div_flux: CsrMatrix,
    /// Dirichlet Laplacian on the nodes, `div_flux * grad_u`.
    pub lap_u: CsrMatrix,
    /// Temperature Laplacian on the cells for the chosen boundary condition.
    pub lap_theta: CsrMatrix,
    /// cells -> nodes temperature gradient; equal to `div_flux`.
    pub grad_theta: CsrMatrix,
    pub theta_bc: ThetaBc,
}

pub fn build_operators(grid: &Grid, theta_bc: ThetaBc) -> Result<Operators> {
    let nx = grid.nx();
    let nc = grid.ncells();
    let inv = 1.0 / grid.dx();

    let mut trip = Vec::with_capacity(2 * nx);
    for j in 0..nc {
        if j < nx {
            trip.push((j, j, inv));
        }
        if j > 0 {
            trip.push((j, j - 1, -inv));
        }
    }
    let grad_u = CsrMatrix::from_triplets(nc, nx, trip);
    let div_flux = grad_u.transpose().scaled(-1.0);
    let lap_u = div_flux.matmul(&grad_u);

    // Neumann: zero flux through both walls is built into -G G^T.
    let mut lap_theta = grad_u.matmul(&div_flux);
    if theta_bc == ThetaBc::Dirichlet {
        // Ghost value -theta at each wall: wall flux 2 theta / dx.
        let w = -2.0 * inv * inv;
        lap_theta = lap_theta.add(&CsrMatrix::from_triplets(nc, nc, vec![(0, 0, w), (nc - 1, nc - 1, w)]));
    }

    Ok(Operators { grad_theta: div_flux.clone(), grad_u, div_flux, lap_u, lap_theta, theta_bc })
}

/// Cell-centered strain `G u` without going through the sparse matrix.
pub fn strain_into(u: &[f64], dx: f64, out: &mut [f64]) {
    let nx = u.len();
    debug_assert_eq!(out.len(), nx + 1);
    let inv = 1.0 / dx;
    for (j, o) in out.iter_mut().enumerate() {
        let right = if j < nx { u[j] } else { 0.0 };
        let left = if j > 0 { u[j - 1] } else { 0.0 };
        *o = right * inv - left * inv;
    }
}

pub fn strain(u: &[f64], dx: f64) -> Vec<f64> {
    let mut out = vec![0.0; u.len() + 1];
    strain_into(u, dx, &mut out);
    out
}
