//! Assembly of the semi-discrete generator acting on packed states.
//!
//! Block rows, with `G` the node-to-cell gradient and `D = -G^T`:
//!
//! ```text
//! u'      = v
//! v'      = D (alpha z(., 1) + beta G v) - gamma D_theta theta
//! z_0'    = G v                      (keeps z(., 0) = G u along solutions)
//! z_i'    = -(z_i - z_{i-1}) / (tau drho),  i >= 1, with z_0 -> G u in i = 1
//! theta'  = -gamma G v + kappa L_theta theta
//! ```
//!
//! Note `D_theta = D`, so `-gamma D_theta theta = gamma G^T theta`.
//! Because the `i = 1` transport row reads its inflow from `G u`, the
//! columns of the `z_0` block are zero: `z_0` is a passive copy of the
//! strain and contributes `nx + 1` eigenvalues at the origin that carry no
//! dynamics (see the spectral module's deflation).

use crate::discretization::grid::Grid;
use crate::discretization::operators::{build_operators, Operators};
use crate::discretization::sparse::CsrMatrix;
use crate::discretization::state::{Layout, State};
use crate::error::Result;
use crate::params::PhysParams;

#[derive(Debug, Clone)]
pub struct Generator {
    pub grid: Grid,
    pub params: PhysParams,
    pub layout: Layout,
    pub ops: Operators,
    pub matrix: CsrMatrix,
}

pub fn assemble_generator(grid: &Grid, p: &PhysParams) -> Result<Generator> {
    p.validate_model()?;
    let ops = build_operators(grid, p.theta_bc)?;
    let lay = Layout::of(grid);
    let (nx, nc, nrho) = (grid.nx(), grid.ncells(), grid.nrho());
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();

    for a in 0..nx {
        trip.push((lay.u(a), lay.v(a), 1.0));
    }
    // v-row: alpha D z_N + beta D G v + gamma G^T theta.
    for (c, j, g) in ops.div_flux.triplets() {
        trip.push((lay.v(c), lay.z(j, nrho), p.alpha * g));
        trip.push((lay.v(c), lay.theta(j), -p.gamma * g));
    }
    for (r, c, w) in ops.lap_u.triplets() {
        trip.push((lay.v(r), lay.v(c), p.beta * w));
    }
    // z-rows.
    let s = 1.0 / (p.tau * grid.drho());
    for (j, a, g) in ops.grad_u.triplets() {
        trip.push((lay.z(j, 0), lay.v(a), g));
        trip.push((lay.z(j, 1), lay.u(a), s * g));
    }
    for j in 0..nc {
        for i in 1..=nrho {
            trip.push((lay.z(j, i), lay.z(j, i), -s));
            if i >= 2 {
                trip.push((lay.z(j, i), lay.z(j, i - 1), s));
            }
        }
    }
    // theta-row.
    for (j, a, g) in ops.grad_u.triplets() {
        trip.push((lay.theta(j), lay.v(a), -p.gamma * g));
    }
    for (r, c, w) in ops.lap_theta.triplets() {
        trip.push((lay.theta(r), lay.theta(c), p.kappa * w));
    }

    let matrix = CsrMatrix::from_triplets(lay.dim(), lay.dim(), trip);
    Ok(Generator { grid: *grid, params: *p, layout: lay, ops, matrix })
}

impl Generator {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn apply(&self, state: &State) -> Result<State> {
        let flat = state.pack();
        if flat.len() != self.dim() {
            return Err(crate::Error::ShapeMismatch { expected: self.dim(), got: flat.len() });
        }
        State::unpack(&self.matrix.mul_vec(&flat), &self.grid)
    }

    pub fn apply_flat(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(x)
    }

    /// Permutation `perm[packed] = banded` that interleaves the unknowns by
    /// spatial cell: for each cell `j`, its history column `z(j, 0..=nrho)`,
    /// then `theta_j`, then the node to its right (`u_j`, `v_j`). In this
    /// ordering the generator is banded with half-bandwidth about `nrho + 4`.
    pub fn banded_order(&self) -> Vec<usize> {
        let lay = self.layout;
        let mut perm = vec![0; lay.dim()];
        let mut k = 0;
        for j in 0..=lay.nx {
            for i in 0..=lay.nrho {
                perm[lay.z(j, i)] = k;
                k += 1;
            }
            perm[lay.theta(j)] = k;
            k += 1;
            if j < lay.nx {
                perm[lay.u(j)] = k;
                perm[lay.v(j)] = k + 1;
                k += 2;
            }
        }
        perm
    }

    /// Packed indices of the `z(., 0)` block.
    pub fn inflow_indices(&self) -> Vec<usize> {
        (0..=self.layout.nx).map(|j| self.layout.z(j, 0)).collect()
    }
}
