//! Discrete state `(u, v, z, theta)` and the energy inner product.

use crate::discretization::grid::Grid;
use crate::discretization::operators::strain;
use crate::error::{Error, Result};

/// Offsets of the four blocks inside a packed vector.
///
/// Packing order is `u`, `v`, then `z` row-major in `x` then `rho`
/// (`z[j * (nrho + 1) + i]`), then `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub nx: usize,
    pub nrho: usize,
}

impl Layout {
    pub fn of(grid: &Grid) -> Self {
        Self { nx: grid.nx(), nrho: grid.nrho() }
    }

    pub fn u(&self, a: usize) -> usize {
        a
    }

    pub fn v(&self, a: usize) -> usize {
        self.nx + a
    }

    pub fn z(&self, j: usize, i: usize) -> usize {
        2 * self.nx + j * (self.nrho + 1) + i
    }

    pub fn theta(&self, j: usize) -> usize {
        2 * self.nx + (self.nx + 1) * (self.nrho + 1) + j
    }

    pub fn z_len(&self) -> usize {
        (self.nx + 1) * (self.nrho + 1)
    }

    pub fn dim(&self) -> usize {
        2 * self.nx + self.z_len() + self.nx + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// History `z(x_j, rho_i) ~ u_x(x_j, t - tau rho_i)`, row-major in `x`.
    pub z: Vec<f64>,
    pub theta: Vec<f64>,
    nrho: usize,
}

impl State {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            u: vec![0.0; grid.nx()],
            v: vec![0.0; grid.nx()],
            z: vec![0.0; grid.ncells() * grid.nrho_nodes()],
            theta: vec![0.0; grid.ncells()],
            nrho: grid.nrho(),
        }
    }

    pub fn nx(&self) -> usize {
        self.u.len()
    }

    pub fn nrho(&self) -> usize {
        self.nrho
    }

    pub fn layout(&self) -> Layout {
        Layout { nx: self.nx(), nrho: self.nrho }
    }

    pub fn z_at(&self, j: usize, i: usize) -> f64 {
        self.z[j * (self.nrho + 1) + i]
    }

    pub fn z_at_mut(&mut self, j: usize, i: usize) -> &mut f64 {
        &mut self.z[j * (self.nrho + 1) + i]
    }

    /// Values of `z(., rho_i)` across the cells.
    pub fn z_slice(&self, i: usize) -> Vec<f64> {
        (0..=self.nx()).map(|j| self.z_at(j, i)).collect()
    }

    pub fn set_z_slice(&mut self, i: usize, values: &[f64]) {
        for (j, &val) in values.iter().enumerate() {
            *self.z_at_mut(j, i) = val;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.u.iter().chain(&self.v).chain(&self.z).chain(&self.theta).all(|&x| x == 0.0)
    }

    pub fn pack(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.layout().dim());
        out.extend_from_slice(&self.u);
        out.extend_from_slice(&self.v);
        out.extend_from_slice(&self.z);
        out.extend_from_slice(&self.theta);
        out
    }

    pub fn unpack(flat: &[f64], grid: &Grid) -> Result<Self> {
        let lay = Layout::of(grid);
        if flat.len() != lay.dim() {
            return Err(Error::ShapeMismatch { expected: lay.dim(), got: flat.len() });
        }
        let (nx, nz) = (lay.nx, lay.z_len());
        Ok(Self {
            u: flat[..nx].to_vec(),
            v: flat[nx..2 * nx].to_vec(),
            z: flat[2 * nx..2 * nx + nz].to_vec(),
            theta: flat[2 * nx + nz..].to_vec(),
            nrho: lay.nrho,
        })
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        let lay = Layout::of(grid);
        let got = self.layout();
        if got != lay || self.z.len() != lay.z_len() || self.theta.len() != lay.nx + 1 {
            return Err(Error::ShapeMismatch { expected: lay.dim(), got: got.dim() });
        }
        Ok(())
    }

    /// Cell-centered strain of the current displacement.
    pub fn strain(&self, grid: &Grid) -> Vec<f64> {
        strain(&self.u, grid.dx())
    }

    /// Overwrite the `rho = 0` slice with the current strain so that
    /// `z(., 0) = u_x` holds exactly.
    pub fn sync_history_inflow(&mut self, grid: &Grid) {
        let ux = self.strain(grid);
        self.set_z_slice(0, &ux);
    }

    /// Subtract the mean temperature.
    pub fn project_theta_mean(&mut self) {
        let mean = self.theta.iter().sum::<f64>() / self.theta.len() as f64;
        self.theta.iter_mut().for_each(|t| *t -= mean);
    }
}

/// Discrete energy inner product
///
/// ```text
/// <U1, U2> = dx sum_j alpha (G u1)_j (G u2)_j + dx sum_a v1 v2
///          + dx sum_j theta1 theta2 + xi dx drho sum_{j,i} z1 z2
/// ```
///
/// The uniform `drho` weight on every `rho` node matches the upwind
/// transport, which makes the dissipativity computation telescope exactly.
pub fn inner_product_h(a: &State, b: &State, grid: &Grid, alpha: f64, xi: f64) -> Result<f64> {
    a.check_grid(grid)?;
    b.check_grid(grid)?;
    let dx = grid.dx();
    let sa = a.strain(grid);
    let sb = b.strain(grid);
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    Ok(dx * (alpha * dot(&sa, &sb) + dot(&a.v, &b.v) + dot(&a.theta, &b.theta))
        + xi * dx * grid.drho() * dot(&a.z, &b.z))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(grid: &Grid, seed: u64) -> State {
        let mut s = State::zeros(grid);
        let mut x = seed;
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        s.u.iter_mut().chain(s.v.iter_mut()).chain(s.z.iter_mut()).chain(s.theta.iter_mut()).for_each(|e| *e = next());
        s
    }

    #[test]
    fn pack_round_trip_and_locality() {
        let g = Grid::new(5, 3, 1.0).unwrap();
        let s = sample(&g, 7);
        let flat = s.pack();
        assert_eq!(flat.len(), Layout::of(&g).dim());
        assert_eq!(State::unpack(&flat, &g).unwrap(), s);
        assert!(State::zeros(&g).pack().iter().all(|&x| x == 0.0));
        let mut t = s.clone();
        t.u[2] += 1.0;
        let diff: Vec<usize> =
            t.pack().iter().zip(&flat).enumerate().filter(|(_, (a, b))| a != b).map(|(k, _)| k).collect();
        assert_eq!(diff, vec![Layout::of(&g).u(2)]);
        assert!(State::unpack(&flat[1..], &g).is_err());
    }

    #[test]
    fn layout_offsets_agree_with_pack() {
        let g = Grid::new(4, 2, 1.0).unwrap();
        let mut s = State::zeros(&g);
        *s.z_at_mut(3, 1) = 5.0;
        s.theta[4] = 2.0;
        let flat = s.pack();
        let lay = Layout::of(&g);
        assert_eq!(flat[lay.z(3, 1)], 5.0);
        assert_eq!(flat[lay.theta(4)], 2.0);
    }

    #[test]
    fn inner_product_is_symmetric_and_definite() {
        let g = Grid::new(6, 4, 1.0).unwrap();
        let (a, b) = (sample(&g, 1), sample(&g, 2));
        let ab = inner_product_h(&a, &b, &g, 1.3, 0.7).unwrap();
        let ba = inner_product_h(&b, &a, &g, 1.3, 0.7).unwrap();
        assert!((ab - ba).abs() < 1e-14);
        assert!(inner_product_h(&a, &a, &g, 1.3, 0.7).unwrap() > 0.0);
        let z = State::zeros(&g);
        assert_eq!(inner_product_h(&z, &z, &g, 1.3, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn history_block_is_orthogonal() {
        let g = Grid::new(6, 4, 1.0).unwrap();
        let mut s = State::zeros(&g);
        s.z = sample(&g, 3).z;
        let sq: f64 = s.z.iter().map(|x| x * x).sum();
        let expected = 0.7 * g.dx() * g.drho() * sq;
        assert!((inner_product_h(&s, &s, &g, 1.0, 0.7).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let g = Grid::new(6, 4, 1.0).unwrap();
        let h = Grid::new(7, 4, 1.0).unwrap();
        let a = State::zeros(&g);
        assert!(inner_product_h(&a, &a, &h, 1.0, 1.0).is_err());
    }
}
