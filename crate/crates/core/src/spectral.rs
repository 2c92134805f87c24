//! Eigenvalue analysis of the discrete generator: dense spectrum, spectral
//! abscissa on the physical subspace with inverse-iteration refinement, and
//! the randomized dissipativity test of the shifted generator.
//!
//! Two families of eigenvalues carry no dynamics and are deflated by
//! default before taking the abscissa:
//! * the `z(., 0)` block is a passive copy of the strain, contributing
//!   `nx + 1` zero eigenvalues (its columns vanish);
//! * with insulated walls the temperature mean is conserved, so the mean
//!   functional is a left null vector and contributes one more zero.

use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::banded::{BandedLu, BandedMatrix};
use crate::discretization::{inner_product_h, Generator, State};
use crate::error::{Error, Result};
use crate::params::ThetaBc;

/// Largest dimension handled by the dense eigensolver (the 64 x 64 grid
/// has dimension 4418).
pub const DENSE_MAX_DIM: usize = 4500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deflation {
    /// Drop the passive `z(., 0)` block.
    pub inflow: bool,
    /// Restrict to zero-mean temperature (insulated walls only).
    pub theta_mean: bool,
}

impl Default for Deflation {
    fn default() -> Self {
        Self { inflow: true, theta_mean: true }
    }
}

impl Deflation {
    pub const NONE: Self = Self { inflow: false, theta_mean: false };
}

/// Linear maps between packed coordinates and the deflated coordinates.
struct Reduction {
    /// Packed indices kept as reduced coordinates, in order.
    kept: Vec<usize>,
    /// Packed index of the temperature eliminated by the mean constraint.
    eliminated_theta: Option<usize>,
    /// Packed indices of the remaining temperatures.
    thetas: Vec<usize>,
    dim: usize,
}

impl Reduction {
    fn new(gen: &Generator, d: Deflation) -> Self {
        let lay = gen.layout;
        let inflow: Vec<usize> = if d.inflow { gen.inflow_indices() } else { Vec::new() };
        let eliminated_theta = (d.theta_mean && gen.params.theta_bc == ThetaBc::Neumann).then(|| lay.theta(lay.nx));
        let kept: Vec<usize> = (0..lay.dim()).filter(|k| !inflow.contains(k) && Some(*k) != eliminated_theta).collect();
        let thetas = (0..lay.nx).map(|j| lay.theta(j)).collect();
        Self { kept, eliminated_theta, thetas, dim: lay.dim() }
    }

    /// Dense matrix of `A` restricted to the reduced coordinates.
    fn restrict(&self, a: &Mat<f64>) -> Mat<f64> {
        let n = self.kept.len();
        let mut out = Mat::from_fn(n, n, |r, c| a[(self.kept[r], self.kept[c])]);
        if let Some(last) = self.eliminated_theta {
            // Basis vector of a kept temperature is e_theta - e_last.
            let pos: Vec<usize> = self.thetas.iter().map(|t| self.kept.binary_search(t).unwrap()).collect();
            for &c in &pos {
                for r in 0..n {
                    out[(r, c)] -= a[(self.kept[r], last)];
                }
            }
        }
        out
    }
}

/// Dense spectrum sorted by real part, descending (ties by imaginary part).
pub fn eigenvalues_sorted(a: &Mat<f64>) -> Result<Vec<Complex64>> {
    let mut ev: Vec<Complex64> =
        a.eigenvalues().map_err(|_| Error::NoConvergence)?.into_iter().map(|z| Complex64::new(z.re, z.im)).collect();
    ev.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    Ok(ev)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim > DENSE_MAX_DIM {
        return Err(Error::TooLarge { dim, limit: DENSE_MAX_DIM });
    }
    Ok(())
}

/// Full spectrum of the generator (no deflation).
pub fn spectrum_dense(gen: &Generator) -> Result<Vec<Complex64>> {
    spectrum_deflated(gen, Deflation::NONE)
}

pub fn spectrum_deflated(gen: &Generator, deflation: Deflation) -> Result<Vec<Complex64>> {
    check_dim(gen.dim())?;
    let red = Reduction::new(gen, deflation);
    debug_assert_eq!(red.dim, gen.dim());
    eigenvalues_sorted(&red.restrict(&gen.matrix.to_dense()))
}

/// A refined eigenpair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedEigenvalue {
    pub value: Complex64,
    /// `|A x - value x| / |x|` in the packed coordinates.
    pub residual: f64,
    pub converged: bool,
}

/// Spectral abscissa with the achieving eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Abscissa {
    pub value: f64,
    pub eigenvalue: Complex64,
    pub residual: f64,
    /// Deflated spectrum, sorted by real part descending.
    pub spectrum: Vec<Complex64>,
    /// Refinements of the rightmost eigenvalues.
    pub refined: Vec<RefinedEigenvalue>,
}

/// Complex band matrix of `A - shift I` in the generator's banded ordering.
fn shifted_band(gen: &Generator, perm: &[usize], shift: Complex64) -> BandedMatrix<Complex64> {
    let (kl, ku) = gen.matrix.bandwidths(perm);
    let mut m = BandedMatrix::zeros(gen.dim(), kl.max(1), ku.max(1));
    for (r, c, v) in gen.matrix.triplets() {
        m.add_to(perm[r], perm[c], Complex64::new(v, 0.0));
    }
    for k in 0..gen.dim() {
        m.add_to(k, k, -shift);
    }
    m
}

fn apply_complex(gen: &Generator, x: &[Complex64]) -> Vec<Complex64> {
    let re: Vec<f64> = x.iter().map(|z| z.re).collect();
    let im: Vec<f64> = x.iter().map(|z| z.im).collect();
    let (ar, ai) = (gen.matrix.mul_vec(&re), gen.matrix.mul_vec(&im));
    ar.into_iter().zip(ai).map(|(r, i)| Complex64::new(r, i)).collect()
}

fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Refine an eigenvalue estimate by shifted inverse iteration with a
/// Rayleigh-quotient update, using a banded complex LU.
pub fn refine_eigenvalue(gen: &Generator, estimate: Complex64, tol: f64) -> Result<RefinedEigenvalue> {
    let n = gen.dim();
    let perm = gen.banded_order();
    let scale = gen.matrix.triplets().fold(1.0_f64, |m, (_, _, v)| m.max(v.abs()));
    let mut shift = estimate + Complex64::new(1e-10, 1e-10) * scale.max(estimate.norm()) * f64::EPSILON.sqrt() * 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<Complex64> =
        (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let mut best = RefinedEigenvalue { value: estimate, residual: f64::INFINITY, converged: false };
    for _refactor in 0..3 {
        let lu: BandedLu<Complex64> = match shifted_band(gen, &perm, shift).factor() {
            Ok(lu) => lu,
            // The shift is an eigenvalue to working precision; perturb it.
            Err(Error::Singular { .. }) => {
                shift += Complex64::new(1e-9, 1e-9) * shift.norm().max(1.0);
                continue;
            }
            Err(e) => return Err(e),
        };
        for _ in 0..6 {
            let mut y: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n];
            for (k, &p) in perm.iter().enumerate() {
                y[p] = x[k];
            }
            lu.solve_in_place(&mut y);
            let mut z = vec![Complex64::new(0.0, 0.0); n];
            for (k, &p) in perm.iter().enumerate() {
                z[k] = y[p];
            }
            let nz = norm(&z);
            if !(nz.is_finite() && nz > 0.0) {
                break;
            }
            x = z.into_iter().map(|v| v / nz).collect();
            let ax = apply_complex(gen, &x);
            let rq: Complex64 = x.iter().zip(&ax).map(|(a, b)| a.conj() * b).sum();
            let res = norm(&ax.iter().zip(&x).map(|(a, b)| a - rq * b).collect::<Vec<_>>());
            if res < best.residual {
                best = RefinedEigenvalue { value: rq, residual: res, converged: res <= tol };
            }
            if res <= tol {
                return Ok(best);
            }
        }
        shift = best.value + Complex64::new(1e-12, 1e-12) * best.value.norm().max(1.0);
    }
    Ok(best)
}

/// Spectral abscissa on the deflated subspace; the ten rightmost
/// eigenvalues are refined by inverse iteration.
pub fn spectral_abscissa(gen: &Generator) -> Result<Abscissa> {
    spectral_abscissa_with(gen, Deflation::default(), 10)
}

pub fn spectral_abscissa_with(gen: &Generator, deflation: Deflation, refine: usize) -> Result<Abscissa> {
    let spectrum = spectrum_deflated(gen, deflation)?;
    let first = *spectrum.first().ok_or(Error::NoConvergence)?;
    let mut refined = Vec::with_capacity(refine);
    for &ev in spectrum.iter().take(refine) {
        refined.push(refine_eigenvalue(gen, ev, 1e-8)?);
    }
    let residual = refined.first().map_or(f64::NAN, |r| r.residual);
    Ok(Abscissa { value: first.re, eigenvalue: first, residual, spectrum, refined })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipativityReport {
    /// Largest `<(A - m) U, U> / <U, U>` over the sampled states.
    pub max_rayleigh: f64,
    pub m_used: f64,
    pub trials: usize,
}

/// Draw a state satisfying the domain constraints: `z(., 0) = u_x` and,
/// with insulated walls, zero-mean temperature. Alternates white noise with
/// smooth random Fourier combinations.
pub fn random_domain_state(gen: &Generator, rng: &mut ChaCha8Rng, smooth: bool) -> State {
    let g = &gen.grid;
    let mut s = State::zeros(g);
    if smooth {
        let modes = 6;
        let coeffs: Vec<[f64; 4]> =
            (0..modes).map(|_| std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal))).collect();
        let ell = g.ell();
        for a in 0..g.nx() {
            let x = g.node_x(a);
            for (k, c) in coeffs.iter().enumerate() {
                let w = ((k + 1) as f64 * std::f64::consts::PI * x / ell).sin() / (k + 1) as f64;
                s.u[a] += c[0] * w / (k + 1) as f64;
                s.v[a] += c[1] * w;
            }
        }
        for j in 0..g.ncells() {
            let x = g.cell_x(j);
            for (k, c) in coeffs.iter().enumerate() {
                s.theta[j] += c[2] * ((k + 1) as f64 * std::f64::consts::PI * x / ell).cos() / (k + 1) as f64;
            }
            for i in 0..=g.nrho() {
                let r = g.rho(i);
                *s.z_at_mut(j, i) = coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c[3] * ((k as f64 + 0.5) * std::f64::consts::PI * (x / ell + r)).cos())
                    .sum();
            }
        }
    } else {
        for x in s.u.iter_mut().chain(s.v.iter_mut()).chain(s.z.iter_mut()).chain(s.theta.iter_mut()) {
            *x = rng.sample(StandardNormal);
        }
    }
    s.sync_history_inflow(g);
    if gen.params.theta_bc == ThetaBc::Neumann {
        s.project_theta_mean();
    }
    s
}

/// Maximum Rayleigh quotient of the shifted generator over random states
/// in the discrete energy inner product.
pub fn dissipativity_test(gen: &Generator, xi: f64, trials: usize, seed: u64) -> Result<DissipativityReport> {
    let p = &gen.params;
    if !(xi.is_finite() && xi > 0.0) {
        return Err(Error::InvalidParameter { name: "xi", reason: format!("must be > 0, got {xi}") });
    }
    if p.beta > 0.0 && xi <= p.xi_lower_bound() {
        log::warn!("xi = {xi} is below the dissipativity bound {}", p.xi_lower_bound());
    }
    let m = p.dissipativity_shift(xi);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rayleigh = f64::NEG_INFINITY;
    for t in 0..trials {
        let s = random_domain_state(gen, &mut rng, t % 2 == 1);
        let norm2 = inner_product_h(&s, &s, &gen.grid, p.alpha, xi)?;
        if norm2 == 0.0 {
            continue;
        }
        let a = gen.apply(&s)?;
        let q = inner_product_h(&a, &s, &gen.grid, p.alpha, xi)? / norm2 - m;
        max_rayleigh = max_rayleigh.max(q);
    }
    Ok(DissipativityReport { max_rayleigh, m_used: m, trials })
}
