//! The generator's spectrum against the roots of the per-mode
//! characteristic polynomials, computed independently with the Aberth
//! simultaneous iteration.
//!
//! With insulated walls the sine modes of the displacement and the cosine
//! modes of the strain, history and temperature diagonalize the stencils.
//! For mode `k` with symbol `s_k = (2/dx) sin(k pi / (2 (nx + 1)))` the
//! eigenvalues solve
//!
//! ```text
//! (s^2 + beta s_k^2 s)(s + kappa s_k^2) q(s) + alpha s_k^2 (s + kappa s_k^2)
//!     + gamma^2 s_k^2 s q(s) = 0,        q(s) = (1 + s tau drho)^nrho.
//! ```
//!
//! The constant mode adds the transport cluster `-nrho / tau` (a single
//! Jordan block, excluded from matching) besides the deflated zeros.

use num_complex::Complex64;
use thermodelay::discretization::{assemble_generator, Grid};
use thermodelay::spectral::{spectrum_deflated, spectrum_dense, Deflation};
use thermodelay::{PhysParams, ThetaBc};

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, x) in b.iter().enumerate() {
        out[i] += x;
    }
    out
}

/// Coefficients in ascending powers.
fn characteristic(p: &PhysParams, sigma: f64, tau_drho: f64, nrho: usize) -> Vec<f64> {
    let s2 = sigma * sigma;
    let mut q = vec![1.0];
    for _ in 0..nrho {
        q = poly_mul(&q, &[1.0, tau_drho]);
    }
    let heat = [p.kappa * s2, 1.0];
    let elastic = [0.0, p.beta * s2, 1.0];
    let a = poly_mul(&poly_mul(&elastic, &heat), &q);
    let b: Vec<f64> = heat.iter().map(|c| p.alpha * s2 * c).collect();
    let c = poly_mul(&[0.0, p.gamma * p.gamma * s2], &q);
    poly_add(&poly_add(&a, &b), &c)
}

fn eval(c: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &a in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp)
}

fn aberth(c: &[f64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let lead = c[n];
    let radius = 1.0 + c[..n].iter().map(|a| (a / lead).abs()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(0.5 * radius, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0_f64;
        for k in 0..n {
            let (p, dp) = eval(c, z[k]);
            if p == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n).filter(|&j| j != k).map(|j| 1.0 / (z[k] - z[j])).sum();
            let w = ratio / (1.0 - ratio * repulsion);
            z[k] -= w;
            moved = moved.max(w.norm() / z[k].norm().max(1.0));
        }
        if moved < 1e-15 {
            break;
        }
    }
    // Newton polish.
    for zk in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = eval(c, *zk);
            if dp.norm() > 0.0 {
                *zk -= p / dp;
            }
        }
    }
    z
}

fn oracle_roots(p: &PhysParams, grid: &Grid) -> Vec<Complex64> {
    let nx = grid.nx();
    let mut roots = Vec::new();
    for k in 1..=nx {
        let sigma = 2.0 / grid.dx() * (k as f64 * std::f64::consts::PI / (2.0 * (nx + 1) as f64)).sin();
        roots.extend(aberth(&characteristic(p, sigma, p.tau * grid.drho(), grid.nrho())));
    }
    roots
}

/// Greedy nearest matching; returns the worst relative distance and the
/// eigenvalues left unmatched.
fn match_roots(roots: &[Complex64], spectrum: &[Complex64]) -> (f64, Vec<Complex64>) {
    let mut pool = spectrum.to_vec();
    let mut worst = 0.0_f64;
    for r in roots {
        let (idx, d) =
            pool.iter().enumerate().map(|(i, z)| (i, (z - r).norm())).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        worst = worst.max(d / r.norm().max(1.0));
        pool.swap_remove(idx);
    }
    (worst, pool)
}

fn check(p: PhysParams) {
    let grid = Grid::new(5, 6, p.ell).unwrap();
    let gen = assemble_generator(&grid, &p).unwrap();
    assert!((55..=65).contains(&gen.dim()));
    let roots = oracle_roots(&p, &grid);
    let spectrum = spectrum_deflated(&gen, Deflation::default()).unwrap();
    assert_eq!(spectrum.len(), roots.len() + grid.nrho());
    let (worst, rest) = match_roots(&roots, &spectrum);
    assert!(worst < 1e-8, "worst relative mismatch {worst:e}");
    // The leftover eigenvalues are the perturbed transport cluster.
    let cluster = -(grid.nrho() as f64) / p.tau;
    for z in rest {
        assert!((z - cluster).norm() < 0.05 * cluster.abs(), "{z} not near {cluster}");
    }
    // Undeflated: the same plus nx + 2 zeros.
    let full = spectrum_dense(&gen).unwrap();
    let zeros = full.iter().filter(|z| z.norm() < 1e-8).count();
    assert_eq!(full.len(), spectrum.len() + grid.ncells() + 1);
    assert_eq!(zeros, grid.ncells() + 1);
}

#[test]
fn damped_spectrum_matches_mode_polynomials() {
    check(PhysParams { alpha: 1.3, beta: 0.7, gamma: 0.9, kappa: 1.1, tau: 0.8, ell: 1.5, theta_bc: ThetaBc::Neumann });
}

#[test]
fn undamped_spectrum_matches_mode_polynomials() {
    let p = PhysParams { beta: 0.0, ..PhysParams::default() };
    check(p);
    // Without damping some mode polynomial has a root in the right half plane.
    let grid = Grid::new(5, 6, 1.0).unwrap();
    assert!(oracle_roots(&p, &grid).iter().any(|z| z.re > 0.0));
}
