//! Dense matrix exponential by scaling and squaring with a degree-13 Padé
//! approximant, used as an exact-in-time reference for small instances.

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::discretization::{Generator, State};
use crate::error::{Error, Result};

/// Largest generator dimension accepted by the dense exponential.
pub const EXPM_MAX_DIM: usize = 4000;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Scaling threshold for the degree-13 approximant (unit-roundoff backward
/// error bound in double precision).
const THETA13: f64 = 5.371920351148152;

/// Induced 1-norm (maximum absolute column sum).
pub fn norm_one(a: &Mat<f64>) -> f64 {
    (0..a.ncols()).map(|j| (0..a.nrows()).map(|i| a[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn combo(terms: &[(f64, &Mat<f64>)], identity: f64) -> Mat<f64> {
    let n = terms[0].1.nrows();
    Mat::from_fn(n, n, |i, j| {
        let mut s = if i == j { identity } else { 0.0 };
        for (c, m) in terms {
            s += c * m[(i, j)];
        }
        s
    })
}

/// `exp(a)` for a square matrix.
pub fn expm(a: &Mat<f64>) -> Result<Mat<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::ShapeMismatch { expected: n, got: a.ncols() });
    }
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let norm = norm_one(a);
    if !norm.is_finite() {
        return Err(Error::Domain("matrix exponential of a non-finite matrix".into()));
    }
    if norm == 0.0 {
        return Ok(Mat::identity(n, n));
    }
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let scale = 0.5_f64.powi(s);
    let a1 = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let a2 = &a1 * &a1;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let inner_u = combo(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)], 0.0);
    let u_poly = &a6 * &inner_u;
    let u_poly = combo(&[(1.0, &u_poly), (b[7], &a6), (b[5], &a4), (b[3], &a2)], b[1]);
    let u = &a1 * &u_poly;

    let inner_v = combo(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)], 0.0);
    let v = &a6 * &inner_v;
    let v = combo(&[(1.0, &v), (b[6], &a6), (b[4], &a4), (b[2], &a2)], b[0]);

    let p = combo(&[(1.0, &v), (1.0, &u)], 0.0);
    let q = combo(&[(1.0, &v), (-1.0, &u)], 0.0);
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    if r.col_iter().any(|c| c.iter().any(|x| !x.is_finite())) {
        return Err(Error::NoConvergence);
    }
    Ok(r)
}

/// `exp(t A) U` for the assembled generator `A` and packed state `U`.
pub fn expm_oracle(generator: &Generator, state: &State, t: f64) -> Result<State> {
    let dim = generator.dim();
    if dim > EXPM_MAX_DIM {
        return Err(Error::TooLarge { dim, limit: EXPM_MAX_DIM });
    }
    let a = generator.matrix.to_dense();
    let ta = Mat::from_fn(dim, dim, |i, j| t * a[(i, j)]);
    let e = expm(&ta)?;
    let x = state.pack();
    if x.len() != dim {
        return Err(Error::ShapeMismatch { expected: dim, got: x.len() });
    }
    let y: Vec<f64> = (0..dim).map(|i| (0..dim).map(|j| e[(i, j)] * x[j]).sum()).collect();
    State::unpack(&y, &generator.grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble_generator, Grid};
    use crate::params::PhysParams;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                m = m.max((a[(i, j)] - b[(i, j)]).abs());
            }
        }
        m
    }

    #[test]
    fn zero_gives_identity() {
        let e = expm(&Mat::zeros(5, 5)).unwrap();
        assert_eq!(max_diff(&e, &Mat::identity(5, 5)), 0.0);
    }

    #[test]
    fn rotation_block() {
        let t: f64 = 2.3;
        let a = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => t,
            (1, 0) => -t,
            _ => 0.0,
        });
        let e = expm(&a).unwrap();
        let expected = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) | (1, 1) => t.cos(),
            (0, 1) => t.sin(),
            _ => -t.sin(),
        });
        assert!(max_diff(&e, &expected) < 1e-14);
    }

    #[test]
    fn agrees_with_eigendecomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 12;
        // A = S D S^{-1} with known real spectrum.
        let s = Mat::from_fn(n, n, |i, j| if i == j { 3.0 } else { rng.random_range(-1.0..1.0) });
        let d: Vec<f64> = (0..n).map(|k| -2.0 + 0.4 * k as f64).collect();
        let sinv = s.partial_piv_lu().solve(&Mat::<f64>::identity(n, n));
        let sd = Mat::from_fn(n, n, |i, j| s[(i, j)] * d[j]);
        let a = &sd * &sinv;
        let sed = Mat::from_fn(n, n, |i, j| s[(i, j)] * d[j].exp());
        let expected = &sed * &sinv;
        let got = expm(&a).unwrap();
        assert!(max_diff(&got, &expected) < 1e-9 * norm_one(&expected));

        // Same check against a library eigendecomposition of a random matrix.
        let b = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let eig = b.eigen().unwrap();
        let (u, w) = (eig.U(), eig.S().column_vector());
        let uinv = u.to_owned().partial_piv_lu().solve(&Mat::<Complex64>::identity(n, n));
        let ue = Mat::from_fn(n, n, |i, j| u[(i, j)] * w[j].exp());
        let recon = &ue * &uinv;
        let got = expm(&b).unwrap();
        for i in 0..n {
            for j in 0..n {
                assert!((recon[(i, j)].re - got[(i, j)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn large_norm_uses_squaring() {
        let a = Mat::from_fn(3, 3, |i, j| if i == j { -(10.0 + i as f64) } else { 0.0 });
        let e = expm(&a).unwrap();
        for i in 0..3 {
            let x = (-(10.0 + i as f64)).exp();
            assert!((e[(i, i)] - x).abs() < 1e-13 * x);
        }
    }

    #[test]
    fn semigroup_property_on_generator() {
        let g = Grid::new(4, 4, 1.0).unwrap();
        let p = PhysParams { beta: 3.0, ..PhysParams::default() };
        let gen = assemble_generator(&g, &p).unwrap();
        let mut s = State::zeros(&g);
        s.u.iter_mut().enumerate().for_each(|(a, u)| *u = (a as f64 + 1.0).sin());
        s.sync_history_inflow(&g);
        let direct = expm_oracle(&gen, &s, 0.7).unwrap().pack();
        let two = expm_oracle(&gen, &expm_oracle(&gen, &s, 0.3).unwrap(), 0.4).unwrap().pack();
        let scale = direct.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let err = direct.iter().zip(&two).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-10 * scale);
        assert_eq!(expm_oracle(&gen, &s, 0.0).unwrap(), s);
    }
}
