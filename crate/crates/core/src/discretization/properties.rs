//! Property-based checks of the discrete invariants.

use crate::discretization::{assemble_generator, inner_product_h, Grid, State};
use crate::spectral::random_domain_state;
use crate::{PhysParams, ThetaBc};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn params() -> impl Strategy<Value = PhysParams> {
    (0.3..3.0f64, 0.5..50.0f64, 0.1..3.0f64, 0.1..3.0f64, 0.2..3.0f64, 0.5..3.0f64, any::<bool>()).prop_map(
        |(alpha, beta, gamma, kappa, tau, ell, dirichlet)| PhysParams {
            alpha,
            beta,
            gamma,
            kappa,
            tau,
            ell,
            theta_bc: if dirichlet { ThetaBc::Dirichlet } else { ThetaBc::Neumann },
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// The shifted generator is dissipative on states satisfying the
    /// inflow constraint, whenever the history weight is above the bound
    /// and alpha = 1 (the normalization under which the shift is derived).
    #[test]
    fn shifted_generator_is_dissipative(p in params(), nx in 4usize..14, nrho in 2usize..10, seed in any::<u64>(), factor in 2.0..8.0f64) {
        let p = PhysParams { alpha: 1.0, ..p };
        let g = Grid::new(nx, nrho, p.ell).unwrap();
        let gen = assemble_generator(&g, &p).unwrap();
        let xi = factor * p.tau * p.alpha * p.alpha / p.beta;
        let m = p.dissipativity_shift(xi);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for smooth in [false, true] {
            let s = random_domain_state(&gen, &mut rng, smooth);
            let a = gen.apply(&s).unwrap();
            let num = inner_product_h(&a, &s, &g, p.alpha, xi).unwrap();
            let den = inner_product_h(&s, &s, &g, p.alpha, xi).unwrap();
            prop_assert!(num / den - m <= 1e-10 * m.max(1.0), "{}", num / den - m);
        }
    }

    #[test]
    fn pack_unpack_round_trip(nx in 3usize..12, nrho in 2usize..8, seed in any::<u64>()) {
        let g = Grid::new(nx, nrho, 1.0).unwrap();
        let gen = assemble_generator(&g, &PhysParams::default()).unwrap();
        let s = random_domain_state(&gen, &mut ChaCha8Rng::seed_from_u64(seed), false);
        prop_assert_eq!(State::unpack(&s.pack(), &g).unwrap(), s);
    }

    #[test]
    fn inner_product_is_symmetric(nx in 3usize..12, nrho in 2usize..8, seed in any::<u64>(), alpha in 0.1..5.0f64, xi in 0.1..5.0f64) {
        let g = Grid::new(nx, nrho, 1.0).unwrap();
        let gen = assemble_generator(&g, &PhysParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_domain_state(&gen, &mut rng, false);
        let b = random_domain_state(&gen, &mut rng, true);
        let ab = inner_product_h(&a, &b, &g, alpha, xi).unwrap();
        let ba = inner_product_h(&b, &a, &g, alpha, xi).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab.abs()));
    }

    /// With insulated walls the temperature rows annihilate constants from
    /// the left: d/dt sum(theta) = 0 for every state.
    #[test]
    fn neumann_mass_rate_vanishes(p in params(), nx in 3usize..14, nrho in 2usize..6, seed in any::<u64>()) {
        let p = PhysParams { theta_bc: ThetaBc::Neumann, ..p };
        let g = Grid::new(nx, nrho, p.ell).unwrap();
        let gen = assemble_generator(&g, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = random_domain_state(&gen, &mut rng, false);
        s.theta.iter_mut().for_each(|t| *t += 3.0);
        let rate: f64 = gen.apply(&s).unwrap().theta.iter().sum();
        let scale: f64 = gen.apply(&s).unwrap().theta.iter().map(|t| t.abs()).sum();
        prop_assert!(rate.abs() <= 1e-12 * scale.max(1.0));
    }
}
