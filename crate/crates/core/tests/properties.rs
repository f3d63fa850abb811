use proptest::prelude::*;

use morita_lab::generator::{generate, random_bimodule_map, Scenario};
use morita_lab::linalg::{ALGEBRAIC_TOL, C64};
use morita_lab::transfer::{f_forward, f_inverse};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transfer_is_linear_and_invertible(
        preset in prop::sample::select(vec!["trivial", "corner-m2", "diag-m2", "multiblock"]),
        seed in 1u64..500,
        ar in -2.0f64..2.0, ai in -2.0f64..2.0,
        br in -2.0f64..2.0, bi in -2.0f64..2.0,
    ) {
        let b = generate(&Scenario::preset(preset, seed).unwrap()).unwrap();
        let other = random_bimodule_map(b.pair.left(), seed + 1).unwrap();
        let (al, be) = (C64::new(ar, ai), C64::new(br, bi));
        let mix = b.phi.combine(al, &other, be).unwrap();
        let lhs = f_forward(&b.pair, &mix).unwrap();
        let rhs = f_forward(&b.pair, &b.phi).unwrap()
            .combine(al, &f_forward(&b.pair, &other).unwrap(), be).unwrap();
        prop_assert!(lhs.distance(&rhs) <= ALGEBRAIC_TOL * 4.0);
        let back = f_inverse(&b.pair, &lhs).unwrap();
        prop_assert!(back.distance(&mix) <= ALGEBRAIC_TOL * 4.0);
    }

    #[test]
    fn generation_is_deterministic(seed in 1u64..1000) {
        let s = Scenario::preset("multiblock", seed).unwrap();
        let (a, b) = (generate(&s).unwrap(), generate(&s).unwrap());
        prop_assert_eq!(a.phi.coeffs(), b.phi.coeffs());
        prop_assert_eq!(serde_json::to_string(&a.pair).unwrap(), serde_json::to_string(&b.pair).unwrap());
    }
}
