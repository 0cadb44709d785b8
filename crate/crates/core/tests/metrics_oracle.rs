mod support;

use lcp_core::metrics::{mae, pearson};
use proptest::prelude::*;

#[test]
fn metrics_match_hand_values_and_affine_invariance() {
    support::metrics_oracle().unwrap_or_else(|e| panic!("{e}"));
}

proptest! {
    #[test]
    fn pearson_is_bounded_and_symmetric(a in proptest::collection::vec(-10.0f64..10.0, 2..30), seed in 0u64..1000) {
        let mut r = support::rng(seed);
        let b: Vec<f64> = a.iter().map(|_| rand::Rng::gen_range(&mut r, -10.0..10.0)).collect();
        if let (Ok(x), Ok(y)) = (pearson(&a, &b), pearson(&b, &a)) {
            prop_assert!((-1.0..=1.0).contains(&x));
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn mae_is_a_metric(a in proptest::collection::vec(-1.0f64..1.0, 1..30)) {
        prop_assert_eq!(mae(&a, &a).unwrap(), 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + 0.25).collect();
        prop_assert!((mae(&a, &b).unwrap() - 0.25).abs() < 1e-12);
        prop_assert_eq!(mae(&a, &b).unwrap(), mae(&b, &a).unwrap());
    }
}
