mod support;

use lcp_core::graph::{normalize_adjacency, GraphConfig, TextGraph};
use lcp_core::linalg::SparseMatrix;
use proptest::prelude::*;
use support::*;

#[test]
fn normalization_and_equivariance() {
    graph_oracle().unwrap_or_else(|e| panic!("{e}"));
}

#[test]
fn built_graph_spectrum_is_bounded() {
    let sentences = [
        "the shepherd led the flock over the river",
        "the council debated the budget motion",
        "a kinase binds the receptor on the membrane",
        "the river flooded the ancient temple",
        "the budget vote passed the council",
    ];
    let names: Vec<String> = (0..sentences.len()).map(|i| format!("d{i}")).collect();
    let g = TextGraph::build(&names, &sentences, GraphConfig { window: 4, min_word_count: 1 }).unwrap();
    let rho = spectral_radius(&g.normalized().to_dense(), 2000);
    assert!(rho <= 1.0 + 1e-9, "spectral radius {rho}");
    // Â has eigenvalue 1 on every connected component
    assert!((rho - 1.0).abs() < 1e-6, "spectral radius {rho}");
}

proptest! {
    #[test]
    fn random_graph_eigenvalues_in_unit_interval(seed in 0u64..10_000, n in 1usize..12) {
        let mut r = rng(seed);
        let a = random_adjacency(&mut r, n);
        let norm = normalize_adjacency(&a).unwrap().to_dense();
        prop_assert!(spectral_radius(&norm, 3000) <= 1.0 + 1e-9);
        prop_assert!(normalize_adjacency(&a).unwrap().is_symmetric());
    }

    #[test]
    fn sparse_and_dense_normalization_agree(seed in 0u64..10_000, n in 1usize..9) {
        let mut r = rng(seed);
        let a: SparseMatrix = random_adjacency(&mut r, n);
        let got = normalize_adjacency(&a).unwrap().to_dense();
        let expect = dense_normalized(&a.to_dense());
        for (x, y) in got.data().iter().zip(expect.data()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }
}
