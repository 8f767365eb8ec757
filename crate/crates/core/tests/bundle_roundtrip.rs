use hatgae::graph::{load_graph_bundle, save_graph_bundle, sbm_generate, Graph, SbmConfig};
use ndarray::Array2;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn save_then_load_is_identity(
        n in 1usize..15,
        f in 1usize..5,
        directed in any::<bool>(),
        raw_edges in proptest::collection::btree_set((0usize..15, 0usize..15), 0..40),
        vals in proptest::collection::vec(-1e6f64..1e6, 75),
    ) {
        let mut seen = std::collections::BTreeSet::new();
        let edges: Vec<(usize, usize)> = raw_edges
            .into_iter()
            .filter(|&(u, v)| u < n && v < n)
            .filter(|&(u, v)| seen.insert(if directed { (u, v) } else { (u.min(v), u.max(v)) }))
            .collect();
        let x = Array2::from_shape_fn((n, f), |(i, j)| vals[i * 5 + j]);
        let g = Graph::from_edges(x, &edges, directed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_graph_bundle(&g, dir.path()).unwrap();
        let back = load_graph_bundle(dir.path()).unwrap();
        prop_assert_eq!(back.features(), g.features());
        prop_assert_eq!(back.is_directed(), directed);
        prop_assert_eq!(back.directed_edges().collect::<Vec<_>>(), g.directed_edges().collect::<Vec<_>>());
    }
}

#[test]
fn sbm_bundle_round_trip_keeps_labels_and_split() {
    let g = sbm_generate(&SbmConfig { n_nodes: 45, ..SbmConfig::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_graph_bundle(&g, dir.path()).unwrap();
    let back = load_graph_bundle(dir.path()).unwrap();
    assert_eq!(back.labels(), g.labels());
    assert_eq!(back.split(), g.split());
    assert_eq!(back.features(), g.features());
    assert_eq!(back.canonical_edges(), g.canonical_edges());
}
