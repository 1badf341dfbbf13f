mod common;

use std::collections::HashSet;

use fpp_local::exploration::{explore, init_exploration, Caps, RootedMultiGraph};
use fpp_local::fpp::{colour_geodesic, shortest_path_tree, truncate};
use fpp_local::graph::generate;
use fpp_local::limit_tree::LimitTree;
use fpp_local::local_limit::{canonical_code, tv_distance, CanonicalCode, CodeHistogram, CodeOptions, HistogramMeta};
use fpp_local::models::{size_biased, DegreeModel, WeightModel};
use fpp_local::rng::RngStream;
use proptest::prelude::*;
use rand::Rng;

fn one_or_three() -> DegreeModel {
    DegreeModel::from_atoms(&[(1, 0.5), (3, 0.5)]).unwrap()
}

fn exp1() -> WeightModel {
    WeightModel::Exponential { rate: 1.0 }
}

fn histogram(counts: &[u64]) -> CodeHistogram {
    let mut h = CodeHistogram::new(HistogramMeta::default());
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 {
            h.add_count(CanonicalCode::from_hex(&format!("{i:02x}")).unwrap(), c);
        }
    }
    h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn codes_are_invariant_under_relabelling(seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 0);
        let g = common::random_coloured_graph(&mut rng, 12);
        let h = common::relabel(&g, &mut rng);
        let opts = CodeOptions::default();
        prop_assert_eq!(canonical_code(&g, &opts).unwrap(), canonical_code(&h, &opts).unwrap());
    }

    #[test]
    fn tv_is_a_metric_on_histograms(
        a in prop::collection::vec(0u64..20, 6),
        b in prop::collection::vec(0u64..20, 6),
        c in prop::collection::vec(0u64..20, 6),
    ) {
        prop_assume!(a.iter().sum::<u64>() > 0 && b.iter().sum::<u64>() > 0 && c.iter().sum::<u64>() > 0);
        let (ha, hb, hc) = (histogram(&a), histogram(&b), histogram(&c));
        let ab = tv_distance(&ha, &hb).unwrap();
        prop_assert_eq!(tv_distance(&ha, &ha).unwrap(), 0.0);
        prop_assert!((ab - tv_distance(&hb, &ha).unwrap()).abs() < 1e-15);
        prop_assert!(ab <= tv_distance(&ha, &hc).unwrap() + tv_distance(&hc, &hb).unwrap() + 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn merges_are_order_insensitive(
        a in prop::collection::vec(0u64..20, 6),
        b in prop::collection::vec(0u64..20, 6),
    ) {
        let (ha, hb) = (histogram(&a), histogram(&b));
        let mut ab = ha.clone();
        ab.merge(&hb);
        let mut ba = hb.clone();
        ba.merge(&ha);
        prop_assert_eq!(ab.to_json().unwrap(), ba.to_json().unwrap());
    }

    #[test]
    fn dijkstra_matches_bellman_ford(seed in any::<u64>(), n in 2usize..60) {
        let g = generate(n, &one_or_three(), &exp1(), &RngStream::new(seed, 1)).unwrap();
        let source = (seed % n as u64) as u32;
        prop_assert_eq!(shortest_path_tree(&g, source).dist, common::bellman_ford(&g, source));
    }

    #[test]
    fn red_edges_form_the_geodesic_and_survive_truncation(seed in any::<u64>(), radius in 0u32..4) {
        let g = generate(400, &one_or_three(), &exp1(), &RngStream::new(seed, 2)).unwrap();
        let mut rng = RngStream::new(seed, 3);
        for _ in 0..10 {
            let o = rng.random_range(0..400);
            let u = rng.random_range(0..400);
            let nb = colour_geodesic(&g, o, u);
            if o == u || !nb.distance.is_finite() {
                prop_assert!(nb.is_all_black());
            } else {
                let mut at = o;
                let mut visited = HashSet::from([o]);
                let mut length = 0.0;
                for &e in &nb.red_path {
                    let edge = g.edge(e);
                    prop_assert!(edge.a == at || edge.b == at);
                    at = if edge.a == at { edge.b } else { edge.a };
                    prop_assert!(visited.insert(at));
                    length += edge.weight;
                }
                prop_assert_eq!(at, u);
                prop_assert!((length - nb.distance).abs() <= 1e-9 * nb.distance.max(1.0));
            }
            // the ball keeps exactly the geodesic edges with both ends inside
            let ball = truncate(&nb, radius);
            let inside: HashSet<u32> = ball.original.iter().copied().collect();
            let kept = nb
                .red_path
                .iter()
                .filter(|&&e| inside.contains(&g.edge(e).a) && inside.contains(&g.edge(e).b))
                .count();
            prop_assert_eq!(ball.graph.red_count(), kept);
        }
    }

    #[test]
    fn explored_distances_never_decrease(seed in any::<u64>(), radius in 0u32..3) {
        let d = one_or_three();
        let off = size_biased(&d).unwrap();
        let stream = RngStream::new(seed, 4);
        let mut tree = LimitTree::new(&d, &off, &exp1(), RngStream::new(seed, 5));
        let mut g = generate(2000, &d, &exp1(), &RngStream::new(seed, 6)).unwrap();
        for on_tree in [true, false] {
            let mut last = f64::NEG_INFINITY;
            let mut check = |s: &fpp_local::exploration::ExplorationState| {
                if let Some(d) = s.v_star_distance() {
                    assert!(d >= last, "{d} < {last}");
                    last = d;
                }
                Ok(())
            };
            let run = if on_tree {
                let mut state = init_exploration(&mut tree, radius, &stream).unwrap();
                explore(&mut tree, &mut state, 60, Caps::default(), &mut check).unwrap()
            } else {
                let mut view = RootedMultiGraph { graph: &mut g, root: 0 };
                let mut state = init_exploration(&mut view, radius, &stream).unwrap();
                explore(&mut view, &mut state, 60, Caps::default(), &mut check).unwrap()
            };
            prop_assert!(run.exhausted || run.steps == 60);
        }
    }
}
