mod common;

use common::{random_clustering, random_metric};
use ipcluster::metric::{generate, GenKind, GenSpec};
use ipcluster::stable_opt::{
    beta, beta_clustering, brute_force_min_beta, create_tree, mst, stable_cluster,
};
use ipcluster::{verify_stability, Objective};
use proptest::prelude::*;

fn planted(n: usize, k: usize, sep: f64, seed: u64) -> ipcluster::metric::Generated {
    let spec = GenSpec {
        separation: sep,
        ..GenSpec::new(GenKind::PlantedSeparated, n, k, seed)
    };
    generate(&spec).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beta_bounds_average_envy(n in 2usize..=50, k in 2usize..=6, seed: u64) {
        prop_assume!(k <= n);
        let s = random_metric(n, seed);
        let cl = random_clustering(n, k, seed);
        let alpha = verify_stability(&s, &cl, Objective::Avg, None).unwrap().alpha_achieved;
        let b = beta_clustering(&s, &cl);
        prop_assert!(alpha <= b * (1.0 + 1e-12), "alpha {alpha} > beta {b}");
        let direct = cl.clusters().map(|c| beta(&s, c).unwrap()).fold(0.0, f64::max);
        prop_assert_eq!(b, direct);
    }

    #[test]
    fn planted_clusters_are_tree_nodes(n in 3usize..=80, k in 2usize..=6, sep in 0.001f64..0.9, seed: u64) {
        prop_assume!(k <= n);
        let g = planted(n, k, sep, seed);
        let cl = g.planted.unwrap();
        prop_assume!(beta_clustering(&g.space, &cl) < 1.0);
        let tree = create_tree(&g.space, &mst(&g.space)).unwrap();
        let nodes: Vec<Vec<usize>> = (0..tree.nodes.len())
            .map(|u| {
                let mut v = tree.points(u).to_vec();
                v.sort_unstable();
                v
            })
            .collect();
        for c in cl.clusters() {
            let mut c = c.to_vec();
            c.sort_unstable();
            prop_assert!(nodes.contains(&c), "cluster {c:?} is not a tree node");
        }
    }

    #[test]
    fn dp_matches_brute_force_when_separable(n in 3usize..=8, k in 2usize..=4, seed: u64) {
        prop_assume!(k <= n);
        let s = random_metric(n, seed);
        let brute = brute_force_min_beta(&s, k).unwrap();
        let (out, b) = stable_cluster(&s, k).unwrap();
        prop_assert_eq!(out.k(), k);
        prop_assert_eq!(b, beta_clustering(&s, &out));
        prop_assert!(b >= brute.beta);
        if brute.beta < 1.0 {
            prop_assert_eq!(b, brute.beta);
        }
    }

    #[test]
    fn dp_recovers_planted_partitions(n in 4usize..=10, k in 2usize..=3, sep in 0.001f64..0.5, seed: u64) {
        prop_assume!(k <= n);
        let g = planted(n, k, sep, seed);
        let brute = brute_force_min_beta(&g.space, k).unwrap();
        let (out, b) = stable_cluster(&g.space, k).unwrap();
        prop_assert!(brute.beta < 1.0);
        prop_assert_eq!(b, brute.beta);
        prop_assert!(b <= beta_clustering(&g.space, g.planted.as_ref().unwrap()));
        prop_assert!(verify_stability(&g.space, &out, Objective::Avg, Some(b)).unwrap().stable.unwrap());
    }

    #[test]
    fn near_stable_instances_verify_at_three_alpha(n in 4usize..=60, k in 2usize..=5, seed: u64) {
        prop_assume!(k <= n);
        let g = planted(n, k, 1e-4, seed);
        let alpha_star = verify_stability(&g.space, g.planted.as_ref().unwrap(), Objective::Avg, None)
            .unwrap()
            .alpha_achieved;
        prop_assert!(alpha_star < 0.001);
        let (out, _) = stable_cluster(&g.space, k).unwrap();
        prop_assert!(verify_stability(&g.space, &out, Objective::Avg, Some(3.0 * alpha_star)).unwrap().stable.unwrap());
    }
}
