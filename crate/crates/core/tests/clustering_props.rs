mod common;

use common::{avg, le, median, members, random_clustering, random_metric, random_subset};
use ipcluster::clustering::{envy_ratio, median_dist};
use ipcluster::rng;
use ipcluster::{verify_stability, Clustering, MetricSpace, Objective};
use proptest::prelude::*;
use rand::Rng;

/// Per-point worst envy by direct loops, summing in index order.
fn naive_envy(space: &MetricSpace, cl: &Clustering, objective: Objective) -> Vec<f64> {
    let n = space.n();
    (0..n)
        .map(|p| {
            let own_c = cl.cluster_of(p);
            let own: Vec<usize> = (0..n)
                .filter(|&q| q != p && cl.cluster_of(q) == own_c)
                .collect();
            if own.is_empty() {
                return 0.0;
            }
            let f = |s: &[usize]| match objective {
                Objective::Avg => {
                    let mut sum = 0.0;
                    for &q in s {
                        sum += space.distance(p, q);
                    }
                    sum / s.len() as f64
                }
                Objective::Median => median(space, p, s),
                Objective::SqrtMedian => median(space, p, s).sqrt(),
                Objective::Max => s.iter().map(|&q| space.distance(p, q)).fold(0.0, f64::max),
            };
            let mine = f(&own);
            let mut worst = 0.0f64;
            for c in (0..cl.k()).filter(|&c| c != own_c) {
                let other: Vec<usize> = (0..n).filter(|&q| cl.cluster_of(q) == c).collect();
                worst = worst.max(envy_ratio(mine, f(&other)));
            }
            worst
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn verifier_matches_naive_oracle(n in 2usize..=40, k in 2usize..=6, seed: u64) {
        prop_assume!(k <= n);
        let s = random_metric(n, seed);
        let cl = random_clustering(n, k, seed);
        for objective in [Objective::Avg, Objective::Median, Objective::SqrtMedian, Objective::Max] {
            let r = verify_stability(&s, &cl, objective, Some(1.0)).unwrap();
            let naive = naive_envy(&s, &cl, objective);
            prop_assert_eq!(&r.per_point, &naive);
            let top = naive.iter().copied().fold(0.0, f64::max);
            prop_assert_eq!(r.alpha_achieved, top);
            prop_assert_eq!(r.stable, Some(top <= 1.0));
            if let Some((p, c)) = r.witness {
                prop_assert_eq!(r.per_point[p], top);
                prop_assert_ne!(c, cl.cluster_of(p));
            } else {
                prop_assert_eq!(top, 0.0);
            }
        }
    }

    #[test]
    fn averaging_bound_exhaustive(n in 2usize..=8, seed: u64) {
        let s = random_metric(n, seed);
        for mask in 1u32..(1 << n) {
            let set = members(mask, n);
            let mean: f64 = set.iter().map(|&q| avg(&s, q, &set)).sum::<f64>() / set.len() as f64;
            for p in 0..n {
                prop_assert!(le(mean, 2.0 * avg(&s, p, &set), 1e-9), "mask {mask:b}, p {p}");
            }
        }
    }

    #[test]
    fn averaging_bound_sampled(n in 3usize..=256, seed: u64) {
        let s = random_metric(n, seed);
        let mut r = rng::seeded(seed);
        for _ in 0..20 {
            let set = random_subset(n, n, &mut r);
            let p = r.gen_range(0..n);
            let mean: f64 = set.iter().map(|&q| avg(&s, q, &set)).sum::<f64>() / set.len() as f64;
            prop_assert!(le(mean, 2.0 * avg(&s, p, &set), 1e-9));
        }
    }

    #[test]
    fn cross_distance_bound(n in 3usize..=120, seed: u64) {
        let s = random_metric(n, seed);
        let mut r = rng::seeded(seed ^ 1);
        for _ in 0..20 {
            let set = random_subset(n, n, &mut r);
            prop_assume!(set.len() >= 2);
            let cut = r.gen_range(1..set.len());
            let (s1, s2) = set.split_at(cut);
            let cross: f64 = s1.iter().map(|&a| common::sum_d(&s, a, s2)).sum::<f64>()
                / (s1.len() * s2.len()) as f64;
            let p = r.gen_range(0..n);
            prop_assert!(le(cross, avg(&s, p, s1) + avg(&s, p, s2), 1e-9));
        }
    }

    #[test]
    fn medians_of_far_points_exhaustive(n in 2usize..=8, seed: u64) {
        let s = random_metric(n, seed);
        for mask in 1u32..(1 << n) {
            let c = members(mask, n);
            if c.len() < 2 {
                continue;
            }
            for &p in &c {
                for &q in &c {
                    if p == q {
                        continue;
                    }
                    let without = |x: usize| -> Vec<usize> { c.iter().copied().filter(|&y| y != x).collect() };
                    let lhs = median_dist(&s, p, &without(p)).unwrap() + median_dist(&s, q, &without(q)).unwrap();
                    prop_assert!(le(s.distance(p, q), lhs, 1e-9));
                }
            }
        }
    }

    #[test]
    fn medians_of_far_points_sampled(n in 9usize..=200, seed: u64) {
        let s = random_metric(n, seed);
        let mut r = rng::seeded(seed ^ 2);
        for _ in 0..20 {
            let c = random_subset(n, n, &mut r);
            prop_assume!(c.len() >= 2);
            let p = c[r.gen_range(0..c.len())];
            let q = c[r.gen_range(0..c.len())];
            prop_assume!(p != q);
            let without = |x: usize| -> Vec<usize> { c.iter().copied().filter(|&y| y != x).collect() };
            let lhs = median_dist(&s, p, &without(p)).unwrap() + median_dist(&s, q, &without(q)).unwrap();
            prop_assert!(le(s.distance(p, q), lhs, 1e-9));
        }
    }

    #[test]
    fn median_envy_is_the_square_of_root_envy(n in 2usize..=60, k in 2usize..=5, seed: u64) {
        prop_assume!(k <= n);
        let s = random_metric(n, seed);
        let cl = random_clustering(n, k, seed);
        let m = verify_stability(&s, &cl, Objective::Median, None).unwrap();
        let r = verify_stability(&s, &cl, Objective::SqrtMedian, None).unwrap();
        for (a, b) in m.per_point.iter().zip(&r.per_point) {
            if b.is_infinite() {
                prop_assert!(a.is_infinite());
            } else {
                prop_assert!((a - b * b).abs() <= 1e-12 * a.max(1.0));
            }
        }
    }

    #[test]
    fn moves_keep_clusters_non_empty(n in 3usize..=30, k in 2usize..=5, seed: u64) {
        prop_assume!(k <= n);
        let mut cl = random_clustering(n, k, seed);
        let mut r = rng::seeded(seed);
        for _ in 0..50 {
            let p = r.gen_range(0..n);
            let to = r.gen_range(0..k);
            let from = cl.cluster_of(p);
            let allowed = from == to || cl.size(from) > 1;
            prop_assert_eq!(cl.move_point(p, to).is_ok(), allowed);
            prop_assert_eq!(cl.cluster_of(p), if allowed { to } else { from });
            prop_assert_eq!(cl.k(), k);
            for c in 0..k {
                prop_assert!(cl.size(c) >= 1);
                for &q in cl.members(c) {
                    prop_assert_eq!(cl.cluster_of(q), c);
                }
            }
            prop_assert_eq!((0..k).map(|c| cl.size(c)).sum::<usize>(), n);
        }
        let back = Clustering::from_json(&cl.to_json()).unwrap();
        prop_assert!(back.same_partition(&cl));
    }
}
