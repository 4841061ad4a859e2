mod common;

use std::f64::consts::SQRT_2;

use common::{random_clustering, random_metric, space, KINDS};
use ipcluster::local_search::{Certificate, StepKind, TerminalStatus};
use ipcluster::median_ip::{
    median_ip_cluster, median_ip_cluster_from, median_merge_bound, median_split, MedianConfig,
};
use ipcluster::metric::Norm;
use ipcluster::potential::phi_sqrt_median_exact;
use ipcluster::{rng, verify_stability, Clustering, MetricSpace, Objective};
use proptest::prelude::*;
use rand::Rng;

/// `n` points placed on three random sites in the plane, so most medians
/// are zero and cheap merges are common.
fn sites(n: usize, seed: u64) -> MetricSpace {
    let mut r = rng::stream(seed, 11);
    let at: Vec<Vec<f64>> = (0..3)
        .map(|_| vec![r.gen_range(0.0..10.0), r.gen_range(0.0..10.0)])
        .collect();
    let pts: Vec<Vec<f64>> = (0..n).map(|_| at[r.gen_range(0..3)].clone()).collect();
    MetricSpace::from_points(&pts, Norm::L2).unwrap()
}

fn diameter(s: &MetricSpace, c: &[usize]) -> f64 {
    c.iter()
        .flat_map(|&a| c.iter().map(move |&b| s.distance(a, b)))
        .fold(0.0, f64::max)
}

fn exact(s: &MetricSpace, cl: &Clustering) -> f64 {
    cl.clusters()
        .map(|c| phi_sqrt_median_exact(s, c).unwrap())
        .sum()
}

/// `√(d_max/2)/(2−√2)` over all clusters.
fn split_gain(s: &MetricSpace, cl: &Clustering) -> f64 {
    let d = cl.clusters().map(|c| diameter(s, c)).fold(0.0, f64::max);
    (d / 2.0).sqrt() / (2.0 - SQRT_2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// The space holds only the two clusters, so `n` in the factor is as small
    /// as it can be.
    #[test]
    fn merge_bound_covers_exact_increase(n in 2usize..=8, seed: u64, cut_frac in 0.0f64..1.0, dup: bool) {
        let s = if dup { sites(n, seed) } else { random_metric(n, seed) };
        let cut = 1 + ((n - 1) as f64 * cut_frac) as usize;
        prop_assume!(cut < n);
        let c: Vec<usize> = (0..cut).collect();
        let c2: Vec<usize> = (cut..n).collect();
        let all: Vec<usize> = (0..n).collect();
        let increase = phi_sqrt_median_exact(&s, &all).unwrap()
            - phi_sqrt_median_exact(&s, &c).unwrap()
            - phi_sqrt_median_exact(&s, &c2).unwrap();
        let slack = 1e-9 * phi_sqrt_median_exact(&s, &all).unwrap().max(1.0);
        for &p in &c {
            let bound = median_merge_bound(&s, &c, &c2, p).unwrap();
            prop_assert!(increase <= bound + slack, "p {p}: {increase} > {bound}");
        }
    }

    #[test]
    fn split_gains_at_least_g(n in 2usize..=8, k in 1usize..=3, seed: u64) {
        prop_assume!(k <= n);
        let s = random_metric(n, seed);
        let cl = random_clustering(n, k, seed);
        prop_assume!(cl.clusters().any(|c| c.len() > 1));
        let r = median_split(&s, &cl).unwrap();
        let whole = cl.members(r.cluster);
        let d = diameter(&s, whole);
        let drop = phi_sqrt_median_exact(&s, whole).unwrap() - phi_sqrt_median_exact(&s, &r.part1).unwrap();
        prop_assert!(drop >= (d / 2.0).sqrt() * (1.0 - 1e-12));
        prop_assert!(drop >= split_gain(&s, &cl) * (1.0 - 1e-12));
        prop_assert_eq!(r.part2.len(), 1);
        prop_assert_eq!(r.part1.len() + 1, whole.len());
    }

    #[test]
    fn recorded_steps_are_consistent(n in 4usize..=8, k in 2usize..=3, seed: u64) {
        prop_assume!(k < n);
        let s = sites(n, seed);
        let cfg = MedianConfig { record: true, ..MedianConfig::default() };
        let (out, trace) = median_ip_cluster_from(&s, random_clustering(n, k, seed), &cfg).unwrap();
        prop_assert_eq!(trace.status, TerminalStatus::Converged);
        for st in &trace.steps {
            match (&st.kind, &st.certificate) {
                (StepKind::MergeSplit, Certificate::MedianMerge { bound, increase, before, after }) => {
                    let slack = 1e-9 * before.unwrap().max(1.0);
                    prop_assert!(increase.unwrap() <= bound + slack);
                    prop_assert!(after.unwrap() < before.unwrap());
                }
                (StepKind::Swap, Certificate::Potential { before, after }) => prop_assert!(after < before),
                (StepKind::Swap, Certificate::None) => {}
                other => prop_assert!(false, "unexpected step {other:?}"),
            }
        }
        prop_assert!(verify_stability(&s, &out, Objective::Median, Some(cfg.median_alpha())).unwrap().stable.unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn outputs_verify_at_squared_target(n in 4usize..=200, k in 2usize..=6, kind in 0usize..3, seed: u64) {
        prop_assume!(k <= n);
        let s = space(KINDS[kind], n, k, seed);
        let cfg = MedianConfig::default();
        let (out, trace) = median_ip_cluster(&s, k, &cfg).unwrap();
        prop_assert_eq!(trace.status, TerminalStatus::Converged);
        prop_assert_eq!(out.k(), k);
        let med = verify_stability(&s, &out, Objective::Median, Some(cfg.median_alpha())).unwrap();
        prop_assert!(med.stable.unwrap(), "{}", med.alpha_achieved);
        let root = verify_stability(&s, &out, Objective::SqrtMedian, Some(cfg.c * cfg.alpha_base)).unwrap();
        prop_assert!(root.stable.unwrap());
        prop_assert!(med.alpha_achieved <= root.alpha_achieved.powi(2) * (1.0 + 1e-12));
    }
}

/// Merge two clusters, then split the widest; whenever the bound is below
/// half the gain the exact potential falls.
#[test]
fn cheap_merges_then_split_decrease_exactly() {
    let mut cheap = 0;
    for seed in 0..2000u64 {
        let n = 3 + seed as usize % 6;
        let k = 2 + seed as usize % 2;
        if k >= n {
            continue;
        }
        let s = sites(n, seed);
        let cl = random_clustering(n, k, seed);
        let g = split_gain(&s, &cl);
        for p in 0..n {
            let from = cl.cluster_of(p);
            for to in (0..k).filter(|&c| c != from) {
                let bound = median_merge_bound(&s, cl.members(from), cl.members(to), p).unwrap();
                if bound >= g / 2.0 {
                    continue;
                }
                cheap += 1;
                let mut next = cl.clone();
                next.merge(from, to).unwrap();
                let r = median_split(&s, &next).unwrap();
                next.split(r.cluster, &r.part2).unwrap();
                assert!(
                    exact(&s, &next) < exact(&s, &cl),
                    "seed {seed}, p {p}, to {to}"
                );
            }
        }
    }
    assert!(cheap >= 100, "{cheap} cheap merges");
}

#[test]
fn site_instances_take_both_step_kinds() {
    let mut kinds = [0usize; 2];
    for seed in 0..200u64 {
        let n = 4 + seed as usize % 5;
        let (_, trace) = median_ip_cluster_from(
            &sites(n, seed),
            random_clustering(n, 2, seed),
            &MedianConfig::default(),
        )
        .unwrap();
        for st in &trace.steps {
            kinds[usize::from(st.kind == StepKind::MergeSplit)] += 1;
        }
    }
    assert!(kinds[0] > 0 && kinds[1] > 0, "{kinds:?}");
}
