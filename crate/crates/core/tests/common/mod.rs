#![allow(dead_code)]

use ipcluster::metric::{generate, GenKind, GenSpec};
use ipcluster::rng;
use ipcluster::{Clustering, MetricSpace};
use rand::seq::SliceRandom;
use rand::Rng;

pub const KINDS: [GenKind; 3] = [
    GenKind::EuclideanMixture,
    GenKind::RandomShortestPath,
    GenKind::PlantedSeparated,
];

/// A generated space of the given kind; `k` groups where the kind uses them.
pub fn space(kind: GenKind, n: usize, k: usize, seed: u64) -> MetricSpace {
    let mut spec = GenSpec::new(kind, n, k.clamp(2, n.max(2)), seed);
    if kind == GenKind::PlantedSeparated && n < 2 {
        spec.kind = GenKind::EuclideanMixture;
    }
    generate(&spec).unwrap().space
}

/// A space whose kind and group count are picked from the seed.
pub fn random_metric(n: usize, seed: u64) -> MetricSpace {
    let kind = KINDS[(seed % 3) as usize];
    space(kind, n, 1 + (seed as usize / 3) % n.max(1), seed)
}

/// Random clustering with `k` non-empty clusters.
pub fn random_clustering(n: usize, k: usize, seed: u64) -> Clustering {
    let mut r = rng::stream(seed, 99);
    let mut labels: Vec<usize> = (0..n)
        .map(|i| if i < k { i } else { r.gen_range(0..k) })
        .collect();
    labels.shuffle(&mut r);
    Clustering::new(labels, k).unwrap()
}

/// Points whose bit is set in `mask`.
pub fn members(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask & (1 << i) != 0).collect()
}

/// Random non-empty subset of `0..n` of size at most `max`.
pub fn random_subset<R: Rng>(n: usize, max: usize, r: &mut R) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(r);
    let m = r.gen_range(1..=max.min(n));
    let mut s = all[..m].to_vec();
    s.sort_unstable();
    s
}

/// Relative comparison `a ≤ b` with tolerance `tol`.
pub fn le(a: f64, b: f64, tol: f64) -> bool {
    a <= b + tol * a.abs().max(b.abs()).max(1e-300)
}

pub fn sum_d(space: &MetricSpace, p: usize, s: &[usize]) -> f64 {
    s.iter().map(|&q| space.distance(p, q)).sum()
}

pub fn avg(space: &MetricSpace, p: usize, s: &[usize]) -> f64 {
    sum_d(space, p, s) / s.len() as f64
}

/// Sort-based lower median of `d(p, ·)` over `s`.
pub fn median(space: &MetricSpace, p: usize, s: &[usize]) -> f64 {
    let mut v: Vec<f64> = s.iter().map(|&q| space.distance(p, q)).collect();
    v.sort_by(f64::total_cmp);
    v[v.len().div_ceil(2) - 1]
}

/// `log₂|S| / |S| · Σ_{p,q∈S} d(p, q)` by direct double loop.
pub fn phi(space: &MetricSpace, s: &[usize]) -> f64 {
    if s.len() < 2 {
        return 0.0;
    }
    let total: f64 = s.iter().map(|&p| sum_d(space, p, s)).sum();
    (s.len() as f64).log2() / s.len() as f64 * total
}

/// Coincident points split across clusters 0 and 1 (one of them nudged by a
/// tiny offset into cluster 0), plus `k − 1` far groups sharing `k − 2`
/// labels. The coincident points envy each other with a tiny own average,
/// which forces a merge-and-split step. Needs `k ≥ 3`.
pub fn coincident_split_start(k: usize, seed: u64) -> (MetricSpace, Clustering) {
    assert!(k >= 3);
    let mut r = rng::stream(seed, 8);
    let dup = r.gen_range(4..30);
    let mut pts = vec![vec![0.0, 0.0]; dup];
    let mut labels: Vec<usize> = (0..dup).map(|i| i % 2).collect();
    pts.push(vec![r.gen_range(1e-7..1e-5), 0.0]);
    labels.push(0);
    for g in 0..k - 1 {
        for _ in 0..r.gen_range(3..25) {
            pts.push(vec![
                100.0 * (g + 1) as f64 + r.gen_range(0.0..5.0),
                r.gen_range(0.0..5.0),
            ]);
            labels.push(2 + g % (k - 2));
        }
    }
    let space = MetricSpace::from_points(&pts, ipcluster::metric::Norm::L2).unwrap();
    (space, Clustering::new(labels, k).unwrap())
}
