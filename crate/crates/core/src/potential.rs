//! Potential functions that certify local-search progress.
//!
//! * `Φ(S) = log₂|S| · Σ_{p∈S} avg(p, S)` for the average objective.
//! * `Φ_√median(C)`: the longest closed tour through `C` under edge lengths
//!   `√d`, divided by `2 − √2`. Only a brute-force form exists (`|C| ≤ 8`);
//!   algorithms use `√diam(C)` instead.
//! * The max-objective signature: one bit per point pair, pairs ordered by
//!   decreasing distance, set when both ends share a cluster.

use std::cmp::Ordering;

use crate::clustering::Clustering;
use crate::error::{usage, Result};
use crate::metric::MetricSpace;

/// Largest cluster accepted by [`phi_sqrt_median_exact`].
pub const SQRT_MEDIAN_EXACT_LIMIT: usize = 8;

/// `(log₂|C| / |C|) · Σ_{p,q∈C} d(p,q)`, summed over ordered pairs.
pub fn phi_avg(space: &MetricSpace, c: &[usize]) -> Result<f64> {
    if c.is_empty() {
        return usage("phi_avg of an empty set");
    }
    let m = c.len();
    if m == 1 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (i, &p) in c.iter().enumerate() {
        for &q in &c[i + 1..] {
            sum += space.distance(p, q);
        }
    }
    Ok((m as f64).log2() / m as f64 * 2.0 * sum)
}

/// Sum of [`phi_avg`] over clusters.
pub fn phi_avg_clustering(space: &MetricSpace, clustering: &Clustering) -> f64 {
    clustering
        .clusters()
        .map(|c| phi_avg(space, c).expect("clusters are non-empty"))
        .sum()
}

/// Exact `Φ_√median(C)` by enumerating tours. `|C| = 2` uses the edge twice.
pub fn phi_sqrt_median_exact(space: &MetricSpace, c: &[usize]) -> Result<f64> {
    let m = c.len();
    if m == 0 {
        return usage("phi_sqrt_median_exact of an empty set");
    }
    if m > SQRT_MEDIAN_EXACT_LIMIT {
        return usage(format!(
            "|C| = {m} exceeds the brute-force limit {SQRT_MEDIAN_EXACT_LIMIT}"
        ));
    }
    if m == 1 {
        return Ok(0.0);
    }
    let mut w = vec![0.0; m * m];
    for i in 0..m {
        for j in i + 1..m {
            let v = space.distance(c[i], c[j]).sqrt();
            w[i * m + j] = v;
            w[j * m + i] = v;
        }
    }
    let best = if m == 2 {
        2.0 * w[1]
    } else {
        longest_tour(&w, m)
    };
    Ok(best / (2.0 - std::f64::consts::SQRT_2))
}

/// Longest Hamiltonian cycle through `0..m` by enumerating orders of `1..m`.
fn longest_tour(w: &[f64], m: usize) -> f64 {
    fn go(w: &[f64], m: usize, path: &mut Vec<usize>, used: &mut [bool], len: f64, best: &mut f64) {
        let last = *path.last().expect("path starts at 0");
        if path.len() == m {
            *best = best.max(len + w[last * m]);
            return;
        }
        for v in 1..m {
            if !used[v] {
                used[v] = true;
                path.push(v);
                go(w, m, path, used, len + w[last * m + v], best);
                path.pop();
                used[v] = false;
            }
        }
    }
    let mut best = 0.0;
    let mut used = vec![false; m];
    used[0] = true;
    go(w, m, &mut vec![0], &mut used, 0.0, &mut best);
    best
}

/// `√diam(C)`; 0 for singletons.
pub fn phi_sqrt_median_surrogate(space: &MetricSpace, c: &[usize]) -> f64 {
    let mut diam = 0.0f64;
    for (i, &p) in c.iter().enumerate() {
        for &q in &c[i + 1..] {
            diam = diam.max(space.distance(p, q));
        }
    }
    diam.sqrt()
}

/// Point pairs sorted by non-increasing distance, ties by `(min, max)` endpoint.
#[derive(Clone, Debug)]
pub struct SignatureOrder {
    edges: Vec<(u32, u32)>,
}

impl SignatureOrder {
    /// Evaluates all `n(n−1)/2` distances once.
    pub fn new(space: &MetricSpace) -> Self {
        let n = space.n();
        let mut weighted = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                weighted.push((space.distance(i, j), i as u32, j as u32));
            }
        }
        weighted.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        SignatureOrder {
            edges: weighted.into_iter().map(|(_, i, j)| (i, j)).collect(),
        }
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn signature(&self, clustering: &Clustering) -> MaxIpSignature {
        let len = self.edges.len();
        let mut words = vec![0u64; len.div_ceil(64)];
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            if clustering.cluster_of(a as usize) == clustering.cluster_of(b as usize) {
                words[i / 64] |= 1u64 << (63 - i % 64);
            }
        }
        MaxIpSignature { words, len }
    }
}

/// Bit string compared lexicographically; bit 0 is the longest edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaxIpSignature {
    words: Vec<u64>,
    len: usize,
}

impl MaxIpSignature {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len);
        self.words[i / 64] >> (63 - i % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

impl PartialOrd for MaxIpSignature {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MaxIpSignature {
    fn cmp(&self, other: &Self) -> Ordering {
        // Bits are packed most-significant first, so word order is bit order.
        self.words.cmp(&other.words).then(self.len.cmp(&other.len))
    }
}

/// Signature of `clustering`, building the edge order on the fly.
pub fn max_ip_signature(space: &MetricSpace, clustering: &Clustering) -> MaxIpSignature {
    SignatureOrder::new(space).signature(clustering)
}
