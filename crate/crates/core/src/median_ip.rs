//! Local search for `√median` stability with merge-and-split steps.
//!
//! A violator is either swapped or, when merging its two clusters provably
//! costs less than half of what the split gains, the clusters are merged and
//! the point farthest from the rest of the widest cluster is split off. The
//! result is `(c·K)`-stable for `√median`, so `(c·K)²`-stable for the median.

use std::f64::consts::SQRT_2;

use crate::clustering::{envy_ratio, median_of, objective_profile, Clustering, Objective};
use crate::error::{usage, Result};
use crate::local_search::{
    check_k, Certificate, LsTrace, StepKind, StepRecord, TerminalStatus, DEFAULT_MAX_STEPS,
};
use crate::merge_split::{kcenter_init, SplitResult};
use crate::metric::MetricSpace;
use crate::potential::{phi_sqrt_median_exact, phi_sqrt_median_surrogate, SQRT_MEDIAN_EXACT_LIMIT};

/// Upper constant `K` in `√median(p,S) ≤ Φ(S∪{p}) − Φ(S) ≤ K·√median(p,S)`.
pub const DEFAULT_ALPHA_BASE: f64 = 10.25;

#[derive(Clone, Debug)]
pub struct MedianConfig {
    /// Multiplier `c > 1`; the target is `c·alpha_base` for `√median`.
    pub c: f64,
    pub alpha_base: f64,
    pub max_steps: usize,
    /// Attach exact potentials to steps whose clusters are small enough.
    pub record: bool,
}

impl Default for MedianConfig {
    fn default() -> Self {
        MedianConfig {
            c: 2.0,
            alpha_base: DEFAULT_ALPHA_BASE,
            max_steps: DEFAULT_MAX_STEPS,
            record: false,
        }
    }
}

impl MedianConfig {
    /// Stability reached for the median objective, `(c·alpha_base)²`.
    pub fn median_alpha(&self) -> f64 {
        (self.c * self.alpha_base).powi(2)
    }
}

/// `median(p, s)`; 0 for an empty set.
fn median_or_zero(space: &MetricSpace, p: usize, s: &[usize]) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let mut v: Vec<f64> = s.iter().map(|&q| space.distance(p, q)).collect();
    median_of(&mut v)
}

/// Farthest intra-cluster pair over all clusters, ties to the smaller
/// `(min, max)` index pair: `(d, p, p′, cluster)`.
fn farthest_pair(
    space: &MetricSpace,
    clustering: &Clustering,
) -> Option<(f64, usize, usize, usize)> {
    let mut best: Option<(f64, usize, usize, usize)> = None;
    for c in 0..clustering.k() {
        let m = clustering.members(c);
        for (i, &a) in m.iter().enumerate() {
            for &b in &m[i + 1..] {
                let (p, q) = (a.min(b), a.max(b));
                let d = space.distance(p, q);
                let better = match best {
                    None => true,
                    Some((bd, bp, bq, _)) => d > bd || (d == bd && (p, q) < (bp, bq)),
                };
                if better {
                    best = Some((d, p, q, c));
                }
            }
        }
    }
    best
}

/// Splits off one endpoint of the globally farthest intra-cluster pair: the
/// endpoint with the larger median to the rest of its cluster (the smaller
/// index on ties). `phi`, `phi1`, `phi2` hold the `√diam` surrogate.
pub fn median_split(space: &MetricSpace, clustering: &Clustering) -> Result<SplitResult> {
    let Some((_, p, q, cluster)) = farthest_pair(space, clustering) else {
        return usage("no cluster has more than one point");
    };
    let members = clustering.members(cluster);
    let rest = |x: usize| -> Vec<usize> { members.iter().copied().filter(|&y| y != x).collect() };
    let mp = median_or_zero(space, p, &rest(p));
    let mq = median_or_zero(space, q, &rest(q));
    let out = if mq > mp { q } else { p };
    let part1 = rest(out);
    Ok(SplitResult {
        cluster,
        phi: phi_sqrt_median_surrogate(space, members),
        phi1: phi_sqrt_median_surrogate(space, &part1),
        phi2: 0.0,
        part1,
        part2: vec![out],
        attempts: 1,
    })
}

/// `P(n) = (4n + 4)/(2 − √2)`.
pub fn merge_factor(n: usize) -> f64 {
    (4.0 * n as f64 + 4.0) / (2.0 - SQRT_2)
}

/// Upper bound `P(n)·(√median(p,C) + √median(p,C′))` on
/// `Φ(C ∪ C′) − Φ(C) − Φ(C′)` for the `√median` potential.
pub fn median_merge_bound(space: &MetricSpace, c: &[usize], c2: &[usize], p: usize) -> Result<f64> {
    if c.is_empty() || c2.is_empty() {
        return usage("median_merge_bound needs non-empty clusters");
    }
    let a = median_or_zero(space, p, c).sqrt();
    let b = median_or_zero(space, p, c2).sqrt();
    Ok(merge_factor(space.n()) * (a + b))
}

fn exact_total(space: &MetricSpace, clustering: &Clustering) -> Option<f64> {
    if clustering
        .clusters()
        .any(|c| c.len() > SQRT_MEDIAN_EXACT_LIMIT)
    {
        return None;
    }
    Some(
        clustering
            .clusters()
            .map(|c| phi_sqrt_median_exact(space, c).expect("size checked"))
            .sum(),
    )
}

/// Most envious `(p, C′, ratio)` with `median(p, C(p)∖{p}) / median(p, C′)`
/// above `threshold`; ties to the smaller point, then cluster.
fn worst_violator(
    space: &MetricSpace,
    cl: &Clustering,
    threshold: f64,
) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for p in 0..cl.n() {
        let own = cl.cluster_of(p);
        if cl.size(own) < 2 {
            continue;
        }
        let f = objective_profile(space, cl, Objective::Median, p);
        for (c, &fc) in f.iter().enumerate() {
            if c == own {
                continue;
            }
            let r = envy_ratio(f[own], fc);
            if r > threshold && best.map_or(true, |(_, _, b)| r > b) {
                best = Some((p, c, r));
            }
        }
    }
    best
}

/// Median-stable clustering from k-center. Converged outputs are
/// `config.median_alpha()`-stable for the median objective.
pub fn median_ip_cluster(
    space: &MetricSpace,
    k: usize,
    config: &MedianConfig,
) -> Result<(Clustering, LsTrace)> {
    check_k(space.n(), k)?;
    check_config(config)?;
    median_ip_cluster_from(space, kcenter_init(space, k)?, config)
}

fn check_config(config: &MedianConfig) -> Result<()> {
    if !(config.c > 1.0) || !(config.alpha_base >= 1.0) || config.max_steps < 1 {
        return usage("need c > 1, alpha_base ≥ 1 and max_steps ≥ 1");
    }
    Ok(())
}

/// Same search from a given clustering.
pub fn median_ip_cluster_from(
    space: &MetricSpace,
    start: Clustering,
    config: &MedianConfig,
) -> Result<(Clustering, LsTrace)> {
    if start.n() != space.n() {
        return usage("clustering and space sizes differ");
    }
    check_config(config)?;
    let threshold = config.median_alpha();
    let mut cl = start;
    let mut steps = Vec::new();
    let mut status = TerminalStatus::Converged;
    while let Some((p, to, _)) = worst_violator(space, &cl, threshold) {
        if steps.len() >= config.max_steps {
            status = TerminalStatus::CapExceeded;
            break;
        }
        let from = cl.cluster_of(p);
        let before = if config.record {
            exact_total(space, &cl)
        } else {
            None
        };
        let (d_max, ..) = farthest_pair(space, &cl).expect("p shares its cluster");
        let gain = (d_max / 2.0).sqrt() / (2.0 - SQRT_2);
        let bound = median_merge_bound(space, cl.members(from), cl.members(to), p)?;
        if bound < gain / 2.0 {
            let increase = (config.record
                && cl.size(from) + cl.size(to) <= SQRT_MEDIAN_EXACT_LIMIT)
                .then(|| {
                    let merged: Vec<usize> = cl
                        .members(from)
                        .iter()
                        .chain(cl.members(to))
                        .copied()
                        .collect();
                    phi_sqrt_median_exact(space, &merged).expect("size checked")
                        - phi_sqrt_median_exact(space, cl.members(from)).expect("size checked")
                        - phi_sqrt_median_exact(space, cl.members(to)).expect("size checked")
                });
            cl.merge(from, to)?;
            let s = median_split(space, &cl)?;
            cl.split(s.cluster, &s.part2)?;
            let after = before.and_then(|_| exact_total(space, &cl));
            let certificate = Certificate::MedianMerge {
                bound,
                increase,
                before,
                after,
            };
            steps.push(StepRecord {
                kind: StepKind::MergeSplit,
                point: p,
                from,
                to,
                certificate,
            });
        } else {
            cl.move_point(p, to)?;
            let certificate = match (
                before,
                config.record.then(|| exact_total(space, &cl)).flatten(),
            ) {
                (Some(before), Some(after)) => Certificate::Potential { before, after },
                _ => Certificate::None,
            };
            steps.push(StepRecord {
                kind: StepKind::Swap,
                point: p,
                from,
                to,
                certificate,
            });
        }
    }
    Ok((cl, LsTrace { steps, status }))
}
