//! Natural local search for the average objective and its max-objective twin.
//!
//! Both repeatedly move the most envious point to the cluster it envies. For
//! the average objective with `α ≥ 2·log₂n` every move lowers `Φ`; for the max
//! objective with `α = 1` every move lowers the pair signature.

use serde::{Deserialize, Serialize};

use crate::clustering::{envy_ratio, Clustering};
use crate::error::{usage, Result};
use crate::merge_split::kcenter_init;
use crate::metric::MetricSpace;
use crate::potential::{MaxIpSignature, SignatureOrder};

pub const DEFAULT_MAX_STEPS: usize = 1_000_000;
pub const DEFAULT_SLACK: f64 = 1.0 + 1e-12;

/// Starting clustering.
#[derive(Clone, Debug)]
pub enum Init {
    /// Point `i` goes to cluster `i mod k`.
    RoundRobin,
    KCenter,
    Given(Clustering),
}

#[derive(Clone, Debug)]
pub struct LsConfig {
    /// Stability target; `None` means `2·log₂n`. Ignored by the max variant.
    pub alpha: Option<f64>,
    pub max_steps: usize,
    pub init: Init,
    /// A move needs `own > α · other · slack`.
    pub slack: f64,
    /// Record potentials or signatures per step.
    pub record: bool,
}

impl Default for LsConfig {
    fn default() -> Self {
        LsConfig {
            alpha: None,
            max_steps: DEFAULT_MAX_STEPS,
            init: Init::RoundRobin,
            slack: DEFAULT_SLACK,
            record: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    Converged,
    CapExceeded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Swap,
    MergeSplit,
}

/// Progress evidence for one step.
#[derive(Clone, Debug, PartialEq)]
pub enum Certificate {
    None,
    Potential {
        before: f64,
        after: f64,
    },
    Signature {
        before: MaxIpSignature,
        after: MaxIpSignature,
    },
    /// Median merge-and-split: the computed merge bound, plus the exact merge
    /// increase and exact potentials when the clusters are small enough.
    MedianMerge {
        bound: f64,
        increase: Option<f64>,
        before: Option<f64>,
        after: Option<f64>,
    },
}

/// One step: `point` envied `to` from `from` (cluster ids at the time).
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub kind: StepKind,
    pub point: usize,
    pub from: usize,
    pub to: usize,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LsTrace {
    pub steps: Vec<StepRecord>,
    pub status: TerminalStatus,
}

impl LsTrace {
    pub fn count(&self, kind: StepKind) -> usize {
        self.steps.iter().filter(|s| s.kind == kind).count()
    }
}

pub(crate) fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 2 || k > n {
        return usage(format!("need 2 ≤ k ≤ n, got k = {k}, n = {n}"));
    }
    Ok(())
}

fn initial(space: &MetricSpace, k: usize, init: &Init) -> Result<Clustering> {
    match init {
        Init::RoundRobin => Clustering::round_robin(space.n(), k),
        Init::KCenter => kcenter_init(space, k),
        Init::Given(c) => {
            if c.n() != space.n() || c.k() != k {
                return usage("given clustering does not match n and k");
            }
            Ok(c.clone())
        }
    }
}

/// `sums[c][p] = Σ_{q∈c} d(p, q)` for every cluster and point.
pub(crate) fn cluster_sums(space: &MetricSpace, clustering: &Clustering) -> Vec<Vec<f64>> {
    (0..clustering.k())
        .map(|c| column_sums(space, clustering.members(c)))
        .collect()
}

pub(crate) fn column_sums(space: &MetricSpace, members: &[usize]) -> Vec<f64> {
    (0..space.n())
        .map(|p| members.iter().map(|&q| space.distance(p, q)).sum())
        .collect()
}

/// `Φ = Σ_p log₂|C(p)| · avg(p, C(p))` from cached sums.
pub(crate) fn phi_from_sums(clustering: &Clustering, sums: &[Vec<f64>]) -> f64 {
    (0..clustering.n())
        .map(|p| {
            let c = clustering.cluster_of(p);
            let m = clustering.size(c) as f64;
            if m > 1.0 {
                m.log2() * sums[c][p] / m
            } else {
                0.0
            }
        })
        .sum()
}

/// Most envious `(point, cluster, ratio)` among violating pairs. `values[c][p]`
/// is `f(p, c)`, `own_value(p)` is `f(p, C(p) \ {p})`. Ties go to the smaller
/// point, then the smaller cluster.
fn most_envious(
    clustering: &Clustering,
    alpha: f64,
    slack: f64,
    own_value: impl Fn(usize) -> f64,
    foreign_value: impl Fn(usize, usize) -> f64,
) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for p in 0..clustering.n() {
        let own_c = clustering.cluster_of(p);
        if clustering.size(own_c) < 2 {
            continue;
        }
        let own = own_value(p);
        for c in 0..clustering.k() {
            if c == own_c {
                continue;
            }
            let other = foreign_value(p, c);
            if own > alpha * other * slack {
                let r = envy_ratio(own, other);
                if best.map_or(true, |(_, _, b)| r > b) {
                    best = Some((p, c, r));
                }
            }
        }
    }
    best
}

/// Natural local search for the average objective.
pub fn natural_local_search(
    space: &MetricSpace,
    k: usize,
    config: &LsConfig,
) -> Result<(Clustering, LsTrace)> {
    let n = space.n();
    check_k(n, k)?;
    let alpha = config.alpha.unwrap_or(2.0 * (n as f64).log2());
    if alpha < 1.0 || config.max_steps < 1 {
        return usage("need alpha ≥ 1 and max_steps ≥ 1");
    }
    let mut cl = initial(space, k, &config.init)?;
    let mut sums = cluster_sums(space, &cl);
    let mut steps = Vec::new();
    let mut status = TerminalStatus::Converged;
    loop {
        let pick = most_envious(
            &cl,
            alpha,
            config.slack,
            |p| {
                let c = cl.cluster_of(p);
                sums[c][p] / (cl.size(c) - 1) as f64
            },
            |p, c| sums[c][p] / cl.size(c) as f64,
        );
        let Some((p, to, _)) = pick else { break };
        if steps.len() >= config.max_steps {
            status = TerminalStatus::CapExceeded;
            break;
        }
        let from = cl.cluster_of(p);
        let before = if config.record {
            phi_from_sums(&cl, &sums)
        } else {
            0.0
        };
        for q in 0..n {
            let d = space.distance(q, p);
            sums[from][q] -= d;
            sums[to][q] += d;
        }
        cl.move_point(p, to)?;
        let certificate = if config.record {
            Certificate::Potential {
                before,
                after: phi_from_sums(&cl, &sums),
            }
        } else {
            Certificate::None
        };
        steps.push(StepRecord {
            kind: StepKind::Swap,
            point: p,
            from,
            to,
            certificate,
        });
    }
    Ok((cl, LsTrace { steps, status }))
}

/// Local search for the max objective with `α = 1`.
pub fn max_ip_local_search(
    space: &MetricSpace,
    k: usize,
    config: &LsConfig,
) -> Result<(Clustering, LsTrace)> {
    let n = space.n();
    check_k(n, k)?;
    if config.max_steps < 1 {
        return usage("max_steps must be at least 1");
    }
    let mut cl = initial(space, k, &config.init)?;
    let order = config.record.then(|| SignatureOrder::new(space));
    // maxes[c][p] = max_{q∈c} d(p, q); d(p, p) = 0 so own clusters need no care.
    let mut maxes: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            (0..n)
                .map(|p| {
                    cl.members(c)
                        .iter()
                        .map(|&q| space.distance(p, q))
                        .fold(0.0, f64::max)
                })
                .collect()
        })
        .collect();
    let mut steps = Vec::new();
    let mut status = TerminalStatus::Converged;
    loop {
        let pick = most_envious(
            &cl,
            1.0,
            config.slack,
            |p| maxes[cl.cluster_of(p)][p],
            |p, c| maxes[c][p],
        );
        let Some((p, to, _)) = pick else { break };
        if steps.len() >= config.max_steps {
            status = TerminalStatus::CapExceeded;
            break;
        }
        let from = cl.cluster_of(p);
        let before = order.as_ref().map(|o| o.signature(&cl));
        cl.move_point(p, to)?;
        for q in 0..n {
            let d = space.distance(q, p);
            if d > maxes[to][q] {
                maxes[to][q] = d;
            }
            if d == maxes[from][q] {
                maxes[from][q] = cl
                    .members(from)
                    .iter()
                    .map(|&r| space.distance(q, r))
                    .fold(0.0, f64::max);
            }
        }
        let certificate = match (before, &order) {
            (Some(before), Some(o)) => Certificate::Signature {
                before,
                after: o.signature(&cl),
            },
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
    Ok((cl, LsTrace { steps, status }))
}
