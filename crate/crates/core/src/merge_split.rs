//! Greedy k-center initialization, the randomized split, and the
//! merge-and-split local search for the average objective.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::clustering::{envy_ratio, Clustering};
use crate::error::{usage, Error, Result};
use crate::heap::LazyMinHeap;
use crate::local_search::{
    check_k, cluster_sums, column_sums, phi_from_sums, Certificate, LsTrace, StepKind, StepRecord,
    TerminalStatus, DEFAULT_MAX_STEPS,
};
use crate::metric::MetricSpace;
use crate::potential::phi_avg;
use crate::rng;

/// Gonzalez greedy: start at point 0, repeatedly add the point farthest from
/// the chosen centers, then assign each point to its nearest center (ties to
/// the earlier center). Centers always own their cluster, so clusters are
/// non-empty even with duplicate points. `O(nk)` queries.
pub fn kcenter_init(space: &MetricSpace, k: usize) -> Result<Clustering> {
    let n = space.n();
    if k == 0 || k > n {
        return usage(format!("need 1 ≤ k ≤ n, got k = {k}, n = {n}"));
    }
    let mut centers = vec![0usize];
    let mut is_center = vec![false; n];
    is_center[0] = true;
    let mut near: Vec<f64> = (0..n).map(|p| space.distance(p, 0)).collect();
    let mut label = vec![0usize; n];
    while centers.len() < k {
        let next = (0..n)
            .filter(|&p| !is_center[p])
            .fold(None, |best: Option<usize>, p| match best {
                Some(b) if near[b] >= near[p] => Some(b),
                _ => Some(p),
            })
            .expect("k ≤ n leaves a non-center");
        let j = centers.len();
        centers.push(next);
        is_center[next] = true;
        for p in 0..n {
            let d = space.distance(p, next);
            if d < near[p] {
                near[p] = d;
                label[p] = j;
            }
        }
    }
    for (j, &c) in centers.iter().enumerate() {
        label[c] = j;
    }
    Clustering::new(label, k)
}

/// Outcome of a split: `cluster` is divided into `part1` (`⌈|C|/2⌉` points)
/// and `part2`. Potentials are exact for [`split`]; see the fast module for
/// the estimated variant.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitResult {
    pub cluster: usize,
    pub part1: Vec<usize>,
    pub part2: Vec<usize>,
    pub phi: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub attempts: usize,
}

/// `64 · ⌈log₂ n⌉`, at least 64.
pub fn default_split_attempts(n: usize) -> usize {
    64 * ((n as f64).log2().ceil() as usize).max(1)
}

/// Picks the cluster of largest `Φ` (ties to the smaller id) and resamples
/// random halves until `Φ(C₁) + Φ(C₂) ≤ Φ(C)·(1 − 1/(4·log₂n))`.
/// Does not modify `clustering`.
pub fn split<R: Rng>(
    space: &MetricSpace,
    clustering: &Clustering,
    max_attempts: Option<usize>,
    rng: &mut R,
) -> Result<SplitResult> {
    let n = space.n();
    let mut best: Option<(usize, f64)> = None;
    for c in 0..clustering.k() {
        if clustering.size(c) > 1 {
            let phi = phi_avg(space, clustering.members(c))?;
            if best.map_or(true, |(_, b)| phi > b) {
                best = Some((c, phi));
            }
        }
    }
    let Some((cluster, phi)) = best else {
        return usage("no cluster has more than one point");
    };
    let bound = phi * (1.0 - 1.0 / (4.0 * (n as f64).log2()));
    let attempts = max_attempts.unwrap_or(default_split_attempts(n));
    let (part1, part2, phi1, phi2, attempts) =
        resample_halves(clustering.members(cluster), bound, attempts, rng, |c, _| {
            phi_avg(space, c)
        })?;
    Ok(SplitResult {
        cluster,
        part1,
        part2,
        phi,
        phi1,
        phi2,
        attempts,
    })
}

pub(crate) type Halves = (Vec<usize>, Vec<usize>, f64, f64, usize);

/// Draws uniform halves (`⌈m/2⌉` and `⌊m/2⌋` points) until their potentials
/// sum to at most `bound`.
pub(crate) fn resample_halves<R: Rng>(
    members: &[usize],
    bound: f64,
    max_attempts: usize,
    rng: &mut R,
    mut potential: impl FnMut(&[usize], &mut R) -> Result<f64>,
) -> Result<Halves> {
    let mut pool = members.to_vec();
    let half = pool.len().div_ceil(2);
    for attempt in 1..=max_attempts {
        pool.partial_shuffle(rng, half);
        let (a, b) = pool.split_at(half);
        let pa = potential(a, rng)?;
        let pb = potential(b, rng)?;
        if pa + pb <= bound {
            return Ok((a.to_vec(), b.to_vec(), pa, pb, attempt));
        }
    }
    Err(Error::Internal(format!(
        "split gave up after {max_attempts} attempts"
    )))
}

#[derive(Clone, Debug)]
pub struct MergeSplitConfig {
    pub seed: u64,
    pub max_steps: usize,
    /// Certificates carry from-scratch potentials and every step checks the
    /// cached sums against recomputation (uncounted queries).
    pub audit: bool,
}

impl Default for MergeSplitConfig {
    fn default() -> Self {
        MergeSplitConfig {
            seed: 0,
            max_steps: DEFAULT_MAX_STEPS,
            audit: false,
        }
    }
}

/// Exact cached averages plus per-point heaps of foreign-cluster averages.
struct Cache {
    sums: Vec<Vec<f64>>,
    version: Vec<u64>,
    heaps: Vec<LazyMinHeap>,
}

impl Cache {
    fn avg(&self, cl: &Clustering, p: usize, c: usize) -> f64 {
        self.sums[c][p] / cl.size(c) as f64
    }

    fn refresh_column(&mut self, cl: &Clustering, c: usize) {
        self.version[c] += 1;
        let v = self.version[c];
        for p in 0..cl.n() {
            let a = self.avg(cl, p, c);
            self.heaps[p].push(a, c, v);
        }
    }

    fn rebuild_heaps(&mut self, cl: &Clustering) {
        self.version.resize(cl.k(), 0);
        for v in &mut self.version {
            *v += 1;
        }
        for p in 0..cl.n() {
            self.heaps[p].clear();
            for c in 0..cl.k() {
                let a = self.avg(cl, p, c);
                self.heaps[p].push(a, c, self.version[c]);
            }
        }
    }

    fn min_foreign(&mut self, cl: &Clustering, p: usize) -> Option<(f64, usize)> {
        let version = &self.version;
        let heap = &mut self.heaps[p];
        if heap.len() > 4 * cl.k() + 16 {
            heap.clear();
            for c in 0..cl.k() {
                heap.push(self.sums[c][p] / cl.size(c) as f64, c, version[c]);
            }
        }
        heap.min_live(
            |c, s| c < version.len() && version[c] == s,
            Some(cl.cluster_of(p)),
        )
    }
}

fn scratch_phi(space: &MetricSpace, cl: &Clustering) -> f64 {
    cl.clusters()
        .map(|c| {
            let m = c.len() as f64;
            let mut sum = 0.0;
            for (i, &p) in c.iter().enumerate() {
                for &q in &c[i + 1..] {
                    sum += space.distance_uncounted(p, q);
                }
            }
            if c.len() < 2 {
                0.0
            } else {
                m.log2() / m * 2.0 * sum
            }
        })
        .sum()
}

/// Fails when a cached sum drifts from recomputation by more than `1e-9`
/// relative to the sum plus the row's largest distance.
fn check_cache(space: &MetricSpace, cl: &Clustering, sums: &[Vec<f64>]) -> Result<()> {
    for (c, col) in sums.iter().enumerate() {
        for (p, &cached) in col.iter().enumerate() {
            let (mut sum, mut far) = (0.0, 0.0f64);
            for &q in cl.members(c) {
                let d = space.distance_uncounted(p, q);
                sum += d;
                far = far.max(d);
            }
            if (cached - sum).abs() > 1e-9 * (sum + far) {
                return Err(Error::Internal(format!(
                    "cached sum for point {p}, cluster {c} is {cached}, recomputed {sum}"
                )));
            }
        }
    }
    Ok(())
}

/// Merge-and-split local search with `α = 4·log₂n`, from k-center.
///
/// A violator `p` envying `C'` is swapped when its own average is at least
/// `T = Φ/(4k·log₂n)/(5n·log₂n)`; otherwise `C(p)` and `C'` are merged and
/// the largest-potential cluster is split.
pub fn merge_split_ls(
    space: &MetricSpace,
    k: usize,
    config: &MergeSplitConfig,
) -> Result<(Clustering, LsTrace)> {
    check_k(space.n(), k)?;
    merge_split_ls_from(space, kcenter_init(space, k)?, config)
}

/// [`merge_split_ls`] from a given starting clustering.
pub fn merge_split_ls_from(
    space: &MetricSpace,
    start: Clustering,
    config: &MergeSplitConfig,
) -> Result<(Clustering, LsTrace)> {
    let n = space.n();
    let k = start.k();
    check_k(n, k)?;
    if start.n() != n {
        return usage("start clustering does not match the space");
    }
    let mut rng = rng::stream(config.seed, 1);
    let log_n = (n as f64).log2();
    let alpha = 4.0 * log_n;
    let mut cl = start;
    let mut cache = Cache {
        sums: cluster_sums(space, &cl),
        version: vec![0; k],
        heaps: vec![LazyMinHeap::new(); n],
    };
    cache.rebuild_heaps(&cl);
    let mut steps = Vec::new();
    let mut status = TerminalStatus::Converged;
    loop {
        let mut pick: Option<(usize, usize, f64, f64)> = None;
        for p in 0..n {
            let own_c = cl.cluster_of(p);
            let m = cl.size(own_c);
            if m < 2 {
                continue;
            }
            let own = cache.sums[own_c][p] / (m - 1) as f64;
            let Some((other, c)) = cache.min_foreign(&cl, p) else {
                continue;
            };
            let r = envy_ratio(own, other);
            if r > alpha && pick.map_or(true, |(_, _, _, b)| r > b) {
                pick = Some((p, c, own, r));
            }
        }
        let Some((p, to, own, _)) = pick else { break };
        if steps.len() >= config.max_steps {
            status = TerminalStatus::CapExceeded;
            break;
        }
        let from = cl.cluster_of(p);
        let before = phi_from_sums(&cl, &cache.sums);
        let scratch_before = if config.audit {
            scratch_phi(space, &cl)
        } else {
            0.0
        };
        let threshold = before / (4.0 * k as f64 * log_n) / (5.0 * n as f64 * log_n);
        let kind = if own >= threshold {
            for q in 0..n {
                let d = space.distance(q, p);
                cache.sums[from][q] -= d;
                cache.sums[to][q] += d;
            }
            cl.move_point(p, to)?;
            cache.refresh_column(&cl, from);
            cache.refresh_column(&cl, to);
            StepKind::Swap
        } else {
            let (keep, _) = cl.merge(from, to)?;
            let drop = from.max(to);
            cache.sums.swap_remove(drop);
            let s = split(space, &cl, None, &mut rng)?;
            let new = cl.split(s.cluster, &s.part2)?;
            cache.sums[s.cluster] = column_sums(space, cl.members(s.cluster));
            cache.sums.push(column_sums(space, cl.members(new)));
            if keep != s.cluster {
                cache.sums[keep] = column_sums(space, cl.members(keep));
            }
            cache.rebuild_heaps(&cl);
            StepKind::MergeSplit
        };
        let after = phi_from_sums(&cl, &cache.sums);
        let (before, after) = if config.audit {
            check_cache(space, &cl, &cache.sums)?;
            (scratch_before, scratch_phi(space, &cl))
        } else {
            (before, after)
        };
        steps.push(StepRecord {
            kind,
            point: p,
            from,
            to,
            certificate: Certificate::Potential { before, after },
        });
    }
    Ok((cl, LsTrace { steps, status }))
}
