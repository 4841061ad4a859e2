//! Partitions, point-to-cluster objectives, and the exact stability verifier.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::metric::MetricSpace;

/// A partition of `0..n` into `k` non-empty clusters with dense ids `0..k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clustering {
    assignment: Vec<usize>,
    members: Vec<Vec<usize>>,
    /// Position of each point inside its membership list.
    pos: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ClusteringFile {
    k: usize,
    assignment: Vec<usize>,
}

impl Clustering {
    /// Builds a clustering from `assignment[p] = cluster id`.
    pub fn new(assignment: Vec<usize>, k: usize) -> Result<Self> {
        let n = assignment.len();
        if k == 0 && n > 0 {
            return usage("k must be at least 1");
        }
        let mut members = vec![Vec::new(); k];
        let mut pos = vec![0; n];
        for (p, &c) in assignment.iter().enumerate() {
            if c >= k {
                return usage(format!("point {p} assigned to cluster {c}, but k = {k}"));
            }
            pos[p] = members[c].len();
            members[c].push(p);
        }
        if let Some(c) = members.iter().position(Vec::is_empty) {
            return usage(format!("cluster {c} is empty"));
        }
        Ok(Clustering {
            assignment,
            members,
            pos,
        })
    }

    /// Builds a clustering from explicit member lists covering `0..n` exactly once.
    pub fn from_clusters(clusters: &[Vec<usize>], n: usize) -> Result<Self> {
        let mut assignment = vec![usize::MAX; n];
        for (c, ms) in clusters.iter().enumerate() {
            for &p in ms {
                if p >= n {
                    return usage(format!("point {p} out of range"));
                }
                if assignment[p] != usize::MAX {
                    return usage(format!("point {p} listed twice"));
                }
                assignment[p] = c;
            }
        }
        if let Some(p) = assignment.iter().position(|&c| c == usize::MAX) {
            return usage(format!("point {p} is not covered"));
        }
        Self::new(assignment, clusters.len())
    }

    /// `p ↦ p mod k`.
    pub fn round_robin(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return usage(format!("need 1 ≤ k ≤ n, got k = {k}, n = {n}"));
        }
        Self::new((0..n).map(|p| p % k).collect(), k)
    }

    pub fn singletons(n: usize) -> Self {
        Self::new((0..n).collect(), n).expect("singletons are valid")
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn cluster_of(&self, p: usize) -> usize {
        self.assignment[p]
    }

    pub fn members(&self, c: usize) -> &[usize] {
        &self.members[c]
    }

    pub fn size(&self, c: usize) -> usize {
        self.members[c].len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn clusters(&self) -> impl Iterator<Item = &[usize]> {
        self.members.iter().map(Vec::as_slice)
    }

    /// Moves `p` into cluster `to`. Refuses to empty a cluster.
    pub fn move_point(&mut self, p: usize, to: usize) -> Result<()> {
        let from = self.assignment[p];
        if to >= self.k() {
            return usage(format!("cluster {to} out of range"));
        }
        if from == to {
            return Ok(());
        }
        if self.members[from].len() == 1 {
            return usage(format!("moving {p} would empty cluster {from}"));
        }
        self.detach(p);
        self.attach(p, to);
        Ok(())
    }

    fn detach(&mut self, p: usize) {
        let c = self.assignment[p];
        let i = self.pos[p];
        self.members[c].swap_remove(i);
        if let Some(&q) = self.members[c].get(i) {
            self.pos[q] = i;
        }
    }

    fn attach(&mut self, p: usize, c: usize) {
        self.assignment[p] = c;
        self.pos[p] = self.members[c].len();
        self.members[c].push(p);
    }

    /// Merges clusters `a` and `b` into `min(a, b)`. To keep ids dense the last
    /// cluster is relabelled into the freed slot; that move is returned as
    /// `(old_id, new_id)`.
    pub fn merge(&mut self, a: usize, b: usize) -> Result<(usize, Option<(usize, usize)>)> {
        let k = self.k();
        if a == b || a >= k || b >= k {
            return usage(format!("cannot merge clusters {a} and {b} with k = {k}"));
        }
        let (keep, drop) = (a.min(b), a.max(b));
        for p in std::mem::take(&mut self.members[drop]) {
            self.attach(p, keep);
        }
        let last = k - 1;
        let relabel = if drop != last {
            let moved = self.members.pop().expect("k ≥ 2");
            for &p in &moved {
                self.assignment[p] = drop;
            }
            self.members[drop] = moved;
            Some((last, drop))
        } else {
            self.members.pop();
            None
        };
        Ok((keep, relabel))
    }

    /// Moves `part` (a non-empty proper subset of cluster `c`) into a new cluster
    /// with id `k`, which is returned.
    pub fn split(&mut self, c: usize, part: &[usize]) -> Result<usize> {
        if c >= self.k() {
            return usage(format!("cluster {c} out of range"));
        }
        if part.is_empty() || part.len() >= self.members[c].len() {
            return usage("split part must be a non-empty proper subset");
        }
        if let Some(&p) = part
            .iter()
            .find(|&&p| p >= self.n() || self.assignment[p] != c)
        {
            return usage(format!("point {p} is not in cluster {c}"));
        }
        let new = self.k();
        self.members.push(Vec::new());
        for &p in part {
            if self.assignment[p] != c {
                return usage(format!("point {p} listed twice"));
            }
            self.detach(p);
            self.attach(p, new);
        }
        Ok(new)
    }

    /// Labels renumbered by first occurrence, for comparing partitions.
    pub fn canonical_labels(&self) -> Vec<usize> {
        let mut map = vec![usize::MAX; self.k()];
        let mut next = 0;
        self.assignment
            .iter()
            .map(|&c| {
                if map[c] == usize::MAX {
                    map[c] = next;
                    next += 1;
                }
                map[c]
            })
            .collect()
    }

    /// True when both describe the same partition, whatever the labels.
    pub fn same_partition(&self, other: &Clustering) -> bool {
        self.canonical_labels() == other.canonical_labels()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ClusteringFile {
            k: self.k(),
            assignment: self.assignment.clone(),
        })
        .expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ClusteringFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(f.assignment, f.k)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

/// Point-to-set objective used to measure envy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Avg,
    Median,
    /// `√median`; ratios are `√median(own) / √median(other)`.
    SqrtMedian,
    Max,
}

impl FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "avg" | "average" => Ok(Objective::Avg),
            "median" => Ok(Objective::Median),
            "sqrt_median" | "sqrt-median" => Ok(Objective::SqrtMedian),
            "max" => Ok(Objective::Max),
            other => usage(format!("unknown objective `{other}`")),
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Objective::Avg => "avg",
            Objective::Median => "median",
            Objective::SqrtMedian => "sqrt_median",
            Objective::Max => "max",
        })
    }
}

fn nonempty(s: &[usize]) -> Result<()> {
    if s.is_empty() {
        usage("point set is empty")
    } else {
        Ok(())
    }
}

/// Mean of `d(p, q)` over `q ∈ s`.
pub fn avg_dist(space: &MetricSpace, p: usize, s: &[usize]) -> Result<f64> {
    nonempty(s)?;
    Ok(s.iter().map(|&q| space.distance(p, q)).sum::<f64>() / s.len() as f64)
}

/// The `⌈|s|/2⌉`-th smallest of `d(p, q)`, `q ∈ s`.
pub fn median_dist(space: &MetricSpace, p: usize, s: &[usize]) -> Result<f64> {
    nonempty(s)?;
    let mut v: Vec<f64> = s.iter().map(|&q| space.distance(p, q)).collect();
    Ok(median_of(&mut v))
}

/// Largest `d(p, q)`, `q ∈ s`.
pub fn max_dist(space: &MetricSpace, p: usize, s: &[usize]) -> Result<f64> {
    nonempty(s)?;
    Ok(s.iter().map(|&q| space.distance(p, q)).fold(0.0, f64::max))
}

/// Lower median (`⌈m/2⌉`-th smallest) of a non-empty slice; reorders it.
pub(crate) fn median_of(v: &mut [f64]) -> f64 {
    let idx = v.len().div_ceil(2) - 1;
    *v.select_nth_unstable_by(idx, f64::total_cmp).1
}

/// Envy ratio with `0/0 = 0` and `x/0 = ∞`.
#[inline]
pub fn envy_ratio(own: f64, other: f64) -> f64 {
    if other > 0.0 {
        own / other
    } else if own > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// `f(p, C)` for every cluster, excluding `p` from its own cluster. The entry
/// for the own cluster of a singleton is 0.
pub fn objective_profile(
    space: &MetricSpace,
    clustering: &Clustering,
    objective: Objective,
    p: usize,
) -> Vec<f64> {
    let k = clustering.k();
    let own = clustering.cluster_of(p);
    match objective {
        Objective::Avg => {
            let mut sums = vec![0.0; k];
            for q in 0..clustering.n() {
                if q != p {
                    sums[clustering.cluster_of(q)] += space.distance(p, q);
                }
            }
            (0..k)
                .map(|c| {
                    let m = clustering.size(c) - usize::from(c == own);
                    if m == 0 {
                        0.0
                    } else {
                        sums[c] / m as f64
                    }
                })
                .collect()
        }
        Objective::Max => {
            let mut maxes = vec![0.0f64; k];
            for q in 0..clustering.n() {
                if q != p {
                    let c = clustering.cluster_of(q);
                    maxes[c] = maxes[c].max(space.distance(p, q));
                }
            }
            maxes
        }
        Objective::Median | Objective::SqrtMedian => {
            let mut buckets: Vec<Vec<f64>> = (0..k)
                .map(|c| Vec::with_capacity(clustering.size(c)))
                .collect();
            for q in 0..clustering.n() {
                if q != p {
                    buckets[clustering.cluster_of(q)].push(space.distance(p, q));
                }
            }
            buckets
                .iter_mut()
                .map(|b| {
                    if b.is_empty() {
                        return 0.0;
                    }
                    let m = median_of(b);
                    if objective == Objective::SqrtMedian {
                        m.sqrt()
                    } else {
                        m
                    }
                })
                .collect()
        }
    }
}

/// Worst envy per point and overall.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub objective: Objective,
    #[serde(with = "crate::serde_float")]
    pub alpha_achieved: f64,
    /// `(point, target cluster)` attaining `alpha_achieved`; absent when it is 0.
    pub witness: Option<(usize, usize)>,
    #[serde(with = "crate::serde_float::vec")]
    pub per_point: Vec<f64>,
    #[serde(
        with = "crate::serde_float::option",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stable: Option<bool>,
}

/// Exact envy computation over all points and clusters.
///
/// For each `p` not in a singleton and each other cluster `C'`, the ratio is
/// `f(p, C(p) \ {p}) / f(p, C')`. With `alpha` given, the report says whether
/// the clustering is `alpha`-stable.
pub fn verify_stability(
    space: &MetricSpace,
    clustering: &Clustering,
    objective: Objective,
    alpha: Option<f64>,
) -> Result<StabilityReport> {
    if clustering.n() != space.n() {
        return usage(format!(
            "clustering covers {} points, space has {}",
            clustering.n(),
            space.n()
        ));
    }
    let mut per_point = vec![0.0; space.n()];
    let mut best = 0.0;
    let mut witness = None;
    for (p, slot) in per_point.iter_mut().enumerate() {
        let own = clustering.cluster_of(p);
        if clustering.size(own) == 1 {
            continue;
        }
        let f = objective_profile(space, clustering, objective, p);
        let mut worst = 0.0;
        let mut worst_c = None;
        for (c, &fc) in f.iter().enumerate() {
            if c == own {
                continue;
            }
            let r = envy_ratio(f[own], fc);
            if r > worst {
                worst = r;
                worst_c = Some(c);
            }
        }
        *slot = worst;
        if worst > best {
            best = worst;
            witness = worst_c.map(|c| (p, c));
        }
    }
    Ok(StabilityReport {
        objective,
        alpha_achieved: best,
        witness,
        per_point,
        alpha,
        stable: alpha.map(|a| best <= a),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Norm;

    fn line(xs: &[f64]) -> MetricSpace {
        MetricSpace::from_points(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>(), Norm::L2)
            .unwrap()
    }

    #[test]
    fn objectives_on_small_sets() {
        let s = line(&[0.0, 1.0, 2.0, 6.0, 9.0]);
        assert_eq!(avg_dist(&s, 0, &[1, 2, 3]).unwrap(), 3.0);
        assert_eq!(avg_dist(&s, 0, &[0]).unwrap(), 0.0);
        assert_eq!(median_dist(&s, 0, &[1, 2, 3, 4]).unwrap(), 2.0);
        assert_eq!(max_dist(&s, 0, &[1, 2, 3]).unwrap(), 6.0);
        assert_eq!(max_dist(&s, 0, &[0]).unwrap(), 0.0);
        assert!(matches!(avg_dist(&s, 0, &[]), Err(Error::Usage(_))));
        assert!(median_dist(&s, 0, &[]).is_err());
        assert!(max_dist(&s, 0, &[]).is_err());
        let five = line(&[0.0, 5.0]);
        assert_eq!(median_dist(&five, 0, &[1]).unwrap(), 5.0);
        let tens = line(&[0.0, 10.0, 10.0]);
        assert_eq!(median_dist(&tens, 0, &[1, 2]).unwrap(), 10.0);
    }

    #[test]
    fn verify_two_pairs_on_line() {
        let s = line(&[0.0, 1.0, 10.0, 11.0]);
        let c = Clustering::new(vec![0, 0, 1, 1], 2).unwrap();
        let r = verify_stability(&s, &c, Objective::Avg, Some(1.0)).unwrap();
        // Hand evaluation: outer points see 1 / ((10 + 11) / 2), inner points
        // see 1 / ((9 + 10) / 2), so the inner ones are the worst.
        assert_eq!(
            r.per_point,
            vec![1.0 / 10.5, 1.0 / 9.5, 1.0 / 9.5, 1.0 / 10.5]
        );
        assert_eq!(r.alpha_achieved, 1.0 / 9.5);
        assert_eq!(r.witness, Some((1, 1)));
        assert_eq!(r.stable, Some(true));
    }

    #[test]
    fn singletons_have_no_envy() {
        let s = line(&[0.0, 3.0, 7.0]);
        let r = verify_stability(&s, &Clustering::singletons(3), Objective::Median, None).unwrap();
        assert_eq!(r.alpha_achieved, 0.0);
        assert_eq!(r.witness, None);
    }

    #[test]
    fn zero_denominator_gives_infinity() {
        // 0 and 1 coincide; 0 sits with the far point 2, 1 is alone.
        let s = MetricSpace::from_rows(vec![
            vec![0.0, 0.0, 5.0],
            vec![0.0, 0.0, 5.0],
            vec![5.0, 5.0, 0.0],
        ])
        .unwrap();
        let c = Clustering::new(vec![0, 1, 0], 2).unwrap();
        let r = verify_stability(&s, &c, Objective::Avg, Some(1e9)).unwrap();
        assert_eq!(r.alpha_achieved, f64::INFINITY);
        assert_eq!(r.witness, Some((0, 1)));
        assert_eq!(r.stable, Some(false));
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"alpha_achieved\":\"inf\""));
        let back: StabilityReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn merge_split_and_moves_keep_invariants() {
        let mut c = Clustering::new(vec![0, 1, 2, 0, 1, 2, 3], 4).unwrap();
        let (keep, relabel) = c.merge(1, 2).unwrap();
        assert_eq!(keep, 1);
        assert_eq!(relabel, Some((3, 2)));
        assert_eq!(c.k(), 3);
        assert_eq!(c.cluster_of(6), 2);
        let mut m = c.members(1).to_vec();
        m.sort();
        assert_eq!(m, vec![1, 2, 4, 5]);
        let new = c.split(1, &[2, 5]).unwrap();
        assert_eq!(new, 3);
        assert_eq!(c.size(1), 2);
        c.move_point(0, 3).unwrap();
        assert!(c.move_point(6, 0).is_err());
        let rebuilt = Clustering::new(c.assignment().to_vec(), c.k()).unwrap();
        assert!(rebuilt.same_partition(&c));
        for cl in 0..c.k() {
            for &p in c.members(cl) {
                assert_eq!(c.cluster_of(p), cl);
            }
        }
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let c = Clustering::new(vec![1, 0, 1], 2).unwrap();
        assert_eq!(c.to_json(), r#"{"k":2,"assignment":[1,0,1]}"#);
        assert_eq!(Clustering::from_json(&c.to_json()).unwrap(), c);
        assert!(Clustering::new(vec![0, 0], 2).is_err());
        assert!(Clustering::new(vec![0, 2], 2).is_err());
        assert!(Clustering::from_json("{").is_err());
    }
}
