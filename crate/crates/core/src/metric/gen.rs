use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{MetricSpace, Norm};
use crate::clustering::Clustering;
use crate::error::{usage, Error, Result};
use crate::rng;

/// Instance family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenKind {
    /// Gaussian blobs around `k` random centers in `[0, 10]^dim`, L2 norm.
    EuclideanMixture,
    /// Uniform `(0, 1]` weights closed under shortest paths.
    RandomShortestPath,
    /// `k` tight groups whose pairwise gaps exceed their diameter by `1/separation`.
    PlantedSeparated,
}

impl FromStr for GenKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean_mixture" | "euclidean" | "mixture" => Ok(GenKind::EuclideanMixture),
            "random_shortest_path" | "shortest_path" | "shortest-path" => {
                Ok(GenKind::RandomShortestPath)
            }
            "planted_separated" | "planted" => Ok(GenKind::PlantedSeparated),
            other => usage(format!("unknown generator kind `{other}`")),
        }
    }
}

/// Generator parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub kind: GenKind,
    pub n: usize,
    pub k: usize,
    pub dim: usize,
    pub separation: f64,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(kind: GenKind, n: usize, k: usize, seed: u64) -> Self {
        GenSpec {
            kind,
            n,
            k,
            dim: 2,
            separation: 0.1,
            seed,
        }
    }
}

/// A generated space, plus the planted partition for `PlantedSeparated`.
#[derive(Debug)]
pub struct Generated {
    pub space: MetricSpace,
    pub planted: Option<Clustering>,
}

/// Deterministic in `spec`.
pub fn generate(spec: &GenSpec) -> Result<Generated> {
    if spec.n == 0 {
        return usage("n must be at least 1");
    }
    let mut rng = rng::stream(spec.seed, 0);
    match spec.kind {
        GenKind::EuclideanMixture => {
            if spec.k == 0 || spec.dim == 0 {
                return usage("euclidean_mixture needs k ≥ 1 and dim ≥ 1");
            }
            let centers: Vec<Vec<f64>> = (0..spec.k)
                .map(|_| (0..spec.dim).map(|_| rng.gen_range(0.0..10.0)).collect())
                .collect();
            let points: Vec<Vec<f64>> = (0..spec.n)
                .map(|_| {
                    let c = &centers[rng.gen_range(0..spec.k)];
                    c.iter()
                        .map(|x| x + rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect();
            Ok(Generated {
                space: MetricSpace::from_points(&points, Norm::L2)?,
                planted: None,
            })
        }
        GenKind::RandomShortestPath => {
            let n = spec.n;
            let mut t = vec![0.0; n * n];
            for i in 0..n {
                for j in i + 1..n {
                    let w = 1.0 - rng.gen::<f64>();
                    t[i * n + j] = w;
                    t[j * n + i] = w;
                }
            }
            for x in 0..n {
                for i in 0..n {
                    let dix = t[i * n + x];
                    for j in 0..n {
                        let via = dix + t[x * n + j];
                        if via < t[i * n + j] {
                            t[i * n + j] = via;
                        }
                    }
                }
            }
            Ok(Generated {
                space: MetricSpace::from_table_unchecked(n, t)?,
                planted: None,
            })
        }
        GenKind::PlantedSeparated => {
            if spec.k < 2 || spec.n < spec.k {
                return usage("planted_separated needs 2 ≤ k ≤ n");
            }
            if !(spec.separation > 0.0 && spec.separation.is_finite()) {
                return usage("separation must be positive and finite");
            }
            let dim = spec.dim.max(1);
            let diam = 1.0;
            let gap = diam / spec.separation;
            let assignment: Vec<usize> = (0..spec.n).map(|i| i % spec.k).collect();
            let points: Vec<Vec<f64>> = assignment
                .iter()
                .map(|&g| {
                    let offset = g as f64 * (diam + gap);
                    let mut p = ball_point(dim, diam / 2.0, &mut rng);
                    p[0] += offset;
                    p
                })
                .collect();
            let coords = MetricSpace::from_points(&points, Norm::L2)?;
            let space = MetricSpace::from_table_unchecked(spec.n, coords.to_table())?;
            let planted = Clustering::new(assignment, spec.k)?;
            Ok(Generated {
                space,
                planted: Some(planted),
            })
        }
    }
}

fn ball_point<R: Rng>(dim: usize, radius: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        if p.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            return p.into_iter().map(|x| x * radius).collect();
        }
    }
}
