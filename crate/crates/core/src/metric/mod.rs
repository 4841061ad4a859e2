//! Finite metric spaces with a counted distance oracle.

mod gen;
mod io;

pub use gen::{generate, GenKind, GenSpec, Generated};
pub use io::{read_matrix_csv, read_points_csv, write_matrix_csv, write_points_csv};

use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

/// Relative slack for symmetry and triangle checks.
pub const TRIANGLE_SLACK: f64 = 1e-9;

/// Norm used by coordinate-backed spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L2,
    L1,
}

impl FromStr for Norm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(Norm::L2),
            "l1" => Ok(Norm::L1),
            other => usage(format!("unknown norm `{other}` (expected l2 or l1)")),
        }
    }
}

#[derive(Debug)]
enum Backing {
    Table(Vec<f64>),
    Points {
        coords: Vec<f64>,
        dim: usize,
        norm: Norm,
    },
}

/// Points `0..n` with a distance oracle. Every call to [`MetricSpace::distance`]
/// bumps an atomic query counter.
#[derive(Debug)]
pub struct MetricSpace {
    n: usize,
    backing: Backing,
    queries: AtomicU64,
}

impl MetricSpace {
    /// Builds a space from a row-major `n × n` table, validating the metric axioms.
    pub fn from_table(n: usize, table: Vec<f64>) -> Result<Self> {
        let space = Self::from_table_unchecked(n, table)?;
        space.validate_table()?;
        Ok(space)
    }

    /// Builds a space from rows of a square table, validating the metric axioms.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut table = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMetric(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            table.extend(row);
        }
        Self::from_table(n, table)
    }

    /// Skips the O(n³) triangle check. Shape, finiteness and sign are still checked.
    pub(crate) fn from_table_unchecked(n: usize, table: Vec<f64>) -> Result<Self> {
        if table.len() != n * n {
            return Err(Error::InvalidMetric(format!(
                "table has {} entries, expected {}",
                table.len(),
                n * n
            )));
        }
        if let Some(v) = table.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidMetric(format!(
                "entry {v} is negative or not finite"
            )));
        }
        Ok(MetricSpace {
            n,
            backing: Backing::Table(table),
            queries: AtomicU64::new(0),
        })
    }

    /// Builds a space from coordinates. All points must share one dimension.
    pub fn from_points(points: &[Vec<f64>], norm: Norm) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return usage(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.len()
                ));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return usage(format!("point {i} has a non-finite coordinate"));
            }
            coords.extend_from_slice(p);
        }
        Ok(MetricSpace {
            n: points.len(),
            backing: Backing::Points { coords, dim, norm },
            queries: AtomicU64::new(0),
        })
    }

    /// Number of points.
    pub fn n(&self) -> usize {
        self.n
    }

    /// `d(i, j)`. Counts one query.
    ///
    /// # Panics
    /// If `i` or `j` is out of range; see [`MetricSpace::try_distance`].
    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        assert!(
            i < self.n && j < self.n,
            "point index out of range: ({i}, {j}) with n = {}",
            self.n
        );
        self.queries.fetch_add(1, Ordering::Relaxed);
        self.raw(i, j)
    }

    /// Checked variant of [`MetricSpace::distance`].
    pub fn try_distance(&self, i: usize, j: usize) -> Result<f64> {
        if i >= self.n || j >= self.n {
            return usage(format!(
                "point index out of range: ({i}, {j}) with n = {}",
                self.n
            ));
        }
        Ok(self.distance(i, j))
    }

    /// `d(i, j)` without counting, for audits and oracles.
    #[inline]
    pub(crate) fn distance_uncounted(&self, i: usize, j: usize) -> f64 {
        assert!(
            i < self.n && j < self.n,
            "point index out of range: ({i}, {j}) with n = {}",
            self.n
        );
        self.raw(i, j)
    }

    /// Total distance evaluations so far.
    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    #[inline]
    fn raw(&self, i: usize, j: usize) -> f64 {
        match &self.backing {
            Backing::Table(t) => t[i * self.n + j],
            Backing::Points { coords, dim, norm } => {
                let a = &coords[i * dim..(i + 1) * dim];
                let b = &coords[j * dim..(j + 1) * dim];
                match norm {
                    Norm::L2 => a
                        .iter()
                        .zip(b)
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt(),
                    Norm::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
                }
            }
        }
    }

    /// Coordinates and norm, for coordinate-backed spaces.
    pub fn points(&self) -> Option<(Vec<Vec<f64>>, Norm)> {
        match &self.backing {
            Backing::Table(_) => None,
            Backing::Points { coords, dim, norm } => {
                let pts = if *dim == 0 {
                    vec![Vec::new(); self.n]
                } else {
                    coords.chunks(*dim).map(<[f64]>::to_vec).collect()
                };
                Some((pts, *norm))
            }
        }
    }

    /// The full distance table, row-major. Does not count queries.
    pub fn to_table(&self) -> Vec<f64> {
        let mut t = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.push(self.raw(i, j));
            }
        }
        t
    }

    /// Maximum distance between any two points. Counts queries.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                best = best.max(self.distance(i, j));
            }
        }
        best
    }

    fn validate_table(&self) -> Result<()> {
        let Backing::Table(t) = &self.backing else {
            return Ok(());
        };
        let n = self.n;
        for i in 0..n {
            if t[i * n + i] != 0.0 {
                return Err(Error::InvalidMetric(format!(
                    "d({i},{i}) = {} is not zero",
                    t[i * n + i]
                )));
            }
            for j in i + 1..n {
                let (a, b) = (t[i * n + j], t[j * n + i]);
                if (a - b).abs() > TRIANGLE_SLACK * a.max(b) {
                    return Err(Error::InvalidMetric(format!(
                        "d({i},{j}) = {a} but d({j},{i}) = {b}"
                    )));
                }
            }
        }
        for i in 0..n {
            let ri = &t[i * n..(i + 1) * n];
            for j in i + 1..n {
                let rj = &t[j * n..(j + 1) * n];
                let dij = ri[j];
                let bound = ri
                    .iter()
                    .zip(rj)
                    .map(|(a, b)| a + b)
                    .fold(f64::INFINITY, f64::min);
                if dij - bound > TRIANGLE_SLACK * dij {
                    let x = (0..n).find(|&x| ri[x] + rj[x] == bound).unwrap_or(0);
                    return Err(Error::InvalidMetric(format!(
                        "triangle inequality fails: d({i},{j}) = {dij} > d({i},{x}) + d({x},{j}) = {bound}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Searches for a triple violating the triangle inequality beyond
    /// [`TRIANGLE_SLACK`]: exhaustively for `n ≤ 64`, otherwise over
    /// `samples` random triples. Does not count queries.
    pub fn find_triangle_violation<R: Rng>(
        &self,
        samples: usize,
        rng: &mut R,
    ) -> Option<(usize, usize, usize)> {
        let n = self.n;
        let bad = |i: usize, x: usize, j: usize| {
            let dij = self.raw(i, j);
            dij - (self.raw(i, x) + self.raw(x, j)) > TRIANGLE_SLACK * dij
        };
        if n <= 64 {
            for i in 0..n {
                for x in 0..n {
                    for j in 0..n {
                        if bad(i, x, j) {
                            return Some((i, x, j));
                        }
                    }
                }
            }
            return None;
        }
        (0..samples)
            .map(|_| {
                (
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                )
            })
            .find(|&(i, x, j)| bad(i, x, j))
    }
}
