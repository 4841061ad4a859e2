//! Minimum-β clustering through the max-edge split tree of an MST.
//!
//! `β(C) = diam(C) / d(C, X∖C)`. Any clustering whose clusters all have
//! `β < 1` is induced by the tree, so a dynamic program over tree nodes finds
//! the optimum among such clusterings, and every clustering is
//! `β(𝒞)`-IP stable for the average objective.

use std::cmp::Ordering;

use crate::clustering::Clustering;
use crate::error::{usage, Result};
use crate::local_search::check_k;
use crate::metric::MetricSpace;

/// Largest `n` accepted by [`brute_force_min_beta`].
pub const BRUTE_FORCE_LIMIT: usize = 10;

/// `0/0 = 0`, `x/0 = ∞`.
fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// `β(C)`; 0 when `C` is the whole space.
pub fn beta(space: &MetricSpace, c: &[usize]) -> Result<f64> {
    if c.is_empty() {
        return usage("beta of an empty set");
    }
    let n = space.n();
    let mut inside = vec![false; n];
    for &p in c {
        inside[p] = true;
    }
    if inside.iter().all(|&b| b) {
        return Ok(0.0);
    }
    let mut diam = 0.0f64;
    for (i, &p) in c.iter().enumerate() {
        for &q in &c[i + 1..] {
            diam = diam.max(space.distance(p, q));
        }
    }
    let mut out = f64::INFINITY;
    for &p in c {
        for q in (0..n).filter(|&q| !inside[q]) {
            out = out.min(space.distance(p, q));
        }
    }
    Ok(ratio(diam, out))
}

/// `max_C β(C)`.
pub fn beta_clustering(space: &MetricSpace, clustering: &Clustering) -> f64 {
    clustering
        .clusters()
        .map(|c| beta(space, c).expect("clusters are non-empty"))
        .fold(0.0, f64::max)
}

/// MST edge with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub w: f64,
}

impl MstEdge {
    fn new(p: usize, q: usize, w: f64) -> Self {
        MstEdge {
            a: p.min(q),
            b: p.max(q),
            w,
        }
    }

    /// Order by weight, then endpoints.
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.w
            .total_cmp(&other.w)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

/// Dense Prim from point 0 in `n(n−1)/2` queries. Among equal weights the
/// edge with the smaller `(a, b)` wins. Edges are returned in insertion order.
pub fn mst(space: &MetricSpace) -> Vec<MstEdge> {
    let n = space.n();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best: Vec<Option<MstEdge>> = vec![None; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut last = 0;
    in_tree[0] = true;
    for _ in 1..n {
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let cand = MstEdge::new(last, v, space.distance(last, v));
            if best[v].map_or(true, |e| cand.cmp_key(&e) == Ordering::Less) {
                best[v] = Some(cand);
            }
        }
        let v = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&x, &y| best[x].expect("set").cmp_key(&best[y].expect("set")))
            .expect("a vertex remains");
        in_tree[v] = true;
        edges.push(best[v].expect("set"));
        last = v;
    }
    edges
}

/// Node of the split tree. Its points are `order[start..end]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    pub start: usize,
    pub end: usize,
    pub children: Option<(usize, usize)>,
    /// `diam(f(u))`.
    pub diam: f64,
    /// `d(f(u), X∖f(u))`; infinite at the root.
    pub outside: f64,
}

impl TreeNode {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// Tree from recursively removing the longest MST edge.
#[derive(Clone, Debug)]
pub struct SplitTree {
    pub nodes: Vec<TreeNode>,
    pub root: usize,
    order: Vec<usize>,
}

impl SplitTree {
    /// `f(u)`.
    pub fn points(&self, u: usize) -> &[usize] {
        let node = &self.nodes[u];
        &self.order[node.start..node.end]
    }

    /// `β(f(u))`.
    pub fn beta(&self, u: usize) -> f64 {
        if u == self.root {
            0.0
        } else {
            ratio(self.nodes[u].diam, self.nodes[u].outside)
        }
    }
}

/// Builds the split tree. The longest edge is removed first; among equal
/// lengths the edge with the smaller `(a, b)` goes first. The left child
/// holds the removed edge's endpoint `a`. Computes node diameters and outside
/// distances with `O(n²)` queries.
pub fn create_tree(space: &MetricSpace, edges: &[MstEdge]) -> Result<SplitTree> {
    let n = space.n();
    if n == 0 {
        return usage("create_tree on an empty space");
    }
    if edges.len() != n - 1 {
        return usage(format!("expected {} edges, got {}", n - 1, edges.len()));
    }
    // Union in reverse removal order: ascending weight, descending endpoints.
    let mut sorted = edges.to_vec();
    sorted.sort_by(|x, y| x.w.total_cmp(&y.w).then(y.a.cmp(&x.a)).then(y.b.cmp(&x.b)));
    let mut parent: Vec<usize> = (0..n).collect();
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut kids: Vec<Option<(usize, usize)>> = vec![None; n];
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for e in &sorted {
        let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
        if ra == rb {
            return usage("edges contain a cycle");
        }
        kids.push(Some((node_of[ra], node_of[rb])));
        parent[rb] = ra;
        node_of[ra] = kids.len() - 1;
    }
    let root = kids.len() - 1;

    // Lay points out in DFS order so each node is a contiguous range.
    let mut nodes: Vec<TreeNode> = kids
        .iter()
        .map(|&children| TreeNode {
            start: 0,
            end: 0,
            children,
            diam: 0.0,
            outside: f64::INFINITY,
        })
        .collect();
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![(root, false)];
    while let Some((u, done)) = stack.pop() {
        match (nodes[u].children, done) {
            (None, _) => {
                nodes[u].start = order.len();
                order.push(u);
                nodes[u].end = order.len();
            }
            (Some((l, r)), false) => {
                nodes[u].start = order.len();
                stack.push((u, true));
                stack.push((r, false));
                stack.push((l, false));
            }
            (Some(_), true) => nodes[u].end = order.len(),
        }
    }

    // Each point pair is compared once, at its lowest common ancestor.
    let mut post = Vec::with_capacity(nodes.len());
    let mut stack = vec![root];
    while let Some(u) = stack.pop() {
        post.push(u);
        if let Some((l, r)) = nodes[u].children {
            stack.push(l);
            stack.push(r);
        }
    }
    let mut cross_min = vec![f64::INFINITY; nodes.len()];
    for &u in post.iter().rev() {
        if let Some((l, r)) = nodes[u].children {
            let (mut mx, mut mn) = (0.0f64, f64::INFINITY);
            for &p in &order[nodes[l].start..nodes[l].end] {
                for &q in &order[nodes[r].start..nodes[r].end] {
                    let d = space.distance(p, q);
                    mx = mx.max(d);
                    mn = mn.min(d);
                }
            }
            nodes[u].diam = nodes[l].diam.max(nodes[r].diam).max(mx);
            cross_min[u] = mn;
        }
    }
    for &u in &post {
        if let Some((l, r)) = nodes[u].children {
            let out = nodes[u].outside.min(cross_min[u]);
            nodes[l].outside = out;
            nodes[r].outside = out;
        }
    }
    Ok(SplitTree { nodes, root, order })
}

#[derive(Clone, Copy)]
struct Cell {
    beta: f64,
    /// Clusters taken from the right child.
    right: usize,
}

/// Minimum-β `k`-clustering among clusterings whose clusters are tree nodes.
/// `DP(u, k′)` combines `i` clusters of the right child with `k′ − i` of the
/// left; ties keep the smallest `i`.
pub fn dp_min_beta(tree: &SplitTree, k: usize) -> Result<(Clustering, f64)> {
    let n = tree.nodes[tree.root].len();
    if k < 1 || k > n {
        return usage(format!("need 1 ≤ k ≤ n, got k = {k}, n = {n}"));
    }
    let m = tree.nodes.len();
    // table[u][k′ − 1]; absent when f(u) has fewer than k′ points.
    let mut table: Vec<Vec<Option<Cell>>> = vec![Vec::new(); m];
    let mut post = Vec::with_capacity(m);
    let mut stack = vec![tree.root];
    while let Some(u) = stack.pop() {
        post.push(u);
        if let Some((l, r)) = tree.nodes[u].children {
            stack.push(l);
            stack.push(r);
        }
    }
    for &u in post.iter().rev() {
        let cap = k.min(tree.nodes[u].len());
        let mut row = vec![None; cap];
        row[0] = Some(Cell {
            beta: tree.beta(u),
            right: 0,
        });
        if let Some((l, r)) = tree.nodes[u].children {
            for kk in 2..=cap {
                let mut best: Option<Cell> = None;
                for i in 1..kk {
                    let (Some(Some(rc)), Some(Some(lc))) =
                        (table[r].get(i - 1), table[l].get(kk - i - 1))
                    else {
                        continue;
                    };
                    let b = rc.beta.max(lc.beta);
                    if best.map_or(true, |c| b < c.beta) {
                        best = Some(Cell { beta: b, right: i });
                    }
                }
                row[kk - 1] = best;
            }
        }
        table[u] = row;
    }
    let top =
        table[tree.root][k - 1].expect("a tree with n leaves has a k-clustering for every k ≤ n");
    let mut clusters = Vec::with_capacity(k);
    let mut stack = vec![(tree.root, k)];
    while let Some((u, kk)) = stack.pop() {
        let cell = table[u][kk - 1].expect("reconstruction follows stored cells");
        if kk == 1 {
            clusters.push(tree.points(u).to_vec());
            continue;
        }
        let (l, r) = tree.nodes[u]
            .children
            .expect("k′ > 1 only at internal nodes");
        stack.push((r, cell.right));
        stack.push((l, kk - cell.right));
    }
    Ok((Clustering::from_clusters(&clusters, n)?, top.beta))
}

/// MST, split tree and DP. If some `k`-clustering has `β < 1`, the result's
/// `β` is at most its `β`.
pub fn stable_cluster(space: &MetricSpace, k: usize) -> Result<(Clustering, f64)> {
    check_k(space.n(), k)?;
    let tree = create_tree(space, &mst(space))?;
    dp_min_beta(&tree, k)
}

#[derive(Clone, Debug)]
pub struct BruteForce {
    pub clustering: Clustering,
    pub beta: f64,
    /// Number of `k`-partitions enumerated.
    pub partitions: u64,
}

/// Minimum `β` over all `k`-partitions, for `n ≤ 10`. Ties keep the first
/// partition in restricted-growth-string order.
pub fn brute_force_min_beta(space: &MetricSpace, k: usize) -> Result<BruteForce> {
    let n = space.n();
    if n > BRUTE_FORCE_LIMIT {
        return usage(format!(
            "brute force needs n ≤ {BRUTE_FORCE_LIMIT}, got {n}"
        ));
    }
    if k < 1 || k > n {
        return usage(format!("need 1 ≤ k ≤ n, got k = {k}, n = {n}"));
    }
    let d: Vec<f64> = (0..n * n).map(|i| space.distance(i / n, i % n)).collect();
    let beta_of = |labels: &[usize]| -> f64 {
        let mut worst = 0.0f64;
        for c in 0..k {
            let (mut diam, mut out) = (0.0f64, f64::INFINITY);
            for p in (0..n).filter(|&p| labels[p] == c) {
                for q in 0..n {
                    if labels[q] == c {
                        diam = diam.max(d[p * n + q]);
                    } else {
                        out = out.min(d[p * n + q]);
                    }
                }
            }
            let b = if k == 1 { 0.0 } else { ratio(diam, out) };
            worst = worst.max(b);
        }
        worst
    };
    let mut labels = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut count = 0u64;
    fn go(
        i: usize,
        used: usize,
        k: usize,
        labels: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        let n = labels.len();
        if n - i < k - used {
            return;
        }
        if i == n {
            visit(labels);
            return;
        }
        for c in 0..=used.min(k - 1) {
            labels[i] = c;
            go(i + 1, used.max(c + 1), k, labels, visit);
        }
    }
    go(0, 0, k, &mut labels, &mut |l: &[usize]| {
        count += 1;
        let b = beta_of(l);
        if best.as_ref().map_or(true, |(bb, _)| b < *bb) {
            best = Some((b, l.to_vec()));
        }
    });
    let (beta, labels) = best.expect("at least one partition");
    Ok(BruteForce {
        clustering: Clustering::new(labels, k)?,
        beta,
        partitions: count,
    })
}
