//! Structural metrics: distances, bisection estimates, random link failure
//! sweeps, and the cluster layout of PolarStar supernodes.

use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::graph::Graph;
use crate::star::PolarStarGraph;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("Disconnected: graph has {components} components")]
    Disconnected { components: usize },
    #[error("DecompositionNotFound: {0}")]
    DecompositionNotFound(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceStats {
    pub diameter: usize,
    /// Mean over ordered pairs of distinct vertices.
    pub average_path_length: f64,
}

/// Exact all-pairs BFS statistics; self-loops play no role.
pub fn distance_stats(g: &Graph) -> Result<DistanceStats, AnalysisError> {
    let n = g.n();
    if n <= 1 {
        return Ok(DistanceStats { diameter: 0, average_path_length: 0.0 });
    }
    let (_, components) = g.components();
    if components > 1 {
        return Err(AnalysisError::Disconnected { components });
    }
    let (diameter, total) = (0..n)
        .into_par_iter()
        .map(|s| {
            let d = g.bfs(s);
            (d.iter().copied().max().unwrap_or(0), d.iter().map(|&x| x as u64).sum::<u64>())
        })
        .reduce(|| (0, 0), |a, b| (a.0.max(b.0), a.1 + b.1));
    Ok(DistanceStats { diameter, average_path_length: total as f64 / (n * (n - 1)) as f64 })
}

/// Number of non-loop edges with endpoints on different sides.
pub fn cut_size(g: &Graph, side: &[bool]) -> usize {
    g.edges().filter(|&(u, v)| side[u] != side[v]).count()
}

#[derive(Debug, Clone, Serialize)]
pub struct Bisection {
    pub cut_edges: usize,
    pub total_edges: usize,
    pub fraction: f64,
    /// `true` for vertices on the second side.
    pub side: Vec<bool>,
}

pub const DEFAULT_BISECTION_STARTS: usize = 16;

/// Smallest balanced cut found by multi-start Fiduccia–Mattheyses refinement.
/// Starts alternate between uniformly random halves and halves grown by BFS
/// from a random vertex. Sides differ in size by at most one.
pub fn bisection_estimate(g: &Graph, starts: usize, seed: u64) -> Bisection {
    let n = g.n();
    let total_edges = g.edge_count();
    let best = (0..starts.max(1))
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let init = if i % 2 == 0 { random_halves(n, &mut rng) } else { bfs_halves(g, &mut rng) };
            let side = fm_refine(g, init);
            (cut_size(g, &side), i, side)
        })
        .min_by_key(|(c, i, _)| (*c, *i))
        .map(|(c, _, s)| (c, s))
        .unwrap_or((0, vec![false; n]));
    let fraction = if total_edges == 0 { 0.0 } else { best.0 as f64 / total_edges as f64 };
    Bisection { cut_edges: best.0, total_edges, fraction, side: best.1 }
}

/// Balanced cut that splits every supernode the same way, along a half of
/// the supernode closed under its bijection `f`. No structure-edge image
/// then crosses, so only supernode edges are cut. Among such halves the one
/// cutting fewest supernode edges is used. `None` when no union of `f`
/// orbits has half the supernode order, or there are more than 24 orbits.
pub fn supernode_split_cut(ps: &PolarStarGraph) -> Option<Bisection> {
    let m = ps.supernode.n();
    let f = &ps.supernode.f;
    if m % 2 == 1 {
        return None;
    }
    let mut orbits: Vec<Vec<usize>> = Vec::new();
    let mut seen = vec![false; m];
    for a in 0..m {
        let mut orbit = Vec::new();
        let mut x = a;
        while !seen[x] {
            seen[x] = true;
            orbit.push(x);
            x = f[x];
        }
        if !orbit.is_empty() {
            orbits.push(orbit);
        }
    }
    if orbits.len() > 24 {
        return None;
    }
    let mut best: Option<(usize, Vec<bool>)> = None;
    for mask in 0u32..1 << orbits.len() {
        let size: usize = (0..orbits.len()).filter(|&i| mask >> i & 1 == 1).map(|i| orbits[i].len()).sum();
        if size != m / 2 {
            continue;
        }
        let mut half = vec![false; m];
        for i in (0..orbits.len()).filter(|&i| mask >> i & 1 == 1) {
            for &a in &orbits[i] {
                half[a] = true;
            }
        }
        let cut = cut_size(&ps.supernode.graph, &half);
        if best.as_ref().map_or(true, |(c, _)| cut < *c) {
            best = Some((cut, half));
        }
    }
    let (_, half) = best?;
    let side: Vec<bool> = (0..ps.graph.n()).map(|v| half[ps.local_index(v)]).collect();
    let cut_edges = cut_size(&ps.graph, &side);
    let total_edges = ps.graph.edge_count();
    Some(Bisection { cut_edges, total_edges, fraction: cut_edges as f64 / total_edges as f64, side })
}

fn random_halves(n: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut side = vec![false; n];
    for &v in &order[..n / 2] {
        side[v] = true;
    }
    side
}

fn bfs_halves(g: &Graph, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let n = g.n();
    let mut side = vec![false; n];
    if n == 0 {
        return side;
    }
    let mut seen = vec![false; n];
    let mut taken = 0;
    let mut queue = VecDeque::new();
    let mut unvisited: Vec<usize> = (0..n).collect();
    unvisited.shuffle(rng);
    while taken < n / 2 {
        if queue.is_empty() {
            let s = unvisited.iter().copied().find(|&v| !seen[v]).unwrap();
            seen[s] = true;
            queue.push_back(s);
        }
        let u = queue.pop_front().unwrap();
        side[u] = true;
        taken += 1;
        for &w in g.neighbors(u) {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    side
}

fn fm_refine(g: &Graph, mut side: Vec<bool>) -> Vec<bool> {
    let n = g.n();
    let (lo, hi) = (n / 2, n - n / 2);
    let mut cut = cut_size(g, &side) as i64;
    loop {
        let start_cut = cut;
        let mut gain: Vec<i64> = (0..n)
            .map(|v| g.neighbors(v).iter().map(|&w| if side[w] != side[v] { 1 } else { -1 }).sum())
            .collect();
        let mut locked = vec![false; n];
        let mut heaps = [BinaryHeap::new(), BinaryHeap::new()];
        for v in 0..n {
            heaps[side[v] as usize].push((gain[v], std::cmp::Reverse(v)));
        }
        let mut count1 = side.iter().filter(|&&s| s).count();
        let mut moves = Vec::with_capacity(n);
        let (mut best_cut, mut best_len) = (i64::MAX, 0);
        if count1 == lo || count1 == hi {
            best_cut = cut;
        }
        for _ in 0..n {
            // Keep side sizes within one of a balanced split.
            let can_leave = |s: usize, c1: usize| {
                let after = if s == 1 { c1 as i64 - 1 } else { c1 as i64 + 1 };
                after >= lo as i64 - 1 && after <= hi as i64 + 1
            };
            let mut pick = None;
            for s in 0..2 {
                if !can_leave(s, count1) {
                    continue;
                }
                while let Some(&(gv, std::cmp::Reverse(v))) = heaps[s].peek() {
                    if locked[v] || side[v] as usize != s || gain[v] != gv {
                        heaps[s].pop();
                        continue;
                    }
                    if pick.map_or(true, |(bg, _)| gv > bg) {
                        pick = Some((gv, v));
                    }
                    break;
                }
            }
            let Some((gv, v)) = pick else { break };
            locked[v] = true;
            let was = side[v];
            side[v] = !was;
            if was {
                count1 -= 1;
            } else {
                count1 += 1;
            }
            cut -= gv;
            moves.push(v);
            for &w in g.neighbors(v) {
                if locked[w] {
                    continue;
                }
                gain[w] += if side[w] == side[v] { -2 } else { 2 };
                heaps[side[w] as usize].push((gain[w], std::cmp::Reverse(w)));
            }
            if (count1 == lo || count1 == hi) && cut < best_cut {
                best_cut = cut;
                best_len = moves.len();
            }
        }
        for &v in moves[best_len..].iter().rev() {
            side[v] = !side[v];
        }
        cut = best_cut;
        if best_cut >= start_cut {
            break;
        }
    }
    side
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FaultSample {
    pub failure_fraction: f64,
    pub removed_links: usize,
    pub connected: bool,
    pub diameter: Option<usize>,
    pub average_path_length: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FaultCurve {
    pub trial: usize,
    pub disconnection_ratio: f64,
    pub samples: Vec<FaultSample>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FaultSweep {
    pub total_links: usize,
    /// Per trial, the fraction of links removed when the graph first disconnects.
    pub disconnection_ratios: Vec<f64>,
    pub median_disconnection_ratio: f64,
    /// Distance curve of the trial with the median disconnection ratio.
    pub median_curve: FaultCurve,
}

pub const DEFAULT_FAULT_TRIALS: usize = 100;
pub const DEFAULT_FAULT_STEP: f64 = 0.01;

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

fn trial_order(edges: &[(usize, usize)], seed: u64, trial: usize) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let mut order = edges.to_vec();
    order.shuffle(&mut rng);
    order
}

/// Number of links removed (in `order`) when the graph first disconnects;
/// `order.len() + 1` if it never does (only for graphs with at most one vertex).
fn disconnection_point(n: usize, order: &[(usize, usize)]) -> usize {
    if n <= 1 {
        return order.len() + 1;
    }
    // Re-add links from the back: the graph minus order[..k] is connected
    // exactly when k <= the index that completes a spanning forest.
    let mut uf = UnionFind((0..n).collect());
    let mut components = n;
    for i in (0..order.len()).rev() {
        if uf.union(order[i].0, order[i].1) {
            components -= 1;
            if components == 1 {
                return i + 1;
            }
        }
    }
    0
}

/// Random link failures: each trial removes links in a seeded random order
/// until the graph disconnects; distance curves are sampled every `step`
/// fraction of links for the median trial.
pub fn fault_sweep(g: &Graph, trials: usize, step: f64, seed: u64) -> FaultSweep {
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let m = edges.len();
    let trials = trials.max(1);
    let points: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|t| disconnection_point(g.n(), &trial_order(&edges, seed, t)))
        .collect();
    let ratios: Vec<f64> = points.iter().map(|&k| if m == 0 { 0.0 } else { k as f64 / m as f64 }).collect();
    let mut ranked: Vec<usize> = (0..trials).collect();
    ranked.sort_by(|&a, &b| points[a].cmp(&points[b]).then(a.cmp(&b)));
    let median_trial = ranked[(trials - 1) / 2];
    let order = trial_order(&edges, seed, median_trial);
    let cutoff = points[median_trial];
    let mut samples = Vec::new();
    let mut s = 0usize;
    loop {
        let fraction = s as f64 * step;
        let k = ((fraction * m as f64).round() as usize).min(m);
        let connected = k < cutoff;
        let (diameter, apl) = if connected {
            let st = distance_stats(&g.without_edges(&order[..k])).expect("connected by construction");
            (Some(st.diameter), Some(st.average_path_length))
        } else {
            (None, None)
        };
        samples.push(FaultSample { failure_fraction: fraction, removed_links: k, connected, diameter, average_path_length: apl });
        if !connected || k == m || step <= 0.0 {
            break;
        }
        s += 1;
    }
    let median = ratios[median_trial];
    FaultSweep {
        total_links: m,
        median_disconnection_ratio: median,
        disconnection_ratios: ratios,
        median_curve: FaultCurve { trial: median_trial, disconnection_ratio: median, samples },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Bundle {
    pub supernodes: (usize, usize),
    pub links: usize,
}

/// Supernodes grouped into one cluster of quadric supernodes and `q`
/// clusters of non-quadric ones, with inter-supernode link bundles.
#[derive(Debug, Clone, Serialize)]
pub struct LayoutDecomposition {
    pub q: u32,
    pub supernode_of_vertex: Vec<usize>,
    pub cluster_of_supernode: Vec<usize>,
    /// Cluster 0 holds the quadric supernodes.
    pub clusters: Vec<Vec<usize>>,
    pub bundles: Vec<Bundle>,
    /// Symmetric; the diagonal holds bundles inside a cluster.
    pub inter_cluster_bundles: Vec<Vec<usize>>,
    /// Edge-disjoint triangles of bundles inside each cluster.
    pub triangles: Vec<Vec<[usize; 3]>>,
}

impl LayoutDecomposition {
    pub fn intra_cluster_bundles(&self, c: usize) -> usize {
        self.inter_cluster_bundles[c][c]
    }

    pub fn bundles_between(&self, a: usize, b: usize) -> usize {
        self.inter_cluster_bundles[a][b]
    }

    pub fn total_bundles(&self) -> usize {
        self.bundles.len()
    }

    /// Distinct link counts over all bundles.
    pub fn bundle_sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.bundles.iter().map(|b| b.links).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn summary(&self) -> serde_json::Value {
        let k = self.clusters.len();
        let q = self.q as usize;
        serde_json::json!({
            "q": self.q,
            "supernodes": self.cluster_of_supernode.len(),
            "clusters": k,
            "cluster_sizes": self.clusters.iter().map(Vec::len).collect::<Vec<_>>(),
            "intra_cluster_bundles": (0..k).map(|c| self.intra_cluster_bundles(c)).collect::<Vec<_>>(),
            "triangles_per_cluster": self.triangles.iter().map(Vec::len).collect::<Vec<_>>(),
            "total_bundles": self.total_bundles(),
            "doubled_bundle_count": q * (q + 1) * (q + 1),
            "bundle_sizes": self.bundle_sizes(),
            "inter_cluster_bundles": self.inter_cluster_bundles,
        })
    }
}

/// Fix the first quadric `w`; each neighbour `v` of `w` heads a cluster made
/// of `v` and its non-quadric neighbours. Requires odd `q`.
pub fn layout_decompose(ps: &PolarStarGraph) -> Result<LayoutDecomposition, AnalysisError> {
    let er = &ps.structure.graph;
    let q = ps.q as usize;
    let s = er.n();
    let quadrics: Vec<usize> = er.self_loop_vertices().collect();
    let not_found = |msg: String| Err(AnalysisError::DecompositionNotFound(msg));
    let Some(&w) = quadrics.first() else { return not_found("no quadric".into()) };

    let mut cluster_of = vec![usize::MAX; s];
    let mut clusters = vec![quadrics.clone()];
    for &x in &quadrics {
        cluster_of[x] = 0;
    }
    for &v in er.neighbors(w) {
        if er.has_self_loop(v) || cluster_of[v] != usize::MAX {
            return not_found(format!("cluster head {v} is a quadric or already placed"));
        }
        let c = clusters.len();
        let mut members = vec![v];
        cluster_of[v] = c;
        for &u in er.neighbors(v) {
            if er.has_self_loop(u) {
                continue;
            }
            if cluster_of[u] != usize::MAX {
                return not_found(format!("supernode {u} lies in two clusters"));
            }
            cluster_of[u] = c;
            members.push(u);
        }
        if members.len() != q {
            return not_found(format!("cluster headed by {v} has {} supernodes, expected {q}", members.len()));
        }
        members.sort_unstable();
        clusters.push(members);
    }
    if clusters.len() != q + 1 || cluster_of.contains(&usize::MAX) {
        return not_found(format!("{} clusters do not partition {} supernodes", clusters.len(), s));
    }

    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (a, b) in ps.graph.edges() {
        let (x, y) = (ps.supernode_of(a), ps.supernode_of(b));
        if x != y {
            *counts.entry((x.min(y), x.max(y))).or_default() += 1;
        }
    }
    let bundles: Vec<Bundle> = counts.into_iter().map(|(p, links)| Bundle { supernodes: p, links }).collect();
    let k = clusters.len();
    let mut inter = vec![vec![0usize; k]; k];
    for b in &bundles {
        let (ca, cb) = (cluster_of[b.supernodes.0], cluster_of[b.supernodes.1]);
        inter[ca][cb] += 1;
        if ca != cb {
            inter[cb][ca] += 1;
        }
    }
    let triangles = clusters.iter().map(|c| edge_disjoint_triangles(er, c)).collect();

    Ok(LayoutDecomposition {
        q: ps.q,
        supernode_of_vertex: (0..ps.graph.n()).map(|v| ps.supernode_of(v)).collect(),
        cluster_of_supernode: cluster_of,
        clusters,
        bundles,
        inter_cluster_bundles: inter,
        triangles,
    })
}

fn edge_disjoint_triangles(g: &Graph, members: &[usize]) -> Vec<[usize; 3]> {
    let mut used = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (i, &a) in members.iter().enumerate() {
        for (j, &b) in members.iter().enumerate().skip(i + 1) {
            if !g.has_edge(a, b) {
                continue;
            }
            for &c in &members[j + 1..] {
                let sides = [(a, b), (a, c), (b, c)];
                if g.has_edge(a, c) && g.has_edge(b, c) && sides.iter().all(|e| !used.contains(e)) {
                    used.extend(sides);
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

/// Random `n`-vertex graph with each pair present with probability `p`.
pub fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges)
}
