//! Synthetic traffic patterns over endpoint addresses.

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::topology::Topology;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrafficError {
    #[error("PatternInfeasible: {0}")]
    PatternInfeasible(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficKind {
    Uniform,
    RandomRouterPermutation,
    BitShuffle,
    BitReverse,
    AdversarialSupernode,
}

impl TrafficKind {
    pub fn short_name(&self) -> &'static str {
        match self {
            TrafficKind::Uniform => "uniform",
            TrafficKind::RandomRouterPermutation => "perm",
            TrafficKind::BitShuffle => "shuffle",
            TrafficKind::BitReverse => "reverse",
            TrafficKind::AdversarialSupernode => "adversarial",
        }
    }

    pub fn from_short_name(s: &str) -> Option<Self> {
        Some(match s {
            "uniform" => TrafficKind::Uniform,
            "perm" => TrafficKind::RandomRouterPermutation,
            "shuffle" => TrafficKind::BitShuffle,
            "reverse" => TrafficKind::BitReverse,
            "adversarial" => TrafficKind::AdversarialSupernode,
            _ => return None,
        })
    }
}

/// Destination generator for every endpoint. Endpoints without a
/// destination do not inject.
#[derive(Debug, Clone)]
pub struct TrafficPattern {
    pub kind: TrafficKind,
    total_endpoints: usize,
    /// Fixed destination per endpoint; `None` for uniform traffic.
    map: Option<Vec<Option<usize>>>,
    router_of: Vec<usize>,
}

/// Rotate the low `bits` bits of `x` left by one.
pub fn bit_shuffle(x: usize, bits: u32) -> usize {
    if bits == 0 {
        return x;
    }
    let mask = (1usize << bits) - 1;
    ((x << 1) | (x >> (bits - 1))) & mask
}

/// Reverse the low `bits` bits of `x`.
pub fn bit_reverse(x: usize, bits: u32) -> usize {
    (0..bits).fold(0, |acc, i| acc | ((x >> i) & 1) << (bits - 1 - i))
}

impl TrafficPattern {
    pub fn new(kind: TrafficKind, topo: &Topology, seed: u64) -> Result<Self, TrafficError> {
        let e = topo.total_endpoints();
        if e < 2 {
            return Err(TrafficError::PatternInfeasible("fewer than two endpoints".into()));
        }
        let router_of: Vec<usize> = (0..e).map(|x| topo.router_of(x)).collect();
        let map = match kind {
            TrafficKind::Uniform => None,
            TrafficKind::BitShuffle | TrafficKind::BitReverse => {
                let bits = usize::BITS - 1 - e.leading_zeros();
                let f = if kind == TrafficKind::BitShuffle { bit_shuffle } else { bit_reverse };
                Some((0..e).map(|x| (x < 1 << bits).then(|| f(x, bits))).collect())
            }
            TrafficKind::RandomRouterPermutation => Some(router_permutation(topo, seed)),
            TrafficKind::AdversarialSupernode => Some(adversarial(topo)?),
        };
        Ok(TrafficPattern { kind, total_endpoints: e, map, router_of })
    }

    /// Fixed destination of `src`, if the pattern is deterministic.
    pub fn fixed_destination(&self, src: usize) -> Option<Option<usize>> {
        self.map.as_ref().map(|m| m[src])
    }

    pub fn is_active(&self, src: usize) -> bool {
        self.map.as_ref().map_or(true, |m| m[src].is_some())
    }

    pub fn active_endpoints(&self) -> usize {
        (0..self.total_endpoints).filter(|&s| self.is_active(s)).count()
    }

    /// Draws a destination; uniform traffic avoids the source's own router.
    pub fn destination<R: Rng>(&self, src: usize, rng: &mut R) -> Option<usize> {
        match &self.map {
            Some(m) => m[src],
            None => loop {
                let d = rng.gen_range(0..self.total_endpoints);
                if self.router_of[d] != self.router_of[src] {
                    return Some(d);
                }
            },
        }
    }

    /// Mean router hop count over the pattern's source/destination pairs.
    pub fn mean_router_distance(&self, topo: &Topology, dist: &[u8]) -> f64 {
        let n = topo.routers();
        match &self.map {
            Some(m) => {
                let (sum, cnt) = m
                    .iter()
                    .enumerate()
                    .filter_map(|(s, d)| d.map(|d| dist[self.router_of[s] * n + self.router_of[d]] as f64))
                    .fold((0.0, 0usize), |(a, c), x| (a + x, c + 1));
                sum / cnt.max(1) as f64
            }
            None => {
                let e = self.total_endpoints as f64;
                let mut sum = 0.0;
                let mut weight = 0.0;
                for r in 0..n {
                    let er = topo.endpoints[r] as f64;
                    if er == 0.0 {
                        continue;
                    }
                    let others = e - er;
                    for t in 0..n {
                        if t != r {
                            sum += er * topo.endpoints[t] as f64 / others * dist[r * n + t] as f64;
                        }
                    }
                    weight += er;
                }
                sum / weight
            }
        }
    }
}

/// Endpoint `i` of router `r` sends to endpoint `i` of `tau(r)`, with `tau`
/// a seeded fixed-point-free permutation of the routers that have endpoints.
fn router_permutation(topo: &Topology, seed: u64) -> Vec<Option<usize>> {
    let hosts: Vec<usize> = (0..topo.routers()).filter(|&r| topo.endpoints[r] > 0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut image = hosts.clone();
    image.shuffle(&mut rng);
    let k = image.len();
    for i in 0..k {
        if image[i] == hosts[i] && k > 1 {
            image.swap(i, (i + 1) % k);
        }
    }
    let mut map = vec![None; topo.total_endpoints()];
    for (&r, &t) in hosts.iter().zip(&image) {
        for i in 0..topo.endpoints[r].min(topo.endpoints[t]) {
            map[topo.first_endpoint(r) + i] = Some(topo.first_endpoint(t) + i);
        }
    }
    map
}

/// Largest number of inter-group hops over the minimal paths from `src`.
fn max_global_hops(topo: &Topology, groups: &[usize], src: usize) -> Vec<usize> {
    let g = &topo.graph;
    let dist = g.bfs(src);
    let mut order: Vec<usize> = (0..g.n()).filter(|&v| dist[v] != usize::MAX).collect();
    order.sort_by_key(|&v| dist[v]);
    let mut best = vec![0usize; g.n()];
    for &v in &order {
        for &u in g.neighbors(v) {
            if dist[u] != usize::MAX && dist[u] + 1 == dist[v] {
                best[v] = best[v].max(best[u] + usize::from(groups[u] != groups[v]));
            }
        }
    }
    best
}

/// Groups are paired with the farthest unpaired group (with an odd group
/// count the last one stays silent); every router of a
/// group sends to a distinct router of its partner group, chosen by a
/// maximum-weight assignment on minimal path length, then on inter-group
/// hops along it.
fn adversarial(topo: &Topology) -> Result<Vec<Option<usize>>, TrafficError> {
    let groups = topo
        .groups
        .as_ref()
        .ok_or_else(|| TrafficError::PatternInfeasible(format!("{} has no supernode or group structure", topo.name)))?;
    let k = groups.iter().copied().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(TrafficError::PatternInfeasible("need at least two groups".into()));
    }
    let mut members = vec![Vec::new(); k];
    for (r, &g) in groups.iter().enumerate() {
        members[g].push(r);
    }
    let n = topo.routers();
    let dist = topo.distance_matrix();
    let mut group_dist = vec![vec![usize::MAX; k]; k];
    for u in 0..n {
        for v in 0..n {
            let (a, b) = (groups[u], groups[v]);
            if a != b {
                group_dist[a][b] = group_dist[a][b].min(dist[u * n + v] as usize);
            }
        }
    }
    let mut partner = vec![usize::MAX; k];
    for a in 0..k {
        if partner[a] != usize::MAX {
            continue;
        }
        let pick = (0..k)
            .filter(|&b| b != a && partner[b] == usize::MAX)
            .max_by_key(|&b| (group_dist[a][b], std::cmp::Reverse(b)));
        if let Some(b) = pick {
            partner[a] = b;
            partner[b] = a;
        }
    }
    let mut map = vec![None; topo.total_endpoints()];
    for a in 0..k {
        let b = partner[a];
        if b == usize::MAX {
            continue;
        }
        let (src, dst) = (&members[a], &members[b]);
        // Square weight matrix; padding rows or columns score zero.
        let m = src.len().max(dst.len());
        let mut weights = Matrix::new(m, m, 0i64);
        for (i, &r) in src.iter().enumerate() {
            let gh = max_global_hops(topo, groups, r);
            for (j, &t) in dst.iter().enumerate() {
                weights[(i, j)] = 1 + dist[r * n + t] as i64 * (n as i64 + 1) + gh[t] as i64;
            }
        }
        let (_, assignment) = kuhn_munkres(&weights);
        for (i, &r) in src.iter().enumerate() {
            let Some(&t) = dst.get(assignment[i]) else { continue };
            for e in 0..topo.endpoints[r].min(topo.endpoints[t]) {
                map[topo.first_endpoint(r) + e] = Some(topo.first_endpoint(t) + e);
            }
        }
    }
    Ok(map)
}
