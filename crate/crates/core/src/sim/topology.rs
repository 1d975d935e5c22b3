//! Router-level topologies with attached endpoints.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factor::SupernodeKind;
use crate::graph::Graph;
use crate::star::{build_polarstar, StarError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("InvalidParameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Star(#[from] StarError),
}

/// A network of routers; endpoints are numbered contiguously router by router.
#[derive(Debug, Clone)]
pub struct Topology {
    pub name: String,
    pub graph: Graph,
    pub endpoints: Vec<usize>,
    /// Supernode or group of each router, when the topology is hierarchical.
    pub groups: Option<Vec<usize>>,
    endpoint_offset: Vec<usize>,
}

impl Topology {
    pub fn new(name: impl Into<String>, graph: Graph, endpoints: Vec<usize>, groups: Option<Vec<usize>>) -> Self {
        assert_eq!(graph.n(), endpoints.len());
        let mut endpoint_offset = Vec::with_capacity(endpoints.len() + 1);
        let mut acc = 0;
        endpoint_offset.push(0);
        for &e in &endpoints {
            acc += e;
            endpoint_offset.push(acc);
        }
        Topology { name: name.into(), graph, endpoints, groups, endpoint_offset }
    }

    pub fn routers(&self) -> usize {
        self.graph.n()
    }

    pub fn total_endpoints(&self) -> usize {
        *self.endpoint_offset.last().unwrap()
    }

    pub fn first_endpoint(&self, router: usize) -> usize {
        self.endpoint_offset[router]
    }

    /// Router an endpoint attaches to.
    pub fn router_of(&self, endpoint: usize) -> usize {
        self.endpoint_offset.partition_point(|&o| o <= endpoint) - 1
    }

    /// Network radix: the largest router-to-router degree.
    pub fn network_radix(&self) -> usize {
        self.graph.max_degree()
    }

    /// All-pairs router hop counts, row-major; `u8::MAX` when unreachable.
    pub fn distance_matrix(&self) -> Vec<u8> {
        let n = self.routers();
        let rows: Vec<Vec<u8>> = (0..n)
            .into_par_iter()
            .map(|s| self.graph.bfs(s).into_iter().map(|d| d.min(u8::MAX as usize) as u8).collect())
            .collect();
        rows.concat()
    }
}

/// PolarStar with `endpoints` per router; groups are supernodes.
pub fn polarstar_topology(q: u32, kind: SupernodeKind, endpoints: usize) -> Result<Topology, TopologyError> {
    let ps = build_polarstar(q, kind)?;
    let groups = (0..ps.graph.n()).map(|v| ps.supernode_of(v)).collect();
    let n = ps.graph.n();
    Ok(Topology::new(format!("polarstar-q{q}-{}", kind.short_name()), ps.graph, vec![endpoints; n], Some(groups)))
}

/// Dragonfly with `a` routers per group, `h` global links per router and
/// `a*h + 1` fully connected groups, wired in consecutive order.
pub fn build_dragonfly(a: usize, h: usize, p: usize) -> Result<Topology, TopologyError> {
    if a == 0 || h == 0 {
        return Err(TopologyError::InvalidParameters(format!("dragonfly needs a, h >= 1 (a={a}, h={h})")));
    }
    let g = a * h + 1;
    let n = a * g;
    let mut edges = Vec::new();
    for grp in 0..g {
        for i in 0..a {
            for j in i + 1..a {
                edges.push((grp * a + i, grp * a + j));
            }
        }
        for port in 0..a * h {
            let target = if port < grp { port } else { port + 1 };
            if target < grp {
                continue;
            }
            let back = if grp < target { grp } else { grp - 1 };
            edges.push((grp * a + port / h, target * a + back / h));
        }
    }
    let groups = (0..n).map(|r| r / a).collect();
    Ok(Topology::new(format!("dragonfly-a{a}-h{h}"), Graph::from_edges(n, edges), vec![p; n], Some(groups)))
}

/// `S^L` HyperX: routers are `L`-digit base-`S` words, adjacent when they
/// differ in exactly one digit.
pub fn build_hyperx(s: usize, l: usize, p: usize) -> Result<Topology, TopologyError> {
    if s < 2 || l == 0 {
        return Err(TopologyError::InvalidParameters(format!("hyperx needs S >= 2, L >= 1 (S={s}, L={l})")));
    }
    let n = s
        .checked_pow(l as u32)
        .filter(|&n| n <= 1 << 20)
        .ok_or_else(|| TopologyError::InvalidParameters(format!("hyperx S={s} L={l} too large")))?;
    let mut edges = Vec::new();
    for r in 0..n {
        let mut stride = 1;
        for _ in 0..l {
            let digit = r / stride % s;
            for other in digit + 1..s {
                edges.push((r, r + (other - digit) * stride));
            }
            stride *= s;
        }
    }
    Ok(Topology::new(format!("hyperx-s{s}-l{l}"), Graph::from_edges(n, edges), vec![p; n], None))
}

/// `p`-ary `levels`-tree: `levels * p^(levels-1)` switches of radix `2p`,
/// with `p` endpoints on every leaf switch.
pub fn build_fattree(levels: usize, p: usize) -> Result<Topology, TopologyError> {
    if levels < 2 || p < 2 {
        return Err(TopologyError::InvalidParameters(format!("fat tree needs levels >= 2, p >= 2 (levels={levels}, p={p})")));
    }
    let per_level = p
        .checked_pow(levels as u32 - 1)
        .filter(|&w| w * levels <= 1 << 20)
        .ok_or_else(|| TopologyError::InvalidParameters(format!("fat tree levels={levels} p={p} too large")))?;
    let id = |level: usize, word: usize| level * per_level + word;
    let mut edges = Vec::new();
    for level in 0..levels - 1 {
        let stride = p.pow(level as u32);
        for word in 0..per_level {
            let digit = word / stride % p;
            for up in 0..p {
                edges.push((id(level, word), id(level + 1, word - digit * stride + up * stride)));
            }
        }
    }
    let n = levels * per_level;
    let endpoints = (0..n).map(|r| if r < per_level { p } else { 0 }).collect();
    Ok(Topology::new(format!("fattree-n{levels}-p{p}"), Graph::from_edges(n, edges), endpoints, None))
}

/// Serializable topology description used by campaign files and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    Polarstar { q: u32, supernode: SupernodeKind, endpoints: usize },
    Dragonfly { a: usize, h: usize, p: usize },
    Hyperx { s: usize, l: usize, p: usize },
    Fattree { levels: usize, p: usize },
}

impl TopologySpec {
    /// Largest PolarStar of router radix `radix`, one third of ports to endpoints.
    pub fn polarstar_for_radix(radix: usize) -> Result<Self, TopologyError> {
        let best = crate::design::max_order(radix)
            .map_err(|e| TopologyError::InvalidParameters(e.to_string()))?
            .best;
        Ok(TopologySpec::Polarstar { q: best.q, supernode: best.supernode, endpoints: radix / 3 })
    }

    /// Balanced dragonfly (`a = 2h`, `p = h`) with network radix at most `radix`.
    pub fn dragonfly_for_radix(radix: usize) -> Self {
        let h = ((radix + 1) / 3).max(1);
        TopologySpec::Dragonfly { a: 2 * h, h, p: h }
    }

    /// 3-D HyperX with network radix at most `radix`.
    pub fn hyperx_for_radix(radix: usize) -> Self {
        let s = radix / 3 + 1;
        TopologySpec::Hyperx { s, l: 3, p: s - 1 }
    }

    /// 3-level fat tree of switch radix `radix`.
    pub fn fattree_for_radix(radix: usize) -> Self {
        TopologySpec::Fattree { levels: 3, p: radix / 2 }
    }

    pub fn build(&self) -> Result<Topology, TopologyError> {
        match *self {
            TopologySpec::Polarstar { q, supernode, endpoints } => polarstar_topology(q, supernode, endpoints),
            TopologySpec::Dragonfly { a, h, p } => build_dragonfly(a, h, p),
            TopologySpec::Hyperx { s, l, p } => build_hyperx(s, l, p),
            TopologySpec::Fattree { levels, p } => build_fattree(levels, p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_scales() {
        let df = build_dragonfly(12, 6, 6).unwrap();
        assert_eq!(df.routers(), 876);
        assert_eq!(df.graph.regular_degree(), Some(11 + 6));
        assert_eq!(df.total_endpoints(), 876 * 6);
        let hx = build_hyperx(10, 3, 5).unwrap();
        assert_eq!(hx.routers(), 1000);
        assert_eq!(hx.network_radix(), 27);
        let ft = build_fattree(3, 18).unwrap();
        assert_eq!(ft.routers(), 972);
        assert_eq!(ft.total_endpoints(), 18 * 18 * 18);
    }

    #[test]
    fn dragonfly_groups_fully_connected_once() {
        let df = build_dragonfly(4, 2, 2).unwrap();
        let groups = df.groups.as_ref().unwrap();
        let g = 9;
        let mut count = vec![vec![0; g]; g];
        for (u, v) in df.graph.edges() {
            if groups[u] != groups[v] {
                count[groups[u]][groups[v]] += 1;
                count[groups[v]][groups[u]] += 1;
            }
        }
        for a in 0..g {
            for b in 0..g {
                assert_eq!(count[a][b], usize::from(a != b));
            }
        }
        assert_eq!(crate::star::parallel_diameter(&df.graph), Some(3));
    }

    #[test]
    fn fattree_switch_radix_and_diameter() {
        let ft = build_fattree(3, 4).unwrap();
        assert_eq!(ft.routers(), 48);
        for r in 0..48 {
            let ports = ft.graph.degree(r) + ft.endpoints[r];
            assert_eq!(ports, if r / 16 == 2 { 4 } else { 8 });
        }
        assert_eq!(crate::star::parallel_diameter(&ft.graph), Some(4));
    }

    #[test]
    fn hyperx_is_hamming_graph() {
        let hx = build_hyperx(3, 3, 1).unwrap();
        for (u, v) in hx.graph.edges() {
            let diff = (0..3).filter(|i| u / 3usize.pow(*i) % 3 != v / 3usize.pow(*i) % 3).count();
            assert_eq!(diff, 1);
        }
        assert_eq!(hx.graph.regular_degree(), Some(6));
    }

    #[test]
    fn endpoint_addressing() {
        let t = build_fattree(2, 3).unwrap();
        assert_eq!(t.total_endpoints(), 9);
        assert_eq!(t.router_of(0), 0);
        assert_eq!(t.router_of(8), 2);
        assert_eq!(t.first_endpoint(1), 3);
    }

    #[test]
    fn radix_helpers_stay_within_radix() {
        for radix in [12, 15, 17, 24] {
            for spec in [
                TopologySpec::polarstar_for_radix(radix).unwrap(),
                TopologySpec::dragonfly_for_radix(radix),
                TopologySpec::hyperx_for_radix(radix),
            ] {
                let t = spec.build().unwrap();
                assert!(t.network_radix() <= radix, "{spec:?}");
                assert!(t.endpoints[0] <= radix.div_ceil(3));
            }
        }
        assert_eq!(TopologySpec::dragonfly_for_radix(17), TopologySpec::Dragonfly { a: 12, h: 6, p: 6 });
        assert_eq!(TopologySpec::fattree_for_radix(36), TopologySpec::Fattree { levels: 3, p: 18 });
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_dragonfly(0, 1, 1).is_err());
        assert!(build_hyperx(1, 3, 1).is_err());
        assert!(build_fattree(1, 4).is_err());
    }
}
