//! Star product of a structure graph with a supernode graph, and the
//! PolarStar instances built from ER_q structure graphs.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::factor::{build_er, ErGraph, FactorError, SupernodeGraph, SupernodeKind};
use crate::graph::{Graph, GraphEnvelope};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StarError {
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error("IncompleteAssignment: structure edge ({0}, {1}) has no bijection in either orientation")]
    IncompleteAssignment(usize, usize),
    #[error("IncompleteAssignment: structure edge ({0}, {1}) is assigned in both orientations")]
    DoubleAssignment(usize, usize),
    #[error("IncompleteAssignment: arc ({0}, {1}) is not an edge of the structure graph")]
    UnknownArc(usize, usize),
    #[error("BijectionArityMismatch: map {index} has length {len}, supernode has {expected} vertices")]
    BijectionArityMismatch { index: usize, len: usize, expected: usize },
    #[error("BijectionArityMismatch: map {0} is not a permutation")]
    NotPermutation(usize),
    #[error("DiameterViolation: product has diameter {found:?}, expected at most 3")]
    DiameterViolation { found: Option<usize> },
    #[error("DegreeViolation: maximum degree {found} exceeds the bound {bound}")]
    DegreeViolation { found: usize, bound: usize },
}

/// What a structure self-loop at `x` contributes inside supernode `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SelfLoopPolicy {
    /// Add `(x, x')–(x, f(x'))` using the loop map, skipping fixed points.
    ApplyF,
    /// Ignore structure self-loops.
    Drop,
}

/// Bijections `f_(x,y)` for one orientation of every structure edge.
#[derive(Debug, Clone)]
pub struct BijectionAssignment {
    maps: Vec<Vec<usize>>,
    arcs: BTreeMap<(usize, usize), usize>,
    loop_map: Option<usize>,
    pub self_loop_policy: SelfLoopPolicy,
}

impl BijectionAssignment {
    pub fn new(self_loop_policy: SelfLoopPolicy) -> Self {
        BijectionAssignment { maps: Vec::new(), arcs: BTreeMap::new(), loop_map: None, self_loop_policy }
    }

    /// Registers a permutation and returns its handle.
    pub fn add_map(&mut self, f: Vec<usize>) -> usize {
        self.maps.push(f);
        self.maps.len() - 1
    }

    /// Assigns map `handle` to the arc `source -> target`.
    pub fn assign(&mut self, source: usize, target: usize, handle: usize) {
        self.arcs.insert((source, target), handle);
    }

    pub fn set_loop_map(&mut self, handle: usize) {
        self.loop_map = Some(handle);
    }

    /// One map `f` on every structure edge, oriented from the lower to the
    /// higher vertex index, and also used for self-loops.
    pub fn uniform(structure: &Graph, f: Vec<usize>, self_loop_policy: SelfLoopPolicy) -> Self {
        let mut a = BijectionAssignment::new(self_loop_policy);
        let h = a.add_map(f);
        for (u, v) in structure.edges() {
            a.assign(u, v, h);
        }
        a.set_loop_map(h);
        a
    }
}

/// Output of [`star_product`]: the product graph and construction metadata.
#[derive(Debug, Clone)]
pub struct StarProduct {
    pub graph: Graph,
    pub supernode_order: usize,
    /// Candidate edges that coincided with an already present edge.
    pub duplicate_edges: usize,
}

/// `G * G'`: vertex `(x, x')` is numbered `x * |V(G')| + x'`.
pub fn star_product(
    structure: &Graph,
    supernode: &Graph,
    assign: &BijectionAssignment,
) -> Result<StarProduct, StarError> {
    let m = supernode.n();
    for (index, f) in assign.maps.iter().enumerate() {
        if f.len() != m {
            return Err(StarError::BijectionArityMismatch { index, len: f.len(), expected: m });
        }
        let mut seen = vec![false; m];
        if f.iter().any(|&y| y >= m || std::mem::replace(&mut seen[y], true)) {
            return Err(StarError::NotPermutation(index));
        }
    }
    for &(u, v) in assign.arcs.keys() {
        if u == v || !structure.has_edge(u, v) {
            return Err(StarError::UnknownArc(u, v));
        }
    }
    for (u, v) in structure.edges() {
        match (assign.arcs.contains_key(&(u, v)), assign.arcs.contains_key(&(v, u))) {
            (false, false) => return Err(StarError::IncompleteAssignment(u, v)),
            (true, true) => return Err(StarError::DoubleAssignment(u, v)),
            _ => {}
        }
    }

    let n = structure.n() * m;
    let mut edges = Vec::with_capacity(structure.n() * supernode.edge_count() + structure.edge_count() * m);
    for x in 0..structure.n() {
        edges.extend(supernode.edges().map(|(a, b)| (x * m + a, x * m + b)));
    }
    for (&(x, y), &h) in &assign.arcs {
        let f = &assign.maps[h];
        edges.extend((0..m).map(|a| (x * m + a, y * m + f[a])));
    }
    if assign.self_loop_policy == SelfLoopPolicy::ApplyF {
        if let Some(h) = assign.loop_map {
            let f = &assign.maps[h];
            for x in structure.self_loop_vertices() {
                edges.extend((0..m).filter(|&a| f[a] != a).map(|a| (x * m + a, x * m + f[a])));
            }
        }
    }
    let candidates = edges.len();
    let graph = Graph::from_edges(n, edges);
    // Each loop edge (x,a)-(x,f(a)) is generated from both endpoints.
    let duplicate_edges = candidates - graph.edge_count();
    Ok(StarProduct { graph, supernode_order: m, duplicate_edges })
}

/// A PolarStar network: `ER_q * G'` with its factors kept for analysis.
#[derive(Debug, Clone)]
pub struct PolarStarGraph {
    pub graph: Graph,
    pub q: u32,
    pub structure: ErGraph,
    pub supernode: SupernodeGraph,
    pub self_loop_policy: SelfLoopPolicy,
    /// Product edges lost to coincident candidates beyond the expected
    /// loop-edge double counting.
    pub degree_deficit_edges: usize,
}

impl PolarStarGraph {
    pub fn supernode_order(&self) -> usize {
        self.supernode.n()
    }

    pub fn supernode_of(&self, v: usize) -> usize {
        v / self.supernode.n()
    }

    pub fn local_index(&self, v: usize) -> usize {
        v % self.supernode.n()
    }

    pub fn vertex(&self, structure_vertex: usize, local: usize) -> usize {
        structure_vertex * self.supernode.n() + local
    }

    /// `q + 1 + d'`.
    pub fn radix(&self) -> usize {
        self.q as usize + 1 + self.supernode.degree()
    }

    /// `s<x>_n<x'>` names in vertex order.
    pub fn vertex_names(&self) -> Vec<String> {
        (0..self.graph.n())
            .map(|v| format!("s{}_n{}", self.supernode_of(v), self.local_index(v)))
            .collect()
    }

    pub fn to_envelope(&self) -> GraphEnvelope {
        let mut env = self.graph.clone().with_labels(self.vertex_names()).to_envelope("polarstar");
        env.metadata = serde_json::json!({
            "q": self.q,
            "supernode": self.supernode.kind,
            "supernode_order": self.supernode.n(),
            "supernode_bijection": self.supernode.f,
            "self_loop_policy": self.self_loop_policy,
            "radix": self.radix(),
            "degree_deficit_edges": self.degree_deficit_edges,
        });
        env
    }

    /// Builds a walk of length at most 3 from `u` to `v` following the
    /// diameter argument for R* supernodes: route to `(z, f(x'))` on a
    /// 2-walk `x -> z -> y`, then finish inside or across supernodes.
    /// Returns `None` if the supernode bijection is not an involution.
    pub fn witness_walk(&self, u: usize, v: usize) -> Option<(WitnessCase, Vec<usize>)> {
        if !self.supernode.is_involution() {
            return None;
        }
        let er = &self.structure.graph;
        let f = &self.supernode.f;
        let sg = &self.supernode.graph;
        let (x, xl) = (self.supernode_of(u), self.local_index(u));
        let (y, yl) = (self.supernode_of(v), self.local_index(v));

        let step_targets = |a: usize| -> Vec<usize> {
            let mut t = er.neighbors(a).to_vec();
            if er.has_self_loop(a) {
                t.push(a);
            }
            t
        };
        let two_walk_mid = |a: usize, b: usize| -> Option<usize> {
            step_targets(a).into_iter().find(|&z| er.has_edge(z, b))
        };

        let z = two_walk_mid(x, y)?;
        let zl = f[xl];
        let mid = self.vertex(z, zl);
        if yl == f[zl] {
            return Some((WitnessCase::ImageOfImage, vec![u, mid, v]));
        }
        if sg.has_edge(f[zl], yl) {
            return Some((WitnessCase::NeighborOfImage, vec![u, mid, self.vertex(y, f[zl]), v]));
        }
        if sg.has_edge(zl, f[yl]) {
            return Some((WitnessCase::ImageOfNeighbor, vec![u, mid, self.vertex(z, f[yl]), v]));
        }
        if yl == zl {
            // Three-step structure walk x -> a -> b -> y.
            let (a, b) = step_targets(y).into_iter().find_map(|b| two_walk_mid(x, b).map(|a| (a, b)))?;
            let walk = vec![u, self.vertex(a, f[xl]), self.vertex(b, xl), v];
            return Some((WitnessCase::LongStructureWalk, walk));
        }
        None
    }
}

/// How [`PolarStarGraph::witness_walk`] reached the target supernode vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WitnessCase {
    /// `y' = f(z')`, two steps.
    ImageOfImage,
    /// `y' ∈ N(f(z'))`, last step inside supernode `y`.
    NeighborOfImage,
    /// `y' ∈ f(N(z'))`, middle step inside supernode `z`.
    ImageOfNeighbor,
    /// `y' = z'`, a three-step structure walk.
    LongStructureWalk,
}

/// Builds `ER_q * G'` without the post-construction diameter check.
pub fn construct_polarstar(q: u32, kind: SupernodeKind) -> Result<PolarStarGraph, StarError> {
    let structure = build_er(q)?;
    let supernode = kind.build()?;
    let policy = match kind {
        SupernodeKind::InductiveQuad { .. } => SelfLoopPolicy::ApplyF,
        SupernodeKind::Paley { .. } | SupernodeKind::Complete { .. } => SelfLoopPolicy::Drop,
    };
    let assign = BijectionAssignment::uniform(&structure.graph, supernode.f.clone(), policy);
    let product = star_product(&structure.graph, &supernode.graph, &assign)?;
    let expected_loop_duplicates = match policy {
        SelfLoopPolicy::ApplyF => {
            structure.graph.self_loop_count() * (0..supernode.n()).filter(|&a| supernode.f[a] != a).count() / 2
        }
        SelfLoopPolicy::Drop => 0,
    };
    Ok(PolarStarGraph {
        graph: product.graph,
        q,
        structure,
        supernode,
        self_loop_policy: policy,
        degree_deficit_edges: product.duplicate_edges.saturating_sub(expected_loop_duplicates),
    })
}

/// Builds `ER_q * G'` and verifies maximum degree `<= q + 1 + d'` and
/// diameter `<= 3` before returning it.
pub fn build_polarstar(q: u32, kind: SupernodeKind) -> Result<PolarStarGraph, StarError> {
    let ps = construct_polarstar(q, kind)?;
    let bound = ps.radix();
    let found = ps.graph.max_degree();
    if found > bound {
        return Err(StarError::DegreeViolation { found, bound });
    }
    let diameter = parallel_diameter(&ps.graph);
    if diameter.map_or(true, |d| d > 3) {
        return Err(StarError::DiameterViolation { found: diameter });
    }
    Ok(ps)
}

/// Exact diameter by BFS from every vertex; `None` if disconnected.
pub fn parallel_diameter(g: &Graph) -> Option<usize> {
    (0..g.n())
        .into_par_iter()
        .map(|v| g.eccentricity(v))
        .try_reduce(|| 0, |a, b| Some(a.max(b)))
}
