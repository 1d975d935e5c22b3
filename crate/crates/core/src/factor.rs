//! Factor graphs for the star product: the Erdős–Rényi polarity graph used as
//! structure graph, and supernode graphs carrying the bijection `f` that the
//! product applies along structure edges.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::galois::{Field, FieldElement, FieldError};
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FactorError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("InfeasibleDegree: no Inductive-Quad graph of degree {0} exists (degree must be 0 or 3 mod 4)")]
    InfeasibleDegree(usize),
    #[error("InfeasibleOrder: Paley graphs need a prime power order congruent to 1 mod 4, got {0}")]
    InfeasibleOrder(u32),
    #[error("InvalidOrder: complete supernode needs at least one vertex")]
    EmptyComplete,
    #[error("NotInvolution: f(f(x)) != x for x = {0}")]
    NotInvolution(usize),
    #[error("NotBijection: the supernode map is not a permutation")]
    NotBijection,
    #[error("SearchTooLarge: exhaustive search is limited to degree <= 2, got {0}")]
    SearchTooLarge(usize),
}

/// A point of the projective plane over GF(q) in left-normalised form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProjectivePoint(pub [FieldElement; 3]);

impl ProjectivePoint {
    /// Scales `v` so that its leftmost nonzero coordinate is one.
    pub fn normalize(field: &Field, v: [FieldElement; 3]) -> Option<Self> {
        let lead = v.iter().copied().find(|c| !c.is_zero())?;
        let inv = field.inv(lead).ok()?;
        Some(ProjectivePoint(v.map(|c| field.mul(c, inv))))
    }

    pub fn dot(&self, field: &Field, other: &ProjectivePoint) -> FieldElement {
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(FieldElement::ZERO, |acc, (&a, &b)| field.add(acc, field.mul(a, b)))
    }
}

impl fmt::Display for ProjectivePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.0[0], self.0[1], self.0[2])
    }
}

/// The polarity graph ER_q together with its projective points.
#[derive(Debug, Clone)]
pub struct ErGraph {
    pub q: u32,
    pub graph: Graph,
    pub points: Vec<ProjectivePoint>,
}

impl ErGraph {
    /// Self-orthogonal points, i.e. the vertices carrying a self-loop.
    pub fn quadrics(&self) -> Vec<usize> {
        self.graph.self_loop_vertices().collect()
    }

    pub fn is_quadric(&self, v: usize) -> bool {
        self.graph.has_self_loop(v)
    }
}

/// Builds ER_q: left-normalised points of PG(2, q) in lexicographic order of
/// their coordinate encodings, with `v ~ w` iff `v · w = 0`.
pub fn build_er(q: u32) -> Result<ErGraph, FactorError> {
    let field = Field::new(q)?;
    let mut points = Vec::with_capacity((q * q + q + 1) as usize);
    for x in field.elements() {
        for y in field.elements() {
            for z in field.elements() {
                let v = [x, y, z];
                if let Some(p) = ProjectivePoint::normalize(&field, v) {
                    if p.0 == v {
                        points.push(p);
                    }
                }
            }
        }
    }
    points.sort();

    let n = points.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i..n {
            if points[i].dot(&field, &points[j]).is_zero() {
                edges.push((i, j));
            }
        }
    }
    let labels = points.iter().map(ToString::to_string).collect();
    let graph = Graph::from_edges(n, edges).with_labels(labels);
    Ok(ErGraph { q, graph, points })
}

/// Which supernode family a [`SupernodeGraph`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SupernodeKind {
    InductiveQuad { degree: usize },
    Paley { order: u32 },
    Complete { order: usize },
}

impl SupernodeKind {
    pub fn build(self) -> Result<SupernodeGraph, FactorError> {
        match self {
            SupernodeKind::InductiveQuad { degree } => build_inductive_quad(degree),
            SupernodeKind::Paley { order } => build_paley(order),
            SupernodeKind::Complete { order } => build_complete(order),
        }
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            SupernodeKind::InductiveQuad { .. } => "iq",
            SupernodeKind::Paley { .. } => "paley",
            SupernodeKind::Complete { .. } => "complete",
        }
    }
}

impl fmt::Display for SupernodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SupernodeKind::InductiveQuad { degree } => write!(f, "IQ({degree})"),
            SupernodeKind::Paley { order } => write!(f, "Paley({order})"),
            SupernodeKind::Complete { order } => write!(f, "K({order})"),
        }
    }
}

/// The property a supernode's bijection certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SupernodeProperty {
    RStar,
    R1,
    Both,
}

impl SupernodeProperty {
    pub fn has_r_star(self) -> bool {
        matches!(self, SupernodeProperty::RStar | SupernodeProperty::Both)
    }

    pub fn has_r1(self) -> bool {
        matches!(self, SupernodeProperty::R1 | SupernodeProperty::Both)
    }
}

/// A supernode graph with its distinguished bijection `f`, stored as a
/// permutation array.
#[derive(Debug, Clone)]
pub struct SupernodeGraph {
    pub graph: Graph,
    pub f: Vec<usize>,
    pub property: SupernodeProperty,
    pub kind: SupernodeKind,
}

impl SupernodeGraph {
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn degree(&self) -> usize {
        self.graph.max_degree()
    }

    pub fn is_involution(&self) -> bool {
        (0..self.n()).all(|x| self.f[self.f[x]] == x)
    }
}

// Vertex offsets of one 8-vertex G'_3 block: x, f(x), y, f(y), z, f(z), w, f(w).
const X: usize = 0;
const FX: usize = 1;
const Y: usize = 2;
const FY: usize = 3;
const Z: usize = 4;
const FZ: usize = 5;
const W: usize = 6;
const FW: usize = 7;

const G3_EDGES: [(usize, usize); 12] = [
    (FY, Z),
    (FY, FZ),
    (FZ, W),
    (FZ, FW),
    (FW, Y),
    (FW, FY),
    (X, Y),
    (X, Z),
    (X, W),
    (FX, Y),
    (FX, Z),
    (FX, W),
];

/// Inductive-Quad supernode of degree `d'` on `2d' + 2` vertices.
///
/// Vertices come in consecutive `f`-pairs `(2i, 2i + 1)`. Starting from
/// G'_0 (one pair, no edges) or G'_3, each step appends a G'_3 block and joins
/// its `{x, f(x), z, f(z)}` to every even vertex and `{y, f(y), w, f(w)}` to
/// every odd vertex of the previous graph.
pub fn build_inductive_quad(d_prime: usize) -> Result<SupernodeGraph, FactorError> {
    let (mut n, mut edges, steps) = match d_prime % 4 {
        0 => (2usize, Vec::new(), d_prime / 4),
        3 => (8usize, G3_EDGES.to_vec(), (d_prime - 3) / 4),
        _ => return Err(FactorError::InfeasibleDegree(d_prime)),
    };
    for _ in 0..steps {
        let base = n;
        edges.extend(G3_EDGES.iter().map(|&(a, b)| (base + a, base + b)));
        for old in 0..n {
            let joined: [usize; 4] = if old % 2 == 0 { [X, FX, Z, FZ] } else { [Y, FY, W, FW] };
            edges.extend(joined.iter().map(|&off| (old, base + off)));
        }
        n += 8;
    }
    let f = (0..n).map(|v| v ^ 1).collect();
    Ok(SupernodeGraph {
        graph: Graph::from_edges(n, edges),
        f,
        property: SupernodeProperty::RStar,
        kind: SupernodeKind::InductiveQuad { degree: d_prime },
    })
}

/// Paley graph on GF(q'), `f(α) = ζα` for the least primitive root `ζ`.
pub fn build_paley(order: u32) -> Result<SupernodeGraph, FactorError> {
    if order % 4 != 1 {
        return Err(FactorError::InfeasibleOrder(order));
    }
    let field = Field::new(order).map_err(|_| FactorError::InfeasibleOrder(order))?;
    let mut edges = Vec::new();
    for a in field.elements() {
        for b in field.elements().filter(|&b| b > a) {
            if field.is_square(field.sub(b, a)) {
                edges.push((a.0 as usize, b.0 as usize));
            }
        }
    }
    let zeta = field.primitive_root();
    let f = field.elements().map(|a| field.mul(zeta, a).0 as usize).collect();
    let labels = field.elements().map(|a| a.to_string()).collect();
    Ok(SupernodeGraph {
        graph: Graph::from_edges(order as usize, edges).with_labels(labels),
        f,
        property: SupernodeProperty::R1,
        kind: SupernodeKind::Paley { order },
    })
}

/// Complete graph `K_n` with the identity bijection.
pub fn build_complete(order: usize) -> Result<SupernodeGraph, FactorError> {
    if order == 0 {
        return Err(FactorError::EmptyComplete);
    }
    let edges = (0..order).flat_map(|u| (u + 1..order).map(move |v| (u, v)));
    Ok(SupernodeGraph {
        graph: Graph::from_edges(order, edges),
        f: (0..order).collect(),
        property: SupernodeProperty::Both,
        kind: SupernodeKind::Complete { order },
    })
}

/// Fixed-width bitset rows for boolean matrix products.
struct BitMatrix {
    words: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        BitMatrix { words, bits: vec![0; n * words] }
    }

    fn set(&mut self, r: usize, c: usize) {
        self.bits[r * self.words + c / 64] |= 1 << (c % 64);
    }

    fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.words + c / 64] >> (c % 64) & 1 == 1
    }

    fn row(&self, r: usize) -> &[u64] {
        &self.bits[r * self.words..(r + 1) * self.words]
    }
}

/// True iff every ordered pair `(x, y)`, including `x = y`, is joined by a
/// walk of exactly `d` steps, a self-loop counting as one step.
pub fn check_property_r(g: &Graph, d: usize) -> bool {
    let n = g.n();
    if n == 0 {
        return true;
    }
    if d == 0 {
        return n == 1;
    }
    let mut adj = BitMatrix::new(n);
    for v in 0..n {
        for &w in g.neighbors(v) {
            adj.set(v, w);
        }
        if g.has_self_loop(v) {
            adj.set(v, v);
        }
    }
    let mut reach = BitMatrix { words: adj.words, bits: adj.bits.clone() };
    for _ in 1..d {
        let mut next = BitMatrix::new(n);
        for x in 0..n {
            let row = &mut next.bits[x * adj.words..(x + 1) * adj.words];
            for y in (0..n).filter(|&y| reach.get(x, y)) {
                for (dst, src) in row.iter_mut().zip(adj.row(y)) {
                    *dst |= *src;
                }
            }
        }
        reach = next;
    }
    (0..n).all(|x| (0..n).all(|y| reach.get(x, y)))
}

fn validate_permutation(f: &[usize]) -> Result<(), FactorError> {
    let mut seen = vec![false; f.len()];
    for &y in f {
        if y >= f.len() || std::mem::replace(&mut seen[y], true) {
            return Err(FactorError::NotBijection);
        }
    }
    Ok(())
}

/// R* check: for every `x'`, `{x'} ∪ {f(x')} ∪ f(N(x')) ∪ N(f(x'))` is the
/// whole vertex set. Requires `f` to be an involution.
pub fn check_property_r_star(s: &SupernodeGraph) -> Result<bool, FactorError> {
    validate_permutation(&s.f)?;
    if let Some(x) = (0..s.n()).find(|&x| s.f[s.f[x]] != x) {
        return Err(FactorError::NotInvolution(x));
    }
    let g = &s.graph;
    let f = &s.f;
    let mut covered = vec![false; s.n()];
    for x in 0..s.n() {
        covered.iter_mut().for_each(|c| *c = false);
        covered[x] = true;
        covered[f[x]] = true;
        for &y in g.neighbors(x) {
            covered[f[y]] = true;
        }
        for &y in g.neighbors(f[x]) {
            covered[y] = true;
        }
        if covered.iter().any(|&c| !c) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// True iff the four R* cover sets are pairwise disjoint for every vertex,
/// which is exactly the case of a supernode meeting the `2d' + 2` order bound.
pub fn r_star_cover_is_tight(s: &SupernodeGraph) -> bool {
    let g = &s.graph;
    let f = &s.f;
    let mut hits = vec![0u32; s.n()];
    (0..s.n()).all(|x| {
        hits.iter_mut().for_each(|h| *h = 0);
        hits[x] += 1;
        hits[f[x]] += 1;
        for &y in g.neighbors(x) {
            hits[f[y]] += 1;
        }
        for &y in g.neighbors(f[x]) {
            hits[y] += 1;
        }
        hits.iter().all(|&h| h == 1)
    })
}

/// R1 check: `f²` is an automorphism and `E ∪ f(E)` is the complete edge set.
pub fn check_property_r1(s: &SupernodeGraph) -> Result<bool, FactorError> {
    validate_permutation(&s.f)?;
    let g = &s.graph;
    let f = &s.f;
    let f2_is_automorphism = g.edges().all(|(u, v)| g.has_edge(f[f[u]], f[f[v]]));
    if !f2_is_automorphism {
        return Ok(false);
    }
    let n = s.n();
    let mut inv = vec![0; n];
    for (x, &y) in f.iter().enumerate() {
        inv[y] = x;
    }
    let covers = (0..n).all(|u| (u + 1..n).all(|v| g.has_edge(u, v) || g.has_edge(inv[u], inv[v])));
    Ok(covers)
}

fn involutions(n: usize) -> Vec<Vec<usize>> {
    fn extend(f: &mut Vec<Option<usize>>, out: &mut Vec<Vec<usize>>) {
        let Some(first) = f.iter().position(Option::is_none) else {
            out.push(f.iter().map(|x| x.unwrap()).collect());
            return;
        };
        f[first] = Some(first);
        extend(f, out);
        for partner in first + 1..f.len() {
            if f[partner].is_none() {
                f[first] = Some(partner);
                f[partner] = Some(first);
                extend(f, out);
                f[partner] = None;
            }
        }
        f[first] = None;
    }
    let mut out = Vec::new();
    extend(&mut vec![None; n], &mut out);
    out
}

/// Searches every graph on `2d' + 2` vertices with maximum degree `<= d'`,
/// under every involution, for one satisfying R*. Feasible for `d' <= 2`.
pub fn exhaustive_r_star_search(d_prime: usize) -> Result<Option<SupernodeGraph>, FactorError> {
    if d_prime > 2 {
        return Err(FactorError::SearchTooLarge(d_prime));
    }
    let n = 2 * d_prime + 2;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let maps = involutions(n);
    for mask in 0u32..(1 << pairs.len()) {
        let mut degree = vec![0usize; n];
        let edges: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        if degree.iter().any(|&d| d > d_prime) {
            continue;
        }
        let graph = Graph::from_edges(n, edges);
        for f in &maps {
            let candidate = SupernodeGraph {
                graph: graph.clone(),
                f: f.clone(),
                property: SupernodeProperty::RStar,
                kind: SupernodeKind::InductiveQuad { degree: d_prime },
            };
            if check_property_r_star(&candidate)? {
                return Ok(Some(candidate));
            }
        }
    }
    Ok(None)
}
