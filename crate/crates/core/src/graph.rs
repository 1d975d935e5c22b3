//! Undirected simple graphs with optional self-loops, plus the text formats
//! used to move them in and out of the toolkit.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version stamped into every JSON envelope.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("ParseError: line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("ParseError: {0}")]
    Json(#[from] serde_json::Error),
    #[error("ParseError: unsupported schema version {0}")]
    SchemaVersion(u32),
}

/// Sorted adjacency lists; a self-loop is recorded in `self_loops` and never
/// in the neighbour list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    self_loops: Vec<bool>,
    labels: Option<Vec<String>>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph {
            adjacency: vec![Vec::new(); n],
            self_loops: vec![false; n],
            labels: None,
        }
    }

    /// Builds a graph from an edge iterator. Parallel edges collapse into one
    /// and `(v, v)` records a self-loop.
    pub fn from_edges<I>(n: usize, edges: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Graph::empty(n);
        for (u, v) in edges {
            assert!(u < n && v < n, "edge ({u}, {v}) out of range for n={n}");
            if u == v {
                g.self_loops[u] = true;
            } else {
                g.adjacency[u].push(v);
                g.adjacency[v].push(u);
            }
        }
        g.normalize();
        g
    }

    /// Builds directly from adjacency lists. Lists are symmetrised, sorted and
    /// deduplicated; `v` listed in its own row becomes a self-loop.
    pub fn from_adjacency(adjacency: Vec<Vec<usize>>) -> Self {
        let n = adjacency.len();
        let edges: Vec<(usize, usize)> = adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, row)| row.iter().map(move |&v| (u, v)))
            .collect();
        Graph::from_edges(n, edges)
    }

    fn normalize(&mut self) {
        for row in &mut self.adjacency {
            row.sort_unstable();
            row.dedup();
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.n());
        self.labels = Some(labels);
        self
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    /// Number of non-loop edges.
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn self_loop_count(&self) -> usize {
        self.self_loops.iter().filter(|&&l| l).count()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    /// Degree excluding any self-loop.
    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_self_loop(&self, v: usize) -> bool {
        self.self_loops[v]
    }

    pub fn self_loop_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(|&v| self.self_loops[v])
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        if u == v {
            self.self_loops[u]
        } else {
            self.adjacency[u].binary_search(&v).is_ok()
        }
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n()).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        (0..self.n()).map(|v| self.degree(v)).min().unwrap_or(0)
    }

    /// `Some(d)` when every vertex has degree `d` (self-loops excluded).
    pub fn regular_degree(&self) -> Option<usize> {
        let d = self.degree(0);
        (0..self.n()).all(|v| self.degree(v) == d).then_some(d)
    }

    /// Non-loop edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, row)| row.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    /// Unweighted distances from `src`; `usize::MAX` marks unreachable vertices.
    pub fn bfs(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n()];
        let mut queue = VecDeque::with_capacity(self.n());
        dist[src] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let du = dist[u] + 1;
            for &w in &self.adjacency[u] {
                if dist[w] == usize::MAX {
                    dist[w] = du;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn eccentricity(&self, v: usize) -> Option<usize> {
        let d = self.bfs(v);
        d.iter().copied().try_fold(0, |acc, x| (x != usize::MAX).then(|| acc.max(x)))
    }

    /// Connected-component id per vertex, plus the component count.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut comp = vec![usize::MAX; self.n()];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..self.n() {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &w in &self.adjacency[u] {
                    if comp[w] == usize::MAX {
                        comp[w] = count;
                        stack.push(w);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    pub fn is_connected(&self) -> bool {
        self.n() <= 1 || self.components().1 == 1
    }

    /// Copy without the listed edges (given in either orientation).
    pub fn without_edges(&self, removed: &[(usize, usize)]) -> Graph {
        let mut g = self.clone();
        for &(u, v) in removed {
            if u == v {
                g.self_loops[u] = false;
                continue;
            }
            if let Ok(i) = g.adjacency[u].binary_search(&v) {
                g.adjacency[u].remove(i);
            }
            if let Ok(i) = g.adjacency[v].binary_search(&u) {
                g.adjacency[v].remove(i);
            }
        }
        g
    }

    /// Every edge as a sorted list of `(u, v)` with `u <= v`, loops included.
    pub fn canonical_edge_list(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self.edges().collect();
        out.extend(self.self_loop_vertices().map(|v| (v, v)));
        out.sort_unstable();
        out
    }

    /// ASCII edge list: `# n=<N> m=<M>` header, then one `u v` per line with
    /// self-loops written as `u u`. `M` counts self-loops.
    pub fn to_edge_list(&self) -> String {
        let edges = self.canonical_edge_list();
        let mut out = String::with_capacity(edges.len() * 12 + 32);
        let _ = writeln!(out, "# n={} m={}", self.n(), edges.len());
        for (u, v) in edges {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Graph, FormatError> {
        let mut n: Option<usize> = None;
        let mut declared_m: Option<usize> = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = idx + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                for tok in rest.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("n=") {
                        n = Some(parse_usize(v, lineno)?);
                    } else if let Some(v) = tok.strip_prefix("m=") {
                        declared_m = Some(parse_usize(v, lineno)?);
                    }
                }
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
                return Err(FormatError::Parse {
                    line: lineno,
                    msg: format!("expected `u v`, got `{line}`"),
                });
            };
            edges.push((parse_usize(a, lineno)?, parse_usize(b, lineno)?));
        }
        let max_vertex = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
        let n = n.unwrap_or(max_vertex);
        if max_vertex > n {
            return Err(FormatError::Parse {
                line: 0,
                msg: format!("vertex {} exceeds declared n={n}", max_vertex - 1),
            });
        }
        let g = Graph::from_edges(n, edges);
        if let Some(m) = declared_m {
            let actual = g.edge_count() + g.self_loop_count();
            if m != actual {
                return Err(FormatError::Parse {
                    line: 0,
                    msg: format!("header declares m={m} but {actual} distinct edges were read"),
                });
            }
        }
        Ok(g)
    }

    /// Graphviz rendering; vertices are named by label when present.
    pub fn to_dot(&self, name: &str) -> String {
        let vertex_name = |v: usize| match &self.labels {
            Some(l) => format!("\"{}\"", l[v]),
            None => v.to_string(),
        };
        let mut out = format!("graph {name} {{\n");
        for v in 0..self.n() {
            let _ = writeln!(out, "  {};", vertex_name(v));
        }
        for (u, v) in self.canonical_edge_list() {
            let _ = writeln!(out, "  {} -- {};", vertex_name(u), vertex_name(v));
        }
        out.push_str("}\n");
        out
    }

    pub fn to_envelope(&self, kind: &str) -> GraphEnvelope {
        GraphEnvelope {
            schema_version: SCHEMA_VERSION,
            kind: kind.to_string(),
            n: self.n(),
            m: self.edge_count(),
            edges: self.edges().map(|(u, v)| [u, v]).collect(),
            self_loops: self.self_loop_vertices().collect(),
            labels: self.labels.clone(),
            bijection: None,
            metadata: serde_json::Value::Null,
        }
    }
}

fn parse_usize(s: &str, line: usize) -> Result<usize, FormatError> {
    s.parse().map_err(|_| FormatError::Parse {
        line,
        msg: format!("`{s}` is not a vertex index"),
    })
}

/// JSON interchange form of a graph, optionally carrying a supernode
/// bijection and free-form construction metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEnvelope {
    pub schema_version: u32,
    pub kind: String,
    pub n: usize,
    pub m: usize,
    pub edges: Vec<[usize; 2]>,
    pub self_loops: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bijection: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub metadata: serde_json::Value,
}

impl GraphEnvelope {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("envelope serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let env: GraphEnvelope = serde_json::from_str(text)?;
        if env.schema_version != SCHEMA_VERSION {
            return Err(FormatError::SchemaVersion(env.schema_version));
        }
        Ok(env)
    }

    pub fn graph(&self) -> Graph {
        let edges = self
            .edges
            .iter()
            .map(|&[u, v]| (u, v))
            .chain(self.self_loops.iter().map(|&v| (v, v)));
        let g = Graph::from_edges(self.n, edges);
        match &self.labels {
            Some(l) => g.with_labels(l.clone()),
            None => g,
        }
    }
}
