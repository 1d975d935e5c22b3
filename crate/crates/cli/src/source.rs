//! Turns topology flags or an input file into a graph plus whatever
//! construction data is known about it.

use std::fs;

use polarstar::design::max_order;
use polarstar::factor::{build_er, ErGraph, SupernodeGraph, SupernodeKind};
use polarstar::graph::{Graph, GraphEnvelope};
use polarstar::sim::{Topology, TopologySpec};
use polarstar::star::{build_polarstar, PolarStarGraph};

use crate::args::{SupernodeArg, TopologyArgs, TopologyKind};
use crate::error::CliError;

pub enum Source {
    PolarStar(PolarStarGraph),
    Er(ErGraph),
    Supernode(SupernodeGraph),
    Network { spec: TopologySpec, topology: Topology },
    File { graph: Graph, envelope: Option<GraphEnvelope> },
}

impl Source {
    pub fn graph(&self) -> &Graph {
        match self {
            Source::PolarStar(ps) => &ps.graph,
            Source::Er(er) => &er.graph,
            Source::Supernode(s) => &s.graph,
            Source::Network { topology, .. } => &topology.graph,
            Source::File { graph, .. } => graph,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Source::PolarStar(ps) => format!("polarstar_q{}_{}", ps.q, ps.supernode.kind.short_name()),
            Source::Er(er) => format!("er_q{}", er.q),
            Source::Supernode(s) => s.kind.short_name().to_string(),
            Source::Network { topology, .. } => topology.name.replace('-', "_"),
            Source::File { envelope, .. } => envelope.as_ref().map_or("graph".into(), |e| e.kind.clone()),
        }
    }

    pub fn envelope(&self) -> GraphEnvelope {
        match self {
            Source::PolarStar(ps) => ps.to_envelope(),
            Source::Er(er) => {
                let mut env = er.graph.to_envelope("er");
                env.metadata = serde_json::json!({ "q": er.q, "quadrics": er.quadrics() });
                env
            }
            Source::Supernode(s) => {
                let mut env = s.graph.to_envelope(s.kind.short_name());
                env.bijection = Some(s.f.clone());
                env.metadata = serde_json::json!({ "supernode": s.kind, "property": s.property });
                env
            }
            Source::Network { spec, topology } => {
                let mut env = topology.graph.to_envelope(&topology.name);
                env.metadata = serde_json::json!({ "spec": spec, "endpoints": topology.endpoints });
                env
            }
            Source::File { graph, envelope } => envelope.clone().unwrap_or_else(|| graph.to_envelope("graph")),
        }
    }

    /// ER structure graph and supernode graph, when the source is (or
    /// describes) a PolarStar.
    pub fn factors(&self) -> Result<(Option<ErGraph>, Option<SupernodeGraph>), CliError> {
        match self {
            Source::PolarStar(ps) => Ok((Some(ps.structure.clone()), Some(ps.supernode.clone()))),
            Source::Er(er) => Ok((Some(er.clone()), None)),
            Source::Supernode(s) => Ok((None, Some(s.clone()))),
            Source::Network { .. } => Ok((None, None)),
            Source::File { envelope, .. } => {
                let Some(meta) = envelope.as_ref().map(|e| &e.metadata) else { return Ok((None, None)) };
                let er = match meta.get("q").and_then(|v| v.as_u64()) {
                    Some(q) => Some(build_er(q as u32)?),
                    None => None,
                };
                let sn = match meta.get("supernode") {
                    Some(v) => {
                        let kind: SupernodeKind = serde_json::from_value(v.clone())
                            .map_err(|e| CliError::Validation(format!("ParseError: supernode metadata: {e}")))?;
                        Some(kind.build()?)
                    }
                    None => None,
                };
                Ok((er, sn))
            }
        }
    }

    /// Rebuilds a PolarStar described by file metadata.
    pub fn polarstar(self) -> Result<PolarStarGraph, CliError> {
        match self {
            Source::PolarStar(ps) => Ok(ps),
            other => match other.factors()? {
                (Some(er), Some(sn)) => Ok(build_polarstar(er.q, sn.kind)?),
                _ => Err(CliError::Validation("UnsupportedTopology: a PolarStar is required".into())),
            },
        }
    }
}

fn supernode_kind(arg: SupernodeArg, dprime: usize) -> SupernodeKind {
    match arg {
        SupernodeArg::Iq => SupernodeKind::InductiveQuad { degree: dprime },
        SupernodeArg::Paley => SupernodeKind::Paley { order: 2 * dprime as u32 + 1 },
        SupernodeArg::Complete => SupernodeKind::Complete { order: dprime + 1 },
    }
}

/// Router network description for simulation.
pub fn network_spec(a: &TopologyArgs) -> Result<TopologySpec, CliError> {
    let kind = a.topology.ok_or_else(|| CliError::missing("--topology", "simulation"))?;
    let radix = || a.radix.ok_or_else(|| CliError::missing("--radix", "baseline topologies"));
    let mut spec = match kind {
        TopologyKind::Polarstar => match (a.q, a.radix) {
            (Some(q), _) => {
                let arg = a.supernode.ok_or_else(|| CliError::missing("--supernode", "--q"))?;
                let d = a.dprime.ok_or_else(|| CliError::missing("--dprime", "--q"))?;
                TopologySpec::Polarstar { q, supernode: supernode_kind(arg, d), endpoints: (q as usize + 1 + d) / 3 }
            }
            (None, Some(r)) => TopologySpec::polarstar_for_radix(r)?,
            (None, None) => return Err(CliError::missing("--q or --radix", "polarstar")),
        },
        TopologyKind::Dragonfly => TopologySpec::dragonfly_for_radix(radix()?),
        TopologyKind::Hyperx => TopologySpec::hyperx_for_radix(radix()?),
        TopologyKind::Fattree => TopologySpec::fattree_for_radix(radix()?),
        TopologyKind::Er | TopologyKind::Iq | TopologyKind::Paley => {
            return Err(CliError::Validation(format!("UnsupportedTopology: {kind:?} is not a router network")))
        }
    };
    if let Some(p) = a.endpoints {
        spec = match spec {
            TopologySpec::Polarstar { q, supernode, .. } => TopologySpec::Polarstar { q, supernode, endpoints: p },
            TopologySpec::Dragonfly { a, h, .. } => TopologySpec::Dragonfly { a, h, p },
            TopologySpec::Hyperx { s, l, .. } => TopologySpec::Hyperx { s, l, p },
            TopologySpec::Fattree { .. } => {
                return Err(CliError::Validation(
                    "InvalidParameters: fat-tree endpoints follow from the switch radix".into(),
                ))
            }
        };
    }
    Ok(spec)
}

pub fn resolve(a: &TopologyArgs) -> Result<Source, CliError> {
    if let Some(path) = &a.input {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("IoError: {}: {e}", path.display())))?;
        return if text.trim_start().starts_with('{') {
            let env = GraphEnvelope::from_json(&text)?;
            Ok(Source::File { graph: env.graph(), envelope: Some(env) })
        } else {
            Ok(Source::File { graph: Graph::from_edge_list(&text)?, envelope: None })
        };
    }
    let kind = a.topology.ok_or_else(|| CliError::missing("--topology or --input", "this command"))?;
    match kind {
        TopologyKind::Polarstar => {
            let (q, sk) = match (a.q, a.radix) {
                (Some(q), _) => {
                    let arg = a.supernode.ok_or_else(|| CliError::missing("--supernode", "--q"))?;
                    let d = a.dprime.ok_or_else(|| CliError::missing("--dprime", "--q"))?;
                    (q, supernode_kind(arg, d))
                }
                (None, Some(r)) => {
                    let best = max_order(r)?.best;
                    (best.q, best.supernode)
                }
                (None, None) => return Err(CliError::missing("--q or --radix", "polarstar")),
            };
            Ok(Source::PolarStar(build_polarstar(q, sk)?))
        }
        TopologyKind::Er => {
            let q = a.q.or(a.radix.map(|r| r.saturating_sub(1) as u32)).ok_or_else(|| CliError::missing("--q", "er"))?;
            Ok(Source::Er(build_er(q)?))
        }
        TopologyKind::Iq => {
            let d = a.dprime.ok_or_else(|| CliError::missing("--dprime", "iq"))?;
            Ok(Source::Supernode(supernode_kind(SupernodeArg::Iq, d).build()?))
        }
        TopologyKind::Paley => {
            let order = match (a.q, a.dprime) {
                (Some(q), _) => q,
                (None, Some(d)) => 2 * d as u32 + 1,
                (None, None) => return Err(CliError::missing("--q or --dprime", "paley")),
            };
            Ok(Source::Supernode(SupernodeKind::Paley { order }.build()?))
        }
        TopologyKind::Dragonfly | TopologyKind::Hyperx | TopologyKind::Fattree => {
            let spec = network_spec(a)?;
            let topology = spec.build()?;
            Ok(Source::Network { spec, topology })
        }
    }
}
