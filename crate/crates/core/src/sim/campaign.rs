//! Batches of simulation runs over topologies, patterns, schemes and loads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::engine::{simulate, RoutingScheme, RoutingTable, SimConfig, SimError, SimReport};
use super::topology::{Topology, TopologyError, TopologySpec};
use super::traffic::{TrafficError, TrafficKind, TrafficPattern};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Every combination of the listed topologies, patterns, schemes, loads and
/// seeds is simulated with the shared `sim` settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub topologies: Vec<TopologySpec>,
    pub patterns: Vec<TrafficKind>,
    pub schemes: Vec<RoutingScheme>,
    pub loads: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub sim: SimConfig,
}

fn default_seeds() -> Vec<u64> {
    vec![super::engine::DEFAULT_SEED]
}

#[derive(Debug, Clone, Serialize)]
pub struct CampaignResult {
    pub reports: Vec<SimReport>,
    /// Topology/pattern pairs that were not run, with the reason.
    pub skipped: Vec<String>,
}

impl CampaignResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SimReport::CSV_HEADER);
        out.push('\n');
        for r in &self.reports {
            out.push_str(&r.to_csv());
            out.push('\n');
        }
        out
    }
}

/// Runs are independent and execute in parallel; results keep the order
/// topology, pattern, seed, scheme, load.
pub fn run_campaign(c: &Campaign) -> Result<CampaignResult, CampaignError> {
    let topos: Vec<(Topology, RoutingTable)> = c
        .topologies
        .iter()
        .map(|spec| {
            let t = spec.build()?;
            let table = RoutingTable::new(&t);
            Ok((t, table))
        })
        .collect::<Result<_, TopologyError>>()?;
    let mut skipped = Vec::new();
    let mut jobs = Vec::new();
    for (ti, (t, _)) in topos.iter().enumerate() {
        for &kind in &c.patterns {
            for &seed in &c.seeds {
                match TrafficPattern::new(kind, t, seed) {
                    Ok(p) => {
                        for &scheme in &c.schemes {
                            for &load in &c.loads {
                                jobs.push((ti, p.clone(), scheme, load, seed));
                            }
                        }
                    }
                    Err(TrafficError::PatternInfeasible(msg)) => {
                        skipped.push(format!("{} {}: {msg}", t.name, kind.short_name()));
                        break;
                    }
                }
            }
        }
    }
    let reports = jobs
        .par_iter()
        .map(|(ti, pattern, scheme, load, seed)| {
            let (t, table) = &topos[*ti];
            let cfg = SimConfig { load: *load, seed: *seed, ..c.sim.clone() };
            simulate(t, table, pattern, *scheme, &cfg)
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(CampaignResult { reports, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn campaign_runs_every_combination() {
        let c: Campaign = serde_json::from_str(
            r#"{
                "topologies": [{"kind": "hyperx", "s": 3, "l": 2, "p": 2},
                               {"kind": "dragonfly", "a": 2, "h": 1, "p": 1}],
                "patterns": ["uniform", "adversarial_supernode"],
                "schemes": ["min", "ugal"],
                "loads": [0.1, 0.2],
                "sim": {"warmup": 100, "measure": 100}
            }"#,
        )
        .unwrap();
        let res = run_campaign(&c).unwrap();
        assert_eq!(res.reports.len(), 2 * 2 * 2 + 2 * 2);
        assert_eq!(res.skipped.len(), 1);
        assert_eq!(res.to_csv().lines().count(), res.reports.len() + 1);
        let again = run_campaign(&c).unwrap();
        assert_eq!(res.to_csv(), again.to_csv());
    }
}
