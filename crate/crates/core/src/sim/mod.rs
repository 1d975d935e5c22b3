//! Flit-level network simulation with baseline topologies and synthetic traffic.

pub mod campaign;
pub mod engine;
pub mod topology;
pub mod traffic;

pub use campaign::{run_campaign, Campaign, CampaignError, CampaignResult};
pub use engine::{
    load_grid, saturation_sweep, simulate, zero_load_latency, RoutingScheme, RoutingTable, SaturationSweep, SimConfig,
    SimError, SimReport, Simulator, MinTieBreak, VcPolicy, DEFAULT_SEED,
};
pub use topology::{build_dragonfly, build_fattree, build_hyperx, polarstar_topology, Topology, TopologyError, TopologySpec};
pub use traffic::{TrafficError, TrafficKind, TrafficPattern};
