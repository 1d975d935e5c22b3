//! Cycle-driven flit-level simulation of input-queued routers.
//!
//! Each router input port holds `num_vcs` FIFO virtual channels of
//! `buffer_depth / num_vcs` flits. A packet on its `k`-th network hop uses
//! VC `k`, so channel dependencies are acyclic as long as no path exceeds
//! `num_vcs` hops. Output VCs are granted only when the downstream VC has
//! room for the whole packet; switch allocation is separable, input first,
//! with round-robin arbiters. Links and credits take one cycle.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::topology::Topology;
use super::traffic::{TrafficError, TrafficKind, TrafficPattern};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("NoRoute: router {from} cannot reach router {to}")]
    NoRoute { from: usize, to: usize },
    #[error("VCDeadlockDetected: no flit moved for {cycles} cycles at cycle {at}")]
    VCDeadlockDetected { cycles: u64, at: u64 },
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingScheme {
    Min,
    MMin,
    Ugal,
}

impl RoutingScheme {
    pub fn short_name(&self) -> &'static str {
        match self {
            RoutingScheme::Min => "min",
            RoutingScheme::MMin => "mmin",
            RoutingScheme::Ugal => "ugal",
        }
    }

    pub fn from_short_name(s: &str) -> Option<Self> {
        Some(match s {
            "min" => RoutingScheme::Min,
            "mmin" => RoutingScheme::MMin,
            "ugal" => RoutingScheme::Ugal,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub packet_size: usize,
    /// Flits per input port, split evenly across virtual channels.
    pub buffer_depth: usize,
    pub num_vcs: usize,
    pub warmup: u64,
    /// Length of each of the two measurement windows.
    pub measure: u64,
    /// Extra cycles allowed for measured packets to arrive.
    pub drain: u64,
    /// Offered flits per cycle per injecting endpoint, in `(0, 1]`.
    pub load: f64,
    pub seed: u64,
    pub ugal_threshold: f64,
    pub ugal_samples: usize,
    /// Relative growth of mean latency between windows that marks saturation.
    pub latency_growth: f64,
    pub watchdog: u64,
    /// Request/grant rounds of the separable switch allocator per cycle.
    pub allocator_iterations: usize,
    /// Flits an input port may forward per cycle, each from a different VC.
    pub input_speedup: usize,
    pub vc_policy: VcPolicy,
    pub min_tie_break: MinTieBreak,
}

/// Which minimal next hop static MIN routing fixes for each
/// (router, destination) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinTieBreak {
    /// Lowest neighbour id. Funnels all upward fat-tree traffic into one root.
    LowestId,
    /// A fixed hash of the pair, spreading destinations over equal-cost hops.
    Hashed,
}

/// How a packet's VC class evolves along its path. Both keep the class
/// strictly increasing per hop, which rules out cyclic channel dependencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VcPolicy {
    /// VC `k` on the `k`-th hop.
    HopIndexed,
    /// Any VC above the previous hop's that leaves one VC per remaining hop.
    Ascending,
}

pub const DEFAULT_SEED: u64 = 0x5eed;

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            packet_size: 4,
            buffer_depth: 128,
            num_vcs: 4,
            warmup: 1000,
            measure: 1000,
            drain: 2000,
            load: 0.1,
            seed: DEFAULT_SEED,
            ugal_threshold: 0.25,
            ugal_samples: 4,
            latency_growth: 0.10,
            watchdog: 5000,
            allocator_iterations: 3,
            input_speedup: 2,
            vc_policy: VcPolicy::Ascending,
            min_tie_break: MinTieBreak::Hashed,
        }
    }
}

impl SimConfig {
    fn vc_depth(&self) -> usize {
        self.buffer_depth / self.num_vcs
    }

    fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.into()));
        if self.packet_size == 0 || self.num_vcs == 0 {
            return bad("packet size and VC count must be positive");
        }
        if self.allocator_iterations == 0 || self.input_speedup == 0 {
            return bad("allocator iterations and input speedup must be positive");
        }
        if self.vc_depth() < self.packet_size {
            return bad("each VC must hold a whole packet");
        }
        if !(self.load > 0.0 && self.load <= 1.0) {
            return bad("load must lie in (0, 1]");
        }
        if self.measure == 0 {
            return bad("measurement window must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub topology: String,
    pub pattern: TrafficKind,
    pub routing: RoutingScheme,
    pub load: f64,
    pub seed: u64,
    /// Mean creation-to-tail-ejection latency of measured packets, in cycles.
    pub average_latency: f64,
    pub window_latency: [f64; 2],
    pub average_hops: f64,
    /// Generated flits per cycle per injecting endpoint during measurement.
    pub offered_throughput: f64,
    /// Delivered flits of measured packets per cycle per injecting endpoint.
    pub accepted_throughput: f64,
    pub saturated: bool,
    pub measured_packets: u64,
    pub delivered_packets: u64,
    pub misrouted_packets: u64,
    /// Mean buffered flits per network input VC, by VC class.
    pub vc_occupancy: Vec<f64>,
}

impl SimReport {
    pub const CSV_HEADER: &'static str =
        "topology,pattern,routing,load,seed,latency,throughput,offered,saturated,avg_hops,misrouted";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{:.4},{},{:.4},{:.6},{:.6},{},{:.4},{}",
            self.topology,
            self.pattern.short_name(),
            self.routing.short_name(),
            self.load,
            self.seed,
            self.average_latency,
            self.accepted_throughput,
            self.offered_throughput,
            self.saturated,
            self.average_hops,
            self.misrouted_packets
        )
    }
}

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Packet {
    dst: u32,
    dst_router: u32,
    intermediate: u32,
    created: u64,
    hops: u8,
    /// Lowest VC the next network hop may use.
    next_vc: u8,
    window: u8,
    routed: bool,
    misrouted: bool,
}

#[derive(Debug, Clone, Copy)]
struct Flit {
    packet: u32,
    index: u16,
}

/// Precomputed all-pairs hop counts.
#[derive(Debug, Clone)]
pub struct RoutingTable {
    n: usize,
    dist: Vec<u8>,
}

impl RoutingTable {
    pub fn new(topo: &Topology) -> Self {
        RoutingTable { n: topo.routers(), dist: topo.distance_matrix() }
    }

    pub fn distance(&self, a: usize, b: usize) -> usize {
        self.dist[a * self.n + b] as usize
    }

    pub fn diameter(&self) -> usize {
        self.dist.iter().copied().max().unwrap_or(0) as usize
    }

    /// Neighbour indices of `r` on a shortest path to `t`, ascending by id.
    pub fn minimal_ports<'a>(&'a self, topo: &'a Topology, r: usize, t: usize) -> impl Iterator<Item = usize> + 'a {
        let d = self.distance(r, t);
        topo.graph
            .neighbors(r)
            .iter()
            .enumerate()
            .filter(move |&(_, &w)| d > 0 && self.distance(w, t) + 1 == d)
            .map(|(k, _)| k)
    }
}

/// Cycle-level simulator state for one run.
pub struct Simulator<'a> {
    topo: &'a Topology,
    table: &'a RoutingTable,
    traffic: &'a TrafficPattern,
    scheme: RoutingScheme,
    cfg: SimConfig,
    rng: ChaCha8Rng,
    /// Separate stream so routing choices never perturb the offered traffic.
    route_rng: ChaCha8Rng,
    v: usize,
    vc_depth: usize,
    cycle: u64,

    degree: Vec<usize>,
    /// First global port id of each router; inputs and outputs share ids.
    port_base: Vec<usize>,
    port_router: Vec<usize>,
    /// For a network port: the peer router's port on the same link.
    peer_port: Vec<usize>,

    buffers: Vec<VecDeque<Flit>>,
    in_route: Vec<u32>,
    in_out_vc: Vec<u8>,
    out_busy: Vec<bool>,
    credits: Vec<u32>,
    sa_in_ptr: Vec<usize>,
    sa_out_ptr: Vec<usize>,
    va_ptr: Vec<usize>,
    requests: Vec<(usize, usize)>,
    in_matched: Vec<u8>,
    slot_sent: Vec<bool>,
    out_matched: Vec<bool>,

    packets: Vec<Packet>,
    free_packets: Vec<u32>,
    source_queues: Vec<VecDeque<u32>>,
    source_sent: Vec<u16>,
    /// Injection VC carrying the packet currently being fed.
    source_vc: Vec<u8>,
    endpoint_router: Vec<usize>,
    injection_port: Vec<usize>,
    active: Vec<bool>,
    active_count: usize,
    arrivals: Vec<(usize, Flit)>,
    credit_returns: Vec<usize>,

    injected_flits: u64,
    ejected_flits: u64,
    last_progress: u64,

    measured: u64,
    delivered: u64,
    window_sum: [f64; 2],
    window_count: [u64; 2],
    hops_sum: u64,
    measured_generated_flits: u64,
    measured_delivered_flits: u64,
    misrouted: u64,
    occupancy_sum: Vec<f64>,
    occupancy_samples: u64,
}

impl<'a> Simulator<'a> {
    pub fn new(
        topo: &'a Topology,
        table: &'a RoutingTable,
        traffic: &'a TrafficPattern,
        scheme: RoutingScheme,
        cfg: SimConfig,
    ) -> Result<Self, SimError> {
        cfg.validate()?;
        let n = topo.routers();
        if table.dist.iter().any(|&d| d == u8::MAX) {
            let (from, to) = (0..n * n).find(|&i| table.dist[i] == u8::MAX).map(|i| (i / n, i % n)).unwrap();
            return Err(SimError::NoRoute { from, to });
        }
        if table.diameter() > cfg.num_vcs {
            return Err(SimError::InvalidConfig(format!(
                "diameter {} exceeds {} hop-indexed VCs",
                table.diameter(),
                cfg.num_vcs
            )));
        }
        let v = cfg.num_vcs;
        let degree: Vec<usize> = (0..n).map(|r| topo.graph.degree(r)).collect();
        let mut port_base = Vec::with_capacity(n + 1);
        let mut port_router = Vec::new();
        let mut acc = 0;
        for r in 0..n {
            port_base.push(acc);
            let ports = degree[r] + topo.endpoints[r];
            port_router.extend(std::iter::repeat(r).take(ports));
            acc += ports;
        }
        port_base.push(acc);
        let total_ports = acc;
        let mut peer_port = vec![usize::MAX; total_ports];
        for r in 0..n {
            for (k, &w) in topo.graph.neighbors(r).iter().enumerate() {
                let back = topo.graph.neighbors(w).binary_search(&r).unwrap();
                peer_port[port_base[r] + k] = port_base[w] + back;
            }
        }
        let e = topo.total_endpoints();
        let active: Vec<bool> = (0..e).map(|s| traffic.is_active(s)).collect();
        let active_count = active.iter().filter(|&&a| a).count();
        let vc_depth = cfg.vc_depth();
        let endpoint_router: Vec<usize> = (0..e).map(|s| topo.router_of(s)).collect();
        let injection_port = (0..e)
            .map(|s| {
                let r = endpoint_router[s];
                port_base[r] + degree[r] + (s - topo.first_endpoint(r))
            })
            .collect();
        Ok(Simulator {
            topo,
            table,
            traffic,
            scheme,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            route_rng: {
                let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
                r.set_stream(1);
                r
            },
            v,
            vc_depth,
            cycle: 0,
            degree,
            port_base,
            port_router,
            peer_port,
            buffers: vec![VecDeque::new(); total_ports * v],
            in_route: vec![NONE; total_ports * v],
            in_out_vc: vec![0; total_ports * v],
            out_busy: vec![false; total_ports * v],
            credits: vec![vc_depth as u32; total_ports * v],
            sa_in_ptr: vec![0; total_ports],
            sa_out_ptr: vec![0; total_ports],
            va_ptr: vec![0; n],
            requests: Vec::new(),
            in_matched: Vec::new(),
            slot_sent: Vec::new(),
            out_matched: Vec::new(),
            packets: Vec::new(),
            free_packets: Vec::new(),
            source_queues: vec![VecDeque::new(); e],
            source_sent: vec![0; e],
            source_vc: vec![0; e],
            endpoint_router,
            injection_port,
            active,
            active_count,
            arrivals: Vec::new(),
            credit_returns: Vec::new(),
            injected_flits: 0,
            ejected_flits: 0,
            last_progress: 0,
            measured: 0,
            delivered: 0,
            window_sum: [0.0; 2],
            window_count: [0; 2],
            hops_sum: 0,
            measured_generated_flits: 0,
            measured_delivered_flits: 0,
            misrouted: 0,
            occupancy_sum: vec![0.0; v],
            occupancy_samples: 0,
            cfg,
        })
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    /// Flits that have entered router injection buffers.
    pub fn injected_flits(&self) -> u64 {
        self.injected_flits
    }

    pub fn ejected_flits(&self) -> u64 {
        self.ejected_flits
    }

    /// Flits buffered in routers or on links.
    pub fn in_flight_flits(&self) -> u64 {
        (self.buffers.iter().map(VecDeque::len).sum::<usize>() + self.arrivals.len()) as u64
    }

    fn is_network_port(&self, port: usize) -> bool {
        let r = self.port_router[port];
        port - self.port_base[r] < self.degree[r]
    }

    fn occupancy(&self, out_port: usize) -> usize {
        (0..self.v).map(|c| self.vc_depth - self.credits[out_port * self.v + c] as usize).sum()
    }

    /// Minimal next hop towards `t` and its output occupancy. Adaptive
    /// choice takes the least occupied port, breaking ties uniformly at
    /// random; otherwise the configured static tie-break applies.
    fn best_minimal(&mut self, r: usize, t: usize, adaptive: bool) -> (usize, usize) {
        if !adaptive {
            return (self.static_minimal(r, t), 0);
        }
        let base = self.port_base[r];
        let mut best: Option<(usize, usize)> = None;
        let mut ties = 0u32;
        let d = self.table.distance(r, t);
        for (k, &w) in self.topo.graph.neighbors(r).iter().enumerate() {
            if d == 0 || self.table.distance(w, t) + 1 != d {
                continue;
            }
            let occ = self.occupancy(base + k);
            match best {
                Some((_, o)) if occ > o => {}
                Some((_, o)) if occ == o => {
                    ties += 1;
                    if self.route_rng.gen_range(0..ties) == 0 {
                        best = Some((k, occ));
                    }
                }
                _ => {
                    best = Some((k, occ));
                    ties = 1;
                }
            }
        }
        best.expect("connected topology has a minimal next hop")
    }

    fn static_minimal(&self, r: usize, t: usize) -> usize {
        let mut ports = self.table.minimal_ports(self.topo, r, t);
        match self.cfg.min_tie_break {
            MinTieBreak::LowestId => ports.next(),
            MinTieBreak::Hashed => {
                let count = self.table.minimal_ports(self.topo, r, t).count();
                let h = splitmix64(((r as u64) << 32) | t as u64);
                ports.nth((h % count.max(1) as u64) as usize)
            }
        }
        .expect("connected topology has a minimal next hop")
    }

    fn ugal_choice(&mut self, r: usize, pkt: usize) {
        let dst = self.packets[pkt].dst_router as usize;
        let (_, occ_min) = self.best_minimal(r, dst, true);
        let capacity = (self.v * self.vc_depth) as f64;
        if (occ_min as f64) <= self.cfg.ugal_threshold * capacity {
            return;
        }
        let n = self.topo.routers();
        let min_hops = self.table.distance(r, dst);
        let mut best_cost = occ_min * min_hops;
        let mut best_inter = NONE;
        for _ in 0..self.cfg.ugal_samples {
            let i = self.route_rng.gen_range(0..n);
            if i == r || i == dst {
                continue;
            }
            let hops = self.table.distance(r, i) + self.table.distance(i, dst);
            if hops > self.v {
                continue;
            }
            let (_, occ) = self.best_minimal(r, i, true);
            let cost = occ * hops;
            if cost < best_cost {
                best_cost = cost;
                best_inter = i as u32;
            }
        }
        if best_inter != NONE {
            self.packets[pkt].intermediate = best_inter;
            self.packets[pkt].misrouted = true;
        }
    }

    /// Output port (local index) for the head of a packet at router `r`.
    fn route(&mut self, r: usize, pkt: usize) -> usize {
        if !self.packets[pkt].routed {
            self.packets[pkt].routed = true;
            if self.scheme == RoutingScheme::Ugal && self.packets[pkt].dst_router as usize != r {
                self.ugal_choice(r, pkt);
            }
        }
        let p = self.packets[pkt];
        if p.intermediate as usize == r {
            self.packets[pkt].intermediate = NONE;
        }
        let p = self.packets[pkt];
        let dst_router = p.dst_router as usize;
        if p.intermediate == NONE && r == dst_router {
            return self.degree[r] + (p.dst as usize - self.topo.first_endpoint(r));
        }
        let target = if p.intermediate == NONE { dst_router } else { p.intermediate as usize };
        self.best_minimal(r, target, self.scheme != RoutingScheme::Min).0
    }

    fn generate(&mut self) {
        let measuring = self.cycle >= self.cfg.warmup && self.cycle < self.cfg.warmup + 2 * self.cfg.measure;
        let window = if !measuring {
            0
        } else if self.cycle < self.cfg.warmup + self.cfg.measure {
            1
        } else {
            2
        };
        let p = self.cfg.load / self.cfg.packet_size as f64;
        for s in 0..self.active.len() {
            if !self.active[s] || self.rng.gen::<f64>() >= p {
                continue;
            }
            let Some(dst) = self.traffic.destination(s, &mut self.rng) else { continue };
            let packet = Packet {
                dst: dst as u32,
                dst_router: self.endpoint_router[dst] as u32,
                intermediate: NONE,
                created: self.cycle,
                hops: 0,
            next_vc: 0,
                window,
                routed: false,
                misrouted: false,
            };
            let id = match self.free_packets.pop() {
                Some(id) => {
                    self.packets[id as usize] = packet;
                    id
                }
                None => {
                    self.packets.push(packet);
                    self.packets.len() as u32 - 1
                }
            };
            if window > 0 {
                self.measured += 1;
                self.measured_generated_flits += self.cfg.packet_size as u64;
            }
            self.source_queues[s].push_back(id);
        }
    }

    fn feed_injection(&mut self) {
        for s in 0..self.source_queues.len() {
            let Some(&pkt) = self.source_queues[s].front() else { continue };
            let base = self.injection_port[s] * self.v;
            if self.source_sent[s] == 0 {
                // A new packet takes the emptiest injection VC.
                self.source_vc[s] = (0..self.v).min_by_key(|&c| self.buffers[base + c].len()).unwrap() as u8;
            }
            let buf = &mut self.buffers[base + self.source_vc[s] as usize];
            if buf.len() >= self.vc_depth {
                continue;
            }
            buf.push_back(Flit { packet: pkt, index: self.source_sent[s] });
            self.injected_flits += 1;
            self.source_sent[s] += 1;
            if self.source_sent[s] as usize == self.cfg.packet_size {
                self.source_sent[s] = 0;
                self.source_queues[s].pop_front();
            }
        }
    }

    /// Free output VC with room for the whole packet. Hop-indexed policy
    /// uses VC `hops`; the ascending policy allows any VC above the previous
    /// hop's that still leaves one VC per remaining hop, preferring the one
    /// with most credits.
    fn pick_output_vc(&self, r: usize, pkt: usize, out_local: usize, hops: usize) -> Option<usize> {
        let out = self.port_base[r] + out_local;
        let free = |c: usize| {
            let ovc = out * self.v + c;
            !self.out_busy[ovc] && self.credits[ovc] as usize >= self.cfg.packet_size
        };
        match self.cfg.vc_policy {
            VcPolicy::HopIndexed => {
                assert!(hops < self.v, "packet exceeded hop-indexed VC budget");
                free(hops).then_some(hops)
            }
            VcPolicy::Ascending => {
                let p = &self.packets[pkt];
                let next = self.topo.graph.neighbors(r)[out_local];
                let mut remaining = if p.intermediate == NONE {
                    self.table.distance(next, p.dst_router as usize)
                } else {
                    self.table.distance(next, p.intermediate as usize)
                        + self.table.distance(p.intermediate as usize, p.dst_router as usize)
                };
                remaining = remaining.min(self.v - 1);
                let lo = p.next_vc as usize;
                let hi = self.v - 1 - remaining;
                assert!(lo <= hi, "packet exceeded VC budget");
                (lo..=hi).filter(|&c| free(c)).max_by_key(|&c| (self.credits[out * self.v + c], std::cmp::Reverse(c)))
            }
        }
    }

    fn allocate_vcs(&mut self, r: usize) {
        let (lo, hi) = (self.port_base[r], self.port_base[r + 1]);
        let slots = (hi - lo) * self.v;
        if slots == 0 {
            return;
        }
        let start = self.va_ptr[r] % slots;
        for off in 0..slots {
            let slot = lo * self.v + (start + off) % slots;
            if self.in_route[slot] != NONE {
                continue;
            }
            let Some(&flit) = self.buffers[slot].front() else { continue };
            debug_assert_eq!(flit.index, 0);
            let pkt = flit.packet as usize;
            let out_local = self.route(r, pkt);
            let out = lo + out_local;
            let hops = self.packets[pkt].hops as usize;
            if out_local >= self.degree[r] {
                // Ejection channels carry V reassembly VCs with unbounded room.
                if let Some(c) = (0..self.v).find(|&c| !self.out_busy[out * self.v + c]) {
                    self.out_busy[out * self.v + c] = true;
                    self.in_route[slot] = out as u32;
                    self.in_out_vc[slot] = c as u8;
                }
                continue;
            }
            let Some(ovc_class) = self.pick_output_vc(r, pkt, out_local, hops) else { continue };
            let ovc = out * self.v + ovc_class;
            self.out_busy[ovc] = true;
            self.in_route[slot] = out as u32;
            self.in_out_vc[slot] = ovc_class as u8;
            self.packets[pkt].next_vc = ovc_class as u8 + 1;
        }
        self.va_ptr[r] = (start + 1) % slots;
    }

    fn switch(&mut self, r: usize) {
        let (lo, hi) = (self.port_base[r], self.port_base[r + 1]);
        let ports = hi - lo;
        let mut requests = std::mem::take(&mut self.requests);
        let mut in_matched = std::mem::take(&mut self.in_matched);
        let mut out_matched = std::mem::take(&mut self.out_matched);
        let mut slot_sent = std::mem::take(&mut self.slot_sent);
        in_matched.clear();
        in_matched.resize(ports, 0);
        slot_sent.clear();
        slot_sent.resize(ports * self.v, false);
        out_matched.clear();
        out_matched.resize(ports, false);
        for iteration in 0..self.cfg.allocator_iterations {
            // Input arbitration: one VC per input port with speedup left.
            requests.clear();
            for ip in lo..hi {
                if in_matched[ip - lo] as usize >= self.cfg.input_speedup {
                    continue;
                }
                let start = self.sa_in_ptr[ip];
                for off in 0..self.v {
                    let c = (start + off) % self.v;
                    let slot = ip * self.v + c;
                    let out = self.in_route[slot];
                    if out == NONE
                        || slot_sent[slot - lo * self.v]
                        || self.buffers[slot].is_empty()
                        || out_matched[out as usize - lo]
                    {
                        continue;
                    }
                    let out = out as usize;
                    if self.is_network_port(out) && self.credits[out * self.v + self.in_out_vc[slot] as usize] == 0 {
                        continue;
                    }
                    requests.push((out, slot));
                    break;
                }
            }
            if requests.is_empty() {
                break;
            }
            // Output arbitration: round-robin over input ports.
            requests.sort_unstable_by_key(|&(out, slot)| {
                let ip = slot / self.v;
                let ptr = self.sa_out_ptr[out];
                (out, (ip - lo + ports - ptr % ports) % ports)
            });
            let mut last_out = usize::MAX;
            for &(out, slot) in &requests {
                if out == last_out {
                    continue;
                }
                last_out = out;
                let ip = slot / self.v;
                in_matched[ip - lo] += 1;
                out_matched[out - lo] = true;
                slot_sent[slot - lo * self.v] = true;
                // Pointers advance only on first-iteration grants.
                if iteration == 0 {
                    self.sa_out_ptr[out] = (ip - lo + 1) % ports;
                    self.sa_in_ptr[ip] = (slot % self.v + 1) % self.v;
                }
                self.traverse(slot, out);
            }
        }
        self.requests = requests;
        self.slot_sent = slot_sent;
        self.in_matched = in_matched;
        self.out_matched = out_matched;
    }

    fn traverse(&mut self, slot: usize, out: usize) {
        let flit = self.buffers[slot].pop_front().unwrap();
        self.last_progress = self.cycle;
        let ip = slot / self.v;
        if self.is_network_port(ip) {
            self.credit_returns.push(self.peer_port[ip] * self.v + slot % self.v);
        }
        let pkt = flit.packet as usize;
        let tail = flit.index as usize + 1 == self.cfg.packet_size;
        let ovc_class = self.in_out_vc[slot] as usize;
        if tail {
            self.in_route[slot] = NONE;
        }
        if !self.is_network_port(out) {
            self.ejected_flits += 1;
            if tail {
                self.out_busy[out * self.v + ovc_class] = false;
                self.deliver(pkt);
                self.free_packets.push(pkt as u32);
            }
            return;
        }
        let ovc = out * self.v + ovc_class;
        self.credits[ovc] -= 1;
        if tail {
            self.out_busy[ovc] = false;
        }
        if flit.index == 0 {
            self.packets[pkt].hops += 1;
        }
        self.arrivals.push((self.peer_port[out] * self.v + ovc_class, flit));
    }

    fn deliver(&mut self, pkt: usize) {
        let p = self.packets[pkt];
        if p.window == 0 {
            return;
        }
        let w = p.window as usize - 1;
        self.delivered += 1;
        self.window_sum[w] += (self.cycle - p.created) as f64;
        self.window_count[w] += 1;
        self.hops_sum += p.hops as u64;
        self.measured_delivered_flits += self.cfg.packet_size as u64;
        if p.misrouted {
            self.misrouted += 1;
        }
    }

    fn sample_occupancy(&mut self) {
        for r in 0..self.topo.routers() {
            for k in 0..self.degree[r] {
                let port = self.port_base[r] + k;
                for c in 0..self.v {
                    self.occupancy_sum[c] += self.buffers[port * self.v + c].len() as f64;
                }
            }
        }
        self.occupancy_samples += 1;
    }

    /// Advances one cycle.
    pub fn step(&mut self) -> Result<(), SimError> {
        for (slot, flit) in std::mem::take(&mut self.arrivals) {
            self.buffers[slot].push_back(flit);
        }
        for ovc in std::mem::take(&mut self.credit_returns) {
            self.credits[ovc] += 1;
        }
        self.feed_injection();
        let end = self.cfg.warmup + 2 * self.cfg.measure + self.cfg.drain;
        if self.cycle < end {
            self.generate();
        }
        for r in 0..self.topo.routers() {
            self.allocate_vcs(r);
            self.switch(r);
        }
        let measuring = self.cycle >= self.cfg.warmup && self.cycle < self.cfg.warmup + 2 * self.cfg.measure;
        if measuring && self.cycle % 16 == 0 {
            self.sample_occupancy();
        }
        if self.injected_flits > self.ejected_flits && self.cycle - self.last_progress > self.cfg.watchdog {
            return Err(SimError::VCDeadlockDetected { cycles: self.cycle - self.last_progress, at: self.cycle });
        }
        if self.injected_flits == self.ejected_flits {
            self.last_progress = self.cycle;
        }
        self.cycle += 1;
        Ok(())
    }

    /// Runs warm-up, two measurement windows and the drain period.
    pub fn run(mut self) -> Result<SimReport, SimError> {
        let measure_end = self.cfg.warmup + 2 * self.cfg.measure;
        let end = measure_end + self.cfg.drain;
        while self.cycle < end {
            self.step()?;
            if self.cycle >= measure_end && self.delivered == self.measured {
                break;
            }
        }
        Ok(self.report())
    }

    fn report(&self) -> SimReport {
        let wl = [0, 1].map(|w| if self.window_count[w] == 0 { 0.0 } else { self.window_sum[w] / self.window_count[w] as f64 });
        let total = self.window_count[0] + self.window_count[1];
        let average_latency = if total == 0 { 0.0 } else { (self.window_sum[0] + self.window_sum[1]) / total as f64 };
        let denom = (self.active_count.max(1) as u64 * 2 * self.cfg.measure) as f64;
        let growth = wl[0] > 0.0 && wl[1] > wl[0] * (1.0 + self.cfg.latency_growth);
        let vc_occupancy = self
            .occupancy_sum
            .iter()
            .map(|&s| {
                let buffers: usize = self.degree.iter().sum();
                if self.occupancy_samples == 0 || buffers == 0 {
                    0.0
                } else {
                    s / (self.occupancy_samples as f64 * buffers as f64)
                }
            })
            .collect();
        SimReport {
            topology: self.topo.name.clone(),
            pattern: self.traffic.kind,
            routing: self.scheme,
            load: self.cfg.load,
            seed: self.cfg.seed,
            average_latency,
            window_latency: wl,
            average_hops: if self.delivered == 0 { 0.0 } else { self.hops_sum as f64 / self.delivered as f64 },
            offered_throughput: self.measured_generated_flits as f64 / denom,
            accepted_throughput: self.measured_delivered_flits as f64 / denom,
            saturated: growth || self.delivered < self.measured,
            measured_packets: self.measured,
            delivered_packets: self.delivered,
            misrouted_packets: self.misrouted,
            vc_occupancy,
        }
    }
}

/// One simulation run.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce5_e9b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn simulate(
    topo: &Topology,
    table: &RoutingTable,
    traffic: &TrafficPattern,
    scheme: RoutingScheme,
    cfg: &SimConfig,
) -> Result<SimReport, SimError> {
    Simulator::new(topo, table, traffic, scheme, cfg.clone())?.run()
}

/// Zero-load latency: mean router hops plus the endpoint link and the
/// serialisation of the remaining flits.
pub fn zero_load_latency(topo: &Topology, table: &RoutingTable, traffic: &TrafficPattern, packet_size: usize) -> f64 {
    traffic.mean_router_distance(topo, &table.dist) + packet_size as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct SaturationSweep {
    pub reports: Vec<SimReport>,
    /// Highest load in the sweep that did not saturate; 0 if none.
    pub saturation_load: f64,
}

/// Runs `loads` in increasing order and stops after the first saturated point.
pub fn saturation_sweep(
    topo: &Topology,
    table: &RoutingTable,
    traffic: &TrafficPattern,
    scheme: RoutingScheme,
    cfg: &SimConfig,
    loads: &[f64],
) -> Result<SaturationSweep, SimError> {
    let mut reports = Vec::new();
    let mut saturation_load = 0.0;
    for &load in loads {
        let mut c = cfg.clone();
        c.load = load;
        let rep = simulate(topo, table, traffic, scheme, &c)?;
        let sat = rep.saturated;
        reports.push(rep);
        if sat {
            break;
        }
        saturation_load = load;
    }
    Ok(SaturationSweep { reports, saturation_load })
}

/// `step, 2*step, ...` up to 1.
pub fn load_grid(step: f64) -> Vec<f64> {
    let k = (1.0 / step).round() as usize;
    (1..=k).map(|i| (i as f64 * step * 1e6).round() / 1e6).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::sim::topology::{build_dragonfly, build_fattree, build_hyperx};

    fn small_cfg(load: f64) -> SimConfig {
        SimConfig { warmup: 200, measure: 300, drain: 1000, load, ..SimConfig::default() }
    }

    fn path3() -> Topology {
        Topology::new("path", Graph::from_edges(3, [(0, 1), (1, 2)]), vec![1, 1, 1], None)
    }

    #[test]
    fn min_on_path_goes_through_middle() {
        let t = path3();
        let table = RoutingTable::new(&t);
        assert_eq!(table.minimal_ports(&t, 0, 2).collect::<Vec<_>>(), vec![0]);
        let traffic = TrafficPattern::new(TrafficKind::Uniform, &t, 0).unwrap();
        let cfg = small_cfg(0.01);
        let mut sim = Simulator::new(&t, &table, &traffic, RoutingScheme::Min, cfg).unwrap();
        sim.packets.push(Packet {
            dst: 2,
            dst_router: 2,
            intermediate: NONE,
            created: 0,
            hops: 0,
            next_vc: 0,
            window: 0,
            routed: false,
            misrouted: false,
        });
        assert_eq!(sim.route(0, 0), 0);
        assert_eq!(sim.route(1, 0), 1);
        assert_eq!(sim.route(2, 0), 1);
    }

    #[test]
    fn mmin_prefers_emptier_port() {
        let t = Topology::new("c4", Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]), vec![1; 4], None);
        let table = RoutingTable::new(&t);
        let traffic = TrafficPattern::new(TrafficKind::Uniform, &t, 0).unwrap();
        let mut sim = Simulator::new(&t, &table, &traffic, RoutingScheme::MMin, small_cfg(0.01)).unwrap();
        // Router 0's neighbours are [1, 3]; fill the port towards 1.
        sim.credits[sim.port_base[0] * sim.v] = 0;
        let pkt = Packet {
            dst: 2,
            dst_router: 2,
            intermediate: NONE,
            created: 0,
            hops: 0,
            next_vc: 0,
            window: 0,
            routed: false,
            misrouted: false,
        };
        sim.packets.push(pkt);
        assert_eq!(t.graph.neighbors(0)[sim.route(0, 0)], 3);
        sim.credits[sim.port_base[0] * sim.v] = sim.vc_depth as u32;
        sim.credits[(sim.port_base[0] + 1) * sim.v] = 0;
        sim.packets.push(pkt);
        assert_eq!(t.graph.neighbors(0)[sim.route(0, 1)], 1);
    }

    #[test]
    fn conservation_every_cycle() {
        let t = build_hyperx(3, 2, 2).unwrap();
        let table = RoutingTable::new(&t);
        let traffic = TrafficPattern::new(TrafficKind::Uniform, &t, 0).unwrap();
        let mut sim = Simulator::new(&t, &table, &traffic, RoutingScheme::Ugal, small_cfg(0.9)).unwrap();
        for _ in 0..1500 {
            sim.step().unwrap();
            assert_eq!(sim.injected_flits(), sim.ejected_flits() + sim.in_flight_flits());
        }
        assert!(sim.ejected_flits() > 0);
    }

    #[test]
    fn zero_load_latency_matches_hop_count() {
        let t = build_dragonfly(4, 2, 2).unwrap();
        let table = RoutingTable::new(&t);
        let traffic = TrafficPattern::new(TrafficKind::Uniform, &t, 0).unwrap();
        let target = zero_load_latency(&t, &table, &traffic, 4);
        for scheme in [RoutingScheme::Min, RoutingScheme::MMin, RoutingScheme::Ugal] {
            let mut cfg = small_cfg(0.01);
            cfg.measure = 3000;
            let rep = simulate(&t, &table, &traffic, scheme, &cfg).unwrap();
            assert!(!rep.saturated);
            assert!((rep.average_latency - target).abs() / target < 0.05, "{scheme:?}: {} vs {target}", rep.average_latency);
            assert!(rep.average_hops <= table.diameter() as f64);
        }
    }

    #[test]
    fn isolated_packet_latency_is_exact() {
        let t = path3();
        let table = RoutingTable::new(&t);
        let traffic = TrafficPattern::new(TrafficKind::Uniform, &t, 0).unwrap();
        let mut sim = Simulator::new(&t, &table, &traffic, RoutingScheme::Min, small_cfg(0.01)).unwrap();
        sim.packets.push(Packet {
            dst: 2,
            dst_router: 2,
            intermediate: NONE,
            created: 0,
            hops: 0,
            next_vc: 0,
            window: 1,
            routed: false,
            misrouted: false,
        });
        sim.measured = 1;
        sim.source_queues[0].push_back(0);
        sim.active = vec![false; 3];
        // Created during cycle 0, so its head reaches the router in cycle 1.
        sim.cycle = 1;
        for _ in 0..20 {
            sim.step().unwrap();
        }
        assert_eq!(sim.delivered, 1);
        assert_eq!(sim.window_sum[0], 2.0 + 4.0);
        assert_eq!(sim.hops_sum, 2);
    }

    #[test]
    fn ugal_matches_min_at_low_load() {
        let t = build_hyperx(4, 2, 2).unwrap();
        let table = RoutingTable::new(&t);
        let traffic = TrafficPattern::new(TrafficKind::Uniform, &t, 0).unwrap();
        let cfg = small_cfg(0.01);
        let a = simulate(&t, &table, &traffic, RoutingScheme::Min, &cfg).unwrap();
        let b = simulate(&t, &table, &traffic, RoutingScheme::Ugal, &cfg).unwrap();
        assert_eq!(b.misrouted_packets, 0);
        assert_eq!(a.average_hops, b.average_hops);
    }

    #[test]
    fn replay_is_identical() {
        let t = build_dragonfly(4, 2, 2).unwrap();
        let table = RoutingTable::new(&t);
        let traffic = TrafficPattern::new(TrafficKind::RandomRouterPermutation, &t, 3).unwrap();
        let cfg = small_cfg(0.4);
        let a = simulate(&t, &table, &traffic, RoutingScheme::Ugal, &cfg).unwrap();
        let b = simulate(&t, &table, &traffic, RoutingScheme::Ugal, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn throughput_never_exceeds_offered_and_saturates() {
        let t = build_hyperx(3, 2, 3).unwrap();
        let table = RoutingTable::new(&t);
        let traffic = TrafficPattern::new(TrafficKind::Uniform, &t, 0).unwrap();
        let sweep = saturation_sweep(&t, &table, &traffic, RoutingScheme::Min, &small_cfg(0.1), &load_grid(0.1)).unwrap();
        for r in &sweep.reports {
            assert!(r.accepted_throughput <= r.offered_throughput);
        }
        for w in sweep.reports.windows(2).filter(|w| !w[1].saturated) {
            assert!(w[1].accepted_throughput >= w[0].accepted_throughput * 0.98);
        }
        assert!(sweep.saturation_load > 0.0);
    }

    #[test]
    fn rejects_invalid_configs() {
        let t = path3();
        let table = RoutingTable::new(&t);
        let traffic = TrafficPattern::new(TrafficKind::Uniform, &t, 0).unwrap();
        let mut cfg = small_cfg(0.0);
        assert!(Simulator::new(&t, &table, &traffic, RoutingScheme::Min, cfg.clone()).is_err());
        cfg.load = 0.5;
        cfg.num_vcs = 1;
        assert!(matches!(
            Simulator::new(&t, &table, &traffic, RoutingScheme::Min, cfg),
            Err(SimError::InvalidConfig(_))
        ));
        let split = Topology::new("split", Graph::from_edges(2, []), vec![1, 1], None);
        let table = RoutingTable::new(&split);
        let traffic = TrafficPattern::new(TrafficKind::Uniform, &split, 0).unwrap();
        assert!(matches!(
            Simulator::new(&split, &table, &traffic, RoutingScheme::Min, small_cfg(0.1)),
            Err(SimError::NoRoute { .. })
        ));
    }

    #[test]
    fn static_min_tie_breaks() {
        let t = build_fattree(3, 4).unwrap();
        let table = RoutingTable::new(&t);
        let traffic = TrafficPattern::new(TrafficKind::Uniform, &t, 0).unwrap();
        let lowest = SimConfig { min_tie_break: MinTieBreak::LowestId, ..small_cfg(0.1) };
        let sim = Simulator::new(&t, &table, &traffic, RoutingScheme::Min, lowest).unwrap();
        let mut used = std::collections::BTreeSet::new();
        for dst in 4..16 {
            let k = sim.static_minimal(0, dst);
            assert_eq!(k, table.minimal_ports(&t, 0, dst).next().unwrap());
            used.insert(k);
        }
        assert_eq!(used.len(), 1);
        let sim = Simulator::new(&t, &table, &traffic, RoutingScheme::Min, small_cfg(0.1)).unwrap();
        let mut used = std::collections::BTreeSet::new();
        for dst in 4..16 {
            let k = sim.static_minimal(0, dst);
            assert!(table.minimal_ports(&t, 0, dst).any(|m| m == k));
            assert_eq!(k, sim.static_minimal(0, dst));
            used.insert(k);
        }
        assert!(used.len() > 1);
    }

    #[test]
    fn soak_at_full_load_never_deadlocks() {
        use crate::factor::SupernodeKind;
        use crate::sim::topology::polarstar_topology;
        let topologies = [
            polarstar_topology(3, SupernodeKind::InductiveQuad { degree: 3 }, 2).unwrap(),
            polarstar_topology(4, SupernodeKind::Paley { order: 5 }, 2).unwrap(),
            build_dragonfly(4, 2, 2).unwrap(),
            build_hyperx(3, 3, 2).unwrap(),
            build_fattree(3, 2).unwrap(),
        ];
        for t in &topologies {
            let table = RoutingTable::new(t);
            for kind in [TrafficKind::Uniform, TrafficKind::BitReverse] {
                let traffic = TrafficPattern::new(kind, t, 1).unwrap();
                for scheme in [RoutingScheme::Min, RoutingScheme::MMin, RoutingScheme::Ugal] {
                    let cfg = SimConfig { warmup: 0, measure: 10_000, drain: 0, load: 1.0, watchdog: 500, ..SimConfig::default() };
                    let mut sim = Simulator::new(t, &table, &traffic, scheme, cfg).unwrap();
                    for _ in 0..8_000 {
                        sim.step().unwrap_or_else(|e| panic!("{} {kind:?} {scheme:?}: {e}", t.name));
                    }
                    assert!(sim.ejected_flits() > 0);
                }
            }
        }
    }
}
