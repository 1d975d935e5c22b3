//! End-to-end acceptance checks at full scale. Each test prints one
//! `PASS`/`FAIL` line straight to stdout, so the lines show up even when
//! the harness captures output.
//!
//! Three criteria cannot hold as stated (5, 7 and 9 at some radixes). Those
//! tests still print `FAIL`; they pass the harness only when an independent
//! computation reproduces the reason, so a regression cannot hide behind
//! the known failure.

use std::io::Write;
use std::time::Instant;

use polarstar::analysis::{bisection_estimate, fault_sweep, layout_decompose, supernode_split_cut};
use polarstar::design::{enumerate_configs, max_order, moore_bound};
use polarstar::factor::{
    build_er, build_inductive_quad, build_paley, check_property_r, check_property_r1, check_property_r_star,
    exhaustive_r_star_search, SupernodeKind,
};
use polarstar::galois::is_prime_power;
use polarstar::sim::{
    load_grid, run_campaign, saturation_sweep, simulate, zero_load_latency, Campaign, RoutingScheme, RoutingTable,
    SaturationSweep, SimConfig, Topology, TopologySpec, TrafficKind, TrafficPattern,
};
use polarstar::star::{build_polarstar, parallel_diameter};

fn report(id: u8, name: &str, pass: bool, detail: &str) {
    let line = format!("\n{} [{id:>2}] {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn iq(d: usize) -> SupernodeKind {
    SupernodeKind::InductiveQuad { degree: d }
}

#[test]
fn c01_record_orders() {
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (radix, want) in [(18, 1830), (19, 2128), (20, 2394)] {
        let best = max_order(radix).unwrap().best;
        let ps = build_polarstar(best.q, best.supernode).unwrap();
        let n = ps.graph.n();
        let regular = ps.graph.regular_degree() == Some(radix);
        let diam = parallel_diameter(&ps.graph);
        ok &= n == want && regular && diam.is_some_and(|d| d <= 3);
        parts.push(format!("r{radix}: n={n} regular={regular} diam={diam:?}"));
    }
    let secs = t.elapsed().as_secs_f64();
    ok &= secs < 10.0;
    report(1, "record orders", ok, &format!("{} ({secs:.1}s)", parts.join(", ")));
    assert!(ok);
}

#[test]
fn c02_moore_efficiency() {
    let mut ok = true;
    let mut parts = Vec::new();
    for (radix, want) in [(18, 33.3), (19, 32.6), (20, 31.4)] {
        let best = max_order(radix).unwrap().best;
        // Recompute from the order rather than trusting the stored field.
        let eff = 100.0 * best.order as f64 / (radix.pow(3) - radix.pow(2) + radix + 1) as f64;
        ok &= (eff - want).abs() <= 0.5 && (eff - 100.0 * best.moore_efficiency).abs() < 1e-9;
        parts.push(format!("r{radix}: {eff:.2}% (target {want}%)"));
    }
    report(2, "Moore efficiency", ok, &parts.join(", "));
    assert!(ok);
}

#[test]
fn c03_factor_graph_suite() {
    let t = Instant::now();
    let mut bad = Vec::new();
    for q in [2u32, 3, 4, 5, 7, 8, 9, 11, 13] {
        let er = build_er(q).unwrap();
        let n = (q * q + q + 1) as usize;
        let diam = parallel_diameter(&er.graph);
        if er.graph.n() != n || er.quadrics().len() != q as usize + 1 || diam != Some(2) || !check_property_r(&er.graph, 2)
        {
            bad.push(format!("ER_{q}"));
        }
    }
    for d in [0usize, 3, 4, 7, 8, 11, 12] {
        let s = build_inductive_quad(d).unwrap();
        if s.n() != 2 * d + 2 || s.degree() != d || !matches!(check_property_r_star(&s), Ok(true)) {
            bad.push(format!("IQ({d})"));
        }
    }
    for order in [5u32, 9, 13, 17, 25, 29] {
        let s = build_paley(order).unwrap();
        // Multiplication by a primitive element fixes 0 and cycles the
        // other q' - 1 elements in a single orbit.
        let mut len = 1;
        let mut x = s.f[1];
        while x != 1 && len <= order {
            x = s.f[x];
            len += 1;
        }
        if s.f[0] != 0 || len != order - 1 || !matches!(check_property_r1(&s), Ok(true)) {
            bad.push(format!("Paley({order})"));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let ok = bad.is_empty() && secs < 30.0;
    report(3, "factor graph suite", ok, &format!("9 ER, 7 IQ, 6 Paley; failures {bad:?} ({secs:.1}s)"));
    assert!(ok);
}

#[test]
fn c04_nonexistence() {
    let t = Instant::now();
    let rejected = [1usize, 2, 5, 6].iter().all(|&d| build_inductive_quad(d).is_err());
    let none_1 = exhaustive_r_star_search(1).unwrap().is_none();
    let none_2 = exhaustive_r_star_search(2).unwrap().is_none();
    // The search is not vacuous: the single-edge graph is found for d' = 0.
    let found_0 = exhaustive_r_star_search(0).unwrap().is_some();
    let secs = t.elapsed().as_secs_f64();
    let ok = rejected && none_1 && none_2 && found_0 && secs < 60.0;
    report(
        4,
        "nonexistence",
        ok,
        &format!("rejects 1,2,5,6: {rejected}; no R* on 4 or 6 vertices: {}; ({secs:.2}s)", none_1 && none_2),
    );
    assert!(ok);
}

#[test]
fn c05_design_space() {
    let empty: Vec<usize> = (8..=128).filter(|&r| enumerate_configs(r).is_empty()).collect();
    let r64 = max_order(64).unwrap().best.order;
    // Brute-force oracle for radix 64 over every prime power q and every
    // supernode family, independent of the enumerator's ordering.
    let oracle64 = (2..64u64)
        .filter(|&q| is_prime_power(q as u32))
        .flat_map(|q| {
            let dp = 63 - q;
            let er = q * q + q + 1;
            let mut v = vec![er * (dp + 1)];
            if dp % 4 == 0 || dp % 4 == 3 {
                v.push(er * (2 * dp + 2));
            }
            if (2 * dp + 1) % 4 == 1 && is_prime_power(2 * dp as u32 + 1) {
                v.push(er * (2 * dp + 1));
            }
            v
        })
        .max()
        .unwrap();
    let eff128 = max_order(128).unwrap().best.moore_efficiency;
    let in_window = (0.27..=0.30).contains(&eff128);
    let ok = empty.is_empty() && r64 == 79_506 && oracle64 == r64 && in_window;
    report(
        5,
        "design space",
        ok,
        &format!(
            "empty radixes {empty:?}; radix 64 max {r64} (oracle {oracle64}); radix 128 efficiency {:.2}% (window 27-30%)",
            100.0 * eff128
        ),
    );
    assert!(empty.is_empty() && r64 == 79_506 && oracle64 == r64);
    if !in_window {
        // The leading-order order (8d^3 + 12d^2 + 18d)/27 over the Moore
        // bound approaches 8/27 from above; at d = 128 it already exceeds
        // 30%, so no construction on that curve fits the window.
        let d = 128f64;
        let approx = (8.0 * d.powi(3) + 12.0 * d.powi(2) + 18.0 * d) / 27.0 / moore_bound(128, 3) as f64;
        assert!(approx > 0.30 && eff128 > 8.0 / 27.0 && eff128 < 0.31, "eff {eff128} approx {approx}");
    }
}

#[test]
fn c06_simulated_config() {
    let topo = TopologySpec::Polarstar { q: 11, supernode: iq(3), endpoints: 5 }.build().unwrap();
    let diam = parallel_diameter(&topo.graph);
    let shape_ok = topo.routers() == 1064
        && topo.network_radix() == 15
        && topo.graph.regular_degree() == Some(15)
        && diam == Some(3)
        && topo.total_endpoints() == 5320;

    // Every split of 993 into an ER order times a supernode order.
    let mut matches = Vec::new();
    for q in 2u64..=31 {
        let er = q * q + q + 1;
        if !is_prime_power(q as u32) || 993 % er != 0 {
            continue;
        }
        let sn = 993 / er;
        let paley = sn % 4 == 1 && is_prime_power(sn as u32);
        let quad = sn % 2 == 0 && ((sn - 2) / 2 % 4 == 0 || (sn - 2) / 2 % 4 == 3);
        matches.push(format!("q={q} supernode order {sn} (Paley {paley}, IQ {quad}, complete true)"));
    }
    let structure_degree_nine = matches.iter().any(|m| m.starts_with("q=8 "));
    report(
        6,
        "simulated PolarStar config",
        shape_ok,
        &format!(
            "1064 routers, radix 15, diameter {diam:?}, {} endpoints; 993 factorisations: {matches:?}; \
             none with structure degree 9, entry recorded as inconsistent",
            topo.total_endpoints()
        ),
    );
    assert!(shape_ok);
    assert_eq!(matches.len(), 1);
    assert!(!structure_degree_nine);
}

#[test]
fn c07_layout() {
    let t = Instant::now();
    let mut stated_ok = true;
    let mut rest_ok = true;
    let mut parts = Vec::new();
    for q in [5u32, 7, 11] {
        let dp = 3;
        let ps = build_polarstar(q, iq(dp)).unwrap();
        let lay = layout_decompose(&ps).unwrap();
        let q = q as usize;
        let radix = ps.radix();
        rest_ok &= lay.clusters.len() == q + 1 && lay.clusters[0].len() == q + 1;
        rest_ok &= lay.bundle_sizes() == vec![2 * (radix - q)];
        let mut intra = Vec::new();
        for c in 1..=q {
            rest_ok &= lay.clusters[c].len() == q;
            rest_ok &= lay.triangles[c].len() == (q - 1) / 2;
            rest_ok &= lay.bundles_between(0, c) == q + 1;
            rest_ok &= (c + 1..=q).all(|d| lay.bundles_between(c, d) == q - 2);
            intra.push(lay.intra_cluster_bundles(c));
            // Independent count: the head joins its q - 1 members, and the
            // members pair up into (q - 1)/2 triangles with it.
            rest_ok &= lay.intra_cluster_bundles(c) == (q - 1) + (q - 1) / 2;
        }
        stated_ok &= intra.iter().all(|&b| b == (3 * q - 1) / 2);
        parts.push(format!("q={q}: intra {} (stated {})", intra[0], (3 * q - 1) / 2));
    }
    let secs = t.elapsed().as_secs_f64();
    rest_ok &= secs < 60.0;
    report(
        7,
        "layout",
        stated_ok && rest_ok,
        &format!(
            "{}; cluster sizes, triangles, q+1 and q-2 bundles, 2(d*-q) links: {rest_ok} ({secs:.1}s)",
            parts.join(", ")
        ),
    );
    // The stated intra-cluster count contradicts the triangle count; every
    // other quantity must hold.
    assert!(rest_ok);
}

fn sweep(topo: &Topology, kind: TrafficKind, scheme: RoutingScheme, loads: &[f64]) -> SaturationSweep {
    let table = RoutingTable::new(topo);
    let traffic = TrafficPattern::new(kind, topo, 1).unwrap();
    saturation_sweep(topo, &table, &traffic, scheme, &SimConfig::default(), loads).unwrap()
}

/// Load of the first saturated point, or infinity if none saturated.
fn onset(s: &SaturationSweep) -> f64 {
    s.reports.iter().find(|r| r.saturated).map_or(f64::INFINITY, |r| r.load)
}

#[test]
fn c08_simulation() {
    let t = Instant::now();
    let specs = [
        TopologySpec::Polarstar { q: 11, supernode: iq(3), endpoints: 5 },
        TopologySpec::Dragonfly { a: 12, h: 6, p: 6 },
        TopologySpec::Hyperx { s: 10, l: 3, p: 5 },
        TopologySpec::Fattree { levels: 3, p: 18 },
    ];
    let topos: Vec<Topology> = specs.iter().map(|s| s.build().unwrap()).collect();
    let schemes = [RoutingScheme::Min, RoutingScheme::MMin, RoutingScheme::Ugal];

    // (a) low-load latency against the hop-count limit. At 1% load the
    // queueing left on each link is a few hundredths of a cycle.
    let mut worst = (0.0f64, String::new());
    for topo in &topos {
        let table = RoutingTable::new(topo);
        let traffic = TrafficPattern::new(TrafficKind::Uniform, topo, 1).unwrap();
        let cfg = SimConfig { load: 0.01, ..SimConfig::default() };
        let zero = zero_load_latency(topo, &table, &traffic, cfg.packet_size);
        for scheme in schemes {
            let rep = simulate(topo, &table, &traffic, scheme, &cfg).unwrap();
            let excess = rep.average_latency / zero - 1.0;
            if excess.abs() > worst.0.abs() {
                worst = (excess, format!("{} {}", topo.name, scheme.short_name()));
            }
        }
    }
    let a_ok = worst.0.abs() <= 0.10;

    // (b) uniform traffic on the PolarStar.
    let grid = [0.1, 0.3, 0.5, 0.6, 0.7, 0.75, 0.8, 0.9, 1.0];
    let min = sweep(&topos[0], TrafficKind::Uniform, RoutingScheme::Min, &grid);
    let mmin = sweep(&topos[0], TrafficKind::Uniform, RoutingScheme::MMin, &grid);
    let b_ok = onset(&mmin) >= onset(&min) && mmin.saturation_load >= 0.7;

    // (c) adversarial traffic with UGAL.
    let grid = load_grid(0.1);
    let ps_adv = sweep(&topos[0], TrafficKind::AdversarialSupernode, RoutingScheme::Ugal, &grid);
    let df_adv = sweep(&topos[1], TrafficKind::AdversarialSupernode, RoutingScheme::Ugal, &grid);
    let c_ok = onset(&df_adv) < onset(&ps_adv);

    // (d) replay.
    let campaign = Campaign {
        topologies: vec![specs[0].clone(), specs[1].clone()],
        patterns: vec![TrafficKind::Uniform, TrafficKind::AdversarialSupernode],
        schemes: schemes.to_vec(),
        loads: vec![0.3],
        seeds: vec![7],
        sim: SimConfig { warmup: 500, measure: 500, ..SimConfig::default() },
    };
    let first = serde_json::to_string(&run_campaign(&campaign).unwrap().reports).unwrap();
    let second = serde_json::to_string(&run_campaign(&campaign).unwrap().reports).unwrap();
    let d_ok = first == second;

    let secs = t.elapsed().as_secs_f64();
    let ok = a_ok && b_ok && c_ok && d_ok && secs < 1800.0;
    report(
        8,
        "simulation",
        ok,
        &format!(
            "(a) worst low-load excess {:+.1}% at {}; (b) uniform onset MIN {} M_MIN {} (M_MIN stable at {}); \
             (c) adversarial UGAL onset DF {} PS {}; (d) replay identical {d_ok}; ({secs:.0}s)",
            100.0 * worst.0,
            worst.1,
            onset(&min),
            onset(&mmin),
            mmin.saturation_load,
            onset(&df_adv),
            onset(&ps_adv)
        ),
    );
    assert!(ok);
}

#[test]
fn c09_bisection() {
    let mut ok = true;
    let mut explained = true;
    let mut parts = Vec::new();
    for radix in [12, 16, 20, 24] {
        let best = max_order(radix).unwrap().best;
        let ps = build_polarstar(best.q, best.supernode).unwrap();
        let df = TopologySpec::dragonfly_for_radix(radix).build().unwrap();
        let ps_cut = bisection_estimate(&ps.graph, 8, 1);
        let df_cut = bisection_estimate(&df.graph, 8, 1);
        let here = (0.20..=0.40).contains(&ps_cut.fraction) && ps_cut.fraction >= df_cut.fraction;
        ok &= here;
        parts.push(format!("r{radix}: PS {:.3} DF {:.3}", ps_cut.fraction, df_cut.fraction));
        if !here {
            // A failure is acceptable only when it is certified: the returned
            // partition must be balanced, its cut recounted, and below 0.20,
            // which bounds the minimum bisection from above.
            let ones = ps_cut.side.iter().filter(|&&x| x).count();
            let recount = ps.graph.edges().filter(|&(u, v)| ps_cut.side[u] != ps_cut.side[v]).count();
            explained &= ones * 2 == ps.graph.n() && recount == ps_cut.cut_edges && ps_cut.fraction < 0.20;
        }
        // Splitting every supernode along the same f-closed half cuts no
        // structure edge; it exists when the supernode order is 0 mod 4.
        if let Some(split) = supernode_split_cut(&ps) {
            parts.last_mut().unwrap().push_str(&format!(" (supernode split {:.3})", split.fraction));
            explained &= ps_cut.fraction <= split.fraction + 1e-12;
        }
    }
    report(9, "bisection", ok, &parts.join(", "));
    assert!(ok || explained);
}

#[test]
fn c10_fault_tolerance() {
    let ps = build_polarstar(11, iq(3)).unwrap();
    let s = fault_sweep(&ps.graph, 100, 0.01, 1);
    let connected: Vec<_> = s.median_curve.samples.iter().filter(|x| x.connected).collect();
    let monotone = connected.windows(2).all(|w| {
        w[0].diameter <= w[1].diameter && w[0].average_path_length.unwrap() <= w[1].average_path_length.unwrap() + 1e-12
    });
    let ok = s.median_disconnection_ratio >= 0.45 && monotone && s.disconnection_ratios.len() == 100;
    report(
        10,
        "fault tolerance",
        ok,
        &format!(
            "median disconnection ratio {:.3} over 100 trials; diameter/APL monotone over {} samples: {monotone}",
            s.median_disconnection_ratio,
            connected.len()
        ),
    );
    assert!(ok);
}
