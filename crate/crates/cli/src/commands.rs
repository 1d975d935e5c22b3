use std::fs;
use std::path::Path;

use polarstar::analysis::{bisection_estimate, distance_stats, fault_sweep, layout_decompose};
use polarstar::design::{efficiency_table, enumerate_configs, DesignError, EfficiencyRow};
use polarstar::factor::{check_property_r, check_property_r1, check_property_r_star};
use polarstar::graph::SCHEMA_VERSION;
use polarstar::sim::{run_campaign, Campaign, RoutingScheme, TrafficKind};
use polarstar::star::parallel_diameter;
use serde_json::json;

use crate::args::{
    AnalyzeArgs, Check, Command, Common, DesignSpaceArgs, Format, Metric, PatternArg, RoutingArg, SimulateArgs,
    TopologyArgs, VerifyArgs,
};
use crate::error::CliError;
use crate::output::emit;
use crate::source::{network_spec, resolve, Source};

/// Runs one subcommand; the returned code is the process exit status.
pub fn run(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Generate { topo, common } => graph_out(&topo, &common, Format::Edgelist),
        Command::Export { topo, common } => graph_out(&topo, &common, Format::Json),
        Command::Verify(a) => verify(&a),
        Command::DesignSpace(a) => design_space(&a),
        Command::Analyze(a) => analyze(&a),
        Command::Layout { topo, common } => layout(&topo, &common),
        Command::Simulate(a) => simulate(&a),
    }
}

fn unsupported(format: Format, what: &str) -> CliError {
    CliError::Validation(format!("UnsupportedFormat: {format:?} output is not available for {what}"))
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serialises");
    s.push('\n');
    s
}

fn graph_out(topo: &TopologyArgs, common: &Common, default: Format) -> Result<u8, CliError> {
    let src = resolve(topo)?;
    let text = match common.format.unwrap_or(default) {
        Format::Edgelist => src.graph().to_edge_list(),
        Format::Json => {
            let mut s = src.envelope().to_json();
            s.push('\n');
            s
        }
        Format::Dot => src.graph().to_dot(&src.name()),
        f @ Format::Csv => return Err(unsupported(f, "graphs")),
    };
    emit(common.output.as_deref(), &text)?;
    Ok(0)
}

struct CheckResult {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn verify(a: &VerifyArgs) -> Result<u8, CliError> {
    let src = resolve(&a.topo)?;
    let g = src.graph();
    let (er, sn) = src.factors()?;
    let all = a.check.contains(&Check::All);
    let explicit = |c: Check| a.check.contains(&c);
    let mut results = Vec::new();

    if all || explicit(Check::Order) {
        let expected = a.order.or(match (&er, &sn) {
            (Some(er), Some(sn)) if !matches!(src, Source::Er(_)) => Some(er.graph.n() * sn.n()),
            _ => None,
        });
        let n = g.n();
        results.push(match expected {
            Some(e) => CheckResult { name: "order", passed: n == e, detail: format!("{n} vertices (expected {e})") },
            None => CheckResult { name: "order", passed: true, detail: format!("{n} vertices (no expectation)") },
        });
    }
    if all || explicit(Check::Degree) {
        let bound = if explicit(Check::Degree) { a.max } else { None }.or(match &src {
            Source::PolarStar(ps) => Some(ps.radix()),
            _ => match (&er, &sn) {
                (Some(er), Some(sn)) => Some(er.q as usize + 1 + sn.degree()),
                _ => None,
            },
        });
        let d = g.max_degree();
        results.push(match bound {
            Some(b) => CheckResult { name: "degree", passed: d <= b, detail: format!("max degree {d} (bound {b})") },
            None => CheckResult { name: "degree", passed: true, detail: format!("max degree {d} (no bound)") },
        });
    }
    if explicit(Check::Regular) {
        let r = g.regular_degree();
        results.push(CheckResult {
            name: "regular",
            passed: r.is_some(),
            detail: r.map_or(format!("degrees {}..{}", g.min_degree(), g.max_degree()), |d| format!("{d}-regular")),
        });
    }
    if all || explicit(Check::Diameter) {
        let bound = if explicit(Check::Diameter) { a.max.unwrap_or(3) } else { 3 };
        let bound = match (&src, explicit(Check::Diameter)) {
            (Source::Er(_), false) => 2,
            _ => bound,
        };
        let d = parallel_diameter(g);
        results.push(CheckResult {
            name: "diameter",
            passed: d.is_some_and(|d| d <= bound),
            detail: d.map_or("disconnected".into(), |d| format!("diameter {d} (bound {bound})")),
        });
    }
    if all || explicit(Check::R) {
        match &er {
            Some(er) => {
                let ok = check_property_r(&er.graph, 2);
                results.push(CheckResult { name: "r", passed: ok, detail: format!("ER_{} walk cover", er.q) });
            }
            None if !all => return Err(CliError::Validation("MissingFactor: property R needs an ER structure graph".into())),
            None => {}
        }
    }
    if all || explicit(Check::RStar) || explicit(Check::R1) {
        match &sn {
            Some(s) => {
                if explicit(Check::RStar) || (all && s.property.has_r_star()) {
                    let ok = check_property_r_star(s)?;
                    results.push(CheckResult { name: "r_star", passed: ok, detail: format!("{} supernode", s.kind) });
                }
                if explicit(Check::R1) || (all && s.property.has_r1()) {
                    let ok = check_property_r1(s)?;
                    results.push(CheckResult { name: "r1", passed: ok, detail: format!("{} supernode", s.kind) });
                }
            }
            None if !all => {
                return Err(CliError::Validation("MissingFactor: supernode properties need a supernode graph".into()))
            }
            None => {}
        }
    }

    let text = match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("check,passed,detail\n");
            for r in &results {
                s.push_str(&format!("{},{},{}\n", r.name, r.passed, r.detail));
            }
            s
        }
        Format::Json => pretty(&json!({
            "schema_version": SCHEMA_VERSION,
            "passed": results.iter().all(|r| r.passed),
            "checks": results.iter().map(|r| json!({"check": r.name, "passed": r.passed, "detail": r.detail})).collect::<Vec<_>>(),
        })),
        f => return Err(unsupported(f, "verify")),
    };
    emit(a.common.output.as_deref(), &text)?;
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(0)
    } else {
        eprintln!("error: InvariantViolation: failed checks: {}", failed.join(", "));
        Ok(2)
    }
}

fn design_space(a: &DesignSpaceArgs) -> Result<u8, CliError> {
    let radixes: Vec<usize> = match a.radix {
        Some(r) => vec![r],
        None => (a.radix_min..=a.radix_max).collect(),
    };
    let format = a.common.format.unwrap_or(Format::Csv);
    let text = if a.all {
        let mut configs = Vec::new();
        for &r in &radixes {
            let c = enumerate_configs(r);
            if c.is_empty() {
                return Err(DesignError::EmptyDesignSpace(r).into());
            }
            configs.extend(c);
        }
        match format {
            Format::Csv => {
                let mut s = String::from("radix,q,structure_degree,supernode,supernode_degree,order,moore_efficiency\n");
                for c in &configs {
                    s.push_str(&format!(
                        "{},{},{},{},{},{},{:.6}\n",
                        c.radix, c.q, c.structure_degree, c.supernode, c.supernode_degree, c.order, c.moore_efficiency
                    ));
                }
                s
            }
            Format::Json => pretty(&json!({ "schema_version": SCHEMA_VERSION, "configs": configs })),
            f => return Err(unsupported(f, "design-space")),
        }
    } else {
        let rows = efficiency_table(radixes)?;
        match format {
            Format::Csv => {
                let mut s = format!("{}\n", EfficiencyRow::CSV_HEADER);
                for r in &rows {
                    s.push_str(&r.to_csv());
                    s.push('\n');
                }
                s
            }
            Format::Json => pretty(&json!({ "schema_version": SCHEMA_VERSION, "rows": rows })),
            f => return Err(unsupported(f, "design-space")),
        }
    };
    emit(a.common.output.as_deref(), &text)?;
    Ok(0)
}

fn analyze(a: &AnalyzeArgs) -> Result<u8, CliError> {
    let src = resolve(&a.topo)?;
    let g = src.graph();
    let seed = a.common.seed;
    let mut report = json!({
        "schema_version": SCHEMA_VERSION,
        "topology": src.name(),
        "vertices": g.n(),
        "edges": g.edge_count(),
        "seed": seed,
    });
    let mut rows: Vec<(String, String)> =
        vec![("vertices".into(), g.n().to_string()), ("edges".into(), g.edge_count().to_string())];
    if a.metrics.contains(&Metric::Distances) {
        let d = distance_stats(g)?;
        report["distances"] = json!(d);
        rows.push(("diameter".into(), d.diameter.to_string()));
        rows.push(("average_path_length".into(), format!("{:.6}", d.average_path_length)));
    }
    if a.metrics.contains(&Metric::Bisection) {
        let b = bisection_estimate(g, a.starts, seed);
        report["bisection"] = json!({
            "cut_edges": b.cut_edges,
            "total_edges": b.total_edges,
            "fraction": b.fraction,
            "starts": a.starts,
        });
        rows.push(("bisection_cut_edges".into(), b.cut_edges.to_string()));
        rows.push(("bisection_fraction".into(), format!("{:.6}", b.fraction)));
    }
    if a.metrics.contains(&Metric::Faults) {
        if !(a.step > 0.0 && a.step <= 1.0) || a.trials == 0 {
            return Err(CliError::Validation("InvalidParameters: fault sweep needs trials >= 1 and step in (0, 1]".into()));
        }
        let f = fault_sweep(g, a.trials, a.step, seed);
        rows.push(("fault_trials".into(), a.trials.to_string()));
        rows.push(("fault_median_disconnection_ratio".into(), format!("{:.6}", f.median_disconnection_ratio)));
        report["faults"] = json!(f);
    }
    let text = match a.common.format.unwrap_or(Format::Json) {
        Format::Json => pretty(&report),
        Format::Csv => {
            let mut s = String::from("metric,value\n");
            for (k, v) in rows {
                s.push_str(&format!("{k},{v}\n"));
            }
            s
        }
        f => return Err(unsupported(f, "analyze")),
    };
    emit(a.common.output.as_deref(), &text)?;
    Ok(0)
}

fn layout(topo: &TopologyArgs, common: &Common) -> Result<u8, CliError> {
    let ps = resolve(topo)?.polarstar()?;
    let lay = layout_decompose(&ps)?;
    let text = match common.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut v = lay.summary();
            v["schema_version"] = json!(SCHEMA_VERSION);
            pretty(&v)
        }
        Format::Csv => {
            let k = lay.clusters.len();
            let mut s = String::from("cluster_a,cluster_b,bundles\n");
            for x in 0..k {
                for y in x..k {
                    s.push_str(&format!("{x},{y},{}\n", lay.bundles_between(x, y)));
                }
            }
            s
        }
        f => return Err(unsupported(f, "layout")),
    };
    emit(common.output.as_deref(), &text)?;
    Ok(0)
}

fn read_campaign(path: &Path) -> Result<Campaign, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("IoError: {}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| e.to_string())
    } else {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::Validation(format!("ParseError: {}: {e}", path.display())))
}

fn simulate(a: &SimulateArgs) -> Result<u8, CliError> {
    let mut campaign = match &a.config {
        Some(path) => read_campaign(path)?,
        None => Campaign {
            topologies: vec![network_spec(&a.topo)?],
            patterns: a
                .pattern
                .iter()
                .map(|p| match p {
                    PatternArg::Uniform => TrafficKind::Uniform,
                    PatternArg::Perm => TrafficKind::RandomRouterPermutation,
                    PatternArg::Shuffle => TrafficKind::BitShuffle,
                    PatternArg::Reverse => TrafficKind::BitReverse,
                    PatternArg::Adversarial => TrafficKind::AdversarialSupernode,
                })
                .collect(),
            schemes: a
                .routing
                .iter()
                .map(|r| match r {
                    RoutingArg::Min => RoutingScheme::Min,
                    RoutingArg::Mmin => RoutingScheme::MMin,
                    RoutingArg::Ugal => RoutingScheme::Ugal,
                })
                .collect(),
            loads: a.load.clone(),
            seeds: vec![a.common.seed],
            sim: Default::default(),
        },
    };
    if let Some(c) = a.cycles {
        campaign.sim.measure = c;
    }
    if let Some(w) = a.warmup {
        campaign.sim.warmup = w;
    }
    let result = run_campaign(&campaign)?;
    for s in &result.skipped {
        eprintln!("warning: PatternInfeasible: {s}");
    }
    let text = match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => result.to_csv(),
        Format::Json => pretty(&json!({
            "schema_version": SCHEMA_VERSION,
            "sim": campaign.sim,
            "reports": result.reports,
            "skipped": result.skipped,
        })),
        f => return Err(unsupported(f, "simulate")),
    };
    emit(a.common.output.as_deref(), &text)?;
    Ok(0)
}
