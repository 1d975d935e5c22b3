//! Design space of PolarStar: feasible `(q, supernode)` splits per radix,
//! the maximum-order choice, and reference curves (Moore bound, StarMax,
//! Dragonfly, HyperX) for comparing scalability.

use serde::Serialize;
use thiserror::Error;

use crate::factor::SupernodeKind;
use crate::galois::is_prime_power;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DesignError {
    #[error("EmptyDesignSpace: no PolarStar configuration has radix {0}")]
    EmptyDesignSpace(usize),
}

/// `1 + d * sum_{i < D} (d - 1)^i`.
pub fn moore_bound(degree: u64, diameter: u32) -> u128 {
    let d = degree as u128;
    1 + d * (0..diameter).map(|i| (d.saturating_sub(1)).pow(i)).sum::<u128>()
}

/// One feasible PolarStar design point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolarStarConfig {
    pub radix: usize,
    pub q: u32,
    pub structure_degree: usize,
    pub supernode: SupernodeKind,
    pub supernode_degree: usize,
    pub order: u64,
    pub moore_efficiency: f64,
}

impl PolarStarConfig {
    fn new(radix: usize, q: u32, supernode: SupernodeKind, supernode_order: u64) -> Self {
        let structure = (q as u64) * (q as u64) + q as u64 + 1;
        let order = structure * supernode_order;
        PolarStarConfig {
            radix,
            q,
            structure_degree: q as usize + 1,
            supernode,
            supernode_degree: radix - q as usize - 1,
            order,
            moore_efficiency: order as f64 / moore_bound(radix as u64, 3) as f64,
        }
    }

    pub fn kind_rank(&self) -> u8 {
        match self.supernode {
            SupernodeKind::InductiveQuad { .. } => 0,
            SupernodeKind::Paley { .. } => 1,
            SupernodeKind::Complete { .. } => 2,
        }
    }
}

/// Every feasible configuration of the given radix, largest order first.
/// Ties prefer larger `q`, then Inductive-Quad over Paley over complete.
pub fn enumerate_configs(radix: usize) -> Vec<PolarStarConfig> {
    let mut out = Vec::new();
    for q in (2..radix as u32).filter(|&q| is_prime_power(q)) {
        let dp = radix - q as usize - 1;
        if dp % 4 == 0 || dp % 4 == 3 {
            out.push(PolarStarConfig::new(radix, q, SupernodeKind::InductiveQuad { degree: dp }, 2 * dp as u64 + 2));
        }
        let paley = 2 * dp as u32 + 1;
        if paley % 4 == 1 && is_prime_power(paley) {
            out.push(PolarStarConfig::new(radix, q, SupernodeKind::Paley { order: paley }, paley as u64));
        }
        out.push(PolarStarConfig::new(radix, q, SupernodeKind::Complete { order: dp + 1 }, dp as u64 + 1));
    }
    out.sort_by(|a, b| {
        b.order
            .cmp(&a.order)
            .then(b.q.cmp(&a.q))
            .then(a.kind_rank().cmp(&b.kind_rank()))
    });
    out
}

/// Stationary point of `(q^2 + q + 1)(2d - 2q)` over real `q`:
/// `((d - 1) + sqrt((d - 1)(d + 2))) / 3`.
pub fn analytic_optimal_q(radix: usize) -> f64 {
    let d = radix as f64;
    ((d - 1.0) + ((d - 1.0) * (d + 2.0)).sqrt()) / 3.0
}

/// Closed-form approximation of the maximum Inductive-Quad order,
/// `(8d^3 + 12d^2 + 18d) / 27`, from substituting `q = 2d/3`.
pub fn approx_max_order(radix: usize) -> f64 {
    let d = radix as f64;
    (8.0 * d.powi(3) + 12.0 * d.powi(2) + 18.0 * d) / 27.0
}

#[derive(Debug, Clone, Serialize)]
pub struct MaxOrder {
    pub best: PolarStarConfig,
    pub analytic_q: f64,
    pub approx_order: f64,
}

pub fn max_order(radix: usize) -> Result<MaxOrder, DesignError> {
    let best = *enumerate_configs(radix).first().ok_or(DesignError::EmptyDesignSpace(radix))?;
    Ok(MaxOrder { best, analytic_q: analytic_optimal_q(radix), approx_order: approx_max_order(radix) })
}

/// Upper bound on star products with an R* supernode: the best split of
/// `(d^2 + 1)(2d' + 2)` over `d + d' = radix`, `d >= 1`.
pub fn starmax(radix: usize) -> u64 {
    (1..=radix as u64)
        .map(|d| (d * d + 1) * (2 * (radix as u64 - d) + 2))
        .max()
        .unwrap_or(0)
}

/// Canonical Dragonfly (`a = 2h`, `p = h`) with the largest `h` such that the
/// network radix `a - 1 + h` fits; order is `a(ah + 1)` routers.
pub fn dragonfly_order(radix: usize) -> u64 {
    let h = (radix as u64 + 1) / 3;
    let a = 2 * h;
    a * (a * h + 1)
}

/// Largest 3-D HyperX `S^3` with network radix `3(S - 1) <= radix`.
pub fn hyperx_order(radix: usize) -> u64 {
    let s = radix as u64 / 3 + 1;
    s.pow(3)
}

/// One row of the scalability comparison.
#[derive(Debug, Clone, Serialize)]
pub struct EfficiencyRow {
    pub radix: usize,
    pub moore_bound: u128,
    pub polarstar_order: u64,
    pub polarstar_q: u32,
    pub polarstar_supernode: String,
    pub polarstar_efficiency: f64,
    pub starmax: u64,
    pub dragonfly_order: u64,
    pub hyperx_order: u64,
}

impl EfficiencyRow {
    pub const CSV_HEADER: &'static str =
        "radix,moore_bound,polarstar_order,polarstar_q,polarstar_supernode,polarstar_efficiency,starmax,dragonfly_order,hyperx_order";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6},{},{},{}",
            self.radix,
            self.moore_bound,
            self.polarstar_order,
            self.polarstar_q,
            self.polarstar_supernode,
            self.polarstar_efficiency,
            self.starmax,
            self.dragonfly_order,
            self.hyperx_order
        )
    }
}

pub fn efficiency_table(radixes: impl IntoIterator<Item = usize>) -> Result<Vec<EfficiencyRow>, DesignError> {
    radixes
        .into_iter()
        .map(|radix| {
            let best = max_order(radix)?.best;
            Ok(EfficiencyRow {
                radix,
                moore_bound: moore_bound(radix as u64, 3),
                polarstar_order: best.order,
                polarstar_q: best.q,
                polarstar_supernode: best.supernode.to_string(),
                polarstar_efficiency: best.moore_efficiency,
                starmax: starmax(radix),
                dragonfly_order: dragonfly_order(radix),
                hyperx_order: hyperx_order(radix),
            })
        })
        .collect()
}

/// All configurations, over the given radixes, whose order is exactly `order`.
pub fn configs_with_order(order: u64, radixes: impl IntoIterator<Item = usize>) -> Vec<PolarStarConfig> {
    radixes
        .into_iter()
        .flat_map(enumerate_configs)
        .filter(|c| c.order == order)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moore_bound_values() {
        assert_eq!(moore_bound(18, 3), 5527);
        assert_eq!(moore_bound(2, 2), 5);
        assert_eq!(moore_bound(57, 2), 3250);
        for d in 2..50u64 {
            assert_eq!(moore_bound(d, 3), (d * d * d - d * d + d + 1) as u128);
        }
    }

    #[test]
    fn record_radixes() {
        let top = max_order(18).unwrap().best;
        assert_eq!((top.q, top.supernode, top.order), (13, SupernodeKind::InductiveQuad { degree: 4 }, 1830));
        let top = max_order(19).unwrap().best;
        assert_eq!((top.q, top.order), (11, 2128));
        let top = max_order(20).unwrap().best;
        assert_eq!((top.q, top.order), (11, 2394));
        assert_eq!(max_order(64).unwrap().best.order, 79_506);
    }

    #[test]
    fn radix_15_contains_table_three_points() {
        let configs = enumerate_configs(15);
        assert!(configs
            .iter()
            .any(|c| c.q == 11 && c.supernode == SupernodeKind::InductiveQuad { degree: 3 } && c.order == 1064));
        let paley: Vec<_> = configs.iter().filter(|c| matches!(c.supernode, SupernodeKind::Paley { .. })).collect();
        assert_eq!(paley.len(), 2);
        assert!(paley.iter().any(|c| c.q == 8 && c.order == 949));
        assert!(paley.iter().any(|c| c.q == 2 && c.order == 175));
    }

    #[test]
    fn every_enumerated_config_is_feasible() {
        for radix in 8..=40 {
            let configs = enumerate_configs(radix);
            assert!(!configs.is_empty());
            for c in &configs {
                assert!(is_prime_power(c.q));
                assert_eq!(c.structure_degree + c.supernode_degree, radix);
                let structure = (c.q as u64).pow(2) + c.q as u64 + 1;
                match c.supernode {
                    SupernodeKind::InductiveQuad { degree } => {
                        assert!(degree % 4 == 0 || degree % 4 == 3);
                        assert_eq!(c.order, structure * (2 * degree as u64 + 2));
                    }
                    SupernodeKind::Paley { order } => {
                        assert_eq!(order % 4, 1);
                        assert_eq!(c.order, structure * order as u64);
                    }
                    SupernodeKind::Complete { order } => assert_eq!(c.order, structure * order as u64),
                }
            }
            assert!(configs.windows(2).all(|w| w[0].order >= w[1].order));
        }
    }

    #[test]
    fn analytic_optimum_matches_numeric_maximisation() {
        for radix in [12usize, 18, 30, 64, 128] {
            let d = radix as f64;
            let order = |q: f64| (q * q + q + 1.0) * (2.0 * d - 2.0 * q);
            // Golden-section-free brute scan on a fine grid.
            let best = (0..=(radix * 10_000))
                .map(|i| i as f64 / 10_000.0)
                .max_by(|a, b| order(*a).partial_cmp(&order(*b)).unwrap())
                .unwrap();
            assert!((analytic_optimal_q(radix) - best).abs() < 1e-3, "radix {radix}");
        }
        let q = analytic_optimal_q(18);
        assert!(q > 11.0 && q < 13.0);
    }

    #[test]
    fn enumerated_max_below_closed_form() {
        for radix in 8..=128 {
            let m = max_order(radix).unwrap();
            assert!((m.best.order as f64) <= m.approx_order * 1.05, "radix {radix}");
            assert!(m.best.order <= starmax(radix));
        }
    }

    #[test]
    fn starmax_brute_force() {
        fn oracle(radix: u64) -> u64 {
            let mut best = 0;
            for d in 1..=radix {
                let dp = radix - d;
                best = best.max(moore_bound(d, 2) as u64 * (2 * dp + 2));
            }
            best
        }
        assert_eq!(starmax(3), 20);
        assert_eq!(starmax(18), oracle(18));
        for r in 3..200usize {
            assert_eq!(starmax(r), oracle(r as u64));
            assert!(starmax(r + 1) > starmax(r));
        }
    }

    #[test]
    fn efficiencies_and_asymptote() {
        let rows = efficiency_table([18, 19, 20, 128]).unwrap();
        let pct: Vec<f64> = rows.iter().map(|r| r.polarstar_efficiency * 100.0).collect();
        assert!((pct[0] - 33.1).abs() < 0.05);
        assert!((pct[1] - 32.6).abs() < 0.05);
        assert!((pct[2] - 31.4).abs() < 0.05);
        assert!(pct[3] > 29.6 && pct[3] < 31.0);
    }

    #[test]
    fn baseline_orders() {
        assert_eq!(dragonfly_order(17), 12 * (12 * 6 + 1));
        assert_eq!(hyperx_order(27), 1000);
        // Large-radix Dragonfly efficiency approaches 4/27 and HyperX 1/27.
        let r = 1000;
        let mb = moore_bound(r as u64, 3) as f64;
        assert!((dragonfly_order(r) as f64 / mb - 4.0 / 27.0).abs() < 0.01);
        assert!(hyperx_order(r) as f64 / mb < 0.05);
    }

    #[test]
    fn finds_configs_by_order() {
        let hits = configs_with_order(1064, 8..=40);
        assert!(hits.iter().any(|c| c.radix == 15 && c.q == 11));
        let hits = configs_with_order(993, 8..=128);
        assert_eq!(hits.len(), 1);
        assert_eq!((hits[0].radix, hits[0].q, hits[0].supernode_degree), (32, 31, 0));
    }
}
