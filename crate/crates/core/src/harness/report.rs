use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{csv_err, io_err, GradcheckConfig, HarnessError};
use crate::dp::{self, DpGrid};
use crate::nn::{gradient_check, DenseNet};
use crate::profiles::LoadProfile;
use crate::seeding::rng;
use crate::sim::{write_log, CostBreakdown, LogRow, Mode, ShipConfig};
use crate::strategy::{rollout, Strategy};

/// Cost and emissions of one voyage under one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoyageRow {
    pub strategy: String,
    pub profile_id: String,
    pub termination: String,
    pub cost: CostBreakdown,
}

/// One line of the voyage-average table; one value per strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub item: String,
    pub cost: Vec<f64>,
    pub gwp_kg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub labels: Vec<String>,
    pub voyages: Vec<VoyageRow>,
    /// PEMFC, Battery, Electricity, H2 and their Sum, averaged per voyage.
    pub rows: Vec<ReportRow>,
}

/// `b / a` in percent; equal values (including both zero) give exactly 100.
pub fn ratio_pct(a: f64, b: f64) -> f64 {
    if a == b {
        100.0
    } else {
        b / a * 100.0
    }
}

fn component_rows(means: &[CostBreakdown]) -> Vec<ReportRow> {
    let row = |item: &str, cost: fn(&CostBreakdown) -> f64, gwp: fn(&CostBreakdown) -> f64| ReportRow {
        item: item.to_string(),
        cost: means.iter().map(cost).collect(),
        gwp_kg: means.iter().map(gwp).collect(),
    };
    let mut rows = vec![
        row("PEMFC", |c| c.c_f, |_| 0.0),
        row("Battery", |c| c.c_b, |_| 0.0),
        row("Electricity", |c| c.c_e, |c| c.gwp_elec_kg),
        row("H2", |c| c.c_h, |c| c.gwp_h2_kg),
    ];
    let n = means.len();
    let sum = |f: fn(&ReportRow) -> &Vec<f64>| -> Vec<f64> {
        (0..n).map(|j| rows.iter().fold(0.0, |acc, r| acc + f(r)[j])).collect()
    };
    let total = ReportRow {
        item: "Sum".into(),
        cost: sum(|r| &r.cost),
        gwp_kg: sum(|r| &r.gwp_kg),
    };
    rows.push(total);
    rows
}

/// Deterministic evaluation-mode rollouts of each strategy on every profile. Trajectory
/// logs go to `trajectories/<label>_<profile>.csv` under `log_dir` when given.
pub fn evaluate(
    strategies: &mut [(String, Box<dyn Strategy>)],
    profiles: &[LoadProfile],
    ship: &ShipConfig,
    log_dir: Option<&Path>,
) -> Result<CostReport, HarnessError> {
    if profiles.is_empty() {
        return Err(HarnessError::InvalidConfig("no profiles to evaluate".into()));
    }
    let traj_dir = log_dir.map(|d| d.join("trajectories"));
    if let Some(d) = &traj_dir {
        std::fs::create_dir_all(d).map_err(io_err(d))?;
    }
    let mut voyages = Vec::new();
    let mut means = Vec::new();
    for (label, s) in strategies.iter_mut() {
        let mut acc = CostBreakdown::default();
        for p in profiles {
            let r = rollout(s.as_mut(), p, ship, Mode::Evaluate)?;
            if let Some(d) = &traj_dir {
                let rows: Vec<LogRow> = r.records.iter().map(LogRow::from).collect();
                write_log(&d.join(format!("{label}_{}.csv", p.id)), &rows, ship.n_clusters)?;
            }
            acc += r.cost;
            voyages.push(VoyageRow {
                strategy: label.clone(),
                profile_id: p.id.clone(),
                termination: r.termination.as_str().to_string(),
                cost: r.cost,
            });
        }
        means.push(scale(acc, 1.0 / profiles.len() as f64));
    }
    Ok(CostReport {
        labels: strategies.iter().map(|(l, _)| l.clone()).collect(),
        voyages,
        rows: component_rows(&means),
    })
}

fn scale(c: CostBreakdown, k: f64) -> CostBreakdown {
    CostBreakdown {
        c_b: c.c_b * k,
        c_f: c.c_f * k,
        c_h: c.c_h * k,
        c_e: c.c_e * k,
        h2_kg: c.h2_kg * k,
        shore_kwh: c.shore_kwh * k,
        gwp_h2_kg: c.gwp_h2_kg * k,
        gwp_elec_kg: c.gwp_elec_kg * k,
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Table layout: `item, cost_<label>.., [cost_ratio_pct], gwp_kg_<label>.., [gwp_ratio_pct]`.
/// Ratio columns compare the second strategy with the first.
pub fn write_report_csv(path: &Path, report: &CostReport) -> Result<(), HarnessError> {
    let two = report.labels.len() == 2;
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header = vec!["item".to_string()];
    header.extend(report.labels.iter().map(|l| format!("cost_{l}")));
    if two {
        header.push("cost_ratio_pct".into());
    }
    header.extend(report.labels.iter().map(|l| format!("gwp_kg_{l}")));
    if two {
        header.push("gwp_ratio_pct".into());
    }
    w.write_record(&header).map_err(csv_err(path))?;
    for r in &report.rows {
        let mut rec = vec![r.item.clone()];
        rec.extend(r.cost.iter().map(|v| num(*v)));
        if two {
            rec.push(num(ratio_pct(r.cost[0], r.cost[1])));
        }
        rec.extend(r.gwp_kg.iter().map(|v| num(*v)));
        if two {
            rec.push(num(ratio_pct(r.gwp_kg[0], r.gwp_kg[1])));
        }
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Per-voyage breakdown: `strategy, profile_id, termination, c_f, c_b, c_e, c_h, total, gwp_kg`.
pub fn write_voyages_csv(path: &Path, report: &CostReport) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["strategy", "profile_id", "termination", "c_f", "c_b", "c_e", "c_h", "total", "gwp_kg"])
        .map_err(csv_err(path))?;
    for v in &report.voyages {
        let c = &v.cost;
        w.write_record([
            v.strategy.clone(),
            v.profile_id.clone(),
            v.termination.clone(),
            num(c.c_f),
            num(c.c_b),
            num(c.c_e),
            num(c.c_h),
            num(c.total()),
            num(c.gwp_kg()),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub profile_id: String,
    pub dp_cost: f64,
    pub dp_gwp_kg: f64,
    pub costs: Vec<f64>,
    pub gwp_kg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub labels: Vec<String>,
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkTable {
    pub fn mean_dp(&self) -> f64 {
        self.rows.iter().map(|r| r.dp_cost).sum::<f64>() / self.rows.len().max(1) as f64
    }

    pub fn mean_cost(&self, j: usize) -> f64 {
        self.rows.iter().map(|r| r.costs[j]).sum::<f64>() / self.rows.len().max(1) as f64
    }

    /// Average voyage cost of strategy `j` as a percentage of the DP average.
    pub fn ratio_to_dp(&self, j: usize) -> f64 {
        ratio_pct(self.mean_dp(), self.mean_cost(j))
    }
}

/// DP oracle and evaluation-mode rollouts on every profile. The DP figure is the cost of its
/// plan replayed on the exact environment. Each DP solution is exported under `dp_dir` when given.
pub fn benchmark(
    strategies: &mut [(String, Box<dyn Strategy>)],
    profiles: &[LoadProfile],
    ship: &ShipConfig,
    grid: &DpGrid,
    dp_dir: Option<&Path>,
) -> Result<BenchmarkTable, HarnessError> {
    if let Some(d) = dp_dir {
        std::fs::create_dir_all(d).map_err(io_err(d))?;
    }
    let solutions = profiles
        .par_iter()
        .map(|p| dp::solve(p, ship, grid))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::with_capacity(profiles.len());
    for (p, sol) in profiles.iter().zip(&solutions) {
        if let Some(d) = dp_dir {
            sol.export(d, &format!("dp_{}", p.id), ship.n_clusters)?;
        }
        let mut costs = Vec::new();
        let mut gwp_kg = Vec::new();
        for (_, s) in strategies.iter_mut() {
            let r = rollout(s.as_mut(), p, ship, Mode::Evaluate)?;
            costs.push(r.cost.total());
            gwp_kg.push(r.cost.gwp_kg());
        }
        rows.push(BenchmarkRow {
            profile_id: p.id.clone(),
            dp_cost: sol.summary.realized_cost,
            dp_gwp_kg: sol.summary.realized_breakdown.gwp_kg(),
            costs,
            gwp_kg,
        });
    }
    Ok(BenchmarkTable {
        labels: strategies.iter().map(|(l, _)| l.clone()).collect(),
        rows,
    })
}

/// Per voyage: `profile_id, ddp_cost, <label>_cost, <label>_ratio_pct..`, then a `mean` row.
pub fn write_benchmark_csv(path: &Path, table: &BenchmarkTable) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header = vec!["profile_id".to_string(), "ddp_cost".to_string()];
    for l in &table.labels {
        header.push(format!("{l}_cost"));
        header.push(format!("{l}_ratio_pct"));
    }
    w.write_record(&header).map_err(csv_err(path))?;
    let mut line = |id: String, dp: f64, costs: Vec<f64>| -> Result<(), HarnessError> {
        let mut rec = vec![id, num(dp)];
        for c in costs {
            rec.push(num(c));
            rec.push(num(ratio_pct(dp, c)));
        }
        w.write_record(&rec).map_err(csv_err(path))
    };
    for r in &table.rows {
        line(r.profile_id.clone(), r.dp_cost, r.costs.clone())?;
    }
    let means = (0..table.labels.len()).map(|j| table.mean_cost(j)).collect();
    line("mean".into(), table.mean_dp(), means)?;
    w.flush().map_err(io_err(path))
}

/// Averages by strategy: `strategy, mean_cost, mean_gwp_kg, ratio_to_ddp_pct`, DDP first.
pub fn write_benchmark_summary_csv(path: &Path, table: &BenchmarkTable) -> Result<(), HarnessError> {
    let n = table.rows.len().max(1) as f64;
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["strategy", "mean_cost", "mean_gwp_kg", "ratio_to_ddp_pct"])
        .map_err(csv_err(path))?;
    let dp_gwp = table.rows.iter().map(|r| r.dp_gwp_kg).sum::<f64>() / n;
    w.write_record(["ddp".to_string(), num(table.mean_dp()), num(dp_gwp), num(100.0)])
        .map_err(csv_err(path))?;
    for (j, l) in table.labels.iter().enumerate() {
        let gwp = table.rows.iter().map(|r| r.gwp_kg[j]).sum::<f64>() / n;
        w.write_record([l.clone(), num(table.mean_cost(j)), num(gwp), num(table.ratio_to_dp(j))])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckRow {
    pub index: usize,
    pub kind: String,
    pub sizes: Vec<usize>,
    pub n_params: usize,
    pub n_checked: usize,
    pub n_kink_excluded: usize,
    pub n_within_tolerance: usize,
    pub max_rel_error: f64,
}

/// Finite-difference checks on random small actor and critic networks.
pub fn gradcheck_suite(cfg: &GradcheckConfig, seed: u64) -> Result<Vec<GradcheckRow>, HarnessError> {
    let mut r = rng(seed, 21);
    let mut rows = Vec::with_capacity(cfg.n_networks);
    for index in 0..cfg.n_networks {
        let m = r.random_range(1..=4);
        let state_dim = m + 3;
        let hidden: Vec<usize> = (0..2).map(|_| r.random_range(cfg.min_units..=cfg.max_units)).collect();
        let actor = index % 2 == 0;
        let net = if actor {
            DenseNet::actor(state_dim, &hidden, m, 0.04, &mut r)
        } else {
            DenseNet::critic(state_dim, &hidden, m, &mut r)
        };
        let mut normal = |rows: usize, cols: usize| {
            Array2::from_shape_simple_fn((rows, cols), || r.sample::<f64, _>(StandardNormal))
        };
        let x = normal(cfg.batch, net.n_inputs());
        let up = normal(cfg.batch, net.n_outputs());
        let rep = gradient_check(&net, x.view(), up.view(), cfg.step, cfg.tolerance)
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        rows.push(GradcheckRow {
            index,
            kind: if actor { "actor" } else { "critic" }.into(),
            sizes: net.sizes(),
            n_params: rep.n_params,
            n_checked: rep.n_checked,
            n_kink_excluded: rep.n_kink_excluded,
            n_within_tolerance: rep.n_within_tolerance,
            max_rel_error: rep.max_rel_error,
        });
    }
    Ok(rows)
}

pub fn write_gradcheck_csv(path: &Path, rows: &[GradcheckRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record([
        "index",
        "kind",
        "sizes",
        "n_params",
        "n_checked",
        "n_kink_excluded",
        "n_within_tolerance",
        "max_rel_error",
    ])
    .map_err(csv_err(path))?;
    for g in rows {
        let sizes: Vec<String> = g.sizes.iter().map(usize::to_string).collect();
        w.write_record([
            g.index.to_string(),
            g.kind.clone(),
            sizes.join("-"),
            g.n_params.to_string(),
            g.n_checked.to_string(),
            g.n_kink_excluded.to_string(),
            g.n_within_tolerance.to_string(),
            num(g.max_rel_error),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{generate, ClassBands, ClassMix, GeneratorConfig};
    use crate::strategy::ZeroAction;

    fn zero(label: &str) -> (String, Box<dyn Strategy>) {
        (label.to_string(), Box::new(ZeroAction))
    }

    #[test]
    fn sum_row_is_column_total_and_identical_ratio_is_100() {
        let set = generate(2, 6, &GeneratorConfig::default()).unwrap();
        let ship = ShipConfig::default().with_clusters(1);
        let mut s = vec![zero("a"), zero("b")];
        let rep = evaluate(&mut s, &set.train, &ship, None).unwrap();
        let sum = rep.rows.last().unwrap();
        for j in 0..2 {
            let total = rep.rows[..4].iter().fold(0.0, |a, r| a + r.cost[j]);
            assert_eq!(sum.cost[j], total);
        }
        for r in &rep.rows {
            assert_eq!(ratio_pct(r.cost[0], r.cost[1]), 100.0);
            assert_eq!(ratio_pct(r.gwp_kg[0], r.gwp_kg[1]), 100.0);
        }
    }

    #[test]
    fn zero_action_on_light_voyages_has_no_fuel_cell_cost() {
        let gen = GeneratorConfig {
            class_mix: ClassMix {
                low: 1.0,
                moderate: 0.0,
                high: 0.0,
            },
            plateau_bands: ClassBands {
                low: [0.02, 0.03],
                ..ClassBands::default()
            },
            manoeuvre_band: [0.02, 0.03],
            ..GeneratorConfig::default()
        };
        let set = generate(4, 4, &gen).unwrap();
        let ship = ShipConfig::default().with_clusters(1);
        let rep = evaluate(&mut [zero("z")], &set.train, &ship, None).unwrap();
        assert_eq!(rep.rows[0].item, "PEMFC");
        assert_eq!(rep.rows[0].cost, vec![0.0]);
    }

    #[test]
    fn gradcheck_suite_passes_on_small_nets() {
        let rows = gradcheck_suite(&GradcheckConfig::default(), 3).unwrap();
        assert_eq!(rows.len(), 20);
        let checked: usize = rows.iter().map(|r| r.n_checked).sum();
        let ok: usize = rows.iter().map(|r| r.n_within_tolerance).sum();
        assert!(ok as f64 >= 0.99 * checked as f64);
    }
}
