//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero
//! when any criterion fails. Trains three desk-scale runs, so expect several minutes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fcems::dp::{enumerate, solve, DpGrid};
use fcems::harness::{
    benchmark, evaluate, gradcheck_suite, train, write_report_csv, GradcheckConfig, RunConfig, RunSummary, SeedRun,
};
use fcems::profiles::{generate, ClassLabel, GeneratorConfig, LoadProfile, Sample};
use fcems::sim::{total_converter_power, Action, Environment, Mode, ShipConfig, TerminationReason};
use fcems::strategy::{RandomAction, Strategy, Td3Policy, ZeroAction};
use fcems::td3::{huber_loss, Td3Agent};

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gradients() -> Verdict {
    let cfg = GradcheckConfig::default();
    let started = Instant::now();
    let rows = gradcheck_suite(&cfg, 2024).map_err(|e| e.to_string())?;
    let secs = started.elapsed().as_secs_f64();
    let checked: usize = rows.iter().map(|r| r.n_checked).sum();
    let ok: usize = rows.iter().map(|r| r.n_within_tolerance).sum();
    let excluded: usize = rows.iter().map(|r| r.n_kink_excluded).sum();
    let sizes_ok = rows
        .iter()
        .all(|r| r.sizes[1..r.sizes.len() - 1].iter().all(|&u| (3..=8).contains(&u)));
    let frac = ok as f64 / checked as f64;
    check(
        rows.len() >= 20 && sizes_ok && frac >= 0.99 && secs < 10.0,
        format!(
            "{} nets, {ok}/{checked} params within 1e-4 ({:.2}%), {excluded} kink exclusions, {secs:.2}s",
            rows.len(),
            frac * 100.0
        ),
    )
}

fn huber() -> Verdict {
    let cases = [(0.0, 0.0, 0.0), (0.5, 0.125, 0.5), (1.0, 0.5, 1.0), (2.0, 1.5, 1.0), (-3.0, 2.5, -1.0)];
    let mut bad = Vec::new();
    for (d, loss, grad) in cases {
        let (l, g) = huber_loss(&[d]);
        if l != loss || g[0] != grad {
            bad.push(format!("delta {d}: got ({l}, {})", g[0]));
        }
    }
    check(bad.is_empty(), if bad.is_empty() { "5/5 exact".into() } else { bad.join("; ") })
}

fn tiny_profile(id: usize, sailing: &[f64], port: &[f64]) -> LoadProfile {
    LoadProfile {
        id: format!("tiny{id}"),
        samples: sailing
            .iter()
            .map(|&p| Sample { p_dem_kw: p, spa: false })
            .chain(port.iter().map(|&p| Sample { p_dem_kw: p, spa: true }))
            .collect(),
        step_seconds: 60.0,
        class_label: ClassLabel::Low,
    }
}

fn dp_vs_enumeration() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for i in 0..60 {
        let ship = ShipConfig {
            n_clusters: 1,
            // Setpoints on the per-unit grid, so every reachable x is a grid point.
            initial_cluster_power: rng.random_range(0..=20) as f64 * 0.01,
            ..ShipConfig::default()
        };
        // One action step shifts converter power by `quantum`. Demands are whole quanta
        // above the starting output, so the battery always discharges a whole number of
        // quanta and every reachable SOC is a node of the SOC grid below.
        let quantum = total_converter_power(&[ship.action_limit], &ship);
        let cell = quantum / ship.battery.discharge_efficiency * ship.step_hours() / ship.battery_capacity_kwh;
        let base = total_converter_power(&[ship.initial_cluster_power], &ship);
        let steps = rng.random_range(1..=3);
        let sailing: Vec<f64> = (0..steps).map(|_| base + rng.random_range(6..=20) as f64 * quantum).collect();
        let port: Vec<f64> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(50.0..200.0)).collect();
        let p = tiny_profile(i, &sailing, &port);
        let cells = 75;
        let hi = ship.soc_max();
        let grid = DpGrid {
            soc_levels: cells + 1,
            soc_range: Some((hi - cells as f64 * cell, hi)),
            action_levels: if rng.random_bool(0.5) { 3 } else { 1 },
            ..DpGrid::default()
        };
        let e = enumerate(&p, &ship, &grid).map_err(|e| format!("instance {i}: {e}"))?;
        let s = solve(&p, &ship, &grid).map_err(|e| format!("instance {i}: {e}"))?;
        worst = worst.max((s.optimal_cost() - e).abs() / e.abs().max(1.0));
        n += 1;
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        n >= 50 && worst <= 1e-9 && secs < 30.0,
        format!("{n} instances, worst relative gap {worst:.1e}, {secs:.2}s"),
    )
}

fn conservation() -> Verdict {
    let set = generate(99, 40, &GeneratorConfig::default()).map_err(|e| e.to_string())?;
    let profiles: Vec<&LoadProfile> = set.train.iter().chain(&set.validation).collect();
    let ship = ShipConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut steps, mut penalties, mut episodes) = (0usize, 0usize, 0usize);
    let mut worst_residual: f64 = 0.0;
    let l = ship.action_limit;
    while steps < 100_000 {
        let mode = if episodes % 2 == 0 { Mode::Train } else { Mode::Evaluate };
        let mut env = Environment::new(&ship, mode).map_err(|e| e.to_string())?;
        let mut state = env.reset(profiles[episodes % profiles.len()]).map_err(|e| e.to_string())?;
        episodes += 1;
        loop {
            let a: Vec<f64> = (0..ship.n_clusters).map(|_| rng.random_range(-l..=l)).collect();
            let out = env.step(&Action::clipped(a, l)).map_err(|e| e.to_string())?;
            steps += 1;
            for r in &out.records {
                worst_residual = worst_residual.max(r.balance_residual_kw().abs());
                if !(0.0..=1.0).contains(&r.soc) {
                    return Err(format!("soc {} out of [0, 1] at step {steps}", r.soc));
                }
            }
            if !state.spa {
                let penalised = matches!(
                    out.truncated_reason,
                    TerminationReason::SocFloor | TerminationReason::Infeasible
                ) || out.overridden.iter().any(|&o| o);
                if penalised {
                    penalties += 1;
                    if out.reward != -1.0 {
                        return Err(format!("penalty branch returned {}", out.reward));
                    }
                } else if !(-1.0..1.0).contains(&out.reward) {
                    return Err(format!("sailing reward {} outside [-1, 1)", out.reward));
                }
            }
            state = out.next_state;
            if out.terminated || steps >= 100_000 {
                break;
            }
        }
    }
    check(
        worst_residual < 1e-9 && penalties > 0,
        format!("{steps} steps over {episodes} episodes, max residual {worst_residual:.1e} kW, {penalties} penalty steps all -1"),
    )
}

struct Runs {
    desk: RunConfig,
    profiles: Vec<LoadProfile>,
    uniform: (RunSummary, Vec<SeedRun>),
    uniform_dir: PathBuf,
    uniform_secs: f64,
    repeat_dir: PathBuf,
    multi: (RunSummary, Vec<SeedRun>),
    dp: BTreeMap<String, f64>,
}

fn best_agent(run: &(RunSummary, Vec<SeedRun>)) -> Result<Td3Agent, String> {
    Td3Agent::from_bytes(&run.1[run.0.best_seed].best_checkpoint).map_err(|e| e.to_string())
}

fn mean_eval_cost(strategy: Box<dyn Strategy>, profiles: &[LoadProfile], ship: &ShipConfig) -> Result<(f64, usize), String> {
    let mut s = vec![("s".to_string(), strategy)];
    let report = evaluate(&mut s, profiles, ship, None).map_err(|e| e.to_string())?;
    let floors = report.voyages.iter().filter(|v| v.termination == "soc_floor").count();
    Ok((report.rows.last().unwrap().cost[0], floors))
}

fn prepare(root: &Path) -> Result<Runs, String> {
    let desk = RunConfig::desk();
    let set = fcems::harness::load_profiles(&desk).map_err(|e| e.to_string())?;
    let uniform_dir = root.join("desk_a");
    let repeat_dir = root.join("desk_b");
    for d in [&uniform_dir, &repeat_dir] {
        let _ = std::fs::remove_dir_all(d);
    }
    let started = Instant::now();
    let uniform = train(&desk, Some(&uniform_dir)).map_err(|e| e.to_string())?;
    let uniform_secs = started.elapsed().as_secs_f64();
    train(&desk, Some(&repeat_dir)).map_err(|e| e.to_string())?;
    let mut m4 = desk.clone();
    m4.n_clusters = 4;
    let multi = train(&m4, None).map_err(|e| e.to_string())?;
    let ship1 = desk.ship_config();
    let dp = set
        .validation
        .iter()
        .map(|p| {
            solve(p, &ship1, &desk.dp_grid)
                .map(|s| (p.id.clone(), s.summary.realized_cost))
                .map_err(|e| e.to_string())
        })
        .collect::<Result<_, _>>()?;
    Ok(Runs {
        desk,
        profiles: set.validation,
        uniform,
        uniform_dir,
        uniform_secs,
        repeat_dir,
        multi,
        dp,
    })
}

fn dominance(runs: &Runs) -> Verdict {
    let started = Instant::now();
    let ship = runs.desk.ship_config();
    let voyages = &runs.profiles[..20.min(runs.profiles.len())];
    let mut strategies: Vec<(String, Box<dyn Strategy>)> = vec![
        ("zero".into(), Box::new(ZeroAction)),
        ("random".into(), Box::new(RandomAction::new(3))),
        ("td3".into(), Box::new(Td3Policy::new(best_agent(&runs.uniform)?))),
    ];
    let table = benchmark(&mut strategies, voyages, &ship, &runs.desk.dp_grid, None).map_err(|e| e.to_string())?;
    let mut violations = Vec::new();
    for r in &table.rows {
        for (j, c) in r.costs.iter().enumerate() {
            if r.dp_cost > c * 1.01 {
                violations.push(format!("{} {}: dp {:.1} > {:.1}", r.profile_id, table.labels[j], r.dp_cost, c));
            }
        }
    }
    let fine = DpGrid {
        soc_levels: 2 * (runs.desk.dp_grid.soc_levels - 1) + 1,
        ..runs.desk.dp_grid.clone()
    };
    let mut worst_refine: f64 = 0.0;
    for (p, r) in voyages.iter().zip(&table.rows) {
        let c = solve(p, &ship, &fine).map_err(|e| e.to_string())?.summary.realized_cost;
        worst_refine = worst_refine.max((c - r.dp_cost).abs() / r.dp_cost);
    }
    let secs = started.elapsed().as_secs_f64();
    let ratios: Vec<String> = (0..table.labels.len())
        .map(|j| format!("{} {:.1}%", table.labels[j], table.ratio_to_dp(j)))
        .collect();
    let detail = format!(
        "{} voyages, {} violations, {}; refinement change {:.3}%, {secs:.1}s",
        table.rows.len(),
        violations.len(),
        ratios.join(", "),
        worst_refine * 100.0
    );
    if !violations.is_empty() {
        return Err(format!("{detail}; {}", violations.join("; ")));
    }
    check(worst_refine < 0.01 && secs < 120.0, detail)
}

fn desk_learning(runs: &Runs) -> Verdict {
    let ship = runs.desk.ship_config();
    let (cost, _) = mean_eval_cost(Box::new(Td3Policy::new(best_agent(&runs.uniform)?)), &runs.profiles, &ship)?;
    let dp = runs.dp.values().sum::<f64>() / runs.dp.len() as f64;
    let ratio = cost / dp * 100.0;
    let s = &runs.uniform.0;
    check(
        ratio <= 115.0 && s.n_converged >= 3,
        format!(
            "best seed {} validation ${cost:.1} = {ratio:.1}% of DP ${dp:.1} on {} voyages, {}/{} converged, {:.0}s",
            s.best_seed,
            runs.profiles.len(),
            s.n_converged,
            s.n_seeds,
            runs.uniform_secs
        ),
    )
}

fn multi_cluster(runs: &Runs) -> Verdict {
    let ship1 = runs.desk.ship_config();
    let mut m4 = runs.desk.clone();
    m4.n_clusters = 4;
    let ship4 = m4.ship_config();
    let (c1, _) = mean_eval_cost(Box::new(Td3Policy::new(best_agent(&runs.uniform)?)), &runs.profiles, &ship1)?;
    let (c4, floors) = mean_eval_cost(Box::new(Td3Policy::new(best_agent(&runs.multi)?)), &runs.profiles, &ship4)?;
    let rel = (c4 - c1) / c1;
    check(
        rel.abs() <= 0.10 && floors == 0,
        format!(
            "4-cluster ${c4:.1} vs uniform ${c1:.1} ({:+.1}%), {floors} SOC-floor episodes, {}/{} seeds converged",
            rel * 100.0,
            runs.multi.0.n_converged,
            runs.multi.0.n_seeds
        ),
    )
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = vec![dir.join("learning_curves.csv"), dir.join("best_agent.ckpt")];
    if let Ok(rd) = std::fs::read_dir(dir.join("checkpoints")) {
        let mut v: Vec<PathBuf> = rd.filter_map(|e| e.ok().map(|e| e.path())).collect();
        v.sort();
        out.extend(v);
    }
    out
}

fn determinism(runs: &Runs) -> Verdict {
    let a = files_under(&runs.uniform_dir);
    let mut differing = Vec::new();
    for f in &a {
        let rel = f.strip_prefix(&runs.uniform_dir).unwrap();
        let other = runs.repeat_dir.join(rel);
        let same = matches!((std::fs::read(f), std::fs::read(&other)), (Ok(x), Ok(y)) if x == y);
        if !same {
            differing.push(rel.display().to_string());
        }
    }
    check(
        differing.is_empty() && a.len() > 2,
        if differing.is_empty() {
            format!("{} files byte-identical across two runs", a.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}

fn report_layout(runs: &Runs, root: &Path) -> Verdict {
    let ship = runs.desk.ship_config();
    let mut s: Vec<(String, Box<dyn Strategy>)> = vec![
        ("td3".into(), Box::new(Td3Policy::new(best_agent(&runs.uniform)?))),
        ("zero".into(), Box::new(ZeroAction)),
    ];
    let report = evaluate(&mut s, &runs.profiles, &ship, None).map_err(|e| e.to_string())?;
    let items: Vec<&str> = report.rows.iter().map(|r| r.item.as_str()).collect();
    if items != ["PEMFC", "Battery", "Electricity", "H2", "Sum"] {
        return Err(format!("rows {items:?}"));
    }
    for j in 0..report.labels.len() {
        let col = |f: fn(&fcems::harness::ReportRow) -> &Vec<f64>| report.rows[..4].iter().fold(0.0, |a, r| a + f(r)[j]);
        if col(|r| &r.cost) != report.rows[4].cost[j] || col(|r| &r.gwp_kg) != report.rows[4].gwp_kg[j] {
            return Err(format!("Sum differs from column total for {}", report.labels[j]));
        }
    }
    let path = root.join("report.csv");
    write_report_csv(&path, &report).map_err(|e| e.to_string())?;
    let header = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let header = header.lines().next().unwrap_or_default().to_string();
    check(
        header.contains("cost_ratio_pct") && header.contains("gwp_ratio_pct") && header.contains("gwp_kg_td3"),
        format!("rows {items:?}, Sum exact for both columns, header `{header}`"),
    )
}

fn main() -> ExitCode {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&root).expect("scratch dir");
    let mut results: Vec<(u8, &str, Verdict)> = vec![
        (1, "gradient check", gradients()),
        (2, "huber exactness", huber()),
        (3, "dp equals enumeration", dp_vs_enumeration()),
        (5, "environment conservation", conservation()),
    ];
    match prepare(&root) {
        Ok(runs) => {
            results.push((4, "dp dominance and refinement", dominance(&runs)));
            results.push((6, "desk learning", desk_learning(&runs)));
            results.push((7, "multi-cluster feasibility", multi_cluster(&runs)));
            results.push((8, "determinism", determinism(&runs)));
            results.push((9, "report layout", report_layout(&runs, &root)));
        }
        Err(e) => {
            for (id, name) in [
                (4, "dp dominance and refinement"),
                (6, "desk learning"),
                (7, "multi-cluster feasibility"),
                (8, "determinism"),
                (9, "report layout"),
            ] {
                results.push((id, name, Err(format!("training failed: {e}"))));
            }
        }
    }
    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (id, name, v) in &results {
        match v {
            Ok(d) => println!("criterion {id} ({name}): PASS: {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {id} ({name}): FAIL: {d}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
