use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fcems::harness::{self, HarnessError, RunConfig};
use fcems::profiles::{self, LoadProfile};
use fcems::strategy::{Strategy, StrategyRegistry};

#[derive(Parser)]
#[command(name = "fcems", version, about = "Fuel-cell/battery ship energy management experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run config; omitted keys take desk-preset values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct Controllers {
    /// Agent checkpoint to evaluate; give twice for ratio columns.
    #[arg(long)]
    checkpoint: Vec<PathBuf>,
    /// Registered strategy, `name` or `name=arg` (zero, random, dp, td3=<path>).
    #[arg(long)]
    strategy: Vec<String>,
    /// Profile directory: either `train/` + `validation/` (validation is used) or flat CSVs.
    #[arg(long)]
    profiles: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic voyage profiles.
    GenerateProfiles(Common),
    /// Multi-seed training with periodic evaluation.
    Train(Common),
    /// Cost and emission report for one or two controllers.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        controllers: Controllers,
    },
    /// Compare controllers against the DP oracle.
    Benchmark {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        controllers: Controllers,
    },
    /// Finite-difference check of network gradients.
    Gradcheck(Common),
}

fn load_config(c: &Common) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::desk(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let out = c
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out).map_err(|source| HarnessError::Io {
        path: out.clone(),
        source,
    })?;
    cfg.validate()?;
    Ok((cfg, out))
}

fn eval_profiles(cfg: &RunConfig, dir: Option<&Path>) -> Result<Vec<LoadProfile>> {
    let list = match dir {
        Some(d) if d.join("validation").is_dir() => profiles::read_set(d, cfg.seed)?.validation,
        Some(d) => profiles::read_dir(d)?,
        None => harness::load_profiles(cfg)?.validation,
    };
    if list.is_empty() {
        bail!("no profiles found");
    }
    Ok(list)
}

fn build_controllers(cfg: &RunConfig, c: &Controllers) -> Result<Vec<(String, Box<dyn Strategy>)>> {
    let registry = StrategyRegistry::with_builtins();
    let mut specs: Vec<(String, String)> = c
        .checkpoint
        .iter()
        .map(|p| {
            let stem = p.file_stem().map_or("td3".into(), |s| s.to_string_lossy().into_owned());
            (stem, format!("td3={}", p.display()))
        })
        .collect();
    specs.extend(c.strategy.iter().map(|s| (s.split('=').next().unwrap_or(s).to_string(), s.clone())));
    if specs.is_empty() {
        bail!("give at least one --checkpoint or --strategy");
    }
    let mut out: Vec<(String, Box<dyn Strategy>)> = Vec::new();
    for (i, (label, spec)) in specs.into_iter().enumerate() {
        let label = if out.iter().any(|(l, _)| *l == label) {
            format!("{label}_{i}")
        } else {
            label
        };
        let s = registry
            .build(&spec, cfg.seed, &cfg.dp_grid)
            .with_context(|| format!("building strategy '{spec}'"))?;
        out.push((label, s));
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenerateProfiles(common) => {
            let (cfg, out) = load_config(&common)?;
            let set = profiles::generate(cfg.seed, cfg.n_profiles, &cfg.generator)?;
            profiles::write_set(&set, &out)?;
            harness::plot_profiles(&out.join("profiles.svg"), &set.train)?;
            println!(
                "wrote {} train and {} validation profiles to {}",
                set.train.len(),
                set.validation.len(),
                out.display()
            );
        }
        Command::Train(common) => {
            let (cfg, out) = load_config(&common)?;
            let (summary, _) = harness::train(&cfg, Some(&out))?;
            for s in &summary.seeds {
                println!(
                    "seed {:2}: converged={} best_eval_cost={:.2} (episode {}) final_mean={:.2}",
                    s.index, s.converged, s.best_eval_cost, s.best_episode, s.final_mean_cost
                );
            }
            println!(
                "{} of {} seeds converged; best seed {}; zero-action baseline {:.2}; outputs in {}",
                summary.n_converged,
                summary.n_seeds,
                summary.best_seed,
                summary.baseline_cost,
                out.display()
            );
        }
        Command::Evaluate { common, controllers } => {
            let (cfg, out) = load_config(&common)?;
            let list = eval_profiles(&cfg, controllers.profiles.as_deref())?;
            let mut strategies = build_controllers(&cfg, &controllers)?;
            if strategies.len() > 2 {
                bail!("evaluate takes at most two controllers");
            }
            let report = harness::evaluate(&mut strategies, &list, &cfg.ship_config(), Some(&out))?;
            harness::write_report_csv(&out.join("report.csv"), &report)?;
            harness::write_voyages_csv(&out.join("voyages.csv"), &report)?;
            harness::plot_voyage_costs(&out.join("voyages.svg"), &report)?;
            for r in &report.rows {
                let costs: Vec<String> = r.cost.iter().map(|c| format!("{c:10.2}")).collect();
                println!("{:12} {}", r.item, costs.join(" "));
            }
        }
        Command::Benchmark { common, controllers } => {
            let (cfg, out) = load_config(&common)?;
            let list = eval_profiles(&cfg, controllers.profiles.as_deref())?;
            let mut strategies = build_controllers(&cfg, &controllers)?;
            let ship = cfg.ship_config();
            let table = harness::benchmark(&mut strategies, &list, &ship, &cfg.dp_grid, Some(&out.join("dp")))?;
            harness::write_benchmark_csv(&out.join("benchmark.csv"), &table)?;
            harness::write_benchmark_summary_csv(&out.join("benchmark_summary.csv"), &table)?;
            harness::plot_benchmark(&out.join("benchmark.svg"), &table)?;
            println!("{:12} {:10.2} {:7.1}%", "ddp", table.mean_dp(), 100.0);
            for (j, l) in table.labels.iter().enumerate() {
                println!("{:12} {:10.2} {:7.1}%", l, table.mean_cost(j), table.ratio_to_dp(j));
            }
        }
        Command::Gradcheck(common) => {
            let (cfg, out) = load_config(&common)?;
            let rows = harness::gradcheck_suite(&cfg.gradcheck, cfg.seed)?;
            harness::write_gradcheck_csv(&out.join("gradcheck.csv"), &rows)?;
            let checked: usize = rows.iter().map(|r| r.n_checked).sum();
            let ok: usize = rows.iter().map(|r| r.n_within_tolerance).sum();
            let excluded: usize = rows.iter().map(|r| r.n_kink_excluded).sum();
            let frac = if checked == 0 { 1.0 } else { ok as f64 / checked as f64 };
            println!(
                "{} networks: {ok}/{checked} parameters within {:e} ({:.4}), {excluded} excluded at relu kinks",
                rows.len(),
                cfg.gradcheck.tolerance,
                frac
            );
            if frac < cfg.gradcheck.min_pass_fraction {
                bail!(
                    "gradient check failed: pass fraction {frac:.4} below {}",
                    cfg.gradcheck.min_pass_fraction
                );
            }
        }
    }
    Ok(())
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    match e.downcast_ref::<HarnessError>() {
        Some(HarnessError::InvalidConfig(_) | HarnessError::ConfigFile { .. }) => "config",
        Some(HarnessError::Io { .. }) => "io",
        Some(HarnessError::Plot { .. }) => "plot",
        Some(HarnessError::Profile(_)) => "profile",
        Some(HarnessError::Sim(_)) => "simulation",
        Some(HarnessError::Td3(_)) => "agent",
        Some(HarnessError::Dp(_)) => "dp",
        Some(HarnessError::Strategy(_)) => "strategy",
        None if e.downcast_ref::<fcems::strategy::StrategyError>().is_some() => "strategy",
        None if e.downcast_ref::<fcems::profiles::ProfileError>().is_some() => "profile",
        None => "failure",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", error_kind(&e));
            for cause in e.chain().skip(1) {
                eprintln!("  caused by: {cause}");
            }
            ExitCode::FAILURE
        }
    }
}
