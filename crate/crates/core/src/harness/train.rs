use std::path::Path;
use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{linear_trend, moving_average};
use super::{csv_err, io_err, HarnessError, RunConfig};
use crate::profiles::{generate, read_set, LoadProfile, ProfileSet};
use crate::seeding::{derive_seed, rng};
use crate::sim::{Action, Environment, Mode, ShipConfig, SystemState, TerminationReason};
use crate::strategy::{rollout, Strategy, StrategyError, ZeroAction};
use crate::td3::{Td3Agent, TrainDiagnostics};

/// One periodic evaluation of a seed's deterministic policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub episode: usize,
    pub env_steps: u64,
    pub mean_cost: f64,
    pub soc_floor_episodes: usize,
}

/// Per-episode averages of the updates made during that episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub episode: usize,
    pub env_steps: u64,
    pub critic1_loss: f64,
    pub critic2_loss: f64,
    /// Absent when no actor update happened in the episode.
    pub actor_objective: Option<f64>,
    pub mean_abs_td: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub index: usize,
    pub seed: u64,
    pub converged: bool,
    pub final_mean_cost: f64,
    pub trend_slope: Option<f64>,
    pub trend_t: Option<f64>,
    pub best_episode: usize,
    pub best_eval_cost: f64,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub summary: SeedSummary,
    pub curve: Vec<EvalPoint>,
    pub diagnostics: Vec<DiagnosticsRow>,
    /// Agent snapshot at the lowest eval cost.
    pub best_checkpoint: Vec<u8>,
    pub final_checkpoint: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_seeds: usize,
    pub n_clusters: usize,
    /// Zero-action mean cost on the eval voyages.
    pub baseline_cost: f64,
    pub eval_voyage_ids: Vec<String>,
    pub eval_episodes: Vec<usize>,
    pub seeds: Vec<SeedSummary>,
    pub n_converged: usize,
    /// Mean and sample standard deviation over converged seeds at each eval point.
    pub mean_curve: Vec<f64>,
    pub std_curve: Vec<f64>,
    pub mean_curve_ma: Vec<f64>,
    /// Lowest best-eval cost among converged seeds, or among all seeds when none converged.
    pub best_seed: usize,
    pub wall_clock_s: f64,
}

/// Borrowed deterministic policy, so evaluation cannot touch the learner.
struct Greedy<'a>(&'a Td3Agent);

impl Strategy for Greedy<'_> {
    fn name(&self) -> &str {
        "td3"
    }

    fn act(&mut self, state: &SystemState, _cfg: &ShipConfig) -> Result<Action, StrategyError> {
        Ok(self.0.policy_action(state)?)
    }
}

pub fn load_profiles(cfg: &RunConfig) -> Result<ProfileSet, HarnessError> {
    Ok(match &cfg.profiles_dir {
        Some(dir) => read_set(dir, cfg.seed)?,
        None => generate(cfg.seed, cfg.n_profiles, &cfg.generator)?,
    })
}

/// Mean evaluation-mode cost and SOC-floor count of `strategy` over `voyages`.
pub(crate) fn mean_cost(
    strategy: &mut dyn Strategy,
    voyages: &[&LoadProfile],
    ship: &ShipConfig,
) -> Result<(f64, usize), HarnessError> {
    let mut total = 0.0;
    let mut floors = 0;
    for p in voyages {
        let r = rollout(strategy, p, ship, Mode::Evaluate)?;
        total += r.cost.total();
        floors += usize::from(r.termination == TerminationReason::SocFloor);
    }
    Ok((total / voyages.len().max(1) as f64, floors))
}

pub fn baseline_cost(voyages: &[&LoadProfile], ship: &ShipConfig) -> Result<f64, HarnessError> {
    Ok(mean_cost(&mut ZeroAction, voyages, ship)?.0)
}

fn eval_voyages<'a>(cfg: &RunConfig, set: &'a ProfileSet) -> Result<Vec<&'a LoadProfile>, HarnessError> {
    if set.train.is_empty() {
        return Err(HarnessError::InvalidConfig("no training voyages".into()));
    }
    let n = cfg.eval_voyages.min(set.train.len());
    let mut idx = sample(&mut rng(cfg.seed, 11), set.train.len(), n).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| &set.train[i]).collect())
}

#[derive(Default)]
struct DiagAccumulator {
    n: usize,
    c1: f64,
    c2: f64,
    td: f64,
    n_actor: usize,
    actor: f64,
}

impl DiagAccumulator {
    fn add(&mut self, d: &TrainDiagnostics) {
        self.n += 1;
        self.c1 += d.critic1_loss;
        self.c2 += d.critic2_loss;
        self.td += d.mean_abs_td;
        if let Some(a) = d.actor_objective {
            self.n_actor += 1;
            self.actor += a;
        }
    }

    fn row(&self, episode: usize, env_steps: u64) -> Option<DiagnosticsRow> {
        (self.n > 0).then(|| {
            let n = self.n as f64;
            DiagnosticsRow {
                episode,
                env_steps,
                critic1_loss: self.c1 / n,
                critic2_loss: self.c2 / n,
                actor_objective: (self.n_actor > 0).then(|| self.actor / self.n_actor as f64),
                mean_abs_td: self.td / n,
            }
        })
    }
}

/// Trains seed `index` of the run and classifies its convergence against `baseline`.
pub fn train_seed(
    cfg: &RunConfig,
    set: &ProfileSet,
    eval_set: &[&LoadProfile],
    baseline: f64,
    index: usize,
) -> Result<SeedRun, HarnessError> {
    let ship = cfg.ship_config();
    let seed = derive_seed(cfg.seed, 100 + index as u64);
    let mut agent = Td3Agent::new(
        cfg.td3.clone(),
        ship.n_clusters,
        ship.action_limit,
        ship.plant_ceiling_kw,
        seed,
    )?;
    let mut picker = rng(seed, 2);
    let mut curve = Vec::new();
    let mut diagnostics = Vec::new();
    let mut best: Option<(f64, usize, Vec<u8>)> = None;

    for episode in 1..=cfg.max_episodes {
        let profile = &set.train[picker.random_range(0..set.train.len())];
        let mut env = Environment::new(&ship, Mode::Train)?;
        let mut state = env.reset(profile)?;
        let mut acc = DiagAccumulator::default();
        while !env.is_done() {
            let action = agent.exploration_action(&state)?;
            let out = env.step(&action)?;
            if let Some(d) = agent.record(&state, &action, out.reward, &out.next_state, out.terminated)? {
                acc.add(&d);
            }
            state = out.next_state;
        }
        if let Some(row) = acc.row(episode, agent.env_steps) {
            diagnostics.push(row);
        }

        if episode % cfg.eval_every_episodes == 0 || episode == cfg.max_episodes {
            let (cost, floors) = mean_cost(&mut Greedy(&agent), eval_set, &ship)?;
            curve.push(EvalPoint {
                episode,
                env_steps: agent.env_steps,
                mean_cost: cost,
                soc_floor_episodes: floors,
            });
            if best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
                best = Some((cost, episode, agent.to_bytes()));
            }
        }
    }

    let (best_eval_cost, best_episode, best_checkpoint) = best.expect("at least one evaluation");
    let c = &cfg.convergence;
    let tail = &curve[curve.len().saturating_sub(c.final_evals)..];
    let final_mean_cost = tail.iter().map(|p| p.mean_cost).sum::<f64>() / tail.len() as f64;
    let start = cfg.max_episodes.saturating_sub(c.trend_episodes);
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .iter()
        .filter(|p| p.episode > start)
        .map(|p| (p.episode as f64, p.mean_cost))
        .unzip();
    let trend = linear_trend(&xs, &ys);
    let rising = trend.is_some_and(|t| t.t_stat() > c.trend_t_max);
    let converged = final_mean_cost < c.baseline_factor * baseline && !rising;

    Ok(SeedRun {
        summary: SeedSummary {
            index,
            seed,
            converged,
            final_mean_cost,
            trend_slope: trend.map(|t| t.slope),
            trend_t: trend.map(|t| t.t_stat()).filter(|v| v.is_finite()),
            best_episode,
            best_eval_cost,
        },
        curve,
        diagnostics,
        best_checkpoint,
        final_checkpoint: agent.to_bytes(),
    })
}

fn aggregate(cfg: &RunConfig, runs: &[SeedRun]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let converged: Vec<&SeedRun> = runs.iter().filter(|r| r.summary.converged).collect();
    let n_points = runs.first().map_or(0, |r| r.curve.len());
    if converged.is_empty() {
        return (Vec::new(), Vec::new(), Vec::new());
    }
    let n = converged.len() as f64;
    let mut mean = Vec::with_capacity(n_points);
    let mut std = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let vals: Vec<f64> = converged.iter().map(|r| r.curve[i].mean_cost).collect();
        let m = vals.iter().sum::<f64>() / n;
        let var = if vals.len() > 1 {
            vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        mean.push(m);
        std.push(var.sqrt());
    }
    let ma = moving_average(&mean, cfg.convergence.moving_average_window);
    (mean, std, ma)
}

/// Runs every seed (in parallel), aggregates, and writes outputs under `out` when given.
pub fn train(cfg: &RunConfig, out: Option<&Path>) -> Result<(RunSummary, Vec<SeedRun>), HarnessError> {
    cfg.validate()?;
    let started = Instant::now();
    let set = load_profiles(cfg)?;
    let ship = cfg.ship_config();
    let eval_set = eval_voyages(cfg, &set)?;
    let baseline = baseline_cost(&eval_set, &ship)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }

    let runs = (0..cfg.n_seeds)
        .into_par_iter()
        .map(|i| train_seed(cfg, &set, &eval_set, baseline, i))
        .collect::<Result<Vec<_>, _>>()?;

    let (mean_curve, std_curve, mean_curve_ma) = aggregate(cfg, &runs);
    let n_converged = runs.iter().filter(|r| r.summary.converged).count();
    let best_seed = runs
        .iter()
        .filter(|r| r.summary.converged || n_converged == 0)
        .min_by(|a, b| a.summary.best_eval_cost.total_cmp(&b.summary.best_eval_cost))
        .map(|r| r.summary.index)
        .expect("n_seeds >= 1");
    let summary = RunSummary {
        n_seeds: cfg.n_seeds,
        n_clusters: cfg.n_clusters,
        baseline_cost: baseline,
        eval_voyage_ids: eval_set.iter().map(|p| p.id.clone()).collect(),
        eval_episodes: runs[0].curve.iter().map(|p| p.episode).collect(),
        seeds: runs.iter().map(|r| r.summary.clone()).collect(),
        n_converged,
        mean_curve,
        std_curve,
        mean_curve_ma,
        best_seed,
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    if let Some(dir) = out {
        write_outputs(cfg, dir, &summary, &runs)?;
    }
    Ok((summary, runs))
}

fn write_outputs(cfg: &RunConfig, dir: &Path, summary: &RunSummary, runs: &[SeedRun]) -> Result<(), HarnessError> {
    let write = |path: &Path, bytes: &[u8]| std::fs::write(path, bytes).map_err(io_err(path));
    write(&dir.join("config.toml"), cfg.to_toml_string().as_bytes())?;
    write_curves_csv(&dir.join("learning_curves.csv"), summary, runs)?;
    super::plot_learning_curves(&dir.join("learning_curves.svg"), summary, runs)?;
    let diag_dir = dir.join("diagnostics");
    let ckpt_dir = dir.join("checkpoints");
    for d in [&diag_dir, &ckpt_dir] {
        std::fs::create_dir_all(d).map_err(io_err(d))?;
    }
    for r in runs {
        let i = r.summary.index;
        write_diagnostics_csv(&diag_dir.join(format!("seed_{i:02}.csv")), &r.diagnostics)?;
        write(&ckpt_dir.join(format!("seed_{i:02}_best.ckpt")), &r.best_checkpoint)?;
        write(&ckpt_dir.join(format!("seed_{i:02}_final.ckpt")), &r.final_checkpoint)?;
    }
    write(&dir.join("best_agent.ckpt"), &runs[summary.best_seed].best_checkpoint)?;
    let json = serde_json::to_string_pretty(summary).expect("summary serialises");
    write(&dir.join("summary.json"), json.as_bytes())
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// `episode, seed_00.., mean, std, mean_ma`; aggregate columns are empty when no seed converged.
pub fn write_curves_csv(path: &Path, summary: &RunSummary, runs: &[SeedRun]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header = vec!["episode".to_string()];
    header.extend(runs.iter().map(|r| format!("seed_{:02}", r.summary.index)));
    header.extend(["mean", "std", "mean_ma"].map(String::from));
    w.write_record(&header).map_err(csv_err(path))?;
    for (i, ep) in summary.eval_episodes.iter().enumerate() {
        let mut row = vec![ep.to_string()];
        row.extend(runs.iter().map(|r| num(r.curve[i].mean_cost)));
        for col in [&summary.mean_curve, &summary.std_curve, &summary.mean_curve_ma] {
            row.push(col.get(i).map(|v| num(*v)).unwrap_or_default());
        }
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// `episode, env_steps, critic1_loss, critic2_loss, actor_objective, mean_abs_td`.
pub fn write_diagnostics_csv(path: &Path, rows: &[DiagnosticsRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["episode", "env_steps", "critic1_loss", "critic2_loss", "actor_objective", "mean_abs_td"])
        .map_err(csv_err(path))?;
    for r in rows {
        w.write_record([
            r.episode.to_string(),
            r.env_steps.to_string(),
            num(r.critic1_loss),
            num(r.critic2_loss),
            r.actor_objective.map(num).unwrap_or_default(),
            num(r.mean_abs_td),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> RunConfig {
        let mut cfg = RunConfig::desk();
        cfg.n_seeds = 2;
        cfg.max_episodes = 6;
        cfg.eval_every_episodes = 3;
        cfg.eval_voyages = 2;
        cfg.n_profiles = 6;
        cfg.td3.hidden = vec![8];
        cfg.td3.batch_size = 8;
        cfg.td3.warmup_steps = 20;
        cfg
    }

    #[test]
    fn two_seeds_emit_two_curves_and_files() {
        let dir = tempfile::tempdir().unwrap();
        let (summary, runs) = train(&tiny(), Some(dir.path())).unwrap();
        assert_eq!(runs.len(), 2);
        assert_eq!(summary.eval_episodes, vec![3, 6]);
        for name in ["learning_curves.csv", "learning_curves.svg", "summary.json", "best_agent.ckpt", "config.toml"] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        assert!(dir.path().join("checkpoints/seed_01_final.ckpt").exists());
        let best = Td3Agent::from_bytes(&std::fs::read(dir.path().join("best_agent.ckpt")).unwrap()).unwrap();
        assert_eq!(best.n_actions(), 1);
    }

    #[test]
    fn aggregate_is_mean_of_converged_seeds() {
        let (summary, runs) = train(&tiny(), None).unwrap();
        let conv: Vec<&SeedRun> = runs.iter().filter(|r| r.summary.converged).collect();
        for (i, m) in summary.mean_curve.iter().enumerate() {
            let expect = conv.iter().map(|r| r.curve[i].mean_cost).sum::<f64>() / conv.len() as f64;
            assert_eq!(*m, expect);
        }
    }

    #[test]
    fn evaluation_leaves_agent_untouched() {
        let cfg = tiny();
        let set = load_profiles(&cfg).unwrap();
        let ship = cfg.ship_config();
        let agent = Td3Agent::new(cfg.td3.clone(), 1, 0.04, 4370.0, 5).unwrap();
        let before = agent.to_bytes();
        let voyages: Vec<&LoadProfile> = set.train.iter().take(2).collect();
        mean_cost(&mut Greedy(&agent), &voyages, &ship).unwrap();
        assert_eq!(agent.to_bytes(), before);
    }
}
