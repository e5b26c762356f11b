//! Energy management strategies behind one trait, built by name at runtime.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dp::{self, DpError, DpGrid};
use crate::profiles::LoadProfile;
use crate::sim::{Action, CostBreakdown, Environment, Mode, ShipConfig, SimError, StepRecord, SystemState, TerminationReason};
use crate::td3::{Td3Agent, Td3Error};

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("unknown strategy '{name}' (available: {available})")]
    Unknown { name: String, available: String },
    #[error("strategy '{0}' requires an argument, e.g. '{0}=<value>'")]
    MissingArgument(String),
    #[error("strategy '{name}' controls {got} clusters, config has {expected}")]
    Dimension { name: String, expected: usize, got: usize },
    #[error("act called before begin_episode")]
    NotStarted,
    #[error(transparent)]
    Td3(#[from] Td3Error),
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// A controller that maps the observed state to a setpoint change per cluster.
pub trait Strategy: Send {
    fn name(&self) -> &str;

    /// Called once per voyage before the first `act`. Offline strategies may plan here.
    fn begin_episode(&mut self, _profile: &LoadProfile, _cfg: &ShipConfig) -> Result<(), StrategyError> {
        Ok(())
    }

    fn act(&mut self, state: &SystemState, cfg: &ShipConfig) -> Result<Action, StrategyError>;
}

/// Holds every cluster where it is.
#[derive(Debug, Default, Clone)]
pub struct ZeroAction;

impl Strategy for ZeroAction {
    fn name(&self) -> &str {
        "zero"
    }

    fn act(&mut self, state: &SystemState, _cfg: &ShipConfig) -> Result<Action, StrategyError> {
        Ok(Action::zeros(state.x.len()))
    }
}

/// Independent uniform actions in `[-a_M, a_M]`.
#[derive(Debug, Clone)]
pub struct RandomAction {
    rng: ChaCha8Rng,
}

impl RandomAction {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Strategy for RandomAction {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&mut self, state: &SystemState, cfg: &ShipConfig) -> Result<Action, StrategyError> {
        let l = cfg.action_limit;
        let a = (0..state.x.len()).map(|_| self.rng.random_range(-l..=l)).collect();
        Ok(Action::clipped(a, l))
    }
}

/// Deterministic actor of a trained agent.
#[derive(Debug, Clone)]
pub struct Td3Policy {
    agent: Td3Agent,
}

impl Td3Policy {
    pub fn new(agent: Td3Agent) -> Self {
        Self { agent }
    }

    pub fn agent(&self) -> &Td3Agent {
        &self.agent
    }
}

impl Strategy for Td3Policy {
    fn name(&self) -> &str {
        "td3"
    }

    fn begin_episode(&mut self, _profile: &LoadProfile, cfg: &ShipConfig) -> Result<(), StrategyError> {
        if self.agent.n_actions() != cfg.n_clusters {
            return Err(StrategyError::Dimension {
                name: "td3".into(),
                expected: cfg.n_clusters,
                got: self.agent.n_actions(),
            });
        }
        Ok(())
    }

    fn act(&mut self, state: &SystemState, _cfg: &ShipConfig) -> Result<Action, StrategyError> {
        Ok(self.agent.policy_action(state)?)
    }
}

/// Replays the uniform action sequence of the offline-optimal plan for the current voyage.
#[derive(Debug, Clone)]
pub struct DpPlan {
    grid: DpGrid,
    plan: Option<Vec<f64>>,
    step: usize,
}

impl DpPlan {
    pub fn new(grid: DpGrid) -> Self {
        Self {
            grid,
            plan: None,
            step: 0,
        }
    }
}

impl Strategy for DpPlan {
    fn name(&self) -> &str {
        "dp"
    }

    fn begin_episode(&mut self, profile: &LoadProfile, cfg: &ShipConfig) -> Result<(), StrategyError> {
        let sol = dp::solve(profile, cfg, &self.grid)?;
        self.plan = Some(sol.trajectory_actions);
        self.step = 0;
        Ok(())
    }

    fn act(&mut self, state: &SystemState, cfg: &ShipConfig) -> Result<Action, StrategyError> {
        let plan = self.plan.as_ref().ok_or(StrategyError::NotStarted)?;
        let a = plan.get(self.step).copied().unwrap_or(0.0);
        self.step += 1;
        Ok(Action::uniform(state.x.len(), a, cfg.action_limit))
    }
}

/// Construction inputs shared by all factories.
#[derive(Debug, Clone)]
pub struct StrategyArgs {
    /// Text after `=` in a `name=arg` spec.
    pub arg: Option<String>,
    pub seed: u64,
    pub dp_grid: DpGrid,
}

pub type Factory = Box<dyn Fn(&StrategyArgs) -> Result<Box<dyn Strategy>, StrategyError> + Send + Sync>;

/// Strategy factories keyed by name.
pub struct StrategyRegistry {
    factories: BTreeMap<String, Factory>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// `zero`, `random`, `dp` and `td3=<checkpoint path>`.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("zero", Box::new(|_| Ok(Box::new(ZeroAction))));
        r.register("random", Box::new(|a| Ok(Box::new(RandomAction::new(a.seed)))));
        r.register("dp", Box::new(|a| Ok(Box::new(DpPlan::new(a.dp_grid.clone())))));
        r.register(
            "td3",
            Box::new(|a| {
                let path = a.arg.as_ref().ok_or_else(|| StrategyError::MissingArgument("td3".into()))?;
                let agent = Td3Agent::load(&PathBuf::from(path))?;
                Ok(Box::new(Td3Policy::new(agent)))
            }),
        );
        r
    }

    pub fn register(&mut self, name: &str, factory: Factory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    /// Builds from a `name` or `name=arg` spec.
    pub fn build(&self, spec: &str, seed: u64, dp_grid: &DpGrid) -> Result<Box<dyn Strategy>, StrategyError> {
        let (name, arg) = match spec.split_once('=') {
            Some((n, a)) => (n.trim(), Some(a.trim().to_string())),
            None => (spec.trim(), None),
        };
        let factory = self.factories.get(name).ok_or_else(|| StrategyError::Unknown {
            name: name.to_string(),
            available: self.names().join(", "),
        })?;
        factory(&StrategyArgs {
            arg,
            seed,
            dp_grid: dp_grid.clone(),
        })
    }
}

/// Outcome of one voyage under a strategy.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub profile_id: String,
    pub cost: CostBreakdown,
    pub reward: f64,
    pub termination: TerminationReason,
    pub records: Vec<StepRecord>,
}

/// Runs one full voyage.
pub fn rollout(
    strategy: &mut dyn Strategy,
    profile: &LoadProfile,
    cfg: &ShipConfig,
    mode: Mode,
) -> Result<Rollout, StrategyError> {
    let mut env = Environment::new(cfg, mode)?;
    let mut state = env.reset(profile)?;
    strategy.begin_episode(profile, cfg)?;
    let mut reward = 0.0;
    let mut records = Vec::with_capacity(profile.len());
    while !env.is_done() {
        let action = if state.spa {
            Action::zeros(cfg.n_clusters)
        } else {
            strategy.act(&state, cfg)?
        };
        let out = env.step(&action)?;
        reward += out.reward;
        records.extend(out.records);
        state = out.next_state;
    }
    Ok(Rollout {
        profile_id: profile.id.clone(),
        cost: env.episode_cost(),
        reward,
        termination: env.termination(),
        records,
    })
}
