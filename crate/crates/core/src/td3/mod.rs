//! Twin delayed deep deterministic policy gradient with a Huber critic loss.

mod loss;
mod replay;

use std::path::Path;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use loss::huber_loss;
pub use replay::{Batch, ReplayMemory, Transition};

use crate::nn::{
    read_net, write_net, AdamConfig, AdamState, CheckpointReader, CheckpointWriter, DenseNet, NnError,
};
use crate::seeding::derive_seed;
use crate::sim::{Action, SystemState};

#[derive(Debug, Error)]
pub enum Td3Error {
    #[error("invalid TD3 config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("state has dimension {got}, agent expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Agent hyperparameters. Noise settings are fractions of the action limit `a_M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Td3Config {
    pub gamma: f64,
    pub tau: f64,
    /// Exploration noise standard deviation, `sigma / a_M`.
    pub exploration_sigma: f64,
    /// Target smoothing noise standard deviation, `sigma_tilde / a_M`.
    pub smoothing_sigma: f64,
    /// Smoothing noise clip, `c / a_M`.
    pub noise_clip: f64,
    /// Critic updates per actor update.
    pub policy_delay: u64,
    pub batch_size: usize,
    /// Environment steps between updates.
    pub update_interval: u64,
    /// Uniform-random steps before the policy acts.
    pub warmup_steps: u64,
    pub replay_capacity: usize,
    pub hidden: Vec<usize>,
    pub actor_adam: AdamConfig,
    pub critic_adam: AdamConfig,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            exploration_sigma: 0.1,
            smoothing_sigma: 0.2,
            noise_clip: 0.5,
            policy_delay: 2,
            batch_size: 128,
            update_interval: 1,
            warmup_steps: 1000,
            replay_capacity: 1_000_000,
            hidden: vec![256, 256],
            actor_adam: AdamConfig::default(),
            critic_adam: AdamConfig::default(),
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<(), Td3Error> {
        let bad = |m: &str| Err(Td3Error::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.noise_clip > 0.0) {
            return bad("noise_clip must be > 0");
        }
        if !(self.exploration_sigma >= 0.0 && self.smoothing_sigma >= 0.0) {
            return bad("noise standard deviations must be >= 0");
        }
        if self.policy_delay < 1 || self.batch_size < 1 || self.update_interval < 1 || self.replay_capacity < 1 {
            return bad("policy_delay, batch_size, update_interval and replay_capacity must be >= 1");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be non-empty and positive");
        }
        for a in [self.actor_adam, self.critic_adam] {
            if !(a.learning_rate > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.epsilon > 0.0)
            {
                return bad("Adam requires lr > 0, betas in [0, 1) and eps > 0");
            }
        }
        Ok(())
    }
}

/// Losses and objective of one update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainDiagnostics {
    pub critic1_loss: f64,
    pub critic2_loss: f64,
    /// Mean `Q1(s, pi(s))` over the batch, present on actor updates.
    pub actor_objective: Option<f64>,
    pub mean_abs_td: f64,
}

/// Actor, twin critics, their targets, optimizers and replay.
#[derive(Debug, Clone)]
pub struct Td3Agent {
    pub config: Td3Config,
    n_actions: usize,
    state_dim: usize,
    action_limit: f64,
    /// Demand is divided by this before entering the networks.
    p_dem_scale: f64,
    pub actor: DenseNet,
    pub actor_target: DenseNet,
    pub critic1: DenseNet,
    pub critic2: DenseNet,
    pub critic1_target: DenseNet,
    pub critic2_target: DenseNet,
    actor_opt: AdamState,
    critic1_opt: AdamState,
    critic2_opt: AdamState,
    replay: ReplayMemory,
    rng: ChaCha8Rng,
    pub env_steps: u64,
    pub critic_updates: u64,
    pub actor_updates: u64,
}

const AGENT_MAGIC: &[u8; 4] = b"FCTD";
pub const AGENT_FORMAT_VERSION: u32 = 1;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Td3Agent {
    pub fn new(
        config: Td3Config,
        n_actions: usize,
        action_limit: f64,
        p_dem_scale: f64,
        seed: u64,
    ) -> Result<Self, Td3Error> {
        config.validate()?;
        if n_actions == 0 || !(action_limit > 0.0) || !(p_dem_scale > 0.0) {
            return Err(Td3Error::InvalidConfig(
                "need n_actions >= 1, action_limit > 0 and p_dem_scale > 0".into(),
            ));
        }
        let state_dim = n_actions + 3;
        let mut init = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
        let actor = DenseNet::actor(state_dim, &config.hidden, n_actions, action_limit, &mut init);
        let critic1 = DenseNet::critic(state_dim, &config.hidden, n_actions, &mut init);
        let critic2 = DenseNet::critic(state_dim, &config.hidden, n_actions, &mut init);
        Ok(Self {
            actor_opt: AdamState::new(&actor, config.actor_adam),
            critic1_opt: AdamState::new(&critic1, config.critic_adam),
            critic2_opt: AdamState::new(&critic2, config.critic_adam),
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            replay: ReplayMemory::new(config.replay_capacity, state_dim, n_actions),
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 1)),
            n_actions,
            state_dim,
            action_limit,
            p_dem_scale,
            config,
            env_steps: 0,
            critic_updates: 0,
            actor_updates: 0,
        })
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_limit(&self) -> f64 {
        self.action_limit
    }

    pub fn replay(&self) -> &ReplayMemory {
        &self.replay
    }

    /// Network input for a state: `[x_1..x_m, soc, spa, p_dem / p_dem_scale]`.
    pub fn observe(&self, state: &SystemState) -> Result<Vec<f64>, Td3Error> {
        if state.dim() != self.state_dim {
            return Err(Td3Error::Dimension {
                expected: self.state_dim,
                got: state.dim(),
            });
        }
        let mut v = state.to_vec();
        v[self.state_dim - 1] /= self.p_dem_scale;
        Ok(v)
    }

    /// Deterministic policy action. Leaves the agent untouched.
    pub fn policy_action(&self, state: &SystemState) -> Result<Action, Td3Error> {
        let obs = self.observe(state)?;
        Ok(Action::clipped(self.actor.forward(&obs)?, self.action_limit))
    }

    /// Deterministic policy action, or the policy plus clipped Gaussian noise when exploring.
    pub fn select_action(&mut self, state: &SystemState, explore: bool) -> Result<Action, Td3Error> {
        if !explore {
            return self.policy_action(state);
        }
        let obs = self.observe(state)?;
        let mut a = self.actor.forward(&obs)?;
        if explore && self.config.exploration_sigma > 0.0 {
            let noise = Normal::new(0.0, self.config.exploration_sigma * self.action_limit)
                .map_err(|e| Td3Error::InvalidConfig(e.to_string()))?;
            for v in &mut a {
                *v += noise.sample(&mut self.rng);
            }
        }
        Ok(Action::clipped(a, self.action_limit))
    }

    /// Training-time action: uniform random during warmup, noisy policy afterwards.
    pub fn exploration_action(&mut self, state: &SystemState) -> Result<Action, Td3Error> {
        if self.env_steps < self.config.warmup_steps {
            self.observe(state)?;
            let l = self.action_limit;
            let a = (0..self.n_actions).map(|_| self.rng.random_range(-l..=l)).collect();
            return Ok(Action::clipped(a, l));
        }
        self.select_action(state, true)
    }

    /// Stores a transition and runs an update when one is due.
    pub fn record(
        &mut self,
        state: &SystemState,
        action: &Action,
        reward: f64,
        next: &SystemState,
        terminal: bool,
    ) -> Result<Option<TrainDiagnostics>, Td3Error> {
        if !reward.is_finite() {
            return Err(Td3Error::InvalidConfig(format!("non-finite reward {reward}")));
        }
        let t = Transition {
            s: self.observe(state)?,
            a: action.as_slice().to_vec(),
            r: reward,
            s_next: self.observe(next)?,
            terminal,
        };
        self.replay.push(t);
        self.env_steps += 1;
        let ready = self.replay.len() as u64 >= (self.config.batch_size as u64).max(self.config.warmup_steps);
        if ready && self.env_steps % self.config.update_interval == 0 {
            return self.train_step().map(Some);
        }
        Ok(None)
    }

    fn critic_input(&self, s: ArrayView2<f64>, a: ArrayView2<f64>) -> Array2<f64> {
        let scaled = &a / self.action_limit;
        concatenate![Axis(1), s, scaled]
    }

    /// Smoothed target actions `clip(pi'(s') + clip(N(0, sigma~), -c, c), -a_M, a_M)`.
    pub fn smoothed_target_actions(&mut self, s_next: ArrayView2<f64>) -> Result<Array2<f64>, Td3Error> {
        let mut a = self.actor_target.forward_batch(s_next)?;
        let l = self.action_limit;
        let c = self.config.noise_clip * l;
        let sigma = self.config.smoothing_sigma * l;
        if sigma > 0.0 {
            let noise = Normal::new(0.0, sigma).map_err(|e| Td3Error::InvalidConfig(e.to_string()))?;
            a.mapv_inplace(|v| v + noise.sample(&mut self.rng).clamp(-c, c));
        }
        a.mapv_inplace(|v| v.clamp(-l, l));
        Ok(a)
    }

    /// Bootstrap targets `r + gamma * (1 - done) * min(Q1'(s', a~), Q2'(s', a~))`.
    pub fn compute_target(&mut self, batch: &Batch) -> Result<Array1<f64>, Td3Error> {
        let a_next = self.smoothed_target_actions(batch.s_next.view())?;
        let x = self.critic_input(batch.s_next.view(), a_next.view());
        let q1 = self.critic1_target.forward_batch(x.view())?;
        let q2 = self.critic2_target.forward_batch(x.view())?;
        let gamma = self.config.gamma;
        Ok(Array1::from_shape_fn(batch.len(), |i| {
            let q = q1[[i, 0]].min(q2[[i, 0]]);
            if batch.done[i] > 0.0 || gamma == 0.0 {
                batch.r[i]
            } else {
                batch.r[i] + gamma * q
            }
        }))
    }

    fn critic_update(which: u8, agent: &mut Self, x: &Array2<f64>, y: &Array1<f64>) -> Result<(f64, f64), Td3Error> {
        let (net, opt) = if which == 1 {
            (&mut agent.critic1, &mut agent.critic1_opt)
        } else {
            (&mut agent.critic2, &mut agent.critic2_opt)
        };
        let trace = net.forward_trace(x.view())?;
        let q = trace.output().column(0).to_owned();
        let deltas: Vec<f64> = y.iter().zip(q.iter()).map(|(y, q)| y - q).collect();
        let (loss, dsig) = huber_loss(&deltas);
        let n = deltas.len() as f64;
        // dL/dQ = -(dsigma/ddelta) / n.
        let upstream = Array2::from_shape_fn((deltas.len(), 1), |(i, _)| -dsig[i] / n);
        let (grads, _) = net.backward(&trace, upstream.view())?;
        opt.step(net, &grads)?;
        let mean_abs = deltas.iter().map(|d| d.abs()).sum::<f64>() / n;
        Ok((loss, mean_abs))
    }

    /// One update on a sampled mini-batch: both critics, then every `policy_delay`
    /// critic updates the actor and a soft update of all three targets.
    pub fn train_step(&mut self) -> Result<TrainDiagnostics, Td3Error> {
        let batch = self.replay.sample(self.config.batch_size, &mut self.rng);
        self.train_on_batch(&batch)
    }

    pub fn train_on_batch(&mut self, batch: &Batch) -> Result<TrainDiagnostics, Td3Error> {
        let y = self.compute_target(batch)?;
        let x = self.critic_input(batch.s.view(), batch.a.view());
        let (l1, td1) = Self::critic_update(1, self, &x, &y)?;
        let (l2, td2) = Self::critic_update(2, self, &x, &y)?;
        self.critic_updates += 1;
        let mut actor_objective = None;
        if self.critic_updates % self.config.policy_delay == 0 {
            actor_objective = Some(self.actor_update(batch.s.view())?);
            self.actor_updates += 1;
            let tau = self.config.tau;
            self.actor_target.soft_update(&self.actor, tau)?;
            self.critic1_target.soft_update(&self.critic1, tau)?;
            self.critic2_target.soft_update(&self.critic2, tau)?;
        }
        Ok(TrainDiagnostics {
            critic1_loss: l1,
            critic2_loss: l2,
            actor_objective,
            mean_abs_td: 0.5 * (td1 + td2),
        })
    }

    /// Ascends `mean Q1(s, pi(s))`; returns that mean before the step.
    fn actor_update(&mut self, s: ArrayView2<f64>) -> Result<f64, Td3Error> {
        let n = s.nrows();
        let actor_trace = self.actor.forward_trace(s)?;
        let a = actor_trace.output().clone();
        let x = self.critic_input(s, a.view());
        let critic_trace = self.critic1.forward_trace(x.view())?;
        let objective = critic_trace.output().mean().unwrap_or(0.0);
        // Minimise -mean(Q): upstream -1/n on every sample.
        let up = Array2::from_elem((n, 1), -1.0 / n as f64);
        let (_, dx) = self.critic1.backward(&critic_trace, up.view())?;
        let da = dx.slice(s![.., self.state_dim..]).to_owned() / self.action_limit;
        let (grads, _) = self.actor.backward(&actor_trace, da.view())?;
        self.actor_opt.step(&mut self.actor, &grads)?;
        Ok(objective)
    }

    fn config_json(&self) -> String {
        serde_json::to_string(&self.config).expect("config serialises")
    }

    /// SHA-256 over the hyperparameters and problem dimensions.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.config_json().as_bytes());
        h.update((self.n_actions as u64).to_le_bytes());
        h.update(self.action_limit.to_le_bytes());
        h.update(self.p_dem_scale.to_le_bytes());
        hex(&h.finalize())
    }

    /// Binary checkpoint of all six networks, optimizer states, counters and RNG position.
    /// The replay memory is not stored.
    ///
    /// ```text
    /// "FCTD" | u32 version | str config_json | str config_hash | u32 m | f64 a_M
    /// | f64 p_dem_scale | u64 env_steps | u64 critic_updates | u64 actor_updates
    /// | 32 bytes rng seed | u64 rng stream | u64 rng word_pos (low) | u64 (high)
    /// | actor | critic1 | critic2 (with Adam) | actor' | critic1' | critic2'
    /// ```
    /// Strings are u32-length-prefixed UTF-8; networks use the network record format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = CheckpointWriter::new();
        w.bytes(AGENT_MAGIC);
        w.u32(AGENT_FORMAT_VERSION);
        w.str(&self.config_json());
        w.str(&self.config_hash());
        w.u32(self.n_actions as u32);
        w.f64(self.action_limit);
        w.f64(self.p_dem_scale);
        w.u64(self.env_steps);
        w.u64(self.critic_updates);
        w.u64(self.actor_updates);
        w.bytes(&self.rng.get_seed());
        w.u64(self.rng.get_stream());
        let pos = self.rng.get_word_pos();
        w.u64(pos as u64);
        w.u64((pos >> 64) as u64);
        write_net(&mut w, &self.actor, Some(&self.actor_opt));
        write_net(&mut w, &self.critic1, Some(&self.critic1_opt));
        write_net(&mut w, &self.critic2, Some(&self.critic2_opt));
        write_net(&mut w, &self.actor_target, None);
        write_net(&mut w, &self.critic1_target, None);
        write_net(&mut w, &self.critic2_target, None);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, Td3Error> {
        let ck = |m: String| Td3Error::Checkpoint(m);
        let mut r = CheckpointReader::new(bytes);
        if r.bytes(4)? != AGENT_MAGIC {
            return Err(ck("not an agent checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != AGENT_FORMAT_VERSION {
            return Err(ck(format!("agent format version {version}, this build reads {AGENT_FORMAT_VERSION}")));
        }
        let config: Td3Config = serde_json::from_str(&r.str()?).map_err(|e| ck(e.to_string()))?;
        config.validate()?;
        let stored_hash = r.str()?;
        let n_actions = r.u32()? as usize;
        let action_limit = r.f64()?;
        let p_dem_scale = r.f64()?;
        let env_steps = r.u64()?;
        let critic_updates = r.u64()?;
        let actor_updates = r.u64()?;
        let seed: [u8; 32] = r.bytes(32)?.try_into().expect("32 bytes");
        let stream = r.u64()?;
        let lo = r.u64()? as u128;
        let hi = r.u64()? as u128;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(lo | (hi << 64));
        let mut online = Vec::new();
        for _ in 0..3 {
            let (net, opt) = read_net(&mut r)?;
            let opt = opt.ok_or_else(|| ck("online network without optimizer state".into()))?;
            online.push((net, opt));
        }
        let mut targets = Vec::new();
        for _ in 0..3 {
            targets.push(read_net(&mut r)?.0);
        }
        if !r.is_at_end() {
            return Err(ck("trailing bytes after last network".into()));
        }
        let state_dim = n_actions + 3;
        let (critic2, critic2_opt) = online.pop().expect("three");
        let (critic1, critic1_opt) = online.pop().expect("three");
        let (actor, actor_opt) = online.pop().expect("three");
        let critic2_target = targets.pop().expect("three");
        let critic1_target = targets.pop().expect("three");
        let actor_target = targets.pop().expect("three");
        let expected_actor = [state_dim].into_iter().chain(config.hidden.iter().copied()).chain([n_actions]);
        if !actor.sizes().into_iter().eq(expected_actor)
            || !actor.same_topology(&actor_target)
            || !critic1.same_topology(&critic1_target)
            || !critic2.same_topology(&critic2_target)
            || critic1.n_inputs() != state_dim + n_actions
        {
            return Err(ck("network shapes do not match the stored configuration".into()));
        }
        let agent = Self {
            replay: ReplayMemory::new(config.replay_capacity, state_dim, n_actions),
            config,
            n_actions,
            state_dim,
            action_limit,
            p_dem_scale,
            actor,
            actor_target,
            critic1,
            critic2,
            critic1_target,
            critic2_target,
            actor_opt,
            critic1_opt,
            critic2_opt,
            rng,
            env_steps,
            critic_updates,
            actor_updates,
        };
        if agent.config_hash() != stored_hash {
            return Err(ck("config hash mismatch".into()));
        }
        Ok(agent)
    }

    pub fn save(&self, path: &Path) -> Result<(), Td3Error> {
        std::fs::write(path, self.to_bytes()).map_err(|source| Td3Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, Td3Error> {
        let bytes = std::fs::read(path).map_err(|source| Td3Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}
