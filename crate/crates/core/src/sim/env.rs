use serde::{Deserialize, Serialize};

use super::{
    battery_power, cost_reward, port_charge, reward, step_costs, Action, BatteryFlow, CostBreakdown, ShipConfig,
    SimError, SystemState,
};
use crate::profiles::{LoadProfile, ProfileError, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    None,
    SocFloor,
    Infeasible,
    EndOfEpisode,
}

impl TerminationReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminationReason::None => "none",
            TerminationReason::SocFloor => "soc_floor",
            TerminationReason::Infeasible => "infeasible",
            TerminationReason::EndOfEpisode => "end_of_episode",
        }
    }
}

/// Training runs the plain MDP. Evaluation adds over-discharge protection: when a step
/// would leave SOC below `soc_min` or demand unmet, every cluster is raised by the
/// smallest common amount that prevents it (ramp limit not enforced).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Evaluate,
}

/// One simulated interval of `step_seconds`, as written to trajectory logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t_s: f64,
    pub p_dem_kw: f64,
    /// Setpoints held during the interval.
    pub x: Vec<f64>,
    /// SOC at the end of the interval.
    pub soc: f64,
    pub spa: bool,
    pub p1_kw: f64,
    pub shore_kw: f64,
    pub flow: BatteryFlow,
    pub cost: CostBreakdown,
    /// Step reward; for port intervals, this interval's term of the summed port reward.
    pub reward: f64,
    pub overridden: Vec<bool>,
}

impl StepRecord {
    /// `p_dem + charge - (p1 + discharge + shore - curtailed + unmet)`; zero up to rounding.
    pub fn balance_residual_kw(&self) -> f64 {
        let f = &self.flow;
        self.p_dem_kw + f.charge_kw - (self.p1_kw + f.discharge_kw + self.shore_kw - f.curtailed_kw + f.unmet_kw)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next_state: SystemState,
    pub reward: f64,
    pub cost: CostBreakdown,
    pub terminated: bool,
    pub truncated_reason: TerminationReason,
    pub overridden: Vec<bool>,
    /// One record per simulated interval: one while sailing, the whole port segment in port.
    pub records: Vec<StepRecord>,
}

/// `P_1 = sum_k P_c * x_k * eta_1k`.
pub fn total_converter_power(x: &[f64], cfg: &ShipConfig) -> f64 {
    let pc = cfg.cluster_power_kw();
    x.iter()
        .enumerate()
        .map(|(k, &xk)| pc * xk * cfg.converter_efficiency(k))
        .sum()
}

/// Candidate setpoints `x + a`, clamped into `[0, 1]` with the clamped clusters flagged.
pub fn apply_action(x: &[f64], action: &[f64]) -> (Vec<f64>, Vec<bool>) {
    x.iter()
        .zip(action)
        .map(|(&xk, &ak)| {
            let c = xk + ak;
            if c < 0.0 {
                (0.0, true)
            } else if c > 1.0 {
                (1.0, true)
            } else {
                (c, false)
            }
        })
        .unzip()
}

/// Physics of one sailing interval, before reward and termination bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct SailingTransition {
    pub x: Vec<f64>,
    pub overridden: Vec<bool>,
    pub p1_kw: f64,
    pub flow: BatteryFlow,
    pub cost: CostBreakdown,
}

fn needs_protection(flow: &BatteryFlow, cfg: &ShipConfig) -> bool {
    flow.soc_next < cfg.soc_min() || flow.unmet_kw > 0.0
}

/// Applies `action` from `state` over one interval of demand `state.p_dem_kw`.
pub fn sailing_transition(state: &SystemState, action: &[f64], cfg: &ShipConfig, protect: bool) -> SailingTransition {
    let (mut x, mut overridden) = apply_action(&state.x, action);
    let mut p1 = total_converter_power(&x, cfg);
    let mut flow = battery_power(state.soc, state.p_dem_kw, p1, cfg);
    if protect && needs_protection(&flow, cfg) {
        let raised = |u: f64| -> Vec<f64> { x.iter().map(|&v| (v + u).min(1.0)).collect() };
        let ok = |u: f64| {
            let xr = raised(u);
            !needs_protection(&battery_power(state.soc, state.p_dem_kw, total_converter_power(&xr, cfg), cfg), cfg)
        };
        let u = if ok(1.0) {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if ok(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        } else {
            1.0
        };
        let xr = raised(u);
        for (o, (a, b)) in overridden.iter_mut().zip(x.iter().zip(&xr)) {
            *o |= a != b;
        }
        x = xr;
        p1 = total_converter_power(&x, cfg);
        flow = battery_power(state.soc, state.p_dem_kw, p1, cfg);
    }
    let cost = step_costs(&state.x, &x, &flow, 0.0, cfg);
    SailingTransition {
        x,
        overridden,
        p1_kw: p1,
        flow,
        cost,
    }
}

/// Episode driver over one load profile.
#[derive(Debug, Clone)]
pub struct Environment<'a> {
    cfg: &'a ShipConfig,
    mode: Mode,
    profile: Option<&'a LoadProfile>,
    cursor: usize,
    state: Option<SystemState>,
    done: bool,
    episode_cost: CostBreakdown,
    reason: TerminationReason,
}

impl<'a> Environment<'a> {
    pub fn new(cfg: &'a ShipConfig, mode: Mode) -> Result<Self, SimError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            mode,
            profile: None,
            cursor: 0,
            state: None,
            done: false,
            episode_cost: CostBreakdown::default(),
            reason: TerminationReason::None,
        })
    }

    pub fn config(&self) -> &ShipConfig {
        self.cfg
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Starts an episode: SOC at `soc_max`, clusters at the initial setpoint.
    pub fn reset(&mut self, profile: &'a LoadProfile) -> Result<SystemState, SimError> {
        if profile.is_empty() {
            return Err(ProfileError::Empty.into());
        }
        profile.validate(self.cfg.plant_ceiling_kw)?;
        if (profile.step_seconds - self.cfg.step_seconds).abs() > 1e-9 {
            return Err(SimError::InvalidConfig(format!(
                "profile '{}' has step {} s, config expects {} s",
                profile.id, profile.step_seconds, self.cfg.step_seconds
            )));
        }
        let s0 = &profile.samples[0];
        let state = SystemState {
            x: vec![self.cfg.initial_cluster_power; self.cfg.n_clusters],
            soc: self.cfg.soc_max(),
            spa: s0.spa,
            p_dem_kw: s0.p_dem_kw,
        };
        self.profile = Some(profile);
        self.cursor = 0;
        self.state = Some(state.clone());
        self.done = false;
        self.episode_cost = CostBreakdown::default();
        self.reason = TerminationReason::None;
        Ok(state)
    }

    pub fn state(&self) -> Option<&SystemState> {
        self.state.as_ref()
    }

    /// Profile index of the current state.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn termination(&self) -> TerminationReason {
        self.reason
    }

    /// Costs accumulated since the last reset.
    pub fn episode_cost(&self) -> CostBreakdown {
        self.episode_cost
    }

    pub fn step(&mut self, action: &Action) -> Result<StepOutcome, SimError> {
        let profile = self.profile.ok_or(SimError::NotReset)?;
        if self.done {
            return Err(SimError::EpisodeTerminated);
        }
        let m = self.cfg.n_clusters;
        if action.len() != m {
            return Err(SimError::Dimension {
                what: "action",
                expected: m,
                got: action.len(),
            });
        }
        let limit = self.cfg.action_limit;
        if let Some(&v) = action.as_slice().iter().find(|v| !(v.abs() <= limit)) {
            return Err(SimError::ActionOutOfBounds { value: v, limit });
        }
        let state = self.state.clone().ok_or(SimError::NotReset)?;
        let outcome = if state.spa {
            self.port_phase(profile, &state)
        } else {
            self.sailing_step(profile, &state, action.as_slice())
        };
        self.episode_cost += outcome.cost;
        self.done = outcome.terminated;
        self.reason = outcome.truncated_reason;
        self.state = Some(outcome.next_state.clone());
        Ok(outcome)
    }

    fn sailing_step(&mut self, profile: &LoadProfile, state: &SystemState, action: &[f64]) -> StepOutcome {
        let cfg = self.cfg;
        let tr = sailing_transition(state, action, cfg, self.mode == Mode::Evaluate);
        let soc_floor = tr.flow.soc_next < cfg.soc_terminate_floor;
        let unmet = tr.flow.unmet_kw > 0.0;
        let reason = if soc_floor {
            TerminationReason::SocFloor
        } else if unmet {
            TerminationReason::Infeasible
        } else {
            TerminationReason::None
        };
        let r = reward(!(soc_floor || unmet), &tr.overridden, tr.cost.total() / cfg.reward_cost_unit, None);
        let t = self.cursor;
        // A valid profile always ends in port, so a sailing cursor has a successor.
        let next = profile.samples[t + 1];
        self.cursor = t + 1;
        let record = StepRecord {
            t_s: t as f64 * cfg.step_seconds,
            p_dem_kw: state.p_dem_kw,
            x: tr.x.clone(),
            soc: tr.flow.soc_next,
            spa: false,
            p1_kw: tr.p1_kw,
            shore_kw: 0.0,
            flow: tr.flow,
            cost: tr.cost,
            reward: r,
            overridden: tr.overridden.clone(),
        };
        StepOutcome {
            next_state: SystemState {
                x: tr.x,
                soc: tr.flow.soc_next,
                spa: next.spa,
                p_dem_kw: next.p_dem_kw,
            },
            reward: r,
            cost: tr.cost,
            terminated: reason != TerminationReason::None,
            truncated_reason: reason,
            overridden: tr.overridden,
            records: vec![record],
        }
    }

    fn port_phase(&mut self, profile: &LoadProfile, state: &SystemState) -> StepOutcome {
        let cfg = self.cfg;
        let m = cfg.n_clusters;
        let end = profile.len();
        let records = simulate_port(&state.x, state.soc, &profile.samples[self.cursor..], self.cursor, cfg);
        let total: CostBreakdown = records.iter().map(|r| r.cost).sum();
        let port_costs: Vec<f64> = records.iter().map(|r| r.cost.total() / cfg.reward_cost_unit).collect();
        let r = reward(true, &[], 0.0, Some(&port_costs));
        let soc = records.last().map_or(state.soc, |r| r.soc);
        self.cursor = end - 1;
        StepOutcome {
            next_state: SystemState {
                x: vec![0.0; m],
                soc,
                spa: true,
                p_dem_kw: profile.samples[end - 1].p_dem_kw,
            },
            reward: r,
            cost: total,
            terminated: true,
            truncated_reason: TerminationReason::EndOfEpisode,
            overridden: vec![false; m],
            records,
        }
    }
}

/// Port segment starting from setpoints `prev_x` and charge `soc`: clusters shut down in
/// the first interval and shore power carries the hotel load while recharging the battery.
/// `first_index` is the profile index of `port[0]`, used for timestamps.
pub fn simulate_port(
    prev_x: &[f64],
    soc: f64,
    port: &[Sample],
    first_index: usize,
    cfg: &ShipConfig,
) -> Vec<StepRecord> {
    let m = prev_x.len();
    let zeros = vec![0.0; m];
    let mut prev = prev_x.to_vec();
    let mut soc = soc;
    let mut records = Vec::with_capacity(port.len());
    for (j, sample) in port.iter().enumerate() {
        let (flow, shore_kw) = port_charge(soc, sample.p_dem_kw, port.len() - j, cfg);
        let cost = step_costs(&prev, &zeros, &flow, shore_kw, cfg);
        records.push(StepRecord {
            t_s: (first_index + j) as f64 * cfg.step_seconds,
            p_dem_kw: sample.p_dem_kw,
            x: zeros.clone(),
            soc: flow.soc_next,
            spa: true,
            p1_kw: 0.0,
            shore_kw,
            flow,
            cost,
            reward: cost_reward(cost.total() / cfg.reward_cost_unit),
            overridden: vec![false; m],
        });
        soc = flow.soc_next;
        prev.clone_from(&zeros);
    }
    records
}
