//! Offline-optimal benchmark: backward value iteration over (time, per-unit power, SOC)
//! with uniform cluster control, plus a brute-force enumerator for tiny instances.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profiles::LoadProfile;
use crate::sim::{
    battery_and_shore_costs, battery_power, fuel_cell_costs, simulate_port, total_converter_power, write_log, Action,
    CostBreakdown, Environment, LogRow, Mode, ShipConfig, SimError, StepRecord, TerminationReason,
};

#[derive(Debug, Error)]
pub enum DpError {
    #[error("invalid DP grid: {0}")]
    InvalidGrid(String),
    #[error("no feasible policy for profile '{0}'")]
    NoFeasiblePolicy(String),
    #[error("instance too large to enumerate: {0} action sequences (limit 1e6)")]
    TooLarge(f64),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {msg}")]
    Io { path: std::path::PathBuf, msg: String },
}

/// Discretisation of the oracle. Actions are applied to every cluster alike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpGrid {
    pub soc_levels: usize,
    /// SOC grid bounds; defaults to `[soc_terminate_floor, soc_max]`.
    pub soc_range: Option<(f64, f64)>,
    pub x_levels: usize,
    /// Odd count spanning `[-a_M, a_M]`.
    pub action_levels: usize,
}

impl Default for DpGrid {
    fn default() -> Self {
        Self {
            soc_levels: 201,
            soc_range: None,
            x_levels: 101,
            action_levels: 9,
        }
    }
}

impl DpGrid {
    pub fn validate(&self) -> Result<(), DpError> {
        let bad = |m: &str| Err(DpError::InvalidGrid(m.to_string()));
        if self.action_levels == 0 {
            return bad("empty action grid");
        }
        if self.action_levels % 2 == 0 {
            return bad("action_levels must be odd so the grid contains 0");
        }
        if self.soc_levels < 2 || self.x_levels < 2 {
            return bad("soc_levels and x_levels must be >= 2");
        }
        if let Some((lo, hi)) = self.soc_range {
            if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return bad("soc_range must satisfy 0 <= lo < hi <= 1");
            }
        }
        Ok(())
    }

    pub fn soc_bounds(&self, cfg: &ShipConfig) -> (f64, f64) {
        self.soc_range.unwrap_or((cfg.soc_terminate_floor, cfg.soc_max()))
    }

    pub fn soc_points(&self, cfg: &ShipConfig) -> Vec<f64> {
        let (lo, hi) = self.soc_bounds(cfg);
        linspace(lo, hi, self.soc_levels)
    }

    pub fn x_points(&self) -> Vec<f64> {
        linspace(0.0, 1.0, self.x_levels)
    }

    pub fn actions(&self, cfg: &ShipConfig) -> Vec<f64> {
        if self.action_levels == 1 {
            return vec![0.0];
        }
        let l = cfg.action_limit;
        let half = (self.action_levels / 2) as f64;
        (0..self.action_levels)
            .map(|j| (j as f64 - half) / half * l)
            .collect()
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

/// Position on a uniform axis as `(index, weight of index + 1)`, snapping to nodes
/// within `1e-9` of a grid spacing. `None` outside the axis.
fn locate(v: f64, lo: f64, hi: f64, n: usize) -> Option<(usize, f64)> {
    let pos = (v - lo) / (hi - lo) * (n - 1) as f64;
    let r = pos.round();
    if (pos - r).abs() < 1e-9 {
        if r < 0.0 || r > (n - 1) as f64 {
            return None;
        }
        return Some((r as usize, 0.0));
    }
    if pos < 0.0 || pos > (n - 1) as f64 {
        return None;
    }
    let i = (pos.floor() as usize).min(n - 2);
    Some((i, pos - i as f64))
}

/// Value table over `x_levels x soc_levels`.
#[derive(Debug, Clone)]
struct Table {
    nx: usize,
    ns: usize,
    v: Vec<f64>,
}

impl Table {
    fn at(&self, xi: usize, si: usize) -> f64 {
        self.v[xi * self.ns + si]
    }

    /// Bilinear interpolation; nodes with zero weight are skipped so that
    /// infinite neighbours do not leak into on-grid lookups.
    fn interp(&self, x: (usize, f64), s: (usize, f64)) -> f64 {
        let mut acc = 0.0;
        for (xi, wx) in [(x.0, 1.0 - x.1), (x.0 + 1, x.1)] {
            if wx == 0.0 {
                continue;
            }
            for (si, ws) in [(s.0, 1.0 - s.1), (s.0 + 1, s.1)] {
                if ws == 0.0 {
                    continue;
                }
                acc += wx * ws * self.at(xi, si);
            }
        }
        acc
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DpSummary {
    pub profile_id: String,
    /// Optimal objective from the value table at the initial state ($).
    pub optimal_cost: f64,
    /// Cost of the extracted trajectory simulated on the exact environment ($).
    pub realized_cost: f64,
    pub realized_breakdown: CostBreakdown,
    pub end_of_sailing_soc: f64,
    pub grid: DpGrid,
    pub runtime_s: f64,
}

#[derive(Debug, Clone)]
pub struct DpSolution {
    pub summary: DpSummary,
    /// Per-unit grid (x axis of the policy).
    pub x_points: Vec<f64>,
    pub soc_points: Vec<f64>,
    pub actions: Vec<f64>,
    /// Best action index per `(t, x index, soc index)`, `u16::MAX` where infeasible.
    pub policy: Vec<u16>,
    /// Value tables `V_t` for `t = 0..=sailing_len`, flattened `(x index, soc index)`.
    values: Vec<Table>,
    /// Uniform action chosen at each sailing step.
    pub trajectory_actions: Vec<f64>,
    pub trajectory: Vec<StepRecord>,
}

impl DpSolution {
    pub fn optimal_cost(&self) -> f64 {
        self.summary.optimal_cost
    }

    /// Interpolated `V_t(x, soc)`; `None` off the grid.
    pub fn value(&self, t: usize, x: f64, soc: f64) -> Option<f64> {
        let table = self.values.get(t)?;
        let (slo, shi) = (self.soc_points[0], *self.soc_points.last()?);
        let xl = locate(x, 0.0, 1.0, table.nx)?;
        let sl = locate(soc, slo, shi, table.ns)?;
        Some(table.interp(xl, sl))
    }

    pub fn policy_action(&self, t: usize, xi: usize, si: usize) -> Option<f64> {
        let nx = self.x_points.len();
        let ns = self.soc_points.len();
        let k = *self.policy.get((t * nx + xi) * ns + si)?;
        (k != u16::MAX).then(|| self.actions[k as usize])
    }

    /// Writes `<stem>.csv` (trajectory log) and `<stem>.json` (summary) into `dir`.
    pub fn export(&self, dir: &Path, stem: &str, n_clusters: usize) -> Result<(), DpError> {
        let rows: Vec<LogRow> = self.trajectory.iter().map(LogRow::from).collect();
        write_log(&dir.join(format!("{stem}.csv")), &rows, n_clusters)?;
        let path = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(&self.summary).expect("summary serialises");
        std::fs::write(&path, text).map_err(|e| DpError::Io {
            path,
            msg: e.to_string(),
        })
    }
}

/// End-of-sailing value: the exact port-phase cost plus the SOC shortfall penalty.
fn terminal_cost(x: f64, soc: f64, profile: &LoadProfile, cfg1: &ShipConfig) -> f64 {
    let s = profile.sailing_len();
    let port = simulate_port(&[x], soc, &profile.samples[s..], s, cfg1);
    let c: f64 = port.iter().map(|r| r.cost.total()).sum();
    c + cfg1.terminal_shortfall_penalty * (cfg1.soc_min() - soc).max(0.0)
}

/// Backward value iteration followed by greedy forward extraction on the exact environment.
pub fn solve(profile: &LoadProfile, cfg: &ShipConfig, grid: &DpGrid) -> Result<DpSolution, DpError> {
    let started = Instant::now();
    grid.validate()?;
    cfg.validate()?;
    profile.validate(cfg.plant_ceiling_kw).map_err(SimError::from)?;
    let cfg1 = cfg.with_clusters(1);
    let xs = grid.x_points();
    let socs = grid.soc_points(cfg);
    let acts = grid.actions(cfg);
    let (slo, shi) = grid.soc_bounds(cfg);
    let (nx, ns, na) = (xs.len(), socs.len(), acts.len());
    let steps = profile.sailing_len();

    // Fuel-cell costs depend only on the (x, x') pair.
    let mut fc = vec![None; nx * na];
    for (xi, &x) in xs.iter().enumerate() {
        for (ai, &a) in acts.iter().enumerate() {
            let xn = x + a;
            if let Some(loc) = locate(xn, 0.0, 1.0, nx) {
                let xn = if loc.1 == 0.0 { xs[loc.0] } else { xn };
                let c = fuel_cell_costs(&[x], &[xn], &cfg1).total();
                fc[xi * na + ai] = Some((xn, loc, c, total_converter_power(&[xn], &cfg1)));
            }
        }
    }

    let mut values = vec![
        Table {
            nx,
            ns,
            v: vec![f64::INFINITY; nx * ns]
        };
        steps + 1
    ];
    for (xi, &x) in xs.iter().enumerate() {
        for (si, &soc) in socs.iter().enumerate() {
            values[steps].v[xi * ns + si] = terminal_cost(x, soc, profile, &cfg1);
        }
    }
    let mut policy = vec![u16::MAX; steps * nx * ns];
    for t in (0..steps).rev() {
        let p_dem = profile.samples[t].p_dem_kw;
        let (before, after) = values.split_at_mut(t + 1);
        let next = &after[0];
        let cur = &mut before[t];
        for xi in 0..nx {
            for si in 0..ns {
                let soc = socs[si];
                let mut best = f64::INFINITY;
                let mut best_a = u16::MAX;
                for ai in 0..na {
                    let Some((_, xloc, fc_cost, p1)) = fc[xi * na + ai] else {
                        continue;
                    };
                    let flow = battery_power(soc, p_dem, p1, &cfg1);
                    if flow.soc_next < cfg1.soc_terminate_floor || flow.unmet_kw > 0.0 {
                        continue;
                    }
                    let Some(sloc) = locate(flow.soc_next, slo, shi, ns) else {
                        continue;
                    };
                    let stage = fc_cost + battery_and_shore_costs(&flow, 0.0, &cfg1).total();
                    let q = stage + next.interp(xloc, sloc);
                    if q < best {
                        best = q;
                        best_a = ai as u16;
                    }
                }
                cur.v[xi * ns + si] = best;
                policy[(t * nx + xi) * ns + si] = best_a;
            }
        }
    }

    let x0 = cfg1.initial_cluster_power;
    let soc0 = cfg1.soc_max();
    let v0 = locate(x0, 0.0, 1.0, nx)
        .zip(locate(soc0, slo, shi, ns))
        .map(|(xl, sl)| values[0].interp(xl, sl))
        .unwrap_or(f64::INFINITY);
    if !v0.is_finite() {
        return Err(DpError::NoFeasiblePolicy(profile.id.clone()));
    }

    // Forward pass: one-step lookahead on the exact state against V_{t+1}.
    let mut env = Environment::new(cfg, Mode::Train)?;
    let mut state = env.reset(profile)?;
    let mut trajectory = Vec::new();
    let mut chosen = Vec::with_capacity(steps);
    let m = cfg.n_clusters;
    for t in 0..steps {
        let x = state.x[0];
        let mut best = (f64::INFINITY, 0.0);
        for &a in &acts {
            let xn = x + a;
            let Some(xloc) = locate(xn, 0.0, 1.0, nx) else {
                continue;
            };
            let xn = if xloc.1 == 0.0 { xs[xloc.0] } else { xn };
            let p1 = total_converter_power(&[xn], &cfg1);
            let flow = battery_power(state.soc, state.p_dem_kw, p1, &cfg1);
            if flow.soc_next < cfg1.soc_terminate_floor || flow.unmet_kw > 0.0 {
                continue;
            }
            let Some(sloc) = locate(flow.soc_next, slo, shi, ns) else {
                continue;
            };
            let stage = fuel_cell_costs(&[x], &[xn], &cfg1).total() + battery_and_shore_costs(&flow, 0.0, &cfg1).total();
            let q = stage + values[t + 1].interp(xloc, sloc);
            if q < best.0 {
                best = (q, a);
            }
        }
        if !best.0.is_finite() {
            return Err(DpError::NoFeasiblePolicy(profile.id.clone()));
        }
        chosen.push(best.1);
        let action = Action::clipped(vec![best.1; m], cfg.action_limit);
        let out = env.step(&action)?;
        trajectory.extend(out.records);
        state = out.next_state;
        if out.terminated {
            return Err(DpError::NoFeasiblePolicy(profile.id.clone()));
        }
    }
    let end_soc = state.soc;
    let out = env.step(&Action::zeros(m))?;
    trajectory.extend(out.records);
    debug_assert_eq!(out.truncated_reason, TerminationReason::EndOfEpisode);
    let realized = env.episode_cost();

    Ok(DpSolution {
        summary: DpSummary {
            profile_id: profile.id.clone(),
            optimal_cost: v0,
            realized_cost: realized.total(),
            realized_breakdown: realized,
            end_of_sailing_soc: end_soc,
            grid: grid.clone(),
            runtime_s: started.elapsed().as_secs_f64(),
        },
        x_points: xs,
        soc_points: socs,
        actions: acts,
        policy,
        values,
        trajectory_actions: chosen,
        trajectory,
    })
}

/// Exhaustive minimum over all uniform action sequences on the exact environment.
/// Sequences that clamp a setpoint or end the episode early are excluded; the
/// objective includes the same terminal shortfall penalty as [`solve`].
pub fn enumerate(profile: &LoadProfile, cfg: &ShipConfig, grid: &DpGrid) -> Result<f64, DpError> {
    grid.validate()?;
    let acts = grid.actions(cfg);
    let steps = profile.sailing_len();
    let count = (acts.len() as f64).powi(steps as i32);
    if count > 1e6 {
        return Err(DpError::TooLarge(count));
    }
    let cfg1 = cfg.with_clusters(1);
    let mut env = Environment::new(&cfg1, Mode::Train)?;
    let mut best = f64::INFINITY;
    let mut seq = vec![0usize; steps];
    'outer: loop {
        let mut state = env.reset(profile)?;
        let mut feasible = true;
        for &ai in &seq {
            let a = acts[ai];
            let xn = state.x[0] + a;
            if !(-1e-12..=1.0 + 1e-12).contains(&xn) {
                feasible = false;
                break;
            }
            let out = env.step(&Action::clipped(vec![a], cfg1.action_limit))?;
            if out.terminated {
                feasible = false;
                break;
            }
            state = out.next_state;
        }
        if feasible {
            let end_soc = state.soc;
            env.step(&Action::zeros(1))?;
            let obj =
                env.episode_cost().total() + cfg1.terminal_shortfall_penalty * (cfg1.soc_min() - end_soc).max(0.0);
            best = best.min(obj);
        }
        // Next sequence in lexicographic order.
        for d in (0..steps).rev() {
            seq[d] += 1;
            if seq[d] < acts.len() {
                continue 'outer;
            }
            seq[d] = 0;
        }
        break;
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(DpError::NoFeasiblePolicy(profile.id.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{ClassLabel, Sample};

    fn profile(sailing: &[f64], port: &[f64]) -> LoadProfile {
        LoadProfile {
            id: "dp".into(),
            samples: sailing
                .iter()
                .map(|&p| Sample { p_dem_kw: p, spa: false })
                .chain(port.iter().map(|&p| Sample { p_dem_kw: p, spa: true }))
                .collect(),
            step_seconds: 60.0,
            class_label: ClassLabel::Low,
        }
    }

    #[test]
    fn grid_validation() {
        let g = DpGrid {
            action_levels: 0,
            ..Default::default()
        };
        assert!(g.validate().unwrap_err().to_string().contains("empty action grid"));
        let g = DpGrid {
            action_levels: 4,
            ..Default::default()
        };
        assert!(g.validate().is_err());
        let a = DpGrid::default().actions(&ShipConfig::default());
        assert_eq!(a.len(), 9);
        assert_eq!(a[4], 0.0);
        assert_eq!(a[0], -0.04);
        assert_eq!(a[8], 0.04);
        assert!((a[5] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn locate_snaps_and_rejects() {
        assert_eq!(locate(0.5, 0.0, 1.0, 11), Some((5, 0.0)));
        assert_eq!(locate(0.5 + 1e-13, 0.0, 1.0, 11), Some((5, 0.0)));
        let (i, w) = locate(0.55, 0.0, 1.0, 11).unwrap();
        assert_eq!(i, 5);
        assert!((w - 0.5).abs() < 1e-12);
        assert_eq!(locate(1.2, 0.0, 1.0, 11), None);
        assert_eq!(locate(-0.01, 0.0, 1.0, 11), None);
    }

    #[test]
    fn idle_voyage_costs_port_electricity_only() {
        let cfg = ShipConfig::default();
        let p = profile(&[0.0; 10], &[120.0; 5]);
        let sol = solve(&p, &cfg, &DpGrid::default()).unwrap();
        assert!(sol.trajectory_actions.iter().all(|&a| a == 0.0));
        let c = sol.summary.realized_breakdown;
        assert_eq!(c.c_f, 0.0);
        assert_eq!(c.c_h, 0.0);
        assert_eq!(c.c_b, 0.0);
        let expected = 5.0 * 120.0 / 60.0 * cfg.prices.elec_per_kwh;
        assert!((c.c_e - expected).abs() < 1e-12);
        assert!((sol.optimal_cost() - expected).abs() < 1e-9);
    }

    #[test]
    fn single_step_equals_best_single_action() {
        let cfg = ShipConfig::default();
        let p = profile(&[800.0], &[100.0; 3]);
        let grid = DpGrid::default();
        let e = enumerate(&p, &cfg, &grid).unwrap();
        let sol = solve(&p, &cfg, &grid).unwrap();
        assert!((sol.optimal_cost() - e).abs() <= 1e-9 * e.abs());
    }

    #[test]
    fn infeasible_profile_reported() {
        let cfg = ShipConfig::default();
        let p = profile(&[4000.0; 3], &[100.0]);
        assert!(matches!(
            solve(&p, &cfg, &DpGrid::default()),
            Err(DpError::NoFeasiblePolicy(_))
        ));
    }

    #[test]
    fn too_large_enumeration_rejected() {
        let cfg = ShipConfig::default();
        let p = profile(&[100.0; 10], &[100.0]);
        assert!(matches!(enumerate(&p, &cfg, &DpGrid::default()), Err(DpError::TooLarge(_))));
    }
}
