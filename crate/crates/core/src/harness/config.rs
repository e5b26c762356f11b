use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::dp::DpGrid;
use crate::profiles::{ClassMix, GeneratorConfig};
use crate::sim::ShipConfig;
use crate::td3::Td3Config;

/// When a seed counts as converged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// The final evaluations must average below this multiple of the zero-action cost.
    pub baseline_factor: f64,
    pub final_evals: usize,
    /// Trailing window, in episodes, over which the eval trend is tested.
    pub trend_episodes: usize,
    /// A trend slope whose t-statistic exceeds this counts as rising.
    pub trend_t_max: f64,
    /// Moving-average window for the aggregate curves, in eval points.
    pub moving_average_window: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            baseline_factor: 2.0,
            final_evals: 10,
            trend_episodes: 1000,
            trend_t_max: 2.0,
            moving_average_window: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub n_networks: usize,
    pub min_units: usize,
    pub max_units: usize,
    pub batch: usize,
    pub step: f64,
    pub tolerance: f64,
    /// Share of checked parameters that must be within tolerance.
    pub min_pass_fraction: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            n_networks: 20,
            min_units: 3,
            max_units: 8,
            batch: 4,
            step: 1e-5,
            tolerance: 1e-4,
            min_pass_fraction: 0.99,
        }
    }
}

/// Everything a run needs. Missing keys in a TOML file take the desk-preset values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub n_seeds: usize,
    pub max_episodes: usize,
    pub eval_every_episodes: usize,
    pub eval_voyages: usize,
    /// Overrides `ship.n_clusters`.
    pub n_clusters: usize,
    /// Voyages generated when `profiles_dir` is unset.
    pub n_profiles: usize,
    /// Directory with `train/` and `validation/` profile CSVs.
    pub profiles_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub convergence: ConvergenceConfig,
    pub ship: ShipConfig,
    pub generator: GeneratorConfig,
    pub td3: Td3Config,
    pub dp_grid: DpGrid,
    pub gradcheck: GradcheckConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl RunConfig {
    /// Minutes-scale preset: uniform control, small networks, low and moderate voyages only.
    pub fn desk() -> Self {
        Self {
            seed: 0,
            n_seeds: 5,
            max_episodes: 1500,
            eval_every_episodes: 50,
            eval_voyages: 10,
            n_clusters: 1,
            n_profiles: 120,
            profiles_dir: None,
            output_dir: None,
            convergence: ConvergenceConfig::default(),
            ship: ShipConfig {
                reward_cost_unit: 10.0,
                ..ShipConfig::default()
            },
            generator: GeneratorConfig {
                class_mix: ClassMix {
                    low: 1.0,
                    moderate: 1.0,
                    high: 0.0,
                },
                validation_fraction: 0.2,
                ..GeneratorConfig::default()
            },
            td3: Td3Config {
                hidden: vec![64, 64],
                batch_size: 64,
                exploration_sigma: 0.3,
                replay_capacity: 200_000,
                ..Td3Config::default()
            },
            dp_grid: DpGrid::default(),
            gradcheck: GradcheckConfig::default(),
        }
    }

    /// Full protocol: 28 seeds, 8000 episodes, 4 clusters, 256-unit hidden layers.
    pub fn paper() -> Self {
        Self {
            n_seeds: 28,
            max_episodes: 8000,
            eval_every_episodes: 100,
            eval_voyages: 10,
            n_clusters: 4,
            n_profiles: 200,
            generator: GeneratorConfig::default(),
            td3: Td3Config::default(),
            ..Self::desk()
        }
    }

    pub fn preset(name: &str) -> Result<Self, HarnessError> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            other => Err(HarnessError::InvalidConfig(format!(
                "unknown preset '{other}' (expected 'desk' or 'paper')"
            ))),
        }
    }

    /// Parses TOML. A top-level `preset = "desk" | "paper"` picks the base the other keys override.
    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
        let base = match table.remove("preset") {
            Some(toml::Value::String(name)) => Self::preset(&name).map_err(|e| e.to_string())?,
            Some(_) => return Err("preset must be a string".into()),
            None => Self::desk(),
        };
        let mut merged = toml::Table::try_from(&base).map_err(|e| e.to_string())?;
        merge(&mut merged, table);
        let cfg: Self = merged.try_into().map_err(|e: toml::de::Error| e.to_string())?;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(super::io_err(path))?;
        Self::from_toml_str(&text).map_err(|msg| HarnessError::ConfigFile {
            path: path.to_path_buf(),
            msg,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("run config serialises")
    }

    /// Ship config with the run's cluster count.
    pub fn ship_config(&self) -> ShipConfig {
        let mut s = self.ship.clone();
        s.n_clusters = self.n_clusters;
        s
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_string()));
        if self.n_seeds < 1 {
            return bad("n_seeds must be >= 1");
        }
        if self.max_episodes < 1 || self.eval_every_episodes < 1 || self.eval_voyages < 1 {
            return bad("max_episodes, eval_every_episodes and eval_voyages must be >= 1");
        }
        if self.n_clusters < 1 {
            return bad("n_clusters must be >= 1");
        }
        let c = &self.convergence;
        if !(c.baseline_factor > 0.0) || c.final_evals < 1 || c.moving_average_window < 1 {
            return bad("convergence needs baseline_factor > 0, final_evals >= 1 and moving_average_window >= 1");
        }
        let g = &self.gradcheck;
        if g.min_units < 1 || g.min_units > g.max_units || g.batch < 1 || !(g.step > 0.0) || !(g.tolerance > 0.0) {
            return bad("gradcheck needs 1 <= min_units <= max_units, batch >= 1, step > 0 and tolerance > 0");
        }
        self.ship_config().validate()?;
        self.generator.validate()?;
        self.td3.validate()?;
        self.dp_grid.validate()?;
        Ok(())
    }
}

/// Recursive overlay of `over` onto `base`; nested tables merge, everything else replaces.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_match_protocol() {
        let p = RunConfig::paper();
        p.validate().unwrap();
        assert_eq!(
            (p.n_seeds, p.max_episodes, p.eval_every_episodes, p.eval_voyages, p.n_clusters),
            (28, 8000, 100, 10, 4)
        );
        let d = RunConfig::desk();
        d.validate().unwrap();
        assert_eq!((d.n_seeds, d.max_episodes, d.eval_every_episodes, d.n_clusters), (5, 1500, 50, 1));
    }

    #[test]
    fn toml_overrides_preset_and_round_trips() {
        let cfg = RunConfig::from_toml_str("preset = \"paper\"\nn_seeds = 3\n[td3]\ngamma = 0.95\n").unwrap();
        assert_eq!(cfg.n_seeds, 3);
        assert_eq!(cfg.n_clusters, 4);
        assert_eq!(cfg.td3.gamma, 0.95);
        assert_eq!(cfg.td3.hidden, vec![256, 256]);
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(RunConfig::from_toml_str("n_seeds = 0").is_err());
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
        assert!(RunConfig::from_toml_str("preset = \"huge\"").is_err());
        assert!(RunConfig::from_toml_str("[td3]\ntau = 2.0").is_err());
    }
}
