use serde::{Deserialize, Serialize};

use super::SimError;

/// Battery electrical limits and round-trip efficiencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryParams {
    pub charge_efficiency: f64,
    pub discharge_efficiency: f64,
    /// Bus-side charge power limit (kW).
    pub max_charge_kw: f64,
    /// Bus-side discharge power limit (kW).
    pub max_discharge_kw: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self {
            charge_efficiency: 0.95,
            discharge_efficiency: 0.95,
            max_charge_kw: 2000.0,
            max_discharge_kw: 2500.0,
        }
    }
}

/// Stack efficiency surrogate for hydrogen consumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuelCellParams {
    /// Piecewise-linear `[per_unit_power, efficiency]` table, strictly increasing in power,
    /// covering 0.0 to 1.0.
    pub efficiency_curve: Vec<[f64; 2]>,
    /// Lower heating value of hydrogen (kWh/kg).
    pub lhv_kwh_per_kg: f64,
}

impl Default for FuelCellParams {
    fn default() -> Self {
        Self {
            efficiency_curve: vec![
                [0.0, 0.30],
                [0.05, 0.36],
                [0.10, 0.42],
                [0.20, 0.49],
                [0.35, 0.54],
                [0.50, 0.56],
                [0.75, 0.53],
                [1.00, 0.48],
            ],
            lhv_kwh_per_kg: 33.3,
        }
    }
}

/// Fuel-cell degradation cost coefficients, quoted for the whole installed plant.
/// Each cluster is charged its share `1 / n_clusters` of every term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FcDegradation {
    /// Cost of one cold start ($).
    pub start_cost: f64,
    /// Cost per unit of per-unit setpoint change ($ / p.u.).
    pub transient_cost_per_pu: f64,
    /// Running below this per-unit power counts as low-power operation.
    pub low_power_threshold: f64,
    pub low_power_cost_per_h: f64,
    /// Running above this per-unit power counts as high-power operation.
    pub high_power_threshold: f64,
    pub high_power_cost_per_h: f64,
}

impl Default for FcDegradation {
    fn default() -> Self {
        Self {
            start_cost: 30.0,
            transient_cost_per_pu: 150.0,
            low_power_threshold: 0.2,
            low_power_cost_per_h: 60.0,
            high_power_threshold: 0.85,
            high_power_cost_per_h: 120.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryDegradation {
    /// Cost per kWh of bus-side throughput, charge and discharge alike.
    pub cost_per_kwh: f64,
}

impl Default for BatteryDegradation {
    fn default() -> Self {
        Self { cost_per_kwh: 0.08 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Prices {
    pub h2_per_kg: f64,
    pub elec_per_kwh: f64,
    pub fc_degradation: FcDegradation,
    pub battery_degradation: BatteryDegradation,
}

impl Default for Prices {
    fn default() -> Self {
        Self {
            h2_per_kg: 5.0,
            elec_per_kwh: 0.125,
            fc_degradation: FcDegradation::default(),
            battery_degradation: BatteryDegradation::default(),
        }
    }
}

/// Emission factors. Defaults give 0.182 kg CO2e per $ of hydrogen and
/// 1.87 kg CO2e per $ of shore electricity at the default prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GwpFactors {
    pub kg_co2e_per_kg_h2: f64,
    pub kg_co2e_per_kwh_elec: f64,
}

impl Default for GwpFactors {
    fn default() -> Self {
        Self {
            kg_co2e_per_kg_h2: 0.182 * 5.0,
            kg_co2e_per_kwh_elec: 1.87 * 0.125,
        }
    }
}

/// Plant and economic parameters of the plug-in hybrid PEMFC/battery ship.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShipConfig {
    /// Total installed fuel-cell power (kW).
    pub rated_fc_power_kw: f64,
    pub n_clusters: usize,
    pub battery_capacity_kwh: f64,
    /// `(soc_min, soc_max)`.
    pub soc_bounds: (f64, f64),
    /// SOC below this ends the episode as over-discharged.
    pub soc_terminate_floor: f64,
    /// One value per cluster, or a single value applied to all clusters.
    pub converter_efficiencies: Vec<f64>,
    /// Largest per-unit setpoint change per step, in either direction.
    pub action_limit: f64,
    pub step_seconds: f64,
    /// Per-unit setpoint of every cluster at reset.
    pub initial_cluster_power: f64,
    /// Original plant capacity; used to validate profiles and scale observations.
    pub plant_ceiling_kw: f64,
    /// Objective penalty per unit of SOC below `soc_min` at the end of sailing (DP oracle only).
    pub terminal_shortfall_penalty: f64,
    /// Currency amount that counts as one cost unit inside `tanh(1 / cost)` ($).
    pub reward_cost_unit: f64,
    pub battery: BatteryParams,
    pub fuel_cell: FuelCellParams,
    pub prices: Prices,
    pub gwp_factors: GwpFactors,
}

impl Default for ShipConfig {
    fn default() -> Self {
        Self {
            rated_fc_power_kw: 2940.0,
            n_clusters: 4,
            battery_capacity_kwh: 581.0,
            soc_bounds: (0.2, 0.9),
            soc_terminate_floor: 0.2,
            converter_efficiencies: vec![0.95],
            action_limit: 0.04,
            step_seconds: 60.0,
            initial_cluster_power: 0.0,
            plant_ceiling_kw: 4370.0,
            terminal_shortfall_penalty: 5000.0,
            reward_cost_unit: 1.0,
            battery: BatteryParams::default(),
            fuel_cell: FuelCellParams::default(),
            prices: Prices::default(),
            gwp_factors: GwpFactors::default(),
        }
    }
}

impl ShipConfig {
    /// Same plant with a different cluster count.
    pub fn with_clusters(&self, n_clusters: usize) -> Self {
        let mut cfg = self.clone();
        if cfg.converter_efficiencies.len() != 1 {
            let eta = cfg.converter_efficiencies.first().copied().unwrap_or(0.95);
            cfg.converter_efficiencies = vec![eta];
        }
        cfg.n_clusters = n_clusters;
        cfg
    }

    pub fn soc_min(&self) -> f64 {
        self.soc_bounds.0
    }

    pub fn soc_max(&self) -> f64 {
        self.soc_bounds.1
    }

    /// Rated power of one cluster, `P_fc,rated / m`.
    pub fn cluster_power_kw(&self) -> f64 {
        self.rated_fc_power_kw / self.n_clusters as f64
    }

    /// Share of the plant-level degradation coefficients carried by one cluster.
    pub fn cluster_share(&self) -> f64 {
        1.0 / self.n_clusters as f64
    }

    pub fn converter_efficiency(&self, cluster: usize) -> f64 {
        if self.converter_efficiencies.len() == 1 {
            self.converter_efficiencies[0]
        } else {
            self.converter_efficiencies[cluster]
        }
    }

    pub fn step_hours(&self) -> f64 {
        self.step_seconds / 3600.0
    }

    /// Flattened state dimension, `m + 3`.
    pub fn state_dim(&self) -> usize {
        self.n_clusters + 3
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        let positive = [
            ("rated_fc_power_kw", self.rated_fc_power_kw),
            ("battery_capacity_kwh", self.battery_capacity_kwh),
            ("action_limit", self.action_limit),
            ("step_seconds", self.step_seconds),
            ("plant_ceiling_kw", self.plant_ceiling_kw),
            ("reward_cost_unit", self.reward_cost_unit),
            ("fuel_cell.lhv_kwh_per_kg", self.fuel_cell.lhv_kwh_per_kg),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        if self.n_clusters == 0 {
            return bad("n_clusters must be >= 1".into());
        }
        let (lo, hi) = self.soc_bounds;
        let floor = self.soc_terminate_floor;
        if !(0.0 <= floor && floor <= lo && lo < hi && hi <= 1.0) {
            return bad(format!(
                "require 0 <= soc_terminate_floor ({floor}) <= soc_min ({lo}) < soc_max ({hi}) <= 1"
            ));
        }
        match self.converter_efficiencies.len() {
            1 => {}
            n if n == self.n_clusters => {}
            n => {
                return bad(format!(
                    "converter_efficiencies has {n} entries for {} clusters",
                    self.n_clusters
                ))
            }
        }
        if let Some(eta) = self
            .converter_efficiencies
            .iter()
            .find(|&&e| !(e > 0.0 && e <= 1.0))
        {
            return bad(format!("converter efficiency {eta} outside (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.initial_cluster_power) {
            return bad("initial_cluster_power must lie in [0, 1]".into());
        }
        let b = &self.battery;
        for (name, eta) in [
            ("battery.charge_efficiency", b.charge_efficiency),
            ("battery.discharge_efficiency", b.discharge_efficiency),
        ] {
            if !(eta > 0.0 && eta <= 1.0) {
                return bad(format!("{name} must lie in (0, 1], got {eta}"));
            }
        }
        if !(b.max_charge_kw >= 0.0 && b.max_discharge_kw >= 0.0) {
            return bad("battery power limits must be >= 0".into());
        }
        let curve = &self.fuel_cell.efficiency_curve;
        if curve.len() < 2 {
            return bad("fuel_cell.efficiency_curve needs at least two points".into());
        }
        if curve[0][0] != 0.0 || curve[curve.len() - 1][0] != 1.0 {
            return bad("fuel_cell.efficiency_curve must span per-unit power 0.0 to 1.0".into());
        }
        if curve.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return bad("fuel_cell.efficiency_curve powers must be strictly increasing".into());
        }
        if curve.iter().any(|p| !(p[1] > 0.0 && p[1] <= 1.0)) {
            return bad("fuel_cell.efficiency_curve efficiencies must lie in (0, 1]".into());
        }
        let p = &self.prices;
        let d = &p.fc_degradation;
        let non_negative = [
            p.h2_per_kg,
            p.elec_per_kwh,
            d.start_cost,
            d.transient_cost_per_pu,
            d.low_power_cost_per_h,
            d.high_power_cost_per_h,
            p.battery_degradation.cost_per_kwh,
            self.gwp_factors.kg_co2e_per_kg_h2,
            self.gwp_factors.kg_co2e_per_kwh_elec,
            self.terminal_shortfall_penalty,
        ];
        if non_negative.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("prices, degradation coefficients and GWP factors must be >= 0".into());
        }
        Ok(())
    }
}
