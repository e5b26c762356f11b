use super::{BatteryFlow, CostBreakdown, ShipConfig};

/// Stack efficiency at per-unit power `x`, linearly interpolated in the configured curve.
pub fn stack_efficiency(x: f64, cfg: &ShipConfig) -> f64 {
    let curve = &cfg.fuel_cell.efficiency_curve;
    let x = x.clamp(0.0, 1.0);
    let i = curve.partition_point(|p| p[0] <= x).clamp(1, curve.len() - 1);
    let (a, b) = (curve[i - 1], curve[i]);
    let w = (x - a[0]) / (b[0] - a[0]);
    a[1] + w * (b[1] - a[1])
}

/// Hydrogen consumed by one cluster holding per-unit power `x` for one step (kg).
pub fn cluster_h2_kg(x: f64, cfg: &ShipConfig) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let energy_kwh = cfg.cluster_power_kw() * x * cfg.step_hours();
    energy_kwh / (stack_efficiency(x, cfg) * cfg.fuel_cell.lhv_kwh_per_kg)
}

/// Setpoints reached by summing actions carry rounding noise; within this distance
/// of zero or a band edge they count as sitting on it.
const BAND_TOLERANCE: f64 = 1e-9;

/// Degradation of one cluster moving from `prev` to `x` and holding `x` for one step ($).
pub fn cluster_degradation(prev: f64, x: f64, cfg: &ShipConfig) -> f64 {
    let d = &cfg.prices.fc_degradation;
    let dt = cfg.step_hours();
    let mut c = d.transient_cost_per_pu * (x - prev).abs();
    let running = x > BAND_TOLERANCE;
    if prev <= BAND_TOLERANCE && running {
        c += d.start_cost;
    }
    if running && x < d.low_power_threshold - BAND_TOLERANCE {
        c += d.low_power_cost_per_h * dt;
    }
    if x > d.high_power_threshold + BAND_TOLERANCE {
        c += d.high_power_cost_per_h * dt;
    }
    c * cfg.cluster_share()
}

/// Fuel-cell terms (`c_f`, `c_h`, hydrogen mass and its GWP) summed over clusters.
pub fn fuel_cell_costs(prev_x: &[f64], x: &[f64], cfg: &ShipConfig) -> CostBreakdown {
    let mut c = CostBreakdown::default();
    for (&p, &xk) in prev_x.iter().zip(x) {
        c.c_f += cluster_degradation(p, xk, cfg);
        c.h2_kg += cluster_h2_kg(xk, cfg);
    }
    c.c_h = c.h2_kg * cfg.prices.h2_per_kg;
    c.gwp_h2_kg = c.h2_kg * cfg.gwp_factors.kg_co2e_per_kg_h2;
    c
}

/// Battery throughput and shore-electricity terms for one step.
pub fn battery_and_shore_costs(flow: &BatteryFlow, shore_kw: f64, cfg: &ShipConfig) -> CostBreakdown {
    let dt = cfg.step_hours();
    let shore_kwh = shore_kw * dt;
    CostBreakdown {
        c_b: cfg.prices.battery_degradation.cost_per_kwh * flow.throughput_kwh(dt),
        c_e: shore_kwh * cfg.prices.elec_per_kwh,
        shore_kwh,
        gwp_elec_kg: shore_kwh * cfg.gwp_factors.kg_co2e_per_kwh_elec,
        ..Default::default()
    }
}

/// Full cost of one step in which clusters move from `prev_x` to `x`.
pub fn step_costs(
    prev_x: &[f64],
    x: &[f64],
    flow: &BatteryFlow,
    shore_kw: f64,
    cfg: &ShipConfig,
) -> CostBreakdown {
    fuel_cell_costs(prev_x, x, cfg) + battery_and_shore_costs(flow, shore_kw, cfg)
}
