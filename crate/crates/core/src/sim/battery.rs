use serde::{Deserialize, Serialize};

use super::ShipConfig;

/// Bus-side power flows through the battery over one step.
///
/// Balance: `p_dem + charge = p1 + discharge + shore - curtailed + unmet`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BatteryFlow {
    pub discharge_kw: f64,
    pub charge_kw: f64,
    /// Fuel-cell surplus the battery could not absorb.
    pub curtailed_kw: f64,
    /// Demand neither source could serve.
    pub unmet_kw: f64,
    pub soc_next: f64,
}

impl BatteryFlow {
    /// Signed battery power: positive discharging, negative charging.
    pub fn batt_kw(&self) -> f64 {
        self.discharge_kw - self.charge_kw
    }

    /// Bus-side energy moved through the battery (kWh).
    pub fn throughput_kwh(&self, step_hours: f64) -> f64 {
        (self.discharge_kw + self.charge_kw) * step_hours
    }
}

/// Sailing-mode power split: the battery covers `p_dem - p1` when positive and absorbs
/// the surplus when negative, within its power limits, `soc_max` and stored energy.
/// SOC follows coulomb counting with separate charge and discharge efficiencies.
pub fn battery_power(soc: f64, p_dem_kw: f64, p1_kw: f64, cfg: &ShipConfig) -> BatteryFlow {
    let dt = cfg.step_hours();
    let cap = cfg.battery_capacity_kwh;
    let b = &cfg.battery;
    let net = p_dem_kw - p1_kw;
    let mut flow = BatteryFlow {
        soc_next: soc,
        ..Default::default()
    };
    if net > 0.0 {
        let energy_limited = soc.max(0.0) * cap * b.discharge_efficiency / dt;
        let discharge = net.min(b.max_discharge_kw).min(energy_limited);
        flow.discharge_kw = discharge;
        flow.unmet_kw = net - discharge;
        flow.soc_next = if discharge == energy_limited {
            0.0
        } else {
            (soc - discharge / b.discharge_efficiency * dt / cap).max(0.0)
        };
    } else if net < 0.0 {
        let surplus = -net;
        let headroom = (cfg.soc_max() - soc).max(0.0) * cap / (b.charge_efficiency * dt);
        let charge = surplus.min(b.max_charge_kw).min(headroom);
        flow.charge_kw = charge;
        flow.curtailed_kw = surplus - charge;
        flow.soc_next = if charge == headroom && headroom > 0.0 {
            cfg.soc_max()
        } else {
            (soc + charge * b.charge_efficiency * dt / cap).min(1.0)
        };
    }
    flow
}

/// One port step: shore power feeds the hotel load and charges the battery toward
/// `soc_max`, pacing the remaining charge evenly over `steps_left` steps.
/// Returns the flow and the shore power drawn (kW).
pub fn port_charge(soc: f64, p_dem_kw: f64, steps_left: usize, cfg: &ShipConfig) -> (BatteryFlow, f64) {
    let dt = cfg.step_hours();
    let b = &cfg.battery;
    let to_full = (cfg.soc_max() - soc).max(0.0) * cfg.battery_capacity_kwh / (b.charge_efficiency * dt);
    let paced = to_full / steps_left.max(1) as f64;
    let charge = paced.min(b.max_charge_kw);
    let soc_next = if charge == to_full && to_full > 0.0 {
        cfg.soc_max()
    } else {
        (soc + charge * b.charge_efficiency * dt / cfg.battery_capacity_kwh).min(1.0)
    };
    let flow = BatteryFlow {
        charge_kw: charge,
        soc_next,
        ..Default::default()
    };
    (flow, p_dem_kw + charge)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ShipConfig {
        ShipConfig::default()
    }

    #[test]
    fn balanced_demand_leaves_soc_unchanged() {
        let f = battery_power(0.6, 700.0, 700.0, &cfg());
        assert_eq!(f.batt_kw(), 0.0);
        assert_eq!(f.soc_next, 0.6);
    }

    #[test]
    fn full_battery_absorbs_nothing() {
        let c = cfg();
        let f = battery_power(c.soc_max(), 0.0, 100.0, &c);
        assert_eq!(f.charge_kw, 0.0);
        assert_eq!(f.curtailed_kw, 100.0);
        assert_eq!(f.soc_next, c.soc_max());
    }

    #[test]
    fn discharge_follows_coulomb_counting() {
        // 200 kW deficit for 60 s at 95 % discharge efficiency from 581 kWh.
        let f = battery_power(0.8, 500.0, 300.0, &cfg());
        let expected_drop = (200.0 / 0.95) * (60.0 / 3600.0) / 581.0;
        assert_eq!(f.discharge_kw, 200.0);
        assert!((0.8 - f.soc_next - expected_drop).abs() < 1e-15);
        assert!((expected_drop - 6.039_194e-3).abs() < 1e-9);
    }

    #[test]
    fn discharge_limit_leaves_unmet_demand() {
        let c = cfg();
        let f = battery_power(0.8, 3000.0, 0.0, &c);
        assert_eq!(f.discharge_kw, c.battery.max_discharge_kw);
        assert_eq!(f.unmet_kw, 500.0);
    }

    #[test]
    fn empty_battery_cannot_discharge_below_zero() {
        let f = battery_power(0.001, 2000.0, 0.0, &cfg());
        assert_eq!(f.soc_next, 0.0);
        assert!(f.unmet_kw > 0.0);
        assert!(f.discharge_kw < 2000.0);
    }

    #[test]
    fn charge_stops_at_soc_max() {
        let c = cfg();
        let f = battery_power(c.soc_max() - 1e-4, 0.0, 1500.0, &c);
        assert_eq!(f.soc_next, c.soc_max());
        assert!(f.curtailed_kw > 0.0);
        assert!((f.charge_kw + f.curtailed_kw - 1500.0).abs() < 1e-9);
    }

    #[test]
    fn port_charging_paces_and_finishes() {
        let c = cfg();
        let mut soc = 0.5;
        for left in (1..=15).rev() {
            let (f, shore) = port_charge(soc, 100.0, left, &c);
            assert_eq!(shore, 100.0 + f.charge_kw);
            assert!(f.soc_next >= soc);
            soc = f.soc_next;
        }
        assert!((soc - c.soc_max()).abs() < 1e-12);
    }
}
