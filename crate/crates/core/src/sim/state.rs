use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use super::SimError;

/// MDP state: per-cluster per-unit powers, battery SOC, shore-power flag and demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub x: Vec<f64>,
    pub soc: f64,
    /// Shore power available (port mode).
    pub spa: bool,
    pub p_dem_kw: f64,
}

impl SystemState {
    /// Flattened length, `m + 3`.
    pub fn dim(&self) -> usize {
        self.x.len() + 3
    }

    /// `[x_1 .. x_m, soc, spa, p_dem]` in raw units.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.x);
        v.push(self.soc);
        v.push(if self.spa { 1.0 } else { 0.0 });
        v.push(self.p_dem_kw);
        v
    }

    pub fn validate(&self, n_clusters: usize) -> Result<(), SimError> {
        if self.x.len() != n_clusters {
            return Err(SimError::Dimension {
                what: "state x",
                expected: n_clusters,
                got: self.x.len(),
            });
        }
        if self.x.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(SimError::InvalidState("cluster power outside [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.soc) {
            return Err(SimError::InvalidState(format!("soc {} outside [0, 1]", self.soc)));
        }
        if !(self.p_dem_kw >= 0.0 && self.p_dem_kw.is_finite()) {
            return Err(SimError::InvalidState(format!("negative demand {}", self.p_dem_kw)));
        }
        Ok(())
    }
}

/// Per-cluster per-unit power adjustments, each within `[-a_M, +a_M]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action(Vec<f64>);

impl Action {
    pub fn new(values: Vec<f64>, limit: f64) -> Result<Self, SimError> {
        if let Some(v) = values.iter().find(|v| !(v.abs() <= limit)) {
            return Err(SimError::ActionOutOfBounds { value: *v, limit });
        }
        Ok(Self(values))
    }

    /// Builds an action, clipping every component into `[-limit, limit]`.
    /// Non-finite components become zero.
    pub fn clipped(values: Vec<f64>, limit: f64) -> Self {
        Self(
            values
                .into_iter()
                .map(|v| if v.is_finite() { v.clamp(-limit, limit) } else { 0.0 })
                .collect(),
        )
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn uniform(m: usize, value: f64, limit: f64) -> Self {
        Self::clipped(vec![value; m], limit)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Costs incurred in one step (or summed over many), with the physical
/// quantities behind the hydrogen and electricity terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Battery degradation ($).
    pub c_b: f64,
    /// Fuel-cell degradation ($).
    pub c_f: f64,
    /// Hydrogen ($).
    pub c_h: f64,
    /// Shore electricity ($).
    pub c_e: f64,
    pub h2_kg: f64,
    pub shore_kwh: f64,
    pub gwp_h2_kg: f64,
    pub gwp_elec_kg: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.c_b + self.c_f + self.c_h + self.c_e
    }

    /// Emission mass (kg CO2e).
    pub fn gwp_kg(&self) -> f64 {
        self.gwp_h2_kg + self.gwp_elec_kg
    }
}

impl AddAssign for CostBreakdown {
    fn add_assign(&mut self, o: Self) {
        self.c_b += o.c_b;
        self.c_f += o.c_f;
        self.c_h += o.c_h;
        self.c_e += o.c_e;
        self.h2_kg += o.h2_kg;
        self.shore_kwh += o.shore_kwh;
        self.gwp_h2_kg += o.gwp_h2_kg;
        self.gwp_elec_kg += o.gwp_elec_kg;
    }
}

impl Add for CostBreakdown {
    type Output = Self;

    fn add(mut self, o: Self) -> Self {
        self += o;
        self
    }
}

impl std::iter::Sum for CostBreakdown {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_vector_has_m_plus_three_entries() {
        let s = SystemState {
            x: vec![0.1, 0.2, 0.3, 0.4],
            soc: 0.9,
            spa: false,
            p_dem_kw: 1200.0,
        };
        assert_eq!(s.dim(), 7);
        assert_eq!(s.to_vec(), vec![0.1, 0.2, 0.3, 0.4, 0.9, 0.0, 1200.0]);
        s.validate(4).unwrap();
        assert!(s.validate(3).is_err());
    }

    #[test]
    fn action_bounds_enforced() {
        assert!(Action::new(vec![0.04, -0.04], 0.04).is_ok());
        assert!(Action::new(vec![0.041], 0.04).is_err());
        assert!(Action::new(vec![f64::NAN], 0.04).is_err());
        let a = Action::clipped(vec![1.0, -1.0, f64::NAN, 0.01], 0.04);
        assert_eq!(a.as_slice(), &[0.04, -0.04, 0.0, 0.01]);
    }

    #[test]
    fn breakdown_total_is_sum_of_components() {
        let c = CostBreakdown {
            c_b: 0.1,
            c_f: 0.2,
            c_h: 0.3,
            c_e: 0.4,
            ..Default::default()
        };
        assert_eq!(c.total(), 0.1 + 0.2 + 0.3 + 0.4);
        let s: CostBreakdown = [c, c].into_iter().sum();
        assert_eq!(s.c_h, 0.6);
    }
}
