/// Costs below this are floored before inversion.
pub const COST_FLOOR: f64 = 1e-9;

/// Penalty for infeasible next states and overridden setpoints.
pub const PENALTY: f64 = -1.0;

/// Largest `f64` below 1; `tanh` rounds to exactly 1 for small costs.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Bounded reward of a single step cost, `tanh(1 / cost)`, kept strictly below 1.
pub fn cost_reward(cost: f64) -> f64 {
    (1.0 / cost.max(COST_FLOOR)).tanh().min(BELOW_ONE)
}

/// Step reward. In port (`port_costs` is `Some`) the reward is the sum of per-step
/// terms over the port segment; while sailing any penalty condition gives exactly `-1`.
pub fn reward(feasible: bool, overridden: &[bool], cost_now: f64, port_costs: Option<&[f64]>) -> f64 {
    if let Some(costs) = port_costs {
        return costs.iter().map(|&c| cost_reward(c)).sum();
    }
    if !feasible || overridden.iter().any(|&o| o) {
        PENALTY
    } else {
        cost_reward(cost_now)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalty_branches_are_exact() {
        assert_eq!(reward(false, &[false], 3.0, None), -1.0);
        assert_eq!(reward(true, &[false, true], 3.0, None), -1.0);
    }

    #[test]
    fn tanh_limits() {
        assert!(reward(true, &[false], 1e12, None) < 1e-11);
        assert!(reward(true, &[false], 1e12, None) > 0.0);
        assert_eq!(reward(true, &[false], 0.0, None), BELOW_ONE);
        assert!(BELOW_ONE < 1.0);
        assert_eq!(reward(true, &[false], 1.0, None), 1f64.tanh());
    }

    #[test]
    fn port_phase_sums_terms() {
        let r = reward(true, &[], 0.0, Some(&[1.0, 1.0]));
        assert!((r - 1.523_188_3).abs() < 1e-7);
        assert_eq!(r, 2.0 * 1f64.tanh());
    }
}
