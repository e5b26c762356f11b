use serde::{Deserialize, Serialize};

use super::{DenseNet, Gradients, NnError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam moments for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Gradients,
    pub v: Gradients,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(net: &DenseNet, config: AdamConfig) -> Self {
        Self {
            config,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
            step_count: 0,
        }
    }

    /// One descent step `theta -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<(), NnError> {
        let shapes_match = |g: &Gradients| {
            g.dw.len() == net.layers.len()
                && g.dw.iter().zip(&net.layers).all(|(w, l)| w.dim() == l.w.dim())
                && g.db.iter().zip(&net.layers).all(|(b, l)| b.len() == l.b.len())
        };
        if !shapes_match(grads) || !shapes_match(&self.m) {
            return Err(NnError::TopologyMismatch);
        }
        self.step_count += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let t = self.step_count as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (i, layer) in net.layers.iter_mut().enumerate() {
            ndarray::Zip::from(&mut layer.w)
                .and(&grads.dw[i])
                .and(&mut self.m.dw[i])
                .and(&mut self.v.dw[i])
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.b)
                .and(&grads.db[i])
                .and(&mut self.m.db[i])
                .and(&mut self.v.db[i])
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Layer};
    use ndarray::{array, Array1, Array2};

    fn scalar_net(p: f64) -> DenseNet {
        DenseNet {
            layers: vec![Layer {
                w: array![[p]],
                b: Array1::zeros(1),
                activation: Activation::Identity,
            }],
            output_scale: 1.0,
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut net = scalar_net(0.3);
        let mut opt = AdamState::new(&net, AdamConfig::default());
        let g = Gradients::zeros_like(&net);
        for _ in 0..5 {
            opt.step(&mut net, &g).unwrap();
        }
        assert_eq!(net.params(), vec![0.3, 0.0]);
    }

    #[test]
    fn constant_gradient_moves_by_learning_rate() {
        // With g = 1, m_hat = v_hat = 1 every step, so each update is lr / (1 + eps).
        let mut net = scalar_net(1.0);
        let cfg = AdamConfig::default();
        let mut opt = AdamState::new(&net, cfg);
        let mut g = Gradients::zeros_like(&net);
        g.dw[0] = Array2::from_elem((1, 1), 1.0);
        let mut prev = 1.0;
        for _ in 0..10 {
            opt.step(&mut net, &g).unwrap();
            let p = net.layers[0].w[[0, 0]];
            let d = prev - p;
            assert!(d > 0.0);
            assert!((d - cfg.learning_rate / (1.0 + cfg.epsilon)).abs() < 1e-12);
            prev = p;
        }
    }

    #[test]
    fn identical_inputs_identical_results() {
        let mut a = scalar_net(0.5);
        let mut b = scalar_net(0.5);
        let mut oa = AdamState::new(&a, AdamConfig::default());
        let mut ob = oa.clone();
        let mut g = Gradients::zeros_like(&a);
        g.dw[0][[0, 0]] = -0.37;
        g.db[0][0] = 2.5;
        for _ in 0..3 {
            oa.step(&mut a, &g).unwrap();
            ob.step(&mut b, &g).unwrap();
        }
        assert_eq!(a, b);
        assert_eq!(oa, ob);
    }
}
