use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{Activation, DenseNet, NnError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub n_params: usize,
    /// Parameters whose finite-difference stencil changes some relu's active set.
    pub n_kink_excluded: usize,
    pub n_checked: usize,
    pub n_within_tolerance: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn pass_fraction(&self) -> f64 {
        if self.n_checked == 0 {
            1.0
        } else {
            self.n_within_tolerance as f64 / self.n_checked as f64
        }
    }
}

/// `|a - n| / max(|a|, |n|)`, zero when both are below `1e-12`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-12 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

fn relu_masks(net: &DenseNet, x: ArrayView2<f64>) -> Result<Vec<bool>, NnError> {
    let trace = net.forward_trace(x)?;
    let mut mask = Vec::new();
    for (i, l) in net.layers.iter().enumerate() {
        if l.activation == Activation::Relu {
            mask.extend(trace.pre_activation(i).iter().map(|&z| z > 0.0));
        }
    }
    Ok(mask)
}

/// Compares backpropagated gradients of `sum(upstream * net(x))` with central differences.
pub fn gradient_check(
    net: &DenseNet,
    x: ArrayView2<f64>,
    upstream: ArrayView2<f64>,
    step: f64,
    tolerance: f64,
) -> Result<GradcheckReport, NnError> {
    let trace = net.forward_trace(x)?;
    let (grads, _) = net.backward(&trace, upstream)?;
    let analytic = grads.to_flat();
    let base = net.params();
    let base_mask = relu_masks(net, x)?;
    let loss = |n: &DenseNet| -> Result<f64, NnError> { Ok((n.forward_batch(x)? * &upstream).sum()) };

    let mut probe = net.clone();
    let mut report = GradcheckReport {
        n_params: base.len(),
        n_kink_excluded: 0,
        n_checked: 0,
        n_within_tolerance: 0,
        max_rel_error: 0.0,
        tolerance,
    };
    let mut params = base.clone();
    for i in 0..base.len() {
        params[i] = base[i] + step;
        probe.set_params(&params)?;
        let plus = loss(&probe)?;
        let plus_mask = relu_masks(&probe, x)?;
        params[i] = base[i] - step;
        probe.set_params(&params)?;
        let minus = loss(&probe)?;
        let minus_mask = relu_masks(&probe, x)?;
        params[i] = base[i];
        if plus_mask != base_mask || minus_mask != base_mask {
            report.n_kink_excluded += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * step);
        let err = relative_error(analytic[i], numeric);
        report.n_checked += 1;
        report.max_rel_error = report.max_rel_error.max(err);
        if err < tolerance {
            report.n_within_tolerance += 1;
        }
    }
    Ok(report)
}
