/// Huber loss with unit threshold: mean over the batch of `d^2 / 2` (`|d| < 1`) or
/// `|d| - 1/2`, with per-sample derivatives `d` or `sign(d)`.
pub fn huber_loss(deltas: &[f64]) -> (f64, Vec<f64>) {
    let mut total = 0.0;
    let grads = deltas
        .iter()
        .map(|&d| {
            if d.abs() < 1.0 {
                total += 0.5 * d * d;
                d
            } else {
                total += d.abs() - 0.5;
                d.signum()
            }
        })
        .collect();
    let n = deltas.len().max(1) as f64;
    (total / n, grads)
}
