/// Trailing moving average: point `i` averages the last `window` values up to `i`.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        sum += v;
        if i >= w {
            sum -= values[i - w];
        }
        out.push(sum / (i + 1).min(w) as f64);
    }
    out
}

/// Least-squares line through `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trend {
    pub slope: f64,
    pub std_error: f64,
}

impl Trend {
    /// Slope over its standard error; infinite for an exact rising line, 0 when flat.
    pub fn t_stat(&self) -> f64 {
        if self.std_error > 0.0 {
            self.slope / self.std_error
        } else if self.slope > 0.0 {
            f64::INFINITY
        } else if self.slope < 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        }
    }
}

/// `None` with fewer than three points or constant `x`.
pub fn linear_trend(x: &[f64], y: &[f64]) -> Option<Trend> {
    let n = x.len().min(y.len());
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let sxx: f64 = x[..n].iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x[..n].iter().zip(&y[..n]).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x[..n]
        .iter()
        .zip(&y[..n])
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let std_error = (sse / (nf - 2.0) / sxx).sqrt();
    Some(Trend { slope, std_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_warms_up_then_slides() {
        let ma = moving_average(&[1.0, 2.0, 3.0, 4.0], 2);
        assert_eq!(ma, vec![1.0, 1.5, 2.5, 3.5]);
        assert_eq!(moving_average(&[5.0, 7.0], 100), vec![5.0, 6.0]);
    }

    #[test]
    fn trend_of_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let t = linear_trend(&x, &y).unwrap();
        assert!((t.slope - 2.0).abs() < 1e-12);
        assert!(t.std_error < 1e-12);
        assert_eq!(t.t_stat(), f64::INFINITY);
        assert!(linear_trend(&x[..2], &y[..2]).is_none());
    }

    #[test]
    fn noisy_flat_series_is_not_rising() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| if *v as i64 % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let t = linear_trend(&x, &y).unwrap();
        assert!(t.t_stat().abs() < 2.0);
    }
}
