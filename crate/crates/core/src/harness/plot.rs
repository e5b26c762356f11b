use std::path::Path;

use plotters::prelude::*;

use super::{BenchmarkTable, CostReport, HarnessError, RunSummary, SeedRun};
use crate::profiles::LoadProfile;

fn plot_err(path: &Path) -> impl Fn(String) -> HarnessError + '_ {
    move |msg| HarnessError::Plot {
        path: path.to_path_buf(),
        msg,
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-6);
    (lo - pad, hi + pad)
}

const PALETTE: [RGBColor; 6] = [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK];

/// Per-seed eval curves (thin) and the converged mean with a one-sigma band.
pub fn plot_learning_curves(path: &Path, summary: &RunSummary, runs: &[SeedRun]) -> Result<(), HarnessError> {
    let err = plot_err(path);
    let eps: Vec<f64> = summary.eval_episodes.iter().map(|&e| e as f64).collect();
    let x_hi = eps.last().copied().unwrap_or(1.0);
    let (y_lo, y_hi) = bounds(runs.iter().flat_map(|r| r.curve.iter().map(|p| p.mean_cost)));
    let root = SVGBackend::new(path, (900, 540)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(e.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..x_hi, y_lo..y_hi)
        .map_err(|e| err(e.to_string()))?;
    chart
        .configure_mesh()
        .x_desc("episode")
        .y_desc("mean eval voyage cost ($)")
        .draw()
        .map_err(|e| err(e.to_string()))?;
    for r in runs {
        let style = if r.summary.converged {
            RGBColor(150, 150, 150).stroke_width(1)
        } else {
            RGBColor(230, 150, 150).stroke_width(1)
        };
        let pts = r.curve.iter().map(|p| (p.episode as f64, p.mean_cost));
        chart.draw_series(LineSeries::new(pts, style)).map_err(|e| err(e.to_string()))?;
    }
    if !summary.mean_curve.is_empty() {
        let band: Vec<(f64, f64)> = eps
            .iter()
            .zip(summary.mean_curve.iter().zip(&summary.std_curve))
            .map(|(&x, (m, s))| (x, m + s))
            .chain(
                eps.iter()
                    .zip(summary.mean_curve.iter().zip(&summary.std_curve))
                    .rev()
                    .map(|(&x, (m, s))| (x, m - s)),
            )
            .collect();
        chart
            .draw_series(std::iter::once(Polygon::new(band, BLUE.mix(0.15))))
            .map_err(|e| err(e.to_string()))?;
        let mean = eps.iter().copied().zip(summary.mean_curve.iter().copied());
        chart
            .draw_series(LineSeries::new(mean, BLUE.stroke_width(2)))
            .map_err(|e| err(e.to_string()))?;
    }
    root.present().map_err(|e| err(e.to_string()))
}

/// Per-voyage costs of DP and each strategy.
pub fn plot_benchmark(path: &Path, table: &BenchmarkTable) -> Result<(), HarnessError> {
    let err = plot_err(path);
    let n = table.rows.len();
    let (y_lo, y_hi) = bounds(table.rows.iter().flat_map(|r| std::iter::once(r.dp_cost).chain(r.costs.clone())));
    let root = SVGBackend::new(path, (900, 540)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(e.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(60)
        .build_cartesian_2d(-0.5..(n as f64 - 0.5).max(0.5), y_lo..y_hi)
        .map_err(|e| err(e.to_string()))?;
    chart
        .configure_mesh()
        .x_desc("voyage")
        .y_desc("voyage cost ($)")
        .draw()
        .map_err(|e| err(e.to_string()))?;
    let dp = table.rows.iter().enumerate().map(|(i, r)| (i as f64, r.dp_cost));
    chart
        .draw_series(dp.map(|p| Circle::new(p, 4, BLACK.filled())))
        .map_err(|e| err(e.to_string()))?
        .label("ddp")
        .legend(|(x, y)| Circle::new((x, y), 4, BLACK.filled()));
    for (j, label) in table.labels.iter().enumerate() {
        let color = PALETTE[j % PALETTE.len()];
        let pts = table.rows.iter().enumerate().map(|(i, r)| (i as f64, r.costs[j]));
        chart
            .draw_series(pts.map(|p| TriangleMarker::new(p, 5, color.filled())))
            .map_err(|e| err(e.to_string()))?
            .label(label.as_str())
            .legend(move |(x, y)| TriangleMarker::new((x, y), 5, color.filled()));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| err(e.to_string()))?;
    root.present().map_err(|e| err(e.to_string()))
}

/// Demand traces of up to six voyages.
pub fn plot_profiles(path: &Path, profiles: &[LoadProfile]) -> Result<(), HarnessError> {
    let err = plot_err(path);
    let shown = &profiles[..profiles.len().min(PALETTE.len())];
    let x_hi = shown
        .iter()
        .map(|p| p.len() as f64 * p.step_seconds / 60.0)
        .fold(1.0, f64::max);
    let (_, y_hi) = bounds(shown.iter().flat_map(|p| p.samples.iter().map(|s| s.p_dem_kw)));
    let root = SVGBackend::new(path, (900, 540)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(e.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..x_hi, 0.0..y_hi)
        .map_err(|e| err(e.to_string()))?;
    chart
        .configure_mesh()
        .x_desc("time (min)")
        .y_desc("demand (kW)")
        .draw()
        .map_err(|e| err(e.to_string()))?;
    for (j, p) in shown.iter().enumerate() {
        let color = PALETTE[j];
        let pts = p
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| (i as f64 * p.step_seconds / 60.0, s.p_dem_kw));
        chart
            .draw_series(LineSeries::new(pts, color))
            .map_err(|e| err(e.to_string()))?
            .label(p.id.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| err(e.to_string()))?;
    root.present().map_err(|e| err(e.to_string()))
}

/// Per-voyage total cost of each evaluated strategy.
pub fn plot_voyage_costs(path: &Path, report: &CostReport) -> Result<(), HarnessError> {
    let err = plot_err(path);
    let ids: Vec<&str> = {
        let mut v: Vec<&str> = Vec::new();
        for r in &report.voyages {
            if !v.contains(&r.profile_id.as_str()) {
                v.push(&r.profile_id);
            }
        }
        v
    };
    let (y_lo, y_hi) = bounds(report.voyages.iter().map(|v| v.cost.total()));
    let root = SVGBackend::new(path, (900, 540)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(e.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(60)
        .build_cartesian_2d(-0.5..(ids.len() as f64 - 0.5).max(0.5), y_lo..y_hi)
        .map_err(|e| err(e.to_string()))?;
    chart
        .configure_mesh()
        .x_desc("voyage")
        .y_desc("voyage cost ($)")
        .draw()
        .map_err(|e| err(e.to_string()))?;
    for (j, label) in report.labels.iter().enumerate() {
        let color = PALETTE[j % PALETTE.len()];
        let pts: Vec<(f64, f64)> = report
            .voyages
            .iter()
            .filter(|v| &v.strategy == label)
            .filter_map(|v| ids.iter().position(|i| *i == v.profile_id).map(|k| (k as f64, v.cost.total())))
            .collect();
        chart
            .draw_series(pts.into_iter().map(|p| Circle::new(p, 4, color.filled())))
            .map_err(|e| err(e.to_string()))?
            .label(label.as_str())
            .legend(move |(x, y)| Circle::new((x, y), 4, color.filled()));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| err(e.to_string()))?;
    root.present().map_err(|e| err(e.to_string()))
}
