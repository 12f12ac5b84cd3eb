//! Static SVG figures.

use std::collections::BTreeMap;
use std::path::Path;

use plotters::coord::combinators::IntoLogRange;
use plotters::prelude::*;

use super::csvio::write_atomic;
use super::experiments::{ParetoPoint, SensitivityRow, SweepCell, UniformPoint};
use crate::error::{Error, Result};

const SIZE: (u32, u32) = (800, 560);
/// Normalized energy of a reliable half-precision copy of the same network.
pub const FP16_ENERGY: f64 = 16.0;

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

fn palette(i: usize) -> RGBColor {
    const COLORS: [RGBColor; 8] = [
        RGBColor(31, 119, 180),
        RGBColor(255, 127, 14),
        RGBColor(44, 160, 44),
        RGBColor(214, 39, 40),
        RGBColor(148, 103, 189),
        RGBColor(140, 86, 75),
        RGBColor(227, 119, 194),
        RGBColor(127, 127, 127),
    ];
    COLORS[i % COLORS.len()]
}

/// Renders into a string and writes it atomically.
fn render<F>(path: &Path, draw: F) -> Result<()>
where
    F: FnOnce(DrawingArea<SVGBackend<'_>, plotters::coord::Shift>) -> Result<()>,
{
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        draw(root.clone())?;
        root.present().map_err(plot_err)?;
    }
    write_atomic(path, svg.as_bytes())
}

fn padded(lo: f64, hi: f64, pad: f64) -> (f64, f64) {
    if hi > lo {
        let d = (hi - lo) * pad;
        (lo - d, hi + d)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Seed-averaged `(energy, accuracy)` per key, ordered by key bits.
fn averaged<T>(items: &[T], key: impl Fn(&T) -> f64, e: impl Fn(&T) -> f64, a: impl Fn(&T) -> f64) -> Vec<(f64, f64, f64)> {
    let mut groups: BTreeMap<u64, (f64, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for it in items {
        let k = key(it);
        let g = groups.entry(k.to_bits()).or_insert((k, Vec::new(), Vec::new()));
        g.1.push(e(it));
        g.2.push(a(it));
    }
    groups.into_values().map(|(k, es, acs)| (k, mean(&es), mean(&acs))).collect()
}

/// Accuracy against normalized energy (log axis), one marker per alpha
/// averaged over seeds, the uniform-noise baseline and the FP16 reference.
pub fn pareto_plot(path: &Path, points: &[ParetoPoint], uniform: &[UniformPoint]) -> Result<()> {
    let lan = averaged(points, |p| p.alpha, |p| p.energy, |p| p.acc_mean);
    let mut lan_line: Vec<(f64, f64)> = lan.iter().map(|&(_, e, a)| (e, a)).collect();
    lan_line.sort_by(|x, y| x.0.total_cmp(&y.0));
    let uni = averaged(uniform, |u| u.p, |u| u.energy, |u| u.acc_mean);
    let mut uni_line: Vec<(f64, f64)> = uni.iter().map(|&(_, e, a)| (e, a)).collect();
    uni_line.sort_by(|x, y| x.0.total_cmp(&y.0));

    let all: Vec<(f64, f64)> = lan_line.iter().chain(&uni_line).copied().collect();
    let e_lo = all.iter().map(|p| p.0).fold(FP16_ENERGY, f64::min).max(1e-6) * 0.8;
    let e_hi = all.iter().map(|p| p.0).fold(FP16_ENERGY, f64::max) * 1.25;
    let a_lo = all.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let a_hi = all.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let (a_lo, a_hi) = if all.is_empty() { (0.0, 100.0) } else { padded(a_lo, a_hi, 0.1) };

    render(path, |root| {
        let mut chart = ChartBuilder::on(&root)
            .caption("Accuracy vs normalized energy", ("sans-serif", 22))
            .margin(15)
            .x_label_area_size(45)
            .y_label_area_size(60)
            .build_cartesian_2d((e_lo..e_hi).log_scale(), a_lo..a_hi)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc("Normalized memory energy (reliable 1-bit network = 1)")
            .y_desc("Test accuracy (%)")
            .draw()
            .map_err(plot_err)?;

        let blue = palette(0);
        chart
            .draw_series(LineSeries::new(lan_line.clone(), blue.stroke_width(2)))
            .map_err(plot_err)?
            .label("LaNMax (per alpha)")
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], blue.stroke_width(2)));
        chart
            .draw_series(lan_line.iter().map(|&p| Circle::new(p, 4, blue.filled())))
            .map_err(plot_err)?;

        if !uni_line.is_empty() {
            let orange = palette(1);
            chart
                .draw_series(LineSeries::new(uni_line.clone(), orange.stroke_width(2)))
                .map_err(plot_err)?
                .label("uniform noise")
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], orange.stroke_width(2)));
            chart
                .draw_series(uni_line.iter().map(|&p| TriangleMarker::new(p, 5, orange.filled())))
                .map_err(plot_err)?;
        }

        let grey = palette(7);
        chart
            .draw_series(std::iter::once(PathElement::new(
                vec![(FP16_ENERGY, a_lo), (FP16_ENERGY, a_hi)],
                grey.stroke_width(1),
            )))
            .map_err(plot_err)?
            .label("FP16 reference energy")
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], grey.stroke_width(1)));

        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .position(SeriesLabelPosition::LowerRight)
            .draw()
            .map_err(plot_err)?;
        Ok(())
    })
}

/// Accuracy against evaluation fault rate (log axis), one line per training
/// rate.
pub fn sweep_plot(path: &Path, cells: &[SweepCell]) -> Result<()> {
    let mut lines: BTreeMap<u64, (f64, Vec<(f64, f64)>)> = BTreeMap::new();
    for c in cells {
        lines
            .entry(c.p_t.to_bits())
            .or_insert((c.p_t, Vec::new()))
            .1
            .push((c.p_eval, c.acc_mean));
    }
    let positive: Vec<f64> = cells.iter().map(|c| c.p_eval).filter(|&p| p > 0.0).collect();
    let p_lo = positive.iter().copied().fold(1e-4, f64::min) * 0.7;
    let p_hi = positive.iter().copied().fold(1e-3, f64::max) * 1.4;
    let accs: Vec<f64> = cells.iter().map(|c| c.acc_mean).collect();
    let (a_lo, a_hi) = if accs.is_empty() {
        (0.0, 100.0)
    } else {
        padded(
            accs.iter().copied().fold(f64::INFINITY, f64::min),
            accs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            0.1,
        )
    };

    render(path, |root| {
        let mut chart = ChartBuilder::on(&root)
            .caption("Accuracy vs evaluation fault rate", ("sans-serif", 22))
            .margin(15)
            .x_label_area_size(45)
            .y_label_area_size(60)
            .build_cartesian_2d((p_lo..p_hi).log_scale(), a_lo..a_hi)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc("Evaluation fault rate p")
            .y_desc("Test accuracy (%)")
            .draw()
            .map_err(plot_err)?;
        for (i, (p_t, mut pts)) in lines.into_values().enumerate() {
            pts.retain(|p| p.0 > 0.0);
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let color = palette(i);
            chart
                .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
                .map_err(plot_err)?
                .label(format!("p_t = {p_t}"))
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
            chart
                .draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))
                .map_err(plot_err)?;
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .position(SeriesLabelPosition::LowerLeft)
            .draw()
            .map_err(plot_err)?;
        Ok(())
    })
}

/// Per-layer box plot of accuracy under randomization, with the
/// unrandomized baseline as a horizontal line.
pub fn sensitivity_plot(path: &Path, rows: &[SensitivityRow]) -> Result<()> {
    let layers = rows.len().max(1);
    let lo = rows
        .iter()
        .map(|r| r.stats.min.min(r.baseline))
        .fold(f64::INFINITY, f64::min);
    let hi = rows
        .iter()
        .map(|r| r.stats.max.max(r.baseline))
        .fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if rows.is_empty() { (0.0, 100.0) } else { padded(lo, hi, 0.08) };
    let baseline = rows.first().map(|r| r.baseline);

    render(path, |root| {
        let mut chart = ChartBuilder::on(&root)
            .caption("Accuracy with one layer randomized", ("sans-serif", 22))
            .margin(15)
            .x_label_area_size(45)
            .y_label_area_size(60)
            .build_cartesian_2d(0.5..layers as f64 + 0.5, lo..hi)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_labels(layers)
            .x_label_formatter(&|x| format!("{}", x.round() as i64))
            .x_desc("Randomized layer")
            .y_desc("Test accuracy (%)")
            .draw()
            .map_err(plot_err)?;

        let blue = palette(0);
        for r in rows {
            let x = r.layer as f64;
            let b = &r.stats;
            let w = 0.3;
            chart
                .draw_series([
                    Rectangle::new([(x - w, b.q1), (x + w, b.q3)], blue.mix(0.25).filled()),
                    Rectangle::new([(x - w, b.q1), (x + w, b.q3)], blue.stroke_width(1)),
                ])
                .map_err(plot_err)?;
            chart
                .draw_series([
                    PathElement::new(vec![(x - w, b.median), (x + w, b.median)], blue.stroke_width(2)),
                    PathElement::new(vec![(x, b.q3), (x, b.max)], blue.stroke_width(1)),
                    PathElement::new(vec![(x, b.q1), (x, b.min)], blue.stroke_width(1)),
                    PathElement::new(vec![(x - w / 2.0, b.max), (x + w / 2.0, b.max)], blue.stroke_width(1)),
                    PathElement::new(vec![(x - w / 2.0, b.min), (x + w / 2.0, b.min)], blue.stroke_width(1)),
                ])
                .map_err(plot_err)?;
        }
        if let Some(base) = baseline {
            chart
                .draw_series(std::iter::once(PathElement::new(
                    vec![(0.5, base), (layers as f64 + 0.5, base)],
                    RED.stroke_width(2),
                )))
                .map_err(plot_err)?
                .label("no layer randomized")
                .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], RED.stroke_width(2)));
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .position(SeriesLabelPosition::LowerRight)
                .draw()
                .map_err(plot_err)?;
        }
        Ok(())
    })
}
