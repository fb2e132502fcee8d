//! SVG charts of experiment results.

use std::path::Path;

use anyhow::{anyhow, Result};
use plotters::prelude::*;

use crate::experiments::{series, LatencyRow, MaxRateRow, SweepRow};
use crate::stream::MessageClass;

type Series = (String, Vec<(f64, f64)>);

const PALETTE: [RGBColor; 6] = [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK];

fn bounds(series: &[Series]) -> ((f64, f64), (f64, f64)) {
    let pts = series.iter().flat_map(|s| s.1.iter());
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return ((0.0, 1.0), (0.0, 1.0));
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    ((x0, x1), (0.0, if y1 > 0.0 { y1 * 1.1 } else { 1.0 }))
}

fn line_chart(path: &Path, caption: &str, x_label: &str, y_label: &str, data: &[Series]) -> Result<()> {
    let err = |e: &dyn std::fmt::Display| anyhow!("plotting {}: {e}", path.display());
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let ((x0, x1), (y0, y1)) = bounds(data);
    let mut chart = ChartBuilder::on(&root)
        .caption(caption, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(|e| err(&e))?;
    chart.configure_mesh().x_desc(x_label).y_desc(y_label).draw().map_err(|e| err(&e))?;
    for (i, (name, pts)) in data.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(|e| err(&e))?
            .label(name.clone())
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 20, y)], color.stroke_width(2)));
        chart.draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled()))).map_err(|e| err(&e))?;
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(|e| err(&e))?;
    root.present().map_err(|e| err(&e))?;
    Ok(())
}

/// Latency against payload size, one line per class and wire length.
/// HP frames sit at size 1.
pub fn latency(path: &Path, rows: &[LatencyRow]) -> Result<()> {
    let mut data: Vec<Series> = Vec::new();
    for r in rows {
        let Some(lat) = r.latency_us else { continue };
        let name = format!("{} {:.2} m", r.kind.name(), r.wire_m);
        match data.iter_mut().find(|s| s.0 == name) {
            Some(s) => s.1.push((r.size_bytes as f64, lat)),
            None => data.push((name, vec![(r.size_bytes as f64, lat)])),
        }
    }
    line_chart(path, "Message latency", "Payload (bytes)", "Latency (µs)", &data)
}

/// Throughput against one sweep axis, one line per class.
pub fn sweep(path: &Path, rows: &[SweepRow], axis: &str, x_label: &str) -> Result<()> {
    let data: Vec<Series> = [MessageClass::Hp, MessageClass::Lp]
        .into_iter()
        .map(|c| {
            (c.name().to_uppercase(), series(rows, axis, c).iter().map(|r| (r.value, r.throughput_kbps)).collect())
        })
        .filter(|s: &Series| !s.1.is_empty())
        .collect();
    line_chart(path, "Throughput", x_label, "Throughput (kbps)", &data)
}

/// Highest error-free bit rate against wire length, one line per class.
pub fn max_bitrate(path: &Path, rows: &[MaxRateRow]) -> Result<()> {
    let data: Vec<Series> = [MessageClass::Hp, MessageClass::Lp]
        .into_iter()
        .map(|c| {
            let mut pts: Vec<(f64, f64)> =
                rows.iter().filter(|r| r.class == c).map(|r| (r.wire_m, r.max_kbps)).collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            (c.name().to_uppercase(), pts)
        })
        .filter(|s| !s.1.is_empty())
        .collect();
    line_chart(path, "Maximum bit rate", "Wire length (m)", "Bit rate (kbps)", &data)
}
