//! Running a configured experiment and writing its CSVs, plots and summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::experiments::{
    has_cliff, is_monotone_non_increasing, knee, run_clock_skew_grid, run_latency_experiment, run_length_sweep,
    run_max_bitrate_search, run_param_sweep, series, LatencyRow, MaxRateRow, SkewRow, SweepRow,
};
use crate::plot;
use crate::stream::MessageClass;
use crate::table2::{table2, table2_markdown};

#[derive(Debug, Clone, PartialEq)]
pub enum Results {
    Latency(Vec<LatencyRow>),
    LengthSweep(Vec<SweepRow>),
    ParamSweep(Vec<SweepRow>),
    MaxBitrate(Vec<MaxRateRow>),
    SkewGrid(Vec<SkewRow>),
}

pub fn run(cfg: &ExperimentConfig) -> Result<Results> {
    Ok(match cfg.experiment {
        ExperimentKind::Latency => Results::Latency(run_latency_experiment(cfg)?),
        ExperimentKind::LengthSweep => Results::LengthSweep(run_length_sweep(cfg)?),
        ExperimentKind::ParamSweep => Results::ParamSweep(run_param_sweep(cfg)?),
        ExperimentKind::MaxBitrate => Results::MaxBitrate(run_max_bitrate_search(cfg)?),
        ExperimentKind::SkewGrid => Results::SkewGrid(run_clock_skew_grid(cfg)?),
    })
}

fn fx(v: f64, decimals: usize) -> String {
    // avoid "-0.000"
    let s = format!("{v:.decimals$}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(String::new, |v| fx(v, decimals))
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn latency_csv(path: &Path, rows: &[LatencyRow]) -> Result<()> {
    write_csv(
        path,
        &["kind", "size_bytes", "wire_m", "latency_us", "delivered", "total"],
        rows.iter().map(|r| {
            vec![
                r.kind.name().to_string(),
                r.size_bytes.to_string(),
                fx(r.wire_m, 3),
                opt(r.latency_us, 3),
                r.delivered.to_string(),
                r.total.to_string(),
            ]
        }),
    )
}

fn sorted_series<'a>(rows: &'a [SweepRow], axis: &str) -> Vec<&'a SweepRow> {
    let mut v: Vec<&SweepRow> = rows.iter().filter(|r| r.axis == axis).collect();
    v.sort_by(|a, b| a.class.name().cmp(b.class.name()).then(a.value.total_cmp(&b.value)));
    v
}

pub fn sweep_csv(path: &Path, axis_column: &str, rows: &[&SweepRow]) -> Result<()> {
    write_csv(
        path,
        &[
            "class",
            axis_column,
            "throughput_kbps",
            "bit_rate_kbps",
            "delivered",
            "total",
            "ack_rate",
            "mean_latency_us",
        ],
        rows.iter().map(|r| {
            vec![
                r.class.name().to_string(),
                fx(r.value, 3),
                fx(r.throughput_kbps, 3),
                fx(r.bit_rate_kbps, 3),
                r.delivered.to_string(),
                r.total.to_string(),
                fx(r.ack_rate, 4),
                opt(r.mean_latency_us, 3),
            ]
        }),
    )
}

pub fn max_bitrate_csv(path: &Path, rows: &[MaxRateRow]) -> Result<()> {
    write_csv(
        path,
        &["class", "wire_m", "max_clock_hz", "max_kbps"],
        rows.iter()
            .map(|r| vec![r.class.name().to_string(), fx(r.wire_m, 3), fx(r.max_clock_hz, 0), fx(r.max_kbps, 3)]),
    )
}

pub fn skew_csv(path: &Path, rows: &[SkewRow]) -> Result<()> {
    write_csv(
        path,
        &["tx_offset", "rx_offset", "hp_delivered", "lp_delivered", "total", "in_grid", "passed"],
        rows.iter().map(|r| {
            vec![
                fx(r.tx_offset, 4),
                fx(r.rx_offset, 4),
                r.hp_delivered.to_string(),
                r.lp_delivered.to_string(),
                r.total.to_string(),
                r.in_grid.to_string(),
                r.passed().to_string(),
            ]
        }),
    )
}

/// Shape of one sweep series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesShape {
    pub axis: &'static str,
    pub class: MessageClass,
    pub plateau_kbps: f64,
    pub knee: Option<f64>,
    pub cliff: bool,
    pub monotone: bool,
}

/// Slack allowed in the monotonicity check, as a fraction of the plateau.
pub const MONOTONE_SLACK: f64 = 0.01;

pub fn sweep_shapes(rows: &[SweepRow]) -> Vec<SeriesShape> {
    let mut axes: Vec<&'static str> = Vec::new();
    for r in rows {
        if !axes.contains(&r.axis) {
            axes.push(r.axis);
        }
    }
    let mut out = Vec::new();
    for axis in axes {
        for class in [MessageClass::Hp, MessageClass::Lp] {
            let s = series(rows, axis, class);
            if s.is_empty() {
                continue;
            }
            let x: Vec<f64> = s.iter().map(|r| r.value).collect();
            let y: Vec<f64> = s.iter().map(|r| r.throughput_kbps).collect();
            out.push(SeriesShape {
                axis,
                class,
                plateau_kbps: y[0],
                knee: knee(&x, &y),
                cliff: has_cliff(&y),
                monotone: is_monotone_non_increasing(&y, MONOTONE_SLACK),
            });
        }
    }
    out
}

/// HP over LP maximum bit rate at each wire length with both classes.
pub fn max_rate_ratios(rows: &[MaxRateRow]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for hp in rows.iter().filter(|r| r.class == MessageClass::Hp) {
        if let Some(lp) = rows.iter().find(|r| r.class == MessageClass::Lp && r.wire_m == hp.wire_m) {
            if lp.max_kbps > 0.0 {
                out.push((hp.wire_m, hp.max_kbps / lp.max_kbps));
            }
        }
    }
    out
}

pub fn summary_markdown(cfg: &ExperimentConfig, results: &Results) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {} (seed {}, {} messages per point)\n", cfg.experiment.name(), cfg.seed, cfg.repetitions);
    s.push_str("## Protocol comparison\n\n");
    s.push_str(&table2_markdown(&table2()));
    s.push('\n');
    match results {
        Results::Latency(rows) => {
            s.push_str("## Latency\n\n| kind | bytes | wire (m) | latency (µs) | delivered |\n|---|---|---|---|---|\n");
            for r in rows {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {}/{} |",
                    r.kind.name(),
                    r.size_bytes,
                    fx(r.wire_m, 2),
                    r.latency_us.map_or("-".into(), |v| fx(v, 2)),
                    r.delivered,
                    r.total
                );
            }
        }
        Results::LengthSweep(rows) | Results::ParamSweep(rows) => {
            s.push_str("## Sweep shape\n\n| axis | class | plateau (kbps) | knee | cliff | monotone |\n|---|---|---|---|---|---|\n");
            for sh in sweep_shapes(rows) {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {} |",
                    sh.axis,
                    sh.class.name(),
                    fx(sh.plateau_kbps, 2),
                    sh.knee.map_or("-".into(), |k| fx(k, 2)),
                    if sh.cliff { "yes" } else { "no" },
                    if sh.monotone { "yes" } else { "no" },
                );
            }
        }
        Results::MaxBitrate(rows) => {
            s.push_str(
                "## Maximum bit rate\n\n| class | wire (m) | clock (MHz) | bit rate (kbps) |\n|---|---|---|---|\n",
            );
            for r in rows {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} |",
                    r.class.name(),
                    fx(r.wire_m, 2),
                    fx(r.max_clock_hz / 1e6, 3),
                    fx(r.max_kbps, 1)
                );
            }
            s.push_str("\n| wire (m) | HP/LP ratio |\n|---|---|\n");
            for (len, ratio) in max_rate_ratios(rows) {
                let _ = writeln!(s, "| {} | {} |", fx(len, 2), fx(ratio, 3));
            }
        }
        Results::SkewGrid(rows) => {
            let grid: Vec<&SkewRow> = rows.iter().filter(|r| r.in_grid).collect();
            let ok = grid.iter().filter(|r| r.passed()).count();
            let _ =
                writeln!(s, "## Clock offsets\n\n{ok}/{} grid cells delivered every HP and LP message.\n", grid.len());
            for r in rows.iter().filter(|r| !r.in_grid) {
                let _ = writeln!(
                    s,
                    "Probe tx {} rx {}: HP {}/{}, LP {}/{}",
                    fx(r.tx_offset, 3),
                    fx(r.rx_offset, 3),
                    r.hp_delivered,
                    r.total,
                    r.lp_delivered,
                    r.total
                );
            }
        }
    }
    s
}

/// Write the CSVs, plots and `summary.md` for `results` into `dir`.
/// Returns the files written.
pub fn write_results(dir: &Path, cfg: &ExperimentConfig, results: &Results) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let mut files = Vec::new();
    let mut file = |name: &str| {
        let p = dir.join(name);
        files.push(p.clone());
        p
    };
    match results {
        Results::Latency(rows) => {
            latency_csv(&file("latency.csv"), rows)?;
            plot::latency(&file("latency.svg"), rows)?;
        }
        Results::LengthSweep(rows) => {
            sweep_csv(&file("throughput_vs_length.csv"), "length_m", &sorted_series(rows, "length_m"))?;
            plot::sweep(&file("throughput_vs_length.svg"), rows, "length_m", "Wire length (m)")?;
        }
        Results::ParamSweep(rows) => {
            for p in &cfg.sweep.parameters {
                let axis = p.name();
                sweep_csv(&file(&format!("throughput_vs_{axis}.csv")), "ratio", &sorted_series(rows, axis))?;
                plot::sweep(&file(&format!("throughput_vs_{axis}.svg")), rows, axis, &format!("{axis} / baseline"))?;
            }
        }
        Results::MaxBitrate(rows) => {
            max_bitrate_csv(&file("max_bitrate.csv"), rows)?;
            plot::max_bitrate(&file("max_bitrate.svg"), rows)?;
        }
        Results::SkewGrid(rows) => {
            skew_csv(&file("skew_grid.csv"), rows)?;
        }
    }
    let summary = file("summary.md");
    fs::write(&summary, summary_markdown(cfg, results)).with_context(|| format!("writing {}", summary.display()))?;
    Ok(files)
}
