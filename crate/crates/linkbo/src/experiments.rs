//! The experiments: latency, wire-length and parameter sweeps, maximum bit
//! rate search and the clock-offset grid.
//!
//! Every operating point is an independent simulation seeded from the
//! experiment seed and the point's index, so results do not depend on how
//! points are scheduled across threads.

use anyhow::Result;
use linkbo_core::channel::ChannelParams;
use linkbo_core::endpoint::DeviceConfig;
use linkbo_core::frame::Message;
use rayon::prelude::*;

use crate::config::{BusKind, ExperimentConfig, SweepParameter};
use crate::stream::{run_stream, workload, BusSpec, MessageClass, StreamOutcome, StreamSpec};

/// Seed for point `index` of an experiment seeded with `seed`.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

fn class_messages(cfg: &ExperimentConfig, class: MessageClass, seed: u64) -> Vec<Message> {
    workload(class, cfg.workload.lp_size, cfg.repetitions, seed)
}

fn stream_spec(cfg: &ExperimentConfig, bus: BusSpec) -> StreamSpec {
    StreamSpec::new(bus, cfg.devices.tx.device_config(), cfg.devices.rx.device_config())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyRow {
    pub kind: MessageClass,
    pub size_bytes: usize,
    pub wire_m: f64,
    /// Mean over delivered messages; `None` when nothing was delivered.
    pub latency_us: Option<f64>,
    pub delivered: usize,
    pub total: usize,
}

/// Submit-to-ACK latency of HP and LP 1..7-byte messages at each wire length.
/// An ideal bus ignores length and reports a single length of 0.
pub fn run_latency_experiment(cfg: &ExperimentConfig) -> Result<Vec<LatencyRow>> {
    let lengths = match cfg.channel.bus {
        BusKind::Ideal => vec![0.0],
        BusKind::Analog => cfg.latency.lengths_m.clone(),
    };
    let mut jobs = Vec::new();
    for &len in &lengths {
        jobs.push((MessageClass::Hp, 1, len));
        for size in 1..=7 {
            jobs.push((MessageClass::Lp, size, len));
        }
    }
    jobs.par_iter()
        .enumerate()
        .map(|(i, &(kind, size, len))| {
            let bus = match cfg.channel.bus {
                BusKind::Ideal => BusSpec::Ideal,
                BusKind::Analog => BusSpec::Analog(cfg.channel.params_at(len)),
            };
            let msgs = workload(kind, size, cfg.repetitions, point_seed(cfg.seed, i));
            let out = run_stream(&stream_spec(cfg, bus), &msgs)?;
            Ok(LatencyRow {
                kind,
                size_bytes: size,
                wire_m: len,
                latency_us: out.mean_latency_us(),
                delivered: out.delivered(),
                total: msgs.len(),
            })
        })
        .collect()
}

/// One operating point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Swept quantity: a parameter name or `length_m`.
    pub axis: &'static str,
    pub class: MessageClass,
    pub value: f64,
    pub throughput_kbps: f64,
    pub bit_rate_kbps: f64,
    pub delivered: usize,
    pub total: usize,
    pub ack_rate: f64,
    pub mean_latency_us: Option<f64>,
}

impl SweepRow {
    fn from_outcome(axis: &'static str, class: MessageClass, value: f64, out: &StreamOutcome, total: usize) -> Self {
        SweepRow {
            axis,
            class,
            value,
            throughput_kbps: out.throughput_kbps(),
            bit_rate_kbps: out.bit_rate_kbps(),
            delivered: out.delivered(),
            total,
            ack_rate: out.ack_rate(),
            mean_latency_us: out.mean_latency_us(),
        }
    }
}

fn sweep_points<F>(
    cfg: &ExperimentConfig,
    points: &[(&'static str, MessageClass, f64)],
    bus_for: F,
) -> Result<Vec<SweepRow>>
where
    F: Fn(&'static str, f64) -> ChannelParams + Sync,
{
    points
        .par_iter()
        .enumerate()
        .map(|(i, &(axis, class, value))| {
            let msgs = class_messages(cfg, class, point_seed(cfg.seed, i));
            let out = run_stream(&stream_spec(cfg, BusSpec::Analog(bus_for(axis, value))), &msgs)?;
            Ok(SweepRow::from_outcome(axis, class, value, &out, msgs.len()))
        })
        .collect()
}

/// Throughput of each workload class against wire length.
pub fn run_length_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let mut points = Vec::new();
    for &class in &cfg.workload.classes {
        for len in cfg.sweep.length_m.points() {
            points.push(("length_m", class, len));
        }
    }
    sweep_points(cfg, &points, |_, len| cfg.channel.params_at(len))
}

/// Throughput against multiples of one baseline parameter.
pub fn run_param_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let mut points = Vec::new();
    for &param in &cfg.sweep.parameters {
        for &class in &cfg.workload.classes {
            for ratio in cfg.sweep.ratio.points() {
                points.push((param.name(), class, ratio));
            }
        }
    }
    let base = cfg.channel.params_at(cfg.channel.length_m);
    sweep_points(cfg, &points, |axis, ratio| {
        let param =
            cfg.sweep.parameters.iter().find(|p| p.name() == axis).copied().unwrap_or(SweepParameter::Capacitance);
        param.scale(&base, ratio)
    })
}

/// Rows of one (axis, class) series, in axis order.
pub fn series<'a>(rows: &'a [SweepRow], axis: &str, class: MessageClass) -> Vec<&'a SweepRow> {
    rows.iter().filter(|r| r.axis == axis && r.class == class).collect()
}

/// Median of each point with its two neighbours; end points are kept.
pub fn median3(values: &[f64]) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            if i == 0 || i + 1 == values.len() {
                return values[i];
            }
            let mut w = [values[i - 1], values[i], values[i + 1]];
            w.sort_by(f64::total_cmp);
            w[1]
        })
        .collect()
}

/// Plateau (first point) of the smoothed curve and the last axis value of
/// the initial run holding at least 99% of it.
pub fn knee(axis: &[f64], throughput: &[f64]) -> Option<f64> {
    let s = median3(throughput);
    let plateau = *s.first()?;
    if plateau <= 0.0 {
        return None;
    }
    let mut last = None;
    for (x, &y) in axis.iter().zip(&s) {
        if y >= 0.99 * plateau {
            last = Some(*x);
        } else {
            break;
        }
    }
    last
}

/// The smoothed curve drops from at least 99% to below 50% of its plateau
/// between two neighbouring points.
pub fn has_cliff(throughput: &[f64]) -> bool {
    let s = median3(throughput);
    let Some(&plateau) = s.first() else { return false };
    plateau > 0.0 && s.windows(2).any(|w| w[0] >= 0.99 * plateau && w[1] < 0.5 * plateau)
}

/// Smoothed curve never rises by more than `slack` of its plateau.
pub fn is_monotone_non_increasing(throughput: &[f64], slack: f64) -> bool {
    let s = median3(throughput);
    let plateau = s.first().copied().unwrap_or(0.0);
    s.windows(2).all(|w| w[1] <= w[0] + slack * plateau)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxRateRow {
    pub class: MessageClass,
    pub wire_m: f64,
    pub max_clock_hz: f64,
    pub max_kbps: f64,
}

fn at_clock(d: &DeviceConfig, f: f64, phase_fraction: f64) -> DeviceConfig {
    DeviceConfig {
        nominal_frequency: f,
        clock_period_ps: None,
        phase_offset: (phase_fraction * 1e12 / f) as u64,
        ..d.clone()
    }
}

/// Highest clock frequency (bisected on a log axis) at which every message
/// of the workload is delivered.
pub fn run_max_bitrate_search(cfg: &ExperimentConfig) -> Result<Vec<MaxRateRow>> {
    let mb = &cfg.max_bitrate;
    let mut jobs = Vec::new();
    for &class in &cfg.workload.classes {
        for &len in &mb.lengths_m {
            jobs.push((class, len));
        }
    }
    let tx = cfg.devices.tx.device_config();
    let rx = cfg.devices.rx.device_config();
    let psc = tx.psc_division as f64;
    jobs.par_iter()
        .enumerate()
        .map(|(i, &(class, len))| {
            let params = cfg.channel.params_at(len);
            let msgs = class_messages(cfg, class, point_seed(cfg.seed, i));
            let ok = |f: f64| -> Result<bool> {
                let mut spec = StreamSpec::new(BusSpec::Analog(params), at_clock(&tx, f, 0.0), at_clock(&rx, f, 0.41));
                spec.stop_on_failure = true;
                Ok(run_stream(&spec, &msgs)?.all_delivered(msgs.len()))
            };
            let (mut lo, mut hi) = (mb.min_hz, mb.max_hz);
            let best = if !ok(lo)? {
                0.0
            } else if ok(hi)? {
                hi
            } else {
                for _ in 0..mb.iterations {
                    let mid = (lo * hi).sqrt();
                    if ok(mid)? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo
            };
            Ok(MaxRateRow { class, wire_m: len, max_clock_hz: best, max_kbps: best / psc / 1e3 })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkewRow {
    pub tx_offset: f64,
    pub rx_offset: f64,
    pub hp_delivered: usize,
    pub lp_delivered: usize,
    pub total: usize,
    /// Inside the asserted grid (probes outside it are only recorded).
    pub in_grid: bool,
}

impl SkewRow {
    pub fn passed(&self) -> bool {
        self.hp_delivered == self.total && self.lp_delivered == self.total
    }
}

/// HP and LP delivery for every (tx, rx) clock offset pair, ideal bus.
pub fn run_clock_skew_grid(cfg: &ExperimentConfig) -> Result<Vec<SkewRow>> {
    let offsets = cfg.skew.offsets.points();
    let mut cells: Vec<(f64, f64, bool)> = Vec::new();
    for &a in &offsets {
        for &b in &offsets {
            cells.push((a, b, true));
        }
    }
    cells.extend(cfg.skew.probes.iter().map(|&(a, b)| (a, b, false)));
    let tx = cfg.devices.tx.device_config();
    let rx = cfg.devices.rx.device_config();
    cells
        .par_iter()
        .enumerate()
        .map(|(i, &(a, b, in_grid))| {
            let spec = StreamSpec::new(
                BusSpec::Ideal,
                DeviceConfig { offset_fraction: a, clock_period_ps: None, ..tx.clone() },
                DeviceConfig { offset_fraction: b, clock_period_ps: None, ..rx.clone() },
            );
            let seed = point_seed(cfg.seed, i);
            let hp = run_stream(&spec, &workload(MessageClass::Hp, 1, cfg.repetitions, seed))?;
            let lp = run_stream(&spec, &workload(MessageClass::Lp, cfg.workload.lp_size, cfg.repetitions, seed ^ 1))?;
            Ok(SkewRow {
                tx_offset: a,
                rx_offset: b,
                hp_delivered: hp.delivered(),
                lp_delivered: lp.delivered(),
                total: cfg.repetitions,
                in_grid,
            })
        })
        .collect()
}
