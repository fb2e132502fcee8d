//! Experiment configuration files (YAML).

use std::path::Path;

use anyhow::{bail, Context, Result};
use linkbo_core::channel::{ChannelParams, BASELINE_LENGTH};
use linkbo_core::endpoint::{DeviceConfig, DEFAULT_LBDET_THRESHOLD, DEFAULT_PSC_DIVISION};
use serde::{Deserialize, Serialize};

use crate::stream::{BusSpec, MessageClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Latency,
    LengthSweep,
    ParamSweep,
    MaxBitrate,
    SkewGrid,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Latency => "latency",
            ExperimentKind::LengthSweep => "length_sweep",
            ExperimentKind::ParamSweep => "param_sweep",
            ExperimentKind::MaxBitrate => "max_bitrate",
            ExperimentKind::SkewGrid => "skew_grid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Capacitance,
    LoadR,
    PullupR,
    Inductance,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Capacitance => "capacitance",
            SweepParameter::LoadR => "load_r",
            SweepParameter::PullupR => "pullup_r",
            SweepParameter::Inductance => "inductance",
        }
    }

    /// `base` with this parameter scaled by `ratio`.
    pub fn scale(self, base: &ChannelParams, ratio: f64) -> ChannelParams {
        let mut p = *base;
        match self {
            SweepParameter::Capacitance => p.capacitance *= ratio,
            SweepParameter::LoadR => p.load_resistance *= ratio,
            SweepParameter::PullupR => p.pull_up_resistance *= ratio,
            SweepParameter::Inductance => p.inductance *= ratio,
        }
        p.with_auto_step(1e-9)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceSection {
    pub frequency_hz: f64,
    pub offset: f64,
    pub phase_ps: u64,
    /// Use the exact 336 ns clock (3.36 µs slots) instead of `frequency_hz`.
    pub exact_rate: bool,
    pub psc_division: u32,
    pub address: Option<u8>,
    pub lbdet_threshold: f64,
    pub decode_tolerance: f64,
    pub resync: bool,
}

impl Default for DeviceSection {
    fn default() -> Self {
        DeviceSection {
            frequency_hz: 3e6,
            offset: 0.0,
            phase_ps: 0,
            exact_rate: false,
            psc_division: DEFAULT_PSC_DIVISION,
            address: None,
            lbdet_threshold: DEFAULT_LBDET_THRESHOLD,
            decode_tolerance: 0.25,
            resync: true,
        }
    }
}

impl DeviceSection {
    pub fn device_config(&self) -> DeviceConfig {
        DeviceConfig {
            nominal_frequency: self.frequency_hz,
            offset_fraction: self.offset,
            phase_offset: self.phase_ps,
            clock_period_ps: self.exact_rate.then_some(336_000),
            psc_division: self.psc_division,
            address: self.address,
            lbdet_threshold: self.lbdet_threshold,
            decode_tolerance: self.decode_tolerance,
            resync: self.resync,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DevicesSection {
    pub tx: DeviceSection,
    pub rx: DeviceSection,
}

impl Default for DevicesSection {
    fn default() -> Self {
        DevicesSection { tx: DeviceSection::default(), rx: DeviceSection { phase_ps: 137_000, ..Default::default() } }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusKind {
    Ideal,
    Analog,
}

/// Wire model. Unset analog values fall back to the calibrated baseline;
/// `length_m` adds calibrated per-meter parasitics beyond 11 cm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub bus: BusKind,
    pub length_m: f64,
    pub pull_up_ohm: Option<f64>,
    pub load_ohm: Option<f64>,
    pub capacitance_f: Option<f64>,
    pub inductance_h: Option<f64>,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            bus: BusKind::Ideal,
            length_m: BASELINE_LENGTH,
            pull_up_ohm: None,
            load_ohm: None,
            capacitance_f: None,
            inductance_h: None,
        }
    }
}

impl ChannelSection {
    /// Analog parameters at `length` meters with the section's overrides.
    pub fn params_at(&self, length: f64) -> ChannelParams {
        let mut p = ChannelParams::at_length(length);
        let base = ChannelParams::baseline();
        if let Some(v) = self.pull_up_ohm {
            p.pull_up_resistance = v;
        }
        if let Some(v) = self.load_ohm {
            p.load_resistance += v - base.load_resistance;
        }
        if let Some(v) = self.capacitance_f {
            p.capacitance += v - base.capacitance;
        }
        if let Some(v) = self.inductance_h {
            p.inductance += v - base.inductance;
        }
        p.with_auto_step(1e-9)
    }

    pub fn bus(&self) -> BusSpec {
        match self.bus {
            BusKind::Ideal => BusSpec::Ideal,
            BusKind::Analog => BusSpec::Analog(self.params_at(self.length_m)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSection {
    pub classes: Vec<MessageClass>,
    /// LP payload bytes for sweeps and searches.
    pub lp_size: usize,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        WorkloadSection { classes: vec![MessageClass::Hp, MessageClass::Lp], lp_size: 7 }
    }
}

/// Inclusive numeric range walked in fixed steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl Range {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.to - self.from) / self.step + 1e-9).floor() as usize;
        // integer stepping keeps the axis free of accumulated rounding
        (0..=n).map(|i| round6(self.from + i as f64 * self.step)).collect()
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.step > 0.0 && self.to >= self.from && self.from.is_finite() && self.to.is_finite()) {
            bail!("{what}: range must have step > 0 and to >= from");
        }
        Ok(())
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub parameters: Vec<SweepParameter>,
    pub ratio: Range,
    pub length_m: Range,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            parameters: vec![SweepParameter::Capacitance, SweepParameter::LoadR, SweepParameter::PullupR],
            ratio: Range { from: 1.0, to: 3.0, step: 0.02 },
            length_m: Range { from: 0.0, to: 25.0, step: 0.25 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaxBitrateSection {
    pub lengths_m: Vec<f64>,
    pub min_hz: f64,
    pub max_hz: f64,
    /// Bisection steps on a log-frequency axis.
    pub iterations: u32,
}

impl Default for MaxBitrateSection {
    fn default() -> Self {
        MaxBitrateSection { lengths_m: vec![BASELINE_LENGTH, 5.0], min_hz: 1e5, max_hz: 2e8, iterations: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencySection {
    pub lengths_m: Vec<f64>,
}

impl Default for LatencySection {
    fn default() -> Self {
        LatencySection { lengths_m: vec![BASELINE_LENGTH, 5.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkewSection {
    pub offsets: Range,
    /// Extra (tx, rx) offset pairs run outside the asserted grid.
    pub probes: Vec<(f64, f64)>,
}

impl Default for SkewSection {
    fn default() -> Self {
        SkewSection { offsets: Range { from: -0.05, to: 0.05, step: 0.01 }, probes: vec![(0.2, -0.2)] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Messages per operating point.
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub devices: DevicesSection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub workload: WorkloadSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub max_bitrate: MaxBitrateSection,
    #[serde(default)]
    pub latency: LatencySection,
    #[serde(default)]
    pub skew: SkewSection,
}

fn default_seed() -> u64 {
    1
}

fn default_repetitions() -> usize {
    100
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            seed: default_seed(),
            repetitions: default_repetitions(),
            devices: DevicesSection::default(),
            channel: ChannelSection::default(),
            workload: WorkloadSection::default(),
            sweep: SweepSection::default(),
            max_bitrate: MaxBitrateSection::default(),
            latency: LatencySection::default(),
            skew: SkewSection::default(),
        }
    }

    pub fn from_yaml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_yaml::from_str(text).context("parsing experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_yaml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_yaml(&self) -> Result<String> {
        Ok(serde_yaml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            bail!("repetitions must be at least 1");
        }
        if self.workload.classes.is_empty() {
            bail!("workload.classes must not be empty");
        }
        if !(1..=7).contains(&self.workload.lp_size) {
            bail!("workload.lp_size must be 1..=7");
        }
        self.sweep.ratio.validate("sweep.ratio")?;
        self.sweep.length_m.validate("sweep.length_m")?;
        self.skew.offsets.validate("skew.offsets")?;
        if self.experiment == ExperimentKind::ParamSweep && self.sweep.parameters.is_empty() {
            bail!("sweep.parameters must not be empty");
        }
        let mb = &self.max_bitrate;
        if !(mb.min_hz > 0.0 && mb.max_hz > mb.min_hz) {
            bail!("max_bitrate: need 0 < min_hz < max_hz");
        }
        for d in [&self.devices.tx, &self.devices.rx] {
            if d.psc_division < 2 || d.frequency_hz <= 0.0 {
                bail!("devices: psc_division >= 2 and frequency_hz > 0 required");
            }
            d.device_config().clock().map_err(|e| anyhow::anyhow!("devices: {e}"))?;
        }
        Ok(())
    }
}
