//! Models of the shared wire: ideal wired-AND resolution and a lumped
//! analog network with open-drain switches and comparator receivers.
//!
//! Analog topology:
//!
//! ```text
//!  Vdd ──R_pullup──┬──R_load──L──┬── far node
//!                  │             │
//!             near switches   far switches
//!             near comparators  C to ground
//!                              far comparators
//! ```
//!
//! The near node has no capacitance of its own, so its voltage follows
//! algebraically from the inductor current. A closed switch ties its node to
//! ground through [`SWITCH_ON_RESISTANCE`]. Both nodes carry ideal clamp
//! diodes to ground and the supply, which absorb inductive kick when a
//! switch opens.

use core::f64::consts::PI;
use core::fmt;

/// Resolved level of the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LineLevel {
    Low,
    High,
}

impl LineLevel {
    pub fn from_bool(high: bool) -> Self {
        if high {
            LineLevel::High
        } else {
            LineLevel::Low
        }
    }

    pub fn is_high(self) -> bool {
        self == LineLevel::High
    }

    pub fn is_low(self) -> bool {
        self == LineLevel::Low
    }
}

/// Open-drain output: a device either pulls the wire low or lets go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DriveState {
    DriveLow,
    #[default]
    Release,
}

impl DriveState {
    /// Drive that realizes a logical level on an open-drain output.
    pub fn for_level(level: LineLevel) -> Self {
        match level {
            LineLevel::Low => DriveState::DriveLow,
            LineLevel::High => DriveState::Release,
        }
    }

    pub fn is_low(self) -> bool {
        self == DriveState::DriveLow
    }
}

/// Wired-AND: any device pulling low wins; the pull-up holds an idle bus High.
pub fn resolve_ideal<I>(drives: I) -> LineLevel
where
    I: IntoIterator<Item = DriveState>,
{
    if drives.into_iter().any(DriveState::is_low) {
        LineLevel::Low
    } else {
        LineLevel::High
    }
}

/// Which end of the wire a device is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Attachment {
    Near,
    Far,
}

pub const SWITCH_ON_RESISTANCE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelError {
    NonPositive(&'static str),
    ThresholdAboveSupply,
    StepTooLarge { step: f64, limit: f64 },
    Unstable { step: f64 },
}

impl fmt::Display for ChannelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelError::NonPositive(name) => write!(f, "channel parameter `{name}` must be positive"),
            ChannelError::ThresholdAboveSupply => f.write_str("comparator threshold must be below the supply voltage"),
            ChannelError::StepTooLarge { step, limit } => {
                write!(f, "integration step {step:e} s exceeds a tenth of the smallest time constant ({limit:e} s)")
            }
            ChannelError::Unstable { step } => {
                write!(f, "analog state became non-finite with integration step {step:e} s")
            }
        }
    }
}

/// Lumped electrical parameters of the wire and its terminations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub pull_up_resistance: f64,
    /// Series resistance between the two ends (load resistor plus wire).
    pub load_resistance: f64,
    pub capacitance: f64,
    /// Series inductance; zero removes the inductor from the network.
    pub inductance: f64,
    pub supply_voltage: f64,
    pub comparator_threshold: f64,
    pub integration_step: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams::baseline()
    }
}

impl ChannelParams {
    /// Calibrated 11 cm operating point (see the README's calibration notes).
    pub fn baseline() -> Self {
        let mut p = ChannelParams {
            pull_up_resistance: BASELINE_PULL_UP,
            load_resistance: BASELINE_LOAD,
            capacitance: BASELINE_CAPACITANCE,
            inductance: BASELINE_INDUCTANCE,
            supply_voltage: 3.3,
            comparator_threshold: 1.5,
            integration_step: 1e-9,
        };
        p.integration_step = p.max_integration_step();
        p
    }

    /// Baseline terminations on a calibrated wire of `length` meters, with
    /// the largest valid integration step up to 1 ns.
    pub fn at_length(length: f64) -> Self {
        let extra = (length - BASELINE_LENGTH).max(0.0);
        lump_from_geometry(&WireGeometry::calibrated(extra), &ChannelParams::baseline()).with_auto_step(1e-9)
    }

    /// Smallest characteristic time constant of the network.
    pub fn min_time_constant(&self) -> f64 {
        let rc = self.load_resistance * self.capacitance;
        if self.inductance > 0.0 {
            rc.min(libm::sqrt(self.inductance * self.capacitance))
        } else {
            rc
        }
    }

    /// Largest step the validity rule allows (a tenth of the smallest time constant).
    pub fn max_integration_step(&self) -> f64 {
        self.min_time_constant() / 10.0
    }

    /// Copy with the integration step set to the largest allowed value,
    /// capped at `cap` seconds.
    pub fn with_auto_step(mut self, cap: f64) -> Self {
        self.integration_step = self.max_integration_step().min(cap);
        self
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let positive = [
            ("pull_up_resistance", self.pull_up_resistance),
            ("load_resistance", self.load_resistance),
            ("capacitance", self.capacitance),
            ("supply_voltage", self.supply_voltage),
            ("comparator_threshold", self.comparator_threshold),
            ("integration_step", self.integration_step),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ChannelError::NonPositive(name));
            }
        }
        if !(self.inductance.is_finite() && self.inductance >= 0.0) {
            return Err(ChannelError::NonPositive("inductance"));
        }
        if self.comparator_threshold >= self.supply_voltage {
            return Err(ChannelError::ThresholdAboveSupply);
        }
        let limit = self.max_integration_step();
        if self.integration_step > limit * (1.0 + 1e-9) {
            return Err(ChannelError::StepTooLarge { step: self.integration_step, limit });
        }
        Ok(())
    }
}

/// Calibration defaults for the lumped baseline; not published hardware values.
pub const BASELINE_PULL_UP: f64 = 1100.0;
pub const BASELINE_LOAD: f64 = 330.0;
pub const BASELINE_CAPACITANCE: f64 = 560e-12;
pub const BASELINE_INDUCTANCE: f64 = 1e-6;

/// Low-pass corner of the load resistor against the wire capacitance.
pub fn cutoff_frequency(params: &ChannelParams) -> f64 {
    1.0 / (2.0 * PI * params.load_resistance * params.capacitance)
}

/// High iff the node voltage strictly exceeds the comparator threshold.
pub fn sample_comparator(node_voltage: f64, params: &ChannelParams) -> LineLevel {
    LineLevel::from_bool(node_voltage > params.comparator_threshold)
}

/// Physical wire whose parasitics scale with length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WireGeometry {
    pub length: f64,
    pub per_meter_resistance: f64,
    pub per_meter_capacitance: f64,
    pub per_meter_inductance: f64,
}

impl WireGeometry {
    /// Calibrated per-meter parasitics for the shipped length sweep.
    pub fn calibrated(length: f64) -> Self {
        WireGeometry {
            length,
            per_meter_resistance: PER_METER_RESISTANCE,
            per_meter_capacitance: PER_METER_CAPACITANCE,
            per_meter_inductance: PER_METER_INDUCTANCE,
        }
    }
}

/// Wire length already contained in [`ChannelParams::baseline`].
pub const BASELINE_LENGTH: f64 = 0.11;

pub const PER_METER_RESISTANCE: f64 = 0.1;
pub const PER_METER_CAPACITANCE: f64 = 65e-12;
pub const PER_METER_INDUCTANCE: f64 = 0.5e-6;

/// Add length-proportional R, L and C to `base`; everything else is copied.
pub fn lump_from_geometry(geom: &WireGeometry, base: &ChannelParams) -> ChannelParams {
    let len = geom.length.max(0.0);
    ChannelParams {
        load_resistance: base.load_resistance + len * geom.per_meter_resistance,
        capacitance: base.capacitance + len * geom.per_meter_capacitance,
        inductance: base.inductance + len * geom.per_meter_inductance,
        ..*base
    }
}

/// Dynamic state of the lumped network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalogState {
    /// Capacitor (far node) voltage.
    pub far_voltage: f64,
    /// Series branch current, near to far.
    pub inductor_current: f64,
}

impl AnalogState {
    /// Idle equilibrium: capacitor charged to the supply, no current.
    pub fn idle(params: &ChannelParams) -> Self {
        AnalogState { far_voltage: params.supply_voltage, inductor_current: 0.0 }
    }
}

fn closed_switches(drives: &[DriveState]) -> usize {
    drives.iter().filter(|d| d.is_low()).count()
}

/// Near-node voltage implied by the branch current and the near switches.
pub fn near_voltage(state: &AnalogState, near_low: usize, params: &ChannelParams) -> f64 {
    let g_pu = 1.0 / params.pull_up_resistance;
    let g_sw = near_low as f64 / SWITCH_ON_RESISTANCE;
    let v = (params.supply_voltage * g_pu - state.inductor_current) / (g_pu + g_sw);
    v.clamp(0.0, params.supply_voltage)
}

/// Advance the network by `dt` seconds with backward Euler.
///
/// The network is linear, so the implicit update is solved in closed form.
pub fn analog_step(
    state: &AnalogState,
    near: &[DriveState],
    far: &[DriveState],
    params: &ChannelParams,
    dt: f64,
) -> Result<AnalogState, ChannelError> {
    step_counts(state, closed_switches(near), closed_switches(far), params, dt)
}

fn step_counts(
    state: &AnalogState,
    near_low: usize,
    far_low: usize,
    params: &ChannelParams,
    dt: f64,
) -> Result<AnalogState, ChannelError> {
    let vdd = params.supply_voltage;
    let g_pu = 1.0 / params.pull_up_resistance;
    let g_near = g_pu + near_low as f64 / SWITCH_ON_RESISTANCE;
    // near voltage = a - b * i
    let a = vdd * g_pu / g_near;
    let b = 1.0 / g_near;
    // far voltage = c0 + c1 * i
    let cdt = params.capacitance / dt;
    let g_far = far_low as f64 / SWITCH_ON_RESISTANCE;
    let c0 = cdt * state.far_voltage / (cdt + g_far);
    let c1 = 1.0 / (cdt + g_far);
    let ldt = params.inductance / dt;
    let rail = |v: f64| {
        if v > vdd {
            Some(vdd)
        } else if v < 0.0 {
            Some(0.0)
        } else {
            None
        }
    };
    // a clamped node is pinned at its rail and drops out of the solve
    let mut near_pin: Option<f64> = None;
    let mut far_pin: Option<f64> = None;
    let (mut i, mut v) = (0.0, 0.0);
    for _ in 0..3 {
        let (na, nb) = near_pin.map_or((a, b), |p| (p, 0.0));
        let (fa, fb) = far_pin.map_or((c0, c1), |p| (p, 0.0));
        i = (na - fa + ldt * state.inductor_current) / (ldt + nb + params.load_resistance + fb);
        v = far_pin.unwrap_or(c0 + c1 * i);
        let near = near_pin.unwrap_or(a - b * i);
        let (np, fp) = (near_pin.or(rail(near)), far_pin.or(rail(v)));
        if np == near_pin && fp == far_pin {
            break;
        }
        near_pin = np;
        far_pin = fp;
    }
    if !(i.is_finite() && v.is_finite()) {
        return Err(ChannelError::Unstable { step: dt });
    }
    Ok(AnalogState { far_voltage: v, inductor_current: i })
}

/// Analog wire with a running clock and the current switch states.
#[derive(Debug, Clone)]
pub struct AnalogChannel {
    params: ChannelParams,
    state: AnalogState,
    time: f64,
    near_low: usize,
    far_low: usize,
}

impl AnalogChannel {
    pub fn new(params: ChannelParams) -> Result<Self, ChannelError> {
        params.validate()?;
        Ok(AnalogChannel { state: AnalogState::idle(&params), params, time: 0.0, near_low: 0, far_low: 0 })
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn state(&self) -> AnalogState {
        self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Number of closed switches at each end.
    pub fn set_switches(&mut self, near_low: usize, far_low: usize) {
        self.near_low = near_low;
        self.far_low = far_low;
    }

    /// Integrate with fixed steps up to `t` seconds (the last step may be shorter).
    pub fn advance_to(&mut self, t: f64) -> Result<(), ChannelError> {
        let dt = self.params.integration_step;
        while self.time < t {
            let h = (t - self.time).min(dt);
            if h <= dt * 1e-9 {
                self.time = t;
                break;
            }
            self.state = step_counts(&self.state, self.near_low, self.far_low, &self.params, h)?;
            self.time += h;
        }
        Ok(())
    }

    pub fn voltage(&self, at: Attachment) -> f64 {
        match at {
            Attachment::Far => self.state.far_voltage,
            Attachment::Near => near_voltage(&self.state, self.near_low, &self.params),
        }
    }

    pub fn level(&self, at: Attachment) -> LineLevel {
        sample_comparator(self.voltage(at), &self.params)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ChannelError {}
