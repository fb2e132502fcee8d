//! The LinkBo device: transmitter, receiver, low-bus detector and the
//! top-level FSM that arbitrates between them.
//!
//! Everything is clocked by the device's own clock. On each rising edge the
//! device samples the bus, then decides its open-drain output for the next
//! cycle; one cycle is one prescaler tick, so a slot is `psc_division` cycles.

mod device;
mod lbdet;
mod rx;
mod tx;

pub use device::{Device, DeviceEvent, Mode};
pub use lbdet::LowBusDetector;
pub use rx::{Receiver, RxError, RxEvent, RxState};
pub use tx::{ack_from_samples, tx_ack_check, SubmitResult, Transmitter, TxState};

use crate::frame::Message;
use crate::time::{ClockDomain, ClockError, SimTime};

/// Low-run length that raises the interrupt flag, in nominal slots.
///
/// Data bits never hold the wire low for more than one slot and the HP sync
/// holds it for 1.5, so the flag sits between them; this keeps a one-slot
/// low run from a transmitter up to ~10% faster than the observer below it.
pub const DEFAULT_LBDET_THRESHOLD: f64 = 1.25;
pub const DEFAULT_PSC_DIVISION: u32 = 10;
pub const RETRY_LIMIT: u32 = 8;
/// Idle-high time before a (re)transmission may start, in nominal slots.
pub const IDLE_SLOTS_BEFORE_START: u32 = 2;

/// Device configuration record.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceConfig {
    pub nominal_frequency: f64,
    pub offset_fraction: f64,
    pub phase_offset: u64,
    /// Overrides the frequency with an exact clock period (ps) when set.
    pub clock_period_ps: Option<u64>,
    pub psc_division: u32,
    pub address: Option<u8>,
    pub lbdet_threshold: f64,
    pub decode_tolerance: f64,
    pub resync: bool,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        DeviceConfig {
            nominal_frequency: 3e6,
            offset_fraction: 0.0,
            phase_offset: 0,
            clock_period_ps: None,
            psc_division: DEFAULT_PSC_DIVISION,
            address: None,
            lbdet_threshold: DEFAULT_LBDET_THRESHOLD,
            decode_tolerance: crate::coding::DEFAULT_TOLERANCE,
            resync: true,
        }
    }
}

impl DeviceConfig {
    pub fn at_frequency(nominal_frequency: f64, offset_fraction: f64) -> Self {
        DeviceConfig { nominal_frequency, offset_fraction, ..Default::default() }
    }

    /// 336 ns clock divided by ten: 3.36 µs slots.
    pub fn exact_rate() -> Self {
        DeviceConfig { clock_period_ps: Some(336_000), ..Default::default() }
    }

    pub fn clock(&self) -> Result<ClockDomain, ClockError> {
        match self.clock_period_ps {
            Some(p) => ClockDomain::from_period_ps(p, self.phase_offset),
            None => ClockDomain::new(self.nominal_frequency, self.offset_fraction, self.phase_offset),
        }
    }

    pub fn half_cycles(&self) -> u32 {
        self.psc_division / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AckOutcome {
    AckReceived,
    NoAck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Delivered,
    /// The frame went out but no acknowledge came back.
    CrcRejected,
    Preempted,
    ArbitrationLost,
    /// The receiving side never locked onto the frame; set by callers that
    /// can see both ends.
    SyncFailed,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Delivered => "delivered",
            Outcome::CrcRejected => "crc_rejected",
            Outcome::Preempted => "preempted",
            Outcome::ArbitrationLost => "arbitration_lost",
            Outcome::SyncFailed => "sync_failed",
        }
    }
}

/// One transmission attempt as seen by its sender.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionReport {
    pub message: Message,
    pub submitted_at: SimTime,
    /// First edge the transmitter drove.
    pub start: SimTime,
    pub end: SimTime,
    /// Slots in the full frame, ACK included.
    pub bits_total: u32,
    pub bits_payload: u32,
    /// Bits the receiver got right; the sender alone can only claim all of
    /// them on ACK and none otherwise.
    pub bits_received: u32,
    pub ack: AckOutcome,
    pub outcome: Outcome,
    /// Zero-based attempt number for this message.
    pub attempt: u32,
}

impl TransmissionReport {
    /// `end - start` in picoseconds.
    pub fn duration(&self) -> u64 {
        self.end - self.start
    }

    pub fn latency(&self) -> u64 {
        self.end - self.submitted_at
    }

    /// Gross bit rate `B_total / T` in bits per second.
    pub fn bit_rate(&self) -> f64 {
        self.bits_total as f64 / (self.duration() as f64 * 1e-12)
    }

    /// Effective bit rate `B_data / T` in bits per second.
    pub fn effective_bit_rate(&self) -> f64 {
        self.bits_payload as f64 / (self.duration() as f64 * 1e-12)
    }

    /// Throughput `B_re / T` in bits per second.
    pub fn throughput(&self) -> f64 {
        self.bits_received as f64 / (self.duration() as f64 * 1e-12)
    }
}

/// Run a receiver over a recorded line trace, sampling on `clock`'s edges.
///
/// Each edge sees the level just before it, as a flip-flop would. The
/// receiver never drives the trace, so ACK slots are only observed.
pub fn decode_trace(
    trace: &crate::trace::DigitalTrace,
    clock: &ClockDomain,
    config: &DeviceConfig,
) -> alloc::vec::Vec<(SimTime, RxEvent)> {
    let mut rx = Receiver::new(config.psc_division, config.decode_tolerance, config.resync, config.address);
    let mut out = alloc::vec::Vec::new();
    let end = trace.end();
    let mut k = 0;
    loop {
        let t = clock.edge_time(k);
        if t > end {
            break;
        }
        k += 1;
        let level = if t.as_ps() == 0 { trace.level_at(t) } else { trace.level_at(SimTime(t.as_ps() - 1)) };
        if let (_, Some(ev)) = rx.step(level) {
            out.push((t, ev));
        }
    }
    out
}
