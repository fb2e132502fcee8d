//! Analytical timing of the 1-Wire and UNI/O baselines, and the LinkBo
//! comparison rows derived from frame lengths.
//!
//! Bit rate is `B_total / T`, effective bit rate (EBR) is `B_data / T`, and
//! latency is the duration of the shortest single message.

use crate::coding::SlotTiming;
use crate::frame::{frame_slots, Message};

/// 1-Wire host timing in microseconds; recovery time is not modelled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneWireTiming {
    pub reset_pulse: f64,
    pub bit_slot: f64,
    /// Family code (8) + serial number (48) + CRC (8).
    pub select_bits: u32,
    pub command_bits: u32,
    pub data_bits: u32,
    /// Bit slots covered by the first measurement window after a reset.
    ///
    /// Fitted: 640 slots amortize the 960 µs reset to the reported initial
    /// rate of 16.26 kbps (640 / (960 + 640 * 60) µs).
    pub first_window_bits: u32,
}

impl Default for OneWireTiming {
    fn default() -> Self {
        OneWireTiming {
            reset_pulse: 960.0,
            bit_slot: 60.0,
            select_bits: 64,
            command_bits: 16,
            data_bits: 64,
            first_window_bits: 640,
        }
    }
}

/// Reset pulse plus the 64-bit select message, in µs.
pub fn onewire_sync_latency(t: &OneWireTiming) -> f64 {
    t.reset_pulse + t.select_bits as f64 * t.bit_slot
}

/// Bit rate in kbps, with or without the reset preamble.
pub fn onewire_bitrate(t: &OneWireTiming, first_transfer: bool) -> f64 {
    if first_transfer {
        let bits = t.first_window_bits as f64;
        bits / (t.reset_pulse + bits * t.bit_slot) * 1e3
    } else {
        1e3 / t.bit_slot
    }
}

/// UNI/O timing.
///
/// Only the sync-bit count and the two acknowledge bits per byte come from
/// the protocol itself. `standby_overhead` and `message_bits` are fitted to the
/// latency range 810-1410 µs printed for bit periods of 10-100 µs, and
/// `payload_efficiency` to the printed EBR/bit-rate ratio (7.97/10); they are
/// not datasheet values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnioTiming {
    pub sync_bits: u32,
    pub acks_per_byte: u32,
    pub bit_period: f64,
    pub standby_overhead: f64,
    pub message_bits: f64,
    pub payload_efficiency: f64,
}

pub const UNIO_FASTEST_BIT_PERIOD: f64 = 10.0;
pub const UNIO_SLOWEST_BIT_PERIOD: f64 = 100.0;

impl UnioTiming {
    pub fn with_bit_period(bit_period: f64) -> Self {
        UnioTiming {
            sync_bits: 8,
            acks_per_byte: 2,
            bit_period,
            standby_overhead: 2230.0 / 3.0,
            message_bits: 20.0 / 3.0,
            payload_efficiency: 0.797,
        }
    }

    pub fn bitrate(&self) -> f64 {
        1e3 / self.bit_period
    }

    pub fn ebr(&self) -> f64 {
        self.bitrate() * self.payload_efficiency
    }

    pub fn latency(&self) -> f64 {
        self.standby_overhead + self.message_bits * self.bit_period
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    OneWire,
    Unio,
    LinkBo,
}

/// Metrics of one protocol/message combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    /// kbps
    pub bit_rate: f64,
    /// kbps
    pub ebr: f64,
    /// µs
    pub latency: f64,
}

/// LinkBo metrics for one message at the given slot timing.
pub fn linkbo_row(msg: &Message, timing: &SlotTiming) -> ComparisonRow {
    let slots = frame_slots(msg) as f64;
    let duration_us = slots * timing.slot_period() as f64 / 1e6;
    let data_bits = 8.0 * msg.payload().len() as f64;
    ComparisonRow { bit_rate: slots / duration_us * 1e3, ebr: data_bits / duration_us * 1e3, latency: duration_us }
}

/// 1-Wire steady-state transfer of `data_bits` after the sync message.
pub fn onewire_row(t: &OneWireTiming) -> ComparisonRow {
    let transfer = (t.command_bits + t.data_bits) as f64 * t.bit_slot;
    ComparisonRow {
        bit_rate: onewire_bitrate(t, false),
        ebr: t.data_bits as f64 / transfer * 1e3,
        latency: onewire_sync_latency(t),
    }
}

pub fn unio_row(t: &UnioTiming) -> ComparisonRow {
    ComparisonRow { bit_rate: t.bitrate(), ebr: t.ebr(), latency: t.latency() }
}

/// Rows for one protocol: LinkBo uses `msg` at `timing`, the baselines their
/// own timing models.
pub fn protocol_comparison_row(protocol: Protocol, msg: &Message, timing: &SlotTiming) -> ComparisonRow {
    match protocol {
        Protocol::LinkBo => linkbo_row(msg, timing),
        Protocol::OneWire => onewire_row(&OneWireTiming::default()),
        Protocol::Unio => unio_row(&UnioTiming::with_bit_period(UNIO_FASTEST_BIT_PERIOD)),
    }
}

/// Ranges printed in the published comparison table, kept for reference.
pub mod printed {
    pub const ONEWIRE_BITRATE: (f64, f64) = (8.33, 111.0);
    pub const ONEWIRE_EBR: (f64, f64) = (5.8, 77.2);
    /// The lower bound has no derivation available; reproduced as printed.
    pub const ONEWIRE_LATENCY: (f64, f64) = (1520.0, 4880.0);
    pub const UNIO_BITRATE: (f64, f64) = (10.0, 100.0);
    pub const UNIO_EBR: (f64, f64) = (7.97, 79.7);
    pub const UNIO_LATENCY: (f64, f64) = (810.0, 1410.0);
    pub const LINKBO_BITRATE: (f64, f64) = (294.8, 297.6);
    pub const LINKBO_EBR: (f64, f64) = (158.72, 252.5);
    pub const LINKBO_LATENCY: (f64, f64) = (50.4, 223.8);
}
