//! Bit-accurate engine for the LinkBo single-wire chip-to-chip protocol.
//!
//! Everything here is `no_std` + `alloc`: the event kernel, the wire models,
//! Manchester/CRC-4 line coding, frame layout, the transmitter/receiver
//! state machines and the analytical baseline timing models. File formats,
//! the experiment harness and the CLI live in the `linkbo` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baselines;
pub mod channel;
pub mod coding;
pub mod crc;
pub mod endpoint;
pub mod frame;
pub mod network;
pub mod time;
pub mod trace;

pub use channel::{AnalogChannel, ChannelParams, DriveState, LineLevel, WireGeometry};
pub use coding::SlotTiming;
pub use endpoint::{AckOutcome, DeviceConfig, Outcome, TransmissionReport};
pub use frame::{Message, MessageKind};
pub use time::{ClockDomain, EventQueue, SimTime};
pub use trace::LineTrace;
