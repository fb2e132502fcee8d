//! Frame layout for HP, LP and address messages.
//!
//! ```text
//! HP:   SYNC(2) PAYLOAD(8)                CRC(4) ACK(1)   = 15 slots
//! LP:   SYNC(2) SIZE(3) PAYLOAD(8..56)    CRC(4) ACK(1)   = 18..66 slots
//! ADDR: SYNC(2) SIZE=000 ADDRESS(8)       CRC(4) ACK(1)   = 18 slots
//! ```
//!
//! The HP sync holds the wire low for 1.5 slots and releases it for the last
//! half slot; the LP sync is two Manchester ones. Both end with a rising edge
//! 1.5 slots after the first falling edge. CRC covers SIZE and PAYLOAD.

use alloc::vec::Vec;
use arrayvec::ArrayVec;
use core::fmt;
use core::str::FromStr;

use crate::channel::LineLevel;
use crate::coding::{halves_trace, manchester_halves, SlotTiming};
use crate::crc::crc4_bits;
use crate::trace::DigitalTrace;

pub const MAX_LP_PAYLOAD: usize = 7;
pub const SYNC_SLOTS: usize = 2;
pub const SIZE_BITS: usize = 3;
pub const CRC_SLOTS: usize = 4;
pub const ACK_SLOTS: usize = 1;
pub const HP_SLOTS: usize = SYNC_SLOTS + 8 + CRC_SLOTS + ACK_SLOTS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageKind {
    Hp,
    Lp,
    Addr,
}

impl MessageKind {
    pub fn sync_class(self) -> SyncClass {
        match self {
            MessageKind::Hp => SyncClass::Hp,
            MessageKind::Lp | MessageKind::Addr => SyncClass::Lp,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::Hp => "hp",
            MessageKind::Lp => "lp",
            MessageKind::Addr => "addr",
        }
    }
}

/// What the sync field tells a receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyncClass {
    Hp,
    Lp,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Message {
    Hp(u8),
    Lp(ArrayVec<u8, MAX_LP_PAYLOAD>),
    Addr(u8),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FrameError {
    EmptyPayload,
    PayloadTooLong(usize),
    BitCount { expected: usize, got: usize },
    BadLiteral,
}

impl fmt::Display for FrameError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameError::EmptyPayload => f.write_str("LP payload must hold at least one byte"),
            FrameError::PayloadTooLong(n) => write!(f, "LP payload of {n} bytes exceeds {MAX_LP_PAYLOAD}"),
            FrameError::BitCount { expected, got } => {
                write!(f, "frame body carries {got} bits where the size field implies {expected}")
            }
            FrameError::BadLiteral => f.write_str("message literal must look like hp:0xAB, lp:0x01,0x02 or addr:0x2A"),
        }
    }
}

impl Message {
    pub fn lp(payload: &[u8]) -> Result<Self, FrameError> {
        if payload.is_empty() {
            return Err(FrameError::EmptyPayload);
        }
        let bytes = ArrayVec::try_from(payload).map_err(|_| FrameError::PayloadTooLong(payload.len()))?;
        Ok(Message::Lp(bytes))
    }

    pub fn kind(&self) -> MessageKind {
        match self {
            Message::Hp(_) => MessageKind::Hp,
            Message::Lp(_) => MessageKind::Lp,
            Message::Addr(_) => MessageKind::Addr,
        }
    }

    /// Payload bytes (the address for ADDR frames).
    pub fn payload(&self) -> &[u8] {
        match self {
            Message::Hp(b) | Message::Addr(b) => core::slice::from_ref(b),
            Message::Lp(bytes) => bytes,
        }
    }

    /// Value of the SIZE field, or `None` for HP frames.
    pub fn size_field(&self) -> Option<u8> {
        match self {
            Message::Hp(_) => None,
            Message::Lp(bytes) => Some(bytes.len() as u8),
            Message::Addr(_) => Some(0),
        }
    }

    pub fn is_hp(&self) -> bool {
        matches!(self, Message::Hp(_))
    }
}

fn push_bits(out: &mut Vec<bool>, value: u8, width: usize) {
    for i in (0..width).rev() {
        out.push((value >> i) & 1 != 0);
    }
}

fn bits_to_byte(bits: &[bool]) -> u8 {
    bits.iter().fold(0u8, |acc, &b| (acc << 1) | b as u8)
}

/// Payload bit count implied by a SIZE value (address frames carry one byte).
pub fn payload_bits_for_size(size: u8) -> usize {
    8 * (size.max(1) as usize)
}

/// Sync field as half-slot levels.
pub fn sync_halves(class: SyncClass) -> [LineLevel; 4] {
    use LineLevel::*;
    match class {
        SyncClass::Hp => [Low, Low, Low, High],
        SyncClass::Lp => [Low, High, Low, High],
    }
}

/// Logical content of a frame, ready to serialize.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePlan {
    pub kind: MessageKind,
    /// SIZE bits (LP/ADDR) followed by payload bits, MSB first.
    pub body_bits: Vec<bool>,
    pub crc_bits: [bool; 4],
}

impl FramePlan {
    pub fn sync_class(&self) -> SyncClass {
        self.kind.sync_class()
    }

    pub fn slot_count(&self) -> usize {
        SYNC_SLOTS + self.body_bits.len() + CRC_SLOTS + ACK_SLOTS
    }

    /// Slots driven by the transmitter (everything but ACK).
    pub fn tx_slot_count(&self) -> usize {
        self.slot_count() - ACK_SLOTS
    }

    /// Body plus CRC bits as a receiver decodes them after sync.
    pub fn coded_bits(&self) -> Vec<bool> {
        let mut v = self.body_bits.clone();
        v.extend_from_slice(&self.crc_bits);
        v
    }

    /// Half-slot levels of sync, body and CRC (the ACK slot is not included).
    pub fn halves(&self) -> Vec<LineLevel> {
        let mut out = Vec::with_capacity(2 * self.tx_slot_count());
        out.extend_from_slice(&sync_halves(self.sync_class()));
        for bit in self.coded_bits() {
            out.extend_from_slice(&manchester_halves(bit));
        }
        out
    }

    /// Whole-frame wire trace from time zero, with or without an ACK.
    pub fn trace(&self, timing: &SlotTiming, acked: bool) -> DigitalTrace {
        let mut halves = self.halves();
        if acked {
            halves.extend_from_slice(&manchester_halves(true));
        } else {
            halves.extend_from_slice(&[LineLevel::High, LineLevel::High]);
        }
        halves_trace(halves, timing.half_period())
    }
}

pub fn plan_frame(msg: &Message) -> FramePlan {
    let mut body_bits = Vec::new();
    if let Some(size) = msg.size_field() {
        push_bits(&mut body_bits, size, SIZE_BITS);
    }
    for &byte in msg.payload() {
        push_bits(&mut body_bits, byte, 8);
    }
    let crc_bits = crc4_bits(&body_bits);
    FramePlan { kind: msg.kind(), body_bits, crc_bits }
}

/// Slot count of the frame for `msg`, including the ACK slot.
pub fn frame_slots(msg: &Message) -> usize {
    match msg {
        Message::Hp(_) => HP_SLOTS,
        _ => SYNC_SLOTS + SIZE_BITS + 8 * msg.payload().len() + CRC_SLOTS + ACK_SLOTS,
    }
}

/// Duration of a gapless frame including its ACK slot, in picoseconds.
pub fn frame_duration(msg: &Message, timing: &SlotTiming) -> u64 {
    frame_slots(msg) as u64 * timing.slot_period()
}

/// Rebuild a message from decoded fields.
///
/// `size_bits` is empty for HP frames. `payload_bits` must match the count
/// the SIZE field implies.
pub fn parse_body(class: SyncClass, size_bits: &[bool], payload_bits: &[bool]) -> Result<Message, FrameError> {
    let (size, expected) = match class {
        SyncClass::Hp => (None, 8),
        SyncClass::Lp => {
            if size_bits.len() != SIZE_BITS {
                return Err(FrameError::BitCount { expected: SIZE_BITS, got: size_bits.len() });
            }
            let size = bits_to_byte(size_bits);
            (Some(size), payload_bits_for_size(size))
        }
    };
    if payload_bits.len() != expected {
        return Err(FrameError::BitCount { expected, got: payload_bits.len() });
    }
    let mut bytes = payload_bits.chunks(8).map(bits_to_byte);
    Ok(match size {
        None => Message::Hp(bytes.next().unwrap_or(0)),
        Some(0) => Message::Addr(bytes.next().unwrap_or(0)),
        Some(_) => Message::Lp(bytes.collect()),
    })
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.kind().name())?;
        for (i, b) in self.payload().iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "0x{b:02X}")?;
        }
        Ok(())
    }
}

fn parse_byte(s: &str) -> Result<u8, FrameError> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u8::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|_| FrameError::BadLiteral)
}

impl FromStr for Message {
    type Err = FrameError;

    /// `hp:0xAB`, `lp:0x01,0x02,0x03` or `addr:0x2A`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s.trim().split_once(':').ok_or(FrameError::BadLiteral)?;
        let bytes: Vec<u8> = rest.split(',').map(parse_byte).collect::<Result<_, _>>()?;
        match (kind.trim().to_ascii_lowercase().as_str(), bytes.as_slice()) {
            ("hp", [b]) => Ok(Message::Hp(*b)),
            ("addr", [b]) => Ok(Message::Addr(*b)),
            ("lp", bytes) => Message::lp(bytes),
            _ => Err(FrameError::BadLiteral),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for FrameError {}
