use alloc::vec::Vec;

use crate::channel::{DriveState, LineLevel};
use crate::crc::{crc4_check, WIDTH as CRC_WIDTH};
use crate::frame::{parse_body, payload_bits_for_size, Message, SyncClass, SIZE_BITS};

/// Sync measurement gives up after this many nominal slots.
const SYNC_TIMEOUT_SLOTS: u32 = 4;
const HP_CODED_BITS: usize = 8 + CRC_WIDTH;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RxState {
    Idle,
    /// Counting cycles from the sync's falling edge.
    MeasureSync {
        elapsed: u32,
        rises: u8,
    },
    /// Interrupted: waiting for the rising edge that ends an HP sync.
    AwaitSyncEnd {
        elapsed: u32,
    },
    Body,
    /// CRC done; driving (or not) the acknowledge until the ACK slot ends.
    Ack {
        drive: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RxError {
    SyncTimeout,
    NoTransition,
    Malformed,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RxEvent {
    Synced {
        class: SyncClass,
        slot_cycles: u32,
    },
    /// CRC passed. `acked` is false when the address filter muted the frame.
    Received {
        message: Message,
        acked: bool,
    },
    CrcRejected {
        bits: Vec<bool>,
    },
    Failed {
        error: RxError,
        bits: Vec<bool>,
    },
}

#[derive(Debug, Clone)]
pub struct Receiver {
    psc: u32,
    tolerance: f64,
    resync: bool,
    address: Option<u8>,
    muted: bool,
    state: RxState,
    prev: LineLevel,
    last_slot: Option<u32>,
    class: SyncClass,
    slot: u32,
    since_anchor: u32,
    /// Best transition in the open window: (distance from mid, offset, bit).
    candidate: Option<(u32, u32, bool)>,
    bits: Vec<bool>,
    expected: Option<usize>,
}

impl Receiver {
    pub fn new(psc_division: u32, tolerance: f64, resync: bool, address: Option<u8>) -> Self {
        Receiver {
            psc: psc_division,
            tolerance,
            resync,
            address,
            muted: false,
            state: RxState::Idle,
            prev: LineLevel::High,
            last_slot: None,
            class: SyncClass::Hp,
            slot: psc_division,
            since_anchor: 0,
            candidate: None,
            bits: Vec::new(),
            expected: None,
        }
    }

    pub fn state(&self) -> RxState {
        self.state
    }

    pub fn is_idle(&self) -> bool {
        self.state == RxState::Idle
    }

    /// Class of the frame being decoded, once sync is known.
    pub fn class_in_progress(&self) -> Option<SyncClass> {
        match self.state {
            RxState::Body | RxState::Ack { .. } => Some(self.class),
            RxState::AwaitSyncEnd { .. } => Some(SyncClass::Hp),
            _ => None,
        }
    }

    /// Only an idle receiver or one inside an LP frame can be preempted.
    pub fn accepts_interrupt(&self) -> bool {
        match self.state {
            RxState::Idle => true,
            RxState::Body => self.class == SyncClass::Lp,
            _ => false,
        }
    }

    pub fn is_muted(&self) -> bool {
        self.muted
    }

    /// Last measured slot length in cycles.
    pub fn last_slot(&self) -> Option<u32> {
        self.last_slot
    }

    /// Drop the frame in progress and wait for the end of an HP sync.
    pub fn interrupt(&mut self) {
        self.bits.clear();
        self.state = RxState::AwaitSyncEnd { elapsed: 0 };
    }

    /// Continue a frame whose first `bits` are known, anchored at the mid-slot
    /// of the last of them on this cycle.
    pub fn resume(&mut self, class: SyncClass, slot_cycles: u32, bits: Vec<bool>) {
        self.begin_body(class, slot_cycles);
        if class == SyncClass::Lp && bits.len() >= SIZE_BITS {
            let size = bits[..SIZE_BITS].iter().fold(0u8, |acc, &b| (acc << 1) | b as u8);
            self.expected = Some(SIZE_BITS + payload_bits_for_size(size) + CRC_WIDTH);
        }
        self.bits = bits;
    }

    pub fn abort(&mut self) {
        self.bits.clear();
        self.state = RxState::Idle;
    }

    /// Track the line without decoding (used while transmitting).
    pub fn observe(&mut self, level: LineLevel) {
        self.prev = level;
    }

    /// One clock cycle: sample, advance, and return the receiver's drive.
    pub fn step(&mut self, level: LineLevel) -> (DriveState, Option<RxEvent>) {
        let transition = level != self.prev;
        self.prev = level;
        let mut event = None;
        match self.state {
            RxState::Idle => {
                if transition && level.is_low() {
                    self.state = RxState::MeasureSync { elapsed: 0, rises: 0 };
                }
            }
            RxState::MeasureSync { elapsed, rises } => {
                let elapsed = elapsed + 1;
                if transition && level.is_high() {
                    if rises == 0 && elapsed > self.psc {
                        event = Some(self.synced(SyncClass::Hp, elapsed));
                    } else if rises == 0 {
                        self.state = RxState::MeasureSync { elapsed, rises: 1 };
                    } else {
                        event = Some(self.synced(SyncClass::Lp, elapsed));
                    }
                } else if elapsed > SYNC_TIMEOUT_SLOTS * self.psc {
                    event = Some(self.fail(RxError::SyncTimeout));
                } else {
                    self.state = RxState::MeasureSync { elapsed, rises };
                }
            }
            RxState::AwaitSyncEnd { elapsed } => {
                let elapsed = elapsed + 1;
                if transition && level.is_high() {
                    let slot = self.last_slot.unwrap_or(self.psc);
                    self.begin_body(SyncClass::Hp, slot);
                    event = Some(RxEvent::Synced { class: SyncClass::Hp, slot_cycles: slot });
                } else if elapsed > SYNC_TIMEOUT_SLOTS * self.psc {
                    event = Some(self.fail(RxError::SyncTimeout));
                } else {
                    self.state = RxState::AwaitSyncEnd { elapsed };
                }
            }
            RxState::Body => event = self.body_step(transition, level),
            RxState::Ack { drive } => {
                self.since_anchor += 1;
                let s = self.since_anchor;
                // one cycle late so a rounded-down half slot never lands
                // inside the transmitter's last CRC half
                let half = self.slot / 2;
                if s > self.slot + half {
                    self.state = RxState::Idle;
                } else if drive && s > half && s <= self.slot {
                    return (DriveState::DriveLow, None);
                }
            }
        }
        (DriveState::Release, event)
    }

    fn synced(&mut self, class: SyncClass, count: u32) -> RxEvent {
        // the measured stretch covers 1.5 slots
        let slot = ((2 * count + 1) / 3).max(2);
        self.last_slot = Some(slot);
        self.begin_body(class, slot);
        RxEvent::Synced { class, slot_cycles: slot }
    }

    fn begin_body(&mut self, class: SyncClass, slot: u32) {
        self.class = class;
        self.slot = slot;
        self.since_anchor = 0;
        self.candidate = None;
        self.bits.clear();
        self.expected = match class {
            SyncClass::Hp => Some(HP_CODED_BITS),
            SyncClass::Lp => None,
        };
        self.state = RxState::Body;
    }

    fn fail(&mut self, error: RxError) -> RxEvent {
        self.state = RxState::Idle;
        RxEvent::Failed { error, bits: core::mem::take(&mut self.bits) }
    }

    fn body_step(&mut self, transition: bool, level: LineLevel) -> Option<RxEvent> {
        self.since_anchor += 1;
        let s = self.since_anchor;
        let mid = self.slot as f64;
        let window = self.tolerance * mid;
        if transition && (s as f64 - mid).abs() <= window {
            let dist = s.abs_diff(self.slot);
            if self.candidate.is_none_or(|(d, _, _)| dist < d) {
                self.candidate = Some((dist, s, level.is_high()));
            }
        }
        if (s as f64) <= mid + window {
            return None;
        }
        let Some((_, at, bit)) = self.candidate.take() else {
            return Some(self.fail(RxError::NoTransition));
        };
        self.bits.push(bit);
        self.since_anchor = if self.resync { s - at } else { s - self.slot };
        if self.class == SyncClass::Lp && self.bits.len() == SIZE_BITS {
            let size = self.bits.iter().fold(0u8, |acc, &b| (acc << 1) | b as u8);
            self.expected = Some(SIZE_BITS + payload_bits_for_size(size) + CRC_WIDTH);
        }
        if Some(self.bits.len()) == self.expected {
            return Some(self.finish());
        }
        None
    }

    fn finish(&mut self) -> RxEvent {
        let bits = core::mem::take(&mut self.bits);
        if !crc4_check(&bits) {
            self.state = RxState::Ack { drive: false };
            return RxEvent::CrcRejected { bits };
        }
        let body = &bits[..bits.len() - CRC_WIDTH];
        let (size, payload) = match self.class {
            SyncClass::Hp => (&body[..0], body),
            SyncClass::Lp => body.split_at(SIZE_BITS),
        };
        let Ok(message) = parse_body(self.class, size, payload) else {
            return self.fail(RxError::Malformed);
        };
        let acked = match (&message, self.address) {
            (Message::Addr(a), Some(own)) => {
                self.muted = *a != own;
                !self.muted
            }
            (Message::Addr(_), None) => true,
            _ => !self.muted,
        };
        self.state = RxState::Ack { drive: acked };
        RxEvent::Received { message, acked }
    }
}
