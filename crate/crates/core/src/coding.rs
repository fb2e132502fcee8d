//! Manchester line coding (IEEE 802.3 polarity: rising mid-slot = 1).

use alloc::vec::Vec;
use core::fmt;

use crate::channel::LineLevel;
use crate::time::{ClockDomain, SimTime};
use crate::trace::DigitalTrace;

/// Default half-width of the mid-slot acceptance window, as a slot fraction.
pub const DEFAULT_TOLERANCE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub enum TimingError {
    OddDivision(u32),
    OddSlot(u64),
}

impl fmt::Display for TimingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimingError::OddDivision(d) => write!(f, "prescaler division {d} must be even and non-zero"),
            TimingError::OddSlot(s) => write!(f, "slot period {s} ps must be even and non-zero"),
        }
    }
}

/// Length of one Manchester bit slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotTiming {
    slot_period: u64,
    psc_division: u32,
}

impl SlotTiming {
    /// Slot of `psc_division` cycles of `clock`.
    pub fn from_clock(clock: &ClockDomain, psc_division: u32) -> Result<Self, TimingError> {
        Self::new(clock.period_ps() * psc_division as u64, psc_division)
    }

    pub fn new(slot_period: u64, psc_division: u32) -> Result<Self, TimingError> {
        if psc_division == 0 || !psc_division.is_multiple_of(2) {
            return Err(TimingError::OddDivision(psc_division));
        }
        if slot_period == 0 || !slot_period.is_multiple_of(2) {
            return Err(TimingError::OddSlot(slot_period));
        }
        Ok(SlotTiming { slot_period, psc_division })
    }

    /// 3.36 µs slots from a 336 ns clock divided by ten.
    pub fn exact_rate() -> Self {
        SlotTiming { slot_period: 3_360_000, psc_division: 10 }
    }

    pub fn slot_period(&self) -> u64 {
        self.slot_period
    }

    pub fn half_period(&self) -> u64 {
        self.slot_period / 2
    }

    pub fn psc_division(&self) -> u32 {
        self.psc_division
    }

    pub fn slot_start(&self, origin: SimTime, slot: usize) -> SimTime {
        origin + slot as u64 * self.slot_period
    }
}

/// First- and second-half levels of one Manchester bit.
pub fn manchester_halves(bit: bool) -> [LineLevel; 2] {
    if bit {
        [LineLevel::Low, LineLevel::High]
    } else {
        [LineLevel::High, LineLevel::Low]
    }
}

/// Periodic mask: Low in the first half of each slot, High in the second.
pub fn mask_wave(timing: &SlotTiming, n_slots: usize) -> DigitalTrace {
    let mut trace = DigitalTrace::new();
    for slot in 0..n_slots {
        let start = timing.slot_start(SimTime::ZERO, slot);
        trace.push_change(start, LineLevel::Low);
        trace.push_change(start + timing.half_period(), LineLevel::High);
    }
    trace.set_end(timing.slot_start(SimTime::ZERO, n_slots));
    trace
}

/// Bus trace produced by the driver's XOR gate: `data XOR mask` enables the
/// open-drain pull-down, so the wire carries its complement.
pub fn xor_encode(bits: &[bool], timing: &SlotTiming) -> DigitalTrace {
    let mask = [LineLevel::Low, LineLevel::High];
    halves_trace(
        bits.iter().flat_map(|&b| mask.iter().map(move |m| LineLevel::from_bool(!(b ^ m.is_high())))),
        timing.half_period(),
    )
}

/// Level trace of `bits`, one slot each, starting at time zero.
pub fn manchester_encode(bits: &[bool], timing: &SlotTiming) -> DigitalTrace {
    halves_trace(bits.iter().flat_map(|&b| manchester_halves(b)), timing.half_period())
}

/// Piecewise-constant trace from a sequence of half-slot levels.
pub fn halves_trace<I: IntoIterator<Item = LineLevel>>(halves: I, half_period: u64) -> DigitalTrace {
    let mut trace = DigitalTrace::new();
    let mut t = SimTime::ZERO;
    for level in halves {
        trace.push_change(t, level);
        t = t + half_period;
    }
    trace.set_end(t);
    trace
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeDirection {
    Rising,
    Falling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub at: SimTime,
    pub direction: EdgeDirection,
}

pub fn extract_edges(trace: &DigitalTrace) -> Vec<Edge> {
    trace
        .samples()
        .windows(2)
        .filter(|w| w[0].1 != w[1].1)
        .map(|w| Edge {
            at: w[1].0,
            direction: if w[1].1.is_high() { EdgeDirection::Rising } else { EdgeDirection::Falling },
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodedSlot {
    pub bit: bool,
    /// Observed edge minus expected mid-slot time, in picoseconds.
    pub mid_offset: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeError {
    pub slot_start: SimTime,
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "no transition near mid-slot of the slot starting at {}", self.slot_start)
    }
}

/// Decode one slot from the edges around it.
///
/// Picks the edge nearest the expected mid-slot time; it must lie within
/// `tolerance_fraction * slot` of it.
pub fn decode_slot(
    edges: &[Edge],
    slot_start: SimTime,
    timing: &SlotTiming,
    tolerance_fraction: f64,
) -> Result<DecodedSlot, DecodeError> {
    let mid = (slot_start + timing.half_period()).as_ps() as i64;
    let window = tolerance_fraction * timing.slot_period() as f64;
    edges
        .iter()
        .map(|e| (e, e.at.as_ps() as i64 - mid))
        .filter(|(_, off)| (*off as f64).abs() <= window)
        .min_by_key(|(_, off)| off.abs())
        .map(|(e, off)| DecodedSlot { bit: e.direction == EdgeDirection::Rising, mid_offset: off })
        .ok_or(DecodeError { slot_start })
}

/// Slot-aligned decode of a trace produced by [`manchester_encode`].
pub fn manchester_decode(
    trace: &DigitalTrace,
    timing: &SlotTiming,
    tolerance_fraction: f64,
) -> Result<Vec<DecodedSlot>, DecodeError> {
    let origin = trace.start().unwrap_or(SimTime::ZERO);
    let n = ((trace.end() - origin) / timing.slot_period()) as usize;
    let edges = extract_edges(trace);
    (0..n).map(|slot| decode_slot(&edges, timing.slot_start(origin, slot), timing, tolerance_fraction)).collect()
}

#[cfg(feature = "std")]
impl std::error::Error for TimingError {}

#[cfg(feature = "std")]
impl std::error::Error for DecodeError {}

#[cfg(test)]
mod tests {
    use super::*;
    use EdgeDirection::*;
    use LineLevel::*;

    fn t10() -> SlotTiming {
        SlotTiming::new(1_000, 10).unwrap()
    }

    #[test]
    fn timing_from_three_mhz() {
        let clk = ClockDomain::new(3e6, 0.0, 0).unwrap();
        let t = SlotTiming::from_clock(&clk, 10).unwrap();
        assert_eq!(t.slot_period(), 3_333_330);
        assert_eq!(t.half_period(), 1_666_665);
        assert!(SlotTiming::from_clock(&clk, 9).is_err());
    }

    #[test]
    fn single_mask_period() {
        let m = mask_wave(&t10(), 1);
        assert_eq!(m.samples(), &[(SimTime(0), Low), (SimTime(500), High)]);
        assert_eq!(m.end(), SimTime(1_000));
    }

    #[test]
    fn mask_rising_edges_at_midpoints() {
        let m = mask_wave(&t10(), 6);
        let rising: Vec<_> = extract_edges(&m).into_iter().filter(|e| e.direction == Rising).collect();
        assert_eq!(rising.len(), 6);
        for (i, e) in rising.iter().enumerate() {
            assert_eq!(e.at, SimTime(i as u64 * 1_000 + 500));
        }
    }

    #[test]
    fn mask_xor_ones_is_encoding_of_ones() {
        let timing = t10();
        let mask = mask_wave(&timing, 5);
        let enc = manchester_encode(&[true; 5], &timing);
        for k in 0..10u64 {
            let t = SimTime(k * 500 + 1);
            // pull-down enable = data XOR mask; the wire is its complement
            let pull_down = true ^ mask.level_at(t).is_high();
            assert_eq!(!pull_down, enc.level_at(t).is_high());
        }
        assert_eq!(xor_encode(&[true; 5], &timing), enc);
    }

    #[test]
    fn polarity() {
        let timing = t10();
        assert_eq!(manchester_encode(&[true], &timing).samples(), &[(SimTime(0), Low), (SimTime(500), High)]);
        assert_eq!(manchester_encode(&[false], &timing).samples(), &[(SimTime(0), High), (SimTime(500), Low)]);
    }

    #[test]
    fn constant_trace_has_no_edges() {
        let mut t = DigitalTrace::new();
        t.push_change(SimTime(0), High);
        t.set_end(SimTime(10_000));
        assert!(extract_edges(&t).is_empty());
    }

    #[test]
    fn boundary_edges_for_all_bit_pairs() {
        // Enumerate pairs: a boundary edge exists iff the second half of the
        // first bit differs from the first half of the second.
        let timing = t10();
        for a in [false, true] {
            for b in [false, true] {
                let edges = extract_edges(&manchester_encode(&[a, b], &timing));
                let at_boundary = edges.iter().any(|e| e.at == SimTime(1_000));
                assert_eq!(at_boundary, a == b, "pair {a},{b}");
                assert!(edges.iter().any(|e| e.at == SimTime(500)));
                assert!(edges.iter().any(|e| e.at == SimTime(1_500)));
            }
        }
        let edges = extract_edges(&manchester_encode(&[true, false], &timing));
        assert_eq!(
            edges,
            [Edge { at: SimTime(500), direction: Rising }, Edge { at: SimTime(1_500), direction: Falling }]
        );
    }

    #[test]
    fn decode_slot_cases() {
        let timing = t10();
        let exact = [Edge { at: SimTime(500), direction: Rising }];
        assert_eq!(
            decode_slot(&exact, SimTime(0), &timing, DEFAULT_TOLERANCE),
            Ok(DecodedSlot { bit: true, mid_offset: 0 })
        );
        let late = [Edge { at: SimTime(650), direction: Falling }];
        assert_eq!(
            decode_slot(&late, SimTime(0), &timing, DEFAULT_TOLERANCE),
            Ok(DecodedSlot { bit: false, mid_offset: 150 })
        );
        let boundary = [Edge { at: SimTime(0), direction: Falling }, Edge { at: SimTime(1_000), direction: Rising }];
        assert!(decode_slot(&boundary, SimTime(0), &timing, DEFAULT_TOLERANCE).is_err());
        assert!(decode_slot(&[], SimTime(0), &timing, DEFAULT_TOLERANCE).is_err());
    }

    #[test]
    fn nearest_edge_wins() {
        let timing = t10();
        let edges = [Edge { at: SimTime(320), direction: Falling }, Edge { at: SimTime(540), direction: Rising }];
        let d = decode_slot(&edges, SimTime(0), &timing, DEFAULT_TOLERANCE).unwrap();
        assert!(d.bit);
        assert_eq!(d.mid_offset, 40);
    }
}
