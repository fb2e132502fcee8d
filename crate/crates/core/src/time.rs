//! Discrete-event time base: integer picosecond time, clock domains with a
//! rational period, and a deterministic event queue.

use alloc::collections::BTreeMap;
use core::fmt;
use core::ops::{Add, Sub};

/// Picoseconds since simulation start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_ps(ps: u64) -> Self {
        SimTime(ps)
    }

    pub const fn from_ns(ns: u64) -> Self {
        SimTime(ns * 1_000)
    }

    pub const fn from_us(us: u64) -> Self {
        SimTime(us * 1_000_000)
    }

    pub const fn as_ps(self) -> u64 {
        self.0
    }

    pub fn as_us(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / 1e12
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl Add<u64> for SimTime {
    type Output = SimTime;
    fn add(self, ps: u64) -> SimTime {
        SimTime(self.0 + ps)
    }
}

impl Sub for SimTime {
    type Output = u64;
    fn sub(self, other: SimTime) -> u64 {
        self.0 - other.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ps", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClockError {
    NonPositiveFrequency,
    ZeroPeriod,
}

impl fmt::Display for ClockError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClockError::NonPositiveFrequency => f.write_str("effective clock frequency must be positive"),
            ClockError::ZeroPeriod => f.write_str("effective clock period rounds to zero picoseconds"),
        }
    }
}

const PS_PER_SEC_MILLI: u128 = 1_000_000_000_000_000; // 1e12 ps/s * 1e3 mHz/Hz

/// A clock with a nominal frequency, a fractional frequency offset and a phase.
///
/// The period is kept as the rational `num / den` picoseconds; edge `k` sits
/// at `phase + round(k * num / den)`, so edge times never accumulate drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockDomain {
    pub nominal_frequency: f64,
    pub offset_fraction: f64,
    pub phase_offset: u64,
    num: u128,
    den: u128,
}

impl ClockDomain {
    pub fn new(nominal_frequency: f64, offset_fraction: f64, phase_offset: u64) -> Result<Self, ClockError> {
        let eff = nominal_frequency * (1.0 + offset_fraction);
        if !(eff.is_finite() && eff > 0.0) {
            return Err(ClockError::NonPositiveFrequency);
        }
        let den = libm::round(eff * 1e3) as u128;
        if den == 0 {
            return Err(ClockError::NonPositiveFrequency);
        }
        let clock = ClockDomain { nominal_frequency, offset_fraction, phase_offset, num: PS_PER_SEC_MILLI, den };
        if clock.period_ps() == 0 {
            return Err(ClockError::ZeroPeriod);
        }
        Ok(clock)
    }

    /// A clock defined directly by an integer period (exact-timing mode).
    pub fn from_period_ps(period_ps: u64, phase_offset: u64) -> Result<Self, ClockError> {
        if period_ps == 0 {
            return Err(ClockError::ZeroPeriod);
        }
        Ok(ClockDomain {
            nominal_frequency: 1e12 / period_ps as f64,
            offset_fraction: 0.0,
            phase_offset,
            num: period_ps as u128,
            den: 1,
        })
    }

    /// Effective frequency in Hz.
    pub fn frequency(&self) -> f64 {
        1e12 * self.den as f64 / self.num as f64
    }

    /// Effective period rounded to the nearest picosecond.
    pub fn period_ps(&self) -> u64 {
        ((self.num + self.den / 2) / self.den) as u64
    }

    /// Exact period as a float, for diagnostics.
    pub fn period_exact_ps(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Time of edge number `k` (edge 0 sits at the phase offset).
    pub fn edge_time(&self, k: u64) -> SimTime {
        let offset = (k as u128 * self.num + self.den / 2) / self.den;
        SimTime(self.phase_offset + offset as u64)
    }

    /// Index and time of the first rising edge strictly after `after`.
    pub fn next_edge(&self, after: SimTime) -> (u64, SimTime) {
        if after.0 < self.phase_offset {
            return (0, SimTime(self.phase_offset));
        }
        let rel = (after.0 - self.phase_offset) as u128;
        let mut k = (rel * self.den / self.num) as u64;
        loop {
            let t = self.edge_time(k);
            if t > after {
                return (k, t);
            }
            k += 1;
        }
    }

    pub fn next_edge_time(&self, after: SimTime) -> SimTime {
        self.next_edge(after).1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    /// An event was scheduled before the current simulation time.
    ScheduledInPast { at: SimTime, now: SimTime },
    /// More than the configured number of events dispatched at one instant.
    Livelock { at: SimTime, count: usize },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::ScheduledInPast { at, now } => write!(f, "event scheduled at {at} but time is already {now}"),
            SimError::Livelock { at, count } => {
                write!(f, "livelock: {count} events dispatched at {at} without time advancing")
            }
        }
    }
}

/// Opaque handle for cancelling a scheduled event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventHandle {
    at: SimTime,
    seq: u64,
}

pub const DEFAULT_SAME_TIME_CAP: usize = 1_000_000;

/// Events ordered by `(time, insertion sequence)`.
#[derive(Debug, Clone)]
pub struct EventQueue<E> {
    events: BTreeMap<(SimTime, u64), E>,
    now: SimTime,
    next_seq: u64,
    same_time_cap: usize,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue { events: BTreeMap::new(), now: SimTime::ZERO, next_seq: 0, same_time_cap: DEFAULT_SAME_TIME_CAP }
    }

    pub fn with_same_time_cap(mut self, cap: usize) -> Self {
        self.same_time_cap = cap;
        self
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn schedule(&mut self, at: SimTime, event: E) -> Result<EventHandle, SimError> {
        if at < self.now {
            return Err(SimError::ScheduledInPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.events.insert((at, seq), event);
        Ok(EventHandle { at, seq })
    }

    /// Returns the event if it was still pending.
    pub fn cancel(&mut self, handle: EventHandle) -> Option<E> {
        self.events.remove(&(handle.at, handle.seq))
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.events.keys().next().map(|(t, _)| *t)
    }

    /// Dispatch every event with time `<= deadline` in `(time, seq)` order.
    ///
    /// Returns the time of the last dispatched event, or `deadline` when
    /// nothing fired. Simulation time is left at that returned value.
    pub fn run_until<F>(&mut self, deadline: SimTime, mut handler: F) -> Result<SimTime, SimError>
    where
        F: FnMut(&mut EventQueue<E>, SimTime, E),
    {
        let mut last: Option<SimTime> = None;
        let mut same_count = 0usize;
        loop {
            let key = match self.events.keys().next() {
                Some(&key) if key.0 <= deadline => key,
                _ => break,
            };
            let event = self.events.remove(&key).expect("key just observed");
            let at = key.0;
            if last == Some(at) {
                same_count += 1;
                if same_count > self.same_time_cap {
                    return Err(SimError::Livelock { at, count: same_count });
                }
            } else {
                same_count = 1;
            }
            last = Some(at);
            self.now = at;
            handler(self, at, event);
        }
        let end = last.unwrap_or(deadline);
        if end > self.now {
            self.now = end;
        }
        Ok(end)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ClockError {}

#[cfg(feature = "std")]
impl std::error::Error for SimError {}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn schedule_at_now_fires_first() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(3), "late").unwrap();
        q.schedule(SimTime(0), "first").unwrap();
        let mut seen = Vec::new();
        q.run_until(SimTime(10), |_, _, e| seen.push(e)).unwrap();
        assert_eq!(seen, ["first", "late"]);
    }

    #[test]
    fn same_time_in_insertion_order() {
        let mut q = EventQueue::new();
        for i in 0..5 {
            q.schedule(SimTime(4), i).unwrap();
        }
        let mut seen = Vec::new();
        q.run_until(SimTime(4), |_, _, e| seen.push(e)).unwrap();
        assert_eq!(seen, [0, 1, 2, 3, 4]);
    }

    #[test]
    fn cancelled_event_never_fires() {
        let mut q = EventQueue::new();
        let h = q.schedule(SimTime(5), ()).unwrap();
        assert!(q.cancel(h).is_some());
        let mut fired = 0;
        let end = q.run_until(SimTime(10), |_, _, _| fired += 1).unwrap();
        assert_eq!(fired, 0);
        assert_eq!(end, SimTime(10));
    }

    #[test]
    fn scheduling_in_past_is_rejected() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(7), ()).unwrap();
        q.run_until(SimTime(10), |_, _, _| {}).unwrap();
        assert!(matches!(q.schedule(SimTime(6), ()), Err(SimError::ScheduledInPast { .. })));
    }

    #[test]
    fn run_until_reports_last_event_time() {
        let mut q: EventQueue<()> = EventQueue::new();
        assert_eq!(q.run_until(SimTime(10), |_, _, _| {}).unwrap(), SimTime(10));
        let mut q = EventQueue::new();
        q.schedule(SimTime(7), ()).unwrap();
        assert_eq!(q.run_until(SimTime(10), |_, _, _| {}).unwrap(), SimTime(7));
    }

    #[test]
    fn self_rescheduling_handler_is_livelock() {
        let mut q = EventQueue::new().with_same_time_cap(1000);
        q.schedule(SimTime(2), ()).unwrap();
        let err = q
            .run_until(SimTime(10), |q, t, _| {
                q.schedule(t, ()).unwrap();
            })
            .unwrap_err();
        assert!(matches!(err, SimError::Livelock { at: SimTime(2), .. }));
    }

    #[test]
    fn three_mhz_edges() {
        let clk = ClockDomain::new(3e6, 0.0, 0).unwrap();
        assert_eq!(clk.next_edge_time(SimTime(0)), SimTime(333_333));
        assert_eq!(clk.period_ps(), 333_333);
        // exactly on an edge -> the following edge
        let e1 = clk.next_edge_time(SimTime(0));
        assert_eq!(clk.next_edge_time(e1), SimTime(666_667));
    }

    #[test]
    fn offset_clock_period() {
        let clk = ClockDomain::new(3e6, 0.05, 0).unwrap();
        assert_eq!(clk.period_ps(), 317_460);
        let slow = ClockDomain::new(3e6, -0.05, 0).unwrap();
        assert_eq!(slow.period_ps(), 350_877);
    }

    #[test]
    fn phase_offset_shifts_edges() {
        let clk = ClockDomain::new(3e6, 0.0, 1_000).unwrap();
        assert_eq!(clk.next_edge_time(SimTime(0)), SimTime(1_000));
        assert_eq!(clk.next_edge_time(SimTime(1_000)), SimTime(334_333));
    }

    #[test]
    fn no_cumulative_drift() {
        let clk = ClockDomain::new(3e6, 0.0, 0).unwrap();
        // one second of edges lands exactly on 1e12 ps
        assert_eq!(clk.edge_time(3_000_000), SimTime(1_000_000_000_000));
    }

    #[test]
    fn invalid_clock_rejected() {
        assert!(ClockDomain::new(0.0, 0.0, 0).is_err());
        assert!(ClockDomain::new(3e6, -1.0, 0).is_err());
        assert!(ClockDomain::from_period_ps(0, 0).is_err());
    }
}
