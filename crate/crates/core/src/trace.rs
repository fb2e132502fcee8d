//! Waveforms of the shared wire.

use alloc::vec::Vec;

use crate::channel::LineLevel;
use crate::time::SimTime;

/// A waveform as `(time, value)` entries with strictly increasing times.
///
/// Digital traces (`LineTrace<LineLevel>`) are piecewise-constant: each entry
/// holds until the next one, the last until `end`. Analog traces
/// (`LineTrace<f64>`, volts) are plain samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LineTrace<V> {
    samples: Vec<(SimTime, V)>,
    end: SimTime,
}

impl<V: Copy + PartialEq> LineTrace<V> {
    pub fn new() -> Self {
        LineTrace { samples: Vec::new(), end: SimTime::ZERO }
    }

    /// Append a value; times must be strictly increasing.
    ///
    /// # Panics
    /// If `t` is not after the last entry.
    pub fn push(&mut self, t: SimTime, value: V) {
        if let Some(&(last, _)) = self.samples.last() {
            assert!(t > last, "trace times must be strictly increasing");
        }
        self.samples.push((t, value));
        if t > self.end {
            self.end = t;
        }
    }

    /// Append only if the value differs from the current one (digital traces).
    pub fn push_change(&mut self, t: SimTime, value: V) {
        match self.samples.last_mut() {
            Some(last) if last.1 == value => {}
            Some(last) if last.0 == t => {
                last.1 = value;
                let n = self.samples.len();
                if n >= 2 && self.samples[n - 2].1 == value {
                    self.samples.pop();
                }
            }
            _ => self.push(t, value),
        }
        if t > self.end {
            self.end = t;
        }
    }

    pub fn set_end(&mut self, end: SimTime) {
        if let Some(&(last, _)) = self.samples.last() {
            assert!(end >= last, "trace end precedes its last entry");
        }
        self.end = end;
    }

    pub fn end(&self) -> SimTime {
        self.end
    }

    pub fn samples(&self) -> &[(SimTime, V)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start(&self) -> Option<SimTime> {
        self.samples.first().map(|s| s.0)
    }

    /// Value in force at `t` (the last entry at or before `t`).
    pub fn value_at(&self, t: SimTime) -> Option<V> {
        let idx = self.samples.partition_point(|&(st, _)| st <= t);
        if idx == 0 {
            None
        } else {
            Some(self.samples[idx - 1].1)
        }
    }
}

impl<V: Copy + PartialEq> Default for LineTrace<V> {
    fn default() -> Self {
        Self::new()
    }
}

impl<V: Copy + PartialEq> FromIterator<(SimTime, V)> for LineTrace<V> {
    fn from_iter<I: IntoIterator<Item = (SimTime, V)>>(iter: I) -> Self {
        let mut trace = LineTrace::new();
        for (t, v) in iter {
            trace.push(t, v);
        }
        trace
    }
}

pub type DigitalTrace = LineTrace<LineLevel>;
pub type AnalogTrace = LineTrace<f64>;

impl LineTrace<LineLevel> {
    /// Level at `t`; the idle bus is High before the first entry.
    pub fn level_at(&self, t: SimTime) -> LineLevel {
        self.value_at(t).unwrap_or(LineLevel::High)
    }

    /// Shift every entry (and the end) later by `by` picoseconds.
    pub fn shifted(&self, by: u64) -> Self {
        LineTrace { samples: self.samples.iter().map(|&(t, v)| (t + by, v)).collect(), end: self.end + by }
    }
}
