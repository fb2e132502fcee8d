use alloc::vec::Vec;

use super::{AckOutcome, Outcome, TransmissionReport, RETRY_LIMIT};
use crate::channel::{DriveState, LineLevel};
use crate::frame::{frame_slots, plan_frame, Message, SyncClass, SYNC_SLOTS};
use crate::time::{ClockDomain, SimTime};
use crate::trace::DigitalTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxState {
    Idle,
    /// Released gap ahead of an HP frame that preempted our own LP frame.
    Gap {
        remaining: u32,
    },
    Driving {
        half: usize,
        elapsed: u32,
    },
    AwaitAck {
        elapsed: u32,
    },
    /// Lost the line; waiting to tell arbitration loss from preemption.
    Withdrawn {
        elapsed: u32,
        half: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubmitResult {
    Accepted,
    Busy,
}

#[derive(Debug, Clone)]
struct Job {
    message: Message,
    submitted_at: SimTime,
    attempts: u32,
}

#[derive(Debug, Clone)]
struct Active {
    job: Job,
    halves: Vec<LineLevel>,
    started_at: SimTime,
    samples: Vec<LineLevel>,
}

/// Index of the rising edge that completes an acknowledge, if any.
///
/// `samples[i]` is the line `i + 1` cycles after the transmitter released it.
/// A low level must be seen at or after `first_low` (so the tail of a final
/// low CRC half does not count) and be followed by a high sample before
/// `window` samples have elapsed.
pub fn ack_from_samples(samples: &[LineLevel], first_low: usize, window: usize) -> Option<usize> {
    let end = samples.len().min(window);
    let low = (first_low..end).find(|&i| samples[i].is_low())?;
    (low + 1..end).find(|&i| samples[i].is_high())
}

/// Acknowledge decision for a recorded bus trace, sampled on `clock`'s edges
/// after the transmitter released the line at `crc_end`.
pub fn tx_ack_check(trace: &DigitalTrace, crc_end: SimTime, clock: &ClockDomain, psc_division: u32) -> AckOutcome {
    let (mut k, _) = clock.next_edge(crc_end);
    let window = (psc_division + psc_division / 2) as usize;
    let mut samples = Vec::with_capacity(window);
    while samples.len() < window {
        let t = clock.edge_time(k);
        k += 1;
        if t <= crc_end {
            continue;
        }
        samples.push(trace.level_at(SimTime(t.as_ps() - 1)));
    }
    match ack_from_samples(&samples, (psc_division / 4) as usize, window) {
        Some(_) => AckOutcome::AckReceived,
        None => AckOutcome::NoAck,
    }
}

/// Frame transmitter with a one-deep queue per priority class.
#[derive(Debug, Clone)]
pub struct Transmitter {
    psc: u32,
    state: TxState,
    active: Option<Active>,
    queued_hp: Option<Job>,
    queued_lp: Option<Job>,
    reports: Vec<TransmissionReport>,
}

impl Transmitter {
    pub fn new(psc_division: u32) -> Self {
        Transmitter {
            psc: psc_division,
            state: TxState::Idle,
            active: None,
            queued_hp: None,
            queued_lp: None,
            reports: Vec::new(),
        }
    }

    pub fn state(&self) -> TxState {
        self.state
    }

    pub fn is_active(&self) -> bool {
        self.active.is_some()
    }

    pub fn active_message(&self) -> Option<&Message> {
        self.active.as_ref().map(|a| &a.job.message)
    }

    fn active_is_lp(&self) -> bool {
        self.active_message().is_some_and(|m| !m.is_hp())
    }

    /// After losing a data bit: the frame class and the winner's bits so far.
    ///
    /// Both sides sent identical bits up to the conflict, and the conflict
    /// can only fall in the first half of a bit where the winner sent a one.
    /// Conflicts inside the sync field return `None`.
    pub fn withdrawn_prefix(&self) -> Option<(SyncClass, Vec<bool>)> {
        let TxState::Withdrawn { half, .. } = self.state else { return None };
        let active = self.active.as_ref()?;
        let sync = 2 * SYNC_SLOTS;
        if half < sync || !(half - sync).is_multiple_of(2) {
            return None;
        }
        let plan = plan_frame(&active.job.message);
        let mut bits = plan.coded_bits();
        bits.truncate((half - sync) / 2);
        bits.push(true);
        Some((plan.sync_class(), bits))
    }

    /// Next job to start, HP first: the message and its retry count.
    pub fn pending(&self) -> Option<(&Message, u32)> {
        self.queued_hp.as_ref().or(self.queued_lp.as_ref()).map(|j| (&j.message, j.attempts))
    }

    pub fn take_reports(&mut self) -> Vec<TransmissionReport> {
        core::mem::take(&mut self.reports)
    }

    pub fn submit(&mut self, message: Message, now: SimTime) -> SubmitResult {
        let job = Job { message, submitted_at: now, attempts: 0 };
        if !job.message.is_hp() {
            if self.active_is_lp() || self.queued_lp.is_some() {
                return SubmitResult::Busy;
            }
            self.queued_lp = Some(job);
            return SubmitResult::Accepted;
        }
        if self.queued_hp.is_some() || self.active_message().is_some_and(|m| m.is_hp()) {
            return SubmitResult::Busy;
        }
        if self.active_is_lp() && matches!(self.state, TxState::Driving { .. }) {
            self.preempt(now);
            self.begin(job, now);
            self.state = TxState::Gap { remaining: self.psc / 2 };
        } else {
            self.queued_hp = Some(job);
        }
        SubmitResult::Accepted
    }

    /// A remote HP frame took the line from our LP frame; true if it applied.
    pub fn preempted_by_remote(&mut self, now: SimTime) -> bool {
        if !self.active_is_lp() || !matches!(self.state, TxState::Driving { .. } | TxState::Withdrawn { .. }) {
            return false;
        }
        self.preempt(now);
        self.state = TxState::Idle;
        true
    }

    fn preempt(&mut self, now: SimTime) {
        if let Some(active) = self.active.take() {
            self.report(&active, now, AckOutcome::NoAck, Outcome::Preempted);
            self.queued_lp = Some(active.job);
        }
    }

    fn begin(&mut self, job: Job, now: SimTime) {
        let halves = plan_frame(&job.message).halves();
        self.active = Some(Active { job, halves, started_at: now, samples: Vec::new() });
    }

    /// Start the next queued job on this edge; returns the first drive level.
    pub fn start_next(&mut self, now: SimTime) -> DriveState {
        let Some(job) = self.queued_hp.take().or_else(|| self.queued_lp.take()) else {
            return DriveState::Release;
        };
        self.begin(job, now);
        self.state = TxState::Driving { half: 0, elapsed: 0 };
        self.current_drive()
    }

    fn current_drive(&self) -> DriveState {
        match (self.state, &self.active) {
            (TxState::Driving { half, .. }, Some(a)) => DriveState::for_level(a.halves[half]),
            _ => DriveState::Release,
        }
    }

    /// One clock cycle with the sampled bus level.
    pub fn step(&mut self, now: SimTime, bus: LineLevel) -> DriveState {
        let half_cycles = self.psc / 2;
        match self.state {
            TxState::Idle => {}
            TxState::Gap { remaining } => {
                if remaining <= 1 {
                    if let Some(a) = self.active.as_mut() {
                        a.started_at = now;
                    }
                    self.state = TxState::Driving { half: 0, elapsed: 0 };
                } else {
                    self.state = TxState::Gap { remaining: remaining - 1 };
                }
            }
            TxState::Driving { half, elapsed } => {
                let elapsed = elapsed + 1;
                let Some(active) = self.active.as_ref() else {
                    self.state = TxState::Idle;
                    return DriveState::Release;
                };
                if elapsed < half_cycles {
                    self.state = TxState::Driving { half, elapsed };
                } else if active.halves[half].is_high() && bus.is_low() {
                    self.state = TxState::Withdrawn { elapsed: 0, half };
                } else if half + 1 == active.halves.len() {
                    self.state = TxState::AwaitAck { elapsed: 0 };
                } else {
                    self.state = TxState::Driving { half: half + 1, elapsed: 0 };
                }
            }
            TxState::AwaitAck { elapsed } => self.await_ack(now, bus, elapsed + 1),
            TxState::Withdrawn { elapsed, half } => {
                let elapsed = elapsed + 1;
                if elapsed >= 2 * self.psc {
                    self.lose_arbitration(now);
                } else {
                    self.state = TxState::Withdrawn { elapsed, half };
                }
            }
        }
        self.current_drive()
    }

    fn await_ack(&mut self, now: SimTime, bus: LineLevel, elapsed: u32) {
        let window = (self.psc + self.psc / 2) as usize;
        let first_low = (self.psc / 4) as usize;
        let Some(active) = self.active.as_mut() else {
            self.state = TxState::Idle;
            return;
        };
        active.samples.push(bus);
        let acked = ack_from_samples(&active.samples, first_low, window).is_some();
        if (acked && elapsed >= self.psc) || elapsed as usize >= window {
            let active = self.active.take().unwrap();
            let (ack, outcome) = if acked {
                (AckOutcome::AckReceived, Outcome::Delivered)
            } else {
                (AckOutcome::NoAck, Outcome::CrcRejected)
            };
            self.report(&active, now, ack, outcome);
            self.state = TxState::Idle;
        } else {
            self.state = TxState::AwaitAck { elapsed };
        }
    }

    fn lose_arbitration(&mut self, now: SimTime) {
        self.state = TxState::Idle;
        let Some(active) = self.active.take() else { return };
        self.report(&active, now, AckOutcome::NoAck, Outcome::ArbitrationLost);
        let mut job = active.job;
        job.attempts += 1;
        if job.attempts < RETRY_LIMIT {
            if job.message.is_hp() {
                self.queued_hp = Some(job);
            } else {
                self.queued_lp = Some(job);
            }
        }
    }

    fn report(&mut self, active: &Active, now: SimTime, ack: AckOutcome, outcome: Outcome) {
        let bits_total = frame_slots(&active.job.message) as u32;
        self.reports.push(TransmissionReport {
            message: active.job.message.clone(),
            submitted_at: active.job.submitted_at,
            start: active.started_at,
            end: now,
            bits_total,
            bits_payload: 8 * active.job.message.payload().len() as u32,
            bits_received: if ack == AckOutcome::AckReceived { bits_total } else { 0 },
            ack,
            outcome,
            attempt: active.job.attempts,
        });
    }
}
