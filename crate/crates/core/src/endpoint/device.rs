use alloc::vec::Vec;

use super::{
    DeviceConfig, LowBusDetector, Outcome, Receiver, RxEvent, RxState, SubmitResult, TransmissionReport, Transmitter,
    TxState, IDLE_SLOTS_BEFORE_START,
};
use crate::channel::{DriveState, LineLevel};
use crate::frame::{Message, SyncClass};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Idle,
    Transmitting,
    Receiving,
    InterruptedRx,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeviceEvent {
    Tx(TransmissionReport),
    Rx { at: SimTime, event: RxEvent },
}

/// Transmitter, receiver and low-bus detector behind one open-drain pin.
#[derive(Debug, Clone)]
pub struct Device {
    config: DeviceConfig,
    tx: Transmitter,
    rx: Receiver,
    lbdet: LowBusDetector,
    mode: Mode,
    interrupted: bool,
    /// Receiver parked after a lost arbitration until the line goes idle.
    quiet: bool,
    idle_run: u32,
    events: Vec<DeviceEvent>,
}

impl Device {
    pub fn new(config: DeviceConfig) -> Self {
        let psc = config.psc_division;
        Device {
            tx: Transmitter::new(psc),
            rx: Receiver::new(psc, config.decode_tolerance, config.resync, config.address),
            lbdet: LowBusDetector::new(psc, config.lbdet_threshold),
            mode: Mode::Idle,
            interrupted: false,
            quiet: false,
            idle_run: IDLE_SLOTS_BEFORE_START * psc,
            events: Vec::new(),
            config,
        }
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn receiver(&self) -> &Receiver {
        &self.rx
    }

    pub fn transmitter(&self) -> &Transmitter {
        &self.tx
    }

    pub fn events(&self) -> &[DeviceEvent] {
        &self.events
    }

    pub fn take_events(&mut self) -> Vec<DeviceEvent> {
        core::mem::take(&mut self.events)
    }

    pub fn submit(&mut self, message: Message, now: SimTime) -> SubmitResult {
        let r = self.tx.submit(message, now);
        self.collect_reports();
        r
    }

    fn collect_reports(&mut self) {
        for r in self.tx.take_reports() {
            if r.outcome == Outcome::ArbitrationLost && self.rx.is_idle() {
                self.quiet = true;
            }
            self.events.push(DeviceEvent::Tx(r));
        }
    }

    fn idle_long_enough(&self) -> bool {
        self.idle_run >= IDLE_SLOTS_BEFORE_START * self.config.psc_division
    }

    /// One rising edge of the device clock: sample `bus`, return the new drive.
    pub fn on_clock(&mut self, now: SimTime, bus: LineLevel) -> DriveState {
        let flag = self.lbdet.step_rising(bus);
        self.idle_run = if bus.is_high() { self.idle_run.saturating_add(1) } else { 0 };
        let mut tx_drive = DriveState::Release;
        let mut rx_drive = DriveState::Release;

        let withdrawn = matches!(self.tx.state(), TxState::Withdrawn { .. });
        if self.tx.is_active() && flag && self.tx.preempted_by_remote(now) {
            self.rx.interrupt();
            self.rx.observe(bus);
            self.interrupted = true;
            self.quiet = false;
        } else if self.tx.is_active() && !withdrawn {
            tx_drive = self.tx.step(now, bus);
            if let Some((class, bits)) = self.tx.withdrawn_prefix() {
                // keep receiving the winner's frame from the conflict bit on
                self.rx.resume(class, self.config.psc_division, bits);
            }
            self.rx.observe(bus);
        } else if flag && self.rx.accepts_interrupt() {
            self.rx.interrupt();
            self.rx.observe(bus);
            self.interrupted = true;
            self.quiet = false;
        } else if self.quiet {
            self.rx.observe(bus);
            if self.idle_long_enough() {
                self.quiet = false;
            }
        } else {
            let (d, ev) = self.rx.step(bus);
            rx_drive = d;
            if let Some(event) = ev {
                if matches!(event, RxEvent::Failed { .. }) {
                    self.quiet = true;
                }
                self.events.push(DeviceEvent::Rx { at: now, event });
            }
        }
        if withdrawn {
            tx_drive = self.tx.step(now, bus);
        }
        self.collect_reports();

        if !self.tx.is_active() && self.may_start(bus) {
            if !self.rx.is_idle() {
                self.rx.abort();
            }
            self.interrupted = false;
            tx_drive = self.tx.start_next(now);
        }

        if self.rx.is_idle() {
            self.interrupted = false;
        }
        self.mode = if self.tx.is_active() {
            Mode::Transmitting
        } else if self.rx.is_idle() {
            Mode::Idle
        } else if self.interrupted {
            Mode::InterruptedRx
        } else {
            Mode::Receiving
        };
        if tx_drive.is_low() || rx_drive.is_low() {
            DriveState::DriveLow
        } else {
            DriveState::Release
        }
    }

    fn may_start(&self, bus: LineLevel) -> bool {
        let Some((msg, attempts)) = self.tx.pending() else {
            return false;
        };
        if msg.is_hp() && attempts == 0 {
            // a fresh HP frame may cut into an LP frame but waits out a sync
            // measurement, another HP frame and any ACK slot
            return match self.rx.state() {
                RxState::Idle => true,
                RxState::Body => self.rx.class_in_progress() == Some(SyncClass::Lp),
                _ => false,
            };
        }
        self.rx.is_idle() && !self.quiet && bus.is_high() && self.idle_long_enough()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::endpoint::Outcome;

    /// Two devices on an ideal wire with identical clocks.
    fn pair() -> (Device, Device) {
        (Device::new(DeviceConfig::default()), Device::new(DeviceConfig::default()))
    }

    fn run(a: &mut Device, b: &mut Device, cycles: u64) {
        let mut bus = LineLevel::High;
        for c in 0..cycles {
            let t = SimTime(c);
            let da = a.on_clock(t, bus);
            let db = b.on_clock(t, bus);
            bus = LineLevel::from_bool(!(da.is_low() || db.is_low()));
        }
    }

    #[test]
    fn hp_delivered_between_two_devices() {
        let (mut a, mut b) = pair();
        a.submit(Message::Hp(0x3C), SimTime(0));
        run(&mut a, &mut b, 400);
        let tx: Vec<_> = a
            .events()
            .iter()
            .filter_map(|e| match e {
                DeviceEvent::Tx(r) => Some(r.clone()),
                _ => None,
            })
            .collect();
        assert_eq!(tx.len(), 1);
        assert_eq!(tx[0].outcome, Outcome::Delivered);
        assert!(b.events().iter().any(|e| matches!(
            e,
            DeviceEvent::Rx { event: RxEvent::Received { message: Message::Hp(0x3C), acked: true }, .. }
        )));
        assert_eq!(a.mode(), Mode::Idle);
        assert_eq!(b.mode(), Mode::Idle);
    }

    #[test]
    fn lp_waits_for_idle_line() {
        let (mut a, mut b) = pair();
        a.submit(Message::lp(&[1, 2, 3]).unwrap(), SimTime(0));
        b.submit(Message::lp(&[9]).unwrap(), SimTime(0));
        run(&mut a, &mut b, 3_000);
        let delivered = |d: &Device| {
            d.events()
                .iter()
                .filter(|e| {
                    matches!(e,
            DeviceEvent::Tx(r) if r.outcome == Outcome::Delivered)
                })
                .count()
        };
        assert_eq!(delivered(&a) + delivered(&b), 2);
    }
}
