//! Point-to-point message streams: one transmitter, one receiver, one wire.

use anyhow::{Context, Result};
use linkbo_core::channel::Attachment;
use linkbo_core::endpoint::{DeviceConfig, DeviceEvent, Outcome, RxEvent, TransmissionReport};
use linkbo_core::frame::{frame_slots, Message};
use linkbo_core::network::Network;
use linkbo_core::{ChannelParams, SimTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BusSpec {
    Ideal,
    Analog(ChannelParams),
}

impl BusSpec {
    pub fn network(&self) -> Result<Network> {
        Ok(match self {
            BusSpec::Ideal => Network::ideal(),
            BusSpec::Analog(p) => Network::analog(*p).context("building analog channel")?,
        })
    }
}

/// Which frames a workload carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageClass {
    Hp,
    Lp,
}

impl MessageClass {
    pub fn name(self) -> &'static str {
        match self {
            MessageClass::Hp => "hp",
            MessageClass::Lp => "lp",
        }
    }
}

/// `count` random messages of one class; LP payloads are `size` bytes.
pub fn workload(class: MessageClass, size: usize, count: usize, seed: u64) -> Vec<Message> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| match class {
            MessageClass::Hp => Message::Hp(rng.gen()),
            MessageClass::Lp => {
                let payload: Vec<u8> = (0..size.clamp(1, 7)).map(|_| rng.gen()).collect();
                Message::lp(&payload).expect("size clamped to 1..=7")
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct StreamSpec {
    pub bus: BusSpec,
    pub tx: DeviceConfig,
    pub rx: DeviceConfig,
    /// Give up after the first message that is not delivered.
    pub stop_on_failure: bool,
}

impl StreamSpec {
    pub fn new(bus: BusSpec, tx: DeviceConfig, rx: DeviceConfig) -> Self {
        StreamSpec { bus, tx, rx, stop_on_failure: false }
    }
}

#[derive(Debug, Clone, Default)]
pub struct StreamOutcome {
    /// Final report for every message, in submission order.
    pub reports: Vec<TransmissionReport>,
    /// Receiver CRC verdicts.
    pub rx_ok: usize,
    pub rx_crc_fail: usize,
    pub elapsed_ps: u64,
}

impl StreamOutcome {
    pub fn delivered(&self) -> usize {
        self.reports.iter().filter(|r| r.outcome == Outcome::Delivered).count()
    }

    pub fn all_delivered(&self, expected: usize) -> bool {
        self.reports.len() == expected && self.delivered() == expected
    }

    pub fn ack_rate(&self) -> f64 {
        if self.reports.is_empty() {
            0.0
        } else {
            self.delivered() as f64 / self.reports.len() as f64
        }
    }

    /// Received bits per unit of transmission time, in kbit/s.
    pub fn throughput_kbps(&self) -> f64 {
        let bits: u64 = self.reports.iter().map(|r| r.bits_received as u64).sum();
        let time: u64 = self.reports.iter().map(|r| r.duration()).sum();
        if time == 0 {
            0.0
        } else {
            bits as f64 / (time as f64 * 1e-12) / 1e3
        }
    }

    /// Frame bits per unit of transmission time, in kbit/s.
    pub fn bit_rate_kbps(&self) -> f64 {
        let bits: u64 = self.reports.iter().map(|r| r.bits_total as u64).sum();
        let time: u64 = self.reports.iter().map(|r| r.duration()).sum();
        if time == 0 {
            0.0
        } else {
            bits as f64 / (time as f64 * 1e-12) / 1e3
        }
    }

    /// Mean submit-to-ACK latency of delivered messages, in µs.
    pub fn mean_latency_us(&self) -> Option<f64> {
        let d: Vec<f64> =
            self.reports.iter().filter(|r| r.outcome == Outcome::Delivered).map(|r| r.latency() as f64 / 1e6).collect();
        (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
    }
}

fn slot_ps(config: &DeviceConfig) -> Result<u64> {
    let clock = config.clock().map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(clock.period_ps() * config.psc_division as u64)
}

/// Send `messages` one after another from a near-end transmitter to a
/// far-end receiver. Each message is submitted once the previous one has
/// finished (including arbitration retries) and the bus has idled.
pub fn run_stream(spec: &StreamSpec, messages: &[Message]) -> Result<StreamOutcome> {
    let mut net = spec.bus.network()?;
    let tx = net.add_device(spec.tx.clone(), Attachment::Near)?;
    let rx = net.add_device(spec.rx.clone(), Attachment::Far)?;
    let slot = slot_ps(&spec.tx)?.max(slot_ps(&spec.rx)?);
    let mut out = StreamOutcome::default();
    let mut t = SimTime(4 * slot);
    for msg in messages {
        net.submit_at(tx, t, msg.clone())?;
        let limit = t + 40 * (frame_slots(msg) as u64 + 8) * slot;
        let mut now = t;
        loop {
            now = now + slot;
            net.run_until(now)?;
            let d = net.node(tx).device.transmitter();
            if (!d.is_active() && d.pending().is_none()) || now >= limit {
                break;
            }
        }
        let mut last = None;
        for e in net.take_events(tx) {
            if let DeviceEvent::Tx(r) = e {
                // retries follow earlier attempts, so the last report is final
                last = Some(r);
            }
        }
        for e in net.take_events(rx) {
            match e {
                DeviceEvent::Rx { event: RxEvent::Received { .. }, .. } => out.rx_ok += 1,
                DeviceEvent::Rx { event: RxEvent::CrcRejected { .. }, .. } => out.rx_crc_fail += 1,
                _ => {}
            }
        }
        let failed = last.as_ref().is_none_or(|r| r.outcome != Outcome::Delivered);
        if let Some(r) = last {
            out.reports.push(r);
        }
        // let the wire settle before the next frame
        t = now + 3 * slot;
        out.elapsed_ps = t.as_ps();
        if failed && spec.stop_on_failure {
            break;
        }
    }
    Ok(out)
}
