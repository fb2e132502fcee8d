//! Devices sharing one wire, driven by the event kernel.
//!
//! Every device clock edge samples the wire, then the new drives of all
//! devices clocked at that instant are committed together, so devices with
//! coincident edges see the same pre-edge level.

use alloc::vec::Vec;
use core::fmt;

use crate::channel::{AnalogChannel, Attachment, ChannelError, ChannelParams, DriveState, LineLevel};
use crate::endpoint::{Device, DeviceConfig, DeviceEvent, SubmitResult};
use crate::frame::Message;
use crate::time::{ClockDomain, ClockError, EventQueue, SimError, SimTime};
use crate::trace::{AnalogTrace, DigitalTrace};

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkError {
    Sim(SimError),
    Channel(ChannelError),
    Clock(ClockError),
    NoSuchNode(usize),
}

impl fmt::Display for NetworkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkError::Sim(e) => write!(f, "{e}"),
            NetworkError::Channel(e) => write!(f, "{e}"),
            NetworkError::Clock(e) => write!(f, "{e}"),
            NetworkError::NoSuchNode(n) => write!(f, "no device {n}"),
        }
    }
}

impl From<SimError> for NetworkError {
    fn from(e: SimError) -> Self {
        NetworkError::Sim(e)
    }
}

impl From<ChannelError> for NetworkError {
    fn from(e: ChannelError) -> Self {
        NetworkError::Channel(e)
    }
}

impl From<ClockError> for NetworkError {
    fn from(e: ClockError) -> Self {
        NetworkError::Clock(e)
    }
}

#[derive(Debug, Clone)]
pub enum Bus {
    Ideal,
    Analog(AnalogChannel),
}

#[derive(Debug, Clone)]
pub struct Node {
    pub device: Device,
    pub clock: ClockDomain,
    pub attachment: Attachment,
    drive: DriveState,
    pending: Option<DriveState>,
    submissions: Vec<(SimTime, SubmitResult)>,
}

impl Node {
    pub fn drive(&self) -> DriveState {
        self.drive
    }

    /// Result of every submission to this node, in order.
    pub fn submissions(&self) -> &[(SimTime, SubmitResult)] {
        &self.submissions
    }
}

#[derive(Debug, Clone)]
enum NetEvent {
    Clock { node: usize, k: u64 },
    Commit,
    Submit { node: usize, message: Message },
    Force { low: bool },
}

#[derive(Debug, Clone)]
struct State {
    nodes: Vec<Node>,
    bus: Bus,
    forced: u32,
    commit_pending: bool,
    trace: DigitalTrace,
    voltages: Option<AnalogTrace>,
    error: Option<NetworkError>,
}

impl State {
    fn counts(&self) -> (usize, usize) {
        let mut near = 0;
        let mut far = 0;
        for n in self.nodes.iter().filter(|n| n.drive.is_low()) {
            match n.attachment {
                Attachment::Near => near += 1,
                Attachment::Far => far += 1,
            }
        }
        // injected faults act at the far end
        (near, far + self.forced as usize)
    }

    fn ideal_level(&self) -> LineLevel {
        let (near, far) = self.counts();
        LineLevel::from_bool(near + far == 0)
    }

    fn advance(&mut self, t: SimTime) {
        if let Bus::Analog(ch) = &mut self.bus {
            if let Err(e) = ch.advance_to(t.as_secs()) {
                self.error.get_or_insert(NetworkError::Channel(e));
            }
            let v = ch.voltage(Attachment::Far);
            if let Some(tr) = self.voltages.as_mut() {
                if tr.samples().last().is_none_or(|&(last, _)| t > last) {
                    tr.push(t, v);
                }
            }
        }
    }

    fn level_at(&self, at: Attachment) -> LineLevel {
        match &self.bus {
            Bus::Ideal => self.ideal_level(),
            Bus::Analog(ch) => ch.level(at),
        }
    }

    fn apply(&mut self, t: SimTime) {
        let (near, far) = self.counts();
        match &mut self.bus {
            Bus::Ideal => {
                let level = self.ideal_level();
                self.trace.push_change(t, level);
            }
            Bus::Analog(ch) => ch.set_switches(near, far),
        }
    }

    fn handle(&mut self, q: &mut EventQueue<NetEvent>, t: SimTime, ev: NetEvent) {
        match ev {
            NetEvent::Clock { node, k } => {
                self.advance(t);
                let at = self.nodes[node].attachment;
                let level = self.level_at(at);
                if let Bus::Analog(_) = self.bus {
                    if at == Attachment::Far {
                        self.trace.push_change(t, self.level_at(Attachment::Far));
                    }
                }
                let n = &mut self.nodes[node];
                let drive = n.device.on_clock(t, level);
                n.pending = Some(drive);
                let next = n.clock.edge_time(k + 1);
                self.schedule(q, next, NetEvent::Clock { node, k: k + 1 });
                if !self.commit_pending {
                    self.commit_pending = true;
                    self.schedule(q, t, NetEvent::Commit);
                }
            }
            NetEvent::Commit => {
                self.commit_pending = false;
                self.advance(t);
                for n in &mut self.nodes {
                    if let Some(d) = n.pending.take() {
                        n.drive = d;
                    }
                }
                self.apply(t);
            }
            NetEvent::Submit { node, message } => {
                let n = &mut self.nodes[node];
                let r = n.device.submit(message, t);
                n.submissions.push((t, r));
            }
            NetEvent::Force { low } => {
                self.advance(t);
                if low {
                    self.forced += 1;
                } else {
                    self.forced = self.forced.saturating_sub(1);
                }
                self.apply(t);
            }
        }
    }

    fn schedule(&mut self, q: &mut EventQueue<NetEvent>, at: SimTime, ev: NetEvent) {
        if let Err(e) = q.schedule(at, ev) {
            self.error.get_or_insert(NetworkError::Sim(e));
        }
    }
}

/// A set of devices on one wire.
#[derive(Debug, Clone)]
pub struct Network {
    queue: EventQueue<NetEvent>,
    state: State,
    started: bool,
}

impl Network {
    pub fn new(bus: Bus) -> Self {
        let mut trace = DigitalTrace::new();
        trace.push(SimTime::ZERO, LineLevel::High);
        Network {
            queue: EventQueue::new(),
            state: State {
                nodes: Vec::new(),
                bus,
                forced: 0,
                commit_pending: false,
                trace,
                voltages: None,
                error: None,
            },
            started: false,
        }
    }

    pub fn ideal() -> Self {
        Self::new(Bus::Ideal)
    }

    pub fn analog(params: ChannelParams) -> Result<Self, NetworkError> {
        Ok(Self::new(Bus::Analog(AnalogChannel::new(params)?)))
    }

    /// Keep the far-end voltage at every sampling instant.
    pub fn record_voltages(&mut self) {
        self.state.voltages.get_or_insert_with(AnalogTrace::new);
    }

    pub fn add_device(&mut self, config: DeviceConfig, attachment: Attachment) -> Result<usize, NetworkError> {
        let clock = config.clock()?;
        let idx = self.state.nodes.len();
        self.state.nodes.push(Node {
            device: Device::new(config),
            clock,
            attachment,
            drive: DriveState::Release,
            pending: None,
            submissions: Vec::new(),
        });
        if self.started {
            let (k, t) = clock.next_edge(self.queue.now());
            self.queue.schedule(t, NetEvent::Clock { node: idx, k })?;
        }
        Ok(idx)
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.state.nodes[idx]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.state.nodes
    }

    pub fn device_mut(&mut self, idx: usize) -> &mut Device {
        &mut self.state.nodes[idx].device
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn bus(&self) -> &Bus {
        &self.state.bus
    }

    /// Wire level changes; for an analog bus, the far-end comparator output.
    pub fn trace(&self) -> &DigitalTrace {
        &self.state.trace
    }

    pub fn voltages(&self) -> Option<&AnalogTrace> {
        self.state.voltages.as_ref()
    }

    pub fn submit_at(&mut self, node: usize, at: SimTime, message: Message) -> Result<(), NetworkError> {
        if node >= self.state.nodes.len() {
            return Err(NetworkError::NoSuchNode(node));
        }
        self.queue.schedule(at, NetEvent::Submit { node, message })?;
        Ok(())
    }

    /// Hold the wire low at the far end over `[start, end)`.
    pub fn force_low(&mut self, start: SimTime, end: SimTime) -> Result<(), NetworkError> {
        self.queue.schedule(start, NetEvent::Force { low: true })?;
        self.queue.schedule(end, NetEvent::Force { low: false })?;
        Ok(())
    }

    fn start(&mut self) -> Result<(), NetworkError> {
        if self.started {
            return Ok(());
        }
        self.started = true;
        for (node, n) in self.state.nodes.iter().enumerate() {
            self.queue.schedule(n.clock.edge_time(0), NetEvent::Clock { node, k: 0 })?;
        }
        Ok(())
    }

    /// Run every event up to and including `deadline`.
    pub fn run_until(&mut self, deadline: SimTime) -> Result<SimTime, NetworkError> {
        self.start()?;
        let state = &mut self.state;
        let end = self.queue.run_until(deadline, |q, t, ev| state.handle(q, t, ev))?;
        if let Some(e) = state.error.take() {
            return Err(e);
        }
        state.trace.set_end(deadline.max(state.trace.end()));
        Ok(end)
    }

    pub fn events(&self, node: usize) -> &[DeviceEvent] {
        self.state.nodes[node].device.events()
    }

    pub fn take_events(&mut self, node: usize) -> Vec<DeviceEvent> {
        self.state.nodes[node].device.take_events()
    }
}

#[cfg(feature = "std")]
impl std::error::Error for NetworkError {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::endpoint::{Outcome, RxEvent};

    fn reports(net: &Network, node: usize) -> Vec<crate::endpoint::TransmissionReport> {
        net.events(node)
            .iter()
            .filter_map(|e| match e {
                DeviceEvent::Tx(r) => Some(r.clone()),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn hp_latency_is_fifteen_slots() {
        let mut net = Network::ideal();
        let a = net.add_device(DeviceConfig::exact_rate(), Attachment::Near).unwrap();
        let b = net.add_device(DeviceConfig::exact_rate(), Attachment::Far).unwrap();
        net.submit_at(a, SimTime::ZERO, Message::Hp(0x81)).unwrap();
        net.run_until(SimTime::from_us(200)).unwrap();
        let r = reports(&net, a);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].outcome, Outcome::Delivered);
        assert_eq!(r[0].latency(), 50_400_000);
        assert!(net
            .events(b)
            .iter()
            .any(|e| matches!(e, DeviceEvent::Rx { event: RxEvent::Received { message: Message::Hp(0x81), .. }, .. })));
    }

    #[test]
    fn analog_bus_delivers() {
        let mut net = Network::analog(ChannelParams::baseline()).unwrap();
        let a = net.add_device(DeviceConfig::default(), Attachment::Near).unwrap();
        net.add_device(DeviceConfig::default(), Attachment::Far).unwrap();
        net.submit_at(a, SimTime::ZERO, Message::lp(&[0xDE, 0xAD]).unwrap()).unwrap();
        net.run_until(SimTime::from_us(200)).unwrap();
        let r = reports(&net, a);
        assert_eq!(r[0].outcome, Outcome::Delivered, "{r:?} {:?} {:?}", net.events(1), &net.trace().samples()[..12]);
    }
}
