//! Builds a network from a [`ScenarioConfig`] and drives it with the event
//! engine.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{EngineError, EventQueue, RngStreams, SimTime};
use crate::hello::{hello_copy_offsets, plan_all_channel_broadcast, HelloDelta, HelloPacket, NeighborTable};
use crate::radio::{
    airtime, in_range, Arrival, ChannelId, DataPacket, IfaceRef, Interface, NodeId, Packet, ReceptionOutcome,
    Transmission,
};
use crate::scenario::config::ScenarioConfig;
use crate::stats::{CounterSet, NodeSummary, RunSummary};
use crate::trace::{DropReason, PktType, TraceOp, TraceRecord, TraceWriter};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("writing trace: {0}")]
    Trace(#[source] io::Error),
    #[error("opening trace {path}: {source}")]
    TraceOpen {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// What a scheduled transmission will carry. The Hello's channel is picked
/// when it actually goes out, from the interface's tuning at that moment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outgoing {
    Hello {
        seq: u64,
        fired_at: SimTime,
    },
    Data {
        seq: u64,
        channel: ChannelId,
        size_bytes: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimEvent {
    HelloTimer(NodeId),
    Transmit { iface: IfaceRef, outgoing: Outgoing },
    DeliverStart { arrival: u64 },
    DeliverEnd { arrival: u64 },
    NeighborExpiry { node: NodeId, neighbor: NodeId },
    Broadcast { node: NodeId, payload_bytes: u32 },
}

struct NodeState {
    ifaces: Vec<Interface>,
    counters: Vec<CounterSet>,
    table: NeighborTable,
    rng: ChaCha8Rng,
    next_hello_seq: u64,
    next_data_seq: u64,
}

struct InFlight {
    rx: IfaceRef,
    tx: Transmission,
}

/// A running scenario.
pub struct Simulation {
    cfg: ScenarioConfig,
    queue: EventQueue<SimEvent>,
    nodes: Vec<NodeState>,
    reach: Vec<Vec<NodeId>>,
    in_flight: HashMap<u64, InFlight>,
    next_arrival: u64,
    trace: TraceWriter<Box<dyn Write>>,
    hello_airtime: SimTime,
    hello_firings: u64,
    started: Instant,
}

impl Simulation {
    /// Constructs nodes and interfaces, applies start-up tunings and
    /// schedules the first timers. Tune records for every interface are
    /// written at t = 0.
    pub fn new(cfg: ScenarioConfig, sink: Box<dyn Write>) -> Result<Self, SimError> {
        let started = Instant::now();
        let positions = cfg.node_positions();
        let reach = cfg
            .node_ids()
            .map(|a| {
                cfg.node_ids()
                    .filter(|&b| {
                        b != a && in_range(&positions[a.0 as usize], &positions[b.0 as usize], cfg.radio_range)
                    })
                    .collect()
            })
            .collect();
        let streams = RngStreams::new(cfg.seed);
        let nodes = cfg
            .node_ids()
            .map(|n| NodeState {
                ifaces: (0..cfg.num_interfaces)
                    .map(|i| {
                        Interface::new(
                            IfaceRef { node: n, iface: i },
                            cfg.tuning.initial_channel(n, i, cfg.num_channels),
                        )
                    })
                    .collect(),
                counters: vec![CounterSet::default(); cfg.num_interfaces],
                table: NeighborTable::new(),
                rng: streams.stream(u64::from(n.0)),
                next_hello_seq: 0,
                next_data_seq: 0,
            })
            .collect();
        let mut sim = Simulation {
            hello_airtime: cfg.hello_airtime(),
            cfg,
            queue: EventQueue::new(),
            nodes,
            reach,
            in_flight: HashMap::new(),
            next_arrival: 0,
            trace: TraceWriter::new(sink),
            hello_firings: 0,
            started,
        };
        sim.start()?;
        Ok(sim)
    }

    fn start(&mut self) -> Result<(), SimError> {
        for n in 0..self.nodes.len() {
            for i in 0..self.cfg.num_interfaces {
                let ch = self.nodes[n].ifaces[i].tuned_channel();
                self.emit(TraceRecord::tune(SimTime::ZERO, NodeId(n as u32), i, ch))?;
            }
        }
        for node in self.cfg.node_ids() {
            if let Some(ch) = self.cfg.policy.static_channel(node) {
                // Interfaces already on the mapped channel need no action.
                for i in 0..self.cfg.num_interfaces {
                    if self.nodes[node.0 as usize].ifaces[i].tuned_channel() != ch {
                        self.retune(IfaceRef { node, iface: i }, ch)?;
                    }
                }
            }
        }
        if self.cfg.hello.enabled {
            for node in self.cfg.node_ids() {
                let jitter = self.draw_jitter(node);
                self.queue.schedule(jitter, SimEvent::HelloTimer(node))?;
            }
        }
        for b in self.cfg.broadcasts.clone() {
            self.queue.schedule(
                SimTime::from_millis(b.at_ms),
                SimEvent::Broadcast {
                    node: b.node,
                    payload_bytes: b.payload_bytes,
                },
            )?;
        }
        Ok(())
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn neighbor_table(&self, node: NodeId) -> &NeighborTable {
        &self.nodes[node.0 as usize].table
    }

    pub fn interface(&self, iface: IfaceRef) -> &Interface {
        &self.nodes[iface.node.0 as usize].ifaces[iface.iface]
    }

    pub fn hello_firings(&self) -> u64 {
        self.hello_firings
    }

    /// Schedules an all-channel broadcast from `node` at `at`.
    pub fn schedule_broadcast(&mut self, node: NodeId, at: SimTime, payload_bytes: u32) -> Result<(), SimError> {
        self.queue.schedule(at, SimEvent::Broadcast { node, payload_bytes })?;
        Ok(())
    }

    /// Executes every event with `fire_at <= t_end`.
    pub fn run_until(&mut self, t_end: SimTime) -> Result<(), SimError> {
        while let Some((_, event)) = self.queue.pop_until(t_end) {
            self.dispatch(event)?;
        }
        self.queue.advance_to(t_end);
        Ok(())
    }

    /// Flushes the trace and returns the summary together with the sink.
    pub fn finish(mut self) -> Result<(RunSummary, Box<dyn Write>), SimError> {
        self.trace.flush().map_err(SimError::Trace)?;
        let nodes: Vec<NodeSummary> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(n, st)| NodeSummary {
                node: NodeId(n as u32),
                totals: st.counters.iter().sum(),
                interfaces: st.counters.clone(),
                neighbors: st.table.neighbors().collect(),
                final_channels: st.ifaces.iter().map(Interface::tuned_channel).collect(),
            })
            .collect();
        let in_flight_at_end = self
            .nodes
            .iter()
            .flat_map(|st| st.ifaces.iter())
            .map(|i| i.pending_arrivals() as u64)
            .sum();
        let summary = RunSummary {
            global: nodes.iter().map(|n| &n.totals).sum(),
            nodes,
            hello_firings: self.hello_firings,
            events_executed: self.queue.executed(),
            in_flight_at_end,
            sim_duration: self.queue.now(),
            wall_clock: self.started.elapsed(),
        };
        Ok((summary, self.trace.into_inner()))
    }

    fn emit(&mut self, rec: TraceRecord) -> Result<(), SimError> {
        self.trace.emit(&rec).map_err(SimError::Trace)
    }

    fn draw_jitter(&mut self, node: NodeId) -> SimTime {
        let max = self.cfg.hello.max_jitter().as_micros();
        SimTime(self.nodes[node.0 as usize].rng.gen_range(0..=max))
    }

    fn counters(&mut self, iface: IfaceRef) -> &mut CounterSet {
        &mut self.nodes[iface.node.0 as usize].counters[iface.iface]
    }

    fn iface_mut(&mut self, iface: IfaceRef) -> &mut Interface {
        &mut self.nodes[iface.node.0 as usize].ifaces[iface.iface]
    }

    fn dispatch(&mut self, event: SimEvent) -> Result<(), SimError> {
        match event {
            SimEvent::HelloTimer(node) => self.send_hello(node),
            SimEvent::Transmit { iface, outgoing } => self.transmit(iface, outgoing),
            SimEvent::DeliverStart { arrival } => self.deliver_start(arrival),
            SimEvent::DeliverEnd { arrival } => self.deliver_end(arrival),
            SimEvent::NeighborExpiry { node, neighbor } => {
                let lifetime = self.cfg.hello.neighbor_lifetime();
                let now = self.now();
                self.nodes[node.0 as usize].table.expire(neighbor, now, lifetime);
                Ok(())
            }
            SimEvent::Broadcast { node, payload_bytes } => self.broadcast_all_channels(node, payload_bytes),
        }
    }

    /// One Hello firing: a copy per interface, then the next timer.
    fn send_hello(&mut self, node: NodeId) -> Result<(), SimError> {
        if !self.cfg.hello.enabled {
            return Ok(());
        }
        let now = self.now();
        let st = &mut self.nodes[node.0 as usize];
        let seq = st.next_hello_seq;
        st.next_hello_seq += 1;
        self.hello_firings += 1;
        for (iface, offset) in hello_copy_offsets(self.cfg.num_interfaces, self.hello_airtime) {
            self.queue.schedule(
                now + offset,
                SimEvent::Transmit {
                    iface: IfaceRef { node, iface },
                    outgoing: Outgoing::Hello { seq, fired_at: now },
                },
            )?;
        }
        let next = now + self.cfg.hello.interval() + self.draw_jitter(node);
        self.queue.schedule(next, SimEvent::HelloTimer(node))?;
        Ok(())
    }

    /// One copy on every channel, dealt round-robin over the interfaces with
    /// rounds sent back to back.
    fn broadcast_all_channels(&mut self, node: NodeId, payload_bytes: u32) -> Result<(), SimError> {
        let now = self.now();
        let st = &mut self.nodes[node.0 as usize];
        let seq = st.next_data_seq;
        st.next_data_seq += 1;
        let slot = airtime(payload_bytes, self.cfg.bitrate);
        for copy in plan_all_channel_broadcast(self.cfg.num_channels, self.cfg.num_interfaces) {
            self.queue.schedule(
                now + slot * copy.round as u64,
                SimEvent::Transmit {
                    iface: IfaceRef {
                        node,
                        iface: copy.iface,
                    },
                    outgoing: Outgoing::Data {
                        seq,
                        channel: copy.channel,
                        size_bytes: payload_bytes,
                    },
                },
            )?;
        }
        Ok(())
    }

    fn transmit(&mut self, tx: IfaceRef, outgoing: Outgoing) -> Result<(), SimError> {
        let now = self.now();
        let node = tx.node;
        let tuned = self.interface(tx).tuned_channel();
        let (channel, packet) = match outgoing {
            Outgoing::Hello { seq, fired_at } => {
                let channel = self.cfg.policy.select_tx_channel(node, tuned);
                let pkt = HelloPacket {
                    src: node,
                    seq,
                    channel_index: self.cfg.policy.header_channel(node, channel),
                    sent_at: fired_at,
                    size_bytes: self.cfg.hello.size_bytes,
                };
                (channel, Packet::Hello(pkt))
            }
            Outgoing::Data {
                seq,
                channel,
                size_bytes,
            } => (
                channel,
                Packet::Data(DataPacket {
                    src: node,
                    seq,
                    channel_index: channel,
                    size_bytes,
                }),
            ),
        };
        let duration = airtime(packet.size_bytes(), self.cfg.bitrate);
        let record = |op, reason| TraceRecord {
            op,
            time: now,
            node,
            iface: tx.iface,
            channel,
            pkt_type: pkt_type(&packet),
            src: packet.src(),
            seq: packet.seq(),
            reason,
        };
        let end = match self.iface_mut(tx).begin_transmit(now, duration) {
            Ok(end) => end,
            Err(_) => {
                self.counters(tx).tx_dropped_busy += 1;
                return self.emit(record(TraceOp::Drop, Some(DropReason::Busy)));
            }
        };
        self.emit(record(TraceOp::Send, None))?;
        self.counters(tx).sends += 1;

        let start = now + self.cfg.propagation_delay();
        let transmission = Transmission {
            tx,
            channel,
            packet,
            start: now,
            end,
        };
        for k in 0..self.reach[node.0 as usize].len() {
            let other = self.reach[node.0 as usize][k];
            for i in 0..self.cfg.num_interfaces {
                let rx = IfaceRef { node: other, iface: i };
                if self.interface(rx).tuned_channel() != channel {
                    continue;
                }
                let id = self.next_arrival;
                self.next_arrival += 1;
                self.in_flight.insert(
                    id,
                    InFlight {
                        rx,
                        tx: transmission.clone(),
                    },
                );
                self.queue.schedule(start, SimEvent::DeliverStart { arrival: id })?;
            }
        }
        Ok(())
    }

    fn deliver_start(&mut self, id: u64) -> Result<(), SimError> {
        let now = self.now();
        let f = &self.in_flight[&id];
        let (rx, channel, duration) = (f.rx, f.tx.channel, f.tx.end.saturating_sub(f.tx.start));
        let end = now + duration;
        self.iface_mut(rx).register_arrival(Arrival {
            id,
            channel,
            start: now,
            end,
        });
        self.counters(rx).deliver_starts += 1;
        self.queue.schedule(end, SimEvent::DeliverEnd { arrival: id })?;
        Ok(())
    }

    fn deliver_end(&mut self, id: u64) -> Result<(), SimError> {
        let now = self.now();
        let InFlight { rx, tx } = self.in_flight.remove(&id).expect("arrival in flight");
        let outcome = self
            .iface_mut(rx)
            .resolve(id, now)
            .expect("arrival registered at DeliverStart");
        self.counters(rx).record_outcome(outcome);
        self.emit(TraceRecord {
            op: if outcome == ReceptionOutcome::Received {
                TraceOp::Recv
            } else {
                TraceOp::Drop
            },
            time: now,
            node: rx.node,
            iface: rx.iface,
            channel: tx.channel,
            pkt_type: pkt_type(&tx.packet),
            src: tx.packet.src(),
            seq: tx.packet.seq(),
            reason: DropReason::from_outcome(outcome),
        })?;
        if outcome != ReceptionOutcome::Received {
            return Ok(());
        }
        if let Packet::Hello(hello) = &tx.packet {
            self.recv_hello(rx, tx.channel, hello)?;
        }
        Ok(())
    }

    fn recv_hello(&mut self, rx: IfaceRef, channel: ChannelId, pkt: &HelloPacket) -> Result<(), SimError> {
        let now = self.now();
        let lifetime = self.cfg.hello.neighbor_lifetime();
        let st = &mut self.nodes[rx.node.0 as usize];
        let (delta, old_handle) = st.table.record_hello(pkt, now, rx.iface, channel);
        match delta {
            HelloDelta::Duplicate => st.counters[rx.iface].duplicates += 1,
            HelloDelta::Added | HelloDelta::Refreshed => {
                if let Some(h) = old_handle {
                    self.queue.cancel(h);
                }
                let h = self.queue.schedule(
                    now + lifetime,
                    SimEvent::NeighborExpiry {
                        node: rx.node,
                        neighbor: pkt.src,
                    },
                )?;
                self.nodes[rx.node.0 as usize].table.set_expiry(pkt.src, h);
            }
        }
        let tuned = self.interface(rx).tuned_channel();
        if let Some(ch) = self.cfg.policy.apply_rx_channel_rule(rx.node, tuned, pkt) {
            self.retune(rx, ch)?;
        }
        Ok(())
    }

    fn retune(&mut self, iface: IfaceRef, channel: ChannelId) -> Result<(), SimError> {
        let now = self.now();
        self.iface_mut(iface).retune(now, channel);
        self.counters(iface).retunes += 1;
        self.emit(TraceRecord::tune(now, iface.node, iface.iface, channel))
    }
}

fn pkt_type(p: &Packet) -> PktType {
    match p {
        Packet::Hello(_) => PktType::Hello,
        Packet::Data(_) => PktType::Data,
    }
}

/// Runs a scenario to its configured duration, writing the trace to
/// `cfg.trace_path` (or nowhere if unset).
pub fn build_and_run(cfg: ScenarioConfig) -> Result<RunSummary, SimError> {
    let sink: Box<dyn Write> = match &cfg.trace_path {
        Some(path) => {
            let file = File::create(path).map_err(|source| SimError::TraceOpen {
                path: path.clone(),
                source,
            })?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(io::sink()),
    };
    let end = cfg.duration();
    let mut sim = Simulation::new(cfg, sink)?;
    sim.run_until(end)?;
    Ok(sim.finish()?.0)
}

/// Runs a scenario and returns the trace bytes alongside the summary.
pub fn run_in_memory(cfg: ScenarioConfig) -> Result<(RunSummary, Vec<u8>), SimError> {
    let buf = SharedBuf::default();
    let end = cfg.duration();
    let mut sim = Simulation::new(cfg, Box::new(buf.clone()))?;
    sim.run_until(end)?;
    let (summary, _) = sim.finish()?;
    Ok((summary, buf.take()))
}

/// Cloneable in-memory sink.
#[derive(Clone, Default)]
pub struct SharedBuf(std::rc::Rc<std::cell::RefCell<Vec<u8>>>);

impl SharedBuf {
    pub fn take(&self) -> Vec<u8> {
        std::mem::take(&mut self.0.borrow_mut())
    }
}

impl Write for SharedBuf {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        self.0.borrow_mut().extend_from_slice(data);
        Ok(data.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}
