//! Channels, interfaces, unit-disk propagation and the reception rule.
//!
//! A frame is received by an interface only if the interface is tuned to the
//! frame's channel for the whole reception, is not transmitting, and hears no
//! other overlapping frame on that channel. Outcomes are resolved lazily when
//! the frame ends, from the interface's tune and transmit history, so the
//! result does not depend on how simultaneous events happen to be ordered.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::hello::HelloPacket;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct ChannelId(pub u16);

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub const DEFAULT_NUM_CHANNELS: u16 = 16;
pub const DEFAULT_RADIO_RANGE_M: f64 = 250.0;
pub const DEFAULT_BITRATE_BPS: u64 = 2_000_000;
pub const DEFAULT_PROPAGATION_DELAY_US: u64 = 1;

/// One interface of one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IfaceRef {
    pub node: NodeId,
    pub iface: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Closed unit disk: in range iff the distance is at most `range`.
pub fn in_range(a: &Position, b: &Position, range: f64) -> bool {
    a.distance(b) <= range
}

/// Airtime of a frame, rounded up to whole microseconds.
pub fn airtime(size_bytes: u32, bitrate_bps: u64) -> SimTime {
    let bits = u64::from(size_bytes) * 8;
    SimTime((bits * 1_000_000).div_ceil(bitrate_bps))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPacket {
    pub src: NodeId,
    pub seq: u64,
    pub channel_index: ChannelId,
    pub size_bytes: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Hello(HelloPacket),
    Data(DataPacket),
}

impl Packet {
    pub fn src(&self) -> NodeId {
        match self {
            Packet::Hello(h) => h.src,
            Packet::Data(d) => d.src,
        }
    }

    pub fn seq(&self) -> u64 {
        match self {
            Packet::Hello(h) => h.seq,
            Packet::Data(d) => d.seq,
        }
    }

    pub fn size_bytes(&self) -> u32 {
        match self {
            Packet::Hello(h) => h.size_bytes,
            Packet::Data(d) => d.size_bytes,
        }
    }

    pub fn channel_index(&self) -> ChannelId {
        match self {
            Packet::Hello(h) => h.channel_index,
            Packet::Data(d) => d.channel_index,
        }
    }

    pub fn is_hello(&self) -> bool {
        matches!(self, Packet::Hello(_))
    }
}

/// A frame on the air.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transmission {
    pub tx: IfaceRef,
    pub channel: ChannelId,
    pub packet: Packet,
    pub start: SimTime,
    pub end: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IgnoreReason {
    /// The receiver was (or became) busy transmitting.
    Busy,
    /// The receiver was not tuned to the frame's channel for the whole frame.
    Mismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReceptionOutcome {
    Received,
    Collided,
    Ignored(IgnoreReason),
}

/// A frame arriving at one receiving interface, `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arrival {
    pub id: u64,
    pub channel: ChannelId,
    pub start: SimTime,
    pub end: SimTime,
}

impl Arrival {
    fn overlaps(&self, other: &Arrival) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, Copy)]
struct ArrivalSlot {
    arrival: Arrival,
    resolved: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IfaceState {
    Idle,
    Transmitting {
        until: SimTime,
    },
    Receiving {
        arrival: u64,
        until: SimTime,
        corrupted: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransmitterBusy {
    pub until: SimTime,
}

/// A single radio. Keeps just enough history (tunings, own transmissions and
/// overlapping arrivals) to judge every frame still in flight.
#[derive(Debug, Clone)]
pub struct Interface {
    id: IfaceRef,
    tunes: Vec<(SimTime, ChannelId)>,
    transmissions: Vec<(SimTime, SimTime)>,
    arrivals: Vec<ArrivalSlot>,
}

impl Interface {
    pub fn new(id: IfaceRef, channel: ChannelId) -> Self {
        Self {
            id,
            tunes: vec![(SimTime::ZERO, channel)],
            transmissions: Vec::new(),
            arrivals: Vec::new(),
        }
    }

    pub fn id(&self) -> IfaceRef {
        self.id
    }

    pub fn tuned_channel(&self) -> ChannelId {
        self.tunes.last().expect("tune history is never empty").1
    }

    /// Channel in effect at `t`, counting every retune stamped at or before `t`.
    pub fn tuned_at(&self, t: SimTime) -> ChannelId {
        let idx = self.tunes.partition_point(|(at, _)| *at <= t);
        self.tunes[idx.saturating_sub(1)].1
    }

    pub fn transmitting_at(&self, t: SimTime) -> bool {
        self.transmissions.iter().any(|&(s, e)| s <= t && t < e)
    }

    pub fn state(&self, now: SimTime) -> IfaceState {
        if let Some(&(_, until)) = self.transmissions.iter().find(|&&(s, e)| s <= now && now < e) {
            return IfaceState::Transmitting { until };
        }
        self.arrivals
            .iter()
            .filter(|slot| {
                let a = &slot.arrival;
                a.start <= now && now < a.end && self.tuned_at(now) == a.channel && self.heard(a)
            })
            .map(|slot| IfaceState::Receiving {
                arrival: slot.arrival.id,
                until: slot.arrival.end,
                corrupted: self.outcome(&slot.arrival) != ReceptionOutcome::Received,
            })
            .next()
            .unwrap_or(IfaceState::Idle)
    }

    /// Starts a transmission of `duration` at `now`. Fails if the transmitter
    /// is still busy with an earlier frame; an in-flight reception does not
    /// block transmission but is lost.
    pub fn begin_transmit(&mut self, now: SimTime, duration: SimTime) -> Result<SimTime, TransmitterBusy> {
        if let Some(&(_, until)) = self.transmissions.iter().find(|&&(s, e)| s <= now && now < e) {
            return Err(TransmitterBusy { until });
        }
        let end = now + duration;
        self.transmissions.push((now, end));
        Ok(end)
    }

    /// Retunes the interface. Returns true if the channel actually changed.
    /// Any frame being received on the old channel is corrupted.
    pub fn retune(&mut self, now: SimTime, channel: ChannelId) -> bool {
        let changed = self.tuned_channel() != channel;
        if changed {
            self.tunes.push((now, channel));
        }
        changed
    }

    pub fn register_arrival(&mut self, arrival: Arrival) {
        self.arrivals.push(ArrivalSlot {
            arrival,
            resolved: false,
        });
    }

    /// Judges a registered arrival at its end time and forgets history that
    /// no pending arrival can depend on any more.
    pub fn resolve(&mut self, arrival_id: u64, now: SimTime) -> Option<ReceptionOutcome> {
        let idx = self
            .arrivals
            .iter()
            .position(|slot| slot.arrival.id == arrival_id && !slot.resolved)?;
        let outcome = self.outcome(&self.arrivals[idx].arrival);
        self.arrivals[idx].resolved = true;
        self.prune(now);
        Some(outcome)
    }

    /// Number of arrivals registered but not yet resolved.
    pub fn pending_arrivals(&self) -> usize {
        self.arrivals.iter().filter(|s| !s.resolved).count()
    }

    fn heard(&self, a: &Arrival) -> bool {
        self.tuned_at(a.start) == a.channel && !self.transmitting_at(a.start)
    }

    fn outcome(&self, a: &Arrival) -> ReceptionOutcome {
        if self.tuned_at(a.start) != a.channel {
            return ReceptionOutcome::Ignored(IgnoreReason::Mismatch);
        }
        if self.transmitting_at(a.start) {
            return ReceptionOutcome::Ignored(IgnoreReason::Busy);
        }
        let collided = self.arrivals.iter().any(|slot| {
            let b = &slot.arrival;
            b.id != a.id && b.channel == a.channel && a.overlaps(b) && self.heard(b)
        });
        if collided {
            return ReceptionOutcome::Collided;
        }
        if self.transmissions.iter().any(|&(s, _)| a.start < s && s < a.end) {
            return ReceptionOutcome::Ignored(IgnoreReason::Busy);
        }
        if self
            .tunes
            .iter()
            .any(|&(t, c)| a.start < t && t < a.end && c != a.channel)
        {
            return ReceptionOutcome::Ignored(IgnoreReason::Mismatch);
        }
        ReceptionOutcome::Received
    }

    fn prune(&mut self, now: SimTime) {
        let pending_from = self
            .arrivals
            .iter()
            .filter(|s| !s.resolved)
            .map(|s| s.arrival.start)
            .min()
            .unwrap_or(now);
        self.arrivals.retain(|s| !s.resolved || s.arrival.end > pending_from);
        let keep_from = self
            .arrivals
            .iter()
            .map(|s| s.arrival.start)
            .min()
            .unwrap_or(now)
            .min(now);
        self.transmissions.retain(|&(_, e)| e > keep_from);
        let first_needed = self.tunes.partition_point(|(at, _)| *at <= keep_from).saturating_sub(1);
        if first_needed > 0 {
            self.tunes.drain(..first_needed);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iface(ch: u16) -> Interface {
        Interface::new(
            IfaceRef {
                node: NodeId(0),
                iface: 0,
            },
            ChannelId(ch),
        )
    }

    fn arrival(id: u64, ch: u16, start: u64, len: u64) -> Arrival {
        Arrival {
            id,
            channel: ChannelId(ch),
            start: SimTime(start),
            end: SimTime(start + len),
        }
    }

    #[test]
    fn range_boundaries() {
        let a = Position::new(0.0, 0.0);
        assert!(in_range(&a, &a, 250.0));
        assert!(in_range(&a, &Position::new(250.0, 0.0), 250.0));
        assert!(in_range(&a, &Position::new(150.0, 200.0), 250.0));
        assert!(!in_range(&a, &Position::new(250.0 * 1.01, 0.0), 250.0));
    }

    #[test]
    fn hello_airtime_at_two_megabit() {
        assert_eq!(airtime(64, 2_000_000), SimTime(256));
        assert_eq!(airtime(1, 3_000_000), SimTime(3));
    }

    #[test]
    fn matching_channel_without_overlap_is_received() {
        let mut rx = iface(1);
        rx.register_arrival(arrival(1, 1, 10, 256));
        assert_eq!(rx.resolve(1, SimTime(266)), Some(ReceptionOutcome::Received));
    }

    #[test]
    fn channel_mismatch_is_ignored() {
        let mut rx = iface(0);
        rx.register_arrival(arrival(1, 1, 10, 256));
        assert_eq!(
            rx.resolve(1, SimTime(266)),
            Some(ReceptionOutcome::Ignored(IgnoreReason::Mismatch))
        );
    }

    #[test]
    fn overlapping_same_channel_frames_both_collide() {
        let mut rx = iface(1);
        rx.register_arrival(arrival(1, 1, 10, 256));
        rx.register_arrival(arrival(2, 1, 100, 256));
        assert_eq!(rx.resolve(1, SimTime(266)), Some(ReceptionOutcome::Collided));
        assert_eq!(rx.resolve(2, SimTime(356)), Some(ReceptionOutcome::Collided));
    }

    #[test]
    fn back_to_back_frames_do_not_collide() {
        let mut rx = iface(1);
        rx.register_arrival(arrival(1, 1, 10, 256));
        rx.register_arrival(arrival(2, 1, 266, 256));
        assert_eq!(rx.resolve(1, SimTime(266)), Some(ReceptionOutcome::Received));
        assert_eq!(rx.resolve(2, SimTime(522)), Some(ReceptionOutcome::Received));
    }

    #[test]
    fn retune_mid_reception_corrupts_frame() {
        let mut rx = iface(1);
        rx.register_arrival(arrival(1, 1, 10, 256));
        assert!(matches!(
            rx.state(SimTime(50)),
            IfaceState::Receiving { corrupted: false, .. }
        ));
        assert!(rx.retune(SimTime(100), ChannelId(0)));
        assert_eq!(rx.tuned_channel(), ChannelId(0));
        assert!(matches!(rx.state(SimTime(150)), IfaceState::Idle));
        assert_eq!(
            rx.resolve(1, SimTime(266)),
            Some(ReceptionOutcome::Ignored(IgnoreReason::Mismatch))
        );
    }

    #[test]
    fn retune_to_current_channel_is_a_no_op() {
        let mut rx = iface(1);
        rx.register_arrival(arrival(1, 1, 10, 256));
        assert!(!rx.retune(SimTime(100), ChannelId(1)));
        assert_eq!(rx.resolve(1, SimTime(266)), Some(ReceptionOutcome::Received));
    }

    #[test]
    fn transmitting_receiver_ignores_frame() {
        let mut rx = iface(1);
        rx.begin_transmit(SimTime(0), SimTime(256)).unwrap();
        assert!(matches!(rx.state(SimTime(5)), IfaceState::Transmitting { .. }));
        rx.register_arrival(arrival(1, 1, 10, 256));
        assert_eq!(
            rx.resolve(1, SimTime(266)),
            Some(ReceptionOutcome::Ignored(IgnoreReason::Busy))
        );
    }

    #[test]
    fn transmit_preempts_reception() {
        let mut rx = iface(1);
        rx.register_arrival(arrival(1, 1, 10, 256));
        rx.begin_transmit(SimTime(100), SimTime(256)).unwrap();
        assert!(matches!(rx.state(SimTime(150)), IfaceState::Transmitting { .. }));
        assert_eq!(
            rx.resolve(1, SimTime(266)),
            Some(ReceptionOutcome::Ignored(IgnoreReason::Busy))
        );
    }

    #[test]
    fn transmitter_is_half_duplex() {
        let mut tx = iface(1);
        assert_eq!(tx.begin_transmit(SimTime(0), SimTime(256)), Ok(SimTime(256)));
        assert_eq!(
            tx.begin_transmit(SimTime(100), SimTime(256)),
            Err(TransmitterBusy { until: SimTime(256) })
        );
        assert_eq!(tx.begin_transmit(SimTime(256), SimTime(256)), Ok(SimTime(512)));
    }

    #[test]
    fn busy_frame_does_not_interfere() {
        // Frame 1 lands while the radio transmits, so it is never heard and
        // cannot destroy frame 2 which starts once the radio is idle again.
        let mut rx = iface(1);
        rx.begin_transmit(SimTime(0), SimTime(50)).unwrap();
        rx.register_arrival(arrival(1, 1, 10, 256));
        rx.register_arrival(arrival(2, 1, 100, 256));
        assert_eq!(
            rx.resolve(1, SimTime(266)),
            Some(ReceptionOutcome::Ignored(IgnoreReason::Busy))
        );
        assert_eq!(rx.resolve(2, SimTime(356)), Some(ReceptionOutcome::Received));
    }

    #[test]
    fn history_is_pruned_once_idle() {
        let mut rx = iface(1);
        for i in 0..100u64 {
            let ch = rx.tuned_channel().0;
            rx.register_arrival(arrival(i, ch, i * 1_000, 256));
            assert_eq!(
                rx.resolve(i, SimTime(i * 1_000 + 256)),
                Some(ReceptionOutcome::Received)
            );
            rx.retune(SimTime(i * 1_000 + 500), ChannelId(1 + (i % 2) as u16));
        }
        assert!(rx.arrivals.len() <= 1);
        assert!(rx.tunes.len() <= 2);
        assert_eq!(rx.pending_arrivals(), 0);
    }
}
