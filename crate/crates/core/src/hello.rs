//! Hello beaconing: the beacon packet, per-interface replication, the
//! all-channel broadcast schedule, and neighbor-table maintenance.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::engine::{EventHandle, SimTime};
use crate::radio::{ChannelId, NodeId};

pub const HELLO_SIZE_BYTES: u32 = 64;
pub const DEFAULT_HELLO_INTERVAL_MS: u64 = 1_000;
pub const DEFAULT_HELLO_JITTER_MS: u64 = 100;
pub const DEFAULT_ALLOWED_HELLO_LOSS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelloConfig {
    /// Hellos are off unless switched on.
    pub enabled: bool,
    pub interval_ms: u64,
    /// Upper bound of the uniform jitter added to every timer.
    pub jitter_ms: u64,
    pub allowed_hello_loss: u32,
    pub size_bytes: u32,
}

impl Default for HelloConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            interval_ms: DEFAULT_HELLO_INTERVAL_MS,
            jitter_ms: DEFAULT_HELLO_JITTER_MS,
            allowed_hello_loss: DEFAULT_ALLOWED_HELLO_LOSS,
            size_bytes: HELLO_SIZE_BYTES,
        }
    }
}

impl HelloConfig {
    pub fn interval(&self) -> SimTime {
        SimTime::from_millis(self.interval_ms)
    }

    pub fn max_jitter(&self) -> SimTime {
        SimTime::from_millis(self.jitter_ms)
    }

    /// How long a neighbor entry survives without a fresh Hello.
    pub fn neighbor_lifetime(&self) -> SimTime {
        self.interval() * u64::from(self.allowed_hello_loss)
    }
}

/// The beacon. `channel_index` carries the routing layer's channel decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HelloPacket {
    pub src: NodeId,
    pub seq: u64,
    pub channel_index: ChannelId,
    pub sent_at: SimTime,
    pub size_bytes: u32,
}

/// When each Hello copy goes out relative to the timer firing. A node
/// serializes its copies so that copies sharing a channel never overlap:
/// copy `i` leaves on interface `i` after `i` airtimes.
pub fn hello_copy_offsets(num_interfaces: usize, airtime: SimTime) -> Vec<(usize, SimTime)> {
    (0..num_interfaces)
        .map(|iface| (iface, airtime * iface as u64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BroadcastCopy {
    pub iface: usize,
    pub channel: ChannelId,
    pub round: usize,
}

/// Schedule for sending one copy on every channel. Channels are dealt to
/// interfaces round-robin; round `r` uses channels `r*ni .. (r+1)*ni`.
pub fn plan_all_channel_broadcast(num_channels: u16, num_interfaces: usize) -> Vec<BroadcastCopy> {
    assert!(num_interfaces >= 1, "at least one interface");
    (0..num_channels)
        .map(|c| BroadcastCopy {
            iface: usize::from(c) % num_interfaces,
            channel: ChannelId(c),
            round: usize::from(c) / num_interfaces,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborEntry {
    pub neighbor: NodeId,
    pub last_heard: SimTime,
    pub heard_on_iface: usize,
    pub heard_on_channel: ChannelId,
    pub expiry_handle: Option<EventHandle>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HelloDelta {
    /// A previously unknown neighbor was added.
    Added,
    /// An existing entry was refreshed.
    Refreshed,
    /// This `(src, seq)` was already heard on another interface.
    Duplicate,
}

/// Neighbor table of one node.
#[derive(Debug, Clone, Default)]
pub struct NeighborTable {
    entries: BTreeMap<NodeId, NeighborEntry>,
    last_seq: HashMap<NodeId, u64>,
}

impl NeighborTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a received Hello. The caller owns the expiry timer: on
    /// `Added`/`Refreshed` it should cancel the previous handle (returned
    /// here) and install a new one via [`NeighborTable::set_expiry`].
    pub fn record_hello(
        &mut self,
        pkt: &HelloPacket,
        now: SimTime,
        iface: usize,
        channel: ChannelId,
    ) -> (HelloDelta, Option<EventHandle>) {
        if let Some(&last) = self.last_seq.get(&pkt.src) {
            if pkt.seq <= last {
                return (HelloDelta::Duplicate, None);
            }
        }
        self.last_seq.insert(pkt.src, pkt.seq);
        let fresh = NeighborEntry {
            neighbor: pkt.src,
            last_heard: now,
            heard_on_iface: iface,
            heard_on_channel: channel,
            expiry_handle: None,
        };
        match self.entries.insert(pkt.src, fresh) {
            Some(old) => (HelloDelta::Refreshed, old.expiry_handle),
            None => (HelloDelta::Added, None),
        }
    }

    pub fn set_expiry(&mut self, neighbor: NodeId, handle: EventHandle) {
        if let Some(entry) = self.entries.get_mut(&neighbor) {
            entry.expiry_handle = Some(handle);
        }
    }

    /// Removes `neighbor` if it has not been heard within `lifetime`.
    pub fn expire(&mut self, neighbor: NodeId, now: SimTime, lifetime: SimTime) -> bool {
        match self.entries.get(&neighbor) {
            Some(e) if e.last_heard + lifetime <= now => {
                self.entries.remove(&neighbor);
                true
            }
            _ => false,
        }
    }

    pub fn contains(&self, neighbor: NodeId) -> bool {
        self.entries.contains_key(&neighbor)
    }

    pub fn get(&self, neighbor: NodeId) -> Option<&NeighborEntry> {
        self.entries.get(&neighbor)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn neighbors(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.keys().copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = &NeighborEntry> {
        self.entries.values()
    }
}
