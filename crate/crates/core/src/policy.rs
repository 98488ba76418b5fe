//! Channel selection strategies.
//!
//! `Default` leaves the choice to the radio (transmit on whatever the
//! interface is tuned to). `ExplicitStamp` has the routing layer stamp one
//! channel into every packet and send on it. `StaticMap` pins each node's
//! interfaces to a fixed channel at start-up. `HeaderDriven` makes a receiver
//! retune to the channel named in a received Hello's header.

use std::collections::BTreeMap;

use crate::hello::HelloPacket;
use crate::radio::{ChannelId, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ChannelPolicy {
    #[default]
    Default,
    ExplicitStamp(ChannelId),
    StaticMap {
        map: BTreeMap<NodeId, ChannelId>,
        fallback: ChannelId,
    },
    /// `stamps` holds the routing-layer decision a node writes into the
    /// header of its own Hellos. Nodes without one stamp the channel they
    /// transmit on.
    HeaderDriven {
        stamps: BTreeMap<NodeId, ChannelId>,
    },
}

impl ChannelPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelPolicy::Default => "default",
            ChannelPolicy::ExplicitStamp(_) => "explicit_stamp",
            ChannelPolicy::StaticMap { .. } => "static_map",
            ChannelPolicy::HeaderDriven { .. } => "header_driven",
        }
    }

    /// Channel a node's interface transmits on.
    pub fn select_tx_channel(&self, node: NodeId, tuned: ChannelId) -> ChannelId {
        match self {
            ChannelPolicy::ExplicitStamp(c) => *c,
            ChannelPolicy::StaticMap { .. } => self.static_channel(node).unwrap_or(tuned),
            ChannelPolicy::Default | ChannelPolicy::HeaderDriven { .. } => tuned,
        }
    }

    /// Value written into the packet's `channel_index` header field.
    pub fn header_channel(&self, node: NodeId, tx_channel: ChannelId) -> ChannelId {
        match self {
            ChannelPolicy::HeaderDriven { stamps } => stamps.get(&node).copied().unwrap_or(tx_channel),
            _ => tx_channel,
        }
    }

    /// Channel every interface of `node` is pinned to at start-up, if any.
    pub fn static_channel(&self, node: NodeId) -> Option<ChannelId> {
        match self {
            ChannelPolicy::StaticMap { map, fallback } => Some(map.get(&node).copied().unwrap_or(*fallback)),
            _ => None,
        }
    }

    /// Retune action triggered by a Hello received on an interface currently
    /// tuned to `tuned`. Only the header-driven policy reacts; it returns the
    /// header's channel even when it equals the current one.
    pub fn apply_rx_channel_rule(&self, _node: NodeId, _tuned: ChannelId, pkt: &HelloPacket) -> Option<ChannelId> {
        match self {
            ChannelPolicy::HeaderDriven { .. } => Some(pkt.channel_index),
            _ => None,
        }
    }

    /// Checks every channel and node reference. Errors name the offending key.
    pub fn validate(&self, num_nodes: u32, num_channels: u16) -> Result<(), (String, String)> {
        let check_ch = |key: String, c: ChannelId| {
            if c.0 >= num_channels {
                Err((
                    key,
                    format!("channel {} out of range (num_channels = {})", c, num_channels),
                ))
            } else {
                Ok(())
            }
        };
        let check_node = |key: String, n: NodeId| {
            if n.0 >= num_nodes {
                Err((key, format!("node {} out of range (num_nodes = {})", n, num_nodes)))
            } else {
                Ok(())
            }
        };
        match self {
            ChannelPolicy::Default => Ok(()),
            ChannelPolicy::ExplicitStamp(c) => check_ch("policy.channel".into(), *c),
            ChannelPolicy::StaticMap { map, fallback } => {
                check_ch("policy.fallback".into(), *fallback)?;
                for (n, c) in map {
                    check_node(format!("policy.map.{}", n), *n)?;
                    check_ch(format!("policy.map.{}", n), *c)?;
                }
                Ok(())
            }
            ChannelPolicy::HeaderDriven { stamps } => {
                for (n, c) in stamps {
                    check_node(format!("policy.stamps.{}", n), *n)?;
                    check_ch(format!("policy.stamps.{}", n), *c)?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SimTime;

    fn hello_with(ch: u16) -> HelloPacket {
        HelloPacket {
            src: NodeId(0),
            seq: 0,
            channel_index: ChannelId(ch),
            sent_at: SimTime::ZERO,
            size_bytes: 64,
        }
    }

    fn node7_split() -> ChannelPolicy {
        ChannelPolicy::StaticMap {
            map: [(NodeId(7), ChannelId(0))].into(),
            fallback: ChannelId(1),
        }
    }

    #[test]
    fn static_map_pins_node_seven_apart() {
        let p = node7_split();
        assert_eq!(p.select_tx_channel(NodeId(7), ChannelId(4)), ChannelId(0));
        assert_eq!(p.select_tx_channel(NodeId(3), ChannelId(4)), ChannelId(1));
        assert_eq!(p.static_channel(NodeId(7)), Some(ChannelId(0)));
        assert_eq!(p.static_channel(NodeId(0)), Some(ChannelId(1)));
        assert_eq!(p.apply_rx_channel_rule(NodeId(3), ChannelId(1), &hello_with(0)), None);
    }

    #[test]
    fn explicit_stamp_overrides_everything() {
        let p = ChannelPolicy::ExplicitStamp(ChannelId(1));
        for node in 0..8 {
            for tuned in 0..16 {
                let ch = p.select_tx_channel(NodeId(node), ChannelId(tuned));
                assert_eq!(ch, ChannelId(1));
                assert_eq!(p.header_channel(NodeId(node), ch), ChannelId(1));
            }
        }
        assert_eq!(p.apply_rx_channel_rule(NodeId(0), ChannelId(0), &hello_with(1)), None);
    }

    #[test]
    fn default_uses_current_tuning() {
        let p = ChannelPolicy::Default;
        assert_eq!(p.select_tx_channel(NodeId(2), ChannelId(5)), ChannelId(5));
        assert_eq!(p.static_channel(NodeId(2)), None);
        assert_eq!(p.apply_rx_channel_rule(NodeId(2), ChannelId(5), &hello_with(3)), None);
    }

    #[test]
    fn header_driven_retunes_receiver() {
        let p = ChannelPolicy::HeaderDriven {
            stamps: [(NodeId(0), ChannelId(2))].into(),
        };
        assert_eq!(
            p.apply_rx_channel_rule(NodeId(1), ChannelId(1), &hello_with(2)),
            Some(ChannelId(2))
        );
        assert_eq!(
            p.apply_rx_channel_rule(NodeId(1), ChannelId(2), &hello_with(2)),
            Some(ChannelId(2))
        );
        assert_eq!(p.select_tx_channel(NodeId(0), ChannelId(1)), ChannelId(1));
        assert_eq!(p.header_channel(NodeId(0), ChannelId(1)), ChannelId(2));
        assert_eq!(p.header_channel(NodeId(1), ChannelId(1)), ChannelId(1));
    }

    #[test]
    fn validation_names_the_key() {
        let err = node7_split().validate(5, 16).unwrap_err();
        assert_eq!(err.0, "policy.map.7");
        assert!(err.1.contains("node 7 out of range"));
        let err = ChannelPolicy::ExplicitStamp(ChannelId(5)).validate(4, 2).unwrap_err();
        assert_eq!(err.0, "policy.channel");
        assert!(node7_split().validate(8, 2).is_ok());
    }
}
