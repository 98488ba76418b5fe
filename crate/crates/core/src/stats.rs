//! Counters, run summaries and neighbor-discovery completeness.

use std::collections::BTreeSet;
use std::io::{self, Write};
use std::ops::AddAssign;
use std::time::Duration;

use serde::Serialize;
use serde_json::json;

use crate::engine::SimTime;
use crate::radio::{in_range, ChannelId, IgnoreReason, NodeId, ReceptionOutcome};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CounterSet {
    pub sends: u64,
    pub receptions: u64,
    pub drops_collision: u64,
    pub drops_busy: u64,
    pub drops_mismatch: u64,
    pub duplicates: u64,
    pub retunes: u64,
    /// Transmit requests refused because the transmitter was busy.
    pub tx_dropped_busy: u64,
    pub deliver_starts: u64,
}

impl CounterSet {
    pub fn drops(&self) -> u64 {
        self.drops_collision + self.drops_busy + self.drops_mismatch
    }

    pub fn record_outcome(&mut self, outcome: ReceptionOutcome) {
        match outcome {
            ReceptionOutcome::Received => self.receptions += 1,
            ReceptionOutcome::Collided => self.drops_collision += 1,
            ReceptionOutcome::Ignored(IgnoreReason::Busy) => self.drops_busy += 1,
            ReceptionOutcome::Ignored(IgnoreReason::Mismatch) => self.drops_mismatch += 1,
        }
    }
}

impl AddAssign for CounterSet {
    fn add_assign(&mut self, o: Self) {
        self.sends += o.sends;
        self.receptions += o.receptions;
        self.drops_collision += o.drops_collision;
        self.drops_busy += o.drops_busy;
        self.drops_mismatch += o.drops_mismatch;
        self.duplicates += o.duplicates;
        self.retunes += o.retunes;
        self.tx_dropped_busy += o.tx_dropped_busy;
        self.deliver_starts += o.deliver_starts;
    }
}

impl<'a> std::iter::Sum<&'a CounterSet> for CounterSet {
    fn sum<I: Iterator<Item = &'a CounterSet>>(iter: I) -> Self {
        let mut total = CounterSet::default();
        for c in iter {
            total += *c;
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSummary {
    pub node: NodeId,
    pub totals: CounterSet,
    pub interfaces: Vec<CounterSet>,
    pub neighbors: Vec<NodeId>,
    pub final_channels: Vec<ChannelId>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub nodes: Vec<NodeSummary>,
    pub global: CounterSet,
    pub hello_firings: u64,
    pub events_executed: u64,
    /// Frames that had started arriving but not finished when the run ended.
    pub in_flight_at_end: u64,
    pub sim_duration: SimTime,
    pub wall_clock: Duration,
}

impl PartialEq for RunSummary {
    // Wall-clock time is not part of a run's outcome.
    fn eq(&self, o: &Self) -> bool {
        self.nodes == o.nodes
            && self.global == o.global
            && self.hello_firings == o.hello_firings
            && self.events_executed == o.events_executed
            && self.in_flight_at_end == o.in_flight_at_end
            && self.sim_duration == o.sim_duration
    }
}

impl RunSummary {
    pub fn node(&self, id: NodeId) -> &NodeSummary {
        &self.nodes[id.0 as usize]
    }

    /// Directed pairs `(a, b)` with `b` in `a`'s final neighbor table.
    pub fn discovered_pairs(&self) -> BTreeSet<(NodeId, NodeId)> {
        self.nodes
            .iter()
            .flat_map(|n| n.neighbors.iter().map(move |&b| (n.node, b)))
            .collect()
    }

    pub fn write_json_lines<W: Write>(&self, mut out: W) -> io::Result<()> {
        for n in &self.nodes {
            let mut rec = serde_json::to_value(n.totals).expect("counters serialize");
            let obj = rec.as_object_mut().expect("object");
            obj.insert("record".into(), json!("node"));
            obj.insert("node".into(), json!(n.node.0));
            obj.insert(
                "neighbors".into(),
                json!(n.neighbors.iter().map(|x| x.0).collect::<Vec<_>>()),
            );
            obj.insert(
                "channels".into(),
                json!(n.final_channels.iter().map(|c| c.0).collect::<Vec<_>>()),
            );
            writeln!(out, "{}", rec)?;
        }
        let mut rec = serde_json::to_value(self.global).expect("counters serialize");
        let obj = rec.as_object_mut().expect("object");
        obj.insert("record".into(), json!("global"));
        obj.insert("nodes".into(), json!(self.nodes.len()));
        obj.insert("hello_firings".into(), json!(self.hello_firings));
        obj.insert("events".into(), json!(self.events_executed));
        obj.insert("in_flight_at_end".into(), json!(self.in_flight_at_end));
        obj.insert("sim_duration_us".into(), json!(self.sim_duration.as_micros()));
        obj.insert("wall_clock_ms".into(), json!(self.wall_clock.as_secs_f64() * 1e3));
        writeln!(out, "{}", rec)
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "{:>5} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}  neighbors",
            "node", "sends", "recv", "coll", "busy", "mismatch", "dups", "retunes"
        )?;
        for n in &self.nodes {
            let c = &n.totals;
            let neigh: Vec<String> = n.neighbors.iter().map(|x| x.to_string()).collect();
            writeln!(
                out,
                "{:>5} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}  [{}]",
                n.node.0,
                c.sends,
                c.receptions,
                c.drops_collision,
                c.drops_busy,
                c.drops_mismatch,
                c.duplicates,
                c.retunes,
                neigh.join(",")
            )?;
        }
        let g = &self.global;
        writeln!(
            out,
            "total: {} sends, {} receptions, {} collisions, {} busy, {} mismatch, {} duplicates, {} retunes",
            g.sends, g.receptions, g.drops_collision, g.drops_busy, g.drops_mismatch, g.duplicates, g.retunes
        )?;
        writeln!(
            out,
            "{} hello firings, {} events, simulated {} us in {:.3} s",
            self.hello_firings,
            self.events_executed,
            self.sim_duration,
            self.wall_clock.as_secs_f64()
        )
    }
}

/// Directed pairs `(a, b)` such that `a` could ever hear `b`: in range, and
/// some interface of `a` is tuned at start to a channel `b` transmits on.
/// Header-driven scenarios are judged by their start-up tuning.
pub fn ideal_neighbors(cfg: &ScenarioConfig) -> BTreeSet<(NodeId, NodeId)> {
    let positions = cfg.node_positions();
    let listens: Vec<BTreeSet<ChannelId>> = cfg
        .node_ids()
        .map(|n| (0..cfg.num_interfaces).map(|i| cfg.channel_at_start(n, i)).collect())
        .collect();
    let talks: Vec<BTreeSet<ChannelId>> = cfg
        .node_ids()
        .map(|n| {
            (0..cfg.num_interfaces)
                .map(|i| cfg.policy.select_tx_channel(n, cfg.channel_at_start(n, i)))
                .collect()
        })
        .collect();
    let mut ideal = BTreeSet::new();
    for a in cfg.node_ids() {
        for b in cfg.node_ids() {
            if a == b || !in_range(&positions[a.0 as usize], &positions[b.0 as usize], cfg.radio_range) {
                continue;
            }
            if !listens[a.0 as usize].is_disjoint(&talks[b.0 as usize]) {
                ideal.insert((a, b));
            }
        }
    }
    ideal
}

/// Fraction of the ideal neighbor relation present in the final tables.
pub fn discovery_completeness(summary: &RunSummary, ideal: &BTreeSet<(NodeId, NodeId)>) -> f64 {
    if ideal.is_empty() {
        return 1.0;
    }
    let found = summary.discovered_pairs();
    ideal.intersection(&found).count() as f64 / ideal.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::ChannelPolicy;
    use crate::radio::Position;
    use crate::scenario::{PositionSpec, TuningOverride};

    fn summary_with(neighbors: Vec<Vec<u32>>) -> RunSummary {
        RunSummary {
            nodes: neighbors
                .into_iter()
                .enumerate()
                .map(|(i, n)| NodeSummary {
                    node: NodeId(i as u32),
                    totals: CounterSet::default(),
                    interfaces: vec![],
                    neighbors: n.into_iter().map(NodeId).collect(),
                    final_channels: vec![],
                })
                .collect(),
            global: CounterSet::default(),
            hello_firings: 0,
            events_executed: 0,
            in_flight_at_end: 0,
            sim_duration: SimTime::ZERO,
            wall_clock: Duration::ZERO,
        }
    }

    #[test]
    fn rollup_sums_parts() {
        let a = CounterSet {
            sends: 2,
            receptions: 1,
            drops_busy: 3,
            ..Default::default()
        };
        let b = CounterSet {
            sends: 1,
            drops_collision: 4,
            retunes: 1,
            ..Default::default()
        };
        let total: CounterSet = [a, b].iter().sum();
        assert_eq!(total.sends, 3);
        assert_eq!(total.drops(), 7);
        assert_eq!(total.retunes, 1);
    }

    #[test]
    fn single_node_is_vacuously_complete() {
        let cfg = ScenarioConfig::with_nodes(1);
        let ideal = ideal_neighbors(&cfg);
        assert!(ideal.is_empty());
        assert_eq!(discovery_completeness(&summary_with(vec![vec![]]), &ideal), 1.0);
    }

    #[test]
    fn ideal_relation_is_channel_aware() {
        let mut cfg = ScenarioConfig::with_nodes(2);
        cfg.positions = PositionSpec::Explicit(vec![Position::new(0.0, 0.0), Position::new(10.0, 0.0)]);
        cfg.tuning.overrides.push(TuningOverride {
            node: NodeId(1),
            iface: None,
            channel: ChannelId(1),
        });
        // Position-only reachability would give both directions.
        assert!(ideal_neighbors(&cfg).is_empty());
        assert_eq!(
            discovery_completeness(&summary_with(vec![vec![], vec![]]), &ideal_neighbors(&cfg)),
            1.0
        );
        cfg.tuning.overrides.clear();
        assert_eq!(ideal_neighbors(&cfg).len(), 2);
    }

    #[test]
    fn split_scenario_excludes_node_seven() {
        let mut cfg = ScenarioConfig::with_nodes(8);
        cfg.policy = ChannelPolicy::StaticMap {
            map: [(NodeId(7), ChannelId(0))].into(),
            fallback: ChannelId(1),
        };
        let ideal = ideal_neighbors(&cfg);
        assert_eq!(ideal.len(), 7 * 6);
        assert!(ideal.iter().all(|&(a, b)| a != NodeId(7) && b != NodeId(7)));
        let full: Vec<Vec<u32>> = (0..8)
            .map(|i| {
                if i == 7 {
                    vec![]
                } else {
                    (0..7).filter(|&j| j != i).collect()
                }
            })
            .collect();
        assert_eq!(discovery_completeness(&summary_with(full), &ideal), 1.0);
        let partial: Vec<Vec<u32>> = (0..8).map(|i| if i == 0 { vec![1] } else { vec![] }).collect();
        assert!((discovery_completeness(&summary_with(partial), &ideal) - 1.0 / 42.0).abs() < 1e-12);
    }

    #[test]
    fn explicit_stamp_talk_channel_drives_ideal() {
        let mut cfg = ScenarioConfig::with_nodes(2);
        cfg.num_interfaces = 1;
        cfg.policy = ChannelPolicy::ExplicitStamp(ChannelId(1));
        // Both listen on 0 but send on 1.
        assert!(ideal_neighbors(&cfg).is_empty());
        cfg.tuning.default_channel = ChannelId(1);
        assert_eq!(ideal_neighbors(&cfg).len(), 2);
    }

    #[test]
    fn json_lines_has_one_record_per_node_plus_global() {
        let s = summary_with(vec![vec![1], vec![0]]);
        let mut buf = Vec::new();
        s.write_json_lines(&mut buf).unwrap();
        let lines: Vec<serde_json::Value> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0]["record"], "node");
        assert_eq!(lines[0]["neighbors"], json!([1]));
        assert_eq!(lines[2]["record"], "global");
        assert_eq!(lines[2]["nodes"], 2);
    }
}
