//! Brute-force delivery oracle.
//!
//! Recomputes, from the scenario and the trace's own `s` and `tune` records,
//! which interfaces every transmission should reach and what the outcome at
//! each should be, by exhaustive pairwise interval checks. Shares nothing
//! with the simulator's incremental radio model.

use std::collections::{BTreeMap, HashMap};

use mcmi_sim::trace::{DropReason, PktType, TraceOp, TraceRecord};
use mcmi_sim::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expect {
    Received,
    Dropped(DropReason),
}

/// Key identifying one delivery: receiver, packet, channel, end time.
pub type DeliveryKey = (u32, usize, PktType, u32, u64, u16, u64);

#[derive(Debug, Clone, Copy)]
struct Tx {
    node: u32,
    iface: usize,
    channel: u16,
    pkt_type: PktType,
    src: u32,
    seq: u64,
    start: u64,
    end: u64,
}

#[derive(Debug, Clone, Copy)]
struct Delivery {
    rx: (u32, usize),
    tx: usize,
    start: u64,
    end: u64,
    channel: u16,
}

#[derive(Debug, Default)]
pub struct OracleReport {
    pub expected: usize,
    pub transmissions: usize,
    pub mismatches: Vec<String>,
}

fn ceil_airtime(bytes: u32, bitrate: u64) -> u64 {
    let bits = bytes as u64 * 8;
    (bits * 1_000_000).div_ceil(bitrate)
}

/// Payload size of every DATA `(src, seq)`, from the broadcast triggers in
/// the order each node fires them.
fn data_sizes(cfg: &ScenarioConfig) -> HashMap<(u32, u64), u32> {
    let mut per_node: BTreeMap<u32, Vec<(u64, usize, u32)>> = BTreeMap::new();
    for (i, b) in cfg.broadcasts.iter().enumerate() {
        per_node
            .entry(b.node.0)
            .or_default()
            .push((b.at_ms, i, b.payload_bytes));
    }
    let mut sizes = HashMap::new();
    for (node, mut v) in per_node {
        v.sort();
        for (seq, (_, _, size)) in v.into_iter().enumerate() {
            sizes.insert((node, seq as u64), size);
        }
    }
    sizes
}

pub fn check(cfg: &ScenarioConfig, records: &[TraceRecord]) -> OracleReport {
    let pos = cfg.node_positions();
    let near = |a: u32, b: u32| {
        let (pa, pb) = (pos[a as usize], pos[b as usize]);
        ((pa.x - pb.x).powi(2) + (pa.y - pb.y).powi(2)).sqrt() <= cfg.radio_range
    };
    let sizes = data_sizes(cfg);
    let horizon = cfg.duration_ms * 1_000;
    let prop = cfg.propagation_delay_us;

    let mut current: HashMap<(u32, usize), u16> = HashMap::new();
    let mut tunes: HashMap<(u32, usize), Vec<(u64, u16)>> = HashMap::new();
    let mut txs: Vec<Tx> = Vec::new();
    let mut deliveries: Vec<Delivery> = Vec::new();

    for r in records {
        match r.op {
            TraceOp::Tune => {
                current.insert((r.node.0, r.iface), r.channel.0);
                tunes
                    .entry((r.node.0, r.iface))
                    .or_default()
                    .push((r.time.0, r.channel.0));
            }
            TraceOp::Send => {
                let size = match r.pkt_type {
                    PktType::Hello => cfg.hello.size_bytes,
                    PktType::Data => sizes[&(r.src.0, r.seq)],
                };
                let air = ceil_airtime(size, cfg.bitrate);
                let tx = Tx {
                    node: r.node.0,
                    iface: r.iface,
                    channel: r.channel.0,
                    pkt_type: r.pkt_type,
                    src: r.src.0,
                    seq: r.seq,
                    start: r.time.0,
                    end: r.time.0 + air,
                };
                txs.push(tx);
                for other in 0..cfg.num_nodes {
                    if other == tx.node || !near(tx.node, other) {
                        continue;
                    }
                    for i in 0..cfg.num_interfaces {
                        if current.get(&(other, i)) == Some(&tx.channel) {
                            deliveries.push(Delivery {
                                rx: (other, i),
                                tx: txs.len() - 1,
                                start: tx.start + prop,
                                end: tx.start + prop + air,
                                channel: tx.channel,
                            });
                        }
                    }
                }
            }
            TraceOp::Recv | TraceOp::Drop => {}
        }
    }

    // Everything below is per receiving interface, sorted by start time;
    // overlap candidates are found by scanning a window no wider than the
    // longest frame.
    let max_air = txs.iter().map(|x| x.end - x.start).max().unwrap_or(0);
    let mut by_rx: HashMap<(u32, usize), Vec<usize>> = HashMap::new();
    for (k, d) in deliveries.iter().enumerate() {
        by_rx.entry(d.rx).or_default().push(k);
    }
    let mut own_tx: HashMap<(u32, usize), Vec<(u64, u64)>> = HashMap::new();
    for x in &txs {
        own_tx.entry((x.node, x.iface)).or_default().push((x.start, x.end));
    }
    for v in by_rx.values_mut() {
        v.sort_by_key(|&k| deliveries[k].start);
    }
    for v in own_tx.values_mut() {
        v.sort();
    }
    let no_tx = Vec::new();

    let tuned_at = |rx: (u32, usize), t: u64| -> Option<u16> {
        tunes
            .get(&rx)
            .and_then(|v| v.iter().rfind(|(at, _)| *at <= t).map(|(_, c)| *c))
    };
    let sending_at = |own: &[(u64, u64)], t: u64| {
        let hi = own.partition_point(|&(s, _)| s <= t);
        own[..hi]
            .iter()
            .rev()
            .take_while(|&&(s, _)| s + max_air > t)
            .any(|&(s, e)| s <= t && t < e)
    };

    let mut expected: BTreeMap<DeliveryKey, Vec<Expect>> = BTreeMap::new();
    for (rx, list) in &by_rx {
        let own = own_tx.get(rx).unwrap_or(&no_tx);
        let heard = |d: &Delivery| tuned_at(d.rx, d.start) == Some(d.channel) && !sending_at(own, d.start);
        for (pos_k, &k) in list.iter().enumerate() {
            let d = &deliveries[k];
            if d.end > horizon {
                continue;
            }
            let lo = list[..pos_k].partition_point(|&j| deliveries[j].start + max_air <= d.start);
            let overlapped = list[lo..]
                .iter()
                .take_while(|&&j| deliveries[j].start < d.end)
                .filter(|&&j| j != k)
                .map(|&j| &deliveries[j])
                .any(|o| o.channel == d.channel && o.start < d.end && d.start < o.end && heard(o));
            let outcome = if tuned_at(d.rx, d.start) != Some(d.channel) {
                Expect::Dropped(DropReason::Mismatch)
            } else if sending_at(own, d.start) {
                Expect::Dropped(DropReason::Busy)
            } else if overlapped {
                Expect::Dropped(DropReason::Collision)
            } else if own.iter().any(|&(s, _)| d.start < s && s < d.end) {
                Expect::Dropped(DropReason::Busy)
            } else if tunes
                .get(&d.rx)
                .is_some_and(|v| v.iter().any(|&(t, c)| d.start < t && t < d.end && c != d.channel))
            {
                Expect::Dropped(DropReason::Mismatch)
            } else {
                Expect::Received
            };
            let tx = &txs[d.tx];
            expected
                .entry((d.rx.0, d.rx.1, tx.pkt_type, tx.src, tx.seq, d.channel, d.end))
                .or_default()
                .push(outcome);
        }
    }

    let mut actual: BTreeMap<DeliveryKey, Vec<Expect>> = BTreeMap::new();
    for r in records {
        let outcome = match (r.op, r.reason) {
            (TraceOp::Recv, _) => Expect::Received,
            // A node never hears itself; such drops are refused transmissions.
            (TraceOp::Drop, Some(_)) if r.node == r.src => continue,
            (TraceOp::Drop, Some(reason)) => Expect::Dropped(reason),
            _ => continue,
        };
        actual
            .entry((r.node.0, r.iface, r.pkt_type, r.src.0, r.seq, r.channel.0, r.time.0))
            .or_default()
            .push(outcome);
    }

    let mut report = OracleReport {
        expected: expected.values().map(Vec::len).sum(),
        transmissions: txs.len(),
        mismatches: Vec::new(),
    };
    for v in expected.values_mut().chain(actual.values_mut()) {
        v.sort();
    }
    for (key, exp) in &expected {
        match actual.get(key) {
            Some(act) if act == exp => {}
            other => report
                .mismatches
                .push(format!("{:?}: expected {:?}, trace has {:?}", key, exp, other)),
        }
    }
    for (key, act) in &actual {
        if !expected.contains_key(key) {
            report.mismatches.push(format!("{:?}: unexpected {:?}", key, act));
        }
    }
    report
}
