//! Line-oriented trace records and the post-hoc trace audit.
//!
//! One record per line, single-space separated:
//!
//! ```text
//! <op> <time> <node> <iface> <ch> <pkt_type> <src> <seq> [<reason>]
//! ```
//!
//! `op` is `s` (send), `r` (receive), `d` (drop, with a reason token) or
//! `tune`. Times are integer microseconds. Tune records use the sentinel
//! packet fields `HELLO <node> 0`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::engine::SimTime;
use crate::radio::{ChannelId, IgnoreReason, NodeId, ReceptionOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TraceOp {
    Send,
    Recv,
    Drop,
    Tune,
}

impl TraceOp {
    pub fn token(self) -> &'static str {
        match self {
            TraceOp::Send => "s",
            TraceOp::Recv => "r",
            TraceOp::Drop => "d",
            TraceOp::Tune => "tune",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PktType {
    Hello,
    Data,
}

impl PktType {
    pub fn token(self) -> &'static str {
        match self {
            PktType::Hello => "HELLO",
            PktType::Data => "DATA",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DropReason {
    Collision,
    Busy,
    Mismatch,
}

impl DropReason {
    pub fn token(self) -> &'static str {
        match self {
            DropReason::Collision => "COLLISION",
            DropReason::Busy => "BUSY",
            DropReason::Mismatch => "MISMATCH",
        }
    }

    pub fn from_outcome(outcome: ReceptionOutcome) -> Option<DropReason> {
        match outcome {
            ReceptionOutcome::Received => None,
            ReceptionOutcome::Collided => Some(DropReason::Collision),
            ReceptionOutcome::Ignored(IgnoreReason::Busy) => Some(DropReason::Busy),
            ReceptionOutcome::Ignored(IgnoreReason::Mismatch) => Some(DropReason::Mismatch),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TraceRecord {
    pub op: TraceOp,
    pub time: SimTime,
    pub node: NodeId,
    pub iface: usize,
    pub channel: ChannelId,
    pub pkt_type: PktType,
    pub src: NodeId,
    pub seq: u64,
    pub reason: Option<DropReason>,
}

impl TraceRecord {
    pub fn tune(time: SimTime, node: NodeId, iface: usize, channel: ChannelId) -> Self {
        Self {
            op: TraceOp::Tune,
            time,
            node,
            iface,
            channel,
            pkt_type: PktType::Hello,
            src: node,
            seq: 0,
            reason: None,
        }
    }
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {} {} {}",
            self.op.token(),
            self.time,
            self.node,
            self.iface,
            self.channel,
            self.pkt_type.token(),
            self.src,
            self.seq
        )?;
        if let Some(reason) = self.reason {
            write!(f, " {}", reason.token())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct RecordParseError(String);

fn parse_uint<T: FromStr>(field: &str, tok: &str) -> Result<T, RecordParseError> {
    let canonical = !tok.is_empty() && tok.bytes().all(|b| b.is_ascii_digit()) && (tok == "0" || !tok.starts_with('0'));
    if !canonical {
        return Err(RecordParseError(format!("bad {}: {:?}", field, tok)));
    }
    tok.parse()
        .map_err(|_| RecordParseError(format!("{} out of range: {:?}", field, tok)))
}

impl FromStr for TraceRecord {
    type Err = RecordParseError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let fields: Vec<&str> = line.split(' ').collect();
        if fields.len() != 8 && fields.len() != 9 {
            return Err(RecordParseError(format!(
                "expected 8 or 9 fields, found {}",
                fields.len()
            )));
        }
        let op = match fields[0] {
            "s" => TraceOp::Send,
            "r" => TraceOp::Recv,
            "d" => TraceOp::Drop,
            "tune" => TraceOp::Tune,
            other => return Err(RecordParseError(format!("unknown op {:?}", other))),
        };
        let pkt_type = match fields[5] {
            "HELLO" => PktType::Hello,
            "DATA" => PktType::Data,
            other => return Err(RecordParseError(format!("unknown packet type {:?}", other))),
        };
        let reason = match fields.get(8) {
            None => None,
            Some(&"COLLISION") => Some(DropReason::Collision),
            Some(&"BUSY") => Some(DropReason::Busy),
            Some(&"MISMATCH") => Some(DropReason::Mismatch),
            Some(other) => return Err(RecordParseError(format!("unknown drop reason {:?}", other))),
        };
        if (op == TraceOp::Drop) != reason.is_some() {
            return Err(RecordParseError(
                "drop records, and only drop records, carry a reason".into(),
            ));
        }
        Ok(TraceRecord {
            op,
            time: SimTime(parse_uint("time", fields[1])?),
            node: NodeId(parse_uint("node", fields[2])?),
            iface: parse_uint("iface", fields[3])?,
            channel: ChannelId(parse_uint("channel", fields[4])?),
            pkt_type,
            src: NodeId(parse_uint("src", fields[6])?),
            seq: parse_uint("seq", fields[7])?,
            reason,
        })
    }
}

/// Appends records to any writer.
pub struct TraceWriter<W: Write> {
    out: W,
    lines: u64,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out, lines: 0 }
    }

    pub fn emit(&mut self, record: &TraceRecord) -> io::Result<()> {
        writeln!(self.out, "{}", record)?;
        self.lines += 1;
        Ok(())
    }

    pub fn lines(&self) -> u64 {
        self.lines
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("reading trace: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    /// Timestamp smaller than the previous record's.
    TimeRegression,
    /// `r` without an earlier `s` of the same packet on the same channel.
    UnmatchedReceive,
    /// `r` on a channel the receiving interface was not tuned to.
    ChannelMismatch,
    /// `r` on an interface with no tune history.
    UnknownTuning,
    /// A Hello firing with a number of `s` records different from the
    /// interface count.
    Replication,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub line: usize,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {:?}: {}", self.line, self.kind, self.detail)
    }
}

/// Extra checks that need facts not present in the trace itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct AuditOptions {
    /// Expected Hello copies per firing.
    pub expected_interfaces: Option<usize>,
    /// Hello airtime, used with `horizon` to recognise firings cut off by the
    /// end of the run.
    pub hello_airtime: SimTime,
    pub horizon: Option<SimTime>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditReport {
    pub lines: usize,
    pub sends: usize,
    pub receives: usize,
    pub drops: usize,
    pub tunes: usize,
    pub hello_firings: usize,
    /// Firings whose later copies fall past the horizon.
    pub truncated_firings: usize,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

struct Firing {
    line: usize,
    first: SimTime,
    copies: usize,
}

/// Replays a trace and reports rule violations. Malformed lines abort the
/// audit with their line number.
pub fn audit<R: BufRead>(reader: R, opts: &AuditOptions) -> Result<AuditReport, AuditError> {
    let mut report = AuditReport::default();
    let mut last_time = SimTime::ZERO;
    let mut sent: HashSet<(PktType, NodeId, u64, ChannelId)> = HashSet::new();
    let mut tuning: HashMap<(NodeId, usize), ChannelId> = HashMap::new();
    let mut firings: HashMap<(NodeId, u64), Firing> = HashMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let rec: TraceRecord = line.parse().map_err(|e: RecordParseError| AuditError::Malformed {
            line: line_no,
            message: e.0,
        })?;
        report.lines += 1;
        if rec.time < last_time {
            report.violations.push(Violation {
                line: line_no,
                kind: ViolationKind::TimeRegression,
                detail: format!("time {} after {}", rec.time, last_time),
            });
        }
        last_time = last_time.max(rec.time);

        match rec.op {
            TraceOp::Send => {
                report.sends += 1;
                sent.insert((rec.pkt_type, rec.src, rec.seq, rec.channel));
                if rec.pkt_type == PktType::Hello {
                    firings
                        .entry((rec.src, rec.seq))
                        .and_modify(|f| f.copies += 1)
                        .or_insert(Firing {
                            line: line_no,
                            first: rec.time,
                            copies: 1,
                        });
                }
            }
            TraceOp::Tune => {
                report.tunes += 1;
                tuning.insert((rec.node, rec.iface), rec.channel);
            }
            TraceOp::Drop => report.drops += 1,
            TraceOp::Recv => {
                report.receives += 1;
                if !sent.contains(&(rec.pkt_type, rec.src, rec.seq, rec.channel)) {
                    report.violations.push(Violation {
                        line: line_no,
                        kind: ViolationKind::UnmatchedReceive,
                        detail: format!(
                            "no earlier send of {} {}/{} on channel {}",
                            rec.pkt_type.token(),
                            rec.src,
                            rec.seq,
                            rec.channel
                        ),
                    });
                }
                match tuning.get(&(rec.node, rec.iface)) {
                    None => report.violations.push(Violation {
                        line: line_no,
                        kind: ViolationKind::UnknownTuning,
                        detail: format!("node {} iface {} has no tune record", rec.node, rec.iface),
                    }),
                    Some(&tuned) if tuned != rec.channel => report.violations.push(Violation {
                        line: line_no,
                        kind: ViolationKind::ChannelMismatch,
                        detail: format!(
                            "received on channel {} while node {} iface {} tuned to {}",
                            rec.channel, rec.node, rec.iface, tuned
                        ),
                    }),
                    Some(_) => {}
                }
            }
        }
    }

    report.hello_firings = firings.len();
    if let Some(expected) = opts.expected_interfaces {
        let mut bad: Vec<(&(NodeId, u64), &Firing)> = Vec::new();
        for (key, f) in &firings {
            if f.copies == expected {
                continue;
            }
            let last_copy = f.first + opts.hello_airtime * (expected.saturating_sub(1) as u64);
            if f.copies < expected && opts.horizon.is_some_and(|h| last_copy > h) {
                report.truncated_firings += 1;
            } else {
                bad.push((key, f));
            }
        }
        bad.sort_by_key(|(_, f)| f.line);
        for ((src, seq), f) in bad {
            report.violations.push(Violation {
                line: f.line,
                kind: ViolationKind::Replication,
                detail: format!("hello {}/{} sent {} times, expected {}", src, seq, f.copies, expected),
            });
        }
    }
    report.violations.sort_by_key(|v| v.line);
    Ok(report)
}

pub fn audit_file(path: &Path, opts: &AuditOptions) -> Result<AuditReport, AuditError> {
    audit(BufReader::new(File::open(path)?), opts)
}
