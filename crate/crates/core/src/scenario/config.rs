//! Scenario documents (TOML), validation and defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{RngStreams, SimTime};
use crate::hello::HelloConfig;
use crate::policy::ChannelPolicy;
use crate::radio::{
    airtime, ChannelId, NodeId, Position, DEFAULT_BITRATE_BPS, DEFAULT_NUM_CHANNELS, DEFAULT_PROPAGATION_DELAY_US,
    DEFAULT_RADIO_RANGE_M,
};

pub const DEFAULT_NUM_INTERFACES: usize = 3;
pub const DEFAULT_DURATION_MS: u64 = 10_000;
pub const DEFAULT_BROADCAST_BYTES: u32 = 64;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Syntax(String),
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.into(),
            message: message.into(),
        }
    }

    /// The offending key, when the error concerns one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { key, .. } => Some(key),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PositionSpec {
    Explicit(Vec<Position>),
    /// Row-major grid with `columns` nodes per row.
    Grid {
        columns: u32,
        spacing: f64,
    },
    /// Uniform in `[0, width] x [0, height]`, drawn from the scenario seed.
    Random {
        width: f64,
        height: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TuningOverride {
    pub node: NodeId,
    /// `None` applies to every interface of the node.
    pub iface: Option<usize>,
    pub channel: ChannelId,
}

/// Channels the interfaces are tuned to before any policy acts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TuningSpec {
    pub default_channel: ChannelId,
    /// Interface `i` starts on `default_channel + i` (mod channel count).
    pub by_interface: bool,
    pub overrides: Vec<TuningOverride>,
}

impl TuningSpec {
    pub fn initial_channel(&self, node: NodeId, iface: usize, num_channels: u16) -> ChannelId {
        let base = if self.by_interface {
            ChannelId(((usize::from(self.default_channel.0) + iface) % usize::from(num_channels)) as u16)
        } else {
            self.default_channel
        };
        self.overrides
            .iter()
            .rev()
            .find(|o| o.node == node && o.iface.is_none_or(|i| i == iface))
            .map_or(base, |o| o.channel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BroadcastSpec {
    pub node: NodeId,
    pub at_ms: u64,
    pub payload_bytes: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub num_nodes: u32,
    pub num_interfaces: usize,
    pub num_channels: u16,
    pub radio_range: f64,
    pub bitrate: u64,
    pub propagation_delay_us: u64,
    pub duration_ms: u64,
    pub seed: u64,
    pub trace_path: Option<PathBuf>,
    pub hello: HelloConfig,
    pub positions: PositionSpec,
    pub tuning: TuningSpec,
    pub policy: ChannelPolicy,
    pub broadcasts: Vec<BroadcastSpec>,
}

impl ScenarioConfig {
    /// A config with every default applied.
    pub fn with_nodes(num_nodes: u32) -> Self {
        Self {
            num_nodes,
            num_interfaces: DEFAULT_NUM_INTERFACES,
            num_channels: DEFAULT_NUM_CHANNELS,
            radio_range: DEFAULT_RADIO_RANGE_M,
            bitrate: DEFAULT_BITRATE_BPS,
            propagation_delay_us: DEFAULT_PROPAGATION_DELAY_US,
            duration_ms: DEFAULT_DURATION_MS,
            seed: 0,
            trace_path: None,
            hello: HelloConfig::default(),
            positions: PositionSpec::Explicit(vec![Position::new(0.0, 0.0); num_nodes as usize]),
            tuning: TuningSpec::default(),
            policy: ChannelPolicy::Default,
            broadcasts: Vec::new(),
        }
    }

    pub fn duration(&self) -> SimTime {
        SimTime::from_millis(self.duration_ms)
    }

    pub fn propagation_delay(&self) -> SimTime {
        SimTime::from_micros(self.propagation_delay_us)
    }

    pub fn hello_airtime(&self) -> SimTime {
        airtime(self.hello.size_bytes, self.bitrate)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.num_nodes).map(NodeId)
    }

    /// Materializes node positions.
    pub fn node_positions(&self) -> Vec<Position> {
        match &self.positions {
            PositionSpec::Explicit(v) => v.clone(),
            PositionSpec::Grid { columns, spacing } => (0..self.num_nodes)
                .map(|i| Position::new(f64::from(i % columns) * spacing, f64::from(i / columns) * spacing))
                .collect(),
            PositionSpec::Random { width, height } => {
                let mut rng = RngStreams::new(self.seed).stream(RngStreams::TOPOLOGY_STREAM);
                (0..self.num_nodes)
                    .map(|_| Position::new(rng.gen_range(0.0..=*width), rng.gen_range(0.0..=*height)))
                    .collect()
            }
        }
    }

    /// Channel of each interface at t = 0, after the static policy has
    /// been installed.
    pub fn channel_at_start(&self, node: NodeId, iface: usize) -> ChannelId {
        self.policy
            .static_channel(node)
            .unwrap_or_else(|| self.tuning.initial_channel(node, iface, self.num_channels))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_nodes < 1 {
            return Err(ConfigError::invalid("num_nodes", "must be at least 1"));
        }
        if self.num_interfaces < 1 {
            return Err(ConfigError::invalid("num_interfaces", "must be at least 1"));
        }
        if self.num_channels < 1 {
            return Err(ConfigError::invalid("num_channels", "must be at least 1"));
        }
        if !self.radio_range.is_finite() || self.radio_range < 0.0 {
            return Err(ConfigError::invalid(
                "radio_range",
                "must be a finite, non-negative distance",
            ));
        }
        if self.bitrate == 0 {
            return Err(ConfigError::invalid("bitrate", "must be positive"));
        }
        if self.hello.interval_ms == 0 {
            return Err(ConfigError::invalid("hello.interval_ms", "must be positive"));
        }
        if self.hello.allowed_hello_loss < 1 {
            return Err(ConfigError::invalid("hello.allowed_hello_loss", "must be at least 1"));
        }
        if self.hello.size_bytes == 0 {
            return Err(ConfigError::invalid("hello.size_bytes", "must be positive"));
        }
        match &self.positions {
            PositionSpec::Explicit(v) => {
                if v.len() != self.num_nodes as usize {
                    return Err(ConfigError::invalid(
                        "positions.coords",
                        format!("{} positions given for {} nodes", v.len(), self.num_nodes),
                    ));
                }
                if let Some(i) = v.iter().position(|p| !p.x.is_finite() || !p.y.is_finite()) {
                    return Err(ConfigError::invalid(
                        format!("positions.coords[{}]", i),
                        "coordinates must be finite",
                    ));
                }
            }
            PositionSpec::Grid { columns, spacing } => {
                if *columns < 1 {
                    return Err(ConfigError::invalid("positions.columns", "must be at least 1"));
                }
                if !spacing.is_finite() || *spacing < 0.0 {
                    return Err(ConfigError::invalid(
                        "positions.spacing",
                        "must be finite and non-negative",
                    ));
                }
            }
            PositionSpec::Random { width, height } => {
                if !width.is_finite() || *width < 0.0 {
                    return Err(ConfigError::invalid(
                        "positions.width",
                        "must be finite and non-negative",
                    ));
                }
                if !height.is_finite() || *height < 0.0 {
                    return Err(ConfigError::invalid(
                        "positions.height",
                        "must be finite and non-negative",
                    ));
                }
            }
        }
        let check_ch = |key: String, c: ChannelId| -> Result<(), ConfigError> {
            if c.0 >= self.num_channels {
                Err(ConfigError::invalid(
                    key,
                    format!("channel {} out of range (num_channels = {})", c, self.num_channels),
                ))
            } else {
                Ok(())
            }
        };
        let check_node = |key: String, n: NodeId| -> Result<(), ConfigError> {
            if n.0 >= self.num_nodes {
                Err(ConfigError::invalid(
                    key,
                    format!("node {} out of range (num_nodes = {})", n, self.num_nodes),
                ))
            } else {
                Ok(())
            }
        };
        check_ch("tuning.default_channel".into(), self.tuning.default_channel)?;
        for (i, o) in self.tuning.overrides.iter().enumerate() {
            check_node(format!("tuning.interfaces[{}].node", i), o.node)?;
            check_ch(format!("tuning.interfaces[{}].channel", i), o.channel)?;
            if let Some(iface) = o.iface {
                if iface >= self.num_interfaces {
                    return Err(ConfigError::invalid(
                        format!("tuning.interfaces[{}].iface", i),
                        format!(
                            "interface {} out of range (num_interfaces = {})",
                            iface, self.num_interfaces
                        ),
                    ));
                }
            }
        }
        self.policy
            .validate(self.num_nodes, self.num_channels)
            .map_err(|(key, message)| ConfigError::Invalid { key, message })?;
        for (i, b) in self.broadcasts.iter().enumerate() {
            check_node(format!("broadcast[{}].node", i), b.node)?;
            if b.payload_bytes == 0 {
                return Err(ConfigError::invalid(
                    format!("broadcast[{}].payload_bytes", i),
                    "must be positive",
                ));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let cfg = raw.into_config()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Serializes with every field explicit.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(&RawScenario::from_config(self)).expect("scenario serializes")
    }
}

/// Parses a duration such as `30s`, `1500ms` or `250us`. A bare number is
/// taken as milliseconds.
pub fn parse_duration_ms(text: &str) -> Result<u64, String> {
    let text = text.trim();
    let (digits, scale_us) = if let Some(d) = text.strip_suffix("ms") {
        (d, 1_000)
    } else if let Some(d) = text.strip_suffix("us") {
        (d, 1)
    } else if let Some(d) = text.strip_suffix('s') {
        (d, 1_000_000)
    } else {
        (text, 1_000)
    };
    let n: u64 = digits.parse().map_err(|_| format!("invalid duration {:?}", text))?;
    let us = n
        .checked_mul(scale_us)
        .ok_or_else(|| format!("duration {:?} too large", text))?;
    if us % 1_000 != 0 {
        return Err(format!("duration {:?} is not a whole number of milliseconds", text));
    }
    Ok(us / 1_000)
}

// On-disk form. Everything optional except `num_nodes`; unknown keys are rejected.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    num_nodes: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    num_interfaces: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    num_channels: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    radio_range: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bitrate: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    propagation_delay_us: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    duration_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hello: Option<RawHello>,
    #[serde(skip_serializing_if = "Option::is_none")]
    positions: Option<RawPositions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tuning: Option<RawTuning>,
    #[serde(skip_serializing_if = "Option::is_none")]
    policy: Option<RawPolicy>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    broadcast: Vec<RawBroadcast>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHello {
    enabled: Option<bool>,
    interval_ms: Option<u64>,
    jitter_ms: Option<u64>,
    allowed_hello_loss: Option<u32>,
    size_bytes: Option<u32>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPositions {
    mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    coords: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    columns: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    height: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTuning {
    #[serde(skip_serializing_if = "Option::is_none")]
    default_channel: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    by_interface: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    interfaces: Vec<RawIfaceTuning>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIfaceTuning {
    node: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    iface: Option<usize>,
    channel: u16,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    channel: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    map: Option<BTreeMap<String, u16>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fallback: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stamps: Option<BTreeMap<String, u16>>,
    /// Reserved for per-node policy overrides; must be empty.
    #[serde(skip_serializing_if = "Option::is_none")]
    overrides: Option<toml::Table>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBroadcast {
    node: u32,
    at_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    payload_bytes: Option<u32>,
}

fn node_map(key: &str, raw: BTreeMap<String, u16>) -> Result<BTreeMap<NodeId, ChannelId>, ConfigError> {
    raw.into_iter()
        .map(|(k, v)| {
            k.parse::<u32>()
                .map(|n| (NodeId(n), ChannelId(v)))
                .map_err(|_| ConfigError::invalid(format!("{}.{}", key, k), "node id must be a non-negative integer"))
        })
        .collect()
}

fn reject(key: &str, present: bool, kind: &str) -> Result<(), ConfigError> {
    if present {
        Err(ConfigError::invalid(key, format!("not valid for {:?}", kind)))
    } else {
        Ok(())
    }
}

impl RawScenario {
    fn into_config(self) -> Result<ScenarioConfig, ConfigError> {
        let mut cfg = ScenarioConfig::with_nodes(self.num_nodes);
        cfg.num_interfaces = self.num_interfaces.unwrap_or(cfg.num_interfaces);
        cfg.num_channels = self.num_channels.unwrap_or(cfg.num_channels);
        cfg.radio_range = self.radio_range.unwrap_or(cfg.radio_range);
        cfg.bitrate = self.bitrate.unwrap_or(cfg.bitrate);
        cfg.propagation_delay_us = self.propagation_delay_us.unwrap_or(cfg.propagation_delay_us);
        cfg.duration_ms = self.duration_ms.unwrap_or(cfg.duration_ms);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.trace_path = self.trace_path;

        if let Some(h) = self.hello {
            let d = HelloConfig::default();
            cfg.hello = HelloConfig {
                enabled: h.enabled.unwrap_or(d.enabled),
                interval_ms: h.interval_ms.unwrap_or(d.interval_ms),
                jitter_ms: h.jitter_ms.unwrap_or(d.jitter_ms),
                allowed_hello_loss: h.allowed_hello_loss.unwrap_or(d.allowed_hello_loss),
                size_bytes: h.size_bytes.unwrap_or(d.size_bytes),
            };
        }

        cfg.positions = match self.positions {
            None if self.num_nodes <= 1 => cfg.positions,
            None => {
                return Err(ConfigError::invalid(
                    "positions",
                    "missing: give explicit coords, a grid or a random area",
                ))
            }
            Some(p) => {
                let need =
                    |v: Option<f64>, key: &str| v.ok_or_else(|| ConfigError::invalid(key, "required for this mode"));
                match p.mode.as_str() {
                    "explicit" => {
                        reject("positions.columns", p.columns.is_some(), "explicit")?;
                        reject("positions.spacing", p.spacing.is_some(), "explicit")?;
                        reject("positions.width", p.width.is_some(), "explicit")?;
                        reject("positions.height", p.height.is_some(), "explicit")?;
                        let coords = p
                            .coords
                            .ok_or_else(|| ConfigError::invalid("positions.coords", "required for this mode"))?;
                        PositionSpec::Explicit(coords.into_iter().map(|[x, y]| Position::new(x, y)).collect())
                    }
                    "grid" => {
                        reject("positions.coords", p.coords.is_some(), "grid")?;
                        reject("positions.width", p.width.is_some(), "grid")?;
                        reject("positions.height", p.height.is_some(), "grid")?;
                        PositionSpec::Grid {
                            columns: p
                                .columns
                                .ok_or_else(|| ConfigError::invalid("positions.columns", "required for this mode"))?,
                            spacing: need(p.spacing, "positions.spacing")?,
                        }
                    }
                    "random" => {
                        reject("positions.coords", p.coords.is_some(), "random")?;
                        reject("positions.columns", p.columns.is_some(), "random")?;
                        reject("positions.spacing", p.spacing.is_some(), "random")?;
                        PositionSpec::Random {
                            width: need(p.width, "positions.width")?,
                            height: need(p.height, "positions.height")?,
                        }
                    }
                    other => {
                        return Err(ConfigError::invalid(
                            "positions.mode",
                            format!("unknown mode {:?} (expected explicit, grid or random)", other),
                        ))
                    }
                }
            }
        };

        if let Some(t) = self.tuning {
            cfg.tuning = TuningSpec {
                default_channel: ChannelId(t.default_channel.unwrap_or(0)),
                by_interface: t.by_interface.unwrap_or(false),
                overrides: t
                    .interfaces
                    .into_iter()
                    .map(|o| TuningOverride {
                        node: NodeId(o.node),
                        iface: o.iface,
                        channel: ChannelId(o.channel),
                    })
                    .collect(),
            };
        }

        if let Some(p) = self.policy {
            if p.overrides.as_ref().is_some_and(|t| !t.is_empty()) {
                return Err(ConfigError::invalid(
                    "policy.overrides",
                    "per-node policy overrides are reserved and not supported yet",
                ));
            }
            let kind = p.kind.as_str();
            cfg.policy = match kind {
                "default" => {
                    reject("policy.channel", p.channel.is_some(), kind)?;
                    reject("policy.map", p.map.is_some(), kind)?;
                    reject("policy.fallback", p.fallback.is_some(), kind)?;
                    reject("policy.stamps", p.stamps.is_some(), kind)?;
                    ChannelPolicy::Default
                }
                "explicit_stamp" => {
                    reject("policy.map", p.map.is_some(), kind)?;
                    reject("policy.fallback", p.fallback.is_some(), kind)?;
                    reject("policy.stamps", p.stamps.is_some(), kind)?;
                    let c = p
                        .channel
                        .ok_or_else(|| ConfigError::invalid("policy.channel", "required for \"explicit_stamp\""))?;
                    ChannelPolicy::ExplicitStamp(ChannelId(c))
                }
                "static_map" => {
                    reject("policy.channel", p.channel.is_some(), kind)?;
                    reject("policy.stamps", p.stamps.is_some(), kind)?;
                    let fallback = p
                        .fallback
                        .ok_or_else(|| ConfigError::invalid("policy.fallback", "required for \"static_map\""))?;
                    ChannelPolicy::StaticMap {
                        map: node_map("policy.map", p.map.unwrap_or_default())?,
                        fallback: ChannelId(fallback),
                    }
                }
                "header_driven" => {
                    reject("policy.channel", p.channel.is_some(), kind)?;
                    reject("policy.map", p.map.is_some(), kind)?;
                    reject("policy.fallback", p.fallback.is_some(), kind)?;
                    ChannelPolicy::HeaderDriven {
                        stamps: node_map("policy.stamps", p.stamps.unwrap_or_default())?,
                    }
                }
                other => {
                    return Err(ConfigError::invalid(
                        "policy.kind",
                        format!(
                            "unknown policy {:?} (expected default, explicit_stamp, static_map or header_driven)",
                            other
                        ),
                    ))
                }
            };
        }

        cfg.broadcasts = self
            .broadcast
            .into_iter()
            .map(|b| BroadcastSpec {
                node: NodeId(b.node),
                at_ms: b.at_ms,
                payload_bytes: b.payload_bytes.unwrap_or(DEFAULT_BROADCAST_BYTES),
            })
            .collect();
        Ok(cfg)
    }

    fn from_config(cfg: &ScenarioConfig) -> Self {
        let positions = match &cfg.positions {
            PositionSpec::Explicit(v) => RawPositions {
                mode: "explicit".into(),
                coords: Some(v.iter().map(|p| [p.x, p.y]).collect()),
                ..Default::default()
            },
            PositionSpec::Grid { columns, spacing } => RawPositions {
                mode: "grid".into(),
                columns: Some(*columns),
                spacing: Some(*spacing),
                ..Default::default()
            },
            PositionSpec::Random { width, height } => RawPositions {
                mode: "random".into(),
                width: Some(*width),
                height: Some(*height),
                ..Default::default()
            },
        };
        let to_raw_map = |m: &BTreeMap<NodeId, ChannelId>| m.iter().map(|(n, c)| (n.0.to_string(), c.0)).collect();
        let policy = match &cfg.policy {
            ChannelPolicy::Default => RawPolicy {
                kind: "default".into(),
                ..Default::default()
            },
            ChannelPolicy::ExplicitStamp(c) => RawPolicy {
                kind: "explicit_stamp".into(),
                channel: Some(c.0),
                ..Default::default()
            },
            ChannelPolicy::StaticMap { map, fallback } => RawPolicy {
                kind: "static_map".into(),
                map: Some(to_raw_map(map)),
                fallback: Some(fallback.0),
                ..Default::default()
            },
            ChannelPolicy::HeaderDriven { stamps } => RawPolicy {
                kind: "header_driven".into(),
                stamps: Some(to_raw_map(stamps)),
                ..Default::default()
            },
        };
        RawScenario {
            num_nodes: cfg.num_nodes,
            num_interfaces: Some(cfg.num_interfaces),
            num_channels: Some(cfg.num_channels),
            radio_range: Some(cfg.radio_range),
            bitrate: Some(cfg.bitrate),
            propagation_delay_us: Some(cfg.propagation_delay_us),
            duration_ms: Some(cfg.duration_ms),
            seed: Some(cfg.seed),
            trace_path: cfg.trace_path.clone(),
            hello: Some(RawHello {
                enabled: Some(cfg.hello.enabled),
                interval_ms: Some(cfg.hello.interval_ms),
                jitter_ms: Some(cfg.hello.jitter_ms),
                allowed_hello_loss: Some(cfg.hello.allowed_hello_loss),
                size_bytes: Some(cfg.hello.size_bytes),
            }),
            positions: Some(positions),
            tuning: Some(RawTuning {
                default_channel: Some(cfg.tuning.default_channel.0),
                by_interface: Some(cfg.tuning.by_interface),
                interfaces: cfg
                    .tuning
                    .overrides
                    .iter()
                    .map(|o| RawIfaceTuning {
                        node: o.node.0,
                        iface: o.iface,
                        channel: o.channel.0,
                    })
                    .collect(),
            }),
            policy: Some(policy),
            broadcast: cfg
                .broadcasts
                .iter()
                .map(|b| RawBroadcast {
                    node: b.node.0,
                    at_ms: b.at_ms,
                    payload_bytes: Some(b.payload_bytes),
                })
                .collect(),
        }
    }
}
