#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use mcmi_sim::trace::TraceRecord;
use mcmi_sim::{run_in_memory, RunSummary, ScenarioConfig};

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

pub fn load(name: &str) -> ScenarioConfig {
    let path = scenario_dir().join(name);
    ScenarioConfig::from_path(&path).unwrap_or_else(|e| panic!("{}: {}", path.display(), e))
}

/// Every scenario shipped in `scenarios/`, sorted by file name.
pub fn suite() -> Vec<(String, ScenarioConfig)> {
    let mut names: Vec<String> = std::fs::read_dir(scenario_dir())
        .expect("scenarios dir")
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".toml"))
        .collect();
    names.sort();
    names.into_iter().map(|n| (n.clone(), load(&n))).collect()
}

pub fn run(cfg: &ScenarioConfig) -> (RunSummary, Vec<u8>) {
    let mut cfg = cfg.clone();
    cfg.trace_path = None;
    run_in_memory(cfg).expect("run succeeds")
}

pub fn parse(trace: &[u8]) -> Vec<TraceRecord> {
    std::str::from_utf8(trace)
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap_or_else(|e| panic!("bad line {:?}: {}", l, e)))
        .collect()
}
