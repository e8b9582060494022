//! Run manifests: the fully resolved inputs of a run plus its fingerprint.

use serde::Serialize;

use crate::config::{ScenarioConfig, SweepSpec};
use crate::sim::RunOutput;

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    protocol: &'a str,
    seed: u64,
    trace_digest: &'a str,
    events_fired: u64,
    scenario: &'a ScenarioConfig,
}

#[derive(Serialize)]
struct SweepManifest<'a> {
    tool: &'static str,
    version: &'static str,
    cells: usize,
    spec: &'a SweepSpec,
}

/// TOML text that reproduces `out` when its `scenario` table is fed back to `run`.
pub fn run_manifest(cfg: &ScenarioConfig, out: &RunOutput) -> String {
    toml::to_string(&RunManifest {
        tool: "xlsim",
        version: env!("CARGO_PKG_VERSION"),
        protocol: &out.protocol,
        seed: out.seed,
        trace_digest: &out.trace_digest,
        events_fired: out.events_fired,
        scenario: cfg,
    })
    .expect("manifest serializes")
}

pub fn sweep_manifest(spec: &SweepSpec, cells: usize) -> String {
    toml::to_string(&SweepManifest {
        tool: "xlsim",
        version: env!("CARGO_PKG_VERSION"),
        cells,
        spec,
    })
    .expect("manifest serializes")
}
