use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use xlsim::config::{Protocol, ScenarioConfig, SweepSpec};
use xlsim::manifest::{run_manifest, sweep_manifest};
use xlsim::report::{write_aggregates_file, write_runs_file, write_series_file};
use xlsim::sim::Simulation;
use xlsim::sweep::run_sweep;

#[derive(Parser)]
#[command(name = "xlsim", version, about = "Cross-layer MANET simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write metrics.csv and manifest.toml.
    Run {
        scenario: PathBuf,
        /// mcba or aodv-baseline; replaces the scenario's protocol.
        #[arg(long)]
        protocol: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Also write ts_<metric>.csv sampled every this many seconds.
        #[arg(long, value_name = "SECONDS")]
        timeseries: Option<f64>,
        #[arg(long, value_name = "BOOL")]
        link_filter: Option<bool>,
        #[arg(long, value_name = "BOOL")]
        power_control: Option<bool>,
        #[arg(long, value_name = "BOOL")]
        congestion_control: Option<bool>,
        #[arg(long, value_name = "BOOL")]
        admission_control: Option<bool>,
    },
    /// Run every cell of a sweep and write per-run and median tables.
    Sweep {
        spec: PathBuf,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Check a scenario file without running it.
    Validate { scenario: PathBuf },
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn invalid<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Invalid(e.to_string())
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    scenario: &Path,
    protocol: Option<String>,
    seed: Option<u64>,
    out: &Path,
    timeseries: Option<f64>,
    toggles: [Option<bool>; 4],
) -> Result<(), Failure> {
    let mut cfg = ScenarioConfig::load(scenario).map_err(invalid)?;
    if let Some(p) = protocol {
        cfg.protocol = Protocol::parse(&p)
            .ok_or_else(|| Failure::Invalid(format!("--protocol: unknown protocol '{p}' (mcba or aodv-baseline)")))?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(dt) = timeseries {
        cfg.metrics.sample_interval_s = dt;
    }
    let [lf, pc, cc, ac] = toggles;
    let f = &mut cfg.features;
    f.link_filter = lf.or(f.link_filter);
    f.power_control = pc.or(f.power_control);
    f.congestion_control = cc.or(f.congestion_control);
    f.admission_control = ac.or(f.admission_control);
    cfg.validate().map_err(invalid)?;

    let output = Simulation::new(&cfg).run().map_err(runtime)?;
    create_dir(out)?;
    write_runs_file(&out.join("metrics.csv"), &[output.row()]).map_err(runtime)?;
    write_file(&out.join("manifest.toml"), &run_manifest(&cfg, &output))?;
    for (label, samples) in &output.report.series {
        write_series_file(&out.join(format!("ts_{label}.csv")), samples).map_err(runtime)?;
    }
    let r = &output.report;
    println!(
        "{} {} seed={} sent={} delivered={} dropped={} pdr={:.4} digest={}",
        output.scenario_id,
        output.protocol,
        output.seed,
        r.sent,
        r.delivered,
        r.dropped,
        r.pdr_or_zero(),
        output.trace_digest
    );
    let causes: Vec<String> = xlsim::metrics::DropCause::ALL
        .iter()
        .filter(|c| r.drops(**c) > 0)
        .map(|c| format!("{}={}", c.name(), r.drops(*c)))
        .collect();
    if !causes.is_empty() {
        println!("drops: {}", causes.join(" "));
    }
    Ok(())
}

fn cmd_sweep(spec_path: &Path, jobs: Option<usize>, out: &Path) -> Result<(), Failure> {
    let spec = SweepSpec::load(spec_path).map_err(invalid)?;
    let result = run_sweep(&spec, jobs).map_err(runtime)?;
    create_dir(out)?;
    write_runs_file(&out.join("metrics.csv"), &result.rows()).map_err(runtime)?;
    write_aggregates_file(&out.join("aggregate.csv"), &result.aggregates).map_err(runtime)?;
    write_file(&out.join("manifest.toml"), &sweep_manifest(&spec, result.runs.len()))?;
    println!("{} runs, {} aggregate rows written to {}", result.runs.len(), result.aggregates.len(), out.display());
    Ok(())
}

/// Accepts either a scenario or a sweep spec (anything with a `[sweep]` table).
fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let is_sweep = text.parse::<toml::Table>().is_ok_and(|t| t.contains_key("sweep"));
    if is_sweep {
        let spec = SweepSpec::load(path).map_err(invalid)?;
        let cells = spec.cells().map_err(invalid)?;
        println!("{}: ok (sweep over {}, {} cells)", path.display(), spec.sweep.parameter.name(), cells.len());
    } else {
        let cfg = ScenarioConfig::load(path).map_err(invalid)?;
        println!("{}: ok ({} nodes, {} s, {})", path.display(), cfg.nodes.count, cfg.sim_time_s, cfg.features().label());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            protocol,
            seed,
            out,
            timeseries,
            link_filter,
            power_control,
            congestion_control,
            admission_control,
        } => cmd_run(
            &scenario,
            protocol,
            seed,
            &out,
            timeseries,
            [link_filter, power_control, congestion_control, admission_control],
        ),
        Command::Sweep { spec, jobs, out } => cmd_sweep(&spec, jobs, &out),
        Command::Validate { scenario } => cmd_validate(&scenario),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Invalid(m) => eprintln!("error: invalid input: {m}"),
                Failure::Runtime(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
