//! Parameter sweeps: independent cells run in parallel, results kept in cell order.

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{Protocol, SweepSpec};
use crate::report::{AggregateRow, RunRow};
use crate::sim::{run_scenario, RunOutput, SimError};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("cell {parameter}={value} seed={seed} protocol={}: {source}", protocol.name())]
    Cell {
        parameter: &'static str,
        value: f64,
        seed: u64,
        protocol: Protocol,
        #[source]
        source: SimError,
    },
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub runs: Vec<RunOutput>,
    pub aggregates: Vec<AggregateRow>,
}

impl SweepOutput {
    pub fn rows(&self) -> Vec<RunRow> {
        self.runs.iter().map(RunOutput::row).collect()
    }
}

/// Runs every cell of `spec` on `jobs` worker threads (all cores when `None`).
/// The output does not depend on the worker count.
pub fn run_sweep(spec: &SweepSpec, jobs: Option<usize>) -> Result<SweepOutput, SweepError> {
    let cells = spec.cells().expect("sweep spec was validated");
    let parameter = spec.sweep.parameter.name();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| SweepError::Pool(e.to_string()))?;
    let results: Vec<Result<RunOutput, SweepError>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                run_scenario(&cell.config).map_err(|source| SweepError::Cell {
                    parameter,
                    value: cell.value,
                    seed: cell.seed_entry,
                    protocol: cell.protocol,
                    source,
                })
            })
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let values: Vec<f64> = cells.iter().map(|c| c.value).collect();
    let rows: Vec<RunRow> = runs.iter().map(RunOutput::row).collect();
    let mut groups: Vec<(f64, String, Vec<&RunRow>)> = Vec::new();
    for (v, row) in values.iter().zip(&rows) {
        match groups.iter_mut().find(|g| g.0 == *v && g.1 == row.protocol) {
            Some(g) => g.2.push(row),
            None => groups.push((*v, row.protocol.clone(), vec![row])),
        }
    }
    let aggregates = groups
        .iter()
        .map(|(v, p, rs)| AggregateRow::from_runs(parameter, *v, p, rs))
        .collect();
    Ok(SweepOutput { runs, aggregates })
}
