//! Runs the cells of a sweep on a bounded worker pool. Each cell owns its
//! engine, so cells share nothing; results come back in cell order.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use dlora_core::bandit::AgentState;
use dlora_core::engine::{self, Engine, ExperimentResult, Phase};
use rayon::prelude::*;

use crate::config::{Cell, SweepSpec};
use crate::output::{self, TraceRow};

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub cell: Cell,
    pub result: ExperimentResult,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory receiving one per-packet trace CSV per cell.
    pub trace_dir: Option<PathBuf>,
    /// Agents to start from instead of fresh ones.
    pub agents: Option<Vec<AgentState>>,
}

pub fn trace_file_name(cell: &Cell) -> String {
    format!(
        "trace_{}_r{}_s{}.csv",
        cell.policy.name(),
        cell.radius_m,
        cell.seed
    )
}

/// Runs one cell of the sweep.
pub fn run_cell(spec: &SweepSpec, cell: &Cell, opts: &RunOptions) -> Result<RunOutput> {
    let cfg = spec.cell_config(cell);
    let train = cfg.train_episodes;
    let label = || format!("{} at {} m, seed {}", cell.policy, cell.radius_m, cell.seed);
    let mut eng = Engine::new(cfg).with_context(label)?;
    if let Some(agents) = &opts.agents {
        eng.set_agents(agents.clone()).with_context(label)?;
    }

    let result = match &opts.trace_dir {
        None => engine::run_experiment_on(&mut eng, |_, _, _| {}),
        Some(dir) => {
            let path = dir.join(trace_file_name(cell));
            let mut w =
                csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
            let mut failure: Option<anyhow::Error> = None;
            let r = engine::run_experiment_on(&mut eng, |phase, index, e| {
                if failure.is_some() {
                    return;
                }
                let episode = match phase {
                    Phase::Train => index,
                    Phase::Test => train + index,
                };
                let mut recs: Vec<_> = e.nodes().iter().flat_map(|n| n.sent.iter()).collect();
                recs.sort_by_key(|r| r.packet_id);
                for rec in recs {
                    if let Err(err) = w.serialize(TraceRow::new(episode, phase, rec)) {
                        failure = Some(err.into());
                        return;
                    }
                }
            });
            if let Some(err) = failure {
                return Err(err.context(format!("writing {}", path.display())));
            }
            w.flush()?;
            r
        }
    }
    .with_context(label)?;
    Ok(RunOutput { cell: *cell, result })
}

/// Runs every cell, in parallel when `spec.workers != 1`.
pub fn run_cells(spec: &SweepSpec, opts: &RunOptions) -> Result<Vec<RunOutput>> {
    let cells = spec.cells();
    if opts.agents.is_some() && cells.len() != 1 {
        return Err(anyhow!("a starting agent snapshot applies to a single run only"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .context("starting worker pool")?;
    pool.install(|| cells.par_iter().map(|c| run_cell(spec, c, opts)).collect())
}

/// Paths written by [`run_sweep`].
#[derive(Debug, Clone)]
pub struct SweepArtifacts {
    pub results: PathBuf,
    pub summary: PathBuf,
    pub rows: Vec<output::ResultRow>,
    pub summary_rows: Vec<output::SummaryRow>,
    pub runs: Vec<RunOutput>,
}

/// Runs the sweep and writes `results.csv` and `summary.csv` under `out`.
pub fn run_sweep(spec: &SweepSpec, out: &Path, opts: &RunOptions) -> Result<SweepArtifacts> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    if let Some(dir) = &opts.trace_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let runs = run_cells(spec, opts)?;
    let rows = output::result_rows(&runs, &spec.base.utility)?;
    let summary_rows = output::summarize(&rows);
    let results = out.join(output::RESULTS_FILE);
    let summary = out.join(output::SUMMARY_FILE);
    output::write_csv(&results, &rows)?;
    output::write_csv(&summary, &summary_rows)?;
    Ok(SweepArtifacts {
        results,
        summary,
        rows,
        summary_rows,
        runs,
    })
}
