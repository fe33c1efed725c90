//! CSV and JSON artefacts. Floats are written in shortest round-trip form,
//! so every value reads back bit-exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use dlora_core::bandit::AgentState;
use dlora_core::engine::{MeanStd, Phase};
use dlora_core::network::{self, EpisodeMetrics, PacketRecord, UtilityWeights};
use dlora_core::ParamDomains;
use serde::{Deserialize, Serialize};

use crate::sweep::RunOutput;

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const CONFIG_FILE: &str = "config.toml";

/// One episode of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub policy: String,
    pub radius_m: f64,
    pub seed: u64,
    /// Position in the run, training episodes first.
    pub episode: u32,
    pub phase: String,
    pub pdr: f64,
    pub ee_bits_per_mj: f64,
    pub th_bps: f64,
    pub utility: f64,
}

/// Flattens runs into rows, with utility normalised over all rows.
pub fn result_rows(runs: &[RunOutput], weights: &UtilityWeights) -> Result<Vec<ResultRow>> {
    let mut metrics: Vec<EpisodeMetrics> = runs
        .iter()
        .flat_map(|r| r.result.episodes.iter().map(|e| e.metrics))
        .collect();
    network::assign_utilities(&mut metrics, weights)?;
    let mut m = metrics.into_iter();
    let mut rows = Vec::new();
    for run in runs {
        for (i, e) in run.result.episodes.iter().enumerate() {
            let metrics = m.next().expect("one metric per episode");
            rows.push(ResultRow {
                policy: run.cell.policy.name().to_string(),
                radius_m: run.cell.radius_m,
                seed: run.cell.seed,
                episode: i as u32,
                phase: e.phase.as_str().to_string(),
                pdr: metrics.pdr,
                ee_bits_per_mj: metrics.ee,
                th_bps: metrics.th,
                utility: metrics.utility,
            });
        }
    }
    Ok(rows)
}

/// Mean and sample std of the test-phase metrics of one policy × radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: String,
    pub radius_m: f64,
    pub episodes: usize,
    pub pdr_mean: f64,
    pub pdr_std: f64,
    pub ee_mean: f64,
    pub ee_std: f64,
    pub th_mean: f64,
    pub th_std: f64,
    pub utility_mean: f64,
    pub utility_std: f64,
}

/// Groups test rows by (policy, radius) in order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(&str, f64)> = Vec::new();
    for r in rows.iter().filter(|r| r.phase == Phase::Test.as_str()) {
        if !keys.iter().any(|k| k.0 == r.policy && k.1 == r.radius_m) {
            keys.push((&r.policy, r.radius_m));
        }
    }
    keys.into_iter()
        .map(|(policy, radius_m)| {
            let cell: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.phase == Phase::Test.as_str() && r.policy == policy && r.radius_m == radius_m)
                .collect();
            let stat = |f: fn(&ResultRow) -> f64| MeanStd::of(cell.iter().map(|r| f(r)));
            let (pdr, ee, th, u) = (
                stat(|r| r.pdr),
                stat(|r| r.ee_bits_per_mj),
                stat(|r| r.th_bps),
                stat(|r| r.utility),
            );
            SummaryRow {
                policy: policy.to_string(),
                radius_m,
                episodes: cell.len(),
                pdr_mean: pdr.mean,
                pdr_std: pdr.std,
                ee_mean: ee.mean,
                ee_std: ee.std,
                th_mean: th.mean,
                th_std: th.std,
                utility_mean: u.mean,
                utility_std: u.std,
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// Human-readable summary table.
pub fn render_summary(rows: &[SummaryRow]) -> String {
    let mut out = format!(
        "{:<16} {:>8} {:>17} {:>19} {:>21} {:>17}\n",
        "policy", "radius_m", "PDR", "EE (bits/mJ)", "TH (bps)", "utility"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<16} {:>8} {:>8.4} ± {:<6.4} {:>9.2} ± {:<7.2} {:>10.1} ± {:<8.1} {:>8.4} ± {:<6.4}\n",
            r.policy,
            r.radius_m,
            r.pdr_mean,
            r.pdr_std,
            r.ee_mean,
            r.ee_std,
            r.th_mean,
            r.th_std,
            r.utility_mean,
            r.utility_std
        ));
    }
    out
}

/// One transmitted packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub episode: u32,
    pub phase: String,
    pub packet_id: u64,
    pub node_id: u32,
    pub sf: u8,
    pub bw_hz: u32,
    pub cf_hz: u32,
    pub tp_dbm: i8,
    pub start_s: f64,
    pub toa_s: f64,
    pub rssi_dbm: f64,
    pub sinr_db: f64,
    pub energy_mj: f64,
    pub collided: bool,
    pub signal_lost: bool,
    pub fate: String,
}

impl TraceRow {
    pub fn new(episode: u32, phase: Phase, r: &PacketRecord) -> Self {
        Self {
            episode,
            phase: phase.as_str().to_string(),
            packet_id: r.packet_id,
            node_id: r.node_id,
            sf: r.params.sf,
            bw_hz: r.params.bw_hz,
            cf_hz: r.params.cf_hz,
            tp_dbm: r.params.tp_dbm,
            start_s: r.start_s,
            toa_s: r.toa_s,
            rssi_dbm: r.rssi_dbm,
            sinr_db: r.sinr_db,
            energy_mj: r.energy_mj,
            collided: r.collided,
            signal_lost: r.signal_lost,
            fate: r.fate.as_str().to_string(),
        }
    }
}

/// Trained agents plus enough context to reject a mismatched reload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub policy: String,
    pub radius_m: f64,
    pub seed: u64,
    pub domains: ParamDomains,
    pub agents: Vec<AgentState>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(std::io::BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}
