//! CSV rows and JSON summaries of benchmark runs.
//!
//! CSV header: `window_start_s, mode, cum_ops, cum_wall_us, memo_nodes,
//! layers, partition_mae, gain_counted`. `cum_ops` counts semiring
//! applications spent on published values; adaptation work is reported in
//! the summary. `gain_counted` is flat `cum_ops` over this mode's, empty when
//! flat was not run or nothing was evaluated yet.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::harness::BenchResult;
use resin_core::runtime::Mode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub window_start_s: f64,
    pub mode: String,
    pub cum_ops: u64,
    pub cum_wall_us: u64,
    pub memo_nodes: usize,
    pub layers: usize,
    pub partition_mae: Option<f64>,
    pub gain_counted: Option<f64>,
}

pub fn rows(result: &BenchResult) -> Vec<MetricsRow> {
    let flat = result.run(Mode::Flat);
    let mut out = Vec::new();
    for run in &result.runs {
        for (k, w) in run.windows.iter().enumerate() {
            let gain = flat
                .and_then(|f| f.windows.get(k))
                .filter(|_| w.eval_ops > 0)
                .map(|f| f.eval_ops as f64 / w.eval_ops as f64);
            out.push(MetricsRow {
                window_start_s: w.start,
                mode: run.mode.name().to_string(),
                cum_ops: w.eval_ops,
                cum_wall_us: w.wall_us,
                memo_nodes: w.memo_nodes,
                layers: w.layers,
                partition_mae: w.partition_mae,
                gain_counted: gain,
            });
        }
    }
    out
}

pub const CSV_HEADER: [&str; 8] = [
    "window_start_s",
    "mode",
    "cum_ops",
    "cum_wall_us",
    "memo_nodes",
    "layers",
    "partition_mae",
    "gain_counted",
];

pub fn write_csv<W: Write>(out: W, result: &BenchResult) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows(result) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: String,
    pub messages: u64,
    pub meaningful: u64,
    pub publications: u64,
    pub eval_ops: u64,
    pub adaptation_ops: u64,
    pub lifts: u64,
    pub drops: u64,
    pub adaptations: u64,
    pub wall_us: u64,
    pub memo_nodes: usize,
    pub layers: usize,
    /// Flat `eval_ops` over this mode's.
    pub gain_counted: Option<f64>,
    /// Flat wall time over this mode's; informational only.
    pub gain_wall: Option<f64>,
}

/// JSON summary written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub events: usize,
    pub seconds: f64,
    pub window_s: f64,
    pub max_disagreement: f64,
    pub modes: Vec<ModeSummary>,
}

impl Summary {
    pub fn new(result: &BenchResult) -> Self {
        let flat_wall = result.run(Mode::Flat).map(|r| r.wall.as_secs_f64());
        let modes = result
            .runs
            .iter()
            .map(|r| {
                let wall = r.wall.as_secs_f64();
                ModeSummary {
                    mode: r.mode.name().to_string(),
                    messages: r.stats.messages,
                    meaningful: r.stats.meaningful,
                    publications: r.stats.publications,
                    eval_ops: r.stats.eval_ops,
                    adaptation_ops: r.stats.adaptation_ops,
                    lifts: r.stats.lifts,
                    drops: r.stats.drops,
                    adaptations: r.stats.adaptations,
                    wall_us: r.wall.as_micros() as u64,
                    memo_nodes: r.memo_nodes,
                    layers: r.layers,
                    gain_counted: result.gain(r.mode),
                    gain_wall: flat_wall.filter(|_| wall > 0.0).map(|f| f / wall),
                }
            })
            .collect();
        Summary {
            events: result.events,
            seconds: result.seconds,
            window_s: result.window,
            max_disagreement: result.max_disagreement,
            modes,
        }
    }
}
