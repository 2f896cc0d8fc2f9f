//! Monte-Carlo orchestration of the placement and assignment methods and CSV
//! output of the results.

pub mod config;
pub mod experiments;
pub mod pipeline;
pub mod strategy;

use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use config::{load_config, ExperimentConfig};
pub use pipeline::Iteration;
pub use strategy::{AssignmentStrategy, Decision, ReplayCriterion, StrategyRegistry};

/// One method evaluated in one Monte-Carlo iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub iteration: usize,
    /// Seed of the iteration; every method in it shares topology and traffic.
    pub seed: u64,
    pub method: String,
    pub sweep_variable: String,
    pub sweep_value: f64,
    pub pdp: f64,
    pub tdp: f64,
    pub objective: Option<f64>,
    pub training_phases: usize,
    pub packets: usize,
    pub wall_time_s: f64,
}

/// Writes rows as CSV with a header.
pub fn write_rows<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(reader: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in r.deserialize::<ResultRow>().enumerate() {
        let row = rec.map_err(|e| Error::Config(format!("row {}: {e}", i + 2)))?;
        if !(0.0..=1.0).contains(&row.pdp) || !(0.0..=1.0).contains(&row.tdp) {
            return Err(Error::Config(format!(
                "row {}: probabilities outside [0, 1]",
                i + 2
            )));
        }
        out.push(row);
    }
    Ok(out)
}

pub fn emit_csv(rows: &[ResultRow], path: &std::path::Path) -> Result<()> {
    write_rows(rows, std::fs::File::create(path)?)
}

/// Labels attached to the rows of one run.
#[derive(Debug, Clone, Copy)]
pub struct RunLabel<'a> {
    pub experiment: &'a str,
    pub sweep_variable: &'a str,
    pub sweep_value: f64,
}

impl Default for RunLabel<'_> {
    fn default() -> Self {
        Self {
            experiment: "run",
            sweep_variable: "",
            sweep_value: 0.0,
        }
    }
}

/// Runs `methods` on every Monte-Carlo iteration of `config`. Iterations run
/// in parallel; within an iteration all methods see the same topology,
/// traffic and fading. Rows come back ordered by iteration, then method.
pub fn run_methods(
    config: &ExperimentConfig,
    registry: &StrategyRegistry,
    methods: &[&str],
    label: RunLabel<'_>,
) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let strategies = methods
        .iter()
        .map(|m| registry.get(m))
        .collect::<Result<Vec<_>>>()?;
    let per_iteration = (0..config.mc_iterations)
        .into_par_iter()
        .map(|i| {
            run_iteration(config, &strategies, label, i).map_err(|e| Error::Iteration {
                iteration: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_iteration.into_iter().flatten().collect())
}

fn run_iteration(
    config: &ExperimentConfig,
    strategies: &[&dyn AssignmentStrategy],
    label: RunLabel<'_>,
    index: usize,
) -> Result<Vec<ResultRow>> {
    let it = Iteration::prepare(config, index)?;
    strategies
        .iter()
        .map(|s| {
            let start = Instant::now();
            let d = s.decide(&it)?;
            let outcome = it.evaluate(&d.assignment);
            Ok(ResultRow {
                experiment: label.experiment.to_string(),
                iteration: index,
                seed: it.seed,
                method: s.name().to_string(),
                sweep_variable: label.sweep_variable.to_string(),
                sweep_value: label.sweep_value,
                pdp: outcome.pdp,
                tdp: outcome.tdp,
                objective: d.objective,
                training_phases: d.training_phases,
                packets: outcome.packets,
                wall_time_s: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

pub fn run_mod_pipeline(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_methods(
        config,
        &StrategyRegistry::default(),
        &["mod"],
        RunLabel::default(),
    )
}

pub fn run_meas_pipeline(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_methods(
        config,
        &StrategyRegistry::default(),
        &["meas"],
        RunLabel::default(),
    )
}

/// Random assignment (or random placement when stations are added) and the
/// maximum-separation heuristic.
pub fn run_baselines(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let methods: &[&str] = if config.delta_b > 0 {
        &["random", "random-placement", "max-separation"]
    } else {
        &["random", "max-separation"]
    };
    run_methods(
        config,
        &StrategyRegistry::default(),
        methods,
        RunLabel::default(),
    )
}

pub fn replay_optimal(
    config: &ExperimentConfig,
    criterion: ReplayCriterion,
) -> Result<Vec<ResultRow>> {
    let name = match criterion {
        ReplayCriterion::Tdp => "replay-tdp",
        ReplayCriterion::Pdp => "replay-pdp",
    };
    run_methods(
        config,
        &StrategyRegistry::default(),
        &[name],
        RunLabel::default(),
    )
}
