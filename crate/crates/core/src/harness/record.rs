use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{AlgoConfig, Algorithm};
use crate::error::{Error, Result};
use crate::live::{drive, Event, ScheduledAdjustment, Summary, TracePayload};
use crate::live::Runner;
use crate::objectives::{ObjectiveId, Point};

pub const SCHEMA_VERSION: u32 = 1;

/// Persisted, replayable log of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub schema_version: u32,
    pub run_id: String,
    pub algorithm: Algorithm,
    pub objective: ObjectiveId,
    pub master_seed: u64,
    pub config: AlgoConfig,
    pub events: Vec<Event>,
    pub summary: Summary,
}

/// Run id of a batch run; a pure function of its inputs.
pub fn batch_run_id(algorithm: Algorithm, objective: ObjectiveId, master_seed: u64) -> String {
    format!("{algorithm}-{objective}-{master_seed:016x}")
}

pub fn run_experiment(
    algorithm: Algorithm,
    objective: ObjectiveId,
    config: &AlgoConfig,
    master_seed: u64,
) -> Result<RunRecord> {
    run_experiment_with_schedule(algorithm, objective, config, master_seed, &[])
}

/// Runs to completion with human overrides applied at their iterations.
pub fn run_experiment_with_schedule(
    algorithm: Algorithm,
    objective: ObjectiveId,
    config: &AlgoConfig,
    master_seed: u64,
    schedule: &[ScheduledAdjustment],
) -> Result<RunRecord> {
    let started = Instant::now();
    let mut runner = Runner::new(algorithm, objective, config, master_seed)?;
    let events = drive(&mut runner, schedule)?;
    let mut summary = runner.summary();
    summary.wall_time_ms = started.elapsed().as_millis() as u64;
    Ok(RunRecord {
        schema_version: SCHEMA_VERSION,
        run_id: batch_run_id(algorithm, objective, master_seed),
        algorithm,
        objective,
        master_seed,
        config: config.clone(),
        events,
        summary,
    })
}

impl RunRecord {
    /// Copy with every wall-clock field zeroed.
    pub fn strip_timestamps(&self) -> RunRecord {
        let mut r = self.clone();
        r.summary.wall_time_ms = 0;
        r
    }

    pub fn trace_events(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.trace().is_some())
    }

    /// Every recorded adjustment as an override at its applied iteration.
    pub fn adjustment_schedule(&self) -> Vec<ScheduledAdjustment> {
        self.events
            .iter()
            .filter_map(|e| {
                e.adjustment().map(|a| ScheduledAdjustment {
                    iteration: e.iteration,
                    parameter: a.parameter,
                    value: a.new,
                })
            })
            .collect()
    }

    /// Reruns the record's configuration and seed in batch mode with its
    /// adjustment schedule.
    pub fn replay(&self) -> Result<RunRecord> {
        run_experiment_with_schedule(
            self.algorithm,
            self.objective,
            &self.config,
            self.master_seed,
            &self.adjustment_schedule(),
        )
    }

    /// Per-iteration scalar for loss plots.
    pub fn metric_series(&self) -> Vec<(u64, f64)> {
        self.events
            .iter()
            .filter_map(|e| e.trace().map(|t| (e.iteration, t.metric())))
            .collect()
    }

    /// Accepted and rejected candidate points of a sampler run.
    pub fn chain_points(&self) -> Result<(Vec<Point>, Vec<Point>)> {
        let mut acc = Vec::new();
        let mut rej = Vec::new();
        for e in self.trace_events() {
            match e.trace() {
                Some(TracePayload::Chain(c)) if c.accepted => acc.push(c.candidate.clone()),
                Some(TracePayload::Chain(c)) => rej.push(c.candidate.clone()),
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "{} record has no sampler trace",
                        self.algorithm
                    )))
                }
            }
        }
        Ok((acc, rej))
    }

    /// Temperature per iteration of a sampler run.
    pub fn temperatures(&self) -> Result<Vec<(u64, f64)>> {
        self.trace_events()
            .map(|e| match e.trace() {
                Some(TracePayload::Chain(c)) => Ok((e.iteration, c.temperature)),
                _ => Err(Error::InvalidArgument(format!(
                    "{} record has no temperature trace",
                    self.algorithm
                ))),
            })
            .collect()
    }
}
