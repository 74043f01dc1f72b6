//! Independent seeded repetitions and their per-algorithm result tables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AlgoConfig, Algorithm, RunParams};
use crate::error::{Error, Result};
use crate::harness::export::{fmt_real, CsvTable};
use crate::harness::record::{run_experiment, RunRecord};
use crate::harness::stats::{summarize, SummaryStats};
use crate::objectives::ObjectiveId;
use crate::seed::mix;

pub fn summary_header(algorithm: Algorithm) -> &'static [&'static str] {
    match algorithm {
        Algorithm::Gd => &["repetition", "init_x1", "init_x2", "alpha", "iterations", "best_loss"],
        Algorithm::Nm => &[
            "repetition",
            "init_x1",
            "init_x2",
            "atol",
            "maxiter",
            "iterations_used",
            "best_value",
        ],
        Algorithm::Mh | Algorithm::Sa => &["repetition", "N", "accepted", "rejected", "accepted_pct", "mean_alpha"],
        Algorithm::Ea => &[
            "repetition",
            "pop_size",
            "generations",
            "std",
            "recomb",
            "mut",
            "best_fitness",
            "final_mean_fitness",
        ],
    }
}

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

fn missing(what: &str) -> Error {
    Error::InvalidArgument(format!("record summary lacks {what}"))
}

/// One row of the algorithm's result table for a finished record.
pub fn summary_row(record: &RunRecord, repetition: u32) -> Result<Vec<String>> {
    let s = &record.summary;
    let rep = repetition.to_string();
    let row = match (&record.config, record.algorithm) {
        (AlgoConfig::Gd(c), Algorithm::Gd) => vec![
            rep,
            fmt_real(c.init[0]),
            fmt_real(c.init[1]),
            fmt_real(c.alpha),
            c.iterations.to_string(),
            fmt_real(s.best_loss.unwrap_or(f64::INFINITY)),
        ],
        (AlgoConfig::Nm(c), Algorithm::Nm) => vec![
            rep,
            fmt_real(c.init[0]),
            fmt_real(c.init[1]),
            fmt_real(c.atol),
            c.maxiter.to_string(),
            s.iterations_used.ok_or_else(|| missing("iterations_used"))?.to_string(),
            fmt_real(s.best_loss.ok_or_else(|| missing("best_loss"))?),
        ],
        (AlgoConfig::Chain(_), Algorithm::Mh | Algorithm::Sa) => {
            let a = s.acceptance.ok_or_else(|| missing("acceptance"))?;
            vec![
                rep,
                a.n.to_string(),
                a.accepted.to_string(),
                a.rejected.to_string(),
                fmt_real(a.accepted_pct),
                fmt_real(a.mean_alpha),
            ]
        }
        (AlgoConfig::Ea(c), Algorithm::Ea) => vec![
            rep,
            c.pop_size.to_string(),
            c.generations.to_string(),
            fmt_real(c.mutation_std),
            flag(c.recomb),
            flag(c.mutate),
            fmt_real(s.best_fitness.ok_or_else(|| missing("best_fitness"))?),
            fmt_real(s.final_mean_fitness.ok_or_else(|| missing("final_mean_fitness"))?),
        ],
        _ => return Err(Error::config("config", format!("not a {} configuration", record.algorithm))),
    };
    Ok(row)
}

/// The scalar a batch summarizes: best loss, best value, acceptance
/// percentage or best fitness.
pub fn headline(record: &RunRecord) -> Option<f64> {
    let s = &record.summary;
    match record.algorithm {
        Algorithm::Gd | Algorithm::Nm => s.best_loss,
        Algorithm::Mh | Algorithm::Sa => s.acceptance.map(|a| a.accepted_pct),
        Algorithm::Ea => s.best_fitness,
    }
}

pub fn records_csv(records: &[RunRecord]) -> Result<CsvTable> {
    let Some(first) = records.first() else {
        return Err(Error::InvalidArgument("no records".into()));
    };
    let mut table = CsvTable::new(summary_header(first.algorithm));
    for (i, r) in records.iter().enumerate() {
        table.push(summary_row(r, i as u32 + 1)?)?;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub algorithm: Algorithm,
    pub objective: ObjectiveId,
    pub master_seed: u64,
    pub reps: u32,
    pub headline: SummaryStats,
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub records: Vec<RunRecord>,
    pub summary: BatchSummary,
}

impl Batch {
    pub fn table(&self) -> Result<CsvTable> {
        records_csv(&self.records)
    }
}

/// Runs `reps` independent repetitions; repetition `r` (1-based) uses seed
/// `mix(master_seed, r)`, which also draws its random initial point.
pub fn run_batch(
    algorithm: Algorithm,
    objective: ObjectiveId,
    params: &RunParams,
    reps: u32,
    master_seed: u64,
) -> Result<Batch> {
    if reps == 0 {
        return Err(Error::config("reps", "must be at least 1"));
    }
    params.resolve(algorithm, objective, master_seed)?;
    let records = (1..=reps)
        .into_par_iter()
        .map(|r| {
            let seed = mix(master_seed, u64::from(r));
            let cfg = params.resolve(algorithm, objective, seed)?;
            run_experiment(algorithm, objective, &cfg, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = records.iter().filter_map(headline).collect();
    let headline = summarize(&values)?;
    Ok(Batch {
        records,
        summary: BatchSummary {
            algorithm,
            objective,
            master_seed,
            reps,
            headline,
        },
    })
}
