//! Iteration-boundary execution shared by batch runs and live runs.
//!
//! A [`Runner`] advances any algorithm one iteration at a time and emits one
//! trace [`Event`] per iteration. Parameter overrides are only applied between
//! iterations, which makes a live session replayable: the same seed plus the
//! recorded adjustment schedule regenerates the same trace.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{AlgoConfig, Algorithm};
use crate::error::{Error, Result};
use crate::evolutionary::{repressilator_problem, EaState, RepressilatorProblem};
use crate::gd::GdState;
use crate::mcmc::ChainState;
use crate::nelder_mead::{Move, NmState};
use crate::objectives::{booth, ObjectiveId, Point};
use crate::seed::{rng_from_seed, Rng};

/// Parameters a human (or the controller) may change mid-run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    /// Step size for gd; the convergence tolerance (`atol`) for nm.
    Alpha,
    ProposalStd,
    TemperatureT0,
    Cooling,
    MutationStd,
}

impl Param {
    pub const ALL: [Param; 5] = [
        Param::Alpha,
        Param::ProposalStd,
        Param::TemperatureT0,
        Param::Cooling,
        Param::MutationStd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Param::Alpha => "alpha",
            Param::ProposalStd => "proposal_std",
            Param::TemperatureT0 => "temperature_t0",
            Param::Cooling => "cooling",
            Param::MutationStd => "mutation_std",
        }
    }

    pub fn applies_to(self, algorithm: Algorithm) -> bool {
        matches!(
            (algorithm, self),
            (Algorithm::Gd | Algorithm::Nm, Param::Alpha)
                | (Algorithm::Mh | Algorithm::Sa, Param::ProposalStd)
                | (Algorithm::Sa, Param::TemperatureT0 | Param::Cooling)
                | (Algorithm::Ea, Param::MutationStd)
        )
    }

    pub fn validate_value(self, value: f64) -> Result<()> {
        let ok = match self {
            Param::Cooling => value > 0.0 && value < 1.0,
            Param::MutationStd => value >= 0.0 && value.is_finite(),
            _ => value > 0.0 && value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(self.as_str(), format!("{value} is out of range")))
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Param::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::config("parameter", format!("unknown parameter `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Created,
    Running,
    Paused,
    Finished,
    Stopped,
}

impl RunState {
    pub fn is_terminal(self) -> bool {
        matches!(self, RunState::Finished | RunState::Stopped)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Controller,
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdTrace {
    pub loss: f64,
    pub point: Point,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmTrace {
    pub best_value: f64,
    pub best_point: Point,
    #[serde(rename = "move")]
    pub movement: Move,
    pub diameter: f64,
    pub spread: f64,
    pub atol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainTrace {
    pub current: Point,
    pub candidate: Point,
    pub alpha: f64,
    pub u: f64,
    pub accepted: bool,
    pub temperature: f64,
    pub proposal_std: f64,
    /// Running +1/-1 acceptance counter.
    pub acceptance_count: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EaTrace {
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub std_fitness: f64,
    pub best_genome: Point,
    pub mutation_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TracePayload {
    Gd(GdTrace),
    Nm(NmTrace),
    Chain(ChainTrace),
    Ea(EaTrace),
}

impl TracePayload {
    /// The per-iteration scalar a loss curve plots.
    pub fn metric(&self) -> f64 {
        match self {
            TracePayload::Gd(t) => t.loss,
            TracePayload::Nm(t) => t.best_value,
            TracePayload::Chain(t) => t.alpha,
            TracePayload::Ea(t) => t.best_fitness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjustmentPayload {
    pub parameter: Param,
    pub old: f64,
    pub new: f64,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatePayload {
    pub state: RunState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    Trace(TracePayload),
    Adjustment(AdjustmentPayload),
    State(StatePayload),
}

/// One entry of a run's event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub iteration: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

impl Event {
    pub fn trace(&self) -> Option<&TracePayload> {
        match &self.body {
            EventBody::Trace(t) => Some(t),
            _ => None,
        }
    }

    pub fn adjustment(&self) -> Option<&AdjustmentPayload> {
        match &self.body {
            EventBody::Adjustment(a) => Some(a),
            _ => None,
        }
    }

    pub fn state(iteration: u64, state: RunState) -> Self {
        Event {
            iteration,
            body: EventBody::State(StatePayload { state }),
        }
    }
}

/// An override to apply right before the trace event of `iteration`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledAdjustment {
    pub iteration: u64,
    pub parameter: Param,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceSummary {
    pub n: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub accepted_pct: f64,
    pub mean_alpha: f64,
    pub acceptance_count: i64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_fitness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_point: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_mean_fitness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations_used: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diverged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptance: Option<AcceptanceSummary>,
    /// Objective or density evaluations spent.
    pub evaluations: u64,
    pub wall_time_ms: u64,
}

type Objective = fn(&[f64]) -> f64;

fn booth_objective(x: &[f64]) -> f64 {
    booth(x[0], x[1])
}

fn bohachevsky_objective(x: &[f64]) -> f64 {
    crate::objectives::bohachevsky(x[0], x[1])
}

enum Engine {
    Gd(GdState),
    Nm(NmState<Objective>),
    Chain(ChainState<Objective>, Rng),
    Ea(EaState<Objective>, Rng),
}

/// Any algorithm, advanced one iteration at a time.
pub struct Runner {
    algorithm: Algorithm,
    engine: Engine,
}

impl fmt::Debug for Runner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Runner")
            .field("algorithm", &self.algorithm)
            .field("next_iteration", &self.next_iteration())
            .finish()
    }
}

impl Runner {
    pub fn new(algorithm: Algorithm, objective: ObjectiveId, config: &AlgoConfig, seed: u64) -> Result<Self> {
        config.validate(algorithm, objective)?;
        let engine = match config {
            AlgoConfig::Gd(c) => Engine::Gd(GdState::new(c)?),
            AlgoConfig::Nm(c) => {
                let f: Objective = match objective {
                    ObjectiveId::Booth => booth_objective,
                    _ => bohachevsky_objective,
                };
                Engine::Nm(NmState::new(c, f)?)
            }
            AlgoConfig::Chain(c) => Engine::Chain(ChainState::new(c)?, rng_from_seed(seed)),
            AlgoConfig::Ea(c) => {
                let problem: RepressilatorProblem = repressilator_problem();
                Engine::Ea(EaState::new(c, problem)?, rng_from_seed(seed))
            }
        };
        Ok(Self { algorithm, engine })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    /// Iteration index of the next trace event.
    pub fn next_iteration(&self) -> u64 {
        match &self.engine {
            Engine::Gd(s) => s.next_iteration(),
            Engine::Nm(s) => s.next_iteration(),
            Engine::Chain(s, _) => s.next_iteration(),
            Engine::Ea(s, _) => s.next_iteration(),
        }
    }

    pub fn is_finished(&self) -> bool {
        match &self.engine {
            Engine::Gd(s) => s.is_finished(),
            Engine::Nm(s) => s.is_finished(),
            Engine::Chain(s, _) => s.is_finished(),
            Engine::Ea(s, _) => s.is_finished(),
        }
    }

    pub fn param(&self, p: Param) -> Result<f64> {
        let v = match (&self.engine, p) {
            (Engine::Gd(s), Param::Alpha) => s.alpha,
            (Engine::Nm(s), Param::Alpha) => s.atol,
            (Engine::Chain(s, _), Param::ProposalStd) => s.proposal_std,
            (Engine::Chain(s, _), Param::TemperatureT0) if s.schedule.is_some() => {
                s.schedule.unwrap().t0
            }
            (Engine::Chain(s, _), Param::Cooling) if s.schedule.is_some() => {
                s.schedule.unwrap().cooling
            }
            (Engine::Ea(s, _), Param::MutationStd) => s.cfg.mutation_std,
            _ => {
                return Err(Error::config(
                    "parameter",
                    format!("`{p}` is not adjustable for {}", self.algorithm),
                ))
            }
        };
        Ok(v)
    }

    /// Sets `p` and returns the previous value.
    pub fn set_param(&mut self, p: Param, value: f64) -> Result<f64> {
        let old = self.param(p)?;
        p.validate_value(value)?;
        match (&mut self.engine, p) {
            (Engine::Gd(s), Param::Alpha) => s.alpha = value,
            (Engine::Nm(s), Param::Alpha) => s.atol = value,
            (Engine::Chain(s, _), Param::ProposalStd) => s.proposal_std = value,
            (Engine::Chain(s, _), Param::TemperatureT0) => {
                if let Some(sch) = s.schedule.as_mut() {
                    sch.t0 = value;
                }
            }
            (Engine::Chain(s, _), Param::Cooling) => {
                if let Some(sch) = s.schedule.as_mut() {
                    sch.cooling = value;
                }
            }
            (Engine::Ea(s, _), Param::MutationStd) => s.cfg.mutation_std = value,
            _ => unreachable!("param() already rejected the combination"),
        }
        Ok(old)
    }

    /// Runs one iteration and returns its trace event, or `None` when done.
    pub fn step(&mut self) -> Result<Option<Event>> {
        let iteration = self.next_iteration();
        let payload = match &mut self.engine {
            Engine::Gd(s) => s.advance().map(|t| {
                TracePayload::Gd(GdTrace {
                    loss: t.loss,
                    point: t.point,
                    alpha: t.alpha,
                })
            }),
            Engine::Nm(s) => {
                let atol = s.atol;
                s.advance().map(|t| {
                    TracePayload::Nm(NmTrace {
                        best_value: t.best_value,
                        best_point: t.best_point,
                        movement: t.movement,
                        diameter: t.diameter,
                        spread: t.spread,
                        atol,
                    })
                })
            }
            Engine::Chain(s, rng) => {
                let std = s.proposal_std;
                let step = s.advance(rng)?.cloned();
                let count = s.run.acceptance_count;
                step.map(|st| {
                    TracePayload::Chain(ChainTrace {
                        current: st.current,
                        candidate: st.candidate,
                        alpha: st.alpha,
                        u: st.u,
                        accepted: st.accepted,
                        temperature: st.temperature,
                        proposal_std: std,
                        acceptance_count: count,
                    })
                })
            }
            Engine::Ea(s, rng) => {
                let std = s.cfg.mutation_std;
                s.advance(rng)?.map(|g| {
                    TracePayload::Ea(EaTrace {
                        best_fitness: g.best_fitness,
                        mean_fitness: g.mean_fitness,
                        std_fitness: g.std_fitness,
                        best_genome: s.best().map(|b| b.genome.clone()).unwrap_or_default(),
                        mutation_std: std,
                    })
                })
            }
        };
        Ok(payload.map(|p| Event {
            iteration,
            body: EventBody::Trace(p),
        }))
    }

    /// Applies overrides, last write per parameter winning, and returns one
    /// adjustment event per parameter whose value actually changed.
    pub fn apply_overrides(&mut self, overrides: &[(Param, f64)], source: Source) -> Result<Vec<Event>> {
        let mut last: BTreeMap<Param, f64> = BTreeMap::new();
        for (p, v) in overrides {
            self.param(*p)?;
            p.validate_value(*v)?;
            last.insert(*p, *v);
        }
        let iteration = self.next_iteration();
        let mut events = Vec::new();
        for (p, v) in last {
            let old = self.set_param(p, v)?;
            if old != v {
                events.push(Event {
                    iteration,
                    body: EventBody::Adjustment(AdjustmentPayload {
                        parameter: p,
                        old,
                        new: v,
                        source,
                    }),
                });
            }
        }
        Ok(events)
    }

    pub fn summary(&self) -> Summary {
        match &self.engine {
            Engine::Gd(s) => Summary {
                best_loss: Some(s.trace.best_loss).filter(|v| v.is_finite()),
                best_point: Some(s.trace.best_point.clone()),
                iterations_used: Some(s.trace.losses.len().saturating_sub(1) as u64),
                diverged: Some(s.trace.diverged),
                evaluations: s.trace.losses.len() as u64 + u64::from(s.trace.diverged),
                ..Default::default()
            },
            Engine::Nm(s) => {
                let r = s.result();
                Summary {
                    best_loss: Some(r.best_value),
                    best_point: Some(r.best_point),
                    iterations_used: Some(r.iterations_used),
                    converged: Some(r.converged),
                    evaluations: s.evaluations(),
                    ..Default::default()
                }
            }
            Engine::Chain(s, _) => {
                let run = &s.run;
                let n = run.n() as u64;
                let accepted = run.accepted_points.len() as u64;
                Summary {
                    acceptance: Some(AcceptanceSummary {
                        n,
                        accepted,
                        rejected: n - accepted,
                        accepted_pct: 100.0 * run.acceptance_rate(),
                        mean_alpha: run.mean_alpha,
                        acceptance_count: run.acceptance_count,
                    }),
                    best_point: Some(s.current().clone()),
                    evaluations: n + 1,
                    ..Default::default()
                }
            }
            Engine::Ea(s, _) => {
                let last = s.stats.last();
                let gens = s.stats.len().saturating_sub(1) as u64;
                Summary {
                    best_fitness: last.map(|g| g.best_fitness),
                    final_mean_fitness: last.map(|g| g.mean_fitness),
                    best_point: s.best().map(|b| b.genome.clone()),
                    iterations_used: Some(gens),
                    evaluations: if s.stats.is_empty() {
                        0
                    } else {
                        s.cfg.pop_size as u64
                            + gens * s.cfg.replacement_count as u64 * u64::from(s.cfg.recomb || s.cfg.mutate)
                    },
                    ..Default::default()
                }
            }
        }
    }
}

/// Drives a runner to completion, applying `schedule` at iteration
/// boundaries; returns every event in log order.
pub fn drive(runner: &mut Runner, schedule: &[ScheduledAdjustment]) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    let mut pending: Vec<ScheduledAdjustment> = schedule.to_vec();
    pending.sort_by_key(|a| a.iteration);
    let mut cursor = 0;
    while !runner.is_finished() {
        let k = runner.next_iteration();
        let start = cursor;
        while cursor < pending.len() && pending[cursor].iteration <= k {
            cursor += 1;
        }
        if cursor > start {
            let batch: Vec<(Param, f64)> = pending[start..cursor]
                .iter()
                .map(|a| (a.parameter, a.value))
                .collect();
            events.extend(runner.apply_overrides(&batch, Source::Human)?);
        }
        match runner.step()? {
            Some(ev) => events.push(ev),
            None => break,
        }
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunParams;

    fn runner(a: Algorithm, seed: u64) -> Runner {
        let cfg = RunParams::default().resolve(a, a.default_objective(), seed).unwrap();
        Runner::new(a, a.default_objective(), &cfg, seed).unwrap()
    }

    #[test]
    fn event_json_shape() {
        let ev = Event {
            iteration: 3,
            body: EventBody::Adjustment(AdjustmentPayload {
                parameter: Param::Alpha,
                old: 0.001,
                new: 0.0005,
                source: Source::Human,
            }),
        };
        let v = serde_json::to_value(&ev).unwrap();
        assert_eq!(v["iteration"], 3);
        assert_eq!(v["kind"], "adjustment");
        assert_eq!(v["payload"]["parameter"], "alpha");
        assert_eq!(v["payload"]["source"], "human");
        let back: Event = serde_json::from_value(v).unwrap();
        assert_eq!(back, ev);
    }

    #[test]
    fn every_algorithm_emits_increasing_trace_iterations() {
        for a in Algorithm::ALL {
            let mut r = runner(a, 5);
            let events = drive(&mut r, &[]).unwrap();
            assert!(!events.is_empty());
            for (i, e) in events.iter().enumerate() {
                assert_eq!(e.iteration, i as u64, "{a}");
                let json = serde_json::to_string(e).unwrap();
                let back: Event = serde_json::from_str(&json).unwrap();
                assert_eq!(&back, e, "{a}");
            }
        }
    }

    #[test]
    fn parameter_compatibility() {
        let r = runner(Algorithm::Gd, 1);
        assert!(r.param(Param::Alpha).is_ok());
        assert!(r.param(Param::ProposalStd).is_err());
        let r = runner(Algorithm::Mh, 1);
        assert!(r.param(Param::Cooling).is_err());
        let r = runner(Algorithm::Sa, 1);
        assert_eq!(r.param(Param::Cooling).unwrap(), 0.95);
        for a in Algorithm::ALL {
            for p in Param::ALL {
                assert_eq!(runner(a, 0).param(p).is_ok(), p.applies_to(a), "{a} {p}");
            }
        }
    }

    #[test]
    fn overrides_last_write_wins() {
        let mut r = runner(Algorithm::Gd, 1);
        let evs = r
            .apply_overrides(&[(Param::Alpha, 0.01), (Param::Alpha, 0.002)], Source::Human)
            .unwrap();
        assert_eq!(evs.len(), 1);
        assert_eq!(evs[0].adjustment().unwrap().new, 0.002);
        assert_eq!(r.param(Param::Alpha).unwrap(), 0.002);
        // Unchanged value: acknowledged but no event.
        assert!(r.apply_overrides(&[(Param::Alpha, 0.002)], Source::Human).unwrap().is_empty());
        assert!(r.apply_overrides(&[(Param::Alpha, -1.0)], Source::Human).is_err());
    }

    #[test]
    fn schedule_takes_effect_at_its_iteration() {
        let cfg = RunParams {
            iterations: Some(20),
            init: Some(vec![30.0, -20.0]),
            ..Default::default()
        }
        .resolve(Algorithm::Gd, ObjectiveId::Bohachevsky, 0)
        .unwrap();
        let mut r = Runner::new(Algorithm::Gd, ObjectiveId::Bohachevsky, &cfg, 0).unwrap();
        let sched = [ScheduledAdjustment {
            iteration: 7,
            parameter: Param::Alpha,
            value: 0.01,
        }];
        let events = drive(&mut r, &sched).unwrap();
        let adj = events.iter().position(|e| e.adjustment().is_some()).unwrap();
        assert_eq!(events[adj].iteration, 7);
        for e in &events {
            if let Some(TracePayload::Gd(t)) = e.trace() {
                let want = if e.iteration >= 7 { 0.01 } else { 0.001 };
                assert_eq!(t.alpha, want);
            }
        }
    }

    #[test]
    fn param_names_parse() {
        for p in Param::ALL {
            assert_eq!(p.as_str().parse::<Param>().unwrap(), p);
        }
        assert!("beta".parse::<Param>().is_err());
    }
}
