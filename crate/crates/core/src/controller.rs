//! Between-repetition parameter controller.
//!
//! Each repetition is classified into a [`Verdict`] and a fixed rule table
//! turns the verdict into the next repetition's step size and iteration
//! budget. Iterations are tried first, the step size second.

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{AlgoConfig, Algorithm, RunParams};
use crate::error::{Error, Result};
use crate::gd::LossTrace;
use crate::live::{drive, Runner, Source, TracePayload};
use crate::objectives::ObjectiveId;
use crate::seed::{mix, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Diverged,
    Plateau,
    Improving,
    Converged,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Diverged => "diverged",
            Verdict::Plateau => "plateau",
            Verdict::Improving => "improving",
            Verdict::Converged => "converged",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Thresholds and multipliers of the rule table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rules {
    /// Relative improvement over the last half of a trace below which the
    /// repetition counts as a plateau.
    pub plateau_tolerance: f64,
    pub alpha_decrease: f64,
    pub alpha_increase: f64,
    pub iteration_growth: u64,
    /// Consecutive unchanged repetitions before an exploratory alpha probe.
    pub probe_after: u32,
}

impl Default for Rules {
    fn default() -> Self {
        Self {
            plateau_tolerance: 1e-3,
            alpha_decrease: 0.5,
            alpha_increase: 2.0,
            iteration_growth: 2,
            probe_after: 2,
        }
    }
}

impl Rules {
    pub fn validate(&self) -> Result<()> {
        if !(self.plateau_tolerance >= 0.0 && self.plateau_tolerance.is_finite()) {
            return Err(Error::config("plateau_tolerance", "must be non-negative"));
        }
        if !(self.alpha_decrease > 0.0 && self.alpha_decrease < 1.0) {
            return Err(Error::config("alpha_decrease", "must be in (0, 1)"));
        }
        if !(self.alpha_increase > 1.0 && self.alpha_increase.is_finite()) {
            return Err(Error::config("alpha_increase", "must be greater than 1"));
        }
        if self.iteration_growth < 2 {
            return Err(Error::config("iteration_growth", "must be at least 2"));
        }
        Ok(())
    }
}

pub const DEFAULT_ITERATION_CAP: u64 = 10_000;
pub const DEFAULT_TARGET_LOSS: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub current_alpha: f64,
    pub current_iterations: u64,
    pub stable_reps: u32,
    pub last_best_loss: f64,
    pub iteration_cap: u64,
    pub target_loss: f64,
}

impl ControllerState {
    pub fn new(alpha: f64, iterations: u64) -> Self {
        Self {
            current_alpha: alpha,
            current_iterations: iterations,
            stable_reps: 0,
            last_best_loss: f64::INFINITY,
            iteration_cap: DEFAULT_ITERATION_CAP,
            target_loss: DEFAULT_TARGET_LOSS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.current_alpha > 0.0 && self.current_alpha.is_finite()) {
            return Err(Error::config("alpha", "must be positive"));
        }
        if self.iteration_cap < 1 {
            return Err(Error::config("iteration_cap", "must be at least 1"));
        }
        if self.current_iterations < 1 || self.current_iterations > self.iteration_cap {
            return Err(Error::config("iterations", "must be in [1, iteration_cap]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    Verdict(Verdict),
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentEvent {
    pub repetition: u32,
    pub parameter: String,
    pub old: f64,
    pub new: f64,
    pub source: Source,
    pub reason: Reason,
}

/// Classifies a loss sequence. `losses[0]` is the starting loss.
pub fn classify(losses: &[f64], diverged: bool, target_loss: f64, plateau_tolerance: f64) -> Verdict {
    let (Some(&first), Some(&last)) = (losses.first(), losses.last()) else {
        return Verdict::Diverged;
    };
    if diverged || !last.is_finite() || last > first {
        return Verdict::Diverged;
    }
    let best = losses.iter().copied().fold(f64::INFINITY, f64::min);
    if best <= target_loss {
        return Verdict::Converged;
    }
    let half = &losses[losses.len() / 2..];
    let start = half[0];
    let end = half.iter().copied().fold(f64::INFINITY, f64::min);
    let rel = if start == 0.0 {
        0.0
    } else {
        (start - end) / start.abs()
    };
    if rel < plateau_tolerance {
        Verdict::Plateau
    } else {
        Verdict::Improving
    }
}

/// Classifies a gradient-descent repetition with the default plateau rule.
pub fn classify_repetition(trace: &LossTrace, target_loss: f64) -> Result<Verdict> {
    if trace.losses.is_empty() {
        return Err(Error::InvalidArgument("empty loss trace".into()));
    }
    Ok(classify(
        &trace.losses,
        trace.diverged,
        target_loss,
        Rules::default().plateau_tolerance,
    ))
}

/// Applies the first matching rule. `repetition` and the parameter names
/// only label the emitted events.
pub fn next_params(
    state: &ControllerState,
    verdict: Verdict,
    rules: &Rules,
    repetition: u32,
    names: (&str, &str),
) -> (ControllerState, Vec<AdjustmentEvent>) {
    let mut next = *state;
    let mut events = Vec::new();
    let mut event = |parameter: &str, old: f64, new: f64| {
        if old != new {
            events.push(AdjustmentEvent {
                repetition,
                parameter: parameter.to_string(),
                old,
                new,
                source: Source::Controller,
                reason: Reason::Verdict(verdict),
            });
        }
    };
    let at_cap = state.current_iterations >= state.iteration_cap;
    match verdict {
        Verdict::Diverged => {
            next.current_alpha = state.current_alpha * rules.alpha_decrease;
            next.stable_reps = 0;
            event(names.0, state.current_alpha, next.current_alpha);
        }
        Verdict::Plateau if !at_cap => {
            next.current_iterations = state
                .current_iterations
                .saturating_mul(rules.iteration_growth)
                .min(state.iteration_cap);
            next.stable_reps = 0;
            event(names.1, state.current_iterations as f64, next.current_iterations as f64);
        }
        Verdict::Plateau => {
            next.current_alpha = state.current_alpha * rules.alpha_decrease;
            next.stable_reps = 0;
            event(names.0, state.current_alpha, next.current_alpha);
        }
        Verdict::Improving if state.stable_reps >= rules.probe_after => {
            next.current_alpha = state.current_alpha * rules.alpha_increase;
            next.stable_reps = 0;
            event(names.0, state.current_alpha, next.current_alpha);
        }
        Verdict::Improving | Verdict::Converged => {
            next.stable_reps = state.stable_reps + 1;
        }
    }
    (next, events)
}

/// Names of the step-size and iteration-budget analogs for an algorithm.
pub fn parameter_names(algorithm: Algorithm) -> (&'static str, &'static str) {
    match algorithm {
        Algorithm::Gd => ("alpha", "iterations"),
        Algorithm::Nm => ("atol", "maxiter"),
        Algorithm::Mh | Algorithm::Sa => ("proposal_std", "n_iterations"),
        Algorithm::Ea => ("mutation_std", "generations"),
    }
}

/// Defaults of the step-size and iteration-budget analogs.
pub fn default_state(algorithm: Algorithm) -> ControllerState {
    use crate::config::defaults as d;
    match algorithm {
        Algorithm::Gd => ControllerState::new(d::ALPHA, d::ITERATIONS),
        Algorithm::Nm => ControllerState::new(d::ATOL, d::MAXITER),
        Algorithm::Mh | Algorithm::Sa => ControllerState::new(d::PROPOSAL_STD, d::N_ITERATIONS),
        Algorithm::Ea => ControllerState::new(d::MUTATION_STD, d::GENERATIONS),
    }
}

/// Number of acceptance-rate checkpoints a sampler repetition is scored on.
pub const SAMPLER_CHECKPOINTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub repetition: u32,
    pub alpha: f64,
    pub iterations: u64,
    pub best_loss: f64,
    pub verdict: Verdict,
    /// Objective or density evaluations spent by the repetition.
    pub cost: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneTable {
    pub algorithm: Algorithm,
    pub objective: ObjectiveId,
    pub master_seed: u64,
    pub rows: Vec<TuneRow>,
    /// Index into `rows` of the repetition with the lowest best loss.
    pub chosen: Option<usize>,
    pub adjustments: Vec<AdjustmentEvent>,
    pub final_state: ControllerState,
}

impl TuneTable {
    pub const CSV_HEADER: &'static str = "repetition,alpha,iterations,best_loss,verdict";

    pub fn chosen_row(&self) -> Option<&TuneRow> {
        self.chosen.map(|i| &self.rows[i])
    }

    /// Lowest best loss seen up to and including each row.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.rows
            .iter()
            .map(|r| {
                best = best.min(r.best_loss);
                best
            })
            .collect()
    }

    /// One JSON object per line: every adjustment, then the chosen row.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for a in &self.adjustments {
            serde_json::to_writer(&mut w, &serde_json::json!({ "kind": "adjustment", "event": a }))?;
            w.write_all(b"\n").map_err(|e| io_err("<jsonl>", e))?;
        }
        if let Some(row) = self.chosen_row() {
            serde_json::to_writer(&mut w, &serde_json::json!({ "kind": "chosen", "row": row }))?;
            w.write_all(b"\n").map_err(|e| io_err("<jsonl>", e))?;
        }
        Ok(())
    }

    pub fn jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

fn io_err(path: impl AsRef<Path>, source: std::io::Error) -> Error {
    Error::Io {
        path: path.as_ref().to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOptions {
    pub reps: u32,
    pub rules: Rules,
    pub initial: ControllerState,
    /// Settings held fixed across repetitions (e.g. SA cooling, EA flags).
    pub base: RunParams,
}

impl TuneOptions {
    pub fn new(algorithm: Algorithm, reps: u32) -> Self {
        Self {
            reps,
            rules: Rules::default(),
            initial: default_state(algorithm),
            base: RunParams::default(),
        }
    }
}

/// Controller metric trace and evaluation cost of one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct Repetition {
    pub losses: Vec<f64>,
    pub diverged: bool,
    pub cost: u64,
}

fn with_analogs(algorithm: Algorithm, base: &RunParams, alpha: f64, iterations: u64) -> RunParams {
    let mut p = base.clone();
    match algorithm {
        Algorithm::Gd => {
            p.alpha = Some(alpha);
            p.iterations = Some(iterations);
        }
        Algorithm::Nm => {
            p.atol = Some(alpha);
            p.maxiter = Some(iterations);
        }
        Algorithm::Mh | Algorithm::Sa => {
            p.proposal_std = Some(alpha);
            p.n_iterations = Some(iterations);
        }
        Algorithm::Ea => {
            p.mutation_std = Some(alpha);
            p.generations = Some(iterations);
        }
    }
    p
}

/// Runs one repetition and extracts the controller's loss metric.
pub fn run_repetition(
    algorithm: Algorithm,
    objective: ObjectiveId,
    params: &RunParams,
    seed: u64,
) -> Result<(AlgoConfig, Repetition)> {
    let mut params = params.clone();
    if matches!(algorithm, Algorithm::Mh | Algorithm::Sa) && params.init.is_none() {
        let mut rng = rng_from_seed(seed);
        params.init = Some(objective.domain().sample_uniform(&mut rng));
    }
    let cfg = params.resolve(algorithm, objective, seed)?;
    let mut runner = Runner::new(algorithm, objective, &cfg, seed)?;
    let events = drive(&mut runner, &[])?;
    let summary = runner.summary();
    let traces: Vec<&TracePayload> = events.iter().filter_map(|e| e.trace()).collect();
    let (losses, diverged) = match algorithm {
        Algorithm::Mh | Algorithm::Sa => {
            let n = traces.len();
            let mut losses = Vec::with_capacity(SAMPLER_CHECKPOINTS);
            for k in 1..=SAMPLER_CHECKPOINTS {
                let upto = n * k / SAMPLER_CHECKPOINTS;
                if upto == 0 {
                    continue;
                }
                let accepted = traces[..upto]
                    .iter()
                    .filter(|t| matches!(t, TracePayload::Chain(c) if c.accepted))
                    .count();
                losses.push((accepted as f64 / upto as f64 - 0.5).abs());
            }
            if losses.is_empty() {
                losses.push(0.5);
            }
            (losses, false)
        }
        _ => (
            traces.iter().map(|t| t.metric()).collect(),
            summary.diverged.unwrap_or(false),
        ),
    };
    Ok((
        cfg,
        Repetition {
            losses,
            diverged,
            cost: summary.evaluations,
        },
    ))
}

/// Runs `opts.reps` repetitions, adjusting parameters between them.
/// Repetition `r` (1-based) uses seed `mix(master_seed, r)`.
pub fn tune(algorithm: Algorithm, objective: ObjectiveId, opts: &TuneOptions, master_seed: u64) -> Result<TuneTable> {
    algorithm.check_pairing(objective)?;
    opts.rules.validate()?;
    opts.initial.validate()?;
    let names = parameter_names(algorithm);
    let mut state = opts.initial;
    let mut rows = Vec::with_capacity(opts.reps as usize);
    let mut adjustments = Vec::new();
    for r in 1..=opts.reps {
        let seed = mix(master_seed, u64::from(r));
        let params = with_analogs(algorithm, &opts.base, state.current_alpha, state.current_iterations);
        let (_, rep) = run_repetition(algorithm, objective, &params, seed)?;
        let verdict = classify(&rep.losses, rep.diverged, state.target_loss, opts.rules.plateau_tolerance);
        let best_loss = rep.losses.iter().copied().fold(f64::INFINITY, f64::min);
        rows.push(TuneRow {
            repetition: r,
            alpha: state.current_alpha,
            iterations: state.current_iterations,
            best_loss,
            verdict,
            cost: rep.cost,
            seed,
        });
        let (mut next, events) = next_params(&state, verdict, &opts.rules, r, names);
        next.last_best_loss = best_loss;
        adjustments.extend(events);
        state = next;
    }
    let chosen = rows
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |acc, (i, row)| match acc {
            Some((_, b)) if !(row.best_loss < b) => acc,
            _ => Some((i, row.best_loss)),
        })
        .map(|(i, _)| i);
    Ok(TuneTable {
        algorithm,
        objective,
        master_seed,
        rows,
        chosen,
        adjustments,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn replay(verdicts: &[Verdict]) -> Vec<(f64, u64)> {
        let rules = Rules::default();
        let mut s = ControllerState::new(0.001, 10);
        let mut hist = vec![(s.current_alpha, s.current_iterations)];
        for (i, v) in verdicts.iter().enumerate() {
            s = next_params(&s, *v, &rules, i as u32 + 1, ("alpha", "iterations")).0;
            hist.push((s.current_alpha, s.current_iterations));
        }
        hist
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify(&[5.0, 4.0, 3.0, 2.0, 1.0], false, 0.01, 1e-3), Verdict::Improving);
        assert_eq!(classify(&[1.0, 2.0], false, 0.01, 1e-3), Verdict::Diverged);
        assert_eq!(classify(&[3.0, 0.005], false, 0.01, 1e-3), Verdict::Converged);
        assert_eq!(classify(&[3.0, 2.0, 2.0, 2.0], false, 0.01, 1e-3), Verdict::Plateau);
        assert_eq!(classify(&[3.0, 0.0], true, 0.01, 1e-3), Verdict::Diverged);
        assert_eq!(classify(&[3.0], false, 0.01, 1e-3), Verdict::Plateau);
    }

    #[test]
    fn scripted_replay() {
        use Verdict::*;
        assert_eq!(
            replay(&[Plateau, Plateau, Diverged]),
            vec![(0.001, 10), (0.001, 20), (0.001, 40), (0.0005, 40)]
        );
    }

    #[test]
    fn converged_only_counts_stable_reps() {
        let s = ControllerState::new(0.001, 10);
        let (n, ev) = next_params(&s, Verdict::Converged, &Rules::default(), 1, ("alpha", "iterations"));
        assert!(ev.is_empty());
        assert_eq!(n.stable_reps, 1);
        assert_eq!((n.current_alpha, n.current_iterations), (0.001, 10));
    }

    #[test]
    fn probe_after_two_stable_reps() {
        use Verdict::*;
        let h = replay(&[Improving, Improving, Improving, Improving]);
        assert_eq!(h[2], (0.001, 10));
        assert_eq!(h[3], (0.002, 10));
        assert_eq!(h[4], (0.002, 10));
    }

    #[test]
    fn plateau_at_cap_halves_alpha() {
        let mut s = ControllerState::new(0.001, 6000);
        let r = Rules::default();
        s = next_params(&s, Verdict::Plateau, &r, 1, ("a", "i")).0;
        assert_eq!(s.current_iterations, DEFAULT_ITERATION_CAP);
        let (s2, ev) = next_params(&s, Verdict::Plateau, &r, 2, ("a", "i"));
        assert_eq!(s2.current_alpha, 0.0005);
        assert_eq!(ev[0].parameter, "a");
    }

    #[test]
    fn one_rep_has_no_adjustment_before_it() {
        let t = tune(Algorithm::Gd, ObjectiveId::Bohachevsky, &TuneOptions::new(Algorithm::Gd, 1), 3).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].alpha, 0.001);
        assert_eq!(t.rows[0].iterations, 10);
        assert_eq!(t.chosen, Some(0));
    }

    #[test]
    fn invalid_pairing_is_rejected() {
        let e = tune(Algorithm::Gd, ObjectiveId::Booth, &TuneOptions::new(Algorithm::Gd, 3), 0).unwrap_err();
        assert_eq!(e.field(), Some("objective"));
    }

    #[test]
    fn every_change_has_one_event() {
        for a in [Algorithm::Gd, Algorithm::Nm, Algorithm::Mh] {
            let t = tune(a, a.default_objective(), &TuneOptions::new(a, 8), 11).unwrap();
            for w in t.rows.windows(2) {
                let rep = w[0].repetition;
                let n = t.adjustments.iter().filter(|e| e.repetition == rep).count();
                let changed =
                    u32::from(w[0].alpha != w[1].alpha) + u32::from(w[0].iterations != w[1].iterations);
                assert_eq!(n as u32, changed);
            }
            let b = t.best_so_far();
            assert!(b.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}
