//! Metropolis-Hastings and simulated annealing over the 2-d target densities.
//!
//! Both samplers share one chain: a Gaussian random-walk proposal that is
//! re-drawn until it lands inside the domain, and the Metropolis acceptance
//! rule applied to log densities. Simulated annealing divides the log ratio by
//! a temperature `t0 * cooling^i`; plain MH runs at temperature 1.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{BoxDomain, ObjectiveId, Point};

pub const DEFAULT_MAX_REDRAWS: u64 = 1000;

/// Geometric cooling `t0 * cooling^i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoolingSchedule {
    pub t0: f64,
    pub cooling: f64,
}

impl CoolingSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::config("t0", "must be positive"));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::config("cooling", "must be in (0, 1)"));
        }
        Ok(())
    }

    pub fn temperature(&self, i: u64) -> f64 {
        sa_temperature(i, self.t0, self.cooling)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub target: ObjectiveId,
    pub init: Point,
    pub n_iterations: u64,
    pub proposal_std: f64,
    /// Present for simulated annealing, absent for plain Metropolis-Hastings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<CoolingSchedule>,
    #[serde(default = "default_redraws")]
    pub max_proposal_redraws: u64,
}

fn default_redraws() -> u64 {
    DEFAULT_MAX_REDRAWS
}

impl ChainConfig {
    pub fn metropolis(target: ObjectiveId, init: Point, n_iterations: u64, proposal_std: f64) -> Self {
        Self {
            target,
            init,
            n_iterations,
            proposal_std,
            schedule: None,
            max_proposal_redraws: DEFAULT_MAX_REDRAWS,
        }
    }

    pub fn annealing(
        target: ObjectiveId,
        init: Point,
        n_iterations: u64,
        proposal_std: f64,
        schedule: CoolingSchedule,
    ) -> Self {
        Self {
            schedule: Some(schedule),
            ..Self::metropolis(target, init, n_iterations, proposal_std)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.target.is_density() {
            return Err(Error::UnsupportedObjective {
                id: self.target,
                what: "sampling",
            });
        }
        let dom = self.target.domain();
        match dom.contains(&self.init) {
            Ok(true) => {}
            _ => return Err(Error::config("init", "must lie inside the target domain")),
        }
        if !(self.proposal_std > 0.0 && self.proposal_std.is_finite()) {
            return Err(Error::config("proposal_std", "must be positive"));
        }
        if self.max_proposal_redraws == 0 {
            return Err(Error::config("max_proposal_redraws", "must be at least 1"));
        }
        if let Some(s) = &self.schedule {
            s.validate()?;
        }
        Ok(())
    }
}

/// One proposal and its accept/reject decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub index: u64,
    /// State the candidate was proposed from.
    pub current: Point,
    pub candidate: Point,
    /// Acceptance probability.
    pub alpha: f64,
    pub u: f64,
    pub accepted: bool,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleRun {
    pub steps: Vec<ChainStep>,
    pub accepted_points: Vec<Point>,
    pub rejected_points: Vec<Point>,
    /// +1 per accepted, -1 per rejected candidate.
    pub acceptance_count: i64,
    pub mean_alpha: f64,
}

impl SampleRun {
    pub fn n(&self) -> usize {
        self.steps.len()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.steps.is_empty() {
            0.0
        } else {
            self.accepted_points.len() as f64 / self.steps.len() as f64
        }
    }

    /// Chain state after every step (repeats the old state on rejection).
    pub fn chain_states(&self) -> Vec<Point> {
        self.steps
            .iter()
            .map(|s| {
                if s.accepted {
                    s.candidate.clone()
                } else {
                    s.current.clone()
                }
            })
            .collect()
    }

    fn record(&mut self, step: ChainStep) {
        if step.accepted {
            self.accepted_points.push(step.candidate.clone());
            self.acceptance_count += 1;
        } else {
            self.rejected_points.push(step.candidate.clone());
            self.acceptance_count -= 1;
        }
        let n = self.steps.len() as f64;
        self.mean_alpha = (self.mean_alpha * n + step.alpha) / (n + 1.0);
        self.steps.push(step);
    }
}

/// Gaussian random-walk proposal, re-drawn until it falls inside `domain`.
pub fn propose<R: Rng + ?Sized>(
    current: &[f64],
    std: f64,
    domain: &BoxDomain,
    rng: &mut R,
    max_redraws: u64,
) -> Result<Point> {
    let normal = Normal::new(0.0, std).map_err(|e| Error::config("proposal_std", e.to_string()))?;
    for _ in 0..max_redraws {
        let candidate: Point = current.iter().map(|c| c + normal.sample(rng)).collect();
        if domain.contains_unchecked(&candidate) {
            return Ok(candidate);
        }
    }
    Err(Error::ProposalExhausted(max_redraws))
}

/// `min(1, exp((log_p_candidate - log_p_current) / temperature))`.
pub fn acceptance_probability(log_p_current: f64, log_p_candidate: f64, temperature: f64) -> f64 {
    let r = ((log_p_candidate - log_p_current) / temperature).exp();
    if r.is_nan() {
        0.0
    } else {
        r.min(1.0)
    }
}

pub fn sa_temperature(i: u64, t0: f64, cooling: f64) -> f64 {
    t0 * cooling.powf(i as f64)
}

/// Iteration-at-a-time chain, also used by live runs.
#[derive(Debug, Clone)]
pub struct ChainState<F> {
    log_p: F,
    domain: BoxDomain,
    pub proposal_std: f64,
    pub schedule: Option<CoolingSchedule>,
    pub n_iterations: u64,
    max_redraws: u64,
    current: Point,
    log_p_current: f64,
    pub run: SampleRun,
}

impl<F: Fn(&[f64]) -> f64> ChainState<F> {
    pub fn with_target(cfg: &ChainConfig, domain: BoxDomain, log_p: F) -> Self {
        let log_p_current = log_p(&cfg.init);
        Self {
            log_p,
            domain,
            proposal_std: cfg.proposal_std,
            schedule: cfg.schedule,
            n_iterations: cfg.n_iterations,
            max_redraws: cfg.max_proposal_redraws,
            current: cfg.init.clone(),
            log_p_current,
            run: SampleRun::default(),
        }
    }

    pub fn next_iteration(&self) -> u64 {
        self.run.steps.len() as u64
    }

    pub fn is_finished(&self) -> bool {
        self.next_iteration() >= self.n_iterations
    }

    pub fn current(&self) -> &Point {
        &self.current
    }

    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<&ChainStep>> {
        if self.is_finished() {
            return Ok(None);
        }
        let index = self.next_iteration();
        let temperature = self.schedule.map_or(1.0, |s| s.temperature(index));
        let candidate = propose(&self.current, self.proposal_std, &self.domain, rng, self.max_redraws)?;
        let log_p_candidate = (self.log_p)(&candidate);
        let alpha = acceptance_probability(self.log_p_current, log_p_candidate, temperature);
        let u: f64 = rng.random();
        let accepted = u < alpha;
        let step = ChainStep {
            index,
            current: self.current.clone(),
            candidate: candidate.clone(),
            alpha,
            u,
            accepted,
            temperature,
        };
        if accepted {
            self.current = candidate;
            self.log_p_current = log_p_candidate;
        }
        self.run.record(step);
        Ok(self.run.steps.last())
    }
}

impl ChainState<fn(&[f64]) -> f64> {
    pub fn new(cfg: &ChainConfig) -> Result<Self> {
        cfg.validate()?;
        let log_p: fn(&[f64]) -> f64 = match cfg.target {
            ObjectiveId::MhDensity => |x| crate::objectives::mh_log_density(x[0], x[1]),
            _ => |x| crate::objectives::sa_log_density(x[0], x[1]),
        };
        Ok(Self::with_target(cfg, cfg.target.domain(), log_p))
    }
}

/// Runs a full chain on the configured target density.
pub fn chain_run<R: Rng + ?Sized>(cfg: &ChainConfig, rng: &mut R) -> Result<SampleRun> {
    let mut state = ChainState::new(cfg)?;
    while state.advance(rng)?.is_some() {}
    Ok(state.run)
}

/// Runs a chain against an arbitrary log density on `domain`.
pub fn chain_run_with<F, R>(cfg: &ChainConfig, domain: BoxDomain, log_p: F, rng: &mut R) -> Result<SampleRun>
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let mut state = ChainState::with_target(cfg, domain, log_p);
    while state.advance(rng)?.is_some() {}
    Ok(state.run)
}

/// Occupancy counts on a `bins × bins` grid of equal cells; points on the
/// upper boundary fall in the last cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bins: usize,
    /// Row-major, x1 index fastest.
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn at(&self, bx: usize, by: usize) -> u64 {
        self.counts[by * self.bins + bx]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `(bin_x, bin_y)` of the fullest cell; earlier cells win ties.
    pub fn argmax(&self) -> (usize, usize) {
        let k = self
            .counts
            .iter()
            .enumerate()
            .fold(0, |best, (k, c)| if *c > self.counts[best] { k } else { best });
        (k % self.bins, k / self.bins)
    }

    pub fn csv_rows(&self) -> Vec<(usize, usize, u64)> {
        (0..self.bins)
            .flat_map(|by| (0..self.bins).map(move |bx| (bx, by)))
            .map(|(bx, by)| (bx, by, self.at(bx, by)))
            .collect()
    }
}

pub fn bin_index(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
    if hi == lo {
        return 0;
    }
    (((v - lo) / (hi - lo) * bins as f64).floor() as usize).min(bins - 1)
}

pub fn density_histogram(points: &[Point], domain: &BoxDomain, bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    if domain.dim() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: domain.dim(),
        });
    }
    let mut counts = vec![0; bins * bins];
    for p in points {
        if !domain.contains(p)? {
            return Err(Error::InvalidArgument(format!(
                "point {p:?} lies outside the histogram domain"
            )));
        }
        let bx = bin_index(p[0], domain.lower()[0], domain.upper()[0], bins);
        let by = bin_index(p[1], domain.lower()[1], domain.upper()[1], bins);
        counts[by * bins + bx] += 1;
    }
    Ok(Histogram { bins, counts })
}
