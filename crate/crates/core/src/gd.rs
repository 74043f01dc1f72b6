//! Fixed-step full-gradient descent on the bohachevsky objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{bohachevsky, bohachevsky_gradient, ObjectiveId, Point};

/// Loss above which a run is considered diverged.
pub const DIVERGENCE_LOSS: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdConfig {
    /// Step size (learning rate).
    pub alpha: f64,
    pub iterations: u64,
    pub init: Point,
    #[serde(default = "default_clip")]
    pub clip_to_domain: bool,
}

fn default_clip() -> bool {
    true
}

impl GdConfig {
    pub fn new(alpha: f64, iterations: u64, init: Point) -> Self {
        Self {
            alpha,
            iterations,
            init,
            clip_to_domain: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("alpha", "must be positive"));
        }
        let dom = ObjectiveId::Bohachevsky.domain();
        if !dom.contains(&self.init).map_err(|_| Error::config("init", "must be 2-dimensional"))? {
            return Err(Error::config("init", "must lie in [-100, 100]^2"));
        }
        Ok(())
    }
}

/// Per-iteration losses of one descent run; index 0 is the initial point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub losses: Vec<f64>,
    pub points: Vec<Point>,
    pub best_loss: f64,
    pub best_point: Point,
    pub diverged: bool,
}

impl LossTrace {
    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("trace is never empty")
    }
}

/// One descent step `x - alpha * grad f(x)`, optionally clamped to `[-100, 100]^2`.
pub fn gd_step(x: &[f64], alpha: f64, clip_to_domain: bool) -> Point {
    let g = bohachevsky_gradient(x[0], x[1]);
    let mut next: Point = x.iter().zip(g).map(|(v, d)| v - alpha * d).collect();
    if clip_to_domain {
        ObjectiveId::Bohachevsky.domain().clamp(&mut next);
    }
    next
}

/// Iteration-at-a-time descent, also used by live runs.
#[derive(Debug, Clone)]
pub struct GdState {
    pub alpha: f64,
    pub iterations: u64,
    clip: bool,
    x: Point,
    next_iteration: u64,
    pub trace: LossTrace,
}

/// What one call to [`GdState::advance`] observed.
#[derive(Debug, Clone, PartialEq)]
pub struct GdTick {
    pub iteration: u64,
    pub loss: f64,
    pub point: Point,
    pub alpha: f64,
}

impl GdState {
    pub fn new(cfg: &GdConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            alpha: cfg.alpha,
            iterations: cfg.iterations,
            clip: cfg.clip_to_domain,
            x: cfg.init.clone(),
            next_iteration: 0,
            trace: LossTrace {
                losses: Vec::new(),
                points: Vec::new(),
                best_loss: f64::INFINITY,
                best_point: cfg.init.clone(),
                diverged: false,
            },
        })
    }

    pub fn next_iteration(&self) -> u64 {
        self.next_iteration
    }

    pub fn is_finished(&self) -> bool {
        self.trace.diverged || self.next_iteration > self.iterations
    }

    /// Records the loss at iteration 0, then takes one step per call.
    /// Returns `None` when the new iterate diverged; the trace keeps the last
    /// finite iterate.
    pub fn advance(&mut self) -> Option<GdTick> {
        if self.is_finished() {
            return None;
        }
        let candidate = if self.next_iteration == 0 {
            self.x.clone()
        } else {
            gd_step(&self.x, self.alpha, self.clip)
        };
        let loss = bohachevsky(candidate[0], candidate[1]);
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            self.trace.diverged = true;
            return None;
        }
        self.x = candidate;
        if loss < self.trace.best_loss {
            self.trace.best_loss = loss;
            self.trace.best_point = self.x.clone();
        }
        self.trace.losses.push(loss);
        self.trace.points.push(self.x.clone());
        let tick = GdTick {
            iteration: self.next_iteration,
            loss,
            point: self.x.clone(),
            alpha: self.alpha,
        };
        self.next_iteration += 1;
        Some(tick)
    }
}

/// Runs `cfg.iterations` descent steps from `cfg.init`.
pub fn gd_run(cfg: &GdConfig) -> Result<LossTrace> {
    let mut state = GdState::new(cfg)?;
    while state.advance().is_some() {}
    Ok(state.trace)
}
