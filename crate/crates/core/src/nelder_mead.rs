//! Nelder-Mead downhill simplex minimizer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{evaluate, ObjectiveId, Point};

/// Reflection, expansion, contraction and shrink coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
}

impl Default for Coefficients {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
        }
    }
}

impl Coefficients {
    pub fn validate(&self) -> Result<()> {
        if !(self.reflection > 0.0) {
            return Err(Error::config("reflection", "must be > 0"));
        }
        if !(self.expansion > 1.0) {
            return Err(Error::config("expansion", "must be > 1"));
        }
        if !(self.contraction > 0.0 && self.contraction < 1.0) {
            return Err(Error::config("contraction", "must be in (0, 1)"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::config("shrink", "must be in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmConfig {
    /// Tolerance on both simplex diameter and value spread.
    pub atol: f64,
    pub maxiter: u64,
    pub init: Point,
    #[serde(default)]
    pub coefficients: Coefficients,
    #[serde(default = "default_scale")]
    pub simplex_scale: f64,
}

fn default_scale() -> f64 {
    0.05
}

impl NmConfig {
    pub fn new(atol: f64, maxiter: u64, init: Point) -> Self {
        Self {
            atol,
            maxiter,
            init,
            coefficients: Coefficients::default(),
            simplex_scale: default_scale(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.atol > 0.0) {
            return Err(Error::config("atol", "must be positive"));
        }
        if self.maxiter < 1 {
            return Err(Error::config("maxiter", "must be at least 1"));
        }
        if !(self.simplex_scale > 0.0) {
            return Err(Error::config("simplex_scale", "must be positive"));
        }
        if self.init.is_empty() || self.init.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("init", "must be a finite, non-empty point"));
        }
        self.coefficients.validate()
    }
}

/// Which rule produced the current simplex from the previous one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Move {
    Init,
    Reflect,
    Expand,
    OutsideContract,
    InsideContract,
    Shrink,
}

/// `dim + 1` vertices kept sorted by ascending objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    pub vertices: Vec<Point>,
    pub values: Vec<f64>,
}

impl Simplex {
    pub fn evaluate<F: Fn(&[f64]) -> f64>(vertices: Vec<Point>, f: F) -> Self {
        let values = vertices.iter().map(|v| f(v)).collect();
        let mut s = Self { vertices, values };
        s.order();
        s
    }

    /// Stable sort by value, so earlier vertices win ties.
    pub fn order(&mut self) {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        self.vertices = idx.iter().map(|&i| self.vertices[i].clone()).collect();
        self.values = idx.iter().map(|&i| self.values[i]).collect();
    }

    pub fn best(&self) -> (&Point, f64) {
        (&self.vertices[0], self.values[0])
    }

    /// Largest infinity-norm distance from the best vertex.
    pub fn diameter(&self) -> f64 {
        let best = &self.vertices[0];
        self.vertices[1..]
            .iter()
            .flat_map(|v| v.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    pub fn spread(&self) -> f64 {
        self.values[1..]
            .iter()
            .map(|v| (v - self.values[0]).abs())
            .fold(0.0, f64::max)
    }
}

/// Vertex 0 is `init`; vertex `i` offsets coordinate `i - 1` by
/// `scale * max(1, |init[i - 1]|)`.
pub fn initial_simplex(init: &[f64], scale: f64) -> Vec<Point> {
    let mut vertices = vec![init.to_vec()];
    for i in 0..init.len() {
        let mut v = init.to_vec();
        v[i] += scale * init[i].abs().max(1.0);
        vertices.push(v);
    }
    vertices
}

fn along(from: &[f64], to: &[f64], t: f64) -> Point {
    from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
}

/// One Nelder-Mead cycle on an ordered simplex.
pub fn nm_iterate<F: Fn(&[f64]) -> f64>(s: &Simplex, f: F, c: &Coefficients) -> (Simplex, Move) {
    let n = s.vertices.len() - 1;
    let dim = s.vertices[0].len();
    let mut centroid = vec![0.0; dim];
    for v in &s.vertices[..n] {
        for (c, x) in centroid.iter_mut().zip(v) {
            *c += x / n as f64;
        }
    }
    let worst = &s.vertices[n];
    let (f_best, f_second, f_worst) = (s.values[0], s.values[n - 1], s.values[n]);

    // x_r = c + rho (c - x_worst)
    let reflected = along(&centroid, worst, -c.reflection);
    let f_r = f(&reflected);

    let (accepted, mv) = if f_r < f_best {
        let expanded = along(&centroid, worst, -c.reflection * c.expansion);
        let f_e = f(&expanded);
        if f_e < f_r {
            (Some((expanded, f_e)), Move::Expand)
        } else {
            (Some((reflected, f_r)), Move::Reflect)
        }
    } else if f_r <= f_second {
        (Some((reflected, f_r)), Move::Reflect)
    } else if f_r < f_worst {
        let p = along(&centroid, worst, -c.reflection * c.contraction);
        let v = f(&p);
        ((v <= f_r).then_some((p, v)), Move::OutsideContract)
    } else {
        let p = along(&centroid, worst, c.contraction);
        let v = f(&p);
        ((v < f_worst).then_some((p, v)), Move::InsideContract)
    };

    let mut next = s.clone();
    let mv = match accepted {
        Some((p, v)) => {
            next.vertices[n] = p;
            next.values[n] = v;
            mv
        }
        None => {
            let best = &s.vertices[0];
            for i in 1..=n {
                next.vertices[i] = along(best, &s.vertices[i], c.shrink);
                next.values[i] = f(&next.vertices[i]);
            }
            Move::Shrink
        }
    };
    next.order();
    (next, mv)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmResult {
    pub best_point: Point,
    pub best_value: f64,
    pub iterations_used: u64,
    pub converged: bool,
    /// Best value after each iteration, starting with the initial simplex.
    pub trace: Vec<f64>,
}

/// Iteration-at-a-time minimizer, also used by live runs.
#[derive(Debug, Clone)]
pub struct NmState<F> {
    f: F,
    pub atol: f64,
    pub maxiter: u64,
    coefficients: Coefficients,
    simplex: Simplex,
    next_iteration: u64,
    converged: bool,
    trace: Vec<f64>,
    evaluations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmTick {
    pub iteration: u64,
    pub best_value: f64,
    pub best_point: Point,
    pub movement: Move,
    pub diameter: f64,
    pub spread: f64,
}

impl<F: Fn(&[f64]) -> f64> NmState<F> {
    pub fn new(cfg: &NmConfig, f: F) -> Result<Self> {
        cfg.validate()?;
        let simplex = Simplex::evaluate(initial_simplex(&cfg.init, cfg.simplex_scale), &f);
        let evaluations = simplex.values.len() as u64;
        Ok(Self {
            f,
            atol: cfg.atol,
            maxiter: cfg.maxiter,
            coefficients: cfg.coefficients,
            simplex,
            next_iteration: 0,
            converged: false,
            trace: Vec::new(),
            evaluations,
        })
    }

    /// Objective evaluations spent so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn next_iteration(&self) -> u64 {
        self.next_iteration
    }

    pub fn simplex(&self) -> &Simplex {
        &self.simplex
    }

    fn iterations_used(&self) -> u64 {
        self.next_iteration.saturating_sub(1)
    }

    pub fn is_finished(&self) -> bool {
        self.next_iteration > 0 && (self.converged || self.iterations_used() >= self.maxiter)
    }

    fn tick(&mut self, movement: Move) -> NmTick {
        let (p, v) = self.simplex.best();
        let best = self.trace.last().map_or(v, |b| b.min(v));
        self.trace.push(best);
        let tick = NmTick {
            iteration: self.next_iteration,
            best_value: v,
            best_point: p.clone(),
            movement,
            diameter: self.simplex.diameter(),
            spread: self.simplex.spread(),
        };
        self.converged = tick.diameter < self.atol && tick.spread < self.atol;
        self.next_iteration += 1;
        tick
    }

    /// Reports the initial simplex first, then one cycle per call.
    pub fn advance(&mut self) -> Option<NmTick> {
        if self.is_finished() {
            return None;
        }
        if self.next_iteration == 0 {
            return Some(self.tick(Move::Init));
        }
        let count = std::cell::Cell::new(0u64);
        let f = &self.f;
        let counted = |x: &[f64]| {
            count.set(count.get() + 1);
            f(x)
        };
        let (next, mv) = nm_iterate(&self.simplex, counted, &self.coefficients);
        self.evaluations += count.get();
        self.simplex = next;
        Some(self.tick(mv))
    }

    pub fn result(&self) -> NmResult {
        let (p, v) = self.simplex.best();
        NmResult {
            best_point: p.clone(),
            best_value: v,
            iterations_used: self.iterations_used(),
            converged: self.converged,
            trace: self.trace.clone(),
        }
    }
}

/// Minimizes a scalar objective until the simplex collapses below `atol`
/// or `maxiter` cycles have run.
pub fn nm_minimize(objective: ObjectiveId, cfg: &NmConfig) -> Result<NmResult> {
    if !matches!(objective, ObjectiveId::Booth | ObjectiveId::Bohachevsky) {
        return Err(Error::UnsupportedObjective {
            id: objective,
            what: "simplex minimization",
        });
    }
    if cfg.init.len() != 2 {
        return Err(Error::config("init", "must be 2-dimensional"));
    }
    nm_minimize_fn(cfg, |x: &[f64]| evaluate(objective, x).expect("checked dimension"))
}

pub fn nm_minimize_fn<F: Fn(&[f64]) -> f64>(cfg: &NmConfig, f: F) -> Result<NmResult> {
    let mut state = NmState::new(cfg, f)?;
    while state.advance().is_some() {}
    Ok(state.result())
}
