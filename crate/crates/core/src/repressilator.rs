//! Six-state repressilator model and the trajectory-matching fitness used by
//! the evolutionary optimizer.
//!
//! State layout is `[m1, m2, m3, p1, p2, p3]`. Gene `i` is repressed by the
//! protein of the previous gene in the cycle: m1 by p3, m2 by p1, m3 by p2.
//!
//! ```text
//! dm_i/dt = -m_i + alpha / (1 + p_j^eta) + alpha0
//! dp_i/dt = -beta (p_i - m_i)
//! ```

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower corner of the parameter box, ordered `(alpha0, eta, beta, alpha)`.
pub const LOWER_BOUNDS: [f64; 4] = [-2.0, 0.0, -5.0, 500.0];
pub const UPPER_BOUNDS: [f64; 4] = [10.0, 10.0, 20.0, 2500.0];

/// Parameters that generate the reference trajectory.
pub const REFERENCE_PARAMS: RepressilatorParams = RepressilatorParams {
    alpha0: 1.0,
    eta: 2.0,
    beta: 5.0,
    alpha: 1000.0,
};
pub const REFERENCE_Y0: State = [0.0, 0.0, 0.0, 1.0, 2.0, 3.0];
pub const REFERENCE_DT: f64 = 0.05;
pub const REFERENCE_T_END: f64 = 10.0;

/// Fitness assigned when integration leaves the finite range.
pub const BLOWUP_PENALTY: f64 = 1e12;

pub type State = [f64; 6];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepressilatorParams {
    /// Basal (leaky) transcription rate.
    pub alpha0: f64,
    /// Hill coefficient.
    pub eta: f64,
    /// Protein to mRNA decay ratio.
    pub beta: f64,
    /// Maximal transcription rate.
    pub alpha: f64,
}

impl RepressilatorParams {
    pub fn from_genome(g: &[f64]) -> Result<Self> {
        if g.len() != 4 {
            return Err(Error::Dimension {
                expected: 4,
                got: g.len(),
            });
        }
        Ok(Self {
            alpha0: g[0],
            eta: g[1],
            beta: g[2],
            alpha: g[3],
        })
    }

    pub fn to_genome(self) -> [f64; 4] {
        [self.alpha0, self.eta, self.beta, self.alpha]
    }

    pub fn in_bounds(&self) -> bool {
        self.to_genome()
            .iter()
            .zip(LOWER_BOUNDS.iter().zip(&UPPER_BOUNDS))
            .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    fn derivative(&self, y: &State) -> State {
        let hill = |p: f64| self.alpha / (1.0 + p.powf(self.eta)) + self.alpha0;
        [
            -y[0] + hill(y[5]),
            -y[1] + hill(y[3]),
            -y[2] + hill(y[4]),
            -self.beta * (y[3] - y[0]),
            -self.beta * (y[4] - y[1]),
            -self.beta * (y[5] - y[2]),
        ]
    }
}

/// States sampled on a uniform time grid starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<State>,
}

impl Trajectory {
    pub const CSV_HEADER: [&'static str; 7] = ["t", "m1", "m2", "m3", "p1", "p2", "p3"];

    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(t, s)| std::iter::once(*t).chain(s.iter().copied()).collect())
            .collect()
    }
}

fn axpy(y: &State, h: f64, k: &State) -> State {
    std::array::from_fn(|i| y[i] + h * k[i])
}

/// Classical fixed-step fourth-order Runge-Kutta integration up to `t_end`.
///
/// The number of steps is `round(t_end / dt)`.
pub fn trajectory(p: &RepressilatorParams, y0: State, dt: f64, t_end: f64) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config("dt", "must be positive and finite"));
    }
    if !(t_end >= dt) {
        return Err(Error::config("t_end", "must be at least one step"));
    }
    if !(p.eta >= 0.0) {
        return Err(Error::config("eta", "Hill coefficient must be nonnegative"));
    }
    let steps = (t_end / dt).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut y = y0;
    times.push(0.0);
    states.push(y);
    for n in 1..=steps {
        let k1 = p.derivative(&y);
        let k2 = p.derivative(&axpy(&y, dt / 2.0, &k1));
        let k3 = p.derivative(&axpy(&y, dt / 2.0, &k2));
        let k4 = p.derivative(&axpy(&y, dt, &k3));
        for i in 0..6 {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = n as f64 * dt;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationBlowup { t });
        }
        times.push(t);
        states.push(y);
    }
    Ok(Trajectory { dt, times, states })
}

/// Trajectory of the reference parameters on the fitness grid.
pub fn reference_trajectory() -> &'static Trajectory {
    static REFERENCE: OnceLock<Trajectory> = OnceLock::new();
    REFERENCE.get_or_init(|| {
        trajectory(&REFERENCE_PARAMS, REFERENCE_Y0, REFERENCE_DT, REFERENCE_T_END)
            .expect("reference parameters integrate cleanly")
    })
}

/// Sum of squared state differences against the reference trajectory.
/// Lower is better; parameters that blow up score [`BLOWUP_PENALTY`].
pub fn fitness(p: &RepressilatorParams) -> f64 {
    let traj = match trajectory(p, REFERENCE_Y0, REFERENCE_DT, REFERENCE_T_END) {
        Ok(t) => t,
        Err(_) => return BLOWUP_PENALTY,
    };
    let sse: f64 = traj
        .states
        .iter()
        .zip(&reference_trajectory().states)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)))
        .sum();
    if sse.is_finite() {
        sse.min(BLOWUP_PENALTY)
    } else {
        BLOWUP_PENALTY
    }
}

pub fn genome_fitness(genome: &[f64]) -> f64 {
    match RepressilatorParams::from_genome(genome) {
        Ok(p) => fitness(&p),
        Err(_) => BLOWUP_PENALTY,
    }
}
