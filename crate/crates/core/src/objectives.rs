//! Benchmark objectives, target densities and their box domains.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::repressilator;

/// A point in the search space.
pub type Point = Vec<f64>;

/// Closed axis-aligned box `[lower[i], upper[i]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::InvalidArgument(format!(
                    "bad interval [{lo}, {hi}] in dimension {i}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The same interval in every one of `dim` dimensions.
    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Inclusive membership test.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.check_dim(x)?;
        Ok(self.contains_unchecked(x))
    }

    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| {
                if lo == hi {
                    lo
                } else {
                    lo + (hi - lo) * rng.random::<f64>()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveId {
    Bohachevsky,
    Booth,
    MhDensity,
    SaDensity,
    Repressilator,
}

impl ObjectiveId {
    pub const ALL: [ObjectiveId; 5] = [
        ObjectiveId::Bohachevsky,
        ObjectiveId::Booth,
        ObjectiveId::MhDensity,
        ObjectiveId::SaDensity,
        ObjectiveId::Repressilator,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveId::Bohachevsky => "bohachevsky",
            ObjectiveId::Booth => "booth",
            ObjectiveId::MhDensity => "mh_density",
            ObjectiveId::SaDensity => "sa_density",
            ObjectiveId::Repressilator => "repressilator",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ObjectiveId::Repressilator => 4,
            _ => 2,
        }
    }

    pub fn domain(self) -> BoxDomain {
        let (lower, upper) = match self {
            ObjectiveId::Bohachevsky | ObjectiveId::Booth => {
                (vec![-100.0, -100.0], vec![100.0, 100.0])
            }
            ObjectiveId::MhDensity | ObjectiveId::SaDensity => (vec![-3.0, 2.0], vec![3.0, 4.0]),
            ObjectiveId::Repressilator => (
                repressilator::LOWER_BOUNDS.to_vec(),
                repressilator::UPPER_BOUNDS.to_vec(),
            ),
        };
        BoxDomain { lower, upper }
    }

    pub fn is_density(self) -> bool {
        matches!(self, ObjectiveId::MhDensity | ObjectiveId::SaDensity)
    }

    fn check_dim(self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for ObjectiveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectiveId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ObjectiveId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown objective `{s}`")))
    }
}

pub fn bohachevsky(x1: f64, x2: f64) -> f64 {
    x1 * x1 + 2.0 * x2 * x2 - 0.3 * (3.0 * PI * x1).cos() - 0.4 * (4.0 * PI * x2).cos() + 0.7
}

pub fn booth(x1: f64, x2: f64) -> f64 {
    (x1 + 2.0 * x2 - 7.0).powi(2) + (2.0 * x1 + x2 - 5.0).powi(2)
}

/// Exponent of the unnormalized target sampled by Metropolis-Hastings.
pub fn mh_log_density(x1: f64, x2: f64) -> f64 {
    let a = x1.sin() * (1.0 - x2.cos()).powi(2).exp();
    let b = x2.cos() * (1.0 - x1.sin()).powi(2).exp();
    -0.01 * (a + b + (x1 - x2).powi(2))
}

/// Exponent of the unnormalized target sampled by simulated annealing.
pub fn sa_log_density(x1: f64, x2: f64) -> f64 {
    let a = x1.cos() * (1.0 - x2.sin()).powi(2).exp();
    let b = x2.sin() * (1.0 + x1.cos()).powi(2).exp();
    -0.02 * (a - b - (x1 - x2).powi(2))
}

/// Scalar objective value for `bohachevsky` and `booth`.
pub fn evaluate(id: ObjectiveId, x: &[f64]) -> Result<f64> {
    id.check_dim(x)?;
    match id {
        ObjectiveId::Bohachevsky => Ok(bohachevsky(x[0], x[1])),
        ObjectiveId::Booth => Ok(booth(x[0], x[1])),
        _ => Err(Error::UnsupportedObjective {
            id,
            what: "scalar evaluation",
        }),
    }
}

/// Analytic gradient; only bohachevsky has one.
pub fn gradient(id: ObjectiveId, x: &[f64]) -> Result<Point> {
    if id != ObjectiveId::Bohachevsky {
        return Err(Error::UnsupportedObjective {
            id,
            what: "gradients",
        });
    }
    id.check_dim(x)?;
    Ok(bohachevsky_gradient(x[0], x[1]).to_vec())
}

pub(crate) fn bohachevsky_gradient(x1: f64, x2: f64) -> [f64; 2] {
    [
        2.0 * x1 + 0.9 * PI * (3.0 * PI * x1).sin(),
        4.0 * x2 + 1.6 * PI * (4.0 * PI * x2).sin(),
    ]
}

pub fn log_density(id: ObjectiveId, x: &[f64]) -> Result<f64> {
    id.check_dim(x)?;
    match id {
        ObjectiveId::MhDensity => Ok(mh_log_density(x[0], x[1])),
        ObjectiveId::SaDensity => Ok(sa_log_density(x[0], x[1])),
        _ => Err(Error::UnsupportedObjective {
            id,
            what: "log densities",
        }),
    }
}

/// Values of a 2-d objective sampled on a regular lattice over its domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub resolution: usize,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    /// Row-major with `x1` varying fastest.
    pub values: Vec<f64>,
}

impl Grid {
    pub fn at(&self, i1: usize, i2: usize) -> f64 {
        self.values[i2 * self.resolution + i1]
    }

    /// Lattice indices `(i1, i2)` of the largest value.
    pub fn argmax(&self) -> (usize, usize) {
        let k = self
            .values
            .iter()
            .enumerate()
            .fold(0, |best, (k, v)| if *v > self.values[best] { k } else { best });
        (k % self.resolution, k / self.resolution)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        let mut rows = Vec::with_capacity(self.values.len());
        for (i2, &x2) in self.x2.iter().enumerate() {
            for (i1, &x1) in self.x1.iter().enumerate() {
                rows.push(vec![x1, x2, self.at(i1, i2)]);
            }
        }
        rows
    }
}

fn lattice(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Objective (or unnormalized density) on a `resolution × resolution` lattice.
pub fn grid_eval(id: ObjectiveId, resolution: usize) -> Result<Grid> {
    if id.dim() != 2 {
        return Err(Error::UnsupportedObjective {
            id,
            what: "grid evaluation",
        });
    }
    if resolution < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must be at least 2, got {resolution}"
        )));
    }
    let dom = id.domain();
    let x1 = lattice(dom.lower[0], dom.upper[0], resolution);
    let x2 = lattice(dom.lower[1], dom.upper[1], resolution);
    let mut values = Vec::with_capacity(resolution * resolution);
    for &b in &x2 {
        for &a in &x1 {
            let v = if id.is_density() {
                log_density(id, &[a, b])?.exp()
            } else {
                evaluate(id, &[a, b])?
            };
            values.push(v);
        }
    }
    Ok(Grid {
        resolution,
        x1,
        x2,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn scalar_objectives_at_known_points() {
        let b = ObjectiveId::Bohachevsky;
        assert_eq!(evaluate(b, &[0.0, 0.0]).unwrap(), 0.0);
        assert!((evaluate(b, &[1.0, 1.0]).unwrap() - 3.6).abs() < 1e-12);
        assert_eq!(evaluate(ObjectiveId::Booth, &[1.0, 3.0]).unwrap(), 0.0);
        assert_eq!(evaluate(ObjectiveId::Booth, &[0.0, 0.0]).unwrap(), 74.0);
    }

    #[test]
    fn evaluate_rejects_bad_inputs() {
        assert!(matches!(
            evaluate(ObjectiveId::Booth, &[1.0]),
            Err(Error::Dimension {
                expected: 2,
                got: 1
            })
        ));
        assert!(matches!(
            evaluate(ObjectiveId::MhDensity, &[0.0, 3.0]),
            Err(Error::UnsupportedObjective { .. })
        ));
    }

    #[test]
    fn gradient_at_known_points() {
        let g = gradient(ObjectiveId::Bohachevsky, &[0.0, 0.0]).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
        let g = gradient(ObjectiveId::Bohachevsky, &[0.5, 0.5]).unwrap();
        assert!((g[0] - (1.0 - 0.9 * PI)).abs() < 1e-12);
        assert!((g[0] + 1.82743).abs() < 1e-5);
        assert!((g[1] - 2.0).abs() < 1e-12);
        let g = gradient(ObjectiveId::Bohachevsky, &[1.0, 0.0]).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-12 && g[1] == 0.0);
        assert!(gradient(ObjectiveId::Booth, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn mh_log_density_hand_value() {
        let v = log_density(ObjectiveId::MhDensity, &[0.0, PI]).unwrap();
        let expected = -0.01 * (PI * PI - std::f64::consts::E);
        assert!((v - expected).abs() < 1e-12);
        assert!((v + 0.071513).abs() < 1e-6);
    }

    #[test]
    fn sa_log_density_term_by_term() {
        // At (pi/2, pi/2): cos x1 = 0 kills the first term, sin x2 = 1,
        // (1 + cos x1)^2 = 1, and x1 - x2 = 0.
        let h = PI / 2.0;
        let v = log_density(ObjectiveId::SaDensity, &[h, h]).unwrap();
        assert!((v - 0.02 * std::f64::consts::E).abs() < 1e-12);
        assert!((v - 0.054365636569180906).abs() < 1e-12);

        // Reference values from a 30-digit evaluation of the same expression.
        let frozen = [
            (-2.5, 2.1, 0.45748606754062742),
            (-1.7, 3.9, 0.64230367196064379),
            (-0.3, 2.6, 0.61579207746206346),
            (0.0, 3.0, 0.29227647162370406),
            (0.8, 2.2, 0.31245935075519362),
            (1.3, 3.3, 0.043831410314484842),
            (2.2, 2.9, 0.036463151407620205),
            (2.9, 4.0, 0.43427487929029766),
            (-3.0, 2.0, 0.53815118429049262),
            (1.1, 3.7, -0.046677142357945561),
        ];
        for (a, b, want) in frozen {
            let got = log_density(ObjectiveId::SaDensity, &[a, b]).unwrap();
            assert!((got - want).abs() < 1e-13, "({a}, {b}): {got} vs {want}");
        }
    }

    #[test]
    fn domains_are_inclusive() {
        let d = ObjectiveId::MhDensity.domain();
        assert!(d.contains(&[0.0, 3.0]).unwrap());
        assert!(!d.contains(&[0.0, 1.999]).unwrap());
        let d = ObjectiveId::Bohachevsky.domain();
        assert!(d.contains(&[-100.0, 100.0]).unwrap());
        assert!(d.contains(&[0.0]).is_err());
    }

    #[test]
    fn sampling_degenerate_and_seeded() {
        let d = BoxDomain::cube(5.0, 5.0, 2).unwrap();
        assert_eq!(d.sample_uniform(&mut rng_from_seed(1)), vec![5.0, 5.0]);

        let d = ObjectiveId::Booth.domain();
        let a = d.sample_uniform(&mut rng_from_seed(9));
        let b = d.sample_uniform(&mut rng_from_seed(9));
        assert_eq!(a, b);

        let mut rng = rng_from_seed(3);
        let n = 10_000;
        let mut sums = [0.0; 2];
        for _ in 0..n {
            let p = d.sample_uniform(&mut rng);
            assert!(d.contains(&p).unwrap());
            sums[0] += p[0];
            sums[1] += p[1];
        }
        for s in sums {
            assert!((s / n as f64).abs() < 3.0);
        }
    }

    #[test]
    fn box_domain_validation() {
        assert!(BoxDomain::new(vec![1.0], vec![0.0]).is_err());
        assert!(BoxDomain::new(vec![0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn grid_corners_and_layout() {
        let g = grid_eval(ObjectiveId::Booth, 2).unwrap();
        let f = |a, b| booth(a, b);
        assert_eq!(
            g.values,
            vec![
                f(-100.0, -100.0),
                f(100.0, -100.0),
                f(-100.0, 100.0),
                f(100.0, 100.0)
            ]
        );
        assert!(grid_eval(ObjectiveId::Repressilator, 4).is_err());
        assert!(grid_eval(ObjectiveId::Booth, 1).is_err());
    }

    #[test]
    fn density_grid_is_positive_and_finite() {
        let g = grid_eval(ObjectiveId::MhDensity, 50).unwrap();
        assert!(g.values.iter().all(|v| v.is_finite() && *v > 0.0));
        let g = grid_eval(ObjectiveId::Bohachevsky, 37).unwrap();
        assert!(g.min() >= 0.0);
    }

    #[test]
    fn bohachevsky_positive_off_origin() {
        for i in 0..=200 {
            for j in 0..=200 {
                let x1 = -2.0 + 4.0 * i as f64 / 200.0;
                let x2 = -2.0 + 4.0 * j as f64 / 200.0;
                let v = bohachevsky(x1, x2);
                if i == 100 && j == 100 {
                    assert_eq!(v, 0.0);
                } else {
                    assert!(v > 0.0, "f({x1}, {x2}) = {v}");
                }
            }
        }
    }

    #[test]
    fn booth_positive_off_minimum() {
        for i in -20..=20 {
            for j in -20..=20 {
                let (x1, x2) = (1.0 + i as f64 * 0.25, 3.0 + j as f64 * 0.25);
                let v = booth(x1, x2);
                if i == 0 && j == 0 {
                    assert_eq!(v, 0.0);
                } else {
                    assert!(v > 0.0);
                }
            }
        }
    }

    #[test]
    fn log_densities_finite_on_box() {
        for id in [ObjectiveId::MhDensity, ObjectiveId::SaDensity] {
            let g = grid_eval(id, 101).unwrap();
            assert!(g.values.iter().all(|v| v.is_finite() && *v > 0.0));
        }
    }

    #[test]
    fn objective_ids_round_trip_through_strings() {
        for id in ObjectiveId::ALL {
            assert_eq!(id.as_str().parse::<ObjectiveId>().unwrap(), id);
            let json = serde_json::to_string(&id).unwrap();
            assert_eq!(json, format!("\"{}\"", id.as_str()));
        }
        assert!("rosenbrock".parse::<ObjectiveId>().is_err());
    }
}
