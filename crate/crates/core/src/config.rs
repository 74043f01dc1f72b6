//! Algorithm identifiers, per-algorithm configurations and the flat
//! parameter set shared by the CLI and the HTTP API.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolutionary::{default_replacement, EaConfig};
use crate::gd::GdConfig;
use crate::mcmc::{ChainConfig, CoolingSchedule, DEFAULT_MAX_REDRAWS};
use crate::nelder_mead::{Coefficients, NmConfig};
use crate::objectives::{ObjectiveId, Point};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Gd,
    Nm,
    Mh,
    Sa,
    Ea,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Gd,
        Algorithm::Nm,
        Algorithm::Mh,
        Algorithm::Sa,
        Algorithm::Ea,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Gd => "gd",
            Algorithm::Nm => "nm",
            Algorithm::Mh => "mh",
            Algorithm::Sa => "sa",
            Algorithm::Ea => "ea",
        }
    }

    pub fn default_objective(self) -> ObjectiveId {
        match self {
            Algorithm::Gd => ObjectiveId::Bohachevsky,
            Algorithm::Nm => ObjectiveId::Booth,
            Algorithm::Mh => ObjectiveId::MhDensity,
            Algorithm::Sa => ObjectiveId::SaDensity,
            Algorithm::Ea => ObjectiveId::Repressilator,
        }
    }

    /// gd runs on bohachevsky, nm on booth, the samplers on either density
    /// and ea on the repressilator.
    pub fn supports(self, objective: ObjectiveId) -> bool {
        match self {
            Algorithm::Mh | Algorithm::Sa => objective.is_density(),
            _ => objective == self.default_objective(),
        }
    }

    pub fn check_pairing(self, objective: ObjectiveId) -> Result<()> {
        if self.supports(objective) {
            Ok(())
        } else {
            Err(Error::Pairing {
                algorithm: self.as_str().to_string(),
                objective,
            })
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm `{s}`")))
    }
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlgoConfig {
    Gd(GdConfig),
    Nm(NmConfig),
    Chain(ChainConfig),
    Ea(EaConfig),
}

impl AlgoConfig {
    pub fn validate(&self, algorithm: Algorithm, objective: ObjectiveId) -> Result<()> {
        algorithm.check_pairing(objective)?;
        match (algorithm, self) {
            (Algorithm::Gd, AlgoConfig::Gd(c)) => c.validate(),
            (Algorithm::Nm, AlgoConfig::Nm(c)) => {
                c.validate()?;
                if c.init.len() != 2 {
                    return Err(Error::config("init", "must be 2-dimensional"));
                }
                Ok(())
            }
            (Algorithm::Mh | Algorithm::Sa, AlgoConfig::Chain(c)) => {
                c.validate()?;
                if c.target != objective {
                    return Err(Error::config("target", "must match the run objective"));
                }
                match (algorithm, c.schedule.is_some()) {
                    (Algorithm::Sa, false) => Err(Error::config("schedule", "required for sa")),
                    (Algorithm::Mh, true) => Err(Error::config("schedule", "not allowed for mh")),
                    _ => Ok(()),
                }
            }
            (Algorithm::Ea, AlgoConfig::Ea(c)) => c.validate(),
            _ => Err(Error::config("config", format!("not a {algorithm} configuration"))),
        }
    }
}

pub mod defaults {
    pub const ALPHA: f64 = 0.001;
    pub const ITERATIONS: u64 = 10;
    pub const ATOL: f64 = 0.005;
    pub const MAXITER: u64 = 100;
    pub const N_ITERATIONS: u64 = 1000;
    pub const PROPOSAL_STD: f64 = 0.2;
    pub const T0: f64 = 100.0;
    pub const COOLING: f64 = 0.95;
    pub const POP_SIZE: usize = 100;
    pub const GENERATIONS: u64 = 10;
    pub const MUTATION_STD: f64 = 0.5;
    pub const SAMPLER_INIT: [f64; 2] = [-3.0, 2.0];
}

/// Flat, optional parameter set. Unset fields take the defaults; fields
/// that do not apply to the chosen algorithm are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_to_domain: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maxiter: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_iterations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cooling: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pop_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recomb: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutate: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement_count: Option<usize>,
}

impl RunParams {
    fn set_fields(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        macro_rules! collect {
            ($($f:ident),*) => {$( if self.$f.is_some() { out.push(stringify!($f)); } )*};
        }
        collect!(
            init, alpha, iterations, clip_to_domain, atol, maxiter, n_iterations, proposal_std,
            t0, cooling, pop_size, generations, mutation_std, recomb, mutate, parent_fraction,
            replacement_count
        );
        out
    }

    pub fn allowed_fields(algorithm: Algorithm) -> &'static [&'static str] {
        match algorithm {
            Algorithm::Gd => &["init", "alpha", "iterations", "clip_to_domain"],
            Algorithm::Nm => &["init", "atol", "maxiter"],
            Algorithm::Mh => &["init", "n_iterations", "proposal_std"],
            Algorithm::Sa => &["init", "n_iterations", "proposal_std", "t0", "cooling"],
            Algorithm::Ea => &[
                "pop_size",
                "generations",
                "mutation_std",
                "recomb",
                "mutate",
                "parent_fraction",
                "replacement_count",
            ],
        }
    }

    /// Builds and validates the configuration. A missing `init` for gd/nm is
    /// drawn uniformly from the objective domain using `seed`.
    pub fn resolve(&self, algorithm: Algorithm, objective: ObjectiveId, seed: u64) -> Result<AlgoConfig> {
        algorithm.check_pairing(objective)?;
        let allowed = Self::allowed_fields(algorithm);
        if let Some(f) = self.set_fields().into_iter().find(|f| !allowed.contains(f)) {
            return Err(Error::config(f, format!("does not apply to {algorithm}")));
        }
        let random_init = || objective.domain().sample_uniform(&mut rng_from_seed(seed));
        let cfg = match algorithm {
            Algorithm::Gd => AlgoConfig::Gd(GdConfig {
                alpha: self.alpha.unwrap_or(defaults::ALPHA),
                iterations: self.iterations.unwrap_or(defaults::ITERATIONS),
                init: self.init.clone().unwrap_or_else(random_init),
                clip_to_domain: self.clip_to_domain.unwrap_or(true),
            }),
            Algorithm::Nm => AlgoConfig::Nm(NmConfig {
                atol: self.atol.unwrap_or(defaults::ATOL),
                maxiter: self.maxiter.unwrap_or(defaults::MAXITER),
                init: self.init.clone().unwrap_or_else(random_init),
                coefficients: Coefficients::default(),
                simplex_scale: 0.05,
            }),
            Algorithm::Mh | Algorithm::Sa => AlgoConfig::Chain(ChainConfig {
                target: objective,
                init: self.init.clone().unwrap_or_else(|| defaults::SAMPLER_INIT.to_vec()),
                n_iterations: self.n_iterations.unwrap_or(defaults::N_ITERATIONS),
                proposal_std: self.proposal_std.unwrap_or(defaults::PROPOSAL_STD),
                schedule: (algorithm == Algorithm::Sa).then(|| CoolingSchedule {
                    t0: self.t0.unwrap_or(defaults::T0),
                    cooling: self.cooling.unwrap_or(defaults::COOLING),
                }),
                max_proposal_redraws: DEFAULT_MAX_REDRAWS,
            }),
            Algorithm::Ea => {
                let pop_size = self.pop_size.unwrap_or(defaults::POP_SIZE);
                AlgoConfig::Ea(EaConfig {
                    pop_size,
                    generations: self.generations.unwrap_or(defaults::GENERATIONS),
                    mutation_std: self.mutation_std.unwrap_or(defaults::MUTATION_STD),
                    recomb: self.recomb.unwrap_or(true),
                    mutate: self.mutate.unwrap_or(true),
                    parent_fraction: self.parent_fraction.unwrap_or(0.25),
                    replacement_count: self
                        .replacement_count
                        .unwrap_or_else(|| default_replacement(pop_size)),
                })
            }
        };
        cfg.validate(algorithm, objective)?;
        Ok(cfg)
    }
}
