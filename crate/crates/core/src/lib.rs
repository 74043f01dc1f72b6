//! Optimizers and samplers over a small family of benchmark objectives,
//! with an on-the-fly parameter controller and reproducible run records.
//!
//! Every algorithm is exposed twice: as a plain batch function
//! (`gd_run`, `nm_minimize`, `chain_run`, `ea_run`) and as a [`live::Runner`]
//! that advances one iteration at a time and accepts parameter overrides at
//! iteration boundaries. The HTTP service drives the latter.

pub mod api;
pub mod config;
pub mod controller;
pub mod error;
pub mod evolutionary;
pub mod gd;
pub mod harness;
pub mod live;
pub mod mcmc;
pub mod nelder_mead;
pub mod objectives;
pub mod repressilator;
pub mod seed;

pub use error::{Error, Result};
pub use objectives::{BoxDomain, ObjectiveId, Point};
