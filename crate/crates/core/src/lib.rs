//! Simulation and verification toolkit for systems of `N` Pólya urns coupled
//! through a mean-field reinforcement rule.
//!
//! Each urn starts with `a` red and `b` white balls. At every step, urn `i`
//! receives a new red ball with probability `alpha * Z + (1 - alpha) * Z(i)`,
//! where `Z(i)` is its red fraction and `Z` the average fraction over all
//! urns, and a white ball otherwise.
//!
//! The crate is organised as:
//!
//! - [`sim`]: the urn dynamics driven by an addressable uniform source ([`rng`]).
//! - [`moments`] and [`enumeration`]: exact second-moment recursions and a
//!   brute-force rational oracle for them.
//! - [`asymptotics`]: regime classification, power-law fits and summability
//!   diagnostics for the synchronization rate.
//! - [`clt`]: the large-`N` Gaussian limit, its variance schedule and
//!   statistical checks against finite ensembles.
//! - [`montecarlo`] and [`stats`]: the replica engine and mergeable estimators.
//! - [`io`] and [`experiment`]: serialization and the reproducible command
//!   workflows used by the `urnsync` binary.
//! - [`acceptance`]: the verification suite run by `urnsync verify`.

pub mod acceptance;
pub mod asymptotics;
pub mod clt;
pub mod enumeration;
mod error;
pub mod experiment;
pub mod io;
pub mod moments;
pub mod montecarlo;
pub mod numeric;
pub mod parallel;
mod params;
pub mod rng;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use parallel::Execution;
pub use params::ModelParams;
pub use rng::UniformSource;
pub use sim::{SystemState, TrajectoryRecord};
