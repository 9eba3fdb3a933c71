//! Data-driven stochastic optimal control and stochastic reachability for
//! systems whose dynamics are only known through sampled transitions.
//!
//! The transition kernel `Q(dy | x, u)` of an unknown discrete-time system is
//! represented by its conditional distribution embedding in a reproducing
//! kernel Hilbert space, estimated by regularized least squares from a sample
//! `{(x_i, u_i, y_i)}`. Expectations of any function of the next state then
//! reduce to a weighted sum `f^T beta(x, u)` over the sample successors.
//! On top of that primitive the crate provides:
//!
//! - [`control`]: forward (greedy) and backward (dynamic programming)
//!   controllers that pick actions from a finite grid by solving a small
//!   linear program over the probability simplex ([`lp`]).
//! - [`reach`]: terminal- and first-hitting-time safety probabilities, and
//!   forward reachable set estimation with a separating (Abel) kernel.
//! - [`systems`] and [`sampling`]: benchmark systems simulated under
//!   zero-order hold and the seeded sample generators that feed everything.
//! - [`validate`]: Monte-Carlo and closed-form oracles.
//!
//! The `kernelctrl` binary drives the scenarios in `scenarios/` from TOML
//! configuration files; see [`cli`].

pub mod cli;
pub mod control;
pub mod embedding;
mod error;
pub mod kernels;
pub mod linalg;
pub mod lp;
pub mod reach;
pub mod sampling;
pub mod systems;
pub mod validate;

pub use control::{Controller, CostSpec, Decision, Mode, StageCost};
pub use embedding::{Embedding, TransitionSample};
pub use error::{Error, Result};
pub use kernels::{KernelFamily, KernelSpec};
pub use lp::{solve_lp, LpOutcome, SimplexLP};
pub use reach::{Problem, SRModel, SupportClassifier, Tube};
pub use sampling::{ActionGrid, HyperRect, SeededRng};
pub use systems::{NoiseSpec, SystemSpec, Trajectory};
pub use validate::McReport;

/// A point in state or action space.
pub type Point = Vec<f64>;
