//! Optimal sampling and transmission of a Wiener process under sampling and
//! transmission costs, over a channel with IID random delay.
//!
//! The crate is organised bottom-up:
//!
//! - [`stochastic`]: seeded random streams, Wiener increments, delay models.
//! - [`quadrature`]: Gauss–Hermite, Gauss–Laguerre and Gauss–Legendre rules
//!   used by the solver.
//! - [`bellman`]: value iteration over the sampling-error state, policy
//!   extraction, the Lagrangian cost `J(λ)` and the root search for `λ*`.
//! - [`sim`]: discrete-event simulation of one-packet-in-flight epochs with
//!   renewal-reward accounting.
//! - [`experiments`]: delay-variance sweeps, convergence traces and policy
//!   curves.
//! - [`config`], [`output`], [`cli`]: configuration, CSV/JSON emission and
//!   subcommand dispatch for the `wiener-sampling` binary.

pub mod bellman;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod quadrature;
pub mod sim;
pub mod stats;
pub mod stochastic;

pub use error::{Error, Result};
