//! Simulators, classical solvers, and a from-scratch TD3 agent for two
//! ecological management problems:
//!
//! - a stochastic fishery where the control is a harvest quota, and
//! - an ecosystem with a tipping point, where the control spends effort to
//!   offset slow environmental degradation.
//!
//! The crate is organized around a small episodic decision-process API
//! ([`decision`]), two concrete environments ([`fishery`], [`conservation`]),
//! classical baselines (constant escapement, steady-state effort, and value
//! iteration on a discretized model, in [`baselines`]), a minimal neural
//! network stack with reverse-mode gradients ([`nn`]), the TD3 algorithm
//! ([`td3`]), and an evaluation/tuning harness ([`experiments`]).
//!
//! All numeric work is `f64` and deterministic given seeds. The crate is
//! `no_std`-compatible (with `alloc`); file formats and the command-line
//! interface live in the companion `ecorl-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod baselines;
pub mod conservation;
pub mod decision;
mod error;
pub mod experiments;
pub mod fishery;
pub mod nn;
pub mod space;
pub mod td3;

pub use error::{Error, Result};
