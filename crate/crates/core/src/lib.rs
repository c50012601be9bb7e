//! Bonus-malus systems with long-memory `-1/+h/pen` transition rules.
//!
//! A claim raises the bonus-malus level by `h`; a level is only given back
//! after `1 + pen` consecutive claim-free years. Tracking the outstanding
//! claim-free years as a counter turns the rule into a Markov chain over an
//! augmented state space, from which the crate computes
//!
//! * stationary level distributions mixed over risk classes and a
//!   lognormal random effect ([`relativity::mixed_stationary`]),
//! * optimal relativities for a frequency-only model and for a
//!   frequency-severity model with a Gaussian-copula random effect,
//! * the hypothetical mean square error (HMSE) of any relativity vector,
//! * a seeded Monte-Carlo simulator used as an independent oracle.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod classical;
pub mod error;
pub mod markov;
pub mod portfolio;
pub mod random_effects;
pub mod relativity;
pub mod simulator;
pub mod state_space;

pub use error::{Error, Result};
pub use markov::{ClaimCountDistribution, StationaryVector, TransitionMatrix};
pub use portfolio::{GlmCoefficients, Portfolio, RiskClass};
pub use random_effects::{BivariateEffect, LognormalEffect, QuadratureGrid};
pub use relativity::{
    Integration, MixedStationary, MixingModel, MixingPlan, ModelKind, RelativityTable, SolveTolerances,
};
pub use simulator::{SimConfig, SimReport};
pub use state_space::{AugmentedState, BmsRule, StateSpace};
