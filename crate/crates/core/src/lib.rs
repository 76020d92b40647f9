//! Finite-length reliability analysis, Monte Carlo simulation and parameter
//! optimization for frameless ALOHA with successive interference cancellation
//! over a collision channel.
//!
//! * [`model`]: users, slot classes, degree distributions, combinatorics.
//! * [`analysis`]: exact pmf of the number of unresolved users.
//! * [`sim`]: activation-pattern generation and the peeling decoder.
//! * [`optim`]: multi-start Nelder-Mead search maximizing `F_t`.

pub mod analysis;
pub mod error;
pub mod model;
pub mod optim;
pub mod sim;

pub use analysis::{
    intermediate_profile, unresolved_pmf, AnalysisOptions, DecoderState, ReliabilityProfile,
    StatePmf,
};
pub use error::{Error, Result};
pub use model::{DegreeSpectrum, SlotClass, SystemConfig};
pub use optim::{multistart_optimize, Candidate, OptimizationProblem, OptimizationResult};
pub use sim::{run_adaptive, run_trials, AdaptivePolicy, EmpiricalPmf, TrialOutcome};
