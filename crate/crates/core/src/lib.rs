//! Mining maximal-size visual attributed patterns from collections of attributed
//! relational graphs.
//!
//! An ARG is a complete graph whose nodes and ordered node pairs carry attribute
//! vectors. A pattern is a small graph of the same kind together with matching
//! parameters; mining grows and prunes it until every node is reliable (its mean
//! matching energy is below `τ`) and well connected.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*F64` and `*F32`
//! aliases fix the precision.

pub mod cli;
pub mod energy;
pub mod error;
pub mod eval;
pub mod io;
pub mod matcher;
pub mod miner;
pub mod model;
mod scalar;
mod serde_ext;
pub mod solver;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use matcher::{match_approx, match_exact, match_many, match_one, MatchResult};
pub use miner::{mine, IterationRecord, MiningOutcome, MiningState};
pub use model::{
    Arg, Assignment, AttributeSchema, Attrs, Label, MatchParams, MinDegree, MiningConfig, NodeId, Pattern, Penalty,
    SolverKind,
};
pub use scalar::{mean, sq_dist, weighted_sq_dist, Scalar};

pub type ArgF64 = Arg<f64>;
pub type PatternF64 = Pattern<f64>;
pub type MatchParamsF64 = MatchParams<f64>;
pub type MatchResultF64 = MatchResult<f64>;
pub type MiningOutcomeF64 = MiningOutcome<f64>;

pub type ArgF32 = Arg<f32>;
pub type PatternF32 = Pattern<f32>;
pub type MatchParamsF32 = MatchParams<f32>;
pub type MatchResultF32 = MatchResult<f32>;
pub type MiningOutcomeF32 = MiningOutcome<f32>;
