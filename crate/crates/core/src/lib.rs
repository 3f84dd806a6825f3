//! Evolutionary and learning dynamics for the Traveler's Dilemma.
//!
//! [`game`] holds the payoff rule and classical solution concepts,
//! [`replicator`], [`wright_fisher`] and [`introspection`] the three
//! dynamics, [`harness`] seeding and table output, and [`verification`]
//! brute-force oracles. Numerical code is generic over [`scalar::Real`];
//! the aliases below fix it to `f64`.

pub mod error;
pub mod game;
pub mod harness;
pub mod introspection;
pub mod replicator;
pub mod scalar;
pub mod stats;
pub mod verification;
pub mod wright_fisher;

pub use error::{Error, Result};
pub use game::{payoff, Action, GameParams, PayoffMatrix};
pub use harness::{RunMetadata, SweepResult, Value};
pub use introspection::JointState;
pub use wright_fisher::Population;

pub type Simplex = replicator::SimplexVector<f64>;
pub type Mutation = replicator::MutationMatrix<f64>;
pub type RmConfigF64 = replicator::RmConfig<f64>;
pub type RmTrajectoryF64 = replicator::RmTrajectory<f64>;
pub type WfConfigF64 = wright_fisher::WfConfig<f64>;
pub type IntroConfigF64 = introspection::IntroConfig<f64>;
pub type Kernel = introspection::TransitionKernel<f64>;
pub type Stationary = introspection::StationaryDistribution<f64>;
