//! Restless multi-armed bandits driven by pairwise preference feedback.
//!
//! The crate contains the ground-truth simulator ([`world`]), the learner's
//! statistics ([`transitions`], [`preference`]), the occupancy-measure
//! planner ([`planner`]), the policies ([`policies`]) and the experiment
//! harness ([`harness`]).

pub mod error;
pub mod harness;
pub mod planner;
pub mod policies;
pub mod preference;
pub mod transitions;
pub mod world;

pub use error::{Error, Result};
