//! Risk-sensitive policy gradients on finite-horizon MDPs.
//!
//! The crate estimates expectile, utility-based shortfall (UBSR) and
//! optimized certainty equivalent (OCE) risks of discounted costs, estimates
//! their policy gradients from sampled trajectories, and runs the
//! risk-aware policy gradient loop ([`rapg`]). Every estimator has an exact
//! counterpart computed by enumerating trajectories, which the [`oracle`]
//! module uses for finite-difference and Monte Carlo checks.
//!
//! Costs are minimized throughout.

// `!(x > 0.0)` style checks reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dist;
pub mod envs;
pub mod error;
pub mod grad;
pub mod loss;
pub mod mdp;
pub mod oracle;
pub mod policy;
pub mod rapg;
pub mod risk;
pub mod rng;

pub use dist::DiscreteDist;
pub use error::{Error, Result};
pub use grad::GradEstimate;
pub use loss::LossFn;
pub use mdp::{MdpSpec, Trajectory, WeightedTrajectory};
pub use policy::{PolicyParams, PolicySpec, ScoreVector};
pub use rapg::{RapgConfig, RunRecord};
pub use risk::RiskSpec;
pub use rng::RandomStream;
