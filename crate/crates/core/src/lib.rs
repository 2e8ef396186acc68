//! Simulation and tabular learning for joint workload offloading and server
//! autoscaling at an energy-harvesting edge site.
//!
//! The site runs a base station and up to `M` edge servers from a battery
//! charged by renewable energy, falling back to a costly backup supply when
//! the battery cannot cover basic operation. Each slot the controller picks a
//! computing power demand; the server count and the edge/cloud workload split
//! follow from a per-slot delay minimization.
//!
//! * [`model`]: delay, power and battery equations, the per-slot inner problem
//!   and the post-decision state map.
//! * [`dynamics`]: Markov chains for workload, environment and congestion, and
//!   the green-energy distribution.
//! * [`oracle`]: exact value iteration and checkers for the structure of the
//!   optimal value function and policy.
//! * [`learners`]: the post-decision-state learner, Q-learning, myopic and
//!   fixed-power policies.
//! * [`harness`]: seeded episode runner, traces and metrics.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod harness;
pub mod learners;
pub mod model;
pub mod oracle;

pub use config::{load_config, parse_config, ScenarioConfig};
pub use error::{Error, Result};
pub use model::{ControlDecision, CostBreakdown, Model, PostDecisionState, SystemState};
