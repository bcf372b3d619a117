//! Jointly optimal deadline-constrained power allocation for a two-sensor
//! virtual antenna array: one energy-harvesting (EH) sensor and one
//! battery-operated (BO) sensor beamforming a common message.
//!
//! * [`eh_solver`] computes the EH policy on its own (shortest string under
//!   the harvest staircase, or taut string through the storage tunnel).
//! * [`bo_solver`] derives the BO policy from it through a one-dimensional
//!   dual search.
//! * [`oracle`] solves the same convex program numerically and certifies
//!   policies through their KKT residuals.
//! * [`simulator`] draws solar-like arrival schedules, replays policies on
//!   degraded batteries and runs seeded Monte-Carlo sweeps.

pub mod bo_solver;
pub mod eh_solver;
pub mod error;
pub mod exec;
pub mod joint;
pub mod model;
pub mod oracle;
pub mod simulator;

pub use error::{Error, Result};
pub use exec::Execution;
pub use joint::{solve_joint, JointConfig, JointSolution};
pub use model::{EventSchedule, TransmissionPolicy};
