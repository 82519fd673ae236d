//! Synthetic drive-log generation.
//!
//! This crate produces the ground-truth inputs for the analysis pipeline:
//! stochastic friction grids over task layouts, a friction-saturated
//! single-track vehicle, a closed-loop steering/speed driver, complete
//! scenario runs emitting standard drive logs, and a classical washout
//! motion-cueing filter for platform-pose emission.

pub mod cueing;
pub mod driver;
pub mod friction;
pub mod scenario;
pub mod vehicle;

pub use cueing::{motion_cueing, CueingParams, CueingSample, PlatformPose};
pub use driver::{DriverConfig, IntermittentConfig};
pub use friction::{generate_friction_grid, parse_friction_grid, write_friction_grid, FrictionGrid};
pub use scenario::{run_scenario, run_scenario_on_grid, ScenarioConfig, ScenarioOutput};
pub use vehicle::{step_vehicle, Controls, VehicleParams, VehicleState};

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;
