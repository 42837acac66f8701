//! Gain-scheduled LPV guidance for a bicycle-model road vehicle.
//!
//! The crate is organised bottom-up:
//!
//! - [`plant`]: nonlinear kinematic and dynamic vehicle models and a fixed-step RK4 integrator.
//! - [`lpv`]: the kinematic tracking-error and augmented dynamic LPV representations and
//!   polytope vertex enumeration.
//! - [`synthesis`]: LQR-via-LMI vertex gain synthesis on a small dense interior-point SDP
//!   solver, with Riccati and eigenvalue oracles for validation.
//! - [`scheduler`]: polytopic interpolation of vertex gains, feedforward and the two control laws.
//! - [`planner`]: offline reference trajectory generation (piecewise quintic path plus
//!   acceleration-limited speed profile).
//! - [`sim`]: the two-rate cascade closed-loop simulator, telemetry and RMSE metrics.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gains;
pub mod linalg;
pub mod lpv;
pub mod planner;
pub mod plant;
pub mod scheduler;
pub mod sim;
pub mod synthesis;

pub use error::{Error, Result};
pub use gains::GainDocument;
pub use lpv::{
    KinematicError, LpvConfig, LpvMatrices, SchedulingBounds, SchedulingPoint, SlipRow, SteeringEvaluation, VertexSet,
};
pub use planner::{PlannerConstraints, ReferencePoint, ReferenceTrajectory, Waypoint};
pub use plant::{ActuatorInput, ActuatorLimits, DynamicState, Pose, VehicleParams};
pub use scheduler::{ControllerState, FeedforwardMatrix, WeightVector};
pub use sim::{Metrics, Scenario, Telemetry, TelemetryRecord};
pub use synthesis::{SdpProblem, SdpSolution, SdpStatus, SynthesisConfig, VertexGainSet};
