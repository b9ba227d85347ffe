//! Closed-loop simulation of a ferromagnetic sphere steered by MRI gradient
//! coils along a vessel centerline under pulsatile blood flow.
//!
//! The pipeline is: waypoints are interpolated into a smooth centerline
//! ([`path`]), blood flow and drag are modelled in [`hemodynamics`], the
//! [`controller`] turns tracking error into gradient commands that
//! [`magnetics`] converts to force, [`sim`] integrates the motion on a
//! multi-rate schedule, and [`safety`] checks dB/dt and wall clearance.

// `!(x > 0.0)` is used on purpose so NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod controller;
pub mod error;
pub mod hemodynamics;
pub mod magnetics;
pub mod path;
pub mod plot;
pub mod safety;
pub mod sim;
pub mod telemetry;

pub use error::{Error, Result};

/// Three-component vector used for positions, velocities, forces and gradients.
pub type Vec3 = nalgebra::Vector3<f64>;

pub use config::{echo as echo_config, parse_config, parse_config_str};
pub use plot::{render_plots, PlotSpec, Variant};
pub use controller::{ControllerGains, ControllerMode, ControllerState, TrajectoryController};
pub use hemodynamics::{DragMode, FlowRegime, FlowWaveform, VelocityProfileParams, VesselSegment};
pub use magnetics::{GradientCommand, GradientLimits, SphereSpec};
pub use path::{CenterlinePath, PathSample, Waypoint};
pub use safety::{SlewParams, SlewReport};
pub use sim::{batch_run, run_scenario, BatchStats, ScenarioConfig, ScenarioOutput};
pub use telemetry::TelemetryRecord;
