//! Trajectory controller: setpoint lookup, PID with feedforward, and gradient
//! synthesis.
//!
//! The velocity error mixes velocity and position deviation,
//! `e = V_c - V_s + K_r (P_c - P_s)`. The PID terms are
//!
//! ```text
//! PF = -k_p e
//! PI = PI - e * delta * k_i
//! PD = -k_d (e - e_prev) / delta
//! ```
//!
//! and the commanded gradient is `(PF + PI + PD + FF) / moment`, where `FF`
//! is the drag force of the local blood velocity on a sphere at rest.

use crate::error::{Error, Result};
use crate::hemodynamics::{velocity_setpoint, DragMode, VelocityProfileParams};
use crate::magnetics::{clamp_gradient, GradientCommand, GradientLimits, SphereSpec};
use crate::path::PathSample;
use crate::Vec3;

pub const DEFAULT_SETPOINT_WINDOW: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Weight of position error relative to velocity error.
    pub kr: f64,
    /// Controller update interval, s.
    pub delta: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            kp: 2.0,
            ki: 1.0,
            kd: 0.01,
            kr: 0.7,
            delta: 0.100,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<()> {
        for (what, value) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::InvalidValue { what, value });
            }
        }
        if !(0.0..=1.0).contains(&self.kr) {
            return Err(Error::InvalidValue {
                what: "kr",
                value: self.kr,
            });
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidValue {
                what: "delta",
                value: self.delta,
            });
        }
        Ok(())
    }
}

/// How PID outputs are turned into force before dividing by the moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControllerMode {
    /// PID outputs are used directly as force.
    #[default]
    Paper,
    /// PID outputs are accelerations and are multiplied by the sphere mass.
    Dimensional,
}

impl std::str::FromStr for ControllerMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "paper" => Ok(ControllerMode::Paper),
            "dimensional" => Ok(ControllerMode::Dimensional),
            other => Err(format!("unknown controller mode {other:?} (paper|dimensional)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    pub integral: Vec3,
    pub previous_error: Vec3,
    pub initialized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoint {
    pub position: Vec3,
    pub velocity: Vec3,
    pub index: usize,
}

impl Setpoint {
    /// Setpoint at centerline sample `index`; the speed follows the velocity
    /// profile and points along the local tangent.
    pub fn at_sample(
        samples: &[PathSample],
        index: usize,
        profile: &VelocityProfileParams,
        sphere_radius: f64,
    ) -> Self {
        let sample = &samples[index];
        let speed = velocity_setpoint(profile, sample.curvature, sphere_radius);
        Self {
            position: sample.position,
            velocity: sample.tangent() * speed,
            index,
        }
    }
}

/// Index of the sample closest to `position` within
/// `[last_index, last_index + window]`. Ties go to the lower index.
pub fn nearest_sample_index(
    samples: &[PathSample],
    position: Vec3,
    last_index: usize,
    window: usize,
) -> Result<usize> {
    if samples.is_empty() {
        return Err(Error::InvalidPath("no centerline samples".into()));
    }
    if last_index >= samples.len() {
        return Err(Error::InvalidPath(format!(
            "start index {last_index} beyond {} samples",
            samples.len()
        )));
    }
    let end = last_index.saturating_add(window).min(samples.len() - 1);
    let mut best = last_index;
    let mut best_dist = (samples[last_index].position - position).norm_squared();
    for (i, s) in samples.iter().enumerate().take(end + 1).skip(last_index + 1) {
        let d = (s.position - position).norm_squared();
        if d < best_dist {
            best = i;
            best_dist = d;
        }
    }
    Ok(best)
}

pub fn nearest_setpoint(
    samples: &[PathSample],
    position: Vec3,
    last_index: usize,
    window: usize,
    profile: &VelocityProfileParams,
    sphere_radius: f64,
) -> Result<Setpoint> {
    let index = nearest_sample_index(samples, position, last_index, window)?;
    Ok(Setpoint::at_sample(samples, index, profile, sphere_radius))
}

pub fn velocity_error(v_c: Vec3, v_s: Vec3, p_c: Vec3, p_s: Vec3, kr: f64) -> Vec3 {
    v_c - v_s + kr * (p_c - p_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidTerms {
    pub proportional: Vec3,
    pub integral: Vec3,
    pub derivative: Vec3,
}

impl PidTerms {
    pub fn sum(&self) -> Vec3 {
        self.proportional + self.integral + self.derivative
    }
}

/// One PID update. Returns the three terms and the successor state; the
/// returned integral term is the updated accumulator.
pub fn pid_step(
    state: &ControllerState,
    error: Vec3,
    gains: &ControllerGains,
) -> (PidTerms, ControllerState) {
    let proportional = -gains.kp * error;
    let integral = state.integral - error * gains.delta * gains.ki;
    let error_rate = (error - state.previous_error) / gains.delta;
    let derivative = -gains.kd * error_rate;
    (
        PidTerms {
            proportional,
            integral,
            derivative,
        },
        ControllerState {
            integral,
            previous_error: error,
            initialized: true,
        },
    )
}

/// Drag that blood moving at `blood_velocity` exerts on a sphere at rest.
pub fn feedforward(
    drag_coefficient: f64,
    density: f64,
    reference_area: f64,
    blood_velocity: Vec3,
    mode: DragMode,
) -> Vec3 {
    let scale = 0.5 * drag_coefficient * density * reference_area;
    match mode {
        DragMode::PaperLinear => blood_velocity * scale,
        DragMode::Quadratic => blood_velocity * (scale * blood_velocity.norm()),
    }
}

/// Unclamped gradient `(PF + PI + PD + FF) / moment`.
pub fn gradient_command(moment: f64, pf: Vec3, pi: Vec3, pd: Vec3, ff: Vec3) -> Result<Vec3> {
    if !(moment > 0.0) {
        return Err(Error::InvalidMoment(moment));
    }
    Ok((pf + pi + pd + ff) / moment)
}

/// Position and velocity as last seen by the tracker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub time: f64,
    pub position: Vec3,
    pub velocity: Vec3,
}

/// Everything computed in one controller refresh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub setpoint: Setpoint,
    pub error: Vec3,
    pub terms: PidTerms,
    pub feedforward: Vec3,
    /// Gradient before amplitude limiting.
    pub raw_gradient: Vec3,
    pub command: GradientCommand,
}

/// Stateless controller configuration; the mutable part lives in
/// [`ControllerState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryController {
    pub gains: ControllerGains,
    pub mode: ControllerMode,
    pub drag_mode: DragMode,
    pub anti_windup: bool,
    pub window: usize,
}

impl Default for TrajectoryController {
    fn default() -> Self {
        Self {
            gains: ControllerGains::default(),
            mode: ControllerMode::default(),
            drag_mode: DragMode::default(),
            anti_windup: true,
            window: DEFAULT_SETPOINT_WINDOW,
        }
    }
}

/// Inputs for one refresh that do not change between refreshes.
pub struct ControlContext<'a> {
    pub samples: &'a [PathSample],
    pub profile: &'a VelocityProfileParams,
    pub sphere: &'a SphereSpec,
    pub blood_density: f64,
    pub limits: &'a GradientLimits,
}

impl TrajectoryController {
    /// Run one refresh: advance the setpoint, update the PID and emit a
    /// clamped command. The integral is held on axes that saturate when
    /// anti-windup is enabled.
    pub fn update(
        &self,
        ctx: &ControlContext<'_>,
        state: &mut ControllerState,
        last_index: usize,
        observation: &Observation,
        blood_velocity: Vec3,
        timestamp: f64,
    ) -> Result<ControlOutput> {
        let setpoint = nearest_setpoint(
            ctx.samples,
            observation.position,
            last_index,
            self.window,
            ctx.profile,
            ctx.sphere.radius,
        )?;
        let error = velocity_error(
            observation.velocity,
            setpoint.velocity,
            observation.position,
            setpoint.position,
            self.gains.kr,
        );
        let (terms, next) = pid_step(state, error, &self.gains);
        let ff = feedforward(
            ctx.sphere.drag_coefficient,
            ctx.blood_density,
            ctx.sphere.reference_area(),
            blood_velocity,
            self.drag_mode,
        );
        let scale = match self.mode {
            ControllerMode::Paper => 1.0,
            ControllerMode::Dimensional => ctx.sphere.mass(),
        };
        let raw_gradient = gradient_command(
            ctx.sphere.moment(),
            terms.proportional * scale,
            terms.integral * scale,
            terms.derivative * scale,
            ff,
        )?;
        let command = clamp_gradient(GradientCommand::new(timestamp, raw_gradient), ctx.limits);

        let previous_integral = state.integral;
        *state = next;
        if self.anti_windup {
            for axis in 0..3 {
                if command.clipped.get(axis) {
                    state.integral[axis] = previous_integral[axis];
                }
            }
        }

        Ok(ControlOutput {
            setpoint,
            error,
            terms,
            feedforward: ff,
            raw_gradient,
            command,
        })
    }
}
