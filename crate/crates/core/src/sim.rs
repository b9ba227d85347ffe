//! Scenario configuration, multi-rate scheduling and sphere dynamics.
//!
//! The loop runs at the physics step `dt`. Position is observed every `tp`
//! seconds and held; the controller refreshes every `refresh_interval` from
//! the latest observation and its command is held until the next refresh.

use std::path::PathBuf;
use std::time::Instant;

use thiserror::Error;

use crate::controller::{
    nearest_sample_index, ControlContext, ControlOutput, ControllerState, Observation,
    TrajectoryController,
};
use crate::error::{Error, Result};
use crate::hemodynamics::{drag_force, FlowWaveform, VelocityProfileParams, VesselSegment, PAPER_BLOOD_DENSITY};
use crate::magnetics::{magnetic_force, GradientCommand, GradientLimits, SphereSpec};
use crate::path::{CenterlinePath, PathSample, Waypoint};
use crate::safety::{check_trace, check_virtual_fixture, FixtureViolation, SlewParams, SlewReport};
use crate::telemetry::TelemetryRecord;
use crate::Vec3;

const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub waypoints: Vec<Waypoint>,
    pub waypoint_file: Option<PathBuf>,
    /// Path-parameter discretization step.
    pub step: f64,
    pub waveform: FlowWaveform,
    pub vessel: VesselSegment,
    pub sphere: SphereSpec,
    pub blood_density: f64,
    pub controller: TrajectoryController,
    pub profile: VelocityProfileParams,
    pub limits: GradientLimits,
    pub slew: SlewParams,
    /// Position observation interval, s.
    pub tp: f64,
    /// Physics step, s.
    pub dt: f64,
    pub duration: f64,
    pub initial_offset: Vec3,
    /// Arrival radius around the final sample; `None` means twice the sphere radius.
    pub capture_radius: Option<f64>,
    pub gravity: bool,
    /// Second observation interval to run alongside `tp` for comparison plots.
    pub compare_tp: Option<f64>,
}

impl ScenarioConfig {
    /// Defaults for everything except the path and duration.
    pub fn with_defaults(waypoints: Vec<Waypoint>, duration: f64) -> Self {
        Self {
            waypoints,
            waypoint_file: None,
            step: 1e-4,
            waveform: FlowWaveform::steady(1e-6),
            vessel: VesselSegment::Uniform(3e-3),
            sphere: SphereSpec::default(),
            blood_density: PAPER_BLOOD_DENSITY,
            controller: TrajectoryController::default(),
            profile: VelocityProfileParams::default(),
            limits: GradientLimits::default(),
            slew: SlewParams::default(),
            tp: 0.100,
            dt: 0.001,
            duration,
            initial_offset: Vec3::zeros(),
            capture_radius: None,
            gravity: false,
            compare_tp: None,
        }
    }

    pub fn capture_radius(&self) -> f64 {
        self.capture_radius.unwrap_or(2.0 * self.sphere.radius)
    }

    /// Check the scheduling and parameter invariants.
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Error::config(m);
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(cfg(format!("dt must be positive, got {}", self.dt)));
        }
        let refresh = self.limits.refresh_interval;
        for tp in std::iter::once(self.tp).chain(self.compare_tp) {
            if !(tp > 0.0) || self.dt > tp {
                return Err(cfg(format!("dt ({}) must not exceed tp ({tp})", self.dt)));
            }
            if !is_multiple(tp, self.dt) {
                return Err(cfg(format!("tp ({tp}) must be an integer multiple of dt ({})", self.dt)));
            }
        }
        if self.dt > refresh {
            return Err(cfg(format!("dt ({}) must not exceed the refresh interval ({refresh})", self.dt)));
        }
        if !is_multiple(refresh, self.dt) {
            return Err(cfg(format!(
                "refresh interval ({refresh}) must be an integer multiple of dt ({})",
                self.dt
            )));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(cfg(format!("duration must be non-negative, got {}", self.duration)));
        }
        if !(self.blood_density > 0.0) {
            return Err(cfg(format!("blood density must be positive, got {}", self.blood_density)));
        }
        if let Some(r) = self.capture_radius {
            if !(r > 0.0) {
                return Err(cfg(format!("capture radius must be positive, got {r}")));
            }
        }
        if self.controller.window == 0 {
            return Err(cfg("setpoint window must be at least 1".into()));
        }
        if !(self.waveform.mean_flow >= 0.0) || !(self.waveform.heart_rate_bpm > 0.0) {
            return Err(cfg("flow rate must be non-negative and heart rate positive".into()));
        }
        if self.initial_offset.iter().any(|c| !c.is_finite()) {
            return Err(cfg("initial offset must be finite".into()));
        }
        self.sphere.validate()?;
        self.controller.gains.validate()?;
        self.profile.validate()?;
        self.limits.validate()?;
        self.slew.validate()?;
        Ok(())
    }

    /// Same scenario observed every `tp` seconds.
    pub fn with_tp(&self, tp: f64) -> Self {
        Self {
            tp,
            compare_tp: None,
            ..self.clone()
        }
    }
}

fn is_multiple(value: f64, unit: f64) -> bool {
    let ratio = value / unit;
    (ratio - ratio.round()).abs() < 1e-9 * ratio.max(1.0) && ratio.round() >= 1.0
}

fn steps_of(value: f64, unit: f64) -> usize {
    (value / unit).round() as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub time: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub command: GradientCommand,
    pub controller: ControllerState,
    pub index: usize,
}

/// Semi-implicit Euler: velocity first, then position with the new velocity.
pub fn step_dynamics(state: &SimState, f_mag: Vec3, f_drag: Vec3, mass: f64, dt: f64) -> Result<SimState> {
    if !(mass > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidValue {
            what: if mass > 0.0 { "dt" } else { "mass" },
            value: if mass > 0.0 { dt } else { mass },
        });
    }
    let diverged = |detail: String| Error::NumericalDivergence {
        step: (state.time / dt).round() as usize,
        time: state.time,
        detail,
    };
    if f_mag.iter().chain(f_drag.iter()).any(|c| !c.is_finite()) {
        return Err(diverged(format!(
            "non-finite force: magnetic {f_mag:?}, drag {f_drag:?}"
        )));
    }
    let velocity = state.velocity + (f_mag + f_drag) * (dt / mass);
    let position = state.position + velocity * dt;
    if velocity.iter().chain(position.iter()).any(|c| !c.is_finite()) {
        return Err(diverged(format!("non-finite state: p {position:?}, v {velocity:?}")));
    }
    Ok(SimState {
        time: state.time + dt,
        position,
        velocity,
        ..*state
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The sphere came within the capture radius of the path end.
    Captured,
    DurationElapsed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub records: Vec<TelemetryRecord>,
    pub commands: Vec<GradientCommand>,
    pub slew: SlewReport,
    pub fixture_violations: Vec<FixtureViolation>,
    pub max_fixture_distance: f64,
    pub termination: Termination,
    pub final_state: SimState,
    pub path_length: f64,
    pub path_end: Vec3,
}

/// A failed run, carrying the telemetry recorded up to the failure.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct ScenarioFailure {
    #[source]
    pub error: Error,
    pub partial: Vec<TelemetryRecord>,
}

impl From<Error> for ScenarioFailure {
    fn from(error: Error) -> Self {
        Self {
            error,
            partial: Vec::new(),
        }
    }
}

struct Flow<'a> {
    cfg: &'a ScenarioConfig,
    samples: &'a [PathSample],
}

impl Flow<'_> {
    fn blood_velocity(&self, index: usize, t: f64) -> Result<(f64, Vec3)> {
        let radius = self.cfg.vessel.radius_at(index);
        let speed = self.cfg.waveform.flow_velocity(radius, t)?;
        Ok((speed, self.samples[index].tangent() * speed))
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> std::result::Result<ScenarioOutput, ScenarioFailure> {
    cfg.validate()?;
    let path = CenterlinePath::new(&cfg.waypoints, cfg.step)?;
    let samples = path.samples();
    cfg.vessel.validate(cfg.sphere.radius, samples.len())?;

    let mut records = Vec::new();
    match simulate(cfg, &path, &mut records) {
        Ok((commands, termination, final_state)) => {
            let (violations, max_distance) = finalize(cfg, samples, &mut records);
            let times: Vec<f64> = commands.iter().map(|c| c.timestamp).collect();
            let gradients: Vec<Vec3> = commands.iter().map(|c| c.gradient).collect();
            let slew = check_trace(&times, &gradients, &cfg.slew)?;
            Ok(ScenarioOutput {
                records,
                commands,
                slew,
                fixture_violations: violations,
                max_fixture_distance: max_distance,
                termination,
                final_state,
                path_length: path.total_length(),
                path_end: path.end(),
            })
        }
        Err(error) => {
            finalize(cfg, samples, &mut records);
            Err(ScenarioFailure {
                error,
                partial: records,
            })
        }
    }
}

fn simulate(
    cfg: &ScenarioConfig,
    path: &CenterlinePath,
    records: &mut Vec<TelemetryRecord>,
) -> Result<(Vec<GradientCommand>, Termination, SimState)> {
    let samples = path.samples();
    let flow = Flow { cfg, samples };
    let window = cfg.controller.window;
    let ctx = ControlContext {
        samples,
        profile: &cfg.profile,
        sphere: &cfg.sphere,
        blood_density: cfg.blood_density,
        limits: &cfg.limits,
    };
    let mass = cfg.sphere.mass();
    let volume = cfg.sphere.volume();
    let weight = if cfg.gravity {
        Vec3::new(0.0, 0.0, -(mass - cfg.blood_density * volume) * GRAVITY)
    } else {
        Vec3::zeros()
    };
    let end = path.end();
    let capture = cfg.capture_radius();

    let n_steps = steps_of(cfg.duration, cfg.dt);
    let tp_steps = steps_of(cfg.tp, cfg.dt);
    let refresh_steps = steps_of(cfg.limits.refresh_interval, cfg.dt);

    let start = samples[0].position + cfg.initial_offset;
    let mut state = SimState {
        time: 0.0,
        position: start,
        velocity: Vec3::zeros(),
        command: GradientCommand::new(0.0, Vec3::zeros()),
        controller: ControllerState::default(),
        index: nearest_sample_index(samples, start, 0, window)?,
    };
    let mut observation = Observation {
        time: 0.0,
        position: start,
        velocity: Vec3::zeros(),
    };
    let mut setpoint_index = 0;
    let mut active: Option<ControlOutput> = None;
    let mut commands = Vec::new();
    records.reserve(n_steps);

    for k in 0..n_steps {
        let t = k as f64 * cfg.dt;
        state.time = t;
        if k % tp_steps == 0 {
            observation = Observation {
                time: t,
                position: state.position,
                velocity: state.velocity,
            };
        }
        state.index = nearest_sample_index(samples, state.position, state.index, window)?;
        let (blood_speed, blood_velocity) = flow.blood_velocity(state.index, t)?;

        if k % refresh_steps == 0 {
            let out = cfg.controller.update(
                &ctx,
                &mut state.controller,
                setpoint_index,
                &observation,
                blood_velocity,
                t,
            )?;
            setpoint_index = out.setpoint.index;
            state.command = out.command;
            commands.push(out.command);
            active = Some(out);
        }
        let out = active.as_ref().expect("controller runs at step 0");

        let f_drag = drag_force(
            cfg.sphere.drag_coefficient,
            cfg.blood_density,
            cfg.sphere.reference_area(),
            blood_velocity,
            state.velocity,
            cfg.controller.drag_mode,
        )?;
        let f_mag = magnetic_force(cfg.sphere.magnetization, state.command.gradient, volume)? + weight;

        records.push(TelemetryRecord {
            time: t,
            position: state.position,
            velocity: state.velocity,
            setpoint_position: out.setpoint.position,
            setpoint_velocity: out.setpoint.velocity,
            error: out.error,
            terms: out.terms,
            feedforward: out.feedforward,
            raw_gradient: out.raw_gradient,
            gradient: out.command.gradient,
            curvature: samples[state.index].curvature,
            blood_speed,
            dbdt: Vec3::zeros(),
            fixture_ok: true,
        });

        state = step_dynamics(&state, f_mag, f_drag, mass, cfg.dt)?;
        if (state.position - end).norm() <= capture {
            return Ok((commands, Termination::Captured, state));
        }
    }
    if n_steps > 0 {
        state.time = n_steps as f64 * cfg.dt;
    }
    Ok((commands, Termination::DurationElapsed, state))
}

/// Post-pass over the records: per-record dB/dt and fixture status.
fn finalize(
    cfg: &ScenarioConfig,
    samples: &[PathSample],
    records: &mut [TelemetryRecord],
) -> (Vec<FixtureViolation>, f64) {
    let mut previous = Vec3::zeros();
    let scale = cfg.slew.isocenter_distance / cfg.slew.rise_time;
    let mut index = 0;
    let mut violations = Vec::new();
    let mut max_distance: f64 = 0.0;
    for r in records.iter_mut() {
        r.dbdt = (r.gradient - previous) * scale;
        previous = r.gradient;
        if let Ok(check) = check_virtual_fixture(
            r.time,
            r.position,
            samples,
            index,
            cfg.controller.window,
            cfg.vessel.radius_at(index),
            cfg.sphere.radius,
        ) {
            index = check.index;
            max_distance = max_distance.max(check.distance);
            r.fixture_ok = check.ok();
            violations.extend(check.violation);
        }
    }
    (violations, max_distance)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub per_run_ms: Vec<f64>,
    pub min_ms: f64,
    pub max_ms: f64,
    pub mean_ms: f64,
    /// Whether every run produced telemetry identical to the first.
    pub identical_outputs: bool,
}

impl BatchStats {
    fn from_times(per_run_ms: Vec<f64>, identical_outputs: bool) -> Self {
        let min_ms = per_run_ms.iter().copied().fold(f64::INFINITY, f64::min);
        let max_ms = per_run_ms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean_ms = per_run_ms.iter().sum::<f64>() / per_run_ms.len().max(1) as f64;
        Self {
            per_run_ms,
            min_ms,
            max_ms,
            mean_ms,
            identical_outputs,
        }
    }
}

/// A batch aborted by a failing run, with statistics for the runs before it.
#[derive(Debug, Error)]
#[error("run {run} failed: {failure}")]
pub struct BatchFailure {
    pub run: usize,
    #[source]
    pub failure: ScenarioFailure,
    pub partial: Option<BatchStats>,
}

/// Run the scenario `n` times sequentially, timing each run.
#[allow(clippy::result_large_err)]
pub fn batch_run(cfg: &ScenarioConfig, n: usize) -> std::result::Result<BatchStats, BatchFailure> {
    if n == 0 {
        return Err(BatchFailure {
            run: 0,
            failure: Error::config("batch size must be at least 1").into(),
            partial: None,
        });
    }
    let mut times = Vec::with_capacity(n);
    let mut reference: Option<ScenarioOutput> = None;
    let mut identical = true;
    for run in 0..n {
        let started = Instant::now();
        let result = run_scenario(cfg);
        let elapsed = started.elapsed().as_secs_f64() * 1e3;
        match result {
            Ok(out) => {
                times.push(elapsed);
                match &reference {
                    None => reference = Some(out),
                    Some(first) => identical &= first.records == out.records,
                }
            }
            Err(failure) => {
                let partial = (!times.is_empty()).then(|| BatchStats::from_times(times, identical));
                return Err(BatchFailure { run, failure, partial });
            }
        }
    }
    Ok(BatchStats::from_times(times, identical))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rest_state() -> SimState {
        SimState {
            time: 0.0,
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            command: GradientCommand::new(0.0, Vec3::zeros()),
            controller: ControllerState::default(),
            index: 0,
        }
    }

    #[test]
    fn zero_force_keeps_velocity() {
        let s = SimState {
            velocity: Vec3::new(0.01, -0.02, 0.005),
            ..rest_state()
        };
        let n = step_dynamics(&s, Vec3::zeros(), Vec3::zeros(), 1e-6, 1e-3).unwrap();
        assert_eq!(n.velocity, s.velocity);
        assert_eq!(n.position, s.velocity * 1e-3);
        assert_eq!(n.time, 1e-3);
    }

    #[test]
    fn constant_force_from_rest() {
        let f = Vec3::new(2.0, 0.0, -1.0);
        let (m, dt) = (0.5, 0.25);
        let mut s = rest_state();
        for _ in 0..10 {
            s = step_dynamics(&s, f, Vec3::zeros(), m, dt).unwrap();
        }
        // dyadic values make the accumulation exact
        assert_eq!(s.velocity, 10.0 * dt * f / m);
    }

    #[test]
    fn linear_drag_decay_never_crosses_zero() {
        let sphere = SphereSpec::default();
        let m = sphere.mass();
        let dt = 1e-3;
        let c = 0.5 * sphere.drag_coefficient * PAPER_BLOOD_DENSITY * sphere.reference_area();
        let mut s = SimState {
            velocity: Vec3::new(0.05, 0.0, 0.0),
            ..rest_state()
        };
        let mut energy = s.velocity.norm_squared();
        for _ in 0..5000 {
            let drag = drag_force(
                sphere.drag_coefficient,
                PAPER_BLOOD_DENSITY,
                sphere.reference_area(),
                Vec3::zeros(),
                s.velocity,
                crate::hemodynamics::DragMode::PaperLinear,
            )
            .unwrap();
            let v0 = s.velocity.x;
            s = step_dynamics(&s, Vec3::zeros(), drag, m, dt).unwrap();
            let analytic = v0 * (-c * dt / m).exp();
            assert!(s.velocity.x > 0.0);
            assert!(s.velocity.x < v0);
            assert!(s.velocity.x <= analytic);
            let e = s.velocity.norm_squared();
            assert!(e <= energy);
            energy = e;
        }
    }

    #[test]
    fn non_finite_force_diverges() {
        let r = step_dynamics(&rest_state(), Vec3::new(f64::NAN, 0.0, 0.0), Vec3::zeros(), 1.0, 1e-3);
        assert!(matches!(r, Err(Error::NumericalDivergence { .. })));
        let r = step_dynamics(&rest_state(), Vec3::new(f64::MAX, 0.0, 0.0), Vec3::zeros(), 1e-300, 1e-3);
        assert!(matches!(r, Err(Error::NumericalDivergence { .. })));
    }

    #[test]
    fn schedule_validation() {
        let wps = vec![Waypoint::new(0.0, 0.0, 0.0, 0.0), Waypoint::new(1.0, 0.05, 0.0, 0.0)];
        let base = ScenarioConfig::with_defaults(wps, 1.0);
        base.validate().unwrap();
        assert!(ScenarioConfig { dt: 0.3, tp: 0.2, ..base.clone() }.validate().is_err());
        assert!(ScenarioConfig { dt: 0.003, ..base.clone() }.validate().is_err());
        assert!(ScenarioConfig { tp: 0.2, dt: 0.0015, ..base.clone() }.validate().is_err());
        assert!(ScenarioConfig { duration: -1.0, ..base.clone() }.validate().is_err());
        assert!(ScenarioConfig { tp: 0.2, ..base }.validate().is_ok());
    }
}
