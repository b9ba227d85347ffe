//! Gradient slew-rate (dB/dt) verification and vessel-wall clearance checks.

use std::fmt::Write as _;

use crate::controller::nearest_sample_index;
use crate::error::{Error, Result};
use crate::magnetics::GradientCommand;
use crate::path::PathSample;
use crate::Vec3;

pub const DEFAULT_ISOCENTER_DISTANCE: f64 = 0.50;
pub const DEFAULT_DBDT_LIMIT: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlewParams {
    /// Distance from the isocenter at which dB/dt is evaluated, m.
    pub isocenter_distance: f64,
    /// Gradient rise time, s.
    pub rise_time: f64,
    /// Allowed |dB/dt|, T/s.
    pub limit: f64,
}

impl Default for SlewParams {
    fn default() -> Self {
        Self {
            isocenter_distance: DEFAULT_ISOCENTER_DISTANCE,
            rise_time: crate::magnetics::DEFAULT_REFRESH_INTERVAL,
            limit: DEFAULT_DBDT_LIMIT,
        }
    }
}

impl SlewParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rise_time > 0.0) {
            return Err(Error::InvalidRiseTime(self.rise_time));
        }
        for (what, value) in [
            ("isocenter distance", self.isocenter_distance),
            ("dB/dt limit", self.limit),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidValue { what, value });
            }
        }
        Ok(())
    }
}

/// Signed dB/dt between two gradient levels: `(next - prev) / rise_time * r`.
pub fn slew_rate(g_prev: f64, g_next: f64, rise_time: f64, isocenter_distance: f64) -> Result<f64> {
    if !(rise_time > 0.0) {
        return Err(Error::InvalidRiseTime(rise_time));
    }
    if !(isocenter_distance > 0.0) {
        return Err(Error::InvalidValue {
            what: "isocenter distance",
            value: isocenter_distance,
        });
    }
    Ok((g_next - g_prev) / rise_time * isocenter_distance)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlewReport {
    /// dB/dt between command `i` and `i + 1`, per axis.
    pub series: Vec<Vec3>,
    /// Largest |dB/dt| per axis.
    pub max_abs: Vec3,
    pub limit: f64,
    pub axis_pass: [bool; 3],
    pub pass: bool,
    /// Indices into `series` where any axis exceeds the limit.
    pub violations: Vec<usize>,
}

pub fn check_slew_series(commands: &[GradientCommand], params: &SlewParams) -> Result<SlewReport> {
    params.validate()?;
    if commands.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: commands.len(),
        });
    }
    for (i, w) in commands.windows(2).enumerate() {
        if !(w[1].timestamp > w[0].timestamp) {
            return Err(Error::InvalidSeries(format!(
                "timestamp at index {} ({}) does not follow {}",
                i + 1,
                w[1].timestamp,
                w[0].timestamp
            )));
        }
    }

    let mut series = Vec::with_capacity(commands.len() - 1);
    let mut max_abs = Vec3::zeros();
    let mut violations = Vec::new();
    for (i, w) in commands.windows(2).enumerate() {
        let mut s = Vec3::zeros();
        let mut violated = false;
        for axis in 0..3 {
            s[axis] = slew_rate(
                w[0].gradient[axis],
                w[1].gradient[axis],
                params.rise_time,
                params.isocenter_distance,
            )?;
            max_abs[axis] = max_abs[axis].max(s[axis].abs());
            violated |= s[axis].abs() > params.limit;
        }
        if violated {
            violations.push(i);
        }
        series.push(s);
    }
    let axis_pass = [0, 1, 2].map(|a| max_abs[a] <= params.limit);
    Ok(SlewReport {
        series,
        max_abs,
        limit: params.limit,
        axis_pass,
        pass: violations.is_empty(),
        violations,
    })
}

/// Slew report for a gradient trace sampled at increasing `times`, with the
/// scanner assumed idle (zero gradient) one rise time before the first
/// sample.
pub fn check_trace(times: &[f64], gradients: &[Vec3], params: &SlewParams) -> Result<SlewReport> {
    params.validate()?;
    if times.len() != gradients.len() {
        return Err(Error::InvalidSeries(format!(
            "{} timestamps for {} gradients",
            times.len(),
            gradients.len()
        )));
    }
    if times.is_empty() {
        return Ok(SlewReport {
            series: Vec::new(),
            max_abs: Vec3::zeros(),
            limit: params.limit,
            axis_pass: [true; 3],
            pass: true,
            violations: Vec::new(),
        });
    }
    let mut commands = Vec::with_capacity(times.len() + 1);
    commands.push(GradientCommand::new(times[0] - params.rise_time, Vec3::zeros()));
    commands.extend(
        times
            .iter()
            .zip(gradients)
            .map(|(&t, &g)| GradientCommand::new(t, g)),
    );
    check_slew_series(&commands, params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureViolation {
    pub time: f64,
    pub position: Vec3,
    /// Distance from the nearest centerline sample, m.
    pub distance: f64,
    pub allowed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureCheck {
    pub index: usize,
    pub distance: f64,
    pub violation: Option<FixtureViolation>,
}

impl FixtureCheck {
    pub fn ok(&self) -> bool {
        self.violation.is_none()
    }
}

/// Clearance check against the centerline: the sphere center must stay within
/// `vessel_radius - sphere_radius` of the nearest sample in the forward window.
pub fn check_virtual_fixture(
    time: f64,
    position: Vec3,
    samples: &[PathSample],
    last_index: usize,
    window: usize,
    vessel_radius: f64,
    sphere_radius: f64,
) -> Result<FixtureCheck> {
    if !(vessel_radius > sphere_radius) {
        return Err(Error::ImpossibleGeometry {
            vessel_radius,
            sphere_radius,
        });
    }
    let index = nearest_sample_index(samples, position, last_index, window)?;
    let distance = (samples[index].position - position).norm();
    let allowed = vessel_radius - sphere_radius;
    let violation = (distance > allowed).then_some(FixtureViolation {
        time,
        position,
        distance,
        allowed,
    });
    Ok(FixtureCheck {
        index,
        distance,
        violation,
    })
}

fn render_slew(out: &mut String, slew: &SlewReport, params: &SlewParams) {
    let _ = writeln!(out, "dbdt_limit_t_per_s: {}", params.limit);
    let _ = writeln!(out, "isocenter_distance_m: {}", params.isocenter_distance);
    let _ = writeln!(out, "rise_time_s: {}", params.rise_time);
    for (a, name) in ["x", "y", "z"].iter().enumerate() {
        let _ = writeln!(out, "dbdt_max_{name}_t_per_s: {:.9e}", slew.max_abs[a]);
        let _ = writeln!(out, "dbdt_pass_{name}: {}", slew.axis_pass[a]);
    }
    let _ = writeln!(out, "dbdt_violations: {}", slew.violations.len());
    if let Some(first) = slew.violations.first() {
        let _ = writeln!(out, "dbdt_first_violation_index: {first}");
    }
}

fn overall(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

/// Render the slew report and fixture summary as `key: value` lines.
pub fn render_report(
    slew: &SlewReport,
    params: &SlewParams,
    fixture_violations: &[FixtureViolation],
    max_fixture_distance: f64,
) -> String {
    let mut out = String::new();
    render_slew(&mut out, slew, params);
    let _ = writeln!(out, "fixture_violations: {}", fixture_violations.len());
    let _ = writeln!(out, "fixture_max_distance_m: {max_fixture_distance:.9e}");
    if let Some(v) = fixture_violations.first() {
        let _ = writeln!(out, "fixture_first_violation_time_s: {}", v.time);
        let _ = writeln!(out, "fixture_allowed_clearance_m: {:.9e}", v.allowed);
    }
    let _ = writeln!(out, "overall: {}", overall(slew.pass && fixture_violations.is_empty()));
    out
}

/// Report for a recorded trace, where fixture status is only known from the
/// per-row flags (times of rows flagged as outside the corridor).
pub fn render_trace_report(slew: &SlewReport, params: &SlewParams, flagged_times: &[f64]) -> String {
    let mut out = String::new();
    render_slew(&mut out, slew, params);
    let _ = writeln!(out, "fixture_flagged_rows: {}", flagged_times.len());
    if let Some(t) = flagged_times.first() {
        let _ = writeln!(out, "fixture_first_violation_time_s: {t}");
    }
    let _ = writeln!(out, "overall: {}", overall(slew.pass && flagged_times.is_empty()));
    out
}

pub const SAFETY_CSV_HEADER: &str = "check,index,time_s,x,y,z,value,limit,pass";

/// Machine-readable safety rows: the dB/dt maxima, each dB/dt violation,
/// the fixture maximum and each fixture violation.
pub fn render_safety_csv(
    slew: &SlewReport,
    fixture_violations: &[FixtureViolation],
    max_fixture_distance: f64,
    allowed_clearance: f64,
) -> String {
    let f = |v: f64| crate::telemetry::format_significant(v, crate::telemetry::SIGNIFICANT_DIGITS);
    let b = |p: bool| if p { "1" } else { "0" };
    let mut out = String::new();
    let _ = writeln!(out, "{SAFETY_CSV_HEADER}");
    let m = slew.max_abs;
    let _ = writeln!(
        out,
        "dbdt_max,,,{},{},{},{},{},{}",
        f(m.x),
        f(m.y),
        f(m.z),
        f(m.amax()),
        f(slew.limit),
        b(slew.pass)
    );
    for &i in &slew.violations {
        let s = slew.series[i];
        let _ = writeln!(
            out,
            "dbdt_violation,{i},,{},{},{},{},{},0",
            f(s.x),
            f(s.y),
            f(s.z),
            f(s.amax()),
            f(slew.limit)
        );
    }
    let _ = writeln!(
        out,
        "fixture_max,,,,,,{},{},{}",
        f(max_fixture_distance),
        f(allowed_clearance),
        b(fixture_violations.is_empty())
    );
    for v in fixture_violations {
        let p = v.position;
        let _ = writeln!(
            out,
            "fixture_violation,,{},{},{},{},{},{},0",
            f(v.time),
            f(p.x),
            f(p.y),
            f(p.z),
            f(v.distance),
            f(v.allowed)
        );
    }
    out
}
