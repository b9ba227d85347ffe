//! Blood flow, drag and the curvature-dependent velocity setpoint.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::Vec3;

/// Blood density as printed in the source model (kg/m^3).
pub const PAPER_BLOOD_DENSITY: f64 = 1.025;
/// Physiological blood density (kg/m^3).
pub const PHYSIOLOGICAL_BLOOD_DENSITY: f64 = 1025.0;
pub const DEFAULT_MIN_SETPOINT_SPEED: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowRegime {
    Steady,
    Normal,
    Fast,
}

impl FlowRegime {
    pub fn name(self) -> &'static str {
        match self {
            FlowRegime::Steady => "steady",
            FlowRegime::Normal => "normal",
            FlowRegime::Fast => "fast",
        }
    }

    pub fn default_heart_rate_bpm(self) -> f64 {
        match self {
            FlowRegime::Steady | FlowRegime::Normal => 60.0,
            FlowRegime::Fast => 120.0,
        }
    }
}

impl std::str::FromStr for FlowRegime {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "steady" => Ok(FlowRegime::Steady),
            "normal" => Ok(FlowRegime::Normal),
            "fast" => Ok(FlowRegime::Fast),
            other => Err(format!("unknown flow regime {other:?} (steady|normal|fast)")),
        }
    }
}

/// One Fourier component, as a fraction of the mean velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    pub amplitude: f64,
    pub phase: f64,
}

pub fn default_harmonics() -> Vec<Harmonic> {
    [0.6, 0.3, 0.15, 0.05]
        .iter()
        .zip([0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0])
        .map(|(&amplitude, phase)| Harmonic { amplitude, phase })
        .collect()
}

/// Shape of one cardiac period, relative to the mean.
#[derive(Debug, Clone, PartialEq)]
pub enum PulseShape {
    Harmonics(Vec<Harmonic>),
    /// `(time_fraction, velocity_fraction)` samples over one period,
    /// linearly interpolated with wrap-around. `mean` is the period average
    /// of the raw fractions, used to rescale to the configured mean flow.
    Sampled { points: Vec<(f64, f64)>, mean: f64 },
}

/// Time-dependent mean blood velocity in a rigid vessel.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowWaveform {
    pub regime: FlowRegime,
    /// Mean volumetric flow rate, m^3/s.
    pub mean_flow: f64,
    pub heart_rate_bpm: f64,
    pub shape: PulseShape,
}

impl FlowWaveform {
    pub fn steady(mean_flow: f64) -> Self {
        Self {
            regime: FlowRegime::Steady,
            mean_flow,
            heart_rate_bpm: FlowRegime::Steady.default_heart_rate_bpm(),
            shape: PulseShape::Harmonics(Vec::new()),
        }
    }

    pub fn pulsatile(regime: FlowRegime, mean_flow: f64) -> Self {
        Self {
            regime,
            mean_flow,
            heart_rate_bpm: regime.default_heart_rate_bpm(),
            shape: PulseShape::Harmonics(default_harmonics()),
        }
    }

    pub fn period(&self) -> f64 {
        60.0 / self.heart_rate_bpm
    }

    /// Mean velocity through a circular cross-section of `radius`.
    pub fn mean_velocity(&self, radius: f64) -> Result<f64> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidVessel(format!(
                "vessel radius must be positive, got {radius}"
            )));
        }
        Ok(self.mean_flow / (PI * radius * radius))
    }

    /// Blood speed along the local tangent at time `t`, never negative.
    pub fn flow_velocity(&self, radius: f64, t: f64) -> Result<f64> {
        let mean = self.mean_velocity(radius)?;
        if self.regime == FlowRegime::Steady {
            return Ok(mean);
        }
        let period = self.period();
        let phase = t.rem_euclid(period) / period;
        let relative = match &self.shape {
            PulseShape::Harmonics(harmonics) => {
                1.0 + harmonics
                    .iter()
                    .enumerate()
                    .map(|(k, h)| {
                        h.amplitude * (2.0 * PI * (k + 1) as f64 * phase + h.phase).cos()
                    })
                    .sum::<f64>()
            }
            PulseShape::Sampled { points, mean } => sampled_fraction(points, phase) / mean,
        };
        Ok((mean * relative).max(0.0))
    }
}

fn sampled_fraction(points: &[(f64, f64)], phase: f64) -> f64 {
    let n = points.len();
    let upper = points.partition_point(|p| p.0 <= phase);
    let (a, b) = match upper {
        0 => {
            let last = points[n - 1];
            ((last.0 - 1.0, last.1), points[0])
        }
        u if u == n => {
            let first = points[0];
            (points[n - 1], (first.0 + 1.0, first.1))
        }
        u => (points[u - 1], points[u]),
    };
    let w = (phase - a.0) / (b.0 - a.0);
    a.1 + w * (b.1 - a.1)
}

/// Period mean of the piecewise-linear periodic function through `points`.
fn sampled_mean(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    let mut area = 0.0;
    for i in 0..n {
        let a = points[i];
        let b = if i + 1 < n {
            points[i + 1]
        } else {
            (points[0].0 + 1.0, points[0].1)
        };
        area += 0.5 * (a.1 + b.1) * (b.0 - a.0);
    }
    area
}

/// Build a sampled pulse shape, validating ordering and the period range.
pub fn sampled_shape(points: Vec<(f64, f64)>) -> Result<PulseShape> {
    if points.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: points.len(),
        });
    }
    for (i, &(t, v)) in points.iter().enumerate() {
        if !(0.0..1.0).contains(&t) || !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidValue {
                what: "waveform sample",
                value: if (0.0..1.0).contains(&t) { v } else { t },
            });
        }
        if i > 0 && t <= points[i - 1].0 {
            return Err(Error::InvalidKnots { index: i });
        }
    }
    let mean = sampled_mean(&points);
    if !(mean > 0.0) {
        return Err(Error::InvalidValue {
            what: "waveform mean fraction",
            value: mean,
        });
    }
    Ok(PulseShape::Sampled { points, mean })
}

/// Read a `time_fraction,velocity_fraction` waveform override file.
pub fn load_waveform(path: &Path) -> Result<PulseShape> {
    let to_err = |message: String| Error::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| to_err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| to_err(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["time_fraction", "velocity_fraction"] {
        return Err(to_err(
            "expected header time_fraction,velocity_fraction".to_string(),
        ));
    }
    let mut points = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| to_err(e.to_string()))?;
        let parse = |i: usize| {
            record[i]
                .parse::<f64>()
                .map_err(|_| to_err(format!("row {}: bad number {:?}", row + 2, &record[i])))
        };
        points.push((parse(0)?, parse(1)?));
    }
    sampled_shape(points)
}

/// Rigid vessel radius along the centerline.
#[derive(Debug, Clone, PartialEq)]
pub enum VesselSegment {
    Uniform(f64),
    /// One radius per centerline sample.
    Profile(Vec<f64>),
}

impl VesselSegment {
    pub fn radius_at(&self, sample: usize) -> f64 {
        match self {
            VesselSegment::Uniform(r) => *r,
            VesselSegment::Profile(radii) => radii[sample.min(radii.len() - 1)],
        }
    }

    pub fn min_radius(&self) -> f64 {
        match self {
            VesselSegment::Uniform(r) => *r,
            VesselSegment::Profile(radii) => radii.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// Reject vessels that cannot contain a sphere of `sphere_radius`.
    pub fn validate(&self, sphere_radius: f64, samples: usize) -> Result<()> {
        if let VesselSegment::Profile(radii) = self {
            if radii.len() != samples {
                return Err(Error::InvalidVessel(format!(
                    "radius profile has {} entries for {} samples",
                    radii.len(),
                    samples
                )));
            }
        }
        let min = self.min_radius();
        if !(min > sphere_radius) {
            return Err(Error::ImpossibleGeometry {
                vessel_radius: min,
                sphere_radius,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DragMode {
    /// `1/2 Cd rho A |dv|`, linear in relative speed.
    #[default]
    PaperLinear,
    /// `1/2 Cd rho A |dv|^2`, the conventional quadratic law.
    Quadratic,
}

impl std::str::FromStr for DragMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "paper-linear" => Ok(DragMode::PaperLinear),
            "quadratic" => Ok(DragMode::Quadratic),
            other => Err(format!("unknown drag mode {other:?} (paper-linear|quadratic)")),
        }
    }
}

/// Fluid drag on the sphere, directed along `v_blood - v_sphere`.
pub fn drag_force(
    drag_coefficient: f64,
    density: f64,
    reference_area: f64,
    v_blood: Vec3,
    v_sphere: Vec3,
    mode: DragMode,
) -> Result<Vec3> {
    for (what, value) in [
        ("drag coefficient", drag_coefficient),
        ("blood density", density),
        ("reference area", reference_area),
    ] {
        if !value.is_finite() {
            return Err(Error::InvalidValue { what, value });
        }
    }
    let relative = v_blood - v_sphere;
    if relative.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidValue {
            what: "relative velocity",
            value: relative.norm(),
        });
    }
    let speed = relative.norm();
    if speed == 0.0 {
        return Ok(Vec3::zeros());
    }
    let scale = 0.5 * drag_coefficient * density * reference_area;
    let magnitude = match mode {
        DragMode::PaperLinear => scale * speed,
        DragMode::Quadratic => scale * speed * speed,
    };
    Ok(relative / speed * magnitude)
}

/// Constants shaping the velocity setpoint along the path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityProfileParams {
    /// Baseline speed on a straight path, m/s.
    pub v0: f64,
    /// Curvature at which the baseline speed halves, 1/m.
    pub k0: f64,
    /// Normalization of the clearance term.
    pub r0: f64,
    /// Clearance reference radius, m.
    pub r_gc: f64,
    /// Floor on the returned speed, m/s.
    pub v_min: f64,
}

impl Default for VelocityProfileParams {
    fn default() -> Self {
        Self {
            v0: 0.01,
            k0: 20.0,
            r0: 1.0,
            r_gc: 3e-4,
            v_min: DEFAULT_MIN_SETPOINT_SPEED,
        }
    }
}

impl VelocityProfileParams {
    pub fn validate(&self) -> Result<()> {
        for (what, value) in [
            ("v0", self.v0),
            ("k0", self.k0),
            ("r0", self.r0),
            ("v_min", self.v_min),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidValue { what, value });
            }
        }
        if !self.r_gc.is_finite() {
            return Err(Error::InvalidValue {
                what: "r_gc",
                value: self.r_gc,
            });
        }
        Ok(())
    }

    /// Target speed before the stall floor is applied.
    pub fn unclamped(&self, curvature: f64, sphere_radius: f64) -> f64 {
        self.v0 / (1.0 + curvature / self.k0) + (sphere_radius - self.r_gc) / self.r0
    }
}

/// Target speed at a point of curvature `curvature` for a sphere of
/// `sphere_radius`, floored at `params.v_min`.
pub fn velocity_setpoint(params: &VelocityProfileParams, curvature: f64, sphere_radius: f64) -> f64 {
    params
        .unclamped(curvature, sphere_radius)
        .max(params.v_min)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CD: f64 = 0.47;
    const RHO: f64 = PAPER_BLOOD_DENSITY;

    fn sphere_area() -> f64 {
        PI * 3e-4 * 3e-4
    }

    #[test]
    fn steady_velocity_from_flow_rate() {
        let w = FlowWaveform::steady(1e-6);
        let v = w.flow_velocity(3e-3, 12.3).unwrap();
        // 1e-6 / (pi * 9e-6)
        assert!((v - 0.035_367_765_131_532_3).abs() < 1e-15);
        assert!(matches!(
            w.flow_velocity(0.0, 0.0),
            Err(Error::InvalidVessel(_))
        ));
    }

    #[test]
    fn pulsatile_is_periodic() {
        for regime in [FlowRegime::Normal, FlowRegime::Fast] {
            let w = FlowWaveform::pulsatile(regime, 1e-6);
            let period = w.period();
            for t in [0.0, 0.125, 0.375, 0.4375] {
                assert_eq!(
                    w.flow_velocity(3e-3, t).unwrap(),
                    w.flow_velocity(3e-3, t + period).unwrap()
                );
            }
        }
        assert_eq!(FlowWaveform::pulsatile(FlowRegime::Fast, 1e-6).period(), 0.5);
    }

    #[test]
    fn pulsatile_mean_matches_flow_rate() {
        let w = FlowWaveform::pulsatile(FlowRegime::Normal, 1e-6);
        let period = w.period();
        let n = 1_000_000;
        let h = period / n as f64;
        let mut integral = 0.0;
        let mut prev = w.flow_velocity(3e-3, 0.0).unwrap();
        for i in 1..=n {
            let v = w.flow_velocity(3e-3, i as f64 * h).unwrap();
            integral += 0.5 * (prev + v) * h;
            prev = v;
        }
        let mean = integral / period;
        let expected = 1e-6 / (PI * 9e-6);
        assert!((mean - expected).abs() <= 1e-3 * expected);
    }

    #[test]
    fn sampled_waveform_rescales_to_mean() {
        let shape = sampled_shape(vec![(0.0, 1.0), (0.25, 3.0), (0.5, 1.0), (0.75, 1.0)]).unwrap();
        let w = FlowWaveform {
            regime: FlowRegime::Normal,
            mean_flow: 1e-6,
            heart_rate_bpm: 60.0,
            shape,
        };
        let n = 4000;
        let mean: f64 = (0..n)
            .map(|i| w.flow_velocity(3e-3, i as f64 / n as f64).unwrap())
            .sum::<f64>()
            / n as f64;
        let expected = w.mean_velocity(3e-3).unwrap();
        assert!((mean - expected).abs() < 1e-9 * expected);
        // wrap-around segment from 0.75 back to 1.0 (=0.0)
        let v = w.flow_velocity(3e-3, 0.875).unwrap();
        assert!((v / expected - 1.0 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn sampled_waveform_validation() {
        assert!(sampled_shape(vec![(0.0, 1.0)]).is_err());
        assert!(sampled_shape(vec![(0.0, 1.0), (1.0, 1.0)]).is_err());
        assert!(sampled_shape(vec![(0.5, 1.0), (0.2, 1.0)]).is_err());
        assert!(sampled_shape(vec![(0.0, 0.0), (0.5, 0.0)]).is_err());
    }

    #[test]
    fn drag_zero_for_matched_velocity() {
        let v = Vec3::new(0.03, -0.01, 0.002);
        let f = drag_force(CD, RHO, sphere_area(), v, v, DragMode::PaperLinear).unwrap();
        assert_eq!(f, Vec3::zeros());
    }

    #[test]
    fn drag_magnitude_matches_hand_arithmetic() {
        let f = drag_force(
            CD,
            RHO,
            sphere_area(),
            Vec3::new(0.1, 0.0, 0.0),
            Vec3::zeros(),
            DragMode::PaperLinear,
        )
        .unwrap();
        let expected = 0.5 * 0.47 * 1.025 * (PI * 9e-8) * 0.1;
        assert!((f.x - expected).abs() < 1e-22);
        assert!((f.x - 6.810e-9).abs() < 1e-12);
        assert_eq!((f.y, f.z), (0.0, 0.0));
    }

    #[test]
    fn drag_linear_and_quadratic_scaling() {
        let a = sphere_area();
        let dv = Vec3::new(0.02, 0.01, -0.03);
        let f1 = drag_force(CD, RHO, a, dv, Vec3::zeros(), DragMode::PaperLinear).unwrap();
        let f2 = drag_force(CD, RHO, a, 2.0 * dv, Vec3::zeros(), DragMode::PaperLinear).unwrap();
        assert!((f2 - 2.0 * f1).norm() <= 1e-15 * f1.norm());
        let q1 = drag_force(CD, RHO, a, dv, Vec3::zeros(), DragMode::Quadratic).unwrap();
        let q2 = drag_force(CD, RHO, a, 2.0 * dv, Vec3::zeros(), DragMode::Quadratic).unwrap();
        assert!((q2 - 4.0 * q1).norm() <= 1e-15 * q1.norm());
    }

    #[test]
    fn drag_rejects_non_finite() {
        let r = drag_force(
            CD,
            RHO,
            1.0,
            Vec3::new(f64::NAN, 0.0, 0.0),
            Vec3::zeros(),
            DragMode::PaperLinear,
        );
        assert!(matches!(r, Err(Error::InvalidValue { .. })));
    }

    #[test]
    fn setpoint_examples() {
        let p = VelocityProfileParams {
            v0: 0.05,
            k0: 100.0,
            r0: 1.0,
            r_gc: 3e-4,
            v_min: 1e-4,
        };
        assert_eq!(velocity_setpoint(&p, 0.0, 3e-4), 0.05);
        assert_eq!(velocity_setpoint(&p, 100.0, 3e-4), 0.025);
        assert!((velocity_setpoint(&p, 300.0, 3e-4) - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn setpoint_floor() {
        let p = VelocityProfileParams {
            v0: 0.01,
            k0: 10.0,
            r0: 1e-3,
            r_gc: 1e-3,
            v_min: 1e-4,
        };
        assert!(p.unclamped(0.0, 3e-4) < 0.0);
        assert_eq!(velocity_setpoint(&p, 0.0, 3e-4), 1e-4);
    }

    #[test]
    fn vessel_validation() {
        assert!(VesselSegment::Uniform(3e-3).validate(3e-4, 10).is_ok());
        assert!(matches!(
            VesselSegment::Uniform(3e-4).validate(3e-4, 10),
            Err(Error::ImpossibleGeometry { .. })
        ));
        assert!(VesselSegment::Profile(vec![3e-3; 3]).validate(3e-4, 4).is_err());
        let profile = VesselSegment::Profile(vec![3e-3, 2e-3, 1e-3]);
        assert_eq!(profile.radius_at(10), 1e-3);
        assert_eq!(profile.min_radius(), 1e-3);
    }
}
