//! Ferromagnetic sphere properties and gradient-induced propulsion.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::Vec3;

pub const DEFAULT_SPHERE_RADIUS: f64 = 3e-4;
/// Saturation magnetization of the core, A/m.
pub const DEFAULT_MAGNETIZATION: f64 = 1.9496e6;
/// Permendur, kg/m^3.
pub const DEFAULT_MATERIAL_DENSITY: f64 = 8120.0;
pub const DEFAULT_DRAG_COEFFICIENT: f64 = 0.47;
/// 40 mT/m.
pub const DEFAULT_MAX_GRADIENT: f64 = 0.040;
pub const DEFAULT_REFRESH_INTERVAL: f64 = 0.100;

fn positive(what: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidValue { what, value })
    }
}

pub fn sphere_volume(radius: f64) -> Result<f64> {
    let r = positive("sphere radius", radius)?;
    Ok(4.0 / 3.0 * PI * r * r * r)
}

pub fn magnetic_moment(magnetization: f64, volume: f64) -> Result<f64> {
    Ok(positive("magnetization", magnetization)? * positive("volume", volume)?)
}

/// Force on a magnetized core of `volume` in gradient `gradient`, applied
/// per axis.
pub fn magnetic_force(magnetization: f64, gradient: Vec3, volume: f64) -> Result<Vec3> {
    if !magnetization.is_finite() || !volume.is_finite() || gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidValue {
            what: "magnetic force input",
            value: f64::NAN,
        });
    }
    Ok(gradient * (magnetization * volume))
}

/// Physical and magnetic description of the sphere. Derived quantities are
/// computed on demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereSpec {
    pub radius: f64,
    pub magnetization: f64,
    pub material_density: f64,
    pub drag_coefficient: f64,
}

impl Default for SphereSpec {
    fn default() -> Self {
        Self {
            radius: DEFAULT_SPHERE_RADIUS,
            magnetization: DEFAULT_MAGNETIZATION,
            material_density: DEFAULT_MATERIAL_DENSITY,
            drag_coefficient: DEFAULT_DRAG_COEFFICIENT,
        }
    }
}

impl SphereSpec {
    pub fn validate(&self) -> Result<()> {
        positive("sphere radius", self.radius)?;
        positive("magnetization", self.magnetization)?;
        positive("material density", self.material_density)?;
        positive("drag coefficient", self.drag_coefficient)?;
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.radius.powi(3)
    }

    /// Frontal area facing the flow.
    pub fn reference_area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    pub fn moment(&self) -> f64 {
        self.magnetization * self.volume()
    }

    pub fn mass(&self) -> f64 {
        self.material_density * self.volume()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AxisFlags {
    pub x: bool,
    pub y: bool,
    pub z: bool,
}

impl AxisFlags {
    pub fn get(&self, axis: usize) -> bool {
        [self.x, self.y, self.z][axis]
    }

    pub fn any(&self) -> bool {
        self.x || self.y || self.z
    }
}

/// Per-axis gradient issued to the scanner at `timestamp` (s), in T/m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCommand {
    pub timestamp: f64,
    pub gradient: Vec3,
    pub clipped: AxisFlags,
}

impl GradientCommand {
    pub fn new(timestamp: f64, gradient: Vec3) -> Self {
        Self {
            timestamp,
            gradient,
            clipped: AxisFlags::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientLimits {
    /// Per-axis amplitude ceiling, T/m.
    pub max_amplitude: f64,
    /// Gradient refresh period, s.
    pub refresh_interval: f64,
}

impl Default for GradientLimits {
    fn default() -> Self {
        Self {
            max_amplitude: DEFAULT_MAX_GRADIENT,
            refresh_interval: DEFAULT_REFRESH_INTERVAL,
        }
    }
}

impl GradientLimits {
    pub fn validate(&self) -> Result<()> {
        positive("max gradient amplitude", self.max_amplitude)?;
        positive("refresh interval", self.refresh_interval)?;
        Ok(())
    }
}

/// Saturate each axis to the amplitude limit, flagging the axes that were cut.
pub fn clamp_gradient(cmd: GradientCommand, limits: &GradientLimits) -> GradientCommand {
    let max = limits.max_amplitude;
    let mut out = cmd;
    let mut flags = [cmd.clipped.x, cmd.clipped.y, cmd.clipped.z];
    for (axis, flag) in flags.iter_mut().enumerate() {
        let g = cmd.gradient[axis];
        if g.abs() > max {
            out.gradient[axis] = max.copysign(g);
            *flag = true;
        }
    }
    out.clipped = AxisFlags {
        x: flags[0],
        y: flags[1],
        z: flags[2],
    };
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn volume_of_paper_sphere() {
        assert!(matches!(sphere_volume(0.0), Err(Error::InvalidValue { .. })));
        let v = sphere_volume(3e-4).unwrap();
        assert!((v - 1.130_973_355_292_325_6e-10).abs() <= 1e-12 * v);
        let ratio = sphere_volume(6e-4).unwrap() / v;
        assert!((ratio - 8.0).abs() < 1e-12);
    }

    #[test]
    fn moment_examples() {
        assert_eq!(magnetic_moment(1.0, 1.0).unwrap(), 1.0);
        assert!(magnetic_moment(1.9496e6, 0.0).is_err());
        let m = magnetic_moment(1.9496e6, 1.130973e-10).unwrap();
        assert!((m - 2.2049e-4).abs() < 1e-8);
    }

    #[test]
    fn force_at_measured_gradients() {
        let vol = 1.130973e-10;
        assert_eq!(magnetic_force(1.9496e6, Vec3::zeros(), vol).unwrap(), Vec3::zeros());
        for (g, f) in [(0.93e-3, 2.0506e-7), (1.68e-3, 3.704e-7), (3.35e-3, 7.386e-7)] {
            let force = magnetic_force(1.9496e6, Vec3::new(g, 0.0, 0.0), vol).unwrap();
            assert!((force.x - f).abs() < 5e-4 * f, "{g}: {}", force.x);
        }
    }

    #[test]
    fn clamp_examples() {
        let limits = GradientLimits::default();
        let c = clamp_gradient(GradientCommand::new(1.5, Vec3::new(0.01, -0.02, 0.03)), &limits);
        assert_eq!(c.gradient, Vec3::new(0.01, -0.02, 0.03));
        assert!(!c.clipped.any());
        assert_eq!(c.timestamp, 1.5);

        let c = clamp_gradient(GradientCommand::new(0.0, Vec3::new(0.10, 0.0, 0.0)), &limits);
        assert_eq!(c.gradient, Vec3::new(0.040, 0.0, 0.0));
        assert_eq!(c.clipped, AxisFlags { x: true, y: false, z: false });

        let c = clamp_gradient(GradientCommand::new(0.0, Vec3::new(-0.05, 0.05, 0.0)), &limits);
        assert_eq!(c.gradient, Vec3::new(-0.040, 0.040, 0.0));
        assert_eq!(c.clipped, AxisFlags { x: true, y: true, z: false });
    }

    #[test]
    fn derived_quantities() {
        let s = SphereSpec::default();
        s.validate().unwrap();
        assert_eq!(s.moment(), s.magnetization * s.volume());
        assert!((s.mass() - 8120.0 * 1.130_973_355_292_325_6e-10).abs() < 1e-20);
        assert!(SphereSpec { radius: -1.0, ..s }.validate().is_err());
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        (-0.2f64..0.2, -0.2f64..0.2, -0.2f64..0.2).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn clamp_is_idempotent_and_sign_preserving(g in vec3()) {
            let limits = GradientLimits::default();
            let once = clamp_gradient(GradientCommand::new(0.0, g), &limits);
            let twice = clamp_gradient(once, &limits);
            prop_assert_eq!(once, twice);
            for axis in 0..3 {
                prop_assert!(once.gradient[axis].abs() <= limits.max_amplitude);
                prop_assert!(once.gradient[axis] == 0.0 || once.gradient[axis].signum() == g[axis].signum());
            }
        }

        #[test]
        fn force_is_linear(a in vec3(), b in vec3(), vol in 1e-12f64..1e-9) {
            let m = DEFAULT_MAGNETIZATION;
            let sum = magnetic_force(m, a + b, vol).unwrap();
            let parts = magnetic_force(m, a, vol).unwrap() + magnetic_force(m, b, vol).unwrap();
            prop_assert!((sum - parts).norm() <= 1e-12 * (parts.norm() + sum.norm()) + 1e-300);
            let doubled = magnetic_force(m, a, 2.0 * vol).unwrap();
            prop_assert!((doubled - 2.0 * magnetic_force(m, a, vol).unwrap()).norm() <= 1e-12 * doubled.norm() + 1e-300);
        }

        #[test]
        fn moment_consistency(r in 1e-5f64..1e-2, m in 1e3f64..1e7) {
            let s = SphereSpec { radius: r, magnetization: m, ..SphereSpec::default() };
            let expected = m * (4.0 / 3.0) * PI * r * r * r;
            prop_assert!((s.moment() - expected).abs() <= 1e-12 * expected);
        }
    }
}
