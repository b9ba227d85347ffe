//! Vessel centerline geometry: waypoint interpolation, curvature and
//! arc-length sampling.

mod pchip;

use std::path::Path;

pub use pchip::{build_pchip, CubicHermitePiece, Pchip};

use crate::error::{Error, Result};
use crate::Vec3;

/// Tangent magnitudes at or below this are treated as degenerate.
pub const TANGENT_EPSILON: f64 = 1e-9;

/// A centerline control point. `t` is the dimensionless path parameter,
/// coordinates are in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Waypoint {
    pub fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        Self { t, x, y, z }
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }
}

/// One uniformly spaced sample of the centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub t: f64,
    pub position: Vec3,
    pub d1: Vec3,
    pub d2: Vec3,
    /// Curvature in 1/m; zero where the tangent is degenerate.
    pub curvature: f64,
    /// Cumulative arc length from the first sample, in meters.
    pub arc_length: f64,
}

impl PathSample {
    /// Unit tangent, or zero when degenerate.
    pub fn tangent(&self) -> Vec3 {
        let n = self.d1.norm();
        if n > TANGENT_EPSILON {
            self.d1 / n
        } else {
            Vec3::zeros()
        }
    }
}

/// Curvature of a space curve from its first and second parametric derivatives.
///
/// `K = |r' x r''| / |r'|^3`, written out per component.
pub fn curvature(d1: Vec3, d2: Vec3) -> Result<f64> {
    let speed = d1.norm();
    if !(speed > TANGENT_EPSILON) {
        return Err(Error::DegenerateTangent { magnitude: speed });
    }
    let (x1, y1, z1) = (d1.x, d1.y, d1.z);
    let (x2, y2, z2) = (d2.x, d2.y, d2.z);
    let a = z2 * y1 - y2 * z1;
    let b = x2 * z1 - z2 * x1;
    let c = y2 * x1 - x2 * y1;
    let numerator = (a * a + b * b + c * c).sqrt();
    let denominator = (x1 * x1 + y1 * y1 + z1 * z1).powf(1.5);
    Ok(numerator / denominator)
}

/// Smooth 3D centerline through a set of waypoints, with cached samples.
#[derive(Debug, Clone)]
pub struct CenterlinePath {
    x: Pchip,
    y: Pchip,
    z: Pchip,
    step: f64,
    samples: Vec<PathSample>,
}

impl CenterlinePath {
    pub fn new(waypoints: &[Waypoint], step: f64) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: waypoints.len(),
            });
        }
        let axis = |f: fn(&Waypoint) -> f64| -> Vec<(f64, f64)> {
            waypoints.iter().map(|w| (w.t, f(w))).collect()
        };
        let x = build_pchip(&axis(|w| w.x))?;
        let y = build_pchip(&axis(|w| w.y))?;
        let z = build_pchip(&axis(|w| w.z))?;
        let mut path = Self {
            x,
            y,
            z,
            step,
            samples: Vec::new(),
        };
        path.samples = discretize(&path, step)?;
        Ok(path)
    }

    pub fn domain(&self) -> (f64, f64) {
        self.x.domain()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn samples(&self) -> &[PathSample] {
        &self.samples
    }

    pub fn axes(&self) -> [&Pchip; 3] {
        [&self.x, &self.y, &self.z]
    }

    pub fn total_length(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.arc_length)
    }

    pub fn end(&self) -> Vec3 {
        self.samples
            .last()
            .map_or_else(Vec3::zeros, |s| s.position)
    }

    /// Position, first and second derivative at `t`.
    pub fn evaluate(&self, t: f64) -> Result<(Vec3, Vec3, Vec3)> {
        let (x, dx, ddx) = self.x.eval(t)?;
        let (y, dy, ddy) = self.y.eval(t)?;
        let (z, dz, ddz) = self.z.eval(t)?;
        Ok((
            Vec3::new(x, y, z),
            Vec3::new(dx, dy, dz),
            Vec3::new(ddx, ddy, ddz),
        ))
    }
}

/// Number of samples over `span` at `step`: the uniform grid, plus the end
/// point when `step` does not divide `span`.
pub fn sample_count(span: f64, step: f64) -> usize {
    // the small epsilon absorbs representation error in span/step
    let ratio = span / step;
    let uniform = (ratio + 1e-9).floor();
    uniform as usize + 1 + usize::from(ratio - uniform > 1e-9)
}

/// Sample the path uniformly in its parameter, accumulating arc length with
/// the trapezoid rule. The last interval is shorter when `step` does not
/// divide the parameter span, so the final sample is always the path end.
pub fn discretize(path: &CenterlinePath, step: f64) -> Result<Vec<PathSample>> {
    let (t_min, t_max) = path.domain();
    let span = t_max - t_min;
    if !(step > 0.0 && step <= span) {
        return Err(Error::InvalidStep { step, span });
    }
    let n = sample_count(span, step);
    let mut samples = Vec::with_capacity(n);
    let mut arc = 0.0;
    let mut prev_speed = 0.0;
    for k in 0..n {
        let t = if k + 1 == n { t_max } else { (t_min + k as f64 * step).min(t_max) };
        let (position, d1, d2) = path.evaluate(t)?;
        let speed = d1.norm();
        if k > 0 {
            let dt = t - samples.last().map_or(t_min, |s: &PathSample| s.t);
            arc += 0.5 * (prev_speed + speed) * dt;
        }
        prev_speed = speed;
        let curvature = curvature(d1, d2).unwrap_or(0.0);
        samples.push(PathSample {
            t,
            position,
            d1,
            d2,
            curvature,
            arc_length: arc,
        });
    }
    Ok(samples)
}

/// Read a `t,x,y,z` waypoint CSV (header required, meters).
pub fn load_waypoints(path: &Path) -> Result<Vec<Waypoint>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected = ["t", "x", "y", "z"];
    if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: format!("expected header t,x,y,z, found {}", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut waypoints = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let mut vals = [0.0; 4];
        for (i, field) in record.iter().enumerate() {
            vals[i] = field.parse::<f64>().map_err(|_| Error::Csv {
                path: path.to_path_buf(),
                message: format!("row {}: cannot parse {:?} as a number", row + 2, field),
            })?;
        }
        waypoints.push(Waypoint::new(vals[0], vals[1], vals[2], vals[3]));
    }
    Ok(waypoints)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}
