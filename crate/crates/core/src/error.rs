use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("knot parameters must be strictly increasing (violation at index {index})")]
    InvalidKnots { index: usize },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid value for {what}: {value}")]
    InvalidValue { what: &'static str, value: f64 },

    #[error("parameter {t} outside domain [{min}, {max}]")]
    OutOfDomain { t: f64, min: f64, max: f64 },

    #[error("tangent magnitude {magnitude:e} is below the degeneracy threshold")]
    DegenerateTangent { magnitude: f64 },

    #[error("discretization step must be in (0, {span}], got {step}")]
    InvalidStep { step: f64, span: f64 },

    #[error("invalid vessel: {0}")]
    InvalidVessel(String),

    #[error("magnetic moment must be positive, got {0}")]
    InvalidMoment(f64),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("rise time must be positive, got {0}")]
    InvalidRiseTime(f64),

    #[error("invalid gradient series: {0}")]
    InvalidSeries(String),

    #[error("vessel radius {vessel_radius} m does not exceed sphere radius {sphere_radius} m")]
    ImpossibleGeometry {
        vessel_radius: f64,
        sphere_radius: f64,
    },

    #[error("numerical divergence at step {step} (t = {time} s): {detail}")]
    NumericalDivergence {
        step: usize,
        time: f64,
        detail: String,
    },

    #[error("config error{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config {
        line: Option<usize>,
        key: Option<String>,
        message: String,
    },

    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("write error: {0}")]
    Write(String),

    #[error("plot error: {0}")]
    Plot(String),
}

impl Error {
    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config {
            line: None,
            key: None,
            message: message.into(),
        }
    }

    pub(crate) fn config_at(line: usize, key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            line: Some(line),
            key: Some(key.to_string()),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
