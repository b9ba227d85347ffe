//! Shared fixtures for the benchmarks.

use mrbot::{ControllerMode, ScenarioConfig, Waypoint};

/// The curved 10 cm channel used by the shipped nominal scenario.
pub fn curved_waypoints() -> Vec<Waypoint> {
    (0..=20)
        .map(|i| {
            let t = i as f64 * 0.05;
            let a = std::f64::consts::PI * t;
            Waypoint::new(t, 0.1 * t, 0.01 * a.sin(), 0.002 * (1.0 - a.cos()))
        })
        .collect()
}

pub fn nominal_config() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::with_defaults(curved_waypoints(), 60.0);
    cfg.controller.mode = ControllerMode::Dimensional;
    cfg
}
