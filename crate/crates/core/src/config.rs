//! Scenario file parsing.
//!
//! The format is one `key: value` pair per line; `#` starts a comment. Keys
//! carry their units. `waypoints` and `duration_s` are required; all other
//! keys fall back to defaults. Unknown or repeated keys are rejected.
//!
//! ```text
//! waypoints: curved_path.csv
//! duration_s: 60
//! tp_ms: 200
//! controller_mode: dimensional
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::controller::ControllerMode;
use crate::error::{Error, Result};
use crate::hemodynamics::{load_waveform, DragMode, FlowRegime, FlowWaveform, Harmonic, PulseShape, VesselSegment};
use crate::path::load_waypoints;
use crate::sim::ScenarioConfig;
use crate::Vec3;

/// Every accepted key, in echo order.
pub const KNOWN_KEYS: &[&str] = &[
    "waypoints",
    "duration_s",
    "step_h",
    "tp_ms",
    "compare_tp_ms",
    "dt_ms",
    "refresh_ms",
    "flow_regime",
    "mean_flow_ml_per_s",
    "heart_rate_bpm",
    "harmonic_amplitudes",
    "harmonic_phases_rad",
    "waveform_file",
    "vessel_radius_mm",
    "blood_density_kg_per_m3",
    "sphere_radius_mm",
    "magnetization_a_per_m",
    "material_density_kg_per_m3",
    "drag_coefficient",
    "kp",
    "ki",
    "kd",
    "kr",
    "delta_s",
    "drag_mode",
    "controller_mode",
    "anti_windup",
    "setpoint_window",
    "v0_m_per_s",
    "k0_per_m",
    "r0",
    "r_gc_mm",
    "v_min_m_per_s",
    "max_gradient_mt_per_m",
    "isocenter_m",
    "rise_time_ms",
    "dbdt_limit_t_per_s",
    "capture_radius_mm",
    "initial_offset_mm",
    "gravity",
];

struct Entries {
    map: HashMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once(':').ok_or_else(|| Error::Config {
                line: Some(line_no),
                key: None,
                message: format!("expected `key: value`, found {line:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::config_at(line_no, key, format!("unknown key {key:?}")));
            }
            if value.is_empty() {
                return Err(Error::config_at(line_no, key, format!("missing value for {key:?}")));
            }
            if let Some((first, _)) = map.insert(key.to_string(), (line_no, value.to_string())) {
                return Err(Error::config_at(
                    line_no,
                    key,
                    format!("duplicate key {key:?} (first set on line {first})"),
                ));
            }
        }
        Ok(Self { map })
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::config_at(line, key, format!("invalid value {v:?} for {key}: {e}"))),
        }
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        let v: Option<f64> = self.parsed(key)?;
        if let Some(x) = v {
            if !x.is_finite() {
                let line = self.raw(key).map(|r| r.0).unwrap_or(0);
                return Err(Error::config_at(line, key, format!("{key} must be finite")));
            }
        }
        Ok(v)
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some((line, v)) = self.raw(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Some)
            .map_err(|_| Error::config_at(line, key, format!("invalid number list {v:?}")))
    }

    fn switch(&self, key: &str) -> Result<Option<bool>> {
        match self.raw(key) {
            None => Ok(None),
            Some((_, "on")) => Ok(Some(true)),
            Some((_, "off")) => Ok(Some(false)),
            Some((line, v)) => Err(Error::config_at(line, key, format!("{key} must be on|off, got {v:?}"))),
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.raw(key).map_or(0, |r| r.0)
    }
}

/// Read and validate a scenario file. Relative file paths inside it resolve
/// against the file's directory.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_str(&text, base)
}

pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<ScenarioConfig> {
    let e = Entries::parse(text)?;
    let resolve = |p: &str| -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base_dir.join(p)
        }
    };

    let waypoint_file = match e.raw("waypoints") {
        Some((_, v)) => resolve(v),
        None => return Err(Error::config("missing required key \"waypoints\"")),
    };
    let duration = e
        .number("duration_s")?
        .ok_or_else(|| Error::config("missing required key \"duration_s\""))?;
    let waypoints = load_waypoints(&waypoint_file)?;
    let mut cfg = ScenarioConfig::with_defaults(waypoints, duration);
    cfg.waypoint_file = Some(waypoint_file);

    let ms = 1e-3;
    let mm = 1e-3;
    if let Some(v) = e.number("step_h")? {
        cfg.step = v;
    }
    if let Some(v) = e.number("tp_ms")? {
        cfg.tp = v * ms;
    }
    cfg.compare_tp = e.number("compare_tp_ms")?.map(|v| v * ms);
    if let Some(v) = e.number("dt_ms")? {
        cfg.dt = v * ms;
    }
    if let Some(v) = e.number("refresh_ms")? {
        cfg.limits.refresh_interval = v * ms;
    }

    let regime: FlowRegime = e.parsed("flow_regime")?.unwrap_or(FlowRegime::Steady);
    let mean_flow = e.number("mean_flow_ml_per_s")?.unwrap_or(1.0) * 1e-6;
    cfg.waveform = match regime {
        FlowRegime::Steady => FlowWaveform::steady(mean_flow),
        r => FlowWaveform::pulsatile(r, mean_flow),
    };
    if let Some(v) = e.number("heart_rate_bpm")? {
        cfg.waveform.heart_rate_bpm = v;
    }
    let amplitudes = e.list("harmonic_amplitudes")?;
    let phases = e.list("harmonic_phases_rad")?;
    if amplitudes.is_some() || phases.is_some() {
        let PulseShape::Harmonics(defaults) = &cfg.waveform.shape else {
            unreachable!("pulsatile defaults are harmonic")
        };
        let defaults = if defaults.is_empty() {
            crate::hemodynamics::default_harmonics()
        } else {
            defaults.clone()
        };
        let amplitudes = amplitudes.unwrap_or_else(|| defaults.iter().map(|h| h.amplitude).collect());
        let phases = phases.unwrap_or_else(|| defaults.iter().map(|h| h.phase).collect());
        if amplitudes.len() != phases.len() {
            return Err(Error::config_at(
                e.line_of("harmonic_phases_rad").max(e.line_of("harmonic_amplitudes")),
                "harmonic_phases_rad",
                format!("{} amplitudes but {} phases", amplitudes.len(), phases.len()),
            ));
        }
        cfg.waveform.shape = PulseShape::Harmonics(
            amplitudes
                .into_iter()
                .zip(phases)
                .map(|(amplitude, phase)| Harmonic { amplitude, phase })
                .collect(),
        );
    }
    if let Some((line, v)) = e.raw("waveform_file") {
        if e.raw("harmonic_amplitudes").is_some() {
            return Err(Error::config_at(line, "waveform_file", "waveform_file conflicts with harmonic_amplitudes"));
        }
        cfg.waveform.shape = load_waveform(&resolve(v))?;
    }

    if let Some(v) = e.number("vessel_radius_mm")? {
        cfg.vessel = VesselSegment::Uniform(v * mm);
    }
    if let Some(v) = e.number("blood_density_kg_per_m3")? {
        cfg.blood_density = v;
    }
    if let Some(v) = e.number("sphere_radius_mm")? {
        cfg.sphere.radius = v * mm;
    }
    if let Some(v) = e.number("magnetization_a_per_m")? {
        cfg.sphere.magnetization = v;
    }
    if let Some(v) = e.number("material_density_kg_per_m3")? {
        cfg.sphere.material_density = v;
    }
    if let Some(v) = e.number("drag_coefficient")? {
        cfg.sphere.drag_coefficient = v;
    }

    let gains = &mut cfg.controller.gains;
    for (key, slot) in [
        ("kp", &mut gains.kp),
        ("ki", &mut gains.ki),
        ("kd", &mut gains.kd),
        ("kr", &mut gains.kr),
        ("delta_s", &mut gains.delta),
    ] {
        if let Some(v) = e.number(key)? {
            *slot = v;
        }
    }
    if let Some(v) = e.parsed::<DragMode>("drag_mode")? {
        cfg.controller.drag_mode = v;
    }
    if let Some(v) = e.parsed::<ControllerMode>("controller_mode")? {
        cfg.controller.mode = v;
    }
    if let Some(v) = e.switch("anti_windup")? {
        cfg.controller.anti_windup = v;
    }
    if let Some(v) = e.parsed::<usize>("setpoint_window")? {
        cfg.controller.window = v;
    }

    if let Some(v) = e.number("v0_m_per_s")? {
        cfg.profile.v0 = v;
    }
    if let Some(v) = e.number("k0_per_m")? {
        cfg.profile.k0 = v;
    }
    if let Some(v) = e.number("r0")? {
        cfg.profile.r0 = v;
    }
    if let Some(v) = e.number("r_gc_mm")? {
        cfg.profile.r_gc = v * mm;
    }
    if let Some(v) = e.number("v_min_m_per_s")? {
        cfg.profile.v_min = v;
    }

    if let Some(v) = e.number("max_gradient_mt_per_m")? {
        cfg.limits.max_amplitude = v * 1e-3;
    }
    if let Some(v) = e.number("isocenter_m")? {
        cfg.slew.isocenter_distance = v;
    }
    cfg.slew.rise_time = match e.number("rise_time_ms")? {
        Some(v) => v * ms,
        None => cfg.limits.refresh_interval,
    };
    if let Some(v) = e.number("dbdt_limit_t_per_s")? {
        cfg.slew.limit = v;
    }
    cfg.capture_radius = e.number("capture_radius_mm")?.map(|v| v * mm);
    if let Some(v) = e.list("initial_offset_mm")? {
        if v.len() != 3 {
            return Err(Error::config_at(
                e.line_of("initial_offset_mm"),
                "initial_offset_mm",
                "initial_offset_mm needs three components",
            ));
        }
        cfg.initial_offset = Vec3::new(v[0], v[1], v[2]) * mm;
    }
    if let Some(v) = e.switch("gravity")? {
        cfg.gravity = v;
    }

    cfg.validate()?;
    Ok(cfg)
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

/// Every resolved setting in config syntax, for the run log.
pub fn echo(cfg: &ScenarioConfig) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k}: {v}");
    };
    let list = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
    if let Some(p) = &cfg.waypoint_file {
        kv("waypoints", p.display().to_string());
    }
    kv("duration_s", cfg.duration.to_string());
    kv("step_h", cfg.step.to_string());
    kv("tp_ms", (cfg.tp * 1e3).to_string());
    if let Some(tp) = cfg.compare_tp {
        kv("compare_tp_ms", (tp * 1e3).to_string());
    }
    kv("dt_ms", (cfg.dt * 1e3).to_string());
    kv("refresh_ms", (cfg.limits.refresh_interval * 1e3).to_string());
    kv("flow_regime", cfg.waveform.regime.name().to_string());
    kv("mean_flow_ml_per_s", (cfg.waveform.mean_flow * 1e6).to_string());
    kv("heart_rate_bpm", cfg.waveform.heart_rate_bpm.to_string());
    match &cfg.waveform.shape {
        PulseShape::Harmonics(h) if !h.is_empty() => {
            kv("harmonic_amplitudes", list(&mut h.iter().map(|h| h.amplitude)));
            kv("harmonic_phases_rad", list(&mut h.iter().map(|h| h.phase)));
        }
        PulseShape::Harmonics(_) => {}
        PulseShape::Sampled { points, .. } => {
            kv("# waveform samples", points.len().to_string());
        }
    }
    match &cfg.vessel {
        VesselSegment::Uniform(r) => kv("vessel_radius_mm", (r * 1e3).to_string()),
        VesselSegment::Profile(r) => kv("# vessel radius profile samples", r.len().to_string()),
    }
    kv("blood_density_kg_per_m3", cfg.blood_density.to_string());
    kv("sphere_radius_mm", (cfg.sphere.radius * 1e3).to_string());
    kv("magnetization_a_per_m", cfg.sphere.magnetization.to_string());
    kv("material_density_kg_per_m3", cfg.sphere.material_density.to_string());
    kv("drag_coefficient", cfg.sphere.drag_coefficient.to_string());
    let g = &cfg.controller.gains;
    kv("kp", g.kp.to_string());
    kv("ki", g.ki.to_string());
    kv("kd", g.kd.to_string());
    kv("kr", g.kr.to_string());
    kv("delta_s", g.delta.to_string());
    kv(
        "drag_mode",
        match cfg.controller.drag_mode {
            DragMode::PaperLinear => "paper-linear",
            DragMode::Quadratic => "quadratic",
        }
        .to_string(),
    );
    kv(
        "controller_mode",
        match cfg.controller.mode {
            ControllerMode::Paper => "paper",
            ControllerMode::Dimensional => "dimensional",
        }
        .to_string(),
    );
    kv("anti_windup", on_off(cfg.controller.anti_windup).to_string());
    kv("setpoint_window", cfg.controller.window.to_string());
    kv("v0_m_per_s", cfg.profile.v0.to_string());
    kv("k0_per_m", cfg.profile.k0.to_string());
    kv("r0", cfg.profile.r0.to_string());
    kv("r_gc_mm", (cfg.profile.r_gc * 1e3).to_string());
    kv("v_min_m_per_s", cfg.profile.v_min.to_string());
    kv("max_gradient_mt_per_m", (cfg.limits.max_amplitude * 1e3).to_string());
    kv("isocenter_m", cfg.slew.isocenter_distance.to_string());
    kv("rise_time_ms", (cfg.slew.rise_time * 1e3).to_string());
    kv("dbdt_limit_t_per_s", cfg.slew.limit.to_string());
    kv("capture_radius_mm", (cfg.capture_radius() * 1e3).to_string());
    let o = cfg.initial_offset * 1e3;
    kv("initial_offset_mm", format!("{}, {}, {}", o.x, o.y, o.z));
    kv("gravity", on_off(cfg.gravity).to_string());
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_dir() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("w.csv"), "t,x,y,z\n0,0,0,0\n1,0.05,0,0\n").unwrap();
        dir
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let dir = fixture_dir();
        let cfg = parse_config_str("waypoints: w.csv\nduration_s: 10\n", dir.path()).unwrap();
        assert_eq!(cfg.tp, 0.1);
        assert_eq!(cfg.dt, 0.001);
        assert_eq!(cfg.duration, 10.0);
        assert_eq!(cfg.controller.gains.kp, 2.0);
        assert_eq!(cfg.controller.gains.kr, 0.7);
        assert_eq!(cfg.sphere.radius, 3e-4);
        assert_eq!(cfg.sphere.magnetization, 1.9496e6);
        assert_eq!(cfg.blood_density, 1.025);
        assert_eq!(cfg.slew.rise_time, 0.1);
        assert_eq!(cfg.waypoints.len(), 2);
    }

    #[test]
    fn tp_in_milliseconds() {
        let dir = fixture_dir();
        let cfg = parse_config_str("waypoints: w.csv\nduration_s: 10\ntp_ms: 200\n", dir.path()).unwrap();
        assert!((cfg.tp - 0.2).abs() < 1e-15);
    }

    #[test]
    fn dt_larger_than_tp_is_rejected() {
        let dir = fixture_dir();
        let err = parse_config_str("waypoints: w.csv\nduration_s: 10\ndt_ms: 300\ntp_ms: 200\n", dir.path()).unwrap_err();
        assert!(matches!(err, Error::Config { .. }), "{err}");
    }

    #[test]
    fn unknown_and_duplicate_keys_report_lines() {
        let dir = fixture_dir();
        let err = parse_config_str("waypoints: w.csv\n# note\nduraton_s: 10\n", dir.path()).unwrap_err();
        match err {
            Error::Config { line, key, .. } => {
                assert_eq!(line, Some(3));
                assert_eq!(key.as_deref(), Some("duraton_s"));
            }
            other => panic!("{other}"),
        }
        let err = parse_config_str("waypoints: w.csv\nduration_s: 1\nkp: 1\nkp: 2\n", dir.path()).unwrap_err();
        assert!(matches!(err, Error::Config { line: Some(4), .. }));
        let err = parse_config_str("waypoints: w.csv\n", dir.path()).unwrap_err();
        assert!(err.to_string().contains("duration_s"));
        let err = parse_config_str("waypoints: w.csv\nduration_s: 1\nanti_windup: maybe\n", dir.path()).unwrap_err();
        assert!(matches!(err, Error::Config { line: Some(3), .. }));
        let err = parse_config_str("waypoints: w.csv\nduration_s: 1\nkp = 2\n", dir.path()).unwrap_err();
        assert!(matches!(err, Error::Config { line: Some(3), .. }));
    }

    #[test]
    fn echo_reparses_to_same_config() {
        let dir = fixture_dir();
        let text = "waypoints: w.csv\nduration_s: 7.5\ntp_ms: 200\ncompare_tp_ms: 100\nflow_regime: fast\n\
                    controller_mode: dimensional\ndrag_mode: quadratic\nanti_windup: off\n\
                    initial_offset_mm: 0, 0.5, -0.25\ngravity: on\nrise_time_ms: 0.5\n";
        let cfg = parse_config_str(text, dir.path()).unwrap();
        let again = parse_config_str(&echo(&cfg), dir.path()).unwrap();
        assert_eq!(cfg.tp, again.tp);
        assert_eq!(cfg.controller, again.controller);
        assert_eq!(cfg.waveform, again.waveform);
        assert_eq!(cfg.slew, again.slew);
        assert_eq!(cfg.initial_offset, again.initial_offset);
        assert_eq!(cfg.gravity, again.gravity);
        assert_eq!(cfg.compare_tp, again.compare_tp);
    }

    #[test]
    fn waveform_file_override() {
        let dir = fixture_dir();
        std::fs::write(
            dir.path().join("wave.csv"),
            "time_fraction,velocity_fraction\n0,1\n0.3,2\n0.6,0.5\n",
        )
        .unwrap();
        let cfg = parse_config_str(
            "waypoints: w.csv\nduration_s: 1\nflow_regime: normal\nwaveform_file: wave.csv\n",
            dir.path(),
        )
        .unwrap();
        assert!(matches!(cfg.waveform.shape, PulseShape::Sampled { .. }));
    }
}
