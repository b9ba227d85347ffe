//! Per-step telemetry records and their CSV representation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::controller::PidTerms;
use crate::error::{Error, Result};
use crate::Vec3;

/// Frozen CSV header. Changing it breaks downstream tooling.
pub const TELEMETRY_HEADER: &str = "time_s,pcx,pcy,pcz,vcx,vcy,vcz,psx,psy,psz,vsx,vsy,vsz,evx,evy,evz,gx_raw,gy_raw,gz_raw,gx,gy,gz,k,vblood,dbdt_x,dbdt_y,dbdt_z,fixture_ok";

pub const SIGNIFICANT_DIGITS: usize = 9;

/// Simulation snapshot at the start of one physics step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TelemetryRecord {
    pub time: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub setpoint_position: Vec3,
    pub setpoint_velocity: Vec3,
    pub error: Vec3,
    /// Not serialized; zero when read back from CSV.
    pub terms: PidTerms,
    /// Not serialized; zero when read back from CSV.
    pub feedforward: Vec3,
    pub raw_gradient: Vec3,
    pub gradient: Vec3,
    pub curvature: f64,
    pub blood_speed: f64,
    pub dbdt: Vec3,
    pub fixture_ok: bool,
}

impl TelemetryRecord {
    /// Value of a named CSV column.
    pub fn column(&self, name: &str) -> Option<f64> {
        let v = |x: &Vec3, i: usize| Some(x[i]);
        match name {
            "time_s" => Some(self.time),
            "pcx" => v(&self.position, 0),
            "pcy" => v(&self.position, 1),
            "pcz" => v(&self.position, 2),
            "vcx" => v(&self.velocity, 0),
            "vcy" => v(&self.velocity, 1),
            "vcz" => v(&self.velocity, 2),
            "psx" => v(&self.setpoint_position, 0),
            "psy" => v(&self.setpoint_position, 1),
            "psz" => v(&self.setpoint_position, 2),
            "vsx" => v(&self.setpoint_velocity, 0),
            "vsy" => v(&self.setpoint_velocity, 1),
            "vsz" => v(&self.setpoint_velocity, 2),
            "evx" => v(&self.error, 0),
            "evy" => v(&self.error, 1),
            "evz" => v(&self.error, 2),
            "gx_raw" => v(&self.raw_gradient, 0),
            "gy_raw" => v(&self.raw_gradient, 1),
            "gz_raw" => v(&self.raw_gradient, 2),
            "gx" => v(&self.gradient, 0),
            "gy" => v(&self.gradient, 1),
            "gz" => v(&self.gradient, 2),
            "k" => Some(self.curvature),
            "vblood" => Some(self.blood_speed),
            "dbdt_x" => v(&self.dbdt, 0),
            "dbdt_y" => v(&self.dbdt, 1),
            "dbdt_z" => v(&self.dbdt, 2),
            "fixture_ok" => Some(if self.fixture_ok { 1.0 } else { 0.0 }),
            _ => None,
        }
    }

    fn csv_fields(&self) -> [f64; 27] {
        let mut out = [0.0; 27];
        out[0] = self.time;
        let vecs = [
            &self.position,
            &self.velocity,
            &self.setpoint_position,
            &self.setpoint_velocity,
            &self.error,
            &self.raw_gradient,
            &self.gradient,
        ];
        for (j, v) in vecs.iter().enumerate() {
            out[1 + 3 * j..4 + 3 * j].copy_from_slice(v.as_slice());
        }
        out[22] = self.curvature;
        out[23] = self.blood_speed;
        out[24..27].copy_from_slice(self.dbdt.as_slice());
        out
    }

    fn from_fields(f: &[f64; 27], fixture_ok: bool) -> Self {
        let v = |i: usize| Vec3::new(f[i], f[i + 1], f[i + 2]);
        Self {
            time: f[0],
            position: v(1),
            velocity: v(4),
            setpoint_position: v(7),
            setpoint_velocity: v(10),
            error: v(13),
            terms: PidTerms::default(),
            feedforward: Vec3::zeros(),
            raw_gradient: v(16),
            gradient: v(19),
            curvature: f[22],
            blood_speed: f[23],
            dbdt: v(24),
            fixture_ok,
        }
    }
}

/// Format `value` with `digits` significant digits, `%g` style.
pub fn format_significant(value: f64, digits: usize) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return value.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, value);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        format!("{mantissa}e{exp}")
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{value:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_telemetry_to<W: Write>(records: &[TelemetryRecord], out: &mut W) -> std::io::Result<()> {
    out.write_all(TELEMETRY_HEADER.as_bytes())?;
    out.write_all(b"\n")?;
    let mut line = String::with_capacity(512);
    for r in records {
        line.clear();
        for v in r.csv_fields() {
            line.push_str(&format_significant(v, SIGNIFICANT_DIGITS));
            line.push(',');
        }
        line.push(if r.fixture_ok { '1' } else { '0' });
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn write_telemetry(records: &[TelemetryRecord], path: &Path) -> Result<()> {
    let to_err = |e: std::io::Error| Error::Write(format!("{}: {e}", path.display()));
    let file = File::create(path).map_err(to_err)?;
    let mut w = BufWriter::new(file);
    write_telemetry_to(records, &mut w).map_err(to_err)?;
    w.flush().map_err(to_err)
}

pub fn read_telemetry(path: &Path) -> Result<Vec<TelemetryRecord>> {
    let to_err = |message: String| Error::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| to_err(e.to_string()))?;
    let header = reader
        .headers()
        .map_err(|e| to_err(e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != TELEMETRY_HEADER {
        return Err(to_err(format!("unexpected telemetry header {header:?}")));
    }
    let mut records = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| to_err(e.to_string()))?;
        let mut fields = [0.0; 27];
        for (i, slot) in fields.iter_mut().enumerate() {
            *slot = rec[i]
                .parse()
                .map_err(|_| to_err(format!("row {}: bad number {:?}", row + 2, &rec[i])))?;
        }
        let fixture_ok = match &rec[27] {
            "1" => true,
            "0" => false,
            other => return Err(to_err(format!("row {}: bad fixture flag {other:?}", row + 2))),
        };
        records.push(TelemetryRecord::from_fields(&fields, fixture_ok));
    }
    Ok(records)
}
