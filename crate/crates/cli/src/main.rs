use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use mrbot::safety::{check_trace, render_report, render_safety_csv, render_trace_report};
use mrbot::sim::ScenarioFailure;
use mrbot::telemetry::{format_significant, read_telemetry, write_telemetry};
use mrbot::{
    batch_run, echo_config, parse_config, render_plots, run_scenario, Error, PlotSpec, ScenarioConfig,
    SlewParams, TelemetryRecord, Variant, Vec3,
};

const EXIT_USAGE: u8 = 1;
const EXIT_SAFETY: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "mrbot", version, about = "Simulate gradient-steered sphere navigation along a vessel centerline")]
struct Cli {
    /// Accepted for scripts that ask for it; the simulator uses no randomness.
    #[arg(long, global = true)]
    seedless: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write telemetry, safety reports and plots.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Exit with status 2 if any safety check fails.
        #[arg(long)]
        strict: bool,
    },
    /// Re-check the dB/dt and fixture flags of a telemetry CSV.
    Safety {
        telemetry: PathBuf,
        #[arg(long)]
        strict: bool,
        #[arg(long, default_value_t = 100.0)]
        rise_time_ms: f64,
        #[arg(long, default_value_t = mrbot::safety::DEFAULT_ISOCENTER_DISTANCE)]
        isocenter_m: f64,
        /// dB/dt limit, T/s.
        #[arg(long, default_value_t = mrbot::safety::DEFAULT_DBDT_LIMIT)]
        limit: f64,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time repeated runs of a scenario.
    Bench {
        config: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
    /// Render telemetry CSVs as one SVG, one series per file.
    Plot {
        #[arg(required = true)]
        telemetry: Vec<PathBuf>,
        #[arg(long, default_value = "telemetry.svg")]
        out: PathBuf,
    },
}

enum Failure {
    Usage(anyhow::Error),
    Diverged(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.into())
    }
}

fn main() -> ExitCode {
    ExitCode::from(cli_main(std::env::args_os(), &mut io::stdout(), &mut io::stderr()))
}

/// Parse `args` (program name first), run the command and return the exit
/// status.
fn cli_main<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    let result = match cli.command {
        Command::Run { config, out, strict } => run(&config, &out, strict, stdout),
        Command::Safety {
            telemetry,
            strict,
            rise_time_ms,
            isocenter_m,
            limit,
            out,
        } => {
            let params = SlewParams {
                isocenter_distance: isocenter_m,
                rise_time: rise_time_ms * 1e-3,
                limit,
            };
            safety(&telemetry, &params, strict, out.as_deref(), stdout)
        }
        Command::Bench { config, n } => bench(&config, n, stdout),
        Command::Plot { telemetry, out } => plot(&telemetry, &out, stdout),
    };
    match result {
        Ok(EXIT_SAFETY) => {
            let _ = writeln!(stderr, "safety check failed");
            EXIT_SAFETY
        }
        Ok(code) => code,
        Err(Failure::Usage(e)) => {
            let _ = writeln!(stderr, "error: {}", describe(&e));
            EXIT_USAGE
        }
        Err(Failure::Diverged(e)) => {
            let _ = writeln!(stderr, "error: {}", describe(&e));
            EXIT_DIVERGED
        }
    }
}

/// The error chain joined with `: `, skipping causes already quoted by
/// the message above them.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn tp_label(tp: f64) -> String {
    format!("Tp = {} ms", format_significant(tp * 1e3, 6))
}

fn tp_tag(tp: f64) -> String {
    format!("tp{}", format_significant(tp * 1e3, 6))
}

fn scenario_failure(failure: ScenarioFailure, csv: &Path) -> Failure {
    let diverged = matches!(failure.error, Error::NumericalDivergence { .. });
    let error = anyhow::Error::new(failure.error);
    if !diverged {
        return Failure::Usage(error);
    }
    match write_telemetry(&failure.partial, csv) {
        Ok(()) => Failure::Diverged(error.context(format!(
            "simulation diverged; {} rows of partial telemetry written to {}",
            failure.partial.len(),
            csv.display()
        ))),
        Err(e) => Failure::Diverged(error.context(format!("simulation diverged; partial telemetry not written: {e}"))),
    }
}

fn run(config: &Path, out: &Path, strict: bool, stdout: &mut dyn Write) -> Result<u8, Failure> {
    let cfg = parse_config(config)?;
    let stem = config
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| anyhow!("cannot derive a name from {}", config.display()))?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut variants: Vec<ScenarioConfig> = vec![cfg.clone()];
    if let Some(tp) = cfg.compare_tp {
        variants.push(cfg.with_tp(tp));
    }

    let mut log = String::from("# resolved configuration\n");
    log.push_str(&echo_config(&cfg));
    let mut all_pass = true;
    let mut telemetry: Vec<(String, Vec<TelemetryRecord>)> = Vec::new();
    for v in &variants {
        let base = format!("{stem}_{}", tp_tag(v.tp));
        let csv = out.join(format!("{base}.csv"));
        let output = run_scenario(v).map_err(|f| scenario_failure(f, &csv))?;
        write_telemetry(&output.records, &csv)?;

        let allowed = v.vessel.min_radius() - v.sphere.radius;
        let report = render_report(&output.slew, &v.slew, &output.fixture_violations, output.max_fixture_distance);
        let safety_txt = out.join(format!("{base}_safety.txt"));
        fs::write(&safety_txt, &report).with_context(|| format!("writing {}", safety_txt.display()))?;
        let safety_csv = out.join(format!("{base}_safety.csv"));
        fs::write(
            &safety_csv,
            render_safety_csv(&output.slew, &output.fixture_violations, output.max_fixture_distance, allowed),
        )
        .with_context(|| format!("writing {}", safety_csv.display()))?;

        let pass = output.slew.pass && output.fixture_violations.is_empty();
        all_pass &= pass;
        let final_error = (output.final_state.position - output.path_end).norm();
        let summary = format!(
            "{}: {} rows, {:?} at t = {} s, distance to path end {} m, safety {}",
            tp_label(v.tp),
            output.records.len(),
            output.termination,
            format_significant(output.final_state.time, 6),
            format_significant(final_error, 4),
            if pass { "pass" } else { "fail" }
        );
        let _ = writeln!(stdout, "{summary}");
        let _ = writeln!(stdout, "  telemetry: {}", csv.display());
        let _ = writeln!(stdout, "  safety:    {}", safety_txt.display());
        log.push_str(&format!("# {summary}\n"));
        telemetry.push((tp_label(v.tp), output.records));
    }

    let plot_variants: Vec<Variant<'_>> = telemetry
        .iter()
        .map(|(label, records)| Variant { label, records })
        .collect();
    let spec = PlotSpec {
        title: stem.to_string(),
        ..PlotSpec::default()
    };
    let svg_path = out.join(format!("{stem}.svg"));
    let svg = render_plots(&plot_variants, &spec)?;
    fs::write(&svg_path, svg).with_context(|| format!("writing {}", svg_path.display()))?;
    let _ = writeln!(stdout, "  plot:      {}", svg_path.display());

    let log_path = out.join(format!("{stem}.log"));
    fs::write(&log_path, log).with_context(|| format!("writing {}", log_path.display()))?;

    if strict && !all_pass {
        return Ok(EXIT_SAFETY);
    }
    Ok(0)
}

fn safety(
    telemetry: &Path,
    params: &SlewParams,
    strict: bool,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<u8, Failure> {
    params.validate()?;
    let records = read_telemetry(telemetry)?;
    let times: Vec<f64> = records.iter().map(|r| r.time).collect();
    let gradients: Vec<Vec3> = records.iter().map(|r| r.gradient).collect();
    let slew = check_trace(&times, &gradients, params)?;
    let flagged: Vec<f64> = records.iter().filter(|r| !r.fixture_ok).map(|r| r.time).collect();
    let report = render_trace_report(&slew, params, &flagged);
    let _ = write!(stdout, "{report}");
    if let Some(path) = out {
        fs::write(path, &report).with_context(|| format!("writing {}", path.display()))?;
    }
    if strict && !(slew.pass && flagged.is_empty()) {
        return Ok(EXIT_SAFETY);
    }
    Ok(0)
}

fn bench(config: &Path, n: usize, stdout: &mut dyn Write) -> Result<u8, Failure> {
    let cfg = parse_config(config)?;
    match batch_run(&cfg, n) {
        Ok(stats) => {
            let _ = writeln!(stdout, "runs: {}", stats.per_run_ms.len());
            let _ = writeln!(stdout, "identical_outputs: {}", stats.identical_outputs);
            let _ = writeln!(stdout, 
                "min/mean/max ms: {:.3}/{:.3}/{:.3}",
                stats.min_ms, stats.mean_ms, stats.max_ms
            );
            Ok(0)
        }
        Err(b) => {
            let diverged = matches!(b.failure.error, Error::NumericalDivergence { .. });
            let e = anyhow!("run {} of {n}: {}", b.run + 1, b.failure.error);
            Err(if diverged { Failure::Diverged(e) } else { Failure::Usage(e) })
        }
    }
}

fn plot(files: &[PathBuf], out: &Path, stdout: &mut dyn Write) -> Result<u8, Failure> {
    let mut sets = Vec::with_capacity(files.len());
    for f in files {
        let label = f
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| f.display().to_string());
        sets.push((label, read_telemetry(f)?));
    }
    let variants: Vec<Variant<'_>> = sets
        .iter()
        .map(|(label, records)| Variant { label, records })
        .collect();
    let svg = render_plots(&variants, &PlotSpec::default())?;
    fs::write(out, svg).with_context(|| format!("writing {}", out.display()))?;
    let _ = writeln!(stdout, "plot: {}", out.display());
    Ok(0)
}

#[cfg(test)]
mod tests;
