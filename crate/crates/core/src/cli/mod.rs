//! Command dispatch for the `bode-limits` binary.

pub mod config;

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

pub use config::{parse_config, Format, RunConfig};

use crate::limits::{corollary3_report, Corollary3Report, Verdict, Weight};
use crate::lti::Injection;
use crate::spectral::{CrossSpectra, WelchOptions};
use crate::stochsim::{simulate, SignalBundle};
use crate::verify::{curve_csvs, prepare_loop, render_value, run_full_suite, worst, Defaults, SimPlan, SystemSpec};

pub const ENV_THREADS: &str = "BODE_LIMITS_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Analyze,
    Simulate,
    Verify,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Simulate => "simulate",
            Command::Verify => "verify",
            Command::Report => "report",
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
}

/// Size of the global worker pool, from `BODE_LIMITS_THREADS` when set.
pub fn init_threads() -> Result<usize, CliError> {
    if let Ok(v) = std::env::var(ENV_THREADS) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("{ENV_THREADS} must be a positive integer, got {v:?}")))?;
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(rayon::current_num_threads())
}

/// Loads, overrides and validates a config.
pub fn load_config(path: &Path, ov: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = parse_config(path)?;
    if let Some(seed) = ov.seed {
        cfg.sim.seed = seed;
    }
    if let Some(t) = ov.trials {
        cfg.sim.trials = t;
    }
    if let Some(out) = &ov.out {
        cfg.output.directory = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one command and returns the process exit code.
pub fn dispatch(cmd: Command, config_path: &Path, ov: &Overrides) -> Result<i32, CliError> {
    let started = Instant::now();
    let unix_time = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let cfg = load_config(config_path, ov)?;
    let dir = cfg.output.directory.clone();
    fs::create_dir_all(&dir)?;
    let code = match cmd {
        Command::Analyze => analyze(&cfg, &dir)?,
        Command::Simulate => simulate_cmd(&cfg, &dir)?,
        Command::Verify => verify(&cfg, &dir)?,
        Command::Report => report(&cfg, &dir)?,
    };
    let meta = serde_json::json!({
        "command": cmd.name(),
        "config": config_path.display().to_string(),
        "unix_time": unix_time,
        "elapsed_s": started.elapsed().as_secs_f64(),
        "threads": rayon::current_num_threads(),
        "version": env!("CARGO_PKG_VERSION"),
        "exit_code": code,
    });
    write_json(&dir.join("metadata.json"), &meta)?;
    Ok(code)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn exit_code(numeric: bool, verdicts: impl IntoIterator<Item = Verdict>) -> i32 {
    if numeric {
        3
    } else if worst(verdicts).is_violation() {
        1
    } else {
        0
    }
}

#[derive(Debug, Serialize)]
struct AnalysisEntry {
    system_id: String,
    verdict: Verdict,
    analytic: Option<Corollary3Report>,
    notes: Vec<String>,
    numeric_failure: bool,
}

fn analyze_one(sys: &SystemSpec, slack: f64, weights: &[Weight]) -> AnalysisEntry {
    match corollary3_report(&sys.plant, &sys.controller, slack) {
        Ok(mut rep) => {
            rep.records.retain(|r| weights.contains(&r.kind.weight()));
            let judged: Vec<Verdict> = rep
                .records
                .iter()
                .map(|r| r.verdict)
                .filter(|v| !matches!(v, Verdict::SkippedDivergent | Verdict::SkippedPrecondition))
                .collect();
            let verdict = if judged.is_empty() { Verdict::SkippedPrecondition } else { worst(judged) };
            AnalysisEntry {
                system_id: sys.id.clone(),
                verdict,
                analytic: Some(rep),
                notes: Vec::new(),
                numeric_failure: false,
            }
        }
        Err(e) => AnalysisEntry {
            system_id: sys.id.clone(),
            verdict: Verdict::SkippedPrecondition,
            analytic: None,
            notes: vec![format!("analysis skipped: {e}")],
            numeric_failure: e.is_numeric(),
        },
    }
}

fn analysis_text(entries: &[AnalysisEntry]) -> String {
    let mut s = String::new();
    for e in entries {
        let _ = writeln!(s, "system {}: {}", e.system_id, verdict_name(e.verdict));
        if let Some(a) = &e.analytic {
            let _ = writeln!(
                s,
                "  sens_bound {:.6}  comp_bound {:.6}  relative degree {}  type {}",
                a.bounds.sens_bound, a.bounds.comp_bound, a.loop_relative_degree, a.loop_type
            );
            for r in &a.records {
                let q = if r.quadrature.is_converged() {
                    format!("{:.6}", r.quadrature.value)
                } else {
                    format!("{:?}", r.quadrature.status)
                };
                let b = r.bound.finite().map_or_else(|| format!("{:?}", r.bound), |x| format!("{x:.6}"));
                let _ = writeln!(s, "  {:<14} {:>16} >= {:>16}  {}", r.kind.name(), q, b, verdict_name(r.verdict));
            }
        }
        for n in &e.notes {
            let _ = writeln!(s, "  note: {n}");
        }
    }
    s
}

fn verdict_name(v: Verdict) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn analyze(cfg: &RunConfig, dir: &Path) -> Result<i32, CliError> {
    let weights = cfg.weights();
    let slack = cfg.analysis.tolerances.slack_coeff;
    let entries: Vec<AnalysisEntry> = cfg.systems()?.iter().map(|s| analyze_one(s, slack, &weights)).collect();
    if cfg.output.wants(Format::Json) {
        write_json(&dir.join("analysis.json"), &entries)?;
    }
    if cfg.output.wants(Format::Text) {
        fs::write(dir.join("analysis.txt"), analysis_text(&entries))?;
    }
    let numeric = entries.iter().any(|e| e.numeric_failure);
    Ok(exit_code(numeric, entries.iter().map(|e| e.verdict)))
}

#[derive(Debug, Serialize)]
struct SimulationEntry {
    system_id: String,
    injection: Injection,
    trial: usize,
    seed: u64,
    dt: f64,
    duration: f64,
    samples: usize,
    burn_in_samples: usize,
    nperseg: usize,
    segments: usize,
    channels: Vec<String>,
    files: Vec<String>,
}

const INJECTIONS: [Injection; 3] = [Injection::ControlNoise, Injection::InverseMeasurement, Injection::MeasurementNoise];

fn injection_name(i: Injection) -> &'static str {
    match i {
        Injection::ControlNoise => "control_noise",
        Injection::InverseMeasurement => "inverse_measurement",
        Injection::MeasurementNoise => "measurement_noise",
    }
}

fn numeric_or_config(e: crate::verify::VerifyError) -> CliError {
    use crate::verify::VerifyError as V;
    match &e {
        V::Limits(l) if l.is_numeric() => CliError::Numeric(e.to_string()),
        V::Lti(crate::lti::LtiError::EigenFailure | crate::lti::LtiError::Singular) => CliError::Numeric(e.to_string()),
        _ => CliError::Config(e.to_string()),
    }
}

fn simulate_one(
    sys: &SystemSpec,
    injection: Injection,
    stream: u64,
    plan: &SimPlan,
    cfg: &RunConfig,
    dir: &Path,
) -> Result<Vec<SimulationEntry>, CliError> {
    let (real, omega_peak) =
        prepare_loop(&sys.plant, &sys.controller, injection, sys.noise.as_ref()).map_err(numeric_or_config)?;
    let mut out = Vec::new();
    for trial in 0..plan.trials {
        let p = plan.params_for(omega_peak, stream, trial).map_err(numeric_or_config)?;
        let bundle: SignalBundle = simulate(&real, &p).map_err(|e| CliError::Numeric(e.to_string()))?;
        let stem = format!("{}_{}_t{trial}", sys.id, injection_name(injection));
        let mut files = Vec::new();
        if cfg.output.wants(Format::Binary) {
            let name = format!("{stem}.blimsig");
            bundle.write_binary(BufWriter::new(File::create(dir.join(&name))?))?;
            files.push(name);
        } else if cfg.output.wants(Format::Csv) {
            let name = format!("{stem}_signals.csv");
            bundle.write_csv(BufWriter::new(File::create(dir.join(&name))?))?;
            files.push(name);
        }
        let cs = CrossSpectra::compute(
            &bundle,
            &real.outputs,
            WelchOptions {
                nperseg: plan.nperseg,
                overlap: 0.5,
            },
        )
        .map_err(|e| CliError::Numeric(e.to_string()))?;
        if cfg.output.wants(Format::Csv) {
            for &ch in &real.outputs {
                let est = cs.estimate(ch, ch).map_err(|e| CliError::Numeric(e.to_string()))?;
                let name = format!("{stem}_psd_{}.csv", ch.name());
                let mut w = BufWriter::new(File::create(dir.join(&name))?);
                est.write_csv(&mut w)?;
                w.flush()?;
                files.push(name);
            }
        }
        out.push(SimulationEntry {
            system_id: sys.id.clone(),
            injection,
            trial,
            seed: p.seed,
            dt: p.dt,
            duration: p.duration,
            samples: bundle.len(),
            burn_in_samples: bundle.burn_in_samples,
            nperseg: cs.nperseg,
            segments: cs.segments(),
            channels: real.outputs.iter().map(|c| c.name().to_string()).collect(),
            files,
        });
    }
    Ok(out)
}

fn simulate_cmd(cfg: &RunConfig, dir: &Path) -> Result<i32, CliError> {
    let plan = cfg.plan();
    let mut entries = Vec::new();
    for (i, sys) in cfg.systems()?.iter().enumerate() {
        for (k, &inj) in INJECTIONS.iter().enumerate() {
            let stream = i as u64 * 16 + k as u64;
            entries.extend(simulate_one(sys, inj, stream, &plan, cfg, dir)?);
        }
    }
    let doc = serde_json::json!({
        "runs": entries,
        "defaults": Defaults::from_options(&cfg.analysis.tolerances, &plan),
    });
    write_json(&dir.join("simulation.json"), &doc)?;
    Ok(0)
}

fn emit_report(value: &Value, cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    if cfg.output.wants(Format::Text) {
        fs::write(dir.join("report.txt"), render_value(value))?;
    }
    if cfg.output.wants(Format::Csv) {
        for (name, body) in curve_csvs(value) {
            fs::write(dir.join(name), body)?;
        }
    }
    Ok(())
}

fn verify(cfg: &RunConfig, dir: &Path) -> Result<i32, CliError> {
    let weights = cfg.weights();
    let mut reports = run_full_suite(&cfg.systems()?, &cfg.plan(), &cfg.analysis.tolerances);
    for r in &mut reports {
        r.retain_weights(&weights);
    }
    let value = serde_json::to_value(&reports).map_err(|e| CliError::Config(e.to_string()))?;
    write_json(&dir.join("report.json"), &value)?;
    emit_report(&value, cfg, dir)?;
    let numeric = reports.iter().any(|r| r.numeric_failure);
    Ok(exit_code(numeric, reports.iter().map(|r| r.verdict)))
}

fn report(cfg: &RunConfig, dir: &Path) -> Result<i32, CliError> {
    let path = dir.join("report.json");
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    emit_report(&value, cfg, dir)?;
    let reports = value.as_array().map_or(&[][..], Vec::as_slice);
    let numeric = reports.iter().any(|r| r["numeric_failure"].as_bool() == Some(true));
    let verdicts: Vec<Verdict> = reports
        .iter()
        .filter_map(|r| serde_json::from_value(r["verdict"].clone()).ok())
        .collect();
    Ok(exit_code(numeric, verdicts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_code_precedence() {
        assert_eq!(exit_code(true, [Verdict::Violated]), 3);
        assert_eq!(exit_code(false, [Verdict::Holds, Verdict::Violated]), 1);
        assert_eq!(exit_code(false, [Verdict::HoldsWithEquality, Verdict::SkippedDivergent]), 0);
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
    }

    #[test]
    fn analyze_example_plant() {
        let cfg = RunConfig::from_json(
            r#"{"plant": {"zeros": [2.0], "poles": [1.0, -3.0], "gain": 1.0},
                "controller": {"num_coeffs": [-1.75], "den_coeffs": [1.0]},
                "sim": {"seed": 1}}"#,
        )
        .unwrap();
        let sys = cfg.systems().unwrap();
        let e = analyze_one(&sys[0], 0.02, &cfg.weights());
        let a = e.analytic.as_ref().unwrap();
        assert_eq!((a.bounds.sens_bound, a.bounds.comp_bound), (1.0, 0.5));
        assert!(!e.numeric_failure);
    }
}
