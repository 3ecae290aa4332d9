//! Declarative experiments: each reads a [`ScenarioConfig`], writes a CSV with
//! a header row and a JSON [`RunManifest`] into an output directory.
//!
//! Sweeps (`valley_sweep`, `freq_response`) run their grid points on a worker
//! pool. Points are independent and written back in grid order, so the CSV
//! does not depend on the worker count. With `resume`, points already
//! recorded in a matching manifest are not recomputed.

mod config;
mod manifest;
mod plot;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;

pub use config::{
    AuditSettings, DriverSpec, ExperimentKind, FixedPointSettings, GridSpec, LinearRange, LogRange, Refinement,
    ScenarioConfig, WaveformSpec,
};
pub use manifest::{PointEntry, PointStatus, RunManifest, MANIFEST_FILE};
pub use plot::{plot, PlotKind};

use crate::audit::{audit, AuditReport};
use crate::cavity::CavityConfig;
use crate::drivers::{length, LengthDriver};
use crate::error::{Error, Result};
use crate::farming::{run_perturbed_with, run_to_fixed_point, FixedPointReport, InitialFieldSpec};

/// Environment variable consulted for the worker count when `--workers` is
/// not given.
pub const WORKERS_ENV: &str = "CAVITYFARM_WORKERS";

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub resume: bool,
    pub workers: Option<usize>,
    pub keep_going: bool,
    /// Directory that relative paths in the config are resolved against.
    pub base_dir: PathBuf,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self { out_dir: out_dir.into(), resume: false, workers: None, keep_going: false, base_dir: PathBuf::from(".") }
    }
}

/// `flag`, else `CAVITYFARM_WORKERS`, else the number of available cores.
pub fn resolve_workers(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return if n > 0 { Ok(n) } else { Err(Error::Config("--workers must be at least 1".into())) };
    }
    match std::env::var(WORKERS_ENV) {
        Ok(text) => match text.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("{WORKERS_ENV} must be a positive integer, got {text:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub csv: PathBuf,
}

impl RunOutcome {
    pub fn failures(&self) -> usize {
        self.manifest.failures()
    }
}

/// Full-precision rendering used in every CSV.
pub fn format_value(x: f64) -> String {
    format!("{x:?}")
}

// ---------------------------------------------------------------------------
// Single-point computations

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValleyPoint {
    pub f: f64,
    pub log_negativity: f64,
    pub corr_q1p2: f64,
    pub cycles: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Steady state at `f = (T + Δt)/L0`.
pub fn valley_point(
    cavity: &CavityConfig,
    initial: &InitialFieldSpec,
    settings: FixedPointSettings,
    f: f64,
) -> Result<ValleyPoint> {
    let cfg = cavity.with_f(f)?;
    let report = run_to_fixed_point(initial, &cfg, settings.tolerance, settings.max_cycles)?;
    Ok(ValleyPoint {
        f,
        log_negativity: report.record.log_negativity,
        corr_q1p2: report.record.corr_q1p2,
        cycles: report.cycles_used,
        residual: report.residual,
        converged: report.converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponsePoint {
    pub gamma: f64,
    pub max_abs_corr_q1p2: f64,
    pub max_log_negativity: f64,
    pub cycles: usize,
}

/// Largest `|2⟨q1p2⟩|` and `E_N` over `n_cycles` cycles of a sinusoidal
/// wall motion, starting from a converged fixed point.
pub fn response_point(
    cavity: &CavityConfig,
    fixed_point: &FixedPointReport,
    driver: &dyn LengthDriver,
    gamma: f64,
    n_cycles: usize,
) -> Result<ResponsePoint> {
    let (mut corr, mut en) = (0.0_f64, 0.0_f64);
    run_perturbed_with(fixed_point, cavity, driver, n_cycles, |r| {
        corr = corr.max(r.corr_q1p2.abs());
        en = en.max(r.log_negativity);
        Ok(())
    })?;
    Ok(ResponsePoint { gamma, max_abs_corr_q1p2: corr, max_log_negativity: en, cycles: n_cycles })
}

fn converged_fixed_point(scenario: &ScenarioConfig, cavity: &CavityConfig) -> Result<FixedPointReport> {
    let fp = &scenario.fixed_point;
    let report = run_to_fixed_point(&scenario.initial_field, cavity, fp.tolerance, fp.max_cycles)?;
    if !report.converged {
        return Err(Error::NotConverged { cycles: report.cycles_used, residual: report.residual });
    }
    log::info!(
        "fixed point after {} cycles: E_N = {:e}, 2<q1p2> = {:e}",
        report.cycles_used,
        report.record.log_negativity,
        report.record.corr_q1p2
    );
    Ok(report)
}

// ---------------------------------------------------------------------------
// Manifest-driven execution

fn prepare(
    kind: ExperimentKind,
    scenario: &ScenarioConfig,
    parameter: &str,
    values: &[f64],
    opts: &RunOptions,
) -> Result<RunManifest> {
    scenario.check_kind(kind)?;
    std::fs::create_dir_all(&opts.out_dir)?;
    let hash = scenario.hash();
    if opts.resume {
        if let Some(mut old) = RunManifest::load(&opts.out_dir)? {
            if old.config_hash != hash || old.kind != kind.name() {
                return Err(Error::Config(format!(
                    "{} holds a manifest for a different run (kind {}, hash {}); refusing to resume",
                    opts.out_dir.display(),
                    old.kind,
                    old.config_hash
                )));
            }
            let same_grid = old.points.len() == values.len()
                && old.points.iter().zip(values).all(|(p, v)| p.value.to_bits() == v.to_bits());
            if !same_grid {
                return Err(Error::Config("grid differs from the manifest being resumed".into()));
            }
            for p in old.points.iter_mut().filter(|p| !p.status.has_result()) {
                p.status = PointStatus::Pending;
                p.error = None;
            }
            log::info!("resuming: {} of {} points already done", values.len() - old.count(PointStatus::Pending), values.len());
            return Ok(old);
        }
    }
    Ok(RunManifest::new(kind.name(), hash, parameter, values))
}

struct PointOutput {
    row: Vec<f64>,
    converged: bool,
}

fn run_points<F>(manifest: RunManifest, opts: &RunOptions, point: F) -> Result<RunManifest>
where
    F: Fn(f64) -> Result<PointOutput> + Sync,
{
    let clock = Instant::now();
    let pending: Vec<(usize, f64)> = manifest
        .points
        .iter()
        .filter(|p| p.status == PointStatus::Pending)
        .map(|p| (p.index, p.value))
        .collect();
    manifest.save(&opts.out_dir)?;
    let workers = resolve_workers(opts.workers)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let previous_wall = manifest.wall_clock_s;
    let shared = Mutex::new(manifest);
    let save_error: Mutex<Option<Error>> = Mutex::new(None);
    let abort = AtomicBool::new(false);
    let keep_going = opts.keep_going;

    pool.install(|| {
        pending.par_iter().for_each(|&(index, value)| {
            if abort.load(Ordering::SeqCst) {
                return;
            }
            let start = Instant::now();
            let outcome = point(value);
            let elapsed = start.elapsed().as_secs_f64();
            let mut m = shared.lock().expect("manifest lock");
            let entry = &mut m.points[index];
            entry.wall_clock_s = elapsed;
            match outcome {
                Ok(out) => {
                    entry.status = if out.converged { PointStatus::Done } else { PointStatus::NotConverged };
                    entry.row = Some(out.row);
                }
                Err(e) => {
                    log::error!("point {index} ({value}) failed: {e}");
                    entry.status = PointStatus::Failed;
                    entry.error = Some(e.to_string());
                    if !keep_going {
                        abort.store(true, Ordering::SeqCst);
                    }
                }
            }
            if let Err(e) = m.save(&opts.out_dir) {
                save_error.lock().expect("error lock").get_or_insert(e);
            }
        })
    });

    let mut manifest = shared.into_inner().expect("manifest lock");
    for p in manifest.points.iter_mut().filter(|p| p.status == PointStatus::Pending) {
        p.status = PointStatus::Skipped;
        p.error = Some("not attempted after an earlier failure".into());
    }
    manifest.wall_clock_s = previous_wall + clock.elapsed().as_secs_f64();
    if let Some(e) = save_error.into_inner().expect("error lock") {
        return Err(e);
    }
    Ok(manifest)
}

fn write_rows(path: &Path, header: &[&str], integer_columns: &[usize], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().enumerate().map(|(k, &x)| {
            if integer_columns.contains(&k) {
                format!("{}", x as i64)
            } else {
                format_value(x)
            }
        }))?;
    }
    w.flush()?;
    Ok(())
}

fn finish_sweep(
    mut manifest: RunManifest,
    opts: &RunOptions,
    file: &str,
    header: &[&str],
    integer_columns: &[usize],
) -> Result<RunOutcome> {
    let csv = opts.out_dir.join(file);
    let rows: Vec<Vec<f64>> = manifest.points.iter().filter_map(|p| p.row.clone()).collect();
    write_rows(&csv, header, integer_columns, &rows)?;
    manifest.files = vec![PathBuf::from(file)];
    manifest.save(&opts.out_dir)?;
    Ok(RunOutcome { manifest, csv })
}

pub const VALLEY_HEADER: [&str; 5] = ["f", "E_N_steady", "corr_q1p2_steady", "cycles_to_converge", "residual"];
pub const VIBRATION_HEADER: [&str; 4] = ["cycle", "t", "E_N", "corr_q1p2"];
pub const RESPONSE_HEADER: [&str; 5] = ["gamma", "max_abs_corr_q1p2", "gamma_over_omega1", "max_E_N", "cycles"];
pub const GW_HEADER: [&str; 6] = ["cycle", "t", "E_N", "corr_q1p2", "L", "delta_x"];

/// Steady-state `E_N` and `2⟨q1p2⟩` over a grid of `f`.
pub fn valley_sweep(scenario: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let grid = scenario.grid.clone().unwrap_or_else(GridSpec::default_valley);
    check_parameter(&grid, "f")?;
    let values = grid.points()?;
    let cavity = scenario.cavity.clone();
    cavity.validate()?;
    let manifest = prepare(ExperimentKind::ValleySweep, scenario, "f", &values, opts)?;
    let manifest = run_points(manifest, opts, |f| {
        let p = valley_point(&cavity, &scenario.initial_field, scenario.fixed_point, f)?;
        if !p.converged {
            log::warn!("f = {f}: not converged after {} cycles (residual {:e})", p.cycles, p.residual);
        }
        Ok(PointOutput {
            row: vec![f, p.log_negativity, p.corr_q1p2, p.cycles as f64, p.residual],
            converged: p.converged,
        })
    })?;
    finish_sweep(manifest, opts, "valley_sweep.csv", &VALLEY_HEADER, &[3])
}

fn check_parameter(grid: &GridSpec, expected: &str) -> Result<()> {
    match grid.parameter.as_deref() {
        Some(p) if p != expected => Err(Error::Config(format!("grid parameter must be `{expected}`, got `{p}`"))),
        _ => Ok(()),
    }
}

/// Maximum `|2⟨q1p2⟩|` over the configured number of wall periods, per `γ/ω1`.
pub fn freq_response(scenario: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let grid = scenario.grid.clone().unwrap_or_else(GridSpec::default_freq_response);
    check_parameter(&grid, "gamma_over_omega1")?;
    let values = grid.points()?;
    let amplitude = match scenario.driver {
        DriverSpec::Sinusoid { amplitude_over_l0, .. } => amplitude_over_l0,
        _ => return Err(Error::Config("freq-response needs a sinusoid driver for the amplitude".into())),
    };
    let cavity = scenario.resolved_cavity()?;
    let manifest = prepare(ExperimentKind::FreqResponse, scenario, "gamma_over_omega1", &values, opts)?;
    let fixed_point = if manifest.points.iter().any(|p| p.status == PointStatus::Pending) {
        Some(converged_fixed_point(scenario, &cavity)?)
    } else {
        None
    };
    let manifest = run_points(manifest, opts, |g| {
        let fp = fixed_point.as_ref().expect("fixed point computed for pending points");
        let sinusoid = DriverSpec::Sinusoid { amplitude_over_l0: amplitude, gamma_over_omega1: g };
        let omega = sinusoid.angular_frequency(&cavity);
        let n = scenario.perturbed_cycles(&cavity, omega)?;
        let driver = sinusoid.build(&cavity, &opts.base_dir, 0.0)?;
        let p = response_point(&cavity, fp, driver.as_ref(), omega.unwrap_or(0.0), n)?;
        Ok(PointOutput {
            row: vec![p.gamma, p.max_abs_corr_q1p2, g, p.max_log_negativity, n as f64],
            converged: true,
        })
    })?;
    finish_sweep(manifest, opts, "freq_response.csv", &RESPONSE_HEADER, &[4])
}

fn single_run<F>(kind: ExperimentKind, scenario: &ScenarioConfig, opts: &RunOptions, file: &str, body: F) -> Result<RunOutcome>
where
    F: FnOnce(&Path) -> Result<()>,
{
    let manifest = prepare(kind, scenario, "run", &[0.0], opts)?;
    let csv = opts.out_dir.join(file);
    if manifest.points[0].status.has_result() && csv.exists() {
        log::info!("{} already complete; nothing to do", kind.name());
        return Ok(RunOutcome { manifest, csv });
    }
    let mut manifest = RunManifest::new(kind.name(), scenario.hash(), "run", &[0.0]);
    manifest.save(&opts.out_dir)?;
    let clock = Instant::now();
    let tmp = opts.out_dir.join(format!("{file}.partial"));
    let result = body(&tmp).and_then(|_| std::fs::rename(&tmp, &csv).map_err(Error::from));
    let entry = &mut manifest.points[0];
    entry.wall_clock_s = clock.elapsed().as_secs_f64();
    manifest.wall_clock_s = entry.wall_clock_s;
    match result {
        Ok(()) => {
            entry.status = PointStatus::Done;
            entry.row = Some(Vec::new());
            manifest.files = vec![PathBuf::from(file)];
            manifest.save(&opts.out_dir)?;
            Ok(RunOutcome { manifest, csv })
        }
        Err(e) => {
            entry.status = PointStatus::Failed;
            entry.error = Some(e.to_string());
            manifest.save(&opts.out_dir)?;
            Err(e)
        }
    }
}

/// Per-cycle `E_N` and `2⟨q1p2⟩` while the wall follows the configured
/// driver, starting from the fixed point.
pub fn vibration_run(scenario: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let cavity = scenario.resolved_cavity()?;
    single_run(ExperimentKind::Vibration, scenario, opts, "vibration.csv", |path| {
        let omega = scenario.driver.angular_frequency(&cavity);
        let n = scenario.perturbed_cycles(&cavity, omega)?;
        let driver = scenario.driver.build(&cavity, &opts.base_dir, horizon(&cavity, n))?;
        let fp = converged_fixed_point(scenario, &cavity)?;
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(VIBRATION_HEADER)?;
        run_perturbed_with(&fp, &cavity, driver.as_ref(), n, |r| {
            w.write_record([
                r.cycle_index.to_string(),
                format_value(r.t_start),
                format_value(r.log_negativity),
                format_value(r.corr_q1p2),
            ])?;
            Ok(())
        })?;
        w.flush()?;
        Ok(())
    })
}

fn horizon(cavity: &CavityConfig, n_cycles: usize) -> f64 {
    let span = n_cycles as f64 * cavity.cycle_time();
    span * (1.0 + 1e-9) + 1e-9
}

/// Vibration run driven by a gravitational wave through the mirror spring.
pub fn gw_run(scenario: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutcome> {
    if !matches!(scenario.driver, DriverSpec::GwSpring { .. }) {
        return Err(Error::Config("gw needs a gw_spring driver".into()));
    }
    let cavity = scenario.resolved_cavity()?;
    single_run(ExperimentKind::Gw, scenario, opts, "gw.csv", |path| {
        let omega = scenario.driver.angular_frequency(&cavity);
        let n = scenario.perturbed_cycles(&cavity, omega)?;
        let driver = scenario.driver.build(&cavity, &opts.base_dir, horizon(&cavity, n))?;
        let fp = converged_fixed_point(scenario, &cavity)?;
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(GW_HEADER)?;
        let l0 = cavity.l0;
        run_perturbed_with(&fp, &cavity, driver.as_ref(), n, |r| {
            let len = length(driver.as_ref(), r.t_start)?.length;
            let h = driver.strain(r.t_start)?;
            w.write_record([
                r.cycle_index.to_string(),
                format_value(r.t_start),
                format_value(r.log_negativity),
                format_value(r.corr_q1p2),
                format_value(len),
                format_value(len - l0 * (1.0 + 0.5 * h)),
            ])?;
            Ok(())
        })?;
        w.flush()?;
        Ok(())
    })
}

/// Sizes of the moving-wall corrections over the configured run, written as
/// `metric,value` rows plus the full report as JSON.
pub fn audit_run(scenario: &ScenarioConfig, opts: &RunOptions) -> Result<(RunOutcome, AuditReport)> {
    let cavity = scenario.resolved_cavity()?;
    let mut report = None;
    let outcome = single_run(ExperimentKind::Audit, scenario, opts, "audit.csv", |path| {
        let n = scenario.perturbed_cycles(&cavity, scenario.driver.angular_frequency(&cavity))?;
        let span = n as f64 * cavity.cycle_time();
        let driver = scenario.driver.build(&cavity, &opts.base_dir, horizon(&cavity, n))?;
        let r = audit(&cavity, driver.as_ref(), (0.0, span), scenario.audit.small_case)?;
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["metric", "value"])?;
        let mut metrics = vec![
            ("ratio_1", r.ratio_1),
            ("ratio_2", r.ratio_2),
            ("max_rate", r.max_rate),
            ("samples", r.samples as f64),
        ];
        if let Some(d) = r.max_drift() {
            metrics.push(("max_drift", d));
        }
        for (name, value) in metrics {
            w.write_record([name.to_string(), format_value(value)])?;
        }
        w.flush()?;
        std::fs::write(opts.out_dir.join("audit.json"), serde_json::to_string_pretty(&r)?)?;
        report = Some(r);
        Ok(())
    })?;
    let report = match report {
        Some(r) => r,
        None => serde_json::from_str(&std::fs::read_to_string(opts.out_dir.join("audit.json"))?)?,
    };
    Ok((outcome, report))
}
