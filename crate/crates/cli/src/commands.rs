//! Command execution. Each command returns the bytes it produced so callers
//! decide where they go.

use std::fs;
use std::path::{Path, PathBuf};

use fluxgate_core::analysis::{
    cavity_photon_lifetime, extract_gate, sweep_point, total_gate_time, SweepAxis,
};
use fluxgate_core::oracle::oracle_gate_fixture;
use fluxgate_core::protocol::Mode;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{load_config, Settings};
use crate::report::{
    check_table, matrix_pairs, schedule_table, sweep_csv, to_json_pretty, Check, ReproduceReport,
    SimulateReport, SweepReport,
};
use crate::CliError;

/// Published values checked by `reproduce-paper`.
pub const PAPER_GATE_TIME_NS: f64 = 15.0;
pub const PAPER_PHOTON_LIFETIME_NS: f64 = 530.0;
pub const GATE_TIME_TOL: f64 = 1e-9;
pub const PHOTON_LIFETIME_TOL: f64 = 2e-3;
pub const GATE_TOL: f64 = 1e-10;
pub const GATE_TOL_LINDBLAD: f64 = 1e-6;
pub const CHECKPOINT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Simulate {
        mode: Option<Mode>,
    },
    Sweep {
        axis: SweepAxis,
        values: Vec<f64>,
        jobs: Option<usize>,
    },
    Validate,
    ReproducePaper {
        mode: Mode,
        perturb_g1: f64,
        decoherence_scale: Option<f64>,
    },
    /// Oracle fixture regeneration (developer only).
    Fixture {
        mode: Mode,
        steps: u64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Sweep { .. } => "sweep",
            Command::Validate => "validate",
            Command::ReproducePaper { .. } => "reproduce-paper",
            Command::Fixture { .. } => "fixture",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub config_path: Option<PathBuf>,
    pub command: Command,
    pub output_path: Option<PathBuf>,
    pub output_format: OutputFormat,
    /// Recorded in reports; the dynamics are deterministic.
    pub seed: u64,
    /// Lindblad step in ns, overriding the config.
    pub dt_override_ns: Option<f64>,
}

impl RunManifest {
    pub fn new(command: Command) -> Self {
        Self {
            config_path: None,
            command,
            output_path: None,
            output_format: OutputFormat::Json,
            seed: 0,
            dt_override_ns: None,
        }
    }

    pub fn check(&self) -> Result<(), CliError> {
        if self.output_format == OutputFormat::Csv && !matches!(self.command, Command::Sweep { .. })
        {
            return Err(CliError::Usage(format!(
                "csv output is only available for sweep, not {}",
                self.command.name()
            )));
        }
        let needs_config = matches!(
            self.command,
            Command::Simulate { .. } | Command::Sweep { .. } | Command::Validate
        );
        if needs_config && self.config_path.is_none() {
            return Err(CliError::Usage(format!(
                "{} requires --config",
                self.command.name()
            )));
        }
        if let Some(dt) = self.dt_override_ns {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(CliError::Usage(format!(
                    "--dt-ns must be a positive number, got {dt}"
                )));
            }
        }
        Ok(())
    }

    fn settings(&self) -> Result<Settings, CliError> {
        let mut settings = match &self.config_path {
            Some(path) => load_config(path)?.0,
            None => Settings::paper_regime(),
        };
        if let Some(dt) = self.dt_override_ns {
            settings.lindblad_dt_ns = Some(dt);
        }
        Ok(settings)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    ChecksFailed,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::ChecksFailed => 1,
        }
    }
}

/// What a command produced: the primary document and an optional
/// human-readable summary meant for the terminal.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub status: Status,
    pub document: String,
    pub summary: Option<String>,
}

impl Outcome {
    fn ok(document: String) -> Self {
        Self {
            status: Status::Success,
            document,
            summary: None,
        }
    }
}

pub fn execute(manifest: &RunManifest) -> Result<Outcome, CliError> {
    manifest.check()?;
    log::info!("running {}", manifest.command.name());
    match &manifest.command {
        Command::Simulate { mode } => simulate(manifest, *mode),
        Command::Sweep { axis, values, jobs } => sweep(manifest, *axis, values, *jobs),
        Command::Validate => validate(manifest),
        Command::ReproducePaper {
            mode,
            perturb_g1,
            decoherence_scale,
        } => reproduce_paper(manifest, *mode, *perturb_g1, *decoherence_scale),
        Command::Fixture { mode, steps } => fixture(manifest, *mode, *steps),
    }
}

/// Writes `document` to `path`, or returns it for stdout when `path` is None.
pub fn deliver(path: Option<&Path>, document: &str) -> Result<Option<String>, CliError> {
    match path {
        Some(p) => {
            fs::write(p, document).map_err(|source| CliError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            log::info!("wrote {}", p.display());
            Ok(None)
        }
        None => Ok(Some(document.to_owned())),
    }
}

fn simulate(manifest: &RunManifest, mode: Option<Mode>) -> Result<Outcome, CliError> {
    let mut settings = manifest.settings()?;
    if let Some(m) = mode {
        settings.mode = m;
    }
    let device = settings.device()?;
    let report = extract_gate(&device)?;
    log::info!("{} fidelity {:.12}", report.mode, report.fidelity());
    Ok(Outcome::ok(to_json_pretty(&SimulateReport::new(
        &report,
        &settings,
        manifest.seed,
    ))))
}

fn sweep(
    manifest: &RunManifest,
    axis: SweepAxis,
    values: &[f64],
    jobs: Option<usize>,
) -> Result<Outcome, CliError> {
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    let settings = manifest.settings()?;
    let template = settings.device()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    log::info!(
        "sweeping {} over {} points on {} workers",
        axis,
        values.len(),
        pool.current_num_threads()
    );
    let rows = pool.install(|| {
        values
            .par_iter()
            .map(|&v| sweep_point(&template, axis, v))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let document = match manifest.output_format {
        OutputFormat::Csv => sweep_csv(&rows),
        OutputFormat::Json => {
            to_json_pretty(&SweepReport::new(axis, &rows, &settings, manifest.seed))
        }
    };
    Ok(Outcome::ok(document))
}

fn validate(manifest: &RunManifest) -> Result<Outcome, CliError> {
    let path = manifest
        .config_path
        .as_deref()
        .expect("checked by RunManifest::check");
    let (settings, device) = load_config(path)?;
    Ok(Outcome::ok(format!(
        "{}: valid ({} mode, gate time {:.6} ns, sha256 {})\n",
        path.display(),
        settings.mode,
        device.total_time() * 1e9,
        settings.sha256()
    )))
}

/// Built-in parameters with the `reproduce-paper` adjustments applied.
pub fn reproduce_settings(mode: Mode, perturb_g1: f64, decoherence_scale: Option<f64>) -> Settings {
    let mut s = Settings::paper_regime();
    s.mode = mode;
    s.qubits[0].g_mhz *= 1.0 + perturb_g1;
    if let Some(scale) = decoherence_scale {
        s.decoherence_scale = scale;
    }
    s
}

fn reproduce_paper(
    manifest: &RunManifest,
    mode: Mode,
    perturb_g1: f64,
    decoherence_scale: Option<f64>,
) -> Result<Outcome, CliError> {
    let mut settings = reproduce_settings(mode, perturb_g1, decoherence_scale);
    if let Some(dt) = manifest.dt_override_ns {
        settings.lindblad_dt_ns = Some(dt);
    }
    let device = settings.device()?;
    let tau = total_gate_time(device.qubits[0].g, device.qubits[1].g, device.rabi)?;
    let lifetime = cavity_photon_lifetime(device.cavity.quality, device.cavity.frequency_hz)?;
    let report = extract_gate(&device)?;
    let gate_tol = if mode == Mode::Lindblad {
        GATE_TOL_LINDBLAD
    } else {
        GATE_TOL
    };

    let mut checks = vec![
        Check::relative(
            "gate_time_ns",
            "tau ~ 15 ns",
            tau * 1e9,
            PAPER_GATE_TIME_NS,
            GATE_TIME_TOL,
        ),
        Check::relative(
            "photon_lifetime_ns",
            "1/kappa = Q/(2 pi nu_c) ~ 530 ns",
            lifetime * 1e9,
            PAPER_PHOTON_LIFETIME_NS,
            PHOTON_LIFETIME_TOL,
        ),
        Check::at_most(
            "gate_matrix",
            "diag(1, 1, 1, -1)",
            report.max_deviation_from_target(),
            gate_tol,
        ),
        Check::at_most(
            "leakage",
            "no population outside",
            report.avg_leakage.abs(),
            gate_tol,
        ),
    ];
    for (k, dev) in report.checkpoint_deviations.iter().enumerate() {
        const NAMES: [&str; 3] = ["checkpoint_1", "checkpoint_2", "checkpoint_3"];
        const STATES: [&str; 3] = [
            "|1e,0> -> i|1e,1>",
            "|11,0> -> -i|11,1>",
            "|11,0> -> -|11,0>",
        ];
        checks.push(Check::at_most(NAMES[k], STATES[k], *dev, CHECKPOINT_TOL));
    }
    if mode == Mode::Lindblad
        && device.decoherence().qubits.iter().all(|q| q.is_zero())
        && device.decoherence().cavity_decay == 0.0
    {
        let closed = extract_gate(&device.clone().with_mode(Mode::Concurrent))?;
        checks.push(Check::at_most(
            "closed_limit",
            "lindblad == concurrent gate",
            report.gate_matrix.max_abs_diff(&closed.gate_matrix),
            GATE_TOL_LINDBLAD,
        ));
    }
    let all_pass = checks.iter().all(|c| c.pass);
    for c in checks.iter().filter(|c| !c.pass) {
        log::warn!("check {} failed: computed {:e}", c.name, c.computed);
    }

    let doc = ReproduceReport {
        command: "reproduce-paper",
        version: env!("CARGO_PKG_VERSION"),
        seed: manifest.seed,
        mode: mode.as_str(),
        all_pass,
        checks: checks.clone(),
        total_time_ns: report.total_time * 1e9,
        photon_lifetime_ns: lifetime * 1e9,
        gate_matrix: matrix_pairs(&report.gate_matrix),
        schedule: schedule_table(&report.segments),
        config: settings,
    };
    Ok(Outcome {
        status: if all_pass {
            Status::Success
        } else {
            Status::ChecksFailed
        },
        document: to_json_pretty(&doc),
        summary: Some(check_table(&checks)),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FixtureFile {
    pub kind: &'static str,
    pub config_sha256: String,
    pub mode: &'static str,
    pub steps_per_gate: u64,
    pub dt_s: f64,
    pub total_time_ns: f64,
    pub fidelity: f64,
    /// Fidelity with the step halved.
    pub fidelity_half_dt: f64,
    pub matrix: Vec<Vec<[f64; 2]>>,
    pub config: Settings,
}

fn fixture(manifest: &RunManifest, mode: Mode, steps: u64) -> Result<Outcome, CliError> {
    if steps == 0 {
        return Err(CliError::Usage("--steps must be positive".into()));
    }
    let mut settings = manifest.settings()?;
    settings.mode = mode;
    let device = settings.device()?;
    let dt = device.total_time() / steps as f64;
    let (fine, coarse) = rayon::join(
        || oracle_gate_fixture(&device, dt / 2.0),
        || oracle_gate_fixture(&device, dt),
    );
    let (fine, coarse) = (fine?, coarse?);
    let matrix = coarse
        .matrix
        .iter()
        .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
        .collect();
    let doc = FixtureFile {
        kind: "oracle_gate_fixture",
        config_sha256: settings.sha256(),
        mode: mode.as_str(),
        steps_per_gate: steps,
        dt_s: dt,
        total_time_ns: coarse.total_time * 1e9,
        fidelity: coarse.fidelity,
        fidelity_half_dt: fine.fidelity,
        matrix,
        config: settings,
    };
    Ok(Outcome::ok(to_json_pretty(&doc)))
}
