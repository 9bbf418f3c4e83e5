//! Subcommands of the `vortwave` binary.

pub mod config;

use clap::{Parser, Subcommand};
use config::{ConfigError, RunConfig};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;
use vortwave::continuation::{
    self, init_branch, read_log, resume_branch, run_branch, BranchRun, BranchSetup, ContinuationError, LogLine,
};
use vortwave::diagnostics::{diagnose, reconstruct};
use vortwave::dispersion::{dispersion_eigenvalue, DispersionError};
use vortwave::fsutil::write_atomic;
use vortwave::heightfield::{read_field, FieldIoError};
use vortwave::streamflow::{conjugate_streams, stream_solution, StreamError};
use vortwave::vorticity::{VorticityError, VorticityModel};
use vortwave::Regime;

#[derive(Debug, Parser)]
#[command(name = "vortwave", version, about = "Steady periodic water waves with vorticity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (`key = value` lines)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Branch directory to resume from
    #[arg(long, global = true)]
    pub resume: Option<PathBuf>,
    /// Output directory, overriding `out_dir`
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps over several r
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Laminar streams and critical constants for each r
    Regime,
    /// Dispersion root and onset wave, written as a branch checkpoint
    Bifurcate,
    /// Branch continuation with checkpoints, ending in a classified outcome
    Continue,
    /// Certify a stored height field
    Verify {
        /// Field CSV (q,p,h)
        field: PathBuf,
        /// JSON sidecar; defaults to the CSV path with a .json extension
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Plot-ready tables from a branch log
    Export {
        /// Branch log (JSON lines)
        log: PathBuf,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    FieldIo(#[from] FieldIoError),
    #[error(transparent)]
    Vorticity(#[from] VorticityError),
    #[error("regime rejected: {0}")]
    Regime(StreamError),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("log mixes Bernoulli constants {0} and {1}; branch logs are per r")]
    MixedR(f64, f64),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Regime(_) => 2,
            CliError::Solver(_) => 4,
            _ => 3,
        }
    }
}

impl From<StreamError> for CliError {
    fn from(e: StreamError) -> Self {
        match e {
            StreamError::BelowStagnation { .. } | StreamError::Subcritical { .. } | StreamError::Rejected { .. } => {
                CliError::Regime(e)
            }
            other => CliError::Solver(other.to_string()),
        }
    }
}

impl From<DispersionError> for CliError {
    fn from(e: DispersionError) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<ContinuationError> for CliError {
    fn from(e: ContinuationError) -> Self {
        match e {
            ContinuationError::InvalidAmplitude { .. } => CliError::Usage(e.to_string()),
            ContinuationError::Stream(s) => s.into(),
            ContinuationError::FieldIo(f) => CliError::FieldIo(f),
            ContinuationError::Checkpoint { .. } => CliError::Usage(e.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    write_atomic(path, text.as_bytes()).map_err(io_err(path))
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("report types serialize")
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(RunConfig::parse(&text, base)?)
}

struct Context {
    config: RunConfig,
    model: Arc<VorticityModel<f64>>,
    out: PathBuf,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self, CliError> {
        let config = load_config(cli)?;
        let model = Arc::new(VorticityModel::new(config.vorticity()?)?);
        let out = cli.out.clone().unwrap_or_else(|| config.out_dir());
        Ok(Context { config, model, out })
    }

    /// Output directory for one r; a sweep gets one subdirectory per r.
    fn dir_for(&self, r: f64, sweep: bool) -> PathBuf {
        if sweep {
            self.out.join(format!("r_{r}"))
        } else {
            self.out.clone()
        }
    }

    fn setup(&self, r: f64) -> Result<BranchSetup, CliError> {
        let regime = conjugate_streams(&*self.model, r)?;
        let stream = stream_solution(self.model.clone(), regime.s_minus)?;
        let seed = dispersion_eigenvalue(&stream)?;
        let (nq, np) = self.config.grid()?;
        Ok(BranchSetup {
            model: self.model.clone(),
            regime,
            seed,
            nq,
            np,
            policy: self.config.policy()?,
        })
    }
}

/// Runs `job` over every r, on up to `jobs` threads, returning results in input order.
fn sweep<T: Send>(
    rs: &[f64],
    jobs: usize,
    job: impl Fn(f64) -> Result<T, CliError> + Sync,
) -> Vec<Result<T, CliError>> {
    let jobs = jobs.clamp(1, rs.len().max(1));
    if jobs == 1 {
        return rs.iter().map(|&r| job(r)).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<T, CliError>>> = (0..rs.len()).map(|_| None).collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if k >= rs.len() {
                    break;
                }
                let out = job(rs[k]);
                results.lock().expect("no panics while holding the lock")[k] = Some(out);
            });
        }
    });
    slots.into_iter().map(|r| r.expect("every slot filled")).collect()
}

fn first_error<T>(results: Vec<Result<T, CliError>>) -> Result<Vec<T>, CliError> {
    results.into_iter().collect()
}

pub fn cmd_regime(cli: &Cli) -> Result<Vec<Regime>, CliError> {
    let ctx = Context::new(cli)?;
    let rs = ctx.config.r_values()?;
    let many = rs.len() > 1;
    let regimes = first_error(sweep(&rs, cli.jobs, |r| {
        let regime = conjugate_streams(&*ctx.model, r)?;
        write_text(&ctx.dir_for(r, many).join("regime.json"), &pretty(&regime))?;
        Ok(regime)
    }))?;
    for reg in &regimes {
        println!("{}", pretty(reg));
    }
    Ok(regimes)
}

pub fn cmd_bifurcate(cli: &Cli) -> Result<(), CliError> {
    let ctx = Context::new(cli)?;
    let rs = ctx.config.r_values()?;
    let a0 = ctx.config.a0()?;
    let many = rs.len() > 1;
    let reports = first_error(sweep(&rs, cli.jobs, |r| {
        let setup = ctx.setup(r)?;
        let dir = ctx.dir_for(r, many);
        let onset = init_branch(&setup, a0, &dir)?;
        write_text(&dir.join("regime.json"), &pretty(&setup.regime))?;
        Ok(json!({
            "r": r,
            "lambda0": setup.seed.lambda0,
            "lambda": onset.field.lambda,
            "Lambda": onset.wavelength,
            "amplitude": onset.field.amplitude(),
            "iterations": onset.iterations,
            "residual_norm": onset.residual_norm,
            "diagnostics_pass": onset.diagnostics.mandatory_pass,
            "checkpoint": dir.display().to_string(),
        }))
    }))?;
    for rep in &reports {
        println!("{}", pretty(rep));
    }
    Ok(())
}

/// Copies a branch checkpoint, leaving out any earlier outcome.
fn copy_checkpoint(from: &Path, to: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(to).map_err(io_err(to))?;
    for entry in std::fs::read_dir(from).map_err(io_err(from))? {
        let entry = entry.map_err(io_err(from))?;
        if entry.file_name() == continuation::OUTCOME_FILE || !entry.path().is_file() {
            continue;
        }
        let dst = to.join(entry.file_name());
        std::fs::copy(entry.path(), &dst).map_err(io_err(&dst))?;
    }
    Ok(())
}

pub fn cmd_continue(cli: &Cli) -> Result<Vec<BranchRun>, CliError> {
    let ctx = Context::new(cli)?;
    let rs = ctx.config.r_values()?;
    let many = rs.len() > 1;
    if cli.resume.is_some() && many {
        return Err(CliError::Usage("--resume takes a single branch; give one r".into()));
    }
    let seed_ck = ctx.config.seed_checkpoint();
    let a0 = if cli.resume.is_none() && seed_ck.is_none() {
        Some(ctx.config.a0()?)
    } else {
        None
    };
    let runs = first_error(sweep(&rs, cli.jobs, |r| {
        let setup = ctx.setup(r)?;
        let run = if let Some(dir) = &cli.resume {
            resume_branch(setup, dir)?
        } else {
            let dir = ctx.dir_for(r, many);
            match (&seed_ck, a0) {
                (Some(seed), _) => {
                    let seed = if many { seed.join(format!("r_{r}")) } else { seed.clone() };
                    if seed != dir {
                        copy_checkpoint(&seed, &dir)?;
                    }
                    resume_branch(setup, &dir)?
                }
                (None, Some(a0)) => run_branch(setup, a0, &dir)?,
                (None, None) => unreachable!("a0 is read whenever no checkpoint is given"),
            }
        };
        Ok(run)
    }))?;
    for run in &runs {
        println!("{}", pretty(&run.outcome));
    }
    Ok(runs)
}

pub fn cmd_verify(cli: &Cli, field: &Path, sidecar: Option<&Path>) -> Result<(), CliError> {
    let config = load_config(cli)?;
    let model = VorticityModel::new(config.vorticity()?)?;
    let json_path = sidecar.map(Path::to_path_buf).unwrap_or_else(|| field.with_extension("json"));
    let loaded = read_field(field, &json_path)?;
    let regime = conjugate_streams(&model, loaded.field.r)?;
    let wave = reconstruct(&loaded.field, &model).map_err(|e| CliError::Verification(e.to_string()))?;
    let diag = diagnose(&wave, &regime, &model);
    let report = pretty(&json!({
        "diagnostics": diag,
        "evenness_defect": loaded.evenness_defect,
        "sidecar_residual_norm": loaded.sidecar.residual_norm,
    }));
    println!("{report}");
    if let Some(out) = &cli.out {
        write_text(&out.join("diagnostics.json"), &report)?;
        let mut text = String::from("x,y,psi_x,psi_y\n");
        for row in wave.velocity_rows() {
            text.push_str(&format!("{:.16e},{:.16e},{:.16e},{:.16e}\n", row[0], row[1], row[2], row[3]));
        }
        write_text(&out.join("velocity.csv"), &text)?;
        let mut text = String::from("x,eta\n");
        for row in wave.surface_rows() {
            text.push_str(&format!("{:.16e},{:.16e}\n", row[0], row[1]));
        }
        write_text(&out.join("surface.csv"), &text)?;
    }
    if diag.mandatory_pass {
        Ok(())
    } else {
        let failed = diag.failures();
        Err(CliError::Verification(failed.join(", ")))
    }
}

fn table(header: &str, rows: impl Iterator<Item = (f64, f64)>) -> String {
    let mut text = format!("{header}\n");
    for (a, b) in rows {
        text.push_str(&format!("{a:.16e},{b:.16e}\n"));
    }
    text
}

pub fn cmd_export(cli: &Cli, log: &Path) -> Result<(), CliError> {
    let lines: Vec<LogLine> = read_log(log).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(first) = lines.first() {
        if let Some(other) = lines.iter().find(|l| l.r != first.r) {
            return Err(CliError::MixedR(first.r, other.r));
        }
    }
    let out = match (&cli.out, &cli.config) {
        (Some(out), _) => out.clone(),
        (None, Some(_)) => load_config(cli)?.out_dir(),
        (None, None) => log.parent().unwrap_or(Path::new(".")).to_path_buf(),
    };
    write_text(
        &out.join("lambda_vs_t.csv"),
        &table("t,Lambda", lines.iter().map(|l| (l.t, l.wavelength))),
    )?;
    write_text(
        &out.join("gap_vs_t.csv"),
        &table("t,stagnation_gap", lines.iter().map(|l| (l.t, l.stagnation_gap))),
    )?;
    write_text(
        &out.join("flow_force.csv"),
        &table("r,flow_force", lines.iter().map(|l| (l.r, l.flow_force))),
    )?;
    println!("{} rows written to {}", lines.len(), out.display());
    Ok(())
}

/// Dispatches a parsed command line; the return value is the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Regime => cmd_regime(cli).map(|_| ()),
        Command::Bifurcate => cmd_bifurcate(cli),
        Command::Continue => cmd_continue(cli).map(|_| ()),
        Command::Verify { field, sidecar } => cmd_verify(cli, field, sidecar.as_deref()),
        Command::Export { log } => cmd_export(cli, log),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
