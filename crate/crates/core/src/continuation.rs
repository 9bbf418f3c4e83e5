//! Pseudo-arclength continuation of the Stokes-wave branch at fixed r, with
//! endpoint classification and deterministic checkpoint/resume.

use crate::diagnostics::{diagnose, reconstruct, WaveDiagnostics};
use crate::dispersion::BifurcationSeed;
use crate::fsutil::write_atomic;
use crate::grid::{Grid, GridError, PSpacing};
use crate::heightfield::{
    newton_solve_system, read_field, write_field, Constraint, FieldIoError, HeightField, HeightFieldError,
    HeightSystem, NewtonOptions,
};
use crate::streamflow::{stream_solution, FlowRegime, StreamError};
use crate::vorticity::{OmegaClass, VorticityModel};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

/// Largest onset amplitude as a fraction of r − d_+.
pub const MAX_ONSET_FRACTION: f64 = 0.05;
pub const ONSET_HALVINGS: usize = 8;
/// Surface nodes count this much more than interior nodes in the arclength metric.
pub const SURFACE_WEIGHT: f64 = 4.0;
/// Accepted points needed before classifying.
pub const MIN_CLASSIFY_POINTS: usize = 10;
/// Final gap below this fraction of r (and shrinking) counts as approaching stagnation.
pub const GAP_CLOSING_FRACTION: f64 = 0.05;
/// Growth factor of Λ over the branch that counts as unbounded.
pub const WAVELENGTH_GROWTH: f64 = 3.0;
const MIN_STEP_FAILURES: usize = 3;
const ARCLENGTH_FAILURES: usize = 2;

#[derive(Debug, Error)]
pub enum ContinuationError {
    #[error("onset amplitude {a0} outside (0, {max}]")]
    InvalidAmplitude { a0: f64, max: f64 },
    #[error("onset solve failed after {attempts} amplitude halvings: {source}")]
    Onset {
        attempts: usize,
        #[source]
        source: HeightFieldError,
    },
    #[error(transparent)]
    Field(#[from] HeightFieldError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    FieldIo(#[from] FieldIoError),
    #[error("checkpoint {path}: {msg}")]
    Checkpoint { path: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    /// Halt once r − max η falls below this fraction of r.
    pub gap_min: f64,
    pub lambda_min: f64,
    pub slope_max: f64,
    pub ds_init: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_points: usize,
    /// Corrector iteration cap per attempt.
    pub corrector_iterations: usize,
    /// Switch to surface-clustered levels once r − max η drops below this fraction of r.
    pub cluster_gap: f64,
}

impl Default for Policy {
    fn default() -> Self {
        Policy {
            gap_min: 1e-3,
            lambda_min: 1e-2,
            slope_max: 5.0,
            ds_init: 2e-3,
            ds_min: 1e-7,
            ds_max: 2e-2,
            max_points: 400,
            corrector_iterations: 12,
            cluster_gap: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HaltReason {
    GapReached,
    LambdaFloor,
    SlopeLimit,
    StepUnderflow,
    MaxPoints,
}

#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub index: usize,
    pub t: f64,
    pub field: HeightField,
    pub wavelength: f64,
    pub max_eta: f64,
    pub min_eta: f64,
    pub stagnation_gap: f64,
    pub max_slope: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub diagnostics: WaveDiagnostics,
}

impl BranchPoint {
    fn build(
        index: usize,
        t: f64,
        field: HeightField,
        residual_norm: f64,
        iterations: usize,
        model: &VorticityModel<f64>,
        regime: &FlowRegime<f64>,
    ) -> Option<Self> {
        let wave = reconstruct(&field, model).ok()?;
        let diagnostics = diagnose(&wave, regime, model);
        Some(BranchPoint {
            index,
            t,
            wavelength: field.wavelength(),
            max_eta: wave.max_eta(),
            min_eta: wave.min_eta(),
            stagnation_gap: wave.stagnation_gap(),
            max_slope: wave.max_slope(),
            residual_norm,
            iterations,
            diagnostics,
            field,
        })
    }

    /// Acceptance gate: mandatory diagnostics, positive gap and positive amplitude.
    pub fn admissible(&self) -> bool {
        self.diagnostics.mandatory_pass && self.stagnation_gap > 0.0 && self.field.amplitude() > 0.0
    }

    pub fn log_line(&self) -> LogLine {
        LogLine {
            index: self.index,
            t: self.t,
            r: self.field.r,
            lambda: self.field.lambda,
            wavelength: self.wavelength,
            amplitude: self.field.amplitude(),
            max_eta: self.max_eta,
            min_eta: self.min_eta,
            stagnation_gap: self.stagnation_gap,
            max_slope: self.max_slope,
            residual_norm: self.residual_norm,
            iterations: self.iterations,
            bernoulli_residual: self.diagnostics.bernoulli_residual,
            flowforce_spread: self.diagnostics.flowforce_spread,
            flow_force: self.diagnostics.flow_force,
            g_surface_max: self.diagnostics.g_surface_max,
            crest_angle: self.diagnostics.crest_angle,
            diagnostics_pass: self.diagnostics.mandatory_pass,
        }
    }
}

/// One line of the branch log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub index: usize,
    pub t: f64,
    pub r: f64,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub wavelength: f64,
    pub amplitude: f64,
    pub max_eta: f64,
    pub min_eta: f64,
    pub stagnation_gap: f64,
    pub max_slope: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub bernoulli_residual: f64,
    pub flowforce_spread: f64,
    pub flow_force: f64,
    #[serde(rename = "G_surface_max")]
    pub g_surface_max: f64,
    pub crest_angle: Option<f64>,
    pub diagnostics_pass: bool,
}

/// Everything a branch needs besides its current state.
#[derive(Debug, Clone)]
pub struct BranchSetup {
    pub model: Arc<VorticityModel<f64>>,
    pub regime: FlowRegime<f64>,
    pub seed: BifurcationSeed<f64>,
    pub nq: usize,
    pub np: usize,
    pub policy: Policy,
}

impl BranchSetup {
    fn initial_spacing(&self) -> PSpacing {
        let r = self.regime.r;
        if r - self.regime.d_plus < self.policy.cluster_gap * r {
            PSpacing::Clustered
        } else {
            PSpacing::Uniform
        }
    }
}

/// Onset: the stream plus (a0/2)φ₀ cos q at λ₀, corrected with the amplitude pinned to a0.
pub fn start_branch(setup: &BranchSetup, a0: f64) -> Result<BranchPoint, ContinuationError> {
    let reg = &setup.regime;
    let max = MAX_ONSET_FRACTION * (reg.r - reg.d_plus);
    if !(a0 > 0.0 && a0 <= max) {
        return Err(ContinuationError::InvalidAmplitude { a0, max });
    }
    let grid = Grid::new(setup.nq, setup.np, setup.initial_spacing())?;
    let stream = stream_solution(setup.model.clone(), reg.s_minus)?;
    let base = HeightField::from_stream(grid.clone(), &stream, setup.seed.lambda0, reg.r)?;
    let system = HeightSystem::new(&grid, &setup.model, reg.r);
    let mut a = a0;
    let mut last = None;
    for attempt in 0..=ONSET_HALVINGS {
        let pred = base.perturbed(0.5 * a, |q, p| setup.seed.phi_at(p) * q.cos())?;
        match newton_solve_system(&system, pred.to_unknowns(), &Constraint::Amplitude(a), &NewtonOptions::default())
        {
            Ok((x, report)) => {
                let field = HeightField::from_unknowns(grid.clone(), &x, reg.r)?;
                if let Some(point) =
                    BranchPoint::build(0, 0.0, field, report.residual_norm, report.iterations, &setup.model, reg)
                {
                    if point.field.max_eta() > reg.d_plus {
                        return Ok(point);
                    }
                }
                last = Some(HeightFieldError::NotConverged {
                    iterations: report.iterations,
                    residual_norm: report.residual_norm,
                });
            }
            Err(e) => last = Some(e),
        }
        log::info!("onset attempt {attempt} at a0 = {a:e} failed, halving");
        a *= 0.5;
    }
    Err(ContinuationError::Onset {
        attempts: ONSET_HALVINGS,
        source: last.unwrap_or(HeightFieldError::Singular),
    })
}

/// Mutable continuation state; everything needed to reproduce the next step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepperState {
    pub index: usize,
    pub t: f64,
    pub ds: f64,
    pub arclength_failures: usize,
    pub min_step_failures: usize,
    pub onset_wavelength: f64,
}

pub struct Stepper {
    setup: BranchSetup,
    system: HeightSystem,
    previous: Option<Vec<f64>>,
    current: BranchPoint,
    state: StepperState,
}

pub enum Step {
    Accepted(BranchPoint),
    Halted(HaltReason),
}

impl Stepper {
    pub fn new(setup: BranchSetup, onset: BranchPoint) -> Self {
        let system = HeightSystem::new(onset.field.grid(), &setup.model, setup.regime.r);
        let state = StepperState {
            index: onset.index,
            t: onset.t,
            ds: setup.policy.ds_init,
            arclength_failures: 0,
            min_step_failures: 0,
            onset_wavelength: onset.wavelength,
        };
        Stepper {
            setup,
            system,
            previous: None,
            current: onset,
            state,
        }
    }

    pub fn current(&self) -> &BranchPoint {
        &self.current
    }

    pub fn previous(&self) -> Option<HeightField> {
        self.previous
            .as_ref()
            .and_then(|x| HeightField::from_unknowns(self.current.field.grid().clone(), x, self.setup.regime.r).ok())
    }

    pub fn state(&self) -> &StepperState {
        &self.state
    }

    fn weights(&self) -> Vec<f64> {
        let g = self.current.field.grid();
        let mut w = vec![0.0; g.unknowns()];
        let mut total = 0.0;
        for i in 0..=g.half() {
            for j in 1..=g.np {
                let v = if j == g.np { SURFACE_WEIGHT } else { 1.0 };
                w[g.index(i, j)] = v;
                total += v;
            }
        }
        for v in w.iter_mut() {
            *v /= total;
        }
        let wl = self.current.field.wavelength();
        w[g.lambda_index()] = wl * wl;
        w
    }

    fn norm(w: &[f64], v: &[f64]) -> f64 {
        w.iter().zip(v).map(|(a, b)| a * b * b).sum::<f64>().sqrt()
    }

    /// Unit tangent in the weighted metric: the secant, or the kernel mode at the first step.
    fn tangent(&self, w: &[f64]) -> Vec<f64> {
        let curr = self.current.field.to_unknowns();
        let mut t: Vec<f64> = match &self.previous {
            Some(prev) => curr.iter().zip(prev).map(|(a, b)| a - b).collect(),
            None => {
                let g = self.current.field.grid();
                let mut t = vec![0.0; g.unknowns()];
                for i in 0..=g.half() {
                    for j in 1..=g.np {
                        t[g.index(i, j)] = 0.5 * self.setup.seed.phi_at(g.p()[j]) * g.q(i).cos();
                    }
                }
                t
            }
        };
        let n = Self::norm(w, &t);
        for v in t.iter_mut() {
            *v /= n;
        }
        t
    }

    fn attempt(&self, ds: f64, natural: bool) -> Result<BranchPoint, HeightFieldError> {
        let g = self.current.field.grid().clone();
        let w = self.weights();
        let t = self.tangent(&w);
        let curr = self.current.field.to_unknowns();
        let pred: Vec<f64> = curr.iter().zip(&t).map(|(c, d)| c + ds * d).collect();
        let constraint = if natural {
            let (top, trough) = (g.index(0, g.np), g.index(g.half(), g.np));
            Constraint::Amplitude(pred[top] - pred[trough])
        } else {
            Constraint::Arclength {
                base: curr.clone(),
                direction: w.iter().zip(&t).map(|(a, b)| a * b).collect(),
                ds,
            }
        };
        let opts = NewtonOptions {
            max_iterations: self.setup.policy.corrector_iterations,
            ..NewtonOptions::default()
        };
        let (x, report) = newton_solve_system(&self.system, pred, &constraint, &opts)?;
        let step: Vec<f64> = x.iter().zip(&curr).map(|(a, b)| a - b).collect();
        let dt = Self::norm(&w, &step);
        let field = HeightField::from_unknowns(g, &x, self.setup.regime.r)?;
        BranchPoint::build(
            self.state.index + 1,
            self.state.t + dt,
            field,
            report.residual_norm,
            report.iterations,
            &self.setup.model,
            &self.setup.regime,
        )
        .filter(|p| p.admissible())
        .ok_or(HeightFieldError::NotConverged {
            iterations: report.iterations,
            residual_norm: report.residual_norm,
        })
    }

    /// Advances to the next accepted point or reports why the branch stops.
    pub fn step(&mut self) -> Step {
        let policy = self.setup.policy;
        if let Some(reason) = self.halt_reason() {
            return Step::Halted(reason);
        }
        loop {
            let natural = self.state.arclength_failures >= ARCLENGTH_FAILURES;
            match self.attempt(self.state.ds, natural) {
                Ok(point) => {
                    let iterations = point.iterations;
                    self.accept(point);
                    if iterations <= 3 {
                        self.state.ds = (self.state.ds * 2.0).min(policy.ds_max);
                    } else if iterations >= 8 {
                        self.state.ds = (self.state.ds * 0.5).max(policy.ds_min);
                    }
                    return Step::Accepted(self.current.clone());
                }
                Err(e) => {
                    log::debug!(
                        "step {} failed at ds = {:e} ({}): {e}",
                        self.state.index + 1,
                        self.state.ds,
                        if natural { "natural" } else { "arclength" }
                    );
                    if !natural {
                        self.state.arclength_failures += 1;
                    }
                    if self.state.ds > policy.ds_min {
                        self.state.ds = (self.state.ds * 0.5).max(policy.ds_min);
                    } else {
                        self.state.min_step_failures += 1;
                        if self.state.min_step_failures >= MIN_STEP_FAILURES {
                            return Step::Halted(HaltReason::StepUnderflow);
                        }
                    }
                }
            }
        }
    }

    fn accept(&mut self, point: BranchPoint) {
        if point.max_eta + 1e-8 < self.current.max_eta {
            log::warn!("max eta decreased at point {}: {} -> {}", point.index, self.current.max_eta, point.max_eta);
        }
        if point.wavelength < 0.5 * self.state.onset_wavelength {
            log::warn!("wavelength {} fell below half its onset value", point.wavelength);
        }
        self.previous = Some(self.current.field.to_unknowns());
        self.state.index = point.index;
        self.state.t = point.t;
        self.state.arclength_failures = 0;
        self.state.min_step_failures = 0;
        self.current = point;
        self.maybe_cluster();
    }

    /// Moves to surface-clustered levels once the crest nears stagnation.
    fn maybe_cluster(&mut self) {
        let r = self.setup.regime.r;
        let grid = self.current.field.grid().clone();
        if grid.spacing == PSpacing::Clustered || self.current.stagnation_gap >= self.setup.policy.cluster_gap * r {
            return;
        }
        let regrid = |f: &HeightField| f.regrid(PSpacing::Clustered);
        let Ok(curr) = regrid(&self.current.field) else { return };
        let system = HeightSystem::new(curr.grid(), &self.setup.model, r);
        let pin = Constraint::Amplitude(self.current.field.amplitude());
        let Ok((x, report)) = newton_solve_system(&system, curr.to_unknowns(), &pin, &NewtonOptions::default()) else {
            log::warn!("re-solve on clustered levels failed; keeping uniform levels");
            return;
        };
        let Ok(field) = HeightField::from_unknowns(curr.grid().clone(), &x, r) else { return };
        let prev = self
            .previous()
            .and_then(|p| regrid(&p).ok())
            .map(|p| p.to_unknowns());
        if let Some(point) = BranchPoint::build(
            self.current.index,
            self.current.t,
            field,
            report.residual_norm,
            report.iterations,
            &self.setup.model,
            &self.setup.regime,
        ) {
            log::info!("switched to clustered levels at point {}", point.index);
            self.system = system;
            self.previous = prev;
            self.current = point;
        }
    }

    fn halt_reason(&self) -> Option<HaltReason> {
        let p = &self.current;
        let policy = &self.setup.policy;
        if p.stagnation_gap < policy.gap_min * self.setup.regime.r {
            Some(HaltReason::GapReached)
        } else if p.field.lambda < policy.lambda_min {
            Some(HaltReason::LambdaFloor)
        } else if p.max_slope > policy.slope_max {
            Some(HaltReason::SlopeLimit)
        } else if p.index + 1 >= policy.max_points {
            Some(HaltReason::MaxPoints)
        } else {
            None
        }
    }

    fn restore(setup: BranchSetup, current: BranchPoint, previous: Option<Vec<f64>>, state: StepperState) -> Self {
        let system = HeightSystem::new(current.field.grid(), &setup.model, setup.regime.r);
        Stepper {
            setup,
            system,
            previous,
            current,
            state,
        }
    }
}

/// Runs the stepper to a halt, calling `on_accept` for each new point.
pub fn continue_branch<E>(
    stepper: &mut Stepper,
    mut on_accept: impl FnMut(&BranchPoint, &Stepper) -> Result<(), E>,
) -> Result<(Vec<BranchPoint>, HaltReason), E> {
    let mut points = Vec::new();
    loop {
        match stepper.step() {
            Step::Accepted(p) => {
                on_accept(&p, stepper)?;
                points.push(p);
            }
            Step::Halted(reason) => return Ok((points, reason)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchLabel {
    ExtremeStokes,
    Solitary,
    ExtremeSolitary,
    Breaking,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub r: f64,
    pub stagnation_gap: Vec<f64>,
    #[serde(rename = "Lambda")]
    pub wavelength: Vec<f64>,
    pub max_slope: Vec<f64>,
    pub halt: Option<HaltReason>,
}

impl Evidence {
    pub fn from_log(lines: &[LogLine], halt: Option<HaltReason>) -> Self {
        Evidence {
            r: lines.first().map_or(f64::NAN, |l| l.r),
            stagnation_gap: lines.iter().map(|l| l.stagnation_gap).collect(),
            wavelength: lines.iter().map(|l| l.wavelength).collect(),
            max_slope: lines.iter().map(|l| l.max_slope).collect(),
            halt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchOutcome {
    pub label: BranchLabel,
    pub warning: Option<String>,
    pub gap_closing: bool,
    pub wavelength_growing: bool,
    pub slope_trigger: bool,
    pub evidence: Evidence,
}

fn tail_monotone(v: &[f64], increasing: bool) -> bool {
    let tail = &v[v.len().saturating_sub(3)..];
    tail.windows(2).all(|w| if increasing { w[1] >= w[0] } else { w[1] <= w[0] })
}

/// Decision table over the trend statistics of a branch.
pub fn classify(evidence: Evidence, class: OmegaClass, slope_max: f64) -> BranchOutcome {
    let n = evidence.stagnation_gap.len();
    let mut outcome = BranchOutcome {
        label: BranchLabel::Undecided,
        warning: None,
        gap_closing: false,
        wavelength_growing: false,
        slope_trigger: false,
        evidence,
    };
    let ev = &outcome.evidence;
    if n < MIN_CLASSIFY_POINTS {
        outcome.warning = Some(format!("{n} points are too few to classify"));
        return outcome;
    }
    let gaps = &ev.stagnation_gap;
    let last_gap = gaps[n - 1];
    let max_gap = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gap_closing = ev.halt == Some(HaltReason::GapReached)
        || (last_gap < GAP_CLOSING_FRACTION * ev.r && last_gap < 0.25 * max_gap && tail_monotone(gaps, false));
    let wl = &ev.wavelength;
    let wavelength_growing = ev.halt == Some(HaltReason::LambdaFloor)
        || (wl[n - 1] > WAVELENGTH_GROWTH * wl[0] && tail_monotone(wl, true));
    let slope_trigger =
        ev.halt == Some(HaltReason::SlopeLimit) || ev.max_slope.iter().any(|&s| s > slope_max);
    outcome.gap_closing = gap_closing;
    outcome.wavelength_growing = wavelength_growing;
    outcome.slope_trigger = slope_trigger;
    outcome.label = match (gap_closing, wavelength_growing, slope_trigger) {
        (true, false, false) => BranchLabel::ExtremeStokes,
        (false, true, false) => BranchLabel::Solitary,
        (true, true, false) => BranchLabel::ExtremeSolitary,
        (false, false, true) => BranchLabel::Breaking,
        (true, false, true) if class != OmegaClass::General => BranchLabel::ExtremeStokes,
        _ => BranchLabel::Undecided,
    };
    if outcome.label == BranchLabel::Breaking && class != OmegaClass::General {
        outcome.label = BranchLabel::ExtremeStokes;
        outcome.warning = Some("slope limit reached with nonnegative vorticity, where breaking cannot occur".into());
    } else if slope_trigger && outcome.label == BranchLabel::ExtremeStokes {
        outcome.warning = Some("slope limit reached while the crest approached stagnation".into());
    } else if outcome.label == BranchLabel::Undecided && (gap_closing || wavelength_growing || slope_trigger) {
        outcome.warning = Some("conflicting trends".into());
    }
    outcome
}

pub fn classify_branch(points: &[BranchPoint], halt: Option<HaltReason>, class: OmegaClass, slope_max: f64) -> BranchOutcome {
    let lines: Vec<LogLine> = points.iter().map(|p| p.log_line()).collect();
    classify(Evidence::from_log(&lines, halt), class, slope_max)
}

pub const LOG_FILE: &str = "branch.jsonl";
pub const STATE_FILE: &str = "state.json";
pub const SEED_FILE: &str = "seed.json";
pub const OUTCOME_FILE: &str = "outcome.json";
const CURRENT_PREFIX: &str = "current_";
const PREVIOUS_PREFIX: &str = "previous_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    state: StepperState,
    log_lines: usize,
    /// File stems of the stored fields; state.json is written last, so it only names complete files.
    current: String,
    previous: Option<String>,
    r: f64,
    #[serde(rename = "Nq")]
    nq: usize,
    #[serde(rename = "Np")]
    np: usize,
    current_residual_norm: f64,
    current_iterations: usize,
}

fn ck_err(path: &Path, msg: impl ToString) -> ContinuationError {
    ContinuationError::Checkpoint {
        path: path.display().to_string(),
        msg: msg.to_string(),
    }
}

pub struct BranchRun {
    pub log: Vec<LogLine>,
    pub halt: HaltReason,
    pub outcome: BranchOutcome,
}

struct Files {
    dir: PathBuf,
}

impl Files {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn append_log(&self, line: &LogLine) -> Result<(), ContinuationError> {
        let path = self.path(LOG_FILE);
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| ck_err(&path, e))?;
        let text = serde_json::to_string(line).map_err(|e| ck_err(&path, e))?;
        writeln!(f, "{text}").map_err(|e| ck_err(&path, e))?;
        f.sync_all().map_err(|e| ck_err(&path, e))
    }

    fn read_log(&self) -> Result<Vec<LogLine>, ContinuationError> {
        read_log(&self.path(LOG_FILE))
    }

    fn write_pair(&self, stem: &str, field: &HeightField, residual_norm: f64) -> Result<(), ContinuationError> {
        let (csv, json) = (self.path(&format!("{stem}.csv")), self.path(&format!("{stem}.json")));
        write_field(field, residual_norm, &csv, &json)?;
        Ok(())
    }

    fn save(&self, stepper: &Stepper, log_lines: usize) -> Result<(), ContinuationError> {
        let cur = stepper.current();
        let index = stepper.state().index;
        let current = format!("{CURRENT_PREFIX}{index:06}");
        self.write_pair(&current, &cur.field, cur.residual_norm)?;
        let previous = match stepper.previous() {
            Some(prev) => {
                let stem = format!("{PREVIOUS_PREFIX}{index:06}");
                self.write_pair(&stem, &prev, 0.0)?;
                Some(stem)
            }
            None => None,
        };
        let ck = Checkpoint {
            state: stepper.state().clone(),
            log_lines,
            current: current.clone(),
            previous: previous.clone(),
            r: cur.field.r,
            nq: cur.field.grid().nq,
            np: cur.field.grid().np,
            current_residual_norm: cur.residual_norm,
            current_iterations: cur.iterations,
        };
        let path = self.path(STATE_FILE);
        let text = serde_json::to_string_pretty(&ck).map_err(|e| ck_err(&path, e))?;
        write_atomic(&path, text.as_bytes()).map_err(|e| ck_err(&path, e))?;
        self.remove_stale(&[Some(current), previous])
    }

    /// Deletes field files the checkpoint no longer names.
    fn remove_stale(&self, keep: &[Option<String>]) -> Result<(), ContinuationError> {
        let entries = std::fs::read_dir(&self.dir).map_err(|e| ck_err(&self.dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| ck_err(&self.dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            let Some(stem) = name.strip_suffix(".csv").or_else(|| name.strip_suffix(".json")) else {
                continue;
            };
            let ours = stem.starts_with(CURRENT_PREFIX) || stem.starts_with(PREVIOUS_PREFIX);
            if ours && !keep.iter().flatten().any(|k| k == stem) {
                std::fs::remove_file(entry.path()).map_err(|e| ck_err(&entry.path(), e))?;
            }
        }
        Ok(())
    }
}

pub fn read_log(path: &Path) -> Result<Vec<LogLine>, ContinuationError> {
    let f = std::fs::File::open(path).map_err(|e| ck_err(path, e))?;
    let mut out = Vec::new();
    for (k, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| ck_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ck_err(path, format!("line {}: {e}", k + 1)))?);
    }
    Ok(out)
}

/// The current field of the checkpoint in `dir`.
pub fn checkpoint_field(dir: &Path) -> Result<HeightField, ContinuationError> {
    let path = dir.join(STATE_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| ck_err(&path, e))?;
    let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| ck_err(&path, e))?;
    let stem = &ck.current;
    Ok(read_field(&dir.join(format!("{stem}.csv")), &dir.join(format!("{stem}.json")))?.field)
}

/// Solves the onset wave and writes it to `dir` as a checkpoint with a one-line log.
pub fn init_branch(setup: &BranchSetup, a0: f64, dir: &Path) -> Result<BranchPoint, ContinuationError> {
    std::fs::create_dir_all(dir).map_err(|e| ck_err(dir, e))?;
    let files = Files { dir: dir.to_path_buf() };
    for name in [LOG_FILE, STATE_FILE, OUTCOME_FILE] {
        let p = files.path(name);
        if p.exists() {
            std::fs::remove_file(&p).map_err(|e| ck_err(&p, e))?;
        }
    }
    let seed_path = files.path(SEED_FILE);
    let seed_text = serde_json::to_string(&setup.seed).map_err(|e| ck_err(&seed_path, e))?;
    write_atomic(&seed_path, seed_text.as_bytes()).map_err(|e| ck_err(&seed_path, e))?;
    let onset = start_branch(setup, a0)?;
    files.append_log(&onset.log_line())?;
    let stepper = Stepper::new(setup.clone(), onset.clone());
    files.save(&stepper, 1)?;
    Ok(onset)
}

/// Starts a branch in `dir`, checkpointing after every accepted point.
pub fn run_branch(setup: BranchSetup, a0: f64, dir: &Path) -> Result<BranchRun, ContinuationError> {
    let onset = init_branch(&setup, a0, dir)?;
    let stepper = Stepper::new(setup, onset);
    drive(stepper, Files { dir: dir.to_path_buf() })
}

/// Resumes a branch from the checkpoint in `dir`; the log is truncated to the checkpoint.
pub fn resume_branch(setup: BranchSetup, dir: &Path) -> Result<BranchRun, ContinuationError> {
    let (stepper, files) = restore_checkpoint(setup, dir)?;
    drive(stepper, files)
}

fn restore_checkpoint(setup: BranchSetup, dir: &Path) -> Result<(Stepper, Files), ContinuationError> {
    let files = Files { dir: dir.to_path_buf() };
    let state_path = files.path(STATE_FILE);
    let text = std::fs::read_to_string(&state_path).map_err(|e| ck_err(&state_path, e))?;
    let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| ck_err(&state_path, e))?;
    if ck.r != setup.regime.r || ck.nq != setup.nq || ck.np != setup.np {
        return Err(ck_err(&state_path, "checkpoint was written for a different r or grid"));
    }
    let load = |stem: &str| read_field(&files.path(&format!("{stem}.csv")), &files.path(&format!("{stem}.json")));
    let current = load(&ck.current)?.field;
    let previous = match &ck.previous {
        Some(stem) => Some(load(stem)?.field.to_unknowns()),
        None => None,
    };
    // lines past the checkpoint, complete or not, belong to an interrupted step
    let log_path = files.path(LOG_FILE);
    let raw = std::fs::read_to_string(&log_path).map_err(|e| ck_err(&log_path, e))?;
    let kept: Vec<&str> = raw.split_inclusive('\n').take(ck.log_lines).collect();
    if kept.len() < ck.log_lines || kept.iter().any(|l| !l.ends_with('\n')) {
        return Err(ck_err(&log_path, format!("log is shorter than the {} lines in the checkpoint", ck.log_lines)));
    }
    let text = kept.concat();
    if text.len() < raw.len() {
        write_atomic(&log_path, text.as_bytes()).map_err(|e| ck_err(&log_path, e))?;
    }
    let point = BranchPoint::build(
        ck.state.index,
        ck.state.t,
        current,
        ck.current_residual_norm,
        ck.current_iterations,
        &setup.model,
        &setup.regime,
    )
    .ok_or_else(|| ck_err(&state_path, "checkpointed field does not reconstruct"))?;
    Ok((Stepper::restore(setup, point, previous, ck.state), files))
}

fn drive(mut stepper: Stepper, files: Files) -> Result<BranchRun, ContinuationError> {
    let class = stepper.setup.model.class();
    let slope_max = stepper.setup.policy.slope_max;
    let mut log_lines = files.read_log()?.len();
    let (_, halt) = continue_branch(&mut stepper, |p, s| {
        files.append_log(&p.log_line())?;
        log_lines += 1;
        files.save(s, log_lines)?;
        log::info!(
            "point {}: gap/r = {:.4e}, Lambda = {:.6}, iterations {}, ds = {:.3e}",
            p.index,
            p.stagnation_gap / p.field.r,
            p.wavelength,
            p.iterations,
            s.state().ds
        );
        Ok::<(), ContinuationError>(())
    })?;
    let log = files.read_log()?;
    let mut outcome = classify(Evidence::from_log(&log, Some(halt)), class, slope_max);
    if halt == HaltReason::StepUnderflow {
        outcome.label = BranchLabel::Undecided;
        outcome.warning = Some("corrector failed repeatedly at the minimum step; state saved in the checkpoint".into());
    }
    let path = files.path(OUTCOME_FILE);
    let text = serde_json::to_string_pretty(&outcome).map_err(|e| ck_err(&path, e))?;
    write_atomic(&path, text.as_bytes()).map_err(|e| ck_err(&path, e))?;
    Ok(BranchRun { log, halt, outcome })
}
