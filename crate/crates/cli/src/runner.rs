//! Scenario runs and the epsilon sweep.
//!
//! A run writes into its output directory:
//!
//! - `snap_NNNNNN.bin` and `snap_NNNNNN.txt` at step 0, every `snapshot_every`
//!   steps and at the final step,
//! - `diagnostics.tsv` with one row per step (row 0 is the initial state),
//! - `summary.txt`.
//!
//! A sweep writes `sweep.tsv` and `summary.txt`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use soh_core::scenarios::{init_collision, init_riemann, track_shock, RiemannDomain, ShockTrack};
use soh_core::scheme::congested_fraction;
use soh_core::twofluid::{init_crowd, lane_diagnostics, twofluid_step, TwoFluidState};
use soh_core::{ap_step, explicit_step, FieldState, Grid, ModelParams, PressureModel, SchemeError, StepReport};

use crate::config::{ConfigError, RunConfig, Scenario, Stepper};
use crate::snapshot::{write_snapshot, write_text_mirror, Snapshot, SnapshotData};
use crate::CliError;

pub const DIAGNOSTICS_HEADER: &str = "step\tt\tmass\tmax_rho\tcongested_fraction\tx_shock\tdrho_mean\tdrho_var\tdq1_mean\tdq1_var\tnewton_iterations\tlinear_iterations\tnewton_residual\tmax_char_speed\tcfl_explicit\tlattice_oscillation";

/// Outcome of one stepper at one epsilon.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Stable,
    Unstable { step: usize, reason: String },
}

impl Verdict {
    pub fn is_stable(&self) -> bool {
        matches!(self, Verdict::Stable)
    }

    fn label(&self) -> String {
        match self {
            Verdict::Stable => "stable".into(),
            Verdict::Unstable { step, .. } => format!("unstable@{step}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub ap: Verdict,
    pub ap_max_cfl: f64,
    pub ap_max_density: f64,
    pub ap_mass_drift: f64,
    pub explicit: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSummary {
    pub scenario: String,
    pub steps: usize,
    pub final_time: f64,
    /// Relative change of the total mass between the first and last state.
    pub mass_drift: f64,
    /// Largest density (total density for the crowd) over all steps.
    pub max_density: f64,
    pub max_cfl: f64,
    pub final_congested_fraction: f64,
    /// Least-squares shock speed over the samples inside `[0, 1]`.
    pub sigma_hat: Option<f64>,
    /// First time the shock reaches `x = 0`.
    pub arrival: Option<f64>,
    /// Relative mass drift of each crowd species.
    pub species_drift: Option<(f64, f64)>,
    pub sweep: Vec<SweepRow>,
    pub verdict: Option<String>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |x| format!("{x:.6e}"))
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario = {}", self.scenario);
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "final_time = {:.6}", self.final_time);
        if self.sweep.is_empty() {
            let _ = writeln!(s, "mass_drift = {:.3e}", self.mass_drift);
            let _ = writeln!(s, "max_density = {:.10}", self.max_density);
            let _ = writeln!(s, "max_cfl = {:.4}", self.max_cfl);
            let _ = writeln!(s, "congested_fraction = {:.4}", self.final_congested_fraction);
        }
        if self.scenario == "riemann" {
            let _ = writeln!(s, "sigma_hat = {}", opt(self.sigma_hat));
            let _ = writeln!(s, "arrival = {}", opt(self.arrival));
        }
        if let Some((a, b)) = self.species_drift {
            let _ = writeln!(s, "species_drift = {a:.3e} {b:.3e}");
        }
        for r in &self.sweep {
            let _ = writeln!(
                s,
                "epsilon = {:e}: ap {} (max cfl {:.4}, max rho {:.8}, drift {:.3e}), explicit {}",
                r.epsilon,
                r.ap.label(),
                r.ap_max_cfl,
                r.ap_max_density,
                r.ap_mass_drift,
                r.explicit.as_ref().map_or_else(|| "skipped".into(), Verdict::label)
            );
        }
        if let Some(v) = &self.verdict {
            let _ = writeln!(s, "verdict = {v}");
        }
        s
    }
}

#[derive(Debug, Clone, Default)]
struct Row {
    mass: f64,
    max_rho: f64,
    congested: f64,
    x_shock: Option<f64>,
    lanes: Option<(f64, f64, f64, f64)>,
    report: Option<StepReport>,
}

fn g(v: f64) -> String {
    format!("{v:.17e}")
}

fn format_row(step: usize, t: f64, r: &Row) -> String {
    let nan = || "nan".to_string();
    let mut cols = vec![step.to_string(), g(t), g(r.mass), g(r.max_rho), g(r.congested)];
    cols.push(r.x_shock.map_or_else(nan, g));
    match r.lanes {
        Some((a, b, c, d)) => cols.extend([g(a), g(b), g(c), g(d)]),
        None => cols.extend((0..4).map(|_| nan())),
    }
    match &r.report {
        Some(rep) => cols.extend([
            rep.newton_iterations.to_string(),
            rep.inner_linear_iterations.to_string(),
            g(rep.newton_residual),
            g(rep.max_char_speed),
            g(rep.cfl_explicit),
            g(rep.lattice_oscillation),
        ]),
        None => cols.extend((0..6).map(|_| nan())),
    }
    cols.join("\t")
}

struct Output<'a> {
    dir: &'a Path,
    diagnostics: std::io::BufWriter<fs::File>,
}

impl<'a> Output<'a> {
    fn create(dir: &'a Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join("diagnostics.tsv");
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut diagnostics = std::io::BufWriter::new(file);
        writeln!(diagnostics, "{DIAGNOSTICS_HEADER}").map_err(|e| CliError::io(&path, e))?;
        Ok(Self { dir, diagnostics })
    }

    fn row(&mut self, step: usize, t: f64, row: &Row) -> Result<(), CliError> {
        writeln!(self.diagnostics, "{}", format_row(step, t, row))
            .map_err(|e| CliError::io(self.dir.join("diagnostics.tsv"), e))
    }

    fn snapshot(&self, step: usize, snap: &Snapshot) -> Result<(), CliError> {
        let stem = format!("snap_{step:06}");
        write_snapshot(&self.dir.join(format!("{stem}.bin")), snap)?;
        write_text_mirror(&self.dir.join(format!("{stem}.txt")), snap)?;
        log::info!("step {step}: wrote {stem} at t = {:.5}", snap.time());
        Ok(())
    }

    fn finish(mut self, summary: &RunSummary) -> Result<(), CliError> {
        self.diagnostics
            .flush()
            .map_err(|e| CliError::io(self.dir.join("diagnostics.tsv"), e))?;
        write_summary(self.dir, summary)
    }
}

fn write_summary(dir: &Path, summary: &RunSummary) -> Result<(), CliError> {
    let path = dir.join("summary.txt");
    fs::write(&path, summary.to_text()).map_err(|e| CliError::io(&path, e))
}

fn setup_error(key: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(ConfigError::Constraint {
        key: key.to_string(),
        reason: e.to_string(),
    })
}

fn pressure_model(params: &ModelParams) -> Result<PressureModel, CliError> {
    PressureModel::new(params).map_err(|e| setup_error("params", e))
}

fn single_step(
    stepper: Stepper,
    grid: &Grid,
    state: &FieldState,
    params: &ModelParams,
    pressure: &PressureModel,
) -> Result<(FieldState, StepReport), SchemeError> {
    match stepper {
        Stepper::Ap => ap_step(grid, state, params, pressure),
        Stepper::Explicit => explicit_step(grid, state, params, pressure),
    }
}

fn wants_snapshot(step: usize, every: usize, last: usize) -> bool {
    step == 0 || step == last || (every > 0 && step.is_multiple_of(every))
}

/// Runs the configured scenario and writes its output into `out`.
pub fn run(config: &RunConfig, out: &Path) -> Result<RunSummary, CliError> {
    match config.scenario {
        Scenario::Riemann => run_riemann(config, out),
        Scenario::Collision => run_collision(config, out),
        Scenario::Crowd => run_crowd(config, out),
        Scenario::Sweep => sweep(config, out),
    }
}

fn single_row(state: &FieldState, params: &ModelParams, report: Option<StepReport>) -> Row {
    Row {
        mass: state.total_mass(),
        max_rho: state.max_density(),
        congested: congested_fraction(&state.rho, params.rho_star, params.congestion_tol),
        report,
        ..Row::default()
    }
}

fn run_collision(config: &RunConfig, out: &Path) -> Result<RunSummary, CliError> {
    let params = &config.params;
    let pressure = pressure_model(params)?;
    let grid = Grid::new(config.nx, config.ny, params.dx, params.dy).map_err(|e| setup_error("dx", e))?;
    let mut state = init_collision(&grid, params).map_err(|e| setup_error("dx", e))?;
    let steps = config.steps();
    let mut output = Output::create(out)?;
    let snap = |s: &FieldState| Snapshot::new(&grid, (0.0, 0.0), params, SnapshotData::Single(s.clone()));

    let m0 = state.total_mass();
    let mut summary = RunSummary {
        scenario: config.scenario.to_string(),
        max_density: state.max_density(),
        ..RunSummary::default()
    };
    output.row(0, 0.0, &single_row(&state, params, None))?;
    output.snapshot(0, &snap(&state))?;
    for n in 1..=steps {
        let (next, report) = single_step(config.stepper, &grid, &state, params, &pressure)
            .map_err(|source| CliError::Solver { step: n, source })?;
        state = next;
        summary.max_cfl = summary.max_cfl.max(report.cfl_explicit);
        summary.max_density = summary.max_density.max(state.max_density());
        output.row(n, state.time, &single_row(&state, params, Some(report)))?;
        if wants_snapshot(n, config.snapshot_every, steps) {
            output.snapshot(n, &snap(&state))?;
        }
    }
    summary.steps = steps;
    summary.final_time = state.time;
    summary.mass_drift = (state.total_mass() - m0) / m0;
    summary.final_congested_fraction = congested_fraction(&state.rho, params.rho_star, params.congestion_tol);
    output.finish(&summary)?;
    Ok(summary)
}

fn run_riemann(config: &RunConfig, out: &Path) -> Result<RunSummary, CliError> {
    let params = &config.params;
    let pressure = pressure_model(params)?;
    let mut spec = config.riemann.spec;
    if config.riemann.pad {
        spec = spec
            .with_padding_for(params.t_end, params, &pressure)
            .map_err(|e| setup_error("riemann", e))?;
    }
    let domain = RiemannDomain::new(&spec, params.dx, config.riemann.rows, params.dy).map_err(|e| setup_error("dx", e))?;
    let grid = domain.grid;
    let origin = (domain.start(), 0.0);
    let mut state = init_riemann(&spec, &domain);
    let steps = config.steps();
    let mut output = Output::create(out)?;
    let snap = |s: &FieldState| Snapshot::new(&grid, origin, params, SnapshotData::Single(s.clone()));

    let m0 = state.total_mass();
    let mut track = ShockTrack::new(domain.length());
    track.record(0.0, spec.jump_position);
    let mut previous = None;
    let mut summary = RunSummary {
        scenario: config.scenario.to_string(),
        max_density: state.max_density(),
        ..RunSummary::default()
    };
    let mut row = single_row(&state, params, None);
    row.x_shock = Some(spec.jump_position);
    output.row(0, 0.0, &row)?;
    output.snapshot(0, &snap(&state))?;
    for n in 1..=steps {
        let (next, report) = single_step(config.stepper, &grid, &state, params, &pressure)
            .map_err(|source| CliError::Solver { step: n, source })?;
        state = next;
        let x = track_shock(&domain, &state, &spec, previous);
        if let Some(x) = x {
            track.record(state.time, x);
            previous = Some(x);
        }
        summary.max_cfl = summary.max_cfl.max(report.cfl_explicit);
        summary.max_density = summary.max_density.max(state.max_density());
        let mut row = single_row(&state, params, Some(report));
        row.x_shock = x;
        output.row(n, state.time, &row)?;
        if wants_snapshot(n, config.snapshot_every, steps) {
            output.snapshot(n, &snap(&state))?;
        }
    }
    let inside = ShockTrack {
        samples: track.samples.iter().copied().filter(|&(_, x)| x >= 0.0).collect(),
        length: track.length,
    };
    summary.sigma_hat = inside.fit_speed(0.0, f64::INFINITY).map(|(s, _)| s);
    summary.arrival = track.arrival_time(0.0);
    summary.steps = steps;
    summary.final_time = state.time;
    summary.mass_drift = (state.total_mass() - m0) / m0;
    summary.final_congested_fraction = congested_fraction(&state.rho, params.rho_star, params.congestion_tol);
    output.finish(&summary)?;
    Ok(summary)
}

fn crowd_row(state: &TwoFluidState, params: &ModelParams, report: Option<StepReport>) -> Row {
    let total = state.total_density();
    let lanes = lane_diagnostics(state);
    Row {
        mass: total.iter().sum(),
        max_rho: total.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        congested: congested_fraction(&total, params.rho_star, params.congestion_tol),
        x_shock: None,
        lanes: Some((
            lanes.drho_stats.mean,
            lanes.drho_stats.variance,
            lanes.dq1_stats.mean,
            lanes.dq1_stats.variance,
        )),
        report,
    }
}

fn run_crowd(config: &RunConfig, out: &Path) -> Result<RunSummary, CliError> {
    let params = &config.params;
    let pressure = pressure_model(params)?;
    let grid = Grid::new(config.nx, config.ny, params.dx, params.dy).map_err(|e| setup_error("dx", e))?;
    let mut state = init_crowd(&grid, params.seed).map_err(|e| setup_error("dx", e))?;
    let steps = config.steps();
    let mut output = Output::create(out)?;
    let snap = |s: &TwoFluidState| Snapshot::new(&grid, (0.0, 0.0), params, SnapshotData::TwoFluid(s.clone()));

    let m0 = (state.plus.mass(), state.minus.mass());
    let first = crowd_row(&state, params, None);
    let mut summary = RunSummary {
        scenario: config.scenario.to_string(),
        max_density: first.max_rho,
        ..RunSummary::default()
    };
    output.row(0, 0.0, &first)?;
    output.snapshot(0, &snap(&state))?;
    let mut last = first;
    for n in 1..=steps {
        let (next, report) =
            twofluid_step(&grid, &state, params, &pressure).map_err(|source| CliError::Solver { step: n, source })?;
        state = next;
        summary.max_cfl = summary.max_cfl.max(report.cfl_explicit);
        last = crowd_row(&state, params, Some(report));
        summary.max_density = summary.max_density.max(last.max_rho);
        output.row(n, state.time, &last)?;
        if wants_snapshot(n, config.snapshot_every, steps) {
            output.snapshot(n, &snap(&state))?;
        }
    }
    let drift = |now: f64, then: f64| (now - then) / then;
    summary.steps = steps;
    summary.final_time = state.time;
    summary.mass_drift = drift(state.plus.mass() + state.minus.mass(), m0.0 + m0.1);
    summary.species_drift = Some((drift(state.plus.mass(), m0.0), drift(state.minus.mass(), m0.1)));
    summary.final_congested_fraction = last.congested;
    output.finish(&summary)?;
    Ok(summary)
}

struct ApSweep {
    verdict: Verdict,
    max_cfl: f64,
    max_density: f64,
    drift: f64,
}

fn sweep_ap(grid: &Grid, init: &FieldState, params: &ModelParams, steps: usize) -> Result<ApSweep, CliError> {
    let pressure = pressure_model(params)?;
    let m0 = init.total_mass();
    let mut state = init.clone();
    let mut result = ApSweep {
        verdict: Verdict::Stable,
        max_cfl: 0.0,
        max_density: state.max_density(),
        drift: 0.0,
    };
    for n in 1..=steps {
        match ap_step(grid, &state, params, &pressure) {
            Ok((next, report)) => {
                state = next;
                result.max_cfl = result.max_cfl.max(report.cfl_explicit);
                result.max_density = result.max_density.max(state.max_density());
                if !state.is_finite() || state.max_density() > params.rho_star {
                    result.verdict = Verdict::Unstable {
                        step: n,
                        reason: "non-finite state or density above the congestion density".into(),
                    };
                    break;
                }
            }
            Err(e) => {
                result.verdict = Verdict::Unstable {
                    step: n,
                    reason: e.to_string(),
                };
                break;
            }
        }
    }
    result.drift = (state.total_mass() - m0) / m0;
    Ok(result)
}

fn sweep_explicit(grid: &Grid, init: &FieldState, params: &ModelParams, steps: usize) -> Result<Verdict, CliError> {
    let pressure = pressure_model(params)?;
    let mut state = init.clone();
    for n in 1..=steps {
        match explicit_step(grid, &state, params, &pressure) {
            Ok((next, _)) if next.is_finite() => state = next,
            Ok(_) => {
                return Ok(Verdict::Unstable {
                    step: n,
                    reason: "non-finite state".into(),
                })
            }
            Err(e) => {
                return Ok(Verdict::Unstable {
                    step: n,
                    reason: e.to_string(),
                })
            }
        }
    }
    Ok(Verdict::Stable)
}

/// Collision runs at every epsilon of the sweep with fixed steps.
///
/// The verdict is `stable` when every AP run stays finite and below the
/// congestion density; explicit runs, when enabled, are reported alongside.
pub fn sweep(config: &RunConfig, out: &Path) -> Result<RunSummary, CliError> {
    let base = &config.params;
    let grid = Grid::new(config.nx, config.ny, base.dx, base.dy).map_err(|e| setup_error("dx", e))?;
    let init = init_collision(&grid, base).map_err(|e| setup_error("dx", e))?;
    let steps = config.steps();
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;

    let mut rows = Vec::new();
    for &epsilon in &config.sweep.epsilons {
        let params = ModelParams {
            epsilon,
            ..base.clone()
        };
        let ap = sweep_ap(&grid, &init, &params, steps)?;
        let explicit = if config.sweep.explicit {
            Some(sweep_explicit(&grid, &init, &params, steps)?)
        } else {
            None
        };
        log::info!("epsilon {epsilon:e}: ap {}", ap.verdict.label());
        rows.push(SweepRow {
            epsilon,
            ap: ap.verdict,
            ap_max_cfl: ap.max_cfl,
            ap_max_density: ap.max_density,
            ap_mass_drift: ap.drift,
            explicit,
        });
    }

    let mut table = String::from("epsilon\tap_verdict\tap_max_cfl\tap_max_rho\tap_mass_drift\texplicit_verdict\n");
    for r in &rows {
        let _ = writeln!(
            table,
            "{:e}\t{}\t{}\t{}\t{}\t{}",
            r.epsilon,
            r.ap.label(),
            g(r.ap_max_cfl),
            g(r.ap_max_density),
            g(r.ap_mass_drift),
            r.explicit.as_ref().map_or_else(|| "skipped".into(), Verdict::label)
        );
    }
    let path = out.join("sweep.tsv");
    fs::write(&path, table).map_err(|e| CliError::io(&path, e))?;

    let all_stable = rows.iter().all(|r| r.ap.is_stable());
    let summary = RunSummary {
        scenario: Scenario::Sweep.to_string(),
        steps,
        final_time: steps as f64 * base.dt,
        max_density: rows.iter().map(|r| r.ap_max_density).fold(f64::NEG_INFINITY, f64::max),
        max_cfl: rows.iter().map(|r| r.ap_max_cfl).fold(0.0, f64::max),
        mass_drift: rows.iter().map(|r| r.ap_mass_drift).fold(0.0, |a: f64, b| if b.abs() > a.abs() { b } else { a }),
        sweep: rows,
        verdict: Some(if all_stable { "stable" } else { "unstable" }.into()),
        ..RunSummary::default()
    };
    write_summary(out, &summary)?;
    Ok(summary)
}
