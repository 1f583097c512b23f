use std::fmt;
use std::path::Path;
use std::thread;

use crate::config::{InitialCondition, RunConfig};
use crate::diagnostics::{candidate_decay_times, DiagnosticRecord, DiagnosticsObserver};
use crate::dynamics::{traveling_solution, Direction};
use crate::error::{BiError, Result};
use crate::grid::Grid;
use crate::identity::{
    check_qnum, check_qtilde, sweep_jets, verify_time_identity, IdentityObserver, IdentityReport,
    RefinementStudy, TimeIdentity,
};
use crate::integrator::{evolve, RunFailure, RunReport};

use super::output::{self, fmt_float};
use super::settings::{Family, Settings};
use super::{ExitStatus, ExperimentSpec};

/// A named pass/fail comparison against a frozen threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: String,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold: format!("<= {max:e}"),
            passed: value <= max,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, min: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold: format!(">= {min:e}"),
            passed: value >= min,
        }
    }

    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold: format!("in [{lo}, {hi}]"),
            passed: value >= lo && value <= hi,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{tag} {}: {:.6e} ({})",
            self.name, self.value, self.threshold
        )
    }
}

fn join<T>(h: thread::ScopedJoinHandle<'_, T>) -> T {
    h.join().unwrap_or_else(|e| std::panic::resume_unwind(e))
}

fn failure_error(f: &RunFailure) -> BiError {
    BiError::Breakdown {
        t: f.t,
        x: f64::NAN,
        reason: f.message.clone(),
    }
}

// ---------------------------------------------------------------------------
// simulate

/// Records and report of a single diagnosed run.
#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub grid: Grid,
    pub records: Vec<DiagnosticRecord>,
    pub report: RunReport,
}

pub fn simulate(settings: &Settings) -> Result<SimulationRun> {
    simulate_config(&settings.run_config())
}

fn simulate_config(config: &RunConfig) -> Result<SimulationRun> {
    config.validate()?;
    let grid = config.grid()?;
    let mut obs = DiagnosticsObserver::new(grid.clone(), config.weights()?, config.fixed_window);
    let initial = config.initial.build(&grid, config.t_start)?;
    let report = evolve(config, initial, &mut [&mut obs])?;
    Ok(SimulationRun {
        grid,
        records: obs.records,
        report,
    })
}

fn write_run(dir: &Path, settings: &Settings, run: &SimulationRun) -> Result<()> {
    output::create_dir(dir)?;
    output::write_file(
        &dir.join("timeseries.csv"),
        &output::timeseries_csv(&run.records),
    )?;
    output::write_file(
        &dir.join("run_meta.toml"),
        &output::run_meta_toml(settings, &run.grid, &run.report)?,
    )?;
    if settings.plots {
        output::write_plots(dir, &run.records)?;
    }
    Ok(())
}

pub(super) fn cmd_simulate(spec: &ExperimentSpec) -> Result<ExitStatus> {
    let run = simulate(&spec.settings)?;
    write_run(&spec.out, &spec.settings, &run)?;
    let r = &run.report;
    println!(
        "steps {} dt {:.6e} min_gamma {:.6e} wall {:.2}s",
        r.steps,
        r.dt,
        r.min_gamma,
        r.wall_time.as_secs_f64()
    );
    match &r.failure {
        None => {
            println!("completed at t = {}", r.final_state.t);
            Ok(ExitStatus::Success)
        }
        Some(f) => {
            eprintln!("breakdown at t = {}: {}", f.t, f.message);
            Ok(ExitStatus::Breakdown)
        }
    }
}

// ---------------------------------------------------------------------------
// verify-identities

/// Pointwise identities must hold to rounding.
pub const JET_TOLERANCE: f64 = 1e-12;
const JET_HALF_BOX: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct JetRow {
    pub name: &'static str,
    pub samples: usize,
    pub max_abs: f64,
    pub max_rel: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct IdentityStudy {
    pub seed: u64,
    pub jets: Vec<JetRow>,
    pub refinements: Vec<RefinementStudy>,
    /// Set when either evolution broke down; no time-series rows then.
    pub failure: Option<RunFailure>,
}

impl IdentityStudy {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
            && self.jets.iter().all(|j| j.passed)
            && self.refinements.iter().all(|r| r.passed)
    }
}

fn identity_samples(
    config: &RunConfig,
) -> Result<(Vec<crate::identity::IdentitySample>, RunReport)> {
    config.validate()?;
    let grid = config.grid()?;
    let mut obs = IdentityObserver::new(grid.clone(), config.weights()?);
    let initial = config.initial.build(&grid, config.t_start)?;
    let report = evolve(config, initial, &mut [&mut obs])?;
    Ok((obs.samples, report))
}

/// Jet sweeps, then the three time-series identities at the configured
/// resolution and with `h` and the snapshot spacing both halved.
pub fn verify_identities(settings: &Settings) -> Result<IdentityStudy> {
    let mut jets = Vec::new();
    for (name, check) in [
        ("qnum", check_qnum as fn(&_) -> _),
        ("qtilde", check_qtilde as fn(&_) -> _),
    ] {
        let s = sweep_jets(check, settings.jet_samples, JET_HALF_BOX, settings.seed)?;
        jets.push(JetRow {
            name,
            samples: s.samples,
            max_abs: s.max_abs,
            max_rel: s.max_rel,
            passed: s.max_rel <= JET_TOLERANCE,
        });
    }

    let coarse = settings.run_config();
    let fine = RunConfig {
        points: 2 * coarse.points,
        snapshot_dt: 0.5 * coarse.snapshot_dt,
        ..coarse.clone()
    };
    let (c, f) = thread::scope(|s| {
        let hc = s.spawn(|| identity_samples(&coarse));
        let hf = s.spawn(|| identity_samples(&fine));
        (join(hc), join(hf))
    });
    let ((cs, cr), (fs, fr)) = (c?, f?);
    let failure = cr.failure.or(fr.failure);
    let mut refinements = Vec::new();
    if failure.is_none() {
        let label = |cfg: &RunConfig| format!("N={} dt={}", cfg.points, cfg.snapshot_dt);
        for which in TimeIdentity::ALL {
            let rc = verify_time_identity(&cs, which, settings.tolerance, label(&coarse))?;
            let rf = verify_time_identity(&fs, which, settings.tolerance, label(&fine))?;
            refinements.push(RefinementStudy::new(rc, rf, settings.min_reduction));
        }
    }
    Ok(IdentityStudy {
        seed: settings.seed,
        jets,
        refinements,
        failure,
    })
}

fn identity_csv(study: &IdentityStudy) -> String {
    let mut out = String::from(
        "identity,resolution,samples,range,max_abs_residual,max_rel_residual,tolerance,reduction,passed\n",
    );
    for j in &study.jets {
        out += &format!(
            "{},seed={},{},[-{h};{h}]^4,{},{},{},,{}\n",
            j.name,
            study.seed,
            j.samples,
            fmt_float(j.max_abs),
            fmt_float(j.max_rel),
            fmt_float(JET_TOLERANCE),
            j.passed,
            h = JET_HALF_BOX
        );
    }
    let row = |r: &IdentityReport, reduction: Option<f64>, passed: bool| {
        format!(
            "{},{},{},[{:.6};{:.6}],{},{},{},{},{}\n",
            r.name,
            r.resolution,
            r.samples,
            r.t_range.0,
            r.t_range.1,
            fmt_float(r.max_abs_residual),
            fmt_float(r.max_rel_residual),
            fmt_float(r.tolerance),
            reduction.map(fmt_float).unwrap_or_default(),
            passed
        )
    };
    for s in &study.refinements {
        out += &row(&s.coarse, None, s.coarse.passed);
        out += &row(&s.fine, Some(s.reduction), s.passed);
    }
    out
}

pub(super) fn cmd_verify_identities(spec: &ExperimentSpec) -> Result<ExitStatus> {
    let study = verify_identities(&spec.settings)?;
    output::write_file(&spec.out.join("identities.csv"), &identity_csv(&study))?;
    for j in &study.jets {
        println!(
            "{} {:<14} {} jets  max_rel {:.3e}  tol {:.0e}",
            if j.passed { "PASS" } else { "FAIL" },
            j.name,
            j.samples,
            j.max_rel,
            JET_TOLERANCE
        );
    }
    if let Some(f) = &study.failure {
        eprintln!("breakdown at t = {}: {}", f.t, f.message);
        return Ok(ExitStatus::Breakdown);
    }
    for s in &study.refinements {
        println!(
            "{} {:<14} t in [{:.3}, {:.3}]  coarse {:.3e}  fine {:.3e}  tol {:.0e}  reduction {:.2} (>= {})",
            if s.passed { "PASS" } else { "FAIL" },
            s.coarse.name,
            s.coarse.t_range.0,
            s.coarse.t_range.1,
            s.coarse.max_abs_residual,
            s.fine.max_abs_residual,
            s.coarse.tolerance,
            s.reduction,
            s.min_reduction
        );
    }
    Ok(if study.passed() {
        ExitStatus::Success
    } else {
        ExitStatus::CheckFailed
    })
}

// ---------------------------------------------------------------------------
// decay-study

/// Frozen thresholds of the decay summary.
pub const SCALING_BAND: (f64, f64) = (0.75, 1.25);
pub const MAX_DECAY_RATIO: f64 = 0.5;
/// Length of the early averaging window `[t_start, t_start + EARLY_SPAN]`.
pub const EARLY_SPAN: f64 = 10.0;
pub const CONTROL_ENERGY_DRIFT: f64 = 1e-6;
pub const CONTROL_FIXED_DENSITY: f64 = 1e-10;
pub const CONTROL_LOC_NORM: f64 = 1e-6;
/// Time after which the control's localized norm must have vanished.
pub const CONTROL_LOC_NORM_AFTER: f64 = 100.0;
/// Distance of the control bump from the origin beyond which the fixed
/// `sech^2(x/5)` window sees nothing above rounding.
pub const CONTROL_CLEARANCE: f64 = 60.0;

/// Mean of `f` over records with `t` in `[t0, t1]`.
fn mean_over(
    records: &[DiagnosticRecord],
    t0: f64,
    t1: f64,
    f: impl Fn(&DiagnosticRecord) -> f64,
) -> f64 {
    let tol = 1e-9 * t1.abs().max(1.0);
    let vals: Vec<f64> = records
        .iter()
        .filter(|r| r.t >= t0 - tol && r.t <= t1 + tol)
        .map(f)
        .collect();
    if vals.is_empty() {
        f64::NAN
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

/// Linear interpolation of `f` in time, clamped to the record span.
fn value_at(records: &[DiagnosticRecord], t: f64, f: impl Fn(&DiagnosticRecord) -> f64) -> f64 {
    let Some(first) = records.first() else {
        return f64::NAN;
    };
    if t <= first.t {
        return f(first);
    }
    for w in records.windows(2) {
        if t <= w[1].t {
            let s = (t - w[0].t) / (w[1].t - w[0].t);
            return (1.0 - s) * f(&w[0]) + s * f(&w[1]);
        }
    }
    f(records.last().expect("nonempty"))
}

fn relative_drift(records: &[DiagnosticRecord], f: impl Fn(&DiagnosticRecord) -> f64) -> f64 {
    let Some(first) = records.first() else {
        return 0.0;
    };
    let f0 = f(first);
    let worst = records
        .iter()
        .map(|r| (f(r) - f0).abs())
        .fold(0.0, f64::max);
    if worst == 0.0 {
        0.0
    } else {
        worst / f0.abs()
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if num == 0.0 && den == 0.0 {
        None
    } else {
        Some(num / den)
    }
}

#[derive(Debug, Clone)]
pub struct DecayRow {
    pub epsilon: f64,
    pub failure: Option<RunFailure>,
    pub final_integra: f64,
    pub early_mean_loc2: f64,
    pub late_mean_loc2: f64,
    /// Late over early mean of `loc_norm^2`; `None` when both vanish.
    pub decay_ratio: Option<f64>,
    pub increment_early: f64,
    pub increment_late: f64,
    pub integra_monotone: bool,
    pub energy_drift: f64,
    pub mass_drift: f64,
    pub candidate_times: Vec<(f64, f64)>,
    pub records: Vec<DiagnosticRecord>,
}

impl DecayRow {
    fn new(epsilon: f64, run: SimulationRun, t_start: f64, horizon: f64) -> Self {
        let rec = run.records;
        let loc2 = |r: &DiagnosticRecord| r.loc_norm * r.loc_norm;
        let integra = |r: &DiagnosticRecord| r.integra_partial;
        let mid = 0.5 * horizon;
        let early_mean_loc2 = mean_over(&rec, t_start, t_start + EARLY_SPAN, loc2);
        let late_mean_loc2 = mean_over(&rec, mid, horizon, loc2);
        Self {
            epsilon,
            failure: run.report.failure,
            final_integra: rec.last().map(integra).unwrap_or(0.0),
            early_mean_loc2,
            late_mean_loc2,
            decay_ratio: ratio(late_mean_loc2, early_mean_loc2),
            increment_early: value_at(&rec, t_start + mid, integra)
                - value_at(&rec, t_start, integra),
            increment_late: value_at(&rec, horizon, integra) - value_at(&rec, mid, integra),
            integra_monotone: rec
                .windows(2)
                .all(|w| w[1].integra_partial >= w[0].integra_partial),
            energy_drift: relative_drift(&rec, |r| r.energy),
            mass_drift: relative_drift(&rec, |r| r.mass),
            candidate_times: candidate_decay_times(&rec),
            records: rec,
        }
    }

    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Final integra of a pair of amplitudes against the quadratic prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub eps_low: f64,
    pub eps_high: f64,
    pub ratio: f64,
    pub expected: f64,
}

#[derive(Debug, Clone)]
pub struct ControlSummary {
    pub failure: Option<RunFailure>,
    pub energy_drift: f64,
    /// Time at which the bump is `CONTROL_CLEARANCE` from the origin.
    pub clearance_time: f64,
    pub max_fixed_density_after: f64,
    pub max_loc_norm_after: f64,
    pub initial_loc_norm_peak: f64,
    pub records: Vec<DiagnosticRecord>,
}

#[derive(Debug, Clone)]
pub struct DecaySummary {
    pub rows: Vec<DecayRow>,
    pub scaling: Vec<ScalingRow>,
    pub control: Option<ControlSummary>,
    pub checks: Vec<Check>,
}

impl DecaySummary {
    pub fn status(&self) -> ExitStatus {
        let broke = self.rows.iter().any(|r| !r.completed())
            || self.control.as_ref().is_some_and(|c| c.failure.is_some());
        if broke {
            ExitStatus::Breakdown
        } else if self.checks.iter().all(|c| c.passed) {
            ExitStatus::Success
        } else {
            ExitStatus::CheckFailed
        }
    }
}

fn control_settings(settings: &Settings) -> Settings {
    Settings {
        family: Family::Traveling,
        amplitude: settings.control_amplitude,
        center: settings.control_center,
        ..settings.clone()
    }
}

fn control_summary(settings: &Settings, run: SimulationRun) -> ControlSummary {
    let rec = run.records;
    let sign = match settings.direction {
        Direction::Right => 1.0,
        Direction::Left => -1.0,
    };
    // bump centre is center + sign * t
    let clearance_time = (CONTROL_CLEARANCE - sign * settings.control_center).max(0.0);
    let max_after = |t0: f64, f: fn(&DiagnosticRecord) -> f64| {
        rec.iter().filter(|r| r.t >= t0).map(f).fold(0.0, f64::max)
    };
    ControlSummary {
        failure: run.report.failure,
        energy_drift: relative_drift(&rec, |r| r.energy),
        clearance_time,
        max_fixed_density_after: max_after(clearance_time, |r| r.fixed_window_density),
        max_loc_norm_after: max_after(CONTROL_LOC_NORM_AFTER, |r| r.loc_norm),
        initial_loc_norm_peak: rec.iter().map(|r| r.loc_norm).fold(0.0, f64::max),
        records: rec,
    }
}

fn run_dir_name(epsilon: f64) -> String {
    format!("eps_{epsilon}")
}

/// Runs the amplitude ladder (and the traveling control) concurrently,
/// writing each run to its own directory under `out` when given, then
/// reduces the results.
pub fn decay_study(settings: &Settings, out: Option<&Path>) -> Result<DecaySummary> {
    if settings.epsilons.is_empty() {
        return Err(BiError::Config("epsilons must not be empty".into()));
    }
    let control_cfg = control_settings(settings);
    let job = |s: &Settings, dir: Option<std::path::PathBuf>| -> Result<SimulationRun> {
        let run = simulate(s)?;
        if let Some(d) = dir {
            write_run(&d, s, &run)?;
        }
        Ok(run)
    };
    let (runs, control) = thread::scope(|scope| {
        let handles: Vec<_> = settings
            .epsilons
            .iter()
            .map(|&eps| {
                let s = settings.with_amplitude(eps);
                let dir = out.map(|o| o.join(run_dir_name(eps)));
                scope.spawn(move || job(&s, dir))
            })
            .collect();
        let control = settings.control.then(|| {
            let dir = out.map(|o| o.join("control"));
            let s = &control_cfg;
            scope.spawn(move || job(s, dir))
        });
        let runs: Vec<_> = handles.into_iter().map(join).collect();
        (runs, control.map(join))
    });

    let mut rows = Vec::new();
    for (&eps, run) in settings.epsilons.iter().zip(runs) {
        rows.push(DecayRow::new(eps, run?, settings.t_start, settings.horizon));
    }
    let control = match control {
        Some(run) => Some(control_summary(&control_cfg, run?)),
        None => None,
    };

    let mut checks = Vec::new();
    let mut scaling = Vec::new();
    let done: Vec<&DecayRow> = rows.iter().filter(|r| r.completed()).collect();
    for (i, lo) in done.iter().enumerate() {
        for hi in &done[i + 1..] {
            if let Some(ratio) = ratio(hi.final_integra, lo.final_integra) {
                let expected = (hi.epsilon / lo.epsilon).powi(2);
                checks.push(Check::within(
                    format!(
                        "integra_scaling eps {} -> {} (ratio/expected)",
                        lo.epsilon, hi.epsilon
                    ),
                    ratio / expected,
                    SCALING_BAND.0,
                    SCALING_BAND.1,
                ));
                scaling.push(ScalingRow {
                    eps_low: lo.epsilon,
                    eps_high: hi.epsilon,
                    ratio,
                    expected,
                });
            }
        }
    }
    for r in &done {
        checks.push(Check {
            name: format!("integra_monotone eps {}", r.epsilon),
            value: r.final_integra,
            threshold: "nondecreasing partials".into(),
            passed: r.integra_monotone,
        });
        if r.final_integra > 0.0 {
            checks.push(Check::at_most(
                format!("integra_late_increment eps {} (late/early)", r.epsilon),
                r.increment_late / r.increment_early,
                1.0,
            ));
        }
        if let Some(d) = r.decay_ratio {
            checks.push(Check::at_most(
                format!("loc_norm_decay eps {} (late/early mean square)", r.epsilon),
                d,
                MAX_DECAY_RATIO,
            ));
        }
    }
    if let Some(c) = control.as_ref().filter(|c| c.failure.is_none()) {
        checks.push(Check::at_most(
            "control_energy_drift",
            c.energy_drift,
            CONTROL_ENERGY_DRIFT,
        ));
        if settings.horizon > c.clearance_time {
            checks.push(Check::at_most(
                format!("control_fixed_window_density t >= {}", c.clearance_time),
                c.max_fixed_density_after,
                CONTROL_FIXED_DENSITY,
            ));
        }
        if settings.horizon >= CONTROL_LOC_NORM_AFTER {
            checks.push(Check::at_most(
                format!("control_loc_norm t >= {CONTROL_LOC_NORM_AFTER}"),
                c.max_loc_norm_after,
                CONTROL_LOC_NORM,
            ));
        }
    }
    Ok(DecaySummary {
        rows,
        scaling,
        control,
        checks,
    })
}

fn decay_csv(summary: &DecaySummary) -> String {
    let mut out = String::from(
        "epsilon,status,final_integra,early_mean_loc2,late_mean_loc2,decay_ratio,increment_early,increment_late,energy_drift,mass_drift\n",
    );
    for r in &summary.rows {
        let status = match &r.failure {
            None => "completed".to_string(),
            Some(f) => format!("breakdown at t={}", f.t),
        };
        out += &format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.epsilon,
            status,
            fmt_float(r.final_integra),
            fmt_float(r.early_mean_loc2),
            fmt_float(r.late_mean_loc2),
            r.decay_ratio.map(fmt_float).unwrap_or_default(),
            fmt_float(r.increment_early),
            fmt_float(r.increment_late),
            fmt_float(r.energy_drift),
            fmt_float(r.mass_drift),
        );
    }
    out
}

fn decay_text(summary: &DecaySummary) -> String {
    let mut out = String::from("integra ratio table\n");
    for s in &summary.scaling {
        out += &format!(
            "  eps {} -> {}: ratio {:.4} expected {:.4}\n",
            s.eps_low, s.eps_high, s.ratio, s.expected
        );
    }
    out += "\ncandidate times (record lows of E_phi, each below half the previous)\n";
    for r in &summary.rows {
        let ts: Vec<String> = r
            .candidate_times
            .iter()
            .map(|(t, _)| format!("{t:.1}"))
            .collect();
        out += &format!("  eps {}: {}\n", r.epsilon, ts.join(" "));
    }
    if let Some(c) = &summary.control {
        out += &format!(
            "\ntraveling control: energy drift {:.3e}, peak loc_norm {:.3e}, loc_norm after t={} {:.3e}, fixed-window density after t={} {:.3e}\n",
            c.energy_drift,
            c.initial_loc_norm_peak,
            CONTROL_LOC_NORM_AFTER,
            c.max_loc_norm_after,
            c.clearance_time,
            c.max_fixed_density_after
        );
    }
    out += "\nchecks\n";
    for c in &summary.checks {
        out += &format!("  {c}\n");
    }
    out
}

pub(super) fn cmd_decay_study(spec: &ExperimentSpec) -> Result<ExitStatus> {
    let summary = decay_study(&spec.settings, Some(&spec.out))?;
    output::write_file(&spec.out.join("summary.csv"), &decay_csv(&summary))?;
    let text = decay_text(&summary);
    output::write_file(&spec.out.join("summary.txt"), &text)?;
    print!("{text}");
    for r in &summary.rows {
        if let Some(f) = &r.failure {
            eprintln!("eps {}: breakdown at t = {}: {}", r.epsilon, f.t, f.message);
        }
    }
    Ok(summary.status())
}

// ---------------------------------------------------------------------------
// convergence

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceLevel {
    pub points: usize,
    pub spacing: f64,
    pub dt: f64,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub levels: Vec<ConvergenceLevel>,
    /// Order between consecutive levels.
    pub orders: Vec<f64>,
    /// Smallest pairwise order; infinite when every error is zero.
    pub observed_order: f64,
}

fn exact_final(config: &RunConfig, grid: &Grid) -> Result<Vec<f64>> {
    match &config.initial {
        InitialCondition::Vacuum => Ok(vec![0.0; grid.len()]),
        init @ InitialCondition::Traveling { .. } => {
            let (p, dir) = init.traveling_profile().expect("traveling");
            Ok(traveling_solution(&p, dir, config.horizon, grid)?.u)
        }
        _ => Err(BiError::Config(
            "convergence needs an exact solution: family must be traveling or vacuum".into(),
        )),
    }
}

fn convergence_level(base: &RunConfig, points: usize) -> Result<ConvergenceLevel> {
    // one snapshot interval, so dt is as close to cfl * h as the span allows
    let config = RunConfig {
        points,
        snapshot_dt: base.horizon - base.t_start,
        ..base.clone()
    };
    config.validate()?;
    let grid = config.grid()?;
    let exact = exact_final(&config, &grid)?;
    let initial = config.initial.build(&grid, config.t_start)?;
    let report = evolve(&config, initial, &mut [])?;
    if let Some(f) = &report.failure {
        return Err(failure_error(f));
    }
    let max_error = report
        .final_state
        .u
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(ConvergenceLevel {
        points,
        spacing: grid.spacing(),
        dt: report.dt,
        max_error,
    })
}

pub fn convergence(settings: &Settings) -> Result<ConvergenceTable> {
    let ladder = &settings.ladder;
    if ladder.len() < 2 {
        return Err(BiError::Structural(format!(
            "convergence order needs at least two levels, got {}",
            ladder.len()
        )));
    }
    if ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BiError::Config(format!(
            "ladder must strictly refine: {ladder:?}"
        )));
    }
    let base = settings.run_config();
    exact_final(&base, &base.grid()?)?;
    let levels = thread::scope(|s| {
        let hs: Vec<_> = ladder
            .iter()
            .map(|&n| {
                let base = &base;
                s.spawn(move || convergence_level(base, n))
            })
            .collect();
        hs.into_iter().map(join).collect::<Result<Vec<_>>>()
    })?;
    let orders: Vec<f64> = levels
        .windows(2)
        .map(|w| {
            if w[0].max_error == 0.0 && w[1].max_error == 0.0 {
                f64::INFINITY
            } else {
                (w[0].max_error / w[1].max_error).ln() / (w[0].spacing / w[1].spacing).ln()
            }
        })
        .collect();
    let observed_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(ConvergenceTable {
        levels,
        orders,
        observed_order,
    })
}

pub(super) fn cmd_convergence(spec: &ExperimentSpec) -> Result<ExitStatus> {
    let table = match convergence(&spec.settings) {
        // an undefined order is a problem with the requested ladder
        Err(BiError::Structural(m)) => return Err(BiError::Config(m)),
        other => other?,
    };
    let mut csv = String::from("points,spacing,dt,max_error,order\n");
    for (i, l) in table.levels.iter().enumerate() {
        let order = if i == 0 {
            String::new()
        } else {
            fmt_float(table.orders[i - 1])
        };
        csv += &format!(
            "{},{},{},{},{}\n",
            l.points,
            fmt_float(l.spacing),
            fmt_float(l.dt),
            fmt_float(l.max_error),
            order
        );
        println!(
            "N {:>6}  h {:.4e}  dt {:.4e}  max error {:.4e}  order {}",
            l.points,
            l.spacing,
            l.dt,
            l.max_error,
            if i == 0 {
                "-".into()
            } else {
                format!("{:.3}", table.orders[i - 1])
            }
        );
    }
    output::write_file(&spec.out.join("convergence.csv"), &csv)?;
    let check = Check::at_least(
        "observed_order",
        table.observed_order,
        spec.settings.min_order,
    );
    println!("{check}");
    Ok(if check.passed {
        ExitStatus::Success
    } else {
        ExitStatus::CheckFailed
    })
}
