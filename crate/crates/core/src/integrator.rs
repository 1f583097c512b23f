//! Classic RK4 time stepping with a fixed CFL-limited step, snapshot-driven
//! observers and breakdown reporting.

use std::time::{Duration, Instant};

use crate::config::RunConfig;
use crate::dynamics::{Backend, BornInfeld, FieldState};
use crate::error::{BiError, Result};
use crate::grid::Grid;

/// Callback invoked on every snapshot.
pub trait Observer {
    fn observe(&mut self, state: &FieldState) -> Result<()>;
}

impl<F> Observer for F
where
    F: FnMut(&FieldState) -> Result<()>,
{
    fn observe(&mut self, state: &FieldState) -> Result<()> {
        self(state)
    }
}

#[derive(Debug, Clone)]
pub struct Stepper {
    system: BornInfeld,
    backend: Backend,
}

impl Stepper {
    pub fn new(system: BornInfeld, backend: Backend) -> Self {
        Self { system, backend }
    }

    pub fn from_config(config: &RunConfig) -> Result<Self> {
        let system = BornInfeld::with_gamma_floor(config.grid()?, config.gamma_floor)?;
        Ok(Self::new(system, config.backend))
    }

    pub fn grid(&self) -> &Grid {
        self.system.grid()
    }

    pub fn system(&self) -> &BornInfeld {
        &self.system
    }

    /// One RK4 step.
    pub fn step(&self, state: &FieldState, dt: f64) -> Result<FieldState> {
        self.step_tracked(state, dt).map(|(s, _)| s)
    }

    /// One RK4 step, also returning the Lorentz density minimum of the
    /// incoming state.
    pub fn step_tracked(&self, state: &FieldState, dt: f64) -> Result<(FieldState, f64)> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(BiError::Config(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let k1 = self.system.rates(state, self.backend)?;
        let min_gamma = k1.min_gamma;
        let s2 = shifted(state, &k1.du, &k1.dv, 0.5 * dt);
        let k2 = self.system.rates(&s2, self.backend)?;
        let s3 = shifted(state, &k2.du, &k2.dv, 0.5 * dt);
        let k3 = self.system.rates(&s3, self.backend)?;
        let s4 = shifted(state, &k3.du, &k3.dv, dt);
        let k4 = self.system.rates(&s4, self.backend)?;

        let w = dt / 6.0;
        let combine = |base: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
            (0..base.len())
                .map(|i| base[i] + w * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
                .collect()
        };
        let next = FieldState {
            t: state.t + dt,
            u: combine(&state.u, &k1.du, &k2.du, &k3.du, &k4.du),
            v: combine(&state.v, &k1.dv, &k2.dv, &k3.dv, &k4.dv),
        };
        next.validate(self.grid())?;
        Ok((next, min_gamma))
    }
}

fn shifted(state: &FieldState, du: &[f64], dv: &[f64], dt: f64) -> FieldState {
    FieldState {
        t: state.t + dt,
        u: state.u.iter().zip(du).map(|(a, b)| a + dt * b).collect(),
        v: state.v.iter().zip(dv).map(|(a, b)| a + dt * b).collect(),
    }
}

/// Why a run stopped before its horizon.
#[derive(Debug, Clone, PartialEq)]
pub enum FailureKind {
    Breakdown,
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct RunFailure {
    pub kind: FailureKind,
    pub t: f64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    /// Final state, or the last valid state when the run failed.
    pub final_state: FieldState,
    pub steps: usize,
    pub dt: f64,
    pub min_gamma: f64,
    pub wall_time: Duration,
    pub failure: Option<RunFailure>,
}

impl RunReport {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Time levels of a run: a fixed step `dt <= cfl h` that divides the
/// snapshot interval, with a shortened final interval if the horizon is not
/// a whole number of snapshots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub t_start: f64,
    pub horizon: f64,
    pub snapshot_dt: f64,
    pub steps_per_snapshot: usize,
    pub full_snapshots: usize,
}

impl Schedule {
    pub fn new(config: &RunConfig, spacing: f64) -> Self {
        let dt_max = config.cfl * spacing;
        let steps_per_snapshot = (config.snapshot_dt / dt_max * (1.0 - 1e-12))
            .ceil()
            .max(1.0) as usize;
        let span = config.horizon - config.t_start;
        let full_snapshots = (span / config.snapshot_dt * (1.0 + 1e-12)).floor() as usize;
        Self {
            t_start: config.t_start,
            horizon: config.horizon,
            snapshot_dt: config.snapshot_dt,
            steps_per_snapshot,
            full_snapshots,
        }
    }

    pub fn dt(&self) -> f64 {
        self.snapshot_dt / self.steps_per_snapshot as f64
    }

    /// Snapshot times including `t_start` and the horizon.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = (0..=self.full_snapshots)
            .map(|k| self.t_start + k as f64 * self.snapshot_dt)
            .collect();
        let last = times.last_mut().expect("nonempty");
        if self.horizon - *last > 1e-9 * self.snapshot_dt {
            times.push(self.horizon);
        } else {
            *last = self.horizon;
        }
        times
    }
}

/// Marches `initial` from `config.t_start` to `config.horizon`, calling every
/// observer at each snapshot (including the first and last state).
///
/// Breakdown and non-finite values end the run early and are reported in
/// [`RunReport::failure`] together with the last valid state; other errors
/// propagate.
pub fn evolve(
    config: &RunConfig,
    initial: FieldState,
    observers: &mut [&mut dyn Observer],
) -> Result<RunReport> {
    config.validate()?;
    let stepper = Stepper::from_config(config)?;
    let grid = stepper.grid().clone();
    initial.validate(&grid)?;
    let schedule = Schedule::new(config, grid.spacing());
    let clock = Instant::now();

    let mut state = initial;
    state.t = config.t_start;
    let mut steps = 0usize;
    let mut min_gamma = f64::INFINITY;

    let fail = |state: FieldState, steps, min_gamma: f64, err: BiError, clock: Instant| {
        let kind = match err {
            BiError::Breakdown { .. } => FailureKind::Breakdown,
            BiError::Structural(_) => FailureKind::NonFinite,
            other => return Err(other),
        };
        Ok(RunReport {
            failure: Some(RunFailure {
                kind,
                t: state.t,
                message: err.to_string(),
            }),
            final_state: state,
            steps,
            dt: schedule.dt(),
            min_gamma: if min_gamma.is_finite() {
                min_gamma
            } else {
                0.0
            },
            wall_time: clock.elapsed(),
        })
    };

    let times = schedule.snapshot_times();
    for (k, &t_snap) in times.iter().enumerate() {
        if k > 0 {
            let span = t_snap - times[k - 1];
            let n = if k <= schedule.full_snapshots {
                schedule.steps_per_snapshot
            } else {
                (span / (config.cfl * grid.spacing())).ceil().max(1.0) as usize
            };
            let dt = span / n as f64;
            for _ in 0..n {
                match stepper.step_tracked(&state, dt) {
                    Ok((next, g)) => {
                        min_gamma = min_gamma.min(g);
                        state = next;
                        steps += 1;
                    }
                    Err(e) => return fail(state, steps, min_gamma, e, clock),
                }
            }
            // pin the clock to the snapshot time instead of the summed steps
            state.t = t_snap;
        }
        for obs in observers.iter_mut() {
            if let Err(e) = obs.observe(&state) {
                return fail(state, steps, min_gamma, e, clock);
            }
        }
    }

    match stepper.system().min_gamma(&state) {
        Ok(g) => min_gamma = min_gamma.min(g),
        Err(e) => return fail(state, steps, min_gamma, e, clock),
    }
    if min_gamma < config.gamma_floor {
        let err = BiError::Breakdown {
            t: state.t,
            x: f64::NAN,
            reason: format!("final gamma {min_gamma:.6e} below floor"),
        };
        return fail(state, steps, min_gamma, err, clock);
    }
    Ok(RunReport {
        final_state: state,
        steps,
        dt: schedule.dt(),
        min_gamma,
        wall_time: clock.elapsed(),
        failure: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::InitialCondition;
    use crate::dynamics::{traveling_solution, Direction, GaussianProfile};

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn vacuum_step_is_vacuum() {
        let grid = Grid::new(10.0, 64).unwrap();
        let st = Stepper::new(BornInfeld::new(grid.clone()), Backend::Explicit);
        let s = st.step(&FieldState::vacuum(&grid, 2.0), 0.05).unwrap();
        assert_eq!(s.t, 2.05);
        assert!(s.u.iter().chain(&s.v).all(|&v| v == 0.0));
    }

    #[test]
    fn one_step_tracks_exact_translate() {
        let grid = Grid::new(40.0, 4096).unwrap();
        let p = GaussianProfile::new(0.1, 0.0, 1.0);
        let s0 = traveling_solution(&p, Direction::Right, 0.0, &grid).unwrap();
        for backend in [Backend::Explicit, Backend::Flux] {
            let st = Stepper::new(BornInfeld::new(grid.clone()), backend);
            let s1 = st.step(&s0, 0.01).unwrap();
            let exact = traveling_solution(&p, Direction::Right, 0.01, &grid).unwrap();
            assert!(max_abs_diff(&s1.u, &exact.u) <= 1e-9);
        }
    }

    #[test]
    fn time_reversal() {
        let grid = Grid::new(20.0, 1024).unwrap();
        let st = Stepper::new(BornInfeld::new(grid.clone()), Backend::Explicit);
        let s0 = FieldState {
            t: 0.0,
            u: grid.sample(|x| 0.2 * (-x * x).exp()),
            v: grid.sample(|x| 0.1 * (-(x - 0.5) * (x - 0.5)).exp()),
        };
        let gap = |dt: f64| {
            let s1 = st.step(&s0, dt).unwrap();
            let back = FieldState {
                t: 0.0,
                u: s1.u.clone(),
                v: s1.v.iter().map(|v| -v).collect(),
            };
            let s2 = st.step(&back, dt).unwrap();
            let mut e = max_abs_diff(&s2.u, &s0.u);
            for i in 0..s0.v.len() {
                e = e.max((s2.v[i] + s0.v[i]).abs());
            }
            e
        };
        let (g1, g2) = (gap(0.02), gap(0.01));
        assert!(g1 < 1e-8, "{g1}");
        // local error of a reversed pair is O(dt^5)
        assert!(g1 / g2 > 24.0, "{}", g1 / g2);
    }

    #[test]
    fn schedule_divides_snapshots() {
        let cfg = RunConfig {
            t_start: 2.0,
            horizon: 3.0,
            snapshot_dt: 0.3,
            ..RunConfig::default()
        };
        let sch = Schedule::new(&cfg, 0.1);
        assert_eq!(sch.steps_per_snapshot, 8);
        assert!((sch.dt() - 0.0375).abs() < 1e-15);
        let times = sch.snapshot_times();
        assert_eq!(times.len(), 5);
        assert_eq!(*times.last().unwrap(), 3.0);
    }

    #[test]
    fn vacuum_run_stays_vacuum() {
        let cfg = RunConfig {
            half_length: 20.0,
            points: 256,
            horizon: 10.0,
            initial: InitialCondition::Vacuum,
            ..RunConfig::default()
        };
        let grid = cfg.grid().unwrap();
        let mut count = 0;
        let mut obs = |_: &FieldState| -> Result<()> {
            count += 1;
            Ok(())
        };
        let ic = cfg.initial.build(&grid, cfg.t_start).unwrap();
        let r = evolve(&cfg, ic, &mut [&mut obs]).unwrap();
        assert!(r.completed());
        assert_eq!(r.min_gamma, 1.0);
        assert_eq!(r.final_state.t, 10.0);
        assert!(r.final_state.u.iter().all(|&v| v == 0.0));
        assert_eq!(count, 81);
    }

    #[test]
    fn small_gaussian_keeps_gamma_near_one() {
        let cfg = RunConfig {
            half_length: 60.0,
            points: 2048,
            horizon: 50.0,
            snapshot_dt: 1.0,
            ..RunConfig::default()
        };
        let grid = cfg.grid().unwrap();
        let ic = cfg.initial.build(&grid, cfg.t_start).unwrap();
        let r = evolve(&cfg, ic, &mut []).unwrap();
        assert!(r.completed());
        assert!(r.min_gamma >= 0.99, "{}", r.min_gamma);
    }

    #[test]
    fn uniform_velocity_breaks_down_immediately() {
        let cfg = RunConfig {
            half_length: 20.0,
            points: 128,
            horizon: 4.0,
            initial: InitialCondition::UniformVelocity { value: 0.999 },
            ..RunConfig::default()
        };
        let grid = cfg.grid().unwrap();
        let ic = cfg.initial.build(&grid, cfg.t_start).unwrap();
        let r = evolve(&cfg, ic.clone(), &mut []).unwrap();
        let f = r.failure.expect("breakdown expected");
        assert_eq!(f.kind, FailureKind::Breakdown);
        assert_eq!(f.t, 2.0);
        assert_eq!(r.steps, 0);
        assert_eq!(r.final_state, ic);
    }

    #[test]
    fn rejects_invalid_config() {
        let cfg = RunConfig {
            cfl: 0.9,
            ..RunConfig::default()
        };
        let grid = cfg.grid().unwrap();
        let ic = FieldState::vacuum(&grid, 2.0);
        assert!(matches!(evolve(&cfg, ic, &mut []), Err(BiError::Config(_))));
        let cfg = RunConfig::default();
        let bad = FieldState::vacuum(&Grid::new(1.0, 16).unwrap(), 2.0);
        assert!(matches!(
            evolve(&cfg, bad, &mut []),
            Err(BiError::Structural(_))
        ));
    }
}
