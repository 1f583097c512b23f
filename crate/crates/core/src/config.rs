//! Run configuration: grid, horizon, initial data and the window constants.

use serde::{Deserialize, Serialize};

use crate::diagnostics::FixedWindow;
use crate::dynamics::{
    check_traveling_support, traveling_solution, Backend, Direction, FieldState, GaussianProfile,
    Profile, GAMMA_FLOOR,
};
use crate::error::{BiError, Result};
use crate::grid::Grid;
use crate::weights::WeightFamily;

/// Initial-data families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InitialCondition {
    Vacuum,
    /// `u = eps g`, `u_t = eps * velocity_scale * g` with
    /// `g = exp(-((x - center) / width)^2)`.
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
        velocity_scale: f64,
    },
    /// Exact traveling solution `u = eps g(x +- t)`.
    Traveling {
        amplitude: f64,
        center: f64,
        width: f64,
        direction: Direction,
    },
    /// `u = 0`, `u_t = value` everywhere. Used to exercise the breakdown guard.
    UniformVelocity {
        value: f64,
    },
}

impl InitialCondition {
    pub fn amplitude(&self) -> f64 {
        match *self {
            InitialCondition::Vacuum => 0.0,
            InitialCondition::Gaussian { amplitude, .. }
            | InitialCondition::Traveling { amplitude, .. } => amplitude,
            InitialCondition::UniformVelocity { value } => value.abs(),
        }
    }

    pub fn traveling_profile(&self) -> Option<(GaussianProfile, Direction)> {
        match *self {
            InitialCondition::Traveling {
                amplitude,
                center,
                width,
                direction,
            } => Some((GaussianProfile::new(amplitude, center, width), direction)),
            _ => None,
        }
    }

    /// Samples the data at time `t0` on `grid`.
    pub fn build(&self, grid: &Grid, t0: f64) -> Result<FieldState> {
        Ok(match *self {
            InitialCondition::Vacuum => FieldState::vacuum(grid, t0),
            InitialCondition::Gaussian {
                amplitude,
                center,
                width,
                velocity_scale,
            } => {
                let g = GaussianProfile::new(amplitude, center, width);
                FieldState {
                    t: t0,
                    u: grid.sample(|x| g.value(x)),
                    v: grid.sample(|x| velocity_scale * g.value(x)),
                }
            }
            InitialCondition::Traveling { .. } => {
                let (p, dir) = self.traveling_profile().expect("traveling variant");
                traveling_solution(&p, dir, t0, grid)?
            }
            InitialCondition::UniformVelocity { value } => FieldState {
                t: t0,
                u: vec![0.0; grid.len()],
                v: vec![value; grid.len()],
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub half_length: f64,
    pub points: usize,
    pub t_start: f64,
    pub horizon: f64,
    pub cfl: f64,
    /// Time between observer calls.
    pub snapshot_dt: f64,
    pub initial: InitialCondition,
    /// The constant `C` of the scaling window.
    pub window_constant: f64,
    pub fixed_window: FixedWindow,
    pub backend: Backend,
    pub gamma_floor: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            half_length: 250.0,
            points: 8192,
            t_start: 2.0,
            horizon: 200.0,
            cfl: 0.4,
            snapshot_dt: 0.1,
            initial: InitialCondition::Gaussian {
                amplitude: 0.01,
                center: 0.0,
                width: 1.0,
                velocity_scale: 1.0,
            },
            window_constant: 1.0,
            fixed_window: FixedWindow::Sech2 { lambda0: 5.0 },
            backend: Backend::Explicit,
            gamma_floor: GAMMA_FLOOR,
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.half_length, self.points)
    }

    pub fn weights(&self) -> Result<WeightFamily> {
        WeightFamily::new(self.window_constant)
    }

    /// Checks the configuration invariants and that compactly supported
    /// data stay away from the periodic seam up to the horizon.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(BiError::Config(m));
        let grid = self.grid()?;
        self.weights()?;
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return fail(format!("cfl must lie in (0, 0.5], got {}", self.cfl));
        }
        if !(self.t_start >= 0.0 && self.t_start.is_finite()) {
            return fail(format!("t_start must be >= 0, got {}", self.t_start));
        }
        if !(self.horizon > self.t_start && self.horizon.is_finite()) {
            return fail(format!(
                "horizon {} must exceed t_start {}",
                self.horizon, self.t_start
            ));
        }
        if !(self.snapshot_dt > 0.0 && self.snapshot_dt.is_finite()) {
            return fail(format!(
                "snapshot_dt must be positive, got {}",
                self.snapshot_dt
            ));
        }
        if !(self.gamma_floor > 0.0 && self.gamma_floor <= 1.0) {
            return fail(format!(
                "gamma_floor must lie in (0, 1], got {}",
                self.gamma_floor
            ));
        }
        self.fixed_window.validate()?;
        match self.initial {
            InitialCondition::Gaussian {
                amplitude,
                center,
                width,
                velocity_scale,
            } => {
                if !(amplitude >= 0.0 && width > 0.0 && velocity_scale.is_finite()) {
                    return fail("gaussian data need amplitude >= 0 and width > 0".into());
                }
                // unit-speed signals leave the initial support in both directions
                let reach = center.abs()
                    + GaussianProfile::SUPPORT_WIDTHS * width
                    + (self.horizon - self.t_start);
                if reach >= self.half_length {
                    return fail(format!(
                        "signals reach |x| = {reach:.3} by the horizon; half_length {} is too small",
                        self.half_length
                    ));
                }
            }
            InitialCondition::Traveling {
                amplitude, width, ..
            } => {
                if !(amplitude >= 0.0 && width > 0.0) {
                    return fail("traveling data need amplitude >= 0 and width > 0".into());
                }
                let (p, dir) = self.initial.traveling_profile().expect("traveling");
                check_traveling_support(&p, dir, self.t_start, &grid)?;
                check_traveling_support(&p, dir, self.horizon, &grid)?;
            }
            InitialCondition::UniformVelocity { value } => {
                if !value.is_finite() {
                    return fail("uniform velocity must be finite".into());
                }
            }
            InitialCondition::Vacuum => {}
        }
        Ok(())
    }
}
