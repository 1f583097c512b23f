//! First-order form of the Born-Infeld equation
//!
//! ```text
//! (1 - u_t^2) u_xx + 2 u_x u_t u_tx - (1 + u_x^2) u_tt = 0
//! ```
//!
//! evolved as `u_t = v`, `v_t = [(1 - v^2) u_xx + 2 u_x v v_x] / (1 + u_x^2)`.
//! A second backend advances the same system through the conservation form
//! `d_t(v / gamma) = d_x(u_x / gamma)` and is used to cross-check the first.

use serde::{Deserialize, Serialize};

use crate::error::{BiError, Result};
use crate::grid::Grid;

/// Minimum admissible Lorentz density. Below it the run has left the small
/// data regime and is aborted.
pub const GAMMA_FLOOR: f64 = 0.5;

/// Sampled `(u, u_t)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FieldState {
    pub fn vacuum(grid: &Grid, t: f64) -> Self {
        Self {
            t,
            u: vec![0.0; grid.len()],
            v: vec![0.0; grid.len()],
        }
    }

    /// Checks lengths against `grid` and that every entry is finite.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        grid.check_len(&self.u)?;
        grid.check_len(&self.v)?;
        if !self.t.is_finite() {
            return Err(BiError::Structural(format!("non-finite time {}", self.t)));
        }
        if let Some(i) = self
            .u
            .iter()
            .zip(&self.v)
            .position(|(a, b)| !(a.is_finite() && b.is_finite()))
        {
            return Err(BiError::Structural(format!(
                "non-finite field value at node {i} (x = {}), t = {}",
                grid.x(i),
                self.t
            )));
        }
        Ok(())
    }

    /// Mirror image `x -> -x`: node `i` maps to node `(N - i) mod N`.
    pub fn reflected(&self) -> Self {
        let reflect = |f: &[f64]| {
            let n = f.len();
            (0..n).map(|i| f[(n - i) % n]).collect()
        };
        Self {
            t: self.t,
            u: reflect(&self.u),
            v: reflect(&self.v),
        }
    }
}

/// Pointwise derivative data `(u_t, u_x, u_tx, u_xx, u_tt)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub ut: f64,
    pub ux: f64,
    pub utx: f64,
    pub uxx: f64,
    pub utt: f64,
}

impl Jet {
    /// Builds the jet whose `u_tt` is fixed by the equation.
    pub fn on_shell(ut: f64, ux: f64, utx: f64, uxx: f64) -> Self {
        Self {
            ut,
            ux,
            utx,
            uxx,
            utt: pde_utt(ut, ux, utx, uxx),
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::on_shell(k * self.ut, k * self.ux, k * self.utx, k * self.uxx)
    }

    /// `1 + u_x^2 - u_t^2`.
    pub fn gamma_sq(&self) -> f64 {
        1.0 + self.ux * self.ux - self.ut * self.ut
    }
}

/// Explicit-form or conservation-form right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Explicit,
    Flux,
}

/// Lorentz density `gamma = sqrt(1 + u_x^2 - u_t^2)`.
pub fn lorentz_density(ux: f64, ut: f64) -> Result<f64> {
    let radicand = 1.0 + ux * ux - ut * ut;
    if !(radicand > 0.0) {
        return Err(BiError::Breakdown {
            t: f64::NAN,
            x: f64::NAN,
            reason: format!("1 + u_x^2 - u_t^2 = {radicand:.6e} is not positive"),
        });
    }
    Ok(radicand.sqrt())
}

/// The equation solved for `u_tt`:
/// `[(1 - u_t^2) u_xx + 2 u_x u_t u_tx] / (1 + u_x^2)`.
#[inline]
pub fn pde_utt(ut: f64, ux: f64, utx: f64, uxx: f64) -> f64 {
    ((1.0 - ut * ut) * uxx + 2.0 * ux * ut * utx) / (1.0 + ux * ux)
}

/// Right-hand sides together with the smallest Lorentz density seen.
#[derive(Debug, Clone)]
pub struct Rates {
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
    pub min_gamma: f64,
}

/// The Born-Infeld system on a fixed grid.
#[derive(Debug, Clone)]
pub struct BornInfeld {
    grid: Grid,
    gamma_floor: f64,
}

impl BornInfeld {
    pub fn new(grid: Grid) -> Self {
        Self {
            grid,
            gamma_floor: GAMMA_FLOOR,
        }
    }

    pub fn with_gamma_floor(grid: Grid, gamma_floor: f64) -> Result<Self> {
        if !(gamma_floor > 0.0 && gamma_floor <= 1.0) {
            return Err(BiError::Config(format!(
                "gamma floor must lie in (0, 1], got {gamma_floor}"
            )));
        }
        Ok(Self { grid, gamma_floor })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn gamma_floor(&self) -> f64 {
        self.gamma_floor
    }

    fn breakdown(&self, state: &FieldState, i: usize, reason: String) -> BiError {
        BiError::Breakdown {
            t: state.t,
            x: self.grid.x(i),
            reason,
        }
    }

    /// Smallest `gamma^2` over the grid, failing on the first node below the
    /// floor.
    fn check_floor(&self, state: &FieldState, ux: &[f64]) -> Result<f64> {
        let floor_sq = self.gamma_floor * self.gamma_floor;
        let mut min_sq = f64::INFINITY;
        for (i, (&a, &b)) in ux.iter().zip(&state.v).enumerate() {
            let g2 = 1.0 + a * a - b * b;
            if !(g2 >= floor_sq) {
                return Err(self.breakdown(
                    state,
                    i,
                    format!("gamma^2 = {g2:.6e} below floor {floor_sq:.3e}"),
                ));
            }
            min_sq = min_sq.min(g2);
        }
        Ok(min_sq)
    }

    /// Explicit form: `du = v`, `dv = [(1 - v^2) u_xx + 2 u_x v v_x] / (1 + u_x^2)`
    /// with `v_x` taken from the stored `v`.
    pub fn rhs(&self, state: &FieldState) -> Result<(Vec<f64>, Vec<f64>)> {
        let r = self.rates(state, Backend::Explicit)?;
        Ok((r.du, r.dv))
    }

    /// Conservation form: `p = v / gamma` evolves by `p_t = d1(u_x / gamma)`
    /// and `v_t` is recovered from the chain rule at fixed `u_x`.
    pub fn rhs_flux(&self, state: &FieldState) -> Result<(Vec<f64>, Vec<f64>)> {
        let r = self.rates(state, Backend::Flux)?;
        Ok((r.du, r.dv))
    }

    pub fn rates(&self, state: &FieldState, backend: Backend) -> Result<Rates> {
        state.validate(&self.grid)?;
        let grid = &self.grid;
        let n = grid.len();
        let ux = grid.d1(&state.u)?;
        let min_sq = self.check_floor(state, &ux)?;
        let vx = grid.d1(&state.v)?;
        let mut dv = vec![0.0; n];
        match backend {
            Backend::Explicit => {
                let uxx = grid.d2(&state.u)?;
                for i in 0..n {
                    let (a, b) = (ux[i], state.v[i]);
                    dv[i] = pde_utt(b, a, vx[i], uxx[i]);
                }
            }
            Backend::Flux => {
                let mut flux = vec![0.0; n];
                for i in 0..n {
                    let (a, b) = (ux[i], state.v[i]);
                    let g = (1.0 + a * a - b * b).sqrt();
                    let p = b / g;
                    if !(p.abs() < 1.0) {
                        return Err(self.breakdown(
                            state,
                            i,
                            format!("momentum v/gamma = {p:.6e} outside (-1, 1)"),
                        ));
                    }
                    flux[i] = a / g;
                }
                let dp = grid.d1(&flux)?;
                for i in 0..n {
                    let (a, b) = (ux[i], state.v[i]);
                    let g2 = 1.0 + a * a - b * b;
                    let g3 = g2 * g2.sqrt();
                    dv[i] = (g3 * dp[i] + b * a * vx[i]) / (1.0 + a * a);
                }
            }
        }
        Ok(Rates {
            du: state.v.clone(),
            dv,
            min_gamma: min_sq.sqrt(),
        })
    }

    /// Smallest Lorentz density over the grid; no floor check.
    pub fn min_gamma(&self, state: &FieldState) -> Result<f64> {
        let ux = self.grid.d1(&state.u)?;
        Ok(ux
            .iter()
            .zip(&state.v)
            .map(|(a, b)| 1.0 + a * a - b * b)
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
            .sqrt())
    }
}

/// Smooth profile for exact traveling solutions `u = phi(x +- t)`.
pub trait Profile {
    fn value(&self, s: f64) -> f64;
    fn slope(&self, s: f64) -> f64;
    fn curvature(&self, s: f64) -> f64;
    /// Interval outside of which the profile is zero to double precision.
    fn support(&self) -> (f64, f64);
}

/// `a exp(-(s - c)^2 / w^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianProfile {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl GaussianProfile {
    /// Beyond this many widths the Gaussian is below `1e-15` relative.
    pub const SUPPORT_WIDTHS: f64 = 6.0;

    pub fn new(amplitude: f64, center: f64, width: f64) -> Self {
        Self {
            amplitude,
            center,
            width,
        }
    }
}

impl Profile for GaussianProfile {
    fn value(&self, s: f64) -> f64 {
        let z = (s - self.center) / self.width;
        self.amplitude * (-z * z).exp()
    }

    fn slope(&self, s: f64) -> f64 {
        let z = (s - self.center) / self.width;
        -2.0 * z / self.width * self.value(s)
    }

    fn curvature(&self, s: f64) -> f64 {
        let z = (s - self.center) / self.width;
        (4.0 * z * z - 2.0) / (self.width * self.width) * self.value(s)
    }

    fn support(&self) -> (f64, f64) {
        let r = Self::SUPPORT_WIDTHS * self.width;
        (self.center - r, self.center + r)
    }
}

/// Direction of a traveling solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `phi(x + t)`
    Left,
    /// `phi(x - t)`
    Right,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Left => 1.0,
            Direction::Right => -1.0,
        }
    }
}

/// Exact solution `u = phi(x + s t)`, `u_t = s phi'(x + s t)` with `s = +-1`.
pub fn traveling_solution(
    profile: &impl Profile,
    direction: Direction,
    t: f64,
    grid: &Grid,
) -> Result<FieldState> {
    check_traveling_support(profile, direction, t, grid)?;
    let s = direction.sign();
    Ok(FieldState {
        t,
        u: grid.sample(|x| profile.value(x + s * t)),
        v: grid.sample(|x| s * profile.slope(x + s * t)),
    })
}

/// Fails if the translated support leaves `[-L, L)` at time `t`.
pub fn check_traveling_support(
    profile: &impl Profile,
    direction: Direction,
    t: f64,
    grid: &Grid,
) -> Result<()> {
    let (a, b) = profile.support();
    let shift = -direction.sign() * t;
    let (lo, hi) = (a + shift, b + shift);
    let l = grid.half_length();
    if lo < -l || hi >= l {
        return Err(BiError::Config(format!(
            "traveling profile support [{lo:.3}, {hi:.3}] at t = {t} escapes the box [-{l}, {l})"
        )));
    }
    Ok(())
}
