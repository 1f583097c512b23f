//! Functionals sampled along a run: the virial functionals, the `sech^4`
//! weighted energy, conserved mass and energy, the localized norm on the
//! decay window, and the time-integrated local energy accumulators.
//!
//! Small-amplitude combinations such as `(1 + u_x^2) / gamma - 1` are
//! evaluated in cancellation-free form so that their relative accuracy does
//! not degrade as the amplitude goes to zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{FieldState, GAMMA_FLOOR};
use crate::error::{BiError, Result};
use crate::grid::Grid;
use crate::integrator::Observer;
use crate::weights::{energy_weight, profile, profile_deriv, WeightFamily};

/// Side of the admissible box for the pointwise inequalities: `|u_x|, |u_t| <= 0.3`.
pub const CERTIFIED_AMPLITUDE: f64 = 0.3;

/// `(1 + a) / sqrt(1 + a - b) - 1` with `a = u_x^2`, `b = u_t^2`.
#[inline]
pub fn energy_density_from_squares(a: f64, b: f64, gamma: f64) -> f64 {
    (a + a * a + b) / (gamma * (1.0 + a + gamma))
}

/// `1 - (1 - b) / sqrt(1 + a - b)`.
#[inline]
pub fn virial_density_from_squares(a: f64, b: f64, gamma: f64) -> f64 {
    ((a - b) / (gamma + 1.0) + b) / gamma
}

/// A fixed (time-independent) localization weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FixedWindow {
    /// `sech^2(x / lambda0)`
    Sech2 { lambda0: f64 },
    /// `exp(-c0 |x|)`
    Exponential { c0: f64 },
}

impl FixedWindow {
    pub fn validate(&self) -> Result<()> {
        let p = match *self {
            FixedWindow::Sech2 { lambda0 } => lambda0,
            FixedWindow::Exponential { c0 } => c0,
        };
        if !(p > 0.0 && p.is_finite()) {
            return Err(BiError::Config(format!(
                "fixed window parameter must be positive, got {p}"
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn weight(&self, x: f64) -> f64 {
        match *self {
            FixedWindow::Sech2 { lambda0 } => profile_deriv(x / lambda0),
            FixedWindow::Exponential { c0 } => (-c0 * x.abs()).exp(),
        }
    }
}

/// A state together with its derived pointwise quantities.
#[derive(Debug)]
pub struct Snapshot<'a> {
    pub grid: &'a Grid,
    pub state: &'a FieldState,
    pub ux: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl<'a> Snapshot<'a> {
    /// Fails with a breakdown error if `gamma` drops below the standard floor.
    pub fn new(grid: &'a Grid, state: &'a FieldState) -> Result<Self> {
        Self::with_floor(grid, state, GAMMA_FLOOR)
    }

    pub fn with_floor(grid: &'a Grid, state: &'a FieldState, floor: f64) -> Result<Self> {
        state.validate(grid)?;
        let ux = grid.d1(&state.u)?;
        let mut gamma = Vec::with_capacity(ux.len());
        for (i, (&a, &b)) in ux.iter().zip(&state.v).enumerate() {
            let g2 = 1.0 + a * a - b * b;
            if !(g2 >= floor * floor) {
                return Err(BiError::Breakdown {
                    t: state.t,
                    x: grid.x(i),
                    reason: format!("gamma^2 = {g2:.6e} below floor {:.3e}", floor * floor),
                });
            }
            gamma.push(g2.sqrt());
        }
        Ok(Self {
            grid,
            state,
            ux,
            gamma,
        })
    }

    fn sum(&self, mut f: impl FnMut(f64, f64, f64, f64) -> f64) -> f64 {
        let v = &self.state.v;
        self.grid
            .quad_with(|i, x| f(x, self.ux[i], v[i], self.gamma[i]))
    }

    /// `-int tanh(x / lambda) u_t u_x / gamma`
    pub fn virial_i(&self, lambda: f64) -> f64 {
        -self.sum(|x, ux, v, g| profile(x / lambda) * v * ux / g)
    }

    /// `-int tanh(x / lambda) u_t u_x / (1 + u_x^2)`
    pub fn virial_j(&self, lambda: f64) -> f64 {
        -self.sum(|x, ux, v, _| profile(x / lambda) * v * ux / (1.0 + ux * ux))
    }

    /// `int sech^4(x / lambda) ((1 + u_x^2) / gamma - 1)`
    pub fn weighted_energy(&self, lambda: f64) -> f64 {
        self.sum(|x, ux, v, g| {
            energy_weight(x / lambda) * energy_density_from_squares(ux * ux, v * v, g)
        })
    }

    pub fn mass(&self) -> f64 {
        self.sum(|_, _, v, g| v / g)
    }

    pub fn energy(&self) -> f64 {
        self.sum(|_, ux, v, g| energy_density_from_squares(ux * ux, v * v, g))
    }

    /// `int (u_x^2 + u_t^2)` over the whole box.
    pub fn quadratic_energy(&self) -> f64 {
        self.sum(|_, ux, v, _| ux * ux + v * v)
    }

    /// Sharp-cutoff `(int_{|x| < lambda} u_x^2 + u_t^2)^{1/2}`.
    pub fn localized_norm(&self, lambda: f64) -> f64 {
        self.sum(|x, ux, v, _| {
            if x.abs() < lambda {
                ux * ux + v * v
            } else {
                0.0
            }
        })
        .sqrt()
    }

    /// `int sech^2(x / lambda) (u_x^2 + u_t^2)`
    pub fn sech2_local_energy(&self, lambda: f64) -> f64 {
        self.sum(|x, ux, v, _| profile_deriv(x / lambda) * (ux * ux + v * v))
    }

    pub fn fixed_window_energy(&self, window: &FixedWindow) -> f64 {
        self.sum(|x, ux, v, _| window.weight(x) * (ux * ux + v * v))
    }

    /// `(1/2) int sech^4 (u_x^2 + u_t^2)` and `int sech^4 (u_x^4 + u_t^4)`.
    pub fn weighted_quadratic_quartic(&self, lambda: f64) -> (f64, f64) {
        let q = self.sum(|x, ux, v, _| 0.5 * energy_weight(x / lambda) * (ux * ux + v * v));
        let r = self.sum(|x, ux, v, _| energy_weight(x / lambda) * (ux.powi(4) + v.powi(4)));
        (q, r)
    }

    pub fn sup_ux(&self) -> f64 {
        self.ux.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_v(&self) -> f64 {
        self.state.v.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn gamma_min(&self) -> f64 {
        self.gamma.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Discrete homogeneous `H^2 x H^1` size `(int u_x^2 + u_xx^2 + u_t^2 + u_tx^2)^{1/2}`.
    pub fn sobolev_proxy(&self) -> Result<f64> {
        let uxx = self.grid.d2(&self.state.u)?;
        let vx = self.grid.d1(&self.state.v)?;
        let v = &self.state.v;
        Ok(self
            .grid
            .quad_with(|i, _| self.ux[i].powi(2) + uxx[i].powi(2) + v[i].powi(2) + vx[i].powi(2))
            .sqrt())
    }
}

pub fn virial_i(grid: &Grid, state: &FieldState, weights: &WeightFamily) -> Result<f64> {
    let lambda = weights.lambda(state.t)?;
    Ok(Snapshot::new(grid, state)?.virial_i(lambda))
}

pub fn virial_j(grid: &Grid, state: &FieldState, weights: &WeightFamily) -> Result<f64> {
    let lambda = weights.lambda(state.t)?;
    Ok(Snapshot::new(grid, state)?.virial_j(lambda))
}

pub fn weighted_energy(grid: &Grid, state: &FieldState, weights: &WeightFamily) -> Result<f64> {
    let lambda = weights.lambda(state.t)?;
    Ok(Snapshot::new(grid, state)?.weighted_energy(lambda))
}

/// `int u_t / gamma`.
pub fn conserved_mass(grid: &Grid, state: &FieldState) -> Result<f64> {
    Ok(Snapshot::new(grid, state)?.mass())
}

/// `int ((1 + u_x^2) / gamma - 1)`.
pub fn conserved_energy(grid: &Grid, state: &FieldState) -> Result<f64> {
    Ok(Snapshot::new(grid, state)?.energy())
}

pub fn localized_norm(grid: &Grid, state: &FieldState, weights: &WeightFamily) -> Result<f64> {
    let lambda = weights.lambda(state.t)?;
    Ok(Snapshot::new(grid, state)?.localized_norm(lambda))
}

/// `|1 - (1 - b)/sqrt(1 + a - b) - (a + b)/2| - (a^2 + b^2)` for
/// `a = u_x^2`, `b = u_t^2`. Nonpositive on `[0, 0.09]^2`.
pub fn check_estimate_k(a: f64, b: f64) -> f64 {
    let gamma = (1.0 + a - b).sqrt();
    let lhs = (virial_density_from_squares(a, b, gamma) - 0.5 * (a + b)).abs();
    lhs - (a * a + b * b)
}

/// `|(1 + a)/sqrt(1 + a - b) - 1 - (a + b)/2| - (a^2 + b^2)`.
pub fn check_estimate_e(a: f64, b: f64) -> f64 {
    let gamma = (1.0 + a - b).sqrt();
    let lhs = (energy_density_from_squares(a, b, gamma) - 0.5 * (a + b)).abs();
    lhs - (a * a + b * b)
}

/// True iff `gamma >= 1/2` at every node.
pub fn check_gamma_lower(grid: &Grid, state: &FieldState) -> Result<bool> {
    grid.check_len(&state.u)?;
    grid.check_len(&state.v)?;
    let ux = grid.d1(&state.u)?;
    let floor_sq = GAMMA_FLOOR * GAMMA_FLOOR;
    Ok(ux
        .iter()
        .zip(&state.v)
        .all(|(a, b)| 1.0 + a * a - b * b >= floor_sq))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepReport {
    pub samples: usize,
    pub violations: usize,
    /// Largest residual seen (nonpositive when there are no violations).
    pub worst: f64,
    pub worst_at: (f64, f64),
}

/// Evaluates `check` at the corners of `[0, amax]^2` and at `samples` seeded
/// uniform points inside it.
pub fn sweep_inequality(
    check: impl Fn(f64, f64) -> f64,
    samples: usize,
    amax: f64,
    seed: u64,
) -> SweepReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corners = [(0.0, 0.0), (amax, 0.0), (0.0, amax), (amax, amax)];
    let mut report = SweepReport {
        samples: 0,
        violations: 0,
        worst: f64::NEG_INFINITY,
        worst_at: (0.0, 0.0),
    };
    let points = corners
        .into_iter()
        .chain((0..samples).map(|_| (rng.gen_range(0.0..=amax), rng.gen_range(0.0..=amax))));
    for (a, b) in points {
        let r = check(a, b);
        report.samples += 1;
        if !(r <= 0.0) {
            report.violations += 1;
        }
        if r > report.worst || r.is_nan() {
            report.worst = r;
            report.worst_at = (a, b);
        }
    }
    report
}

/// One time sample of every tracked functional.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRecord {
    pub t: f64,
    pub virial_i: f64,
    pub virial_j: f64,
    pub weighted_energy: f64,
    pub mass: f64,
    pub energy: f64,
    pub loc_norm: f64,
    pub sup_ux: f64,
    pub sup_v: f64,
    pub gamma_min: f64,
    pub integra_partial: f64,
    pub fixed_window_partial: f64,
    /// `(1/lambda) int sech^2(x/lambda)(u_x^2 + u_t^2)`, the integrand of
    /// the time-averaged estimate.
    pub integra_density: f64,
    /// `int w(x)(u_x^2 + u_t^2)` for the fixed window `w`.
    pub fixed_window_density: f64,
    /// `int sech^2(x/lambda)(u_x^2 + u_t^2)`.
    pub sech2_local: f64,
    pub weighted_quadratic: f64,
    pub weighted_quartic: f64,
    pub quadratic_energy: f64,
    pub sobolev_proxy: f64,
}

impl DiagnosticRecord {
    /// CSV column names, in order.
    pub const CSV_HEADER: &'static str = "t,I,J,E_phi,mass,energy,loc_norm,sup_ux,sup_v,gamma_min,integra_partial,fixed_window_partial";

    pub fn csv_values(&self) -> [f64; 12] {
        [
            self.t,
            self.virial_i,
            self.virial_j,
            self.weighted_energy,
            self.mass,
            self.energy,
            self.loc_norm,
            self.sup_ux,
            self.sup_v,
            self.gamma_min,
            self.integra_partial,
            self.fixed_window_partial,
        ]
    }

    /// Evaluates every functional on `state`. The running partials are left
    /// at zero; [`DiagnosticsObserver`] fills them in.
    pub fn sample(
        grid: &Grid,
        state: &FieldState,
        weights: &WeightFamily,
        fixed: &FixedWindow,
    ) -> Result<Self> {
        let lambda = weights.lambda(state.t)?;
        let snap = Snapshot::new(grid, state)?;
        let sech2_local = snap.sech2_local_energy(lambda);
        let (weighted_quadratic, weighted_quartic) = snap.weighted_quadratic_quartic(lambda);
        Ok(Self {
            t: state.t,
            virial_i: snap.virial_i(lambda),
            virial_j: snap.virial_j(lambda),
            weighted_energy: snap.weighted_energy(lambda),
            mass: snap.mass(),
            energy: snap.energy(),
            loc_norm: snap.localized_norm(lambda),
            sup_ux: snap.sup_ux(),
            sup_v: snap.sup_v(),
            gamma_min: snap.gamma_min(),
            integra_partial: 0.0,
            fixed_window_partial: 0.0,
            integra_density: sech2_local / lambda,
            fixed_window_density: snap.fixed_window_energy(fixed),
            sech2_local,
            weighted_quadratic,
            weighted_quartic,
            quadratic_energy: snap.quadratic_energy(),
            sobolev_proxy: snap.sobolev_proxy()?,
        })
    }
}

/// Running trapezoid `int f dt` over samples arriving in time order.
#[derive(Debug, Clone, Default)]
pub struct TimeTrapezoid {
    last: Option<(f64, f64)>,
    total: f64,
}

impl TimeTrapezoid {
    pub fn push(&mut self, t: f64, value: f64) -> Result<f64> {
        if let Some((t0, v0)) = self.last {
            if !(t > t0) {
                return Err(BiError::Structural(format!(
                    "time samples must increase: {t} after {t0}"
                )));
            }
            self.total += 0.5 * (t - t0) * (v0 + value);
        }
        self.last = Some((t, value));
        Ok(self.total)
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

fn accumulate(records: &[DiagnosticRecord], f: impl Fn(&DiagnosticRecord) -> f64) -> Result<f64> {
    let mut acc = TimeTrapezoid::default();
    for r in records {
        acc.push(r.t, f(r))?;
    }
    Ok(acc.total())
}

/// `int (1/lambda) int sech^2(x/lambda)(u_t^2 + u_x^2) dx dt` over the
/// records' time span.
pub fn integra_accumulate(records: &[DiagnosticRecord]) -> Result<f64> {
    accumulate(records, |r| r.integra_density)
}

/// `int int w(x)(u_x^2 + u_t^2) dx dt` for the fixed window the records were
/// sampled with.
pub fn fixed_window_accumulate(records: &[DiagnosticRecord]) -> Result<f64> {
    accumulate(records, |r| r.fixed_window_density)
}

/// Times at which the weighted energy reaches a new low at least a factor two
/// below the previous entry: a finite-run stand-in for a sequence of times
/// along which the localized energy vanishes.
pub fn candidate_decay_times(records: &[DiagnosticRecord]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for r in records {
        let accept = match out.last() {
            None => r.weighted_energy > 0.0,
            Some(&(_, prev)) => r.weighted_energy < 0.5 * prev,
        };
        if accept {
            out.push((r.t, r.weighted_energy));
        }
    }
    out
}

/// Collects a [`DiagnosticRecord`] at each snapshot and maintains the
/// running time integrals.
#[derive(Debug, Clone)]
pub struct DiagnosticsObserver {
    grid: Grid,
    weights: WeightFamily,
    fixed: FixedWindow,
    integra: TimeTrapezoid,
    fixed_acc: TimeTrapezoid,
    pub records: Vec<DiagnosticRecord>,
}

impl DiagnosticsObserver {
    pub fn new(grid: Grid, weights: WeightFamily, fixed: FixedWindow) -> Self {
        Self {
            grid,
            weights,
            fixed,
            integra: TimeTrapezoid::default(),
            fixed_acc: TimeTrapezoid::default(),
            records: Vec::new(),
        }
    }
}

impl Observer for DiagnosticsObserver {
    fn observe(&mut self, state: &FieldState) -> Result<()> {
        let mut rec = DiagnosticRecord::sample(&self.grid, state, &self.weights, &self.fixed)?;
        rec.integra_partial = self.integra.push(rec.t, rec.integra_density)?;
        rec.fixed_window_partial = self.fixed_acc.push(rec.t, rec.fixed_window_density)?;
        self.records.push(rec);
        Ok(())
    }
}
