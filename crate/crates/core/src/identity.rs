//! Machine checks of the exact identities behind the decay argument.
//!
//! Two kinds of check live here:
//!
//! * pointwise algebraic identities on on-shell jets (the numerators of the
//!   time derivatives of the virial and energy densities, rewritten as
//!   derivatives in `x`), evaluated side by side in floating point;
//! * time-series identities for `d/dt I`, `d/dt J` and `d/dt E_phi`. The left
//!   side is a centered finite difference of the sampled functional, the right
//!   side is evaluated directly from each snapshot. The two sides share no
//!   code beyond the grid derivative of `u`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{energy_density_from_squares, virial_density_from_squares, Snapshot};
use crate::dynamics::{pde_utt, FieldState, Jet};
use crate::error::{BiError, Result};
use crate::grid::Grid;
use crate::integrator::Observer;
use crate::weights::{energy_weight_deriv, profile_deriv, WeightFamily};

/// Relative tolerance for deciding that a jet is on shell.
const ON_SHELL_TOL: f64 = 1e-12;

/// Both sides of a pointwise identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetResidual {
    pub lhs: f64,
    pub rhs: f64,
}

impl JetResidual {
    pub fn abs(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }

    /// `|lhs - rhs| / max(1, |lhs|)`.
    pub fn rel(&self) -> f64 {
        self.abs() / self.lhs.abs().max(1.0)
    }
}

fn require_on_shell(jet: &Jet) -> Result<()> {
    if !(jet.gamma_sq() > 0.0) {
        return Err(BiError::Precondition(format!(
            "jet outside the hyperbolic region: 1 + u_x^2 - u_t^2 = {}",
            jet.gamma_sq()
        )));
    }
    let expected = pde_utt(jet.ut, jet.ux, jet.utx, jet.uxx);
    if (jet.utt - expected).abs() > ON_SHELL_TOL * expected.abs().max(1.0) {
        return Err(BiError::Precondition(format!(
            "jet is off shell: u_tt = {} but the equation gives {expected}",
            jet.utt
        )));
    }
    Ok(())
}

/// Numerator of `d/dt (u_t u_x / gamma)` against its divergence form:
///
/// ```text
/// (u_tx u_t + u_x u_tt) g2 - (u_x u_tx - u_t u_tt) u_x u_t
///     = -g2 * d_x(1 - u_t^2) + (1 - u_t^2) * d_x(g2 / 2)
/// ```
///
/// with `g2 = 1 + u_x^2 - u_t^2`, `d_x(1 - u_t^2) = -2 u_t u_tx` and
/// `d_x(g2 / 2) = u_x u_xx - u_t u_tx`.
pub fn check_qnum(jet: &Jet) -> Result<JetResidual> {
    require_on_shell(jet)?;
    let Jet {
        ut,
        ux,
        utx,
        uxx,
        utt,
    } = *jet;
    let g2 = jet.gamma_sq();
    let lhs = (utx * ut + ux * utt) * g2 - (ux * utx - ut * utt) * ux * ut;
    let rhs = -g2 * (-2.0 * ut * utx) + (1.0 - ut * ut) * (ux * uxx - ut * utx);
    Ok(JetResidual { lhs, rhs })
}

/// Numerator of `d/dt ((1 + u_x^2) / gamma)` against its divergence form:
///
/// ```text
/// 2 u_tx u_x g2 - (1 + u_x^2)(u_x u_tx - u_t u_tt)
///     = (u_tx u_x + u_t u_xx) g2 - (1/2) u_x u_t (2 u_x u_xx - 2 u_t u_tx)
/// ```
pub fn check_qtilde(jet: &Jet) -> Result<JetResidual> {
    require_on_shell(jet)?;
    let Jet {
        ut,
        ux,
        utx,
        uxx,
        utt,
    } = *jet;
    let g2 = jet.gamma_sq();
    let lhs = 2.0 * utx * ux * g2 - (1.0 + ux * ux) * (ux * utx - ut * utt);
    let rhs = (utx * ux + ut * uxx) * g2 - 0.5 * ux * ut * (2.0 * ux * uxx - 2.0 * ut * utx);
    Ok(JetResidual { lhs, rhs })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetSweep {
    pub samples: usize,
    pub max_abs: f64,
    pub max_rel: f64,
    pub worst: Jet,
}

/// Evaluates `check` on `samples` seeded on-shell jets with
/// `u_t, u_x, u_tx, u_xx` uniform in `[-half_box, half_box]`.
pub fn sweep_jets(
    check: impl Fn(&Jet) -> Result<JetResidual>,
    samples: usize,
    half_box: f64,
    seed: u64,
) -> Result<JetSweep> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = JetSweep {
        samples,
        max_abs: 0.0,
        max_rel: 0.0,
        worst: Jet::default(),
    };
    let mut draw = || rng.gen_range(-half_box..=half_box);
    for _ in 0..samples {
        let jet = Jet::on_shell(draw(), draw(), draw(), draw());
        let r = check(&jet)?;
        out.max_abs = out.max_abs.max(r.abs());
        if r.rel() > out.max_rel {
            out.max_rel = r.rel();
            out.worst = jet;
        }
    }
    Ok(out)
}

/// Which time-series identity to verify.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeIdentity {
    Virial,
    ModifiedVirial,
    WeightedEnergy,
}

impl TimeIdentity {
    pub const ALL: [TimeIdentity; 3] = [
        TimeIdentity::Virial,
        TimeIdentity::ModifiedVirial,
        TimeIdentity::WeightedEnergy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TimeIdentity::Virial => "virial_I",
            TimeIdentity::ModifiedVirial => "virial_J",
            TimeIdentity::WeightedEnergy => "energy_E_phi",
        }
    }
}

/// The functionals and the direct evaluation of their time derivatives at
/// one snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentitySample {
    pub t: f64,
    pub virial_i: f64,
    pub virial_j: f64,
    pub weighted_energy: f64,
    pub virial_i_rate: f64,
    pub virial_j_rate: f64,
    pub weighted_energy_rate: f64,
    /// First term of the `J` rate, a nonnegative weighted square.
    pub virial_j_coercive: f64,
}

impl IdentitySample {
    pub fn value(&self, which: TimeIdentity) -> f64 {
        match which {
            TimeIdentity::Virial => self.virial_i,
            TimeIdentity::ModifiedVirial => self.virial_j,
            TimeIdentity::WeightedEnergy => self.weighted_energy,
        }
    }

    pub fn rate(&self, which: TimeIdentity) -> f64 {
        match which {
            TimeIdentity::Virial => self.virial_i_rate,
            TimeIdentity::ModifiedVirial => self.virial_j_rate,
            TimeIdentity::WeightedEnergy => self.weighted_energy_rate,
        }
    }

    /// Evaluates the functionals and the right-hand sides of their rate
    /// identities on `state`.
    #[allow(clippy::needless_range_loop)]
    pub fn evaluate(grid: &Grid, state: &FieldState, weights: &WeightFamily) -> Result<Self> {
        let lambda = weights.lambda(state.t)?;
        let dlog = weights.dlog_lambda(state.t)?;
        let snap = Snapshot::new(grid, state)?;
        let v = &state.v;

        let mut i1 = 0.0;
        let mut i2 = 0.0;
        let mut j1 = 0.0;
        let mut j2 = 0.0;
        let mut e1 = 0.0;
        let mut e2 = 0.0;
        for i in 0..grid.len() {
            let y = grid.x(i) / lambda;
            let (ux, ut, g) = (snap.ux[i], v[i], snap.gamma[i]);
            let (a, b) = (ux * ux, ut * ut);
            let w1 = profile_deriv(y);
            let w4d = energy_weight_deriv(y);
            i1 += w1 * virial_density_from_squares(a, b, g);
            i2 += y * w1 * ut * ux / g;
            j1 += w1 * (a + b) / (1.0 + a);
            j2 += y * w1 * ut * ux / (1.0 + a);
            e1 += w4d * ux * ut / g;
            e2 += y * w4d * energy_density_from_squares(a, b, g);
        }
        let h = grid.spacing();
        let (i1, i2, j1, j2, e1, e2) = (i1 * h, i2 * h, j1 * h, j2 * h, e1 * h, e2 * h);

        Ok(Self {
            t: state.t,
            virial_i: snap.virial_i(lambda),
            virial_j: snap.virial_j(lambda),
            weighted_energy: snap.weighted_energy(lambda),
            virial_i_rate: i1 / lambda + dlog * i2,
            virial_j_rate: j1 / (2.0 * lambda) + dlog * j2,
            weighted_energy_rate: -e1 / lambda - dlog * e2,
            virial_j_coercive: j1 / (2.0 * lambda),
        })
    }
}

/// Collects an [`IdentitySample`] at each snapshot.
#[derive(Debug, Clone)]
pub struct IdentityObserver {
    grid: Grid,
    weights: WeightFamily,
    pub samples: Vec<IdentitySample>,
}

impl IdentityObserver {
    pub fn new(grid: Grid, weights: WeightFamily) -> Self {
        Self {
            grid,
            weights,
            samples: Vec::new(),
        }
    }
}

impl Observer for IdentityObserver {
    fn observe(&mut self, state: &FieldState) -> Result<()> {
        self.samples
            .push(IdentitySample::evaluate(&self.grid, state, &self.weights)?);
        Ok(())
    }
}

/// Outcome of one time-series identity check.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub name: String,
    /// Interior samples at which the residual was evaluated.
    pub samples: usize,
    pub t_range: (f64, f64),
    pub max_abs_residual: f64,
    /// Max residual over the max magnitude of the directly evaluated rate.
    pub max_rel_residual: f64,
    pub resolution: String,
    pub tolerance: f64,
    pub passed: bool,
}

/// Minimum number of snapshots: the five-point centered difference needs two
/// neighbours on each side.
pub const MIN_SNAPSHOTS: usize = 5;

/// Compares the fourth-order centered difference
/// `(f[k-2] - 8 f[k-1] + 8 f[k+1] - f[k+2]) / 12 dt` of the sampled
/// functional against its directly evaluated rate at every interior
/// snapshot. Residual is `O(dt^4 + h^4)`.
#[allow(clippy::needless_range_loop)]
pub fn verify_time_identity(
    samples: &[IdentitySample],
    which: TimeIdentity,
    tolerance: f64,
    resolution: impl Into<String>,
) -> Result<IdentityReport> {
    if samples.len() < MIN_SNAPSHOTS {
        return Err(BiError::Structural(format!(
            "{} snapshots given; at least {MIN_SNAPSHOTS} needed for centered differencing",
            samples.len()
        )));
    }
    let dt = samples[1].t - samples[0].t;
    for w in samples.windows(2) {
        let step = w[1].t - w[0].t;
        if !(dt > 0.0) || (step - dt).abs() > 1e-9 * dt {
            return Err(BiError::Structural(format!(
                "snapshots must be evenly spaced: step {step} vs {dt} at t = {}",
                w[0].t
            )));
        }
    }
    let f = |k: usize| samples[k].value(which);
    let mut max_abs: f64 = 0.0;
    let mut max_rate: f64 = 0.0;
    let n = samples.len();
    for k in 2..n - 2 {
        let fd = (f(k - 2) - 8.0 * f(k - 1) + 8.0 * f(k + 1) - f(k + 2)) / (12.0 * dt);
        let rate = samples[k].rate(which);
        max_abs = max_abs.max((fd - rate).abs());
        max_rate = max_rate.max(rate.abs());
    }
    let max_rel = if max_rate > 0.0 {
        max_abs / max_rate
    } else {
        0.0
    };
    Ok(IdentityReport {
        name: which.name().to_string(),
        samples: n - 4,
        t_range: (samples[2].t, samples[n - 3].t),
        max_abs_residual: max_abs,
        max_rel_residual: max_rel,
        resolution: resolution.into(),
        tolerance,
        passed: max_abs <= tolerance,
    })
}

pub fn verify_virial_identity(
    samples: &[IdentitySample],
    tolerance: f64,
) -> Result<IdentityReport> {
    verify_time_identity(samples, TimeIdentity::Virial, tolerance, "")
}

pub fn verify_energy_identity(
    samples: &[IdentitySample],
    tolerance: f64,
) -> Result<IdentityReport> {
    verify_time_identity(samples, TimeIdentity::WeightedEnergy, tolerance, "")
}

pub fn verify_j_identity(samples: &[IdentitySample], tolerance: f64) -> Result<IdentityReport> {
    verify_time_identity(samples, TimeIdentity::ModifiedVirial, tolerance, "")
}

/// Coarse and refined checks of one identity.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementStudy {
    pub coarse: IdentityReport,
    pub fine: IdentityReport,
    /// `coarse / fine` residual ratio; infinite when the fine residual is 0.
    pub reduction: f64,
    pub min_reduction: f64,
    pub passed: bool,
}

/// Residuals below this are treated as exact and exempt from the reduction
/// requirement.
pub const EXACT_RESIDUAL: f64 = 1e-15;

impl RefinementStudy {
    pub fn new(coarse: IdentityReport, fine: IdentityReport, min_reduction: f64) -> Self {
        let reduction = if fine.max_abs_residual > 0.0 {
            coarse.max_abs_residual / fine.max_abs_residual
        } else {
            f64::INFINITY
        };
        let converged = coarse.max_abs_residual <= EXACT_RESIDUAL || reduction >= min_reduction;
        let passed = coarse.passed && fine.passed && converged;
        Self {
            coarse,
            fine,
            reduction,
            min_reduction,
            passed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{InitialCondition, RunConfig};
    use crate::dynamics::Direction;
    use crate::integrator::evolve;

    #[test]
    fn zero_jet_is_trivial() {
        let z = Jet::on_shell(0.0, 0.0, 0.0, 0.0);
        assert_eq!(check_qnum(&z).unwrap().abs(), 0.0);
        assert_eq!(check_qtilde(&z).unwrap().abs(), 0.0);
    }

    #[test]
    fn worked_sample_jet() {
        let jet = Jet::on_shell(0.1, 0.2, 0.05, 0.3);
        assert!((jet.utt - 0.2875).abs() < 1e-15);
        let q = check_qnum(&jet).unwrap();
        assert!((q.lhs - 0.06475).abs() < 1e-15, "{}", q.lhs);
        assert!((q.rhs - 0.06475).abs() < 1e-15, "{}", q.rhs);
        // independent arithmetic: 2*0.05*0.2*1.03 + 1.04*0.01875 = 0.0401
        let t = check_qtilde(&jet).unwrap();
        assert!((t.lhs - 0.0401).abs() < 1e-15, "{}", t.lhs);
        assert!(t.abs() <= 1e-14);
    }

    #[test]
    fn off_shell_jet_is_rejected() {
        let mut jet = Jet::on_shell(0.1, 0.2, 0.05, 0.3);
        jet.utt += 1e-6;
        assert!(matches!(check_qnum(&jet), Err(BiError::Precondition(_))));
        assert!(matches!(check_qtilde(&jet), Err(BiError::Precondition(_))));
        let bad = Jet::on_shell(1.5, 0.0, 0.0, 0.0);
        assert!(matches!(check_qnum(&bad), Err(BiError::Precondition(_))));
    }

    #[test]
    fn identities_hold_under_scaling() {
        let jet = Jet::on_shell(0.37, -0.21, 0.44, -0.18);
        for k in [1.0, 0.5, 0.25, 1e-3] {
            let s = jet.scaled(k);
            assert!(check_qnum(&s).unwrap().rel() <= 1e-12);
            assert!(check_qtilde(&s).unwrap().rel() <= 1e-12);
        }
    }

    #[test]
    fn seeded_sweep_is_deterministic() {
        let a = sweep_jets(check_qnum, 2000, 0.5, 11).unwrap();
        let b = sweep_jets(check_qnum, 2000, 0.5, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.max_rel <= 1e-12);
    }

    fn sample(t: f64, f: f64, rate: f64) -> IdentitySample {
        IdentitySample {
            t,
            virial_i: f,
            virial_j: f,
            weighted_energy: f,
            virial_i_rate: rate,
            virial_j_rate: rate,
            weighted_energy_rate: rate,
            virial_j_coercive: 0.0,
        }
    }

    #[test]
    fn time_identity_on_analytic_series() {
        // f = sin t, f' = cos t: residual is the stencil error only
        let dt = 0.05;
        let s: Vec<_> = (0..100)
            .map(|k| {
                let t = 2.0 + k as f64 * dt;
                sample(t, t.sin(), t.cos())
            })
            .collect();
        let r = verify_virial_identity(&s, 1e-6).unwrap();
        assert!(r.passed);
        assert!(r.max_abs_residual < dt.powi(4) / 30.0 * 1.01);
        assert_eq!(r.samples, 96);
    }

    #[test]
    fn time_identity_structural_errors() {
        let s: Vec<_> = (0..4).map(|k| sample(k as f64, 0.0, 0.0)).collect();
        assert!(matches!(
            verify_j_identity(&s, 1.0),
            Err(BiError::Structural(_))
        ));
        let mut s: Vec<_> = (0..8).map(|k| sample(k as f64, 0.0, 0.0)).collect();
        s[5].t += 0.1;
        assert!(matches!(
            verify_j_identity(&s, 1.0),
            Err(BiError::Structural(_))
        ));
    }

    fn run_samples(cfg: &RunConfig) -> Vec<IdentitySample> {
        let grid = cfg.grid().unwrap();
        let mut obs = IdentityObserver::new(grid.clone(), cfg.weights().unwrap());
        let ic = cfg.initial.build(&grid, cfg.t_start).unwrap();
        let r = evolve(cfg, ic, &mut [&mut obs]).unwrap();
        assert!(r.completed());
        obs.samples
    }

    #[test]
    fn vacuum_run_has_zero_residuals() {
        let cfg = RunConfig {
            half_length: 30.0,
            points: 256,
            horizon: 4.0,
            snapshot_dt: 0.1,
            initial: InitialCondition::Vacuum,
            ..RunConfig::default()
        };
        let s = run_samples(&cfg);
        for which in TimeIdentity::ALL {
            let r = verify_time_identity(&s, which, 1e-6, "").unwrap();
            assert_eq!(r.max_abs_residual, 0.0);
        }
    }

    #[test]
    fn traveling_run_satisfies_identities_with_nonzero_rates() {
        let cfg = RunConfig {
            half_length: 40.0,
            points: 2048,
            t_start: 2.0,
            horizon: 8.0,
            snapshot_dt: 0.05,
            initial: InitialCondition::Traveling {
                amplitude: 0.1,
                center: -3.0,
                width: 1.0,
                direction: Direction::Right,
            },
            ..RunConfig::default()
        };
        let s = run_samples(&cfg);
        for which in TimeIdentity::ALL {
            let r = verify_time_identity(&s, which, 1e-6, "").unwrap();
            let peak = s.iter().map(|x| x.rate(which).abs()).fold(0.0, f64::max);
            assert!(peak > 1e-4, "{} rate {peak}", r.name);
            assert!(r.passed, "{r:?}");
            assert!(r.max_rel_residual < 1e-3, "{r:?}");
        }
        assert!(s.iter().all(|x| x.virial_j_coercive >= 0.0));
    }
}
