//! The sublinear scaling `lambda(t) = C t / ln^2 t`, the profile functions
//! built on `tanh`, and the shrinking decay window `|x| < lambda(|t|)`.

use crate::error::{BiError, Result};

/// Earliest time at which the scaling is used (`ln^2 t` vanishes at t = 1).
pub const T_MIN: f64 = 2.0;

/// `tanh`, the odd virial profile.
#[inline]
pub fn profile(y: f64) -> f64 {
    y.tanh()
}

/// `sech^2 = 1 - tanh^2`, derivative of [`profile`].
#[inline]
pub fn profile_deriv(y: f64) -> f64 {
    let c = y.cosh();
    if c.is_infinite() {
        0.0
    } else {
        1.0 / (c * c)
    }
}

/// `sech^4`, the energy weight.
#[inline]
pub fn energy_weight(y: f64) -> f64 {
    let s = profile_deriv(y);
    s * s
}

/// `d/dy sech^4(y) = -4 sech^4(y) tanh(y)`.
#[inline]
pub fn energy_weight_deriv(y: f64) -> f64 {
    -4.0 * energy_weight(y) * y.tanh()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lower: f64,
    pub upper: f64,
}

impl Window {
    pub fn half_width(&self) -> f64 {
        self.upper
    }

    /// Open-interval membership.
    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }
}

/// The scaling family for a fixed constant `C > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightFamily {
    constant: f64,
}

impl Default for WeightFamily {
    fn default() -> Self {
        Self { constant: 1.0 }
    }
}

impl WeightFamily {
    pub fn new(constant: f64) -> Result<Self> {
        if !(constant.is_finite() && constant > 0.0) {
            return Err(BiError::Config(format!(
                "window constant C must be positive, got {constant}"
            )));
        }
        Ok(Self { constant })
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    fn check_time(t: f64) -> Result<()> {
        if !(t >= T_MIN) || !t.is_finite() {
            return Err(BiError::Domain(format!(
                "scaling window requires t >= {T_MIN}, got {t}"
            )));
        }
        Ok(())
    }

    pub fn lambda(&self, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        let l = t.ln();
        Ok(self.constant * t / (l * l))
    }

    /// `lambda'(t) / lambda(t) = (1 - 2 / ln t) / t`, independent of `C`.
    pub fn dlog_lambda(&self, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        Ok((1.0 - 2.0 / t.ln()) / t)
    }

    /// Decay window `(-lambda(|t|), lambda(|t|))`; even in `t`.
    pub fn window(&self, t: f64) -> Result<Window> {
        let half = self.lambda(t.abs())?;
        Ok(Window {
            lower: -half,
            upper: half,
        })
    }

    /// `int_2^T dt / lambda(t) = (ln^3 T - ln^3 2) / (3C)`. Unbounded in `T`.
    pub fn inverse_lambda_integral(&self, horizon: f64) -> Result<f64> {
        Self::check_time(horizon)?;
        let a = T_MIN.ln();
        let b = horizon.ln();
        Ok((b.powi(3) - a.powi(3)) / (3.0 * self.constant))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn lambda_examples() {
        let w = WeightFamily::default();
        assert!((w.lambda(E * E).unwrap() - E * E / 4.0).abs() < 1e-12);
        assert!((w.lambda(E * E).unwrap() - 1.84726).abs() < 1e-5);
        assert!((w.lambda(10.0).unwrap() - 1.88612).abs() < 1e-5);
        let w2 = WeightFamily::new(2.0).unwrap();
        assert!((w2.lambda(37.0).unwrap() - 2.0 * w.lambda(37.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn domain_errors_before_two() {
        let w = WeightFamily::default();
        assert!(matches!(w.lambda(1.5), Err(BiError::Domain(_))));
        assert!(matches!(w.dlog_lambda(1.99), Err(BiError::Domain(_))));
        assert!(matches!(w.window(1.0), Err(BiError::Domain(_))));
        assert!(matches!(w.lambda(f64::NAN), Err(BiError::Domain(_))));
        assert!(WeightFamily::new(0.0).is_err());
        assert!(WeightFamily::new(-1.0).is_err());
    }

    #[test]
    fn dlog_lambda_examples() {
        let w = WeightFamily::default();
        assert!(w.dlog_lambda(E * E).unwrap().abs() < 1e-16);
        assert!((w.dlog_lambda(10.0).unwrap() - 0.0131411).abs() < 1e-7);
    }

    #[test]
    fn dlog_lambda_matches_finite_difference() {
        let w = WeightFamily::new(1.7).unwrap();
        let t = 50.0;
        let dt = 1e-4;
        let fd = (w.lambda(t + dt).unwrap().ln() - w.lambda(t - dt).unwrap().ln()) / (2.0 * dt);
        assert!((fd - w.dlog_lambda(t).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn window_is_symmetric_and_even_in_time() {
        let w = WeightFamily::default();
        let a = w.window(10.0).unwrap();
        assert!((a.upper - 1.88612).abs() < 1e-5);
        assert_eq!(a.lower, -a.upper);
        assert_eq!(w.window(-10.0).unwrap(), a);
        assert!(a.contains(0.0) && !a.contains(a.upper) && !a.contains(a.lower));
    }

    #[test]
    fn window_is_a_proper_subcone() {
        let w = WeightFamily::default();
        let mut prev_ratio = f64::INFINITY;
        let mut prev_lambda = 0.0;
        for k in 0..40 {
            let t = E * E * 1.5f64.powi(k);
            let l = w.lambda(t).unwrap();
            assert!(l / t < prev_ratio);
            assert!(l > prev_lambda);
            prev_ratio = l / t;
            prev_lambda = l;
        }
        assert!(prev_ratio < 0.01);
    }

    #[test]
    fn inverse_lambda_is_not_integrable() {
        let w = WeightFamily::default();
        // trapezoid in s = ln t as an independent oracle: dt / lambda = s^2 ds / C
        let oracle = |big_t: f64| {
            let (a, b) = (2f64.ln(), big_t.ln());
            let n = 20_000;
            let h = (b - a) / n as f64;
            let mut acc = 0.5 * (a * a + b * b);
            for i in 1..n {
                let s = a + i as f64 * h;
                acc += s * s;
            }
            acc * h
        };
        for t in [10.0, 1e3, 1e6] {
            let exact = w.inverse_lambda_integral(t).unwrap();
            assert!((exact - oracle(t)).abs() < 1e-6 * exact.max(1.0));
        }
        let grow =
            w.inverse_lambda_integral(1e6).unwrap() - w.inverse_lambda_integral(1e3).unwrap();
        assert!(grow > 1.0);
    }

    #[test]
    fn profile_identities() {
        for k in -400..=400 {
            let y = k as f64 * 0.02;
            assert!((profile_deriv(y) - (1.0 - profile(y).powi(2))).abs() < 1e-14);
            assert!((energy_weight(y) - profile_deriv(y).powi(2)).abs() < 1e-14);
            assert!(profile_deriv(y) > 0.0 && profile_deriv(y) <= 1.0);
            assert!(energy_weight(y) > 0.0 && energy_weight(y) <= 1.0);
            assert_eq!(profile(-y), -profile(y));
            assert_eq!(profile_deriv(-y), profile_deriv(y));
        }
        assert_eq!(profile_deriv(1e4), 0.0);
    }

    #[test]
    fn energy_weight_derivative_is_dominated_by_sech2() {
        // |y phi'(y)| <= K sech^2(y) with K = 2
        for k in -2000..=2000 {
            let y = k as f64 * 0.01;
            assert!((y * energy_weight_deriv(y)).abs() <= 2.0 * profile_deriv(y) + 1e-300);
        }
        // finite-difference check of the derivative itself
        for y in [-2.0, -0.3, 0.0, 0.7, 3.1] {
            let h = 1e-5;
            let fd = (energy_weight(y + h) - energy_weight(y - h)) / (2.0 * h);
            assert!((fd - energy_weight_deriv(y)).abs() < 1e-9);
        }
    }
}
