//! Uniform periodic grid on `[-L, L)` with fourth-order central differences
//! and the periodic trapezoid rule.
//!
//! The periodic box stands in for the whole line: initial data are
//! effectively compactly supported and signals move at unit speed, so a box
//! with `L >= support + horizon + margin` never sees wrap-around.

use crate::error::{BiError, Result};

pub const MIN_POINTS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    half_length: f64,
    points: usize,
    spacing: f64,
}

impl Grid {
    pub fn new(half_length: f64, points: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(BiError::Config(format!(
                "grid half-length must be positive and finite, got {half_length}"
            )));
        }
        if points < MIN_POINTS || !points.is_multiple_of(2) {
            return Err(BiError::Config(format!(
                "grid point count must be even and at least {MIN_POINTS}, got {points}"
            )));
        }
        Ok(Self {
            half_length,
            points,
            spacing: 2.0 * half_length / points as f64,
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Node coordinate `x_i = -L + i h`.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.spacing
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.x(i)).collect()
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.points).map(|i| f(self.x(i))).collect()
    }

    pub fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.points {
            return Err(BiError::Structural(format!(
                "grid function has length {}, grid has {} points",
                f.len(),
                self.points
            )));
        }
        Ok(())
    }

    /// Fourth-order first derivative,
    /// `(-f[i+2] + 8 f[i+1] - 8 f[i-1] + f[i-2]) / 12h` with periodic indices.
    pub fn d1(&self, f: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.points];
        self.d1_into(f, &mut out)?;
        Ok(out)
    }

    pub fn d1_into(&self, f: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(f)?;
        self.check_len(out)?;
        let c = 1.0 / (12.0 * self.spacing);
        apply_periodic(f, out, |m2, m1, _, p1, p2| {
            c * (-p2 + 8.0 * p1 - 8.0 * m1 + m2)
        });
        Ok(())
    }

    /// Fourth-order second derivative,
    /// `(-f[i+2] + 16 f[i+1] - 30 f[i] + 16 f[i-1] - f[i-2]) / 12h^2`.
    pub fn d2(&self, f: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.points];
        self.d2_into(f, &mut out)?;
        Ok(out)
    }

    pub fn d2_into(&self, f: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(f)?;
        self.check_len(out)?;
        let c = 1.0 / (12.0 * self.spacing * self.spacing);
        apply_periodic(f, out, |m2, m1, c0, p1, p2| {
            c * (-p2 + 16.0 * p1 - 30.0 * c0 + 16.0 * m1 - m2)
        });
        Ok(())
    }

    /// Periodic trapezoid rule `h * sum f_i`.
    pub fn quad(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f)?;
        Ok(self.spacing * f.iter().sum::<f64>())
    }

    /// `h * sum g(i, x_i)` without materialising the integrand.
    pub fn quad_with(&self, mut g: impl FnMut(usize, f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.points {
            acc += g(i, self.x(i));
        }
        self.spacing * acc
    }
}

/// Applies a five-point stencil with periodic wrap. Interior nodes avoid the
/// modulo arithmetic.
#[inline]
fn apply_periodic(f: &[f64], out: &mut [f64], s: impl Fn(f64, f64, f64, f64, f64) -> f64) {
    let n = f.len();
    let at = |i: isize| f[i.rem_euclid(n as isize) as usize];
    for i in [0usize, 1, n - 2, n - 1] {
        let k = i as isize;
        out[i] = s(at(k - 2), at(k - 1), at(k), at(k + 1), at(k + 2));
    }
    for i in 2..n - 2 {
        out[i] = s(f[i - 2], f[i - 1], f[i], f[i + 1], f[i + 2]);
    }
}
