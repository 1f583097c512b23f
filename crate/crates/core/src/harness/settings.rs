//! Flat key/value settings: per-command defaults, a TOML file, then
//! `--set key=value` overrides, in that order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{InitialCondition, RunConfig};
use crate::diagnostics::FixedWindow;
use crate::dynamics::{Backend, Direction, GAMMA_FLOOR};
use crate::error::{BiError, Result};

use super::Command;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Vacuum,
    Gaussian,
    Traveling,
    UniformVelocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Sech2,
    Exponential,
}

/// Every recognised key. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub half_length: f64,
    pub points: usize,
    pub t_start: f64,
    pub horizon: f64,
    pub cfl: f64,
    pub snapshot_dt: f64,
    pub window_constant: f64,
    pub backend: Backend,
    pub gamma_floor: f64,

    pub family: Family,
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub velocity_scale: f64,
    pub direction: Direction,
    /// Constant `u_t` of the `uniform_velocity` family.
    pub velocity: f64,

    pub fixed_window: WindowKind,
    pub lambda0: f64,
    pub c0: f64,

    pub seed: u64,
    pub jet_samples: usize,
    /// Absolute residual tolerance of the time-series identities.
    pub tolerance: f64,
    /// Required residual reduction under joint halving of `h` and the
    /// snapshot spacing.
    pub min_reduction: f64,

    pub ladder: Vec<usize>,
    pub min_order: f64,

    pub epsilons: Vec<f64>,
    /// Run the traveling-wave control alongside the decay study.
    pub control: bool,
    pub control_amplitude: f64,
    pub control_center: f64,

    /// Write an SVG line plot per CSV column.
    pub plots: bool,
}

impl Settings {
    pub fn defaults(command: Command) -> Self {
        let base = Self {
            half_length: 250.0,
            points: 8192,
            t_start: 2.0,
            horizon: 200.0,
            cfl: 0.4,
            snapshot_dt: 0.1,
            window_constant: 1.0,
            backend: Backend::Explicit,
            gamma_floor: GAMMA_FLOOR,
            family: Family::Gaussian,
            amplitude: 0.01,
            center: 0.0,
            width: 1.0,
            velocity_scale: 1.0,
            direction: Direction::Right,
            velocity: 0.0,
            fixed_window: WindowKind::Sech2,
            lambda0: 5.0,
            c0: 1.0,
            seed: 0,
            jet_samples: 100_000,
            tolerance: 1e-6,
            min_reduction: 4.0,
            ladder: vec![1024, 2048, 4096],
            min_order: 3.5,
            epsilons: vec![0.005, 0.01, 0.02],
            control: true,
            control_amplitude: 0.1,
            control_center: -20.0,
            plots: false,
        };
        match command {
            Command::Simulate | Command::DecayStudy => base,
            Command::VerifyIdentities => Self {
                half_length: 60.0,
                points: 4096,
                horizon: 20.0,
                snapshot_dt: 0.05,
                amplitude: 0.02,
                // off-center so that the odd-weight functionals do not vanish
                center: 1.0,
                ..base
            },
            Command::Convergence => Self {
                half_length: 60.0,
                t_start: 0.0,
                horizon: 20.0,
                family: Family::Traveling,
                amplitude: 0.1,
                ..base
            },
        }
    }

    /// Layers `file` (if any) and then `overrides` over the defaults of
    /// `command`.
    pub fn resolve(command: Command, file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = toml::Table::try_from(Self::defaults(command))
            .map_err(|e| BiError::Config(format!("cannot encode defaults: {e}")))?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| BiError::io(path, e))?;
            let parsed: toml::Table = toml::from_str(&text)
                .map_err(|e| BiError::Config(format!("{}: {e}", path.display())))?;
            for (k, v) in parsed {
                if v.is_table() {
                    return Err(BiError::Config(format!(
                        "{}: key `{k}` is a table; settings are flat key = value pairs",
                        path.display()
                    )));
                }
                table.insert(k, v);
            }
        }
        for item in overrides {
            let (k, v) = parse_override(item)?;
            table.insert(k, v);
        }
        table
            .try_into()
            .map_err(|e| BiError::Config(format!("invalid settings: {e}")))
    }

    pub fn initial_condition(&self) -> InitialCondition {
        match self.family {
            Family::Vacuum => InitialCondition::Vacuum,
            Family::Gaussian => InitialCondition::Gaussian {
                amplitude: self.amplitude,
                center: self.center,
                width: self.width,
                velocity_scale: self.velocity_scale,
            },
            Family::Traveling => InitialCondition::Traveling {
                amplitude: self.amplitude,
                center: self.center,
                width: self.width,
                direction: self.direction,
            },
            Family::UniformVelocity => InitialCondition::UniformVelocity {
                value: self.velocity,
            },
        }
    }

    pub fn fixed_window(&self) -> FixedWindow {
        match self.fixed_window {
            WindowKind::Sech2 => FixedWindow::Sech2 {
                lambda0: self.lambda0,
            },
            WindowKind::Exponential => FixedWindow::Exponential { c0: self.c0 },
        }
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            half_length: self.half_length,
            points: self.points,
            t_start: self.t_start,
            horizon: self.horizon,
            cfl: self.cfl,
            snapshot_dt: self.snapshot_dt,
            initial: self.initial_condition(),
            window_constant: self.window_constant,
            fixed_window: self.fixed_window(),
            backend: self.backend,
            gamma_floor: self.gamma_floor,
        }
    }

    /// Same settings with a different amplitude.
    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self {
            amplitude,
            ..self.clone()
        }
    }
}

/// Splits `key=value`; the value is read as a TOML value, falling back to a
/// bare string (`family=traveling`).
fn parse_override(item: &str) -> Result<(String, toml::Value)> {
    let (k, v) = item
        .split_once('=')
        .ok_or_else(|| BiError::Config(format!("--set expects key=value, got `{item}`")))?;
    let key = k.trim();
    if key.is_empty() {
        return Err(BiError::Config(format!("--set has an empty key: `{item}`")));
    }
    let raw = v.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        for c in Command::ALL {
            let s = Settings::resolve(c, None, &[]).unwrap();
            assert_eq!(s, Settings::defaults(c));
        }
        Settings::defaults(Command::Simulate)
            .run_config()
            .validate()
            .unwrap();
        Settings::defaults(Command::VerifyIdentities)
            .run_config()
            .validate()
            .unwrap();
        Settings::defaults(Command::Convergence)
            .run_config()
            .validate()
            .unwrap();
    }

    #[test]
    fn overrides_apply_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "points = 1024\nhorizon = 50\nfamily = \"vacuum\"\n").unwrap();
        let s = Settings::resolve(
            Command::Simulate,
            Some(&path),
            &[
                "points=2048".into(),
                "direction=left".into(),
                "ladder=[64, 128]".into(),
            ],
        )
        .unwrap();
        assert_eq!(s.points, 2048);
        assert_eq!(s.horizon, 50.0);
        assert_eq!(s.family, Family::Vacuum);
        assert_eq!(s.direction, Direction::Left);
        assert_eq!(s.ladder, vec![64, 128]);
    }

    #[test]
    fn bad_input_is_a_config_error() {
        for set in ["nonsense=1", "points", "=3", "points=-4", "family=sphere"] {
            let r = Settings::resolve(Command::Simulate, None, &[set.to_string()]);
            assert!(matches!(r, Err(BiError::Config(_))), "{set}: {r:?}");
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested.toml");
        std::fs::write(&path, "[grid]\npoints = 4\n").unwrap();
        assert!(matches!(
            Settings::resolve(Command::Simulate, Some(&path), &[]),
            Err(BiError::Config(_))
        ));
        assert!(matches!(
            Settings::resolve(
                Command::Simulate,
                Some(&dir.path().join("missing.toml")),
                &[]
            ),
            Err(BiError::Io { .. })
        ));
    }
}
