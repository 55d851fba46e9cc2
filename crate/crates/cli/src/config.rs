//! JSON experiment configuration.
//!
//! Only `graph` is required. Unknown fields are rejected, so a misspelled key
//! is reported with its line and column instead of being silently ignored.

use crate::error::CliError;
use serde::{Deserialize, Serialize};
use star_nls::graph::{EdgeGrid, SignPattern, StarGraph};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: StarGraph,
    /// Signed shift of the stationary state.
    #[serde(default)]
    pub a: f64,
    /// Sign pattern `m_j`; the canonical one (incoming edges set) by default.
    #[serde(default)]
    pub pattern: Option<SignPattern>,
    #[serde(default = "default_h")]
    pub h: f64,
    /// Edge length; by default long enough for the state tails to vanish.
    #[serde(default)]
    pub length: Option<f64>,
    /// `[lo, hi]` window of the shooting scan.
    #[serde(default)]
    pub window: Option<(f64, f64)>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub evolve: EvolveConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    /// The stationary state, phase-rotated, evolved in place.
    #[default]
    Orbit,
    /// A line soliton sent through the vertex.
    Transit,
    /// Growth of a small perturbation of the stationary state.
    Growth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    #[serde(default)]
    pub kind: RunKind,
    /// Defaults: `1e-3` for orbit and transit runs, `2e-3` for growth runs.
    #[serde(default)]
    pub tau: Option<f64>,
    /// Orbit run length or growth observation window (defaults 20 and 50).
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Initial phase rotation of an orbit run.
    #[serde(default)]
    pub phase: f64,
    /// Transit speed and start position.
    #[serde(default = "default_speed")]
    pub c: f64,
    #[serde(default = "default_x_start")]
    pub x_start: f64,
    /// Relative size of the growth perturbation.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// Iteration cap of the nonlinear solve in each orbit step.
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            kind: RunKind::default(),
            tau: None,
            t_end: None,
            record_every: default_record_every(),
            phase: 0.0,
            c: default_speed(),
            x_start: default_x_start(),
            amplitude: default_amplitude(),
            max_iterations: default_max_iterations(),
        }
    }
}

impl EvolveConfig {
    pub fn tau(&self) -> f64 {
        self.tau.unwrap_or(match self.kind {
            RunKind::Growth => 2e-3,
            _ => 1e-3,
        })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end.unwrap_or(match self.kind {
            RunKind::Growth => 50.0,
            _ => 20.0,
        })
    }
}

fn default_h() -> f64 {
    0.01
}

fn default_seed() -> u64 {
    7
}

fn default_record_every() -> usize {
    10
}

fn default_speed() -> f64 {
    1.0
}

fn default_x_start() -> f64 {
    -10.0
}

fn default_amplitude() -> f64 {
    1e-6
}

fn default_max_iterations() -> usize {
    60
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub a: Option<f64>,
    pub h: Option<f64>,
    pub tau: Option<f64>,
    pub t_end: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg =
            Self::parse(&text).map_err(|e| CliError::Config(format!("{}:{e}", path.display())))?;
        cfg.apply(overrides);
        cfg.check()?;
        Ok(cfg)
    }

    /// Parses JSON; errors read `line:column: message`.
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            // serde_json appends " at line L column C"; move it to the front
            let msg = msg.split(" at line ").next().unwrap_or(&msg).to_string();
            format!("{}:{}: {msg}", e.line(), e.column())
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(a) = o.a {
            self.a = a;
        }
        if let Some(h) = o.h {
            self.h = h;
        }
        if let Some(t) = o.tau {
            self.evolve.tau = Some(t);
        }
        if let Some(t) = o.t_end {
            self.evolve.t_end = Some(t);
        }
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |field: &str, value: String| {
            Err(CliError::Config(format!(
                "field `{field}`: invalid value {value}"
            )))
        };
        if !self.a.is_finite() {
            return bad("a", self.a.to_string());
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return bad("h", self.h.to_string());
        }
        if let Some(l) = self.length {
            if !(l.is_finite() && l > 0.0) {
                return bad("length", l.to_string());
            }
        }
        if let Some(p) = &self.pattern {
            if p.len() != self.graph.n_edges() {
                return bad("pattern", format!("of length {}", p.len()));
            }
        }
        let e = &self.evolve;
        if !(e.tau() > 0.0 && e.tau().is_finite()) {
            return bad("evolve.tau", e.tau().to_string());
        }
        if !(e.t_end() > 0.0 && e.t_end().is_finite()) {
            return bad("evolve.t_end", e.t_end().to_string());
        }
        if e.max_iterations == 0 {
            return bad("evolve.max_iterations", "0".into());
        }
        if !(e.amplitude > 0.0 && e.amplitude < 1.0) {
            return bad("evolve.amplitude", e.amplitude.to_string());
        }
        Ok(())
    }

    pub fn pattern(&self) -> SignPattern {
        self.pattern
            .clone()
            .unwrap_or_else(|| self.graph.canonical_pattern())
    }

    /// The state grid: the configured length or the default for `|a|`.
    pub fn grid(&self) -> Result<EdgeGrid, CliError> {
        let length = self
            .length
            .unwrap_or_else(|| EdgeGrid::default_length(self.graph.power(), self.a));
        EdgeGrid::with_spacing(length, self.h).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::parse(
            r#"{"graph": {"edges": 4, "incoming": 2, "alphas": [1, 1, 1, 1], "p": 1}}"#,
        )
        .unwrap();
        assert_eq!((c.a, c.h, c.seed), (0.0, 0.01, 7));
        assert_eq!(c.evolve.kind, RunKind::Orbit);
        assert_eq!((c.evolve.tau(), c.evolve.t_end()), (1e-3, 20.0));
        assert_eq!(c.pattern().bits(), &[1, 1, 0, 0]);
    }

    #[test]
    fn unknown_field_reports_position() {
        let e = ExperimentConfig::parse(
            "{\n  \"graph\": {\"edges\": 4, \"incoming\": 2, \"alphas\": [1, 1, 1, 1], \"p\": 1},\n  \"shfit\": 1\n}",
        )
        .unwrap_err();
        assert!(e.starts_with("3:"), "{e}");
        assert!(e.contains("shfit"), "{e}");
    }

    #[test]
    fn constraint_violation_is_a_config_error() {
        let e = ExperimentConfig::parse(
            r#"{"graph": {"edges": 4, "incoming": 2, "alphas": [1, 1, 1, 2], "p": 1}}"#,
        )
        .unwrap_err();
        assert!(e.contains("constraint"), "{e}");
    }

    #[test]
    fn overrides_win() {
        let mut c = ExperimentConfig::parse(
            r#"{"graph": {"edges": 4, "incoming": 2, "alphas": [1, 1, 1, 1], "p": 1}, "a": 0.5,
                "evolve": {"kind": "growth"}}"#,
        )
        .unwrap();
        assert_eq!(c.evolve.tau(), 2e-3);
        c.apply(&Overrides {
            a: Some(-0.7),
            tau: Some(1e-2),
            seed: Some(3),
            ..Default::default()
        });
        assert_eq!((c.a, c.evolve.tau(), c.seed), (-0.7, 1e-2, 3));
        assert!(c.check().is_ok());
        c.h = -1.0;
        assert!(matches!(c.check(), Err(CliError::Config(_))));
    }
}
