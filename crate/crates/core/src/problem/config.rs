//! Run configuration, parsed from TOML.
//!
//! Every table rejects unknown keys. The layout is
//!
//! ```toml
//! [problem]
//! dimension = 1
//! [problem.diffusion]            # optional, identity when omitted
//! a11 = { constant = 1.0, terms = [{ amplitude = 0.5, wave = [1, 0] }] }
//! [problem.reaction]
//! scale = 1.0
//! base = { kind = "cubic", a = 0.3 }
//! modulation = [{ amplitude = 0.05, wave = [1, 0], g = [0.0, 1.0, -1.0] }]
//!
//! [grid]
//! points_per_period = 50
//! extent_periods = 60
//!
//! [run]
//! horizon = 200.0
//! [run.tolerances]
//! zero_speed_tol = 5e-3
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub run: RunConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub dimension: usize,
    #[serde(default)]
    pub diffusion: DiffusionConfig,
    pub reaction: ReactionConfig,
}

/// Diagonal diffusion matrix; each entry is a cosine series in `x`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DiffusionConfig {
    #[serde(default = "TrigSeries::one")]
    pub a11: TrigSeries,
    #[serde(default = "TrigSeries::one")]
    pub a22: TrigSeries,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            a11: TrigSeries::one(),
            a22: TrigSeries::one(),
        }
    }
}

/// `constant + sum amplitude * cos(2 pi wave . x)`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrigSeries {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<TrigTerm>,
}

impl TrigSeries {
    pub fn one() -> Self {
        Self {
            constant: 1.0,
            terms: Vec::new(),
        }
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|t| t.amplitude * t.phase(x).cos())
                .sum::<f64>()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub wave: [i32; 2],
}

impl TrigTerm {
    pub fn phase(&self, x: [f64; 2]) -> f64 {
        2.0 * std::f64::consts::PI * (self.wave[0] as f64 * x[0] + self.wave[1] as f64 * x[1])
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReactionConfig {
    #[serde(default = "one")]
    pub scale: f64,
    pub base: BaseReaction,
    #[serde(default)]
    pub modulation: Vec<Modulation>,
}

fn one() -> f64 {
    1.0
}

/// Spatially homogeneous part of the nonlinearity.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseReaction {
    /// `u (1 - u) (u - a)`.
    Cubic { a: f64 },
    /// `-u (u - a1) (u - a2) (u - a3) (u - 1)`.
    Quintic { a1: f64, a2: f64, a3: f64 },
    /// `-prod (u - r)`.
    Roots { roots: Vec<f64> },
    /// Ascending coefficients.
    Coefficients { coefficients: Vec<f64> },
}

/// `amplitude * cos(2 pi wave . x) * g(u)`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Modulation {
    pub amplitude: f64,
    pub wave: [i32; 2],
    pub g: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "GridConfig::default_ppp")]
    pub points_per_period: usize,
    #[serde(default = "GridConfig::default_extent")]
    pub extent_periods: usize,
}

impl GridConfig {
    fn default_ppp() -> usize {
        20
    }
    fn default_extent() -> usize {
        60
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            points_per_period: Self::default_ppp(),
            extent_periods: Self::default_extent(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Upper bound on the time step.
    pub dt_max: f64,
    /// `dt <= cfl_safety * dx^2 / C2`.
    pub cfl_safety: f64,
    /// `dt <= reaction_limit / Lip(f)`; values up to 1 keep the scheme monotone.
    pub reaction_limit: f64,
    /// Final time of front and Cauchy runs.
    pub horizon: f64,
    /// Interval between tracker observations.
    pub observe_every: f64,
    /// Constant initial levels for the steady-state search.
    pub probes: Vec<f64>,
    /// Horizon of the probe relaxations.
    pub relax_horizon: f64,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dt_max: 0.1,
            cfl_safety: 10.0,
            reaction_limit: 0.5,
            horizon: 200.0,
            observe_every: 0.5,
            probes: (1..20).map(|k| k as f64 * 0.05).collect(),
            relax_horizon: 4000.0,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub steady_tol: f64,
    pub tol_marginal: f64,
    pub dedup_tol: f64,
    pub zero_speed_tol: f64,
    pub speed_se_max: f64,
    /// Floor on speed standard errors (position resolution over the fit window).
    pub se_floor: f64,
    pub r2_min: f64,
    pub monotone_tol: f64,
    pub prof_tol: f64,
    pub profile_match_tol: f64,
    pub comparison_tol: f64,
    pub eps_overshoot: f64,
    /// In periods.
    pub boundary_margin: f64,
    pub geom_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            steady_tol: 1e-10,
            tol_marginal: 1e-4,
            dedup_tol: 1e-5,
            zero_speed_tol: 5e-3,
            speed_se_max: 1e-2,
            se_floor: 1e-5,
            r2_min: 0.999,
            monotone_tol: 1e-3,
            prof_tol: 1e-2,
            profile_match_tol: 2e-2,
            comparison_tol: 1e-10,
            eps_overshoot: 1e-8,
            boundary_margin: 5.0,
            geom_tol: 1e-9,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = Config::from_toml(
            r#"
            [problem]
            dimension = 1
            [problem.reaction]
            base = { kind = "cubic", a = 0.3 }
            "#,
        )
        .unwrap();
        assert_eq!(cfg.grid.points_per_period, 20);
        assert_eq!(cfg.problem.diffusion, DiffusionConfig::default());
        assert_eq!(cfg.run.tolerances.zero_speed_tol, 5e-3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            "[problem]\ndimension = 1\nspeed = 2\n[problem.reaction]\nbase = { kind = \"cubic\", a = 0.3 }",
            "[problem]\ndimension = 1\n[problem.reaction]\nbase = { kind = \"cubic\", a = 0.3, b = 1 }",
            "[problem]\ndimension = 1\n[problem.reaction]\nbase = { kind = \"sextic\" }",
            "[problem]\ndimension = 1\n[problem.reaction]\nbase = { kind = \"cubic\", a = 0.3 }\n[run]\nfoo = 1",
        ] {
            assert!(Config::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = Config::from_toml(
            r#"
            [problem]
            dimension = 2
            [problem.diffusion]
            a11 = { constant = 1.0, terms = [{ amplitude = 0.5, wave = [1, 0] }] }
            [problem.reaction]
            scale = 4.0
            base = { kind = "roots", roots = [0.0, 0.1, 0.4, 0.6, 1.0] }
            modulation = [{ amplitude = 0.05, wave = [1, 1], g = [0.0, 1.0, -1.0] }]
            [grid]
            points_per_period = 10
            "#,
        )
        .unwrap();
        let back = Config::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back.problem.reaction, cfg.problem.reaction);
        assert_eq!(back.problem.diffusion, cfg.problem.diffusion);
    }
}
