//! The experiment catalog: kinds, their settings and their outputs.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::config::{ExperimentConfig, ObservableKind, SystemChoice};
use crate::CliError;

/// Sections a configuration file may contain.
pub const SECTIONS: [&str; 7] = [
    "experiment",
    "system",
    "table",
    "observable",
    "flow",
    "budget",
    "expect",
];

/// Keys accepted in each fixed-layout section; `[budget]` keys depend on
/// the experiment kind.
pub fn section_keys(section: &str) -> Option<&'static [&'static str]> {
    Some(match section {
        "experiment" => &["kind", "seed", "output"],
        "system" => &["kind", "alpha", "base", "induce"],
        "table" => &["disks"],
        "observable" => &["kind", "frequency", "value", "sigma2"],
        "flow" => &["roof_base", "roof_slope"],
        "expect" => &["estimate", "value", "tolerance", "min", "max"],
        _ => return None,
    })
}

/// Version of the CSV column layouts listed by `towerlimits list`.
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Tails,
    Decay,
    Variance,
    TowerLift,
    FlowLift,
    Billiard,
    Clt,
    Wip,
    Lil,
    PsConditions,
}

pub const ALL: [ExperimentKind; 10] = [
    ExperimentKind::Tails,
    ExperimentKind::Decay,
    ExperimentKind::Variance,
    ExperimentKind::TowerLift,
    ExperimentKind::FlowLift,
    ExperimentKind::Billiard,
    ExperimentKind::Clt,
    ExperimentKind::Wip,
    ExperimentKind::Lil,
    ExperimentKind::PsConditions,
];

/// One CSV file written by an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesInfo {
    pub file: &'static str,
    pub columns: &'static [&'static str],
}

/// A catalog entry as printed by `list`.
#[derive(Debug, Clone, Serialize)]
pub struct Entry {
    pub kind: ExperimentKind,
    pub description: &'static str,
    pub criteria: &'static [&'static str],
    pub systems: &'static [&'static str],
    pub budget_keys: &'static [&'static str],
    pub series: Vec<SeriesInfo>,
}

const MAPS: &[&str] = &["doubling", "lsv", "neutral_circle"];

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Tails => "tails",
            ExperimentKind::Decay => "decay",
            ExperimentKind::Variance => "variance",
            ExperimentKind::TowerLift => "tower_lift",
            ExperimentKind::FlowLift => "flow_lift",
            ExperimentKind::Billiard => "billiard",
            ExperimentKind::Clt => "clt",
            ExperimentKind::Wip => "wip",
            ExperimentKind::Lil => "lil",
            ExperimentKind::PsConditions => "ps_conditions",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentKind::Tails => {
                "first-return times to the base set: mean (Kac), tail exponent, return-time moment"
            }
            ExperimentKind::Decay => "correlation decay of the induced map with a geometric fit",
            ExperimentKind::Variance => {
                "Green-Kubo and batch-means variance; coboundary decomposition on the doubling map"
            }
            ExperimentKind::TowerLift => {
                "variance of the induced sum divided by the mean return against direct batch means"
            }
            ExperimentKind::FlowLift => {
                "suspension-flow variance from the base against batch means of flow increments"
            }
            ExperimentKind::Billiard => {
                "Lorentz gas geometry: speed, specular reflection, reversibility, mean free time, invariance, horizon"
            }
            ExperimentKind::Clt => "Kolmogorov-Smirnov test of scaled Birkhoff sums or flow integrals",
            ExperimentKind::Wip => "invariance-principle test on scaled partial-sum paths",
            ExperimentKind::Lil => "iterated-logarithm ratio along one long orbit (diagnostic)",
            ExperimentKind::PsConditions => {
                "oscillation sums, distortion and return moment of the induced map"
            }
        }
    }

    pub fn criteria(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Tails => &["AC3", "AC4"],
            ExperimentKind::Decay => &["AC5"],
            ExperimentKind::Variance => &["AC1", "AC2"],
            ExperimentKind::TowerLift => &["AC6"],
            ExperimentKind::FlowLift => &["AC6"],
            ExperimentKind::Billiard => &["AC9"],
            ExperimentKind::Clt => &["AC7", "AC10"],
            ExperimentKind::Wip => &["AC7"],
            ExperimentKind::Lil => &["AC10"],
            ExperimentKind::PsConditions => &["AC8"],
        }
    }

    pub fn systems(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Billiard => &["lorentz"],
            ExperimentKind::Clt => &["doubling", "lsv", "neutral_circle", "lorentz"],
            _ => MAPS,
        }
    }

    pub fn budget_keys(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Tails => &["returns", "batches", "moment_order"],
            ExperimentKind::Decay => &["orbit", "lags"],
            ExperimentKind::Variance => &["orbit", "lags", "block", "grid", "terms"],
            ExperimentKind::TowerLift => &["returns", "orbit", "block", "blocks", "center_orbit"],
            ExperimentKind::FlowLift => {
                &["orbit", "roof_samples", "windows", "block", "center_orbit"]
            }
            ExperimentKind::Billiard => &[
                "collisions",
                "reversal_steps",
                "samples",
                "bins",
                "max_denominator",
                "flight_bound",
            ],
            ExperimentKind::Clt => &[
                "horizon",
                "replicas",
                "batches",
                "orbit",
                "time",
                "collisions",
                "block",
                "center_orbit",
            ],
            ExperimentKind::Wip => &["horizon", "replicas", "grid", "orbit", "center_orbit"],
            ExperimentKind::Lil => &["length", "orbit", "center_orbit"],
            ExperimentKind::PsConditions => {
                &["depth", "samples", "returns", "delta", "beta", "pairs"]
            }
        }
    }

    pub fn series(self) -> Vec<SeriesInfo> {
        let s = |file, columns| SeriesInfo { file, columns };
        match self {
            ExperimentKind::Tails => vec![s("survival.csv", &["threshold", "survival"])],
            ExperimentKind::Decay => vec![s(
                "correlations.csv",
                &["lag", "correlation", "standard_error", "above_floor"],
            )],
            ExperimentKind::Variance => vec![
                s(
                    "correlations.csv",
                    &["lag", "correlation", "standard_error", "above_floor"],
                ),
                s("coboundary.csv", &["x", "v", "w", "v_hat"]),
            ],
            ExperimentKind::TowerLift => vec![s("levels.csv", &["level", "mass"])],
            ExperimentKind::FlowLift => vec![s(
                "correlations.csv",
                &["lag", "correlation", "standard_error", "above_floor"],
            )],
            ExperimentKind::Billiard => vec![
                s(
                    "collisions.csv",
                    &["step", "scatterer", "r", "theta", "free_time"],
                ),
                s("corridors.csv", &["p", "q", "offset", "width"]),
            ],
            ExperimentKind::Clt => vec![s("scaled_sums.csv", &["batch", "replica", "scaled_sum"])],
            ExperimentKind::Wip => vec![s(
                "functionals.csv",
                &["functional", "statistic", "p_value"],
            )],
            ExperimentKind::Lil => vec![s("trajectory.csv", &["n", "ratio"])],
            ExperimentKind::PsConditions => vec![
                s("oscillation.csv", &["depth", "sum", "bound"]),
                s(
                    "distortion.csv",
                    &["depth", "d_hat", "pair_constant", "ratio_min", "ratio_max"],
                ),
            ],
        }
    }

    pub fn entry(self) -> Entry {
        Entry {
            kind: self,
            description: self.description(),
            criteria: self.criteria(),
            systems: self.systems(),
            budget_keys: self.budget_keys(),
            series: self.series(),
        }
    }

    /// Cross-section checks that depend on the experiment kind.
    pub fn validate(self, c: &ExperimentConfig) -> Result<(), CliError> {
        let system = match &c.system {
            SystemChoice::Map(m) => m.kind().to_string(),
            SystemChoice::Lorentz(_) => "lorentz".to_string(),
        };
        if !self.systems().contains(&system.as_str()) {
            return Err(CliError::Config(format!(
                "experiment {self} does not run on system {system} (expected one of {})",
                self.systems().join(", ")
            )));
        }
        let lorentz_obs = matches!(
            c.observable,
            ObservableKind::VelocityX | ObservableKind::VelocityY
        );
        if lorentz_obs != (system == "lorentz") && self != ExperimentKind::Billiard {
            return Err(CliError::Config(format!(
                "observable {:?} does not apply to system {system}",
                c.observable
            )));
        }
        if c.echo.contains_key("flow") && self != ExperimentKind::FlowLift {
            return Err(CliError::Config(format!(
                "section [flow] is not used by experiment {self}"
            )));
        }
        let uses_induce = matches!(self, ExperimentKind::Decay | ExperimentKind::Variance);
        if c.induce.is_some() && !uses_induce {
            return Err(CliError::Config(format!(
                "unknown key `induce` in section [system] for experiment {self}"
            )));
        }
        if c.sigma2.is_some()
            && !matches!(
                self,
                ExperimentKind::Clt | ExperimentKind::Wip | ExperimentKind::Lil
            )
        {
            return Err(CliError::Config(format!(
                "unknown key `sigma2` in section [observable] for experiment {self}"
            )));
        }
        if c.observable == ObservableKind::Coboundary && system != "doubling" {
            return Err(CliError::Config(
                "observable coboundary is defined for the doubling map only".into(),
            ));
        }
        if c.roof.base <= 0.0 || c.roof.base + c.roof.slope.min(0.0) <= 0.0 {
            return Err(CliError::Config(
                "[flow] roof base + slope·x must stay positive on [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            CliError::Config(format!(
                "unknown experiment kind `{s}` (expected one of {})",
                ALL.map(|k| k.name()).join(", ")
            ))
        })
    }
}
