//! Experiment configuration files.
//!
//! A configuration is an INI file. Every key must belong to a known section
//! and be valid for the chosen experiment; anything else is rejected so that
//! typos never silently fall back to defaults.
//!
//! ```ini
//! [experiment]
//! kind = tails
//! seed = 7
//!
//! [system]
//! kind = lsv
//! alpha = 0.25
//!
//! [budget]
//! returns = 1000000
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ini::Ini;
use serde::Serialize;
use towerlimits::lorentz::{BilliardTable, Scatterer};
use towerlimits::systems::{make_system, MapSystem, Observable, SystemSpec};

use crate::catalog::{self, ExperimentKind};
use crate::CliError;

/// Raw `section -> key -> value` view of a configuration, as echoed into the
/// summary.
pub type Echo = BTreeMap<String, BTreeMap<String, String>>;

/// The dynamical system an experiment runs on.
#[derive(Debug, Clone)]
pub enum SystemChoice {
    Map(MapSystem),
    Lorentz(BilliardTable),
}

/// Named observable families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    /// `cos(2πkx)`.
    Cos {
        frequency: u32,
    },
    Identity,
    /// `cos 4πx − cos 2πx` on the doubling map.
    Coboundary,
    Constant {
        value: f64,
    },
    /// First velocity component of a billiard flow.
    VelocityX,
    VelocityY,
}

impl ObservableKind {
    pub fn on_map(self) -> Result<Observable, CliError> {
        Ok(match self {
            ObservableKind::Cos { frequency } => Observable::cos_2pi(frequency),
            ObservableKind::Identity => Observable::identity(),
            ObservableKind::Coboundary => Observable::doubling_coboundary(),
            ObservableKind::Constant { value } => Observable::constant(value),
            ObservableKind::VelocityX | ObservableKind::VelocityY => {
                return Err(CliError::Config(
                    "observable velocity_x/velocity_y needs system kind = lorentz".into(),
                ))
            }
        })
    }
}

/// Optional target for one named estimate, checked as an extra verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expectation {
    pub estimate: String,
    pub min: f64,
    pub max: f64,
}

/// Roof `h(x) = base + slope·x` of a suspension flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoofSpec {
    pub base: f64,
    pub slope: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub system: SystemChoice,
    /// Base set for inducing; the system default when absent.
    pub base: Option<(f64, f64)>,
    /// Run on the first-return map instead of the map itself.
    pub induce: Option<bool>,
    pub observable: ObservableKind,
    /// Variance used to normalise limit-law tests; estimated when absent.
    pub sigma2: Option<f64>,
    pub roof: RoofSpec,
    pub budget: BTreeMap<String, f64>,
    pub expect: Option<Expectation>,
    pub echo: Echo,
}

impl ExperimentConfig {
    pub fn map(&self) -> Result<&MapSystem, CliError> {
        match &self.system {
            SystemChoice::Map(m) => Ok(m),
            SystemChoice::Lorentz(_) => Err(CliError::Config(format!(
                "experiment {} needs a map system, not lorentz",
                self.experiment
            ))),
        }
    }

    pub fn table(&self) -> Result<&BilliardTable, CliError> {
        match &self.system {
            SystemChoice::Lorentz(t) => Ok(t),
            SystemChoice::Map(_) => Err(CliError::Config(format!(
                "experiment {} needs system kind = lorentz",
                self.experiment
            ))),
        }
    }

    /// Integer budget `key`, or `default` when not configured.
    pub fn count(&self, key: &str, default: usize) -> usize {
        self.budget.get(key).map_or(default, |&v| v as usize)
    }

    pub fn real(&self, key: &str, default: f64) -> f64 {
        self.budget.get(key).copied().unwrap_or(default)
    }
}

struct Section<'a> {
    name: &'a str,
    keys: BTreeMap<&'a str, &'a str>,
}

impl<'a> Section<'a> {
    fn take(&mut self, key: &str) -> Option<&'a str> {
        self.keys.remove(key)
    }

    fn parse<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => raw
                .trim()
                .parse()
                .map(Some)
                .map_err(|e| CliError::Config(format!("[{}] {key} = {raw:?}: {e}", self.name))),
        }
    }

    /// Reject keys outside `allowed` before any value is interpreted.
    fn allow(&self, allowed: &[&str]) -> Result<(), CliError> {
        match self.keys.keys().find(|k| !allowed.contains(k)) {
            None => Ok(()),
            Some(k) => Err(CliError::Config(format!(
                "unknown key `{k}` in section [{}] (expected one of {})",
                self.name,
                allowed.join(", ")
            ))),
        }
    }

    fn finish(self) -> Result<(), CliError> {
        match self.keys.keys().next() {
            None => Ok(()),
            Some(k) => Err(CliError::Config(format!(
                "unknown key `{k}` in section [{}]",
                self.name
            ))),
        }
    }
}

fn parse_number(section: &str, key: &str, raw: &str) -> Result<f64, CliError> {
    let v: f64 = raw
        .trim()
        .replace('_', "")
        .parse()
        .map_err(|e| CliError::Config(format!("[{section}] {key} = {raw:?}: {e}")))?;
    if !v.is_finite() || v <= 0.0 {
        return Err(CliError::Config(format!(
            "[{section}] {key} must be positive, got {raw}"
        )));
    }
    Ok(v)
}

fn parse_pair(section: &str, key: &str, raw: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("[{section}] {key} = {raw:?}: {e}")))?;
    match parts[..] {
        [a, b] => Ok((a, b)),
        _ => Err(CliError::Config(format!(
            "[{section}] {key} expects two comma-separated numbers"
        ))),
    }
}

/// `x, y, radius; x, y, radius; ...`
fn parse_disks(raw: &str) -> Result<BilliardTable, CliError> {
    let mut scatterers = Vec::new();
    for disk in raw.split(';').filter(|d| !d.trim().is_empty()) {
        let v: Vec<f64> = disk
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Config(format!("[table] disks = {raw:?}: {e}")))?;
        let [x, y, radius] = v[..] else {
            return Err(CliError::Config(
                "[table] disks expects `x, y, radius` triples separated by `;`".into(),
            ));
        };
        scatterers.push(Scatterer {
            center: [x, y],
            radius,
        });
    }
    BilliardTable::new(scatterers).map_err(|e| CliError::Config(e.to_string()))
}

fn parse_observable(sec: &mut Section) -> Result<ObservableKind, CliError> {
    let kind = sec.take("kind").unwrap_or("cos").trim();
    let frequency = sec.parse::<u32>("frequency")?;
    let value = sec.parse::<f64>("value")?;
    let misplaced = |key: &str| {
        Err(CliError::Config(format!(
            "unknown key `{key}` in section [observable] for kind = {kind}"
        )))
    };
    if kind != "cos" && frequency.is_some() {
        return misplaced("frequency");
    }
    if kind != "constant" && value.is_some() {
        return misplaced("value");
    }
    Ok(match kind {
        "cos" => ObservableKind::Cos {
            frequency: frequency.unwrap_or(1),
        },
        "identity" => ObservableKind::Identity,
        "coboundary" => ObservableKind::Coboundary,
        "constant" => ObservableKind::Constant {
            value: value.ok_or_else(|| {
                CliError::Config("[observable] kind = constant needs `value`".into())
            })?,
        },
        "velocity_x" => ObservableKind::VelocityX,
        "velocity_y" => ObservableKind::VelocityY,
        other => {
            return Err(CliError::Config(format!(
                "unknown observable kind `{other}` (expected cos, identity, coboundary, constant, velocity_x, velocity_y)"
            )))
        }
    })
}

fn parse_system(sec: &mut Section, table: Option<&mut Section>) -> Result<SystemChoice, CliError> {
    let kind = sec.take("kind").unwrap_or("doubling").trim().to_string();
    let alpha = sec.parse::<f64>("alpha")?;
    if kind == "lorentz" {
        if alpha.is_some() {
            return Err(CliError::Config(
                "unknown key `alpha` in section [system] for kind = lorentz".into(),
            ));
        }
        let table = match table.and_then(|t| t.take("disks")) {
            Some(raw) => parse_disks(raw)?,
            None => BilliardTable::two_disk(),
        };
        return Ok(SystemChoice::Lorentz(table));
    }
    if table.is_some() {
        return Err(CliError::Config(
            "section [table] is only valid with system kind = lorentz".into(),
        ));
    }
    let spec = match kind.as_str() {
        "doubling" => {
            if alpha.is_some() {
                return Err(CliError::Config(
                    "unknown key `alpha` in section [system] for kind = doubling".into(),
                ));
            }
            SystemSpec::doubling()
        }
        "lsv" | "neutral_circle" => {
            let alpha = alpha
                .ok_or_else(|| CliError::Config(format!("[system] kind = {kind} needs `alpha`")))?;
            if kind == "lsv" {
                SystemSpec::lsv(alpha)
            } else {
                SystemSpec::neutral_circle(alpha)
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown system kind `{other}` (expected doubling, lsv, neutral_circle, lorentz)"
            )))
        }
    };
    make_system(spec)
        .map(SystemChoice::Map)
        .map_err(|e| CliError::Config(e.to_string()))
}

/// Parse and validate a configuration from INI text.
pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(e.to_string()))?;

    let mut echo = Echo::new();
    let mut sections: BTreeMap<&str, Section> = BTreeMap::new();
    for (name, props) in ini.iter() {
        let Some(name) = name else {
            if let Some((k, _)) = props.iter().next() {
                return Err(CliError::Config(format!(
                    "key `{k}` appears before any section"
                )));
            }
            continue;
        };
        if sections.contains_key(name) {
            return Err(CliError::Config(format!("section [{name}] appears twice")));
        }
        let mut keys = BTreeMap::new();
        for (k, v) in props.iter() {
            if keys.insert(k, v).is_some() {
                return Err(CliError::Config(format!(
                    "key `{k}` appears twice in section [{name}]"
                )));
            }
            echo.entry(name.to_string())
                .or_default()
                .insert(k.to_string(), v.to_string());
        }
        let section = Section { name, keys };
        if let Some(allowed) = catalog::section_keys(name) {
            section.allow(allowed)?;
        }
        sections.insert(name, section);
    }
    if let Some(name) = sections.keys().find(|n| !catalog::SECTIONS.contains(n)) {
        return Err(CliError::Config(format!(
            "unknown section [{name}] (expected one of {})",
            catalog::SECTIONS.join(", ")
        )));
    }

    let mut exp = sections
        .remove("experiment")
        .ok_or_else(|| CliError::Config("missing section [experiment]".into()))?;
    let kind_raw = exp
        .take("kind")
        .ok_or_else(|| CliError::Config("[experiment] needs `kind`".into()))?;
    let experiment: ExperimentKind = kind_raw.trim().parse()?;
    let seed = exp
        .parse::<u64>("seed")?
        .ok_or_else(|| CliError::Config("[experiment] needs `seed`".into()))?;
    let output = exp.take("output").map(|s| PathBuf::from(s.trim()));
    exp.finish()?;

    let mut table = sections.remove("table");
    let mut sys = sections.remove("system").unwrap_or_else(|| Section {
        name: "system",
        keys: BTreeMap::new(),
    });
    let system = parse_system(&mut sys, table.as_mut())?;
    let base = match sys.take("base") {
        Some(raw) => Some(parse_pair("system", "base", raw)?),
        None => None,
    };
    let induce = sys.parse::<bool>("induce")?;
    sys.finish()?;
    if let Some(t) = table {
        t.finish()?;
    }
    if base.is_some() && matches!(system, SystemChoice::Lorentz(_)) {
        return Err(CliError::Config(
            "unknown key `base` in section [system] for kind = lorentz".into(),
        ));
    }

    let mut obs = sections.remove("observable").unwrap_or_else(|| Section {
        name: "observable",
        keys: BTreeMap::new(),
    });
    let mut observable = parse_observable(&mut obs)?;
    let sigma2 = match obs.take("sigma2") {
        Some(raw) => Some(parse_number("observable", "sigma2", raw)?),
        None => None,
    };
    obs.finish()?;
    if matches!(system, SystemChoice::Lorentz(_))
        && !echo
            .get("observable")
            .is_some_and(|o| o.contains_key("kind"))
    {
        observable = ObservableKind::VelocityX;
    }

    let mut roof = RoofSpec {
        base: 1.0,
        slope: 0.0,
    };
    if let Some(mut f) = sections.remove("flow") {
        if let Some(b) = f.parse::<f64>("roof_base")? {
            roof.base = b;
        }
        if let Some(s) = f.parse::<f64>("roof_slope")? {
            roof.slope = s;
        }
        f.finish()?;
    }

    let allowed = experiment.budget_keys();
    let mut budget = BTreeMap::new();
    if let Some(b) = sections.remove("budget") {
        for (k, raw) in &b.keys {
            if !allowed.contains(k) {
                return Err(CliError::Config(format!(
                    "unknown key `{k}` in section [budget] for experiment {experiment} (expected one of {})",
                    allowed.join(", ")
                )));
            }
            budget.insert(k.to_string(), parse_number("budget", k, raw)?);
        }
    }

    let expect = match sections.remove("expect") {
        None => None,
        Some(mut e) => {
            let estimate = e
                .take("estimate")
                .ok_or_else(|| CliError::Config("[expect] needs `estimate`".into()))?
                .trim()
                .to_string();
            let value = e.parse::<f64>("value")?;
            let tolerance = e.parse::<f64>("tolerance")?;
            let min = e.parse::<f64>("min")?;
            let max = e.parse::<f64>("max")?;
            e.finish()?;
            let (min, max) = match (value, tolerance, min, max) {
                (Some(v), Some(t), None, None) => (v - t, v + t),
                (None, None, lo, hi) if lo.is_some() || hi.is_some() => {
                    (lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))
                }
                _ => {
                    return Err(CliError::Config(
                        "[expect] needs either `value` and `tolerance` or `min`/`max`".into(),
                    ))
                }
            };
            Some(Expectation { estimate, min, max })
        }
    };

    if let Some(name) = sections.keys().next() {
        return Err(CliError::Config(format!(
            "section [{name}] is not used by experiment {experiment}"
        )));
    }

    let config = ExperimentConfig {
        experiment,
        seed,
        output,
        system,
        base,
        induce,
        observable,
        sigma2,
        roof,
        budget,
        expect,
        echo,
    };
    experiment.validate(&config)?;
    Ok(config)
}
