//! System description files.
//!
//! ```json
//! {
//!   "state_vars": ["x1", "x2"],
//!   "dynamics": ["x2", "u*x2^2 - x1"],
//!   "control_step": 0.2,
//!   "steps": 35,
//!   "init": [[0.8, 0.9], [0.5, 0.6]],
//!   "goal": [[0.0, 0.2], [0.05, 0.3]]
//! }
//! ```
//!
//! Optional keys: `control_vars` (default `["u"]`), `model` (weight file path,
//! relative to the system file), and `params` with verification settings. A
//! `null` goal entry leaves that dimension unconstrained.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bernstein::DegreeVector;
use crate::dynamics::{parse_expr, SystemSpec, Symbols};
use crate::error::{Error, Result};
use crate::flowpipe::{Mode, VerifyParams};
use crate::interval::{Interval, IntervalBox};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tm_order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substeps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rebox_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbolic_remainder: Option<bool>,
}

impl ParamOverrides {
    /// Values set in `other` win.
    pub fn merged(&self, other: &ParamOverrides) -> ParamOverrides {
        ParamOverrides {
            degree: other.degree.clone().or_else(|| self.degree.clone()),
            delta_bar: other.delta_bar.or(self.delta_bar),
            tm_order: other.tm_order.or(self.tm_order),
            substeps: other.substeps.or(self.substeps),
            mode: other.mode.or(self.mode),
            width_cap: other.width_cap.or(self.width_cap),
            max_samples: other.max_samples.or(self.max_samples),
            rebox_every: other.rebox_every.or(self.rebox_every),
            symbolic_remainder: other.symbolic_remainder.or(self.symbolic_remainder),
        }
    }

    /// Resolves against the defaults for a system of dimension `n`.
    pub fn resolve(&self, n: usize) -> Result<VerifyParams> {
        let degree = match &self.degree {
            Some(d) if d.len() == 1 && n > 1 => DegreeVector::uniform(n, d[0])?,
            Some(d) => DegreeVector::new(d.clone())?,
            None => DegreeVector::uniform(n, DEFAULT_DEGREE)?,
        };
        let mut p = VerifyParams::new(degree, self.delta_bar.unwrap_or(DEFAULT_DELTA_BAR));
        if let Some(k) = self.tm_order {
            p.tm_order = k;
        }
        if let Some(s) = self.substeps {
            p.substeps = s;
        }
        if let Some(m) = self.mode {
            p.mode = m;
        }
        if let Some(w) = self.width_cap {
            p.width_cap = w;
        }
        if let Some(s) = self.max_samples {
            p.max_samples = s;
        }
        p.rebox_every = self.rebox_every;
        if let Some(b) = self.symbolic_remainder {
            p.symbolic_remainder = b;
        }
        Ok(p)
    }
}

impl<'de> Deserialize<'de> for Mode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub const DEFAULT_DEGREE: u32 = 3;
pub const DEFAULT_DELTA_BAR: f64 = 0.01;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    state_vars: Vec<String>,
    #[serde(default = "default_controls")]
    control_vars: Vec<String>,
    dynamics: Vec<String>,
    control_step: f64,
    steps: usize,
    init: Vec<[f64; 2]>,
    goal: Vec<Option<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "is_default")]
    params: ParamOverrides,
}

fn is_default(p: &ParamOverrides) -> bool {
    *p == ParamOverrides::default()
}

fn default_controls() -> Vec<String> {
    vec!["u".to_string()]
}

/// A parsed system file.
#[derive(Clone, Debug)]
pub struct SystemFile {
    pub system: SystemSpec,
    /// Weight file, resolved against the system file's directory.
    pub model: Option<PathBuf>,
    pub params: ParamOverrides,
}

fn config_err(path: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        msg: msg.into(),
    }
}

/// Parses a system description.
pub fn load_system_file(text: &str) -> Result<SystemFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawSystem = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_err(path, e.into_inner().to_string())
    })?;
    let n = raw.state_vars.len();
    if n == 0 {
        return Err(config_err("state_vars", "at least one state variable is required"));
    }
    let symbols = Symbols::new(raw.state_vars.clone(), raw.control_vars.clone())
        .map_err(|e| config_err("state_vars", e.to_string()))?;
    if raw.dynamics.len() != n {
        return Err(config_err(
            "dynamics",
            format!("{} expressions for {} state variables", raw.dynamics.len(), n),
        ));
    }
    let rhs = raw
        .dynamics
        .iter()
        .enumerate()
        .map(|(i, s)| parse_expr(s, &symbols).map_err(|e| config_err(format!("dynamics[{i}]"), e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    if raw.init.len() != raw.goal.len() {
        return Err(config_err(
            "goal",
            format!("init has {} entries but goal has {}", raw.init.len(), raw.goal.len()),
        ));
    }
    if raw.init.len() != n {
        return Err(config_err(
            "init",
            format!("init has {} entries for {} state variables", raw.init.len(), n),
        ));
    }
    let interval = |path: String, [lo, hi]: [f64; 2]| {
        Interval::new(lo, hi).map_err(|e| config_err(path, e.to_string()))
    };
    let init = raw
        .init
        .iter()
        .enumerate()
        .map(|(i, &b)| interval(format!("init[{i}]"), b))
        .collect::<Result<Vec<_>>>()?;
    let goal = raw
        .goal
        .iter()
        .enumerate()
        .map(|(i, b)| match b {
            Some(b) => interval(format!("goal[{i}]"), *b),
            None => Ok(Interval::entire()),
        })
        .collect::<Result<Vec<_>>>()?;
    let system = SystemSpec::new(
        symbols,
        rhs,
        raw.control_step,
        raw.steps,
        IntervalBox::new(init),
        IntervalBox::new(goal),
    )
    .map_err(|e| config_err("", e.to_string()))?;
    Ok(SystemFile {
        system,
        model: raw.model,
        params: raw.params,
    })
}

/// Parses a system description, ignoring optional settings.
pub fn load_system(text: &str) -> Result<SystemSpec> {
    load_system_file(text).map(|f| f.system)
}

/// Reads a system file from disk; a relative `model` path is resolved
/// against the file's directory.
pub fn read_system_file(path: &Path) -> Result<SystemFile> {
    let text = std::fs::read_to_string(path)?;
    let mut f = load_system_file(&text)?;
    if let (Some(m), Some(dir)) = (&f.model, path.parent()) {
        if m.is_relative() {
            f.model = Some(dir.join(m));
        }
    }
    Ok(f)
}

/// Serializes a system in the format accepted by [`load_system`].
pub fn system_to_json(sys: &SystemSpec) -> serde_json::Value {
    let raw = RawSystem {
        state_vars: sys.symbols.state.clone(),
        control_vars: sys.symbols.control.clone(),
        dynamics: sys.rhs.iter().map(|e| e.display(&sys.symbols).to_string()).collect(),
        control_step: sys.control_step,
        steps: sys.steps,
        init: sys.init.iter().map(|iv| [iv.lo(), iv.hi()]).collect(),
        goal: sys
            .goal
            .iter()
            .map(|iv| iv.is_finite().then(|| [iv.lo(), iv.hi()]))
            .collect(),
        model: None,
        params: ParamOverrides::default(),
    };
    serde_json::to_value(raw).expect("system serializes")
}
