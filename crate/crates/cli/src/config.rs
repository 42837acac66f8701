use std::path::{Path, PathBuf};

use lpv_guidance::planner::{default_circuit, read_waypoints};
use lpv_guidance::{
    ActuatorLimits, LpvConfig, PlannerConstraints, SchedulingBounds, SynthesisConfig, VehicleParams, Waypoint,
};
use serde::{Deserialize, Serialize};
use toml::Value;

use crate::CliError;

/// Environment variables with this prefix override config keys; `__` separates path segments,
/// e.g. `LPV_GUIDE__SYNTHESIS__DYNAMIC__DECAY=2.5`.
pub const ENV_PREFIX: &str = "LPV_GUIDE__";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub vehicle: VehicleParams,
    pub limits: ActuatorLimits,
    pub lpv: LpvConfig,
    pub bounds: BoundsSection,
    pub synthesis: SynthesisSection,
    pub planner: PlannerSection,
    pub scenario: ScenarioSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub kinematic: SchedulingBounds,
    pub dynamic: SchedulingBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSection {
    pub kinematic: SynthesisConfig,
    pub dynamic: SynthesisConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSection {
    pub constraints: PlannerConstraints,
    /// Sampling period of the reference trajectory [s].
    pub sample_period: f64,
    /// Closed loop through the waypoints; inferred when absent (closed iff the file or list
    /// is the built-in circuit, or its first and last points coincide).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waypoints: Option<Vec<Waypoint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waypoints_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub ts_kin: f64,
    pub ts_dyn: f64,
    /// Simulated duration [s]; the planned trajectory's length when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            vehicle: VehicleParams::default(),
            limits: ActuatorLimits::default(),
            lpv: LpvConfig::default(),
            bounds: BoundsSection {
                kinematic: SchedulingBounds::kinematic_default(),
                dynamic: SchedulingBounds::dynamic_default(),
            },
            synthesis: SynthesisSection {
                kinematic: SynthesisConfig::kinematic_default(),
                dynamic: SynthesisConfig::dynamic_default(),
            },
            planner: PlannerSection {
                constraints: PlannerConstraints::default(),
                sample_period: 0.1,
                closed: None,
                waypoints: None,
                waypoints_file: None,
            },
            scenario: ScenarioSection {
                ts_kin: 0.1,
                ts_dyn: 0.01,
                horizon: None,
            },
        }
    }
}

impl RunConfig {
    /// Defaults, then the file (if any), then `LPV_GUIDE__*` variables from the process
    /// environment. Missing keys keep their defaults; unknown keys are rejected.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        Self::load_with_env(path, std::env::vars())
    }

    pub fn load_with_env(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        let mut cfg = Self::from_toml_with_env(&text, env)?;
        if let (Some(base), Some(file)) = (path.and_then(Path::parent), cfg.planner.waypoints_file.as_mut()) {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        Self::from_toml_with_env(text, std::iter::empty())
    }

    pub fn from_toml_with_env(text: &str, env: impl IntoIterator<Item = (String, String)>) -> Result<Self, CliError> {
        let mut merged = Value::try_from(Self::default()).map_err(|e| CliError::Config(e.to_string()))?;
        let user: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        merge(&mut merged, Value::Table(user));
        apply_env(&mut merged, env)?;
        let cfg: Self = merged
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let check = |r: lpv_guidance::Result<()>| r.map_err(|e| CliError::Config(e.to_string()));
        check(self.vehicle.validate())?;
        check(self.limits.validate())?;
        check(self.lpv.validate(self.limits.delta_max))?;
        check(self.bounds.kinematic.validate())?;
        check(self.bounds.dynamic.validate())?;
        if self.bounds.kinematic.len() != 3 {
            return Err(CliError::Config(format!(
                "bounds.kinematic needs 3 variables (v_d, omega, theta_e), got {}",
                self.bounds.kinematic.len()
            )));
        }
        if self.bounds.dynamic.len() != 2 {
            return Err(CliError::Config(format!(
                "bounds.dynamic needs 2 variables (v, sigma), got {}",
                self.bounds.dynamic.len()
            )));
        }
        check(self.synthesis.kinematic.validate(3, 2))?;
        check(self.synthesis.dynamic.validate(6, 2))?;
        check(self.planner.constraints.validate())?;
        if self.planner.sample_period.is_nan() || self.planner.sample_period <= 0.0 {
            return Err(CliError::Config("planner.sample_period must be positive".into()));
        }
        if self.planner.waypoints.is_some() && self.planner.waypoints_file.is_some() {
            return Err(CliError::Config(
                "give planner.waypoints or planner.waypoints_file, not both".into(),
            ));
        }
        let (tk, td) = (self.scenario.ts_kin, self.scenario.ts_dyn);
        if !(td > 0.0 && tk >= td) || ((tk / td) - (tk / td).round()).abs() > 1e-9 * (tk / td) {
            return Err(CliError::Config(format!(
                "scenario.ts_kin ({tk}) must be a positive integer multiple of scenario.ts_dyn ({td})"
            )));
        }
        if let Some(h) = self.scenario.horizon {
            if h.is_nan() || h <= 0.0 {
                return Err(CliError::Config(format!("scenario.horizon must be positive, got {h}")));
            }
        }
        Ok(())
    }

    /// Waypoints and the closed flag; `circuit` overrides the configured source.
    pub fn waypoints(&self, circuit: Option<&Path>) -> Result<(Vec<Waypoint>, bool), CliError> {
        let file = circuit.or(self.planner.waypoints_file.as_deref());
        let (points, builtin) = match (file, &self.planner.waypoints) {
            (Some(f), _) => (read_waypoints(f).map_err(|e| CliError::Config(e.to_string()))?, false),
            (None, Some(w)) => (w.clone(), false),
            (None, None) => (default_circuit(), true),
        };
        if points.len() < 2 {
            return Err(CliError::Config(format!(
                "need at least 2 waypoints, got {}",
                points.len()
            )));
        }
        let closed = self.planner.closed.unwrap_or_else(|| {
            let (a, b) = (points[0], points[points.len() - 1]);
            builtin || (a.x - b.x).hypot(a.y - b.y) < 1e-9
        });
        let mut points = points;
        if closed && points.len() > 2 {
            let (a, b) = (points[0], points[points.len() - 1]);
            if (a.x - b.x).hypot(a.y - b.y) < 1e-9 {
                points.pop();
            }
        }
        Ok((points, closed))
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Table(b), Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn apply_env(root: &mut Value, env: impl IntoIterator<Item = (String, String)>) -> Result<(), CliError> {
    let mut vars: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..]
            .split("__")
            .map(str::to_ascii_lowercase)
            .collect();
        if path.iter().any(String::is_empty) {
            return Err(CliError::Config(format!("malformed override variable {key}")));
        }
        let value = parse_scalar(&raw);
        let mut node = &mut *root;
        for (i, seg) in path.iter().enumerate() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| CliError::Config(format!("{key}: '{seg}' is not inside a section")))?;
            if i + 1 == path.len() {
                table.insert(seg.clone(), value.clone());
                break;
            }
            node = table
                .entry(seg.clone())
                .or_insert_with(|| Value::Table(Default::default()));
        }
    }
    Ok(())
}

/// TOML literal if it parses as one (numbers, booleans, arrays), otherwise a bare string.
fn parse_scalar(raw: &str) -> Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}
