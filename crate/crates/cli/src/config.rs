//! Run configuration: an optional TOML or JSON file, then flag overrides,
//! deserialized strictly so that errors name the offending key.

use std::path::{Path, PathBuf};

use dgnet_core::dg::QuadratureMode;
use dgnet_core::physics::FluxScheme;
use dgnet_core::DgError;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// A dotted key and the value to place there.
pub type Override = (String, Value);

/// Parses a command-line override value: JSON when it parses, else a string.
pub fn flag_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Splits `key=value`.
pub fn parse_set(raw: &str) -> Result<Override, String> {
    let (k, v) = raw.split_once('=').ok_or_else(|| format!("expected key=value, got '{raw}'"))?;
    if k.is_empty() {
        return Err("empty key".into());
    }
    Ok((k.to_string(), flag_value(v)))
}

/// Parses configuration text, TOML when `toml` is set and JSON otherwise.
/// The top level must be a table.
pub fn parse_text(text: &str, toml: bool) -> Result<Value, String> {
    let value = if toml {
        let v = toml::from_str::<toml::Value>(text).map_err(|e| e.to_string())?;
        serde_json::to_value(v).map_err(|e| e.to_string())?
    } else {
        serde_json::from_str(text).map_err(|e| e.to_string())?
    };
    if !value.is_object() {
        return Err("top level must be a table".into());
    }
    Ok(value)
}

fn read_file(path: &Path) -> Result<Value, DgError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DgError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    parse_text(&text, is_toml).map_err(|e| DgError::Config(format!("{}: {e}", path.display())))
}

fn insert(root: &mut Value, key: &str, value: Value) -> Result<(), DgError> {
    let mut node = root;
    let mut parts = key.split('.').peekable();
    while let Some(part) = parts.next() {
        let map = node
            .as_object_mut()
            .ok_or_else(|| DgError::Config(format!("{key}: '{part}' is inside a non-table value")))?;
        if parts.peek().is_none() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

/// Builds the typed configuration from `file` and `overrides` (later wins).
/// Returns it with its fully resolved JSON form, defaults included.
pub fn load<T: DeserializeOwned + Serialize>(file: Option<&Path>, overrides: Vec<Override>) -> Result<(T, Value), DgError> {
    let root = match file {
        Some(p) => read_file(p)?,
        None => Value::Object(Map::new()),
    };
    resolve(root, overrides)
}

/// Applies `overrides` to the parsed table `root` and deserializes it.
pub fn resolve<T: DeserializeOwned + Serialize>(mut root: Value, overrides: Vec<Override>) -> Result<(T, Value), DgError> {
    for (k, v) in overrides {
        insert(&mut root, &k, v)?;
    }
    let typed: T = serde_path_to_error::deserialize(root)
        .map_err(|e| DgError::Config(format!("at '{}': {}", e.path(), e.inner())))?;
    let resolved = serde_json::to_value(&typed).map_err(|e| DgError::Config(e.to_string()))?;
    Ok((typed, resolved))
}

/// Problem, mesh and discretization shared by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaseConfig {
    /// Catalog id, e.g. `sod`, `sod-family-3`, `vortex`, `freestream:3:10`.
    pub problem: String,
    pub gamma: f64,
    /// Polynomial order N.
    pub order: usize,
    /// Elements in 1D, cells per side in 2D.
    pub elements: usize,
    /// Refinement level of the vortex meshes.
    pub level: usize,
    /// Mesh file; overrides the generated mesh.
    pub mesh: Option<PathBuf>,
    pub quadrature: QuadratureMode,
    pub flux: FluxScheme,
    /// Slope limiter; problem default when absent.
    pub limiter: Option<bool>,
}

impl Default for CaseConfig {
    fn default() -> Self {
        Self {
            problem: "sod".into(),
            gamma: 1.4,
            order: 1,
            elements: 250,
            level: 0,
            mesh: None,
            quadrature: QuadratureMode::OverIntegration,
            flux: FluxScheme::LaxFriedrichs,
            limiter: None,
        }
    }
}

/// `(T, Δt)` to a step count, rejecting horizons that are not a whole
/// number of steps.
pub fn step_count(t_final: f64, dt: f64) -> Result<usize, DgError> {
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(DgError::Config(format!("need dt > 0 and T >= 0 (got dt = {dt}, T = {t_final})")));
    }
    let n = (t_final / dt).round();
    if (n * dt - t_final).abs() > 1e-9 * t_final.max(dt) {
        return Err(DgError::Config(format!("T = {t_final} is not a multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_nest_and_defaults_fill() {
        let (c, resolved): (CaseConfig, Value) = load(
            None,
            vec![("problem".into(), flag_value("lax")), ("order".into(), flag_value("2"))],
        )
        .unwrap();
        assert_eq!(c.problem, "lax");
        assert_eq!(c.order, 2);
        assert_eq!(resolved["elements"], 250);
    }

    #[test]
    fn unknown_key_reports_its_path() {
        #[derive(Debug, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Outer {
            case: CaseConfig,
        }
        let err = load::<Outer>(None, vec![("case.ordr".into(), flag_value("2"))]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("case"), "{msg}");
        assert!(msg.contains("ordr"), "{msg}");
    }

    #[test]
    fn steps_must_divide_horizon() {
        assert_eq!(step_count(0.25, 1e-4).unwrap(), 2500);
        assert_eq!(step_count(0.1, 0.002).unwrap(), 50);
        assert!(step_count(0.25, 0.003).is_err());
        assert!(step_count(0.25, 0.0).is_err());
    }

    #[test]
    fn set_parses_json_or_string() {
        assert_eq!(parse_set("a.b=3").unwrap(), ("a.b".into(), Value::from(3)));
        assert_eq!(parse_set("p=sod").unwrap().1, Value::from("sod"));
        assert!(parse_set("novalue").is_err());
    }
}
