//! Run configuration: a flat JSON object (one nesting level for
//! `hamiltonian` and `u0`), overridden by `--set key=value` flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use tfhj_core::fraccalc::FracOrder;
use tfhj_core::hamiltonian::{HamiltonianSpec, InitialData};
use tfhj_core::homogenize::SweepConfig;
use tfhj_core::tfhj::{Scheme, TimeOrder};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unknown config key: {0}")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("`{key}` = {value} is outside the accepted range {range}{hint}")]
    Range { key: String, value: String, range: String, hint: String },
    #[error("malformed override `{0}` (expected key=value)")]
    Override(String),
    #[error("no subcommand given (pass one on the command line or set `subcommand`)")]
    MissingSubcommand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    CaputoCheck,
    Cell,
    Solve,
    Homogenize,
    Lemmas,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianConfig {
    Eikonal,
    EikonalPotential {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one_u32")]
        frequency: u32,
    },
    EikonalPlusConstant {
        c0: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn one_u32() -> u32 {
    1
}

impl HamiltonianConfig {
    pub fn build(&self) -> tfhj_core::Result<HamiltonianSpec> {
        match *self {
            Self::Eikonal => Ok(HamiltonianSpec::eikonal()),
            Self::EikonalPotential { amplitude, frequency } => HamiltonianSpec::eikonal_potential(amplitude, frequency),
            Self::EikonalPlusConstant { c0 } => HamiltonianSpec::eikonal_plus_constant(c0),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    subcommand: Option<Subcommand>,
    hamiltonian: Option<HamiltonianConfig>,
    u0: Option<InitialData>,
    alpha: Option<f64>,
    classical: Option<bool>,
    #[serde(rename = "T", alias = "t_final")]
    t_final: Option<f64>,
    n_steps: Option<usize>,
    n_cells: Option<usize>,
    eps: Option<f64>,
    eps_ladder: Option<Vec<f64>>,
    lambda_ladder: Option<Vec<f64>>,
    nu: Option<f64>,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    scheme: Option<Scheme>,
    cell_cells: Option<usize>,
    p_min: Option<f64>,
    p_max: Option<f64>,
    p_count: Option<usize>,
    snapshots: Option<Vec<f64>>,
}

/// Fully validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub hamiltonian: HamiltonianConfig,
    pub u0: InitialData,
    pub alpha: f64,
    pub classical: bool,
    pub t_final: f64,
    pub n_steps: usize,
    pub n_cells: usize,
    pub eps: f64,
    pub eps_ladder: Vec<f64>,
    pub lambda_ladder: Vec<f64>,
    pub nu: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub scheme: Scheme,
    pub cell_cells: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub p_count: usize,
    /// Times written by `solve`.
    pub snapshots: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sweep = SweepConfig::default();
        Self {
            subcommand: Subcommand::Homogenize,
            hamiltonian: HamiltonianConfig::EikonalPotential { amplitude: 1.0, frequency: 1 },
            u0: sweep.u0,
            alpha: 0.5,
            classical: false,
            t_final: sweep.t_final,
            n_steps: sweep.n_steps,
            n_cells: sweep.n_cells,
            eps: 0.25,
            eps_ladder: sweep.eps_ladder,
            lambda_ladder: sweep.lambda_ladder,
            nu: sweep.nu,
            output_dir: PathBuf::from("out"),
            seed: 0,
            scheme: sweep.scheme,
            cell_cells: sweep.cell_cells,
            p_min: sweep.p_table.0,
            p_max: sweep.p_table.1,
            p_count: sweep.p_table.2,
            snapshots: vec![0.0, 0.5, 1.0],
        }
    }
}

fn range(key: &str, value: impl ToString, range: &str) -> ConfigError {
    ConfigError::Range { key: key.into(), value: value.to_string(), range: range.into(), hint: String::new() }
}

fn check_reciprocal(key: &str, eps: f64) -> Result<(), ConfigError> {
    let inv = 1.0 / eps;
    if !(eps > 0.0 && eps <= 1.0) || (inv - inv.round()).abs() > 1e-9 * inv {
        return Err(ConfigError::Range {
            key: key.into(),
            value: eps.to_string(),
            range: "{1/k : k = 1, 2, ...}".into(),
            hint: " (1/eps must be an integer on the unit torus)".into(),
        });
    }
    Ok(())
}

fn check_ladder(key: &str, ladder: &[f64], min_len: usize) -> Result<(), ConfigError> {
    if ladder.len() < min_len {
        return Err(ConfigError::Invalid { key: key.into(), message: format!("needs at least {min_len} entries") });
    }
    if ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(ConfigError::Invalid { key: key.into(), message: "entries must be strictly decreasing".into() });
    }
    Ok(())
}

impl RunConfig {
    /// Reads `path` (if any), applies `overrides`, and validates. A
    /// subcommand given on the command line wins over the file.
    pub fn load(path: Option<&Path>, overrides: &[String], subcommand: Option<Subcommand>) -> Result<Self, ConfigError> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.into(), source })?;
                serde_json::from_str::<Value>(&text).map_err(|e| ConfigError::Parse {
                    line: e.line(),
                    column: e.column(),
                    message: e.to_string(),
                })?
            }
            None => Value::Object(Map::new()),
        };
        if !value.is_object() {
            return Err(ConfigError::Parse { line: 1, column: 1, message: "top level must be a JSON object".into() });
        }
        for item in overrides {
            apply_override(&mut value, item)?;
        }
        if let Some(sc) = subcommand {
            value["subcommand"] = serde_json::to_value(sc).expect("subcommand serializes");
        }
        Self::from_value(value)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_value(value)
    }

    fn from_value(value: Value) -> Result<Self, ConfigError> {
        // Unit variants of tagged enums silently accept extra fields.
        for (key, unit_kinds) in [("hamiltonian", &["eikonal"][..]), ("u0", &["zero"][..])] {
            if let Some(Value::Object(obj)) = value.get(key) {
                let kind = obj.get("kind").and_then(Value::as_str).unwrap_or_default();
                if unit_kinds.contains(&kind) {
                    if let Some(extra) = obj.keys().find(|k| k.as_str() != "kind") {
                        return Err(ConfigError::UnknownKey(format!("{key}.{extra} (kind `{kind}` takes no parameters)")));
                    }
                }
            }
        }
        let raw: RawConfig = serde_json::from_value(value).map_err(|e| {
            let msg = e.to_string();
            if msg.contains("unknown field") || msg.contains("unknown variant") {
                ConfigError::UnknownKey(msg)
            } else {
                ConfigError::Parse { line: e.line(), column: e.column(), message: msg }
            }
        })?;
        let d = Self::default();
        let cfg = Self {
            subcommand: raw.subcommand.ok_or(ConfigError::MissingSubcommand)?,
            hamiltonian: raw.hamiltonian.unwrap_or(d.hamiltonian),
            u0: raw.u0.unwrap_or(d.u0),
            alpha: raw.alpha.unwrap_or(d.alpha),
            classical: raw.classical.unwrap_or(d.classical),
            t_final: raw.t_final.unwrap_or(d.t_final),
            n_steps: raw.n_steps.unwrap_or(d.n_steps),
            n_cells: raw.n_cells.unwrap_or(d.n_cells),
            eps: raw.eps.unwrap_or(d.eps),
            eps_ladder: raw.eps_ladder.unwrap_or(d.eps_ladder),
            lambda_ladder: raw.lambda_ladder.unwrap_or(d.lambda_ladder),
            nu: raw.nu.unwrap_or(d.nu),
            output_dir: raw.output_dir.unwrap_or(d.output_dir),
            seed: raw.seed.unwrap_or(d.seed),
            scheme: raw.scheme.unwrap_or(d.scheme),
            cell_cells: raw.cell_cells.unwrap_or(d.cell_cells),
            p_min: raw.p_min.unwrap_or(d.p_min),
            p_max: raw.p_max.unwrap_or(d.p_max),
            p_count: raw.p_count.unwrap_or(d.p_count),
            snapshots: raw.snapshots.unwrap_or(d.snapshots),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ConfigError::Range {
                key: "alpha".into(),
                value: self.alpha.to_string(),
                range: "(0, 1)".into(),
                hint: "; for the α = 1 baseline set \"classical\": true instead".into(),
            });
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(range("T", self.t_final, "(0, ∞)"));
        }
        if self.n_steps < 2 {
            return Err(range("n_steps", self.n_steps, "[2, ∞)"));
        }
        if self.n_cells < 16 {
            return Err(range("n_cells", self.n_cells, "[16, ∞)"));
        }
        if self.cell_cells < 16 {
            return Err(range("cell_cells", self.cell_cells, "[16, ∞)"));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(range("nu", self.nu, "(0, 1)"));
        }
        check_reciprocal("eps", self.eps)?;
        for &e in &self.eps_ladder {
            check_reciprocal("eps_ladder", e)?;
        }
        check_ladder("eps_ladder", &self.eps_ladder, 3)?;
        let resolved: Vec<(&str, f64)> = match self.subcommand {
            Subcommand::Solve => vec![("eps", self.eps)],
            Subcommand::Homogenize => self.eps_ladder.iter().map(|&e| ("eps_ladder", e)).collect(),
            _ => Vec::new(),
        };
        for (key, eps) in resolved {
            if (self.n_cells as f64) * eps < 16.0 - 1e-9 {
                return Err(ConfigError::Invalid {
                    key: "n_cells".into(),
                    message: format!("{} cells do not resolve {key} entry {eps} (need n_cells ≥ 16/eps)", self.n_cells),
                });
            }
        }
        if self.lambda_ladder.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(range("lambda_ladder", format!("{:?}", self.lambda_ladder), "(0, ∞)"));
        }
        check_ladder("lambda_ladder", &self.lambda_ladder, 3)?;
        if !(self.p_min < self.p_max) || !self.p_min.is_finite() || !self.p_max.is_finite() {
            return Err(ConfigError::Invalid { key: "p_min".into(), message: "need finite p_min < p_max".into() });
        }
        if self.p_count < 2 {
            return Err(range("p_count", self.p_count, "[2, ∞)"));
        }
        if let Some(t) = self.snapshots.iter().find(|&&t| !(t >= 0.0 && t <= self.t_final)) {
            return Err(range("snapshots", t, "[0, T]"));
        }
        self.u0.validate().map_err(|e| ConfigError::Invalid { key: "u0".into(), message: e.to_string() })?;
        self.hamiltonian
            .build()
            .map_err(|e| ConfigError::Invalid { key: "hamiltonian".into(), message: e.to_string() })?;
        Ok(())
    }

    pub fn time_order(&self) -> TimeOrder {
        if self.classical {
            TimeOrder::Classical
        } else {
            TimeOrder::Caputo(FracOrder::new(self.alpha).expect("validated alpha"))
        }
    }

    pub fn hamiltonian_spec(&self) -> HamiltonianSpec {
        self.hamiltonian.build().expect("validated hamiltonian")
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            hamiltonian: self.hamiltonian_spec(),
            u0: self.u0,
            order: self.time_order(),
            t_final: self.t_final,
            n_steps: self.n_steps,
            n_cells: self.n_cells,
            eps_ladder: self.eps_ladder.clone(),
            lambda_ladder: self.lambda_ladder.clone(),
            nu: self.nu,
            scheme: self.scheme,
            cell_cells: self.cell_cells,
            p_table: (self.p_min, self.p_max, self.p_count),
            ..SweepConfig::default()
        }
    }
}

/// `key=value` with `value` read as JSON when possible, otherwise as a
/// string. `a.b=v` sets a field of the nested object `a`.
fn apply_override(root: &mut Value, item: &str) -> Result<(), ConfigError> {
    let (key, raw) = item.split_once('=').ok_or_else(|| ConfigError::Override(item.into()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::Override(item.into()));
    }
    let value = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut parts = key.split('.');
    let head = parts.next().expect("nonempty key");
    let rest: Vec<&str> = parts.collect();
    match rest.as_slice() {
        [] => {
            root[head] = value;
        }
        [field] => {
            let slot = &mut root[head];
            if !slot.is_object() {
                *slot = Value::Object(Map::new());
            }
            slot[*field] = value;
        }
        _ => return Err(ConfigError::Override(format!("{item} (at most one level of nesting)"))),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_defaults() {
        let cfg = RunConfig::from_json(r#"{"subcommand": "homogenize"}"#).unwrap();
        let d = RunConfig::default();
        assert_eq!(cfg.subcommand, Subcommand::Homogenize);
        assert_eq!(cfg.alpha, 0.5);
        assert_eq!(cfg.n_steps, d.n_steps);
        assert_eq!(cfg.eps_ladder, d.eps_ladder);
        assert_eq!(cfg.hamiltonian, HamiltonianConfig::EikonalPotential { amplitude: 1.0, frequency: 1 });
    }

    #[test]
    fn alpha_one_is_rejected_with_hint() {
        let err = RunConfig::from_json(r#"{"subcommand": "solve", "alpha": 1.0}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("alpha") && msg.contains("(0, 1)") && msg.contains("classical"), "{msg}");
    }

    #[test]
    fn non_reciprocal_eps_is_rejected() {
        let err = RunConfig::from_json(r#"{"subcommand": "homogenize", "eps_ladder": [0.25, 0.3, 0.0625]}"#).unwrap_err();
        assert!(err.to_string().contains("eps_ladder"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_json(r#"{"subcommand": "cell", "alhpa": 0.5}"#).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey(_)), "{err}");
        let err = RunConfig::from_json(r#"{"subcommand": "cell", "hamiltonian": {"kind": "eikonal", "x": 1}}"#).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey(_)), "{err}");
    }

    #[test]
    fn parse_errors_report_position() {
        let err = RunConfig::from_json("{\n  \"subcommand\": \"cell\",\n  \"alpha\": ,\n}").unwrap_err();
        match err {
            ConfigError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn overrides_win() {
        let mut v = serde_json::json!({"subcommand": "solve", "alpha": 0.3});
        apply_override(&mut v, "alpha=0.7").unwrap();
        apply_override(&mut v, "hamiltonian.kind=eikonal").unwrap();
        apply_override(&mut v, "output_dir=results").unwrap();
        let cfg = RunConfig::from_value(v).unwrap();
        assert_eq!(cfg.alpha, 0.7);
        assert_eq!(cfg.hamiltonian, HamiltonianConfig::Eikonal);
        assert_eq!(cfg.output_dir, PathBuf::from("results"));
        let mut v = serde_json::json!({});
        assert!(matches!(apply_override(&mut v, "alpha"), Err(ConfigError::Override(_))));
        assert!(matches!(apply_override(&mut v, "a.b.c=1"), Err(ConfigError::Override(_))));
    }

    #[test]
    fn resolution_is_checked() {
        let err = RunConfig::from_json(r#"{"subcommand": "homogenize", "n_cells": 512}"#).unwrap_err();
        assert!(err.to_string().contains("n_cells"), "{err}");
        let err = RunConfig::from_json(r#"{"subcommand": "solve", "eps": 0.03125, "n_cells": 256}"#).unwrap_err();
        assert!(err.to_string().contains("n_cells"), "{err}");
        assert!(RunConfig::from_json(r#"{"subcommand": "solve", "n_cells": 64}"#).is_ok());
    }
}
