//! Flat `key=value` text form of a model.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::{LinearModel, SharedScalarModel, TabularModel, TransitionModel};
use crate::error::{Error, Result};
use crate::grid::GridSpec;

fn join<T: std::fmt::Debug>(xs: &[T]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

fn split<T: std::str::FromStr>(key: &str, s: &str) -> Result<Vec<T>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad value {x:?} for key {key}")))
        })
        .collect()
}

impl TransitionModel {
    pub fn to_kv(&self) -> String {
        self.to_kv_with(&[])
    }

    /// Serializes the model followed by `extra` entries.
    pub fn to_kv_with(&self, extra: &[(&str, String)]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "kind={}", self.name());
        let _ = writeln!(out, "state_dim={}", self.state_dim());
        let _ = writeln!(out, "n_actions={}", self.n_actions());
        match self {
            TransitionModel::SharedScalar(m) => {
                let dirs: Vec<String> = m.action_vectors.iter().map(|v| join(v)).collect();
                let _ = writeln!(out, "action_vectors={}", dirs.join(";"));
            }
            TransitionModel::Linear(_) => {}
            TransitionModel::Tabular(m) => {
                let _ = writeln!(out, "grid_lower={}", join(m.grid().lower()));
                let _ = writeln!(out, "grid_upper={}", join(m.grid().upper()));
                let _ = writeln!(out, "grid_nodes={}", join(m.grid().nodes()));
                let _ = writeln!(out, "radius={}", join(m.radius()));
            }
        }
        let _ = writeln!(out, "params={}", join(&self.params()));
        for (k, v) in extra {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn from_kv(text: &str) -> Result<TransitionModel> {
        let map = parse_kv(text)?;
        model_from_map(&map)
    }
}

pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", n + 1)))?;
        if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Parse(format!("line {}: duplicate key {k}", n + 1)));
        }
    }
    Ok(map)
}

fn get<'a>(map: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::Parse(format!("missing key {key}")))
}

fn get_usize(map: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    get(map, key)?
        .parse()
        .map_err(|_| Error::Parse(format!("bad integer for {key}")))
}

pub fn model_from_map(map: &BTreeMap<String, String>) -> Result<TransitionModel> {
    let dim = get_usize(map, "state_dim")?;
    let n_actions = get_usize(map, "n_actions")?;
    let params: Vec<f64> = split("params", get(map, "params")?)?;
    let mut model = match get(map, "kind")? {
        "shared_scalar" => {
            let dirs = get(map, "action_vectors")?
                .split(';')
                .map(|v| split::<f64>("action_vectors", v))
                .collect::<Result<Vec<_>>>()?;
            if dirs.len() != n_actions || dirs.iter().any(|v| v.len() != dim) {
                return Err(Error::Parse("action_vectors do not match dimensions".into()));
            }
            TransitionModel::SharedScalar(SharedScalarModel { c: 0.0, action_vectors: dirs })
        }
        "linear" => TransitionModel::Linear(LinearModel::identity(dim, n_actions)),
        "tabular" => {
            let grid = GridSpec::new(
                split("grid_lower", get(map, "grid_lower")?)?,
                split("grid_upper", get(map, "grid_upper")?)?,
                split("grid_nodes", get(map, "grid_nodes")?)?,
            )?;
            let radius = split("radius", get(map, "radius")?)?;
            TransitionModel::Tabular(TabularModel::uniform(grid, n_actions, radius)?)
        }
        other => return Err(Error::Parse(format!("unknown model kind {other}"))),
    };
    if model.state_dim() != dim {
        return Err(Error::Parse("state_dim does not match the model layout".into()));
    }
    model
        .set_params(&params)
        .map_err(|e| Error::Parse(e.to_string()))?;
    Ok(model)
}
