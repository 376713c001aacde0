//! JSON model files and channel tables.
//!
//! ```json
//! { "q": 2, "kind": "markov", "transition": [[0.5, 0.3, 0.2], ...] }
//! { "q": 2, "kind": "memoryless", "marginal": [0.7, 0.1, 0.2] }
//! ```
//!
//! States are ordered `(0, ..., q-1, e)`. Optional fields: `channel`
//! (`"mod_add"` or a `q x q` integer table), `cost` (one entry per input
//! symbol), `ergodic` (defaults to `true`) and `initial`, which must equal the
//! stationary distribution.

use std::path::Path;

use serde::Deserialize;

use crate::channel::ChannelFunction;
use crate::curve::CostSpec;
use crate::error::{NecError, Result};
use crate::process::{NoiseModel, STATIONARY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Markov,
    Memoryless,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ChannelConfig {
    Named(String),
    Table(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub q: usize,
    pub kind: ModelKind,
    #[serde(default)]
    pub transition: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub marginal: Option<Vec<f64>>,
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    #[serde(default)]
    pub ergodic: Option<bool>,
    #[serde(default)]
    pub channel: Option<ChannelConfig>,
    #[serde(default)]
    pub cost: Option<Vec<f64>>,
}

/// Everything a model file describes, validated.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: NoiseModel,
    pub channel: ChannelFunction,
    pub cost: CostSpec,
}

fn config_err(e: impl std::fmt::Display) -> NecError {
    NecError::Config(e.to_string())
}

fn as_config(e: NecError) -> NecError {
    match e {
        NecError::Config(_) => e,
        other => config_err(other),
    }
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(config_err)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
    }

    pub fn build_model(&self) -> Result<NoiseModel> {
        let model = match self.kind {
            ModelKind::Markov => {
                if self.marginal.is_some() {
                    return Err(config_err("a markov model takes `transition`, not `marginal`"));
                }
                let rows = self
                    .transition
                    .as_ref()
                    .ok_or_else(|| config_err("a markov model needs `transition`"))?;
                NoiseModel::markov_with_flag(self.q, rows, self.ergodic.unwrap_or(true))
            }
            ModelKind::Memoryless => {
                if self.transition.is_some() {
                    return Err(config_err("a memoryless model takes `marginal`, not `transition`"));
                }
                if self.ergodic == Some(false) {
                    return Err(config_err("a memoryless model is always ergodic"));
                }
                let marginal = self
                    .marginal
                    .clone()
                    .ok_or_else(|| config_err("a memoryless model needs `marginal`"))?;
                NoiseModel::memoryless(self.q, marginal)
            }
        }
        .map_err(as_config)?;
        if let Some(initial) = &self.initial {
            check_initial(&model, initial)?;
        }
        Ok(model)
    }

    pub fn build_channel(&self) -> Result<ChannelFunction> {
        match &self.channel {
            None => ChannelFunction::mod_add(self.q),
            Some(c) => channel_from_config(c, self.q),
        }
        .map_err(as_config)
    }

    pub fn build_cost(&self) -> Result<CostSpec> {
        match &self.cost {
            None => CostSpec::linear(self.q),
            Some(c) if c.len() != self.q => Err(config_err(format!(
                "`cost` has {} entries, expected {}",
                c.len(),
                self.q
            ))),
            Some(c) => CostSpec::new(c.clone()),
        }
        .map_err(as_config)
    }

    pub fn load(&self) -> Result<LoadedModel> {
        Ok(LoadedModel {
            model: self.build_model()?,
            channel: self.build_channel()?,
            cost: self.build_cost()?,
        })
    }
}

fn channel_from_config(c: &ChannelConfig, q: usize) -> Result<ChannelFunction> {
    match c {
        ChannelConfig::Named(name) if name == "mod_add" => ChannelFunction::mod_add(q),
        ChannelConfig::Named(name) => Err(config_err(format!("unknown channel `{name}`"))),
        ChannelConfig::Table(t) => {
            let cf = ChannelFunction::from_table(t)?;
            if cf.q() != q {
                return Err(config_err(format!("channel table is for q = {}, model has q = {q}", cf.q())));
            }
            Ok(cf)
        }
    }
}

/// Parses a JSON `q x q` table file.
pub fn channel_table_from_path(path: &Path, q: usize) -> Result<ChannelFunction> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let table: Vec<Vec<usize>> =
        serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    channel_from_config(&ChannelConfig::Table(table), q).map_err(as_config)
}

fn check_initial(model: &NoiseModel, initial: &[f64]) -> Result<()> {
    let pi = model.marginal();
    if initial.len() != pi.len() {
        return Err(config_err(format!(
            "`initial` has {} entries, expected {}",
            initial.len(),
            pi.len()
        )));
    }
    let worst = initial
        .iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if worst.is_nan() || worst > STATIONARY_TOL {
        return Err(config_err(format!(
            "`initial` is not the stationary distribution {pi:?} (max deviation {worst:e}); \
             only stationary processes are supported"
        )));
    }
    Ok(())
}

/// `START:STOP:COUNT`, inclusive of both ends.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, count] = parts.as_slice() else {
        return Err(config_err(format!("grid `{text}` is not START:STOP:COUNT")));
    };
    let start: f64 = start.trim().parse().map_err(|e| config_err(format!("grid start: {e}")))?;
    let stop: f64 = stop.trim().parse().map_err(|e| config_err(format!("grid stop: {e}")))?;
    let count: usize = count.trim().parse().map_err(|e| config_err(format!("grid count: {e}")))?;
    if !start.is_finite() || !stop.is_finite() || start < 0.0 || stop < start || count == 0 {
        return Err(config_err(format!("grid `{text}` must satisfy 0 <= START <= STOP and COUNT >= 1")));
    }
    if count == 1 && start != stop {
        return Err(config_err("a one-point grid needs START = STOP"));
    }
    Ok(crate::curve::linear_grid(start, stop, count))
}
