//! Run configuration: a TOML file layered over a named preset, with
//! command-line overrides on top. Precedence is flags > file > preset.

use std::path::Path;

use olnl_core::{preset, BenchmarkSpec, ExperimentConfig, LrSchedule, NoiseKind, Variant, MINI};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{LabError, Result};
use crate::fsio;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Write a selection dump every this many epochs; 0 keeps only the last.
    pub selection_every: usize,
    /// Save a checkpoint every this many epochs; 0 saves only at the end.
    pub checkpoint_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { selection_every: 10, checkpoint_every: 0 }
    }
}

/// Everything a run depends on. Echoed verbatim into every run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preset: String,
    pub benchmark: BenchmarkSpec,
    pub experiment: ExperimentConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_preset(MINI).expect("built-in preset")
    }
}

impl RunConfig {
    pub fn from_preset(name: &str) -> Result<Self> {
        let (benchmark, experiment) = preset(name, 0.2, 0)?;
        Ok(RunConfig { preset: name.to_string(), benchmark, experiment, output: OutputConfig::default() })
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment.validate()?;
        self.benchmark.known_classes()?;
        if self.benchmark.total_classes < 2 || self.benchmark.dim == 0 {
            return Err(LabError::Invalid("benchmark needs at least 2 classes and dim >= 1".into()));
        }
        if self.benchmark.train_per_class == 0 {
            return Err(LabError::Invalid("benchmark.train_per_class must be positive".into()));
        }
        Ok(())
    }

    /// Default run directory name, e.g. `cifar80n-o-mini-sym0.5-full-s0`.
    pub fn run_name(&self) -> String {
        let kind = match self.benchmark.noise.kind {
            NoiseKind::Symmetric => "sym",
            NoiseKind::Asymmetric => "asym",
        };
        format!(
            "{}-{}{}-{}-s{}",
            self.preset, kind, self.benchmark.noise.closed_rate, self.experiment.train.variant, self.experiment.train.seed
        )
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LabError::Invalid(format!("cannot encode config: {e}")))
    }

    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| LabError::format(origin, e))
    }
}

/// Command-line overrides. The typed flags are shorthands for dotted keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    /// Seeds the data, the noise and the model together.
    pub seed: Option<u64>,
    pub rate: Option<f64>,
    pub noise: Option<NoiseKind>,
    pub variant: Option<Variant>,
    pub epochs: Option<usize>,
    pub warmup: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    /// Raw `dotted.key=value` assignments, applied last.
    pub sets: Vec<String>,
}

impl Overrides {
    fn assignments(&self) -> Result<Vec<(String, Value)>> {
        let mut out: Vec<(String, Value)> = Vec::new();
        let mut put = |k: &str, v: Value| out.push((k.to_string(), v));
        if let Some(seed) = self.seed {
            let v = Value::Integer(i64::try_from(seed).map_err(|_| LabError::Invalid("seed too large".into()))?);
            for k in ["benchmark.seed", "benchmark.noise.seed", "experiment.train.seed"] {
                put(k, v.clone());
            }
        }
        if let Some(r) = self.rate {
            put("benchmark.noise.closed_rate", Value::Float(r));
        }
        if let Some(kind) = self.noise {
            put("benchmark.noise.kind", Value::try_from(kind).expect("enum encodes"));
        }
        if let Some(v) = self.variant {
            put("experiment.train.variant", Value::String(v.name().to_string()));
        }
        if let Some(e) = self.epochs {
            put("experiment.train.epochs", Value::Integer(e as i64));
        }
        if let Some(w) = self.warmup {
            put("experiment.train.warmup_epochs", Value::Integer(w as i64));
        }
        if let Some(lr) = self.lr {
            put("experiment.train.learning_rate", Value::Float(lr));
        }
        if let Some(b) = self.batch_size {
            put("experiment.train.batch_size", Value::Integer(b as i64));
        }
        for s in &self.sets {
            out.push(parse_assignment(s)?);
        }
        Ok(out)
    }
}

/// Parses `a.b.c=value`, reading the value as TOML and falling back to a
/// bare string.
pub fn parse_assignment(s: &str) -> Result<(String, Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| LabError::Invalid(format!("expected key=value, got `{s}`")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(LabError::Invalid(format!("bad config key `{key}`")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

fn set_path(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("nonempty key");
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| LabError::Invalid(format!("config key `{key}` crosses a non-table value at `{p}`")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Tables holding an internally tagged enum.
const TAGGED: [&str; 2] = ["experiment.train.schedule", "experiment.train.update_rule"];

fn switches_variant(path: &str, base: &Table, over: &Table) -> bool {
    TAGGED.contains(&path) && over.get("kind").is_some_and(|k| base.get("kind") != Some(k))
}

/// Deep merge. A tagged-enum table that names a different `kind` replaces
/// its target whole, so the new variant does not inherit the old one's
/// fields.
fn merge(base: &mut Table, over: Table) {
    merge_at(base, over, "");
}

fn merge_at(base: &mut Table, over: Table, prefix: &str) {
    for (k, v) in over {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) if !switches_variant(&path, b, &o) => merge_at(b, o, &path),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn leaf_paths(table: &Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in table {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => leaf_paths(t, &path, out),
            _ => out.push(path),
        }
    }
}

fn has_path(table: &Table, path: &str) -> bool {
    let mut cur = table;
    let mut parts = path.split('.').peekable();
    while let Some(p) = parts.next() {
        match cur.get(p) {
            None => return false,
            Some(Value::Table(t)) => cur = t,
            Some(_) => return parts.peek().is_none(),
        }
    }
    true
}

fn load_table(path: &Path) -> Result<Table> {
    let text = fsio::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| LabError::format(path, e))
}

/// Resolves a configuration from an optional file and overrides.
///
/// Unless the learning-rate schedule is given explicitly, it is recomputed
/// from the final epoch count, so `--epochs` keeps the decay proportional.
pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let file_table = file.map(load_table).transpose()?.unwrap_or_default();
    let preset_name = match (&overrides.preset, file_table.get("preset")) {
        (Some(p), _) => p.clone(),
        (None, Some(Value::String(p))) => p.clone(),
        (None, Some(_)) => return Err(LabError::Invalid("`preset` must be a string".into())),
        (None, None) => MINI.to_string(),
    };

    let base = RunConfig::from_preset(&preset_name)?;
    let mut value = match Value::try_from(&base) {
        Ok(Value::Table(t)) => t,
        _ => unreachable!("config encodes as a table"),
    };
    let mut user = Table::new();
    merge(&mut user, file_table.clone());
    merge(&mut value, file_table);
    for (k, v) in overrides.assignments()? {
        set_path(&mut user, &k, v.clone())?;
        set_path(&mut value, &k, v)?;
    }
    if let Some(p) = &overrides.preset {
        value.insert("preset".into(), Value::String(p.clone()));
    }

    let mut config: RunConfig = Value::Table(value)
        .try_into()
        .map_err(|e: toml::de::Error| LabError::Invalid(format!("bad configuration: {e}")))?;
    if !has_path(&user, "experiment.train.schedule") {
        config.experiment.train.schedule = LrSchedule::proportional_linear(config.experiment.train.epochs);
    }

    let resolved = match Value::try_from(&config) {
        Ok(Value::Table(t)) => t,
        _ => unreachable!("config encodes as a table"),
    };
    let mut keys = Vec::new();
    leaf_paths(&user, "", &mut keys);
    if let Some(k) = keys.iter().find(|k| !has_path(&resolved, k)) {
        return Err(LabError::Invalid(format!("unknown config key `{k}`")));
    }
    config.validate()?;
    Ok(config)
}
