use std::path::{Path, PathBuf};

use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};
use crate::model::EPNetConfig;
use crate::train::TrainConfig;

/// Locations a run reads from and writes to.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Paths {
    pub data_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

/// Model, training and path settings, serialised as one flat JSON object
/// with dotted keys such as `"model.base_channels"`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub model: EPNetConfig,
    pub train: TrainConfig,
    pub paths: Paths,
}

pub const KEYS: [&str; 27] = [
    "model.scale",
    "model.base_channels",
    "model.n_pfem",
    "model.window_size",
    "model.num_heads",
    "model.pyramid_levels",
    "model.dcab_split_ratio",
    "model.mlp_ratio",
    "model.share_pfem_weights",
    "model.use_espm",
    "model.use_esab",
    "model.use_lfeb",
    "train.lr",
    "train.beta1",
    "train.beta2",
    "train.weight_decay",
    "train.ema_decay",
    "train.patch_size",
    "train.batch_size",
    "train.iterations",
    "train.seed",
    "train.adam_eps",
    "train.log_every",
    "train.augment",
    "paths.data_dir",
    "paths.checkpoint",
    "paths.output_dir",
];

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

fn as_uint(key: &str, v: &Value) -> Result<u64> {
    v.as_u64().ok_or_else(|| Error::Config(format!("{key} must be a non-negative integer, got {v}")))
}

fn as_float(key: &str, v: &Value) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::Config(format!("{key} must be a number, got {v}")))
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    v.as_bool().ok_or_else(|| Error::Config(format!("{key} must be true or false, got {v}")))
}

fn as_path(key: &str, v: &Value) -> Result<Option<PathBuf>> {
    match v {
        Value::Null => Ok(None),
        Value::String(s) => Ok(Some(PathBuf::from(s))),
        _ => Err(Error::Config(format!("{key} must be a string or null, got {v}"))),
    }
}

fn float(v: f64) -> Value {
    Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn path(p: &Option<PathBuf>) -> Value {
    p.as_ref().map_or(Value::Null, |p| Value::String(p.to_string_lossy().into_owned()))
}

impl RunConfig {
    /// Parse a flat JSON object. Keys left out keep their defaults; unknown
    /// keys are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            offset: byte_offset(text, e.line(), e.column()),
            msg: format!("config: {e}"),
        })?;
        let Value::Object(map) = value else {
            return Err(Error::Config("config must be a JSON object".into()));
        };
        let mut cfg = RunConfig::default();
        for (key, v) in &map {
            cfg.set(key, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_json(&text)
    }

    /// Assign one dotted key.
    pub fn set(&mut self, key: &str, v: &Value) -> Result<()> {
        let (m, t, p) = (&mut self.model, &mut self.train, &mut self.paths);
        match key {
            "model.scale" => m.scale = as_uint(key, v)? as usize,
            "model.base_channels" => m.base_channels = as_uint(key, v)? as usize,
            "model.n_pfem" => m.n_pfem = as_uint(key, v)? as usize,
            "model.window_size" => m.window_size = as_uint(key, v)? as usize,
            "model.num_heads" => m.num_heads = as_uint(key, v)? as usize,
            "model.pyramid_levels" => m.pyramid_levels = as_uint(key, v)? as usize,
            "model.dcab_split_ratio" => m.dcab_split_ratio = as_float(key, v)?,
            "model.mlp_ratio" => m.mlp_ratio = as_float(key, v)?,
            "model.share_pfem_weights" => m.share_pfem_weights = as_bool(key, v)?,
            "model.use_espm" => m.use_espm = as_bool(key, v)?,
            "model.use_esab" => m.use_esab = as_bool(key, v)?,
            "model.use_lfeb" => m.use_lfeb = as_bool(key, v)?,
            "train.lr" => t.lr = as_float(key, v)?,
            "train.beta1" => t.beta1 = as_float(key, v)?,
            "train.beta2" => t.beta2 = as_float(key, v)?,
            "train.weight_decay" => t.weight_decay = as_float(key, v)?,
            "train.ema_decay" => t.ema_decay = as_float(key, v)?,
            "train.patch_size" => t.patch_size = as_uint(key, v)? as usize,
            "train.batch_size" => t.batch_size = as_uint(key, v)? as usize,
            "train.iterations" => t.iterations = as_uint(key, v)? as usize,
            "train.seed" => t.seed = as_uint(key, v)?,
            "train.adam_eps" => t.adam_eps = as_float(key, v)?,
            "train.log_every" => t.log_every = as_uint(key, v)? as usize,
            "train.augment" => t.augment = as_bool(key, v)?,
            "paths.data_dir" => p.data_dir = as_path(key, v)?,
            "paths.checkpoint" => p.checkpoint = as_path(key, v)?,
            "paths.output_dir" => p.output_dir = as_path(key, v)?,
            _ => {
                return Err(Error::Config(format!("unknown config key {key:?}; accepted keys: {}", KEYS.join(", "))));
            }
        }
        Ok(())
    }

    /// Every key in a fixed order.
    pub fn to_json(&self) -> String {
        let (m, t, p) = (&self.model, &self.train, &self.paths);
        let entries: [(&str, Value); 27] = [
            ("model.scale", m.scale.into()),
            ("model.base_channels", m.base_channels.into()),
            ("model.n_pfem", m.n_pfem.into()),
            ("model.window_size", m.window_size.into()),
            ("model.num_heads", m.num_heads.into()),
            ("model.pyramid_levels", m.pyramid_levels.into()),
            ("model.dcab_split_ratio", float(m.dcab_split_ratio)),
            ("model.mlp_ratio", float(m.mlp_ratio)),
            ("model.share_pfem_weights", m.share_pfem_weights.into()),
            ("model.use_espm", m.use_espm.into()),
            ("model.use_esab", m.use_esab.into()),
            ("model.use_lfeb", m.use_lfeb.into()),
            ("train.lr", float(t.lr)),
            ("train.beta1", float(t.beta1)),
            ("train.beta2", float(t.beta2)),
            ("train.weight_decay", float(t.weight_decay)),
            ("train.ema_decay", float(t.ema_decay)),
            ("train.patch_size", t.patch_size.into()),
            ("train.batch_size", t.batch_size.into()),
            ("train.iterations", t.iterations.into()),
            ("train.seed", t.seed.into()),
            ("train.adam_eps", float(t.adam_eps)),
            ("train.log_every", t.log_every.into()),
            ("train.augment", t.augment.into()),
            ("paths.data_dir", path(&p.data_dir)),
            ("paths.checkpoint", path(&p.checkpoint)),
            ("paths.output_dir", path(&p.output_dir)),
        ];
        let map: Map<String, Value> = entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        let mut text = serde_json::to_string_pretty(&Value::Object(map)).expect("plain values serialise");
        text.push('\n');
        text
    }

    /// Text hashed into checkpoint metadata: only the settings that shape the model.
    pub fn model_fingerprint(&self) -> String {
        let text = self.to_json();
        text.lines().filter(|l| l.contains("\"model.")).collect::<Vec<_>>().join("\n")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()
    }
}
