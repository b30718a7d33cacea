use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::params::{read_container, write_container, Record};
use crate::model::{EPNetConfig, ModelParams};
use crate::tensor::{Element, Shape};
use crate::train::{AdamState, EmaState, LossRow, TrainState};

pub const PARAMS_FILE: &str = "params.bin";
pub const EMA_FILE: &str = "ema.bin";
pub const OPTIM_FILE: &str = "optim.bin";
pub const META_FILE: &str = "meta.txt";

/// Hex SHA-256 of a configuration's text form.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Plain-text companion of a checkpoint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub iteration: usize,
    pub seed: u64,
    pub config_sha256: String,
    pub adam_step: u64,
}

impl CheckpointMeta {
    pub fn render(&self) -> String {
        format!(
            "iteration={}\nseed={}\nconfig_sha256={}\nadam_step={}\n",
            self.iteration, self.seed, self.config_sha256, self.adam_step
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let body = line.trim_end();
            if !body.is_empty() {
                let (k, v) = body
                    .split_once('=')
                    .ok_or_else(|| Error::Parse { offset, msg: format!("expected key=value, got {body:?}") })?;
                fields.insert(k.trim().to_string(), (offset, v.trim().to_string()));
            }
            offset += line.len();
        }
        let get = |k: &str| {
            fields
                .get(k)
                .cloned()
                .ok_or_else(|| Error::Parse { offset: text.len(), msg: format!("missing {k}") })
        };
        let num = |k: &str| -> Result<u64> {
            let (at, v) = get(k)?;
            v.parse().map_err(|_| Error::Parse { offset: at, msg: format!("{k}={v} is not an integer") })
        };
        Ok(CheckpointMeta {
            iteration: num("iteration")? as usize,
            seed: num("seed")?,
            config_sha256: get("config_sha256")?.1,
            adam_step: num("adam_step")?,
        })
    }
}

/// Raw weights, shadow weights and optimiser moments on disk.
#[derive(Clone, Debug)]
pub struct Checkpoint<T: Element> {
    pub state: TrainState<T>,
    pub meta: CheckpointMeta,
}

impl<T: Element> Checkpoint<T> {
    pub fn new(state: TrainState<T>, seed: u64, config_text: &str) -> Self {
        let meta = CheckpointMeta {
            iteration: state.iteration,
            seed,
            config_sha256: config_hash(config_text),
            adam_step: state.adam.t,
        };
        Checkpoint { state, meta }
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.state.params.save(dir.join(PARAMS_FILE))?;
        self.state.ema.shadow.save(dir.join(EMA_FILE))?;
        let mut records = Vec::new();
        for (prefix, bufs) in [("m", &self.state.adam.m), ("v", &self.state.adam.v)] {
            for (name, buf) in bufs {
                let shape = self.state.params.get(name)?.shape();
                records.push(Record {
                    name: format!("{prefix}.{name}"),
                    shape,
                    data: buf.iter().map(|v| v.as_f64() as f32).collect(),
                });
            }
        }
        let optim = dir.join(OPTIM_FILE);
        std::fs::write(&optim, write_container(&records)).map_err(|e| Error::io(&optim, e))?;
        let meta = dir.join(META_FILE);
        std::fs::write(&meta, self.meta.render()).map_err(|e| Error::io(&meta, e))
    }

    /// Read every part back, checking names and shapes against `cfg`.
    pub fn load(dir: impl AsRef<Path>, cfg: &EPNetConfig, ema_decay: f64) -> Result<Self> {
        let dir = dir.as_ref();
        let params = ModelParams::<T>::load(dir.join(PARAMS_FILE), cfg)?;
        let shadow = ModelParams::<T>::load(dir.join(EMA_FILE), cfg)?.frozen();
        let meta_path = dir.join(META_FILE);
        let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta = CheckpointMeta::parse(&text)?;
        let optim = dir.join(OPTIM_FILE);
        let bytes = std::fs::read(&optim).map_err(|e| Error::io(&optim, e))?;
        let mut adam = AdamState::new(&params);
        adam.t = meta.adam_step;
        for rec in read_container(&bytes)? {
            let (prefix, name) = rec
                .name
                .split_once('.')
                .ok_or_else(|| Error::Load(format!("unexpected optimizer record {}", rec.name)))?;
            let bufs = match prefix {
                "m" => &mut adam.m,
                "v" => &mut adam.v,
                _ => return Err(Error::Load(format!("unexpected optimizer record {}", rec.name))),
            };
            let expect: Shape = params
                .get(name)
                .map_err(|_| Error::Load(format!("optimizer record {} has no parameter", rec.name)))?
                .shape();
            if rec.shape != expect {
                return Err(Error::Load(format!("optimizer record {} is {} but parameter is {expect}", rec.name, rec.shape)));
            }
            bufs.insert(name.to_string(), rec.data.iter().map(|&v| T::from_f64(v as f64)).collect());
        }
        let state = TrainState {
            iteration: meta.iteration,
            ema: EmaState { shadow, decay: ema_decay },
            adam,
            params,
        };
        Ok(Checkpoint { state, meta })
    }
}

/// `iter,loss` CSV with a header row.
pub fn write_loss_csv(path: impl AsRef<Path>, rows: &[LossRow]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("iter,loss\n");
    for r in rows {
        let _ = writeln!(out, "{},{:.9e}", r.iter, r.loss);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_loss_csv(path: impl AsRef<Path>) -> Result<Vec<LossRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    let mut offset = 0;
    for (n, line) in text.split_inclusive('\n').enumerate() {
        let body = line.trim_end();
        if n == 0 {
            if body != "iter,loss" {
                return Err(Error::Parse { offset: 0, msg: format!("expected header iter,loss, got {body:?}") });
            }
        } else if !body.is_empty() {
            let bad = || Error::Parse { offset, msg: format!("malformed row {body:?}") };
            let (i, l) = body.split_once(',').ok_or_else(bad)?;
            rows.push(LossRow { iter: i.parse().map_err(|_| bad())?, loss: l.parse().map_err(|_| bad())? });
        }
        offset += line.len();
    }
    Ok(rows)
}
