//! Named parameter sets and their binary container.
//!
//! Container layout (all integers little-endian `u32`):
//!
//! ```text
//! "EPNT" | version | record count | record*
//! record = name length | name (UTF-8) | rank (= 4) | N | C | H | W | f32 payload
//! ```

use std::path::Path;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::EPNetConfig;
use crate::error::{Error, Result};
use crate::tensor::{Element, Shape, Tensor};

pub const CONTAINER_MAGIC: &[u8; 4] = b"EPNT";
pub const CONTAINER_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform in `±1/√fan_in`.
    KaimingUniform { fan_in: usize },
    Normal { std: f64 },
    Zeros,
    Ones,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Shape,
    pub init: Init,
}

struct SpecBuilder {
    specs: Vec<ParamSpec>,
}

impl SpecBuilder {
    fn push(&mut self, name: String, shape: Shape, init: Init) {
        self.specs.push(ParamSpec { name, shape, init });
    }

    fn conv(&mut self, prefix: &str, cin: usize, cout: usize, k: usize) {
        let fan_in = cin * k * k;
        self.push(format!("{prefix}.weight"), Shape::new(cout, cin, k, k), Init::KaimingUniform { fan_in });
        self.push(format!("{prefix}.bias"), Shape::new(1, cout, 1, 1), Init::Zeros);
    }

    fn linear(&mut self, prefix: &str, cin: usize, cout: usize) {
        self.push(format!("{prefix}.weight"), Shape::new(cout, cin, 1, 1), Init::Normal { std: 0.02 });
        self.push(format!("{prefix}.bias"), Shape::new(1, cout, 1, 1), Init::Zeros);
    }

    fn norm(&mut self, prefix: &str, c: usize) {
        self.push(format!("{prefix}.weight"), Shape::new(1, c, 1, 1), Init::Ones);
        self.push(format!("{prefix}.bias"), Shape::new(1, c, 1, 1), Init::Zeros);
    }

    /// Three-tap kernel sliding across the channel axis.
    fn channel_gate(&mut self, name: String) {
        self.push(name, Shape::new(1, 1, 3, 1), Init::KaimingUniform { fan_in: 3 });
    }

    fn dcab(&mut self, prefix: &str, c: usize) {
        self.channel_gate(format!("{prefix}.gate_a.weight"));
        self.channel_gate(format!("{prefix}.gate_b.weight"));
        self.conv(&format!("{prefix}.fuse"), 2 * c, c, 1);
    }

    fn pfem_unit(&mut self, prefix: &str, cfg: &EPNetConfig) {
        let c = cfg.base_channels;
        if cfg.use_lfeb {
            self.conv(&format!("{prefix}.lfeb.conv1"), c, c, 3);
            self.conv(&format!("{prefix}.lfeb.conv2"), c, c, 3);
            self.channel_gate(format!("{prefix}.lfeb.ecam.weight"));
        }
        let hid = cfg.mlp_hidden();
        self.norm(&format!("{prefix}.swin.norm1"), c);
        self.linear(&format!("{prefix}.swin.qkv"), c, 3 * c);
        self.linear(&format!("{prefix}.swin.proj"), c, c);
        self.norm(&format!("{prefix}.swin.norm2"), c);
        self.linear(&format!("{prefix}.swin.fc1"), c, hid);
        self.linear(&format!("{prefix}.swin.fc2"), hid, c);
        if cfg.use_esab {
            let r = cfg.esab_channels();
            self.conv(&format!("{prefix}.esab.reduce"), c, r, 1);
            self.conv(&format!("{prefix}.esab.down"), r, r, 3);
            self.conv(&format!("{prefix}.esab.refine1"), r, r, 3);
            self.conv(&format!("{prefix}.esab.refine2"), r, r, 3);
            self.conv(&format!("{prefix}.esab.expand"), r, c, 1);
        }
    }
}

/// Every parameter of a network in construction order.
pub fn param_specs(cfg: &EPNetConfig) -> Vec<ParamSpec> {
    let c = cfg.base_channels;
    let mut b = SpecBuilder { specs: Vec::new() };
    b.conv("shallow", 3, c, 3);
    let units = if cfg.share_pfem_weights { 1 } else { cfg.n_pfem };
    for i in 0..units {
        b.pfem_unit(&format!("pfem.{i}"), cfg);
    }
    if cfg.use_espm {
        for l in 1..cfg.pyramid_levels {
            b.conv(&format!("espm.down.{l}"), c, c, 3);
        }
        for l in 0..cfg.pyramid_levels {
            b.dcab(&format!("espm.dcab.{l}"), c);
        }
        for l in 1..cfg.pyramid_levels {
            b.conv(&format!("espm.lateral.{l}"), c, c, 1);
        }
        b.conv("espm.out", c, c, 3);
    }
    b.conv("rec", c, cfg.head_channels(), 3);
    b.specs
}

/// Ordered map from hierarchical name to parameter tensor.
#[derive(Clone, Debug)]
pub struct ModelParams<T: Element> {
    tensors: IndexMap<String, Tensor<T>>,
}

/// Gradient buffers keyed like the parameters they belong to.
pub type Gradients<T> = IndexMap<String, Vec<T>>;

impl<T: Element> ModelParams<T> {
    /// Fresh parameters drawn from a seeded generator; leaves track gradients.
    pub fn init(cfg: &EPNetConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = IndexMap::new();
        for spec in param_specs(cfg) {
            let n = spec.shape.numel();
            let data: Vec<T> = match spec.init {
                Init::KaimingUniform { fan_in } => {
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    (0..n).map(|_| T::from_f64(rng.random_range(-bound..bound))).collect()
                }
                Init::Normal { std } => {
                    let dist = Normal::new(0.0, std).expect("positive std");
                    (0..n).map(|_| T::from_f64(dist.sample(&mut rng))).collect()
                }
                Init::Zeros => vec![T::zero(); n],
                Init::Ones => vec![T::one(); n],
            };
            tensors.insert(spec.name, Tensor::leaf(spec.shape, data, true)?);
        }
        Ok(ModelParams { tensors })
    }

    pub fn from_tensors(entries: impl IntoIterator<Item = (String, Tensor<T>)>) -> Result<Self> {
        let mut tensors = IndexMap::new();
        for (name, t) in entries {
            if tensors.insert(name.clone(), t).is_some() {
                return Err(Error::Usage(format!("duplicate parameter name {name}")));
            }
        }
        Ok(ModelParams { tensors })
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Usage(format!("missing parameter {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.tensors.get_mut(name)
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<T>) {
        self.tensors.insert(name.into(), t);
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn total_elements(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    /// Copies converted to another element type.
    pub fn cast<U: Element>(&self, requires_grad: bool) -> ModelParams<U> {
        ModelParams {
            tensors: self.tensors.iter().map(|(k, v)| (k.clone(), v.cast(requires_grad))).collect(),
        }
    }

    /// Copies that do not record a tape.
    pub fn frozen(&self) -> Self {
        self.cast(false)
    }

    /// Copies that record gradients, with empty gradient buffers.
    pub fn trainable(&self) -> Self {
        self.cast(true)
    }

    /// Gradient buffers after a backward pass; unused parameters get zeros.
    pub fn gradients(&self) -> Gradients<T> {
        self.tensors
            .iter()
            .map(|(k, v)| {
                let g = v.grad().map(|g| g.clone()).unwrap_or_else(|| vec![T::zero(); v.numel()]);
                (k.clone(), g)
            })
            .collect()
    }

    pub fn zero_grad(&self) {
        self.tensors.values().for_each(Tensor::zero_grad);
    }

    pub fn to_records(&self) -> Vec<Record> {
        self.tensors
            .iter()
            .map(|(k, v)| Record {
                name: k.clone(),
                shape: v.shape(),
                data: v.data().iter().map(|x| x.as_f64() as f32).collect(),
            })
            .collect()
    }

    /// Rebuild parameters for `cfg` from container records, checking every
    /// name and shape against the configuration.
    pub fn from_records(cfg: &EPNetConfig, records: Vec<Record>) -> Result<Self> {
        let specs = param_specs(cfg);
        let mut by_name: IndexMap<String, Record> = records.into_iter().map(|r| (r.name.clone(), r)).collect();
        let mut tensors = IndexMap::new();
        for spec in &specs {
            let rec = by_name
                .shift_remove(&spec.name)
                .ok_or_else(|| Error::Load(format!("parameter {} missing from checkpoint", spec.name)))?;
            if rec.shape != spec.shape {
                return Err(Error::Load(format!(
                    "parameter {}: checkpoint shape {} but configuration expects {}",
                    spec.name, rec.shape, spec.shape
                )));
            }
            let data = rec.data.iter().map(|&v| T::from_f64(v as f64)).collect();
            tensors.insert(spec.name.clone(), Tensor::leaf(spec.shape, data, true)?);
        }
        if let Some(extra) = by_name.keys().next() {
            return Err(Error::Load(format!("checkpoint parameter {extra} is not part of this configuration")));
        }
        Ok(ModelParams { tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, write_container(&self.to_records())).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, cfg: &EPNetConfig) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_records(cfg, read_container(&bytes)?)
    }
}

/// One named tensor inside a container.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub name: String,
    pub shape: Shape,
    pub data: Vec<f32>,
}

pub fn write_container(records: &[Record]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CONTAINER_MAGIC);
    out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for r in records {
        out.extend_from_slice(&(r.name.len() as u32).to_le_bytes());
        out.extend_from_slice(r.name.as_bytes());
        out.extend_from_slice(&4u32.to_le_bytes());
        for d in r.shape.dims() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &r.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Parse {
                offset: self.pos,
                msg: format!("truncated container reading {what}"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn read_container(bytes: &[u8]) -> Result<Vec<Record>> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != CONTAINER_MAGIC {
        return Err(Error::Parse { offset: 0, msg: "not a parameter container".into() });
    }
    let version = cur.u32("version")?;
    if version != CONTAINER_VERSION {
        return Err(Error::Parse { offset: 4, msg: format!("unsupported container version {version}") });
    }
    let count = cur.u32("record count")? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let start = cur.pos;
        let len = cur.u32("name length")? as usize;
        let name = std::str::from_utf8(cur.take(len, "name")?)
            .map_err(|_| Error::Parse { offset: start + 4, msg: "parameter name is not UTF-8".into() })?
            .to_string();
        let rank_at = cur.pos;
        let rank = cur.u32("rank")?;
        if rank != 4 {
            return Err(Error::Parse { offset: rank_at, msg: format!("rank {rank} for {name}, expected 4") });
        }
        let mut dims = [0usize; 4];
        for d in dims.iter_mut() {
            *d = cur.u32("dimension")? as usize;
        }
        let shape = Shape::from_dims(dims);
        let payload = cur.take(shape.numel() * 4, "payload")?;
        let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        records.push(Record { name, shape, data });
    }
    if cur.pos != bytes.len() {
        return Err(Error::Parse { offset: cur.pos, msg: "trailing bytes after last record".into() });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_stable() {
        let cfg = EPNetConfig::default();
        let a = param_specs(&cfg);
        let b = param_specs(&cfg);
        assert_eq!(a, b);
        let mut names: Vec<_> = a.iter().map(|s| s.name.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), a.len());
        assert!(names.contains(&"pfem.2.lfeb.conv1.weight".to_string()));
    }

    #[test]
    fn container_round_trip_is_byte_exact() {
        let cfg = EPNetConfig { base_channels: 8, n_pfem: 1, pyramid_levels: 2, window_size: 4, scale: 2, ..Default::default() };
        let p = ModelParams::<f32>::init(&cfg, 3).unwrap();
        let bytes = write_container(&p.to_records());
        let back = ModelParams::<f32>::from_records(&cfg, read_container(&bytes).unwrap()).unwrap();
        assert_eq!(write_container(&back.to_records()), bytes);
    }

    #[test]
    fn truncated_container_reports_offset() {
        let rec = Record { name: "x".into(), shape: Shape::new(1, 1, 1, 2), data: vec![1.0, 2.0] };
        let bytes = write_container(&[rec]);
        let err = read_container(&bytes[..bytes.len() - 2]).unwrap_err();
        assert!(matches!(err, Error::Parse { offset: 37, .. }), "{err}");
    }

    #[test]
    fn shape_mismatch_names_parameter() {
        let small = EPNetConfig { base_channels: 8, n_pfem: 1, pyramid_levels: 1, window_size: 4, scale: 2, ..Default::default() };
        let other = EPNetConfig { scale: 3, ..small.clone() };
        let p = ModelParams::<f32>::init(&small, 0).unwrap();
        let err = ModelParams::<f32>::from_records(&other, p.to_records()).unwrap_err();
        assert!(err.to_string().contains("rec.weight"), "{err}");
    }
}
