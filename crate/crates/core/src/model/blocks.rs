//! Building blocks: channel gates, the crossover attention block, the local
//! feature block, the windowed transformer block and the spatial attention block.

use super::{EPNetConfig, ModelParams};
use crate::error::Result;
use crate::tensor::ops::*;
use crate::tensor::{Element, Shape, Tensor};

/// Parameters below a name prefix.
#[derive(Clone)]
pub struct Scope<'a, T: Element> {
    params: &'a ModelParams<T>,
    prefix: String,
}

impl<'a, T: Element> Scope<'a, T> {
    pub fn new(params: &'a ModelParams<T>, prefix: impl Into<String>) -> Self {
        Scope { params, prefix: prefix.into() }
    }

    pub fn sub(&self, name: &str) -> Self {
        let prefix = if self.prefix.is_empty() { name.to_string() } else { format!("{}.{name}", self.prefix) };
        Scope { params: self.params, prefix }
    }

    pub fn get(&self, leaf: &str) -> Result<&'a Tensor<T>> {
        self.params.get(&format!("{}.{leaf}", self.prefix))
    }

    /// Convolution with the `weight`/`bias` pair stored under `name`.
    pub fn conv(&self, name: &str, x: &Tensor<T>, stride: usize, padding: usize) -> Result<Tensor<T>> {
        let s = self.sub(name);
        conv2d(x, s.get("weight")?, Some(s.get("bias")?), stride, padding)
    }
}

/// Efficient channel gate: global average pool, a three-tap convolution
/// sliding across the channel axis (no width reduction), then a sigmoid.
/// Returns the `N×C×1×1` gate.
pub fn channel_gate<T: Element>(x: &Tensor<T>, kernel: &Tensor<T>) -> Result<Tensor<T>> {
    let s = x.shape();
    let desc = reshape(&global_avg_pool(x)?, Shape::new(s.n, 1, s.c, 1))?;
    let mixed = conv2d_padded(&desc, kernel, None, 1, (1, 0))?;
    Ok(sigmoid(&reshape(&mixed, Shape::new(s.n, s.c, 1, 1))?))
}

/// Gate values used by the crossover block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DcabGates {
    /// α, β computed from the pooled halves.
    Learned,
    /// Constant α, β (for probing the crossover wiring).
    Fixed { alpha: f64, beta: f64 },
}

/// Intermediate tensors of one crossover block pass.
pub struct DcabTrace<T: Element> {
    /// `concat(concat(α·x₁, x₂), concat(x₁, β·x₂))`, `2C` channels.
    pub crossover: Tensor<T>,
    pub output: Tensor<T>,
}

pub fn dcab_forward<T: Element>(x: &Tensor<T>, scope: &Scope<'_, T>, cfg: &EPNetConfig) -> Result<Tensor<T>> {
    Ok(dcab_forward_traced(x, scope, cfg, DcabGates::Learned)?.output)
}

/// Dynamic channel split with weighted combinatorial crossover, fused back
/// to `C` channels by a 1×1 convolution and added to the input.
pub fn dcab_forward_traced<T: Element>(
    x: &Tensor<T>,
    scope: &Scope<'_, T>,
    cfg: &EPNetConfig,
    gates: DcabGates,
) -> Result<DcabTrace<T>> {
    let (x1, x2) = channel_split(x, cfg.split_channels())?;
    let (a1, b2) = match gates {
        DcabGates::Learned => {
            let alpha = channel_gate(&x1, scope.get("gate_a.weight")?)?;
            let beta = channel_gate(&x2, scope.get("gate_b.weight")?)?;
            (mul(&x1, &alpha)?, mul(&x2, &beta)?)
        }
        DcabGates::Fixed { alpha, beta } => (scalar_mul(&x1, alpha), scalar_mul(&x2, beta)),
    };
    let crossover = channel_concat(&[a1, x2.clone(), x1, b2])?;
    let fused = scope.conv("fuse", &crossover, 1, 0)?;
    let output = add(x, &fused)?;
    Ok(DcabTrace { crossover, output })
}

/// conv3×3 → GELU → conv3×3 → channel gate → residual.
pub fn lfeb_forward<T: Element>(x: &Tensor<T>, scope: &Scope<'_, T>) -> Result<Tensor<T>> {
    let y = gelu(&scope.conv("conv1", x, 1, 1)?);
    let y = scope.conv("conv2", &y, 1, 1)?;
    let gate = channel_gate(&y, scope.get("ecam.weight")?)?;
    add(x, &mul(&y, &gate)?)
}

const LN_EPS: f64 = 1e-5;
const MASK_FILL: f64 = -100.0;

/// Windowed attention output together with its softmax weights
/// (`windows×heads×T×T`, `T = w²`).
pub struct AttentionTrace<T: Element> {
    pub output: Tensor<T>,
    pub weights: Tensor<T>,
}

/// Region label of a padded coordinate after a cyclic shift by `shift`.
fn shift_region(i: usize, size: usize, window: usize, shift: usize) -> usize {
    if i < size - window {
        0
    } else if i < size - shift {
        1
    } else {
        2
    }
}

/// Additive mask `(N·windows)×1×T×T` keeping attention inside regions that
/// were contiguous before the cyclic shift.
pub fn shift_mask<T: Element>(n: usize, hp: usize, wp: usize, window: usize, shift: usize) -> Tensor<T> {
    let (nh, nw) = (hp / window, wp / window);
    let t = window * window;
    let mut data = Vec::with_capacity(n * nh * nw * t * t);
    for _ in 0..n {
        for wy in 0..nh {
            for wx in 0..nw {
                let label = |p: usize| {
                    let (y, x) = (wy * window + p / window, wx * window + p % window);
                    shift_region(y, hp, window, shift) * 3 + shift_region(x, wp, window, shift)
                };
                for i in 0..t {
                    for j in 0..t {
                        let v = if label(i) == label(j) { 0.0 } else { MASK_FILL };
                        data.push(T::from_f64(v));
                    }
                }
            }
        }
    }
    Tensor::from_vec(Shape::new(n * nh * nw, 1, t, t), data).expect("mask size")
}

/// Multi-head self-attention inside `w×w` windows (cyclically shifted by
/// `⌊w/2⌋` when `shifted`). Spatial extents are reflect-padded up to a
/// multiple of `w` and cropped back afterwards.
pub fn window_attention<T: Element>(
    x: &Tensor<T>,
    scope: &Scope<'_, T>,
    cfg: &EPNetConfig,
    shifted: bool,
) -> Result<AttentionTrace<T>> {
    let s = x.shape();
    let (c, ws, heads, d) = (s.c, cfg.window_size, cfg.num_heads, cfg.head_dim());
    let shift = if shifted { ws / 2 } else { 0 };
    let hp = s.h.div_ceil(ws) * ws;
    let wp = s.w.div_ceil(ws) * ws;

    let qkv = scope.conv("qkv", x, 1, 0)?;
    let mut qkv = pad_reflect(&qkv, hp - s.h, wp - s.w);
    if shift > 0 {
        qkv = cyclic_shift(&qkv, -(shift as isize), -(shift as isize));
    }
    let win = window_partition(&qkv, ws)?;
    let b = win.shape().n;
    let t = ws * ws;
    let (q, kv) = channel_split(&win, c)?;
    let (k, v) = channel_split(&kv, c)?;
    let heads_shape = Shape::new(b, heads, d, t);
    let q = scalar_mul(&transpose_hw(&reshape(&q, heads_shape)?), 1.0 / (d as f64).sqrt());
    let k = reshape(&k, heads_shape)?;
    let v = transpose_hw(&reshape(&v, heads_shape)?);
    let mut scores = matmul(&q, &k)?;
    if shift > 0 {
        scores = add(&scores, &shift_mask(s.n, hp, wp, ws, shift))?;
    }
    let weights = softmax(&scores, 3)?;
    let out = matmul(&weights, &v)?;
    let out = reshape(&transpose_hw(&out), Shape::new(b, c, ws, ws))?;
    let mut out = window_reverse(&out, ws, hp, wp)?;
    if shift > 0 {
        out = cyclic_shift(&out, shift as isize, shift as isize);
    }
    let out = crop(&out, s.h, s.w)?;
    Ok(AttentionTrace { output: scope.conv("proj", &out, 1, 0)?, weights })
}

/// Pre-norm windowed attention and pre-norm MLP, each with a residual.
pub fn swin_block_forward<T: Element>(
    x: &Tensor<T>,
    scope: &Scope<'_, T>,
    cfg: &EPNetConfig,
    shifted: bool,
) -> Result<Tensor<T>> {
    let n1 = scope.sub("norm1");
    let y = layer_norm(x, n1.get("weight")?, n1.get("bias")?, LN_EPS)?;
    let x = add(x, &window_attention(&y, scope, cfg, shifted)?.output)?;
    let n2 = scope.sub("norm2");
    let y = layer_norm(&x, n2.get("weight")?, n2.get("bias")?, LN_EPS)?;
    let y = scope.conv("fc2", &gelu(&scope.conv("fc1", &y, 1, 0)?), 1, 0)?;
    add(&x, &y)
}

pub const ESAB_POOL_KERNEL: usize = 7;
pub const ESAB_POOL_STRIDE: usize = 3;

/// Spatial extent of the strided branch for an `h×w` input: the stride-2
/// convolution halves (rounding up), and the max pool runs only when both
/// halved extents reach the pool kernel.
pub fn esab_branch_extent(h: usize, w: usize) -> (usize, usize) {
    let (dh, dw) = (h.div_ceil(2), w.div_ceil(2));
    if dh >= ESAB_POOL_KERNEL && dw >= ESAB_POOL_KERNEL {
        (
            (dh - ESAB_POOL_KERNEL) / ESAB_POOL_STRIDE + 1,
            (dw - ESAB_POOL_KERNEL) / ESAB_POOL_STRIDE + 1,
        )
    } else {
        (dh, dw)
    }
}

/// Spatial attention map `m ∈ (0,1)^{N×C×H×W}`; the block returns `x + x ⊙ m`.
pub fn esab_map<T: Element>(x: &Tensor<T>, scope: &Scope<'_, T>) -> Result<Tensor<T>> {
    let s = x.shape();
    let r = scope.conv("reduce", x, 1, 0)?;
    let mut b = scope.conv("down", &r, 2, 1)?;
    let bs = b.shape();
    if bs.h >= ESAB_POOL_KERNEL && bs.w >= ESAB_POOL_KERNEL {
        b = max_pool2d(&b, ESAB_POOL_KERNEL, ESAB_POOL_STRIDE)?;
    }
    let b = gelu(&scope.conv("refine1", &b, 1, 1)?);
    let b = scope.conv("refine2", &b, 1, 1)?;
    let b = upsample_nearest(&b, s.h, s.w)?;
    Ok(sigmoid(&scope.conv("expand", &b, 1, 0)?))
}

pub fn esab_forward<T: Element>(x: &Tensor<T>, scope: &Scope<'_, T>) -> Result<Tensor<T>> {
    let m = esab_map(x, scope)?;
    add(x, &mul(x, &m)?)
}
