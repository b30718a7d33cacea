use super::blocks::{dcab_forward, esab_forward, lfeb_forward, swin_block_forward, Scope};
use super::{EPNetConfig, ModelParams};
use crate::error::{Axis, Error, Result};
use crate::tensor::ops::{add, conv2d, pixel_shuffle, upsample_nearest};
use crate::tensor::{Element, Tensor};

/// One 3×3 convolution from RGB to `C` feature channels.
pub fn shallow_extract<T: Element>(input: &Tensor<T>, params: &ModelParams<T>) -> Result<Tensor<T>> {
    if input.shape().c != 3 {
        return Err(Error::dim(Axis::Channel, format!("expected 3 input channels, got {}", input.shape().c)));
    }
    Scope::new(params, "").conv("shallow", input, 1, 1)
}

/// Submodule `i` of the panoramic stack: LFEB → windowed transformer
/// (shifted on odd `i`) → ESAB. Disabled components are skipped.
pub fn pfem_unit<T: Element>(x: &Tensor<T>, params: &ModelParams<T>, cfg: &EPNetConfig, i: usize) -> Result<Tensor<T>> {
    let slot = if cfg.share_pfem_weights { 0 } else { i };
    let scope = Scope::new(params, format!("pfem.{slot}"));
    let mut x = x.clone();
    if cfg.use_lfeb {
        x = lfeb_forward(&x, &scope.sub("lfeb"))?;
    }
    x = swin_block_forward(&x, &scope.sub("swin"), cfg, i % 2 == 1)?;
    if cfg.use_esab {
        x = esab_forward(&x, &scope.sub("esab"))?;
    }
    Ok(x)
}

pub fn pfem_forward<T: Element>(base: &Tensor<T>, params: &ModelParams<T>, cfg: &EPNetConfig) -> Result<Tensor<T>> {
    (0..cfg.n_pfem).try_fold(base.clone(), |x, i| pfem_unit(&x, params, cfg, i))
}

/// Check that every pyramid level keeps at least one pixel per axis.
pub fn check_pyramid_extent(h: usize, w: usize, levels: usize) -> Result<()> {
    for l in 1..levels {
        let need = 1usize << l;
        if h < need || w < need {
            return Err(Error::Config(format!(
                "pyramid level {l} needs input of at least {need}x{need}, got {h}x{w}"
            )));
        }
    }
    Ok(())
}

/// Feature pyramid: stride-2 convolutions build coarser levels, each level
/// passes a crossover block, and a top-down pass merges coarse into fine by
/// lateral 1×1 convolution plus nearest upsampling. A final 3×3 convolution
/// produces the full-resolution output.
pub fn espm_forward<T: Element>(base: &Tensor<T>, params: &ModelParams<T>, cfg: &EPNetConfig) -> Result<Tensor<T>> {
    let s = base.shape();
    check_pyramid_extent(s.h, s.w, cfg.pyramid_levels)?;
    let root = Scope::new(params, "espm");
    let mut levels = vec![base.clone()];
    for l in 1..cfg.pyramid_levels {
        let next = root.sub("down").conv(&l.to_string(), &levels[l - 1], 2, 1)?;
        levels.push(next);
    }
    let gated: Vec<Tensor<T>> = levels
        .iter()
        .enumerate()
        .map(|(l, x)| dcab_forward(x, &root.sub("dcab").sub(&l.to_string()), cfg))
        .collect::<Result<_>>()?;
    let mut top = gated[cfg.pyramid_levels - 1].clone();
    for l in (0..cfg.pyramid_levels - 1).rev() {
        let lateral = root.sub("lateral").conv(&(l + 1).to_string(), &top, 1, 0)?;
        let fine = gated[l].shape();
        top = add(&gated[l], &upsample_nearest(&lateral, fine.h, fine.w)?)?;
    }
    root.conv("out", &top, 1, 1)
}

/// Full network: shallow features feed the panoramic stack and the pyramid
/// in parallel; their sum goes through a 3×3 convolution to `3·scale²`
/// channels and a pixel shuffle. No output clamping.
pub fn epnet_forward<T: Element>(input: &Tensor<T>, params: &ModelParams<T>, cfg: &EPNetConfig) -> Result<Tensor<T>> {
    let base = shallow_extract(input, params)?;
    let mut feats = pfem_forward(&base, params, cfg)?;
    if cfg.use_espm {
        feats = add(&feats, &espm_forward(&base, params, cfg)?)?;
    }
    let head = conv2d(&feats, params.get("rec.weight")?, Some(params.get("rec.bias")?), 1, 1)?;
    pixel_shuffle(&head, cfg.scale)
}

/// Evaluation-time forward on frozen parameters, clamped to `[0, 1]`.
pub fn epnet_infer<T: Element>(input: &Tensor<T>, params: &ModelParams<T>, cfg: &EPNetConfig) -> Result<Tensor<T>> {
    let frozen = params.frozen();
    let out = epnet_forward(&input.detach(), &frozen, cfg)?;
    let data = out.data().iter().map(|v| v.max(T::zero()).min(T::one())).collect();
    Tensor::from_vec(out.shape(), data)
}
