use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::model::{Gradients, ModelParams};
use crate::tensor::{Element, Tensor};
use crate::train::TrainConfig;

/// First and second moment buffers plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: IndexMap<String, Vec<T>>,
    pub v: IndexMap<String, Vec<T>>,
    pub t: u64,
}

impl<T: Element> AdamState<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        let zeros = || params.iter().map(|(k, p)| (k.to_string(), vec![T::zero(); p.numel()])).collect();
        AdamState { m: zeros(), v: zeros(), t: 0 }
    }
}

/// One bias-corrected Adam update. Returns fresh leaf tensors for every
/// parameter. Nothing is modified if any gradient is non-finite.
pub fn adam_step<T: Element>(
    params: &mut ModelParams<T>,
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
    cfg: &TrainConfig,
) -> Result<()> {
    for (name, p) in params.iter() {
        let g = grads
            .get(name)
            .ok_or_else(|| Error::Usage(format!("no gradient for parameter {name}")))?;
        if g.len() != p.numel() {
            return Err(Error::Usage(format!("gradient for {name} has {} of {} elements", g.len(), p.numel())));
        }
        if let Some(i) = g.iter().position(|v| !v.as_f64().is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite gradient {} in parameter {name} at element {i} (step {})",
                g[i].as_f64(),
                state.t + 1
            )));
        }
        if !state.m.get(name).is_some_and(|m| m.len() == p.numel()) {
            return Err(Error::Usage(format!("optimizer state does not cover parameter {name}")));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in names {
        let p = params.get(&name)?;
        let g = &grads[&name];
        let m = state.m.get_mut(&name).expect("checked above");
        let v = state.v.get_mut(&name).expect("checked above");
        let mut data = Vec::with_capacity(p.numel());
        for i in 0..p.numel() {
            let w = p.data()[i].as_f64();
            let gi = g[i].as_f64() + cfg.weight_decay * w;
            let mi = b1 * m[i].as_f64() + (1.0 - b1) * gi;
            let vi = b2 * v[i].as_f64() + (1.0 - b2) * gi * gi;
            m[i] = T::from_f64(mi);
            v[i] = T::from_f64(vi);
            let step = cfg.lr * (mi / c1) / ((vi / c2).sqrt() + cfg.adam_eps);
            data.push(T::from_f64(w - step));
        }
        let fresh = Tensor::leaf(p.shape(), data, true)?;
        params.insert(name, fresh);
    }
    Ok(())
}
