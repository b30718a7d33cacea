use crate::error::{Error, Result};

/// Optimiser and sampling settings.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub ema_decay: f64,
    /// LR patch side.
    pub patch_size: usize,
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
    pub adam_eps: f64,
    /// A loss row is emitted on every iteration divisible by this.
    pub log_every: usize,
    /// Random flips and quarter turns of each patch.
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.99,
            weight_decay: 0.0,
            ema_decay: 0.999,
            patch_size: 48,
            batch_size: 32,
            iterations: 2000,
            seed: 0,
            adam_eps: 1e-8,
            log_every: 10,
            augment: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2), ("ema_decay", self.ema_decay)] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1), got {v}"));
            }
        }
        if self.weight_decay < 0.0 {
            return bad(format!("weight_decay must be non-negative, got {}", self.weight_decay));
        }
        if self.adam_eps <= 0.0 {
            return bad(format!("adam_eps must be positive, got {}", self.adam_eps));
        }
        for (name, v) in [("patch_size", self.patch_size), ("batch_size", self.batch_size), ("log_every", self.log_every)] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        Ok(())
    }

    /// Number of loss rows a full run emits.
    pub fn trace_len(&self) -> usize {
        self.iterations.div_ceil(self.log_every)
    }
}
