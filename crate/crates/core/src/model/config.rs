use crate::error::{Error, Result};

/// Architecture hyperparameters of one network instance.
#[derive(Debug, Clone, PartialEq)]
pub struct EPNetConfig {
    /// Upscaling factor, one of 2, 3, 4.
    pub scale: usize,
    /// Feature width `C` carried through the body.
    pub base_channels: usize,
    /// Number of sequential panoramic submodules.
    pub n_pfem: usize,
    pub window_size: usize,
    pub num_heads: usize,
    pub pyramid_levels: usize,
    /// Fraction of channels routed to the first crossover half.
    pub dcab_split_ratio: f64,
    /// MLP hidden width as a multiple of `C`.
    pub mlp_ratio: f64,
    /// All panoramic submodules reference one parameter set.
    pub share_pfem_weights: bool,
    pub use_espm: bool,
    pub use_esab: bool,
    pub use_lfeb: bool,
}

impl Default for EPNetConfig {
    fn default() -> Self {
        EPNetConfig {
            scale: 4,
            base_channels: 32,
            n_pfem: 4,
            window_size: 8,
            num_heads: 4,
            pyramid_levels: 3,
            dcab_split_ratio: 0.5,
            mlp_ratio: 2.0,
            share_pfem_weights: false,
            use_espm: true,
            use_esab: true,
            use_lfeb: true,
        }
    }
}

impl EPNetConfig {
    pub fn validate(&self) -> Result<()> {
        let c = self.base_channels;
        if ![2, 3, 4].contains(&self.scale) {
            return Err(Error::Config(format!("scale must be 2, 3 or 4, got {}", self.scale)));
        }
        if c < 2 {
            return Err(Error::Config(format!("base_channels must be at least 2, got {c}")));
        }
        if self.num_heads == 0 || c % self.num_heads != 0 {
            return Err(Error::Config(format!("num_heads {} must divide base_channels {c}", self.num_heads)));
        }
        if self.n_pfem == 0 || self.window_size == 0 || self.pyramid_levels == 0 {
            return Err(Error::Config("n_pfem, window_size and pyramid_levels must be positive".into()));
        }
        if !(self.dcab_split_ratio > 0.0 && self.dcab_split_ratio < 1.0) {
            return Err(Error::Config(format!("dcab_split_ratio {} outside (0, 1)", self.dcab_split_ratio)));
        }
        let split = c as f64 * self.dcab_split_ratio;
        if (split - split.round()).abs() > 1e-9 || split.round() < 1.0 || split.round() as usize >= c {
            return Err(Error::Config(format!(
                "base_channels·dcab_split_ratio = {split} must be an integer in [1, C)"
            )));
        }
        if !(self.mlp_ratio > 0.0) || self.mlp_hidden() == 0 {
            return Err(Error::Config(format!("mlp_ratio {} gives an empty MLP", self.mlp_ratio)));
        }
        if self.use_esab && c < 4 {
            return Err(Error::Config(format!("spatial attention needs at least 4 channels, got {c}")));
        }
        Ok(())
    }

    /// Channels in the first crossover half.
    pub fn split_channels(&self) -> usize {
        (self.base_channels as f64 * self.dcab_split_ratio).round() as usize
    }

    pub fn mlp_hidden(&self) -> usize {
        (self.base_channels as f64 * self.mlp_ratio).round() as usize
    }

    pub fn head_dim(&self) -> usize {
        self.base_channels / self.num_heads
    }

    /// Reduced width inside the spatial-attention branch.
    pub fn esab_channels(&self) -> usize {
        self.base_channels / 4
    }

    /// Channels emitted by the reconstruction convolution, `3·scale²`.
    pub fn head_channels(&self) -> usize {
        3 * self.scale * self.scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        EPNetConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            EPNetConfig { scale: 5, ..Default::default() },
            EPNetConfig { num_heads: 3, ..Default::default() },
            EPNetConfig { base_channels: 1, use_esab: false, num_heads: 1, ..Default::default() },
            EPNetConfig { base_channels: 6, num_heads: 2, dcab_split_ratio: 0.25, ..Default::default() },
            EPNetConfig { dcab_split_ratio: 1.0, ..Default::default() },
            EPNetConfig { n_pfem: 0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn head_channels_follow_scale() {
        let two = EPNetConfig { scale: 2, ..Default::default() };
        let four = EPNetConfig { scale: 4, ..Default::default() };
        assert_eq!(two.head_channels(), 12);
        assert_eq!(four.head_channels(), 48);
    }
}
