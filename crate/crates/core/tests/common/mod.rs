#![allow(dead_code)]

use epnet::model::{EPNetConfig, ModelParams};
use epnet::tensor::gradcheck::random_weights;
use epnet::tensor::{Shape, Tensor};

pub mod oracle;

pub fn tiny_config() -> EPNetConfig {
    EPNetConfig {
        scale: 2,
        base_channels: 8,
        n_pfem: 1,
        window_size: 4,
        num_heads: 4,
        pyramid_levels: 1,
        ..Default::default()
    }
}

/// Parameters with every tensor (including biases and norms) randomised so
/// that no path is trivially zero.
pub fn random_params(cfg: &EPNetConfig, seed: u64, scale: f64) -> ModelParams<f64> {
    let base = ModelParams::<f64>::init(cfg, seed).unwrap();
    let entries = base.iter().enumerate().map(|(i, (name, t))| {
        let r = random_weights(t.shape(), seed * 7919 + i as u64);
        let data: Vec<f64> = if name.ends_with("norm1.weight") || name.ends_with("norm2.weight") {
            r.data().iter().map(|v| 1.0 + 0.3 * v).collect()
        } else {
            r.data().iter().map(|v| v * scale).collect()
        };
        (name.to_string(), Tensor::from_vec(t.shape(), data).unwrap())
    });
    ModelParams::from_tensors(entries).unwrap()
}

pub fn image(shape: Shape, seed: u64) -> Tensor<f64> {
    let r = random_weights(shape, seed);
    Tensor::from_vec(shape, r.data().iter().map(|v| 0.5 + 0.5 * v).collect()).unwrap()
}

/// Rebuild a parameter set from the tensors handed to a gradient check.
pub fn rebuild(names: &[String], tensors: &[Tensor<f64>]) -> ModelParams<f64> {
    ModelParams::from_tensors(names.iter().cloned().zip(tensors.iter().cloned())).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Deterministic test picture with hard edges, a smooth gradient and fine
/// stripes so that bicubic upscaling visibly blurs it.
pub fn synthetic_image(w: usize, h: usize, seed: u64) -> epnet::metrics::Image {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let discs: Vec<(f64, f64, f64, [u8; 3])> = (0..4)
        .map(|_| {
            (
                rng.random_range(0.0..w as f64),
                rng.random_range(0.0..h as f64),
                rng.random_range(6.0..(w as f64 / 4.0).max(7.0)),
                [rng.random(), rng.random(), rng.random()],
            )
        })
        .collect();
    epnet::metrics::Image::from_fn(w, h, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        for &(cx, cy, r, rgb) in &discs {
            if (xf - cx).powi(2) + (yf - cy).powi(2) < r * r {
                return rgb;
            }
        }
        if y > h / 2 && x < w / 2 {
            let v = if (x / 2 + y / 3) % 2 == 0 { 220 } else { 40 };
            return [v, v / 2, 255 - v];
        }
        let g = (255.0 * xf / w as f64) as u8;
        [g, 128, 255 - (255.0 * yf / h as f64) as u8]
    })
    .unwrap()
}
