//! Central finite-difference oracle for the tape, run in 64-bit.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ops::{mul, sum_all};
use super::{Shape, Tensor};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub step: f64,
    pub rel_tol: f64,
    /// Absolute disagreement always accepted.
    pub abs_floor: f64,
    /// Coordinates probed per input; `None` probes all of them.
    pub max_coords_per_input: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-3,
            rel_tol: 1e-4,
            abs_floor: 1e-6,
            max_coords_per_input: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub input: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Largest `|a − n| / max(|a|, |n|)` among coordinates above the absolute floor.
    pub max_rel_error: f64,
    pub failures: Vec<Mismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checked > 0
    }
}

/// Compares tape gradients of `f(inputs)` with central differences.
/// `f` must return a `1×1×1×1` loss and must be deterministic.
pub fn check_gradients<F>(inputs: &[Tensor<f64>], cfg: &GradCheckConfig, f: F) -> Result<GradCheckReport>
where
    F: Fn(&[Tensor<f64>]) -> Result<Tensor<f64>>,
{
    let leaves: Vec<Tensor<f64>> = inputs.iter().map(|t| t.to_leaf(true)).collect();
    let loss = f(&leaves)?;
    loss.backward()?;
    let analytic: Vec<Vec<f64>> = leaves
        .iter()
        .map(|t| t.grad().map(|g| g.clone()).unwrap_or_else(|| vec![0.0; t.numel()]))
        .collect();

    let constants: Vec<Tensor<f64>> = inputs.iter().map(|t| t.detach()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GradCheckReport::default();
    for (i, input) in inputs.iter().enumerate() {
        let coords: Vec<usize> = match cfg.max_coords_per_input {
            Some(k) if k < input.numel() => {
                let mut v = sample(&mut rng, input.numel(), k).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..input.numel()).collect(),
        };
        for j in coords {
            let eval = |delta: f64| -> Result<f64> {
                let mut data = input.to_vec();
                data[j] += delta;
                let mut args = constants.clone();
                args[i] = Tensor::from_vec(input.shape(), data)?;
                Ok(f(&args)?.item())
            };
            let numeric = (eval(cfg.step)? - eval(-cfg.step)?) / (2.0 * cfg.step);
            let a = analytic[i][j];
            let err = (a - numeric).abs();
            report.checked += 1;
            if err > cfg.abs_floor {
                let rel = err / a.abs().max(numeric.abs());
                report.max_rel_error = report.max_rel_error.max(rel);
                if rel > cfg.rel_tol {
                    report.failures.push(Mismatch {
                        input: i,
                        index: j,
                        analytic: a,
                        numeric,
                    });
                }
            }
        }
    }
    Ok(report)
}

/// Fixed random weights in `[-1, 1)` with the given shape.
pub fn random_weights(shape: Shape, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..shape.numel()).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::from_vec(shape, data).expect("shape matches buffer")
}

/// Scalar `Σ x ⊙ R` for a fixed random `R`; turns any output into a loss with
/// a generic upstream gradient.
pub fn project(x: &Tensor<f64>, seed: u64) -> Result<Tensor<f64>> {
    let r = random_weights(x.shape(), seed ^ 0x9e37_79b9_7f4a_7c15);
    Ok(sum_all(&mul(x, &r)?))
}
