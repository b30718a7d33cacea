use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::model::{epnet_forward, EPNetConfig, ModelParams};
use crate::tensor::Element;
use crate::train::{adam_step, ema_update, l1_loss, sample_batch, AdamState, Dataset, EmaState, TrainConfig};

/// Everything needed to resume or evaluate a run.
#[derive(Clone, Debug)]
pub struct TrainState<T: Element> {
    pub params: ModelParams<T>,
    pub adam: AdamState<T>,
    pub ema: EmaState<T>,
    /// Iterations completed.
    pub iteration: usize,
}

impl<T: Element> TrainState<T> {
    pub fn new(params: ModelParams<T>, cfg: &TrainConfig) -> Self {
        let params = params.trainable();
        TrainState {
            adam: AdamState::new(&params),
            ema: EmaState::new(&params, cfg.ema_decay),
            params,
            iteration: 0,
        }
    }
}

/// A sampled point of the loss curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRow {
    pub iter: usize,
    pub loss: f64,
}

#[derive(Debug)]
pub struct TrainOutcome<T: Element> {
    pub state: TrainState<T>,
    /// Rows at every `log_every`-th iteration.
    pub trace: Vec<LossRow>,
    /// Loss of every iteration.
    pub losses: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError<T: Element> {
    #[error("loss became {loss} at iteration {iteration}")]
    Diverged {
        iteration: usize,
        loss: f64,
        /// State whose forward pass produced the last finite loss.
        last_good: Option<Box<TrainState<T>>>,
        trace: Vec<LossRow>,
    },
    #[error(transparent)]
    Failed(#[from] Error),
}

/// [`train_loop_with`] without a progress callback.
pub fn train_loop<T: Element>(
    model: &EPNetConfig,
    data: &Dataset,
    cfg: &TrainConfig,
    init: ModelParams<T>,
) -> Result<TrainOutcome<T>, TrainError<T>> {
    train_loop_with(model, data, cfg, TrainState::new(init, cfg), |_| {})
}

/// Run `cfg.iterations − state.iteration` steps of
/// sample → forward → L1 → backward → Adam → EMA at a constant learning rate.
/// `on_log` sees each trace row as it is produced.
pub fn train_loop_with<T: Element>(
    model: &EPNetConfig,
    data: &Dataset,
    cfg: &TrainConfig,
    mut state: TrainState<T>,
    mut on_log: impl FnMut(&LossRow),
) -> Result<TrainOutcome<T>, TrainError<T>> {
    cfg.validate()?;
    model.validate()?;
    if data.scale != model.scale {
        return Err(Error::Config(format!("dataset scale {} but model scale {}", data.scale, model.scale)).into());
    }
    data.check_patch(cfg.patch_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    // replay the sampler so resumed runs see the same batches
    for _ in 0..state.iteration {
        sample_batch::<T>(data, cfg.patch_size, cfg.batch_size, cfg.augment, &mut rng)?;
    }
    let mut trace = Vec::new();
    let mut losses = Vec::new();
    let mut previous: Option<TrainState<T>> = None;
    while state.iteration < cfg.iterations {
        let i = state.iteration;
        let (lr, hr) = sample_batch::<T>(data, cfg.patch_size, cfg.batch_size, cfg.augment, &mut rng)?;
        let sr = epnet_forward(&lr, &state.params, model)?;
        let loss = l1_loss(&sr, &hr)?;
        let value = loss.item().as_f64();
        if !value.is_finite() {
            return Err(TrainError::Diverged { iteration: i, loss: value, last_good: previous.map(Box::new), trace });
        }
        losses.push(value);
        if i % cfg.log_every == 0 {
            let row = LossRow { iter: i, loss: value };
            on_log(&row);
            trace.push(row);
        }
        loss.backward()?;
        let grads = state.params.gradients();
        previous = Some(state.clone());
        adam_step(&mut state.params, &grads, &mut state.adam, cfg)?;
        ema_update(&mut state.ema, &state.params)?;
        state.iteration += 1;
    }
    Ok(TrainOutcome { state, trace, losses })
}
