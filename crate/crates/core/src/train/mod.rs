//! Training recipe: L1 objective, Adam, exponential moving average of the
//! weights, HR/LR patch sampling and the loop that ties them together.

mod adam;
mod checkpoint;
mod config;
mod data;
mod ema;
mod loss;
mod trainer;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{config_hash, EMA_FILE, META_FILE, OPTIM_FILE, PARAMS_FILE, read_loss_csv, write_loss_csv, Checkpoint, CheckpointMeta};
pub use config::TrainConfig;
pub use data::{image_files, sample_batch, sample_patch, Augment, Dataset, TrainPair};
pub use ema::{ema_update, EmaState};
pub use loss::l1_loss;
pub use trainer::{train_loop, train_loop_with, LossRow, TrainError, TrainOutcome, TrainState};
