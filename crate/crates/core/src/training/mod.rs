//! Loss, optimizer, schedule, weight averaging and the epoch loop.

mod loss;
mod optim;
mod trainer;

pub use loss::{nll_bits, nll_bits_grad, nll_bits_sum};
pub use optim::{lr_at, AdamWConfig, AdamWState, EmaState, LrSchedule, BASE_LR, WARMUP_STEPS};
pub use trainer::{evaluate_nll, log_csv, train, LogRow, TrainConfig, TrainOutcome, LOG_HEADER, TRAIN_KEYS};
