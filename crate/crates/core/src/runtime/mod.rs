//! Training loop, evaluation and the latency benchmark.

mod bench;
mod eval;
mod train;

pub use bench::{bench_latency, LatencyStats};
pub use eval::{evaluate, predict_windows, Prediction};
pub use train::{epoch_log_csv, train, EpochLog, TrainConfig, Trainer};
