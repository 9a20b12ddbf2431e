//! Online e-prop training: per-sample gradient accumulation, regularizers,
//! Adam with warmup over shuffled minibatches, and evaluation.

mod fit;
mod metrics;
mod optim;
mod sample;

pub use fit::{
    epoch_order, evaluate, iters_per_epoch, summarize, BatchSummary, Progress, TrainConfig, Trainer,
};
pub use metrics::{MetricsRecord, MetricsWriter, METRICS_HEADER};
pub use optim::{adam_apply, lr_warmup, OptimizerState, ADAM_EPS};
pub use sample::{
    cross_entropy, firing_rate_reg, l2_reg, run_sample, Gradients, LayerGrads, Mode, RegConfig,
    RegState, SampleOutput, SampleStats, XENT_FLOOR,
};
