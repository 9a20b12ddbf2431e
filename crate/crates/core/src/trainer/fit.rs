use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::MetricsRecord;
use super::optim::{adam_apply, lr_warmup, OptimizerState};
use super::sample::{run_sample, Gradients, Mode, RegConfig, SampleStats};
use crate::dataset::Utterance;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::NetworkParams;

/// Optimization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Overrides `epochs` when set.
    pub iterations: Option<usize>,
    /// Validation cadence in minibatch updates.
    pub eval_every: usize,
    pub seed: u64,
    /// Target firing rate per step.
    pub f_target: f64,
    pub c_reg: f64,
    pub c_l2: f64,
    /// Linear learning-rate ramp over the first epoch.
    pub warmup: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            batch_size: 32,
            epochs: 1,
            iterations: None,
            eval_every: 25,
            seed: 0,
            f_target: 0.01,
            c_reg: 50.0,
            c_l2: 1e-5,
            warmup: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.eval_every == 0 {
            return Err(Error::Config(
                "batch_size and eval_every must be at least 1".into(),
            ));
        }
        let ok = self.eta > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && (0.0..=1.0).contains(&self.f_target)
            && self.c_reg >= 0.0
            && self.c_l2 >= 0.0;
        if !ok {
            return Err(Error::Config(
                "need eta > 0, betas in [0,1), f_target in [0,1], non-negative c_reg and c_l2"
                    .into(),
            ));
        }
        Ok(())
    }

    pub fn reg(&self) -> RegConfig {
        RegConfig {
            f_target: self.f_target,
            c_reg: self.c_reg,
            c_l2: self.c_l2,
        }
    }

    pub fn total_iterations(&self, n_train: usize) -> usize {
        self.iterations
            .unwrap_or(self.epochs * iters_per_epoch(n_train, self.batch_size))
    }
}

pub fn iters_per_epoch(n_train: usize, batch_size: usize) -> usize {
    n_train.div_ceil(batch_size.max(1))
}

/// Sample order of one epoch; a pure function of `(seed, epoch)` so a run can
/// resume from its counters alone.
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Position within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Progress {
    pub epoch: usize,
    /// Next minibatch within the epoch.
    pub cursor: usize,
    /// Minibatch updates applied.
    pub iter: usize,
    /// Iteration of the last validation pass.
    pub last_eval: Option<usize>,
}

/// Training statistics of one minibatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchSummary {
    pub stats: SampleStats,
    pub n_samples: usize,
    pub eta_eff: f64,
}

/// Aggregates sample statistics into a metrics row.
pub fn summarize(
    stats: &SampleStats,
    n_samples: usize,
    dt_ms: f64,
    iter: usize,
    split: &str,
) -> MetricsRecord {
    let frames = stats.n_frames.max(1) as f64;
    let rate_per_step = stats.spikes as f64 / stats.neuron_steps.max(1) as f64;
    MetricsRecord {
        iter,
        split: split.to_string(),
        xent: stats.xent / frames,
        miscls_pct: 100.0 * stats.n_errors as f64 / frames,
        mean_rate_hz: rate_per_step * 1000.0 / dt_ms,
        reg_err: stats.reg_err / n_samples.max(1) as f64,
    }
}

/// Runs every sample in evaluation mode (in parallel, reduced in order).
pub fn evaluate(
    params: &NetworkParams,
    data: &[Utterance],
    reg: &RegConfig,
    iter: usize,
    split: &str,
) -> Result<MetricsRecord> {
    let outs: Vec<SampleStats> = data
        .par_iter()
        .map(|u| run_sample(params, u, Mode::Eval, reg).map(|o| o.stats))
        .collect::<Result<_>>()?;
    let mut total = SampleStats::default();
    outs.iter().for_each(|s| total.merge(s));
    Ok(summarize(
        &total,
        data.len(),
        params.neuron.dt_ms,
        iter,
        split,
    ))
}

/// Network, optimizer and position of one training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub params: NetworkParams,
    pub opt: OptimizerState,
    pub config: TrainConfig,
    pub progress: Progress,
}

impl Trainer {
    pub fn new(params: NetworkParams, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let lens: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        Ok(Self {
            opt: OptimizerState::new(&lens),
            params,
            config,
            progress: Progress::default(),
        })
    }

    /// One minibatch update at the current position.
    pub fn step(&mut self, train: &[Utterance]) -> Result<BatchSummary> {
        if train.is_empty() {
            return Err(Error::Input("empty training set".into()));
        }
        let bs = self.config.batch_size;
        let ipe = iters_per_epoch(train.len(), bs);
        let order = epoch_order(self.config.seed, self.progress.epoch, train.len());
        let start = self.progress.cursor * bs;
        let batch = &order[start..(start + bs).min(train.len())];

        let reg = self.config.reg();
        let params = &self.params;
        let outs: Vec<_> = batch
            .par_iter()
            .map(|&i| run_sample(params, &train[i], Mode::Train, &reg))
            .collect::<Result<_>>()?;

        let mut grads = Gradients::zeros_like(&self.params);
        let mut stats = SampleStats::default();
        for o in &outs {
            grads.add_assign(o.grads.as_ref().expect("training mode"));
            stats.merge(&o.stats);
        }
        grads.scale(1.0 / batch.len() as f64);

        let eta_eff = if self.config.warmup {
            lr_warmup(self.progress.iter, ipe, self.config.eta)
        } else {
            self.config.eta
        };
        let deltas = adam_apply(
            &mut self.opt,
            &grads.tensors(),
            eta_eff,
            self.config.beta1,
            self.config.beta2,
        );
        let out_index = deltas.len() - 2;
        let delta_w_out = Matrix::from_vec(
            self.params.w_out.rows(),
            self.params.w_out.cols(),
            deltas[out_index].clone(),
        );
        for (w, d) in self.params.tensors_mut().into_iter().zip(&deltas) {
            w.iter_mut().zip(d).for_each(|(w, d)| *w += d);
        }
        self.params.apply_masks();
        self.params.update_broadcast(&delta_w_out);
        if !self.params.is_finite() {
            return Err(Error::NonFinite("weights after update"));
        }

        self.progress.iter += 1;
        self.progress.cursor += 1;
        if self.progress.cursor == ipe {
            self.progress.cursor = 0;
            self.progress.epoch += 1;
        }
        Ok(BatchSummary {
            stats,
            n_samples: batch.len(),
            eta_eff,
        })
    }

    /// Trains until the configured iteration count, evaluating `val` every
    /// `eval_every` updates and at the end. `on_eval` sees every record.
    pub fn fit(
        &mut self,
        train: &[Utterance],
        val: &[Utterance],
        on_eval: &mut dyn FnMut(&Trainer, &MetricsRecord) -> Result<()>,
    ) -> Result<()> {
        let total = self.config.total_iterations(train.len());
        let reg = self.config.reg();
        loop {
            let iter = self.progress.iter;
            let due = iter.is_multiple_of(self.config.eval_every) || iter == total;
            if due && self.progress.last_eval != Some(iter) && !val.is_empty() {
                let rec = evaluate(&self.params, val, &reg, iter, "val")?;
                self.progress.last_eval = Some(iter);
                on_eval(self, &rec)?;
            }
            if iter >= total {
                return Ok(());
            }
            let summary = self.step(train)?;
            log::debug!(
                "iter {} xent {:.4} eta {:.2e}",
                self.progress.iter,
                summary.stats.xent / summary.stats.n_frames.max(1) as f64,
                summary.eta_eff
            );
        }
    }
}
