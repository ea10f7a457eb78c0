//! Mini-batch Adam training with early stopping on validation MAE, plus the
//! shared prediction/metric helpers used by validation and evaluation.

use super::backward::backward_accumulate;
use super::forward::{forward, huber_grad, huber_loss};
use super::params::ModelParams;
use super::ModelConfig;
use crate::data::{NormStats, SplitTag, WindowSample, WindowedDataset};
use crate::error::{Error, Result};
use crate::metrics;
use crate::tensor::DenseMatrix;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
}

impl Adam {
    fn new(count: usize, lr: f64) -> Adam {
        Adam {
            m: vec![0.0; count],
            v: vec![0.0; count],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mae: f64,
    pub val_rmse: f64,
    pub val_mape: Option<f64>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Parameters with the best validation MAE.
    pub params: ModelParams,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
}

/// Denormalized predictions for a slice of samples (batched internally).
pub fn predict_samples(
    params: &ModelParams,
    cfg: &ModelConfig,
    aprime: &DenseMatrix,
    samples: &[WindowSample],
    stats: &NormStats,
) -> Result<Vec<DenseMatrix>> {
    let mut preds = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(64) {
        let inputs: Vec<&crate::tensor::DenseTensor3> = chunk.iter().map(|s| &s.input).collect();
        let (mut batch_preds, _) = forward(&inputs, aprime, params, cfg, stats)?;
        preds.append(&mut batch_preds);
    }
    Ok(preds)
}

/// Flattened (targets, predictions) per horizon step, the shape the metric
/// report consumes. Targets are `horizon x N`, predictions `N x horizon`.
pub fn horizon_pairs(
    samples: &[WindowSample],
    preds: &[DenseMatrix],
    horizon: usize,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut pairs = vec![(Vec::new(), Vec::new()); horizon];
    for (s, p) in samples.iter().zip(preds) {
        let n = p.rows();
        for h in 0..horizon {
            let (ys, ps) = &mut pairs[h];
            for i in 0..n {
                ys.push(s.target.get(h, i));
                ps.push(p.get(i, h));
            }
        }
    }
    pairs
}

fn aggregate_metrics(pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<(f64, f64, Option<f64>)> {
    let mut y = Vec::new();
    let mut p = Vec::new();
    for (ys, ps) in pairs {
        y.extend_from_slice(ys);
        p.extend_from_slice(ps);
    }
    let mae = metrics::mae(&y, &p)?;
    let rmse = metrics::rmse(&y, &p)?;
    let mape = match metrics::mape(&y, &p) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    Ok((mae, rmse, mape))
}

/// Train on the dataset's train split, early-stopping on validation MAE.
/// Deterministic for a fixed seed: one ChaCha8 stream drives initialization
/// and the per-epoch shuffles, in that order.
pub fn train(ds: &WindowedDataset, aprime: &DenseMatrix, cfg: &ModelConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let stats = ds.stats()?.clone();
    let train_range = ds.split_range(SplitTag::Train)?;
    let val_range = ds.split_range(SplitTag::Val)?;
    if train_range.is_empty() || val_range.is_empty() {
        return Err(Error::usage("train and validation splits must be nonempty".to_string()));
    }
    if ds.n_sensors != cfg.n_nodes || ds.window != cfg.window || ds.horizon != cfg.horizon {
        return Err(Error::usage(format!(
            "dataset ({} sensors, window {}, horizon {}) does not match config ({}, {}, {})",
            ds.n_sensors, ds.window, ds.horizon, cfg.n_nodes, cfg.window, cfg.horizon
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::init(cfg, &mut rng);
    let count = params.total_count();
    let mut flat = params.to_flat();
    let mut adam = Adam::new(count, cfg.learning_rate);

    let mut history = Vec::new();
    let mut best_mae = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_flat = flat.clone();
    let mut stale_epochs = 0usize;

    let mut indices: Vec<usize> = train_range.clone().collect();
    for epoch in 1..=cfg.max_epochs {
        indices.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut loss_batches = 0usize;
        for chunk in indices.chunks(cfg.batch_size) {
            let inputs: Vec<&crate::tensor::DenseTensor3> =
                chunk.iter().map(|&idx| &ds.samples[idx].input).collect();
            let (preds, trace) = forward(&inputs, aprime, &params, cfg, &stats)?;

            let inv_batch = 1.0 / chunk.len() as f64;
            let mut batch_loss = 0.0;
            let mut loss_grads = Vec::with_capacity(chunk.len());
            for (&idx, pred) in chunk.iter().zip(&preds) {
                // Targets are horizon x N; predictions N x horizon.
                let target_t = ds.samples[idx].target.transposed();
                batch_loss += huber_loss(&target_t, pred, cfg.huber_delta)?;
                let mut lg = huber_grad(&target_t, pred, cfg.huber_delta)?;
                for v in lg.data_mut() {
                    *v *= inv_batch;
                }
                loss_grads.push(lg);
            }
            let mut grads = ModelParams::zeros(cfg);
            backward_accumulate(&trace, &loss_grads, aprime, &params, cfg, &mut grads)?;
            batch_loss *= inv_batch;
            loss_sum += batch_loss;
            loss_batches += 1;

            let grad_flat = grads.to_flat();
            adam.step(&mut flat, &grad_flat);
            params.copy_from_flat(&flat);
        }
        let train_loss = loss_sum / loss_batches.max(1) as f64;

        let val_samples = &ds.samples[val_range.clone()];
        let val_preds = predict_samples(&params, cfg, aprime, val_samples, &stats)?;
        let pairs = horizon_pairs(val_samples, &val_preds, cfg.horizon);
        let (val_mae, val_rmse, val_mape) = aggregate_metrics(&pairs)?;

        history.push(EpochStats {
            epoch,
            train_loss,
            val_mae,
            val_rmse,
            val_mape,
        });

        if val_mae < best_mae {
            best_mae = val_mae;
            best_epoch = epoch;
            best_flat.copy_from_slice(&flat);
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= cfg.patience {
                break;
            }
        }
    }

    params.copy_from_flat(&best_flat);
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
    })
}

/// History CSV: `epoch,train_loss,val_mae,val_rmse,val_mape` (empty MAPE
/// when undefined).
pub fn history_to_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,val_mae,val_rmse,val_mape\n");
    for h in history {
        let mape = h.val_mape.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            h.epoch, h.train_loss, h.val_mae, h.val_rmse, mape
        ));
    }
    out
}
