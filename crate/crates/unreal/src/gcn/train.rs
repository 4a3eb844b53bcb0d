//! Full-batch training loop: Adam, halving scheduler, early stopping.

use std::path::Path;

use super::model::{FeatureOps, Inputs, Model};
use super::{class_weights, ModelConfig};
use crate::error::{Error, Result};
use crate::graph::{Graph, NormAdj};
use crate::split::Split;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_acc: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub lr_final: f64,
}

impl TrainTrace {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
        );
        writeln!(w, "epoch,loss,val_acc,lr").map_err(|e| Error::io(path, e))?;
        for r in &self.epochs {
            writeln!(w, "{},{},{},{}", r.epoch, r.loss, r.val_acc, r.lr)
                .map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Train on the split's own labels.
pub fn train(g: &Graph, adj: &NormAdj, split: &Split, cfg: &ModelConfig) -> Result<(Model, TrainTrace)> {
    let features = FeatureOps::new(g);
    train_with_labels(g, adj, &features, split, &g.labels, cfg)
}

/// Train with an explicit per-node label vector (the pipeline passes
/// pseudo-labels here). Validation accuracy is always measured against the
/// graph's ground-truth labels.
pub fn train_with_labels(
    g: &Graph,
    adj: &NormAdj,
    features: &FeatureOps,
    split: &Split,
    labels: &[usize],
    cfg: &ModelConfig,
) -> Result<(Model, TrainTrace)> {
    let mut model = Model::init(cfg, g)?;
    let trace = fit(&mut model, g, adj, features, split, labels)?;
    Ok((model, trace))
}

/// Run the training loop on an existing model (warm starts keep the
/// caller's parameters). Uses `model.cfg` for every budget and restores
/// the best-validation-accuracy parameters before returning.
pub fn fit(
    model: &mut Model,
    g: &Graph,
    adj: &NormAdj,
    features: &FeatureOps,
    split: &Split,
    labels: &[usize],
) -> Result<TrainTrace> {
    let cfg = model.cfg.clone();
    let inputs = Inputs {
        graph: g,
        adj,
        features,
    };
    let mut trace = TrainTrace {
        lr_final: cfg.lr,
        ..Default::default()
    };
    if cfg.max_epochs == 0 {
        return Ok(trace);
    }

    let weights = class_weights(cfg.class_weight_mode, labels, &split.train_ids, g.k);
    let mut lr = cfg.lr;
    let mut best_params: Vec<Vec<f64>> = model.params().iter().map(|p| p.to_vec()).collect();
    let mut best_buffers: Vec<Vec<f64>> = model.buffers().iter().map(|p| p.to_vec()).collect();
    let mut best_val_acc = f64::NEG_INFINITY;
    let mut best_epoch = 0usize;
    let mut epochs_since_val_acc_gain = 0usize;
    let mut best_val_loss = f64::INFINITY;
    let mut epochs_since_val_loss_drop = 0usize;

    for epoch in 0..cfg.max_epochs {
        let (loss, grads) =
            model.loss_and_grad(&inputs, labels, &split.train_ids, &weights, true)?;
        adam_step(model, &grads, lr);
        if !model.all_finite() {
            return Err(Error::Numeric {
                location: format!("epoch {epoch}"),
                message: "parameters diverged".into(),
            });
        }

        let (val_acc, val_loss) = if split.val_ids.is_empty() {
            // No validation set: monitor training loss instead.
            (-loss, loss)
        } else {
            let snapshot = model.predict(&inputs)?;
            let correct = split
                .val_ids
                .iter()
                .filter(|&&i| snapshot.predicted[i] == g.labels[i])
                .count();
            let acc = correct as f64 / split.val_ids.len() as f64;
            let vloss = model.eval_loss(&inputs, &g.labels, &split.val_ids)?;
            (acc, vloss)
        };

        trace.epochs.push(EpochRecord {
            epoch,
            loss,
            val_acc,
            lr,
        });

        if val_acc > best_val_acc {
            best_val_acc = val_acc;
            best_epoch = epoch;
            for (dst, src) in best_params.iter_mut().zip(model.params()) {
                dst.copy_from_slice(src);
            }
            for (dst, src) in best_buffers.iter_mut().zip(model.buffers()) {
                dst.copy_from_slice(src);
            }
            epochs_since_val_acc_gain = 0;
        } else {
            epochs_since_val_acc_gain += 1;
            if epochs_since_val_acc_gain >= cfg.patience {
                break;
            }
        }

        if val_loss < best_val_loss {
            best_val_loss = val_loss;
            epochs_since_val_loss_drop = 0;
        } else {
            epochs_since_val_loss_drop += 1;
            if epochs_since_val_loss_drop >= cfg.scheduler_window {
                lr *= 0.5;
                epochs_since_val_loss_drop = 0;
            }
        }
    }

    for (dst, src) in model.params_mut().into_iter().zip(&best_params) {
        dst.copy_from_slice(src);
    }
    for (dst, src) in model.buffers_mut().into_iter().zip(&best_buffers) {
        dst.copy_from_slice(src);
    }
    model.epoch = best_epoch;
    trace.best_epoch = best_epoch;
    trace.best_val_acc = best_val_acc;
    trace.lr_final = lr;
    Ok(trace)
}

fn adam_step(model: &mut Model, grads: &[Vec<f64>], lr: f64) {
    model.adam_t += 1;
    let t = model.adam_t as i32;
    let bias1 = 1.0 - ADAM_BETA1.powi(t);
    let bias2 = 1.0 - ADAM_BETA2.powi(t);
    // Split borrows: move the moment buffers out while touching params.
    let mut m_buf = std::mem::take(&mut model.adam_m);
    let mut v_buf = std::mem::take(&mut model.adam_v);
    for (((param, grad), m), v) in model
        .params_mut()
        .into_iter()
        .zip(grads)
        .zip(m_buf.iter_mut())
        .zip(v_buf.iter_mut())
    {
        for i in 0..param.len() {
            let g = grad[i];
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
            let mhat = m[i] / bias1;
            let vhat = v[i] / bias2;
            param[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
        }
    }
    model.adam_m = m_buf;
    model.adam_v = v_buf;
}
