//! Model parameters, forward propagation, and hand-derived gradients.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{softmax_rows, InferenceSnapshot, ModelConfig};
use crate::error::{Error, Result};
use crate::graph::{features_mat, spmm, FeatureCsr, Graph, NormAdj};
use crate::linalg::Mat;
use crate::rng::Rng;

const BN_EPS: f64 = 1e-5;
const CHECKPOINT_MAGIC: &[u8; 4] = b"UNM1";

/// Forward is guaranteed overflow-free for logits up to this magnitude.
pub const ACTIVATION_OVERFLOW_GUARD: f64 = 80.0;

/// First-layer feature products, sparse when the matrix is sparse enough
/// for the CSR walk to win.
pub struct FeatureOps {
    csr: FeatureCsr,
    dense: Option<Mat>,
}

impl FeatureOps {
    pub fn new(g: &Graph) -> Self {
        let csr = FeatureCsr::from_graph(g);
        let dense = if csr.density() < 0.25 {
            None
        } else {
            Some(features_mat(g))
        };
        FeatureOps { csr, dense }
    }

    fn matmul(&self, w: &Mat) -> Mat {
        match &self.dense {
            Some(d) => d.matmul(w),
            None => self.csr.matmul(w),
        }
    }

    fn transpose_matmul(&self, grad: &Mat) -> Mat {
        match &self.dense {
            Some(d) => d.transpose_matmul(grad),
            None => self.csr.transpose_matmul(grad),
        }
    }
}

/// Borrowed per-graph state shared by every forward/backward call.
pub struct Inputs<'a> {
    pub graph: &'a Graph,
    pub adj: &'a NormAdj,
    pub features: &'a FeatureOps,
}

#[derive(Clone, Debug)]
struct BatchNorm {
    gamma: Vec<f64>,
    beta: Vec<f64>,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
}

impl BatchNorm {
    fn identity(width: usize) -> Self {
        BatchNorm {
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ForwardMode<'m> {
    /// Batch statistics over the given training-mask rows.
    Train { mask: &'m [usize] },
    /// Running statistics.
    Eval,
}

/// GCN parameters plus Adam state.
///
/// Parameter tensors are ordered: Φ per layer, then (γ, β) per BatchNorm
/// layer, then the PReLU slope vector, then classifier weight and bias.
/// Checkpoints follow the same order with running statistics appended
/// after each layer's (γ, β).
#[derive(Clone, Debug)]
pub struct Model {
    pub cfg: ModelConfig,
    pub input_dim: usize,
    pub class_count: usize,
    layer_weights: Vec<Mat>,
    bn: Vec<BatchNorm>,
    prelu: Vec<f64>,
    cls_weight: Mat,
    cls_bias: Vec<f64>,
    pub(super) adam_m: Vec<Vec<f64>>,
    pub(super) adam_v: Vec<Vec<f64>>,
    pub(super) adam_t: u64,
    pub epoch: usize,
}

/// Parameter-shaped gradient bundle, aligned with `Model::params`.
pub type Grads = Vec<Vec<f64>>;

impl Model {
    /// Glorot-uniform weights, PReLU slopes 0.25, BatchNorm scale 1 shift 0.
    /// Deterministic for a given `cfg.seed`.
    pub fn init(cfg: &ModelConfig, g: &Graph) -> Result<Self> {
        cfg.validate()?;
        let mut rng = Rng::new(cfg.seed);
        let mut layer_weights = Vec::with_capacity(cfg.layers);
        let mut fan_in = g.f;
        for _ in 0..cfg.layers {
            layer_weights.push(glorot(&mut rng, fan_in, cfg.hidden));
            fan_in = cfg.hidden;
        }
        let bn = if cfg.batchnorm {
            (0..cfg.layers).map(|_| BatchNorm::identity(cfg.hidden)).collect()
        } else {
            Vec::new()
        };
        let cls_weight = glorot(&mut rng, cfg.hidden, g.k);
        let mut model = Model {
            cfg: cfg.clone(),
            input_dim: g.f,
            class_count: g.k,
            layer_weights,
            bn,
            prelu: vec![0.25; cfg.layers],
            cls_weight,
            cls_bias: vec![0.0; g.k],
            adam_m: Vec::new(),
            adam_v: Vec::new(),
            adam_t: 0,
            epoch: 0,
        };
        model.adam_m = model.params().iter().map(|p| vec![0.0; p.len()]).collect();
        model.adam_v = model.adam_m.clone();
        Ok(model)
    }

    pub fn hidden_dim(&self) -> usize {
        self.cfg.hidden
    }

    pub fn layer_weight(&self, l: usize) -> &Mat {
        &self.layer_weights[l]
    }

    /// Parameter tensors in declaration order.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for w in &self.layer_weights {
            out.push(&w.data);
        }
        for bn in &self.bn {
            out.push(&bn.gamma);
            out.push(&bn.beta);
        }
        out.push(&self.prelu);
        out.push(&self.cls_weight.data);
        out.push(&self.cls_bias);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for w in &mut self.layer_weights {
            out.push(&mut w.data);
        }
        for bn in &mut self.bn {
            out.push(&mut bn.gamma);
            out.push(&mut bn.beta);
        }
        out.push(&mut self.prelu);
        out.push(&mut self.cls_weight.data);
        out.push(&mut self.cls_bias);
        out
    }

    pub fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// Sum of squared parameters, for the weight-decay term.
    fn param_sq_norm(&self) -> f64 {
        self.params()
            .iter()
            .map(|p| p.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    // --- forward ----------------------------------------------------------

    fn forward_internal(&self, inputs: &Inputs, mode: ForwardMode) -> Result<ForwardCache> {
        let n = inputs.graph.n;
        let mut x: Option<Mat> = None; // None while X is still the raw features
        let mut layers = Vec::with_capacity(self.cfg.layers);

        for l in 0..self.cfg.layers {
            let projected = match &x {
                None => inputs.features.matmul(&self.layer_weights[l]),
                Some(x) => x.matmul(&self.layer_weights[l]),
            };
            let z = spmm(inputs.adj, &projected)?;
            let (normed, bn_cache) = if self.cfg.batchnorm {
                let (out, cache) = self.batchnorm_forward(l, &z, mode)?;
                (out, Some(cache))
            } else {
                (z.clone(), None)
            };
            let mut activated = normed.clone();
            let slope = self.prelu[l];
            for v in activated.data.iter_mut() {
                if *v < 0.0 {
                    *v *= slope;
                }
            }
            if !activated.is_finite() {
                return Err(Error::Numeric {
                    location: format!("layer {l}"),
                    message: "non-finite activation".into(),
                });
            }
            layers.push(LayerCache {
                input: x.take(),
                z,
                bn: bn_cache,
                normed,
            });
            x = Some(activated);
        }

        let embeddings = x.expect("at least one layer");
        let logits = {
            let mut m = embeddings.matmul(&self.cls_weight);
            for i in 0..n {
                for (v, b) in m.row_mut(i).iter_mut().zip(&self.cls_bias) {
                    *v += b;
                }
            }
            m
        };
        if !logits.is_finite() {
            return Err(Error::Numeric {
                location: "classifier".into(),
                message: "non-finite logits".into(),
            });
        }
        Ok(ForwardCache {
            layers,
            embeddings,
            logits,
        })
    }

    fn batchnorm_forward(&self, l: usize, z: &Mat, mode: ForwardMode) -> Result<(Mat, BnCache)> {
        let width = z.cols;
        let bn = &self.bn[l];
        // Rows whose statistics define the normalization; `None` = eval.
        let stat_rows: Option<StatRows> = match mode {
            ForwardMode::Eval => None,
            ForwardMode::Train { mask } => Some(match self.cfg.bn_stats {
                super::BnStats::AllNodes => StatRows::All,
                super::BnStats::TrainMask => {
                    if mask.is_empty() {
                        return Err(Error::Contract("batch norm over empty mask".into()));
                    }
                    StatRows::Subset(mask.to_vec())
                }
            }),
        };
        let (mean, var, mask_len) = match &stat_rows {
            None => (bn.running_mean.clone(), bn.running_var.clone(), 0),
            Some(rows) => {
                let idx: Vec<usize> = match rows {
                    StatRows::All => (0..z.rows).collect(),
                    StatRows::Subset(ids) => ids.clone(),
                };
                let m = idx.len() as f64;
                let mut mean = vec![0.0; width];
                for &i in &idx {
                    for (s, &v) in mean.iter_mut().zip(z.row(i)) {
                        *s += v;
                    }
                }
                for s in mean.iter_mut() {
                    *s /= m;
                }
                let mut var = vec![0.0; width];
                for &i in &idx {
                    for ((s, &v), &mu) in var.iter_mut().zip(z.row(i)).zip(&mean) {
                        let d = v - mu;
                        *s += d * d;
                    }
                }
                for s in var.iter_mut() {
                    *s /= m;
                }
                (mean, var, idx.len())
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let mut zhat = z.clone();
        for i in 0..z.rows {
            let row = zhat.row_mut(i);
            for ((v, &mu), &is) in row.iter_mut().zip(&mean).zip(&inv_std) {
                *v = (*v - mu) * is;
            }
        }
        let mut out = zhat.clone();
        for i in 0..out.rows {
            let row = out.row_mut(i);
            for ((v, &g), &b) in row.iter_mut().zip(&bn.gamma).zip(&bn.beta) {
                *v = *v * g + b;
            }
        }
        Ok((
            out,
            BnCache {
                mean,
                var,
                inv_std,
                zhat,
                mask_len,
                stat_rows,
            },
        ))
    }

    /// Fold the batch statistics of a training forward into the running
    /// estimates. `bn_momentum` weighs the current batch, matching the
    /// framework convention the reference results were produced with:
    /// `running ← (1−momentum)·running + momentum·batch`.
    fn update_running_stats(&mut self, caches: &[LayerCache]) {
        let momentum = self.cfg.bn_momentum;
        for (bn, layer) in self.bn.iter_mut().zip(caches) {
            let Some(cache) = &layer.bn else { continue };
            let m = cache.mask_len as f64;
            let unbias = if cache.mask_len > 1 { m / (m - 1.0) } else { 1.0 };
            for (r, &b) in bn.running_mean.iter_mut().zip(&cache.mean) {
                *r = (1.0 - momentum) * *r + momentum * b;
            }
            for (r, &b) in bn.running_var.iter_mut().zip(&cache.var) {
                *r = (1.0 - momentum) * *r + momentum * (b * unbias);
            }
        }
    }

    /// Non-optimized state tensors (BatchNorm running statistics), in
    /// declaration order. Snapshots of a model must carry these along
    /// with the parameters.
    pub fn buffers(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for bn in &self.bn {
            out.push(&bn.running_mean);
            out.push(&bn.running_var);
        }
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for bn in &mut self.bn {
            out.push(&mut bn.running_mean);
            out.push(&mut bn.running_var);
        }
        out
    }

    fn snapshot_from_cache(&self, cache: &ForwardCache) -> InferenceSnapshot {
        let (predicted, confidence) = super::predictions_from_logits(&cache.logits);
        InferenceSnapshot {
            embeddings: cache.embeddings.clone(),
            logits: cache.logits.clone(),
            predicted,
            confidence,
        }
    }

    /// Forward pass producing the per-node snapshot. Training mode also
    /// folds the batch statistics into the running estimates.
    pub fn forward(&mut self, inputs: &Inputs, mode: ForwardMode) -> Result<InferenceSnapshot> {
        let cache = self.forward_internal(inputs, mode)?;
        if matches!(mode, ForwardMode::Train { .. }) {
            self.update_running_stats(&cache.layers);
        }
        Ok(self.snapshot_from_cache(&cache))
    }

    /// Eval-mode forward; confidence is the max softmax probability.
    pub fn predict(&self, inputs: &Inputs) -> Result<InferenceSnapshot> {
        let cache = self.forward_internal(inputs, ForwardMode::Eval)?;
        Ok(self.snapshot_from_cache(&cache))
    }

    // --- loss and gradients -------------------------------------------------

    /// Training-mode forward + reverse-mode backward.
    ///
    /// Returns the total loss (weighted mean cross-entropy over `mask` plus
    /// `weight_decay/2 · ||θ||²`) and gradients aligned with [`Model::params`].
    /// Running statistics are updated when `commit_running` is set (the
    /// training loop sets it; the finite-difference oracle must not).
    pub fn loss_and_grad(
        &mut self,
        inputs: &Inputs,
        labels: &[usize],
        mask: &[usize],
        weights: &[f64],
        commit_running: bool,
    ) -> Result<(f64, Grads)> {
        if mask.is_empty() {
            return Err(Error::Contract("loss over empty mask".into()));
        }
        let cache = self.forward_internal(inputs, ForwardMode::Train { mask })?;
        if commit_running {
            self.update_running_stats(&cache.layers);
        }

        let n = inputs.graph.n;
        let k = self.class_count;
        let probs = softmax_rows(&cache.logits);
        let mut weight_sum = 0.0;
        let mut ce = 0.0;
        for &i in mask {
            let w = weights[labels[i]];
            weight_sum += w;
            ce -= w * probs.get(i, labels[i]).max(f64::MIN_POSITIVE).ln();
        }
        if weight_sum <= 0.0 {
            return Err(Error::Contract("all class weights zero on mask".into()));
        }
        let wd = self.cfg.weight_decay;
        let loss = ce / weight_sum + 0.5 * wd * self.param_sq_norm();

        // dL/dlogits, nonzero only on masked rows.
        let mut dlogits = Mat::zeros(n, k);
        for &i in mask {
            let w = weights[labels[i]] / weight_sum;
            let prow = probs.row(i);
            let drow = dlogits.row_mut(i);
            for c in 0..k {
                drow[c] = w * (prow[c] - if c == labels[i] { 1.0 } else { 0.0 });
            }
        }

        // Classifier.
        let d_cls_weight = cache.embeddings.transpose_matmul(&dlogits);
        let mut d_cls_bias = vec![0.0; k];
        for i in 0..n {
            for (s, &v) in d_cls_bias.iter_mut().zip(dlogits.row(i)) {
                *s += v;
            }
        }
        let mut d_x = dlogits.matmul_transpose(&self.cls_weight);

        // Layers, last to first.
        let mut d_layer_weights: Vec<Mat> = Vec::with_capacity(self.cfg.layers);
        let mut d_gamma: Vec<Vec<f64>> = Vec::new();
        let mut d_beta: Vec<Vec<f64>> = Vec::new();
        let mut d_prelu = vec![0.0; self.cfg.layers];
        for l in (0..self.cfg.layers).rev() {
            let layer = &cache.layers[l];

            // PReLU.
            let slope = self.prelu[l];
            let mut da = 0.0;
            let mut d_b = d_x;
            for (g, &b) in d_b.data.iter_mut().zip(&layer.normed.data) {
                if b <= 0.0 {
                    da += *g * b;
                    *g *= slope;
                }
            }
            d_prelu[l] = da;

            // BatchNorm.
            let d_z = if let Some(bn_cache) = &layer.bn {
                let bn = &self.bn[l];
                let width = d_b.cols;
                let mut dg = vec![0.0; width];
                let mut db = vec![0.0; width];
                for i in 0..n {
                    let grow = d_b.row(i);
                    let zrow = bn_cache.zhat.row(i);
                    for j in 0..width {
                        dg[j] += grow[j] * zrow[j];
                        db[j] += grow[j];
                    }
                }
                // dẐ = dB ∘ γ; its column sums feed the mask correction.
                let mut sum_dzhat = vec![0.0; width];
                let mut sum_dzhat_zhat = vec![0.0; width];
                for i in 0..n {
                    let grow = d_b.row(i);
                    let zrow = bn_cache.zhat.row(i);
                    for j in 0..width {
                        let dzh = grow[j] * bn.gamma[j];
                        sum_dzhat[j] += dzh;
                        sum_dzhat_zhat[j] += dzh * zrow[j];
                    }
                }
                let m = bn_cache.mask_len as f64;
                // The mask correction applies to rows that contributed to
                // the batch statistics.
                let in_stats: Vec<bool> = match &bn_cache.stat_rows {
                    Some(StatRows::All) => vec![true; n],
                    Some(StatRows::Subset(ids)) => {
                        let mut v = vec![false; n];
                        for &i in ids {
                            v[i] = true;
                        }
                        v
                    }
                    None => vec![false; n],
                };
                let mut d_z = Mat::zeros(n, width);
                for i in 0..n {
                    let grow = d_b.row(i);
                    let zrow = bn_cache.zhat.row(i);
                    let orow = d_z.row_mut(i);
                    for j in 0..width {
                        let mut v = grow[j] * bn.gamma[j];
                        if in_stats[i] {
                            v -= (sum_dzhat[j] + zrow[j] * sum_dzhat_zhat[j]) / m;
                        }
                        orow[j] = v * bn_cache.inv_std[j];
                    }
                }
                d_gamma.push(dg);
                d_beta.push(db);
                d_z
            } else {
                d_b
            };

            // Propagation: Z = Ã·P with Ã symmetric, so dP = Ã·dZ.
            let d_projected = spmm(inputs.adj, &d_z)?;

            // Projection: P = X·Φ.
            let dw = match &layer.input {
                None => inputs.features.transpose_matmul(&d_projected),
                Some(x) => x.transpose_matmul(&d_projected),
            };
            d_layer_weights.push(dw);
            d_x = if l > 0 {
                d_projected.matmul_transpose(&self.layer_weights[l])
            } else {
                Mat::zeros(0, 0)
            };
        }
        d_layer_weights.reverse();
        d_gamma.reverse();
        d_beta.reverse();

        // Assemble in declaration order, adding the decay term.
        let mut grads: Grads = Vec::new();
        for dw in d_layer_weights {
            grads.push(dw.data);
        }
        for (dg, db) in d_gamma.into_iter().zip(d_beta) {
            grads.push(dg);
            grads.push(db);
        }
        grads.push(d_prelu);
        grads.push(d_cls_weight.data);
        grads.push(d_cls_bias);

        for (grad, param) in grads.iter_mut().zip(self.params()) {
            for (g, &p) in grad.iter_mut().zip(param) {
                *g += wd * p;
            }
        }
        Ok((loss, grads))
    }

    /// Cross-entropy (optionally weighted) of an eval-mode forward over a
    /// mask, without the decay term. Used for validation monitoring.
    pub fn eval_loss(&self, inputs: &Inputs, labels: &[usize], mask: &[usize]) -> Result<f64> {
        let cache = self.forward_internal(inputs, ForwardMode::Eval)?;
        let probs = softmax_rows(&cache.logits);
        let mut ce = 0.0;
        for &i in mask {
            ce -= probs.get(i, labels[i]).max(f64::MIN_POSITIVE).ln();
        }
        Ok(ce / mask.len() as f64)
    }

    // --- checkpoint ---------------------------------------------------------

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        w.write_all(CHECKPOINT_MAGIC).map_err(|e| Error::io(path, e))?;
        let header = serde_json::json!({
            "config": self.cfg,
            "input_dim": self.input_dim,
            "class_count": self.class_count,
            "epoch": self.epoch,
        });
        let header = serde_json::to_vec(&header).expect("header serializes");
        w.write_all(&(header.len() as u64).to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
        w.write_all(&header).map_err(|e| Error::io(path, e))?;
        let mut tensors: Vec<&[f64]> = Vec::new();
        for weight in &self.layer_weights {
            tensors.push(&weight.data);
        }
        for bn in &self.bn {
            tensors.push(&bn.gamma);
            tensors.push(&bn.beta);
            tensors.push(&bn.running_mean);
            tensors.push(&bn.running_var);
        }
        tensors.push(&self.prelu);
        tensors.push(&self.cls_weight.data);
        tensors.push(&self.cls_bias);
        for t in tensors {
            for &v in t {
                w.write_all(&(v as f32).to_le_bytes())
                    .map_err(|e| Error::io(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load_checkpoint(path: &Path, g: &Graph) -> Result<Model> {
        let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Schema(format!(
                "{}: bad checkpoint magic",
                path.display()
            )));
        }
        let mut lenbuf = [0u8; 8];
        r.read_exact(&mut lenbuf).map_err(|e| Error::io(path, e))?;
        let len = u64::from_le_bytes(lenbuf) as usize;
        let mut header = vec![0u8; len];
        r.read_exact(&mut header).map_err(|e| Error::io(path, e))?;
        let header: serde_json::Value =
            serde_json::from_slice(&header).map_err(|e| Error::Schema(e.to_string()))?;
        let cfg: ModelConfig = serde_json::from_value(header["config"].clone())
            .map_err(|e| Error::Schema(e.to_string()))?;
        let mut model = Model::init(&cfg, g)?;
        model.epoch = header["epoch"].as_u64().unwrap_or(0) as usize;

        let mut read_tensor = |t: &mut [f64]| -> Result<()> {
            let mut buf = vec![0u8; t.len() * 4];
            r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
            for (v, b) in t.iter_mut().zip(buf.chunks_exact(4)) {
                *v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64;
            }
            Ok(())
        };
        for weight in &mut model.layer_weights {
            read_tensor(&mut weight.data)?;
        }
        for bn in &mut model.bn {
            read_tensor(&mut bn.gamma)?;
            read_tensor(&mut bn.beta)?;
            read_tensor(&mut bn.running_mean)?;
            read_tensor(&mut bn.running_var)?;
        }
        read_tensor(&mut model.prelu)?;
        read_tensor(&mut model.cls_weight.data)?;
        read_tensor(&mut model.cls_bias)?;
        Ok(model)
    }
}

/// Pure total loss (cross-entropy + decay) for the finite-difference
/// oracle; never touches running statistics.
pub fn loss_only(
    model: &Model,
    inputs: &Inputs,
    labels: &[usize],
    mask: &[usize],
    weights: &[f64],
) -> Result<f64> {
    Ok(loss_and_kink_signature(model, inputs, labels, mask, weights)?.0)
}

/// [`loss_only`] plus the sign pattern of every PReLU pre-activation.
///
/// Central differences are only a valid gradient oracle while no probe
/// crosses an activation kink; comparing signatures between the base and
/// perturbed evaluations detects exactly that.
pub fn loss_and_kink_signature(
    model: &Model,
    inputs: &Inputs,
    labels: &[usize],
    mask: &[usize],
    weights: &[f64],
) -> Result<(f64, Vec<bool>)> {
    let cache = model.forward_internal(inputs, ForwardMode::Train { mask })?;
    let probs = softmax_rows(&cache.logits);
    let mut weight_sum = 0.0;
    let mut ce = 0.0;
    for &i in mask {
        let w = weights[labels[i]];
        weight_sum += w;
        ce -= w * probs.get(i, labels[i]).max(f64::MIN_POSITIVE).ln();
    }
    let loss = ce / weight_sum + 0.5 * model.cfg.weight_decay * model.param_sq_norm();
    let signs = cache
        .layers
        .iter()
        .flat_map(|l| l.normed.data.iter().map(|&v| v > 0.0))
        .collect();
    Ok((loss, signs))
}

fn glorot(rng: &mut Rng, fan_in: usize, fan_out: usize) -> Mat {
    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut m = Mat::zeros(fan_in, fan_out);
    for v in m.data.iter_mut() {
        *v = rng.range_f64(-s, s);
    }
    m
}

struct LayerCache {
    /// Dense input to the layer; `None` for the first layer (raw features).
    input: Option<Mat>,
    /// Post-propagation, pre-norm values (unused when batchnorm is off —
    /// `normed` aliases it then).
    #[allow(dead_code)]
    z: Mat,
    bn: Option<BnCache>,
    /// Pre-activation values fed into PReLU.
    normed: Mat,
}

/// Rows whose statistics defined a training-mode normalization.
enum StatRows {
    All,
    Subset(Vec<usize>),
}

struct BnCache {
    mean: Vec<f64>,
    var: Vec<f64>,
    inv_std: Vec<f64>,
    zhat: Mat,
    mask_len: usize,
    stat_rows: Option<StatRows>,
}

struct ForwardCache {
    layers: Vec<LayerCache>,
    embeddings: Mat,
    logits: Mat,
}
