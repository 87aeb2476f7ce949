//! Mini-batch training with Adam or SGD-momentum.

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{loss_cos, snap_array1, snap_array2, Gradients, MlpModel, Mode};
use crate::pipeline::CalibDataset;
use crate::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    SgdMomentum { momentum: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub rng_seed: u64,
    /// Validate every this many epochs.
    pub validation_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 256,
            epochs: 30,
            optimizer: OptimizerKind::default(),
            rng_seed: 0,
            validation_interval: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size < 2 {
            return Err(CoreError::InvalidParameter(
                "batch_size must be at least 2 (batch norm)".into(),
            ));
        }
        if self.validation_interval == 0 {
            return Err(CoreError::InvalidParameter(
                "validation_interval must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Best-validation snapshot (final state when validation never ran),
    /// switched to eval mode.
    pub model: MlpModel,
    pub history: Vec<EpochStats>,
}

/// Optimizer state per parameter tensor.
struct AdamState {
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
    m_gamma: Vec<Option<Array1<f64>>>,
    v_gamma: Vec<Option<Array1<f64>>>,
    m_beta: Vec<Option<Array1<f64>>>,
    v_beta: Vec<Option<Array1<f64>>>,
    step: u64,
}

impl AdamState {
    fn new(model: &MlpModel) -> Self {
        let zeros2 = |a: &Array2<f64>| Array2::zeros(a.dim());
        let zeros1 = |a: &Array1<f64>| Array1::zeros(a.len());
        AdamState {
            m_w: model.layers.iter().map(|l| zeros2(&l.w)).collect(),
            v_w: model.layers.iter().map(|l| zeros2(&l.w)).collect(),
            m_b: model.layers.iter().map(|l| zeros1(&l.b)).collect(),
            v_b: model.layers.iter().map(|l| zeros1(&l.b)).collect(),
            m_gamma: model
                .layers
                .iter()
                .map(|l| l.bn.as_ref().map(|bn| zeros1(&bn.gamma)))
                .collect(),
            v_gamma: model
                .layers
                .iter()
                .map(|l| l.bn.as_ref().map(|bn| zeros1(&bn.gamma)))
                .collect(),
            m_beta: model
                .layers
                .iter()
                .map(|l| l.bn.as_ref().map(|bn| zeros1(&bn.beta)))
                .collect(),
            v_beta: model
                .layers
                .iter()
                .map(|l| l.bn.as_ref().map(|bn| zeros1(&bn.beta)))
                .collect(),
            step: 0,
        }
    }
}

fn adam_update_2d(
    param: &mut Array2<f64>,
    grad: &Array2<f64>,
    m: &mut Array2<f64>,
    v: &mut Array2<f64>,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
) {
    for ((p, &g), (mm, vv)) in param
        .iter_mut()
        .zip(grad.iter())
        .zip(m.iter_mut().zip(v.iter_mut()))
    {
        *mm = beta1 * *mm + (1.0 - beta1) * g;
        *vv = beta2 * *vv + (1.0 - beta2) * g * g;
        let mhat = *mm / bc1;
        let vhat = *vv / bc2;
        *p -= lr * mhat / (vhat.sqrt() + eps);
    }
    snap_array2(param);
}

fn adam_update_1d(
    param: &mut Array1<f64>,
    grad: &Array1<f64>,
    m: &mut Array1<f64>,
    v: &mut Array1<f64>,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
) {
    for ((p, &g), (mm, vv)) in param
        .iter_mut()
        .zip(grad.iter())
        .zip(m.iter_mut().zip(v.iter_mut()))
    {
        *mm = beta1 * *mm + (1.0 - beta1) * g;
        *vv = beta2 * *vv + (1.0 - beta2) * g * g;
        let mhat = *mm / bc1;
        let vhat = *vv / bc2;
        *p -= lr * mhat / (vhat.sqrt() + eps);
    }
    snap_array1(param);
}

fn sgd_update_2d(param: &mut Array2<f64>, grad: &Array2<f64>, vel: &mut Array2<f64>, lr: f64, momentum: f64) {
    for ((p, &g), v) in param.iter_mut().zip(grad.iter()).zip(vel.iter_mut()) {
        *v = momentum * *v - lr * g;
        *p += *v;
    }
    snap_array2(param);
}

fn sgd_update_1d(param: &mut Array1<f64>, grad: &Array1<f64>, vel: &mut Array1<f64>, lr: f64, momentum: f64) {
    for ((p, &g), v) in param.iter_mut().zip(grad.iter()).zip(vel.iter_mut()) {
        *v = momentum * *v - lr * g;
        *p += *v;
    }
    snap_array1(param);
}

fn apply_gradients(model: &mut MlpModel, grads: &Gradients, state: &mut AdamState, cfg: &TrainConfig) {
    state.step += 1;
    match cfg.optimizer {
        OptimizerKind::Adam { beta1, beta2, eps } => {
            let bc1 = 1.0 - beta1.powi(state.step as i32);
            let bc2 = 1.0 - beta2.powi(state.step as i32);
            for (l, layer) in model.layers.iter_mut().enumerate() {
                adam_update_2d(
                    &mut layer.w, &grads.dw[l], &mut state.m_w[l], &mut state.v_w[l],
                    cfg.learning_rate, beta1, beta2, eps, bc1, bc2,
                );
                adam_update_1d(
                    &mut layer.b, &grads.db[l], &mut state.m_b[l], &mut state.v_b[l],
                    cfg.learning_rate, beta1, beta2, eps, bc1, bc2,
                );
                if let Some(bn) = layer.bn.as_mut() {
                    adam_update_1d(
                        &mut bn.gamma,
                        grads.dgamma[l].as_ref().expect("hidden gradient"),
                        state.m_gamma[l].as_mut().expect("state"),
                        state.v_gamma[l].as_mut().expect("state"),
                        cfg.learning_rate, beta1, beta2, eps, bc1, bc2,
                    );
                    adam_update_1d(
                        &mut bn.beta,
                        grads.dbeta[l].as_ref().expect("hidden gradient"),
                        state.m_beta[l].as_mut().expect("state"),
                        state.v_beta[l].as_mut().expect("state"),
                        cfg.learning_rate, beta1, beta2, eps, bc1, bc2,
                    );
                }
            }
        }
        OptimizerKind::SgdMomentum { momentum } => {
            for (l, layer) in model.layers.iter_mut().enumerate() {
                sgd_update_2d(&mut layer.w, &grads.dw[l], &mut state.m_w[l], cfg.learning_rate, momentum);
                sgd_update_1d(&mut layer.b, &grads.db[l], &mut state.m_b[l], cfg.learning_rate, momentum);
                if let Some(bn) = layer.bn.as_mut() {
                    sgd_update_1d(
                        &mut bn.gamma,
                        grads.dgamma[l].as_ref().expect("hidden gradient"),
                        state.m_gamma[l].as_mut().expect("state"),
                        cfg.learning_rate, momentum,
                    );
                    sgd_update_1d(
                        &mut bn.beta,
                        grads.dbeta[l].as_ref().expect("hidden gradient"),
                        state.m_beta[l].as_mut().expect("state"),
                        cfg.learning_rate, momentum,
                    );
                }
            }
        }
    }
}

/// Dataset rows as (inputs, targets) arrays.
fn dataset_arrays(ds: &CalibDataset) -> (Array2<f64>, Array2<f64>) {
    let n = ds.samples.len();
    let mut x = Array2::zeros((n, 5));
    let mut t = Array2::zeros((n, 3));
    for (i, s) in ds.samples.iter().enumerate() {
        x[[i, 0]] = s.u as f64;
        x[[i, 1]] = s.v as f64;
        x[[i, 2]] = s.r as f64;
        x[[i, 3]] = s.g as f64;
        x[[i, 4]] = s.b as f64;
        t[[i, 0]] = s.nx as f64;
        t[[i, 1]] = s.ny as f64;
        t[[i, 2]] = s.nz as f64;
    }
    (x, t)
}

/// Eval-mode loss over a dataset, in chunks.
fn eval_loss(model: &MlpModel, x: &Array2<f64>, t: &Array2<f64>) -> Result<f64> {
    let mut eval = model.clone();
    eval.set_mode(Mode::Eval);
    let n = x.nrows();
    const CHUNK: usize = 8192;
    let mut acc = 0.0;
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let xb: ArrayView2<f64> = x.slice(ndarray::s![start..end, ..]);
        let tb: ArrayView2<f64> = t.slice(ndarray::s![start..end, ..]);
        let pred = eval.infer(&xb)?;
        acc += loss_cos(&pred.view(), &tb, None)? * (end - start) as f64;
        start = end;
    }
    Ok(acc / n as f64)
}

/// Train the standard network on a press-split dataset pair.
///
/// Returns the snapshot with the best validation loss (falling back to the
/// final state if validation never ran) and the per-epoch loss history.
/// `epochs = 0` returns the freshly initialized model and empty history.
pub fn train(
    train_ds: &CalibDataset,
    val_ds: &CalibDataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_ds.is_empty() {
        return Err(CoreError::InvalidParameter("empty training dataset".into()));
    }
    if val_ds.is_empty() {
        return Err(CoreError::InvalidParameter("empty validation dataset".into()));
    }

    let mut model = MlpModel::standard(cfg.rng_seed);
    let mut state = AdamState::new(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ 0x5eed_5eed_5eed_5eed);

    let (x_train, t_train) = dataset_arrays(train_ds);
    let (x_val, t_val) = dataset_arrays(val_ds);
    let n = x_train.nrows();

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, MlpModel)> = None;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        let mut start = 0;
        while start < n {
            let end = (start + cfg.batch_size).min(n);
            if end - start < 2 {
                break; // a single leftover sample cannot batch-normalize
            }
            let idx = &order[start..end];
            let mut xb = Array2::zeros((idx.len(), 5));
            let mut tb = Array2::zeros((idx.len(), 3));
            for (k, &i) in idx.iter().enumerate() {
                xb.row_mut(k).assign(&x_train.row(i));
                tb.row_mut(k).assign(&t_train.row(i));
            }

            let masks = model.make_dropout_masks(idx.len(), &mut rng);
            let (pred, caches) = model.forward_cached(&xb.view(), Some(&masks));
            let loss = loss_cos(&pred.view(), &tb.view(), None)?;
            if !loss.is_finite() {
                return Err(CoreError::Divergence(format!(
                    "loss became {loss} at epoch {epoch}"
                )));
            }
            let grads = model.backward(&pred, &tb.view(), &caches, Some(&masks));
            apply_gradients(&mut model, &grads, &mut state, cfg);
            model.update_running_stats(&caches);

            epoch_loss += loss * idx.len() as f64;
            seen += idx.len();
            start = end;
        }
        let train_loss = epoch_loss / seen.max(1) as f64;

        let val_loss = if (epoch + 1) % cfg.validation_interval == 0 || epoch + 1 == cfg.epochs {
            let v = eval_loss(&model, &x_val, &t_val)?;
            if best.as_ref().map_or(true, |(b, _)| v < *b) {
                let mut snap = model.clone();
                snap.set_mode(Mode::Eval);
                best = Some((v, snap));
            }
            Some(v)
        } else {
            None
        };

        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
    }

    let model = match best {
        Some((_, snap)) => snap,
        None => {
            let mut m = model;
            m.set_mode(Mode::Eval);
            m
        }
    };
    Ok(TrainOutcome { model, history })
}
