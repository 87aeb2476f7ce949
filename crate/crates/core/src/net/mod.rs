//! Per-pixel normal inference network.
//!
//! A small MLP maps `(u, v, r, g, b)` to a unit normal. Architecture:
//! three hidden layers of 256, 256, and 128 units, each affine → batch-norm
//! → ReLU → dropout (p = 0.2), then a final affine to 3 outputs normalized
//! to unit length. Training minimizes the cosine loss
//! `(1/|M|) Σ (1 − n̂·n / (‖n̂‖‖n‖))`.
//!
//! Everything is implemented directly (forward, analytic backward, Adam /
//! SGD-momentum) in `f64`; parameters are kept exactly representable in
//! `f32` after every update so the weight file (32-bit floats) round-trips
//! bit-for-bit and loaded models reproduce inference exactly.

mod train;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use train::{train, EpochStats, OptimizerKind, TrainConfig, TrainOutcome};

use crate::pipeline::normalized_pixel_coords;
use crate::scene::NormalMap;
use crate::{CoreError, Result};

/// Standard layer widths, input to output.
pub const STANDARD_DIMS: [usize; 5] = [5, 256, 256, 128, 3];
/// Dropout probability on hidden activations during training.
pub const DROPOUT_RATE: f64 = 0.2;
const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.9;
const NORM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer {
    /// `(in, out)` weight matrix; activations are `x·W + b`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    /// Present on hidden layers only.
    pub bn: Option<BatchNorm>,
}

/// The per-pixel normal network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    dims: Vec<usize>,
    pub(crate) layers: Vec<Layer>,
    mode: Mode,
}

/// Round to the nearest f32-representable value.
#[inline]
fn snap_f32(x: f64) -> f64 {
    x as f32 as f64
}

pub(crate) fn snap_array1(a: &mut Array1<f64>) {
    a.mapv_inplace(snap_f32);
}

pub(crate) fn snap_array2(a: &mut Array2<f64>) {
    a.mapv_inplace(snap_f32);
}

impl MlpModel {
    /// The production architecture (5→256→256→128→3), seeded init, train mode.
    pub fn standard(seed: u64) -> Self {
        Self::with_dims(&STANDARD_DIMS, seed).expect("standard dims are valid")
    }

    /// Arbitrary layer widths; intended for tests and experiments.
    pub fn with_dims(dims: &[usize], seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(CoreError::InvalidParameter(format!(
                "network dims must be at least [in, out] and positive, got {dims:?}"
            )));
        }
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_layers = dims.len() - 1;
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut w = Array2::from_shape_fn((fan_in, fan_out), |_| {
                rng.random_range(-bound..bound)
            });
            let mut b = Array1::from_shape_fn(fan_out, |_| rng.random_range(-bound..bound));
            snap_array2(&mut w);
            snap_array1(&mut b);
            let bn = if l + 1 < n_layers {
                Some(BatchNorm {
                    gamma: Array1::ones(fan_out),
                    beta: Array1::zeros(fan_out),
                    running_mean: Array1::zeros(fan_out),
                    running_var: Array1::ones(fan_out),
                })
            } else {
                None
            };
            layers.push(Layer { w, b, bn });
        }
        Ok(MlpModel {
            dims: dims.to_vec(),
            layers,
            mode: Mode::Train,
        })
    }

    pub(crate) fn from_parts(dims: Vec<usize>, layers: Vec<Layer>, mode: Mode) -> Self {
        MlpModel { dims, layers, mode }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    fn check_batch(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.dims[0] {
            return Err(CoreError::shape(
                "mlp input",
                format!("N×{}", self.dims[0]),
                format!("{}×{}", batch.nrows(), batch.ncols()),
            ));
        }
        if batch.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Numeric("non-finite network input".into()));
        }
        if self.mode == Mode::Train && batch.nrows() < 2 {
            return Err(CoreError::InvalidParameter(
                "batch norm needs at least 2 samples in train mode".into(),
            ));
        }
        Ok(())
    }

    /// Run the network according to the current mode.
    ///
    /// Train mode uses batch statistics; a dropout stream may be supplied
    /// (without one, dropout is disabled). Eval mode uses running statistics
    /// and never applies dropout. Outputs are unit-length rows.
    pub fn forward(
        &self,
        batch: &ArrayView2<f64>,
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Array2<f64>> {
        self.check_batch(batch)?;
        let masks = match (self.mode, dropout_rng) {
            (Mode::Train, Some(rng)) => Some(self.make_dropout_masks(batch.nrows(), rng)),
            _ => None,
        };
        let (out, _) = self.forward_cached(batch, masks.as_deref());
        Ok(out)
    }

    /// Eval-mode inference; read-only and safe for concurrent callers.
    pub fn infer(&self, batch: &ArrayView2<f64>) -> Result<Array2<f64>> {
        if self.mode != Mode::Eval {
            return Err(CoreError::InvalidParameter(
                "inference requires eval mode".into(),
            ));
        }
        self.check_batch(batch)?;
        let (out, _) = self.forward_cached(batch, None);
        Ok(out)
    }

    /// Bernoulli keep-masks scaled by `1/(1−p)`, one per hidden layer.
    pub fn make_dropout_masks(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Array2<f64>> {
        let keep = 1.0 - DROPOUT_RATE;
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|layer| {
                Array2::from_shape_fn((n, layer.w.ncols()), |_| {
                    if rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                })
            })
            .collect()
    }

    /// Forward pass collecting everything the backward pass needs.
    pub(crate) fn forward_cached(
        &self,
        batch: &ArrayView2<f64>,
        dropout_masks: Option<&[Array2<f64>]>,
    ) -> (Array2<f64>, ForwardCaches) {
        let n = batch.nrows();
        let mut caches = ForwardCaches {
            hidden: Vec::with_capacity(self.layers.len() - 1),
            final_input: Array2::zeros((0, 0)),
            raw_output: Array2::zeros((0, 0)),
            norms: Array1::zeros(0),
        };
        let mut x = batch.to_owned();
        for (l, layer) in self.layers[..self.layers.len() - 1].iter().enumerate() {
            let affine = x.dot(&layer.w) + &layer.b;
            let bn = layer.bn.as_ref().expect("hidden layers carry batch norm");
            let (mean, var) = match self.mode {
                Mode::Train => {
                    let mean = affine.mean_axis(Axis(0)).expect("non-empty batch");
                    let centered = &affine - &mean;
                    let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).expect("non-empty");
                    (mean, var)
                }
                Mode::Eval => (bn.running_mean.clone(), bn.running_var.clone()),
            };
            let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
            let xhat = (&affine - &mean) * &inv_std;
            let y = &xhat * &bn.gamma + &bn.beta;
            let relu = y.mapv(|v| v.max(0.0));
            let dropped = match dropout_masks {
                Some(masks) => &relu * &masks[l],
                None => relu.clone(),
            };
            caches.hidden.push(HiddenCache {
                input: x,
                xhat,
                inv_std,
                batch_mean: mean,
                batch_var: var,
                pre_relu: y,
            });
            x = dropped;
        }

        let last = self.layers.last().expect("at least one layer");
        let raw = x.dot(&last.w) + &last.b;
        caches.final_input = x;
        let mut norms = Array1::zeros(n);
        let mut out = raw.clone();
        for i in 0..n {
            let row = raw.row(i);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            let denom = norm.max(NORM_EPS);
            norms[i] = norm;
            for (o, &v) in out.row_mut(i).iter_mut().zip(row.iter()) {
                *o = v / denom;
            }
        }
        caches.raw_output = raw;
        caches.norms = norms;
        (out, caches)
    }
}

pub(crate) struct HiddenCache {
    pub input: Array2<f64>,
    pub xhat: Array2<f64>,
    pub inv_std: Array1<f64>,
    pub batch_mean: Array1<f64>,
    pub batch_var: Array1<f64>,
    pub pre_relu: Array2<f64>,
}

pub(crate) struct ForwardCaches {
    pub hidden: Vec<HiddenCache>,
    pub final_input: Array2<f64>,
    pub raw_output: Array2<f64>,
    pub norms: Array1<f64>,
}

/// Per-layer parameter gradients, same shapes as the parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub dw: Vec<Array2<f64>>,
    pub db: Vec<Array1<f64>>,
    pub dgamma: Vec<Option<Array1<f64>>>,
    pub dbeta: Vec<Option<Array1<f64>>>,
}

/// Mean cosine loss `1 − cos(pred, target)` over unmasked rows.
pub fn loss_cos(
    pred: &ArrayView2<f64>,
    target: &ArrayView2<f64>,
    mask: Option<&[bool]>,
) -> Result<f64> {
    if pred.dim() != target.dim() || pred.ncols() != 3 {
        return Err(CoreError::shape(
            "loss_cos",
            format!("{:?} (N×3)", pred.dim()),
            format!("{:?}", target.dim()),
        ));
    }
    if let Some(m) = mask {
        if m.len() != pred.nrows() {
            return Err(CoreError::shape(
                "loss_cos mask",
                format!("{}", pred.nrows()),
                format!("{}", m.len()),
            ));
        }
    }
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 0..pred.nrows() {
        if let Some(m) = mask {
            if !m[i] {
                continue;
            }
        }
        let p = pred.row(i);
        let t = target.row(i);
        let pn = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tn = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dot = p[0] * t[0] + p[1] * t[1] + p[2] * t[2];
        acc += 1.0 - dot / (pn * tn).max(NORM_EPS);
        count += 1;
    }
    if count == 0 {
        return Err(CoreError::EmptyMask("loss_cos".into()));
    }
    Ok(acc / count as f64)
}

impl MlpModel {
    /// Loss and analytic gradients for a batch.
    ///
    /// Pure: batch statistics are used (train mode) but running statistics
    /// are not touched. `dropout_masks` from [`MlpModel::make_dropout_masks`]
    /// enable dropout; `None` disables it (as for gradient checks).
    pub fn loss_and_gradients(
        &self,
        batch: &ArrayView2<f64>,
        targets: &ArrayView2<f64>,
        dropout_masks: Option<&[Array2<f64>]>,
    ) -> Result<(f64, Gradients)> {
        self.check_batch(batch)?;
        if targets.dim() != (batch.nrows(), *self.dims.last().expect("dims")) {
            return Err(CoreError::shape(
                "targets",
                format!("{}×{}", batch.nrows(), self.dims.last().expect("dims")),
                format!("{:?}", targets.dim()),
            ));
        }
        let (pred, caches) = self.forward_cached(batch, dropout_masks);
        let loss = loss_cos(&pred.view(), targets, None)?;
        let grads = self.backward(&pred, targets, &caches, dropout_masks);
        Ok((loss, grads))
    }

    fn backward(
        &self,
        pred: &Array2<f64>,
        targets: &ArrayView2<f64>,
        caches: &ForwardCaches,
        dropout_masks: Option<&[Array2<f64>]>,
    ) -> Gradients {
        let n = pred.nrows();
        let n_layers = self.layers.len();
        let mut dw = vec![Array2::zeros((0, 0)); n_layers];
        let mut db = vec![Array1::zeros(0); n_layers];
        let mut dgamma: Vec<Option<Array1<f64>>> = vec![None; n_layers];
        let mut dbeta: Vec<Option<Array1<f64>>> = vec![None; n_layers];

        // Cosine loss through the output normalization.
        // d/dv of (1 − v̂·t / ‖t‖) with v̂ = v / max(‖v‖, ε).
        let mut grad = Array2::zeros(pred.dim());
        for i in 0..n {
            let t = targets.row(i);
            let tn = (t.iter().map(|v| v * v).sum::<f64>().sqrt()).max(NORM_EPS);
            let p = pred.row(i);
            // dloss/dpred on the normalized output.
            let dot = p[0] * t[0] + p[1] * t[1] + p[2] * t[2];
            let pn = (p.iter().map(|v| v * v).sum::<f64>().sqrt()).max(NORM_EPS);
            let mut dpred = [0.0; 3];
            for k in 0..3 {
                dpred[k] = -(t[k] / (pn * tn) - dot * p[k] / (pn * pn * pn * tn)) / n as f64;
            }
            // Through the normalization v̂ = v / r.
            let raw_norm = caches.norms[i];
            if raw_norm >= NORM_EPS {
                let vhat = p;
                let inner = vhat[0] * dpred[0] + vhat[1] * dpred[1] + vhat[2] * dpred[2];
                for k in 0..3 {
                    grad[[i, k]] = (dpred[k] - inner * vhat[k]) / raw_norm;
                }
            } else {
                for k in 0..3 {
                    grad[[i, k]] = dpred[k] / NORM_EPS;
                }
            }
        }

        // Final affine layer.
        let last = n_layers - 1;
        dw[last] = caches.final_input.t().dot(&grad);
        db[last] = grad.sum_axis(Axis(0));
        let mut gx = grad.dot(&self.layers[last].w.t());

        // Hidden layers in reverse.
        for l in (0..n_layers - 1).rev() {
            let cache = &caches.hidden[l];
            if let Some(masks) = dropout_masks {
                gx = &gx * &masks[l];
            }
            // ReLU.
            let mut gy = gx;
            gy.zip_mut_with(&cache.pre_relu, |g, &y| {
                if y <= 0.0 {
                    *g = 0.0;
                }
            });
            // Batch norm.
            let bn = self.layers[l].bn.as_ref().expect("hidden layer bn");
            dgamma[l] = Some((&gy * &cache.xhat).sum_axis(Axis(0)));
            dbeta[l] = Some(gy.sum_axis(Axis(0)));
            let dxhat = &gy * &bn.gamma;
            let sum_dxhat = dxhat.sum_axis(Axis(0));
            let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(0));
            let n_f = n as f64;
            let mut ga = Array2::zeros(dxhat.dim());
            for i in 0..n {
                for j in 0..dxhat.ncols() {
                    ga[[i, j]] = cache.inv_std[j] / n_f
                        * (n_f * dxhat[[i, j]]
                            - sum_dxhat[j]
                            - cache.xhat[[i, j]] * sum_dxhat_xhat[j]);
                }
            }
            // Affine.
            dw[l] = cache.input.t().dot(&ga);
            db[l] = ga.sum_axis(Axis(0));
            gx = ga.dot(&self.layers[l].w.t());
        }

        Gradients {
            dw,
            db,
            dgamma,
            dbeta,
        }
    }

    /// Update running batch-norm statistics from a training batch's caches.
    pub(crate) fn update_running_stats(&mut self, caches: &ForwardCaches) {
        for (layer, cache) in self.layers.iter_mut().zip(caches.hidden.iter()) {
            let bn = layer.bn.as_mut().expect("hidden layer bn");
            for j in 0..bn.running_mean.len() {
                bn.running_mean[j] = snap_f32(
                    BN_MOMENTUM * bn.running_mean[j] + (1.0 - BN_MOMENTUM) * cache.batch_mean[j],
                );
                bn.running_var[j] = snap_f32(
                    BN_MOMENTUM * bn.running_var[j] + (1.0 - BN_MOMENTUM) * cache.batch_var[j],
                );
            }
        }
    }
}

/// Run eval-mode inference over every masked pixel of a trichrome image.
///
/// Inputs are assembled exactly as in dataset building (normalized pixel
/// centers plus the pixel's RGB); unmasked pixels come back invalid.
pub fn infer_image(
    model: &MlpModel,
    trichrome: &ndarray::Array3<f64>,
    mask: &Array2<bool>,
) -> Result<NormalMap> {
    if model.mode() != Mode::Eval {
        return Err(CoreError::InvalidParameter(
            "infer_image requires eval mode".into(),
        ));
    }
    if model.dims[0] != 5 || *model.dims.last().expect("dims") != 3 {
        return Err(CoreError::InvalidParameter(format!(
            "infer_image needs a 5→…→3 network, got dims {:?}",
            model.dims
        )));
    }
    let (h, w, ch) = trichrome.dim();
    if ch != 3 || mask.dim() != (h, w) {
        return Err(CoreError::shape(
            "infer_image",
            format!("({h}, {w}, 3) with matching mask"),
            format!("image {:?}, mask {:?}", trichrome.dim(), mask.dim()),
        ));
    }

    let pixels: Vec<(usize, usize)> = mask
        .indexed_iter()
        .filter_map(|((r, c), &m)| m.then_some((r, c)))
        .collect();
    let mut normals = ndarray::Array3::zeros((h, w, 3));
    let mut out_valid = Array2::from_elem((h, w), false);

    const CHUNK: usize = 8192;
    for chunk in pixels.chunks(CHUNK) {
        let mut batch = Array2::zeros((chunk.len(), 5));
        for (i, &(r, c)) in chunk.iter().enumerate() {
            let (u, v) = normalized_pixel_coords(c, r, w, h);
            batch[[i, 0]] = u;
            batch[[i, 1]] = v;
            for k in 0..3 {
                batch[[i, 2 + k]] = trichrome[[r, c, k]];
            }
        }
        let pred = model.infer(&batch.view())?;
        for (i, &(r, c)) in chunk.iter().enumerate() {
            for k in 0..3 {
                normals[[r, c, k]] = pred[[i, k]];
            }
            out_valid[[r, c]] = true;
        }
    }
    NormalMap::new(normals, out_valid)
}

#[cfg(test)]
mod tests;
