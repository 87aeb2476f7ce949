use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::pipeline::CalibSample;

fn random_batch(n: usize, dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, dim), |_| rng.random_range(-1.0..1.0))
}

fn random_unit_targets(n: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Array2::zeros((n, 3));
    for i in 0..n {
        let v: [f64; 3] = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(0.1..1.0),
        ];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        for k in 0..3 {
            t[[i, k]] = v[k] / norm;
        }
    }
    t
}

#[test]
fn output_is_unit_length() {
    let mut model = MlpModel::standard(3);
    model.set_mode(Mode::Eval);
    let batch = random_batch(64, 5, 9);
    let out = model.infer(&batch.view()).unwrap();
    for i in 0..64 {
        let norm: f64 = out.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6, "row {i} norm {norm}");
    }
}

#[test]
fn eval_mode_is_deterministic() {
    let mut model = MlpModel::standard(4);
    model.set_mode(Mode::Eval);
    let batch = random_batch(8, 5, 1);
    let a = model.infer(&batch.view()).unwrap();
    let b = model.infer(&batch.view()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn one_unit_hidden_network_matches_hand_computation() {
    // 5→1→3 in eval mode: every intermediate value is computable by hand.
    let mut model = MlpModel::with_dims(&[5, 1, 3], 0).unwrap();
    model.set_mode(Mode::Eval);
    {
        let l0 = &mut model.layers[0];
        for (k, v) in [0.1, 0.2, 0.3, 0.4, 0.5].iter().enumerate() {
            l0.w[[k, 0]] = *v;
        }
        l0.b[0] = 0.1;
        let bn = l0.bn.as_mut().unwrap();
        bn.gamma[0] = 2.0;
        bn.beta[0] = 0.5;
        bn.running_mean[0] = 0.0;
        bn.running_var[0] = 1.0;
    }
    {
        let l1 = &mut model.layers[1];
        l1.w[[0, 0]] = 1.0;
        l1.w[[0, 1]] = -1.0;
        l1.w[[0, 2]] = 2.0;
        l1.b[0] = 0.5;
        l1.b[1] = 0.0;
        l1.b[2] = -0.5;
    }

    let x = [1.0, 0.5, -1.0, 0.25, 0.5];
    let batch = Array2::from_shape_vec((1, 5), x.to_vec()).unwrap();
    let out = model.infer(&batch.view()).unwrap();

    // Hand computation.
    let a: f64 = 0.1 * 1.0 + 0.2 * 0.5 + 0.3 * (-1.0) + 0.4 * 0.25 + 0.5 * 0.5 + 0.1;
    let xhat = a / (1.0f64 + 1e-5).sqrt();
    let y = 2.0 * xhat + 0.5;
    let h = y.max(0.0);
    let raw = [h + 0.5, -h, 2.0 * h - 0.5];
    let norm = (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]).sqrt();
    for k in 0..3 {
        assert!(
            (out[[0, k]] - raw[k] / norm).abs() < 1e-12,
            "component {k}: {} vs {}",
            out[[0, k]],
            raw[k] / norm
        );
    }
}

#[test]
fn loss_cos_reference_values() {
    let t = random_unit_targets(5, 2);
    assert!(loss_cos(&t.view(), &t.view(), None).unwrap().abs() < 1e-12);

    let neg = t.mapv(|v| -v);
    assert!((loss_cos(&neg.view(), &t.view(), None).unwrap() - 2.0).abs() < 1e-12);

    // Orthogonal pairs: rotate each target 90° around z after projecting to
    // the xy plane would not stay orthogonal; use canonical axes instead.
    let mut a = Array2::zeros((4, 3));
    let mut b = Array2::zeros((4, 3));
    for i in 0..4 {
        a[[i, 0]] = 1.0;
        b[[i, 1]] = 1.0;
    }
    assert!((loss_cos(&a.view(), &b.view(), None).unwrap() - 1.0).abs() < 1e-12);

    let mask = vec![false; 5];
    assert!(matches!(
        loss_cos(&t.view(), &t.view(), Some(&mask)),
        Err(crate::CoreError::EmptyMask(_))
    ));
}

fn loss_of(model: &MlpModel, x: &Array2<f64>, t: &Array2<f64>) -> f64 {
    let (pred, _) = model.forward_cached(&x.view(), None);
    loss_cos(&pred.view(), &t.view(), None).unwrap()
}

/// Central finite differences over every parameter of a small network.
fn gradient_check(seed: u64) -> f64 {
    let model = MlpModel::with_dims(&[5, 8, 3], seed).unwrap();
    let x = random_batch(6, 5, seed ^ 0xabc);
    let t = random_unit_targets(6, seed ^ 0xdef);
    let (_, grads) = model
        .loss_and_gradients(&x.view(), &t.view(), None)
        .unwrap();

    let h = 1e-4;
    let mut worst_rel: f64 = 0.0;
    let mut check_tensor = |get: &mut dyn FnMut(&mut MlpModel) -> &mut f64, analytic: f64| {
        let mut m_plus = model.clone();
        *get(&mut m_plus) += h;
        let mut m_minus = model.clone();
        *get(&mut m_minus) -= h;
        let fd = (loss_of(&m_plus, &x, &t) - loss_of(&m_minus, &x, &t)) / (2.0 * h);
        let denom = analytic.abs().max(fd.abs()).max(1e-4);
        worst_rel = worst_rel.max((fd - analytic).abs() / denom);
    };

    for l in 0..model.layers.len() {
        let (rows, cols) = model.layers[l].w.dim();
        for i in 0..rows {
            for j in 0..cols {
                check_tensor(&mut |m| &mut m.layers[l].w[[i, j]], grads.dw[l][[i, j]]);
            }
        }
        for j in 0..model.layers[l].b.len() {
            check_tensor(&mut |m| &mut m.layers[l].b[j], grads.db[l][j]);
        }
        if model.layers[l].bn.is_some() {
            let width = model.layers[l].bn.as_ref().unwrap().gamma.len();
            for j in 0..width {
                check_tensor(
                    &mut |m| &mut m.layers[l].bn.as_mut().unwrap().gamma[j],
                    grads.dgamma[l].as_ref().unwrap()[j],
                );
                check_tensor(
                    &mut |m| &mut m.layers[l].bn.as_mut().unwrap().beta[j],
                    grads.dbeta[l].as_ref().unwrap()[j],
                );
            }
        }
    }
    worst_rel
}

#[test]
fn gradients_match_finite_differences() {
    for seed in [11, 22, 33] {
        let worst = gradient_check(seed);
        assert!(worst < 1e-3, "seed {seed}: worst relative error {worst}");
    }
}

#[test]
fn zero_loss_has_vanishing_final_layer_gradient() {
    // Construct targets equal to the model's own predictions: cosine loss is
    // stationary there.
    let model = MlpModel::with_dims(&[5, 8, 3], 5).unwrap();
    let x = random_batch(4, 5, 77);
    let (pred, _) = model.forward_cached(&x.view(), None);
    let (loss, grads) = model
        .loss_and_gradients(&x.view(), &pred.view(), None)
        .unwrap();
    assert!(loss.abs() < 1e-12);
    let last = grads.dw.last().unwrap();
    assert!(last.iter().all(|g| g.abs() < 1e-9));
}

#[test]
fn gradients_deterministic_given_seed() {
    let model = MlpModel::standard(6);
    let x = random_batch(16, 5, 8);
    let t = random_unit_targets(16, 9);
    let mut rng1 = ChaCha8Rng::seed_from_u64(42);
    let masks1 = model.make_dropout_masks(16, &mut rng1);
    let mut rng2 = ChaCha8Rng::seed_from_u64(42);
    let masks2 = model.make_dropout_masks(16, &mut rng2);
    let (l1, g1) = model
        .loss_and_gradients(&x.view(), &t.view(), Some(&masks1))
        .unwrap();
    let (l2, g2) = model
        .loss_and_gradients(&x.view(), &t.view(), Some(&masks2))
        .unwrap();
    assert_eq!(l1, l2);
    for (a, b) in g1.dw.iter().zip(g2.dw.iter()) {
        assert_eq!(a, b);
    }
}

fn synthetic_dataset(n_presses: u32, per_press: usize, seed: u64) -> Vec<crate::pipeline::PressSamples> {
    // A smooth, invertible-enough mapping from (u, v, r, g, b) to normals.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_presses)
        .map(|press| {
            let samples = (0..per_press)
                .map(|_| {
                    let u: f64 = rng.random_range(-1.0..1.0);
                    let v: f64 = rng.random_range(-1.0..1.0);
                    let nx = 0.6 * (std::f64::consts::PI * u).sin() * 0.5;
                    let ny = 0.6 * (std::f64::consts::PI * v).sin() * 0.5;
                    let nz = (1.0 - nx * nx - ny * ny).sqrt();
                    let r = 0.5 + 0.4 * nx + 0.05 * nz;
                    let g = 0.5 + 0.4 * ny + 0.05 * nz;
                    let b = 0.3 + 0.5 * nz;
                    CalibSample {
                        u: u as f32,
                        v: v as f32,
                        r: r as f32,
                        g: g as f32,
                        b: b as f32,
                        nx: nx as f32,
                        ny: ny as f32,
                        nz: nz as f32,
                    }
                })
                .collect();
            crate::pipeline::PressSamples {
                capture_id: format!("synth_{press:03}"),
                press_id: press,
                samples,
            }
        })
        .collect()
}

#[test]
fn epochs_zero_returns_initialized_model() {
    let presses = synthetic_dataset(4, 32, 1);
    let (train_ds, val_ds) = crate::pipeline::merge_datasets(presses, (0.75, 0.25), 0).unwrap();
    let cfg = TrainConfig {
        epochs: 0,
        ..Default::default()
    };
    let outcome = train(&train_ds, &val_ds, &cfg).unwrap();
    assert!(outcome.history.is_empty());
    assert_eq!(outcome.model.mode(), Mode::Eval);
    let mut fresh = MlpModel::standard(cfg.rng_seed);
    fresh.set_mode(Mode::Eval);
    assert_eq!(outcome.model, fresh);
}

#[test]
fn training_reduces_loss_and_is_deterministic() {
    let presses = synthetic_dataset(8, 128, 3);
    let (train_ds, val_ds) = crate::pipeline::merge_datasets(presses, (0.75, 0.25), 1).unwrap();
    let cfg = TrainConfig {
        epochs: 8,
        batch_size: 64,
        rng_seed: 5,
        ..Default::default()
    };
    let a = train(&train_ds, &val_ds, &cfg).unwrap();
    let b = train(&train_ds, &val_ds, &cfg).unwrap();
    let la: Vec<f64> = a.history.iter().map(|e| e.train_loss).collect();
    let lb: Vec<f64> = b.history.iter().map(|e| e.train_loss).collect();
    assert_eq!(la, lb);
    assert!(la.last().unwrap() < &la[0], "loss did not decrease: {la:?}");
}

#[test]
fn infer_image_empty_and_single_pixel() {
    let mut model = MlpModel::standard(0);
    model.set_mode(Mode::Eval);
    let img = Array3::from_elem((8, 8, 3), 0.5);
    let empty = ndarray::Array2::from_elem((8, 8), false);
    assert!(matches!(
        infer_image(&model, &img, &empty),
        Ok(nm) if nm.valid.iter().all(|&m| !m)
    ));

    let mut one = ndarray::Array2::from_elem((8, 8), false);
    one[[3, 4]] = true;
    let nm = infer_image(&model, &img, &one).unwrap();
    assert!(nm.valid[[3, 4]]);
    assert_eq!(nm.valid.iter().filter(|&&m| m).count(), 1);
}

#[test]
fn infer_image_matches_per_pixel_forward() {
    let mut model = MlpModel::standard(12);
    model.set_mode(Mode::Eval);
    let (h, w) = (6, 7);
    let img = Array3::from_shape_fn((h, w, 3), |(r, c, k)| {
        0.1 + 0.02 * r as f64 + 0.03 * c as f64 + 0.05 * k as f64
    });
    let mask = ndarray::Array2::from_elem((h, w), true);
    let nm = infer_image(&model, &img, &mask).unwrap();
    for r in 0..h {
        for c in 0..w {
            let (u, v) = crate::pipeline::normalized_pixel_coords(c, r, w, h);
            let mut row = Array2::zeros((1, 5));
            row[[0, 0]] = u;
            row[[0, 1]] = v;
            for k in 0..3 {
                row[[0, 2 + k]] = img[[r, c, k]];
            }
            let single = model.infer(&row.view()).unwrap();
            for k in 0..3 {
                assert_eq!(nm.n[[r, c, k]], single[[0, k]]);
            }
        }
    }
}

#[test]
fn save_load_round_trip_bitwise() {
    use crate::io::{load_model, save_model};
    let dir = tempfile::tempdir().unwrap();

    // Train a few steps so running stats and weights are non-trivial.
    let presses = synthetic_dataset(4, 64, 7);
    let (train_ds, val_ds) = crate::pipeline::merge_datasets(presses, (0.75, 0.25), 2).unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 32,
        ..Default::default()
    };
    let outcome = train(&train_ds, &val_ds, &cfg).unwrap();
    let model = outcome.model;

    let p = dir.path().join("model.bin");
    save_model(&p, &model).unwrap();
    let loaded = load_model(&p).unwrap();
    assert_eq!(model, loaded);

    // Same file bytes when saved again.
    let p2 = dir.path().join("model2.bin");
    save_model(&p2, &loaded).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());

    // Identical inference before and after the disk trip.
    let batch = random_batch(32, 5, 4);
    let a = model.infer(&batch.view()).unwrap();
    let b = loaded.infer(&batch.view()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn load_rejects_bad_magic_and_dims() {
    use crate::io::{load_model, save_model};
    let dir = tempfile::tempdir().unwrap();
    let mut model = MlpModel::with_dims(&[5, 4, 3], 0).unwrap();
    model.set_mode(Mode::Eval);
    let p = dir.path().join("model.bin");
    save_model(&p, &model).unwrap();

    let mut bytes = std::fs::read(&p).unwrap();
    bytes[0] = b'Z';
    std::fs::write(&p, &bytes).unwrap();
    assert!(matches!(load_model(&p), Err(crate::CoreError::Format { .. })));

    // Truncated payload.
    save_model(&p, &model).unwrap();
    let bytes = std::fs::read(&p).unwrap();
    std::fs::write(&p, &bytes[..bytes.len() - 2]).unwrap();
    assert!(matches!(load_model(&p), Err(crate::CoreError::Format { .. })));
}

#[test]
fn eval_throughput_information() {
    let mut model = MlpModel::standard(0);
    model.set_mode(Mode::Eval);
    let batch = random_batch(32768, 5, 1);
    let start = std::time::Instant::now();
    let _ = model.infer(&batch.view()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pps = 32768.0 / elapsed;
    println!("eval throughput: {pps:.0} pixels/s single batch");
}
