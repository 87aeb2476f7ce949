//! From raw captures to training data: dark subtraction, contact masking,
//! sample extraction, and press-level train/validation splits.

use std::path::Path;

use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scene::{CaptureSet, NormalMap};
use crate::{CoreError, Result};

/// One training record: normalized pixel coordinates and trichrome
/// intensities paired with the solver-recovered unit normal.
///
/// Values are `f32` to match the dataset file format exactly, so samples
/// round-trip through disk losslessly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibSample {
    pub u: f32,
    pub v: f32,
    pub r: f32,
    pub g: f32,
    pub b: f32,
    pub nx: f32,
    pub ny: f32,
    pub nz: f32,
}

/// The samples contributed by one press of one capture.
#[derive(Debug, Clone)]
pub struct PressSamples {
    pub capture_id: String,
    pub press_id: u32,
    pub samples: Vec<CalibSample>,
}

/// Contiguous block of samples from a single (capture, press) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceGroup {
    pub capture_id: String,
    pub press_id: u32,
    pub offset: usize,
    pub len: usize,
}

/// Ordered sample collection with per-press provenance.
///
/// Groups are stored in ascending `press_id` order and never overlap, so the
/// layout (and any file written from it) is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibDataset {
    pub samples: Vec<CalibSample>,
    pub groups: Vec<ProvenanceGroup>,
    pub split_seed: u64,
}

impl CalibDataset {
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Histogram of normal directions over (azimuth × zenith) bins; a
    /// coverage diagnostic for judging whether presses excite enough of the
    /// sensor's normal range.
    pub fn normal_coverage(&self, azimuth_bins: usize, zenith_bins: usize) -> Array2<u64> {
        let mut hist = Array2::zeros((zenith_bins, azimuth_bins));
        for s in &self.samples {
            let az = (s.ny as f64).atan2(s.nx as f64); // [-pi, pi]
            let zen = (s.nz as f64).clamp(-1.0, 1.0).acos(); // [0, pi]
            let ai = (((az + std::f64::consts::PI) / std::f64::consts::TAU)
                * azimuth_bins as f64)
                .floor()
                .min(azimuth_bins as f64 - 1.0) as usize;
            let zi = ((zen / std::f64::consts::PI) * zenith_bins as f64)
                .floor()
                .min(zenith_bins as f64 - 1.0) as usize;
            hist[[zi, ai]] += 1;
        }
        hist
    }
}

/// Normalized pixel-center coordinates in `(−1, 1)`.
///
/// Column `c` of a width-`w` image maps to `2(c + ½)/w − 1`; shared by
/// dataset building and image inference so the two can never disagree.
#[inline]
pub fn normalized_pixel_coords(c: usize, r: usize, w: usize, h: usize) -> (f64, f64) {
    (
        2.0 * (c as f64 + 0.5) / w as f64 - 1.0,
        2.0 * (r as f64 + 0.5) / h as f64 - 1.0,
    )
}

/// Load and validate a capture directory (see [`crate::io::load_capture_dir`]).
pub fn load_capture(dir: &Path) -> Result<CaptureSet> {
    crate::io::load_capture_dir(dir)
}

/// Dark-subtract every image: `clamp(image − dark, 0, 1)` per pixel and
/// channel, replacing the dark frame with zeros. Idempotent once applied.
pub fn preprocess(capture: &CaptureSet) -> CaptureSet {
    let sub = |img: &Array3<f64>| -> Array3<f64> {
        let mut out = img.clone();
        out.zip_mut_with(&capture.dark_image, |v, &d| *v = (*v - d).clamp(0.0, 1.0));
        out
    };
    CaptureSet {
        single_light_images: capture.single_light_images.iter().map(sub).collect(),
        trichrome_image: sub(&capture.trichrome_image),
        dark_image: Array3::zeros(capture.dark_image.dim()),
        lights: capture.lights.clone(),
        camera: capture.camera.clone(),
    }
}

fn max_channel_abs_diff(a: &Array3<f64>, b: &Array3<f64>, r: usize, c: usize) -> f64 {
    (0..3)
        .map(|ch| (a[[r, c, ch]] - b[[r, c, ch]]).abs())
        .fold(0.0, f64::max)
}

fn remove_small_components(mask: &mut Array2<bool>, min_blob: usize) {
    let (h, w) = mask.dim();
    let mut seen = Array2::from_elem((h, w), false);
    let mut stack = Vec::new();
    let mut component = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !mask[[r, c]] || seen[[r, c]] {
                continue;
            }
            component.clear();
            stack.push((r, c));
            seen[[r, c]] = true;
            while let Some((rr, cc)) = stack.pop() {
                component.push((rr, cc));
                let neighbors = [
                    (rr.wrapping_sub(1), cc),
                    (rr + 1, cc),
                    (rr, cc.wrapping_sub(1)),
                    (rr, cc + 1),
                ];
                for (nr, nc) in neighbors {
                    if nr < h && nc < w && mask[[nr, nc]] && !seen[[nr, nc]] {
                        seen[[nr, nc]] = true;
                        stack.push((nr, nc));
                    }
                }
            }
            if component.len() < min_blob {
                for &(rr, cc) in &component {
                    mask[[rr, cc]] = false;
                }
            }
        }
    }
}

fn morph_3x3(mask: &Array2<bool>, dilate: bool) -> Array2<bool> {
    let (h, w) = mask.dim();
    Array2::from_shape_fn((h, w), |(r, c)| {
        let mut any = false;
        let mut all = true;
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                let v = if nr >= 0 && nc >= 0 && (nr as usize) < h && (nc as usize) < w {
                    mask[[nr as usize, nc as usize]]
                } else {
                    false
                };
                any |= v;
                all &= v;
            }
        }
        if dilate {
            any
        } else {
            all
        }
    })
}

/// Pixels whose appearance changed under contact.
///
/// Recipe: per-pixel max-channel `|pressed − reference| > tau`, then removal
/// of 4-connected components smaller than `min_blob`, then one pass of 3×3
/// morphological closing. Inputs must be dark-subtracted and equally sized.
pub fn contact_mask(
    reference_trichrome: &Array3<f64>,
    pressed_trichrome: &Array3<f64>,
    tau: f64,
    min_blob: usize,
) -> Result<Array2<bool>> {
    if reference_trichrome.dim() != pressed_trichrome.dim() {
        return Err(CoreError::shape(
            "contact_mask",
            format!("{:?}", reference_trichrome.dim()),
            format!("{:?}", pressed_trichrome.dim()),
        ));
    }
    let (h, w, _) = reference_trichrome.dim();
    let mut mask = Array2::from_shape_fn((h, w), |(r, c)| {
        max_channel_abs_diff(pressed_trichrome, reference_trichrome, r, c) > tau
    });
    remove_small_components(&mut mask, min_blob);
    let closed = morph_3x3(&morph_3x3(&mask, true), false);
    Ok(closed)
}

/// Extract one sample per masked pixel of a preprocessed capture.
///
/// Normals must come from a solve of the same capture, so intensity and
/// geometry are paired at identical pixels with no resampling. Pixels outside
/// the solver's valid mask are skipped. An empty mask yields an empty vector.
pub fn build_samples(
    capture: &CaptureSet,
    normals: &NormalMap,
    mask: &Array2<bool>,
) -> Result<Vec<CalibSample>> {
    let (h, w) = capture.shape();
    if normals.shape() != (h, w) || mask.dim() != (h, w) {
        return Err(CoreError::shape(
            "build_samples",
            format!("{:?}", (h, w)),
            format!("normals {:?}, mask {:?}", normals.shape(), mask.dim()),
        ));
    }
    let mut samples = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !mask[[r, c]] || !normals.valid[[r, c]] {
                continue;
            }
            let (u, v) = normalized_pixel_coords(c, r, w, h);
            let n = normals.at(r, c);
            samples.push(CalibSample {
                u: u as f32,
                v: v as f32,
                r: capture.trichrome_image[[r, c, 0]] as f32,
                g: capture.trichrome_image[[r, c, 1]] as f32,
                b: capture.trichrome_image[[r, c, 2]] as f32,
                nx: n[0] as f32,
                ny: n[1] as f32,
                nz: n[2] as f32,
            });
        }
    }
    Ok(samples)
}

fn assemble(presses: Vec<PressSamples>, split_seed: u64) -> CalibDataset {
    let mut presses = presses;
    presses.sort_by_key(|p| p.press_id);
    let mut samples = Vec::new();
    let mut groups = Vec::new();
    for p in presses {
        groups.push(ProvenanceGroup {
            capture_id: p.capture_id,
            press_id: p.press_id,
            offset: samples.len(),
            len: p.samples.len(),
        });
        samples.extend(p.samples);
    }
    CalibDataset {
        samples,
        groups,
        split_seed,
    }
}

/// Split presses into train and validation datasets.
///
/// The split is by press, not by pixel, so validation presses are entirely
/// unseen. The press order is shuffled deterministically by `seed`; the first
/// `round(n · train_fraction)` presses train, the rest validate.
pub fn merge_datasets(
    presses: Vec<PressSamples>,
    fractions: (f64, f64),
    seed: u64,
) -> Result<(CalibDataset, CalibDataset)> {
    let (train_frac, val_frac) = fractions;
    if (train_frac + val_frac - 1.0).abs() > 1e-9 || train_frac < 0.0 || val_frac < 0.0 {
        return Err(CoreError::InvalidParameter(format!(
            "split fractions must be non-negative and sum to 1, got ({train_frac}, {val_frac})"
        )));
    }
    let mut ids: Vec<u32> = presses.iter().map(|p| p.press_id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != presses.len() {
        return Err(CoreError::InvalidParameter(
            "duplicate press ids in merge_datasets".into(),
        ));
    }
    let n = presses.len();
    let n_train = (n as f64 * train_frac).round() as usize;
    let n_val = n - n_train;
    if (train_frac > 0.0 && n_train == 0) || (val_frac > 0.0 && n_val == 0) {
        return Err(CoreError::InsufficientPresses(format!(
            "{n} presses cannot satisfy a ({train_frac}, {val_frac}) split"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut presses = presses.into_iter().map(Some).collect::<Vec<_>>();
    for (k, &idx) in order.iter().enumerate() {
        let press = presses[idx].take().expect("each press taken once");
        if k < n_train {
            train.push(press);
        } else {
            val.push(press);
        }
    }
    Ok((assemble(train, seed), assemble(val, seed)))
}

/// Integer-factor box-filter downsampling of a capture.
///
/// Each output pixel is the mean of an `f×f` input block; images must be
/// divisible by `f`. The camera model is rescaled so block centers keep
/// their metric positions (pitch × f, principal point remapped).
pub fn downsample_capture(capture: &CaptureSet, factor: usize) -> Result<CaptureSet> {
    if factor == 0 {
        return Err(CoreError::InvalidParameter("downsample factor 0".into()));
    }
    if factor == 1 {
        return Ok(capture.clone());
    }
    let (h, w) = capture.shape();
    if h % factor != 0 || w % factor != 0 {
        return Err(CoreError::InvalidParameter(format!(
            "image {h}x{w} not divisible by downsample factor {factor}"
        )));
    }
    let (nh, nw) = (h / factor, w / factor);
    let box_avg = |img: &Array3<f64>| -> Array3<f64> {
        let mut out = Array3::zeros((nh, nw, 3));
        let norm = (factor * factor) as f64;
        for r in 0..nh {
            for c in 0..nw {
                for ch in 0..3 {
                    let mut acc = 0.0;
                    for dr in 0..factor {
                        for dc in 0..factor {
                            acc += img[[r * factor + dr, c * factor + dc, ch]];
                        }
                    }
                    out[[r, c, ch]] = acc / norm;
                }
            }
        }
        out
    };

    let f = factor as f64;
    let mut camera = capture.camera.clone();
    camera.image_width = nw;
    camera.image_height = nh;
    camera.pixel_pitch_u *= f;
    camera.pixel_pitch_v *= f;
    // Output pixel k has its block center at input coordinate k·f + (f−1)/2.
    camera.principal_point = (
        (capture.camera.principal_point.0 - (f - 1.0) / 2.0) / f,
        (capture.camera.principal_point.1 - (f - 1.0) / 2.0) / f,
    );
    camera.validate()?;

    Ok(CaptureSet {
        single_light_images: capture.single_light_images.iter().map(box_avg).collect(),
        dark_image: box_avg(&capture.dark_image),
        trichrome_image: box_avg(&capture.trichrome_image),
        lights: capture.lights.clone(),
        camera,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::{render_capture_set, ring_lights, RenderOptions};
    use crate::scene::{make_synthetic_surface, CameraModel, SurfaceSpec};

    fn cam(n: usize, pitch: f64) -> CameraModel {
        CameraModel {
            image_width: n,
            image_height: n,
            pixel_pitch_u: pitch,
            pixel_pitch_v: pitch,
            principal_point: ((n as f64 - 1.0) / 2.0, (n as f64 - 1.0) / 2.0),
            nominal_distance: 20.0,
        }
    }

    fn sample_capture(n: usize, dark_level: f64, sigma: f64) -> CaptureSet {
        let c = cam(n, 0.1);
        let surface = make_synthetic_surface(&SurfaceSpec::flat(20.0), &c).unwrap();
        let lights = ring_lights(3, 8.0, 32.0, 20.0, 1.0, [150.0; 3]);
        let opts = RenderOptions {
            dark_level,
            noise_sigma: sigma,
            rng_seed: 11,
            ..Default::default()
        };
        render_capture_set(&surface, &lights, &c, &opts).unwrap()
    }

    #[test]
    fn preprocess_zero_dark_is_identity() {
        let capture = sample_capture(12, 0.0, 0.0);
        let pre = preprocess(&capture);
        assert_eq!(capture.single_light_images, pre.single_light_images);
        assert_eq!(capture.trichrome_image, pre.trichrome_image);
    }

    #[test]
    fn preprocess_image_equal_dark_gives_zero() {
        let mut capture = sample_capture(8, 0.05, 0.0);
        capture.single_light_images[0] = capture.dark_image.clone();
        let pre = preprocess(&capture);
        assert!(pre.single_light_images[0].iter().all(|&v| v == 0.0));
        assert!(pre.dark_image.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn preprocess_removes_dark_level() {
        let with_dark = preprocess(&sample_capture(12, 0.05, 0.0));
        let without = sample_capture(12, 0.0, 0.0);
        for (a, b) in with_dark.single_light_images[1]
            .iter()
            .zip(without.single_light_images[1].iter())
        {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn preprocess_is_idempotent() {
        let capture = sample_capture(10, 0.04, 0.0);
        let once = preprocess(&capture);
        let twice = preprocess(&once);
        assert_eq!(once.single_light_images, twice.single_light_images);
        assert_eq!(once.trichrome_image, twice.trichrome_image);
    }

    #[test]
    fn contact_mask_identical_images_empty() {
        let img = Array3::from_elem((16, 16, 3), 0.4);
        let mask = contact_mask(&img, &img, 0.03, 16).unwrap();
        assert!(mask.iter().all(|&m| !m));
    }

    #[test]
    fn contact_mask_finds_square() {
        let reference = Array3::from_elem((40, 40, 3), 0.3);
        let mut pressed = reference.clone();
        let tau = 0.03;
        for r in 10..30 {
            for c in 10..30 {
                pressed[[r, c, 1]] += 2.0 * tau;
            }
        }
        let mask = contact_mask(&reference, &pressed, tau, 16).unwrap();
        // Square recovered within a 1-pixel boundary from closing.
        for r in 0..40 {
            for c in 0..40 {
                let inside = (11..29).contains(&r) && (11..29).contains(&c);
                let outside = !(9..31).contains(&r) || !(9..31).contains(&c);
                if inside {
                    assert!(mask[[r, c]], "pixel ({r},{c}) should be masked");
                }
                if outside {
                    assert!(!mask[[r, c]], "pixel ({r},{c}) should be clear");
                }
            }
        }
    }

    #[test]
    fn contact_mask_blob_filter() {
        let reference = Array3::from_elem((16, 16, 3), 0.3);
        let mut pressed = reference.clone();
        pressed[[8, 8, 0]] += 0.5;
        let mask = contact_mask(&reference, &pressed, 0.03, 5).unwrap();
        assert!(mask.iter().all(|&m| !m));
    }

    #[test]
    fn build_samples_cardinality_and_center() {
        let capture = preprocess(&sample_capture(16, 0.0, 0.0));
        let normals =
            crate::scene::normals_from_depth(
                &crate::scene::make_synthetic_surface(&SurfaceSpec::flat(20.0), &capture.camera)
                    .unwrap()
                    .depth,
                &capture.camera,
            )
            .unwrap();
        let mut mask = Array2::from_elem((16, 16), false);
        let mut count = 0;
        for r in 4..14 {
            for c in 4..14 {
                mask[[r, c]] = true;
                count += 1;
            }
        }
        let samples = build_samples(&capture, &normals, &mask).unwrap();
        assert_eq!(samples.len(), count);

        // Center pixel of an even-sized image sits just off (0, 0).
        let mut center_mask = Array2::from_elem((16, 16), false);
        center_mask[[8, 8]] = true;
        let s = build_samples(&capture, &normals, &center_mask).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s[0].u.abs() <= 1.0 / 16.0 + 1e-6);
        assert!(s[0].v.abs() <= 1.0 / 16.0 + 1e-6);
    }

    #[test]
    fn merge_datasets_is_a_partition() {
        let presses: Vec<PressSamples> = (0..50)
            .map(|i| PressSamples {
                capture_id: format!("press_{i:03}"),
                press_id: i,
                samples: vec![CalibSample {
                    u: 0.0,
                    v: 0.0,
                    r: 0.1,
                    g: 0.2,
                    b: 0.3,
                    nx: 0.0,
                    ny: 0.0,
                    nz: 1.0,
                }],
            })
            .collect();
        let (train, val) = merge_datasets(presses.clone(), (0.8, 0.2), 7).unwrap();
        assert_eq!(train.groups.len(), 40);
        assert_eq!(val.groups.len(), 10);
        let mut all: Vec<u32> = train
            .groups
            .iter()
            .chain(val.groups.iter())
            .map(|g| g.press_id)
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());

        // Deterministic given the seed.
        let (train2, val2) = merge_datasets(presses, (0.8, 0.2), 7).unwrap();
        assert_eq!(train, train2);
        assert_eq!(val, val2);
    }

    #[test]
    fn merge_datasets_insufficient_presses() {
        let presses = vec![PressSamples {
            capture_id: "only".into(),
            press_id: 0,
            samples: vec![],
        }];
        assert!(matches!(
            merge_datasets(presses, (0.8, 0.2), 0),
            Err(CoreError::InsufficientPresses(_))
        ));
    }

    #[test]
    fn downsample_preserves_metric_positions() {
        let capture = sample_capture(16, 0.0, 0.0);
        let down = downsample_capture(&capture, 2).unwrap();
        assert_eq!(down.shape(), (8, 8));
        // Block center of output pixel 0 is input coordinate 0.5; metric
        // positions must match.
        let (u_new, _) = down.camera.pixel_to_metric(0.0, 0.0);
        let (u_old, _) = capture.camera.pixel_to_metric(0.5, 0.5);
        assert!((u_new - u_old).abs() < 1e-12);
        // Mean preservation.
        let m_in: f64 =
            capture.trichrome_image.iter().sum::<f64>() / capture.trichrome_image.len() as f64;
        let m_out: f64 =
            down.trichrome_image.iter().sum::<f64>() / down.trichrome_image.len() as f64;
        assert!((m_in - m_out).abs() < 1e-12);
    }
}
