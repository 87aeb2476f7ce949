//! Serialization round trips for capture directories.

mod common;

use common::{render_standard, sphere_indent_dome};
use nlps_core::io::{load_capture_dir, save_capture_dir, ImageFormat};
use nlps_core::render::RenderOptions;
use nlps_core::CoreError;

#[test]
fn png16_round_trip_is_bit_identical() {
    // Renders quantized to 16 bits live exactly on the PNG grid, so the
    // full directory round trip reproduces every image bit-for-bit.
    let opts = RenderOptions {
        noise_sigma: 0.003,
        dark_level: 0.02,
        quantization_bits: Some(16),
        rng_seed: 5,
        ..Default::default()
    };
    let (_, capture) = render_standard(24, &sphere_indent_dome(), 12, &opts);
    let dir = tempfile::tempdir().unwrap();
    save_capture_dir(&capture, dir.path(), ImageFormat::Png16).unwrap();
    let loaded = load_capture_dir(dir.path()).unwrap();

    assert_eq!(capture.lights.len(), loaded.lights.len());
    assert_eq!(capture.camera, loaded.camera);
    for (a, b) in capture
        .single_light_images
        .iter()
        .zip(loaded.single_light_images.iter())
    {
        assert_eq!(a, b);
    }
    assert_eq!(capture.dark_image, loaded.dark_image);
    assert_eq!(capture.trichrome_image, loaded.trichrome_image);
}

#[test]
fn pfm_round_trip_within_f32() {
    let (_, capture) = render_standard(16, &sphere_indent_dome(), 3, &RenderOptions::default());
    let dir = tempfile::tempdir().unwrap();
    save_capture_dir(&capture, dir.path(), ImageFormat::Pfm).unwrap();
    let loaded = load_capture_dir(dir.path()).unwrap();
    for (a, b) in capture
        .single_light_images
        .iter()
        .zip(loaded.single_light_images.iter())
    {
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(*x as f32, *y as f32);
        }
    }
}

#[test]
fn missing_dark_image_names_the_file() {
    let (_, capture) = render_standard(8, &sphere_indent_dome(), 3, &RenderOptions::default());
    let dir = tempfile::tempdir().unwrap();
    save_capture_dir(&capture, dir.path(), ImageFormat::Png16).unwrap();
    std::fs::remove_file(dir.path().join("dark.png")).unwrap();
    match load_capture_dir(dir.path()) {
        Err(CoreError::MissingFile(p)) => {
            assert!(p.to_string_lossy().contains("dark"), "error names {p:?}");
        }
        other => panic!("expected MissingFile, got {other:?}"),
    }
}

#[test]
fn twelve_light_directory_has_expected_layout() {
    let (_, capture) = render_standard(8, &sphere_indent_dome(), 12, &RenderOptions::default());
    let dir = tempfile::tempdir().unwrap();
    save_capture_dir(&capture, dir.path(), ImageFormat::Png16).unwrap();
    for i in 0..12 {
        assert!(dir.path().join(format!("light_{i:02}.png")).exists());
    }
    assert!(dir.path().join("dark.png").exists());
    assert!(dir.path().join("trichrome.png").exists());
    assert!(dir.path().join("scene.json").exists());
    let loaded = load_capture_dir(dir.path()).unwrap();
    assert_eq!(loaded.num_lights(), 12);
}

#[test]
fn dimension_mismatch_is_detected() {
    let (_, capture) = render_standard(8, &sphere_indent_dome(), 3, &RenderOptions::default());
    let dir = tempfile::tempdir().unwrap();
    save_capture_dir(&capture, dir.path(), ImageFormat::Png16).unwrap();
    // Overwrite one image with the wrong size.
    let small = ndarray::Array3::zeros((4, 4, 3));
    nlps_core::io::write_png16(&dir.path().join("light_01.png"), &small).unwrap();
    assert!(matches!(
        load_capture_dir(dir.path()),
        Err(CoreError::ShapeMismatch { .. })
    ));
}
