//! Forward image formation for near-field anisotropic point lights.
//!
//! The per-pixel model is
//!
//! ```text
//! I = Ψ_c · ρ_c · [max(n_s·(x−x_s)/‖x−x_s‖, 0)]^μ · max((x_s−x)·n, 0) / ‖x_s−x‖³
//! ```
//!
//! the product of calibrated source intensity, surface albedo, the LED's
//! emission lobe around its principal direction, and Lambertian shading with
//! inverse-square falloff. The `max(·, 0)` clamps encode the one-sided
//! emission lobe and self-shadowing.
//!
//! The same evaluation backs both the synthetic data generator and the
//! solver's residuals, so renders of a surface are exactly reproducible by
//! the solver's prediction at the true depth and albedo.

use nalgebra::Vector3;
use ndarray::{Array3, Zip};
use serde::{Deserialize, Serialize};

use crate::scene::{
    normals_from_depth, CameraModel, CaptureSet, ColorGroup, LightSource, NormalMap, SurfaceState,
};
use crate::{CoreError, Result};

/// Sensor-path options for synthetic captures.
///
/// Noise is applied before clamping and quantization after, matching a real
/// camera's signal path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderOptions {
    /// Standard deviation of additive Gaussian noise, intensity units.
    pub noise_sigma: f64,
    /// Constant offset added to every channel (the dark level).
    pub dark_level: f64,
    /// Simulated ADC depth; `Some(b)` rounds to multiples of `1/(2^b − 1)`.
    pub quantization_bits: Option<u8>,
    /// Full-well clip level.
    pub saturation_cap: f64,
    pub rng_seed: u64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            noise_sigma: 0.0,
            dark_level: 0.0,
            quantization_bits: None,
            saturation_cap: 1.0,
            rng_seed: 0,
        }
    }
}

impl RenderOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        if !(self.saturation_cap > 0.0 && self.saturation_cap <= 1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "saturation_cap must be in (0, 1], got {}",
                self.saturation_cap
            )));
        }
        if let Some(bits) = self.quantization_bits {
            if !(1..=16).contains(&bits) {
                return Err(CoreError::InvalidParameter(format!(
                    "quantization_bits must be in 1..=16, got {bits}"
                )));
            }
        }
        if !(self.dark_level >= 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "dark_level must be >= 0, got {}",
                self.dark_level
            )));
        }
        Ok(())
    }
}

/// Noise stream identifiers: one independent stream per output image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum NoiseStream {
    SingleLight(usize),
    Dark,
    Trichrome,
}

impl NoiseStream {
    fn id(self) -> u64 {
        match self {
            NoiseStream::SingleLight(i) => i as u64,
            NoiseStream::Dark => u64::MAX - 1,
            NoiseStream::Trichrome => u64::MAX,
        }
    }
}

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

#[inline]
fn bits_to_unit(x: u64) -> f64 {
    // (0, 1), never exactly 0 or 1.
    ((x >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Counter-based standard normal draw keyed by (seed, stream, pixel, channel).
///
/// Independent of evaluation order, so rendering may parallelize freely while
/// staying bit-reproducible.
#[inline]
pub(crate) fn gaussian_noise(seed: u64, stream: NoiseStream, pixel: usize, channel: usize) -> f64 {
    let key = splitmix64(seed)
        ^ splitmix64(stream.id().wrapping_mul(0xa076_1d64_78bd_642f))
        ^ splitmix64((pixel as u64) << 2 | channel as u64);
    let u1 = bits_to_unit(splitmix64(key));
    let u2 = bits_to_unit(splitmix64(key.wrapping_add(0x632b_e59b_d9b4_e019)));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Evaluate the shading model at one surface point for one light and channel.
///
/// `x` is the metric surface point, `n` the unit camera-facing normal, and
/// `rho_c` the albedo in the requested channel. With `μ = 0` the emission
/// lobe is isotropic (the lobe factor is identically 1).
pub fn shade_pixel(
    x: &Vector3<f64>,
    n: &Vector3<f64>,
    rho_c: f64,
    light: &LightSource,
    channel: usize,
) -> Result<f64> {
    debug_assert!((n.norm() - 1.0).abs() < 1e-6, "normal must be unit length");
    let to_light = light.position - x;
    let d = to_light.norm();
    if d < 1e-9 {
        return Err(CoreError::LightSingularity([x.x, x.y, x.z]));
    }
    let lobe = if light.anisotropy_mu == 0.0 {
        1.0
    } else {
        let cos_emit = light.principal_direction.dot(&(-to_light)) / d;
        if cos_emit <= 0.0 {
            return Ok(0.0);
        }
        cos_emit.powf(light.anisotropy_mu)
    };
    let shading = to_light.dot(n).max(0.0) / (d * d * d);
    Ok(light.intensity_psi[channel] * rho_c * lobe * shading)
}

#[derive(Clone, Copy)]
enum TrichromeMode {
    Off,
    On,
}

fn render_image(
    surface: &SurfaceState,
    normals: &NormalMap,
    lights: &[LightSource],
    camera: &CameraModel,
    opts: &RenderOptions,
    stream: NoiseStream,
    trichrome: TrichromeMode,
) -> Result<Array3<f64>> {
    let (h, w) = camera.shape();
    let mut img = Array3::<f64>::zeros((h, w, 3));

    let quant = opts.quantization_bits.map(|b| ((1u64 << b) - 1) as f64);
    let rows: Vec<usize> = (0..h).collect();

    // Per-row closure keeps the evaluation order irrelevant: noise is
    // counter-based and every pixel is independent.
    let render_row = |r: usize, row_out: &mut [f64]| -> Result<()> {
        for c in 0..w {
            let pixel = r * w + c;
            let px_valid = surface.depth.valid[[r, c]] && normals.valid[[r, c]];
            for ch in 0..3 {
                let out = &mut row_out[c * 3 + ch];
                if !px_valid {
                    *out = 0.0;
                    continue;
                }
                let (u, v) = camera.pixel_to_metric(c as f64, r as f64);
                let x = Vector3::new(u, v, surface.depth.z[[r, c]]);
                let nvec = {
                    let nn = normals.at(r, c);
                    Vector3::new(nn[0], nn[1], nn[2])
                };
                let rho = surface.albedo.rho[[r, c, ch]];
                let mut val = 0.0;
                for light in lights {
                    let contributes = match trichrome {
                        TrichromeMode::Off => true,
                        TrichromeMode::On => light.color_group.channel() == ch,
                    };
                    if contributes {
                        val += shade_pixel(&x, &nvec, rho, light, ch)?;
                    }
                }
                val += opts.dark_level;
                if opts.noise_sigma > 0.0 {
                    val += opts.noise_sigma * gaussian_noise(opts.rng_seed, stream, pixel, ch);
                }
                val = val.clamp(0.0, opts.saturation_cap);
                if let Some(levels) = quant {
                    val = (val * levels).round() / levels;
                }
                *out = val;
            }
        }
        Ok(())
    };

    // Rows are disjoint; process in parallel with deterministic output.
    use rayon::prelude::*;
    let row_results: Vec<Result<Vec<f64>>> = rows
        .par_iter()
        .map(|&r| {
            let mut buf = vec![0.0; w * 3];
            render_row(r, &mut buf)?;
            Ok(buf)
        })
        .collect();
    for (r, res) in row_results.into_iter().enumerate() {
        let buf = res?;
        for c in 0..w {
            for ch in 0..3 {
                img[[r, c, ch]] = buf[c * 3 + ch];
            }
        }
    }
    Ok(img)
}

/// Render one single-light image of a surface.
///
/// Normals are always derived from the surface's own depth map so the render
/// is exactly consistent with the solver's internal prediction.
pub fn render_single_light(
    surface: &SurfaceState,
    light: &LightSource,
    camera: &CameraModel,
    opts: &RenderOptions,
) -> Result<Array3<f64>> {
    render_single_light_indexed(surface, light, 0, camera, opts)
}

/// As [`render_single_light`] with an explicit light index selecting the
/// noise stream (so a capture set's images use independent noise).
pub fn render_single_light_indexed(
    surface: &SurfaceState,
    light: &LightSource,
    light_index: usize,
    camera: &CameraModel,
    opts: &RenderOptions,
) -> Result<Array3<f64>> {
    opts.validate()?;
    light.validate()?;
    if surface.depth.shape() != camera.shape() {
        return Err(CoreError::shape(
            "render_single_light",
            format!("{:?}", camera.shape()),
            format!("{:?}", surface.depth.shape()),
        ));
    }
    let normals = normals_from_depth(&surface.depth, camera)?;
    render_image(
        surface,
        &normals,
        std::slice::from_ref(light),
        camera,
        opts,
        NoiseStream::SingleLight(light_index),
        TrichromeMode::Off,
    )
}

/// Render a full capture set: K single-light images, a dark frame, and the
/// trichromatic image with each light routed into its color-group channel.
pub fn render_capture_set(
    surface: &SurfaceState,
    lights: &[LightSource],
    camera: &CameraModel,
    opts: &RenderOptions,
) -> Result<CaptureSet> {
    opts.validate()?;
    if lights.len() < 3 {
        return Err(CoreError::InsufficientLights {
            required: 3,
            found: lights.len(),
        });
    }
    if surface.depth.shape() != camera.shape() {
        return Err(CoreError::shape(
            "render_capture_set",
            format!("{:?}", camera.shape()),
            format!("{:?}", surface.depth.shape()),
        ));
    }
    for light in lights {
        light.validate()?;
    }
    let normals = normals_from_depth(&surface.depth, camera)?;

    let mut single_light_images = Vec::with_capacity(lights.len());
    for (i, light) in lights.iter().enumerate() {
        single_light_images.push(render_image(
            surface,
            &normals,
            std::slice::from_ref(light),
            camera,
            opts,
            NoiseStream::SingleLight(i),
            TrichromeMode::Off,
        )?);
    }

    // Dark frame: no shading at all, just dark level, noise, clamp, quantize.
    let (h, w) = camera.shape();
    let quant = opts.quantization_bits.map(|b| ((1u64 << b) - 1) as f64);
    let mut dark_image = Array3::<f64>::zeros((h, w, 3));
    Zip::indexed(&mut dark_image).for_each(|(r, c, ch), out| {
        let mut val = opts.dark_level;
        if opts.noise_sigma > 0.0 {
            val += opts.noise_sigma * gaussian_noise(opts.rng_seed, NoiseStream::Dark, r * w + c, ch);
        }
        val = val.clamp(0.0, opts.saturation_cap);
        if let Some(levels) = quant {
            val = (val * levels).round() / levels;
        }
        *out = val;
    });

    let trichrome_image = render_image(
        surface,
        &normals,
        lights,
        camera,
        opts,
        NoiseStream::Trichrome,
        TrichromeMode::On,
    )?;

    let capture = CaptureSet {
        single_light_images,
        dark_image,
        trichrome_image,
        lights: lights.to_vec(),
        camera: camera.clone(),
    };
    capture.validate()?;
    Ok(capture)
}

/// A 12-LED ring matching the reference sensor layout: evenly spaced lights
/// in thirds (first third red, then green, then blue), aimed at a target
/// point on the camera axis.
pub fn ring_lights(
    count: usize,
    ring_radius: f64,
    ring_z: f64,
    target_z: f64,
    anisotropy_mu: f64,
    intensity_psi: [f64; 3],
) -> Vec<LightSource> {
    let groups = [ColorGroup::R, ColorGroup::G, ColorGroup::B];
    (0..count)
        .map(|i| {
            let angle = std::f64::consts::TAU * i as f64 / count as f64;
            let position = Vector3::new(ring_radius * angle.cos(), ring_radius * angle.sin(), ring_z);
            let principal_direction = (Vector3::new(0.0, 0.0, target_z) - position).normalize();
            let group = groups[(i * 3) / count.max(1)];
            LightSource {
                position,
                principal_direction,
                anisotropy_mu,
                intensity_psi,
                color_group: group,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::SurfaceSpec;
    use approx::assert_relative_eq;

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

    fn test_light(pos: [f64; 3], mu: f64) -> LightSource {
        LightSource {
            position: Vector3::new(pos[0], pos[1], pos[2]),
            principal_direction: Vector3::new(0.0, 0.0, -1.0),
            anisotropy_mu: mu,
            intensity_psi: [1.0, 1.0, 1.0],
            color_group: ColorGroup::R,
        }
    }

    /// Independent re-statement of the shading formula, written directly from
    /// the model definition without shared helpers.
    fn shade_reference(
        x: [f64; 3],
        n: [f64; 3],
        rho: f64,
        psi: f64,
        xs: [f64; 3],
        ns: [f64; 3],
        mu: f64,
    ) -> f64 {
        let diff = [x[0] - xs[0], x[1] - xs[1], x[2] - xs[2]];
        let dist = (diff[0] * diff[0] + diff[1] * diff[1] + diff[2] * diff[2]).sqrt();
        let cos_emit = (ns[0] * diff[0] + ns[1] * diff[1] + ns[2] * diff[2]) / dist;
        let lobe = if mu == 0.0 {
            1.0
        } else {
            cos_emit.max(0.0).powf(mu)
        };
        let toward = [-diff[0], -diff[1], -diff[2]];
        let shade = (toward[0] * n[0] + toward[1] * n[1] + toward[2] * n[2]).max(0.0);
        psi * rho * lobe * shade / (dist * dist * dist)
    }

    #[test]
    fn grazing_normal_gives_zero() {
        // n perpendicular to the light direction: shadow clamp at exactly 0.
        let light = test_light([0.0, 0.0, 30.0], 0.0);
        let x = Vector3::new(0.0, 0.0, 20.0);
        let n = Vector3::new(1.0, 0.0, 0.0);
        assert_eq!(shade_pixel(&x, &n, 1.0, &light, 0).unwrap(), 0.0);
    }

    #[test]
    fn inverse_square_law() {
        // Frontal geometry, isotropic light: doubling distance quarters I.
        let light = test_light([0.0, 0.0, 50.0], 0.0);
        let n = Vector3::new(0.0, 0.0, 1.0);
        let i1 = shade_pixel(&Vector3::new(0.0, 0.0, 40.0), &n, 1.0, &light, 0).unwrap();
        let i2 = shade_pixel(&Vector3::new(0.0, 0.0, 30.0), &n, 1.0, &light, 0).unwrap();
        assert_relative_eq!(i1 / i2, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn inverse_square_product_constant_over_distance() {
        let light = test_light([0.0, 0.0, 100.0], 0.0);
        let n = Vector3::new(0.0, 0.0, 1.0);
        let reference = {
            let d: f64 = 10.0;
            shade_pixel(&Vector3::new(0.0, 0.0, 100.0 - d), &n, 1.0, &light, 0).unwrap() * d * d
        };
        for k in 1..40 {
            let d = 5.0 + 2.0 * k as f64;
            let i = shade_pixel(&Vector3::new(0.0, 0.0, 100.0 - d), &n, 1.0, &light, 0).unwrap();
            assert_relative_eq!(i * d * d, reference, max_relative = 1e-12);
        }
    }

    #[test]
    fn agrees_with_independent_implementation_on_random_configs() {
        // 100 random configurations vs the independently coded formula.
        let mut state = 0x1234_5678_u64;
        let mut next = move || {
            state = splitmix64(state);
            bits_to_unit(state)
        };
        for _ in 0..100 {
            let xs = [next() * 20.0 - 10.0, next() * 20.0 - 10.0, 30.0 + next() * 10.0];
            let x = [next() * 10.0 - 5.0, next() * 10.0 - 5.0, 15.0 + next() * 5.0];
            let mut n = [next() - 0.5, next() - 0.5, 1.0 + next()];
            let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            n = [n[0] / len, n[1] / len, n[2] / len];
            let mut ns = [next() - 0.5, next() - 0.5, -(0.5 + next())];
            let len = (ns[0] * ns[0] + ns[1] * ns[1] + ns[2] * ns[2]).sqrt();
            ns = [ns[0] / len, ns[1] / len, ns[2] / len];
            let mu = next() * 3.0;
            let rho = next();
            let psi = next() * 800.0;
            let light = LightSource {
                position: Vector3::new(xs[0], xs[1], xs[2]),
                principal_direction: Vector3::new(ns[0], ns[1], ns[2]),
                anisotropy_mu: mu,
                intensity_psi: [psi, psi, psi],
                color_group: ColorGroup::G,
            };
            let got = shade_pixel(
                &Vector3::new(x[0], x[1], x[2]),
                &Vector3::new(n[0], n[1], n[2]),
                rho,
                &light,
                1,
            )
            .unwrap();
            let expected = shade_reference(x, n, rho, psi, xs, ns, mu);
            assert!(
                (got - expected).abs() <= 1e-12 * expected.abs().max(1.0),
                "got {got}, expected {expected}"
            );
        }
    }

    #[test]
    fn coincident_light_is_singular() {
        let light = test_light([0.0, 0.0, 20.0], 0.0);
        let x = Vector3::new(0.0, 0.0, 20.0);
        let n = Vector3::new(0.0, 0.0, 1.0);
        assert!(matches!(
            shade_pixel(&x, &n, 1.0, &light, 0),
            Err(CoreError::LightSingularity(_))
        ));
    }

    #[test]
    fn zero_albedo_renders_dark_level() {
        let c = cam(16, 0.1);
        let spec = SurfaceSpec::flat(20.0).with_albedo(crate::scene::AlbedoSpec::Constant {
            rgb: [0.0, 0.0, 0.0],
        });
        let surface = crate::scene::make_synthetic_surface(&spec, &c).unwrap();
        let light = test_light([0.0, 0.0, 40.0], 0.0);
        let opts = RenderOptions {
            dark_level: 0.07,
            ..Default::default()
        };
        let img = render_single_light(&surface, &light, &c, &opts).unwrap();
        assert!(img.iter().all(|&v| v == 0.07));
    }

    #[test]
    fn on_axis_light_image_is_mirror_symmetric() {
        let c = cam(32, 0.1);
        let surface =
            crate::scene::make_synthetic_surface(&SurfaceSpec::flat(20.0), &c).unwrap();
        let light = test_light([0.0, 0.0, 40.0], 0.0);
        let img =
            render_single_light(&surface, &light, &c, &RenderOptions::default()).unwrap();
        for r in 0..32 {
            for cc in 0..32 {
                let mirrored = img[[r, 31 - cc, 0]];
                assert!((img[[r, cc, 0]] - mirrored).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn render_matches_per_pixel_shade_loop() {
        let c = cam(24, 0.1);
        let surface =
            crate::scene::make_synthetic_surface(&SurfaceSpec::dome(18.0, 30.0), &c).unwrap();
        let light = test_light([5.0, -3.0, 35.0], 1.5);
        let img =
            render_single_light(&surface, &light, &c, &RenderOptions::default()).unwrap();
        let normals = normals_from_depth(&surface.depth, &c).unwrap();
        for r in 0..24 {
            for cc in 0..24 {
                let (u, v) = c.pixel_to_metric(cc as f64, r as f64);
                let x = Vector3::new(u, v, surface.depth.z[[r, cc]]);
                let nn = normals.at(r, cc);
                for ch in 0..3 {
                    let expected = shade_pixel(
                        &x,
                        &Vector3::new(nn[0], nn[1], nn[2]),
                        surface.albedo.rho[[r, cc, ch]],
                        &light,
                        ch,
                    )
                    .unwrap()
                    .clamp(0.0, 1.0);
                    assert_eq!(img[[r, cc, ch]], expected);
                }
            }
        }
    }

    #[test]
    fn albedo_and_psi_linearity() {
        let c = cam(16, 0.1);
        let light = LightSource {
            intensity_psi: [120.0, 120.0, 120.0],
            ..test_light([2.0, 1.0, 40.0], 1.0)
        };
        let base = crate::scene::make_synthetic_surface(
            &SurfaceSpec::flat(20.0).with_albedo(crate::scene::AlbedoSpec::Constant {
                rgb: [0.2, 0.2, 0.2],
            }),
            &c,
        )
        .unwrap();
        let scaled = crate::scene::make_synthetic_surface(
            &SurfaceSpec::flat(20.0).with_albedo(crate::scene::AlbedoSpec::Constant {
                rgb: [0.4, 0.4, 0.4],
            }),
            &c,
        )
        .unwrap();
        let opts = RenderOptions::default();
        let a = render_single_light(&base, &light, &c, &opts).unwrap();
        let b = render_single_light(&scaled, &light, &c, &opts).unwrap();
        // Power-of-two albedo scale: bit-exact doubling (values stay below cap).
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(*y, 2.0 * *x);
        }

        let light2 = LightSource {
            intensity_psi: [240.0, 240.0, 240.0],
            ..light.clone()
        };
        let c2 = render_single_light(&base, &light2, &c, &opts).unwrap();
        for (x, y) in a.iter().zip(c2.iter()) {
            assert_eq!(*y, 2.0 * *x);
        }
    }

    #[test]
    fn capture_set_shape_and_trichrome_superposition() {
        let c = cam(24, 0.1);
        let surface =
            crate::scene::make_synthetic_surface(&SurfaceSpec::dome(18.0, 30.0), &c).unwrap();
        let lights = ring_lights(12, 10.0, 32.0, 18.0, 1.0, [400.0, 380.0, 360.0]);
        let opts = RenderOptions::default();
        let capture = render_capture_set(&surface, &lights, &c, &opts).unwrap();
        assert_eq!(capture.single_light_images.len(), 12);

        // Noiseless, unquantized: trichrome equals the channel-routed sum of
        // the per-light shade contributions (all below the clamp here).
        for r in 0..24 {
            for cc in 0..24 {
                for ch in 0..3 {
                    let mut sum = 0.0;
                    for light in lights.iter().filter(|l| l.color_group.channel() == ch) {
                        let (u, v) = c.pixel_to_metric(cc as f64, r as f64);
                        let x = Vector3::new(u, v, surface.depth.z[[r, cc]]);
                        let normals = normals_from_depth(&surface.depth, &c).unwrap();
                        let nn = normals.at(r, cc);
                        sum += shade_pixel(
                            &x,
                            &Vector3::new(nn[0], nn[1], nn[2]),
                            surface.albedo.rho[[r, cc, ch]],
                            light,
                            ch,
                        )
                        .unwrap();
                    }
                    assert!((capture.trichrome_image[[r, cc, ch]] - sum.min(1.0)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn too_few_lights_rejected() {
        let c = cam(8, 0.1);
        let surface = crate::scene::make_synthetic_surface(&SurfaceSpec::flat(20.0), &c).unwrap();
        let lights = ring_lights(2, 10.0, 30.0, 20.0, 0.0, [100.0; 3]);
        assert!(matches!(
            render_capture_set(&surface, &lights, &c, &RenderOptions::default()),
            Err(CoreError::InsufficientLights { .. })
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let c = cam(16, 0.1);
        let surface = crate::scene::make_synthetic_surface(&SurfaceSpec::flat(20.0), &c).unwrap();
        let lights = ring_lights(3, 8.0, 30.0, 20.0, 0.5, [200.0; 3]);
        let opts = RenderOptions {
            noise_sigma: 0.01,
            dark_level: 0.02,
            rng_seed: 42,
            ..Default::default()
        };
        let a = render_capture_set(&surface, &lights, &c, &opts).unwrap();
        let b = render_capture_set(&surface, &lights, &c, &opts).unwrap();
        for (x, y) in a.single_light_images[1].iter().zip(b.single_light_images[1].iter()) {
            assert_eq!(x, y);
        }
        for (x, y) in a.dark_image.iter().zip(b.dark_image.iter()) {
            assert_eq!(x, y);
        }
        // Different streams differ.
        assert_ne!(a.single_light_images[0], a.single_light_images[1]);
    }

    #[test]
    fn noise_is_unbiased_and_scaled() {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let n = 40_000;
        for i in 0..n {
            let g = gaussian_noise(7, NoiseStream::Dark, i, 0);
            sum += g;
            sum_sq += g * g;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }
}
