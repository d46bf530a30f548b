//! Seeded synthetic ground-truth sequences: static, vibration and moving
//! scenes with controlled texture, sensor noise, illumination drift and an
//! optional moving intruder.
//!
//! Frames are rendered by sampling one continuous textured background at
//! sub-pixel offsets (bilinear), so the true motion of every background
//! point is known exactly.
//!
//! Vibration modeling: a perfectly rigid oscillation displaces every
//! feature identically, which leaves the cross-trajectory spread at zero
//! and would read as a static scene. Real chassis vibration scatters the
//! matched features, so the generator combines a zero-mean global
//! oscillation (period four frames, hence zero net drift across any
//! five-frame window) with independent per-region elastic jitter that
//! produces the spread a camera actually sees.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::GrayImage;

/// Side length of the square regions that jitter independently in
/// vibration scenes, in pixels.
const JITTER_REGION_PX: u32 = 80;

/// Oscillation period in frames. Four means the global component repeats
/// exactly and any window spanning four steps has zero net drift.
const OSCILLATION_PERIOD: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneKind {
    Static,
    Vibration,
    Moving,
}

impl std::fmt::Display for SceneKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SceneKind::Static => "static",
            SceneKind::Vibration => "vibration",
            SceneKind::Moving => "moving",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextureKind {
    ValueNoise,
    Checker,
    LowTexture,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextureSpec {
    pub kind: TextureKind,
    /// Meaning depends on the kind: lattice cells per 100 px for value
    /// noise, squares per 100 px for checker, blobs per 100x100 px patch
    /// for low texture.
    pub density: f64,
}

impl Default for TextureSpec {
    fn default() -> Self {
        Self { kind: TextureKind::ValueNoise, density: 8.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionSpec {
    /// Per-frame translation of the scene content, px/frame (moving scenes).
    pub translation: (f64, f64),
    /// Global oscillation amplitude in px (vibration scenes).
    pub oscillation_amplitude: f64,
    /// Per-region elastic jitter amplitude in px (vibration scenes).
    pub jitter_amplitude: f64,
}

impl Default for MotionSpec {
    fn default() -> Self {
        Self { translation: (3.0, 0.0), oscillation_amplitude: 1.0, jitter_amplitude: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntruderSpec {
    pub size: (u32, u32),
    pub velocity: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub width: u32,
    pub height: u32,
    pub n_frames: u32,
    #[serde(default)]
    pub texture: TextureSpec,
    /// Additive Gaussian sensor noise, in gray levels.
    #[serde(default)]
    pub pixel_noise_sigma: f64,
    #[serde(default)]
    pub motion: MotionSpec,
    /// Linear brightness drift across the sequence, in gray levels.
    #[serde(default)]
    pub illumination_ramp: f64,
    #[serde(default)]
    pub intruder: Option<IntruderSpec>,
    pub seed: u64,
}

impl SceneSpec {
    /// Static scene with the default texture and mild sensor noise.
    pub fn static_scene(width: u32, height: u32, n_frames: u32, seed: u64) -> Self {
        Self {
            kind: SceneKind::Static,
            width,
            height,
            n_frames,
            texture: TextureSpec::default(),
            pixel_noise_sigma: 2.0,
            motion: MotionSpec::default(),
            illumination_ramp: 0.0,
            intruder: None,
            seed,
        }
    }

    /// Moving scene translating by `velocity` px/frame.
    pub fn moving_scene(
        width: u32,
        height: u32,
        n_frames: u32,
        velocity: (f64, f64),
        seed: u64,
    ) -> Self {
        Self {
            kind: SceneKind::Moving,
            motion: MotionSpec { translation: velocity, ..MotionSpec::default() },
            ..Self::static_scene(width, height, n_frames, seed)
        }
    }

    /// Vibration scene with the calibrated oscillation and jitter
    /// amplitudes (1.0 px global, 0.5 px per region).
    pub fn vibration_scene(width: u32, height: u32, n_frames: u32, seed: u64) -> Self {
        Self { kind: SceneKind::Vibration, ..Self::static_scene(width, height, n_frames, seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 64 || self.height < 64 {
            return Err(Error::Config("scene must be at least 64x64".into()));
        }
        if self.n_frames < 2 {
            return Err(Error::Config("scene needs at least 2 frames".into()));
        }
        if self.pixel_noise_sigma < 0.0
            || self.motion.oscillation_amplitude < 0.0
            || self.motion.jitter_amplitude < 0.0
        {
            return Err(Error::Config("noise and amplitudes must be non-negative".into()));
        }
        match self.texture.kind {
            TextureKind::LowTexture => {
                if self.texture.density < 0.0 {
                    return Err(Error::Config("low_texture density must be >= 0".into()));
                }
            }
            _ => {
                if !(self.texture.density > 0.0) {
                    return Err(Error::Config("texture density must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// Per-frame ground-truth label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub frame: u64,
    pub label: SceneKind,
}

// Independent deterministic RNG streams derived from the scene seed.
const STREAM_TEXTURE: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_JITTER: u64 = 2;
const STREAM_SCENE: u64 = 3;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Global oscillation offset of a vibration scene at frame `k`.
///
/// A sine with period exactly [`OSCILLATION_PERIOD`] frames along a seeded
/// direction: zero mean and exactly zero drift over any four-step span.
pub fn oscillation_offset(spec: &SceneSpec, frame: u32) -> (f64, f64) {
    if spec.kind != SceneKind::Vibration {
        return (0.0, 0.0);
    }
    let mut rng = stream_rng(spec.seed, STREAM_SCENE);
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let dir: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let a = spec.motion.oscillation_amplitude;
    let s = a * (std::f64::consts::TAU * frame as f64 / OSCILLATION_PERIOD + phase).sin();
    (s * dir.cos(), s * dir.sin())
}

/// Renders the sequence and its per-frame ground truth.
pub fn generate(spec: &SceneSpec) -> Result<(Vec<GrayImage>, Vec<GroundTruth>)> {
    spec.validate()?;
    let (w, h) = (spec.width as usize, spec.height as usize);
    let n = spec.n_frames;

    // The background must cover the frame under the largest offset used.
    let max_offset = match spec.kind {
        SceneKind::Static => 0.0,
        SceneKind::Moving => {
            let (vx, vy) = spec.motion.translation;
            vx.abs().max(vy.abs()) * (n - 1) as f64
        }
        SceneKind::Vibration => spec.motion.oscillation_amplitude + spec.motion.jitter_amplitude,
    };
    let margin = max_offset.ceil() as usize + 2;
    let bg = render_background(spec, w + 2 * margin, h + 2 * margin);

    let mut noise_rng = stream_rng(spec.seed, STREAM_NOISE);
    let mut jitter_rng = stream_rng(spec.seed, STREAM_JITTER);
    let normal = (spec.pixel_noise_sigma > 0.0)
        .then(|| Normal::new(0.0, spec.pixel_noise_sigma).expect("sigma validated"));
    let intruder_tex = spec.intruder.map(|i| render_intruder_texture(spec, i));

    let regions_x = (spec.width + JITTER_REGION_PX - 1) / JITTER_REGION_PX;
    let regions_y = (spec.height + JITTER_REGION_PX - 1) / JITTER_REGION_PX;

    let mut frames = Vec::with_capacity(n as usize);
    let mut truth = Vec::with_capacity(n as usize);
    for k in 0..n {
        let global = match spec.kind {
            SceneKind::Static => (0.0, 0.0),
            SceneKind::Moving => {
                let (vx, vy) = spec.motion.translation;
                (vx * k as f64, vy * k as f64)
            }
            SceneKind::Vibration => oscillation_offset(spec, k),
        };

        // Fresh per-region jitter each frame, drawn in fixed row-major order.
        let jitter: Vec<(f64, f64)> = if spec.kind == SceneKind::Vibration {
            let a = spec.motion.jitter_amplitude;
            (0..regions_x * regions_y)
                .map(|_| {
                    if a > 0.0 {
                        (jitter_rng.gen_range(-a..=a), jitter_rng.gen_range(-a..=a))
                    } else {
                        (0.0, 0.0)
                    }
                })
                .collect()
        } else {
            Vec::new()
        };

        let illum = if spec.illumination_ramp != 0.0 {
            spec.illumination_ramp * k as f64 / (n - 1) as f64
        } else {
            0.0
        };

        let mut data = vec![0.0f32; w * h];
        for y in 0..h {
            let region_row = (y as u32 / JITTER_REGION_PX) * regions_x;
            for x in 0..w {
                let (jx, jy) = if spec.kind == SceneKind::Vibration {
                    jitter[(region_row + x as u32 / JITTER_REGION_PX) as usize]
                } else {
                    (0.0, 0.0)
                };
                let u = x as f64 + margin as f64 - (global.0 + jx);
                let v = y as f64 + margin as f64 - (global.1 + jy);
                data[y * w + x] = bilinear(&bg.0, bg.1, u, v);
            }
        }

        if let (Some(intruder), Some(tex)) = (spec.intruder, intruder_tex.as_ref()) {
            draw_intruder(&mut data, w, h, &intruder, tex, k);
        }

        let mut bytes = Vec::with_capacity(w * h);
        for &value in &data {
            let mut value = value as f64 + illum;
            if let Some(normal) = &normal {
                value += normal.sample(&mut noise_rng);
            }
            bytes.push(value.round().clamp(0.0, 255.0) as u8);
        }
        frames.push(GrayImage::new(spec.width, spec.height, bytes)?);
        truth.push(GroundTruth { frame: k as u64, label: spec.kind });
    }
    Ok((frames, truth))
}

/// Writes frames (`frame_%06d.pgm` or `.png`), `truth.jsonl` and a copy of
/// the spec into `dir`.
pub fn write_scene(spec: &SceneSpec, dir: &Path, png: bool) -> Result<()> {
    let (frames, truth) = generate(spec)?;
    fs::create_dir_all(dir)?;
    for (k, frame) in frames.iter().enumerate() {
        let name = if png { format!("frame_{k:06}.png") } else { format!("frame_{k:06}.pgm") };
        let path = dir.join(name);
        if png {
            crate::imgproc::write_png(frame, &path)?;
        } else {
            crate::imgproc::write_pgm(frame, &path)?;
        }
    }
    let mut truth_file = fs::File::create(dir.join("truth.jsonl"))?;
    for gt in &truth {
        serde_json::to_writer(&mut truth_file, gt).map_err(|e| Error::Io(e.into()))?;
        truth_file.write_all(b"\n")?;
    }
    let spec_json = serde_json::to_string_pretty(spec).map_err(|e| Error::Io(e.into()))?;
    fs::write(dir.join("scene_spec.json"), spec_json)?;
    Ok(())
}

fn render_background(spec: &SceneSpec, bw: usize, bh: usize) -> (Vec<f32>, usize) {
    let mut rng = stream_rng(spec.seed, STREAM_TEXTURE);
    let data = match spec.texture.kind {
        TextureKind::ValueNoise => {
            let cell = 100.0 / spec.texture.density;
            let coarse = value_noise_raster(&mut rng, bw, bh, cell);
            let fine = value_noise_raster(&mut rng, bw, bh, (cell / 2.0).max(2.0));
            coarse
                .iter()
                .zip(fine.iter())
                .map(|(&a, &b)| 20.0 + (0.65 * a + 0.35 * b) * 215.0)
                .collect()
        }
        TextureKind::Checker => {
            let size = (100.0 / spec.texture.density).max(2.0);
            let mut data = Vec::with_capacity(bw * bh);
            for y in 0..bh {
                for x in 0..bw {
                    let parity =
                        ((x as f64 / size).floor() as i64 + (y as f64 / size).floor() as i64) & 1;
                    data.push(if parity == 0 { 64.0 } else { 192.0 });
                }
            }
            data
        }
        TextureKind::LowTexture => {
            let mut data = vec![128.0f32; bw * bh];
            let blobs = (spec.texture.density * (bw * bh) as f64 / 10_000.0).round() as usize;
            for _ in 0..blobs {
                let cx = rng.gen_range(0.0..bw as f64);
                let cy = rng.gen_range(0.0..bh as f64);
                let sigma: f64 = rng.gen_range(2.0..5.0);
                let amp: f64 = rng.gen_range(15.0..30.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let r = (3.0 * sigma).ceil() as isize;
                let (icx, icy) = (cx.round() as isize, cy.round() as isize);
                for dy in -r..=r {
                    let y = icy + dy;
                    if y < 0 || y >= bh as isize {
                        continue;
                    }
                    for dx in -r..=r {
                        let x = icx + dx;
                        if x < 0 || x >= bw as isize {
                            continue;
                        }
                        let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                        data[y as usize * bw + x as usize] +=
                            (amp * (-d2 / (2.0 * sigma * sigma)).exp()) as f32;
                    }
                }
            }
            data
        }
    };
    (data, bw)
}

/// Smoothstep-interpolated value noise in [0, 1].
fn value_noise_raster(rng: &mut ChaCha8Rng, w: usize, h: usize, cell: f64) -> Vec<f32> {
    let nx = (w as f64 / cell).ceil() as usize + 2;
    let ny = (h as f64 / cell).ceil() as usize + 2;
    let lattice: Vec<f32> = (0..nx * ny).map(|_| rng.gen::<f32>()).collect();
    let smooth = |t: f32| t * t * (3.0 - 2.0 * t);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let fy = y as f64 / cell;
        let iy = fy.floor() as usize;
        let ty = smooth((fy - fy.floor()) as f32);
        for x in 0..w {
            let fx = x as f64 / cell;
            let ix = fx.floor() as usize;
            let tx = smooth((fx - fx.floor()) as f32);
            let v00 = lattice[iy * nx + ix];
            let v01 = lattice[iy * nx + ix + 1];
            let v10 = lattice[(iy + 1) * nx + ix];
            let v11 = lattice[(iy + 1) * nx + ix + 1];
            let top = v00 + tx * (v01 - v00);
            let bot = v10 + tx * (v11 - v10);
            out.push(top + ty * (bot - top));
        }
    }
    out
}

#[inline]
fn bilinear(data: &[f32], stride: usize, u: f64, v: f64) -> f32 {
    let x0 = u.floor();
    let y0 = v.floor();
    let fx = (u - x0) as f32;
    let fy = (v - y0) as f32;
    let (xi, yi) = (x0 as usize, y0 as usize);
    let base = yi * stride + xi;
    let top = data[base] + fx * (data[base + 1] - data[base]);
    let bot = data[base + stride] + fx * (data[base + stride + 1] - data[base + stride]);
    top + fy * (bot - top)
}

fn render_intruder_texture(spec: &SceneSpec, intruder: IntruderSpec) -> Vec<f32> {
    let mut rng = stream_rng(spec.seed, STREAM_SCENE);
    // Skip the oscillation draws so the texture stays independent of them.
    let _: (f64, f64) = (rng.gen(), rng.gen());
    let (iw, ih) = (intruder.size.0 as usize, intruder.size.1 as usize);
    value_noise_raster(&mut rng, iw, ih, 8.0)
        .iter()
        .map(|&v| 30.0 + v * 120.0)
        .collect()
}

fn draw_intruder(
    frame: &mut [f32],
    w: usize,
    h: usize,
    intruder: &IntruderSpec,
    tex: &[f32],
    k: u32,
) {
    let (iw, ih) = (intruder.size.0 as usize, intruder.size.1 as usize);
    // Enters at the left edge, vertically centered, and follows a straight
    // path at its own velocity.
    let x0 = (2.0 + intruder.velocity.0 * k as f64).round() as isize;
    let y0 = ((h as f64 - ih as f64) / 2.0 + intruder.velocity.1 * k as f64).round() as isize;
    for dy in 0..ih {
        let y = y0 + dy as isize;
        if y < 0 || y >= h as isize {
            continue;
        }
        for dx in 0..iw {
            let x = x0 + dx as isize;
            if x < 0 || x >= w as isize {
                continue;
            }
            frame[y as usize * w + x as usize] = tex[dy * iw + dx];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_scene_without_noise_is_frozen() {
        let mut spec = SceneSpec::static_scene(96, 96, 5, 7);
        spec.pixel_noise_sigma = 0.0;
        let (frames, truth) = generate(&spec).unwrap();
        assert_eq!(frames.len(), 5);
        assert!(truth.iter().all(|t| t.label == SceneKind::Static));
        for f in &frames[1..] {
            assert_eq!(f, &frames[0]);
        }
    }

    #[test]
    fn moving_scene_shifts_exactly() {
        let mut spec = SceneSpec::moving_scene(128, 96, 8, (3.0, 0.0), 3);
        spec.pixel_noise_sigma = 0.0;
        let (frames, _) = generate(&spec).unwrap();
        for k in 1..8usize {
            let shift = 3 * k as u32;
            for y in 0..96u32 {
                for x in shift..128u32 {
                    assert_eq!(
                        frames[k].get(x, y),
                        frames[0].get(x - shift, y),
                        "frame {k} at ({x},{y})"
                    );
                }
            }
        }
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let spec = SceneSpec::vibration_scene(96, 96, 6, 11);
        let (a, _) = generate(&spec).unwrap();
        let (b, _) = generate(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let (a, _) = generate(&SceneSpec::static_scene(96, 96, 2, 1)).unwrap();
        let (b, _) = generate(&SceneSpec::static_scene(96, 96, 2, 2)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn oscillation_has_zero_four_step_drift() {
        let spec = SceneSpec::vibration_scene(128, 128, 40, 5);
        for k in 0..36 {
            let a = oscillation_offset(&spec, k);
            let b = oscillation_offset(&spec, k + 4);
            let drift = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
            assert!(drift < 0.5, "window drift {drift} at frame {k}");
        }
        // Amplitude bound holds.
        for k in 0..40 {
            let (ox, oy) = oscillation_offset(&spec, k);
            assert!((ox * ox + oy * oy).sqrt() <= spec.motion.oscillation_amplitude + 1e-12);
        }
    }

    #[test]
    fn low_texture_zero_density_is_flat() {
        let mut spec = SceneSpec::static_scene(96, 96, 2, 9);
        spec.texture = TextureSpec { kind: TextureKind::LowTexture, density: 0.0 };
        spec.pixel_noise_sigma = 0.0;
        let (frames, _) = generate(&spec).unwrap();
        assert!(frames[0].data().iter().all(|&v| v == 128));
    }

    #[test]
    fn intruder_moves_across_frames() {
        let mut spec = SceneSpec::static_scene(128, 96, 4, 21);
        spec.pixel_noise_sigma = 0.0;
        spec.intruder = Some(IntruderSpec { size: (24, 16), velocity: (6.0, 0.0) });
        let (frames, _) = generate(&spec).unwrap();
        // The background is frozen, so any difference is the intruder.
        assert_ne!(frames[0], frames[1]);
        let mut baseline = spec.clone();
        baseline.intruder = None;
        let (clean, _) = generate(&baseline).unwrap();
        let diff0 = frames[0]
            .data()
            .iter()
            .zip(clean[0].data())
            .filter(|(a, b)| a != b)
            .count();
        assert!(diff0 >= 24 * 16 / 2, "intruder not visible in frame 0");
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = SceneSpec::static_scene(96, 96, 1, 0);
        assert!(generate(&spec).is_err()); // single frame
        spec.n_frames = 4;
        spec.pixel_noise_sigma = -1.0;
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn checker_texture_renders_two_levels() {
        let mut spec = SceneSpec::static_scene(96, 96, 2, 13);
        spec.texture = TextureSpec { kind: TextureKind::Checker, density: 6.0 };
        spec.pixel_noise_sigma = 0.0;
        let (frames, _) = generate(&spec).unwrap();
        let distinct: std::collections::HashSet<u8> = frames[0].data().iter().copied().collect();
        assert!(distinct.contains(&64) && distinct.contains(&192));
    }

    #[test]
    fn write_scene_produces_frames_truth_and_spec() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SceneSpec::static_scene(96, 96, 3, 17);
        write_scene(&spec, dir.path(), false).unwrap();
        assert!(dir.path().join("frame_000000.pgm").exists());
        assert!(dir.path().join("frame_000002.pgm").exists());
        let truth = fs::read_to_string(dir.path().join("truth.jsonl")).unwrap();
        assert_eq!(truth.lines().count(), 3);
        let spec_back: SceneSpec =
            serde_json::from_str(&fs::read_to_string(dir.path().join("scene_spec.json")).unwrap())
                .unwrap();
        assert_eq!(spec_back, spec);
    }
}
