//! Gaussian scale-space pyramid and its difference-of-Gaussians.

use crate::error::{Error, Result};
use crate::imgproc::GrayImage;
use crate::sift::SiftParams;

/// Truncation radius of the Gaussian kernel in units of sigma.
const KERNEL_RADIUS_SIGMAS: f64 = 3.0;

/// Minimum base-image side for pyramid construction.
pub const MIN_IMAGE_SIDE: u32 = 32;

/// Single-channel f32 raster used inside the scale space, intensities
/// normalized to [0, 1] at the base level.
#[derive(Debug, Clone)]
pub struct ImageF32 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl ImageF32 {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    pub fn from_gray(img: &GrayImage) -> Self {
        let data = img.data().iter().map(|&v| v as f32 / 255.0).collect();
        Self { width: img.width() as usize, height: img.height() as usize, data }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[f32] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Keeps every second pixel in both directions.
    pub fn downsample_half(&self) -> ImageF32 {
        let (w, h) = (self.width / 2, self.height / 2);
        let mut out = ImageF32::new(w, h);
        for y in 0..h {
            let src = self.row(2 * y);
            let dst = &mut out.data[y * w..(y + 1) * w];
            for (x, d) in dst.iter_mut().enumerate() {
                *d = src[2 * x];
            }
        }
        out
    }
}

/// Gaussian pyramid: `octaves[o][level]`, each octave half the resolution of
/// the previous one, `scales_per_octave + 3` levels per octave.
pub struct GaussianPyramid {
    pub octaves: Vec<Vec<ImageF32>>,
    /// Blur of each level relative to its own octave's resolution.
    pub level_sigmas: Vec<f64>,
    pub scales_per_octave: usize,
    pub sigma0: f64,
    /// Gradient magnitude/direction maps for the levels that orientation
    /// and descriptor sampling touch (1..=scales_per_octave); other slots
    /// stay empty. Keypoint windows overlap heavily, so sharing one map per
    /// level is much cheaper than per-sample gradient math.
    pub gradients: Vec<Vec<Option<GradientMap>>>,
}

impl GaussianPyramid {
    /// Blur of `(octave, level)` expressed at base-image resolution.
    pub fn absolute_sigma(&self, octave: usize, level: usize) -> f64 {
        self.level_sigmas[level] * (1u64 << octave) as f64
    }

    pub fn gradient_map(&self, octave: usize, level: usize) -> &GradientMap {
        self.gradients[octave][level]
            .as_ref()
            .expect("gradient map only exists for the center DoG levels")
    }
}

/// Per-pixel gradient magnitude and direction (radians in [0, 2*pi)) of one
/// pyramid level; the one-pixel border carries zero magnitude.
pub struct GradientMap {
    pub width: usize,
    pub height: usize,
    pub magnitude: Vec<f32>,
    pub theta: Vec<f32>,
}

impl GradientMap {
    fn build(img: &ImageF32) -> Self {
        let (w, h) = (img.width, img.height);
        let mut magnitude = vec![0.0f32; w * h];
        let mut theta = vec![0.0f32; w * h];
        for y in 1..h.saturating_sub(1) {
            let row = img.row(y);
            let up = img.row(y - 1);
            let down = img.row(y + 1);
            let mag_row = &mut magnitude[y * w..(y + 1) * w];
            let theta_row = &mut theta[y * w..(y + 1) * w];
            for x in 1..w - 1 {
                let gx = row[x + 1] - row[x - 1];
                let gy = down[x] - up[x];
                mag_row[x] = (gx * gx + gy * gy).sqrt();
                theta_row[x] = crate::sift::fastmath::fast_atan2(gy, gx);
            }
        }
        Self { width: w, height: h, magnitude, theta }
    }
}

/// DoG pyramid: adjacent-level differences of the Gaussian pyramid, so each
/// octave holds `scales_per_octave + 2` levels.
pub struct DogPyramid {
    pub octaves: Vec<Vec<ImageF32>>,
    pub scales_per_octave: usize,
}

/// Number of octaves for a given base image: floor(log2(min side)) - 2.
pub fn octave_count(width: usize, height: usize) -> usize {
    let side = width.min(height) as f64;
    (side.log2().floor() as usize).saturating_sub(2)
}

/// Builds the Gaussian scale space.
///
/// The base level is the input pre-blurred from the assumed camera blur up
/// to `sigma0` (no 2x upsampling, keeping the real-time budget); each
/// further level adds blur so sigma grows geometrically by
/// `2^(1/scales_per_octave)`, and each octave starts from the downsampled
/// level whose blur is exactly twice the octave base.
pub fn build_gaussian_pyramid(img: &GrayImage, params: &SiftParams) -> Result<GaussianPyramid> {
    if img.width() < MIN_IMAGE_SIDE || img.height() < MIN_IMAGE_SIDE {
        return Err(Error::Dimension(format!(
            "image {}x{} too small for scale space (minimum side {MIN_IMAGE_SIDE})",
            img.width(),
            img.height()
        )));
    }
    let s = params.scales_per_octave;
    let n_levels = s + 3;
    let n_octaves = octave_count(img.width() as usize, img.height() as usize);
    let k = 2f64.powf(1.0 / s as f64);

    let level_sigmas: Vec<f64> = (0..n_levels).map(|i| params.sigma0 * k.powi(i as i32)).collect();
    // Incremental blur between consecutive levels.
    let deltas: Vec<f64> = (1..n_levels)
        .map(|i| (level_sigmas[i].powi(2) - level_sigmas[i - 1].powi(2)).sqrt())
        .collect();

    let base = ImageF32::from_gray(img);
    let initial_delta =
        (params.sigma0.powi(2) - params.assumed_input_blur.powi(2)).max(1e-4).sqrt();

    let mut octaves = Vec::with_capacity(n_octaves);
    let mut first = gaussian_blur(&base, initial_delta);
    for _ in 0..n_octaves {
        let mut levels = Vec::with_capacity(n_levels);
        levels.push(first);
        for delta in &deltas {
            let next = gaussian_blur(levels.last().unwrap(), *delta);
            levels.push(next);
        }
        // Level index `s` carries blur 2 * sigma0: the seed of the next octave.
        first = levels[s].downsample_half();
        octaves.push(levels);
    }

    let gradients = octaves
        .iter()
        .map(|levels| {
            (0..n_levels)
                .map(|i| (1..=s).contains(&i).then(|| GradientMap::build(&levels[i])))
                .collect()
        })
        .collect();

    Ok(GaussianPyramid {
        octaves,
        level_sigmas,
        scales_per_octave: s,
        sigma0: params.sigma0,
        gradients,
    })
}

pub fn build_dog_pyramid(pyr: &GaussianPyramid) -> DogPyramid {
    let octaves = pyr
        .octaves
        .iter()
        .map(|levels| {
            levels
                .windows(2)
                .map(|pair| {
                    let (lo, hi) = (&pair[0], &pair[1]);
                    let mut data = vec![0.0f32; lo.data.len()];
                    for ((d, &a), &b) in data.iter_mut().zip(hi.data.iter()).zip(lo.data.iter()) {
                        *d = a - b;
                    }
                    ImageF32 { width: lo.width, height: lo.height, data }
                })
                .collect()
        })
        .collect();
    DogPyramid { octaves, scales_per_octave: pyr.scales_per_octave }
}

/// Separable Gaussian blur with reflected (`cba|abc|cba`-style, center not
/// repeated) borders.
pub fn gaussian_blur(src: &ImageF32, sigma: f64) -> ImageF32 {
    let kernel = gaussian_kernel(sigma);
    let r = kernel.len() / 2;
    let (w, h) = (src.width, src.height);

    // Horizontal pass over a reflected row copy that stays cache-hot; the
    // tap-outer loops below are plain slice accumulations, which the
    // compiler vectorizes well.
    let mut tmp = ImageF32::new(w, h);
    let mut padded = vec![0.0f32; w + 2 * r];
    for y in 0..h {
        let row = src.row(y);
        for (i, p) in padded.iter_mut().enumerate() {
            *p = row[reflect_index(i as isize - r as isize, w)];
        }
        let out = &mut tmp.data[y * w..(y + 1) * w];
        // First tap initializes, the rest accumulate.
        let k0 = kernel[0];
        for (o, &s) in out.iter_mut().zip(padded.iter()) {
            *o = k0 * s;
        }
        for (j, &kv) in kernel.iter().enumerate().skip(1) {
            let shifted = &padded[j..j + w];
            for (o, &s) in out.iter_mut().zip(shifted.iter()) {
                *o += kv * s;
            }
        }
    }

    // Vertical pass accumulates whole rows.
    let mut dst = ImageF32::new(w, h);
    for y in 0..h {
        let out = &mut dst.data[y * w..(y + 1) * w];
        let sy0 = reflect_index(y as isize - r as isize, h);
        let k0 = kernel[0];
        for (o, &s) in out.iter_mut().zip(tmp.row(sy0).iter()) {
            *o = k0 * s;
        }
        for (j, &kv) in kernel.iter().enumerate().skip(1) {
            let sy = reflect_index(y as isize + j as isize - r as isize, h);
            let row = tmp.row(sy);
            for (o, &s) in out.iter_mut().zip(row.iter()) {
                *o += kv * s;
            }
        }
    }
    dst
}

#[inline]
fn reflect_index(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * n - 2 - i;
        } else {
            return i as usize;
        }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f32> {
    let r = (KERNEL_RADIUS_SIGMAS * sigma).ceil().max(1.0) as usize;
    let mut kernel = Vec::with_capacity(2 * r + 1);
    let inv = -0.5 / (sigma * sigma);
    for i in 0..=2 * r {
        let d = i as f64 - r as f64;
        kernel.push((d * d * inv).exp());
    }
    let sum: f64 = kernel.iter().sum();
    kernel.iter().map(|&v| (v / sum) as f32).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn octave_counts() {
        assert_eq!(octave_count(256, 256), 6);
        assert_eq!(octave_count(500, 490), 6);
        assert_eq!(octave_count(32, 32), 3);
    }

    #[test]
    fn pyramid_shape_matches_parameters() {
        let img = GrayImage::filled(256, 256, 100).unwrap();
        let pyr = build_gaussian_pyramid(&img, &SiftParams::default()).unwrap();
        assert_eq!(pyr.octaves.len(), 6);
        for levels in &pyr.octaves {
            assert_eq!(levels.len(), 6); // scales_per_octave + 3
        }
        let dog = build_dog_pyramid(&pyr);
        assert_eq!(dog.octaves[0].len(), 5);
    }

    #[test]
    fn constant_image_blurs_to_constant() {
        let img = GrayImage::filled(64, 64, 200).unwrap();
        let pyr = build_gaussian_pyramid(&img, &SiftParams::default()).unwrap();
        let expected = 200.0 / 255.0;
        for levels in &pyr.octaves {
            for level in levels {
                for &v in &level.data {
                    assert!((v - expected).abs() < 1e-4);
                }
            }
        }
    }

    #[test]
    fn too_small_image_rejected() {
        let img = GrayImage::filled(31, 64, 0).unwrap();
        assert!(build_gaussian_pyramid(&img, &SiftParams::default()).is_err());
    }

    #[test]
    fn blur_preserves_mean_roughly() {
        let mut img = ImageF32::new(33, 33);
        img.data[16 * 33 + 16] = 1.0;
        let out = gaussian_blur(&img, 2.0);
        let sum: f32 = out.data.iter().sum();
        assert!((sum - 1.0).abs() < 1e-4, "impulse mass changed: {sum}");
        // Peak stays in the middle.
        let (mut best, mut arg) = (0.0f32, 0usize);
        for (i, &v) in out.data.iter().enumerate() {
            if v > best {
                best = v;
                arg = i;
            }
        }
        assert_eq!(arg, 16 * 33 + 16);
    }
}
