//! Dominant-orientation assignment from a gradient histogram.

use std::f64::consts::PI;

use crate::sift::fastmath::gaussian_lut;
use crate::sift::pyramid::{GaussianPyramid, GradientMap};
use crate::sift::Keypoint;

const HIST_BINS: usize = 36;
/// Gaussian weighting sigma as a multiple of the keypoint scale.
const WINDOW_SIGMA_FACTOR: f64 = 1.5;
/// Window radius in units of the weighting sigma.
const WINDOW_RADIUS_SIGMAS: f64 = 3.0;
/// Secondary peaks at or above this fraction of the maximum spawn extra
/// oriented copies of the keypoint.
const PEAK_RATIO: f64 = 0.8;

/// Computes dominant gradient orientations for `kp` and returns one keypoint
/// copy per accepted histogram peak. An empty result means the window held
/// no gradient and the keypoint is dropped.
pub fn assign_orientations(kp: &Keypoint, pyr: &GaussianPyramid) -> Vec<Keypoint> {
    let gradients = pyr.gradient_map(kp.octave, kp.scale_index);
    let scale = (1u64 << kp.octave) as f64;
    let xc = kp.x / scale;
    let yc = kp.y / scale;
    let sigma_octave = kp.sigma / scale;

    let hist = match gradient_histogram(gradients, xc, yc, sigma_octave) {
        Some(h) => h,
        None => return Vec::new(),
    };
    let max = hist.iter().cloned().fold(f64::MIN, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }

    let mut out = Vec::new();
    for i in 0..HIST_BINS {
        let left = hist[(i + HIST_BINS - 1) % HIST_BINS];
        let right = hist[(i + 1) % HIST_BINS];
        let v = hist[i];
        if v > left && v > right && v >= PEAK_RATIO * max {
            // Parabolic refinement of the peak position.
            let delta = 0.5 * (left - right) / (left - 2.0 * v + right);
            let bin = i as f64 + delta;
            let theta = (bin * (2.0 * PI / HIST_BINS as f64)).rem_euclid(2.0 * PI);
            let mut oriented = kp.clone();
            oriented.orientation = theta;
            out.push(oriented);
        }
    }
    out
}

/// 36-bin orientation histogram over a Gaussian-weighted window, smoothed
/// once with the circular binomial kernel [1 4 6 4 1]/16. Gradient mass is
/// split linearly between the two nearest bins so sub-bin peak positions
/// survive the histogramming.
fn gradient_histogram(
    gradients: &GradientMap,
    xc: f64,
    yc: f64,
    sigma_octave: f64,
) -> Option<[f64; HIST_BINS]> {
    let sigma_w = WINDOW_SIGMA_FACTOR * sigma_octave;
    let radius = (WINDOW_RADIUS_SIGMAS * sigma_w).round().max(1.0) as isize;
    let x0 = xc.round() as isize;
    let y0 = yc.round() as isize;
    let h = gradients.height as isize;

    let lut = gaussian_lut(radius as usize, (1.0 / (2.0 * sigma_w * sigma_w)) as f32);
    let bin_per_rad = HIST_BINS as f32 / std::f32::consts::TAU;
    let mut raw = [0.0f64; HIST_BINS];
    let mut any = false;
    for dy in -radius..=radius {
        let y = y0 + dy;
        if y < 0 || y >= h {
            continue;
        }
        let yr = y as usize;
        let x_lo = (x0 - radius).max(0) as usize;
        let x_hi = ((x0 + radius) as usize).min(gradients.width - 1);
        let mag_row = &gradients.magnitude[yr * gradients.width..][x_lo..=x_hi];
        let theta_row = &gradients.theta[yr * gradients.width..][x_lo..=x_hi];
        let wy = lut[dy.unsigned_abs()];
        for ((&mag, &theta), x) in mag_row.iter().zip(theta_row.iter()).zip(x_lo..) {
            // Border pixels carry zero magnitude and drop out here.
            if mag == 0.0 {
                continue;
            }
            any = true;
            let weight = wy * lut[(x as isize - x0).unsigned_abs()];
            // Two-bin linear split around the bin centers at i * 2pi/36.
            let pos = theta * bin_per_rad;
            let i0 = (pos.floor() as usize) % HIST_BINS;
            let frac = (pos - pos.floor()) as f64;
            let mass = (weight * mag) as f64;
            raw[i0] += mass * (1.0 - frac);
            raw[(i0 + 1) % HIST_BINS] += mass * frac;
        }
    }
    if !any {
        return None;
    }

    let mut smoothed = [0.0f64; HIST_BINS];
    for i in 0..HIST_BINS {
        let at = |o: isize| raw[((i as isize + o).rem_euclid(HIST_BINS as isize)) as usize];
        smoothed[i] = (at(-2) + at(2)) / 16.0 + 4.0 * (at(-1) + at(1)) / 16.0 + 6.0 * at(0) / 16.0;
    }
    Some(smoothed)
}
