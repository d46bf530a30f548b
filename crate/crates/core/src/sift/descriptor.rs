//! 128-d gradient-histogram descriptor: 4x4 spatial bins, 8 orientation
//! bins, trilinear interpolation over a window rotated to the keypoint
//! orientation.

use std::f32::consts::TAU;

use crate::sift::fastmath::gaussian_lut;
use crate::sift::pyramid::GaussianPyramid;
use crate::sift::{Descriptor, Keypoint, DESCRIPTOR_LEN};

/// Spatial grid width in bins.
const GRID: usize = 4;
const ORI_BINS: usize = 8;
/// Width of one spatial bin in units of the keypoint scale.
const BIN_WIDTH_FACTOR: f64 = 3.0;
/// Per-element clamp applied after the first normalization.
const CLAMP: f64 = 0.2;

pub(crate) struct WindowGeometry {
    pub x0: isize,
    pub y0: isize,
    pub radius: isize,
    pub bin_width: f64,
}

pub(crate) fn window_geometry(kp: &Keypoint) -> WindowGeometry {
    let scale = (1u64 << kp.octave) as f64;
    let sigma_octave = kp.sigma / scale;
    let bin_width = BIN_WIDTH_FACTOR * sigma_octave;
    // Extent of a rotated (GRID+1) x (GRID+1) bin window.
    let radius =
        (bin_width * std::f64::consts::SQRT_2 * (GRID as f64 + 1.0) * 0.5).round() as isize;
    WindowGeometry {
        x0: (kp.x / scale).round() as isize,
        y0: (kp.y / scale).round() as isize,
        radius,
        bin_width,
    }
}

/// Whether the descriptor window (including the gradient border) fits the
/// keypoint's pyramid level. Keypoints failing this are dropped.
pub(crate) fn descriptor_fits(kp: &Keypoint, pyr: &GaussianPyramid) -> bool {
    let img = &pyr.octaves[kp.octave][kp.scale_index];
    let g = window_geometry(kp);
    let (w, h) = (img.width as isize, img.height as isize);
    g.x0 - g.radius >= 1 && g.x0 + g.radius < w - 1 && g.y0 - g.radius >= 1 && g.y0 + g.radius < h - 1
}

/// Computes the descriptor for an oriented keypoint; None when the sampling
/// window does not fit inside the image, in which case the keypoint is
/// dropped.
pub fn compute_descriptor(kp: &Keypoint, pyr: &GaussianPyramid) -> Option<Descriptor> {
    if !descriptor_fits(kp, pyr) {
        return None;
    }
    let gradients = pyr.gradient_map(kp.octave, kp.scale_index);
    let g = window_geometry(kp);
    let (x0, y0, radius) = (g.x0, g.y0, g.radius);

    let cos_t = (kp.orientation.cos() / g.bin_width) as f32;
    let sin_t = (kp.orientation.sin() / g.bin_width) as f32;
    let theta = kp.orientation as f32;
    let bins_per_rad = ORI_BINS as f32 / TAU;
    // Gaussian window sigma of half the descriptor width, expressed on the
    // unrotated pixel offsets: exp(-(dx^2+dy^2) / (8 * bin_width^2)),
    // separable into a one-sided lookup per axis.
    let lut = gaussian_lut(radius as usize, 1.0 / (0.5 * 16.0 * (g.bin_width * g.bin_width) as f32));

    // Padded spatial accumulator: one guard bin on each side.
    const PAD: usize = GRID + 2;
    let mut hist = [0.0f32; PAD * PAD * ORI_BINS];

    let w = gradients.width;
    for dy in -radius..=radius {
        // The rotated window intersects this row in a dx interval; solving
        // the bin bounds analytically skips most of the enclosing square.
        let Some((dx_lo, dx_hi)) = row_span(dy as f32, cos_t, sin_t, radius) else {
            continue;
        };
        let y = (y0 + dy) as usize;
        let mag_row = &gradients.magnitude[y * w..(y + 1) * w];
        let theta_row = &gradients.theta[y * w..(y + 1) * w];
        let wy = lut[dy.unsigned_abs()];
        let dyf = dy as f32;
        for dx in dx_lo..=dx_hi {
            let dxf = dx as f32;
            // Rotate into the keypoint frame, in units of spatial bins.
            let c_rot = dxf * cos_t + dyf * sin_t;
            let r_rot = -dxf * sin_t + dyf * cos_t;
            let rbin = r_rot + (GRID as f32) / 2.0 - 0.5;
            let cbin = c_rot + (GRID as f32) / 2.0 - 0.5;
            if !(rbin > -1.0 && rbin < GRID as f32 && cbin > -1.0 && cbin < GRID as f32) {
                continue;
            }
            let x = (x0 + dx) as usize;
            let mag = mag_row[x];
            if mag == 0.0 {
                continue;
            }
            let mut rel = theta_row[x] - theta;
            if rel < 0.0 {
                rel += TAU;
            }
            let obin = rel * bins_per_rad;
            let weight = wy * lut[dx.unsigned_abs()];
            trilinear_accumulate(&mut hist, rbin, cbin, obin, mag * weight);
        }
    }

    // Read the interior of the padded accumulator.
    let mut raw = [0.0f64; DESCRIPTOR_LEN];
    for r in 0..GRID {
        for c in 0..GRID {
            for o in 0..ORI_BINS {
                raw[(r * GRID + c) * ORI_BINS + o] =
                    hist[((r + 1) * PAD + (c + 1)) * ORI_BINS + o] as f64;
            }
        }
    }
    Some(Descriptor { values: finalize(&raw) })
}

/// Conservative dx interval (within +/- radius) where both rotated-bin
/// constraints `-2.5 < c_rot < 2.5` and `-2.5 < r_rot < 2.5` can hold for a
/// fixed dy. The exact per-sample check stays in the loop; this only prunes
/// rows of the enclosing square that cannot contribute.
#[inline]
fn row_span(dyf: f32, cos_t: f32, sin_t: f32, radius: isize) -> Option<(isize, isize)> {
    const HALF: f32 = GRID as f32 / 2.0 + 0.5;
    let mut lo = -(radius as f32);
    let mut hi = radius as f32;
    // c_rot = cos_t * dx + sin_t * dy
    if cos_t.abs() > 1e-12 {
        let a = (-HALF - sin_t * dyf) / cos_t;
        let b = (HALF - sin_t * dyf) / cos_t;
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    } else if (sin_t * dyf).abs() >= HALF {
        return None;
    }
    // r_rot = -sin_t * dx + cos_t * dy
    if sin_t.abs() > 1e-12 {
        let a = (cos_t * dyf - HALF) / sin_t;
        let b = (cos_t * dyf + HALF) / sin_t;
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    } else if (cos_t * dyf).abs() >= HALF {
        return None;
    }
    let lo = (lo.floor() - 1.0).max(-(radius as f32)) as isize;
    let hi = (hi.ceil() + 1.0).min(radius as f32) as isize;
    (lo <= hi).then_some((lo, hi))
}

#[inline]
fn trilinear_accumulate(hist: &mut [f32], rbin: f32, cbin: f32, obin: f32, value: f32) {
    const PAD: usize = GRID + 2;
    let r0 = rbin.floor();
    let c0 = cbin.floor();
    let o0 = obin.floor();
    let dr = rbin - r0;
    let dc = cbin - c0;
    let dofr = obin - o0;
    // Base indices into the padded grid (guard bin shifts by +1).
    let ri = (r0 as isize + 1) as usize;
    let ci = (c0 as isize + 1) as usize;
    let oi = o0 as usize % ORI_BINS;
    let oj = (oi + 1) % ORI_BINS;
    for (rb, rw) in [(ri, 1.0 - dr), (ri + 1, dr)] {
        for (cb, cw) in [(ci, 1.0 - dc), (ci + 1, dc)] {
            let base = (rb * PAD + cb) * ORI_BINS;
            let w = value * rw * cw;
            hist[base + oi] += w * (1.0 - dofr);
            hist[base + oj] += w * dofr;
        }
    }
}

/// Normalize to unit length, clamp elements at 0.2, renormalize.
pub(crate) fn finalize(raw: &[f64; DESCRIPTOR_LEN]) -> [f32; DESCRIPTOR_LEN] {
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let clamped: Vec<f64> = raw.iter().map(|v| (v / norm).min(CLAMP)).collect();
    let norm2 = clamped.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let mut out = [0.0f32; DESCRIPTOR_LEN];
    for (o, v) in out.iter_mut().zip(clamped.iter()) {
        *o = (v / norm2) as f32;
    }
    out
}
