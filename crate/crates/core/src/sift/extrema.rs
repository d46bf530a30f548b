//! DoG extremum scanning, subpixel refinement, contrast and edge rejection.

use crate::sift::pyramid::{DogPyramid, ImageF32};
use crate::sift::{compare_for_cap, Keypoint, SiftParams};

/// Re-localization attempts before a drifting candidate is discarded.
const MAX_REFINE_STEPS: usize = 5;

/// Candidate pre-cull during the scan, relative to the final contrast
/// threshold. Interpolation can raise |DoG| somewhat but not double it, so
/// half the threshold is a safe gate.
const PREFILTER_FACTOR: f64 = 0.5;

struct Candidate {
    octave: usize,
    level: usize,
    x: usize,
    y: usize,
}

/// Detects keypoints in the DoG pyramid: 26-neighborhood extrema refined by
/// 3-D quadratic interpolation, filtered by interpolated contrast and the
/// principal-curvature edge test, sorted by response descending and
/// truncated to `max_features`.
pub fn detect_keypoints(dog: &DogPyramid, params: &SiftParams) -> Vec<Keypoint> {
    let prefilter = (PREFILTER_FACTOR * params.contrast_threshold) as f32;
    let mut keypoints = Vec::new();
    for (octave, levels) in dog.octaves.iter().enumerate() {
        for level in 1..levels.len() - 1 {
            scan_level(dog, octave, level, prefilter, |cand| {
                if let Some(kp) = refine_candidate(dog, cand, params) {
                    keypoints.push(kp);
                }
            });
        }
    }
    keypoints.sort_by(compare_for_cap);
    keypoints.truncate(params.max_features);
    keypoints
}

/// Scans one DoG level for 26-neighborhood extrema above the pre-cull
/// threshold and feeds candidates to `emit`.
fn scan_level(
    dog: &DogPyramid,
    octave: usize,
    level: usize,
    prefilter: f32,
    mut emit: impl FnMut(Candidate),
) {
    let below = &dog.octaves[octave][level - 1];
    let cur = &dog.octaves[octave][level];
    let above = &dog.octaves[octave][level + 1];
    let (w, h) = (cur.width, cur.height);
    if w < 3 || h < 3 {
        return;
    }
    for y in 1..h - 1 {
        // Nine row slices around (.., y); same level first since it rejects
        // most candidates cheapest.
        let rows = [
            cur.row(y),
            cur.row(y - 1),
            cur.row(y + 1),
            below.row(y),
            below.row(y - 1),
            below.row(y + 1),
            above.row(y),
            above.row(y - 1),
            above.row(y + 1),
        ];
        let center = rows[0];
        for x in 1..w - 1 {
            let v = center[x];
            if !(v >= prefilter || v <= -prefilter) {
                continue;
            }
            let is_extremum = if v >= 0.0 {
                rows.iter().all(|r| v >= r[x - 1] && v >= r[x] && v >= r[x + 1])
            } else {
                rows.iter().all(|r| v <= r[x - 1] && v <= r[x] && v <= r[x + 1])
            };
            if is_extremum {
                emit(Candidate { octave, level, x, y });
            }
        }
    }
}

/// Quadratic refinement in (x, y, scale). Returns None when the candidate
/// drifts out of bounds, fails to converge, or fails the contrast or edge
/// tests.
fn refine_candidate(dog: &DogPyramid, cand: Candidate, params: &SiftParams) -> Option<Keypoint> {
    let levels = &dog.octaves[cand.octave];
    let (w, h) = (levels[0].width, levels[0].height);
    let max_level = levels.len() - 2;

    let (mut x, mut y, mut level) = (cand.x, cand.y, cand.level);
    let mut offset = [0.0f64; 3];
    let mut converged = false;
    for _ in 0..MAX_REFINE_STEPS {
        let d = Derivatives::at(levels, level, x, y);
        offset = d.solve_offset()?;
        if offset.iter().all(|o| o.abs() <= 0.5) {
            converged = true;
            break;
        }
        x = (x as isize + round_step(offset[0])) as usize;
        y = (y as isize + round_step(offset[1])) as usize;
        level = (level as isize + round_step(offset[2])) as usize;
        if level < 1 || level > max_level || x < 1 || x >= w - 1 || y < 1 || y >= h - 1 {
            return None;
        }
    }
    if !converged {
        return None;
    }

    let d = Derivatives::at(levels, level, x, y);
    let value = d.value + 0.5 * (d.dx * offset[0] + d.dy * offset[1] + d.ds * offset[2]);
    if value.abs() < params.contrast_threshold {
        return None;
    }

    // Edge rejection on the 2x2 spatial Hessian: tr^2/det >= (r+1)^2/r, with
    // non-positive determinants (saddles) always rejected. The comparison is
    // kept in multiplied form so it stays valid for det <= 0.
    let tr = d.dxx + d.dyy;
    let det = d.dxx * d.dyy - d.dxy * d.dxy;
    let r = params.edge_ratio;
    if tr * tr * r >= det * (r + 1.0) * (r + 1.0) {
        return None;
    }

    let scale_factor = (1u64 << cand.octave) as f64;
    let s = dog.scales_per_octave as f64;
    let sigma_octave = params.sigma0 * 2f64.powf((level as f64 + offset[2]) / s);
    Some(Keypoint {
        x: (x as f64 + offset[0]) * scale_factor,
        y: (y as f64 + offset[1]) * scale_factor,
        octave: cand.octave,
        scale_index: level,
        sigma: sigma_octave * scale_factor,
        orientation: 0.0,
        response: value.abs(),
    })
}

#[inline]
fn round_step(v: f64) -> isize {
    // Plain rounding of the proposed move, capped to one cell per step.
    v.round().clamp(-1.0, 1.0) as isize
}

/// First- and second-order finite differences of the DoG at a lattice point.
struct Derivatives {
    value: f64,
    dx: f64,
    dy: f64,
    ds: f64,
    dxx: f64,
    dyy: f64,
    dss: f64,
    dxy: f64,
    dxs: f64,
    dys: f64,
}

impl Derivatives {
    fn at(levels: &[ImageF32], level: usize, x: usize, y: usize) -> Self {
        let p = &levels[level - 1];
        let c = &levels[level];
        let n = &levels[level + 1];
        let v = |img: &ImageF32, dx: isize, dy: isize| {
            img.at((x as isize + dx) as usize, (y as isize + dy) as usize) as f64
        };
        let value = v(c, 0, 0);
        Self {
            value,
            dx: 0.5 * (v(c, 1, 0) - v(c, -1, 0)),
            dy: 0.5 * (v(c, 0, 1) - v(c, 0, -1)),
            ds: 0.5 * (v(n, 0, 0) - v(p, 0, 0)),
            dxx: v(c, 1, 0) + v(c, -1, 0) - 2.0 * value,
            dyy: v(c, 0, 1) + v(c, 0, -1) - 2.0 * value,
            dss: v(n, 0, 0) + v(p, 0, 0) - 2.0 * value,
            dxy: 0.25 * (v(c, 1, 1) - v(c, -1, 1) - v(c, 1, -1) + v(c, -1, -1)),
            dxs: 0.25 * (v(n, 1, 0) - v(n, -1, 0) - v(p, 1, 0) + v(p, -1, 0)),
            dys: 0.25 * (v(n, 0, 1) - v(n, 0, -1) - v(p, 0, 1) + v(p, 0, -1)),
        }
    }

    /// Solves H * delta = -g for the 3x3 Hessian; None when H is singular.
    fn solve_offset(&self) -> Option<[f64; 3]> {
        let h = [
            [self.dxx, self.dxy, self.dxs],
            [self.dxy, self.dyy, self.dys],
            [self.dxs, self.dys, self.dss],
        ];
        let g = [self.dx, self.dy, self.ds];
        let det = h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1])
            - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
            + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
        if det.abs() < 1e-14 {
            return None;
        }
        let inv_det = 1.0 / det;
        // Cramer's rule, column substitution.
        let mut out = [0.0f64; 3];
        for col in 0..3 {
            let mut m = h;
            for row in 0..3 {
                m[row][col] = -g[row];
            }
            let d = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            out[col] = d * inv_det;
        }
        Some(out)
    }
}
