//! RANSAC estimation of a 2-D affine transform between matched point sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimal sample size for an exact affine solve.
const SAMPLE_SIZE: usize = 3;
/// Samples whose source triangle area falls below this are considered
/// collinear and rejected.
const MIN_TRIANGLE_AREA: f64 = 1.0;
/// Attempts at drawing a non-degenerate sample within one iteration.
const SAMPLE_ATTEMPTS: usize = 64;

/// Row-major 2x3 affine transform `[a b tx; c d ty]` mapping previous-frame
/// points to current-frame points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineModel {
    pub a: f64,
    pub b: f64,
    pub tx: f64,
    pub c: f64,
    pub d: f64,
    pub ty: f64,
}

impl AffineModel {
    #[inline]
    pub fn apply(&self, p: (f64, f64)) -> (f64, f64) {
        (self.a * p.0 + self.b * p.1 + self.tx, self.c * p.0 + self.d * p.1 + self.ty)
    }

    /// Determinant of the linear part.
    pub fn linear_det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacParams {
    /// Reprojection error below which a correspondence counts as an inlier.
    pub inlier_threshold: f64,
    /// Target probability of having drawn at least one outlier-free sample.
    pub confidence: f64,
    pub max_iterations: usize,
    /// Minimum correspondences to attempt estimation, and the minimum
    /// consensus size for success.
    pub min_matches: usize,
    pub rng_seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            inlier_threshold: 3.0,
            confidence: 0.995,
            max_iterations: 2000,
            min_matches: 8,
            rng_seed: 0x5eed,
        }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.inlier_threshold > 0.0) {
            return Err(Error::Config("ransac.inlier_threshold must be positive".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Config("ransac.confidence must lie in (0, 1)".into()));
        }
        if self.max_iterations == 0 || self.min_matches < SAMPLE_SIZE {
            return Err(Error::Config(
                "ransac needs max_iterations >= 1 and min_matches >= 3".into(),
            ));
        }
        Ok(())
    }
}

/// Estimates the affine transform `prev -> curr` with seeded RANSAC.
///
/// Returns the least-squares refit over the best consensus set and the
/// per-correspondence inlier mask of that refit. Fully deterministic for a
/// given seed.
pub fn ransac_affine(
    prev: &[(f64, f64)],
    curr: &[(f64, f64)],
    params: &RansacParams,
) -> Result<(AffineModel, Vec<bool>)> {
    assert_eq!(prev.len(), curr.len(), "point lists must be parallel");
    params.validate()?;
    let n = prev.len();
    let required = params.min_matches.max(SAMPLE_SIZE);
    if n < required {
        return Err(Error::InsufficientMatches { found: n, required });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let thresh2 = params.inlier_threshold * params.inlier_threshold;
    let mut best_mask: Option<Vec<bool>> = None;
    let mut best_count = 0usize;
    let mut needed_iters = params.max_iterations;

    let mut it = 0usize;
    while it < needed_iters {
        it += 1;
        let Some(sample) = draw_sample(&mut rng, prev, n) else {
            continue;
        };
        let pairs: Vec<((f64, f64), (f64, f64))> =
            sample.iter().map(|&i| (prev[i], curr[i])).collect();
        let Some(model) = fit_affine(&pairs) else {
            continue;
        };
        let mut mask = vec![false; n];
        let mut count = 0usize;
        for i in 0..n {
            let (px, py) = model.apply(prev[i]);
            let dx = px - curr[i].0;
            let dy = py - curr[i].1;
            if dx * dx + dy * dy < thresh2 {
                mask[i] = true;
                count += 1;
            }
        }
        if count > best_count {
            best_count = count;
            best_mask = Some(mask);
            // Adaptive bound: enough iterations that a clean sample was
            // drawn with the requested confidence.
            let w = count as f64 / n as f64;
            let denom = (1.0 - w.powi(SAMPLE_SIZE as i32)).max(1e-12).ln();
            if denom < 0.0 {
                let bound = ((1.0 - params.confidence).ln() / denom).ceil();
                needed_iters = (bound.max(1.0) as usize).min(params.max_iterations);
            }
        }
    }

    let mask = best_mask.filter(|_| best_count >= params.min_matches).ok_or(Error::DegenerateGeometry)?;

    // Least-squares refit over the consensus set, then the mask is
    // recomputed under the refit model.
    let pairs: Vec<((f64, f64), (f64, f64))> = mask
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| (prev[i], curr[i]))
        .collect();
    let model = fit_affine(&pairs).ok_or(Error::DegenerateGeometry)?;
    if model.linear_det().abs() <= 1e-8 {
        return Err(Error::DegenerateGeometry);
    }
    let mut final_mask = vec![false; n];
    let mut final_count = 0usize;
    for i in 0..n {
        let (px, py) = model.apply(prev[i]);
        let dx = px - curr[i].0;
        let dy = py - curr[i].1;
        if dx * dx + dy * dy < thresh2 {
            final_mask[i] = true;
            final_count += 1;
        }
    }
    if final_count < params.min_matches {
        return Err(Error::DegenerateGeometry);
    }
    Ok((model, final_mask))
}

/// Draws three distinct indices whose source points span a triangle of at
/// least `MIN_TRIANGLE_AREA`.
fn draw_sample(rng: &mut ChaCha8Rng, prev: &[(f64, f64)], n: usize) -> Option<[usize; 3]> {
    for _ in 0..SAMPLE_ATTEMPTS {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        let k = rng.gen_range(0..n);
        if i == j || j == k || i == k {
            continue;
        }
        let (x1, y1) = prev[i];
        let (x2, y2) = prev[j];
        let (x3, y3) = prev[k];
        let area = 0.5 * ((x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)).abs();
        if area >= MIN_TRIANGLE_AREA {
            return Some([i, j, k]);
        }
    }
    None
}

/// Least-squares affine fit through centered normal equations; exact for
/// three non-collinear pairs. None when the source points are degenerate.
fn fit_affine(pairs: &[((f64, f64), (f64, f64))]) -> Option<AffineModel> {
    let m = pairs.len() as f64;
    if pairs.len() < SAMPLE_SIZE {
        return None;
    }
    let (mut pxm, mut pym, mut qxm, mut qym) = (0.0, 0.0, 0.0, 0.0);
    for &((px, py), (qx, qy)) in pairs {
        pxm += px;
        pym += py;
        qxm += qx;
        qym += qy;
    }
    pxm /= m;
    pym /= m;
    qxm /= m;
    qym /= m;

    // Accumulate centered second moments.
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    let (mut sxu, mut syu, mut sxv, mut syv) = (0.0, 0.0, 0.0, 0.0);
    for &((px, py), (qx, qy)) in pairs {
        let dx = px - pxm;
        let dy = py - pym;
        let du = qx - qxm;
        let dv = qy - qym;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        sxu += dx * du;
        syu += dy * du;
        sxv += dx * dv;
        syv += dy * dv;
    }
    let det = sxx * syy - sxy * sxy;
    if det.abs() < 1e-12 {
        return None;
    }
    let a = (sxu * syy - syu * sxy) / det;
    let b = (syu * sxx - sxu * sxy) / det;
    let c = (sxv * syy - syv * sxy) / det;
    let d = (syv * sxx - sxv * sxy) / det;
    Some(AffineModel {
        a,
        b,
        c,
        d,
        tx: qxm - a * pxm - b * pym,
        ty: qym - c * pxm - d * pym,
    })
}
