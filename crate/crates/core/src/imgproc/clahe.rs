//! Contrast Limited Adaptive Histogram Equalization.
//!
//! The image is divided into a grid of tiles. Each tile gets its own
//! equalization lookup table built from a clipped histogram; the clipped
//! excess is redistributed uniformly over all bins. Per-pixel output is
//! bilinearly interpolated between the four nearest tile mappings so tile
//! boundaries do not produce blocking artifacts.

use crate::error::{Error, Result};
use crate::imgproc::GrayImage;

/// Applies CLAHE with a `tiles_x` x `tiles_y` grid.
///
/// `clip_limit` is relative to the uniform bin height: the per-bin clip is
/// `clip_limit * tile_pixels / 256`, floored at one count. Pass
/// `f64::INFINITY` to disable clipping, which with a 1x1 grid reduces to
/// plain global histogram equalization.
pub fn apply_clahe(
    img: &GrayImage,
    tiles_x: u32,
    tiles_y: u32,
    clip_limit: f64,
) -> Result<GrayImage> {
    if tiles_x == 0 || tiles_y == 0 {
        return Err(Error::Config("CLAHE tile grid must be at least 1x1".into()));
    }
    if !(clip_limit > 0.0) {
        return Err(Error::Config(format!("CLAHE clip limit must be positive, got {clip_limit}")));
    }
    let (w, h) = (img.width(), img.height());
    if w < tiles_x || h < tiles_y {
        return Err(Error::Dimension(format!(
            "image {w}x{h} smaller than CLAHE tile grid {tiles_x}x{tiles_y}"
        )));
    }

    let xs = tile_edges(w, tiles_x);
    let ys = tile_edges(h, tiles_y);

    // One 256-entry LUT per tile.
    let mut luts = vec![[0u8; 256]; (tiles_x * tiles_y) as usize];
    for ty in 0..tiles_y as usize {
        for tx in 0..tiles_x as usize {
            let (x0, x1) = (xs[tx], xs[tx + 1]);
            let (y0, y1) = (ys[ty], ys[ty + 1]);
            let mut hist = [0u32; 256];
            for y in y0..y1 {
                for &v in &img.row(y)[x0 as usize..x1 as usize] {
                    hist[v as usize] += 1;
                }
            }
            let area = ((x1 - x0) * (y1 - y0)) as f64;
            build_lut(&hist, area, clip_limit, &mut luts[ty * tiles_x as usize + tx]);
        }
    }

    // Bilinear interpolation between tile centers; pixels outside the
    // outermost centers clamp to the edge tile.
    let col = interp_table(&xs, w);
    let row = interp_table(&ys, h);

    let mut out = Vec::with_capacity(w as usize * h as usize);
    for y in 0..h {
        let (ty0, ty1, fy) = row[y as usize];
        let src = img.row(y);
        for x in 0..w {
            let (tx0, tx1, fx) = col[x as usize];
            let v = src[x as usize] as usize;
            let l00 = luts[ty0 * tiles_x as usize + tx0][v] as f64;
            let l01 = luts[ty0 * tiles_x as usize + tx1][v] as f64;
            let l10 = luts[ty1 * tiles_x as usize + tx0][v] as f64;
            let l11 = luts[ty1 * tiles_x as usize + tx1][v] as f64;
            let top = l00 + fx * (l01 - l00);
            let bot = l10 + fx * (l11 - l10);
            out.push((top + fy * (bot - top)).round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(w, h, out)
}

/// Tile boundaries: edge i sits at floor(i * extent / tiles).
fn tile_edges(extent: u32, tiles: u32) -> Vec<u32> {
    (0..=tiles)
        .map(|i| ((i as u64 * extent as u64) / tiles as u64) as u32)
        .collect()
}

fn build_lut(hist: &[u32; 256], area: f64, clip_limit: f64, lut: &mut [u8; 256]) {
    let limit = (clip_limit * area / 256.0).max(1.0);
    let mut clipped = [0.0f64; 256];
    let mut excess = 0.0f64;
    for (i, &c) in hist.iter().enumerate() {
        let c = c as f64;
        if c > limit {
            clipped[i] = limit;
            excess += c - limit;
        } else {
            clipped[i] = c;
        }
    }
    let bonus = excess / 256.0;
    let scale = 255.0 / area;
    let mut cum = 0.0f64;
    for i in 0..256 {
        cum += clipped[i] + bonus;
        lut[i] = (cum * scale).round().clamp(0.0, 255.0) as u8;
    }
}

/// For each pixel coordinate along one axis, the two tile indices to blend
/// and the blend fraction toward the second one.
fn interp_table(edges: &[u32], extent: u32) -> Vec<(usize, usize, f64)> {
    let tiles = edges.len() - 1;
    let centers: Vec<f64> = (0..tiles)
        .map(|i| (edges[i] as f64 + edges[i + 1] as f64 - 1.0) / 2.0)
        .collect();
    (0..extent as usize)
        .map(|p| {
            let p = p as f64;
            if p <= centers[0] {
                (0, 0, 0.0)
            } else if p >= centers[tiles - 1] {
                (tiles - 1, tiles - 1, 0.0)
            } else {
                // centers are strictly increasing, so the partition point exists
                let hi = centers.partition_point(|&c| c <= p);
                let lo = hi - 1;
                let f = (p - centers[lo]) / (centers[hi] - centers[lo]);
                (lo, hi, f)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn shannon_entropy(img: &GrayImage) -> f64 {
        let mut hist = [0u64; 256];
        for &v in img.data() {
            hist[v as usize] += 1;
        }
        let n = img.data().len() as f64;
        hist.iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.log2()
            })
            .sum()
    }

    /// Straight textbook global equalization, written independently of the
    /// tiled implementation: map = round(255 * cdf / N).
    fn global_equalize(img: &GrayImage) -> GrayImage {
        let mut hist = [0u64; 256];
        for &v in img.data() {
            hist[v as usize] += 1;
        }
        let n = img.data().len() as f64;
        let mut lut = [0u8; 256];
        let mut cum = 0u64;
        for i in 0..256 {
            cum += hist[i];
            lut[i] = (255.0 * cum as f64 / n).round() as u8;
        }
        let data = img.data().iter().map(|&v| lut[v as usize]).collect();
        GrayImage::new(img.width(), img.height(), data).unwrap()
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = GrayImage::filled(64, 48, 137).unwrap();
        let out = apply_clahe(&img, 8, 8, 2.0).unwrap();
        let first = out.data()[0];
        assert!(out.data().iter().all(|&v| v == first));
    }

    #[test]
    fn two_level_image_entropy_does_not_drop() {
        // Left half 64, right half 192; the boundary tiles interpolate
        // between differing mappings, which can only add distinct levels.
        let (w, h) = (96u32, 96u32);
        let mut data = Vec::new();
        for _y in 0..h {
            for x in 0..w {
                data.push(if x < w / 2 { 64 } else { 192 });
            }
        }
        let img = GrayImage::new(w, h, data).unwrap();
        let out = apply_clahe(&img, 8, 8, 2.0).unwrap();
        assert!(shannon_entropy(&out) >= shannon_entropy(&img));
    }

    #[test]
    fn output_range_is_preserved() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let data: Vec<u8> = (0..64 * 64).map(|_| rng.gen()).collect();
        let img = GrayImage::new(64, 64, data).unwrap();
        let out = apply_clahe(&img, 8, 8, 2.0).unwrap();
        // u8 storage already bounds the range; check dimensions survived.
        assert_eq!((out.width(), out.height()), (64, 64));
    }

    #[test]
    fn unclipped_single_tile_equals_global_equalization() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..4 {
            let data: Vec<u8> = (0..64 * 64).map(|_| rng.gen_range(10..=200)).collect();
            let img = GrayImage::new(64, 64, data).unwrap();
            let ours = apply_clahe(&img, 1, 1, f64::INFINITY).unwrap();
            let oracle = global_equalize(&img);
            assert_eq!(ours, oracle);
        }
    }

    #[test]
    fn image_smaller_than_grid_is_rejected() {
        let img = GrayImage::filled(4, 4, 0).unwrap();
        assert!(matches!(apply_clahe(&img, 8, 8, 2.0), Err(crate::Error::Dimension(_))));
    }
}
