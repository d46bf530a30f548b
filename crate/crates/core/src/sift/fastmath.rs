//! Small fixed-polynomial helpers for the hot gradient loops.

use std::f32::consts::{FRAC_PI_2, PI};

/// Polynomial atan2 returning radians in [0, 2*pi).
///
/// Maximum error is about 0.005 rad, far below the 10-degree orientation
/// bin width. Being a fixed polynomial it is bit-deterministic everywhere.
#[inline]
pub fn fast_atan2(y: f32, x: f32) -> f32 {
    let ax = x.abs();
    let ay = y.abs();
    let mut a = ax.min(ay) / ax.max(ay).max(f32::MIN_POSITIVE);
    let s = a * a;
    // Minimax fit of atan on [0, 1]. The quadrant fixups are selects, not
    // branches, so gradient directions cannot stall the pipeline.
    a *= 0.999_787_8 + s * (-0.325_808_4 + s * (0.155_578_65 + s * -0.044_326_556));
    a = if ay > ax { FRAC_PI_2 - a } else { a };
    a = if x < 0.0 { PI - a } else { a };
    a = if y < 0.0 { 2.0 * PI - a } else { a };
    // Guard the wrap: -0.0 inputs can land exactly on 2*pi.
    if a >= 2.0 * PI {
        a = 0.0;
    }
    a
}

/// One-sided Gaussian lookup table: `lut[i] = exp(-(i*i) * scale)`, so a
/// radially symmetric weight factors into `lut[|dx|] * lut[|dy|]`.
pub fn gaussian_lut(radius: usize, scale: f32) -> Vec<f32> {
    (0..=radius).map(|i| (-((i * i) as f32) * scale).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_atan2_matches_reference() {
        let mut worst = 0.0f64;
        for i in 0..720 {
            let theta = i as f64 * std::f64::consts::TAU / 720.0;
            let (y, x) = (theta.sin() as f32 * 3.0, theta.cos() as f32 * 3.0);
            let approx = fast_atan2(y, x) as f64;
            let exact = (y as f64).atan2(x as f64).rem_euclid(std::f64::consts::TAU);
            let mut diff = (approx - exact).abs();
            diff = diff.min(std::f64::consts::TAU - diff);
            worst = worst.max(diff);
        }
        assert!(worst < 0.006, "worst atan2 error {worst}");
    }

    #[test]
    fn fast_atan2_range() {
        for &(y, x) in
            &[(0.0f32, 0.0f32), (-0.0, 1.0), (1.0, -0.0), (-1e-30, 1.0), (0.0, -1.0), (-1.0, 0.0)]
        {
            let a = fast_atan2(y, x);
            assert!((0.0..2.0 * PI).contains(&a), "atan2({y},{x}) = {a}");
        }
    }

    #[test]
    fn gaussian_lut_factors_radial_weight() {
        let scale = 0.037f32;
        let lut = gaussian_lut(20, scale);
        for dy in 0..=20usize {
            for dx in 0..=20usize {
                let joint = (-((dx * dx + dy * dy) as f32) * scale).exp();
                let split = lut[dx] * lut[dy];
                assert!((joint - split).abs() < 1e-6);
            }
        }
    }
}
