//! Displacement statistics over the trajectory window and the
//! dual-threshold motion-state decision.

use serde::{Deserialize, Serialize};

use crate::tracking::Trajectory;

/// Classified motion state of the vehicle for one frame.
///
/// `Indeterminate` is the fail-safe answer when too few valid trajectories
/// exist to decide; it is deliberately distinct from `Static` so that a
/// featureless frame can never suppress a braking decision by silently
/// reading as "standing still".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionState {
    Static,
    Vibration,
    Moving,
    Indeterminate,
}

impl std::fmt::Display for MotionState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MotionState::Static => "static",
            MotionState::Vibration => "vibration",
            MotionState::Moving => "moving",
            MotionState::Indeterminate => "indeterminate",
        };
        f.write_str(s)
    }
}

/// How the per-axis spreads are folded into the single sigma the decision
/// compares against the vibration threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SdCombine {
    /// max(sigma_x, sigma_y): jitter on either axis counts.
    #[default]
    Max,
    /// Arithmetic mean of the two spreads.
    Mean,
    /// Euclidean norm sqrt(sigma_x^2 + sigma_y^2).
    Norm,
}

impl SdCombine {
    pub fn combine(self, sd_x: f64, sd_y: f64) -> f64 {
        match self {
            SdCombine::Max => sd_x.max(sd_y),
            SdCombine::Mean => 0.5 * (sd_x + sd_y),
            SdCombine::Norm => (sd_x * sd_x + sd_y * sd_y).sqrt(),
        }
    }
}

/// Decision thresholds in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecisionThresholds {
    /// Group mean displacement above which the scene is moving.
    pub cumulative_thresh: f64,
    /// Displacement spread above which a non-moving scene is vibrating.
    pub sd_thresh: f64,
}

impl Default for DecisionThresholds {
    fn default() -> Self {
        Self { cumulative_thresh: 2.05, sd_thresh: 0.23 }
    }
}

impl DecisionThresholds {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.cumulative_thresh > 0.0 && self.sd_thresh > 0.0) {
            return Err(crate::Error::Config("decision thresholds must be positive".into()));
        }
        Ok(())
    }
}

/// Aggregate displacement statistics of the valid trajectories in the
/// current window.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WindowStats {
    /// Mean of the per-trajectory start-to-end displacement magnitudes.
    pub mean_disp: f64,
    /// Population standard deviation of the signed x displacements.
    pub sd_x: f64,
    /// Population standard deviation of the signed y displacements.
    pub sd_y: f64,
    pub mean_dx: f64,
    pub mean_dy: f64,
    pub n_tracks: usize,
}

/// Start-to-end displacement magnitude of one trajectory; intermediate
/// positions do not matter.
///
/// Contract: the trajectory must hold at least two positions.
pub fn trajectory_displacement(t: &Trajectory) -> f64 {
    assert!(t.len() >= 2, "displacement undefined for a single-position trajectory");
    let (xs, ys) = t.start();
    let (xe, ye) = t.endpoint();
    let dx = xe - xs;
    let dy = ye - ys;
    (dx * dx + dy * dy).sqrt()
}

/// Computes the window statistics over the valid trajectories. An empty
/// input yields the all-zero statistics with `n_tracks = 0`.
pub fn compute_window_stats<'a, I>(tracks: I) -> WindowStats
where
    I: IntoIterator<Item = &'a Trajectory>,
{
    // Welford accumulation: numerically stable and exactly zero spread when
    // every trajectory displaces identically.
    let mut m = 0usize;
    let (mut mean_s, mut mean_x, mut mean_y) = (0.0f64, 0.0f64, 0.0f64);
    let (mut m2x, mut m2y) = (0.0f64, 0.0f64);
    for t in tracks {
        let (xs, ys) = t.start();
        let (xe, ye) = t.endpoint();
        let dx = xe - xs;
        let dy = ye - ys;
        m += 1;
        let n = m as f64;
        mean_s += ((dx * dx + dy * dy).sqrt() - mean_s) / n;
        let delta_x = dx - mean_x;
        mean_x += delta_x / n;
        m2x += delta_x * (dx - mean_x);
        let delta_y = dy - mean_y;
        mean_y += delta_y / n;
        m2y += delta_y * (dy - mean_y);
    }
    if m == 0 {
        return WindowStats::default();
    }
    let n = m as f64;
    WindowStats {
        mean_disp: mean_s,
        sd_x: (m2x / n).max(0.0).sqrt(),
        sd_y: (m2y / n).max(0.0).sqrt(),
        mean_dx: mean_x,
        mean_dy: mean_y,
        n_tracks: m,
    }
}

/// Dual-threshold state decision.
///
/// Fewer than `min_tracks` trajectories give `Indeterminate`; otherwise the
/// scene is `Moving` when the mean displacement exceeds the cumulative
/// threshold, `Vibration` when the combined spread exceeds the sd
/// threshold, else `Static`. Boundary equality binds to the non-moving
/// branches.
pub fn classify(
    stats: &WindowStats,
    thresholds: &DecisionThresholds,
    min_tracks: usize,
    sd_combine: SdCombine,
) -> MotionState {
    if stats.n_tracks < min_tracks {
        return MotionState::Indeterminate;
    }
    if stats.mean_disp > thresholds.cumulative_thresh {
        return MotionState::Moving;
    }
    if sd_combine.combine(stats.sd_x, stats.sd_y) > thresholds.sd_thresh {
        return MotionState::Vibration;
    }
    MotionState::Static
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracking::Trajectory;
    use proptest::prelude::*;

    fn track(points: &[(f64, f64)]) -> Trajectory {
        Trajectory::from_positions(0, points)
    }

    #[test]
    fn displacement_is_endpoint_distance() {
        assert_eq!(trajectory_displacement(&track(&[(0.0, 0.0), (3.0, 4.0)])), 5.0);
        assert_eq!(trajectory_displacement(&track(&[(2.0, 2.0), (2.0, 2.0)])), 0.0);
        let zigzag = track(&[(0.0, 0.0), (10.0, 0.0), (1.0, 1.0)]);
        assert!((trajectory_displacement(&zigzag) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    #[should_panic(expected = "displacement undefined")]
    fn single_position_violates_contract() {
        trajectory_displacement(&track(&[(1.0, 1.0)]));
    }

    #[test]
    fn stats_match_hand_arithmetic() {
        let t1 = track(&[(0.0, 0.0), (1.0, 0.0)]);
        let t2 = track(&[(5.0, 5.0), (8.0, 5.0)]);
        let stats = compute_window_stats([&t1, &t2]);
        assert!((stats.mean_disp - 2.0).abs() < 1e-12);
        assert!((stats.mean_dx - 2.0).abs() < 1e-12);
        assert!((stats.sd_x - 1.0).abs() < 1e-12);
        assert_eq!(stats.sd_y, 0.0);
        assert_eq!(stats.n_tracks, 2);
    }

    #[test]
    fn single_track_has_zero_spread() {
        let t = track(&[(0.0, 0.0), (3.0, 4.0)]);
        let stats = compute_window_stats([&t]);
        assert!((stats.mean_disp - 5.0).abs() < 1e-12);
        assert_eq!(stats.sd_x, 0.0);
        assert_eq!(stats.sd_y, 0.0);
    }

    #[test]
    fn empty_input_yields_zero_stats() {
        let stats = compute_window_stats(std::iter::empty());
        assert_eq!(stats, WindowStats::default());
    }

    fn stats(mean_disp: f64, sd_x: f64, sd_y: f64, n: usize) -> WindowStats {
        WindowStats { mean_disp, sd_x, sd_y, mean_dx: 0.0, mean_dy: 0.0, n_tracks: n }
    }

    #[test]
    fn classify_matches_decision_matrix() {
        let th = DecisionThresholds::default();
        assert_eq!(classify(&stats(3.0, 0.0, 0.0, 10), &th, 5, SdCombine::Max), MotionState::Moving);
        assert_eq!(
            classify(&stats(1.0, 0.5, 0.1, 10), &th, 5, SdCombine::Max),
            MotionState::Vibration
        );
        // Boundary equality stays non-moving / non-vibration.
        assert_eq!(classify(&stats(2.05, 0.0, 0.0, 10), &th, 5, SdCombine::Max), MotionState::Static);
        assert_eq!(classify(&stats(1.0, 0.23, 0.23, 10), &th, 5, SdCombine::Max), MotionState::Static);
    }

    #[test]
    fn too_few_tracks_is_indeterminate() {
        let th = DecisionThresholds::default();
        assert_eq!(
            classify(&stats(10.0, 5.0, 5.0, 4), &th, 5, SdCombine::Max),
            MotionState::Indeterminate
        );
        assert_eq!(classify(&stats(0.0, 0.0, 0.0, 0), &th, 5, SdCombine::Max), MotionState::Indeterminate);
    }

    #[test]
    fn sd_combine_modes() {
        assert_eq!(SdCombine::Max.combine(0.3, 0.1), 0.3);
        assert_eq!(SdCombine::Mean.combine(0.3, 0.1), 0.2);
        assert!((SdCombine::Norm.combine(3.0, 4.0) - 5.0).abs() < 1e-12);
    }

    prop_compose! {
        fn arb_track()(sx in -50.0f64..50.0, sy in -50.0f64..50.0,
                       dx in -10.0f64..10.0, dy in -10.0f64..10.0) -> Vec<(f64, f64)> {
            vec![(sx, sy), (sx + dx * 0.5, sy + dy * 0.5), (sx + dx, sy + dy)]
        }
    }

    proptest! {
        #[test]
        fn stats_are_permutation_invariant(tracks in prop::collection::vec(arb_track(), 1..20), seed in 0u64..1000) {
            let owned: Vec<Trajectory> = tracks.iter().map(|p| Trajectory::from_positions(0, p)).collect();
            let base = compute_window_stats(owned.iter());
            let mut shuffled: Vec<&Trajectory> = owned.iter().collect();
            // Deterministic shuffle driven by the seed.
            let mut state = seed;
            for i in (1..shuffled.len()).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (state >> 33) as usize % (i + 1);
                shuffled.swap(i, j);
            }
            let permuted = compute_window_stats(shuffled.into_iter());
            prop_assert!((base.mean_disp - permuted.mean_disp).abs() < 1e-9);
            prop_assert!((base.sd_x - permuted.sd_x).abs() < 1e-9);
            prop_assert!((base.sd_y - permuted.sd_y).abs() < 1e-9);
        }

        #[test]
        fn stats_scale_linearly(tracks in prop::collection::vec(arb_track(), 1..20), lambda in 0.1f64..10.0) {
            let base: Vec<Trajectory> = tracks.iter().map(|p| Trajectory::from_positions(0, p)).collect();
            let scaled: Vec<Trajectory> = tracks
                .iter()
                .map(|p| {
                    let pts: Vec<(f64, f64)> = p.iter().map(|&(x, y)| (x * lambda, y * lambda)).collect();
                    Trajectory::from_positions(0, &pts)
                })
                .collect();
            let a = compute_window_stats(base.iter());
            let b = compute_window_stats(scaled.iter());
            let tol = 1e-9 * (1.0 + a.mean_disp.abs() * lambda);
            prop_assert!((a.mean_disp * lambda - b.mean_disp).abs() < tol);
            prop_assert!((a.sd_x * lambda - b.sd_x).abs() < tol);
            prop_assert!((a.sd_y * lambda - b.sd_y).abs() < tol);
        }

        #[test]
        fn increasing_mean_disp_never_leaves_moving(disp in 0.0f64..10.0, extra in 0.0f64..10.0,
                                                    sd in 0.0f64..1.0) {
            let th = DecisionThresholds::default();
            let lo = classify(&stats(disp, sd, sd, 10), &th, 5, SdCombine::Max);
            let hi = classify(&stats(disp + extra, sd, sd, 10), &th, 5, SdCombine::Max);
            if lo == MotionState::Moving {
                prop_assert_eq!(hi, MotionState::Moving);
            }
        }

        #[test]
        fn rigid_motion_never_reads_as_vibration(kx in -10240i64..10240, ky in -10240i64..10240,
                                                 n in 5usize..40) {
            // Every trajectory displaces identically. Dyadic displacements on
            // small integer starts keep the position arithmetic exact, so the
            // per-trajectory displacements are bitwise equal.
            let dx = kx as f64 / 1024.0;
            let dy = ky as f64 / 1024.0;
            let tracks: Vec<Trajectory> = (0..n)
                .map(|i| {
                    let sx = 3.0 * i as f64;
                    Trajectory::from_positions(i as u64, &[(sx, 1.0), (sx + dx, 1.0 + dy)])
                })
                .collect();
            let s = compute_window_stats(tracks.iter());
            prop_assert_eq!(s.sd_x, 0.0);
            prop_assert_eq!(s.sd_y, 0.0);
            let state = classify(&s, &DecisionThresholds::default(), 5, SdCombine::Max);
            prop_assert_ne!(state, MotionState::Vibration);
        }
    }
}
