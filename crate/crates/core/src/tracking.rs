//! Trajectory lifecycle over a sliding window: creation, update,
//! elimination and reset.
//!
//! Each RANSAC-verified match either extends the trajectory whose endpoint
//! sits within one pixel of the match's previous-frame point, or starts a
//! new trajectory at the current-frame point. Trajectories unmatched for
//! two consecutive frames are discarded.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::matching::Match;

/// Association gate between a trajectory endpoint and a match's
/// previous-frame point, in pixels.
const ASSOCIATION_RADIUS_PX: f64 = 1.0;

/// Consecutive unmatched frames after which a trajectory is discarded.
const MAX_MISSES: u8 = 2;

/// One tracked feature: its identity and the positions it visited inside
/// the sliding window, oldest first.
#[derive(Debug, Clone)]
pub struct Trajectory {
    id: u64,
    positions: VecDeque<(f64, f64)>,
    last_frame: u64,
    miss_count: u8,
}

impl Trajectory {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Earliest retained position.
    pub fn start(&self) -> (f64, f64) {
        *self.positions.front().expect("trajectory always holds a position")
    }

    /// Latest position.
    pub fn endpoint(&self) -> (f64, f64) {
        *self.positions.back().expect("trajectory always holds a position")
    }

    pub fn positions(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.positions.iter().copied()
    }

    pub fn last_frame(&self) -> u64 {
        self.last_frame
    }

    pub fn miss_count(&self) -> u8 {
        self.miss_count
    }

    /// Builds a standalone trajectory from raw positions, outside any store.
    /// Useful for feeding the displacement statistics directly, for example
    /// from recorded data or in tests.
    ///
    /// Panics on an empty position list.
    pub fn from_positions(id: u64, positions: &[(f64, f64)]) -> Self {
        assert!(!positions.is_empty(), "a trajectory holds at least one position");
        Self { id, positions: positions.iter().copied().collect(), last_frame: 0, miss_count: 0 }
    }
}

/// Live trajectory store for one camera stream. Single writer; hand the
/// whole store between threads if needed.
#[derive(Debug, Clone)]
pub struct TrackStore {
    tracks: Vec<Trajectory>,
    next_id: u64,
    current_frame: Option<u64>,
    window: usize,
    min_track_len: usize,
}

impl TrackStore {
    /// `window` caps the retained positions per trajectory; `min_track_len`
    /// is the length from which a trajectory counts as valid for the
    /// displacement statistics.
    pub fn new(window: usize, min_track_len: usize) -> Self {
        assert!(window >= 2, "window must hold at least two positions");
        assert!(min_track_len >= 2, "displacement needs at least two positions");
        Self { tracks: Vec::new(), next_id: 0, current_frame: None, window, min_track_len }
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Trajectory> {
        self.tracks.iter()
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn current_frame(&self) -> Option<u64> {
        self.current_frame
    }

    /// Advances the store by one frame of verified matches.
    ///
    /// Association is greedy by ascending endpoint distance with ties broken
    /// by trajectory id, so each trajectory consumes at most one match and
    /// each match extends at most one trajectory. Unconsumed matches start
    /// new trajectories; trajectories not extended this frame age by one
    /// miss and drop out at two.
    pub fn step(
        &mut self,
        matches: &[Match],
        prev_points: &[(f64, f64)],
        curr_points: &[(f64, f64)],
        frame: u64,
    ) -> Result<()> {
        if let Some(current) = self.current_frame {
            if frame != current + 1 {
                return Err(Error::Sequencing { expected: current + 1, got: frame });
            }
        }

        // Candidate (distance^2, trajectory slot, match slot) pairs inside
        // the association gate.
        let gate2 = ASSOCIATION_RADIUS_PX * ASSOCIATION_RADIUS_PX;
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (mi, m) in matches.iter().enumerate() {
            let (px, py) = prev_points[m.query_index];
            for (ti, t) in self.tracks.iter().enumerate() {
                let (ex, ey) = t.endpoint();
                let d2 = (ex - px) * (ex - px) + (ey - py) * (ey - py);
                if d2 <= gate2 {
                    candidates.push((d2, ti, mi));
                }
            }
        }
        candidates.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then_with(|| self.tracks[a.1].id.cmp(&self.tracks[b.1].id))
                .then_with(|| a.2.cmp(&b.2))
        });

        let mut track_used = vec![false; self.tracks.len()];
        let mut match_used = vec![false; matches.len()];
        for (_, ti, mi) in candidates {
            if track_used[ti] || match_used[mi] {
                continue;
            }
            track_used[ti] = true;
            match_used[mi] = true;
            let t = &mut self.tracks[ti];
            if t.positions.len() == self.window {
                t.positions.pop_front();
            }
            t.positions.push_back(curr_points[matches[mi].train_index]);
            t.last_frame = frame;
            t.miss_count = 0;
        }

        for (mi, m) in matches.iter().enumerate() {
            if match_used[mi] {
                continue;
            }
            self.tracks.push(Trajectory {
                id: self.next_id,
                positions: VecDeque::from([curr_points[m.train_index]]),
                last_frame: frame,
                miss_count: 0,
            });
            self.next_id += 1;
        }

        self.tracks.retain_mut(|t| {
            if t.last_frame == frame {
                return true;
            }
            t.miss_count += 1;
            t.miss_count < MAX_MISSES
        });

        self.current_frame = Some(frame);
        Ok(())
    }

    /// Drops every live trajectory. The id counter keeps running so ids stay
    /// unique across resets, and the next `step` accepts any frame index.
    pub fn reset(&mut self) {
        self.tracks.clear();
        self.current_frame = None;
    }

    /// Trajectories usable for displacement statistics: extended in the
    /// current frame and long enough to define a displacement.
    pub fn valid_trajectories(&self) -> Vec<&Trajectory> {
        self.tracks
            .iter()
            .filter(|t| t.miss_count == 0 && t.positions.len() >= self.min_track_len)
            .collect()
    }
}
