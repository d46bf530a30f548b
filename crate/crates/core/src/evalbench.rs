//! Scoring and performance measurement: confusion matrices, per-class
//! precision/recall/F1, the two-class merge, and per-frame latency
//! statistics.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::decision::MotionState;
use crate::error::{Error, Result};
use crate::imgproc::DecodedFrame;
use crate::pipeline::{list_frames, Pipeline, PipelineConfig};
use crate::synth::SceneKind;

pub const CLASSES: [SceneKind; 3] = [SceneKind::Static, SceneKind::Vibration, SceneKind::Moving];

fn class_index(kind: SceneKind) -> usize {
    match kind {
        SceneKind::Static => 0,
        SceneKind::Vibration => 1,
        SceneKind::Moving => 2,
    }
}

/// 3x3 confusion counts indexed `(truth, predicted)` over
/// static/vibration/moving. Indeterminate predictions never enter the
/// matrix; they are tallied per truth class on the side so they cannot
/// distort precision or recall.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
    pub indeterminate: [u64; 3],
}

impl ConfusionMatrix {
    /// Frames inside the matrix (excludes indeterminate).
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn indeterminate_total(&self) -> u64 {
        self.indeterminate.iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let trace: u64 = (0..3).map(|i| self.counts[i][i]).sum();
        trace as f64 / total as f64
    }
}

/// Merged 2x2 matrix: static and vibration pool into "unmoving".
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix2 {
    /// Indexed `(truth, predicted)` over [unmoving, moving].
    pub counts: [[u64; 2]; 2],
    pub indeterminate: [u64; 2],
}

impl ConfusionMatrix2 {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        (self.counts[0][0] + self.counts[1][1]) as f64 / total as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn metrics_from(tp: u64, predicted: u64, truth: u64) -> ClassMetrics {
    let precision = if predicted > 0 { tp as f64 / predicted as f64 } else { 0.0 };
    let recall = if truth > 0 { tp as f64 / truth as f64 } else { 0.0 };
    let f1 =
        if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    ClassMetrics { precision, recall, f1 }
}

/// Three-class scoring report.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreReport {
    pub matrix: ConfusionMatrix,
    /// Metrics for static, vibration, moving in that order.
    pub per_class: [ClassMetrics; 3],
    pub accuracy: f64,
    pub scored_frames: u64,
    pub indeterminate_frames: u64,
}

/// Two-class scoring report after merging static and vibration.
#[derive(Debug, Clone, Serialize)]
pub struct TwoClassReport {
    pub matrix: ConfusionMatrix2,
    pub unmoving: ClassMetrics,
    pub moving: ClassMetrics,
    pub accuracy: f64,
}

/// Scores predictions against ground truth.
///
/// Both lists are keyed by frame index and must cover exactly the same
/// frames. Indeterminate predictions (warm-up or fail-safe frames) are
/// excluded from the metric denominators but reported per truth class.
pub fn score(
    predictions: &[(u64, MotionState)],
    truth: &[(u64, SceneKind)],
) -> Result<ScoreReport> {
    if predictions.len() != truth.len() {
        return Err(Error::Alignment(format!(
            "{} predictions vs {} truth records",
            predictions.len(),
            truth.len()
        )));
    }
    let mut pred = predictions.to_vec();
    let mut gt = truth.to_vec();
    pred.sort_by_key(|&(f, _)| f);
    gt.sort_by_key(|&(f, _)| f);

    let mut matrix = ConfusionMatrix::default();
    for (&(pf, state), &(tf, label)) in pred.iter().zip(gt.iter()) {
        if pf != tf {
            return Err(Error::Alignment(format!(
                "frame index mismatch: prediction {pf} vs truth {tf}"
            )));
        }
        let t = class_index(label);
        match state {
            MotionState::Indeterminate => matrix.indeterminate[t] += 1,
            MotionState::Static => matrix.counts[t][0] += 1,
            MotionState::Vibration => matrix.counts[t][1] += 1,
            MotionState::Moving => matrix.counts[t][2] += 1,
        }
    }
    Ok(report_from_matrix(matrix))
}

/// Builds the metric report for an existing confusion matrix.
pub fn report_from_matrix(matrix: ConfusionMatrix) -> ScoreReport {
    let mut per_class = [ClassMetrics::default(); 3];
    for (c, metrics) in per_class.iter_mut().enumerate() {
        let tp = matrix.counts[c][c];
        let predicted: u64 = (0..3).map(|t| matrix.counts[t][c]).sum();
        let truth: u64 = matrix.counts[c].iter().sum();
        *metrics = metrics_from(tp, predicted, truth);
    }
    ScoreReport {
        accuracy: matrix.accuracy(),
        scored_frames: matrix.total(),
        indeterminate_frames: matrix.indeterminate_total(),
        matrix,
        per_class,
    }
}

/// Merges static and vibration into "unmoving" and recomputes metrics.
pub fn merge_two_class(matrix: &ConfusionMatrix) -> TwoClassReport {
    let c = &matrix.counts;
    let merged = ConfusionMatrix2 {
        counts: [
            [c[0][0] + c[0][1] + c[1][0] + c[1][1], c[0][2] + c[1][2]],
            [c[2][0] + c[2][1], c[2][2]],
        ],
        indeterminate: [
            matrix.indeterminate[0] + matrix.indeterminate[1],
            matrix.indeterminate[2],
        ],
    };
    let m = &merged.counts;
    TwoClassReport {
        unmoving: metrics_from(m[0][0], m[0][0] + m[1][0], m[0][0] + m[0][1]),
        moving: metrics_from(m[1][1], m[0][1] + m[1][1], m[1][0] + m[1][1]),
        accuracy: merged.accuracy(),
        matrix: merged,
    }
}

/// One latency report row, in the style of a resolution/latency table.
#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub resolution: String,
    pub frames: usize,
    pub repetition: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub p99_ms: f64,
    pub cpu_time_ms: f64,
}

/// Frames at the start of each repetition excluded from the statistics:
/// the cold frame and the first matched frame behave differently from the
/// steady state.
pub const BENCH_WARMUP_FRAMES: usize = 2;

/// Minimum frame count for stable latency statistics.
pub const BENCH_MIN_FRAMES: usize = 30;

/// Measures per-frame latency of the full stage chain over `repetitions`
/// fresh pipeline runs on the frames in `input_dir`. Decode time is paid
/// up front and excluded from the per-frame numbers.
pub fn bench(input_dir: &Path, config: &PipelineConfig, repetitions: usize) -> Result<Vec<BenchReport>> {
    let listing = list_frames(input_dir)?;
    if listing.len() < BENCH_MIN_FRAMES {
        return Err(Error::Input {
            path: input_dir.to_path_buf(),
            message: format!(
                "latency statistics need at least {BENCH_MIN_FRAMES} frames, found {}",
                listing.len()
            ),
        });
    }
    let mut frames: Vec<(u64, DecodedFrame)> = Vec::with_capacity(listing.len());
    for (index, path) in listing {
        frames.push((index, crate::imgproc::read_frame(&path)?));
    }
    let resolution = format!("{}x{}", frames[0].1.width(), frames[0].1.height());
    bench_frames(&frames, config, repetitions, &resolution)
}

/// Bench core over pre-decoded frames.
pub fn bench_frames(
    frames: &[(u64, DecodedFrame)],
    config: &PipelineConfig,
    repetitions: usize,
    resolution: &str,
) -> Result<Vec<BenchReport>> {
    let mut reports = Vec::with_capacity(repetitions);
    for rep in 0..repetitions.max(1) {
        let mut pipeline = Pipeline::new(config.clone())?;
        let cpu_before = cpu_time_ms();
        let wall = Instant::now();
        let mut latencies: Vec<f64> = Vec::with_capacity(frames.len());
        for (index, frame) in frames {
            let decision = pipeline.process_frame(frame, *index, None)?;
            latencies.push(decision.latency_ms);
        }
        let _total_wall = wall.elapsed();
        let cpu_ms = cpu_time_ms() - cpu_before;
        let steady = &latencies[BENCH_WARMUP_FRAMES.min(latencies.len() - 1)..];
        let n = steady.len() as f64;
        let mean = steady.iter().sum::<f64>() / n;
        let var = steady.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n;
        let mut sorted = steady.to_vec();
        sorted.sort_by(f64::total_cmp);
        let p99_index = ((0.99 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
        reports.push(BenchReport {
            resolution: resolution.to_string(),
            frames: steady.len(),
            repetition: rep,
            mean_ms: mean,
            std_ms: var.sqrt(),
            p99_ms: sorted[p99_index],
            cpu_time_ms: cpu_ms,
        });
    }
    Ok(reports)
}

/// Process CPU time (user + system) in milliseconds.
fn cpu_time_ms() -> f64 {
    let mut usage = unsafe { std::mem::zeroed::<libc::rusage>() };
    let rc = unsafe { libc::getrusage(libc::RUSAGE_SELF, &mut usage) };
    if rc != 0 {
        return 0.0;
    }
    let to_ms = |tv: libc::timeval| tv.tv_sec as f64 * 1e3 + tv.tv_usec as f64 / 1e3;
    to_ms(usage.ru_utime) + to_ms(usage.ru_stime)
}
