//! Vision-based motion-state detection for low-speed vehicle scenarios.
//!
//! The crate classifies the true motion state of a vehicle — static,
//! vibration, or moving — from a sequence of blind-spot camera frames.
//! The per-frame stage chain is:
//!
//! 1. **imgproc** – grayscale conversion, ROI cropping, CLAHE enhancement.
//! 2. **sift** – scale-space keypoint detection and 128-d descriptors.
//! 3. **matching** – brute-force KNN with ratio test, then RANSAC affine
//!    verification of the inter-frame correspondences.
//! 4. **tracking** – trajectory lifecycle over a sliding window of the
//!    last five frames.
//! 5. **decision** – displacement statistics across trajectories and a
//!    dual-threshold state decision.
//! 6. **pipeline** – orchestration, configuration, JSON-lines output.
//!
//! Two supporting modules exist for desk-scale verification: **synth**
//! renders seeded ground-truth sequences, and **evalbench** scores
//! predictions and measures per-frame latency.

pub mod decision;
pub mod error;
pub mod evalbench;
pub mod imgproc;
pub mod matching;
pub mod pipeline;
pub mod sift;
pub mod synth;
pub mod tracking;

pub use error::{Error, Result};
