//! Scale-Invariant Feature Transform detector and descriptor, built from
//! first principles on a difference-of-Gaussian scale space.
//!
//! Everything is sequential and bit-deterministic: identical input and
//! parameters yield identical keypoints and descriptors.

mod descriptor;
mod extrema;
mod fastmath;
mod orientation;
mod pyramid;

pub use descriptor::compute_descriptor;
pub use extrema::detect_keypoints;
pub use orientation::assign_orientations;
pub use pyramid::{
    build_dog_pyramid, build_gaussian_pyramid, gaussian_blur, DogPyramid, GaussianPyramid, ImageF32,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::GrayImage;

/// Detector and descriptor parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiftParams {
    /// Hard cap on emitted features, strongest responses kept.
    pub max_features: usize,
    /// Minimum |interpolated DoG| on intensities normalized to [0, 1].
    pub contrast_threshold: f64,
    /// Principal-curvature ratio r; candidates with tr^2/det >= (r+1)^2/r
    /// are rejected as edge responses.
    pub edge_ratio: f64,
    /// Scales sampled per octave (levels per octave = this + 3).
    pub scales_per_octave: usize,
    /// Base blur of the first pyramid level, in pixels.
    pub sigma0: f64,
    /// Blur already present in the camera image, in pixels.
    pub assumed_input_blur: f64,
}

impl Default for SiftParams {
    fn default() -> Self {
        Self {
            max_features: 1000,
            contrast_threshold: 0.04,
            edge_ratio: 15.0,
            scales_per_octave: 3,
            sigma0: 1.6,
            assumed_input_blur: 0.5,
        }
    }
}

impl SiftParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_features < 1 {
            return Err(Error::Config("sift.max_features must be at least 1".into()));
        }
        if !(self.contrast_threshold > 0.0)
            || !(self.edge_ratio > 0.0)
            || !(self.sigma0 > 0.0)
            || !(self.assumed_input_blur > 0.0)
            || self.scales_per_octave == 0
        {
            return Err(Error::Config("sift parameters must all be positive".into()));
        }
        if self.assumed_input_blur >= self.sigma0 {
            return Err(Error::Config("sift.sigma0 must exceed the assumed input blur".into()));
        }
        Ok(())
    }
}

/// A detected feature with subpixel position at base-image resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// Pyramid octave the extremum was found in.
    pub octave: usize,
    /// DoG level index within the octave (1..=scales_per_octave).
    pub scale_index: usize,
    /// Absolute blur scale in pixels at base resolution.
    pub sigma: f64,
    /// Dominant gradient orientation in [0, 2pi); zero until assigned.
    pub orientation: f64,
    /// |interpolated DoG contrast| at the refined extremum.
    pub response: f64,
}

pub const DESCRIPTOR_LEN: usize = 128;

/// 128-d gradient histogram descriptor, unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub values: [f32; DESCRIPTOR_LEN],
}

impl Descriptor {
    pub fn euclidean_distance(&self, other: &Descriptor) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| {
                let d = a as f64 - b as f64;
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Full detect-and-describe pass. Returns index-aligned keypoints and
/// descriptors; keypoints whose orientation window has no gradient or
/// whose descriptor window leaves the image are dropped.
pub fn detect_and_describe(
    img: &GrayImage,
    params: &SiftParams,
) -> Result<(Vec<Keypoint>, Vec<Descriptor>)> {
    params.validate()?;
    let pyramid = build_gaussian_pyramid(img, params)?;
    let dog = build_dog_pyramid(&pyramid);
    let detected = detect_keypoints(&dog, params);

    let mut keypoints = Vec::new();
    let mut descriptors = Vec::new();
    for kp in &detected {
        // The window check is orientation-independent, so keypoints doomed
        // at the descriptor stage skip orientation assignment entirely.
        if !descriptor::descriptor_fits(kp, &pyramid) {
            continue;
        }
        for oriented in assign_orientations(kp, &pyramid) {
            if let Some(desc) = compute_descriptor(&oriented, &pyramid) {
                keypoints.push(oriented.clone());
                descriptors.push(desc);
            }
        }
    }

    // Orientation splitting can push the count past the cap again; keep the
    // strongest responses with the same deterministic tie-break as detection.
    if keypoints.len() > params.max_features {
        let mut order: Vec<usize> = (0..keypoints.len()).collect();
        order.sort_by(|&i, &j| compare_for_cap(&keypoints[i], &keypoints[j]));
        order.truncate(params.max_features);
        order.sort_unstable();
        keypoints = order.iter().map(|&i| keypoints[i].clone()).collect();
        descriptors = order.iter().map(|&i| descriptors[i].clone()).collect();
    }
    Ok((keypoints, descriptors))
}

/// Strongest response first; equal responses break by (y, x), then
/// orientation so the cap cut is total and deterministic.
pub(crate) fn compare_for_cap(a: &Keypoint, b: &Keypoint) -> std::cmp::Ordering {
    b.response
        .total_cmp(&a.response)
        .then_with(|| a.y.total_cmp(&b.y))
        .then_with(|| a.x.total_cmp(&b.x))
        .then_with(|| a.orientation.total_cmp(&b.orientation))
}
