//! Pixel-level preprocessing: grayscale conversion, CLAHE enhancement and
//! ROI cropping.
//!
//! Everything here is a pure function over immutable rasters; no shared
//! state, safe to call concurrently.

mod clahe;
mod io;

pub use clahe::apply_clahe;
pub use io::{read_frame, write_pgm, write_png, DecodedFrame};

use crate::error::{Error, Result};

/// 8-bit single-channel raster, row-major, one byte per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "zero-sized image ({width}x{height})"
            )));
        }
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "pixel buffer holds {} bytes, {width}x{height} needs {expected}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    /// Image of constant intensity.
    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn row(&self, y: u32) -> &[u8] {
        let w = self.width as usize;
        let start = y as usize * w;
        &self.data[start..start + w]
    }
}

/// Interleaved 8-bit RGB raster, row-major, three bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "zero-sized image ({width}x{height})"
            )));
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "pixel buffer holds {} bytes, {width}x{height} RGB needs {expected}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }
}

/// BT.601 luma of one RGB pixel, rounded to the nearest integer.
#[inline]
pub fn luma601(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
    // The weights sum to 1 so y is already in [0, 255]; the clamp only
    // guards the rounded value.
    y.round().clamp(0.0, 255.0) as u8
}

/// Converts an interleaved RGB raster to grayscale with BT.601 weights
/// (0.299, 0.587, 0.114).
pub fn to_grayscale(rgb: &RgbImage) -> Result<GrayImage> {
    let gray: Vec<u8> = rgb
        .data
        .chunks_exact(3)
        .map(|px| luma601(px[0], px[1], px[2]))
        .collect();
    GrayImage::new(rgb.width, rgb.height, gray)
}

/// Fractional region-of-interest bounds, each in [0, 1] of the image
/// dimension.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RoiSpec {
    pub top: f64,
    pub bottom: f64,
    pub left: f64,
    pub right: f64,
}

impl Default for RoiSpec {
    fn default() -> Self {
        // Blind-spot camera default: skip the sky strip at the top, the
        // vehicle body at the bottom and the mirror columns on both sides.
        Self { top: 0.05, bottom: 0.90, left: 0.15, right: 0.86 }
    }
}

/// Minimum ROI extent after rounding, in pixels per axis.
const MIN_ROI_SPAN: u32 = 16;

impl RoiSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| (0.0..=1.0).contains(&v) && v.is_finite();
        if !(ok(self.top) && ok(self.bottom) && ok(self.left) && ok(self.right)) {
            return Err(Error::Config(format!("ROI fractions out of [0,1]: {self:?}")));
        }
        if self.top >= self.bottom || self.left >= self.right {
            return Err(Error::Config(format!(
                "ROI spans are empty or inverted: {self:?}"
            )));
        }
        Ok(())
    }

    /// Pixel bounds `(x0, x1, y0, y1)` of the ROI on a `width`x`height`
    /// image; both ends floor-rounded, upper bounds exclusive.
    pub fn pixel_bounds(&self, width: u32, height: u32) -> Result<(u32, u32, u32, u32)> {
        self.validate()?;
        let x0 = (self.left * width as f64).floor() as u32;
        let x1 = (self.right * width as f64).floor() as u32;
        let y0 = (self.top * height as f64).floor() as u32;
        let y1 = (self.bottom * height as f64).floor() as u32;
        if x1.saturating_sub(x0) < MIN_ROI_SPAN || y1.saturating_sub(y0) < MIN_ROI_SPAN {
            return Err(Error::Config(format!(
                "ROI degenerate after rounding: x [{x0},{x1}), y [{y0},{y1}) on {width}x{height} \
                 (minimum span {MIN_ROI_SPAN} px)"
            )));
        }
        Ok((x0, x1, y0, y1))
    }
}

/// Crops `img` to the ROI. Returns the cropped image and the pixel offset
/// of its origin in the source frame, which maps ROI coordinates back to
/// full-frame coordinates.
pub fn crop_roi(img: &GrayImage, roi: &RoiSpec) -> Result<(GrayImage, (u32, u32))> {
    let (x0, x1, y0, y1) = roi.pixel_bounds(img.width, img.height)?;
    let (w, h) = (x1 - x0, y1 - y0);
    let mut data = Vec::with_capacity(w as usize * h as usize);
    for y in y0..y1 {
        let row = img.row(y);
        data.extend_from_slice(&row[x0 as usize..x1 as usize]);
    }
    Ok((GrayImage::new(w, h, data)?, (x0, y0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grayscale_weights() {
        let rgb = RgbImage::new(3, 1, vec![255, 255, 255, 0, 0, 0, 255, 0, 0]).unwrap();
        let gray = to_grayscale(&rgb).unwrap();
        assert_eq!(gray.data(), &[255, 0, 76]); // 0.299 * 255 rounds to 76
    }

    #[test]
    fn grayscale_idempotent_on_gray_input() {
        for v in 0..=255u8 {
            assert_eq!(luma601(v, v, v), v);
        }
    }

    #[test]
    fn grayscale_rejects_zero_size() {
        assert!(matches!(RgbImage::new(0, 4, vec![]), Err(Error::Dimension(_))));
        assert!(matches!(GrayImage::new(4, 0, vec![]), Err(Error::Dimension(_))));
    }

    #[test]
    fn default_roi_bounds_on_camera_frame() {
        let img = GrayImage::filled(704, 576, 128).unwrap();
        let (crop, offset) = crop_roi(&img, &RoiSpec::default()).unwrap();
        assert_eq!(offset, (105, 28));
        assert_eq!((crop.width(), crop.height()), (500, 490));
    }

    #[test]
    fn full_frame_roi_is_identity() {
        let img = GrayImage::new(40, 30, (0..1200).map(|i| (i % 251) as u8).collect()).unwrap();
        let spec = RoiSpec { top: 0.0, bottom: 1.0, left: 0.0, right: 1.0 };
        let (crop, offset) = crop_roi(&img, &spec).unwrap();
        assert_eq!(offset, (0, 0));
        assert_eq!(crop, img);
    }

    #[test]
    fn empty_roi_span_is_config_error() {
        let img = GrayImage::filled(100, 100, 0).unwrap();
        let spec = RoiSpec { top: 0.5, bottom: 0.5, left: 0.0, right: 1.0 };
        assert!(matches!(crop_roi(&img, &spec), Err(Error::Config(_))));
    }

    #[test]
    fn roi_below_minimum_span_is_config_error() {
        let img = GrayImage::filled(100, 100, 0).unwrap();
        let spec = RoiSpec { top: 0.0, bottom: 0.1, left: 0.0, right: 1.0 };
        assert!(matches!(crop_roi(&img, &spec), Err(Error::Config(_))));
    }

    #[test]
    fn crop_offset_maps_back_to_source() {
        let data: Vec<u8> = (0..64 * 48).map(|i| (i * 7 % 256) as u8).collect();
        let img = GrayImage::new(64, 48, data).unwrap();
        let spec = RoiSpec { top: 0.2, bottom: 0.9, left: 0.3, right: 0.8 };
        let (crop, (ox, oy)) = crop_roi(&img, &spec).unwrap();
        for y in 0..crop.height() {
            for x in 0..crop.width() {
                assert_eq!(crop.get(x, y), img.get(x + ox, y + oy));
            }
        }
    }
}
