//! Frame file IO: binary PGM (P5, maxval 255) and 8-bit PNG (gray or RGB).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imgproc::{GrayImage, RgbImage};

/// A decoded input frame. PNG sources may carry color, which the pipeline
/// converts after ROI cropping.
#[derive(Debug, Clone)]
pub enum DecodedFrame {
    Gray(GrayImage),
    Rgb(RgbImage),
}

impl DecodedFrame {
    pub fn width(&self) -> u32 {
        match self {
            DecodedFrame::Gray(g) => g.width(),
            DecodedFrame::Rgb(c) => c.width(),
        }
    }

    pub fn height(&self) -> u32 {
        match self {
            DecodedFrame::Gray(g) => g.height(),
            DecodedFrame::Rgb(c) => c.height(),
        }
    }
}

fn input_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Input { path: path.to_path_buf(), message: message.into() }
}

/// Reads a frame by extension: `.pgm` or `.png`.
pub fn read_frame(path: &Path) -> Result<DecodedFrame> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "pgm" => read_pgm(path).map(DecodedFrame::Gray),
        "png" => read_png(path),
        other => Err(input_err(path, format!("unsupported frame format '.{other}'"))),
    }
}

fn read_png(path: &Path) -> Result<DecodedFrame> {
    let img = image::open(path).map_err(|e| input_err(path, e.to_string()))?;
    match img {
        image::DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            Ok(DecodedFrame::Gray(GrayImage::new(w, h, buf.into_raw())?))
        }
        image::DynamicImage::ImageRgb8(buf) => {
            let (w, h) = buf.dimensions();
            Ok(DecodedFrame::Rgb(RgbImage::new(w, h, buf.into_raw())?))
        }
        other => Err(input_err(
            path,
            format!("unsupported PNG pixel layout {:?}; expected 8-bit gray or RGB", other.color()),
        )),
    }
}

/// Parses a binary PGM (magic `P5`, maxval 255).
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| input_err(path, e.to_string()))?;
    if !bytes.starts_with(b"P5") {
        return Err(input_err(path, "not a binary PGM (missing P5 magic)"));
    }
    let mut pos = 2usize;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        *field = parse_pgm_int(&bytes, &mut pos)
            .ok_or_else(|| input_err(path, "truncated or malformed PGM header"))?;
    }
    // Exactly one whitespace byte separates the header from pixel data.
    pos += 1;
    let (w, h, maxval) = (fields[0], fields[1], fields[2]);
    if maxval != 255 {
        return Err(input_err(path, format!("PGM maxval {maxval} unsupported, expected 255")));
    }
    let n = w * h;
    if bytes.len() < pos + n {
        return Err(input_err(
            path,
            format!("PGM pixel data truncated: expected {n} bytes, found {}", bytes.len() - pos),
        ));
    }
    GrayImage::new(w as u32, h as u32, bytes[pos..pos + n].to_vec())
}

/// Reads one whitespace-delimited decimal, skipping `#` comment lines.
fn parse_pgm_int(bytes: &[u8], pos: &mut usize) -> Option<usize> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if *pos == start {
        return None;
    }
    std::str::from_utf8(&bytes[start..*pos]).ok()?.parse().ok()
}

pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    fs::write(path, out)?;
    Ok(())
}

pub fn write_png(img: &GrayImage, path: &Path) -> Result<()> {
    let buf: image::GrayImage =
        image::ImageBuffer::from_raw(img.width(), img.height(), img.data().to_vec())
            .expect("buffer length matches dimensions");
    buf.save(path).map_err(|e| input_err(path, e.to_string()))
}
