//! Frame-directory enumeration: `frame_NNNNNN.pgm` / `.png`, ordered by
//! index.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Lists the frame files in `dir`, sorted by frame index.
///
/// Files must match `frame_<digits>.pgm|png`; other files are ignored.
/// Duplicate indices (for instance the same frame in both formats) and
/// empty directories are input errors.
pub fn list_frames(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Input {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut frames: Vec<(u64, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::Input { path: dir.to_path_buf(), message: e.to_string() })?;
        let path = entry.path();
        if let Some(index) = parse_frame_name(&path) {
            frames.push((index, path));
        }
    }
    if frames.is_empty() {
        return Err(Error::Input {
            path: dir.to_path_buf(),
            message: "no frame_NNNNNN.pgm or .png files found".into(),
        });
    }
    frames.sort_by_key(|&(index, _)| index);
    for pair in frames.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::Input {
                path: pair[1].1.clone(),
                message: format!("duplicate frame index {}", pair[1].0),
            });
        }
    }
    Ok(frames)
}

fn parse_frame_name(path: &Path) -> Option<u64> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    if ext != "pgm" && ext != "png" {
        return None;
    }
    let stem = path.file_stem()?.to_str()?;
    let digits = stem.strip_prefix("frame_")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}
