//! Offline vehicle-speed signal: a CSV of sparse `frame,speed_kmh` samples
//! with step-hold semantics between them.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Frame-indexed speed series. Frames before the first sample read 0 km/h;
/// frames between samples inherit the last known value.
#[derive(Debug, Clone, Default)]
pub struct SpeedSignal {
    /// Strictly increasing frame indices with their speeds.
    samples: Vec<(u64, f64)>,
}

impl SpeedSignal {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read(path).map_err(|e| Error::Input {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let text = String::from_utf8(text).map_err(|_| Error::Input {
            path: path.to_path_buf(),
            message: "speed signal is not valid UTF-8".into(),
        })?;
        Self::parse(&text)
    }

    /// Parses CSV text with the mandatory header `frame,speed_kmh`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "frame,speed_kmh" => {}
            Some((_, header)) => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header 'frame,speed_kmh', found '{}'", header.trim()),
                })
            }
            None => return Err(Error::Parse { line: 1, message: "empty speed signal".into() }),
        }
        let mut samples: Vec<(u64, f64)> = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.splitn(2, ',');
            let frame: u64 = parts
                .next()
                .unwrap_or_default()
                .trim()
                .parse()
                .map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("invalid frame index in '{line}'"),
                })?;
            let speed: f64 = parts
                .next()
                .ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("missing speed column in '{line}'"),
                })?
                .trim()
                .parse()
                .map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("non-numeric speed in '{line}'"),
                })?;
            if !speed.is_finite() || speed < 0.0 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("speed must be a non-negative number, got {speed}"),
                });
            }
            if let Some(&(last, _)) = samples.last() {
                if frame <= last {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("frame indices must be strictly increasing ({last} then {frame})"),
                    });
                }
            }
            samples.push((frame, speed));
        }
        Ok(Self { samples })
    }

    /// Speed at `frame` under step-hold semantics.
    pub fn value_at(&self, frame: u64) -> f64 {
        match self.samples.partition_point(|&(f, _)| f <= frame) {
            0 => 0.0,
            n => self.samples[n - 1].1,
        }
    }
}
