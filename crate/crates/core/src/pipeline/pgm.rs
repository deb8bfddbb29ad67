//! 8-bit binary PGM (P5) images.

use std::path::Path;

use super::PipelineError;

#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major values in `[0, 1]`.
    pub values: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, PipelineError> {
        if values.len() != width * height {
            return Err(PipelineError::Format(format!("{} values for a {width}x{height} image", values.len())));
        }
        Ok(Self { width, height, values })
    }

    pub fn from_mask(side: usize, mask: &[u8]) -> Result<Self, PipelineError> {
        Self::new(side, side, mask.iter().map(|&v| v as f64).collect())
    }

    /// Images placed left to right with a one-pixel mid-grey separator,
    /// padded at the bottom to the tallest.
    pub fn side_by_side(images: &[GrayImage]) -> Self {
        let height = images.iter().map(|i| i.height).max().unwrap_or(0);
        let width = images.iter().map(|i| i.width).sum::<usize>() + images.len().saturating_sub(1);
        let mut values = vec![0.0; width * height];
        let mut x0 = 0;
        for (k, img) in images.iter().enumerate() {
            if k > 0 {
                for r in 0..height {
                    values[r * width + x0] = 0.5;
                }
                x0 += 1;
            }
            for r in 0..img.height {
                values[r * width + x0..][..img.width].copy_from_slice(&img.values[r * img.width..][..img.width]);
            }
            x0 += img.width;
        }
        Self { width, height, values }
    }

    /// Each pixel becomes a `k×k` block.
    pub fn upscale(&self, k: usize) -> Self {
        let (w, h) = (self.width * k, self.height * k);
        let values = (0..h).flat_map(|r| (0..w).map(move |c| (r, c))).map(|(r, c)| self.values[(r / k) * self.width + c / k]).collect();
        Self { width: w, height: h, values }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.values.iter().map(|&v| (255.0 * v.clamp(0.0, 1.0)).round() as u8));
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PipelineError> {
        let mut fields = Vec::with_capacity(4);
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(PipelineError::Format("truncated PGM header".into()));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        pos += 1;
        if fields[0] != "P5" {
            return Err(PipelineError::Format(format!("expected P5, found {}", fields[0])));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| PipelineError::Format(format!("bad PGM header field {s:?}")));
        let (width, height, max) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if max == 0 || max > 255 {
            return Err(PipelineError::Format(format!("unsupported maxval {max}")));
        }
        let body = bytes.get(pos..pos + width * height).ok_or_else(|| PipelineError::Format("truncated PGM body".into()))?;
        Ok(Self { width, height, values: body.iter().map(|&b| b as f64 / max as f64).collect() })
    }

    pub fn write(&self, path: &Path) -> Result<(), PipelineError> {
        std::fs::write(path, self.encode()).map_err(|e| PipelineError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        Self::decode(&std::fs::read(path).map_err(|e| PipelineError::io(path, e))?)
    }
}

/// Write `values` (row-major, `[0, 1]`) as a P5 file.
pub fn render_pgm(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<(), PipelineError> {
    GrayImage::new(width, height, values.to_vec())?.write(path)
}
