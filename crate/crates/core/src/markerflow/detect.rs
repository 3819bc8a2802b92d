use super::{GrayFrame, MarkerSet, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectParams {
    /// Fraction of the frame's dynamic range below which a pixel is dark.
    pub threshold: f64,
    /// Blobs with fewer pixels are discarded.
    pub min_area: usize,
    pub connectivity: Connectivity,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            min_area: 4,
            connectivity: Connectivity::Eight,
        }
    }
}

/// Finds dark blobs by fixed thresholding and connected-component labelling.
///
/// Each surviving blob contributes one darkness-weighted centroid. Markers are
/// returned in raster order of each blob's first pixel. A frame with a single
/// intensity has no dynamic range and yields an empty set.
pub fn detect_markers(frame: &GrayFrame, params: &DetectParams) -> Result<MarkerSet> {
    if !(params.threshold > 0.0 && params.threshold < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold fraction must lie in (0, 1), got {}",
            params.threshold
        )));
    }
    let (w, h) = (frame.width(), frame.height());
    let pixels = frame.pixels();
    let lo = *pixels.iter().min().unwrap_or(&0) as f64;
    let hi = *pixels.iter().max().unwrap_or(&0) as f64;
    if hi <= lo {
        return Ok(MarkerSet::new(frame.timestamp, Vec::new()));
    }
    let level = lo + params.threshold * (hi - lo);
    let dark: Vec<bool> = pixels.iter().map(|&p| (p as f64) < level).collect();

    let offsets: &[(isize, isize)] = match params.connectivity {
        Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
        Connectivity::Eight => &[
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ],
    };

    let mut visited = vec![false; w * h];
    let mut stack = Vec::new();
    let mut positions = Vec::new();
    for start in 0..w * h {
        if !dark[start] || visited[start] {
            continue;
        }
        visited[start] = true;
        stack.push(start);
        let (mut area, mut sw, mut sx, mut sy) = (0usize, 0.0f64, 0.0f64, 0.0f64);
        while let Some(idx) = stack.pop() {
            let (x, y) = (idx % w, idx / w);
            let weight = hi - pixels[idx] as f64;
            area += 1;
            sw += weight;
            sx += weight * x as f64;
            sy += weight * y as f64;
            for &(ox, oy) in offsets {
                let nx = x as isize + ox;
                let ny = y as isize + oy;
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let n = ny as usize * w + nx as usize;
                if dark[n] && !visited[n] {
                    visited[n] = true;
                    stack.push(n);
                }
            }
        }
        if area >= params.min_area && sw > 0.0 {
            positions.push(Point::new(sx / sw, sy / sw));
        }
    }
    Ok(MarkerSet::new(frame.timestamp, positions))
}
