use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, ImageFormat, Luma};

use super::MarkerSet;
use crate::error::{Error, Result};

/// 8-bit grayscale tactile image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    pub timestamp: f64,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>, timestamp: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            timestamp,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8, timestamp: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height], timestamp)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

/// Reads an 8-bit binary PGM (P5) file.
pub fn read_pgm(path: &Path, timestamp: f64) -> Result<GrayFrame> {
    let reader = image::ImageReader::open(path)?.with_guessed_format()?;
    if reader.format() != Some(ImageFormat::Pnm) {
        return Err(Error::InvalidFrame(format!(
            "{} is not a PNM image",
            path.display()
        )));
    }
    let img = reader.decode()?;
    let gray = match img {
        image::DynamicImage::ImageLuma8(g) => g,
        other => {
            return Err(Error::InvalidFrame(format!(
                "{} is not 8-bit grayscale ({:?})",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = gray.dimensions();
    GrayFrame::new(w as usize, h as usize, gray.into_raw(), timestamp)
}

/// Writes a frame as binary PGM (P5).
pub fn write_pgm(path: &Path, frame: &GrayFrame) -> Result<()> {
    let img = GrayImage::from_raw(
        frame.width as u32,
        frame.height as u32,
        frame.pixels.clone(),
    )
    .ok_or_else(|| Error::InvalidFrame("pixel buffer does not match dimensions".into()))?;
    let mut out = Vec::new();
    let encoder = image::codecs::pnm::PnmEncoder::new(&mut out).with_subtype(
        image::codecs::pnm::PnmSubtype::Graymap(image::codecs::pnm::SampleEncoding::Binary),
    );
    img.write_with_encoder(encoder)?;
    fs::write(path, out)?;
    Ok(())
}

/// Reads every `.pgm` file in `dir`, ordered by file name. Frame `i` gets
/// timestamp `i / frequency`.
pub fn read_pgm_dir(dir: &Path, frequency: f64) -> Result<Vec<GrayFrame>> {
    if frequency <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "frequency must be positive, got {frequency}"
        )));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .map(|e| e.eq_ignore_ascii_case("pgm"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .enumerate()
        .map(|(i, p)| read_pgm(p, i as f64 / frequency))
        .collect()
}

/// Renders dark disks of the given radius on a white background, 4x4
/// supersampled so sub-pixel centres survive quantisation.
pub fn render_markers(
    width: usize,
    height: usize,
    markers: &MarkerSet,
    radius: f64,
) -> Result<GrayFrame> {
    const SS: usize = 4;
    let mut img = GrayImage::from_pixel(width as u32, height as u32, Luma([255]));
    let r2 = radius * radius;
    for p in &markers.positions {
        let x0 = ((p.x - radius - 1.0).floor().max(0.0)) as usize;
        let x1 = ((p.x + radius + 1.0).ceil().min(width as f64 - 1.0)).max(0.0) as usize;
        let y0 = ((p.y - radius - 1.0).floor().max(0.0)) as usize;
        let y1 = ((p.y + radius + 1.0).ceil().min(height as f64 - 1.0)).max(0.0) as usize;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let mut covered = 0usize;
                for sy in 0..SS {
                    for sx in 0..SS {
                        let px = x as f64 - 0.5 + (sx as f64 + 0.5) / SS as f64;
                        let py = y as f64 - 0.5 + (sy as f64 + 0.5) / SS as f64;
                        if (px - p.x).powi(2) + (py - p.y).powi(2) <= r2 {
                            covered += 1;
                        }
                    }
                }
                if covered > 0 {
                    let darkness = 255.0 * covered as f64 / (SS * SS) as f64;
                    let px = img.get_pixel_mut(x as u32, y as u32);
                    let v = (px.0[0] as f64 - darkness).max(0.0);
                    px.0[0] = v.round() as u8;
                }
            }
        }
    }
    GrayFrame::new(width, height, img.into_raw(), markers.timestamp)
}
