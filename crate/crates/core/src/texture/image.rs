use serde::Serialize;

use crate::error::{Error, Result};

/// A quantized single-channel raster with `levels` gray levels.
///
/// Pixels are stored row-major and every value is `< levels`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GrayImage {
    width: usize,
    height: usize,
    levels: u32,
    pixels: Vec<u32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, levels: u32, pixels: Vec<u32>) -> Result<Self> {
        if levels < 2 {
            return Err(Error::domain(format!(
                "an image needs at least 2 gray levels, got {levels}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::domain(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::domain(format!(
                "expected {} pixels for a {width}x{height} image, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some((idx, &v)) = pixels.iter().enumerate().find(|(_, &v)| v >= levels) {
            return Err(Error::domain(format!(
                "pixel {idx} has value {v}, outside [0, {})",
                levels
            )));
        }
        Ok(Self {
            width,
            height,
            levels,
            pixels,
        })
    }

    /// Builds an image from raw samples in `[0, max_value]`, binning them
    /// uniformly onto `levels` gray levels.
    pub fn from_raw(
        width: usize,
        height: usize,
        raw: &[u32],
        max_value: u32,
        levels: u32,
    ) -> Result<Self> {
        if let Some(&v) = raw.iter().find(|&&v| v > max_value) {
            return Err(Error::domain(format!(
                "sample {v} exceeds the declared maximum {max_value}"
            )));
        }
        let pixels = raw.iter().map(|&v| quantize(v, max_value, levels)).collect();
        Self::new(width, height, levels, pixels)
    }

    pub fn constant(width: usize, height: usize, levels: u32, value: u32) -> Result<Self> {
        Self::new(width, height, levels, vec![value; width * height])
    }

    /// Two-level checkerboard with `0` in the top-left corner.
    pub fn checkerboard(width: usize, height: usize) -> Result<Self> {
        let pixels = (0..height)
            .flat_map(|r| (0..width).map(move |c| ((r + c) % 2) as u32))
            .collect();
        Self::new(width, height, 2, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn pixels(&self) -> &[u32] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.pixels[row * self.width + col]
    }

    /// Copies out the `h`x`w` sub-image whose top-left corner is `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, h: usize, w: usize) -> Result<Self> {
        if h == 0 || w == 0 || row + h > self.height || col + w > self.width {
            return Err(Error::domain(format!(
                "crop {h}x{w} at ({row}, {col}) does not fit in a {}x{} image",
                self.height, self.width
            )));
        }
        let mut pixels = Vec::with_capacity(h * w);
        for r in row..row + h {
            let start = r * self.width + col;
            pixels.extend_from_slice(&self.pixels[start..start + w]);
        }
        Ok(Self {
            width: w,
            height: h,
            levels: self.levels,
            pixels,
        })
    }

    /// Applies `v -> levels - 1 - v` to every pixel.
    pub fn reversed(&self) -> Self {
        let top = self.levels - 1;
        Self {
            pixels: self.pixels.iter().map(|&v| top - v).collect(),
            ..self.clone()
        }
    }
}

/// Uniform binning of `value` in `[0, max_value]` onto `levels` bins.
///
/// When `levels == max_value + 1` this is the identity.
pub fn quantize(value: u32, max_value: u32, levels: u32) -> u32 {
    let bins = u64::from(levels);
    let span = u64::from(max_value) + 1;
    ((u64::from(value) * bins) / span).min(bins - 1) as u32
}

/// ITU-R BT.601 luma weights.
pub fn luminance(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}
