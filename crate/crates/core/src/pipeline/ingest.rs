//! Decoders for PGM (P2/P5), PNG and IDX image files.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::texture::{luminance, GrayImage};

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";
const IDX_UBYTE: u8 = 0x08;

/// A decoded image and a stable identifier for it.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedImage {
    pub id: String,
    pub image: GrayImage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestError {
    pub path: PathBuf,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub images: Vec<NamedImage>,
    pub errors: Vec<IngestError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
    Idx,
}

/// Sniffs the format from the leading bytes.
pub fn detect_format(bytes: &[u8]) -> Option<ImageFormat> {
    if bytes.starts_with(PNG_SIGNATURE) {
        Some(ImageFormat::Png)
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        Some(ImageFormat::Pgm)
    } else if bytes.len() >= 4 && bytes[0] == 0 && bytes[1] == 0 {
        Some(ImageFormat::Idx)
    } else {
        None
    }
}

/// Reads a file or every regular, non-hidden file of a directory (sorted by
/// name). Files that fail to decode are collected in `errors`; with `strict`
/// the first failure aborts instead.
pub fn ingest_images(path: &Path, levels: u32, strict: bool) -> Result<Ingested> {
    let files = list_inputs(path)?;
    let decoded: Vec<(PathBuf, Result<Vec<NamedImage>>)> = files
        .into_par_iter()
        .map(|f| {
            let r = decode_file(&f, levels);
            (f, r)
        })
        .collect();
    let mut out = Ingested {
        images: Vec::new(),
        errors: Vec::new(),
    };
    for (file, r) in decoded {
        match r {
            Ok(imgs) => out.images.extend(imgs),
            Err(e) if strict => return Err(e),
            Err(e) => out.errors.push(IngestError {
                path: file,
                message: e.to_string(),
            }),
        }
    }
    Ok(out)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn list_inputs(path: &Path) -> Result<Vec<PathBuf>> {
    let meta = fs::metadata(path).map_err(io_err(path))?;
    if !meta.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(path).map_err(io_err(path))? {
        let entry = entry.map_err(io_err(path))?;
        let hidden = entry.file_name().to_string_lossy().starts_with('.');
        if !hidden && entry.file_type().map_err(io_err(path))?.is_file() {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn decode_file(path: &Path, levels: u32) -> Result<Vec<NamedImage>> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let label = file_label(path);
    let single = |image| vec![NamedImage { id: label.clone(), image }];
    match detect_format(&bytes) {
        Some(ImageFormat::Pgm) => Ok(single(decode_pgm(&bytes, levels).map_err(|m| Error::parse(path, m))?)),
        Some(ImageFormat::Png) => Ok(single(decode_png(&bytes, levels).map_err(|m| Error::parse(path, m))?)),
        Some(ImageFormat::Idx) => {
            let imgs = decode_idx(&bytes, levels).map_err(|m| Error::parse(path, m))?;
            let many = imgs.len() > 1;
            Ok(imgs
                .into_iter()
                .enumerate()
                .map(|(i, image)| NamedImage {
                    id: if many { format!("{label}#{i}") } else { label.clone() },
                    image,
                })
                .collect())
        }
        None => Err(Error::parse(path, "unrecognized image format")),
    }
}

struct PgmHeader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmHeader<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> std::result::Result<u32, String> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("PGM: bad or missing {what}"))
    }
}

pub fn decode_pgm(bytes: &[u8], levels: u32) -> std::result::Result<GrayImage, String> {
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err("PGM: expected magic P2 or P5".into()),
    };
    let mut h = PgmHeader { bytes, pos: 2 };
    let width = h.number("width")? as usize;
    let height = h.number("height")? as usize;
    let max_value = h.number("maximum value")?;
    if width == 0 || height == 0 {
        return Err("PGM: zero image dimension".into());
    }
    if max_value == 0 || max_value > 65535 {
        return Err(format!("PGM: maximum value {max_value} outside 1..=65535"));
    }
    let count = width
        .checked_mul(height)
        .ok_or("PGM: image dimensions overflow")?;
    let raw: Vec<u32> = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        if !bytes.get(h.pos).is_some_and(|c| c.is_ascii_whitespace()) {
            return Err("PGM: missing separator before raster".into());
        }
        let data = &bytes[h.pos + 1..];
        let wide = max_value > 255;
        let need = count * if wide { 2 } else { 1 };
        if data.len() < need {
            return Err(format!("PGM: raster has {} bytes, expected {need}", data.len()));
        }
        if wide {
            data[..need]
                .chunks_exact(2)
                .map(|c| u32::from(u16::from_be_bytes([c[0], c[1]])))
                .collect()
        } else {
            data[..need].iter().map(|&b| u32::from(b)).collect()
        }
    } else {
        let mut raw = Vec::with_capacity(count);
        for i in 0..count {
            raw.push(h.number(&format!("sample {i}"))?);
        }
        raw
    };
    GrayImage::from_raw(width, height, &raw, max_value, levels).map_err(|e| e.to_string())
}

pub fn decode_png(bytes: &[u8], levels: u32) -> std::result::Result<GrayImage, String> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| format!("PNG: {e}"))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let color = img.color();
    let wide = color.bytes_per_pixel() / color.channel_count() > 1;
    let max_value: u32 = if wide { 65535 } else { 255 };
    let raw: Vec<u32> = match (color.has_color(), wide) {
        (false, false) => img.to_luma8().pixels().map(|p| u32::from(p.0[0])).collect(),
        (false, true) => img.to_luma16().pixels().map(|p| u32::from(p.0[0])).collect(),
        (true, false) => img
            .to_rgb8()
            .pixels()
            .map(|p| luma_sample(p.0.map(f64::from), max_value))
            .collect(),
        (true, true) => img
            .to_rgb16()
            .pixels()
            .map(|p| luma_sample(p.0.map(f64::from), max_value))
            .collect(),
    };
    GrayImage::from_raw(w, h, &raw, max_value, levels).map_err(|e| e.to_string())
}

fn luma_sample([r, g, b]: [f64; 3], max_value: u32) -> u32 {
    (luminance(r, g, b).round() as u32).min(max_value)
}

/// IDX with unsigned-byte samples: either `count x rows x cols` or a single
/// `rows x cols` image. Dimensions are big-endian `u32`.
pub fn decode_idx(bytes: &[u8], levels: u32) -> std::result::Result<Vec<GrayImage>, String> {
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err("IDX: bad magic".into());
    }
    if bytes[2] != IDX_UBYTE {
        return Err(format!(
            "IDX: sample type 0x{:02x} unsupported, only unsigned bytes",
            bytes[2]
        ));
    }
    let ndims = bytes[3] as usize;
    if !(2..=3).contains(&ndims) {
        return Err(format!("IDX: {ndims} dimensions, expected 2 or 3"));
    }
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err("IDX: truncated header".into());
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let (count, rows, cols) = match dims[..] {
        [r, c] => (1, r, c),
        [n, r, c] => (n, r, c),
        _ => unreachable!(),
    };
    let per_image = rows.checked_mul(cols).ok_or("IDX: dimensions overflow")?;
    let need = count.checked_mul(per_image).ok_or("IDX: dimensions overflow")?;
    let data = &bytes[header..];
    if data.len() != need {
        return Err(format!("IDX: {} data bytes, expected {need}", data.len()));
    }
    if per_image == 0 {
        return Err("IDX: zero image dimension".into());
    }
    data.par_chunks_exact(per_image)
        .map(|chunk| {
            let raw: Vec<u32> = chunk.iter().map(|&b| u32::from(b)).collect();
            GrayImage::from_raw(cols, rows, &raw, 255, levels).map_err(|e| e.to_string())
        })
        .collect()
}

/// Pixels of each image as an `f64` row, for raw-vector estimates.
pub fn raw_vectors(images: &[NamedImage]) -> Result<Vec<Vec<f64>>> {
    let Some(first) = images.first() else {
        return Err(Error::domain("no images to vectorize"));
    };
    let shape = (first.image.width(), first.image.height());
    images
        .iter()
        .map(|im| {
            if (im.image.width(), im.image.height()) != shape {
                return Err(Error::domain(format!(
                    "image {} is {}x{}, expected {}x{}",
                    im.id,
                    im.image.width(),
                    im.image.height(),
                    shape.0,
                    shape.1
                )));
            }
            Ok(im.image.pixels().iter().map(|&v| f64::from(v)).collect())
        })
        .collect()
}
