use serde::Serialize;

use super::GrayImage;
use crate::error::{Error, Result};

/// Displacement between the two pixels of a co-occurring pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct GlcmOffset {
    pub dr: i32,
    pub dc: i32,
    /// Accumulate `(j, i)` alongside every `(i, j)`.
    pub symmetric: bool,
}

impl GlcmOffset {
    pub fn new(dr: i32, dc: i32, symmetric: bool) -> Result<Self> {
        if dr == 0 && dc == 0 {
            return Err(Error::domain("GLCM offset (0, 0) is not allowed"));
        }
        Ok(Self { dr, dc, symmetric })
    }

    /// The four unit-distance offsets at 0°, 90°, 45° and 135°.
    pub fn standard(symmetric: bool) -> [GlcmOffset; 4] {
        [(0, 1), (1, 0), (1, 1), (1, -1)].map(|(dr, dc)| GlcmOffset { dr, dc, symmetric })
    }

    /// Short label like `0_1` or `1_-1s`, used in CSV column names.
    pub fn label(&self) -> String {
        format!(
            "{}_{}{}",
            self.dr,
            self.dc,
            if self.symmetric { "s" } else { "" }
        )
    }
}

impl std::str::FromStr for GlcmOffset {
    type Err = Error;

    /// Parses `dr:dc`, optionally suffixed with `s` for a symmetric offset.
    fn from_str(s: &str) -> Result<Self> {
        let (body, symmetric) = match s.strip_suffix('s') {
            Some(b) => (b, true),
            None => (s, false),
        };
        let (dr, dc) = body
            .split_once(':')
            .ok_or_else(|| Error::domain(format!("offset '{s}' is not of the form dr:dc")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<i32>()
                .map_err(|_| Error::domain(format!("offset '{s}' has a non-integer component")))
        };
        GlcmOffset::new(parse(dr)?, parse(dc)?, symmetric)
    }
}

/// Co-occurrence counts over a `levels x levels` grid, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GlcmMatrix {
    levels: usize,
    counts: Vec<u64>,
    total: u64,
}

impl GlcmMatrix {
    pub fn from_counts(levels: usize, counts: Vec<u64>) -> Result<Self> {
        if levels < 2 {
            return Err(Error::domain("a GLCM needs at least 2 levels"));
        }
        if counts.len() != levels * levels {
            return Err(Error::domain(format!(
                "expected {} cells for {levels} levels, got {}",
                levels * levels,
                counts.len()
            )));
        }
        let total = counts.iter().sum();
        Ok(Self {
            levels,
            counts,
            total,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    #[inline]
    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.levels + j]
    }

    /// Cell-wise sum; both matrices must share the level count.
    pub fn merged(&self, other: &GlcmMatrix) -> Result<GlcmMatrix> {
        if self.levels != other.levels {
            return Err(Error::domain("cannot merge GLCMs with different level counts"));
        }
        let counts = self
            .counts
            .iter()
            .zip(&other.counts)
            .map(|(a, b)| a + b)
            .collect();
        GlcmMatrix::from_counts(self.levels, counts)
    }

    pub fn normalize(&self) -> Result<ProbabilityMatrix> {
        if self.total == 0 {
            return Err(Error::domain("cannot normalize a GLCM with zero total"));
        }
        let t = self.total as f64;
        Ok(ProbabilityMatrix {
            levels: self.levels,
            p: self.counts.iter().map(|&c| c as f64 / t).collect(),
        })
    }
}

/// A normalized GLCM: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityMatrix {
    levels: usize,
    p: Vec<f64>,
}

impl ProbabilityMatrix {
    pub fn new(levels: usize, p: Vec<f64>) -> Result<Self> {
        if levels < 2 || p.len() != levels * levels {
            return Err(Error::domain(format!(
                "a probability matrix over {levels} levels needs {} entries",
                levels * levels
            )));
        }
        if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(Error::domain("probabilities must be finite and nonnegative"));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self { levels, p })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.levels + j]
    }
}

/// Counts co-occurring value pairs `(img[p], img[p + offset])`.
pub fn compute_glcm(img: &GrayImage, offset: GlcmOffset) -> Result<GlcmMatrix> {
    let levels = img.levels() as usize;
    if levels < 2 {
        return Err(Error::domain("GLCM needs at least 2 gray levels"));
    }
    let (h, w) = (img.height(), img.width());
    let adr = offset.dr.unsigned_abs() as usize;
    let adc = offset.dc.unsigned_abs() as usize;
    if adr >= h || adc >= w {
        return Err(Error::domain(format!(
            "offset ({}, {}) leaves no pixel pairs in a {h}x{w} image",
            offset.dr, offset.dc
        )));
    }

    // Source rows/cols chosen so that the displaced pixel stays in bounds.
    let (r0, r1) = if offset.dr >= 0 { (0, h - adr) } else { (adr, h) };
    let (c0, c1) = if offset.dc >= 0 { (0, w - adc) } else { (adc, w) };

    let mut counts = vec![0u64; levels * levels];
    for r in r0..r1 {
        let r2 = (r as i64 + i64::from(offset.dr)) as usize;
        for c in c0..c1 {
            let c2 = (c as i64 + i64::from(offset.dc)) as usize;
            let a = img.get(r, c) as usize;
            let b = img.get(r2, c2) as usize;
            counts[a * levels + b] += 1;
            if offset.symmetric {
                counts[b * levels + a] += 1;
            }
        }
    }
    GlcmMatrix::from_counts(levels, counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checker2() -> GrayImage {
        GrayImage::new(2, 2, 2, vec![0, 1, 1, 0]).unwrap()
    }

    #[test]
    fn constant_image_fills_one_cell() {
        let img = GrayImage::constant(2, 2, 2, 0).unwrap();
        let g = compute_glcm(&img, GlcmOffset::new(0, 1, false).unwrap()).unwrap();
        assert_eq!(g.counts(), &[2, 0, 0, 0]);
        assert_eq!(g.total(), 2);
    }

    #[test]
    fn checkerboard_horizontal_pairs() {
        let g = compute_glcm(&checker2(), GlcmOffset::new(0, 1, false).unwrap()).unwrap();
        assert_eq!(g.counts(), &[0, 1, 1, 0]);
        assert_eq!(g.total(), 2);
    }

    #[test]
    fn symmetric_accumulation_doubles() {
        let g = compute_glcm(&checker2(), GlcmOffset::new(0, 1, true).unwrap()).unwrap();
        assert_eq!(g.counts(), &[0, 2, 2, 0]);
        assert_eq!(g.total(), 4);
    }

    #[test]
    fn total_matches_valid_pair_count() {
        let img = GrayImage::new(5, 4, 3, (0..20).map(|v| v % 3).collect()).unwrap();
        for (dr, dc) in [(0, 1), (1, 0), (1, 1), (1, -1), (-2, 3), (3, -4)] {
            let g = compute_glcm(&img, GlcmOffset::new(dr, dc, false).unwrap()).unwrap();
            let expect = (4 - dr.unsigned_abs() as u64) * (5 - dc.unsigned_abs() as u64);
            assert_eq!(g.total(), expect, "offset ({dr}, {dc})");
        }
    }

    #[test]
    fn offset_too_large_is_a_domain_error() {
        let img = GrayImage::constant(3, 2, 2, 1).unwrap();
        assert!(compute_glcm(&img, GlcmOffset::new(2, 0, false).unwrap()).is_err());
        assert!(compute_glcm(&img, GlcmOffset::new(0, -3, false).unwrap()).is_err());
        assert!(GlcmOffset::new(0, 0, false).is_err());
    }

    #[test]
    fn negative_offset_is_the_transpose_of_positive() {
        let img = GrayImage::new(4, 4, 4, (0..16).map(|v| (v * 7 + 3) % 4).collect()).unwrap();
        let fwd = compute_glcm(&img, GlcmOffset::new(1, 1, false).unwrap()).unwrap();
        let back = compute_glcm(&img, GlcmOffset::new(-1, -1, false).unwrap()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(fwd.count(i, j), back.count(j, i));
            }
        }
    }

    #[test]
    fn normalize_examples() {
        let cases: [(&[u64], &[f64]); 3] = [
            (&[2, 0, 0, 0], &[1.0, 0.0, 0.0, 0.0]),
            (&[0, 1, 1, 0], &[0.0, 0.5, 0.5, 0.0]),
            (&[1, 1, 1, 1], &[0.25; 4]),
        ];
        for (counts, expect) in cases {
            let p = GlcmMatrix::from_counts(2, counts.to_vec())
                .unwrap()
                .normalize()
                .unwrap();
            assert_eq!(p.as_slice(), expect);
            assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let empty = GlcmMatrix::from_counts(2, vec![0; 4]).unwrap();
        assert!(empty.normalize().is_err());
    }

    #[test]
    fn parses_offsets() {
        let o: GlcmOffset = "1:-1s".parse().unwrap();
        assert_eq!(o, GlcmOffset { dr: 1, dc: -1, symmetric: true });
        assert!("0:0".parse::<GlcmOffset>().is_err());
        assert!("1,1".parse::<GlcmOffset>().is_err());
    }
}
