//! The thirteen Haralick statistics of a normalized co-occurrence matrix.
//!
//! Gray levels are indexed from zero and every logarithm is natural. Cells
//! with zero probability contribute nothing to the entropy terms.

use serde::Serialize;

use super::glcm::{compute_glcm, GlcmOffset, ProbabilityMatrix};
use super::GrayImage;
use crate::error::{Error, Result};

pub const FEATURE_COUNT: usize = 13;

/// Column names, in the order produced by [`HaralickVector::to_array`].
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "asm",
    "contrast",
    "correlation",
    "sum_average",
    "variance",
    "inverse_difference_moment",
    "sum_entropy",
    "sum_variance",
    "entropy",
    "difference_variance",
    "difference_entropy",
    "info_correlation_1",
    "info_correlation_2",
];

/// Marginal variances below this product count as zero.
const DEGENERATE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DegeneracyFlags {
    /// `sigma_x * sigma_y == 0`; correlation was reported as 0.
    pub correlation: bool,
    /// `max(HX, HY) == 0`; the first information measure was reported as 0.
    pub info_correlation: bool,
}

impl DegeneracyFlags {
    pub fn any(&self) -> bool {
        self.correlation || self.info_correlation
    }

    fn union(self, other: Self) -> Self {
        Self {
            correlation: self.correlation || other.correlation,
            info_correlation: self.info_correlation || other.info_correlation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HaralickVector {
    pub asm: f64,
    pub contrast: f64,
    pub correlation: f64,
    pub sum_average: f64,
    pub variance: f64,
    pub inverse_difference_moment: f64,
    pub sum_entropy: f64,
    pub sum_variance: f64,
    pub entropy: f64,
    pub difference_variance: f64,
    pub difference_entropy: f64,
    pub info_correlation_1: f64,
    pub info_correlation_2: f64,
    pub flags: DegeneracyFlags,
}

impl HaralickVector {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.asm,
            self.contrast,
            self.correlation,
            self.sum_average,
            self.variance,
            self.inverse_difference_moment,
            self.sum_entropy,
            self.sum_variance,
            self.entropy,
            self.difference_variance,
            self.difference_entropy,
            self.info_correlation_1,
            self.info_correlation_2,
        ]
    }
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

fn entropy_of(dist: &[f64]) -> f64 {
    -dist.iter().map(|&p| plogp(p)).sum::<f64>()
}

pub fn haralick_features(p: &ProbabilityMatrix) -> HaralickVector {
    let n = p.levels();
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    let mut p_sum = vec![0.0; 2 * n - 1];
    let mut p_diff = vec![0.0; n];

    let mut asm = 0.0;
    let mut contrast = 0.0;
    let mut idm = 0.0;
    let mut ij_moment = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = p.get(i, j);
            px[i] += v;
            py[j] += v;
            p_sum[i + j] += v;
            p_diff[i.abs_diff(j)] += v;
            let d = i as f64 - j as f64;
            asm += v * v;
            contrast += d * d * v;
            idm += v / (1.0 + d * d);
            ij_moment += (i * j) as f64 * v;
        }
    }

    let mean = |dist: &[f64]| -> f64 { dist.iter().enumerate().map(|(k, &q)| k as f64 * q).sum() };
    let var_about = |dist: &[f64], mu: f64| -> f64 {
        dist.iter()
            .enumerate()
            .map(|(k, &q)| (k as f64 - mu).powi(2) * q)
            .sum()
    };

    let mu_x = mean(&px);
    let mu_y = mean(&py);
    let var_x = var_about(&px, mu_x);
    let var_y = var_about(&py, mu_y);

    let mut flags = DegeneracyFlags::default();
    let sd_prod = (var_x * var_y).sqrt();
    let correlation = if sd_prod > DEGENERATE_EPS {
        ((ij_moment - mu_x * mu_y) / sd_prod).clamp(-1.0, 1.0)
    } else {
        flags.correlation = true;
        0.0
    };

    let sum_average = mean(&p_sum);
    let sum_variance = var_about(&p_sum, sum_average);
    let sum_entropy = entropy_of(&p_sum);
    let diff_mean = mean(&p_diff);
    let difference_variance = var_about(&p_diff, diff_mean);
    let difference_entropy = entropy_of(&p_diff);

    let entropy = entropy_of(p.as_slice());
    let hx = entropy_of(&px);
    let hy = entropy_of(&py);
    let mut hxy1 = 0.0;
    let mut hxy2 = 0.0;
    for (i, &pi) in px.iter().enumerate() {
        for (j, &pj) in py.iter().enumerate() {
            let q = pi * pj;
            if q > 0.0 {
                let lq = q.ln();
                hxy1 -= p.get(i, j) * lq;
                hxy2 -= q * lq;
            }
        }
    }
    let hmax = hx.max(hy);
    let info_correlation_1 = if hmax > 0.0 {
        (entropy - hxy1) / hmax
    } else {
        flags.info_correlation = true;
        0.0
    };
    // HXY2 >= HXY analytically; rounding can push the difference just below 0.
    let info_correlation_2 = (1.0 - (-2.0 * (hxy2 - entropy)).exp()).max(0.0).sqrt();

    HaralickVector {
        asm,
        contrast,
        correlation,
        sum_average,
        variance: var_x,
        inverse_difference_moment: idm,
        sum_entropy,
        sum_variance,
        entropy,
        difference_variance,
        difference_entropy,
        info_correlation_1,
        info_correlation_2,
        flags,
    }
}

/// How per-offset vectors are combined into one patch descriptor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// One 13-entry block per offset, in offset order.
    Concat,
    /// Arithmetic mean over offsets.
    #[default]
    Average,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concat" => Ok(Aggregation::Concat),
            "avg" | "average" => Ok(Aggregation::Average),
            other => Err(Error::domain(format!(
                "unknown aggregation '{other}', expected concat or avg"
            ))),
        }
    }
}

/// Feature values for one patch plus the union of degeneracy flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatchFeatures {
    pub values: Vec<f64>,
    pub flags: DegeneracyFlags,
}

/// Column names matching the layout of [`feature_vector_for_patch`].
pub fn feature_names(offsets: &[GlcmOffset], mode: Aggregation) -> Vec<String> {
    match mode {
        Aggregation::Average => FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        Aggregation::Concat => offsets
            .iter()
            .flat_map(|o| FEATURE_NAMES.iter().map(move |f| format!("{f}@{}", o.label())))
            .collect(),
    }
}

pub fn feature_vector_for_patch(
    img: &GrayImage,
    offsets: &[GlcmOffset],
    mode: Aggregation,
) -> Result<PatchFeatures> {
    if offsets.is_empty() {
        return Err(Error::domain("at least one GLCM offset is required"));
    }
    let mut flags = DegeneracyFlags::default();
    let mut per_offset = Vec::with_capacity(offsets.len());
    for &o in offsets {
        let h = haralick_features(&compute_glcm(img, o)?.normalize()?);
        flags = flags.union(h.flags);
        per_offset.push(h.to_array());
    }
    let values = match mode {
        Aggregation::Concat => per_offset.into_iter().flatten().collect(),
        Aggregation::Average => {
            let k = per_offset.len() as f64;
            (0..FEATURE_COUNT)
                .map(|f| per_offset.iter().map(|v| v[f]).sum::<f64>() / k)
                .collect()
        }
    };
    Ok(PatchFeatures { values, flags })
}
