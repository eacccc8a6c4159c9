//! Cardinality of the GLCM feature space.
//!
//! The closed forms count distinct GLCMs and distinct values of four Haralick
//! statistics for `n x n` images with `kappa` gray levels, under the premise
//! that a GLCM is any nonnegative integer `kappa x kappa` matrix whose entries
//! sum to `n^2`. Each closed form is evaluated exactly, in arbitrary
//! precision, and can be checked against exhaustive enumeration of that same
//! matrix set for small `(n, kappa)`.
//!
//! Formulas are evaluated as stated even when enumeration disagrees with them;
//! the disagreement is surfaced in [`CountReport`], never corrected.

use std::collections::HashSet;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Default ceiling on the number of matrices a brute-force run may visit.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CountingParams {
    pub n: u32,
    pub kappa: u32,
}

impl CountingParams {
    pub fn new(n: u32, kappa: u32) -> Result<Self> {
        if n < 1 {
            return Err(Error::domain("image side n must be at least 1"));
        }
        if kappa < 2 {
            return Err(Error::domain(format!(
                "kappa must be at least 2, got {kappa}"
            )));
        }
        Ok(Self { n, kappa })
    }

    fn n2(&self) -> BigInt {
        BigInt::from(self.n) * BigInt::from(self.n)
    }

    fn k2(&self) -> BigInt {
        BigInt::from(self.kappa) * BigInt::from(self.kappa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    MatrixCount,
    Asm,
    Correlation,
    SumAverage,
    Contrast,
}

impl Statistic {
    pub const ALL: [Statistic; 5] = [
        Statistic::MatrixCount,
        Statistic::Asm,
        Statistic::Correlation,
        Statistic::SumAverage,
        Statistic::Contrast,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Statistic::MatrixCount => "matrix_count",
            Statistic::Asm => "asm",
            Statistic::Correlation => "correlation",
            Statistic::SumAverage => "sum_average",
            Statistic::Contrast => "contrast",
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn binomial(n: &BigUint, k: &BigUint) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = std::cmp::min(k.clone(), n - k);
    let mut acc = BigUint::one();
    let mut i = BigUint::zero();
    while i < k {
        i += 1u32;
        // acc * (n - k + i) / i stays integral at every step.
        acc = acc * (n - &k + &i) / &i;
    }
    acc
}

pub fn count_distinct_glcm_matrices(params: CountingParams) -> BigUint {
    let k2 = u64::from(params.kappa).pow(2);
    let n2 = u64::from(params.n).pow(2);
    binomial(&BigUint::from(n2 + k2 - 1), &BigUint::from(k2 - 1))
}

/// May be zero or negative for small `n`; the value is returned as is.
pub fn count_distinct_asm(params: CountingParams) -> BigInt {
    let n2 = params.n2();
    let k2 = params.k2();
    let q = n2.div_floor(&k2);
    let k2m1 = &k2 - 1;
    let rem = &n2 - &k2m1 * &q;
    &n2 * &n2 - (&q * &q * &k2m1 + &rem * &rem + 1)
}

/// Exact rational; integral exactly when `kappa^2 - kappa` is even, i.e. always
/// for integer `kappa`, but kept rational so the arithmetic is literal.
pub fn count_distinct_correlation(params: CountingParams) -> BigRational {
    let n2 = BigRational::from_integer(params.n2());
    let k2 = BigRational::from_integer(params.k2());
    let k = BigRational::from_integer(BigInt::from(params.kappa));
    let two = BigRational::from_integer(BigInt::from(2));
    &n2 * &k2 - &n2 - &k2 / &two + &k / &two + BigRational::one()
}

pub fn count_distinct_sum_average(params: CountingParams) -> BigInt {
    let n2 = params.n2();
    let k = BigInt::from(params.kappa);
    BigInt::from(2) * &n2 * k - BigInt::from(2) * n2 + 1
}

pub fn count_distinct_contrast(params: CountingParams) -> BigInt {
    let n2 = params.n2();
    let k = BigInt::from(params.kappa);
    let k2 = params.k2();
    &n2 * k2 + &n2 - BigInt::from(2) * &n2 * k + 1
}

/// Closed-form value for `stat` as an exact rational.
pub fn formula_value(params: CountingParams, stat: Statistic) -> BigRational {
    let int = |v: BigInt| BigRational::from_integer(v);
    match stat {
        Statistic::MatrixCount => int(BigInt::from(count_distinct_glcm_matrices(params))),
        Statistic::Asm => int(count_distinct_asm(params)),
        Statistic::Correlation => count_distinct_correlation(params),
        Statistic::SumAverage => int(count_distinct_sum_average(params)),
        Statistic::Contrast => int(count_distinct_contrast(params)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum StatKey {
    Int(u64),
    /// Sign of the covariance and the reduced fraction `corr^2 = num / den`.
    Corr(i8, i128, i128),
}

fn stat_key(stat: Statistic, cells: &[u64], kappa: usize, total: u64) -> Option<StatKey> {
    match stat {
        Statistic::MatrixCount => Some(StatKey::Int(0)),
        Statistic::Asm => Some(StatKey::Int(cells.iter().map(|x| x * x).sum())),
        Statistic::Contrast => Some(StatKey::Int(
            cells
                .iter()
                .enumerate()
                .map(|(c, &x)| {
                    let d = (c / kappa).abs_diff(c % kappa) as u64;
                    x * d * d
                })
                .sum(),
        )),
        Statistic::SumAverage => Some(StatKey::Int(
            cells
                .iter()
                .enumerate()
                .map(|(c, &x)| x * (c / kappa + c % kappa) as u64)
                .sum(),
        )),
        Statistic::Correlation => {
            let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0i128, 0i128, 0i128, 0i128, 0i128);
            for (c, &x) in cells.iter().enumerate() {
                let (i, j, x) = ((c / kappa) as i128, (c % kappa) as i128, x as i128);
                sx += i * x;
                sy += j * x;
                sxx += i * i * x;
                syy += j * j * x;
                sxy += i * j * x;
            }
            let t = total as i128;
            let cov = t * sxy - sx * sy;
            let vx = t * sxx - sx * sx;
            let vy = t * syy - sy * sy;
            if vx == 0 || vy == 0 {
                return None;
            }
            let num = cov * cov;
            let den = vx * vy;
            let g = num.gcd(&den);
            Some(StatKey::Corr(cov.signum() as i8, num / g, den / g))
        }
    }
}

/// Visits every composition of `remaining` into `cells.len() - start` parts.
fn for_each_composition(cells: &mut [u64], start: usize, remaining: u64, visit: &mut impl FnMut(&[u64])) {
    if start == cells.len() - 1 {
        cells[start] = remaining;
        visit(cells);
        return;
    }
    for v in 0..=remaining {
        cells[start] = v;
        for_each_composition(cells, start + 1, remaining - v, visit);
    }
}

/// Number of matrices a brute-force run over `params` visits.
pub fn enumeration_size(params: CountingParams) -> BigUint {
    count_distinct_glcm_matrices(params)
}

/// Exhaustively enumerates nonnegative `kappa x kappa` integer matrices with
/// entry sum `n^2` and counts the distinct values of `stat`.
///
/// Statistics are evaluated on the unnormalized entries. For correlation the
/// comparison is exact (sign of the covariance together with the reduced
/// rational `corr^2`), and matrices with a zero marginal variance are left out.
pub fn brute_force_distinct_values(params: CountingParams, stat: Statistic, cap: u64) -> Result<u64> {
    let size = enumeration_size(params);
    if size > BigUint::from(cap) {
        return Err(Error::Resource {
            what: "GLCM enumeration",
            needed: size.to_string(),
            cap,
        });
    }
    let k = params.kappa as usize;
    let cells = k * k;
    let total = u64::from(params.n).pow(2);

    if stat == Statistic::MatrixCount {
        let visited = (0..=total)
            .into_par_iter()
            .map(|first| {
                let mut buf = vec![0u64; cells];
                buf[0] = first;
                let mut count = 0u64;
                for_each_composition(&mut buf, 1, total - first, &mut |_| count += 1);
                count
            })
            .sum();
        return Ok(visited);
    }

    let merged = (0..=total)
        .into_par_iter()
        .map(|first| {
            let mut buf = vec![0u64; cells];
            buf[0] = first;
            let mut seen = HashSet::new();
            for_each_composition(&mut buf, 1, total - first, &mut |m| {
                if let Some(key) = stat_key(stat, m, k, total) {
                    seen.insert(key);
                }
            });
            seen
        })
        .reduce(HashSet::new, |mut a, b| {
            if a.len() < b.len() {
                return b.into_iter().chain(a).collect();
            }
            a.extend(b);
            a
        });
    Ok(merged.len() as u64)
}

fn ser_rational<S: Serializer>(v: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&rational_to_string(v))
}

fn ser_opt_int<S: Serializer>(v: &Option<BigInt>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.serialize_str(&v.to_string()),
        None => s.serialize_none(),
    }
}

/// `a` for integers, `a/b` otherwise.
pub fn rational_to_string(v: &BigRational) -> String {
    if v.is_integer() {
        v.to_integer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountReport {
    pub statistic: Statistic,
    pub n: u32,
    pub kappa: u32,
    #[serde(serialize_with = "ser_rational")]
    pub formula_value: BigRational,
    #[serde(serialize_with = "ser_opt_int", skip_serializing_if = "Option::is_none")]
    pub oracle_value: Option<BigInt>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agrees: Option<bool>,
    /// Discrepancies worth surfacing: negative or fractional formula values,
    /// formula/oracle disagreement, and the degenerate-correlation exclusion.
    pub flags: Vec<String>,
}

impl CountReport {
    pub fn new(params: CountingParams, stat: Statistic, oracle: Option<u64>) -> Self {
        let formula_value = formula_value(params, stat);
        let oracle_value = oracle.map(BigInt::from);
        let agrees = oracle_value
            .as_ref()
            .map(|o| formula_value == BigRational::from_integer(o.clone()));
        let mut flags = Vec::new();
        if formula_value.is_negative() || formula_value.is_zero() {
            flags.push("formula_not_positive".to_string());
        }
        if !formula_value.is_integer() {
            flags.push("formula_not_integral".to_string());
        }
        if agrees == Some(false) {
            flags.push("formula_oracle_disagree".to_string());
        }
        if stat == Statistic::Correlation && oracle_value.is_some() {
            flags.push("oracle_excludes_zero_variance_matrices".to_string());
        }
        Self {
            statistic: stat,
            n: params.n,
            kappa: params.kappa,
            formula_value,
            oracle_value,
            agrees,
            flags,
        }
    }

    /// Evaluates the formula and, when `brute_force_cap` is given, the oracle.
    pub fn compute(params: CountingParams, stat: Statistic, brute_force_cap: Option<u64>) -> Result<Self> {
        let oracle = match brute_force_cap {
            Some(cap) => Some(brute_force_distinct_values(params, stat, cap)?),
            None => None,
        };
        Ok(Self::new(params, stat, oracle))
    }
}

/// Compares the feature-space scale `n^2 kappa^2 + n^4` with the dense-network
/// VC scale `w^4`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureVsVc {
    pub n: u32,
    pub kappa: u32,
    pub w: u64,
    #[serde(serialize_with = "ser_bigint")]
    pub feature_scale: BigInt,
    #[serde(serialize_with = "ser_bigint")]
    pub vc_scale: BigInt,
    pub feature_below_vc: bool,
}

fn ser_bigint<S: Serializer>(v: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v.to_u64() {
        Some(x) => s.serialize_u64(x),
        None => s.serialize_str(&v.to_string()),
    }
}

pub fn haralick_vs_vc_comparison(params: CountingParams, w: u64) -> Result<FeatureVsVc> {
    let floor = u64::from(params.n.max(params.kappa));
    if w < floor {
        return Err(Error::domain(format!(
            "w = {w} must be at least max(n, kappa) = {floor}"
        )));
    }
    let n2 = params.n2();
    let feature_scale = &n2 * params.k2() + &n2 * &n2;
    let vc_scale = BigInt::from(w).pow(4);
    Ok(FeatureVsVc {
        n: params.n,
        kappa: params.kappa,
        w,
        feature_below_vc: feature_scale <= vc_scale,
        feature_scale,
        vc_scale,
    })
}
