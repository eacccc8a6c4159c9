//! Nearest and farthest origin distances for `n` points uniform in the unit
//! `p`-ball, the relative contrast built from them, and a Monte Carlo oracle.
//!
//! Two expressions for the mean farthest distance are kept side by side:
//! the stated one, `1 - np/((np + p - 1)(np + p))`, and the value implied by
//! the radial CDF `F(x) = x^p`, `E[max] = pn/(pn + 1)`. Monte Carlo decides
//! between them; neither is silently preferred.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::idim::{sample_unit_ball, stream_rng};

fn check(n: u64, p: f64) -> Result<()> {
    if n < 1 {
        return Err(Error::domain("sample count n must be at least 1"));
    }
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::domain(format!("dimension p must be positive and finite, got {p}")));
    }
    Ok(())
}

/// `sum_{xi=1}^{n} ln(1 + 1/(p xi))`, so that `E[min] = exp(-S)`.
fn log_min_sum(n: u64, p: f64) -> f64 {
    (1..=n).map(|xi| (1.0 / (p * xi as f64)).ln_1p()).sum()
}

/// `prod_{xi=1}^{n} (1 + 1/(p xi))^-1`, evaluated in log space.
pub fn mean_min_distance(n: u64, p: f64) -> Result<f64> {
    check(n, p)?;
    Ok((-log_min_sum(n, p)).exp())
}

/// `1 - np / ((np + p - 1)(np + p))`, verbatim.
pub fn mean_max_distance_paper(n: u64, p: f64) -> Result<f64> {
    check(n, p)?;
    Ok(1.0 - paper_max_gap(n, p))
}

fn paper_max_gap(n: u64, p: f64) -> f64 {
    let np = n as f64 * p;
    np / ((np + p - 1.0) * (np + p))
}

/// `pn / (pn + 1)`: the mean of the maximum of `n` draws with CDF `x^p`.
pub fn mean_max_distance_corrected(n: u64, p: f64) -> Result<f64> {
    check(n, p)?;
    let np = n as f64 * p;
    Ok(np / (np + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RcVariant {
    Paper,
    Corrected,
}

impl std::str::FromStr for RcVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(RcVariant::Paper),
            "corrected" => Ok(RcVariant::Corrected),
            other => Err(Error::domain(format!(
                "unknown variant '{other}', expected paper or corrected"
            ))),
        }
    }
}

/// `(E[max] - E[min]) / E[min]`.
///
/// Both distances are close to 1 for large `p`, so the numerator is formed
/// from the two gaps `1 - E[min]` and `1 - E[max]` to avoid cancellation.
pub fn relative_contrast(n: u64, p: f64, variant: RcVariant) -> Result<f64> {
    check(n, p)?;
    let s = log_min_sum(n, p);
    let e_min = (-s).exp();
    let min_gap = -(-s).exp_m1();
    let max_gap = match variant {
        RcVariant::Paper => paper_max_gap(n, p),
        RcVariant::Corrected => 1.0 / (n as f64 * p + 1.0),
    };
    Ok((min_gap - max_gap) / e_min)
}

/// `C/sqrt(p) * sqrt(1/(2 xi + 1)) - RC_paper(n, p)`.
pub fn rc_diff_vs_aggarwal(n: u64, p: f64, c: f64, xi: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::domain(format!("constant C must be positive, got {c}")));
    }
    if !(xi >= 1.0) {
        return Err(Error::domain(format!("xi must be at least 1, got {xi}")));
    }
    let rc = relative_contrast(n, p, RcVariant::Paper)?;
    Ok(c / p.sqrt() * (1.0 / (2.0 * xi + 1.0)).sqrt() - rc)
}

/// Log-log slope of `RC(n, p)` between `p_lo` and `p_hi`.
pub fn rc_loglog_slope(n: u64, p_lo: f64, p_hi: f64, variant: RcVariant) -> Result<f64> {
    let a = relative_contrast(n, p_lo, variant)?;
    let b = relative_contrast(n, p_hi, variant)?;
    if !(a > 0.0 && b > 0.0) || p_lo == p_hi {
        return Err(Error::domain("log-log slope needs positive contrasts at two distinct p"));
    }
    Ok((b.ln() - a.ln()) / (p_hi.ln() - p_lo.ln()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloStats {
    pub n: u64,
    pub p: usize,
    pub trials: u64,
    pub seed: u64,
    pub mean_min: f64,
    pub se_min: f64,
    pub mean_max: f64,
    pub se_max: f64,
}

/// Trials per work unit; partial sums are combined in unit order so the
/// result does not depend on the thread count.
const MC_CHUNK: u64 = 4096;

/// Per trial, samples `n` points uniform in the unit `p`-ball and records the
/// smallest and largest norm. Trial `t` uses RNG stream `t`.
pub fn monte_carlo_order_stats(n: u64, p: usize, trials: u64, seed: u64) -> Result<MonteCarloStats> {
    if n < 1 || p < 1 || trials < 1 {
        return Err(Error::domain("need n >= 1, p >= 1 and at least one trial"));
    }
    let chunks = trials.div_ceil(MC_CHUNK);
    let partials: Vec<[f64; 4]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut point = vec![0.0; p];
            let mut acc = [0.0; 4];
            for t in c * MC_CHUNK..((c + 1) * MC_CHUNK).min(trials) {
                let mut rng = stream_rng(seed, t);
                let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                for _ in 0..n {
                    sample_unit_ball(&mut rng, &mut point);
                    let r = point.iter().map(|v| v * v).sum::<f64>().sqrt();
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
                acc[0] += lo;
                acc[1] += lo * lo;
                acc[2] += hi;
                acc[3] += hi * hi;
            }
            acc
        })
        .collect();
    let mut tot = [0.0; 4];
    for part in &partials {
        for (t, v) in tot.iter_mut().zip(part) {
            *t += v;
        }
    }
    let tf = trials as f64;
    let mean_se = |s: f64, s2: f64| {
        let mean = s / tf;
        let var = if trials > 1 {
            ((s2 - tf * mean * mean) / (tf - 1.0)).max(0.0)
        } else {
            0.0
        };
        (mean, (var / tf).sqrt())
    };
    let (mean_min, se_min) = mean_se(tot[0], tot[1]);
    let (mean_max, se_max) = mean_se(tot[2], tot[3]);
    Ok(MonteCarloStats {
        n,
        p,
        trials,
        seed,
        mean_min,
        se_min,
        mean_max,
        se_max,
    })
}

/// Agreement threshold, in standard errors, between Monte Carlo and formulas.
pub const DEFAULT_Z_THRESHOLD: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloCheck {
    pub stats: MonteCarloStats,
    pub z_threshold: f64,
    pub z_min: f64,
    pub z_max_paper: f64,
    pub z_max_corrected: f64,
    pub min_agrees: bool,
    pub max_paper_agrees: bool,
    pub max_corrected_agrees: bool,
}

fn z_score(observed: f64, expected: f64, se: f64) -> f64 {
    let d = observed - expected;
    if se > 0.0 {
        d / se
    } else if d == 0.0 {
        0.0
    } else {
        d.signum() * f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometryReport {
    pub n: u64,
    pub p: f64,
    pub mean_min_analytic: f64,
    pub mean_max_paper: f64,
    pub mean_max_corrected: f64,
    pub rc_paper: f64,
    pub rc_corrected: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloCheck>,
}

/// Options for the Monte Carlo column of [`geometry_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloOptions {
    pub trials: u64,
    pub seed: u64,
    pub z_threshold: f64,
}

pub fn geometry_report(n: u64, p: f64, mc: Option<MonteCarloOptions>) -> Result<GeometryReport> {
    let mean_min_analytic = mean_min_distance(n, p)?;
    let mean_max_paper = mean_max_distance_paper(n, p)?;
    let mean_max_corrected = mean_max_distance_corrected(n, p)?;
    let monte_carlo = match mc {
        None => None,
        Some(opts) => {
            if p.fract() != 0.0 {
                return Err(Error::domain(format!(
                    "Monte Carlo needs an integer dimension, got p = {p}"
                )));
            }
            let stats = monte_carlo_order_stats(n, p as usize, opts.trials, opts.seed)?;
            let z_min = z_score(stats.mean_min, mean_min_analytic, stats.se_min);
            let z_max_paper = z_score(stats.mean_max, mean_max_paper, stats.se_max);
            let z_max_corrected = z_score(stats.mean_max, mean_max_corrected, stats.se_max);
            let ok = |z: f64| z.abs() <= opts.z_threshold;
            Some(MonteCarloCheck {
                stats,
                z_threshold: opts.z_threshold,
                z_min,
                z_max_paper,
                z_max_corrected,
                min_agrees: ok(z_min),
                max_paper_agrees: ok(z_max_paper),
                max_corrected_agrees: ok(z_max_corrected),
            })
        }
    };
    Ok(GeometryReport {
        n,
        p,
        mean_min_analytic,
        mean_max_paper,
        mean_max_corrected,
        rc_paper: relative_contrast(n, p, RcVariant::Paper)?,
        rc_corrected: relative_contrast(n, p, RcVariant::Corrected)?,
        monte_carlo,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table3Row {
    pub name: String,
    pub p: f64,
    pub n: u64,
    pub mean_min_distance: f64,
    /// `mean_min_distance` rounded to two decimals.
    pub formatted: String,
}

/// Mean nearest-point distance per dataset, reading `p` as the dataset's
/// intrinsic dimension and `n` as its training-set size.
pub fn table3_report(datasets: &[(String, f64, u64)]) -> Result<Vec<Table3Row>> {
    datasets
        .iter()
        .map(|(name, p, n)| {
            let d = mean_min_distance(*n, *p)?;
            Ok(Table3Row {
                name: name.clone(),
                p: *p,
                n: *n,
                mean_min_distance: d,
                formatted: format!("{d:.2}"),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Product form evaluated directly, as an independent route.
    fn direct_product(n: u64, p: f64) -> f64 {
        (1..=n).fold(1.0, |acc, xi| acc / (1.0 + 1.0 / (p * xi as f64)))
    }

    #[test]
    fn min_distance_examples() {
        assert_eq!(mean_min_distance(1, 1.0).unwrap(), 0.5);
        let v = mean_min_distance(3, 2.0).unwrap();
        assert!((v - 48.0 / 105.0).abs() < 1e-15);
        for n in 1..50 {
            for p in [0.5, 1.0, 2.5, 9.96] {
                let a = mean_min_distance(n, p).unwrap();
                let b = direct_product(n, p);
                assert!((a - b).abs() <= 1e-10 * b);
            }
        }
        assert!(mean_min_distance(0, 1.0).is_err());
        assert!(mean_min_distance(1, 0.0).is_err());
    }

    #[test]
    fn min_distance_matches_exact_rationals() {
        use num_bigint::BigInt;
        use num_rational::BigRational;
        use num_traits::ToPrimitive;
        for p in 1..=7i64 {
            let mut exact = BigRational::from_integer(BigInt::from(1));
            for xi in 1..=40i64 {
                exact *= BigRational::new(BigInt::from(p * xi), BigInt::from(p * xi + 1));
                let want = exact.to_f64().unwrap();
                let got = mean_min_distance(xi as u64, p as f64).unwrap();
                assert!((got - want).abs() <= 1e-10 * want, "n={xi} p={p}");
            }
        }
        let tiny = mean_min_distance(10_000_000, 0.5).unwrap();
        assert!(tiny > 0.0 && tiny.is_finite());
    }

    #[test]
    fn max_distance_examples() {
        assert_eq!(mean_max_distance_paper(1, 1.0).unwrap(), 0.5);
        assert!((mean_max_distance_paper(1, 2.0).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert!((mean_max_distance_paper(2, 2.0).unwrap() - (1.0 - 4.0 / 30.0)).abs() < 1e-15);
        assert!((mean_max_distance_corrected(1, 2.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(mean_max_distance_corrected(1, 1.0).unwrap(), 0.5);
        assert_eq!(mean_max_distance_corrected(5, 3.0).unwrap(), 0.9375);
    }

    #[test]
    fn single_sample_min_equals_max() {
        for p in [0.3, 1.0, 2.0, 7.5, 100.0] {
            let a = mean_min_distance(1, p).unwrap();
            let b = mean_max_distance_corrected(1, p).unwrap();
            let want = p / (p + 1.0);
            assert!((a - want).abs() < 1e-15 && (b - want).abs() < 1e-15);
        }
    }

    #[test]
    fn relative_contrast_examples() {
        assert!(relative_contrast(1, 1.0, RcVariant::Paper).unwrap().abs() < 1e-15);
        for v in [RcVariant::Paper, RcVariant::Corrected] {
            assert!(relative_contrast(2, 1e6, v).unwrap() < 1e-5);
        }
        let rc = relative_contrast(2, 2.0, RcVariant::Corrected).unwrap();
        assert!((rc - 0.5).abs() < 1e-14);
    }

    #[test]
    fn aggarwal_difference() {
        assert!(rc_diff_vs_aggarwal(2, 1e8, 1.0, 1.0).unwrap().abs() < 1e-3);
        let far = rc_diff_vs_aggarwal(2, 1e6, 1.0, 1.0).unwrap().abs();
        let near = rc_diff_vs_aggarwal(2, 1e2, 1.0, 1.0).unwrap().abs();
        assert!(far < near);
        let diffs: Vec<f64> = (2..=8)
            .map(|e| rc_diff_vs_aggarwal(2, 10f64.powi(e), 2.0, 2.0).unwrap().abs())
            .collect();
        assert!(diffs.windows(2).all(|w| w[1] < w[0]), "{diffs:?}");
        assert!(diffs.last().unwrap() < &1e-3);
        assert!(rc_diff_vs_aggarwal(2, 10.0, 0.0, 1.0).is_err());
        assert!(rc_diff_vs_aggarwal(2, 10.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn contrast_decays_like_one_over_p() {
        for v in [RcVariant::Paper, RcVariant::Corrected] {
            let slope = rc_loglog_slope(2, 1e6, 1e8, v).unwrap();
            assert!((slope + 1.0).abs() < 1e-3, "{slope}");
        }
    }

    #[test]
    fn table3_rows() {
        let rows = table3_report(&[
            ("MNIST".into(), 9.96, 60_000),
            ("CIFAR-10".into(), 15.9, 50_000),
            ("unit test".into(), 1.0, 1),
        ])
        .unwrap();
        let got: Vec<&str> = rows.iter().map(|r| r.formatted.as_str()).collect();
        assert_eq!(got, ["0.32", "0.49", "0.50"]);
    }

    #[test]
    fn monte_carlo_is_deterministic_across_thread_counts() {
        let a = monte_carlo_order_stats(3, 2, 10_000, 5).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| monte_carlo_order_stats(3, 2, 10_000, 5).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn monte_carlo_single_sample() {
        let s = monte_carlo_order_stats(1, 1, 200_000, 1).unwrap();
        assert_eq!(s.mean_min, s.mean_max);
        assert!((s.mean_min - 0.5).abs() < 4.0 * s.se_min);
    }

    #[test]
    fn report_flags_paper_max_at_single_disk_point() {
        let r = geometry_report(
            1,
            2.0,
            Some(MonteCarloOptions { trials: 200_000, seed: 9, z_threshold: 4.0 }),
        )
        .unwrap();
        let mc = r.monte_carlo.unwrap();
        assert!(mc.min_agrees && mc.max_corrected_agrees);
        assert!(!mc.max_paper_agrees);
        assert!(geometry_report(3, 2.5, Some(MonteCarloOptions { trials: 10, seed: 0, z_threshold: 4.0 })).is_err());
    }

    proptest! {
        #[test]
        fn min_distance_monotone(n in 1u64..500, p in 0.1f64..200.0) {
            let here = mean_min_distance(n, p).unwrap();
            prop_assert!(mean_min_distance(n + 1, p).unwrap() < here);
            prop_assert!(mean_min_distance(n, p * 1.01).unwrap() > here);
            prop_assert!(here > 0.0 && here <= 1.0);
            prop_assert!(mean_max_distance_corrected(n, p).unwrap() < 1.0);
        }
    }
}
