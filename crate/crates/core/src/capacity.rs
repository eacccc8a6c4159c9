//! VC-dimension scales and excess-error bounds for dense, convolutional,
//! Dropout and DropConnect networks.
//!
//! The VC results are order statements. Every `vc_bound_*` function evaluates
//! the expression inside the `O(.)` with its constant taken as 1, so the
//! outputs are bound *scales*, comparable with each other but not absolute.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative tolerance when comparing the two operation-count routes.
const OPERATION_COUNT_RTOL: f64 = 1e-9;

/// Number of weights in a fully connected stack: `sum n_i * n_{i+1}`.
pub fn weight_count(layer_sizes: &[u64]) -> Result<u64> {
    if layer_sizes.len() < 2 {
        return Err(Error::domain(format!(
            "a network needs at least 2 layers, got {}",
            layer_sizes.len()
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::domain("every layer needs at least one unit"));
    }
    layer_sizes
        .windows(2)
        .try_fold(0u64, |acc, w| acc.checked_add(w[0].checked_mul(w[1])?))
        .ok_or_else(|| Error::domain("weight count overflows u64"))
}

/// `w^4`.
pub fn vc_bound_dense(w: f64) -> f64 {
    w.powi(4)
}

/// Number of cells cut out of `d`-space by `p` hyperplanes in general position.
pub fn cell_count(p: u64, d: u64) -> BigUint {
    if p <= d {
        return BigUint::one() << p;
    }
    let mut term = BigUint::one();
    let mut sum = BigUint::one();
    for i in 1..=d {
        term = term * (p - i + 1) / i;
        sum += &term;
    }
    sum
}

fn ln_biguint(v: &BigUint) -> f64 {
    if v.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = v.bits();
    if bits <= 1000 {
        return v.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    // Keep the top 64 bits and account for the rest with a power of two.
    let shift = bits - 64;
    let top = (v >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Number of class labels the cells support per dimension: `C(p, d)^(1/d)`.
pub fn classes_supported(p: u64, d: u64) -> Result<f64> {
    if d == 0 {
        return Err(Error::domain("data dimension d must be at least 1"));
    }
    Ok((ln_biguint(&cell_count(p, d)) / d as f64).exp())
}

/// Input side length for which `l` rounds of (conv `k`, subsample `s`) reduce
/// the map to a single unit: `s^l + k (s^{l-1} + ... + s + 1)`.
pub fn cnn_input_size(k: u64, s: u64, l: u32) -> BigUint {
    let k = BigUint::from(k);
    let s = BigUint::from(s);
    let mut n = BigUint::one();
    // n_{j} = s * n_{j-1} + k, starting from a single unit.
    for _ in 0..l {
        n = &n * &s + &k;
    }
    n
}

fn check_cnn(m: u64, k: u64, s: u64, l: u32) -> Result<()> {
    if m == 0 || k == 0 || s == 0 || l == 0 {
        return Err(Error::domain(format!(
            "CNN parameters must all be at least 1 (m={m}, k={k}, s={s}, l={l})"
        )));
    }
    Ok(())
}

/// Spatial extents seen by each conv layer: `e_1 = n - k`, `e_j = e_{j-1}/s - k`.
pub fn cnn_layer_extents(k: u64, s: u64, l: u32) -> Vec<f64> {
    let n = cnn_input_size(k, s, l).to_f64().unwrap_or(f64::INFINITY);
    let (k, s) = (k as f64, s as f64);
    let mut out = Vec::with_capacity(l as usize);
    let mut e = n - k;
    for _ in 0..l {
        out.push(e);
        e = e / s - k;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperationCount {
    /// Sum over layers of `(m / l) * extent`.
    pub layer_sum: f64,
    /// The closed form, defined only for `s >= 2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<f64>,
    /// Whether the two routes agree to a relative `1e-9`; absent for `s = 1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agrees: Option<bool>,
}

/// Operation count of a CNN with `m` maps spread evenly over `l` layers.
///
/// `m / l` is treated as a real number when `l` does not divide `m`.
pub fn cnn_operation_count(m: u64, k: u64, s: u64, l: u32) -> Result<OperationCount> {
    check_cnn(m, k, s, l)?;
    let per_layer = m as f64 / f64::from(l);
    let layer_sum = per_layer * cnn_layer_extents(k, s, l).iter().sum::<f64>();
    let closed_form = (s >= 2).then(|| {
        let (mf, kf, sf, lf) = (m as f64, k as f64, s as f64, f64::from(l));
        let sl1 = sf.powi(l as i32 - 1);
        let sl = sf.powi(l as i32);
        mf * kf * sf * sf * (sl1 - 1.0) / (lf * (sf - 1.0).powi(2)) + mf * sf * (sl - 1.0) / (lf * (sf - 1.0))
    });
    let agrees = closed_form.map(|c| {
        let scale = c.abs().max(layer_sum.abs()).max(1.0);
        (c - layer_sum).abs() <= OPERATION_COUNT_RTOL * scale
    });
    Ok(OperationCount {
        layer_sum,
        closed_form,
        agrees,
    })
}

/// Dimension of the CNN parameter space, `m * k`.
pub fn cnn_parameter_dimension(m: u64, k: u64) -> u64 {
    m.saturating_mul(k)
}

/// `m^4 k^4 s^(2l - 2) / l^2`.
pub fn vc_bound_cnn(m: u64, k: u64, s: u64, l: u32) -> Result<f64> {
    check_cnn(m, k, s, l)?;
    let lf = f64::from(l);
    Ok((m as f64).powi(4) * (k as f64).powi(4) * (s as f64).powi(2 * l as i32 - 2) / (lf * lf))
}

fn check_drop(w: f64, p: f64) -> Result<()> {
    if !(w >= 1.0) || !w.is_finite() {
        return Err(Error::domain(format!("w must be a finite value >= 1, got {w}")));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::domain(format!("drop probability must lie in [0, 1), got {p}")));
    }
    Ok(())
}

/// `(1 - p)^8 w^4`: every unit survives with probability `1 - p`, so each
/// weight survives with `(1 - p)^2`.
pub fn vc_bound_dropout(w: f64, p: f64) -> Result<f64> {
    check_drop(w, p)?;
    Ok((1.0 - p).powi(8) * w.powi(4))
}

/// `(1 - p)^4 w^4`: every weight survives with probability `1 - p`.
pub fn vc_bound_dropconnect(w: f64, p: f64) -> Result<f64> {
    check_drop(w, p)?;
    Ok((1.0 - p).powi(4) * w.powi(4))
}

/// Radicand of [`excess_error_bound`], before the square root.
pub fn excess_error_radicand(h: f64, n: f64, eta: f64) -> f64 {
    (h * ((2.0 * n / h).ln() + 1.0) - (eta / 4.0).ln()) / n
}

/// `sqrt((h (ln(2N/h) + 1) - ln(eta/4)) / N)`.
///
/// Fails when the radicand is not positive, which happens once `h` is large
/// compared with `N` (roughly `h > 2eN`).
pub fn excess_error_bound(h: f64, n: u64, eta: f64) -> Result<f64> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::domain(format!("VC value h must be positive and finite, got {h}")));
    }
    if n == 0 {
        return Err(Error::domain("training-set size N must be at least 1"));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!("confidence eta must lie in (0, 1], got {eta}")));
    }
    let r = excess_error_radicand(h, n as f64, eta);
    if !(r > 0.0) {
        return Err(Error::domain(format!(
            "excess-error radicand is {r} (h = {h}, N = {n}); the bound is undefined"
        )));
    }
    Ok(r.sqrt())
}

/// Upper end of the range `0 < h < 2N/e` on which the bound is asserted to
/// grow with `h`.
pub fn monotone_regime_limit(n: u64) -> f64 {
    2.0 * n as f64 / std::f64::consts::E
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaComparison {
    pub w: f64,
    pub p: f64,
    pub n: u64,
    pub eta: f64,
    pub h_dropout: f64,
    pub h_dropconnect: f64,
    pub gamma_dropout: f64,
    pub gamma_dropconnect: f64,
    /// `gamma_dropout <= gamma_dropconnect`.
    pub ordered: bool,
    /// Both `h` values lie below `2N/e`.
    pub monotone_regime: bool,
}

pub fn gamma_dropout_vs_dropconnect(w: f64, p: f64, n: u64, eta: f64) -> Result<GammaComparison> {
    let h_dropout = vc_bound_dropout(w, p)?;
    let h_dropconnect = vc_bound_dropconnect(w, p)?;
    let gamma_dropout = excess_error_bound(h_dropout, n, eta)?;
    let gamma_dropconnect = excess_error_bound(h_dropconnect, n, eta)?;
    let limit = monotone_regime_limit(n);
    Ok(GammaComparison {
        w,
        p,
        n,
        eta,
        h_dropout,
        h_dropconnect,
        gamma_dropout,
        gamma_dropconnect,
        ordered: gamma_dropout <= gamma_dropconnect,
        monotone_regime: h_dropout < limit && h_dropconnect < limit,
    })
}

/// A network description accepted by [`bound_report`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum ArchitectureSpec {
    Dense { layer_sizes: Vec<u64> },
    Cnn { maps: u64, kernel: u64, subsampling: u64, layers: u32 },
    Dropout { layer_sizes: Vec<u64>, p: f64 },
    Dropconnect { layer_sizes: Vec<u64>, p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub architecture: ArchitectureSpec,
    /// Adjustable parameters: weights for dense variants, `m * k` for a CNN.
    pub w: u64,
    pub vc_upper: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Why `gamma` is absent when training parameters were supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operation_count: Option<OperationCount>,
}

/// Training-set parameters for the excess-error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleParams {
    pub n: u64,
    pub eta: f64,
}

pub fn bound_report(arch: &ArchitectureSpec, sample: Option<SampleParams>) -> Result<BoundReport> {
    let (w, vc_upper, operation_count) = match arch {
        ArchitectureSpec::Dense { layer_sizes } => {
            let w = weight_count(layer_sizes)?;
            (w, vc_bound_dense(w as f64), None)
        }
        ArchitectureSpec::Cnn {
            maps,
            kernel,
            subsampling,
            layers,
        } => {
            let vc = vc_bound_cnn(*maps, *kernel, *subsampling, *layers)?;
            let ops = cnn_operation_count(*maps, *kernel, *subsampling, *layers)?;
            (cnn_parameter_dimension(*maps, *kernel), vc, Some(ops))
        }
        ArchitectureSpec::Dropout { layer_sizes, p } => {
            let w = weight_count(layer_sizes)?;
            (w, vc_bound_dropout(w as f64, *p)?, None)
        }
        ArchitectureSpec::Dropconnect { layer_sizes, p } => {
            let w = weight_count(layer_sizes)?;
            (w, vc_bound_dropconnect(w as f64, *p)?, None)
        }
    };
    let (gamma, gamma_error) = match sample {
        None => (None, None),
        Some(sp) => match excess_error_bound(vc_upper, sp.n, sp.eta) {
            Ok(g) => (Some(g), None),
            Err(e) => (None, Some(e.to_string())),
        },
    };
    Ok(BoundReport {
        architecture: arch.clone(),
        w,
        vc_upper,
        gamma,
        gamma_error,
        operation_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_binomial(p: u64, i: u64) -> u128 {
        (0..i).fold(1u128, |acc, j| acc * u128::from(p - j) / u128::from(j + 1))
    }

    #[test]
    fn weight_count_examples() {
        assert_eq!(weight_count(&[3, 2]).unwrap(), 6);
        assert_eq!(weight_count(&[4, 3, 2]).unwrap(), 18);
        assert_eq!(weight_count(&[1, 1, 1, 1]).unwrap(), 3);
        assert!(weight_count(&[5]).is_err());
        assert!(weight_count(&[5, 0]).is_err());
    }

    #[test]
    fn dense_bound_examples() {
        assert_eq!(vc_bound_dense(1.0), 1.0);
        assert_eq!(vc_bound_dense(10.0), 10000.0);
        assert_eq!(vc_bound_dense(18.0), 104976.0);
    }

    #[test]
    fn cell_count_examples() {
        assert_eq!(cell_count(3, 5), BigUint::from(8u32));
        assert_eq!(cell_count(5, 3), BigUint::from(26u32));
        assert_eq!(cell_count(0, 1), BigUint::from(1u32));
        for p in 0..40u64 {
            for d in 1..12u64 {
                let want: u128 = (0..=p.min(d)).map(|i| naive_binomial(p, i)).sum();
                assert_eq!(cell_count(p, d), BigUint::from(want), "p={p} d={d}");
                if p > d {
                    assert!(cell_count(p, d) < BigUint::one() << p);
                }
            }
        }
    }

    #[test]
    fn classes_supported_examples() {
        assert!((classes_supported(8, 8).unwrap() - 2.0).abs() < 1e-12);
        // p > d, so the binomial-sum branch applies: sum_{i<=8} C(16, i) = 39203.
        assert!((classes_supported(16, 8).unwrap() - 39203f64.powf(1.0 / 8.0)).abs() < 1e-12);
        assert!((classes_supported(5, 3).unwrap() - 26f64.cbrt()).abs() < 1e-12);
        assert!((classes_supported(5, 3).unwrap() - 2.9625).abs() < 1e-4);
        assert!(classes_supported(3, 0).is_err());
        // Very large arrangements still yield a finite value.
        assert!(classes_supported(5000, 2000).unwrap().is_finite());
    }

    #[test]
    fn cnn_input_size_examples() {
        assert_eq!(cnn_input_size(5, 3, 1), BigUint::from(8u32));
        assert_eq!(cnn_input_size(5, 3, 2), BigUint::from(29u32));
        assert_eq!(cnn_input_size(5, 1, 3), BigUint::from(16u32));
        assert_eq!(cnn_input_size(5, 3, 0), BigUint::from(1u32));
    }

    #[test]
    fn cnn_input_size_inverts_one_stage() {
        for k in 1..6u64 {
            for s in 1..5u64 {
                for l in 1..8u32 {
                    let n = cnn_input_size(k, s, l);
                    let prev = (n - k) / s;
                    assert_eq!(prev, cnn_input_size(k, s, l - 1));
                }
            }
        }
    }

    #[test]
    fn operation_count_examples() {
        let one = cnn_operation_count(1, 1, 2, 1).unwrap();
        assert_eq!(one.layer_sum, 2.0);
        assert_eq!(one.closed_form, Some(2.0));
        assert_eq!(one.agrees, Some(true));

        let two = cnn_operation_count(2, 5, 3, 2).unwrap();
        assert_eq!(two.layer_sum, 27.0);
        assert!((two.closed_form.unwrap() - 34.5).abs() < 1e-12);
        assert_eq!(two.agrees, Some(false));

        let flat = cnn_operation_count(3, 2, 1, 3).unwrap();
        assert!(flat.layer_sum.is_finite());
        assert_eq!(flat.closed_form, None);
        // n = 7; extents 5, 3, 1 with one map per layer.
        assert_eq!(flat.layer_sum, 9.0);
    }

    #[test]
    fn operation_count_routes_agree_for_single_layer() {
        for m in 1..5 {
            for k in 1..6 {
                for s in 2..6 {
                    assert_eq!(cnn_operation_count(m, k, s, 1).unwrap().agrees, Some(true));
                }
            }
        }
    }

    #[test]
    fn layer_sum_matches_expanded_series() {
        // Layer j sees s^{l-j+1} + k (s + ... + s^{l-j}).
        for k in 1..5u64 {
            for s in 2..5u64 {
                for l in 1..6u32 {
                    let mut want = 0.0;
                    for j in 1..=l {
                        let top = l - j + 1;
                        let mut e = (s as f64).powi(top as i32);
                        for q in 1..top {
                            e += k as f64 * (s as f64).powi(q as i32);
                        }
                        want += e;
                    }
                    let got = cnn_operation_count(u64::from(l), k, s, l).unwrap().layer_sum;
                    assert!((got - want).abs() < 1e-9 * want, "k={k} s={s} l={l}");
                }
            }
        }
    }

    #[test]
    fn cnn_bound_examples() {
        assert_eq!(vc_bound_cnn(1, 1, 1, 1).unwrap(), 1.0);
        assert_eq!(vc_bound_cnn(2, 3, 2, 2).unwrap(), 1296.0);
        assert!((vc_bound_cnn(4, 5, 2, 3).unwrap() - 256.0 * 625.0 * 16.0 / 9.0).abs() < 1e-6);
        assert!(vc_bound_cnn(0, 1, 1, 1).is_err());
    }

    #[test]
    fn drop_bounds() {
        assert_eq!(vc_bound_dropout(10.0, 0.0).unwrap(), 10000.0);
        assert_eq!(vc_bound_dropout(10.0, 0.5).unwrap(), 39.0625);
        assert!((vc_bound_dropout(100.0, 0.9).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(vc_bound_dropconnect(10.0, 0.0).unwrap(), 10000.0);
        assert_eq!(vc_bound_dropconnect(10.0, 0.5).unwrap(), 625.0);
        assert!(vc_bound_dropout(10.0, 1.0).is_err());
        assert!(vc_bound_dropconnect(10.0, -0.1).is_err());
    }

    #[test]
    fn excess_error_examples() {
        let v = excess_error_bound(100.0, 10_000, 0.05).unwrap();
        assert!((v - 0.2518).abs() < 1e-4);
        let v = excess_error_bound(100.0, 100, 1.0).unwrap();
        assert!((v - 1.3066).abs() < 1e-4);
        let lo = excess_error_bound(100.0, 10_000, 0.05).unwrap();
        let hi = excess_error_bound(100.0, 10_000, 0.01).unwrap();
        assert!(hi > lo);
        let err = excess_error_bound(1e9, 1000, 0.05).unwrap_err();
        assert!(err.to_string().contains("radicand"));
        assert!(excess_error_bound(0.0, 10, 0.5).is_err());
        assert!(excess_error_bound(1.0, 10, 0.0).is_err());
    }

    #[test]
    fn gamma_examples() {
        let g = gamma_dropout_vs_dropconnect(10.0, 0.0, 1_000_000, 0.05).unwrap();
        assert_eq!(g.gamma_dropout, g.gamma_dropconnect);
        assert!(g.ordered);
        let g = gamma_dropout_vs_dropconnect(10.0, 0.5, 1_000_000, 0.05).unwrap();
        assert!(g.ordered && g.monotone_regime);
        assert!(g.gamma_dropout < g.gamma_dropconnect);
    }

    #[test]
    fn bound_report_variants() {
        let r = bound_report(&ArchitectureSpec::Dense { layer_sizes: vec![4, 3, 2] }, None).unwrap();
        assert_eq!(r.w, 18);
        assert_eq!(r.vc_upper, 104976.0);
        assert_eq!(r.gamma, None);
        let r = bound_report(
            &ArchitectureSpec::Dropout { layer_sizes: vec![4, 3, 2], p: 0.5 },
            Some(SampleParams { n: 1_000_000, eta: 0.05 }),
        )
        .unwrap();
        assert!(r.gamma.is_some());
        let r = bound_report(
            &ArchitectureSpec::Dense { layer_sizes: vec![100, 100] },
            Some(SampleParams { n: 10, eta: 0.05 }),
        )
        .unwrap();
        assert!(r.gamma.is_none());
        assert!(r.gamma_error.is_some());
        let r = bound_report(
            &ArchitectureSpec::Cnn { maps: 2, kernel: 5, subsampling: 3, layers: 2 },
            None,
        )
        .unwrap();
        assert_eq!(r.w, 10);
        assert_eq!(r.operation_count.unwrap().agrees, Some(false));
    }

    proptest! {
        #[test]
        fn dropout_never_exceeds_dropconnect(w in 1.0f64..1e4, p in 0.0f64..0.999) {
            prop_assert!(vc_bound_dropout(w, p).unwrap() <= vc_bound_dropconnect(w, p).unwrap());
        }

        #[test]
        fn zero_drop_equals_dense(w in 1.0f64..1e5) {
            prop_assert_eq!(vc_bound_dropout(w, 0.0).unwrap(), vc_bound_dense(w));
            prop_assert_eq!(vc_bound_dropconnect(w, 0.0).unwrap(), vc_bound_dense(w));
        }

        #[test]
        fn excess_error_increases_in_h_below_regime_limit(
            n in 10u64..10_000_000,
            a in 1e-6f64..1.0,
            b in 1e-6f64..1.0,
            eta in 1e-4f64..1.0,
        ) {
            let limit = monotone_regime_limit(n);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-6);
            let (h1, h2) = (lo * limit, hi * limit);
            prop_assert!(excess_error_bound(h1, n, eta).unwrap() < excess_error_bound(h2, n, eta).unwrap());
        }
    }
}
