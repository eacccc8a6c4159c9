//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits nonzero if any fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use texdim_core::capacity::{excess_error_bound, gamma_dropout_vs_dropconnect, vc_bound_dropconnect, vc_bound_dropout};
use texdim_core::counting::{brute_force_distinct_values, rational_to_string, CountReport, CountingParams, Statistic, DEFAULT_ENUMERATION_CAP};
use texdim_core::geometry::{
    geometry_report, mean_min_distance, relative_contrast, MonteCarloOptions, RcVariant,
};
use texdim_core::idim::{generate_embedded_cube, mle_intrinsic_dimension, stream_rng, IdimConfig, PointCloud};
use texdim_core::pipeline::decode_file;
use texdim_core::pipeline::ingest::raw_vectors;
use texdim_core::texture::{compute_glcm, haralick_features, GlcmOffset, GrayImage};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn run(id: &str, title: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let pass = o.pass && in_time;
    let timing = if in_time {
        format!("{:.2?} of {:?}", elapsed, budget)
    } else {
        format!("{:.2?} exceeds {:?}", elapsed, budget)
    };
    println!(
        "criterion {id} [{}] {title}: {} ({timing})",
        if pass { "PASS" } else { "FAIL" },
        o.detail
    );
    pass
}

fn nearest_distance_rows() -> Outcome {
    let a = mean_min_distance(60_000, 9.96).unwrap();
    let b = mean_min_distance(50_000, 15.9).unwrap();
    let (fa, fb) = (format!("{a:.2}"), format!("{b:.2}"));
    outcome(fa == "0.32" && fb == "0.49", format!("MNIST {a:.6} -> {fa}, CIFAR-10 {b:.6} -> {fb}"))
}

fn order_statistics_oracle() -> Outcome {
    let mut bad = Vec::new();
    let mut paper_max_flagged_at_1_2 = false;
    for n in [1u64, 3, 10] {
        for p in [1usize, 2, 3, 5] {
            let opts = MonteCarloOptions {
                trials: 1_000_000,
                seed: 20_240_601,
                z_threshold: 4.0,
            };
            let r = geometry_report(n, p as f64, Some(opts)).unwrap();
            let mc = r.monte_carlo.unwrap();
            if !mc.min_agrees {
                bad.push(format!("min at n={n},p={p} z={:.2}", mc.z_min));
            }
            if !mc.max_corrected_agrees {
                bad.push(format!("max at n={n},p={p} z={:.2}", mc.z_max_corrected));
            }
            if (n, p) == (1, 2) {
                paper_max_flagged_at_1_2 = !mc.max_paper_agrees;
            }
        }
    }
    let detail = if bad.is_empty() {
        format!("12 points within 4 SE; stated max formula flagged at (1, 2): {paper_max_flagged_at_1_2}")
    } else {
        format!("outside 4 SE: {}", bad.join(", "))
    };
    outcome(bad.is_empty() && paper_max_flagged_at_1_2, detail)
}

fn relative_contrast_limit() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for variant in [RcVariant::Paper, RcVariant::Corrected] {
        let values: Vec<f64> = (1..=8)
            .map(|e| relative_contrast(2, 10f64.powi(e), variant).unwrap())
            .collect();
        let decreasing = values.windows(2).all(|w| w[1] < w[0]);
        let at_1e6 = values[5];
        pass &= decreasing && at_1e6 < 1e-5;
        notes.push(format!("{variant:?}: decreasing={decreasing}, RC(2,1e6)={at_1e6:.3e}"));
    }
    outcome(pass, notes.join("; "))
}

fn counting_verification() -> Outcome {
    let mut bad = Vec::new();
    let mut checked = 0;
    let params = |n, k| CountingParams::new(n, k).unwrap();
    let mut agree = |n: u32, k: u32, stat: Statistic, bad: &mut Vec<String>| {
        let r = CountReport::compute(params(n, k), stat, Some(DEFAULT_ENUMERATION_CAP)).unwrap();
        checked += 1;
        if r.agrees != Some(true) {
            bad.push(format!("{stat} at n={n},kappa={k}"));
        }
    };
    for n in 1..=3 {
        agree(n, 2, Statistic::MatrixCount, &mut bad);
        agree(n, 2, Statistic::Contrast, &mut bad);
    }
    for k in 2..=3 {
        agree(2, k, Statistic::MatrixCount, &mut bad);
    }
    let asm = CountReport::compute(params(2, 2), Statistic::Asm, Some(DEFAULT_ENUMERATION_CAP)).unwrap();
    let asm_ok = rational_to_string(&asm.formula_value) == "11"
        && asm.oracle_value.as_ref().map(ToString::to_string).as_deref() == Some("5")
        && asm.flags.iter().any(|f| f == "formula_oracle_disagree");
    let capped = brute_force_distinct_values(params(4, 4), Statistic::MatrixCount, DEFAULT_ENUMERATION_CAP).is_err();
    outcome(
        bad.is_empty() && asm_ok && capped,
        format!(
            "{checked} formula/oracle pairs, mismatches: [{}]; ASM 11 vs 5 flagged: {asm_ok}; cap enforced beyond reach: {capped}",
            bad.join(", ")
        ),
    )
}

fn capacity_bound_properties() -> Outcome {
    let n = 1_000_000u64;
    let eta = 0.05;
    let mut vc_violations = Vec::new();
    let mut gamma_violations = Vec::new();
    let mut undefined = Vec::new();
    let mut outside_regime = Vec::new();
    let mut equality_ok = true;
    for w in [10.0f64, 100.0, 1000.0] {
        for i in 0..10 {
            let p = f64::from(i) / 10.0;
            let at = format!("(w={w},p={p})");
            let vd = vc_bound_dropout(w, p).unwrap();
            let vc = vc_bound_dropconnect(w, p).unwrap();
            if vd > vc {
                vc_violations.push(at.clone());
            }
            if (i == 0) != (vd == vc) {
                equality_ok = false;
            }
            match gamma_dropout_vs_dropconnect(w, p, n, eta) {
                Ok(g) => {
                    if !g.ordered {
                        gamma_violations.push(at.clone());
                    }
                    if i == 0 && g.gamma_dropout != g.gamma_dropconnect {
                        equality_ok = false;
                    }
                    if !g.monotone_regime {
                        outside_regime.push(at);
                    }
                }
                Err(_) => undefined.push(at),
            }
        }
    }
    let pass = vc_violations.is_empty()
        && gamma_violations.is_empty()
        && undefined.is_empty()
        && outside_regime.is_empty()
        && equality_ok;
    outcome(
        pass,
        format!(
            "vc order violations {}, gamma order violations {}, gamma undefined (negative radicand) at {} points {}, \
             h outside 2N/e at {} more points {}, equality only at p=0: {equality_ok}",
            vc_violations.len(),
            gamma_violations.len(),
            undefined.len(),
            undefined.join(" "),
            outside_regime.len(),
            outside_regime.join(" "),
        ),
    )
}

fn excess_error_spot_value() -> Outcome {
    // Arbitrary-precision evaluation: 0.2518360107866779145621330679245359.
    const ORACLE: f64 = 0.251_836_010_786_677_9;
    let got = excess_error_bound(100.0, 10_000, 0.05).unwrap();
    let pass = (got - 0.2518).abs() <= 1e-4 && (got - ORACLE).abs() <= 1e-12;
    outcome(pass, format!("{got:.17} vs oracle {ORACLE:.17}"))
}

fn mnist_path() -> Option<PathBuf> {
    let candidates = [
        std::env::var_os("TEXDIM_MNIST").map(PathBuf::from),
        Some(PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/train-images-idx3-ubyte"))),
    ];
    candidates.into_iter().flatten().find(|p| p.is_file())
}

fn intrinsic_dimension_sanity() -> Outcome {
    let cfg = IdimConfig::with_range(10, 20);
    let mut notes = Vec::new();
    let mut pass = true;
    for (i, p) in [1usize, 2, 5, 10].into_iter().enumerate() {
        let cloud = generate_embedded_cube(2000, p, 50, 1000 + i as u64, true).unwrap();
        let est = mle_intrinsic_dimension(&cloud, &cfg).unwrap().global_value;
        let ok = (est - p as f64).abs() <= 0.15 * p as f64;
        pass &= ok;
        notes.push(format!("p={p}: {est:.3}{}", if ok { "" } else { " (outside 15%)" }));
    }
    match mnist_path() {
        Some(path) => {
            let images = decode_file(&path, 256).unwrap();
            let cloud = PointCloud::from_rows(&raw_vectors(&images).unwrap()).unwrap();
            let est = mle_intrinsic_dimension(&cloud, &cfg).unwrap().global_value;
            notes.push(format!(
                "MNIST raw (best effort, not gating): {est:.3} vs 9.96 +/- 1.5 -> {}",
                if (est - 9.96).abs() <= 1.5 { "within" } else { "outside" }
            ));
        }
        None => notes.push("MNIST optional check skipped, dataset absent".into()),
    }
    outcome(pass, notes.join("; "))
}

fn random_image(h: usize, w: usize, levels: u32, seed: u64, index: u64) -> GrayImage {
    let mut rng = stream_rng(seed, index);
    let pixels = (0..h * w).map(|_| rng.random_range(0..levels)).collect();
    GrayImage::new(w, h, levels, pixels).unwrap()
}

fn texture_properties() -> Outcome {
    let offsets: Vec<GlcmOffset> = [true, false]
        .into_iter()
        .flat_map(GlcmOffset::standard)
        .collect();
    let mut cases = 0u64;
    let mut bad = Vec::new();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
    for h in 4..=8 {
        for w in 4..=8 {
            for levels in [2u32, 3, 4, 8, 16] {
                for value in [0, levels - 1] {
                    let img = GrayImage::constant(w, h, levels, value).unwrap();
                    for &o in &offsets {
                        let f = haralick_features(&compute_glcm(&img, o).unwrap().normalize().unwrap());
                        cases += 1;
                        if f.asm != 1.0 || f.contrast != 0.0 {
                            bad.push(format!("constant {h}x{w} kappa={levels} {}", o.label()));
                        }
                    }
                }
                for sample in 0..8 {
                    let img = random_image(h, w, levels, 7, (h * 100 + w * 10) as u64 * 64 + u64::from(levels) * 8 + sample);
                    let rev = img.reversed();
                    for &o in &offsets {
                        let g = compute_glcm(&img, o).unwrap().normalize().unwrap();
                        let a = haralick_features(&g);
                        let b = haralick_features(&compute_glcm(&rev, o).unwrap().normalize().unwrap());
                        cases += 1;
                        let invariant = close(a.asm, b.asm)
                            && close(a.contrast, b.contrast)
                            && close(a.entropy, b.entropy)
                            && close(a.inverse_difference_moment, b.inverse_difference_moment);
                        if !invariant {
                            bad.push(format!("reversal {h}x{w} kappa={levels} {}", o.label()));
                        }
                        if o.symmetric {
                            let k = g.levels();
                            let marginal_ok = (0..k).all(|i| {
                                let row: f64 = (0..k).map(|j| g.get(i, j)).sum();
                                let col: f64 = (0..k).map(|j| g.get(j, i)).sum();
                                close(row, col)
                            });
                            if !marginal_ok {
                                bad.push(format!("marginals {h}x{w} kappa={levels} {}", o.label()));
                            }
                        }
                    }
                }
            }
            let board = GrayImage::checkerboard(w, h).unwrap();
            for symmetric in [true, false] {
                let o = GlcmOffset::new(0, 1, symmetric).unwrap();
                let f = haralick_features(&compute_glcm(&board, o).unwrap().normalize().unwrap());
                cases += 1;
                if f.contrast != 1.0 {
                    bad.push(format!("checkerboard {h}x{w} {}", o.label()));
                }
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("{cases} fixture/offset cases, {} failures {}", bad.len(), bad.join(", ")),
    )
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let results = [
        run("1", "nearest-distance rows (analytic)", secs(1), nearest_distance_rows),
        run("2", "order-statistics Monte Carlo oracle", secs(120), order_statistics_oracle),
        run("3", "relative contrast limit", secs(1), relative_contrast_limit),
        run("4", "counting formulas vs enumeration", secs(60), counting_verification),
        run("5", "capacity-bound ordering", secs(1), capacity_bound_properties),
        run("6", "excess-error spot value", secs(1), excess_error_spot_value),
        run("7", "intrinsic-dimension sanity", secs(30), intrinsic_dimension_sanity),
        run("8", "texture feature properties", secs(10), texture_properties),
    ];
    println!("criterion 9 [N/A] network training curves: out of scope, nothing to run");
    let failed = results.iter().filter(|&&ok| !ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
