use num_rational::Ratio;
use proptest::prelude::*;

use shiftconv::detmat::{weighted_matrix_sum, DetInstance};
use shiftconv::experiments::{exponent_calculator, run_experiment, ExperimentConfig, ErrorReport, Row};
use shiftconv::mainterm::{certain_main_fit, main_term, Truncation};
use shiftconv::numeric::ols_slope;
use shiftconv::sums::{
    certain_sum, classify_box, classify_partition, direct_sum, dyadic_cover, CaseTag, CertainQuery, ConvolutionQuery,
    ExponentThresholds,
};
use shiftconv::weights::SmoothWeight;

#[test]
fn k2_main_term_within_one_percent() {
    let w = SmoothWeight::mollifier();
    let s = direct_sum(&ConvolutionQuery { k: 2, h: 1, x: 1e5, w: w.clone() }).unwrap();
    let m = main_term(2, 1, 1e5, &w, Truncation::Hyperbola).unwrap().value;
    assert!((s - m).abs() / s < 0.01, "S = {s}, M = {m}");
}

#[test]
fn certain_sum_matches_matrix_sum() {
    let w = SmoothWeight::mollifier();
    let s = certain_sum(&CertainQuery { r1: 2, r2: 3, h: 1, x: 1e4, w1: w.clone(), w2: w.clone() }).unwrap();
    let m = weighted_matrix_sum(&DetInstance::new(2, 3, 1).unwrap(), 1e4, &w, &w).unwrap();
    assert!(s > 0.0);
    assert!((s - m).abs() <= 1e-12 * s, "{s} vs {m}");
}

#[test]
fn certain_fit_residuals_decay() {
    let w = SmoothWeight::mollifier();
    let xs: Vec<f64> = (0..12).map(|i| 1e4 * 1e3f64.powf(i as f64 / 11.0)).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| certain_sum(&CertainQuery { r1: 2, r2: 3, h: 1, x, w1: w.clone(), w2: w.clone() }).unwrap())
        .collect();
    let fit = certain_main_fit(2, 3, &xs, &ys).unwrap();
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let lr: Vec<f64> = fit.residuals.iter().map(|r| r.abs().ln()).collect();
    let slope = ols_slope(&lx, &lr).unwrap().0;
    println!("certain fit coefficients {:?}, residual slope {slope:.4}", fit.coeffs);
    assert!(slope < 0.95, "residual slope {slope}");
}

fn k1_slope(x_max: f64) -> ErrorReport {
    let cfg = ExperimentConfig::from_toml(&format!("k = 1\nh = 1\nx_min = 1e4\nx_max = {x_max:e}\ngrid_points = 12\n")).unwrap();
    run_experiment(&cfg).unwrap()
}

#[test]
fn k1_slope_does_not_grow_with_range() {
    let a = k1_slope(1e6);
    let b = k1_slope(1e7);
    println!("k = 1 slopes: to 1e6 {:?} (dropped {}), to 1e7 {:?} (dropped {})", a.fitted_slope, a.dropped.len(), b.fitted_slope, b.dropped.len());
    let (sa, sb) = (a.fitted_slope.unwrap(), b.fitted_slope.unwrap());
    assert!(sb <= sa + 0.1, "{sa} -> {sb}");
}

#[test]
fn boxes_of_a_large_cover_classify() {
    let w = SmoothWeight::mollifier();
    for delta in [1.0 / 32.0, 1.0 / 16.0] {
        let boxes = dyadic_cover(1e6, 4, &w).unwrap();
        assert!(!boxes.is_empty());
        for b in &boxes {
            let c = classify_box(b, delta).unwrap();
            assert!((c.alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            if c.case.tag == CaseTag::C {
                assert!(!c.case.witness.is_empty());
            }
        }
    }
}

#[test]
fn report_csv_round_trips() {
    let rows = vec![Row { x: 1e4, s: 0.1 + 0.2, m: 1.0 / 3.0, r: 0.3 - 1.0 / 3.0, abs_r: (0.3f64 - 1.0 / 3.0).abs() }];
    let rep = ErrorReport { rows: rows.clone(), fitted_slope: None, dropped: vec![], predicted_exponent: 1.0, slope_s: 1.0, slope_m: 1.0 };
    let csv = rep.to_csv();
    let vals: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(vals, vec![rows[0].x, rows[0].s, rows[0].m, rows[0].r, rows[0].abs_r]);
}

fn composition(total: i64) -> impl Strategy<Value = Vec<i64>> {
    (1usize..=6).prop_flat_map(move |k| proptest::collection::vec(0..=total, k - 1)).prop_map(move |mut cuts| {
        cuts.sort();
        let mut parts = Vec::new();
        let mut prev = 0;
        for c in cuts {
            parts.push(c - prev);
            prev = c;
        }
        parts.push(total - prev);
        parts
    })
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn partition_case_always_found(parts in composition(240), den in 16i64..=64) {
        let mut alpha: Vec<Ratio<i64>> = parts.iter().map(|&p| Ratio::new(p, 240)).collect();
        alpha.sort_by(|a, b| b.cmp(a));
        let delta = Ratio::new(1, den);
        let c = classify_partition(&alpha, delta).unwrap();
        let third = Ratio::new(1, 3);
        match c.tag {
            CaseTag::A => prop_assert!(alpha[0] >= third + delta * 2 / 3),
            CaseTag::B => prop_assert!(alpha.len() >= 2 && alpha[0] + alpha[1] >= Ratio::new(1, 2) + delta),
            CaseTag::C => {
                let s: Ratio<i64> = c.witness.iter().map(|&i| alpha[i]).sum();
                prop_assert!(s >= delta * 2 && s <= third - delta * 4 / 3);
            }
        }
    }

    #[test]
    fn thresholds_ordered(den in 16u32..=1000, lx in 0.7f64..20.0) {
        let t = ExponentThresholds::new(lx.exp(), 1.0 / den as f64);
        prop_assert!(t.x4 <= t.x3 && t.x3 <= t.x1 && t.x1 <= t.x2);
    }

    #[test]
    fn exponents_never_below_baseline(dn in 17i64..=200, tn in 0i64..=7, en in 0i64..=99) {
        let (d, th, e) = (Ratio::new(1, dn.max(16)), Ratio::new(tn, 64), Ratio::new(en, 100));
        let t = exponent_calculator(d, th, e).unwrap();
        // every exponent is at least 1 - delta and nontriviality means < 1
        prop_assert!(t.theorem >= Ratio::new(1, 1) - d);
        prop_assert!(t.general.exponent >= Ratio::new(1, 1) - d);
        prop_assert_eq!(t.general.nontrivial, t.general.exponent < Ratio::new(1, 1));
    }

    #[test]
    fn direct_sum_scales_with_weight(x in 2e3f64..2e4) {
        let w = SmoothWeight::mollifier();
        let a = direct_sum(&ConvolutionQuery { k: 2, h: 1, x, w: w.clone() }).unwrap();
        let b = direct_sum(&ConvolutionQuery { k: 2, h: 1, x: x * 1.5, w }).unwrap();
        prop_assert!(a > 0.0 && b > a);
    }
}
