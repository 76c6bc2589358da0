use edgewalk::stats::*;
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn shapiro_wilk_reference_values() {
    let a = [2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 2.8, 3.9, 4.1, 3.0];
    let r = shapiro_wilk(&a).unwrap();
    assert!(close(r.w, 0.97139, 1e-4), "W {}", r.w);
    assert!(close(r.p_value, 0.90343, 2e-3), "p {}", r.p_value);

    let b = [
        148.0, 154.0, 158.0, 160.0, 161.0, 162.0, 166.0, 170.0, 182.0, 195.0, 236.0,
    ];
    let r = shapiro_wilk(&b).unwrap();
    assert!(close(r.w, 0.78881, 1e-4), "W {}", r.w);
    assert!(close(r.p_value, 0.0067038, 5e-4), "p {}", r.p_value);

    let r = shapiro_wilk(&[1.0, 2.0, 3.0]).unwrap();
    assert!(close(r.w, 1.0, 1e-9) && close(r.p_value, 1.0, 1e-6));

    let expo = [
        0.11, 0.3897, 1.3995, 2.2001, 0.3435, 0.2578, 0.4345, 0.1026, 1.001, 0.0663, 0.4513, 3.3476, 0.2665, 1.2853,
        0.516, 2.0343, 0.9077, 1.4848, 0.2893, 0.1777, 0.0018, 1.165, 0.8944, 1.2162, 0.6536, 0.5746, 0.5898, 0.5839,
        0.0414, 2.1569,
    ];
    let r = shapiro_wilk(&expo).unwrap();
    assert!(close(r.w, 0.8555, 1e-3), "W {}", r.w);
    assert!(close(r.p_value, 0.00081, 2e-4), "p {}", r.p_value);
    assert!(!looks_normal(&expo));
}

#[test]
fn shapiro_wilk_rejects_degenerate_input() {
    assert!(shapiro_wilk(&[1.0, 2.0]).is_err());
    assert!(shapiro_wilk(&[4.0; 10]).is_err());
    assert!(shapiro_wilk(&[1.0, f64::NAN, 3.0]).is_err());
}

const A: [f64; 4] = [1.1, 2.2, 3.3, 4.4];
const B: [f64; 5] = [0.5, 5.5, 6.6, 7.7, 8.8];

#[test]
fn mann_whitney_exact_reference() {
    let r = mann_whitney(&A, &B).unwrap();
    assert_eq!(r.statistic, 4.0);
    assert!(close(r.p_value, 0.190476, 1e-6), "p {}", r.p_value);
    let s = mann_whitney(&B, &A).unwrap();
    assert_eq!(s.statistic, 16.0);
    assert!(close(s.p_value, r.p_value, 1e-12));
}

/// Exact two-sided p by enumerating every split of the pooled ranks.
fn enumerated_p(n1: usize, n2: usize, u_obs: f64) -> f64 {
    let n = n1 + n2;
    let (mut extreme, mut total) = (0u64, 0u64);
    let centre = (n1 * n2) as f64 / 2.0;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let rank_sum: usize = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).sum();
        let u = (rank_sum - n1 * (n1 + 1) / 2) as f64;
        total += 1;
        if (u - centre).abs() >= (u_obs - centre).abs() - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / total as f64
}

#[test]
fn mann_whitney_exact_matches_enumeration() {
    let mut rng = edgewalk_core::seed::rng(3);
    use rand::Rng;
    for _ in 0..30 {
        let n1 = rng.random_range(2..8);
        let n2 = rng.random_range(2..8);
        let a: Vec<f64> = (0..n1).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..n2).map(|_| rng.random::<f64>() + 0.3).collect();
        let r = mann_whitney(&a, &b).unwrap();
        let oracle = enumerated_p(n1, n2, r.statistic).min(1.0);
        assert!(close(r.p_value, oracle, 1e-9), "{} vs {oracle}", r.p_value);
    }
}

#[test]
fn welch_reference() {
    let r = welch_t_test(&A, &B).unwrap();
    assert!(close(r.statistic, -1.91294, 1e-4), "t {}", r.statistic);
    assert!(close(r.p_value, 0.106554, 1e-4), "p {}", r.p_value);
}

#[test]
fn bonferroni_thresholds() {
    assert!(close(bonferroni_threshold(100), 0.0005, 1e-15));
    assert!(close(bonferroni_threshold(6), 0.0083, 5e-5));
    assert_eq!(format!("{:.4}", bonferroni_threshold(6)), "0.0083");
    assert_eq!(bonferroni_threshold(1), 0.05);
}

#[test]
fn power_cases() {
    let p = power_report(20, 1.2, 0.05).unwrap();
    assert!(close(p, 0.95883, 1e-3), "power {p}");
    assert!(close(power_report(20, 1.2, 0.0083).unwrap(), 0.83634, 1e-3));
    assert!(close(power_report(20, 1.2, 0.0005).unwrap(), 0.50553, 1e-3));
    assert!(power_report(40, 1.2, 0.05).unwrap() > p);
}

#[test]
fn noncentral_t_reduces_to_central_t() {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    let t = StudentsT::new(0.0, 1.0, 12.0).unwrap();
    for x in [-3.0, -1.0, 0.0, 0.7, 2.5] {
        assert!(close(noncentral_t_cdf(x, 12.0, 0.0), t.cdf(x), 1e-6));
    }
}

#[test]
fn compare_orients_labels() {
    let low: Vec<f64> = (0..20).map(|i| 100.0 + f64::from(i)).collect();
    let high: Vec<f64> = (0..20).map(|i| 300.0 + f64::from(i)).collect();
    let v = compare(&low, &high, 1).unwrap();
    assert_eq!(v.label, Label::Better);
    assert_eq!(compare(&high, &low, 1).unwrap().label, Label::Worse);
    let v = compare(&low, &low, 1).unwrap();
    assert_eq!(v.label, Label::Similar);
    assert!(compare(&low[..2], &high, 1).is_err());
}

#[test]
fn pearson_reference() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let y = [2.0, 4.1, 5.9, 8.2, 9.9];
    let c = pearson_correlation(&x, &y).unwrap();
    // oracle: textbook sums
    let (mx, my) = (3.0, 30.1 / 5.0);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    assert!(close(c.r, sxy / (sxx * syy).sqrt(), 1e-12));
    assert!(close(c.slope, sxy / sxx, 1e-12));
    assert!(close(c.intercept, my - sxy / sxx * mx, 1e-12));
    assert!(c.p_value < 1e-3);
    assert!(pearson_correlation(&x, &[1.0; 5]).is_err());
}

fn sample(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(1.0f64..1000.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn verdicts_are_antisymmetric(a in sample(3..30), b in sample(3..30), m in 1usize..50) {
        let ab = compare(&a, &b, m).unwrap();
        let ba = compare(&b, &a, m).unwrap();
        prop_assert_eq!(ab.label, ba.label.mirrored());
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-9);
    }

    #[test]
    fn bonferroni_is_monotone(m in 1usize..1000) {
        prop_assert!(bonferroni_threshold(m + 1) < bonferroni_threshold(m));
        prop_assert!((bonferroni_threshold(m) * m as f64 - 0.05).abs() < 1e-15);
    }

    #[test]
    fn mann_whitney_ignores_monotone_transforms(a in sample(3..20), b in sample(3..20)) {
        let r = mann_whitney(&a, &b).unwrap();
        let f = |x: &f64| x.ln() * 3.0 + 7.0;
        let ta: Vec<f64> = a.iter().map(f).collect();
        let tb: Vec<f64> = b.iter().map(f).collect();
        let t = mann_whitney(&ta, &tb).unwrap();
        prop_assert_eq!(r.statistic, t.statistic);
        prop_assert!((r.p_value - t.p_value).abs() < 1e-12);
    }

    #[test]
    fn p_values_are_probabilities(a in sample(3..40), b in sample(3..40)) {
        for p in [mann_whitney(&a, &b).unwrap().p_value, welch_t_test(&a, &b).unwrap().p_value] {
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
