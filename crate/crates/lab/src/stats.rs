//! Hypothesis tests used to compare first-passage samples.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF, Normal, StudentsT};

use crate::error::{LabError, Result};

/// Family-wise significance level before correction.
pub const FAMILY_ALPHA: f64 = 0.05;
/// Level of the normality gate.
pub const NORMALITY_ALPHA: f64 = 0.05;
/// Largest group size with an exact Mann-Whitney distribution.
pub const EXACT_MANN_WHITNEY_MAX: usize = 25;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn invalid(msg: impl Into<String>) -> LabError {
    LabError::Core(edgewalk_core::Error::InvalidArgument(msg.into()))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapiroWilk {
    pub w: f64,
    pub p_value: f64,
}

/// Shapiro-Wilk W with Royston's p-value approximation, 3 <= n <= 5000.
pub fn shapiro_wilk(sample: &[f64]) -> Result<ShapiroWilk> {
    let n = sample.len();
    if !(3..=5000).contains(&n) {
        return Err(invalid(format!("Shapiro-Wilk needs 3..=5000 values, got {n}")));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(invalid("Shapiro-Wilk needs finite values"));
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range <= 0.0 {
        return Err(LabError::Core(edgewalk_core::Error::UndefinedStatistic(
            "Shapiro-Wilk of a constant sample".into(),
        )));
    }
    let half = n / 2;
    let an = n as f64;
    let norm = std_normal();

    // coefficients for the upper half, largest first
    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let m: Vec<f64> = (1..=half)
            .map(|i| norm.inverse_cdf((i as f64 - 0.375) / (an + 0.25)))
            .collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / an.sqrt();
        let c1 = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
        let c2 = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
        let a1 = poly(&c1, rsn) - m[0] / ssumm2;
        let (first, fac) = if n > 5 {
            let a2 = -m[1] / ssumm2 + poly(&c2, rsn);
            a[1] = a2;
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
            (2, fac)
        } else {
            (1, ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt())
        };
        a[0] = a1;
        for i in first..half {
            a[i] = -m[i] / fac;
        }
    }

    let xbar = mean(&x);
    let ssq: f64 = x.iter().map(|v| (v - xbar).powi(2)).sum();
    let num: f64 = (0..half).map(|i| a[i] * (x[n - 1 - i] - x[i])).sum();
    let w = (num * num / ssq).min(1.0);

    let p_value = if n == 3 {
        let pi6 = 6.0 / std::f64::consts::PI;
        let stqr = std::f64::consts::PI / 3.0;
        (pi6 * (w.sqrt().asin() - stqr)).clamp(0.0, 1.0)
    } else {
        let w1 = (1.0 - w).ln();
        let (y, m, s) = if n <= 11 {
            let gamma = poly(&[-2.273, 0.459], an);
            if w1 >= gamma {
                return Ok(ShapiroWilk { w, p_value: 1e-99 });
            }
            let y = -(gamma - w1).ln();
            let m = poly(&[0.544, -0.39978, 0.025054, -6.714e-4], an);
            let s = poly(&[1.3822, -0.77857, 0.062767, -0.0020322], an).exp();
            (y, m, s)
        } else {
            let xx = an.ln();
            let m = poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], xx);
            let s = poly(&[-0.4803, -0.082676, 0.0030302], xx).exp();
            (w1, m, s)
        };
        1.0 - norm.cdf((y - m) / s)
    };
    Ok(ShapiroWilk { w, p_value })
}

/// Normal at the gate level; constant or non-finite samples are not.
pub fn looks_normal(sample: &[f64]) -> bool {
    shapiro_wilk(sample).is_ok_and(|s| s.p_value >= NORMALITY_ALPHA)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

/// Welch's unequal-variance two-sample t-test.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(invalid("t-test needs at least two values per sample"));
    }
    let (ma, mb) = (mean(a), mean(b));
    let var = |xs: &[f64], m: f64| xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    let (sa, sb) = (var(a, ma) / a.len() as f64, var(b, mb) / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let p_value = if ma == mb { 1.0 } else { 0.0 };
        return Ok(TestResult {
            statistic: 0.0,
            p_value,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() - 1) as f64 + sb * sb / (b.len() - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| LabError::Runtime(format!("t distribution: {e}")))?;
    let p_value = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(TestResult { statistic: t, p_value })
}

/// Mid-ranks of the pooled sample; returns the ranks and the tie-group sizes.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Number of arrangements giving each U for group sizes (m, n).
fn u_counts(m: usize, n: usize) -> Vec<f64> {
    // counts[j][u] for the current i, recurrence f(i, j, u) = f(i-1, j, u-j) + f(i, j-1, u)
    let max_u = m * n;
    let mut prev: Vec<Vec<f64>> = (0..=n)
        .map(|_| {
            let mut v = vec![0.0; max_u + 1];
            v[0] = 1.0;
            v
        })
        .collect();
    for _ in 1..=m {
        let mut cur: Vec<Vec<f64>> = vec![vec![0.0; max_u + 1]; n + 1];
        cur[0][0] = 1.0;
        for j in 1..=n {
            for u in 0..=max_u {
                let from_i = if u >= j { prev[j][u - j] } else { 0.0 };
                cur[j][u] = from_i + cur[j - 1][u];
            }
        }
        prev = cur;
    }
    prev.swap_remove(n)
}

/// Mann-Whitney U test; `statistic` is U of the first sample.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<TestResult> {
    let (n1, n2) = (a.len(), b.len());
    if n1 == 0 || n2 == 0 {
        return Err(invalid("Mann-Whitney needs non-empty samples"));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(invalid("Mann-Whitney values must not be NaN"));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum: f64 = ranks[..n1].iter().sum();
    let u = rank_sum - (n1 * (n1 + 1)) as f64 / 2.0;
    let has_ties = ties.iter().any(|&t| t > 1);

    let p_value = if n1 <= EXACT_MANN_WHITNEY_MAX && n2 <= EXACT_MANN_WHITNEY_MAX && !has_ties {
        let counts = u_counts(n1, n2);
        let total: f64 = counts.iter().sum();
        let k = u.round() as usize;
        let lower: f64 = counts[..=k].iter().sum::<f64>() / total;
        let upper: f64 = counts[k..].iter().sum::<f64>() / total;
        (2.0 * lower.min(upper)).min(1.0)
    } else {
        let (f1, f2) = (n1 as f64, n2 as f64);
        let nn = f1 + f2;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (nn * (nn - 1.0));
        let sigma = (f1 * f2 / 12.0 * ((nn + 1.0) - tie_term)).sqrt();
        if sigma == 0.0 {
            1.0
        } else {
            let z = ((u - f1 * f2 / 2.0).abs() - 0.5).max(0.0) / sigma;
            (2.0 * (1.0 - std_normal().cdf(z))).min(1.0)
        }
    };
    Ok(TestResult { statistic: u, p_value })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    Worse,
    Similar,
    Better,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Worse => "worse",
            Label::Similar => "similar",
            Label::Better => "better",
        }
    }

    pub fn mirrored(self) -> Self {
        match self {
            Label::Worse => Label::Better,
            Label::Better => Label::Worse,
            Label::Similar => Label::Similar,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestKind {
    #[serde(rename = "t-test")]
    TTest,
    #[serde(rename = "mann-whitney")]
    MannWhitney,
}

impl TestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::TTest => "t-test",
            TestKind::MannWhitney => "mann-whitney",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// How the first sample compares with the second (lower first-passage time is better).
    pub label: Label,
    pub test: TestKind,
    pub p_value: f64,
    pub threshold: f64,
}

pub fn bonferroni_threshold(n_comparisons: usize) -> f64 {
    FAMILY_ALPHA / n_comparisons.max(1) as f64
}

pub fn compare(a: &[f64], b: &[f64], n_comparisons: usize) -> Result<Verdict> {
    if a.len() < 3 || b.len() < 3 {
        return Err(invalid(format!(
            "comparison needs at least 3 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let threshold = bonferroni_threshold(n_comparisons);
    let (test, result, a_lower) = if looks_normal(a) && looks_normal(b) {
        let r = welch_t_test(a, b)?;
        (TestKind::TTest, r, r.statistic < 0.0)
    } else {
        let r = mann_whitney(a, b)?;
        (TestKind::MannWhitney, r, r.statistic < (a.len() * b.len()) as f64 / 2.0)
    };
    let label = if result.p_value >= threshold {
        Label::Similar
    } else if a_lower {
        Label::Better
    } else {
        Label::Worse
    };
    Ok(Verdict {
        label,
        test,
        p_value: result.p_value,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Two-sided p-value of r = 0.
    pub p_value: f64,
    pub n: usize,
}

pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(invalid(
            "correlation needs two equal-length samples of at least 3 values",
        ));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if !(sxx > 0.0 && syy > 0.0) || !sxy.is_finite() {
        return Err(LabError::Core(edgewalk_core::Error::UndefinedStatistic(
            "correlation of a zero-variance or non-finite sample".into(),
        )));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let slope = sxy / sxx;
    let n = x.len();
    let df = (n - 2) as f64;
    let p_value = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| LabError::Runtime(format!("t distribution: {e}")))?;
        (2.0 * dist.cdf(-t.abs())).min(1.0)
    };
    Ok(Correlation {
        r,
        slope,
        intercept: my - slope * mx,
        p_value,
        n,
    })
}

/// `P(T <= t)` for a noncentral t with `df` degrees of freedom and noncentrality `delta`.
pub fn noncentral_t_cdf(t: f64, df: f64, delta: f64) -> f64 {
    // integrate Phi(t sqrt(v / df) - delta) against the chi-square density of v
    let chi = ChiSquared::new(df).expect("positive degrees of freedom");
    let norm = std_normal();
    let upper = df + 40.0 * (2.0 * df).sqrt() + 40.0;
    let steps = 8000;
    let h = upper / steps as f64;
    let f = |v: f64| norm.cdf(t * (v / df).sqrt() - delta) * chi.pdf(v);
    let mut sum = f(0.0) + f(upper);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(i as f64 * h);
    }
    (sum * h / 3.0).clamp(0.0, 1.0)
}

/// Power of a two-sided two-sample t-test with `n` values per group for a
/// mean difference of `effect_sd` standard deviations.
pub fn power_report(n: usize, effect_sd: f64, alpha: f64) -> Result<f64> {
    if n < 2 || !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("power needs n >= 2 and 0 < alpha < 1"));
    }
    let df = (2 * n - 2) as f64;
    let delta = effect_sd * (n as f64 / 2.0).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| LabError::Runtime(format!("t distribution: {e}")))?;
    let crit = dist.inverse_cdf(1.0 - alpha / 2.0);
    Ok(1.0 - noncentral_t_cdf(crit, df, delta) + noncentral_t_cdf(-crit, df, delta))
}
