//! Mean first-passage time from right-censored first-passage samples.
//!
//! The product-limit (Kaplan-Meier) estimate of the first-passage CDF is fitted
//! with a two-parameter Weibull CDF `F(x) = 1 - exp(-(x / lambda)^k)` by
//! nonlinear least squares, and the mean first-passage time is the mean of the
//! fitted law, `lambda * Gamma(1 + 1/k)`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::sim::TrialRecord;

const MAX_ITERATIONS: usize = 500;

/// Pooled event times with censoring flags.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SurvivalDataset {
    times: Vec<f64>,
    observed: Vec<bool>,
}

impl SurvivalDataset {
    pub fn new(times: Vec<f64>, observed: Vec<bool>) -> Result<Self> {
        if times.len() != observed.len() {
            return Err(Error::invalid("times and censoring flags differ in length"));
        }
        if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::invalid(alloc::format!("event time {t} is not positive")));
        }
        Ok(Self { times, observed })
    }

    /// Pools first passages of several trials; robots that never found the
    /// target are censored at the trial duration.
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a TrialRecord>) -> Self {
        let mut times = Vec::new();
        let mut observed = Vec::new();
        for rec in records {
            for fp in &rec.first_passage {
                match fp {
                    Some(t) => {
                        times.push(*t);
                        observed.push(true);
                    }
                    None => {
                        times.push(rec.duration);
                        observed.push(false);
                    }
                }
            }
        }
        Self { times, observed }
    }

    pub fn push(&mut self, time: f64, observed: bool) -> Result<()> {
        if !(time.is_finite() && time > 0.0) {
            return Err(Error::invalid(alloc::format!("event time {time} is not positive")));
        }
        self.times.push(time);
        self.observed.push(observed);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    pub fn event_count(&self) -> usize {
        self.observed.iter().filter(|o| **o).count()
    }

    pub fn censored_count(&self) -> usize {
        self.len() - self.event_count()
    }

    /// Multiplies every time by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            times: self.times.iter().map(|t| t * factor).collect(),
            observed: self.observed.clone(),
        }
    }
}

/// One drop of the product-limit survival curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmStep {
    pub time: f64,
    pub at_risk: usize,
    pub events: usize,
    /// Survival just after `time`.
    pub survival: f64,
    /// `1 - survival`, carried separately so uncensored data gives the
    /// empirical CDF without rounding.
    pub cdf: f64,
}

/// Kaplan-Meier estimate; the CDF is the step function `1 - S(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KaplanMeier {
    pub steps: Vec<KmStep>,
    /// No event was observed, the CDF is identically zero.
    pub all_censored: bool,
    pub n_events: usize,
    pub n_censored: usize,
}

impl KaplanMeier {
    pub fn survival_at(&self, t: f64) -> f64 {
        self.steps
            .iter()
            .take_while(|s| s.time <= t)
            .last()
            .map_or(1.0, |s| s.survival)
    }

    pub fn cdf_at(&self, t: f64) -> f64 {
        self.steps
            .iter()
            .take_while(|s| s.time <= t)
            .last()
            .map_or(0.0, |s| s.cdf)
    }

    /// `(time, cdf)` pairs at every step.
    pub fn cdf_steps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.steps.iter().map(|s| (s.time, s.cdf))
    }
}

pub fn kaplan_meier(data: &SurvivalDataset) -> Result<KaplanMeier> {
    if data.is_empty() {
        return Err(Error::invalid("empty survival dataset"));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data.times[a].total_cmp(&data.times[b]));

    // The product telescopes between censorings: S(t) = s0 * (n - d) / n0,
    // with (s0, n0) taken at the last censoring.
    let mut steps = Vec::new();
    let mut at_risk = data.len();
    let mut anchor_survival = 1.0;
    let mut anchor_risk = data.len();
    let mut survivors = data.len();
    let mut i = 0;
    while i < order.len() {
        let t = data.times[order[i]];
        let mut events = 0;
        let mut leaving = 0;
        while i < order.len() && data.times[order[i]] == t {
            if data.observed[order[i]] {
                events += 1;
            }
            leaving += 1;
            i += 1;
        }
        if events > 0 {
            survivors -= events;
            let fraction = survivors as f64 / anchor_risk as f64;
            let lost = (anchor_risk - survivors) as f64 / anchor_risk as f64;
            steps.push(KmStep {
                time: t,
                at_risk,
                events,
                survival: anchor_survival * fraction,
                cdf: (1.0 - anchor_survival) + anchor_survival * lost,
            });
        }
        at_risk -= leaving;
        if leaving > events {
            anchor_survival *= survivors as f64 / anchor_risk as f64;
            anchor_risk = at_risk;
        }
        survivors = at_risk;
    }
    let n_events = data.event_count();
    Ok(KaplanMeier {
        all_censored: n_events == 0,
        steps,
        n_events,
        n_censored: data.len() - n_events,
    })
}

/// Weibull parameters fitted to a first-passage CDF.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeibullFit {
    /// Scale `lambda` (s).
    pub scale: f64,
    /// Shape `k`.
    pub shape: f64,
    /// Mean of the fitted law (s).
    pub mean_fpt: f64,
    /// Root-mean-square CDF residual over the fitted points.
    pub residual: f64,
    pub iterations: usize,
}

pub fn weibull_cdf(x: f64, scale: f64, shape: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    -libm::expm1(-libm::pow(x / scale, shape))
}

/// `lambda * Gamma(1 + 1/k)`.
pub fn mean_fpt(scale: f64, shape: f64) -> f64 {
    scale * libm::tgamma(1.0 + 1.0 / shape)
}

/// Fits the Weibull CDF to the Kaplan-Meier steps by least squares.
///
/// Each step is represented by the midpoint between the plateau before and
/// after it. Starting values come from the linearisation
/// `ln(-ln(1 - F)) = k ln x - k ln lambda`; Levenberg-Marquardt then refines
/// `(ln lambda, ln k)`.
pub fn fit_weibull(km: &KaplanMeier) -> Result<WeibullFit> {
    let interior = km.steps.iter().filter(|s| s.survival > 0.0 && s.survival < 1.0).count();
    if interior < 3 {
        return Err(Error::FitFailure {
            reason: alloc::format!("need 3 interior CDF steps, have {interior}"),
            residual: f64::NAN,
        });
    }
    let mut prev = 0.0;
    let points: Vec<(f64, f64)> = km
        .steps
        .iter()
        .map(|s| {
            let mid = 0.5 * (prev + s.cdf);
            prev = s.cdf;
            (s.time, mid)
        })
        .collect();
    let (scale0, shape0) = linearised_start(&points);
    least_squares(&points, scale0, shape0)
}

fn linearised_start(points: &[(f64, f64)]) -> (f64, f64) {
    let mut n = 0.0;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(t, f) in points {
        if f <= 0.0 || f >= 1.0 {
            continue;
        }
        let x = libm::log(t);
        let y = libm::log(-libm::log1p(-f));
        n += 1.0;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let var = sxx - sx * sx / n;
    let slope = if var > 0.0 { (sxy - sx * sy / n) / var } else { 0.0 };
    if slope.is_finite() && slope > 0.0 {
        let intercept = (sy - slope * sx) / n;
        let scale = libm::exp(-intercept / slope);
        if scale.is_finite() && scale > 0.0 {
            return (scale, slope);
        }
    }
    let median = points[points.len() / 2].0;
    (median, 1.0)
}

fn sse(points: &[(f64, f64)], log_scale: f64, log_shape: f64) -> f64 {
    let scale = libm::exp(log_scale);
    let shape = libm::exp(log_shape);
    points
        .iter()
        .map(|&(t, y)| {
            let r = weibull_cdf(t, scale, shape) - y;
            r * r
        })
        .sum()
}

fn least_squares(points: &[(f64, f64)], scale0: f64, shape0: f64) -> Result<WeibullFit> {
    let mut a = libm::log(scale0);
    let mut b = libm::log(shape0);
    let mut cost = sse(points, a, b);
    let mut damping = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let scale = libm::exp(a);
        let shape = libm::exp(b);
        // normal equations of the Gauss-Newton step
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(t, y) in points {
            let z = libm::pow(t / scale, shape);
            let e = libm::exp(-z);
            let r = (1.0 - e) - y;
            // dF/d(ln lambda) = -k z e^{-z}, dF/d(ln k) = k ln(t/lambda) z e^{-z}
            let da = -shape * z * e;
            let db = shape * libm::log(t / scale) * z * e;
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        let mut accepted = false;
        while damping < 1e12 {
            let m_aa = jaa * (1.0 + damping);
            let m_bb = jbb * (1.0 + damping);
            let det = m_aa * m_bb - jab * jab;
            if !(det.is_finite() && det > 0.0) {
                damping *= 10.0;
                continue;
            }
            let step_a = -(m_bb * ga - jab * gb) / det;
            let step_b = -(m_aa * gb - jab * ga) / det;
            let trial = sse(points, a + step_a, b + step_b);
            if trial.is_finite() && trial <= cost {
                let improvement = cost - trial;
                a += step_a;
                b += step_b;
                damping = (damping / 10.0).max(1e-12);
                let small_step = libm::fabs(step_a) < 1e-12 && libm::fabs(step_b) < 1e-12;
                converged = small_step || improvement <= 1e-15 * cost.max(1e-300);
                cost = trial;
                accepted = true;
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            // no descent direction left: at a minimum up to rounding
            converged = true;
        }
        if converged {
            break;
        }
    }

    let scale = libm::exp(a);
    let shape = libm::exp(b);
    let residual = libm::sqrt(cost / points.len() as f64);
    if !converged || !(scale.is_finite() && shape.is_finite() && scale > 0.0 && shape > 0.0) {
        return Err(Error::FitFailure {
            reason: String::from("least squares did not converge"),
            residual,
        });
    }
    Ok(WeibullFit {
        scale,
        shape,
        mean_fpt: mean_fpt(scale, shape),
        residual,
        iterations,
    })
}

/// Mean first-passage estimate that never fails: unfittable datasets map to
/// an infinite mean with the reason attached.
#[derive(Debug, Clone, PartialEq)]
pub struct FptEstimate {
    pub fit: Option<WeibullFit>,
    /// Fitted mean, or `f64::INFINITY` when no fit was possible.
    pub mean_fpt: f64,
    pub n_events: usize,
    pub n_censored: usize,
    pub failure: Option<String>,
}

impl FptEstimate {
    pub fn is_sentinel(&self) -> bool {
        self.fit.is_none()
    }
}

pub fn estimate_mean_fpt(data: &SurvivalDataset) -> FptEstimate {
    let n_events = data.event_count();
    let n_censored = data.censored_count();
    let sentinel = |reason: String| FptEstimate {
        fit: None,
        mean_fpt: f64::INFINITY,
        n_events,
        n_censored,
        failure: Some(reason),
    };
    let km = match kaplan_meier(data) {
        Ok(km) => km,
        Err(e) => return sentinel(alloc::format!("{e}")),
    };
    if km.all_censored {
        return sentinel(String::from("all observations censored"));
    }
    match fit_weibull(&km) {
        Ok(fit) => FptEstimate {
            mean_fpt: fit.mean_fpt,
            fit: Some(fit),
            n_events,
            n_censored,
            failure: None,
        },
        Err(e) => sentinel(alloc::format!("{e}")),
    }
}

/// Censored maximum-likelihood Weibull fit, `(scale, shape)`.
///
/// Cross-check for [`fit_weibull`]; solves the profile score equation in the
/// shape by bisection on times rescaled to the largest observation.
pub fn fit_weibull_mle(data: &SurvivalDataset) -> Result<(f64, f64)> {
    let events = data.event_count();
    if events < 2 {
        return Err(Error::FitFailure {
            reason: String::from("need at least two events"),
            residual: f64::NAN,
        });
    }
    let t_max = data.times.iter().cloned().fold(0.0, f64::max);
    let logs: Vec<f64> = data.times.iter().map(|t| libm::log(t / t_max)).collect();
    let mean_event_log = logs
        .iter()
        .zip(&data.observed)
        .filter(|(_, o)| **o)
        .map(|(l, _)| *l)
        .sum::<f64>()
        / events as f64;
    let score = |k: f64| {
        let (mut s0, mut s1) = (0.0, 0.0);
        for l in &logs {
            let w = libm::exp(k * l);
            s0 += w;
            s1 += w * l;
        }
        s1 / s0 - 1.0 / k - mean_event_log
    };
    let (mut lo, mut hi) = (1e-3, 1e3);
    if score(lo) > 0.0 || score(hi) < 0.0 {
        return Err(Error::FitFailure {
            reason: String::from("shape outside [1e-3, 1e3]"),
            residual: f64::NAN,
        });
    }
    for _ in 0..200 {
        let mid = libm::sqrt(lo * hi);
        if score(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let shape = libm::sqrt(lo * hi);
    let sum: f64 = logs.iter().map(|l| libm::exp(shape * l)).sum();
    let scale = t_max * libm::pow(sum / events as f64, 1.0 / shape);
    Ok((scale, shape))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn dataset(times: &[f64], observed: &[bool]) -> SurvivalDataset {
        SurvivalDataset::new(times.to_vec(), observed.to_vec()).unwrap()
    }

    #[test]
    fn uncensored_reduces_to_ecdf() {
        let km = kaplan_meier(&dataset(&[1.0, 2.0, 3.0], &[true; 3])).unwrap();
        let cdf: Vec<(f64, f64)> = km.cdf_steps().collect();
        assert_eq!(cdf.len(), 3);
        assert!((cdf[0].1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((cdf[1].1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(cdf[2].1, 1.0);
    }

    #[test]
    fn censored_middle_point() {
        let km = kaplan_meier(&dataset(&[1.0, 2.0, 3.0], &[true, false, true])).unwrap();
        assert!((km.survival_at(1.0) - 2.0 / 3.0).abs() < 1e-12);
        assert!((km.survival_at(2.5) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(km.survival_at(3.0), 0.0);
    }

    #[test]
    fn all_censored_is_flagged() {
        let km = kaplan_meier(&dataset(&[5.0], &[false])).unwrap();
        assert!(km.all_censored);
        assert_eq!(km.cdf_at(100.0), 0.0);
        let est = estimate_mean_fpt(&dataset(&[5.0], &[false]));
        assert!(est.is_sentinel());
        assert_eq!(est.mean_fpt, f64::INFINITY);
    }

    #[test]
    fn ties_between_events_and_censoring() {
        // censored observations at an event time stay at risk for that event
        let km = kaplan_meier(&dataset(&[2.0, 2.0, 2.0, 4.0], &[true, false, true, true])).unwrap();
        assert_eq!(km.steps[0].at_risk, 4);
        assert_eq!(km.steps[0].events, 2);
        assert!((km.steps[0].survival - 0.5).abs() < 1e-15);
        assert_eq!(km.steps[1].at_risk, 1);
    }

    #[test]
    fn rejects_bad_times() {
        assert!(SurvivalDataset::new(vec![0.0], vec![true]).is_err());
        assert!(SurvivalDataset::new(vec![f64::NAN], vec![true]).is_err());
        assert!(SurvivalDataset::new(vec![1.0], vec![]).is_err());
        assert!(kaplan_meier(&SurvivalDataset::default()).is_err());
    }

    #[test]
    fn degenerate_cdf_does_not_fit() {
        let km = kaplan_meier(&dataset(&[1.0, 2.0], &[true, true])).unwrap();
        assert!(matches!(fit_weibull(&km), Err(Error::FitFailure { .. })));
    }

    #[test]
    fn analytic_means() {
        assert_eq!(mean_fpt(2000.0, 1.0), 2000.0);
        assert!((mean_fpt(1000.0, 0.5) - 2000.0).abs() < 1e-9);
        let half_sqrt_pi = libm::sqrt(core::f64::consts::PI) / 2.0;
        assert!((mean_fpt(1.0, 2.0) - half_sqrt_pi).abs() < 1e-10);
    }
}
