//! Statistical verification kit: Kolmogorov–Smirnov, chi-square and
//! moment confidence intervals.

use libm::erfc;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Default significance level for every statistical check.
pub const DEFAULT_LEVEL: f64 = 1e-3;
/// Minimum sample size for the asymptotic KS p-value.
pub const KS_MIN_SAMPLES: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub n_samples: usize,
    pub pass: bool,
}

impl TestReport {
    fn new(statistic: f64, p_value: f64, n_samples: usize) -> Self {
        Self { statistic, p_value, n_samples, pass: p_value > DEFAULT_LEVEL }
    }

    /// Re-evaluates `pass` at another level.
    pub fn at_level(mut self, level: f64) -> Self {
        self.pass = self.p_value > level;
        self
    }
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn standard_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// CDF of N(0, t).
pub fn normal_cdf(t: f64) -> impl Fn(f64) -> f64 {
    let sd = t.sqrt();
    move |x| standard_normal_cdf(x / sd)
}

/// CDF of |N(0, t)|.
pub fn half_normal_cdf(t: f64) -> impl Fn(f64) -> f64 {
    let sd = t.sqrt();
    move |x| if x <= 0.0 { 0.0 } else { 2.0 * standard_normal_cdf(x / sd) - 1.0 }
}

/// Marginal CDF of skew Brownian motion with parameter `alpha` at time `t`.
///
/// The density is 2(1−α)φ_t on z < 0 and 2αφ_t on z > 0, so F(0) = 1 − α.
pub fn skew_marginal_cdf(alpha: f64, t: f64) -> impl Fn(f64) -> f64 {
    let sd = t.sqrt();
    move |z| {
        let phi = standard_normal_cdf(z / sd);
        if z <= 0.0 {
            2.0 * (1.0 - alpha) * phi
        } else {
            (1.0 - alpha) + alpha * (2.0 * phi - 1.0)
        }
    }
}

/// Kolmogorov survival function Q(λ) = P(K > λ).
///
/// Both series are truncated once terms fall below 1e-12.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-transformed series for the CDF, fast for small λ.
        let c = (2.0 * std::f64::consts::PI).sqrt() / lambda;
        let a = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for j in 1.. {
            let k = (2 * j - 1) as f64;
            let term = (a * k * k).exp();
            sum += term;
            if term < 1e-12 {
                break;
            }
        }
        (1.0 - c * sum).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for j in 1.. {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * lambda * lambda).exp();
            sum += if j % 2 == 1 { term } else { -term };
            if term < 1e-12 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

fn kolmogorov_p(d: f64, n_eff: f64) -> f64 {
    let sqrt_n = n_eff.sqrt();
    kolmogorov_q((sqrt_n + 0.12 + 0.11 / sqrt_n) * d)
}

fn checked_sorted(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteSample);
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// sup |F_emp − F| for any sample size.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64> {
    let v = checked_sorted(sample)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<TestReport> {
    if sample.len() < KS_MIN_SAMPLES {
        return Err(Error::TooFewSamples { needed: KS_MIN_SAMPLES, got: sample.len() });
    }
    let d = ks_statistic(sample, cdf)?;
    Ok(TestReport::new(d, kolmogorov_p(d, sample.len() as f64), sample.len()))
}

/// Two-sample KS statistic; ties are stepped over together.
pub fn ks_two_sample_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = checked_sorted(a)?;
    let b = checked_sorted(b)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestReport> {
    let n = a.len().min(b.len());
    if n < KS_MIN_SAMPLES {
        return Err(Error::TooFewSamples { needed: KS_MIN_SAMPLES, got: n });
    }
    let d = ks_two_sample_statistic(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    Ok(TestReport::new(d, kolmogorov_p(d, na * nb / (na + nb)), a.len() + b.len()))
}

/// (p̂, √(p̂(1 − p̂)/n)).
pub fn binomial_ci(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 0.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

/// Sample mean of x^k and its standard error.
pub fn moment_ci(sample: &[f64], k: i32) -> (f64, f64) {
    let vals: Vec<f64> = sample.iter().map(|x| x.powi(k)).collect();
    mean_se(&vals)
}

/// Mean and standard error.
pub fn mean_se(sample: &[f64]) -> (f64, f64) {
    let n = sample.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = sample.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Sample variance and its standard error √((m₄ − s⁴)/n).
pub fn variance_se(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let m2 = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = sample.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    (m2 * n / (n - 1.0), ((m4 - m2 * m2).max(0.0) / n).sqrt())
}

/// Pearson correlation.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

fn chi_square_p(stat: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let d = ChiSquared::new(dof as f64).expect("positive dof");
    (1.0 - d.cdf(stat)).clamp(0.0, 1.0)
}

/// Pearson goodness of fit of `observed` counts against `probs`.
///
/// Cells with zero probability are dropped; any count in such a cell makes
/// the p-value 0.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> TestReport {
    assert_eq!(observed.len(), probs.len());
    let n: u64 = observed.iter().sum();
    let nf = n as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(probs) {
        if p <= 0.0 {
            if o > 0 {
                return TestReport::new(f64::INFINITY, 0.0, n as usize);
            }
            continue;
        }
        let e = nf * p;
        stat += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    TestReport::new(stat, chi_square_p(stat, cells.saturating_sub(1)), n as usize)
}

/// Pearson chi-square test of independence for a contingency table.
/// Empty rows and columns are dropped.
pub fn chi_square_independence(table: &[Vec<u64>]) -> TestReport {
    let rows: Vec<&Vec<u64>> = table.iter().filter(|r| r.iter().sum::<u64>() > 0).collect();
    let ncols = table.first().map_or(0, Vec::len);
    let col_sums: Vec<u64> = (0..ncols).map(|j| rows.iter().map(|r| r[j]).sum()).collect();
    let live: Vec<usize> = (0..ncols).filter(|&j| col_sums[j] > 0).collect();
    let total: u64 = col_sums.iter().sum();
    if rows.len() < 2 || live.len() < 2 {
        return TestReport::new(0.0, 1.0, total as usize);
    }
    let t = total as f64;
    let mut stat = 0.0;
    for r in &rows {
        let rs = r.iter().sum::<u64>() as f64;
        for &j in &live {
            let e = rs * col_sums[j] as f64 / t;
            stat += (r[j] as f64 - e).powi(2) / e;
        }
    }
    let dof = (rows.len() - 1) * (live.len() - 1);
    TestReport::new(stat, chi_square_p(stat, dof), total as usize)
}

/// Two-sample homogeneity of categorical counts.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> TestReport {
    chi_square_independence(&[a.to_vec(), b.to_vec()])
}
