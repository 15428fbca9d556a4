//! Two-sample tests, correlations, least squares and a percentile bootstrap
//! for regression slopes. All p-values are asymptotic and two-sided.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::metric::DistanceMatrix;

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const DEFAULT_LEVEL: f64 = 0.95;
/// Redraws allowed for one bootstrap resample whose x values are all equal.
pub const MAX_RESAMPLE_RETRIES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub coefficient: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub p_value: f64,
    pub std_err: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCI {
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    pub n_resamples: usize,
    pub seed: u64,
}

impl BootstrapCI {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

fn need(n: usize, min: usize, what: &str) -> Result<()> {
    if n < min {
        return Err(Error::InsufficientData(format!(
            "{what} needs >= {min} observations, got {n}"
        )));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance.
fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

fn t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// Survival function of the Kolmogorov distribution, P(K > lambda).
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-theta form converges fast for small lambda
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20)
            .map(|k| {
                let m = (2 * k - 1) as f64;
                (-m * m * c).exp()
            })
            .sum();
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Largest gap between the two empirical CDFs.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Two-sided two-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// at effective size n*m/(n+m).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    need(a.len().min(b.len()), 2, "KS test")?;
    let d = ks_statistic(a, b);
    let en = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    Ok(TestResult {
        statistic: d,
        p_value: kolmogorov_sf(en.sqrt() * d),
        method: "two-sample Kolmogorov-Smirnov (asymptotic)".into(),
    })
}

/// Welch's unequal-variance t test.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    need(a.len().min(b.len()), 2, "Welch t test")?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a) / na, variance(b) / nb);
    if va + vb == 0.0 {
        return Err(Error::ZeroVariance("both samples are constant"));
    }
    let t = (mean(a) - mean(b)) / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(TestResult {
        statistic: t,
        p_value: t_two_sided(t, df),
        method: "Welch two-sample t".into(),
    })
}

/// (mean a - mean b) / pooled standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64> {
    need(a.len().min(b.len()), 2, "Cohen's d")?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = ((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / (na + nb - 2.0);
    if pooled == 0.0 {
        return Err(Error::ZeroVariance("pooled standard deviation is zero"));
    }
    Ok((mean(a) - mean(b)) / pooled.sqrt())
}

fn check_pairs(x: &[f64], y: &[f64], min: usize, what: &str) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    need(x.len(), min, what)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    check_pairs(x, y, 3, "Pearson correlation")?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("x is constant"));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("y is constant"));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (x.len() - 2) as f64;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        t_two_sided(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(Correlation {
        coefficient: r,
        p_value: p,
    })
}

/// 1-based ranks with ties given their mean rank.
pub fn mid_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation of mid-ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation> {
    check_pairs(x, y, 3, "Spearman correlation")?;
    pearson(&mid_ranks(x), &mid_ranks(y))
}

/// Least-squares line with a t(n-2) test of zero slope.
pub fn ols(x: &[f64], y: &[f64]) -> Result<RegressionResult> {
    check_pairs(x, y, 3, "regression")?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("x is constant"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let n = x.len();
    let df = (n - 2) as f64;
    let std_err = (sse / df / sxx).sqrt();
    let r_squared = if syy == 0.0 {
        0.0
    } else {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    let p_value = if std_err == 0.0 {
        if slope == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        t_two_sided(slope / std_err, df)
    };
    Ok(RegressionResult {
        slope,
        intercept,
        r_squared,
        p_value,
        std_err,
        n,
    })
}

/// Linear-interpolation quantile of sorted data (position q * (n - 1)).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile interval of OLS slopes over resamples drawn with replacement.
///
/// Resample `i` uses its own stream `(seed, i)`, so the result does not depend
/// on how the resamples are scheduled across threads.
pub fn bootstrap_slope_ci(
    x: &[f64],
    y: &[f64],
    n_resamples: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapCI> {
    check_pairs(x, y, 5, "bootstrap")?;
    if n_resamples == 0 {
        return Err(Error::InvalidConfig("need >= 1 resample".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "confidence level must be in (0, 1), got {level}"
        )));
    }
    let n = x.len();
    let mut slopes = (0..n_resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let (mut xs, mut ys) = (vec![0.0; n], vec![0.0; n]);
            for _ in 0..MAX_RESAMPLE_RETRIES {
                for k in 0..n {
                    let j = rng.random_range(0..n);
                    xs[k] = x[j];
                    ys[k] = y[j];
                }
                if xs.iter().any(|&v| v != xs[0]) {
                    return Ok(ols(&xs, &ys)?.slope);
                }
            }
            Err(Error::DegenerateResample(MAX_RESAMPLE_RETRIES))
        })
        .collect::<Result<Vec<f64>>>()?;
    slopes.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(BootstrapCI {
        level,
        lower: quantile_sorted(&slopes, tail),
        upper: quantile_sorted(&slopes, 1.0 - tail),
        n_resamples,
        seed,
    })
}

/// Off-diagonal entries split by whether the two items share a label.
/// A symmetric matrix contributes each unordered pair once; an asymmetric
/// one contributes both directions.
pub fn within_between<L: PartialEq>(m: &DistanceMatrix, labels: &[L]) -> Result<(Vec<f64>, Vec<f64>)> {
    if labels.len() != m.len() {
        return Err(Error::LengthMismatch(labels.len(), m.len()));
    }
    let (mut within, mut between) = (Vec::new(), Vec::new());
    for i in 0..m.len() {
        for j in 0..m.len() {
            if i == j || (m.is_symmetric() && j < i) {
                continue;
            }
            if labels[i] == labels[j] {
                within.push(m.get(i, j));
            } else {
                between.push(m.get(i, j));
            }
        }
    }
    Ok((within, between))
}
