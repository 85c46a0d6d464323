use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// 1% critical value of the modified Anderson-Darling statistic for
/// normality with estimated mean and variance.
pub const AD_CRITICAL_1PCT: f64 = 1.035;

/// Order statistics summary; every field equals the value for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

fn quantile_sorted(s: &[f64], q: f64) -> f64 {
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        Some(Summary {
            count: s.len(),
            mean: s.iter().sum::<f64>() / s.len() as f64,
            min: s[0],
            q25: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            q75: quantile_sorted(&s, 0.75),
            max: s[s.len() - 1],
        })
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance; `None` below two values.
pub fn variance(x: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let m = mean(x);
    Some(x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityDiagnostics {
    pub component: usize,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Modified statistic `A^2 (1 + 0.75/n + 2.25/n^2)`.
    pub anderson_darling: f64,
    pub critical_1pct: f64,
    pub passes_1pct: bool,
    /// Largest gap between standardized order statistics and normal quantiles.
    pub qq_max_discrepancy: f64,
}

/// Normality diagnostics of a sample standardized by its own mean and
/// standard deviation. Needs at least 8 values.
pub fn normality(sample: &[f64], component: usize) -> Option<NormalityDiagnostics> {
    let n = sample.len();
    let var = variance(sample)?;
    if n < 8 || !(var > 0.0) {
        return None;
    }
    let m = mean(sample);
    let sd = var.sqrt();
    let mut z: Vec<f64> = sample.iter().map(|x| (x - m) / sd).collect();
    z.sort_by(f64::total_cmp);
    let nf = n as f64;
    let std = Normal::standard();
    let p: Vec<f64> = z.iter().map(|&v| std.cdf(v).clamp(1e-300, 1.0 - 1e-16)).collect();
    let mut s = 0.0;
    for i in 0..n {
        s += (2 * i + 1) as f64 * (p[i].ln() + (1.0 - p[n - 1 - i]).ln());
    }
    let a2 = -nf - s / nf;
    let a2_star = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    let m2 = z.iter().map(|v| v * v).sum::<f64>() / nf;
    let skewness = z.iter().map(|v| v.powi(3)).sum::<f64>() / nf / m2.powf(1.5);
    let excess_kurtosis = z.iter().map(|v| v.powi(4)).sum::<f64>() / nf / (m2 * m2) - 3.0;
    let qq =
        z.iter().enumerate().map(|(i, v)| (v - std.inverse_cdf((i as f64 + 0.5) / nf)).abs()).fold(0.0f64, f64::max);
    Some(NormalityDiagnostics {
        component,
        skewness,
        excess_kurtosis,
        anderson_darling: a2_star,
        critical_1pct: AD_CRITICAL_1PCT,
        passes_1pct: a2_star < AD_CRITICAL_1PCT,
        qq_max_discrepancy: qq,
    })
}

/// Kolmogorov-Smirnov distance `sup |F_n - F|` between the empirical law of
/// `sample` and a continuous `cdf`, over points where `cdf` is continuous.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.627_6 / (n as f64).sqrt()
}
