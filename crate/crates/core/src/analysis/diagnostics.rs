use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// One-sample Kolmogorov–Smirnov statistic `sup |F_n − F|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
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
    Ok(d)
}

/// Sample autocorrelation at `lag`.
pub fn autocorrelation(xs: &[f64], lag: usize) -> f64 {
    let n = xs.len();
    if lag >= n {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    let var: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = xs.iter().zip(&xs[lag..]).map(|(a, b)| (a - m) * (b - m)).sum();
    cov / var
}

/// Smallest `k ≥ 1` whose lag-`k` autocorrelation is below `threshold` in absolute value.
pub fn thinning_lag(xs: &[f64], threshold: f64) -> usize {
    let max_lag = (xs.len() / 10).max(1);
    (1..=max_lag)
        .find(|&k| autocorrelation(xs, k).abs() < threshold)
        .unwrap_or(max_lag)
}

pub fn thin(xs: &[f64], k: usize) -> Vec<f64> {
    xs.iter().step_by(k.max(1)).copied().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BatchMeans {
    pub mean: f64,
    pub std_error: f64,
    pub batches: usize,
}

/// Batch-means estimate of the mean and its standard error. Trailing samples that do not
/// fill a batch are dropped.
pub fn batch_means(xs: &[f64], batches: usize) -> Result<BatchMeans> {
    if batches < 2 {
        return Err(Error::InvalidParameter {
            name: "batches",
            reason: format!("need at least 2, got {batches}"),
        });
    }
    let size = xs.len() / batches;
    if size == 0 {
        return Err(Error::Empty("batches"));
    }
    let means: Vec<f64> = xs
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let b = batches as f64;
    let mean = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1.0);
    Ok(BatchMeans {
        mean,
        std_error: (var / b).sqrt(),
        batches,
    })
}
