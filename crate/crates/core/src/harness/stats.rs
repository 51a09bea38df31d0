use serde::Serialize;

use crate::error::{NmcError, Result};

/// Error statistics of a replicate set against a truth. Quantiles are of the
/// squared error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MseStats {
    pub mse: f64,
    pub bias_sq: f64,
    pub variance: f64,
    pub mean: f64,
    /// Standard error of `mean` (sample standard deviation over `sqrt(R)`).
    pub se_mean: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub median_abs_error: f64,
}

/// Linear-interpolation quantile of ascending `sorted` data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn empirical_mse(estimates: &[f64], truth: f64) -> Result<MseStats> {
    let r = estimates.len();
    if r < 2 {
        return Err(NmcError::InsufficientData { needed: 2, got: r });
    }
    let n = r as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let mse = estimates.iter().map(|x| (x - truth) * (x - truth)).sum::<f64>() / n;
    let bias_sq = (mean - truth) * (mean - truth);
    let variance = estimates.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let se_mean = (variance * n / (n - 1.0) / n).sqrt();
    let mut sq: Vec<f64> = estimates.iter().map(|x| (x - truth) * (x - truth)).collect();
    sq.sort_by(f64::total_cmp);
    let mut abs: Vec<f64> = estimates.iter().map(|x| (x - truth).abs()).collect();
    abs.sort_by(f64::total_cmp);
    Ok(MseStats {
        mse,
        bias_sq,
        variance,
        mean,
        se_mean,
        q25: quantile(&sq, 0.25),
        median: quantile(&sq, 0.5),
        q75: quantile(&sq, 0.75),
        median_abs_error: quantile(&abs, 0.5),
    })
}

/// Least-squares non-increasing fit (pool adjacent violators), equal weights.
pub fn nonincreasing_fit(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 && blocks[blocks.len() - 2].0 < blocks[blocks.len() - 1].0 {
            let (b, nb) = blocks.pop().unwrap();
            let (a, na) = blocks.pop().unwrap();
            blocks.push(((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb));
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat_n(v, n)).collect()
}
