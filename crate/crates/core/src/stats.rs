//! Small statistics helpers shared by the estimators and the lab.

use serde::{Deserialize, Serialize};

/// Estimate of the diffusion matrix with error bars, from either an
/// ensemble of corrector solves or a population of random walkers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionEstimate {
    pub dimension: usize,
    /// Mean `D`, row-major.
    pub entries: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    /// Realizations (corrector) or walkers (random walk).
    pub samples: usize,
    /// Mean empirical intensity `m` of the environments.
    pub intensity: f64,
    /// Mean of `m D_11` and its standard error.
    pub scaled_d11: f64,
    pub scaled_d11_stderr: f64,
    /// Walk only: `E[(X_T . e_a)^2] / T` per direction.
    pub slopes: Option<Vec<f64>>,
    pub horizon: Option<f64>,
    pub mean_jumps: Option<f64>,
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Linear-interpolated sample quantile, `q` in `[0, 1]`.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// `(q1, q3)`.
pub fn quartiles(xs: &[f64]) -> (f64, f64) {
    (quantile(xs, 0.25), quantile(xs, 0.75))
}

/// Standard error of the median from the interquartile range, assuming
/// near-normal data: `1.2533 * (IQR / 1.349) / sqrt(n)`.
pub fn median_stderr(xs: &[f64]) -> f64 {
    let (q1, q3) = quartiles(xs);
    1.2533 * ((q3 - q1) / 1.349) / (xs.len() as f64).sqrt()
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    LinearFit { slope, intercept, r_squared }
}
