//! Column box counting on graph samples and the log–log regression.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::Hvfif;
use crate::error::{Error, Result};
use crate::eval::{subdivide, SampleSet};

/// Fewest samples a column may hold.
pub const MIN_COLUMN_SAMPLES: usize = 8;

/// Fewest scales the regression accepts once `k = 1` is dropped.
pub const MIN_SCALES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxCountRecord {
    pub epsilon: f64,
    pub count: u64,
}

/// Least-squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; `None` with fewer than three points.
    pub stderr: Option<f64>,
}

pub fn least_squares(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "need at least two points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = (x.len() > 2).then(|| {
        let ssr: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (ssr / (n - 2.0) / sxx).sqrt()
    });
    LinearFit {
        slope,
        intercept,
        stderr,
    }
}

/// Mesh level `k` with `ε = n^{-k}·width`, if `epsilon` is aligned.
pub fn mesh_level(epsilon: f64, width: f64, n: usize) -> Result<u32> {
    let k = ((width / epsilon).ln() / (n as f64).ln()).round();
    if !(k >= 1.0) || k > 64.0 {
        return Err(Error::MisalignedEpsilon { epsilon });
    }
    let expected = width / (n as f64).powi(k as i32);
    if (expected - epsilon).abs() > 1e-9 * expected {
        return Err(Error::MisalignedEpsilon { epsilon });
    }
    Ok(k as u32)
}

/// Number of boxes in the column of height `epsilon` meeting values in `[lo, hi]`.
#[inline]
pub fn column_boxes(lo: f64, hi: f64, epsilon: f64) -> u64 {
    ((hi / epsilon).floor() - (lo / epsilon).floor()) as u64 + 1
}

/// `N(ε)` for the graph of `f₁`, with columns `[x₀ + cε, x₀ + (c+1)ε]`.
///
/// Columns are closed on both sides, so a sample on a column boundary counts
/// in both neighbours; the graph is continuous and passes through that
/// point in either column. Vertical boxes start at `f = 0`.
pub fn box_count(samples: &SampleSet, epsilon: f64, n: usize) -> Result<BoxCountRecord> {
    box_count_values(&samples.x, &samples.f1, epsilon, n)
}

pub fn box_count_values(x: &[f64], f: &[f64], epsilon: f64, n: usize) -> Result<BoxCountRecord> {
    let (x0, xn) = (x[0], x[x.len() - 1]);
    let k = mesh_level(epsilon, xn - x0, n)?;
    let columns = (n as u64).pow(k) as usize;
    let tol = 1e-9 * epsilon;
    let counts: Vec<Result<u64>> = (0..columns)
        .into_par_iter()
        .map(|c| {
            let a = x0 + epsilon * c as f64;
            let b = if c + 1 == columns {
                xn
            } else {
                x0 + epsilon * (c + 1) as f64
            };
            let start = x.partition_point(|&v| v < a - tol);
            let end = x.partition_point(|&v| v <= b + tol);
            if end - start < MIN_COLUMN_SAMPLES {
                return Err(Error::Undersampled {
                    column: c,
                    count: end - start,
                    required: MIN_COLUMN_SAMPLES,
                });
            }
            let (lo, hi) = f[start..end]
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            Ok(column_boxes(lo, hi, epsilon))
        })
        .collect();
    let mut count = 0;
    for c in counts {
        count += c?;
    }
    Ok(BoxCountRecord { epsilon, count })
}

/// Regression of `log N` on `−log ε` over the records.
pub fn fit_records(records: &[BoxCountRecord]) -> LinearFit {
    let x: Vec<f64> = records.iter().map(|r| -r.epsilon.ln()).collect();
    let y: Vec<f64> = records.iter().map(|r| (r.count as f64).ln()).collect();
    least_squares(&x, &y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDimension {
    /// Subdivision depth of the samples.
    pub depth: usize,
    /// One record per requested scale, including excluded ones.
    pub records: Vec<BoxCountRecord>,
    /// Levels that entered the fit.
    pub fitted_levels: Vec<u32>,
    pub slope: f64,
    pub stderr: Option<f64>,
}

/// Box-counting slope for `f₁` at mesh levels `levels` (`ε = n^{-k}|I|`).
/// Samples come from subdivision at depth `max(levels) + 2`; level 1 is kept
/// in the records but left out of the fit.
pub fn estimate_dimension(h: &Hvfif, levels: &[u32]) -> Result<EmpiricalDimension> {
    let k_max = *levels
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidInput("no box-counting scales given".into()))?;
    let depth = k_max as usize + 2;
    let samples = subdivide(h, depth)?;
    estimate_from_samples(&samples, h.n(), levels, depth)
}

pub fn estimate_from_samples(
    samples: &SampleSet,
    n: usize,
    levels: &[u32],
    depth: usize,
) -> Result<EmpiricalDimension> {
    let width = samples.x[samples.len() - 1] - samples.x[0];
    let mut levels = levels.to_vec();
    levels.sort_unstable();
    levels.dedup();
    let records = levels
        .iter()
        .map(|&k| box_count(samples, width / (n as f64).powi(k as i32), n))
        .collect::<Result<Vec<_>>>()?;
    let fitted: Vec<(u32, BoxCountRecord)> = levels
        .iter()
        .copied()
        .zip(records.iter().copied())
        .filter(|(k, _)| *k >= 2)
        .collect();
    if fitted.len() < MIN_SCALES {
        return Err(Error::InvalidInput(format!(
            "box counting needs at least {MIN_SCALES} scales with k >= 2, got {}",
            fitted.len()
        )));
    }
    let fit = fit_records(&fitted.iter().map(|(_, r)| *r).collect::<Vec<_>>());
    Ok(EmpiricalDimension {
        depth,
        records,
        fitted_levels: fitted.iter().map(|(k, _)| *k).collect(),
        slope: fit.slope,
        stderr: fit.stderr,
    })
}

/// Writes `epsilon,count` rows.
pub fn write_records_csv<W: std::io::Write>(
    records: &[BoxCountRecord],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "epsilon,count")?;
    for r in records {
        writeln!(w, "{:.16e},{}", r.epsilon, r.count)?;
    }
    Ok(())
}
