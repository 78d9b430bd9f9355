use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, Normalization};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MIN_STD: f64 = 1e-12;

/// Right-pads with zero columns or right-truncates to `target_frames`.
pub fn fit_frames(m: &FeatureMatrix, target_frames: usize) -> FeatureMatrix {
    let rows = m.values.rows();
    let keep = m.values.cols().min(target_frames);
    let mut out = Matrix::zeros(rows, target_frames);
    for r in 0..rows {
        out.row_mut(r)[..keep].copy_from_slice(&m.values.row(r)[..keep]);
    }
    FeatureMatrix {
        kind: m.kind,
        values: out,
        normalization: m.normalization.clone(),
    }
}

/// Global mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: f64,
    pub std: f64,
}

impl FeatureStats {
    /// Statistics over every element of every matrix.
    pub fn fit<'a>(matrices: impl IntoIterator<Item = &'a Matrix<f64>> + Clone) -> Result<Self> {
        let (mut n, mut sum) = (0usize, 0.0);
        for m in matrices.clone() {
            n += m.as_slice().len();
            sum += m.as_slice().iter().sum::<f64>();
        }
        if n == 0 {
            return Err(Error::EmptyInput("no feature values to fit statistics on"));
        }
        let mean = sum / n as f64;
        let ss: f64 = matrices
            .into_iter()
            .map(|m| m.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>())
            .sum();
        let std = (ss / n as f64).sqrt();
        if !(std > MIN_STD) {
            return Err(Error::DegenerateStd(std));
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, values: &mut [f64]) {
        for v in values {
            *v = (*v - self.mean) / self.std;
        }
    }
}

/// `(x - mean) / std` elementwise. Without `stats`, they are fit over `m`
/// itself and recorded in the result's normalization.
pub fn standardize(m: &FeatureMatrix, stats: Option<FeatureStats>) -> Result<FeatureMatrix> {
    let stats = match stats {
        Some(s) if !(s.std > 0.0) => return Err(Error::DegenerateStd(s.std)),
        Some(s) => s,
        None => FeatureStats::fit([&m.values])?,
    };
    let mut values = m.values.clone();
    stats.apply(values.as_mut_slice());
    Ok(FeatureMatrix {
        kind: m.kind,
        values,
        normalization: Normalization::Standardized {
            mean: stats.mean,
            std: stats.std,
        },
    })
}

/// Per-row standardization, fitting each row on itself.
pub fn standardize_rows(m: &FeatureMatrix) -> Result<FeatureMatrix> {
    let mut values = m.values.clone();
    let (mut means, mut stds) = (Vec::new(), Vec::new());
    for r in 0..values.rows() {
        let row = values.row_mut(r);
        let n = row.len() as f64;
        let mean = row.iter().sum::<f64>() / n;
        let std = (row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        if !(std > MIN_STD) {
            return Err(Error::DegenerateStd(std));
        }
        row.iter_mut().for_each(|v| *v = (*v - mean) / std);
        means.push(mean);
        stds.push(std);
    }
    Ok(FeatureMatrix {
        kind: m.kind,
        values,
        normalization: Normalization::StandardizedRows {
            mean: means,
            std: stds,
        },
    })
}

fn source_coord(i: usize, src: usize, dst: usize) -> f64 {
    if dst <= 1 || src <= 1 {
        0.0
    } else {
        i as f64 * (src - 1) as f64 / (dst - 1) as f64
    }
}

/// Bilinear resampling with corner-aligned grids: output corners land
/// exactly on input corners.
pub fn resize_bilinear(m: &FeatureMatrix, out_rows: usize, out_cols: usize) -> Result<FeatureMatrix> {
    let (rows, cols) = m.values.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyInput("cannot resize an empty matrix"));
    }
    if out_rows == 0 || out_cols == 0 {
        return Err(Error::InvalidConfig("resize target must be non-empty".into()));
    }
    if (rows, cols) == (out_rows, out_cols) {
        return Ok(m.clone());
    }
    let src = &m.values;
    let col_taps: Vec<(usize, usize, f64)> = (0..out_cols)
        .map(|j| {
            let x = source_coord(j, cols, out_cols);
            let c0 = (x.floor() as usize).min(cols - 1);
            let c1 = (c0 + 1).min(cols - 1);
            (c0, c1, x - c0 as f64)
        })
        .collect();
    let values = Matrix::from_fn(out_rows, out_cols, |i, j| {
        let y = source_coord(i, rows, out_rows);
        let r0 = (y.floor() as usize).min(rows - 1);
        let r1 = (r0 + 1).min(rows - 1);
        let fy = y - r0 as f64;
        let (c0, c1, fx) = col_taps[j];
        let top = src[(r0, c0)] * (1.0 - fx) + src[(r0, c1)] * fx;
        let bottom = src[(r1, c0)] * (1.0 - fx) + src[(r1, c1)] * fx;
        top * (1.0 - fy) + bottom * fy
    });
    Ok(FeatureMatrix {
        kind: m.kind,
        values,
        normalization: m.normalization.clone(),
    })
}
