use ndarray::{concatenate, Array2, Axis};

use super::FeatureMatrix;
use crate::error::{Error, Result};

/// Regression deltas over `+-window` frames with edge frames replicated:
/// `d_t = sum_k k (c_{t+k} - c_{t-k}) / (2 sum_k k^2)`.
pub fn deltas(x: &Array2<f64>, window: usize) -> Array2<f64> {
    let t_max = x.nrows() as isize - 1;
    let denom = 2.0 * (1..=window).map(|k| (k * k) as f64).sum::<f64>();
    let mut out = Array2::zeros(x.raw_dim());
    for t in 0..x.nrows() {
        let mut row = out.row_mut(t);
        for k in 1..=window {
            let ahead = (t as isize + k as isize).min(t_max) as usize;
            let behind = (t as isize - k as isize).max(0) as usize;
            let kf = k as f64;
            row.zip_mut_with(&(&x.row(ahead) - &x.row(behind)), |o, d| *o += kf * d);
        }
        row.mapv_inplace(|v| v / denom);
    }
    out
}

/// `[static | delta | acceleration]`, tripling the dimension.
pub fn append_deltas(features: &FeatureMatrix, window: usize) -> Result<FeatureMatrix> {
    if window == 0 {
        return Err(Error::invalid("delta window must be at least 1"));
    }
    if features.n_frames() == 0 {
        return Err(Error::invalid("no frames to differentiate"));
    }
    let d = deltas(&features.values, window);
    let a = deltas(&d, window);
    let values = concatenate(Axis(1), &[features.values.view(), d.view(), a.view()])
        .map_err(|e| Error::invalid(e.to_string()))?;
    FeatureMatrix::new(values, features.extractor.clone())
}
