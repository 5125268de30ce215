use ndarray::{Array1, Array2};

use super::FeatureConfig;
use crate::error::{Error, Result};
use crate::linalg::{row_covariance, sym_eigen_desc, to_na};
use crate::spectral::{cepstral_dct, log_floor};

/// Smallest `r` whose leading eigenvalues hold `fraction` of the total.
pub fn subspace_rank(eigenvalues: &[f64], fraction: f64) -> Result<usize> {
    let total: f64 = eigenvalues.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Numerical("eigenvalue spectrum sums to zero".into()));
    }
    let target = fraction * total * (1.0 - 1e-12);
    let mut acc = 0.0;
    for (i, &l) in eigenvalues.iter().enumerate() {
        acc += l;
        if acc >= target {
            return Ok(i + 1);
        }
    }
    Ok(eigenvalues.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceProjection {
    pub reconstructed: Array2<f64>,
    pub rank: usize,
    /// Covariance eigenvalues, descending, negatives clamped to zero.
    pub eigenvalues: Vec<f64>,
    pub mean: Array1<f64>,
}

/// Projects the mean-centred rows of `x` onto the dominant eigen-subspace of
/// their covariance and adds the mean back. Constant input is returned as-is
/// with rank 0.
pub fn project_subspace(x: &Array2<f64>, fraction: f64) -> Result<SubspaceProjection> {
    if x.nrows() < 2 {
        return Err(Error::invalid("subspace projection needs at least 2 frames"));
    }
    let (cov, mean) = row_covariance(x);
    let (values, vectors) = sym_eigen_desc(&to_na(&cov));
    let eigenvalues: Vec<f64> = values.iter().map(|&l| l.max(0.0)).collect();
    if eigenvalues.iter().sum::<f64>() <= 0.0 {
        return Ok(SubspaceProjection {
            reconstructed: x.clone(),
            rank: 0,
            eigenvalues,
            mean,
        });
    }
    let rank = subspace_rank(&eigenvalues, fraction)?;
    let basis = Array2::from_shape_fn((x.ncols(), rank), |(i, j)| vectors[(i, j)]);
    let centered = x - &mean;
    let reconstructed = centered.dot(&basis).dot(&basis.t()) + &mean;
    Ok(SubspaceProjection {
        reconstructed,
        rank,
        eigenvalues,
        mean,
    })
}

pub(super) fn spcc_statics(mel_power: &Array2<f64>, cfg: &FeatureConfig) -> Result<Array2<f64>> {
    let log_power = mel_power.mapv(log_floor);
    let proj = project_subspace(&log_power, cfg.spcc_energy_fraction)?;
    cepstral_dct(&proj.reconstructed, cfg.n_static)
}
