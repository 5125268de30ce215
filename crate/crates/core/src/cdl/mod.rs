//! Covariance discriminative learning.
//!
//! Each clip becomes the regularised covariance matrix of its frame features.
//! Covariances are flattened with the log-Euclidean map (matrix logarithm,
//! then half-vectorisation with off-diagonals scaled by `sqrt 2`), projected by
//! a shrinkage-regularised Fisher discriminant, and classified by distance to
//! class centroids (or to the nearest training clip).

mod fisher;
mod io;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen_desc, to_na};
use crate::scores::ClassScores;

pub use fisher::{FisherDiscriminant, SHRINKAGE};
pub use io::{load_cdl, save_cdl, CDL_FORMAT_VERSION};

/// Regularisation used when a clip's features are constant.
pub const ZERO_TRACE_EPSILON: f64 = 1e-6;
pub const DEFAULT_EPS_SCALE: f64 = 1e-3;

/// A symmetric positive-definite covariance matrix describing one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceDescriptor {
    pub matrix: Array2<f64>,
    pub source_id: String,
}

impl CovarianceDescriptor {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `C = 1/(T-1) sum (x_t - mean)(x_t - mean)^T + eps I`, with
/// `eps = eps_scale * trace(C) / dim` taken before regularisation.
pub fn covariance_descriptor(
    x: &Array2<f64>,
    eps_scale: f64,
    source_id: impl Into<String>,
) -> Result<CovarianceDescriptor> {
    let (t, dim) = x.dim();
    if t < 2 {
        return Err(Error::invalid("covariance descriptor needs at least 2 frames"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite feature value"));
    }
    let (cov, _) = crate::linalg::row_covariance(x);
    let mut c = (&cov + &cov.t()) * 0.5;
    let trace = c.diag().sum();
    if trace <= 0.0 {
        c = Array2::eye(dim) * ZERO_TRACE_EPSILON;
    } else {
        let eps = eps_scale * trace / dim as f64;
        c.diag_mut().mapv_inplace(|v| v + eps);
    }
    Ok(CovarianceDescriptor {
        matrix: c,
        source_id: source_id.into(),
    })
}

/// Length of the half-vectorisation of a `dim x dim` symmetric matrix.
pub fn embedding_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Upper triangle, row-major, off-diagonal entries times `sqrt 2`, so the
/// Euclidean inner product equals the Frobenius one.
pub fn half_vectorize(sym: &Array2<f64>) -> Array1<f64> {
    let n = sym.nrows();
    let mut out = Vec::with_capacity(embedding_len(n));
    for i in 0..n {
        out.push(sym[[i, i]]);
        for j in i + 1..n {
            out.push(std::f64::consts::SQRT_2 * sym[[i, j]]);
        }
    }
    Array1::from(out)
}

/// Inverse of [`half_vectorize`].
pub fn unvectorize(v: &Array1<f64>, dim: usize) -> Result<Array2<f64>> {
    if v.len() != embedding_len(dim) {
        return Err(Error::DimensionMismatch {
            expected: embedding_len(dim),
            found: v.len(),
        });
    }
    let mut m = Array2::zeros((dim, dim));
    let mut idx = 0;
    for i in 0..dim {
        m[[i, i]] = v[idx];
        idx += 1;
        for j in i + 1..dim {
            let x = v[idx] / std::f64::consts::SQRT_2;
            m[[i, j]] = x;
            m[[j, i]] = x;
            idx += 1;
        }
    }
    Ok(m)
}

/// Matrix logarithm of an SPD matrix via its eigendecomposition.
pub fn spd_log(c: &Array2<f64>) -> Result<Array2<f64>> {
    let (values, vectors) = sym_eigen_desc(&to_na(c));
    if let Some(bad) = values.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::Numerical(format!("matrix is not positive definite (eigenvalue {bad})")));
    }
    let n = c.nrows();
    let u = Array2::from_shape_fn((n, n), |(i, j)| vectors[(i, j)]);
    let scaled = Array2::from_shape_fn((n, n), |(i, j)| u[[i, j]] * values[j].ln());
    let l = scaled.dot(&u.t());
    Ok((&l + &l.t()) * 0.5)
}

/// Log-Euclidean embedding of a descriptor.
pub fn log_embed(desc: &CovarianceDescriptor) -> Result<Array1<f64>> {
    Ok(half_vectorize(&spd_log(&desc.matrix)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NeighborRule {
    /// Distance to each class centroid in the projected space.
    #[default]
    Centroid,
    /// Distance to the closest projected training clip of each class.
    NearestSample,
}

impl std::str::FromStr for NeighborRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centroid" => Ok(NeighborRule::Centroid),
            "sample" | "1-nearest-sample" => Ok(NeighborRule::NearestSample),
            _ => Err(Error::invalid(format!("unknown neighbor rule {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdlProjection {
    /// Descriptor dimension.
    pub dim: usize,
    pub discriminant: FisherDiscriminant,
    /// `classes x d_out`.
    pub class_centroids: Array2<f64>,
    pub rule: NeighborRule,
    /// Projected training clips and their classes, used by `NearestSample`.
    pub references: Vec<(usize, Array1<f64>)>,
}

impl CdlProjection {
    pub fn n_classes(&self) -> usize {
        self.class_centroids.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.discriminant.d_out()
    }

    /// Embeds and projects one descriptor.
    pub fn transform(&self, desc: &CovarianceDescriptor) -> Result<Array1<f64>> {
        if desc.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: desc.dim(),
            });
        }
        Ok(self.discriminant.project(&log_embed(desc)?))
    }

    /// Euclidean distance from a projected point to each class.
    pub fn distances(&self, z: &Array1<f64>) -> Vec<f64> {
        let dist = |a: ndarray::ArrayView1<f64>| -> f64 {
            a.iter().zip(z.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        };
        match self.rule {
            NeighborRule::Centroid => self.class_centroids.rows().into_iter().map(dist).collect(),
            NeighborRule::NearestSample => {
                let mut best = vec![f64::INFINITY; self.n_classes()];
                for (c, r) in &self.references {
                    best[*c] = best[*c].min(dist(r.view()));
                }
                best
            }
        }
    }
}

/// Fits the discriminant on labelled descriptors and records class centroids.
pub fn fit_cdl(
    descriptors: &[CovarianceDescriptor],
    labels: &[usize],
    n_classes: usize,
    rule: NeighborRule,
) -> Result<CdlProjection> {
    if descriptors.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: descriptors.len(),
            found: labels.len(),
        });
    }
    let dim = descriptors
        .first()
        .ok_or_else(|| Error::invalid("no training descriptors"))?
        .dim();
    if let Some(d) = descriptors.iter().find(|d| d.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: d.dim(),
        });
    }
    let mut embedded = Array2::zeros((descriptors.len(), embedding_len(dim)));
    for (mut row, d) in embedded.rows_mut().into_iter().zip(descriptors) {
        row.assign(&log_embed(d)?);
    }
    fit_embedded(&embedded, labels, n_classes, dim, rule)
}

/// [`fit_cdl`] on already-embedded descriptors (rows of `embedded`).
pub fn fit_embedded(
    embedded: &Array2<f64>,
    labels: &[usize],
    n_classes: usize,
    dim: usize,
    rule: NeighborRule,
) -> Result<CdlProjection> {
    let discriminant = FisherDiscriminant::fit(embedded, labels, n_classes)?;
    let projected = discriminant.project_rows(embedded);
    let mut centroids = Array2::zeros((n_classes, discriminant.d_out()));
    let mut counts = vec![0usize; n_classes];
    for (row, &c) in projected.rows().into_iter().zip(labels) {
        let mut cen = centroids.row_mut(c);
        cen += &row;
        counts[c] += 1;
    }
    for (mut cen, &n) in centroids.rows_mut().into_iter().zip(&counts) {
        cen /= n as f64;
    }
    let references = match rule {
        NeighborRule::Centroid => Vec::new(),
        NeighborRule::NearestSample => labels
            .iter()
            .zip(projected.rows())
            .map(|(&c, r)| (c, r.to_owned()))
            .collect(),
    };
    Ok(CdlProjection {
        dim,
        discriminant,
        class_centroids: centroids,
        rule,
        references,
    })
}

/// Raw score per class is the negative projected distance.
pub fn classify_cdl(proj: &CdlProjection, query: &CovarianceDescriptor) -> Result<ClassScores> {
    let z = proj.transform(query)?;
    Ok(ClassScores::new(proj.distances(&z).into_iter().map(|d| -d).collect()))
}
