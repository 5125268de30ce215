//! Bridges between `ndarray` data and `nalgebra` decompositions.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

pub(crate) fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn from_na(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending. Column `i` of the
/// returned matrix is the eigenvector for the `i`-th eigenvalue.
pub(crate) fn sym_eigen_desc(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Sample covariance of the rows (unbiased, `1/(T-1)`), and the row mean.
pub(crate) fn row_covariance(x: &Array2<f64>) -> (Array2<f64>, ndarray::Array1<f64>) {
    let t = x.nrows();
    let mean = x.mean_axis(ndarray::Axis(0)).expect("at least one row");
    let centered = x - &mean;
    let cov = centered.t().dot(&centered) / (t as f64 - 1.0);
    (cov, mean)
}
