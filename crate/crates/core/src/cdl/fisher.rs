use nalgebra::DMatrix;
use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::linalg::{from_na, sym_eigen_desc, to_na};

/// Within-class scatter shrinkage relative to `trace(S_w) / d`.
pub const SHRINKAGE: f64 = 1e-2;
const RANK_TOL: f64 = 1e-12;

/// Linear discriminant `z = W (x - mean)` with `classes - 1` output axes.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherDiscriminant {
    /// `d_out x d`.
    pub projection: Array2<f64>,
    pub mean: Array1<f64>,
}

impl FisherDiscriminant {
    pub fn d_out(&self) -> usize {
        self.projection.nrows()
    }

    pub fn d_in(&self) -> usize {
        self.projection.ncols()
    }

    pub fn project(&self, x: &Array1<f64>) -> Array1<f64> {
        self.projection.dot(&(x - &self.mean))
    }

    pub fn project_rows(&self, x: &Array2<f64>) -> Array2<f64> {
        (x - &self.mean).dot(&self.projection.t())
    }

    /// Leading generalised eigenvectors of `(S_b, S_w + g I)`, with
    /// `g = SHRINKAGE * trace(S_w) / d`.
    ///
    /// Both scatters live in the span of the centred samples, so the problem
    /// is solved exactly in an orthonormal basis of that span; directions
    /// outside it have zero between-class variance.
    pub fn fit(x: &Array2<f64>, labels: &[usize], n_classes: usize) -> Result<Self> {
        let (n, d) = x.dim();
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: labels.len() });
        }
        if n_classes < 2 {
            return Err(Error::invalid("discriminant needs at least 2 classes"));
        }
        let mut counts = vec![0usize; n_classes];
        for &l in labels {
            if l >= n_classes {
                return Err(Error::invalid(format!("label {l} out of range")));
            }
            counts[l] += 1;
        }
        if let Some(c) = counts.iter().position(|&k| k < 2) {
            return Err(Error::invalid(format!(
                "class {c} has {} training descriptors; at least 2 are needed",
                counts[c]
            )));
        }

        let mean = x.mean_axis(Axis(0)).expect("n > 0");
        let xc = x - &mean;
        let basis = SampleBasis::new(&xc)?;
        let z = &basis.coords;
        let r = z.ncols();

        let mut class_means = Array2::zeros((n_classes, r));
        for (row, &c) in z.rows().into_iter().zip(labels) {
            let mut m = class_means.row_mut(c);
            m += &row;
        }
        for (mut m, &k) in class_means.rows_mut().into_iter().zip(&counts) {
            m /= k as f64;
        }
        let mut within = Array2::<f64>::zeros((r, r));
        for (row, &c) in z.rows().into_iter().zip(labels) {
            let diff = (&row - &class_means.row(c)).insert_axis(Axis(1));
            within += &diff.dot(&diff.t());
        }
        let mut between = Array2::<f64>::zeros((r, r));
        for (m, &k) in class_means.rows().into_iter().zip(&counts) {
            let m = m.insert_axis(Axis(1));
            between += &(m.dot(&m.t()) * k as f64);
        }
        let tr_within = within.diag().sum();
        let gamma = if tr_within > 0.0 {
            SHRINKAGE * tr_within / d as f64
        } else {
            SHRINKAGE * z.iter().map(|v| v * v).sum::<f64>() / d as f64
        };
        let mut a = to_na(&within);
        for i in 0..r {
            a[(i, i)] += gamma;
        }
        let a = (&a + a.transpose()) * 0.5;
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::Numerical("regularised within-class scatter is not SPD".into()))?;
        let l = chol.l();
        let l_inv = l
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        let b = to_na(&between);
        let m = &l_inv * b * l_inv.transpose();
        let m = (&m + m.transpose()) * 0.5;
        let (_, w) = sym_eigen_desc(&m);
        let d_out = (n_classes - 1).min(r);
        let wk: DMatrix<f64> = w.columns(0, d_out).into_owned();
        let u = from_na(&(l_inv.transpose() * wk)); // r x d_out

        let mut projection = basis.to_input(&u, &xc);
        for mut row in projection.rows_mut() {
            let lead = row
                .iter()
                .cloned()
                .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
            if lead < 0.0 {
                row.mapv_inplace(|v| -v);
            }
        }
        Ok(FisherDiscriminant { projection, mean })
    }
}

/// Coordinates of the centred samples in an orthonormal basis of a subspace
/// holding all of them: the input axes when `d <= n`, otherwise the sample
/// span from the Gram matrix.
struct SampleBasis {
    coords: Array2<f64>,
    span: Option<(Vec<f64>, DMatrix<f64>)>,
}

impl SampleBasis {
    fn new(xc: &Array2<f64>) -> Result<Self> {
        let (n, d) = xc.dim();
        if xc.iter().all(|&v| v == 0.0) {
            return Err(Error::Numerical("degenerate scatter: all embeddings identical".into()));
        }
        if d <= n {
            return Ok(SampleBasis { coords: xc.clone(), span: None });
        }
        let (s, v) = sym_eigen_desc(&to_na(&xc.dot(&xc.t())));
        let top = s[0];
        let r = s.iter().take_while(|&&l| l > RANK_TOL * top).count();
        let coords = Array2::from_shape_fn((n, r), |(i, j)| v[(i, j)] * s[j].sqrt());
        Ok(SampleBasis { coords, span: Some((s, v)) })
    }

    /// Maps `r x d_out` basis directions to `d_out x d` input-space rows.
    fn to_input(&self, u: &Array2<f64>, xc: &Array2<f64>) -> Array2<f64> {
        match &self.span {
            None => u.t().to_owned(),
            Some((s, v)) => {
                let (n, r) = self.coords.dim();
                // W = U^T diag(1/sqrt s) V_r^T Xc
                let coef = Array2::from_shape_fn((u.ncols(), n), |(o, i)| {
                    (0..r).map(|j| u[[j, o]] * v[(i, j)] / s[j].sqrt()).sum::<f64>()
                });
                coef.dot(xc)
            }
        }
    }
}
