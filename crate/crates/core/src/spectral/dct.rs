use std::f64::consts::PI;

use ndarray::{s, Array2};

use crate::error::{Error, Result};

/// Orthonormal DCT-II basis; row `k` is the `k`-th cosine.
pub fn dct_matrix(n: usize) -> Array2<f64> {
    let nf = n as f64;
    Array2::from_shape_fn((n, n), |(k, i)| {
        let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        scale * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos()
    })
}

/// Orthonormal DCT-II along the channel axis, keeping `n_coeffs` coefficients.
pub fn cepstral_dct(log_powers: &Array2<f64>, n_coeffs: usize) -> Result<Array2<f64>> {
    let n = log_powers.ncols();
    if n_coeffs > n {
        return Err(Error::invalid(format!(
            "cannot keep {n_coeffs} cepstra from {n} channels"
        )));
    }
    let basis = dct_matrix(n);
    Ok(log_powers.dot(&basis.slice(s![..n_coeffs, ..]).t()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_row_has_only_dc() {
        let v = -3.25;
        let c = cepstral_dct(&Array2::from_elem((1, 40), v), 20).unwrap();
        assert!((c[[0, 0]] - v * 40f64.sqrt()).abs() < 1e-12);
        assert!(c.iter().skip(1).all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn full_transform_inverts_with_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Array2::from_shape_fn((5, 40), |_| rng.random_range(-10.0..10.0));
        let c = cepstral_dct(&x, 40).unwrap();
        let back = c.dot(&dct_matrix(40));
        for (a, b) in back.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn matches_cosine_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let row: Vec<f64> = (0..40).map(|_| rng.random_range(-5.0..5.0)).collect();
        let c = cepstral_dct(&Array2::from_shape_vec((1, 40), row.clone()).unwrap(), 20).unwrap();
        for k in 0..20 {
            let mut acc = 0.0;
            for (i, x) in row.iter().enumerate() {
                acc += x * (PI / 40.0 * (i as f64 + 0.5) * k as f64).cos();
            }
            acc *= if k == 0 { (1.0f64 / 40.0).sqrt() } else { (2.0f64 / 40.0).sqrt() };
            assert!((c[[0, k]] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn too_many_coefficients() {
        assert!(cepstral_dct(&Array2::zeros((1, 10)), 11).is_err());
    }

    #[test]
    fn rows_transform_independently() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = Array2::from_shape_fn((6, 12), |_| rng.random::<f64>());
        let rev = Array2::from_shape_fn((6, 12), |(t, j)| x[[5 - t, j]]);
        let (a, b) = (cepstral_dct(&x, 12).unwrap(), cepstral_dct(&rev, 12).unwrap());
        for t in 0..6 {
            assert_eq!(a.row(t), b.row(5 - t));
        }
    }
}
