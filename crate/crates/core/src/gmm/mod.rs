//! Diagonal-covariance Gaussian mixtures trained by EM, one per class.
//!
//! A clip is scored by the sum of its frame log-likelihoods under each class
//! model; the highest total wins.

mod io;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scores::ClassScores;

pub use io::{load_gmm_bank, save_gmm_bank, GMM_FORMAT_VERSION};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
/// Variance floor relative to the per-dimension variance of the training data.
pub const VARIANCE_FLOOR_SCALE: f64 = 1e-3;
/// Absolute lower bound so constant dimensions keep a usable density.
pub const MIN_VARIANCE: f64 = 1e-10;
const EMPTY_COMPONENT_MASS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub weights: Array1<f64>,
    /// `K x dim`.
    pub means: Array2<f64>,
    /// `K x dim`, strictly positive.
    pub variances: Array2<f64>,
}

impl GmmModel {
    pub fn new(weights: Array1<f64>, means: Array2<f64>, variances: Array2<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.nrows() != k || variances.dim() != means.dim() {
            return Err(Error::invalid("inconsistent GMM parameter shapes"));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || (weights.sum() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("GMM weights must be nonnegative and sum to 1"));
        }
        if variances.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("GMM variances must be positive"));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("non-finite GMM mean"));
        }
        Ok(GmmModel {
            weights,
            means,
            variances,
        })
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmConfig {
    pub components: usize,
    pub max_iters: usize,
    /// Stop once the relative log-likelihood gain drops below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            components: 64,
            max_iters: 100,
            tol: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    /// Training log-likelihood before each M-step, first entry at initialisation.
    pub log_likelihoods: Vec<f64>,
    pub converged: bool,
}

/// Per-component Gaussian log-densities (`frames x K`), using a shared shift
/// `origin` to keep the expanded quadratic form well conditioned.
fn component_log_densities(
    model_means: &Array2<f64>,
    model_vars: &Array2<f64>,
    x: &Array2<f64>,
    origin: &Array1<f64>,
) -> Array2<f64> {
    let xs = x - origin;
    let mu = model_means - origin;
    let prec = model_vars.mapv(|v| 1.0 / v);
    let consts: Array1<f64> = (0..mu.nrows())
        .map(|k| {
            let row_mu = mu.row(k);
            let row_p = prec.row(k);
            let quad: f64 = row_mu.iter().zip(row_p.iter()).map(|(m, p)| m * m * p).sum();
            let logdet: f64 = model_vars.row(k).iter().map(|v| v.ln()).sum();
            -0.5 * (mu.ncols() as f64 * LN_2PI + logdet + quad)
        })
        .collect();
    let sq = xs.mapv(|v| v * v);
    let mut out = sq.dot(&prec.t()) * -0.5;
    out += &xs.dot(&(&mu * &prec).t());
    out += &consts;
    out
}

/// Log-sum-exp of every row.
fn row_logsumexp(a: &Array2<f64>) -> Array1<f64> {
    a.rows()
        .into_iter()
        .map(|row| {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                return m;
            }
            m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
        })
        .collect()
}

fn check_features(x: &Array2<f64>) -> Result<()> {
    if x.ncols() == 0 {
        return Err(Error::invalid("features have zero dimensions"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite feature value"));
    }
    Ok(())
}

/// Weighted log-joint `log w_k + log N_k(x_t)` for every frame and component.
fn log_joint(model: &GmmModel, x: &Array2<f64>) -> Array2<f64> {
    let origin = model.weights.dot(&model.means);
    let mut lj = component_log_densities(&model.means, &model.variances, x, &origin);
    let lw = model.weights.mapv(|w| if w > 0.0 { w.ln() } else { f64::NEG_INFINITY });
    lj += &lw;
    lj
}

/// Per-frame `log sum_k w_k N(x_t; mu_k, diag var_k)`.
pub fn frame_log_likelihoods(model: &GmmModel, x: &Array2<f64>) -> Result<Array1<f64>> {
    if x.ncols() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: x.ncols(),
        });
    }
    Ok(row_logsumexp(&log_joint(model, x)))
}

/// Total log-likelihood of all frames.
pub fn log_likelihood(model: &GmmModel, x: &Array2<f64>) -> Result<f64> {
    Ok(frame_log_likelihoods(model, x)?.sum())
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance from the nearest chosen center.
fn kmeans_pp(x: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = x.nrows();
    let mut centers = Array2::zeros((k, x.ncols()));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&x.row(first));
    let sqdist = |i: usize, c: ndarray::ArrayView1<f64>| -> f64 {
        x.row(i).iter().zip(c.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
    };
    let mut nearest: Vec<f64> = (0..n).map(|i| sqdist(i, centers.row(0))).collect();
    for j in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(j).assign(&x.row(pick));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sqdist(i, centers.row(j)));
        }
    }
    centers
}

/// Fits a `K`-component diagonal GMM by EM.
pub fn fit_gmm(x: &Array2<f64>, k: usize, seed: u64, max_iters: usize, tol: f64) -> Result<GmmModel> {
    let cfg = GmmConfig {
        components: k,
        max_iters,
        tol,
        seed,
    };
    fit_gmm_traced(x, &cfg).map(|(m, _)| m)
}

/// [`fit_gmm`] that also returns the training log-likelihood history.
pub fn fit_gmm_traced(x: &Array2<f64>, cfg: &GmmConfig) -> Result<(GmmModel, FitTrace)> {
    check_features(x)?;
    let (n, dim) = x.dim();
    let k = cfg.components;
    if k == 0 {
        return Err(Error::invalid("GMM needs at least one component"));
    }
    if n < k {
        return Err(Error::invalid(format!("{n} frames cannot train {k} mixture components")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Work in coordinates centred on the data mean.
    let origin = x.mean_axis(Axis(0)).expect("n >= 1");
    let xc = x - &origin;
    let xsq = xc.mapv(|v| v * v);
    let global_var = xsq.mean_axis(Axis(0)).expect("n >= 1");
    let floor = global_var.mapv(|v| (VARIANCE_FLOOR_SCALE * v).max(MIN_VARIANCE));
    let zero = Array1::zeros(dim);

    let mut weights = Array1::from_elem(k, 1.0 / k as f64);
    let mut means = kmeans_pp(&xc, k, &mut rng);
    let init_var = Array2::from_shape_fn((k, dim), |(_, d)| global_var[d].max(floor[d]));
    let mut variances = init_var.clone();

    let mut history = Vec::new();
    let mut converged = false;
    for iter in 0..cfg.max_iters.max(1) {
        let mut lj = component_log_densities(&means, &variances, &xc, &zero);
        lj += &weights.mapv(|w| if w > 0.0 { w.ln() } else { f64::NEG_INFINITY });
        let frame_ll = row_logsumexp(&lj);
        let ll = frame_ll.sum();
        if !ll.is_finite() {
            return Err(Error::Numerical("GMM log-likelihood is not finite".into()));
        }
        if let Some(&prev) = history.last() {
            let gain = (ll - prev) / f64::abs(prev).max(f64::MIN_POSITIVE);
            if gain < cfg.tol {
                history.push(ll);
                converged = true;
                break;
            }
        }
        history.push(ll);
        if iter + 1 == cfg.max_iters.max(1) {
            break;
        }

        // M-step.
        let resp = (lj - &frame_ll.view().insert_axis(Axis(1))).mapv(f64::exp);
        let mass = resp.sum_axis(Axis(0));
        let s1 = resp.t().dot(&xc);
        let s2 = resp.t().dot(&xsq);
        let mut order: Vec<usize> = (0..n).collect();
        let mut next_low = 0;
        let mut reseeded = false;
        for j in 0..k {
            if mass[j] < EMPTY_COMPONENT_MASS {
                if !reseeded {
                    order.sort_by(|&a, &b| frame_ll[a].total_cmp(&frame_ll[b]));
                    reseeded = true;
                }
                let frame = order[next_low % n];
                next_low += 1;
                means.row_mut(j).assign(&xc.row(frame));
                variances.row_mut(j).assign(&init_var.row(j));
                weights[j] = 1.0 / n as f64;
                continue;
            }
            weights[j] = mass[j] / n as f64;
            for d in 0..dim {
                let mu = s1[[j, d]] / mass[j];
                means[[j, d]] = mu;
                variances[[j, d]] = (s2[[j, d]] / mass[j] - mu * mu).max(floor[d]);
            }
        }
        let wsum = weights.sum();
        weights /= wsum;
    }

    let model = GmmModel::new(weights, means + &origin, variances)?;
    Ok((
        model,
        FitTrace {
            log_likelihoods: history,
            converged,
        },
    ))
}

/// One model per class, all over the same feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmBank {
    pub models: Vec<GmmModel>,
}

impl GmmBank {
    pub fn new(models: Vec<GmmModel>) -> Result<Self> {
        if let Some(first) = models.first() {
            if let Some(bad) = models.iter().find(|m| m.dim() != first.dim()) {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    found: bad.dim(),
                });
            }
        }
        Ok(GmmBank { models })
    }

    /// Trains class `c` on `per_class[c]` with seed `cfg.seed + c`.
    pub fn fit(per_class: &[Array2<f64>], cfg: &GmmConfig) -> Result<Self> {
        let models = per_class
            .iter()
            .enumerate()
            .map(|(c, x)| {
                let cfg = GmmConfig {
                    seed: cfg.seed.wrapping_add(c as u64),
                    ..cfg.clone()
                };
                fit_gmm_traced(x, &cfg).map(|(m, _)| m)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(models)
    }

    pub fn n_classes(&self) -> usize {
        self.models.len()
    }

    pub fn dim(&self) -> usize {
        self.models.first().map_or(0, GmmModel::dim)
    }
}

/// Raw score per class: total log-likelihood of the clip's frames.
pub fn classify_gmm(bank: &GmmBank, x: &Array2<f64>) -> Result<ClassScores> {
    if bank.models.is_empty() {
        return Err(Error::invalid("empty GMM bank"));
    }
    let scores = bank
        .models
        .iter()
        .map(|m| log_likelihood(m, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassScores::new(scores))
}
