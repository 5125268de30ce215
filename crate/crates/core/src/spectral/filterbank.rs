use ndarray::Array2;

use super::Spectrogram;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterbankKind {
    /// Unit-peak triangles on mel-spaced centers.
    MelTriangular,
    /// Hermansky critical-band curves on bark-spaced centers.
    BarkTrapezoidal,
    /// 4th-order gammatone `|H(f)|^2` on ERB-rate-spaced centers.
    GammatoneMagnitude,
}

/// Channel weights over the one-sided spectrum, one row per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterbankMatrix {
    pub weights: Array2<f64>,
    pub center_freqs: Vec<f64>,
    pub kind: FilterbankKind,
    pub n_fft: usize,
    pub sample_rate: u32,
}

impl FilterbankMatrix {
    pub fn n_channels(&self) -> usize {
        self.weights.nrows()
    }
}

pub fn mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn inv_mel(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

pub fn bark(f: f64) -> f64 {
    6.0 * (f / 600.0).asinh()
}

pub fn inv_bark(z: f64) -> f64 {
    600.0 * (z / 6.0).sinh()
}

pub fn erb_rate(f: f64) -> f64 {
    21.4 * (1.0 + 0.00437 * f).log10()
}

pub fn inv_erb_rate(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) / 0.00437
}

/// Glasberg-Moore equivalent rectangular bandwidth in Hz.
pub fn erb_bandwidth(f: f64) -> f64 {
    24.7 * (4.37 * f / 1000.0 + 1.0)
}

/// `n + 2` points evenly spaced on a warped axis, mapped back to Hz.
fn warped_points(n: usize, f_lo: f64, f_hi: f64, warp: fn(f64) -> f64, unwarp: fn(f64) -> f64) -> Vec<f64> {
    let (lo, hi) = (warp(f_lo), warp(f_hi));
    let step = (hi - lo) / (n + 1) as f64;
    (0..n + 2).map(|i| unwarp(lo + step * i as f64)).collect()
}

/// Critical-band masking curve at bark offset `dz` from the channel center.
fn bark_curve(dz: f64) -> f64 {
    if !(-1.3..=2.5).contains(&dz) {
        0.0
    } else if dz < -0.5 {
        10f64.powf(2.5 * (dz + 0.5))
    } else if dz <= 0.5 {
        1.0
    } else {
        10f64.powf(-(dz - 0.5))
    }
}

/// Builds an `n_channels x (n_fft/2 + 1)` bank. Channel centers are the interior
/// points of an even grid on the kind's perceptual scale, bins outside
/// `[f_lo, f_hi]` get zero weight, and each row is scaled to unit peak.
pub fn make_filterbank(
    kind: FilterbankKind,
    n_channels: usize,
    n_fft: usize,
    sample_rate: u32,
    f_lo: f64,
    f_hi: f64,
) -> Result<FilterbankMatrix> {
    let nyquist = f64::from(sample_rate) / 2.0;
    if !(0.0 <= f_lo && f_lo < f_hi && f_hi <= nyquist) {
        return Err(Error::invalid(format!(
            "filterbank range [{f_lo}, {f_hi}] Hz invalid for Nyquist {nyquist} Hz"
        )));
    }
    if n_channels < 2 || n_fft < 2 {
        return Err(Error::invalid("filterbank needs at least 2 channels and 2 FFT points"));
    }
    let n_bins = n_fft / 2 + 1;
    let bin_hz = f64::from(sample_rate) / n_fft as f64;
    let points = match kind {
        FilterbankKind::MelTriangular => warped_points(n_channels, f_lo, f_hi, mel, inv_mel),
        FilterbankKind::BarkTrapezoidal => warped_points(n_channels, f_lo, f_hi, bark, inv_bark),
        FilterbankKind::GammatoneMagnitude => {
            warped_points(n_channels, f_lo, f_hi, erb_rate, inv_erb_rate)
        }
    };
    let centers = points[1..=n_channels].to_vec();
    let mut weights = Array2::zeros((n_channels, n_bins));
    for (c, mut row) in weights.rows_mut().into_iter().enumerate() {
        let fc = centers[c];
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            if f < f_lo || f > f_hi {
                continue;
            }
            *w = match kind {
                FilterbankKind::MelTriangular => {
                    let (lo, hi) = (points[c], points[c + 2]);
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= fc {
                        (f - lo) / (fc - lo)
                    } else {
                        (hi - f) / (hi - fc)
                    }
                }
                FilterbankKind::BarkTrapezoidal => bark_curve(bark(f) - bark(fc)),
                FilterbankKind::GammatoneMagnitude => {
                    let b = 1.019 * erb_bandwidth(fc);
                    (1.0 + ((f - fc) / b).powi(2)).powi(-4)
                }
            };
        }
        let peak = row.iter().cloned().fold(0.0, f64::max);
        if peak > 0.0 {
            row.mapv_inplace(|w| w / peak);
        } else {
            // Channel narrower than a bin: fall back to the nearest bin.
            let k = ((fc / bin_hz).round() as usize).min(n_bins - 1);
            row[k] = 1.0;
        }
    }
    Ok(FilterbankMatrix {
        weights,
        center_freqs: centers,
        kind,
        n_fft,
        sample_rate,
    })
}

/// Subband power: each power row times each channel's weights.
pub fn apply_filterbank(spec: &Spectrogram, fb: &FilterbankMatrix) -> Result<Array2<f64>> {
    if spec.n_fft != fb.n_fft || spec.n_bins() != fb.weights.ncols() {
        return Err(Error::DimensionMismatch {
            expected: fb.weights.ncols(),
            found: spec.n_bins(),
        });
    }
    Ok(spec.power.dot(&fb.weights.t()))
}
