use std::f64::consts::PI;

use ndarray::Array2;

use super::FeatureConfig;
use crate::error::{Error, Result};
use crate::spectral::{
    apply_filterbank, log_floor, make_filterbank, FilterbankKind, FrameSequence, Spectrogram,
    LOG_FLOOR,
};

/// Equal-loudness weight at frequency `f` Hz, evaluated on angular
/// frequency `w = 2 pi f`:
/// `((w^2 + 56.8e6) w^4) / ((w^2 + 6.3e6)^2 (w^2 + 0.38e9))`.
pub fn equal_loudness(f: f64) -> f64 {
    let w2 = (2.0 * PI * f).powi(2);
    ((w2 + 56.8e6) * w2 * w2) / ((w2 + 6.3e6).powi(2) * (w2 + 0.38e9))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpcFit {
    /// `a_1..a_p` of `A(z) = 1 + sum a_k z^-k`.
    pub coeffs: Vec<f64>,
    pub reflection: Vec<f64>,
    /// Final prediction error energy.
    pub error: f64,
}

/// Levinson-Durbin recursion on autocorrelation lags `r[0..=order]`.
pub fn levinson_durbin(r: &[f64], order: usize) -> Result<LpcFit> {
    if r.len() <= order {
        return Err(Error::invalid(format!(
            "need {} autocorrelation lags, got {}",
            order + 1,
            r.len()
        )));
    }
    if !(r[0] > 0.0) || !r[0].is_finite() {
        return Err(Error::Numerical("zero autocorrelation at lag 0".into()));
    }
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut reflection = Vec::with_capacity(order);
    let mut err = r[0];
    for i in 1..=order {
        let acc: f64 = (0..i).map(|j| a[j] * r[i - j]).sum();
        let k = -acc / err;
        if !k.is_finite() || k.abs() >= 1.0 {
            return Err(Error::Numerical(format!("unstable reflection coefficient {k} at order {i}")));
        }
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        reflection.push(k);
    }
    Ok(LpcFit {
        coeffs: a[1..].to_vec(),
        reflection,
        error: err,
    })
}

/// Cepstrum `c_1..c_n` of the all-pole model `1 / A(z)`.
pub fn lpc_to_cepstrum(a: &[f64], n: usize) -> Vec<f64> {
    let p = a.len();
    let mut c = vec![0.0; n + 1];
    for m in 1..=n {
        let mut acc = if m <= p { -a[m - 1] } else { 0.0 };
        for k in 1..m {
            if m - k <= p {
                acc -= (k as f64 / m as f64) * c[k] * a[m - k - 1];
            }
        }
        c[m] = acc;
    }
    c.split_off(1)
}

/// Autocorrelation lags of a one-sided auditory spectrum sampled uniformly from
/// 0 to Nyquist, via the inverse DFT of its even extension. The end channels
/// are duplicated to stand in for the 0 Hz and Nyquist points.
pub fn plp_autocorrelation(auditory: &[f64], lags: usize) -> Vec<f64> {
    let mut s = Vec::with_capacity(auditory.len() + 2);
    s.push(auditory[0]);
    s.extend_from_slice(auditory);
    s.push(auditory[auditory.len() - 1]);
    let m = s.len() - 1;
    let norm = 1.0 / (2 * m) as f64;
    (0..=lags)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let inner: f64 = (1..m)
                .map(|j| s[j] * (PI * (k * j) as f64 / m as f64).cos())
                .sum();
            norm * (s[0] + sign * s[m] + 2.0 * inner)
        })
        .collect()
}

/// PLP statics per frame: `order` LPC cepstra followed by log frame energy.
/// Frames the recursion cannot model (silence) get zero cepstra.
pub(super) fn plp_statics(
    frames: &FrameSequence,
    spectrum: &Spectrogram,
    cfg: &FeatureConfig,
) -> Result<Array2<f64>> {
    let nyquist = f64::from(spectrum.sample_rate) / 2.0;
    let fb = make_filterbank(
        FilterbankKind::BarkTrapezoidal,
        cfg.n_channels,
        spectrum.n_fft,
        spectrum.sample_rate,
        0.0,
        nyquist,
    )?;
    let loudness: Vec<f64> = fb.center_freqs.iter().map(|&f| equal_loudness(f)).collect();
    let subband = apply_filterbank(spectrum, &fb)?;
    let order = cfg.plp_model_order;
    let mut out = Array2::zeros((frames.n_frames(), order + 1));
    for (t, mut row) in out.rows_mut().into_iter().enumerate() {
        let auditory: Vec<f64> = subband
            .row(t)
            .iter()
            .zip(&loudness)
            .map(|(p, e)| (p * e).cbrt())
            .collect();
        let r = plp_autocorrelation(&auditory, order);
        if let Ok(fit) = levinson_durbin(&r, order) {
            for (o, c) in row.iter_mut().zip(lpc_to_cepstrum(&fit.coeffs, order)) {
                *o = c;
            }
        }
        let energy: f64 = frames.frames.row(t).iter().map(|x| x * x).sum();
        row[order] = if energy > 0.0 { log_floor(energy) } else { LOG_FLOOR.ln() };
    }
    Ok(out)
}
