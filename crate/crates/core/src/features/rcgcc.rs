use ndarray::Array2;

use super::FeatureConfig;
use crate::error::Result;
use crate::spectral::cepstral_dct;

/// Lower clip of the per-channel enhancement gain.
pub const GAIN_FLOOR: f64 = 0.1;
const SEED_FRAMES: usize = 5;

/// Smoothed enhancement gains for subband power `q` (frames x channels).
///
/// Per channel a stationary level `N` follows `N_t = l N_{t-1} + (1 - l) Q_t`,
/// seeded with the mean of the first five frames. The raw gain
/// `(Q - N) / Q` is clipped to `[0.1, 1]` and smoothed with the same `l`.
pub fn enhancement_gains(q: &Array2<f64>, smoothing: f64) -> Array2<f64> {
    let (t_len, n_ch) = q.dim();
    let mut gains = Array2::zeros((t_len, n_ch));
    let seed_len = SEED_FRAMES.min(t_len);
    for c in 0..n_ch {
        let mut level = (0..seed_len).map(|t| q[[t, c]]).sum::<f64>() / seed_len as f64;
        let mut gain = 0.0;
        for t in 0..t_len {
            let power = q[[t, c]];
            level = smoothing * level + (1.0 - smoothing) * power;
            let raw = if power > 0.0 {
                ((power - level) / power).clamp(GAIN_FLOOR, 1.0)
            } else {
                GAIN_FLOOR
            };
            gain = if t == 0 { raw } else { smoothing * gain + (1.0 - smoothing) * raw };
            gains[[t, c]] = gain;
        }
    }
    gains
}

pub(super) fn rcgcc_statics(q: &Array2<f64>, cfg: &FeatureConfig) -> Result<Array2<f64>> {
    let gains = enhancement_gains(q, cfg.rcgcc_smoothing);
    let compressed = (&gains * q).mapv(f64::cbrt);
    cepstral_dct(&compressed, cfg.n_static)
}
