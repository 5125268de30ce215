use ndarray::{Array2, Axis};

use super::FeatureConfig;
use crate::error::Result;
use crate::spectral::cepstral_dct;

/// Bias level as a multiple of the per-channel minimum medium-time power.
pub const PNCC_BIAS_FACTOR: f64 = 1.11;
/// Floor after subtraction, as a fraction of the channel's mean medium-time power.
pub const PNCC_FLOOR_FRACTION: f64 = 1e-3;

/// Running mean over frames `t - half..=t + half`, truncated at the clip edges.
pub fn medium_time_power(q: &Array2<f64>, half: usize) -> Array2<f64> {
    let t_len = q.nrows();
    let mut out = Array2::zeros(q.raw_dim());
    for t in 0..t_len {
        let lo = t.saturating_sub(half);
        let hi = (t + half).min(t_len - 1);
        let mean = q
            .slice(ndarray::s![lo..=hi, ..])
            .mean_axis(Axis(0))
            .expect("non-empty window");
        out.row_mut(t).assign(&mean);
    }
    out
}

/// Subtracts the per-channel stationary bias `1.11 * min_t Q~` from the
/// medium-time power, flooring at a small fraction of the channel mean.
pub fn bias_subtract(medium: &Array2<f64>) -> Array2<f64> {
    let mut out = medium.clone();
    for mut col in out.columns_mut() {
        let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let mean = col.mean().unwrap_or(0.0);
        let bias = PNCC_BIAS_FACTOR * min;
        let floor = PNCC_FLOOR_FRACTION * mean;
        col.mapv_inplace(|v| (v - bias).max(floor));
    }
    out
}

pub fn power_law(x: f64, exponent: f64) -> f64 {
    x.powf(exponent)
}

pub(super) fn pncc_statics(q: &Array2<f64>, cfg: &FeatureConfig) -> Result<Array2<f64>> {
    let medium = medium_time_power(q, cfg.pncc_medium_window);
    let subtracted = bias_subtract(&medium);
    let mut out = q.clone();
    ndarray::Zip::from(&mut out)
        .and(&medium)
        .and(&subtracted)
        .for_each(|o, &m, &s| {
            let normalized = if m > 0.0 { *o * s / m } else { 0.0 };
            *o = power_law(normalized, cfg.pncc_power_exponent);
        });
    cepstral_dct(&out, cfg.n_static)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::dataio::AudioClip;
    use crate::features::{extract_pncc, ClipAnalysis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Random-phase multitone on every frequency that is periodic in the hop,
    /// so every frame sees the same power spectrum.
    pub(crate) fn constant_envelope_noise(secs: f64, sr: u32, hop: usize, seed: u64) -> AudioClip {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (secs * f64::from(sr)) as usize;
        let comps: Vec<(f64, f64)> = (2..hop / 2 - 8)
            .map(|k| (k as f64 / hop as f64, rng.random_range(0.0..2.0 * PI)))
            .collect();
        let mut x = vec![0.0; n];
        for (i, xi) in x.iter_mut().enumerate() {
            for &(f, ph) in &comps {
                *xi += (2.0 * PI * f * i as f64 + ph).cos();
            }
        }
        let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        AudioClip::new(x.iter().map(|v| 0.5 * v / peak).collect(), sr, "stationary").unwrap()
    }

    #[test]
    fn stationary_noise_is_suppressed() {
        let cfg = FeatureConfig::default();
        let clip = constant_envelope_noise(1.0, 16000, cfg.hop, 1);
        let a = ClipAnalysis::new(&clip, &cfg).unwrap();
        let medium = medium_time_power(a.gammatone_power().unwrap(), 2);
        let sub = bias_subtract(&medium);
        for c in 0..medium.ncols() {
            let before = medium.column(c).mean().unwrap();
            let after = sub.column(c).mean().unwrap();
            assert!(after <= 0.15 * before, "channel {c}: {after} vs {before}");
        }
    }

    #[test]
    fn transients_survive_subtraction() {
        let mut q = Array2::from_elem((20, 1), 1.0);
        q[[10, 0]] = 50.0;
        let sub = bias_subtract(&medium_time_power(&q, 2));
        assert!(sub[[10, 0]] > 5.0);
        assert!(sub[[0, 0]] < 1e-2);
    }

    #[test]
    fn medium_time_window_truncates_at_edges() {
        let q = Array2::from_shape_fn((5, 1), |(t, _)| t as f64);
        let m = medium_time_power(&q, 2);
        assert_eq!(m[[0, 0]], 1.0);
        assert_eq!(m[[2, 0]], 2.0);
        assert_eq!(m[[4, 0]], 3.0);
    }

    #[test]
    fn power_law_fixed_points() {
        assert_eq!(power_law(0.0, 1.0 / 15.0), 0.0);
        assert_eq!(power_law(1.0, 1.0 / 15.0), 1.0);
    }

    #[test]
    fn pncc_dims() {
        let clip = constant_envelope_noise(0.5, 44100, 1024, 2);
        assert_eq!(extract_pncc(&clip, &FeatureConfig::default()).unwrap().dim(), 60);
    }
}
