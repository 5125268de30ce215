use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::dataio::AudioClip;
use crate::error::{Error, Result};

/// A Gaussian bump on the log-frequency axis of the stationary envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct BandEmphasis {
    pub center_hz: f64,
    pub gain_db: f64,
    pub width_octaves: f64,
}

/// Hann-windowed tone bursts repeating with a fixed period.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneBursts {
    pub freq_hz: f64,
    pub period_s: f64,
    pub duration_s: f64,
    /// RMS relative to the stationary background.
    pub level_db: f64,
}

/// Exponentially decaying sinusoids at Poisson-distributed onsets.
#[derive(Debug, Clone, PartialEq)]
pub struct Transients {
    pub rate_per_s: f64,
    pub freq_hz: f64,
    pub decay_s: f64,
    /// Peak amplitude relative to the background RMS.
    pub level_db: f64,
}

/// Recipe for one synthetic scene class: a stationary coloured background,
/// quasi-stationary periodic bursts, and short random transients.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneProfile {
    pub name: String,
    /// Spectral slope of the background, dB per octave relative to 1 kHz.
    pub tilt_db_per_octave: f64,
    pub emphases: Vec<BandEmphasis>,
    pub bursts: Option<ToneBursts>,
    pub transients: Option<Transients>,
    /// Per-clip uniform jitter (dB) on the tilt, emphasis gains and event levels.
    pub jitter_db: f64,
    pub seed: u64,
}

/// Background level in dB at `freq_hz`, before per-clip jitter.
fn envelope_db_with(tilt: f64, emphases: &[(f64, f64, f64)], freq_hz: f64) -> f64 {
    let octaves = (freq_hz.max(1.0) / 1000.0).log2();
    let bumps: f64 = emphases
        .iter()
        .map(|&(fc, g, w)| {
            let d = (freq_hz.max(1.0) / fc).log2() / w;
            g * (-0.5 * d * d).exp()
        })
        .sum();
    tilt * octaves + bumps
}

impl SceneProfile {
    pub fn envelope_db(&self, freq_hz: f64) -> f64 {
        let e: Vec<(f64, f64, f64)> = self
            .emphases
            .iter()
            .map(|b| (b.center_hz, b.gain_db, b.width_octaves))
            .collect();
        envelope_db_with(self.tilt_db_per_octave, &e, freq_hz)
    }

    /// The same background with no bursts, transients or jitter.
    pub fn stationary_only(&self) -> SceneProfile {
        SceneProfile {
            bursts: None,
            transients: None,
            jitter_db: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(format!("profile {:?}: {m}", self.name)));
        if self.name.is_empty() {
            return bad("empty name");
        }
        if !self.tilt_db_per_octave.is_finite() || !(self.jitter_db >= 0.0) {
            return bad("tilt and jitter must be finite, jitter non-negative");
        }
        for e in &self.emphases {
            if !(e.center_hz > 0.0 && e.width_octaves > 0.0 && e.gain_db.is_finite()) {
                return bad("emphasis needs positive centre and width");
            }
        }
        if let Some(b) = &self.bursts {
            if !(b.freq_hz > 0.0 && b.period_s > 0.0 && b.duration_s > 0.0 && b.duration_s <= b.period_s) {
                return bad("bursts need positive frequency and 0 < duration <= period");
            }
        }
        if let Some(t) = &self.transients {
            if !(t.rate_per_s >= 0.0 && t.freq_hz > 0.0 && t.decay_s > 0.0) {
                return bad("transients need non-negative rate, positive frequency and decay");
            }
        }
        Ok(())
    }
}

fn emphasis(center_hz: f64, gain_db: f64, width_octaves: f64) -> BandEmphasis {
    BandEmphasis {
        center_hz,
        gain_db,
        width_octaves,
    }
}

/// Five scene classes with distinct backgrounds and event statistics.
pub fn builtin_profiles() -> Vec<SceneProfile> {
    let profile = |name: &str, tilt, emphases, bursts, transients, seed| SceneProfile {
        name: name.to_string(),
        tilt_db_per_octave: tilt,
        emphases,
        bursts,
        transients,
        jitter_db: 5.0,
        seed,
    };
    vec![
        profile(
            "bus",
            -6.0,
            vec![emphasis(120.0, 12.0, 0.6)],
            Some(ToneBursts { freq_hz: 310.0, period_s: 1.0, duration_s: 0.4, level_db: 0.0 }),
            Some(Transients { rate_per_s: 0.5, freq_hz: 2100.0, decay_s: 0.03, level_db: 6.0 }),
            11,
        ),
        profile(
            "cafe",
            -2.0,
            vec![emphasis(900.0, 9.0, 0.8)],
            Some(ToneBursts { freq_hz: 650.0, period_s: 0.6, duration_s: 0.2, level_db: -3.0 }),
            Some(Transients { rate_per_s: 4.0, freq_hz: 4200.0, decay_s: 0.01, level_db: 9.0 }),
            23,
        ),
        profile(
            "park",
            -1.0,
            vec![emphasis(4000.0, 10.0, 0.5)],
            Some(ToneBursts { freq_hz: 3100.0, period_s: 0.7, duration_s: 0.15, level_db: 3.0 }),
            Some(Transients { rate_per_s: 1.0, freq_hz: 6000.0, decay_s: 0.02, level_db: 6.0 }),
            37,
        ),
        profile(
            "street",
            -4.0,
            vec![emphasis(500.0, 6.0, 1.0), emphasis(2500.0, 4.0, 0.5)],
            Some(ToneBursts { freq_hz: 1450.0, period_s: 1.5, duration_s: 0.6, level_db: 2.0 }),
            Some(Transients { rate_per_s: 2.0, freq_hz: 1000.0, decay_s: 0.05, level_db: 6.0 }),
            41,
        ),
        profile(
            "home",
            -3.0,
            vec![emphasis(250.0, 5.0, 0.7), emphasis(8000.0, -8.0, 1.0)],
            Some(ToneBursts { freq_hz: 200.0, period_s: 2.0, duration_s: 0.3, level_db: -2.0 }),
            Some(Transients { rate_per_s: 0.3, freq_hz: 3000.0, decay_s: 0.04, level_db: 3.0 }),
            53,
        ),
    ]
}

pub fn builtin_profile(name: &str) -> Result<SceneProfile> {
    builtin_profiles()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| {
            let known: Vec<String> = builtin_profiles().into_iter().map(|p| p.name).collect();
            Error::invalid(format!("unknown scene profile {name:?} (known: {})", known.join(", ")))
        })
}

/// Gaussian noise coloured by `gain_db(f)` in the frequency domain, scaled to unit RMS.
fn coloured_noise(rng: &mut ChaCha8Rng, n: usize, sample_rate: f64, gain_db: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(StandardNormal.sample(rng), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let bin = k.min(n - k);
        if bin == 0 {
            *v = Complex::new(0.0, 0.0);
            continue;
        }
        let f = bin as f64 * sample_rate / n as f64;
        *v *= 10f64.powf(gain_db(f) / 20.0);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let out: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    out.into_iter().map(|v| v / rms).collect()
}

/// Deterministic clip for `profile` and `seed`, peak-normalised to 0.5.
pub fn synth_scene(profile: &SceneProfile, duration_s: f64, sample_rate: u32, seed: u64) -> Result<AudioClip> {
    profile.validate()?;
    if !(duration_s >= 1.0) {
        return Err(Error::invalid(format!("duration {duration_s} s is shorter than 1 s")));
    }
    let sr = f64::from(sample_rate);
    let n = (duration_s * sr).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ seed);
    let jitter = |rng: &mut ChaCha8Rng| {
        if profile.jitter_db > 0.0 {
            rng.random_range(-profile.jitter_db..=profile.jitter_db)
        } else {
            0.0
        }
    };

    let tilt = profile.tilt_db_per_octave + jitter(&mut rng) / 3.0;
    let emphases: Vec<(f64, f64, f64)> = profile
        .emphases
        .iter()
        .map(|e| (e.center_hz, e.gain_db + jitter(&mut rng), e.width_octaves))
        .collect();
    let mut x = coloured_noise(&mut rng, n, sr, |f| envelope_db_with(tilt, &emphases, f));

    if let Some(b) = &profile.bursts {
        let amp = 2f64.sqrt() * 10f64.powf((b.level_db + jitter(&mut rng)) / 20.0);
        let offset = rng.random_range(0.0..b.period_s);
        let len = (b.duration_s * sr) as usize;
        let mut start_s = offset - b.period_s;
        while start_s < duration_s {
            let start = (start_s * sr).round() as isize;
            let phase = rng.random_range(0.0..2.0 * PI);
            for i in 0..len {
                let t = start + i as isize;
                if t < 0 || t as usize >= n {
                    continue;
                }
                let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos();
                let arg = 2.0 * PI * b.freq_hz * i as f64 / sr + phase;
                x[t as usize] += amp * w * (arg.sin() + 0.5 * (2.0 * arg).sin());
            }
            start_s += b.period_s;
        }
    }

    if let Some(tr) = &profile.transients {
        if tr.rate_per_s > 0.0 {
            let amp = 10f64.powf((tr.level_db + jitter(&mut rng)) / 20.0);
            let gap = Exp::new(tr.rate_per_s).map_err(|e| Error::invalid(e.to_string()))?;
            let len = (6.0 * tr.decay_s * sr) as usize;
            let mut t_s = gap.sample(&mut rng);
            while t_s < duration_s {
                let start = (t_s * sr) as usize;
                let f = tr.freq_hz * rng.random_range(0.95..1.05);
                let phase = rng.random_range(0.0..2.0 * PI);
                for i in 0..len.min(n - start) {
                    let t = i as f64 / sr;
                    x[start + i] += amp * (-t / tr.decay_s).exp() * (2.0 * PI * f * t + phase).sin();
                }
                t_s += gap.sample(&mut rng);
            }
        }
    }

    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let samples = x.into_iter().map(|v| 0.5 * v / peak).collect();
    AudioClip::new(samples, sample_rate, format!("{}_{seed}", profile.name))
}

/// Mean power per octave band (centres 125 Hz to 8 kHz) from a Welch
/// average of Hann-windowed 4096-point periodograms with 50% overlap.
pub fn octave_band_levels(clip: &AudioClip) -> Vec<f64> {
    let seg = 4096;
    let hop = seg / 2;
    let x = clip.samples();
    let window: Vec<f64> = (0..seg).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / seg as f64).cos()).collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(seg);
    let mut psd = vec![0.0; seg / 2 + 1];
    let mut count = 0;
    let mut start = 0;
    while start + seg <= x.len() {
        let mut buf: Vec<Complex<f64>> = (0..seg).map(|i| Complex::new(x[start + i] * window[i], 0.0)).collect();
        fft.process(&mut buf);
        for (p, c) in psd.iter_mut().zip(&buf) {
            *p += c.norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let sr = f64::from(clip.sample_rate());
    OCTAVE_CENTRES
        .iter()
        .map(|&fc| {
            let (lo, hi) = (fc / 2f64.sqrt(), fc * 2f64.sqrt());
            let bins: Vec<f64> = psd
                .iter()
                .enumerate()
                .filter(|(k, _)| {
                    let f = *k as f64 * sr / seg as f64;
                    f >= lo && f < hi
                })
                .map(|(_, p)| p / count.max(1) as f64)
                .collect();
            10.0 * (bins.iter().sum::<f64>() / bins.len().max(1) as f64).max(1e-30).log10()
        })
        .collect()
}

pub const OCTAVE_CENTRES: [f64; 7] = [125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0];

/// RMS over octave bands of the level difference after removing the mean
/// offset, so overall gain does not count.
pub fn band_level_distance(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_clip() {
        let p = builtin_profile("cafe").unwrap();
        let a = synth_scene(&p, 1.5, 16000, 3).unwrap();
        let b = synth_scene(&p, 1.5, 16000, 3).unwrap();
        assert_eq!(a.samples(), b.samples());
        assert_ne!(a.samples(), synth_scene(&p, 1.5, 16000, 4).unwrap().samples());
        let peak = a.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 0.5).abs() < 1e-12);
        assert_eq!(a.len(), 24000);
    }

    /// Band mean of `10^(dB/10)` over the same FFT bins the Welch estimate uses.
    fn envelope_band_levels(p: &SceneProfile, sr: f64) -> Vec<f64> {
        let seg = 4096;
        OCTAVE_CENTRES
            .iter()
            .map(|&fc| {
                let (lo, hi) = (fc / 2f64.sqrt(), fc * 2f64.sqrt());
                let powers: Vec<f64> = (0..=seg / 2)
                    .map(|k| k as f64 * sr / seg as f64)
                    .filter(|&f| f >= lo && f < hi)
                    .map(|f| 10f64.powf(p.envelope_db(f) / 10.0))
                    .collect();
                10.0 * (powers.iter().sum::<f64>() / powers.len() as f64).log10()
            })
            .collect()
    }

    #[test]
    fn long_run_spectrum_follows_envelope() {
        for p in builtin_profiles() {
            let clip = synth_scene(&p.stationary_only(), 20.0, 44100, 1).unwrap();
            let measured = octave_band_levels(&clip);
            let expected = envelope_band_levels(&p, 44100.0);
            let d: Vec<f64> = measured.iter().zip(&expected).map(|(m, e)| m - e).collect();
            let offset = d.iter().sum::<f64>() / d.len() as f64;
            for (band, v) in d.iter().enumerate() {
                assert!((v - offset).abs() < 3.0, "{} band {band}: {:.2} dB", p.name, v - offset);
            }
        }
    }

    #[test]
    fn distinct_profiles_are_spectrally_apart() {
        let levels: Vec<Vec<f64>> = builtin_profiles()
            .iter()
            .map(|p| octave_band_levels(&synth_scene(p, 3.0, 44100, 0).unwrap()))
            .collect();
        for i in 0..levels.len() {
            for j in i + 1..levels.len() {
                let d = band_level_distance(&levels[i], &levels[j]);
                assert!(d > 3.0, "profiles {i} and {j}: {d:.2} dB");
            }
        }
    }

    #[test]
    fn invalid_requests() {
        let mut p = builtin_profile("bus").unwrap();
        assert!(synth_scene(&p, 0.5, 16000, 0).is_err());
        p.bursts.as_mut().unwrap().duration_s = 5.0;
        assert!(synth_scene(&p, 2.0, 16000, 0).is_err());
        assert!(builtin_profile("nowhere").is_err());
    }
}
