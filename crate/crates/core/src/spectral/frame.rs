use std::f64::consts::PI;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::dataio::AudioClip;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub frames: Array2<f64>,
    pub frame_len: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl FrameSequence {
    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }
}

/// One-sided power spectrum, `n_fft / 2 + 1` bins per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub power: Array2<f64>,
    pub n_fft: usize,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.power.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.power.ncols()
    }

    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * f64::from(self.sample_rate) / self.n_fft as f64
    }
}

/// Cuts `floor((L - frame_len) / hop) + 1` frames; frame `t` starts at `t * hop`.
/// A trailing partial frame is dropped.
pub fn frame_signal(clip: &AudioClip, frame_len: usize, hop: usize) -> Result<FrameSequence> {
    if frame_len == 0 || hop == 0 || hop > frame_len {
        return Err(Error::invalid(format!(
            "need 0 < hop <= frame_len, got hop {hop}, frame_len {frame_len}"
        )));
    }
    let x = clip.samples();
    if x.len() < frame_len {
        return Err(Error::invalid(format!(
            "clip {:?} has {} samples, shorter than one {frame_len}-sample frame",
            clip.source_id,
            x.len()
        )));
    }
    let n_frames = (x.len() - frame_len) / hop + 1;
    let frames = Array2::from_shape_fn((n_frames, frame_len), |(t, n)| x[t * hop + n]);
    Ok(FrameSequence {
        frames,
        frame_len,
        hop,
        sample_rate: clip.sample_rate(),
    })
}

/// DFT-even Hamming window: `0.54 - 0.46 cos(2 pi n / N)`.
pub fn hamming_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Hamming-windowed `|X_k|^2` with `n_fft = frame_len`.
pub fn power_spectrum(frames: &FrameSequence) -> Spectrogram {
    let n = frames.frame_len;
    let window = hamming_periodic(n);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let n_bins = n / 2 + 1;
    let mut power = Array2::zeros((frames.n_frames(), n_bins));
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for (frame, mut out) in frames.frames.rows().into_iter().zip(power.rows_mut()) {
        for ((b, &x), &w) in buf.iter_mut().zip(frame.iter()).zip(&window) {
            *b = Complex::new(x * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (o, b) in out.iter_mut().zip(&buf[..n_bins]) {
            *o = b.norm_sqr();
        }
    }
    Spectrogram {
        power,
        n_fft: n,
        sample_rate: frames.sample_rate,
    }
}
