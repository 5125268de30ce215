//! Framing, windowed power spectra, auditory filterbanks, the cepstral DCT and
//! delta appending. Everything here is a pure function of its inputs.

mod dct;
mod deltas;
mod filterbank;
mod frame;

use ndarray::{s, Array2, Axis};

use crate::error::{Error, Result};

pub use dct::{cepstral_dct, dct_matrix};
pub use deltas::{append_deltas, deltas};
pub use filterbank::{
    apply_filterbank, bark, erb_bandwidth, erb_rate, inv_bark, inv_erb_rate, inv_mel,
    make_filterbank, mel, FilterbankKind, FilterbankMatrix,
};
pub use frame::{frame_signal, hamming_periodic, power_spectrum, FrameSequence, Spectrogram};

/// Smallest value admitted to a logarithm of subband power.
pub const LOG_FLOOR: f64 = 1e-20;

/// `ln(max(x, LOG_FLOOR))`.
pub fn log_floor(x: f64) -> f64 {
    x.max(LOG_FLOOR).ln()
}

/// Frames-by-dimensions feature values tagged with the extractor that made them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub extractor: String,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>, extractor: impl Into<String>) -> Result<Self> {
        let extractor = extractor.into();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite {extractor} feature value")));
        }
        Ok(FeatureMatrix { values, extractor })
    }

    pub fn n_frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Frame-wise concatenation of equally long matrices.
    pub fn concat(parts: &[&FeatureMatrix], extractor: impl Into<String>) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("nothing to concatenate"))?;
        for p in parts {
            if p.n_frames() != first.n_frames() {
                return Err(Error::DimensionMismatch {
                    expected: first.n_frames(),
                    found: p.n_frames(),
                });
            }
        }
        let views: Vec<_> = parts.iter().map(|p| p.values.view()).collect();
        let values = ndarray::concatenate(Axis(1), &views).map_err(|e| Error::invalid(e.to_string()))?;
        Self::new(values, extractor)
    }

    /// Columns `start..start + len`.
    pub fn block(&self, start: usize, len: usize) -> Array2<f64> {
        self.values.slice(s![.., start..start + len]).to_owned()
    }
}
