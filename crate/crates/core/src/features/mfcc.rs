use ndarray::Array2;

use super::FeatureConfig;
use crate::error::Result;
use crate::spectral::{cepstral_dct, log_floor};

/// Log mel power to static cepstra. `c0` is kept.
pub(super) fn mfcc_statics(mel_power: &Array2<f64>, cfg: &FeatureConfig) -> Result<Array2<f64>> {
    cepstral_dct(&mel_power.mapv(log_floor), cfg.n_static)
}
