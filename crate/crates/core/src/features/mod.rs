//! The cepstral feature families and the CepsCom concatenation.
//!
//! Every extractor starts from the same Hamming-windowed power spectrum of
//! 2048-sample frames with a 1024-sample hop (by default) and differs in which
//! signal components it keeps:
//!
//! | extractor | subband power | enhancement | compression | dims |
//! |-----------|---------------|-------------|-------------|------|
//! | `mfcc`    | mel           | none        | log         | 60   |
//! | `plp`     | bark          | equal loudness, LPC smoothing | cube root | 39 |
//! | `pncc`    | gammatone     | medium-time bias subtraction | `x^(1/15)` | 60 |
//! | `rcgcc`   | gammatone     | smoothed stationary-suppression gain | cube root | 60 |
//! | `spcc`    | mel           | per-clip dominant subspace | log | 60 |
//! | `cepscom` | concatenation of mfcc, pncc, rcgcc, spcc | | | 240 |

mod config;
mod mfcc;
mod plp;
mod pncc;
mod rcgcc;
mod spcc;

use std::cell::OnceCell;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::dataio::AudioClip;
use crate::error::{Error, Result};
use crate::spectral::{
    append_deltas, apply_filterbank, frame_signal, make_filterbank, power_spectrum, FeatureMatrix,
    FilterbankKind, FrameSequence, Spectrogram,
};

pub use config::FeatureConfig;
pub use plp::{equal_loudness, levinson_durbin, lpc_to_cepstrum, plp_autocorrelation, LpcFit};
pub use pncc::{bias_subtract, medium_time_power, power_law, PNCC_BIAS_FACTOR};
pub use rcgcc::{enhancement_gains, GAIN_FLOOR};
pub use spcc::{project_subspace, subspace_rank, SubspaceProjection};

/// Lower edge of the gammatone banks; channels below this carry no energy in
/// practice and their ERB is narrower than an FFT bin.
pub const GAMMATONE_F_LO: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Extractor {
    Mfcc,
    Plp,
    Pncc,
    Rcgcc,
    Spcc,
    Cepscom,
}

impl Extractor {
    pub const ALL: [Extractor; 6] = [
        Extractor::Mfcc,
        Extractor::Plp,
        Extractor::Pncc,
        Extractor::Rcgcc,
        Extractor::Spcc,
        Extractor::Cepscom,
    ];

    /// CepsCom members in concatenation order.
    pub const CEPSCOM_PARTS: [Extractor; 4] =
        [Extractor::Mfcc, Extractor::Pncc, Extractor::Rcgcc, Extractor::Spcc];

    pub fn name(self) -> &'static str {
        match self {
            Extractor::Mfcc => "mfcc",
            Extractor::Plp => "plp",
            Extractor::Pncc => "pncc",
            Extractor::Rcgcc => "rcgcc",
            Extractor::Spcc => "spcc",
            Extractor::Cepscom => "cepscom",
        }
    }

    /// Output dimension under `cfg` (60 / 39 / 240 with defaults).
    pub fn dim(self, cfg: &FeatureConfig) -> usize {
        match self {
            Extractor::Plp => 3 * (cfg.plp_model_order + 1),
            Extractor::Cepscom => 4 * 3 * cfg.n_static,
            _ => 3 * cfg.n_static,
        }
    }
}

impl fmt::Display for Extractor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Extractor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Extractor::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown extractor {s:?}")))
    }
}

/// Parses a comma-separated extractor list such as `mfcc,plp`.
pub fn parse_extractor_list(list: &str) -> Result<Vec<Extractor>> {
    list.split(',').map(|s| s.trim().parse()).collect()
}

/// All per-clip features, sharing frame count.
#[derive(Debug, Clone, PartialEq)]
pub struct CepstraBundle {
    pub mfcc: FeatureMatrix,
    pub pncc: FeatureMatrix,
    pub rcgcc: FeatureMatrix,
    pub spcc: FeatureMatrix,
    pub plp: FeatureMatrix,
    pub cepscom: FeatureMatrix,
}

impl CepstraBundle {
    pub fn get(&self, e: Extractor) -> &FeatureMatrix {
        match e {
            Extractor::Mfcc => &self.mfcc,
            Extractor::Plp => &self.plp,
            Extractor::Pncc => &self.pncc,
            Extractor::Rcgcc => &self.rcgcc,
            Extractor::Spcc => &self.spcc,
            Extractor::Cepscom => &self.cepscom,
        }
    }
}

/// Shared front end for one clip: frames, power spectrum, and lazily built
/// subband powers. Extractors computed from the same analysis reuse them.
pub struct ClipAnalysis<'a> {
    cfg: &'a FeatureConfig,
    pub frames: FrameSequence,
    pub spectrum: Spectrogram,
    mel: OnceCell<Array2<f64>>,
    gammatone: OnceCell<Array2<f64>>,
    parts: [OnceCell<FeatureMatrix>; 4],
}

impl<'a> ClipAnalysis<'a> {
    pub fn new(clip: &AudioClip, cfg: &'a FeatureConfig) -> Result<Self> {
        cfg.validate()?;
        let frames = frame_signal(clip, cfg.frame_len, cfg.hop)?;
        let spectrum = power_spectrum(&frames);
        Ok(ClipAnalysis {
            cfg,
            frames,
            spectrum,
            mel: OnceCell::new(),
            gammatone: OnceCell::new(),
            parts: Default::default(),
        })
    }

    fn nyquist(&self) -> f64 {
        f64::from(self.spectrum.sample_rate) / 2.0
    }

    fn subband(&self, kind: FilterbankKind, f_lo: f64) -> Result<Array2<f64>> {
        let fb = make_filterbank(
            kind,
            self.cfg.n_channels,
            self.spectrum.n_fft,
            self.spectrum.sample_rate,
            f_lo,
            self.nyquist(),
        )?;
        apply_filterbank(&self.spectrum, &fb)
    }

    pub fn mel_power(&self) -> Result<&Array2<f64>> {
        if let Some(m) = self.mel.get() {
            return Ok(m);
        }
        let m = self.subband(FilterbankKind::MelTriangular, 0.0)?;
        Ok(self.mel.get_or_init(|| m))
    }

    pub fn gammatone_power(&self) -> Result<&Array2<f64>> {
        if let Some(m) = self.gammatone.get() {
            return Ok(m);
        }
        let m = self.subband(FilterbankKind::GammatoneMagnitude, GAMMATONE_F_LO.min(self.nyquist() / 4.0))?;
        Ok(self.gammatone.get_or_init(|| m))
    }

    fn with_deltas(&self, statics: Array2<f64>, name: &str) -> Result<FeatureMatrix> {
        append_deltas(&FeatureMatrix::new(statics, name)?, self.cfg.delta_window)
    }

    fn part(&self, slot: usize, e: Extractor) -> Result<&FeatureMatrix> {
        if let Some(m) = self.parts[slot].get() {
            return Ok(m);
        }
        let statics = match e {
            Extractor::Mfcc => mfcc::mfcc_statics(self.mel_power()?, self.cfg)?,
            Extractor::Pncc => pncc::pncc_statics(self.gammatone_power()?, self.cfg)?,
            Extractor::Rcgcc => rcgcc::rcgcc_statics(self.gammatone_power()?, self.cfg)?,
            Extractor::Spcc => spcc::spcc_statics(self.mel_power()?, self.cfg)?,
            _ => unreachable!(),
        };
        let m = self.with_deltas(statics, e.name())?;
        Ok(self.parts[slot].get_or_init(|| m))
    }

    pub fn extract(&self, e: Extractor) -> Result<FeatureMatrix> {
        match e {
            Extractor::Mfcc => self.part(0, e).cloned(),
            Extractor::Pncc => self.part(1, e).cloned(),
            Extractor::Rcgcc => self.part(2, e).cloned(),
            Extractor::Spcc => self.part(3, e).cloned(),
            Extractor::Plp => {
                let statics = plp::plp_statics(&self.frames, &self.spectrum, self.cfg)?;
                self.with_deltas(statics, "plp")
            }
            Extractor::Cepscom => {
                let parts = [self.part(0, Extractor::Mfcc)?, self.part(1, Extractor::Pncc)?,
                    self.part(2, Extractor::Rcgcc)?, self.part(3, Extractor::Spcc)?];
                FeatureMatrix::concat(&parts, "cepscom")
            }
        }
    }
}

pub fn extract(clip: &AudioClip, e: Extractor, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    ClipAnalysis::new(clip, cfg)?.extract(e)
}

/// Extracts several families from one shared analysis.
pub fn extract_set(clip: &AudioClip, set: &[Extractor], cfg: &FeatureConfig) -> Result<Vec<FeatureMatrix>> {
    let analysis = ClipAnalysis::new(clip, cfg)?;
    set.iter().map(|&e| analysis.extract(e)).collect()
}

pub fn extract_bundle(clip: &AudioClip, cfg: &FeatureConfig) -> Result<CepstraBundle> {
    let a = ClipAnalysis::new(clip, cfg)?;
    Ok(CepstraBundle {
        mfcc: a.extract(Extractor::Mfcc)?,
        pncc: a.extract(Extractor::Pncc)?,
        rcgcc: a.extract(Extractor::Rcgcc)?,
        spcc: a.extract(Extractor::Spcc)?,
        plp: a.extract(Extractor::Plp)?,
        cepscom: a.extract(Extractor::Cepscom)?,
    })
}

pub fn extract_mfcc(clip: &AudioClip, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    extract(clip, Extractor::Mfcc, cfg)
}

pub fn extract_plp(clip: &AudioClip, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    extract(clip, Extractor::Plp, cfg)
}

pub fn extract_pncc(clip: &AudioClip, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    extract(clip, Extractor::Pncc, cfg)
}

pub fn extract_rcgcc(clip: &AudioClip, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    extract(clip, Extractor::Rcgcc, cfg)
}

pub fn extract_spcc(clip: &AudioClip, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    extract(clip, Extractor::Spcc, cfg)
}

pub fn extract_cepscom(clip: &AudioClip, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    extract(clip, Extractor::Cepscom, cfg)
}
