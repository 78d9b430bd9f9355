//! Time-frequency features: STFT, power spectrogram, Mel filter bank,
//! log-Mel spectrogram and MFCC, plus the reshaping and normalization
//! applied before the network sees them.

mod io;
mod mel;
mod prep;
mod stft;

pub use io::{export_png, import_png, read_features, write_features, FEATURE_MAGIC};
pub use mel::{
    dct_matrix, hz_to_mel, log_mel_spectrogram, mel_filterbank, mel_to_hz, mfcc, MelFilterBank,
    LOG_FLOOR,
};
pub use prep::{fit_frames, resize_bilinear, standardize, standardize_rows, FeatureStats};
pub use stft::{hann_window, power_spectrogram, stft, StftConfig};

use serde::{Deserialize, Serialize};

use crate::audio_io::{AudioSegment, CANONICAL_RATE};
use crate::error::Result;
use crate::matrix::Matrix;

/// Squared STFT magnitudes with their axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// `[n_fft/2 + 1, n_frames]`
    pub values: Matrix<f64>,
    pub bin_freqs: Vec<f64>,
    pub frame_times: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    LogMel,
    Mfcc,
}

impl FeatureKind {
    pub fn code(self) -> u8 {
        match self {
            FeatureKind::LogMel => 0,
            FeatureKind::Mfcc => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(FeatureKind::LogMel),
            1 => Some(FeatureKind::Mfcc),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Raw,
    Standardized { mean: f64, std: f64 },
    StandardizedRows { mean: Vec<f64>, std: Vec<f64> },
}

/// A 2-D feature map, rows are frequency bands or coefficients and
/// columns are frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub kind: FeatureKind,
    pub values: Matrix<f64>,
    pub normalization: Normalization,
}

impl FeatureMatrix {
    pub fn new(kind: FeatureKind, values: Matrix<f64>) -> Self {
        Self {
            kind,
            values,
            normalization: Normalization::Raw,
        }
    }
}

/// Everything needed to turn a segment into a raw feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub kind: FeatureKind,
    pub sample_rate: u32,
    pub stft: StftConfig,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub n_mfcc: usize,
    /// MFCC matrices are padded or truncated to this many frames.
    pub mfcc_frames: usize,
}

impl FeatureConfig {
    pub fn log_mel() -> Self {
        Self {
            kind: FeatureKind::LogMel,
            sample_rate: CANONICAL_RATE,
            stft: StftConfig::default(),
            n_mels: 128,
            f_min: 0.0,
            f_max: 8000.0,
            n_mfcc: 40,
            mfcc_frames: 400,
        }
    }

    pub fn mfcc() -> Self {
        Self {
            kind: FeatureKind::Mfcc,
            ..Self::log_mel()
        }
    }

    pub fn for_kind(kind: FeatureKind) -> Self {
        match kind {
            FeatureKind::LogMel => Self::log_mel(),
            FeatureKind::Mfcc => Self::mfcc(),
        }
    }

    pub fn extractor(&self) -> Result<FeatureExtractor> {
        self.stft.validate()?;
        let bank = mel_filterbank(
            self.n_mels,
            self.stft.n_fft,
            self.sample_rate,
            self.f_min,
            self.f_max,
        )?;
        Ok(FeatureExtractor {
            config: self.clone(),
            bank,
        })
    }
}

/// A [`FeatureConfig`] with its filter bank built once; shareable across
/// threads.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: FeatureConfig,
    bank: MelFilterBank,
}

impl FeatureExtractor {
    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn bank(&self) -> &MelFilterBank {
        &self.bank
    }

    pub fn extract(&self, seg: &AudioSegment) -> Result<FeatureMatrix> {
        match self.config.kind {
            FeatureKind::LogMel => log_mel_spectrogram(seg, &self.config.stft, &self.bank),
            FeatureKind::Mfcc => {
                let m = mfcc(seg, &self.config.stft, &self.bank, self.config.n_mfcc)?;
                Ok(fit_frames(&m, self.config.mfcc_frames))
            }
        }
    }
}
