//! Mono audio loading, resampling, slicing and persistence.
//!
//! Everything downstream assumes the canonical rate of 44.1 kHz and
//! fixed 4 second segments; [`load_segment`] applies both.

mod resample;
mod wav;

pub use resample::{resample, KAISER_BETA, ZERO_CROSSINGS};
pub use wav::{load_wav, save_wav};

use crate::error::{Error, Result};

pub const CANONICAL_RATE: u32 = 44_100;
pub const CANONICAL_DURATION_S: f64 = 4.0;

/// Samples and their native rate, before slicing or labelling.
#[derive(Debug, Clone, PartialEq)]
pub struct RawAudio {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl RawAudio {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// A fixed-length labelled mono window cut from a source recording.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSegment {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub class_id: usize,
    pub class_name: String,
    pub source_file: String,
    pub slice_start_s: f64,
    pub slice_end_s: f64,
}

impl AudioSegment {
    /// An unlabelled segment spanning the whole of `samples`.
    pub fn from_samples(samples: Vec<f64>, sample_rate: u32) -> Self {
        let end = samples.len() as f64 / sample_rate as f64;
        Self {
            samples,
            sample_rate,
            class_id: 0,
            class_name: String::new(),
            source_file: String::new(),
            slice_start_s: 0.0,
            slice_end_s: end,
        }
    }

    pub fn with_label(mut self, class_id: usize, class_name: impl Into<String>) -> Self {
        self.class_id = class_id;
        self.class_name = class_name.into();
        self
    }

    pub fn with_source(mut self, source_file: impl Into<String>) -> Self {
        self.source_file = source_file.into();
        self
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Output of [`slice_segments`]. `too_short` is set (and `segments` is
/// empty) when the input did not contain a single full window.
#[derive(Debug, Clone, PartialEq)]
pub struct Slices {
    pub segments: Vec<AudioSegment>,
    pub too_short: bool,
}

/// Cuts `raw` into consecutive non-overlapping windows of `duration_s`.
/// The trailing remainder is discarded.
pub fn slice_segments(raw: &RawAudio, duration_s: f64) -> Result<Slices> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "segment duration must be positive, got {duration_s}"
        )));
    }
    if raw.sample_rate == 0 {
        return Err(Error::InvalidRate(0.0));
    }
    let window = (duration_s * raw.sample_rate as f64).round() as usize;
    if window == 0 {
        return Err(Error::InvalidConfig(format!(
            "segment duration {duration_s}s is shorter than one sample"
        )));
    }
    let rate = raw.sample_rate as f64;
    let segments: Vec<AudioSegment> = raw
        .samples
        .chunks_exact(window)
        .enumerate()
        .map(|(i, chunk)| AudioSegment {
            samples: chunk.to_vec(),
            sample_rate: raw.sample_rate,
            class_id: 0,
            class_name: String::new(),
            source_file: String::new(),
            slice_start_s: (i * window) as f64 / rate,
            slice_end_s: ((i + 1) * window) as f64 / rate,
        })
        .collect();
    Ok(Slices {
        too_short: segments.is_empty(),
        segments,
    })
}

/// Loads a WAV file as a single canonical segment; see [`canonical_segment`].
pub fn load_segment(path: &std::path::Path) -> Result<AudioSegment> {
    let seg = canonical_segment(load_wav(path)?)?;
    Ok(seg.with_source(path.to_string_lossy()))
}

/// Resamples to 44.1 kHz and keeps the first 4 s window. Clips shorter
/// than one window are right-padded with silence so every segment has
/// identical length.
pub fn canonical_segment(raw: RawAudio) -> Result<AudioSegment> {
    if raw.samples.is_empty() {
        return Err(Error::EmptyAudio);
    }
    let raw = resample(&raw, CANONICAL_RATE)?;
    let window = (CANONICAL_DURATION_S * CANONICAL_RATE as f64).round() as usize;
    let mut samples = raw.samples;
    samples.resize(window, 0.0);
    Ok(AudioSegment {
        samples,
        sample_rate: CANONICAL_RATE,
        class_id: 0,
        class_name: String::new(),
        source_file: String::new(),
        slice_start_s: 0.0,
        slice_end_s: CANONICAL_DURATION_S,
    })
}
