use std::f64::consts::PI;

use super::stft::{power_spectrogram, stft, StftConfig};
use super::{FeatureKind, FeatureMatrix, Normalization};
use crate::audio_io::AudioSegment;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Floor added to (log-Mel) or clamped under (MFCC) filter energies.
pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters evenly spaced on the Mel scale, peak height 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterBank {
    /// `[n_mels, n_fft/2 + 1]`
    pub weights: Matrix<f64>,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub sample_rate: u32,
    pub n_fft: usize,
    /// `n_mels + 2` edge frequencies in Hz.
    pub edges_hz: Vec<f64>,
    // Inclusive-exclusive span of nonzero bins per filter.
    support: Vec<(usize, usize)>,
}

impl MelFilterBank {
    /// Continuous triangle `m` evaluated at `hz`.
    pub fn response(&self, m: usize, hz: f64) -> f64 {
        triangle(self.edges_hz[m], self.edges_hz[m + 1], self.edges_hz[m + 2], hz)
    }

    /// Filter energies `[n_mels, frames]` of a power spectrogram.
    pub fn apply(&self, power: &Matrix<f64>) -> Result<Matrix<f64>> {
        if power.rows() != self.weights.cols() {
            return Err(Error::ShapeMismatch(format!(
                "power spectrogram has {} bins, filter bank expects {}",
                power.rows(),
                self.weights.cols()
            )));
        }
        let frames = power.cols();
        let mut out = Matrix::zeros(self.n_mels, frames);
        for m in 0..self.n_mels {
            let (lo, hi) = self.support[m];
            let w = self.weights.row(m);
            let dst = out.row_mut(m);
            for (k, &wk) in w.iter().enumerate().take(hi).skip(lo) {
                for (d, &p) in dst.iter_mut().zip(power.row(k)) {
                    *d += wk * p;
                }
            }
        }
        Ok(out)
    }
}

fn triangle(left: f64, center: f64, right: f64, hz: f64) -> f64 {
    if hz <= left || hz >= right {
        0.0
    } else if hz <= center {
        (hz - left) / (center - left)
    } else {
        (right - hz) / (right - center)
    }
}

/// Builds `n_mels` triangles over `[f_min, f_max]` for an `n_fft`-point
/// transform at `sample_rate`.
pub fn mel_filterbank(
    n_mels: usize,
    n_fft: usize,
    sample_rate: u32,
    f_min: f64,
    f_max: f64,
) -> Result<MelFilterBank> {
    let nyquist = sample_rate as f64 / 2.0;
    if !(f_min >= 0.0 && f_min < f_max && f_max <= nyquist) {
        return Err(Error::InvalidRange(format!(
            "need 0 <= f_min < f_max <= {nyquist} Hz, got f_min {f_min}, f_max {f_max}"
        )));
    }
    if n_mels < 2 {
        return Err(Error::InvalidRange(format!("n_mels must be >= 2, got {n_mels}")));
    }
    if n_fft < 2 {
        return Err(Error::InvalidRange(format!("n_fft must be >= 2, got {n_fft}")));
    }

    let (mel_lo, mel_hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    let step = (mel_hi - mel_lo) / (n_mels + 1) as f64;
    let edges_hz: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + step * i as f64))
        .collect();

    let n_bins = n_fft / 2 + 1;
    let bin_hz = sample_rate as f64 / n_fft as f64;
    let weights = Matrix::from_fn(n_mels, n_bins, |m, k| {
        triangle(edges_hz[m], edges_hz[m + 1], edges_hz[m + 2], k as f64 * bin_hz)
    });
    let support = (0..n_mels)
        .map(|m| {
            let row = weights.row(m);
            match row.iter().position(|&w| w > 0.0) {
                Some(lo) => (lo, row.iter().rposition(|&w| w > 0.0).unwrap() + 1),
                None => (0, 0),
            }
        })
        .collect();
    Ok(MelFilterBank {
        weights,
        n_mels,
        f_min,
        f_max,
        sample_rate,
        n_fft,
        edges_hz,
        support,
    })
}

fn mel_energies(seg: &AudioSegment, cfg: &StftConfig, fb: &MelFilterBank) -> Result<Matrix<f64>> {
    if fb.n_fft != cfg.n_fft || fb.sample_rate != seg.sample_rate {
        return Err(Error::InvalidConfig(format!(
            "filter bank built for n_fft {} at {} Hz, signal framed with n_fft {} at {} Hz",
            fb.n_fft, fb.sample_rate, cfg.n_fft, seg.sample_rate
        )));
    }
    let spec = stft(&seg.samples, cfg)?;
    let power = power_spectrogram(&spec, seg.sample_rate, cfg.hop);
    fb.apply(&power.values)
}

/// `ln(filter energy + 1e-10)`, one row per Mel band.
pub fn log_mel_spectrogram(
    seg: &AudioSegment,
    cfg: &StftConfig,
    fb: &MelFilterBank,
) -> Result<FeatureMatrix> {
    let energies = mel_energies(seg, cfg, fb)?;
    Ok(FeatureMatrix {
        kind: FeatureKind::LogMel,
        values: energies.map(|e| (e + LOG_FLOOR).ln()),
        normalization: Normalization::Raw,
    })
}

/// Unnormalized type-II cosine basis, `cos(pi k (u - 0.5) / U)` for
/// `k = 0..n_coeffs` and `u = 1..=U`. Shape `[n_coeffs, U]`.
pub fn dct_matrix(n_coeffs: usize, n_filters: usize) -> Matrix<f64> {
    let u_count = n_filters as f64;
    Matrix::from_fn(n_coeffs, n_filters, |k, u| {
        (PI * k as f64 * (u as f64 + 0.5) / u_count).cos()
    })
}

/// Cepstral coefficients: the cosine transform of log filter energies,
/// with energies clamped below at 1e-10.
pub fn mfcc(
    seg: &AudioSegment,
    cfg: &StftConfig,
    fb: &MelFilterBank,
    n_coeffs: usize,
) -> Result<FeatureMatrix> {
    if n_coeffs == 0 || n_coeffs > fb.n_mels {
        return Err(Error::InvalidConfig(format!(
            "n_coeffs must be in 1..={}, got {n_coeffs}",
            fb.n_mels
        )));
    }
    let log_energies = mel_energies(seg, cfg, fb)?.map(|e| e.max(LOG_FLOOR).ln());
    let basis = dct_matrix(n_coeffs, fb.n_mels);
    let frames = log_energies.cols();
    let mut out = Matrix::zeros(n_coeffs, frames);
    for k in 0..n_coeffs {
        let b = basis.row(k);
        let dst = out.row_mut(k);
        for (u, &c) in b.iter().enumerate() {
            for (d, &l) in dst.iter_mut().zip(log_energies.row(u)) {
                *d += c * l;
            }
        }
    }
    Ok(FeatureMatrix {
        kind: FeatureKind::Mfcc,
        values: out,
        normalization: Normalization::Raw,
    })
}
