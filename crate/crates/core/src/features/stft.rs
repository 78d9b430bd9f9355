use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::Spectrogram;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Frame layout of the short-time transform. The window is always a
/// symmetric Hann window of length `n_fft`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub n_fft: usize,
    pub hop: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            n_fft: 2048,
            hop: 512,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_fft < 2 || self.hop == 0 || self.hop > self.n_fft {
            return Err(Error::InvalidConfig(format!(
                "stft needs 0 < hop <= n_fft and n_fft >= 2 (n_fft {}, hop {})",
                self.n_fft, self.hop
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.n_fft {
            0
        } else {
            (len - self.n_fft) / self.hop + 1
        }
    }

    pub fn window(&self) -> Vec<f64> {
        hann_window(self.n_fft)
    }
}

/// Symmetric Hann window, `0.5 (1 - cos(2 pi n / (N - 1)))`.
pub fn hann_window(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / denom).cos()))
        .collect()
}

/// Windowed DFT of each frame; frame `p` covers samples
/// `[p * hop, p * hop + n_fft)`. Returns `[n_fft/2 + 1, n_frames]`.
pub fn stft(samples: &[f64], cfg: &StftConfig) -> Result<Matrix<Complex64>> {
    cfg.validate()?;
    if samples.len() < cfg.n_fft {
        return Err(Error::TooShort {
            needed: cfg.n_fft,
            got: samples.len(),
        });
    }
    let n_bins = cfg.n_bins();
    let n_frames = cfg.n_frames(samples.len());
    let window = cfg.window();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.n_fft);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::default(); cfg.n_fft];
    let mut out = Matrix::zeros(n_bins, n_frames);

    for p in 0..n_frames {
        let frame = &samples[p * cfg.hop..p * cfg.hop + cfg.n_fft];
        for ((b, &s), &w) in buf.iter_mut().zip(frame).zip(&window) {
            *b = Complex64::new(s * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (k, &z) in buf[..n_bins].iter().enumerate() {
            out[(k, p)] = z;
        }
    }
    Ok(out)
}

/// Elementwise squared magnitude of an STFT produced with `hop` at
/// `sample_rate`.
pub fn power_spectrogram(stft_out: &Matrix<Complex64>, sample_rate: u32, hop: usize) -> Spectrogram {
    let n_fft = 2 * (stft_out.rows().max(1) - 1);
    let sr = sample_rate as f64;
    Spectrogram {
        values: stft_out.map(|z| z.norm_sqr()),
        bin_freqs: (0..stft_out.rows())
            .map(|k| k as f64 * sr / n_fft.max(1) as f64)
            .collect(),
        frame_times: (0..stft_out.cols())
            .map(|p| (p * hop) as f64 / sr)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_is_symmetric_and_bounded() {
        let w = hann_window(2048);
        assert_eq!(w[0], 0.0);
        for i in 0..w.len() {
            assert!((0.0..=1.0).contains(&w[i]));
            assert!((w[i] - w[w.len() - 1 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn frame_count_formula() {
        let cfg = StftConfig::default();
        assert_eq!(cfg.n_frames(176_400), 341);
        assert_eq!(cfg.n_frames(2048), 1);
        assert_eq!(cfg.n_frames(2047), 0);
    }

    #[test]
    fn silence_gives_zero_matrix() {
        let out = stft(&vec![0.0; 5000], &StftConfig::default()).unwrap();
        assert_eq!(out.shape(), (1025, 6));
        assert!(out.as_slice().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn bin_centred_sine_peaks_at_its_bin() {
        let cfg = StftConfig { n_fft: 1024, hop: 256 };
        let sr = 16_000.0;
        let k = 37;
        let f = k as f64 * sr / cfg.n_fft as f64;
        let x: Vec<f64> = (0..8000)
            .map(|i| (2.0 * PI * f * i as f64 / sr).sin())
            .collect();
        let out = stft(&x, &cfg).unwrap();
        for p in 0..out.cols() {
            let argmax = (0..out.rows())
                .max_by(|&a, &b| out[(a, p)].norm().total_cmp(&out[(b, p)].norm()))
                .unwrap();
            assert_eq!(argmax, k);
        }
    }

    #[test]
    fn short_input_is_rejected() {
        assert!(matches!(
            stft(&[0.0; 100], &StftConfig::default()),
            Err(Error::TooShort { needed: 2048, got: 100 })
        ));
    }

    #[test]
    fn power_is_squared_magnitude() {
        let m = Matrix::from_vec(2, 1, vec![Complex64::new(3.0, 4.0), Complex64::new(0.0, 0.0)]);
        let s = power_spectrogram(&m, 8000, 1);
        assert_eq!(s.values.as_slice(), &[25.0, 0.0]);
        let scaled = m.map(|z| z * 3.0);
        let s3 = power_spectrogram(&scaled, 8000, 1);
        assert_eq!(s3.values[(0, 0)], 225.0);
        assert_eq!(s.bin_freqs, vec![0.0, 4000.0]);
    }

    #[test]
    fn transform_is_linear() {
        let cfg = StftConfig { n_fft: 256, hop: 64 };
        let x: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let y: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let (a, b) = (0.7, -2.3);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let sx = stft(&x, &cfg).unwrap();
        let sy = stft(&y, &cfg).unwrap();
        let sm = stft(&mix, &cfg).unwrap();
        let scale = sm.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max);
        for ((m, p), q) in sm.as_slice().iter().zip(sx.as_slice()).zip(sy.as_slice()) {
            assert!((m - (p * a + q * b)).norm() <= 1e-9 * scale);
        }
    }
}
