use std::f64::consts::PI;

use super::RawAudio;
use crate::error::{Error, Result};

/// Kaiser window shape parameter of the interpolation kernel.
pub const KAISER_BETA: f64 = 8.0;
/// Sinc zero crossings on each side of the kernel centre.
pub const ZERO_CROSSINGS: usize = 32;

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let f = half / k as f64;
        term *= f * f;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        let a = PI * t;
        a.sin() / a
    }
}

/// Band-limited resampling by windowed-sinc interpolation.
///
/// The kernel cutoff follows the lower of the two Nyquist rates, so
/// downsampling is anti-aliased. Equal rates return the input unchanged.
pub fn resample(raw: &RawAudio, target_rate: u32) -> Result<RawAudio> {
    if raw.sample_rate == 0 {
        return Err(Error::InvalidRate(raw.sample_rate as f64));
    }
    if target_rate == 0 {
        return Err(Error::InvalidRate(target_rate as f64));
    }
    if raw.sample_rate == target_rate {
        return Ok(raw.clone());
    }

    let src = raw.sample_rate as f64;
    let dst = target_rate as f64;
    let ratio = dst / src;
    let out_len = (raw.samples.len() as f64 * ratio).round() as usize;
    let cutoff = ratio.min(1.0);
    let half_width = ZERO_CROSSINGS as f64 / cutoff;
    let i0_beta = bessel_i0(KAISER_BETA);
    let n = raw.samples.len() as isize;

    let samples = (0..out_len)
        .map(|j| {
            let pos = j as f64 * src / dst;
            let lo = ((pos - half_width).ceil() as isize).max(0);
            let hi = ((pos + half_width).floor() as isize).min(n - 1);
            let mut acc = 0.0;
            for k in lo..=hi {
                let d = pos - k as f64;
                let r = d / half_width;
                let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
                acc += raw.samples[k as usize] * cutoff * sinc(cutoff * d) * w;
            }
            acc
        })
        .collect();
    Ok(RawAudio::new(samples, target_rate))
}
