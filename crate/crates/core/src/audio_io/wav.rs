use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{AudioSegment, RawAudio};
use crate::error::{Error, Result};

fn map_hound(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::MalformedContainer(format!("truncated file {}", path.display()))
        }
        hound::Error::IoError(e) => Error::io(path, e),
        hound::Error::FormatError(msg) => Error::MalformedContainer(msg.to_string()),
        hound::Error::Unsupported => {
            Error::UnsupportedEncoding(format!("{} is not linear PCM or float", path.display()))
        }
        other => Error::UnsupportedEncoding(other.to_string()),
    }
}

const TAG_PCM: u16 = 0x0001;
const TAG_FLOAT: u16 = 0x0003;
const TAG_EXTENSIBLE: u16 = 0xfffe;

/// Walks the RIFF chunk list to the `fmt ` chunk and returns its format
/// tag (the sub-format for WAVE_FORMAT_EXTENSIBLE). hound validates block
/// geometry before looking at the tag, which would report compressed
/// codecs as malformed.
fn sniff_format_tag(path: &Path) -> Result<u16> {
    use std::io::{Read, Seek, SeekFrom};

    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut head = [0u8; 12];
    f.read_exact(&mut head)
        .map_err(|_| Error::MalformedContainer("file shorter than a RIFF header".into()))?;
    if &head[..4] != b"RIFF" || &head[8..12] != b"WAVE" {
        return Err(Error::MalformedContainer("missing RIFF/WAVE tags".into()));
    }
    loop {
        let mut chunk = [0u8; 8];
        f.read_exact(&mut chunk)
            .map_err(|_| Error::MalformedContainer("no fmt chunk".into()))?;
        let len = u32::from_le_bytes(chunk[4..8].try_into().unwrap());
        if &chunk[..4] == b"fmt " {
            let mut fmt = vec![0u8; len.min(40) as usize];
            f.read_exact(&mut fmt)
                .map_err(|_| Error::MalformedContainer("truncated fmt chunk".into()))?;
            if fmt.len() < 2 {
                return Err(Error::MalformedContainer("fmt chunk too small".into()));
            }
            let tag = u16::from_le_bytes([fmt[0], fmt[1]]);
            if tag == TAG_EXTENSIBLE && fmt.len() >= 26 {
                return Ok(u16::from_le_bytes([fmt[24], fmt[25]]));
            }
            return Ok(tag);
        }
        // Chunks are word aligned.
        let skip = len as i64 + (len & 1) as i64;
        f.seek(SeekFrom::Current(skip))
            .map_err(|e| Error::io(path, e))?;
    }
}

/// Reads a RIFF/WAVE file and downmixes it to mono.
///
/// Integer PCM is divided by `2^(bits-1)`, so full-scale negative maps to
/// exactly -1. Float files are taken as-is, scaled down only if their peak
/// exceeds 1.
pub fn load_wav(path: impl AsRef<Path>) -> Result<RawAudio> {
    let path = path.as_ref();
    match sniff_format_tag(path)? {
        TAG_PCM | TAG_FLOAT => {}
        tag => {
            return Err(Error::UnsupportedEncoding(format!(
                "format tag {tag:#06x} is not linear PCM or IEEE float"
            )))
        }
    }
    let reader = WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if !(1..=2).contains(&channels) {
        return Err(Error::UnsupportedEncoding(format!(
            "{channels} channels (only mono and stereo are supported)"
        )));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| map_hound(path, e))?
        }
        (format, bits) => {
            return Err(Error::UnsupportedEncoding(format!(
                "{bits}-bit {format:?} samples"
            )))
        }
    };

    if interleaved.len() < channels {
        return Err(Error::EmptyAudio);
    }
    let mut samples: Vec<f64> = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };

    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if !peak.is_finite() {
        return Err(Error::MalformedContainer("non-finite float samples".into()));
    }
    if peak > 1.0 {
        samples.iter_mut().for_each(|s| *s /= peak);
    }
    Ok(RawAudio::new(samples, spec.sample_rate))
}

/// Writes `seg` as 16-bit PCM mono. Samples outside `[-1, 1]` are
/// rejected rather than clipped.
pub fn save_wav(seg: &AudioSegment, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some((index, &value)) = seg
        .samples
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || v.abs() > 1.0)
    {
        return Err(Error::SampleOutOfRange { index, value });
    }
    if seg.sample_rate == 0 {
        return Err(Error::InvalidRate(0.0));
    }
    let spec = WavSpec {
        channels: 1,
        sample_rate: seg.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    for &s in &seg.samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(|e| map_hound(path, e))?;
    }
    writer.finalize().map_err(|e| map_hound(path, e))
}
