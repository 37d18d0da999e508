//! WAV file IO. Multichannel input is averaged down to mono.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use symaudio_core::dsp::{DspError, PcmClip};

#[derive(Debug, thiserror::Error)]
pub enum WavError {
    #[error("cannot read WAV: {0}")]
    Read(#[from] hound::Error),
    #[error("unsupported WAV format: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Clip(#[from] DspError),
}

/// Reads a PCM (8 to 32 bit integer) or 32-bit float WAV file as mono.
pub fn read_wav(path: &Path) -> Result<PcmClip, WavError> {
    let reader = WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(WavError::Unsupported("zero channels".into()));
    }
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader.into_samples::<f32>().collect::<Result<_, _>>()?,
        (SampleFormat::Int, bits @ 1..=32) => {
            let scale = (1u64 << (bits - 1)) as f32;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f32 / scale))
                .collect::<Result<_, _>>()?
        }
        (format, bits) => return Err(WavError::Unsupported(format!("{format:?} {bits} bit"))),
    };
    let mono = interleaved
        .chunks(channels)
        .map(|frame| frame.iter().sum::<f32>() / channels as f32)
        .collect();
    Ok(PcmClip::new(mono, spec.sample_rate)?)
}

/// Writes mono samples as 16-bit PCM.
pub fn write_wav(path: &Path, samples: &[f32], sample_rate_hz: u32) -> Result<(), WavError> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for &s in samples {
        writer.write_sample((s.clamp(-1.0, 1.0) * i16::MAX as f32).round() as i16)?;
    }
    writer.finalize()?;
    Ok(())
}
