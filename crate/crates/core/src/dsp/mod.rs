//! Native signal-processing extractors working on mono PCM.

use alloc::vec::Vec;

pub mod activity;
pub mod chords;
pub mod chroma;
pub mod fft;
pub mod pitch;

pub use activity::{detect_activity, detect_activity_with, ActivityConfig};
pub use chords::{estimate_chords, estimate_chords_with, ChordConfig};
pub use chroma::{compute_chroma, compute_chroma_with, ChromaConfig, ChromaMatrix};
pub use pitch::{track_notes, track_notes_with, NoteTrackerConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DspError {
    #[error("clip has no samples")]
    EmptyClip,
    #[error("sample {index} lies outside [-1, 1]")]
    SampleOutOfRange { index: usize },
    #[error("sample rate must be positive")]
    BadSampleRate,
    #[error("sample rate {0} Hz is below the 8000 Hz minimum")]
    SampleRateTooLow(u32),
    #[error("frame size must be a power of two >= 1024 and hop in 1..=frame size (got frame {frame_size}, hop {hop})")]
    BadFrameParams { frame_size: usize, hop: usize },
    #[error("chroma matrix has no frames")]
    EmptyChroma,
}

/// Mono PCM audio with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcmClip {
    samples: Vec<f32>,
    sample_rate_hz: u32,
}

impl PcmClip {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self, DspError> {
        if sample_rate_hz == 0 {
            return Err(DspError::BadSampleRate);
        }
        if samples.is_empty() {
            return Err(DspError::EmptyClip);
        }
        if let Some(index) = samples.iter().position(|s| !(s.abs() <= 1.0)) {
            return Err(DspError::SampleOutOfRange { index });
        }
        Ok(PcmClip {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

/// Root-mean-square of a block of samples.
pub(crate) fn rms(block: &[f32]) -> f64 {
    if block.is_empty() {
        return 0.0;
    }
    let sum: f64 = block.iter().map(|s| (*s as f64) * (*s as f64)).sum();
    libm::sqrt(sum / block.len() as f64)
}

/// Linear amplitude of a dBFS level.
pub(crate) fn dbfs_to_amplitude(dbfs: f64) -> f64 {
    libm::pow(10.0, dbfs / 20.0)
}
