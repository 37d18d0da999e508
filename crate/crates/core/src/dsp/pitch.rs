//! Monophonic note tracking with the YIN difference function.

use serde::{Deserialize, Serialize};
use alloc::string::String;
use alloc::vec::Vec;

use super::{dbfs_to_amplitude, rms, DspError, PcmClip};
use crate::model::{NoteEvent, DEFAULT_VELOCITY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoteTrackerConfig {
    /// Cumulative-mean-normalized difference threshold.
    pub yin_threshold: f64,
    pub frame_s: f64,
    pub hop_s: f64,
    pub min_note_frames: usize,
    pub silence_dbfs: f64,
}

impl Default for NoteTrackerConfig {
    fn default() -> Self {
        NoteTrackerConfig {
            yin_threshold: 0.15,
            frame_s: 0.025,
            hop_s: 0.010,
            min_note_frames: 5,
            silence_dbfs: -40.0,
        }
    }
}

pub const MIN_SAMPLE_RATE_HZ: u32 = 8000;

/// Fundamental frequency of one frame, or `None` when unvoiced.
///
/// The first half of the frame is the integration window, so lags up to
/// half the frame length are searched.
pub fn yin_f0(frame: &[f32], sample_rate_hz: u32, threshold: f64) -> Option<f64> {
    let max_lag = frame.len() / 2;
    if max_lag < 3 {
        return None;
    }
    let window = frame.len() - max_lag;
    let mut diff = alloc::vec![0.0f64; max_lag + 1];
    for (lag, d) in diff.iter_mut().enumerate().skip(1) {
        *d = (0..window)
            .map(|j| {
                let delta = frame[j] as f64 - frame[j + lag] as f64;
                delta * delta
            })
            .sum();
    }
    let mut cmnd = alloc::vec![1.0f64; max_lag + 1];
    let mut running = 0.0;
    for lag in 1..=max_lag {
        running += diff[lag];
        cmnd[lag] = if running > 0.0 {
            diff[lag] * lag as f64 / running
        } else {
            1.0
        };
    }

    let mut lag = (2..=max_lag).find(|&l| cmnd[l] < threshold)?;
    while lag < max_lag && cmnd[lag + 1] < cmnd[lag] {
        lag += 1;
    }
    let refined = if lag > 1 && lag < max_lag {
        let (a, b, c) = (cmnd[lag - 1], cmnd[lag], cmnd[lag + 1]);
        let denom = a - 2.0 * b + c;
        if denom.abs() > f64::EPSILON {
            lag as f64 + 0.5 * (a - c) / denom
        } else {
            lag as f64
        }
    } else {
        lag as f64
    };
    Some(sample_rate_hz as f64 / refined)
}

/// Nearest MIDI note number, clamped to 0..=127.
pub fn freq_to_midi(freq_hz: f64) -> u8 {
    libm::round(69.0 + 12.0 * libm::log2(freq_hz / 440.0)).clamp(0.0, 127.0) as u8
}

pub fn track_notes(clip: &PcmClip) -> Result<Vec<NoteEvent>, DspError> {
    track_notes_with(clip, &NoteTrackerConfig::default())
}

/// Frame-wise pitch, quantized to MIDI, with runs of at least
/// `min_note_frames` identical pitches emitted as notes.
pub fn track_notes_with(clip: &PcmClip, config: &NoteTrackerConfig) -> Result<Vec<NoteEvent>, DspError> {
    let sr = clip.sample_rate_hz();
    if sr < MIN_SAMPLE_RATE_HZ {
        return Err(DspError::SampleRateTooLow(sr));
    }
    let frame_len = libm::round(config.frame_s * sr as f64) as usize;
    let hop = (libm::round(config.hop_s * sr as f64) as usize).max(1);
    let samples = clip.samples();
    if samples.len() < frame_len {
        return Ok(Vec::new());
    }
    let silence = dbfs_to_amplitude(config.silence_dbfs);
    let pitches: Vec<Option<u8>> = (0..=(samples.len() - frame_len) / hop)
        .map(|i| {
            let frame = &samples[i * hop..i * hop + frame_len];
            if rms(frame) < silence {
                return None;
            }
            yin_f0(frame, sr, config.yin_threshold).map(freq_to_midi)
        })
        .collect();

    let duration = clip.duration_s();
    let mut notes = Vec::new();
    let mut i = 0;
    while i < pitches.len() {
        let Some(pitch) = pitches[i] else {
            i += 1;
            continue;
        };
        let run_end = (i..pitches.len())
            .find(|&j| pitches[j] != Some(pitch))
            .unwrap_or(pitches.len());
        if run_end - i >= config.min_note_frames {
            let onset_s = (i * hop) as f64 / sr as f64;
            let offset_s = (((run_end - 1) * hop + frame_len) as f64 / sr as f64).min(duration);
            notes.push(NoteEvent {
                midi_pitch: pitch,
                onset_s,
                offset_s,
                instrument: String::from("unknown"),
                velocity: DEFAULT_VELOCITY,
            });
        }
        i = run_end;
    }
    Ok(notes)
}
