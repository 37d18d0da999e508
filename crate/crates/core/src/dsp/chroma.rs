//! Pitch-class profiles from Hann-windowed magnitude spectra.

use serde::{Deserialize, Serialize};
use alloc::vec;
use alloc::vec::Vec;

use super::fft::{hann, Fft};
use super::{dbfs_to_amplitude, rms, DspError, PcmClip};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChromaConfig {
    pub frame_size: usize,
    pub hop: usize,
    /// Frames whose RMS falls below this level become all-zero.
    pub silence_dbfs: f64,
    pub min_freq_hz: f64,
    pub max_freq_hz: f64,
}

impl Default for ChromaConfig {
    fn default() -> Self {
        ChromaConfig {
            frame_size: 4096,
            hop: 1024,
            silence_dbfs: -40.0,
            min_freq_hz: 55.0,
            max_freq_hz: 5000.0,
        }
    }
}

/// One 12-bin profile per frame, C = 0 .. B = 11.
#[derive(Debug, Clone, PartialEq)]
pub struct ChromaMatrix {
    /// Each frame sums to 1, or is all-zero for a silent frame.
    pub frames: Vec<[f64; 12]>,
    pub frame_hop_s: f64,
    pub duration_s: f64,
}

impl ChromaMatrix {
    pub fn is_silent(&self, frame: usize) -> bool {
        self.frames[frame].iter().all(|v| *v == 0.0)
    }
}

/// Pitch class of a frequency: `(round(12 log2(f / 440)) + 69) mod 12`.
pub fn pitch_class(freq_hz: f64) -> usize {
    let midi = libm::round(12.0 * libm::log2(freq_hz / 440.0)) as i64 + 69;
    midi.rem_euclid(12) as usize
}

pub fn compute_chroma(clip: &PcmClip, frame_size: usize, hop: usize) -> Result<ChromaMatrix, DspError> {
    compute_chroma_with(
        clip,
        &ChromaConfig {
            frame_size,
            hop,
            ..ChromaConfig::default()
        },
    )
}

pub fn compute_chroma_with(clip: &PcmClip, config: &ChromaConfig) -> Result<ChromaMatrix, DspError> {
    let (frame_size, hop) = (config.frame_size, config.hop);
    if !frame_size.is_power_of_two() || frame_size < 1024 || hop == 0 || hop > frame_size {
        return Err(DspError::BadFrameParams { frame_size, hop });
    }
    let sr = clip.sample_rate_hz() as f64;
    let samples = clip.samples();
    let n_frames = if samples.len() <= frame_size {
        1
    } else {
        1 + (samples.len() - frame_size).div_ceil(hop)
    };

    let bin_classes: Vec<Option<usize>> = (0..=frame_size / 2)
        .map(|k| {
            let f = k as f64 * sr / frame_size as f64;
            (f >= config.min_freq_hz && f <= config.max_freq_hz).then(|| pitch_class(f))
        })
        .collect();
    let window = hann(frame_size);
    let fft = Fft::new(frame_size);
    let silence = dbfs_to_amplitude(config.silence_dbfs);

    let mut re = vec![0.0; frame_size];
    let mut im = vec![0.0; frame_size];
    let mut frames = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let start = i * hop;
        let end = (start + frame_size).min(samples.len());
        let block = &samples[start..end];
        // zero-padded tail frames are judged over the full frame length
        let level = rms(block) * libm::sqrt(block.len() as f64 / frame_size as f64);
        if level < silence {
            frames.push([0.0; 12]);
            continue;
        }
        for j in 0..frame_size {
            re[j] = block.get(j).map_or(0.0, |s| *s as f64) * window[j];
            im[j] = 0.0;
        }
        fft.forward(&mut re, &mut im);
        let mut chroma = [0.0; 12];
        for (k, class) in bin_classes.iter().enumerate() {
            if let Some(pc) = class {
                chroma[*pc] += libm::sqrt(re[k] * re[k] + im[k] * im[k]);
            }
        }
        let total: f64 = chroma.iter().sum();
        if total > 0.0 {
            chroma.iter_mut().for_each(|v| *v /= total);
        }
        frames.push(chroma);
    }
    Ok(ChromaMatrix {
        frames,
        frame_hop_s: hop as f64 / sr,
        duration_s: clip.duration_s(),
    })
}
