//! Energy-based activity segments.

use serde::{Deserialize, Serialize};
use alloc::vec::Vec;

use super::{dbfs_to_amplitude, rms, PcmClip};
use crate::model::EventTag;

pub const ACTIVITY_LABEL: &str = "activity";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActivityConfig {
    pub frame_s: f64,
    pub threshold_dbfs: f64,
    /// Active runs separated by at most this much silence are merged.
    pub merge_gap_s: f64,
}

impl Default for ActivityConfig {
    fn default() -> Self {
        ActivityConfig {
            frame_s: 0.050,
            threshold_dbfs: -40.0,
            merge_gap_s: 0.200,
        }
    }
}

pub fn detect_activity(clip: &PcmClip) -> Vec<EventTag> {
    detect_activity_with(clip, &ActivityConfig::default())
}

/// Segments where short-time RMS exceeds the threshold. Confidence is the
/// mean RMS of the segment's active frames relative to the loudest frame.
pub fn detect_activity_with(clip: &PcmClip, config: &ActivityConfig) -> Vec<EventTag> {
    let sr = clip.sample_rate_hz() as f64;
    let frame_len = (libm::round(config.frame_s * sr) as usize).max(1);
    let levels: Vec<f64> = clip.samples().chunks(frame_len).map(rms).collect();
    let threshold = dbfs_to_amplitude(config.threshold_dbfs);
    let peak = levels.iter().cloned().fold(0.0, f64::max);
    let frame_s = frame_len as f64 / sr;
    let duration = clip.duration_s();
    let max_gap_frames = libm::floor(config.merge_gap_s / frame_s + 1e-9) as usize;

    // (first frame, last frame) of each merged run
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for (i, level) in levels.iter().enumerate() {
        if *level <= threshold {
            continue;
        }
        match runs.last_mut() {
            Some((_, last)) if i - *last - 1 <= max_gap_frames => *last = i,
            _ => runs.push((i, i)),
        }
    }

    runs.into_iter()
        .map(|(first, last)| {
            let active: Vec<f64> = levels[first..=last]
                .iter()
                .filter(|l| **l > threshold)
                .map(|l| l / peak)
                .collect();
            let confidence = (active.iter().sum::<f64>() / active.len() as f64).clamp(0.0, 1.0);
            EventTag::new(
                ACTIVITY_LABEL,
                first as f64 * frame_s,
                ((last + 1) as f64 * frame_s).min(duration),
                confidence,
            )
        })
        .collect()
}
