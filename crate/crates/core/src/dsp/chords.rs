//! Major/minor chord decoding from chroma with template scores and Viterbi
//! smoothing.

use serde::{Deserialize, Serialize};
use alloc::vec::Vec;

use super::chroma::ChromaMatrix;
use super::DspError;
use crate::model::{ChordLabel, ChordSegment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChordConfig {
    /// Probability of staying on the same chord between frames.
    pub p_stay: f64,
}

impl Default for ChordConfig {
    fn default() -> Self {
        ChordConfig { p_stay: 0.9 }
    }
}

const N_STATES: usize = 25;
const NO_CHORD: usize = 24;
const SCORE_FLOOR: f64 = 1e-6;

fn state_label(state: usize) -> ChordLabel {
    match state {
        NO_CHORD => ChordLabel::NoChord,
        s if s < 12 => ChordLabel::Major(s as u8),
        s => ChordLabel::Minor((s - 12) as u8),
    }
}

/// Template scores for one frame: the 24 triads (1/3 on each chord tone)
/// followed by the no-chord state, which scores 1 on silent frames only.
pub fn frame_scores(frame: &[f64; 12]) -> [f64; N_STATES] {
    let silent = frame.iter().all(|v| *v == 0.0);
    let mut scores = [0.0; N_STATES];
    for (state, label) in ChordLabel::triads().enumerate() {
        let tones = label.pitch_classes().unwrap_or_default();
        scores[state] = tones.iter().map(|pc| frame[*pc as usize] / 3.0).sum();
    }
    scores[NO_CHORD] = if silent { 1.0 } else { 0.0 };
    scores
}

pub fn estimate_chords(chroma: &ChromaMatrix) -> Result<Vec<ChordSegment>, DspError> {
    estimate_chords_with(chroma, &ChordConfig::default())
}

/// Decodes the most likely chord path and merges it into segments that
/// tile `[0, duration]`.
pub fn estimate_chords_with(chroma: &ChromaMatrix, config: &ChordConfig) -> Result<Vec<ChordSegment>, DspError> {
    if chroma.frames.is_empty() {
        return Err(DspError::EmptyChroma);
    }
    let log_stay = libm::log(config.p_stay);
    let log_switch = libm::log((1.0 - config.p_stay) / (N_STATES - 1) as f64);
    let emission = |frame: &[f64; 12]| frame_scores(frame).map(|s| libm::log(s.max(SCORE_FLOOR)));

    let mut delta = emission(&chroma.frames[0]);
    let mut backptr: Vec<[u8; N_STATES]> = Vec::with_capacity(chroma.frames.len());
    backptr.push([0; N_STATES]);
    for frame in &chroma.frames[1..] {
        let emit = emission(frame);
        let (best_prev, _) = argmax(&delta);
        let mut runner_up = delta;
        runner_up[best_prev] = f64::NEG_INFINITY;
        let (second_prev, _) = argmax(&runner_up);
        let mut next = [0.0; N_STATES];
        let mut ptr = [0u8; N_STATES];
        for s in 0..N_STATES {
            let stay = delta[s] + log_stay;
            let other = if best_prev == s { second_prev } else { best_prev };
            let switch = delta[other] + log_switch;
            // ties prefer staying
            let (from, val) = if stay >= switch {
                (s, stay)
            } else {
                (other, switch)
            };
            next[s] = val + emit[s];
            ptr[s] = from as u8;
        }
        delta = next;
        backptr.push(ptr);
    }

    let mut path = alloc::vec![0usize; chroma.frames.len()];
    let mut state = argmax(&delta).0;
    for i in (0..path.len()).rev() {
        path[i] = state;
        state = backptr[i][state] as usize;
    }

    let mut segments: Vec<ChordSegment> = Vec::new();
    for (i, s) in path.iter().enumerate() {
        let label = state_label(*s);
        let t = i as f64 * chroma.frame_hop_s;
        match segments.last_mut() {
            Some(last) if last.symbol == label => {}
            Some(last) => {
                last.end_s = t;
                segments.push(ChordSegment { symbol: label, start_s: t, end_s: t });
            }
            None => segments.push(ChordSegment { symbol: label, start_s: 0.0, end_s: 0.0 }),
        }
    }
    if let Some(last) = segments.last_mut() {
        last.end_s = chroma.duration_s.max(last.start_s + chroma.frame_hop_s);
    }
    Ok(segments)
}

fn argmax(values: &[f64; N_STATES]) -> (usize, f64) {
    let mut best = 0;
    for i in 1..N_STATES {
        if values[i] > values[best] {
            best = i;
        }
    }
    (best, values[best])
}
