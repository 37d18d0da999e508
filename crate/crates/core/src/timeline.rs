//! Merged, time-ordered text rendering of a bundle.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::codec::CodecError;
use crate::model::{
    midi_note_name, validate_bundle, ChordSegment, EmotionLabel, EventTag, FeatureBundle, Layer,
    MusicTag, NoteEvent, TranscriptSegment,
};

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineEntry {
    pub start_s: f64,
    pub end_s: f64,
    pub layer: Layer,
    pub text: String,
}

pub(crate) fn event_text(e: &EventTag) -> String {
    format!("{} ({:.2})", e.label, e.confidence)
}

pub(crate) fn transcript_text(t: &TranscriptSegment) -> String {
    match &t.speaker {
        Some(speaker) => format!("{speaker}: \"{}\"", t.text),
        None => format!("\"{}\"", t.text),
    }
}

pub(crate) fn emotion_text(e: &EmotionLabel) -> String {
    format!(
        "{} (valence {:.2}, arousal {:.2}, dominance {:.2})",
        e.label, e.valence, e.arousal, e.dominance
    )
}

pub(crate) fn note_text(n: &NoteEvent) -> String {
    format!(
        "{} (midi {}, velocity {}, {})",
        midi_note_name(n.midi_pitch),
        n.midi_pitch,
        n.velocity,
        n.instrument
    )
}

pub(crate) fn chord_text(c: &ChordSegment) -> String {
    format!("{}", c.symbol)
}

pub(crate) fn music_tag_text(t: &MusicTag) -> String {
    format!("{} ({:.2})", t.label, t.confidence)
}

/// Entries of one layer in canonical order. Untimed layers (emotion, music
/// tags) span the whole clip.
pub(crate) fn layer_entries(bundle: &FeatureBundle, layer: Layer) -> Vec<TimelineEntry> {
    let whole = |text| TimelineEntry {
        start_s: 0.0,
        end_s: bundle.metadata.duration_s,
        layer,
        text,
    };
    let timed = |start_s, end_s, text| TimelineEntry {
        start_s,
        end_s,
        layer,
        text,
    };
    match layer {
        Layer::Events => bundle
            .events
            .iter()
            .map(|e| timed(e.start_s, e.end_s, event_text(e)))
            .collect(),
        Layer::Transcript => bundle
            .transcript
            .iter()
            .map(|t| timed(t.start_s, t.end_s, transcript_text(t)))
            .collect(),
        Layer::Emotion => bundle.emotion.iter().map(|e| whole(emotion_text(e))).collect(),
        Layer::Notes => bundle
            .notes
            .iter()
            .map(|n| timed(n.onset_s, n.offset_s, note_text(n)))
            .collect(),
        Layer::Chords => bundle
            .chords
            .iter()
            .map(|c| timed(c.start_s, c.end_s, chord_text(c)))
            .collect(),
        Layer::MusicTags => bundle
            .music_tags
            .iter()
            .map(|t| whole(music_tag_text(t)))
            .collect(),
    }
}

/// Merges every layer into one list ordered by start time, then layer
/// order, then text.
pub fn render_timeline(bundle: &FeatureBundle) -> Result<Vec<TimelineEntry>, CodecError> {
    let mut canonical = bundle.clone();
    canonical.canonicalize();
    let report = validate_bundle(&canonical);
    if !report.is_valid() {
        return Err(CodecError::InvalidBundle(report));
    }
    let mut entries: Vec<TimelineEntry> = Layer::ALL
        .into_iter()
        .flat_map(|layer| layer_entries(&canonical, layer))
        .collect();
    entries.sort_by(|a, b| {
        a.start_s
            .total_cmp(&b.start_s)
            .then(a.layer.cmp(&b.layer))
            .then_with(|| a.text.cmp(&b.text))
    });
    Ok(entries)
}
