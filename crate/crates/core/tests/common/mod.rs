#![allow(dead_code)]

use proptest::collection::vec;
use proptest::option;
use proptest::prelude::*;
use symaudio_core::model::{
    ChordLabel, ChordSegment, EmotionLabel, Layer, MusicTag, NoteEvent, ProvenanceEntry, TranscriptSegment,
};
use symaudio_core::{ClipMetadata, EventTag, FeatureBundle};

fn secs(ms: u32) -> f64 {
    ms as f64 / 1000.0
}

fn unit() -> impl Strategy<Value = f64> {
    (0u32..=1000).prop_map(|k| k as f64 / 1000.0)
}

fn label() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(vec!["Music", "Speech", "music", "Dog", "Doorbell"]).prop_map(String::from),
        "\\PC{0,12}",
    ]
}

fn event(d: u32) -> impl Strategy<Value = EventTag> {
    (0..=d)
        .prop_flat_map(move |s| (Just(s), s..=d, label(), unit()))
        .prop_map(|(s, e, label, c)| EventTag::new(label, secs(s), secs(e), c))
}

fn segment(d: u32) -> impl Strategy<Value = TranscriptSegment> {
    (0..=d, 0u32..3000, "[a-z]\\PC{0,15}", option::of("[A-Z]{1,2}")).prop_map(|(s, len, text, speaker)| {
        TranscriptSegment {
            text,
            start_s: secs(s),
            end_s: secs(s + len),
            speaker,
        }
    })
}

fn note(d: u32) -> impl Strategy<Value = NoteEvent> {
    (0..d, 1u32..2000, 0u8..=127, 0u8..=127, "[a-z]{1,8}").prop_map(|(on, len, pitch, vel, instrument)| NoteEvent {
        midi_pitch: pitch,
        onset_s: secs(on),
        offset_s: secs(on + len),
        instrument,
        velocity: vel,
    })
}

fn chord_label(i: u8) -> ChordLabel {
    match i {
        24 => ChordLabel::NoChord,
        r if r < 12 => ChordLabel::Major(r),
        r => ChordLabel::Minor(r - 12),
    }
}

/// Contiguous segments tiling `[0, d]` with no repeated neighbours.
fn chords(d: u32) -> impl Strategy<Value = Vec<ChordSegment>> {
    prop_oneof![
        Just(Vec::new()),
        (vec(1..d, 0..5), vec(0u8..25, 6)).prop_map(move |(mut cuts, symbols)| {
            cuts.push(0);
            cuts.push(d);
            cuts.sort_unstable();
            cuts.dedup();
            let mut out: Vec<ChordSegment> = Vec::new();
            for (w, s) in cuts.windows(2).zip(symbols) {
                let mut symbol = chord_label(s);
                if out.last().is_some_and(|p| p.symbol == symbol) {
                    symbol = chord_label((s + 1) % 25);
                }
                out.push(ChordSegment {
                    symbol,
                    start_s: secs(w[0]),
                    end_s: secs(w[1]),
                });
            }
            out
        }),
    ]
}

/// Valid bundles with timestamps on the millisecond grid, in canonical
/// order and with provenance for every nonempty layer.
pub fn bundle() -> impl Strategy<Value = FeatureBundle> {
    (1000u32..60_000)
        .prop_flat_map(|d| {
            (
                Just(d),
                vec(event(d), 0..6),
                vec(segment(d), 0..4),
                option::of((unit(), unit(), unit())),
                vec(note(d), 0..8),
                chords(d),
                vec(("[a-z]{1,8}", unit()), 0..3),
                option::of("[a-z/]{1,20}"),
            )
        })
        .prop_map(|(d, events, transcript, vad, notes, chords, tags, source)| {
            let mut meta = ClipMetadata::new("clip", secs(d));
            meta.source_path = source;
            let mut b = FeatureBundle::new(meta);
            b.events = events;
            b.transcript = transcript;
            b.emotion = vad.map(|(v, a, dm)| EmotionLabel::from_vad(v, a, dm).unwrap());
            b.notes = notes;
            b.chords = chords;
            b.music_tags = tags
                .into_iter()
                .map(|(label, confidence)| MusicTag { label, confidence })
                .collect();
            for layer in Layer::ALL {
                if b.layer_len(layer) > 0 {
                    b.extractor_provenance.insert(layer, ProvenanceEntry::ok("gen", "1"));
                }
            }
            b.canonicalize();
            b
        })
}
