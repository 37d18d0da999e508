//! Representative bundles and questions whose rendered prompts are frozen
//! as golden files, one per bundle and prompt kind.

use std::io;
use std::path::{Path, PathBuf};

use symaudio_core::model::{ChordLabel, ChordSegment, EmotionLabel, MusicTag, NoteEvent, TranscriptSegment};
use symaudio_core::prompt::{
    build_agent_selection_prompt, build_caption_prompt, build_caption_reasoning_prompt, build_flat_prompt, Category,
    Question,
};
use symaudio_core::{ProvenanceEntry, route_features, routed_layers, ClipMetadata, EventTag, FeatureBundle, RoutingConfig};

pub struct GoldenCase {
    pub name: &'static str,
    pub bundle: FeatureBundle,
    pub question: Question,
    /// Stand-in stage-one caption for the second caption prompt.
    pub caption: &'static str,
}

/// Prompt kinds, used as the middle part of golden file names.
pub const GOLDEN_KINDS: [&str; 4] = ["flat", "caption1", "caption2", "agent"];

pub fn default_golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("prompts")
}

fn question(text: &str, options: &[&str], category: Category) -> Question {
    Question {
        text: text.into(),
        options: options.iter().map(|s| s.to_string()).collect(),
        category,
    }
}

fn note(pitch: u8, onset: f64, offset: f64, instrument: &str) -> NoteEvent {
    NoteEvent {
        midi_pitch: pitch,
        onset_s: onset,
        offset_s: offset,
        instrument: instrument.into(),
        velocity: 64,
    }
}

fn chord(symbol: ChordLabel, start: f64, end: f64) -> ChordSegment {
    ChordSegment {
        symbol,
        start_s: start,
        end_s: end,
    }
}

fn speech_scene() -> GoldenCase {
    let mut b = FeatureBundle::new(ClipMetadata::new("speech_scene", 6.5));
    b.events = vec![
        EventTag::new("Speech", 0.0, 6.2, 0.93),
        EventTag::new("Door", 5.1, 5.6, 0.41),
    ];
    b.transcript = vec![
        TranscriptSegment {
            text: "Where did you put the keys?".into(),
            start_s: 0.4,
            end_s: 2.1,
            speaker: Some("A".into()),
        },
        TranscriptSegment {
            text: "I left them on the table.".into(),
            start_s: 2.6,
            end_s: 4.3,
            speaker: Some("B".into()),
        },
    ];
    b.emotion = Some(EmotionLabel::from_vad(0.3, 0.72, 0.55).expect("values in range"));
    GoldenCase {
        name: "speech_scene",
        bundle: b,
        question: question(
            "Where were the keys left?",
            &["In the car", "On the table", "In a drawer", "By the door"],
            Category::Speech,
        ),
        caption: "Two people talk for about six seconds. The first asks where the keys are and the second says \
                  they were left on the table. A door closes near the end.",
    }
}

fn music_chords() -> GoldenCase {
    let mut b = FeatureBundle::new(ClipMetadata::new("music_chords", 8.0));
    b.events = vec![EventTag::new("Music", 0.0, 8.0, 0.88)];
    b.chords = vec![
        chord(ChordLabel::Major(0), 0.0, 2.0),
        chord(ChordLabel::Minor(9), 2.0, 4.0),
        chord(ChordLabel::Major(5), 4.0, 6.0),
        chord(ChordLabel::Major(7), 6.0, 8.0),
    ];
    b.notes = vec![
        note(60, 0.0, 0.5, "piano"),
        note(64, 0.5, 1.0, "piano"),
        note(67, 1.0, 1.5, "piano"),
        note(69, 2.0, 3.0, "piano"),
    ];
    b.music_tags = vec![
        MusicTag {
            label: "pop".into(),
            confidence: 0.61,
        },
        MusicTag {
            label: "piano".into(),
            confidence: 0.84,
        },
    ];
    GoldenCase {
        name: "music_chords",
        bundle: b,
        question: question(
            "Which chord progression is played?",
            &["C - Am - F - G", "C - F - G - C", "Am - F - C - G", "G - D - Em - C"],
            Category::Music,
        ),
        caption: "A solo piano plays a pop progression in C major, moving from C to A minor, F and G, two seconds \
                  per chord, with a rising arpeggio at the start.",
    }
}

fn sound_sequence() -> GoldenCase {
    let mut b = FeatureBundle::new(ClipMetadata::new("sound_sequence", 10.0));
    b.events = vec![
        EventTag::new("Boiling water", 5.5, 7.9, 0.58),
        EventTag::new("Doorbell", 8.2, 9.4, 0.77),
    ];
    GoldenCase {
        name: "sound_sequence",
        bundle: b,
        question: question(
            "In what order do the sounds occur?",
            &[
                "light_switch_clicking → clock_ticking → boiling_water → doorbell_ringing",
                "clock_ticking → light_switch_clicking → doorbell_ringing → boiling_water",
                "boiling_water → doorbell_ringing → clock_ticking → light_switch_clicking",
                "doorbell_ringing → boiling_water → light_switch_clicking → clock_ticking",
            ],
            Category::Sound,
        ),
        caption: "Water boils from about 5.5 s to 7.9 s, and a doorbell rings at 8.2 s near the end of the clip.",
    }
}

fn mixed_scene() -> GoldenCase {
    let mut b = FeatureBundle::new(ClipMetadata::new("mixed_scene", 12.0));
    b.events = vec![
        EventTag::new("Music", 0.0, 12.0, 0.71),
        EventTag::new("Speech", 3.0, 9.0, 0.66),
        EventTag::new("Applause", 10.5, 12.0, 0.52),
    ];
    b.transcript = vec![TranscriptSegment {
        text: "Thank you all for coming tonight.".into(),
        start_s: 3.2,
        end_s: 5.0,
        speaker: None,
    }];
    b.emotion = Some(EmotionLabel::from_vad(0.8, 0.65, 0.6).expect("values in range"));
    b.chords = vec![chord(ChordLabel::Major(2), 0.0, 6.0), chord(ChordLabel::NoChord, 6.0, 12.0)];
    b.music_tags = vec![MusicTag {
        label: "live".into(),
        confidence: 0.55,
    }];
    GoldenCase {
        name: "mixed_scene",
        bundle: b,
        question: question(
            "What is the most likely setting?",
            &["A quiet library", "A live concert", "A train station"],
            Category::Mixed,
        ),
        caption: "Music plays throughout while a speaker happily thanks the audience for coming, and applause \
                  closes the clip.",
    }
}

fn dense_events() -> GoldenCase {
    let mut b = FeatureBundle::new(ClipMetadata::new("dense_events", 30.0));
    b.events = (0..205)
        .map(|i| {
            let start = i as f64 * 0.125;
            EventTag::new("Tick", start, start + 0.0625, 0.5 + (i % 5) as f64 * 0.1)
        })
        .collect();
    GoldenCase {
        name: "dense_events",
        bundle: b,
        question: question(
            "What repeats throughout the clip?",
            &["A ticking sound", "A human voice"],
            Category::Sound,
        ),
        caption: "A steady ticking repeats eight times per second for the whole clip.",
    }
}

pub fn golden_cases() -> Vec<GoldenCase> {
    let mut cases = vec![speech_scene(), music_chords(), sound_sequence(), mixed_scene(), dense_events()];
    for case in &mut cases {
        let b = &mut case.bundle;
        for layer in b.nonempty_layers().iter() {
            b.extractor_provenance.insert(layer, ProvenanceEntry::ok("fixture", "1"));
        }
        b.canonicalize();
    }
    cases
}

/// `(file name, prompt text)` for every case and kind, rendered the way the
/// pipeline renders them: routing first with the default configuration.
pub fn render_goldens() -> Vec<(String, String)> {
    let routing = RoutingConfig::default();
    let mut out = Vec::new();
    for case in golden_cases() {
        let routed = route_features(&case.bundle, &routing);
        let offered = routed_layers(&case.bundle, &routing);
        let prompts = [
            build_flat_prompt(&routed, &case.question),
            Ok(build_caption_prompt(&routed)),
            build_caption_reasoning_prompt(case.caption, &case.question),
            build_agent_selection_prompt(&routed, &case.question, offered),
        ];
        for (kind, prompt) in GOLDEN_KINDS.iter().zip(prompts) {
            let prompt = prompt.expect("golden cases are valid");
            out.push((format!("{}.{kind}.txt", case.name), prompt.text));
        }
    }
    out
}

/// Rewrites every golden file under `dir`.
pub fn write_goldens(dir: &Path) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    render_goldens()
        .into_iter()
        .map(|(name, text)| {
            let path = dir.join(name);
            std::fs::write(&path, text)?;
            Ok(path)
        })
        .collect()
}
