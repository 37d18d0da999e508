#![allow(dead_code)]

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::Rng;
use serde_json::json;
use symaudio::wav::write_wav;
use symaudio_core::model::{
    ChordLabel, ChordSegment, EmotionLabel, Layer, MusicTag, NoteEvent, ProvenanceEntry, TranscriptSegment,
};
use symaudio_core::{serialize_bundle, ClipMetadata, EventTag, FeatureBundle};

pub const NAMES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

/// Equal-tempered frequency of a MIDI note, A4 = 440 Hz.
pub fn midi_hz(midi: f64) -> f64 {
    440.0 * 2f64.powf((midi - 69.0) / 12.0)
}

/// Equal-amplitude sines, summed and scaled to peak below 0.9.
pub fn sines(freqs: &[f64], seconds: f64, sr: u32) -> Vec<f32> {
    let n = (seconds * sr as f64).round() as usize;
    let amp = 0.9 / freqs.len() as f64;
    (0..n)
        .map(|i| {
            let t = i as f64 / sr as f64;
            freqs.iter().map(|f| amp * (TAU * f * t).sin()).sum::<f64>() as f32
        })
        .collect()
}

/// Root, third and fifth of a triad on `root_midi`, as frequencies.
pub fn triad_freqs(root_midi: f64, minor: bool) -> [f64; 3] {
    let third = if minor { 3.0 } else { 4.0 };
    [midi_hz(root_midi), midi_hz(root_midi + third), midi_hz(root_midi + 7.0)]
}

/// Expected chord symbol, spelled independently of the library.
pub fn triad_symbol(root_pc: usize, minor: bool) -> String {
    format!("{}:{}", NAMES[root_pc % 12], if minor { "min" } else { "maj" })
}

/// Silence, then a sine from `start` for `length` seconds, then silence.
pub fn tone_in_silence(freq: f64, start: f64, length: f64, total: f64, sr: u32) -> Vec<f32> {
    let n = (total * sr as f64).round() as usize;
    let (a, b) = ((start * sr as f64) as usize, ((start + length) * sr as f64) as usize);
    (0..n)
        .map(|i| {
            if (a..b).contains(&i) {
                (0.5 * (TAU * freq * i as f64 / sr as f64).sin()) as f32
            } else {
                0.0
            }
        })
        .collect()
}

pub fn write_clip(dir: &Path, name: &str, samples: &[f32], sr: u32) -> PathBuf {
    let path = dir.join(format!("{name}.wav"));
    write_wav(&path, samples, sr).unwrap();
    path
}

fn secs(ms: u32) -> f64 {
    ms as f64 / 1000.0
}

fn unit(rng: &mut StdRng) -> f64 {
    rng.gen_range(0..=1000) as f64 / 1000.0
}

const LABELS: [&str; 8] = [
    "Music",
    "Speech",
    "Dog",
    "Doorbell",
    "Rain \"heavy\"",
    "Ünïcode ✓",
    "tab\there",
    "back\\slash",
];
const TEXTS: [&str; 5] = ["hello there", "I can't believe it!", "¿qué?", "line\nbreak", "quote \" inside"];

/// A random valid bundle with every timestamp on the millisecond grid.
pub fn random_bundle(rng: &mut StdRng, id: usize) -> FeatureBundle {
    let d_ms: u32 = rng.gen_range(1000..60_000);
    let mut meta = ClipMetadata::new(format!("clip-{id}"), secs(d_ms));
    meta.sample_rate_hz = [0, 8000, 16_000, 22_050, 44_100][rng.gen_range(0..5)];
    if rng.gen_bool(0.5) {
        meta.source_path = Some(format!("audio/clip-{id}.wav"));
    }
    let mut b = FeatureBundle::new(meta);
    for _ in 0..rng.gen_range(0..6) {
        let start = rng.gen_range(0..=d_ms);
        let end = rng.gen_range(start..=d_ms);
        let label = LABELS[rng.gen_range(0..LABELS.len())];
        b.events.push(EventTag::new(label, secs(start), secs(end), unit(rng)));
    }
    for _ in 0..rng.gen_range(0..4) {
        let start = rng.gen_range(0..=d_ms);
        b.transcript.push(TranscriptSegment {
            text: TEXTS[rng.gen_range(0..TEXTS.len())].into(),
            start_s: secs(start),
            end_s: secs(start + rng.gen_range(0..=3000)),
            speaker: rng.gen_bool(0.5).then(|| format!("S{}", rng.gen_range(0..3))),
        });
    }
    if rng.gen_bool(0.5) {
        b.emotion = Some(EmotionLabel::from_vad(unit(rng), unit(rng), unit(rng)).unwrap());
    }
    for _ in 0..rng.gen_range(0..8) {
        let onset = rng.gen_range(0..d_ms);
        b.notes.push(NoteEvent {
            midi_pitch: rng.gen_range(0..=127),
            onset_s: secs(onset),
            offset_s: secs(onset + rng.gen_range(1..=2000)),
            instrument: ["unknown", "piano", "violin"][rng.gen_range(0..3)].into(),
            velocity: rng.gen_range(1..=127),
        });
    }
    if rng.gen_bool(0.6) {
        let mut cuts: Vec<u32> = (0..rng.gen_range(0..5)).map(|_| rng.gen_range(1..d_ms)).collect();
        cuts.push(0);
        cuts.push(d_ms);
        cuts.sort_unstable();
        cuts.dedup();
        let triads: Vec<_> = ChordLabel::triads().collect();
        let mut prev: Option<ChordLabel> = None;
        for w in cuts.windows(2) {
            let mut symbol = if rng.gen_bool(0.1) {
                ChordLabel::NoChord
            } else {
                triads[rng.gen_range(0..triads.len())]
            };
            if prev == Some(symbol) {
                symbol = symbol.transpose(1);
                if symbol == ChordLabel::NoChord {
                    symbol = ChordLabel::Major(0);
                }
            }
            prev = Some(symbol);
            b.chords.push(ChordSegment {
                symbol,
                start_s: secs(w[0]),
                end_s: secs(w[1]),
            });
        }
    }
    for _ in 0..rng.gen_range(0..3) {
        b.music_tags.push(MusicTag {
            label: ["jazz", "rock", "piano", "lo-fi"][rng.gen_range(0..4)].into(),
            confidence: unit(rng),
        });
    }
    for layer in Layer::ALL {
        if b.layer_len(layer) > 0 {
            b.extractor_provenance.insert(layer, ProvenanceEntry::ok("gen", "1"));
        } else if rng.gen_bool(0.2) {
            b.extractor_provenance
                .insert(layer, ProvenanceEntry::failed("gen", "1", "simulated failure"));
        }
    }
    b.canonicalize();
    b
}

const CATEGORIES: [&str; 4] = ["sound", "music", "speech", "mixed"];

/// Writes an `n`-sample custom-format benchmark under `dir`. Every fifth
/// sample points at a synthesized WAV, the others at feature files.
/// Question blocks are distinct so a gold-keyed mock can answer them.
pub fn synthetic_benchmark(dir: &Path, n: usize) -> PathBuf {
    let features = dir.join("features");
    std::fs::create_dir_all(&features).unwrap();
    let mut records = Vec::new();
    for i in 0..n {
        let category = CATEGORIES[i % 4];
        let clip_ref = if i % 5 == 0 {
            let freqs = triad_freqs(60.0 + (i % 12) as f64, i % 2 == 1);
            let path = write_clip(dir, &format!("clip{i}"), &sines(&freqs, 1.5, 16_000), 16_000);
            path.file_name().unwrap().to_string_lossy().into_owned()
        } else {
            let mut b = FeatureBundle::new(ClipMetadata::new(format!("clip{i}"), 5.0));
            let label = match category {
                "music" => "Music",
                "speech" => "Speech",
                _ => "Dog",
            };
            b.events.push(EventTag::new(label, 0.5, 4.5, 0.9));
            b.extractor_provenance.insert(Layer::Events, ProvenanceEntry::ok("gen", "1"));
            if category == "speech" {
                b.transcript.push(TranscriptSegment {
                    text: format!("sentence number {i}"),
                    start_s: 1.0,
                    end_s: 2.0,
                    speaker: None,
                });
                b.extractor_provenance
                    .insert(Layer::Transcript, ProvenanceEntry::ok("gen", "1"));
            }
            let name = format!("features/clip{i}.features.json");
            std::fs::write(dir.join(&name), serialize_bundle(&b).unwrap()).unwrap();
            name
        };
        let options: Vec<String> = (0..4).map(|k| format!("choice {k} of item {i}")).collect();
        records.push(json!({
            "sample_id": format!("s{i:02}"),
            "clip_ref": clip_ref,
            "question": format!("Question {i}: what is heard?"),
            "options": options,
            "answer": options[i % 4],
            "category": category,
        }));
    }
    let path = dir.join("bench.json");
    std::fs::write(&path, serde_json::to_string_pretty(&records).unwrap()).unwrap();
    path
}
