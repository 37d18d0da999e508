//! Canonical JSON form of a [`FeatureBundle`].
//!
//! Object keys are sorted, timestamps are decimal strings with exactly three
//! fractional digits and every list is in canonical order, so semantically
//! equal bundles produce identical bytes. The document carries
//! `schema_version: 1`.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Deserialize;
use serde_json::Value;

use crate::model::{
    validate_bundle, ChordSegment, ClipMetadata, EmotionLabel, EventTag, FeatureBundle, Layer,
    MusicTag, NoteEvent, ProvenanceEntry, TranscriptSegment, ValidationReport, SCHEMA_VERSION,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CodecError {
    #[error("malformed feature JSON: {0}")]
    Parse(String),
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    SchemaVersionMismatch { found: u64 },
    #[error("invalid bundle: {0}")]
    InvalidBundle(ValidationReport),
}

/// Serializes a valid bundle to canonical JSON.
pub fn serialize_bundle(bundle: &FeatureBundle) -> Result<String, CodecError> {
    let mut canonical = bundle.clone();
    canonical.canonicalize();
    let report = validate_bundle(&canonical);
    if !report.is_valid() {
        return Err(CodecError::InvalidBundle(report));
    }
    let mut value = serde_json::to_value(&canonical).map_err(|e| CodecError::Parse(e.to_string()))?;
    if let Value::Object(map) = &mut value {
        map.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    }
    let mut out = String::new();
    write_canonical(&value, &mut out);
    Ok(out)
}

/// Parses canonical JSON back into a validated, canonically ordered bundle.
pub fn deserialize_bundle(text: &str) -> Result<FeatureBundle, CodecError> {
    let value = parse_versioned(text)?;
    let mut bundle: FeatureBundle =
        serde_json::from_value(value).map_err(|e| CodecError::Parse(e.to_string()))?;
    bundle.canonicalize();
    let report = validate_bundle(&bundle);
    if !report.is_valid() {
        return Err(CodecError::InvalidBundle(report));
    }
    Ok(bundle)
}

/// A partial feature document, as emitted by single-layer producers.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct FeatureFragment {
    #[serde(default)]
    pub metadata: Option<ClipMetadata>,
    #[serde(default)]
    pub events: Vec<EventTag>,
    #[serde(default)]
    pub transcript: Vec<TranscriptSegment>,
    #[serde(default)]
    pub emotion: Option<EmotionLabel>,
    #[serde(default)]
    pub notes: Vec<NoteEvent>,
    #[serde(default)]
    pub chords: Vec<ChordSegment>,
    #[serde(default)]
    pub music_tags: Vec<MusicTag>,
    #[serde(default)]
    pub extractor_provenance: BTreeMap<Layer, ProvenanceEntry>,
}

impl FeatureFragment {
    /// Attaches clip metadata, producing a canonically ordered bundle.
    pub fn into_bundle(self, metadata: ClipMetadata) -> FeatureBundle {
        let mut bundle = FeatureBundle {
            metadata,
            events: self.events,
            transcript: self.transcript,
            emotion: self.emotion,
            notes: self.notes,
            chords: self.chords,
            music_tags: self.music_tags,
            extractor_provenance: self.extractor_provenance,
        };
        bundle.canonicalize();
        bundle
    }
}

/// Parses a possibly partial feature document. `metadata` may be absent.
pub fn deserialize_fragment(text: &str) -> Result<FeatureFragment, CodecError> {
    let value = parse_versioned(text)?;
    serde_json::from_value(value).map_err(|e| CodecError::Parse(e.to_string()))
}

fn parse_versioned(text: &str) -> Result<Value, CodecError> {
    let mut value: Value =
        serde_json::from_str(text).map_err(|e| CodecError::Parse(e.to_string()))?;
    let Value::Object(map) = &mut value else {
        return Err(CodecError::Parse("top level must be an object".into()));
    };
    match map.remove("schema_version") {
        Some(Value::Number(n)) => match n.as_u64() {
            Some(SCHEMA_VERSION) => Ok(value),
            Some(found) => Err(CodecError::SchemaVersionMismatch { found }),
            None => Err(CodecError::Parse("schema_version must be an integer".into())),
        },
        Some(_) => Err(CodecError::Parse("schema_version must be an integer".into())),
        None => Err(CodecError::Parse("missing schema_version".into())),
    }
}

/// Compact JSON with object keys in byte order, independent of how the
/// map type underlying `Value` happens to be configured.
fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            out.push('{');
            for (i, (k, v)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_string(k, out);
                out.push(':');
                write_canonical(v, out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(v, out);
            }
            out.push(']');
        }
        Value::String(s) => write_string(s, out),
        other => out.push_str(&other.to_string()),
    }
}

fn write_string(s: &str, out: &mut String) {
    out.push_str(&Value::String(s.into()).to_string());
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChordLabel, Emotion};
    use alloc::vec;

    fn sample() -> FeatureBundle {
        let mut b = FeatureBundle::new(ClipMetadata {
            clip_id: "clip-1".into(),
            duration_s: 4.0,
            sample_rate_hz: 22050,
            source_path: Some("clips/clip-1.wav".into()),
        });
        b.events = vec![
            EventTag::new("Speech", 0.5, 2.0, 0.92),
            EventTag::new("Dog", 2.5, 3.0, 0.7),
        ];
        b.emotion = Some(EmotionLabel::from_vad(0.2, 0.9, 0.4).unwrap());
        b.chords = vec![ChordSegment {
            symbol: ChordLabel::Major(0),
            start_s: 0.0,
            end_s: 4.0,
        }];
        for l in [Layer::Events, Layer::Emotion, Layer::Chords] {
            b.extractor_provenance.insert(l, ProvenanceEntry::ok("x", "1"));
        }
        b
    }

    #[test]
    fn round_trip() {
        let b = sample();
        let text = serialize_bundle(&b).unwrap();
        assert_eq!(deserialize_bundle(&text).unwrap(), b);
        assert!(text.contains("\"schema_version\":1"));
        assert!(text.contains("\"label\":\"angry\""));
    }

    #[test]
    fn permutation_invariant() {
        let a = sample();
        let mut b = sample();
        b.events.reverse();
        assert_eq!(serialize_bundle(&a).unwrap(), serialize_bundle(&b).unwrap());
    }

    #[test]
    fn timestamps_rendered_to_millis() {
        let mut b = sample();
        b.events[0].start_s = 1.23456;
        let text = serialize_bundle(&b).unwrap();
        assert!(text.contains("\"start_s\":\"1.235\""), "{text}");
    }

    #[test]
    fn keys_are_sorted() {
        let text = serialize_bundle(&sample()).unwrap();
        let top: Vec<&str> = [
            "\"chords\"",
            "\"emotion\"",
            "\"events\"",
            "\"extractor_provenance\"",
            "\"metadata\"",
            "\"music_tags\"",
            "\"notes\"",
            "\"schema_version\"",
            "\"transcript\"",
        ]
        .into();
        let positions: Vec<usize> = top.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "{text}");
    }

    #[test]
    fn rejects_invalid_and_foreign_versions() {
        let mut b = sample();
        b.events[0].end_s = 0.1;
        assert!(matches!(serialize_bundle(&b), Err(CodecError::InvalidBundle(_))));

        let text = serialize_bundle(&sample()).unwrap().replace("\"schema_version\":1", "\"schema_version\":2");
        assert_eq!(
            deserialize_bundle(&text),
            Err(CodecError::SchemaVersionMismatch { found: 2 })
        );
        let text = serialize_bundle(&sample()).unwrap();
        assert!(matches!(
            deserialize_bundle(&text[..text.len() / 2]),
            Err(CodecError::Parse(_))
        ));
    }

    #[test]
    fn fragment_defaults() {
        let frag = deserialize_fragment(
            r#"{"schema_version":1,"emotion":{"valence":0.9,"arousal":0.2,"dominance":0.5},
               "notes":[{"midi_pitch":60,"onset_s":"0.000","offset_s":0.5,"instrument":"piano"}]}"#,
        )
        .unwrap();
        assert_eq!(frag.emotion.as_ref().unwrap().label, Emotion::Content);
        assert_eq!(frag.notes[0].velocity, 64);
        assert!(frag.metadata.is_none());
    }
}
