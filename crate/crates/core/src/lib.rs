//! Core of the symbolic audio reasoning pipeline.
//!
//! Everything here is pure computation over in-memory values and builds
//! without `std`: the symbolic feature model and its canonical JSON form,
//! the native DSP extractors (chroma, chord decoding, monophonic pitch
//! tracking, energy activity), content-aware routing, prompt rendering,
//! LLM answer parsing, per-sample feature selection, scoring and error
//! attribution. File IO, HTTP and process management live in the
//! companion `symaudio` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod answer;
pub mod codec;
pub mod dsp;
pub mod emotion;
pub mod eval;
pub mod model;
pub mod prompt;
pub mod routing;
pub mod score;
pub mod selection;
pub mod timefmt;
pub mod timeline;

pub use codec::{deserialize_bundle, deserialize_fragment, serialize_bundle, CodecError};
pub use emotion::{discretize_emotion, EmotionError};
pub use model::{
    validate_bundle, ChordLabel, ChordSegment, ClipMetadata, Emotion, EmotionLabel, EventTag,
    ExtractionStatus, FeatureBundle, Layer, LayerSet, MusicTag, NoteEvent, ProvenanceEntry,
    TranscriptSegment, ValidationReport, Violation,
};
pub use routing::{route_features, routed_layers, RoutingConfig};
pub use timeline::{render_timeline, TimelineEntry};
