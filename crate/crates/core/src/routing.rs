//! Content-aware layer routing driven by sound-event tags.
//!
//! Music detected adds notes, chords and music tags; speech detected adds
//! the transcript and emotion. Events and metadata always pass through.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{FeatureBundle, Layer, LayerSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoutingConfig {
    pub music_labels: Vec<String>,
    pub speech_labels: Vec<String>,
    pub music_threshold: f64,
    pub speech_threshold: f64,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        RoutingConfig {
            music_labels: vec!["Music".into()],
            speech_labels: vec!["Speech".into()],
            music_threshold: 0.5,
            speech_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RoutingConfigError {
    #[error("routing thresholds must lie in [0, 1]")]
    ThresholdRange,
    #[error("routing label sets must be nonempty")]
    EmptyLabels,
}

impl RoutingConfig {
    pub fn validate(&self) -> Result<(), RoutingConfigError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.music_threshold) || !unit(self.speech_threshold) {
            return Err(RoutingConfigError::ThresholdRange);
        }
        if self.music_labels.is_empty() || self.speech_labels.is_empty() {
            return Err(RoutingConfigError::EmptyLabels);
        }
        Ok(())
    }
}

pub const MUSIC_LAYERS: [Layer; 3] = [Layer::Notes, Layer::Chords, Layer::MusicTags];
pub const SPEECH_LAYERS: [Layer; 2] = [Layer::Transcript, Layer::Emotion];

fn detected(bundle: &FeatureBundle, labels: &[String], threshold: f64) -> bool {
    bundle.events.iter().any(|e| {
        e.confidence >= threshold && labels.iter().any(|l| l.eq_ignore_ascii_case(&e.label))
    })
}

/// Layers that routing lets through for this bundle, whether or not they
/// hold any features.
pub fn routed_layers(bundle: &FeatureBundle, routing: &RoutingConfig) -> LayerSet {
    let mut keep = LayerSet::empty();
    keep.insert(Layer::Events);
    if detected(bundle, &routing.music_labels, routing.music_threshold) {
        MUSIC_LAYERS.into_iter().for_each(|l| keep.insert(l));
    }
    if detected(bundle, &routing.speech_labels, routing.speech_threshold) {
        SPEECH_LAYERS.into_iter().for_each(|l| keep.insert(l));
    }
    keep
}

/// Clears every layer that routing does not let through.
pub fn route_features(bundle: &FeatureBundle, routing: &RoutingConfig) -> FeatureBundle {
    let mut routed = bundle.clone();
    routed.retain_layers(routed_layers(bundle, routing));
    routed
}
