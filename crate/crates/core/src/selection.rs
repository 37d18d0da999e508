//! Per-sample layer selection by an LLM agent, with rule-based fallback.
//!
//! Routing runs first; the agent only chooses among the layers routing let
//! through. When the reply cannot be parsed the routed bundle is used as is.

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::answer::parse_agent_selection;
use crate::model::{FeatureBundle, LayerSet};
use crate::prompt::{build_agent_selection_prompt, Prompt, PromptError, Question};
use crate::routing::{route_features, routed_layers, RoutingConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub sample_id: String,
    pub offered: LayerSet,
    pub selected: LayerSet,
    pub used_fallback: bool,
    pub raw_agent_output: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub bundle: FeatureBundle,
    /// Layers the reasoning prompt should render, possibly including
    /// selected layers that hold no features.
    pub included: LayerSet,
    pub trace: SelectionTrace,
}

#[derive(Debug, thiserror::Error)]
pub enum SelectError<E> {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("agent call failed: {0}")]
    Agent(E),
}

/// Asks the agent which routed layers matter for `question` and filters the
/// bundle to them. `ask` sends the agent prompt and returns the raw reply;
/// its errors are propagated, parse failures fall back to routing.
pub fn select_features<E>(
    sample_id: &str,
    question: &Question,
    bundle: &FeatureBundle,
    routing: &RoutingConfig,
    ask: impl FnOnce(&Prompt) -> Result<String, E>,
) -> Result<Selection, SelectError<E>> {
    let offered = routed_layers(bundle, routing);
    let routed = route_features(bundle, routing);
    let prompt = build_agent_selection_prompt(&routed, question, offered)?;
    let raw = ask(&prompt).map_err(SelectError::Agent)?;
    match parse_agent_selection(&raw, offered) {
        Ok(selected) => {
            let mut filtered = routed;
            filtered.retain_layers(selected);
            Ok(Selection {
                bundle: filtered,
                included: selected,
                trace: SelectionTrace {
                    sample_id: sample_id.into(),
                    offered,
                    selected,
                    used_fallback: false,
                    raw_agent_output: raw,
                },
            })
        }
        Err(_) => {
            let included = routed.nonempty_layers();
            Ok(Selection {
                bundle: routed,
                included,
                trace: SelectionTrace {
                    sample_id: sample_id.into(),
                    offered,
                    selected: included,
                    used_fallback: true,
                    raw_agent_output: raw,
                },
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClipMetadata, EmotionLabel, EventTag, Layer, TranscriptSegment};
    use crate::prompt::Category;
    use alloc::vec;

    fn speech_bundle() -> FeatureBundle {
        let mut b = FeatureBundle::new(ClipMetadata::new("s", 4.0));
        b.events = vec![EventTag::new("Speech", 0.0, 4.0, 0.9)];
        b.transcript = vec![TranscriptSegment {
            text: "I can't believe it".into(),
            start_s: 0.2,
            end_s: 2.0,
            speaker: None,
        }];
        b.emotion = Some(EmotionLabel::from_vad(0.1, 0.9, 0.6).unwrap());
        b
    }

    fn question() -> Question {
        Question {
            text: "How does the speaker feel?".into(),
            options: vec!["calm".into(), "angry".into()],
            category: Category::Speech,
        }
    }

    #[test]
    fn agent_choice_filters_bundle() {
        let sel = select_features("s1", &question(), &speech_bundle(), &RoutingConfig::default(), |_| {
            Ok::<_, ()>("transcript, emotion".into())
        })
        .unwrap();
        let expected: LayerSet = [Layer::Transcript, Layer::Emotion].into_iter().collect();
        assert_eq!(sel.bundle.nonempty_layers(), expected);
        assert_eq!(sel.included, expected);
        assert!(!sel.trace.used_fallback);
        assert!(sel.trace.selected.is_subset(sel.trace.offered));
    }

    #[test]
    fn gibberish_falls_back_to_routing() {
        let bundle = speech_bundle();
        let routing = RoutingConfig::default();
        let sel = select_features("s1", &question(), &bundle, &routing, |_| Ok::<_, ()>("hmm?".into())).unwrap();
        assert_eq!(sel.bundle, route_features(&bundle, &routing));
        assert!(sel.trace.used_fallback);
        assert_eq!(sel.trace.raw_agent_output, "hmm?");
    }

    #[test]
    fn empty_selected_layer_is_kept() {
        let mut bundle = speech_bundle();
        bundle.transcript.clear();
        let sel = select_features("s1", &question(), &bundle, &RoutingConfig::default(), |_| {
            Ok::<_, ()>("transcript".into())
        })
        .unwrap();
        assert!(sel.included.contains(Layer::Transcript));
        assert!(sel.bundle.nonempty_layers().is_empty());
        assert!(sel.trace.selected.contains(Layer::Transcript));
    }

    #[test]
    fn agent_never_sees_routed_out_layers() {
        let mut bundle = speech_bundle();
        bundle.events[0].label = "Dog".into();
        let mut seen = String::new();
        let sel = select_features("s1", &question(), &bundle, &RoutingConfig::default(), |p| {
            seen = p.text.clone();
            Ok::<_, ()>("transcript".into())
        })
        .unwrap();
        assert!(!seen.contains("transcript:"));
        assert!(sel.trace.used_fallback);
    }

    #[test]
    fn transport_errors_propagate() {
        let r = select_features("s1", &question(), &speech_bundle(), &RoutingConfig::default(), |_| Err("down"));
        assert!(matches!(r, Err(SelectError::Agent("down"))));
    }
}
