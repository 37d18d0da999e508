//! Attribution of wrong answers to missing evidence, unparseable output or
//! reasoning.
//!
//! Temporal-order questions (every option lists the same items in a
//! different order) are checked item by item: a gold item that no feature
//! in the bundle mentions is missing evidence.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

use crate::eval::{EvalResult, QaSample};
use crate::model::{FeatureBundle, Layer, LayerSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    MissingFeatureEvidence,
    ParseError,
    ReasoningFailure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TemporalDiagnosis {
    pub gold_sequence: Vec<String>,
    /// Event labels of the bundle in time order.
    pub bundle_sequence: Vec<String>,
    pub missing_items: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorEntry {
    pub sample_id: String,
    pub class: ErrorClass,
    pub included_layers: LayerSet,
    pub available_layers: LayerSet,
    pub temporal: Option<TemporalDiagnosis>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ErrorReport {
    pub entries: Vec<ErrorEntry>,
    pub by_class: BTreeMap<ErrorClass, usize>,
    /// Failures in which the layer was part of the prompt.
    pub by_included_layer: BTreeMap<Layer, usize>,
    /// Failures in which the layer had features but was left out.
    pub by_excluded_layer: BTreeMap<Layer, usize>,
    pub missing_items: usize,
}

const SEPARATORS: [&str; 8] = ["→", "->", "=>", ",", ";", " then ", " followed by ", " and then "];

fn normalize(text: &str) -> String {
    let lowered: String = text
        .chars()
        .map(|c| match c {
            '_' | '-' => ' ',
            c => c.to_ascii_lowercase(),
        })
        .collect();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Items of a sequence option such as `a → b → c`, normalized.
pub fn sequence_items(option: &str) -> Vec<String> {
    let mut text = String::from(" ");
    text.push_str(&option.to_ascii_lowercase());
    text.push(' ');
    for sep in SEPARATORS {
        text = text.replace(sep, "\u{1}");
    }
    text.split('\u{1}')
        .map(normalize)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Whether all options are permutations of one multiset of at least two
/// items.
pub fn is_temporal_order(options: &[String]) -> bool {
    if options.len() < 2 {
        return false;
    }
    let mut multisets = options.iter().map(|o| {
        let mut items = sequence_items(o);
        items.sort();
        items
    });
    let Some(first) = multisets.next() else { return false };
    first.len() >= 2 && multisets.all(|m| m == first)
}

/// Normalized feature strings; the flag marks short labels that may also
/// appear inside a longer item name.
fn evidence_texts(bundle: &FeatureBundle) -> Vec<(String, bool)> {
    let mut texts = Vec::new();
    texts.extend(bundle.events.iter().map(|e| (normalize(&e.label), true)));
    texts.extend(bundle.music_tags.iter().map(|t| (normalize(&t.label), true)));
    texts.extend(bundle.transcript.iter().map(|t| (normalize(&t.text), false)));
    texts.extend(bundle.emotion.iter().map(|e| (String::from(e.label.as_str()), true)));
    texts.extend(bundle.chords.iter().map(|c| (normalize(&alloc::format!("{}", c.symbol)), false)));
    texts.extend(bundle.notes.iter().map(|n| (normalize(&n.instrument), true)));
    texts
}

fn item_present(item: &str, texts: &[(String, bool)]) -> bool {
    texts
        .iter()
        .any(|(t, is_label)| t.contains(item) || (*is_label && t.len() >= 3 && item.contains(t.as_str())))
}

fn diagnose_temporal(gold_option: &str, bundle: Option<&FeatureBundle>) -> TemporalDiagnosis {
    let gold_sequence = sequence_items(gold_option);
    let texts = bundle.map(evidence_texts).unwrap_or_default();
    let bundle_sequence = bundle
        .map(|b| {
            let mut events = b.events.clone();
            events.sort_by(crate::model::cmp_event);
            events.iter().map(|e| e.label.clone()).collect()
        })
        .unwrap_or_default();
    let missing_items = gold_sequence
        .iter()
        .filter(|item| !item_present(item, &texts))
        .cloned()
        .collect();
    TemporalDiagnosis {
        gold_sequence,
        bundle_sequence,
        missing_items,
    }
}

/// Classifies every incorrect result. `bundles` maps sample ids to the
/// full (unrouted) feature bundle the sample was evaluated with.
pub fn analyze_errors(
    results: &[EvalResult],
    bundles: &BTreeMap<String, FeatureBundle>,
    samples: &[QaSample],
) -> ErrorReport {
    let by_id: BTreeMap<&str, &QaSample> = samples.iter().map(|s| (s.sample_id.as_str(), s)).collect();
    let mut report = ErrorReport::default();
    for result in results.iter().filter(|r| !r.correct) {
        let bundle = bundles.get(&result.sample_id);
        let available = bundle.map(|b| b.nonempty_layers()).unwrap_or_default();
        let temporal = by_id
            .get(result.sample_id.as_str())
            .filter(|s| is_temporal_order(&s.question.options))
            .and_then(|s| s.question.options.get(s.gold_index))
            .map(|gold| diagnose_temporal(gold, bundle));

        let class = if result.predicted_index.is_none() {
            ErrorClass::ParseError
        } else if temporal.as_ref().is_some_and(|t| !t.missing_items.is_empty()) {
            ErrorClass::MissingFeatureEvidence
        } else {
            ErrorClass::ReasoningFailure
        };

        *report.by_class.entry(class).or_default() += 1;
        for layer in result.included_layers.iter() {
            *report.by_included_layer.entry(layer).or_default() += 1;
        }
        for layer in available.difference(result.included_layers).iter() {
            *report.by_excluded_layer.entry(layer).or_default() += 1;
        }
        report.missing_items += temporal.as_ref().map_or(0, |t| t.missing_items.len());
        report.entries.push(ErrorEntry {
            sample_id: result.sample_id.clone(),
            class,
            included_layers: result.included_layers,
            available_layers: available,
            temporal,
        });
    }
    report
}
