//! Deterministic prompt rendering.
//!
//! A reasoning prompt is the concatenation of a metadata block, one section
//! per feature layer, the question with lettered options and a fixed
//! instruction block. Sections are separated by one blank line and the text
//! ends with a newline. Feature lines read `[start–end] content` with
//! millisecond timestamps; untimed layers span the whole clip.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::model::{FeatureBundle, Layer, LayerSet};
use crate::timefmt::format_seconds;
use crate::timeline::layer_entries;

pub const ANSWER_INSTRUCTION: &str = "Answer with exactly one option letter. Do not explain.";
pub const CAPTION_INSTRUCTION: &str = "Write one fluent paragraph describing this audio scene. Mention timing and order of events. Do not answer any question.";
pub const SELECTION_INSTRUCTION: &str = "Reply with a comma-separated list of the feature layer names needed to answer the question. Use only names listed above.";

/// Feature lines rendered per layer before the rest is summarized.
pub const MAX_LINES_PER_LAYER: usize = 200;
pub const MAX_OPTIONS: usize = 10;
const EMPTY_SECTION: &str = "(none)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Sound,
    Music,
    Speech,
    Mixed,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Sound, Category::Music, Category::Speech, Category::Mixed];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Sound => "sound",
            Category::Music => "music",
            Category::Speech => "speech",
            Category::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub text: String,
    pub options: Vec<String>,
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("question text is empty")]
    EmptyQuestion,
    #[error("question needs 2 to {MAX_OPTIONS} options, got {0}")]
    OptionCount(usize),
    #[error("question options must be distinct")]
    DuplicateOptions,
    #[error("caption is empty")]
    EmptyCaption,
}

impl Question {
    pub fn validate(&self) -> Result<(), PromptError> {
        if self.text.trim().is_empty() {
            return Err(PromptError::EmptyQuestion);
        }
        let n = self.options.len();
        if !(2..=MAX_OPTIONS).contains(&n) {
            return Err(PromptError::OptionCount(n));
        }
        for (i, a) in self.options.iter().enumerate() {
            if self.options[i + 1..].contains(a) {
                return Err(PromptError::DuplicateOptions);
            }
        }
        Ok(())
    }
}

/// Letter shown for the option at `index`.
pub fn option_letter(index: usize) -> char {
    (b'A' + index as u8) as char
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    Flat,
    CaptionStage1,
    CaptionStage2,
    AgentSelection,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub text: String,
    pub style: PromptStyle,
    pub included_layers: LayerSet,
    /// Total feature count of each included layer.
    pub feature_manifest: Vec<(Layer, usize)>,
}

fn metadata_block(bundle: &FeatureBundle, out: &mut String) {
    let _ = write!(out, "METADATA\nduration: {} s\n\n", format_seconds(bundle.metadata.duration_s));
}

fn feature_sections(bundle: &FeatureBundle, layers: LayerSet, out: &mut String) -> Vec<(Layer, usize)> {
    let mut manifest = Vec::new();
    for layer in layers.iter() {
        let entries = layer_entries(bundle, layer);
        out.push_str(layer.title());
        out.push('\n');
        if entries.is_empty() {
            out.push_str(EMPTY_SECTION);
            out.push('\n');
        }
        for entry in entries.iter().take(MAX_LINES_PER_LAYER) {
            let _ = writeln!(
                out,
                "[{}–{}] {}",
                format_seconds(entry.start_s),
                format_seconds(entry.end_s),
                entry.text
            );
        }
        if entries.len() > MAX_LINES_PER_LAYER {
            let _ = writeln!(out, "… and {} more", entries.len() - MAX_LINES_PER_LAYER);
        }
        out.push('\n');
        manifest.push((layer, entries.len()));
    }
    manifest
}

fn question_block(question: &Question, out: &mut String) {
    let _ = writeln!(out, "QUESTION\n{}", question.text.trim());
    for (i, option) in question.options.iter().enumerate() {
        let _ = writeln!(out, "({}) {}", option_letter(i), option);
    }
    out.push('\n');
}

/// The question block exactly as it appears in reasoning and selection
/// prompts.
pub fn render_question_block(question: &Question) -> String {
    let mut out = String::new();
    question_block(question, &mut out);
    out
}

/// Flat reasoning prompt over every nonempty layer of `bundle`.
pub fn build_flat_prompt(bundle: &FeatureBundle, question: &Question) -> Result<Prompt, PromptError> {
    build_flat_prompt_for_layers(bundle, question, bundle.nonempty_layers())
}

/// Flat reasoning prompt over an explicit layer set; selected layers without
/// features render as an empty section.
pub fn build_flat_prompt_for_layers(
    bundle: &FeatureBundle,
    question: &Question,
    layers: LayerSet,
) -> Result<Prompt, PromptError> {
    question.validate()?;
    let mut text = String::new();
    metadata_block(bundle, &mut text);
    let feature_manifest = feature_sections(bundle, layers, &mut text);
    question_block(question, &mut text);
    text.push_str(ANSWER_INSTRUCTION);
    text.push('\n');
    Ok(Prompt {
        text,
        style: PromptStyle::Flat,
        included_layers: layers,
        feature_manifest,
    })
}

/// First caption stage: features plus a request for a descriptive paragraph.
pub fn build_caption_prompt(bundle: &FeatureBundle) -> Prompt {
    build_caption_prompt_for_layers(bundle, bundle.nonempty_layers())
}

pub fn build_caption_prompt_for_layers(bundle: &FeatureBundle, layers: LayerSet) -> Prompt {
    let mut text = String::new();
    metadata_block(bundle, &mut text);
    let feature_manifest = feature_sections(bundle, layers, &mut text);
    text.push_str(CAPTION_INSTRUCTION);
    text.push('\n');
    Prompt {
        text,
        style: PromptStyle::CaptionStage1,
        included_layers: layers,
        feature_manifest,
    }
}

/// Second caption stage: the generated caption, the question and the
/// answer instruction.
pub fn build_caption_reasoning_prompt(caption: &str, question: &Question) -> Result<Prompt, PromptError> {
    let caption = caption.trim();
    if caption.is_empty() {
        return Err(PromptError::EmptyCaption);
    }
    question.validate()?;
    let mut text = format!("CAPTION\n{caption}\n\n");
    question_block(question, &mut text);
    text.push_str(ANSWER_INSTRUCTION);
    text.push('\n');
    Ok(Prompt {
        text,
        style: PromptStyle::CaptionStage2,
        included_layers: LayerSet::empty(),
        feature_manifest: Vec::new(),
    })
}

fn layer_description(layer: Layer) -> &'static str {
    match layer {
        Layer::Events => "timestamped sound event tags",
        Layer::Transcript => "timestamped speech transcript segments",
        Layer::Emotion => "speech emotion label",
        Layer::Notes => "timestamped musical notes",
        Layer::Chords => "timestamped chord progression",
        Layer::MusicTags => "genre and timbre tags",
    }
}

/// Prompt asking which of the `offered` layers matter for the question.
/// Shows one summary line per layer, never the feature content.
pub fn build_agent_selection_prompt(
    bundle: &FeatureBundle,
    question: &Question,
    offered: LayerSet,
) -> Result<Prompt, PromptError> {
    question.validate()?;
    let mut text = String::new();
    metadata_block(bundle, &mut text);
    text.push_str("AVAILABLE FEATURE LAYERS\n");
    let mut feature_manifest = Vec::new();
    for layer in offered.iter() {
        let count = bundle.layer_len(layer);
        let noun = if count == 1 { "item" } else { "items" };
        let _ = writeln!(text, "{}: {count} {noun} ({})", layer.name(), layer_description(layer));
        feature_manifest.push((layer, count));
    }
    text.push('\n');
    question_block(question, &mut text);
    text.push_str(SELECTION_INSTRUCTION);
    text.push('\n');
    Ok(Prompt {
        text,
        style: PromptStyle::AgentSelection,
        included_layers: offered,
        feature_manifest,
    })
}

/// Kind of LLM call a prompt represents, recognized by its instruction.
pub fn classify_prompt(text: &str) -> Option<PromptStyle> {
    let last = text.trim_end().lines().last()?;
    match last {
        CAPTION_INSTRUCTION => Some(PromptStyle::CaptionStage1),
        SELECTION_INSTRUCTION => Some(PromptStyle::AgentSelection),
        ANSWER_INSTRUCTION if text.starts_with("CAPTION\n") => Some(PromptStyle::CaptionStage2),
        ANSWER_INSTRUCTION => Some(PromptStyle::Flat),
        _ => None,
    }
}

/// One feature line recovered from a rendered prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFeature {
    pub layer: Layer,
    pub start_s: f64,
    pub end_s: f64,
    pub content: String,
}

/// Reads back the feature lines of every layer section in a prompt.
pub fn parse_feature_sections(text: &str) -> Vec<RenderedFeature> {
    let mut current: Option<Layer> = None;
    let mut out = Vec::new();
    for line in text.lines() {
        if let Some(layer) = Layer::from_title(line) {
            current = Some(layer);
            continue;
        }
        if line.is_empty() {
            current = None;
            continue;
        }
        let Some(layer) = current else { continue };
        let Some(rest) = line.strip_prefix('[') else { continue };
        let Some((span, content)) = rest.split_once("] ") else { continue };
        let Some((start, end)) = span.split_once('–') else { continue };
        if let (Ok(start_s), Ok(end_s)) = (start.parse(), end.parse()) {
            out.push(RenderedFeature {
                layer,
                start_s,
                end_s,
                content: content.into(),
            });
        }
    }
    out
}
