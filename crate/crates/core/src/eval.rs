//! Benchmark samples and per-sample evaluation records.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::LayerSet;
use crate::prompt::{Category, Question};
use crate::selection::SelectionTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Mmau,
    Mmar,
    Omnibench,
    Custom,
}

impl Benchmark {
    pub fn as_str(self) -> &'static str {
        match self {
            Benchmark::Mmau => "mmau",
            Benchmark::Mmar => "mmar",
            Benchmark::Omnibench => "omnibench",
            Benchmark::Custom => "custom",
        }
    }
}

impl FromStr for Benchmark {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mmau" => Ok(Benchmark::Mmau),
            "mmar" => Ok(Benchmark::Mmar),
            "omnibench" => Ok(Benchmark::Omnibench),
            "custom" => Ok(Benchmark::Custom),
            other => Err(alloc::format!("unknown benchmark format {other:?}")),
        }
    }
}

/// One multiple-choice question about one clip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaSample {
    pub sample_id: String,
    /// Audio file or precomputed feature file.
    pub clip_ref: String,
    pub question: Question,
    pub gold_index: usize,
    pub benchmark: Benchmark,
    /// Kept from tri-modal records; never rendered into prompts.
    #[serde(default)]
    pub image_ref: Option<String>,
}

/// How a sample is turned into a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PipelineStyle {
    #[serde(rename = "flat")]
    Flat,
    #[serde(rename = "flat+agent")]
    FlatAgent,
    #[serde(rename = "caption")]
    Caption,
    #[serde(rename = "caption+agent")]
    CaptionAgent,
}

impl PipelineStyle {
    pub const ALL: [PipelineStyle; 4] = [
        PipelineStyle::Flat,
        PipelineStyle::FlatAgent,
        PipelineStyle::Caption,
        PipelineStyle::CaptionAgent,
    ];

    pub fn uses_agent(self) -> bool {
        matches!(self, PipelineStyle::FlatAgent | PipelineStyle::CaptionAgent)
    }

    pub fn uses_caption(self) -> bool {
        matches!(self, PipelineStyle::Caption | PipelineStyle::CaptionAgent)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PipelineStyle::Flat => "flat",
            PipelineStyle::FlatAgent => "flat+agent",
            PipelineStyle::Caption => "caption",
            PipelineStyle::CaptionAgent => "caption+agent",
        }
    }
}

impl fmt::Display for PipelineStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PipelineStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PipelineStyle::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| alloc::format!("unknown prompt style {s:?}"))
    }
}

/// Tag on results whose source record carried an image that was ignored.
pub const AUDIO_ONLY_DEGRADED: &str = "audio_only_degraded";

/// Outcome of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub sample_id: String,
    pub category: Category,
    pub gold_index: usize,
    pub predicted_index: Option<usize>,
    pub correct: bool,
    pub parse_error: bool,
    pub raw_output: String,
    pub prompt_style: PipelineStyle,
    pub included_layers: LayerSet,
    #[serde(default)]
    pub selection_trace: Option<SelectionTrace>,
    pub timing_ms: u64,
    /// Transport or extraction failure that prevented an answer.
    #[serde(default)]
    pub error: Option<String>,
    #[serde(default)]
    pub tags: Vec<String>,
}

impl EvalResult {
    /// Record with no prediction yet; fill it via [`EvalResult::answered`],
    /// [`EvalResult::unparseable`] or [`EvalResult::failed`].
    pub fn pending(sample: &QaSample, style: PipelineStyle) -> Self {
        let mut tags = Vec::new();
        if sample.image_ref.is_some() {
            tags.push(AUDIO_ONLY_DEGRADED.into());
        }
        EvalResult {
            sample_id: sample.sample_id.clone(),
            category: sample.question.category,
            gold_index: sample.gold_index,
            predicted_index: None,
            correct: false,
            parse_error: false,
            raw_output: String::new(),
            prompt_style: style,
            included_layers: LayerSet::empty(),
            selection_trace: None,
            timing_ms: 0,
            error: None,
            tags,
        }
    }

    pub fn answered(mut self, raw: String, index: usize) -> Self {
        self.raw_output = raw;
        self.predicted_index = Some(index);
        self.correct = index == self.gold_index;
        self.parse_error = false;
        self
    }

    pub fn unparseable(mut self, raw: String) -> Self {
        self.raw_output = raw;
        self.predicted_index = None;
        self.correct = false;
        self.parse_error = true;
        self
    }

    pub fn failed(mut self, error: String) -> Self {
        self.predicted_index = None;
        self.correct = false;
        self.error = Some(error);
        self
    }

    /// `correct` agrees with the prediction and parse errors carry none.
    pub fn is_consistent(&self) -> bool {
        self.correct == (self.predicted_index == Some(self.gold_index))
            && (!self.parse_error || self.predicted_index.is_none())
    }
}
