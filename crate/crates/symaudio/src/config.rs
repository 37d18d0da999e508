//! TOML run configuration.
//!
//! ```toml
//! prompt_style = "flat"          # flat or caption
//! agent = false                  # agent layer selection before prompting
//! workers = 4
//! cache_dir = ".cache/features"
//! output_dir = "runs/latest"
//!
//! [endpoint]
//! base_url = "https://api.example.com/v1"
//! model_id = "some-model"
//! api_key_env = "SYMAUDIO_API_KEY"  # read when api_key is absent
//! api_key = "${MY_KEY}"          # the only field with ${VAR} interpolation
//! max_concurrent = 4
//! requests_per_minute = 60
//!
//! [routing]
//! music_threshold = 0.5
//!
//! [dsp.chords]
//! p_stay = 0.9
//!
//! [[extractors]]
//! name = "whisper"
//! version = "1"
//! layer = "transcript"
//! kind = "sidecar"
//! invocation = "sidecar-transcript"
//! ```
//!
//! Every key is optional. With no `[[extractors]]` the native DSP
//! extractors are used.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use symaudio_core::dsp::{ActivityConfig, ChordConfig, ChromaConfig, NoteTrackerConfig};
use symaudio_core::eval::PipelineStyle;
use symaudio_core::routing::RoutingConfigError;
use symaudio_core::RoutingConfig;

use crate::bench::{EvalOptions, FeatureSource, PipelineConfig};
use crate::llm::EndpointConfig;
use crate::registry::{ExtractOptions, ExtractorDescriptor, Registry, RegistryError};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DspConfig {
    pub chroma: ChromaConfig,
    pub chords: ChordConfig,
    pub notes: NoteTrackerConfig,
    pub activity: ActivityConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub answer_max_tokens: u32,
    pub caption_max_tokens: u32,
    pub selection_max_tokens: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        GenerationConfig {
            answer_max_tokens: p.answer_max_tokens,
            caption_max_tokens: p.caption_max_tokens,
            selection_max_tokens: p.selection_max_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub prompt_style: String,
    pub agent: bool,
    pub workers: usize,
    pub cache_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Directory of `<clip stem>.features.json` files tried before extraction.
    pub features_dir: Option<PathBuf>,
    pub endpoint: EndpointConfig,
    pub generation: GenerationConfig,
    pub routing: RoutingConfig,
    pub dsp: DspConfig,
    pub extractors: Vec<ExtractorDescriptor>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            prompt_style: "flat".into(),
            agent: false,
            workers: 4,
            cache_dir: None,
            output_dir: PathBuf::from("runs/latest"),
            features_dir: None,
            endpoint: EndpointConfig::default(),
            generation: GenerationConfig::default(),
            routing: RoutingConfig::default(),
            dsp: DspConfig::default(),
            extractors: Vec::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("environment variable {0} referenced by endpoint.api_key is not set")]
    MissingEnv(String),
    #[error("unterminated ${{...}} in endpoint.api_key")]
    BadInterpolation,
    #[error("unknown prompt style {0:?}; expected flat or caption, optionally with +agent")]
    BadStyle(String),
    #[error("workers must be at least 1")]
    NoWorkers,
    #[error(transparent)]
    Routing(#[from] RoutingConfigError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

/// Expands `${VAR}` references from `lookup`.
pub fn interpolate(text: &str, lookup: impl Fn(&str) -> Option<String>) -> Result<String, ConfigError> {
    let mut out = String::new();
    let mut rest = text;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find('}').ok_or(ConfigError::BadInterpolation)?;
        let name = &after[..end];
        out.push_str(&lookup(name).ok_or_else(|| ConfigError::MissingEnv(name.into()))?);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, |name| std::env::var(name).ok())
    }

    pub fn from_toml(text: &str, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut config: RunConfig = toml::from_str(text)?;
        if let Some(key) = &config.endpoint.api_key {
            config.endpoint.api_key = Some(interpolate(key, env)?);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.style()?;
        self.routing.validate()?;
        self.registry()?;
        if self.workers == 0 {
            return Err(ConfigError::NoWorkers);
        }
        Ok(())
    }

    /// `prompt_style` combined with the `agent` switch.
    pub fn style(&self) -> Result<PipelineStyle, ConfigError> {
        let style: PipelineStyle = self
            .prompt_style
            .parse()
            .map_err(|_| ConfigError::BadStyle(self.prompt_style.clone()))?;
        Ok(match (style, self.agent) {
            (PipelineStyle::Flat, true) => PipelineStyle::FlatAgent,
            (PipelineStyle::Caption, true) => PipelineStyle::CaptionAgent,
            (s, _) => s,
        })
    }

    pub fn registry(&self) -> Result<Registry, RegistryError> {
        if self.extractors.is_empty() {
            Ok(Registry::native())
        } else {
            Registry::new(self.extractors.clone())
        }
    }

    pub fn extract_options(&self) -> ExtractOptions {
        ExtractOptions {
            cache_dir: self.cache_dir.clone(),
            chroma: self.dsp.chroma.clone(),
            chords: self.dsp.chords.clone(),
            notes: self.dsp.notes.clone(),
            activity: self.dsp.activity.clone(),
        }
    }

    pub fn pipeline(&self) -> Result<PipelineConfig, ConfigError> {
        Ok(PipelineConfig {
            style: self.style()?,
            routing: self.routing.clone(),
            model_id: self.endpoint.model_id.clone(),
            answer_max_tokens: self.generation.answer_max_tokens,
            caption_max_tokens: self.generation.caption_max_tokens,
            selection_max_tokens: self.generation.selection_max_tokens,
        })
    }

    pub fn eval_options(&self) -> Result<EvalOptions, ConfigError> {
        Ok(EvalOptions {
            pipeline: self.pipeline()?,
            source: FeatureSource {
                registry: Some(self.registry()?),
                extract: self.extract_options(),
                features_dir: self.features_dir.clone(),
            },
            workers: self.workers,
            out_dir: self.output_dir.clone(),
            cancel: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(name: &str) -> Option<String> {
        (name == "KEY").then(|| "secret".into())
    }

    #[test]
    fn empty_config_is_default() {
        let c = RunConfig::from_toml("", env).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.style().unwrap(), PipelineStyle::Flat);
        assert_eq!(c.registry().unwrap(), Registry::native());
    }

    #[test]
    fn credential_interpolation_only_in_api_key() {
        let c = RunConfig::from_toml(
            "output_dir = \"${KEY}\"\n[endpoint]\napi_key = \"Bearer-${KEY}\"\n",
            env,
        )
        .unwrap();
        assert_eq!(c.endpoint.api_key.as_deref(), Some("Bearer-secret"));
        assert_eq!(c.output_dir, PathBuf::from("${KEY}"));
        assert!(matches!(
            RunConfig::from_toml("[endpoint]\napi_key = \"${NOPE}\"\n", env),
            Err(ConfigError::MissingEnv(v)) if v == "NOPE"
        ));
        assert!(matches!(
            RunConfig::from_toml("[endpoint]\napi_key = \"${KEY\"\n", env),
            Err(ConfigError::BadInterpolation)
        ));
    }

    #[test]
    fn style_and_agent_combine() {
        let c = RunConfig::from_toml("prompt_style = \"caption\"\nagent = true\n", env).unwrap();
        assert_eq!(c.style().unwrap(), PipelineStyle::CaptionAgent);
        assert!(matches!(
            RunConfig::from_toml("prompt_style = \"poem\"\n", env),
            Err(ConfigError::BadStyle(_))
        ));
    }

    #[test]
    fn nested_sections_parse() {
        let text = r#"
            workers = 2
            [routing]
            music_threshold = 0.7
            [dsp.chords]
            p_stay = 0.8
            [[extractors]]
            name = "tags"
            layer = "events"
            kind = "precomputed"
            invocation = "feats/{clip_id}.events.json"
        "#;
        let c = RunConfig::from_toml(text, env).unwrap();
        assert_eq!(c.routing.music_threshold, 0.7);
        assert_eq!(c.dsp.chords.p_stay, 0.8);
        assert_eq!(c.registry().unwrap().extractors().len(), 1);
        assert!(matches!(
            RunConfig::from_toml("[routing]\nspeech_threshold = 2.0\n", env),
            Err(ConfigError::Routing(_))
        ));
        assert!(matches!(RunConfig::from_toml("colour = 1\n", env), Err(ConfigError::Parse(_))));
    }
}
