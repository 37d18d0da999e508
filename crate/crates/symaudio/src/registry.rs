//! Extractor registry: native DSP extractors, sidecar processes and
//! precomputed feature files, merged into one bundle per clip.
//!
//! A sidecar is run as `<command> <wav-path>` and must print canonical
//! feature JSON (one layer is enough) on stdout and exit 0. Any failure of
//! one extractor leaves its layer empty and is recorded in provenance.
//! Results are cached as `<cache>/<clip_id>.features.json`; a cache entry is
//! reused only when its provenance names the same extractors and versions.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};
use symaudio_core::dsp::{
    compute_chroma_with, detect_activity_with, estimate_chords_with, track_notes_with, ActivityConfig,
    ChordConfig, ChromaConfig, NoteTrackerConfig, PcmClip,
};
use symaudio_core::{
    deserialize_bundle, deserialize_fragment, serialize_bundle, validate_bundle, ClipMetadata, CodecError,
    ExtractionStatus, FeatureBundle, Layer, ProvenanceEntry,
};

use crate::wav::{read_wav, write_wav, WavError};

/// Version stamped on native extractors; bumping the crate invalidates caches.
pub const NATIVE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractorKind {
    Native,
    Sidecar,
    Precomputed,
}

fn default_version() -> String {
    "0".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractorDescriptor {
    pub name: String,
    #[serde(default = "default_version")]
    pub version: String,
    pub layer: Layer,
    pub kind: ExtractorKind,
    /// Native: `chords`, `notes` or `activity`. Sidecar: a command line,
    /// split on whitespace. Precomputed: a path pattern where `{clip_id}`
    /// and `{clip_dir}` are substituted.
    pub invocation: String,
}

impl ExtractorDescriptor {
    pub fn native(invocation: &str) -> Self {
        let layer = native_layer(invocation).expect("known native extractor");
        ExtractorDescriptor {
            name: format!("native-{invocation}"),
            version: NATIVE_VERSION.into(),
            layer,
            kind: ExtractorKind::Native,
            invocation: invocation.into(),
        }
    }
}

fn native_layer(invocation: &str) -> Option<Layer> {
    match invocation {
        "chords" => Some(Layer::Chords),
        "notes" => Some(Layer::Notes),
        "activity" => Some(Layer::Events),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("extractor name {0:?} is registered twice")]
    DuplicateName(String),
    #[error("layer {0} has more than one extractor")]
    DuplicateLayer(Layer),
    #[error("unknown native extractor {0:?}")]
    UnknownNative(String),
    #[error("native extractor {name:?} produces {produces}, not {declared}")]
    LayerMismatch {
        name: String,
        produces: Layer,
        declared: Layer,
    },
    #[error("extractor {0:?} has an empty invocation")]
    EmptyInvocation(String),
}

/// An immutable set of extractors, at most one per layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registry {
    extractors: Vec<ExtractorDescriptor>,
}

impl Registry {
    pub fn new(extractors: Vec<ExtractorDescriptor>) -> Result<Self, RegistryError> {
        let mut names = BTreeSet::new();
        let mut layers = BTreeSet::new();
        for d in &extractors {
            if !names.insert(d.name.as_str()) {
                return Err(RegistryError::DuplicateName(d.name.clone()));
            }
            if !layers.insert(d.layer) {
                return Err(RegistryError::DuplicateLayer(d.layer));
            }
            if d.invocation.trim().is_empty() {
                return Err(RegistryError::EmptyInvocation(d.name.clone()));
            }
            if d.kind == ExtractorKind::Native {
                let produces =
                    native_layer(&d.invocation).ok_or_else(|| RegistryError::UnknownNative(d.invocation.clone()))?;
                if produces != d.layer {
                    return Err(RegistryError::LayerMismatch {
                        name: d.name.clone(),
                        produces,
                        declared: d.layer,
                    });
                }
            }
        }
        Ok(Registry { extractors })
    }

    /// Activity events, notes and chords from the built-in DSP.
    pub fn native() -> Self {
        Registry::new(["activity", "notes", "chords"].map(ExtractorDescriptor::native).to_vec())
            .expect("native registry is consistent")
    }

    pub fn extractors(&self) -> &[ExtractorDescriptor] {
        &self.extractors
    }

    pub fn is_empty(&self) -> bool {
        self.extractors.is_empty()
    }

    /// `name@version` of every extractor, sorted and comma-joined.
    pub fn fingerprint(&self) -> String {
        let mut parts: Vec<String> = self
            .extractors
            .iter()
            .map(|d| format!("{}@{}", d.name, d.version))
            .collect();
        parts.sort();
        parts.join(",")
    }

    /// Whether `bundle` was produced by exactly this registry with no failures.
    fn produced(&self, bundle: &FeatureBundle) -> bool {
        bundle.extractor_provenance.len() == self.extractors.len()
            && self.extractors.iter().all(|d| {
                bundle.extractor_provenance.get(&d.layer).is_some_and(|p| {
                    p.extractor == d.name && p.version == d.version && p.status == ExtractionStatus::Ok
                })
            })
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExtractOptions {
    pub cache_dir: Option<PathBuf>,
    pub chroma: ChromaConfig,
    pub chords: ChordConfig,
    pub notes: NoteTrackerConfig,
    pub activity: ActivityConfig,
}

/// Audio to extract from: a WAV file (clip id = file stem) or decoded PCM.
#[derive(Debug, Clone, Copy)]
pub enum ClipRef<'a> {
    Path(&'a Path),
    Pcm { clip_id: &'a str, clip: &'a PcmClip },
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("no extractors registered")]
    NoExtractors,
    #[error("clip {path} unreadable: {source}")]
    ClipUnreadable {
        path: PathBuf,
        #[source]
        source: WavError,
    },
    #[error("every extractor failed for clip {clip_id}: {}", errors.join("; "))]
    AllExtractorsFailed { clip_id: String, errors: Vec<String> },
    #[error("merged bundle failed validation: {0}")]
    InvalidBundle(String),
    #[error("cache IO failed: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub bundle: FeatureBundle,
    pub from_cache: bool,
}

pub fn cache_path(cache_dir: &Path, clip_id: &str) -> PathBuf {
    cache_dir.join(format!("{clip_id}.features.json"))
}

/// Runs every extractor of `registry` on one clip. See [`extract_all_traced`].
pub fn extract_all(
    clip: ClipRef<'_>,
    registry: &Registry,
    options: &ExtractOptions,
) -> Result<FeatureBundle, ExtractError> {
    extract_all_traced(clip, registry, options).map(|e| e.bundle)
}

/// Like [`extract_all`], also reporting whether the cache answered.
pub fn extract_all_traced(
    clip: ClipRef<'_>,
    registry: &Registry,
    options: &ExtractOptions,
) -> Result<Extraction, ExtractError> {
    if registry.is_empty() {
        return Err(ExtractError::NoExtractors);
    }
    let (clip_id, source_path) = match clip {
        ClipRef::Path(p) => (
            p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            Some(p.display().to_string()),
        ),
        ClipRef::Pcm { clip_id, .. } => (clip_id.to_string(), None),
    };

    let cache_file = options.cache_dir.as_deref().map(|d| cache_path(d, &clip_id));
    if let Some(bundle) = cache_file.as_deref().and_then(|p| read_cache(p, registry, &source_path)) {
        log::debug!("cache hit for {clip_id}");
        return Ok(Extraction { bundle, from_cache: true });
    }

    let loaded;
    let (pcm, wav_path) = match clip {
        ClipRef::Path(p) => {
            loaded = read_wav(p).map_err(|source| ExtractError::ClipUnreadable {
                path: p.to_path_buf(),
                source,
            })?;
            (&loaded, Some(p))
        }
        ClipRef::Pcm { clip, .. } => (clip, None),
    };
    let mut metadata = ClipMetadata::new(clip_id.clone(), pcm.duration_s());
    metadata.sample_rate_hz = pcm.sample_rate_hz();
    metadata.source_path = source_path;

    let mut runner = Runner {
        pcm,
        wav_path,
        temp_wav: None,
        clip_id: &clip_id,
        options,
    };
    let mut bundle = FeatureBundle::new(metadata);
    bundle.quantize_timestamps();
    let mut errors = Vec::new();
    for d in registry.extractors() {
        match runner.run(d).and_then(|part| checked_layer(part, &bundle.metadata, d.layer)) {
            Ok(mut part) => {
                bundle.take_layer_from(d.layer, &mut part);
                bundle
                    .extractor_provenance
                    .insert(d.layer, ProvenanceEntry::ok(&d.name, &d.version));
            }
            Err(e) => {
                log::warn!("extractor {} failed on {clip_id}: {e}", d.name);
                errors.push(format!("{}: {e}", d.name));
                bundle
                    .extractor_provenance
                    .insert(d.layer, ProvenanceEntry::failed(&d.name, &d.version, e));
            }
        }
    }
    if errors.len() == registry.extractors().len() {
        return Err(ExtractError::AllExtractorsFailed { clip_id, errors });
    }
    bundle.canonicalize();
    let report = validate_bundle(&bundle);
    if !report.is_valid() {
        return Err(ExtractError::InvalidBundle(report.to_string()));
    }
    if let (Some(path), true) = (cache_file, errors.is_empty()) {
        write_atomic(&path, &serialize_bundle(&bundle).map_err(|e| ExtractError::InvalidBundle(e.to_string()))?)?;
    }
    Ok(Extraction {
        bundle,
        from_cache: false,
    })
}

fn read_cache(path: &Path, registry: &Registry, source_path: &Option<String>) -> Option<FeatureBundle> {
    let text = fs::read_to_string(path).ok()?;
    match deserialize_bundle(&text) {
        Ok(b) if registry.produced(&b) && &b.metadata.source_path == source_path => Some(b),
        Ok(_) => {
            log::debug!("stale cache entry {}", path.display());
            None
        }
        Err(e) => {
            log::warn!("ignoring unreadable cache entry {}: {e}", path.display());
            None
        }
    }
}

/// Writes via a temporary file in the same directory and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Quantizes one extractor's output and checks it on its own, so a bad
/// layer is dropped instead of invalidating the whole bundle.
fn checked_layer(mut part: FeatureBundle, metadata: &ClipMetadata, layer: Layer) -> Result<FeatureBundle, String> {
    part.metadata = metadata.clone();
    part.retain_layers([layer].into_iter().collect());
    part.extractor_provenance.clear();
    part.quantize_timestamps();
    part.canonicalize();
    let report = validate_bundle(&part);
    let relevant: Vec<String> = report
        .violations
        .iter()
        .filter(|v| !v.code.starts_with("provenance."))
        .map(|v| v.code.to_string())
        .collect();
    if relevant.is_empty() {
        Ok(part)
    } else {
        Err(format!("invalid output: {}", relevant.join(", ")))
    }
}

struct Runner<'a> {
    pcm: &'a PcmClip,
    wav_path: Option<&'a Path>,
    temp_wav: Option<tempfile::TempPath>,
    clip_id: &'a str,
    options: &'a ExtractOptions,
}

impl Runner<'_> {
    fn run(&mut self, d: &ExtractorDescriptor) -> Result<FeatureBundle, String> {
        let mut part = FeatureBundle::new(ClipMetadata::new(self.clip_id, self.pcm.duration_s()));
        match d.kind {
            ExtractorKind::Native => self.native(&d.invocation, &mut part)?,
            ExtractorKind::Sidecar => {
                let wav = self.wav_path()?;
                let mut fragment = run_sidecar(&d.invocation, &wav)?.into_bundle(part.metadata.clone());
                part.take_layer_from(d.layer, &mut fragment);
            }
            ExtractorKind::Precomputed => {
                let path = self.precomputed_path(&d.invocation);
                let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                let fragment = deserialize_fragment(&text).map_err(|e| format!("{}: {e}", path.display()))?;
                let mut fragment = fragment.into_bundle(part.metadata.clone());
                part.take_layer_from(d.layer, &mut fragment);
            }
        }
        Ok(part)
    }

    fn native(&self, invocation: &str, part: &mut FeatureBundle) -> Result<(), String> {
        let o = self.options;
        match invocation {
            "chords" => {
                let chroma = compute_chroma_with(self.pcm, &o.chroma).map_err(|e| e.to_string())?;
                part.chords = estimate_chords_with(&chroma, &o.chords).map_err(|e| e.to_string())?;
            }
            "notes" => part.notes = track_notes_with(self.pcm, &o.notes).map_err(|e| e.to_string())?,
            "activity" => part.events = detect_activity_with(self.pcm, &o.activity),
            other => return Err(format!("unknown native extractor {other:?}")),
        }
        Ok(())
    }

    /// Path of a WAV file for sidecars, written once for in-memory clips.
    fn wav_path(&mut self) -> Result<PathBuf, String> {
        if let Some(p) = self.wav_path {
            return Ok(p.to_path_buf());
        }
        if self.temp_wav.is_none() {
            let file = tempfile::Builder::new()
                .suffix(".wav")
                .tempfile()
                .map_err(|e| e.to_string())?
                .into_temp_path();
            write_wav(&file, self.pcm.samples(), self.pcm.sample_rate_hz()).map_err(|e| e.to_string())?;
            self.temp_wav = Some(file);
        }
        Ok(self.temp_wav.as_ref().expect("just written").to_path_buf())
    }

    fn precomputed_path(&self, pattern: &str) -> PathBuf {
        let clip_dir = self
            .wav_path
            .and_then(Path::parent)
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| ".".into());
        PathBuf::from(pattern.replace("{clip_id}", self.clip_id).replace("{clip_dir}", &clip_dir))
    }
}

fn run_sidecar(command_line: &str, wav: &Path) -> Result<symaudio_core::codec::FeatureFragment, String> {
    let mut words = command_line.split_whitespace();
    let program = words.next().ok_or("empty sidecar command")?;
    let output = Command::new(program)
        .args(words)
        .arg(wav)
        .output()
        .map_err(|e| format!("cannot start {program}: {e}"))?;
    let stderr = String::from_utf8_lossy(&output.stderr);
    if !stderr.trim().is_empty() {
        log::debug!("{program} stderr: {}", stderr.trim());
    }
    if !output.status.success() {
        return Err(format!("{program} exited with {}: {}", output.status, stderr.trim()));
    }
    let stdout = String::from_utf8(output.stdout).map_err(|_| format!("{program} printed non-UTF-8 output"))?;
    deserialize_fragment(&stdout).map_err(|e| format!("{program} output: {e}"))
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Loads a complete canonical feature file.
pub fn ingest_precomputed(path: &Path) -> Result<FeatureBundle, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(deserialize_bundle(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc(name: &str, layer: Layer, kind: ExtractorKind, inv: &str) -> ExtractorDescriptor {
        ExtractorDescriptor {
            name: name.into(),
            version: "1".into(),
            layer,
            kind,
            invocation: inv.into(),
        }
    }

    #[test]
    fn registry_invariants() {
        let a = desc("a", Layer::Events, ExtractorKind::Precomputed, "x.json");
        assert_eq!(
            Registry::new(vec![a.clone(), a.clone()]),
            Err(RegistryError::DuplicateName("a".into()))
        );
        let b = desc("b", Layer::Events, ExtractorKind::Precomputed, "y.json");
        assert_eq!(
            Registry::new(vec![a.clone(), b]),
            Err(RegistryError::DuplicateLayer(Layer::Events))
        );
        let bad = desc("n", Layer::Events, ExtractorKind::Native, "chords");
        assert!(matches!(Registry::new(vec![bad]), Err(RegistryError::LayerMismatch { .. })));
        let unknown = desc("n", Layer::Events, ExtractorKind::Native, "beats");
        assert_eq!(
            Registry::new(vec![unknown]),
            Err(RegistryError::UnknownNative("beats".into()))
        );
    }

    #[test]
    fn fingerprint_is_order_free() {
        let a = desc("a", Layer::Events, ExtractorKind::Precomputed, "x");
        let b = desc("b", Layer::Notes, ExtractorKind::Precomputed, "y");
        let r1 = Registry::new(vec![a.clone(), b.clone()]).unwrap();
        let r2 = Registry::new(vec![b, a]).unwrap();
        assert_eq!(r1.fingerprint(), r2.fingerprint());
        assert_eq!(r1.fingerprint(), "a@1,b@1");
    }

    #[test]
    fn empty_registry_is_rejected() {
        let clip = PcmClip::new(vec![0.0; 800], 8000).unwrap();
        let r = Registry::new(vec![]).unwrap();
        let err = extract_all(ClipRef::Pcm { clip_id: "c", clip: &clip }, &r, &ExtractOptions::default());
        assert!(matches!(err, Err(ExtractError::NoExtractors)));
    }
}
