mod common;

use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};

use common::{sines, triad_freqs, write_clip};
use symaudio::registry::{
    extract_all, extract_all_traced, ingest_precomputed, ClipRef, ExtractError, ExtractOptions, ExtractorDescriptor,
    ExtractorKind, IngestError, Registry,
};
use symaudio_core::model::ExtractionStatus;
use symaudio_core::{serialize_bundle, CodecError, Layer};

fn script(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path
}

fn sidecar(name: &str, version: &str, layer: Layer, command: &Path) -> ExtractorDescriptor {
    ExtractorDescriptor {
        name: name.into(),
        version: version.into(),
        layer,
        kind: ExtractorKind::Sidecar,
        invocation: command.display().to_string(),
    }
}

/// Sidecar printing one transcript segment and counting its runs.
fn counting_transcriber(dir: &Path) -> PathBuf {
    let counter = dir.join("runs.txt");
    script(
        dir,
        "transcribe.sh",
        &format!(
            "echo run >> '{}'\ncat <<'JSON'\n{{\"schema_version\":1,\"transcript\":[{{\"text\":\"hello\",\"start_s\":\"0.100\",\"end_s\":\"0.9004\"}}]}}\nJSON",
            counter.display()
        ),
    )
}

fn runs(dir: &Path) -> usize {
    std::fs::read_to_string(dir.join("runs.txt")).map_or(0, |t| t.lines().count())
}

fn c_major(dir: &Path) -> PathBuf {
    write_clip(dir, "cmaj", &sines(&triad_freqs(60.0, false), 2.0, 22_050), 22_050)
}

#[test]
fn native_extractors_find_the_triad() {
    let tmp = tempfile::tempdir().unwrap();
    let clip = c_major(tmp.path());
    let bundle = extract_all(ClipRef::Path(&clip), &Registry::native(), &ExtractOptions::default()).unwrap();
    let chords: Vec<String> = bundle.chords.iter().map(|c| c.symbol.to_string()).collect();
    assert_eq!(chords, ["C:maj"]);
    assert_eq!(bundle.metadata.clip_id, "cmaj");
    assert_eq!(bundle.metadata.sample_rate_hz, 22_050);
    assert_eq!(bundle.events.len(), 1, "{:?}", bundle.events);
    for layer in [Layer::Events, Layer::Notes, Layer::Chords] {
        assert_eq!(bundle.extractor_provenance[&layer].status, ExtractionStatus::Ok);
    }
}

#[test]
fn precomputed_features_pass_through_verbatim() {
    let tmp = tempfile::tempdir().unwrap();
    let clip = c_major(tmp.path());
    let fragment = r#"{"schema_version":1,"events":[
        {"label":"Church bell","start_s":"0.250","end_s":"1.500","confidence":0.73},
        {"label":"Wind","start_s":"0.000","end_s":"2.000","confidence":0.41}]}"#;
    std::fs::write(tmp.path().join("cmaj.events.json"), fragment).unwrap();
    let registry = Registry::new(vec![
        ExtractorDescriptor {
            name: "panns".into(),
            version: "cnn14".into(),
            layer: Layer::Events,
            kind: ExtractorKind::Precomputed,
            invocation: "{clip_dir}/{clip_id}.events.json".into(),
        },
        ExtractorDescriptor::native("chords"),
    ])
    .unwrap();
    let bundle = extract_all(ClipRef::Path(&clip), &registry, &ExtractOptions::default()).unwrap();
    let events: Vec<_> = bundle.events.iter().map(|e| (e.label.as_str(), e.start_s, e.end_s, e.confidence)).collect();
    assert_eq!(events, [("Wind", 0.0, 2.0, 0.41), ("Church bell", 0.25, 1.5, 0.73)]);
    assert_eq!(bundle.extractor_provenance[&Layer::Events].extractor, "panns");
}

#[test]
fn failing_sidecar_leaves_its_layer_empty() {
    let tmp = tempfile::tempdir().unwrap();
    let clip = c_major(tmp.path());
    let broken = script(tmp.path(), "broken.sh", "echo 'model weights missing' >&2\nexit 3");
    let registry = Registry::new(vec![
        sidecar("whisper", "1", Layer::Transcript, &broken),
        ExtractorDescriptor::native("chords"),
    ])
    .unwrap();
    let bundle = extract_all(ClipRef::Path(&clip), &registry, &ExtractOptions::default()).unwrap();
    assert!(bundle.transcript.is_empty());
    let entry = &bundle.extractor_provenance[&Layer::Transcript];
    assert_eq!(entry.status, ExtractionStatus::Failed);
    assert!(entry.error.as_deref().unwrap().contains("model weights missing"), "{entry:?}");
    assert_eq!(bundle.chords.len(), 1);
}

#[test]
fn sidecar_output_is_quantized_and_merged() {
    let tmp = tempfile::tempdir().unwrap();
    let clip = c_major(tmp.path());
    let registry = Registry::new(vec![sidecar("whisper", "1", Layer::Transcript, &counting_transcriber(tmp.path()))]).unwrap();
    let bundle = extract_all(ClipRef::Path(&clip), &registry, &ExtractOptions::default()).unwrap();
    assert_eq!(bundle.transcript.len(), 1);
    assert_eq!(bundle.transcript[0].end_s, 0.9);
    assert_eq!(runs(tmp.path()), 1);
}

#[test]
fn cache_is_reused_until_an_extractor_changes() {
    let tmp = tempfile::tempdir().unwrap();
    let clip = c_major(tmp.path());
    let cmd = counting_transcriber(tmp.path());
    let options = ExtractOptions {
        cache_dir: Some(tmp.path().join("cache")),
        ..ExtractOptions::default()
    };
    let registry = |version: &str| {
        Registry::new(vec![
            sidecar("whisper", version, Layer::Transcript, &cmd),
            ExtractorDescriptor::native("chords"),
        ])
        .unwrap()
    };
    let first = extract_all_traced(ClipRef::Path(&clip), &registry("1"), &options).unwrap();
    assert!(!first.from_cache);
    let cached = std::fs::read(tmp.path().join("cache/cmaj.features.json")).unwrap();
    assert_eq!(cached, serialize_bundle(&first.bundle).unwrap().into_bytes());

    let second = extract_all_traced(ClipRef::Path(&clip), &registry("1"), &options).unwrap();
    assert!(second.from_cache);
    assert_eq!(serialize_bundle(&second.bundle).unwrap(), serialize_bundle(&first.bundle).unwrap());
    assert_eq!(runs(tmp.path()), 1);

    let bumped = extract_all_traced(ClipRef::Path(&clip), &registry("2"), &options).unwrap();
    assert!(!bumped.from_cache);
    assert_eq!(runs(tmp.path()), 2);
    assert_eq!(bumped.bundle.extractor_provenance[&Layer::Transcript].version, "2");
}

#[test]
fn failed_runs_are_not_cached() {
    let tmp = tempfile::tempdir().unwrap();
    let clip = c_major(tmp.path());
    let broken = script(tmp.path(), "broken.sh", "exit 1");
    let registry = Registry::new(vec![
        sidecar("whisper", "1", Layer::Transcript, &broken),
        ExtractorDescriptor::native("chords"),
    ])
    .unwrap();
    let options = ExtractOptions {
        cache_dir: Some(tmp.path().join("cache")),
        ..ExtractOptions::default()
    };
    extract_all(ClipRef::Path(&clip), &registry, &options).unwrap();
    assert!(!tmp.path().join("cache/cmaj.features.json").exists());
}

#[test]
fn unreadable_clips_and_total_failure_are_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let garbage = tmp.path().join("noise.wav");
    std::fs::write(&garbage, b"definitely not RIFF").unwrap();
    let err = extract_all(ClipRef::Path(&garbage), &Registry::native(), &ExtractOptions::default()).unwrap_err();
    assert!(matches!(err, ExtractError::ClipUnreadable { .. }), "{err}");

    let clip = c_major(tmp.path());
    let broken = script(tmp.path(), "broken.sh", "exit 1");
    let registry = Registry::new(vec![sidecar("whisper", "1", Layer::Transcript, &broken)]).unwrap();
    match extract_all(ClipRef::Path(&clip), &registry, &ExtractOptions::default()) {
        Err(ExtractError::AllExtractorsFailed { clip_id, errors }) => {
            assert_eq!(clip_id, "cmaj");
            assert_eq!(errors.len(), 1);
        }
        other => panic!("expected total failure, got {other:?}"),
    }
    let empty = Registry::new(Vec::new()).unwrap();
    assert!(matches!(
        extract_all(ClipRef::Path(&clip), &empty, &ExtractOptions::default()),
        Err(ExtractError::NoExtractors)
    ));
}

#[test]
fn ingest_rejects_bad_documents() {
    let tmp = tempfile::tempdir().unwrap();
    let clip = c_major(tmp.path());
    let bundle = extract_all(ClipRef::Path(&clip), &Registry::native(), &ExtractOptions::default()).unwrap();
    let text = serialize_bundle(&bundle).unwrap();

    let good = tmp.path().join("good.json");
    std::fs::write(&good, &text).unwrap();
    assert_eq!(ingest_precomputed(&good).unwrap(), bundle);

    let v2 = tmp.path().join("v2.json");
    std::fs::write(&v2, text.replace("\"schema_version\":1", "\"schema_version\":2")).unwrap();
    assert!(matches!(
        ingest_precomputed(&v2),
        Err(IngestError::Codec(CodecError::SchemaVersionMismatch { found: 2 }))
    ));

    let cut = tmp.path().join("cut.json");
    std::fs::write(&cut, &text[..text.len() - 10]).unwrap();
    assert!(matches!(ingest_precomputed(&cut), Err(IngestError::Codec(CodecError::Parse(_)))));
    assert!(matches!(ingest_precomputed(&tmp.path().join("absent.json")), Err(IngestError::Io { .. })));
}
