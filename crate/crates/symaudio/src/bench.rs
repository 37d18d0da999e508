//! Benchmark loading, the per-sample pipeline, resumable batch evaluation
//! and report files.
//!
//! Field mappings of the benchmark adapters (first key present wins):
//!
//! | format    | id              | clip                   | options             | answer          | category     | image        |
//! |-----------|-----------------|------------------------|---------------------|-----------------|--------------|--------------|
//! | mmau      | `id`            | `audio_id`, `audio_path` | `choices`         | `answer`        | `task`       |              |
//! | mmar      | `id`            | `audio_path`, `audio_id` | `choices`         | `answer`        | `modality`   |              |
//! | omnibench | `index`, `id`   | `audio_path`           | `options`           | `answer`        | `audio type` | `image_path` |
//! | custom    | `sample_id`     | `clip_ref`             | `options`           | `answer` or `gold_index` | `category` | `image_ref` |
//!
//! Every format reads the question from `question`. Answers given as text
//! must equal exactly one option.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde_json::Value;
use symaudio_core::analysis::{analyze_errors, ErrorReport};
use symaudio_core::answer::parse_answer;
use symaudio_core::eval::{Benchmark, EvalResult, PipelineStyle, QaSample};
use symaudio_core::prompt::{
    build_caption_prompt_for_layers, build_caption_reasoning_prompt, build_flat_prompt_for_layers, Category,
    Prompt, Question,
};
use symaudio_core::score::{render_markdown, score, ScoreError, ScoreReport};
use symaudio_core::selection::{select_features, SelectError};
use symaudio_core::{route_features, serialize_bundle, FeatureBundle, RoutingConfig};

use crate::llm::{LlmClient, LlmRequest};
use crate::registry::{extract_all, ingest_precomputed, write_atomic, ClipRef, ExtractOptions, Registry};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("record {record}: {message}")]
    ParseError { record: usize, message: String },
    #[error("sample {sample_id}: answer {answer:?} matches {matches} options")]
    UnresolvableGold {
        sample_id: String,
        answer: String,
        matches: usize,
    },
    #[error("unknown benchmark format {0:?}")]
    UnknownFormat(String),
}

struct FieldMap {
    id: &'static [&'static str],
    clip: &'static [&'static str],
    options: &'static [&'static str],
    category: &'static [&'static str],
    image: &'static [&'static str],
}

fn field_map(format: Benchmark) -> FieldMap {
    match format {
        Benchmark::Mmau => FieldMap {
            id: &["id"],
            clip: &["audio_id", "audio_path"],
            options: &["choices"],
            category: &["task"],
            image: &[],
        },
        Benchmark::Mmar => FieldMap {
            id: &["id"],
            clip: &["audio_path", "audio_id"],
            options: &["choices"],
            category: &["modality"],
            image: &[],
        },
        Benchmark::Omnibench => FieldMap {
            id: &["index", "id"],
            clip: &["audio_path"],
            options: &["options"],
            category: &["audio type"],
            image: &["image_path"],
        },
        Benchmark::Custom => FieldMap {
            id: &["sample_id"],
            clip: &["clip_ref"],
            options: &["options"],
            category: &["category"],
            image: &["image_ref"],
        },
    }
}

/// Maps a benchmark's task or modality label onto the four categories.
/// Labels naming several modalities, or containing "mix", are mixed.
pub fn normalize_category(raw: &str) -> Option<Category> {
    let lower = raw.to_lowercase();
    if lower.contains("mix") {
        return Some(Category::Mixed);
    }
    let found: Vec<Category> = [
        ("sound", Category::Sound),
        ("music", Category::Music),
        ("speech", Category::Speech),
    ]
    .into_iter()
    .filter(|(key, _)| lower.contains(key))
    .map(|(_, c)| c)
    .collect();
    match found.as_slice() {
        [] => None,
        [one] => Some(*one),
        _ => Some(Category::Mixed),
    }
}

/// Index of the single option equal to `answer`.
pub fn resolve_gold(sample_id: &str, answer: &str, options: &[String]) -> Result<usize, LoadError> {
    let matches: Vec<usize> = options
        .iter()
        .enumerate()
        .filter(|(_, o)| o.trim() == answer.trim())
        .map(|(i, _)| i)
        .collect();
    match matches.as_slice() {
        [i] => Ok(*i),
        _ => Err(LoadError::UnresolvableGold {
            sample_id: sample_id.into(),
            answer: answer.into(),
            matches: matches.len(),
        }),
    }
}

fn records(text: &str) -> Result<Vec<Value>, LoadError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).map_err(|e| LoadError::ParseError {
            record: 0,
            message: e.to_string(),
        });
    }
    trimmed
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| LoadError::ParseError {
                record: i,
                message: e.to_string(),
            })
        })
        .collect()
}

fn first<'a>(record: &'a Value, keys: &[&str]) -> Option<&'a Value> {
    keys.iter().find_map(|k| record.get(*k).filter(|v| !v.is_null()))
}

fn scalar_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Parses a benchmark file (a JSON array or JSON lines) with the adapter
/// for `format`. Relative clip paths are resolved against the file's
/// directory.
pub fn load_benchmark(path: &Path, format: &str) -> Result<Vec<QaSample>, LoadError> {
    let benchmark: Benchmark = format.parse().map_err(|_| LoadError::UnknownFormat(format.into()))?;
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    let fields = field_map(benchmark);
    let mut samples = Vec::new();
    for (i, record) in records(&text)?.iter().enumerate() {
        let err = |message: String| LoadError::ParseError { record: i, message };
        let sample_id = first(record, fields.id)
            .and_then(scalar_string)
            .unwrap_or_else(|| format!("{}-{i}", benchmark.as_str()));
        let question = first(record, &["question"])
            .and_then(Value::as_str)
            .ok_or_else(|| err("missing question".into()))?;
        let options: Vec<String> = first(record, fields.options)
            .and_then(Value::as_array)
            .ok_or_else(|| err("missing options".into()))?
            .iter()
            .map(|o| scalar_string(o).ok_or_else(|| err("options must be strings".into())))
            .collect::<Result<_, _>>()?;
        let clip = first(record, fields.clip)
            .and_then(Value::as_str)
            .ok_or_else(|| err("missing clip path".into()))?;
        let category_raw = first(record, fields.category)
            .and_then(Value::as_str)
            .ok_or_else(|| err("missing category".into()))?;
        let category =
            normalize_category(category_raw).ok_or_else(|| err(format!("unknown category {category_raw:?}")))?;
        let question = Question {
            text: question.into(),
            options,
            category,
        };
        let gold_index = match (record.get("gold_index").and_then(Value::as_u64), record.get("answer")) {
            (Some(g), _) if benchmark == Benchmark::Custom => g as usize,
            (_, Some(answer)) => {
                let answer = scalar_string(answer).ok_or_else(|| err("answer must be text".into()))?;
                resolve_gold(&sample_id, &answer, &question.options)?
            }
            _ => return Err(err("missing answer".into())),
        };
        question.validate().map_err(|e| err(e.to_string()))?;
        if gold_index >= question.options.len() {
            return Err(err(format!("gold index {gold_index} out of range")));
        }
        let image_ref = first(record, fields.image).and_then(Value::as_str).map(String::from);
        samples.push(QaSample {
            sample_id,
            clip_ref: base.join(clip).display().to_string(),
            question,
            gold_index,
            benchmark,
            image_ref,
        });
    }
    Ok(samples)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub style: PipelineStyle,
    pub routing: RoutingConfig,
    pub model_id: String,
    pub answer_max_tokens: u32,
    pub caption_max_tokens: u32,
    pub selection_max_tokens: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            style: PipelineStyle::Flat,
            routing: RoutingConfig::default(),
            model_id: "default".into(),
            answer_max_tokens: 32,
            caption_max_tokens: 512,
            selection_max_tokens: 64,
        }
    }
}

fn ask(client: &dyn LlmClient, model: &str, prompt: &Prompt, max_tokens: u32) -> Result<String, String> {
    client
        .complete(&LlmRequest::user(model, &prompt.text, max_tokens))
        .map(|r| r.text)
        .map_err(|e| e.to_string())
}

/// Runs one question through routing or agent selection, the configured
/// prompt style and answer parsing. Failures end up inside the result.
pub fn run_sample(
    sample: &QaSample,
    bundle: &FeatureBundle,
    config: &PipelineConfig,
    client: &dyn LlmClient,
) -> EvalResult {
    let started = Instant::now();
    let mut result = EvalResult::pending(sample, config.style);
    result = answer_sample(sample, bundle, config, client, result);
    result.timing_ms = started.elapsed().as_millis() as u64;
    result
}

fn answer_sample(
    sample: &QaSample,
    bundle: &FeatureBundle,
    config: &PipelineConfig,
    client: &dyn LlmClient,
    mut result: EvalResult,
) -> EvalResult {
    let model = config.model_id.as_str();
    let question = &sample.question;
    let (bundle, included) = if config.style.uses_agent() {
        let selection = select_features(&sample.sample_id, question, bundle, &config.routing, |p| {
            ask(client, model, p, config.selection_max_tokens)
        });
        match selection {
            Ok(sel) => {
                result.selection_trace = Some(sel.trace);
                (sel.bundle, sel.included)
            }
            Err(SelectError::Prompt(e)) => return result.failed(e.to_string()),
            Err(SelectError::Agent(e)) => return result.failed(e),
        }
    } else {
        let routed = route_features(bundle, &config.routing);
        let included = routed.nonempty_layers();
        (routed, included)
    };
    result.included_layers = included;

    let prompt = if config.style.uses_caption() {
        let caption_prompt = build_caption_prompt_for_layers(&bundle, included);
        let caption = match ask(client, model, &caption_prompt, config.caption_max_tokens) {
            Ok(c) => c,
            Err(e) => return result.failed(e),
        };
        build_caption_reasoning_prompt(&caption, question)
    } else {
        build_flat_prompt_for_layers(&bundle, question, included)
    };
    let prompt = match prompt {
        Ok(p) => p,
        Err(e) => return result.failed(e.to_string()),
    };
    match ask(client, model, &prompt, config.answer_max_tokens) {
        Ok(raw) => match parse_answer(&raw, &question.options) {
            Ok(index) => result.answered(raw, index),
            Err(_) => result.unparseable(raw),
        },
        Err(e) => result.failed(e),
    }
}

/// Where bundles come from. A clip reference ending in `.json` is read as a
/// canonical feature file; otherwise `features_dir/<stem>.features.json`
/// is tried before running the registry on the audio.
#[derive(Debug, Clone, Default)]
pub struct FeatureSource {
    pub registry: Option<Registry>,
    pub extract: ExtractOptions,
    pub features_dir: Option<PathBuf>,
}

impl FeatureSource {
    pub fn obtain(&self, clip_ref: &str) -> Result<FeatureBundle, String> {
        let path = Path::new(clip_ref);
        if clip_ref.ends_with(".json") {
            return ingest_precomputed(path).map_err(|e| e.to_string());
        }
        if let (Some(dir), Some(stem)) = (&self.features_dir, path.file_stem()) {
            let candidate = dir.join(format!("{}.features.json", stem.to_string_lossy()));
            if candidate.exists() {
                return ingest_precomputed(&candidate).map_err(|e| e.to_string());
            }
        }
        match &self.registry {
            Some(registry) => extract_all(ClipRef::Path(path), registry, &self.extract).map_err(|e| e.to_string()),
            None => Err(format!("no features available for {clip_ref}")),
        }
    }
}

pub const RESULTS_FILE: &str = "results.jsonl";
pub const SCORE_FILE: &str = "score.json";
pub const ERRORS_FILE: &str = "errors.json";
pub const REPORT_FILE: &str = "report.md";
pub const BUNDLES_DIR: &str = "bundles";

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    pub pipeline: PipelineConfig,
    pub source: FeatureSource,
    pub workers: usize,
    pub out_dir: PathBuf,
    /// Checked before each sample starts; set it to stop early.
    pub cancel: Option<Arc<AtomicBool>>,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("IO error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("cannot encode output: {0}")]
    Encode(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a results file, skipping lines that do not parse (such as a line
/// cut short by an interrupted run). Returns the results and the number of
/// skipped lines.
pub fn read_results(path: &Path) -> Result<(Vec<EvalResult>, usize), HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut results = Vec::new();
    let mut skipped = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        match serde_json::from_str(line) {
            Ok(r) => results.push(r),
            Err(_) => skipped += 1,
        }
    }
    Ok((results, skipped))
}

/// File name for a sample's bundle; ids are not trusted as paths.
pub fn bundle_file_name(sample_id: &str) -> String {
    let safe: String = sample_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    format!("{safe}.features.json")
}

/// Evaluates every sample not already in `<out_dir>/results.jsonl`,
/// appending each result as it finishes. Returns the results of all
/// `samples` that have one, in sample order.
pub fn run_eval(
    samples: &[QaSample],
    options: &EvalOptions,
    client: &dyn LlmClient,
) -> Result<Vec<EvalResult>, HarnessError> {
    let ids: BTreeSet<&str> = samples.iter().map(|s| s.sample_id.as_str()).collect();
    if ids.len() != samples.len() {
        let mut seen = BTreeSet::new();
        let dup = samples.iter().find(|s| !seen.insert(&s.sample_id)).expect("duplicate exists");
        return Err(ScoreError::DuplicateSampleId(dup.sample_id.clone()).into());
    }
    let out = &options.out_dir;
    let bundles_dir = out.join(BUNDLES_DIR);
    fs::create_dir_all(&bundles_dir).map_err(io_err(&bundles_dir))?;
    let results_path = out.join(RESULTS_FILE);

    let mut done: BTreeMap<String, EvalResult> = BTreeMap::new();
    if results_path.exists() {
        let (previous, skipped) = read_results(&results_path)?;
        if skipped > 0 || !fs::read(&results_path).map_err(io_err(&results_path))?.ends_with(b"\n") {
            log::warn!("dropping {skipped} unreadable line(s) from {}", results_path.display());
            let mut clean = String::new();
            for r in &previous {
                clean.push_str(&serde_json::to_string(r).map_err(|e| HarnessError::Encode(e.to_string()))?);
                clean.push('\n');
            }
            write_atomic(&results_path, &clean).map_err(io_err(&results_path))?;
        }
        done.extend(previous.into_iter().map(|r| (r.sample_id.clone(), r)));
    }
    let pending: Vec<&QaSample> = samples.iter().filter(|s| !done.contains_key(&s.sample_id)).collect();
    log::info!("{} sample(s) done, {} to run", samples.len() - pending.len(), pending.len());

    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&results_path)
        .map_err(io_err(&results_path))?;
    let sink = Mutex::new((BufWriter::new(file), Vec::new()));
    let next = AtomicUsize::new(0);
    let failure: Mutex<Option<HarnessError>> = Mutex::new(None);
    let workers = options.workers.clamp(1, pending.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if options.cancel.as_ref().is_some_and(|c| c.load(Ordering::SeqCst)) {
                    return;
                }
                if failure.lock().unwrap_or_else(|e| e.into_inner()).is_some() {
                    return;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(sample) = pending.get(i) else { return };
                let result = evaluate_one(sample, options, client, &bundles_dir);
                let line = match serde_json::to_string(&result) {
                    Ok(l) => l,
                    Err(e) => {
                        *failure.lock().unwrap_or_else(|e| e.into_inner()) = Some(HarnessError::Encode(e.to_string()));
                        return;
                    }
                };
                let mut guard = sink.lock().unwrap_or_else(|e| e.into_inner());
                let (writer, collected) = &mut *guard;
                let written = writeln!(writer, "{line}").and_then(|_| writer.flush());
                if let Err(source) = written {
                    *failure.lock().unwrap_or_else(|e| e.into_inner()) = Some(HarnessError::Io {
                        path: results_path.clone(),
                        source,
                    });
                    return;
                }
                collected.push(result);
            });
        }
    });
    if let Some(e) = failure.into_inner().unwrap_or_else(|e| e.into_inner()) {
        return Err(e);
    }
    let (_, fresh) = sink.into_inner().unwrap_or_else(|e| e.into_inner());
    done.extend(fresh.into_iter().map(|r| (r.sample_id.clone(), r)));
    Ok(samples.iter().filter_map(|s| done.remove(&s.sample_id)).collect())
}

fn evaluate_one(sample: &QaSample, options: &EvalOptions, client: &dyn LlmClient, bundles_dir: &Path) -> EvalResult {
    let started = Instant::now();
    let bundle = match options.source.obtain(&sample.clip_ref) {
        Ok(b) => b,
        Err(e) => {
            log::warn!("sample {}: {e}", sample.sample_id);
            let mut r = EvalResult::pending(sample, options.pipeline.style).failed(e);
            r.timing_ms = started.elapsed().as_millis() as u64;
            return r;
        }
    };
    let path = bundles_dir.join(bundle_file_name(&sample.sample_id));
    match serialize_bundle(&bundle) {
        Ok(text) => {
            if let Err(e) = write_atomic(&path, &text) {
                log::warn!("cannot store bundle {}: {e}", path.display());
            }
        }
        Err(e) => log::warn!("cannot serialize bundle of {}: {e}", sample.sample_id),
    }
    let mut result = run_sample(sample, &bundle, &options.pipeline, client);
    result.timing_ms = started.elapsed().as_millis() as u64;
    result
}

/// Bundles stored by [`run_eval`] for the given samples; missing or
/// unreadable files are skipped.
pub fn load_bundles(out_dir: &Path, samples: &[QaSample]) -> BTreeMap<String, FeatureBundle> {
    samples
        .iter()
        .filter_map(|s| {
            let path = out_dir.join(BUNDLES_DIR).join(bundle_file_name(&s.sample_id));
            ingest_precomputed(&path).ok().map(|b| (s.sample_id.clone(), b))
        })
        .collect()
}

/// Writes `score.json`, `errors.json` and `report.md` next to the results.
pub fn write_reports(
    out_dir: &Path,
    results: &[EvalResult],
    samples: &[QaSample],
    label: &str,
) -> Result<(ScoreReport, ErrorReport), HarnessError> {
    let report = score(results, samples)?;
    let bundles = load_bundles(out_dir, samples);
    let errors = analyze_errors(results, &bundles, samples);
    let score_path = out_dir.join(SCORE_FILE);
    write_atomic(&score_path, &to_pretty(&report)?).map_err(io_err(&score_path))?;
    let errors_path = out_dir.join(ERRORS_FILE);
    write_atomic(&errors_path, &to_pretty(&errors)?).map_err(io_err(&errors_path))?;
    let mut md = render_markdown(&[(label, &report)]);
    md.push_str(&format!(
        "\n{} sample(s), {} correct, {} parse error(s).\n",
        report.n, report.correct, report.n_parse_errors
    ));
    let md_path = out_dir.join(REPORT_FILE);
    write_atomic(&md_path, &md).map_err(io_err(&md_path))?;
    Ok((report, errors))
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty<T: serde::Serialize>(value: &T) -> Result<String, HarnessError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Encode(e.to_string()))?;
    text.push('\n');
    Ok(text)
}
