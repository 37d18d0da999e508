//! Command-line entry point. Machine-readable output goes to stdout, logs
//! and diagnostics to stderr. Exit codes: 0 success, 1 usage, 2 runtime.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::Value;
use symaudio_core::eval::{Benchmark, PipelineStyle, QaSample};
use symaudio_core::prompt::{
    build_agent_selection_prompt, build_caption_prompt, build_caption_reasoning_prompt, build_flat_prompt,
    option_letter, Category, Question,
};
use symaudio_core::score::score_results;
use symaudio_core::{analysis::analyze_errors, route_features, routed_layers, serialize_bundle};

use crate::bench::{self, load_benchmark, read_results, run_eval, run_sample, write_reports, BUNDLES_DIR};
use crate::config::RunConfig;
use crate::golden::{default_golden_dir, write_goldens};
use crate::llm::{HttpChatClient, LlmClient, LlmRequest, MockScript, ScriptedClient};
use crate::registry::{extract_all, ingest_precomputed, ClipRef};

#[derive(Debug, Parser)]
#[command(name = "symaudio", version, about = "Symbolic audio question answering pipeline")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Answer LLM calls from a JSON script instead of the endpoint.
    #[arg(long, global = true, value_name = "SCRIPT")]
    pub mock_llm: Option<PathBuf>,
    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PromptKind {
    Flat,
    Caption,
    CaptionReasoning,
    Agent,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract features from a WAV file, or every WAV in a directory (one
    /// JSON document per line).
    Extract { input: PathBuf },
    /// Print the prompt for a feature file and a question file.
    Prompt {
        #[arg(required_unless_present = "regenerate_goldens")]
        features: Option<PathBuf>,
        #[arg(required_unless_present = "regenerate_goldens")]
        question: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "flat")]
        kind: PromptKind,
        /// Caption text for `--kind caption-reasoning`.
        #[arg(long)]
        caption: Option<String>,
        /// Rewrite the golden prompt fixtures and exit.
        #[arg(long)]
        regenerate_goldens: bool,
        /// Where `--regenerate-goldens` writes; defaults to the crate's
        /// fixtures/prompts.
        #[arg(long, value_name = "DIR", requires = "regenerate_goldens")]
        golden_dir: Option<PathBuf>,
    },
    /// Generate a caption of a feature file.
    Caption { features: PathBuf },
    /// Answer one question about a feature file.
    Reason {
        features: PathBuf,
        question: PathBuf,
        /// Overrides the configured style.
        #[arg(long)]
        style: Option<String>,
    },
    /// Evaluate a benchmark file.
    Eval {
        benchmark: PathBuf,
        #[arg(long, default_value = "custom")]
        format: String,
        #[arg(long)]
        style: Option<String>,
        /// Output directory; overrides the configured one.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Score a results file.
    Score {
        results: PathBuf,
        /// Score against this benchmark's gold labels instead of the
        /// recorded ones.
        #[arg(long)]
        benchmark: Option<PathBuf>,
        #[arg(long, default_value = "custom")]
        format: String,
    },
    /// Attribute the wrong answers of a results file.
    Analyze {
        results: PathBuf,
        #[arg(long)]
        benchmark: PathBuf,
        #[arg(long, default_value = "custom")]
        format: String,
        /// Directory of stored bundles; defaults to `bundles` next to the
        /// results file.
        #[arg(long)]
        bundles: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Question file: the question, its options and optionally a category and
/// the gold answer (`gold_index` or `answer` text).
#[derive(Debug, Deserialize)]
struct QuestionFile {
    question: String,
    options: Vec<String>,
    #[serde(default)]
    category: Option<Category>,
    #[serde(default)]
    gold_index: Option<usize>,
    #[serde(default)]
    answer: Option<String>,
}

fn read_question(path: &Path) -> Result<(Question, Option<usize>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    let file: QuestionFile = serde_json::from_str(&text).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    let question = Question {
        text: file.question,
        options: file.options,
        category: file.category.unwrap_or(Category::Mixed),
    };
    question.validate().map_err(runtime)?;
    let gold = match (file.gold_index, file.answer) {
        (Some(g), _) => Some(g),
        (None, Some(a)) => Some(bench::resolve_gold("question", &a, &question.options).map_err(runtime)?),
        (None, None) => None,
    };
    if gold.is_some_and(|g| g >= question.options.len()) {
        return Err(runtime("gold index out of range"));
    }
    Ok((question, gold))
}

fn out(text: &str) -> Result<(), CliError> {
    let mut stdout = std::io::stdout().lock();
    stdout
        .write_all(text.as_bytes())
        .and_then(|_| stdout.flush())
        .map_err(runtime)
}

fn parse_style(s: &str) -> Result<PipelineStyle, CliError> {
    s.parse().map_err(CliError::Usage)
}

fn parse_format(s: &str) -> Result<(), CliError> {
    s.parse::<Benchmark>().map(|_| ()).map_err(CliError::Usage)
}

struct Context {
    config: RunConfig,
    mock: Option<PathBuf>,
}

impl Context {
    fn client(&self) -> Result<Box<dyn LlmClient>, CliError> {
        match &self.mock {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
                let script = MockScript::from_json(&text).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
                Ok(Box::new(ScriptedClient::new(script)))
            }
            None => Ok(Box::new(HttpChatClient::new(&self.config.endpoint))),
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .target(env_logger::Target::Stderr)
        .try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| CliError::Usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    let ctx = Context {
        config,
        mock: cli.mock_llm,
    };
    match cli.command {
        Command::Extract { input } => extract(&ctx, &input),
        Command::Prompt {
            features,
            question,
            kind,
            caption,
            regenerate_goldens,
            golden_dir,
        } => {
            if regenerate_goldens {
                let dir = golden_dir.unwrap_or_else(default_golden_dir);
                let written = write_goldens(&dir).map_err(runtime)?;
                log::info!("wrote {} golden prompts to {}", written.len(), dir.display());
                return Ok(());
            }
            let (features, question) = features.zip(question).ok_or_else(|| CliError::Usage("missing arguments".into()))?;
            prompt(&ctx, &features, &question, kind, caption.as_deref())
        }
        Command::Caption { features } => caption(&ctx, &features),
        Command::Reason {
            features,
            question,
            style,
        } => reason(&ctx, &features, &question, style.as_deref()),
        Command::Eval {
            benchmark,
            format,
            style,
            out,
            workers,
        } => eval(&ctx, &benchmark, &format, style.as_deref(), out, workers),
        Command::Score {
            results,
            benchmark,
            format,
        } => score_cmd(&results, benchmark.as_deref(), &format),
        Command::Analyze {
            results,
            benchmark,
            format,
            bundles,
        } => analyze(&results, &benchmark, &format, bundles),
    }
}

fn extract(ctx: &Context, input: &Path) -> Result<(), CliError> {
    let registry = ctx.config.registry().map_err(|e| CliError::Usage(e.to_string()))?;
    let options = ctx.config.extract_options();
    let files: Vec<PathBuf> = if input.is_dir() {
        let mut wavs: Vec<PathBuf> = std::fs::read_dir(input)
            .map_err(|e| runtime(format!("{}: {e}", input.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
            .collect();
        wavs.sort();
        wavs
    } else {
        vec![input.to_path_buf()]
    };
    let mut failed = 0;
    for file in &files {
        let encoded = extract_all(ClipRef::Path(file), &registry, &options)
            .map_err(|e| e.to_string())
            .and_then(|b| serialize_bundle(&b).map_err(|e| e.to_string()));
        match encoded {
            Ok(json) => out(&format!("{json}\n"))?,
            Err(e) => {
                eprintln!("error: {}: {e}", file.display());
                failed += 1;
            }
        }
    }
    match failed {
        0 => Ok(()),
        n => Err(runtime(format!("{n} of {} clip(s) failed", files.len()))),
    }
}

fn prompt(
    ctx: &Context,
    features: &Path,
    question: &Path,
    kind: PromptKind,
    caption: Option<&str>,
) -> Result<(), CliError> {
    let bundle = ingest_precomputed(features).map_err(runtime)?;
    let (question, _) = read_question(question)?;
    let routing = &ctx.config.routing;
    let routed = route_features(&bundle, routing);
    let prompt = match kind {
        PromptKind::Flat => build_flat_prompt(&routed, &question),
        PromptKind::Caption => Ok(build_caption_prompt(&routed)),
        PromptKind::CaptionReasoning => {
            let caption = caption.ok_or_else(|| CliError::Usage("--kind caption-reasoning needs --caption".into()))?;
            build_caption_reasoning_prompt(caption, &question)
        }
        PromptKind::Agent => build_agent_selection_prompt(&routed, &question, routed_layers(&bundle, routing)),
    }
    .map_err(runtime)?;
    out(&prompt.text)
}

fn caption(ctx: &Context, features: &Path) -> Result<(), CliError> {
    let bundle = ingest_precomputed(features).map_err(runtime)?;
    let routed = route_features(&bundle, &ctx.config.routing);
    let prompt = build_caption_prompt(&routed);
    let client = ctx.client()?;
    let request = LlmRequest::user(
        &ctx.config.endpoint.model_id,
        &prompt.text,
        ctx.config.generation.caption_max_tokens,
    );
    let response = client.complete(&request).map_err(runtime)?;
    out(&format!("{}\n", response.text.trim()))
}

fn reason(ctx: &Context, features: &Path, question: &Path, style: Option<&str>) -> Result<(), CliError> {
    let mut pipeline = ctx.config.pipeline().map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(s) = style {
        pipeline.style = parse_style(s)?;
    }
    let bundle = ingest_precomputed(features).map_err(runtime)?;
    let (question, gold) = read_question(question)?;
    let sample = QaSample {
        sample_id: bundle.metadata.clip_id.clone(),
        clip_ref: features.display().to_string(),
        question,
        gold_index: gold.unwrap_or(0),
        benchmark: Benchmark::Custom,
        image_ref: None,
    };
    let client = ctx.client()?;
    let result = run_sample(&sample, &bundle, &pipeline, client.as_ref());
    let mut value = serde_json::to_value(&result).map_err(runtime)?;
    if let Value::Object(map) = &mut value {
        if gold.is_none() {
            map.remove("gold_index");
            map.remove("correct");
        }
        let letter = result.predicted_index.map(|i| option_letter(i).to_string());
        map.insert("answer_letter".into(), letter.map_or(Value::Null, Value::String));
    }
    out(&format!("{}\n", serde_json::to_string_pretty(&value).map_err(runtime)?))?;
    match result.error {
        Some(e) => Err(runtime(e)),
        None => Ok(()),
    }
}

fn eval(
    ctx: &Context,
    benchmark: &Path,
    format: &str,
    style: Option<&str>,
    out_dir: Option<PathBuf>,
    workers: Option<usize>,
) -> Result<(), CliError> {
    parse_format(format)?;
    let mut options = ctx.config.eval_options().map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(s) = style {
        options.pipeline.style = parse_style(s)?;
    }
    if let Some(dir) = out_dir {
        options.out_dir = dir;
    }
    if let Some(w) = workers {
        options.workers = w.max(1);
    }
    let samples = load_benchmark(benchmark, format).map_err(runtime)?;
    let client = ctx.client()?;
    let results = run_eval(&samples, &options, client.as_ref()).map_err(runtime)?;
    let (report, _) = write_reports(&options.out_dir, &results, &samples, options.pipeline.style.as_str())
        .map_err(runtime)?;
    log::info!(
        "overall accuracy {} over {} sample(s)",
        report.overall_display(),
        report.n
    );
    out(&bench::to_pretty(&report).map_err(runtime)?)
}

fn score_cmd(results: &Path, benchmark: Option<&Path>, format: &str) -> Result<(), CliError> {
    parse_format(format)?;
    let (results, skipped) = read_results(results).map_err(runtime)?;
    if skipped > 0 {
        log::warn!("skipped {skipped} unreadable line(s)");
    }
    let report = match benchmark {
        Some(path) => {
            let samples = load_benchmark(path, format).map_err(runtime)?;
            symaudio_core::score::score(&results, &samples).map_err(runtime)?
        }
        None => score_results(&results).map_err(runtime)?,
    };
    out(&bench::to_pretty(&report).map_err(runtime)?)
}

fn analyze(results_path: &Path, benchmark: &Path, format: &str, bundles: Option<PathBuf>) -> Result<(), CliError> {
    parse_format(format)?;
    let (results, _) = read_results(results_path).map_err(runtime)?;
    let samples = load_benchmark(benchmark, format).map_err(runtime)?;
    let bundle_dir = bundles.unwrap_or_else(|| {
        results_path
            .parent()
            .unwrap_or(Path::new("."))
            .join(BUNDLES_DIR)
    });
    let bundles = samples
        .iter()
        .filter_map(|s| {
            let path = bundle_dir.join(bench::bundle_file_name(&s.sample_id));
            ingest_precomputed(&path).ok().map(|b| (s.sample_id.clone(), b))
        })
        .collect();
    let report = analyze_errors(&results, &bundles, &samples);
    out(&bench::to_pretty(&report).map_err(runtime)?)
}
