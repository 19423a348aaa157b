use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use polifilter_core::corpus::{
    corpus_stats, export_canonical, import_opp115, load_canonical, split_by_policy, split_from_lists, ImportOptions,
    ImportReport, Paragraph, Side, Split, TierMapping,
};
use polifilter_core::gateway::{Backend, Gateway, HttpBackend, MockBackend, ResponseCache, API_KEY_ENV};
use polifilter_core::jsonl;
use polifilter_core::metrics::{
    evaluate, random_reason_baseline, render_overlap_table, scatter_csv, EvalReport, ExplainScope, LengthRatios,
};
use polifilter_core::pipeline::{
    ablation, build_entailment_dataset, run_inference, InferenceConfig, LexicalBaseline, PredictionRecord,
    RemoteScorer, Verifier, DEFAULT_GLOSS_THRESHOLD,
};

use crate::config::{BackendSpec, RunConfig, SplitSpec, VerifierSpec};
use crate::error::{io_error, CliError};

/// Which split side a command works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SideArg {
    Train,
    Test,
    All,
}

impl SideArg {
    fn select<'a>(self, paragraphs: &'a [Paragraph], split: &Split) -> Vec<&'a Paragraph> {
        match self {
            SideArg::Train => split.select(paragraphs, Side::Train),
            SideArg::Test => split.select(paragraphs, Side::Test),
            SideArg::All => paragraphs.iter().collect(),
        }
    }
}

fn api_key() -> Option<String> {
    std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty())
}

fn out_path(config: &RunConfig, flag: Option<PathBuf>, default_name: &str) -> PathBuf {
    flag.unwrap_or_else(|| config.out_dir.join(default_name))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn make_split(config: &RunConfig, paragraphs: &[Paragraph]) -> Result<Split, CliError> {
    let policies = paragraphs
        .iter()
        .map(|p| p.policy_id.as_str())
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let split = match &config.split {
        SplitSpec::Lists { train, test } => split_from_lists(paragraphs, train.clone(), test.clone())?,
        SplitSpec::Counts { train, test } => {
            let (train, test) = match (*train, *test) {
                (Some(tr), Some(te)) => (tr, te),
                (Some(tr), None) => (tr, policies.saturating_sub(tr)),
                (None, Some(te)) => (policies.saturating_sub(te), te),
                (None, None) => {
                    let tr = ((policies * 90) as f64 / 115.0).round() as usize;
                    (tr, policies - tr)
                }
            };
            split_by_policy(paragraphs, config.seed, train, test)?
        }
    };
    Ok(split)
}

fn load_corpus(config: &RunConfig) -> Result<(Vec<Paragraph>, Split), CliError> {
    let path = config.corpus()?;
    let (paragraphs, split) = load_canonical(path)?;
    info!("loaded {} paragraphs from {}", paragraphs.len(), path.display());
    Ok((paragraphs, split))
}

fn gateway(config: &RunConfig) -> Result<Gateway, CliError> {
    let backend: Box<dyn Backend> = match config.backend()? {
        BackendSpec::Mock(path) => Box::new(MockBackend::from_file(path)?),
        BackendSpec::Http {
            endpoint,
            model,
            filler_model,
        } => {
            let mut b = HttpBackend::new(endpoint, model.clone(), api_key()).with_timeout(config.timeout);
            if let Some(m) = filler_model {
                b = b.with_filler_model(m.clone());
            }
            Box::new(b)
        }
    };
    let mut g = Gateway::new(backend)
        .with_retry(config.retry.clone())
        .with_decoding(config.decoding.clone());
    if let Some(dir) = &config.cache_dir {
        g = g.with_cache(ResponseCache::new(dir));
    }
    info!("backend {}", g.model_id());
    Ok(g)
}

fn verifier(config: &RunConfig) -> Box<dyn Verifier> {
    match &config.verifier {
        VerifierSpec::Lexical => Box::new(LexicalBaseline),
        VerifierSpec::Remote(url) => {
            Box::new(RemoteScorer::new(url.clone(), api_key()).with_retry(config.retry.clone()))
        }
    }
}

fn render_import_report(r: &ImportReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "policy files: {}", r.policy_files);
    let _ = writeln!(out, "annotation rows: {}", r.rows);
    let _ = writeln!(
        out,
        "kept annotations: {} ({} duplicates merged)",
        r.annotations, r.duplicates_removed
    );
    let _ = writeln!(
        out,
        "spans: {} relocated, {} unaligned, {} whole-segment fallbacks",
        r.relocated_spans, r.unaligned_spans, r.whole_segment_fallbacks
    );
    let _ = writeln!(out, "unannotated segments: {}", r.unannotated_segments);
    for u in &r.unmappable {
        let _ = writeln!(out, "skipped unmappable: {u}");
    }
    out
}

pub struct IngestArgs {
    pub out: Option<PathBuf>,
    pub skip_unmappable: bool,
    pub include_unannotated: bool,
}

pub fn ingest(config: &RunConfig, args: IngestArgs) -> Result<String, CliError> {
    let raw = config
        .raw_dir
        .as_deref()
        .ok_or(crate::config::ConfigError::Missing("raw_dir"))?;
    let mapping = match &config.mapping {
        Some(path) => TierMapping::from_csv_file(path)?,
        None => TierMapping::default(),
    };
    let options = ImportOptions {
        skip_unmappable: args.skip_unmappable,
        include_unannotated: args.include_unannotated,
        ..Default::default()
    };
    let imported = import_opp115(raw, &mapping, &options)?;
    let split = make_split(config, &imported.paragraphs)?;
    let out = out_path(config, args.out, "corpus.jsonl");
    let n = export_canonical(&imported.paragraphs, &split, &out)?;
    info!("wrote {n} paragraphs to {}", out.display());
    let mut text = format!("seed: {}\n", config.seed);
    text.push_str(&render_import_report(&imported.report));
    text.push_str(&corpus_stats(&imported.paragraphs, &split).to_string());
    Ok(text)
}

pub fn split(config: &RunConfig, out: Option<PathBuf>) -> Result<String, CliError> {
    let (paragraphs, _) = load_corpus(config)?;
    let split = make_split(config, &paragraphs)?;
    let out = out_path(config, out, "corpus.jsonl");
    export_canonical(&paragraphs, &split, &out)?;
    info!("wrote {}", out.display());
    let mut text = format!("seed: {}\n", config.seed);
    let _ = writeln!(text, "train policies: {}", join(&split.train_policy_ids));
    let _ = writeln!(text, "test policies: {}", join(&split.test_policy_ids));
    text.push_str(&corpus_stats(&paragraphs, &split).to_string());
    Ok(text)
}

fn join<'a>(ids: impl IntoIterator<Item = &'a String>) -> String {
    ids.into_iter().map(String::as_str).collect::<Vec<_>>().join(",")
}

pub fn build_entailment_set(config: &RunConfig, out: Option<PathBuf>, side: SideArg) -> Result<String, CliError> {
    let (paragraphs, split) = load_corpus(config)?;
    let selected = side.select(&paragraphs, &split);
    let gateway = gateway(config)?;
    let out = out_path(config, out, "entailment.jsonl");
    let set = build_entailment_dataset(&selected, &gateway, config.concurrency, Some(&out))?;
    info!("wrote {} examples to {}", set.examples.len(), out.display());
    Ok(format!("seed: {}\n{}\n", config.seed, set.summary))
}

pub struct ClassifyArgs {
    pub out: Option<PathBuf>,
    pub side: SideArg,
    pub ablation: bool,
}

pub fn classify(config: &RunConfig, args: ClassifyArgs) -> Result<String, CliError> {
    let (paragraphs, split) = load_corpus(config)?;
    let selected = args.side.select(&paragraphs, &split);
    let gateway = gateway(config)?;
    let verifier = verifier(config);
    let inference = InferenceConfig {
        threshold: config.threshold,
        concurrency: config.concurrency,
    };
    let out = out_path(config, args.out, "predictions.jsonl");
    let run = run_inference(&selected, &gateway, verifier.as_ref(), &inference, Some(&out))?;
    info!("wrote predictions to {}", out.display());
    let mut text = format!("seed: {}\n{}\n", config.seed, run.summary);
    if args.ablation {
        let report = ablation(&selected, &run.outcomes, verifier.as_ref(), DEFAULT_GLOSS_THRESHOLD)?;
        let table = report.render();
        let json = serde_json::to_string_pretty(&report).expect("ablation report serializes");
        write_file(&config.out_dir.join("ablation.json"), &(json + "\n"))?;
        write_file(&config.out_dir.join("ablation.txt"), &table)?;
        text.push('\n');
        text.push_str(&table);
    }
    Ok(text)
}

pub struct EvaluateArgs {
    pub predictions: PathBuf,
    pub side: SideArg,
    pub scope: ExplainScope,
}

pub fn evaluate_cmd(config: &RunConfig, args: EvaluateArgs) -> Result<String, CliError> {
    let (paragraphs, split) = load_corpus(config)?;
    let selected = args.side.select(&paragraphs, &split);
    let predictions: Vec<PredictionRecord> = jsonl::read(&args.predictions)?;
    let mut evaluation = evaluate(&selected, &predictions, args.scope)?;
    evaluation.report.seed = Some(config.seed);
    let text = evaluation.report.render();
    let json = serde_json::to_string_pretty(&evaluation.report).expect("report serializes") + "\n";
    std::fs::create_dir_all(&config.out_dir).map_err(|e| io_error(&config.out_dir, e))?;
    write_file(&config.out_dir.join("report.json"), &json)?;
    write_file(&config.out_dir.join("report.txt"), &text)?;
    write_file(&config.out_dir.join("scatter.csv"), &scatter_csv(&evaluation.records))?;
    info!(
        "wrote report.json, report.txt and scatter.csv to {}",
        config.out_dir.display()
    );
    Ok(text)
}

pub fn baseline_random(config: &RunConfig, out: Option<PathBuf>, side: SideArg) -> Result<String, CliError> {
    let (paragraphs, split) = load_corpus(config)?;
    let selected = side.select(&paragraphs, &split);
    let mut source = split.select(&paragraphs, Side::Train);
    if source.is_empty() {
        source = paragraphs.iter().collect();
    }
    let ratios = LengthRatios::from_paragraphs(source.iter().copied())?;
    let records = random_reason_baseline(selected.iter().copied(), &ratios, config.seed)?;
    let out = out_path(config, out, "baseline_random.jsonl");
    jsonl::write(&out, &records)?;
    info!("wrote {} predictions to {}", records.len(), out.display());
    Ok(format!(
        "seed: {}\nparagraphs: {}\npredictions: {}\nlength ratios from {} gold reasons\n",
        config.seed,
        selected.len(),
        records.len(),
        ratios.len()
    ))
}

/// Side-by-side comparison of several evaluation reports.
pub fn report(inputs: &[(String, PathBuf)], out: Option<PathBuf>) -> Result<String, CliError> {
    let mut reports = Vec::with_capacity(inputs.len());
    for (name, path) in inputs {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let r: EvalReport = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: not an evaluation report: {e}", path.display())))?;
        reports.push((name.as_str(), r));
    }
    let text = render_comparison(&reports);
    if let Some(path) = out {
        write_file(&path, &text)?;
    }
    Ok(text)
}

pub fn render_comparison(reports: &[(&str, EvalReport)]) -> String {
    let w = reports
        .iter()
        .map(|(n, _)| n.chars().count())
        .chain(["Method".len()])
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    for (title, pick) in [("Macro average", 0usize), ("Micro average", 1), ("Weighted average", 2)] {
        let _ = writeln!(out, "{title}");
        let _ = writeln!(
            out,
            "{:<w$}  {:>9}  {:>6}  {:>4}",
            "Method", "Precision", "Recall", "F1"
        );
        for (name, r) in reports {
            let c = &r.classification;
            let s = [c.macro_, c.micro, c.weighted][pick];
            let _ = writeln!(
                out,
                "{name:<w$}  {:>9.2}  {:>6.2}  {:>4.2}",
                s.precision, s.recall, s.f1
            );
        }
        out.push('\n');
    }
    let columns: Vec<(&str, _)> = reports
        .iter()
        .map(|(name, r)| (*name, r.explainability.overlap_bins()))
        .collect();
    out.push_str(&render_overlap_table(&columns));
    out
}
