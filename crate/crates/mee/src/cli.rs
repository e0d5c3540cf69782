//! Command line: `extract`, `eval`, `dataset build|emit`, `visualize`.
//!
//! Exit codes: 0 success, 1 usage, 2 input error, 3 backend error.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mee_core::dataset::{
    build_weak_alignments, AnnotatedImage, AnnotatedSentence, DatasetError, InstructionBuilder, SourceTags,
    WeaklyAlignedSample,
};
use mee_core::eval::{evaluate_corpus, EvalReport, Prf};
use mee_core::extract::{Document, DocumentRecord, ExtractError, Extractor};
use mee_core::gateway::Grounder;
use mee_core::prompt::{PromptTemplates, TemplateKind};
use mee_core::schema::RoleMapping;
use rayon::prelude::*;
use serde::Serialize;

use crate::backend::Backend;
use crate::config::{FileConfig, RunConfig};
use crate::error::CliError;
use crate::files::{self, LoadedMapping};
use crate::manifest::{DocumentCalls, RunManifest};
use crate::overlay::{build_overlays, file_stem};

#[derive(Debug, Parser)]
#[command(name = "mee", version, about = "Stepwise schema-guided multimedia event extraction")]
pub struct Cli {
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract events from a corpus of sentence-image documents.
    Extract(ExtractArgs),
    /// Score an extraction file against a gold file.
    Eval(EvalArgs),
    /// Build weakly-aligned training data and emit instruction records.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Write per-document box overlays.
    Visualize(VisualizeArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub schema: PathBuf,
    /// Corpus JSONL: `{id, sentence, image, gold_events?}` per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Service base URL (`http(s)://...`) or script file path.
    #[arg(long)]
    pub backend: String,
    /// Grounding service, if different from `--backend`.
    #[arg(long)]
    pub grounder: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// stepwise | jall | jmeae
    #[arg(long)]
    pub mode: Option<String>,
    /// Run argument steps over the gold mentions attached to each document.
    #[arg(long)]
    pub teacher_forcing: bool,
    #[arg(long)]
    pub no_grounding: bool,
    /// Documents and requests in flight.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory overriding any of the built-in prompt templates.
    #[arg(long)]
    pub templates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    /// Report JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Match ledger JSONL.
    #[arg(long)]
    pub ledger: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Pair each annotated sentence with its most similar same-type image.
    Build(BuildArgs),
    /// Turn alignments into event-type and argument instruction records.
    Emit(EmitArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub sentences: PathBuf,
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub mapping: PathBuf,
    /// Schema the mapping targets.
    #[arg(long)]
    pub schema: PathBuf,
    /// Embedding service URL or script file path.
    #[arg(long)]
    pub embedder: String,
    /// Alignments JSONL.
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to `<out>.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmitArgs {
    #[arg(long)]
    pub alignments: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Captioning service URL or script file path.
    #[arg(long)]
    pub captioner: String,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Role reconciliation table; role names are matched case-insensitively without it.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VisualizeArgs {
    #[arg(long)]
    pub extraction: PathBuf,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
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
        .try_init();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("mee: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Extract(a) => cmd_extract(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Dataset(DatasetCommand::Build(a)) => cmd_dataset_build(&a),
        Command::Dataset(DatasetCommand::Emit(a)) => cmd_dataset_emit(&a),
        Command::Visualize(a) => cmd_visualize(&a),
    }
}

/// `dir/name.ext` → `dir/name.ext<suffix>`.
fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn resolve_config(path: Option<&Path>, flags: FileConfig) -> Result<RunConfig, CliError> {
    let file = match path {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    RunConfig::resolve(flags.over(file)).map_err(CliError::Usage)
}

fn load_templates(dir: Option<&Path>) -> Result<PromptTemplates, CliError> {
    let Some(dir) = dir else {
        return Ok(PromptTemplates::builtin());
    };
    if !dir.is_dir() {
        return Err(CliError::input(dir, "template directory not found"));
    }
    let mut read_error = None;
    let templates = PromptTemplates::from_sources(|kind: TemplateKind| {
        let path = dir.join(kind.file_name());
        if !path.exists() {
            return None;
        }
        match files::read_text(&path) {
            Ok(text) => Some(text),
            Err(e) => {
                read_error.get_or_insert(e);
                None
            }
        }
    })
    .map_err(|e| CliError::input(dir, e))?;
    match read_error {
        Some(e) => Err(e.into()),
        None => Ok(templates),
    }
}

fn open_backend(spec: &str, cfg: &RunConfig) -> Result<(Backend, crate::backend::BackendIdentity), CliError> {
    Ok(Backend::open(spec, &cfg.http_options())?)
}

fn write_manifest(path: &Path, manifest: &mut RunManifest) -> Result<(), CliError> {
    manifest.finish();
    files::write_json(path, manifest)?;
    Ok(())
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))
}

pub fn cmd_extract(a: &ExtractArgs) -> Result<(), CliError> {
    let flags = FileConfig {
        mode: a.mode.clone(),
        teacher_forcing: a.teacher_forcing.then_some(true),
        grounding: a.no_grounding.then_some(false),
        jobs: a.jobs,
        templates: a.templates.clone(),
        ..FileConfig::default()
    };
    let cfg = resolve_config(a.config.as_deref(), flags)?;
    let loaded = files::load_schema(&a.schema)?;
    let schema = &loaded.schema;
    let templates = load_templates(cfg.templates.as_deref())?;
    let docs: Vec<Document> = files::read_jsonl(&a.input)?;
    let mut seen = BTreeSet::new();
    if let Some(dup) = docs.iter().find(|d| !seen.insert(d.id.as_str())) {
        return Err(CliError::input(&a.input, format!("duplicate document id {}", dup.id)));
    }

    let mut manifest = RunManifest::start("extract");
    manifest.config = serde_json::to_value(&cfg).expect("config serializes");
    manifest.schema_sha256 = Some(loaded.sha256.clone());
    manifest.input("schema", &a.schema);
    manifest.input("corpus", &a.input);
    let (chat, chat_id) = open_backend(&a.backend, &cfg)?;
    manifest.backends.insert("chat".into(), chat_id);
    let grounder = match (&a.grounder, cfg.grounding) {
        (Some(spec), true) => {
            let (g, id) = open_backend(spec, &cfg)?;
            manifest.backends.insert("ground".into(), id);
            Some(g)
        }
        _ => None,
    };
    let grounder: Option<&(dyn Grounder + Sync)> = match (&grounder, cfg.grounding) {
        (Some(g), _) => Some(g),
        (None, true) => {
            manifest
                .backends
                .insert("ground".into(), manifest.backends["chat"].clone());
            Some(&chat)
        }
        (None, false) => None,
    };
    let ex_cfg = cfg.extraction();

    let results: Vec<Result<_, ExtractError>> = thread_pool(cfg.jobs)?.install(|| {
        docs.par_iter()
            .map(|doc| {
                let grounder = grounder.map(|g| g as &dyn Grounder);
                Extractor::new(schema, &templates, &chat, grounder, ex_cfg).extract_document(doc)
            })
            .collect()
    });

    let mut records = Vec::with_capacity(docs.len());
    let mut failures = Vec::new();
    let mut backend_failure = false;
    for (doc, result) in docs.iter().zip(results) {
        match result {
            Ok(x) => {
                manifest.documents.push(DocumentCalls {
                    doc_id: x.doc_id.clone(),
                    chat_calls: x.chat_calls,
                    ground_calls: x.ground_calls,
                    events: x.events.len(),
                    error: None,
                });
                records.push(x.to_record());
            }
            Err(e) => {
                log::error!("{e}");
                backend_failure |= matches!(e, ExtractError::Backend { .. });
                manifest.documents.push(DocumentCalls {
                    doc_id: doc.id.clone(),
                    chat_calls: 0,
                    ground_calls: 0,
                    events: 0,
                    error: Some(e.to_string()),
                });
                records.push(DocumentRecord {
                    doc_id: doc.id.clone(),
                    image: Some(doc.image.clone()),
                    events: Vec::new(),
                    diagnostics: vec![format!("error: {e}")],
                });
                failures.push(e.to_string());
            }
        }
    }
    files::write_jsonl(&a.out, &records)?;
    let events: usize = records.iter().map(|r| r.events.len()).sum();
    let chat_calls: usize = manifest.documents.iter().map(|d| d.chat_calls).sum();
    let ground_calls: usize = manifest.documents.iter().map(|d| d.ground_calls).sum();
    manifest.counts = BTreeMap::from([
        ("documents".into(), records.len()),
        ("events".into(), events),
        ("failed_documents".into(), failures.len()),
        ("chat_calls".into(), chat_calls),
        ("ground_calls".into(), ground_calls),
    ]);
    manifest.output("extraction", &a.out);
    let manifest_path = a
        .manifest
        .clone()
        .unwrap_or_else(|| with_suffix(&a.out, ".manifest.json"));
    manifest.output("manifest", &manifest_path);
    write_manifest(&manifest_path, &mut manifest)?;
    log::info!("{} documents, {events} events, {chat_calls} chat calls", records.len());

    if failures.is_empty() {
        return Ok(());
    }
    let summary = format!(
        "{} of {} documents failed; first: {}",
        failures.len(),
        records.len(),
        failures[0]
    );
    Err(if backend_failure {
        CliError::Backend(summary)
    } else {
        CliError::Input(summary)
    })
}

fn prf_row(out: &mut String, name: &str, m: &Prf) {
    let _ = writeln!(
        out,
        "{name:<28} {:>7.4} {:>7.4} {:>7.4} {:>6} {:>6} {:>6}",
        m.p, m.r, m.f1, m.tp, m.fp, m.fn_
    );
}

/// Plain-text P/R/F1 table of a report.
pub fn format_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<28} {:>7} {:>7} {:>7} {:>6} {:>6} {:>6}",
        "", "P", "R", "F1", "TP", "FP", "FN"
    );
    prf_row(&mut out, "MED", &report.med);
    prf_row(&mut out, "MEAE", &report.meae);
    for (ty, b) in &report.per_type {
        prf_row(&mut out, &format!("  {ty} MED"), &b.med);
        prf_row(&mut out, &format!("  {ty} MEAE"), &b.meae);
    }
    out
}

pub fn cmd_eval(a: &EvalArgs) -> Result<(), CliError> {
    let preds: Vec<DocumentRecord> = files::read_jsonl(&a.pred)?;
    let golds: Vec<DocumentRecord> = files::read_jsonl(&a.gold)?;
    let (report, ledger) = evaluate_corpus(&preds, &golds).map_err(|e| CliError::Input(e.to_string()))?;
    debug_assert!(ledger.is_one_to_one());
    files::write_json(&a.out, &report)?;
    let mut manifest = RunManifest::start("eval");
    manifest.input("pred", &a.pred);
    manifest.input("gold", &a.gold);
    manifest.output("report", &a.out);
    if let Some(path) = &a.ledger {
        files::write_jsonl(path, &ledger.records)?;
        manifest.output("ledger", path);
    }
    manifest.counts = BTreeMap::from([
        ("documents".into(), report.documents),
        ("ledger_records".into(), ledger.records.len()),
    ]);
    let manifest_path = with_suffix(&a.out, ".manifest.json");
    manifest.output("manifest", &manifest_path);
    write_manifest(&manifest_path, &mut manifest)?;
    print!("{}", format_report(&report));
    Ok(())
}

fn dataset_error(e: DatasetError) -> CliError {
    match e {
        DatasetError::Backend { .. } => CliError::Backend(e.to_string()),
        _ => CliError::Input(e.to_string()),
    }
}

pub fn cmd_dataset_build(a: &BuildArgs) -> Result<(), CliError> {
    let cfg = resolve_config(a.config.as_deref(), FileConfig::default())?;
    let loaded = files::load_schema(&a.schema)?;
    let mapping = files::load_mapping(&a.mapping, &loaded.schema)?;
    let sentences: Vec<AnnotatedSentence> = files::read_jsonl(&a.sentences)?;
    let images: Vec<AnnotatedImage> = files::read_jsonl(&a.images)?;
    let (embedder, embedder_id) = open_backend(&a.embedder, &cfg)?;

    let (samples, report) =
        build_weak_alignments(&sentences, &images, &mapping.types, &mapping.tags, &embedder).map_err(dataset_error)?;
    for skip in &report.skipped {
        log::info!("skipped {}: {}", skip.sentence_id, skip.reason);
    }
    files::write_jsonl(&a.out, &samples)?;
    let report_path = a.report.clone().unwrap_or_else(|| with_suffix(&a.out, ".report.json"));
    files::write_json(&report_path, &report)?;

    let mut manifest = RunManifest::start("dataset build");
    manifest.config = serde_json::to_value(&cfg).expect("config serializes");
    manifest.schema_sha256 = Some(loaded.sha256);
    manifest.backends.insert("embed".into(), embedder_id);
    manifest.input("sentences", &a.sentences);
    manifest.input("images", &a.images);
    manifest.input("mapping", &a.mapping);
    manifest.input("schema", &a.schema);
    manifest.output("alignments", &a.out);
    manifest.output("report", &report_path);
    manifest.counts = BTreeMap::from([
        ("sentences".into(), sentences.len()),
        ("images".into(), images.len()),
        ("in_schema".into(), report.in_schema),
        ("aligned".into(), report.aligned),
        ("skipped".into(), report.skipped.len()),
    ]);
    let manifest_path = with_suffix(&a.out, ".manifest.json");
    manifest.output("manifest", &manifest_path);
    write_manifest(&manifest_path, &mut manifest)?;
    println!(
        "aligned {} of {} in-schema sentences ({} skipped)",
        report.aligned,
        report.in_schema,
        report.skipped.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct EmitCounts<'a> {
    etsgp: usize,
    arsgp: usize,
    warnings: &'a [mee_core::dataset::EmissionWarning],
}

pub fn cmd_dataset_emit(a: &EmitArgs) -> Result<(), CliError> {
    let cfg = resolve_config(
        a.config.as_deref(),
        FileConfig {
            templates: a.templates.clone(),
            ..FileConfig::default()
        },
    )?;
    let loaded = files::load_schema(&a.schema)?;
    let schema = &loaded.schema;
    let LoadedMapping { tags, roles, .. } = match &a.mapping {
        Some(p) => files::load_mapping(p, schema)?,
        None => LoadedMapping {
            tags: SourceTags::default(),
            types: mee_core::SchemaMapping::new(Vec::new(), schema).expect("empty mapping is valid"),
            roles: RoleMapping::new(Vec::new(), schema).expect("empty mapping is valid"),
        },
    };
    let templates = load_templates(cfg.templates.as_deref())?;
    let samples: Vec<WeaklyAlignedSample> = files::read_jsonl(&a.alignments)?;
    let (captioner, captioner_id) = open_backend(&a.captioner, &cfg)?;
    let builder = InstructionBuilder {
        schema,
        roles: &roles,
        tags: &tags,
        templates: &templates,
        captioner: &captioner,
    };
    let set = builder.build(&samples).map_err(dataset_error)?;
    for w in &set.warnings {
        log::warn!("{}: {}", w.sample_id, w.message);
    }
    let etsgp_path = a.out_dir.join("etsgp.jsonl");
    let arsgp_path = a.out_dir.join("arsgp.jsonl");
    let counts_path = a.out_dir.join("counts.json");
    files::write_jsonl(&etsgp_path, &set.etsgp)?;
    files::write_jsonl(&arsgp_path, &set.arsgp)?;
    files::write_json(
        &counts_path,
        &EmitCounts {
            etsgp: set.etsgp.len(),
            arsgp: set.arsgp.len(),
            warnings: &set.warnings,
        },
    )?;

    let mut manifest = RunManifest::start("dataset emit");
    manifest.config = serde_json::to_value(&cfg).expect("config serializes");
    manifest.schema_sha256 = Some(loaded.sha256.clone());
    manifest.backends.insert("caption".into(), captioner_id);
    manifest.input("alignments", &a.alignments);
    manifest.input("schema", &a.schema);
    if let Some(p) = &a.mapping {
        manifest.input("mapping", p);
    }
    manifest.output("etsgp", &etsgp_path);
    manifest.output("arsgp", &arsgp_path);
    manifest.output("counts", &counts_path);
    manifest.counts = BTreeMap::from([
        ("samples".into(), samples.len()),
        ("etsgp".into(), set.etsgp.len()),
        ("arsgp".into(), set.arsgp.len()),
        ("warnings".into(), set.warnings.len()),
    ]);
    let manifest_path = a.out_dir.join("manifest.json");
    manifest.output("manifest", &manifest_path);
    write_manifest(&manifest_path, &mut manifest)?;
    println!(
        "emitted {} etsgp and {} arsgp records",
        set.etsgp.len(),
        set.arsgp.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct OverlayIndexEntry<'a> {
    doc_id: &'a str,
    file: String,
    boxes: usize,
}

pub fn cmd_visualize(a: &VisualizeArgs) -> Result<(), CliError> {
    let preds: Vec<DocumentRecord> = files::read_jsonl(&a.extraction)?;
    let golds: Option<Vec<DocumentRecord>> = a.gold.as_deref().map(files::read_jsonl).transpose()?;
    let overlays = build_overlays(&preds, golds.as_deref());
    let mut used = BTreeSet::new();
    let mut index = Vec::with_capacity(overlays.len());
    for o in &overlays {
        let stem = file_stem(&o.doc_id);
        let mut name = format!("{stem}.json");
        let mut n = 1;
        while !used.insert(name.clone()) || name == "index.json" || name == "manifest.json" {
            n += 1;
            name = format!("{stem}-{n}.json");
        }
        files::write_json(&a.out_dir.join(&name), o)?;
        index.push(OverlayIndexEntry {
            doc_id: &o.doc_id,
            file: name,
            boxes: o.boxes.len(),
        });
    }
    let index_path = a.out_dir.join("index.json");
    files::write_json(&index_path, &index)?;

    let mut manifest = RunManifest::start("visualize");
    manifest.input("extraction", &a.extraction);
    if let Some(g) = &a.gold {
        manifest.input("gold", g);
    }
    manifest.output("index", &index_path);
    manifest.counts = BTreeMap::from([
        ("overlays".into(), overlays.len()),
        ("boxes".into(), overlays.iter().map(|o| o.boxes.len()).sum()),
    ]);
    let manifest_path = a.out_dir.join("manifest.json");
    manifest.output("manifest", &manifest_path);
    write_manifest(&manifest_path, &mut manifest)?;
    println!("wrote {} overlays to {}", overlays.len(), a.out_dir.display());
    Ok(())
}
