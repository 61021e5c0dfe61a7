use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::Serialize;
use sgd_core::bundled;
use sgd_core::corpus::{load_dialogues, strip_annotations, validate_dialogue, CorpusError, Dialogue};
use sgd_core::engine::{load_entities, EntityError, EntityTable};
use sgd_core::json::Strictness;
use sgd_core::metrics::{evaluate, load_hypotheses, serialize_hypotheses};
use sgd_core::schema::{load_schemas, validate_collection, SchemaError, SchemaSet};
use sgd_core::sim::{generate_corpus, write_corpus, AutomatonConfig, CorpusOptions, TemplateSet, SHARD_SIZE};
use sgd_core::stats::{compute_stats, render_histograms};
use sgd_core::tracker::{oracle_track, track_corpus};
use sgd_core::validation::ValidationReport;

use crate::manifest::{digest_file, RunManifest};
use crate::{EvaluateArgs, ReportFormat, SchemaValidateArgs, SimulateArgs, StatsArgs, TrackArgs};

/// Input that was read but is not acceptable; exits with status 1.
#[derive(Debug)]
pub struct InvalidInput(pub String);

impl fmt::Display for InvalidInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InvalidInput {}

fn invalid(message: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(InvalidInput(message.into()))
}

fn strictness(lenient: bool) -> Strictness {
    if lenient {
        Strictness::Lenient
    } else {
        Strictness::Strict
    }
}

fn print_issues(label: &str, report: &ValidationReport) {
    for e in &report.errors {
        eprintln!("error: {label}: {e}");
    }
    for w in &report.warnings {
        eprintln!("warning: {label}: {w}");
    }
}

fn schema_error(e: SchemaError) -> anyhow::Error {
    match e {
        SchemaError::Io { .. } => anyhow::Error::new(e),
        other => invalid(other.to_string()),
    }
}

fn corpus_error(e: CorpusError) -> anyhow::Error {
    match e {
        CorpusError::Parse { .. } => invalid(e.to_string()),
        other => anyhow::Error::new(other),
    }
}

/// Loads and validates a schema collection.
fn load_schema_set(path: &Path, lenient: bool) -> Result<SchemaSet> {
    let parsed = load_schemas(path, strictness(lenient)).map_err(schema_error)?;
    for w in &parsed.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    let report = validate_collection(&parsed.value);
    print_issues(&path.display().to_string(), &report);
    if !report.is_ok() {
        return Err(invalid(format!("{}: schema validation failed", path.display())));
    }
    Ok(SchemaSet::new(parsed.value))
}

fn load_corpus(path: &Path, lenient: bool) -> Result<Vec<Dialogue>> {
    let parsed = load_dialogues(path, strictness(lenient)).map_err(corpus_error)?;
    for w in &parsed.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(parsed.value)
}

/// Rejects a corpus with dialogue validation errors, printing up to 20.
fn check_corpus(dialogues: &[Dialogue], schemas: &SchemaSet, path: &Path) -> Result<()> {
    let mut failed = 0;
    for d in dialogues {
        let report = validate_dialogue(d, schemas);
        if !report.is_ok() {
            failed += 1;
            if failed <= 20 {
                print_issues(&d.dialogue_id, &report);
            }
        }
    }
    if failed > 0 {
        return Err(invalid(format!("{}: {failed} dialogues failed validation", path.display())));
    }
    Ok(())
}

fn load_tables(path: &Path, schemas: &SchemaSet) -> Result<BTreeMap<String, EntityTable>> {
    load_entities(path, schemas).map_err(|e| match e {
        EntityError::Io { .. } => anyhow::Error::new(e),
        other => invalid(other.to_string()),
    })
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Newline-delimited service names; blank lines and `#` comments are skipped.
fn read_service_list(path: &Path) -> Result<BTreeSet<String>> {
    Ok(read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .context("cannot start worker pool")
}

fn write(path: &Path, bytes: &[u8]) -> Result<PathBuf> {
    std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path.to_path_buf())
}

fn pretty<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

#[derive(Serialize)]
struct FileReport {
    path: String,
    services: usize,
    #[serde(flatten)]
    report: ValidationReport,
}

/// Returns whether every file validated.
pub fn schema_validate(args: &SchemaValidateArgs) -> Result<bool> {
    let mut manifest = RunManifest::start("schema-validate");
    let mut files = Vec::new();
    let mut ok = true;
    for path in &args.paths {
        let shown = path.display().to_string();
        let (services, report) = match load_schemas(path, strictness(args.lenient)) {
            Ok(parsed) => {
                let mut report = validate_collection(&parsed.value);
                report.warnings.splice(0..0, parsed.warnings);
                (parsed.value.len(), report)
            }
            Err(SchemaError::Io { path, source }) => return Err(anyhow!("cannot read {path}: {source}")),
            Err(e) => {
                let mut report = ValidationReport::default();
                report.error("", e.to_string());
                (0, report)
            }
        };
        print_issues(&shown, &report);
        println!(
            "{shown}: {} ({} services, {} errors, {} warnings)",
            if report.is_ok() { "ok" } else { "invalid" },
            services,
            report.errors.len(),
            report.warnings.len()
        );
        ok &= report.is_ok();
        manifest.input(path)?;
        files.push(FileReport {
            path: shown,
            services,
            report,
        });
    }
    if let Some(out) = &args.out {
        create_dir(out)?;
        let report = write(&out.join("schema_report.json"), &pretty(&files)?)?;
        manifest.finish(out, &[report])?;
    }
    Ok(ok)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut manifest = RunManifest::start("simulate");
    let schemas = load_schema_set(&args.schemas, false)?;
    let tables = load_tables(&args.entities, &schemas)?;
    let automaton = match &args.automaton {
        Some(p) => AutomatonConfig::from_toml(&read_text(p)?).map_err(|e| invalid(format!("{}: {e}", p.display())))?,
        None => bundled::automaton_config(),
    };
    let templates = match &args.templates {
        Some(p) => TemplateSet::from_toml(&read_text(p)?).map_err(|e| invalid(format!("{}: {e}", p.display())))?,
        None => bundled::templates(),
    };
    let options = CorpusOptions {
        duplicate_quota: args.duplicate_quota,
        ..CorpusOptions::default()
    };
    let corpus = pool(args.jobs)?
        .install(|| generate_corpus(&schemas, &tables, &automaton, &templates, args.num, args.seed, options))
        .map_err(|e| invalid(format!("simulation failed: {e}")))?;
    if corpus.shortfall() > 0 {
        eprintln!(
            "warning: produced {} of {} dialogues ({} duplicate flows rejected, {} attempts failed)",
            corpus.dialogues.len(),
            args.num,
            corpus.duplicate_rejections,
            corpus.failed_attempts
        );
    }
    let written = write_corpus(&args.out, &corpus, &schemas)
        .with_context(|| format!("cannot write corpus to {}", args.out.display()))?;

    manifest.seed = Some(args.seed);
    manifest.jobs = args.jobs;
    manifest.config_hashes = corpus.config_hashes.clone();
    manifest.input(&args.schemas)?;
    manifest.input(&args.entities)?;
    for p in args.automaton.iter().chain(&args.templates) {
        manifest.input(p)?;
    }
    let mut outputs: Vec<PathBuf> = written.shards.iter().map(|s| args.out.join(&s.file)).collect();
    outputs.push(args.out.join(&written.schema_file));
    outputs.push(args.out.join("manifest.json"));
    manifest.finish(&args.out, &outputs)?;
    eprintln!("wrote {} dialogues to {}", corpus.dialogues.len(), args.out.display());
    Ok(())
}

pub fn track(args: &TrackArgs) -> Result<()> {
    let mut manifest = RunManifest::start("track");
    let schemas = load_schema_set(&args.schemas, args.lenient)?;
    let dialogues = load_corpus(&args.data, args.lenient)?;
    let hypotheses = if args.oracle {
        oracle_track(&dialogues)
    } else {
        let tables = match &args.entities {
            Some(p) => load_tables(p, &schemas)?,
            None => BTreeMap::new(),
        };
        let stripped = strip_annotations(&dialogues);
        pool(args.jobs)?.install(|| track_corpus(&stripped, &schemas, &tables))
    };
    create_dir(&args.out)?;
    let mut outputs = Vec::new();
    for (i, chunk) in hypotheses.chunks(SHARD_SIZE).enumerate() {
        let file = args.out.join(format!("dialogues_{:03}.json", i + 1));
        outputs.push(write(&file, &serialize_hypotheses(chunk))?);
    }
    manifest.jobs = args.jobs;
    manifest.input(&args.schemas)?;
    manifest.input(&args.data)?;
    if let Some(p) = &args.entities {
        manifest.input(p)?;
    }
    manifest.finish(&args.out, &outputs)?;
    eprintln!("wrote {} hypothesis dialogues to {}", hypotheses.len(), args.out.display());
    Ok(())
}

pub fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    let mut manifest = RunManifest::start("evaluate");
    let schemas = load_schema_set(&args.schemas, args.lenient)?;
    let refs = load_corpus(&args.reference, args.lenient)?;
    check_corpus(&refs, &schemas, &args.reference)?;
    let hyps = load_hypotheses(&args.hypothesis, strictness(args.lenient))
        .map_err(corpus_error)?
        .value;
    let seen = match &args.seen_services {
        Some(p) => read_service_list(p)?,
        None => BTreeSet::new(),
    };
    let report = pool(args.jobs)?
        .install(|| evaluate(&refs, &hyps, &schemas, &seen))
        .map_err(|e| invalid(e.to_string()))?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    match args.format {
        ReportFormat::Json => print!("{}", String::from_utf8(pretty(&report)?)?),
        ReportFormat::Text => print!("{}", report.to_text()),
    }
    if let Some(out) = &args.out {
        create_dir(out)?;
        let file = write(&out.join("report.json"), &pretty(&report)?)?;
        manifest.jobs = args.jobs;
        manifest.input(&args.schemas)?;
        manifest.input(&args.reference)?;
        manifest.input(&args.hypothesis)?;
        if let Some(p) = &args.seen_services {
            manifest.input(p)?;
        }
        manifest.finish(out, &[file])?;
    }
    Ok(())
}

pub fn stats(args: &StatsArgs) -> Result<()> {
    let mut manifest = RunManifest::start("stats");
    let schemas = load_schema_set(&args.schemas, args.lenient)?;
    let dialogues = load_corpus(&args.data, args.lenient)?;
    let seen = args.seen_services.as_deref().map(read_service_list).transpose()?;
    let domains: BTreeMap<String, String> = match &args.domains {
        Some(p) => serde_json::from_str(&read_text(p)?).map_err(|e| invalid(format!("{}: {e}", p.display())))?,
        None => BTreeMap::new(),
    };
    let report = compute_stats(&dialogues, &schemas, seen.as_ref(), &domains).map_err(|e| invalid(e.to_string()))?;
    let dir = match args.out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    create_dir(&dir)?;
    let mut outputs = vec![write(&args.out, &pretty(&report)?)?];
    for (name, text) in render_histograms(&report) {
        outputs.push(write(&dir.join(name), text.as_bytes())?);
    }
    manifest.input(&args.schemas)?;
    manifest.input(&args.data)?;
    for p in args.seen_services.iter().chain(&args.domains) {
        manifest.input(p)?;
    }
    manifest.finish(&dir, &outputs)?;
    eprintln!(
        "{} dialogues, {} turns; report at {} (sha256 {})",
        report.num_dialogues,
        report.total_turns,
        args.out.display(),
        digest_file(&args.out)?
    );
    Ok(())
}
