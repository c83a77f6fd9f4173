//! `vulnchunk`: build labeled code chunk datasets from advisories and score
//! classifier predictions against them.

mod config;

use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use vulnchunk_core::chunker::find_function_code_chunk;
use vulnchunk_core::genericize::Backend;
use vulnchunk_core::ingest::{self, Candidate, Fetcher, RemoteConfig};
use vulnchunk_core::labeler::{
    build_recipe, derive_generic, derived_stats, recipe_spec, BuildOptions, LabelSource, LabeledSample, RecipeStats,
};
use vulnchunk_core::metrics::{self, ConfusionCounts, SplitItem, SplitScheme};
use vulnchunk_core::oracle::{HttpBackend, MockBackend, OracleBackend, OracleClient, RetryPolicy};

use config::Config;

const SWEEP_VALUES: &str = "1,3,5,7,9,10,15,20,25";

#[derive(Parser)]
#[command(name = "vulnchunk", version, about = "Function-level code chunk vulnerability datasets")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read OSV advisories, fetch fix diffs and write candidate hunks.
    Ingest(IngestArgs),
    /// Label candidates and write one dataset recipe.
    BuildDataset(BuildArgs),
    /// Score a prediction file against a dataset.
    Evaluate(EvaluateArgs),
    /// Rebuild chunks for several extension widths and report their sizes.
    SweepN(SweepArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    osv_dir: PathBuf,
    #[arg(long)]
    cache_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Fetch missing diffs and files over the network, writing them through
    /// to the cache.
    #[arg(long)]
    remote: bool,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
    recipe: u8,
    #[arg(long)]
    candidates: Option<PathBuf>,
    /// `mock:SCRIPT.jsonl` or `http` (endpoint from the config file).
    #[arg(long)]
    oracle: Option<String>,
    /// Base recipe output for recipes 3 and 4.
    #[arg(long)]
    from: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Genericizer::Rule)]
    genericizer: Genericizer,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Genericizer {
    Rule,
    Llm,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// `all`, `holdout`, `kfold[:K]` or `by-project[:HELD_OUT]`.
    #[arg(long, default_value = "all")]
    scheme: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write `{per_fold, mean, std}` as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    candidates: PathBuf,
    #[arg(long, default_value = SWEEP_VALUES, value_delimiter = ',')]
    values: Vec<usize>,
    /// Also build this recipe per width (needs an oracle).
    #[arg(long, default_value_t = 2)]
    recipe: u8,
    #[arg(long)]
    oracle: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Write each rebuilt dataset as `n{N}.jsonl` here.
    #[arg(long)]
    datasets_dir: Option<PathBuf>,
    /// Score `n{N}.jsonl` prediction files from here.
    #[arg(long)]
    predictions_dir: Option<PathBuf>,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// An error with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { code: 1, error: e.into() }
    }
}

const EXIT_USAGE: u8 = 2;
const EXIT_ORACLE: u8 = 3;
const EXIT_RECIPE_INPUT: u8 = 4;
const EXIT_UNMATCHED: u8 = 5;

fn fail(code: u8) -> impl Fn(anyhow::Error) -> Failure {
    move |error| Failure { code, error }
}

type Result<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = Config::load(cli.config.as_deref()).map_err(fail(EXIT_USAGE))?;
    match cli.command {
        Command::Ingest(a) => cmd_ingest(a, &cfg),
        Command::BuildDataset(a) => cmd_build(a, &cfg),
        Command::Evaluate(a) => cmd_evaluate(a, &cfg),
        Command::SweepN(a) => cmd_sweep(a, &cfg),
    }
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = create(path)?;
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn stats_path(out: &Path) -> PathBuf {
    out.with_extension("stats.json")
}

fn pool(jobs: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?)
}

fn cmd_ingest(a: IngestArgs, cfg: &Config) -> Result<()> {
    let (records, file_errors) = ingest::load_osv_dir(&a.osv_dir)
        .map_err(anyhow::Error::from)
        .map_err(fail(EXIT_USAGE))?;
    for e in &file_errors {
        eprintln!("warning: skipping {}: {}", e.path, e.message);
    }
    if records.is_empty() {
        eprintln!("warning: no advisories in {}", a.osv_dir.display());
    }
    let remote = a.remote || cfg.fetch.remote.unwrap_or(false);
    let fetcher = if remote {
        let defaults = RemoteConfig::default();
        Fetcher::remote(
            &a.cache_dir,
            RemoteConfig {
                diff_url: cfg.fetch.diff_url.clone().unwrap_or(defaults.diff_url),
                file_url: cfg.fetch.file_url.clone().unwrap_or(defaults.file_url),
                timeout_secs: cfg.fetch.timeout_secs.unwrap_or(defaults.timeout_secs),
            },
        )
        .map_err(anyhow::Error::from)?
    } else {
        Fetcher::local(&a.cache_dir)
    };
    let jobs = a.jobs.or(cfg.jobs).unwrap_or(1);
    let outcomes: Vec<_> =
        pool(jobs)?.install(|| records.par_iter().map(|r| ingest::ingest_record(r, &fetcher)).collect());
    let mut candidates = Vec::new();
    let mut skips = Vec::new();
    for o in outcomes {
        candidates.extend(o.candidates);
        skips.extend(o.skips);
    }
    write_jsonl(&a.out, &candidates)?;
    write_jsonl(&a.out.with_extension("skips.jsonl"), &skips)?;

    let total = records.len();
    let single = ingest::single_commit_count(&records);
    let pct = if total == 0 { 0.0 } else { 100.0 * single as f64 / total as f64 };
    println!("advisories: {total} ({} unreadable files)", file_errors.len());
    println!("single-commit advisories: {single} of {total} ({pct:.2}%)");
    println!("candidates: {}", candidates.len());
    println!("skipped: {}", skips.len());
    Ok(())
}

fn make_client(spec: Option<&str>, cfg: &Config) -> Result<OracleClient> {
    let oracle_err = fail(EXIT_ORACLE);
    let spec = spec
        .or(cfg.oracle.backend.as_deref())
        .ok_or_else(|| oracle_err(anyhow!("no oracle configured; pass --oracle mock:FILE or --oracle http")))?;
    let o = &cfg.oracle;
    let (backend, default_backoff): (Arc<dyn OracleBackend>, u64) = if let Some(path) = spec.strip_prefix("mock:") {
        let mock = MockBackend::from_jsonl(Path::new(path)).map_err(|e| oracle_err(e.into()))?;
        (Arc::new(mock), 0)
    } else if spec == "http" {
        let url = o
            .url
            .as_deref()
            .ok_or_else(|| oracle_err(anyhow!("the http oracle needs `url` under [oracle] in the config")))?;
        let model = o.model.as_deref().unwrap_or("default");
        let timeout = Duration::from_secs(o.timeout_secs.unwrap_or(60));
        let http = HttpBackend::new(url, model, timeout).map_err(|e| oracle_err(e.into()))?;
        (Arc::new(http), 500)
    } else {
        return Err(oracle_err(anyhow!("unknown oracle `{spec}`; expected mock:FILE or http")));
    };
    let retry = RetryPolicy {
        max_attempts: o.max_attempts.unwrap_or(3),
        backoff: Duration::from_millis(o.backoff_ms.unwrap_or(default_backoff)),
    };
    let mut client = OracleClient::new(backend, retry).with_max_in_flight(o.max_in_flight.unwrap_or(8));
    if let Some(rpm) = o.requests_per_minute {
        client = client.with_rate_limit(rpm);
    }
    if let Some(dir) = &o.cache_dir {
        client = client.with_cache(dir.clone());
    }
    Ok(client)
}

fn build_options(n: Option<usize>, seed: Option<u64>, jobs: Option<usize>, cfg: &Config) -> BuildOptions {
    let d = BuildOptions::default();
    BuildOptions {
        n: n.or(cfg.n).unwrap_or(d.n),
        seed: seed.or(cfg.seed).unwrap_or(d.seed),
        jobs: jobs.or(cfg.jobs).unwrap_or(d.jobs),
    }
}

fn read_candidates(path: Option<&Path>) -> Result<Vec<Candidate>> {
    let path = path.ok_or_else(|| fail(EXIT_USAGE)(anyhow!("--candidates is required for this recipe")))?;
    read_jsonl(path).map_err(fail(EXIT_USAGE))
}

fn cmd_build(a: BuildArgs, cfg: &Config) -> Result<()> {
    let spec = recipe_spec(a.recipe).map_err(|e| fail(EXIT_USAGE)(e.into()))?;
    let opts = build_options(a.n, a.seed, a.jobs, cfg);
    let (samples, stats) = match spec.source {
        LabelSource::Derived { base } => {
            let missing = || {
                fail(EXIT_RECIPE_INPUT)(anyhow!(
                    "recipe {} is derived from recipe {base}; pass its output with --from",
                    a.recipe
                ))
            };
            let from = a.from.as_deref().filter(|p| p.is_file()).ok_or_else(missing)?;
            let base_samples: Vec<LabeledSample> = read_jsonl(from).map_err(fail(EXIT_USAGE))?;
            let base_stats: Option<RecipeStats> = fs::read_to_string(stats_path(from))
                .ok()
                .and_then(|t| serde_json::from_str(&t).ok());
            let client;
            let backend = match a.genericizer {
                Genericizer::Rule => Backend::RuleBased,
                Genericizer::Llm => {
                    client = make_client(a.oracle.as_deref(), cfg)?;
                    Backend::Llm(&client)
                }
            };
            let samples = derive_generic(a.recipe, Some(&base_samples), &backend)
                .map_err(|e| fail(EXIT_USAGE)(e.into()))?;
            let stats = derived_stats(base_stats, &samples);
            (samples, stats)
        }
        LabelSource::OracleAndPatch | LabelSource::OracleOnly => {
            let candidates = read_candidates(a.candidates.as_deref())?;
            let client = make_client(a.oracle.as_deref(), cfg)?;
            let out = build_recipe(a.recipe, &candidates, &client, &opts)?;
            (out.samples, out.stats)
        }
    };
    write_jsonl(&a.out, &samples)?;
    write_json(&stats_path(&a.out), &stats)?;
    let positives = samples.iter().filter(|s| s.label == 1).count();
    println!(
        "recipe {}: {} samples ({} vulnerable, {} non-vulnerable)",
        a.recipe,
        samples.len(),
        positives,
        samples.len() - positives
    );
    println!(
        "labeling units: {} total, {} vulnerable, {} unknown, {} skipped",
        stats.total, stats.vulnerable, stats.unknown, stats.skipped
    );
    Ok(())
}

#[derive(Deserialize)]
struct Prediction {
    sample_id: String,
    predicted_label: u8,
    #[serde(default)]
    #[allow(dead_code)]
    score: Option<f64>,
}

struct Joined<'a> {
    sample: &'a LabeledSample,
    predicted: u8,
}

impl SplitItem for Joined<'_> {
    fn label(&self) -> u8 {
        self.sample.label
    }

    fn project_id(&self) -> Option<&str> {
        Some(self.sample.provenance.project_id.as_str())
    }
}

fn parse_scheme(s: &str) -> anyhow::Result<Option<SplitScheme>> {
    let norm = s.trim().to_ascii_lowercase().replace('_', "-");
    let (name, arg) = match norm.split_once(':') {
        Some((n, a)) => (n.to_owned(), Some(a.parse::<usize>().with_context(|| format!("scheme `{s}`"))?)),
        None => (norm.clone(), None),
    };
    Ok(match (name.as_str(), arg) {
        ("all" | "none", None) => None,
        ("holdout" | "holdout-80-20", None) => Some(SplitScheme::HOLDOUT_80_20),
        ("kfold", k) => Some(SplitScheme::KFold(k.unwrap_or(5))),
        ("by-project", h) => Some(SplitScheme::ByProject { holdout: h.unwrap_or(1) }),
        _ => return Err(anyhow!("unknown scheme `{s}`; expected all, holdout, kfold[:K] or by-project[:N]")),
    })
}

/// Join predictions to labels by sample_id; returns the joined rows and
/// every id present on only one side.
fn join<'a>(samples: &'a [LabeledSample], predictions: &[Prediction]) -> (Vec<Joined<'a>>, BTreeSet<String>) {
    let by_id: HashMap<&str, u8> = predictions
        .iter()
        .map(|p| (p.sample_id.as_str(), p.predicted_label))
        .collect();
    let known: BTreeSet<&str> = samples.iter().map(|s| s.sample_id.as_str()).collect();
    let mut unmatched: BTreeSet<String> = predictions
        .iter()
        .filter(|p| !known.contains(p.sample_id.as_str()))
        .map(|p| p.sample_id.clone())
        .collect();
    let mut joined = Vec::new();
    for s in samples {
        match by_id.get(s.sample_id.as_str()) {
            Some(&predicted) => joined.push(Joined { sample: s, predicted }),
            None => {
                unmatched.insert(s.sample_id.clone());
            }
        }
    }
    (joined, unmatched)
}

fn counts(rows: &[Joined<'_>], indices: impl IntoIterator<Item = usize>) -> ConfusionCounts {
    ConfusionCounts::from_pairs(indices.into_iter().map(|i| (rows[i].predicted, rows[i].sample.label)))
}

fn report_unmatched(unmatched: &BTreeSet<String>) -> Result<()> {
    if unmatched.is_empty() {
        return Ok(());
    }
    for id in unmatched.iter().take(20) {
        eprintln!("unmatched sample_id: {id}");
    }
    if unmatched.len() > 20 {
        eprintln!("... and {} more", unmatched.len() - 20);
    }
    Err(fail(EXIT_UNMATCHED)(anyhow!(
        "{} sample ids appear in only one of the prediction and dataset files",
        unmatched.len()
    )))
}

fn cmd_evaluate(a: EvaluateArgs, cfg: &Config) -> Result<()> {
    let scheme = parse_scheme(&a.scheme).map_err(fail(EXIT_USAGE))?;
    let samples: Vec<LabeledSample> = read_jsonl(&a.dataset).map_err(fail(EXIT_USAGE))?;
    let predictions: Vec<Prediction> = read_jsonl(&a.predictions).map_err(fail(EXIT_USAGE))?;
    let (rows, unmatched) = join(&samples, &predictions);
    let folds = match scheme {
        None => vec![(0..rows.len()).collect::<Vec<_>>()],
        Some(s) => metrics::split(&rows, s, a.seed.or(cfg.seed).unwrap_or(0))?
            .into_iter()
            .map(|f| f.test)
            .collect(),
    };
    let per_fold = folds
        .into_par_iter()
        .map(|test| metrics::score(&counts(&rows, test)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let summary = metrics::summarize(per_fold)?;
    print!("{}", metrics::format_table(&summary));
    if let Some(path) = &a.json {
        write_json(path, &summary)?;
    }
    report_unmatched(&unmatched)
}

fn mean(values: impl IntoIterator<Item = usize>) -> f64 {
    let (sum, n) = values.into_iter().fold((0usize, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

fn cmd_sweep(a: SweepArgs, cfg: &Config) -> Result<()> {
    let candidates = read_candidates(Some(&a.candidates))?;
    let client = match a.oracle.as_deref().or(cfg.oracle.backend.as_deref()) {
        Some(oracle) => {
            let recipe = recipe_spec(a.recipe).map_err(|e| fail(EXIT_USAGE)(e.into()))?;
            if matches!(recipe.source, LabelSource::Derived { .. }) {
                return Err(fail(EXIT_USAGE)(anyhow!("sweep-n builds recipes 1, 2, 5 or 6")));
            }
            Some(make_client(Some(oracle), cfg)?)
        }
        None => None,
    };
    let mut header = vec!["n", "candidate_chunks", "mean_chunk_length"];
    if client.is_some() {
        header.extend(["samples", "vulnerable", "non_vulnerable", "mean_sample_length"]);
    }
    if a.predictions_dir.is_some() {
        header.extend(["accuracy", "precision", "recall", "f1", "mcc"]);
    }
    let mut csv = header.join(",") + "\n";
    let mut unmatched = BTreeSet::new();
    for &n in &a.values {
        let lengths: Vec<usize> = candidates
            .par_iter()
            .filter_map(|c| find_function_code_chunk(&c.function_before, &c.hunk, n).ok().flatten())
            .map(|chunk| chunk.len())
            .collect();
        let mut row = vec![n.to_string(), lengths.len().to_string(), format!("{:.4}", mean(lengths))];
        if let Some(client) = &client {
            let opts = build_options(Some(n), a.seed, a.jobs, cfg);
            let out = build_recipe(a.recipe, &candidates, client, &opts)?;
            let positives = out.samples.iter().filter(|s| s.label == 1).count();
            row.extend([
                out.samples.len().to_string(),
                positives.to_string(),
                (out.samples.len() - positives).to_string(),
                format!("{:.4}", mean(out.samples.iter().map(|s| s.chunk_text.lines().count()))),
            ]);
            if let Some(dir) = &a.datasets_dir {
                write_jsonl(&dir.join(format!("n{n}.jsonl")), &out.samples)?;
            }
            if let Some(dir) = &a.predictions_dir {
                let path = dir.join(format!("n{n}.jsonl"));
                let predictions: Vec<Prediction> = read_jsonl(&path).map_err(fail(EXIT_USAGE))?;
                let (rows, missing) = join(&out.samples, &predictions);
                unmatched.extend(missing);
                let s = metrics::score(&counts(&rows, 0..rows.len()))?;
                row.extend([s.accuracy, s.precision, s.recall, s.f1, s.mcc].map(|v| format!("{v:.4}")));
            }
        }
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            w.write_all(csv.as_bytes())?;
            w.flush()?;
        }
        None => print!("{csv}"),
    }
    report_unmatched(&unmatched)
}
