//! `multidedup`: stage-by-stage or one-shot duplicate detection over a
//! posting corpus. Every stage reads and writes artifacts in `--out`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::de::DeserializeOwned;
use serde::Serialize;

use multidedup::config::{Mode, PipelineConfig};
use multidedup::corpus::{corpus_stats, load_postings, write_postings, Format};
use multidedup::dedup::pipeline::{
    embed_texts, index_config, prepare, representatives, run_from_index, run_pipeline, translate_options,
    translate_representatives, Backends, PipelineRun, RepText, RunReport,
};
use multidedup::embed::WordTokenizer;
use multidedup::eval::{
    pseudo_languages, read_results, report_render, score, synth_corpus, write_results, DupPlan, EvalReport, GoldSet,
    ReportFormat, SynthConfig,
};
use multidedup::index::IndexConfig;
use multidedup::translate::BackendKind;
use multidedup::{Error, Fingerprint, Index, Posting};

const POSTINGS: &str = "postings.jsonl";
const CORPUS_STATS: &str = "corpus_stats.json";
const GOLD: &str = "gold.csv";
const DICTIONARY: &str = "dictionary.json";
const CANONICAL: &str = "canonical.jsonl";
const TRANSLATED: &str = "translated.jsonl";
const EMBEDDINGS: &str = "embeddings.pdix";
const INDEX: &str = "index.pdix";
const RESULTS: &str = "results.csv";
const RUN_REPORT: &str = "run_report.json";
const EVAL_REPORT: &str = "eval_report.json";

#[derive(Parser, Debug)]
#[command(name = "multidedup", version, about = "Full, semantic and temporal duplicate detection for multilingual corpora")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// two_step or multilingual.
    #[arg(long, global = true)]
    mode: Option<Mode>,
    /// Neighbours retrieved per record.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Base L2 distance threshold.
    #[arg(long, global = true)]
    theta: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for k-means and the synthetic generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// ASCII-only cleaning, k = 100, θ = 0.25, 384-token limit.
    #[arg(long, global = true)]
    paper_strict: bool,
    /// Artifact directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load a CSV or JSONL corpus, validate it and write postings.jsonl.
    Ingest {
        input: Option<PathBuf>,
        #[arg(long)]
        format: Option<Format>,
    },
    /// Clean texts and write canonical.jsonl.
    Normalize,
    /// Translate group representatives to English (two_step mode).
    Translate,
    /// Embed translated texts into embeddings.pdix.
    Embed,
    /// Build the search index from embeddings.pdix.
    Index,
    /// Detect duplicates and write results.csv and run_report.json.
    Dedup {
        /// Reuse translated.jsonl and index.pdix from earlier stages.
        #[arg(long)]
        staged: bool,
    },
    /// Score results.csv against a gold file.
    Eval {
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// Generate a synthetic multilingual corpus with planted duplicates.
    Synth {
        #[arg(long, default_value_t = 2000)]
        n_base: usize,
        #[arg(long, default_value_t = 3)]
        languages: usize,
        #[arg(long, default_value_t = 0.15)]
        full_rate: f64,
        #[arg(long, default_value_t = 0.15)]
        semantic_rate: f64,
        #[arg(long, default_value_t = 0.10)]
        temporal_rate: f64,
        /// Plant hard pairs only separable by company and location.
        #[arg(long)]
        metadata_signal: bool,
    },
    /// Render the run (and evaluation, if present) report.
    Report {
        #[arg(long, default_value = "text")]
        format: ReportFormat,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .chain()
                .find_map(|c| c.downcast_ref::<Error>())
                .map_or(1, |core| core.kind().exit_code());
            ExitCode::from(code as u8)
        }
    }
}

struct Ctx {
    config: PipelineConfig,
    out: PathBuf,
    seed: Option<u64>,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn postings(&self) -> Result<Vec<Posting>> {
        let path = self.path(POSTINGS);
        load_postings(&path, Format::Jsonl)
            .map_err(Error::from)
            .with_context(|| format!("reading {} (run `ingest` or `synth` first)", path.display()))
    }

    fn backends(&self) -> Result<Backends> {
        Ok(Backends::from_config(&self.config)?)
    }
}

fn load_config(g: &Global) -> Result<PipelineConfig> {
    let mut c = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(m) = g.mode {
        c.mode = m;
    }
    if g.paper_strict {
        c.apply_paper_strict();
    }
    if let Some(k) = g.k {
        c.dedup.k = k;
    }
    if let Some(t) = g.theta {
        c.dedup.base_theta = t;
    }
    if let Some(s) = g.seed {
        c.index.seed = s;
    }
    if let Some(o) = &g.out {
        c.io.output_dir = o.clone();
    }
    if c.mode == Mode::TwoStep && c.translate.backend.is_none() {
        c.translate.backend = Some(BackendKind::Dictionary {
            path: c.io.output_dir.join(DICTIONARY),
        });
    }
    Ok(c)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let config = load_config(&cli.global)?;
    let ctx = Ctx {
        out: config.io.output_dir.clone(),
        config,
        seed: cli.global.seed,
    };
    fs::create_dir_all(&ctx.out).with_context(|| format!("creating {}", ctx.out.display()))?;

    match cli.command {
        Command::Ingest { input, format } => ingest(&ctx, input, format),
        Command::Normalize => normalize(&ctx),
        Command::Translate => translate(&ctx),
        Command::Embed => embed(&ctx),
        Command::Index => index(&ctx),
        Command::Dedup { staged } => dedup(&ctx, staged),
        Command::Eval { gold } => eval(&ctx, gold),
        Command::Synth {
            n_base,
            languages,
            full_rate,
            semantic_rate,
            temporal_rate,
            metadata_signal,
        } => {
            let cfg = SynthConfig {
                n_base,
                plan: DupPlan {
                    full_rate,
                    semantic_rate,
                    temporal_rate,
                },
                seed: ctx.seed.unwrap_or(0),
                metadata_signal,
                dim: ctx.config.embed.dim,
                max_tokens: ctx.config.embed.max_tokens,
                ..Default::default()
            };
            synth(&ctx, &cfg, languages)
        }
        Command::Report { format } => report(&ctx, format),
    }
}

fn ingest(ctx: &Ctx, input: Option<PathBuf>, format: Option<Format>) -> Result<()> {
    let input = input
        .or_else(|| ctx.config.io.input.clone())
        .ok_or_else(|| Error::Config("no input file given (argument or io.input)".into()))?;
    let format = format
        .or(ctx.config.io.format)
        .or_else(|| Format::from_path(&input))
        .ok_or_else(|| Error::Config(format!("cannot infer the format of {}", input.display())))?;
    let postings = load_postings(&input, format).map_err(Error::from)?;
    write_postings(&ctx.path(POSTINGS), &postings, Format::Jsonl).map_err(Error::from)?;
    let stats = corpus_stats(&postings, &WordTokenizer);
    write_json(&ctx.path(CORPUS_STATS), &stats)?;
    info!("ingested {} postings from {}", postings.len(), input.display());
    Ok(())
}

#[derive(Serialize, serde::Deserialize)]
struct CanonicalRecord {
    id: String,
    canonical_text: String,
    fingerprint: Fingerprint,
}

fn normalize(ctx: &Ctx) -> Result<()> {
    let postings = ctx.postings()?;
    let prepared = prepare(&postings, &ctx.config.normalize)?;
    let records: Vec<CanonicalRecord> = prepared
        .canonicals
        .iter()
        .map(|c| CanonicalRecord {
            id: c.source_id.clone(),
            canonical_text: c.text.clone(),
            fingerprint: c.fingerprint,
        })
        .collect();
    write_jsonl(&ctx.path(CANONICAL), &records)?;
    info!(
        "{} postings cleaned into {} distinct texts",
        records.len(),
        prepared.groups.len()
    );
    Ok(())
}

fn translate(ctx: &Ctx) -> Result<()> {
    let postings = ctx.postings()?;
    let prepared = prepare(&postings, &ctx.config.normalize)?;
    let reps = representatives(&prepared);
    let texts = match ctx.config.mode {
        Mode::TwoStep => {
            let backends = ctx.backends()?;
            let t = backends.translator.as_deref().expect("two_step backends carry a translator");
            translate_representatives(&reps, &postings, t, &backends.cache, &translate_options(&ctx.config))?
        }
        Mode::Multilingual => reps,
    };
    write_jsonl(&ctx.path(TRANSLATED), &texts)?;
    info!("{} representative texts written", texts.len());
    Ok(())
}

fn embed(ctx: &Ctx) -> Result<()> {
    let texts: Vec<RepText> = read_jsonl(&ctx.path(TRANSLATED)).context("run `translate` first")?;
    let mut cfg = ctx.config.clone();
    // the embedder is the only backend needed here
    cfg.mode = Mode::Multilingual;
    let backends = Backends::from_config(&cfg)?;
    let (vectors, zeros) = embed_texts(&texts, backends.embedder.as_ref())?;
    if vectors.is_empty() {
        return Err(Error::Data("no text produced a non-empty embedding".into()).into());
    }
    let store = Index::build(&vectors, &IndexConfig::flat(ctx.config.embed.dim))?;
    store.save(&ctx.path(EMBEDDINGS))?;
    info!("embedded {} texts ({} empty, left out)", vectors.len(), zeros);
    Ok(())
}

fn index(ctx: &Ctx) -> Result<()> {
    let store = Index::load(&ctx.path(EMBEDDINGS)).context("run `embed` first")?;
    let index = Index::build(&store.to_vectors(), &index_config(&ctx.config))?;
    index.save(&ctx.path(INDEX))?;
    info!("built {:?} index over {} vectors", index.kind(), index.len());
    Ok(())
}

fn dedup(ctx: &Ctx, staged: bool) -> Result<()> {
    let postings = ctx.postings()?;
    let run: PipelineRun = if staged {
        let texts: Vec<RepText> = read_jsonl(&ctx.path(TRANSLATED)).context("run `translate` first")?;
        let index = Index::load(&ctx.path(INDEX)).context("run `index` first")?;
        run_from_index(&postings, &ctx.config, &texts, Some(index))?
    } else {
        let backends = ctx.backends()?;
        let run = run_pipeline(&postings, &ctx.config, &backends)?;
        if let Some(ix) = &run.index {
            ix.save(&ctx.path(INDEX))?;
        }
        run
    };
    let file = BufWriter::new(File::create(ctx.path(RESULTS))?);
    write_results(file, &run.pairs)?;
    write_json(&ctx.path(RUN_REPORT), &run.report)?;
    info!(
        "{} duplicate pairs from {} candidates",
        run.pairs.len(),
        run.report.comparisons.candidate_pairs
    );
    Ok(())
}

fn eval(ctx: &Ctx, gold: Option<PathBuf>) -> Result<()> {
    let gold_path = gold.unwrap_or_else(|| ctx.path(GOLD));
    let gold = GoldSet::load(&gold_path).with_context(|| format!("reading {}", gold_path.display()))?;
    let results = File::open(ctx.path(RESULTS))
        .map_err(|e| Error::Data(format!("{}: {e}", ctx.path(RESULTS).display())))
        .context("run `dedup` first")?;
    let pairs = read_results(BufReader::new(results))?;
    let report = score(&pairs, &gold)?;
    write_json(&ctx.path(EVAL_REPORT), &report)?;
    for (name, c) in [("FULL", &report.full), ("SEMANTIC", &report.semantic), ("TEMPORAL", &report.temporal)] {
        println!("{name:<9} P {:.4}  R {:.4}  F1 {:.4}", c.precision, c.recall, c.f1);
    }
    println!("macro F1  {:.4}", report.macro_f1);
    Ok(())
}

fn synth(ctx: &Ctx, cfg: &SynthConfig, n_languages: usize) -> Result<()> {
    let corpus = synth_corpus(cfg, &pseudo_languages(n_languages))?;
    write_postings(&ctx.path(POSTINGS), &corpus.postings, Format::Jsonl).map_err(Error::from)?;
    corpus.gold.save(&ctx.path(GOLD))?;
    write_json(&ctx.path(DICTIONARY), &corpus.dictionary)?;
    write_json(&ctx.path(CORPUS_STATS), &corpus_stats(&corpus.postings, &WordTokenizer))?;
    info!(
        "generated {} postings with {} gold pairs",
        corpus.postings.len(),
        corpus.gold.len()
    );
    Ok(())
}

fn report(ctx: &Ctx, format: ReportFormat) -> Result<()> {
    let run: RunReport = read_json(&ctx.path(RUN_REPORT)).context("run `dedup` first")?;
    let eval_path = ctx.path(EVAL_REPORT);
    let eval: Option<EvalReport> = if eval_path.exists() {
        Some(read_json(&eval_path)?)
    } else {
        None
    };
    let text = report_render(&run, eval.as_ref(), format);
    let name = match format {
        ReportFormat::Text => "report.txt",
        ReportFormat::Json => "report.json",
    };
    fs::write(ctx.path(name), &text)?;
    print!("{text}");
    Ok(())
}

fn data_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Data(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| data_err(path, e))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| data_err(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file)).map_err(|e| data_err(path, e))?)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| data_err(path, e))?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| data_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| data_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| data_err(path, format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}
