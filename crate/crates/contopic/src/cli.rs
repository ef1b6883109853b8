//! Command-line driver.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical divergence during training.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use contopic_core::corpus::{ingest, synth_lda_corpus, Corpus, IngestOptions, SplitRatios, SplitTag, SynthParams};
use contopic_core::eval::{
    build_cooccurrence, competitive_link, covariate_vector, export_latents, topic_report, TopicReport,
    DEFAULT_ALIGN_THRESHOLD,
};
use contopic_core::math::softmax;
use contopic_core::sampler::{
    importance_scores, random_doc_negative, rank_tokens, sample_rng, topic_based_pair, word_based_pair,
    zero_sampling_pair, SamplePair, SamplingStrategy,
};
use contopic_core::train::{run_ablation, sweep_k, train_with_hooks, SweepRow, TrainConfig, DEFAULT_SEEDS};

use crate::config::{self, ConfigError};
use crate::format::{self, sha256_hex, Checkpoint, FormatError};
use crate::output::{alignment_json, latents_csv, MetricsSink};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

/// A malformed command line detected after argument parsing.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Parser, Debug)]
#[command(name = "contopic", version, about = "Contrastive neural topic models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a corpus file from plain text, one document per line.
    Ingest(IngestArgs),
    /// Generate an LDA corpus with known topics.
    Synth(SynthArgs),
    /// Train a model. Any configuration field can be set with `--key value`.
    Train(TrainArgs),
    /// Score a model's topics by NPMI.
    Eval(EvalArgs),
    /// Match the topics of two models by Jensen-Shannon divergence.
    Align(AlignArgs),
    /// Train across values of k and seeds.
    SweepK(SweepArgs),
    /// Train every loss variant across seeds.
    Ablate(AblateArgs),
    /// Welch's t-test on two lists of per-seed scores.
    Sigtest(SigtestArgs),
    /// Write noise-free topic proportions as CSV.
    ExportLatents(ExportArgs),
    /// Show how one document's samples are built.
    SampleInspect(InspectArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

impl SplitArg {
    fn indices(self, corpus: &Corpus) -> Vec<usize> {
        match self {
            SplitArg::Train => corpus.indices(SplitTag::Train),
            SplitArg::Val => corpus.indices(SplitTag::Val),
            SplitArg::Test => corpus.indices(SplitTag::Test),
            SplitArg::All => (0..corpus.len()).collect(),
        }
    }

    fn tag(self) -> Option<SplitTag> {
        match self {
            SplitArg::Train => Some(SplitTag::Train),
            SplitArg::Val => Some(SplitTag::Val),
            SplitArg::Test => Some(SplitTag::Test),
            SplitArg::All => None,
        }
    }
}

#[derive(Args, Debug)]
struct SplitOpts {
    /// Train, validation and test fractions.
    #[arg(long, default_value = "0.48,0.12,0.40")]
    split: String,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// UTF-8 text, one document per line.
    #[arg(long)]
    input: PathBuf,
    /// Integer labels, one per input line; blank lines mean no label.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Stopwords, one per line.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    min_df: u32,
    /// Tokens this short or shorter are removed.
    #[arg(long, default_value_t = 1)]
    min_token_len: usize,
    #[arg(long)]
    max_vocab: Option<usize>,
    #[command(flatten)]
    split: SplitOpts,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    topics: usize,
    #[arg(long, default_value_t = 200)]
    vocab: usize,
    #[arg(long, default_value_t = 2000)]
    docs: usize,
    #[arg(long, default_value_t = 80)]
    doc_len: usize,
    #[arg(long, default_value_t = 0.05)]
    topic_sparsity: f64,
    #[arg(long, default_value_t = 0.2)]
    doc_sparsity: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    split: SplitOpts,
    #[arg(long, short)]
    out: PathBuf,
    /// Also write the true topic-word matrix as JSON.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// JSON configuration; omitted fields keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint to write.
    #[arg(long, short)]
    out: PathBuf,
    /// Metrics as JSON lines.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Record elapsed milliseconds in the metrics (makes logs differ run to run).
    #[arg(long)]
    wall_clock: bool,
    /// Topic report of the trained model.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Reference split for co-occurrence statistics (default: the model's).
    #[arg(long, value_enum)]
    reference: Option<SplitArg>,
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AlignArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALIGN_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    max_pairs: Option<usize>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "k-values", default_value = "1,5,10,15,25,30")]
    k_values: String,
    #[arg(long)]
    seeds: Option<String>,
    /// Rows as JSON.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SigtestArgs {
    /// Comma-separated scores of the first system.
    #[arg(long, allow_hyphen_values = true)]
    a: String,
    #[arg(long, allow_hyphen_values = true)]
    b: String,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    doc: usize,
    /// Substituted-token count (default: the model's).
    #[arg(long)]
    k: Option<usize>,
}

/// Subcommands that accept free-form configuration overrides.
const OVERRIDABLE: [&str; 3] = ["train", "sweep-k", "ablate"];

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<String> = args.into_iter().map(|a| a.into().to_string_lossy().into_owned()).collect();
    let (args, overrides) = match extract_overrides(args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, &overrides) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn extract_overrides(args: Vec<String>) -> Result<config::SplitArgs, ConfigError> {
    let Some(sub) = args.get(1).filter(|s| OVERRIDABLE.contains(&s.as_str())).cloned() else {
        return Ok((args, Vec::new()));
    };
    let cmd = Cli::command();
    let mut reserved: Vec<String> = vec!["help".into()];
    if let Some(sc) = cmd.find_subcommand(&sub) {
        reserved.extend(sc.get_arguments().filter_map(|a| a.get_long().map(String::from)));
    }
    let (mut rest, pairs) = config::split_overrides(&args[2..], &reserved)?;
    let mut out = vec![args[0].clone(), sub];
    out.append(&mut rest);
    Ok((out, pairs))
}

/// Maps an error to its exit code by inspecting the cause chain.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use contopic_core::Error as CoreError;
    let core_code = |e: &CoreError| match e {
        CoreError::Divergence { .. } => Some(EXIT_DIVERGENCE),
        CoreError::InvalidConfig(_) => Some(EXIT_USAGE),
        _ => None,
    };
    for cause in err.chain() {
        if let Some(code) = cause.downcast_ref::<CoreError>().and_then(core_code) {
            return code;
        }
        if let Some(FormatError::Core(e)) = cause.downcast_ref::<FormatError>() {
            if let Some(code) = core_code(e) {
                return code;
            }
        }
        if cause.is::<ConfigError>() || cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
    }
    EXIT_DATA
}

fn dispatch(cmd: Command, overrides: &[(String, String)]) -> anyhow::Result<()> {
    match cmd {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a, overrides),
        Command::Eval(a) => cmd_eval(a),
        Command::Align(a) => cmd_align(a),
        Command::SweepK(a) => cmd_sweep(a, overrides),
        Command::Ablate(a) => cmd_ablate(a, overrides),
        Command::Sigtest(a) => cmd_sigtest(a),
        Command::ExportLatents(a) => cmd_export(a),
        Command::SampleInspect(a) => cmd_inspect(a),
    }
}

fn parse_list<T: std::str::FromStr>(what: &str, text: &str) -> Result<Vec<T>, UsageError> {
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| UsageError(format!("{what}: cannot parse {s:?}"))))
        .collect()
}

fn parse_ratios(opts: &SplitOpts) -> Result<SplitRatios, UsageError> {
    match parse_list::<f64>("--split", &opts.split)?.as_slice() {
        &[a, b, c] => Ok(SplitRatios::new(a, b, c)),
        _ => Err(UsageError("--split takes three comma-separated fractions".into())),
    }
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_or_print(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => format::write_file(p, text.as_bytes())?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn cmd_ingest(a: IngestArgs) -> anyhow::Result<()> {
    let text = read_text(&a.input)?;
    let docs: Vec<&str> = text.lines().collect();
    let labels = match &a.labels {
        Some(p) => {
            let raw = read_text(p)?;
            let labels: Vec<Option<u32>> = raw
                .lines()
                .map(|l| match l.trim() {
                    "" => Ok(None),
                    s => s.parse().map(Some).map_err(|_| anyhow!("bad label {s:?}")),
                })
                .collect::<anyhow::Result<_>>()?;
            if labels.len() != docs.len() {
                bail!("{} labels for {} documents", labels.len(), docs.len());
            }
            Some(labels)
        }
        None => None,
    };
    let stopwords: BTreeSet<String> = match &a.stopwords {
        Some(p) => read_text(p)?
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect(),
        None => BTreeSet::new(),
    };
    let opts = IngestOptions {
        min_df: a.min_df,
        min_token_len: a.min_token_len,
        stopwords,
        max_vocab: a.max_vocab,
    };
    let ratios = parse_ratios(&a.split)?;
    let (mut corpus, report) = ingest(&docs, labels.as_deref(), &opts)?;
    corpus.split(ratios, a.split.split_seed)?;
    format::save_corpus(&a.out, &corpus)?;
    println!(
        "documents: {} read, {} kept, {} dropped; vocabulary: {}",
        report.input_docs,
        corpus.len(),
        report.dropped.len(),
        corpus.vocab_size()
    );
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> anyhow::Result<()> {
    let ratios = parse_ratios(&a.split)?;
    let mut s = synth_lda_corpus(&SynthParams {
        num_topics: a.topics,
        vocab_size: a.vocab,
        num_docs: a.docs,
        doc_len: a.doc_len,
        topic_sparsity: a.topic_sparsity,
        doc_sparsity: a.doc_sparsity,
        seed: a.seed,
    })?;
    s.corpus.split(ratios, a.split.split_seed)?;
    format::save_corpus(&a.out, &s.corpus)?;
    if let Some(p) = &a.truth {
        let rows: Vec<&[f64]> = (0..s.topic_word.rows()).map(|r| s.topic_word.row(r)).collect();
        let json = serde_json::json!({ "vocab": s.corpus.vocab().tokens(), "topic_word": rows });
        format::write_file(p, (serde_json::to_string(&json)? + "\n").as_bytes())?;
    }
    println!("documents: {}; vocabulary: {}", s.corpus.len(), s.corpus.vocab_size());
    Ok(())
}

fn config_digest(config: &TrainConfig) -> String {
    sha256_hex(&serde_json::to_vec(config).expect("config serializes"))
}

fn report_for(ck: &Checkpoint, ck_bytes: &[u8], corpus: &Corpus, reference: Option<SplitArg>, top_n: usize) -> anyhow::Result<TopicReport> {
    let docs = match reference {
        Some(r) => r.indices(corpus),
        None => corpus.indices(ck.config.npmi_reference),
    };
    if docs.is_empty() {
        return Err(UsageError("the reference split is empty".into()).into());
    }
    let stats = build_cooccurrence(corpus, &docs, None);
    let mut report = topic_report(&ck.params, corpus, &stats, top_n)?;
    report.model_id = sha256_hex(ck_bytes)[..16].to_string();
    report.seed = ck.config.seed;
    report.config_digest = config_digest(&ck.config);
    Ok(report)
}

fn report_json(report: &TopicReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes") + "\n"
}

fn cmd_train(a: TrainArgs, overrides: &[(String, String)]) -> anyhow::Result<()> {
    let config = config::load(a.config.as_deref(), overrides)?;
    if a.print_config {
        println!("{}", serde_json::to_string_pretty(&config)?);
        return Ok(());
    }
    let corpus_bytes = format::read_file(&a.corpus)?;
    let corpus = format::decode_corpus(&corpus_bytes)?;
    let out = match &a.metrics {
        Some(p) => {
            let file = std::fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            let mut sink = MetricsSink::new(std::io::BufWriter::new(file), a.wall_clock);
            let out = train_with_hooks(&corpus, &config, &mut sink);
            sink.finish().context("writing metrics")?;
            out?
        }
        None => train_with_hooks(&corpus, &config, &mut MetricsSink::new(std::io::sink(), a.wall_clock))?,
    };
    let ck = Checkpoint {
        params: out.params,
        config,
        beta0: out.beta0,
        total_steps: out.total_steps,
        corpus_sha256: sha256_hex(&corpus_bytes),
    };
    let ck_bytes = format::encode_checkpoint(&ck);
    format::write_file(&a.out, &ck_bytes)?;
    let report = report_for(&ck, &ck_bytes, &corpus, None, ck.config.top_n)?;
    if let Some(p) = &a.report {
        format::write_file(p, report_json(&report).as_bytes())?;
    }
    let last = out.metrics.iter().rev().find(|r| r.phase == contopic_core::train::Phase::Epoch);
    println!(
        "steps: {}; beta0: {}; final total loss: {}; mean NPMI ({}): {:.4}",
        ck.total_steps,
        ck.beta0,
        last.map_or(f64::NAN, |r| r.total),
        ck.config.npmi_reference.as_str(),
        report.mean_npmi
    );
    Ok(())
}

fn load_model(path: &Path) -> anyhow::Result<(Checkpoint, Vec<u8>)> {
    let bytes = format::read_file(path)?;
    let ck = format::decode_checkpoint(&bytes).with_context(|| format!("loading {}", path.display()))?;
    Ok((ck, bytes))
}

fn load_matching(model: &Path, corpus: &Path) -> anyhow::Result<(Checkpoint, Vec<u8>, Corpus)> {
    let (ck, bytes) = load_model(model)?;
    let corpus_bytes = format::read_file(corpus)?;
    let c = format::decode_corpus(&corpus_bytes)?;
    if c.vocab_size() != ck.params.dims().vocab {
        bail!(
            "model vocabulary has {} tokens, corpus has {}",
            ck.params.dims().vocab,
            c.vocab_size()
        );
    }
    if sha256_hex(&corpus_bytes) != ck.corpus_sha256 {
        eprintln!("warning: corpus differs from the one the model was trained on");
    }
    Ok((ck, bytes, c))
}

fn cmd_eval(a: EvalArgs) -> anyhow::Result<()> {
    let (ck, bytes, corpus) = load_matching(&a.model, &a.corpus)?;
    let top_n = a.top_n.unwrap_or(ck.config.top_n);
    if top_n < 2 {
        return Err(UsageError("--top-n must be at least 2".into()).into());
    }
    let report = report_for(&ck, &bytes, &corpus, a.reference, top_n)?;
    write_or_print(a.out.as_deref(), &report_json(&report))
}

fn cmd_align(a: AlignArgs) -> anyhow::Result<()> {
    let (ma, _) = load_model(&a.a)?;
    let (mb, _) = load_model(&a.b)?;
    let r = competitive_link(
        &ma.params.topic_distributions(),
        &mb.params.topic_distributions(),
        a.threshold,
        a.max_pairs,
    )?;
    write_or_print(a.out.as_deref(), &alignment_json(&r.pairs))
}

fn seeds(arg: &Option<String>) -> Result<Vec<u64>, UsageError> {
    match arg {
        Some(s) => parse_list("--seeds", s),
        None => Ok(DEFAULT_SEEDS.to_vec()),
    }
}

fn rows_table(rows: &[SweepRow]) -> String {
    let mut out = String::from("setting\tmean_npmi\tstd\tper_seed\n");
    for r in rows {
        let per: Vec<String> = r.npmi.iter().map(|v| format!("{v:.4}")).collect();
        writeln!(out, "{}\t{:.4}\t{:.4}\t{}", r.label, r.mean, r.std, per.join(",")).unwrap();
    }
    out
}

fn write_rows(out: Option<&Path>, rows: &[SweepRow]) -> anyhow::Result<()> {
    if let Some(p) = out {
        format::write_file(p, (serde_json::to_string_pretty(rows)? + "\n").as_bytes())?;
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs, overrides: &[(String, String)]) -> anyhow::Result<()> {
    let config = config::load(a.config.as_deref(), overrides)?;
    let corpus = format::load_corpus(&a.corpus)?;
    let ks: Vec<usize> = parse_list("--k-values", &a.k_values)?;
    let rows = sweep_k(&corpus, &config, &ks, &seeds(&a.seeds)?)?;
    print!("{}", rows_table(&rows));
    write_rows(a.out.as_deref(), &rows)
}

fn cmd_ablate(a: AblateArgs, overrides: &[(String, String)]) -> anyhow::Result<()> {
    let config = config::load(a.config.as_deref(), overrides)?;
    let corpus = format::load_corpus(&a.corpus)?;
    let rows = run_ablation(&corpus, &config, &seeds(&a.seeds)?)?;
    print!("{}", rows_table(&rows));
    let mean = |label: &str| rows.iter().find(|r| r.label == label).map_or(f64::NAN, |r| r.mean);
    let full = mean("full");
    let without_pos = full - mean("negative_only");
    let without_neg = full - mean("positive_only");
    println!(
        "w/o positive: {:+.4}; w/o negative: {:+.4}; removing positive sampling {} removing negative sampling",
        -without_pos,
        -without_neg,
        if without_pos >= without_neg { "hurts at least as much as" } else { "hurts less than" }
    );
    write_rows(a.out.as_deref(), &rows)
}

fn cmd_sigtest(a: SigtestArgs) -> anyhow::Result<()> {
    let xs: Vec<f64> = parse_list("--a", &a.a)?;
    let ys: Vec<f64> = parse_list("--b", &a.b)?;
    if xs.len() < 2 || ys.len() < 2 {
        return Err(UsageError("each list needs at least two values".into()).into());
    }
    let p = contopic_core::eval::significance_test(&xs, &ys)?;
    println!("p-value: {p}");
    Ok(())
}

fn cmd_export(a: ExportArgs) -> anyhow::Result<()> {
    let (ck, _, corpus) = load_matching(&a.model, &a.corpus)?;
    let docs = a.split.indices(&corpus);
    if docs.is_empty() && a.split.tag().is_some() {
        eprintln!("warning: the selected split is empty");
    }
    let rows = export_latents(&ck.params, &corpus, &docs, ck.config.covariates)?;
    write_or_print(a.out.as_deref(), &latents_csv(&rows, ck.params.dims().topics))
}

fn cmd_inspect(a: InspectArgs) -> anyhow::Result<()> {
    let (ck, _, corpus) = load_matching(&a.model, &a.corpus)?;
    if a.doc >= corpus.len() {
        return Err(UsageError(format!("--doc {} is out of range (corpus has {})", a.doc, corpus.len())).into());
    }
    let sampler = &ck.config.sampler;
    let k = a.k.unwrap_or(sampler.k);
    let params = &ck.params;
    let dims = params.dims();
    let doc = corpus.doc(a.doc);
    let x = doc.to_dense(dims.vocab);
    let cov = covariate_vector(doc.label, dims.covariates, ck.config.covariates);
    let (mu, _) = params.encode(&x, cov.as_deref())?;
    let theta = softmax(&mu);
    let total = doc.total() as f64;
    let recon: Vec<f64> = params.decode(&theta).iter().map(|p| p * total).collect();
    let scores = importance_scores(doc, corpus.tfidf_row(a.doc), &corpus.idf(), sampler.importance);

    let mut out = String::new();
    writeln!(out, "document {} ({} tokens, {} distinct), strategy {}, k {k}", a.doc, doc.total(), doc.distinct(), sampler.strategy.as_str())?;
    if sampler.strategy == SamplingStrategy::TopicBased {
        writeln!(out, "note: topic-based positives use the low-saliency substitution rule")?;
    }
    let pair: Option<SamplePair> = match sampler.strategy {
        SamplingStrategy::WordBased => Some(word_based_pair(&x, &recon, &scores, k)?),
        SamplingStrategy::ZeroSampling => Some(zero_sampling_pair(&x, &scores, k)?),
        SamplingStrategy::TopicBased => Some(topic_based_pair(&x, &recon, &theta, &params.topic_word, sampler.topics_m, k)?),
        SamplingStrategy::RandomDoc => {
            let pool = corpus.indices(SplitTag::Train);
            let other = random_doc_negative(&pool, a.doc, &mut sample_rng(ck.config.seed, 0, a.doc))?;
            writeln!(out, "negative sample: document {other}; no positive sample")?;
            None
        }
    };
    writeln!(out, "{:<20} {:>6} {:>10} {:>4} {:>4} {:>10}", "token", "count", "score", "pos", "neg", "recon")?;
    for id in rank_tokens(&scores) {
        let score = scores.iter().find(|s| s.0 == id).map_or(0.0, |s| s.1);
        let mark = |set: Option<&Vec<u32>>| if set.is_some_and(|s| s.contains(&id)) { "*" } else { "" };
        writeln!(
            out,
            "{:<20} {:>6} {:>10.4} {:>4} {:>4} {:>10.4}",
            corpus.vocab().token(id).unwrap_or("?"),
            doc.count(id),
            score,
            mark(pair.as_ref().map(|p| &p.pos_indices)),
            mark(pair.as_ref().map(|p| &p.neg_indices)),
            recon[id as usize]
        )?;
    }
    if let Some(p) = &pair {
        let absent: Vec<&u32> = p.neg_indices.iter().filter(|&&i| doc.count(i) == 0).collect();
        for &id in absent {
            writeln!(
                out,
                "{:<20} {:>6} {:>10} {:>4} {:>4} {:>10.4}",
                corpus.vocab().token(id).unwrap_or("?"),
                0,
                "-",
                "",
                "*",
                recon[id as usize]
            )?;
        }
    }
    write_or_print(None, &out)
}
