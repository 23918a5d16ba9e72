//! `cesna` — train and apply a contrastive, emoji-supervised sentence
//! encoder from the command line.
//!
//! Subcommands:
//!
//! * `synth` — generate a balanced synthetic corpus in the raw JSONL format.
//! * `build-vocab` — build a character-trigram vocabulary and save it.
//! * `train` — clean, split, and train end to end; writes a run directory
//!   with the checkpoint, history CSV, splits, and the resolved config.
//! * `eval` — score a labeled test corpus by reference voting.
//! * `predict` — label raw texts, one per line, from a file or stdin.
//! * `gradcheck` — verify backpropagation against finite differences.
//!
//! Logs go to stderr; data (tables, JSON, predictions) goes to stdout or
//! files.  Exit codes: 0 success, 1 failed gradient check or diverged
//! training, 2 usage or data errors.  Given the same inputs, flags, and
//! seed, every artifact except wall-clock timings is byte-identical across
//! runs and machines.

mod config;

use std::collections::BTreeSet;
use std::fs;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use cesna_core::corpus::{
    dedup_exact, load_corpus, normalize_whitespace, split, synth_generate, top_k_labels,
    write_raw_jsonl, CleaningReport, CorpusFormat, LabelSet, TweetRecord,
};
use cesna_core::emoji::RED_HEART;
use cesna_core::encoder::ModelParams;
use cesna_core::eval::{
    apply_cluster, cluster_label_set, evaluate, predict, sample_references, PredictDiagnostics,
    ReferenceSet,
};
use cesna_core::features::{build_vocab, TrigramVocab};
use cesna_core::trainer::{
    gradient_check, load_checkpoint, save_checkpoint, train_with_progress, Optimizer, TrainConfig,
};
use cesna_core::Error as CoreError;

use crate::config::FileConfig;

#[derive(Parser)]
#[command(
    name = "cesna",
    version,
    about = "Contrastive sentence embeddings supervised by emoji labels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a balanced synthetic corpus in the raw JSONL format.
    Synth(SynthArgs),
    /// Build a character-trigram vocabulary from a corpus and save it.
    BuildVocab(BuildVocabArgs),
    /// Clean, split, and train an encoder; writes a run directory.
    Train(TrainArgs),
    /// Score a labeled test corpus by reference voting.
    Eval(EvalArgs),
    /// Predict labels for raw texts, one per line (file or stdin).
    Predict(PredictArgs),
    /// Compare backpropagated gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

/// Corpus serialization, as a flag value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Jsonl,
    Tsv,
}

impl From<FormatArg> for CorpusFormat {
    fn from(f: FormatArg) -> CorpusFormat {
        match f {
            FormatArg::Jsonl => CorpusFormat::Jsonl,
            FormatArg::Tsv => CorpusFormat::Tsv,
        }
    }
}

impl FromStr for FormatArg {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(FormatArg::Jsonl),
            "tsv" => Ok(FormatArg::Tsv),
            other => bail!("unknown corpus format {other:?}; expected \"jsonl\" or \"tsv\""),
        }
    }
}

impl FormatArg {
    fn name(self) -> &'static str {
        match self {
            FormatArg::Jsonl => "jsonl",
            FormatArg::Tsv => "tsv",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

/// Divergence is an "operation failed" condition (1); everything else that
/// errors out is a usage or data problem (2).
fn exit_code_for(err: &anyhow::Error) -> u8 {
    let diverged = err.chain().any(|c| {
        matches!(
            c.downcast_ref::<CoreError>(),
            Some(CoreError::Diverged { .. })
        )
    });
    if diverged {
        1
    } else {
        2
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Synth(args) => cmd_synth(args),
        Command::BuildVocab(args) => cmd_build_vocab(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
    }
}

fn log_report(which: &str, report: &CleaningReport) {
    eprintln!(
        "{which}: {} usable records ({} multi-emoji, {} no-label, {} too-short rejects)",
        report.usable,
        report.multi_emoji_rejects,
        report.no_label_rejects,
        report.too_short_rejects
    );
}

fn distinct_labels(records: &[TweetRecord]) -> usize {
    records
        .iter()
        .map(|r| r.label.as_str())
        .collect::<BTreeSet<_>>()
        .len()
}

fn parse_ratios(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| anyhow!("bad ratio {p:?}: {e}"))
        })
        .collect::<Result<_>>()?;
    let [train, dev, test] = parts[..] else {
        bail!("ratios must be three comma-separated numbers, e.g. 0.8,0.1,0.1");
    };
    Ok([train, dev, test])
}

// --- synth -----------------------------------------------------------------

#[derive(Args)]
struct SynthArgs {
    /// Comma-separated emoji labels; defaults to three labels from
    /// different template themes.
    #[arg(long)]
    labels: Option<String>,
    /// Records generated per label.
    #[arg(long, default_value_t = 100)]
    n_per_label: usize,
    /// Probability of swapping a word for one from a different theme.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Language tag written on every record.
    #[arg(long, default_value = "syn")]
    lang: String,
    /// Output JSONL path.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_synth(args: SynthArgs) -> Result<u8> {
    let labels_csv = args.labels.unwrap_or_else(|| format!("😊,{RED_HEART},😬"));
    let labels: Vec<String> = labels_csv
        .split(',')
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect();
    let label_set = LabelSet::balanced(labels, args.n_per_label as u64)?;
    let mut records = synth_generate(args.n_per_label, &label_set, args.noise, args.seed)?;
    if args.lang != "syn" {
        for r in &mut records {
            r.language = args.lang.clone();
        }
    }
    write_raw_jsonl(&records, &args.out)?;
    eprintln!(
        "wrote {} records over {} labels to {}",
        records.len(),
        label_set.len(),
        args.out.display()
    );
    Ok(0)
}

// --- build-vocab -------------------------------------------------------------

#[derive(Args)]
struct BuildVocabArgs {
    /// Input corpus.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Jsonl)]
    format: FormatArg,
    /// Drop trigrams seen fewer than this many times.
    #[arg(long, default_value_t = 1)]
    min_count: u32,
    /// Output vocabulary path.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_build_vocab(args: BuildVocabArgs) -> Result<u8> {
    let (records, report) = load_corpus(&args.input, args.format.into(), None)?;
    log_report("input", &report);
    let vocab = build_vocab(&records, args.min_count)?;
    vocab.save(&args.out)?;
    eprintln!(
        "wrote vocabulary with V = {} trigrams (min_count = {}) to {}",
        vocab.v(),
        vocab.min_count(),
        args.out.display()
    );
    Ok(0)
}

// --- train -------------------------------------------------------------------

#[derive(Args)]
struct TrainArgs {
    /// Flat key=value config file; command-line flags win on conflicts.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Anchor-side (resource-poor) corpus.
    #[arg(long)]
    poor: Option<PathBuf>,
    /// Reference-side (resource-rich) corpus; defaults to the poor corpus
    /// sharing one split.
    #[arg(long)]
    rich: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Keep only the k most frequent labels (default: all).
    #[arg(long)]
    k: Option<usize>,
    /// Drop trigrams seen fewer than this many times in the training split.
    #[arg(long)]
    min_count: Option<u32>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// "sgd" or "adam".
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Contrastive margin m in [0, 1].
    #[arg(long)]
    margin: Option<f64>,
    /// Global L2 gradient clip; 0 disables clipping.
    #[arg(long)]
    grad_clip: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Positive (and negative) pairs sampled per anchor each epoch.
    #[arg(long)]
    positives_per_anchor: Option<usize>,
    /// Dev probes run every this many epochs, plus the final epoch.
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    out_dim: Option<usize>,
    /// train,dev,test split ratios.
    #[arg(long)]
    ratios: Option<String>,
    /// Run directory for the checkpoint, history, splits, and resolved
    /// config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Fully-resolved training invocation (flags over config file over
/// defaults).
struct TrainPlan {
    poor: PathBuf,
    rich: Option<PathBuf>,
    format: FormatArg,
    k: Option<usize>,
    min_count: u32,
    ratios: [f64; 3],
    out_dir: PathBuf,
    tc: TrainConfig,
}

impl TrainPlan {
    /// The plan in config-file syntax: rerunning with this file alone
    /// reproduces the run bit for bit (timing aside).
    fn to_config_string(&self) -> String {
        let d = &self.tc;
        let mut out = String::new();
        out.push_str(&format!("poor={}\n", self.poor.display()));
        if let Some(rich) = &self.rich {
            out.push_str(&format!("rich={}\n", rich.display()));
        }
        out.push_str(&format!("format={}\n", self.format.name()));
        if let Some(k) = self.k {
            out.push_str(&format!("k={k}\n"));
        }
        out.push_str(&format!("min-count={}\n", self.min_count));
        out.push_str(&format!("epochs={}\n", d.epochs));
        out.push_str(&format!("batch-size={}\n", d.batch_size));
        out.push_str(&format!("optimizer={}\n", d.optimizer));
        out.push_str(&format!("learning-rate={}\n", d.learning_rate));
        out.push_str(&format!("margin={}\n", d.margin));
        out.push_str(&format!("grad-clip={}\n", d.grad_clip.unwrap_or(0.0)));
        out.push_str(&format!("seed={}\n", d.seed));
        out.push_str(&format!(
            "positives-per-anchor={}\n",
            d.positives_per_anchor
        ));
        out.push_str(&format!("eval-every={}\n", d.eval_every));
        out.push_str(&format!("embed-dim={}\n", d.embed_dim));
        out.push_str(&format!("hidden-dim={}\n", d.hidden_dim));
        out.push_str(&format!("out-dim={}\n", d.out_dim));
        out.push_str(&format!(
            "ratios={},{},{}\n",
            self.ratios[0], self.ratios[1], self.ratios[2]
        ));
        out.push_str(&format!("out-dir={}\n", self.out_dir.display()));
        out
    }
}

fn resolve_train(args: TrainArgs) -> Result<TrainPlan> {
    let mut file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let defaults = TrainConfig::default();

    let poor = args
        .poor
        .or(file.take("poor")?)
        .ok_or_else(|| anyhow!("--poor is required (flag or config file)"))?;
    let rich = args.rich.or(file.take("rich")?);
    let format = args
        .format
        .or(file.take("format")?)
        .unwrap_or(FormatArg::Jsonl);
    let k = args.k.or(file.take("k")?);
    let min_count = args.min_count.or(file.take("min-count")?).unwrap_or(1);
    let ratios_str = args
        .ratios
        .or(file.take("ratios")?)
        .unwrap_or_else(|| "0.8,0.1,0.1".to_string());
    let ratios = parse_ratios(&ratios_str)?;
    let out_dir = args
        .out_dir
        .or(file.take("out-dir")?)
        .ok_or_else(|| anyhow!("--out-dir is required (flag or config file)"))?;

    let optimizer = match args.optimizer.or(file.take("optimizer")?) {
        Some(name) => Optimizer::from_str(&name)?,
        None => defaults.optimizer,
    };
    let grad_clip = match args.grad_clip.or(file.take("grad-clip")?) {
        Some(0.0) => None,
        Some(c) => Some(c),
        None => defaults.grad_clip,
    };

    let tc = TrainConfig {
        epochs: args
            .epochs
            .or(file.take("epochs")?)
            .unwrap_or(defaults.epochs),
        batch_size: args
            .batch_size
            .or(file.take("batch-size")?)
            .unwrap_or(defaults.batch_size),
        optimizer,
        learning_rate: args
            .learning_rate
            .or(file.take("learning-rate")?)
            .unwrap_or(defaults.learning_rate),
        margin: args
            .margin
            .or(file.take("margin")?)
            .unwrap_or(defaults.margin),
        grad_clip,
        seed: args.seed.or(file.take("seed")?).unwrap_or(defaults.seed),
        positives_per_anchor: args
            .positives_per_anchor
            .or(file.take("positives-per-anchor")?)
            .unwrap_or(defaults.positives_per_anchor),
        eval_every: args
            .eval_every
            .or(file.take("eval-every")?)
            .unwrap_or(defaults.eval_every),
        embed_dim: args
            .embed_dim
            .or(file.take("embed-dim")?)
            .unwrap_or(defaults.embed_dim),
        hidden_dim: args
            .hidden_dim
            .or(file.take("hidden-dim")?)
            .unwrap_or(defaults.hidden_dim),
        out_dim: args
            .out_dim
            .or(file.take("out-dim")?)
            .unwrap_or(defaults.out_dim),
    };
    file.finish()?;
    Ok(TrainPlan {
        poor,
        rich,
        format,
        k,
        min_count,
        ratios,
        out_dir,
        tc,
    })
}

fn cmd_train(args: TrainArgs) -> Result<u8> {
    let plan = resolve_train(args)?;
    let format: CorpusFormat = plan.format.into();

    // Pass 1: detect labels with the built-in emoji universe just to rank
    // them; the active set then drives a second, definitive cleaning pass,
    // because stripping and the one-emoji-per-tweet rule both depend on
    // which emojis count as labels.
    let (poor_probe, probe_report) = load_corpus(&plan.poor, format, None)?;
    log_report("anchor corpus (label detection)", &probe_report);
    let k = plan.k.unwrap_or_else(|| distinct_labels(&poor_probe));
    let label_set = top_k_labels(&poor_probe, k)?;
    eprintln!("active labels: {label_set}");

    let (poor_all, poor_report) = load_corpus(&plan.poor, format, Some(&label_set))?;
    log_report("anchor corpus", &poor_report);
    let (poor_all, removed) = dedup_exact(poor_all);
    eprintln!("dedup: removed {removed} exact duplicates from the anchor corpus");
    let poor_split = split(&poor_all, plan.ratios, plan.tc.seed)?;
    eprintln!(
        "split: {} train / {} dev / {} test",
        poor_split.train.len(),
        poor_split.dev.len(),
        poor_split.test.len()
    );

    // The reference side: its own corpus when given, otherwise the anchor
    // corpus itself, sharing the anchor split so that references always
    // come from training data.
    let rich_train: Vec<TweetRecord> = match &plan.rich {
        None => poor_split.train.clone(),
        Some(rich_path) => {
            let (rich_all, rich_report) = load_corpus(rich_path, format, Some(&label_set))?;
            log_report("reference corpus", &rich_report);
            let (rich_all, removed) = dedup_exact(rich_all);
            eprintln!("dedup: removed {removed} exact duplicates from the reference corpus");
            split(&rich_all, plan.ratios, plan.tc.seed)?.train
        }
    };

    // The vocabulary sees training data only.
    let vocab = if plan.rich.is_none() {
        build_vocab(&poor_split.train, plan.min_count)?
    } else {
        let mut both = poor_split.train.clone();
        both.extend_from_slice(&rich_train);
        build_vocab(&both, plan.min_count)?
    };
    eprintln!(
        "vocabulary: V = {} trigrams (min_count = {})",
        vocab.v(),
        vocab.min_count()
    );

    let epochs = plan.tc.epochs;
    let outcome = train_with_progress(
        &poor_split.train,
        &rich_train,
        Some(&poor_split.dev),
        &vocab,
        &plan.tc,
        |r| {
            let probes = match (r.dev_pair_acc, r.dev_macro_f1) {
                (Some(acc), Some(f1)) => {
                    format!("  dev pair acc {acc:.4}  dev macro-F1 {f1:.4}")
                }
                _ => String::new(),
            };
            eprintln!(
                "epoch {:>3}/{}: mean loss {:.4}{}  ({:.1}s)",
                r.epoch, epochs, r.mean_loss, probes, r.seconds
            );
        },
    )?;

    fs::create_dir_all(plan.out_dir.join("splits"))?;
    let ckpt = plan.out_dir.join("model.ckpt");
    save_checkpoint(&outcome.params, &vocab, &ckpt)?;
    outcome
        .history
        .write_csv(&plan.out_dir.join("history.csv"))?;
    write_raw_jsonl(&poor_split.train, &plan.out_dir.join("splits/train.jsonl"))?;
    write_raw_jsonl(&poor_split.dev, &plan.out_dir.join("splits/dev.jsonl"))?;
    write_raw_jsonl(&poor_split.test, &plan.out_dir.join("splits/test.jsonl"))?;
    fs::write(
        plan.out_dir.join("config.resolved"),
        plan.to_config_string(),
    )?;
    eprintln!(
        "wrote checkpoint, history, splits, and resolved config to {}",
        plan.out_dir.display()
    );
    Ok(0)
}

// --- eval / predict ----------------------------------------------------------

/// Flags shared by `eval` and `predict`: which model to load and how to
/// build the reference set it votes against.
#[derive(Args)]
struct RefArgs {
    /// Flat key=value config file; command-line flags win on conflicts.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trained checkpoint (expects `<path>.vocab` beside it).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Labeled reference corpus to vote against.
    #[arg(long)]
    refs: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Keep only the k most frequent reference labels (default: all).
    #[arg(long)]
    k: Option<usize>,
    /// References sampled per label.
    #[arg(long)]
    ref_per_label: Option<usize>,
    /// Cosine match threshold τ in [-1, 1].
    #[arg(long)]
    threshold: Option<f64>,
    /// Collapse near-synonymous emoji labels (hearts, smiles, smirks) onto
    /// one representative each.
    #[arg(long)]
    cluster: bool,
    #[arg(long)]
    seed: Option<u64>,
}

/// `RefArgs` after merging the config file and defaults.
struct RefPlan {
    checkpoint: PathBuf,
    refs: PathBuf,
    format: FormatArg,
    k: Option<usize>,
    ref_per_label: usize,
    threshold: f64,
    cluster: bool,
    seed: u64,
}

/// Resolve `RefArgs`, returning the plan plus the partially-consumed config
/// file so callers can take their own extra keys from it.
fn resolve_refs(args: RefArgs) -> Result<(RefPlan, FileConfig)> {
    let mut file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let plan = RefPlan {
        checkpoint: args
            .checkpoint
            .or(file.take("checkpoint")?)
            .ok_or_else(|| anyhow!("--checkpoint is required (flag or config file)"))?,
        refs: args
            .refs
            .or(file.take("refs")?)
            .ok_or_else(|| anyhow!("--refs is required (flag or config file)"))?,
        format: args
            .format
            .or(file.take("format")?)
            .unwrap_or(FormatArg::Jsonl),
        k: args.k.or(file.take("k")?),
        ref_per_label: args
            .ref_per_label
            .or(file.take("ref-per-label")?)
            .unwrap_or(50),
        threshold: args.threshold.or(file.take("threshold")?).unwrap_or(0.5),
        cluster: args.cluster || file.take("cluster")?.unwrap_or(false),
        seed: args.seed.or(file.take("seed")?).unwrap_or(42),
    };
    Ok((plan, file))
}

/// Load the checkpoint and build the reference set the plan describes.
/// Returns the model, its vocabulary, the active label set, and the
/// embedded references.
fn build_references(plan: &RefPlan) -> Result<(ModelParams, TrigramVocab, LabelSet, ReferenceSet)> {
    let (params, vocab) = load_checkpoint(&plan.checkpoint)
        .with_context(|| format!("cannot load checkpoint {}", plan.checkpoint.display()))?;
    let format: CorpusFormat = plan.format.into();

    let (refs_probe, _) = load_corpus(&plan.refs, format, None)?;
    let k = plan.k.unwrap_or_else(|| distinct_labels(&refs_probe));
    let mut label_set = top_k_labels(&refs_probe, k)?;
    let (mut refs_all, refs_report) = load_corpus(&plan.refs, format, Some(&label_set))?;
    log_report("reference corpus", &refs_report);

    if plan.cluster {
        refs_all = apply_cluster(&refs_all);
        label_set = cluster_label_set(&label_set)?;
        eprintln!("clustered labels: {label_set}");
    }

    let refs = sample_references(
        &refs_all,
        &params,
        &vocab,
        &label_set,
        plan.ref_per_label,
        plan.seed,
    )?;
    for s in &refs.shortfalls {
        eprintln!(
            "warning: label {} has only {} references of the {} requested",
            s.label, s.available, s.requested
        );
    }
    Ok((params, vocab, label_set, refs))
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    refs: RefArgs,
    /// Labeled test corpus.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Emit metrics as JSON instead of a text table.
    #[arg(long)]
    json: bool,
}

fn cmd_eval(args: EvalArgs) -> Result<u8> {
    let (plan, mut file) = resolve_refs(args.refs)?;
    let test_path: PathBuf = args
        .test
        .or(file.take("test")?)
        .ok_or_else(|| anyhow!("--test is required (flag or config file)"))?;
    let json = args.json || file.take("json")?.unwrap_or(false);
    file.finish()?;

    let (params, vocab, label_set, refs) = build_references(&plan)?;
    let (mut test_all, test_report) =
        load_corpus(&test_path, plan.format.into(), Some(&label_set))?;
    log_report("test corpus", &test_report);
    if plan.cluster {
        test_all = apply_cluster(&test_all);
    }

    let metrics = evaluate(&test_all, &params, &vocab, &refs, plan.threshold)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&metrics.to_json())?);
    } else {
        print!("{}", metrics.render_table());
    }
    Ok(0)
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    refs: RefArgs,
    /// Text file with one input per line; stdin when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Also print per-label match counts and mean cosines.
    #[arg(long)]
    verbose: bool,
}

fn format_diagnostics(diag: &PredictDiagnostics) -> String {
    diag.labels
        .iter()
        .zip(&diag.match_counts)
        .zip(&diag.mean_cosine)
        .map(|((label, count), mean)| format!("{label}:{count}/{mean:.3}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_predict(args: PredictArgs) -> Result<u8> {
    let (plan, mut file) = resolve_refs(args.refs)?;
    let input = args.input.or(file.take("input")?);
    let verbose = args.verbose || file.take("verbose")?.unwrap_or(false);
    file.finish()?;

    let (params, vocab, _label_set, refs) = build_references(&plan)?;

    let reader: Box<dyn BufRead> = match &input {
        Some(path) => Box::new(BufReader::new(
            File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
        )),
        None => Box::new(BufReader::new(io::stdin())),
    };
    let mut stdout = io::stdout().lock();
    for (i, line) in reader.lines().enumerate() {
        let text = normalize_whitespace(&line?);
        match predict(&text, &params, &vocab, &refs, plan.threshold) {
            Ok((label, diag)) => {
                if verbose {
                    writeln!(stdout, "{label}\t{}", format_diagnostics(&diag))?;
                } else {
                    writeln!(stdout, "{label}")?;
                }
            }
            Err(CoreError::TextTooShort { got }) => {
                eprintln!(
                    "warning: line {} has only {got} codepoints, need at least 3; emitting ?",
                    i + 1
                );
                writeln!(stdout, "?")?;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(0)
}

// --- gradcheck -----------------------------------------------------------------

#[derive(Args)]
struct GradcheckArgs {
    /// Flat key=value config file; command-line flags win on conflicts.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random pairs to check.
    #[arg(long)]
    trials: Option<usize>,
    /// Finite-difference step.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Maximum tolerated relative error.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    out_dim: Option<usize>,
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<u8> {
    let mut file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let trials = args.trials.or(file.take("trials")?).unwrap_or(10);
    let epsilon = args.epsilon.or(file.take("epsilon")?).unwrap_or(1e-5);
    let tolerance = args.tolerance.or(file.take("tolerance")?).unwrap_or(1e-4);
    let tc = TrainConfig {
        margin: args.margin.or(file.take("margin")?).unwrap_or(0.5),
        seed: args.seed.or(file.take("seed")?).unwrap_or(42),
        embed_dim: args.embed_dim.or(file.take("embed-dim")?).unwrap_or(4),
        hidden_dim: args.hidden_dim.or(file.take("hidden-dim")?).unwrap_or(4),
        out_dim: args.out_dim.or(file.take("out-dim")?).unwrap_or(8),
        ..TrainConfig::default()
    };
    file.finish()?;

    let report = gradient_check(&tc, trials, epsilon, tolerance)?;
    println!("{report}");
    Ok(if report.pass() { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios_parse_and_reject_garbage() {
        assert_eq!(parse_ratios("0.8,0.1,0.1").unwrap(), [0.8, 0.1, 0.1]);
        assert_eq!(
            parse_ratios(" 0.5 , 0.25 , 0.25 ").unwrap(),
            [0.5, 0.25, 0.25]
        );
        assert!(parse_ratios("0.8,0.2").is_err());
        assert!(parse_ratios("a,b,c").is_err());
    }

    #[test]
    fn diagnostics_render_one_entry_per_label() {
        let diag = PredictDiagnostics {
            labels: vec!["😊".into(), "😬".into()],
            match_counts: vec![3, 0],
            mean_cosine: vec![0.91234, 0.1],
        };
        assert_eq!(format_diagnostics(&diag), "😊:3/0.912 😬:0/0.100");
    }

    #[test]
    fn resolved_train_plan_round_trips_through_the_config_parser() {
        let plan = TrainPlan {
            poor: PathBuf::from("/tmp/poor.jsonl"),
            rich: Some(PathBuf::from("/tmp/rich.jsonl")),
            format: FormatArg::Tsv,
            k: Some(5),
            min_count: 2,
            ratios: [0.8, 0.1, 0.1],
            out_dir: PathBuf::from("/tmp/run"),
            tc: TrainConfig::default(),
        };
        let text = plan.to_config_string();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("resolved.conf");
        fs::write(&path, &text).unwrap();
        let mut file = FileConfig::load(&path).unwrap();
        assert_eq!(
            file.take::<PathBuf>("poor").unwrap(),
            Some(PathBuf::from("/tmp/poor.jsonl"))
        );
        assert_eq!(
            file.take::<FormatArg>("format").unwrap(),
            Some(FormatArg::Tsv)
        );
        assert_eq!(file.take::<usize>("k").unwrap(), Some(5));
        assert_eq!(file.take::<f64>("grad-clip").unwrap(), Some(5.0));
        assert_eq!(
            file.take::<String>("optimizer").unwrap(),
            Some("adam".into())
        );
        // Every emitted key must be one the resolver knows how to consume.
        for key in [
            "rich",
            "min-count",
            "epochs",
            "batch-size",
            "learning-rate",
            "margin",
            "seed",
            "positives-per-anchor",
            "eval-every",
            "embed-dim",
            "hidden-dim",
            "out-dim",
            "ratios",
            "out-dir",
        ] {
            assert!(
                file.take::<String>(key).unwrap().is_some(),
                "missing key {key}"
            );
        }
        file.finish().unwrap();
    }

    #[test]
    fn clip_value_zero_means_unclipped() {
        let args = TrainArgs {
            config: None,
            poor: Some(PathBuf::from("p.jsonl")),
            rich: None,
            format: None,
            k: None,
            min_count: None,
            epochs: None,
            batch_size: None,
            optimizer: None,
            learning_rate: None,
            margin: None,
            grad_clip: Some(0.0),
            seed: None,
            positives_per_anchor: None,
            eval_every: None,
            embed_dim: None,
            hidden_dim: None,
            out_dim: None,
            ratios: None,
            out_dir: Some(PathBuf::from("out")),
        };
        let plan = resolve_train(args).unwrap();
        assert_eq!(plan.tc.grad_clip, None);
        assert_eq!(plan.tc.epochs, TrainConfig::default().epochs);
    }
}
