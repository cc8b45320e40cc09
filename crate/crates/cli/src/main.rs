//! `sxsenti`: train, evaluate and analyze sentiment classifiers for
//! Spanish-English code-switched tweets.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sxsenti_core::analysis::{
    category_report, parse_annotations, run_ablation, sample_for_annotation, serialize_annotations,
};
use sxsenti_core::checkpoint::Pipeline;
use sxsenti_core::corpus::{generate_fixture, Corpus, LangTag, Sentiment, Token};
use sxsenti_core::embeddings::{load_embeddings_text, PretrainedTable};
use sxsenti_core::evaluation::EvalReport;
use sxsenti_core::models::ModelKind;
use sxsenti_core::normalizer::{
    normalize_tokens, serialize_normalized, tokenize_raw, UnigramModel,
};
use sxsenti_core::training::{train_loop, TrainConfig, TrainOverrides};
use sxsenti_core::verification::{gradient_suite, GRADIENT_TOLERANCE};

const SEED_ENV: &str = "SXSENTI_SEED";

#[derive(Parser)]
#[command(
    name = "sxsenti",
    version,
    about = "Sentiment classification for Spanish-English code-switched tweets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label distribution and mode-language statistics of a corpus
    Stats {
        /// CoNLL-style corpus file
        corpus: PathBuf,
    },
    /// Normalize a corpus and print one tweet per line
    Normalize {
        /// CoNLL-style corpus file
        corpus: PathBuf,
        /// Skip style rewriting for Spanish-tagged tokens
        #[arg(long)]
        lang_aware: bool,
        /// Unigram counts file (`<word> <count>` lines); defaults to counts
        /// taken from the corpus itself
        #[arg(long)]
        unigrams: Option<PathBuf>,
    },
    /// Train a classifier and keep the best-epoch checkpoint
    Train(TrainArgs),
    /// Evaluate a checkpoint against a labeled corpus
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Labeled CoNLL-style corpus file
        #[arg(long)]
        data: PathBuf,
        /// Emit the full report as JSON instead of a table
        #[arg(long)]
        json: bool,
    },
    /// Predict labels for raw text or a corpus file
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        /// One raw tweet (tokenized internally)
        #[arg(long, conflicts_with = "data")]
        text: Option<String>,
        /// CoNLL-style corpus file
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output CSV path (`Uid,Sentiment` rows)
        #[arg(long)]
        out: PathBuf,
    },
    /// Train twice with identical seeds, toggling only normalization
    Ablate(AblateArgs),
    /// Draw a stratified sample with predictions for manual annotation
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Labeled CoNLL-style corpus file
        #[arg(long)]
        data: PathBuf,
        /// Sample size
        #[arg(long, default_value_t = 300)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Output TSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate a manually annotated TSV by error category
    Report {
        #[arg(long)]
        annotations: PathBuf,
    },
    /// Verify analytic gradients against central differences
    Gradcheck,
    /// Write a deterministic synthetic corpus
    Fixture {
        #[arg(long)]
        seed: Option<u64>,
        /// Number of tweets (>= 3)
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// cnn or gru
    #[arg(long)]
    model: String,
    /// Training corpus (CoNLL-style)
    #[arg(long)]
    train: PathBuf,
    /// Development corpus for best-epoch selection
    #[arg(long)]
    dev: PathBuf,
    /// Pretrained embeddings in the plain-text format
    #[arg(long)]
    embeddings: PathBuf,
    /// JSON file overriding hyperparameters
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Disable text normalization
    #[arg(long)]
    no_normalize: bool,
    /// Checkpoint output path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    /// cnn or gru
    #[arg(long)]
    model: String,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the two checkpoints
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Stats { corpus } => stats(&corpus),
        Command::Normalize {
            corpus,
            lang_aware,
            unigrams,
        } => normalize(&corpus, lang_aware, unigrams.as_deref()),
        Command::Train(args) => train(args),
        Command::Eval {
            checkpoint,
            data,
            json,
        } => eval(&checkpoint, &data, json),
        Command::Predict {
            checkpoint,
            text,
            data,
            out,
        } => predict(&checkpoint, text.as_deref(), data.as_deref(), &out),
        Command::Ablate(args) => ablate(args),
        Command::Sample {
            checkpoint,
            data,
            n,
            seed,
            out,
        } => sample(&checkpoint, &data, n, resolve_seed(seed, None), &out),
        Command::Report { annotations } => report(&annotations),
        Command::Gradcheck => gradcheck(),
        Command::Fixture { seed, n, out } => fixture(resolve_seed(seed, None), n, &out),
    }
}

/// Seed precedence: explicit flag, then config file, then SXSENTI_SEED, then 1.
fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> u64 {
    flag.or(config)
        .or_else(|| std::env::var(SEED_ENV).ok().and_then(|s| s.parse().ok()))
        .unwrap_or(1)
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading corpus {}", path.display()))?;
    Corpus::parse_conll(&text).with_context(|| format!("parsing {}", path.display()))
}

fn stats(path: &Path) -> Result<()> {
    let corpus = read_corpus(path)?;
    let dist = corpus.label_distribution()?;
    println!("tweets: {}", corpus.len());
    for s in Sentiment::ALL {
        println!(
            "{:<9} {:>6}  {:>6.2}%",
            s.as_str(),
            dist.count(s),
            100.0 * dist.proportion(s)
        );
    }
    println!(
        "mode language: lang2 {:.1}%  lang1 {:.1}%  mixed {:.1}%  other {:.1}%",
        100.0 * corpus.mode_language_fraction(LangTag::Lang2),
        100.0 * corpus.mode_language_fraction(LangTag::Lang1),
        100.0 * corpus.mode_language_fraction(LangTag::Mixed),
        100.0 * corpus.mode_language_fraction(LangTag::Other),
    );
    Ok(())
}

fn normalize(path: &Path, lang_aware: bool, unigrams: Option<&Path>) -> Result<()> {
    use std::io::{ErrorKind, Write};

    let corpus = read_corpus(path)?;
    let model = match unigrams {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading unigrams {}", p.display()))?;
            UnigramModel::parse(&text)?
        }
        None => UnigramModel::from_corpus(&corpus),
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for tweet in &corpus.tweets {
        let normalized = normalize_tokens(&tweet.tokens, &model, lang_aware);
        match writeln!(out, "{}", serialize_normalized(&normalized)) {
            Err(e) if e.kind() == ErrorKind::BrokenPipe => return Ok(()),
            other => other?,
        }
    }
    Ok(())
}

fn load_train_config(
    args_model: &str,
    config: Option<&Path>,
    seed: Option<u64>,
    no_normalize: bool,
) -> Result<TrainConfig> {
    let kind: ModelKind = args_model.parse()?;
    let overrides: TrainOverrides = match config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => TrainOverrides::default(),
    };
    if let Some(configured) = overrides.model {
        if configured != kind {
            bail!(
                "config file declares model {}, flag says {}",
                configured.as_str(),
                kind.as_str()
            );
        }
    }
    let config_seed = overrides.seed;
    let mut resolved = overrides.apply(TrainConfig::for_kind(kind));
    resolved.model = kind;
    resolved.seed = resolve_seed(seed, config_seed);
    if no_normalize {
        resolved.normalize = false;
    }
    Ok(resolved)
}

fn load_embeddings(path: &Path, expected_dim: usize) -> Result<PretrainedTable> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading embeddings {}", path.display()))?;
    Ok(load_embeddings_text(&text, Some(expected_dim))?)
}

fn train(args: TrainArgs) -> Result<()> {
    let config = load_train_config(
        &args.model,
        args.config.as_deref(),
        args.seed,
        args.no_normalize,
    )?;
    let train_corpus = read_corpus(&args.train)?;
    let dev_corpus = read_corpus(&args.dev)?;
    let pretrained = load_embeddings(&args.embeddings, config.embedding_dim)?;
    eprintln!(
        "training {} for {} epochs (seed {}, normalize {})",
        config.model.as_str(),
        config.epochs,
        config.seed,
        config.normalize
    );
    let report = train_loop(&train_corpus, &dev_corpus, &config, &pretrained, &args.out)?;
    for epoch in &report.epochs {
        eprintln!(
            "epoch {:>3}: train loss {:.4}  dev macro-F1 {:.4}",
            epoch.epoch, epoch.train_loss, epoch.dev_macro_f1
        );
    }
    eprintln!(
        "best epoch {} (dev macro-F1 {:.4}) -> {}",
        report.best_epoch, report.best_dev_macro_f1, report.checkpoint_path
    );
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn eval(checkpoint: &Path, data: &Path, json: bool) -> Result<()> {
    let mut pipeline = Pipeline::load(checkpoint)?;
    let corpus = read_corpus(data)?;
    let preds = pipeline.predict_corpus(&corpus.tweets)?;
    let golds: Vec<Sentiment> = corpus.tweets.iter().map(|t| t.sentiment).collect();
    let report = EvalReport::from_pairs(&preds, &golds)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.render_table());
    }
    Ok(())
}

fn predict(checkpoint: &Path, text: Option<&str>, data: Option<&Path>, out: &Path) -> Result<()> {
    let mut pipeline = Pipeline::load(checkpoint)?;
    let mut rows: Vec<(String, Sentiment)> = Vec::new();
    match (text, data) {
        (Some(text), None) => {
            let tokens: Vec<Token> = tokenize_raw(text)
                .into_iter()
                .map(|t| Token::new(t, LangTag::Unk))
                .collect();
            if tokens.is_empty() {
                bail!("no tokens in the given text");
            }
            rows.push(("0".to_string(), pipeline.predict(&tokens)?));
        }
        (None, Some(data)) => {
            let corpus = read_corpus(data)?;
            let preds = pipeline.predict_corpus(&corpus.tweets)?;
            rows.extend(corpus.tweets.iter().map(|t| t.uid.clone()).zip(preds));
        }
        _ => bail!("exactly one of --text or --data is required"),
    }
    let mut csv = String::from("Uid,Sentiment\n");
    for (uid, label) in &rows {
        csv.push_str(&format!("{uid},{label}\n"));
    }
    fs::write(out, csv).with_context(|| format!("writing {}", out.display()))?;
    eprintln!("wrote {} predictions to {}", rows.len(), out.display());
    Ok(())
}

fn ablate(args: AblateArgs) -> Result<()> {
    let config = load_train_config(&args.model, args.config.as_deref(), args.seed, false)?;
    let train_corpus = read_corpus(&args.train)?;
    let dev_corpus = read_corpus(&args.dev)?;
    let pretrained = load_embeddings(&args.embeddings, config.embedding_dim)?;
    fs::create_dir_all(&args.out_dir)?;
    let report = run_ablation(
        &train_corpus,
        &dev_corpus,
        &config,
        &pretrained,
        &args.out_dir,
    )?;
    eprintln!(
        "dev macro-F1 with normalization {:.4}, without {:.4}, delta {:+.4}",
        report.dev_macro_f1_with, report.dev_macro_f1_without, report.delta
    );
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn sample(checkpoint: &Path, data: &Path, n: usize, seed: u64, out: &Path) -> Result<()> {
    let mut pipeline = Pipeline::load(checkpoint)?;
    let corpus = read_corpus(data)?;
    let records = sample_for_annotation(&corpus, &mut pipeline, n, seed)?;
    fs::write(out, serialize_annotations(&records))
        .with_context(|| format!("writing {}", out.display()))?;
    eprintln!(
        "wrote {} annotation rows to {}",
        records.len(),
        out.display()
    );
    Ok(())
}

fn report(annotations: &Path) -> Result<()> {
    let text = fs::read_to_string(annotations)
        .with_context(|| format!("reading {}", annotations.display()))?;
    let records = parse_annotations(&text)?;
    print!("{}", category_report(&records).render());
    Ok(())
}

fn gradcheck() -> Result<()> {
    let mut worst = 0.0f64;
    for (name, err) in gradient_suite() {
        let verdict = if err < GRADIENT_TOLERANCE {
            "PASS"
        } else {
            "FAIL"
        };
        println!("{name:<24} max relative error {err:.3e}  {verdict}");
        worst = worst.max(err);
    }
    if worst >= GRADIENT_TOLERANCE {
        bail!("gradient check failed: worst relative error {worst:.3e}");
    }
    Ok(())
}

fn fixture(seed: u64, n: usize, out: &Path) -> Result<()> {
    if n < 3 {
        bail!("fixture needs at least 3 tweets");
    }
    let corpus = generate_fixture(seed, n);
    fs::write(out, corpus.to_conll()).with_context(|| format!("writing {}", out.display()))?;
    eprintln!("wrote {} tweets to {}", corpus.len(), out.display());
    Ok(())
}
