use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use skiplda::checkpoint::Checkpoint;
use skiplda::metrics::{write_metrics_row, MetricsRow, METRICS_HEADER};
use skiplda::{load_uci_bow, Corpus, CounterRng, Error, SamplerKind, Trainer, TrainerConfig};

#[derive(Parser)]
#[command(name = "skiplda", version, about = "Train LDA topic models on UCI bag-of-words corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run collapsed Gibbs sampling and write per-iteration metrics.
    Train(TrainArgs),
    /// Print the LLPT of a checkpoint.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Sampler {
    TwoBranch,
    ThreeBranch,
}

#[derive(Args)]
struct CorpusArgs {
    /// UCI docword file.
    #[arg(long)]
    docword: PathBuf,
    /// UCI vocabulary file, one word per line.
    #[arg(long)]
    vocab: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    topics: u32,
    /// Document-topic prior; defaults to 50 / topics.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    #[arg(long, default_value_t = 100)]
    iterations: u32,
    #[arg(long, default_value_t = 1)]
    chunks: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = Sampler::ThreeBranch)]
    sampler: Sampler,
    /// Top topics used by the skip bound.
    #[arg(long, default_value_t = 2)]
    g: usize,
    /// Words with more tokens than this get dense rows; defaults to topics.
    #[arg(long)]
    dense_threshold: Option<u64>,
    #[arg(long, default_value_t = 10_000)]
    split_threshold: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluate LLPT every N iterations; 0 disables it.
    #[arg(long, default_value_t = 1)]
    llpt_stride: u32,
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Write the final topic assignments here.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Defaults to 50 / K of the checkpoint.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
}

/// Exit status 2 for bad invocations, 1 for failures while running.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn engine_error(e: Error, context: &str) -> Failure {
    match e {
        Error::Config(_) => Failure::Usage(anyhow!(e).context(context.to_string())),
        other => Failure::Runtime(anyhow!(other).context(context.to_string())),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(Failure::Usage)
}

fn load_corpus(args: &CorpusArgs) -> Result<Corpus, Failure> {
    let docword = open(&args.docword)?;
    let vocab = args.vocab.as_deref().map(open).transpose()?;
    load_uci_bow(docword, vocab)
        .with_context(|| format!("reading {}", args.docword.display()))
        .map_err(Failure::Runtime)
}

fn train(args: TrainArgs) -> Result<(), Failure> {
    let defaults = TrainerConfig::new(args.topics);
    let config = TrainerConfig {
        alpha: args.alpha.unwrap_or(defaults.alpha),
        beta: args.beta,
        g: args.g,
        chunks: args.chunks,
        workers: args.workers,
        dense_threshold: args.dense_threshold,
        split_threshold: args.split_threshold,
        iterations: args.iterations,
        seed: args.seed,
        sampler: match args.sampler {
            Sampler::TwoBranch => SamplerKind::TwoBranch,
            Sampler::ThreeBranch => SamplerKind::ThreeBranch,
        },
        llpt_stride: args.llpt_stride,
        ..defaults
    };
    config.validate().map_err(|e| engine_error(e, "invalid configuration"))?;
    let corpus = load_corpus(&args.corpus)?;
    let num_words = corpus.num_words();
    eprintln!(
        "corpus: {} documents, {} words, {} tokens",
        corpus.num_docs,
        num_words,
        corpus.num_tokens()
    );
    eprintln!(
        "config: topics={} alpha={} beta={} g={} chunks={} workers={} dense_threshold={} split_threshold={} seed={}",
        config.topics,
        config.alpha,
        config.beta,
        config.g,
        config.chunks,
        config.workers,
        config.dense_threshold(),
        config.split_threshold,
        config.seed
    );

    let mut metrics = match &args.metrics {
        Some(path) => {
            let mut f = BufWriter::new(
                File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
            );
            writeln!(f, "{METRICS_HEADER}").context("writing metrics")?;
            f.flush().context("writing metrics")?;
            Some(f)
        }
        None => None,
    };

    let mut trainer = Trainer::new(corpus, config.clone()).map_err(|e| engine_error(e, "cannot start training"))?;
    let start = Instant::now();
    for _ in 0..config.iterations {
        let stats = trainer
            .run_iteration()
            .map_err(|e| engine_error(e, "training failed"))?;
        let row = MetricsRow::from_stats(&stats, start.elapsed().as_secs_f64());
        if let Some(f) = metrics.as_mut() {
            write_metrics_row(&mut *f, &row).context("writing metrics")?;
            f.flush().context("writing metrics")?;
        }
        let llpt = stats.llpt.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"));
        println!(
            "iteration {:>4}  llpt {llpt}  skip {:.4}  {:.0} tokens/s",
            stats.iteration, stats.skip_rate_final, stats.tokens_per_second
        );
    }

    if let Some(path) = &args.checkpoint {
        let ckpt = Checkpoint {
            topics_k: config.topics,
            num_words: num_words as u32,
            dense_words: trainer.vocab().dense_words() as u32,
            iteration: trainer.iteration(),
            topics: trainer.topics(),
        };
        let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        ckpt.write(BufWriter::new(f))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), Failure> {
    let corpus = load_corpus(&args.corpus)?;
    let ckpt = Checkpoint::read(open(&args.checkpoint)?)
        .with_context(|| format!("reading {}", args.checkpoint.display()))?;
    if ckpt.num_words as usize != corpus.num_words() || ckpt.topics.len() != corpus.num_tokens() {
        return Err(Failure::Usage(anyhow!(
            "checkpoint holds {} words / {} tokens, corpus has {} / {}",
            ckpt.num_words,
            ckpt.topics.len(),
            corpus.num_words(),
            corpus.num_tokens()
        )));
    }
    let defaults = TrainerConfig::new(ckpt.topics_k);
    let config = TrainerConfig {
        alpha: args.alpha.unwrap_or(defaults.alpha),
        beta: args.beta,
        sampler: SamplerKind::TwoBranch,
        iterations: 0,
        ..defaults
    };
    let trainer = Trainer::resume(corpus, config, CounterRng::new(0), &ckpt.topics, ckpt.iteration)
        .map_err(|e| engine_error(e, "cannot rebuild state"))?;
    let llpt = trainer.llpt().map_err(|e| engine_error(e, "evaluation failed"))?;
    println!("{llpt:?}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => train(args),
        Command::Eval(args) => eval(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
