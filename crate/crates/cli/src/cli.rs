//! Command-line front end.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::{BufRead, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use acoso_core::corpus::{
    generate_synthetic_corpus, keyword_filter, preprocess, synthetic_filler, KeywordSet, LabeledText, Polarity,
    PreprocessConfig, SyntheticSpec,
};
use acoso_core::embeddings::{build_embedding_matrix, EmbeddingMatrix, WordVectorStore};
use acoso_core::eval::{self, TrainConfig};
use acoso_core::model::{ModelConfig, DEFAULT_FILTERS_PER_WIDTH, DEFAULT_LEARNING_RATE};
use acoso_core::vocab::{build_vocabulary, corpus_frequency, encode_dataset, EncodedDataset, Vocabulary, DEFAULT_MAX_LEN};
use acoso_core::zipf::{fit_zipf, plot_rows, rank_frequency};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::io;
use crate::parallel;

#[derive(Debug, Parser)]
#[command(name = "acoso", version, about = "Spanish cyberbullying detection: corpus tools, CNN training and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic corpus from keyword phrases and Zipf filler
    Synth(SynthArgs),
    /// Normalize texts and write their tokens
    Preprocess(PreprocessArgs),
    /// Build the frequency-ranked vocabulary
    Vocab(VocabArgs),
    /// Rank/frequency table with a fitted power law
    Zipf(ZipfArgs),
    /// Train one model on a random train/test split
    Train(TrainArgs),
    /// Repeated split/train/evaluate rounds with per-epoch checkpoints
    Crossval(CrossvalArgs),
    /// Score one text per input line with a trained checkpoint
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct TextArgs {
    /// Stop-word file, one word per line (default: built-in Spanish list)
    #[arg(long, value_name = "FILE", conflicts_with = "no_stopwords")]
    pub stopwords: Option<PathBuf>,
    /// Keep stop words
    #[arg(long)]
    pub no_stopwords: bool,
    /// Fold accented vowels to their base letter (ñ is kept)
    #[arg(long)]
    pub fold_accents: bool,
}

impl TextArgs {
    fn config(&self) -> Result<PreprocessConfig> {
        let mut cfg = if self.no_stopwords {
            PreprocessConfig::default()
        } else if let Some(path) = &self.stopwords {
            PreprocessConfig::default().with_stopwords(io::read_stopwords(path)?)
        } else {
            PreprocessConfig::spanish()
        };
        cfg.fold_accents = self.fold_accents;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of bullying (label 1) texts
    #[arg(long, default_value_t = 1000)]
    pub bullying: usize,
    /// Number of non-bullying (label 0) texts
    #[arg(long, default_value_t = 1000)]
    pub clean: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output corpus CSV (id,label,text)
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Bullying keyword phrases (default: built-in list)
    #[arg(long, value_name = "FILE")]
    pub keywords_bullying: Option<PathBuf>,
    /// Non-bullying keyword phrases (default: built-in list)
    #[arg(long, value_name = "FILE")]
    pub keywords_clean: Option<PathBuf>,
    /// Number of distinct filler words
    #[arg(long, default_value_t = 500)]
    pub filler_vocab: usize,
    /// Zipf exponent of the filler distribution
    #[arg(long, default_value_t = 1.0)]
    pub zipf_alpha: f64,
    /// Also write synthetic word vectors for every filler and keyword token
    #[arg(long, value_name = "FILE")]
    pub vectors_out: Option<PathBuf>,
    /// Dimension of the synthetic word vectors
    #[arg(long, default_value_t = 32, requires = "vectors_out")]
    pub dim: usize,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Input corpus CSV (id,label,text)
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Output CSV (id,label,tokens) with space-separated tokens
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Keep only texts containing one of these keyword phrases
    #[arg(long, value_name = "FILE")]
    pub filter_keywords: Option<PathBuf>,
    #[command(flatten)]
    pub text: TextArgs,
}

#[derive(Debug, Args)]
pub struct VocabArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Output TSV (token, index, count)
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Keep only the most frequent tokens
    #[arg(long)]
    pub max_size: Option<usize>,
    #[command(flatten)]
    pub text: TextArgs,
}

#[derive(Debug, Args)]
pub struct ZipfArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Number of ranks to write
    #[arg(long, default_value_t = 100)]
    pub top: usize,
    /// Output CSV (rank,token,observed_count,zipf_expected_count)
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Fit only the first N ranks (default: all)
    #[arg(long)]
    pub fit_ranks: Option<usize>,
    #[command(flatten)]
    pub text: TextArgs,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Word vectors in word2vec text format
    #[arg(long, value_name = "FILE")]
    pub embeddings: PathBuf,
    /// Vector dimension (default: read from the file)
    #[arg(long)]
    pub dim: Option<usize>,
    /// Sequence length; longer texts are truncated, shorter ones padded
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    pub max_len: usize,
    /// Convolution window widths
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    pub widths: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_FILTERS_PER_WIDTH)]
    pub filters: usize,
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 8)]
    pub epochs: usize,
    /// Fraction of texts used for training
    #[arg(long, default_value_t = 0.9)]
    pub train_fraction: f64,
    /// Also update word vectors during training
    #[arg(long)]
    pub fine_tune: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub text: TextArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output checkpoint of the selected epoch
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Output vocabulary TSV
    #[arg(long, value_name = "FILE")]
    pub vocab_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 4)]
    pub iterations: usize,
    /// Iterations run in parallel
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Directory for table3.csv, table4.csv, checkpoints.csv, vocab.tsv and checkpoints/
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Trained checkpoint
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Vocabulary TSV the model was trained with
    #[arg(long, value_name = "FILE")]
    pub vocab: PathBuf,
    /// One text per line (default: standard input)
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Output `label,probability` lines (default: standard output)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub text: TextArgs,
}

/// Parses `args` and runs the command. Returns the process exit code:
/// 0 on success, 1 on a domain error, 2 on a usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Preprocess(a) => preprocess_cmd(a),
        Command::Vocab(a) => vocab_cmd(a),
        Command::Zipf(a) => zipf_cmd(a),
        Command::Train(a) => train(a),
        Command::Crossval(a) => crossval(a),
        Command::Predict(a) => predict(a),
    }
}

fn keywords(path: Option<&Path>, polarity: Polarity) -> Result<KeywordSet> {
    Ok(match (path, polarity) {
        (Some(p), _) => io::read_keywords(p, polarity)?,
        (None, Polarity::Bullying) => KeywordSet::default_bullying(),
        (None, Polarity::NoBullying) => KeywordSet::default_no_bullying(),
    })
}

fn synth(a: SynthArgs) -> Result<()> {
    let pos = keywords(a.keywords_bullying.as_deref(), Polarity::Bullying)?;
    let neg = keywords(a.keywords_clean.as_deref(), Polarity::NoBullying)?;
    let spec = SyntheticSpec {
        n_bullying: a.bullying,
        n_clean: a.clean,
        keywords_pos: &pos,
        keywords_neg: &neg,
        filler_vocab_size: a.filler_vocab,
        zipf_alpha: a.zipf_alpha,
        seed: a.seed,
    };
    let corpus = generate_synthetic_corpus(&spec)?;
    io::write_corpus(&a.out, &corpus)?;
    if let Some(path) = &a.vectors_out {
        let mut tokens: BTreeSet<String> = synthetic_filler(&spec).into_iter().collect();
        tokens.extend(pos.tokens());
        tokens.extend(neg.tokens());
        let tokens: Vec<String> = tokens.into_iter().collect();
        let store = WordVectorStore::synthetic(&tokens, a.dim, a.seed)?;
        io::write_word_vectors(path, &store)?;
    }
    Ok(())
}

fn preprocess_cmd(a: PreprocessArgs) -> Result<()> {
    let cfg = a.text.config()?;
    let mut corpus = io::read_corpus(&a.corpus)?;
    if let Some(path) = &a.filter_keywords {
        corpus = keyword_filter(&corpus, &io::read_keywords(path, Polarity::Bullying)?)?;
    }
    let tokenized: Vec<LabeledText> = corpus
        .iter()
        .map(|r| LabeledText::new(r.id.clone(), preprocess(&r.text, &cfg).join(" "), r.label))
        .collect();
    io::write_atomic(&a.out, &io::tokens_csv(&tokenized)?)?;
    Ok(())
}

fn corpus_vocabulary(corpus: &[LabeledText], cfg: &PreprocessConfig, max_size: Option<usize>) -> Vocabulary {
    build_vocabulary(&corpus_frequency(corpus, cfg), max_size)
}

fn vocab_cmd(a: VocabArgs) -> Result<()> {
    let cfg = a.text.config()?;
    let corpus = io::read_corpus(&a.corpus)?;
    io::write_vocabulary(&a.out, &corpus_vocabulary(&corpus, &cfg, a.max_size))?;
    Ok(())
}

fn zipf_cmd(a: ZipfArgs) -> Result<()> {
    let cfg = a.text.config()?;
    let corpus = io::read_corpus(&a.corpus)?;
    let rf = rank_frequency(&corpus_frequency(&corpus, &cfg))?;
    let fit = fit_zipf(&rf, a.fit_ranks)?;
    io::write_atomic(&a.out, &io::zipf_csv(&plot_rows(&rf, &fit, a.top))?)?;
    println!(
        "alpha={:.4} ln_scale={:.4} r2={:.4} points={}",
        fit.alpha, fit.ln_scale, fit.log_log_r2, fit.n_points
    );
    Ok(())
}

struct Prepared {
    dataset: EncodedDataset,
    vocab: Vocabulary,
    embedding: Arc<EmbeddingMatrix>,
    model_config: ModelConfig,
    train_config: TrainConfig,
}

fn prepare(corpus_path: &Path, m: &ModelArgs, iterations: usize) -> Result<Prepared> {
    let cfg = m.text.config()?;
    let corpus = io::read_corpus(corpus_path)?;
    if corpus.is_empty() {
        bail!("{}: corpus has no records", corpus_path.display());
    }
    let vocab = corpus_vocabulary(&corpus, &cfg, None);
    let dim = match m.dim {
        Some(d) => d,
        None => io::detect_dim(&m.embeddings)?,
    };
    let keep: BTreeSet<String> = vocab.tokens().iter().cloned().collect();
    let store = io::load_word_vectors(&m.embeddings, dim, Some(keep))?;
    let embedding = Arc::new(build_embedding_matrix(&vocab, &store));
    eprintln!(
        "{} texts, {} vocabulary tokens, {:.1}% with vectors",
        corpus.len(),
        vocab.len(),
        embedding.coverage() * 100.0
    );
    let dataset = encode_dataset(&corpus, &cfg, &vocab, m.max_len)?;
    let model_config = ModelConfig {
        max_len: m.max_len,
        dim,
        filter_widths: m.widths.clone(),
        filters_per_width: m.filters,
        learning_rate: m.learning_rate,
        fine_tune_embeddings: m.fine_tune,
        seed: m.seed,
    };
    model_config.validate()?;
    let train_config = TrainConfig {
        iterations,
        epochs: m.epochs,
        train_fraction: m.train_fraction,
        batch_size: m.batch_size,
        seed: m.seed,
    };
    train_config.validate()?;
    Ok(Prepared {
        dataset,
        vocab,
        embedding,
        model_config,
        train_config,
    })
}

fn train(a: TrainArgs) -> Result<()> {
    let p = prepare(&a.corpus, &a.model, 1)?;
    let run = eval::cross_validation_iteration(&p.dataset, &p.train_config, &p.model_config, p.embedding, 1)?;
    let best = run
        .checkpoints
        .iter()
        .find(|c| c.epoch == run.report.selected_epoch)
        .context("selected checkpoint missing")?;
    io::save_checkpoint(&a.out, best)?;
    io::write_vocabulary(&a.vocab_out, &p.vocab)?;

    let mut out = String::from("epoch,accuracy,loss\n");
    for c in &run.checkpoints {
        writeln!(out, "{},{:.2},{}", c.epoch, c.train_accuracy * 100.0, c.train_loss)?;
    }
    writeln!(
        out,
        "selected_epoch={} test_success_pct={:.2} test_fail_pct={:.2}",
        run.report.selected_epoch, run.report.test.success_pct, run.report.test.fail_pct
    )?;
    print!("{out}");
    Ok(())
}

fn crossval(a: CrossvalArgs) -> Result<()> {
    let p = prepare(&a.corpus, &a.model, a.iterations)?;
    let cv = parallel::cross_validate(&p.dataset, &p.train_config, &p.model_config, p.embedding, a.jobs)?;

    let ckpt_dir = a.out_dir.join("checkpoints");
    io::create_dir_all(&ckpt_dir)?;
    for c in &cv.checkpoints {
        io::save_checkpoint(&ckpt_dir.join(io::checkpoint_file_name(c.iteration, c.epoch)), c)?;
    }
    io::write_vocabulary(&a.out_dir.join("vocab.tsv"), &p.vocab)?;
    io::write_atomic(&a.out_dir.join("checkpoints.csv"), &io::checkpoint_index_csv(&cv.checkpoints)?)?;
    io::write_atomic(&a.out_dir.join("table3.csv"), &io::table3_csv(&cv.report)?)?;
    let table4 = io::table4_csv(&cv.report)?;
    io::write_atomic(&a.out_dir.join("table4.csv"), &table4)?;
    std::io::stdout().write_all(&table4)?;
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let cfg = a.text.config()?;
    let params = io::load_checkpoint(&a.model)?.params;
    let vocab = io::read_vocabulary(&a.vocab)?;

    let lines: Vec<String> = match &a.input {
        Some(path) => io::read_to_string(path)?.lines().map(String::from).collect(),
        None => std::io::stdin().lock().lines().collect::<Result<_, _>>()?,
    };
    let mut out = String::new();
    for (i, line) in lines.iter().enumerate() {
        let p = params
            .predict(line, &cfg, &vocab)
            .with_context(|| format!("input line {}", i + 1))?;
        writeln!(out, "{},{}", p.label.as_u8(), p.probability)?;
    }
    match &a.out {
        Some(path) => io::write_atomic(path, out.as_bytes())?,
        None => std::io::stdout().write_all(out.as_bytes())?,
    }
    Ok(())
}
