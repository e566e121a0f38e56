//! Command-line front end: grammar compilation, data generation, language
//! model and tagger training, streaming conversion, evaluation, and
//! benchmarks.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/parse error, 3 internal
//! invariant violation.

use clap::{Parser, Subcommand};
use itn::datagen::{generate_corpus, read_corpus};
use itn::eval::{bench_runtime, evaluate, read_testset, BaselineConverter};
use itn::ngram::{NGramModel, DEFAULT_ALPHA, DEFAULT_LAMBDA, DEFAULT_ORDER};
use itn::pipeline::{EngineConfig, ItnEngine, DEFAULT_CACHE_CAPACITY, DEFAULT_MAX_SPAN};
use itn::rules::{load_pack, GrammarPack};
use itn::tagger::{train, TagInventory, TaggerConfig, TaggerModel, TrainConfig};
use itn::{Error, Result};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "itn", version, about = "Streaming inverse text normalization")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and compile a grammar pack, persist it, print a summary.
    CompileRules {
        /// Directory of <category>.rules sources.
        #[arg(long)]
        pack: PathBuf,
        /// Output directory for the compiled pack.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate tagger training data from written-form text.
    GenData {
        #[arg(long)]
        pack: PathBuf,
        /// Language model for category disambiguation.
        #[arg(long)]
        lm: PathBuf,
        /// Written-form corpus, one sentence per line.
        #[arg(long = "in")]
        input: PathBuf,
        /// Output TSV (token<TAB>tag rows, blank line between sentences).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train an n-gram language model from tokenized text.
    TrainLm {
        /// Token corpus, one sentence per line.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ORDER)]
        order: usize,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Train the chunk-attention tagger on a TSV corpus.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Flat key=value hyperparameter file (optional).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output checkpoint (.itnt).
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert lexical text on stdin to display text on stdout.
    Run {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        pack: PathBuf,
        /// Token-per-line streaming protocol instead of line-per-sentence.
        #[arg(long)]
        stream: bool,
        /// In --stream mode, force tag emission after every token line.
        #[arg(long)]
        flush_on_newline: bool,
        /// Override the chunk size (must match the trained model unless --force).
        #[arg(long)]
        chunk: Option<usize>,
        #[arg(long)]
        force: bool,
        #[arg(long, default_value_t = DEFAULT_MAX_SPAN)]
        max_span: usize,
        #[arg(long, default_value_t = DEFAULT_CACHE_CAPACITY)]
        cache_capacity: usize,
        #[arg(long)]
        no_cache: bool,
    },
    /// Score a converter against a lexical<TAB>display test set.
    Eval {
        #[arg(long)]
        pack: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Use oracle tags from a gen-data TSV instead of the tagger.
        #[arg(long)]
        oracle: bool,
        /// Tagged TSV aligned with the test set (required with --oracle).
        #[arg(long)]
        tags: Option<PathBuf>,
        /// Evaluate the non-streaming baseline ("wfst-ngram").
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long)]
        lm: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long, default_value_t = 8)]
        nbest: usize,
    },
    /// Runtime scaling benchmark: engine vs full-utterance baseline.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        pack: PathBuf,
        #[arg(long)]
        lm: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long, default_value_t = 4)]
        nbest: usize,
        #[arg(long, default_value = "10,20,40,80,160", value_delimiter = ',')]
        lengths: Vec<usize>,
        #[arg(long, default_value_t = 30)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Retrain across chunk sizes and report the latency/accuracy curve.
    SweepChunk {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "1,2,4,6,11", value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let benign = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            std::process::exit(if benign { 0 } else { 1 });
        }
    };
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(classify(&e));
        }
    }
}

fn classify(e: &Error) -> i32 {
    match e {
        Error::SearchBudget | Error::CyclicInput | Error::SymbolTableMismatch => 3,
        _ => 2,
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::CompileRules { pack, out } => compile_rules(&pack, &out),
        Cmd::GenData { pack, lm, input, out, seed } => gen_data(&pack, &lm, &input, &out, seed),
        Cmd::TrainLm { input, out, order, alpha } => train_lm(&input, &out, order, alpha),
        Cmd::Train { data, config, out } => train_cmd(&data, config.as_deref(), &out),
        Cmd::Run {
            model,
            pack,
            stream,
            flush_on_newline,
            chunk,
            force,
            max_span,
            cache_capacity,
            no_cache,
        } => run_cmd(
            &model,
            &pack,
            stream,
            flush_on_newline,
            chunk,
            force,
            EngineConfig {
                max_span_len: max_span,
                cache_capacity,
                cache_enabled: !no_cache,
            },
        ),
        Cmd::Eval { pack, test, model, oracle, tags, baseline, lm, lambda, nbest } => eval_cmd(
            &pack,
            &test,
            model.as_deref(),
            oracle,
            tags.as_deref(),
            baseline.as_deref(),
            lm.as_deref(),
            lambda,
            nbest,
        ),
        Cmd::Bench { model, pack, lm, lambda, nbest, lengths, trials, seed } => bench_cmd(
            &model,
            &pack,
            lm.as_deref(),
            lambda,
            nbest,
            &lengths,
            trials,
            seed,
        ),
        Cmd::SweepChunk { data, sizes, config } => sweep_chunk(&data, &sizes, config.as_deref()),
    }
}

/// Loads either compiled (manifest.json present) or source grammar packs.
fn load_any_pack(dir: &Path) -> Result<GrammarPack> {
    if dir.join("manifest.json").exists() {
        GrammarPack::load_compiled(dir)
    } else {
        load_pack(dir)
    }
}

fn compile_rules(pack_dir: &Path, out: &Path) -> Result<()> {
    let pack = load_pack(pack_dir)?;
    pack.save(out)?;
    println!("{} categories compiled", pack.len());
    for cat in pack.categories() {
        println!(
            "  {}: {} states (itn), {} states (tn), max {} display tokens",
            cat.name,
            cat.itn.num_states(),
            cat.tn.num_states(),
            cat.max_written_tokens
        );
    }
    Ok(())
}

fn gen_data(pack_dir: &Path, lm: &Path, input: &Path, out: &Path, seed: u64) -> Result<()> {
    let pack = load_any_pack(pack_dir)?;
    let lm = NGramModel::load(lm)?;
    let stats = generate_corpus(input, &pack, &lm, seed, out)?;
    println!("{} sentences", stats.sentences);
    for (cat, n) in &stats.spans {
        println!("  {cat}: {n} spans");
    }
    Ok(())
}

fn read_token_lines(path: &Path) -> Result<Vec<Vec<String>>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(raw
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect())
}

fn train_lm(input: &Path, out: &Path, order: usize, alpha: f64) -> Result<()> {
    let corpus = read_token_lines(input)?;
    let lm = NGramModel::train_with_alpha(&corpus, order, alpha)?;
    lm.save(out)?;
    println!(
        "order {} model over {} sentences, vocabulary {}",
        order,
        corpus.len(),
        lm.vocab_size()
    );
    Ok(())
}

/// Flat key=value hyperparameter file; unknown keys are an error.
fn load_train_config(path: &Path) -> Result<(TaggerConfig, TrainConfig)> {
    let mut arch = TaggerConfig::default();
    let mut hyper = TrainConfig::default();
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for (lineno, line) in raw.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            file: path.display().to_string(),
            line: lineno + 1,
            col: 1,
            msg: "expected key=value".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| Error::Parse {
            file: path.display().to_string(),
            line: lineno + 1,
            col: 1,
            msg: format!("bad {what} value `{value}` for `{key}`"),
        };
        macro_rules! set {
            ($field:expr, usize) => {
                $field = value.parse().map_err(|_| bad("integer"))?
            };
            ($field:expr, u64) => {
                $field = value.parse().map_err(|_| bad("integer"))?
            };
            ($field:expr, f64) => {
                $field = value.parse().map_err(|_| bad("float"))?
            };
        }
        match key {
            "num_blocks" => set!(arch.num_blocks, usize),
            "model_dim" => set!(arch.model_dim, usize),
            "num_heads" => set!(arch.num_heads, usize),
            "ffn_dim" => set!(arch.ffn_dim, usize),
            "chunk_size" => set!(arch.chunk_size, usize),
            "dropout" => set!(arch.dropout, f64),
            "max_position" => set!(arch.max_position, usize),
            "max_history_chunks" => set!(arch.max_history_chunks, usize),
            "epochs" => set!(hyper.epochs, usize),
            "batch_size" => set!(hyper.batch_size, usize),
            "warmup_steps" => set!(hyper.warmup_steps, usize),
            "peak_lr" => set!(hyper.peak_lr, f64),
            "weight_decay" => set!(hyper.weight_decay, f64),
            "min_count" => set!(hyper.min_count, usize),
            "seed" => set!(hyper.seed, u64),
            "holdout" => set!(hyper.holdout, f64),
            "target_f1" => set!(hyper.target_f1, f64),
            other => {
                return Err(Error::Parse {
                    file: path.display().to_string(),
                    line: lineno + 1,
                    col: 1,
                    msg: format!("unknown key `{other}`"),
                })
            }
        }
    }
    Ok((arch, hyper))
}

fn train_cmd(data: &Path, config: Option<&Path>, out: &Path) -> Result<()> {
    let corpus = read_corpus(data)?;
    let (arch, hyper) = match config {
        Some(p) => load_train_config(p)?,
        None => (TaggerConfig::default(), TrainConfig::default()),
    };
    let (model, report) = train(&corpus, arch, &hyper)?;
    for (epoch, (loss, f1)) in report.epoch_losses.iter().zip(&report.holdout_f1).enumerate() {
        println!("epoch {:>3}  loss {loss:.4}  holdout F1 {f1:.4}", epoch + 1);
    }
    println!(
        "best epoch {} with holdout F1 {:.4}",
        report.best_epoch + 1,
        report.best_f1
    );
    model.save(out)?;
    println!("checkpoint written to {}", out.display());
    Ok(())
}

fn load_model(path: &Path, chunk: Option<usize>, force: bool) -> Result<TaggerModel> {
    let mut model = TaggerModel::load(path)?;
    if let Some(c) = chunk {
        if c != model.config.chunk_size && !force {
            return Err(Error::Config(format!(
                "model was trained with chunk size {}; pass --force to run at {c}",
                model.config.chunk_size
            )));
        }
        model.config.chunk_size = c;
        model.config.validate()?;
    }
    Ok(model)
}

fn run_cmd(
    model: &Path,
    pack_dir: &Path,
    stream: bool,
    flush_on_newline: bool,
    chunk: Option<usize>,
    force: bool,
    config: EngineConfig,
) -> Result<()> {
    let model = load_model(model, chunk, force)?;
    let pack = load_any_pack(pack_dir)?;
    let engine = ItnEngine::new(Arc::new(model), Arc::new(pack), config)?;
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout().lock();
    let echo = |stdout: &mut std::io::StdoutLock<'_>, tokens: &[String]| -> Result<()> {
        for t in tokens {
            writeln!(stdout, "{t}").map_err(|e| Error::io(Path::new("<stdout>"), e))?;
        }
        stdout.flush().map_err(|e| Error::io(Path::new("<stdout>"), e))
    };
    if stream {
        // One token per line; an empty line ends the utterance.
        let mut session = engine.session();
        for line in stdin.lock().lines() {
            let line = line.map_err(|e| Error::io(Path::new("<stdin>"), e))?;
            let token = line.trim();
            if token.is_empty() {
                echo(&mut stdout, &session.flush()?)?;
                continue;
            }
            echo(&mut stdout, &session.push(token)?)?;
            if flush_on_newline {
                echo(&mut stdout, &session.flush()?)?;
            }
        }
        echo(&mut stdout, &session.flush()?)?;
    } else {
        for line in stdin.lock().lines() {
            let line = line.map_err(|e| Error::io(Path::new("<stdin>"), e))?;
            let tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
            let out = engine.convert(&tokens)?;
            writeln!(stdout, "{}", out.join(" ")).map_err(|e| Error::io(Path::new("<stdout>"), e))?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn eval_cmd(
    pack_dir: &Path,
    test: &Path,
    model: Option<&Path>,
    oracle: bool,
    tags: Option<&Path>,
    baseline: Option<&str>,
    lm: Option<&Path>,
    lambda: f64,
    nbest: usize,
) -> Result<()> {
    let pack = load_any_pack(pack_dir)?;
    let testset = read_testset(test)?;
    let report = if let Some(kind) = baseline {
        if kind != "wfst-ngram" {
            return Err(Error::Config(format!("unknown baseline `{kind}`")));
        }
        let lm = lm.map(NGramModel::load).transpose()?;
        let lexicon: Vec<&String> = testset.iter().flat_map(|(lex, _)| lex.iter()).collect();
        let b = BaselineConverter::new(&pack, lexicon);
        evaluate(|lex| b.convert(lex, lm.as_ref(), lambda, nbest), &testset)?
    } else if oracle {
        let tags_path = tags.ok_or_else(|| Error::Config("--oracle requires --tags".into()))?;
        let tagged = read_corpus(tags_path)?;
        if tagged.len() != testset.len() {
            return Err(Error::Config(format!(
                "--tags has {} sentences but the test set has {}",
                tagged.len(),
                testset.len()
            )));
        }
        let inventory = TagInventory::from_corpus(&tagged);
        let dummy = TaggerModel::init(
            TaggerConfig::default(),
            itn::tagger::Vocab::build(std::iter::empty(), 1),
            inventory,
            0,
        )?;
        let engine = ItnEngine::new(Arc::new(dummy), Arc::new(pack), EngineConfig::default())?;
        let mut it = tagged.iter();
        evaluate(
            |lex| {
                let t = it.next().expect("length checked");
                if t.tokens != lex {
                    return Err(Error::Config("tag rows do not match test tokens".into()));
                }
                engine.convert_with_tags(lex, &t.tags)
            },
            &testset,
        )?
    } else {
        let model_path = model.ok_or_else(|| Error::Config("--model required".into()))?;
        let model = load_model(model_path, None, false)?;
        let engine = ItnEngine::new(Arc::new(model), Arc::new(pack), EngineConfig::default())?;
        evaluate(|lex| engine.convert(lex), &testset)?
    };
    println!(
        "sentences {}  TP {}  FP {}  FN {}",
        report.sentences, report.counts.tp, report.counts.fp, report.counts.fn_
    );
    println!(
        "precision {:.4}  recall {:.4}  F1 {:.4}  TER {:.2}",
        report.precision, report.recall, report.f1, report.ter
    );
    println!(
        "{}",
        serde_json::to_string(&report).map_err(|e| Error::Format(e.to_string()))?
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn bench_cmd(
    model: &Path,
    pack_dir: &Path,
    lm: Option<&Path>,
    lambda: f64,
    nbest: usize,
    lengths: &[usize],
    trials: usize,
    seed: u64,
) -> Result<()> {
    let model = TaggerModel::load(model)?;
    let pack = Arc::new(load_any_pack(pack_dir)?);
    let engine = ItnEngine::new(Arc::new(model), pack.clone(), EngineConfig::default())?;
    let lm = lm.map(NGramModel::load).transpose()?;
    let lexicon: Vec<String> = itn::synth::bench_tokens(200, seed);
    let baseline = BaselineConverter::new(&pack, &lexicon);
    let report = bench_runtime(
        &engine,
        &baseline,
        lm.as_ref(),
        lambda,
        nbest,
        lengths,
        trials,
        seed,
    )?;
    println!("{:>6} {:>14} {:>14}", "len", "engine (s)", "baseline (s)");
    for row in &report.rows {
        println!(
            "{:>6} {:>14.6} {:>14.6}",
            row.len, row.engine_secs, row.baseline_secs
        );
    }
    println!(
        "fitted exponents: engine {:.3}, baseline {:.3}",
        report.engine_exponent, report.baseline_exponent
    );
    println!(
        "{}",
        serde_json::to_string(&report).map_err(|e| Error::Format(e.to_string()))?
    );
    Ok(())
}

fn sweep_chunk(data: &Path, sizes: &[usize], config: Option<&Path>) -> Result<()> {
    let corpus = read_corpus(data)?;
    let (base_arch, hyper) = match config {
        Some(p) => load_train_config(p)?,
        None => (TaggerConfig::default(), TrainConfig::default()),
    };
    println!(
        "{:>6} {:>9} {:>10} {:>10} {:>10}",
        "chunk", "latency", "precision", "recall", "F1"
    );
    for &c in sizes {
        let arch = TaggerConfig { chunk_size: c, ..base_arch };
        let (model, report) = train(&corpus, arch, &hyper)?;
        let held: Vec<_> = report.holdout_indices.iter().map(|&i| &corpus[i]).collect();
        let (p, r, f1) = span_prf(&model, &held)?;
        println!(
            "{:>6} {:>9.1} {:>10.4} {:>10.4} {:>10.4}",
            c,
            (c as f64 - 1.0) / 2.0,
            p,
            r,
            f1
        );
    }
    Ok(())
}

/// Span-level precision/recall/F1 of a model's tags against references.
fn span_prf(
    model: &TaggerModel,
    sentences: &[&itn::datagen::TaggedSentence],
) -> Result<(f64, f64, f64)> {
    use itn::tagger::tag_spans;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for s in sentences {
        let hyp = model.tag_tokens(&s.tokens)?;
        let h = tag_spans(&hyp);
        let r = tag_spans(&s.tags);
        tp += h.iter().filter(|x| r.contains(x)).count();
        fp += h.iter().filter(|x| !r.contains(x)).count();
        fn_ += r.iter().filter(|x| !h.contains(x)).count();
    }
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    Ok((p, r, f1))
}
