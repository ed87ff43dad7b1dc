//! The `murre` command line: one binary, one subcommand per pipeline stage.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use crate::adapt::{adapt_lines, Decoding, ModelTranslator};
use crate::corpus::{
    check_dialects, clean_text, load_corpus, parse_tsv, stratified_split, write_tsv, CleaningMap, CorpusFormat,
    DialectManifest, ParallelExample, SplitRatios,
};
use crate::error::Error;
use crate::eval::{evaluate_with_outputs, wer_matrix, TestSet, WerReport};
use crate::model::{build_vocabulary, Model, ModelConfig};
use crate::synth::{generate_corpus, RewriteRuleSet, SentenceLength};
use crate::textcodec::FlagMode;
use crate::training::{
    make_training_pairs, parse_key_values, train_with_progress, transfer_train_checkpoint, Progress,
    TrainingConfig,
};

#[derive(Debug, Parser)]
#[command(name = "murre", version, about = "Adapt standard Finnish text to dialects")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Strip annotation characters from a corpus file, line by line.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        /// Two-column cleaning map: character, replacement (empty deletes).
        #[arg(long)]
        cleaning: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Split a corpus per dialect into train.tsv, valid.tsv and test.tsv.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "0.7,0.15,0.15")]
        ratios: SplitRatios,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Generate a parallel corpus from rewrite-rule dialects.
    Synth {
        /// A `.rules` file or a directory of them, one dialect per file.
        #[arg(long)]
        rules: PathBuf,
        /// Word list, one word per line.
        #[arg(long)]
        vocabulary: PathBuf,
        #[arg(long)]
        sentences: usize,
        #[arg(long, default_value_t = 2)]
        min_words: usize,
        #[arg(long, default_value_t = 8)]
        max_words: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
        /// Also write a dialect manifest here.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Train a flagged multi-dialect or a generic model.
    Train(TrainArgs),
    /// Continue a generic model on one dialect with the encoder input side frozen.
    Transfer(TransferArgs),
    /// Adapt a text file, one sentence per line.
    Adapt {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Target dialect; required by flagged models.
        #[arg(long)]
        dialect: Option<String>,
        #[command(flatten)]
        decoding: DecodingArgs,
    },
    /// Score a model on a test corpus.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Only score this dialect's sentences.
        #[arg(long)]
        dialect: Option<String>,
        /// Write the adapted sentences here, one per line.
        #[arg(long)]
        hypotheses: Option<PathBuf>,
        #[command(flatten)]
        decoding: DecodingArgs,
    },
    /// Score several models on every dialect of a test corpus.
    Matrix {
        /// Lines of `name<TAB>checkpoint`; relative paths resolve against this file.
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Label recorded with each cell; defaults to the test file path.
        #[arg(long)]
        split_label: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        table: Option<PathBuf>,
        #[command(flatten)]
        decoding: DecodingArgs,
    },
}

#[derive(Debug, Args)]
pub struct DecodingArgs {
    /// Beam width; 1 decodes greedily.
    #[arg(long, default_value_t = 1)]
    pub beam: usize,
}

impl DecodingArgs {
    fn decoding(&self) -> anyhow::Result<Decoding> {
        match self.beam {
            0 => bail!(Error::InvalidArgument("beam width must be at least 1".into())),
            1 => Ok(Decoding::Greedy),
            w => Ok(Decoding::Beam(w)),
        }
    }
}

#[derive(Debug, Args)]
pub struct RunOptions {
    /// Config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set steps=500`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub valid: Option<PathBuf>,
    /// Dialect manifest (`id<TAB>flag label` lines); defaults to the ids in the data.
    #[arg(long)]
    pub dialects: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunOptions,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub valid: Option<PathBuf>,
    #[arg(long)]
    pub dialect: String,
    #[command(flatten)]
    pub run: RunOptions,
}

/// Model shape and regime of a `train` run, on top of the training keys.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub mode: FlagMode,
    pub model: ModelConfig,
    pub training: TrainingConfig,
}

impl TrainSettings {
    pub const MODEL_KEYS: [&'static str; 4] = ["mode", "profile", "emb_dim", "hidden_dim"];

    fn defaults(preset: &str) -> anyhow::Result<Self> {
        Ok(Self {
            mode: FlagMode::Flagged,
            model: ModelConfig::reference(0),
            training: TrainingConfig::preset(preset)?,
        })
    }

    pub fn set(&mut self, key: &str, value: &str) -> crate::Result<()> {
        let num = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
        };
        match key {
            "mode" => self.mode = value.parse()?,
            "profile" => {
                self.model = match value {
                    "reference" => ModelConfig::reference(0),
                    "desk" => ModelConfig::desk(0),
                    "tiny" => ModelConfig::tiny(0),
                    _ => return Err(Error::Config(format!("unknown profile {value:?}"))),
                }
            }
            "emb_dim" => self.model.emb_dim = num(value)?,
            "hidden_dim" => self.model.hidden_dim = num(value)?,
            _ => self.training.set(key, value)?,
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        format!(
            "mode = {}\nemb_dim = {}\nhidden_dim = {}\n{}",
            self.mode,
            self.model.emb_dim,
            self.model.hidden_dim,
            self.training.to_text()
        )
    }
}

/// Applies a config file, then `key=value` overrides, in that order. A `preset`
/// key, if present, must come first in the file.
fn resolve<T>(
    opts: &RunOptions,
    mut settings: T,
    rebase: impl Fn(&str) -> anyhow::Result<T>,
    set: impl Fn(&mut T, &str, &str) -> crate::Result<()>,
) -> anyhow::Result<T> {
    let mut pairs = Vec::new();
    if let Some(path) = &opts.config {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        pairs.extend(parse_key_values(&text)?);
    }
    for o in &opts.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {o:?} is not KEY=VALUE")))?;
        pairs.push((k.trim().to_owned(), v.trim().to_owned()));
    }
    for (i, (k, v)) in pairs.iter().enumerate() {
        if k == "preset" {
            if i != 0 {
                bail!(Error::Config("preset must be the first key".into()));
            }
            settings = rebase(v)?;
        } else {
            set(&mut settings, k, v)?;
        }
    }
    Ok(settings)
}

fn load_examples(path: &Path) -> anyhow::Result<Vec<ParallelExample>> {
    Ok(load_corpus(path, CorpusFormat::Tsv)?)
}

fn report_line(r: &WerReport) -> String {
    let pct = |x: Option<f64>| x.map(|v| format!("{v:.4} ({:.2}%)", v * 100.0)).unwrap_or_else(|| "n/a".into());
    format!(
        "sentences {} excluded {} macro_wer {} micro_wer {} S {} D {} I {} C {}",
        r.sentences(),
        r.excluded,
        pct(r.macro_wer),
        pct(r.micro_wer),
        r.totals.substitutions,
        r.totals.deletions,
        r.totals.insertions,
        r.totals.correct
    )
}

fn progress_printer(label: &str) -> impl FnMut(&Progress) + '_ {
    move |p: &Progress| {
        let valid = p.valid_loss.map(|v| format!(" valid {v:.4}")).unwrap_or_default();
        eprintln!("{label} step {}/{} train {:.4}{valid}", p.step, p.steps, p.train_loss);
    }
}

fn log_config(command: &str, text: &str) {
    eprintln!("# murre {command}");
    for line in text.lines() {
        eprintln!("#   {line}");
    }
}

/// Runs one parsed invocation.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Preprocess {
            input,
            cleaning,
            output,
        } => {
            log_config(
                "preprocess",
                &format!("input = {}\ncleaning = {}\noutput = {}", input.display(), cleaning.display(), output.display()),
            );
            let map = CleaningMap::load(&cleaning)?;
            let text = fs::read_to_string(&input).map_err(|e| Error::io(&input, e))?;
            let cleaned: String = text
                .split_inclusive('\n')
                .map(|line| clean_text(line, &map))
                .collect();
            parse_tsv(&cleaned).context("cleaned corpus is no longer valid")?;
            fs::write(&output, cleaned).map_err(|e| Error::io(&output, e))?;
        }
        Command::Split {
            input,
            ratios,
            seed,
            out_dir,
        } => {
            log_config(
                "split",
                &format!("input = {}\nratios = {ratios}\nseed = {seed}\nout_dir = {}", input.display(), out_dir.display()),
            );
            let examples = load_examples(&input)?;
            let split = stratified_split(&examples, ratios, seed)?;
            fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            for (name, part) in [("train", &split.train), ("valid", &split.valid), ("test", &split.test)] {
                write_tsv(out_dir.join(format!("{name}.tsv")), part)?;
                eprintln!("{name}: {} sentences", part.len());
            }
        }
        Command::Synth {
            rules,
            vocabulary,
            sentences,
            min_words,
            max_words,
            seed,
            output,
            manifest,
        } => {
            log_config(
                "synth",
                &format!(
                    "rules = {}\nvocabulary = {}\nsentences = {sentences}\nmin_words = {min_words}\nmax_words = {max_words}\nseed = {seed}\noutput = {}",
                    rules.display(),
                    vocabulary.display(),
                    output.display()
                ),
            );
            let sets = if rules.is_dir() {
                RewriteRuleSet::load_dir(&rules)?
            } else {
                vec![RewriteRuleSet::load(&rules)?]
            };
            let words_text = fs::read_to_string(&vocabulary).map_err(|e| Error::io(&vocabulary, e))?;
            let words: Vec<&str> = words_text.split_whitespace().collect();
            let corpus = generate_corpus(
                &words,
                &sets,
                sentences,
                SentenceLength {
                    min: min_words,
                    max: max_words,
                },
                seed,
            )?;
            write_tsv(&output, &corpus)?;
            if let Some(path) = manifest {
                let ids: Vec<&str> = sets.iter().map(|s| s.dialect_id.as_str()).collect();
                let m = DialectManifest::from_ids(&ids)?;
                fs::write(&path, m.to_text()).map_err(|e| Error::io(&path, e))?;
            }
        }
        Command::Train(args) => cmd_train(args)?,
        Command::Transfer(args) => cmd_transfer(args)?,
        Command::Adapt {
            checkpoint,
            input,
            output,
            dialect,
            decoding,
        } => {
            log_config(
                "adapt",
                &format!(
                    "checkpoint = {}\ninput = {}\noutput = {}\ndialect = {}\nbeam = {}",
                    checkpoint.display(),
                    input.display(),
                    output.display(),
                    dialect.as_deref().unwrap_or("none"),
                    decoding.beam
                ),
            );
            let model = Model::<f32>::load(&checkpoint)?;
            if model.mode == FlagMode::Flagged {
                match dialect.as_deref() {
                    None => bail!(Error::InvalidArgument("this checkpoint is flagged; pass --dialect".into())),
                    Some(d) if !model.dialects.contains(d) => bail!(Error::UnknownDialect(d.to_owned())),
                    _ => {}
                }
            }
            let text = fs::read_to_string(&input).map_err(|e| Error::io(&input, e))?;
            let lines: Vec<&str> = text.lines().collect();
            let translator = ModelTranslator {
                model: &model,
                decoding: decoding.decoding()?,
            };
            let (adapted, stats) = adapt_lines(&translator, &lines, dialect.as_deref())?;
            let mut out = Vec::new();
            for line in &adapted {
                writeln!(out, "{line}").expect("writing to a Vec cannot fail");
            }
            fs::write(&output, out).map_err(|e| Error::io(&output, e))?;
            eprintln!(
                "adapted {} lines ({} chunks, {} truncated, {} padded)",
                adapted.len(),
                stats.chunks,
                stats.truncated,
                stats.padded
            );
        }
        Command::Evaluate {
            checkpoint,
            test,
            dialect,
            hypotheses,
            decoding,
        } => {
            log_config(
                "evaluate",
                &format!(
                    "checkpoint = {}\ntest = {}\ndialect = {}\nbeam = {}",
                    checkpoint.display(),
                    test.display(),
                    dialect.as_deref().unwrap_or("all"),
                    decoding.beam
                ),
            );
            let model = Model::<f32>::load(&checkpoint)?;
            let mut examples = load_examples(&test)?;
            if let Some(d) = &dialect {
                examples.retain(|e| &e.dialect_id == d);
                if examples.is_empty() {
                    bail!(Error::UnknownDialect(d.clone()));
                }
            }
            let translator = ModelTranslator {
                model: &model,
                decoding: decoding.decoding()?,
            };
            let (report, outputs) = evaluate_with_outputs(&translator, &examples)?;
            if let Some(path) = hypotheses {
                let text: String = outputs.iter().map(|ws| ws.join(" ") + "\n").collect();
                fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            }
            println!("{}", report_line(&report));
        }
        Command::Matrix {
            models,
            test,
            split_label,
            csv,
            table,
            decoding,
        } => {
            let label = split_label.unwrap_or_else(|| test.display().to_string());
            log_config(
                "matrix",
                &format!(
                    "models = {}\ntest = {}\nsplit_label = {label}\nbeam = {}",
                    models.display(),
                    test.display(),
                    decoding.beam
                ),
            );
            let listing = fs::read_to_string(&models).map_err(|e| Error::io(&models, e))?;
            let base = models.parent().unwrap_or(Path::new("."));
            let mut loaded = Vec::new();
            for (n, line) in listing.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (name, path) = line.split_once('\t').ok_or_else(|| Error::MalformedRecord {
                    line: n + 1,
                    message: "expected name<TAB>checkpoint".into(),
                })?;
                let path = base.join(path.trim());
                loaded.push((name.trim().to_owned(), Model::<f32>::load(&path)?));
            }
            let decoding = decoding.decoding()?;
            let translators: Vec<ModelTranslator<'_, f32>> =
                loaded.iter().map(|(_, m)| ModelTranslator { model: m, decoding }).collect();
            let entries: Vec<(&str, &dyn crate::adapt::ChunkTranslator)> = loaded
                .iter()
                .zip(&translators)
                .map(|((name, _), t)| (name.as_str(), t as &dyn crate::adapt::ChunkTranslator))
                .collect();
            let examples = load_examples(&test)?;
            let mut ids: Vec<&str> = examples.iter().map(|e| e.dialect_id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            let sets: Vec<TestSet> = ids
                .iter()
                .map(|&d| TestSet {
                    dialect_id: d.to_owned(),
                    split: label.clone(),
                    examples: examples.iter().filter(|e| e.dialect_id == d).cloned().collect(),
                })
                .collect();
            let matrix = wer_matrix(&entries, &sets)?;
            let rendered = matrix.to_table();
            print!("{rendered}");
            if let Some(path) = csv {
                fs::write(&path, matrix.to_csv()).map_err(|e| Error::io(&path, e))?;
            }
            if let Some(path) = table {
                fs::write(&path, rendered).map_err(|e| Error::io(&path, e))?;
            }
        }
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let settings = resolve(&args.run, TrainSettings::defaults("base")?, TrainSettings::defaults, TrainSettings::set)?;
    let train = load_examples(&args.train)?;
    let valid = match &args.valid {
        Some(p) => load_examples(p)?,
        None => Vec::new(),
    };
    let all: Vec<ParallelExample> = train.iter().chain(&valid).cloned().collect();
    let dialects = match &args.dialects {
        Some(p) => DialectManifest::load(p)?,
        None => DialectManifest::from_examples(&all),
    };
    check_dialects(&all, &dialects)?;
    log_config(
        "train",
        &format!(
            "train = {}\nvalid = {}\nout_dir = {}\n{}",
            args.train.display(),
            args.valid.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into()),
            args.run.out_dir.display(),
            settings.to_text()
        ),
    );
    let flags: Vec<&str> = match settings.mode {
        FlagMode::Flagged => dialects.labels().collect(),
        FlagMode::Plain => Vec::new(),
    };
    let vocab = build_vocabulary(&all, &flags)?;
    let mut model = Model::<f32>::new(vocab, dialects, settings.mode, settings.model, settings.training.seed)?;
    let pairs = make_training_pairs(&train, settings.mode, None, &model.dialects)?;
    let valid_pairs = make_training_pairs(&valid, settings.mode, None, &model.dialects)?;
    eprintln!(
        "{} training pairs, {} validation pairs, {} symbols, {} parameters",
        pairs.len(),
        valid_pairs.len(),
        model.vocab.len(),
        model.params.parameter_count()
    );
    fs::create_dir_all(&args.run.out_dir).map_err(|e| Error::io(&args.run.out_dir, e))?;
    let settings_path = args.run.out_dir.join("settings.txt");
    fs::write(&settings_path, settings.to_text()).map_err(|e| Error::io(&settings_path, e))?;
    let run = train_with_progress(
        &mut model,
        &pairs,
        &valid_pairs,
        &settings.training,
        Some(&args.run.out_dir),
        &mut progress_printer("train"),
    )?;
    if let Some(path) = &run.final_checkpoint {
        eprintln!("final checkpoint {}", path.display());
    }
    if let (Some(path), Some(loss)) = (&run.best_checkpoint, run.best_valid_loss()) {
        eprintln!("best checkpoint {} (valid loss {loss:.4})", path.display());
    }
    Ok(())
}

fn cmd_transfer(args: TransferArgs) -> anyhow::Result<()> {
    let training = resolve(
        &args.run,
        TrainingConfig::transfer(),
        |p| Ok(TrainingConfig::preset(p)?),
        TrainingConfig::set,
    )?;
    log_config(
        "transfer",
        &format!(
            "base = {}\ntrain = {}\nvalid = {}\ndialect = {}\nout_dir = {}\n{}",
            args.base.display(),
            args.train.display(),
            args.valid.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into()),
            args.dialect,
            args.run.out_dir.display(),
            training.to_text()
        ),
    );
    let train = load_examples(&args.train)?;
    let valid = match &args.valid {
        Some(p) => load_examples(p)?,
        None => Vec::new(),
    };
    let manifest = DialectManifest::from_examples(&train);
    let pairs = make_training_pairs(&train, FlagMode::Plain, Some(&args.dialect), &manifest)?;
    if pairs.is_empty() {
        bail!(Error::UnknownDialect(args.dialect.clone()));
    }
    let valid_pairs = if valid.iter().any(|e| e.dialect_id == args.dialect) {
        make_training_pairs(&valid, FlagMode::Plain, Some(&args.dialect), &manifest)?
    } else {
        Vec::new()
    };
    eprintln!("{} training pairs, {} validation pairs", pairs.len(), valid_pairs.len());
    let (_, run) = transfer_train_checkpoint(
        &args.base,
        &pairs,
        &valid_pairs,
        &training,
        Some(&args.run.out_dir),
        &mut progress_printer("transfer"),
    )?;
    if let Some(path) = &run.final_checkpoint {
        eprintln!("final checkpoint {}", path.display());
    }
    Ok(())
}

/// Parses arguments, runs, and reports errors as `error[<code>]: <message>`.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let code = e.chain().find_map(|c| c.downcast_ref::<Error>()).map_or("cli", Error::code);
            // sources already spelled out by their parent's message are skipped
            let mut msg = String::new();
            for part in e.chain().map(|c| c.to_string()) {
                if !msg.ends_with(&part) {
                    if !msg.is_empty() {
                        msg.push_str(": ");
                    }
                    msg.push_str(&part);
                }
            }
            eprintln!("error[{code}]: {msg}");
            1
        }
    }
}
