//! Training regimes: flagged multi-dialect, generic (no flags), and per-dialect
//! transfer from a generic model with the encoder's input side frozen.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Zip;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{DialectManifest, ParallelExample};
use crate::error::{Error, Result};
use crate::model::{batch_gradients, example_losses, Model, ModelParams, Pair, ParamGroup, Real};
use crate::textcodec::{add_flag, chunk_sentence, encode, EncodedSequence, FlagMode, CHUNK_SIZE};

/// Step count of a full base run.
pub const BASE_STEPS: usize = 100_000;
/// Step count of a full transfer run.
pub const TRANSFER_STEPS: usize = 20_000;

/// One chunk-level training example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPair {
    pub dialect_id: String,
    pub source: EncodedSequence,
    pub target: EncodedSequence,
}

/// Chunks both sides of every sentence pair the same way and encodes the chunks, prefixing
/// source chunks with the dialect flag in flagged mode.
pub fn make_training_pairs(
    examples: &[ParallelExample],
    mode: FlagMode,
    dialect_filter: Option<&str>,
    dialects: &DialectManifest,
) -> Result<Vec<TrainingPair>> {
    if let Some(d) = dialect_filter {
        if !dialects.contains(d) && !examples.iter().any(|e| e.dialect_id == d) {
            return Err(Error::UnknownDialect(d.to_owned()));
        }
    }
    let mut pairs = Vec::new();
    for ex in examples {
        if dialect_filter.is_some_and(|d| d != ex.dialect_id) {
            continue;
        }
        let sources = chunk_sentence(&ex.source_words, CHUNK_SIZE)?;
        let targets = chunk_sentence(&ex.target_words, CHUNK_SIZE)?;
        for (s, t) in sources.iter().zip(&targets) {
            let mut source = encode(&s.words)?;
            if mode == FlagMode::Flagged {
                source = add_flag(&source, &ex.dialect_id, dialects)?;
            }
            pairs.push(TrainingPair {
                dialect_id: ex.dialect_id.clone(),
                source,
                target: encode(&t.words)?,
            });
        }
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    /// Plain SGD; the learning rate is multiplied by `lr_decay` whenever
    /// validation loss fails to improve.
    Sgd,
    Adam,
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam => "adam",
        })
    }
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::Adam),
            _ => Err(Error::Config(format!("unknown optimizer {s:?} (sgd or adam)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub dropout: f64,
    pub seed: u64,
    /// Validation interval in steps; the last step is always validated.
    pub checkpoint_every: usize,
    /// Global gradient norm cap; 0 disables clipping.
    pub max_grad_norm: f64,
    pub freeze: BTreeSet<ParamGroup>,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
/// Batches drawn together and sorted by length before batching.
const POOL_BATCHES: usize = 16;
const VALID_BATCH: usize = 64;

impl TrainingConfig {
    /// Base multi-dialect or generic run: SGD at 1.0 with dropout 0.3.
    pub fn base() -> Self {
        Self {
            steps: BASE_STEPS,
            batch_size: 64,
            optimizer: Optimizer::Sgd,
            learning_rate: 1.0,
            lr_decay: 0.5,
            dropout: 0.3,
            seed: 1,
            checkpoint_every: 5_000,
            max_grad_norm: 5.0,
            freeze: BTreeSet::new(),
        }
    }

    /// Continuation of a base run on one dialect.
    pub fn transfer() -> Self {
        Self {
            steps: TRANSFER_STEPS,
            freeze: ParamGroup::transfer_frozen().into_iter().collect(),
            ..Self::base()
        }
    }

    /// Laptop-scale run with Adam.
    pub fn desk() -> Self {
        Self {
            steps: 3_000,
            batch_size: 32,
            optimizer: Optimizer::Adam,
            learning_rate: 2e-3,
            lr_decay: 0.5,
            dropout: 0.0,
            seed: 1,
            checkpoint_every: 500,
            max_grad_norm: 5.0,
            freeze: BTreeSet::new(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "base" => Ok(Self::base()),
            "transfer" => Ok(Self::transfer()),
            "desk" => Ok(Self::desk()),
            _ => Err(Error::Config(format!("unknown preset {name:?} (base, transfer or desk)"))),
        }
    }

    pub const KEYS: [&'static str; 10] = [
        "steps",
        "batch_size",
        "optimizer",
        "learning_rate",
        "lr_decay",
        "dropout",
        "seed",
        "checkpoint_every",
        "max_grad_norm",
        "freeze",
    ];

    /// Sets one field from its textual form. `freeze` takes a comma-separated
    /// list of group names, or `none`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
        }
        match key {
            "steps" => self.steps = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "optimizer" => self.optimizer = value.parse()?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "lr_decay" => self.lr_decay = num(key, value)?,
            "dropout" => self.dropout = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "checkpoint_every" => self.checkpoint_every = num(key, value)?,
            "max_grad_norm" => self.max_grad_norm = num(key, value)?,
            "freeze" => {
                self.freeze = if value.trim() == "none" || value.trim().is_empty() {
                    BTreeSet::new()
                } else {
                    value
                        .split(',')
                        .map(|g| g.trim().parse())
                        .collect::<Result<_>>()?
                }
            }
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (key, value) in parse_key_values(text)? {
            self.set(&key, &value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::Config("checkpoint_every must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config(format!("lr_decay {} outside (0, 1]", self.lr_decay)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.max_grad_norm >= 0.0) {
            return Err(Error::Config(format!("max_grad_norm {} is negative", self.max_grad_norm)));
        }
        Ok(())
    }

    /// The resolved configuration in the format `apply_text` reads.
    pub fn to_text(&self) -> String {
        let freeze = if self.freeze.is_empty() {
            "none".to_owned()
        } else {
            self.freeze.iter().map(|g| g.name()).collect::<Vec<_>>().join(",")
        };
        format!(
            "steps = {}\nbatch_size = {}\noptimizer = {}\nlearning_rate = {}\nlr_decay = {}\ndropout = {}\nseed = {}\ncheckpoint_every = {}\nmax_grad_norm = {}\nfreeze = {}\n",
            self.steps,
            self.batch_size,
            self.optimizer,
            self.learning_rate,
            self.lr_decay,
            self.dropout,
            self.seed,
            self.checkpoint_every,
            self.max_grad_norm,
            freeze
        )
    }
}

/// Reads `key = value` lines, skipping blanks and `#` comments.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
        out.push((k.trim().to_owned(), v.trim().to_owned()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationPoint {
    pub step: usize,
    pub loss: f64,
    pub learning_rate: f64,
}

/// Progress report passed to observers after each validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub step: usize,
    pub steps: usize,
    /// Mean training loss since the previous report.
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainingRun<F> {
    pub config: TrainingConfig,
    pub initial_checkpoint: Option<PathBuf>,
    /// Token-mean training loss of every step.
    pub loss_log: Vec<f64>,
    pub valid_log: Vec<ValidationPoint>,
    /// Parameters at the best validation point, when there was validation data.
    pub best_params: Option<ModelParams<F>>,
    pub best_step: Option<usize>,
    pub best_checkpoint: Option<PathBuf>,
    pub final_checkpoint: Option<PathBuf>,
}

impl<F> TrainingRun<F> {
    /// `step,train_loss,valid_loss` rows; `valid_loss` is empty where not measured.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("step,train_loss,valid_loss\n");
        let mut valid = self.valid_log.iter().peekable();
        for (i, loss) in self.loss_log.iter().enumerate() {
            let step = i + 1;
            out.push_str(&format!("{step},{loss}"));
            out.push(',');
            if let Some(v) = valid.next_if(|v| v.step == step) {
                out.push_str(&v.loss.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn best_valid_loss(&self) -> Option<f64> {
        let step = self.best_step?;
        self.valid_log.iter().find(|v| v.step == step).map(|v| v.loss)
    }
}

struct Encoded {
    source: Vec<u32>,
    target: Vec<u32>,
}

fn encode_pairs<F: Real>(model: &Model<F>, pairs: &[TrainingPair]) -> Result<Vec<Encoded>> {
    pairs
        .iter()
        .map(|p| {
            let flagged = p.source.flag().is_some();
            if flagged != (model.mode == FlagMode::Flagged) {
                return Err(Error::InvalidArgument(format!(
                    "{} model given a {} training pair",
                    model.mode,
                    if flagged { "flagged" } else { "plain" }
                )));
            }
            Ok(Encoded {
                source: model.vocab.source_ids(&p.source)?,
                target: model.vocab.target_ids(&p.target)?,
            })
        })
        .collect()
}

/// Epoch-wise shuffled, length-pooled batches of a fixed size.
struct BatchSchedule {
    rng: ChaCha8Rng,
    batches: Vec<Vec<usize>>,
    batch_size: usize,
}

impl BatchSchedule {
    fn new(seed: u64, batch_size: usize) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            batches: Vec::new(),
            batch_size,
        }
    }

    fn next(&mut self, data: &[Encoded]) -> Vec<usize> {
        if self.batches.is_empty() {
            self.refill(data);
        }
        self.batches.pop().expect("refilled")
    }

    fn refill(&mut self, data: &[Encoded]) {
        let bs = self.batch_size;
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        // top up to a whole number of batches by cycling through the permutation
        let total = order.len().div_ceil(bs) * bs;
        let mut i = 0;
        while order.len() < total {
            order.push(order[i]);
            i += 1;
        }
        let mut batches = Vec::with_capacity(total / bs);
        for pool in order.chunks_mut(bs * POOL_BATCHES) {
            pool.sort_by_key(|&k| (data[k].source.len(), data[k].target.len()));
            batches.extend(pool.chunks(bs).map(<[usize]>::to_vec));
        }
        batches.shuffle(&mut self.rng);
        batches.reverse();
        self.batches = batches;
    }
}

enum OptimizerState<F> {
    Sgd,
    Adam { m: ModelParams<F>, v: ModelParams<F>, t: i32 },
}

fn apply_update<F: Real>(
    params: &mut ModelParams<F>,
    grads: &ModelParams<F>,
    state: &mut OptimizerState<F>,
    lr: f64,
    frozen: &BTreeSet<ParamGroup>,
) {
    let trainable = |name: &str| !frozen.contains(&ModelParams::<F>::group_of(name));
    match state {
        OptimizerState::Sgd => {
            let step = F::of(-lr);
            for ((name, p), (_, g)) in params.tensors_mut().into_iter().zip(grads.tensors()) {
                if trainable(name) {
                    p.scaled_add(step, g);
                }
            }
        }
        OptimizerState::Adam { m, v, t } => {
            *t += 1;
            let lr_t = lr * (1.0 - ADAM_BETA2.powi(*t)).sqrt() / (1.0 - ADAM_BETA1.powi(*t));
            let (b1, b2, eps, lr_t) = (F::of(ADAM_BETA1), F::of(ADAM_BETA2), F::of(ADAM_EPS), F::of(lr_t));
            let one = F::one();
            for ((((name, p), (_, g)), (_, m)), (_, v)) in params
                .tensors_mut()
                .into_iter()
                .zip(grads.tensors())
                .zip(m.tensors_mut())
                .zip(v.tensors_mut())
            {
                if !trainable(name) {
                    continue;
                }
                Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                    *m = b1 * *m + (one - b1) * g;
                    *v = b2 * *v + (one - b2) * g * g;
                    *p -= lr_t * *m / (v.sqrt() + eps);
                });
            }
        }
    }
}

/// Token-mean loss over `data`, without dropout.
fn validation_loss<F: Real>(params: &ModelParams<F>, data: &[Encoded]) -> Result<f64> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by_key(|&k| (data[k].source.len(), data[k].target.len()));
    let (mut sum, mut n) = (0.0, 0usize);
    for chunk in order.chunks(VALID_BATCH) {
        let pairs: Vec<Pair<'_>> = chunk
            .iter()
            .map(|&k| Pair {
                source: &data[k].source,
                target: &data[k].target,
            })
            .collect();
        for (l, k) in example_losses(params, &pairs)? {
            sum += l;
            n += k;
        }
    }
    Ok(sum / n.max(1) as f64)
}

/// Trains `model` in place for exactly `config.steps` steps.
///
/// With `out_dir`, the resolved config, `log.csv`, `best.ckpt` (lowest
/// validation loss) and `final.ckpt` are written there.
pub fn train<F: Real>(
    model: &mut Model<F>,
    pairs: &[TrainingPair],
    valid: &[TrainingPair],
    config: &TrainingConfig,
    out_dir: Option<&Path>,
) -> Result<TrainingRun<F>> {
    train_with_progress(model, pairs, valid, config, out_dir, &mut |_| {})
}

pub fn train_with_progress<F: Real>(
    model: &mut Model<F>,
    pairs: &[TrainingPair],
    valid: &[TrainingPair],
    config: &TrainingConfig,
    out_dir: Option<&Path>,
    progress: &mut dyn FnMut(&Progress),
) -> Result<TrainingRun<F>> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no training pairs".into()));
    }
    let data = encode_pairs(model, pairs)?;
    let valid_data = encode_pairs(model, valid)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("config.txt");
        fs::write(&path, config.to_text()).map_err(|e| Error::io(&path, e))?;
    }

    model.params.config.dropout = config.dropout;
    let mut schedule = BatchSchedule::new(config.seed, config.batch_size);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed);
    dropout_rng.set_stream(1);
    let mut state = match config.optimizer {
        Optimizer::Sgd => OptimizerState::Sgd,
        Optimizer::Adam => OptimizerState::Adam {
            m: model.params.zeros_like(),
            v: model.params.zeros_like(),
            t: 0,
        },
    };
    let mut lr = config.learning_rate;
    let mut run = TrainingRun {
        config: config.clone(),
        initial_checkpoint: None,
        loss_log: Vec::with_capacity(config.steps),
        valid_log: Vec::new(),
        best_params: None,
        best_step: None,
        best_checkpoint: None,
        final_checkpoint: None,
    };
    let mut best_loss = f64::INFINITY;
    let mut last_valid = f64::INFINITY;
    let mut since_report = (0.0, 0usize);

    for step in 1..=config.steps {
        let batch = schedule.next(&data);
        let batch_pairs: Vec<Pair<'_>> = batch
            .iter()
            .map(|&k| Pair {
                source: &data[k].source,
                target: &data[k].target,
            })
            .collect();
        let rng = (config.dropout > 0.0).then_some(&mut dropout_rng);
        let mut bg = batch_gradients(&model.params, &batch_pairs, rng).map_err(|e| match e {
            Error::Divergence { what, .. } => Error::Divergence { what, step },
            other => other,
        })?;
        let loss = bg.mean_loss();
        run.loss_log.push(loss);
        since_report.0 += loss;
        since_report.1 += 1;

        if config.max_grad_norm > 0.0 {
            let norm = bg
                .grads
                .tensors()
                .iter()
                .filter(|(name, _)| !config.freeze.contains(&ModelParams::<F>::group_of(name)))
                .flat_map(|(_, t)| t.iter())
                .map(|x| x.to_f64().unwrap_or(f64::NAN).powi(2))
                .sum::<f64>()
                .sqrt();
            if norm > config.max_grad_norm {
                bg.grads.scale(F::of(config.max_grad_norm / norm));
            }
        }
        apply_update(&mut model.params, &bg.grads, &mut state, lr, &config.freeze);

        if step % config.checkpoint_every == 0 || step == config.steps {
            if !model.params.is_finite() {
                return Err(Error::Divergence { what: "parameters", step });
            }
            let valid_loss = if valid_data.is_empty() {
                None
            } else {
                let v = validation_loss(&model.params, &valid_data)?;
                if !v.is_finite() {
                    return Err(Error::Divergence {
                        what: "validation loss",
                        step,
                    });
                }
                run.valid_log.push(ValidationPoint {
                    step,
                    loss: v,
                    learning_rate: lr,
                });
                if v < best_loss {
                    best_loss = v;
                    run.best_step = Some(step);
                    run.best_params = Some(model.params.clone());
                    if let Some(dir) = out_dir {
                        let path = dir.join("best.ckpt");
                        model.save(&path)?;
                        run.best_checkpoint = Some(path);
                    }
                }
                if config.optimizer == Optimizer::Sgd && v >= last_valid {
                    lr *= config.lr_decay;
                }
                last_valid = v;
                Some(v)
            };
            progress(&Progress {
                step,
                steps: config.steps,
                train_loss: since_report.0 / since_report.1 as f64,
                valid_loss,
            });
            since_report = (0.0, 0);
        }
    }

    if let Some(dir) = out_dir {
        let path = dir.join("final.ckpt");
        model.save(&path)?;
        run.final_checkpoint = Some(path);
        let log = dir.join("log.csv");
        fs::write(&log, run.log_csv()).map_err(|e| Error::io(&log, e))?;
    }
    Ok(run)
}

/// Continues training a copy of `base` on plain (flagless) pairs of one
/// dialect, with `ParamGroup::transfer_frozen()` added to the frozen set.
/// Optimizer state starts fresh.
pub fn transfer_train<F: Real>(
    base: &Model<F>,
    pairs: &[TrainingPair],
    valid: &[TrainingPair],
    config: &TrainingConfig,
    out_dir: Option<&Path>,
) -> Result<(Model<F>, TrainingRun<F>)> {
    transfer_train_with_progress(base, pairs, valid, config, out_dir, &mut |_| {})
}

pub fn transfer_train_with_progress<F: Real>(
    base: &Model<F>,
    pairs: &[TrainingPair],
    valid: &[TrainingPair],
    config: &TrainingConfig,
    out_dir: Option<&Path>,
    progress: &mut dyn FnMut(&Progress),
) -> Result<(Model<F>, TrainingRun<F>)> {
    if let Some(p) = pairs.iter().chain(valid).find(|p| p.source.flag().is_some()) {
        return Err(Error::InvalidArgument(format!(
            "transfer pairs must be unflagged; found flag {:?}",
            p.source.flag().unwrap_or_default()
        )));
    }
    let mut config = config.clone();
    config.freeze.extend(ParamGroup::transfer_frozen());
    let mut model = base.clone();
    model.mode = FlagMode::Plain;
    let run = train_with_progress(&mut model, pairs, valid, &config, out_dir, progress)?;
    Ok((model, run))
}

/// `transfer_train` from a checkpoint file, recording it in the run.
pub fn transfer_train_checkpoint(
    base_checkpoint: &Path,
    pairs: &[TrainingPair],
    valid: &[TrainingPair],
    config: &TrainingConfig,
    out_dir: Option<&Path>,
    progress: &mut dyn FnMut(&Progress),
) -> Result<(Model<f32>, TrainingRun<f32>)> {
    let base = Model::<f32>::load(base_checkpoint)?;
    let (model, mut run) = transfer_train_with_progress(&base, pairs, valid, &config.clone(), out_dir, progress)?;
    run.initial_checkpoint = Some(base_checkpoint.to_owned());
    Ok((model, run))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_vocabulary, ModelConfig};

    fn inkeri_example() -> (Vec<ParallelExample>, DialectManifest) {
        let ex = vec![ParallelExample::from_sentences("IS", "minä kun näin", "mie ko näin").unwrap()];
        let m = DialectManifest::parse("IS\tInkerinsuomalaismurteet\n").unwrap();
        (ex, m)
    }

    #[test]
    fn pairs_match_flagged_and_plain_layouts() {
        let (ex, m) = inkeri_example();
        let flagged = make_training_pairs(&ex, FlagMode::Flagged, None, &m).unwrap();
        assert_eq!(flagged.len(), 1);
        assert_eq!(
            flagged[0].source.to_string(),
            "Inkerinsuomalaismurteet m i n ä _ k u n _ n ä i n"
        );
        assert_eq!(flagged[0].target.to_string(), "m i e _ k o _ n ä i n");
        let plain = make_training_pairs(&ex, FlagMode::Plain, None, &m).unwrap();
        assert_eq!(plain[0].source.to_string(), "m i n ä _ k u n _ n ä i n");
    }

    #[test]
    fn sentences_are_chunked_in_parallel() {
        let ex = ParallelExample::from_sentences("A", "a b c d e f g", "A B C D E F G").unwrap();
        let pairs = make_training_pairs(&[ex], FlagMode::Plain, None, &DialectManifest::new()).unwrap();
        let shown: Vec<(String, String)> = pairs
            .iter()
            .map(|p| (p.source.to_string(), p.target.to_string()))
            .collect();
        assert_eq!(
            shown,
            [
                ("a _ b _ c".to_owned(), "A _ B _ C".to_owned()),
                ("d _ e _ f".to_owned(), "D _ E _ F".to_owned()),
                ("g".to_owned(), "G".to_owned()),
            ]
        );
    }

    #[test]
    fn dialect_filter() {
        let ex = vec![
            ParallelExample::from_sentences("AA", "x", "y").unwrap(),
            ParallelExample::from_sentences("BB", "x z", "w z").unwrap(),
        ];
        let m = DialectManifest::from_examples(&ex);
        let only_b = make_training_pairs(&ex, FlagMode::Flagged, Some("BB"), &m).unwrap();
        assert_eq!(only_b.len(), 1);
        assert_eq!(only_b[0].source.flag(), Some("BB"));
        assert!(matches!(
            make_training_pairs(&ex, FlagMode::Plain, Some("CC"), &m),
            Err(Error::UnknownDialect(_))
        ));
    }

    #[test]
    fn config_text_round_trip_and_rejections() {
        let mut c = TrainingConfig::desk();
        c.apply_text("# comment\nsteps = 12\nfreeze = src_embedding, encoder.0\noptimizer = sgd\n").unwrap();
        assert_eq!(c.steps, 12);
        assert_eq!(c.optimizer, Optimizer::Sgd);
        assert_eq!(c.freeze.len(), 2);
        let mut d = TrainingConfig::base();
        d.apply_text(&c.to_text()).unwrap();
        assert_eq!(c, d);
        for key in TrainingConfig::KEYS {
            assert!(c.to_text().contains(&format!("{key} = ")), "{key}");
        }
        assert!(c.set("stepz", "3").is_err());
        assert!(c.set("freeze", "encoder.7").is_err());
        assert!(c.set("steps", "-1").is_err());
        assert!(c.apply_text("steps 3").is_err());
        c.steps = 0;
        assert!(c.validate().is_err());
        assert_eq!(TrainingConfig::base().steps, 100_000);
        assert_eq!(TrainingConfig::transfer().steps, 20_000);
    }

    fn toy() -> (Model<f32>, Vec<TrainingPair>) {
        let ex: Vec<ParallelExample> = ["ab ba", "aab b", "ba ab ab a", "bb aa"]
            .iter()
            .map(|s| ParallelExample::from_sentences("AA", s, &s.replace('a', "c")).unwrap())
            .collect();
        let m = DialectManifest::from_examples(&ex);
        let vocab = build_vocabulary(&ex, &Vec::<String>::new()).unwrap();
        let model = Model::new(vocab, m.clone(), FlagMode::Plain, ModelConfig::tiny(0), 3).unwrap();
        let pairs = make_training_pairs(&ex, FlagMode::Plain, None, &m).unwrap();
        (model, pairs)
    }

    #[test]
    fn zero_steps_rejected() {
        let (mut model, pairs) = toy();
        let mut c = TrainingConfig::desk();
        c.steps = 0;
        assert!(matches!(train(&mut model, &pairs, &[], &c, None), Err(Error::Config(_))));
        c.steps = 5;
        assert!(train(&mut model, &[], &[], &c, None).is_err());
    }

    #[test]
    fn seeded_runs_are_identical() {
        let (model, pairs) = toy();
        let mut c = TrainingConfig::desk();
        c.steps = 25;
        c.batch_size = 3;
        c.dropout = 0.2;
        c.checkpoint_every = 10;
        let (mut a, mut b) = (model.clone(), model.clone());
        let ra = train(&mut a, &pairs, &pairs, &c, None).unwrap();
        let rb = train(&mut b, &pairs, &pairs, &c, None).unwrap();
        assert_eq!(ra.loss_log.len(), 25);
        assert_eq!(ra.loss_log, rb.loss_log);
        assert_eq!(ra.valid_log, rb.valid_log);
        assert_eq!(ra.valid_log.iter().map(|v| v.step).collect::<Vec<_>>(), [10, 20, 25]);
        assert_eq!(a.to_bytes(), b.to_bytes());
        c.seed = 2;
        let mut e = model.clone();
        let re = train(&mut e, &pairs, &pairs, &c, None).unwrap();
        assert_ne!(re.loss_log, ra.loss_log);
    }

    #[test]
    fn frozen_groups_do_not_move() {
        let (base, pairs) = toy();
        for optimizer in [Optimizer::Sgd, Optimizer::Adam] {
            let mut c = TrainingConfig::desk();
            c.optimizer = optimizer;
            c.learning_rate = 0.1;
            c.steps = 20;
            c.batch_size = 2;
            let (tuned, run) = transfer_train(&base, &pairs, &[], &c, None).unwrap();
            assert_eq!(run.config.freeze.len(), 2);
            for g in ParamGroup::ALL {
                let same = tuned.group_bytes(g) == base.group_bytes(g);
                assert_eq!(same, ParamGroup::transfer_frozen().contains(&g), "{g:?} {optimizer}");
            }
        }
    }

    #[test]
    fn transfer_rejects_flagged_pairs() {
        let (ex, m) = inkeri_example();
        let flagged = make_training_pairs(&ex, FlagMode::Flagged, None, &m).unwrap();
        let vocab = build_vocabulary(&ex, &["Inkerinsuomalaismurteet"]).unwrap();
        let model = Model::<f32>::new(vocab, m, FlagMode::Flagged, ModelConfig::tiny(0), 1).unwrap();
        assert!(transfer_train(&model, &flagged, &[], &TrainingConfig::desk(), None).is_err());
        let mut m2 = model.clone();
        let plain = make_training_pairs(&ex, FlagMode::Plain, None, &model.dialects).unwrap();
        assert!(train(&mut m2, &plain, &[], &TrainingConfig::desk(), None).is_err());
    }

    #[test]
    fn divergence_reports_step() {
        let (mut model, pairs) = toy();
        model.params.out_bias[[0, 6]] = f32::NAN;
        let mut c = TrainingConfig::desk();
        c.steps = 5;
        match train(&mut model, &pairs, &pairs, &c, None) {
            Err(Error::Divergence { step, .. }) => assert_eq!(step, 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn writes_artifacts_and_csv() {
        let (mut model, pairs) = toy();
        let mut c = TrainingConfig::desk();
        c.steps = 6;
        c.batch_size = 2;
        c.checkpoint_every = 4;
        let dir = tempfile::tempdir().unwrap();
        let run = train(&mut model, &pairs, &pairs, &c, Some(dir.path())).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("log.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[0], "step,train_loss,valid_loss");
        assert!(lines[1].ends_with(','));
        assert!(!lines[4].ends_with(','));
        assert!(!lines[6].ends_with(','));
        let fin = Model::<f32>::load(run.final_checkpoint.as_ref().unwrap()).unwrap();
        assert_eq!(fin, model);
        assert!(run.best_checkpoint.unwrap().exists());
        let mut back = TrainingConfig::base();
        back.apply_text(&std::fs::read_to_string(dir.path().join("config.txt")).unwrap())
            .unwrap();
        assert_eq!(back, c);
    }
}
