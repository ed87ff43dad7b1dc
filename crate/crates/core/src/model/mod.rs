//! Character-level encoder-decoder: two stacked LSTM layers on each side,
//! input feeding, and bilinear ("general") global attention.

pub mod checkpoint;
pub mod decode;
pub(crate) mod network;
pub mod params;
pub mod vocab;

use ndarray::Array1;
use rand::Rng;

pub use checkpoint::{checkpoint_dtype, FORMAT_VERSION, MAGIC};
pub use decode::{beam_decode, default_max_len, greedy_decode, greedy_decode_batch, DecodeResult};
pub use network::Pair;
pub use params::{DType, LstmLayer, ModelConfig, ModelParams, ParamGroup, Real, LAYERS};
pub use vocab::{build_vocabulary, Symbol, Vocabulary, BOS, BOUNDARY_ID, EOS, PAD, UNK};

use crate::corpus::DialectManifest;
use crate::error::{Error, Result};
use crate::textcodec::{add_flag, encode, FlagMode};
use network::{run_batch, PassOptions};

/// Scale of the uniform parameter initialisation.
pub const INIT_SCALE: f64 = 0.1;

/// Parameters together with everything needed to interpret them.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<F> {
    pub vocab: Vocabulary,
    pub dialects: DialectManifest,
    pub mode: FlagMode,
    pub params: ModelParams<F>,
}

impl<F: Real> Model<F> {
    /// Freshly initialised model. `config.vocab_size` is taken from `vocab`.
    pub fn new(
        vocab: Vocabulary,
        dialects: DialectManifest,
        mode: FlagMode,
        mut config: ModelConfig,
        seed: u64,
    ) -> Result<Self> {
        config.vocab_size = vocab.len();
        if mode == FlagMode::Flagged {
            if dialects.is_empty() {
                return Err(Error::InvalidArgument("a flagged model needs dialects".into()));
            }
            if let Some(l) = dialects.labels().find(|l| vocab.id(&crate::textcodec::Token::Flag((*l).into())).is_none()) {
                return Err(Error::InvalidArgument(format!("flag {l:?} missing from vocabulary")));
            }
        }
        let params = ModelParams::init(config, INIT_SCALE, seed)?;
        Ok(Self {
            vocab,
            dialects,
            mode,
            params,
        })
    }

    /// Source ids for a chunk of words, flagged when the model is.
    pub fn source_ids<S: AsRef<str>>(&self, words: &[S], dialect: Option<&str>) -> Result<Vec<u32>> {
        let seq = encode(words)?;
        let seq = match (self.mode, dialect) {
            (FlagMode::Flagged, Some(d)) => add_flag(&seq, d, &self.dialects)?,
            (FlagMode::Flagged, None) => {
                return Err(Error::InvalidArgument("flagged model needs a dialect id".into()))
            }
            (FlagMode::Plain, _) => seq,
        };
        self.vocab.source_ids(&seq)
    }
}

/// Teacher-forced pass over one example.
#[derive(Debug, Clone)]
pub struct ForwardOutput<F> {
    /// Mean negative log-likelihood per target symbol (everything after BOS).
    pub loss: f64,
    /// Output distribution at each decoder step.
    pub probabilities: Vec<Array1<F>>,
    /// Attention over source positions at each decoder step.
    pub attention: Vec<Array1<F>>,
}

pub fn forward<F: Real>(params: &ModelParams<F>, source: &[u32], target: &[u32]) -> Result<ForwardOutput<F>> {
    let pair = Pair { source, target };
    let out = run_batch::<F, rand_chacha::ChaCha8Rng>(
        params,
        &[pair],
        None,
        PassOptions {
            grads: false,
            record: true,
        },
    )?;
    Ok(ForwardOutput {
        loss: out.loss_sum / out.tokens as f64,
        probabilities: out.probs.into_iter().map(|p| p.row(0).to_owned()).collect(),
        attention: out.attention.into_iter().map(|a| a.row(0).to_owned()).collect(),
    })
}

/// Loss and gradient of the token-mean loss over a batch.
#[derive(Debug, Clone)]
pub struct BatchGradients<F> {
    pub loss_sum: f64,
    pub tokens: usize,
    pub grads: ModelParams<F>,
}

impl<F> BatchGradients<F> {
    pub fn mean_loss(&self) -> f64 {
        self.loss_sum / self.tokens as f64
    }
}

/// Gradients for one example; errors if any component is non-finite.
pub fn backward<F: Real>(params: &ModelParams<F>, source: &[u32], target: &[u32]) -> Result<BatchGradients<F>> {
    batch_gradients::<F, rand_chacha::ChaCha8Rng>(params, &[Pair { source, target }], None)
}

/// Gradients over a batch. Dropout is applied only when `dropout_rng` is given.
pub fn batch_gradients<F: Real, R: Rng>(
    params: &ModelParams<F>,
    pairs: &[Pair<'_>],
    dropout_rng: Option<&mut R>,
) -> Result<BatchGradients<F>> {
    let out = run_batch(
        params,
        pairs,
        dropout_rng,
        PassOptions {
            grads: true,
            record: false,
        },
    )?;
    let grads = out.grads.expect("requested");
    if !out.loss_sum.is_finite() {
        return Err(Error::Divergence { what: "loss", step: 0 });
    }
    if !grads.is_finite() {
        return Err(Error::Divergence {
            what: "gradient",
            step: 0,
        });
    }
    Ok(BatchGradients {
        loss_sum: out.loss_sum,
        tokens: out.tokens,
        grads,
    })
}

/// Per-example summed negative log-likelihoods and symbol counts, without dropout.
pub fn example_losses<F: Real>(params: &ModelParams<F>, pairs: &[Pair<'_>]) -> Result<Vec<(f64, usize)>> {
    let out = run_batch::<F, rand_chacha::ChaCha8Rng>(params, pairs, None, PassOptions::default())?;
    Ok(out
        .example_loss
        .into_iter()
        .zip(pairs)
        .map(|(l, p)| (l, p.target.len() - 1))
        .collect())
}
