use std::fmt::{Debug, Display};
use std::str::FromStr;

use ndarray::{Array2, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Floating point type the network runs in: `f64` for gradient checks, `f32` for training.
pub trait Real:
    Float
    + LinalgScalar
    + ScalarOperand
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + std::iter::Sum
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::ops::DivAssign
    + 'static
{
    const DTYPE: DType;

    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;

    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    pub fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

impl Real for f32 {
    const DTYPE: DType = DType::F32;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
}

impl Real for f64 {
    const DTYPE: DType = DType::F64;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}

/// Network dimensions. Encoder and decoder both have two LSTM layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub emb_dim: usize,
    pub hidden_dim: usize,
    /// Dropout between stacked layers and on the attentional output, training only.
    pub dropout: f64,
}

pub const LAYERS: usize = 2;

impl ModelConfig {
    /// Toolkit-default size: 500-dim embeddings and states, dropout 0.3.
    pub fn reference(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            emb_dim: 500,
            hidden_dim: 500,
            dropout: 0.3,
        }
    }

    /// Laptop-sized profile.
    pub fn desk(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            emb_dim: 64,
            hidden_dim: 128,
            dropout: 0.0,
        }
    }

    /// Gradient-check profile.
    pub fn tiny(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            emb_dim: 8,
            hidden_dim: 16,
            dropout: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size <= super::vocab::RESERVED || self.emb_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::ShapeMismatch(format!("degenerate model config {self:?}")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Named parameter groups; the unit of freezing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamGroup {
    SourceEmbedding,
    EncoderLayer1,
    EncoderLayer2,
    TargetEmbedding,
    DecoderLayer1,
    DecoderLayer2,
    Attention,
    Generator,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 8] = [
        ParamGroup::SourceEmbedding,
        ParamGroup::EncoderLayer1,
        ParamGroup::EncoderLayer2,
        ParamGroup::TargetEmbedding,
        ParamGroup::DecoderLayer1,
        ParamGroup::DecoderLayer2,
        ParamGroup::Attention,
        ParamGroup::Generator,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::SourceEmbedding => "src_embedding",
            ParamGroup::EncoderLayer1 => "encoder.0",
            ParamGroup::EncoderLayer2 => "encoder.1",
            ParamGroup::TargetEmbedding => "tgt_embedding",
            ParamGroup::DecoderLayer1 => "decoder.0",
            ParamGroup::DecoderLayer2 => "decoder.1",
            ParamGroup::Attention => "attention",
            ParamGroup::Generator => "generator",
        }
    }

    /// Groups held fixed during per-dialect transfer: the encoder's input side.
    pub fn transfer_frozen() -> Vec<ParamGroup> {
        vec![ParamGroup::SourceEmbedding, ParamGroup::EncoderLayer1]
    }
}

impl FromStr for ParamGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ParamGroup::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown parameter group {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer<F> {
    /// `(input + hidden) x 4·hidden`, gate blocks ordered input, forget, cell, output.
    pub weight: Array2<F>,
    /// `1 x 4·hidden`.
    pub bias: Array2<F>,
}

impl<F: Real> LstmLayer<F> {
    fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            weight: Array2::zeros((input + hidden, 4 * hidden)),
            bias: Array2::zeros((1, 4 * hidden)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.nrows() - self.hidden_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.bias.ncols() / 4
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    pub config: ModelConfig,
    pub src_embedding: Array2<F>,
    pub encoder: [LstmLayer<F>; LAYERS],
    pub tgt_embedding: Array2<F>,
    /// Layer 1 input is `[target embedding; previous attentional state]`.
    pub decoder: [LstmLayer<F>; LAYERS],
    /// `W_a` of the bilinear score `h_t · W_a · h_s`.
    pub attn_score: Array2<F>,
    /// `2·hidden x hidden`, maps `[context; h_t]` to the attentional state.
    pub attn_out: Array2<F>,
    pub out_proj: Array2<F>,
    pub out_bias: Array2<F>,
}

pub const TENSOR_COUNT: usize = 14;

impl<F: Real> ModelParams<F> {
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (v, e, h) = (config.vocab_size, config.emb_dim, config.hidden_dim);
        Ok(Self {
            config,
            src_embedding: Array2::zeros((v, e)),
            encoder: [LstmLayer::zeros(e, h), LstmLayer::zeros(h, h)],
            tgt_embedding: Array2::zeros((v, e)),
            decoder: [LstmLayer::zeros(e + h, h), LstmLayer::zeros(h, h)],
            attn_score: Array2::zeros((h, h)),
            attn_out: Array2::zeros((2 * h, h)),
            out_proj: Array2::zeros((h, v)),
            out_bias: Array2::zeros((1, v)),
        })
    }

    /// Uniform initialisation in `[-scale, scale]`.
    pub fn init(config: ModelConfig, scale: f64, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (_, t) in p.tensors_mut() {
            t.mapv_inplace(|_| F::of(rng.gen_range(-scale..=scale)));
        }
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config).expect("config already validated")
    }

    pub fn tensors(&self) -> [(&'static str, &Array2<F>); TENSOR_COUNT] {
        [
            ("src_embedding", &self.src_embedding),
            ("encoder.0.weight", &self.encoder[0].weight),
            ("encoder.0.bias", &self.encoder[0].bias),
            ("encoder.1.weight", &self.encoder[1].weight),
            ("encoder.1.bias", &self.encoder[1].bias),
            ("tgt_embedding", &self.tgt_embedding),
            ("decoder.0.weight", &self.decoder[0].weight),
            ("decoder.0.bias", &self.decoder[0].bias),
            ("decoder.1.weight", &self.decoder[1].weight),
            ("decoder.1.bias", &self.decoder[1].bias),
            ("attention.score", &self.attn_score),
            ("attention.out", &self.attn_out),
            ("generator.weight", &self.out_proj),
            ("generator.bias", &self.out_bias),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Array2<F>); TENSOR_COUNT] {
        let [e0, e1] = &mut self.encoder;
        let [d0, d1] = &mut self.decoder;
        [
            ("src_embedding", &mut self.src_embedding),
            ("encoder.0.weight", &mut e0.weight),
            ("encoder.0.bias", &mut e0.bias),
            ("encoder.1.weight", &mut e1.weight),
            ("encoder.1.bias", &mut e1.bias),
            ("tgt_embedding", &mut self.tgt_embedding),
            ("decoder.0.weight", &mut d0.weight),
            ("decoder.0.bias", &mut d0.bias),
            ("decoder.1.weight", &mut d1.weight),
            ("decoder.1.bias", &mut d1.bias),
            ("attention.score", &mut self.attn_score),
            ("attention.out", &mut self.attn_out),
            ("generator.weight", &mut self.out_proj),
            ("generator.bias", &mut self.out_bias),
        ]
    }

    pub fn group_of(tensor_name: &str) -> ParamGroup {
        ParamGroup::ALL
            .into_iter()
            .find(|g| {
                tensor_name == g.name()
                    || tensor_name
                        .strip_prefix(g.name())
                        .is_some_and(|rest| rest.starts_with('.'))
            })
            .unwrap_or_else(|| panic!("tensor {tensor_name} has no group"))
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Self, scale: F) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.scaled_add(scale, b);
        }
    }

    pub fn scale(&mut self, factor: F) {
        for (_, t) in self.tensors_mut() {
            t.mapv_inplace(|x| x * factor);
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|x| {
                let v = x.to_f64().unwrap_or(f64::NAN);
                v * v
            })
            .sum()
    }

    pub fn cast<G: Real>(&self) -> ModelParams<G> {
        let mut out = ModelParams::<G>::zeros(self.config).expect("valid config");
        for ((_, dst), (_, src)) in out.tensors_mut().into_iter().zip(self.tensors()) {
            dst.zip_mut_with(src, |d, s| *d = G::of(s.to_f64().unwrap_or(f64::NAN)));
        }
        out
    }
}
