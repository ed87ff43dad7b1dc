//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! magic            8 bytes  "MURRECKP"
//! version          u32      1
//! dtype            u8       4 (f32) or 8 (f64)
//! mode             u8       0 plain, 1 flagged
//! vocab_size       u32
//! emb_dim          u32
//! hidden_dim       u32
//! layers           u32      2
//! dropout          f64
//! dialect_count    u32, then per dialect: id (str), flag label (str)
//! symbol_count     u32, then per symbol: str
//! tensor_count     u32, then per tensor:
//!     name (str), rows u32, cols u32, rows*cols values in row-major order
//! ```
//!
//! `str` is a u32 byte length followed by UTF-8 bytes. Tensors appear in the
//! fixed order of [`ModelParams::tensors`].

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::params::{DType, ModelConfig, ModelParams, ParamGroup, Real, LAYERS};
use super::vocab::Vocabulary;
use super::Model;
use crate::corpus::DialectManifest;
use crate::error::{Error, Result};
use crate::textcodec::FlagMode;

pub const MAGIC: &[u8; 8] = b"MURRECKP";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

fn put_tensor<F: Real>(out: &mut Vec<u8>, name: &str, t: &Array2<F>) {
    put_str(out, name);
    put_u32(out, t.nrows());
    put_u32(out, t.ncols());
    for &x in t.iter() {
        x.write_le(out);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn str(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Checkpoint("invalid UTF-8 string".into()))
    }
}

impl<F: Real> Model<F> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let cfg = self.params.config;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, FORMAT_VERSION as usize);
        out.push(F::DTYPE.width() as u8);
        out.push(match self.mode {
            FlagMode::Plain => 0,
            FlagMode::Flagged => 1,
        });
        put_u32(&mut out, cfg.vocab_size);
        put_u32(&mut out, cfg.emb_dim);
        put_u32(&mut out, cfg.hidden_dim);
        put_u32(&mut out, LAYERS);
        out.extend_from_slice(&cfg.dropout.to_le_bytes());
        put_u32(&mut out, self.dialects.len());
        for (id, label) in self.dialects.ids().zip(self.dialects.labels()) {
            put_str(&mut out, id);
            put_str(&mut out, label);
        }
        let symbols = self.vocab.to_strings();
        put_u32(&mut out, symbols.len());
        for s in &symbols {
            put_str(&mut out, s);
        }
        let tensors = self.params.tensors();
        put_u32(&mut out, tensors.len());
        for (name, t) in tensors {
            put_tensor(&mut out, name, t);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION as usize {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let width = r.u8()? as usize;
        if width != F::DTYPE.width() {
            return Err(Error::Checkpoint(format!(
                "checkpoint stores {width}-byte floats, expected {}",
                F::DTYPE.width()
            )));
        }
        let mode = match r.u8()? {
            0 => FlagMode::Plain,
            1 => FlagMode::Flagged,
            m => return Err(Error::Checkpoint(format!("unknown mode byte {m}"))),
        };
        let vocab_size = r.u32()?;
        let emb_dim = r.u32()?;
        let hidden_dim = r.u32()?;
        let layers = r.u32()?;
        if layers != LAYERS {
            return Err(Error::Checkpoint(format!("{layers} layers, expected {LAYERS}")));
        }
        let dropout = r.f64()?;
        let config = ModelConfig {
            vocab_size,
            emb_dim,
            hidden_dim,
            dropout,
        };
        let mut dialects = DialectManifest::new();
        for _ in 0..r.u32()? {
            let id = r.str()?;
            let label = r.str()?;
            dialects
                .insert(&id, Some(&label))
                .map_err(|e| Error::Checkpoint(e.to_string()))?;
        }
        let n_symbols = r.u32()?;
        let symbols = (0..n_symbols).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        let vocab = Vocabulary::from_strings(&symbols)?;
        if vocab.len() != vocab_size {
            return Err(Error::Checkpoint(format!(
                "vocabulary has {} symbols, header says {vocab_size}",
                vocab.len()
            )));
        }
        if mode == FlagMode::Flagged && dialects.labels().any(|l| !vocab.flags().any(|f| f == l)) {
            return Err(Error::Checkpoint("dialect flag missing from vocabulary".into()));
        }
        let mut params = ModelParams::<F>::zeros(config).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let count = r.u32()?;
        if count != params.tensors().len() {
            return Err(Error::Checkpoint(format!("{count} tensors, expected {}", params.tensors().len())));
        }
        let width = F::DTYPE.width();
        for (name, t) in params.tensors_mut() {
            let got = r.str()?;
            if got != name {
                return Err(Error::Checkpoint(format!("expected tensor {name}, found {got}")));
            }
            let (rows, cols) = (r.u32()?, r.u32()?);
            if (rows, cols) != t.dim() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} is {rows}x{cols}, expected {:?}",
                    t.dim()
                )));
            }
            let data = r.take(rows * cols * width)?;
            for (dst, chunk) in t.iter_mut().zip(data.chunks_exact(width)) {
                *dst = F::read_le(chunk);
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after tensors".into()));
        }
        Ok(Self {
            vocab,
            dialects,
            mode,
            params,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Serialized tensors of one parameter group, in checkpoint layout.
    pub fn group_bytes(&self, group: ParamGroup) -> Vec<u8> {
        let mut out = Vec::new();
        for (name, t) in self.params.tensors() {
            if ModelParams::<F>::group_of(name) == group {
                put_tensor(&mut out, name, t);
            }
        }
        out
    }
}

/// Reads only the float width of a checkpoint header.
pub fn checkpoint_dtype(bytes: &[u8]) -> Result<DType> {
    if bytes.len() < 13 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint".into()));
    }
    match bytes[12] {
        4 => Ok(DType::F32),
        8 => Ok(DType::F64),
        w => Err(Error::Checkpoint(format!("unknown float width {w}"))),
    }
}
