//! Sentence-level adaptation: chunk, translate, truncate, reassemble.

use crate::error::{Error, Result};
use crate::model::{beam_decode, default_max_len, greedy_decode_batch, Model, Real};
use crate::synth::{apply_rules, RewriteRuleSet};
use crate::textcodec::{chunk_sentence, decode_lenient, truncate_to_source, FlagMode, CHUNK_SIZE};

/// Maps chunks of standard-language words to dialect words.
pub trait ChunkTranslator: Sync {
    /// One word list per chunk. The output may have any length; callers fix it up.
    fn translate_chunks(&self, chunks: &[Vec<String>], dialect: Option<&str>) -> Result<Vec<Vec<String>>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decoding {
    Greedy,
    Beam(usize),
}

/// Chunks decoded together in greedy mode.
const DECODE_BATCH: usize = 64;

/// A trained model used as a translator.
pub struct ModelTranslator<'a, F> {
    pub model: &'a Model<F>,
    pub decoding: Decoding,
}

impl<'a, F: Real> ModelTranslator<'a, F> {
    pub fn greedy(model: &'a Model<F>) -> Self {
        Self {
            model,
            decoding: Decoding::Greedy,
        }
    }
}

impl<F: Real> ChunkTranslator for ModelTranslator<'_, F> {
    fn translate_chunks(&self, chunks: &[Vec<String>], dialect: Option<&str>) -> Result<Vec<Vec<String>>> {
        let model = self.model;
        if model.mode == FlagMode::Flagged {
            match dialect {
                None => return Err(Error::InvalidArgument("flagged model needs a dialect id".into())),
                Some(d) if !model.dialects.contains(d) => return Err(Error::UnknownDialect(d.to_owned())),
                Some(_) => {}
            }
        }
        let sources: Vec<Vec<u32>> = chunks
            .iter()
            .map(|c| model.source_ids(c, dialect))
            .collect::<Result<_>>()?;
        let mut ids: Vec<Vec<u32>> = vec![Vec::new(); chunks.len()];
        match self.decoding {
            Decoding::Greedy => {
                let mut order: Vec<usize> = (0..sources.len()).collect();
                order.sort_by_key(|&i| sources[i].len());
                for block in order.chunks(DECODE_BATCH) {
                    let srcs: Vec<&[u32]> = block.iter().map(|&i| sources[i].as_slice()).collect();
                    let caps: Vec<usize> = srcs.iter().map(|s| default_max_len(s.len())).collect();
                    for (&i, r) in block.iter().zip(greedy_decode_batch(&model.params, &srcs, &caps)?) {
                        ids[i] = r.ids;
                    }
                }
            }
            Decoding::Beam(width) => {
                for (out, src) in ids.iter_mut().zip(&sources) {
                    *out = beam_decode(&model.params, src, width, default_max_len(src.len()))?.ids;
                }
            }
        }
        Ok(ids
            .iter()
            .map(|i| decode_lenient(&model.vocab.tokens(i)))
            .collect())
    }
}

/// Word-by-word rule application: the exact adaptation a synthetic dialect defines.
pub struct RuleTranslator<'a> {
    pub rules: &'a [RewriteRuleSet],
}

impl ChunkTranslator for RuleTranslator<'_> {
    fn translate_chunks(&self, chunks: &[Vec<String>], dialect: Option<&str>) -> Result<Vec<Vec<String>>> {
        let id = dialect.ok_or_else(|| Error::InvalidArgument("rule translator needs a dialect id".into()))?;
        let set = self
            .rules
            .iter()
            .find(|s| s.dialect_id == id)
            .ok_or_else(|| Error::UnknownDialect(id.to_owned()))?;
        Ok(chunks
            .iter()
            .map(|c| c.iter().map(|w| apply_rules(w, set)).collect())
            .collect())
    }
}

/// Counts of chunk outputs whose word count needed fixing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AdaptStats {
    pub chunks: usize,
    /// Chunks with surplus words cut off.
    pub truncated: usize,
    /// Chunks that came back short; the missing words are copied from the source.
    pub padded: usize,
}

/// Adapts whitespace-tokenised sentences. Every output sentence has exactly as
/// many words as its input; empty sentences stay empty.
pub fn adapt_sentences<T: ChunkTranslator + ?Sized>(
    translator: &T,
    sentences: &[Vec<String>],
    dialect: Option<&str>,
) -> Result<(Vec<Vec<String>>, AdaptStats)> {
    let mut chunks = Vec::new();
    let mut owner = Vec::new();
    for (i, s) in sentences.iter().enumerate() {
        if s.is_empty() {
            continue;
        }
        for c in chunk_sentence(s, CHUNK_SIZE)? {
            chunks.push(c.words);
            owner.push(i);
        }
    }
    let translated = if chunks.is_empty() {
        Vec::new()
    } else {
        translator.translate_chunks(&chunks, dialect)?
    };
    if translated.len() != chunks.len() {
        return Err(Error::ShapeMismatch(format!(
            "translator returned {} outputs for {} chunks",
            translated.len(),
            chunks.len()
        )));
    }
    let mut out = vec![Vec::new(); sentences.len()];
    let mut stats = AdaptStats {
        chunks: chunks.len(),
        ..AdaptStats::default()
    };
    for ((src, pred), &i) in chunks.iter().zip(translated).zip(&owner) {
        let t = truncate_to_source(pred, src.len())?;
        if t.dropped > 0 {
            stats.truncated += 1;
        }
        if t.missing > 0 {
            stats.padded += 1;
        }
        out[i].extend(t.words);
        out[i].extend(src[src.len() - t.missing..].iter().cloned());
    }
    Ok((out, stats))
}

/// Adapts lines of text, splitting on whitespace and joining with single spaces.
pub fn adapt_lines<T: ChunkTranslator + ?Sized>(
    translator: &T,
    lines: &[&str],
    dialect: Option<&str>,
) -> Result<(Vec<String>, AdaptStats)> {
    let sentences: Vec<Vec<String>> = lines
        .iter()
        .map(|l| l.split_whitespace().map(str::to_owned).collect())
        .collect();
    let (out, stats) = adapt_sentences(translator, &sentences, dialect)?;
    Ok((out.into_iter().map(|ws| ws.join(" ")).collect(), stats))
}
