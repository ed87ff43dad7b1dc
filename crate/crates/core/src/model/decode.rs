use super::network::{decoder_step, encode_batch, DecoderState};
use super::params::{ModelParams, Real};
use super::vocab::{Vocabulary, BOS, EOS};
use crate::error::{Error, Result};
use crate::textcodec::Token;

/// Output of a decoder search.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Generated ids, ending with EOS when `finished`.
    pub ids: Vec<u32>,
    /// Sum of the chosen symbols' log-probabilities.
    pub score: f64,
    /// False when the length cap cut the search off.
    pub finished: bool,
}

impl DecodeResult {
    pub fn tokens(&self, vocab: &Vocabulary) -> Vec<Token> {
        vocab.tokens(&self.ids)
    }
}

/// Generation cap for a source of `source_len` symbols.
pub fn default_max_len(source_len: usize) -> usize {
    3 * source_len + 10
}

fn check_source<F: Real>(params: &ModelParams<F>, source: &[u32]) -> Result<()> {
    if source.is_empty() {
        return Err(Error::ShapeMismatch("empty source sequence".into()));
    }
    let size = params.config.vocab_size;
    match source.iter().find(|&&id| id as usize >= size) {
        Some(&id) => Err(Error::OutOfVocabulary { id, size }),
        None => Ok(()),
    }
}

fn argmax<F: Real>(row: ndarray::ArrayView1<'_, F>) -> (usize, F) {
    let mut best = (0, row[0]);
    for (i, &x) in row.iter().enumerate().skip(1) {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

pub fn greedy_decode<F: Real>(params: &ModelParams<F>, source: &[u32], max_len: usize) -> Result<DecodeResult> {
    let mut out = greedy_decode_batch(params, &[source], &[max_len])?;
    Ok(out.pop().expect("one source"))
}

/// Greedy decoding of several sources at once; `max_lens[i]` caps source `i`.
/// Each result is the same as decoding that source alone.
pub fn greedy_decode_batch<F: Real>(
    params: &ModelParams<F>,
    sources: &[&[u32]],
    max_lens: &[usize],
) -> Result<Vec<DecodeResult>> {
    if sources.len() != max_lens.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} sources but {} length caps",
            sources.len(),
            max_lens.len()
        )));
    }
    for s in sources {
        check_source(params, s)?;
    }
    let mut results: Vec<DecodeResult> = max_lens
        .iter()
        .map(|_| DecodeResult {
            ids: Vec::new(),
            score: 0.0,
            finished: false,
        })
        .collect();
    if sources.is_empty() {
        return Ok(results);
    }
    let (memory, mut state) = encode_batch(params, sources);
    // rows of `state` still generating, as indices into `sources`
    let mut active: Vec<usize> = (0..sources.len()).filter(|&i| max_lens[i] > 0).collect();
    if active.len() < sources.len() {
        state = state.select(&active);
    }
    let mut prev = vec![BOS; active.len()];
    while !active.is_empty() {
        let (logp, next) = decoder_step(params, &memory, &active, &state, &prev);
        let mut keep_rows = Vec::new();
        let mut still = Vec::new();
        prev.clear();
        for (r, &src) in active.iter().enumerate() {
            let (id, lp) = argmax(logp.row(r));
            let res = &mut results[src];
            res.score += lp.to_f64().unwrap_or(f64::NEG_INFINITY);
            res.ids.push(id as u32);
            if id as u32 == EOS {
                res.finished = true;
            } else if res.ids.len() < max_lens[src] {
                keep_rows.push(r);
                still.push(src);
                prev.push(id as u32);
            }
        }
        state = if keep_rows.len() == active.len() {
            next
        } else {
            next.select(&keep_rows)
        };
        active = still;
    }
    Ok(results)
}

struct Hypothesis {
    ids: Vec<u32>,
    score: f64,
}

/// Beam search over summed log-probabilities.
///
/// The search stops once no live hypothesis can beat the best finished one. The
/// greedy path is kept as a fallback candidate, so the result never scores below
/// greedy decoding; with `beam_width == 1` the search is exactly greedy.
pub fn beam_decode<F: Real>(
    params: &ModelParams<F>,
    source: &[u32],
    beam_width: usize,
    max_len: usize,
) -> Result<DecodeResult> {
    if beam_width == 0 {
        return Err(Error::InvalidArgument("beam width must be at least 1".into()));
    }
    check_source(params, source)?;
    let (memory, init) = encode_batch(params, &[source]);
    let mut state: DecoderState<F> = init;
    let mut live = vec![Hypothesis {
        ids: Vec::new(),
        score: 0.0,
    }];
    let mut finished: Vec<DecodeResult> = Vec::new();

    for _ in 0..max_len {
        let prev: Vec<u32> = live
            .iter()
            .map(|h| h.ids.last().copied().unwrap_or(BOS))
            .collect();
        let (logp, next) = decoder_step(params, &memory, &vec![0; prev.len()], &state, &prev);
        let mut candidates: Vec<(f64, usize, u32)> = Vec::with_capacity(live.len() * logp.ncols());
        for (r, hyp) in live.iter().enumerate() {
            for (v, &lp) in logp.row(r).iter().enumerate() {
                candidates.push((hyp.score + lp.to_f64().unwrap_or(f64::NEG_INFINITY), r, v as u32));
            }
        }
        // best score first; ties resolved towards earlier hypotheses and lower ids
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        candidates.truncate(beam_width);

        let mut next_live = Vec::new();
        let mut rows = Vec::new();
        for (score, r, v) in candidates {
            let mut ids = live[r].ids.clone();
            ids.push(v);
            if v == EOS {
                finished.push(DecodeResult {
                    ids,
                    score,
                    finished: true,
                });
            } else {
                next_live.push(Hypothesis { ids, score });
                rows.push(r);
            }
        }
        live = next_live;
        let best_finished = finished.iter().map(|f| f.score).fold(f64::NEG_INFINITY, f64::max);
        let best_live = live.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
        if live.is_empty() || best_finished >= best_live {
            break;
        }
        state = next.select(&rows);
    }

    let mut best = finished.into_iter().reduce(|a, b| if b.score > a.score { b } else { a });
    if best.is_none() {
        best = live
            .into_iter()
            .reduce(|a, b| if b.score > a.score { b } else { a })
            .map(|h| DecodeResult {
                ids: h.ids,
                score: h.score,
                finished: false,
            });
    }
    let best = best.expect("at least one hypothesis");
    if beam_width > 1 {
        let greedy = greedy_decode(params, source, max_len)?;
        if greedy.score > best.score {
            return Ok(greedy);
        }
    }
    Ok(best)
}
