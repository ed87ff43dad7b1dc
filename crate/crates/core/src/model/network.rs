//! Forward and backward passes of the attentional encoder-decoder.
//!
//! Training runs time-major over a padded batch. Encoder rows past the end of
//! their source carry their state forward unchanged, so every example's final
//! encoder state is the state after its last real symbol, and padded source
//! positions are excluded from attention. Loss and gradients therefore do not
//! depend on which other examples share the batch.

use ndarray::linalg::general_mat_mul;
use ndarray::{concatenate, s, Array2, Array3, ArrayView2, Axis};
use rand::Rng;

use super::params::{LstmLayer, ModelParams, Real};
use super::vocab::{BOS, EOS, PAD};
use crate::error::{Error, Result};

fn sigmoid<F: Real>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

pub(crate) struct CellCache<F> {
    inp: Array2<F>,
    /// Activated gates `[i | f | g | o]`.
    acts: Array2<F>,
    c_prev: Array2<F>,
    tanh_c: Array2<F>,
}

/// One LSTM step over a batch. `inp` is `[x; h_prev]`.
pub(crate) fn cell_forward<F: Real>(
    layer: &LstmLayer<F>,
    inp: Array2<F>,
    c_prev: &Array2<F>,
    keep: bool,
) -> (Array2<F>, Array2<F>, Option<CellCache<F>>) {
    let hid = layer.hidden_dim();
    let rows = inp.nrows();
    let mut z = layer
        .bias
        .broadcast((rows, 4 * hid))
        .expect("bias is 1 x 4H")
        .to_owned();
    general_mat_mul(F::one(), &inp, &layer.weight, F::one(), &mut z);

    let mut h = Array2::zeros((rows, hid));
    let mut c = Array2::zeros((rows, hid));
    let mut tanh_c = Array2::zeros((rows, hid));
    {
        let zs = z.as_slice_mut().expect("standard layout");
        let cp = c_prev.as_slice().expect("standard layout");
        let hs = h.as_slice_mut().expect("standard layout");
        let cs = c.as_slice_mut().expect("standard layout");
        let ts = tanh_c.as_slice_mut().expect("standard layout");
        for r in 0..rows {
            let zr = &mut zs[r * 4 * hid..(r + 1) * 4 * hid];
            for j in 0..hid {
                let i = sigmoid(zr[j]);
                let f = sigmoid(zr[hid + j]);
                let g = zr[2 * hid + j].tanh();
                let o = sigmoid(zr[3 * hid + j]);
                zr[j] = i;
                zr[hid + j] = f;
                zr[2 * hid + j] = g;
                zr[3 * hid + j] = o;
                let k = r * hid + j;
                let cn = f * cp[k] + i * g;
                let tc = cn.tanh();
                cs[k] = cn;
                ts[k] = tc;
                hs[k] = o * tc;
            }
        }
    }
    let cache = keep.then(|| CellCache {
        inp,
        acts: z,
        c_prev: c_prev.clone(),
        tanh_c,
    });
    (h, c, cache)
}

/// Backpropagates `dh`/`dc` through one step, accumulating weight gradients.
/// Returns gradients for `[x; h_prev]` and `c_prev`.
pub(crate) fn cell_backward<F: Real>(
    layer: &LstmLayer<F>,
    grad: &mut LstmLayer<F>,
    cache: &CellCache<F>,
    dh: &Array2<F>,
    dc: &Array2<F>,
) -> (Array2<F>, Array2<F>) {
    let hid = layer.hidden_dim();
    let rows = dh.nrows();
    let one = F::one();
    let mut dz = Array2::zeros((rows, 4 * hid));
    let mut dc_prev = Array2::zeros((rows, hid));
    {
        let a = cache.acts.as_slice().expect("standard layout");
        let cp = cache.c_prev.as_slice().expect("standard layout");
        let tc = cache.tanh_c.as_slice().expect("standard layout");
        let dhs = dh.as_slice().expect("standard layout");
        let dcs = dc.as_slice().expect("standard layout");
        let dzs = dz.as_slice_mut().expect("standard layout");
        let dcp = dc_prev.as_slice_mut().expect("standard layout");
        for r in 0..rows {
            let ar = &a[r * 4 * hid..(r + 1) * 4 * hid];
            let dzr = &mut dzs[r * 4 * hid..(r + 1) * 4 * hid];
            for j in 0..hid {
                let k = r * hid + j;
                let (i, f, g, o) = (ar[j], ar[hid + j], ar[2 * hid + j], ar[3 * hid + j]);
                let t = tc[k];
                let dct = dcs[k] + dhs[k] * o * (one - t * t);
                let d_o = dhs[k] * t;
                dzr[j] = dct * g * i * (one - i);
                dzr[hid + j] = dct * cp[k] * f * (one - f);
                dzr[2 * hid + j] = dct * i * (one - g * g);
                dzr[3 * hid + j] = d_o * o * (one - o);
                dcp[k] = dct * f;
            }
        }
    }
    general_mat_mul(one, &cache.inp.t(), &dz, one, &mut grad.weight);
    grad.bias += &dz.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dinp = dz.dot(&layer.weight.t());
    (dinp, dc_prev)
}

fn gather_rows<F: Real>(table: &Array2<F>, ids: &[u32]) -> Array2<F> {
    let mut out = Array2::zeros((ids.len(), table.ncols()));
    for (mut row, &id) in out.rows_mut().into_iter().zip(ids) {
        row.assign(&table.row(id as usize));
    }
    out
}

fn scatter_rows<F: Real>(table: &mut Array2<F>, ids: &[u32], rows: ArrayView2<F>) {
    for (&id, row) in ids.iter().zip(rows.rows()) {
        let mut dst = table.row_mut(id as usize);
        dst += &row;
    }
}

fn concat_cols<F: Real>(parts: &[ArrayView2<F>]) -> Array2<F> {
    concatenate(Axis(1), parts).expect("row counts agree")
}

/// Rows of `new` where `keep[r]`, otherwise rows of `old`.
fn blend_rows<F: Real>(keep: &[bool], new: Array2<F>, old: &Array2<F>) -> Array2<F> {
    let mut out = new;
    for (r, &k) in keep.iter().enumerate() {
        if !k {
            out.row_mut(r).assign(&old.row(r));
        }
    }
    out
}

/// Splits `grad` into the part flowing through kept rows and the part carried past masked rows.
fn split_rows<F: Real>(keep: &[bool], grad: &Array2<F>) -> (Array2<F>, Array2<F>) {
    let mut through = grad.clone();
    let mut carried = Array2::zeros(grad.raw_dim());
    for (r, &k) in keep.iter().enumerate() {
        if !k {
            carried.row_mut(r).assign(&grad.row(r));
            through.row_mut(r).fill(F::zero());
        }
    }
    (through, carried)
}

fn dropout_mask<F: Real, R: Rng>(rng: &mut R, rows: usize, cols: usize, p: f64) -> Array2<F> {
    let keep = F::of(1.0 / (1.0 - p));
    Array2::from_shape_fn((rows, cols), |_| {
        if rng.gen::<f64>() < p {
            F::zero()
        } else {
            keep
        }
    })
}

fn softmax_rows_in_place<F: Real>(m: &mut Array2<F>) {
    for mut row in m.rows_mut() {
        let max = row.iter().fold(F::neg_infinity(), |a, &b| a.max(b));
        let mut sum = F::zero();
        row.mapv_inplace(|x| {
            let e = (x - max).exp();
            sum = sum + e;
            e
        });
        row.mapv_inplace(|x| x / sum);
    }
}

/// A teacher-forcing example: source ids and `BOS ... EOS` target ids.
#[derive(Debug, Clone, Copy)]
pub struct Pair<'a> {
    pub source: &'a [u32],
    pub target: &'a [u32],
}

pub(crate) fn validate_pair(pair: &Pair<'_>, vocab_size: usize) -> Result<()> {
    if pair.source.is_empty() {
        return Err(Error::ShapeMismatch("empty source sequence".into()));
    }
    if pair.target.len() < 2 || pair.target[0] != BOS || pair.target[pair.target.len() - 1] != EOS {
        return Err(Error::ShapeMismatch("target must be wrapped in BOS ... EOS".into()));
    }
    for &id in pair.source.iter().chain(pair.target) {
        if id as usize >= vocab_size {
            return Err(Error::OutOfVocabulary {
                id,
                size: vocab_size,
            });
        }
    }
    Ok(())
}

struct EncoderStep<F> {
    ids: Vec<u32>,
    keep: Vec<bool>,
    cells: [CellCache<F>; 2],
    drop: Option<Array2<F>>,
}

struct DecoderStep<F> {
    y_in: Vec<u32>,
    y_out: Vec<u32>,
    live: Vec<bool>,
    cells: [CellCache<F>; 2],
    drop_mid: Option<Array2<F>>,
    top: Array2<F>,
    query: Array2<F>,
    attn: Array2<F>,
    cat: Array2<F>,
    att: Array2<F>,
    drop_att: Option<Array2<F>>,
    att_out: Array2<F>,
    probs: Array2<F>,
}

pub(crate) struct BatchResult<F> {
    /// Summed negative log-likelihood over all target symbols.
    pub loss_sum: f64,
    pub tokens: usize,
    /// Per-example negative log-likelihood sums.
    pub example_loss: Vec<f64>,
    /// Gradient of the token-mean loss.
    pub grads: Option<ModelParams<F>>,
    pub probs: Vec<Array2<F>>,
    pub attention: Vec<Array2<F>>,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct PassOptions {
    pub grads: bool,
    pub record: bool,
}

pub(crate) fn run_batch<F: Real, R: Rng>(
    params: &ModelParams<F>,
    pairs: &[Pair<'_>],
    mut rng: Option<&mut R>,
    opts: PassOptions,
) -> Result<BatchResult<F>> {
    let cfg = params.config;
    if pairs.is_empty() {
        return Err(Error::ShapeMismatch("empty batch".into()));
    }
    for p in pairs {
        validate_pair(p, cfg.vocab_size)?;
    }
    let hid = cfg.hidden_dim;
    let batch = pairs.len();
    let src_len: Vec<usize> = pairs.iter().map(|p| p.source.len()).collect();
    let max_src = *src_len.iter().max().expect("non-empty");
    let steps = pairs.iter().map(|p| p.target.len() - 1).max().expect("non-empty");
    let p_drop = if rng.is_some() { cfg.dropout } else { 0.0 };

    // encoder
    let mut h = [Array2::<F>::zeros((batch, hid)), Array2::zeros((batch, hid))];
    let mut c = h.clone();
    let mut enc_steps = Vec::with_capacity(max_src);
    let mut memory = Array3::<F>::zeros((batch, max_src, hid));
    for t in 0..max_src {
        let keep: Vec<bool> = src_len.iter().map(|&l| t < l).collect();
        let ids: Vec<u32> = pairs
            .iter()
            .map(|p| p.source.get(t).copied().unwrap_or(PAD))
            .collect();
        let x = gather_rows(&params.src_embedding, &ids);
        let inp = concat_cols(&[x.view(), h[0].view()]);
        let (hn, cn, c0) = cell_forward(&params.encoder[0], inp, &c[0], opts.grads);
        h[0] = blend_rows(&keep, hn, &h[0]);
        c[0] = blend_rows(&keep, cn, &c[0]);

        let drop = match rng.as_deref_mut() {
            Some(r) if p_drop > 0.0 => Some(dropout_mask::<F, R>(r, batch, hid, p_drop)),
            _ => None,
        };
        let x1 = match &drop {
            Some(m) => &h[0] * m,
            None => h[0].clone(),
        };
        let inp = concat_cols(&[x1.view(), h[1].view()]);
        let (hn, cn, c1) = cell_forward(&params.encoder[1], inp, &c[1], opts.grads);
        h[1] = blend_rows(&keep, hn, &h[1]);
        c[1] = blend_rows(&keep, cn, &c[1]);
        memory.slice_mut(s![.., t, ..]).assign(&h[1]);
        if opts.grads {
            enc_steps.push(EncoderStep {
                ids,
                keep,
                cells: [c0.expect("kept"), c1.expect("kept")],
                drop,
            });
        }
    }

    // decoder
    let mut feed = Array2::<F>::zeros((batch, hid));
    let mut dec_steps = Vec::with_capacity(steps);
    let mut loss_sum = 0.0;
    let mut example_loss = vec![0.0; batch];
    let mut tokens = 0usize;
    let mut rec_probs = Vec::new();
    let mut rec_attn = Vec::new();
    for t in 0..steps {
        let live: Vec<bool> = pairs.iter().map(|p| t + 1 < p.target.len()).collect();
        let y_in: Vec<u32> = pairs
            .iter()
            .map(|p| if t + 1 < p.target.len() { p.target[t] } else { PAD })
            .collect();
        let y_out: Vec<u32> = pairs
            .iter()
            .map(|p| p.target.get(t + 1).copied().unwrap_or(PAD))
            .collect();

        let e = gather_rows(&params.tgt_embedding, &y_in);
        let inp = concat_cols(&[e.view(), feed.view(), h[0].view()]);
        let (hn, cn, c0) = cell_forward(&params.decoder[0], inp, &c[0], opts.grads);
        h[0] = hn;
        c[0] = cn;
        let drop_mid = match rng.as_deref_mut() {
            Some(r) if p_drop > 0.0 => Some(dropout_mask::<F, R>(r, batch, hid, p_drop)),
            _ => None,
        };
        let x1 = match &drop_mid {
            Some(m) => &h[0] * m,
            None => h[0].clone(),
        };
        let inp = concat_cols(&[x1.view(), h[1].view()]);
        let (hn, cn, c1) = cell_forward(&params.decoder[1], inp, &c[1], opts.grads);
        h[1] = hn;
        c[1] = cn;

        let top = h[1].clone();
        let query = top.dot(&params.attn_score);
        let mut attn = Array2::<F>::zeros((batch, max_src));
        let mut ctx = Array2::<F>::zeros((batch, hid));
        for b in 0..batch {
            let mem = memory.slice(s![b, ..src_len[b], ..]);
            let mut scores = mem.dot(&query.row(b));
            let max = scores.iter().fold(F::neg_infinity(), |a, &x| a.max(x));
            scores.mapv_inplace(|x| (x - max).exp());
            let sum = scores.sum();
            scores.mapv_inplace(|x| x / sum);
            ctx.row_mut(b).assign(&scores.dot(&mem));
            attn.slice_mut(s![b, ..src_len[b]]).assign(&scores);
        }
        let cat = concat_cols(&[ctx.view(), top.view()]);
        let att = cat.dot(&params.attn_out).mapv(|x| x.tanh());
        let drop_att = match rng.as_deref_mut() {
            Some(r) if p_drop > 0.0 => Some(dropout_mask::<F, R>(r, batch, hid, p_drop)),
            _ => None,
        };
        let att_out = match &drop_att {
            Some(m) => &att * m,
            None => att.clone(),
        };
        let mut probs = att_out.dot(&params.out_proj);
        probs += &params.out_bias;
        softmax_rows_in_place(&mut probs);
        for b in 0..batch {
            if live[b] {
                let p = probs[[b, y_out[b] as usize]].to_f64().unwrap_or(0.0);
                let nll = -p.max(f64::MIN_POSITIVE).ln();
                loss_sum += nll;
                example_loss[b] += nll;
                tokens += 1;
            }
        }
        if opts.record {
            rec_probs.push(probs.clone());
            rec_attn.push(attn.clone());
        }
        feed = att_out.clone();
        if opts.grads {
            dec_steps.push(DecoderStep {
                y_in,
                y_out,
                live,
                cells: [c0.expect("kept"), c1.expect("kept")],
                drop_mid,
                top,
                query,
                attn,
                cat,
                att,
                drop_att,
                att_out,
                probs,
            });
        }
    }

    let grads = if opts.grads {
        Some(backward(params, &enc_steps, &dec_steps, &memory, &src_len, tokens))
    } else {
        None
    };
    Ok(BatchResult {
        loss_sum,
        tokens,
        example_loss,
        grads,
        probs: rec_probs,
        attention: rec_attn,
    })
}

fn backward<F: Real>(
    params: &ModelParams<F>,
    enc_steps: &[EncoderStep<F>],
    dec_steps: &[DecoderStep<F>],
    memory: &Array3<F>,
    src_len: &[usize],
    tokens: usize,
) -> ModelParams<F> {
    let cfg = params.config;
    let (emb, hid) = (cfg.emb_dim, cfg.hidden_dim);
    let batch = src_len.len();
    let one = F::one();
    let inv_tokens = F::of(1.0 / tokens.max(1) as f64);
    let mut g = params.zeros_like();

    let mut dh = [Array2::<F>::zeros((batch, hid)), Array2::zeros((batch, hid))];
    let mut dc = dh.clone();
    let mut dfeed = Array2::<F>::zeros((batch, hid));
    let mut dmemory = Array3::<F>::zeros(memory.raw_dim());

    for st in dec_steps.iter().rev() {
        let mut dlogits = st.probs.clone();
        for (b, mut row) in dlogits.rows_mut().into_iter().enumerate() {
            if st.live[b] {
                row[st.y_out[b] as usize] = row[st.y_out[b] as usize] - one;
                row.mapv_inplace(|x| x * inv_tokens);
            } else {
                row.fill(F::zero());
            }
        }
        general_mat_mul(one, &st.att_out.t(), &dlogits, one, &mut g.out_proj);
        g.out_bias += &dlogits.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut datt = dlogits.dot(&params.out_proj.t());
        datt += &dfeed;
        if let Some(m) = &st.drop_att {
            datt *= m;
        }
        let dpre = &datt * &st.att.mapv(|a| one - a * a);
        general_mat_mul(one, &st.cat.t(), &dpre, one, &mut g.attn_out);
        let dcat = dpre.dot(&params.attn_out.t());
        let dctx = dcat.slice(s![.., ..hid]);
        let mut dtop = dcat.slice(s![.., hid..]).to_owned();

        let mut dquery = Array2::<F>::zeros((batch, hid));
        for b in 0..batch {
            let n = src_len[b];
            let mem = memory.slice(s![b, ..n, ..]);
            let a = st.attn.slice(s![b, ..n]);
            let dctx_b = dctx.row(b);
            let da = mem.dot(&dctx_b);
            let dot: F = a.iter().zip(da.iter()).map(|(&x, &y)| x * y).sum();
            let dscore = ndarray::Zip::from(&a).and(&da).map_collect(|&x, &y| x * (y - dot));
            dquery.row_mut(b).assign(&dscore.dot(&mem));
            let mut dmem = dmemory.slice_mut(s![b, ..n, ..]);
            let q = st.query.row(b);
            for (s_idx, mut row) in dmem.rows_mut().into_iter().enumerate() {
                row.scaled_add(a[s_idx], &dctx_b);
                row.scaled_add(dscore[s_idx], &q);
            }
        }
        general_mat_mul(one, &st.top.t(), &dquery, one, &mut g.attn_score);
        general_mat_mul(one, &dquery, &params.attn_score.t(), one, &mut dtop);
        dh[1] += &dtop;

        let (dinp, dcp) = cell_backward(&params.decoder[1], &mut g.decoder[1], &st.cells[1], &dh[1], &dc[1]);
        let mut dx1 = dinp.slice(s![.., ..hid]).to_owned();
        dh[1] = dinp.slice(s![.., hid..]).to_owned();
        dc[1] = dcp;
        if let Some(m) = &st.drop_mid {
            dx1 *= m;
        }
        dh[0] += &dx1;

        let (dinp, dcp) = cell_backward(&params.decoder[0], &mut g.decoder[0], &st.cells[0], &dh[0], &dc[0]);
        scatter_rows(&mut g.tgt_embedding, &st.y_in, dinp.slice(s![.., ..emb]));
        dfeed = dinp.slice(s![.., emb..emb + hid]).to_owned();
        dh[0] = dinp.slice(s![.., emb + hid..]).to_owned();
        dc[0] = dcp;
    }

    for (t, st) in enc_steps.iter().enumerate().rev() {
        dh[1] += &dmemory.slice(s![.., t, ..]);
        let (dh_in, dh_carry) = split_rows(&st.keep, &dh[1]);
        let (dc_in, dc_carry) = split_rows(&st.keep, &dc[1]);
        let (dinp, dcp) = cell_backward(&params.encoder[1], &mut g.encoder[1], &st.cells[1], &dh_in, &dc_in);
        let mut dx1 = dinp.slice(s![.., ..hid]).to_owned();
        dh[1] = &dinp.slice(s![.., hid..]) + &dh_carry;
        dc[1] = dcp + dc_carry;
        if let Some(m) = &st.drop {
            dx1 *= m;
        }
        dh[0] += &dx1;

        let (dh_in, dh_carry) = split_rows(&st.keep, &dh[0]);
        let (dc_in, dc_carry) = split_rows(&st.keep, &dc[0]);
        let (dinp, dcp) = cell_backward(&params.encoder[0], &mut g.encoder[0], &st.cells[0], &dh_in, &dc_in);
        scatter_rows(&mut g.src_embedding, &st.ids, dinp.slice(s![.., ..emb]));
        dh[0] = &dinp.slice(s![.., emb..]) + &dh_carry;
        dc[0] = dcp + dc_carry;
    }
    g
}

/// Encoder output for a batch of sources, used by the decoders.
pub(crate) struct Memory<F> {
    /// `sources x max_len x hidden` top-layer states; rows past a source's end are zero.
    pub states: Array3<F>,
    pub lens: Vec<usize>,
}

/// Recurrent decoder state for a set of hypotheses, one row each.
#[derive(Clone)]
pub(crate) struct DecoderState<F> {
    pub h: [Array2<F>; 2],
    pub c: [Array2<F>; 2],
    pub feed: Array2<F>,
}

impl<F: Real> DecoderState<F> {
    pub fn select(&self, rows: &[usize]) -> Self {
        let pick = |m: &Array2<F>| m.select(Axis(0), rows);
        Self {
            h: [pick(&self.h[0]), pick(&self.h[1])],
            c: [pick(&self.c[0]), pick(&self.c[1])],
            feed: pick(&self.feed),
        }
    }
}

/// Runs the encoder over non-empty sources. Row `b` of the returned state is
/// the final state of source `b`.
pub(crate) fn encode_batch<F: Real>(params: &ModelParams<F>, sources: &[&[u32]]) -> (Memory<F>, DecoderState<F>) {
    let hid = params.config.hidden_dim;
    let batch = sources.len();
    let lens: Vec<usize> = sources.iter().map(|s| s.len()).collect();
    let max_len = lens.iter().copied().max().unwrap_or(0);
    let mut h = [Array2::<F>::zeros((batch, hid)), Array2::zeros((batch, hid))];
    let mut c = h.clone();
    let mut states = Array3::<F>::zeros((batch, max_len, hid));
    for t in 0..max_len {
        let keep: Vec<bool> = lens.iter().map(|&l| t < l).collect();
        let ids: Vec<u32> = sources.iter().map(|s| s.get(t).copied().unwrap_or(PAD)).collect();
        let x = gather_rows(&params.src_embedding, &ids);
        let inp = concat_cols(&[x.view(), h[0].view()]);
        let (hn, cn, _) = cell_forward(&params.encoder[0], inp, &c[0], false);
        h[0] = blend_rows(&keep, hn, &h[0]);
        c[0] = blend_rows(&keep, cn, &c[0]);
        let inp = concat_cols(&[h[0].view(), h[1].view()]);
        let (hn, cn, _) = cell_forward(&params.encoder[1], inp, &c[1], false);
        h[1] = blend_rows(&keep, hn, &h[1]);
        c[1] = blend_rows(&keep, cn, &c[1]);
        for (b, &k) in keep.iter().enumerate() {
            if k {
                states.slice_mut(s![b, t, ..]).assign(&h[1].row(b));
            }
        }
    }
    let state = DecoderState {
        h,
        c,
        feed: Array2::zeros((batch, hid)),
    };
    (Memory { states, lens }, state)
}

/// Advances every hypothesis by one symbol. Hypothesis `r` attends over
/// source `mem_rows[r]` of `memory`. Returns `rows x vocab` log-probabilities.
pub(crate) fn decoder_step<F: Real>(
    params: &ModelParams<F>,
    memory: &Memory<F>,
    mem_rows: &[usize],
    state: &DecoderState<F>,
    prev: &[u32],
) -> (Array2<F>, DecoderState<F>) {
    let hid = params.config.hidden_dim;
    let e = gather_rows(&params.tgt_embedding, prev);
    let inp = concat_cols(&[e.view(), state.feed.view(), state.h[0].view()]);
    let (h0, c0, _) = cell_forward(&params.decoder[0], inp, &state.c[0], false);
    let inp = concat_cols(&[h0.view(), state.h[1].view()]);
    let (h1, c1, _) = cell_forward(&params.decoder[1], inp, &state.c[1], false);
    let query = h1.dot(&params.attn_score);
    let mut ctx = Array2::<F>::zeros((prev.len(), hid));
    for (r, &m) in mem_rows.iter().enumerate() {
        let mem = memory.states.slice(s![m, ..memory.lens[m], ..]);
        let mut scores = mem.dot(&query.row(r));
        let max = scores.iter().fold(F::neg_infinity(), |a, &x| a.max(x));
        scores.mapv_inplace(|x| (x - max).exp());
        let sum = scores.sum();
        scores.mapv_inplace(|x| x / sum);
        ctx.row_mut(r).assign(&scores.dot(&mem));
    }
    let cat = concat_cols(&[ctx.view(), h1.view()]);
    let att = cat.dot(&params.attn_out).mapv(|x| x.tanh());
    let mut logits = att.dot(&params.out_proj);
    logits += &params.out_bias;
    for mut row in logits.rows_mut() {
        let max = row.iter().fold(F::neg_infinity(), |a, &b| a.max(b));
        let lse = row.iter().map(|&x| (x - max).exp()).sum::<F>().ln() + max;
        row.mapv_inplace(|x| x - lse);
    }
    let next = DecoderState {
        h: [h0, h1],
        c: [c0, c1],
        feed: att,
    };
    (logits, next)
}
