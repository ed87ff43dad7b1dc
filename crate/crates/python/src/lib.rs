use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use murre::adapt::{adapt_lines, Decoding, ModelTranslator};
use murre::corpus::{self, CleaningMap, DialectManifest, ParallelExample, SplitRatios};
use murre::eval;
use murre::model::{build_vocabulary, Model, ModelConfig};
use murre::synth::{self, RewriteRuleSet, SentenceLength};
use murre::textcodec::{self, EncodedSequence, FlagMode};
use murre::training::{self, TrainingConfig};

create_exception!(murre_py, MurreError, PyException);

fn err(e: murre::Error) -> PyErr {
    MurreError::new_err(format!("[{}] {e}", e.code()))
}

/// Space-separated symbol string of a word sequence, `_` between words.
#[pyfunction]
fn encode(words: Vec<String>) -> PyResult<String> {
    Ok(textcodec::encode(&words).map_err(err)?.to_string())
}

#[pyfunction]
fn decode(symbols: &str) -> PyResult<Vec<String>> {
    let seq = EncodedSequence::parse(symbols).map_err(err)?;
    textcodec::decode(&seq).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (words, size = textcodec::CHUNK_SIZE))]
fn chunk(words: Vec<String>, size: usize) -> PyResult<Vec<Vec<String>>> {
    Ok(textcodec::chunk_sentence(&words, size)
        .map_err(err)?
        .into_iter()
        .map(|c| c.words)
        .collect())
}

/// Cleans `text` with a map given in the cleaning-map file format.
#[pyfunction]
fn clean_text(text: &str, cleaning_map: &str) -> PyResult<String> {
    let map = CleaningMap::parse(cleaning_map).map_err(err)?;
    Ok(corpus::clean_text(text, &map))
}

/// Rewrites one word with rules given in the rule-file format.
#[pyfunction]
fn apply_rules(word: &str, rules: &str) -> PyResult<String> {
    let set = RewriteRuleSet::parse(rules, "rules").map_err(err)?;
    Ok(synth::apply_rules(word, &set))
}

/// Generates `(dialect, source, target)` sentence triples from `{dialect id: rule text}`.
#[pyfunction]
#[pyo3(signature = (vocabulary, dialects, sentences, min_words = 2, max_words = 8, seed = 1))]
fn generate_corpus(
    vocabulary: Vec<String>,
    dialects: BTreeMap<String, String>,
    sentences: usize,
    min_words: usize,
    max_words: usize,
    seed: u64,
) -> PyResult<Vec<(String, String, String)>> {
    let sets: Vec<RewriteRuleSet> = dialects
        .iter()
        .map(|(id, text)| RewriteRuleSet::parse(text, id))
        .collect::<murre::Result<_>>()
        .map_err(err)?;
    let length = SentenceLength {
        min: min_words,
        max: max_words,
    };
    let corpus = synth::generate_corpus(&vocabulary, &sets, sentences, length, seed).map_err(err)?;
    Ok(corpus.into_iter().map(triple).collect())
}

fn triple(e: ParallelExample) -> (String, String, String) {
    (e.dialect_id, e.source_words.join(" "), e.target_words.join(" "))
}

fn examples(items: &[(String, String, String)]) -> PyResult<Vec<ParallelExample>> {
    items
        .iter()
        .map(|(d, s, t)| ParallelExample::from_sentences(d, s, t))
        .collect::<murre::Result<_>>()
        .map_err(err)
}

/// `(train, valid, test)` sizes of a dialect with `n` sentences.
#[pyfunction]
#[pyo3(signature = (n, ratios = "0.7,0.15,0.15"))]
fn split_sizes(n: usize, ratios: &str) -> PyResult<(usize, usize, usize)> {
    let r: SplitRatios = ratios.parse().map_err(err)?;
    Ok(r.sizes(n))
}

/// Word alignment counts as a dict with keys S, D, I, C.
#[pyfunction]
fn align_words(reference: Vec<String>, hypothesis: Vec<String>) -> BTreeMap<&'static str, usize> {
    let c = eval::align_words(&reference, &hypothesis);
    BTreeMap::from([
        ("S", c.substitutions),
        ("D", c.deletions),
        ("I", c.insertions),
        ("C", c.correct),
    ])
}

/// WER of one sentence pair, or None for an empty reference.
#[pyfunction]
fn wer(reference: Vec<String>, hypothesis: Vec<String>) -> Option<f64> {
    eval::align_words(&reference, &hypothesis).wer()
}

/// `(macro, micro)` distance of adapted sentences from their standard originals.
#[pyfunction]
fn distance_from_standard(adapted: Vec<Vec<String>>, standard: Vec<Vec<String>>) -> PyResult<(Option<f64>, Option<f64>)> {
    let r = eval::distance_from_standard(&adapted, &standard).map_err(err)?;
    Ok((r.macro_wer, r.micro_wer))
}

/// A trained adaptation model.
#[pyclass(name = "Model")]
struct PyModel {
    inner: Model<f32>,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Model::load(path).map_err(err)?,
        })
    }

    /// Trains a fresh model on `(dialect, source, target)` triples.
    /// `settings` holds training config keys as strings, e.g. `{"steps": "500"}`.
    #[staticmethod]
    #[pyo3(signature = (train, valid, flagged = true, profile = "desk", settings = BTreeMap::new()))]
    fn train(
        train: Vec<(String, String, String)>,
        valid: Vec<(String, String, String)>,
        flagged: bool,
        profile: &str,
        settings: BTreeMap<String, String>,
    ) -> PyResult<(Self, Vec<f64>)> {
        let train = examples(&train)?;
        let valid = examples(&valid)?;
        let mode = if flagged { FlagMode::Flagged } else { FlagMode::Plain };
        let mut config = TrainingConfig::desk();
        for (k, v) in &settings {
            config.set(k, v).map_err(err)?;
        }
        let model_config = match profile {
            "desk" => ModelConfig::desk(0),
            "tiny" => ModelConfig::tiny(0),
            "reference" => ModelConfig::reference(0),
            _ => return Err(MurreError::new_err(format!("unknown profile {profile:?}"))),
        };
        let all: Vec<ParallelExample> = train.iter().chain(&valid).cloned().collect();
        let dialects = DialectManifest::from_examples(&all);
        let flags: Vec<&str> = if flagged { dialects.labels().collect() } else { Vec::new() };
        let vocab = build_vocabulary(&all, &flags).map_err(err)?;
        let mut model = Model::new(vocab, dialects, mode, model_config, config.seed).map_err(err)?;
        let pairs = training::make_training_pairs(&train, mode, None, &model.dialects).map_err(err)?;
        let valid_pairs = training::make_training_pairs(&valid, mode, None, &model.dialects).map_err(err)?;
        let run = training::train(&mut model, &pairs, &valid_pairs, &config, None).map_err(err)?;
        Ok((Self { inner: model }, run.loss_log))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    #[getter]
    fn flagged(&self) -> bool {
        self.inner.mode == FlagMode::Flagged
    }

    #[getter]
    fn dialects(&self) -> Vec<String> {
        self.inner.dialects.ids().map(str::to_owned).collect()
    }

    #[getter]
    fn vocab_size(&self) -> usize {
        self.inner.vocab.len()
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.inner.params.parameter_count()
    }

    /// Adapts sentences; each output line has as many words as its input.
    #[pyo3(signature = (lines, dialect = None, beam = 1))]
    fn adapt(&self, lines: Vec<String>, dialect: Option<&str>, beam: usize) -> PyResult<Vec<String>> {
        let decoding = match beam {
            0 => return Err(MurreError::new_err("beam width must be at least 1")),
            1 => Decoding::Greedy,
            w => Decoding::Beam(w),
        };
        let translator = ModelTranslator {
            model: &self.inner,
            decoding,
        };
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        Ok(adapt_lines(&translator, &refs, dialect).map_err(err)?.0)
    }

    /// `(macro, micro)` WER on `(dialect, source, target)` triples.
    fn evaluate(&self, test: Vec<(String, String, String)>) -> PyResult<(Option<f64>, Option<f64>)> {
        let test = examples(&test)?;
        let r = eval::evaluate_model(&ModelTranslator::greedy(&self.inner), &test).map_err(err)?;
        Ok((r.macro_wer, r.micro_wer))
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(mode={}, dialects={:?}, vocab_size={}, parameters={})",
            self.inner.mode,
            self.dialects(),
            self.vocab_size(),
            self.parameter_count()
        )
    }
}

#[pymodule]
fn murre_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MurreError", m.py().get_type::<MurreError>())?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(chunk, m)?)?;
    m.add_function(wrap_pyfunction!(clean_text, m)?)?;
    m.add_function(wrap_pyfunction!(apply_rules, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(split_sizes, m)?)?;
    m.add_function(wrap_pyfunction!(align_words, m)?)?;
    m.add_function(wrap_pyfunction!(wer, m)?)?;
    m.add_function(wrap_pyfunction!(distance_from_standard, m)?)?;
    Ok(())
}
