//! Word error rate: alignment, per-sentence and pooled scores, model x dialect matrices.

use std::fmt::Write as _;
use std::ops::{Add, AddAssign};

use rayon::prelude::*;

use crate::adapt::{adapt_sentences, ChunkTranslator};
use crate::corpus::ParallelExample;
use crate::error::{Error, Result};

/// Edit operation counts of one alignment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct WerCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub correct: usize,
}

impl WerCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// `S + D + C`, the number of reference words.
    pub fn reference_len(&self) -> usize {
        self.substitutions + self.deletions + self.correct
    }

    /// `S + I + C`, the number of hypothesis words.
    pub fn hypothesis_len(&self) -> usize {
        self.substitutions + self.insertions + self.correct
    }

    /// `(S + D + I) / (S + D + C)`; `None` for an empty reference.
    pub fn wer(&self) -> Option<f64> {
        let n = self.reference_len();
        (n > 0).then(|| self.errors() as f64 / n as f64)
    }
}

impl Add for WerCounts {
    type Output = WerCounts;

    fn add(self, o: WerCounts) -> WerCounts {
        WerCounts {
            substitutions: self.substitutions + o.substitutions,
            deletions: self.deletions + o.deletions,
            insertions: self.insertions + o.insertions,
            correct: self.correct + o.correct,
        }
    }
}

impl AddAssign for WerCounts {
    fn add_assign(&mut self, o: WerCounts) {
        *self = *self + o;
    }
}

/// See [`WerCounts::wer`].
pub fn wer(counts: &WerCounts) -> Option<f64> {
    counts.wer()
}

/// Minimum-cost word alignment with unit costs.
///
/// Among co-optimal alignments the backtrace prefers, at every cell, a match,
/// then a substitution, then a deletion, then an insertion.
pub fn align_words<R: AsRef<str>, H: AsRef<str>>(reference: &[R], hypothesis: &[H]) -> WerCounts {
    let (n, m) = (reference.len(), hypothesis.len());
    let w = m + 1;
    let mut cost = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        cost[i * w] = i;
    }
    for j in 0..=m {
        cost[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let same = reference[i - 1].as_ref() == hypothesis[j - 1].as_ref();
            let diag = cost[(i - 1) * w + j - 1] + usize::from(!same);
            let del = cost[(i - 1) * w + j] + 1;
            let ins = cost[i * w + j - 1] + 1;
            cost[i * w + j] = diag.min(del).min(ins);
        }
    }

    let mut counts = WerCounts::default();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = cost[i * w + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1].as_ref() == hypothesis[j - 1].as_ref();
            if cost[(i - 1) * w + j - 1] + usize::from(!same) == here {
                if same {
                    counts.correct += 1;
                } else {
                    counts.substitutions += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && cost[(i - 1) * w + j] + 1 == here {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    counts
}

/// Scores of a set of sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct WerReport {
    /// Per sentence; `None` where the reference was empty.
    pub per_sentence: Vec<Option<f64>>,
    pub counts: Vec<WerCounts>,
    /// Mean of the defined per-sentence values.
    pub macro_wer: Option<f64>,
    /// WER of the summed counts.
    pub micro_wer: Option<f64>,
    pub totals: WerCounts,
    /// Sentences left out of the macro average for having an empty reference.
    pub excluded: usize,
}

impl WerReport {
    pub fn from_counts(counts: Vec<WerCounts>) -> Self {
        let per_sentence: Vec<Option<f64>> = counts.iter().map(WerCounts::wer).collect();
        let defined: Vec<f64> = per_sentence.iter().flatten().copied().collect();
        let totals = counts.iter().fold(WerCounts::default(), |a, &b| a + b);
        Self {
            macro_wer: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
            micro_wer: totals.wer(),
            excluded: per_sentence.len() - defined.len(),
            per_sentence,
            counts,
            totals,
        }
    }

    /// Aligns `hypotheses[i]` against `references[i]`.
    pub fn score<S: AsRef<str>, T: AsRef<str>>(references: &[Vec<S>], hypotheses: &[Vec<T>]) -> Result<Self> {
        if references.len() != hypotheses.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} references but {} hypotheses",
                references.len(),
                hypotheses.len()
            )));
        }
        Ok(Self::from_counts(
            references
                .iter()
                .zip(hypotheses)
                .map(|(r, h)| align_words(r, h))
                .collect(),
        ))
    }

    pub fn sentences(&self) -> usize {
        self.per_sentence.len()
    }
}

/// Adapts every example's source with `translator` (using the example's own
/// dialect id) and scores it against the gold dialect words.
pub fn evaluate_model<T: ChunkTranslator + ?Sized>(translator: &T, examples: &[ParallelExample]) -> Result<WerReport> {
    Ok(evaluate_with_outputs(translator, examples)?.0)
}

/// Like [`evaluate_model`], also returning the adapted sentences in input order.
pub fn evaluate_with_outputs<T: ChunkTranslator + ?Sized>(
    translator: &T,
    examples: &[ParallelExample],
) -> Result<(WerReport, Vec<Vec<String>>)> {
    let mut outputs: Vec<Vec<String>> = vec![Vec::new(); examples.len()];
    let mut dialects: Vec<&str> = examples.iter().map(|e| e.dialect_id.as_str()).collect();
    dialects.sort_unstable();
    dialects.dedup();
    for d in dialects {
        let idx: Vec<usize> = (0..examples.len()).filter(|&i| examples[i].dialect_id == d).collect();
        let sources: Vec<Vec<String>> = idx.iter().map(|&i| examples[i].source_words.clone()).collect();
        let (adapted, _) = adapt_sentences(translator, &sources, Some(d))?;
        for (i, a) in idx.into_iter().zip(adapted) {
            outputs[i] = a;
        }
    }
    let refs: Vec<&Vec<String>> = examples.iter().map(|e| &e.target_words).collect();
    let counts = refs.iter().zip(&outputs).map(|(r, h)| align_words(r, h)).collect();
    Ok((WerReport::from_counts(counts), outputs))
}

/// How far adapted text moved from the standard text it came from; the
/// standard sentence is the reference.
pub fn distance_from_standard<S: AsRef<str>, T: AsRef<str>>(
    adapted: &[Vec<S>],
    standard: &[Vec<T>],
) -> Result<WerReport> {
    WerReport::score(standard, adapted)
}

/// One dialect's test sentences, with a label identifying the split they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub dialect_id: String,
    pub split: String,
    pub examples: Vec<ParallelExample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixCell {
    pub split: String,
    pub report: WerReport,
}

impl MatrixCell {
    /// The headline number: macro WER, or NaN for a test set without references.
    pub fn wer(&self) -> f64 {
        self.report.macro_wer.unwrap_or(f64::NAN)
    }
}

/// Rows are models, columns are dialects.
#[derive(Debug, Clone, PartialEq)]
pub struct WerMatrix {
    pub models: Vec<String>,
    pub dialects: Vec<String>,
    pub cells: Vec<Vec<MatrixCell>>,
}

fn minima(values: impl Iterator<Item = f64> + Clone) -> Vec<usize> {
    let best = values.clone().filter(|v| !v.is_nan()).fold(f64::INFINITY, f64::min);
    values
        .enumerate()
        .filter(|&(_, v)| v == best)
        .map(|(i, _)| i)
        .collect()
}

impl WerMatrix {
    pub fn cell(&self, model: usize, dialect: usize) -> &MatrixCell {
        &self.cells[model][dialect]
    }

    pub fn model_index(&self, name: &str) -> Option<usize> {
        self.models.iter().position(|m| m == name)
    }

    pub fn dialect_index(&self, id: &str) -> Option<usize> {
        self.dialects.iter().position(|d| d == id)
    }

    /// Rows attaining the lowest WER of column `dialect` (several on ties).
    pub fn column_minima(&self, dialect: usize) -> Vec<usize> {
        minima(self.cells.iter().map(|row| row[dialect].wer()))
    }

    /// Columns attaining the lowest WER of row `model`.
    pub fn row_minima(&self, model: usize) -> Vec<usize> {
        minima(self.cells[model].iter().map(MatrixCell::wer))
    }

    /// One line per cell. `column_min`/`row_min` mark the minima of the cell's column and row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "model,dialect,macro_wer,macro_wer_percent,micro_wer,sentences,excluded,split,column_min,row_min\n",
        );
        for (m, row) in self.cells.iter().enumerate() {
            let row_min = self.row_minima(m);
            for (d, cell) in row.iter().enumerate() {
                let r = &cell.report;
                let _ = writeln!(
                    out,
                    "{},{},{},{:.2},{},{},{},{},{},{}",
                    self.models[m],
                    self.dialects[d],
                    fmt_opt(r.macro_wer),
                    cell.wer() * 100.0,
                    fmt_opt(r.micro_wer),
                    r.sentences(),
                    r.excluded,
                    cell.split,
                    self.column_minima(d).contains(&m),
                    row_min.contains(&d),
                );
            }
        }
        out
    }

    /// Aligned table of macro WER as percentages with the fraction alongside.
    /// `*` marks a column minimum, `+` a row minimum.
    pub fn to_table(&self) -> String {
        let mut cols: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["model".to_owned()];
        header.extend(self.dialects.iter().cloned());
        for (m, row) in self.cells.iter().enumerate() {
            let row_min = self.row_minima(m);
            let mut line = vec![self.models[m].clone()];
            for (d, cell) in row.iter().enumerate() {
                let mark = format!(
                    "{}{}",
                    if self.column_minima(d).contains(&m) { "*" } else { "" },
                    if row_min.contains(&d) { "+" } else { "" }
                );
                line.push(format!("{:.2} ({:.4}){mark}", cell.wer() * 100.0, cell.wer()));
            }
            cols.push(line);
        }
        let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
        for line in &cols {
            for (w, c) in widths.iter_mut().zip(line) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::from("WER % (fraction); * column minimum, + row minimum\n");
        for line in std::iter::once(&header).chain(&cols) {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c:<w$}"))
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Evaluates every model on every test set. Cells are computed in parallel;
/// the result does not depend on scheduling.
pub fn wer_matrix(models: &[(&str, &dyn ChunkTranslator)], test_sets: &[TestSet]) -> Result<WerMatrix> {
    if models.is_empty() || test_sets.is_empty() {
        return Err(Error::InvalidArgument("a WER matrix needs at least one model and one dialect".into()));
    }
    for t in test_sets {
        if let Some(e) = t.examples.iter().find(|e| e.dialect_id != t.dialect_id) {
            return Err(Error::InvalidArgument(format!(
                "test set for {:?} contains a {:?} example",
                t.dialect_id, e.dialect_id
            )));
        }
    }
    let jobs: Vec<(usize, usize)> = (0..models.len())
        .flat_map(|m| (0..test_sets.len()).map(move |d| (m, d)))
        .collect();
    let reports: Vec<WerReport> = jobs
        .par_iter()
        .map(|&(m, d)| evaluate_model(models[m].1, &test_sets[d].examples))
        .collect::<Result<_>>()?;
    let mut reports = reports.into_iter();
    let cells = (0..models.len())
        .map(|_| {
            test_sets
                .iter()
                .map(|t| MatrixCell {
                    split: t.split.clone(),
                    report: reports.next().expect("one report per cell"),
                })
                .collect()
        })
        .collect();
    Ok(WerMatrix {
        models: models.iter().map(|(n, _)| (*n).to_owned()).collect(),
        dialects: test_sets.iter().map(|t| t.dialect_id.clone()).collect(),
        cells,
    })
}

/// Distances of the original dialect transcriptions from standard Finnish
/// reported for three real dialect groups, in percent. Kept for reference only.
pub const REFERENCE_DISTANCES: [(&str, f64); 3] = [("EK", 34.38), ("IS", 43.41), ("PVS", 54.69)];
