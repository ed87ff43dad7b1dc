//! Word-aligned parallel corpora: loading, annotation cleanup and the
//! per-dialect train/valid/test split.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::textcodec::validate_word;

/// One sentence pair. `source_words[i]` is the standard form of `target_words[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParallelExample {
    pub dialect_id: String,
    pub source_words: Vec<String>,
    pub target_words: Vec<String>,
}

impl ParallelExample {
    pub fn new(
        dialect_id: impl Into<String>,
        source_words: Vec<String>,
        target_words: Vec<String>,
    ) -> Result<Self> {
        let dialect_id = dialect_id.into();
        if dialect_id.is_empty() || dialect_id.chars().any(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!(
                "dialect id {dialect_id:?} must be non-empty and contain no whitespace"
            )));
        }
        if source_words.len() != target_words.len() {
            return Err(Error::AlignmentMismatch {
                line: 0,
                source_words: source_words.len(),
                target_words: target_words.len(),
            });
        }
        for w in source_words.iter().chain(&target_words) {
            validate_word(w)?;
        }
        Ok(Self {
            dialect_id,
            source_words,
            target_words,
        })
    }

    /// Builds an example from whitespace-separated sentences.
    pub fn from_sentences(dialect_id: &str, source: &str, target: &str) -> Result<Self> {
        Self::new(dialect_id, split_words(source), split_words(target))
    }

    pub fn len(&self) -> usize {
        self.source_words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_words.is_empty()
    }
}

pub fn split_words(sentence: &str) -> Vec<String> {
    sentence.split_whitespace().map(str::to_owned).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// `dialect<TAB>source sentence<TAB>target sentence`, one record per line.
    Tsv,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(CorpusFormat::Tsv),
            other => Err(Error::InvalidArgument(format!("unknown corpus format {other:?}"))),
        }
    }
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Vec<ParallelExample>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        CorpusFormat::Tsv => parse_tsv(&text),
    }
}

/// Parses TSV corpus text. Blank lines are skipped; line numbers in errors are 1-based.
pub fn parse_tsv(text: &str) -> Result<Vec<ParallelExample>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::MalformedRecord {
                line,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let dialect = fields[0].trim();
        if dialect.is_empty() {
            return Err(Error::MalformedRecord {
                line,
                message: "empty dialect field".into(),
            });
        }
        let source = split_words(fields[1]);
        let target = split_words(fields[2]);
        if source.is_empty() {
            return Err(Error::MalformedRecord {
                line,
                message: "empty source sentence".into(),
            });
        }
        if source.len() != target.len() {
            return Err(Error::AlignmentMismatch {
                line,
                source_words: source.len(),
                target_words: target.len(),
            });
        }
        let example = ParallelExample::new(dialect, source, target).map_err(|e| {
            Error::MalformedRecord {
                line,
                message: e.to_string(),
            }
        })?;
        out.push(example);
    }
    Ok(out)
}

pub fn format_tsv_line(example: &ParallelExample) -> String {
    format!(
        "{}\t{}\t{}",
        example.dialect_id,
        example.source_words.join(" "),
        example.target_words.join(" ")
    )
}

pub fn write_tsv(path: impl AsRef<Path>, examples: &[ParallelExample]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for ex in examples {
        writeln!(buf, "{}", format_tsv_line(ex)).expect("writing to a Vec cannot fail");
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Declared dialects, each with an optional long name used as its flag symbol.
///
/// File format: one dialect per line, `ID` or `ID<TAB>Long name`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DialectManifest {
    entries: Vec<(String, String)>,
}

impl DialectManifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_ids<S: AsRef<str>>(ids: &[S]) -> Result<Self> {
        let mut m = Self::new();
        for id in ids {
            m.insert(id.as_ref(), None)?;
        }
        Ok(m)
    }

    pub fn insert(&mut self, id: &str, label: Option<&str>) -> Result<()> {
        let id = id.trim();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("bad dialect id {id:?}")));
        }
        if self.contains(id) {
            return Err(Error::InvalidArgument(format!("duplicate dialect id {id:?}")));
        }
        let label = match label.map(str::trim).filter(|l| !l.is_empty()) {
            Some(l) => l.to_owned(),
            None if id.chars().count() < 2 => format!("<{id}>"),
            None => id.to_owned(),
        };
        let label = label.as_str();
        if label.chars().any(char::is_whitespace) || label.chars().count() < 2 {
            // flag symbols must stay distinguishable from single characters when printed
            return Err(Error::InvalidArgument(format!(
                "flag label {label:?} must be at least two characters without whitespace"
            )));
        }
        if self.entries.iter().any(|(_, l)| l == label) {
            return Err(Error::InvalidArgument(format!("duplicate flag label {label:?}")));
        }
        self.entries.push((id.to_owned(), label.to_owned()));
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Self::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with(';') {
                continue;
            }
            let mut parts = line.splitn(2, '\t');
            let id = parts.next().unwrap_or_default();
            let label = parts.next();
            m.insert(id, label).map_err(|e| Error::MalformedRecord {
                line: idx + 1,
                message: e.to_string(),
            })?;
        }
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (id, label) in &self.entries {
            if DialectManifest::from_ids(&[id]).ok().and_then(|m| m.label(id).map(|l| l == label)) == Some(true) {
                s.push_str(id);
            } else {
                s.push_str(&format!("{id}\t{label}"));
            }
            s.push('\n');
        }
        s
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.iter().any(|(i, _)| i == id)
    }

    /// Flag symbol for a dialect.
    pub fn label(&self, id: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(i, _)| i == id)
            .map(|(_, l)| l.as_str())
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(i, _)| i.as_str())
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(_, l)| l.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Manifest listing each dialect of `examples` once, in order of first appearance.
    pub fn from_examples(examples: &[ParallelExample]) -> Self {
        let mut m = Self::new();
        for ex in examples {
            if !m.contains(&ex.dialect_id) {
                m.insert(&ex.dialect_id, None)
                    .expect("example dialect ids are valid and deduplicated");
            }
        }
        m
    }
}

/// Rejects examples whose dialect is not declared in `manifest`.
pub fn check_dialects(examples: &[ParallelExample], manifest: &DialectManifest) -> Result<()> {
    match examples.iter().find(|ex| !manifest.contains(&ex.dialect_id)) {
        Some(ex) => Err(Error::UnknownDialect(ex.dialect_id.clone())),
        None => Ok(()),
    }
}

/// Removal and replacement of annotation characters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CleaningMap {
    delete_chars: BTreeSet<char>,
    replace_chars: BTreeMap<char, char>,
}

impl CleaningMap {
    pub fn new(delete_chars: BTreeSet<char>, replace_chars: BTreeMap<char, char>) -> Result<Self> {
        for &c in delete_chars.iter().chain(replace_chars.keys()) {
            if c.is_whitespace() || c == '_' {
                return Err(Error::InvalidCleaningMap(format!(
                    "{c:?} cannot be cleaned: it is structural"
                )));
            }
        }
        for (&from, &to) in &replace_chars {
            if from == to {
                return Err(Error::InvalidCleaningMap(format!("{from:?} maps to itself")));
            }
            if delete_chars.contains(&from) {
                return Err(Error::InvalidCleaningMap(format!(
                    "{from:?} is both deleted and replaced"
                )));
            }
            if delete_chars.contains(&to) || replace_chars.contains_key(&to) {
                // a second application would rewrite the replacement again
                return Err(Error::InvalidCleaningMap(format!(
                    "replacement {to:?} for {from:?} is itself cleaned"
                )));
            }
            if to.is_whitespace() || to == '_' {
                return Err(Error::InvalidCleaningMap(format!(
                    "replacement {to:?} for {from:?} is structural"
                )));
            }
        }
        Ok(Self {
            delete_chars,
            replace_chars,
        })
    }

    /// Parses the two-column format: `CHAR<TAB>REPLACEMENT`, where CHAR is a literal
    /// character or a code point (`U+0301`, `0x301`) and an empty replacement deletes.
    pub fn parse(text: &str) -> Result<Self> {
        let mut delete = BTreeSet::new();
        let mut replace = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.starts_with(';') {
                continue;
            }
            let mut cols = line.splitn(2, '\t');
            let key = parse_char_spec(cols.next().unwrap_or_default().trim())
                .map_err(|m| Error::InvalidCleaningMap(format!("line {line_no}: {m}")))?;
            let value = cols.next().map(str::trim).unwrap_or("");
            if value.is_empty() {
                if !delete.insert(key) || replace.contains_key(&key) {
                    return Err(Error::InvalidCleaningMap(format!(
                        "line {line_no}: duplicate entry for {key:?}"
                    )));
                }
            } else {
                let to = parse_char_spec(value)
                    .map_err(|m| Error::InvalidCleaningMap(format!("line {line_no}: {m}")))?;
                if delete.contains(&key) || replace.insert(key, to).is_some() {
                    return Err(Error::InvalidCleaningMap(format!(
                        "line {line_no}: duplicate entry for {key:?}"
                    )));
                }
            }
        }
        Self::new(delete, replace)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn delete_chars(&self) -> &BTreeSet<char> {
        &self.delete_chars
    }

    pub fn replace_chars(&self) -> &BTreeMap<char, char> {
        &self.replace_chars
    }

    pub fn is_empty(&self) -> bool {
        self.delete_chars.is_empty() && self.replace_chars.is_empty()
    }
}

fn parse_char_spec(spec: &str) -> std::result::Result<char, String> {
    let mut chars = spec.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => return Ok(c),
        (None, _) => return Err("missing character".into()),
        _ => {}
    }
    let hex = spec
        .strip_prefix("U+")
        .or_else(|| spec.strip_prefix("u+"))
        .or_else(|| spec.strip_prefix("0x"))
        .ok_or_else(|| format!("{spec:?} is neither a single character nor a code point"))?;
    let cp = u32::from_str_radix(hex, 16).map_err(|e| format!("bad code point {spec:?}: {e}"))?;
    char::from_u32(cp).ok_or_else(|| format!("{spec:?} is not a valid scalar value"))
}

pub fn clean_text(text: &str, map: &CleaningMap) -> String {
    text.chars()
        .filter(|c| !map.delete_chars.contains(c))
        .map(|c| map.replace_chars.get(&c).copied().unwrap_or(c))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const STANDARD: SplitRatios = SplitRatios {
        train: 0.70,
        valid: 0.15,
        test: 0.15,
    };

    pub fn new(train: f64, valid: f64, test: f64) -> Result<Self> {
        let r = Self { train, valid, test };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.valid, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidSplit(format!("ratios must be non-negative: {self}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplit(format!("ratios sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Train/valid/test sizes for `n` examples: floor for train and valid, remainder to test.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // the epsilon absorbs products like 0.7 * 10 landing just below an integer
        let floor = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
        let train = floor(self.train).min(n);
        let valid = floor(self.valid).min(n - train);
        (train, valid, n - train - valid)
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self::STANDARD
    }
}

impl fmt::Display for SplitRatios {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.train, self.valid, self.test)
    }
}

impl FromStr for SplitRatios {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split([',', '/'])
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidSplit(format!("{s:?}: {e}")))?;
        match parts.as_slice() {
            [a, b, c] => Self::new(*a, *b, *c),
            _ => Err(Error::InvalidSplit(format!("{s:?}: expected three ratios"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<ParallelExample>,
    pub valid: Vec<ParallelExample>,
    pub test: Vec<ParallelExample>,
    pub seed: u64,
    pub ratios: SplitRatios,
}

impl CorpusSplit {
    pub fn dialects(&self) -> BTreeSet<&str> {
        self.train
            .iter()
            .chain(&self.valid)
            .chain(&self.test)
            .map(|e| e.dialect_id.as_str())
            .collect()
    }
}

/// Shuffles each dialect independently, then cuts it by `ratios`.
///
/// Dialects are visited in sorted order with one seeded generator, so the result
/// depends only on the input multiset order per dialect and the seed.
pub fn stratified_split(
    examples: &[ParallelExample],
    ratios: SplitRatios,
    seed: u64,
) -> Result<CorpusSplit> {
    ratios.validate()?;
    let mut by_dialect: BTreeMap<&str, Vec<&ParallelExample>> = BTreeMap::new();
    for ex in examples {
        by_dialect.entry(&ex.dialect_id).or_default().push(ex);
    }
    if let Some((d, group)) = by_dialect.iter().find(|(_, g)| g.len() < 3) {
        return Err(Error::InvalidSplit(format!(
            "dialect {d:?} has {} examples; at least 3 are required",
            group.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = CorpusSplit {
        train: Vec::new(),
        valid: Vec::new(),
        test: Vec::new(),
        seed,
        ratios,
    };
    for group in by_dialect.values_mut() {
        group.shuffle(&mut rng);
        let (n_train, n_valid, _) = ratios.sizes(group.len());
        for (i, ex) in group.iter().enumerate() {
            let part = if i < n_train {
                &mut split.train
            } else if i < n_train + n_valid {
                &mut split.valid
            } else {
                &mut split.test
            };
            part.push((*ex).clone());
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(d: &str, s: &str, t: &str) -> ParallelExample {
        ParallelExample::from_sentences(d, s, t).unwrap()
    }

    #[test]
    fn tsv_line_parses_into_aligned_example() {
        let got = parse_tsv("IS\tminä kun näin\tmie ko näin\n").unwrap();
        assert_eq!(got, vec![ex("IS", "minä kun näin", "mie ko näin")]);
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        assert!(parse_tsv("").unwrap().is_empty());
    }

    #[test]
    fn alignment_mismatch_reports_line() {
        let text = "IS\ta b\ta b\nIS\tyksi kaksi kolme\tyks kaks\n";
        match parse_tsv(text) {
            Err(Error::AlignmentMismatch {
                line,
                source_words,
                target_words,
            }) => assert_eq!((line, source_words, target_words), (2, 3, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_and_reserved_records_rejected() {
        assert!(matches!(
            parse_tsv("IS\tonly two"),
            Err(Error::MalformedRecord { line: 1, .. })
        ));
        assert!(matches!(
            parse_tsv("IS\ta_b\tab"),
            Err(Error::MalformedRecord { line: 1, .. })
        ));
    }

    #[test]
    fn load_corpus_missing_file() {
        let err = load_corpus("/nonexistent/corpus.tsv", CorpusFormat::Tsv).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn manifest_labels_and_membership() {
        let m = DialectManifest::parse("IS\tInkerinsuomalaismurteet\nEK\n").unwrap();
        assert_eq!(m.label("IS"), Some("Inkerinsuomalaismurteet"));
        assert_eq!(m.label("EK"), Some("EK"));
        assert_eq!(DialectManifest::from_ids(&["K"]).unwrap().label("K"), Some("<K>"));
        assert!(check_dialects(&[ex("IS", "a", "a")], &m).is_ok());
        assert!(matches!(
            check_dialects(&[ex("PVS", "a", "a")], &m),
            Err(Error::UnknownDialect(_))
        ));
        assert_eq!(DialectManifest::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn clean_text_map_example() {
        let map = CleaningMap::parse("´\t\ná\ta\n").unwrap();
        assert_eq!(clean_text("tá´lo", &map), "talo");
        assert_eq!(clean_text("kissa", &map), "kissa");
    }

    #[test]
    fn clean_text_matches_naive_scan_with_combining_marks() {
        let map = CleaningMap::parse("U+0301\t\nU+00E1\ta\n0x1D49\te\nˈ\t\n").unwrap();
        let input = "ta\u{301}lo\u{e1}ˈmme\u{1d49}";
        // naive rewrite: walk characters one by one against the raw tables
        let mut expected = String::new();
        for c in input.chars() {
            if map.delete_chars().iter().any(|d| *d == c) {
                continue;
            }
            let mut out = c;
            for (k, v) in map.replace_chars() {
                if *k == c {
                    out = *v;
                }
            }
            expected.push(out);
        }
        assert_eq!(clean_text(input, &map), expected);
        assert_eq!(expected, "taloammee");
    }

    #[test]
    fn invalid_cleaning_maps() {
        assert!(CleaningMap::parse("a\ta").is_err());
        assert!(CleaningMap::parse("a\tb\nb\tc").is_err());
        assert!(CleaningMap::parse("a\t\na\tb").is_err());
        assert!(CleaningMap::parse("_\t").is_err());
        assert!(CleaningMap::parse("ab\tc").is_err());
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let r = SplitRatios::STANDARD;
        assert_eq!(r.sizes(100), (70, 15, 15));
        assert_eq!(r.sizes(813), (569, 121, 123));
        assert_eq!(r.sizes(3), (2, 0, 1));
        assert_eq!(r.sizes(10), (7, 1, 2));
    }

    #[test]
    fn split_needs_three_per_dialect() {
        let data = vec![ex("A", "a", "a"), ex("A", "b", "b")];
        assert!(matches!(
            stratified_split(&data, SplitRatios::STANDARD, 1),
            Err(Error::InvalidSplit(_))
        ));
        assert!("0.5,0.5,0.5".parse::<SplitRatios>().is_err());
        assert_eq!(
            "0.7/0.15/0.15".parse::<SplitRatios>().unwrap(),
            SplitRatios::STANDARD
        );
    }

    #[test]
    fn split_is_seed_deterministic_and_seed_sensitive() {
        let data: Vec<_> = (0..100)
            .map(|i| ex("A", &format!("w{i}"), &format!("v{i}")))
            .collect();
        let a = stratified_split(&data, SplitRatios::STANDARD, 7).unwrap();
        let b = stratified_split(&data, SplitRatios::STANDARD, 7).unwrap();
        let c = stratified_split(&data, SplitRatios::STANDARD, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.train, c.train);
        assert_eq!((a.train.len(), a.valid.len(), a.test.len()), (70, 15, 15));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn example_strategy() -> impl Strategy<Value = ParallelExample> {
            (0..4usize, "[a-e]{1,4}").prop_map(|(d, w)| {
                ParallelExample::new(format!("D{d}"), vec![w.clone()], vec![w]).unwrap()
            })
        }

        proptest! {
            #[test]
            fn clean_text_is_idempotent(s in "[a-dáéˈ\u{301} ]{0,20}") {
                let map = CleaningMap::parse("ˈ\t\nU+0301\t\ná\ta\né\te\n").unwrap();
                let once = clean_text(&s, &map);
                prop_assert_eq!(clean_text(&once, &map), once.clone());
                let annotated = "ˈ\u{301}áé";
                prop_assert!(!once.chars().any(|c| annotated.contains(c)));
            }

            #[test]
            fn split_partitions_input(
                data in proptest::collection::vec(example_strategy(), 0..60),
                seed in any::<u64>(),
            ) {
                let mut counts: BTreeMap<String, usize> = BTreeMap::new();
                for e in &data { *counts.entry(e.dialect_id.clone()).or_default() += 1; }
                match stratified_split(&data, SplitRatios::STANDARD, seed) {
                    Err(_) => prop_assert!(counts.values().any(|&n| n < 3)),
                    Ok(split) => {
                        let mut all: Vec<_> = split.train.iter()
                            .chain(&split.valid).chain(&split.test).cloned().collect();
                        let mut input = data.clone();
                        all.sort();
                        input.sort();
                        prop_assert_eq!(all, input);
                        for (d, &n) in &counts {
                            let (tr, va, te) = SplitRatios::STANDARD.sizes(n);
                            let count = |p: &[ParallelExample]| p.iter().filter(|e| &e.dialect_id == d).count();
                            prop_assert_eq!(count(&split.train), tr);
                            prop_assert_eq!(count(&split.valid), va);
                            prop_assert_eq!(count(&split.test), te);
                            prop_assert_eq!(tr, (0.7 * n as f64 + 1e-9).floor() as usize);
                        }
                    }
                }
            }
        }
    }
}
