//! Context-sensitive character rewrite rules that define synthetic dialects.
//!
//! Rule syntax, one rule per line:
//!
//! ```text
//! target / left _ right -> replacement
//! ```
//!
//! `→` may be used for `->`, the environment part (`/ left _ right`) is optional,
//! and an empty replacement (or `∅`) deletes the target. Contexts are sequences of
//! literal characters, `#` (word edge, only at the outer end of a context), `V`
//! (vowel), `C` (consonant) and bracketed sets such as `[aeo]`. Lines starting
//! with `;` are comments; `dialect: ID` sets the dialect id of a rule file.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::ParallelExample;
use crate::error::{Error, Result};
use crate::textcodec::validate_word;

const VOWELS: &str = "aeiouyäöå";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContextItem {
    Edge,
    Literal(char),
    Vowel,
    Consonant,
    Set(Vec<char>),
}

impl ContextItem {
    fn matches(&self, c: char) -> bool {
        match self {
            ContextItem::Edge => false,
            ContextItem::Literal(l) => *l == c,
            ContextItem::Vowel => is_vowel(c),
            ContextItem::Consonant => c.is_alphabetic() && !is_vowel(c),
            ContextItem::Set(set) => set.contains(&c),
        }
    }
}

fn is_vowel(c: char) -> bool {
    VOWELS.contains(c.to_lowercase().next().unwrap_or(c))
}

impl fmt::Display for ContextItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContextItem::Edge => f.write_str("#"),
            ContextItem::Literal(c) => write!(f, "{c}"),
            ContextItem::Vowel => f.write_str("V"),
            ContextItem::Consonant => f.write_str("C"),
            ContextItem::Set(set) => write!(f, "[{}]", set.iter().collect::<String>()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteRule {
    target: Vec<char>,
    replacement: String,
    left: Vec<ContextItem>,
    right: Vec<ContextItem>,
}

impl RewriteRule {
    pub fn new(
        target: &str,
        replacement: &str,
        left: Vec<ContextItem>,
        right: Vec<ContextItem>,
    ) -> Result<Self> {
        let bad = |message: String| Error::RuleSyntax { line: 0, message };
        if target.is_empty() {
            return Err(bad("empty target".into()));
        }
        for s in [target, replacement] {
            if s.chars().any(|c| c.is_whitespace() || c == '_' || c == '#') {
                return Err(bad(format!("{s:?} contains a reserved character")));
            }
        }
        if left.iter().skip(1).any(|i| *i == ContextItem::Edge) {
            return Err(bad("'#' may only open the left context".into()));
        }
        if right.iter().rev().skip(1).any(|i| *i == ContextItem::Edge) {
            return Err(bad("'#' may only close the right context".into()));
        }
        Ok(Self {
            target: target.chars().collect(),
            replacement: replacement.to_owned(),
            left,
            right,
        })
    }

    /// Unconditional rule.
    pub fn simple(target: &str, replacement: &str) -> Result<Self> {
        Self::new(target, replacement, Vec::new(), Vec::new())
    }

    pub fn parse(line: &str) -> Result<Self> {
        let bad = |message: String| Error::RuleSyntax { line: 0, message };
        let (lhs, replacement) = line
            .split_once("->")
            .or_else(|| line.split_once('→'))
            .ok_or_else(|| bad(format!("missing '->' in {line:?}")))?;
        let replacement = match replacement.trim() {
            "∅" => "",
            r => r,
        };
        let (target, env) = match lhs.split_once('/') {
            Some((t, e)) => (t.trim(), Some(e)),
            None => (lhs.trim(), None),
        };
        let (left, right) = match env {
            None => (Vec::new(), Vec::new()),
            Some(env) => {
                let (l, r) = env
                    .split_once('_')
                    .ok_or_else(|| bad(format!("environment {env:?} lacks '_'")))?;
                if r.contains('_') {
                    return Err(bad(format!("environment {env:?} has more than one '_'")));
                }
                (parse_context(l)?, parse_context(r)?)
            }
        };
        Self::new(target, replacement, left, right)
    }

    fn left_matches(&self, word: &[char], at: usize) -> bool {
        let mut pos = at;
        for item in self.left.iter().rev() {
            if *item == ContextItem::Edge {
                if pos != 0 {
                    return false;
                }
            } else if pos == 0 || !item.matches(word[pos - 1]) {
                return false;
            } else {
                pos -= 1;
            }
        }
        true
    }

    fn right_matches(&self, word: &[char], from: usize) -> bool {
        let mut pos = from;
        for item in &self.right {
            if *item == ContextItem::Edge {
                if pos != word.len() {
                    return false;
                }
            } else if pos >= word.len() || !item.matches(word[pos]) {
                return false;
            } else {
                pos += 1;
            }
        }
        true
    }

    /// One left-to-right pass. Contexts are read from the input form, and rewritten
    /// material is never rescanned.
    pub fn apply(&self, word: &str) -> String {
        let chars: Vec<char> = word.chars().collect();
        let n = self.target.len();
        let mut out = String::with_capacity(word.len());
        let mut i = 0;
        while i < chars.len() {
            if i + n <= chars.len()
                && chars[i..i + n] == self.target[..]
                && self.left_matches(&chars, i)
                && self.right_matches(&chars, i + n)
            {
                out.push_str(&self.replacement);
                i += n;
            } else {
                out.push(chars[i]);
                i += 1;
            }
        }
        out
    }
}

fn parse_context(text: &str) -> Result<Vec<ContextItem>> {
    let mut items = Vec::new();
    let mut chars = text.chars().filter(|c| !c.is_whitespace());
    while let Some(c) = chars.next() {
        let item = match c {
            '#' => ContextItem::Edge,
            'V' => ContextItem::Vowel,
            'C' => ContextItem::Consonant,
            '[' => {
                let mut set = Vec::new();
                loop {
                    match chars.next() {
                        Some(']') => break,
                        Some(x) => set.push(x),
                        None => {
                            return Err(Error::RuleSyntax {
                                line: 0,
                                message: format!("unclosed '[' in {text:?}"),
                            })
                        }
                    }
                }
                ContextItem::Set(set)
            }
            other => ContextItem::Literal(other),
        };
        items.push(item);
    }
    Ok(items)
}

impl fmt::Display for RewriteRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let target: String = self.target.iter().collect();
        write!(f, "{target}")?;
        if !self.left.is_empty() || !self.right.is_empty() {
            f.write_str(" / ")?;
            for i in &self.left {
                write!(f, "{i}")?;
            }
            f.write_str(" _ ")?;
            for i in &self.right {
                write!(f, "{i}")?;
            }
        }
        write!(f, " -> {}", self.replacement)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteRuleSet {
    pub dialect_id: String,
    pub rules: Vec<RewriteRule>,
}

impl RewriteRuleSet {
    pub fn new(dialect_id: impl Into<String>, rules: Vec<RewriteRule>) -> Self {
        Self {
            dialect_id: dialect_id.into(),
            rules,
        }
    }

    /// Parses a rule file. A `dialect:` header overrides `default_id`.
    pub fn parse(text: &str, default_id: &str) -> Result<Self> {
        let mut id = default_id.to_owned();
        let mut rules = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("dialect:") {
                id = rest.trim().to_owned();
                continue;
            }
            let rule = RewriteRule::parse(line).map_err(|e| match e {
                Error::RuleSyntax { message, .. } => Error::RuleSyntax {
                    line: idx + 1,
                    message,
                },
                other => other,
            })?;
            rules.push(rule);
        }
        if id.is_empty() {
            return Err(Error::RuleSyntax {
                line: 0,
                message: "rule set has no dialect id".into(),
            });
        }
        Ok(Self::new(id, rules))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        Self::parse(&text, stem)
    }

    /// Loads every `*.rules` file of a directory, sorted by file name.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Vec<Self>> {
        let dir = dir.as_ref();
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "rules"))
            .collect();
        paths.sort();
        paths.iter().map(Self::load).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("dialect: {}\n", self.dialect_id);
        for r in &self.rules {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s
    }
}

/// Applies the rules in order, each as a single pass over the current form.
pub fn apply_rules(word: &str, rules: &RewriteRuleSet) -> String {
    rules
        .rules
        .iter()
        .fold(word.to_owned(), |form, rule| rule.apply(&form))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SentenceLength {
    pub min: usize,
    pub max: usize,
}

/// Samples `sentences` sentences of uniformly drawn vocabulary words and rewrites them.
///
/// Sentence `i` belongs to dialect `i mod dialects.len()`.
pub fn generate_corpus<S: AsRef<str>>(
    vocabulary: &[S],
    dialects: &[RewriteRuleSet],
    sentences: usize,
    length: SentenceLength,
    seed: u64,
) -> Result<Vec<ParallelExample>> {
    if vocabulary.is_empty() {
        return Err(Error::Synthesis("empty vocabulary".into()));
    }
    if dialects.is_empty() {
        return Err(Error::Synthesis("no dialect rule sets".into()));
    }
    if sentences == 0 {
        return Err(Error::Synthesis("sentence count must be at least 1".into()));
    }
    if length.min == 0 || length.min > length.max {
        return Err(Error::Synthesis(format!(
            "bad sentence length range {}..={}",
            length.min, length.max
        )));
    }
    let vocab: Vec<&str> = vocabulary.iter().map(AsRef::as_ref).collect();
    for w in &vocab {
        validate_word(w)?;
    }

    // word -> dialect form, per dialect
    let mut tables: Vec<BTreeMap<&str, String>> = Vec::with_capacity(dialects.len());
    for set in dialects {
        let mut table = BTreeMap::new();
        for &w in &vocab {
            let form = apply_rules(w, set);
            validate_word(&form).map_err(|e| {
                Error::Synthesis(format!(
                    "dialect {:?} rewrites {w:?} into an invalid word: {e}",
                    set.dialect_id
                ))
            })?;
            table.insert(w, form);
        }
        tables.push(table);
    }
    for a in 0..dialects.len() {
        for b in a + 1..dialects.len() {
            if dialects[a].dialect_id == dialects[b].dialect_id {
                return Err(Error::Synthesis(format!(
                    "duplicate dialect id {:?}",
                    dialects[a].dialect_id
                )));
            }
            if tables[a] == tables[b] {
                return Err(Error::Synthesis(format!(
                    "dialects {:?} and {:?} are indistinguishable on this vocabulary",
                    dialects[a].dialect_id, dialects[b].dialect_id
                )));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(sentences);
    for i in 0..sentences {
        let d = i % dialects.len();
        let len = rng.gen_range(length.min..=length.max);
        let source: Vec<String> = (0..len)
            .map(|_| vocab[rng.gen_range(0..vocab.len())].to_owned())
            .collect();
        let target = source.iter().map(|w| tables[d][w.as_str()].clone()).collect();
        out.push(ParallelExample::new(
            dialects[d].dialect_id.clone(),
            source,
            target,
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent reference: rebuilds the word position by position, deciding each
    /// match with plain string slicing on the original form.
    fn naive_apply(word: &str, target: &str, replacement: &str, at_end_only: bool) -> String {
        let mut out = String::new();
        let mut rest = word;
        while !rest.is_empty() {
            let hit = rest.starts_with(target) && (!at_end_only || rest.len() == target.len());
            if hit {
                out.push_str(replacement);
                rest = &rest[target.len()..];
            } else {
                let c = rest.chars().next().unwrap();
                out.push(c);
                rest = &rest[c.len_utf8()..];
            }
        }
        out
    }

    fn set(rules: &[&str]) -> RewriteRuleSet {
        RewriteRuleSet::new(
            "X",
            rules.iter().map(|r| RewriteRule::parse(r).unwrap()).collect(),
        )
    }

    #[test]
    fn final_n_deletion() {
        let rules = set(&["n / _ # ->"]);
        assert_eq!(apply_rules("kun", &rules), "ku");
        assert_eq!(apply_rules("näin", &rules), "näi");
        assert_eq!(apply_rules("nenä", &rules), "nenä");
    }

    #[test]
    fn unconditional_rule_matches_naive_scan() {
        let rules = set(&["d -> r"]);
        assert_eq!(apply_rules("sydän", &rules), "syrän");
        for w in ["sydän", "ddd", "kada", "a", "pöytä", "dd"] {
            assert_eq!(apply_rules(w, &rules), naive_apply(w, "d", "r", false));
        }
        let fin = set(&["aa / _ # → a"]);
        for w in ["maa", "aaaa", "aika", "kaa", "saaaa"] {
            assert_eq!(apply_rules(w, &fin), naive_apply(w, "aa", "a", true), "{w}");
        }
    }

    #[test]
    fn empty_rule_list_is_identity() {
        assert_eq!(apply_rules("sydän", &set(&[])), "sydän");
    }

    #[test]
    fn single_pass_does_not_refire() {
        // a -> aa would loop forever if it rescanned its own output
        assert_eq!(apply_rules("aba", &set(&["a -> aa"])), "aabaa");
        // contexts come from the input form of the pass
        assert_eq!(apply_rules("kkk", &set(&["k / k _ -> t"])), "ktt");
    }

    #[test]
    fn contexts_and_classes() {
        let rules = set(&["k / V _ V -> ∅"]);
        assert_eq!(apply_rules("joki", &rules), "joi");
        assert_eq!(apply_rules("kala", &rules), "kala");
        let rules = set(&["n / [aä] _ # -> m"]);
        assert_eq!(apply_rules("talan", &rules), "talam");
        assert_eq!(apply_rules("talon", &rules), "talon");
        let rules = set(&["inä / # m _ # -> ie", "un / # k _ # -> o"]);
        assert_eq!(apply_rules("minä", &rules), "mie");
        assert_eq!(apply_rules("kun", &rules), "ko");
        assert_eq!(apply_rules("näin", &rules), "näin");
    }

    #[test]
    fn parse_errors() {
        assert!(RewriteRule::parse("d r").is_err());
        assert!(RewriteRule::parse(" -> r").is_err());
        assert!(RewriteRule::parse("d / a -> r").is_err());
        assert!(RewriteRule::parse("d / # a _ # b -> r").is_err());
        assert!(RewriteRule::parse("d / [ab _ -> r").is_err());
        let err = RewriteRuleSet::parse("d -> r\nbad\n", "X").unwrap_err();
        assert!(matches!(err, Error::RuleSyntax { line: 2, .. }));
    }

    #[test]
    fn rule_text_round_trips() {
        let text = "dialect: EK\n; comment\nn / V _ # -> \nd -> r\nk / [ae] _ C -> t\n";
        let s = RewriteRuleSet::parse(text, "ignored").unwrap();
        assert_eq!(s.dialect_id, "EK");
        assert_eq!(s.rules.len(), 3);
        assert_eq!(RewriteRuleSet::parse(&s.to_text(), "x").unwrap(), s);
    }

    #[test]
    fn generated_pairs_follow_rules() {
        let vocab = ["kun", "sydän", "talo", "maa", "hän"];
        let a = RewriteRuleSet::new("A", vec![RewriteRule::parse("n / _ # ->").unwrap()]);
        let b = RewriteRuleSet::new("B", vec![RewriteRule::simple("d", "r").unwrap()]);
        let len = SentenceLength { min: 1, max: 5 };
        let corpus = generate_corpus(&vocab, &[a.clone(), b.clone()], 1000, len, 3).unwrap();
        assert_eq!(corpus.iter().filter(|e| e.dialect_id == "A").count(), 500);
        assert_eq!(corpus.iter().filter(|e| e.dialect_id == "B").count(), 500);
        for ex in &corpus {
            let rules = if ex.dialect_id == "A" { &a } else { &b };
            assert_eq!(ex.source_words.len(), ex.target_words.len());
            assert!((1..=5).contains(&ex.source_words.len()));
            for (s, t) in ex.source_words.iter().zip(&ex.target_words) {
                assert_eq!(&apply_rules(s, rules), t);
            }
        }
        assert_eq!(
            corpus,
            generate_corpus(&vocab, &[a, b], 1000, len, 3).unwrap()
        );
    }

    #[test]
    fn identity_rules_copy_source() {
        let id = RewriteRuleSet::new("ID", Vec::new());
        let corpus =
            generate_corpus(&["a", "bc"], &[id], 50, SentenceLength { min: 2, max: 4 }, 0).unwrap();
        assert!(corpus.iter().all(|e| e.source_words == e.target_words));
    }

    #[test]
    fn generation_rejects_degenerate_setups() {
        let len = SentenceLength { min: 1, max: 2 };
        let a = RewriteRuleSet::new("A", vec![RewriteRule::simple("d", "r").unwrap()]);
        let b = RewriteRuleSet::new("B", vec![RewriteRule::simple("d", "r").unwrap()]);
        assert!(generate_corpus(&["sydän"], &[a.clone(), b], 10, len, 0).is_err());
        let del = RewriteRuleSet::new("D", vec![RewriteRule::simple("n", "").unwrap()]);
        assert!(generate_corpus(&["n"], &[del], 10, len, 0).is_err());
        assert!(generate_corpus::<&str>(&[], &[a.clone()], 10, len, 0).is_err());
        assert!(generate_corpus(&["a"], &[a], 0, len, 0).is_err());
    }
}
