//! Character-level sequence representation.
//!
//! A word list becomes a flat symbol sequence: the characters of each word, with
//! the boundary symbol `_` between adjacent words. A multi-dialect source sequence
//! may additionally start with one atomic dialect flag.

use std::fmt;

use crate::corpus::DialectManifest;
use crate::error::{Error, Result};

pub const BOUNDARY: char = '_';

/// Default number of words per chunk.
pub const CHUNK_SIZE: usize = 3;

/// Whether source sequences carry a dialect flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlagMode {
    Flagged,
    Plain,
}

impl fmt::Display for FlagMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlagMode::Flagged => "flagged",
            FlagMode::Plain => "plain",
        })
    }
}

impl std::str::FromStr for FlagMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flagged" | "flags" => Ok(FlagMode::Flagged),
            "plain" | "none" | "no-flags" => Ok(FlagMode::Plain),
            other => Err(Error::InvalidArgument(format!("unknown flag mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    Char(char),
    Boundary,
    /// Dialect flag; holds the flag symbol (the dialect's long name).
    Flag(String),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Char(c) => write!(f, "{c}"),
            Token::Boundary => write!(f, "{BOUNDARY}"),
            Token::Flag(label) => f.write_str(label),
        }
    }
}

pub(crate) fn validate_word(word: &str) -> Result<()> {
    if word.is_empty() {
        return Err(Error::InvalidWord {
            word: word.into(),
            reason: "empty word",
        });
    }
    if word.contains(BOUNDARY) {
        return Err(Error::InvalidWord {
            word: word.into(),
            reason: "contains the boundary symbol",
        });
    }
    if word.chars().any(char::is_whitespace) {
        return Err(Error::InvalidWord {
            word: word.into(),
            reason: "contains whitespace",
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct EncodedSequence {
    tokens: Vec<Token>,
}

impl EncodedSequence {
    /// Validates boundary and flag placement.
    pub fn from_tokens(tokens: Vec<Token>) -> Result<Self> {
        let body_start = usize::from(matches!(tokens.first(), Some(Token::Flag(_))));
        if tokens[body_start..]
            .iter()
            .any(|t| matches!(t, Token::Flag(_)))
        {
            return Err(Error::MalformedSequence(
                "flag symbol away from position 0".into(),
            ));
        }
        let body = &tokens[body_start..];
        if matches!(body.first(), Some(Token::Boundary)) || matches!(body.last(), Some(Token::Boundary)) {
            return Err(Error::MalformedSequence(
                "boundary symbol at sequence edge".into(),
            ));
        }
        if body
            .windows(2)
            .any(|w| w[0] == Token::Boundary && w[1] == Token::Boundary)
        {
            return Err(Error::MalformedSequence("repeated boundary symbol".into()));
        }
        Ok(Self { tokens })
    }

    /// Parses the space-separated display form. Any multi-character item is a flag.
    pub fn parse(text: &str) -> Result<Self> {
        let tokens = text
            .split_whitespace()
            .map(|item| {
                let mut chars = item.chars();
                match (chars.next(), chars.next()) {
                    (Some(BOUNDARY), None) => Token::Boundary,
                    (Some(c), None) => Token::Char(c),
                    _ => Token::Flag(item.to_owned()),
                }
            })
            .collect();
        Self::from_tokens(tokens)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn into_tokens(self) -> Vec<Token> {
        self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn flag(&self) -> Option<&str> {
        match self.tokens.first() {
            Some(Token::Flag(label)) => Some(label),
            _ => None,
        }
    }
}

impl fmt::Display for EncodedSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

pub fn encode<S: AsRef<str>>(words: &[S]) -> Result<EncodedSequence> {
    if words.is_empty() {
        return Err(Error::InvalidArgument("cannot encode an empty word list".into()));
    }
    let mut tokens = Vec::new();
    for (i, w) in words.iter().enumerate() {
        let w = w.as_ref();
        validate_word(w)?;
        if i > 0 {
            tokens.push(Token::Boundary);
        }
        tokens.extend(w.chars().map(Token::Char));
    }
    Ok(EncodedSequence { tokens })
}

pub fn decode(seq: &EncodedSequence) -> Result<Vec<String>> {
    if seq.flag().is_some() {
        return Err(Error::MalformedSequence("cannot decode a flagged sequence".into()));
    }
    if seq.is_empty() {
        return Err(Error::MalformedSequence("empty sequence".into()));
    }
    let mut words = vec![String::new()];
    for t in &seq.tokens {
        match t {
            Token::Char(c) => words.last_mut().expect("non-empty").push(*c),
            Token::Boundary => words.push(String::new()),
            Token::Flag(_) => unreachable!("flags rejected above"),
        }
    }
    Ok(words)
}

/// Decodes raw model output, tolerating stray boundaries and flags.
///
/// Empty words produced by leading, trailing or doubled boundaries are dropped and
/// flags are ignored, so every returned word is non-empty.
pub fn decode_lenient(tokens: &[Token]) -> Vec<String> {
    let mut words = Vec::new();
    let mut current = String::new();
    for t in tokens {
        match t {
            Token::Char(c) if !c.is_whitespace() => current.push(*c),
            Token::Char(_) | Token::Boundary => {
                if !current.is_empty() {
                    words.push(std::mem::take(&mut current));
                }
            }
            Token::Flag(_) => {}
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    words
}

/// Prepends the flag symbol of `dialect_id`, as declared in `dialects`.
pub fn add_flag(
    seq: &EncodedSequence,
    dialect_id: &str,
    dialects: &DialectManifest,
) -> Result<EncodedSequence> {
    if seq.flag().is_some() {
        return Err(Error::MalformedSequence("sequence already carries a flag".into()));
    }
    let label = dialects
        .label(dialect_id)
        .ok_or_else(|| Error::UnknownDialect(dialect_id.to_owned()))?;
    let mut tokens = Vec::with_capacity(seq.len() + 1);
    tokens.push(Token::Flag(label.to_owned()));
    tokens.extend(seq.tokens.iter().cloned());
    Ok(EncodedSequence { tokens })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub words: Vec<String>,
    pub sentence_index: usize,
    pub chunk_index: usize,
}

/// Splits a sentence into consecutive non-overlapping chunks of `size` words.
pub fn chunk_sentence<S: AsRef<str>>(words: &[S], size: usize) -> Result<Vec<Chunk>> {
    chunk_sentence_at(0, words, size)
}

pub fn chunk_sentence_at<S: AsRef<str>>(
    sentence_index: usize,
    words: &[S],
    size: usize,
) -> Result<Vec<Chunk>> {
    if words.is_empty() {
        return Err(Error::InvalidArgument("cannot chunk an empty sentence".into()));
    }
    if size == 0 {
        return Err(Error::InvalidArgument("chunk size must be at least 1".into()));
    }
    Ok(words
        .chunks(size)
        .enumerate()
        .map(|(chunk_index, ws)| Chunk {
            words: ws.iter().map(|w| w.as_ref().to_owned()).collect(),
            sentence_index,
            chunk_index,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Truncation {
    pub words: Vec<String>,
    /// Words cut off the end of an over-long prediction.
    pub dropped: usize,
    /// Words missing from a short prediction.
    pub missing: usize,
}

impl Truncation {
    pub fn is_exact(&self) -> bool {
        self.dropped == 0 && self.missing == 0
    }
}

/// Keeps at most `source_word_count` predicted words.
pub fn truncate_to_source(mut predicted: Vec<String>, source_word_count: usize) -> Result<Truncation> {
    if source_word_count == 0 {
        return Err(Error::InvalidArgument("source word count must be at least 1".into()));
    }
    let dropped = predicted.len().saturating_sub(source_word_count);
    let missing = source_word_count.saturating_sub(predicted.len());
    predicted.truncate(source_word_count);
    Ok(Truncation {
        words: predicted,
        dropped,
        missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn is_manifest() -> DialectManifest {
        DialectManifest::parse("IS\tInkerinsuomalaismurteet\n").unwrap()
    }

    #[test]
    fn encodes_words_with_boundaries() {
        let seq = encode(&words("minä kun näin")).unwrap();
        assert_eq!(seq.to_string(), "m i n ä _ k u n _ n ä i n");
        assert_eq!(encode(&["a"]).unwrap().to_string(), "a");
    }

    #[test]
    fn encode_rejects_bad_input() {
        assert!(encode::<&str>(&[]).is_err());
        assert!(encode(&["a_b"]).is_err());
        assert!(encode(&["a b"]).is_err());
        assert!(encode(&[""]).is_err());
    }

    #[test]
    fn decodes_target_side() {
        let seq = EncodedSequence::parse("m i e _ k o _ n ä i n").unwrap();
        assert_eq!(decode(&seq).unwrap(), words("mie ko näin"));
        assert_eq!(decode(&EncodedSequence::parse("a").unwrap()).unwrap(), words("a"));
    }

    #[test]
    fn malformed_boundaries_rejected() {
        for bad in ["_ a", "a _", "a _ _ b"] {
            assert!(EncodedSequence::parse(bad).is_err(), "{bad}");
        }
        let flagged_inner = vec![Token::Char('a'), Token::Flag("XX".into())];
        assert!(EncodedSequence::from_tokens(flagged_inner).is_err());
    }

    #[test]
    fn flag_is_prepended_as_one_symbol() {
        let seq = encode(&words("minä kun näin")).unwrap();
        let flagged = add_flag(&seq, "IS", &is_manifest()).unwrap();
        assert_eq!(
            flagged.to_string(),
            "Inkerinsuomalaismurteet m i n ä _ k u n _ n ä i n"
        );
        assert_eq!(flagged.len(), seq.len() + 1);
        assert_eq!(&flagged.tokens()[1..], seq.tokens());
        assert!(add_flag(&flagged, "IS", &is_manifest()).is_err());
        assert!(matches!(
            add_flag(&seq, "EK", &is_manifest()),
            Err(Error::UnknownDialect(_))
        ));
        assert!(decode(&flagged).is_err());
        assert_eq!(EncodedSequence::parse(&flagged.to_string()).unwrap(), flagged);
    }

    #[test]
    fn chunk_sizes() {
        let w = words("a b c d e f g");
        let sizes: Vec<_> = chunk_sentence(&w, 3)
            .unwrap()
            .iter()
            .map(|c| c.words.len())
            .collect();
        assert_eq!(sizes, vec![3, 3, 1]);
        assert_eq!(chunk_sentence(&words("a b c"), 3).unwrap().len(), 1);
        assert!(chunk_sentence(&w, 0).is_err());
        assert!(chunk_sentence::<String>(&[], 3).is_err());
    }

    #[test]
    fn truncation_examples() {
        let t = truncate_to_source(words("olev vanha a"), 2).unwrap();
        assert_eq!(t.words, words("olev vanha"));
        assert_eq!(t.dropped, 1);
        let t = truncate_to_source(words("pien ?"), 2).unwrap();
        assert_eq!(t.words, words("pien ?"));
        assert!(t.is_exact());
        let t = truncate_to_source(words("yks"), 3).unwrap();
        assert_eq!(t.missing, 2);
        assert!(truncate_to_source(words("a"), 0).is_err());
    }

    #[test]
    fn lenient_decode_drops_empty_words() {
        let toks = EncodedSequence::parse("a").unwrap().into_tokens();
        assert_eq!(decode_lenient(&toks), words("a"));
        let raw = vec![
            Token::Boundary,
            Token::Char('a'),
            Token::Boundary,
            Token::Boundary,
            Token::Flag("X".into()),
            Token::Char('b'),
            Token::Boundary,
        ];
        assert_eq!(decode_lenient(&raw), words("a b"));
    }

    fn word_list() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec("[a-zäö?.,]{1,8}", 1..12)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn decode_inverts_encode(w in word_list()) {
            let seq = encode(&w).unwrap();
            prop_assert_eq!(decode(&seq).unwrap(), w.clone());
            prop_assert_eq!(decode_lenient(seq.tokens()), w);
        }

        #[test]
        fn chunks_reassemble_sentence(w in word_list(), size in 1usize..5) {
            let chunks = chunk_sentence(&w, size).unwrap();
            let n = chunks.len();
            for (i, c) in chunks.iter().enumerate() {
                prop_assert_eq!(c.chunk_index, i);
                if i + 1 < n { prop_assert_eq!(c.words.len(), size); }
                prop_assert!(!c.words.is_empty() && c.words.len() <= size);
            }
            let joined: Vec<String> = chunks.into_iter().flat_map(|c| c.words).collect();
            prop_assert_eq!(joined, w);
        }

        #[test]
        fn truncation_never_exceeds_source(w in proptest::collection::vec("[a-z]{1,3}", 0..8), n in 1usize..6) {
            let t = truncate_to_source(w.clone(), n).unwrap();
            prop_assert!(t.words.len() <= n);
            prop_assert_eq!(t.words.len(), w.len().min(n));
        }
    }
}
