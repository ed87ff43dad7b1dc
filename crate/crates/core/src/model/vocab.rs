use std::collections::{BTreeSet, HashMap};

use crate::corpus::ParallelExample;
use crate::error::{Error, Result};
use crate::textcodec::{EncodedSequence, Token};

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;
pub const BOUNDARY_ID: u32 = 4;
pub(crate) const RESERVED: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Symbol {
    Pad,
    Bos,
    Eos,
    Unk,
    Token(Token),
}

/// Symbol/id bijection. Ids 0-4 are PAD, BOS, EOS, UNK and the word boundary;
/// flags follow in declaration order, then characters by code point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<Symbol>,
    index: HashMap<Symbol, u32>,
}

impl Vocabulary {
    pub fn from_parts<S: AsRef<str>>(flags: &[S], chars: impl IntoIterator<Item = char>) -> Result<Self> {
        let mut symbols = vec![
            Symbol::Pad,
            Symbol::Bos,
            Symbol::Eos,
            Symbol::Unk,
            Symbol::Token(Token::Boundary),
        ];
        for f in flags {
            symbols.push(Symbol::Token(Token::Flag(f.as_ref().to_owned())));
        }
        let chars: BTreeSet<char> = chars.into_iter().collect();
        symbols.extend(chars.into_iter().map(|c| Symbol::Token(Token::Char(c))));
        Self::from_symbols(symbols)
    }

    fn from_symbols(symbols: Vec<Symbol>) -> Result<Self> {
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if let Symbol::Token(Token::Char(c)) = s {
                if *c == crate::textcodec::BOUNDARY {
                    return Err(Error::InvalidArgument("boundary listed as a character".into()));
                }
            }
            if index.insert(s.clone(), i as u32).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate vocabulary symbol {s:?}")));
            }
        }
        Ok(Self { symbols, index })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbol(&self, id: u32) -> Option<&Symbol> {
        self.symbols.get(id as usize)
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn id(&self, token: &Token) -> Option<u32> {
        self.index.get(&Symbol::Token(token.clone())).copied()
    }

    pub fn flags(&self) -> impl Iterator<Item = &str> {
        self.symbols.iter().filter_map(|s| match s {
            Symbol::Token(Token::Flag(f)) => Some(f.as_str()),
            _ => None,
        })
    }

    /// Ids of a source sequence. Unknown characters map to UNK; unknown flags are errors.
    pub fn source_ids(&self, seq: &EncodedSequence) -> Result<Vec<u32>> {
        seq.tokens()
            .iter()
            .map(|t| match (self.id(t), t) {
                (Some(id), _) => Ok(id),
                (None, Token::Flag(f)) => Err(Error::UnknownDialect(f.clone())),
                (None, _) => Ok(UNK),
            })
            .collect()
    }

    /// Ids of a target sequence wrapped in BOS ... EOS.
    pub fn target_ids(&self, seq: &EncodedSequence) -> Result<Vec<u32>> {
        let mut ids = Vec::with_capacity(seq.len() + 2);
        ids.push(BOS);
        ids.extend(self.source_ids(seq)?);
        ids.push(EOS);
        Ok(ids)
    }

    /// Tokens for ids, skipping PAD/BOS/EOS/UNK.
    pub fn tokens(&self, ids: &[u32]) -> Vec<Token> {
        ids.iter()
            .filter_map(|&id| match self.symbol(id) {
                Some(Symbol::Token(t)) => Some(t.clone()),
                _ => None,
            })
            .collect()
    }

    pub(crate) fn to_strings(&self) -> Vec<String> {
        self.symbols
            .iter()
            .map(|s| match s {
                Symbol::Pad => "<pad>".to_owned(),
                Symbol::Bos => "<s>".to_owned(),
                Symbol::Eos => "</s>".to_owned(),
                Symbol::Unk => "<unk>".to_owned(),
                Symbol::Token(t) => t.to_string(),
            })
            .collect()
    }

    pub(crate) fn from_strings(items: &[String]) -> Result<Self> {
        if items.len() < RESERVED {
            return Err(Error::Checkpoint("vocabulary lacks reserved symbols".into()));
        }
        let expected = ["<pad>", "<s>", "</s>", "<unk>", "_"];
        if items[..RESERVED].iter().zip(expected).any(|(a, b)| a != b) {
            return Err(Error::Checkpoint("reserved vocabulary symbols out of order".into()));
        }
        let mut symbols = vec![
            Symbol::Pad,
            Symbol::Bos,
            Symbol::Eos,
            Symbol::Unk,
            Symbol::Token(Token::Boundary),
        ];
        for item in &items[RESERVED..] {
            let mut chars = item.chars();
            let token = match (chars.next(), chars.next()) {
                (Some(c), None) => Token::Char(c),
                (Some(_), Some(_)) => Token::Flag(item.clone()),
                (None, _) => return Err(Error::Checkpoint("empty vocabulary symbol".into())),
            };
            symbols.push(Symbol::Token(token));
        }
        Self::from_symbols(symbols).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

/// Vocabulary over every character of the corpus, plus one flag per entry of `flags`.
pub fn build_vocabulary<S: AsRef<str>>(examples: &[ParallelExample], flags: &[S]) -> Result<Vocabulary> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("cannot build a vocabulary from no examples".into()));
    }
    let chars = examples
        .iter()
        .flat_map(|e| e.source_words.iter().chain(&e.target_words))
        .flat_map(|w| w.chars());
    Vocabulary::from_parts(flags, chars)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textcodec::encode;

    fn corpus() -> Vec<ParallelExample> {
        vec![
            ParallelExample::from_sentences("A", "ab ba", "b a").unwrap(),
            ParallelExample::from_sentences("B", "a", "aa").unwrap(),
        ]
    }

    #[test]
    fn counts_specials_flags_and_chars() {
        let v = build_vocabulary(&corpus(), &["AA", "BB"]).unwrap();
        assert_eq!(v.len(), 9);
        assert_eq!(v.symbol(BOUNDARY_ID), Some(&Symbol::Token(Token::Boundary)));
        assert_eq!(v.id(&Token::Flag("AA".into())), Some(5));
        assert_eq!(v.id(&Token::Char('a')), Some(7));
        assert_eq!(v.id(&Token::Char('b')), Some(8));
    }

    #[test]
    fn unseen_characters_are_unknown() {
        let v = build_vocabulary(&corpus(), &["AA"]).unwrap();
        let ids = v.source_ids(&encode(&["abz"]).unwrap()).unwrap();
        assert_eq!(ids[2], UNK);
        let t = v.target_ids(&encode(&["a", "b"]).unwrap()).unwrap();
        assert_eq!(t.first(), Some(&BOS));
        assert_eq!(t.last(), Some(&EOS));
        assert_eq!(t.len(), 5);
    }

    #[test]
    fn deterministic_and_string_round_trip() {
        let a = build_vocabulary(&corpus(), &["AA", "BB"]).unwrap();
        let b = build_vocabulary(&corpus(), &["AA", "BB"]).unwrap();
        assert_eq!(a, b);
        assert_eq!(Vocabulary::from_strings(&a.to_strings()).unwrap(), a);
        assert!(build_vocabulary::<&str>(&[], &[]).is_err());
    }
}
