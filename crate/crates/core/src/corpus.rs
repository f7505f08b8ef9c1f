//! Tokenization, document ingestion, and corpus frequency statistics.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single token: a non-empty piece of UTF-8 text containing no separator
/// characters of the active tokenizer configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(String);

impl Token {
    pub fn new(surface: impl Into<String>) -> Result<Self> {
        let surface = surface.into();
        if surface.is_empty() {
            return Err(Error::EmptyToken);
        }
        Ok(Token(surface))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An ordered sequence of tokens. Its length is the sequence length `m`
/// used throughout the attack and privatization code.
pub type TokenSequence = Vec<Token>;

/// How raw text is split into tokens.
///
/// When `pretokenized_input` is set the input is assumed to carry one token
/// per whitespace gap and the other flags are ignored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub split_punctuation: bool,
    pub pretokenized_input: bool,
}

/// Splits `text` into tokens under `config`. Empty input yields an empty
/// sequence. Joining the output with single spaces and re-tokenizing under
/// the same config is idempotent.
pub fn tokenize(text: &str, config: &TokenizerConfig) -> TokenSequence {
    if config.pretokenized_input {
        return text
            .split_whitespace()
            .map(|w| Token(w.to_string()))
            .collect();
    }
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let chunk = if config.lowercase {
            chunk.to_lowercase()
        } else {
            chunk.to_string()
        };
        if config.split_punctuation {
            let mut buf = String::new();
            for ch in chunk.chars() {
                if ch.is_alphanumeric() {
                    buf.push(ch);
                } else {
                    if !buf.is_empty() {
                        tokens.push(Token(std::mem::take(&mut buf)));
                    }
                    tokens.push(Token(ch.to_string()));
                }
            }
            if !buf.is_empty() {
                tokens.push(Token(buf));
            }
        } else {
            tokens.push(Token(chunk));
        }
    }
    tokens
}

/// Joins tokens with single spaces, the inverse convention of [`tokenize`].
pub fn detokenize(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t.as_str());
    }
    out
}

/// Occurrence counts of tokens over a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: HashMap<Token, u64>,
    total: u64,
}

impl FrequencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_sequence(&mut self, seq: &[Token]) {
        for t in seq {
            *self.counts.entry(t.clone()).or_insert(0) += 1;
            self.total += 1;
        }
    }

    /// Commutative merge; building per-shard tables and merging gives the
    /// same result as a single pass.
    pub fn merge(&mut self, other: &FrequencyTable) {
        for (t, c) in &other.counts {
            *self.counts.entry(t.clone()).or_insert(0) += c;
        }
        self.total += other.total;
    }

    pub fn count(&self, token: &Token) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Token, u64)> {
        self.counts.iter().map(|(t, &c)| (t, c))
    }

    /// TSV serialization, `token<TAB>count`, one entry per line in
    /// descending-count order (lexicographic tie-break) so output is
    /// deterministic.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for token in rank_descending_unchecked(self) {
            let count = self.count(&token);
            out.push_str(token.as_str());
            out.push('\t');
            out.push_str(&count.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut table = FrequencyTable::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            let (token, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(lineno, "expected `token<TAB>count`"))?;
            if token.is_empty() {
                return Err(Error::format(lineno, "empty token"));
            }
            let count: u64 = count
                .parse()
                .map_err(|e| Error::format(lineno, format!("bad count: {e}")))?;
            if count == 0 {
                return Err(Error::format(lineno, "zero count"));
            }
            let token = Token(token.to_string());
            if table.counts.contains_key(&token) {
                return Err(Error::format(lineno, format!("duplicate token `{token}`")));
            }
            table.counts.insert(token, count);
            table.total += count;
        }
        Ok(table)
    }
}

/// Counts token occurrences across all documents.
pub fn build_frequency<'a, I>(documents: I) -> FrequencyTable
where
    I: IntoIterator<Item = &'a TokenSequence>,
{
    let mut table = FrequencyTable::new();
    for doc in documents {
        table.add_sequence(doc);
    }
    table
}

/// Tokens ordered by descending count, ties broken by ascending
/// lexicographic order of surface text.
pub fn rank_descending(freq: &FrequencyTable) -> Result<Vec<Token>> {
    if freq.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(rank_descending_unchecked(freq))
}

fn rank_descending_unchecked(freq: &FrequencyTable) -> Vec<Token> {
    let mut entries: Vec<(&Token, u64)> = freq.counts.iter().map(|(t, &c)| (t, c)).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    entries.into_iter().map(|(t, _)| t.clone()).collect()
}
