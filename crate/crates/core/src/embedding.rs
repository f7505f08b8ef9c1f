//! Vocabulary identity, embedding storage, and exact k-nearest-neighbor
//! search over the vocabulary.
//!
//! The nearest-neighbor scan is an exact brute-force pass over all rows;
//! there is no approximate index. Ties are broken by ascending token id so
//! results are deterministic regardless of parallelism.

use std::collections::{HashMap, HashSet};

use crate::corpus::Token;
use crate::error::{Error, Result};

/// An ordered set of distinct tokens with dense, stable ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<Token>,
    index: HashMap<Token, u32>,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<Token>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::DuplicateToken(t.as_str().to_string()));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &Token) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &Token {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }
}

/// Distance/similarity notion used for nearest-neighbor queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    /// Euclidean distance, smaller is closer.
    #[default]
    Euclidean,
    /// Cosine similarity, larger is closer.
    Cosine,
}

/// A `V x d` embedding matrix with precomputed row norms.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vocab: Vocabulary,
    dim: usize,
    rows: Vec<f64>,
    row_norms: Vec<f64>,
}

impl EmbeddingTable {
    /// Builds a table from parallel token/row lists. Every row must have
    /// `dim` finite components and nonzero norm.
    pub fn new(tokens: Vec<Token>, dim: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be positive".into()));
        }
        if tokens.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                expected: tokens.len(),
                found: rows.len(),
            });
        }
        let vocab = Vocabulary::from_tokens(tokens)?;
        let mut flat = Vec::with_capacity(vocab.len() * dim);
        let mut norms = Vec::with_capacity(vocab.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue(vocab.token(i as u32).as_str().into()));
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroVector(vocab.token(i as u32).as_str().into()));
            }
            flat.extend_from_slice(row);
            norms.push(norm);
        }
        Ok(EmbeddingTable {
            vocab,
            dim,
            rows: flat,
            row_norms: norms,
        })
    }

    /// Parses the embedding file format: a `V d` header line followed by
    /// `V` lines of `token v1 v2 ... vd`, single-space separated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::format(1, "missing header"))?;
        let mut parts = header.split_whitespace();
        let v: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(1, "header must be `V d`"))?;
        let d: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(1, "header must be `V d`"))?;
        if parts.next().is_some() {
            return Err(Error::format(1, "header must be `V d`"));
        }
        let mut tokens = Vec::with_capacity(v);
        let mut rows = Vec::with_capacity(v);
        for (i, line) in lines {
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(' ');
            let token = fields
                .next()
                .filter(|t| !t.is_empty())
                .ok_or_else(|| Error::format(lineno, "missing token"))?;
            let mut row = Vec::with_capacity(d);
            for field in fields {
                let value: f64 = field
                    .parse()
                    .map_err(|e| Error::format(lineno, format!("bad float `{field}`: {e}")))?;
                row.push(value);
            }
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            tokens.push(Token::new(token)?);
            rows.push(row);
        }
        if tokens.len() != v {
            return Err(Error::DimensionMismatch {
                expected: v,
                found: tokens.len(),
            });
        }
        Self::new(tokens, d, rows)
    }

    /// Serializes back to the embedding file format.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.vocab.len(), self.dim);
        for id in 0..self.vocab.len() as u32 {
            out.push_str(self.vocab.token(id).as_str());
            for v in self.row(id) {
                out.push(' ');
                out.push_str(&format!("{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn row(&self, id: u32) -> &[f64] {
        let i = id as usize * self.dim;
        &self.rows[i..i + self.dim]
    }

    pub fn row_norm(&self, id: u32) -> f64 {
        self.row_norms[id as usize]
    }

    /// The `k` tokens closest to `query` under `metric`, best-first,
    /// skipping ids in `exclude`. Euclidean results carry ascending
    /// distances, cosine results descending similarities; ties are broken
    /// by ascending token id.
    pub fn nearest(
        &self,
        query: &[f64],
        metric: Metric,
        exclude: &HashSet<u32>,
        k: usize,
    ) -> Result<Vec<(u32, f64)>> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: query.len(),
            });
        }
        let excluded_present = exclude.iter().filter(|id| (**id as usize) < self.len()).count();
        let available = self.len() - excluded_present;
        if k > available {
            return Err(Error::KTooLarge { k, available });
        }
        let query_norm = query.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut scored: Vec<(u32, f64)> = (0..self.len() as u32)
            .filter(|id| !exclude.contains(id))
            .map(|id| {
                let row = self.row(id);
                let score = match metric {
                    Metric::Euclidean => row
                        .iter()
                        .zip(query)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt(),
                    Metric::Cosine => {
                        let dot: f64 = row.iter().zip(query).map(|(a, b)| a * b).sum();
                        if query_norm == 0.0 {
                            0.0
                        } else {
                            dot / (self.row_norm(id) * query_norm)
                        }
                    }
                };
                (id, score)
            })
            .collect();
        scored.sort_by(|a, b| match metric {
            Metric::Euclidean => a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)),
            Metric::Cosine => b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)),
        });
        scored.truncate(k);
        Ok(scored)
    }
}
