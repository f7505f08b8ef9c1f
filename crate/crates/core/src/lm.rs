//! Sequence scoring for the oracle attacker: a pluggable scorer contract,
//! a trainable n-gram model behind it, and a literal lookup-table scorer
//! for hand-crafted fixtures.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{Token, TokenSequence};
use crate::error::{Error, Result};

/// Contract required by the beam-search attacker: log-probability of a
/// prefix and of any single-token extension. Log-probabilities are always
/// non-positive, so extending a prefix can never raise its score.
pub trait SequenceScorer: Send + Sync {
    fn extension_log_prob(&self, prefix: &[Token], next: &Token) -> f64;

    fn prefix_log_prob(&self, prefix: &[Token]) -> f64 {
        (0..prefix.len())
            .map(|i| self.extension_log_prob(&prefix[..i], &prefix[i]))
            .sum()
    }
}

pub const MODEL_SCHEMA_VERSION: u32 = 1;

// Extended-id sentinels used in stored contexts.
const BOS: u32 = u32::MAX - 1;
const EOS: u32 = u32::MAX;
// Scoring-time stand-in for an out-of-vocabulary context token; matches no
// stored context.
const OOV_CTX: u32 = u32::MAX - 2;

// Add-alpha floor on the unigram component of interpolated smoothing, so
// unseen tokens keep positive probability.
const INTERP_UNIGRAM_ALPHA: f64 = 1e-3;

/// Smoothing scheme for conditional probabilities.
///
/// `AddK` applies add-k at the model's full order. `Interpolated` mixes
/// maximum-likelihood estimates of all orders, lambdas listed highest
/// order first; its unigram component is add-alpha smoothed (alpha = 1e-3)
/// and an unseen context at any order contributes a uniform `1/V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Smoothing {
    AddK(f64),
    Interpolated(Vec<f64>),
}

impl Smoothing {
    fn validate(&self, order: usize) -> Result<()> {
        match self {
            Smoothing::AddK(k) => {
                if !(*k > 0.0) {
                    return Err(Error::InvalidConfig(format!("add-k requires k > 0, got {k}")));
                }
            }
            Smoothing::Interpolated(lambdas) => {
                if lambdas.len() != order {
                    return Err(Error::InvalidConfig(format!(
                        "interpolated smoothing needs {order} lambdas, got {}",
                        lambdas.len()
                    )));
                }
                if lambdas.iter().any(|l| !(*l > 0.0)) {
                    return Err(Error::InvalidConfig("lambdas must be positive".into()));
                }
                let sum: f64 = lambdas.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidConfig(format!("lambdas must sum to 1, got {sum}")));
                }
            }
        }
        Ok(())
    }
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing::Interpolated(vec![0.6, 0.3, 0.1])
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct ContextCounts {
    next: HashMap<u32, u64>,
    // continuations into user-vocabulary tokens only (EOS excluded)
    vocab_total: u64,
}

/// A trained n-gram model over whole tokens. Begin/end sentence markers
/// are internal and never appear in the user-visible vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    smoothing: Smoothing,
    vocab: Vec<Token>,
    index: HashMap<Token, u32>,
    // counts[n-1]: context of length n-1 -> continuation counts
    counts: Vec<HashMap<Vec<u32>, ContextCounts>>,
}

impl NGramModel {
    /// Counts n-grams of every order up to `order` over the corpus, with
    /// begin/end markers added per sequence.
    pub fn train(corpus: &[TokenSequence], order: usize, smoothing: Smoothing) -> Result<Self> {
        if !(1..=5).contains(&order) {
            return Err(Error::InvalidConfig(format!("order must be in 1..=5, got {order}")));
        }
        smoothing.validate(order)?;
        if corpus.is_empty() || corpus.iter().all(|s| s.is_empty()) {
            return Err(Error::EmptyCorpus);
        }
        let mut vocab: Vec<Token> = corpus.iter().flatten().cloned().collect();
        vocab.sort();
        vocab.dedup();
        let index: HashMap<Token, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let mut counts = vec![HashMap::<Vec<u32>, ContextCounts>::new(); order];
        for seq in corpus {
            if seq.is_empty() {
                continue;
            }
            let mut ext: Vec<u32> = vec![BOS; order - 1];
            ext.extend(seq.iter().map(|t| index[t]));
            ext.push(EOS);
            for pos in (order - 1)..ext.len() {
                let target = ext[pos];
                for n in 1..=order {
                    let ctx = ext[pos - (n - 1)..pos].to_vec();
                    let entry = counts[n - 1].entry(ctx).or_default();
                    *entry.next.entry(target).or_insert(0) += 1;
                    if target != EOS {
                        entry.vocab_total += 1;
                    }
                }
            }
        }
        Ok(NGramModel {
            order,
            smoothing,
            vocab,
            index,
            counts,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> &Smoothing {
        &self.smoothing
    }

    pub fn vocab(&self) -> &[Token] {
        &self.vocab
    }

    fn vocab_size(&self) -> f64 {
        self.vocab.len() as f64
    }

    fn count(&self, n: usize, ctx: &[u32], target: u32) -> (u64, u64) {
        match self.counts[n - 1].get(ctx) {
            Some(entry) => (entry.next.get(&target).copied().unwrap_or(0), entry.vocab_total),
            None => (0, 0),
        }
    }

    /// Conditional probability of a vocabulary continuation given an
    /// extended-id context of length `order - 1`. The distribution is over
    /// the user vocabulary and sums to 1 per context.
    fn conditional(&self, ctx: &[u32], target: u32) -> f64 {
        let v = self.vocab_size();
        match &self.smoothing {
            Smoothing::AddK(k) => {
                let (c, tot) = self.count(self.order, ctx, target);
                (c as f64 + k) / (tot as f64 + k * v)
            }
            Smoothing::Interpolated(lambdas) => {
                let mut p = 0.0;
                for (i, lambda) in lambdas.iter().enumerate() {
                    let n = self.order - i;
                    let sub_ctx = &ctx[ctx.len() - (n - 1)..];
                    let (c, tot) = self.count(n, sub_ctx, target);
                    let component = if n == 1 {
                        (c as f64 + INTERP_UNIGRAM_ALPHA)
                            / (tot as f64 + INTERP_UNIGRAM_ALPHA * v)
                    } else if tot == 0 {
                        1.0 / v
                    } else {
                        c as f64 / tot as f64
                    };
                    p += lambda * component;
                }
                p
            }
        }
    }

    fn context_of(&self, prefix: &[Token]) -> Vec<u32> {
        let need = self.order - 1;
        let mut ctx: Vec<u32> = Vec::with_capacity(need);
        let take = prefix.len().min(need);
        for _ in 0..need.saturating_sub(take) {
            ctx.push(BOS);
        }
        for t in &prefix[prefix.len() - take..] {
            ctx.push(self.index.get(t).copied().unwrap_or(OOV_CTX));
        }
        ctx
    }

    /// Log-probability of the sequence under the chain rule, without an
    /// end-of-sequence term (so it is non-increasing under extension).
    pub fn log_prob(&self, seq: &[Token]) -> f64 {
        self.prefix_log_prob(seq)
    }

    /// Distribution over the full vocabulary for a given prefix; used by
    /// normalization checks.
    pub fn extension_distribution(&self, prefix: &[Token]) -> Vec<(Token, f64)> {
        let ctx = self.context_of(prefix);
        (0..self.vocab.len() as u32)
            .map(|id| (self.vocab[id as usize].clone(), self.conditional(&ctx, id)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut entries = Vec::new();
        for (n, map) in self.counts.iter().enumerate() {
            for (ctx, cc) in map {
                for (&target, &count) in &cc.next {
                    entries.push(CountEntry {
                        n: n + 1,
                        context: ctx.clone(),
                        target,
                        count,
                    });
                }
            }
        }
        entries.sort();
        let file = NGramModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            kind: "ngram".to_string(),
            order: self.order,
            smoothing: self.smoothing.clone(),
            vocab: self.vocab.iter().map(|t| t.as_str().to_string()).collect(),
            counts: entries,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NGramModelFile = serde_json::from_str(text)?;
        if file.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::SchemaVersion(file.schema_version));
        }
        if file.kind != "ngram" {
            return Err(Error::InvalidConfig(format!("expected kind `ngram`, got `{}`", file.kind)));
        }
        if !(1..=5).contains(&file.order) {
            return Err(Error::InvalidConfig(format!("order must be in 1..=5, got {}", file.order)));
        }
        file.smoothing.validate(file.order)?;
        let vocab: Vec<Token> = file
            .vocab
            .iter()
            .map(|s| Token::new(s.as_str()))
            .collect::<Result<_>>()?;
        let mut index = HashMap::new();
        for (i, t) in vocab.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::DuplicateToken(t.as_str().into()));
            }
        }
        let mut counts = vec![HashMap::<Vec<u32>, ContextCounts>::new(); file.order];
        for entry in file.counts {
            if entry.n == 0 || entry.n > file.order || entry.context.len() != entry.n - 1 {
                return Err(Error::InvalidConfig("malformed count entry".into()));
            }
            let cc = counts[entry.n - 1].entry(entry.context).or_default();
            *cc.next.entry(entry.target).or_insert(0) += entry.count;
            if entry.target != EOS {
                cc.vocab_total += entry.count;
            }
        }
        Ok(NGramModel {
            order: file.order,
            smoothing: file.smoothing,
            vocab,
            index,
            counts,
        })
    }
}

impl SequenceScorer for NGramModel {
    fn extension_log_prob(&self, prefix: &[Token], next: &Token) -> f64 {
        let ctx = self.context_of(prefix);
        let target = self.index.get(next).copied();
        let p = match target {
            Some(id) => self.conditional(&ctx, id),
            // OOV continuation scores like an unseen vocabulary token
            None => self.conditional(&ctx, OOV_CTX),
        };
        p.ln().min(0.0)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct NGramModelFile {
    schema_version: u32,
    kind: String,
    order: usize,
    smoothing: Smoothing,
    vocab: Vec<String>,
    counts: Vec<CountEntry>,
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
struct CountEntry {
    n: usize,
    context: Vec<u32>,
    target: u32,
    count: u64,
}

/// A scorer backed by literal conditional probabilities keyed by the full
/// prefix. Missing entries fall back to `default_log_prob`. Used for
/// hand-crafted walkthrough fixtures and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupScorer {
    entries: HashMap<Vec<String>, BTreeMap<String, f64>>,
    default_log_prob: f64,
}

impl LookupScorer {
    pub fn new(
        entries: HashMap<Vec<String>, BTreeMap<String, f64>>,
        default_log_prob: f64,
    ) -> Result<Self> {
        for options in entries.values() {
            for (token, &p) in options {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "probability for `{token}` must be in (0,1], got {p}"
                    )));
                }
            }
        }
        if !(default_log_prob <= 0.0) {
            return Err(Error::InvalidConfig(
                "default log-probability must be non-positive".into(),
            ));
        }
        Ok(LookupScorer {
            entries,
            default_log_prob,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut entries: Vec<LookupEntry> = self
            .entries
            .iter()
            .map(|(prefix, options)| LookupEntry {
                prefix: prefix.clone(),
                options: options.clone(),
            })
            .collect();
        entries.sort_by(|a, b| a.prefix.cmp(&b.prefix));
        let file = LookupScorerFile {
            schema_version: MODEL_SCHEMA_VERSION,
            kind: "lookup".to_string(),
            default_log_prob: self.default_log_prob,
            entries,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LookupScorerFile = serde_json::from_str(text)?;
        if file.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::SchemaVersion(file.schema_version));
        }
        if file.kind != "lookup" {
            return Err(Error::InvalidConfig(format!(
                "expected kind `lookup`, got `{}`",
                file.kind
            )));
        }
        let entries = file
            .entries
            .into_iter()
            .map(|e| (e.prefix, e.options))
            .collect();
        Self::new(entries, file.default_log_prob)
    }
}

impl SequenceScorer for LookupScorer {
    fn extension_log_prob(&self, prefix: &[Token], next: &Token) -> f64 {
        let key: Vec<String> = prefix.iter().map(|t| t.as_str().to_string()).collect();
        self.entries
            .get(&key)
            .and_then(|options| options.get(next.as_str()))
            .map(|p| p.ln())
            .unwrap_or(self.default_log_prob)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LookupScorerFile {
    schema_version: u32,
    kind: String,
    default_log_prob: f64,
    entries: Vec<LookupEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LookupEntry {
    prefix: Vec<String>,
    options: BTreeMap<String, f64>,
}

/// Loads either scorer kind from its JSON serialization, dispatching on
/// the embedded `kind` tag.
pub fn load_scorer(text: &str) -> Result<Box<dyn SequenceScorer>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("kind").and_then(|k| k.as_str()) {
        Some("ngram") => Ok(Box::new(NGramModel::from_json(text)?)),
        Some("lookup") => Ok(Box::new(LookupScorer::from_json(text)?)),
        other => Err(Error::InvalidConfig(format!(
            "unknown scorer kind {other:?}"
        ))),
    }
}
