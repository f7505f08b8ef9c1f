//! Shared generators and independent oracles for the integration suites.
//! Everything here is deliberately implemented without going through the
//! code paths it is used to check.
#![allow(dead_code)]

use std::hash::{DefaultHasher, Hash, Hasher};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal, Zipf};

use tokpriv::corpus::{Token, TokenSequence};
use tokpriv::lm::SequenceScorer;
use tokpriv::mapper::TupleMapping;
use tokpriv::{EmbeddingTable, Vocabulary};

pub fn tok(s: &str) -> Token {
    Token::new(s).unwrap()
}

pub fn toks(words: &[&str]) -> TokenSequence {
    words.iter().map(|w| tok(w)).collect()
}

/// Zero-padded token names so lexicographic order equals generation order.
pub fn word(i: usize) -> Token {
    tok(&format!("w{i:05}"))
}

/// Samples `total` tokens from a Zipf(s) distribution over `v` types,
/// grouped into sequences of `seq_len`.
pub fn zipf_corpus(seed: u64, total: usize, v: usize, s: f64, seq_len: usize) -> Vec<TokenSequence> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let dist = Zipf::new(v as f64, s).unwrap();
    let mut corpus = Vec::new();
    let mut current = Vec::with_capacity(seq_len);
    for _ in 0..total {
        let rank = dist.sample(&mut rng) as usize; // 1-based rank
        current.push(word(rank - 1));
        if current.len() == seq_len {
            corpus.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        corpus.push(current);
    }
    corpus
}

/// Random gaussian embedding table over tokens `w00000..`.
pub fn random_table(seed: u64, v: usize, d: usize) -> EmbeddingTable {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let tokens: Vec<Token> = (0..v).map(word).collect();
    let rows: Vec<Vec<f64>> = (0..v)
        .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    EmbeddingTable::new(tokens, d, rows).unwrap()
}

/// A deterministic pseudo-random scorer: every (prefix, next) pair gets a
/// fixed log-probability derived from a hash, so prefix scores are exactly
/// the sum of extension scores.
pub struct RandomScorer {
    pub seed: u64,
}

impl SequenceScorer for RandomScorer {
    fn extension_log_prob(&self, prefix: &[Token], next: &Token) -> f64 {
        let mut hasher = DefaultHasher::new();
        self.seed.hash(&mut hasher);
        for t in prefix {
            t.as_str().hash(&mut hasher);
        }
        next.as_str().hash(&mut hasher);
        let u = (hasher.finish() >> 11) as f64 / (1u64 << 53) as f64;
        // log-probs in [-6.9, -0.01]
        -0.01 - u * 6.9
    }
}

/// Exhaustive enumeration oracle for the beam-search attacker: generates
/// every candidate admitted by the mapping, scores each whole sequence,
/// and sorts by score (descending) with ties broken by ascending token-id
/// sequence.
pub fn enumerate_ranking(
    observed: &[Token],
    mapping: &TupleMapping,
    vocab: &Vocabulary,
    scorer: &dyn SequenceScorer,
) -> Vec<(TokenSequence, f64)> {
    let mut candidates: Vec<TokenSequence> = vec![Vec::new()];
    for obs in observed {
        let options: Vec<Token> = match vocab.id(obs) {
            Some(id) => match mapping.members_of_observed(id, vocab).unwrap() {
                Some(members) => members.iter().map(|&m| vocab.token(m).clone()).collect(),
                None => vec![obs.clone()],
            },
            None => vec![obs.clone()],
        };
        candidates = candidates
            .into_iter()
            .flat_map(|prefix| {
                options.iter().map(move |o| {
                    let mut next = prefix.clone();
                    next.push(o.clone());
                    next
                })
            })
            .collect();
    }
    let mut scored: Vec<(TokenSequence, f64)> = candidates
        .into_iter()
        .map(|c| {
            let score = scorer.prefix_log_prob(&c);
            (c, score)
        })
        .collect();
    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1).then_with(|| {
            let ka: Vec<u32> = a.0.iter().map(|t| vocab.id(t).unwrap_or(u32::MAX)).collect();
            let kb: Vec<u32> = b.0.iter().map(|t| vocab.id(t).unwrap_or(u32::MAX)).collect();
            ka.cmp(&kb)
        })
    });
    scored
}

/// Random token sequence over the vocabulary.
pub fn random_sequence(vocab: &Vocabulary, len: usize, rng: &mut impl Rng) -> TokenSequence {
    (0..len)
        .map(|_| vocab.token(rng.random_range(0..vocab.len() as u32)).clone())
        .collect()
}
