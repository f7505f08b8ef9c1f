//! Many-to-one tuple mappings: construction, application, and TSV
//! (de)serialization.
//!
//! The vocabulary is partitioned into tuples of uniform size 2 or 3, each
//! with a designated representative; applying the mapping replaces every
//! tuple member with its representative. Tokens left over by the partition
//! (and out-of-vocabulary tokens) map to themselves.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::corpus::{FrequencyTable, Token, TokenSequence};
use crate::embedding::Vocabulary;
use crate::error::{Error, Result};

/// How a tuple's representative is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepresentativePolicy {
    Random,
    HighFrequency,
    LowFrequency,
}

/// A disjoint partition of the vocabulary into tuples with representatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TupleMapping {
    tuples: Vec<Vec<u32>>,
    representatives: Vec<u32>,
    leftovers: BTreeSet<u32>,
    tuple_of: HashMap<u32, usize>,
    tuple_size: usize,
    vocab_size: usize,
}

impl TupleMapping {
    /// Validates all invariants: uniform tuple size in {2,3}, disjointness,
    /// full coverage of `0..vocab_size`, representative membership, and
    /// `|leftovers| = V mod s`.
    pub fn new(
        tuples: Vec<Vec<u32>>,
        representatives: Vec<u32>,
        leftovers: BTreeSet<u32>,
        vocab: &Vocabulary,
    ) -> Result<Self> {
        let vocab_size = vocab.len();
        if tuples.len() != representatives.len() {
            return Err(Error::InvalidConfig(
                "one representative required per tuple".into(),
            ));
        }
        let tuple_size = tuples.first().map(|t| t.len()).unwrap_or(2);
        if !(2..=3).contains(&tuple_size) {
            return Err(Error::InvalidConfig(format!(
                "tuple size must be 2 or 3, got {tuple_size}"
            )));
        }
        let mut tuple_of = HashMap::new();
        for (idx, tuple) in tuples.iter().enumerate() {
            if tuple.len() != tuple_size {
                return Err(Error::InvalidConfig(format!(
                    "tuple {idx} has size {} but expected {tuple_size}",
                    tuple.len()
                )));
            }
            for &id in tuple {
                if id as usize >= vocab_size {
                    return Err(Error::UnknownToken(format!("id {id}")));
                }
                if tuple_of.insert(id, idx).is_some() {
                    return Err(Error::TupleOverlap(vocab.token(id).as_str().into()));
                }
            }
            if !tuple.contains(&representatives[idx]) {
                return Err(Error::RepresentativeNotInTuple(
                    vocab.token(representatives[idx]).as_str().into(),
                ));
            }
        }
        for &id in &leftovers {
            if id as usize >= vocab_size {
                return Err(Error::UnknownToken(format!("id {id}")));
            }
            if tuple_of.contains_key(&id) {
                return Err(Error::TupleOverlap(vocab.token(id).as_str().into()));
            }
        }
        for id in 0..vocab_size as u32 {
            if !tuple_of.contains_key(&id) && !leftovers.contains(&id) {
                return Err(Error::IncompleteCover(vocab.token(id).as_str().into()));
            }
        }
        if leftovers.len() != vocab_size % tuple_size {
            return Err(Error::InvalidConfig(format!(
                "{} leftover tokens but V mod s = {}",
                leftovers.len(),
                vocab_size % tuple_size
            )));
        }
        Ok(TupleMapping {
            tuples,
            representatives,
            leftovers,
            tuple_of,
            tuple_size,
            vocab_size,
        })
    }

    pub fn tuple_size(&self) -> usize {
        self.tuple_size
    }

    pub fn tuples(&self) -> &[Vec<u32>] {
        &self.tuples
    }

    pub fn leftovers(&self) -> &BTreeSet<u32> {
        &self.leftovers
    }

    pub fn representative(&self, tuple_index: usize) -> u32 {
        self.representatives[tuple_index]
    }

    /// The id `id` maps to: its tuple's representative, or itself when
    /// it is a leftover.
    pub fn image(&self, id: u32) -> u32 {
        match self.tuple_of.get(&id) {
            Some(&idx) => self.representatives[idx],
            None => id,
        }
    }

    /// True when applying the mapping leaves `id` unchanged.
    pub fn is_fixed(&self, id: u32) -> bool {
        self.image(id) == id
    }

    /// Members of the tuple represented by `observed`, in tuple order.
    /// Returns `None` when `observed` is a leftover; errors when it is a
    /// tuple member but not the representative (a mapping violation
    /// upstream of the attacker).
    pub fn members_of_observed(&self, observed: u32, vocab: &Vocabulary) -> Result<Option<&[u32]>> {
        match self.tuple_of.get(&observed) {
            None => Ok(None),
            Some(&idx) => {
                if self.representatives[idx] == observed {
                    Ok(Some(&self.tuples[idx]))
                } else {
                    Err(Error::NonRepresentativeObserved(
                        vocab.token(observed).as_str().into(),
                    ))
                }
            }
        }
    }

    /// Replaces each in-vocabulary token with its tuple's representative;
    /// leftovers and out-of-vocabulary tokens pass through unchanged.
    pub fn apply(&self, seq: &[Token], vocab: &Vocabulary) -> TokenSequence {
        seq.iter()
            .map(|t| match vocab.id(t) {
                Some(id) => vocab.token(self.image(id)).clone(),
                None => t.clone(),
            })
            .collect()
    }

    /// Corpus-mass fraction of token occurrences the mapping leaves
    /// unchanged: representatives, leftovers, and OOV tokens all count.
    pub fn unchanged_fraction(&self, corpus_freq: &FrequencyTable, vocab: &Vocabulary) -> Result<f64> {
        if corpus_freq.total() == 0 {
            return Err(Error::ZeroTotal);
        }
        let unchanged: u64 = corpus_freq
            .iter()
            .filter(|(t, _)| match vocab.id(t) {
                Some(id) => self.is_fixed(id),
                None => true,
            })
            .map(|(_, c)| c)
            .sum();
        Ok(unchanged as f64 / corpus_freq.total() as f64)
    }

    /// TSV serialization: one tuple per line as
    /// `representative<TAB>member<TAB>member[<TAB>member]`, leftover tokens
    /// alone on a line, `#` comment lines allowed.
    pub fn to_tsv(&self, vocab: &Vocabulary) -> String {
        let mut out = String::new();
        for (idx, tuple) in self.tuples.iter().enumerate() {
            out.push_str(vocab.token(self.representatives[idx]).as_str());
            for &id in tuple {
                out.push('\t');
                out.push_str(vocab.token(id).as_str());
            }
            out.push('\n');
        }
        for &id in &self.leftovers {
            out.push_str(vocab.token(id).as_str());
            out.push('\n');
        }
        out
    }

    /// Parses a mapping file against a known vocabulary, validating every
    /// invariant.
    pub fn from_tsv(text: &str, vocab: &Vocabulary) -> Result<Self> {
        let mut tuples = Vec::new();
        let mut representatives = Vec::new();
        let mut leftovers = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let resolve = |surface: &str| -> Result<u32> {
                let token = Token::new(surface)
                    .map_err(|_| Error::format(lineno, "empty token field"))?;
                vocab
                    .id(&token)
                    .ok_or_else(|| Error::UnknownToken(surface.to_string()))
            };
            match fields.len() {
                1 => {
                    leftovers.insert(resolve(fields[0])?);
                }
                3 | 4 => {
                    let rep = resolve(fields[0])?;
                    let members = fields[1..]
                        .iter()
                        .map(|f| resolve(f))
                        .collect::<Result<Vec<u32>>>()?;
                    if !members.contains(&rep) {
                        return Err(Error::RepresentativeNotInTuple(fields[0].to_string()));
                    }
                    tuples.push(members);
                    representatives.push(rep);
                }
                n => {
                    return Err(Error::format(
                        lineno,
                        format!("expected 1, 3, or 4 tab-separated fields, got {n}"),
                    ));
                }
            }
        }
        Self::new(tuples, representatives, leftovers, vocab)
    }

    /// Parses a mapping file whose vocabulary is defined implicitly by the
    /// tokens it lists, in order of first appearance.
    pub fn from_tsv_self_described(text: &str) -> Result<(Self, Vocabulary)> {
        let mut tokens = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for line in text.lines() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let surfaces: &[&str] = if fields.len() == 1 { &fields } else { &fields[1..] };
            for surface in surfaces {
                if seen.insert(surface.to_string()) {
                    tokens.push(Token::new(*surface)?);
                }
            }
        }
        let vocab = Vocabulary::from_tokens(tokens)?;
        let mapping = Self::from_tsv(text, &vocab)?;
        Ok((mapping, vocab))
    }
}

/// Uniformly random partition into tuples of size `s` with uniformly
/// random representatives, deterministic given `seed`.
pub fn gen_random(vocab: &Vocabulary, s: usize, seed: u64) -> Result<TupleMapping> {
    if !(2..=3).contains(&s) {
        return Err(Error::InvalidConfig(format!("tuple size must be 2 or 3, got {s}")));
    }
    if vocab.len() < s {
        return Err(Error::VocabularyTooSmall {
            size: vocab.len(),
            tuple_size: s,
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut ids: Vec<u32> = (0..vocab.len() as u32).collect();
    ids.shuffle(&mut rng);
    let full = vocab.len() / s * s;
    let mut tuples = Vec::with_capacity(full / s);
    let mut representatives = Vec::with_capacity(full / s);
    for chunk in ids[..full].chunks_exact(s) {
        let tuple = chunk.to_vec();
        representatives.push(tuple[rng.random_range(0..s)]);
        tuples.push(tuple);
    }
    let leftovers: BTreeSet<u32> = ids[full..].iter().copied().collect();
    TupleMapping::new(tuples, representatives, leftovers, vocab)
}

/// Frequency-rank pairing: with vocabulary ranks `1..=V` in descending
/// frequency, rank `k` pairs with rank `k + ceil(V/2)` for
/// `1 <= k <= floor(V/2)`; odd `V` leaves the median-ranked token mapping
/// to itself. The representative is the higher-frequency member under
/// `HighFrequency` and the lower-frequency member under `LowFrequency`.
///
/// Vocabulary tokens absent from `freq` rank after all counted tokens,
/// lexicographically among themselves.
pub fn gen_frequency(
    freq: &FrequencyTable,
    vocab: &Vocabulary,
    policy: RepresentativePolicy,
) -> Result<TupleMapping> {
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let rep_high = match policy {
        RepresentativePolicy::HighFrequency => true,
        RepresentativePolicy::LowFrequency => false,
        RepresentativePolicy::Random => {
            return Err(Error::InvalidConfig(
                "frequency mapping requires a high- or low-frequency policy".into(),
            ));
        }
    };
    let mut ranked: Vec<u32> = (0..vocab.len() as u32).collect();
    ranked.sort_by(|&a, &b| {
        let (ta, tb) = (vocab.token(a), vocab.token(b));
        freq.count(tb)
            .cmp(&freq.count(ta))
            .then_with(|| ta.cmp(tb))
    });
    let v = vocab.len();
    let half = v / 2;
    let offset = v.div_ceil(2);
    let mut tuples = Vec::with_capacity(half);
    let mut representatives = Vec::with_capacity(half);
    for k in 0..half {
        let high = ranked[k];
        let low = ranked[k + offset];
        tuples.push(vec![high, low]);
        representatives.push(if rep_high { high } else { low });
    }
    let mut leftovers = BTreeSet::new();
    if v % 2 == 1 {
        leftovers.insert(ranked[half]);
    }
    TupleMapping::new(tuples, representatives, leftovers, vocab)
}
