//! Reconstruction attacks: the oracle beam-search attacker over tuple
//! mappings and the nearest-neighbor token-inversion attacker, plus the
//! report aggregation both feed.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Token, TokenSequence};
use crate::embedding::{EmbeddingTable, Metric, Vocabulary};
use crate::error::{Error, Result};
use crate::lm::SequenceScorer;
use crate::mapper::TupleMapping;
use crate::metrics;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One scored hypothesis on the beam. `beam_prob` is `exp(log_prob)`
/// normalized over the live beam; across the beam they sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamCandidate {
    pub tokens: TokenSequence,
    pub log_prob: f64,
    pub beam_prob: f64,
}

/// Oracle-attack parameters: the nucleus threshold `pi` in (0,1], an
/// optional hard beam cap, and the scorer.
pub struct AttackConfig<'a> {
    pub pi: f64,
    pub max_beam: Option<usize>,
    pub scorer: &'a dyn SequenceScorer,
}

impl<'a> AttackConfig<'a> {
    pub fn new(pi: f64, max_beam: Option<usize>, scorer: &'a dyn SequenceScorer) -> Result<Self> {
        if !(pi > 0.0 && pi <= 1.0) {
            return Err(Error::InvalidConfig(format!("pi must be in (0,1], got {pi}")));
        }
        Ok(AttackConfig { pi, max_beam, scorer })
    }
}

fn id_key(tokens: &[Token], vocab: &Vocabulary) -> Vec<u32> {
    tokens
        .iter()
        .map(|t| vocab.id(t).unwrap_or(u32::MAX))
        .collect()
}

fn renormalize(beam: &mut [BeamCandidate]) {
    if beam.is_empty() {
        return;
    }
    let max = beam
        .iter()
        .map(|c| c.log_prob)
        .fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = beam.iter().map(|c| (c.log_prob - max).exp()).sum();
    for c in beam.iter_mut() {
        c.beam_prob = (c.log_prob - max).exp() / total;
    }
}

/// Extends every prefix on the beam by the candidates the observed token
/// admits: all members of its tuple when it is a representative, or just
/// itself when it is a leftover or out-of-vocabulary token. Scores come
/// from the scorer; beam probabilities are renormalized afterward.
pub fn expand(
    beam: &[BeamCandidate],
    mapping: &TupleMapping,
    vocab: &Vocabulary,
    observed: &Token,
    scorer: &dyn SequenceScorer,
) -> Result<Vec<BeamCandidate>> {
    let candidates: Vec<Token> = match vocab.id(observed) {
        Some(id) => match mapping.members_of_observed(id, vocab)? {
            Some(members) => members.iter().map(|&m| vocab.token(m).clone()).collect(),
            None => vec![observed.clone()],
        },
        None => vec![observed.clone()],
    };
    let mut next: Vec<BeamCandidate> = beam
        .iter()
        .flat_map(|prefix| {
            candidates.iter().map(move |tok| {
                let lp = prefix.log_prob + scorer.extension_log_prob(&prefix.tokens, tok);
                let mut tokens = prefix.tokens.clone();
                tokens.push(tok.clone());
                BeamCandidate {
                    tokens,
                    log_prob: lp,
                    beam_prob: 0.0,
                }
            })
        })
        .collect();
    renormalize(&mut next);
    Ok(next)
}

/// Nucleus pruning: sorts by beam probability (descending, ties by
/// ascending token-id sequence) and keeps the shortest top segment whose
/// cumulative probability reaches `pi`, then renormalizes. `pi = 1.0`
/// keeps everything.
pub fn prune(mut beam: Vec<BeamCandidate>, pi: f64, vocab: &Vocabulary) -> Vec<BeamCandidate> {
    beam.sort_by(|a, b| {
        b.beam_prob
            .total_cmp(&a.beam_prob)
            .then_with(|| id_key(&a.tokens, vocab).cmp(&id_key(&b.tokens, vocab)))
    });
    let mut cumulative = 0.0;
    let mut keep = beam.len();
    // pi = 1.0 admits every candidate: in exact arithmetic no proper
    // subset reaches full mass, so don't let rounding truncate the tail
    if pi < 1.0 {
        for (i, c) in beam.iter().enumerate() {
            cumulative += c.beam_prob;
            if cumulative >= pi {
                keep = i + 1;
                break;
            }
        }
    }
    beam.truncate(keep);
    renormalize(&mut beam);
    beam
}

/// Runs the beam-search reconstruction left-to-right over the observed
/// sequence, alternating expand, score, and prune, and returns all
/// surviving candidates ranked by full-sequence log-probability.
pub fn oracle_attack(
    observed: &[Token],
    mapping: &TupleMapping,
    vocab: &Vocabulary,
    config: &AttackConfig,
) -> Result<Vec<BeamCandidate>> {
    if observed.is_empty() {
        return Ok(Vec::new());
    }
    let mut beam = vec![BeamCandidate {
        tokens: Vec::new(),
        log_prob: 0.0,
        beam_prob: 1.0,
    }];
    for token in observed {
        beam = expand(&beam, mapping, vocab, token, config.scorer)?;
        beam = prune(beam, config.pi, vocab);
        if let Some(cap) = config.max_beam {
            if beam.len() > cap {
                beam.truncate(cap);
                renormalize(&mut beam);
            }
        }
    }
    beam.sort_by(|a, b| {
        b.log_prob
            .total_cmp(&a.log_prob)
            .then_with(|| id_key(&a.tokens, vocab).cmp(&id_key(&b.tokens, vocab)))
    });
    renormalize(&mut beam);
    Ok(beam)
}

/// Token-inversion attack: for each privatized token, the `k` nearest
/// vocabulary tokens to its embedding, excluding the token itself.
pub fn nn_attack(
    privatized: &[Token],
    table: &EmbeddingTable,
    k: usize,
    metric: Metric,
) -> Result<Vec<Vec<(u32, f64)>>> {
    privatized
        .iter()
        .enumerate()
        .map(|(pos, t)| {
            let id = table.vocab().id(t).ok_or_else(|| Error::OutOfVocabulary {
                token: t.as_str().to_string(),
                position: pos,
            })?;
            table.nearest(table.row(id), metric, &HashSet::from([id]), k)
        })
        .collect()
}

/// Per-sequence attack outcome. `rank` is the sequence-level rank of the
/// truth for the oracle attack; `token_ranks` carries per-token recovery
/// ranks for the nearest-neighbor attack.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SequenceRecord {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub token_ranks: Option<Vec<Option<usize>>>,
    pub top_prediction: Vec<String>,
    pub edit_distance: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Aggregates {
    pub mrr: f64,
    pub k: usize,
    pub precision_at_k: f64,
    pub mean_edit_distance: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_normalized_edit_distance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AttackReport {
    pub schema_version: u32,
    pub attack: String,
    pub records: Vec<SequenceRecord>,
    pub aggregates: Aggregates,
}

impl AttackReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: AttackReport = serde_json::from_str(text)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::SchemaVersion(report.schema_version));
        }
        Ok(report)
    }
}

/// Runs the oracle attack over a dataset and aggregates sequence-level
/// metrics: MRR and Pr@k of the truth in the candidate ranking and the
/// token edit distance of the top prediction.
pub fn evaluate_oracle(
    observed: &[TokenSequence],
    truth: &[TokenSequence],
    mapping: &TupleMapping,
    vocab: &Vocabulary,
    config: &AttackConfig,
    k: usize,
    normalize_edit: bool,
) -> Result<AttackReport> {
    if observed.len() != truth.len() {
        return Err(Error::InvalidConfig(format!(
            "observed ({}) and truth ({}) sequence counts differ",
            observed.len(),
            truth.len()
        )));
    }
    let records: Vec<SequenceRecord> = observed
        .par_iter()
        .zip(truth.par_iter())
        .enumerate()
        .map(|(index, (obs, gold))| {
            let ranking = oracle_attack(obs, mapping, vocab, config)?;
            let rank = ranking
                .iter()
                .position(|c| &c.tokens == gold)
                .map(|p| p + 1);
            let top: TokenSequence = ranking.first().map(|c| c.tokens.clone()).unwrap_or_default();
            Ok(SequenceRecord {
                index,
                rank,
                token_ranks: None,
                top_prediction: top.iter().map(|t| t.as_str().to_string()).collect(),
                edit_distance: metrics::token_edit_distance(&top, gold),
            })
        })
        .collect::<Result<_>>()?;
    let ranks: Vec<Option<usize>> = records.iter().map(|r| r.rank).collect();
    let hits: Vec<bool> = ranks.iter().map(|r| matches!(r, Some(x) if *x <= k)).collect();
    let aggregates = aggregate(&ranks, &hits, &records, truth, k, normalize_edit)?;
    Ok(AttackReport {
        schema_version: REPORT_SCHEMA_VERSION,
        attack: "oracle".to_string(),
        records,
        aggregates,
    })
}

/// Runs the nearest-neighbor attack over a dataset and aggregates
/// token-level metrics. A token counts as recovered at rank 1 when the
/// privatized token equals the original (the mechanism left it in the
/// clear); otherwise its rank is its 1-based position among the nearest
/// neighbors of the privatized token.
pub fn evaluate_nn(
    privatized: &[TokenSequence],
    truth: &[TokenSequence],
    table: &EmbeddingTable,
    k: usize,
    metric: Metric,
    normalize_edit: bool,
) -> Result<AttackReport> {
    if privatized.len() != truth.len() {
        return Err(Error::InvalidConfig(format!(
            "privatized ({}) and truth ({}) sequence counts differ",
            privatized.len(),
            truth.len()
        )));
    }
    let records: Vec<SequenceRecord> = privatized
        .par_iter()
        .zip(truth.par_iter())
        .enumerate()
        .map(|(index, (obs, gold))| {
            if obs.len() != gold.len() {
                return Err(Error::InvalidConfig(format!(
                    "sequence {index}: privatized length {} != truth length {}",
                    obs.len(),
                    gold.len()
                )));
            }
            let neighbors = nn_attack(obs, table, k, metric)?;
            let token_ranks: Vec<Option<usize>> = obs
                .iter()
                .zip(gold)
                .zip(&neighbors)
                .map(|((priv_tok, gold_tok), nbrs)| {
                    if priv_tok == gold_tok {
                        Some(1)
                    } else {
                        nbrs.iter()
                            .position(|(id, _)| table.vocab().token(*id) == gold_tok)
                            .map(|p| p + 1)
                    }
                })
                .collect();
            let top: TokenSequence = neighbors
                .iter()
                .map(|nbrs| table.vocab().token(nbrs[0].0).clone())
                .collect();
            Ok(SequenceRecord {
                index,
                rank: None,
                token_ranks: Some(token_ranks),
                top_prediction: top.iter().map(|t| t.as_str().to_string()).collect(),
                edit_distance: metrics::token_edit_distance(&top, gold),
            })
        })
        .collect::<Result<_>>()?;
    let ranks: Vec<Option<usize>> = records
        .iter()
        .flat_map(|r| r.token_ranks.clone().unwrap_or_default())
        .collect();
    let hits: Vec<bool> = ranks.iter().map(|r| matches!(r, Some(x) if *x <= k)).collect();
    let aggregates = aggregate(&ranks, &hits, &records, truth, k, normalize_edit)?;
    Ok(AttackReport {
        schema_version: REPORT_SCHEMA_VERSION,
        attack: "nn".to_string(),
        records,
        aggregates,
    })
}

fn aggregate(
    ranks: &[Option<usize>],
    hits: &[bool],
    records: &[SequenceRecord],
    truth: &[TokenSequence],
    k: usize,
    normalize_edit: bool,
) -> Result<Aggregates> {
    let mean_edit = records.iter().map(|r| r.edit_distance as f64).sum::<f64>()
        / records.len().max(1) as f64;
    let mean_normalized = if normalize_edit {
        Some(
            records
                .iter()
                .zip(truth)
                .map(|(r, gold)| r.edit_distance as f64 / gold.len().max(1) as f64)
                .sum::<f64>()
                / records.len().max(1) as f64,
        )
    } else {
        None
    };
    Ok(Aggregates {
        mrr: metrics::mrr(ranks)?,
        k,
        precision_at_k: metrics::precision_at_k(hits)?,
        mean_edit_distance: mean_edit,
        mean_normalized_edit_distance: mean_normalized,
    })
}
