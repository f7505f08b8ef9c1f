//! Privacy/utility measurement: MRR, Pr@k, and token-level edit distance.

use crate::corpus::Token;
use crate::error::{Error, Result};

/// Mean reciprocal rank. `None` means the truth was absent from the
/// ranking and contributes 0.
pub fn mrr(ranks: &[Option<usize>]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum: f64 = ranks
        .iter()
        .map(|r| match r {
            Some(rank) => 1.0 / *rank as f64,
            None => 0.0,
        })
        .sum();
    Ok(sum / ranks.len() as f64)
}

/// Fraction of true entries.
pub fn precision_at_k(hits: &[bool]) -> Result<f64> {
    if hits.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(hits.iter().filter(|h| **h).count() as f64 / hits.len() as f64)
}

/// Levenshtein distance over whole tokens with unit-cost insert, delete,
/// and substitute.
pub fn token_edit_distance(a: &[Token], b: &[Token]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, ta) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, tb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ta != tb);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}
