//! Contextualized privatization: a gaussian-weighted quasi-embedding is
//! formed over each token's neighborhood and projected back to the nearest
//! token that differs from the original.

use std::collections::HashSet;

use crate::corpus::{Token, TokenSequence};
use crate::embedding::{EmbeddingTable, Metric};
use crate::error::{Error, Result};

/// Parameters of the stencil obfuscator. `window` is the total number of
/// tokens considered (`n+1`, odd), `sigma` the standard deviation of the
/// gaussian kernel in token-index units. The punctuated variant zeroes the
/// center weight so the original token never contributes to its own
/// quasi-embedding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilConfig {
    pub window: usize,
    pub sigma: f64,
    pub punctuated: bool,
    pub metric: Metric,
}

impl StencilConfig {
    pub fn new(window: usize, sigma: f64, punctuated: bool, metric: Metric) -> Result<Self> {
        let cfg = StencilConfig {
            window,
            sigma,
            punctuated,
            metric,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "window must be odd and positive, got {}",
                self.window
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.punctuated && self.window < 3 {
            return Err(Error::InvalidConfig(
                "punctuated stencil requires window >= 3".into(),
            ));
        }
        Ok(())
    }
}

/// Normalized gaussian kernel weights over an odd window:
/// `f_i` proportional to `exp(-(i-c)^2 / (2 sigma^2))` with `c` the center
/// index. The punctuated variant zeroes the center before normalization.
pub fn gaussian_weights(window: usize, sigma: f64, punctuated: bool) -> Result<Vec<f64>> {
    StencilConfig::new(window, sigma, punctuated, Metric::Euclidean)?;
    let center = (window / 2) as isize;
    let mut exponents: Vec<f64> = (0..window as isize)
        .map(|i| {
            let off = (i - center) as f64;
            -off * off / (2.0 * sigma * sigma)
        })
        .collect();
    if punctuated {
        exponents[center as usize] = f64::NEG_INFINITY;
    }
    // factor out the largest exponent so tiny sigmas don't underflow the
    // whole kernel to zero
    let peak = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = exponents.iter().map(|e| (e - peak).exp()).collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    Ok(weights)
}

/// Applies the stencil to every position of `seq`. The window is truncated
/// at sequence edges and the surviving weights renormalized to sum 1; the
/// output token at position `k` is the token nearest the quasi-embedding,
/// excluding the original `t_k`, so output differs from input everywhere.
pub fn privatize_stencil(
    seq: &[Token],
    table: &EmbeddingTable,
    config: &StencilConfig,
) -> Result<TokenSequence> {
    config.validate()?;
    let weights = gaussian_weights(config.window, config.sigma, config.punctuated)?;
    let ids: Vec<u32> = seq
        .iter()
        .enumerate()
        .map(|(pos, t)| {
            table.vocab().id(t).ok_or_else(|| Error::OutOfVocabulary {
                token: t.as_str().to_string(),
                position: pos,
            })
        })
        .collect::<Result<_>>()?;
    let half = config.window / 2;
    let mut out = Vec::with_capacity(seq.len());
    for k in 0..seq.len() {
        let query = quasi_embedding(&ids, k, half, &weights, table)?;
        let hit = table.nearest(&query, config.metric, &HashSet::from([ids[k]]), 1)?;
        out.push(table.vocab().token(hit[0].0).clone());
    }
    Ok(out)
}

fn quasi_embedding(
    ids: &[u32],
    k: usize,
    half: usize,
    weights: &[f64],
    table: &EmbeddingTable,
) -> Result<Vec<f64>> {
    let lo = k.saturating_sub(half);
    let hi = (k + half).min(ids.len() - 1);
    let mut total = 0.0;
    for pos in lo..=hi {
        total += weights[pos + half - k];
    }
    if total == 0.0 {
        // punctuated window with no in-bounds neighbor: quasi-embedding undefined
        return Err(Error::InvalidConfig(
            "punctuated stencil has no in-bounds neighbors at this position".into(),
        ));
    }
    let mut query = vec![0.0; table.dim()];
    for pos in lo..=hi {
        let w = weights[pos + half - k] / total;
        if w == 0.0 {
            continue;
        }
        for (q, v) in query.iter_mut().zip(table.row(ids[pos])) {
            *q += w * v;
        }
    }
    Ok(query)
}
