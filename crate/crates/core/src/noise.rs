//! Context-free noise baseline: token embeddings are perturbed by a noise
//! vector with Gamma-distributed magnitude and uniform direction, then
//! projected back to the nearest vocabulary token. Unlike the stencil, the
//! original token is not excluded from the projection.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::corpus::{Token, TokenSequence};
use crate::embedding::{EmbeddingTable, Metric};
use crate::error::{Error, Result};

/// Noise mechanism parameters. `eta` is the inverse noise scale: larger
/// values mean smaller perturbations (expected magnitude `d / eta`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub eta: f64,
    pub metric: Metric,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(eta: f64, metric: Metric, seed: u64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::InvalidConfig(format!("eta must be positive, got {eta}")));
        }
        Ok(NoiseConfig { eta, metric, seed })
    }
}

/// Draws `r * u` with `r ~ Gamma(shape d, scale 1/eta)` and `u` uniform on
/// the unit hypersphere, so the vector's euclidean norm equals `r`.
pub fn sample_noise<R: Rng + ?Sized>(d: usize, eta: f64, rng: &mut R) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::InvalidConfig("noise dimension must be positive".into()));
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidConfig(format!("eta must be positive, got {eta}")));
    }
    let gamma = Gamma::new(d as f64, 1.0 / eta)
        .map_err(|e| Error::InvalidConfig(format!("gamma parameters: {e}")))?;
    let magnitude = gamma.sample(rng);
    let direction = sample_unit_direction(d, rng);
    Ok(direction.into_iter().map(|u| u * magnitude).collect())
}

/// Uniform point on the unit (d-1)-sphere via a normalized standard
/// gaussian vector.
pub fn sample_unit_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Perturbs each token embedding with a fresh noise draw and replaces the
/// token by the nearest vocabulary entry to the perturbed vector.
///
/// `sequence_index` identifies the sequence within a dataset; each
/// position gets its own rng stream derived from
/// `(seed, sequence_index, position)`, so the result is independent of
/// evaluation order and parallel scheduling.
pub fn privatize_noise(
    seq: &[Token],
    table: &EmbeddingTable,
    config: &NoiseConfig,
    sequence_index: u64,
) -> Result<TokenSequence> {
    NoiseConfig::new(config.eta, config.metric, config.seed)?;
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
    let empty = HashSet::new();
    let mut out = Vec::with_capacity(seq.len());
    for (pos, &id) in ids.iter().enumerate() {
        let mut rng = position_rng(config.seed, sequence_index, pos as u64);
        let noise = sample_noise(table.dim(), config.eta, &mut rng)?;
        let query: Vec<f64> = table
            .row(id)
            .iter()
            .zip(&noise)
            .map(|(v, n)| v + n)
            .collect();
        let hit = table.nearest(&query, config.metric, &empty, 1)?;
        out.push(table.vocab().token(hit[0].0).clone());
    }
    Ok(out)
}

/// Derives an independent rng stream for one token position.
pub fn position_rng(seed: u64, sequence_index: u64, position: u64) -> ChaCha12Rng {
    let mixed = splitmix64(splitmix64(splitmix64(seed) ^ sequence_index) ^ position);
    ChaCha12Rng::seed_from_u64(mixed)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}
