//! Token-level privacy-preserving text manipulation.
//!
//! The toolkit covers three obfuscation families and the attacks used to
//! evaluate them, all operating on local resources:
//!
//! - [`mapper`]: many-to-one tuple mappings over the vocabulary (random
//!   pairs/triplets and frequency-rank pairings);
//! - [`stencil`]: contextualized substitution via gaussian-weighted
//!   quasi-embeddings projected to the nearest different token;
//! - [`noise`]: the context-free baseline perturbing token embeddings with
//!   Gamma-magnitude, uniform-direction noise;
//! - [`attacker`]: the oracle beam-search reconstruction attack with
//!   nucleus-style pruning, and nearest-neighbor token inversion;
//! - [`lm`]: the n-gram scorer behind the oracle attacker;
//! - [`metrics`]: MRR, Pr@k, and token-level edit distance.

pub mod attacker;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod lm;
pub mod mapper;
pub mod metrics;
pub mod noise;
pub mod stencil;

pub use corpus::{Token, TokenSequence};
pub use embedding::{EmbeddingTable, Metric, Vocabulary};
pub use error::{Error, Result};
