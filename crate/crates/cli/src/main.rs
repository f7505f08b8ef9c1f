use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use tokpriv::attacker::{self, AttackConfig};
use tokpriv::corpus::{self, FrequencyTable, TokenSequence, TokenizerConfig};
use tokpriv::lm::{self, NGramModel, Smoothing};
use tokpriv::mapper::{self, RepresentativePolicy, TupleMapping};
use tokpriv::noise::{privatize_noise, NoiseConfig};
use tokpriv::stencil::{privatize_stencil, StencilConfig};
use tokpriv::{EmbeddingTable, Metric, Vocabulary};

/// Token-level privacy-preserving text manipulation toolkit.
#[derive(Parser)]
#[command(name = "tokpriv", version, about)]
struct Cli {
    /// Number of worker threads (default: one per core)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count token frequencies over a corpus (one document per line)
    BuildFreq {
        /// Corpus file, UTF-8 plain text, one document per line
        #[arg(long)]
        input: PathBuf,
        /// Output frequency file, TSV `token<TAB>count`
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        tokenizer: TokenizerArgs,
    },
    /// Generate a tuple mapping from a frequency file
    GenMapping {
        #[arg(long, value_enum)]
        kind: MappingKind,
        /// Frequency file (TSV) defining the vocabulary and ranks
        #[arg(long)]
        freq: PathBuf,
        /// Seed for the random kinds
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train an n-gram language model on a corpus
    LmTrain {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
        /// `add_k:0.1` or `interp:0.6,0.3,0.1` (lambdas highest order first)
        #[arg(long, default_value = "interp:0.6,0.3,0.1")]
        smoothing: String,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        tokenizer: TokenizerArgs,
    },
    /// Privatize the text column of a TSV dataset (`label<TAB>text`)
    Privatize {
        #[arg(long, value_enum)]
        mapper: MapperKind,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Mapping file (tuple mapper)
        #[arg(long)]
        mapping: Option<PathBuf>,
        /// Embedding file (stencil/pstencil/noise mappers)
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Window size n+1 (stencil/pstencil)
        #[arg(long, default_value_t = 9)]
        window: usize,
        /// Gaussian standard deviation (stencil/pstencil)
        #[arg(long, default_value_t = 0.8)]
        sigma: f64,
        /// Inverse noise scale (noise mapper)
        #[arg(long)]
        eta: Option<f64>,
        /// Seed (noise mapper)
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = MetricArg::Euclidean)]
        metric: MetricArg,
        #[command(flatten)]
        tokenizer: TokenizerArgs,
    },
    /// Run a reconstruction attack and write a JSON report
    Attack {
        #[command(subcommand)]
        attack: AttackCommand,
    },
    /// Report unchanged-token fraction and/or attack metrics as JSON
    Eval {
        /// Mapping file to evaluate
        #[arg(long)]
        mapping: Option<PathBuf>,
        /// Frequency file providing corpus mass (required with --mapping)
        #[arg(long)]
        freq: Option<PathBuf>,
        /// Attack report whose aggregates should be included
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum AttackCommand {
    /// Beam-search reconstruction with full knowledge of the mapping
    Oracle {
        #[arg(long)]
        mapping: PathBuf,
        /// Scorer file (trained n-gram model or lookup table)
        #[arg(long)]
        lm: PathBuf,
        /// Nucleus pruning threshold in (0,1]
        #[arg(long, default_value_t = 0.85)]
        pi: f64,
        /// Optional hard cap on the beam size
        #[arg(long)]
        max_beam: Option<usize>,
        /// Privatized dataset (TSV)
        #[arg(long)]
        input: PathBuf,
        /// Original dataset (TSV)
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Also report edit distance normalized by truth length
        #[arg(long)]
        normalize: bool,
        #[command(flatten)]
        tokenizer: TokenizerArgs,
    },
    /// Nearest-neighbor token inversion
    Nn {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, value_enum, default_value_t = MetricArg::Euclidean)]
        metric: MetricArg,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        normalize: bool,
        #[command(flatten)]
        tokenizer: TokenizerArgs,
    },
}

#[derive(Args)]
struct TokenizerArgs {
    /// Lowercase input before tokenizing
    #[arg(long)]
    lowercase: bool,
    /// Split punctuation characters into their own tokens
    #[arg(long)]
    split_punctuation: bool,
    /// Input is already tokenized, one token per whitespace gap
    #[arg(long)]
    pretokenized: bool,
}

impl TokenizerArgs {
    fn config(&self) -> TokenizerConfig {
        TokenizerConfig {
            lowercase: self.lowercase,
            split_punctuation: self.split_punctuation,
            pretokenized_input: self.pretokenized,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MappingKind {
    Random2,
    Random3,
    Highfreq,
    Lowfreq,
}

#[derive(Clone, Copy, ValueEnum)]
enum MapperKind {
    Tuple,
    Stencil,
    Pstencil,
    Noise,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Euclidean,
    Cosine,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Metric {
        match m {
            MetricArg::Euclidean => Metric::Euclidean,
            MetricArg::Cosine => Metric::Cosine,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::BuildFreq {
            input,
            output,
            tokenizer,
        } => build_freq(&input, &output, &tokenizer.config()),
        Command::GenMapping {
            kind,
            freq,
            seed,
            output,
        } => gen_mapping(kind, &freq, seed, &output),
        Command::LmTrain {
            input,
            order,
            smoothing,
            output,
            tokenizer,
        } => lm_train(&input, order, &smoothing, &output, &tokenizer.config()),
        Command::Privatize {
            mapper,
            input,
            output,
            mapping,
            embeddings,
            window,
            sigma,
            eta,
            seed,
            metric,
            tokenizer,
        } => privatize(
            mapper,
            &input,
            &output,
            mapping.as_deref(),
            embeddings.as_deref(),
            window,
            sigma,
            eta,
            seed,
            metric.into(),
            &tokenizer.config(),
        ),
        Command::Attack { attack } => match attack {
            AttackCommand::Oracle {
                mapping,
                lm,
                pi,
                max_beam,
                input,
                truth,
                output,
                k,
                normalize,
                tokenizer,
            } => attack_oracle(
                &mapping,
                &lm,
                pi,
                max_beam,
                &input,
                &truth,
                &output,
                k,
                normalize,
                &tokenizer.config(),
            ),
            AttackCommand::Nn {
                embeddings,
                k,
                metric,
                input,
                truth,
                output,
                normalize,
                tokenizer,
            } => attack_nn(
                &embeddings,
                k,
                metric.into(),
                &input,
                &truth,
                &output,
                normalize,
                &tokenizer.config(),
            ),
        },
        Command::Eval {
            mapping,
            freq,
            report,
        } => eval(mapping.as_deref(), freq.as_deref(), report.as_deref()),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// `label<TAB>text` records, one per line, no header.
fn read_dataset(path: &Path, config: &TokenizerConfig) -> Result<Vec<(String, TokenSequence)>> {
    let text = read(path)?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (label, body) = line
            .split_once('\t')
            .with_context(|| format!("{}:{}: expected `label<TAB>text`", path.display(), i + 1))?;
        records.push((label.to_string(), corpus::tokenize(body, config)));
    }
    Ok(records)
}

fn write_dataset(path: &Path, records: &[(String, TokenSequence)]) -> Result<()> {
    let mut out = String::new();
    for (label, tokens) in records {
        out.push_str(label);
        out.push('\t');
        out.push_str(&corpus::detokenize(tokens));
        out.push('\n');
    }
    write(path, &out)
}

fn read_corpus(path: &Path, config: &TokenizerConfig) -> Result<Vec<TokenSequence>> {
    let text = read(path)?;
    Ok(text
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| corpus::tokenize(l, config))
        .collect())
}

/// Frequency-file vocabulary in descending-rank order, so ids are stable
/// across runs.
fn vocab_from_freq(freq: &FrequencyTable) -> Result<Vocabulary> {
    let ranked = corpus::rank_descending(freq)?;
    Ok(Vocabulary::from_tokens(ranked)?)
}

fn build_freq(input: &Path, output: &Path, config: &TokenizerConfig) -> Result<()> {
    let docs = read_corpus(input, config)?;
    let table = docs
        .par_iter()
        .fold(FrequencyTable::new, |mut acc, doc| {
            acc.add_sequence(doc);
            acc
        })
        .reduce(FrequencyTable::new, |mut a, b| {
            a.merge(&b);
            a
        });
    write(output, &table.to_tsv())
}

fn gen_mapping(kind: MappingKind, freq: &Path, seed: Option<u64>, output: &Path) -> Result<()> {
    let table = FrequencyTable::from_tsv(&read(freq)?)?;
    let vocab = vocab_from_freq(&table)?;
    let mapping = match kind {
        MappingKind::Random2 | MappingKind::Random3 => {
            let seed = seed.context("--seed is required for the random mapping kinds")?;
            let s = if matches!(kind, MappingKind::Random2) { 2 } else { 3 };
            mapper::gen_random(&vocab, s, seed)?
        }
        MappingKind::Highfreq => {
            mapper::gen_frequency(&table, &vocab, RepresentativePolicy::HighFrequency)?
        }
        MappingKind::Lowfreq => {
            mapper::gen_frequency(&table, &vocab, RepresentativePolicy::LowFrequency)?
        }
    };
    write(output, &mapping.to_tsv(&vocab))
}

fn parse_smoothing(spec: &str) -> Result<Smoothing> {
    if let Some(k) = spec.strip_prefix("add_k:") {
        return Ok(Smoothing::AddK(k.parse().context("bad add_k value")?));
    }
    if let Some(lambdas) = spec.strip_prefix("interp:") {
        let lambdas = lambdas
            .split(',')
            .map(|l| l.parse::<f64>().context("bad lambda"))
            .collect::<Result<Vec<f64>>>()?;
        return Ok(Smoothing::Interpolated(lambdas));
    }
    bail!("smoothing must be `add_k:K` or `interp:L1,...,Ln`, got `{spec}`")
}

fn lm_train(
    input: &Path,
    order: usize,
    smoothing: &str,
    output: &Path,
    config: &TokenizerConfig,
) -> Result<()> {
    let docs = read_corpus(input, config)?;
    let model = NGramModel::train(&docs, order, parse_smoothing(smoothing)?)?;
    write(output, &model.to_json()?)
}

#[allow(clippy::too_many_arguments)]
fn privatize(
    mapper: MapperKind,
    input: &Path,
    output: &Path,
    mapping: Option<&Path>,
    embeddings: Option<&Path>,
    window: usize,
    sigma: f64,
    eta: Option<f64>,
    seed: Option<u64>,
    metric: Metric,
    config: &TokenizerConfig,
) -> Result<()> {
    let records = read_dataset(input, config)?;
    let load_embeddings = || -> Result<EmbeddingTable> {
        let path = embeddings.context("--embeddings is required for this mapper")?;
        Ok(EmbeddingTable::parse(&read(path)?)?)
    };
    let privatized: Vec<(String, TokenSequence)> = match mapper {
        MapperKind::Tuple => {
            let path = mapping.context("--mapping is required for the tuple mapper")?;
            let (mapping, vocab) = TupleMapping::from_tsv_self_described(&read(path)?)?;
            records
                .par_iter()
                .map(|(label, tokens)| (label.clone(), mapping.apply(tokens, &vocab)))
                .collect()
        }
        MapperKind::Stencil | MapperKind::Pstencil => {
            let table = load_embeddings()?;
            let punctuated = matches!(mapper, MapperKind::Pstencil);
            let cfg = StencilConfig::new(window, sigma, punctuated, metric)?;
            records
                .par_iter()
                .map(|(label, tokens)| {
                    Ok((label.clone(), privatize_stencil(tokens, &table, &cfg)?))
                })
                .collect::<Result<_>>()?
        }
        MapperKind::Noise => {
            let table = load_embeddings()?;
            let eta = eta.context("--eta is required for the noise mapper")?;
            let seed = seed.context("--seed is required for the noise mapper")?;
            let cfg = NoiseConfig::new(eta, metric, seed)?;
            records
                .par_iter()
                .enumerate()
                .map(|(i, (label, tokens))| {
                    Ok((label.clone(), privatize_noise(tokens, &table, &cfg, i as u64)?))
                })
                .collect::<Result<_>>()?
        }
    };
    write_dataset(output, &privatized)
}

#[allow(clippy::too_many_arguments)]
fn attack_oracle(
    mapping: &Path,
    lm_path: &Path,
    pi: f64,
    max_beam: Option<usize>,
    input: &Path,
    truth: &Path,
    output: &Path,
    k: usize,
    normalize: bool,
    config: &TokenizerConfig,
) -> Result<()> {
    let (mapping, vocab) = TupleMapping::from_tsv_self_described(&read(mapping)?)?;
    let scorer = lm::load_scorer(&read(lm_path)?)?;
    let attack_config = AttackConfig::new(pi, max_beam, scorer.as_ref())?;
    let observed: Vec<TokenSequence> = read_dataset(input, config)?
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    let gold: Vec<TokenSequence> = read_dataset(truth, config)?
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    let report = attacker::evaluate_oracle(
        &observed,
        &gold,
        &mapping,
        &vocab,
        &attack_config,
        k,
        normalize,
    )?;
    write(output, &report.to_json()?)
}

#[allow(clippy::too_many_arguments)]
fn attack_nn(
    embeddings: &Path,
    k: usize,
    metric: Metric,
    input: &Path,
    truth: &Path,
    output: &Path,
    normalize: bool,
    config: &TokenizerConfig,
) -> Result<()> {
    let table = EmbeddingTable::parse(&read(embeddings)?)?;
    let privatized: Vec<TokenSequence> = read_dataset(input, config)?
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    let gold: Vec<TokenSequence> = read_dataset(truth, config)?
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    let report = attacker::evaluate_nn(&privatized, &gold, &table, k, metric, normalize)?;
    write(output, &report.to_json()?)
}

fn eval(mapping: Option<&Path>, freq: Option<&Path>, report: Option<&Path>) -> Result<()> {
    let mut out = BTreeMap::new();
    out.insert(
        "schema_version".to_string(),
        serde_json::Value::from(1u32),
    );
    match (mapping, freq) {
        (Some(mapping), Some(freq)) => {
            let table = FrequencyTable::from_tsv(&read(freq)?)?;
            let (mapping, vocab) = TupleMapping::from_tsv_self_described(&read(mapping)?)?;
            let fraction = mapping.unchanged_fraction(&table, &vocab)?;
            out.insert(
                "unchanged_fraction".to_string(),
                serde_json::Value::from(fraction),
            );
        }
        (Some(_), None) | (None, Some(_)) => {
            bail!("--mapping and --freq must be given together")
        }
        (None, None) => {}
    }
    if let Some(report) = report {
        let report = attacker::AttackReport::from_json(&read(report)?)?;
        out.insert(
            "attack".to_string(),
            serde_json::Value::from(report.attack.clone()),
        );
        out.insert(
            "aggregates".to_string(),
            serde_json::to_value(&report.aggregates)?,
        );
    }
    if out.len() == 1 {
        bail!("nothing to evaluate: pass --mapping/--freq and/or --report");
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}
