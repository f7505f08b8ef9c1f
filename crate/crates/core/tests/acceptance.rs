//! End-to-end acceptance suite. Each test covers one numbered criterion
//! and prints a single PASS/FAIL line so the whole gate can be read off
//! `cargo test --test acceptance -- --nocapture`.

mod common;

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use common::{enumerate_ranking, random_sequence, random_table, tok, toks, word, zipf_corpus, RandomScorer};
use tokpriv::attacker::{evaluate_nn, oracle_attack, AttackConfig};
use tokpriv::corpus::{build_frequency, rank_descending, FrequencyTable, Token, TokenSequence};
use tokpriv::lm::LookupScorer;
use tokpriv::mapper::{gen_frequency, gen_random, RepresentativePolicy, TupleMapping};
use tokpriv::metrics::{mrr, precision_at_k, token_edit_distance};
use tokpriv::noise::{privatize_noise, sample_noise, NoiseConfig};
use tokpriv::stencil::{gaussian_weights, privatize_stencil, StencilConfig};
use tokpriv::{EmbeddingTable, Metric, Vocabulary};

fn check(n: usize, desc: &str, ok: bool) {
    println!("criterion {n} ({desc}): {}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} ({desc}) failed");
}

fn vocab_of_corpus(corpus: &[TokenSequence]) -> (FrequencyTable, Vocabulary) {
    let freq = build_frequency(corpus.iter());
    let ranked = rank_descending(&freq).unwrap();
    let vocab = Vocabulary::from_tokens(ranked).unwrap();
    (freq, vocab)
}

/// Apply-and-count oracle for the unchanged-token fraction: privatize
/// every sequence and tally positions left identical.
fn unchanged_by_application(
    corpus: &[TokenSequence],
    mapping: &TupleMapping,
    vocab: &Vocabulary,
) -> f64 {
    let mut same = 0u64;
    let mut total = 0u64;
    for seq in corpus {
        let out = mapping.apply(seq, vocab);
        for (a, b) in seq.iter().zip(&out) {
            total += 1;
            if a == b {
                same += 1;
            }
        }
    }
    same as f64 / total as f64
}

#[test]
fn criterion_01_unchanged_fraction_identity() {
    let corpus = zipf_corpus(11, 100_000, 2_000, 1.0, 25);
    let (freq, vocab) = vocab_of_corpus(&corpus);
    let start = std::time::Instant::now();
    let mut ok = true;
    for mapping in [
        gen_random(&vocab, 2, 101).unwrap(),
        gen_random(&vocab, 3, 102).unwrap(),
        gen_frequency(&freq, &vocab, RepresentativePolicy::HighFrequency).unwrap(),
        gen_frequency(&freq, &vocab, RepresentativePolicy::LowFrequency).unwrap(),
    ] {
        let reported = mapping.unchanged_fraction(&freq, &vocab).unwrap();
        let counted = unchanged_by_application(&corpus, &mapping, &vocab);
        ok &= reported == counted;
    }
    ok &= start.elapsed().as_secs_f64() < 1.0;
    check(1, "unchanged-token identity", ok);
}

#[test]
fn criterion_02_random_mapping_expectation() {
    let start = std::time::Instant::now();
    let corpus = zipf_corpus(12, 100_000, 2_000, 1.0, 25);
    let (freq, vocab) = vocab_of_corpus(&corpus);
    let avg = |s: usize| -> f64 {
        (0..20)
            .map(|seed| {
                gen_random(&vocab, s, 500 + seed)
                    .unwrap()
                    .unchanged_fraction(&freq, &vocab)
                    .unwrap()
            })
            .sum::<f64>()
            / 20.0
    };
    let two = avg(2);
    let three = avg(3);
    let ok = (two - 0.50).abs() <= 0.03
        && (three - 1.0 / 3.0).abs() <= 0.03
        && start.elapsed().as_secs_f64() < 30.0;
    check(2, "random-mapping expectation", ok);
    println!("  2-random avg {two:.4}, 3-random avg {three:.4}");
}

#[test]
fn criterion_03_frequency_mapping_identity() {
    // deterministic Zipf(1) profile over an even 10k vocabulary
    let v = 10_000usize;
    let mut freq = FrequencyTable::new();
    for i in 0..v {
        let count = ((1e4 / (i + 1) as f64).round() as usize).max(1);
        freq.add_sequence(&vec![word(i); count]);
    }
    let ranked = rank_descending(&freq).unwrap();
    let vocab = Vocabulary::from_tokens(ranked.clone()).unwrap();
    let top_mass: u64 = ranked[..v / 2].iter().map(|t| freq.count(t)).sum();
    let expected_high = top_mass as f64 / freq.total() as f64;
    let high = gen_frequency(&freq, &vocab, RepresentativePolicy::HighFrequency)
        .unwrap()
        .unchanged_fraction(&freq, &vocab)
        .unwrap();
    let low = gen_frequency(&freq, &vocab, RepresentativePolicy::LowFrequency)
        .unwrap()
        .unchanged_fraction(&freq, &vocab)
        .unwrap();
    let bottom_mass = freq.total() - top_mass;
    let expected_low = bottom_mass as f64 / freq.total() as f64;
    let ok = high == expected_high && low == expected_low && high >= 0.85;
    check(3, "frequency-mapping identity", ok);
    println!("  high-freq unchanged {high:.4}, low-freq unchanged {low:.4}");
}

#[test]
fn criterion_04_oracle_attacker_exactness() {
    let start = std::time::Instant::now();
    let vocab =
        Vocabulary::from_tokens((0..24).map(word).collect()).unwrap();
    let mut ok = true;
    for trial in 0..100u64 {
        let s = if trial % 3 == 0 { 3 } else { 2 };
        let m = 1 + (trial as usize * 7) % 12;
        let mapping = gen_random(&vocab, s, 1_000 + trial).unwrap();
        let scorer = RandomScorer { seed: 2_000 + trial };
        let mut rng = ChaCha12Rng::seed_from_u64(3_000 + trial);
        let truth = random_sequence(&vocab, m, &mut rng);
        let observed = mapping.apply(&truth, &vocab);
        let config = AttackConfig::new(1.0, None, &scorer).unwrap();
        let beam = oracle_attack(&observed, &mapping, &vocab, &config).unwrap();
        let reference = enumerate_ranking(&observed, &mapping, &vocab, &scorer);
        ok &= beam.len() == reference.len();
        for (cand, (seq, score)) in beam.iter().zip(&reference) {
            ok &= &cand.tokens == seq && (cand.log_prob - score).abs() < 1e-9;
        }
        if !ok {
            println!("  mismatch at trial {trial} (s={s}, m={m})");
            break;
        }
    }
    ok &= start.elapsed().as_secs_f64() < 120.0;
    check(4, "oracle-attacker exactness vs enumeration", ok);
}

#[test]
fn criterion_05_figure_walkthrough() {
    let vocab = Vocabulary::from_tokens(toks(&["what", "a", "nice", "is", "day", "unicorn"])).unwrap();
    let mapping =
        TupleMapping::from_tsv("what\twhat\ta\nnice\tnice\tis\nunicorn\tday\tunicorn\n", &vocab)
            .unwrap();
    let mut entries: HashMap<Vec<String>, BTreeMap<String, f64>> = HashMap::new();
    let mut add = |prefix: &[&str], options: &[(&str, f64)]| {
        entries.insert(
            prefix.iter().map(|s| s.to_string()).collect(),
            options.iter().map(|(t, p)| (t.to_string(), *p)).collect(),
        );
    };
    add(&[], &[("what", 0.8), ("a", 0.2)]);
    add(&["what"], &[("what", 0.001), ("a", 0.999)]);
    add(&["a"], &[("what", 0.1), ("a", 0.9)]);
    add(&["what", "a"], &[("nice", 0.9), ("is", 0.1)]);
    add(&["a", "a"], &[("nice", 0.9), ("is", 0.1)]);
    add(&["what", "a", "nice"], &[("day", 0.99), ("unicorn", 0.01)]);
    add(&["a", "a", "nice"], &[("day", 0.5), ("unicorn", 0.5)]);
    let scorer = LookupScorer::new(entries, (1e-12f64).ln()).unwrap();
    let config = AttackConfig::new(0.85, None, &scorer).unwrap();
    let observed = toks(&["what", "what", "nice", "unicorn"]);

    // step 2 by hand: expand the unpruned two-candidate beam once and prune
    let step1 = tokpriv::attacker::prune(
        tokpriv::attacker::expand(
            &[tokpriv::attacker::BeamCandidate {
                tokens: Vec::new(),
                log_prob: 0.0,
                beam_prob: 1.0,
            }],
            &mapping,
            &vocab,
            &tok("what"),
            &scorer,
        )
        .unwrap(),
        0.85,
        &vocab,
    );
    let step2 = tokpriv::attacker::prune(
        tokpriv::attacker::expand(&step1, &mapping, &vocab, &tok("what"), &scorer).unwrap(),
        0.85,
        &vocab,
    );
    let survivors: Vec<Vec<&str>> = step2
        .iter()
        .map(|c| c.tokens.iter().map(|t| t.as_str()).collect())
        .collect();
    let pruned_ok = survivors.len() == 2
        && survivors.contains(&vec!["what", "a"])
        && survivors.contains(&vec!["a", "a"])
        && !survivors.contains(&vec!["what", "what"])
        && !survivors.contains(&vec!["a", "what"]);

    let ranking = oracle_attack(&observed, &mapping, &vocab, &config).unwrap();
    let top_ok = ranking[0].tokens == toks(&["what", "a", "nice", "day"]);
    check(5, "beam-search figure walkthrough", pruned_ok && top_ok);
}

#[test]
fn criterion_06_stencil_structure() {
    let table = random_table(60, 300, 8);
    let vocab = table.vocab().clone();
    let mut rng = ChaCha12Rng::seed_from_u64(61);
    let mut ok = true;

    // output differs from input on 10^4 random positions (half per variant)
    let mut positions = 0usize;
    for punctuated in [false, true] {
        let cfg = StencilConfig::new(9, 0.8, punctuated, Metric::Euclidean).unwrap();
        for _ in 0..250 {
            let seq = random_sequence(&vocab, 20, &mut rng);
            let out = privatize_stencil(&seq, &table, &cfg).unwrap();
            for (a, b) in seq.iter().zip(&out) {
                ok &= a != b;
                positions += 1;
            }
        }
    }
    ok &= positions == 10_000;

    // kernel weights always sum to 1
    for window in [1usize, 3, 5, 9, 21] {
        for sigma in [0.01, 0.2, 1.0, 5.0, 100.0] {
            for punctuated in [false, true] {
                if punctuated && window < 3 {
                    continue;
                }
                let w = gaussian_weights(window, sigma, punctuated).unwrap();
                ok &= (w.iter().sum::<f64>() - 1.0).abs() < 1e-9;
            }
        }
    }

    // sigma -> 0: the kernel collapses onto the center, so the output is
    // exactly the nearest token excluding the original, at every position
    // including the truncated boundaries
    let cfg = StencilConfig::new(9, 0.01, false, Metric::Euclidean).unwrap();
    for _ in 0..20 {
        let seq = random_sequence(&vocab, 12, &mut rng);
        let out = privatize_stencil(&seq, &table, &cfg).unwrap();
        for (t, o) in seq.iter().zip(&out) {
            let id = vocab.id(t).unwrap();
            let hit = table
                .nearest(table.row(id), Metric::Euclidean, &HashSet::from([id]), 1)
                .unwrap();
            ok &= o == vocab.token(hit[0].0);
        }
    }
    check(6, "stencil structural guarantees", ok);
}

#[test]
fn criterion_07_noise_statistics() {
    let mut ok = true;
    let mut rng = ChaCha12Rng::seed_from_u64(70);
    for d in [8usize, 64] {
        for eta in [100.0f64, 150.0] {
            let n = 10_000;
            let mean = (0..n)
                .map(|_| {
                    let v = sample_noise(d, eta, &mut rng).unwrap();
                    v.iter().map(|x| x * x).sum::<f64>().sqrt()
                })
                .sum::<f64>()
                / n as f64;
            let expected = d as f64 / eta;
            ok &= (mean - expected).abs() / expected < 0.05;
        }
    }

    // huge eta on well-separated embeddings: the mechanism is the identity
    // and the NN attacker recovers every token at rank 1
    let tokens: Vec<Token> = (0..50).map(word).collect();
    let rows: Vec<Vec<f64>> = (0..50)
        .map(|i| vec![i as f64 * 10.0, 1.0, 0.0, 0.0])
        .collect();
    let table = EmbeddingTable::new(tokens, 4, rows).unwrap();
    let vocab = table.vocab().clone();
    let cfg = NoiseConfig::new(1e6, Metric::Euclidean, 71).unwrap();
    let truth: Vec<TokenSequence> = (0..20)
        .map(|_| random_sequence(&vocab, 15, &mut rng))
        .collect();
    let privatized: Vec<TokenSequence> = truth
        .iter()
        .enumerate()
        .map(|(i, seq)| privatize_noise(seq, &table, &cfg, i as u64).unwrap())
        .collect();
    ok &= privatized == truth;
    let report = evaluate_nn(&privatized, &truth, &table, 1, Metric::Euclidean, false).unwrap();
    ok &= report.aggregates.precision_at_k == 1.0;
    check(7, "noise mechanism statistics", ok);
}

#[test]
fn criterion_08_privacy_trend_over_sigma() {
    let start = std::time::Instant::now();
    let table = random_table(80, 5_000, 16);
    let vocab = table.vocab().clone();
    let mut rng = ChaCha12Rng::seed_from_u64(81);
    let truth: Vec<TokenSequence> = (0..100)
        .map(|_| random_sequence(&vocab, 20, &mut rng))
        .collect();
    let mut pr5 = Vec::new();
    for sigma in [0.2, 0.6, 0.8, 1.0] {
        let cfg = StencilConfig::new(9, sigma, false, Metric::Euclidean).unwrap();
        let privatized: Vec<TokenSequence> = truth
            .iter()
            .map(|seq| privatize_stencil(seq, &table, &cfg).unwrap())
            .collect();
        let report = evaluate_nn(&privatized, &truth, &table, 5, Metric::Euclidean, false).unwrap();
        pr5.push(report.aggregates.precision_at_k);
    }
    let mut ok = true;
    for pair in pr5.windows(2) {
        ok &= pair[1] <= pair[0] + 0.02;
    }
    ok &= start.elapsed().as_secs_f64() < 300.0;
    check(8, "privacy trend across sigma", ok);
    println!("  Pr@5 by sigma 0.2/0.6/0.8/1.0: {pr5:?}");
}

#[test]
fn criterion_09_metrics() {
    let mut ok = true;
    ok &= mrr(&[Some(1), Some(1), Some(1)]).unwrap() == 1.0;
    ok &= mrr(&[Some(2)]).unwrap() == 0.5;
    ok &= (mrr(&[Some(1), None, Some(4)]).unwrap() - (1.0 + 0.0 + 0.25) / 3.0).abs() < 1e-12;
    ok &= precision_at_k(&[true, true]).unwrap() == 1.0;
    ok &= precision_at_k(&[false, false]).unwrap() == 0.0;
    ok &= precision_at_k(&[true, false, false, true]).unwrap() == 0.5;
    let a = toks(&["what", "a", "nice", "day"]);
    let b = toks(&["what", "what", "nice", "unicorn"]);
    ok &= token_edit_distance(&a, &a) == 0;
    ok &= token_edit_distance(&toks(&["a"]), &[]) == 1;
    ok &= token_edit_distance(&a, &b) == 2;

    let mut rng = ChaCha12Rng::seed_from_u64(90);
    let alphabet: Vec<Token> = ["x", "y", "z", "w"].iter().map(|s| tok(s)).collect();
    let random_seq = |rng: &mut ChaCha12Rng| -> TokenSequence {
        let len = rng.random_range(0..12usize);
        (0..len)
            .map(|_| alphabet[rng.random_range(0..alphabet.len())].clone())
            .collect()
    };
    for _ in 0..1_000 {
        let p = random_seq(&mut rng);
        let q = random_seq(&mut rng);
        let r = random_seq(&mut rng);
        let dpq = token_edit_distance(&p, &q);
        ok &= dpq == token_edit_distance(&q, &p);
        ok &= dpq <= token_edit_distance(&p, &r) + token_edit_distance(&r, &q);
        ok &= dpq >= p.len().abs_diff(q.len());
        ok &= dpq <= p.len().max(q.len());
        ok &= (dpq == 0) == (p == q);
    }
    check(9, "metric definitions and edit-distance properties", ok);
}

#[test]
fn criterion_10_determinism_across_threads() {
    let run = |threads: usize| -> (String, Vec<TokenSequence>, Vec<TokenSequence>) {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            use rayon::prelude::*;
            let corpus = zipf_corpus(100, 4_000, 200, 1.0, 16);
            let (_, vocab) = vocab_of_corpus(&corpus);
            let mapping = gen_random(&vocab, 2, 7).unwrap();
            let truth: Vec<TokenSequence> = corpus[..40].to_vec();
            let observed: Vec<TokenSequence> = truth
                .par_iter()
                .map(|seq| mapping.apply(seq, &vocab))
                .collect();
            let scorer = RandomScorer { seed: 17 };
            let config = AttackConfig::new(0.85, Some(64), &scorer).unwrap();
            let report = tokpriv::attacker::evaluate_oracle(
                &observed, &truth, &mapping, &vocab, &config, 5, true,
            )
            .unwrap();
            // the table must cover every Zipf rank, observed or not
            let table = random_table(101, 200, 8);
            let noise_cfg = NoiseConfig::new(50.0, Metric::Euclidean, 23).unwrap();
            let noised: Vec<TokenSequence> = truth
                .par_iter()
                .enumerate()
                .map(|(i, seq)| {
                    // map through the shared vocabulary used by the table
                    let seq: TokenSequence = seq.clone();
                    privatize_noise(&seq, &table, &noise_cfg, i as u64).unwrap()
                })
                .collect();
            let stencil_cfg = StencilConfig::new(9, 0.8, true, Metric::Euclidean).unwrap();
            let stenciled: Vec<TokenSequence> = truth
                .par_iter()
                .map(|seq| privatize_stencil(seq, &table, &stencil_cfg).unwrap())
                .collect();
            (report.to_json().unwrap(), noised, stenciled)
        })
    };
    let single = run(1);
    let single_again = run(1);
    let multi = run(4);
    let ok = single == single_again && single == multi;
    check(10, "seeded determinism across runs and thread counts", ok);
}
