//! Acceptance suite: one test per acceptance criterion, named
//! `criterion_NN_*` so the harness emits one pass/fail line for each.

mod common;

use common::oracles::{enumerate, random_fst, relation, table, TOL};
use common::{assert_round_trip, load_starter_pack, tn_readings, verbalize_money, verbalize_num, verbalize_time, written_money};
use itn::datagen::{normalize, to_training_pairs, TaggedSentence, XmlTaggedText};
use itn::eval::{bench_runtime, evaluate, match_instances, prf1, ter, BaselineConverter, Counts};
use itn::fst::{compose, shortest_paths, Label};
use itn::ngram::NGramModel;
use itn::pipeline::{EngineConfig, ItnEngine};
use itn::rules::GrammarPack;
use itn::synth::{bench_tokens, synth_corpus};
use itn::tagger::{gradient_check, train, StreamSession, TagInventory, TaggerConfig, TaggerModel, TrainConfig, Vocab};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

// ---------------------------------------------------------------------------
// Criterion 1: FST oracle equivalence on 200 randomized acyclic pairs.

#[test]
fn criterion_01_fst_oracle_equivalence() {
    let t = table();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
    for trial in 0..200 {
        let a = random_fst(&mut rng, &t);
        let b = random_fst(&mut rng, &t);
        // Composition against the brute-force relational join.
        let ra = relation(&enumerate(&a));
        let rb = relation(&enumerate(&b));
        let mut expect: HashMap<(Vec<Label>, Vec<Label>), f32> = HashMap::new();
        for ((x, y), wa) in &ra {
            for ((y2, z), wb) in &rb {
                if y == y2 {
                    let e = expect.entry((x.clone(), z.clone())).or_insert(f32::INFINITY);
                    *e = e.min(wa + wb);
                }
            }
        }
        let composed = compose(&a, &b).unwrap();
        let actual = relation(&enumerate(&composed));
        assert_eq!(expect.len(), actual.len(), "trial {trial}: relation size");
        for (k, w) in &expect {
            let got = actual.get(k).unwrap_or_else(|| panic!("trial {trial}: missing {k:?}"));
            assert!((got - w).abs() < TOL, "trial {trial}: weight {got} vs {w}");
        }
        // N-best against sorted exhaustive enumeration of the composition.
        let mut all: Vec<(f32, Vec<Label>)> =
            enumerate(&composed).into_iter().map(|(_, o, w)| (w, o)).collect();
        all.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then_with(|| x.1.cmp(&y.1)));
        let n = rng.gen_range(1..=4usize);
        let got = shortest_paths(&composed, n).unwrap();
        assert_eq!(got.len(), all.len().min(n), "trial {trial}");
        for (i, p) in got.iter().enumerate() {
            assert!((p.weight - all[i].0).abs() < TOL, "trial {trial} path {i}");
            assert_eq!(p.olabels, all[i].1, "trial {trial} path {i}");
        }
    }
}

// ---------------------------------------------------------------------------
// Criterion 2: grammar round-trip over the full written-form ranges.

#[test]
fn criterion_02_grammar_round_trip() {
    let pack = load_starter_pack();
    // All cardinals 0-9,999: every TN reading converts back, and the
    // standard English reading is among the readings.
    (0u32..10_000).into_par_iter().for_each(|n| {
        let readings = assert_round_trip(&pack, "num", &n.to_string());
        assert!(readings.contains(&verbalize_num(n)), "num {n}: oracle reading missing");
    });
    // Every clock time the grammar can write.
    for h in 1..=12u32 {
        for m in 0..60u32 {
            let written = format!("{h}:{m:02}");
            let readings = assert_round_trip(&pack, "time", &written);
            assert!(readings.contains(&verbalize_time(h, m)), "time {written}");
        }
    }
    // Every money amount up to the pack's bound ($9,999.99).
    (0u32..10_000).into_par_iter().for_each(|d| {
        for c in 0..100u32 {
            let written = written_money(d, c);
            let readings = assert_round_trip(&pack, "money", &written);
            assert!(readings.contains(&verbalize_money(d, c)), "money {written}");
        }
    });
}

// ---------------------------------------------------------------------------
// Criterion 3: paper example fidelity.

#[test]
fn criterion_03_paper_examples() {
    let pack = Arc::new(load_starter_pack());
    let model = TaggerModel::init(
        TaggerConfig::default(),
        Vocab::build(std::iter::empty(), 1),
        TagInventory::from_categories(["time", "money"]),
        0,
    )
    .unwrap();
    let engine = ItnEngine::new(Arc::new(model), pack.clone(), EngineConfig::default()).unwrap();
    // "at four thirty" + [blank, time, _time] -> "at 4:30".
    let out = engine
        .convert_with_tags(&toks("at four thirty"), &toks("blank time _time"))
        .unwrap();
    assert_eq!(out, toks("at 4:30"));
    // "$25.00 please" <-> tagged "twenty five dollars" in both directions.
    let readings = tn_readings(&pack, "money", "$25.00");
    assert!(readings.contains(&toks("twenty five dollars")));
    let out = engine
        .convert_with_tags(
            &toks("twenty five dollars please"),
            &toks("money _money _money blank"),
        )
        .unwrap();
    assert_eq!(out, toks("$25.00 please"));
    // Training-pair derivation yields exactly [money, _money, _money, blank].
    let pairs =
        to_training_pairs(&XmlTaggedText("<money> twenty five dollars </money> please".into()))
            .unwrap();
    assert_eq!(pairs.tags, toks("money _money _money blank"));
}

// ---------------------------------------------------------------------------
// Criterion 4: chunk causality under randomized perturbation.

#[test]
fn criterion_04_chunk_causality() {
    for &c in &[1usize, 2, 3, 6, 11] {
        let cfg = TaggerConfig {
            num_blocks: 1,
            model_dim: 16,
            num_heads: 2,
            ffn_dim: 32,
            chunk_size: c,
            dropout: 0.0,
            max_position: 64,
            max_history_chunks: 0,
        };
        let vocab = Vocab::build(["a", "b", "c", "d", "e"].into_iter(), 1);
        let inv = TagInventory::from_categories(["time", "num"]);
        let model = TaggerModel::init(cfg, vocab, inv, c as u64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0xCA05 + c as u64);
        let mut done = 0;
        while done < 200 {
            let t = rng.gen_range(2..=32usize);
            let ids: Vec<usize> = (0..t).map(|_| rng.gen_range(0..6usize)).collect();
            // Perturb one random position.
            let p = rng.gen_range(0..t);
            let mut perturbed = ids.clone();
            perturbed[p] = (perturbed[p] + 1 + rng.gen_range(0..4usize)) % 6;
            let base = model.forward(&ids).unwrap();
            let after = model.forward(&perturbed).unwrap();
            let mut checked = false;
            for i in 0..t {
                let visible =
                    p >= model.config.visible_start(i) && p < model.config.visible_end(i, t);
                if visible {
                    continue;
                }
                checked = true;
                for (x, y) in base.row(i).iter().zip(after.row(i).iter()) {
                    assert_eq!(
                        x.to_bits(),
                        y.to_bits(),
                        "C={c}: position {i} changed when {p} is outside its visible set"
                    );
                }
            }
            if checked {
                done += 1;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Criterion 5: latency accounting equals (C-1)/2 on full-chunk streams.

#[test]
fn criterion_05_latency_accounting() {
    let expected = [(1usize, 0.0f64), (2, 0.5), (4, 1.5), (6, 2.5), (11, 5.0)];
    for (c, want) in expected {
        let cfg = TaggerConfig {
            num_blocks: 1,
            model_dim: 16,
            num_heads: 2,
            ffn_dim: 32,
            chunk_size: c,
            dropout: 0.0,
            max_position: 128,
            max_history_chunks: 0,
        };
        let vocab = Vocab::build(["a"].into_iter(), 1);
        let inv = TagInventory::from_categories(["time"]);
        let model = TaggerModel::init(cfg, vocab, inv, 1).unwrap();
        let mut session = StreamSession::new(&model);
        let mut latencies = Vec::new();
        for _ in 0..4 * c {
            for tt in session.push("a").unwrap() {
                latencies.push(tt.emit_latency as f64);
            }
        }
        let avg = latencies.iter().sum::<f64>() / latencies.len() as f64;
        assert_eq!(avg, want, "C={c}");
    }
}

// ---------------------------------------------------------------------------
// Criterion 6: analytic gradients match finite differences.

#[test]
fn criterion_06_gradient_correctness() {
    let cfg = TaggerConfig {
        num_blocks: 1,
        model_dim: 16,
        num_heads: 2,
        ffn_dim: 32,
        chunk_size: 3,
        dropout: 0.0,
        max_position: 32,
        max_history_chunks: 0,
    };
    let vocab = Vocab::build(["a", "b", "c"].into_iter(), 1);
    let inv = TagInventory::from_categories(["time", "num"]);
    let model = TaggerModel::init(cfg, vocab, inv, 9).unwrap();
    let tokens = vec![1usize, 2, 3, 1, 2, 0, 3];
    let tags = vec![0usize, 1, 2, 0, 3, 4, 0];
    let max_rel = gradient_check(&model, &tokens, &tags, 100, 77);
    assert!(max_rel < 1e-3, "max relative gradient error {max_rel}");
}

// ---------------------------------------------------------------------------
// Shared training fixture for criteria 7, 8, and 10: a datagen-produced
// corpus over the starter pack.

struct Fixture {
    pack: Arc<GrammarPack>,
    corpus: Vec<TaggedSentence>,
    written: Vec<String>,
}

static FIXTURE: OnceLock<Fixture> = OnceLock::new();

fn fixture() -> &'static Fixture {
    FIXTURE.get_or_init(|| {
        let pack = Arc::new(load_starter_pack());
        let synth = synth_corpus(&pack, 5500, 2025);
        let lex: Vec<Vec<String>> = synth.lexical.iter().map(|s| toks(s)).collect();
        let lm = NGramModel::train(&lex, 4).unwrap();
        let corpus: Vec<TaggedSentence> = synth
            .written
            .par_iter()
            .enumerate()
            .map(|(k, line)| {
                let words: Vec<&str> = line.split_whitespace().collect();
                let tagged = normalize(&words, &pack, &lm, 2025 ^ k as u64);
                to_training_pairs(&tagged).expect("well-formed tagging")
            })
            .collect();
        Fixture { pack, corpus, written: synth.written }
    })
}

// ---------------------------------------------------------------------------
// Criterion 7: learnability at the desk scale, plus oracle-tag F1 = 1.0.

#[test]
fn criterion_07_learnability_and_oracle_f1() {
    let fix = fixture();
    assert!(fix.corpus.len() >= 5000);
    let arch = TaggerConfig {
        num_blocks: 2,
        model_dim: 64,
        num_heads: 4,
        ffn_dim: 128,
        chunk_size: 6,
        dropout: 0.05,
        max_position: 64,
        max_history_chunks: 0,
    };
    let hyper = TrainConfig {
        epochs: 30,
        warmup_steps: 300,
        target_f1: 0.93,
        seed: 7,
        ..TrainConfig::default()
    };
    let (_, report) = train(&fix.corpus, arch, &hyper).unwrap();
    println!("criterion 7: held-out span F1 by epoch {:?}", report.holdout_f1);
    assert!(
        report.best_f1 >= 0.90,
        "held-out span F1 {:.4} below 0.90",
        report.best_f1
    );

    // Oracle tags: end-to-end conversion must reproduce every original
    // written sentence exactly.
    let inventory = TagInventory::from_corpus(&fix.corpus);
    let dummy = TaggerModel::init(
        TaggerConfig::default(),
        Vocab::build(std::iter::empty(), 1),
        inventory,
        0,
    )
    .unwrap();
    let engine =
        ItnEngine::new(Arc::new(dummy), fix.pack.clone(), EngineConfig::default()).unwrap();
    let testset: Vec<(Vec<String>, Vec<String>)> = fix
        .corpus
        .iter()
        .zip(&fix.written)
        .map(|(s, w)| (s.tokens.clone(), toks(w)))
        .collect();
    let mut it = fix.corpus.iter();
    let report = evaluate(
        |lex| {
            let s = it.next().unwrap();
            assert_eq!(&s.tokens, lex);
            engine.convert_with_tags(lex, &s.tags)
        },
        &testset,
    )
    .unwrap();
    assert_eq!(report.f1, 1.0, "oracle-tag F1 must be exactly 1.0");
    assert_eq!(report.ter, 0.0);
}

// ---------------------------------------------------------------------------
// Criterion 8: chunk-size trade-off direction (C=1 worse than C=11).

#[test]
fn criterion_08_chunk_size_tradeoff() {
    let fix = fixture();
    let corpus = &fix.corpus[..3000];
    let mut curve = Vec::new();
    for &c in &[1usize, 2, 4, 6, 11] {
        let arch = TaggerConfig {
            num_blocks: 1,
            model_dim: 32,
            num_heads: 2,
            ffn_dim: 64,
            chunk_size: c,
            dropout: 0.0,
            max_position: 64,
            max_history_chunks: 0,
        };
        // Matched budgets: identical data, epochs, and optimizer settings;
        // target_f1 > 1 disables early stopping.
        let hyper = TrainConfig {
            epochs: 6,
            warmup_steps: 200,
            target_f1: 2.0,
            seed: 13,
            ..TrainConfig::default()
        };
        let (_, report) = train(corpus, arch, &hyper).unwrap();
        curve.push((c, (c as f64 - 1.0) / 2.0, report.best_f1));
    }
    println!("criterion 8 (chunk, latency, F1) curve: {curve:?}");
    let f1 = |c: usize| curve.iter().find(|(cc, _, _)| *cc == c).unwrap().2;
    assert!(
        f1(1) < f1(11),
        "C=1 F1 {:.4} not below C=11 F1 {:.4}",
        f1(1),
        f1(11)
    );
}

// ---------------------------------------------------------------------------
// Criterion 9: runtime scaling exponents.

#[test]
fn criterion_09_runtime_scaling() {
    let pack = Arc::new(load_starter_pack());
    let lexicon = bench_tokens(200, 0);
    let cfg = TaggerConfig {
        num_blocks: 1,
        model_dim: 32,
        num_heads: 2,
        ffn_dim: 64,
        chunk_size: 6,
        dropout: 0.0,
        max_position: 256,
        // Bounded attention history keeps per-token work constant.
        max_history_chunks: 2,
    };
    let vocab = Vocab::build(lexicon.iter().map(|s| s.as_str()), 1);
    let inv = TagInventory::from_categories(["time", "num"]);
    let model = TaggerModel::init(cfg, vocab, inv, 3).unwrap();
    let engine = ItnEngine::new(Arc::new(model), pack.clone(), EngineConfig::default()).unwrap();
    let baseline = BaselineConverter::new(&pack, &lexicon);
    let report = bench_runtime(
        &engine,
        &baseline,
        None,
        1.0,
        4,
        &[10, 20, 40, 80, 160],
        30,
        0,
    )
    .unwrap();
    println!(
        "criterion 9: engine exponent {:.3}, baseline exponent {:.3}, rows {:?}",
        report.engine_exponent, report.baseline_exponent, report.rows
    );
    for w in report.rows.windows(2) {
        assert!(
            w[1].baseline_secs > w[0].baseline_secs,
            "baseline time not strictly increasing"
        );
    }
    assert!(
        report.engine_exponent <= 1.2,
        "engine exponent {:.3} exceeds 1.2",
        report.engine_exponent
    );
    assert!(
        report.engine_exponent < report.baseline_exponent,
        "engine exponent {:.3} not below baseline {:.3}",
        report.engine_exponent,
        report.baseline_exponent
    );
}

// ---------------------------------------------------------------------------
// Criterion 10: streaming ≡ batch and cache-on ≡ cache-off on 1,000
// random sentences.

#[test]
fn criterion_10_streaming_and_cache_transparency() {
    let fix = fixture();
    let sentences: Vec<&TaggedSentence> = fix.corpus.iter().take(1000).collect();
    let cfg = TaggerConfig {
        num_blocks: 1,
        model_dim: 16,
        num_heads: 2,
        ffn_dim: 32,
        chunk_size: 3,
        dropout: 0.0,
        max_position: 64,
        max_history_chunks: 0,
    };
    let vocab = Vocab::build(
        sentences.iter().flat_map(|s| s.tokens.iter().map(|t| t.as_str())),
        1,
    );
    let inv = TagInventory::from_corpus(&fix.corpus);
    let model = Arc::new(TaggerModel::init(cfg, vocab, inv, 17).unwrap());
    let cached =
        ItnEngine::new(model.clone(), fix.pack.clone(), EngineConfig::default()).unwrap();
    let uncached = ItnEngine::new(
        model.clone(),
        fix.pack.clone(),
        EngineConfig { cache_enabled: false, ..EngineConfig::default() },
    )
    .unwrap();
    for s in &sentences {
        let batch = cached.convert(&s.tokens).unwrap();
        let no_cache = uncached.convert(&s.tokens).unwrap();
        let mut session = cached.session();
        let mut streamed = Vec::new();
        for t in &s.tokens {
            streamed.extend(session.push(t).unwrap());
        }
        streamed.extend(session.flush().unwrap());
        assert_eq!(streamed, batch, "streaming vs batch on {:?}", s.tokens);
        assert_eq!(no_cache, batch, "cache-off vs cache-on on {:?}", s.tokens);
    }
    let (hits, _, _) = cached.cache_stats();
    assert!(hits > 0, "cache was never exercised");
}

// ---------------------------------------------------------------------------
// Criterion 11: metric oracles on a hand-computed 10-sentence fixture.

#[test]
fn criterion_11_metric_oracles() {
    // (lexical, reference display, hypothesis display)
    let fixture = [
        ("it is four thirty", "it is 4:30", "it is 4:30"),
        ("hello there", "hello there", "hello there"),
        (
            // The phone case: one missed instance, one F1 miss, 10 TER edits.
            "call five five five eight zero one zero one nine nine",
            "call 555-801-0199",
            "call five five five eight zero one zero one nine nine",
        ),
        ("pay twenty dollars now", "pay $20.00 now", "pay 20 now"),
        ("see you at seven fifteen", "see you at 7:15", "see you at 7:15"),
        ("room four oh seven", "room 407", "room 407"),
        ("a b c", "a b c", "a x c"),
        ("june first meeting", "June 1st meeting", "June 1st meeting"),
        ("half past four works", "4:30 works", "half past four works"),
        ("the total is nine hundred", "the total is 900", "the total is 900"),
    ];
    // The phone sentence alone: 1 FN but 10 edit operations.
    let phone = &fixture[2];
    let c = match_instances(
        &itn::eval::extract_instances(&toks(phone.0), &toks(phone.1)),
        &itn::eval::extract_instances(&toks(phone.0), &toks(phone.2)),
    );
    assert_eq!(c, Counts { tp: 0, fp: 0, fn_: 1 });
    assert_eq!(ter(&toks(phone.2), &toks(phone.1)), 100.0 * 10.0 / 2.0);

    let testset: Vec<(Vec<String>, Vec<String>)> =
        fixture.iter().map(|(l, r, _)| (toks(l), toks(r))).collect();
    let hyps: HashMap<String, Vec<String>> = fixture
        .iter()
        .map(|(l, _, h)| (l.to_string(), toks(h)))
        .collect();
    let report = evaluate(|lex| Ok(hyps[&lex.join(" ")].clone()), &testset).unwrap();
    // Hand-computed: TP=5, FP=2, FN=3; edits 0+0+10+1+0+0+1+0+3+0 = 15
    // over reference lengths 3+2+2+3+4+2+3+3+2+4 = 28.
    assert_eq!(report.counts, Counts { tp: 5, fp: 2, fn_: 3 });
    assert!((report.precision - 5.0 / 7.0).abs() < 1e-12);
    assert!((report.recall - 5.0 / 8.0).abs() < 1e-12);
    assert!((report.f1 - 2.0 / 3.0).abs() < 1e-12);
    assert!((report.ter - 1500.0 / 28.0).abs() < 1e-9);

    // prf1 is invariant under sentence reordering.
    let mut reversed = testset.clone();
    reversed.reverse();
    let report2 = evaluate(|lex| Ok(hyps[&lex.join(" ")].clone()), &reversed).unwrap();
    assert_eq!(report2.counts, report.counts);
    assert!((prf1(&report2.counts).2 - report.f1).abs() < 1e-12);
}
