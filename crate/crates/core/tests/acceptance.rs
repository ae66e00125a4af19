//! Acceptance checks, one line of output per criterion. Runs without the
//! libtest harness so the lines always print:
//! `cargo test -p tweetscope --test acceptance`.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tweetscope::analytics::{correlate, AnalyticsError, CorrelationMethod};
use tweetscope::corpus::{ingest, IngestOptions, InputFormat, Label};
use tweetscope::pipeline::{self, PipelineConfig, Stage};
use tweetscope::sbsnet::{betweenness, connectivity, sbs, score_components, CoocGraph, SbsComponents};
use tweetscope::sentiment::model::{bce_from_logit, Params};
use tweetscope::sentiment::{
    evaluate, score_examples, train, BankSpec, Example, Mode, ModelShape, SentimentModel, TrainConfig,
};
use tweetscope::textprep::{build_vocab, drop_non_english, normalize, stem, Preprocessor, TokenSeq, Vocab};
use tweetscope::topics::{chain, top_terms, GibbsSampler, LdaParams};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn within(elapsed: Duration, limit_secs: u64, what: &str) {
    assert!(elapsed.as_secs() < limit_secs, "{what} took {elapsed:?}, limit {limit_secs}s");
}

// 1 ------------------------------------------------------------------------

fn metric_reproduction() {
    let (tp, tn, fp, fn_) = (63465, 63399, 16407, 16729);
    let mut scored = Vec::with_capacity(tp + tn + fp + fn_);
    scored.extend(std::iter::repeat_n((1.0, Label::Positive), tp));
    scored.extend(std::iter::repeat_n((0.0, Label::Negative), tn));
    scored.extend(std::iter::repeat_n((1.0, Label::Negative), fp));
    scored.extend(std::iter::repeat_n((0.0, Label::Positive), fn_));
    let r = evaluate(&scored);
    assert_eq!((r.tp, r.tn, r.fp, r.fn_), (tp as u64, tn as u64, fp as u64, fn_ as u64));
    let three = |v: f64| format!("{v:.3}");
    assert_eq!(three(r.accuracy), "0.793");
    assert_eq!(three(r.precision), "0.795");
    assert_eq!(three(r.recall), "0.791");
    assert_eq!(three(r.f1), "0.793");
    assert_eq!(three(r.cohen_kappa.unwrap()), "0.586");
    // hard 0/1 scores make the ROC curve a single operating point
    assert_eq!(three(r.auc.unwrap()), "0.793");
}

// 2 ------------------------------------------------------------------------

fn tiny_shape() -> ModelShape {
    ModelShape {
        vocab_rows: 7,
        embed_dim: 3,
        pad_len: 6,
        banks: vec![
            BankSpec { width: 3, filters: 2, dropout: 0.5 },
            BankSpec { width: 4, filters: 2, dropout: 0.2 },
            BankSpec { width: 5, filters: 2, dropout: 0.2 },
        ],
        hidden: 3,
        input_dropout: 0.5,
        hidden_dropout: 0.5,
    }
}

fn grad_batch() -> Vec<Example> {
    let ex = |rows: &[usize], label| Example { rows: rows.to_vec(), label };
    vec![
        ex(&[1, 2, 3], Label::Positive),
        ex(&[4, 5, 6, 1, 2, 3, 4], Label::Negative),
        ex(&[2, 6], Label::Positive),
        ex(&[6, 5, 4, 3], Label::Negative),
    ]
}

fn batch_loss(m: &SentimentModel, batch: &[Example], mode: Mode, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: f64 = batch
        .iter()
        .map(|ex| {
            let c = m.forward_cached(&m.matrix_from_rows(&ex.rows), mode, &mut rng).unwrap();
            bce_from_logit(c.logit, ex.label.is_positive())
        })
        .sum();
    total / batch.len() as f64
}

/// Central differences against backprop for every parameter group, with
/// dropout masks replayed from a fixed seed.
fn gradient_check(mode: Mode) -> f64 {
    let mut m = SentimentModel::initialized(tiny_shape(), 21).unwrap();
    for b in &mut m.params.banks {
        b.bias.iter_mut().for_each(|v| *v = 0.05);
    }
    m.params.dense_b.iter_mut().for_each(|v| *v = 0.4);
    let batch = grad_batch();
    let seed = 5;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grads = Params::zeros(&m.shape);
    for ex in &batch {
        let c = m.forward_cached(&m.matrix_from_rows(&ex.rows), mode, &mut rng).unwrap();
        let y = if ex.label.is_positive() { 1.0 } else { 0.0 };
        m.backward(&c, &ex.rows, (c.prob - y) / batch.len() as f64, &mut grads);
    }
    let analytic: Vec<(String, Vec<f64>)> =
        grads.groups(&m.shape).into_iter().map(|(n, g)| (n, g.to_vec())).collect();

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (gi, (name, a)) in analytic.iter().enumerate() {
        let mut numeric = vec![0.0; a.len()];
        // the out-of-vocabulary embedding row is frozen
        let skip = if gi == 0 { m.shape.embed_dim } else { 0 };
        for (j, slot) in numeric.iter_mut().enumerate().skip(skip) {
            let orig = m.params.groups_mut()[gi][j];
            m.params.groups_mut()[gi][j] = orig + h;
            let up = batch_loss(&m, &batch, mode, seed);
            m.params.groups_mut()[gi][j] = orig - h;
            let down = batch_loss(&m, &batch, mode, seed);
            m.params.groups_mut()[gi][j] = orig;
            *slot = (up - down) / (2.0 * h);
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = a.iter().zip(&numeric).map(|(x, y)| x - y).collect();
        let denom = norm(a) + norm(&numeric);
        assert!(denom > 0.0, "{name}: gradient identically zero");
        let rel = norm(&diff) / denom;
        assert!(rel <= 1e-4, "{name}: relative error {rel:e}");
        worst = worst.max(rel);
    }
    worst
}

fn toy_set() -> (Vec<TokenSeq>, Vec<Label>) {
    const POS: [&str; 6] = ["great", "love", "happi", "thank", "safe", "hope"];
    const NEG: [&str; 6] = ["sad", "fear", "hate", "sick", "panic", "wors"];
    const NEUTRAL: [&str; 10] = ["week", "news", "citi", "peopl", "home", "work", "shop", "school", "travel", "todai"];
    (0..100)
        .map(|i| {
            let polar = if i % 2 == 0 { &POS } else { &NEG };
            let toks: TokenSeq = [
                NEUTRAL[i % 10],
                NEUTRAL[(i * 3 + 1) % 10],
                polar[i % 6],
                NEUTRAL[(i * 7 + 2) % 10],
                polar[(i / 2 + 1) % 6],
            ]
            .into_iter()
            .collect();
            (toks, if i % 2 == 0 { Label::Positive } else { Label::Negative })
        })
        .unzip()
}

fn sentiment_substitutes() {
    let worst = gradient_check(Mode::Eval).max(gradient_check(Mode::Train));
    assert!(worst <= 1e-4);

    let start = Instant::now();
    let (docs, labels) = toy_set();
    let vocab = build_vocab(&docs, 1).unwrap();
    let shape = ModelShape::standard(vocab.len());
    let examples: Vec<Example> =
        docs.iter().zip(&labels).map(|(d, &l)| Example::new(d, &vocab, shape.pad_len, l)).collect();
    let cfg = TrainConfig { epochs: 50, batch_size: 10, ..TrainConfig::default() };
    let out = train(SentimentModel::initialized(shape, 1).unwrap(), &examples, &[], &cfg).unwrap();
    let scores = score_examples(&out.model, &examples).unwrap();
    let report = evaluate(&scores.into_iter().zip(labels).collect::<Vec<_>>());
    assert!(report.accuracy >= 0.95, "toy training accuracy {}", report.accuracy);
    within(start.elapsed(), 120, "overfit run");
}

// 3 ------------------------------------------------------------------------

/// Betweenness by enumerating every simple path between every pair.
fn brute_force_betweenness(adj: &[Vec<usize>]) -> Vec<f64> {
    fn walk(adj: &[Vec<usize>], t: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let last = *path.last().unwrap();
        if last == t {
            out.push(path.clone());
            return;
        }
        for &n in &adj[last] {
            if !path.contains(&n) {
                path.push(n);
                walk(adj, t, path, out);
                path.pop();
            }
        }
    }
    let n = adj.len();
    let mut cb = vec![0.0; n];
    for s in 0..n {
        for t in s + 1..n {
            let mut paths = Vec::new();
            walk(adj, t, &mut vec![s], &mut paths);
            let Some(shortest) = paths.iter().map(Vec::len).min() else { continue };
            let paths: Vec<_> = paths.into_iter().filter(|p| p.len() == shortest).collect();
            for (v, score) in cb.iter_mut().enumerate() {
                if v == s || v == t {
                    continue;
                }
                let through = paths.iter().filter(|p| p.contains(&v)).count();
                *score += through as f64 / paths.len() as f64;
            }
        }
    }
    cb
}

fn random_connected(rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let n = rng.random_range(2..=8usize);
    let mut edges = BTreeSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.insert((u, v));
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < 0.3 {
                edges.insert((u, v));
            }
        }
    }
    let mut adj = vec![Vec::new(); n];
    for (u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    adj
}

fn words(tokens: &[&str]) -> TokenSeq {
    tokens.iter().copied().collect()
}

fn betweenness_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for g in 0..100 {
        let adj = random_connected(&mut rng);
        let fast = betweenness(&adj);
        let slow = brute_force_betweenness(&adj);
        for (v, (a, b)) in fast.iter().zip(&slow).enumerate() {
            assert!((a - b).abs() <= 1e-9, "graph {g} node {v}: brandes {a} vs enumeration {b}");
        }
    }

    let docs = [words(&["a", "b", "c"])];
    let vocab = build_vocab(&docs, 1).unwrap();
    let graph = CoocGraph::build(&[vocab.encode(&docs[0])], 1, 1).unwrap();
    assert_eq!(connectivity("b", &vocab, &graph).value, 1.0);

    for leaves in [2usize, 3, 5, 7] {
        let docs: Vec<TokenSeq> = (0..leaves).map(|i| words(&["hub", &format!("leaf{i}")])).collect();
        let vocab = build_vocab(&docs, 1).unwrap();
        let encoded: Vec<Vec<u32>> = docs.iter().map(|d| vocab.encode(d)).collect();
        let graph = CoocGraph::build(&encoded, 1, 1).unwrap();
        let expected = (leaves * (leaves - 1) / 2) as f64;
        assert_eq!(connectivity("hub", &vocab, &graph).value, expected);
    }
    within(start.elapsed(), 10, "betweenness oracle");
}

// 4 ------------------------------------------------------------------------

struct Fixture {
    weeks: Vec<Vec<Vec<u32>>>,
    vocab: Vocab,
}

fn fixture() -> Fixture {
    let (corpus, _) = ingest(&data("fixture_200.jsonl"), InputFormat::Jsonl, &IngestOptions::default()).unwrap();
    let pre = Preprocessor::default();
    let kept: Vec<_> = corpus.records().iter().filter(|r| drop_non_english(r)).collect();
    let tokens: Vec<TokenSeq> = kept.iter().map(|r| pre.strip_query_terms(&pre.tokens(&r.text))).collect();
    let vocab = build_vocab(&tokens, 1).unwrap();
    let mut weeks = vec![Vec::new(); corpus.bucket_count()];
    for (r, t) in kept.iter().zip(&tokens) {
        weeks[r.bucket.index as usize].push(vocab.encode(t));
    }
    Fixture { weeks, vocab }
}

fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

fn sbs_algebra() {
    let fx = fixture();
    let mut scored = 0;
    for docs in &fx.weeks {
        let graph = CoocGraph::build(docs, 5, 1).unwrap();
        let Ok(scores) = sbs(&graph, &fx.vocab) else { continue };
        scored += 1;
        let n = scores.len() as f64;
        for s in &scores {
            assert!((s.sbs - (s.z_prev + s.z_div + s.z_con)).abs() <= 1e-12);
        }
        for col in [
            scores.iter().map(|s| s.z_prev).sum::<f64>(),
            scores.iter().map(|s| s.z_div).sum::<f64>(),
            scores.iter().map(|s| s.z_con).sum::<f64>(),
        ] {
            assert!((col / n).abs() <= 1e-9, "z-score mean {}", col / n);
        }

        let comps: Vec<SbsComponents> = scores.iter().map(|s| s.components.clone()).collect();
        let base: Vec<f64> = scores.iter().map(|s| s.sbs).collect();
        let rescaled_prev: Vec<SbsComponents> =
            comps.iter().cloned().map(|mut c| { c.prev = 3 * c.prev + 7; c }).collect();
        let rescaled_con: Vec<SbsComponents> =
            comps.iter().cloned().map(|mut c| { c.con = 2.5 * c.con + 0.75; c }).collect();
        for variant in [rescaled_prev, rescaled_con] {
            let again: Vec<f64> = score_components(variant).iter().map(|s| s.sbs).collect();
            for (a, b) in base.iter().zip(&again) {
                assert!((a - b).abs() <= 1e-9);
            }
            assert_eq!(ranking(&base), ranking(&again));
        }
    }
    assert!(scored >= 10, "only {scored} fixture weeks produced a network");

    // triangle: every component constant, so every z-score is exactly 0
    let docs = [words(&["a", "b"]), words(&["b", "c"]), words(&["c", "a"])];
    let vocab = build_vocab(&docs, 1).unwrap();
    let encoded: Vec<Vec<u32>> = docs.iter().map(|d| vocab.encode(d)).collect();
    let scores = sbs(&CoocGraph::build(&encoded, 1, 1).unwrap(), &vocab).unwrap();
    for s in &scores {
        assert_eq!((s.z_prev, s.z_div, s.z_con, s.sbs), (0.0, 0.0, 0.0, 0.0));
    }
    // constant diversity alongside varying prevalence
    let comps: Vec<SbsComponents> = (0..4)
        .map(|i| SbsComponents { word: format!("w{i}"), prev: i + 1, div: 3, con: 0.5 })
        .collect();
    for s in score_components(comps) {
        assert_eq!((s.z_div, s.z_con), (0.0, 0.0));
        assert_eq!(s.sbs, s.z_prev);
    }
}

// 5 ------------------------------------------------------------------------

/// `n` documents of 20 tokens, each drawn from one of two disjoint
/// ten-word vocabularies.
fn two_topic_corpus(n: usize, seed: u64) -> (Vec<TokenSeq>, [BTreeSet<String>; 2]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topic_words = |p: &str| (0..10).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let (a, b) = (topic_words("alpha"), topic_words("beta"));
    let docs = (0..n)
        .map(|d| {
            let src = if d % 2 == 0 { &a } else { &b };
            (0..20).map(|_| src[rng.random_range(0..10)].clone()).collect()
        })
        .collect();
    (docs, [a.into_iter().collect(), b.into_iter().collect()])
}

fn topic_recovery() {
    let start = Instant::now();
    let (docs, truth) = two_topic_corpus(200, 11);
    let vocab = build_vocab(&docs, 1).unwrap();
    let encoded: Vec<Vec<u32>> = docs.iter().map(|d| vocab.encode(d)).collect();
    let params = LdaParams::new(2, 200, 3);

    let fitted = chain(&[(0, encoded.clone()), (1, encoded)], vocab.len(), &params).unwrap();
    assert_eq!(fitted.slices.len(), 2);
    let first = &fitted.slices[0];
    let mut matched = BTreeSet::new();
    for k in 0..2 {
        let top: BTreeSet<String> = top_terms(first, &vocab, k, 5).unwrap().into_iter().map(|(t, _)| t).collect();
        let owner = truth.iter().position(|t| top.is_subset(t));
        assert!(owner.is_some(), "topic {k} mixes vocabularies: {top:?}");
        matched.insert(owner);
    }
    assert_eq!(matched.len(), 2, "both topics landed on the same vocabulary");

    for k in 0..2 {
        let set = |s| -> BTreeSet<String> { top_terms(s, &vocab, k, 10).unwrap().into_iter().map(|(t, _)| t).collect() };
        let overlap = set(&fitted.slices[0]).intersection(&set(&fitted.slices[1])).count();
        assert!(overlap >= 8, "topic {k}: only {overlap}/10 top terms carried over");
    }
    within(start.elapsed(), 30, "topic recovery");
}

// 6 ------------------------------------------------------------------------

fn count_conservation() {
    let (docs, _) = two_topic_corpus(50, 4);
    let vocab = build_vocab(&docs, 1).unwrap();
    let encoded: Vec<Vec<u32>> = docs.iter().map(|d| vocab.encode(d)).collect();
    let tokens: u64 = encoded.iter().map(|d| d.len() as u64).sum();
    let params = LdaParams::new(3, 0, 8);
    let mut sampler = GibbsSampler::new(encoded.clone(), vocab.len(), &params, None, 0).unwrap();
    let check = |s: &GibbsSampler, it: usize| {
        s.verify_counts().unwrap_or_else(|e| panic!("iteration {it}: {e}"));
        let st = s.state();
        assert_eq!(st.topic_totals.iter().sum::<u64>(), tokens);
        assert_eq!(st.phi_counts.iter().sum::<u64>(), tokens);
        assert_eq!(st.theta_counts.iter().sum::<u64>(), tokens);
    };
    check(&sampler, 0);
    for it in 1..=100 {
        sampler.sweep();
        check(&sampler, it);
    }
    let prev = sampler.into_slice();
    let mut chained = GibbsSampler::new(encoded, vocab.len(), &params, Some(&prev), 1).unwrap();
    for it in 1..=50 {
        chained.sweep();
        check(&chained, it);
    }
}

// 7 ------------------------------------------------------------------------

fn pipeline_determinism() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut manifests = Vec::new();
    for dir in &dirs {
        let mut cfg = PipelineConfig {
            input: data("fixture_200.jsonl"),
            cases: Some(data("cases_weekly.csv")),
            output_dir: dir.path().to_path_buf(),
            ..PipelineConfig::default()
        };
        cfg.topics.k = 3;
        cfg.topics.iterations = 50;
        let start = Instant::now();
        let manifest = pipeline::run(&cfg, &Stage::all_for(&cfg)).unwrap();
        within(start.elapsed(), 60, "full pipeline run");
        manifests.push(manifest);
    }
    let (a, b) = (&manifests[0], &manifests[1]);
    assert_eq!(a.bundle_digest, b.bundle_digest);
    assert_eq!(a.run_id, b.run_id);
    assert_eq!(a.inventory, b.inventory);
    for entry in &a.inventory {
        let x = std::fs::read(dirs[0].path().join(&entry.path)).unwrap();
        let y = std::fs::read(dirs[1].path().join(&entry.path)).unwrap();
        assert!(x == y, "{} differs between runs", entry.path);
    }
}

// 8 ------------------------------------------------------------------------

fn preprocessing_conformance() {
    let mut runner = TestRunner::new(Config { cases: 1000, ..Config::default() });
    let strings = prop_oneof![
        any::<String>(),
        "[a-zA-Z0-9 !?.,:/#@_'-]{0,60}",
        "([A-Za-z]{1,6}(://|t\\.co/)?[a-z./]{0,8}[ !]{0,3}){0,6}",
    ];
    runner
        .run(&strings, |s| {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once);
            Ok(())
        })
        .unwrap();

    assert_eq!(normalize("Check https://t.co/abc NOW!!"), "check xurl now");
    assert_eq!(normalize("sooooo gooood"), "soo good");
    assert_eq!(normalize(""), "");

    let vocab = std::fs::read_to_string(data("porter_vocabulary.txt")).unwrap();
    let output = std::fs::read_to_string(data("porter_output.txt")).unwrap();
    let (vocab, output): (Vec<&str>, Vec<&str>) = (vocab.lines().collect(), output.lines().collect());
    assert_eq!(vocab.len(), output.len());
    let mismatches: Vec<String> = vocab
        .iter()
        .zip(&output)
        .filter(|(w, s)| stem(w) != **s)
        .map(|(w, s)| format!("{w} -> {} (expected {s})", stem(w)))
        .collect();
    assert!(mismatches.is_empty(), "{} mismatches, first: {:?}", mismatches.len(), &mismatches[..mismatches.len().min(5)]);
}

// 9 ------------------------------------------------------------------------

fn correlation_sanity() {
    let a = [3.0, 1.5, 4.0, 9.0, 2.6, 5.0];
    let neg: Vec<f64> = a.iter().map(|v| -v).collect();
    assert!((correlate(&a, &a, CorrelationMethod::Pearson).unwrap() - 1.0).abs() <= 1e-12);
    assert!((correlate(&a, &neg, CorrelationMethod::Pearson).unwrap() + 1.0).abs() <= 1e-12);
    let rho = correlate(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0], CorrelationMethod::Spearman).unwrap();
    assert!((rho - 0.8).abs() <= 1e-12, "spearman {rho}");
    for method in [CorrelationMethod::Pearson, CorrelationMethod::Spearman] {
        assert!(matches!(
            correlate(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0], method),
            Err(AnalyticsError::UndefinedCorrelation)
        ));
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn()); 9] = [
        ("metrics from a reference confusion matrix", metric_reproduction),
        ("gradient check and overfit sanity", sentiment_substitutes),
        ("betweenness matches path enumeration", betweenness_oracle),
        ("semantic brand score algebra", sbs_algebra),
        ("two-topic recovery and chained stability", topic_recovery),
        ("gibbs count conservation", count_conservation),
        ("pipeline determinism", pipeline_determinism),
        ("preprocessing conformance", preprocessing_conformance),
        ("correlation sanity", correlation_sanity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => println!("PASS {} {name} ({secs:.1}s)", i + 1),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL {} {name} ({secs:.1}s): {msg}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
