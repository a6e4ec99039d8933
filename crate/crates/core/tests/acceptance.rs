//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p skiplda --test acceptance`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Mutex;
use std::time::Instant;

use common::*;
use rand::Rng;
use skiplda::engine::dispatch::{build_work_items, dispatch, effective_split_threshold, simulate_dispatch};
use skiplda::sampler::{
    build_doc_tree, compute_m, compute_s_est, s_est_slack, three_branch_sample, top_entries,
    two_branch_sample, WordRow,
};
use skiplda::synth::{lda_corpus, zipf_corpus, LdaSpec};
use skiplda::{
    rebuild_doc_topic_rows, Corpus, CounterRng, InvertedIndex, Normalizer, PackedEntry, PrefixMaxTree,
    SamplerKind, Trainer, TrainerConfig, UniformSource,
};

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(got: &[f64], want: &[f64], tol: f64) -> bool {
    got.len() >= want.len() && got.iter().zip(want).all(|(g, w)| (g - w).abs() <= tol)
}

fn golden_trace() -> Outcome {
    let corpus = golden_corpus();
    let u = |_: u32, n: u64| if n == GOLDEN_TOKEN as u64 { 0.51 } else { 0.37 };
    let cfg = TrainerConfig {
        alpha: 16.7,
        beta: 0.01,
        dense_threshold: Some(0),
        sampler: SamplerKind::TwoBranch,
        ..TrainerConfig::new(4)
    };
    let mut t = Trainer::with_topics(corpus, cfg, u, &GOLDEN_TOPICS).map_err(|e| e.to_string())?;
    let w = t.word_topic();
    let norm = Normalizer::new(w, 0.01);
    let mut row = WordRow::default();
    row.prepare(w, &norm, 0, 16.7, None).map_err(|e| e.to_string())?;
    let scaled: Vec<f64> = row.w_hat.iter().map(|x| x * 16.7).collect();
    check!(within(&scaled, &[0.0818, 5.5477, 16.2190, 0.1603], 1e-3), "alpha*W_hat[0] = {scaled:?}");
    let q = row.q_tree.leaves();
    check!(within(q, &[0.0818, 5.6295, 21.8485, 22.0088], 1e-3), "Q prefix sums {q:?}");
    let mut s = PrefixMaxTree::new();
    build_doc_tree(&row.w_hat, t.doc_topics()[0].row(2), &mut s).map_err(|e| e.to_string())?;
    let sp = s.padded_leaves();
    check!(within(sp, &[0.0049, 0.3371, 0.3467, 0.3467], 1e-3), "S prefix sums {sp:?}");
    let u_prime = (1.0 - 0.51) * (s.total() + row.q_tree.total());
    check!((u_prime - 10.9542).abs() <= 1e-3, "u' = {u_prime}");
    t.run_iteration().map_err(|e| e.to_string())?;
    let topic = t.topics()[GOLDEN_TOKEN];
    check!(topic == 2, "token assigned topic {topic}");
    Ok(format!("u'={u_prime:.4}, topic {topic}"))
}

fn random_instance(rng: &mut rand_chacha::ChaCha8Rng) -> (Vec<f64>, Vec<PackedEntry>, Vec<u64>, f64) {
    let k = rng.random_range(1..=32usize);
    let w_hat: Vec<f64> = (0..k).map(|_| rng.random_range(1e-4..1.0)).collect();
    let mut dense = vec![0u64; k];
    let mut row = Vec::new();
    for (t, slot) in dense.iter_mut().enumerate() {
        if rng.random_bool(0.4) {
            *slot = rng.random_range(1..20);
            row.push(PackedEntry::pack(t as u32, *slot as u32).unwrap());
        }
    }
    (w_hat, row, dense, rng.random_range(0.01..5.0))
}

fn sampler_distribution() -> Outcome {
    const POINTS: usize = 1_000_000;
    let mut rng = seeded(2);
    let mut worst_two = 0.0f64;
    let mut worst_three = 0.0f64;
    let mut s_tree = PrefixMaxTree::new();
    for _ in 0..100 {
        let (w_hat, row, dense, alpha) = random_instance(&mut rng);
        let k = w_hat.len();
        let p: Vec<f64> = (0..k).map(|t| (dense[t] as f64 + alpha) * w_hat[t]).collect();
        let z: f64 = p.iter().sum();

        let mut q_tree = PrefixMaxTree::new();
        skiplda::sampler::build_q_tree(&w_hat, alpha, None, &mut q_tree).unwrap();
        let k1 = argmax_first(&w_hat);
        let mut wp = w_hat.clone();
        wp[k1] = 0.0;
        let mut qp_tree = PrefixMaxTree::new();
        skiplda::sampler::build_q_tree(&w_hat, alpha, Some(k1 as u32), &mut qp_tree).unwrap();
        let m = compute_m(w_hat[k1], dense[k1] as u32, alpha);

        let mut two = vec![0u64; k];
        let mut three = vec![0u64; k];
        for i in 0..POINTS {
            let u = (i as f64 + 0.5) / POINTS as f64;
            two[two_branch_sample(&w_hat, &q_tree, &row, u, &mut s_tree).unwrap() as usize] += 1;
            let (t, _) = three_branch_sample(&wp, &qp_tree, &row, k1 as u32, m, u, &mut s_tree).unwrap();
            three[t as usize] += 1;
        }
        for t in 0..k {
            worst_two = worst_two.max((two[t] as f64 / POINTS as f64 - p[t] / z).abs());
            worst_three = worst_three.max((three[t] as f64 / POINTS as f64 - p[t] / z).abs());
        }
    }
    check!(worst_two <= 2e-3, "two-branch L-inf error {worst_two:e}");
    check!(worst_three <= 2e-3, "three-branch L-inf error {worst_three:e}");
    Ok(format!("max L-inf two-branch {worst_two:.2e}, three-branch {worst_three:.2e}"))
}

fn three_branch_exactness() -> Outcome {
    let mut rng = seeded(3);
    let mut compared = 0usize;
    for case in 0..1000u64 {
        let corpus = random_corpus(&mut rng, 10, 40, 200);
        let k = rng.random_range(2..=16usize);
        let g = rng.random_range(1..=3usize).min(k - 1);
        let cfg = TrainerConfig {
            g,
            chunks: rng.random_range(1..=corpus.num_docs.min(4)),
            workers: rng.random_range(1..=4),
            dense_threshold: Some(rng.random_range(0..6)),
            split_threshold: rng.random_range(1..50),
            alpha: rng.random_range(0.05..3.0),
            beta: rng.random_range(0.001..0.5),
            seed: case,
            llpt_stride: 0,
            ..TrainerConfig::new(k as u32)
        };
        let (alpha, beta) = (cfg.alpha, cfg.beta);
        let mut t = Trainer::new(corpus.clone(), cfg).map_err(|e| e.to_string())?;
        let src = CounterRng::new(case);
        let u = |i: u32, n: u64| src.uniform(i, n);
        let mut topics = t.topics();
        for it in 1..=10 {
            t.run_iteration().map_err(|e| e.to_string())?;
            topics = reference_iteration(&corpus, &topics, k, alpha, beta, it, &u, Reference::ThreeBranch);
            check!(t.topics() == topics, "case {case}: topic arrays differ at iteration {it}");
            compared += topics.len();
        }
    }
    Ok(format!("{compared} token draws identical over 1000 corpora x 10 iterations"))
}

fn s_est_bound() -> Outcome {
    let mut rng = seeded(4);
    let mut relative = 0usize;
    let mut engine = 0usize;
    let mut pairs = 0usize;
    for _ in 0..100_000 {
        let k = rng.random_range(4..=64usize);
        let w_hat: Vec<f64> = (0..k).map(|_| rng.random_range(1e-6..1.0)).collect();
        let d: Vec<u32> = (0..k)
            .map(|_| if rng.random_bool(0.3) { rng.random_range(1..50) } else { 0 })
            .collect();
        let row_sum: u32 = d.iter().sum();
        for g in 1..=3usize {
            let mut ids = vec![0u32; g + 1];
            let mut vals = vec![0.0; g + 1];
            top_entries(&w_hat, &mut ids, &mut vals);
            let b: Vec<u32> = ids[..g].iter().map(|&i| d[i as usize]).collect();
            let est = compute_s_est(&vals, &b, row_sum).unwrap();
            let k1 = argmax_first(&w_hat);
            let s_prime: f64 = (0..k).filter(|&t| t != k1).map(|t| w_hat[t] * d[t] as f64).sum();
            if est * (1.0 + 1e-12) < s_prime {
                relative += 1;
            }
            if est * s_est_slack(k) < s_prime {
                engine += 1;
            }
            pairs += 1;
        }
    }
    check!(relative == 0, "{relative} violations with 1e-12 slack");
    check!(engine == 0, "{engine} violations with the engine's slack");
    Ok(format!("{pairs} (row, g) pairs, 0 violations"))
}

fn determinism() -> Outcome {
    let corpus = lda_corpus(&LdaSpec::default()).map_err(|e| e.to_string())?;
    let mut first: Option<(Vec<u32>, Vec<u32>)> = None;
    for workers in [1, 2, 8] {
        for chunks in [1, 4] {
            let cfg = TrainerConfig {
                workers,
                chunks,
                iterations: 20,
                seed: 5,
                llpt_stride: 0,
                ..TrainerConfig::new(20)
            };
            let mut t = Trainer::new(corpus.clone(), cfg).map_err(|e| e.to_string())?;
            t.run().map_err(|e| e.to_string())?;
            let state = (t.topics(), t.word_topic().densify());
            match &first {
                None => first = Some(state),
                Some(f) => check!(*f == state, "workers={workers} chunks={chunks} diverged"),
            }
        }
    }
    Ok("6 layouts bit-identical after 20 iterations".into())
}

struct ConvergenceRun {
    llpt: Vec<f64>,
    skip_final: Vec<f64>,
    skip_stree: Vec<f64>,
    recount_mismatch: Option<u32>,
}

fn converge(corpus: &Corpus, sampler: SamplerKind, g: usize, seed: u64, verify: bool) -> skiplda::Result<ConvergenceRun> {
    let cfg = TrainerConfig {
        sampler,
        g,
        seed,
        ..TrainerConfig::new(20)
    };
    let mut t = Trainer::new(corpus.clone(), cfg)?;
    let mut run = ConvergenceRun {
        llpt: vec![],
        skip_final: vec![],
        skip_stree: vec![],
        recount_mismatch: None,
    };
    for it in 1..=100 {
        let s = t.run_iteration()?;
        run.llpt.push(s.llpt.expect("stride 1"));
        run.skip_final.push(s.skip_rate_final);
        run.skip_stree.push(s.skip_rate_stree);
        if verify && run.recount_mismatch.is_none() && !hybrid_matches_recount(&t, corpus) {
            run.recount_mismatch = Some(it);
        }
    }
    Ok(run)
}

fn hybrid_matches_recount<R: UniformSource>(t: &Trainer<R>, corpus: &Corpus) -> bool {
    let k = t.config().topics as usize;
    let oracle = recount(corpus, &t.topics(), k);
    let dense = t.word_topic().densify();
    (0..corpus.num_words()).all(|v| {
        let orig = t.vocab().original_id(v as u32) as usize;
        dense[v * k..(v + 1) * k].iter().zip(&oracle.w[orig]).all(|(&a, &b)| a as u64 == b)
    })
}

struct Shared {
    corpus: Corpus,
    three: ConvergenceRun,
    two: ConvergenceRun,
    three_g1: ConvergenceRun,
}

const EXTRA_SEEDS: [u64; 3] = [1, 2, 3];

fn convergence(sh: &Shared) -> Outcome {
    let ma: Vec<f64> = sh.three.llpt.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
    let drops: Vec<usize> = ma.windows(2).enumerate().filter(|(_, w)| w[1] < w[0]).map(|(i, _)| i + 5).collect();
    check!(drops.is_empty(), "moving average decreases ending at iterations {drops:?}");
    let ma2: Vec<f64> = sh.two.llpt.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
    check!(ma2.windows(2).all(|w| w[1] >= w[0]), "two-branch moving average decreases");
    check!(sh.three.llpt[99] > sh.three.llpt[0], "LLPT did not improve");

    // single chains differ by a few tenths of a percent depending on the mode
    // they settle in, so compare the mean over a fixed seed set
    let mut three = vec![sh.three.llpt[99]];
    let mut two = vec![sh.two.llpt[99]];
    for seed in EXTRA_SEEDS {
        three.push(converge(&sh.corpus, SamplerKind::ThreeBranch, 2, seed, false).map_err(|e| e.to_string())?.llpt[99]);
        two.push(converge(&sh.corpus, SamplerKind::TwoBranch, 2, seed, false).map_err(|e| e.to_string())?.llpt[99]);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m3, m2) = (mean(&three), mean(&two));
    let rel = ((m3 - m2) / m2).abs();
    let single = ((sh.three.llpt[99] - sh.two.llpt[99]) / sh.two.llpt[99]).abs();
    check!(rel <= 0.005, "mean final LLPT three-branch {m3:.5} vs two-branch {m2:.5}: {:.3}%", rel * 100.0);
    Ok(format!(
        "LLPT {:.4} -> {:.4}, moving average monotone; mean final three {m3:.4} vs two {m2:.4} ({:.3}%, seed-0 pair {:.3}%)",
        sh.three.llpt[0],
        sh.three.llpt[99],
        rel * 100.0,
        single * 100.0
    ))
}

fn skip_trend(sh: &Shared) -> Outcome {
    let (s10, s100) = (sh.three.skip_final[9], sh.three.skip_final[99]);
    let (g2, g1) = (sh.three.skip_stree[99], sh.three_g1.skip_stree[99]);
    check!(s100 > s10, "skipRateFinal {s100} at 100 vs {s10} at 10");
    check!(g2 >= g1, "skipRateSTree g=2 {g2} < g=1 {g1}");
    Ok(format!(
        "skipRateFinal {s10:.3} -> {s100:.3}; skipRateSTree g=2 {g2:.3} >= g=1 {g1:.3} (skipRateFinal g=2 {s100:.3}, g=1 {:.3})",
        sh.three_g1.skip_final[99]
    ))
}

fn hybrid_storage(sh: &Shared) -> Outcome {
    check!(sh.three.recount_mismatch.is_none(), "LDA run: hybrid differs from recount at iteration {:?}", sh.three.recount_mismatch);
    let corpus = zipf_corpus(2000, 100, 10_000, 1.2, 7).map_err(|e| e.to_string())?;
    let cfg = TrainerConfig {
        llpt_stride: 0,
        ..TrainerConfig::new(1024)
    };
    let mut t = Trainer::new(corpus.clone(), cfg).map_err(|e| e.to_string())?;
    let ratio = |t: &Trainer| {
        let w = t.word_topic();
        (w.storage_bytes(), w.dense_only_bytes().min(w.sparse_only_bytes()), w.csr_only_bytes())
    };
    let (h0, b0, c0) = ratio(&t);
    for it in 1..=10 {
        t.run_iteration().map_err(|e| e.to_string())?;
        check!(hybrid_matches_recount(&t, &corpus), "Zipf run: hybrid differs from recount at iteration {it}");
    }
    let (h, b, c) = ratio(&t);
    let detail = format!(
        "densify == recount every iteration; hybrid/min(dense, packed sparse) = {:.4} at init, {:.4} after 10 iterations (vs 32-bit CSR: {:.4}, {:.4})",
        h0 as f64 / b0 as f64,
        h as f64 / b as f64,
        h0 as f64 / c0 as f64,
        h as f64 / c as f64
    );
    check!(h0 as f64 <= b0 as f64 * 1.01 && h as f64 <= b as f64 * 1.01, "{detail}");
    Ok(detail)
}

fn doc_rebuild() -> Outcome {
    let mut rng = seeded(9);
    for case in 0..1000 {
        let corpus = random_corpus(&mut rng, 20, 30, 400);
        let k = rng.random_range(1..=40u32);
        let topics: Vec<u32> = (0..corpus.num_tokens()).map(|_| rng.random_range(0..k)).collect();
        let corpus = skiplda::relabel_by_frequency(corpus, rng.random_range(0..8));
        let n_chunks = rng.random_range(1..=corpus.num_docs.min(5));
        let mut chunks = skiplda::corpus::partition_into_chunks(&corpus, n_chunks).map_err(|e| e.to_string())?;
        let chunk = &mut chunks[rng.random_range(0..n_chunks)];
        chunk.load_topics(&topics);
        let packed_k: Vec<PackedEntry> = (0..chunk.len())
            .map(|_| PackedEntry::pack(rng.random_range(0..k), rng.random_range(0..k)).unwrap())
            .collect();
        let index = InvertedIndex::build(chunk);
        let (rows, packed_c) = rebuild_doc_topic_rows(chunk, &index, &packed_k, k).map_err(|e| e.to_string())?;
        // brute force: scan the whole chunk for every document
        for d in 0..chunk.num_docs() {
            let mut counts = vec![0u32; k as usize];
            for (p, &dl) in chunk.doc_local().iter().enumerate() {
                if dl as usize == d {
                    counts[chunk.topics[p] as usize] += 1;
                }
            }
            let want: Vec<(u32, u32)> = counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(t, &c)| (t as u32, c)).collect();
            let got: Vec<(u32, u32)> = rows.row(d).iter().map(|e| e.unpack()).collect();
            check!(got == want, "case {case}: document {d} row differs");
            check!(rows.row_sum(d) == counts.iter().sum::<u32>(), "case {case}: row sum of document {d}");
            for (p, &dl) in chunk.doc_local().iter().enumerate() {
                if dl as usize == d {
                    let (k1, k2) = packed_k[p].unpack();
                    let want_c = (counts[k1 as usize], counts[k2 as usize]);
                    check!(packed_c[p].unpack() == want_c, "case {case}: C1/C2 of token {p}");
                }
            }
        }
    }
    Ok("1000 chunks, rows and C1/C2 identical".into())
}

fn scheduling() -> Outcome {
    let corpus = zipf_corpus(2000, 100, 10_000, 1.2, 7).map_err(|e| e.to_string())?;
    let relabeled = skiplda::relabel_by_frequency(corpus.clone(), 1024);
    let chunk = skiplda::corpus::partition_into_chunks(&relabeled, 1).map_err(|e| e.to_string())?.remove(0);
    let mut expected: Vec<(u32, usize)> = chunk.words().iter().enumerate().map(|(p, &w)| (w, p)).collect();
    expected.sort_unstable();
    let n = chunk.len() as f64;

    let mut reference: Option<Vec<u32>> = None;
    let mut worst_split = 0.0f64;
    let mut unsplit_at_16 = 0.0;
    for workers in 1..=16usize {
        let cap = effective_split_threshold(10_000, chunk.len(), workers);
        let items = build_work_items(&chunk, cap);
        let seen = Mutex::new(Vec::with_capacity(chunk.len()));
        let mut states = vec![(); workers];
        dispatch(items.len(), &mut states, |_, i| {
            let it = items[i];
            let mut s = seen.lock().unwrap();
            s.extend(it.range().map(|p| (chunk.words()[p], p)));
            Ok(())
        })
        .map_err(|e| e.to_string())?;
        let mut seen = seen.into_inner().unwrap();
        seen.sort_unstable();
        check!(seen == expected, "{workers} workers: processed multiset differs from token set");

        let sizes: Vec<usize> = items.iter().map(|i| i.len()).collect();
        let loads = simulate_dispatch(&sizes, workers);
        let share = *loads.iter().max().unwrap() as f64 / (n / workers as f64);
        worst_split = worst_split.max(share);
        if workers == 16 {
            let whole: Vec<usize> = build_work_items(&chunk, usize::MAX).iter().map(|i| i.len()).collect();
            let loads = simulate_dispatch(&whole, workers);
            unsplit_at_16 = *loads.iter().max().unwrap() as f64 / (n / workers as f64);
        }

        let cfg = TrainerConfig {
            workers,
            iterations: 1,
            llpt_stride: 0,
            ..TrainerConfig::new(64)
        };
        let mut t = Trainer::new(corpus.clone(), cfg).map_err(|e| e.to_string())?;
        t.run().map_err(|e| e.to_string())?;
        let topics = t.topics();
        match &reference {
            None => reference = Some(topics),
            Some(r) => check!(*r == topics, "{workers} workers: sampled topics differ from 1 worker"),
        }
    }
    check!(worst_split <= 1.3, "max share {worst_split:.3}x mean with splitting");
    check!(unsplit_at_16 > 2.0, "without splitting max share is only {unsplit_at_16:.3}x at 16 workers");
    Ok(format!(
        "exactly-once for 1..=16 workers; max share {worst_split:.3}x mean with splitting, {unsplit_at_16:.3}x without (16 workers)"
    ))
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let secs = start.elapsed().as_secs_f64();
    match &result {
        Ok(msg) => println!("criterion {id:>2} {name}: PASS ({secs:.1}s) {msg}"),
        Err(msg) => println!("criterion {id:>2} {name}: FAIL ({secs:.1}s) {msg}"),
    }
    result.is_ok()
}

fn main() {
    let mut ok = vec![
        run(1, "golden trace", golden_trace),
        run(2, "sampler distribution", sampler_distribution),
        run(3, "three-branch exactness", three_branch_exactness),
        run(4, "S_est bound", s_est_bound),
        run(5, "determinism", determinism),
    ];

    let shared = catch_unwind(|| {
        let corpus = lda_corpus(&LdaSpec::default()).unwrap();
        let three = converge(&corpus, SamplerKind::ThreeBranch, 2, 0, true).unwrap();
        let two = converge(&corpus, SamplerKind::TwoBranch, 2, 0, false).unwrap();
        let three_g1 = converge(&corpus, SamplerKind::ThreeBranch, 1, 0, false).unwrap();
        Shared {
            corpus,
            three,
            two,
            three_g1,
        }
    });
    match &shared {
        Ok(sh) => {
            ok.push(run(6, "convergence", || convergence(sh)));
            ok.push(run(7, "skip-rate trend", || skip_trend(sh)));
            ok.push(run(8, "hybrid storage", || hybrid_storage(sh)));
        }
        Err(_) => {
            for (id, name) in [(6, "convergence"), (7, "skip-rate trend"), (8, "hybrid storage")] {
                ok.push(run(id, name, || Err("training the synthetic corpus failed".into())));
            }
        }
    }
    ok.push(run(9, "D rebuild", doc_rebuild));
    ok.push(run(10, "scheduling", scheduling));

    let passed = ok.iter().filter(|&&b| b).count();
    println!("acceptance: {passed}/{} criteria passed", ok.len());
    if passed != ok.len() {
        std::process::exit(1);
    }
}
