//! Independent dense oracles shared by the integration tests.
//!
//! Nothing here goes through the library's count structures or trees: counts
//! are recomputed from the flat topic array and every distribution is scanned
//! linearly over all `K` topics.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skiplda::Corpus;

/// The seven-token, three-document example corpus as a UCI docword file.
pub const GOLDEN_DOCWORD: &str = "3\n4\n7\n1 1 1\n1 3 1\n2 2 1\n2 4 1\n3 1 1\n3 2 1\n3 3 1\n";

/// Its topics in global token order (doc-major, word ascending within a doc).
pub const GOLDEN_TOPICS: [u32; 7] = [2, 1, 1, 0, 1, 0, 3];

/// Global id of the token of word 0 in document 2.
pub const GOLDEN_TOKEN: usize = 4;

pub fn golden_corpus() -> Corpus {
    skiplda::load_uci_bow(GOLDEN_DOCWORD.as_bytes(), None::<&[u8]>).unwrap()
}

/// Dense `W`, `D` and column sums counted straight from a topic array.
pub struct DenseCounts {
    pub k: usize,
    pub w: Vec<Vec<u64>>,
    pub d: Vec<Vec<u64>>,
    pub col: Vec<u64>,
}

pub fn recount(corpus: &Corpus, topics: &[u32], k: usize) -> DenseCounts {
    let mut w = vec![vec![0u64; k]; corpus.num_words()];
    let mut d = vec![vec![0u64; k]; corpus.num_docs];
    let mut col = vec![0u64; k];
    for n in 0..topics.len() {
        let t = topics[n] as usize;
        w[corpus.words[n] as usize][t] += 1;
        d[corpus.docs[n] as usize][t] += 1;
        col[t] += 1;
    }
    DenseCounts { k, w, d, col }
}

impl DenseCounts {
    /// `(W[v][k] + β) / (colsum[k] + Vβ)`.
    pub fn w_hat(&self, v: usize, beta: f64) -> Vec<f64> {
        let vb = self.w.len() as f64 * beta;
        (0..self.k)
            .map(|k| (self.w[v][k] as f64 + beta) / (self.col[k] as f64 + vb))
            .collect()
    }
}

/// Smallest index whose running sum exceeds `x`; a point at the total picks
/// the last positive weight.
pub fn scan(weights: &[f64], x: f64) -> usize {
    let mut acc = 0.0;
    let mut last = usize::MAX;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if w > 0.0 {
            last = i;
        }
        if acc > x {
            return i;
        }
    }
    assert_ne!(last, usize::MAX, "empty distribution");
    last
}

pub fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Dense two-branch draw: `[S | Q]` with `S_k = Ŵ_k D_k`, `Q_k = α Ŵ_k`.
pub fn dense_two_branch(w_hat: &[f64], d: &[u64], alpha: f64, u: f64) -> usize {
    let s_w: Vec<f64> = w_hat.iter().zip(d).map(|(&w, &c)| if c > 0 { w * c as f64 } else { 0.0 }).collect();
    let q_w: Vec<f64> = w_hat.iter().map(|&w| alpha * w).collect();
    let s: f64 = s_w.iter().sum();
    let q: f64 = q_w.iter().sum();
    let total = s + q;
    if s > 0.0 && u <= s / total {
        scan(&s_w, (u * total).min(s))
    } else {
        scan(&q_w, ((1.0 - u) * total).min(q))
    }
}

/// Dense three-branch draw over the `[M | S' | Q']` layout.
pub fn dense_three_branch(w_hat: &[f64], d: &[u64], alpha: f64, u: f64) -> usize {
    let k1 = argmax_first(w_hat);
    let m = w_hat[k1] * (d[k1] as f64 + alpha);
    let mut wp = w_hat.to_vec();
    wp[k1] = 0.0;
    let s_w: Vec<f64> = wp.iter().zip(d).map(|(&w, &c)| if c > 0 { w * c as f64 } else { 0.0 }).collect();
    let q_w: Vec<f64> = wp.iter().map(|&w| if w == 0.0 { 0.0 } else { alpha * w }).collect();
    let s: f64 = s_w.iter().sum();
    let q: f64 = q_w.iter().sum();
    let total = m + s + q;
    let t_m = m / total;
    if u < t_m {
        return k1;
    }
    let t_s = (m + s) / total;
    if u < t_s {
        scan(&s_w, ((u - t_m) / (t_s - t_m) * s).min(s))
    } else {
        scan(&q_w, ((u - t_s) / (1.0 - t_s) * q).min(q))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Reference {
    TwoBranch,
    ThreeBranch,
}

/// One full sweep of the reference sampler: every token is drawn from the
/// counts of `topics` with uniform `u(iteration, token)`.
#[allow(clippy::too_many_arguments)]
pub fn reference_iteration(
    corpus: &Corpus,
    topics: &[u32],
    k: usize,
    alpha: f64,
    beta: f64,
    iteration: u32,
    u: &dyn Fn(u32, u64) -> f64,
    kind: Reference,
) -> Vec<u32> {
    let c = recount(corpus, topics, k);
    let w_hat: Vec<Vec<f64>> = (0..corpus.num_words()).map(|v| c.w_hat(v, beta)).collect();
    (0..topics.len())
        .map(|n| {
            let v = corpus.words[n] as usize;
            let d = &c.d[corpus.docs[n] as usize];
            let x = u(iteration, n as u64);
            let t = match kind {
                Reference::TwoBranch => dense_two_branch(&w_hat[v], d, alpha, x),
                Reference::ThreeBranch => dense_three_branch(&w_hat[v], d, alpha, x),
            };
            t as u32
        })
        .collect()
}

/// Straight-line LLPT over dense counts, base 2.
pub fn dense_llpt(corpus: &Corpus, topics: &[u32], k: usize, alpha: f64, beta: f64) -> f64 {
    let c = recount(corpus, topics, k);
    let mut sum = 0.0;
    for n in 0..topics.len() {
        let v = corpus.words[n] as usize;
        let d = &c.d[corpus.docs[n] as usize];
        let len: u64 = d.iter().sum();
        let wh = c.w_hat(v, beta);
        let p: f64 = (0..k)
            .map(|kk| (d[kk] as f64 + alpha) / (len as f64 + k as f64 * alpha) * wh[kk])
            .sum();
        sum += p.log2();
    }
    sum / topics.len() as f64
}

/// Small random corpus: `docs` documents, up to `max_tokens` tokens total.
pub fn random_corpus(rng: &mut ChaCha8Rng, max_docs: usize, max_words: usize, max_tokens: usize) -> Corpus {
    let num_docs = rng.random_range(1..=max_docs);
    let num_words = rng.random_range(1..=max_words);
    let n = rng.random_range(num_docs..=max_tokens.max(num_docs));
    // skew word draws so some words are frequent
    let docs: Vec<u32> = (0..n).map(|_| rng.random_range(0..num_docs as u32)).collect();
    let words: Vec<u32> = (0..n)
        .map(|_| {
            let a = rng.random_range(0..num_words as u32);
            let b = rng.random_range(0..num_words as u32);
            a.min(b)
        })
        .collect();
    Corpus::from_tokens(num_docs, num_words, docs, words).unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
