//! Synthetic corpora for tests, benchmarks and the acceptance suite.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Zipf};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Parameters of a corpus drawn from the LDA generative model.
#[derive(Clone, Debug, PartialEq)]
pub struct LdaSpec {
    pub num_docs: usize,
    pub num_words: usize,
    pub num_topics: usize,
    /// Document lengths are uniform in `[min_len, max_len]`.
    pub min_len: usize,
    pub max_len: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

impl Default for LdaSpec {
    fn default() -> Self {
        Self {
            num_docs: 2000,
            num_words: 1000,
            num_topics: 20,
            min_len: 80,
            max_len: 120,
            alpha: 0.1,
            beta: 0.01,
            seed: 1,
        }
    }
}

fn dirichlet(rng: &mut impl Rng, conc: f64, n: usize) -> Result<Vec<f64>> {
    let gamma = Gamma::new(conc, 1.0).map_err(|e| Error::Config(e.to_string()))?;
    let mut x: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = x.iter().sum();
    if sum > 0.0 {
        x.iter_mut().for_each(|v| *v /= sum);
    } else {
        // every draw underflowed; fall back to a point mass
        x[rng.random_range(0..n)] = 1.0;
    }
    Ok(x)
}

/// Draws topic-word distributions `φ_k ~ Dir(β)`, document mixtures
/// `θ_d ~ Dir(α)`, then every token's topic and word.
pub fn lda_corpus(spec: &LdaSpec) -> Result<Corpus> {
    if spec.num_docs == 0 || spec.num_words == 0 || spec.num_topics == 0 {
        return Err(Error::Config("synthetic corpus needs docs, words and topics".into()));
    }
    if spec.min_len > spec.max_len {
        return Err(Error::Config("min_len exceeds max_len".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let phi: Vec<WeightedIndex<f64>> = (0..spec.num_topics)
        .map(|_| {
            let p = dirichlet(&mut rng, spec.beta, spec.num_words)?;
            WeightedIndex::new(p).map_err(|e| Error::Config(e.to_string()))
        })
        .collect::<Result<_>>()?;
    let mut docs = Vec::new();
    let mut words = Vec::new();
    for d in 0..spec.num_docs {
        let theta = dirichlet(&mut rng, spec.alpha, spec.num_topics)?;
        let theta = WeightedIndex::new(theta).map_err(|e| Error::Config(e.to_string()))?;
        let len = rng.random_range(spec.min_len..=spec.max_len);
        for _ in 0..len {
            let z = theta.sample(&mut rng);
            words.push(phi[z].sample(&mut rng) as u32);
            docs.push(d as u32);
        }
    }
    Corpus::from_tokens(spec.num_docs, spec.num_words, docs, words)
}

/// Corpus whose words follow a Zipf law with exponent `s` over `num_words`
/// ranks; every document has `doc_len` tokens.
pub fn zipf_corpus(num_docs: usize, doc_len: usize, num_words: usize, s: f64, seed: u64) -> Result<Corpus> {
    let zipf = Zipf::new(num_words as f64, s).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(num_docs * doc_len);
    let mut words = Vec::with_capacity(num_docs * doc_len);
    for d in 0..num_docs {
        for _ in 0..doc_len {
            let rank: f64 = zipf.sample(&mut rng);
            words.push((rank as usize - 1).min(num_words - 1) as u32);
            docs.push(d as u32);
        }
    }
    Corpus::from_tokens(num_docs, num_words, docs, words)
}
