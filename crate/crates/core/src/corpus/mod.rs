//! Corpus ingestion, frequency relabeling and chunking.

mod chunk;
pub mod uci;

use std::io::BufRead;

pub use chunk::{initialize_topics, partition_into_chunks, Chunk, ChunkTokens, InvertedIndex, MAX_TOPICS};

use crate::error::{Error, Result};

/// Word strings and per-word token counts.
///
/// After [`relabel_by_frequency`] the counts are non-increasing in word id and
/// the first `dense_words` ids are exactly the words whose count exceeds the
/// dense threshold.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    token_counts: Vec<u64>,
    dense_words: usize,
    original_ids: Vec<u32>,
}

impl Vocabulary {
    pub fn new(words: Vec<String>, token_counts: Vec<u64>) -> Result<Self> {
        if words.len() != token_counts.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} words but {} counts",
                words.len(),
                token_counts.len()
            )));
        }
        let original_ids = (0..words.len() as u32).collect();
        Ok(Self {
            words,
            token_counts,
            dense_words: 0,
            original_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn token_counts(&self) -> &[u64] {
        &self.token_counts
    }

    pub fn dense_words(&self) -> usize {
        self.dense_words
    }

    pub fn is_dense(&self, id: u32) -> bool {
        (id as usize) < self.dense_words
    }

    /// Original (file) id of relabeled word `id`.
    pub fn original_id(&self, id: u32) -> u32 {
        self.original_ids[id as usize]
    }
}

/// A token multiset: parallel `words`/`docs` arrays indexed by global token id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pub num_docs: usize,
    pub vocab: Vocabulary,
    pub words: Vec<u32>,
    pub docs: Vec<u32>,
}

impl Corpus {
    /// Builds a corpus from `(doc, word)` token arrays, computing word counts.
    /// Words get numeric names.
    pub fn from_tokens(
        num_docs: usize,
        num_words: usize,
        docs: Vec<u32>,
        words: Vec<u32>,
    ) -> Result<Self> {
        let names = (0..num_words).map(|w| w.to_string()).collect();
        Self::with_names(num_docs, names, docs, words)
    }

    pub fn with_names(
        num_docs: usize,
        names: Vec<String>,
        docs: Vec<u32>,
        words: Vec<u32>,
    ) -> Result<Self> {
        if docs.len() != words.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} doc ids but {} word ids",
                docs.len(),
                words.len()
            )));
        }
        if words.len() > u32::MAX as usize {
            return Err(Error::Validation("more than 2^32 - 1 tokens".into()));
        }
        let mut counts = vec![0u64; names.len()];
        for (&d, &w) in docs.iter().zip(&words) {
            if d as usize >= num_docs {
                return Err(Error::Validation(format!("doc id {d} >= {num_docs}")));
            }
            let slot = counts
                .get_mut(w as usize)
                .ok_or_else(|| Error::Validation(format!("word id {w} >= {}", names.len())))?;
            *slot += 1;
        }
        Ok(Self {
            num_docs,
            vocab: Vocabulary::new(names, counts)?,
            words,
            docs,
        })
    }

    pub fn num_tokens(&self) -> usize {
        self.words.len()
    }

    pub fn num_words(&self) -> usize {
        self.vocab.len()
    }

    /// Token count of every document.
    pub fn doc_lengths(&self) -> Vec<u64> {
        let mut len = vec![0u64; self.num_docs];
        for &d in &self.docs {
            len[d as usize] += 1;
        }
        len
    }
}

/// Loads a UCI bag-of-words corpus. Without a vocabulary stream words are
/// named by their 0-based id.
pub fn load_uci_bow<D: BufRead, V: BufRead>(docword: D, vocab: Option<V>) -> Result<Corpus> {
    load_uci_bow_with_limits(docword, vocab, uci::Limits::default())
}

pub fn load_uci_bow_with_limits<D: BufRead, V: BufRead>(
    docword: D,
    vocab: Option<V>,
    limits: uci::Limits,
) -> Result<Corpus> {
    let dw = uci::parse_docword(docword, limits)?;
    let names = match vocab {
        Some(v) => {
            let names = uci::parse_vocab(v)?;
            if names.len() != dw.num_words {
                return Err(Error::Validation(format!(
                    "vocabulary has {} entries but header declares W = {}",
                    names.len(),
                    dw.num_words
                )));
            }
            names
        }
        None => (0..dw.num_words).map(|w| w.to_string()).collect(),
    };
    Corpus::with_names(dw.num_docs, names, dw.docs, dw.words)
}

/// Renumbers words so that token counts are non-increasing (ties keep the
/// original order) and marks words with more than `dense_threshold` tokens
/// as dense.
pub fn relabel_by_frequency(corpus: Corpus, dense_threshold: u64) -> Corpus {
    let Corpus {
        num_docs,
        vocab,
        mut words,
        docs,
    } = corpus;
    let v = vocab.len();
    let mut order: Vec<u32> = (0..v as u32).collect();
    order.sort_by(|&a, &b| {
        vocab.token_counts[b as usize]
            .cmp(&vocab.token_counts[a as usize])
            .then(a.cmp(&b))
    });
    let mut new_id = vec![0u32; v];
    for (new, &old) in order.iter().enumerate() {
        new_id[old as usize] = new as u32;
    }
    for w in &mut words {
        *w = new_id[*w as usize];
    }
    let token_counts: Vec<u64> = order
        .iter()
        .map(|&o| vocab.token_counts[o as usize])
        .collect();
    let dense_words = token_counts.partition_point(|&c| c > dense_threshold);
    let names = order
        .iter()
        .map(|&o| vocab.words[o as usize].clone())
        .collect();
    let original_ids = order
        .iter()
        .map(|&o| vocab.original_ids[o as usize])
        .collect();
    Corpus {
        num_docs,
        vocab: Vocabulary {
            words: names,
            token_counts,
            dense_words,
            original_ids,
        },
        words,
        docs,
    }
}
