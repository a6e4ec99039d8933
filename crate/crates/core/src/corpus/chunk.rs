use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::Corpus;
use crate::error::{Error, Result};
use crate::rng::UniformSource;

/// Largest supported topic count: topic ids must fit a 16-bit packed half.
pub const MAX_TOPICS: u32 = 1 << 16;

/// A document-disjoint slice of the token list, sorted by word id.
///
/// Documents are addressed by their local index into [`Chunk::docs`]. Topics
/// are the only mutable part once a chunk is built.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Chunk {
    docs: Vec<u32>,
    words: Vec<u32>,
    doc_local: Vec<u32>,
    token_ids: Vec<u32>,
    pub topics: Vec<u32>,
    dense_boundary: usize,
}

impl Chunk {
    fn build(corpus: &Corpus, mut docs: Vec<u32>, mut tokens: Vec<u32>) -> Self {
        docs.sort_unstable();
        tokens.sort_unstable_by_key(|&t| {
            (
                corpus.words[t as usize],
                corpus.docs[t as usize],
                t,
            )
        });
        let words: Vec<u32> = tokens.iter().map(|&t| corpus.words[t as usize]).collect();
        let doc_local = tokens
            .iter()
            .map(|&t| {
                let d = corpus.docs[t as usize];
                docs.binary_search(&d).expect("token doc owned by chunk") as u32
            })
            .collect();
        let dense = corpus.vocab.dense_words() as u32;
        let dense_boundary = words.partition_point(|&w| w < dense);
        Self {
            docs,
            topics: vec![0; words.len()],
            words,
            doc_local,
            token_ids: tokens,
            dense_boundary,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Global ids of owned documents, ascending.
    pub fn docs(&self) -> &[u32] {
        &self.docs
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn words(&self) -> &[u32] {
        &self.words
    }

    /// Local document index of every token.
    pub fn doc_local(&self) -> &[u32] {
        &self.doc_local
    }

    /// Global token id of every token.
    pub fn token_ids(&self) -> &[u32] {
        &self.token_ids
    }

    /// Tokens `[0, dense_boundary)` belong to dense words.
    pub fn dense_boundary(&self) -> usize {
        self.dense_boundary
    }

    /// Read-only token metadata alongside the mutable topic slots.
    pub fn split_mut(&mut self) -> (ChunkTokens<'_>, &mut [u32]) {
        (
            ChunkTokens {
                words: &self.words,
                doc_local: &self.doc_local,
                token_ids: &self.token_ids,
            },
            &mut self.topics,
        )
    }

    /// Copies topics from an array indexed by global token id.
    pub fn load_topics(&mut self, global: &[u32]) {
        for (slot, &t) in self.topics.iter_mut().zip(&self.token_ids) {
            *slot = global[t as usize];
        }
    }

    /// Writes this chunk's topics into an array indexed by global token id.
    pub fn store_topics(&self, global: &mut [u32]) {
        for (&topic, &t) in self.topics.iter().zip(&self.token_ids) {
            global[t as usize] = topic;
        }
    }
}

/// Borrowed view of a chunk's immutable per-token arrays.
#[derive(Clone, Copy, Debug)]
pub struct ChunkTokens<'a> {
    pub words: &'a [u32],
    pub doc_local: &'a [u32],
    pub token_ids: &'a [u32],
}

/// Splits the corpus into `num_chunks` document-disjoint chunks, assigning
/// documents longest-first to the currently lightest chunk.
pub fn partition_into_chunks(corpus: &Corpus, num_chunks: usize) -> Result<Vec<Chunk>> {
    if num_chunks == 0 {
        return Err(Error::Config("number of chunks must be at least 1".into()));
    }
    if num_chunks > corpus.num_docs {
        return Err(Error::Config(format!(
            "{num_chunks} chunks requested for {} documents",
            corpus.num_docs
        )));
    }
    let lengths = corpus.doc_lengths();
    let mut order: Vec<u32> = (0..corpus.num_docs as u32).collect();
    order.sort_by_key(|&d| (Reverse(lengths[d as usize]), d));

    let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
        (0..num_chunks).map(|c| Reverse((0, c))).collect();
    let mut owner = vec![0usize; corpus.num_docs];
    let mut chunk_docs = vec![Vec::new(); num_chunks];
    for d in order {
        let Reverse((load, c)) = heap.pop().expect("non-empty heap");
        owner[d as usize] = c;
        chunk_docs[c].push(d);
        heap.push(Reverse((load + lengths[d as usize], c)));
    }
    let mut chunk_tokens = vec![Vec::new(); num_chunks];
    for (t, &d) in corpus.docs.iter().enumerate() {
        chunk_tokens[owner[d as usize]].push(t as u32);
    }
    Ok(chunk_docs
        .into_iter()
        .zip(chunk_tokens)
        .map(|(docs, tokens)| Chunk::build(corpus, docs, tokens))
        .collect())
}

/// Draws every topic uniformly from `[0, k)` using counter `(0, token id)`.
pub fn initialize_topics(chunks: &mut [Chunk], k: u32, rng: &impl UniformSource) -> Result<()> {
    if k == 0 || k > MAX_TOPICS {
        return Err(Error::Config(format!(
            "topic count {k} outside 1..={MAX_TOPICS}"
        )));
    }
    for chunk in chunks {
        for (slot, &t) in chunk.topics.iter_mut().zip(&chunk.token_ids) {
            *slot = rng.below(0, t as u64, k);
        }
    }
    Ok(())
}

/// Per-chunk CSR from local document index to token positions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InvertedIndex {
    pub row_offsets: Vec<u32>,
    pub token_indices: Vec<u32>,
}

impl InvertedIndex {
    pub fn build(chunk: &Chunk) -> Self {
        let n_docs = chunk.num_docs();
        let mut row_offsets = vec![0u32; n_docs + 1];
        for &d in &chunk.doc_local {
            row_offsets[d as usize + 1] += 1;
        }
        for i in 0..n_docs {
            row_offsets[i + 1] += row_offsets[i];
        }
        let mut cursor = row_offsets.clone();
        let mut token_indices = vec![0u32; chunk.len()];
        for (p, &d) in chunk.doc_local.iter().enumerate() {
            let slot = &mut cursor[d as usize];
            token_indices[*slot as usize] = p as u32;
            *slot += 1;
        }
        Self {
            row_offsets,
            token_indices,
        }
    }

    pub fn num_docs(&self) -> usize {
        self.row_offsets.len() - 1
    }

    /// Token positions of local document `d`.
    pub fn row(&self, d: usize) -> &[u32] {
        &self.token_indices[self.row_offsets[d] as usize..self.row_offsets[d + 1] as usize]
    }
}
