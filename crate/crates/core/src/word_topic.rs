//! Hybrid word-topic matrix: dense rows for frequent words, packed CSR for the
//! rest, plus topic column sums.
//!
//! Dense rows have a canonical copy that receives the iteration's count
//! changes while sampling reads the previous snapshot. Sparse rows are rebuilt
//! from the sparse tail of every chunk after sampling.

use crate::corpus::{Chunk, Vocabulary};
use crate::error::{Error, Result};
use crate::packed::PackedEntry;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SparseRows {
    pub offsets: Vec<u32>,
    pub entries: Vec<PackedEntry>,
}

impl SparseRows {
    pub fn row(&self, r: usize) -> &[PackedEntry] {
        &self.entries[self.offsets[r] as usize..self.offsets[r + 1] as usize]
    }

    pub fn num_rows(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordTopic {
    k: usize,
    num_words: usize,
    dense_words: usize,
    dense: Vec<u32>,
    canonical: Vec<u32>,
    sparse: SparseRows,
    row_counts: Vec<u64>,
    column_sums: Vec<u64>,
}

impl WordTopic {
    /// Counts all chunk topics into a fresh matrix.
    pub fn build(chunks: &[Chunk], vocab: &Vocabulary, k: u32) -> Result<Self> {
        let mut w = Self {
            k: k as usize,
            num_words: vocab.len(),
            dense_words: vocab.dense_words(),
            dense: Vec::new(),
            canonical: Vec::new(),
            sparse: SparseRows::default(),
            row_counts: vocab.token_counts().to_vec(),
            column_sums: vec![0; k as usize],
        };
        w.build_dense(chunks)?;
        w.rebuild_sparse(chunks)?;
        w.recompute_column_sums();
        Ok(w)
    }

    pub fn num_topics(&self) -> usize {
        self.k
    }

    pub fn num_words(&self) -> usize {
        self.num_words
    }

    pub fn dense_words(&self) -> usize {
        self.dense_words
    }

    pub fn is_dense(&self, v: u32) -> bool {
        (v as usize) < self.dense_words
    }

    pub fn column_sums(&self) -> &[u64] {
        &self.column_sums
    }

    pub fn dense_row(&self, v: u32) -> &[u32] {
        let v = v as usize;
        &self.dense[v * self.k..(v + 1) * self.k]
    }

    pub fn sparse_row(&self, v: u32) -> &[PackedEntry] {
        self.sparse.row(v as usize - self.dense_words)
    }

    pub fn dense(&self) -> &[u32] {
        &self.dense
    }

    pub fn canonical(&self) -> &[u32] {
        &self.canonical
    }

    pub fn canonical_mut(&mut self) -> &mut [u32] {
        &mut self.canonical
    }

    pub fn sparse(&self) -> &SparseRows {
        &self.sparse
    }

    /// `W[v][k]` regardless of storage.
    pub fn count(&self, v: u32, k: u32) -> u32 {
        if self.is_dense(v) {
            self.dense_row(v)[k as usize]
        } else {
            let row = self.sparse_row(v);
            match row.binary_search_by_key(&k, |e| e.hi()) {
                Ok(i) => row[i].lo(),
                Err(_) => 0,
            }
        }
    }

    /// Writes row `v` into `out` (length K), zero-filling first for sparse rows.
    pub fn densify_row(&self, v: u32, out: &mut [u32]) {
        if self.is_dense(v) {
            out.copy_from_slice(self.dense_row(v));
        } else {
            out.fill(0);
            for e in self.sparse_row(v) {
                out[e.hi() as usize] = e.lo();
            }
        }
    }

    /// Row-major `V × K` copy of the whole matrix.
    pub fn densify(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.num_words * self.k];
        for (v, row) in out.chunks_exact_mut(self.k.max(1)).enumerate() {
            self.densify_row(v as u32, row);
        }
        out
    }

    /// Recounts dense rows from the dense head of every chunk and resets the
    /// canonical copy to match.
    pub fn build_dense(&mut self, chunks: &[Chunk]) -> Result<()> {
        self.dense.clear();
        self.dense.resize(self.dense_words * self.k, 0);
        for chunk in chunks {
            let head = chunk.dense_boundary();
            for (&w, &t) in chunk.words()[..head].iter().zip(&chunk.topics[..head]) {
                self.dense[w as usize * self.k + t as usize] += 1;
            }
        }
        self.canonical.clone_from(&self.dense);
        Ok(())
    }

    /// Rebuilds the packed CSR rows from the sparse tail of every chunk. Rows
    /// are sorted by topic id.
    pub fn rebuild_sparse(&mut self, chunks: &[Chunk]) -> Result<()> {
        let rows = self.num_words - self.dense_words;
        // bucket topics by word using the known per-word token counts
        let mut offsets = Vec::with_capacity(rows + 1);
        offsets.push(0usize);
        for v in self.dense_words..self.num_words {
            offsets.push(offsets.last().unwrap() + self.row_counts[v] as usize);
        }
        let total = *offsets.last().unwrap();
        let mut bucket = vec![0u32; total];
        let mut cursor = offsets.clone();
        for chunk in chunks {
            let tail = chunk.dense_boundary();
            for (&w, &t) in chunk.words()[tail..].iter().zip(&chunk.topics[tail..]) {
                let r = w as usize - self.dense_words;
                let slot = cursor[r];
                if slot >= offsets[r + 1] {
                    return Err(Error::Invariant(format!(
                        "word {w} has more tokens than its vocabulary count"
                    )));
                }
                bucket[slot] = t;
                cursor[r] += 1;
            }
        }

        self.sparse.offsets.clear();
        self.sparse.offsets.reserve(rows + 1);
        self.sparse.offsets.push(0);
        self.sparse.entries.clear();
        for r in 0..rows {
            let topics = &mut bucket[offsets[r]..cursor[r]];
            topics.sort_unstable();
            let mut i = 0;
            while i < topics.len() {
                let t = topics[i];
                let mut j = i + 1;
                while j < topics.len() && topics[j] == t {
                    j += 1;
                }
                let c = (j - i) as u32;
                if c > PackedEntry::MAX_HALF {
                    return Err(Error::CountOverflow(format!(
                        "sparse word {} has {c} tokens in topic {t}; it should be stored dense",
                        r + self.dense_words
                    )));
                }
                self.sparse.entries.push(PackedEntry::pack_unchecked(t, c));
                i = j;
            }
            self.sparse.offsets.push(self.sparse.entries.len() as u32);
        }
        Ok(())
    }

    pub fn recompute_column_sums(&mut self) {
        self.column_sums.clear();
        self.column_sums.resize(self.k, 0);
        for row in self.dense.chunks_exact(self.k.max(1)) {
            for (s, &c) in self.column_sums.iter_mut().zip(row) {
                *s += c as u64;
            }
        }
        for e in &self.sparse.entries {
            self.column_sums[e.hi() as usize] += e.lo() as u64;
        }
    }

    /// Publishes the canonical dense copy as the new snapshot and refreshes
    /// column sums. The canonical copy keeps the same values so the next
    /// iteration accumulates on top of them.
    pub fn apply_canonical(&mut self) {
        self.dense.clone_from(&self.canonical);
        self.recompute_column_sums();
    }

    /// Bytes held by the hybrid layout: dense rows plus packed CSR.
    pub fn storage_bytes(&self) -> usize {
        self.dense.len() * 4 + self.sparse.offsets.len() * 4 + self.sparse.entries.len() * 4
    }

    /// Bytes a pure dense `V × K` matrix of 32-bit counts would need.
    pub fn dense_only_bytes(&self) -> usize {
        self.num_words * self.k * 4
    }

    /// Bytes a packed CSR over every row would need. Only a valid layout
    /// while no count exceeds 16 bits.
    pub fn sparse_only_bytes(&self) -> usize {
        (self.num_words + 1) * 4 + self.nnz() * 4
    }

    /// Bytes of a conventional three-array CSR (32-bit offsets, column
    /// indices and values) over every row.
    pub fn csr_only_bytes(&self) -> usize {
        (self.num_words + 1) * 4 + self.nnz() * 8
    }

    pub fn nnz(&self) -> usize {
        self.dense.iter().filter(|&&c| c > 0).count() + self.sparse.entries.len()
    }
}

/// Ŵ denominators `colsum[k] + V·β` for one snapshot.
#[derive(Clone, Debug)]
pub struct Normalizer {
    beta: f64,
    denominators: Vec<f64>,
}

impl Normalizer {
    pub fn new(w: &WordTopic, beta: f64) -> Self {
        let vb = w.num_words() as f64 * beta;
        Self {
            beta,
            denominators: w.column_sums().iter().map(|&s| s as f64 + vb).collect(),
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn denominators(&self) -> &[f64] {
        &self.denominators
    }

    /// Ŵ[v][k] = (W[v][k] + β) / (colsum[k] + V·β) for every k.
    pub fn normalize_row(&self, w: &WordTopic, v: u32, out: &mut [f64]) {
        let beta = self.beta;
        if w.is_dense(v) {
            for ((o, &c), &den) in out.iter_mut().zip(w.dense_row(v)).zip(&self.denominators) {
                *o = (c as f64 + beta) / den;
            }
        } else {
            for (o, &den) in out.iter_mut().zip(&self.denominators) {
                *o = beta / den;
            }
            for e in w.sparse_row(v) {
                let k = e.hi() as usize;
                out[k] = (e.lo() as f64 + beta) / self.denominators[k];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{partition_into_chunks, relabel_by_frequency, Corpus};

    fn toy(threshold: u64, topics: &[u32]) -> (Vec<Chunk>, Corpus) {
        // word 0: 3 tokens, word 1: 2 tokens, word 2: 1 token
        let corpus = Corpus::from_tokens(
            2,
            3,
            vec![0, 0, 1, 1, 0, 1],
            vec![0, 0, 0, 1, 1, 2],
        )
        .unwrap();
        let corpus = relabel_by_frequency(corpus, threshold);
        let mut chunks = partition_into_chunks(&corpus, 1).unwrap();
        let mut global = topics.to_vec();
        global.resize(corpus.num_tokens(), 0);
        chunks[0].load_topics(&global);
        (chunks, corpus)
    }

    #[test]
    fn sparse_row_counts_topics() {
        // word 0 gets topics {2,2,5}
        let (chunks, corpus) = toy(100, &[2, 2, 5, 1, 1, 0]);
        let w = WordTopic::build(&chunks, &corpus.vocab, 6).unwrap();
        assert_eq!(w.dense_words(), 0);
        let row: Vec<_> = w.sparse_row(0).iter().map(|e| e.unpack()).collect();
        assert_eq!(row, vec![(2, 2), (5, 1)]);
        assert_eq!(w.column_sums().iter().sum::<u64>(), 6);
    }

    #[test]
    fn no_sparse_words() {
        let (chunks, corpus) = toy(0, &[2, 2, 5, 1, 1, 0]);
        let w = WordTopic::build(&chunks, &corpus.vocab, 6).unwrap();
        assert_eq!(w.sparse().entries.len(), 0);
        assert_eq!(w.sparse().num_rows(), 0);
        assert_eq!(w.dense_row(0), &[0, 0, 2, 0, 0, 1]);
    }

    #[test]
    fn hybrid_and_dense_agree() {
        let topics = [0, 3, 3, 1, 2, 3];
        let (c1, corpus1) = toy(0, &topics);
        let (c2, corpus2) = toy(2, &topics);
        let a = WordTopic::build(&c1, &corpus1.vocab, 4).unwrap();
        let b = WordTopic::build(&c2, &corpus2.vocab, 4).unwrap();
        assert_eq!(b.dense_words(), 1);
        assert_eq!(a.densify(), b.densify());
        assert_eq!(a.column_sums(), b.column_sums());
        for v in 0..3 {
            for k in 0..4 {
                assert_eq!(a.count(v, k), b.count(v, k));
            }
        }
    }

    #[test]
    fn empty_chunk_list_is_all_zero() {
        let (_, corpus) = toy(0, &[]);
        let w = WordTopic::build(&[], &corpus.vocab, 4).unwrap();
        assert!(w.dense().iter().all(|&c| c == 0));
        assert!(w.column_sums().iter().all(|&c| c == 0));
    }

    #[test]
    fn canonical_roundtrip() {
        let (chunks, corpus) = toy(0, &[0, 0, 0, 1, 1, 2]);
        let mut w = WordTopic::build(&chunks, &corpus.vocab, 3).unwrap();
        let before = w.dense().to_vec();
        w.apply_canonical();
        assert_eq!(w.dense(), &before[..]);
        // move one token of word 0 from topic 0 to topic 2
        w.canonical_mut()[0] -= 1;
        w.canonical_mut()[2] += 1;
        w.apply_canonical();
        assert_eq!(w.dense_row(0), &[2, 0, 1]);
        assert_eq!(w.canonical(), w.dense());
        assert_eq!(w.column_sums().iter().sum::<u64>(), 6);
    }

    #[test]
    fn zero_row_normalizes_to_uniform() {
        let (_, corpus) = toy(0, &[]);
        let w = WordTopic::build(&[], &corpus.vocab, 4).unwrap();
        let norm = Normalizer::new(&w, 0.01);
        let mut out = [0.0; 4];
        norm.normalize_row(&w, 1, &mut out);
        for x in out {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sparse_overflow_is_detected() {
        let n = 70_000;
        let corpus = Corpus::from_tokens(2, 1, (0..n).map(|i| (i % 2) as u32).collect(), vec![0; n as usize]).unwrap();
        let corpus = relabel_by_frequency(corpus, u64::MAX);
        let chunks = partition_into_chunks(&corpus, 2).unwrap();
        assert!(matches!(
            WordTopic::build(&chunks, &corpus.vocab, 1),
            Err(Error::CountOverflow(_))
        ));
    }

    #[test]
    fn storage_accounting() {
        let (chunks, corpus) = toy(1, &[0, 0, 1, 1, 1, 0]);
        let w = WordTopic::build(&chunks, &corpus.vocab, 2).unwrap();
        let nnz = w.nnz();
        assert_eq!(w.dense_only_bytes(), 3 * 2 * 4);
        assert_eq!(w.sparse_only_bytes(), 4 * 4 + nnz * 4);
        assert_eq!(w.csr_only_bytes(), 4 * 4 + nnz * 8);
        let sparse_rows = 3 - w.dense_words();
        assert_eq!(
            w.storage_bytes(),
            w.dense_words() * 2 * 4 + (sparse_rows + 1) * 4 + w.sparse().entries.len() * 4
        );
    }
}
