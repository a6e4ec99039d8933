//! Per-chunk document-topic counts in packed CSR form.

use crate::corpus::{Chunk, InvertedIndex};
use crate::error::{Error, Result};
use crate::packed::PackedEntry;

/// One row per local document; entries are `(topic, count)` packed 16+16,
/// ascending by topic, counts strictly positive.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DocTopic {
    row_offsets: Vec<u32>,
    entries: Vec<PackedEntry>,
    row_sums: Vec<u32>,
}

impl DocTopic {
    pub fn num_docs(&self) -> usize {
        self.row_sums.len()
    }

    pub fn row(&self, d: usize) -> &[PackedEntry] {
        &self.entries[self.row_offsets[d] as usize..self.row_offsets[d + 1] as usize]
    }

    pub fn row_sum(&self, d: usize) -> u32 {
        self.row_sums[d]
    }

    /// `D[d][topic]`, by binary search over the sorted row.
    pub fn count(&self, d: usize, topic: u32) -> u32 {
        let row = self.row(d);
        match row.binary_search_by_key(&topic, |e| e.hi()) {
            Ok(i) => row[i].lo(),
            Err(_) => 0,
        }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Rebuilds the rows of a chunk from its current topics without extracting
    /// any per-token values.
    pub fn build(chunk: &Chunk, index: &InvertedIndex, k: u32) -> Result<Self> {
        let mut out = Self::default();
        rebuild_rows(chunk, index, k, &mut out, |_, _| {})?;
        Ok(out)
    }
}

fn rebuild_rows(
    chunk: &Chunk,
    index: &InvertedIndex,
    k: u32,
    out: &mut DocTopic,
    mut per_token: impl FnMut(u32, &[u32]),
) -> Result<()> {
    let n_docs = index.num_docs();
    out.row_offsets.clear();
    out.row_offsets.reserve(n_docs + 1);
    out.row_offsets.push(0);
    out.entries.clear();
    out.row_sums.clear();

    let mut scratch = vec![0u32; k as usize];
    let mut touched: Vec<u32> = Vec::new();
    for d in 0..n_docs {
        let positions = index.row(d);
        for &p in positions {
            let t = chunk.topics[p as usize];
            let slot = &mut scratch[t as usize];
            if *slot == 0 {
                touched.push(t);
            }
            *slot += 1;
        }
        touched.sort_unstable();
        for &t in &touched {
            let c = scratch[t as usize];
            if c > PackedEntry::MAX_HALF {
                return Err(Error::CountOverflow(format!(
                    "document {} has {c} tokens in topic {t}; packed counts hold at most 65535",
                    chunk.docs()[d]
                )));
            }
            out.entries.push(PackedEntry::pack_unchecked(t, c));
        }
        for &p in positions {
            per_token(p, &scratch);
        }
        for &t in &touched {
            scratch[t as usize] = 0;
        }
        touched.clear();
        out.row_offsets.push(out.entries.len() as u32);
        out.row_sums.push(positions.len() as u32);
    }
    Ok(())
}

/// Rebuilds the chunk's document rows by scanning the inverted index and, for
/// every token, reads `C1 = D[d][K1]` and `C2 = D[d][K2]` from its packed
/// `(K1, K2)` pair. Returns the rows and the packed `(C1, C2)` per token.
pub fn rebuild_doc_topic_rows(
    chunk: &Chunk,
    index: &InvertedIndex,
    packed_k: &[PackedEntry],
    k: u32,
) -> Result<(DocTopic, Vec<PackedEntry>)> {
    let mut rows = DocTopic::default();
    let mut packed_c = vec![PackedEntry::default(); chunk.len()];
    rebuild_doc_topic_rows_into(chunk, index, packed_k, k, &mut rows, &mut packed_c)?;
    Ok((rows, packed_c))
}

pub(crate) fn rebuild_doc_topic_rows_into(
    chunk: &Chunk,
    index: &InvertedIndex,
    packed_k: &[PackedEntry],
    k: u32,
    rows: &mut DocTopic,
    packed_c: &mut [PackedEntry],
) -> Result<()> {
    if packed_k.len() != chunk.len() || packed_c.len() != chunk.len() {
        return Err(Error::ShapeMismatch(format!(
            "chunk has {} tokens, got {} K pairs and {} C slots",
            chunk.len(),
            packed_k.len(),
            packed_c.len()
        )));
    }
    rebuild_rows(chunk, index, k, rows, |p, scratch| {
        let (k1, k2) = packed_k[p as usize].unpack();
        // counts were range-checked when the row was emitted
        packed_c[p as usize] =
            PackedEntry::pack_unchecked(scratch[k1 as usize], scratch[k2 as usize]);
    })
}
