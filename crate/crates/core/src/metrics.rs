//! Log-likelihood per token and the per-iteration metrics file.
//!
//! LLPT uses base-2 logarithms:
//!
//! ```text
//! LLPT = (1/N) Σ_n log2 Σ_k (D[d][k] + α) / (|d| + Kα) · Ŵ[v][k]
//! ```
//!
//! The inner sum is evaluated as `(Σ_{D[d][k]>0} D[d][k] Ŵ[v][k] + α Σ_k Ŵ[v][k]) / (|d| + Kα)`,
//! touching only the nonzero entries of each document row.

use std::io::Write;

use crate::corpus::Chunk;
use crate::doc_topic::DocTopic;
use crate::engine::IterationStats;
use crate::error::{Error, Result};
use crate::word_topic::{Normalizer, WordTopic};

pub fn compute_llpt(
    chunks: &[Chunk],
    doc_topics: &[&DocTopic],
    w: &WordTopic,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    if chunks.len() != doc_topics.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} chunks but {} document-topic tables",
            chunks.len(),
            doc_topics.len()
        )));
    }
    let k = w.num_topics();
    let norm = Normalizer::new(w, beta);
    let k_alpha = k as f64 * alpha;
    let mut w_hat = vec![0.0; k];
    let mut total = 0.0f64;
    let mut n = 0usize;
    for (chunk, rows) in chunks.iter().zip(doc_topics) {
        if rows.num_docs() != chunk.num_docs() {
            return Err(Error::ShapeMismatch(format!(
                "chunk owns {} documents, table has {}",
                chunk.num_docs(),
                rows.num_docs()
            )));
        }
        let words = chunk.words();
        let mut current = None;
        let mut smooth = 0.0;
        for (p, &v) in words.iter().enumerate() {
            if current != Some(v) {
                norm.normalize_row(w, v, &mut w_hat);
                smooth = alpha * w_hat.iter().sum::<f64>();
                current = Some(v);
            }
            let d = chunk.doc_local()[p] as usize;
            let s: f64 = rows
                .row(d)
                .iter()
                .map(|e| e.lo() as f64 * w_hat[e.hi() as usize])
                .sum();
            total += ((s + smooth) / (rows.row_sum(d) as f64 + k_alpha)).log2();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(total / n as f64)
}

/// One line of the metrics file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub iteration: u32,
    pub llpt: Option<f64>,
    pub tokens_per_second: f64,
    pub skip_rate_final: f64,
    pub skip_rate_stree: f64,
    pub wall_clock_seconds: f64,
}

impl MetricsRow {
    /// Row for `stats`, with `elapsed` the cumulative training time.
    pub fn from_stats(stats: &IterationStats, elapsed: f64) -> Self {
        Self {
            iteration: stats.iteration,
            llpt: stats.llpt,
            tokens_per_second: stats.tokens_per_second,
            skip_rate_final: stats.skip_rate_final,
            skip_rate_stree: stats.skip_rate_stree,
            wall_clock_seconds: elapsed,
        }
    }
}

pub const METRICS_HEADER: &str =
    "iteration,llpt,tokens_per_second,skip_rate_final,skip_rate_stree,wall_clock_s";

/// Writes the header and one line per row. Reals use Rust's shortest
/// round-trip formatting, so they always carry enough digits to recover the
/// exact value. An unevaluated LLPT is an empty field.
pub fn write_metrics_csv<W: Write>(mut out: W, rows: &[MetricsRow]) -> std::io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in rows {
        write_metrics_row(&mut out, r)?;
    }
    out.flush()
}

pub fn write_metrics_row<W: Write>(mut out: W, r: &MetricsRow) -> std::io::Result<()> {
    let llpt = r.llpt.map(|x| format!("{x:?}")).unwrap_or_default();
    writeln!(
        out,
        "{},{},{:?},{:?},{:?},{:?}",
        r.iteration,
        llpt,
        r.tokens_per_second,
        r.skip_rate_final,
        r.skip_rate_stree,
        r.wall_clock_seconds
    )
}
