//! Parallel collapsed Gibbs sampling for LDA.
//!
//! Tokens are sampled chunk by chunk against a frozen word-topic snapshot.
//! Each token first tries an exact shortcut that assigns its word's most
//! popular topic from cached counts; the rest fall back to tree-based
//! inverse-CDF sampling over the document and smoothing parts of the
//! conditional. Frequent words keep dense count rows, rare words packed
//! sparse rows.

pub mod checkpoint;
pub mod corpus;
pub mod doc_topic;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod packed;
pub mod rng;
pub mod sampler;
pub mod synth;
pub mod tree;
pub mod word_topic;

pub use checkpoint::Checkpoint;
pub use corpus::{load_uci_bow, relabel_by_frequency, Chunk, Corpus, InvertedIndex, Vocabulary};
pub use doc_topic::{rebuild_doc_topic_rows, DocTopic};
pub use engine::{IterationStats, SamplerKind, Trainer, TrainerConfig};
pub use error::{Error, Result};
pub use metrics::{compute_llpt, write_metrics_csv, MetricsRow};
pub use packed::PackedEntry;
pub use rng::{CounterRng, UniformSource};
pub use tree::PrefixMaxTree;
pub use word_topic::{Normalizer, WordTopic};
