//! Training loop.
//!
//! Each iteration samples every chunk in turn against a frozen snapshot of
//! the word-topic matrix. Workers record their dense-row moves in private
//! delta replicas; sparse rows are recounted from the topic arrays. At the
//! barrier the snapshot is replaced, the top-topic table regenerated and the
//! document rows (with their cached `C1`/`C2` counts) rebuilt for the next
//! iteration.

pub mod dispatch;
pub mod merge;

use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use crate::corpus::{
    initialize_topics, partition_into_chunks, relabel_by_frequency, Chunk, Corpus, InvertedIndex,
    Vocabulary, MAX_TOPICS,
};
use crate::doc_topic::{rebuild_doc_topic_rows_into, DocTopic};
use crate::error::{Error, Result};
use crate::metrics::compute_llpt;
use crate::packed::PackedEntry;
use crate::rng::{CounterRng, UniformSource};
use crate::sampler::{
    compute_m, compute_s_est, mpt_calculate, mpt_generate, s_est_slack, three_branch_sample,
    two_branch_sample, Branch, TopTopics, WordRow,
};
use crate::tree::PrefixMaxTree;
use crate::word_topic::{Normalizer, WordTopic};

use dispatch::{build_work_items, dispatch, effective_split_threshold, WorkItem};
use merge::{merge_worker_w, WorkerDelta};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SamplerKind {
    TwoBranch,
    #[default]
    ThreeBranch,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainerConfig {
    pub topics: u32,
    pub alpha: f64,
    pub beta: f64,
    /// Number of top topics whose document counts enter `S_est`.
    pub g: usize,
    pub chunks: usize,
    pub workers: usize,
    /// Words with more tokens than this are stored dense; `None` means `K`.
    pub dense_threshold: Option<u64>,
    pub split_threshold: usize,
    pub iterations: u32,
    pub seed: u64,
    pub sampler: SamplerKind,
    /// Evaluate LLPT every `llpt_stride` iterations; 0 disables it.
    pub llpt_stride: u32,
}

impl TrainerConfig {
    /// Defaults for `topics` topics: `α = 50 / K`, `β = 0.01`, `g = 2`.
    pub fn new(topics: u32) -> Self {
        Self {
            topics,
            alpha: 50.0 / topics.max(1) as f64,
            beta: 0.01,
            g: 2,
            chunks: 1,
            workers: 1,
            dense_threshold: None,
            split_threshold: 10_000,
            iterations: 100,
            seed: 0,
            sampler: SamplerKind::ThreeBranch,
            llpt_stride: 1,
        }
    }

    pub fn dense_threshold(&self) -> u64 {
        self.dense_threshold.unwrap_or(self.topics as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.topics == 0 || self.topics > MAX_TOPICS {
            return Err(Error::Config(format!(
                "topic count {} outside 1..={MAX_TOPICS}",
                self.topics
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if self.chunks == 0 {
            return Err(Error::Config("need at least one chunk".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("need at least one worker".into()));
        }
        if self.split_threshold == 0 {
            return Err(Error::Config("split threshold must be at least 1".into()));
        }
        if self.sampler == SamplerKind::ThreeBranch {
            if self.g < 1 {
                return Err(Error::Config("g must be at least 1".into()));
            }
            if (self.topics as usize) < self.g + 1 {
                return Err(Error::Config(format!(
                    "three-branch sampling with g = {} needs at least {} topics",
                    self.g,
                    self.g + 1
                )));
            }
        }
        Ok(())
    }
}

/// Per-iteration statistics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationStats {
    pub iteration: u32,
    /// `None` when the LLPT stride skipped this iteration.
    pub llpt: Option<f64>,
    pub tokens_per_second: f64,
    /// Fraction of tokens assigned by the skip test.
    pub skip_rate_final: f64,
    /// Fraction of tokens that never descended an `S'` tree: skipped tokens
    /// plus residual draws that landed in the `M` interval.
    pub skip_rate_stree: f64,
    /// Sampling plus barrier time, excluding LLPT evaluation.
    pub wall_clock: Duration,
}

#[derive(Debug)]
struct ChunkAux {
    index: InvertedIndex,
    doc_topic: DocTopic,
    packed_k: Vec<PackedEntry>,
    packed_c: Vec<PackedEntry>,
    u: Vec<f64>,
    m: Vec<f64>,
    skipped: Vec<bool>,
    items: Vec<WorkItem>,
    /// Shared-row slot for items of words cut into several regions.
    latch_of_item: Vec<Option<u32>>,
    num_latches: usize,
}

#[derive(Debug, Default)]
struct Scratch {
    row: WordRow,
    s_tree: PrefixMaxTree,
    b: Vec<u32>,
    mpt_skips: u64,
    m_hits: u64,
}

/// Mutable per-token state of one work item.
struct ItemSlots<'a> {
    topics: &'a mut [u32],
    u: &'a mut [f64],
    m: &'a mut [f64],
    skipped: &'a mut [bool],
}

fn carve<'a, T>(mut rest: &'a mut [T], items: &[WorkItem]) -> Vec<&'a mut [T]> {
    let mut out = Vec::with_capacity(items.len());
    for it in items {
        let (head, tail) = std::mem::take(&mut rest).split_at_mut(it.len());
        out.push(head);
        rest = tail;
    }
    out
}

pub struct Trainer<R = CounterRng> {
    config: TrainerConfig,
    rng: R,
    vocab: Vocabulary,
    num_docs: usize,
    num_tokens: usize,
    chunks: Vec<Chunk>,
    aux: Vec<ChunkAux>,
    w: WordTopic,
    norm: Normalizer,
    top: Option<TopTopics>,
    deltas: Vec<WorkerDelta>,
    scratch: Vec<Scratch>,
    iteration: u32,
}

impl Trainer<CounterRng> {
    /// Relabels and partitions `corpus` and draws initial topics from the
    /// configured seed.
    pub fn new(corpus: Corpus, config: TrainerConfig) -> Result<Self> {
        let rng = CounterRng::new(config.seed);
        Self::with_source(corpus, config, rng)
    }
}

impl<R: UniformSource> Trainer<R> {
    /// Like [`Trainer::new`] but drawing every uniform from `rng`.
    pub fn with_source(corpus: Corpus, config: TrainerConfig, rng: R) -> Result<Self> {
        Self::assemble(corpus, config, rng, None, 0)
    }

    /// Starts from given topics, indexed by global token id.
    pub fn with_topics(corpus: Corpus, config: TrainerConfig, rng: R, topics: &[u32]) -> Result<Self> {
        Self::assemble(corpus, config, rng, Some(topics), 0)
    }

    /// Resumes from a checkpointed topic array and iteration counter.
    pub fn resume(
        corpus: Corpus,
        config: TrainerConfig,
        rng: R,
        topics: &[u32],
        iteration: u32,
    ) -> Result<Self> {
        Self::assemble(corpus, config, rng, Some(topics), iteration)
    }

    fn assemble(
        corpus: Corpus,
        config: TrainerConfig,
        rng: R,
        topics: Option<&[u32]>,
        iteration: u32,
    ) -> Result<Self> {
        config.validate()?;
        if corpus.num_tokens() == 0 {
            return Err(Error::EmptyCorpus);
        }
        let k = config.topics;
        let corpus = relabel_by_frequency(corpus, config.dense_threshold());
        let mut chunks = partition_into_chunks(&corpus, config.chunks)?;
        match topics {
            None => initialize_topics(&mut chunks, k, &rng)?,
            Some(t) => {
                if t.len() != corpus.num_tokens() {
                    return Err(Error::ShapeMismatch(format!(
                        "{} topics for {} tokens",
                        t.len(),
                        corpus.num_tokens()
                    )));
                }
                if let Some(bad) = t.iter().find(|&&x| x >= k) {
                    return Err(Error::Validation(format!("topic {bad} >= K = {k}")));
                }
                for c in &mut chunks {
                    c.load_topics(t);
                }
            }
        }
        let w = WordTopic::build(&chunks, &corpus.vocab, k)?;
        let norm = Normalizer::new(&w, config.beta);
        let top = match config.sampler {
            SamplerKind::ThreeBranch => Some(mpt_generate(&w, &norm, config.alpha, config.g)?),
            SamplerKind::TwoBranch => None,
        };

        let mut aux = Vec::with_capacity(chunks.len());
        for chunk in &chunks {
            let split = effective_split_threshold(config.split_threshold, chunk.len(), config.workers);
            let items = build_work_items(chunk, split);
            let mut latch_of_item = vec![None; items.len()];
            let mut num_latches = 0u32;
            let mut i = 0;
            while i < items.len() {
                let mut j = i + 1;
                while j < items.len() && items[j].word == items[i].word {
                    j += 1;
                }
                if j - i > 1 {
                    latch_of_item[i..j].fill(Some(num_latches));
                    num_latches += 1;
                }
                i = j;
            }
            let n = chunk.len();
            aux.push(ChunkAux {
                index: InvertedIndex::build(chunk),
                doc_topic: DocTopic::default(),
                packed_k: vec![PackedEntry::default(); n],
                packed_c: vec![PackedEntry::default(); n],
                u: vec![0.0; n],
                m: vec![0.0; n],
                skipped: vec![false; n],
                items,
                latch_of_item,
                num_latches: num_latches as usize,
            });
        }

        let dense_len = w.dense().len();
        let mut trainer = Self {
            vocab: corpus.vocab,
            num_docs: corpus.num_docs,
            num_tokens: corpus.words.len(),
            chunks,
            aux,
            w,
            norm,
            top,
            deltas: (0..config.workers).map(|_| WorkerDelta::zeros(dense_len)).collect(),
            scratch: (0..config.workers).map(|_| Scratch::default()).collect(),
            config,
            rng,
            iteration,
        };
        for ci in 0..trainer.chunks.len() {
            trainer.refresh_chunk(ci)?;
        }
        Ok(trainer)
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    /// Relabeled vocabulary (word ids as used internally).
    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn num_tokens(&self) -> usize {
        self.num_tokens
    }

    /// Completed iterations.
    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn doc_topics(&self) -> Vec<&DocTopic> {
        self.aux.iter().map(|a| &a.doc_topic).collect()
    }

    /// Per-token `(C1, C2)` cache of chunk `ci`.
    pub fn packed_c(&self, ci: usize) -> &[PackedEntry] {
        &self.aux[ci].packed_c
    }

    pub fn work_items(&self, ci: usize) -> &[WorkItem] {
        &self.aux[ci].items
    }

    pub fn word_topic(&self) -> &WordTopic {
        &self.w
    }

    pub fn top_topics(&self) -> Option<&TopTopics> {
        self.top.as_ref()
    }

    /// Current topics indexed by global token id.
    pub fn topics(&self) -> Vec<u32> {
        let mut out = vec![0; self.num_tokens];
        for c in &self.chunks {
            c.store_topics(&mut out);
        }
        out
    }

    pub fn llpt(&self) -> Result<f64> {
        let rows: Vec<&DocTopic> = self.doc_topics();
        compute_llpt(&self.chunks, &rows, &self.w, self.config.alpha, self.config.beta)
    }

    /// Runs the configured number of iterations.
    pub fn run(&mut self) -> Result<Vec<IterationStats>> {
        (0..self.config.iterations).map(|_| self.run_iteration()).collect()
    }

    pub fn run_iteration(&mut self) -> Result<IterationStats> {
        let it = self.iteration + 1;
        let start = Instant::now();
        for s in &mut self.scratch {
            s.mpt_skips = 0;
            s.m_hits = 0;
        }
        for ci in 0..self.chunks.len() {
            match self.config.sampler {
                SamplerKind::ThreeBranch => self.sample_three_branch(ci, it)?,
                SamplerKind::TwoBranch => self.sample_two_branch(ci, it)?,
            }
        }

        self.w.rebuild_sparse(&self.chunks)?;
        merge_worker_w(&mut self.w, &mut self.deltas)?;
        let total: u64 = self.w.column_sums().iter().sum();
        if total != self.num_tokens as u64 {
            return Err(Error::Invariant(format!(
                "column sums add up to {total}, corpus has {} tokens",
                self.num_tokens
            )));
        }
        self.norm = Normalizer::new(&self.w, self.config.beta);
        if self.config.sampler == SamplerKind::ThreeBranch {
            self.top = Some(mpt_generate(&self.w, &self.norm, self.config.alpha, self.config.g)?);
        }
        for ci in 0..self.chunks.len() {
            self.refresh_chunk(ci)?;
        }
        let wall_clock = start.elapsed();
        self.iteration = it;

        let stride = self.config.llpt_stride;
        let llpt = if stride > 0 && it.is_multiple_of(stride) {
            Some(self.llpt()?)
        } else {
            None
        };
        let n = self.num_tokens as f64;
        let skips: u64 = self.scratch.iter().map(|s| s.mpt_skips).sum();
        let m_hits: u64 = self.scratch.iter().map(|s| s.m_hits).sum();
        Ok(IterationStats {
            iteration: it,
            llpt,
            tokens_per_second: n / wall_clock.as_secs_f64().max(1e-9),
            skip_rate_final: skips as f64 / n,
            skip_rate_stree: (skips + m_hits) as f64 / n,
            wall_clock,
        })
    }

    /// Rebuilds document rows and the `(K1, K2)`/`(C1, C2)` caches of a chunk
    /// from its current topics and the current top-topic table.
    fn refresh_chunk(&mut self, ci: usize) -> Result<()> {
        let chunk = &self.chunks[ci];
        let aux = &mut self.aux[ci];
        if let Some(top) = &self.top {
            for (slot, &v) in aux.packed_k.iter_mut().zip(chunk.words()) {
                *slot = top.packed_k(v);
            }
        }
        rebuild_doc_topic_rows_into(
            chunk,
            &aux.index,
            &aux.packed_k,
            self.config.topics,
            &mut aux.doc_topic,
            &mut aux.packed_c,
        )
    }

    fn sample_three_branch(&mut self, ci: usize, it: u32) -> Result<()> {
        let Self {
            config,
            rng,
            chunks,
            aux,
            w,
            norm,
            top,
            deltas,
            scratch,
            ..
        } = self;
        let top = top.as_ref().expect("three-branch mode keeps a top-topic table");
        let aux = &mut aux[ci];
        let (toks, topics) = chunks[ci].split_mut();
        let k = config.topics as usize;
        let g = config.g;
        let alpha = config.alpha;
        let slack = s_est_slack(k);
        let dense_words = w.dense_words() as u32;
        let doc_topic = &aux.doc_topic;
        let packed_c = &aux.packed_c;
        let items = &aux.items;
        let latch_of_item = &aux.latch_of_item;

        let slots: Vec<Mutex<ItemSlots<'_>>> = carve(topics, items)
            .into_iter()
            .zip(carve(&mut aux.u, items))
            .zip(carve(&mut aux.m, items))
            .zip(carve(&mut aux.skipped, items))
            .map(|(((topics, u), m), skipped)| {
                Mutex::new(ItemSlots {
                    topics,
                    u,
                    m,
                    skipped,
                })
            })
            .collect();
        let mut states: Vec<(&mut WorkerDelta, &mut Scratch)> =
            deltas.iter_mut().zip(scratch.iter_mut()).collect();

        // skip test: only top-topic values and cached counts are touched
        dispatch(items.len(), &mut states, |(delta, sc), i| {
            let item = items[i];
            let v = item.word;
            let ids = top.ids(v);
            let vals = top.values(v);
            let q = top.q_prime(v);
            let dense_base = (v < dense_words).then(|| v as usize * k);
            sc.b.resize(g, 0);
            let mut slot = slots[i].lock().expect("item lock");
            for (j, p) in item.range().enumerate() {
                let d = toks.doc_local[p] as usize;
                let (c1, c2) = packed_c[p].unpack();
                sc.b[0] = c1;
                if g >= 2 {
                    sc.b[1] = c2;
                }
                for (b, &id) in sc.b.iter_mut().zip(ids).take(g).skip(2) {
                    *b = doc_topic.count(d, id);
                }
                let m = compute_m(vals[0], c1, alpha);
                let s_est = compute_s_est(vals, &sc.b, doc_topic.row_sum(d))? * slack;
                let u = rng.uniform(it, toks.token_ids[p] as u64);
                let verdict = mpt_calculate(m, s_est, q, u);
                slot.u[j] = u;
                slot.m[j] = m;
                slot.skipped[j] = verdict.skipped;
                if verdict.skipped {
                    let old = slot.topics[j];
                    if let Some(base) = dense_base {
                        delta.moved(base, old, ids[0]);
                    }
                    slot.topics[j] = ids[0];
                    sc.mpt_skips += 1;
                }
            }
            Ok(())
        })?;

        let latches: Vec<OnceLock<std::result::Result<WordRow, String>>> =
            (0..aux.num_latches).map(|_| OnceLock::new()).collect();
        dispatch(items.len(), &mut states, |(delta, sc), i| {
            let item = items[i];
            let v = item.word;
            let mut slot = slots[i].lock().expect("item lock");
            if slot.skipped.iter().all(|&s| s) {
                return Ok(());
            }
            let k1 = top.ids(v)[0];
            let Scratch {
                row: own_row,
                s_tree,
                m_hits,
                ..
            } = &mut **sc;
            let row: &WordRow = match latch_of_item[i] {
                Some(l) => latches[l as usize]
                    .get_or_init(|| {
                        let mut r = WordRow::default();
                        r.prepare(w, norm, v, alpha, Some(k1))
                            .map(|_| r)
                            .map_err(|e| e.to_string())
                    })
                    .as_ref()
                    .map_err(|e| Error::Invariant(e.clone()))?,
                None => {
                    own_row.prepare(w, norm, v, alpha, Some(k1))?;
                    own_row
                }
            };
            let dense_base = (v < dense_words).then(|| v as usize * k);
            for (j, p) in item.range().enumerate() {
                if slot.skipped[j] {
                    continue;
                }
                let d = toks.doc_local[p] as usize;
                let (topic, branch) = three_branch_sample(
                    &row.w_hat,
                    &row.q_tree,
                    doc_topic.row(d),
                    k1,
                    slot.m[j],
                    slot.u[j],
                    s_tree,
                )?;
                if branch == Branch::M {
                    *m_hits += 1;
                }
                let old = slot.topics[j];
                if let Some(base) = dense_base {
                    delta.moved(base, old, topic);
                }
                slot.topics[j] = topic;
            }
            Ok(())
        })?;
        Ok(())
    }

    fn sample_two_branch(&mut self, ci: usize, it: u32) -> Result<()> {
        let Self {
            config,
            rng,
            chunks,
            aux,
            w,
            norm,
            deltas,
            scratch,
            ..
        } = self;
        let aux = &mut aux[ci];
        let (toks, topics) = chunks[ci].split_mut();
        let k = config.topics as usize;
        let alpha = config.alpha;
        let dense_words = w.dense_words() as u32;
        let doc_topic = &aux.doc_topic;
        let items = &aux.items;
        let latch_of_item = &aux.latch_of_item;
        let slots: Vec<Mutex<&mut [u32]>> = carve(topics, items).into_iter().map(Mutex::new).collect();
        let latches: Vec<OnceLock<std::result::Result<WordRow, String>>> =
            (0..aux.num_latches).map(|_| OnceLock::new()).collect();
        let mut states: Vec<(&mut WorkerDelta, &mut Scratch)> =
            deltas.iter_mut().zip(scratch.iter_mut()).collect();

        dispatch(items.len(), &mut states, |(delta, sc), i| {
            let item = items[i];
            let v = item.word;
            let mut slot = slots[i].lock().expect("item lock");
            let Scratch {
                row: own_row,
                s_tree,
                ..
            } = &mut **sc;
            let row: &WordRow = match latch_of_item[i] {
                Some(l) => latches[l as usize]
                    .get_or_init(|| {
                        let mut r = WordRow::default();
                        r.prepare(w, norm, v, alpha, None)
                            .map(|_| r)
                            .map_err(|e| e.to_string())
                    })
                    .as_ref()
                    .map_err(|e| Error::Invariant(e.clone()))?,
                None => {
                    own_row.prepare(w, norm, v, alpha, None)?;
                    own_row
                }
            };
            let dense_base = (v < dense_words).then(|| v as usize * k);
            for (j, p) in item.range().enumerate() {
                let d = toks.doc_local[p] as usize;
                let u = rng.uniform(it, toks.token_ids[p] as u64);
                let topic = two_branch_sample(&row.w_hat, &row.q_tree, doc_topic.row(d), u, s_tree)?;
                let old = slot[j];
                if let Some(base) = dense_base {
                    delta.moved(base, old, topic);
                }
                slot[j] = topic;
            }
            Ok(())
        })?;
        Ok(())
    }
}
