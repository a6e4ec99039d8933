//! Work items and dynamic dispatch.
//!
//! A chunk's token list is cut into items, one per word, except that words
//! with more tokens than the split threshold are dissected into several
//! contiguous regions. Workers claim items through a single atomic cursor, so
//! a hot word no longer pins one worker while the others idle.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::corpus::Chunk;
use crate::error::{Error, Result};

/// Contiguous token range of a single word; `region` numbers the pieces of a
/// dissected word from zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WorkItem {
    pub word: u32,
    pub start: u32,
    pub end: u32,
    pub region: u32,
}

impl WorkItem {
    pub fn len(&self) -> usize {
        (self.end - self.start) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start as usize..self.end as usize
    }
}

/// Splits each word's span of a word-sorted chunk into
/// `ceil(count / split_threshold)` regions of at most `split_threshold` tokens.
pub fn build_work_items(chunk: &Chunk, split_threshold: usize) -> Vec<WorkItem> {
    let split = split_threshold.max(1);
    let words = chunk.words();
    let mut items = Vec::new();
    let mut start = 0;
    while start < words.len() {
        let w = words[start];
        let end = start + words[start..].partition_point(|&x| x == w);
        let mut region = 0;
        let mut s = start;
        while s < end {
            let e = s.saturating_add(split).min(end);
            items.push(WorkItem {
                word: w,
                start: s as u32,
                end: e as u32,
                region,
            });
            region += 1;
            s = e;
        }
        start = end;
    }
    items
}

/// Per-region token cap actually used for a chunk: the configured threshold,
/// tightened to a quarter of each worker's fair share when several workers
/// run.
pub fn effective_split_threshold(configured: usize, chunk_tokens: usize, workers: usize) -> usize {
    if workers <= 1 {
        return configured.max(1);
    }
    let share = chunk_tokens.div_ceil(4 * workers).max(1);
    configured.min(share).max(1)
}

/// Which items each worker claimed, in claim order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DispatchReport {
    pub claimed: Vec<Vec<usize>>,
}

impl DispatchReport {
    pub fn total_claimed(&self) -> usize {
        self.claimed.iter().map(Vec::len).sum()
    }
}

/// Runs `work(state, item)` for every item index in `0..num_items`, with one
/// worker per entry of `states`. Workers repeatedly claim the next index from
/// a shared atomic cursor. The first error stops all workers and is returned.
pub fn dispatch<S, F>(num_items: usize, states: &mut [S], work: F) -> Result<DispatchReport>
where
    S: Send,
    F: Fn(&mut S, usize) -> Result<()> + Sync,
{
    if states.is_empty() {
        return Err(Error::Config("dispatch needs at least one worker".into()));
    }
    if states.len() == 1 {
        let mut claimed = Vec::with_capacity(num_items);
        for i in 0..num_items {
            work(&mut states[0], i)?;
            claimed.push(i);
        }
        return Ok(DispatchReport {
            claimed: vec![claimed],
        });
    }

    let cursor = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let first_error: Mutex<Option<Error>> = Mutex::new(None);
    let claimed = std::thread::scope(|scope| {
        let handles: Vec<_> = states
            .iter_mut()
            .map(|state| {
                let (cursor, failed, first_error, work) = (&cursor, &failed, &first_error, &work);
                scope.spawn(move || {
                    let mut mine = Vec::new();
                    while !failed.load(Ordering::Relaxed) {
                        let i = cursor.fetch_add(1, Ordering::Relaxed);
                        if i >= num_items {
                            break;
                        }
                        if let Err(e) = work(state, i) {
                            failed.store(true, Ordering::Relaxed);
                            first_error.lock().unwrap().get_or_insert(e);
                            break;
                        }
                        mine.push(i);
                    }
                    mine
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("dispatch worker panicked"))
            .collect::<Vec<_>>()
    });
    if let Some(e) = first_error.into_inner().unwrap() {
        return Err(e);
    }
    Ok(DispatchReport { claimed })
}

/// Per-worker token loads under the claim protocol when processing time is
/// proportional to item size: each item goes to whichever worker frees up
/// first (lowest index on ties).
pub fn simulate_dispatch(item_sizes: &[usize], workers: usize) -> Vec<u64> {
    let mut loads = vec![0u64; workers.max(1)];
    for &size in item_sizes {
        let (w, _) = loads
            .iter()
            .enumerate()
            .min_by_key(|&(i, &l)| (l, i))
            .expect("at least one worker");
        loads[w] += size as u64;
    }
    loads
}
