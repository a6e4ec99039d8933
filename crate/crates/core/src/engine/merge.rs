use crate::error::{Error, Result};
use crate::word_topic::WordTopic;

/// One worker's accumulated changes to the dense word-topic rows during an
/// iteration. Entries are signed so a token moving from `k1` to `k2` records
/// `-1` and `+1`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WorkerDelta {
    pub dense: Vec<i32>,
}

impl WorkerDelta {
    pub fn zeros(len: usize) -> Self {
        Self {
            dense: vec![0; len],
        }
    }

    #[inline]
    pub fn moved(&mut self, row_base: usize, from: u32, to: u32) {
        if from != to {
            self.dense[row_base + from as usize] -= 1;
            self.dense[row_base + to as usize] += 1;
        }
    }

    pub fn clear(&mut self) {
        self.dense.fill(0);
    }
}

/// Sums every worker's deltas onto the base snapshot into the canonical copy,
/// publishes it, and resets the replicas (the broadcast step: every worker
/// continues from the merged matrix). Column sums are recomputed once.
pub fn merge_worker_w(base: &mut WordTopic, replicas: &mut [WorkerDelta]) -> Result<()> {
    let len = base.dense().len();
    if let Some(bad) = replicas.iter().find(|r| r.dense.len() != len) {
        return Err(Error::ShapeMismatch(format!(
            "replica has {} dense entries, snapshot has {len}",
            bad.dense.len()
        )));
    }
    let dense = base.dense().to_vec();
    let canonical = base.canonical_mut();
    for (i, (slot, &d)) in canonical.iter_mut().zip(&dense).enumerate() {
        let sum: i64 = d as i64 + replicas.iter().map(|r| r.dense[i] as i64).sum::<i64>();
        if sum < 0 || sum > u32::MAX as i64 {
            return Err(Error::Invariant(format!(
                "merged dense count {sum} at entry {i} is out of range"
            )));
        }
        *slot = sum as u32;
    }
    base.apply_canonical();
    for r in replicas {
        r.clear();
    }
    Ok(())
}
