//! Prefix-sum max trees for inverse-CDF sampling.
//!
//! Leaves hold the running prefix sums of a weight vector (padded with the
//! total up to a power of two) and each internal node holds the larger of its
//! children, i.e. the largest prefix in its subtree. Descending with a point
//! `x` returns the smallest index whose prefix sum is strictly greater than
//! `x`, so zero-weight entries own empty intervals and are never returned.

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct PrefixMaxTree {
    len: usize,
    width: usize,
    nodes: Vec<f64>,
    last_positive: Option<usize>,
}

impl PrefixMaxTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn build(weights: &[f64]) -> Result<Self> {
        let mut tree = Self::new();
        tree.rebuild(weights.iter().copied())?;
        Ok(tree)
    }

    /// Rebuilds in place, reusing the node buffer.
    pub fn rebuild<I>(&mut self, weights: I) -> Result<()>
    where
        I: IntoIterator<Item = f64>,
        I::IntoIter: ExactSizeIterator,
    {
        let weights = weights.into_iter();
        let len = weights.len();
        if len == 0 {
            return Err(Error::Validation("tree needs at least one weight".into()));
        }
        let width = len.next_power_of_two();
        self.nodes.clear();
        self.nodes.resize(2 * width, 0.0);
        self.len = len;
        self.width = width;
        self.last_positive = None;

        let mut acc = 0.0f64;
        for (i, w) in weights.enumerate() {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidWeight {
                    index: i,
                    weight: w,
                });
            }
            if w > 0.0 {
                self.last_positive = Some(i);
            }
            acc += w;
            self.nodes[width + i] = acc;
        }
        for slot in &mut self.nodes[width + len..] {
            *slot = acc;
        }
        for i in (1..width).rev() {
            self.nodes[i] = self.nodes[2 * i].max(self.nodes[2 * i + 1]);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Prefix sums, one per weight.
    pub fn leaves(&self) -> &[f64] {
        &self.nodes[self.width..self.width + self.len]
    }

    /// The full leaf level, including the padding up to `width`.
    pub fn padded_leaves(&self) -> &[f64] {
        &self.nodes[self.width..2 * self.width]
    }

    pub fn total(&self) -> f64 {
        if self.len == 0 {
            0.0
        } else {
            self.nodes[self.width + self.len - 1]
        }
    }

    pub fn root(&self) -> f64 {
        if self.width == 1 {
            self.nodes.get(1).copied().unwrap_or(0.0)
        } else {
            self.nodes[1]
        }
    }

    /// Internal node `i` (1-based heap order); `node(1)` is the root.
    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Smallest index with prefix sum `> point`. A point equal to the total
    /// maps to the last positive-weight index.
    pub fn descend(&self, point: f64) -> Result<usize> {
        let total = self.total();
        if !(point >= 0.0 && point <= total) {
            return Err(Error::OutOfRange { point, total });
        }
        let Some(last) = self.last_positive else {
            return Err(Error::EmptyDistribution);
        };
        if point >= total {
            return Ok(last);
        }
        let mut node = 1;
        while node < self.width {
            let left = 2 * node;
            node = if point < self.nodes[left] { left } else { left + 1 };
        }
        Ok(node - self.width)
    }
}
