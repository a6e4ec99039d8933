//! Two-branch and three-branch token samplers.
//!
//! The two-branch sampler splits `p ∝ (D[d] + α) ∘ Ŵ[v]` into the document
//! part `S = Ŵ[v] · D[d]` and the smoothing part `Q = α Σ Ŵ[v]`. The
//! three-branch sampler additionally singles out the word's most popular
//! topic `K1`:
//!
//! ```text
//! p ∝ D[d] ∘ Ŵ'[v]  +  α Ŵ'[v]  +  (D[d][K1] + α) Ŵ[v][K1] e_K1
//!        S'              Q'                    M
//! ```
//!
//! where `Ŵ'` is `Ŵ` with entry `K1` zeroed. A uniform `u` is mapped onto the
//! layout `[0, t_M) → K1`, `[t_M, t_S) → S'`, `[t_S, 1) → Q'`. Before building
//! any `S'` tree a token compares `u` against `M / (M + S_est + Q')`, where the
//! cheap upper bound `S_est ≥ S'` makes that threshold never exceed `t_M`; a
//! token below it lands in the `M` interval no matter what `S'` is, so skipping
//! it is exact.

use crate::error::{Error, Result};
use crate::packed::PackedEntry;
use crate::tree::PrefixMaxTree;
use crate::word_topic::{Normalizer, WordTopic};

/// Top `g + 1` entries of `Ŵ[v]` for every word, plus the `Q'` mass.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TopTopics {
    width: usize,
    ids: Vec<u32>,
    values: Vec<f64>,
    q_prime: Vec<f64>,
}

impl TopTopics {
    /// Number of tracked entries per word (`g + 1`).
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_words(&self) -> usize {
        self.q_prime.len()
    }

    /// Topic ids `K1, K2, ...` of word `v`, by descending `Ŵ`.
    pub fn ids(&self, v: u32) -> &[u32] {
        let v = v as usize;
        &self.ids[v * self.width..(v + 1) * self.width]
    }

    /// `a1 ≥ a2 ≥ ...` for word `v`.
    pub fn values(&self, v: u32) -> &[f64] {
        let v = v as usize;
        &self.values[v * self.width..(v + 1) * self.width]
    }

    /// `α Σ_k Ŵ'[v][k]`, the residual smoothing mass.
    pub fn q_prime(&self, v: u32) -> f64 {
        self.q_prime[v as usize]
    }

    /// `(K1, K2)` packed for per-token storage.
    pub fn packed_k(&self, v: u32) -> PackedEntry {
        let ids = self.ids(v);
        PackedEntry::pack_unchecked(ids[0], ids[1.min(ids.len() - 1)])
    }
}

/// Largest `n` entries of `row` in descending order; ties go to the smaller
/// index. `ids`/`values` must have length `n`.
pub fn top_entries(row: &[f64], ids: &mut [u32], values: &mut [f64]) {
    let n = ids.len();
    let mut filled = 0;
    for (k, &x) in row.iter().enumerate() {
        if filled == n && x <= values[n - 1] {
            continue;
        }
        let mut pos = filled.min(n - 1);
        if filled < n {
            filled += 1;
        }
        while pos > 0 && values[pos - 1] < x {
            values[pos] = values[pos - 1];
            ids[pos] = ids[pos - 1];
            pos -= 1;
        }
        values[pos] = x;
        ids[pos] = k as u32;
    }
}

#[inline]
fn q_weight(alpha: f64, w_hat: &[f64], k1: usize, k: usize) -> f64 {
    if k == k1 {
        0.0
    } else {
        alpha * w_hat[k]
    }
}

/// Finds the top `g + 1` topics of every normalized word row and the `Q'`
/// mass with the top topic removed.
pub fn mpt_generate(w: &WordTopic, norm: &Normalizer, alpha: f64, g: usize) -> Result<TopTopics> {
    if g < 1 {
        return Err(Error::Config("g must be at least 1".into()));
    }
    let k = w.num_topics();
    let width = g + 1;
    if k < width {
        return Err(Error::Config(format!(
            "three-branch sampling with g = {g} needs at least {width} topics, have {k}"
        )));
    }
    let v_count = w.num_words();
    let mut out = TopTopics {
        width,
        ids: vec![0; v_count * width],
        values: vec![0.0; v_count * width],
        q_prime: vec![0.0; v_count],
    };
    let mut row = vec![0.0; k];
    for v in 0..v_count {
        norm.normalize_row(w, v as u32, &mut row);
        top_entries(
            &row,
            &mut out.ids[v * width..(v + 1) * width],
            &mut out.values[v * width..(v + 1) * width],
        );
        let k1 = out.ids[v * width] as usize;
        let mut acc = 0.0;
        for kk in 0..k {
            acc += q_weight(alpha, &row, k1, kk);
        }
        out.q_prime[v] = acc;
    }
    Ok(out)
}

/// Mass of the most-popular-topic branch, `a1 · (b1 + α)`.
#[inline]
pub fn compute_m(a1: f64, b1: u32, alpha: f64) -> f64 {
    a1 * (b1 as f64 + alpha)
}

/// Upper bound on `S'` from the top entries only:
/// `Σ_{2≤i≤g} a_i b_i + a_{g+1} (rowSum − Σ_{1≤i≤g} b_i)`.
///
/// `a` holds `a1..a_{g+1}` and `b` holds `b1..b_g` (document counts at the
/// same topics).
pub fn compute_s_est(a: &[f64], b: &[u32], row_sum: u32) -> Result<f64> {
    let g = b.len();
    if g < 1 {
        return Err(Error::Config("g must be at least 1".into()));
    }
    if a.len() != g + 1 {
        return Err(Error::ShapeMismatch(format!(
            "S_est with g = {g} needs {} top values, got {}",
            g + 1,
            a.len()
        )));
    }
    let mut head = 0.0;
    for i in 1..g {
        head += a[i] * b[i] as f64;
    }
    let covered: u32 = b.iter().sum();
    let rest = row_sum.saturating_sub(covered);
    Ok(head + a[g] * rest as f64)
}

/// Relative padding on `S_est` that absorbs the rounding of the `S'` sum over
/// at most `k` products, keeping the skip test exact in floating point.
#[inline]
pub fn s_est_slack(k: usize) -> f64 {
    1.0 + (k as f64 + 8.0) * f64::EPSILON
}

/// Outcome of the skip test for one token.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MptVerdict {
    pub skipped: bool,
    pub u: f64,
    pub m: f64,
    pub threshold: f64,
}

/// Decides whether a token is assigned `K1` without building its `S'` tree.
/// `s_est` should already carry [`s_est_slack`].
#[inline]
pub fn mpt_calculate(m: f64, s_est: f64, q_prime: f64, u: f64) -> MptVerdict {
    let threshold = m / (m + s_est + q_prime);
    MptVerdict {
        skipped: u < threshold,
        u,
        m,
        threshold,
    }
}

/// Which part of the layout a three-branch draw landed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    M,
    S,
    Q,
}

fn check_u(u: f64) -> Result<()> {
    if (0.0..1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::OutOfRange { point: u, total: 1.0 })
    }
}

/// Builds the document tree over the nonzero entries of `d_row` with weights
/// `w_hat[topic] · count`. Returns its total.
#[inline]
pub fn build_doc_tree(w_hat: &[f64], d_row: &[PackedEntry], tree: &mut PrefixMaxTree) -> Result<f64> {
    if d_row.is_empty() {
        tree.rebuild([0.0])?;
        return Ok(0.0);
    }
    tree.rebuild(d_row.iter().map(|e| w_hat[e.hi() as usize] * e.lo() as f64))?;
    Ok(tree.total())
}

/// Builds the smoothing tree over `α Ŵ[v]`, with entry `skip` zeroed when
/// given (the `Q'` tree).
pub fn build_q_tree(w_hat: &[f64], alpha: f64, skip: Option<u32>, tree: &mut PrefixMaxTree) -> Result<f64> {
    let k1 = skip.map_or(usize::MAX, |k| k as usize);
    tree.rebuild((0..w_hat.len()).map(|k| q_weight(alpha, w_hat, k1, k)))?;
    Ok(tree.total())
}

/// Two-branch draw. `q_tree` is built over `α Ŵ[v]`; `s_tree` is scratch that
/// receives the tree over `Ŵ[v] ∘ D[d]`.
///
/// `u ≤ S / (S + Q)` descends the S tree at `u (S + Q)`, otherwise the Q tree
/// at `(1 − u)(S + Q)`. An empty document row always takes the Q branch.
pub fn two_branch_sample(
    w_hat: &[f64],
    q_tree: &PrefixMaxTree,
    d_row: &[PackedEntry],
    u: f64,
    s_tree: &mut PrefixMaxTree,
) -> Result<u32> {
    check_u(u)?;
    let s = build_doc_tree(w_hat, d_row, s_tree)?;
    let q = q_tree.total();
    let total = s + q;
    if total <= 0.0 {
        return Err(Error::EmptyDistribution);
    }
    if s > 0.0 && u <= s / total {
        let j = s_tree.descend((u * total).min(s))?;
        Ok(d_row[j].hi())
    } else {
        Ok(q_tree.descend(((1.0 - u) * total).min(q))? as u32)
    }
}

/// Residual three-branch draw for a token that was not skipped.
///
/// `w_hat_prime` is `Ŵ[v]` with entry `k1` zeroed, `q_prime_tree` the tree
/// over `α Ŵ'[v]`, `m` the token's stored `M`.
pub fn three_branch_sample(
    w_hat_prime: &[f64],
    q_prime_tree: &PrefixMaxTree,
    d_row: &[PackedEntry],
    k1: u32,
    m: f64,
    u: f64,
    s_tree: &mut PrefixMaxTree,
) -> Result<(u32, Branch)> {
    check_u(u)?;
    let s = build_doc_tree(w_hat_prime, d_row, s_tree)?;
    let q = q_prime_tree.total();
    let total = m + s + q;
    if total <= 0.0 {
        return Err(Error::EmptyDistribution);
    }
    let t_m = m / total;
    if u < t_m {
        return Ok((k1, Branch::M));
    }
    let t_s = (m + s) / total;
    if u < t_s {
        let x = ((u - t_m) / (t_s - t_m) * s).min(s);
        let j = s_tree.descend(x)?;
        Ok((d_row[j].hi(), Branch::S))
    } else {
        let x = ((u - t_s) / (1.0 - t_s) * q).min(q);
        Ok((q_prime_tree.descend(x)? as u32, Branch::Q))
    }
}

/// Per-word inputs shared by all tokens of one word in one iteration.
#[derive(Clone, Debug, Default)]
pub struct WordRow {
    pub word: u32,
    /// `Ŵ[v]`, or `Ŵ'[v]` in three-branch mode.
    pub w_hat: Vec<f64>,
    pub q_tree: PrefixMaxTree,
    pub k1: Option<u32>,
}

impl WordRow {
    pub fn prepare(
        &mut self,
        w: &WordTopic,
        norm: &Normalizer,
        v: u32,
        alpha: f64,
        k1: Option<u32>,
    ) -> Result<()> {
        self.word = v;
        self.k1 = k1;
        self.w_hat.resize(w.num_topics(), 0.0);
        norm.normalize_row(w, v, &mut self.w_hat);
        build_q_tree(&self.w_hat, alpha, k1, &mut self.q_tree)?;
        if let Some(k1) = k1 {
            self.w_hat[k1 as usize] = 0.0;
        }
        Ok(())
    }
}
