//! Multi-indices, the graded index table and probabilists' Hermite polynomials.
//!
//! The index table enumerates every multi-index `α ∈ ℕ^d` with `|α| ≤ K`,
//! grouped by total degree. Inside a degree the order is descending
//! lexicographic, so for `d = 2` the table starts
//! `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...`. Positions in this table
//! are the coordinates used by every coefficient vector and every file
//! format in the crate.

use std::fmt;
use std::sync::{Arc, OnceLock};

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Default upper bound on the number of multi-indices in a table.
pub const DEFAULT_BASIS_CAP: usize = 1 << 21;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    entries: Vec<u32>,
    degree: usize,
}

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        let degree = entries.iter().map(|&a| a as usize).sum();
        Self { entries, degree }
    }

    pub fn zero(dimension: usize) -> Self {
        Self::new(vec![0; dimension])
    }

    /// The unit multi-index `e_i`.
    pub fn unit(dimension: usize, i: usize) -> Self {
        let mut entries = vec![0; dimension];
        entries[i] = 1;
        Self::new(entries)
    }

    /// `e_i + e_j` (which is `2e_i` when `i == j`).
    pub fn pair(dimension: usize, i: usize, j: usize) -> Self {
        let mut entries = vec![0; dimension];
        entries[i] += 1;
        entries[j] += 1;
        Self::new(entries)
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dimension(&self) -> usize {
        self.entries.len()
    }

    /// `α! = Π α_i!`.
    pub fn factorial(&self) -> f64 {
        self.entries.iter().map(|&a| factorial(a as usize)).product()
    }

    /// `h^α = Π h_i^{α_i}` with the convention `0^0 = 1`.
    pub fn monomial(&self, h: &[f64]) -> f64 {
        self.entries.iter().zip(h).map(|(&a, &x)| x.powi(a as i32)).product()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex::new(self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect())
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// `n!` as a float: exact integer product up to 20, log-gamma beyond.
pub fn factorial(n: usize) -> f64 {
    if n <= 20 {
        (1..=n as u64).product::<u64>() as f64
    } else {
        ln_gamma(n as f64 + 1.0).exp()
    }
}

/// Probabilists' Hermite polynomial `He_n(x)` by the three-term recurrence.
pub fn hermite_eval(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `He_0(x), ..., He_max(x)`.
pub fn hermite_table(max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    out.push(1.0);
    if max >= 1 {
        out.push(x);
    }
    for k in 1..max {
        let next = x * out[k] - k as f64 * out[k - 1];
        out.push(next);
    }
    out
}

/// Number of multi-indices of length `d` with `|α| ≤ k`, i.e. `binom(d + k, k)`.
pub fn table_size(d: usize, k: usize) -> u128 {
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        acc = acc.saturating_mul(d as u128 + i) / i;
    }
    acc
}

/// All multi-indices with `|α| ≤ k` in graded, descending-lexicographic order.
pub fn enumerate_indices(d: usize, k: usize) -> Result<Vec<MultiIndex>> {
    enumerate_indices_capped(d, k, DEFAULT_BASIS_CAP)
}

pub fn enumerate_indices_capped(d: usize, k: usize, cap: usize) -> Result<Vec<MultiIndex>> {
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    let entries = table_size(d, k);
    if entries > cap as u128 {
        return Err(Error::BasisTooLarge { entries, cap });
    }
    let mut out = Vec::with_capacity(entries as usize);
    let mut scratch = vec![0u32; d];
    for degree in 0..=k {
        push_compositions(&mut scratch, 0, degree, &mut out);
    }
    Ok(out)
}

fn push_compositions(scratch: &mut [u32], pos: usize, remaining: usize, out: &mut Vec<MultiIndex>) {
    if pos + 1 == scratch.len() {
        scratch[pos] = remaining as u32;
        out.push(MultiIndex::new(scratch.to_vec()));
        return;
    }
    for v in (0..=remaining).rev() {
        scratch[pos] = v as u32;
        push_compositions(scratch, pos + 1, remaining - v, out);
    }
}

/// For every output position `γ`, the list of `(pos α, pos γ−α)` over all `α ≤ γ`.
pub(crate) struct PairTable {
    pub offsets: Vec<usize>,
    pub pairs: Vec<(u32, u32)>,
}

/// The finite-dimensional Gaussian space `(ℝ^d, N(0, I))` with a chaos basis
/// truncated at total degree `K`.
pub struct GaussianSpace {
    dimension: usize,
    max_degree: usize,
    indices: Vec<MultiIndex>,
    degree_offsets: Vec<usize>,
    factorials: Vec<f64>,
    // cumulative composition counts: prefix[m][r] = Σ_{u<r} comp(u, m)
    prefix: Vec<Vec<usize>>,
    // (i, position of α − e_i) for the first nonzero coordinate i of α
    parents: Vec<(u32, u32)>,
    pair_table: OnceLock<PairTable>,
}

impl fmt::Debug for GaussianSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaussianSpace")
            .field("dimension", &self.dimension)
            .field("max_degree", &self.max_degree)
            .field("len", &self.indices.len())
            .finish()
    }
}

impl GaussianSpace {
    pub fn new(dimension: usize, max_degree: usize) -> Result<Arc<Self>> {
        Self::with_cap(dimension, max_degree, DEFAULT_BASIS_CAP)
    }

    pub fn with_cap(dimension: usize, max_degree: usize, cap: usize) -> Result<Arc<Self>> {
        let indices = enumerate_indices_capped(dimension, max_degree, cap)?;
        let mut degree_offsets = vec![0usize; max_degree + 2];
        for idx in &indices {
            degree_offsets[idx.degree() + 1] += 1;
        }
        for k in 1..degree_offsets.len() {
            degree_offsets[k] += degree_offsets[k - 1];
        }
        let factorials = indices.iter().map(MultiIndex::factorial).collect();

        // comp(r, m): compositions of r into m nonnegative parts.
        let comp = |r: usize, m: usize| -> usize {
            if m == 0 {
                usize::from(r == 0)
            } else {
                table_size(m - 1, r) as usize
            }
        };
        let prefix = (0..dimension)
            .map(|m| {
                let mut row = vec![0usize; max_degree + 2];
                for r in 0..=max_degree {
                    row[r + 1] = row[r] + comp(r, m);
                }
                row
            })
            .collect();

        let mut space = Self {
            dimension,
            max_degree,
            indices,
            degree_offsets,
            factorials,
            prefix,
            parents: Vec::new(),
            pair_table: OnceLock::new(),
        };
        let mut parents = Vec::with_capacity(space.indices.len());
        parents.push((0, 0));
        for idx in &space.indices[1..] {
            let i = idx.entries.iter().position(|&a| a > 0).expect("nonzero index");
            let mut entries = idx.entries.clone();
            entries[i] -= 1;
            let p = space.position_of(&entries);
            parents.push((i as u32, p as u32));
        }
        space.parents = parents;
        Ok(Arc::new(space))
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    #[allow(clippy::should_implement_trait)]
    pub fn index(&self, position: usize) -> &MultiIndex {
        &self.indices[position]
    }

    /// `α!` for the index at `position`.
    pub fn factorial_at(&self, position: usize) -> f64 {
        self.factorials[position]
    }

    pub(crate) fn factorials(&self) -> &[f64] {
        &self.factorials
    }

    pub(crate) fn parents(&self) -> &[(u32, u32)] {
        &self.parents
    }

    /// Positions `[start, end)` holding the indices of total degree `k`.
    pub fn degree_range(&self, k: usize) -> std::ops::Range<usize> {
        self.degree_offsets[k]..self.degree_offsets[k + 1]
    }

    /// Number of positions with degree `≤ k`.
    pub fn len_up_to(&self, k: usize) -> usize {
        self.degree_offsets[k.min(self.max_degree) + 1]
    }

    pub fn same_as(&self, other: &GaussianSpace) -> bool {
        std::ptr::eq(self, other) || (self.dimension == other.dimension && self.max_degree == other.max_degree)
    }

    /// Table position of `α`, or `None` when its degree exceeds `K` or the
    /// length is wrong.
    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        if alpha.dimension() != self.dimension || alpha.degree() > self.max_degree {
            return None;
        }
        Some(self.position_of(alpha.entries()))
    }

    fn position_of(&self, entries: &[u32]) -> usize {
        let degree: usize = entries.iter().map(|&a| a as usize).sum();
        let mut pos = self.degree_offsets[degree];
        let mut remaining = degree;
        for (i, &a) in entries.iter().enumerate().take(self.dimension - 1) {
            let a = a as usize;
            // indices sharing the prefix with a larger entry at i come first
            pos += self.prefix[self.dimension - i - 1][remaining - a];
            remaining -= a;
        }
        pos
    }

    pub fn unit_position(&self, i: usize) -> usize {
        self.position_of(MultiIndex::unit(self.dimension, i).entries())
    }

    pub fn pair_position(&self, i: usize, j: usize) -> usize {
        self.position_of(MultiIndex::pair(self.dimension, i, j).entries())
    }

    pub(crate) fn pair_table(&self) -> &PairTable {
        self.pair_table.get_or_init(|| self.build_pair_table())
    }

    fn build_pair_table(&self) -> PairTable {
        let mut offsets = Vec::with_capacity(self.len() + 1);
        let mut pairs = Vec::new();
        offsets.push(0);
        let d = self.dimension;
        let mut sub = vec![0u32; d];
        let mut rest = vec![0u32; d];
        for gamma in &self.indices {
            let g = gamma.entries();
            sub.iter_mut().for_each(|s| *s = 0);
            loop {
                for i in 0..d {
                    rest[i] = g[i] - sub[i];
                }
                pairs.push((self.position_of(&sub) as u32, self.position_of(&rest) as u32));
                // odometer over the box 0 ≤ sub ≤ γ
                let mut i = 0;
                while i < d {
                    if sub[i] < g[i] {
                        sub[i] += 1;
                        break;
                    }
                    sub[i] = 0;
                    i += 1;
                }
                if i == d {
                    break;
                }
            }
            offsets.push(pairs.len());
        }
        PairTable { offsets, pairs }
    }
}
