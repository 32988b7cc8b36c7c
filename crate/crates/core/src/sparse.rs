//! Sparse vectors and active index sets.
//!
//! A [`SparseVector`] stores its nonzero entries as parallel arrays of
//! strictly increasing indices and values. Exact zeros are never stored, so
//! [`SparseVector::l0_norm`] is simply the number of stored entries.
//!
//! Checkpoints use a line-oriented text format: a `dim=<n>` header followed
//! by one vector per line, written as space-separated `index:value` pairs.

use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A vector in `R^dim` with only its nonzero coordinates stored.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SparseVector {
    dim: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a vector from `(index, value)` pairs in any order.
    ///
    /// Repeated indices are summed; entries that end up exactly zero are
    /// dropped.
    pub fn from_pairs<I>(dim: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut pairs: Vec<(usize, f64)> = pairs.into_iter().collect();
        if let Some(&(index, _)) = pairs.iter().find(|(i, _)| *i >= dim) {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        pairs.sort_by_key(|&(i, _)| i);
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        let mut out = SparseVector {
            dim,
            indices,
            values,
        };
        out.drop_zeros();
        Ok(out)
    }

    /// Counts occurrences of each index, giving an indicator-count vector.
    pub fn from_indicator_counts(dim: usize, indices: &[usize]) -> Result<Self> {
        Self::from_pairs(dim, indices.iter().map(|&i| (i, 1.0)))
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .unzip();
        SparseVector {
            dim: dense.len(),
            indices,
            values,
        }
    }

    /// Caller guarantees sorted unique in-range indices; zeros are removed.
    pub(crate) fn from_sorted(dim: usize, indices: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(indices.len(), values.len());
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(indices.last().is_none_or(|&i| i < dim));
        let mut out = SparseVector {
            dim,
            indices,
            values,
        };
        out.drop_zeros();
        out
    }

    fn drop_zeros(&mut self) {
        if self.values.contains(&0.0) {
            let mut k = 0;
            for j in 0..self.values.len() {
                if self.values[j] != 0.0 {
                    self.indices[k] = self.indices[j];
                    self.values[k] = self.values[j];
                    k += 1;
                }
            }
            self.indices.truncate(k);
            self.values.truncate(k);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    /// Number of nonzero coordinates.
    pub fn l0_norm(&self) -> usize {
        self.indices.len()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    pub fn scale(&self, alpha: f64) -> SparseVector {
        SparseVector::from_sorted(
            self.dim,
            self.indices.clone(),
            self.values.iter().map(|v| alpha * v).collect(),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Inner product. Uses a merge join for similarly sized operands and
    /// binary search when one side is much sparser than the other.
    pub fn dot(&self, other: &SparseVector) -> Result<f64> {
        check_dims(self.dim, other.dim)?;
        let (small, large) = if self.l0_norm() <= other.l0_norm() {
            (self, other)
        } else {
            (other, self)
        };
        if small.l0_norm() * 16 < large.l0_norm() {
            Ok(gallop_dot(small, large))
        } else {
            Ok(merge_dot(small, large))
        }
    }

    /// Inner product with a dense slice of the same dimension.
    pub fn dot_dense(&self, dense: &[f64]) -> Result<f64> {
        check_dims(self.dim, dense.len())?;
        Ok(self.iter().map(|(i, v)| v * dense[i]).sum())
    }

    /// Returns `self + alpha * x`.
    pub fn add_scaled(&self, alpha: f64, x: &SparseVector) -> Result<SparseVector> {
        axpy(alpha, x, self)
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { left: a, right: b })
    }
}

fn merge_dot(a: &SparseVector, b: &SparseVector) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    while i < a.indices.len() && j < b.indices.len() {
        match a.indices[i].cmp(&b.indices[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                acc += a.values[i] * b.values[j];
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

fn gallop_dot(small: &SparseVector, large: &SparseVector) -> f64 {
    let mut acc = 0.0;
    let mut lo = 0;
    for (i, v) in small.iter() {
        match large.indices[lo..].binary_search(&i) {
            Ok(pos) => {
                acc += v * large.values[lo + pos];
                lo += pos + 1;
            }
            Err(pos) => lo += pos,
        }
        if lo >= large.indices.len() {
            break;
        }
    }
    acc
}

/// Returns `y + alpha * x` in canonical form.
pub fn axpy(alpha: f64, x: &SparseVector, y: &SparseVector) -> Result<SparseVector> {
    check_dims(x.dim, y.dim)?;
    if alpha == 0.0 || x.is_empty() {
        return Ok(y.clone());
    }
    let cap = x.l0_norm() + y.l0_norm();
    let mut indices = Vec::with_capacity(cap);
    let mut values = Vec::with_capacity(cap);
    let (mut i, mut j) = (0, 0);
    while i < x.indices.len() || j < y.indices.len() {
        let xi = x.indices.get(i).copied().unwrap_or(usize::MAX);
        let yj = y.indices.get(j).copied().unwrap_or(usize::MAX);
        let (idx, val) = match xi.cmp(&yj) {
            Ordering::Less => {
                i += 1;
                (xi, alpha * x.values[i - 1])
            }
            Ordering::Greater => {
                j += 1;
                (yj, y.values[j - 1])
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
                (xi, y.values[j - 1] + alpha * x.values[i - 1])
            }
        };
        if val != 0.0 {
            indices.push(idx);
            values.push(val);
        }
    }
    Ok(SparseVector {
        dim: y.dim,
        indices,
        values,
    })
}

pub fn dot(a: &SparseVector, b: &SparseVector) -> Result<f64> {
    a.dot(b)
}

/// A sorted set of coordinate indices: the coordinates perturbed for one input.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ActiveSet {
    dim: usize,
    indices: Vec<usize>,
}

impl ActiveSet {
    /// Sorts and deduplicates `indices`.
    pub fn new(dim: usize, mut indices: Vec<usize>) -> Result<Self> {
        if let Some(&index) = indices.iter().find(|&&i| i >= dim) {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(ActiveSet { dim, indices })
    }

    pub fn empty(dim: usize) -> Self {
        ActiveSet {
            dim,
            indices: Vec::new(),
        }
    }

    /// Every coordinate of `R^dim`.
    pub fn full(dim: usize) -> Self {
        ActiveSet {
            dim,
            indices: (0..dim).collect(),
        }
    }

    /// Union of the supports of `vectors`, all of dimension `dim`.
    pub fn union_of<'a, I>(dim: usize, vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a SparseVector>,
    {
        let mut indices = Vec::new();
        for v in vectors {
            check_dims(dim, v.dim())?;
            indices.extend_from_slice(v.indices());
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(ActiveSet { dim, indices })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }
}

/// Formats one vector as space-separated `index:value` pairs.
///
/// Values use the shortest representation that parses back to the same bits.
pub fn format_pairs(v: &SparseVector) -> String {
    let mut out = String::with_capacity(v.l0_norm() * 24);
    for (n, (i, x)) in v.iter().enumerate() {
        if n > 0 {
            out.push(' ');
        }
        write!(out, "{i}:{x:?}").unwrap();
    }
    out
}

/// Serializes vectors sharing one dimension into the checkpoint text format.
pub fn write_vectors(dim: usize, vectors: &[SparseVector]) -> Result<String> {
    let mut out = format!("dim={dim}\n");
    for v in vectors {
        check_dims(dim, v.dim())?;
        out.push_str(&format_pairs(v));
        out.push('\n');
    }
    Ok(out)
}

/// Parses the checkpoint text format. `origin` names the source in errors.
pub fn read_vectors(text: &str, origin: &str) -> Result<(usize, Vec<SparseVector>)> {
    let mut lines = text.lines().enumerate();
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: origin.to_string(),
        line,
        reason,
    };
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing `dim=<n>` header".into()))?;
    let dim: usize = header
        .trim()
        .strip_prefix("dim=")
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| parse_err(1, format!("bad header `{header}`")))?;
    let mut vectors = Vec::new();
    for (n, line) in lines {
        let mut pairs = Vec::new();
        for tok in line.split_whitespace() {
            let (i, x) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(n + 1, format!("expected index:value, got `{tok}`")))?;
            let i: usize = i
                .parse()
                .map_err(|_| parse_err(n + 1, format!("bad index `{i}`")))?;
            let x: f64 = x
                .parse()
                .map_err(|_| parse_err(n + 1, format!("bad value `{x}`")))?;
            if i >= dim {
                return Err(parse_err(n + 1, format!("index {i} >= dim {dim}")));
            }
            if pairs.last().is_some_and(|&(p, _)| p >= i) {
                return Err(parse_err(n + 1, "indices must be strictly increasing".into()));
            }
            pairs.push((i, x));
        }
        let (indices, values) = pairs.into_iter().unzip();
        vectors.push(SparseVector::from_sorted(dim, indices, values));
    }
    Ok((dim, vectors))
}
