//! The third-order intersection tensor `T[a,b,c] = |S_a ∩ S_b ∩ S_c|`,
//! bootstrapped from the Boolean Gram matrix alone.
//!
//! Zero co-occurrence counts give union sizes through the μ-table, and
//! inclusion–exclusion turns three pairwise unions and one triple union into
//! the triple intersection:
//!
//! ```text
//! |A ∩ B ∩ C| = |A ∪ B ∪ C| − |A ∪ B| − |A ∪ C| − |B ∪ C| + 3k
//! ```
//!
//! Triple counts for a fixed first index `a` come from restricting the
//! complemented Gram matrix to the columns where row `a` is zero and taking
//! pairwise AND-popcounts of the restricted rows.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::{self, BitMatrix};
use crate::error::{param, Error, Result};
use crate::instance::{GramMatrix, SelectionMatrix};
use crate::mu::{InversionLut, MuTable};

/// Above this dimension the dense tensor is refused; use anchors instead.
pub const MAX_DENSE_DIM: usize = 640;

/// Dense symmetric tensor of small intersection counts.
///
/// When built over an anchor subset, index `i` refers to row `anchors[i]` of
/// the Gram matrix it came from.
#[derive(Clone, PartialEq, Eq)]
pub struct IntersectionTensor {
    dim: usize,
    k: usize,
    anchors: Option<Vec<usize>>,
    data: Vec<u8>,
}

/// Descriptive record written next to exported slices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorMeta {
    pub m: usize,
    pub k: usize,
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchors: Option<Vec<usize>>,
}

impl IntersectionTensor {
    fn zeros(dim: usize, k: usize, anchors: Option<Vec<usize>>) -> Result<Self> {
        if dim > MAX_DENSE_DIM {
            return param(format!(
                "dense tensor of dimension {dim} exceeds {MAX_DENSE_DIM}; use anchored mode"
            ));
        }
        Ok(IntersectionTensor {
            dim,
            k,
            anchors,
            data: vec![0; dim * dim * dim],
        })
    }

    /// `Σ_i w_i ⊗ w_i ⊗ w_i` for 0/1 vectors `w_i` of length `dim`.
    pub fn from_boolean_components(dim: usize, k: usize, components: &[Vec<bool>]) -> Result<Self> {
        let mut t = Self::zeros(dim, k, None)?;
        for w in components {
            if w.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: w.len(),
                });
            }
            let support: Vec<usize> = (0..dim).filter(|&i| w[i]).collect();
            for &a in &support {
                for &b in &support {
                    for &c in &support {
                        let idx = t.index(a, b, c);
                        t.data[idx] += 1;
                    }
                }
            }
        }
        Ok(t)
    }

    #[inline]
    fn index(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.dim + b) * self.dim + c
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn anchors(&self) -> Option<&[usize]> {
        self.anchors.as_deref()
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> u8 {
        self.data[self.index(a, b, c)]
    }

    fn set_sym(&mut self, a: usize, b: usize, c: usize, v: u8) {
        for (x, y, z) in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
            let idx = self.index(x, y, z);
            self.data[idx] = v;
        }
    }

    /// Slice `T[:, :, c]` as a real matrix.
    pub fn slice(&self, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |a, b| f64::from(self.get(a, b, c)))
    }

    /// Slice `T[:, :, c]` as integer rows, e.g. for CSV export.
    pub fn slice_rows(&self, c: usize) -> Vec<Vec<u8>> {
        (0..self.dim)
            .map(|a| (0..self.dim).map(|b| self.get(a, b, c)).collect())
            .collect()
    }

    pub fn meta(&self) -> TensorMeta {
        TensorMeta {
            m: self.dim,
            k: self.k,
            mode: if self.anchors.is_some() { "anchored" } else { "full" }.to_string(),
            anchors: self.anchors.clone(),
        }
    }
}

impl std::fmt::Debug for IntersectionTensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IntersectionTensor")
            .field("dim", &self.dim)
            .field("k", &self.k)
            .field("anchors", &self.anchors.as_ref().map(Vec::len))
            .finish()
    }
}

/// Lazy access to tensor entries estimated from a Gram matrix.
///
/// Holds the complemented Gram rows and the count-to-union lookup, and can
/// answer single entries, materialize every slice, or materialize the
/// sub-tensor on an anchor subset.
pub struct TensorBuilder<'a> {
    gram: &'a GramMatrix,
    k: usize,
    zeros: BitMatrix,
    lut: InversionLut,
    clamp: bool,
}

impl<'a> TensorBuilder<'a> {
    pub fn new(gram: &'a GramMatrix, r: usize, k: usize) -> Result<Self> {
        let table = MuTable::new(r, k)?;
        Ok(Self::with_table(gram, &table))
    }

    pub fn with_table(gram: &'a GramMatrix, table: &MuTable) -> Self {
        TensorBuilder {
            gram,
            k: table.k(),
            zeros: gram.bits().complement(),
            lut: table.lut(gram.m()),
            clamp: false,
        }
    }

    /// Clamp out-of-range entries into `0..=k` instead of failing.
    pub fn clamp(mut self, clamp: bool) -> Self {
        self.clamp = clamp;
        self
    }

    pub fn gram(&self) -> &GramMatrix {
        self.gram
    }

    fn check(&self, idx: &[usize]) -> Result<()> {
        let m = self.gram.m();
        match idx.iter().find(|&&i| i >= m) {
            Some(&bad) => Err(Error::IndexOutOfRange { index: bad, bound: m }),
            None => Ok(()),
        }
    }

    /// Estimated `|S_a ∪ S_b|`; exactly `k` when `a == b`.
    pub fn union2(&self, a: usize, b: usize) -> u8 {
        if a == b {
            return self.k as u8;
        }
        self.lut
            .invert(bits::and_count(self.zeros.row(a), self.zeros.row(b)))
    }

    /// Estimated `|S_a ∪ S_b ∪ S_c|`, collapsing repeated indices.
    pub fn union3(&self, a: usize, b: usize, c: usize) -> u8 {
        if a == b || a == c {
            return self.union2(b, c);
        }
        if b == c {
            return self.union2(a, b);
        }
        self.lut.invert(bits::and3_count(
            self.zeros.row(a),
            self.zeros.row(b),
            self.zeros.row(c),
        ))
    }

    fn combine(&self, a: usize, b: usize, c: usize, tabc: u8, tab: u8, tac: u8, tbc: u8) -> Result<u8> {
        let k = self.k as i64;
        let v = i64::from(tabc) - i64::from(tab) - i64::from(tac) - i64::from(tbc) + 3 * k;
        if (0..=k).contains(&v) {
            Ok(v as u8)
        } else if self.clamp {
            Ok(v.clamp(0, k) as u8)
        } else {
            Err(Error::InconsistentEntry {
                a,
                b,
                c,
                value: v,
                k: self.k,
            })
        }
    }

    /// One entry `T[a,b,c]`.
    pub fn entry(&self, a: usize, b: usize, c: usize) -> Result<u8> {
        self.check(&[a, b, c])?;
        self.combine(
            a,
            b,
            c,
            self.union3(a, b, c),
            self.union2(a, b),
            self.union2(a, c),
            self.union2(b, c),
        )
    }

    /// Every slice of the tensor on all `m` rows.
    pub fn build_full(&self) -> Result<IntersectionTensor> {
        let rows: Vec<usize> = (0..self.gram.m()).collect();
        self.build_on(&rows, None)
    }

    /// The sub-tensor on the given rows of the Gram matrix.
    pub fn build_anchored(&self, anchors: &[usize]) -> Result<IntersectionTensor> {
        self.check(anchors)?;
        self.build_on(anchors, Some(anchors.to_vec()))
    }

    fn build_on(&self, rows: &[usize], anchors: Option<Vec<usize>>) -> Result<IntersectionTensor> {
        let n = rows.len();
        let mut t = IntersectionTensor::zeros(n, self.k, anchors)?;
        let pair: Vec<u8> = (0..n * n)
            .into_par_iter()
            .map(|ij| self.union2(rows[ij / n], rows[ij % n]))
            .collect();
        let pair = |i: usize, j: usize| pair[i * n + j];

        // Slice i holds the entries with i <= j <= l; everything else follows
        // by symmetry.
        let slices: Vec<Result<Vec<(usize, usize, u8)>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let a = rows[i];
                // Columns where row a of M is zero, then the complemented
                // rows restricted to those columns.
                let cols: Vec<usize> = bits::ones(self.zeros.row(a)).collect();
                let restricted: Vec<Vec<u64>> = rows[i..]
                    .iter()
                    .map(|&b| bits::gather(self.zeros.row(b), &cols))
                    .collect();
                let mut out = Vec::with_capacity((n - i) * (n - i + 1) / 2);
                for j in i..n {
                    for l in j..n {
                        let (b, c) = (rows[j], rows[l]);
                        let tabc = if i == j || j == l {
                            pair(i, l)
                        } else if a == b || a == c || b == c {
                            self.union3(a, b, c)
                        } else {
                            self.lut
                                .invert(bits::and_count(&restricted[j - i], &restricted[l - i]))
                        };
                        let v = self.combine(a, b, c, tabc, pair(i, j), pair(i, l), pair(j, l))?;
                        out.push((j, l, v));
                    }
                }
                Ok(out)
            })
            .collect();
        for (i, slice) in slices.into_iter().enumerate() {
            for (j, l, v) in slice? {
                t.set_sym(i, j, l, v);
            }
        }
        Ok(t)
    }
}

/// Estimate the full tensor from `M`.
pub fn build_tensor(m: &GramMatrix, r: usize, k: usize) -> Result<IntersectionTensor> {
    TensorBuilder::new(m, r, k)?.build_full()
}

/// Exact tensor computed from the supports of `W`.
pub fn oracle_tensor(w: &SelectionMatrix) -> Result<IntersectionTensor> {
    let m = w.m();
    let masks = w.masks();
    let mut t = IntersectionTensor::zeros(m, w.k(), None)?;
    for a in 0..m {
        for b in a..m {
            for c in b..m {
                let v = bits::and3_count(masks.row(a), masks.row(b), masks.row(c)) as u8;
                t.set_sym(a, b, c, v);
            }
        }
    }
    Ok(t)
}

/// `T(I, I, v) = Σ_c v_c T[:, :, c]`.
pub fn contract(t: &IntersectionTensor, v: &[f64]) -> Result<DMatrix<f64>> {
    let n = t.dim();
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    let mut out = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let base = t.index(a, b, 0);
            let s: f64 = t.data[base..base + n]
                .iter()
                .zip(v)
                .map(|(&x, &y)| f64::from(x) * y)
                .sum();
            out[(a, b)] = s;
            out[(b, a)] = s;
        }
    }
    Ok(out)
}
