//! Instances: k-row-sparse selection matrices, their Gram matrices over the
//! Boolean semiring and over the integers, and the factorization objective.
//!
//! A selection matrix with `m` rows and `r` columns is also the incidence
//! matrix of a `k`-uniform hypergraph on `r` vertices whose hyperedges are the
//! rows. Its Boolean Gram matrix is the adjacency matrix of the line graph of
//! that hypergraph, with self-loops on the diagonal.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::{self, BitMatrix};
use crate::error::{param, Error, Result};
use crate::seed::Seed;

/// `m x r` Boolean matrix whose rows each hold exactly `k` ones.
///
/// Supports are kept twice: as sorted index lists and as packed `r`-bit
/// masks. The masks drive every intersection count.
#[derive(Clone, PartialEq, Eq)]
pub struct SelectionMatrix {
    r: usize,
    k: usize,
    supports: Vec<Vec<usize>>,
    masks: BitMatrix,
}

impl SelectionMatrix {
    /// Build from row supports. Each support is sorted; duplicates, indices
    /// outside `0..r` and supports of the wrong size are rejected.
    pub fn from_supports(r: usize, k: usize, supports: Vec<Vec<usize>>) -> Result<Self> {
        if r == 0 || k == 0 || k > r {
            return param(format!("need 1 <= k <= r, got k={k}, r={r}"));
        }
        if k > u8::MAX as usize {
            return param(format!("row sparsity k={k} exceeds 255"));
        }
        if supports.is_empty() {
            return param("a selection matrix needs at least one row");
        }
        let mut masks = BitMatrix::zeros(supports.len(), r);
        let mut sorted = Vec::with_capacity(supports.len());
        for (i, mut s) in supports.into_iter().enumerate() {
            s.sort_unstable();
            s.dedup();
            if s.len() != k {
                return Err(Error::Sparsity {
                    row: i,
                    ones: s.len(),
                    k,
                });
            }
            if let Some(&bad) = s.iter().find(|&&j| j >= r) {
                return Err(Error::IndexOutOfRange { index: bad, bound: r });
            }
            for &j in &s {
                masks.set(i, j, true);
            }
            sorted.push(s);
        }
        Ok(SelectionMatrix {
            r,
            k,
            supports: sorted,
            masks,
        })
    }

    /// Build from a dense 0/1 matrix given row by row.
    pub fn from_dense(r: usize, k: usize, rows: &[Vec<bool>]) -> Result<Self> {
        let supports = rows
            .iter()
            .map(|row| {
                if row.len() != r {
                    return Err(Error::DimensionMismatch {
                        expected: r,
                        found: row.len(),
                    });
                }
                Ok(row.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j).collect())
            })
            .collect::<Result<Vec<Vec<usize>>>>()?;
        Self::from_supports(r, k, supports)
    }

    pub fn m(&self) -> usize {
        self.supports.len()
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn support(&self, row: usize) -> &[usize] {
        &self.supports[row]
    }

    pub fn supports(&self) -> &[Vec<usize>] {
        &self.supports
    }

    pub fn masks(&self) -> &BitMatrix {
        &self.masks
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.masks.get(row, col)
    }

    /// `|S_a ∩ S_b|`.
    pub fn intersection(&self, a: usize, b: usize) -> usize {
        bits::and_count(self.masks.row(a), self.masks.row(b))
    }

    /// The columns as an `r x m` bit matrix (row `i` is column `i`).
    pub fn columns(&self) -> BitMatrix {
        self.masks.transpose()
    }

    /// Dense real copy, `m x r`.
    pub fn to_real(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.m(), self.r, |i, j| f64::from(u8::from(self.get(i, j))))
    }

    /// Relabel columns: column `j` of the input becomes column `perm[j]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.r)?;
        let supports = self
            .supports
            .iter()
            .map(|s| s.iter().map(|&j| perm[j]).collect())
            .collect();
        Self::from_supports(self.r, self.k, supports)
    }

    /// Rows restricted to the given row indices, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let supports = rows
            .iter()
            .map(|&i| {
                self.supports
                    .get(i)
                    .cloned()
                    .ok_or(Error::IndexOutOfRange { index: i, bound: self.m() })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_supports(self.r, self.k, supports)
    }

    /// Edges `(a, b)`, `a < b`, of the line graph of the row hypergraph.
    pub fn line_graph_edges(&self) -> Vec<(usize, usize)> {
        let m = self.m();
        let mut edges = Vec::new();
        for a in 0..m {
            for b in a + 1..m {
                if bits::intersects(self.masks.row(a), self.masks.row(b)) {
                    edges.push((a, b));
                }
            }
        }
        edges
    }
}

impl std::fmt::Debug for SelectionMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SelectionMatrix")
            .field("m", &self.m())
            .field("r", &self.r)
            .field("k", &self.k)
            .field("rows", &self.supports)
            .finish()
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: perm.len(),
        });
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return param("not a permutation");
        }
    }
    Ok(())
}

/// Uniform random `k`-subset of `0..r`, sorted, by Floyd's algorithm.
pub fn sample_k_subset<R: Rng + ?Sized>(rng: &mut R, r: usize, k: usize) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for j in r - k..r {
        let t = rng.random_range(0..=j);
        if chosen.contains(&t) {
            chosen.push(j);
        } else {
            chosen.push(t);
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Draw `m` independent uniform `k`-sparse rows over `r` columns.
///
/// Row `i` is sampled from stream `i` of `seed`, so the result does not
/// depend on generation order.
pub fn gen_selection_matrix(m: usize, r: usize, k: usize, seed: Seed) -> Result<SelectionMatrix> {
    if m == 0 || r == 0 || k == 0 {
        return param(format!("dimensions must be positive (m={m}, r={r}, k={k})"));
    }
    if k > r {
        return param(format!("row sparsity k={k} exceeds column count r={r}"));
    }
    let supports = (0..m)
        .map(|i| sample_k_subset(&mut seed.stream(i as u64), r, k))
        .collect();
    SelectionMatrix::from_supports(r, k, supports)
}

/// Which semiring a Gram product is taken over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arithmetic {
    /// OR of ANDs: entry is 1 iff the supports intersect.
    Boolean,
    /// Ordinary integer product: entry is the intersection size.
    Integer,
}

/// Whether objectives count the (forced) diagonal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Diagonal {
    #[default]
    Include,
    Exclude,
}

/// Symmetric `m x m` Gram matrix with bit-packed Boolean rows and, optionally,
/// the integer intersection counts.
#[derive(Clone, PartialEq, Eq)]
pub struct GramMatrix {
    bits: BitMatrix,
    counts: Option<Vec<u8>>,
}

impl GramMatrix {
    /// Wrap a square symmetric Boolean matrix.
    pub fn from_bits(bits: BitMatrix) -> Result<Self> {
        if bits.rows() != bits.cols() {
            return Err(Error::DimensionMismatch {
                expected: bits.rows(),
                found: bits.cols(),
            });
        }
        if bits.rows() == 0 {
            return param("empty Gram matrix");
        }
        if !bits.is_symmetric() {
            return param("Gram matrix is not symmetric");
        }
        Ok(GramMatrix { bits, counts: None })
    }

    /// From row-major 0/1 entries.
    pub fn from_dense(rows: &[Vec<u8>]) -> Result<Self> {
        let m = rows.len();
        let mut bits = BitMatrix::zeros(m, m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => bits.set(i, j, true),
                    _ => return param(format!("Boolean entry ({i},{j}) = {v}")),
                }
            }
        }
        Self::from_bits(bits)
    }

    /// From row-major integer entries; the Boolean view is `entry > 0`.
    pub fn from_counts(rows: &[Vec<u8>]) -> Result<Self> {
        let m = rows.len();
        let mut bits = BitMatrix::zeros(m, m);
        let mut counts = Vec::with_capacity(m * m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                bits.set(i, j, v > 0);
                counts.push(v);
            }
        }
        let mut g = Self::from_bits(bits)?;
        for i in 0..m {
            for j in 0..i {
                if counts[i * m + j] != counts[j * m + i] {
                    return param("integer Gram matrix is not symmetric");
                }
            }
        }
        g.counts = Some(counts);
        Ok(g)
    }

    pub fn m(&self) -> usize {
        self.bits.rows()
    }

    pub fn get(&self, a: usize, b: usize) -> bool {
        self.bits.get(a, b)
    }

    /// Integer entry, when the integer counts are stored.
    pub fn count(&self, a: usize, b: usize) -> Option<u8> {
        self.counts.as_ref().map(|c| c[a * self.m() + b])
    }

    pub fn has_counts(&self) -> bool {
        self.counts.is_some()
    }

    pub fn bits(&self) -> &BitMatrix {
        &self.bits
    }

    pub fn row(&self, a: usize) -> &[u64] {
        self.bits.row(a)
    }

    /// Flip the Boolean entries `(a,b)` and `(b,a)`, dropping integer counts.
    pub fn flip_symmetric(&mut self, a: usize, b: usize) {
        let v = !self.bits.get(a, b);
        self.bits.set(a, b, v);
        self.bits.set(b, a, v);
        self.counts = None;
    }

    /// Entry as an integer under the given arithmetic.
    pub fn entry(&self, a: usize, b: usize, arithmetic: Arithmetic) -> Option<u8> {
        match arithmetic {
            Arithmetic::Boolean => Some(u8::from(self.get(a, b))),
            Arithmetic::Integer => self.count(a, b),
        }
    }

    /// Rows as integers (counts when stored, otherwise 0/1).
    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        let m = self.m();
        (0..m)
            .map(|a| {
                (0..m)
                    .map(|b| self.count(a, b).unwrap_or(u8::from(self.get(a, b))))
                    .collect()
            })
            .collect()
    }
}

impl std::fmt::Debug for GramMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GramMatrix(m={}, counts={}) ", self.m(), self.has_counts())?;
        self.bits.fmt(f)
    }
}

/// `W W^T` over the chosen arithmetic.
pub fn gram(w: &SelectionMatrix, arithmetic: Arithmetic) -> GramMatrix {
    let m = w.m();
    let masks = w.masks();
    let mut bits = BitMatrix::zeros(m, m);
    let mut counts = match arithmetic {
        Arithmetic::Integer => Some(vec![0u8; m * m]),
        Arithmetic::Boolean => None,
    };
    for a in 0..m {
        let ra = masks.row(a);
        for b in a..m {
            let c = bits::and_count(ra, masks.row(b));
            if c > 0 {
                bits.set(a, b, true);
                bits.set(b, a, true);
            }
            if let Some(counts) = counts.as_mut() {
                counts[a * m + b] = c as u8;
                counts[b * m + a] = c as u8;
            }
        }
    }
    GramMatrix { bits, counts }
}

/// Number of entries where `m` and `gram(w)` differ, `‖M − WWᵀ‖₀`.
///
/// With [`Diagonal::Include`] both triangles and the diagonal are counted,
/// so an off-diagonal disagreement contributes 2.
pub fn factorization_error(
    m: &GramMatrix,
    w: &SelectionMatrix,
    arithmetic: Arithmetic,
    diagonal: Diagonal,
) -> Result<usize> {
    let n = m.m();
    if w.m() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: w.m(),
        });
    }
    if arithmetic == Arithmetic::Integer && !m.has_counts() {
        return param("integer objective needs a Gram matrix with integer entries");
    }
    let masks = w.masks();
    let mut errors = 0;
    for a in 0..n {
        if diagonal == Diagonal::Include {
            let own = w.k() as u8;
            let want = m.entry(a, a, arithmetic).unwrap_or_default();
            let have = match arithmetic {
                Arithmetic::Boolean => 1,
                Arithmetic::Integer => own,
            };
            errors += usize::from(want != have);
        }
        for b in a + 1..n {
            let want = m.entry(a, b, arithmetic).unwrap_or_default();
            let have = match arithmetic {
                Arithmetic::Boolean => u8::from(bits::intersects(masks.row(a), masks.row(b))),
                Arithmetic::Integer => bits::and_count(masks.row(a), masks.row(b)) as u8,
            };
            if want != have {
                errors += 2;
            }
        }
    }
    Ok(errors)
}
