//! Exact recovery of `W` from `M = WWᵀ` (Boolean semiring).
//!
//! The pipeline: estimate the intersection tensor `T = Σ_i w_i^{⊗3}` from
//! `M`, decompose it with Jennrich's simultaneous diagonalization, round the
//! components to 0/1 columns, and check `gram(Ŵ) = M`.
//!
//! Decomposition works in the `r`-dimensional column space of one random
//! contraction rather than with the `m x m` pencil: with `U` an orthonormal
//! basis of that space, `Uᵀ T(I,I,v₁) U · (Uᵀ T(I,I,v₂) U)⁻¹` has eigenvalues
//! `⟨w_i,v₁⟩ / ⟨w_i,v₂⟩` and eigenvectors `Uᵀ w_i`.
//!
//! In anchored mode the tensor is built only on a random subset of rows, the
//! anchor block of `Ŵ` is recovered from it, and every other row is solved
//! for from its estimated intersections with the anchors.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::{self, BitMatrix};
use crate::error::{param, Error, Result};
use crate::instance::{factorization_error, Arithmetic, Diagonal, GramMatrix, SelectionMatrix};
use crate::linalg;
use crate::mu::MuTable;
use crate::seed::Seed;
use crate::tensor::{contract, IntersectionTensor, TensorBuilder};

/// Numerical knobs of the decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JennrichOptions {
    /// Singular values at or below `rel_cutoff * sigma_max` count as zero.
    pub rel_cutoff: f64,
    /// Eigenvalues closer than `gap_tol * max|λ|` trigger a redraw.
    pub gap_tol: f64,
    /// Redraws of the contraction vectors before giving up.
    pub max_retries: usize,
}

impl Default for JennrichOptions {
    fn default() -> Self {
        JennrichOptions {
            rel_cutoff: 1e-8,
            gap_tol: 1e-6,
            max_retries: 5,
        }
    }
}

/// Output of [`jennrich_decompose`].
#[derive(Clone, Debug)]
pub struct Decomposition {
    /// One vector per component, each proportional to some `w_i`.
    pub components: Vec<DVector<f64>>,
    /// The eigenvalue `⟨w_i,v₁⟩ / ⟨w_i,v₂⟩` belonging to each component.
    pub eigenvalues: Vec<f64>,
    /// Contraction vectors of the successful attempt.
    pub contractions: (DVector<f64>, DVector<f64>),
    pub retries: usize,
    /// Smallest gap between sorted eigenvalues, relative to `max|λ|`.
    pub min_relative_gap: f64,
}

fn random_unit(dim: usize, rng: &mut impl rand::Rng) -> DVector<f64> {
    loop {
        let v: DVector<f64> = DVector::from_fn(dim, |_, _| StandardNormal.sample(rng));
        let norm = v.norm();
        if norm > 0.0 {
            return v / norm;
        }
    }
}

pub fn jennrich_decompose(t: &IntersectionTensor, r: usize, seed: Seed) -> Result<Decomposition> {
    jennrich_decompose_with(t, r, seed, &JennrichOptions::default())
}

/// Split `T = Σ_{i<r} w_i^{⊗3}` into its components, up to order and scale.
pub fn jennrich_decompose_with(
    t: &IntersectionTensor,
    r: usize,
    seed: Seed,
    opts: &JennrichOptions,
) -> Result<Decomposition> {
    let n = t.dim();
    if r == 0 || r > n {
        return param(format!("need 1 <= r <= {n} components, got {r}"));
    }
    for attempt in 0..=opts.max_retries {
        let mut rng = seed.stream(attempt as u64);
        let v1 = random_unit(n, &mut rng);
        let v2 = random_unit(n, &mut rng);
        let m1 = contract(t, v1.as_slice())?;
        let m2 = contract(t, v2.as_slice())?;

        let (u, rank) = linalg::leading_range(&m1, opts.rel_cutoff, r);
        if rank < r {
            return Err(Error::RankDeficient { rank, required: r });
        }
        let a1 = u.transpose() * &m1 * &u;
        let a2 = u.transpose() * &m2 * &u;
        let (a2_inv, rank2) = linalg::pinv(&a2, opts.rel_cutoff);
        if rank2 < r {
            // Some component is (numerically) orthogonal to v2.
            continue;
        }
        let Some((values, vectors)) = linalg::real_eigenpairs(&(a1 * a2_inv)) else {
            continue;
        };
        let scale = values.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let gap = values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(f64::INFINITY, f64::min)
            / scale.max(f64::MIN_POSITIVE);
        if r > 1 && gap < opts.gap_tol {
            continue;
        }
        let components = vectors.iter().map(|x| &u * x).collect();
        return Ok(Decomposition {
            components,
            eigenvalues: values,
            contractions: (v1, v2),
            retries: attempt,
            min_relative_gap: if r > 1 { gap } else { f64::INFINITY },
        });
    }
    Err(Error::Degenerate {
        retries: opts.max_retries,
    })
}

/// Scale by the entry of largest magnitude (keeping its sign) and snap every
/// entry to 0 or 1. Returns the bits and the largest distance snapped.
fn round_with_margin(v: &[f64], tol: f64) -> Result<(Vec<bool>, f64)> {
    let pivot = v
        .iter()
        .copied()
        .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
    if pivot == 0.0 || !pivot.is_finite() {
        return param("cannot round the zero vector");
    }
    let mut worst = 0.0f64;
    let mut out = Vec::with_capacity(v.len());
    for (index, &x) in v.iter().enumerate() {
        let s = x / pivot;
        let (d0, d1) = (s.abs(), (s - 1.0).abs());
        let margin = d0.min(d1);
        if margin > tol || margin.is_nan() {
            return Err(Error::Rounding { index, margin });
        }
        worst = worst.max(margin);
        out.push(d1 < d0);
    }
    Ok((out, worst))
}

/// Normalize by the signed largest-magnitude entry, then round to 0/1.
pub fn round_boolean(v: &[f64], tol: f64) -> Result<Vec<bool>> {
    round_with_margin(v, tol).map(|(b, _)| b)
}

/// Recover every row of `W` from a recovered anchor block.
///
/// `anchor_columns[i][j]` is entry `(anchors[j], i)` of `W`. For a row `a`
/// outside the anchors, the intersections `c_b = 2k − |S_a ∪ S_b|` with each
/// anchor are estimated from `M`; the least-squares solution of
/// `A x = c` is rounded and must have exactly `k` ones and reproduce `c`.
pub fn extend_from_anchors(
    anchor_columns: &[Vec<bool>],
    anchors: &[usize],
    m: &GramMatrix,
    table: &MuTable,
) -> Result<SelectionMatrix> {
    let r = anchor_columns.len();
    let n0 = anchors.len();
    let k = table.k();
    let rows = m.m();
    if r == 0 {
        return param("anchor block has no columns");
    }
    if let Some(col) = anchor_columns.iter().find(|c| c.len() != n0) {
        return Err(Error::DimensionMismatch {
            expected: n0,
            found: col.len(),
        });
    }
    if let Some(&bad) = anchors.iter().find(|&&a| a >= rows) {
        return Err(Error::IndexOutOfRange { index: bad, bound: rows });
    }
    let block = DMatrix::from_fn(n0, r, |b, j| f64::from(u8::from(anchor_columns[j][b])));
    let (block_pinv, rank) = linalg::pinv(&block, 1e-8);
    if rank < r {
        return Err(Error::RankDeficient { rank, required: r });
    }

    let mut anchor_slot = vec![None; rows];
    for (b, &a) in anchors.iter().enumerate() {
        anchor_slot[a] = Some(b);
    }
    let zeros = m.bits().complement();
    let lut = table.lut(rows);

    let supports: Vec<Result<Vec<usize>>> = (0..rows)
        .into_par_iter()
        .map(|a| {
            if let Some(b) = anchor_slot[a] {
                return Ok((0..r).filter(|&j| anchor_columns[j][b]).collect());
            }
            let target: Vec<i64> = anchors
                .iter()
                .map(|&b| {
                    let union = lut.invert(bits::and_count(zeros.row(a), zeros.row(b)));
                    2 * k as i64 - i64::from(union)
                })
                .collect();
            let c = DVector::from_iterator(n0, target.iter().map(|&x| x as f64));
            let x = &block_pinv * c;
            let support: Vec<usize> = (0..r).filter(|&j| x[j] > 0.5).collect();
            if support.len() != k {
                return Err(Error::Extension {
                    row: a,
                    reason: format!("rounded solution has {} ones, expected {k}", support.len()),
                });
            }
            for (b, &want) in target.iter().enumerate() {
                let have = support.iter().filter(|&&j| anchor_columns[j][b]).count() as i64;
                if have != want {
                    return Err(Error::Extension {
                        row: a,
                        reason: format!("intersection with anchor {} is {have}, estimated {want}", anchors[b]),
                    });
                }
            }
            Ok(support)
        })
        .collect();
    let supports = supports.into_iter().collect::<Result<Vec<_>>>()?;
    SelectionMatrix::from_supports(r, k, supports)
}

/// How the tensor is materialized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorMode {
    /// Every slice on all `m` rows.
    Full,
    /// Only the sub-tensor on an anchor subset; other rows by extension.
    #[default]
    Anchored,
}

impl std::str::FromStr for TensorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(TensorMode::Full),
            "anchored" => Ok(TensorMode::Anchored),
            other => param(format!("unknown tensor mode {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoverConfig {
    pub mode: TensorMode,
    /// Anchor count; [`default_anchor_count`] when unset.
    pub anchors: Option<usize>,
    pub seed: Seed,
    pub round_tol: f64,
    /// Clamp inconsistent tensor entries instead of failing.
    pub clamp: bool,
    pub jennrich: JennrichOptions,
}

impl Default for RecoverConfig {
    fn default() -> Self {
        RecoverConfig {
            mode: TensorMode::Anchored,
            anchors: None,
            seed: Seed(0),
            round_tol: 0.25,
            clamp: false,
            jennrich: JennrichOptions::default(),
        }
    }
}

/// `min(m, max(4r, r + 16))`.
pub fn default_anchor_count(m: usize, r: usize) -> usize {
    m.min((4 * r).max(r + 16))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub retries: usize,
    pub min_relative_gap: f64,
    pub max_rounding_margin: f64,
    pub anchors: Option<usize>,
}

/// Result of [`tensor_recover`]. `success` holds exactly when `residual == 0`.
#[derive(Clone, Debug)]
pub struct RecoveredFactors {
    pub w_hat: SelectionMatrix,
    pub residual: usize,
    pub success: bool,
    /// Filled in by [`RecoveredFactors::align`] when a reference is known.
    pub permutation: Option<Vec<usize>>,
    pub diagnostics: Diagnostics,
}

impl RecoveredFactors {
    /// Match against a reference factor and record the permutation.
    pub fn align(&mut self, reference: &SelectionMatrix) -> ColumnMatch {
        let result = match_factors(&self.w_hat, reference);
        if let ColumnMatch::Permutation(p) = &result {
            self.permutation = Some(p.clone());
        }
        result
    }
}

/// Machine-readable summary of one recovery attempt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub success: bool,
    /// `None` when no candidate was assembled.
    pub residual: Option<usize>,
    pub retries: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub permutation: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl RecoveryReport {
    pub fn from_factors(f: &RecoveredFactors) -> Self {
        RecoveryReport {
            success: f.success,
            residual: Some(f.residual),
            retries: f.diagnostics.retries,
            seconds: None,
            permutation: f.permutation.clone(),
            error: None,
        }
    }

    pub fn from_error(e: &Error) -> Self {
        RecoveryReport {
            success: false,
            residual: None,
            retries: match e {
                Error::Degenerate { retries } => *retries,
                _ => 0,
            },
            seconds: None,
            permutation: None,
            error: Some(e.to_string()),
        }
    }
}

fn round_all(dec: &Decomposition, tol: f64) -> Result<(Vec<Vec<bool>>, f64)> {
    let mut worst = 0.0f64;
    let cols = dec
        .components
        .iter()
        .map(|v| {
            let (bits, margin) = round_with_margin(v.as_slice(), tol)?;
            worst = worst.max(margin);
            Ok(bits)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((cols, worst))
}

/// Recover `Ŵ` with `gram(Ŵ) = M` from the Boolean Gram matrix alone.
///
/// Errors from tensor construction, decomposition, rounding or extension are
/// returned as-is. A candidate that assembles but does not reproduce `M` is
/// returned with `success = false` and its nonzero residual.
pub fn tensor_recover(m: &GramMatrix, r: usize, k: usize, config: &RecoverConfig) -> Result<RecoveredFactors> {
    let rows = m.m();
    if r == 0 || k == 0 || k > r {
        return param(format!("need 1 <= k <= r, got k={k}, r={r}"));
    }
    if r > rows {
        return param(format!("cannot recover {r} columns from {rows} rows"));
    }
    let table = MuTable::new(r, k)?;
    let builder = TensorBuilder::with_table(m, &table).clamp(config.clamp);
    let mut diagnostics = Diagnostics::default();

    let w_hat = match config.mode {
        TensorMode::Full => {
            let t = builder.build_full()?;
            let dec = jennrich_decompose_with(&t, r, config.seed, &config.jennrich)?;
            let (cols, margin) = round_all(&dec, config.round_tol)?;
            diagnostics.retries = dec.retries;
            diagnostics.min_relative_gap = dec.min_relative_gap;
            diagnostics.max_rounding_margin = margin;
            let supports = (0..rows)
                .map(|a| (0..r).filter(|&j| cols[j][a]).collect::<Vec<_>>())
                .collect::<Vec<_>>();
            if let Some((row, s)) = supports.iter().enumerate().find(|(_, s)| s.len() != k) {
                return Err(Error::Sparsity { row, ones: s.len(), k });
            }
            SelectionMatrix::from_supports(r, k, supports)?
        }
        TensorMode::Anchored => {
            let n0 = config.anchors.unwrap_or_else(|| default_anchor_count(rows, r));
            if n0 < r || n0 > rows {
                return param(format!("anchor count {n0} must lie in {r}..={rows}"));
            }
            let mut rng = config.seed.split(0xA7C4).stream(0);
            let mut anchors = index::sample(&mut rng, rows, n0).into_vec();
            anchors.sort_unstable();
            let t = builder.build_anchored(&anchors)?;
            let dec = jennrich_decompose_with(&t, r, config.seed, &config.jennrich)?;
            let (cols, margin) = round_all(&dec, config.round_tol)?;
            diagnostics.retries = dec.retries;
            diagnostics.min_relative_gap = dec.min_relative_gap;
            diagnostics.max_rounding_margin = margin;
            diagnostics.anchors = Some(n0);
            extend_from_anchors(&cols, &anchors, m, &table)?
        }
    };

    let residual = factorization_error(m, &w_hat, Arithmetic::Boolean, Diagonal::Include)?;
    Ok(RecoveredFactors {
        w_hat,
        residual,
        success: residual == 0,
        permutation: None,
        diagnostics,
    })
}

/// Outcome of comparing two column multisets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnMatch {
    /// `perm[i] = j` means column `i` of the candidate equals column `j` of
    /// the reference.
    Permutation(Vec<usize>),
    Mismatch {
        unmatched_hat: Vec<usize>,
        unmatched_ref: Vec<usize>,
    },
}

impl ColumnMatch {
    pub fn is_permutation(&self) -> bool {
        matches!(self, ColumnMatch::Permutation(_))
    }
}

/// Greedy exact matching of columns. Inputs hold one column per row
/// (see [`SelectionMatrix::columns`]).
pub fn match_columns(hat: &BitMatrix, reference: &BitMatrix) -> ColumnMatch {
    if hat.rows() != reference.rows() || hat.cols() != reference.cols() {
        return ColumnMatch::Mismatch {
            unmatched_hat: (0..hat.rows()).collect(),
            unmatched_ref: (0..reference.rows()).collect(),
        };
    }
    let mut used = vec![false; reference.rows()];
    let mut perm = Vec::with_capacity(hat.rows());
    let mut unmatched_hat = Vec::new();
    for i in 0..hat.rows() {
        match (0..reference.rows()).find(|&j| !used[j] && reference.row(j) == hat.row(i)) {
            Some(j) => {
                used[j] = true;
                perm.push(j);
            }
            None => unmatched_hat.push(i),
        }
    }
    if unmatched_hat.is_empty() {
        ColumnMatch::Permutation(perm)
    } else {
        ColumnMatch::Mismatch {
            unmatched_hat,
            unmatched_ref: (0..reference.rows()).filter(|&j| !used[j]).collect(),
        }
    }
}

/// [`match_columns`] on the columns of two selection matrices.
pub fn match_factors(hat: &SelectionMatrix, reference: &SelectionMatrix) -> ColumnMatch {
    match_columns(&hat.columns(), &reference.columns())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::gram;

    fn boolean(v: &[u8]) -> Vec<bool> {
        v.iter().map(|&x| x == 1).collect()
    }

    /// Scale-free comparison of recovered components with 0/1 vectors.
    fn rounded_set(dec: &Decomposition) -> Vec<Vec<bool>> {
        let mut out: Vec<_> = dec
            .components
            .iter()
            .map(|v| round_boolean(v.as_slice(), 1e-6).unwrap())
            .collect();
        out.sort();
        out
    }

    #[test]
    fn two_component_tensor() {
        let (w1, w2) = (boolean(&[1, 1, 0]), boolean(&[0, 0, 1]));
        let t = IntersectionTensor::from_boolean_components(3, 1, &[w1.clone(), w2.clone()]).unwrap();
        let dec = jennrich_decompose(&t, 2, Seed(4)).unwrap();
        let mut want = vec![w1, w2];
        want.sort();
        assert_eq!(rounded_set(&dec), want);
        let again = IntersectionTensor::from_boolean_components(3, 1, &rounded_set(&dec)).unwrap();
        assert_eq!(again, t);
    }

    #[test]
    fn single_component() {
        let w = boolean(&[1, 0, 1]);
        let t = IntersectionTensor::from_boolean_components(3, 1, std::slice::from_ref(&w)).unwrap();
        let dec = jennrich_decompose(&t, 1, Seed(0)).unwrap();
        assert_eq!(rounded_set(&dec), vec![w]);
    }

    #[test]
    fn duplicated_components_are_rank_deficient() {
        let w = boolean(&[1, 1, 0]);
        let t = IntersectionTensor::from_boolean_components(3, 1, &[w.clone(), w]).unwrap();
        assert!(matches!(
            jennrich_decompose(&t, 2, Seed(0)),
            Err(Error::RankDeficient { rank: 1, required: 2 })
        ));
    }

    #[test]
    fn rounding_rules() {
        assert_eq!(round_boolean(&[-2.0, 0.0, -2.0], 0.25).unwrap(), boolean(&[1, 0, 1]));
        assert_eq!(round_boolean(&[0.9999, 1e-9, 1.0001], 0.25).unwrap(), boolean(&[1, 0, 1]));
        match round_boolean(&[0.4, 0.6, 1.0], 0.25) {
            Err(Error::Rounding { index, margin }) => {
                assert_eq!(index, 0);
                assert!((margin - 0.4).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        assert!(round_boolean(&[0.0, 0.0], 0.25).is_err());
    }

    #[test]
    fn extension_with_unit_anchor_block() {
        // k = 1 and the anchors are one row per column: intersections read
        // membership off directly.
        let r = 5;
        let mut supports: Vec<Vec<usize>> = (0..r).map(|j| vec![j]).collect();
        supports.extend((0..3 * r).map(|i| vec![(i * 3) % r]));
        let w = SelectionMatrix::from_supports(r, 1, supports).unwrap();
        let m = gram(&w, Arithmetic::Boolean);
        let anchors: Vec<usize> = (0..r).collect();
        let cols: Vec<Vec<bool>> = (0..r).map(|j| (0..r).map(|b| b == j).collect()).collect();
        // Each column holds exactly 4 of the 20 rows, so the zero fractions
        // equal the population values and every union estimate is exact.
        let table = MuTable::new(r, 1).unwrap();
        let got = extend_from_anchors(&cols, &anchors, &m, &table).unwrap();
        assert_eq!(got.supports(), w.supports());
    }

    #[test]
    fn extension_rejects_duplicated_anchor_columns() {
        let w = SelectionMatrix::from_supports(3, 1, vec![vec![0], vec![1], vec![2]]).unwrap();
        let m = gram(&w, Arithmetic::Boolean);
        let cols = vec![boolean(&[1, 0, 0]), boolean(&[1, 0, 0]), boolean(&[0, 0, 1])];
        let table = MuTable::new(3, 1).unwrap();
        assert!(matches!(
            extend_from_anchors(&cols, &[0, 1, 2], &m, &table),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn permutation_instance_recovers_exactly() {
        let r = 6;
        let perm = [3, 0, 5, 1, 4, 2];
        let w = SelectionMatrix::from_supports(r, 1, perm.iter().map(|&j| vec![j]).collect()).unwrap();
        let m = gram(&w, Arithmetic::Boolean);
        let cfg = RecoverConfig {
            mode: TensorMode::Full,
            ..RecoverConfig::default()
        };
        let mut rec = tensor_recover(&m, r, 1, &cfg).unwrap();
        assert!(rec.success);
        assert_eq!(rec.residual, 0);
        assert!(rec.align(&w).is_permutation());
    }

    #[test]
    fn all_ones_gram_has_no_valid_factorization() {
        // Every row intersecting every other row with k = 1 forces a single
        // shared column, so two distinct columns cannot be recovered.
        let m = GramMatrix::from_dense(&vec![vec![1u8; 12]; 12]).unwrap();
        for mode in [TensorMode::Full, TensorMode::Anchored] {
            let cfg = RecoverConfig { mode, ..RecoverConfig::default() };
            match tensor_recover(&m, 3, 1, &cfg) {
                Ok(rec) => assert!(!rec.success && rec.residual > 0),
                Err(e) => assert!(!e.is_parameter_error(), "{e}"),
            }
        }
    }

    #[test]
    fn column_matching() {
        let w = SelectionMatrix::from_supports(4, 2, vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![0, 3]]).unwrap();
        let cols = w.columns();
        assert_eq!(match_columns(&cols, &cols), ColumnMatch::Permutation(vec![0, 1, 2, 3]));
        let reversed = BitMatrix::from_fn(4, 4, |i, j| cols.get(3 - i, j));
        assert_eq!(match_columns(&reversed, &cols), ColumnMatch::Permutation(vec![3, 2, 1, 0]));
        let mut flipped = cols.clone();
        flipped.set(2, 0, !flipped.get(2, 0));
        assert_eq!(
            match_columns(&flipped, &cols),
            ColumnMatch::Mismatch {
                unmatched_hat: vec![2],
                unmatched_ref: vec![2]
            }
        );
    }
}
