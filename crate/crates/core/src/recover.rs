//! Dataset recovery for InstaHide-style mixtures.
//!
//! A private database `X` (r x d) is hidden behind synthetic rows
//! `z_i = |Σ_{j∈S_i} x_j|`. The similarity oracle reveals which synthetic
//! rows share a private row, i.e. the Boolean Gram matrix of `W`. Once `W`
//! is known, the magnitude of every heavy entry of `X` can be estimated
//! coordinate by coordinate from the squared observations.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::instance::{gen_selection_matrix, gram, Arithmetic, GramMatrix, SelectionMatrix};
use crate::jennrich::{tensor_recover, RecoverConfig, RecoveryReport};
use crate::linalg;
use crate::seed::Seed;

/// The private database: one row per original vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return param("dataset entries must be finite");
        }
        Ok(Dataset { x })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|row| row.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        Dataset::new(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
    }

    pub fn r(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.x
    }
}

/// Synthetic observations. `w` and `signed` are held by the simulator only.
#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    pub z: DMatrix<f64>,
    pub w: Option<SelectionMatrix>,
    pub signed: Option<DMatrix<f64>>,
}

impl SyntheticDataset {
    /// Observations as the attacker sees them.
    pub fn public(z: DMatrix<f64>) -> Result<Self> {
        if z.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return param("synthetic entries must be finite and nonnegative");
        }
        Ok(SyntheticDataset { z, w: None, signed: None })
    }

    pub fn m(&self) -> usize {
        self.z.nrows()
    }

    pub fn d(&self) -> usize {
        self.z.ncols()
    }
}

/// Mix `m` synthetic rows from `k` private rows each.
///
/// Returns the observations together with the Boolean similarity matrix
/// (1 exactly when two synthetic rows share a private row).
pub fn gen_instahide(x: &Dataset, m: usize, k: usize, seed: Seed) -> Result<(SyntheticDataset, GramMatrix)> {
    let r = x.r();
    if k < 2 || k > r {
        return param(format!("need 2 <= k <= r, got k={k}, r={r}"));
    }
    let w = gen_selection_matrix(m, r, k, seed)?;
    let mut y = DMatrix::zeros(m, x.d());
    for (i, support) in w.supports().iter().enumerate() {
        for &j in support {
            let mut row = y.row_mut(i);
            row += x.matrix().row(j);
        }
    }
    let z = y.map(f64::abs);
    let g = gram(&w, Arithmetic::Boolean);
    Ok((
        SyntheticDataset {
            z,
            w: Some(w),
            signed: Some(y),
        },
        g,
    ))
}

/// A dataset of standard normal entries. With `heavy = Some(c)`, one random
/// row per column is overwritten so that `|x_h| = c (k/r) Σ_j |x_j|` exactly;
/// needs `c k < r`. Returns the heavy row of each column (empty otherwise).
pub fn planted_dataset(r: usize, d: usize, k: usize, heavy: Option<f64>, seed: Seed) -> Result<(Dataset, Vec<usize>)> {
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};
    if r == 0 {
        return param("dataset needs r >= 1");
    }
    let frac = heavy.map(|c| c * k as f64 / r as f64);
    if let Some(f) = frac {
        if !(f > 0.0 && f < 1.0) {
            return param(format!("heaviness c k / r = {f} must lie in (0, 1)"));
        }
    }
    let mut x = DMatrix::zeros(r, d);
    let mut rows = Vec::new();
    for j in 0..d {
        let mut rng = seed.stream(j as u64);
        for i in 0..r {
            x[(i, j)] = StandardNormal.sample(&mut rng);
        }
        if let Some(f) = frac {
            let h = rng.random_range(0..r);
            let rest: f64 = (0..r).filter(|&i| i != h).map(|i| f64::abs(x[(i, j)])).sum();
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            // |x_h| = f (|x_h| + rest)
            x[(h, j)] = sign * f * rest / (1.0 - f);
            rows.push(h);
        }
    }
    Ok((Dataset::new(x)?, rows))
}

/// `E_S ⟨e_S, p⟩²` over a uniform `k`-subset `S` of `[r]`, `r = p.len()`.
pub fn expected_square_inner(p: &[f64], k: usize) -> Result<f64> {
    let r = p.len();
    if r < 2 {
        return param(format!("need r >= 2, got {r}"));
    }
    if k > r {
        return param(format!("need k <= r, got k={k}, r={r}"));
    }
    let norm2: f64 = p.iter().map(|v| v * v).sum();
    let sum: f64 = p.iter().sum();
    let (r, k) = (r as f64, k as f64);
    Ok(k * (r - k) / (r * (r - 1.0)) * norm2 + k * (k - 1.0) / (r * (r - 1.0)) * sum * sum)
}

/// How the raw statistic `p̃′` is scaled into an estimate of `p_i²`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `r(r−1)(r−2) / (k(r−k)(r−2k))`: the exact inverse of the `p_i²`
    /// coefficient in `E[p̃′_i]`. Needs `r > 2k`.
    #[default]
    Unbiased,
    /// `r(r−1) / (k(r−2k+1))`. Underestimates `p_i²` by a constant factor,
    /// e.g. 0.857 at r=10, k=2.
    Shortcut,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeavyRecoveryConfig {
    /// Target relative error for heavy entries.
    pub eta: f64,
    /// An entry is heavy when `|p_i| >= c_heavy * (k/r) * Σ_j |p_j|`.
    pub c_heavy: f64,
    pub normalization: Normalization,
}

impl Default for HeavyRecoveryConfig {
    fn default() -> Self {
        HeavyRecoveryConfig {
            eta: 0.25,
            c_heavy: 6.0,
            normalization: Normalization::Unbiased,
        }
    }
}

impl HeavyRecoveryConfig {
    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !(self.c_heavy > 0.0) {
            return param("eta and c_heavy must be positive");
        }
        Ok(())
    }

    /// Heaviness threshold for a column with absolute mass `mass`.
    pub fn threshold(&self, r: usize, k: usize, mass: f64) -> f64 {
        self.c_heavy * k as f64 / r as f64 * mass
    }
}

/// Factor turning `p̃′` into an estimate of `p_i²`.
pub fn estimator_scale(r: usize, k: usize, normalization: Normalization) -> Result<f64> {
    if r < 3 || r < 2 * k {
        return param(format!("heavy-coordinate estimation needs r >= max(3, 2k), got r={r}, k={k}"));
    }
    let (rf, kf) = (r as f64, k as f64);
    match normalization {
        Normalization::Unbiased => {
            if r == 2 * k {
                return param("the unbiased scale needs r > 2k");
            }
            Ok(rf * (rf - 1.0) * (rf - 2.0) / (kf * (rf - kf) * (rf - 2.0 * kf)))
        }
        Normalization::Shortcut => Ok(rf * (rf - 1.0) / (kf * (rf - 2.0 * kf + 1.0))),
    }
}

/// The raw statistic `p̃′ = (1/m) Σ_i (w_i − ((k−1)/(r−2))·1) z_i²`.
pub fn raw_statistic(w: &SelectionMatrix, z: &[f64]) -> Result<Vec<f64>> {
    let (m, r, k) = (w.m(), w.r(), w.k());
    if z.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: z.len() });
    }
    if r < 3 {
        return param(format!("need r >= 3, got {r}"));
    }
    if m == 0 {
        return Ok(vec![0.0; r]);
    }
    let shift = (k as f64 - 1.0) / (r as f64 - 2.0);
    let mut acc = vec![0.0; r];
    let mut total = 0.0;
    for (support, &zi) in w.supports().iter().zip(z) {
        let sq = zi * zi;
        total += sq;
        for &j in support {
            acc[j] += sq;
        }
    }
    Ok(acc.into_iter().map(|a| (a - shift * total) / m as f64).collect())
}

/// Estimate `|p_i|` for every coordinate from `z = |W p|`.
///
/// Accurate to `1 ± eta` for heavy coordinates when `m` is large enough;
/// light coordinates get an estimate but no guarantee.
pub fn get_heavy_coordinates(w: &SelectionMatrix, z: &[f64], cfg: &HeavyRecoveryConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if z.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return param("observations must be finite and nonnegative");
    }
    let scale = estimator_scale(w.r(), w.k(), cfg.normalization)?;
    Ok(raw_statistic(w, z)?
        .into_iter()
        .map(|q| (q * scale).max(0.0).sqrt())
        .collect())
}

/// Per-entry outcome when ground truth is available.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryReport {
    pub row: usize,
    pub col: usize,
    pub estimate: f64,
    /// Heavy by the estimated column: `p̂_i >= c_heavy (k/r) Σ_j p̂_j`.
    pub heavy_flag: bool,
    /// Heavy against the true absolute column mass `Σ_j |x_j|`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub heavy_abs_mass: Option<bool>,
    /// Heavy against the true signed column sum `|Σ_j x_j|`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub heavy_signed_sum: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub relative_error: Option<f64>,
}

/// Output of [`recover_dataset`].
#[derive(Clone, Debug)]
pub struct DatasetRecovery {
    /// Magnitude estimates; `None` when `W` could not be verified.
    pub x_hat: Option<Dataset>,
    /// `heavy[i][j]` flags entry `(i, j)` heavy within its estimated column.
    pub heavy: Vec<Vec<bool>>,
    pub w_hat: Option<SelectionMatrix>,
    pub report: RecoveryReport,
}

impl DatasetRecovery {
    /// Compare against the private database. Rows of `truth` are matched to
    /// recovered rows through `permutation[i]` (recovered column `i` is
    /// private row `permutation[i]`); identity when `None`.
    pub fn entry_reports(
        &self,
        truth: Option<&Dataset>,
        permutation: Option<&[usize]>,
        k: usize,
        cfg: &HeavyRecoveryConfig,
    ) -> Vec<EntryReport> {
        let Some(x_hat) = &self.x_hat else {
            return Vec::new();
        };
        let (r, d) = (x_hat.r(), x_hat.d());
        let mut out = Vec::with_capacity(r * d);
        for col in 0..d {
            let masses = truth.map(|t| {
                let column = t.matrix().column(col);
                (column.iter().map(|v| v.abs()).sum::<f64>(), column.iter().sum::<f64>().abs())
            });
            for row in 0..r {
                let estimate = x_hat.matrix()[(row, col)];
                let mut entry = EntryReport {
                    row,
                    col,
                    estimate,
                    heavy_flag: self.heavy[row][col],
                    heavy_abs_mass: None,
                    heavy_signed_sum: None,
                    relative_error: None,
                };
                if let (Some(t), Some((abs_mass, signed))) = (truth, masses) {
                    let true_row = permutation.map_or(row, |p| p[row]);
                    let value = t.matrix()[(true_row, col)].abs();
                    entry.heavy_abs_mass = Some(value >= cfg.threshold(r, k, abs_mass));
                    entry.heavy_signed_sum = Some(value >= cfg.threshold(r, k, signed));
                    if value > 0.0 {
                        entry.relative_error = Some((estimate - value).abs() / value);
                    }
                }
                out.push(entry);
            }
        }
        out
    }
}

/// Recover `W` from the similarity matrix, then the heavy magnitudes of `X`
/// coordinate by coordinate. Rows of the estimate follow the column order of
/// the recovered `Ŵ`.
pub fn recover_dataset(
    m: &GramMatrix,
    z: &SyntheticDataset,
    r: usize,
    k: usize,
    recover: &RecoverConfig,
    cfg: &HeavyRecoveryConfig,
) -> Result<DatasetRecovery> {
    if z.m() != m.m() {
        return Err(Error::DimensionMismatch {
            expected: m.m(),
            found: z.m(),
        });
    }
    cfg.validate()?;
    estimator_scale(r, k, cfg.normalization)?;
    let factors = tensor_recover(m, r, k, recover)?;
    let report = RecoveryReport::from_factors(&factors);
    if !factors.success {
        return Ok(DatasetRecovery {
            x_hat: None,
            heavy: Vec::new(),
            w_hat: Some(factors.w_hat),
            report,
        });
    }
    let (x_hat, heavy) = heavy_magnitudes(&factors.w_hat, &z.z, cfg)?;
    Ok(DatasetRecovery {
        x_hat: Some(x_hat),
        heavy,
        w_hat: Some(factors.w_hat),
        report,
    })
}

/// Run [`get_heavy_coordinates`] on every column of `z` for a known `W`.
pub fn heavy_magnitudes(
    w: &SelectionMatrix,
    z: &DMatrix<f64>,
    cfg: &HeavyRecoveryConfig,
) -> Result<(Dataset, Vec<Vec<bool>>)> {
    let (r, k, d) = (w.r(), w.k(), z.ncols());
    let columns = (0..d)
        .into_par_iter()
        .map(|j| {
            let col: Vec<f64> = z.column(j).iter().copied().collect();
            get_heavy_coordinates(w, &col, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let x = DMatrix::from_fn(r, d, |i, j| columns[j][i]);
    let heavy = (0..r)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let mass: f64 = columns[j].iter().sum();
                    columns[j][i] > 0.0 && columns[j][i] >= cfg.threshold(r, k, mass)
                })
                .collect()
        })
        .collect();
    Ok((Dataset::new(x)?, heavy))
}

/// Least-squares solve of `W X = Y` when the signs of the mixtures are known.
/// Returns the estimate and the largest absolute residual entry.
pub fn solve_exact(w: &SelectionMatrix, y: &DMatrix<f64>) -> Result<(Dataset, f64)> {
    if y.nrows() != w.m() {
        return Err(Error::DimensionMismatch {
            expected: w.m(),
            found: y.nrows(),
        });
    }
    let a = w.to_real();
    let (p, rank) = linalg::pinv(&a, 1e-10);
    if rank < w.r() {
        return Err(Error::RankDeficient { rank, required: w.r() });
    }
    let x = p * y;
    let residual = (&a * &x - y).amax();
    Ok((Dataset::new(x)?, residual))
}
