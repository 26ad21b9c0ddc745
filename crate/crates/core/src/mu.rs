//! Non-intersection probabilities.
//!
//! For a union of size `t`, `mu_t = C(r - t, k) / C(r, k)` is the chance that a
//! fresh uniform `k`-subset of `0..r` misses it entirely. Counting the rows of
//! a Gram matrix that are zero on a few given rows estimates `mu_t` for their
//! union, and inverting the table turns that estimate back into `t`.
//!
//! All table values are exact rationals and all comparisons against observed
//! fractions happen in exact integer arithmetic.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::bits;
use crate::error::{param, Error, Result};
use crate::instance::GramMatrix;

/// Default constant multiplying the sample-size bound.
pub const DEFAULT_SAMPLE_CONSTANT: f64 = 8.0;

/// Constant the acceptance experiments were calibrated with. Every
/// statistical acceptance run uses it; it keeps each union-size estimate at
/// least seven standard deviations from a decision boundary at the tested
/// sizes.
pub const CALIBRATED_SAMPLE_CONSTANT: f64 = 1.0;

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Exact table `mu_0 ..= mu_{t_max}` for fixed `(r, k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MuTable {
    r: usize,
    k: usize,
    /// `C(r, k)`, the shared denominator.
    total: BigUint,
    /// `C(r - t, k)` for each tabulated `t`.
    numerators: Vec<BigUint>,
}

/// `mu_table(r, k, t_max)`.
pub fn mu_table(r: usize, k: usize, t_max: usize) -> Result<MuTable> {
    MuTable::with_t_max(r, k, t_max)
}

impl MuTable {
    /// Table with the default range `t_max = min(3k, r - k)`, which covers
    /// every union of up to three `k`-sets that can be told apart.
    pub fn new(r: usize, k: usize) -> Result<Self> {
        if k == 0 || k > r {
            return param(format!("need 1 <= k <= r, got k={k}, r={r}"));
        }
        Self::with_t_max(r, k, (3 * k).min(r - k))
    }

    pub fn with_t_max(r: usize, k: usize, t_max: usize) -> Result<Self> {
        if k == 0 || k > r {
            return param(format!("need 1 <= k <= r, got k={k}, r={r}"));
        }
        if t_max > r {
            return param(format!("t_max={t_max} exceeds r={r}"));
        }
        Ok(MuTable {
            r,
            k,
            total: binomial(r, k),
            numerators: (0..=t_max).map(|t| binomial(r - t, k)).collect(),
        })
    }

    /// Same parameters, range extended (or shrunk) to `t_max`.
    pub fn extended(&self, t_max: usize) -> Result<Self> {
        Self::with_t_max(self.r, self.k, t_max)
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t_max(&self) -> usize {
        self.numerators.len() - 1
    }

    /// `mu_t` as an exact rational, for any `t <= r` (tabulated or not).
    pub fn value(&self, t: usize) -> BigRational {
        let num = match self.numerators.get(t) {
            Some(n) => n.clone(),
            None => binomial(self.r.saturating_sub(t), self.k),
        };
        BigRational::new(BigInt::from(num), BigInt::from(self.total.clone()))
    }

    pub fn values(&self) -> Vec<BigRational> {
        (0..=self.t_max()).map(|t| self.value(t)).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values().iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()
    }

    /// Values as `"num/den"` strings in lowest terms.
    pub fn to_strings(&self) -> Vec<String> {
        self.values()
            .iter()
            .map(|v| format!("{}/{}", v.numer(), v.denom()))
            .collect()
    }

    /// Tabulated `t` whose `mu_t` is closest to `num / den`, ties toward
    /// the smaller `t`.
    pub fn invert_ratio(&self, num: &BigUint, den: &BigUint) -> usize {
        // |C(r-t,k)/C(r,k) - num/den| compared through the common
        // denominator C(r,k) * den.
        let scaled = BigInt::from(num * &self.total);
        let mut best = 0;
        let mut best_dist: Option<BigInt> = None;
        for (t, n) in self.numerators.iter().enumerate() {
            let dist = (BigInt::from(n * den) - &scaled).abs();
            if best_dist.as_ref().is_none_or(|b| dist < *b) {
                best = t;
                best_dist = Some(dist);
            }
        }
        best
    }

    /// `invert_fraction`: the union size whose `mu_t` is closest to `frac`.
    pub fn invert_fraction(&self, frac: f64) -> usize {
        let q = BigRational::from_float(frac).unwrap_or_else(BigRational::zero);
        let (num, den) = (q.numer().clone(), q.denom().clone());
        if num.is_negative() {
            return self.invert_ratio(&BigUint::zero(), &BigUint::one());
        }
        self.invert_ratio(&num.to_biguint().unwrap_or_default(), &den.to_biguint().unwrap_or_default())
    }

    /// Precomputed inversion of `count / total` for every `count in 0..=total`.
    pub fn lut(&self, total: usize) -> InversionLut {
        let den = BigUint::from(total);
        let mut map = Vec::with_capacity(total + 1);
        // The answer is monotone in the count, so only boundaries need
        // exact work; still, the table is small enough to fill directly.
        for count in 0..=total {
            map.push(self.invert_ratio(&BigUint::from(count), &den) as u8);
        }
        InversionLut { total, map }
    }
}

/// Lookup from an observed zero count (out of a fixed total) to a union size.
#[derive(Clone, Debug)]
pub struct InversionLut {
    total: usize,
    map: Vec<u8>,
}

impl InversionLut {
    #[inline]
    pub fn invert(&self, count: usize) -> u8 {
        self.map[count]
    }

    pub fn total(&self) -> usize {
        self.total
    }
}

/// Number of `l` with `M(a, l) = 0` for every `a` in `rows`.
pub fn zero_cooccurrence(m: &GramMatrix, rows: &[usize]) -> Result<usize> {
    let n = m.m();
    if rows.is_empty() {
        return param("zero co-occurrence needs at least one row");
    }
    if let Some(&bad) = rows.iter().find(|&&a| a >= n) {
        return Err(Error::IndexOutOfRange { index: bad, bound: n });
    }
    let words = m.bits().words_per_row();
    let tail = bits::tail_mask(n);
    let mut count = 0;
    for w in 0..words {
        let mut acc = if w + 1 == words { tail } else { u64::MAX };
        for &a in rows {
            acc &= !m.row(a)[w];
        }
        count += acc.count_ones() as usize;
    }
    Ok(count)
}

/// Square matrix of small unsigned integers, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SquareU8 {
    n: usize,
    data: Vec<u8>,
}

impl SquareU8 {
    pub fn new(n: usize, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), n * n);
        SquareU8 { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> u8 {
        self.data[a * self.n + b]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.data.chunks(self.n.max(1))
    }
}

/// Every pairwise union size `|S_a ∪ S_b|`, estimated from `M` alone.
/// The diagonal is `k` by convention.
pub fn pairwise_union_sizes(m: &GramMatrix, table: &MuTable) -> SquareU8 {
    let n = m.m();
    let zeros = m.bits().complement();
    let lut = table.lut(n);
    let k = table.k() as u8;
    let rows: Vec<Vec<u8>> = (0..n)
        .into_par_iter()
        .map(|a| {
            (0..n)
                .map(|b| {
                    if a == b {
                        k
                    } else {
                        lut.invert(bits::and_count(zeros.row(a), zeros.row(b)))
                    }
                })
                .collect()
        })
        .collect();
    SquareU8::new(n, rows.concat())
}

/// Smallest `m >= 1` with `m >= c0 * (t^2 r / k) * ln(m^3 / delta)`.
///
/// The right-hand side grows logarithmically, so iterating
/// `m <- ceil(rhs(m))` from `m = 1` climbs monotonically to the least
/// solution.
pub fn required_sample_size(r: usize, k: usize, t: usize, delta: f64, c0: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return param(format!("failure probability must lie in (0, 1), got {delta}"));
    }
    if t == 0 || k == 0 || r == 0 {
        return param("r, k and t must be positive");
    }
    if c0.is_nan() || c0 <= 0.0 {
        return param("sample constant must be positive");
    }
    let scale = c0 * (t * t) as f64 * r as f64 / k as f64;
    let rhs = |m: usize| scale * ((m as f64).powi(3) / delta).ln();
    let mut m = 1usize;
    loop {
        let need = rhs(m);
        if m as f64 >= need {
            return Ok(m);
        }
        m = (need.ceil() as usize).max(m + 1);
    }
}
