//! Exact and Monte-Carlo checks of the linear-independence theory behind
//! recovery: Krawtchouk polynomials, ranks of `W` over F2, F_q and the
//! rationals, singularity frequencies, and anti-concentration of `⟨w, x⟩`.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csp::Alphabet;
use crate::error::{param, Result};
use crate::instance::{gen_selection_matrix, sample_k_subset, SelectionMatrix};
use crate::mu::binomial;
use crate::seed::Seed;

fn check_lambda(r: usize, k: usize, lambda: usize) -> Result<()> {
    if k > r || lambda > r {
        return param(format!("need k <= r and lambda <= r, got r={r}, k={k}, lambda={lambda}"));
    }
    Ok(())
}

/// `K_k^r(λ) = Σ_i (−1)^i C(λ,i) C(r−λ,k−i)`.
pub fn krawtchouk(r: usize, k: usize, lambda: usize) -> Result<BigInt> {
    check_lambda(r, k, lambda)?;
    let mut total = BigInt::zero();
    for i in 0..=k.min(lambda) {
        let term = BigInt::from(binomial(lambda, i) * binomial(r - lambda, k - i));
        if i % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    Ok(total)
}

/// Probability that `⟨w, u⟩` is even for a uniform `k`-sparse `w` and a
/// fixed `u` of weight `λ`: the even-overlap sum over `i = 0, 2, …, k`.
pub fn f2_zero_probability(r: usize, k: usize, lambda: usize) -> Result<BigRational> {
    check_lambda(r, k, lambda)?;
    let mut even = BigUint::zero();
    for i in (0..=k.min(lambda)).step_by(2) {
        even += binomial(lambda, i) * binomial(r - lambda, k - i);
    }
    Ok(BigRational::new(BigInt::from(even), BigInt::from(binomial(r, k))))
}

/// Rank over F2 of a bit-packed matrix (one `Vec<u64>` per row).
fn rank_gf2(mut rows: Vec<Vec<u64>>, cols: usize) -> usize {
    let mut rank = 0;
    for col in 0..cols {
        let (w, bit) = (col / 64, 1u64 << (col % 64));
        let Some(p) = (rank..rows.len()).find(|&i| rows[i][w] & bit != 0) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = rows[rank].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != rank && row[w] & bit != 0 {
                for (a, b) in row.iter_mut().zip(&pivot) {
                    *a ^= b;
                }
            }
        }
        rank += 1;
    }
    rank
}

pub fn rank_f2(w: &SelectionMatrix) -> usize {
    let masks = w.masks();
    rank_gf2((0..w.m()).map(|i| masks.row(i).to_vec()).collect(), w.r())
}

fn mul_mod(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64, q: u64) -> u64 {
    let mut out = 1 % q;
    a %= q;
    while e > 0 {
        if e & 1 == 1 {
            out = mul_mod(out, a, q);
        }
        a = mul_mod(a, a, q);
        e >>= 1;
    }
    out
}

/// Deterministic Miller–Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for p in BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'bases: for a in BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'bases;
            }
        }
        return false;
    }
    true
}

/// A uniformly chosen prime in `[2^61, 2^62)`.
pub fn random_prime_62(rng: &mut impl Rng) -> u64 {
    loop {
        let candidate = rng.random_range(1u64 << 61..1u64 << 62) | 1;
        if is_prime(candidate) {
            return candidate;
        }
    }
}

/// Rank of `W` modulo the prime `q`.
pub fn rank_modq(w: &SelectionMatrix, q: u64) -> Result<usize> {
    if !is_prime(q) {
        return param(format!("{q} is not prime"));
    }
    let r = w.r();
    let mut rows: Vec<Vec<u64>> = (0..w.m())
        .map(|i| (0..r).map(|j| u64::from(w.get(i, j)) % q).collect())
        .collect();
    let mut rank = 0;
    for col in 0..r {
        let Some(p) = (rank..rows.len()).find(|&i| rows[i][col] != 0) else {
            continue;
        };
        rows.swap(rank, p);
        let inv = pow_mod(rows[rank][col], q - 2, q);
        let pivot: Vec<u64> = rows[rank].iter().map(|&v| mul_mod(v, inv, q)).collect();
        for (i, row) in rows.iter_mut().enumerate() {
            let f = row[col];
            if i != rank && f != 0 {
                for (a, &b) in row.iter_mut().zip(&pivot) {
                    *a = (*a + q - mul_mod(f, b, q)) % q;
                }
            }
        }
        rows[rank] = pivot;
        rank += 1;
    }
    Ok(rank)
}

/// Exact rational rank by fraction-free (Bareiss) elimination.
pub fn rank_bareiss(w: &SelectionMatrix) -> usize {
    let (m, r) = (w.m(), w.r());
    let mut a: Vec<Vec<BigInt>> = (0..m)
        .map(|i| (0..r).map(|j| BigInt::from(u8::from(w.get(i, j)))).collect())
        .collect();
    let mut prev = BigInt::one();
    let mut rank = 0;
    for col in 0..r {
        let Some(p) = (rank..m).find(|&i| !a[i][col].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        for i in rank + 1..m {
            for j in col + 1..r {
                let v = (&a[i][j] * &a[rank][col] - &a[i][col] * &a[rank][j]) / &prev;
                a[i][j] = v;
            }
            a[i][col] = BigInt::zero();
        }
        prev = a[rank][col].clone();
        rank += 1;
    }
    rank
}

/// Largest dimension for which the rational rank is certified by Bareiss
/// elimination when the modular ranks fall short of `min(m, r)`.
pub const BAREISS_MAX_R: usize = 200;

/// Rank over the rationals and whether it is certified exact.
///
/// The rank modulo any prime is a lower bound; when the best of three random
/// 62-bit primes already reaches `min(m, r)` it is exact. Otherwise Bareiss
/// elimination decides for `r <= 200`, and above that the modular value is
/// returned uncertified.
pub fn rank_real(w: &SelectionMatrix, seed: Seed) -> (usize, bool) {
    let full = w.m().min(w.r());
    let mut rng = seed.stream(0);
    let mut best = 0;
    for _ in 0..3 {
        let q = random_prime_62(&mut rng);
        best = best.max(rank_modq(w, q).expect("prime by construction"));
        if best == full {
            return (best, true);
        }
    }
    if w.r() <= BAREISS_MAX_R {
        (rank_bareiss(w), true)
    } else {
        (best, false)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankReport {
    pub rank_f2: usize,
    /// `(q, rank mod q)` for every queried prime.
    pub rank_modq: Vec<(u64, usize)>,
    pub rank_real: usize,
    pub real_certified: bool,
    pub notes: Vec<String>,
}

pub fn rank_report(w: &SelectionMatrix, primes: &[u64]) -> Result<RankReport> {
    let rank_modq = primes
        .iter()
        .map(|&q| rank_modq(w, q).map(|r| (q, r)))
        .collect::<Result<Vec<_>>>()?;
    let (rank_real, real_certified) = rank_real(w, Seed(0x5EED));
    let mut notes = vec!["f2: bit-packed Gaussian elimination".to_string()];
    notes.push(if real_certified {
        "real: exact (modular rank reached min(m, r) or Bareiss elimination)".to_string()
    } else {
        "real: best of three random 62-bit primes, not certified".to_string()
    });
    if w.k().is_multiple_of(2) && w.m() > 0 {
        notes.push("even k: the all-ones vector lies in the F2 kernel".to_string());
    }
    Ok(RankReport {
        rank_f2: rank_f2(w),
        rank_modq,
        rank_real,
        real_certified,
        notes,
    })
}

/// Observed frequency with a 95% Wilson score interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub hits: usize,
    pub trials: usize,
    pub frequency: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Frequency {
    pub fn wilson(hits: usize, trials: usize) -> Self {
        let z = 1.959_963_984_540_054;
        let n = trials as f64;
        let p = if trials == 0 { 0.0 } else { hits as f64 / n };
        let (low, high) = if trials == 0 {
            (0.0, 1.0)
        } else {
            let denom = 1.0 + z * z / n;
            let centre = (p + z * z / (2.0 * n)) / denom;
            let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
            ((centre - half).max(0.0), (centre + half).min(1.0))
        };
        Frequency {
            hits,
            trials,
            frequency: p,
            ci_low: low,
            ci_high: high,
        }
    }
}

/// Full-column-rank frequencies of random `W` per rank notion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularityRecord {
    pub m: usize,
    pub r: usize,
    pub k: usize,
    pub f2: Frequency,
    pub real: Frequency,
}

pub fn singularity_experiment(m: usize, r: usize, k: usize, trials: usize, seed: Seed) -> Result<SingularityRecord> {
    if trials == 0 {
        return param("trials must be at least 1");
    }
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial = seed.split(t as u64);
            let w = gen_selection_matrix(m, r, k, trial)?;
            Ok((rank_f2(&w) == r, rank_real(&w, trial.split(1)).0 == r))
        })
        .collect::<Result<Vec<_>>>()?;
    let f2 = outcomes.iter().filter(|o| o.0).count();
    let real = outcomes.iter().filter(|o| o.1).count();
    Ok(SingularityRecord {
        m,
        r,
        k,
        f2: Frequency::wilson(f2, trials),
        real: Frequency::wilson(real, trials),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundReport {
    pub r: usize,
    pub k: usize,
    /// Number of `λ` values checked (`0..=r/2`).
    pub checked: usize,
    pub first_violation: Option<usize>,
}

/// Check `|K_k^r(λ)| <= C(r,k) (1 − 2k/r)^λ` for every `λ <= r/2` exactly,
/// as `|K| r^λ <= C(r,k) (r − 2k)^λ`. Requires `k <= 0.16 r`.
pub fn krawtchouk_bound_check(r: usize, k: usize) -> Result<BoundReport> {
    if 100 * k > 16 * r {
        return param(format!("bound needs k <= 0.16 r, got r={r}, k={k}"));
    }
    let c = BigInt::from(binomial(r, k));
    let mut first_violation = None;
    let mut lhs_scale = BigInt::one();
    let mut rhs_scale = BigInt::one();
    for lambda in 0..=r / 2 {
        let kr = krawtchouk(r, k, lambda)?;
        if kr.abs() * &lhs_scale > &c * &rhs_scale {
            first_violation = Some(lambda);
            break;
        }
        lhs_scale *= r;
        rhs_scale *= r - 2 * k;
    }
    Ok(BoundReport {
        r,
        k,
        checked: r / 2 + 1,
        first_violation,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FibreStats {
    /// Largest number of coordinates sharing one value.
    pub largest: usize,
    /// Number of nonzero coordinates.
    pub support: usize,
}

pub fn fibre_stats(x: &[i64]) -> FibreStats {
    let mut counts: HashMap<i64, usize> = HashMap::new();
    for &v in x {
        *counts.entry(v).or_default() += 1;
    }
    FibreStats {
        largest: counts.values().copied().max().unwrap_or(0),
        support: x.iter().filter(|&&v| v != 0).count(),
    }
}

/// Where inner products are compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulus {
    Real,
    Mod(u64),
}

impl Modulus {
    fn reduce(self, v: i64) -> i64 {
        match self {
            Modulus::Real => v,
            Modulus::Mod(q) => v.rem_euclid(q as i64),
        }
    }
}

impl std::str::FromStr for Modulus {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "real" {
            return Ok(Modulus::Real);
        }
        match s.parse::<u64>() {
            Ok(q) if q >= 2 => Ok(Modulus::Mod(q)),
            _ => param(format!("modulus must be \"real\" or an integer >= 2, got {s:?}")),
        }
    }
}

pub const DEFAULT_ENVELOPE: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnticoncentrationReport {
    /// Estimated `max_a Pr[⟨w, x⟩ = a]`.
    pub max_atom: f64,
    /// The most frequent value.
    pub atom: i64,
    pub samples: usize,
    /// `r` minus the largest fibre size.
    pub s: usize,
    /// `C sqrt(r / (s k))`, absent when `s = 0` or `k = 0`.
    pub envelope: Option<f64>,
    pub within_envelope: Option<bool>,
}

fn atom_report(counts: HashMap<i64, usize>, total: usize, x: &[i64], k: usize, c: f64) -> AnticoncentrationReport {
    let (atom, hits) = counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .unwrap_or((0, 0));
    let max_atom = hits as f64 / total.max(1) as f64;
    let s = x.len() - fibre_stats(x).largest;
    let envelope = (s > 0 && k > 0).then(|| c * (x.len() as f64 / (s * k) as f64).sqrt());
    AnticoncentrationReport {
        max_atom,
        atom,
        samples: total,
        s,
        envelope,
        within_envelope: envelope.map(|e| max_atom <= e),
    }
}

/// Monte-Carlo estimate of the largest atom of `⟨w, x⟩` over uniform
/// `k`-sparse `w`, with the envelope `c sqrt(r/(s k))` for comparison.
pub fn anticoncentration_estimate(
    x: &[i64],
    k: usize,
    modulus: Modulus,
    samples: usize,
    seed: Seed,
    c: f64,
) -> Result<AnticoncentrationReport> {
    let r = x.len();
    if samples == 0 {
        return param("samples must be at least 1");
    }
    if k > r {
        return param(format!("need k <= r, got k={k}, r={r}"));
    }
    let mut rng = seed.stream(0);
    let mut counts: HashMap<i64, usize> = HashMap::new();
    for _ in 0..samples {
        let s = sample_k_subset(&mut rng, r, k);
        let v = modulus.reduce(s.iter().map(|&j| x[j]).sum());
        *counts.entry(v).or_default() += 1;
    }
    Ok(atom_report(counts, samples, x, k, c))
}

/// The same quantity by enumerating every support (`r <= 64`).
pub fn anticoncentration_exact(x: &[i64], k: usize, modulus: Modulus, c: f64) -> Result<AnticoncentrationReport> {
    let alphabet = Alphabet::new(x.len(), k)?;
    let mut counts: HashMap<i64, usize> = HashMap::new();
    let mut total = 0;
    for mask in alphabet.letters() {
        let v: i64 = (0..x.len()).filter(|&j| mask >> j & 1 == 1).map(|j| x[j]).sum();
        *counts.entry(modulus.reduce(v)).or_default() += 1;
        total += 1;
    }
    Ok(atom_report(counts, total, x, k, c))
}
