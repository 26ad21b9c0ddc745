//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use ssbmf::SelectionMatrix;

/// All `k`-subsets of `0..r` in lexicographic order.
pub fn subsets(r: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, r: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..r {
            cur.push(j);
            rec(j + 1, r, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, r, k, &mut Vec::new(), &mut out);
    out
}

/// Every `k`-subset exactly once: zero fractions equal `mu` exactly.
pub fn design(r: usize, k: usize) -> SelectionMatrix {
    SelectionMatrix::from_supports(r, k, subsets(r, k)).unwrap()
}

pub fn mask(bits: &[usize]) -> u64 {
    bits.iter().fold(0, |acc, &j| acc | 1 << j)
}

pub fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `|S_a ∩ S_b ∩ S_c|` straight from the supports.
pub fn triple(w: &SelectionMatrix, a: usize, b: usize, c: usize) -> u8 {
    w.support(a)
        .iter()
        .filter(|j| w.support(b).contains(j) && w.support(c).contains(j))
        .count() as u8
}

/// Off-diagonal integer mismatches of the labelling `masks` against `m`,
/// counting both triangles.
pub fn offdiag_mismatch(m: &[Vec<u8>], masks: &[u64]) -> usize {
    let n = m.len();
    let mut out = 0;
    for a in 0..n {
        for b in 0..n {
            if a != b && (masks[a] & masks[b]).count_ones() as u8 != m[a][b] {
                out += 1;
            }
        }
    }
    out
}
