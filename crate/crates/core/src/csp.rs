//! Sparse BMF as a dense Max 2-CSP.
//!
//! Each row of the unknown factor becomes a vertex whose label is a
//! `k`-subset of `[r]`; each entry of `M` becomes a constraint on the pair of
//! labels at its endpoints. Symmetric instances live on the complete graph
//! (diagonal left out, its value is forced), asymmetric ones on the complete
//! bipartite graph between rows of `U` and columns of `V`.
//!
//! Letters are `u64` bit masks ranked in colexicographic order, which for
//! fixed weight is plain numeric order, so the alphabet is walked with
//! Gosper's hack and never materialized.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::instance::{Arithmetic, GramMatrix, SelectionMatrix};
use crate::seed::Seed;

pub const DEFAULT_BUDGET: f64 = 1e7;

/// All `k`-subsets of `[r]`, `r <= 64`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    r: usize,
    k: usize,
    size: u64,
    binom: Vec<Vec<u64>>,
}

impl Alphabet {
    pub fn new(r: usize, k: usize) -> Result<Self> {
        if r > 64 || k > r {
            return param(format!("alphabet needs k <= r <= 64, got r={r}, k={k}"));
        }
        let mut binom = vec![vec![0u64; k + 1]; r + 1];
        for n in 0..=r {
            binom[n][0] = 1;
            for j in 1..=k.min(n) {
                binom[n][j] = binom[n - 1][j - 1].saturating_add(if j < n { binom[n - 1][j] } else { 0 });
            }
        }
        let size = binom[r][k];
        Ok(Alphabet { r, k, size, binom })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    fn c(&self, n: usize, j: usize) -> u64 {
        if j > n {
            0
        } else {
            self.binom[n][j]
        }
    }

    /// Colex rank of a mask with exactly `k` bits below bit `r`.
    pub fn rank(&self, mask: u64) -> Result<u64> {
        let in_range = self.r == 64 || mask >> self.r == 0;
        if mask.count_ones() as usize != self.k || !in_range {
            return Err(Error::InvalidLetter {
                letter: mask,
                size: self.size,
            });
        }
        let mut rank = 0;
        let mut rest = mask;
        let mut i = 1;
        while rest != 0 {
            let c = rest.trailing_zeros() as usize;
            rank += self.c(c, i);
            rest &= rest - 1;
            i += 1;
        }
        Ok(rank)
    }

    pub fn unrank(&self, rank: u64) -> Result<u64> {
        if rank >= self.size {
            return Err(Error::InvalidLetter {
                letter: rank,
                size: self.size,
            });
        }
        let mut mask = 0u64;
        let mut rest = rank;
        let mut top = self.r;
        for i in (1..=self.k).rev() {
            let mut c = i - 1;
            while c + 1 < top && self.c(c + 1, i) <= rest {
                c += 1;
            }
            rest -= self.c(c, i);
            mask |= 1 << c;
            top = c;
        }
        Ok(mask)
    }

    /// Letters in rank order.
    pub fn letters(&self) -> Letters {
        Letters {
            next: if self.k == 0 {
                Some(0)
            } else {
                Some(u64::MAX >> (64 - self.k))
            },
            r: self.r,
        }
    }
}

/// Iterator over fixed-weight masks in increasing order.
pub struct Letters {
    next: Option<u64>,
    r: usize,
}

impl Iterator for Letters {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let cur = self.next?;
        self.next = if cur == 0 {
            None
        } else {
            // Gosper's hack; stop once the top bit would leave [0, r).
            let c = cur & cur.wrapping_neg();
            let (s, overflow) = cur.overflowing_add(c);
            if overflow || s == 0 {
                None
            } else {
                let n = s | (((cur ^ s) >> 2) / c);
                (self.r == 64 || n >> self.r == 0).then_some(n)
            }
        };
        Some(cur)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// Complete graph on `m` vertices.
    Symmetric,
    /// Complete bipartite graph between `rows` and `cols` vertices.
    Bipartite,
}

#[derive(Clone, Debug)]
pub struct CspInstance {
    alphabet: Alphabet,
    topology: Topology,
    mode: Arithmetic,
    rows: usize,
    cols: usize,
    targets: Vec<u8>,
}

/// Labels and their value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    /// Letter rank per vertex.
    pub sigma: Vec<u64>,
    pub value: usize,
}

impl CspInstance {
    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn mode(&self) -> Arithmetic {
        self.mode
    }

    pub fn vertices(&self) -> usize {
        match self.topology {
            Topology::Symmetric => self.rows,
            Topology::Bipartite => self.rows + self.cols,
        }
    }

    pub fn edges(&self) -> usize {
        match self.topology {
            Topology::Symmetric => self.rows * self.rows.saturating_sub(1) / 2,
            Topology::Bipartite => self.rows * self.cols,
        }
    }

    /// Edge density: 1 for the complete graph, 1/2 for the bipartite one.
    pub fn density(&self) -> f64 {
        match self.topology {
            Topology::Symmetric => 1.0,
            Topology::Bipartite => 0.5,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Raw `M[i][j]` (symmetric: `rows x rows` with diagonal).
    pub fn target(&self, i: usize, j: usize) -> u8 {
        self.targets[i * self.cols + j]
    }

    /// Constraint on edge `(u, v)` in vertex numbering.
    fn edge_target(&self, u: usize, v: usize) -> Option<u8> {
        match self.topology {
            Topology::Symmetric => (u != v).then(|| self.target(u, v)),
            Topology::Bipartite => {
                let (a, b) = if u < v { (u, v) } else { (v, u) };
                (a < self.rows && b >= self.rows).then(|| self.target(a, b - self.rows))
            }
        }
    }

    fn neighbours(&self, v: usize) -> std::ops::Range<usize> {
        match self.topology {
            Topology::Symmetric => 0..self.rows,
            Topology::Bipartite if v < self.rows => self.rows..self.rows + self.cols,
            Topology::Bipartite => 0..self.rows,
        }
    }

    fn satisfied(&self, a: u64, b: u64, target: u8) -> bool {
        let overlap = (a & b).count_ones();
        match self.mode {
            Arithmetic::Integer => overlap == u32::from(target),
            Arithmetic::Boolean => u8::from(overlap > 0) == target,
        }
    }

    /// Satisfied edges between `v` (labelled `letter`) and the vertices for
    /// which `labels` holds a mask.
    fn local_score(&self, v: usize, letter: u64, labels: &[Option<u64>]) -> usize {
        self.neighbours(v)
            .filter(|&u| u != v)
            .filter(|&u| match (labels[u], self.edge_target(v, u)) {
                (Some(other), Some(t)) => self.satisfied(letter, other, t),
                _ => false,
            })
            .count()
    }

    fn masks(&self, sigma: &[u64]) -> Result<Vec<u64>> {
        if sigma.len() != self.vertices() {
            return Err(Error::DimensionMismatch {
                expected: self.vertices(),
                found: sigma.len(),
            });
        }
        sigma.iter().map(|&s| self.alphabet.unrank(s)).collect()
    }

    /// Upper-triangle targets (symmetric) or all targets row by row.
    pub fn dump(&self) -> CspDump {
        let targets = match self.topology {
            Topology::Symmetric => (0..self.rows)
                .flat_map(|i| (i + 1..self.rows).map(move |j| (i, j)))
                .map(|(i, j)| self.target(i, j))
                .collect(),
            Topology::Bipartite => self.targets.clone(),
        };
        CspDump {
            m: self.rows,
            n: (self.topology == Topology::Bipartite).then_some(self.cols),
            r: self.alphabet.r,
            k: self.alphabet.k,
            mode: self.mode,
            topology: self.topology,
            targets,
        }
    }
}

/// Serialized form of an instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CspDump {
    pub m: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n: Option<usize>,
    pub r: usize,
    pub k: usize,
    pub mode: Arithmetic,
    pub topology: Topology,
    pub targets: Vec<u8>,
}

fn check_target(value: u8, mode: Arithmetic, k: usize) -> Result<()> {
    let bound = match mode {
        Arithmetic::Integer => k,
        Arithmetic::Boolean => 1,
    };
    if usize::from(value) > bound {
        return param(format!("target {value} outside 0..={bound}"));
    }
    Ok(())
}

/// Complete-graph instance from a symmetric matrix. Integer mode needs the
/// intersection counts of `M`.
pub fn reduce_symmetric(m: &GramMatrix, r: usize, k: usize, mode: Arithmetic) -> Result<CspInstance> {
    let alphabet = Alphabet::new(r, k)?;
    let n = m.m();
    if mode == Arithmetic::Integer && !m.has_counts() {
        return param("integer mode needs a Gram matrix with counts");
    }
    let mut targets = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let v = m.entry(a, b, mode).unwrap_or(0);
            if a != b {
                check_target(v, mode, k)?;
            }
            targets.push(v);
        }
    }
    Ok(CspInstance {
        alphabet,
        topology: Topology::Symmetric,
        mode,
        rows: n,
        cols: n,
        targets,
    })
}

/// Bipartite instance for `M ≈ U V` with `k`-sparse rows of `U` and
/// `k`-sparse columns of `V`.
pub fn reduce_asymmetric(m: &[Vec<u8>], r: usize, k: usize) -> Result<CspInstance> {
    let alphabet = Alphabet::new(r, k)?;
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut targets = Vec::with_capacity(rows * cols);
    for row in m {
        if row.len() != cols {
            return Err(Error::DimensionMismatch {
                expected: cols,
                found: row.len(),
            });
        }
        for &v in row {
            check_target(v, Arithmetic::Integer, k)?;
            targets.push(v);
        }
    }
    Ok(CspInstance {
        alphabet,
        topology: Topology::Bipartite,
        mode: Arithmetic::Integer,
        rows,
        cols,
        targets,
    })
}

/// Number of satisfied edges.
pub fn evaluate(inst: &CspInstance, sigma: &[u64]) -> Result<usize> {
    let masks = inst.masks(sigma)?;
    let mut value = 0;
    for u in 0..inst.vertices() {
        for v in inst.neighbours(u).filter(|&v| v > u) {
            if let Some(t) = inst.edge_target(u, v) {
                value += usize::from(inst.satisfied(masks[u], masks[v], t));
            }
        }
    }
    Ok(value)
}

/// Optimal assignment by depth-first enumeration with a simple
/// satisfied-so-far plus remaining-edges bound. Refuses instances with more
/// than `budget` complete assignments.
pub fn solve_exact(inst: &CspInstance, budget: f64) -> Result<Assignment> {
    let n = inst.vertices();
    let required = (inst.alphabet.size as f64).powi(n as i32);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    if n == 0 {
        return Ok(Assignment { sigma: Vec::new(), value: 0 });
    }
    // remaining[i] = edges with at least one endpoint >= i.
    let mut remaining = vec![0usize; n + 1];
    for i in (0..n).rev() {
        let back = inst.neighbours(i).filter(|&u| u < i).count();
        remaining[i] = remaining[i + 1] + back;
    }

    struct Search<'a> {
        inst: &'a CspInstance,
        remaining: Vec<usize>,
        labels: Vec<Option<u64>>,
        best: Option<(usize, Vec<u64>)>,
    }

    impl Search<'_> {
        fn go(&mut self, i: usize, score: usize) {
            let n = self.labels.len();
            if i == n {
                if self.best.as_ref().is_none_or(|(b, _)| score > *b) {
                    let masks = self.labels.iter().map(|l| l.expect("complete")).collect();
                    self.best = Some((score, masks));
                }
                return;
            }
            if let Some((b, _)) = &self.best {
                if score + self.remaining[i] <= *b {
                    return;
                }
            }
            for letter in self.inst.alphabet.letters() {
                // Only edges back to already-labelled vertices count here.
                let gain = self.inst.local_score(i, letter, &self.labels);
                self.labels[i] = Some(letter);
                self.go(i + 1, score + gain);
                self.labels[i] = None;
            }
        }
    }

    let mut search = Search {
        inst,
        remaining,
        labels: vec![None; n],
        best: None,
    };
    search.go(0, 0);
    let (value, masks) = search.best.expect("nonempty alphabet");
    let sigma = masks
        .into_iter()
        .map(|m| inst.alphabet.rank(m))
        .collect::<Result<Vec<_>>>()?;
    Ok(Assignment { sigma, value })
}

/// One local-search restart.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalRun {
    pub initial: Assignment,
    pub result: Assignment,
    pub moves: usize,
}

fn local_run(inst: &CspInstance, iters: usize, seed: Seed, restart: usize) -> Result<LocalRun> {
    use rand::Rng;
    let n = inst.vertices();
    let size = inst.alphabet.size;
    let mut rng = seed.stream(restart as u64);
    let sigma: Vec<u64> = (0..n).map(|_| rng.random_range(0..size)).collect();
    let mut labels: Vec<Option<u64>> = inst.masks(&sigma)?.into_iter().map(Some).collect();
    let initial = Assignment {
        value: evaluate(inst, &sigma)?,
        sigma,
    };
    let mut value = initial.value;
    let mut moves = 0;
    for _ in 0..iters {
        // Best single-vertex relabelling; ties go to the lowest vertex, then
        // the lowest rank, because only strict improvements replace.
        let mut best: Option<(usize, usize, u64)> = None;
        for v in 0..n {
            let current = labels[v].expect("total");
            let base = inst.local_score(v, current, &labels);
            for letter in inst.alphabet.letters() {
                if letter == current {
                    continue;
                }
                let score = inst.local_score(v, letter, &labels);
                if score > base && best.is_none_or(|(g, _, _)| score - base > g) {
                    best = Some((score - base, v, letter));
                }
            }
        }
        let Some((gain, v, letter)) = best else {
            break;
        };
        labels[v] = Some(letter);
        value += gain;
        moves += 1;
    }
    let sigma = labels
        .iter()
        .map(|l| inst.alphabet.rank(l.expect("total")))
        .collect::<Result<Vec<_>>>()?;
    Ok(LocalRun {
        initial,
        result: Assignment { sigma, value },
        moves,
    })
}

/// Every restart of [`solve_local`], in restart order.
pub fn local_search_runs(inst: &CspInstance, restarts: usize, iters: usize, seed: Seed) -> Result<Vec<LocalRun>> {
    (0..restarts.max(1))
        .into_par_iter()
        .map(|i| local_run(inst, iters, seed, i))
        .collect()
}

/// Random restarts of best-improvement single-vertex moves, at most `iters`
/// moves each. Returns the best restart (earliest on ties).
pub fn solve_local(inst: &CspInstance, restarts: usize, iters: usize, seed: Seed) -> Result<Assignment> {
    let runs = local_search_runs(inst, restarts, iters, seed)?;
    let mut best: Option<Assignment> = None;
    for run in runs {
        if best.as_ref().is_none_or(|b| run.result.value > b.value) {
            best = Some(run.result);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Factors read off an assignment, with the mismatch counts against `M`.
#[derive(Clone, Debug)]
pub enum CspFactors {
    Symmetric {
        w: SelectionMatrix,
        /// Off-diagonal mismatches, each unordered pair counted twice.
        offdiag_l0: usize,
        diag_l0: usize,
    },
    Bipartite {
        u: SelectionMatrix,
        /// Rows of this matrix are the columns of `V`.
        v_t: SelectionMatrix,
        l0: usize,
    },
}

impl CspFactors {
    /// Mismatches excluding the diagonal.
    pub fn objective(&self) -> usize {
        match self {
            CspFactors::Symmetric { offdiag_l0, .. } => *offdiag_l0,
            CspFactors::Bipartite { l0, .. } => *l0,
        }
    }
}

fn to_selection(r: usize, k: usize, masks: &[u64]) -> Result<SelectionMatrix> {
    let supports = masks
        .iter()
        .map(|&m| (0..r).filter(|&j| m >> j & 1 == 1).collect())
        .collect();
    SelectionMatrix::from_supports(r, k, supports)
}

pub fn assignment_to_factors(inst: &CspInstance, sigma: &[u64]) -> Result<CspFactors> {
    let masks = inst.masks(sigma)?;
    let (r, k) = (inst.alphabet.r, inst.alphabet.k);
    let value_of = |a: u64, b: u64| {
        let overlap = (a & b).count_ones() as u8;
        match inst.mode {
            Arithmetic::Integer => overlap,
            Arithmetic::Boolean => u8::from(overlap > 0),
        }
    };
    match inst.topology {
        Topology::Symmetric => {
            let n = inst.rows;
            let (mut offdiag_l0, mut diag_l0) = (0, 0);
            for a in 0..n {
                for b in 0..n {
                    if value_of(masks[a], masks[b]) != inst.target(a, b) {
                        if a == b {
                            diag_l0 += 1;
                        } else {
                            offdiag_l0 += 1;
                        }
                    }
                }
            }
            Ok(CspFactors::Symmetric {
                w: to_selection(r, k, &masks)?,
                offdiag_l0,
                diag_l0,
            })
        }
        Topology::Bipartite => {
            let (left, right) = masks.split_at(inst.rows);
            let mut l0 = 0;
            for (a, &ma) in left.iter().enumerate() {
                for (b, &mb) in right.iter().enumerate() {
                    l0 += usize::from(value_of(ma, mb) != inst.target(a, b));
                }
            }
            Ok(CspFactors::Bipartite {
                u: to_selection(r, k, left)?,
                v_t: to_selection(r, k, right)?,
                l0,
            })
        }
    }
}

/// The assignment labelling each vertex with the matching row of `w`.
pub fn planted_assignment(inst: &CspInstance, w: &SelectionMatrix) -> Result<Vec<u64>> {
    if w.m() != inst.vertices() {
        return Err(Error::DimensionMismatch {
            expected: inst.vertices(),
            found: w.m(),
        });
    }
    w.supports()
        .iter()
        .map(|s| inst.alphabet.rank(s.iter().fold(0u64, |acc, &j| acc | 1 << j)))
        .collect()
}
