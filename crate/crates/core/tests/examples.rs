//! Worked examples for every operation, checked against direct computation.

mod common;

use common::{binom, design, mask, offdiag_mismatch, subsets};
use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use ssbmf::csp::{self, assignment_to_factors, evaluate, reduce_asymmetric, reduce_symmetric, CspFactors};
use ssbmf::jennrich::extend_from_anchors;
use ssbmf::mu::{pairwise_union_sizes, zero_cooccurrence};
use ssbmf::probes::{self, Modulus};
use ssbmf::recover::{self, Dataset, HeavyRecoveryConfig};
use ssbmf::tensor::TensorBuilder;
use ssbmf::*;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn sel(r: usize, k: usize, rows: &[&[usize]]) -> SelectionMatrix {
    SelectionMatrix::from_supports(r, k, rows.iter().map(|s| s.to_vec()).collect()).unwrap()
}

// ---- instance ----

#[test]
fn gen_k_equals_r_gives_full_rows() {
    let w = gen_selection_matrix(3, 4, 4, Seed(123)).unwrap();
    assert!(w.supports().iter().all(|s| s == &[0, 1, 2, 3]));
}

#[test]
fn gen_support_histogram_is_uniform() {
    let w = gen_selection_matrix(2000, 10, 2, Seed(7)).unwrap();
    let all = subsets(10, 2);
    let mut counts = vec![0usize; all.len()];
    for s in w.supports() {
        counts[all.iter().position(|t| t == s).unwrap()] += 1;
    }
    let (n, p) = (2000.0f64, 1.0 / 45.0);
    let sd = (n * p * (1.0 - p)).sqrt();
    let mut chi2 = 0.0;
    for &c in &counts {
        assert!((c as f64 - n * p).abs() < 5.0 * sd, "count {c}");
        chi2 += (c as f64 - n * p).powi(2) / (n * p);
    }
    // 99.9% quantile of chi-square with 44 degrees of freedom is about 78.7.
    assert!(chi2 < 78.7, "chi2 = {chi2}");
}

#[test]
fn gen_is_deterministic() {
    let a = gen_selection_matrix(5, 4, 2, Seed(1)).unwrap();
    let b = gen_selection_matrix(5, 4, 2, Seed(1)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gen_rejects_bad_parameters() {
    assert!(gen_selection_matrix(3, 4, 5, Seed(0)).unwrap_err().is_parameter_error());
    assert!(gen_selection_matrix(0, 4, 2, Seed(0)).unwrap_err().is_parameter_error());
    assert!(gen_selection_matrix(3, 4, 0, Seed(0)).unwrap_err().is_parameter_error());
}

#[test]
fn gram_examples() {
    let w = sel(4, 2, &[&[0, 1], &[1, 2], &[2, 3]]);
    assert_eq!(gram(&w, Arithmetic::Boolean).to_dense(), vec![vec![1, 1, 0], vec![1, 1, 1], vec![0, 1, 1]]);
    let twice = sel(2, 2, &[&[0, 1], &[0, 1]]);
    assert_eq!(gram(&twice, Arithmetic::Integer).to_dense(), vec![vec![2, 2], vec![2, 2]]);
    let g = gram(&gen_selection_matrix(30, 7, 3, Seed(2)).unwrap(), Arithmetic::Boolean);
    assert!((0..30).all(|a| g.get(a, a)));
}

#[test]
fn factorization_error_examples() {
    let w = sel(4, 2, &[&[0, 1], &[2, 3]]);
    let m = gram(&w, Arithmetic::Boolean);
    assert_eq!(factorization_error(&m, &w, Arithmetic::Boolean, Diagonal::Include).unwrap(), 0);
    let other = sel(4, 2, &[&[0, 1], &[1, 2]]);
    assert_eq!(factorization_error(&m, &other, Arithmetic::Boolean, Diagonal::Include).unwrap(), 2);
    let ones = GramMatrix::from_dense(&[vec![1, 1], vec![1, 1]]).unwrap();
    assert_eq!(factorization_error(&ones, &w, Arithmetic::Boolean, Diagonal::Include).unwrap(), 2);
    assert_eq!(factorization_error(&ones, &w, Arithmetic::Boolean, Diagonal::Exclude).unwrap(), 2);
    let short = sel(4, 2, &[&[0, 1]]);
    assert!(factorization_error(&m, &short, Arithmetic::Boolean, Diagonal::Include).is_err());
}

// ---- mu ----

#[test]
fn mu_table_examples() {
    let t = mu_table(10, 2, 9).unwrap();
    assert_eq!(t.value(0), rat(1, 1));
    assert_eq!(t.value(1), rat(36, 45));
    assert_eq!(t.value(2), rat(28, 45));
    assert_eq!(t.value(3), rat(21, 45));
    assert_eq!(t.value(9), rat(0, 1));
    for (r, k) in [(5, 1), (17, 4), (30, 7)] {
        assert_eq!(mu_table(r, k, 0).unwrap().value(0), rat(1, 1));
    }
    assert!(mu_table(3, 4, 1).unwrap_err().is_parameter_error());
}

#[test]
fn invert_fraction_examples() {
    let t = MuTable::new(10, 2).unwrap();
    assert_eq!(t.invert_fraction(1.0), 0);
    assert_eq!(t.invert_fraction(0.63), 2);
    assert_eq!(t.invert_fraction(0.45), 3);
}

#[test]
fn zero_cooccurrence_examples() {
    let m = GramMatrix::from_dense(&[vec![1, 1, 0], vec![1, 1, 1], vec![0, 1, 1]]).unwrap();
    assert_eq!(zero_cooccurrence(&m, &[0, 2]).unwrap(), 0);
    for a in 0..3 {
        let zeros = (0..3).filter(|&b| !m.get(a, b)).count();
        assert_eq!(zero_cooccurrence(&m, &[a, a]).unwrap(), zeros);
    }
    let ones = GramMatrix::from_dense(&vec![vec![1; 4]; 4]).unwrap();
    assert_eq!(zero_cooccurrence(&ones, &[0, 1, 3]).unwrap(), 0);
    assert!(zero_cooccurrence(&m, &[0, 5]).is_err());
}

#[test]
fn pairwise_union_sizes_on_the_design() {
    let w = design(8, 2);
    let m = gram(&w, Arithmetic::Boolean);
    let unions = pairwise_union_sizes(&m, &MuTable::new(8, 2).unwrap());
    let find = |s: &[usize]| w.supports().iter().position(|t| t == s).unwrap();
    assert_eq!(unions.get(find(&[0, 1]), find(&[1, 2])), 3);
    assert_eq!(unions.get(find(&[0, 1]), find(&[2, 3])), 4);
    for a in 0..w.m() {
        assert_eq!(unions.get(a, a), 2);
        for b in 0..w.m() {
            let union = 4 - w.intersection(a, b) as u8;
            assert_eq!(unions.get(a, b), union);
        }
    }
}

#[test]
fn required_sample_size_examples() {
    let m = required_sample_size(20, 2, 6, 0.1, 8.0).unwrap();
    let rhs = |m: usize| 8.0 * 36.0 * 20.0 / 2.0 * ((m as f64).powi(3) / 0.1).ln();
    assert!(m as f64 >= rhs(m));
    assert!(((m - 1) as f64) < rhs(m - 1));

    let base = required_sample_size(20, 2, 6, 0.1, 8.0).unwrap();
    assert!(required_sample_size(20, 2, 7, 0.1, 8.0).unwrap() >= base);
    assert!(required_sample_size(21, 2, 6, 0.1, 8.0).unwrap() >= base);
    assert!(required_sample_size(20, 2, 6, 0.01, 8.0).unwrap() >= base);

    let tiny = required_sample_size(2, 2, 1, 0.999_999, 1e-6).unwrap();
    assert!((1..=2).contains(&tiny));
}

// ---- tensor ----

#[test]
fn build_tensor_examples_on_the_design() {
    // Every 2-subset of [8] once, so every zero fraction is exactly mu.
    let w = design(8, 2);
    let m = gram(&w, Arithmetic::Boolean);
    let builder = TensorBuilder::new(&m, 8, 2).unwrap();
    let find = |s: &[usize]| w.supports().iter().position(|t| t == s).unwrap();
    let (a, b, c) = (find(&[0, 1]), find(&[0, 2]), find(&[0, 3]));
    assert_eq!(builder.union3(a, b, c), 4);
    assert_eq!(builder.union2(a, b), 3);
    assert_eq!(builder.entry(a, b, c).unwrap(), 1);
    let (d, e, f) = (find(&[0, 1]), find(&[2, 3]), find(&[4, 5]));
    assert_eq!(builder.entry(d, e, f).unwrap(), 0);
    assert_eq!(builder.entry(a, a, a).unwrap(), 2);

    let full = build_tensor(&m, 8, 2).unwrap();
    let oracle = oracle_tensor(&w).unwrap();
    assert!(full == oracle);
    assert_eq!(oracle.get(a, b, c), 1);
    assert_eq!(oracle.get(d, e, f), 0);
    assert_eq!(oracle.get(a, a, a), 2);
}

#[test]
fn contract_examples() {
    let t = IntersectionTensor::from_boolean_components(3, 2, &[vec![true, true, false]]).unwrap();
    let m = contract(&t, &[1.0, 0.0, 0.0]).unwrap();
    assert_eq!(m, DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]));
    assert_eq!(contract(&t, &[0.0; 3]).unwrap(), DMatrix::zeros(3, 3));
    let w = design(6, 1);
    let o = oracle_tensor(&w).unwrap();
    for c in 0..6 {
        let mut e = vec![0.0; 6];
        e[c] = 1.0;
        assert_eq!(contract(&o, &e).unwrap(), o.slice(c));
    }
    assert!(contract(&t, &[1.0]).is_err());
}

// ---- jennrich ----

#[test]
fn decompose_two_components() {
    let comps = vec![vec![true, true, false], vec![false, false, true]];
    let t = IntersectionTensor::from_boolean_components(3, 2, &comps).unwrap();
    let d = jennrich_decompose(&t, 2, Seed(0)).unwrap();
    let mut got: Vec<Vec<bool>> = d.components.iter().map(|v| round_boolean(v.as_slice(), 0.25).unwrap()).collect();
    got.sort();
    let mut want = comps.clone();
    want.sort();
    assert_eq!(got, want);
    for v in &d.components {
        let scale = v.amax();
        let n = v / scale * if v.iter().any(|x| *x < -0.5 * scale) { -1.0 } else { 1.0 };
        for x in n.iter() {
            assert!(x.abs() < 1e-6 || (x - 1.0).abs() < 1e-6, "{n}");
        }
    }
    let expanded = IntersectionTensor::from_boolean_components(3, 2, &got).unwrap();
    assert!(expanded == t);
}

#[test]
fn decompose_single_component() {
    let t = IntersectionTensor::from_boolean_components(3, 2, &[vec![true, false, true]]).unwrap();
    let d = jennrich_decompose(&t, 1, Seed(5)).unwrap();
    assert_eq!(round_boolean(d.components[0].as_slice(), 0.25).unwrap(), vec![true, false, true]);
}

#[test]
fn decompose_duplicated_components_is_rank_deficient() {
    let w = vec![true, true, false, false];
    let t = IntersectionTensor::from_boolean_components(4, 2, &[w.clone(), w]).unwrap();
    assert!(matches!(jennrich_decompose(&t, 2, Seed(0)), Err(Error::RankDeficient { .. })));
}

#[test]
fn round_boolean_examples() {
    assert_eq!(round_boolean(&[-2.0, 0.0, -2.0], 0.25).unwrap(), vec![true, false, true]);
    assert_eq!(round_boolean(&[0.9999, 1e-9, 1.0001], 0.25).unwrap(), vec![true, false, true]);
    match round_boolean(&[0.4, 0.6, 1.0], 0.25) {
        Err(Error::Rounding { index, .. }) => assert_eq!(index, 0),
        other => panic!("{other:?}"),
    }
}

#[test]
fn extension_from_unit_anchors() {
    // Anchors 0..r are the singletons; each other row is read off directly.
    let r = 5;
    let mut rows: Vec<Vec<usize>> = (0..r).map(|j| vec![j]).collect();
    for _ in 0..3 {
        rows.extend((0..r).map(|j| vec![j]));
    }
    let w = SelectionMatrix::from_supports(r, 1, rows).unwrap();
    let m = gram(&w, Arithmetic::Boolean);
    let anchors: Vec<usize> = (0..r).collect();
    let cols: Vec<Vec<bool>> = (0..r).map(|j| anchors.iter().map(|&a| w.get(a, j)).collect()).collect();
    let got = extend_from_anchors(&cols, &anchors, &m, &MuTable::new(r, 1).unwrap()).unwrap();
    assert_eq!(got, w);
}

#[test]
fn extension_of_a_planted_instance() {
    let w = gen_selection_matrix(4000, 8, 2, Seed(21)).unwrap();
    let m = gram(&w, Arithmetic::Boolean);
    let anchors: Vec<usize> = (0..32).map(|i| i * 97).collect();
    let cols: Vec<Vec<bool>> = (0..8).map(|j| anchors.iter().map(|&a| w.get(a, j)).collect()).collect();
    let got = extend_from_anchors(&cols, &anchors, &m, &MuTable::new(8, 2).unwrap()).unwrap();
    assert_eq!(got, w);
}

#[test]
fn extension_with_duplicated_anchor_column() {
    let w = sel(3, 2, &[&[0, 1], &[0, 1], &[0, 2], &[1, 2]]);
    let m = gram(&w, Arithmetic::Boolean);
    let anchors = vec![0, 1];
    let cols: Vec<Vec<bool>> = (0..3).map(|j| anchors.iter().map(|&a| w.get(a, j)).collect()).collect();
    assert!(matches!(
        extend_from_anchors(&cols, &anchors, &m, &MuTable::new(3, 2).unwrap()),
        Err(Error::RankDeficient { .. })
    ));
}

#[test]
fn recover_small_full_mode_never_claims_false_success() {
    // At m = 64 the zero fractions are far too noisy for r = 8, k = 2; the
    // pipeline may fail but must not report a wrong success.
    let w = gen_selection_matrix(64, 8, 2, Seed(3)).unwrap();
    let m = gram(&w, Arithmetic::Boolean);
    let cfg = RecoverConfig {
        mode: TensorMode::Full,
        seed: Seed(3),
        ..RecoverConfig::default()
    };
    if let Ok(mut f) = tensor_recover(&m, 8, 2, &cfg) {
        if f.success {
            assert!(f.align(&w).is_permutation());
            assert_eq!(f.residual, 0);
        } else {
            assert!(f.residual > 0);
        }
    }
}

#[test]
fn recover_full_mode_on_the_design() {
    let w = design(8, 2);
    let m = gram(&w, Arithmetic::Boolean);
    let cfg = RecoverConfig {
        mode: TensorMode::Full,
        ..RecoverConfig::default()
    };
    let mut f = tensor_recover(&m, 8, 2, &cfg).unwrap();
    assert!(f.success);
    assert_eq!(f.residual, 0);
    assert!(f.align(&w).is_permutation());
}

#[test]
fn recover_permutation_matrix() {
    let w = sel(4, 1, &[&[2], &[0], &[3], &[1]]);
    let m = gram(&w, Arithmetic::Boolean);
    for mode in [TensorMode::Full, TensorMode::Anchored] {
        let cfg = RecoverConfig { mode, ..RecoverConfig::default() };
        let mut f = tensor_recover(&m, 4, 1, &cfg).unwrap();
        assert!(f.success, "{mode:?}");
        assert!(f.align(&w).is_permutation());
    }
}

#[test]
fn recover_all_ones_is_not_a_success() {
    let m = GramMatrix::from_dense(&vec![vec![1; 6]; 6]).unwrap();
    let cfg = RecoverConfig {
        mode: TensorMode::Full,
        ..RecoverConfig::default()
    };
    match tensor_recover(&m, 3, 1, &cfg) {
        Ok(f) => assert!(!f.success && f.residual > 0),
        Err(e) => assert!(!e.is_parameter_error(), "{e}"),
    }
}

#[test]
fn match_columns_examples() {
    let w = gen_selection_matrix(40, 6, 2, Seed(9)).unwrap();
    let rev: Vec<usize> = (0..6).rev().collect();
    let reversed = w.permute_columns(&rev).unwrap();
    assert_eq!(match_factors(&reversed, &w), ColumnMatch::Permutation(rev));
    assert_eq!(match_factors(&w, &w), ColumnMatch::Permutation((0..6).collect()));

    let mut cols = w.columns();
    let flipped = !cols.get(2, 0);
    cols.set(2, 0, flipped);
    match match_columns(&cols, &w.columns()) {
        ColumnMatch::Mismatch { unmatched_hat, unmatched_ref } => {
            assert_eq!(unmatched_hat, vec![2]);
            assert_eq!(unmatched_ref, vec![2]);
        }
        other => panic!("{other:?}"),
    }
}

// ---- recover ----

#[test]
fn instahide_with_one_nonzero_row() {
    let mut x = DMatrix::zeros(6, 3);
    x.row_mut(4).copy_from_slice(&[1.5, -2.0, 0.25]);
    let (syn, g) = recover::gen_instahide(&Dataset::new(x).unwrap(), 50, 2, Seed(4)).unwrap();
    let w = syn.w.as_ref().unwrap();
    for i in 0..50 {
        let want: [f64; 3] = if w.support(i).contains(&4) { [1.5, 2.0, 0.25] } else { [0.0; 3] };
        assert_eq!(syn.z.row(i).iter().copied().collect::<Vec<_>>(), want);
    }
    assert_eq!(g, gram(w, Arithmetic::Boolean));
}

#[test]
fn instahide_with_zero_data_and_determinism() {
    let x = Dataset::new(DMatrix::zeros(5, 2)).unwrap();
    let (syn, g) = recover::gen_instahide(&x, 20, 3, Seed(8)).unwrap();
    assert!(syn.z.iter().all(|&v| v == 0.0));
    assert_eq!(g.m(), 20);
    let (again, g2) = recover::gen_instahide(&x, 20, 3, Seed(8)).unwrap();
    assert_eq!(again.w, syn.w);
    assert_eq!(g, g2);
    assert!(recover::gen_instahide(&x, 20, 1, Seed(8)).unwrap_err().is_parameter_error());
}

#[test]
fn expected_square_inner_examples() {
    let e1 = [1.0, 0.0, 0.0, 0.0];
    assert!((recover::expected_square_inner(&e1, 2).unwrap() - 0.5).abs() < 1e-15);
    assert_eq!(recover::expected_square_inner(&[0.0; 5], 2).unwrap(), 0.0);
    for (r, k) in [(4, 2), (9, 3), (12, 12)] {
        let v = recover::expected_square_inner(&vec![1.0; r], k).unwrap();
        assert!((v - (k * k) as f64).abs() < 1e-9);
    }
    assert!(recover::expected_square_inner(&[1.0], 1).is_err());
}

#[test]
fn heavy_coordinates_of_zero_observations() {
    let w = gen_selection_matrix(100, 10, 3, Seed(1)).unwrap();
    let est = recover::get_heavy_coordinates(&w, &[0.0; 100], &HeavyRecoveryConfig::default()).unwrap();
    assert!(est.iter().all(|&v| v == 0.0));
}

#[test]
fn heavy_estimate_is_exact_in_expectation_when_the_sum_vanishes() {
    let (r, k) = (10, 2);
    let mut p = vec![0.0; r];
    p[0] = 1.0;
    p[1] = -1.0;
    let z = |w: &SelectionMatrix| -> Vec<f64> {
        w.supports().iter().map(|s| s.iter().map(|&j| p[j]).sum::<f64>().abs()).collect()
    };
    let cfg = HeavyRecoveryConfig::default();
    let scale = recover::estimator_scale(r, k, cfg.normalization).unwrap();
    // The complete design averages over every support exactly once.
    let w = design(r, k);
    let q: Vec<f64> = recover::raw_statistic(&w, &z(&w)).unwrap().iter().map(|v| v * scale).collect();
    for i in 0..r {
        assert!((q[i] - p[i] * p[i]).abs() < 1e-12, "{i}: {}", q[i]);
    }
    let w = gen_selection_matrix(100_000, r, k, Seed(6)).unwrap();
    let est = recover::get_heavy_coordinates(&w, &z(&w), &cfg).unwrap();
    for i in 0..2 {
        assert!((est[i] * est[i] - 1.0).abs() < 0.05, "{i}: {}", est[i]);
    }
}

#[test]
fn heavy_entry_recovered_in_most_seeds() {
    let (r, k, m) = (50, 4, 6000);
    let hits = (0..10)
        .filter(|&s| {
            let (x, heavy) = recover::planted_dataset(r, 1, k, Some(10.0), Seed(s)).unwrap();
            let (syn, _) = recover::gen_instahide(&x, m, k, Seed(1000 + s)).unwrap();
            let w = syn.w.as_ref().unwrap();
            let col: Vec<f64> = syn.z.column(0).iter().copied().collect();
            let est = recover::get_heavy_coordinates(w, &col, &HeavyRecoveryConfig::default()).unwrap();
            let truth = x.matrix()[(heavy[0], 0)].abs();
            (est[heavy[0]] - truth).abs() <= 0.25 * truth
        })
        .count();
    assert!(hits >= 9, "{hits}/10");
}

#[test]
fn solve_exact_examples() {
    let w = sel(3, 1, &[&[2], &[0], &[1]]);
    let y = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let (x, res) = recover::solve_exact(&w, &y).unwrap();
    // Row i of Y is x_{σ(i)}.
    let want = DMatrix::from_row_slice(3, 2, &[3.0, 4.0, 5.0, 6.0, 1.0, 2.0]);
    assert!((x.matrix() - want).amax() < 1e-12);
    assert!(res < 1e-12);

    let dup = sel(3, 2, &[&[0, 1], &[0, 1], &[0, 1], &[0, 2]]);
    assert!(matches!(
        recover::solve_exact(&dup, &DMatrix::zeros(4, 1)),
        Err(Error::RankDeficient { .. })
    ));
}

// ---- csp ----

#[test]
fn symmetric_reduction_examples() {
    let m = GramMatrix::from_counts(&[vec![2, 1], vec![1, 2]]).unwrap();
    let inst = reduce_symmetric(&m, 3, 2, Arithmetic::Integer).unwrap();
    assert_eq!(inst.edges(), 1);
    let a = inst.alphabet();
    let sigma = [a.rank(mask(&[0, 1])).unwrap(), a.rank(mask(&[1, 2])).unwrap()];
    assert_eq!(evaluate(&inst, &sigma).unwrap(), 1);

    let one = GramMatrix::from_counts(&[vec![2]]).unwrap();
    let inst1 = reduce_symmetric(&one, 3, 2, Arithmetic::Integer).unwrap();
    assert_eq!(inst1.edges(), 0);
    assert_eq!(evaluate(&inst1, &[2]).unwrap(), 0);
    assert_eq!(csp::solve_exact(&inst1, csp::DEFAULT_BUDGET).unwrap().value, 0);

    let ones = GramMatrix::from_dense(&vec![vec![1; 3]; 3]).unwrap();
    let inst = reduce_symmetric(&ones, 3, 2, Arithmetic::Boolean).unwrap();
    let c = inst.alphabet().rank(mask(&[0, 1])).unwrap();
    assert_eq!(evaluate(&inst, &[c, c, c]).unwrap(), 3);

    let bad = GramMatrix::from_counts(&[vec![2, 3], vec![3, 2]]);
    assert!(bad.is_err() || reduce_symmetric(&bad.unwrap(), 3, 2, Arithmetic::Integer).is_err());
}

#[test]
fn asymmetric_reduction_examples() {
    let inst = reduce_asymmetric(&[vec![1]], 3, 2).unwrap();
    assert_eq!(inst.edges(), 1);
    let a = inst.alphabet();
    let sigma = [a.rank(mask(&[0, 1])).unwrap(), a.rank(mask(&[1, 2])).unwrap()];
    assert_eq!(evaluate(&inst, &sigma).unwrap(), 1);

    assert_eq!(reduce_asymmetric(&[vec![0, 1], vec![1, 0]], 3, 2).unwrap().edges(), 4);

    let u = [mask(&[0, 1]), mask(&[1, 2]), mask(&[2, 3])];
    let v = [mask(&[0, 2]), mask(&[1, 3]), mask(&[0, 1])];
    let m: Vec<Vec<u8>> = u.iter().map(|a| v.iter().map(|b| (a & b).count_ones() as u8).collect()).collect();
    let inst = reduce_asymmetric(&m, 4, 2).unwrap();
    let best = csp::solve_exact(&inst, csp::DEFAULT_BUDGET).unwrap();
    assert_eq!(best.value, 9);
    assert_eq!(assignment_to_factors(&inst, &best.sigma).unwrap().objective(), 0);

    // Cells are counted once in the bipartite view.
    let a = inst.alphabet();
    let mut sigma: Vec<u64> = u.iter().chain(&v).map(|&x| a.rank(x).unwrap()).collect();
    sigma[0] = a.rank(mask(&[2, 3])).unwrap();
    let value = evaluate(&inst, &sigma).unwrap();
    assert!(value < 9);
    assert_eq!(assignment_to_factors(&inst, &sigma).unwrap().objective(), 9 - value);

    assert!(reduce_asymmetric(&[vec![3]], 3, 2).is_err());
}

fn four_cycle() -> (SelectionMatrix, Vec<Vec<u8>>) {
    let w = sel(4, 2, &[&[0, 1], &[1, 2], &[2, 3], &[0, 3]]);
    let counts = gram(&w, Arithmetic::Integer).to_dense();
    (w, counts)
}

/// Best value over every labelling, by brute force.
fn brute_force_value(m: &[Vec<u8>], r: usize, k: usize) -> usize {
    let letters: Vec<u64> = subsets(r, k).iter().map(|s| mask(s)).collect();
    let n = m.len();
    let mut best = 0;
    let mut idx = vec![0usize; n];
    loop {
        let masks: Vec<u64> = idx.iter().map(|&i| letters[i]).collect();
        let edges = n * (n - 1) / 2;
        best = best.max(edges - offdiag_mismatch(m, &masks) / 2);
        let mut pos = 0;
        loop {
            if pos == n {
                return best;
            }
            idx[pos] += 1;
            if idx[pos] < letters.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

#[test]
fn exact_solver_examples() {
    let (_, counts) = four_cycle();
    let inst = reduce_symmetric(&GramMatrix::from_counts(&counts).unwrap(), 4, 2, Arithmetic::Integer).unwrap();
    let best = csp::solve_exact(&inst, csp::DEFAULT_BUDGET).unwrap();
    assert_eq!(best.value, 6);
    assert_eq!(brute_force_value(&counts, 4, 2), 6);
    assert_eq!(assignment_to_factors(&inst, &best.sigma).unwrap().objective(), 0);

    // Rows 0 and 1 declared disjoint: then row 2 must avoid row 0, forcing
    // it onto row 1 and breaking |S_1 ∩ S_2| = 1.
    let mut corrupt = counts.clone();
    corrupt[0][1] = 0;
    corrupt[1][0] = 0;
    let inst = reduce_symmetric(&GramMatrix::from_counts(&corrupt).unwrap(), 4, 2, Arithmetic::Integer).unwrap();
    let best = csp::solve_exact(&inst, csp::DEFAULT_BUDGET).unwrap();
    assert_eq!(brute_force_value(&corrupt, 4, 2), 5);
    assert_eq!(best.value, 5);
    match assignment_to_factors(&inst, &best.sigma).unwrap() {
        CspFactors::Symmetric { offdiag_l0, diag_l0, .. } => {
            assert_eq!(offdiag_l0, 2);
            assert_eq!(diag_l0, 0);
        }
        other => panic!("{other:?}"),
    }

    let big = gram(&gen_selection_matrix(12, 10, 3, Seed(0)).unwrap(), Arithmetic::Integer);
    let inst = reduce_symmetric(&big, 10, 3, Arithmetic::Integer).unwrap();
    assert!(matches!(csp::solve_exact(&inst, 1e7), Err(Error::BudgetExceeded { .. })));
}

#[test]
fn local_search_examples() {
    let (w, counts) = four_cycle();
    let inst = reduce_symmetric(&GramMatrix::from_counts(&counts).unwrap(), 4, 2, Arithmetic::Integer).unwrap();
    for run in csp::local_search_runs(&inst, 8, 50, Seed(3)).unwrap() {
        assert!(run.result.value >= run.initial.value);
        assert_eq!(evaluate(&inst, &run.result.sigma).unwrap(), run.result.value);
    }
    let runs = csp::local_search_runs(&inst, 8, 0, Seed(3)).unwrap();
    let best_initial = runs.iter().map(|r| r.initial.value).max().unwrap();
    assert_eq!(csp::solve_local(&inst, 8, 0, Seed(3)).unwrap().value, best_initial);
    let planted = csp::planted_assignment(&inst, &w).unwrap();
    assert_eq!(evaluate(&inst, &planted).unwrap(), inst.edges());

    let solved = (0..10)
        .filter(|&s| {
            let w = gen_selection_matrix(6, 5, 2, Seed(100 + s)).unwrap();
            let inst = reduce_symmetric(&gram(&w, Arithmetic::Integer), 5, 2, Arithmetic::Integer).unwrap();
            csp::solve_local(&inst, 50, 1000, Seed(s)).unwrap().value == 15
        })
        .count();
    assert!(solved >= 9, "{solved}/10");
}

// ---- probes ----

#[test]
fn krawtchouk_examples() {
    assert_eq!(probes::krawtchouk(4, 2, 0).unwrap(), BigInt::from(6));
    assert_eq!(probes::krawtchouk(4, 2, 2).unwrap(), BigInt::from(-2));
    assert_eq!(probes::krawtchouk(5, 3, 5).unwrap(), BigInt::from(-10));
    assert!(probes::krawtchouk(4, 2, 5).is_err());
}

#[test]
fn f2_zero_probability_examples() {
    assert_eq!(probes::f2_zero_probability(4, 2, 0).unwrap(), rat(1, 1));
    let p = probes::f2_zero_probability(4, 2, 2).unwrap();
    assert_eq!(p, rat(1, 3));
    let k = BigRational::from(probes::krawtchouk(4, 2, 2).unwrap());
    assert_eq!(p, rat(1, 2) + k / rat(12, 1));
    assert_eq!(probes::f2_zero_probability(4, 2, 4).unwrap(), rat(1, 1));
}

#[test]
fn rank_report_examples() {
    let w = sel(2, 1, &[&[0], &[0]]);
    let rep = probes::rank_report(&w, &[5]).unwrap();
    assert_eq!((rep.rank_f2, rep.rank_real, rep.rank_modq[0].1), (1, 1, 1));

    for s in 0..5 {
        let w = gen_selection_matrix(30, 10, 4, Seed(s)).unwrap();
        assert!(probes::rank_report(&w, &[]).unwrap().rank_f2 <= 9);
    }

    let perm = sel(5, 1, &[&[3], &[1], &[4], &[0], &[2]]);
    let rep = probes::rank_report(&perm, &[2, 7]).unwrap();
    assert_eq!(rep.rank_f2, 5);
    assert_eq!(rep.rank_real, 5);
    assert!(rep.rank_modq.iter().all(|&(_, r)| r == 5));
    assert!(probes::rank_modq(&perm, 9).unwrap_err().is_parameter_error());
}

#[test]
fn singularity_examples() {
    let even = probes::singularity_experiment(12, 6, 2, 50, Seed(0)).unwrap();
    assert_eq!(even.f2.frequency, 0.0);

    let one = probes::singularity_experiment(4, 4, 1, 10_000, Seed(1)).unwrap();
    let p = 24.0 / 256.0;
    let sigma = (p * (1.0 - p) / 10_000.0f64).sqrt();
    assert!((one.real.frequency - p).abs() <= 3.0 * sigma, "{}", one.real.frequency);
}

#[test]
fn krawtchouk_bound_examples() {
    for (r, k) in [(64, 4), (32, 5)] {
        let rep = probes::krawtchouk_bound_check(r, k).unwrap();
        assert_eq!(rep.first_violation, None);
        assert_eq!(rep.checked, r / 2 + 1);
    }
    // Equality at λ = 0.
    assert_eq!(probes::krawtchouk(40, 6, 0).unwrap(), BigInt::from(binom(40, 6)));
    assert!(probes::krawtchouk_bound_check(20, 5).unwrap_err().is_parameter_error());
}

#[test]
fn fibre_stats_examples() {
    let c = probes::fibre_stats(&[3; 7]);
    assert_eq!((c.largest, c.support), (7, 7));
    let z = probes::fibre_stats(&[0; 7]);
    assert_eq!((z.largest, z.support), (7, 0));
    let d = probes::fibre_stats(&[5, -1, 0, 2]);
    assert_eq!((d.largest, d.support), (1, 3));
    let x = probes::fibre_stats(&[1, 1, 2, 0, 0, 0]);
    assert_eq!((x.largest, x.support), (3, 3));
}

#[test]
fn anticoncentration_examples() {
    let c = probes::anticoncentration_estimate(&[4; 9], 3, Modulus::Real, 500, Seed(0), 3.0).unwrap();
    assert_eq!(c.max_atom, 1.0);

    let x: Vec<i64> = (1..=12).collect();
    let exact = probes::anticoncentration_exact(&x, 3, Modulus::Real, 3.0).unwrap();
    assert_eq!(exact.samples, 220);
    // 12 supports sum to the most common value.
    let counts = subsets(12, 3).iter().fold(std::collections::HashMap::new(), |mut h, s| {
        *h.entry(s.iter().map(|&j| x[j]).sum::<i64>()).or_insert(0usize) += 1;
        h
    });
    let top = *counts.values().max().unwrap();
    assert!((exact.max_atom - top as f64 / 220.0).abs() < 1e-15);
    let n = 50_000;
    let est = probes::anticoncentration_estimate(&x, 3, Modulus::Real, n, Seed(1), 3.0).unwrap();
    let sd = (exact.max_atom * (1.0 - exact.max_atom) / n as f64).sqrt();
    assert!((est.max_atom - exact.max_atom).abs() < 5.0 * sd);

    // Planted fibres: r − s zeros and s distinct nonzero values.
    let mut total = 0;
    let mut inside = 0;
    for r in [12usize, 20, 30] {
        for k in 1..=4 {
            for s in 1..=r {
                let x: Vec<i64> = (0..r).map(|i| if i < s { i as i64 + 1 } else { 0 }).collect();
                let rep = probes::anticoncentration_estimate(&x, k, Modulus::Real, 2000, Seed((r * 100 + k * 10 + s) as u64), 3.0)
                    .unwrap();
                total += 1;
                inside += usize::from(rep.within_envelope == Some(true));
            }
        }
    }
    assert!(inside * 100 >= 95 * total, "{inside}/{total}");

    let m5 = probes::anticoncentration_exact(&[1, 2, 3, 4, 5, 6], 2, Modulus::Mod(5), 3.0).unwrap();
    assert!(m5.max_atom >= 0.2);
    assert!(probes::anticoncentration_estimate(&x, 3, Modulus::Real, 0, Seed(0), 3.0).is_err());
}

#[test]
fn decomposition_eigenvalues_match_contraction_ratios() {
    let w = design(8, 2);
    let t = oracle_tensor(&w).unwrap();
    let d = jennrich_decompose(&t, 8, Seed(4)).unwrap();
    let (v1, v2) = &d.contractions;
    let mut ratios: Vec<f64> = (0..8)
        .map(|j| {
            let col = DVector::from_fn(w.m(), |i, _| f64::from(u8::from(w.get(i, j))));
            col.dot(v1) / col.dot(v2)
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let mut eig = d.eigenvalues.clone();
    eig.sort_by(f64::total_cmp);
    for (a, b) in eig.iter().zip(&ratios) {
        assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{a} vs {b}");
    }
}
