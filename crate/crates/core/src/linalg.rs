//! Small dense linear-algebra helpers on top of nalgebra: a one-sided
//! Jacobi SVD, rank-revealing range bases, pseudo-inverses with a relative
//! singular-value cutoff, and real eigenpairs of small nonsymmetric matrices.
//!
//! nalgebra's own `SVD` can return factors that do not reproduce the input
//! on rank-deficient matrices with many exact zeros (exactly the contractions
//! of a Boolean tensor), so singular values come from [`svd`] instead.

use nalgebra::{DMatrix, DVector, Schur};

/// Thin decomposition `a = U diag(sigma) Vᵀ`, `sigma` sorted descending.
///
/// Columns of `u` belonging to a zero singular value are zero.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

const MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD: rotate pairs of columns until all are
/// mutually orthogonal to working precision.
pub fn svd(a: &DMatrix<f64>) -> Svd {
    if a.nrows() < a.ncols() {
        let t = svd(&a.transpose());
        return Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        };
    }
    let (n, p) = a.shape();
    let mut g = a.clone();
    let mut v = DMatrix::<f64>::identity(p, p);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..p {
            for j in i + 1..p {
                let alpha = g.column(i).norm_squared();
                let beta = g.column(j).norm_squared();
                let gamma = g.column(i).dot(&g.column(j));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut g, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..p).map(|j| g.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let mut u = DMatrix::zeros(n, p);
    let mut vs = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        if norms[src] > 0.0 {
            u.set_column(dst, &(g.column(src) / norms[src]));
        }
        vs.set_column(dst, &v.column(src));
    }
    Svd {
        u,
        sigma: order.iter().map(|&j| norms[j]).collect(),
        v: vs,
    }
}

fn rotate(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for row in 0..m.nrows() {
        let (x, y) = (m[(row, i)], m[(row, j)]);
        m[(row, i)] = c * x - s * y;
        m[(row, j)] = s * x + c * y;
    }
}

/// Number of singular values above `rel_cutoff * sigma_max`.
pub fn numerical_rank(a: &DMatrix<f64>, rel_cutoff: f64) -> usize {
    count_above(&svd(a).sigma, rel_cutoff)
}

fn count_above(sigma: &[f64], rel_cutoff: f64) -> usize {
    let max = sigma.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > rel_cutoff * max).count()
}

/// Orthonormal basis of the leading `want` left singular directions of `a`,
/// together with the numerical rank of `a`.
pub fn leading_range(a: &DMatrix<f64>, rel_cutoff: f64, want: usize) -> (DMatrix<f64>, usize) {
    let d = svd(a);
    let rank = count_above(&d.sigma, rel_cutoff);
    let cols = want.min(d.u.ncols());
    (d.u.columns(0, cols).into_owned(), rank)
}

/// Moore–Penrose pseudo-inverse, dropping singular values at or below
/// `rel_cutoff * sigma_max`. Also returns the retained rank.
pub fn pinv(a: &DMatrix<f64>, rel_cutoff: f64) -> (DMatrix<f64>, usize) {
    let d = svd(a);
    let max = d.sigma.first().copied().unwrap_or(0.0);
    let mut out = DMatrix::zeros(a.ncols(), a.nrows());
    let mut rank = 0;
    for (i, &s) in d.sigma.iter().enumerate() {
        if max > 0.0 && s > rel_cutoff * max {
            rank += 1;
            out += d.v.column(i) * d.u.column(i).transpose() / s;
        }
    }
    (out, rank)
}

/// Real eigenvalues and unit eigenvectors of a square matrix, or `None` when
/// the spectrum has a non-negligible imaginary part or the Schur iteration
/// does not converge. Eigenpairs come sorted by eigenvalue.
pub fn real_eigenpairs(a: &DMatrix<f64>) -> Option<(Vec<f64>, Vec<DVector<f64>>)> {
    let n = a.nrows();
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000)?;
    let scale = a.iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let complex = schur.complex_eigenvalues();
    if complex.iter().any(|z| z.im.abs() > 1e-9 * scale) {
        return None;
    }
    let mut values: Vec<f64> = complex.iter().map(|z| z.re).collect();
    values.sort_by(|x, y| x.total_cmp(y));
    let vectors = values
        .iter()
        .map(|&lambda| {
            let shifted = a - DMatrix::identity(n, n) * lambda;
            // The right singular vector of the smallest singular value spans
            // the (numerical) null space.
            svd(&shifted).v.column(n - 1).into_owned()
        })
        .collect();
    Some((values, vectors))
}

/// Least-squares solution of `a x = b` for every column of `b`.
pub fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_cutoff: f64) -> (DMatrix<f64>, usize) {
    let (p, rank) = pinv(a, rel_cutoff);
    (p * b, rank)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_invertible_is_inverse() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let (p, rank) = pinv(&a, 1e-12);
        assert_eq!(rank, 2);
        assert!((a * p - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn pinv_drops_null_directions() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (p, rank) = pinv(&a, 1e-8);
        assert_eq!(rank, 1);
        assert!((&a * &p * &a - &a).norm() < 1e-12);
    }

    #[test]
    fn eigenpairs_of_a_similarity_transform() {
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0]);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 0.5, 3.0]));
        let a = &b * d * b.clone().try_inverse().unwrap();
        let (vals, vecs) = real_eigenpairs(&a).unwrap();
        for (want, got) in [-1.0, 0.5, 3.0].iter().zip(&vals) {
            assert!((want - got).abs() < 1e-10);
        }
        for (lambda, v) in vals.iter().zip(&vecs) {
            assert!((&a * v - v * *lambda).norm() < 1e-9);
        }
    }

    #[test]
    fn jacobi_svd_reproduces_rank_deficient_input() {
        // A contraction of two complementary 0/1 components with many exact
        // zeros: the shape that trips nalgebra's SVD.
        let w0: Vec<f64> = (0..26).map(|i| f64::from(u8::from(i % 3 == 1))).collect();
        let w1: Vec<f64> = w0.iter().map(|x| 1.0 - x).collect();
        let (w0, w1) = (DVector::from_vec(w0), DVector::from_vec(w1));
        let a = &w0 * w0.transpose() * 0.31 - &w1 * w1.transpose() * 0.27;
        let d = svd(&a);
        let recomposed = &d.u * DMatrix::from_diagonal(&DVector::from_vec(d.sigma.clone())) * d.v.transpose();
        assert!((recomposed - &a).amax() < 1e-12);
        assert_eq!(numerical_rank(&a, 1e-8), 2);
        assert!(d.sigma.windows(2).all(|w| w[0] >= w[1]));
        let (u, _) = leading_range(&a, 1e-8, 2);
        assert!((&u * u.transpose() * &w0 - &w0).amax() < 1e-12);
    }

    #[test]
    fn wide_matrices_go_through_the_transpose() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0]);
        let d = svd(&a);
        assert_eq!(d.sigma.len(), 2);
        let (p, rank) = pinv(&a, 1e-12);
        assert_eq!(rank, 2);
        assert!((&a * p - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn rotation_has_no_real_eigenpairs() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!(real_eigenpairs(&a).is_none());
    }
}
