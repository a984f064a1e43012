//! Dense linear algebra helpers not covered directly by nalgebra.

mod eigen;
mod expm;

pub use eigen::{eig, eigenvalues, RawEigen};
pub use expm::expm;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Singular values sorted descending together with the matching right singular vectors
/// (as columns) and left singular vectors (as columns).
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

// nalgebra's default deflation threshold (5 eps) can settle on visibly wrong singular
// values for rank-deficient Gram matrices, so try tighter ones and keep the best fit.
const SVD_EPS: [f64; 3] = [f64::EPSILON, 0.25 * f64::EPSILON, 4.0 * f64::EPSILON];
const SVD_MAX_ITER: usize = 100_000;

fn svd_checked(a: &DMatrix<f64>) -> nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn> {
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let mut best: Option<(f64, nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>)> = None;
    for eps in SVD_EPS {
        let Some(svd) = nalgebra::SVD::try_new(a.clone(), true, true, eps, SVD_MAX_ITER) else {
            continue;
        };
        let res = match svd.clone().recompose() {
            Ok(r) => (r - a).norm() / scale,
            Err(_) => f64::INFINITY,
        };
        if res <= 1e-13 {
            return svd;
        }
        if best.as_ref().is_none_or(|(r, _)| res < *r) {
            best = Some((res, svd));
        }
    }
    match best {
        Some((res, svd)) => {
            log::warn!("svd residual {res:.2e} above 1e-13");
            svd
        }
        None => a.clone().svd(true, true),
    }
}

pub fn svd_sorted(a: &DMatrix<f64>) -> SortedSvd {
    let svd = svd_checked(a);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v = DMatrix::from_fn(vt.ncols(), order.len(), |r, c| vt[(order[c], r)]);
    SortedSvd { u, sigma, v }
}

/// Numerical rank with a relative cutoff on the singular values.
pub fn numerical_rank(sigma: &[f64], rel_tol: f64) -> usize {
    let top = sigma.first().copied().unwrap_or(0.0);
    sigma.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Moore-Penrose pseudo-inverse; singular values below `rel_tol * sigma_max` are dropped.
/// Returns the inverse and the numerical rank.
pub fn pinv(a: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize) {
    let s = svd_sorted(a);
    let rank = numerical_rank(&s.sigma, rel_tol);
    let mut out = DMatrix::zeros(a.ncols(), a.nrows());
    for k in 0..rank {
        let inv = 1.0 / s.sigma[k];
        let vk = s.v.column(k);
        let uk = s.u.column(k);
        out += vk * uk.transpose() * inv;
    }
    (out, rank)
}

/// Orthonormal basis (columns) for the `dim`-dimensional approximate null space of a
/// complex matrix, taken from the smallest singular values. Also returns the largest
/// singular value among those kept.
pub fn null_space_complex(a: &DMatrix<Complex64>, dim: usize) -> (DMatrix<Complex64>, f64) {
    let n = a.ncols();
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let kept = &order[..dim];
    let worst = kept.iter().map(|&i| svd.singular_values[i]).fold(0.0, f64::max);
    let basis = DMatrix::from_fn(n, dim, |r, c| vt[(kept[c], r)].conj());
    (basis, worst)
}

/// Inverse of a complex square matrix by LU with partial pivoting.
pub fn inverse_complex(a: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    a.clone().lu().try_inverse()
}

pub fn frobenius_c(a: &DMatrix<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn to_complex(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|x| Complex64::new(x, 0.0))
}

pub fn to_complex_vec(v: &DVector<f64>) -> DVector<Complex64> {
    v.map(|x| Complex64::new(x, 0.0))
}

/// Solve a symmetric positive (semi)definite system by Cholesky, falling back to LU.
pub fn solve_spd(g: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = g.clone().cholesky() {
        return Ok(ch.solve(rhs));
    }
    g.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::InvalidArgument("singular normal equations".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_rank_one() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (p, rank) = pinv(&a, 1e-12);
        assert_eq!(rank, 1);
        let expect = DMatrix::from_element(2, 2, 0.25);
        assert!((p - expect).norm() < 1e-14);
    }

    #[test]
    fn pinv_satisfies_penrose_identities() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.5]);
        let (p, rank) = pinv(&a, 1e-12);
        assert_eq!(rank, 2);
        assert!((&a * &p * &a - &a).norm() < 1e-12);
        assert!((&p * &a * &p - &p).norm() < 1e-12);
    }

    #[test]
    fn null_space_of_projector() {
        let a = to_complex(&DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0, 0.0])));
        let (ns, worst) = null_space_complex(&a, 2);
        assert!(worst < 1e-15);
        assert!(frobenius_c(&(&a * &ns)) < 1e-14);
        let gram = ns.adjoint() * &ns;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-14);
    }
}
