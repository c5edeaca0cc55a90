//! Small dense linear algebra: exact over [`Scalar`], numeric via nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::symexpr::{EvalError, Scalar};

pub type SymMatrix = Vec<Vec<Scalar>>;

pub fn identity(n: usize) -> SymMatrix {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { Scalar::one() } else { Scalar::zero() })
                .collect()
        })
        .collect()
}

pub fn mat_mul(a: &SymMatrix, b: &SymMatrix) -> SymMatrix {
    let m = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..m)
                .map(|j| row.iter().zip(b).map(|(x, brow)| x * &brow[j]).sum())
                .collect()
        })
        .collect()
}

pub fn transpose(a: &SymMatrix) -> SymMatrix {
    let m = a.first().map_or(0, |r| r.len());
    (0..m).map(|j| a.iter().map(|r| r[j].clone()).collect()).collect()
}

/// Gauss-Jordan inverse; `None` when the matrix is singular as a matrix of
/// rational functions.
pub fn inverse(a: &SymMatrix) -> Option<SymMatrix> {
    let n = a.len();
    let mut m: Vec<Vec<Scalar>> = a
        .iter()
        .zip(identity(n))
        .map(|(r, e)| r.iter().cloned().chain(e).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .filter(|&r| !m[r][col].is_zero())
            .min_by_key(|&r| (m[r][col].as_rat().is_none(), r))?;
        m.swap(col, piv);
        let inv = m[col][col].recip();
        m[col] = m[col].iter().map(|x| x * &inv).collect();
        for r in 0..n {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let f = m[r][col].clone();
            let pivot_row = m[col].clone();
            for (x, p) in m[r].iter_mut().zip(&pivot_row) {
                *x = &*x - &(&f * p);
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

pub fn det(a: &SymMatrix) -> Scalar {
    let n = a.len();
    let mut m = a.clone();
    let mut acc = Scalar::one();
    for col in 0..n {
        let Some(piv) = (col..n).find(|&r| !m[r][col].is_zero()) else {
            return Scalar::zero();
        };
        if piv != col {
            m.swap(col, piv);
            acc = -acc;
        }
        acc = &acc * &m[col][col];
        let inv = m[col][col].recip();
        for r in col + 1..n {
            if m[r][col].is_zero() {
                continue;
            }
            let f = &m[r][col] * &inv;
            let pivot_row = m[col].clone();
            for (x, p) in m[r].iter_mut().zip(&pivot_row) {
                *x = &*x - &(&f * p);
            }
        }
    }
    acc
}

pub fn eval_matrix(a: &SymMatrix, p: &[f64]) -> Result<DMatrix<f64>, EvalError> {
    let n = a.len();
    let m = a.first().map_or(0, |r| r.len());
    let mut out = DMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            out[(i, j)] = a[i][j].eval(p)?;
        }
    }
    Ok(out)
}

/// Singular values of a square matrix in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `tol · max(σ_max, 1)`.
pub fn numeric_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let s = singular_values(m);
    let cut = tol * s.first().copied().unwrap_or(0.0).max(1.0);
    s.iter().filter(|&&x| x > cut).count()
}

/// Orthonormal basis of the null space of `m`, from right singular vectors
/// whose singular value is at most `tol · max(σ_max, 1)`.
pub fn kernel_basis(m: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    assert_eq!(m.nrows(), m.ncols(), "kernel_basis expects a square matrix");
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested");
    let sv = &svd.singular_values;
    let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    let cut = tol * smax.max(1.0);
    (0..sv.len())
        .filter(|&i| sv[i] <= cut)
        .map(|i| vt.row(i).transpose())
        .collect()
}

/// Least-squares solution of `a x = b`.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().svd(true, true).solve(b, 1e-13).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse;

    #[test]
    fn symbolic_inverse_round_trip() {
        let names = vec!["x".to_string(), "y".to_string()];
        let e = |s: &str| parse(s, &names).unwrap().to_scalar();
        let a = vec![vec![e("1 + x^2"), e("y")], vec![e("y"), e("1")]];
        let inv = inverse(&a).unwrap();
        assert_eq!(mat_mul(&a, &inv), identity(2));
        assert_eq!(det(&a), e("1 + x^2 - y^2"));
        let singular = vec![vec![e("x"), e("x*y")], vec![e("1"), e("y")]];
        assert!(inverse(&singular).is_none());
        assert!(det(&singular).is_zero());
    }

    #[test]
    fn numeric_kernel() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(numeric_rank(&m, 1e-9), 2);
        let k = kernel_basis(&m, 1e-9);
        assert_eq!(k.len(), 1);
        assert!((k[0][2].abs() - 1.0).abs() < 1e-12);
    }
}
