//! Dense symmetric eigendecompositions, matrix functions and a symmetric
//! tridiagonal eigensolver.
//!
//! Dense work goes through nalgebra. The tridiagonal path (implicit QL for
//! eigenvalues, inverse iteration for selected eigenvectors) exists because
//! radial and 1D box operators are tridiagonal and appear at grid sizes
//! where a full dense solve is wasteful.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
pub fn sym_eigen_sorted(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let se = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let vals = DVector::from_iterator(n, order.iter().map(|&i| se.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Sorted eigenvalues of a symmetric matrix.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    v
}

/// Apply a scalar function to a symmetric matrix through its eigensystem.
pub fn sym_func(a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen_sorted(a);
    let fl = DMatrix::from_diagonal(&vals.map(f));
    let mut out = &vecs * fl * vecs.transpose();
    symmetrize(&mut out);
    out
}

/// Principal square root of a symmetric positive definite matrix.
pub fn sqrt_spd(a: &DMatrix<f64>, label: &'static str) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sym_eigen_sorted(a);
    let min = vals[0];
    if min <= 0.0 {
        return Err(match label {
            "D" => Error::SingularD { min_eig: min },
            "E" => Error::SingularE { min_eig: min },
            _ => Error::IndefiniteInner { min_eig: min },
        });
    }
    let fl = DMatrix::from_diagonal(&vals.map(|x| x.sqrt()));
    let mut out = &vecs * fl * vecs.transpose();
    symmetrize(&mut out);
    Ok(out)
}

pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
}

pub fn frobenius(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest singular value of a symmetric matrix (= max |eigenvalue|).
pub fn op_norm_sym(a: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(a).iter().fold(0.0f64, |m, &v| m.max(v.abs()))
}

/// Symmetry defect `max |A_ij - A_ji|`.
pub fn symmetry_defect(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut m = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            m = m.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    m
}

/// Orthonormal basis of the orthogonal complement of `q` in R^n,
/// returned as the trailing `n - 1` columns of the Householder reflection
/// that maps `q` onto a coordinate axis.
pub fn householder_complement(q: &DVector<f64>) -> DMatrix<f64> {
    let n = q.len();
    let qn = q / q.norm();
    let sign = if qn[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut v = qn.clone();
    v[0] += sign;
    let beta = 2.0 / v.dot(&v);
    let mut out = DMatrix::zeros(n, n - 1);
    for j in 1..n {
        let coeff = beta * v[j];
        for i in 0..n {
            let e = if i == j { 1.0 } else { 0.0 };
            out[(i, j - 1)] = e - coeff * v[i];
        }
    }
    out
}

/// Eigenvalues of a symmetric tridiagonal matrix by the implicit QL method
/// with Wilkinson shifts. `diag` has length n, `sub` length n-1.
pub fn tridiag_eigenvalues(diag: &[f64], sub: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert_eq!(sub.len(), n.saturating_sub(1));
    let mut d = diag.to_vec();
    let mut e = sub.to_vec();
    e.push(0.0);
    let eps = f64::EPSILON;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 50, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d
}

/// One eigenvector of a symmetric tridiagonal matrix by inverse iteration
/// at a converged eigenvalue. Returns a unit vector.
pub fn tridiag_eigenvector(diag: &[f64], sub: &[f64], lambda: f64) -> Vec<f64> {
    let n = diag.len();
    // deterministic start, unlikely to be orthogonal to the target mode
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let t = (i as f64 * 0.7368426 + 0.1).sin();
            1.0 + 0.3 * t
        })
        .collect();
    normalize(&mut x);
    // tiny shift off the exact eigenvalue keeps the solve well-posed
    let scale = diag.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1.0);
    let shifted = lambda + 1e-12 * scale;
    for _ in 0..3 {
        x = solve_tridiag_shifted(diag, sub, shifted, &x);
        normalize(&mut x);
    }
    x
}

fn normalize(x: &mut [f64]) {
    let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nrm > 0.0 {
        for v in x.iter_mut() {
            *v /= nrm;
        }
    }
}

/// Solve (T - lambda I) x = b for tridiagonal T with partial pivoting
/// (gtsl-style band elimination; pivoting fills one extra superdiagonal).
fn solve_tridiag_shifted(diag: &[f64], sub: &[f64], lambda: f64, b: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n]; // c[k]: entry (k+1, k)
    let mut d = vec![0.0; n]; // d[k]: entry (k, k)
    let mut e = vec![0.0; n]; // e[k]: entry (k, k+1)
    let mut f = vec![0.0; n]; // f[k]: entry (k, k+2), fill-in
    for i in 0..n {
        d[i] = diag[i] - lambda;
        if i + 1 < n {
            c[i] = sub[i];
            e[i] = sub[i];
        }
    }
    let mut rhs = b.to_vec();
    for k in 0..n - 1 {
        if c[k].abs() > d[k].abs() {
            // swap rows k and k+1, column by column
            std::mem::swap(&mut d[k], &mut c[k]);
            std::mem::swap(&mut e[k], &mut d[k + 1]);
            std::mem::swap(&mut f[k], &mut e[k + 1]);
            rhs.swap(k, k + 1);
        }
        if d[k] == 0.0 {
            d[k] = 1e-300;
        }
        let m = c[k] / d[k];
        d[k + 1] -= m * e[k];
        e[k + 1] -= m * f[k];
        rhs[k + 1] -= m * rhs[k];
    }
    if d[n - 1] == 0.0 {
        d[n - 1] = 1e-300;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = rhs[n - 1] / d[n - 1];
    if n >= 2 {
        x[n - 2] = (rhs[n - 2] - e[n - 2] * x[n - 1]) / d[n - 2];
    }
    for k in (0..n.saturating_sub(2)).rev() {
        x[k] = (rhs[k] - e[k] * x[k + 1] - f[k] * x[k + 2]) / d[k];
    }
    x
}
