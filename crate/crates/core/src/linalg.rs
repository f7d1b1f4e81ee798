//! Dense symmetric linear algebra on flat row-major matrices: Cholesky
//! factorization and the Householder tridiagonalization / implicit-QL
//! eigensolver. Sizes here are grid sizes (hundreds to a few thousand),
//! which these classic O(n^3) routines handle comfortably.

use crate::scalar::{lit, Real};
use crate::{Error, Result};

#[inline]
fn idx(i: usize, j: usize, n: usize) -> usize {
    i * n + j
}

/// Lower-triangular Cholesky factor `L` of a symmetric matrix `a` (row-major,
/// `n * n`), so that `L L^T = a`. Fails if a pivot is not strictly positive.
pub fn cholesky<T: Real>(a: &[T], n: usize) -> Result<Vec<T>> {
    assert_eq!(a.len(), n * n, "matrix shape mismatch");
    let mut l = vec![T::zero(); n * n];
    for j in 0..n {
        let mut diag = a[idx(j, j, n)];
        for k in 0..j {
            diag -= l[idx(j, k, n)] * l[idx(j, k, n)];
        }
        if diag <= T::zero() || !diag.is_finite() {
            return Err(Error::Numeric(format!(
                "Cholesky pivot {diag} at index {j} is not positive"
            )));
        }
        let d = diag.sqrt();
        l[idx(j, j, n)] = d;
        for i in (j + 1)..n {
            let mut s = a[idx(i, j, n)];
            for k in 0..j {
                s -= l[idx(i, k, n)] * l[idx(j, k, n)];
            }
            l[idx(i, j, n)] = s / d;
        }
    }
    Ok(l)
}

/// Multiplies a lower-triangular factor by a vector: `y = L x`.
pub fn lower_tri_mul<T: Real>(l: &[T], n: usize, x: &[T]) -> Vec<T> {
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = T::zero();
        for k in 0..=i {
            s += l[idx(i, k, n)] * x[k];
        }
        y[i] = s;
    }
    y
}

/// Eigendecomposition of a symmetric matrix.
///
/// `values[k]` is the k-th eigenvalue in descending order and the matching
/// eigenvector is the k-th column of `vectors` (row-major, `n * n`).
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<T>,
    pub dim: usize,
}

impl<T: Real> SymmetricEigen<T> {
    /// Component `i` of eigenvector `k`.
    #[inline]
    pub fn vector_component(&self, k: usize, i: usize) -> T {
        self.vectors[idx(i, k, self.dim)]
    }
}

/// Full eigendecomposition of a symmetric matrix via Householder reduction to
/// tridiagonal form followed by the implicit-shift QL iteration.
pub fn symmetric_eigen<T: Real>(a: &[T], n: usize) -> Result<SymmetricEigen<T>> {
    assert_eq!(a.len(), n * n, "matrix shape mismatch");
    if n == 0 {
        return Err(Error::Domain("empty matrix".into()));
    }
    let mut z = a.to_vec();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(&mut z, n, &mut d, &mut e);
    tqli(&mut d, &mut e, n, &mut z)?;

    // Sort descending, permuting eigenvector columns alongside.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).expect("non-finite eigenvalue"));
    let values: Vec<T> = order.iter().map(|&k| d[k]).collect();
    let mut vectors = vec![T::zero(); n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        for i in 0..n {
            vectors[idx(i, new_col, n)] = z[idx(i, old_col, n)];
        }
    }
    Ok(SymmetricEigen {
        values,
        vectors,
        dim: n,
    })
}

/// Smallest eigenvalue of a symmetric matrix; used for PSD validation.
pub fn min_eigenvalue<T: Real>(a: &[T], n: usize) -> Result<T> {
    let eig = symmetric_eigen(a, n)?;
    Ok(*eig.values.last().expect("n >= 1"))
}

/// Householder reduction of a symmetric matrix to tridiagonal form with
/// accumulation of the orthogonal transform in `z`.
fn tred2<T: Real>(z: &mut [T], n: usize, d: &mut [T], e: &mut [T]) {
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = T::zero();
        if l > 0 {
            let mut scale = T::zero();
            for k in 0..=l {
                scale += z[idx(i, k, n)].abs();
            }
            if scale == T::zero() {
                e[i] = z[idx(i, l, n)];
            } else {
                for k in 0..=l {
                    z[idx(i, k, n)] = z[idx(i, k, n)] / scale;
                    h += z[idx(i, k, n)] * z[idx(i, k, n)];
                }
                let f = z[idx(i, l, n)];
                let g = if f >= T::zero() { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z[idx(i, l, n)] = f - g;
                let mut f_acc = T::zero();
                for j in 0..=l {
                    z[idx(j, i, n)] = z[idx(i, j, n)] / h;
                    let mut g_acc = T::zero();
                    for k in 0..=j {
                        g_acc += z[idx(j, k, n)] * z[idx(i, k, n)];
                    }
                    for k in (j + 1)..=l {
                        g_acc += z[idx(k, j, n)] * z[idx(i, k, n)];
                    }
                    e[j] = g_acc / h;
                    f_acc += e[j] * z[idx(i, j, n)];
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f = z[idx(i, j, n)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        z[idx(j, k, n)] =
                            z[idx(j, k, n)] - f * e[k] - g * z[idx(i, k, n)];
                    }
                }
            }
        } else {
            e[i] = z[idx(i, l, n)];
        }
        d[i] = h;
    }
    d[0] = T::zero();
    e[0] = T::zero();
    for i in 0..n {
        if d[i] != T::zero() {
            for j in 0..i {
                let mut g = T::zero();
                for k in 0..i {
                    g += z[idx(i, k, n)] * z[idx(k, j, n)];
                }
                for k in 0..i {
                    z[idx(k, j, n)] = z[idx(k, j, n)] - g * z[idx(k, i, n)];
                }
            }
        }
        d[i] = z[idx(i, i, n)];
        z[idx(i, i, n)] = T::one();
        for j in 0..i {
            z[idx(j, i, n)] = T::zero();
            z[idx(i, j, n)] = T::zero();
        }
    }
}

/// Implicit-shift QL iteration on a tridiagonal matrix, updating the
/// eigenvector accumulation in `z`.
fn tqli<T: Real>(d: &mut [T], e: &mut [T], n: usize, z: &mut [T]) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Numeric(
                    "eigensolver failed to converge after 60 QL sweeps".into(),
                ));
            }
            let two = lit::<T>(2.0);
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + r.abs().copysign(g));
            let mut s = T::one();
            let mut c = T::one();
            let mut p = T::zero();
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[idx(k, i + 1, n)];
                    z[idx(k, i + 1, n)] = s * z[idx(k, i, n)] + c * f;
                    z[idx(k, i, n)] = c * z[idx(k, i, n)] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}
