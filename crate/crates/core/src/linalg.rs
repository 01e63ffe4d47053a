//! Small dense linear-algebra helpers: symmetric eigendecomposition (cyclic
//! Jacobi), PSD matrix square roots, and a pivoted Gaussian solve.
//!
//! These favor robustness on small matrices over asymptotic speed; every
//! covariance and KKT system in this crate is tiny compared to the transport
//! problems themselves.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns, so that
/// `a = v * diag(w) * v^T`. The input is used as-is; symmetrize first if it is
/// only symmetric up to rounding.
pub fn sym_eigen<S: Scalar>(a: &ArrayView2<S>) -> (Array1<S>, Array2<S>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "sym_eigen requires a square matrix");
    let mut m = a.to_owned();
    let mut v = Array2::<S>::eye(n);
    if n <= 1 {
        return (m.diag().to_owned(), v);
    }

    let eps = S::epsilon();
    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut off = S::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + m[[p, q]] * m[[p, q]];
            }
        }
        let scale: S = m.diag().iter().map(|x| *x * *x).sum::<S>() + off + off;
        if off + off <= eps * eps * scale {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq == S::zero() {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                // Rotation angle that annihilates m[p,q].
                let theta = (aqq - app) / (S::from_f64_c(2.0) * apq);
                let t = {
                    let sign = if theta >= S::zero() { S::one() } else { -S::one() };
                    sign / (theta.abs() + (S::one() + theta * theta).sqrt())
                };
                let c = S::one() / (S::one() + t * t).sqrt();
                let s = t * c;

                for i in 0..n {
                    let mip = m[[i, p]];
                    let miq = m[[i, q]];
                    m[[i, p]] = c * mip - s * miq;
                    m[[i, q]] = s * mip + c * miq;
                }
                for j in 0..n {
                    let mpj = m[[p, j]];
                    let mqj = m[[q, j]];
                    m[[p, j]] = c * mpj - s * mqj;
                    m[[q, j]] = s * mpj + c * mqj;
                }
                for i in 0..n {
                    let vip = v[[i, p]];
                    let viq = v[[i, q]];
                    v[[i, p]] = c * vip - s * viq;
                    v[[i, q]] = s * vip + c * viq;
                }
            }
        }
    }
    (m.diag().to_owned(), v)
}

/// `(a + a^T) / 2`.
pub fn symmetrize<S: Scalar>(a: &ArrayView2<S>) -> Array2<S> {
    let half = S::from_f64_c(0.5);
    let mut out = a.to_owned();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out[[i, j]] = (a[[i, j]] + a[[j, i]]) * half;
        }
    }
    out
}

/// Principal square root of a PSD matrix via eigendecomposition, clamping
/// small negative eigenvalues at zero.
///
/// Fails with `NotPsd` if an eigenvalue falls below `-psd_tol`.
pub fn sqrt_psd<S: Scalar>(a: &ArrayView2<S>, psd_tol: S) -> Result<Array2<S>> {
    let sym = symmetrize(a);
    let (w, v) = sym_eigen(&sym.view());
    let min = w.iter().cloned().fold(S::infinity(), S::min);
    if min < -psd_tol {
        return Err(Error::NotPsd(min.to_f64_c()));
    }
    let n = a.nrows();
    let mut out = Array2::<S>::zeros((n, n));
    for k in 0..n {
        let lam = w[k].max(S::zero()).sqrt();
        if lam == S::zero() {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] = out[[i, j]] + lam * v[[i, k]] * v[[j, k]];
            }
        }
    }
    Ok(out)
}

/// Sum of square roots of the (clamped) eigenvalues of a PSD matrix, i.e.
/// `trace(a^{1/2})` without forming the root.
pub fn trace_sqrt_psd<S: Scalar>(a: &ArrayView2<S>, psd_tol: S) -> Result<S> {
    let sym = symmetrize(a);
    let (w, _) = sym_eigen(&sym.view());
    let min = w.iter().cloned().fold(S::infinity(), S::min);
    if min < -psd_tol {
        return Err(Error::NotPsd(min.to_f64_c()));
    }
    Ok(w.iter().map(|x| x.max(S::zero()).sqrt()).sum())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue<S: Scalar>(a: &ArrayView2<S>) -> S {
    let (w, _) = sym_eigen(&symmetrize(a).view());
    w.iter().cloned().fold(S::infinity(), S::min)
}

/// Solve `a x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when the system is numerically singular.
pub fn solve_linear<S: Scalar>(a: &ArrayView2<S>, b: &ArrayView1<S>) -> Option<Array1<S>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    assert_eq!(n, b.len());
    let mut m = a.to_owned();
    let mut rhs = b.to_owned();

    for col in 0..n {
        let mut piv = col;
        let mut best = m[[col, col]].abs();
        for r in col + 1..n {
            let v = m[[r, col]].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if !(best > S::epsilon() * S::from_f64_c(n as f64)) {
            return None;
        }
        if piv != col {
            for c in 0..n {
                let tmp = m[[col, c]];
                m[[col, c]] = m[[piv, c]];
                m[[piv, c]] = tmp;
            }
            let tmp = rhs[col];
            rhs[col] = rhs[piv];
            rhs[piv] = tmp;
        }
        for r in col + 1..n {
            let f = m[[r, col]] / m[[col, col]];
            if f == S::zero() {
                continue;
            }
            for c in col..n {
                m[[r, c]] = m[[r, c]] - f * m[[col, c]];
            }
            rhs[r] = rhs[r] - f * rhs[col];
        }
    }
    let mut x = Array1::<S>::zeros(n);
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for c in r + 1..n {
            acc = acc - m[[r, c]] * x[c];
        }
        x[r] = acc / m[[r, r]];
    }
    Some(x)
}

/// Squared Euclidean distance between two rows.
pub fn sq_dist<S: Scalar>(a: &ArrayView1<S>, b: &ArrayView1<S>) -> S {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = S::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        let d = *x - *y;
        acc = acc + d * d;
    }
    acc
}

/// All-pairs squared Euclidean distances between rows of `x` (n) and `y` (k).
pub fn pairwise_sq_dists<S: Scalar>(x: &ArrayView2<S>, y: &ArrayView2<S>) -> Array2<S> {
    assert_eq!(x.ncols(), y.ncols(), "point dimensions differ");
    let mut out = Array2::<S>::zeros((x.nrows(), y.nrows()));
    for i in 0..x.nrows() {
        let xi = x.row(i);
        for j in 0..y.nrows() {
            out[[i, j]] = sq_dist(&xi, &y.row(j));
        }
    }
    out
}
