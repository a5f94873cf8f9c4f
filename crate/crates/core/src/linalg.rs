//! Small dense linear-algebra kernels: Jacobi SVD, pseudoinverse,
//! Householder QR and Cholesky. Matrices here are at most a few hundred
//! rows by a few dozen columns, so simple, accurate routines are enough.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::scalar::Scalar;

/// Positive part `(|x| + x) / 2`, elementwise.
pub fn positive_part<T: Scalar>(m: &Array2<T>) -> Array2<T> {
    m.mapv(|x| if x > T::zero() { x } else { T::zero() })
}

/// Negative part `(|x| - x) / 2`, elementwise.
pub fn negative_part<T: Scalar>(m: &Array2<T>) -> Array2<T> {
    m.mapv(|x| if x < T::zero() { -x } else { T::zero() })
}

pub fn frobenius_sq<T: Scalar>(m: ArrayView2<T>) -> T {
    m.iter().map(|&x| x * x).sum()
}

/// Arithmetic mean and population (divide-by-n) standard deviation.
pub fn mean_and_std<T: Scalar>(v: ArrayView1<T>) -> (T, T) {
    let n = T::from_usize_lossy(v.len());
    let mean = v.iter().copied().sum::<T>() / n;
    let var = v.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    (mean, var.sqrt())
}

pub fn all_finite<T: Scalar>(m: ArrayView2<T>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: Array2<T>,
    pub s: Array1<T>,
    pub v: Array2<T>,
}

/// One-sided (Hestenes) Jacobi SVD. Singular values are returned in
/// descending order. Accurate to working precision for small matrices.
pub fn svd<T: Scalar>(a: ArrayView2<T>) -> Svd<T> {
    let (m, n) = a.dim();
    if m < n {
        let t = svd(a.t());
        return Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        };
    }
    let mut u = a.to_owned();
    let mut v = Array2::<T>::eye(n);
    let eps = T::epsilon();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for i in 0..m {
                    let up = u[[i, p]];
                    let uq = u[[i, q]];
                    alpha += up * up;
                    beta += uq * uq;
                    gamma += up * uq;
                }
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let sn = c * t;
                for i in 0..m {
                    let up = u[[i, p]];
                    let uq = u[[i, q]];
                    u[[i, p]] = c * up - sn * uq;
                    u[[i, q]] = sn * up + c * uq;
                }
                for i in 0..n {
                    let vp = v[[i, p]];
                    let vq = v[[i, q]];
                    v[[i, p]] = c * vp - sn * vq;
                    v[[i, q]] = sn * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<T> = (0..n)
        .map(|j| u.column(j).iter().map(|&x| x * x).sum::<T>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap_or(std::cmp::Ordering::Equal));

    let mut u_sorted = Array2::<T>::zeros((m, n));
    let mut v_sorted = Array2::<T>::zeros((n, n));
    let mut s_sorted = Array1::<T>::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        let sv = sigma[src];
        s_sorted[dst] = sv;
        v_sorted.column_mut(dst).assign(&v.column(src));
        if sv > T::zero() {
            let col = u.column(src).mapv(|x| x / sv);
            u_sorted.column_mut(dst).assign(&col);
        }
    }
    sigma.clear();
    Svd {
        u: u_sorted,
        s: s_sorted,
        v: v_sorted,
    }
}

/// Moore-Penrose pseudoinverse; singular values below `rcond * s_max` are
/// treated as zero.
pub fn pinv<T: Scalar>(a: ArrayView2<T>, rcond: T) -> Array2<T> {
    let Svd { u, s, v } = svd(a);
    let cutoff = s.iter().copied().fold(T::zero(), T::max) * rcond;
    let inv: Array1<T> = s.mapv(|x| if x > cutoff && x > T::zero() { T::one() / x } else { T::zero() });
    // V diag(inv) Uᵀ
    let scaled_v = &v * &inv.view().insert_axis(Axis(0));
    scaled_v.dot(&u.t())
}

/// Solve `A x = b` for symmetric positive definite `A`. Returns `None` when
/// the factorization breaks down.
pub fn cholesky_solve<T: Scalar>(a: ArrayView2<T>, b: ArrayView1<T>) -> Option<Array1<T>> {
    let n = a.nrows();
    let mut l = Array2::<T>::zeros((n, n));
    let scale = (0..n).map(|i| a[[i, i]].abs()).fold(T::zero(), T::max);
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > T::epsilon() * scale * T::lit(16.0)) {
            return None;
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut v = a[[i, j]];
            for k in 0..j {
                v -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = v / d;
        }
    }
    let mut y = Array1::<T>::zeros(n);
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l[[i, k]] * y[k];
        }
        y[i] = v / l[[i, i]];
    }
    let mut x = Array1::<T>::zeros(n);
    for i in (0..n).rev() {
        let mut v = y[i];
        for k in (i + 1)..n {
            v -= l[[k, i]] * x[k];
        }
        x[i] = v / l[[i, i]];
    }
    Some(x)
}

/// Householder QR of an `n × k` matrix with `n ≥ k`.
#[derive(Debug, Clone)]
pub struct Qr<T> {
    /// Householder vectors below the diagonal, `R` on and above it.
    packed: Array2<T>,
    tau: Array1<T>,
}

impl<T: Scalar> Qr<T> {
    pub fn new(a: ArrayView2<T>) -> Self {
        let (n, k) = a.dim();
        assert!(n >= k, "QR requires at least as many rows as columns");
        let mut packed = a.to_owned();
        let mut tau = Array1::<T>::zeros(k);
        for j in 0..k {
            let norm = packed
                .slice(s![j.., j])
                .iter()
                .map(|&x| x * x)
                .sum::<T>()
                .sqrt();
            if norm == T::zero() {
                continue;
            }
            let x0 = packed[[j, j]];
            let alpha = if x0 > T::zero() { -norm } else { norm };
            let v0 = x0 - alpha;
            // v = (x - alpha e1) / v0, so v[0] = 1
            for i in (j + 1)..n {
                packed[[i, j]] /= v0;
            }
            let t = (alpha - x0) / alpha;
            tau[j] = t;
            packed[[j, j]] = alpha;
            for c in (j + 1)..k {
                let mut dot = packed[[j, c]];
                for i in (j + 1)..n {
                    dot += packed[[i, j]] * packed[[i, c]];
                }
                let f = t * dot;
                packed[[j, c]] -= f;
                for i in (j + 1)..n {
                    let vi = packed[[i, j]];
                    packed[[i, c]] -= f * vi;
                }
            }
        }
        Qr { packed, tau }
    }

    pub fn ncols(&self) -> usize {
        self.packed.ncols()
    }

    /// Upper-triangular factor.
    pub fn r(&self) -> Array2<T> {
        let k = self.ncols();
        let mut r = Array2::<T>::zeros((k, k));
        for i in 0..k {
            for j in i..k {
                r[[i, j]] = self.packed[[i, j]];
            }
        }
        r
    }

    /// `Qᵀ b`.
    pub fn qt_mul(&self, b: ArrayView1<T>) -> Array1<T> {
        let (n, k) = self.packed.dim();
        let mut y = b.to_owned();
        for j in 0..k {
            let mut dot = y[j];
            for i in (j + 1)..n {
                dot += self.packed[[i, j]] * y[i];
            }
            let f = self.tau[j] * dot;
            y[j] -= f;
            for i in (j + 1)..n {
                y[i] -= f * self.packed[[i, j]];
            }
        }
        y
    }

    /// Least-squares solution of `A x ≈ b`. Assumes full column rank.
    pub fn solve(&self, b: ArrayView1<T>) -> Array1<T> {
        let k = self.ncols();
        let y = self.qt_mul(b);
        let mut x = Array1::<T>::zeros(k);
        for i in (0..k).rev() {
            let mut v = y[i];
            for j in (i + 1)..k {
                v -= self.packed[[i, j]] * x[j];
            }
            x[i] = v / self.packed[[i, i]];
        }
        x
    }

    /// `(RᵀR)⁻¹ = (AᵀA)⁻¹`.
    pub fn gram_inverse(&self) -> Array2<T> {
        let k = self.ncols();
        // R⁻¹ by back substitution, column by column.
        let mut rinv = Array2::<T>::zeros((k, k));
        for c in 0..k {
            for i in (0..=c).rev() {
                let mut v = if i == c { T::one() } else { T::zero() };
                for j in (i + 1)..=c {
                    v -= self.packed[[i, j]] * rinv[[j, c]];
                }
                rinv[[i, c]] = v / self.packed[[i, i]];
            }
        }
        rinv.dot(&rinv.t())
    }
}
