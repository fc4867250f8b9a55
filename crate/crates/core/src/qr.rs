//! Column-pivoted Householder QR for small least-squares problems.
//!
//! For a design `X` with `X P = Q R`, `R` is the pivoted Cholesky factor of
//! `M = X^T X`, so the rank test below is the usual pivoted Cholesky test on
//! `M` while the solves work with `X` directly.

/// Returned when a pivot falls below the relative threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singular {
    /// Step at which the factorization stopped.
    pub step: usize,
    /// Ratio of the rejected pivot to the largest diagonal entry of `M`.
    pub relative_pivot: f64,
}

/// `X P = Q R` for a row-major `rows x cols` matrix with `rows >= cols`.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    rows: usize,
    cols: usize,
    /// Column-major working copy: `R` above the diagonal, Householder
    /// vectors on and below it.
    a: Vec<f64>,
    /// Diagonal of `R`.
    diag: Vec<f64>,
    /// `tau_k` of `H_k = I - tau_k v_k v_k^T`, with `v_k[k] = 1` implied.
    tau: Vec<f64>,
    /// `perm[k]` is the original column in position `k`.
    perm: Vec<usize>,
}

impl PivotedQr {
    /// Factors `x`. At each step the column with the largest remaining
    /// squared norm (the trailing diagonal of the Schur complement of `M`)
    /// is pivoted in; the factorization fails if that norm is not above
    /// `rel_tol * max_j ||x_j||^2`.
    pub fn factor(x: &[f64], rows: usize, cols: usize, rel_tol: f64) -> Result<Self, Singular> {
        debug_assert_eq!(x.len(), rows * cols);
        debug_assert!(rows >= cols);
        let mut a = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                a[j * rows + i] = x[i * cols + j];
            }
        }
        let col_norm2 = |a: &[f64], j: usize, from: usize| -> f64 {
            a[j * rows + from..(j + 1) * rows].iter().map(|v| v * v).sum()
        };
        let scale = (0..cols).map(|j| col_norm2(&a, j, 0)).fold(0.0f64, f64::max);
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Singular {
                step: 0,
                relative_pivot: 0.0,
            });
        }
        let mut perm: Vec<usize> = (0..cols).collect();
        let mut diag = vec![0.0; cols];
        let mut tau = vec![0.0; cols];
        for k in 0..cols {
            let mut p = k;
            let mut best = col_norm2(&a, k, k);
            for j in k + 1..cols {
                let v = col_norm2(&a, j, k);
                if v > best {
                    best = v;
                    p = j;
                }
            }
            if !(best > rel_tol * scale) {
                return Err(Singular {
                    step: k,
                    relative_pivot: best / scale,
                });
            }
            if p != k {
                for i in 0..rows {
                    a.swap(k * rows + i, p * rows + i);
                }
                perm.swap(k, p);
            }
            let col = &mut a[k * rows..(k + 1) * rows];
            let alpha = col[k];
            let norm = best.sqrt();
            let beta = if alpha >= 0.0 { -norm } else { norm };
            let v0 = alpha - beta;
            for v in &mut col[k + 1..] {
                *v /= v0;
            }
            tau[k] = (beta - alpha) / beta;
            diag[k] = beta;
            col[k] = 1.0;
            for j in k + 1..cols {
                let (head, tail) = a.split_at_mut(j * rows);
                let v = &head[k * rows + k..(k + 1) * rows];
                let c = &mut tail[k..rows];
                let s: f64 = v.iter().zip(c.iter()).map(|(x, y)| x * y).sum::<f64>() * tau[k];
                for (ci, vi) in c.iter_mut().zip(v) {
                    *ci -= s * vi;
                }
            }
        }
        Ok(Self {
            rows,
            cols,
            a,
            diag,
            tau,
            perm,
        })
    }

    /// `w = X M^{-1} e_c`: the weights with which the least-squares fit
    /// maps responses to coefficient `c`.
    pub fn coefficient_weights(&self, c: usize, out: &mut [f64]) {
        let (rows, cols) = (self.rows, self.cols);
        debug_assert_eq!(out.len(), rows);
        // X M^{-1} e_c = Q R^{-T} P^T e_c
        let pos = self.perm.iter().position(|&p| p == c).expect("column in range");
        out.fill(0.0);
        for i in pos..cols {
            let mut s = if i == pos { 1.0 } else { 0.0 };
            for (k, t) in out.iter().enumerate().take(i).skip(pos) {
                s -= self.r(k, i) * t;
            }
            out[i] = s / self.diag[i];
        }
        for k in (0..cols).rev() {
            let v = &self.a[k * rows + k..(k + 1) * rows];
            let tail = &mut out[k..];
            let s: f64 = v.iter().zip(tail.iter()).map(|(x, y)| x * y).sum::<f64>() * self.tau[k];
            for (o, vi) in tail.iter_mut().zip(v) {
                *o -= s * vi;
            }
        }
    }

    /// `R[k][i]` for `k < i`.
    fn r(&self, k: usize, i: usize) -> f64 {
        self.a[i * self.rows + k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Weights of the intercept of a straight-line fit, by hand.
    #[test]
    fn line_fit_intercept_weights() {
        // columns (1, x) with x = -1, 0, 2
        let x = [1.0, -1.0, 1.0, 0.0, 1.0, 2.0];
        let f = PivotedQr::factor(&x, 3, 2, 1e-10).unwrap();
        let mut w = [0.0; 3];
        f.coefficient_weights(0, &mut w);
        // M = [[3, 1], [1, 5]], M^{-1} e0 = (5, -1) / 14
        let want = [(5.0 + 1.0) / 14.0, 5.0 / 14.0, (5.0 - 2.0) / 14.0];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        f.coefficient_weights(1, &mut w);
        // M^{-1} e1 = (-1, 3) / 14
        let want = [(-1.0 - 3.0) / 14.0, -1.0 / 14.0, (-1.0 + 6.0) / 14.0];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn square_system_interpolates() {
        // Vandermonde in (1, x, x^2) at x = 0.5, -0.25, 1
        let xs = [0.5, -0.25, 1.0];
        let x: Vec<f64> = xs.iter().flat_map(|&t| [1.0, t, t * t]).collect();
        let f = PivotedQr::factor(&x, 3, 3, 1e-10).unwrap();
        let mut w = [0.0; 3];
        f.coefficient_weights(0, &mut w);
        // Lagrange basis at 0
        let lagrange = |i: usize| {
            (0..3)
                .filter(|&j| j != i)
                .map(|j| (0.0 - xs[j]) / (xs[i] - xs[j]))
                .product::<f64>()
        };
        for (i, wi) in w.iter().enumerate() {
            assert!((wi - lagrange(i)).abs() < 1e-14);
        }
    }

    #[test]
    fn rank_deficient_is_detected() {
        // second column is twice the first
        let x = [1.0, 2.0, 1.0, 2.0, 1.0, 2.0];
        let err = PivotedQr::factor(&x, 3, 2, 1e-10).unwrap_err();
        assert_eq!(err.step, 1);
        assert!(PivotedQr::factor(&[0.0; 4], 2, 2, 1e-10).is_err());
    }

    #[test]
    fn pivots_by_column_norm() {
        let x = [1e-3, 1.0, 2e-3, 1.0, -1e-3, 1.0];
        let f = PivotedQr::factor(&x, 3, 2, 1e-10).unwrap();
        assert_eq!(f.perm, vec![1, 0]);
    }
}
