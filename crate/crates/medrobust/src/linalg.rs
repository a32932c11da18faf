//! Dense least-squares kernel used by the regression engine.
//!
//! All systems in this crate are small (tens of columns at most), so a
//! Householder QR with column pivoting is used throughout: it detects rank
//! deficiency reliably via the pivot magnitudes and needs no external BLAS.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Relative pivot threshold below which a column is declared dependent.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Minimum-residual solution of `A x = b` via column-pivoted Householder QR.
///
/// Returns `Err(SingularDesign)` when the numerical rank of `A` is below its
/// column count, judged by `|r_kk| <= rank_tol * |r_00|`.
pub fn lstsq(a: &Array2<f64>, b: &Array1<f64>, rank_tol: f64) -> Result<Array1<f64>> {
    let (n, p) = a.dim();
    assert_eq!(n, b.len(), "lstsq: row count mismatch");
    if n < p {
        return Err(Error::SingularDesign(format!(
            "system has {n} rows but {p} columns"
        )));
    }

    // Working copies: R is overwritten in place, qtb accumulates Q^T b.
    let mut r = a.clone();
    let mut qtb = b.clone();
    let mut perm: Vec<usize> = (0..p).collect();

    // Squared column norms drive the pivot choice; the largest initial norm
    // sets the scale against which pivots are judged.
    let mut col_norms: Vec<f64> = (0..p).map(|j| r.column(j).dot(&r.column(j))).collect();
    let scale = col_norms.iter().fold(0.0_f64, |m, &v| m.max(v)).sqrt();

    for k in 0..p {
        // Pivot: bring the column with the largest remaining norm to front.
        let (jmax, _) = col_norms
            .iter()
            .enumerate()
            .skip(k)
            .fold((k, -1.0), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
        if jmax != k {
            for i in 0..n {
                r.swap((i, k), (i, jmax));
            }
            perm.swap(k, jmax);
            col_norms.swap(k, jmax);
        }

        // Householder reflector annihilating r[k+1.., k].
        let mut alpha = 0.0;
        for i in k..n {
            alpha += r[(i, k)] * r[(i, k)];
        }
        let alpha = alpha.sqrt();
        if alpha <= rank_tol * scale {
            return Err(Error::SingularDesign(format!(
                "column {} (pivot {:.3e}) is dependent on the preceding columns",
                perm[k], alpha
            )));
        }

        let beta = if r[(k, k)] >= 0.0 { -alpha } else { alpha };
        let mut v: Vec<f64> = (k..n).map(|i| r[(i, k)]).collect();
        v[0] -= beta;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            // Apply I - 2 v v^T / (v^T v) to the trailing block and to qtb.
            for j in k..p {
                let mut dot = 0.0;
                for (t, vi) in v.iter().enumerate() {
                    dot += vi * r[(k + t, j)];
                }
                let scale = 2.0 * dot / vnorm2;
                for (t, vi) in v.iter().enumerate() {
                    r[(k + t, j)] -= scale * vi;
                }
            }
            let mut dot = 0.0;
            for (t, vi) in v.iter().enumerate() {
                dot += vi * qtb[k + t];
            }
            let scale = 2.0 * dot / vnorm2;
            for (t, vi) in v.iter().enumerate() {
                qtb[k + t] -= scale * vi;
            }
        }
        r[(k, k)] = beta;

        // Downdate remaining column norms.
        for (j, norm) in col_norms.iter_mut().enumerate().skip(k + 1) {
            *norm -= r[(k, j)] * r[(k, j)];
            if *norm < 0.0 {
                *norm = r.column(j).iter().skip(k + 1).map(|x| x * x).sum();
            }
        }
    }

    // Back substitution in pivoted order.
    let mut y = Array1::zeros(p);
    for k in (0..p).rev() {
        let mut s = qtb[k];
        for j in k + 1..p {
            s -= r[(k, j)] * y[j];
        }
        y[k] = s / r[(k, k)];
    }
    let mut x = Array1::zeros(p);
    for k in 0..p {
        x[perm[k]] = y[k];
    }
    Ok(x)
}

/// Numerical rank of `A` under the same pivot rule as [`lstsq`].
pub fn rank(a: &Array2<f64>, rank_tol: f64) -> usize {
    let (n, p) = a.dim();
    let mut r = a.clone();
    let mut col_norms: Vec<f64> = (0..p).map(|j| r.column(j).dot(&r.column(j))).collect();
    let scale = col_norms.iter().fold(0.0_f64, |m, &v| m.max(v)).sqrt();
    let kmax = p.min(n);
    for k in 0..kmax {
        let (jmax, _) = col_norms
            .iter()
            .enumerate()
            .skip(k)
            .fold((k, -1.0), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
        if jmax != k {
            for i in 0..n {
                r.swap((i, k), (i, jmax));
            }
            col_norms.swap(k, jmax);
        }
        let mut alpha = 0.0;
        for i in k..n {
            alpha += r[(i, k)] * r[(i, k)];
        }
        let alpha = alpha.sqrt();
        if alpha <= rank_tol * scale {
            return k;
        }
        let beta = if r[(k, k)] >= 0.0 { -alpha } else { alpha };
        let mut v: Vec<f64> = (k..n).map(|i| r[(i, k)]).collect();
        v[0] -= beta;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in k..p {
                let mut dot = 0.0;
                for (t, vi) in v.iter().enumerate() {
                    dot += vi * r[(k + t, j)];
                }
                let scale = 2.0 * dot / vnorm2;
                for (t, vi) in v.iter().enumerate() {
                    r[(k + t, j)] -= scale * vi;
                }
            }
        }
        r[(k, k)] = beta;
        for (j, norm) in col_norms.iter_mut().enumerate().skip(k + 1) {
            *norm -= r[(k, j)] * r[(k, j)];
            if *norm < 0.0 {
                *norm = r.column(j).iter().skip(k + 1).map(|x| x * x).sum();
            }
        }
    }
    kmax
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn solves_square_system_exactly() {
        let a = array![[2.0, 1.0], [1.0, 3.0]];
        let b = array![5.0, 10.0];
        let x = lstsq(&a, &b, DEFAULT_RANK_TOL).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn matches_normal_equations_on_overdetermined_system() {
        // 4x2 system solved by hand via (A^T A)^{-1} A^T b.
        let a = array![[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]];
        let b = array![1.0, 2.2, 2.8, 4.1];
        let x = lstsq(&a, &b, DEFAULT_RANK_TOL).unwrap();
        // A^T A = [[4, 6], [6, 14]], A^T b = [10.1, 20.1];
        // solution = (1/20) [14*10.1 - 6*20.1, -6*10.1 + 4*20.1].
        assert_abs_diff_eq!(x[0], (14.0 * 10.1 - 6.0 * 20.1) / 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], (-6.0 * 10.1 + 4.0 * 20.1) / 20.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_duplicate_columns() {
        let a = array![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        let b = array![1.0, 2.0, 3.0];
        let err = lstsq(&a, &b, DEFAULT_RANK_TOL).unwrap_err();
        assert!(matches!(err, crate::error::Error::SingularDesign(_)));
    }

    #[test]
    fn rank_detects_deficiency() {
        let a = array![[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [1.0, 0.0, 1.0]];
        assert_eq!(rank(&a, DEFAULT_RANK_TOL), 2);
        let full = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        assert_eq!(rank(&full, DEFAULT_RANK_TOL), 2);
    }

    #[test]
    fn pivoting_handles_badly_scaled_columns() {
        let a = array![[1e-9, 1.0], [2e-9, -1.0], [3e-9, 0.5]];
        let b = array![1.0, 0.0, 0.5];
        let x = lstsq(&a, &b, DEFAULT_RANK_TOL).unwrap();
        // Residual orthogonality: A^T (b - A x) = 0.
        let resid = &b - &a.dot(&x);
        let g = a.t().dot(&resid);
        assert!(g.iter().all(|v| v.abs() < 1e-8), "gradient {g:?}");
    }
}
