//! Dense symmetric eigensolver (cyclic Jacobi).
//!
//! Graphs here are tiny (N <= 512), so an O(n^3) Jacobi sweep is plenty and
//! avoids pulling in a LAPACK backend.

use ndarray::Array2;

/// Eigenvalues of a symmetric matrix, ascending. Panics if `a` is not square.
pub(crate) fn symmetric_eigenvalues(a: &Array2<f64>, tol: f64) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut d = a.clone();
    let max_sweeps = 100 * n * n + 1000;

    for _ in 0..max_sweeps {
        let mut p = 0;
        let mut q = 1;
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = d[[i, j]].abs();
                if v > off {
                    off = v;
                    p = i;
                    q = j;
                }
            }
        }
        if off <= tol {
            break;
        }

        let app = d[[p, p]];
        let aqq = d[[q, q]];
        let apq = d[[p, q]];
        let theta = (aqq - app) / (2.0 * apq);
        let t = if theta >= 0.0 {
            1.0 / (theta + (1.0 + theta * theta).sqrt())
        } else {
            -1.0 / (-theta + (1.0 + theta * theta).sqrt())
        };
        let c = 1.0 / (1.0 + t * t).sqrt();
        let s = t * c;

        for i in 0..n {
            if i != p && i != q {
                let dip = d[[i, p]];
                let diq = d[[i, q]];
                d[[i, p]] = c * dip - s * diq;
                d[[p, i]] = d[[i, p]];
                d[[i, q]] = s * dip + c * diq;
                d[[q, i]] = d[[i, q]];
            }
        }
        d[[p, p]] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
        d[[q, q]] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
        d[[p, q]] = 0.0;
        d[[q, p]] = 0.0;
    }

    let mut eig: Vec<f64> = (0..n).map(|i| d[[i, i]]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    eig
}
