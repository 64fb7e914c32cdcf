//! Householder QR least squares with optional ridge term.

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RankDeficient {
    pub column: usize,
    pub pivot: f64,
}

/// Minimizes `‖A w − b‖² + ridge ‖w‖²` by QR-factoring the augmented system
/// `[A; sqrt(ridge) I] w = [b; 0]`. Fails when a diagonal entry of `R` is
/// below `max(m, n) · ε · max|R_ii|`.
pub(crate) fn ridge_least_squares(a: &Matrix, b: &[f64], ridge: f64) -> Result<Vec<f64>, RankDeficient> {
    let (m, n) = (a.rows(), a.cols());
    assert_eq!(b.len(), m);
    assert!(ridge >= 0.0);
    if n == 0 {
        return Ok(Vec::new());
    }
    let rows = if ridge > 0.0 { m + n } else { m };
    let root = ridge.sqrt();

    // Column-major copy of the augmented matrix.
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|c| {
            let mut col = vec![0.0; rows];
            for r in 0..m {
                col[r] = a.get(r, c);
            }
            if ridge > 0.0 {
                col[m + c] = root;
            }
            col
        })
        .collect();
    let mut rhs = vec![0.0; rows];
    rhs[..m].copy_from_slice(b);

    let steps = n.min(rows);
    let mut diag = vec![0.0; n];
    for k in 0..steps {
        let (head, tail) = cols.split_at_mut(k + 1);
        let v = &mut head[k];
        let norm = v[k..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            diag[k] = 0.0;
            continue;
        }
        let alpha = if v[k] > 0.0 { -norm } else { norm };
        v[k] -= alpha;
        let vnorm2: f64 = v[k..].iter().map(|x| x * x).sum();
        diag[k] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        let reflect = |target: &mut [f64]| {
            let s: f64 = v[k..].iter().zip(&target[k..]).map(|(x, y)| x * y).sum();
            let f = 2.0 * s / vnorm2;
            for (t, x) in target[k..].iter_mut().zip(&v[k..]) {
                *t -= f * x;
            }
        };
        for col in tail.iter_mut() {
            reflect(col);
        }
        reflect(&mut rhs);
    }
    if rows < n {
        return Err(RankDeficient { column: rows, pivot: 0.0 });
    }

    let max_diag = diag.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    let tol = rows.max(n) as f64 * f64::EPSILON * max_diag;
    if let Some(k) = diag.iter().position(|d| d.abs() <= tol) {
        return Err(RankDeficient { column: k, pivot: diag[k] });
    }

    // Back substitution on R (upper triangle lives in cols[c][..c], diagonal in diag).
    let mut w = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for c in k + 1..n {
            s -= cols[c][k] * w[c];
        }
        w[k] = s / diag[k];
    }
    Ok(w)
}
