//! Small dense linear-algebra helpers shared by the numeric modules.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Solve the weighted least-squares problem min ||W^(1/2)(A c - y)||
/// through the normal equations, falling back to a truncated SVD when the
/// Gram matrix is not positive definite. Returns the solution and a
/// condition estimate of the Gram matrix.
pub fn weighted_least_squares(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    weights: Option<&[f64]>,
) -> Result<(DVector<f64>, f64)> {
    let (n, p) = a.shape();
    if y.len() != n {
        return Err(Error::ShapeMismatch("rows of A vs length of y".into()));
    }
    let mut gram = DMatrix::zeros(p, p);
    let mut rhs = DVector::zeros(p);
    for i in 0..n {
        let w = weights.map(|ws| ws[i]).unwrap_or(1.0);
        if w == 0.0 {
            continue;
        }
        let row = a.row(i);
        for r in 0..p {
            rhs[r] += w * row[r] * y[i];
            for c in r..p {
                gram[(r, c)] += w * row[r] * row[c];
            }
        }
    }
    for r in 0..p {
        for c in 0..r {
            gram[(r, c)] = gram[(c, r)];
        }
    }

    let sym = nalgebra::SymmetricEigen::new(gram.clone());
    let max_ev = sym.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min_ev = sym.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    let cond = if min_ev > 0.0 { max_ev / min_ev } else { f64::INFINITY };

    if min_ev > max_ev * 1e-13 && min_ev > 0.0 {
        if let Some(chol) = gram.clone().cholesky() {
            return Ok((chol.solve(&rhs), cond));
        }
    }
    // rank-deficient: minimum-norm solution through the eigendecomposition
    let tol = max_ev.abs().max(1e-300) * 1e-12;
    let mut sol = DVector::zeros(p);
    for k in 0..p {
        let ev = sym.eigenvalues[k];
        if ev > tol {
            let v = sym.eigenvectors.column(k);
            let proj = v.dot(&rhs) / ev;
            sol += v * proj;
        }
    }
    Ok((sol, cond))
}

/// Thomas algorithm for a tridiagonal system. `lower`/`upper` have length
/// n-1; overwrites nothing, returns the solution.
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    if lower.len() != n - 1 || upper.len() != n - 1 || rhs.len() != n {
        return Err(Error::ShapeMismatch("tridiagonal band lengths".into()));
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom.abs() < 1e-300 {
        return Err(Error::Numerical("singular tridiagonal system".into()));
    }
    c[0] = upper.first().copied().unwrap_or(0.0) / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i - 1] * c[i - 1];
        if denom.abs() < 1e-300 {
            return Err(Error::Numerical("singular tridiagonal system".into()));
        }
        if i < n - 1 {
            c[i] = upper[i] / denom;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// Empirical quantile with linear interpolation on the sorted copy.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        v[lo]
    } else {
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

pub fn std_dev(values: &[f64]) -> f64 {
    let m = mean(values);
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
}

/// Pearson correlation of two equally long slices.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let ma = mean(&a[..n]);
    let mb = mean(&b[..n]);
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for i in 0..n {
        let xa = a[i] - ma;
        let xb = b[i] - mb;
        num += xa * xb;
        da += xa * xa;
        db += xb * xb;
    }
    if da == 0.0 || db == 0.0 {
        0.0
    } else {
        num / (da * db).sqrt()
    }
}
