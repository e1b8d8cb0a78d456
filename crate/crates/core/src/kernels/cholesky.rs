use faer::{Mat, Side};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;

/// Lower Cholesky factor `L` of `M + j I`.
///
/// `j` runs through `jitter, 10 jitter, 100 jitter, ...` until the
/// factorisation succeeds. The requested `jitter` is always tried; larger
/// values are tried only while they stay at or below `1e-2 * trace(M) / dim`.
/// A zero `jitter` gets exactly one attempt.
pub fn cholesky_psd(m: &Matrix, jitter: f64) -> Result<Matrix> {
    if !m.is_square() {
        return Err(invalid("cholesky needs a square matrix"));
    }
    if !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(invalid(format!("jitter must be finite and >= 0, got {jitter}")));
    }
    let dim = m.rows();
    if dim == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let cap = 1e-2 * m.trace() / dim as f64;
    let mut j = jitter;
    loop {
        if let Some(l) = try_factor(m, j) {
            return Ok(l);
        }
        let next = j * 10.0;
        if jitter == 0.0 || !(next <= cap) {
            return Err(Error::NotPsd { jitter: j });
        }
        j = next;
    }
}

fn try_factor(m: &Matrix, jitter: f64) -> Option<Matrix> {
    let dim = m.rows();
    // Only the lower triangle is read.
    let a = Mat::<f64>::from_fn(dim, dim, |i, k| {
        if i == k {
            m[(i, k)] + jitter
        } else {
            m[(i, k)]
        }
    });
    let llt = a.llt(Side::Lower).ok()?;
    let l = llt.L();
    let out = Matrix::from_fn(dim, dim, |i, k| if k <= i { l[(i, k)] } else { 0.0 });
    out.all_finite().then_some(out)
}

/// Solve `L L^T x = b` given the lower factor `L`.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    assert_eq!(b.len(), n);
    let mut y = b.to_vec();
    for i in 0..n {
        let row = l.row(i);
        let s: f64 = row[..i].iter().zip(&y[..i]).map(|(a, v)| a * v).sum();
        y[i] = (y[i] - s) / row[i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}
