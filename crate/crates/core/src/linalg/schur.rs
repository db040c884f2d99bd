//! Complex Schur decomposition of general square matrices
//! (Householder reduction to Hessenberg form, then single-shift QR).

use super::matrix::{c64, CMatrix};
use crate::error::{Error, Result};

const MAX_QR_ITERATIONS_PER_EIGENVALUE: usize = 60;

/// `A = Z T Z^H` with `T` upper triangular and `Z` unitary.
#[derive(Debug, Clone)]
pub struct ComplexSchur {
    pub t: CMatrix,
    pub z: CMatrix,
}

impl ComplexSchur {
    pub fn eigenvalues(&self) -> Vec<c64> {
        (0..self.t.rows()).map(|i| self.t[(i, i)]).collect()
    }

    /// Right eigenvectors (unit norm columns) by back substitution on `T`.
    pub fn eigenvectors(&self) -> CMatrix {
        let n = self.t.rows();
        let t = &self.t;
        let tnorm = t.frobenius_norm().max(f64::MIN_POSITIVE);
        let small = f64::EPSILON * tnorm;
        let mut y = CMatrix::zeros(n, n);
        for j in 0..n {
            let lambda = t[(j, j)];
            let mut col = vec![c64::new(0.0, 0.0); n];
            col[j] = c64::new(1.0, 0.0);
            for i in (0..j).rev() {
                let mut s = c64::new(0.0, 0.0);
                for k in i + 1..=j {
                    s += t[(i, k)] * col[k];
                }
                let mut den = t[(i, i)] - lambda;
                if den.norm() < small {
                    den = c64::new(small, 0.0);
                }
                col[i] = -s / den;
            }
            y.set_column(j, &col);
        }
        let mut x = self.z.matmul(&y);
        for j in 0..n {
            let nrm = (0..n).map(|i| x[(i, j)].norm_sqr()).sum::<f64>().sqrt();
            if nrm > 0.0 {
                for i in 0..n {
                    x[(i, j)] /= nrm;
                }
            }
        }
        x
    }
}

/// Complex Givens rotation `[c s; -conj(s) c]` with real `c`, mapping `(a, b)` to `(r, 0)`.
fn givens(a: c64, b: c64) -> (f64, c64) {
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, c64::new(0.0, 0.0));
    }
    let an = a.norm();
    if an == 0.0 {
        return (0.0, b.conj() / bn);
    }
    let r = an.hypot(bn);
    let c = an / r;
    let s = (a / an) * b.conj() / r;
    (c, s)
}

fn rotate_rows(m: &mut CMatrix, i: usize, j: usize, c: f64, s: c64, cols: std::ops::Range<usize>) {
    for k in cols {
        let x = m[(i, k)];
        let y = m[(j, k)];
        m[(i, k)] = x * c + s * y;
        m[(j, k)] = -s.conj() * x + y * c;
    }
}

/// Right-multiplies columns `i, j` by the adjoint rotation.
fn rotate_cols(m: &mut CMatrix, i: usize, j: usize, c: f64, s: c64, rows: std::ops::Range<usize>) {
    for k in rows {
        let x = m[(k, i)];
        let y = m[(k, j)];
        m[(k, i)] = x * c + y * s.conj();
        m[(k, j)] = -s * x + y * c;
    }
}

fn hessenberg(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.rows();
    let mut h = a.clone();
    let mut q = CMatrix::identity(n);
    for k in 0..n.saturating_sub(2) {
        let x: Vec<c64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let alpha = x[0];
        let xnorm = x[1..].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let norm = (alpha.norm_sqr() + xnorm * xnorm).sqrt();
        let phase = if alpha.norm() > 0.0 { alpha / alpha.norm() } else { c64::new(1.0, 0.0) };
        // v = x + phase*norm*e1, H = I - 2 v v^H / (v^H v)
        let mut v = x.clone();
        v[0] += phase * norm;
        let vv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let beta = 2.0 / vv;
        // H <- P H
        for col in 0..n {
            let s: c64 = (0..v.len()).map(|t| v[t].conj() * h[(k + 1 + t, col)]).sum();
            let f = s * beta;
            for t in 0..v.len() {
                let upd = v[t] * f;
                h[(k + 1 + t, col)] -= upd;
            }
        }
        // H <- H P, Q <- Q P
        for mat in [&mut h, &mut q] {
            for row in 0..n {
                let s: c64 = (0..v.len()).map(|t| mat[(row, k + 1 + t)] * v[t]).sum();
                let f = s * beta;
                for t in 0..v.len() {
                    let upd = f * v[t].conj();
                    mat[(row, k + 1 + t)] -= upd;
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = c64::new(0.0, 0.0);
        }
    }
    (h, q)
}

/// Wilkinson shift: eigenvalue of the trailing 2x2 block nearest to its last diagonal entry.
fn wilkinson_shift(a: c64, b: c64, c: c64, d: c64) -> c64 {
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr * 0.25 - det).sqrt();
    let l1 = tr * 0.5 + disc;
    let l2 = tr * 0.5 - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Complex Schur form of a square matrix.
pub fn complex_schur(a: &CMatrix) -> Result<ComplexSchur> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "Schur decomposition needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let (mut h, mut z) = hessenberg(a);
    if n <= 1 {
        return Ok(ComplexSchur { t: h, z });
    }
    let eps = f64::EPSILON;
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    loop {
        // deflate
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let mut diag = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            if diag == 0.0 {
                diag = h.frobenius_norm();
            }
            if sub <= eps * diag {
                h[(lo, lo - 1)] = c64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            if hi == 0 {
                break;
            }
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > MAX_QR_ITERATIONS_PER_EIGENVALUE * n {
            return Err(Error::EigenNoConvergence { dim: n });
        }
        let mu = if iter % 11 == 10 {
            // exceptional shift
            h[(hi, hi)] + c64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };

        // implicit single-shift sweep on the active window [lo, hi]
        for k in lo..hi {
            let (c, s) = if k == lo {
                givens(h[(lo, lo)] - mu, h[(lo + 1, lo)])
            } else {
                givens(h[(k, k - 1)], h[(k + 1, k - 1)])
            };
            let col_start = if k == lo { lo } else { k - 1 };
            rotate_rows(&mut h, k, k + 1, c, s, col_start..n);
            if k > lo {
                h[(k + 1, k - 1)] = c64::new(0.0, 0.0);
            }
            let row_end = (k + 3).min(hi + 1);
            rotate_cols(&mut h, k, k + 1, c, s, 0..row_end);
            rotate_cols(&mut z, k, k + 1, c, s, 0..n);
        }
    }
    for i in 0..n {
        for j in 0..i {
            h[(i, j)] = c64::new(0.0, 0.0);
        }
    }
    Ok(ComplexSchur { t: h, z })
}
