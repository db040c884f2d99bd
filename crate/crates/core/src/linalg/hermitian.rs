//! Hermitian eigensolver: Householder reduction to a real symmetric
//! tridiagonal matrix, implicit QL on the tridiagonal, and (optionally)
//! inverse iteration for a subset of eigenvectors.

use super::matrix::{c64, CMatrix};
use crate::error::{Error, Result};

const MAX_QL_SWEEPS_PER_EIGENVALUE: usize = 30;

/// Square matrix equal to its own conjugate transpose.
///
/// The constructor replaces the input with `(A + A^H) / 2`, so the stored
/// entries are exactly Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let mut m = m;
        let n = m.rows();
        for i in 0..n {
            m[(i, i)] = c64::new(m[(i, i)].re, 0.0);
            for j in 0..i {
                let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                m[(i, j)] = avg;
                m[(j, i)] = avg.conj();
            }
        }
        Ok(Self(m))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> c64) -> Self {
        Self::new(CMatrix::from_fn(n, n, f)).expect("square by construction")
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub fn from_diag(d: &[f64]) -> Self {
        Self(CMatrix::from_diag(d))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    #[inline]
    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.frobenius_norm()
    }

    pub fn add(&self, rhs: &HermitianMatrix) -> HermitianMatrix {
        Self(self.0.add(&rhs.0))
    }

    pub fn sub(&self, rhs: &HermitianMatrix) -> HermitianMatrix {
        Self(self.0.sub(&rhs.0))
    }

    pub fn scale(&self, s: f64) -> HermitianMatrix {
        Self(self.0.scale(c64::new(s, 0.0)))
    }

    /// Real part of the Frobenius inner product (the imaginary part vanishes).
    pub fn inner(&self, rhs: &HermitianMatrix) -> f64 {
        self.0.inner(&rhs.0).re
    }

    /// `sum_k w_k u_k u_k^H` for unit vectors stored as the columns of `vectors`.
    pub fn from_weighted_outer(vectors: &CMatrix, weights: &[f64]) -> Self {
        assert_eq!(vectors.cols(), weights.len());
        let n = vectors.rows();
        let mut m = CMatrix::zeros(n, n);
        accumulate_outer(&mut m, vectors, weights);
        Self(m)
    }
}

impl std::ops::Index<(usize, usize)> for HermitianMatrix {
    type Output = c64;

    fn index(&self, idx: (usize, usize)) -> &c64 {
        &self.0[idx]
    }
}

/// `m += sum_k w_k v_k v_k^H`, columns of `vectors` as `v_k`.
fn accumulate_outer(m: &mut CMatrix, vectors: &CMatrix, weights: &[f64]) {
    let n = vectors.rows();
    let cols: Vec<Vec<c64>> = (0..vectors.cols()).map(|k| vectors.column(k)).collect();
    for i in 0..n {
        for (v, &w) in cols.iter().zip(weights) {
            let vi = v[i] * w;
            let row = m.row_mut(i);
            for (dst, vj) in row[..=i].iter_mut().zip(v) {
                *dst += vi * vj.conj();
            }
        }
        for j in 0..i {
            m[(j, i)] = m[(i, j)].conj();
        }
        m[(i, i)].im = 0.0;
    }
}

/// Eigenpairs of a Hermitian matrix; eigenvalues ascending, eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl EigenDecomposition {
    /// `U diag(f(lambda)) U^H`.
    pub fn reassemble_with(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let w: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        HermitianMatrix::from_weighted_outer(&self.eigenvectors, &w)
    }

    pub fn reassemble(&self) -> HermitianMatrix {
        self.reassemble_with(|l| l)
    }
}

/// Householder reflector `I - tau v v^H` acting on trailing coordinates.
struct Reflector {
    tau: c64,
    v_re: Vec<f64>,
    v_im: Vec<f64>,
}

/// `Q^H A Q = tridiag(d, e)` with `Q` the product of the stored reflectors.
struct Tridiagonal {
    d: Vec<f64>,
    e: Vec<f64>,
    reflectors: Vec<Reflector>,
}

fn tridiagonalize(a: &HermitianMatrix) -> Tridiagonal {
    let n = a.dim();
    let mut ar: Vec<f64> = a.as_matrix().as_slice().iter().map(|z| z.re).collect();
    let mut ai: Vec<f64> = a.as_matrix().as_slice().iter().map(|z| z.im).collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    let mut reflectors = Vec::with_capacity(n.saturating_sub(1));

    let mut pr = vec![0.0; n];
    let mut pi = vec![0.0; n];
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];

    for k in 0..n.saturating_sub(1) {
        let off = k + 1;
        let m = n - off;
        // column k below the diagonal equals conj(row k) to the right of it
        let row_k = k * n;
        let mut v_re: Vec<f64> = ar[row_k + off..row_k + n].to_vec();
        let mut v_im: Vec<f64> = ai[row_k + off..row_k + n].iter().map(|x| -x).collect();

        let alpha = c64::new(v_re[0], v_im[0]);
        let xnorm = v_re[1..]
            .iter()
            .zip(&v_im[1..])
            .map(|(r, i)| r * r + i * i)
            .sum::<f64>()
            .sqrt();
        d[k] = ar[row_k + k];

        let tau;
        if xnorm == 0.0 && alpha.im == 0.0 {
            tau = c64::new(0.0, 0.0);
            e[k] = alpha.re;
        } else {
            let norm = (alpha.norm_sqr() + xnorm * xnorm).sqrt();
            let beta = if alpha.re >= 0.0 { -norm } else { norm };
            tau = c64::new((beta - alpha.re) / beta, -alpha.im / beta);
            let scale = c64::new(1.0, 0.0) / (alpha - beta);
            for j in 1..m {
                let z = c64::new(v_re[j], v_im[j]) * scale;
                v_re[j] = z.re;
                v_im[j] = z.im;
            }
            v_re[0] = 1.0;
            v_im[0] = 0.0;
            e[k] = beta;

            // p = tau * A22 v, accumulated as sum_j v_j * conj(row_j(A22))
            let (pr, pi) = (&mut pr[..m], &mut pi[..m]);
            pr.fill(0.0);
            pi.fill(0.0);
            for j in 0..m {
                let (sr, si) = (v_re[j], v_im[j]);
                let base = (off + j) * n + off;
                let rr = &ar[base..base + m];
                let ri = &ai[base..base + m];
                for t in 0..m {
                    pr[t] += sr * rr[t] + si * ri[t];
                    pi[t] += si * rr[t] - sr * ri[t];
                }
            }
            for t in 0..m {
                let z = tau * c64::new(pr[t], pi[t]);
                pr[t] = z.re;
                pi[t] = z.im;
            }
            // alpha = -tau/2 * p^H v
            let mut pv = c64::new(0.0, 0.0);
            for t in 0..m {
                pv += c64::new(pr[t], -pi[t]) * c64::new(v_re[t], v_im[t]);
            }
            let corr = -0.5 * tau * pv;
            let (wr, wi) = (&mut wr[..m], &mut wi[..m]);
            for t in 0..m {
                wr[t] = pr[t] + corr.re * v_re[t] - corr.im * v_im[t];
                wi[t] = pi[t] + corr.re * v_im[t] + corr.im * v_re[t];
            }
            // A22 -= v w^H + w v^H
            for i in 0..m {
                let (vri, vii, wri, wii) = (v_re[i], v_im[i], wr[i], wi[i]);
                let base = (off + i) * n + off;
                let rr = &mut ar[base..base + m];
                let ri = &mut ai[base..base + m];
                for j in 0..m {
                    rr[j] -= vri * wr[j] + vii * wi[j] + wri * v_re[j] + wii * v_im[j];
                    ri[j] -= vii * wr[j] - vri * wi[j] + wii * v_re[j] - wri * v_im[j];
                }
            }
        }
        reflectors.push(Reflector { tau, v_re, v_im });
    }
    if n > 0 {
        d[n - 1] = ar[n * n - 1];
    }
    Tridiagonal { d, e, reflectors }
}

impl Tridiagonal {
    /// Applies `Q` to a vector expressed in the tridiagonal basis.
    fn back_transform(&self, y: &[f64]) -> Vec<c64> {
        let n = y.len();
        let mut ur = y.to_vec();
        let mut ui = vec![0.0; n];
        for (k, refl) in self.reflectors.iter().enumerate().rev() {
            if refl.tau.re == 0.0 && refl.tau.im == 0.0 {
                continue;
            }
            let off = k + 1;
            let (sr, si) = (&mut ur[off..], &mut ui[off..]);
            // s = v^H u
            let mut s = c64::new(0.0, 0.0);
            for t in 0..sr.len() {
                s += c64::new(refl.v_re[t], -refl.v_im[t]) * c64::new(sr[t], si[t]);
            }
            let f = refl.tau * s;
            for t in 0..sr.len() {
                sr[t] -= f.re * refl.v_re[t] - f.im * refl.v_im[t];
                si[t] -= f.re * refl.v_im[t] + f.im * refl.v_re[t];
            }
        }
        ur.into_iter().zip(ui).map(|(r, i)| c64::new(r, i)).collect()
    }

    fn scale(&self) -> f64 {
        let n = self.d.len();
        (0..n)
            .map(|i| {
                self.d[i].abs()
                    + if i > 0 { self.e[i - 1].abs() } else { 0.0 }
                    + if i + 1 < n { self.e[i].abs() } else { 0.0 }
            })
            .fold(0.0, f64::max)
    }
}

/// Implicit QL on a symmetric tridiagonal matrix. `e[i]` couples `i` and `i+1`.
/// When `zt` is given its rows are rotated along (row `i` = i-th eigenvector).
fn tridiagonal_ql(d: &mut [f64], e_in: &[f64], mut zt: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    let mut e = e_in.to_vec();
    e.push(0.0);
    let eps = f64::EPSILON;
    let mut f = 0.0;
    // deflate against the norm of the whole matrix so graded matrices cannot stall
    let tst1 = d.iter().zip(&e).map(|(a, b)| a.abs() + b.abs()).fold(0.0f64, f64::max);
    for l in 0..n {
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_SWEEPS_PER_EIGENVALUE {
                    return Err(Error::EigenNoConvergence { dim: n });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = zt.as_deref_mut() {
                        let (lo, hi) = z.split_at_mut((i + 1) * n);
                        let zi = &mut lo[i * n..];
                        let zi1 = &mut hi[..n];
                        for k in 0..n {
                            let hk = zi1[k];
                            zi1[k] = s * zi[k] + c * hk;
                            zi[k] = c * zi[k] - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Full eigendecomposition; eigenvalues ascending.
pub fn hermitian_eig(a: &HermitianMatrix) -> Result<EigenDecomposition> {
    let n = a.dim();
    if n == 0 {
        return Ok(EigenDecomposition {
            eigenvalues: vec![],
            eigenvectors: CMatrix::zeros(0, 0),
        });
    }
    let (a, unit) = power_of_two_normalized(a);
    let tri = tridiagonalize(&a);
    let mut d = tri.d.clone();
    let mut zt = vec![0.0; n * n];
    for i in 0..n {
        zt[i * n + i] = 1.0;
    }
    tridiagonal_ql(&mut d, &tri.e, Some(&mut zt))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let mut vectors = CMatrix::zeros(n, n);
    let eigenvalues = order.iter().map(|&i| d[i] * unit).collect();
    for (col, &i) in order.iter().enumerate() {
        let u = tri.back_transform(&zt[i * n..(i + 1) * n]);
        vectors.set_column(col, &u);
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors: vectors,
    })
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues(a: &HermitianMatrix) -> Result<Vec<f64>> {
    let n = a.dim();
    if n == 0 {
        return Ok(vec![]);
    }
    let (a, unit) = power_of_two_normalized(a);
    let tri = tridiagonalize(&a);
    let mut d = tri.d;
    tridiagonal_ql(&mut d, &tri.e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d.into_iter().map(|x| x * unit).collect())
}

/// Eigenvalues of `a` (ascending) together with eigenvectors for the subset
/// of eigenvalue indices returned by `select`.
pub fn hermitian_eig_selected(
    a: &HermitianMatrix,
    select: impl FnOnce(&[f64]) -> Vec<usize>,
) -> Result<(Vec<f64>, Vec<usize>, CMatrix)> {
    let n = a.dim();
    if n == 0 {
        return Ok((vec![], vec![], CMatrix::zeros(0, 0)));
    }
    let (a, unit) = power_of_two_normalized(a);
    let tri = tridiagonalize(&a);
    let mut d = tri.d.clone();
    tridiagonal_ql(&mut d, &tri.e, None)?;
    d.sort_by(f64::total_cmp);
    let mut idx = select(&d.iter().map(|x| x * unit).collect::<Vec<_>>());
    idx.sort_unstable();
    idx.dedup();
    let lambdas: Vec<f64> = idx.iter().map(|&i| d[i]).collect();
    let ys = tridiagonal_inverse_iteration(&tri.d, &tri.e, &lambdas, tri.scale());
    let mut vectors = CMatrix::zeros(n, idx.len());
    for (col, y) in ys.iter().enumerate() {
        vectors.set_column(col, &tri.back_transform(y));
    }
    Ok((d.into_iter().map(|x| x * unit).collect(), idx, vectors))
}

/// Rescales by a power of two so the largest entry lies in [0.5, 1); exact,
/// and keeps the QL iteration clear of underflow.
fn power_of_two_normalized(a: &HermitianMatrix) -> (HermitianMatrix, f64) {
    let max = a
        .as_matrix()
        .as_slice()
        .iter()
        .map(|z| z.re.abs().max(z.im.abs()))
        .fold(0.0, f64::max);
    if max == 0.0 || !max.is_finite() {
        return (a.clone(), 1.0);
    }
    let unit = 2f64.powi((max.log2().floor() as i32 + 1).clamp(-1020, 1020));
    (a.scale(1.0 / unit), unit)
}

/// Eigenvectors of `tridiag(d, e)` for ascending `lambdas` by inverse
/// iteration, with Gram-Schmidt inside clusters of close eigenvalues.
fn tridiagonal_inverse_iteration(d: &[f64], e: &[f64], lambdas: &[f64], norm: f64) -> Vec<Vec<f64>> {
    let n = d.len();
    let eps = f64::EPSILON;
    let norm = if norm > 0.0 { norm } else { 1.0 };
    let ortol = 1e-3 * norm;
    let pertol = 10.0 * eps * norm;
    let tiny = eps * norm;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(lambdas.len());
    let mut cluster_start = 0;
    let mut prev_shift = f64::NEG_INFINITY;

    for (j, &lambda) in lambdas.iter().enumerate() {
        if j > 0 && lambda - lambdas[j - 1] > ortol {
            cluster_start = j;
        }
        let mut shift = lambda;
        if j > 0 && shift - prev_shift < pertol {
            shift = prev_shift + pertol;
        }
        prev_shift = shift;

        let lu = TridiagLu::factor(d, e, shift, tiny);
        // deterministic start vector
        let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ (j as u64 + 1).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        let mut x: Vec<f64> = (0..n)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        for _ in 0..4 {
            normalize(&mut x);
            lu.solve(&mut x);
            for prev in &out[cluster_start..j] {
                let dot: f64 = prev.iter().zip(&x).map(|(a, b)| a * b).sum();
                for (xi, pi) in x.iter_mut().zip(prev) {
                    *xi -= dot * pi;
                }
            }
        }
        normalize(&mut x);
        out.push(x);
    }
    out
}

fn normalize(x: &mut [f64]) {
    let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nrm > 0.0 && nrm.is_finite() {
        x.iter_mut().for_each(|v| *v /= nrm);
    } else {
        x.iter_mut().for_each(|v| *v = 1.0);
        let s = (x.len() as f64).sqrt();
        x.iter_mut().for_each(|v| *v /= s);
    }
}

/// LU with partial pivoting of `tridiag(d, e) - shift I`.
struct TridiagLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    l: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn factor(d: &[f64], e: &[f64], shift: f64, tiny: f64) -> Self {
        let n = d.len();
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut l = vec![0.0; n];
        let mut swapped = vec![false; n];
        let mut cur_d = d[0] - shift;
        let mut cur_s = if n > 1 { e[0] } else { 0.0 };
        for i in 0..n.saturating_sub(1) {
            let bi = e[i];
            let ai1 = d[i + 1] - shift;
            let ci1 = if i + 2 < n { e[i + 1] } else { 0.0 };
            if bi.abs() > cur_d.abs() {
                u0[i] = bi;
                u1[i] = ai1;
                u2[i] = ci1;
                swapped[i] = true;
                let m = cur_d / bi;
                l[i] = m;
                let next_d = cur_s - m * ai1;
                let next_s = -m * ci1;
                cur_d = next_d;
                cur_s = next_s;
            } else {
                if cur_d.abs() < tiny {
                    cur_d = if cur_d < 0.0 { -tiny } else { tiny };
                }
                u0[i] = cur_d;
                u1[i] = cur_s;
                u2[i] = 0.0;
                let m = bi / cur_d;
                l[i] = m;
                cur_d = ai1 - m * cur_s;
                cur_s = ci1;
            }
        }
        if cur_d.abs() < tiny {
            cur_d = if cur_d < 0.0 { -tiny } else { tiny };
        }
        u0[n - 1] = cur_d;
        Self {
            u0,
            u1,
            u2,
            l,
            swapped,
        }
    }

    fn solve(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] -= self.l[i] * x[i];
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            if i + 1 < n {
                v -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                v -= self.u2[i] * x[i + 2];
            }
            x[i] = v / self.u0[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residuals(a: &HermitianMatrix, eig: &EigenDecomposition) -> (f64, f64) {
        let rec = eig.reassemble();
        let r = rec.sub(a).frobenius_norm();
        let u = &eig.eigenvectors;
        let g = u.adjoint_matmul(u).sub(&CMatrix::identity(a.dim()));
        (r, g.frobenius_norm())
    }

    fn pseudo_random_hermitian(n: usize, seed: u64) -> HermitianMatrix {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        HermitianMatrix::from_fn(n, |_, _| c64::new(next(), next()))
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let eig = hermitian_eig(&HermitianMatrix::identity(3)).unwrap();
        for l in &eig.eigenvalues {
            assert!((l - 1.0).abs() < 1e-14);
        }
        let (r, u) = residuals(&HermitianMatrix::identity(3), &eig);
        assert!(r < 1e-12 && u < 1e-12);
    }

    #[test]
    fn diagonal_sorted_with_permutation_vectors() {
        let a = HermitianMatrix::from_diag(&[2.0, -1.0]);
        let eig = hermitian_eig(&a).unwrap();
        assert_eq!(eig.eigenvalues, vec![-1.0, 2.0]);
        assert!((eig.eigenvectors[(1, 0)].norm() - 1.0).abs() < 1e-14);
        assert!((eig.eigenvectors[(0, 1)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_matrices_meet_residual_contract() {
        for (n, seed) in [(1, 1), (2, 2), (5, 3), (17, 4), (64, 5), (131, 6)] {
            let a = pseudo_random_hermitian(n, seed);
            let eig = hermitian_eig(&a).unwrap();
            let (r, u) = residuals(&a, &eig);
            let scale = a.frobenius_norm().max(1.0);
            assert!(r <= 1e-10 * scale, "n={n} reconstruction {r}");
            assert!(u <= 1e-10, "n={n} unitarity {u}");
            assert!(eig.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eigenvalues_only_agree_with_full() {
        let a = pseudo_random_hermitian(40, 9);
        let full = hermitian_eig(&a).unwrap();
        let vals = hermitian_eigenvalues(&a).unwrap();
        for (x, y) in full.eigenvalues.iter().zip(&vals) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn selected_vectors_are_eigenvectors() {
        let a = pseudo_random_hermitian(50, 11);
        let (vals, idx, vecs) =
            hermitian_eig_selected(&a, |d| (0..d.len()).filter(|&i| d[i] > 0.0).collect()).unwrap();
        for (col, &i) in idx.iter().enumerate() {
            let v = vecs.column(col);
            let av = a.as_matrix().matvec(&v);
            let res: f64 = av
                .iter()
                .zip(&v)
                .map(|(x, y)| (x - y * vals[i]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(res < 1e-10, "residual {res}");
        }
        let g = vecs.adjoint_matmul(&vecs).sub(&CMatrix::identity(idx.len()));
        assert!(g.frobenius_norm() < 1e-10);
    }

    #[test]
    fn selected_vectors_handle_repeated_eigenvalues() {
        // diag(3, 3, 3, -1) rotated by a fixed unitary
        let q = hermitian_eig(&pseudo_random_hermitian(4, 21)).unwrap().eigenvectors;
        let d = CMatrix::from_diag(&[3.0, 3.0, 3.0, -1.0]);
        let a = HermitianMatrix::new(q.matmul(&d).matmul(&q.adjoint())).unwrap();
        let (vals, idx, vecs) =
            hermitian_eig_selected(&a, |d| (0..d.len()).filter(|&i| d[i] > 0.0).collect()).unwrap();
        assert_eq!(idx.len(), 3);
        let w: Vec<f64> = idx.iter().map(|&i| vals[i]).collect();
        let rec = HermitianMatrix::from_weighted_outer(&vecs, &w);
        let expect = a.sub(&HermitianMatrix::from_weighted_outer(&q.select_columns(&[3]), &[-1.0]));
        assert!(rec.sub(&expect).frobenius_norm() < 1e-10);
    }
}
