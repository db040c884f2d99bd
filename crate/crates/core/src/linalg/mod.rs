//! Dense complex linear algebra used by the rest of the crate.
//!
//! Everything here is a pure function of its inputs.

mod hermitian;
mod matrix;
mod schur;

pub use hermitian::{
    hermitian_eig, hermitian_eig_selected, hermitian_eigenvalues, EigenDecomposition, HermitianMatrix,
};
pub use matrix::{c64, dotc, vec_norm, CMatrix};
pub use schur::{complex_schur, ComplexSchur};

use crate::error::{Error, Result};

/// Number of eigenvalues strictly greater than `epsilon`.
pub fn numerical_rank(eigenvalues: &[f64], epsilon: f64) -> usize {
    eigenvalues.iter().filter(|&&l| l > epsilon).count()
}

/// `T = V V^H` with `V = U_r Lambda_r^{1/2}` built from the eigenpairs above `epsilon`.
///
/// Columns are ordered by decreasing eigenvalue.
pub fn rank_factorize(t: &HermitianMatrix, epsilon: f64) -> Result<CMatrix> {
    Ok(rank_factorize_with_spectrum(t, epsilon)?.0)
}

/// Same as [`rank_factorize`], also returning the ascending spectrum.
pub fn rank_factorize_with_spectrum(t: &HermitianMatrix, epsilon: f64) -> Result<(CMatrix, Vec<f64>)> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let eig = hermitian_eig(t)?;
    if let Some(&lowest) = eig.eigenvalues.first() {
        if lowest < -epsilon {
            return Err(Error::NotPsd {
                eigenvalue: lowest,
                epsilon,
            });
        }
    }
    let n = t.dim();
    let keep: Vec<usize> = (0..n).rev().filter(|&i| eig.eigenvalues[i] > epsilon).collect();
    let mut v = eig.eigenvectors.select_columns(&keep);
    for (col, &i) in keep.iter().enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        for row in 0..n {
            v[(row, col)] *= s;
        }
    }
    Ok((v, eig.eigenvalues))
}

/// Nearest positive semidefinite matrix in Frobenius norm.
pub fn psd_project(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    Ok(psd_project_with_spectrum(a)?.0)
}

/// [`psd_project`] that also returns the ascending spectrum of `a`.
///
/// Only the eigenvectors on the smaller side of zero are computed.
pub fn psd_project_with_spectrum(a: &HermitianMatrix) -> Result<(HermitianMatrix, Vec<f64>)> {
    let mut take_positive = true;
    let (vals, idx, vecs) = hermitian_eig_selected(a, |d| {
        let pos = d.iter().filter(|&&l| l > 0.0).count();
        take_positive = 2 * pos <= d.len();
        if take_positive {
            (0..d.len()).filter(|&i| d[i] > 0.0).collect()
        } else {
            (0..d.len()).filter(|&i| d[i] < 0.0).collect()
        }
    })?;
    let w: Vec<f64> = idx.iter().map(|&i| vals[i]).collect();
    let part = HermitianMatrix::from_weighted_outer(&vecs, &w);
    let out = if take_positive { part } else { a.sub(&part) };
    Ok((out, vals))
}

/// Lower-triangular `W` with `B = W W^H`.
///
/// Fails with [`Error::SingularPencil`] unless every pivot exceeds
/// `pd_relative * trace(B) / dim`.
pub fn cholesky(b: &HermitianMatrix, pd_relative: f64) -> Result<CMatrix> {
    let n = b.dim();
    let trace: f64 = (0..n).map(|i| b[(i, i)].re).sum();
    let threshold = pd_relative * trace.max(0.0) / n.max(1) as f64;
    let mut w = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = b[(j, j)].re;
        for k in 0..j {
            diag -= w[(j, k)].norm_sqr();
        }
        if !(diag > threshold) || diag <= 0.0 {
            return Err(Error::SingularPencil {
                pivot: diag,
                threshold,
            });
        }
        let ljj = diag.sqrt();
        w[(j, j)] = c64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = b[(i, j)];
            for k in 0..j {
                s -= w[(i, k)] * w[(j, k)].conj();
            }
            w[(i, j)] = s / ljj;
        }
    }
    Ok(w)
}

/// Solves `W X = R` for lower-triangular `W`.
pub fn solve_lower(w: &CMatrix, r: &CMatrix) -> CMatrix {
    let n = w.rows();
    let mut x = r.clone();
    for col in 0..r.cols() {
        for i in 0..n {
            let mut s = x[(i, col)];
            for k in 0..i {
                s -= w[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = s / w[(i, i)];
        }
    }
    x
}

/// Solves `W^H X = R` for lower-triangular `W`.
pub fn solve_lower_adjoint(w: &CMatrix, r: &CMatrix) -> CMatrix {
    let n = w.rows();
    let mut x = r.clone();
    for col in 0..r.cols() {
        for i in (0..n).rev() {
            let mut s = x[(i, col)];
            for k in i + 1..n {
                s -= w[(k, i)].conj() * x[(k, col)];
            }
            x[(i, col)] = s / w[(i, i)].re;
        }
    }
    x
}

/// Eigenpairs of the pencil `A v = lambda B v` for Hermitian positive definite `B`.
///
/// `B = W W^H` (Cholesky) reduces the pencil to the standard problem for
/// `W^{-1} A W^{-H}`; eigenvectors are mapped back by `W^{-H}` and normalised.
/// `A` need not be Hermitian.
pub fn generalized_eig_pair(a: &CMatrix, b: &HermitianMatrix, pd_relative: f64) -> Result<(Vec<c64>, CMatrix)> {
    if !a.is_square() || a.rows() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "pencil needs square matrices of equal size, got {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.dim(),
            b.dim()
        )));
    }
    let w = cholesky(b, pd_relative)?;
    // C = W^{-1} A W^{-H}
    let left = solve_lower(&w, a);
    let c = solve_lower(&w, &left.adjoint()).adjoint();
    let schur = complex_schur(&c)?;
    let eigenvalues = schur.eigenvalues();
    let y = schur.eigenvectors();
    let mut v = solve_lower_adjoint(&w, &y);
    for j in 0..v.cols() {
        let nrm = (0..v.rows()).map(|i| v[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..v.rows() {
            v[(i, j)] /= nrm;
        }
    }
    Ok((eigenvalues, v))
}

/// Schur form of the shift operator `U` solving `V_{-n} U = V_{-0}` in the
/// least-squares sense, i.e. of `B^{-1} A` for the pencil
/// `(V_{-n}^H V_{-0}, V_{-n}^H V_{-n})`.
///
/// `V_{-n} = Q R` (Householder) whitens the pencil with `W = R^H` without
/// forming `B`, so accuracy follows the conditioning of `V_{-n}` rather than
/// its square. For a normal `U` the Schur vectors are an orthonormal
/// eigenbasis, which stays well defined when eigenvalues repeat.
pub fn shift_operator_schur(v_drop_last: &CMatrix, v_drop_first: &CMatrix, pd_relative: f64) -> Result<ComplexSchur> {
    let (rows, r) = (v_drop_last.rows(), v_drop_last.cols());
    if v_drop_first.rows() != rows || v_drop_first.cols() != r {
        return Err(Error::DimensionMismatch("shifted factors differ in shape".into()));
    }
    if rows < r {
        return Err(Error::SingularPencil {
            pivot: 0.0,
            threshold: 0.0,
        });
    }
    // reflect [V_{-n} | V_{-0}] to [R | Q^H V_{-0}] column by column
    let mut a = CMatrix::zeros(rows, 2 * r);
    a.set_block(0, 0, v_drop_last);
    a.set_block(0, r, v_drop_first);
    let trace = v_drop_last.frobenius_norm().powi(2);
    let threshold = pd_relative * trace / r.max(1) as f64;
    let mut v = vec![c64::new(0.0, 0.0); rows];
    for j in 0..r {
        let norm = (j..rows).map(|i| a[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if !(norm * norm > threshold) {
            return Err(Error::SingularPencil {
                pivot: norm * norm,
                threshold,
            });
        }
        let x0 = a[(j, j)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { c64::new(1.0, 0.0) };
        let alpha = -phase * norm;
        for i in j..rows {
            v[i] = a[(i, j)];
        }
        v[j] -= alpha;
        let vnorm2: f64 = (j..rows).map(|i| v[i].norm_sqr()).sum();
        for k in j..2 * r {
            let mut dot = c64::new(0.0, 0.0);
            for i in j..rows {
                dot += v[i].conj() * a[(i, k)];
            }
            let f = dot * (2.0 / vnorm2);
            for i in j..rows {
                let vi = v[i];
                a[(i, k)] -= vi * f;
            }
        }
    }
    // U = R^{-1} (Q^H V_{-0})
    let mut u = a.block(0, r, r, r);
    for col in 0..r {
        for i in (0..r).rev() {
            let mut s = u[(i, col)];
            for k in i + 1..r {
                s -= a[(i, k)] * u[(k, col)];
            }
            u[(i, col)] = s / a[(i, i)];
        }
    }
    complex_schur(&u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng_stream(seed: u64) -> impl FnMut() -> f64 {
        let mut s = seed ^ 0xDEAD_BEEF_CAFE_F00D;
        move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        }
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut r = rng_stream(seed);
        CMatrix::from_fn(rows, cols, |_, _| c64::new(r(), r()))
    }

    #[test]
    fn numerical_rank_examples() {
        assert_eq!(numerical_rank(&[0.0, 7.564e-8, 0.5, 1.2, 3.0, 3.1], 1e-4), 4);
        assert_eq!(numerical_rank(&[0.0; 5], 1e-4), 0);
        assert_eq!(numerical_rank(&[1e-5, 1e-3], 1e-4), 1);
    }

    #[test]
    fn rank_factorize_identity_and_rank_one() {
        let v = rank_factorize(&HermitianMatrix::identity(2), 1e-4).unwrap();
        assert_eq!(v.cols(), 2);
        let g = v.matmul(&v.adjoint()).sub(&CMatrix::identity(2));
        assert!(g.frobenius_norm() < 1e-14);

        let u = [c64::new(0.6, 0.0), c64::new(0.0, 0.8)];
        let t = HermitianMatrix::from_fn(2, |i, j| u[i] * u[j].conj());
        let v = rank_factorize(&t, 1e-4).unwrap();
        assert_eq!(v.cols(), 1);
        // V = u e^{i phi}
        let phase = v[(0, 0)] / u[0];
        assert!((phase.norm() - 1.0).abs() < 1e-12);
        for i in 0..2 {
            assert!((v[(i, 0)] - u[i] * phase).norm() < 1e-12);
        }
    }

    #[test]
    fn rank_factorize_rejects_indefinite() {
        let err = rank_factorize(&HermitianMatrix::from_diag(&[1.0, -0.5]), 1e-4).unwrap_err();
        assert!(matches!(err, Error::NotPsd { eigenvalue, .. } if (eigenvalue + 0.5).abs() < 1e-14));
    }

    #[test]
    fn psd_project_examples() {
        let p = psd_project(&HermitianMatrix::from_diag(&[1.0, -2.0])).unwrap();
        assert!(p.sub(&HermitianMatrix::from_diag(&[1.0, 0.0])).frobenius_norm() < 1e-14);

        let g = random_matrix(6, 3, 5);
        let psd = HermitianMatrix::new(g.matmul(&g.adjoint())).unwrap();
        let p = psd_project(&psd).unwrap();
        assert!(p.sub(&psd).frobenius_norm() < 1e-10);
    }

    #[test]
    fn psd_project_matches_full_decomposition() {
        for (n, seed) in [(3, 1), (10, 2), (40, 3), (131, 4)] {
            let a = HermitianMatrix::new(random_matrix(n, n, seed)).unwrap();
            let p = psd_project(&a).unwrap();
            let full = hermitian_eig(&a).unwrap().reassemble_with(|l| l.max(0.0));
            assert!(p.sub(&full).frobenius_norm() < 1e-10 * a.frobenius_norm(), "n={n}");
            // shifted so that the negative side is smaller
            let shifted = a.add(&HermitianMatrix::identity(n).scale(0.3 * (n as f64).sqrt()));
            let p = psd_project(&shifted).unwrap();
            let full = hermitian_eig(&shifted).unwrap().reassemble_with(|l| l.max(0.0));
            assert!(p.sub(&full).frobenius_norm() < 1e-10 * shifted.frobenius_norm(), "n={n} shifted");
        }
    }

    #[test]
    fn generalized_pair_reductions() {
        let i3 = HermitianMatrix::identity(3);
        let (vals, _) = generalized_eig_pair(i3.as_matrix(), &i3, 1e-10).unwrap();
        for l in vals {
            assert!((l - c64::new(1.0, 0.0)).norm() < 1e-14);
        }
        let a = HermitianMatrix::new(random_matrix(4, 4, 8)).unwrap();
        let (vals, _) = generalized_eig_pair(a.as_matrix(), &HermitianMatrix::identity(4), 1e-10).unwrap();
        let mut got: Vec<f64> = vals.iter().map(|z| z.re).collect();
        got.sort_by(f64::total_cmp);
        let want = hermitian_eig(&a).unwrap().eigenvalues;
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_operator_matches_pencil() {
        let v = random_matrix(8, 3, 12);
        let u_true = hermitian_eig(&HermitianMatrix::new(random_matrix(3, 3, 13)).unwrap())
            .unwrap()
            .eigenvectors;
        let shifted = v.matmul(&u_true);
        let schur = shift_operator_schur(&v, &shifted, 1e-10).unwrap();
        let u = schur.z.matmul(&schur.t).matmul(&schur.z.adjoint());
        assert!(u.sub(&u_true).frobenius_norm() < 1e-12);

        let b = HermitianMatrix::new(v.adjoint_matmul(&v)).unwrap();
        let (mut a_vals, _) = generalized_eig_pair(&v.adjoint_matmul(&shifted), &b, 1e-10).unwrap();
        let mut s_vals = schur.eigenvalues();
        a_vals.sort_by(|x, y| x.arg().total_cmp(&y.arg()));
        s_vals.sort_by(|x, y| x.arg().total_cmp(&y.arg()));
        for (x, y) in a_vals.iter().zip(&s_vals) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn shift_operator_rejects_rank_deficient_factor() {
        let col = random_matrix(6, 1, 4);
        let mut v = CMatrix::zeros(6, 2);
        v.set_block(0, 0, &col);
        v.set_block(0, 1, &col);
        assert!(matches!(
            shift_operator_schur(&v, &v, 1e-10),
            Err(Error::SingularPencil { .. })
        ));
    }

    #[test]
    fn generalized_pair_rejects_singular_b() {
        let b = HermitianMatrix::from_diag(&[1.0, 0.0]);
        let err = generalized_eig_pair(b.as_matrix(), &b, 1e-10).unwrap_err();
        assert!(matches!(err, Error::SingularPencil { .. }));
    }
}
