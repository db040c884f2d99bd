//! Hermitian block-Toeplitz matrices built from a covariance sequence.
//!
//! The sequence `Sigma_0, ..., Sigma_n` of `m x m` blocks is the canonical
//! representation; lags `-k` are implied as `Sigma_k^H` and never stored.
//! The assembled `m(n+1) x m(n+1)` matrix has block `(j, k)` equal to
//! `Sigma_{j-k}` below the diagonal and `Sigma_{k-j}^H` above it.

use serde::{Deserialize, Serialize};

use crate::angle::wrap_angle;
use crate::error::{Error, Result};
use crate::linalg::{c64, hermitian_eigenvalues, numerical_rank, CMatrix, HermitianMatrix};

/// Covariance blocks `Sigma_0..=Sigma_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CovarianceSequenceWire", into = "CovarianceSequenceWire")]
pub struct CovarianceSequence {
    m: usize,
    blocks: Vec<CMatrix>,
}

impl CovarianceSequence {
    /// Validates block shapes and symmetrizes `Sigma_0`.
    pub fn new(m: usize, mut blocks: Vec<CMatrix>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("block size must be positive".into()));
        }
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("covariance sequence needs at least Sigma_0".into()));
        }
        for (k, b) in blocks.iter().enumerate() {
            if b.rows() != m || b.cols() != m {
                return Err(Error::DimensionMismatch(format!(
                    "block {k} is {}x{}, expected {m}x{m}",
                    b.rows(),
                    b.cols()
                )));
            }
        }
        blocks[0] = HermitianMatrix::new(blocks[0].clone())?.into_matrix();
        Ok(Self { m, blocks })
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            m,
            blocks: vec![CMatrix::zeros(m, m); n + 1],
        }
    }

    /// Block size.
    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    /// Largest lag.
    #[inline]
    pub fn n(&self) -> usize {
        self.blocks.len() - 1
    }

    #[inline]
    pub fn block(&self, k: usize) -> &CMatrix {
        &self.blocks[k]
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    /// Dimension of the assembled matrix.
    pub fn dim(&self) -> usize {
        self.m * self.blocks.len()
    }

    /// `Sigma_k -> e^{i k phi} Sigma_k`, i.e. every spectral line shifted by `phi`.
    pub fn modulate(&self, phi: f64) -> Self {
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(k, b)| b.scale(c64::from_polar(1.0, k as f64 * phi)))
            .collect();
        Self { m: self.m, blocks }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            m: self.m,
            blocks: self.blocks.iter().map(|b| b.scale(c64::new(s, 0.0))).collect(),
        }
    }

    /// Largest Frobenius distance between corresponding blocks.
    pub fn max_block_distance(&self, other: &CovarianceSequence) -> f64 {
        assert_eq!((self.m, self.n()), (other.m, other.n()));
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.sub(b).frobenius_norm())
            .fold(0.0, f64::max)
    }

    /// `Sigma_0, ..., Sigma_{n-1}`.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            m: self.m,
            blocks: self.blocks[..=n].to_vec(),
        }
    }
}

/// Builds the Hermitian block-Toeplitz matrix `T(Sigma)`.
pub fn assemble(sigma: &CovarianceSequence) -> HermitianMatrix {
    let m = sigma.m;
    let p = sigma.blocks.len();
    let dim = m * p;
    let mut t = CMatrix::zeros(dim, dim);
    for bj in 0..p {
        for bk in 0..=bj {
            let blk = &sigma.blocks[bj - bk];
            for r in 0..m {
                for c in 0..m {
                    let v = blk[(r, c)];
                    t[(bj * m + r, bk * m + c)] = v;
                    t[(bk * m + c, bj * m + r)] = v.conj();
                }
            }
        }
    }
    HermitianMatrix::new(t).expect("square by construction")
}

/// Orthogonal projection onto Hermitian block-Toeplitz matrices: `Sigma_k` is
/// the average of the blocks on the k-th block subdiagonal.
pub fn toeplitz_project(mat: &HermitianMatrix, m: usize) -> Result<CovarianceSequence> {
    let dim = mat.dim();
    if m == 0 || dim == 0 || !dim.is_multiple_of(m) {
        return Err(Error::DimensionMismatch(format!(
            "matrix dimension {dim} is not a positive multiple of block size {m}"
        )));
    }
    let p = dim / m;
    let mut blocks = Vec::with_capacity(p);
    for k in 0..p {
        let count = (p - k) as f64;
        let mut acc = CMatrix::zeros(m, m);
        for j in 0..p - k {
            for r in 0..m {
                for c in 0..m {
                    acc[(r, c)] += mat[((j + k) * m + r, j * m + c)];
                }
            }
        }
        blocks.push(acc.scale(c64::new(1.0 / count, 0.0)));
    }
    CovarianceSequence::new(m, blocks)
}

/// `g(theta) = (1, e^{i theta}, ..., e^{i n theta})`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    theta: f64,
    entries: Vec<c64>,
}

impl SteeringVector {
    pub fn new(theta: f64, n: usize) -> Self {
        let theta = wrap_angle(theta);
        let entries = (0..=n).map(|t| c64::from_polar(1.0, t as f64 * theta)).collect();
        Self { theta, entries }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn entries(&self) -> &[c64] {
        &self.entries
    }
}

/// `G(theta) = g(theta) kron I_m`, an `m(n+1) x m` matrix.
pub fn steering_block(theta: f64, n: usize, m: usize) -> CMatrix {
    let g = SteeringVector::new(theta, n);
    let mut out = CMatrix::zeros(m * (n + 1), m);
    for (t, &z) in g.entries().iter().enumerate() {
        for i in 0..m {
            out[(t * m + i, i)] = z;
        }
    }
    out
}

/// PSD status, numerical rank and smallest eigenvalue of `T(Sigma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryReport {
    pub is_psd: bool,
    pub rank: usize,
    pub min_eig: f64,
    pub dim: usize,
}

impl BoundaryReport {
    /// PSD and singular: the sequence sits on the boundary of the moment cone.
    pub fn on_boundary(&self) -> bool {
        self.is_psd && self.rank < self.dim
    }
}

pub fn boundary_check(sigma: &CovarianceSequence, epsilon: f64) -> Result<BoundaryReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let eig = hermitian_eigenvalues(&assemble(sigma))?;
    let min_eig = eig.first().copied().unwrap_or(0.0);
    Ok(BoundaryReport {
        is_psd: min_eig >= -epsilon,
        rank: numerical_rank(&eig, epsilon),
        min_eig,
        dim: sigma.dim(),
    })
}

/// JSON layout: `{"m": int, "n": int, "blocks": [[[re, im], ...], ...]}` with
/// each block flattened row-major.
#[derive(Serialize, Deserialize)]
struct CovarianceSequenceWire {
    m: usize,
    n: usize,
    blocks: Vec<Vec<c64>>,
}

impl TryFrom<CovarianceSequenceWire> for CovarianceSequence {
    type Error = Error;

    fn try_from(w: CovarianceSequenceWire) -> Result<Self> {
        if w.blocks.len() != w.n + 1 {
            return Err(Error::Format(format!(
                "expected n + 1 = {} blocks, found {}",
                w.n + 1,
                w.blocks.len()
            )));
        }
        let blocks = w
            .blocks
            .into_iter()
            .enumerate()
            .map(|(k, b)| {
                if b.len() != w.m * w.m {
                    return Err(Error::Format(format!(
                        "block {k} has {} entries, expected {}",
                        b.len(),
                        w.m * w.m
                    )));
                }
                Ok(CMatrix::from_row_major(w.m, w.m, b))
            })
            .collect::<Result<Vec<_>>>()?;
        CovarianceSequence::new(w.m, blocks)
    }
}

impl From<CovarianceSequence> for CovarianceSequenceWire {
    fn from(s: CovarianceSequence) -> Self {
        Self {
            m: s.m,
            n: s.n(),
            blocks: s.blocks.iter().map(|b| b.as_slice().to_vec()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cm(m: usize, vals: &[(f64, f64)]) -> CMatrix {
        CMatrix::from_row_major(m, m, vals.iter().map(|&(r, i)| c64::new(r, i)).collect())
    }

    #[test]
    fn identity_blocks_assemble_to_identity() {
        let s = CovarianceSequence::new(2, vec![CMatrix::identity(2), CMatrix::zeros(2, 2)]).unwrap();
        assert_eq!(assemble(&s).into_matrix(), CMatrix::identity(4));
    }

    #[test]
    fn layout_places_adjoint_above_diagonal() {
        let a = cm(2, &[(1.0, 2.0), (3.0, -1.0), (0.5, 0.0), (-2.0, 4.0)]);
        let s = CovarianceSequence::new(2, vec![CMatrix::identity(2), a.clone()]).unwrap();
        let t = assemble(&s);
        assert_eq!(t.as_matrix().block(2, 0, 2, 2), a);
        assert_eq!(t.as_matrix().block(0, 2, 2, 2), a.adjoint());
        assert_eq!(t.as_matrix().block(0, 0, 2, 2), CMatrix::identity(2));
        assert_eq!(t.as_matrix().block(2, 2, 2, 2), CMatrix::identity(2));
    }

    #[test]
    fn single_atom_matches_outer_product() {
        let (theta, n) = (0.7, 3);
        let q = cm(2, &[(2.0, 0.0), (0.5, 0.25), (0.5, -0.25), (1.0, 0.0)]);
        let blocks = (0..=n).map(|k| q.scale(c64::from_polar(1.0, k as f64 * theta))).collect();
        let s = CovarianceSequence::new(2, blocks).unwrap();
        let g = steering_block(theta, n, 2);
        let direct = g.matmul(&q).matmul(&g.adjoint());
        assert!(assemble(&s).as_matrix().sub(&direct).frobenius_norm() < 1e-13);
    }

    #[test]
    fn projection_fixes_toeplitz_and_averages_diagonals() {
        let a = cm(2, &[(1.0, 2.0), (3.0, -1.0), (0.5, 0.0), (-2.0, 4.0)]);
        let s = CovarianceSequence::new(2, vec![cm(2, &[(3.0, 0.0), (1.0, 1.0), (1.0, -1.0), (2.0, 0.0)]), a])
            .unwrap();
        let t = assemble(&s);
        let back = toeplitz_project(&t, 2).unwrap();
        assert!(back.max_block_distance(&s) < 1e-14);

        let e11 = HermitianMatrix::from_diag(&[1.0, 0.0]);
        let p = toeplitz_project(&e11, 1).unwrap();
        assert!((p.block(0)[(0, 0)] - c64::new(0.5, 0.0)).norm() < 1e-15);
        assert!(p.block(1)[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn projection_rejects_bad_block_size() {
        assert!(matches!(
            toeplitz_project(&HermitianMatrix::identity(5), 2),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn steering_block_special_angles() {
        let g0 = steering_block(0.0, 2, 2);
        for t in 0..3 {
            assert_eq!(g0.block(2 * t, 0, 2, 2), CMatrix::identity(2));
        }
        let gpi = steering_block(PI, 1, 2);
        assert_eq!(gpi.block(0, 0, 2, 2), CMatrix::identity(2));
        assert!(gpi.block(2, 0, 2, 2).add(&CMatrix::identity(2)).frobenius_norm() < 1e-15);
    }

    #[test]
    fn boundary_examples() {
        let s = CovarianceSequence::new(2, vec![CMatrix::identity(2)]).unwrap();
        let r = boundary_check(&s, 1e-4).unwrap();
        assert!(r.is_psd && r.rank == 2 && (r.min_eig - 1.0).abs() < 1e-14);
        assert!(!r.on_boundary());

        let u = [c64::new(0.6, 0.0), c64::new(0.0, 0.8)];
        let q = CMatrix::from_fn(2, 2, |i, j| u[i] * u[j].conj());
        let blocks = (0..4).map(|k| q.scale(c64::from_polar(1.0, 0.3 * k as f64))).collect();
        let r = boundary_check(&CovarianceSequence::new(2, blocks).unwrap(), 1e-4).unwrap();
        assert!(r.is_psd && r.rank == 1 && r.on_boundary());

        let s = CovarianceSequence::new(2, vec![CMatrix::from_diag(&[1.0, -1.0])]).unwrap();
        assert!(!boundary_check(&s, 1e-4).unwrap().is_psd);
    }

    #[test]
    fn json_layout() {
        let s = CovarianceSequence::new(
            2,
            vec![CMatrix::identity(2), cm(2, &[(0.0, 1.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)])],
        )
        .unwrap();
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        assert_eq!(v["m"], 2);
        assert_eq!(v["n"], 1);
        assert_eq!(v["blocks"][1][0], serde_json::json!([0.0, 1.0]));
        assert_eq!(v["blocks"][0][3], serde_json::json!([1.0, 0.0]));
        let back: CovarianceSequence = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);

        let bad = serde_json::json!({"m": 2, "n": 1, "blocks": [[[1.0, 0.0]]]});
        assert!(serde_json::from_value::<CovarianceSequence>(bad).is_err());
    }
}
