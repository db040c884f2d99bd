//! Vandermonde decomposition of singular PSD block-Toeplitz matrices.
//!
//! For `T(Sigma) = V V^H` of rank `r < m(n+1)`, dropping the first and the
//! last block row of `V` gives `V_{-0} = V_{-n} U` for a unitary `U`. The
//! eigenvalues `e^{i theta}` of `U` are the spectral lines, and the Gram
//! matrices of `V_0` times the matching eigenvectors are the densities:
//!
//! ```text
//! Sigma_k = sum_l e^{i k theta_l} Q_l
//! ```

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::angle::{circular_distance, wrap_angle};
use crate::error::{Error, Result};
use crate::linalg::{
    c64, hermitian_eigenvalues, rank_factorize_with_spectrum, shift_operator_schur, CMatrix, HermitianMatrix,
};
use crate::tolerances::Tolerances;
use crate::toeplitz::{assemble, CovarianceSequence};

/// One spectral line: frequency and PSD density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub theta: f64,
    pub q: CMatrix,
}

/// Spectral lines sorted by ascending frequency in `(-pi, pi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LineSpectrumWire", into = "LineSpectrumWire")]
pub struct LineSpectrum {
    m: usize,
    atoms: Vec<Atom>,
}

impl LineSpectrum {
    /// Wraps and sorts frequencies, symmetrizes densities and checks that
    /// every density is nonzero and PSD.
    pub fn new(m: usize, atoms: Vec<Atom>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("block size must be positive".into()));
        }
        let mut out = Vec::with_capacity(atoms.len());
        for (i, a) in atoms.into_iter().enumerate() {
            if a.q.rows() != m || a.q.cols() != m {
                return Err(Error::DimensionMismatch(format!(
                    "density {i} is {}x{}, expected {m}x{m}",
                    a.q.rows(),
                    a.q.cols()
                )));
            }
            if !a.theta.is_finite() {
                return Err(Error::InvalidArgument(format!("frequency {i} is not finite")));
            }
            let q = HermitianMatrix::new(a.q)?;
            let eig = hermitian_eigenvalues(&q)?;
            let top = eig.last().copied().unwrap_or(0.0);
            if top <= 0.0 {
                return Err(Error::InvalidArgument(format!("density {i} is zero")));
            }
            if eig[0] < -1e-10 * top.max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "density {i} is not PSD (eigenvalue {:e})",
                    eig[0]
                )));
            }
            out.push(Atom {
                theta: wrap_angle(a.theta),
                q: q.into_matrix(),
            });
        }
        out.sort_by(|a, b| a.theta.total_cmp(&b.theta));
        for w in out.windows(2) {
            if w[0].theta == w[1].theta {
                return Err(Error::InvalidArgument(format!("repeated frequency {}", w[0].theta)));
            }
        }
        Ok(Self { m, atoms: out })
    }

    pub fn empty(m: usize) -> Self {
        Self { m, atoms: vec![] }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.theta).collect()
    }

    /// Sum of the numerical ranks of the densities, each relative to its largest eigenvalue.
    pub fn total_rank(&self, relative: f64) -> Result<usize> {
        let mut total = 0;
        for a in &self.atoms {
            let eig = hermitian_eigenvalues(&HermitianMatrix::new(a.q.clone())?)?;
            let top = eig.last().copied().unwrap_or(0.0);
            total += eig.iter().filter(|&&l| l > relative * top).count();
        }
        Ok(total)
    }
}

/// Non-fatal findings attached to a decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecomposeWarning {
    /// An eigenvalue treated as zero lies in `(epsilon/10, epsilon]`.
    MarginalRank { eigenvalue: f64, epsilon: f64 },
    /// Block size above 2: the representation need not be unique.
    UniquenessNotGuaranteed { m: usize },
}

/// Result of [`decompose`] with diagnostics.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub spectrum: LineSpectrum,
    /// Numerical rank of `T(Sigma)`.
    pub rank: usize,
    /// Ascending eigenvalues of `T(Sigma)`.
    pub eigenvalues: Vec<f64>,
    /// `||V_{-0} - V_{-n} U|| / max(1, ||V_{-0}||)` for the recovered unitary `U`.
    pub shift_residual: f64,
    pub warnings: Vec<DecomposeWarning>,
}

impl Decomposition {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }
}

/// [`decompose_with`] using default tolerances apart from `epsilon` and `delta_theta`.
pub fn decompose(sigma: &CovarianceSequence, epsilon: f64, delta_theta: f64) -> Result<Decomposition> {
    decompose_with(
        sigma,
        &Tolerances {
            epsilon_rank: epsilon,
            delta_theta,
            ..Tolerances::DEFAULT
        },
    )
}

pub fn decompose_with(sigma: &CovarianceSequence, tol: &Tolerances) -> Result<Decomposition> {
    let m = sigma.m();
    let n = sigma.n();
    if n < 1 {
        return Err(Error::InvalidArgument("decomposition needs n >= 1".into()));
    }
    if !(tol.delta_theta >= 0.0) {
        return Err(Error::InvalidArgument("delta_theta must be nonnegative".into()));
    }
    let eps = tol.epsilon_rank;
    let t = assemble(sigma);
    let (v, eigenvalues) = rank_factorize_with_spectrum(&t, eps)?;
    let r = v.cols();
    let dim = t.dim();
    if r == dim {
        return Err(Error::InteriorPoint { rank: r });
    }

    let mut warnings = Vec::new();
    if let Some(&marginal) = eigenvalues.iter().filter(|&&l| l <= eps && l > eps / 10.0).next_back() {
        warnings.push(DecomposeWarning::MarginalRank {
            eigenvalue: marginal,
            epsilon: eps,
        });
    }
    if m > 2 {
        warnings.push(DecomposeWarning::UniquenessNotGuaranteed { m });
    }
    if r == 0 {
        return Ok(Decomposition {
            spectrum: LineSpectrum::empty(m),
            rank: 0,
            eigenvalues,
            shift_residual: 0.0,
            warnings,
        });
    }

    let v_drop_first = v.block(m, 0, m * n, r);
    let v_drop_last = v.block(0, 0, m * n, r);
    let schur = shift_operator_schur(&v_drop_last, &v_drop_first, tol.pd_relative)?;

    let mut thetas = Vec::with_capacity(r);
    for z in schur.eigenvalues() {
        let modulus = z.norm();
        if !((modulus - 1.0).abs() <= tol.unimodular) {
            return Err(Error::NonUnimodular {
                modulus,
                tolerance: tol.unimodular,
            });
        }
        thetas.push(z.arg());
    }

    // recovered unitary on the unit circle
    let u_basis = &schur.z;
    let phases = CMatrix::from_fn(r, r, |i, j| {
        if i == j {
            c64::from_polar(1.0, thetas[i])
        } else {
            c64::new(0.0, 0.0)
        }
    });
    let u = u_basis.matmul(&phases).matmul(&u_basis.adjoint());
    let shift_residual = shift_residual(&v_drop_first, &v_drop_last, &u);

    let w = v.block(0, 0, m, r).matmul(u_basis);
    let mut atoms = Vec::new();
    for cluster in cluster_angles(&thetas, tol.delta_theta) {
        let theta = circular_mean(cluster.iter().map(|&j| thetas[j]));
        let q = HermitianMatrix::from_weighted_outer(&w.select_columns(&cluster), &vec![1.0; cluster.len()]);
        atoms.push(Atom {
            theta,
            q: q.into_matrix(),
        });
    }
    atoms.sort_by(|a, b| a.theta.total_cmp(&b.theta));

    Ok(Decomposition {
        spectrum: LineSpectrum { m, atoms },
        rank: r,
        eigenvalues,
        shift_residual,
        warnings,
    })
}

/// `Sigma_k = sum_l e^{i k theta_l} Q_l` for `k = 0..=n`.
pub fn reconstruct(spec: &LineSpectrum, n: usize) -> CovarianceSequence {
    let m = spec.m;
    let blocks = (0..=n)
        .map(|k| {
            let mut acc = CMatrix::zeros(m, m);
            for a in &spec.atoms {
                acc = acc.add(&a.q.scale(c64::from_polar(1.0, k as f64 * a.theta)));
            }
            acc
        })
        .collect();
    CovarianceSequence::new(m, blocks).expect("shapes are consistent")
}

/// `||V_{-0} - V_{-n} U||_F / max(1, ||V_{-0}||_F)` for a stacked factor `V`
/// with block rows of height `m`.
pub fn unitary_residual(v: &CMatrix, u: &CMatrix, m: usize) -> Result<f64> {
    let r = v.cols();
    if m == 0 || !v.rows().is_multiple_of(m) || v.rows() < 2 * m {
        return Err(Error::DimensionMismatch(format!(
            "factor with {} rows does not hold two or more blocks of height {m}",
            v.rows()
        )));
    }
    if u.rows() != r || u.cols() != r {
        return Err(Error::DimensionMismatch(format!(
            "U must be {r}x{r}, got {}x{}",
            u.rows(),
            u.cols()
        )));
    }
    let rows = v.rows() - m;
    Ok(shift_residual(&v.block(m, 0, rows, r), &v.block(0, 0, rows, r), u))
}

fn shift_residual(v_drop_first: &CMatrix, v_drop_last: &CMatrix, u: &CMatrix) -> f64 {
    let diff = v_drop_first.sub(&v_drop_last.matmul(u));
    diff.frobenius_norm() / v_drop_first.frobenius_norm().max(1.0)
}

/// Single-linkage clusters of angles under circular distance.
fn cluster_angles(thetas: &[f64], delta: f64) -> Vec<Vec<usize>> {
    if thetas.is_empty() {
        return vec![];
    }
    let mut order: Vec<usize> = (0..thetas.len()).collect();
    order.sort_by(|&a, &b| thetas[a].total_cmp(&thetas[b]));
    let mut clusters: Vec<Vec<usize>> = vec![vec![order[0]]];
    for w in order.windows(2) {
        if thetas[w[1]] - thetas[w[0]] <= delta {
            clusters.last_mut().unwrap().push(w[1]);
        } else {
            clusters.push(vec![w[1]]);
        }
    }
    if clusters.len() > 1 {
        let first = thetas[order[0]];
        let last = thetas[*order.last().unwrap()];
        if TAU - (last - first) <= delta {
            let tail = clusters.pop().unwrap();
            clusters[0].extend(tail);
        }
    }
    clusters
}

fn circular_mean(angles: impl Iterator<Item = f64>) -> f64 {
    let s: c64 = angles.map(|t| c64::from_polar(1.0, t)).sum();
    wrap_angle(s.arg())
}

/// Largest circular distance between matched frequencies of two spectra of equal length,
/// both sorted ascending. Helper for comparisons in tests and reports.
pub fn max_frequency_gap(a: &LineSpectrum, b: &LineSpectrum) -> Option<f64> {
    (a.len() == b.len()).then(|| {
        a.atoms
            .iter()
            .zip(&b.atoms)
            .map(|(x, y)| circular_distance(x.theta, y.theta))
            .fold(0.0, f64::max)
    })
}

/// JSON layout: `{"m": int, "atoms": [{"theta": real, "Q": [[[re, im], ...], ...]}]}`.
#[derive(Serialize, Deserialize)]
struct LineSpectrumWire {
    m: usize,
    atoms: Vec<AtomWire>,
}

#[derive(Serialize, Deserialize)]
struct AtomWire {
    theta: f64,
    #[serde(rename = "Q")]
    q: Vec<Vec<c64>>,
}

impl TryFrom<LineSpectrumWire> for LineSpectrum {
    type Error = Error;

    fn try_from(w: LineSpectrumWire) -> Result<Self> {
        let m = w.m;
        let atoms = w
            .atoms
            .into_iter()
            .map(|a| {
                if a.q.len() != m || a.q.iter().any(|row| row.len() != m) {
                    return Err(Error::Format(format!("density must be {m}x{m}")));
                }
                Ok(Atom {
                    theta: a.theta,
                    q: CMatrix::from_row_major(m, m, a.q.into_iter().flatten().collect()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        LineSpectrum::new(m, atoms)
    }
}

impl From<LineSpectrum> for LineSpectrumWire {
    fn from(s: LineSpectrum) -> Self {
        Self {
            m: s.m,
            atoms: s
                .atoms
                .into_iter()
                .map(|a| AtomWire {
                    theta: a.theta,
                    q: (0..s.m).map(|i| a.q.row(i).to_vec()).collect(),
                })
                .collect(),
        }
    }
}
