use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specline::linalg::{c64, CMatrix, HermitianMatrix};
use specline::toeplitz::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn random_sequence(m: usize, n: usize, rng: &mut ChaCha8Rng) -> CovarianceSequence {
    let blocks = (0..=n)
        .map(|_| CMatrix::from_fn(m, m, |_, _| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)))
        .collect();
    CovarianceSequence::new(m, blocks).unwrap()
}

fn random_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
    HermitianMatrix::new(CMatrix::from_fn(dim, dim, |_, _| {
        c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    }))
    .unwrap()
}

fn projector(a: &HermitianMatrix, m: usize) -> HermitianMatrix {
    assemble(&toeplitz_project(a, m).unwrap())
}

/// Least-squares fit over a real basis of Hermitian block-Toeplitz matrices,
/// solved with normal equations.
fn least_squares_toeplitz(a: &HermitianMatrix, m: usize, p: usize) -> HermitianMatrix {
    let mut basis = Vec::new();
    for k in 0..p {
        for r in 0..m {
            for c in 0..m {
                if k == 0 && c < r {
                    continue;
                }
                let parts: &[c64] = if k == 0 && r == c {
                    &[c64::new(1.0, 0.0)]
                } else {
                    &[c64::new(1.0, 0.0), c64::new(0.0, 1.0)]
                };
                for &z in parts {
                    let mut blocks = vec![CMatrix::zeros(m, m); p];
                    blocks[k][(r, c)] = z;
                    if k == 0 {
                        blocks[0][(c, r)] = z.conj();
                    }
                    basis.push(assemble(&CovarianceSequence::new(m, blocks).unwrap()));
                }
            }
        }
    }
    let d = basis.len();
    let mut gram = vec![vec![0.0; d + 1]; d];
    for i in 0..d {
        for j in 0..d {
            gram[i][j] = basis[i].inner(&basis[j]);
        }
        gram[i][d] = basis[i].inner(a);
    }
    // Gauss-Jordan on the augmented normal equations
    for col in 0..d {
        let piv = (col..d).max_by(|&x, &y| gram[x][col].abs().total_cmp(&gram[y][col].abs())).unwrap();
        gram.swap(col, piv);
        for row in 0..d {
            if row != col {
                let f = gram[row][col] / gram[col][col];
                for k in col..=d {
                    gram[row][k] -= f * gram[col][k];
                }
            }
        }
    }
    let mut out = HermitianMatrix::zeros(a.dim());
    for i in 0..d {
        out = out.add(&basis[i].scale(gram[i][d] / gram[i][i]));
    }
    out
}

#[test]
fn scalar_corner_example() {
    let mut e = CMatrix::zeros(2, 2);
    e[(0, 0)] = c64::new(1.0, 0.0);
    let s = toeplitz_project(&HermitianMatrix::new(e).unwrap(), 1).unwrap();
    assert!((s.block(0)[(0, 0)] - c64::new(0.5, 0.0)).norm() < 1e-15);
    assert_eq!(s.block(1)[(0, 0)], c64::new(0.0, 0.0));
}

#[test]
fn steering_block_columns_are_orthogonal() {
    for (theta, n) in [(0.3, 5), (-2.9, 12), (1.0, 0)] {
        let g = steering_block(theta, n, 2);
        let gram = g.adjoint().matmul(&g);
        let want = CMatrix::identity(2).scale(c64::new((n + 1) as f64, 0.0));
        assert!(gram.sub(&want).frobenius_norm() < 1e-12);
        let v = SteeringVector::new(theta, n);
        assert!(v.entries().iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
    }
}

#[test]
fn projection_is_least_squares_minimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for p in [1, 2, 3] {
        let a = random_hermitian(2 * p, &mut rng);
        let fast = projector(&a, 2);
        let oracle = least_squares_toeplitz(&a, 2, p);
        assert!(fast.sub(&oracle).frobenius_norm() < 1e-12, "p={p}");
        // any other structured matrix is farther away
        for _ in 0..20 {
            let other = assemble(&random_sequence(2, p - 1, &mut rng));
            assert!(a.sub(&fast).frobenius_norm() <= a.sub(&other).frobenius_norm() + 1e-14);
        }
    }
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn projection_inverts_assembly(m in 1usize..4, n in 0usize..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_sequence(m, n, &mut rng);
        let t = assemble(&s);
        prop_assert_eq!(t.as_matrix().hermitian_defect(), 0.0);
        let back = toeplitz_project(&t, m).unwrap();
        prop_assert!(back.max_block_distance(&s) <= 1e-14);
    }

    #[test]
    fn projector_is_idempotent_and_self_adjoint(m in 1usize..4, p in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_hermitian(m * p, &mut rng);
        let b = random_hermitian(m * p, &mut rng);
        let pa = projector(&a, m);
        prop_assert!(projector(&pa, m).sub(&pa).frobenius_norm() <= 1e-14);
        let lhs = pa.inner(&b);
        let rhs = a.inner(&projector(&b, m));
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }
}

#[test]
fn json_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = random_sequence(2, 3, &mut rng);
    let text = serde_json::to_string(&s).unwrap();
    let back: CovarianceSequence = serde_json::from_str(&text).unwrap();
    assert_eq!(back, s);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["n"], 3);
    assert_eq!(v["blocks"].as_array().unwrap().len(), 4);
    assert_eq!(v["blocks"][1].as_array().unwrap().len(), 4);
}
