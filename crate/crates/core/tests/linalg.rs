use fcresnet_admm::linalg::{flops, kernel, spd_solve, LinalgError, Matrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn triple_loop(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a.get(i, k) * b.get(k, j);
            }
            c.set(i, j, s);
        }
    }
    c
}

/// Gaussian elimination with partial pivoting on the augmented system.
fn gauss_solve(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.rows();
    let m = b.cols();
    let mut aug: Vec<Vec<f64>> = (0..n)
        .map(|r| a.row(r).iter().chain(b.row(r)).copied().collect())
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| aug[x][col].abs().total_cmp(&aug[y][col].abs())).unwrap();
        aug.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = aug[r][col] / aug[col][col];
                for c in col..n + m {
                    aug[r][c] -= f * aug[col][c];
                }
            }
        }
    }
    Matrix::from_fn(n, m, |r, c| aug[r][n + c] / aug[r][r])
}

fn spd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let v = rand_matrix(rng, n, n + 2);
    let mut a = v.matmul_t(&v).unwrap();
    a.add_diag(0.5);
    a
}

#[test]
fn matmul_examples() {
    let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
    assert_eq!(Matrix::identity(2).matmul(&a).unwrap(), a);
    let b = Matrix::from_rows(&[&[0.0], &[1.0]]).unwrap();
    assert_eq!(a.matmul(&b).unwrap(), Matrix::from_rows(&[&[2.0], &[4.0]]).unwrap());
}

#[test]
fn matmul_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = rand_matrix(&mut rng, 3, 4);
    let b = rand_matrix(&mut rng, 4, 2);
    let c = a.matmul(&b).unwrap();
    assert!(c.max_abs_diff(&triple_loop(&a, &b)).unwrap() < 1e-14);
    let ct = a.transpose().t_matmul(&b).unwrap();
    assert!(ct.max_abs_diff(&c).unwrap() < 1e-14);
    let cn = a.matmul_t(&b.transpose()).unwrap();
    assert!(cn.max_abs_diff(&c).unwrap() < 1e-14);
}

#[test]
fn matmul_shape_error() {
    let err = Matrix::zeros(2, 3).matmul(&Matrix::zeros(2, 3)).unwrap_err();
    assert!(matches!(err, LinalgError::Shape { op: "matmul", .. }));
}

#[test]
fn seq_and_par_kernels_are_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = rand_matrix(&mut rng, 64, 300);
    let bt = rand_matrix(&mut rng, 70, 300);
    assert_eq!(kernel::matmul_seq(&a, &bt), kernel::matmul_par(&a, &bt));
}

#[test]
fn matmul_counts_schoolbook_ops() {
    let a = Matrix::zeros(3, 4);
    let b = Matrix::zeros(4, 5);
    let (_, ops) = flops::measure(|| a.matmul(&b).unwrap());
    assert_eq!(ops, 3 * 5 * 7);
}

#[test]
fn spd_solve_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b = rand_matrix(&mut rng, 3, 2);
    assert_eq!(spd_solve(&Matrix::identity(3), &b).unwrap(), b);
    let x = spd_solve(&Matrix::scalar(2.0), &Matrix::scalar(4.0)).unwrap();
    assert_eq!(x.get(0, 0), 2.0);
}

#[test]
fn spd_solve_matches_gaussian_elimination() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 1..6 {
        let v = rand_matrix(&mut rng, n, 1);
        let mut a = v.matmul_t(&v).unwrap().scale(1.7);
        a.add_diag(0.3);
        let b = rand_matrix(&mut rng, n, 3);
        let x = spd_solve(&a, &b).unwrap();
        assert!(x.max_abs_diff(&gauss_solve(&a, &b)).unwrap() < 1e-10);
        let resid = a.matmul(&x).unwrap().sub(&b).unwrap().frob_norm();
        assert!(resid <= 1e-10 * (1.0 + b.frob_norm()));
    }
}

#[test]
fn spd_solve_names_failing_pivot() {
    let a = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
    match spd_solve(&a, &Matrix::identity(2)) {
        Err(LinalgError::NotPositiveDefinite { pivot, value }) => {
            assert_eq!(pivot, 1);
            assert!(value <= 0.0);
        }
        other => panic!("expected pivot failure, got {other:?}"),
    }
    let asym = Matrix::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]).unwrap();
    assert!(matches!(spd_solve(&asym, &Matrix::identity(2)), Err(LinalgError::NotSymmetric { .. })));
}

#[test]
fn elementwise_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = rand_matrix(&mut rng, 3, 4);
    assert_eq!(a.hadamard(&Matrix::filled(3, 4, 1.0)).unwrap(), a);
    assert_eq!(Matrix::from_rows(&[&[3.0, 4.0]]).unwrap().frob_norm(), 5.0);
    assert_eq!(a.transpose().transpose(), a);
    let b = rand_matrix(&mut rng, 3, 4);
    let c = a.axpy(2.0, &b).unwrap();
    assert_eq!(c.get(1, 2), 2.0 * a.get(1, 2) + b.get(1, 2));
    assert!(a.hadamard(&Matrix::zeros(4, 3)).is_err());
}

#[test]
fn from_vec_rejects_bad_input() {
    assert!(matches!(Matrix::from_vec(2, 2, vec![1.0; 3]), Err(LinalgError::Length { .. })));
    assert!(matches!(
        Matrix::from_vec(1, 2, vec![1.0, f64::NAN]),
        Err(LinalgError::NonFinite { row: 0, col: 1 })
    ));
}

proptest! {
    #[test]
    fn spd_round_trip(seed in 0u64..1000, n in 1usize..=16, m in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = spd(&mut rng, n);
        let x = rand_matrix(&mut rng, n, m);
        let back = spd_solve(&a, &a.matmul(&x).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&x).unwrap() <= 1e-9 * (1.0 + x.max_abs()));
    }

    #[test]
    fn matmul_is_associative(seed in 0u64..1000, p in 1usize..6, q in 1usize..6, r in 1usize..6, s in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rand_matrix(&mut rng, p, q);
        let b = rand_matrix(&mut rng, q, r);
        let c = rand_matrix(&mut rng, r, s);
        let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
        let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right).unwrap() <= 1e-12 * (1.0 + left.max_abs()));
    }

    #[test]
    fn frob_norm_is_trace_inner_product(seed in 0u64..1000, p in 1usize..6, q in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rand_matrix(&mut rng, p, q);
        let trace: f64 = {
            let g = a.matmul_t(&a).unwrap();
            (0..p).map(|i| g.get(i, i)).sum()
        };
        prop_assert!((a.frob_norm().powi(2) - a.inner(&a).unwrap()).abs() < 1e-12);
        prop_assert!((a.inner(&a).unwrap() - trace).abs() < 1e-12);
    }
}
