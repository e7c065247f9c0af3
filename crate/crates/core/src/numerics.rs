//! Dense linear algebra for the trainers.
//!
//! Everything here is naive and dense: the largest systems are the RBF
//! design matrix (a few thousand rows by about twenty columns) and the MLP
//! normal equations (a few dozen unknowns). Storage is backed by
//! `nalgebra`; the public surface speaks in row-major terms.

use std::ops::Index;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense real matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix(DMatrix<f64>);

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Matrix(DMatrix::identity(n, n))
    }

    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Matrix(DMatrix::from_row_slice(rows, cols, data)))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Matrix(DMatrix::from_fn(rows, cols, f))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.0[(row, col)] = value;
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        self.0.row(row).iter().copied().collect()
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.0.column(col).iter().copied().collect()
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix(self.0.transpose())
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn as_nalgebra(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn from_nalgebra(inner: DMatrix<f64>) -> Self {
        Matrix(inner)
    }

    pub fn into_nalgebra(self) -> DMatrix<f64> {
        self.0
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, index: (usize, usize)) -> &f64 {
        &self.0[index]
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.rows() {
        return Err(Error::Shape(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(Matrix(&a.0 * &b.0))
}

/// Solves `(A + jitter*I) x = b` for symmetric positive-definite `A` by
/// Cholesky factorization.
///
/// When the factorization fails the jitter is raised tenfold (starting from
/// `1e-12 * trace/n` if zero was requested) until it would exceed
/// `1e-3 * trace/n`, at which point the matrix is reported as not positive
/// definite.
pub fn solve_spd(a: &Matrix, b: &[f64], jitter: f64) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape(format!("{}x{} is not square", n, a.cols())));
    }
    if b.len() != n {
        return Err(Error::Shape(format!(
            "right-hand side has length {}, expected {n}",
            b.len()
        )));
    }
    if !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(Error::InvalidArgument(format!("jitter must be >= 0, got {jitter}")));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale = a.max_abs();
    if !scale.is_finite() || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite system".into()));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (a.0[(i, j)] - a.0[(j, i)]).abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::InvalidArgument(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }

    let mean_diag = a.trace() / n as f64;
    let cap = 1e-3 * mean_diag;
    let rhs = DVector::from_column_slice(b);
    let mut current = jitter;
    loop {
        let mut shifted = a.0.clone();
        for i in 0..n {
            shifted[(i, i)] += current;
        }
        if let Some(chol) = shifted.cholesky() {
            let x = chol.solve(&rhs);
            if x.iter().all(|v| v.is_finite()) {
                return Ok(x.as_slice().to_vec());
            }
        }
        let next = if current == 0.0 {
            1e-12 * mean_diag
        } else {
            current * 10.0
        };
        if !(next > 0.0) || next > cap {
            return Err(Error::Numerical(format!(
                "matrix is not positive definite (jitter reached {current:e})"
            )));
        }
        current = next;
    }
}

/// Minimizes `||A X - B||_F` column by column.
///
/// Householder QR is used when `R` has no negligible diagonal entry; a
/// rank-deficient or wide `A` falls back to the jittered normal equations,
/// which pick a near minimum-norm solution.
pub fn least_squares(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let (m, n) = (a.rows(), a.cols());
    if b.rows() != m {
        return Err(Error::Shape(format!(
            "right-hand side has {} rows, expected {m}",
            b.rows()
        )));
    }
    if n == 0 {
        return Ok(Matrix::zeros(0, b.cols()));
    }

    let qr = a.0.clone().qr();
    let r = qr.r();
    let n_diag = n.min(m);
    let max_diag = (0..n_diag).map(|i| r[(i, i)].abs()).fold(0.0_f64, f64::max);
    let min_diag = (0..n_diag).map(|i| r[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if m >= n && max_diag > 0.0 && min_diag > max_diag * (m as f64) * f64::EPSILON {
        let qtb = qr.q().tr_mul(&b.0);
        if let Some(x) = r.solve_upper_triangular(&qtb) {
            if x.iter().all(|v| v.is_finite()) {
                return Ok(Matrix(x));
            }
        }
    }

    // Rank deficient: regularized normal equations.
    let ata = Matrix(a.0.tr_mul(&a.0));
    let atb = a.0.tr_mul(&b.0);
    let seed = f64::EPSILON * ata.trace().max(f64::MIN_POSITIVE);
    let mut x = DMatrix::zeros(n, b.cols());
    for col in 0..b.cols() {
        let rhs: Vec<f64> = atb.column(col).iter().copied().collect();
        let sol = solve_spd(&ata, &rhs, seed)
            .map_err(|e| Error::Numerical(format!("rank-deficient least squares: {e}")))?;
        x.set_column(col, &DVector::from_vec(sol));
    }
    Ok(Matrix(x))
}

/// Central-difference Jacobian: entry `(i, j)` is
/// `(f_i(x + h e_j) - f_i(x - h e_j)) / 2h`.
pub fn finite_difference_jacobian<F>(f: F, x: &[f64], h: f64) -> Result<Matrix>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be > 0, got {h}")));
    }
    let mut probe = x.to_vec();
    let mut columns = Vec::with_capacity(x.len());
    let mut outputs = None;
    for j in 0..x.len() {
        probe[j] = x[j] + h;
        let plus = f(&probe);
        probe[j] = x[j] - h;
        let minus = f(&probe);
        probe[j] = x[j];
        if plus.len() != minus.len() || outputs.is_some_and(|m| m != plus.len()) {
            return Err(Error::Shape("function output length changed".into()));
        }
        outputs = Some(plus.len());
        if plus.iter().chain(&minus).any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite function value while perturbing coordinate {j}"
            )));
        }
        columns.push(
            plus.iter()
                .zip(&minus)
                .map(|(p, m)| (p - m) / (2.0 * h))
                .collect::<Vec<_>>(),
        );
    }
    let rows = outputs.unwrap_or_else(|| f(x).len());
    Ok(Matrix::from_fn(rows, x.len(), |i, j| columns[j][i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn naive_matmul(a: &Matrix, b: &Matrix) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; b.cols()]; a.rows()];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                for k in 0..a.cols() {
                    *cell += a.get(i, k) * b.get(k, j);
                }
            }
        }
        out
    }

    #[test]
    fn from_row_slice_is_row_major() {
        let m = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.get(0, 2), 3.0);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.to_row_major(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(Matrix::from_row_slice(2, 2, &[1.0, f64::NAN, 0.0, 1.0]).is_err());
        assert!(matches!(
            Matrix::from_row_slice(2, 2, &[1.0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn matmul_identity_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(&mut rng, 3, 4);
        assert_eq!(matmul(&Matrix::identity(3), &a).unwrap(), a);
        let z = matmul(&a, &Matrix::zeros(4, 2)).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_matrix(&mut rng, 2, 3);
        let b = random_matrix(&mut rng, 3, 2);
        let c = matmul(&a, &b).unwrap();
        let oracle = naive_matmul(&a, &b);
        for i in 0..2 {
            for j in 0..2 {
                assert!((c.get(i, j) - oracle[i][j]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn matmul_shape_error() {
        let a = Matrix::zeros(2, 3);
        assert!(matches!(matmul(&a, &a), Err(Error::Shape(_))));
    }

    #[test]
    fn matmul_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (p, q, r, s) = (
                rng.gen_range(1..6),
                rng.gen_range(1..6),
                rng.gen_range(1..6),
                rng.gen_range(1..6),
            );
            let a = random_matrix(&mut rng, p, q);
            let b = random_matrix(&mut rng, q, r);
            let c = random_matrix(&mut rng, r, s);
            let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
            let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
            let scale = left.max_abs().max(1.0);
            for i in 0..p {
                for j in 0..s {
                    assert!((left.get(i, j) - right.get(i, j)).abs() <= 1e-9 * scale);
                }
            }
        }
    }

    #[test]
    fn solve_spd_identity_and_diagonal() {
        let b = [0.3, -2.0, 7.5];
        assert_eq!(solve_spd(&Matrix::identity(3), &b, 0.0).unwrap(), b.to_vec());
        let d = Matrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]).unwrap();
        let x = solve_spd(&d, &[8.0, 27.0], 0.0).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15 && (x[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn solve_spd_residual_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [1, 2, 5, 12, 26] {
            let m = random_matrix(&mut rng, n, n);
            let mut a = matmul(&m.transpose(), &m).unwrap();
            for i in 0..n {
                a.set(i, i, a.get(i, i) + 1.0);
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let x = solve_spd(&a, &b, 0.0).unwrap();
            let ax = a.as_nalgebra() * DVector::from_vec(x);
            let res: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(res <= 1e-9 * norm, "n={n} residual {res}");
        }
    }

    #[test]
    fn solve_spd_rescues_semidefinite_with_jitter() {
        // rank one: [1 1; 1 1]
        let a = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        let x = solve_spd(&a, &[2.0, 2.0], 0.0).unwrap();
        assert!(x.iter().all(|v| v.is_finite()));
        let indefinite = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]).unwrap();
        assert!(matches!(
            solve_spd(&indefinite, &[1.0, 1.0], 0.0),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn solve_spd_rejects_asymmetric() {
        let a = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]).unwrap();
        assert!(matches!(
            solve_spd(&a, &[1.0, 1.0], 0.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn least_squares_square_system_is_exact() {
        let a = Matrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]).unwrap();
        let b = Matrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]).unwrap();
        let x = least_squares(&a, &b).unwrap();
        let ax = matmul(&a, &x).unwrap();
        for i in 0..3 {
            assert!((ax.get(i, 0) - b.get(i, 0)).abs() < 1e-10);
        }
    }

    #[test]
    fn least_squares_recovers_consistent_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 40, 6);
        let x0 = random_matrix(&mut rng, 6, 3);
        let b = matmul(&a, &x0).unwrap();
        let x = least_squares(&a, &b).unwrap();
        for i in 0..6 {
            for j in 0..3 {
                let rel = (x.get(i, j) - x0.get(i, j)).abs() / x0.max_abs();
                assert!(rel <= 1e-9, "rel error {rel}");
            }
        }
    }

    #[test]
    fn least_squares_residual_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_matrix(&mut rng, 50, 7);
        let b = random_matrix(&mut rng, 50, 2);
        let x = least_squares(&a, &b).unwrap();
        let ax = matmul(&a, &x).unwrap();
        let r = Matrix::from_fn(50, 2, |i, j| ax.get(i, j) - b.get(i, j));
        let g = matmul(&a.transpose(), &r).unwrap();
        assert!(g.max_abs() <= 1e-8 * a.max_abs() * b.max_abs() * 50.0);
    }

    #[test]
    fn least_squares_handles_duplicate_columns() {
        let a = Matrix::from_row_slice(4, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0]).unwrap();
        let b = Matrix::from_row_slice(4, 1, &[2.0, 4.0, 6.0, 8.0]).unwrap();
        let x = least_squares(&a, &b).unwrap();
        let fit = matmul(&a, &x).unwrap();
        for i in 0..4 {
            assert!((fit.get(i, 0) - b.get(i, 0)).abs() < 1e-6);
        }
        let x = least_squares(&Matrix::zeros(1, 2), &Matrix::zeros(1, 1)).unwrap();
        assert_eq!(x.to_row_major(), vec![0.0, 0.0]);
    }

    #[test]
    fn least_squares_wide_system_fits_exactly() {
        let a = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 0.5, -1.0, 0.0, 3.0]).unwrap();
        let b = Matrix::from_row_slice(2, 1, &[4.0, -2.0]).unwrap();
        let x = least_squares(&a, &b).unwrap();
        let fit = matmul(&a, &x).unwrap();
        for i in 0..2 {
            assert!((fit.get(i, 0) - b.get(i, 0)).abs() < 1e-6);
        }
    }

    #[test]
    fn fd_jacobian_of_linear_map() {
        let m = Matrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 3.0, 0.0, -1.0]).unwrap();
        let f = |x: &[f64]| {
            (0..2)
                .map(|i| (0..3).map(|j| m.get(i, j) * x[j]).sum())
                .collect::<Vec<f64>>()
        };
        let j = finite_difference_jacobian(f, &[0.2, 1.0, -3.0], 1e-3).unwrap();
        for i in 0..2 {
            for k in 0..3 {
                assert!((j.get(i, k) - m.get(i, k)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn fd_jacobian_of_square() {
        let j = finite_difference_jacobian(|x| vec![x[0] * x[0]], &[3.0], 1e-5).unwrap();
        assert!((j.get(0, 0) - 6.0).abs() < 1e-9);
    }

    #[test]
    fn fd_jacobian_errors() {
        assert!(finite_difference_jacobian(|x| x.to_vec(), &[1.0], 0.0).is_err());
        let r = finite_difference_jacobian(|x| vec![(x[0] - 1.0).sqrt()], &[1.0], 1e-3);
        assert!(matches!(r, Err(Error::Numerical(_))));
    }
}
