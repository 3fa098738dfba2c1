//! Dense complex LU factorisation with partial pivoting.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("singular matrix: zero pivot at step {step} (pivot ratio {condition:e})")]
    Singular { step: usize, condition: f64 },
    #[error("right-hand side has length {got}, expected {expected}")]
    Length { expected: usize, got: usize },
}

/// `P A = L U` stored compactly in row-major order.
#[derive(Debug, Clone)]
pub struct ComplexLu {
    n: usize,
    lu: Vec<Complex64>,
    perm: Vec<usize>,
    odd_swaps: bool,
}

impl ComplexLu {
    pub fn factor(a: &DMatrix<Complex64>) -> Result<Self, LinalgError> {
        let (r, c) = a.shape();
        if r != c {
            return Err(LinalgError::NotSquare(r, c));
        }
        let mut data = Vec::with_capacity(r * r);
        for i in 0..r {
            for j in 0..r {
                data.push(a[(i, j)]);
            }
        }
        Self::factor_row_major(r, data)
    }

    pub fn factor_row_major(n: usize, mut lu: Vec<Complex64>) -> Result<Self, LinalgError> {
        if lu.len() != n * n {
            return Err(LinalgError::Length { expected: n * n, got: lu.len() });
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut odd_swaps = false;
        let mut max_pivot: f64 = 0.0;
        for k in 0..n {
            let (p, pmag) = (k..n)
                .map(|i| (i, lu[i * n + k].norm_sqr()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmag == 0.0 || !pmag.is_finite() {
                return Err(LinalgError::Singular { step: k, condition: f64::INFINITY });
            }
            max_pivot = max_pivot.max(pmag.sqrt());
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                odd_swaps = !odd_swaps;
            }
            let inv = 1.0 / lu[k * n + k];
            let (head, tail) = lu.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n..];
            for row in tail.chunks_exact_mut(n) {
                let factor = row[k] * inv;
                row[k] = factor;
                if factor != Complex64::new(0.0, 0.0) {
                    for j in k + 1..n {
                        row[j] -= factor * pivot_row[j];
                    }
                }
            }
        }
        let min_pivot = (0..n).map(|k| lu[k * n + k].norm()).fold(f64::INFINITY, f64::min);
        if n > 0 && min_pivot <= max_pivot * f64::EPSILON * 1e-3 {
            let step = (0..n).find(|&k| lu[k * n + k].norm() == min_pivot).unwrap_or(0);
            return Err(LinalgError::Singular { step, condition: max_pivot / min_pivot });
        }
        Ok(Self { n, lu, perm, odd_swaps })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Ratio of largest to smallest pivot modulus; a cheap conditioning hint.
    pub fn pivot_ratio(&self) -> f64 {
        let mags: Vec<f64> = (0..self.n).map(|k| self.lu[k * self.n + k].norm()).collect();
        let max = mags.iter().cloned().fold(0.0, f64::max);
        let min = mags.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) -> Result<(), LinalgError> {
        let n = self.n;
        if b.len() != n {
            return Err(LinalgError::Length { expected: n, got: b.len() });
        }
        let permuted: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        b.copy_from_slice(&permuted);
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: Complex64 = row.iter().zip(&b[..i]).map(|(l, x)| l * x).sum();
            b[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: Complex64 = row.iter().zip(&b[i + 1..]).map(|(u, x)| u * x).sum();
            b[i] = (b[i] - s) / self.lu[i * n + i];
        }
        Ok(())
    }

    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// Column `k` of the inverse.
    pub fn inverse_column(&self, k: usize) -> Vec<Complex64> {
        let mut e = vec![Complex64::new(0.0, 0.0); self.n];
        e[k] = Complex64::new(1.0, 0.0);
        self.solve_in_place(&mut e).expect("length matches by construction");
        e
    }

    pub fn inverse(&self) -> DMatrix<Complex64> {
        let mut inv = DMatrix::zeros(self.n, self.n);
        for k in 0..self.n {
            let col = self.inverse_column(k);
            for (i, v) in col.into_iter().enumerate() {
                inv[(i, k)] = v;
            }
        }
        inv
    }

    pub fn trace_inverse(&self) -> Complex64 {
        (0..self.n).map(|k| self.inverse_column(k)[k]).sum()
    }

    /// `log det A` with the imaginary part accumulated from each pivot's
    /// principal argument (not reduced mod 2π).
    pub fn log_det(&self) -> Complex64 {
        let mut acc: Complex64 = (0..self.n).map(|k| self.lu[k * self.n + k].ln()).sum();
        if self.odd_swaps {
            acc += Complex64::new(0.0, std::f64::consts::PI);
        }
        acc
    }

    pub fn det(&self) -> Complex64 {
        self.log_det().exp()
    }
}

/// `Tr A⁻¹`.
pub fn trace_inverse(a: &DMatrix<Complex64>) -> Result<Complex64, LinalgError> {
    Ok(ComplexLu::factor(a)?.trace_inverse())
}

/// Smallest eigenvalue of the Hermitian part `(A + A*)/2`.
pub fn min_hermitian_part_eigenvalue(a: &DMatrix<Complex64>) -> f64 {
    let herm = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    herm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(
            3,
            3,
            &[c(0.0, 1.0), c(2.0, 0.0), c(1.0, -1.0), c(3.0, 0.5), c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0), c(0.5, 2.0), c(4.0, 0.0)],
        )
    }

    #[test]
    fn matches_nalgebra_determinant_and_inverse() {
        let a = sample();
        let lu = ComplexLu::factor(&a).unwrap();
        let det_ref = a.clone().lu().determinant();
        assert!((lu.det() - det_ref).norm() < 1e-12 * det_ref.norm());
        let inv = lu.inverse();
        let id = &a * &inv;
        assert!((id - DMatrix::identity(3, 3)).norm() < 1e-13);
        let tr: Complex64 = a.clone().try_inverse().unwrap().diagonal().iter().sum();
        assert!((lu.trace_inverse() - tr).norm() < 1e-13);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
        assert!(matches!(ComplexLu::factor(&a), Err(LinalgError::Singular { .. })));
        let z = DMatrix::<Complex64>::zeros(2, 2);
        assert!(matches!(ComplexLu::factor(&z), Err(LinalgError::Singular { step: 0, .. })));
    }

    #[test]
    fn non_square_rejected() {
        assert_eq!(
            ComplexLu::factor(&DMatrix::<Complex64>::zeros(2, 3)).unwrap_err(),
            LinalgError::NotSquare(2, 3)
        );
    }

    #[test]
    fn log_det_of_large_diagonal_does_not_overflow() {
        let a = DMatrix::from_diagonal_element(400, 400, c(10.0, 0.0));
        let ld = ComplexLu::factor(&a).unwrap().log_det();
        assert!((ld.re - 400.0 * 10f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn hermitian_part_eigenvalue() {
        let a = DMatrix::from_row_slice(2, 2, &[c(2.0, 5.0), c(0.0, 1.0), c(0.0, 1.0), c(3.0, -1.0)]);
        assert!((min_hermitian_part_eigenvalue(&a) - 2.0).abs() < 1e-12);
    }
}
