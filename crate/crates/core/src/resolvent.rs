//! Green's functions, determinant-ratio generating function and density of
//! states for a fixed Hamiltonian.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::Hamiltonian;
use crate::linalg::{ComplexLu, LinalgError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResolventError {
    #[error("regularisation ε must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("energy parameters must be finite")]
    NonFinite,
    #[error("entry ({0}, {1}) out of range")]
    EntryOutOfRange(usize, usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Energy `E`, optional second energy `Ẽ`, regularisation `ε` and coupling `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralProbe {
    pub energy: f64,
    pub energy_tilde: Option<f64>,
    pub epsilon: f64,
    pub lambda: f64,
}

impl SpectralProbe {
    pub fn new(energy: f64, epsilon: f64, lambda: f64) -> Self {
        Self { energy, energy_tilde: None, epsilon, lambda }
    }

    pub fn with_tilde(mut self, energy_tilde: f64) -> Self {
        self.energy_tilde = Some(energy_tilde);
        self
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.energy, self.epsilon)
    }

    fn check(&self) -> Result<(), ResolventError> {
        if !(self.energy.is_finite() && self.epsilon.is_finite() && self.lambda.is_finite()) {
            return Err(ResolventError::NonFinite);
        }
        if self.epsilon <= 0.0 {
            return Err(ResolventError::NonPositiveEpsilon(self.epsilon));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreenResult {
    pub trace: Complex64,
    /// Requested entries `(j, k, G_jk)`.
    pub entries: Vec<(usize, usize, Complex64)>,
    pub log_det: Complex64,
}

impl GreenResult {
    pub fn abs_sq(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.2.norm_sqr()).collect()
    }
}

/// `z·I - H` as a complex matrix.
pub fn shifted(h: &DMatrix<f64>, z: Complex64) -> DMatrix<Complex64> {
    let n = h.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let base = Complex64::new(-h[(i, j)], 0.0);
        if i == j {
            base + z
        } else {
            base
        }
    })
}

fn factor(h: &Hamiltonian, z: Complex64) -> Result<ComplexLu, ResolventError> {
    Ok(ComplexLu::factor(&shifted(&h.matrix, z))?)
}

/// `G(z) = (z - H)⁻¹` at `z = E + iε`: trace, selected entries, log-determinant.
pub fn green(h: &Hamiltonian, probe: &SpectralProbe, entries: &[(usize, usize)]) -> Result<GreenResult, ResolventError> {
    probe.check()?;
    let n = h.dim();
    if let Some(&(j, k)) = entries.iter().find(|(j, k)| *j >= n || *k >= n) {
        return Err(ResolventError::EntryOutOfRange(j, k));
    }
    let lu = factor(h, probe.z())?;
    let mut trace = Complex64::new(0.0, 0.0);
    let mut found = vec![Complex64::new(0.0, 0.0); entries.len()];
    for col in 0..n {
        let g = lu.inverse_column(col);
        trace += g[col];
        for (slot, &(j, k)) in found.iter_mut().zip(entries) {
            if k == col {
                *slot = g[j];
            }
        }
    }
    Ok(GreenResult {
        trace,
        entries: entries.iter().zip(found).map(|(&(j, k), g)| (j, k, g)).collect(),
        log_det: lu.log_det(),
    })
}

/// Full resolvent matrix `(z - H)⁻¹` for an arbitrary non-real `z`.
pub fn resolvent_matrix(h: &Hamiltonian, z: Complex64) -> Result<DMatrix<Complex64>, ResolventError> {
    Ok(factor(h, z)?.inverse())
}

/// `𝒢 = det((E+iε) - H) / det((Ẽ+iε) - H)`, evaluated in log space.
pub fn gen_function(h: &Hamiltonian, energy: f64, energy_tilde: f64, epsilon: f64) -> Result<Complex64, ResolventError> {
    SpectralProbe::new(energy, epsilon, 0.0).with_tilde(energy_tilde).check()?;
    let num = factor(h, Complex64::new(energy, epsilon))?.log_det();
    let den = factor(h, Complex64::new(energy_tilde, epsilon))?.log_det();
    Ok((num - den).exp())
}

/// `ρ(E) = -(πN)⁻¹ Im Tr G(E + iε)` on a grid.
pub fn dos_curve(h: &Hamiltonian, grid: &[f64], epsilon: f64) -> Result<Vec<f64>, ResolventError> {
    let n = h.dim() as f64;
    grid.iter()
        .map(|&e| {
            let g = green(h, &SpectralProbe::new(e, epsilon, h.lambda), &[])?;
            Ok(-g.trace.im / (PI * n))
        })
        .collect()
}

/// Eigenvalues of the real symmetric `H`, ascending.
pub fn eig_spectrum(h: &Hamiltonian) -> Vec<f64> {
    let mut e: Vec<f64> = h.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// `Σ_k (z - e_k)⁻¹` from a precomputed spectrum.
pub fn trace_from_spectrum(eigenvalues: &[f64], z: Complex64) -> Complex64 {
    eigenvalues.iter().map(|&e| 1.0 / (z - e)).sum()
}

/// `Π_k (z - e_k)/(z̃ - e_k)` from a precomputed spectrum.
pub fn gen_function_from_spectrum(eigenvalues: &[f64], z: Complex64, z_tilde: Complex64) -> Complex64 {
    let log: Complex64 = eigenvalues.iter().map(|&e| ((z - e) / (z_tilde - e)).ln()).sum();
    log.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Boundary, Lattice, LatticeSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ring4() -> Hamiltonian {
        Lattice::new(LatticeSpec::new(1, 4, Boundary::Periodic)).unwrap().laplacian()
    }

    fn single(v: f64) -> Hamiltonian {
        Lattice::new(LatticeSpec::new(1, 1, Boundary::Restriction)).unwrap().assemble(1.0, &[v]).unwrap()
    }

    #[test]
    fn scalar_green_function() {
        let g = green(&single(0.0), &SpectralProbe::new(0.0, 1.0, 1.0), &[(0, 0)]).unwrap();
        assert!((g.trace - c(0.0, -1.0)).norm() < 1e-15);
        assert_eq!(g.abs_sq(), vec![1.0]);
    }

    #[test]
    fn ring_trace_matches_fourier_modes() {
        let g = green(&ring4(), &SpectralProbe::new(0.0, 1.0, 0.0), &[]).unwrap();
        // eigenvalues 2 - 2cos(2πk/4)
        let oracle: Complex64 = (0..4)
            .map(|k| 1.0 / (c(0.0, 1.0) - (2.0 - 2.0 * (2.0 * PI * k as f64 / 4.0).cos())))
            .sum();
        assert!((g.trace - oracle).norm() < 1e-14);
    }

    #[test]
    fn green_is_symmetric() {
        let lat = Lattice::new(LatticeSpec::new(1, 5, Boundary::Restriction)).unwrap();
        let h = lat.assemble(1.0, &[0.3, -1.0, 2.0, 0.0, 0.7]).unwrap();
        let g = green(&h, &SpectralProbe::new(0.4, 0.2, 1.0), &[(0, 3), (3, 0)]).unwrap();
        assert!((g.entries[0].2 - g.entries[1].2).norm() < 1e-14);
    }

    #[test]
    fn epsilon_must_be_positive() {
        assert!(matches!(
            green(&single(0.0), &SpectralProbe::new(0.0, 0.0, 1.0), &[]),
            Err(ResolventError::NonPositiveEpsilon(_))
        ));
        assert!(green(&single(0.0), &SpectralProbe::new(0.0, 1.0, 1.0), &[(1, 0)]).is_err());
    }

    #[test]
    fn generating_function_examples() {
        let h = single(0.0);
        assert!((gen_function(&h, 0.3, 0.3, 0.5).unwrap() - 1.0).norm() < 1e-15);
        let (e, et, eps) = (0.3, -1.2, 0.5);
        let expected = c(e, eps) / c(et, eps);
        assert!((gen_function(&h, e, et, eps).unwrap() - expected).norm() < 1e-15);
    }

    #[test]
    fn generating_function_derivative_is_trace() {
        let h = ring4();
        let (e, eps, step) = (0.7, 0.3, 1e-5);
        let fd = -(gen_function(&h, e, e + step, eps).unwrap() - gen_function(&h, e, e - step, eps).unwrap()) / (2.0 * step);
        let tr = green(&h, &SpectralProbe::new(e, eps, 0.0), &[]).unwrap().trace;
        assert!((fd - tr).norm() / tr.norm() < 1e-8);
    }

    #[test]
    fn lorentzian_dos_integrates_to_one() {
        let h = single(0.0);
        let grid: Vec<f64> = (0..=10_000).map(|i| -50.0 + 0.01 * i as f64).collect();
        let rho = dos_curve(&h, &grid, 1.0).unwrap();
        for (&e, &r) in grid.iter().zip(&rho).step_by(997) {
            assert!((r - 1.0 / (PI * (e * e + 1.0))).abs() < 1e-15);
        }
        let integral: f64 = rho.windows(2).map(|w| 0.005 * (w[0] + w[1])).sum();
        // tails beyond ±50 carry 2·atan(1/50)/π ≈ 0.0127
        let tails = 1.0 - 2.0 * (1.0f64 / 50.0).atan() / PI;
        assert!((integral - tails).abs() < 1e-3);
        assert!(rho.iter().all(|&r| r > 0.0));
    }

    #[test]
    fn spectrum_examples() {
        let e = eig_spectrum(&ring4());
        for (a, b) in e.iter().zip([0.0, 2.0, 2.0, 4.0]) {
            assert!((a - b).abs() < 1e-13);
        }
        let diag = Hamiltonian {
            matrix: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -1.0, 2.0])),
            lambda: 1.0,
            bc: Boundary::Restriction,
            realization: None,
        };
        assert_eq!(eig_spectrum(&diag), vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn spectral_shortcuts_agree_with_lu() {
        let lat = Lattice::new(LatticeSpec::new(2, 3, Boundary::Periodic)).unwrap();
        let v: Vec<f64> = (0..9).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let h = lat.assemble(0.8, &v).unwrap();
        let spec = eig_spectrum(&h);
        let z = c(0.5, 0.2);
        let g = green(&h, &SpectralProbe::new(0.5, 0.2, 0.8), &[]).unwrap();
        assert!((trace_from_spectrum(&spec, z) - g.trace).norm() < 1e-11);
        let gf = gen_function(&h, 0.5, 1.5, 0.2).unwrap();
        assert!((gen_function_from_spectrum(&spec, z, c(1.5, 0.2)) - gf).norm() < 1e-10 * gf.norm());
    }
}
