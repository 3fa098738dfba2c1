//! Cauchy random potentials `V = T W` with linear correlation structures and
//! counter-based random streams.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::lattice::Lattice;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DisorderError {
    #[error("quantile argument {0} outside (0, 1)")]
    Domain(f64),
    #[error("correlation matrix must be square with {expected} rows, got {rows}x{cols}")]
    Shape { expected: usize, rows: usize, cols: usize },
    #[error("correlation matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("column {0} of the correlation matrix does not have a positive sum")]
    NonPositiveColumn(usize),
    #[error("correlation matrix has a negative entry at ({0}, {1})")]
    NegativeEntry(usize, usize),
    #[error("toymodel requires 0 <= δ < 1, got {0}")]
    BadDelta(f64),
    #[error("toymodel sites {0} and {1} are not nearest neighbours")]
    NotNeighbors(usize, usize),
    #[error("model is defined for {expected} sites, asked for {got}")]
    SiteCount { expected: usize, got: usize },
}

/// Inverse CDF of the standard Cauchy law, `tan(π(u - ½))`.
pub fn cauchy_quantile(u: f64) -> Result<f64, DisorderError> {
    if !(u > 0.0 && u < 1.0) {
        return Err(DisorderError::Domain(u));
    }
    Ok((PI * (u - 0.5)).tan())
}

/// Characteristic function of the standard Cauchy law, `e^{-|t|}`.
pub fn cauchy_char(t: f64) -> f64 {
    (-t.abs()).exp()
}

/// Deterministic random stream addressed by `(seed, stream, counter)`.
///
/// The counter is the ChaCha word position, so the draw sequence of a stream
/// depends only on the triple, never on which thread consumes it.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self::at(seed, stream, 0)
    }

    pub fn at(seed: u64, stream: u64, counter: u128) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng.set_word_pos(counter);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Uniform draw in the open interval (0, 1) with 53 random bits.
    pub fn uniform_open(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn cauchy(&mut self) -> f64 {
        cauchy_quantile(self.uniform_open()).expect("uniform_open never hits 0 or 1")
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// Correlation structure of `V_j = Σ_k T_jk W_k` with i.i.d. standard Cauchy `W`.
#[derive(Debug, Clone, PartialEq)]
pub enum DisorderModel {
    /// `T = I`.
    Iid,
    /// Dense symmetric `T` with positive column sums.
    Correlated { t: DMatrix<f64> },
    /// `T = I` except `T_{i₁i₂} = T_{i₂i₁} = -δ²` on one nearest-neighbour pair.
    Toymodel { delta: f64, pair: (usize, usize) },
}

impl DisorderModel {
    pub fn correlated(t: DMatrix<f64>) -> Result<Self, DisorderError> {
        let (r, c) = t.shape();
        if r != c {
            return Err(DisorderError::Shape { expected: r, rows: r, cols: c });
        }
        for i in 0..r {
            for j in 0..i {
                if (t[(i, j)] - t[(j, i)]).abs() > 1e-14 * (1.0 + t[(i, j)].abs()) {
                    return Err(DisorderError::NotSymmetric(i, j));
                }
            }
        }
        for k in 0..c {
            if !(t.column(k).sum() > 0.0) {
                return Err(DisorderError::NonPositiveColumn(k));
            }
        }
        Ok(Self::Correlated { t })
    }

    /// Correlated model that additionally requires `T_jk >= 0`.
    pub fn nonnegative(t: DMatrix<f64>) -> Result<Self, DisorderError> {
        if let Some(idx) = t.iter().position(|&x| x < 0.0) {
            return Err(DisorderError::NegativeEntry(idx % t.nrows(), idx / t.nrows()));
        }
        Self::correlated(t)
    }

    /// `T = I + coupling·A` with `A` the nearest-neighbour adjacency.
    pub fn nearest_neighbor(lattice: &Lattice, coupling: f64) -> Result<Self, DisorderError> {
        let n = lattice.num_sites();
        let t = DMatrix::identity(n, n) + lattice.adjacency() * coupling;
        Self::correlated(t)
    }

    pub fn toymodel(lattice: &Lattice, delta: f64, pair: (usize, usize)) -> Result<Self, DisorderError> {
        if !(0.0..1.0).contains(&delta) {
            return Err(DisorderError::BadDelta(delta));
        }
        if !lattice.are_neighbors(pair.0, pair.1) {
            return Err(DisorderError::NotNeighbors(pair.0, pair.1));
        }
        Ok(Self::Toymodel { delta, pair })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Iid => "iid",
            Self::Correlated { .. } => "correlated",
            Self::Toymodel { .. } => "toymodel",
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match self {
            Self::Iid => true,
            Self::Correlated { t } => t.iter().all(|&x| x >= 0.0),
            Self::Toymodel { delta, .. } => *delta == 0.0,
        }
    }

    fn check_sites(&self, n: usize) -> Result<(), DisorderError> {
        match self {
            Self::Correlated { t } if t.nrows() != n => {
                Err(DisorderError::SiteCount { expected: t.nrows(), got: n })
            }
            Self::Toymodel { pair, .. } if pair.0.max(pair.1) >= n => {
                Err(DisorderError::SiteCount { expected: pair.0.max(pair.1) + 1, got: n })
            }
            _ => Ok(()),
        }
    }

    /// Dense `T`, mainly for tests and diagnostics.
    pub fn matrix(&self, n: usize) -> Result<DMatrix<f64>, DisorderError> {
        self.check_sites(n)?;
        Ok(match self {
            Self::Iid => DMatrix::identity(n, n),
            Self::Correlated { t } => t.clone(),
            Self::Toymodel { delta, pair } => {
                let mut t = DMatrix::identity(n, n);
                t[(pair.0, pair.1)] = -delta * delta;
                t[(pair.1, pair.0)] = -delta * delta;
                t
            }
        })
    }

    /// Diagonal of `T̂`, `T̂_jj = Σ_k T_jk`.
    pub fn row_sums(&self, n: usize) -> Result<Vec<f64>, DisorderError> {
        self.check_sites(n)?;
        Ok(match self {
            Self::Iid => vec![1.0; n],
            Self::Correlated { t } => t.row_iter().map(|r| r.sum()).collect(),
            Self::Toymodel { delta, pair } => {
                let mut s = vec![1.0; n];
                s[pair.0] -= delta * delta;
                s[pair.1] -= delta * delta;
                s
            }
        })
    }

    /// Apply `T` to a vector of i.i.d. draws.
    pub fn apply(&self, w: &[f64]) -> Result<Vec<f64>, DisorderError> {
        let n = w.len();
        self.check_sites(n)?;
        Ok(match self {
            Self::Iid => w.to_vec(),
            Self::Correlated { t } => (t * nalgebra::DVector::from_column_slice(w)).as_slice().to_vec(),
            Self::Toymodel { delta, pair } => {
                let mut v = w.to_vec();
                let d2 = delta * delta;
                v[pair.0] = w[pair.0] - d2 * w[pair.1];
                v[pair.1] = w[pair.1] - d2 * w[pair.0];
                v
            }
        })
    }

    /// Draw `V = T W` for `n` sites from the stream.
    pub fn sample_potential(&self, n: usize, rng: &mut RngStream) -> Result<Vec<f64>, DisorderError> {
        let w: Vec<f64> = (0..n).map(|_| rng.cauchy()).collect();
        self.apply(&w)
    }

    /// `E[exp(i Σ_j V_j s_j)] = exp(-Σ_k |Σ_j T_jk s_j|)`.
    pub fn joint_fourier(&self, s: &[f64]) -> Result<f64, DisorderError> {
        let n = s.len();
        self.check_sites(n)?;
        let exponent: f64 = match self {
            Self::Iid => s.iter().map(|x| x.abs()).sum(),
            Self::Correlated { t } => (0..n).map(|k| t.column(k).iter().zip(s).map(|(a, b)| a * b).sum::<f64>().abs()).sum(),
            Self::Toymodel { delta, pair } => {
                let d2 = delta * delta;
                let mut total: f64 = s.iter().map(|x| x.abs()).sum();
                total -= s[pair.0].abs() + s[pair.1].abs();
                total += (s[pair.0] - d2 * s[pair.1]).abs() + (s[pair.1] - d2 * s[pair.0]).abs();
                total
            }
        };
        Ok((-exponent).exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Boundary, LatticeSpec};

    #[test]
    fn quantile_values() {
        assert_eq!(cauchy_quantile(0.5).unwrap(), 0.0);
        assert!((cauchy_quantile(0.75).unwrap() - 1.0).abs() < 1e-15);
        // tan(0.4π) = sqrt(5 + 2 sqrt 5)
        let oracle = (5.0 + 2.0 * 5f64.sqrt()).sqrt();
        assert!((cauchy_quantile(0.9).unwrap() - oracle).abs() < 1e-13);
        assert!((oracle - 3.077_683_537_175_253_4).abs() < 1e-14);
        assert!(cauchy_quantile(0.0).is_err());
        assert!(cauchy_quantile(1.0).is_err());
        assert!(cauchy_quantile(f64::NAN).is_err());
    }

    #[test]
    fn characteristic_function() {
        assert_eq!(cauchy_char(0.0), 1.0);
        assert_eq!(cauchy_char(1.0), (-1.0f64).exp());
        assert_eq!(cauchy_char(-2.0), (-2.0f64).exp());
    }

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let a: Vec<f64> = (0..5).map({
            let mut r = RngStream::new(7, 3);
            move |_| r.cauchy()
        }).collect();
        let b: Vec<f64> = (0..5).map({
            let mut r = RngStream::new(7, 3);
            move |_| r.cauchy()
        }).collect();
        let c: Vec<f64> = (0..5).map({
            let mut r = RngStream::new(7, 4);
            move |_| r.cauchy()
        }).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn counter_addresses_the_sequence() {
        let mut r = RngStream::new(11, 0);
        r.next_u64();
        r.next_u64();
        let third = r.next_u64();
        let mut jumped = RngStream::at(11, 0, 4);
        assert_eq!(jumped.next_u64(), third);
    }

    #[test]
    fn toymodel_potential_example() {
        let lat = Lattice::new(LatticeSpec::new(1, 4, Boundary::Restriction)).unwrap();
        let m = DisorderModel::toymodel(&lat, 0.5, (0, 1)).unwrap();
        assert_eq!(m.apply(&[1.0, 1.0, 0.0, 3.0]).unwrap(), vec![0.75, 0.75, 0.0, 3.0]);
        assert!(DisorderModel::toymodel(&lat, 0.5, (0, 2)).is_err());
        assert!(DisorderModel::toymodel(&lat, 1.0, (0, 1)).is_err());
    }

    #[test]
    fn scaled_identity_doubles_potential() {
        let m = DisorderModel::nonnegative(DMatrix::identity(3, 3) * 2.0).unwrap();
        assert_eq!(m.apply(&[1.0, -2.0, 0.5]).unwrap(), vec![2.0, -4.0, 1.0]);
    }

    #[test]
    fn correlated_validation() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert_eq!(DisorderModel::correlated(asym).unwrap_err(), DisorderError::NotSymmetric(1, 0));
        let neg = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, -2.0, 1.0]);
        assert_eq!(DisorderModel::correlated(neg.clone()).unwrap_err(), DisorderError::NonPositiveColumn(0));
        assert!(DisorderModel::nonnegative(neg).is_err());
    }

    #[test]
    fn joint_fourier_examples() {
        assert!((DisorderModel::Iid.joint_fourier(&[1.0, 1.0]).unwrap() - (-2.0f64).exp()).abs() < 1e-16);
        let lat = Lattice::new(LatticeSpec::new(1, 3, Boundary::Restriction)).unwrap();
        let toy = DisorderModel::toymodel(&lat, 0.5, (0, 1)).unwrap();
        assert!((toy.joint_fourier(&[1.0, 0.0, 0.0]).unwrap() - (-1.25f64).exp()).abs() < 1e-15);
        assert_eq!(toy.joint_fourier(&[0.0; 3]).unwrap(), 1.0);
    }

    #[test]
    fn row_sums_match_dense_matrix() {
        let lat = Lattice::new(LatticeSpec::new(1, 5, Boundary::Periodic)).unwrap();
        for model in [
            DisorderModel::Iid,
            DisorderModel::nearest_neighbor(&lat, 0.5).unwrap(),
            DisorderModel::toymodel(&lat, 0.3, (1, 2)).unwrap(),
        ] {
            let t = model.matrix(5).unwrap();
            let sums: Vec<f64> = t.row_iter().map(|r| r.sum()).collect();
            let fast = model.row_sums(5).unwrap();
            for (a, b) in sums.iter().zip(&fast) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }
}
