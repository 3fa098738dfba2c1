//! Finite cubes in Z^d, the discrete Laplacian and the Anderson-type
//! Hamiltonian `H = -Δ + λ·diag(V)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest number of sites handled by the dense code paths.
pub const MAX_SITES: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("lattice dimension must be at least 1")]
    ZeroDimension,
    #[error("side length must be at least 1")]
    ZeroSide,
    #[error("periodic boundary needs L >= 3 (got L = {0})")]
    PeriodicTooSmall(usize),
    #[error("{0} sites exceed the dense limit of {MAX_SITES}")]
    TooLarge(usize),
    #[error("potential has {got} entries, lattice has {expected} sites")]
    PotentialLength { expected: usize, got: usize },
    #[error("potential entry {0} is not finite")]
    NonFinitePotential(usize),
    #[error("coupling λ must be finite and non-negative, got {0}")]
    BadCoupling(f64),
    #[error("site index {0} out of range")]
    SiteOutOfRange(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Neighbours outside the cube are dropped; the diagonal of -Δ is the
    /// interior degree.
    Restriction,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub bc: Boundary,
}

impl LatticeSpec {
    pub fn new(d: usize, l: usize, bc: Boundary) -> Self {
        Self { d, l, bc }
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        if self.d == 0 {
            return Err(LatticeError::ZeroDimension);
        }
        if self.l == 0 {
            return Err(LatticeError::ZeroSide);
        }
        if self.bc == Boundary::Periodic && self.l < 3 {
            return Err(LatticeError::PeriodicTooSmall(self.l));
        }
        let n = (self.l as u128).checked_pow(self.d as u32).unwrap_or(u128::MAX);
        if n > MAX_SITES as u128 {
            return Err(LatticeError::TooLarge(n.min(usize::MAX as u128) as usize));
        }
        Ok(())
    }
}

/// A validated cube with row-major site indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    spec: LatticeSpec,
    n: usize,
    neighbors: Vec<Vec<usize>>,
}

impl Lattice {
    pub fn new(spec: LatticeSpec) -> Result<Self, LatticeError> {
        spec.validate()?;
        let n = spec.l.pow(spec.d as u32);
        let mut lattice = Self { spec, n, neighbors: Vec::with_capacity(n) };
        for site in 0..n {
            let x = lattice.coords(site);
            let mut nb = Vec::with_capacity(2 * spec.d);
            for axis in 0..spec.d {
                for step in [-1i64, 1] {
                    let c = x[axis] as i64 + step;
                    let c = match spec.bc {
                        Boundary::Periodic => c.rem_euclid(spec.l as i64),
                        Boundary::Restriction if c < 0 || c >= spec.l as i64 => continue,
                        Boundary::Restriction => c,
                    };
                    let mut y = x.clone();
                    y[axis] = c as usize;
                    nb.push(lattice.index(&y));
                }
            }
            nb.sort_unstable();
            lattice.neighbors.push(nb);
        }
        Ok(lattice)
    }

    pub fn spec(&self) -> LatticeSpec {
        self.spec
    }

    pub fn num_sites(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.spec.d
    }

    /// Row-major coordinates of a site (last axis fastest).
    pub fn coords(&self, site: usize) -> Vec<usize> {
        let mut x = vec![0; self.spec.d];
        let mut rest = site;
        for axis in (0..self.spec.d).rev() {
            x[axis] = rest % self.spec.l;
            rest /= self.spec.l;
        }
        x
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().fold(0, |acc, &c| acc * self.spec.l + c)
    }

    pub fn neighbors(&self, site: usize) -> &[usize] {
        &self.neighbors[site]
    }

    pub fn are_neighbors(&self, a: usize, b: usize) -> bool {
        a < self.n && self.neighbors[a].binary_search(&b).is_ok()
    }

    /// ℓ¹ distance in Z^d, measured on the torus for periodic boundaries.
    pub fn distance(&self, a: usize, b: usize) -> usize {
        let (xa, xb) = (self.coords(a), self.coords(b));
        xa.iter()
            .zip(&xb)
            .map(|(&p, &q)| {
                let diff = p.abs_diff(q);
                match self.spec.bc {
                    Boundary::Periodic => diff.min(self.spec.l - diff),
                    Boundary::Restriction => diff,
                }
            })
            .sum()
    }

    /// A nearest-neighbour pair near the centre of the cube: the central site
    /// and its successor along the last axis.
    pub fn central_pair(&self) -> Option<(usize, usize)> {
        if self.n < 2 {
            return None;
        }
        let mut x = vec![(self.spec.l - 1) / 2; self.spec.d];
        let a = self.index(&x);
        let last = self.spec.d - 1;
        x[last] = (x[last] + 1) % self.spec.l;
        let b = self.index(&x);
        Some((a.min(b), a.max(b)))
    }

    /// Nearest-neighbour adjacency matrix (0/1 entries).
    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for (j, nb) in self.neighbors.iter().enumerate() {
            for &k in nb {
                a[(j, k)] = 1.0;
            }
        }
        a
    }

    /// `H₀ = -Δ`: neighbour count on the diagonal, `-1` for each bond.
    pub fn laplacian(&self) -> Hamiltonian {
        let mut h = -self.adjacency();
        for (j, nb) in self.neighbors.iter().enumerate() {
            h[(j, j)] = nb.len() as f64;
        }
        Hamiltonian { matrix: h, lambda: 0.0, bc: self.spec.bc, realization: None }
    }

    /// `H = -Δ + λ·diag(V)`.
    pub fn assemble(&self, lambda: f64, potential: &[f64]) -> Result<Hamiltonian, LatticeError> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(LatticeError::BadCoupling(lambda));
        }
        if potential.len() != self.n {
            return Err(LatticeError::PotentialLength { expected: self.n, got: potential.len() });
        }
        if let Some(bad) = potential.iter().position(|v| !v.is_finite()) {
            return Err(LatticeError::NonFinitePotential(bad));
        }
        let mut h = self.laplacian();
        for (j, &v) in potential.iter().enumerate() {
            h.matrix[(j, j)] += lambda * v;
        }
        h.lambda = lambda;
        Ok(h)
    }
}

/// Dense real symmetric lattice Hamiltonian with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    pub matrix: DMatrix<f64>,
    pub lambda: f64,
    pub bc: Boundary,
    /// Monte Carlo sample index the potential was drawn from, if any.
    pub realization: Option<u64>,
}

impl Hamiltonian {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn with_realization(mut self, id: u64) -> Self {
        self.realization = Some(id);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat(d: usize, l: usize, bc: Boundary) -> Lattice {
        Lattice::new(LatticeSpec::new(d, l, bc)).unwrap()
    }

    #[test]
    fn chain_of_three_with_restriction() {
        let h = lat(1, 3, Boundary::Restriction).laplacian();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        assert_eq!(h.matrix, expected);
    }

    #[test]
    fn square_plaquette_degrees() {
        let l = lat(2, 2, Boundary::Restriction);
        let h = l.laplacian();
        for j in 0..4 {
            assert_eq!(h.matrix[(j, j)], 2.0);
            assert_eq!(l.neighbors(j).len(), 2);
        }
    }

    #[test]
    fn periodic_requires_three_sites() {
        assert_eq!(
            Lattice::new(LatticeSpec::new(1, 2, Boundary::Periodic)).unwrap_err(),
            LatticeError::PeriodicTooSmall(2)
        );
        assert!(Lattice::new(LatticeSpec::new(2, 65, Boundary::Periodic)).is_err());
        assert!(Lattice::new(LatticeSpec::new(0, 3, Boundary::Periodic)).is_err());
    }

    #[test]
    fn single_site_hamiltonian() {
        let h = lat(1, 1, Boundary::Restriction).assemble(1.5, &[2.0]).unwrap();
        assert_eq!(h.matrix, DMatrix::from_element(1, 1, 3.0));
    }

    #[test]
    fn two_site_assembly() {
        let h = lat(1, 2, Boundary::Restriction).assemble(2.0, &[1.0, 0.0]).unwrap();
        assert_eq!(h.matrix, DMatrix::from_row_slice(2, 2, &[3.0, -1.0, -1.0, 1.0]));
        assert_eq!(h.lambda, 2.0);
    }

    #[test]
    fn zero_coupling_gives_laplacian() {
        let l = lat(2, 3, Boundary::Periodic);
        let h = l.assemble(0.0, &[7.0; 9]).unwrap();
        assert_eq!(h.matrix, l.laplacian().matrix);
    }

    #[test]
    fn assemble_rejects_bad_input() {
        let l = lat(1, 3, Boundary::Restriction);
        assert!(matches!(l.assemble(1.0, &[0.0, f64::NAN, 0.0]), Err(LatticeError::NonFinitePotential(1))));
        assert!(l.assemble(1.0, &[0.0; 2]).is_err());
        assert!(l.assemble(-1.0, &[0.0; 3]).is_err());
    }

    #[test]
    fn torus_distance_and_pairs() {
        let l = lat(2, 4, Boundary::Periodic);
        assert_eq!(l.distance(l.index(&[0, 0]), l.index(&[3, 3])), 2);
        let r = lat(2, 4, Boundary::Restriction);
        assert_eq!(r.distance(r.index(&[0, 0]), r.index(&[3, 3])), 6);
        let (a, b) = r.central_pair().unwrap();
        assert!(r.are_neighbors(a, b));
        assert_eq!(lat(1, 2, Boundary::Restriction).central_pair(), Some((0, 1)));
    }
}
