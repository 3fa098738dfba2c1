//! Finite complex Grassmann algebras and super-linear-algebra.
//!
//! An element of the algebra generated by `q` anticommuting symbols is stored
//! as a sparse list of `(mask, coefficient)` pairs, where bit `i` of `mask`
//! marks the presence of generator `i` (generators are indexed from zero) and
//! the monomial is the *ordered* product of the marked generators, lowest
//! index first. All signs are normalised when terms are created, so two
//! elements are equal iff their term lists are equal.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use thiserror::Error;

/// Largest supported number of generators (one bit per generator in a `u64`).
pub const MAX_GENERATORS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrassmannError {
    #[error("algebras differ: {0} vs {1} generators")]
    AlgebraMismatch(usize, usize),
    #[error("generator index {index} out of range for an algebra with {q} generators")]
    GeneratorOutOfRange { index: usize, q: usize },
    #[error("at most {MAX_GENERATORS} generators are supported, got {0}")]
    TooManyGenerators(usize),
    #[error("operation requires an even element")]
    NotEven,
    #[error("lift needs derivatives up to order {needed}, only {supplied} supplied")]
    InsufficientDerivatives { needed: usize, supplied: usize },
    #[error("body is singular (|body| = {0:e})")]
    SingularBody(f64),
    #[error("matrix shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, GrassmannError>;

/// Grading of a homogeneous element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Sign of `χ^a χ^b` relative to `χ^{a ∪ b}` for disjoint masks: `(-1)^k` where
/// `k` counts pairs `(i ∈ a, j ∈ b)` with `i > j`.
#[inline]
fn reorder_sign(a: u64, b: u64) -> f64 {
    let mut inversions = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        rest &= rest - 1;
        inversions += if j >= 63 { 0 } else { (a >> (j + 1)).count_ones() };
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[inline]
fn full_mask(q: usize) -> u64 {
    if q == 64 {
        u64::MAX
    } else {
        (1u64 << q) - 1
    }
}

/// An element `a = Σ_I a_I χ^I` of a complex Grassmann algebra.
#[derive(Clone, PartialEq)]
pub struct GrassmannElement {
    q: usize,
    // sorted by mask, no exact zeros
    terms: Vec<(u64, Complex64)>,
}

impl GrassmannElement {
    pub fn zero(q: usize) -> Result<Self> {
        if q > MAX_GENERATORS {
            return Err(GrassmannError::TooManyGenerators(q));
        }
        Ok(Self { q, terms: Vec::new() })
    }

    pub fn scalar(q: usize, value: Complex64) -> Result<Self> {
        let mut out = Self::zero(q)?;
        if value != Complex64::new(0.0, 0.0) {
            out.terms.push((0, value));
        }
        Ok(out)
    }

    /// The generator `χ_index`.
    pub fn generator(q: usize, index: usize) -> Result<Self> {
        if index >= q {
            return Err(GrassmannError::GeneratorOutOfRange { index, q });
        }
        let mut out = Self::zero(q)?;
        out.terms.push((1u64 << index, Complex64::new(1.0, 0.0)));
        Ok(out)
    }

    /// Monomial `c · χ_{i1} χ_{i2} …` in the given (not necessarily sorted)
    /// order. Repeated generators give zero.
    pub fn monomial(q: usize, coefficient: Complex64, generators: &[usize]) -> Result<Self> {
        let mut out = Self::scalar(q, coefficient)?;
        for &g in generators {
            out = out.wedge(&Self::generator(q, g)?)?;
        }
        Ok(out)
    }

    /// Build from `(mask, coefficient)` pairs already expressed in canonical
    /// order; duplicate masks are summed.
    pub fn from_terms(q: usize, terms: impl IntoIterator<Item = (u64, Complex64)>) -> Result<Self> {
        if q > MAX_GENERATORS {
            return Err(GrassmannError::TooManyGenerators(q));
        }
        let mask = full_mask(q);
        let mut raw = Vec::new();
        for (k, c) in terms {
            if k & !mask != 0 {
                let index = (63 - (k & !mask).leading_zeros()) as usize;
                return Err(GrassmannError::GeneratorOutOfRange { index, q });
            }
            raw.push((k, c));
        }
        Ok(Self::normalize(q, raw))
    }

    fn normalize(q: usize, mut raw: Vec<(u64, Complex64)>) -> Self {
        raw.sort_unstable_by_key(|t| t.0);
        let mut terms: Vec<(u64, Complex64)> = Vec::with_capacity(raw.len());
        for (k, c) in raw {
            match terms.last_mut() {
                Some(last) if last.0 == k => last.1 += c,
                _ => terms.push((k, c)),
            }
        }
        terms.retain(|t| t.1 != Complex64::new(0.0, 0.0));
        Self { q, terms }
    }

    pub fn num_generators(&self) -> usize {
        self.q
    }

    pub fn terms(&self) -> &[(u64, Complex64)] {
        &self.terms
    }

    pub fn coefficient(&self, mask: u64) -> Complex64 {
        match self.terms.binary_search_by_key(&mask, |t| t.0) {
            Ok(i) => self.terms[i].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of the empty monomial.
    pub fn body(&self) -> Complex64 {
        match self.terms.first() {
            Some(&(0, c)) => c,
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// `a - body(a)`.
    pub fn nilpotent_part(&self) -> Self {
        Self {
            q: self.q,
            terms: self.terms.iter().copied().filter(|t| t.0 != 0).collect(),
        }
    }

    /// `None` for mixed elements. The zero element counts as even.
    pub fn parity(&self) -> Option<Parity> {
        let mut parity = None;
        for &(k, _) in &self.terms {
            let p = if k.count_ones() % 2 == 0 { Parity::Even } else { Parity::Odd };
            match parity {
                None => parity = Some(p),
                Some(prev) if prev != p => return None,
                _ => {}
            }
        }
        Some(parity.unwrap_or(Parity::Even))
    }

    pub fn is_even(&self) -> bool {
        self.parity() == Some(Parity::Even)
    }

    pub fn is_odd(&self) -> bool {
        self.is_zero() || self.parity() == Some(Parity::Odd)
    }

    /// Largest coefficient modulus; handy for tolerance checks.
    pub fn max_abs(&self) -> f64 {
        self.terms.iter().map(|t| t.1.norm()).fold(0.0, f64::max)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.q != other.q {
            Err(GrassmannError::AlgebraMismatch(self.q, other.q))
        } else {
            Ok(())
        }
    }

    /// The exterior product `self ∧ other`.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        if self.terms.is_empty() || other.terms.is_empty() {
            return Ok(Self { q: self.q, terms: Vec::new() });
        }
        let mut raw = Vec::with_capacity(self.terms.len() * other.terms.len());
        for &(ka, ca) in &self.terms {
            for &(kb, cb) in &other.terms {
                if ka & kb != 0 {
                    continue;
                }
                raw.push((ka | kb, ca * cb * reorder_sign(ka, kb)));
            }
        }
        Ok(Self::normalize(self.q, raw))
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut raw = self.terms.clone();
        raw.extend_from_slice(&other.terms);
        Ok(Self::normalize(self.q, raw))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        if factor == Complex64::new(0.0, 0.0) {
            return Self { q: self.q, terms: Vec::new() };
        }
        Self {
            q: self.q,
            terms: self.terms.iter().map(|&(k, c)| (k, c * factor)).collect(),
        }
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.q {
            Err(GrassmannError::GeneratorOutOfRange { index: j, q: self.q })
        } else {
            Ok(())
        }
    }

    /// Left derivative `∂/∂χ_j a`: `χ_j` is moved to the front before removal.
    pub fn derivative_left(&self, j: usize) -> Result<Self> {
        self.check_index(j)?;
        let bit = 1u64 << j;
        let below = bit - 1;
        let raw = self
            .terms
            .iter()
            .filter(|t| t.0 & bit != 0)
            .map(|&(k, c)| {
                let sign = if (k & below).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                (k & !bit, c * sign)
            })
            .collect();
        Ok(Self { q: self.q, terms: raw })
    }

    /// Right derivative `a ∂/∂χ_j`: `χ_j` is moved to the back before removal.
    pub fn derivative_right(&self, j: usize) -> Result<Self> {
        self.check_index(j)?;
        let bit = 1u64 << j;
        let above = !(bit | (bit - 1));
        let raw = self
            .terms
            .iter()
            .filter(|t| t.0 & bit != 0)
            .map(|&(k, c)| {
                let sign = if (k & above).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                (k & !bit, c * sign)
            })
            .collect();
        Ok(Self { q: self.q, terms: raw })
    }

    /// Berezin integral `∫ dχ^I a` over the generators in `subset`, with the
    /// one-forms in increasing index order. Equivalent to applying the left
    /// derivatives `∂_{i1} ∂_{i2} … ∂_{ik}` (rightmost first).
    pub fn berezin(&self, subset: u64) -> Result<Self> {
        if subset & !full_mask(self.q) != 0 {
            let index = (63 - (subset & !full_mask(self.q)).leading_zeros()) as usize;
            return Err(GrassmannError::GeneratorOutOfRange { index, q: self.q });
        }
        let k = subset.count_ones();
        // iterated derivatives pick up (-1)^{k(k-1)/2} relative to χ^I χ^{J\I} = ± χ^J
        let triangle = if (k * k.saturating_sub(1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let raw = self
            .terms
            .iter()
            .filter(|t| t.0 & subset == subset)
            .map(|&(m, c)| {
                let rest = m & !subset;
                (rest, c * reorder_sign(subset, rest) * triangle)
            })
            .collect();
        Ok(Self { q: self.q, terms: raw })
    }

    /// Berezin integral with one-forms `dχ_{order[0]} dχ_{order[1]} …`.
    pub fn berezin_ordered(&self, order: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        for &j in order.iter().rev() {
            out = out.derivative_left(j)?;
        }
        Ok(out)
    }

    /// `f(a) = Σ_k f^{(k)}(b_a) n_a^k / k!` for an even element `a`.
    ///
    /// `derivatives(b)` must return `[f(b), f'(b), f''(b), …]` up to at least
    /// the last non-vanishing power of the nilpotent part.
    pub fn lift_function<F>(&self, derivatives: F) -> Result<Self>
    where
        F: FnOnce(Complex64) -> Vec<Complex64>,
    {
        if !self.is_even() {
            return Err(GrassmannError::NotEven);
        }
        let body = self.body();
        let nil = self.nilpotent_part();
        let mut powers = vec![Self::scalar(self.q, Complex64::new(1.0, 0.0))?];
        loop {
            let next = powers.last().unwrap().wedge(&nil)?;
            if next.is_zero() {
                break;
            }
            powers.push(next);
        }
        let values = derivatives(body);
        if values.len() < powers.len() {
            return Err(GrassmannError::InsufficientDerivatives {
                needed: powers.len() - 1,
                supplied: values.len().saturating_sub(1),
            });
        }
        let mut raw = Vec::new();
        let mut factorial = 1.0;
        for (k, p) in powers.iter().enumerate() {
            if k > 0 {
                factorial *= k as f64;
            }
            let c = values[k] / factorial;
            raw.extend(p.terms.iter().map(|&(m, v)| (m, v * c)));
        }
        Ok(Self::normalize(self.q, raw))
    }

    /// Exponential of an even element.
    pub fn exp(&self) -> Result<Self> {
        let depth = self.q / 2 + 1;
        self.lift_function(|b| vec![b.exp(); depth])
    }

    /// Multiplicative inverse of an even element with non-zero body.
    pub fn inverse(&self) -> Result<Self> {
        let body = self.body();
        if body.norm() == 0.0 {
            return Err(GrassmannError::SingularBody(0.0));
        }
        let depth = self.q / 2 + 1;
        self.lift_function(|b| {
            let mut out = Vec::with_capacity(depth);
            let mut fact = 1.0;
            for k in 0..depth {
                if k > 0 {
                    fact *= k as f64;
                }
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                out.push(sign * fact / b.powu(k as u32 + 1));
            }
            out
        })
    }
}

impl fmt::Debug for GrassmannElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for GrassmannElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, &(m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({}{:+}i)", c.re, c.im)?;
            let mut rest = m;
            while rest != 0 {
                let j = rest.trailing_zeros();
                rest &= rest - 1;
                write!(f, "·χ{j}")?;
            }
        }
        Ok(())
    }
}

// Operator sugar. These panic on mismatched algebras; use the `try_*`/`wedge`
// forms where that is a recoverable condition.

impl Add for &GrassmannElement {
    type Output = GrassmannElement;
    fn add(self, rhs: &GrassmannElement) -> GrassmannElement {
        self.try_add(rhs).expect("adding elements of different algebras")
    }
}

impl Add for GrassmannElement {
    type Output = GrassmannElement;
    fn add(self, rhs: GrassmannElement) -> GrassmannElement {
        &self + &rhs
    }
}

impl AddAssign<&GrassmannElement> for GrassmannElement {
    fn add_assign(&mut self, rhs: &GrassmannElement) {
        *self = &*self + rhs;
    }
}

impl Sub for &GrassmannElement {
    type Output = GrassmannElement;
    fn sub(self, rhs: &GrassmannElement) -> GrassmannElement {
        self + &(-rhs)
    }
}

impl Sub for GrassmannElement {
    type Output = GrassmannElement;
    fn sub(self, rhs: GrassmannElement) -> GrassmannElement {
        &self - &rhs
    }
}

impl Neg for &GrassmannElement {
    type Output = GrassmannElement;
    fn neg(self) -> GrassmannElement {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Neg for GrassmannElement {
    type Output = GrassmannElement;
    fn neg(self) -> GrassmannElement {
        -&self
    }
}

impl Mul for &GrassmannElement {
    type Output = GrassmannElement;
    fn mul(self, rhs: &GrassmannElement) -> GrassmannElement {
        self.wedge(rhs).expect("multiplying elements of different algebras")
    }
}

impl Mul for GrassmannElement {
    type Output = GrassmannElement;
    fn mul(self, rhs: GrassmannElement) -> GrassmannElement {
        &self * &rhs
    }
}

impl Mul<Complex64> for &GrassmannElement {
    type Output = GrassmannElement;
    fn mul(self, rhs: Complex64) -> GrassmannElement {
        self.scale(rhs)
    }
}

impl Mul<f64> for &GrassmannElement {
    type Output = GrassmannElement;
    fn mul(self, rhs: f64) -> GrassmannElement {
        self.scale(Complex64::new(rhs, 0.0))
    }
}

/// Berezin integral of `exp(-Σ_ij χ̄_i M_ij χ_j)` with measure
/// `Π_j dχ̄_j dχ_j`; equals `det M`.
///
/// Generators are laid out as `χ̄_j ↦ 2j`, `χ_j ↦ 2j + 1`.
pub fn grassmann_gaussian(m: &[Vec<Complex64>]) -> Result<Complex64> {
    let n = m.len();
    if m.iter().any(|row| row.len() != n) {
        return Err(GrassmannError::Shape("gaussian kernel must be square".into()));
    }
    let q = 2 * n;
    let mut raw = Vec::with_capacity(n * n);
    for (i, row) in m.iter().enumerate() {
        for (j, &mij) in row.iter().enumerate() {
            // -M_ij χ̄_i χ_j
            let bar = 2 * i;
            let chi = 2 * j + 1;
            let sign = if bar < chi { 1.0 } else { -1.0 };
            raw.push(((1u64 << bar) | (1u64 << chi), -mij * sign));
        }
    }
    let exponent = GrassmannElement::from_terms(q, raw)?;
    let integral = exponent.exp()?.berezin(full_mask(q))?;
    Ok(integral.body())
}

/// Dense matrix of Grassmann elements (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct GrassmannMatrix {
    rows: usize,
    cols: usize,
    q: usize,
    data: Vec<GrassmannElement>,
}

impl GrassmannMatrix {
    pub fn zeros(rows: usize, cols: usize, q: usize) -> Result<Self> {
        Ok(Self { rows, cols, q, data: vec![GrassmannElement::zero(q)?; rows * cols] })
    }

    pub fn from_fn<F>(rows: usize, cols: usize, q: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> GrassmannElement,
    {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let e = f(i, j);
                if e.num_generators() != q {
                    return Err(GrassmannError::AlgebraMismatch(q, e.num_generators()));
                }
                data.push(e);
            }
        }
        Ok(Self { rows, cols, q, data })
    }

    pub fn identity(n: usize, q: usize) -> Result<Self> {
        let one = GrassmannElement::scalar(q, Complex64::new(1.0, 0.0))?;
        let zero = GrassmannElement::zero(q)?;
        Self::from_fn(n, n, q, |i, j| if i == j { one.clone() } else { zero.clone() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &GrassmannElement {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: GrassmannElement) {
        self.data[i * self.cols + j] = value;
    }

    pub fn body(&self) -> Vec<Vec<Complex64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).body()).collect())
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(GrassmannError::Shape(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        if self.q != other.q {
            return Err(GrassmannError::AlgebraMismatch(self.q, other.q));
        }
        let mut out = Self::zeros(self.rows, other.cols, self.q)?;
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = GrassmannElement::zero(self.q)?;
                for k in 0..self.cols {
                    acc = acc.try_add(&self.get(i, k).wedge(other.get(k, j))?)?;
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(GrassmannError::Shape("subtraction of different shapes".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.try_add(&-b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows: self.rows, cols: self.cols, q: self.q, data })
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(GrassmannError::Shape("addition of different shapes".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.try_add(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows: self.rows, cols: self.cols, q: self.q, data })
    }

    /// Determinant of a square matrix of *even* elements by cofactor
    /// expansion (even elements commute, so this is well defined).
    pub fn det_even(&self) -> Result<GrassmannElement> {
        if self.rows != self.cols {
            return Err(GrassmannError::Shape("determinant of a non-square matrix".into()));
        }
        if self.data.iter().any(|e| !e.is_even()) {
            return Err(GrassmannError::NotEven);
        }
        let cols: Vec<usize> = (0..self.cols).collect();
        self.det_minor(0, &cols)
    }

    fn det_minor(&self, row: usize, cols: &[usize]) -> Result<GrassmannElement> {
        if cols.is_empty() {
            return GrassmannElement::scalar(self.q, Complex64::new(1.0, 0.0));
        }
        let mut acc = GrassmannElement::zero(self.q)?;
        for (pos, &c) in cols.iter().enumerate() {
            let entry = self.get(row, c);
            if entry.is_zero() {
                continue;
            }
            let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
            let minor = self.det_minor(row + 1, &rest)?;
            let term = entry.wedge(&minor)?;
            acc = if pos % 2 == 0 { acc.try_add(&term)? } else { acc.try_add(&-term)? };
        }
        Ok(acc)
    }

    /// Inverse of a square matrix of even elements whose body is invertible:
    /// `b⁻¹ = Σ_k (-b₀⁻¹ N)^k b₀⁻¹`, which terminates because `N = b - b₀` is
    /// nilpotent.
    pub fn inverse_even(&self) -> Result<Self> {
        if self.rows != self.cols {
            return Err(GrassmannError::Shape("inverse of a non-square matrix".into()));
        }
        if self.data.iter().any(|e| !e.is_even()) {
            return Err(GrassmannError::NotEven);
        }
        let n = self.rows;
        let body = nalgebra::DMatrix::from_fn(n, n, |i, j| self.get(i, j).body());
        let det = body.clone().lu().determinant();
        if det.norm() < 1e-300 {
            return Err(GrassmannError::SingularBody(det.norm()));
        }
        let body_inv = body
            .try_inverse()
            .ok_or(GrassmannError::SingularBody(det.norm()))?;
        let b0_inv = Self::from_fn(n, n, self.q, |i, j| {
            GrassmannElement::scalar(self.q, body_inv[(i, j)]).expect("q already validated")
        })?;
        let nil = Self::from_fn(n, n, self.q, |i, j| self.get(i, j).nilpotent_part())?;
        // step = -b0⁻¹ N
        let mut step = b0_inv.matmul(&nil)?;
        for e in step.data.iter_mut() {
            *e = -&*e;
        }
        let mut term = b0_inv.clone();
        let mut sum = b0_inv;
        for _ in 0..=self.q / 2 {
            term = step.matmul(&term)?;
            if term.data.iter().all(GrassmannElement::is_zero) {
                break;
            }
            sum = sum.try_add(&term)?;
        }
        Ok(sum)
    }
}

/// Block supermatrix `(a σ; ρ b)` of shape `(p|q)`: `a` and `b` hold even
/// elements, `σ` and `ρ` odd ones.
#[derive(Clone, Debug)]
pub struct SuperMatrix {
    pub a: GrassmannMatrix,
    pub sigma: GrassmannMatrix,
    pub rho: GrassmannMatrix,
    pub b: GrassmannMatrix,
}

impl SuperMatrix {
    pub fn new(
        a: GrassmannMatrix,
        sigma: GrassmannMatrix,
        rho: GrassmannMatrix,
        b: GrassmannMatrix,
    ) -> Result<Self> {
        let (p, q) = (a.rows, b.rows);
        if a.cols != p || b.cols != q || sigma.rows != p || sigma.cols != q || rho.rows != q || rho.cols != p {
            return Err(GrassmannError::Shape(format!("inconsistent ({p}|{q}) blocks")));
        }
        if a.data.iter().chain(&b.data).any(|e| !e.is_even())
            || sigma.data.iter().chain(&rho.data).any(|e| !e.is_odd())
        {
            return Err(GrassmannError::Shape("block parities violated".into()));
        }
        Ok(Self { a, sigma, rho, b })
    }

    /// Supermatrix product.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        let a = self.a.matmul(&other.a)?.try_add(&self.sigma.matmul(&other.rho)?)?;
        let sigma = self.a.matmul(&other.sigma)?.try_add(&self.sigma.matmul(&other.b)?)?;
        let rho = self.rho.matmul(&other.a)?.try_add(&self.b.matmul(&other.rho)?)?;
        let b = self.rho.matmul(&other.sigma)?.try_add(&self.b.matmul(&other.b)?)?;
        Self::new(a, sigma, rho, b)
    }

    /// Berezinian `det(a - σ b⁻¹ ρ) · det(b)⁻¹`.
    pub fn sdet(&self) -> Result<GrassmannElement> {
        let b_inv = self.b.inverse_even()?;
        let schur = self.a.try_sub(&self.sigma.matmul(&b_inv)?.matmul(&self.rho)?)?;
        let det_b = self.b.det_even()?;
        schur.det_even()?.wedge(&det_b.inverse()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn gen(q: usize, j: usize) -> GrassmannElement {
        GrassmannElement::generator(q, j).unwrap()
    }

    fn one(q: usize) -> GrassmannElement {
        GrassmannElement::scalar(q, c(1.0)).unwrap()
    }

    #[test]
    fn ordered_product_and_anticommutation() {
        let x12 = gen(2, 0).wedge(&gen(2, 1)).unwrap();
        assert_eq!(x12.terms(), &[(0b11, c(1.0))]);
        let x21 = gen(2, 1).wedge(&gen(2, 0)).unwrap();
        assert_eq!(x21.terms(), &[(0b11, c(-1.0))]);
        assert!(gen(2, 0).wedge(&gen(2, 0)).unwrap().is_zero());
    }

    #[test]
    fn square_of_one_plus_generator() {
        let a = &one(1) + &gen(1, 0);
        let sq = &a * &a;
        // brute force: (1)(1) + (1)χ + χ(1) + χχ = 1 + 2χ
        assert_eq!(sq.terms(), &[(0, c(1.0)), (1, c(2.0))]);
    }

    #[test]
    fn mismatched_algebras_are_rejected() {
        assert_eq!(
            gen(2, 0).wedge(&gen(3, 0)),
            Err(GrassmannError::AlgebraMismatch(2, 3))
        );
        assert!(GrassmannElement::generator(2, 2).is_err());
        assert!(GrassmannElement::zero(65).is_err());
    }

    #[test]
    fn derivative_signs() {
        let x12 = gen(2, 0).wedge(&gen(2, 1)).unwrap();
        assert_eq!(x12.derivative_left(0).unwrap(), gen(2, 1));
        assert_eq!(x12.derivative_left(1).unwrap(), -gen(2, 0));
        assert_eq!(x12.derivative_right(1).unwrap(), gen(2, 0));
        assert_eq!(x12.derivative_right(0).unwrap(), -gen(2, 1));
        assert!(x12.derivative_left(2).is_err());
    }

    #[test]
    fn right_derivative_matches_explicit_reordering() {
        // χ0χ1χ2: moving χ1 to the back crosses χ2 once.
        let m = GrassmannElement::monomial(3, c(1.0), &[0, 1, 2]).unwrap();
        let expected = GrassmannElement::monomial(3, c(-1.0), &[0, 2]).unwrap();
        assert_eq!(m.derivative_right(1).unwrap(), expected);
    }

    #[test]
    fn berezin_examples() {
        let x12 = gen(2, 0).wedge(&gen(2, 1)).unwrap();
        assert_eq!(x12.berezin(0b11).unwrap().body(), c(-1.0));
        let constant = GrassmannElement::scalar(2, c(3.0)).unwrap();
        assert!(constant.berezin(0b01).unwrap().is_zero());
        assert!(x12.berezin(0b100).is_err());
    }

    #[test]
    fn one_pair_gaussian() {
        let m = Complex64::new(0.7, -1.3);
        assert!((grassmann_gaussian(&[vec![m]]).unwrap() - m).norm() < 1e-15);
    }

    #[test]
    fn gaussian_small_cases() {
        let id = vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(1.0)]];
        assert!((grassmann_gaussian(&id).unwrap() - c(1.0)).norm() < 1e-15);
        // cofactor oracle: 1*4 - 2*3
        let m = vec![vec![c(1.0), c(2.0)], vec![c(3.0), c(4.0)]];
        assert!((grassmann_gaussian(&m).unwrap() - c(-2.0)).norm() < 1e-14);
    }

    #[test]
    fn lift_examples() {
        let q = 2;
        // 1 + χ̄χ with χ̄ = gen 0, χ = gen 1
        let n = gen(q, 0).wedge(&gen(q, 1)).unwrap();
        let a = &one(q) + &n;
        let e = a.exp().unwrap();
        let expected = (&one(q) + &n).scale(c(std::f64::consts::E));
        assert!((&e - &expected).max_abs() < 1e-15);

        // identity function
        let id = a.lift_function(|b| vec![b, c(1.0), c(0.0)]).unwrap();
        assert_eq!(id, a);
    }

    #[test]
    fn lift_two_pairs_truncates_after_second_power() {
        let q = 4;
        let n1 = gen(q, 0).wedge(&gen(q, 1)).unwrap();
        let n2 = gen(q, 2).wedge(&gen(q, 3)).unwrap();
        let n = &n1 - &n2;
        assert!(!(&n * &n).is_zero());
        assert!((&(&n * &n) * &n).is_zero());
        let e = n.exp().unwrap();
        let expected = &(&one(q) + &n) + &(&n * &n).scale(c(0.5));
        assert!((&e - &expected).max_abs() < 1e-15);
    }

    #[test]
    fn lift_errors() {
        let q = 4;
        let n = &gen(q, 0).wedge(&gen(q, 1)).unwrap() + &gen(q, 2).wedge(&gen(q, 3)).unwrap();
        let err = n.lift_function(|b| vec![b.exp(), b.exp()]).unwrap_err();
        assert_eq!(err, GrassmannError::InsufficientDerivatives { needed: 2, supplied: 1 });
        assert_eq!(gen(q, 0).exp().unwrap_err(), GrassmannError::NotEven);
    }

    #[test]
    fn inverse_of_even_element() {
        let q = 4;
        let a = &GrassmannElement::scalar(q, Complex64::new(2.0, 1.0)).unwrap()
            + &gen(q, 0).wedge(&gen(q, 1)).unwrap().scale(c(3.0));
        let prod = &a * &a.inverse().unwrap();
        assert!((&prod - &one(q)).max_abs() < 1e-15);
    }

    fn scalar_matrix(q: usize, rows: &[&[f64]]) -> GrassmannMatrix {
        GrassmannMatrix::from_fn(rows.len(), rows[0].len(), q, |i, j| {
            GrassmannElement::scalar(q, c(rows[i][j])).unwrap()
        })
        .unwrap()
    }

    #[test]
    fn sdet_block_diagonal() {
        let q = 2;
        let a = scalar_matrix(q, &[&[2.0, 1.0], &[0.0, 3.0]]);
        let b = scalar_matrix(q, &[&[4.0]]);
        let s = SuperMatrix::new(
            a,
            GrassmannMatrix::zeros(2, 1, q).unwrap(),
            GrassmannMatrix::zeros(1, 2, q).unwrap(),
            b,
        )
        .unwrap();
        assert!((s.sdet().unwrap().body() - c(6.0 / 4.0)).norm() < 1e-15);
    }

    #[test]
    fn sdet_scalar_and_nilpotent_cases() {
        let q = 2;
        let s = SuperMatrix::new(
            scalar_matrix(q, &[&[2.0]]),
            GrassmannMatrix::zeros(1, 1, q).unwrap(),
            GrassmannMatrix::zeros(1, 1, q).unwrap(),
            scalar_matrix(q, &[&[1.0]]),
        )
        .unwrap();
        assert_eq!(s.sdet().unwrap(), GrassmannElement::scalar(q, c(2.0)).unwrap());

        let mut sigma = GrassmannMatrix::zeros(1, 1, q).unwrap();
        sigma.set(0, 0, gen(q, 0));
        let mut rho = GrassmannMatrix::zeros(1, 1, q).unwrap();
        rho.set(0, 0, gen(q, 1));
        let s = SuperMatrix::new(scalar_matrix(q, &[&[1.0]]), sigma, rho, scalar_matrix(q, &[&[1.0]]))
            .unwrap();
        let expected = &one(q) - &gen(q, 0).wedge(&gen(q, 1)).unwrap();
        assert_eq!(s.sdet().unwrap(), expected);
    }

    #[test]
    fn sdet_rejects_singular_body() {
        let q = 2;
        let s = SuperMatrix::new(
            scalar_matrix(q, &[&[1.0]]),
            GrassmannMatrix::zeros(1, 1, q).unwrap(),
            GrassmannMatrix::zeros(1, 1, q).unwrap(),
            scalar_matrix(q, &[&[0.0]]),
        )
        .unwrap();
        assert!(matches!(s.sdet(), Err(GrassmannError::SingularBody(_))));
    }

    #[test]
    fn supermatrix_parities_enforced() {
        let q = 2;
        let mut sigma = GrassmannMatrix::zeros(1, 1, q).unwrap();
        sigma.set(0, 0, one(q));
        let r = SuperMatrix::new(
            scalar_matrix(q, &[&[1.0]]),
            sigma,
            GrassmannMatrix::zeros(1, 1, q).unwrap(),
            scalar_matrix(q, &[&[1.0]]),
        );
        assert!(r.is_err());
    }
}
