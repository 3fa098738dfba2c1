//! Supervectors, supersymmetric Gaussian integrals and the supersymmetric
//! polar-coordinate decomposition `I(f) = Σ_α I_α(f)`.
//!
//! Integrands are Grassmann-valued functions of a [`SuperVector`]. The
//! Grassmann variables are integrated symbolically at each quadrature node;
//! the remaining ordinary integral is done in per-site polar coordinates with
//! adaptive Gauss–Kronrod in the radius and a periodic trapezoid rule in the
//! angles.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::grassmann::{GrassmannElement, GrassmannError};
use crate::linalg::{min_hermitian_part_eigenvalue, ComplexLu, LinalgError};
use crate::quad::{cauchy_expectation, integrate, integrate_half_line, periodic_trapezoid, QuadOptions, QuadResult};

/// Largest number of sites the quadrature paths accept.
pub const MAX_SITES: usize = 2;

#[derive(Debug, Error)]
pub enum SuperpolarError {
    #[error(transparent)]
    Grassmann(#[from] GrassmannError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("quadrature did not converge: value {value}, estimated error {error:e}")]
    NotConverged { value: Complex64, error: f64 },
    #[error("{0} sites requested; quadrature supports at most {MAX_SITES}")]
    TooManySites(usize),
    #[error("expected {expected} entries, got {got}")]
    Length { expected: usize, got: usize },
    #[error("matrix must be {0}x{0}")]
    Shape(usize),
    #[error("Re A₁ is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),
    #[error("radial weights are only defined in polar coordinates")]
    WeightNeedsPolar,
    #[error("the |G|² representation is checked for a single site only, got {0}")]
    UnsupportedScale(usize),
    #[error("parameters must be finite with ε > 0 and λ >= 0")]
    BadParameters,
}

pub type Result<T> = std::result::Result<T, SuperpolarError>;

/// `n` supervectors `Φ_j = (z_j, χ_j)` with conjugates, all living in one
/// Grassmann algebra of `2n` generators (`χ̄_j ↦ 2j`, `χ_j ↦ 2j+1`, or the
/// polar `ρ̄_j, ρ_j` in the same slots).
#[derive(Debug, Clone)]
pub struct SuperVector {
    z: Vec<GrassmannElement>,
    zbar: Vec<GrassmannElement>,
    chi: Vec<GrassmannElement>,
    chibar: Vec<GrassmannElement>,
    q: usize,
}

impl SuperVector {
    /// Flat coordinates: complex `z_j`, odd parts the bare generators.
    pub fn flat(z: &[Complex64]) -> Result<Self> {
        let q = 2 * z.len();
        let mut out = Self::empty(q);
        for (j, &zj) in z.iter().enumerate() {
            out.z.push(GrassmannElement::scalar(q, zj)?);
            out.zbar.push(GrassmannElement::scalar(q, zj.conj())?);
            out.chibar.push(GrassmannElement::generator(q, 2 * j)?);
            out.chi.push(GrassmannElement::generator(q, 2 * j + 1)?);
        }
        Ok(out)
    }

    /// The map `Ψ_α`: sites with `alpha[j]` set are pinned to zero, the others
    /// get `z = e^{iθ}(r - ½ρ̄ρ)`, `χ = √r ρ`, `χ̄ = √r ρ̄`.
    pub fn polar(alpha: &[bool], r: &[f64], theta: &[f64]) -> Result<Self> {
        let n = alpha.len();
        if r.len() != n || theta.len() != n {
            return Err(SuperpolarError::Length { expected: n, got: r.len().min(theta.len()) });
        }
        let q = 2 * n;
        let mut out = Self::empty(q);
        for j in 0..n {
            if alpha[j] {
                let zero = GrassmannElement::zero(q)?;
                out.z.push(zero.clone());
                out.zbar.push(zero.clone());
                out.chi.push(zero.clone());
                out.chibar.push(zero);
                continue;
            }
            let rhobar = GrassmannElement::generator(q, 2 * j)?;
            let rho = GrassmannElement::generator(q, 2 * j + 1)?;
            let radial = &GrassmannElement::scalar(q, Complex64::new(r[j], 0.0))? - &(&rhobar * &rho).scale(Complex64::new(0.5, 0.0));
            let phase = Complex64::from_polar(1.0, theta[j]);
            out.z.push(radial.scale(phase));
            out.zbar.push(radial.scale(phase.conj()));
            let root = Complex64::new(r[j].sqrt(), 0.0);
            out.chi.push(rho.scale(root));
            out.chibar.push(rhobar.scale(root));
        }
        Ok(out)
    }

    fn empty(q: usize) -> Self {
        Self { z: Vec::new(), zbar: Vec::new(), chi: Vec::new(), chibar: Vec::new(), q }
    }

    pub fn sites(&self) -> usize {
        self.z.len()
    }

    pub fn algebra_size(&self) -> usize {
        self.q
    }

    pub fn z(&self, j: usize) -> &GrassmannElement {
        &self.z[j]
    }

    pub fn zbar(&self, j: usize) -> &GrassmannElement {
        &self.zbar[j]
    }

    pub fn chi(&self, j: usize) -> &GrassmannElement {
        &self.chi[j]
    }

    pub fn chibar(&self, j: usize) -> &GrassmannElement {
        &self.chibar[j]
    }

    pub fn scalar(&self, c: Complex64) -> GrassmannElement {
        GrassmannElement::scalar(self.q, c).expect("algebra size validated at construction")
    }

    /// `Φ*_j Φ_j = z̄_j z_j + χ̄_j χ_j`.
    pub fn norm_sq(&self, j: usize) -> GrassmannElement {
        &(&self.zbar[j] * &self.z[j]) + &(&self.chibar[j] * &self.chi[j])
    }

    /// `Σ_j Φ*_j Φ_j`.
    pub fn total_norm_sq(&self) -> GrassmannElement {
        (0..self.sites()).fold(self.scalar(Complex64::new(0.0, 0.0)), |acc, j| &acc + &self.norm_sq(j))
    }

    /// `Σ_jk z̄_j (A₁)_jk z_k + χ̄_j (A₂)_jk χ_k`.
    pub fn quadratic_form(&self, a1: &DMatrix<Complex64>, a2: &DMatrix<Complex64>) -> Result<GrassmannElement> {
        let n = self.sites();
        if a1.shape() != (n, n) || a2.shape() != (n, n) {
            return Err(SuperpolarError::Shape(n));
        }
        let mut acc = self.scalar(Complex64::new(0.0, 0.0));
        for j in 0..n {
            for k in 0..n {
                acc = &acc + &(&self.zbar[j] * &self.z[k]).scale(a1[(j, k)]);
                acc = &acc + &(&self.chibar[j] * &self.chi[k]).scale(a2[(j, k)]);
            }
        }
        Ok(acc)
    }
}

/// Angular structure of an integrand after Grassmann integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngularSymmetry {
    /// Probe the integrand at a few points and pick the cheapest valid mode.
    Auto,
    /// No θ dependence: every angle contributes a factor 2π.
    Independent,
    /// Invariant under a common phase `θ_j → θ_j + c`: only relative angles
    /// are integrated.
    GlobalPhase,
    Full,
}

type IntegrandFn = dyn Fn(&SuperVector) -> std::result::Result<GrassmannElement, GrassmannError> + Send + Sync;
type WeightFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type BreakFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

/// A Grassmann-valued integrand on `n` supervectors plus the metadata the
/// quadrature needs.
#[derive(Clone)]
pub struct SusyIntegrand {
    sites: usize,
    f: Arc<IntegrandFn>,
    /// Length scale for the `r = scale·tan(u)` map (decay length of `f`).
    pub radial_scale: f64,
    /// If set, `f` vanishes for any `|z_j|` beyond this radius.
    pub support_radius: Option<f64>,
    /// Scalar factor `w(r)` multiplying `f∘Ψ_α` in polar coordinates,
    /// evaluated with `r_j = 0` on pinned sites.
    weight: Option<Arc<WeightFn>>,
    /// Points where the inner radial integrand has a kink, given the outer radius.
    inner_breaks: Option<Arc<BreakFn>>,
    pub angular: AngularSymmetry,
}

impl std::fmt::Debug for SusyIntegrand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SusyIntegrand")
            .field("sites", &self.sites)
            .field("radial_scale", &self.radial_scale)
            .field("support_radius", &self.support_radius)
            .field("weighted", &self.weight.is_some())
            .field("angular", &self.angular)
            .finish()
    }
}

impl SusyIntegrand {
    pub fn new<F>(sites: usize, f: F) -> Self
    where
        F: Fn(&SuperVector) -> std::result::Result<GrassmannElement, GrassmannError> + Send + Sync + 'static,
    {
        Self {
            sites,
            f: Arc::new(f),
            radial_scale: 1.0,
            support_radius: None,
            weight: None,
            inner_breaks: None,
            angular: AngularSymmetry::Auto,
        }
    }

    pub fn with_weight<W>(mut self, w: W) -> Self
    where
        W: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.weight = Some(Arc::new(w));
        self
    }

    pub fn with_inner_breaks<B>(mut self, b: B) -> Self
    where
        B: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        self.inner_breaks = Some(Arc::new(b));
        self
    }

    pub fn with_support(mut self, radius: f64) -> Self {
        self.support_radius = Some(radius);
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.radial_scale = scale;
        self
    }

    pub fn with_angular(mut self, angular: AngularSymmetry) -> Self {
        self.angular = angular;
        self
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn eval(&self, v: &SuperVector) -> Result<GrassmannElement> {
        Ok((self.f)(v)?)
    }

    /// `exp(-Φ* A Φ)` with `A = diag(A₁, A₂)` acting on the bosonic and
    /// fermionic components.
    pub fn gaussian(a1: DMatrix<Complex64>, a2: DMatrix<Complex64>) -> Self {
        let n = a1.nrows();
        Self::new(n, move |v| {
            let form = v.quadratic_form(&a1, &a2).map_err(|_| GrassmannError::Shape("gaussian kernel".into()))?;
            (-form).exp()
        })
        .with_angular(AngularSymmetry::GlobalPhase)
    }

    /// `z̄_k z_j exp(-Φ* Â Φ)` with `Â = diag(A, A)`.
    pub fn resolvent_entry(a: DMatrix<Complex64>, j: usize, k: usize) -> Self {
        let n = a.nrows();
        Self::new(n, move |v| {
            let form = v.quadratic_form(&a, &a).map_err(|_| GrassmannError::Shape("gaussian kernel".into()))?;
            let g = (-form).exp()?;
            Ok(&(v.zbar(k) * v.z(j)) * &g)
        })
    }
}

/// `exp(-1/(1-2s))` for `s < ½`, zero otherwise, with derivatives up to
/// second order: the smooth bump lifted to `s = Φ*Φ`.
pub fn bump_derivatives(s: Complex64) -> Vec<Complex64> {
    let s = s.re;
    if s >= 0.5 {
        return vec![Complex64::new(0.0, 0.0); 3];
    }
    let u = 1.0 - 2.0 * s;
    let f = (-1.0 / u).exp();
    let g1 = -2.0 / (u * u);
    let g2 = -8.0 / (u * u * u);
    [f, f * g1, f * (g1 * g1 + g2)].into_iter().map(|x| Complex64::new(x, 0.0)).collect()
}

/// `φ(Φ*Φ)` with `φ(s) = exp(-1/(1-2s))` on `s < ½`: smooth, supported in
/// `|z| < 1/√2`, and `φ(0) = e⁻¹`.
pub fn bump_integrand() -> SusyIntegrand {
    SusyIntegrand::new(1, |v| v.norm_sq(0).lift_function(bump_derivatives))
        .with_support(std::f64::consts::FRAC_1_SQRT_2)
        .with_angular(AngularSymmetry::Independent)
}

/// `b(Φ*Φ)·z̄z` with `b(s) = exp(-1/((s-¼)(1-s)))` on `¼ < s < 1`: vanishes
/// in a neighbourhood of `z = 0`.
pub fn annulus_integrand() -> SusyIntegrand {
    fn derivs(s: Complex64) -> Vec<Complex64> {
        let s = s.re;
        let (a, b) = (0.25, 1.0);
        if s <= a || s >= b {
            return vec![Complex64::new(0.0, 0.0); 2];
        }
        let p = (s - a) * (b - s);
        let dp = a + b - 2.0 * s;
        let f = (-1.0 / p).exp();
        vec![Complex64::new(f, 0.0), Complex64::new(f * dp / (p * p), 0.0)]
    }
    SusyIntegrand::new(1, |v| {
        let b = v.norm_sq(0).lift_function(derivs)?;
        Ok(&b * &(v.zbar(0) * v.z(0)))
    })
    .with_support(1.0)
}

/// Integral of `b(s)` over `s ∈ (¼, 1)`, the exact value of
/// [`annulus_integrand`] (by parts on the flat side, directly on the polar side).
pub fn annulus_reference(opts: &QuadOptions) -> QuadResult {
    crate::quad::integrate_fn(
        |s| {
            let p = (s - 0.25) * (1.0 - s);
            if p <= 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new((-1.0 / p).exp(), 0.0)
            }
        },
        0.25,
        1.0,
        opts,
    )
}

fn check_sites(n: usize) -> Result<()> {
    if n > MAX_SITES {
        Err(SuperpolarError::TooManySites(n))
    } else {
        Ok(())
    }
}

fn require(r: QuadResult) -> Result<QuadResult> {
    if r.converged {
        Ok(r)
    } else {
        Err(SuperpolarError::NotConverged { value: r.value, error: r.error })
    }
}

/// The scalar integrand after Berezin integration, as a function of the
/// radii and angles of the active sites.
struct Reduced<'a> {
    f: &'a SusyIntegrand,
    alpha: Vec<bool>,
    active: Vec<usize>,
    polar: bool,
    mask: u64,
}

impl<'a> Reduced<'a> {
    fn new(f: &'a SusyIntegrand, alpha: Vec<bool>, polar: bool) -> Self {
        let active: Vec<usize> = (0..alpha.len()).filter(|&j| !alpha[j]).collect();
        let mask = active.iter().fold(0u64, |m, &j| m | (0b11 << (2 * j)));
        Self { f, alpha, active, polar, mask }
    }

    /// `π^{-k}·(Jacobian)·w(r)·∫dρ̄dρ f`, at active radii `r` and angles `t`.
    fn value(&self, r: &[f64], t: &[f64]) -> Result<Complex64> {
        let n = self.alpha.len();
        let mut rr = vec![0.0; n];
        let mut tt = vec![0.0; n];
        for (i, &j) in self.active.iter().enumerate() {
            rr[j] = r[i];
            tt[j] = t[i];
        }
        let v = if self.polar {
            SuperVector::polar(&self.alpha, &rr, &tt)?
        } else {
            let z: Vec<Complex64> = rr.iter().zip(&tt).map(|(&a, &b)| Complex64::from_polar(a, b)).collect();
            SuperVector::flat(&z)?
        };
        let reduced = self.f.eval(&v)?.berezin(self.mask)?.body();
        let mut factor = PI.powi(-(self.active.len() as i32));
        if !self.polar {
            factor *= r.iter().product::<f64>();
        }
        if let Some(w) = &self.f.weight {
            factor *= w(&rr);
        }
        Ok(reduced * factor)
    }

    fn probe_radii(&self) -> Vec<Vec<f64>> {
        let base = self.f.support_radius.map_or(self.f.radial_scale, |s| 0.5 * s);
        let k = self.active.len();
        [[0.37, 0.81], [0.93, 0.29], [0.61, 0.55]]
            .iter()
            .map(|p| (0..k).map(|i| base * p[i % 2] * (1.0 + 0.1 * i as f64)).collect())
            .collect()
    }

    fn detect_symmetry(&self) -> Result<AngularSymmetry> {
        let k = self.active.len();
        if k == 0 {
            return Ok(AngularSymmetry::Independent);
        }
        if self.f.angular != AngularSymmetry::Auto {
            return Ok(self.f.angular);
        }
        let angles: [f64; 3] = [0.3, 2.1, 4.4];
        let same = |a: Complex64, b: Complex64| (a - b).norm() <= 1e-11 * (a.norm() + b.norm()) + 1e-300;
        let mut independent = true;
        let mut global = true;
        for r in self.probe_radii() {
            let base: Vec<f64> = (0..k).map(|i| 0.7 + 1.3 * i as f64).collect();
            let v0 = self.value(&r, &base)?;
            for &shift in &angles {
                let shifted: Vec<f64> = base.iter().map(|t| t + shift).collect();
                if !same(v0, self.value(&r, &shifted)?) {
                    global = false;
                }
                for i in 0..k {
                    let mut one = base.clone();
                    one[i] += shift;
                    if !same(v0, self.value(&r, &one)?) {
                        independent = false;
                    }
                }
            }
        }
        Ok(if independent {
            AngularSymmetry::Independent
        } else if global {
            AngularSymmetry::GlobalPhase
        } else {
            AngularSymmetry::Full
        })
    }

    fn angular(&self, r: &[f64], mode: AngularSymmetry, opts: &QuadOptions) -> Result<Complex64> {
        let k = self.active.len();
        let two_pi = 2.0 * PI;
        match (mode, k) {
            (_, 0) => self.value(r, &[]),
            (AngularSymmetry::Independent, _) => Ok(self.value(r, &vec![0.0; k])? * two_pi.powi(k as i32)),
            (AngularSymmetry::GlobalPhase, 1) => Ok(self.value(r, &[0.0])? * two_pi),
            (AngularSymmetry::GlobalPhase, _) => {
                let inner = periodic_trapezoid(|psi| self.value(r, &[0.0, psi]), 8, 4096, opts)?;
                Ok(require(inner)?.value * two_pi)
            }
            (_, 1) => Ok(require(periodic_trapezoid(|t| self.value(r, &[t]), 8, 4096, opts)?)?.value),
            (_, _) => {
                let outer = periodic_trapezoid(
                    |t1| {
                        let inner = periodic_trapezoid(|t2| self.value(r, &[t1, t2]), 8, 4096, opts)?;
                        Ok::<_, SuperpolarError>(require(inner)?.value)
                    },
                    8,
                    4096,
                    opts,
                )?;
                Ok(require(outer)?.value)
            }
        }
    }

    fn radial<F>(&self, mut f: F, breaks: &[f64], opts: &QuadOptions) -> Result<QuadResult>
    where
        F: FnMut(f64) -> Result<Complex64>,
    {
        let end = self.f.support_radius;
        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&b| b > 0.0 && end.map_or(true, |e| b < e)).collect();
        cuts.sort_by(f64::total_cmp);
        let mut total = QuadResult { value: Complex64::new(0.0, 0.0), error: 0.0, evaluations: 0, converged: true };
        let mut lo = 0.0;
        for &b in &cuts {
            let piece = require(integrate(&mut f, lo, b, opts)?)?;
            total.value += piece.value;
            total.error += piece.error;
            total.evaluations += piece.evaluations;
            lo = b;
        }
        let tail = match end {
            Some(radius) => integrate(&mut f, lo, radius, opts)?,
            None => integrate_half_line(|r| f(lo + r), self.f.radial_scale, opts)?,
        };
        let tail = require(tail)?;
        total.value += tail.value;
        total.error += tail.error;
        total.evaluations += tail.evaluations;
        Ok(total)
    }

    fn integrate(&self, opts: &QuadOptions) -> Result<QuadResult> {
        let mode = self.detect_symmetry()?;
        let inner_opts = QuadOptions { rel_tol: opts.rel_tol * 0.1, abs_tol: opts.abs_tol * 0.1, ..*opts };
        match self.active.len() {
            0 => {
                let value = self.angular(&[], mode, opts)?;
                Ok(QuadResult { value, error: 0.0, evaluations: 1, converged: true })
            }
            1 => self.radial(|r| self.angular(&[r], mode, &inner_opts), &[], opts),
            2 => self.radial(
                |r1| {
                    let breaks = self.f.inner_breaks.as_ref().map_or_else(Vec::new, |b| b(r1));
                    let inner = self.radial(|r2| self.angular(&[r1, r2], mode, &inner_opts), &breaks, &inner_opts)?;
                    Ok(inner.value)
                },
                &[],
                opts,
            ),
            k => Err(SuperpolarError::TooManySites(k)),
        }
    }
}

/// `I(f) = ∫ [dΦ* dΦ] f` with `[dΦ* dΦ] = Π_j (2π)⁻¹ dz̄_j dz_j dχ̄_j dχ_j`.
pub fn flat_integral(f: &SusyIntegrand, opts: &QuadOptions) -> Result<QuadResult> {
    check_sites(f.sites)?;
    if f.weight.is_some() {
        return Err(SuperpolarError::WeightNeedsPolar);
    }
    Reduced::new(f, vec![false; f.sites], false).integrate(opts)
}

/// A single boundary term `I_α(f)`; `alpha[j] = true` pins site `j` to zero.
pub fn polar_term(f: &SusyIntegrand, alpha: &[bool], opts: &QuadOptions) -> Result<QuadResult> {
    check_sites(f.sites)?;
    if alpha.len() != f.sites {
        return Err(SuperpolarError::Length { expected: f.sites, got: alpha.len() });
    }
    Reduced::new(f, alpha.to_vec(), true).integrate(opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarDecomposition {
    /// `(α, I_α)` in lexicographic order of α.
    pub terms: Vec<(Vec<bool>, Complex64)>,
    pub total: Complex64,
    /// Sum of the quadrature error estimates.
    pub error: f64,
}

impl PolarDecomposition {
    pub fn term(&self, alpha: &[bool]) -> Option<Complex64> {
        self.terms.iter().find(|t| t.0 == alpha).map(|t| t.1)
    }
}

/// All `I_α(f)`, `α ∈ {0,1}^n`, and their sum.
pub fn polar_decomposition(f: &SusyIntegrand, opts: &QuadOptions) -> Result<PolarDecomposition> {
    check_sites(f.sites)?;
    let n = f.sites;
    let mut terms = Vec::with_capacity(1 << n);
    let mut total = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    for bits in 0..(1u32 << n) {
        let alpha: Vec<bool> = (0..n).map(|j| bits >> (n - 1 - j) & 1 == 1).collect();
        let r = polar_term(f, &alpha, opts)?;
        total += r.value;
        error += r.error;
        terms.push((alpha, r.value));
    }
    Ok(PolarDecomposition { terms, total, error })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SusyReport {
    pub integral: Complex64,
    pub det_ratio: Complex64,
    pub rel_err: f64,
    /// `(j, k, ∫ z̄_k z_j e^{-Φ*ÂΦ}, (A₁⁻¹)_jk, relative error)`.
    pub entries: Vec<(usize, usize, Complex64, Complex64, f64)>,
}

impl SusyReport {
    pub fn max_rel_err(&self) -> f64 {
        self.entries.iter().map(|e| e.4).fold(self.rel_err, f64::max)
    }
}

/// Compare `∫ [dΦ*dΦ] e^{-Φ*AΦ}` with `det A₂ / det A₁` and the resolvent
/// entries `∫ z̄_k z_j e^{-Φ*Â₁Φ}` with `(A₁⁻¹)_jk`.
pub fn verify_susy_representation(
    a1: &DMatrix<Complex64>,
    a2: &DMatrix<Complex64>,
    opts: &QuadOptions,
) -> Result<SusyReport> {
    let n = a1.nrows();
    check_sites(n)?;
    if a1.shape() != (n, n) || a2.shape() != (n, n) {
        return Err(SuperpolarError::Shape(n));
    }
    let min_eig = min_hermitian_part_eigenvalue(a1);
    if !(min_eig > 0.0) {
        return Err(SuperpolarError::NotPositiveDefinite(min_eig));
    }
    let lu1 = ComplexLu::factor(a1)?;
    let det_ratio = ComplexLu::factor(a2)?.det() / lu1.det();
    let integral = flat_integral(&SusyIntegrand::gaussian(a1.clone(), a2.clone()), opts)?.value;
    let inv = lu1.inverse();
    let mut entries = Vec::new();
    for j in 0..n {
        for k in 0..n {
            let value = flat_integral(&SusyIntegrand::resolvent_entry(a1.clone(), j, k), opts)?.value;
            let exact = inv[(j, k)];
            entries.push((j, k, value, exact, (value - exact).norm() / exact.norm().max(1e-300)));
        }
    }
    Ok(SusyReport {
        integral,
        det_ratio,
        rel_err: (integral - det_ratio).norm() / det_ratio.norm(),
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Report {
    /// Double-copy supersymmetric representation in polar coordinates.
    pub susy: f64,
    /// `E|E + iε - λV|⁻²` by direct Cauchy quadrature.
    pub oracle: f64,
    pub rel_err: f64,
}

/// `E[|G(E+iε)|²]` for a single site with Cauchy potential, from the
/// two-supervector representation with Fourier factor `e^{-λ|r₁² - r₂²|}`.
pub fn verify_g2_single_site(
    sites: usize,
    energy: f64,
    epsilon: f64,
    lambda: f64,
    opts: &QuadOptions,
) -> Result<G2Report> {
    if sites != 1 {
        return Err(SuperpolarError::UnsupportedScale(sites));
    }
    if !(energy.is_finite() && epsilon > 0.0 && epsilon.is_finite() && lambda >= 0.0 && lambda.is_finite()) {
        return Err(SuperpolarError::BadParameters);
    }
    // site 0 carries Φ, site 1 carries Φ̃
    let plus = Complex64::new(-epsilon, energy);
    let minus = Complex64::new(-epsilon, -energy);
    let integrand = SusyIntegrand::new(2, move |v| {
        let expo = &v.norm_sq(0).scale(plus) + &v.norm_sq(1).scale(minus);
        let g = expo.exp()?;
        let prefactor = &(v.z(0) * v.zbar(0)) * &(v.z(1) * v.zbar(1));
        Ok(&prefactor * &g)
    })
    .with_weight(move |r| (-lambda * (r[0] * r[0] - r[1] * r[1]).abs()).exp())
    .with_inner_breaks(|r1| vec![r1])
    .with_scale(1.0 / epsilon.sqrt())
    .with_angular(AngularSymmetry::Independent);
    let decomposition = polar_decomposition(&integrand, opts)?;
    let oracle = require(cauchy_expectation(
        |w| Ok::<_, SuperpolarError>(Complex64::new(1.0 / Complex64::new(energy - lambda * w, epsilon).norm_sqr(), 0.0)),
        &QuadOptions { rel_tol: opts.rel_tol * 0.01, abs_tol: 0.0, ..*opts },
    )?)?
    .value
    .re;
    let susy = decomposition.total.re;
    Ok(G2Report { susy, oracle, rel_err: (susy - oracle).abs() / oracle.abs() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn opts() -> QuadOptions {
        QuadOptions::new(1e-10, 1e-13)
    }

    #[test]
    fn polar_substitution_makes_norm_real() {
        let v = SuperVector::polar(&[false, true], &[0.7, 0.0], &[1.3, 0.0]).unwrap();
        let s = v.norm_sq(0);
        assert!(s.nilpotent_part().max_abs() < 1e-15);
        assert!((s.body() - c(0.49, 0.0)).norm() < 1e-15);
        assert!(v.norm_sq(1).is_zero());
    }

    #[test]
    fn unit_gaussian_integrates_to_one() {
        let id = DMatrix::identity(1, 1);
        let f = SusyIntegrand::gaussian(id.clone(), id);
        let r = flat_integral(&f, &opts()).unwrap();
        assert!((r.value - 1.0).norm() < 1e-10);
        let d = polar_decomposition(&f, &opts()).unwrap();
        assert!(d.term(&[false]).unwrap().norm() < 1e-14);
        assert!((d.term(&[true]).unwrap() - 1.0).norm() < 1e-14);
    }

    #[test]
    fn second_moment_split() {
        let f = SusyIntegrand::resolvent_entry(DMatrix::identity(1, 1), 0, 0);
        let flat = flat_integral(&f, &opts()).unwrap().value;
        assert!((flat - 1.0).norm() < 1e-10);
        let d = polar_decomposition(&f, &opts()).unwrap();
        // after the ρ integration only r e^{-r²} survives
        let oracle = crate::quad::integrate_half_line(|r| Ok::<_, ()>(c(2.0 * r * (-r * r).exp(), 0.0)), 1.0, &opts()).unwrap();
        assert!((d.term(&[false]).unwrap() - oracle.value).norm() < 1e-10);
        assert!(d.term(&[true]).unwrap().norm() < 1e-15);
    }

    #[test]
    fn bump_example_gives_inverse_e() {
        let f = bump_integrand();
        let e_inv = (-1.0f64).exp();
        assert!((flat_integral(&f, &opts()).unwrap().value - e_inv).norm() < 1e-9);
        let d = polar_decomposition(&f, &opts()).unwrap();
        assert!(d.term(&[false]).unwrap().norm() < 1e-14);
        assert!((d.term(&[true]).unwrap() - e_inv).norm() < 1e-15);
    }

    #[test]
    fn one_dimensional_gaussian_ratio() {
        let a1 = DMatrix::from_element(1, 1, c(2.0, 0.0));
        let a2 = DMatrix::from_element(1, 1, c(3.0, 0.0));
        let rep = verify_susy_representation(&a1, &a2, &opts()).unwrap();
        assert!((rep.integral - 1.5).norm() < 1e-9);
        assert!(rep.max_rel_err() < 1e-8);
    }

    #[test]
    fn representation_rejects_indefinite_kernel() {
        let a1 = DMatrix::from_element(1, 1, c(-1.0, 0.0));
        assert!(matches!(
            verify_susy_representation(&a1, &a1, &opts()),
            Err(SuperpolarError::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn too_many_sites_rejected() {
        let id = DMatrix::identity(3, 3);
        let f = SusyIntegrand::gaussian(id.clone(), id);
        assert!(matches!(flat_integral(&f, &opts()), Err(SuperpolarError::TooManySites(3))));
    }

    #[test]
    fn g2_without_disorder() {
        let r = verify_g2_single_site(1, 0.4, 0.5, 0.0, &opts()).unwrap();
        let exact = 1.0 / (0.16 + 0.25);
        assert!((r.susy - exact).abs() < 1e-8 * exact);
        assert!((r.oracle - exact).abs() < 1e-10 * exact);
        assert!(verify_g2_single_site(2, 0.0, 1.0, 1.0, &opts()).is_err());
    }

    #[test]
    fn angular_detection() {
        let a = DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, 0.3), c(-0.2, 0.1), c(1.5, 0.0)]);
        let f = SusyIntegrand::gaussian(a.clone(), a).with_angular(AngularSymmetry::Auto);
        let red = Reduced::new(&f, vec![false, false], false);
        assert_eq!(red.detect_symmetry().unwrap(), AngularSymmetry::GlobalPhase);
        let g = bump_integrand().with_angular(AngularSymmetry::Auto);
        assert_eq!(Reduced::new(&g, vec![false], false).detect_symmetry().unwrap(), AngularSymmetry::Independent);
    }

    #[test]
    fn g2_with_cauchy_disorder() {
        let r = verify_g2_single_site(1, 0.0, 1.0, 1.0, &opts()).unwrap();
        // (ε+λ)/(ε(E²+(ε+λ)²)) at E = 0, ε = λ = 1
        assert!((r.oracle - 0.5).abs() < 1e-9);
        assert!(r.rel_err < 1e-6, "{r:?}");
        let r = verify_g2_single_site(1, 0.7, 0.3, 0.5, &opts()).unwrap();
        assert!(r.rel_err < 1e-6, "{r:?}");
    }

    #[test]
    fn two_site_gaussian_ratio() {
        let a1 = DMatrix::from_row_slice(2, 2, &[c(2.0, 0.3), c(0.4, -0.2), c(-0.1, 0.5), c(1.5, -0.4)]);
        let a2 = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.2, 0.1), c(0.0, -0.3), c(0.8, 0.6)]);
        let rep = verify_susy_representation(&a1, &a2, &QuadOptions::new(1e-9, 1e-12)).unwrap();
        let oracle = a2.clone().lu().determinant() / a1.clone().lu().determinant();
        assert!((rep.integral - oracle).norm() < 1e-7 * oracle.norm());
        assert!(rep.max_rel_err() < 1e-7, "{rep:?}");
    }

    #[test]
    fn annulus_boundary_terms_vanish() {
        let f = annulus_integrand();
        let reference = annulus_reference(&opts()).value;
        assert!((flat_integral(&f, &opts()).unwrap().value - reference).norm() < 1e-9 * reference.norm());
        let d = polar_decomposition(&f, &opts()).unwrap();
        assert_eq!(d.term(&[true]).unwrap(), c(0.0, 0.0));
        assert!((d.total - reference).norm() < 1e-9 * reference.norm());
    }
}
