//! Exact averaged resolvent for Cauchy disorder, the negatively correlated
//! toymodel (quadrature oracle, polar decomposition with boundary remainder,
//! error sweep) and numerical checks of the resolvent bounds used for it.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::disorder::{DisorderError, DisorderModel, RngStream};
use crate::lattice::{Lattice, LatticeError};
use crate::linalg::{min_hermitian_part_eigenvalue, ComplexLu, LinalgError};
use crate::quad::{cauchy_expectation, integrate, periodic_trapezoid, QuadOptions, QuadResult};
use crate::resolvent::{eig_spectrum, trace_from_spectrum, SpectralProbe};

#[derive(Debug, Error)]
pub enum LloydError {
    #[error("the exact formula needs i.i.d. or non-negatively correlated disorder, got {0}")]
    UnsupportedModel(&'static str),
    #[error("toymodel operations need a toymodel disorder")]
    NotToymodel,
    #[error("two-site decomposition needs exactly 2 sites, got {0}")]
    UnsupportedScale(usize),
    #[error("ε + λ·min T̂ must be positive (ε = {epsilon}, λ = {lambda})")]
    NoImaginaryPart { epsilon: f64, lambda: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("Ẽ is required for the generating function")]
    MissingEnergyTilde,
    #[error("quadrature did not converge: value {value}, estimated error {error:e}")]
    NotConverged { value: Complex64, error: f64 },
    #[error(transparent)]
    Disorder(#[from] DisorderError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, LloydError>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn require(r: QuadResult) -> Result<QuadResult> {
    if r.converged {
        Ok(r)
    } else {
        Err(LloydError::NotConverged { value: r.value, error: r.error })
    }
}

fn check_probe(probe: &SpectralProbe) -> Result<()> {
    let ok = probe.energy.is_finite()
        && probe.epsilon.is_finite()
        && probe.lambda.is_finite()
        && probe.epsilon >= 0.0
        && probe.lambda >= 0.0
        && probe.energy_tilde.map_or(true, f64::is_finite);
    if ok {
        Ok(())
    } else {
        Err(LloydError::Parameter(format!("probe {probe:?}")))
    }
}

/// Diagonal of `T̂` for a model the exact formula applies to.
fn exact_shift(lattice: &Lattice, model: &DisorderModel, probe: &SpectralProbe) -> Result<Vec<f64>> {
    check_probe(probe)?;
    match model {
        DisorderModel::Toymodel { .. } => return Err(LloydError::UnsupportedModel("toymodel")),
        m if !m.is_nonnegative() => return Err(LloydError::UnsupportedModel("correlated with negative entries")),
        _ => {}
    }
    let t_hat = model.row_sums(lattice.num_sites())?;
    let min = t_hat.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(probe.epsilon + probe.lambda * min > 0.0) {
        return Err(LloydError::NoImaginaryPart { epsilon: probe.epsilon, lambda: probe.lambda });
    }
    Ok(t_hat)
}

/// `(E + iε)I + iλT̂ - H₀` for energy `energy`.
fn shifted_free(lattice: &Lattice, t_hat: &[f64], energy: f64, epsilon: f64, lambda: f64) -> DMatrix<Complex64> {
    let h0 = lattice.laplacian().matrix;
    let n = h0.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let mut v = c(-h0[(i, j)], 0.0);
        if i == j {
            v += c(energy, epsilon + lambda * t_hat[i]);
        }
        v
    })
}

/// `E[Tr G(E + iε)] = Tr((E + iε)I + iλT̂ - H₀)⁻¹`. `ε = 0` is allowed.
pub fn exact_trace(lattice: &Lattice, model: &DisorderModel, probe: &SpectralProbe) -> Result<Complex64> {
    let t_hat = exact_shift(lattice, model, probe)?;
    let m = shifted_free(lattice, &t_hat, probe.energy, probe.epsilon, probe.lambda);
    Ok(ComplexLu::factor(&m)?.trace_inverse())
}

/// `exact_trace` on an energy grid; uses the spectrum of `H₀` when `T̂` is constant.
pub fn exact_trace_grid(
    lattice: &Lattice,
    model: &DisorderModel,
    energies: &[f64],
    epsilon: f64,
    lambda: f64,
) -> Result<Vec<Complex64>> {
    let probe = SpectralProbe::new(energies.first().copied().unwrap_or(0.0), epsilon, lambda);
    let t_hat = exact_shift(lattice, model, &probe)?;
    if t_hat.iter().all(|&t| t == t_hat[0]) {
        let spec = eig_spectrum(&lattice.laplacian());
        let shift = epsilon + lambda * t_hat[0];
        return Ok(energies.iter().map(|&e| trace_from_spectrum(&spec, c(e, shift))).collect());
    }
    energies
        .iter()
        .map(|&e| {
            let m = shifted_free(lattice, &t_hat, e, epsilon, lambda);
            Ok(ComplexLu::factor(&m)?.trace_inverse())
        })
        .collect()
}

/// `ρ(E) = -(πN)⁻¹ Im E[Tr G]` from the exact formula.
pub fn exact_dos(lattice: &Lattice, model: &DisorderModel, energies: &[f64], epsilon: f64, lambda: f64) -> Result<Vec<f64>> {
    let n = lattice.num_sites() as f64;
    Ok(exact_trace_grid(lattice, model, energies, epsilon, lambda)?
        .into_iter()
        .map(|t| -t.im / (PI * n))
        .collect())
}

/// `E[𝒢(E, Ẽ)] = det((E+iε)I + iλT̂ - H₀) / det((Ẽ+iε)I + iλT̂ - H₀)`.
pub fn exact_genfun(lattice: &Lattice, model: &DisorderModel, probe: &SpectralProbe) -> Result<Complex64> {
    let t_hat = exact_shift(lattice, model, probe)?;
    let tilde = probe.energy_tilde.ok_or(LloydError::MissingEnergyTilde)?;
    let num = ComplexLu::factor(&shifted_free(lattice, &t_hat, probe.energy, probe.epsilon, probe.lambda))?.log_det();
    let den = ComplexLu::factor(&shifted_free(lattice, &t_hat, tilde, probe.epsilon, probe.lambda))?.log_det();
    Ok((num - den).exp())
}

fn toymodel_params(model: &DisorderModel) -> Result<(f64, (usize, usize))> {
    match model {
        DisorderModel::Toymodel { delta, pair } => Ok((*delta, *pair)),
        _ => Err(LloydError::NotToymodel),
    }
}

/// `E[Tr G]` for the toymodel with every `W_j` off the pair integrated in
/// closed form and the pair average `(w₁, w₂)` done by 2D quadrature.
pub fn toymodel_oracle(
    lattice: &Lattice,
    model: &DisorderModel,
    probe: &SpectralProbe,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    check_probe(probe)?;
    let (delta, (p, q)) = toymodel_params(model)?;
    let n = lattice.num_sites();
    let lambda = probe.lambda;
    // G₀ = (z + iλP̂ - H₀)⁻¹ with P̂ the indicator of sites off the pair
    let mut t_hat = vec![1.0; n];
    t_hat[p] = 0.0;
    t_hat[q] = 0.0;
    let lu = ComplexLu::factor(&shifted_free(lattice, &t_hat, probe.energy, probe.epsilon, lambda))?;
    let tr0 = lu.trace_inverse();
    let gp = lu.inverse_column(p);
    let gq = lu.inverse_column(q);
    let g = [[gp[p], gq[p]], [gp[q], gq[q]]];
    let dot = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<Complex64>();
    // (G₀²)_ab = Σ_k (G₀)_ak (G₀)_kb, and G₀ is complex symmetric
    let g2 = [[dot(&gp, &gp), dot(&gp, &gq)], [dot(&gq, &gp), dot(&gq, &gq)]];
    let d2 = delta * delta;
    let trace_at = |w1: f64, w2: f64| -> Complex64 {
        let k = [lambda * (w1 - d2 * w2), lambda * (w2 - d2 * w1)];
        // (I - K G₀_SS)⁻¹ K (G₀²)_SS, traced
        let m = [[1.0 - k[0] * g[0][0], -k[0] * g[0][1]], [-k[1] * g[1][0], 1.0 - k[1] * g[1][1]]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
        let kq = [[g2[0][0] * k[0], g2[0][1] * k[0]], [g2[1][0] * k[1], g2[1][1] * k[1]]];
        let mut tr = tr0;
        for i in 0..2 {
            for j in 0..2 {
                tr += inv[i][j] * kq[j][i];
            }
        }
        tr
    };
    let inner_opts = QuadOptions { rel_tol: opts.rel_tol * 0.1, abs_tol: opts.abs_tol * 0.1, ..*opts };
    let mut error = 0.0;
    let mut evaluations = 0;
    let outer = cauchy_expectation(
        |w1| {
            let inner = require(cauchy_expectation(|w2| Ok::<_, LloydError>(trace_at(w1, w2)), &inner_opts)?)?;
            error += inner.error / PI;
            evaluations += inner.evaluations;
            Ok::<_, LloydError>(inner.value)
        },
        opts,
    )?;
    let outer = require(outer)?;
    Ok(QuadResult { error: outer.error + error / outer.evaluations.max(1) as f64, evaluations, ..outer })
}

/// Sign pattern `β` of the disorder Fourier exponent on a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Beta {
    PlusPlus,
    PlusMinus,
    MinusPlus,
}

impl Beta {
    pub const ALL: [Beta; 3] = [Beta::PlusPlus, Beta::PlusMinus, Beta::MinusPlus];

    /// `T^β` such that `|s₁ - δ²s₂| + |s₂ - δ²s₁| = T^β₁ s₁ + T^β₂ s₂` on the region.
    pub fn t(self, delta: f64) -> [f64; 2] {
        let d2 = delta * delta;
        match self {
            Beta::PlusPlus => [1.0 - d2, 1.0 - d2],
            Beta::PlusMinus => [1.0 + d2, -(1.0 + d2)],
            Beta::MinusPlus => [-(1.0 + d2), 1.0 + d2],
        }
    }

    /// Region containing `(s₁, s₂) = (|z₁|², |z₂|²)`.
    pub fn of(s1: f64, s2: f64, delta: f64) -> Beta {
        let d2 = delta * delta;
        if s1 < d2 * s2 {
            Beta::MinusPlus
        } else if s2 < d2 * s1 {
            Beta::PlusMinus
        } else {
            Beta::PlusPlus
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Beta::PlusPlus => "++",
            Beta::PlusMinus => "+-",
            Beta::MinusPlus => "-+",
        }
    }
}

/// Block decomposition of `C = -i(E + iε + iλV - H₀)` after the disorder
/// average, sites ordered as (pair, rest).
#[derive(Debug, Clone)]
pub struct ToymodelBlocks {
    pub pair: (usize, usize),
    pub rest: Vec<usize>,
    pub delta: f64,
    pub lambda: f64,
    /// `-i(E - H₀) + ε` on the pair.
    pub a0: DMatrix<Complex64>,
    /// `-i(E - H₀) + λ + ε` off the pair.
    pub b: DMatrix<Complex64>,
    /// Pair-to-rest adjacency (2 × (N-2)).
    pub d: DMatrix<f64>,
}

impl ToymodelBlocks {
    pub fn new(lattice: &Lattice, delta: f64, pair: (usize, usize), energy: f64, epsilon: f64, lambda: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&delta) {
            return Err(LloydError::Disorder(DisorderError::BadDelta(delta)));
        }
        if !(lambda > 0.0 && epsilon >= 0.0 && energy.is_finite()) {
            return Err(LloydError::Parameter(format!("λ = {lambda}, ε = {epsilon}, E = {energy}")));
        }
        let n = lattice.num_sites();
        if pair.0.max(pair.1) >= n || pair.0 == pair.1 {
            return Err(LloydError::Lattice(LatticeError::SiteOutOfRange(pair.0.max(pair.1))));
        }
        let h0 = lattice.laplacian().matrix;
        let sites = [pair.0, pair.1];
        let rest: Vec<usize> = (0..n).filter(|&j| j != pair.0 && j != pair.1).collect();
        let entry = |i: usize, j: usize, extra: f64| {
            let mut v = c(0.0, h0[(i, j)]);
            if i == j {
                v += c(extra, -energy);
            }
            v
        };
        let a0 = DMatrix::from_fn(2, 2, |i, j| entry(sites[i], sites[j], epsilon));
        let b = DMatrix::from_fn(rest.len(), rest.len(), |i, j| entry(rest[i], rest[j], lambda + epsilon));
        let d = DMatrix::from_fn(2, rest.len(), |i, j| -h0[(sites[i], rest[j])]);
        Ok(Self { pair, rest, delta, lambda, a0, b, d })
    }

    pub fn a_beta(&self, beta: Beta) -> DMatrix<Complex64> {
        let t = beta.t(self.delta);
        let mut a = self.a0.clone();
        a[(0, 0)] += self.lambda * t[0];
        a[(1, 1)] += self.lambda * t[1];
        a
    }

    /// Full `C_β = [[A_β, -iD], [-iDᵀ, B]]`.
    pub fn c_beta(&self, beta: Beta) -> DMatrix<Complex64> {
        let m = self.rest.len();
        let a = self.a_beta(beta);
        DMatrix::from_fn(m + 2, m + 2, |i, j| match (i < 2, j < 2) {
            (true, true) => a[(i, j)],
            (true, false) => c(0.0, -self.d[(i, j - 2)]),
            (false, true) => c(0.0, -self.d[(j, i - 2)]),
            (false, false) => self.b[(i - 2, j - 2)],
        })
    }

    fn d_complex(&self) -> DMatrix<Complex64> {
        self.d.map(|x| c(x, 0.0))
    }

    /// `D B⁻¹ Dᵀ`.
    fn coupling(&self) -> Result<DMatrix<Complex64>> {
        if self.rest.is_empty() {
            return Ok(DMatrix::zeros(2, 2));
        }
        let d = self.d_complex();
        let binv = ComplexLu::factor(&self.b)?.inverse();
        Ok(&d * binv * d.transpose())
    }

    /// `S_β = A_β + D B⁻¹ Dᵀ`.
    pub fn schur(&self, beta: Beta) -> Result<DMatrix<Complex64>> {
        Ok(self.a_beta(beta) + self.coupling()?)
    }

    /// `S₀ = A₀ + D B⁻¹ Dᵀ`.
    pub fn schur0(&self) -> Result<DMatrix<Complex64>> {
        Ok(&self.a0 + self.coupling()?)
    }

    /// `M = 1 - D B⁻² Dᵀ`.
    pub fn m_matrix(&self) -> Result<DMatrix<Complex64>> {
        if self.rest.is_empty() {
            return Ok(DMatrix::identity(2, 2));
        }
        let d = self.d_complex();
        let binv = ComplexLu::factor(&self.b)?.inverse();
        Ok(DMatrix::identity(2, 2) - &d * &binv * &binv * d.transpose())
    }

    /// `X = A_{-+} - A_{++}`.
    pub fn x_matrix(&self) -> DMatrix<Complex64> {
        self.a_beta(Beta::MinusPlus) - self.a_beta(Beta::PlusPlus)
    }

    /// `v_θ = (v·δe^{iθ₁}, e^{iθ₂})`; `v = 1` is the boundary vector.
    pub fn v_theta(&self, v: f64, theta1: f64, theta2: f64) -> [Complex64; 2] {
        [Complex64::from_polar(v * self.delta, theta1), Complex64::from_polar(1.0, theta2)]
    }

    pub fn quadratic(m: &DMatrix<Complex64>, v: &[Complex64; 2]) -> Complex64 {
        let mut acc = c(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                acc += v[i].conj() * m[(i, j)] * v[j];
            }
        }
        acc
    }
}

/// Terms of the two-site decomposition, in units of `Tr C⁻¹ = i Tr G`,
/// together with the totals converted to `E[Tr G]`.
#[derive(Debug, Clone, Serialize)]
pub struct ToymodelDecomposition {
    pub delta: f64,
    pub i_pp: Complex64,
    pub i_pm: Complex64,
    pub i_mp: Complex64,
    /// Boundary remainder `R(h)`: the two boundary pieces evaluated on
    /// `|z₁| = δ|z₂|` and `|z₂| = δ|z₁|` respectively, with positive sign.
    pub remainder: Complex64,
    /// `-π⁻² ∫ λδ²r [e^{-λ(1-δ⁴)r²} + δ²e^{-λ(1-δ⁴)δ²r²}] h` with both pieces on
    /// `|z₁| = δ|z₂|`. Kept for comparison; it does not close the identity.
    pub remainder_alt: Complex64,
    /// `-i(Σ_β I_β + R)`.
    pub total: Complex64,
    pub total_alt: Complex64,
    pub error: f64,
}

/// `4 det C ∫ cosφ sinφ ⟨q(φ,ψ)⁻³⟩_ψ dφ` over `(lo, hi)`; the whole quarter
/// circle gives `Tr C⁻¹` for a 2×2 `C` with positive definite Hermitian part.
pub fn polar_trace_piece(cm: &DMatrix<Complex64>, lo: f64, hi: f64, opts: &QuadOptions) -> Result<QuadResult> {
    let det = cm[(0, 0)] * cm[(1, 1)] - cm[(0, 1)] * cm[(1, 0)];
    let inner_opts = QuadOptions { rel_tol: opts.rel_tol * 0.1, abs_tol: opts.abs_tol * 0.1, ..*opts };
    let r = integrate(
        |phi: f64| {
            let (s, co) = phi.sin_cos();
            let a = cm[(0, 0)] * co * co + cm[(1, 1)] * s * s;
            let (c12, c21) = (cm[(0, 1)] * co * s, cm[(1, 0)] * co * s);
            let avg = require(periodic_trapezoid(
                |psi: f64| {
                    let e = Complex64::from_polar(1.0, psi);
                    let q = a + c12 * e + c21 * e.conj();
                    Ok::<_, LloydError>(q.powi(-3))
                },
                16,
                1 << 14,
                &inner_opts,
            )?)?;
            Ok::<_, LloydError>(avg.value / (2.0 * PI) * (4.0 * co * s))
        },
        lo,
        hi,
        opts,
    )?;
    let r = require(r)?;
    Ok(QuadResult { value: r.value * det, error: r.error * det.norm(), ..r })
}

/// `∫_0^{2π} f(ψ) dψ` for smooth periodic `f`.
fn angular<F>(f: F, opts: &QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> std::result::Result<Complex64, LloydError>,
{
    require(periodic_trapezoid(f, 16, 1 << 14, opts)?)
}

/// Two-site decomposition `Σ_β I_β + R(h)` of `E[Tr C⁻¹]`.
pub fn toymodel_decomposition(
    lattice: &Lattice,
    model: &DisorderModel,
    probe: &SpectralProbe,
    opts: &QuadOptions,
) -> Result<ToymodelDecomposition> {
    check_probe(probe)?;
    let (delta, pair) = toymodel_params(model)?;
    let n = lattice.num_sites();
    if n != 2 {
        return Err(LloydError::UnsupportedScale(n));
    }
    let lambda = probe.lambda;
    let blocks = ToymodelBlocks::new(lattice, delta, pair, probe.energy, probe.epsilon, lambda)?;
    // φ < atan δ: |z₂| < δ|z₁|;  φ > atan(1/δ): |z₁| < δ|z₂|
    let cuts = [0.0, delta.atan(), (1.0 / delta).atan(), PI / 2.0];
    let mut terms = [c(0.0, 0.0); 3];
    let mut error = 0.0;
    for w in cuts.windows(2) {
        if w[1] - w[0] <= 0.0 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let beta = Beta::of(mid.cos().powi(2), mid.sin().powi(2), delta);
        let r = polar_trace_piece(&blocks.a_beta(beta), w[0], w[1], opts)?;
        terms[Beta::ALL.iter().position(|&b| b == beta).unwrap()] += r.value;
        error += r.error;
    }

    let a0 = &blocks.a0;
    let d2 = delta * delta;
    let gap = lambda * (1.0 - d2 * d2);
    let form = |x: f64, y: f64, psi: f64| {
        let e = Complex64::from_polar(1.0, psi);
        a0[(0, 0)] * x * x + a0[(1, 1)] * y * y + (a0[(0, 1)] * e + a0[(1, 0)] * e.conj()) * x * y
    };
    let prefactor = lambda * d2 * (1.0 + d2) / PI;
    let remainder = if delta == 0.0 {
        c(0.0, 0.0)
    } else {
        let r = angular(
            |psi| {
                let av = gap + form(delta, 1.0, psi);
                let au = gap + form(1.0, delta, psi);
                Ok(av.powi(-2) + au.powi(-2))
            },
            opts,
        )?;
        error += r.error * prefactor.abs();
        r.value * prefactor
    };
    let remainder_alt = if delta == 0.0 {
        c(0.0, 0.0)
    } else {
        let r = angular(
            |psi| {
                let q = form(delta, 1.0, psi);
                Ok((gap + q).powi(-2) + d2 * (gap * d2 + q).powi(-2))
            },
            opts,
        )?;
        -r.value * prefactor
    };
    let sum: Complex64 = terms.iter().sum();
    let to_g = c(0.0, -1.0);
    Ok(ToymodelDecomposition {
        delta,
        i_pp: terms[0],
        i_pm: terms[1],
        i_mp: terms[2],
        remainder,
        remainder_alt,
        total: to_g * (sum + remainder),
        total_alt: to_g * (sum + remainder_alt),
        error,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub oracle: Complex64,
    pub exact: Complex64,
    /// `|oracle - exact| / |exact|`.
    pub deviation: f64,
    /// Quadrature error estimate relative to `|exact|`.
    pub quad_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Deviation at `δ = 0`.
    pub floor: f64,
    /// Least-squares slope of `log(deviation - floor)` against `log δ`;
    /// `None` with fewer than two usable rows.
    pub slope: Option<f64>,
}

/// Relative deviation of the toymodel average from the exact formula with
/// shift `λT̂`, for each `δ`.
pub fn toymodel_error_sweep(
    lattice: &Lattice,
    pair: (usize, usize),
    deltas: &[f64],
    probe: &SpectralProbe,
    opts: &QuadOptions,
) -> Result<SweepReport> {
    let row = |delta: f64| -> Result<SweepRow> {
        let model = DisorderModel::toymodel(lattice, delta, pair)?;
        let oracle = toymodel_oracle(lattice, &model, probe, opts)?;
        let n = lattice.num_sites();
        let t_hat = model.row_sums(n)?;
        let m = shifted_free(lattice, &t_hat, probe.energy, probe.epsilon, probe.lambda);
        let exact = ComplexLu::factor(&m)?.trace_inverse();
        Ok(SweepRow {
            delta,
            oracle: oracle.value,
            exact,
            deviation: (oracle.value - exact).norm() / exact.norm(),
            quad_error: oracle.error / exact.norm(),
        })
    };
    let mut all: Vec<f64> = deltas.to_vec();
    let with_zero = !all.contains(&0.0);
    if with_zero {
        all.insert(0, 0.0);
    }
    let mut rows: Vec<SweepRow> = all.par_iter().map(|&d| row(d)).collect::<Result<_>>()?;
    let floor = rows.iter().find(|r| r.delta == 0.0).map_or(0.0, |r| r.deviation);
    if with_zero {
        rows.remove(0);
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.delta > 0.0 && r.deviation > floor)
        .map(|r| (r.delta.ln(), (r.deviation - floor).ln()))
        .collect();
    Ok(SweepReport { rows, floor, slope: fit_slope(&points) })
}

/// Least-squares slope through `(x, y)` points.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn random_unit_vector(n: usize, rng: &mut RngStream) -> Vec<Complex64> {
    let mut normal = || {
        let (u1, u2) = (rng.uniform_open(), rng.uniform_open());
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    };
    let v: Vec<Complex64> = (0..n).map(|_| c(normal(), normal())).collect();
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// `min_f Re(f* M f)` over `count` random unit vectors.
fn sampled_form_min(m: &DMatrix<Complex64>, count: usize, seed: u64) -> f64 {
    let n = m.nrows();
    let mut rng = RngStream::new(seed, 0);
    (0..count)
        .map(|_| {
            let f = random_unit_vector(n, &mut rng);
            let mut acc = c(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    acc += f[i].conj() * m[(i, j)] * f[j];
                }
            }
            acc.re
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Serialize)]
pub struct CombesThomasReport {
    pub mu: f64,
    /// Largest `|B⁻¹_ij| / ((2/λ) e^{-μ|i-j|})`; the bound holds when `<= 1`.
    pub worst_ratio: f64,
    /// Lattice sites `(i, j)` attaining `worst_ratio`.
    pub worst: (usize, usize),
    pub max_diagonal: f64,
    /// `min Re(f* B⁻¹ f)` over the random unit vectors.
    pub form_min: f64,
    /// `λ/(λ² + (4d)²)`; only claimed for `E ∈ [0, 4d]`.
    pub form_bound: f64,
    pub form_applicable: bool,
    pub passed: bool,
}

/// Entrywise exponential decay of `B⁻¹` with `B = -i(E + iλ - H₀)` on the
/// lattice minus `pair`, and the lower bound on `Re(f* B⁻¹ f)`.
pub fn combes_thomas_check(
    lattice: &Lattice,
    pair: (usize, usize),
    lambda: f64,
    energy: f64,
    eta: f64,
    vectors: usize,
    seed: u64,
) -> Result<CombesThomasReport> {
    if !(eta > 0.0) {
        return Err(LloydError::Parameter(format!("η must be positive, got {eta}")));
    }
    let blocks = ToymodelBlocks::new(lattice, 0.0, pair, energy, 0.0, lambda)?;
    let d = lattice.dim() as f64;
    let mu = lambda * eta / (lambda + 4.0 * d * eta.exp());
    let binv = ComplexLu::factor(&blocks.b)?.inverse();
    let rest = &blocks.rest;
    let mut worst_ratio = 0.0;
    let mut worst = (rest[0], rest[0]);
    let mut max_diagonal: f64 = 0.0;
    for (a, &i) in rest.iter().enumerate() {
        max_diagonal = max_diagonal.max(binv[(a, a)].norm());
        for (b, &j) in rest.iter().enumerate() {
            let bound = 2.0 / lambda * (-mu * lattice.distance(i, j) as f64).exp();
            let ratio = binv[(a, b)].norm() / bound;
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst = (i, j);
            }
        }
    }
    let form_min = sampled_form_min(&binv, vectors, seed);
    let form_bound = lambda / (lambda * lambda + 16.0 * d * d);
    let form_applicable = (0.0..=4.0 * d).contains(&energy);
    let passed = worst_ratio <= 1.0 && (!form_applicable || form_min >= form_bound);
    Ok(CombesThomasReport { mu, worst_ratio, worst, max_diagonal, form_min, form_bound, form_applicable, passed })
}

#[derive(Debug, Clone, Serialize)]
pub struct SchurReport {
    /// Smallest eigenvalue of the Hermitian part of `S_{++}`.
    pub min_eigenvalue: f64,
    /// `min Re(f* S_{++} f)` over random unit vectors.
    pub form_min: f64,
    /// `λ/2`.
    pub bound: f64,
    pub margin: f64,
    /// `|Λ|λ / (|Tr C_{++}⁻¹| (λ+1)²)`.
    pub k_empirical: f64,
    pub passed: bool,
}

/// Lower bound `Re(f* S_{++} f) >= λ/2` and the constant in
/// `|Tr C_{++}⁻¹| >= |Λ|λ/(K(λ+1)²)`.
pub fn schur_bounds_check(
    lattice: &Lattice,
    pair: (usize, usize),
    delta: f64,
    lambda: f64,
    energy: f64,
    vectors: usize,
    seed: u64,
) -> Result<SchurReport> {
    if !(0.0..=0.5).contains(&delta) {
        return Err(LloydError::Parameter(format!("δ must lie in [0, 1/2], got {delta}")));
    }
    let blocks = ToymodelBlocks::new(lattice, delta, pair, energy, 0.0, lambda)?;
    let s = blocks.schur(Beta::PlusPlus)?;
    let min_eigenvalue = min_hermitian_part_eigenvalue(&s);
    let form_min = sampled_form_min(&s, vectors, seed).min(min_eigenvalue);
    let bound = lambda / 2.0;
    let k_empirical = k_empirical(&blocks, lattice.num_sites())?;
    Ok(SchurReport {
        min_eigenvalue,
        form_min,
        bound,
        margin: form_min - bound,
        k_empirical,
        passed: form_min >= bound,
    })
}

fn k_empirical(blocks: &ToymodelBlocks, n: usize) -> Result<f64> {
    let lambda = blocks.lambda;
    let tr = ComplexLu::factor(&blocks.c_beta(Beta::PlusPlus))?.trace_inverse();
    Ok(n as f64 * lambda / (tr.norm() * (lambda + 1.0).powi(2)))
}

/// `K_emp` for each side length, on the central pair.
pub fn k_sweep(
    base: &crate::lattice::LatticeSpec,
    sides: &[usize],
    delta: f64,
    lambda: f64,
    energy: f64,
) -> Result<Vec<(usize, f64)>> {
    sides
        .iter()
        .map(|&l| {
            let lattice = Lattice::new(crate::lattice::LatticeSpec { l, ..*base })?;
            let pair = lattice.central_pair().ok_or(LloydError::UnsupportedScale(lattice.num_sites()))?;
            let blocks = ToymodelBlocks::new(&lattice, delta, pair, energy, 0.0, lambda)?;
            Ok((l, k_empirical(&blocks, lattice.num_sites())?))
        })
        .collect()
}
