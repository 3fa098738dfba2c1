//! Reproducible Monte Carlo averages over Cauchy disorder.
//!
//! Samples are grouped into fixed-size batches; each batch is accumulated
//! with Welford's update and the batch summaries are merged along a fixed
//! pairwise tree. The result therefore depends only on `(seed, samples,
//! batch)`, not on the number of worker threads.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disorder::{DisorderError, DisorderModel, RngStream};
use crate::lattice::{Lattice, LatticeError};
use crate::resolvent::{eig_spectrum, gen_function_from_spectrum, green, trace_from_spectrum, ResolventError, SpectralProbe};

#[derive(Debug, Error)]
pub enum McError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("batch size must be positive")]
    ZeroBatch,
    #[error("regularisation ε must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("sample {sample} produced a non-finite value")]
    NonFinite { sample: u64 },
    #[error("functional returned {got} values, expected {expected}")]
    Arity { expected: usize, got: usize },
    #[error(transparent)]
    Disorder(#[from] DisorderError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Resolvent(#[from] ResolventError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McPlan {
    pub samples: usize,
    pub seed: u64,
    pub batch: usize,
}

impl McPlan {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self { samples, seed, batch: 1024 }
    }

    fn check(&self) -> Result<(), McError> {
        if self.samples < 2 {
            return Err(McError::TooFewSamples(self.samples));
        }
        if self.batch == 0 {
            return Err(McError::ZeroBatch);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub mean: Vec<Complex64>,
    /// Standard error of the mean, real and imaginary parts separately.
    pub stderr: Vec<Complex64>,
    pub samples: usize,
    pub seed: u64,
}

impl McEstimate {
    /// `|Δre| ≤ k·σ_re` and `|Δim| ≤ k·σ_im` for component `i`. A zero
    /// standard error demands agreement to rounding.
    pub fn within(&self, i: usize, reference: Complex64, k: f64) -> bool {
        let d = self.mean[i] - reference;
        let slack = 1e-12 * (1.0 + reference.norm());
        d.re.abs() <= k * self.stderr[i].re + slack && d.im.abs() <= k * self.stderr[i].im + slack
    }

    /// Largest `|Δ|/σ` over real and imaginary parts of component `i`.
    pub fn z_score(&self, i: usize, reference: Complex64) -> f64 {
        let d = self.mean[i] - reference;
        let part = |delta: f64, sigma: f64| {
            if sigma > 0.0 {
                delta.abs() / sigma
            } else if delta.abs() <= 1e-12 * (1.0 + reference.norm()) {
                0.0
            } else {
                f64::INFINITY
            }
        };
        part(d.re, self.stderr[i].re).max(part(d.im, self.stderr[i].im))
    }
}

#[derive(Debug, Clone)]
struct Moments {
    count: f64,
    mean: Vec<[f64; 2]>,
    m2: Vec<[f64; 2]>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Self { count: 0.0, mean: vec![[0.0; 2]; dim], m2: vec![[0.0; 2]; dim] }
    }

    fn push(&mut self, x: &[Complex64]) {
        self.count += 1.0;
        for ((m, s), v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            for (part, val) in [v.re, v.im].into_iter().enumerate() {
                let delta = val - m[part];
                m[part] += delta / self.count;
                s[part] += delta * (val - m[part]);
            }
        }
    }

    fn merge(a: Self, b: Self) -> Self {
        if a.count == 0.0 {
            return b;
        }
        if b.count == 0.0 {
            return a;
        }
        let n = a.count + b.count;
        let mut out = Self::new(a.mean.len());
        out.count = n;
        for i in 0..a.mean.len() {
            for p in 0..2 {
                let delta = b.mean[i][p] - a.mean[i][p];
                out.mean[i][p] = a.mean[i][p] + delta * b.count / n;
                out.m2[i][p] = a.m2[i][p] + b.m2[i][p] + delta * delta * a.count * b.count / n;
            }
        }
        out
    }
}

fn tree_reduce(mut parts: Vec<Moments>) -> Moments {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => Moments::merge(a, b),
                None => a,
            });
        }
        parts = next;
    }
    parts.pop().expect("at least one batch")
}

/// Average an arbitrary vector-valued functional of the potential.
///
/// Sample `m` draws its potential from stream `m` of the plan's seed.
pub fn mc_average<F>(plan: &McPlan, model: &DisorderModel, n: usize, dim: usize, f: F) -> Result<McEstimate, McError>
where
    F: Fn(u64, &[f64]) -> Result<Vec<Complex64>, McError> + Sync,
{
    plan.check()?;
    let batches = plan.samples.div_ceil(plan.batch);
    let parts: Vec<Moments> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut acc = Moments::new(dim);
            let start = b * plan.batch;
            let end = (start + plan.batch).min(plan.samples);
            for m in start..end {
                let mut rng = RngStream::new(plan.seed, m as u64);
                let v = model.sample_potential(n, &mut rng)?;
                let x = f(m as u64, &v)?;
                if x.len() != dim {
                    return Err(McError::Arity { expected: dim, got: x.len() });
                }
                if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(McError::NonFinite { sample: m as u64 });
                }
                acc.push(&x);
            }
            Ok(acc)
        })
        .collect::<Result<_, McError>>()?;
    let total = tree_reduce(parts);
    let m = total.count;
    let se = |m2: f64| (m2 / (m - 1.0) / m).sqrt();
    Ok(McEstimate {
        mean: total.mean.iter().map(|v| Complex64::new(v[0], v[1])).collect(),
        stderr: total.m2.iter().map(|v| Complex64::new(se(v[0]), se(v[1]))).collect(),
        samples: plan.samples,
        seed: plan.seed,
    })
}

/// `E[Tr G(E + iε)]` on an energy grid, one disorder draw per sample shared
/// by all grid points.
pub fn mc_trace(
    plan: &McPlan,
    lattice: &Lattice,
    model: &DisorderModel,
    energies: &[f64],
    epsilon: f64,
    lambda: f64,
) -> Result<McEstimate, McError> {
    if !(epsilon > 0.0) {
        return Err(McError::NonPositiveEpsilon(epsilon));
    }
    mc_average(plan, model, lattice.num_sites(), energies.len(), |_, v| {
        let spec = eig_spectrum(&lattice.assemble(lambda, v)?);
        Ok(energies.iter().map(|&e| trace_from_spectrum(&spec, Complex64::new(e, epsilon))).collect())
    })
}

/// Density of states `-(πN)⁻¹ Im E[Tr G]` on a grid (real-valued estimate
/// stored in the real part).
pub fn mc_dos(
    plan: &McPlan,
    lattice: &Lattice,
    model: &DisorderModel,
    energies: &[f64],
    epsilon: f64,
    lambda: f64,
) -> Result<McEstimate, McError> {
    let tr = mc_trace(plan, lattice, model, energies, epsilon, lambda)?;
    let scale = -1.0 / (std::f64::consts::PI * lattice.num_sites() as f64);
    Ok(McEstimate {
        mean: tr.mean.iter().map(|z| Complex64::new(scale * z.im, 0.0)).collect(),
        stderr: tr.stderr.iter().map(|z| Complex64::new(scale.abs() * z.im, 0.0)).collect(),
        ..tr
    })
}

/// `E[𝒢(E, Ẽ)]` at regularisation `ε`.
pub fn mc_genfun(
    plan: &McPlan,
    lattice: &Lattice,
    model: &DisorderModel,
    energy: f64,
    energy_tilde: f64,
    epsilon: f64,
    lambda: f64,
) -> Result<McEstimate, McError> {
    if !(epsilon > 0.0) {
        return Err(McError::NonPositiveEpsilon(epsilon));
    }
    mc_average(plan, model, lattice.num_sites(), 1, |_, v| {
        let spec = eig_spectrum(&lattice.assemble(lambda, v)?);
        Ok(vec![gen_function_from_spectrum(
            &spec,
            Complex64::new(energy, epsilon),
            Complex64::new(energy_tilde, epsilon),
        )])
    })
}

/// `E[G_jk]` and `E[|G_jk|²]` (the latter in the second component).
pub fn mc_entry(
    plan: &McPlan,
    lattice: &Lattice,
    model: &DisorderModel,
    entry: (usize, usize),
    probe: &SpectralProbe,
) -> Result<McEstimate, McError> {
    mc_average(plan, model, lattice.num_sites(), 2, |_, v| {
        let h = lattice.assemble(probe.lambda, v)?;
        let g = green(&h, probe, &[entry])?;
        let gjk = g.entries[0].2;
        Ok(vec![gjk, Complex64::new(gjk.norm_sqr(), 0.0)])
    })
}
