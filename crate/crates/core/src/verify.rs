//! Named invariant suites behind `lloydlab verify`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::disorder::{DisorderModel, RngStream};
use crate::grassmann::{grassmann_gaussian, GrassmannElement, GrassmannMatrix, SuperMatrix};
use crate::lattice::{Boundary, Lattice, LatticeSpec};
use crate::linalg::ComplexLu;
use crate::lloyd::{
    combes_thomas_check, fit_slope, k_sweep, schur_bounds_check, toymodel_decomposition, toymodel_oracle, Beta,
    ToymodelBlocks,
};
use crate::quad::QuadOptions;
use crate::resolvent::SpectralProbe;
use crate::superpolar::{
    annulus_integrand, annulus_reference, bump_integrand, flat_integral, polar_decomposition,
    verify_g2_single_site, verify_susy_representation, SusyIntegrand,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Grassmann,
    Susy,
    Polar,
    Decomposition,
    Bounds,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Grassmann => "grassmann",
            Suite::Susy => "susy",
            Suite::Polar => "polar",
            Suite::Decomposition => "decomposition",
            Suite::Bounds => "bounds",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }

    fn failed<E: std::fmt::Display>(name: impl Into<String>, err: E) -> Self {
        Self::new(name, false, format!("error: {err}"))
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Vec<Check> {
    match suite {
        Suite::Grassmann => grassmann_suite(seed),
        Suite::Susy => susy_suite(seed),
        Suite::Polar => polar_suite(),
        Suite::Decomposition => decomposition_suite(),
        Suite::Bounds => bounds_suite(seed),
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn uniform_c(rng: &mut RngStream, scale: f64) -> Complex64 {
    c(scale * (2.0 * rng.uniform_open() - 1.0), scale * (2.0 * rng.uniform_open() - 1.0))
}

/// Random element of `q` generators supported on masks of the given parity.
pub fn random_element(q: usize, odd: bool, rng: &mut RngStream) -> GrassmannElement {
    let terms: Vec<(u64, Complex64)> = (0..1u64 << q)
        .filter(|m| (m.count_ones() % 2 == 1) == odd)
        .map(|m| (m, uniform_c(rng, 1.0)))
        .collect();
    GrassmannElement::from_terms(q, terms).expect("q within limits")
}

fn random_matrix(n: usize, rng: &mut RngStream) -> Vec<Vec<Complex64>> {
    (0..n).map(|_| (0..n).map(|_| uniform_c(rng, 1.0)).collect()).collect()
}

fn random_supermatrix(p: usize, r: usize, q: usize, rng: &mut RngStream) -> SuperMatrix {
    let even = |i: usize, j: usize, rng: &mut RngStream| {
        let mut e = random_element(q, false, rng).nilpotent_part().scale(c(0.3, 0.0));
        let body = uniform_c(rng, 0.5) + if i == j { c(2.0, 0.0) } else { c(0.0, 0.0) };
        e += &GrassmannElement::scalar(q, body).unwrap();
        e
    };
    let a = GrassmannMatrix::from_fn(p, p, q, |i, j| even(i, j, rng)).unwrap();
    let b = GrassmannMatrix::from_fn(r, r, q, |i, j| even(i, j, rng)).unwrap();
    let sigma = GrassmannMatrix::from_fn(p, r, q, |_, _| random_element(q, true, rng)).unwrap();
    let rho = GrassmannMatrix::from_fn(r, p, q, |_, _| random_element(q, true, rng)).unwrap();
    SuperMatrix::new(a, sigma, rho, b).unwrap()
}

fn grassmann_suite(seed: u64) -> Vec<Check> {
    let mut rng = RngStream::new(seed, 1);
    let mut out = Vec::new();

    let mut worst: f64 = 0.0;
    let mut failure = None;
    for trial in 0..200 {
        let n = 1 + trial % 4;
        let m = random_matrix(n, &mut rng);
        let dm = DMatrix::from_fn(n, n, |i, j| m[i][j]);
        match grassmann_gaussian(&m) {
            Ok(v) => worst = worst.max((v - dm.lu().determinant()).norm()),
            Err(e) => failure = Some(e),
        }
    }
    out.push(match failure {
        Some(e) => Check::failed("gaussian integral = det M (200 random, n <= 4)", e),
        None => Check::new("gaussian integral = det M (200 random, n <= 4)", worst < 1e-12, format!("max |err| = {worst:.2e}")),
    });

    let q = 6;
    let mut anti: f64 = 0.0;
    let mut exp_err: f64 = 0.0;
    let mut berezin_err: f64 = 0.0;
    for _ in 0..20 {
        let a = random_element(q, true, &mut rng);
        let b = random_element(q, true, &mut rng);
        anti = anti.max((&(&a * &b) + &(&b * &a)).max_abs()).max((&a * &a).max_abs());
        let x = random_element(q, false, &mut rng);
        let y = random_element(q, false, &mut rng);
        let lhs = (&x + &y).exp().unwrap();
        let rhs = &x.exp().unwrap() * &y.exp().unwrap();
        exp_err = exp_err.max((&lhs - &rhs).max_abs() / rhs.max_abs());
        let f = random_element(q, false, &mut rng);
        let direct = f.berezin(0b110110).unwrap();
        let iterated = f.berezin_ordered(&[1, 2, 4, 5]).unwrap();
        berezin_err = berezin_err.max((&direct - &iterated).max_abs());
    }
    out.push(Check::new("odd elements anticommute, square to zero", anti < 1e-14, format!("max residual {anti:.2e}")));
    out.push(Check::new("exp(a+b) = exp(a)exp(b) for even a, b", exp_err < 1e-12, format!("max rel residual {exp_err:.2e}")));
    out.push(Check::new("Berezin integral = iterated left derivatives", berezin_err < 1e-14, format!("max residual {berezin_err:.2e}")));

    for (p, r) in [(1, 1), (2, 2)] {
        let mut err: f64 = 0.0;
        for _ in 0..5 {
            let x = random_supermatrix(p, r, 4, &mut rng);
            let y = random_supermatrix(p, r, 4, &mut rng);
            let lhs = x.matmul(&y).and_then(|xy| xy.sdet());
            let rhs = x.sdet().and_then(|a| y.sdet().map(|b| &a * &b));
            match (lhs, rhs) {
                (Ok(l), Ok(rr)) => err = err.max((&l - &rr).max_abs() / rr.max_abs()),
                _ => err = f64::INFINITY,
            }
        }
        out.push(Check::new(
            format!("Sdet(XY) = Sdet(X) Sdet(Y), ({p}|{r})"),
            err < 1e-10,
            format!("max rel residual {err:.2e}"),
        ));
    }
    out
}

fn random_kernel(n: usize, rng: &mut RngStream) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |i, j| uniform_c(rng, 0.4) + if i == j { c(1.5, 0.0) } else { c(0.0, 0.0) })
}

fn susy_suite(seed: u64) -> Vec<Check> {
    let mut rng = RngStream::new(seed, 2);
    let opts = QuadOptions::new(1e-10, 1e-13);
    let mut out = Vec::new();
    for (k, n) in [1usize, 1, 1, 2].into_iter().enumerate() {
        let a1 = random_kernel(n, &mut rng);
        let a2 = random_kernel(n, &mut rng);
        let name = format!("∫e^(-Φ*AΦ) = det A₂/det A₁ and (A₁⁻¹)_jk, case {k} (n = {n})");
        out.push(match verify_susy_representation(&a1, &a2, &opts) {
            Ok(r) => Check::new(name, r.max_rel_err() < 1e-8, format!("max rel err {:.2e}", r.max_rel_err())),
            Err(e) => Check::failed(name, e),
        });
    }
    for (e, eps, lam) in [(0.0, 1.0, 1.0), (0.7, 0.3, 0.5)] {
        let name = format!("E|G|² single site, E = {e}, ε = {eps}, λ = {lam}");
        out.push(match verify_g2_single_site(1, e, eps, lam, &opts) {
            Ok(r) => Check::new(name, r.rel_err < 1e-6, format!("susy {:.10} oracle {:.10}", r.susy, r.oracle)),
            Err(err) => Check::failed(name, err),
        });
    }
    out
}

fn split_check(name: &str, f: &SusyIntegrand, opts: &QuadOptions) -> Check {
    match (flat_integral(f, opts), polar_decomposition(f, opts)) {
        (Ok(flat), Ok(polar)) => {
            let diff = (flat.value - polar.total).norm();
            Check::new(name, diff < 1e-6, format!("I = {:.10}, Σ_α I_α = {:.10}, |diff| = {diff:.2e}", flat.value, polar.total))
        }
        (Err(e), _) | (_, Err(e)) => Check::failed(name, e),
    }
}

fn polar_suite() -> Vec<Check> {
    let opts = QuadOptions::new(1e-10, 1e-13);
    let e_inv = (-1.0f64).exp();
    let mut out = Vec::new();
    let example = bump_integrand();
    out.push(match (flat_integral(&example, &opts), polar_decomposition(&example, &opts)) {
        (Ok(flat), Ok(d)) => {
            let i0 = d.term(&[false]).unwrap_or(c(f64::NAN, 0.0));
            let i1 = d.term(&[true]).unwrap_or(c(f64::NAN, 0.0));
            let ok = (flat.value - e_inv).norm() < 1e-8 && i0.norm() < 1e-12 && (i1 - e_inv).norm() < 1e-12;
            Check::new("bump example: I = e⁻¹, split (0, e⁻¹)", ok, format!("I = {:.12}, I_0 = {:.1e}, I_1 = {:.12}", flat.value.re, i0.norm(), i1.re))
        }
        (Err(e), _) | (_, Err(e)) => Check::failed("bump example", e),
    });
    let one = |x: f64| DMatrix::from_element(1, 1, c(x, 0.0));
    out.push(split_check("n = 1: exp(-2z̄z - 3χ̄χ)", &SusyIntegrand::gaussian(one(2.0), one(3.0)), &opts));
    let a = DMatrix::from_row_slice(2, 2, &[c(1.4, 0.2), c(0.3, -0.1), c(-0.2, 0.25), c(1.1, -0.3)]);
    let b = DMatrix::from_row_slice(2, 2, &[c(0.9, 0.0), c(0.1, 0.2), c(0.0, -0.1), c(1.3, 0.4)]);
    out.push(split_check("n = 2: exp(-z̄Az - χ̄Bχ)", &SusyIntegrand::gaussian(a.clone(), b), &opts));
    out.push(split_check("n = 2: z̄₂z₁ exp(-Φ*AΦ)", &SusyIntegrand::resolvent_entry(a, 0, 1), &opts));
    let annulus = annulus_integrand();
    out.push(match polar_decomposition(&annulus, &opts) {
        Ok(d) => {
            let reference = annulus_reference(&opts).value;
            let boundary = d.term(&[true]).map_or(f64::INFINITY, |v| v.norm());
            Check::new(
                "compact support away from 0: I_α = 0 for α ≠ 0",
                boundary < 1e-10 && (d.total - reference).norm() < 1e-8,
                format!("|I_1| = {boundary:.1e}, Σ_α I_α = {:.10}, reference {:.10}", d.total.re, reference.re),
            )
        }
        Err(e) => Check::failed("compact support", e),
    });
    out
}

fn two_site() -> Lattice {
    Lattice::new(LatticeSpec::new(1, 2, Boundary::Restriction)).expect("valid lattice")
}

fn decomposition_suite() -> Vec<Check> {
    let opts = QuadOptions::new(1e-10, 1e-13);
    let lattice = two_site();
    let probe = SpectralProbe::new(0.0, 0.1, 1.0);
    let mut out = Vec::new();
    for delta in [0.1, 0.3] {
        let name = format!("Σ_β I_β + R = oracle, δ = {delta}");
        let model = DisorderModel::toymodel(&lattice, delta, (0, 1)).expect("valid toymodel");
        out.push(match (toymodel_decomposition(&lattice, &model, &probe, &opts), toymodel_oracle(&lattice, &model, &probe, &opts)) {
            (Ok(d), Ok(o)) => {
                let rel = (d.total - o.value).norm() / o.value.norm();
                Check::new(name, rel < 1e-4, format!("total {:.10}, oracle {:.10}, rel {rel:.2e}", d.total, o.value))
            }
            (Err(e), _) | (_, Err(e)) => Check::failed(name, e),
        });
    }
    let deltas = [0.025, 0.05, 0.1];
    let pts: Result<Vec<(f64, f64)>, _> = deltas
        .iter()
        .map(|&d| {
            let model = DisorderModel::toymodel(&lattice, d, (0, 1)).expect("valid toymodel");
            toymodel_decomposition(&lattice, &model, &probe, &opts).map(|r| (d.ln(), r.remainder.norm().ln()))
        })
        .collect();
    out.push(match pts {
        Ok(p) => {
            let slope = fit_slope(&p).unwrap_or(f64::NAN);
            Check::new("R(h) = O(δ²)", (slope - 2.0).abs() < 0.4, format!("fitted order {slope:.3}"))
        }
        Err(e) => Check::failed("R(h) = O(δ²)", e),
    });

    let lat = Lattice::new(LatticeSpec::new(2, 4, Boundary::Periodic)).expect("valid lattice");
    let pair = lat.central_pair().expect("pair");
    match ToymodelBlocks::new(&lat, 0.3, pair, 0.4, 0.0, 1.0) {
        Ok(blocks) => {
            let mut worst: f64 = 0.0;
            for beta in Beta::ALL {
                let full = ComplexLu::factor(&blocks.c_beta(beta)).map(|l| l.det());
                let b = ComplexLu::factor(&blocks.b).map(|l| l.det());
                let s = blocks.schur(beta).ok().and_then(|s| ComplexLu::factor(&s).ok()).map(|l| l.det());
                worst = match (full, b, s) {
                    (Ok(f), Ok(b), Some(s)) => worst.max((f - b * s).norm() / f.norm()),
                    _ => f64::INFINITY,
                };
            }
            out.push(Check::new("det C_β = det B det S_β", worst < 1e-10, format!("max rel err {worst:.2e}")));
            let x = blocks.x_matrix();
            let body_err = (x[(0, 0)] + 2.0).norm() + (x[(1, 1)] - 2.0 * 0.09).norm() + x[(0, 1)].norm() + x[(1, 0)].norm();
            let mut form_err: f64 = 0.0;
            for i in 0..8 {
                for &v in &[0.0, 0.3, 0.7, 1.0] {
                    let th = 2.0 * PI * i as f64 / 8.0;
                    let f = ToymodelBlocks::quadratic(&x, &blocks.v_theta(v, th, 1.7 * th));
                    form_err = form_err.max((f - c(2.0 * 0.09 * (1.0 - v * v), 0.0)).norm());
                }
            }
            out.push(Check::new(
                "X = 2λ diag(-1, δ²), v*Xv = 2λδ²(1-|v|²)",
                body_err < 1e-14 && form_err < 1e-14,
                format!("body residual {body_err:.1e}, form residual {form_err:.1e}"),
            ));
        }
        Err(e) => out.push(Check::failed("toymodel blocks", e)),
    }
    out
}

fn bounds_suite(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let mut ct_worst: f64 = 0.0;
    let mut form_margin = f64::INFINITY;
    let mut schur_margin = f64::INFINITY;
    let mut cases = 0;
    let mut error = None;
    for d in [1usize, 2] {
        for bc in [Boundary::Periodic, Boundary::Restriction] {
            for l in [4usize, 8, 16] {
                let lattice = match Lattice::new(LatticeSpec::new(d, l, bc)) {
                    Ok(x) => x,
                    Err(e) => {
                        error = Some(e.to_string());
                        continue;
                    }
                };
                let pair = lattice.central_pair().expect("at least two sites");
                for lambda in [0.5, 1.0, 2.0] {
                    for energy in [0.0, 2.0 * d as f64] {
                        cases += 1;
                        match combes_thomas_check(&lattice, pair, lambda, energy, 1.0, 100, seed) {
                            Ok(r) => {
                                ct_worst = ct_worst.max(r.worst_ratio);
                                if r.form_applicable {
                                    form_margin = form_margin.min(r.form_min - r.form_bound);
                                }
                            }
                            Err(e) => error = Some(e.to_string()),
                        }
                        match schur_bounds_check(&lattice, pair, 0.25, lambda, energy, 100, seed) {
                            Ok(r) => schur_margin = schur_margin.min(r.margin),
                            Err(e) => error = Some(e.to_string()),
                        }
                    }
                }
            }
        }
    }
    if let Some(e) = error {
        out.push(Check::failed("bounds grid", e));
    }
    out.push(Check::new(
        "|B⁻¹_ij| <= (2/λ) e^{-μ|i-j|}",
        ct_worst <= 1.0,
        format!("{cases} cases, worst ratio {ct_worst:.3}"),
    ));
    out.push(Check::new("Re f*B⁻¹f >= λ/(λ²+(4d)²)", form_margin >= 0.0, format!("min margin {form_margin:.3e}")));
    out.push(Check::new("Re f*S₊₊f >= λ/2", schur_margin >= 0.0, format!("min margin {schur_margin:.3e}")));
    for d in [1usize, 2] {
        let name = format!("K_emp stable across L ∈ {{8, 16, 32}}, d = {d}");
        out.push(match k_sweep(&LatticeSpec::new(d, 8, Boundary::Periodic), &[8, 16, 32], 0.25, 1.0, 0.0) {
            Ok(ks) => {
                let max = ks.iter().map(|k| k.1).fold(0.0, f64::max);
                let min = ks.iter().map(|k| k.1).fold(f64::INFINITY, f64::min);
                Check::new(name, max / min < 2.0, format!("{ks:?}"))
            }
            Err(e) => Check::failed(name, e),
        });
    }
    out
}
