//! One-dimensional quadrature building blocks: adaptive Gauss–Kronrod (7/15)
//! for complex-valued integrands, the tan substitutions used for half-line
//! and Cauchy-weighted integrals, and a node-doubling periodic trapezoid rule.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd Kronrod nodes 1, 3, 5 and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum number of subintervals kept by the adaptive scheme.
    pub max_segments: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-12, max_segments: 2000 }
    }
}

impl QuadOptions {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        Self { rel_tol, abs_tol, ..Self::default() }
    }

    fn target(&self, value: Complex64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.norm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: Complex64,
    /// Estimated absolute error.
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

fn kronrod_segment<F, E>(f: &mut F, a: f64, b: f64) -> Result<Segment, E>
where
    F: FnMut(f64) -> Result<Complex64, E>,
{
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fv = [Complex64::new(0.0, 0.0); 15];
    fv[14] = f(centre)?;
    for i in 0..7 {
        let dx = half * XGK[i];
        fv[2 * i] = f(centre - dx)?;
        fv[2 * i + 1] = f(centre + dx)?;
    }
    let mut kronrod = fv[14] * WGK[7];
    let mut gauss = fv[14] * WG[3];
    let mut resabs = fv[14].norm() * WGK[7];
    for i in 0..7 {
        let pair = fv[2 * i] + fv[2 * i + 1];
        kronrod += pair * WGK[i];
        resabs += (fv[2 * i].norm() + fv[2 * i + 1].norm()) * WGK[i];
        if i % 2 == 1 {
            gauss += pair * WG[i / 2];
        }
    }
    let mean = kronrod * 0.5;
    let mut resasc = (fv[14] - mean).norm() * WGK[7];
    for i in 0..7 {
        resasc += ((fv[2 * i] - mean).norm() + (fv[2 * i + 1] - mean).norm()) * WGK[i];
    }
    let half_abs = half.abs();
    let (resabs, resasc) = (resabs * half_abs, resasc * half_abs);
    let value = kronrod * half;
    // QUADPACK error rescaling
    let mut error = ((kronrod - gauss) * half).norm();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    Ok(Segment { a, b, value, error })
}

/// Adaptive Gauss–Kronrod integration of a fallible complex integrand over
/// the finite interval `[a, b]`.
///
/// The segment with the largest error estimate is bisected until the summed
/// error falls below `max(abs_tol, rel_tol·|I|)` or `max_segments` is reached,
/// in which case the best estimate is returned with `converged = false`.
pub fn integrate<F, E>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult, E>
where
    F: FnMut(f64) -> Result<Complex64, E>,
{
    if a == b {
        return Ok(QuadResult { value: Complex64::new(0.0, 0.0), error: 0.0, evaluations: 0, converged: true });
    }
    let mut segments = vec![kronrod_segment(&mut f, a, b)?];
    let mut evaluations = 15;
    loop {
        let value: Complex64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        if error <= opts.target(value) {
            return Ok(QuadResult { value, error, evaluations, converged: true });
        }
        if segments.len() >= opts.max_segments {
            return Ok(QuadResult { value, error, evaluations, converged: false });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, s)| if s.error > acc.1 { (i, s.error) } else { acc });
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // interval cannot be split further in floating point
            let value: Complex64 = segments.iter().map(|s| s.value).sum::<Complex64>() + seg.value;
            return Ok(QuadResult { value, error, evaluations, converged: false });
        }
        segments.push(kronrod_segment(&mut f, seg.a, mid)?);
        segments.push(kronrod_segment(&mut f, mid, seg.b)?);
        evaluations += 30;
    }
}

/// Infallible convenience wrapper around [`integrate`].
pub fn integrate_fn<F>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> QuadResult
where
    F: FnMut(f64) -> Complex64,
{
    match integrate(|x| Ok::<_, std::convert::Infallible>(f(x)), a, b, opts) {
        Ok(r) => r,
        Err(never) => match never {},
    }
}

/// `∫_0^∞ f(r) dr` through `r = scale·tan(u)`, `u ∈ (0, π/2)`.
pub fn integrate_half_line<F, E>(mut f: F, scale: f64, opts: &QuadOptions) -> Result<QuadResult, E>
where
    F: FnMut(f64) -> Result<Complex64, E>,
{
    integrate(
        |u| {
            let t = u.tan();
            let jac = scale * (1.0 + t * t);
            if !jac.is_finite() {
                return Ok(Complex64::new(0.0, 0.0));
            }
            let v = f(scale * t)?;
            if v == Complex64::new(0.0, 0.0) {
                Ok(v)
            } else {
                Ok(v * jac)
            }
        },
        0.0,
        FRAC_PI_2,
        opts,
    )
}

/// Expectation of `f(W)` for a standard Cauchy variable `W`:
/// `π⁻¹ ∫ f(w) (1+w²)⁻¹ dw = π⁻¹ ∫_{-π/2}^{π/2} f(tan u) du`.
pub fn cauchy_expectation<F, E>(mut f: F, opts: &QuadOptions) -> Result<QuadResult, E>
where
    F: FnMut(f64) -> Result<Complex64, E>,
{
    let r = integrate(|u| f(u.tan()), -FRAC_PI_2, FRAC_PI_2, opts)?;
    Ok(QuadResult { value: r.value / PI, error: r.error / PI, ..r })
}

/// Periodic trapezoid rule for `∫_0^{2π} f(θ) dθ`, doubling the node count
/// from `min_nodes` until successive estimates agree or `max_nodes` is hit.
/// Nodes from coarser levels are reused.
pub fn periodic_trapezoid<F, E>(
    mut f: F,
    min_nodes: usize,
    max_nodes: usize,
    opts: &QuadOptions,
) -> Result<QuadResult, E>
where
    F: FnMut(f64) -> Result<Complex64, E>,
{
    let mut n = min_nodes.max(1);
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..n {
        sum += f(2.0 * PI * k as f64 / n as f64)?;
    }
    let mut estimate = sum * (2.0 * PI / n as f64);
    let mut evaluations = n;
    loop {
        if 2 * n > max_nodes {
            return Ok(QuadResult { value: estimate, error: f64::INFINITY, evaluations, converged: false });
        }
        // odd nodes of the refined grid
        for k in 0..n {
            sum += f(2.0 * PI * (2 * k + 1) as f64 / (2 * n) as f64)?;
        }
        evaluations += n;
        n *= 2;
        let refined = sum * (2.0 * PI / n as f64);
        let error = (refined - estimate).norm();
        estimate = refined;
        if error <= opts.target(estimate) {
            return Ok(QuadResult { value: estimate, error, evaluations, converged: true });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn polynomial_is_exact() {
        let r = integrate_fn(|x| c(x.powi(5) - 3.0 * x * x), -1.0, 2.0, &QuadOptions::default());
        // antiderivative x⁶/6 - x³
        let exact = (64.0 / 6.0 - 8.0) - (1.0 / 6.0 + 1.0);
        assert!((r.value.re - exact).abs() < 1e-13);
        assert!(r.converged);
    }

    #[test]
    fn oscillatory_complex_integrand() {
        let r = integrate_fn(|x| Complex64::new(0.0, 7.0 * x).exp(), 0.0, 3.0, &QuadOptions::new(1e-12, 1e-14));
        let exact = (Complex64::new(0.0, 21.0).exp() - 1.0) / Complex64::new(0.0, 7.0);
        assert!((r.value - exact).norm() < 1e-11);
    }

    #[test]
    fn half_line_gaussian() {
        let r: QuadResult = integrate_half_line(
            |x| Ok::<_, ()>(c(2.0 * x * (-x * x).exp())),
            1.0,
            &QuadOptions::new(1e-12, 1e-14),
        )
        .unwrap();
        assert!((r.value.re - 1.0).abs() < 1e-11);
    }

    #[test]
    fn cauchy_mean_of_resolvent() {
        // E[1/(i·0.1 - W)] = 1/(i·1.1)
        let r = cauchy_expectation(
            |w| Ok::<_, ()>(1.0 / (Complex64::new(0.0, 0.1) - w)),
            &QuadOptions::new(1e-11, 1e-14),
        )
        .unwrap();
        assert!((r.value - 1.0 / Complex64::new(0.0, 1.1)).norm() < 1e-9);
    }

    #[test]
    fn trapezoid_is_spectral_for_periodic_functions() {
        // ∫ e^{cos θ} dθ = 2π I₀(1)
        let i0_1 = 1.266_065_877_752_008_4;
        let r: QuadResult =
            periodic_trapezoid(|t| Ok::<_, ()>(c(t.cos().exp())), 4, 1024, &QuadOptions::new(1e-14, 1e-15))
                .unwrap();
        assert!((r.value.re - 2.0 * PI * i0_1).abs() < 1e-13);
        assert!(r.evaluations <= 64);
    }

    #[test]
    fn non_convergence_is_reported() {
        let opts = QuadOptions { rel_tol: 1e-15, abs_tol: 0.0, max_segments: 4 };
        let r = integrate_fn(|x| c(1.0 / x.sqrt()), 0.0, 1.0, &opts);
        assert!(!r.converged);
        assert!(r.error > 0.0);
    }

    #[test]
    fn errors_from_integrand_propagate() {
        let r = integrate(|x| if x > 0.5 { Err("boom") } else { Ok(c(x)) }, 0.0, 1.0, &QuadOptions::default());
        assert_eq!(r.unwrap_err(), "boom");
    }
}
