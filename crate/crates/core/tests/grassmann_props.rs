use lloydlab::grassmann::{grassmann_gaussian, GrassmannElement, GrassmannMatrix, SuperMatrix};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

const Q: usize = 4;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Element of the Grassmann algebra on `Q` generators from one coefficient
/// per basis monomial, keeping only monomials whose degree parity matches.
fn element(coeffs: &[(f64, f64)], parity: Option<u32>) -> GrassmannElement {
    let terms = coeffs
        .iter()
        .enumerate()
        .filter(|(m, _)| parity.is_none_or(|p| (*m as u64).count_ones() % 2 == p))
        .map(|(m, &(re, im))| (m as u64, c(re, im)));
    GrassmannElement::from_terms(Q, terms).unwrap()
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 1 << Q)
}

fn close(a: &GrassmannElement, b: &GrassmannElement, tol: f64) -> bool {
    (a - b).max_abs() <= tol * (1.0 + a.max_abs().max(b.max_abs()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn odd_elements_anticommute(x in coeffs(), y in coeffs()) {
        let (a, b) = (element(&x, Some(1)), element(&y, Some(1)));
        let sum = &(&a * &b) + &(&b * &a);
        prop_assert!(sum.max_abs() < 1e-12);
    }

    #[test]
    fn even_elements_are_central(x in coeffs(), y in coeffs()) {
        let (a, b) = (element(&x, Some(0)), element(&y, None));
        prop_assert!(close(&(&a * &b), &(&b * &a), 1e-13));
    }

    #[test]
    fn wedge_is_associative(x in coeffs(), y in coeffs(), z in coeffs()) {
        let (a, b, cc) = (element(&x, None), element(&y, None), element(&z, None));
        prop_assert!(close(&(&(&a * &b) * &cc), &(&a * &(&b * &cc)), 1e-12));
    }

    #[test]
    fn generators_square_to_zero(j in 0..Q) {
        let g = GrassmannElement::generator(Q, j).unwrap();
        prop_assert!((&g * &g).is_zero());
    }

    #[test]
    fn exp_is_additive_on_even_elements(x in coeffs(), y in coeffs()) {
        let (a, b) = (element(&x, Some(0)), element(&y, Some(0)));
        let lhs = (&a + &b).exp().unwrap();
        let rhs = &a.exp().unwrap() * &b.exp().unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-11));
    }

    #[test]
    fn inverse_is_two_sided(x in coeffs(), body in 0.5..3.0f64) {
        let mut a = element(&x, Some(0)).nilpotent_part();
        a = &a + &GrassmannElement::scalar(Q, c(body, 0.3)).unwrap();
        let inv = a.inverse().unwrap();
        let one = GrassmannElement::scalar(Q, c(1.0, 0.0)).unwrap();
        prop_assert!(close(&(&a * &inv), &one, 1e-12));
    }

    #[test]
    fn berezin_subset_matches_ordered_derivatives(x in coeffs(), subset in 1u64..16) {
        let a = element(&x, None);
        let order: Vec<usize> = (0..Q).filter(|j| subset >> j & 1 == 1).collect();
        prop_assert!(close(&a.berezin(subset).unwrap(), &a.berezin_ordered(&order).unwrap(), 1e-14));
    }

    #[test]
    fn berezin_kills_generator_free_functions(x in coeffs(), j in 0..Q) {
        // ∫dχ_j ∂_j a = 0 since ∂_j a does not contain χ_j
        let d = element(&x, None).derivative_left(j).unwrap();
        prop_assert!(d.berezin(1 << j).unwrap().is_zero());
    }

    #[test]
    fn gaussian_equals_determinant(n in 1usize..=4, entries in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16)) {
        let m: Vec<Vec<Complex64>> = (0..n).map(|i| (0..n).map(|j| {
            let (re, im) = entries[i * 4 + j];
            c(re, im)
        }).collect()).collect();
        let oracle = DMatrix::from_fn(n, n, |i, j| m[i][j]).determinant();
        let got = grassmann_gaussian(&m).unwrap();
        prop_assert!((got - oracle).norm() < 1e-12 * (1.0 + oracle.norm()));
    }

    #[test]
    fn sdet_is_multiplicative(xs in prop::collection::vec(coeffs(), 8), bodies in prop::collection::vec(0.5..2.0f64, 4)) {
        let shift = |k: usize| GrassmannElement::scalar(Q, c(bodies[k], 0.0)).unwrap();
        let block = |e: GrassmannElement| GrassmannMatrix::from_fn(1, 1, Q, |_, _| e.clone()).unwrap();
        let make = |k: usize| {
            let a = &element(&xs[4 * k], Some(0)).nilpotent_part() + &shift(2 * k);
            let b = &element(&xs[4 * k + 1], Some(0)).nilpotent_part() + &shift(2 * k + 1);
            SuperMatrix::new(
                block(a),
                block(element(&xs[4 * k + 2], Some(1))),
                block(element(&xs[4 * k + 3], Some(1))),
                block(b),
            )
            .unwrap()
        };
        let (x, y) = (make(0), make(1));
        let lhs = x.matmul(&y).unwrap().sdet().unwrap();
        let rhs = &x.sdet().unwrap() * &y.sdet().unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-10));
    }
}

#[test]
fn berezin_pair_normalisation() {
    // ∫ dχ̄ dχ χ̄χ = -1 with χ̄ ↦ 0, χ ↦ 1
    let pair = GrassmannElement::monomial(2, c(1.0, 0.0), &[0, 1]).unwrap();
    assert_eq!(pair.berezin(0b11).unwrap().body(), c(-1.0, 0.0));
    assert_eq!(pair.berezin_ordered(&[0, 1]).unwrap().body(), c(-1.0, 0.0));
}

#[test]
fn grassmann_exp_is_linear_in_pair() {
    // exp(-a χ̄χ) = 1 - a χ̄χ
    let a = c(2.5, -1.0);
    let pair = GrassmannElement::monomial(2, -a, &[0, 1]).unwrap();
    let e = pair.exp().unwrap();
    assert_eq!(e.body(), c(1.0, 0.0));
    assert_eq!(e.coefficient(0b11), -a);
}
