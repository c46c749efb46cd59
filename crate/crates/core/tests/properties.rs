//! Randomized algebraic properties of polynomials, the generator and prices.

use nalgebra::DMatrix;
use proptest::prelude::*;

use polylife::generator::{build_generator, conditional_expectation, expm, propagate};
use polylife::poly::{basis_size, enumerate_basis, MultiIndex, Polynomial};
use polylife::presets::{sec5_model, sec5_spec, Sec5Params};
use polylife::pricing::{price, BuildingBlock, Payoff, PayoffSpec, PortfolioState};

const DIM: usize = 3;

fn poly(dim: usize, max_deg: u32) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((prop::collection::vec(0..=max_deg, dim), -3.0..3.0f64), 0..6).prop_map(move |terms| {
        Polynomial::from_terms(dim, terms.into_iter().map(|(e, c)| (MultiIndex::new(e), c))).unwrap()
    })
}

fn points(dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.5..1.5f64, dim), 50)
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-12 * scale.max(1.0)
}

// magnitude of the evaluation used to scale the tolerance
fn size(p: &Polynomial, z: &[f64]) -> f64 {
    p.terms().map(|(m, c)| c.abs() * m.exponents().iter().zip(z).map(|(&e, x)| x.abs().powi(e as i32)).product::<f64>()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multiplication_is_a_ring(a in poly(DIM, 3), b in poly(DIM, 3), c in poly(DIM, 3), zs in points(DIM)) {
        let ab = &a * &b;
        let ba = &b * &a;
        let ab_c = &ab * &c;
        let a_bc = &a * &(&b * &c);
        let dist = &a * &(&b + &c);
        let sum = &ab + &(&a * &c);
        for z in &zs {
            let s = size(&a, z) * (size(&b, z) + size(&c, z)) * (1.0 + size(&c, z));
            prop_assert!(close(ab.eval(z).unwrap(), ba.eval(z).unwrap(), s));
            prop_assert!(close(ab_c.eval(z).unwrap(), a_bc.eval(z).unwrap(), s));
            prop_assert!(close(dist.eval(z).unwrap(), sum.eval(z).unwrap(), s));
        }
    }

    #[test]
    fn evaluation_is_multiplicative(a in poly(DIM, 4), b in poly(DIM, 4), zs in points(DIM)) {
        let ab = &a * &b;
        for z in &zs {
            let s = size(&a, z) * size(&b, z);
            prop_assert!(close(ab.eval(z).unwrap(), a.eval(z).unwrap() * b.eval(z).unwrap(), s));
        }
    }

    #[test]
    fn gradient_obeys_product_rule(a in poly(DIM, 3), b in poly(DIM, 3), zs in points(DIM)) {
        let ab = &a * &b;
        let (ga, gb, gab) = (a.gradient(), b.gradient(), ab.gradient());
        for z in &zs {
            let s = 10.0 * (size(&a, z) + 1.0) * (size(&b, z) + 1.0);
            for v in 0..DIM {
                let rhs = ga[v].eval(z).unwrap() * b.eval(z).unwrap() + a.eval(z).unwrap() * gb[v].eval(z).unwrap();
                prop_assert!(close(gab[v].eval(z).unwrap(), rhs, s));
            }
        }
    }

    #[test]
    fn text_form_round_trips(a in poly(DIM, 4)) {
        let back = Polynomial::parse(&a.to_string(), DIM).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn basis_is_graded_lex_with_binomial_length(dim in 1usize..5, n in 0usize..7) {
        let basis = enumerate_basis(dim, n).unwrap();
        prop_assert_eq!(basis.len(), basis_size(dim, n).unwrap());
        let mut c = 1usize;
        for i in 0..dim {
            c = c * (n + dim - i) / (i + 1);
        }
        prop_assert_eq!(basis.len(), c);
        prop_assert!(basis.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn exponential_is_a_semigroup(entries in prop::collection::vec(-1.0..1.0f64, 16), s in 0.0..2.0f64, t in 0.0..2.0f64) {
        let g = DMatrix::from_vec(4, 4, entries);
        let lhs = expm(&g, s + t).unwrap();
        let rhs = expm(&g, s).unwrap() * expm(&g, t).unwrap();
        let scale = lhs.amax().max(1.0);
        prop_assert!((lhs - rhs).amax() <= 1e-10 * scale);
    }

    #[test]
    fn tower_property_on_the_jacobi_model(i in 0u32..4, j in 0u32..3, s in 0.0..0.5f64, t in 0.0..0.5f64, x in -1.0..1.0f64, y in 0.0..100.0f64) {
        let spec = sec5_spec(&Sec5Params::default()).unwrap();
        let p = Polynomial::monomial(MultiIndex::new(vec![i, j]), 1.0);
        let two_step = propagate(&spec, &propagate(&spec, &p, t).unwrap(), s).unwrap();
        let one_step = propagate(&spec, &p, s + t).unwrap();
        let z = [x, y];
        let (a, b) = (two_step.eval(&z).unwrap(), one_step.eval(&z).unwrap());
        prop_assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn constants_are_preserved(c in -5.0..5.0f64, h in 0.0..3.0f64, x in -1.0..1.0f64, y in 0.0..500.0f64) {
        let spec = sec5_spec(&Sec5Params::default()).unwrap();
        let v = conditional_expectation(&spec, &Polynomial::constant(2, c), &[x, y], h).unwrap();
        prop_assert_eq!(v, c);
    }

    #[test]
    fn prices_are_linear_in_the_payoff(a1 in -2.0..2.0f64, a2 in -2.0..2.0f64, g1 in poly(2, 2), g2 in poly(2, 2)) {
        let m = sec5_model(&Sec5Params::default()).unwrap();
        let ps = PortfolioState::new(7, 1, 0.1).unwrap();
        let z = [-0.3, 50.0];
        let combo = &g1.scale(a1) + &g2.scale(a2);
        for kind in [BuildingBlock::PureEndowment, BuildingBlock::TermInsurance, BuildingBlock::Annuity] {
            let v = |g: &Polynomial| price(&m, &ps, &PayoffSpec { kind, payoff: Payoff::Polynomial(g.clone()) }, 0.8, &z, 64).unwrap().value;
            let (v1, v2, vc) = (v(&g1), v(&g2), v(&combo));
            let scale = (a1 * v1).abs() + (a2 * v2).abs() + 1e-3;
            prop_assert!((vc - a1 * v1 - a2 * v2).abs() <= 1e-10 * scale.max(1.0), "{:?}: {} vs {}", kind, vc, a1 * v1 + a2 * v2);
        }
    }

    #[test]
    fn nonnegative_payoffs_have_nonnegative_prices(c0 in 0.0..2.0f64, c1 in 0.0..2.0f64, maturity in 0.05..1.0f64) {
        // c0 + c1 x1² ≥ 0 everywhere
        let g = Polynomial::parse(&format!("{c0} + {c1}*x1^2"), 2).unwrap();
        let m = sec5_model(&Sec5Params::default()).unwrap();
        let ps = PortfolioState::new(3, 0, 0.0).unwrap();
        for kind in [BuildingBlock::PureEndowment, BuildingBlock::TermInsurance, BuildingBlock::Annuity] {
            let spec = PayoffSpec { kind, payoff: Payoff::Polynomial(g.clone()) };
            prop_assert!(price(&m, &ps, &spec, maturity, &[0.0, 0.0], 64).unwrap().value >= 0.0);
        }
    }
}

#[test]
fn generator_annihilates_constants() {
    let spec = sec5_spec(&Sec5Params::default()).unwrap();
    let gen = build_generator(&spec, 3).unwrap();
    assert!(gen.matrix().column(0).iter().all(|v| *v == 0.0));
}
