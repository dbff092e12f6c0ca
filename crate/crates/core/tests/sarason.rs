use std::f64::consts::LN_2;

use approx::assert_relative_eq;
use bergmanlab::field::{CellField, CellMesh, FieldKind};
use bergmanlab::kernel::berezin;
use bergmanlab::sarason::*;
use bergmanlab::Complex64;
use proptest::prelude::*;

fn series(x: f64, terms: usize, a: impl Fn(f64) -> f64) -> f64 {
    let mut xn = 1.0;
    let mut s = 0.0;
    for n in 0..terms {
        s += a(n as f64) * xn;
        xn *= x;
    }
    s
}

#[test]
fn lattice_layout() {
    let l = Lattice::new(3, 4).unwrap();
    assert_eq!(l.points(&[]).len(), 1 + 4 + 8 + 8);
    assert_eq!(l.doubled().points(&[]).len(), 1 + 8 + 16 + 16);
    assert!(Lattice::new(0, 4).is_err());
}

#[test]
fn sarason_constant_of_units() {
    let one = AnalyticSymbol::constant(1.0);
    let s = b_fg(&one, &one, &Lattice::new(10, 4).unwrap(), 1e-9).unwrap();
    assert!((s.value - 1.0).abs() <= 1e-6);
}

#[test]
fn berezin_of_squared_modulus_of_z() {
    // B(|ζ|²)(z) = (1 - x)² Σ (n+1)² xⁿ / (n+2), x = |z|²
    let z = AnalyticSymbol::monomial(1);
    for w in [Complex64::new(0.5, 0.0), Complex64::from_polar(0.9, 2.0)] {
        let x = w.norm_sqr();
        let want = (1.0 - x).powi(2) * series(x, 3000, |n| (n + 1.0) * (n + 1.0) / (n + 2.0));
        assert_relative_eq!(berezin(&SquaredModulus(&z), w, 1e-11).unwrap(), want, max_relative = 1e-7);
    }
}

#[test]
fn toeplitz_of_units_is_the_identity() {
    let one = AnalyticSymbol::constant(1.0);
    for m in [1, 5, 17] {
        let t = toeplitz_product_matrix(&one, &one, m).unwrap();
        for r in 0..m {
            for c in 0..m {
                let want = if r == c { 1.0 } else { 0.0 };
                assert_eq!(t.matrix[(r, c)], Complex64::new(want, 0.0));
            }
        }
        assert_relative_eq!(t.norm, 1.0, max_relative = 1e-14);
    }
}

#[test]
fn toeplitz_shift_entries() {
    let z = AnalyticSymbol::monomial(1);
    let one = AnalyticSymbol::constant(1.0);
    let m = 12;
    let t = toeplitz_product_matrix(&z, &one, m).unwrap();
    for r in 0..m {
        for c in 0..m {
            let want = if r == c + 1 { ((c + 1) as f64 / (c + 2) as f64).sqrt() } else { 0.0 };
            assert!((t.matrix[(r, c)] - Complex64::new(want, 0.0)).norm() < 1e-15);
        }
    }
    assert_relative_eq!(t.norm, ((m - 1) as f64 / m as f64).sqrt(), max_relative = 1e-13);
    assert!(toeplitz_product_matrix(&AnalyticSymbol::quarter_pole(), &one, 4).is_err());
}

#[test]
fn truncated_norms_are_monotone() {
    let pairs = [
        (AnalyticSymbol::real_polynomial("1+z", &[1.0, 1.0]), AnalyticSymbol::real_polynomial("1-z", &[1.0, -1.0])),
        (AnalyticSymbol::monomial(3), AnalyticSymbol::real_polynomial("2+z^2", &[2.0, 0.0, 1.0])),
        (AnalyticSymbol::real_polynomial("q", &[0.5, -1.0, 0.25, 2.0]), AnalyticSymbol::monomial(1)),
    ];
    for (f, g) in &pairs {
        let norms: Vec<f64> = (1..=24).map(|m| toeplitz_product_matrix(f, g, m).unwrap().norm).collect();
        assert!(norms.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-13)), "{norms:?}");
    }
}

#[test]
fn pplus_with_unit_symbols_reduces_to_the_positive_projection() {
    let one = AnalyticSymbol::constant(1.0);
    let mesh = CellMesh::build(3).unwrap();
    let u = CellField::constant(mesh, 1.0, FieldKind::Density).unwrap();
    let z = Complex64::from_polar(0.8, 0.7);
    let x = z.norm_sqr();
    assert_relative_eq!(apply_pplus_fg(&one, &one, &u, z, 1e-10).unwrap(), -(1.0 - x).ln() / x, max_relative = 1e-6);
    let zero = AnalyticSymbol::constant(0.0);
    assert_eq!(apply_pplus_fg(&zero, &one, &u, z, 1e-10).unwrap(), 0.0);
}

#[test]
fn cell_masses_sum_to_the_norm() {
    let f = AnalyticSymbol::real_polynomial("f", &[1.0, -0.5, 0.0, 2.0]);
    let mesh = CellMesh::build(5).unwrap();
    let want = norm_sq(&f, 1e-10).unwrap();
    assert_relative_eq!(want, 1.0 + 0.25 / 2.0 + 4.0 / 4.0, max_relative = 1e-15);
    let circle: f64 = circle_cell_masses(&f, &mesh, 8).iter().sum();
    assert_relative_eq!(circle, want, max_relative = 1e-12);
    let adaptive: f64 = symbol_cell_masses(&f, &mesh, 1e-10).unwrap().iter().sum();
    assert_relative_eq!(adaptive, want, max_relative = 1e-8);
}

#[test]
fn condition_four_edge_cases() {
    let zero = AnalyticSymbol::constant(0.0);
    let one = AnalyticSymbol::constant(1.0);
    let c = test_conditions_4(&zero, &one, 5, 4, 1e-8).unwrap();
    assert_eq!(c.c0a, 0.0);
    let c = test_conditions_4(&one, &one, 5, 4, 1e-8).unwrap();
    assert!(c.c0a > 0.0 && c.c0a.is_finite());
    assert_relative_eq!(c.c0a, c.c0b, max_relative = 1e-12);
    assert_eq!(c.surrogate, SURROGATE);
}

#[test]
fn gamma_of_constants() {
    let g0 = gamma(&AnalyticSymbol::constant(0.0), 5, 1e-9).unwrap();
    assert_eq!(g0.gamma, 0.0);
    // level-one boxes have area 3/8 and weight log 2
    let g1 = gamma(&AnalyticSymbol::constant(1.0), 5, 1e-9).unwrap();
    assert_relative_eq!(g1.gamma, (LN_2 * 3.0 / 8.0).sqrt(), max_relative = 1e-7);
    assert_eq!(g1.argmax.level, 1);
}

#[test]
fn ourex_for_unit_symbols() {
    let one = AnalyticSymbol::constant(1.0);
    let r = ourex_bound_check(&one, &one, &Lattice::new(6, 4).unwrap(), 4, 1e-9).unwrap();
    assert_relative_eq!(r.f_norm_sq, 1.0, max_relative = 1e-12);
    assert_relative_eq!(r.fg_sup_sq, 1.0, max_relative = 1e-12);
    assert_relative_eq!(r.ratio, 1.0 / (2.0 + 3.0 * LN_2 / 8.0), max_relative = 1e-6);
}

#[test]
fn delta_of_simple_symbols() {
    let d1 = delta_lower(&AnalyticSymbol::constant(1.0), &DeltaBudget::polynomial(8)).unwrap();
    assert!(d1.value >= 1.0 - 1e-9 && d1.value <= 1.0 + 1e-9);
    assert!(d1.verified);
    let dz = delta_lower(&AnalyticSymbol::monomial(1), &DeltaBudget::polynomial(8)).unwrap();
    assert!(dz.value > 0.5 && dz.value <= 1.0, "{}", dz.value);
    let aimed = delta_lower(&AnalyticSymbol::monomial(1), &DeltaBudget::aimed(4, vec![2, 3], vec![0.0])).unwrap();
    assert!(aimed.value > 0.5 && aimed.value <= 1.0 + 1e-6);
}

fn small_poly() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sarason_constant_is_symmetric(a in small_poly(), b in small_poly()) {
        let f = AnalyticSymbol::real_polynomial("f", &a);
        let g = AnalyticSymbol::real_polynomial("g", &b);
        let l = Lattice::new(4, 3).unwrap();
        let x = b_fg(&f, &g, &l, 1e-8).unwrap().value;
        let y = b_fg(&g, &f, &l, 1e-8).unwrap().value;
        prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300));
    }

    #[test]
    fn toeplitz_norm_monotone(a in small_poly(), b in small_poly(), m in 1usize..16) {
        let f = AnalyticSymbol::real_polynomial("f", &a);
        let g = AnalyticSymbol::real_polynomial("g", &b);
        let lo = toeplitz_product_matrix(&f, &g, m).unwrap().norm;
        let hi = toeplitz_product_matrix(&f, &g, m + 1).unwrap().norm;
        prop_assert!(hi >= lo * (1.0 - 1e-12));
    }
}
