use std::f64::consts::{PI, TAU};

use approx::assert_relative_eq;
use bergmanlab::sarason::norm_sq;
use bergmanlab::stegenga::*;
use bergmanlab::Complex64;
use num_rational::BigRational;
use proptest::prelude::*;

fn dr(num: i64, exp: u32) -> DyadicRational {
    DyadicRational::new(num, exp)
}

fn rat(a: i64, b: i64) -> BigRational {
    BigRational::new(a.into(), b.into())
}

#[test]
fn first_generations_exactly() {
    assert_eq!(generation_points(0).unwrap(), vec![DyadicRational::zero()]);
    assert_eq!(generation_points(1).unwrap(), vec![dr(0, 0), dr(3, 2)]);
    assert_eq!(generation_points(2).unwrap(), vec![dr(0, 0), dr(15, 6), dr(3, 2), dr(63, 6)]);
    let lam = lambda_seq(2);
    assert_eq!(lam, vec![DyadicRational::one(), dr(1, 2), dr(1, 4)]);
    assert_eq!(p(2), dr(1, 6));
    assert_eq!(log2_inv_p(3), 14);
    let c = CantorSet::new(3).unwrap();
    assert_eq!(c.points.len(), 8);
    assert!(c.points.windows(2).all(|w| w[0] < w[1]));
    assert!(generation_points(MAX_GENERATION + 1).is_err());
}

#[test]
fn tau_and_kstep_exact() {
    assert_eq!(tau_bound(), rat(5, 12));
    assert_eq!(tau_value(1), rat(0, 1));
    // step ratios: (15/64)/(3/4) = 5/16
    assert_eq!(tau_value(2), rat(5, 16));
    let mut last = rat(0, 1);
    for n in 1..=8 {
        let t = tau_value(n);
        assert!(t <= tau_bound(), "n = {n}");
        assert!(t >= last);
        last = t;
    }
    assert_eq!(kstep_constant(&rat(0, 1)), rat(1, 2));
    for n in 1..=6 {
        let k = kstep_check(n).unwrap();
        assert!(k.holds, "n = {n}: {} < {}", k.min_ratio, k.bound);
    }
    assert!(kstep_check(9).is_err());
}

#[test]
fn porosity_examples() {
    assert_relative_eq!(porosity_ratio(&[0.0, 1.0], 0.0, 1.0, 1000), 0.5, epsilon = 1e-12);
    assert_relative_eq!(porosity_ratio(&[0.5], 0.0, 1.0, 1000), 0.5, epsilon = 1e-12);
    let k = condition_k_check(5, 2000, 7).unwrap();
    assert!(k.min_ratio >= 1.0 / 7.0, "{}", k.min_ratio);
}

#[test]
fn conformal_map() {
    let i = Complex64::new(0.0, 1.0);
    assert!((phi(Complex64::new(0.0, 0.0)).unwrap() - i).norm() < 1e-15);
    assert!(phi(Complex64::new(1.0, 0.0)).is_err());
    for z in [Complex64::new(0.3, -0.4), Complex64::from_polar(0.99, 2.5)] {
        let w = phi(z).unwrap();
        assert!(w.im > 0.0);
        assert!((phi_inv(w).unwrap() - z).norm() < 1e-13);
        let h = 1e-6;
        let fd = (phi(z + h).unwrap() - phi(z - h).unwrap()) / (2.0 * h);
        assert!((fd - phi_prime(z)).norm() < 1e-6 * phi_prime(z).norm());
    }
    for x in [-3.0, 0.0, 0.75, 10.0] {
        let e = phi_inv(Complex64::new(x, 0.0)).unwrap();
        assert_relative_eq!(e.norm(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(e.arg().rem_euclid(TAU), boundary_angle(x), epsilon = 1e-12);
    }
    assert_relative_eq!(boundary_angle(0.0), PI, epsilon = 1e-15);
}

#[test]
fn pole_families() {
    for n in 1..=MAX_FAMILY {
        let fam = build_poles(n).unwrap();
        assert_eq!(fam.poles.len(), 1 << n);
        assert!(fam.admissible());
        assert_eq!(fam.log2_p, -(log2_inv_p(n) as i64));
        for (z, x) in fam.poles.iter().zip(&fam.points) {
            assert_eq!(z.re, x.to_f64());
            assert_eq!(z.im, -fam.p_n());
        }
    }
    assert!(build_poles(MAX_FAMILY + 1).is_err());
}

#[test]
fn norm_closed_form_against_quadrature() {
    for n in 1..=2 {
        let fam = build_poles(n).unwrap();
        let exact = fam.norm_sq();
        let quad = norm_sq(&fam.symbol(), 1e-9).unwrap();
        assert_relative_eq!(quad, exact, max_relative = 1e-5);
    }
}

#[test]
fn outer_function_of_a_smooth_modulus() {
    // |e^z| = e^{cos θ} on the circle
    let h = |t: f64| t.cos().exp();
    for m in [14, 16] {
        let g = outer_function(&h, m).unwrap();
        for k in 0..16 {
            let z = Complex64::from_polar(0.9, TAU * k as f64 / 16.0);
            assert!((g.eval(z) - z.exp()).norm() < 1e-10 * z.exp().norm());
            let z = Complex64::from_polar(1.0 - (-10f64).exp2(), TAU * (k as f64 + 0.3) / 16.0);
            assert!((g.eval(z).norm() / z.exp().norm() - 1.0).abs() < 0.05);
        }
    }
    assert!(outer_function(&|_| 0.0, 8).is_err());
}

#[test]
fn cantor_symbol_vanishes_only_slowly() {
    let (g, zeros) = cantor_symbol(12).unwrap();
    assert!(p(zeros.generation).to_f64() < TAU / 4096.0);
    assert_eq!(zeros.angles.len(), 1 << zeros.generation);
    let pts: Vec<Complex64> = (1..=10)
        .flat_map(|k| {
            let r = 1.0 - (-(k as f64)).exp2();
            (0..32).map(move |j| Complex64::from_polar(r, TAU * (j as f64 + 0.5) / 32.0))
        })
        .chain(zeros.angles.iter().map(|&t| Complex64::from_polar(1.0 - 1.0 / 512.0, t)))
        .collect();
    let lb = lowbg_check(&g, &pts);
    assert!(lb.min_ratio > 0.0 && lb.min_ratio.is_finite());
    assert!(lb.lipschitz.is_finite());
    assert_eq!(zeros.distance(zeros.angles[0]), 0.0);
}

#[test]
fn pipeline_helpers() {
    assert_eq!(gamma_depth(1), 4);
    assert_eq!(gamma_depth(3), 16);
    let r = delta_rings(3);
    assert!(r.windows(2).all(|w| w[0] < w[1]));
    assert!(r.contains(&6) && r.contains(&14) && r.contains(&15));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conformal_round_trip(r in 0.0..0.999f64, t in 0.0..TAU) {
        let z = Complex64::from_polar(r, t);
        let back = phi_inv(phi(z).unwrap()).unwrap();
        prop_assert!((back - z).norm() < 1e-10);
    }

    #[test]
    fn first_order_sum_bounds_the_family(r in 0.0..0.99f64, t in 0.0..TAU, n in 1u32..4) {
        let fam = build_poles(n).unwrap();
        let z = Complex64::from_polar(r, t);
        let f = fam.eval(z).unwrap();
        prop_assert!(f.is_finite());
        prop_assert!(fam.first_order_sum(z).unwrap() > 0.0);
    }
}
