use approx::assert_relative_eq;
use bergmanlab::dyadic::{build_grid, DyadicInterval, Shift};
use bergmanlab::field::{CellField, CellMesh, FieldKind};
use bergmanlab::kernel::apply_pbeta;
use bergmanlab::two_weight::*;
use proptest::prelude::*;

fn root_spec() -> DyadicOperatorSpec {
    DyadicOperatorSpec::new(Shift::Zero, vec![DyadicInterval::root(Shift::Zero)], vec![1.0]).unwrap()
}

fn ones(mesh: &std::sync::Arc<CellMesh>) -> CellField {
    CellField::constant(mesh.clone(), 1.0, FieldKind::Weight).unwrap()
}

#[test]
fn trivial_instance_is_tight() {
    let mesh = CellMesh::build(3).unwrap();
    let one = ones(&mesh);
    let r = verify_theorem(&root_spec(), &one, &one, 2.0).unwrap();
    assert_relative_eq!(r.c0, 1.0, max_relative = 1e-12);
    assert_relative_eq!(r.c0_star, 1.0, max_relative = 1e-12);
    assert_relative_eq!(r.norm, 1.0, max_relative = 1e-12);
    let doubled = root_spec().scaled(2.0).unwrap();
    assert_relative_eq!(operator_norm_exact(&doubled, &one, &one).unwrap(), 2.0, max_relative = 1e-12);
    let t = testing_constants(&doubled, &one, &one, 2.0).unwrap();
    assert_relative_eq!(t.c0, 4.0, max_relative = 1e-12);
}

#[test]
fn dual_weights() {
    let mesh = CellMesh::build(3).unwrap();
    let v = CellField::from_cells(mesh.clone(), FieldKind::Weight, |c| 0.5 + (c % 7) as f64).unwrap();
    let s = dual_weight(&v, 2.0).unwrap();
    for (a, b) in v.values.iter().zip(&s.values) {
        assert_relative_eq!(a * b, 1.0, max_relative = 1e-15);
    }
    for p in [1.5, 3.0, 4.5] {
        let back = dual_weight(&dual_weight(&v, p).unwrap(), p / (p - 1.0)).unwrap();
        for (a, b) in v.values.iter().zip(&back.values) {
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }
    assert!(dual_weight(&ones(&mesh), 2.0).unwrap().values.iter().all(|&x| x == 1.0));
}

#[test]
fn pbeta_instance_matches_kernel_model() {
    let mesh = CellMesh::build(4).unwrap();
    let f = CellField::from_cells(mesh.clone(), FieldKind::Density, |c| 1.0 + ((c * 31) % 11) as f64).unwrap();
    for shift in Shift::BOTH {
        let spec = DyadicOperatorSpec::pbeta(shift, 4).unwrap();
        let a = apply_t(&spec, &f).unwrap();
        let b = apply_pbeta(&f, shift).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-10 * y);
        }
        let root = apply_t_local(&spec, &f, &DyadicInterval::root(shift)).unwrap();
        assert_eq!(root.values, a.values);
        let leaf = DyadicInterval::new(shift, 4, 5).unwrap();
        let only = apply_t_local(&spec, &f, &leaf).unwrap();
        let k = spec.family.iter().position(|i| *i == leaf).unwrap();
        let avg = f.integrate(bergmanlab::field::Region::Box(leaf)).unwrap() / leaf.carleson_box().area();
        for c in 0..mesh.n_cells() {
            let want = if mesh.in_box(c, &leaf) { spec.tau[k] * avg } else { 0.0 };
            assert_relative_eq!(only.values[c], want, max_relative = 1e-12);
        }
    }
}

/// `C₀` by summing `τ_P |Q ∩ P| / |P|` cell by cell for `w = σ = 1`.
fn brute_c0(spec: &DyadicOperatorSpec, mesh: &CellMesh) -> f64 {
    let area = |i: &DyadicInterval| mesh.cells_in_box(i).unwrap().iter().map(|&c| mesh.areas()[c]).sum::<f64>();
    let mut best = 0.0f64;
    for q in &spec.family {
        let mut total = 0.0;
        for c in 0..mesh.n_cells() {
            let mut t = 0.0;
            for (p, tau) in spec.family.iter().zip(&spec.tau) {
                if mesh.in_box(c, p) {
                    let small = if p.contains_interval(q) {
                        *q
                    } else if q.contains_interval(p) {
                        *p
                    } else {
                        continue;
                    };
                    t += tau * area(&small) / area(p);
                }
            }
            total += t * t * mesh.areas()[c];
        }
        best = best.max(total / area(q));
    }
    best
}

#[test]
fn testing_constant_against_enumeration() {
    let mesh = CellMesh::build(4).unwrap();
    let one = ones(&mesh);
    for shift in Shift::BOTH {
        let spec = DyadicOperatorSpec::pbeta(shift, 3).unwrap();
        let t = testing_constants(&spec, &one, &one, 2.0).unwrap();
        assert_relative_eq!(t.c0, brute_c0(&spec, &mesh), max_relative = 1e-12);
        assert_relative_eq!(t.c0, t.c0_star, max_relative = 1e-12);
    }
}

#[test]
fn exact_norm_agrees_with_ascent() {
    for seed in 0..20 {
        let inst = random_instance(seed, 3).unwrap();
        let exact = operator_norm_exact(&inst.spec, &inst.w, &inst.sigma).unwrap();
        let ascent = ascent_lower_bound(&inst.spec, &inst.w, &inst.sigma, 2.0, 50, seed).unwrap();
        assert!(ascent.value <= exact * (1.0 + 1e-9));
        assert!((exact - ascent.value).abs() <= 1e-6 * exact, "seed {seed}: {exact} vs {}", ascent.value);
    }
}

#[test]
fn theorem_sweep() {
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let inst = random_instance(seed, 3).unwrap();
        let r = verify_theorem(&inst.spec, &inst.w, &inst.sigma, 2.0).unwrap();
        assert!(r.necessity, "seed {seed}");
        assert!(r.c0_local <= r.c0 * (1.0 + 1e-12) && r.c0_star_local <= r.c0_star * (1.0 + 1e-12));
        worst = worst.max(r.c_measured);
    }
    assert!(worst.is_finite() && worst <= 100.0, "sufficiency constant {worst}");
}

#[test]
fn corona_of_constants_and_of_a_spike() {
    let mesh = CellMesh::build(6).unwrap();
    let one = ones(&mesh);
    let family = build_grid(Shift::Zero, 6).unwrap();
    let forest = corona(&one, &one, Shift::Zero, &family, None).unwrap();
    assert_eq!(forest.stopping.len(), 1);
    let chk = corona_linearization_check(&forest, &one, &one, 2.0).unwrap();
    assert_relative_eq!(chk.max_pointwise_ratio, 1.0, max_relative = 1e-12);

    let target = mesh.n_cells() - 7;
    let spike = CellField::from_cells(mesh.clone(), FieldKind::Density, |c| if c == target { 1e9 } else { 1.0 }).unwrap();
    let forest = corona(&one, &spike, Shift::Zero, &family, None).unwrap();
    assert!(forest.generations() >= 3);
    let chk = corona_linearization_check(&forest, &one, &spike, 2.0).unwrap();
    assert!(chk.strict_growth && chk.partition_ok);
    assert!(chk.max_chain_ratio <= 4.0 / 3.0 + 1e-12);
    assert!(chk.max_pointwise_ratio <= 4.0 / 3.0 + 1e-12);
    // every stopping cube contains the spike
    for s in &forest.stopping {
        assert!(mesh.in_box(target, &s.interval));
    }
}

#[test]
fn split_families_edge_cases() {
    let inst = random_instance(11, 3).unwrap();
    let f = CellField::from_cells(inst.w.mesh.clone(), FieldKind::Density, |c| (c % 5) as f64 + 0.5).unwrap();
    let (a, b) = split_families(&inst.spec, &inst.w, &inst.w, &f, &f, 2.0).unwrap();
    assert_eq!(a.len(), inst.spec.family.len());
    assert!(b.is_empty());
    let zero = CellField::constant(inst.w.mesh.clone(), 0.0, FieldKind::Density).unwrap();
    let (_, b) = split_families(&inst.spec, &inst.w, &inst.sigma, &f, &zero, 2.0).unwrap();
    assert!(b.is_empty());
}

#[test]
fn weighted_maximal_bound() {
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let mesh = CellMesh::build(5).unwrap();
        let w = random_weight(&mesh, 4.0, seed).unwrap();
        let f = random_weight(&mesh, 2.0, seed + 1000).unwrap();
        for shift in Shift::BOTH {
            let m = weighted_maximal(&w, &f, shift).unwrap();
            let norm = |g: &CellField| g.values.iter().zip(&w.masses()).map(|(v, x)| v * v * x).sum::<f64>().sqrt();
            worst = worst.max(norm(&m) / norm(&f));
        }
    }
    assert!(worst <= 4.0, "maximal constant {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_instances_keep_their_invariants(seed in any::<u64>()) {
        let inst = random_instance(seed, 3).unwrap();
        let r = verify_theorem(&inst.spec, &inst.w, &inst.sigma, 2.0).unwrap();
        prop_assert!(r.necessity);
        prop_assert!(coarsening_discrepancy(&inst.spec, &inst.w, &inst.sigma).unwrap() <= 1e-10);
        let [a, b, c] = formulation_norms(&inst.spec, &inst.w, &inst.sigma).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a && (a - c).abs() <= 1e-10 * a);

        let f = random_weight(&inst.w.mesh, 3.0, seed ^ 0x5555).unwrap();
        let forest = corona(&inst.w, &f, inst.spec.shift, &inst.spec.family, None).unwrap();
        let chk = corona_linearization_check(&forest, &inst.w, &f, 2.0).unwrap();
        prop_assert!(chk.strict_growth && chk.partition_ok);
        prop_assert!(chk.max_pointwise_ratio <= 4.0 / 3.0 + 1e-12);
        prop_assert!(chk.lbounded_constant.is_finite());
    }
}
