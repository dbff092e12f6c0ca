//! Positive dyadic operators `T f = Σ τ_Q (E_Q |f|) 1_Q` over Carleson boxes, their
//! two-weight testing constants and exact `L²` norms.

mod corona;

pub use corona::{
    corona, corona_linearization_check, split_families, weighted_maximal, CoronaCheck, CoronaForest, StoppingCube,
};

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::{build_grid, DyadicInterval, Shift};
use crate::error::{arg, Error, Result};
use crate::field::{coarsen, CellField, CellMesh, FieldKind, WEIGHT_FLOOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicOperatorSpec {
    pub shift: Shift,
    pub family: Vec<DyadicInterval>,
    pub tau: Vec<f64>,
}

impl DyadicOperatorSpec {
    pub fn new(shift: Shift, family: Vec<DyadicInterval>, tau: Vec<f64>) -> Result<Self> {
        if family.len() != tau.len() {
            return arg("family and coefficients differ in length");
        }
        if family.is_empty() {
            return arg("empty family");
        }
        if let Some(i) = family.iter().find(|i| i.shift != shift) {
            return arg(format!("{i} is not in grid {shift}"));
        }
        if let Some(t) = tau.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return arg(format!("coefficient {t} is not a nonnegative number"));
        }
        let mut seen = family.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != family.len() {
            return arg("family has repeated intervals");
        }
        Ok(DyadicOperatorSpec { shift, family, tau })
    }

    /// The dyadic model `P^β` truncated at `depth`: `τ_Q = |Q_I| / |I|²`.
    pub fn pbeta(shift: Shift, depth: u32) -> Result<Self> {
        let family = build_grid(shift, depth)?;
        let tau = family.iter().map(|i| i.carleson_box().area() / (i.len() * i.len())).collect();
        DyadicOperatorSpec::new(shift, family, tau)
    }

    pub fn max_level(&self) -> u32 {
        self.family.iter().map(|i| i.level).max().unwrap_or(0)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        DyadicOperatorSpec::new(self.shift, self.family.clone(), self.tau.iter().map(|t| t * c).collect())
    }

    /// Members contained in `q`.
    pub fn restricted(&self, q: &DyadicInterval) -> Result<Self> {
        if q.shift != self.shift {
            return arg(format!("{q} is not in grid {}", self.shift));
        }
        let (family, tau) = self
            .family
            .iter()
            .zip(&self.tau)
            .filter(|(i, _)| q.contains_interval(i))
            .map(|(i, t)| (*i, *t))
            .unzip();
        Ok(DyadicOperatorSpec { shift: self.shift, family, tau })
    }

    /// `coef[j][m] = τ_Q / |Q|` laid out densely by level.
    fn dense_coefficients(&self, areas: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut coef: Vec<Vec<f64>> = (0..=self.max_level()).map(|j| vec![0.0; 1 << j]).collect();
        for (i, t) in self.family.iter().zip(&self.tau) {
            coef[i.level as usize][i.index as usize] = t / areas[i.level as usize][i.index as usize];
        }
        coef
    }
}

/// `T` applied to the cell masses `x` (value times area of a nonnegative function).
fn apply_masses(spec: &DyadicOperatorSpec, mesh: &CellMesh, x: &[f64]) -> Vec<f64> {
    let areas = mesh.box_sums(mesh.areas(), spec.shift);
    let coef = spec.dense_coefficients(&areas);
    let sums = mesh.box_sums(x, spec.shift);
    let top = spec.max_level() as usize;
    (0..mesh.n_cells())
        .map(|c| {
            let s = mesh.sector(c);
            (0..=mesh.band(c).min(top))
                .map(|j| {
                    let k = mesh.sector_index(spec.shift, j as u32, s) as usize;
                    coef[j][k] * sums[j][k]
                })
                .sum()
        })
        .collect()
}

fn check_spec(spec: &DyadicOperatorSpec, f: &CellField) -> Result<()> {
    f.mesh.check_resolvable(spec.max_level())
}

/// `Σ_{Q∈ℱ} τ_Q (E_Q|f|) 1_Q`.
pub fn apply_t(spec: &DyadicOperatorSpec, f: &CellField) -> Result<CellField> {
    check_spec(spec, f)?;
    let x: Vec<f64> = f.values.iter().zip(f.mesh.areas()).map(|(v, a)| v.abs() * a).collect();
    CellField::new(f.mesh.clone(), apply_masses(spec, &f.mesh, &x), FieldKind::Density)
}

/// `T_{in,Q}`: only the members of `ℱ` contained in `q`.
pub fn apply_t_local(spec: &DyadicOperatorSpec, f: &CellField, q: &DyadicInterval) -> Result<CellField> {
    let local = spec.restricted(q)?;
    if local.family.is_empty() {
        return CellField::constant(f.mesh.clone(), 0.0, FieldKind::Density);
    }
    apply_t(&local, f)
}

/// `σ = v^{1-p'}`.
pub fn dual_weight(v: &CellField, p: f64) -> Result<CellField> {
    if !(p > 1.0 && p.is_finite()) {
        return arg(format!("exponent {p} must lie in (1, ∞)"));
    }
    let e = 1.0 - p / (p - 1.0);
    let values: Vec<f64> = v.values.iter().map(|x| x.powf(e)).collect();
    if let Some((cell, x)) = values.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x >= WEIGHT_FLOOR)) {
        return Err(Error::Overflow(format!("dual weight {x:e} in cell {cell}")));
    }
    CellField::new(v.mesh.clone(), values, FieldKind::Weight)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestingConstants {
    pub p: f64,
    /// `max_Q ‖T(w1_Q)‖^p_{L^p(σ)} / w(Q)`.
    pub c0: f64,
    pub c0_star: f64,
    /// The same with `T_{in,Q}`.
    pub c0_local: f64,
    pub c0_star_local: f64,
    pub argmax: DyadicInterval,
    pub argmax_star: DyadicInterval,
}

fn lp_norm_p(values: &[f64], weight: &CellField, p: f64) -> f64 {
    values
        .iter()
        .zip(&weight.values)
        .zip(weight.mesh.areas())
        .map(|((g, w), a)| g.abs().powf(p) * w * a)
        .sum()
}

fn indicator_masses(mesh: &CellMesh, weight: &CellField, q: &DyadicInterval) -> Vec<f64> {
    (0..mesh.n_cells())
        .map(|c| if mesh.in_box(c, q) { weight.values[c] * mesh.areas()[c] } else { 0.0 })
        .collect()
}

pub fn testing_constants(spec: &DyadicOperatorSpec, w: &CellField, sigma: &CellField, p: f64) -> Result<TestingConstants> {
    if !(p > 1.0 && p.is_finite()) {
        return arg(format!("exponent {p} must lie in (1, ∞)"));
    }
    w.same_mesh(sigma)?;
    check_spec(spec, w)?;
    let mesh = &w.mesh;
    let pp = p / (p - 1.0);
    let wq = mesh.box_sums(&w.masses(), spec.shift);
    let sq = mesh.box_sums(&sigma.masses(), spec.shift);
    let mut out = TestingConstants {
        p,
        c0: 0.0,
        c0_star: 0.0,
        c0_local: 0.0,
        c0_star_local: 0.0,
        argmax: spec.family[0],
        argmax_star: spec.family[0],
    };
    for q in &spec.family {
        let local = spec.restricted(q)?;
        let (j, k) = (q.level as usize, q.index as usize);
        let xw = indicator_masses(mesh, w, q);
        let xs = indicator_masses(mesh, sigma, q);
        let g = lp_norm_p(&apply_masses(spec, mesh, &xw), sigma, p) / wq[j][k];
        let gl = lp_norm_p(&apply_masses(&local, mesh, &xw), sigma, p) / wq[j][k];
        let h = lp_norm_p(&apply_masses(spec, mesh, &xs), w, pp) / sq[j][k];
        let hl = lp_norm_p(&apply_masses(&local, mesh, &xs), w, pp) / sq[j][k];
        if g > out.c0 {
            out.c0 = g;
            out.argmax = *q;
        }
        if h > out.c0_star {
            out.c0_star = h;
            out.argmax_star = *q;
        }
        out.c0_local = out.c0_local.max(gl);
        out.c0_star_local = out.c0_star_local.max(hl);
    }
    Ok(out)
}

/// Gram matrix `G[Q,P] = X(Q ∩ P)` of the family against the cell masses `x`.
fn family_gram(spec: &DyadicOperatorSpec, mesh: &CellMesh, x: &[f64]) -> DMatrix<f64> {
    let sums = mesh.box_sums(x, spec.shift);
    let n = spec.family.len();
    DMatrix::from_fn(n, n, |a, b| {
        let (qa, qb) = (&spec.family[a], &spec.family[b]);
        let small = if qa.contains_interval(qb) {
            qb
        } else if qb.contains_interval(qa) {
            qa
        } else {
            return 0.0;
        };
        sums[small.level as usize][small.index as usize]
    })
}

/// Norm of `f ↦ T(m f)` from `L²(μ)` to `L²(ν)`.
///
/// With `y_Q = ⟨f, m 1_Q⟩` the output norm is `yᵀ D G_ν D y`, `D = diag(τ_Q/|Q|)`, and `y`
/// ranges over the ellipsoid of `G_in[Q,P] = ∫_{Q∩P} m²/μ`; the squared norm is the top
/// eigenvalue of `Lᵀ D G_ν D L` where `G_in = L Lᵀ`.
pub fn weighted_norm(spec: &DyadicOperatorSpec, m: &CellField, mu: &CellField, nu: &CellField) -> Result<f64> {
    m.same_mesh(mu)?;
    m.same_mesh(nu)?;
    check_spec(spec, m)?;
    let mesh = &m.mesh;
    let a = mesh.areas();
    let x_in: Vec<f64> = (0..mesh.n_cells()).map(|c| m.values[c] * m.values[c] / mu.values[c] * a[c]).collect();
    let g_in = family_gram(spec, mesh, &x_in);
    let g_out = family_gram(spec, mesh, &nu.masses());
    let areas = mesh.box_sums(a, spec.shift);
    let d: Vec<f64> = spec
        .family
        .iter()
        .zip(&spec.tau)
        .map(|(i, t)| t / areas[i.level as usize][i.index as usize])
        .collect();
    let n = d.len();
    let mid = DMatrix::from_fn(n, n, |i, j| d[i] * g_out[(i, j)] * d[j]);
    let l = match g_in.clone().cholesky() {
        Some(ch) => ch.l(),
        None => {
            let eig = SymmetricEigen::new(g_in);
            let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
            &eig.eigenvectors * DMatrix::from_diagonal(&vals)
        }
    };
    let c = l.transpose() * mid * &l;
    let c = (&c + c.transpose()) * 0.5;
    let top = SymmetricEigen::new(c).eigenvalues.iter().cloned().fold(0.0, f64::max);
    if !top.is_finite() {
        return Err(Error::NoConvergence { estimate: top });
    }
    Ok(top.sqrt())
}

/// Exact norm of `f ↦ T(wf)` from `L²(w)` to `L²(σ)`.
pub fn operator_norm_exact(spec: &DyadicOperatorSpec, w: &CellField, sigma: &CellField) -> Result<f64> {
    weighted_norm(spec, w, w, sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AscentResult {
    pub value: f64,
    pub starts: usize,
    pub iterations: usize,
}

/// Lower bound for the `L^p(w) → L^p(σ)` norm of `f ↦ T(wf)` by the nonlinear power method
/// `f ← (A*((Af)^{p-1}))^{p'-1}` from `starts` random positive starting vectors.
pub fn ascent_lower_bound(
    spec: &DyadicOperatorSpec,
    w: &CellField,
    sigma: &CellField,
    p: f64,
    starts: usize,
    seed: u64,
) -> Result<AscentResult> {
    if !(p > 1.0 && p.is_finite()) {
        return arg(format!("exponent {p} must lie in (1, ∞)"));
    }
    w.same_mesh(sigma)?;
    check_spec(spec, w)?;
    let mesh = &w.mesh;
    let a = mesh.areas();
    let n = mesh.n_cells();
    let pp = p / (p - 1.0);
    let forward = |f: &[f64]| -> Vec<f64> {
        let x: Vec<f64> = (0..n).map(|c| f[c] * w.values[c] * a[c]).collect();
        apply_masses(spec, mesh, &x)
    };
    let backward = |g: &[f64]| -> Vec<f64> {
        let x: Vec<f64> = (0..n).map(|c| g[c] * sigma.values[c] * a[c]).collect();
        apply_masses(spec, mesh, &x)
    };
    let norm = |f: &[f64], wt: &CellField, q: f64| lp_norm_p(f, wt, q).powf(1.0 / q);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    let mut iterations = 0;
    for _ in 0..starts {
        let mut f: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let mut prev = 0.0;
        for _ in 0..20_000 {
            iterations += 1;
            let nf = norm(&f, w, p);
            f.iter_mut().for_each(|v| *v /= nf);
            let af = forward(&f);
            let ratio = norm(&af, sigma, p);
            best = best.max(ratio);
            if (ratio - prev).abs() <= 1e-15 * ratio {
                break;
            }
            prev = ratio;
            let g: Vec<f64> = af.iter().map(|v| v.powf(p - 1.0)).collect();
            f = backward(&g).iter().map(|v| v.powf(pp - 1.0)).collect();
        }
    }
    Ok(AscentResult { value: best, starts, iterations })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub p: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(rename = "C0star")]
    pub c0_star: f64,
    #[serde(rename = "C0_local")]
    pub c0_local: f64,
    #[serde(rename = "C0star_local")]
    pub c0_star_local: f64,
    pub norm: f64,
    /// Whether `norm` is exact (`p = 2`) or an ascent lower bound.
    pub norm_exact: bool,
    /// `max(C0, C0*) <= norm^p` up to `1e-9` relative slack.
    pub necessity: bool,
    /// `norm^p / (C0 + C0*)`.
    pub ratio: f64,
    /// `ratio^{1/p}`.
    pub c_measured: f64,
}

pub fn verify_theorem(spec: &DyadicOperatorSpec, w: &CellField, sigma: &CellField, p: f64) -> Result<TheoremReport> {
    let tc = testing_constants(spec, w, sigma, p)?;
    let (norm, exact) = if (p - 2.0).abs() < 1e-15 {
        (operator_norm_exact(spec, w, sigma)?, true)
    } else {
        (ascent_lower_bound(spec, w, sigma, p, 8, 0)?.value, false)
    };
    let np = norm.powf(p);
    let ratio = np / (tc.c0 + tc.c0_star);
    Ok(TheoremReport {
        p,
        c0: tc.c0,
        c0_star: tc.c0_star,
        c0_local: tc.c0_local,
        c0_star_local: tc.c0_star_local,
        norm,
        norm_exact: exact,
        necessity: tc.c0.max(tc.c0_star) <= np * (1.0 + 1e-9),
        ratio,
        c_measured: ratio.powf(1.0 / p),
    })
}

/// A seeded random two-weight instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub depth: u32,
    pub spec: DyadicOperatorSpec,
    pub w: CellField,
    pub sigma: CellField,
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..=hi).exp2()
}

/// Random instance: grid and depth in `1..=max_depth` drawn from the seed, each interval up
/// to that depth kept with probability 3/4 (the root always), `τ` log-uniform in
/// `[2^-4, 2^4]`, cell weights log-uniform in `[2^-6, 2^6]` on a mesh one level deeper.
pub fn random_instance(seed: u64, max_depth: u32) -> Result<Instance> {
    if !(1..=12).contains(&max_depth) {
        return arg(format!("instance depth {max_depth} must lie in 1..=12"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.gen_range(1..=max_depth);
    let shift = if rng.gen::<bool>() { Shift::Zero } else { Shift::Third };
    let mut family = Vec::new();
    let mut tau = Vec::new();
    for i in build_grid(shift, depth)? {
        if i.level == 0 || rng.gen::<f64>() < 0.75 {
            family.push(i);
            tau.push(log_uniform(&mut rng, -4.0, 4.0));
        }
    }
    let spec = DyadicOperatorSpec::new(shift, family, tau)?;
    let mesh = CellMesh::build(depth + 1)?;
    let n = mesh.n_cells();
    let w: Vec<f64> = (0..n).map(|_| log_uniform(&mut rng, -6.0, 6.0)).collect();
    let s: Vec<f64> = (0..n).map(|_| log_uniform(&mut rng, -6.0, 6.0)).collect();
    Ok(Instance {
        seed,
        depth,
        spec,
        w: CellField::new(mesh.clone(), w, FieldKind::Weight)?,
        sigma: CellField::new(mesh, s, FieldKind::Weight)?,
    })
}

/// Random positive weight on `mesh`, log-uniform in `[2^-k, 2^k]`.
pub fn random_weight(mesh: &Arc<CellMesh>, k: f64, seed: u64) -> Result<CellField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..mesh.n_cells()).map(|_| log_uniform(&mut rng, -k, k)).collect();
    CellField::new(mesh.clone(), v, FieldKind::Weight)
}

/// Norms and testing constants recomputed after replacing `(w, σ)` by `(Δw, Δσ)` on the
/// operator's own grid; returns the largest relative discrepancy.
pub fn coarsening_discrepancy(spec: &DyadicOperatorSpec, w: &CellField, sigma: &CellField) -> Result<f64> {
    let n = spec.max_level();
    let dw = coarsen(w, spec.shift, n)?;
    let ds = coarsen(sigma, spec.shift, n)?;
    let a = verify_theorem(spec, w, sigma, 2.0)?;
    let b = verify_theorem(spec, &dw, &ds, 2.0)?;
    let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE);
    Ok(rel(a.norm, b.norm).max(rel(a.c0, b.c0)).max(rel(a.c0_star, b.c0_star)))
}

/// The three equivalent `L²` formulations with `σ = v^{-1}`: `T: L²(v) → L²(u)`,
/// `T(σ·): L²(σ) → L²(u)` and `u^{1/2} T(σ^{1/2}·): L² → L²`.
pub fn formulation_norms(spec: &DyadicOperatorSpec, v: &CellField, u: &CellField) -> Result<[f64; 3]> {
    let mesh = &v.mesh;
    let one = CellField::constant(mesh.clone(), 1.0, FieldKind::Weight)?;
    let sigma = dual_weight(v, 2.0)?;
    let a = weighted_norm(spec, &one, v, u)?;
    let b = weighted_norm(spec, &sigma, &sigma, u)?;
    let half = sigma.map(FieldKind::Weight, f64::sqrt)?;
    let c = weighted_norm(spec, &half, &one, u)?;
    Ok([a, b, c])
}
