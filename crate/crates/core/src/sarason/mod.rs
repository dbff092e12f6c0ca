//! Analytic symbols, the Sarason quantity `b_{f,g}`, truncated Toeplitz products and the
//! functionals `γ`, `δ`.

mod delta;
mod symbol;

use std::f64::consts::{LN_2, TAU};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{build_grid, DyadicInterval, Shift};
use crate::error::{arg, Result};
use crate::field::CellMesh;
use crate::kernel::{berezin, Density};
use crate::quadrature::{disc_partition, gauss_legendre, integrate, Hint, Options, Rect};

pub use delta::{delta_lower, DeltaBudget, DeltaLower};
pub use symbol::{AnalyticSymbol, HerglotzProduct, ModulusTable};

/// Name of the surrogate used for `P⁺` inside the condition-(4) constants.
pub const SURROGATE: &str = "P^0 + P^1/3";

/// `|f|²` as an integration density.
pub struct SquaredModulus<'a>(pub &'a AnalyticSymbol);

impl Density for SquaredModulus<'_> {
    fn eval(&self, z: Complex64) -> f64 {
        self.0.modulus_sq(z)
    }

    fn hints(&self) -> Vec<Hint> {
        self.0.hints().to_vec()
    }
}

/// Sample lattice: the origin plus rings `1 - 2^-k`, `k = 1..=levels`, with `angles · 2^⌈(k-1)/2⌉`
/// points on ring `k`, and extra points on every ring above each boundary hint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub levels: u32,
    pub angles: usize,
}

impl Lattice {
    pub fn new(levels: u32, angles: usize) -> Result<Self> {
        if !(1..=40).contains(&levels) || angles == 0 {
            return arg(format!("lattice needs 1..=40 levels and some angles, got {levels} and {angles}"));
        }
        Ok(Lattice { levels, angles })
    }

    pub fn doubled(&self) -> Self {
        Lattice { levels: self.levels, angles: 2 * self.angles }
    }

    pub fn points(&self, hints: &[Hint]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0)];
        let mut aims: Vec<f64> = hints.iter().map(|h| h.theta).collect();
        aims.sort_by(f64::total_cmp);
        aims.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        for k in 1..=self.levels {
            let r = 1.0 - (-(k as f64)).exp2();
            let n = self.angles << (k - 1).div_ceil(2).min(8);
            let offset = if k % 2 == 1 { 0.5 } else { 0.0 };
            out.extend((0..n).map(|i| Complex64::from_polar(r, TAU * (i as f64 + offset) / n as f64)));
            out.extend(aims.iter().map(|&t| Complex64::from_polar(r, t)));
        }
        out
    }
}

/// `B(|f|²)` on a list of points.
pub fn berezin_table(f: &AnalyticSymbol, points: &[Complex64], tol: f64) -> Result<Vec<f64>> {
    let d = SquaredModulus(f);
    points.par_iter().map(|&z| berezin(&d, z, tol)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarasonSample {
    pub value: f64,
    pub argmax: [f64; 2],
    pub points: usize,
}

fn best_product(points: &[Complex64], bf: &[f64], bg: &[f64]) -> SarasonSample {
    let mut best = SarasonSample { value: 0.0, argmax: [0.0, 0.0], points: points.len() };
    for ((z, a), b) in points.iter().zip(bf).zip(bg) {
        if a * b > best.value {
            best.value = a * b;
            best.argmax = [z.re, z.im];
        }
    }
    best
}

fn joint_hints(f: &AnalyticSymbol, g: &AnalyticSymbol) -> Vec<Hint> {
    let mut h: Vec<Hint> = f.hints().iter().chain(g.hints()).copied().filter(|h| h.s < 0.5).collect();
    h.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    h
}

/// `b_{f,g} = sup_z B(|f|²)(z) B(|g|²)(z)`, sampled on `lattice`.
pub fn b_fg(f: &AnalyticSymbol, g: &AnalyticSymbol, lattice: &Lattice, tol: f64) -> Result<SarasonSample> {
    let points = lattice.points(&joint_hints(f, g));
    let bf = berezin_table(f, &points, tol)?;
    let bg = berezin_table(g, &points, tol)?;
    Ok(best_product(&points, &bf, &bg))
}

#[derive(Debug, Clone)]
pub struct ToeplitzTruncation {
    /// `matrix[(m, n)] = ⟨T_f T_g* e_n, e_m⟩`.
    pub matrix: DMatrix<Complex64>,
    pub norm: f64,
}

/// The compression of `T_f T_g*` to `span{e_0, …, e_{M-1}}`, `e_n = √(n+1) zⁿ`.
pub fn toeplitz_product_matrix(f: &AnalyticSymbol, g: &AnalyticSymbol, m: usize) -> Result<ToeplitzTruncation> {
    let a = f.require_coefficients()?;
    let b = g.require_coefficients()?;
    if m == 0 {
        return arg("truncation size must be positive");
    }
    let coef = |c: &[Complex64], k: usize| c.get(k).copied().unwrap_or_default();
    let matrix = DMatrix::from_fn(m, m, |row, n| {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in n.saturating_sub(row)..=n {
            let q = n - k;
            let w = ((q + 1) as f64 / (n + 1) as f64).sqrt() * ((q + 1) as f64 / (row + 1) as f64).sqrt();
            acc += coef(b, k).conj() * coef(a, row - q) * w;
        }
        acc
    });
    let norm = matrix.clone().svd(false, false).singular_values.max();
    Ok(ToeplitzTruncation { matrix, norm })
}

struct ModulusTimesField<'a> {
    g: &'a AnalyticSymbol,
    u: &'a crate::field::CellField,
}

impl Density for ModulusTimesField<'_> {
    fn eval(&self, z: Complex64) -> f64 {
        self.g.eval(z).norm() * self.u.value_at(z)
    }

    fn partition(&self) -> Vec<Rect> {
        self.u.partition()
    }

    fn hints(&self) -> Vec<Hint> {
        self.g.hints().to_vec()
    }
}

/// `P⁺_{f,g} u(z) = |f(z)| ∫ |g(ζ)| u(ζ) / |1 - ζ̄z|² dA(ζ)`.
pub fn apply_pplus_fg(
    f: &AnalyticSymbol,
    g: &AnalyticSymbol,
    u: &crate::field::CellField,
    z: Complex64,
    tol: f64,
) -> Result<f64> {
    let fz = f.eval(z).norm();
    if fz == 0.0 {
        return Ok(0.0);
    }
    Ok(fz * crate::kernel::apply_pplus(&ModulusTimesField { g, u }, z, tol)?)
}

fn cell_rect(mesh: &CellMesh, c: usize) -> Rect {
    let (r0, r1, t0, t1) = mesh.bounds(c);
    Rect { s0: 1.0 - r1, s1: 1.0 - r0, t0: t0 * TAU, t1: t1 * TAU }
}

fn nearby(rect: &Rect, hints: &[Hint]) -> Vec<Hint> {
    hints.iter().filter(|h| rect.distance(h) < 2.0 * rect.size()).copied().collect()
}

/// `∫_cell |f|² dA` for every mesh cell. Symbols with a Herglotz representation are
/// tabulated on whole circles; others are integrated cell by cell.
pub fn symbol_cell_masses(f: &AnalyticSymbol, mesh: &Arc<CellMesh>, tol: f64) -> Result<Vec<f64>> {
    if f.herglotz_parts().is_some() {
        return Ok(circle_cell_masses(f, mesh, 8));
    }
    let hints = f.hints();
    let sq = |z: Complex64| f.eval(z).norm_sqr();
    (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let rect = cell_rect(mesh, c);
            Ok(integrate(&sq, vec![rect], &nearby(&rect, hints), &Options::tol(1e-300, tol))?.value)
        })
        .collect()
}

/// Cell masses of `|f|²` from `q` Gauss nodes in `r²` per band, each a full circle of
/// equally spaced samples integrated against the sectors with exact overlaps.
pub fn circle_cell_masses(f: &AnalyticSymbol, mesh: &Arc<CellMesh>, q: usize) -> Vec<f64> {
    let s_count = mesh.n_sectors();
    let base = f.herglotz_parts().map_or(0, |h| 4 * h.nodes());
    let n = (16 * s_count).max(base).next_power_of_two();
    let h = 1.0 / n as f64;
    let (x, w) = gauss_legendre(q);
    let edges: Vec<f64> = (0..=s_count)
        .map(|s| if s == s_count { 1.0 } else { mesh.bounds(s).2 })
        .collect();
    let mut out = vec![0.0; mesh.n_cells()];
    for b in 0..mesh.n_bands() {
        let (r0, r1, _, _) = mesh.bounds(b * s_count);
        let (a0, a1) = (r0 * r0, r1 * r1);
        let rows: Vec<Vec<f64>> = x
            .par_iter()
            .zip(&w)
            .map(|(&xi, &wi)| {
                let r = (a0 + (a1 - a0) * 0.5 * (xi + 1.0)).sqrt();
                let v: Vec<f64> = f.eval_circle(r, n).iter().map(|c| c.norm_sqr()).collect();
                // prefix[m] = ∫ over samples k < m, sample k covering [kh - h/2, kh + h/2)
                let mut prefix = vec![0.0; n + 2];
                for m in 0..=n {
                    prefix[m + 1] = prefix[m] + v[m % n] * h;
                }
                let at = |t: f64| {
                    let m = (((t + 0.5 * h) / h).floor() as usize).min(n);
                    prefix[m] + v[m % n] * (t - (m as f64 * h - 0.5 * h))
                };
                let scale = 0.5 * wi * (a1 - a0);
                (0..s_count).map(|s| scale * (at(edges[s + 1]) - at(edges[s]))).collect()
            })
            .collect();
        for row in rows {
            for (s, v) in row.into_iter().enumerate() {
                out[b * s_count + s] += v;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionFour {
    pub c0a: f64,
    pub c0b: f64,
    pub argmax_a: DyadicInterval,
    pub argmax_b: DyadicInterval,
    pub depth: u32,
    pub mesh_depth: u32,
    pub surrogate: String,
}

fn surrogate_values(mesh: &CellMesh, masses: &[f64]) -> Vec<f64> {
    let sums = [mesh.box_sums(masses, Shift::Zero), mesh.box_sums(masses, Shift::Third)];
    (0..mesh.n_cells())
        .map(|c| {
            let s = mesh.sector(c);
            let mut acc = 0.0;
            for (shift, t) in [Shift::Zero, Shift::Third].into_iter().zip(&sums) {
                for j in 0..=mesh.band(c) {
                    acc += t[j][mesh.sector_index(shift, j as u32, s) as usize] * 4f64.powi(j as i32);
                }
            }
            acc
        })
        .collect()
}

/// `max_I ‖ |f| P(|g|² 1_{Q_I}) ‖₂ / ‖ g 1_{Q_I} ‖₂` from cell masses of `|f|²`, `|g|²`.
pub fn condition_four_constant(
    mesh: &CellMesh,
    mass_f: &[f64],
    mass_g: &[f64],
    depth: u32,
) -> Result<(f64, DyadicInterval)> {
    mesh.check_resolvable(depth)?;
    let mut grid = build_grid(Shift::Zero, depth)?;
    grid.extend(build_grid(Shift::Third, depth)?);
    let values: Vec<(DyadicInterval, f64)> = grid
        .par_iter()
        .filter_map(|i| {
            let masked: Vec<f64> =
                (0..mesh.n_cells()).map(|c| if mesh.in_box(c, i) { mass_g[c] } else { 0.0 }).collect();
            let den: f64 = masked.iter().sum();
            if den <= 0.0 {
                return None;
            }
            let p = surrogate_values(mesh, &masked);
            let num: f64 = p.iter().zip(mass_f).map(|(v, m)| v * v * m).sum();
            Some((*i, (num / den).sqrt()))
        })
        .collect();
    let mut best = (0.0, DyadicInterval::root(Shift::Zero));
    for (i, v) in values {
        if v > best.0 {
            best = (v, i);
        }
    }
    Ok(best)
}

/// The two testing constants of condition (4) with the dyadic surrogate for `P⁺`.
pub fn test_conditions_4(
    f: &AnalyticSymbol,
    g: &AnalyticSymbol,
    mesh_depth: u32,
    depth: u32,
    tol: f64,
) -> Result<ConditionFour> {
    let mesh = CellMesh::build(mesh_depth)?;
    let mf = symbol_cell_masses(f, &mesh, tol)?;
    let mg = symbol_cell_masses(g, &mesh, tol)?;
    test_conditions_4_from_masses(&mesh, &mf, &mg, depth)
}

pub fn test_conditions_4_from_masses(mesh: &CellMesh, mf: &[f64], mg: &[f64], depth: u32) -> Result<ConditionFour> {
    let (c0a, argmax_a) = condition_four_constant(mesh, mf, mg, depth)?;
    let (c0b, argmax_b) = condition_four_constant(mesh, mg, mf, depth)?;
    Ok(ConditionFour { c0a, c0b, argmax_a, argmax_b, depth, mesh_depth: mesh.depth(), surrogate: SURROGATE.into() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    pub gamma: f64,
    pub argmax: DyadicInterval,
    pub depth: u32,
    /// Levels up to which every interval was visited; deeper ones only near hints.
    pub full_levels: u32,
}

/// Levels below which `gamma` visits every interval of both grids.
pub const GAMMA_FULL_LEVELS: u32 = 8;

/// `∫_{Q_I} |f|² dA`.
pub fn box_integral(f: &AnalyticSymbol, i: &DyadicInterval, tol: f64) -> Result<f64> {
    let (t0, t1) = i.arc_radians();
    let rect = Rect { s0: 0.0, s1: i.len(), t0, t1 };
    let sq = |z: Complex64| f.eval(z).norm_sqr();
    Ok(integrate(&sq, vec![rect], &nearby(&rect, f.hints()), &Options::tol(1e-300, tol))?.value)
}

fn gamma_intervals(f: &AnalyticSymbol, depth: u32) -> Result<Vec<DyadicInterval>> {
    let full = depth.min(GAMMA_FULL_LEVELS);
    let mut out = build_grid(Shift::Zero, full)?;
    out.extend(build_grid(Shift::Third, full)?);
    for level in full + 1..=depth {
        let n = 1u64 << level;
        for shift in Shift::BOTH {
            let mut idx: Vec<u64> = f
                .hints()
                .iter()
                .filter(|h| h.s < (-(level as f64)).exp2())
                .flat_map(|h| {
                    let k = DyadicInterval::containing(h.theta / TAU, shift, level).index;
                    [(k + n - 1) % n, k, (k + 1) % n]
                })
                .collect();
            idx.sort_unstable();
            idx.dedup();
            out.extend(idx.into_iter().map(|index| DyadicInterval { shift, level, index }));
        }
    }
    Ok(out)
}

/// `γ(f) = (max_I log(2π/ℓ(I)) ∫_{Q_I} |f|²)^{1/2}` with `ℓ` the radian length.
pub fn gamma(f: &AnalyticSymbol, depth: u32, tol: f64) -> Result<GammaReport> {
    let intervals = gamma_intervals(f, depth)?;
    let values: Vec<f64> = intervals
        .par_iter()
        .map(|i| Ok(i.level as f64 * LN_2 * box_integral(f, i, tol)?))
        .collect::<Result<_>>()?;
    let mut best = GammaReport {
        gamma: 0.0,
        argmax: DyadicInterval::root(Shift::Zero),
        depth,
        full_levels: depth.min(GAMMA_FULL_LEVELS),
    };
    for (i, v) in intervals.iter().zip(values) {
        if v > best.gamma {
            best.gamma = v;
            best.argmax = *i;
        }
    }
    best.gamma = best.gamma.sqrt();
    Ok(best)
}

/// `‖f‖²_{A²}`, exact for coefficient symbols.
pub fn norm_sq(f: &AnalyticSymbol, tol: f64) -> Result<f64> {
    if let Some(v) = f.coefficient_norm_sq() {
        return Ok(v);
    }
    let sq = |z: Complex64| f.eval(z).norm_sqr();
    Ok(integrate(&sq, disc_partition(8), f.hints(), &Options::tol(1e-300, tol))?.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OurexReport {
    pub b_fg: f64,
    pub f_norm_sq: f64,
    /// Sampled supremum of `|fg|²` over the lattice.
    pub fg_sup_sq: f64,
    pub gamma_sq: f64,
    pub ratio: f64,
}

impl OurexReport {
    pub fn new(b_fg: f64, f_norm_sq: f64, fg_sup_sq: f64, gamma_sq: f64) -> Self {
        let den = f_norm_sq + fg_sup_sq + gamma_sq;
        let ratio = if den > 0.0 { b_fg / den } else { 0.0 };
        OurexReport { b_fg, f_norm_sq, fg_sup_sq, gamma_sq, ratio }
    }
}

/// Sampled `sup |f g|²` over the lattice points.
pub fn product_sup_sq(f: &AnalyticSymbol, g: &AnalyticSymbol, points: &[Complex64]) -> f64 {
    points.iter().map(|&z| (f.eval(z) * g.eval(z)).norm_sqr()).fold(0.0, f64::max)
}

/// `b_{f,g} / (‖f‖² + ‖fg‖²_∞ + γ²(f))`.
pub fn ourex_bound_check(
    f: &AnalyticSymbol,
    g: &AnalyticSymbol,
    lattice: &Lattice,
    gamma_depth: u32,
    tol: f64,
) -> Result<OurexReport> {
    let points = lattice.points(&joint_hints(f, g));
    let b = b_fg(f, g, lattice, tol)?;
    let gm = gamma(f, gamma_depth, tol)?;
    Ok(OurexReport::new(b.value, norm_sq(f, tol)?, product_sup_sq(f, g, &points), gm.gamma * gm.gamma))
}

/// Lattice points used by [`b_fg`] for this pair.
pub fn pair_points(f: &AnalyticSymbol, g: &AnalyticSymbol, lattice: &Lattice) -> Vec<Complex64> {
    lattice.points(&joint_hints(f, g))
}

/// Evaluate [`b_fg`] from precomputed Berezin tables on [`pair_points`].
pub fn b_fg_from_tables(points: &[Complex64], bf: &[f64], bg: &[f64]) -> SarasonSample {
    best_product(points, bf, bg)
}
