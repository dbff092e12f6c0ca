//! Bekollé–Bonami constants `B_p`, the maximal-function constant `B∞`, the sparse-sum
//! bound and the sharp mixed estimate for the dyadic projections.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{build_grid, DyadicInterval, Shift};
use crate::error::{arg, Result};
use crate::field::{CellField, CellMesh, FieldKind};
use crate::two_weight::{dual_weight, weighted_norm, DyadicOperatorSpec};

use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConstant {
    pub value: f64,
    pub argmax: DyadicInterval,
    pub depth: u32,
}

fn both_grids(mesh: &CellMesh, depth: u32) -> Result<Vec<DyadicInterval>> {
    mesh.check_resolvable(depth)?;
    let mut out = build_grid(Shift::Zero, depth)?;
    out.extend(build_grid(Shift::Third, depth)?);
    Ok(out)
}

fn argmax(values: impl Iterator<Item = (DyadicInterval, f64)>, depth: u32) -> WeightConstant {
    let mut best = WeightConstant { value: f64::NEG_INFINITY, argmax: DyadicInterval::root(Shift::Zero), depth };
    for (i, v) in values {
        if v > best.value {
            best.value = v;
            best.argmax = i;
        }
    }
    best
}

/// `sup_I (avg_{Q_I} w)(avg_{Q_I} w^{1-p'})^{p-1}` over both grids up to `depth`.
pub fn bekolle_bp(w: &CellField, p: f64, depth: u32) -> Result<WeightConstant> {
    let mesh = &w.mesh;
    let intervals = both_grids(mesh, depth)?;
    let dual = dual_weight(w, p)?;
    let sums = |f: &CellField| Shift::BOTH.map(|s| mesh.box_sums(&f.masses(), s));
    let (ws, ds, areas) = (sums(w), sums(&dual), Shift::BOTH.map(|s| mesh.box_sums(mesh.areas(), s)));
    Ok(argmax(
        intervals.into_iter().map(|i| {
            let (g, j, k) = (i.shift.slot(), i.level as usize, i.index as usize);
            let a = areas[g][j][k];
            (i, ws[g][j][k] / a * (ds[g][j][k] / a).powf(p - 1.0))
        }),
        depth,
    ))
}

/// Plain box averages of the cell masses `x` for both grids: `avg[g][j][m]`.
fn box_averages(mesh: &CellMesh, x: &[f64]) -> [Vec<Vec<f64>>; 2] {
    Shift::BOTH.map(|s| {
        let num = mesh.box_sums(x, s);
        let den = mesh.box_sums(mesh.areas(), s);
        num.iter().zip(&den).map(|(n, d)| n.iter().zip(d).map(|(a, b)| a / b).collect()).collect()
    })
}

fn maximal_from_masses(mesh: &CellMesh, x: &[f64], cells: impl Iterator<Item = usize>) -> Vec<(usize, f64)> {
    let avg = box_averages(mesh, x);
    cells
        .map(|c| {
            let s = mesh.sector(c);
            let mut best = 0.0f64;
            for shift in Shift::BOTH {
                for j in 0..=mesh.band(c) {
                    best = best.max(avg[shift.slot()][j][mesh.sector_index(shift, j as u32, s) as usize]);
                }
            }
            (c, best)
        })
        .collect()
}

/// Cellwise supremum of plain box averages over every resolvable box of both grids.
pub fn maximal_over_boxes(f: &CellField) -> Result<CellField> {
    let mesh = &f.mesh;
    let x: Vec<f64> = f.values.iter().zip(mesh.areas()).map(|(v, a)| v.abs() * a).collect();
    let values = maximal_from_masses(mesh, &x, 0..mesh.n_cells()).into_iter().map(|(_, v)| v).collect();
    CellField::new(mesh.clone(), values, FieldKind::Density)
}

/// `(1/w(Q_I)) ∫_{Q_I} M(w 1_{Q_I})` for one interval.
pub fn b_infinity_at(w: &CellField, i: &DyadicInterval) -> Result<f64> {
    let mesh = &w.mesh;
    let cells = mesh.cells_in_box(i)?;
    let mut x = vec![0.0; mesh.n_cells()];
    for &c in &cells {
        x[c] = w.values[c] * mesh.areas()[c];
    }
    let mass: f64 = cells.iter().map(|&c| x[c]).sum();
    let m = maximal_from_masses(mesh, &x, cells.iter().copied());
    Ok(m.iter().map(|&(c, v)| v * mesh.areas()[c]).sum::<f64>() / mass)
}

/// `sup_I (1/w(Q_I)) ∫_{Q_I} M(w 1_{Q_I})` over both grids up to `depth`.
pub fn b_infinity(w: &CellField, depth: u32) -> Result<WeightConstant> {
    let intervals = both_grids(&w.mesh, depth)?;
    let vals: Vec<(DyadicInterval, f64)> =
        intervals.par_iter().map(|i| Ok((*i, b_infinity_at(w, i)?))).collect::<Result<_>>()?;
    Ok(argmax(vals.into_iter(), depth))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseSum {
    /// `Σ_{K⊆I} σ(Q_K) / (B∞(σ) σ(Q_I))`.
    pub ratio: f64,
    /// The same sum over `K ⊊ I`.
    pub strict_ratio: f64,
    pub b_infinity: f64,
}

/// Sparse-sum ratio with a precomputed `B∞(σ)`.
pub fn sparse_sum_ratio(sigma: &CellField, i: &DyadicInterval, depth: u32, b_inf: f64) -> Result<SparseSum> {
    let mesh = &sigma.mesh;
    mesh.check_resolvable(depth)?;
    if i.level > depth {
        return arg(format!("{i} is deeper than {depth}"));
    }
    let sums = mesh.box_sums(&sigma.masses(), i.shift);
    let own = sums[i.level as usize][i.index as usize];
    let mut total = 0.0;
    for j in i.level..=depth {
        let span = 1u64 << (j - i.level);
        let first = i.index << (j - i.level);
        total += (first..first + span).map(|k| sums[j as usize][k as usize]).sum::<f64>();
    }
    Ok(SparseSum { ratio: total / (b_inf * own), strict_ratio: (total - own) / (b_inf * own), b_infinity: b_inf })
}

pub fn sparse_sum_check(sigma: &CellField, i: &DyadicInterval, depth: u32) -> Result<SparseSum> {
    let b = b_infinity(sigma, depth)?.value;
    sparse_sum_ratio(sigma, i, depth, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalSplit {
    pub d: f64,
    pub od: f64,
    /// `‖P^β_{I,in}(w⁻¹1_{Q_I})‖²_{L²(w)}` computed cellwise.
    pub testing: f64,
    /// `|testing - (D + 2 OD)| / testing`.
    pub residual: f64,
    /// `Σ_{K⊆I} w⁻¹(Q_K)`.
    pub dual_sum: f64,
}

/// Diagonal and off-diagonal parts of the local testing quantity for `P^β`, grid of `i`.
pub fn d_od_decomposition(w: &CellField, i: &DyadicInterval, depth: u32) -> Result<DiagonalSplit> {
    let mesh = &w.mesh;
    mesh.check_resolvable(depth)?;
    if i.level > depth {
        return arg(format!("{i} is deeper than {depth}"));
    }
    let inv = dual_weight(w, 2.0)?;
    let shift = i.shift;
    let ws = mesh.box_sums(&w.masses(), shift);
    let vs = mesh.box_sums(&inv.masses(), shift);
    let subs: Vec<DyadicInterval> = build_grid(shift, depth)?.into_iter().filter(|k| i.contains_interval(k)).collect();
    let at = |s: &Vec<Vec<f64>>, k: &DyadicInterval| s[k.level as usize][k.index as usize];
    let mut d = 0.0;
    let mut od = 0.0;
    let mut dual_sum = 0.0;
    for k in &subs {
        let lk = k.len();
        d += at(&vs, k).powi(2) * at(&ws, k) / lk.powi(4);
        dual_sum += at(&vs, k);
        for kp in subs.iter().filter(|kp| kp.level < k.level && kp.contains_interval(k)) {
            let lp = kp.len();
            od += at(&vs, kp) / lp * at(&vs, k) / lk * at(&ws, k) / (lk * lp);
        }
    }
    // cellwise: the sum over K ⊆ I containing the cell of w⁻¹(Q_K)/|K|²
    let top = depth as usize;
    let testing: f64 = (0..mesh.n_cells())
        .filter(|&c| mesh.in_box(c, i))
        .map(|c| {
            let s = mesh.sector(c);
            let v: f64 = (i.level as usize..=mesh.band(c).min(top))
                .map(|j| vs[j][mesh.sector_index(shift, j as u32, s) as usize] * 4f64.powi(j as i32))
                .sum();
            v * v * w.values[c] * mesh.areas()[c]
        })
        .sum();
    let residual = (testing - (d + 2.0 * od)).abs() / testing;
    Ok(DiagonalSplit { d, od, testing, residual, dual_sum })
}

/// Exact cell averages of `(1-|z|²)^α`.
pub fn power_weight(mesh: &Arc<CellMesh>, alpha: f64) -> Result<CellField> {
    if !(alpha > -1.0) || !alpha.is_finite() {
        return arg(format!("exponent {alpha} must exceed -1"));
    }
    CellField::from_cells(mesh.clone(), FieldKind::Weight, |c| {
        let (r0, r1, _, _) = mesh.bounds(c);
        let (u0, u1) = (r0 * r0, r1 * r1);
        ((1.0 - u0).powf(alpha + 1.0) - (1.0 - u1).powf(alpha + 1.0)) / ((alpha + 1.0) * (u1 - u0))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpRow {
    pub alpha: f64,
    pub depth: u32,
    /// `max_β ‖P^β‖_{L²(w) → L²(w)}`.
    pub norm: f64,
    #[serde(rename = "B2")]
    pub b2: f64,
    #[serde(rename = "Binf_w")]
    pub binf_w: f64,
    #[serde(rename = "Binf_winv")]
    pub binf_winv: f64,
    pub ratio: f64,
}

impl SharpRow {
    pub fn mixed_bound(&self) -> f64 {
        self.b2.sqrt() * (self.binf_w.sqrt() + self.binf_winv.sqrt())
    }
}

/// One row of the sharp estimate for `w = (1-|z|²)^α` on a depth-`depth` mesh.
pub fn sharp_row(alpha: f64, depth: u32) -> Result<SharpRow> {
    if !(alpha > -1.0 && alpha < 1.0) {
        return arg(format!("exponent {alpha} must lie in (-1, 1)"));
    }
    let mesh = CellMesh::build(depth)?;
    let w = power_weight(&mesh, alpha)?;
    let inv = dual_weight(&w, 2.0)?;
    let one = CellField::constant(mesh.clone(), 1.0, FieldKind::Weight)?;
    let mut norm = 0.0f64;
    for shift in Shift::BOTH {
        let spec = DyadicOperatorSpec::pbeta(shift, depth)?;
        norm = norm.max(weighted_norm(&spec, &one, &w, &w)?);
    }
    let b2 = bekolle_bp(&w, 2.0, depth)?.value;
    let binf_w = b_infinity(&w, depth)?.value;
    let binf_winv = b_infinity(&inv, depth)?.value;
    let ratio = norm / (b2.sqrt() * (binf_w.sqrt() + binf_winv.sqrt()));
    Ok(SharpRow { alpha, depth, norm, b2, binf_w, binf_winv, ratio })
}

pub fn sharp_sweep(alphas: &[f64], depth: u32) -> Result<Vec<SharpRow>> {
    alphas.iter().map(|&a| sharp_row(a, depth)).collect()
}
