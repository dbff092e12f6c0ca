use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::DyadicOperatorSpec;
use crate::dyadic::{DyadicInterval, Shift};
use crate::error::{arg, Result};
use crate::field::{CellField, FieldKind};

/// Growth factor of the stopping rule.
pub const GROWTH: f64 = 4.0;

/// Weighted averages `E^w_Q |f| = ∫_Q |f| w / w(Q)` for every box of the grid.
fn weighted_averages(w: &CellField, f: &CellField, shift: Shift) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mesh = &w.mesh;
    let a = mesh.areas();
    let fw: Vec<f64> = (0..mesh.n_cells()).map(|c| f.values[c].abs() * w.values[c] * a[c]).collect();
    let num = mesh.box_sums(&fw, shift);
    let den = mesh.box_sums(&w.masses(), shift);
    let avg = num.iter().zip(&den).map(|(n, d)| n.iter().zip(d).map(|(x, y)| x / y).collect()).collect();
    (avg, den)
}

/// `M_w f`: the largest `E^w_Q |f|` over boxes of grid `shift` containing the cell.
pub fn weighted_maximal(w: &CellField, f: &CellField, shift: Shift) -> Result<CellField> {
    w.same_mesh(f)?;
    let mesh = &w.mesh;
    let (avg, _) = weighted_averages(w, f, shift);
    let values = (0..mesh.n_cells())
        .map(|c| {
            let s = mesh.sector(c);
            (0..=mesh.band(c))
                .map(|j| avg[j][mesh.sector_index(shift, j as u32, s) as usize])
                .fold(0.0, f64::max)
        })
        .collect();
    CellField::new(mesh.clone(), values, FieldKind::Density)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingCube {
    pub interval: DyadicInterval,
    pub generation: usize,
    pub parent: Option<usize>,
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoronaForest {
    pub shift: Shift,
    pub stopping: Vec<StoppingCube>,
    pub family: Vec<DyadicInterval>,
    /// `bucket[i]`: index in `stopping` of `λ(family[i])`.
    pub bucket: Vec<usize>,
}

impl CoronaForest {
    pub fn generations(&self) -> usize {
        self.stopping.iter().map(|s| s.generation + 1).max().unwrap_or(0)
    }

    pub fn bucket_sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.stopping.len()];
        for &b in &self.bucket {
            out[b] += 1;
        }
        out
    }
}

/// Stopping cubes for `f` relative to `w`: the roots (by default the maximal members of the
/// family) form generation 0, and a member `Q` stops when `E^w_Q|f| > 4 E^w_L|f|` for the
/// smallest stopping cube `L ⊋ Q`.
pub fn corona(
    w: &CellField,
    f: &CellField,
    shift: Shift,
    family: &[DyadicInterval],
    roots: Option<&[DyadicInterval]>,
) -> Result<CoronaForest> {
    w.same_mesh(f)?;
    if let Some(i) = family.iter().find(|i| i.shift != shift) {
        return arg(format!("{i} is not in grid {shift}"));
    }
    let top = family.iter().map(|i| i.level).max().unwrap_or(0);
    w.mesh.check_resolvable(top)?;
    let (avg, _) = weighted_averages(w, f, shift);
    let av = |i: &DyadicInterval| avg[i.level as usize][i.index as usize];

    let mut order: Vec<usize> = (0..family.len()).collect();
    order.sort_by_key(|&k| (family[k].level, family[k].index));
    let roots: Vec<DyadicInterval> = match roots {
        Some(r) => r.to_vec(),
        None => family
            .iter()
            .filter(|q| !family.iter().any(|p| p != *q && p.contains_interval(q)))
            .copied()
            .collect(),
    };
    let mut stopping: Vec<StoppingCube> = Vec::new();
    let mut index: HashMap<DyadicInterval, usize> = HashMap::new();
    for r in &roots {
        w.mesh.check_resolvable(r.level)?;
        index.insert(*r, stopping.len());
        stopping.push(StoppingCube { interval: *r, generation: 0, parent: None, average: av(r) });
    }
    let nearest = |q: &DyadicInterval, index: &HashMap<DyadicInterval, usize>, strict: bool| {
        let start = if strict { q.level.checked_sub(1)? } else { q.level };
        (0..=start).rev().find_map(|j| index.get(&q.ancestor_at(j)).copied())
    };
    let mut bucket = vec![usize::MAX; family.len()];
    for &k in &order {
        let q = family[k];
        if index.contains_key(&q) {
            bucket[k] = index[&q];
            continue;
        }
        let Some(l) = nearest(&q, &index, true) else {
            return arg(format!("{q} lies under no root"));
        };
        if av(&q) > GROWTH * stopping[l].average {
            index.insert(q, stopping.len());
            bucket[k] = stopping.len();
            stopping.push(StoppingCube { interval: q, generation: stopping[l].generation + 1, parent: Some(l), average: av(&q) });
        } else {
            bucket[k] = l;
        }
    }
    Ok(CoronaForest { shift, stopping, family: family.to_vec(), bucket })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoronaCheck {
    pub strict_growth: bool,
    /// Smallest `E_child / E_parent` over stopping pairs (infinite when there are none).
    pub min_growth: f64,
    /// `max_x Σ_{L∋x} E^w_L|f| / max_{L∋x} E^w_L|f|`.
    pub max_chain_ratio: f64,
    /// `max_x Σ_{L∋x} E^w_L|f| / M_w f(x)`.
    pub max_pointwise_ratio: f64,
    /// `Σ_L (E^w_L|f|)^p w(Q_L) / ‖f‖^p_{L^p(w)}`.
    pub lbounded_constant: f64,
    pub partition_ok: bool,
}

pub fn corona_linearization_check(forest: &CoronaForest, w: &CellField, f: &CellField, p: f64) -> Result<CoronaCheck> {
    let mesh = &w.mesh;
    let shift = forest.shift;
    let mut min_growth = f64::INFINITY;
    for s in &forest.stopping {
        if let Some(par) = s.parent {
            min_growth = min_growth.min(s.average / forest.stopping[par].average);
        }
    }
    let strict_growth = forest
        .stopping
        .iter()
        .all(|s| s.parent.is_none_or(|par| s.average > GROWTH * forest.stopping[par].average));
    let maximal = weighted_maximal(w, f, shift)?;
    let by_level: HashMap<(u32, u64), f64> =
        forest.stopping.iter().map(|s| ((s.interval.level, s.interval.index), s.average)).collect();
    let top = forest.stopping.iter().map(|s| s.interval.level).max().unwrap_or(0) as usize;
    let (mut chain, mut pointwise) = (0.0f64, 0.0f64);
    for c in 0..mesh.n_cells() {
        let sec = mesh.sector(c);
        let (mut sum, mut best) = (0.0, 0.0f64);
        for j in 0..=mesh.band(c).min(top) {
            if let Some(&e) = by_level.get(&(j as u32, mesh.sector_index(shift, j as u32, sec))) {
                sum += e;
                best = best.max(e);
            }
        }
        if sum > 0.0 {
            chain = chain.max(sum / best);
            pointwise = pointwise.max(sum / maximal.values[c]);
        }
    }
    let wq = mesh.box_sums(&w.masses(), shift);
    let lhs: f64 = forest
        .stopping
        .iter()
        .map(|s| s.average.powf(p) * wq[s.interval.level as usize][s.interval.index as usize])
        .sum();
    let rhs: f64 = f.values.iter().zip(&w.values).zip(mesh.areas()).map(|((v, x), a)| v.abs().powf(p) * x * a).sum();
    let partition_ok = forest.bucket.len() == forest.family.len()
        && forest.bucket.iter().all(|&b| b < forest.stopping.len())
        && forest.bucket_sizes().iter().sum::<usize>() == forest.family.len()
        && forest
            .family
            .iter()
            .zip(&forest.bucket)
            .all(|(q, &b)| forest.stopping[b].interval.contains_interval(q));
    Ok(CoronaCheck {
        strict_growth,
        min_growth,
        max_chain_ratio: chain,
        max_pointwise_ratio: pointwise,
        lbounded_constant: if rhs > 0.0 { lhs / rhs } else { 0.0 },
        partition_ok,
    })
}

/// `𝒬₁ = {Q : (E^w_Q f)^p w(Q) >= (E^σ_Q g)^{p'} σ(Q)}` and its complement.
pub fn split_families(
    spec: &DyadicOperatorSpec,
    w: &CellField,
    sigma: &CellField,
    f: &CellField,
    g: &CellField,
    p: f64,
) -> Result<(Vec<DyadicInterval>, Vec<DyadicInterval>)> {
    if !(p > 1.0 && p.is_finite()) {
        return arg(format!("exponent {p} must lie in (1, ∞)"));
    }
    let pp = p / (p - 1.0);
    let (ef, wq) = weighted_averages(w, f, spec.shift);
    let (eg, sq) = weighted_averages(sigma, g, spec.shift);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for q in &spec.family {
        let (j, k) = (q.level as usize, q.index as usize);
        if ef[j][k].powf(p) * wq[j][k] >= eg[j][k].powf(pp) * sq[j][k] {
            first.push(*q);
        } else {
            second.push(*q);
        }
    }
    Ok((first, second))
}
