//! Polar cell mesh refined to both dyadic grids, and piecewise-constant fields on it.

use std::f64::consts::TAU;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{frac, index_of, radial_level, turn_of, DyadicInterval, Shift};
use crate::error::{arg, Error, Result};

pub const MAX_MESH_DEPTH: u32 = 20;

/// Smallest admissible weight value.
pub const WEIGHT_FLOOR: f64 = 1e-300;

/// Sectors are the gaps between the level-`N` breakpoints of both grids; bands are
/// `[1 - 2^-b, 1 - 2^-(b+1))` for `b < N` plus the outer ring `[1 - 2^-N, 1)`.
/// Cell `c` sits in band `c / S` and sector `c % S`.
#[derive(Debug)]
pub struct CellMesh {
    depth: u32,
    angles: Vec<f64>,
    radii: Vec<f64>,
    areas: Vec<f64>,
    // index[g][j][s]: index of the level-j interval of grid g over sector s
    index: [Vec<Vec<u64>>; 2],
}

impl CellMesh {
    pub fn build(depth: u32) -> Result<Arc<CellMesh>> {
        if !(1..=MAX_MESH_DEPTH).contains(&depth) {
            return arg(format!("mesh depth {depth} must lie in 1..={MAX_MESH_DEPTH}"));
        }
        let n = 1u64 << depth;
        let mut angles: Vec<f64> = (0..n)
            .flat_map(|m| {
                let t = m as f64 / n as f64;
                [t, frac(t + 1.0 / 3.0)]
            })
            .collect();
        angles.sort_by(f64::total_cmp);
        angles.push(1.0);
        let s_count = angles.len() - 1;
        let mut radii: Vec<f64> = (0..=depth).map(|j| 1.0 - (-(j as f64)).exp2()).collect();
        radii.push(1.0);
        let mut areas = Vec::with_capacity(s_count * (depth as usize + 1));
        for b in 0..=depth as usize {
            let ring = radii[b + 1] * radii[b + 1] - radii[b] * radii[b];
            areas.extend((0..s_count).map(|s| (angles[s + 1] - angles[s]) * ring));
        }
        let mids: Vec<f64> = (0..s_count).map(|s| 0.5 * (angles[s] + angles[s + 1])).collect();
        let table = |shift| {
            (0..=depth)
                .map(|j| mids.iter().map(|&t| index_of(t, shift, j)).collect())
                .collect()
        };
        let index = [table(Shift::Zero), table(Shift::Third)];
        Ok(Arc::new(CellMesh { depth, angles, radii, areas, index }))
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn n_sectors(&self) -> usize {
        self.angles.len() - 1
    }

    pub fn n_bands(&self) -> usize {
        self.depth as usize + 1
    }

    pub fn n_cells(&self) -> usize {
        self.areas.len()
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn band(&self, cell: usize) -> usize {
        cell / self.n_sectors()
    }

    pub fn sector(&self, cell: usize) -> usize {
        cell % self.n_sectors()
    }

    /// `(r0, r1, t0, t1)` with angles in turns.
    pub fn bounds(&self, cell: usize) -> (f64, f64, f64, f64) {
        let (b, s) = (self.band(cell), self.sector(cell));
        (self.radii[b], self.radii[b + 1], self.angles[s], self.angles[s + 1])
    }

    pub fn sector_index(&self, shift: Shift, level: u32, sector: usize) -> u64 {
        self.index[shift.slot()][level as usize][sector]
    }

    pub fn locate(&self, z: Complex64) -> Option<usize> {
        let r = z.norm();
        if !(r < 1.0) {
            return None;
        }
        let b = (radial_level(r) as usize).min(self.depth as usize);
        let t = turn_of(z);
        let s = self.angles.partition_point(|&a| a <= t).saturating_sub(1).min(self.n_sectors() - 1);
        Some(b * self.n_sectors() + s)
    }

    pub fn check_resolvable(&self, level: u32) -> Result<()> {
        if level > self.depth {
            return Err(Error::Unresolvable { mesh_depth: self.depth, needed: level });
        }
        Ok(())
    }

    pub fn in_box(&self, cell: usize, i: &DyadicInterval) -> bool {
        self.band(cell) >= i.level as usize && self.sector_index(i.shift, i.level, self.sector(cell)) == i.index
    }

    pub fn in_top_half(&self, cell: usize, i: &DyadicInterval) -> bool {
        self.band(cell) == i.level as usize && self.sector_index(i.shift, i.level, self.sector(cell)) == i.index
    }

    pub fn cells_in_box(&self, i: &DyadicInterval) -> Result<Vec<usize>> {
        self.check_resolvable(i.level)?;
        Ok((0..self.n_cells()).filter(|&c| self.in_box(c, i)).collect())
    }

    /// Masses of every box of grid `shift` up to the mesh depth: `out[j][m] = Σ_{c ∈ Q} x_c`.
    pub fn box_sums(&self, x: &[f64], shift: Shift) -> Vec<Vec<f64>> {
        let s_count = self.n_sectors();
        let d = self.depth as usize;
        let mut tail = vec![0.0; s_count];
        let mut out = vec![Vec::new(); d + 1];
        for j in (0..=d).rev() {
            for s in 0..s_count {
                tail[s] += x[j * s_count + s];
            }
            let mut sums = vec![0.0; 1 << j];
            for s in 0..s_count {
                sums[self.index[shift.slot()][j][s] as usize] += tail[s];
            }
            out[j] = sums;
        }
        out
    }

    /// Sums over top halves `T_I` for levels `< depth`: `out[j][m]`.
    pub fn top_half_sums(&self, x: &[f64], shift: Shift) -> Vec<Vec<f64>> {
        let s_count = self.n_sectors();
        (0..self.depth as usize)
            .map(|j| {
                let mut sums = vec![0.0; 1 << j];
                for s in 0..s_count {
                    sums[self.index[shift.slot()][j][s] as usize] += x[j * s_count + s];
                }
                sums
            })
            .collect()
    }

    /// Sample nodes `(z, weight)` of a `q × q` midpoint rule in `(r², θ)` inside a cell;
    /// the weights sum to one.
    pub fn cell_nodes(&self, cell: usize, q: usize) -> Vec<Complex64> {
        let (r0, r1, t0, t1) = self.bounds(cell);
        let (a0, a1) = (r0 * r0, r1 * r1);
        let mut out = Vec::with_capacity(q * q);
        for i in 0..q {
            let rho = (a0 + (a1 - a0) * (i as f64 + 0.5) / q as f64).sqrt();
            for k in 0..q {
                let t = t0 + (t1 - t0) * (k as f64 + 0.5) / q as f64;
                out.push(Complex64::from_polar(rho, TAU * t));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Density,
    Weight,
}

#[derive(Debug, Clone)]
pub struct CellField {
    pub mesh: Arc<CellMesh>,
    pub values: Vec<f64>,
    pub kind: FieldKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Disc,
    Box(DyadicInterval),
    TopHalf(DyadicInterval),
}

impl CellField {
    pub fn new(mesh: Arc<CellMesh>, values: Vec<f64>, kind: FieldKind) -> Result<Self> {
        if values.len() != mesh.n_cells() {
            return arg(format!("expected {} cell values, got {}", mesh.n_cells(), values.len()));
        }
        for (cell, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { cell, value: v });
            }
            if kind == FieldKind::Weight && !(v >= WEIGHT_FLOOR) {
                return Err(Error::BadWeight { cell, value: v });
            }
        }
        Ok(CellField { mesh, values, kind })
    }

    pub fn constant(mesh: Arc<CellMesh>, c: f64, kind: FieldKind) -> Result<Self> {
        let n = mesh.n_cells();
        CellField::new(mesh, vec![c; n], kind)
    }

    pub fn from_cells(mesh: Arc<CellMesh>, kind: FieldKind, f: impl Fn(usize) -> f64) -> Result<Self> {
        let values = (0..mesh.n_cells()).map(f).collect();
        CellField::new(mesh, values, kind)
    }

    pub fn depth(&self) -> u32 {
        self.mesh.depth()
    }

    /// `value × area` per cell.
    pub fn masses(&self) -> Vec<f64> {
        self.values.iter().zip(self.mesh.areas()).map(|(v, a)| v * a).collect()
    }

    pub fn value_at(&self, z: Complex64) -> f64 {
        self.mesh.locate(z).map_or(0.0, |c| self.values[c])
    }

    pub fn map(&self, kind: FieldKind, f: impl Fn(f64) -> f64) -> Result<Self> {
        CellField::new(self.mesh.clone(), self.values.iter().map(|&v| f(v)).collect(), kind)
    }

    pub fn zip(&self, other: &CellField, kind: FieldKind, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_mesh(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        CellField::new(self.mesh.clone(), values, kind)
    }

    pub fn same_mesh(&self, other: &CellField) -> Result<()> {
        if !Arc::ptr_eq(&self.mesh, &other.mesh) && self.mesh.depth() != other.mesh.depth() {
            return arg("fields live on different meshes");
        }
        Ok(())
    }

    pub fn integrate(&self, region: Region) -> Result<f64> {
        let m = &self.mesh;
        let pick: Box<dyn Fn(usize) -> bool> = match region {
            Region::Disc => Box::new(|_| true),
            Region::Box(i) => {
                m.check_resolvable(i.level)?;
                Box::new(move |c| m.in_box(c, &i))
            }
            Region::TopHalf(i) => {
                m.check_resolvable(i.level + 1)?;
                Box::new(move |c| m.in_top_half(c, &i))
            }
        };
        Ok((0..m.n_cells()).filter(|&c| pick(c)).map(|c| self.values[c] * m.areas()[c]).sum())
    }

    /// Plain pairing `∫ self · other dA`.
    pub fn dot(&self, other: &CellField) -> f64 {
        self.values.iter().zip(&other.values).zip(self.mesh.areas()).map(|((a, b), w)| a * b * w).sum()
    }

    /// CSV rows `cell,theta0,theta1,r0,r1,value` with angles in radians.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "cell,theta0,theta1,r0,r1,value")?;
        for c in 0..self.mesh.n_cells() {
            let (r0, r1, t0, t1) = self.mesh.bounds(c);
            writeln!(out, "{c},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", t0 * TAU, t1 * TAU, r0, r1, self.values[c])?;
        }
        Ok(())
    }
}

/// Average of `f` over a `q × q` midpoint grid in `(r², θ)` inside each cell.
pub fn sample_field<F>(f: F, mesh: &Arc<CellMesh>, q: usize, kind: FieldKind) -> Result<CellField>
where
    F: Fn(Complex64) -> f64 + Sync,
{
    if q == 0 {
        return arg("quadrature order must be positive");
    }
    let values: Vec<f64> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let mut acc = 0.0;
            for z in mesh.cell_nodes(c, q) {
                let v = f(z);
                if !v.is_finite() {
                    return Err(Error::NonFinite { cell: c, value: v });
                }
                acc += v;
            }
            Ok(acc / (q * q) as f64)
        })
        .collect::<Result<_>>()?;
    CellField::new(mesh.clone(), values, kind)
}

/// `Δw`: on each top half `T_I` of grid `shift` with level `<= n` the `w`-average over `T_I`;
/// the cells below level `n + 1` keep their values.
pub fn coarsen(w: &CellField, shift: Shift, n: u32) -> Result<CellField> {
    let m = &w.mesh;
    m.check_resolvable(n + 1)?;
    let wt = m.top_half_sums(&w.masses(), shift);
    let at = m.top_half_sums(m.areas(), shift);
    let values = (0..m.n_cells())
        .map(|c| {
            let b = m.band(c);
            if b <= n as usize {
                let k = m.sector_index(shift, b as u32, m.sector(c)) as usize;
                wt[b][k] / at[b][k]
            } else {
                w.values[c]
            }
        })
        .collect();
    CellField::new(m.clone(), values, w.kind)
}
