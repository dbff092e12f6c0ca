//! Bergman-type kernels, the Berezin transform, the maximal projection and the dyadic
//! model kernels.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{minimal_containing_interval, Shift};
use crate::error::{arg, Result};
use crate::field::{CellField, FieldKind};
use crate::quadrature::{disc_partition, integrate, Hint, Options, Rect};

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

fn open_disc(z: Complex64) -> Result<()> {
    if !(z.norm() < 1.0) {
        return arg(format!("point {z} is not in the open unit disc"));
    }
    Ok(())
}

/// `1/|1 - z ζ̄|²`.
pub fn kernel(z: Complex64, zeta: Complex64) -> Result<f64> {
    open_disc(z)?;
    open_disc(zeta)?;
    Ok(1.0 / (ONE - z * zeta.conj()).norm_sqr())
}

/// Sum of `|I|^-2` over the boxes of grid `shift` containing both points.
///
/// The containing boxes are exactly the ancestors of the minimal one, so the sum is the
/// geometric series `Σ_{j ≤ L} 4^j`.
pub fn dyadic_kernel(z: Complex64, zeta: Complex64, shift: Shift) -> Result<f64> {
    let i = minimal_containing_interval(z, zeta, shift)?;
    Ok(((4f64).powi(i.level as i32 + 1) - 1.0) / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelPair {
    pub z: [f64; 2],
    pub zeta: [f64; 2],
    pub k: f64,
    pub k0: f64,
    pub k13: f64,
}

pub fn kernel_pair(z: Complex64, zeta: Complex64) -> Result<KernelPair> {
    Ok(KernelPair {
        z: [z.re, z.im],
        zeta: [zeta.re, zeta.im],
        k: kernel(z, zeta)?,
        k0: dyadic_kernel(z, zeta, Shift::Zero)?,
        k13: dyadic_kernel(z, zeta, Shift::Third)?,
    })
}

/// A nonnegative integrand on the disc together with the features an adaptive rule should
/// resolve.
pub trait Density: Sync {
    fn eval(&self, z: Complex64) -> f64;

    fn partition(&self) -> Vec<Rect> {
        disc_partition(8)
    }

    fn hints(&self) -> Vec<Hint> {
        Vec::new()
    }
}

impl Density for CellField {
    fn eval(&self, z: Complex64) -> f64 {
        self.value_at(z)
    }

    fn partition(&self) -> Vec<Rect> {
        (0..self.mesh.n_cells())
            .map(|c| {
                let (r0, r1, t0, t1) = self.mesh.bounds(c);
                Rect { s0: 1.0 - r1, s1: 1.0 - r0, t0: t0 * TAU, t1: t1 * TAU }
            })
            .collect()
    }
}

/// A closure density with optional hints.
pub struct FnDensity<F> {
    pub f: F,
    pub hints: Vec<Hint>,
}

impl<F: Fn(Complex64) -> f64 + Sync> FnDensity<F> {
    pub fn new(f: F) -> Self {
        FnDensity { f, hints: Vec::new() }
    }

    pub fn with_hints(f: F, hints: Vec<Hint>) -> Self {
        FnDensity { f, hints }
    }
}

impl<F: Fn(Complex64) -> f64 + Sync> Density for FnDensity<F> {
    fn eval(&self, z: Complex64) -> f64 {
        (self.f)(z)
    }

    fn hints(&self) -> Vec<Hint> {
        self.hints.clone()
    }
}

fn peak_hints(d: &dyn Density, z: Complex64) -> Vec<Hint> {
    let mut h = d.hints();
    let s = 1.0 - z.norm();
    if s < 0.5 {
        h.push(Hint::at(z, s / 4.0));
    }
    h
}

/// `∫ u(ζ)(1-|z|²)²/|1-ζ̄z|⁴ dA(ζ)`.
pub fn berezin(density: &dyn Density, z: Complex64, tol: f64) -> Result<f64> {
    open_disc(z)?;
    let w = (1.0 - z.norm_sqr()).powi(2);
    let f = |zeta: Complex64| {
        let d = (ONE - zeta.conj() * z).norm_sqr();
        density.eval(zeta) * w / (d * d)
    };
    Ok(integrate(&f, density.partition(), &peak_hints(density, z), &Options::tol(tol, tol))?.value)
}

/// `∫ u(ζ)/|1-ζ̄z|² dA(ζ)`.
pub fn apply_pplus(density: &dyn Density, z: Complex64, tol: f64) -> Result<f64> {
    open_disc(z)?;
    let f = |zeta: Complex64| density.eval(zeta) / (ONE - zeta.conj() * z).norm_sqr();
    Ok(integrate(&f, density.partition(), &peak_hints(density, z), &Options::tol(tol, tol))?.value)
}

/// `Σ_I ⟨u, 1_{Q_I}⟩ |I|^-2 1_{Q_I}` over the intervals of grid `shift` resolved by the mesh.
pub fn apply_pbeta(density: &CellField, shift: Shift) -> Result<CellField> {
    let m = &density.mesh;
    let sums = m.box_sums(&density.masses(), shift);
    let values = (0..m.n_cells())
        .map(|c| {
            let s = m.sector(c);
            (0..=m.band(c))
                .map(|j| sums[j][m.sector_index(shift, j as u32, s) as usize] * 4f64.powi(j as i32))
                .sum()
        })
        .collect();
    CellField::new(m.clone(), values, FieldKind::Density)
}

/// The constant claimed in the lower comparison `K >= (3/32) K^β`.
pub const LOWER_CONSTANT: f64 = 3.0 / 32.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEnvelope {
    pub beta: Shift,
    /// `sup K^β / K`.
    pub sup_ratio_lower: f64,
    /// `inf K / K^β`.
    pub inf_k_over_kbeta: f64,
    /// Pairs with `K < (3/32) K^β`.
    pub lower_violations: usize,
    pub worst_pair: KernelPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparabilityReport {
    pub samples: usize,
    pub seed: u64,
    pub depth: u32,
    pub grids: Vec<GridEnvelope>,
    /// `sup K / (K⁰ + K^{1/3})`.
    pub sup_ratio_upper: f64,
    pub worst_upper_pair: KernelPair,
}

/// Random pairs with `1 - |z| >= 2^{2-depth}`: radii log-uniform toward the boundary, and
/// half the partners placed at a random nearby scale so that every level is exercised.
pub fn sample_pairs(samples: usize, depth: u32, seed: u64) -> Result<Vec<(Complex64, Complex64)>> {
    if !(3..=20).contains(&depth) {
        return arg(format!("depth {depth} must lie in 3..=20"));
    }
    let span = (depth - 2) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        let sz = (-span * rng.gen::<f64>()).exp2();
        let tz = rng.gen::<f64>() * TAU;
        let z = Complex64::from_polar(1.0 - sz, tz);
        let zeta = if rng.gen::<bool>() {
            Complex64::from_polar(1.0 - (-span * rng.gen::<f64>()).exp2(), rng.gen::<f64>() * TAU)
        } else {
            let s = (sz * (rng.gen_range(-3.0..3.0f64)).exp2()).clamp((-span).exp2(), 1.0);
            let dt = sz * TAU * rng.gen_range(-4.0..4.0);
            Complex64::from_polar(1.0 - s, tz + dt)
        };
        out.push((z, zeta));
    }
    Ok(out)
}

pub fn comparability_report(samples: usize, depth: u32, seed: u64) -> Result<ComparabilityReport> {
    let pairs = sample_pairs(samples, depth, seed)?;
    let evaluated: Vec<KernelPair> = pairs.par_iter().map(|&(z, w)| kernel_pair(z, w)).collect::<Result<_>>()?;
    let grids = Shift::BOTH
        .iter()
        .map(|&beta| {
            let kb = |p: &KernelPair| if beta == Shift::Zero { p.k0 } else { p.k13 };
            let mut env = GridEnvelope {
                beta,
                sup_ratio_lower: 0.0,
                inf_k_over_kbeta: f64::INFINITY,
                lower_violations: 0,
                worst_pair: evaluated[0],
            };
            for p in &evaluated {
                let r = kb(p) / p.k;
                if r > env.sup_ratio_lower {
                    env.sup_ratio_lower = r;
                    env.inf_k_over_kbeta = 1.0 / r;
                    env.worst_pair = *p;
                }
                if p.k < LOWER_CONSTANT * kb(p) {
                    env.lower_violations += 1;
                }
            }
            env
        })
        .collect();
    let mut sup_upper = 0.0;
    let mut worst = evaluated[0];
    for p in &evaluated {
        let r = p.k / (p.k0 + p.k13);
        if r > sup_upper {
            sup_upper = r;
            worst = *p;
        }
    }
    Ok(ComparabilityReport { samples, seed, depth, grids, sup_ratio_upper: sup_upper, worst_upper_pair: worst })
}

/// Largest residual of the two kernel identities
/// `1/|1-w|² = -w/(1-w)² + (1-|w|²)/((1-w)|1-w|²)` and its real-part form, `w = ζ̄z`.
pub fn kernel_identity_check(z: Complex64, zeta: Complex64) -> Result<f64> {
    open_disc(z)?;
    open_disc(zeta)?;
    let w = zeta.conj() * z;
    let a = ONE - w;
    let a2 = a.norm_sqr();
    let lhs = 1.0 / a2;
    let t = 1.0 - (z * zeta).norm_sqr();
    let first = -w / (a * a) + t / (a * a2);
    let second = -(w / (a * a)).re + t / (2.0 * a2) + t * t / (2.0 * a2 * a2);
    let r1 = (first - lhs).norm() / lhs;
    let r2 = (second - lhs).abs() / lhs;
    Ok(r1.max(r2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub samples: usize,
    pub seed: u64,
    pub max_residual: f64,
}

/// Residual sweep over uniformly random pairs in the disc.
pub fn identity_sweep(samples: usize, seed: u64) -> Result<IdentityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || Complex64::from_polar(rng.gen::<f64>().sqrt() * (1.0 - 1e-12), rng.gen::<f64>() * TAU);
    let pairs: Vec<_> = (0..samples).map(|_| (draw(), draw())).collect();
    let res: Vec<f64> = pairs.par_iter().map(|&(z, w)| kernel_identity_check(z, w)).collect::<Result<_>>()?;
    let max_residual = res.into_iter().fold(0.0, f64::max);
    Ok(IdentityReport { samples, seed, max_residual })
}
