//! The Cantor set `E₁`, the functions `f_n`, the outer symbol `g` and the counterexample
//! pipeline.

mod cantor;
mod family;
mod outer;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use cantor::{
    condition_k_check, generation_for_resolution, generation_points, kstep_check, kstep_constant, lambda_seq,
    log2_inv_p, p, porosity_ratio, tau_bound, tau_value, CantorSet, ConditionK, DyadicRational, KStep,
    MAX_GENERATION,
};
pub use family::{boundary_angle, build_poles, phi, phi_inv, phi_prime, StegengaFamily, MAX_FAMILY};
pub use outer::{cantor_symbol, chord, lowbg_check, outer_function, outer_product, LowerBound, ZeroSet};

use crate::error::{arg, Result};
use crate::field::CellMesh;
use crate::sarason::{
    b_fg_from_tables, berezin_table, delta_lower, gamma, pair_points, product_sup_sq, symbol_cell_masses,
    test_conditions_4_from_masses, DeltaBudget, Lattice, OurexReport,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub n_max: u32,
    /// Resolution exponent `M` of the outer function (`2^M` trapezoid nodes).
    pub resolution: u32,
    pub mesh_depth: u32,
    /// Level bound for the condition-(4) intervals.
    pub depth: u32,
    pub lattice: Lattice,
    /// Polynomial degree in the `δ` search space.
    pub degree: usize,
    pub tol: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n_max: 4,
            resolution: 13,
            mesh_depth: 10,
            depth: 8,
            lattice: Lattice { levels: 10, angles: 4 },
            degree: 8,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRow {
    pub n: u32,
    pub f_norm_sq: f64,
    pub gamma: f64,
    pub delta_lower: f64,
    pub delta_verified: bool,
    pub b_fg: f64,
    pub c0a: f64,
    pub c0b: f64,
    pub ourex_ratio: f64,
    pub fg_sup_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config: PipelineConfig,
    pub zero_set_generation: u32,
    pub lowbg: LowerBound,
    pub rows: Vec<PipelineRow>,
}

impl PipelineReport {
    pub const CSV_HEADER: &'static str = "n,gamma,delta_lower,b_fg,C0a,C0b,ourex_ratio";
}

/// Rings `1 - 2^-k` for the logarithmic test functions of `f_n`: all `k <= 8` and a few
/// around each scale `p_m`, `m <= n`.
pub fn delta_rings(n: u32) -> Vec<u32> {
    let mut rings: Vec<u32> = (1..=8).collect();
    for m in 2..=n {
        let k = log2_inv_p(m) as u32;
        rings.extend((k.saturating_sub(2)..=k + 1).filter(|&r| r >= 1));
    }
    rings.sort_unstable();
    rings.dedup();
    rings
}

/// `γ` depth for `f_n`: two levels past the pole scale.
pub fn gamma_depth(n: u32) -> u32 {
    log2_inv_p(n) as u32 + 2
}

pub fn pipeline_row(
    fam: &StegengaFamily,
    g: &crate::sarason::AnalyticSymbol,
    mesh: &Arc<CellMesh>,
    mass_g: &[f64],
    cfg: &PipelineConfig,
) -> Result<PipelineRow> {
    let f = fam.symbol();
    let points = pair_points(&f, g, &cfg.lattice);
    let bf = berezin_table(&f, &points, cfg.tol)?;
    let bg = berezin_table(g, &points, cfg.tol)?;
    let b = b_fg_from_tables(&points, &bf, &bg);
    let gm = gamma(&f, gamma_depth(fam.n), cfg.tol)?;
    let budget = DeltaBudget::aimed(cfg.degree, delta_rings(fam.n), fam.angles());
    let dl = delta_lower(&f, &budget)?;
    let mass_f = symbol_cell_masses(&f, mesh, cfg.tol)?;
    let c4 = test_conditions_4_from_masses(mesh, &mass_f, mass_g, cfg.depth)?;
    let f_norm_sq = fam.norm_sq();
    let fg = product_sup_sq(&f, g, &points);
    let ourex = OurexReport::new(b.value, f_norm_sq, fg, gm.gamma * gm.gamma);
    Ok(PipelineRow {
        n: fam.n,
        f_norm_sq,
        gamma: gm.gamma,
        delta_lower: dl.value,
        delta_verified: dl.verified,
        b_fg: b.value,
        c0a: c4.c0a,
        c0b: c4.c0b,
        ourex_ratio: ourex.ratio,
        fg_sup_sq: fg,
    })
}

/// Rows `n = 1..=n_max` of the counterexample table against the fixed symbol `g`.
pub fn counterexample_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    if !(1..=MAX_FAMILY).contains(&cfg.n_max) {
        return arg(format!("n_max must lie in 1..={MAX_FAMILY}"));
    }
    let (g, zeros) = cantor_symbol(cfg.resolution)?;
    let mesh = CellMesh::build(cfg.mesh_depth)?;
    let mass_g = symbol_cell_masses(&g, &mesh, cfg.tol)?;
    let mut hints = g.hints().to_vec();
    for n in 1..=cfg.n_max {
        hints.extend(build_poles(n)?.hints());
    }
    let probe = cfg.lattice.points(&hints);
    let lowbg = lowbg_check(&g, &probe);
    let rows = (1..=cfg.n_max)
        .map(|n| pipeline_row(&build_poles(n)?, &g, &mesh, &mass_g, cfg))
        .collect::<Result<_>>()?;
    Ok(PipelineReport { config: cfg.clone(), zero_set_generation: zeros.generation, lowbg, rows })
}

/// Spread and growth of the table columns across `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    /// `max_n b / min_n b`.
    pub b_spread: f64,
    pub gamma_spread: f64,
    /// Last row over first row.
    pub delta_growth: f64,
    pub c0a_growth: f64,
    pub delta_increasing: bool,
    pub c0a_increasing: bool,
}

impl Signature {
    /// Bounded `b` and `γ` (spreads within 10 and 3) against strictly increasing `δ` and
    /// `C₀ᵃ` that grow by at least 1.5.
    pub fn holds(&self) -> bool {
        self.b_spread <= 10.0
            && self.gamma_spread <= 3.0
            && self.delta_increasing
            && self.c0a_increasing
            && self.delta_growth >= 1.5
            && self.c0a_growth >= 1.5
    }
}

fn spread(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let hi = v.clone().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.fold(f64::INFINITY, f64::min);
    hi / lo
}

fn increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

impl PipelineReport {
    pub fn signature(&self) -> Signature {
        let rows = &self.rows;
        let delta: Vec<f64> = rows.iter().map(|r| r.delta_lower).collect();
        let c0a: Vec<f64> = rows.iter().map(|r| r.c0a).collect();
        let growth = |v: &[f64]| match (v.first(), v.last()) {
            (Some(a), Some(b)) => b / a,
            _ => f64::NAN,
        };
        Signature {
            b_spread: spread(rows.iter().map(|r| r.b_fg)),
            gamma_spread: spread(rows.iter().map(|r| r.gamma)),
            delta_growth: growth(&delta),
            c0a_growth: growth(&c0a),
            delta_increasing: increasing(&delta),
            c0a_increasing: increasing(&c0a),
        }
    }
}
