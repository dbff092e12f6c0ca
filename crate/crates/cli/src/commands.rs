use rayon::prelude::*;
use serde::Serialize;

use bergmanlab::bekolle::{b_infinity, bekolle_bp, d_od_decomposition, power_weight, sharp_sweep, sparse_sum_ratio, SharpRow};
use bergmanlab::dyadic::{build_grid, DyadicInterval, Shift};
use bergmanlab::field::CellMesh;
use bergmanlab::kernel::{comparability_report, identity_sweep};
use bergmanlab::report::{csv_f64, to_json, Table};
use bergmanlab::sarason::{
    b_fg, circle_cell_masses, gamma, ourex_bound_check, test_conditions_4_from_masses, toeplitz_product_matrix,
    AnalyticSymbol, ConditionFour, GammaReport, Lattice, OurexReport, SarasonSample,
};
use bergmanlab::stegenga::{
    build_poles, condition_k_check, counterexample_pipeline, kstep_check, tau_bound, tau_value, CantorSet,
    ConditionK, PipelineConfig, PipelineReport, MAX_FAMILY,
};
use bergmanlab::two_weight::{random_instance, random_weight, verify_theorem};
use bergmanlab::{Error, Result};

use crate::{Command, Common, Format, Outcome, RunConfig};

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config: &'a RunConfig,
    passed: bool,
    result: T,
}

impl Common {
    fn config(&self, command: &'static str, depth: Option<u32>, mesh_depth: Option<u32>, tol: Option<f64>) -> RunConfig {
        RunConfig {
            command,
            depth,
            mesh_depth,
            quad_order: None,
            tol,
            seed: self.seed,
            format: match self.format {
                Format::Json => "json",
                Format::Csv => "csv",
            },
        }
    }
}

fn finish<T: Serialize>(cfg: &RunConfig, passed: bool, result: T, mut table: Table) -> Result<Outcome> {
    let json = to_json(&Envelope { config: cfg, passed, result }).map_err(|e| Error::Argument(format!("serialization failed: {e}")))?;
    table.header.push("seed".into());
    for row in &mut table.rows {
        row.push(cfg.seed.to_string());
    }
    Ok(Outcome { passed, json, csv: table.to_csv() })
}

/// Seed of trial `t` in a run seeded with `seed`.
pub fn trial_seed(seed: u64, t: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(t as u64)
}

pub fn run(cmd: &Command, c: &Common) -> Result<Outcome> {
    match cmd {
        Command::Grids { beta } => grids(c, *beta),
        Command::KernelCompare { samples } => kernel_compare(c, *samples),
        Command::KernelIdentities { samples } => kernel_identities(c, *samples),
        Command::TwoWeightVerify { trials } => two_weight_verify(c, *trials),
        Command::Bekolle { trials, alphas } => bekolle(c, *trials, alphas),
        Command::SharpSweep { alphas } => sharp(c, alphas),
        Command::SarasonPair { f, g, m, levels, angles } => sarason_pair(c, f, g, *m, *levels, *angles),
        Command::StegengaSet { nmax, trials } => stegenga_set(c, *nmax, *trials),
        Command::Counterexample { nmax, resolution, levels, angles, degree } => {
            counterexample(c, *nmax, *resolution, Lattice::new(*levels, *angles)?, *degree)
        }
    }
}

#[derive(Serialize)]
struct IntervalRecord {
    beta: String,
    level: u32,
    index: u64,
    start: f64,
    len: f64,
}

fn grids(c: &Common, beta: Option<Shift>) -> Result<Outcome> {
    let depth = c.depth.unwrap_or(3);
    let cfg = c.config("grids", Some(depth), None, None);
    let shifts = beta.map_or(Shift::BOTH.to_vec(), |b| vec![b]);
    let mut records = Vec::new();
    let mut passed = true;
    for s in shifts {
        let grid = build_grid(s, depth)?;
        passed &= grid.len() as u64 == (2u64 << depth) - 1;
        for level in 0..=depth {
            let total: f64 = grid.iter().filter(|i| i.level == level).map(DyadicInterval::len).sum();
            passed &= total == 1.0;
        }
        records.extend(grid.iter().map(|i| IntervalRecord {
            beta: s.to_string(),
            level: i.level,
            index: i.index,
            start: i.start(),
            len: i.len(),
        }));
    }
    let mut t = Table::new(&["beta", "level", "index", "start", "len"]);
    for r in &records {
        t.push(vec![r.beta.clone(), r.level.to_string(), r.index.to_string(), csv_f64(r.start), csv_f64(r.len)]);
    }
    finish(&cfg, passed, &records, t)
}

fn kernel_compare(c: &Common, samples: usize) -> Result<Outcome> {
    let depth = c.depth.unwrap_or(12);
    let cfg = c.config("kernel-compare", Some(depth), None, None);
    let rep = comparability_report(samples, depth, c.seed)?;
    let passed = rep.grids.iter().all(|g| g.lower_violations == 0) && rep.sup_ratio_upper.is_finite();
    let mut t = Table::new(&["beta", "samples", "depth", "inf_k_over_kbeta", "lower_violations", "sup_ratio_upper"]);
    for g in &rep.grids {
        t.push(vec![
            g.beta.to_string(),
            samples.to_string(),
            depth.to_string(),
            csv_f64(g.inf_k_over_kbeta),
            g.lower_violations.to_string(),
            csv_f64(rep.sup_ratio_upper),
        ]);
    }
    finish(&cfg, passed, &rep, t)
}

fn kernel_identities(c: &Common, samples: usize) -> Result<Outcome> {
    let cfg = c.config("kernel-identities", None, None, None);
    let rep = identity_sweep(samples, c.seed)?;
    let mut t = Table::new(&["samples", "max_residual"]);
    t.push(vec![samples.to_string(), csv_f64(rep.max_residual)]);
    finish(&cfg, rep.max_residual <= 1e-10, rep, t)
}

#[derive(Serialize)]
struct TrialRecord {
    trial: usize,
    instance_seed: u64,
    depth: u32,
    beta: String,
    #[serde(rename = "C0")]
    c0: f64,
    #[serde(rename = "C0star")]
    c0_star: f64,
    norm: f64,
    c: f64,
    necessity: bool,
}

fn two_weight_verify(c: &Common, trials: usize) -> Result<Outcome> {
    let depth = c.depth.unwrap_or(3);
    let cfg = c.config("two-weight-verify", Some(depth), None, None);
    let records: Vec<TrialRecord> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(c.seed, t);
            let inst = random_instance(seed, depth)?;
            let rep = verify_theorem(&inst.spec, &inst.w, &inst.sigma, 2.0)?;
            Ok(TrialRecord {
                trial: t,
                instance_seed: seed,
                depth: inst.depth,
                beta: inst.spec.shift.to_string(),
                c0: rep.c0,
                c0_star: rep.c0_star,
                norm: rep.norm,
                c: rep.c_measured,
                necessity: rep.necessity,
            })
        })
        .collect::<Result<_>>()?;
    let passed = records.iter().all(|r| r.necessity);
    let mut t = Table::new(&["trial", "instance_seed", "depth", "beta", "C0", "C0star", "norm", "c", "necessity"]);
    for r in &records {
        t.push(vec![
            r.trial.to_string(),
            r.instance_seed.to_string(),
            r.depth.to_string(),
            r.beta.clone(),
            csv_f64(r.c0),
            csv_f64(r.c0_star),
            csv_f64(r.norm),
            csv_f64(r.c),
            r.necessity.to_string(),
        ]);
    }
    finish(&cfg, passed, &records, t)
}

#[derive(Serialize)]
struct WeightRecord {
    weight: String,
    #[serde(rename = "B2")]
    b2: f64,
    #[serde(rename = "Binf")]
    binf: f64,
    binf_le_b2: bool,
    /// Largest sparse-sum ratio over the two grid roots, `K = I` included.
    sparse_ratio: f64,
    strict_ratio: f64,
}

fn bekolle(c: &Common, trials: usize, alphas: &[f64]) -> Result<Outcome> {
    let mesh_depth = c.mesh_depth.unwrap_or(8);
    let depth = c.depth.unwrap_or(6);
    let cfg = c.config("bekolle", Some(depth), Some(mesh_depth), None);
    let mesh = CellMesh::build(mesh_depth)?;
    let mut weights = Vec::new();
    for t in 0..trials {
        let seed = trial_seed(c.seed, t);
        weights.push((format!("random:{seed}"), random_weight(&mesh, 3.0, seed)?));
    }
    for &a in alphas {
        weights.push((format!("power:{a}"), power_weight(&mesh, a)?));
    }
    let records: Vec<WeightRecord> = weights
        .into_iter()
        .map(|(name, w)| {
            let b2 = bekolle_bp(&w, 2.0, depth)?.value;
            let binf = b_infinity(&w, depth)?.value;
            let mut sparse_ratio = 0.0f64;
            let mut strict_ratio = 0.0f64;
            for s in Shift::BOTH {
                let r = sparse_sum_ratio(&w, &DyadicInterval::root(s), depth, binf)?;
                sparse_ratio = sparse_ratio.max(r.ratio);
                strict_ratio = strict_ratio.max(r.strict_ratio);
            }
            Ok(WeightRecord { weight: name, b2, binf, binf_le_b2: binf <= b2 * (1.0 + 1e-12), sparse_ratio, strict_ratio })
        })
        .collect::<Result<_>>()?;
    let passed = records.iter().all(|r| r.binf_le_b2 && r.sparse_ratio <= 2.0);
    let mut t = Table::new(&["weight", "B2", "Binf", "binf_le_b2", "sparse_ratio", "strict_ratio"]);
    for r in &records {
        t.push(vec![
            r.weight.clone(),
            csv_f64(r.b2),
            csv_f64(r.binf),
            r.binf_le_b2.to_string(),
            csv_f64(r.sparse_ratio),
            csv_f64(r.strict_ratio),
        ]);
    }
    finish(&cfg, passed, &records, t)
}

#[derive(Serialize)]
struct SharpRecord {
    #[serde(flatten)]
    row: SharpRow,
    /// Relative residual of the diagonal/off-diagonal split at the roots.
    split_residual: f64,
}

#[derive(Serialize)]
struct SharpResult {
    rows: Vec<SharpRecord>,
    ratio_spread: f64,
}

fn sharp(c: &Common, alphas: &[f64]) -> Result<Outcome> {
    let depth = c.depth.unwrap_or(8);
    let cfg = c.config("sharp-sweep", Some(depth), Some(depth), None);
    let rows = sharp_sweep(alphas, depth)?;
    let mesh = CellMesh::build(depth)?;
    let mut records = Vec::with_capacity(rows.len());
    for row in rows {
        let w = power_weight(&mesh, row.alpha)?;
        let mut split_residual = 0.0f64;
        for s in Shift::BOTH {
            split_residual = split_residual.max(d_od_decomposition(&w, &DyadicInterval::root(s), depth)?.residual);
        }
        records.push(SharpRecord { row, split_residual });
    }
    let hi = records.iter().map(|r| r.row.ratio).fold(f64::NEG_INFINITY, f64::max);
    let lo = records.iter().map(|r| r.row.ratio).fold(f64::INFINITY, f64::min);
    let ratio_spread = hi / lo;
    let passed = ratio_spread <= 50.0 && records.iter().all(|r| r.split_residual <= 1e-9);
    let mut t = Table::new(&["alpha", "depth", "norm", "B2", "Binf_w", "Binf_winv", "ratio", "split_residual"]);
    for r in &records {
        let s = &r.row;
        t.push(vec![
            csv_f64(s.alpha),
            s.depth.to_string(),
            csv_f64(s.norm),
            csv_f64(s.b2),
            csv_f64(s.binf_w),
            csv_f64(s.binf_winv),
            csv_f64(s.ratio),
            csv_f64(r.split_residual),
        ]);
    }
    finish(&cfg, passed, SharpResult { rows: records, ratio_spread }, t)
}

fn parse_symbol(label: &str, spec: &str) -> Result<AnalyticSymbol> {
    if spec.trim() == "quarter-pole" {
        return Ok(AnalyticSymbol::quarter_pole());
    }
    let coeffs = spec
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Argument(format!("symbol {label}: {t:?}: {e}"))))
        .collect::<Result<Vec<f64>>>()?;
    Ok(AnalyticSymbol::real_polynomial(label, &coeffs))
}

#[derive(Serialize)]
struct ToeplitzRecord {
    m: usize,
    norm: f64,
    norm_previous: f64,
    monotone: bool,
}

#[derive(Serialize)]
struct PairResult {
    f: String,
    g: String,
    lattice: Lattice,
    b_fg: SarasonSample,
    b_gf: SarasonSample,
    symmetric: bool,
    toeplitz: Option<ToeplitzRecord>,
    condition_four: ConditionFour,
    gamma_f: GammaReport,
    ourex: OurexReport,
}

fn sarason_pair(c: &Common, fs: &str, gs: &str, m: usize, levels: u32, angles: usize) -> Result<Outcome> {
    let depth = c.depth.unwrap_or(6);
    let mesh_depth = c.mesh_depth.unwrap_or(8);
    let tol = c.tol.unwrap_or(1e-6);
    let q = c.quad_order.unwrap_or(8);
    let mut cfg = c.config("sarason-pair", Some(depth), Some(mesh_depth), Some(tol));
    cfg.quad_order = Some(q);
    let f = parse_symbol("f", fs)?;
    let g = parse_symbol("g", gs)?;
    let lattice = Lattice::new(levels, angles)?;
    let bfg = b_fg(&f, &g, &lattice, tol)?;
    let bgf = b_fg(&g, &f, &lattice, tol)?;
    let symmetric = bfg.value == bgf.value;
    let toeplitz = match (f.coefficients(), g.coefficients()) {
        (Some(_), Some(_)) if m >= 2 => {
            let norm = toeplitz_product_matrix(&f, &g, m)?.norm;
            let norm_previous = toeplitz_product_matrix(&f, &g, m - 1)?.norm;
            Some(ToeplitzRecord { m, norm, norm_previous, monotone: norm >= norm_previous * (1.0 - 1e-12) })
        }
        _ => None,
    };
    let mesh = CellMesh::build(mesh_depth)?;
    let mf = circle_cell_masses(&f, &mesh, q);
    let mg = circle_cell_masses(&g, &mesh, q);
    let condition_four = test_conditions_4_from_masses(&mesh, &mf, &mg, depth)?;
    let gamma_f = gamma(&f, depth, tol)?;
    let ourex = ourex_bound_check(&f, &g, &lattice, depth, tol)?;
    let passed = symmetric
        && toeplitz.as_ref().is_none_or(|t| t.monotone)
        && [bfg.value, condition_four.c0a, condition_four.c0b, gamma_f.gamma, ourex.ratio].iter().all(|v| v.is_finite());
    let mut t = Table::new(&["f", "g", "b_fg", "toeplitz_norm", "C0a", "C0b", "gamma_f", "ourex_ratio"]);
    t.push(vec![
        format!("\"{fs}\""),
        format!("\"{gs}\""),
        csv_f64(bfg.value),
        toeplitz.as_ref().map_or(String::new(), |t| csv_f64(t.norm)),
        csv_f64(condition_four.c0a),
        csv_f64(condition_four.c0b),
        csv_f64(gamma_f.gamma),
        csv_f64(ourex.ratio),
    ]);
    let result = PairResult {
        f: fs.to_string(),
        g: gs.to_string(),
        lattice,
        b_fg: bfg,
        b_gf: bgf,
        symmetric,
        toeplitz,
        condition_four,
        gamma_f,
        ourex,
    };
    finish(&cfg, passed, result, t)
}

#[derive(Serialize)]
struct GenerationRecord {
    n: u32,
    points: usize,
    min_gap: String,
    tau: String,
    tau_within_bound: bool,
    kstep_min: Option<String>,
    kstep_bound: Option<String>,
    kstep_holds: Option<bool>,
    poles_admissible: Option<bool>,
}

#[derive(Serialize)]
struct SetResult {
    generation: u32,
    tau_bound: String,
    lambdas: Vec<String>,
    scales: Vec<String>,
    points: Vec<String>,
    generations: Vec<GenerationRecord>,
    condition_k: ConditionK,
}

fn stegenga_set(c: &Common, nmax: u32, trials: usize) -> Result<Outcome> {
    let cfg = c.config("stegenga-set", None, None, None);
    let set = CantorSet::new(nmax)?;
    let bound = tau_bound();
    let mut generations = Vec::new();
    for n in 0..=nmax {
        let gen = CantorSet::new(n)?;
        let tau = tau_value(n);
        let ks = if n <= 8 { Some(kstep_check(n)?) } else { None };
        let poles_admissible = if n <= MAX_FAMILY { Some(build_poles(n)?.admissible()) } else { None };
        generations.push(GenerationRecord {
            n,
            points: gen.points.len(),
            min_gap: gen.min_gap().to_string(),
            tau_within_bound: tau <= bound,
            tau: tau.to_string(),
            kstep_min: ks.as_ref().map(|k| k.min_ratio.to_string()),
            kstep_bound: ks.as_ref().map(|k| k.bound.to_string()),
            kstep_holds: ks.map(|k| k.holds),
            poles_admissible,
        });
    }
    let condition_k = condition_k_check(nmax, trials, c.seed)?;
    let passed = generations
        .iter()
        .all(|g| g.tau_within_bound && g.kstep_holds != Some(false) && g.poles_admissible != Some(false));
    let opt = |s: &Option<String>| s.clone().unwrap_or_default();
    let mut t = Table::new(&[
        "n",
        "points",
        "min_gap",
        "tau",
        "tau_within_bound",
        "kstep_min",
        "kstep_bound",
        "kstep_holds",
        "poles_admissible",
    ]);
    for g in &generations {
        t.push(vec![
            g.n.to_string(),
            g.points.to_string(),
            g.min_gap.clone(),
            g.tau.clone(),
            g.tau_within_bound.to_string(),
            opt(&g.kstep_min),
            opt(&g.kstep_bound),
            g.kstep_holds.map_or(String::new(), |b| b.to_string()),
            g.poles_admissible.map_or(String::new(), |b| b.to_string()),
        ]);
    }
    let result = SetResult {
        generation: nmax,
        tau_bound: bound.to_string(),
        lambdas: set.lambdas.iter().map(ToString::to_string).collect(),
        scales: set.scales.iter().map(ToString::to_string).collect(),
        points: set.points.iter().map(ToString::to_string).collect(),
        generations,
        condition_k,
    };
    finish(&cfg, passed, result, t)
}

#[derive(Serialize)]
struct CounterexampleResult {
    #[serde(flatten)]
    report: PipelineReport,
    signature: bergmanlab::stegenga::Signature,
}

fn counterexample(c: &Common, nmax: u32, resolution: u32, lattice: Lattice, degree: usize) -> Result<Outcome> {
    let defaults = PipelineConfig::default();
    let pc = PipelineConfig {
        n_max: nmax,
        resolution,
        mesh_depth: c.mesh_depth.unwrap_or(defaults.mesh_depth),
        depth: c.depth.unwrap_or(defaults.depth),
        lattice,
        degree,
        tol: c.tol.unwrap_or(defaults.tol),
    };
    let cfg = c.config("counterexample", Some(pc.depth), Some(pc.mesh_depth), Some(pc.tol));
    let report = counterexample_pipeline(&pc)?;
    let signature = report.signature();
    let finite = report
        .rows
        .iter()
        .all(|r| [r.gamma, r.delta_lower, r.b_fg, r.c0a, r.c0b, r.ourex_ratio].iter().all(|v| v.is_finite()));
    let passed = finite && report.lowbg.min_ratio > 0.0 && signature.holds();
    let header: Vec<&str> = PipelineReport::CSV_HEADER.split(',').collect();
    let mut t = Table::new(&header);
    for r in &report.rows {
        t.push(vec![
            r.n.to_string(),
            csv_f64(r.gamma),
            csv_f64(r.delta_lower),
            csv_f64(r.b_fg),
            csv_f64(r.c0a),
            csv_f64(r.c0b),
            csv_f64(r.ourex_ratio),
        ]);
    }
    finish(&cfg, passed, CounterexampleResult { report, signature }, t)
}
