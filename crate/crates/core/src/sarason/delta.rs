//! Certified lower bounds for `δ(f) = sup_{‖u‖_D ≤ 1} ‖f u‖₂`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalyticSymbol;
use crate::error::{arg, Error, Result};
use crate::quadrature::{disc_partition, integrate, integrate_with_nodes, Hint, Options};

/// Relative eigenvalue cutoff when inverting the Dirichlet Gram matrix.
const GRAM_CUTOFF: f64 = 1e-12;

/// Search space for [`delta_lower`]: polynomials of degree `<= degree` together with the
/// normalized logarithms `u_a` for `a` on the rings `1 - 2^-k`, `k ∈ rings`, above the
/// angles `aims` (radians).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaBudget {
    pub degree: usize,
    pub rings: Vec<u32>,
    pub aims: Vec<f64>,
    pub tol: f64,
}

impl DeltaBudget {
    pub fn polynomial(degree: usize) -> Self {
        DeltaBudget { degree, rings: Vec::new(), aims: Vec::new(), tol: 1e-7 }
    }

    pub fn aimed(degree: usize, rings: Vec<u32>, aims: Vec<f64>) -> Self {
        DeltaBudget { degree, rings, aims, tol: 1e-6 }
    }

    /// Centres `a` of the logarithmic test functions. On ring `k` aims closer than `2^-k`
    /// are merged.
    pub fn centres(&self) -> Vec<Complex64> {
        let mut aims = self.aims.clone();
        aims.sort_by(f64::total_cmp);
        let mut out = Vec::new();
        for &k in &self.rings {
            let s = (-(k as f64)).exp2();
            let mut last = f64::NEG_INFINITY;
            for &t in &aims {
                if t - last >= s {
                    out.push(Complex64::from_polar(1.0 - s, t));
                    last = t;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaLower {
    /// `‖f u‖₂ / ‖u‖_D` for the maximizing `u`, with `‖f u‖₂` from independent quadrature.
    pub value: f64,
    /// The same quotient from the Gram matrices.
    pub rayleigh: f64,
    /// Whether the two agree within 1%.
    pub verified: bool,
    pub functions: usize,
    pub degree: usize,
    /// Coefficients of the maximizer `u = Σ c_i φ_i` in the order monomials, then logarithms.
    pub coefficients: Vec<[f64; 2]>,
    pub centres: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy)]
enum Basis {
    Mono(usize),
    Log { a: Complex64, norm: f64 },
}

impl Basis {
    fn log(a: Complex64) -> Self {
        Basis::Log { a, norm: (-(1.0 - a.norm_sqr()).ln()).sqrt() }
    }

    fn eval(&self, z: Complex64) -> Complex64 {
        match *self {
            Basis::Mono(j) => z.powu(j as u32),
            Basis::Log { a, norm } => -(Complex64::new(1.0, 0.0) - a.conj() * z).ln() / norm,
        }
    }
}

fn dirichlet_gram(basis: &[Basis]) -> DMatrix<Complex64> {
    let n = basis.len();
    DMatrix::from_fn(n, n, |i, k| match (basis[i], basis[k]) {
        (Basis::Mono(j), Basis::Mono(l)) => {
            let v = if j != l { 0.0 } else if j == 0 { 1.0 } else { j as f64 };
            Complex64::new(v, 0.0)
        }
        // ⟨z^j, u_a⟩_D = a^j/√L_a
        (Basis::Mono(j), Basis::Log { a, norm }) => {
            if j == 0 { Complex64::new(0.0, 0.0) } else { a.powu(j as u32) / norm }
        }
        (Basis::Log { a, norm }, Basis::Mono(j)) => {
            if j == 0 { Complex64::new(0.0, 0.0) } else { a.conj().powu(j as u32) / norm }
        }
        // ⟨u_a, u_b⟩_D = -log(1 - āb)/√(L_a L_b)
        (Basis::Log { a, norm: na }, Basis::Log { a: b, norm: nb }) => {
            -(Complex64::new(1.0, 0.0) - a.conj() * b).ln() / (na * nb)
        }
    })
}

/// `∫ f φ_i conj(f φ_k) dA` for monomials, exact from Taylor coefficients.
fn coefficient_gram(c: &[Complex64], degree: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(degree + 1, degree + 1, |i, k| {
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, ap) in c.iter().enumerate() {
            // i + p = k + q
            if i + p < k {
                continue;
            }
            if let Some(aq) = c.get(i + p - k) {
                acc += ap * aq.conj() / (i + p + 1) as f64;
            }
        }
        acc
    })
}

fn node_gram(basis: &[Basis], nodes: &[(Complex64, f64)], f: &AnalyticSymbol) -> DMatrix<Complex64> {
    let n = basis.len();
    const BLOCK: usize = 4096;
    let partial: Vec<(DMatrix<f64>, DMatrix<f64>)> = nodes
        .par_chunks(BLOCK)
        .map(|chunk| {
            let m = chunk.len();
            let mut re = DMatrix::<f64>::zeros(m, n);
            let mut im = DMatrix::<f64>::zeros(m, n);
            for (row, &(z, w)) in chunk.iter().enumerate() {
                let scale = w.sqrt() * f.eval(z).norm();
                for (col, b) in basis.iter().enumerate() {
                    let v = b.eval(z) * scale;
                    re[(row, col)] = v.re;
                    im[(row, col)] = v.im;
                }
            }
            // Uᴴ U = (AᵀA + BᵀB) + i(AᵀB - BᵀA) for U = A + iB
            let rr = re.tr_mul(&re) + im.tr_mul(&im);
            let ri = re.tr_mul(&im) - im.tr_mul(&re);
            (rr, ri)
        })
        .collect();
    let mut rr = DMatrix::<f64>::zeros(n, n);
    let mut ri = DMatrix::<f64>::zeros(n, n);
    for (a, b) in partial {
        rr += a;
        ri += b;
    }
    // entry (i, k) = ∫ φ_i conj(φ_k) |f|², the conjugate of (Uᴴ U)_{ik}
    DMatrix::from_fn(n, n, |i, k| Complex64::new(rr[(i, k)], -ri[(i, k)]))
}

fn feature_hints(f: &AnalyticSymbol, centres: &[Complex64]) -> Vec<Hint> {
    let mut h = f.hints().to_vec();
    h.extend(centres.iter().map(|a| Hint::boundary(a.arg(), 0.25 * (1.0 - a.norm()))));
    h
}

/// Lower bound for `δ(f)` by maximizing the Rayleigh quotient `‖f u‖² / ‖u‖²_D` over the
/// span of the budget's test functions, then re-measuring the maximizer by adaptive
/// quadrature.
pub fn delta_lower(f: &AnalyticSymbol, budget: &DeltaBudget) -> Result<DeltaLower> {
    if !(budget.tol > 0.0) {
        return arg("tolerance must be positive");
    }
    let centres = budget.centres();
    let mut basis: Vec<Basis> = (0..=budget.degree).map(Basis::Mono).collect();
    basis.extend(centres.iter().map(|&a| Basis::log(a)));
    let gd = dirichlet_gram(&basis);
    let gf = match f.coefficients() {
        Some(c) if centres.is_empty() => coefficient_gram(c, budget.degree),
        _ => {
            let deg = budget.degree as i32;
            let weight = |z: Complex64| f.eval(z).norm_sqr() * (1.0 + (deg + 1) as f64 * z.norm_sqr().powi(deg));
            let (_, nodes) = integrate_with_nodes(
                &weight,
                disc_partition(16),
                &feature_hints(f, &centres),
                &Options::tol(1e-300, budget.tol),
            )?;
            node_gram(&basis, &nodes, f)
        }
    };

    let eig = SymmetricEigen::new(gd.clone());
    let top = eig.eigenvalues.max();
    let kept: Vec<usize> = (0..basis.len()).filter(|&i| eig.eigenvalues[i] > GRAM_CUTOFF * top).collect();
    let s = DMatrix::from_fn(basis.len(), kept.len(), |r, c| {
        eig.eigenvectors[(r, kept[c])] / eig.eigenvalues[kept[c]].sqrt()
    });
    let t = s.adjoint() * &gf * &s;
    let t = (&t + t.adjoint()) * Complex64::new(0.5, 0.0);
    let inner = SymmetricEigen::new(t);
    let best = inner.eigenvalues.imax();
    let lambda = inner.eigenvalues[best].max(0.0);
    let x: DVector<Complex64> = &s * inner.eigenvectors.column(best);

    let dnorm = (x.adjoint() * &gd * &x)[(0, 0)].re;
    if !(dnorm > 0.0) {
        return Err(Error::Singular("Dirichlet norm of the maximizer vanished".into()));
    }
    let u = |z: Complex64| basis.iter().zip(x.iter()).map(|(b, c)| b.eval(z) * c.conj()).sum::<Complex64>();
    let fu = |z: Complex64| (f.eval(z) * u(z)).norm_sqr();
    let measured = integrate(&fu, disc_partition(16), &feature_hints(f, &centres), &Options::tol(1e-300, 1e-5))?.value;
    let ratio = measured / dnorm;
    Ok(DeltaLower {
        value: ratio.sqrt(),
        rayleigh: lambda.sqrt(),
        verified: lambda == 0.0 && ratio == 0.0 || (ratio / lambda - 1.0).abs() < 0.01,
        functions: basis.len(),
        degree: budget.degree,
        coefficients: x.iter().map(|c| [c.re, -c.im]).collect(),
        centres: centres.iter().map(|a| [a.re, a.im]).collect(),
    })
}
