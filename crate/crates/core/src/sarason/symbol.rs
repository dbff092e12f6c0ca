use std::f64::consts::TAU;
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::quadrature::Hint;

/// `q(z) · exp(k · H(z))` where `H(z) = c₀ + 2 Σ_{m=1}^{L} c_m z^m / (1 - σ z^L)` is the
/// periodic trapezoid rule applied to a Herglotz integral with `L` nodes. With nodes at
/// `2πj/L` the coefficients are periodic (`σ = 1`); with nodes at `2π(j + 1/2)/L` they
/// satisfy `c_{m+L} = -c_m` (`σ = -1`).
///
/// The discrete kernel has poles at the nodes, so points with `|z| > 1 - 8/L` are evaluated
/// at radius `1 - 8/L` on the same ray.
#[derive(Debug, Clone)]
pub struct HerglotzProduct {
    /// Discrete Fourier coefficients `c_0 .. c_{L-1}` of the sampled boundary data.
    pub coeffs: Vec<Complex64>,
    pub sign: f64,
    pub power: f64,
    /// Polynomial prefactor `q`, lowest degree first.
    pub prefactor: Vec<Complex64>,
}

impl HerglotzProduct {
    pub fn nodes(&self) -> usize {
        self.coeffs.len()
    }

    /// Largest radius at which the series is evaluated.
    pub fn radius_cap(&self) -> f64 {
        1.0 - 8.0 / self.coeffs.len() as f64
    }

    fn coeff(&self, m: usize) -> Complex64 {
        let l = self.coeffs.len();
        if m == l { self.coeffs[0] * self.sign } else { self.coeffs[m % l] }
    }

    fn herglotz(&self, z: Complex64) -> Complex64 {
        let l = self.coeffs.len();
        let r = z.norm();
        // terms with r^m < 1e-18 are dropped
        let cut = if r < 1e-300 { 1 } else { ((-41.5 / r.ln()).ceil() as usize).clamp(1, l) };
        let mut acc = Complex64::new(0.0, 0.0);
        for m in (1..=cut).rev() {
            acc = (acc + self.coeff(m)) * z;
        }
        let zl = if cut < l { Complex64::new(0.0, 0.0) } else { z.powu(l as u32) * self.sign };
        self.coeffs[0] + acc * 2.0 / (Complex64::new(1.0, 0.0) - zl)
    }

    fn prefactor_at(&self, z: Complex64) -> Complex64 {
        self.prefactor.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let (r, cap) = (z.norm(), self.radius_cap());
        let z = if r > cap { z * (cap / r) } else { z };
        self.prefactor_at(z) * (self.herglotz(z) * self.power).exp()
    }

    /// Values at `r e^{2πik/n}`, `k < n`, by folding the series modulo `n` and one FFT.
    pub fn eval_circle(&self, r: f64, n: usize) -> Vec<Complex64> {
        let r = r.min(self.radius_cap());
        let l = self.coeffs.len();
        let mut folded = vec![Complex64::new(0.0, 0.0); n];
        let mut rm = 1.0;
        for m in 1..=l {
            rm *= r;
            if rm < 1e-18 {
                break;
            }
            folded[m % n] += self.coeff(m) * rm;
        }
        let mut planner = FftPlanner::new();
        // the inverse transform computes Σ_m a_m e^{+2πimk/n}
        planner.plan_fft_inverse(n).process(&mut folded);
        let rl = r.powi(l as i32) * self.sign;
        (0..n)
            .map(|k| {
                let z = Complex64::from_polar(r, TAU * k as f64 / n as f64);
                let zl = Complex64::from_polar(rl, TAU * ((k * l) % n) as f64 / n as f64);
                let h = self.coeffs[0] + folded[k] * 2.0 / (Complex64::new(1.0, 0.0) - zl);
                self.prefactor_at(z) * (h * self.power).exp()
            })
            .collect()
    }
}

/// `log |q exp(kH)|²` tabulated on rings `1 - 2^-t`, `t` equally spaced up to the radius cap,
/// with about ten samples per `1 - r` of arc on each ring. Read by bicubic interpolation in
/// `(t, θ)`.
#[derive(Debug)]
pub struct ModulusTable {
    dt: f64,
    t_max: f64,
    rings: Vec<Vec<f64>>,
}

impl ModulusTable {
    /// Ring spacing in `t = -log₂(1 - r)`.
    const STEP: f64 = 1.0 / 16.0;

    pub fn build(h: &HerglotzProduct) -> Self {
        let t_max = -(1.0 - h.radius_cap()).log2();
        let n = (t_max / Self::STEP).ceil() as usize + 1;
        let dt = t_max / (n - 1) as f64;
        let rings = (0..n)
            .map(|i| {
                let s = (-(i as f64) * dt).exp2();
                let count = ((10.0 * TAU / s).ceil() as usize).max(64).next_power_of_two();
                h.eval_circle(1.0 - s, count).iter().map(|v| v.norm_sqr().ln()).collect()
            })
            .collect();
        ModulusTable { dt, t_max, rings }
    }

    pub fn len(&self) -> usize {
        self.rings.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rings.is_empty()
    }

    fn on_ring(&self, i: usize, turn: f64) -> f64 {
        let ring = &self.rings[i];
        let n = ring.len();
        let x = turn * n as f64;
        let k = x.floor();
        let at = |d: i64| ring[(k as i64 + d).rem_euclid(n as i64) as usize];
        cubic(at(-1), at(0), at(1), at(2), x - k)
    }

    pub fn eval(&self, z: Complex64) -> f64 {
        let t = (-(1.0 - z.norm()).log2()).clamp(0.0, self.t_max);
        let turn = (z.arg() / TAU).rem_euclid(1.0);
        let x = t / self.dt;
        let k = (x.floor() as usize).min(self.rings.len() - 2);
        let last = self.rings.len() as i64 - 1;
        let at = |d: i64| self.on_ring((k as i64 + d).clamp(0, last) as usize, turn);
        cubic(at(-1), at(0), at(1), at(2), x - k as f64).exp()
    }
}

/// Catmull-Rom interpolation between `b` and `c` at fraction `u`.
fn cubic(a: f64, b: f64, c: f64, d: f64, u: f64) -> f64 {
    b + 0.5 * u * (c - a + u * (2.0 * a - 5.0 * b + 4.0 * c - d + u * (3.0 * (b - c) + d - a)))
}

#[derive(Clone)]
enum Repr {
    Coefficients(Vec<Complex64>),
    Evaluator(Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>),
    Herglotz(Arc<HerglotzProduct>, Arc<OnceLock<ModulusTable>>),
}

/// An analytic function on the disc given by Taylor coefficients or by an evaluator.
#[derive(Clone)]
pub struct AnalyticSymbol {
    label: String,
    repr: Repr,
    hints: Vec<Hint>,
}

impl fmt::Debug for AnalyticSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.repr {
            Repr::Coefficients(c) => format!("{} coefficients", c.len()),
            Repr::Evaluator(_) => "evaluator".into(),
            Repr::Herglotz(h, _) => format!("Herglotz product with {} nodes", h.nodes()),
        };
        write!(f, "AnalyticSymbol({}, {kind})", self.label)
    }
}

impl AnalyticSymbol {
    pub fn polynomial(label: impl Into<String>, coeffs: Vec<Complex64>) -> Self {
        AnalyticSymbol { label: label.into(), repr: Repr::Coefficients(coeffs), hints: Vec::new() }
    }

    pub fn real_polynomial(label: impl Into<String>, coeffs: &[f64]) -> Self {
        Self::polynomial(label, coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn constant(c: f64) -> Self {
        Self::real_polynomial(format!("{c}"), &[c])
    }

    pub fn monomial(n: usize) -> Self {
        let mut c = vec![0.0; n + 1];
        c[n] = 1.0;
        Self::real_polynomial(format!("z^{n}"), &c)
    }

    pub fn from_fn<F>(label: impl Into<String>, f: F, hints: Vec<Hint>) -> Self
    where
        F: Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    {
        AnalyticSymbol { label: label.into(), repr: Repr::Evaluator(Arc::new(f)), hints }
    }

    pub fn herglotz(label: impl Into<String>, h: HerglotzProduct, hints: Vec<Hint>) -> Self {
        AnalyticSymbol { label: label.into(), repr: Repr::Herglotz(Arc::new(h), Arc::default()), hints }
    }

    /// `(1 - z)^{-1/4}` on the principal branch.
    pub fn quarter_pole() -> Self {
        Self::from_fn(
            "(1-z)^(-1/4)",
            |z| (Complex64::new(1.0, 0.0) - z).powf(-0.25),
            vec![Hint::boundary(0.0, 1e-6)],
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn hints(&self) -> &[Hint] {
        &self.hints
    }

    pub fn with_hints(mut self, hints: Vec<Hint>) -> Self {
        self.hints = hints;
        self
    }

    pub fn coefficients(&self) -> Option<&[Complex64]> {
        match &self.repr {
            Repr::Coefficients(c) => Some(c),
            _ => None,
        }
    }

    pub fn require_coefficients(&self) -> Result<&[Complex64]> {
        self.coefficients().ok_or_else(|| Error::NoCoefficients(self.label.clone()))
    }

    pub fn herglotz_parts(&self) -> Option<&HerglotzProduct> {
        match &self.repr {
            Repr::Herglotz(h, _) => Some(h),
            _ => None,
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        match &self.repr {
            Repr::Coefficients(c) => c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, a| acc * z + a),
            Repr::Evaluator(f) => f(z),
            Repr::Herglotz(h, _) => h.eval(z),
        }
    }

    /// Values on the circle of radius `r` at `n` equally spaced angles starting at 0.
    pub fn eval_circle(&self, r: f64, n: usize) -> Vec<Complex64> {
        match &self.repr {
            Repr::Herglotz(h, _) => h.eval_circle(r, n),
            _ => (0..n).map(|k| self.eval(Complex64::from_polar(r, TAU * k as f64 / n as f64))).collect(),
        }
    }

    /// `|f(z)|²`. Herglotz products are read from a table built on first use.
    pub fn modulus_sq(&self, z: Complex64) -> f64 {
        match &self.repr {
            Repr::Herglotz(h, table) => table.get_or_init(|| ModulusTable::build(h)).eval(z),
            _ => self.eval(z).norm_sqr(),
        }
    }

    /// `‖f‖²_{A²} = Σ |a_n|²/(n+1)` when coefficients are known.
    pub fn coefficient_norm_sq(&self) -> Option<f64> {
        self.coefficients()
            .map(|c| c.iter().enumerate().map(|(n, a)| a.norm_sqr() / (n + 1) as f64).sum())
    }

    pub fn is_zero(&self) -> bool {
        matches!(&self.repr, Repr::Coefficients(c) if c.iter().all(|a| a.norm() == 0.0))
    }
}
