//! Outer functions from sampled boundary moduli and the Lipschitz symbol `g` vanishing on
//! the Cantor set.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::cantor::{generation_for_resolution, generation_points};
use super::family::boundary_angle;
use crate::error::{arg, Result};
use crate::quadrature::Hint;
use crate::sarason::{AnalyticSymbol, HerglotzProduct};

/// Largest resolution exponent accepted by [`outer_function`].
pub const MAX_RESOLUTION: u32 = 20;

/// The discrete Herglotz data `c_m = L^-1 Σ_j log h(θ_j) e^{-imθ_j}`, `θ_j = 2π(j + 1/2)/L`.
fn log_modulus_coefficients(h: &dyn Fn(f64) -> f64, resolution: u32) -> Result<Vec<Complex64>> {
    if !(1..=MAX_RESOLUTION).contains(&resolution) {
        return arg(format!("resolution exponent {resolution} must lie in 1..={MAX_RESOLUTION}"));
    }
    let l = 1usize << resolution;
    let mut data = Vec::with_capacity(l);
    for j in 0..l {
        let theta = TAU * (j as f64 + 0.5) / l as f64;
        let v = h(theta);
        if !(v > 0.0 && v.is_finite()) {
            return arg(format!("boundary modulus {v} at angle {theta} has no finite logarithm"));
        }
        data.push(Complex64::new(v.ln(), 0.0));
    }
    FftPlanner::new().plan_fft_forward(l).process(&mut data);
    Ok(data
        .into_iter()
        .enumerate()
        .map(|(m, c)| c * Complex64::from_polar(1.0 / l as f64, -PI * m as f64 / l as f64))
        .collect())
}

/// The outer function `q(z) exp(power · H(z))` where `H` is the Herglotz integral of
/// `log h` computed with the `2^resolution`-point trapezoid rule.
pub fn outer_product(
    label: impl Into<String>,
    h: &dyn Fn(f64) -> f64,
    resolution: u32,
    power: f64,
    prefactor: Vec<Complex64>,
    hints: Vec<Hint>,
) -> Result<AnalyticSymbol> {
    let coeffs = log_modulus_coefficients(h, resolution)?;
    Ok(AnalyticSymbol::herglotz(label, HerglotzProduct { coeffs, sign: -1.0, power, prefactor }, hints))
}

/// The outer function with boundary modulus `h`.
pub fn outer_function(h: &dyn Fn(f64) -> f64, resolution: u32) -> Result<AnalyticSymbol> {
    outer_product("outer", h, resolution, 1.0, vec![Complex64::new(1.0, 0.0)], Vec::new())
}

/// Chordal distance `|e^{iθ} - e^{iφ}|`.
pub fn chord(theta: f64, phi: f64) -> f64 {
    2.0 * (0.5 * (theta - phi)).sin().abs()
}

/// The zero set used for `g`: the generation points seen on the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroSet {
    pub generation: u32,
    pub resolution: u32,
    pub angles: Vec<f64>,
}

impl ZeroSet {
    /// Generation chosen so that the truncation gap `p_n` is below the node spacing `2π/2^M`.
    pub fn for_resolution(resolution: u32) -> Result<Self> {
        let n = generation_for_resolution(TAU / (1u64 << resolution) as f64);
        let mut angles: Vec<f64> =
            generation_points(n)?.iter().map(|x| boundary_angle(x.to_f64())).collect();
        angles.sort_by(f64::total_cmp);
        Ok(ZeroSet { generation: n, resolution, angles })
    }

    pub fn distance(&self, theta: f64) -> f64 {
        self.angles.iter().map(|&a| chord(theta, a)).fold(f64::INFINITY, f64::min)
    }
}

/// `g = (1 - z) w²` with `w` outer and `|w| = dist(·, E)^{1/2}` on the circle.
pub fn cantor_symbol(resolution: u32) -> Result<(AnalyticSymbol, ZeroSet)> {
    let zeros = ZeroSet::for_resolution(resolution)?;
    let spacing = TAU / (1u64 << resolution) as f64;
    let hints = zeros.angles.iter().map(|&t| Hint::boundary(t, 0.25 * spacing)).collect();
    let z = zeros.clone();
    let h = move |theta: f64| z.distance(theta).sqrt();
    let g = outer_product(
        "g",
        &h,
        resolution,
        2.0,
        vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
        hints,
    )?;
    Ok((g, zeros))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    /// `min |g(z)| / (1 - |z|)` over the sampled points.
    pub min_ratio: f64,
    pub argmin: [f64; 2],
    /// `max |g(z) - g(w)| / |z - w|` over neighbouring sample pairs.
    pub lipschitz: f64,
    pub points: usize,
}

/// Sampled `(lowbg)` ratio and Lipschitz quotient of `g` over `points`.
pub fn lowbg_check(g: &AnalyticSymbol, points: &[Complex64]) -> LowerBound {
    let mut out = LowerBound { min_ratio: f64::INFINITY, argmin: [0.0, 0.0], lipschitz: 0.0, points: points.len() };
    for &z in points {
        let s = 1.0 - z.norm();
        let gz = g.eval(z);
        let ratio = gz.norm() / s;
        if ratio < out.min_ratio {
            out.min_ratio = ratio;
            out.argmin = [z.re, z.im];
        }
        if z.norm() > 0.0 {
            let inward = z * (1.0 - 0.5 * s / z.norm());
            let around = z * Complex64::from_polar(1.0, s);
            for w in [inward, around] {
                out.lipschitz = out.lipschitz.max((gz - g.eval(w)).norm() / (z - w).norm());
            }
        }
    }
    out
}
