//! The conformal map to the upper half-plane and the functions `f_n` with double poles just
//! below the generation-`n` points.

use num_complex::Complex64;
use serde::Serialize;

use super::cantor::{generation_points, log2_inv_p, p, DyadicRational};
use crate::error::{arg, Error, Result};
use crate::quadrature::Hint;
use crate::sarason::AnalyticSymbol;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest `n` for which the poles are built.
pub const MAX_FAMILY: u32 = 6;

/// `φ(z) = i(1 + z)/(1 - z)`, the disc onto the upper half-plane.
pub fn phi(z: Complex64) -> Result<Complex64> {
    if z == ONE {
        return Err(Error::Singular("φ has a pole at 1".into()));
    }
    Ok(I * (ONE + z) / (ONE - z))
}

/// `φ⁻¹(ζ) = (ζ - i)/(ζ + i)`.
pub fn phi_inv(zeta: Complex64) -> Result<Complex64> {
    if zeta == -I {
        return Err(Error::Singular("φ⁻¹ has a pole at -i".into()));
    }
    Ok((zeta - I) / (zeta + I))
}

/// `φ'(z) = 2i/(1 - z)²`.
pub fn phi_prime(z: Complex64) -> Complex64 {
    2.0 * I / ((ONE - z) * (ONE - z))
}

/// Angle in `[0, 2π)` of the boundary point `φ⁻¹(x)`, `x` real.
pub fn boundary_angle(x: f64) -> f64 {
    // φ⁻¹(x) = (x - i)/(x + i) = e^{iθ} with θ = 2 arg(x - i)
    (2.0 * (-1.0f64).atan2(x)).rem_euclid(std::f64::consts::TAU)
}

/// Poles `z_k = x_k - i p_n` below the generation-`n` points.
#[derive(Debug, Clone, Serialize)]
pub struct StegengaFamily {
    pub n: u32,
    pub points: Vec<DyadicRational>,
    pub poles: Vec<Complex64>,
    /// `log₂ p_n`.
    pub log2_p: i64,
    /// `log₂(2^{-n/2} p_n)`.
    pub log2_scale: f64,
}

impl StegengaFamily {
    pub fn p_n(&self) -> f64 {
        (self.log2_p as f64).exp2()
    }

    /// Boundary angles of the generation points, in the disc picture.
    pub fn angles(&self) -> Vec<f64> {
        self.poles.iter().map(|z| boundary_angle(z.re)).collect()
    }

    /// `1 - |φ⁻¹(z_k)|`-scale distances of the pole preimages to the circle.
    pub fn boundary_gaps(&self) -> Vec<f64> {
        let p = self.p_n();
        // |φ⁻¹(x - ip)|² = (x² + (1+p)²)/(x² + (1-p)²)
        self.poles.iter().map(|z| 2.0 * p / (1.0 + z.re * z.re)).collect()
    }

    pub fn hints(&self) -> Vec<Hint> {
        self.angles().into_iter().zip(self.boundary_gaps()).map(|(t, d)| Hint::boundary(t, 0.25 * d)).collect()
    }

    /// Whether `p_n` is below half the smallest gap between generation points (exact).
    pub fn admissible(&self) -> bool {
        let gap = self.points.windows(2).map(|w| &w[1] - &w[0]).min();
        gap.is_none_or(|g| p(self.n) < g.half())
    }

    /// `f_n(z) = 2^{-n/2} p_n Σ_k φ'(z)/(φ(z) - z_k)²`.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        if !(z.norm() < 1.0) {
            return arg(format!("{z} is not in the open disc"));
        }
        let w = phi(z)?;
        // each term is (s/(w - z_k))² with s² the prefactor, summed with compensation
        let s = (0.5 * self.log2_scale).exp2();
        let mut sum = Complex64::new(0.0, 0.0);
        let mut comp = Complex64::new(0.0, 0.0);
        for zk in &self.poles {
            let d = w - zk;
            if d.norm() == 0.0 {
                return Err(Error::Singular(format!("{z} maps onto a pole")));
            }
            let t = s / d;
            let term = t * t;
            let next = sum + term;
            comp += if sum.norm() >= term.norm() { (sum - next) + term } else { (term - next) + sum };
            sum = next;
        }
        Ok((sum + comp) * phi_prime(z))
    }

    /// `‖f_n‖²` in closed form: `-c² Σ_{j,k} 1/(z̄_j - z_k)²` with `c = 2^{-n/2} p_n`.
    pub fn norm_sq(&self) -> f64 {
        let c = self.log2_scale.exp2();
        let mut acc = Complex64::new(0.0, 0.0);
        for zj in &self.poles {
            for zk in &self.poles {
                let t = c / (zj.conj() - zk);
                acc -= t * t;
            }
        }
        acc.re
    }

    /// `2^{-n/2} p_n Σ_k 1/|φ(z) - z_k|`.
    pub fn first_order_sum(&self, z: Complex64) -> Result<f64> {
        let w = phi(z)?;
        let c = self.log2_scale.exp2();
        Ok(self.poles.iter().map(|zk| c / (w - zk).norm()).sum())
    }

    pub fn symbol(&self) -> AnalyticSymbol {
        let fam = self.clone();
        AnalyticSymbol::from_fn(
            format!("f_{}", self.n),
            move |z| fam.eval(z).unwrap_or(Complex64::new(f64::NAN, f64::NAN)),
            self.hints(),
        )
    }
}

pub fn build_poles(n: u32) -> Result<StegengaFamily> {
    if n > MAX_FAMILY {
        return arg(format!("pole family limited to n <= {MAX_FAMILY}, got {n}"));
    }
    let points = generation_points(n)?;
    let log2_p = -(log2_inv_p(n) as i64);
    let pn = (log2_p as f64).exp2();
    let poles = points.iter().map(|x| Complex64::new(x.to_f64(), -pn)).collect();
    Ok(StegengaFamily { n, points, poles, log2_p, log2_scale: log2_p as f64 - 0.5 * n as f64 })
}
