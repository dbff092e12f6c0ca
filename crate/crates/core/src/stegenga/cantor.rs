//! Exact arithmetic on the Cantor-type set `E₁ = closure{x_α}`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};

/// `num / 2^exp`, kept with `num` odd unless it is zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DyadicRational {
    num: BigInt,
    exp: u32,
}

impl DyadicRational {
    pub fn new(num: impl Into<BigInt>, exp: u32) -> Self {
        let mut num = num.into();
        let mut exp = exp;
        if num.is_zero() {
            return DyadicRational { num, exp: 0 };
        }
        while exp > 0 && num.is_even() {
            num >>= 1;
            exp -= 1;
        }
        DyadicRational { num, exp }
    }

    pub fn zero() -> Self {
        Self::new(0, 0)
    }

    pub fn one() -> Self {
        Self::new(1, 0)
    }

    /// `2^-k`.
    pub fn inv_pow2(k: u32) -> Self {
        Self::new(1, k)
    }

    pub fn numerator(&self) -> &BigInt {
        &self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.num.clone(), BigInt::one() << self.exp)
    }

    pub fn to_f64(&self) -> f64 {
        // shift into range before converting so huge exponents do not overflow
        let bits = self.num.bits() as i64;
        let keep = 60i64;
        let shift = (bits - keep).max(0);
        let head = (&self.num >> shift as usize).to_f64().unwrap_or(f64::NAN);
        head * (shift - self.exp as i64).to_f64().map_or(f64::NAN, f64::exp2)
    }

    pub fn abs(&self) -> Self {
        DyadicRational { num: self.num.abs(), exp: self.exp }
    }

    pub fn half(&self) -> Self {
        Self::new(self.num.clone(), self.exp + 1)
    }

    fn aligned(&self, other: &Self) -> (BigInt, BigInt, u32) {
        let e = self.exp.max(other.exp);
        (&self.num << (e - self.exp) as usize, &other.num << (e - other.exp) as usize, e)
    }
}

impl Add for &DyadicRational {
    type Output = DyadicRational;
    fn add(self, o: &DyadicRational) -> DyadicRational {
        let (a, b, e) = self.aligned(o);
        DyadicRational::new(a + b, e)
    }
}

impl Sub for &DyadicRational {
    type Output = DyadicRational;
    fn sub(self, o: &DyadicRational) -> DyadicRational {
        let (a, b, e) = self.aligned(o);
        DyadicRational::new(a - b, e)
    }
}

impl Mul for &DyadicRational {
    type Output = DyadicRational;
    fn mul(self, o: &DyadicRational) -> DyadicRational {
        DyadicRational::new(&self.num * &o.num, self.exp + o.exp)
    }
}

impl Ord for DyadicRational {
    fn cmp(&self, o: &Self) -> Ordering {
        let (a, b, _) = self.aligned(o);
        a.cmp(&b)
    }
}

impl PartialOrd for DyadicRational {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/2^{}", self.num, self.exp)
        }
    }
}

impl Serialize for DyadicRational {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Largest generation accepted by the point enumerations.
pub const MAX_GENERATION: u32 = 12;

/// `λ_0 = 1`, `λ_j = 2^{-2^j}` for `j = 0..=n`.
pub fn lambda_seq(n: u32) -> Vec<DyadicRational> {
    (0..=n).map(|j| if j == 0 { DyadicRational::one() } else { DyadicRational::inv_pow2(1 << j) }).collect()
}

/// `log₂(1/p_n)` where `p_n = λ_0 ⋯ λ_n`, that is `2^{n+1} - 2`.
pub fn log2_inv_p(n: u32) -> u64 {
    (1u64 << (n + 1)) - 2
}

/// `p_n = λ_0 ⋯ λ_n`.
pub fn p(n: u32) -> DyadicRational {
    DyadicRational::inv_pow2(log2_inv_p(n) as u32)
}

/// The `j`-th step `(1 - λ_j) p_{j-1}`.
fn step(j: u32) -> DyadicRational {
    let one = DyadicRational::one();
    &(&one - &lambda_seq(j)[j as usize]) * &p(j - 1)
}

/// All `x_α = Σ_{j=1}^n α_j (1 - λ_j) p_{j-1}`, sorted.
pub fn generation_points(n: u32) -> Result<Vec<DyadicRational>> {
    if n > MAX_GENERATION {
        return arg(format!("generation {n} exceeds {MAX_GENERATION}"));
    }
    let mut pts = vec![DyadicRational::zero()];
    for j in 1..=n {
        let s = step(j);
        let shifted: Vec<DyadicRational> = pts.iter().map(|x| x + &s).collect();
        pts.extend(shifted);
    }
    pts.sort();
    Ok(pts)
}

/// The points of generation `n` together with the defining sequences.
#[derive(Debug, Clone, Serialize)]
pub struct CantorSet {
    pub generation: u32,
    pub lambdas: Vec<DyadicRational>,
    pub scales: Vec<DyadicRational>,
    pub points: Vec<DyadicRational>,
}

impl CantorSet {
    pub fn new(n: u32) -> Result<Self> {
        let points = generation_points(n)?;
        Ok(CantorSet { generation: n, lambdas: lambda_seq(n), scales: (0..=n).map(p).collect(), points })
    }

    pub fn points_f64(&self) -> Vec<f64> {
        self.points.iter().map(DyadicRational::to_f64).collect()
    }

    /// Smallest gap between consecutive points (zero for a single point).
    pub fn min_gap(&self) -> DyadicRational {
        self.points.windows(2).map(|w| &w[1] - &w[0]).min().unwrap_or_else(DyadicRational::zero)
    }
}

/// `max_{1<=j<=n} Σ_{j<m<=n} (1-λ_m)p_{m-1} / ((1-λ_j)p_{j-1})`, exact.
pub fn tau_value(n: u32) -> BigRational {
    let steps: Vec<DyadicRational> = (1..=n).map(step).collect();
    let mut best = BigRational::zero();
    for j in 0..steps.len() {
        let tail = steps[j + 1..].iter().fold(DyadicRational::zero(), |acc, s| &acc + s);
        let r = tail.to_rational() / steps[j].to_rational();
        if r > best {
            best = r;
        }
    }
    best
}

/// The closed bound `(1/3)(1 + 2^-2) = 5/12`.
pub fn tau_bound() -> BigRational {
    BigRational::new(5.into(), 12.into())
}

/// `(1/2 - τ)/(1 + τ)`.
pub fn kstep_constant(tau: &BigRational) -> BigRational {
    let half = BigRational::new(1.into(), 2.into());
    (&half - tau) / (BigRational::one() + tau)
}

#[derive(Debug, Clone, Serialize)]
pub struct KStep {
    pub generation: u32,
    pub min_ratio: BigRational,
    pub bound: BigRational,
    pub holds: bool,
}

fn nearest<'a>(pts: &'a [DyadicRational], x: &DyadicRational) -> &'a DyadicRational {
    let k = pts.partition_point(|p| p < x);
    let mut best = &pts[k.min(pts.len() - 1)];
    if k > 0 && (x - &pts[k - 1]).abs() < (x - best).abs() {
        best = &pts[k - 1];
    }
    best
}

/// Minimum over pairs `x_α < x_β` of `dist((x_α + x_β)/2, points) / (x_β - x_α)`.
pub fn kstep_check(n: u32) -> Result<KStep> {
    if n > 8 {
        return arg(format!("kstep enumeration limited to generation 8, got {n}"));
    }
    let pts = generation_points(n)?;
    let mut min: Option<BigRational> = None;
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            let mid = (&pts[a] + &pts[b]).half();
            let d = (&mid - nearest(&pts, &mid)).abs();
            let r = d.to_rational() / (&pts[b] - &pts[a]).to_rational();
            if min.as_ref().is_none_or(|m| r < *m) {
                min = Some(r);
            }
        }
    }
    let tau = tau_value(n);
    let bound = kstep_constant(&tau);
    let min_ratio = min.unwrap_or_else(|| BigRational::new(1.into(), 2.into()));
    Ok(KStep { generation: n, holds: min_ratio >= bound, min_ratio, bound })
}

/// `sup_{x ∈ I} dist(x, points) / |I|` on `samples + 1` equally spaced points of `[a, b]`.
pub fn porosity_ratio(points: &[f64], a: f64, b: f64, samples: usize) -> f64 {
    let dist = |x: f64| {
        let k = points.partition_point(|&p| p < x);
        let mut d = f64::INFINITY;
        if k < points.len() {
            d = d.min(points[k] - x);
        }
        if k > 0 {
            d = d.min(x - points[k - 1]);
        }
        d
    };
    let sup = (0..=samples).map(|i| dist(a + (b - a) * i as f64 / samples as f64)).fold(0.0, f64::max);
    sup / (b - a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionK {
    pub generation: u32,
    pub trials: usize,
    pub min_ratio: f64,
    pub worst: [f64; 2],
}

/// Condition (K) on random intervals inside `[-1/4, 5/4]` with log-uniform lengths.
pub fn condition_k_check(n: u32, trials: usize, seed: u64) -> Result<ConditionK> {
    let pts: Vec<f64> = generation_points(n)?.iter().map(DyadicRational::to_f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ConditionK { generation: n, trials, min_ratio: f64::INFINITY, worst: [0.0, 0.0] };
    for _ in 0..trials {
        let len = 1.5 * (-rng.gen_range(0.0..24.0f64)).exp2();
        let a = rng.gen_range(-0.25..(1.25 - len));
        let r = porosity_ratio(&pts, a, a + len, 512);
        if r < out.min_ratio {
            out.min_ratio = r;
            out.worst = [a, a + len];
        }
    }
    Ok(out)
}

/// Smallest `n` whose truncation gap `p_n` lies below `resolution`.
pub fn generation_for_resolution(resolution: f64) -> u32 {
    (0..MAX_GENERATION).find(|&n| p(n).to_f64() < resolution).unwrap_or(MAX_GENERATION)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_rationals_normalize() {
        let x = DyadicRational::new(12, 4);
        assert_eq!(x, DyadicRational::new(3, 2));
        assert_eq!(x.to_f64(), 0.75);
        assert_eq!(DyadicRational::inv_pow2(2000).to_f64(), 0.0);
        assert_eq!((&x - &x), DyadicRational::zero());
    }

    #[test]
    fn tiny_values_convert() {
        assert_eq!(p(6).to_f64(), (-126f64).exp2());
    }
}
