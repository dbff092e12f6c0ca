//! The two dyadic systems of arcs on the circle, their Carleson boxes and top halves.
//!
//! Angles are measured in turns (fractions of the full circle) throughout; radians are
//! only produced on request.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};

/// Deepest level an interval may have. Beyond this an `f64` turn can no longer
/// distinguish neighbouring intervals.
pub const MAX_LEVEL: u32 = 52;

/// Largest depth accepted by [`build_grid`]; the grid has `2^(N+1) - 1` members.
pub const MAX_GRID_DEPTH: u32 = 24;

const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Shift {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1/3")]
    Third,
}

impl Shift {
    pub const BOTH: [Shift; 2] = [Shift::Zero, Shift::Third];

    pub fn value(self) -> f64 {
        match self {
            Shift::Zero => 0.0,
            Shift::Third => 1.0 / 3.0,
        }
    }

    pub fn slot(self) -> usize {
        match self {
            Shift::Zero => 0,
            Shift::Third => 1,
        }
    }
}

impl fmt::Display for Shift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shift::Zero => write!(f, "0"),
            Shift::Third => write!(f, "1/3"),
        }
    }
}

impl std::str::FromStr for Shift {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "0" | "0.0" => Ok(Shift::Zero),
            "1/3" | "third" => Ok(Shift::Third),
            other => match other.parse::<f64>() {
                Ok(v) if (v - 1.0 / 3.0).abs() < 1e-6 => Ok(Shift::Third),
                _ => arg(format!("unknown grid shift {other:?} (expected 0 or 1/3)")),
            },
        }
    }
}

/// Fractional part in `[0, 1)`.
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Boundary projection of `z` in turns.
pub fn turn_of(z: Complex64) -> f64 {
    frac(z.im.atan2(z.re) / TAU)
}

/// Index of the level-`level` interval of grid `shift` containing the angle `t` (turns).
pub fn index_of(t: f64, shift: Shift, level: u32) -> u64 {
    let n = 1u64 << level;
    let k = (frac(t - shift.value()) * n as f64).floor() as u64;
    k.min(n - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub shift: Shift,
    pub level: u32,
    pub index: u64,
}

impl DyadicInterval {
    pub fn new(shift: Shift, level: u32, index: u64) -> Result<Self> {
        if level > MAX_LEVEL {
            return arg(format!("level {level} exceeds {MAX_LEVEL}"));
        }
        if index >= 1u64 << level {
            return arg(format!("index {index} out of range for level {level}"));
        }
        Ok(DyadicInterval { shift, level, index })
    }

    pub fn root(shift: Shift) -> Self {
        DyadicInterval { shift, level: 0, index: 0 }
    }

    /// The interval of the given level containing angle `t` (turns).
    pub fn containing(t: f64, shift: Shift, level: u32) -> Self {
        DyadicInterval { shift, level, index: index_of(t, shift, level) }
    }

    /// Normalized length `2^-level`.
    pub fn len(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    /// Start angle in turns, reduced to `[0, 1)`.
    pub fn start(&self) -> f64 {
        frac(self.index as f64 * self.len() + self.shift.value())
    }

    /// `[start, end)` in radians, with `start` in `[0, 2π)`; `end` may exceed `2π`.
    pub fn arc_radians(&self) -> (f64, f64) {
        let s = self.start() * TAU;
        (s, s + self.len() * TAU)
    }

    pub fn contains_turn(&self, t: f64) -> bool {
        index_of(t, self.shift, self.level) == self.index
    }

    pub fn contains_point(&self, z: Complex64) -> bool {
        self.contains_turn(turn_of(z))
    }

    pub fn parent(&self) -> Option<Self> {
        (self.level > 0).then(|| DyadicInterval { shift: self.shift, level: self.level - 1, index: self.index >> 1 })
    }

    pub fn children(&self) -> [Self; 2] {
        let c = |i| DyadicInterval { shift: self.shift, level: self.level + 1, index: 2 * self.index + i };
        [c(0), c(1)]
    }

    /// Ancestor at `level <= self.level` (the interval itself at equal level).
    pub fn ancestor_at(&self, level: u32) -> Self {
        assert!(level <= self.level);
        DyadicInterval { shift: self.shift, level, index: self.index >> (self.level - level) }
    }

    /// `other ⊆ self` within the same grid.
    pub fn contains_interval(&self, other: &Self) -> bool {
        self.shift == other.shift && other.level >= self.level && other.ancestor_at(self.level) == *self
    }

    pub fn carleson_box(&self) -> CarlesonBox {
        CarlesonBox::from_interval(*self)
    }

    pub fn top_half(&self) -> TopHalf {
        TopHalf { interval: *self }
    }
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "D[{}]({}, {})", self.shift, self.level, self.index)
    }
}

/// All intervals of grid `shift` with level at most `depth`, ordered by level then index.
pub fn build_grid(shift: Shift, depth: u32) -> Result<Vec<DyadicInterval>> {
    if depth > MAX_GRID_DEPTH {
        return arg(format!("grid depth {depth} exceeds {MAX_GRID_DEPTH}"));
    }
    let mut out = Vec::with_capacity((1usize << (depth + 1)) - 1);
    for level in 0..=depth {
        out.extend((0..1u64 << level).map(|index| DyadicInterval { shift, level, index }));
    }
    Ok(out)
}

/// A half-open arc `[start, start + len)` in turns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleArc {
    pub start: f64,
    pub len: f64,
}

impl CircleArc {
    pub fn new(start: f64, len: f64) -> Result<Self> {
        if !(len > 0.0 && len <= 1.0) || !start.is_finite() {
            return arg(format!("arc length {len} must lie in (0, 1]"));
        }
        Ok(CircleArc { start: frac(start), len })
    }

    pub fn from_radians(start: f64, end: f64) -> Result<Self> {
        CircleArc::new(start / TAU, (end - start) / TAU)
    }

    pub fn contains_turn(&self, t: f64) -> bool {
        frac(t - self.start) < self.len
    }
}

/// Whether `arc` fits inside the interval of grid `shift` at `level` containing its start,
/// returning that interval. A relative slack of `1e-9` absorbs the rounding in shifted starts.
fn fits(arc: &CircleArc, shift: Shift, level: u32) -> Option<DyadicInterval> {
    let n = (level as f64).exp2();
    let u = frac(arc.start - shift.value()) * n;
    let mut k = u.floor();
    let mut off = u - k;
    if off > 1.0 - SNAP {
        k += 1.0;
        off = 0.0;
    }
    if off + arc.len * n <= 1.0 + SNAP {
        let index = (k as u64) % (1u64 << level);
        Some(DyadicInterval { shift, level, index })
    } else {
        None
    }
}

/// The smallest interval of either grid containing `arc`; among equal sizes grid 0 wins.
pub fn cover_interval(arc: &CircleArc) -> Result<DyadicInterval> {
    if !(arc.len > 0.0 && arc.len <= 1.0) {
        return arg(format!("arc length {} must lie in (0, 1]", arc.len));
    }
    let top = ((1.0 / arc.len).log2().floor() as u32).min(MAX_LEVEL);
    for level in (1..=top).rev() {
        for shift in Shift::BOTH {
            if let Some(k) = fits(arc, shift, level) {
                return Ok(k);
            }
        }
    }
    Ok(DyadicInterval::root(Shift::Zero))
}

/// Deepest level `j` with `1 - 2^-j <= r`.
pub fn radial_level(r: f64) -> u32 {
    if r <= 0.0 {
        return 0;
    }
    let mut j = (-(1.0 - r).log2()).floor().max(0.0) as u32;
    j = j.min(MAX_LEVEL);
    while j > 0 && 1.0 - (-(j as f64)).exp2() > r {
        j -= 1;
    }
    while j < MAX_LEVEL && 1.0 - (-((j + 1) as f64)).exp2() <= r {
        j += 1;
    }
    j
}

fn check_open_disc(z: Complex64) -> Result<()> {
    if !(z.norm() < 1.0) {
        return arg(format!("point {z} is not in the open unit disc"));
    }
    Ok(())
}

/// Smallest interval `I` of grid `shift` whose box contains both points.
///
/// Both points lie in `Q_I` iff `1 - |I| <= min(|z|, |ζ|)` and both projections lie on `I`,
/// so the root always qualifies and the answer always exists.
pub fn minimal_containing_interval(z: Complex64, zeta: Complex64, shift: Shift) -> Result<DyadicInterval> {
    check_open_disc(z)?;
    check_open_disc(zeta)?;
    let cap = radial_level(z.norm().min(zeta.norm()));
    let (a, b) = (turn_of(z), turn_of(zeta));
    let mut level = 0;
    while level < cap && index_of(a, shift, level + 1) == index_of(b, shift, level + 1) {
        level += 1;
    }
    Ok(DyadicInterval::containing(a, shift, level))
}

/// `Q_I = {re^{iθ} : 1 - |I| <= r < 1, e^{iθ} ∈ I}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarlesonBox {
    pub start: f64,
    pub len: f64,
    pub interval: Option<DyadicInterval>,
}

impl CarlesonBox {
    pub fn from_interval(i: DyadicInterval) -> Self {
        CarlesonBox { start: i.start(), len: i.len(), interval: Some(i) }
    }

    pub fn from_arc(arc: CircleArc) -> Self {
        CarlesonBox { start: arc.start, len: arc.len, interval: None }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        let r = z.norm();
        if !(r < 1.0 && r >= 1.0 - self.len) {
            return false;
        }
        match self.interval {
            Some(i) => i.contains_point(z),
            None => frac(turn_of(z) - self.start) < self.len,
        }
    }

    /// Normalized area `ℓ(2ℓ - ℓ²)`.
    pub fn area(&self) -> f64 {
        let l = self.len;
        l * (2.0 * l - l * l)
    }
}

/// `T_I`: the band `1 - |I| <= r < 1 - |I|/2` over `I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopHalf {
    pub interval: DyadicInterval,
}

impl TopHalf {
    pub fn radial_band(&self) -> (f64, f64) {
        let l = self.interval.len();
        (1.0 - l, 1.0 - l / 2.0)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        let (lo, hi) = self.radial_band();
        let r = z.norm();
        r >= lo && r < hi && self.interval.contains_point(z)
    }

    pub fn area(&self) -> f64 {
        let l = self.interval.len();
        let (lo, hi) = self.radial_band();
        l * (hi * hi - lo * lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts_and_shifted_start() {
        assert_eq!(build_grid(Shift::Zero, 2).unwrap().len(), 7);
        let g = build_grid(Shift::Third, 1).unwrap();
        let l1: Vec<_> = g.iter().filter(|i| i.level == 1).collect();
        assert!((l1[0].arc_radians().0 - TAU / 3.0).abs() < 1e-14);
        assert!(build_grid(Shift::Zero, MAX_GRID_DEPTH + 1).is_err());
    }

    #[test]
    fn boxes_and_top_halves() {
        let root = DyadicInterval::root(Shift::Zero);
        assert_eq!(root.carleson_box().area(), 1.0);
        assert!((root.children()[0].carleson_box().area() - 0.375).abs() < 1e-15);
        assert!(root.carleson_box().contains(Complex64::new(0.0, 0.0)));
        assert!(!root.children()[0].carleson_box().contains(Complex64::new(0.0, 0.0)));
        let t = root.top_half();
        assert_eq!(t.radial_band(), (0.0, 0.5));
        assert!((t.area() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn cover_examples() {
        let full = CircleArc::new(0.0, 1.0).unwrap();
        assert_eq!(cover_interval(&full).unwrap(), DyadicInterval::root(Shift::Zero));
        let i = DyadicInterval::new(Shift::Zero, 5, 17).unwrap();
        let a = CircleArc::new(i.start(), i.len()).unwrap();
        assert_eq!(cover_interval(&a).unwrap(), i);
        assert!(cover_interval(&CircleArc { start: 0.0, len: 0.0 }).is_err());
    }

    #[test]
    fn minimal_interval_root_at_origin() {
        let o = Complex64::new(0.0, 0.0);
        for s in Shift::BOTH {
            assert_eq!(minimal_containing_interval(o, o, s).unwrap(), DyadicInterval::root(s));
        }
        assert!(minimal_containing_interval(Complex64::new(1.0, 0.0), o, Shift::Zero).is_err());
    }

    #[test]
    fn radial_levels() {
        assert_eq!(radial_level(0.0), 0);
        assert_eq!(radial_level(0.5), 1);
        assert_eq!(radial_level(0.49), 0);
        assert_eq!(radial_level(0.75), 2);
        assert_eq!(radial_level(1.0 - 2f64.powi(-10)), 10);
    }
}
