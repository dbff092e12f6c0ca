//! Globally adaptive tensor Gauss–Legendre cubature on the disc in `(s, θ)` coordinates,
//! `s = 1 - r`, with normalized area `dA = (1 - s) ds dθ / π`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A point the integrand is known to resolve on scale `scale` near `(s, theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hint {
    pub theta: f64,
    pub s: f64,
    pub scale: f64,
}

impl Hint {
    pub fn at(z: Complex64, scale: f64) -> Self {
        Hint { theta: z.arg().rem_euclid(TAU), s: 1.0 - z.norm(), scale }
    }

    /// A boundary point at angle `theta` resolved down to `scale`.
    pub fn boundary(theta: f64, scale: f64) -> Self {
        Hint { theta: theta.rem_euclid(TAU), s: 0.0, scale }
    }
}

/// `[s0, s1] × [t0, t1]` with `0 <= s0 < s1 <= 1` and angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub s0: f64,
    pub s1: f64,
    pub t0: f64,
    pub t1: f64,
}

impl Rect {
    pub fn quarters(&self) -> [Rect; 4] {
        let sm = 0.5 * (self.s0 + self.s1);
        let tm = 0.5 * (self.t0 + self.t1);
        [
            Rect { s0: self.s0, s1: sm, t0: self.t0, t1: tm },
            Rect { s0: self.s0, s1: sm, t0: tm, t1: self.t1 },
            Rect { s0: sm, s1: self.s1, t0: self.t0, t1: tm },
            Rect { s0: sm, s1: self.s1, t0: tm, t1: self.t1 },
        ]
    }

    pub fn size(&self) -> f64 {
        (self.s1 - self.s0).max(self.t1 - self.t0)
    }

    pub fn distance(&self, h: &Hint) -> f64 {
        let ds = (self.s0 - h.s).max(h.s - self.s1).max(0.0);
        let mid = 0.5 * (self.t0 + self.t1);
        let half = 0.5 * (self.t1 - self.t0);
        let mut dt = (h.theta - mid).rem_euclid(TAU);
        if dt > PI {
            dt = TAU - dt;
        }
        let dt = (dt - half).max(0.0);
        ds.hypot(dt)
    }
}

/// The disc as `k` angular sectors times two radial pieces.
pub fn disc_partition(k: usize) -> Vec<Rect> {
    let mut out = Vec::with_capacity(2 * k);
    for i in 0..k {
        let t0 = TAU * i as f64 / k as f64;
        let t1 = TAU * (i + 1) as f64 / k as f64;
        out.push(Rect { s0: 0.0, s1: 0.5, t0, t1 });
        out.push(Rect { s0: 0.5, s1: 1.0, t0, t1 });
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: usize,
    pub order: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options { abs_tol: 1e-9, rel_tol: 1e-9, max_evals: 20_000_000, order: 6 }
    }
}

impl Options {
    pub fn tol(abs_tol: f64, rel_tol: f64) -> Self {
        Options { abs_tol, rel_tol, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = t;
        w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

fn rule(order: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (0..=16).map(|n| if n == 0 { (vec![], vec![]) } else { gauss_legendre(n) }).collect());
    &rules[order.clamp(1, 16)]
}

struct Integrator<'a, F> {
    f: &'a F,
    order: usize,
    evals: usize,
}

impl<F: Fn(Complex64) -> f64> Integrator<'_, F> {
    fn apply(&mut self, r: &Rect) -> f64 {
        let (x, w) = rule(self.order);
        let hs = 0.5 * (r.s1 - r.s0);
        let ht = 0.5 * (r.t1 - r.t0);
        let (cs, ct) = (r.s0 + hs, r.t0 + ht);
        let mut acc = 0.0;
        for (xi, wi) in x.iter().zip(w) {
            let s = cs + hs * xi;
            let rad = 1.0 - s;
            let mut inner = 0.0;
            for (xk, wk) in x.iter().zip(w) {
                let t = ct + ht * xk;
                inner += wk * (self.f)(Complex64::from_polar(rad, t));
            }
            acc += wi * rad * inner;
        }
        self.evals += x.len() * x.len();
        acc * hs * ht / PI
    }

    fn nodes(&self, r: &Rect, out: &mut Vec<(Complex64, f64)>) {
        let (x, w) = rule(self.order);
        let hs = 0.5 * (r.s1 - r.s0);
        let ht = 0.5 * (r.t1 - r.t0);
        let (cs, ct) = (r.s0 + hs, r.t0 + ht);
        for (xi, wi) in x.iter().zip(w) {
            let rad = 1.0 - (cs + hs * xi);
            for (xk, wk) in x.iter().zip(w) {
                out.push((Complex64::from_polar(rad, ct + ht * xk), wi * wk * rad * hs * ht / PI));
            }
        }
    }

    fn entry(&mut self, rect: Rect, coarse: f64) -> Entry {
        let kids = rect.quarters();
        let vals = kids.map(|k| self.apply(&k));
        let fine: f64 = vals.iter().sum();
        Entry { rect, fine, err: (fine - coarse).abs(), kids: vals }
    }
}

struct Entry {
    rect: Rect,
    fine: f64,
    err: f64,
    kids: [f64; 4],
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.err.total_cmp(&o.err) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Split rectangles that lie within their own size of a hint, down to the hint's scale.
pub fn grade(initial: Vec<Rect>, hints: &[Hint]) -> Vec<Rect> {
    let mut out = Vec::with_capacity(initial.len());
    let mut stack = initial;
    while let Some(r) = stack.pop() {
        let size = r.size();
        let split = size > 1e-15
            && hints.iter().any(|h| size > h.scale && r.distance(h) < size);
        if split {
            stack.extend(r.quarters());
        } else {
            out.push(r);
        }
    }
    out
}

fn run<F: Fn(Complex64) -> f64>(
    f: &F,
    initial: Vec<Rect>,
    hints: &[Hint],
    opts: &Options,
) -> (Estimate, Vec<Entry>, usize, bool) {
    let mut it = Integrator { f, order: opts.order, evals: 0 };
    let mut heap = BinaryHeap::new();
    let (mut total, mut err) = (0.0, 0.0);
    for r in grade(initial, hints) {
        let coarse = it.apply(&r);
        let e = it.entry(r, coarse);
        total += e.fine;
        err += e.err;
        heap.push(e);
    }
    let mut converged = true;
    let mut steps = 0usize;
    while err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if it.evals >= opts.max_evals {
            converged = false;
            break;
        }
        let Some(top) = heap.pop() else { break };
        if top.rect.size() < 1e-14 {
            heap.push(top);
            converged = false;
            break;
        }
        total -= top.fine;
        err -= top.err;
        for (k, v) in top.rect.quarters().into_iter().zip(top.kids) {
            let e = it.entry(k, v);
            total += e.fine;
            err += e.err;
            heap.push(e);
        }
        steps += 1;
        if steps.is_multiple_of(4096) {
            total = heap.iter().map(|e| e.fine).sum();
            err = heap.iter().map(|e| e.err).sum();
        }
    }
    let total: f64 = heap.iter().map(|e| e.fine).sum();
    let err: f64 = heap.iter().map(|e| e.err).sum();
    let evals = it.evals;
    (Estimate { value: total, error: err, evals }, heap.into_vec(), opts.order, converged)
}

/// Integrate `f` over the union of `initial` against normalized area measure.
pub fn integrate<F: Fn(Complex64) -> f64>(f: &F, initial: Vec<Rect>, hints: &[Hint], opts: &Options) -> Result<Estimate> {
    let (est, _, _, ok) = run(f, initial, hints, opts);
    if ok && est.value.is_finite() {
        Ok(est)
    } else {
        Err(Error::Quadrature { estimate: est.value, error: est.error, evals: est.evals })
    }
}

/// Like [`integrate`] but also returns the weighted nodes of the final partition, usable
/// as a cubature rule for integrands with the same features.
pub fn integrate_with_nodes<F: Fn(Complex64) -> f64>(
    f: &F,
    initial: Vec<Rect>,
    hints: &[Hint],
    opts: &Options,
) -> Result<(Estimate, Vec<(Complex64, f64)>)> {
    let (est, leaves, order, ok) = run(f, initial, hints, opts);
    if !(ok && est.value.is_finite()) {
        return Err(Error::Quadrature { estimate: est.value, error: est.error, evals: est.evals });
    }
    let it = Integrator { f, order, evals: 0 };
    let mut nodes = Vec::new();
    for e in &leaves {
        for k in e.rect.quarters() {
            it.nodes(&k, &mut nodes);
        }
    }
    Ok((est, nodes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((q - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn unit_mass_and_moments() {
        let one = integrate(&|_| 1.0, disc_partition(4), &[], &Options::default()).unwrap();
        assert!((one.value - 1.0).abs() < 1e-13);
        // ∫ |z|^{2n} dA = 1/(n+1)
        let m = integrate(&|z: Complex64| z.norm_sqr().powi(5), disc_partition(4), &[], &Options::default()).unwrap();
        assert!((m.value - 1.0 / 6.0).abs() < 1e-10);
    }

    #[test]
    fn peaked_integrand_with_hint() {
        // ∫ (1-|a|²)²/|1-āz|⁴ dA = 1
        let a = Complex64::from_polar(1.0 - 1e-4, 1.0);
        let f = |z: Complex64| (1.0 - a.norm_sqr()).powi(2) / (Complex64::new(1.0, 0.0) - a.conj() * z).norm_sqr().powi(2);
        let est = integrate(&f, disc_partition(8), &[Hint::at(a, 2.5e-5)], &Options::tol(1e-9, 1e-9)).unwrap();
        assert!((est.value - 1.0).abs() < 1e-8, "{est:?}");
    }
}
