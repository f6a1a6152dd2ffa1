//! The K-functional `K(t, x) = inf { ‖x0‖_{X0} + t‖x1‖_{X1} : x0 + x1 = x }`
//! of a weighted-`ℓ^r` couple, together with a brute-force grid oracle.
//!
//! Both endpoint norms are lattice norms, so any decomposition can be replaced
//! by a colinear one `x0 = s ⊙ x`, `s ∈ [0, 1]^n`, without increasing the
//! objective. The solver works in the moduli `a_i = s_i |x_i|`, minimizing
//!
//! ```text
//! F(a) = N0(a) + t · N1(m - a),    0 ≤ a ≤ m = |x|
//! ```
//!
//! When one endpoint is a weighted `ℓ^∞` the problem collapses to a convex
//! search over the level `s = ‖x1‖_{X1}`. Otherwise both norms are smoothed
//! (`|v| → sqrt(v² + μ²)`), a projected Newton iteration runs on the box for
//! a decreasing sequence of `μ`, and a final unsmoothed stage polishes the
//! result. Convergence is certified by a dual feasible functional
//! `y ∈ B_{X0*} ∩ t B_{X1*}`, whose pairing with `m` is a lower bound for `K`.

use crate::error::{check_dim, invalid, Error, Result};
use crate::space::{BanachCouple, Exponent, WeightedLrSpace};
use crate::C64;

/// Solver options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KOptions {
    /// Relative duality gap at which the solver stops.
    pub tol: f64,
    /// Cap on the total number of Newton iterations over all stages.
    pub max_iters: usize,
}

impl Default for KOptions {
    fn default() -> Self {
        KOptions {
            tol: 1e-8,
            max_iters: 4000,
        }
    }
}

/// A near-optimal decomposition `x = x0 + x1` at parameter `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub t: f64,
    pub x0: Vec<C64>,
    pub x1: Vec<C64>,
    /// `‖x0‖_{X0} + t‖x1‖_{X1}` for the returned pair.
    pub value: f64,
    /// Certified lower bound for `K(t, x)`.
    pub lower_bound: f64,
}

impl Decomposition {
    pub fn gap(&self) -> f64 {
        (self.value - self.lower_bound).max(0.0)
    }
}

/// Computes `K(t, x)` together with a minimizing decomposition.
pub fn k_functional(couple: &BanachCouple, x: &[C64], t: f64, opts: &KOptions) -> Result<Decomposition> {
    check_dim(couple.dim(), x.len())?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("t must be positive and finite, got {t}")));
    }
    let solver = KSolver::new(couple);
    let moduli: Vec<f64> = x.iter().map(|v| v.norm()).collect();
    let sol = solver.solve(&moduli, t, None, opts)?;
    let x0: Vec<C64> = x.iter().zip(&sol.split).map(|(v, s)| v * *s).collect();
    let x1: Vec<C64> = x.iter().zip(&x0).map(|(v, a)| v - a).collect();
    let value = couple.x0().norm_unchecked(&x0) + t * couple.x1().norm_unchecked(&x1);
    Ok(Decomposition {
        t,
        x0,
        x1,
        value,
        lower_bound: sol.lower_bound.min(value),
    })
}

/// Reusable solver bound to one couple. Solutions are returned as split
/// fractions `s ∈ [0, 1]^n` so callers can warm-start along a `t` sweep.
#[derive(Debug, Clone)]
pub(crate) struct KSolver<'a> {
    couple: &'a BanachCouple,
    t_low: f64,
    t_high: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct KSolution {
    pub split: Vec<f64>,
    pub value: f64,
    pub lower_bound: f64,
}

impl<'a> KSolver<'a> {
    pub fn new(couple: &'a BanachCouple) -> Self {
        let (t_low, t_high) = couple.k_breakpoints();
        KSolver { couple, t_low, t_high }
    }

    /// Solves the reduced problem for moduli `m`. `warm` is a previous split.
    pub fn solve(&self, m: &[f64], t: f64, warm: Option<&[f64]>, opts: &KOptions) -> Result<KSolution> {
        let n = m.len();
        let (x0, x1) = (self.couple.x0(), self.couple.x1());
        let norm0 = x0.norm_of_moduli(m);
        let norm1 = x1.norm_of_moduli(m);
        let all_in_x0 = KSolution {
            split: vec![1.0; n],
            value: norm0,
            lower_bound: norm0,
        };
        let all_in_x1 = KSolution {
            split: vec![0.0; n],
            value: t * norm1,
            lower_bound: t * norm1,
        };
        if norm0 == 0.0 || t >= self.t_high {
            return Ok(all_in_x0);
        }
        if t <= self.t_low {
            return Ok(all_in_x1);
        }
        if n == 1 {
            return Ok(if norm0 <= t * norm1 { all_in_x0 } else { all_in_x1 });
        }
        if x0.exponent() == Exponent::ONE && x1.exponent() == Exponent::ONE {
            return Ok(separable_l1(x0, x1, m, t));
        }

        let scale = m.iter().fold(0.0_f64, |a, b| a.max(*b));
        let mh: Vec<f64> = m.iter().map(|v| v / scale).collect();
        let mut sol = if x1.exponent().is_infinite() {
            sup_endpoint(x0, x1.weights(), &mh, t)
        } else if x0.exponent().is_infinite() {
            // K(t, x; X0, X1) = t K(1/t, x; X1, X0).
            let mut s = sup_endpoint(x1, x0.weights(), &mh, 1.0 / t);
            s.split.iter_mut().for_each(|v| *v = 1.0 - *v);
            s.value *= t;
            s.lower_bound *= t;
            s
        } else {
            ReducedProblem::new(x0, x1, &mh, t).minimize(warm, opts)?
        };
        let gap = sol.value - sol.lower_bound;
        if gap > opts.tol * sol.value {
            return Err(Error::NotConverged {
                iterations: opts.max_iters,
                best_value: sol.value * scale,
                gap: gap * scale,
            });
        }
        sol.value *= scale;
        sol.lower_bound *= scale;
        Ok(sol)
    }
}

/// `ℓ¹/ℓ¹` couples split coordinatewise: `K = Σ_i min(w0_i, t w1_i) m_i`.
fn separable_l1(x0: &WeightedLrSpace, x1: &WeightedLrSpace, m: &[f64], t: f64) -> KSolution {
    let mut split = Vec::with_capacity(m.len());
    let mut value = 0.0;
    for ((mi, a), b) in m.iter().zip(x0.weights()).zip(x1.weights()) {
        if *a <= t * b {
            split.push(1.0);
            value += a * mi;
        } else {
            split.push(0.0);
            value += t * b * mi;
        }
    }
    KSolution {
        split,
        value,
        lower_bound: value,
    }
}

/// Exact gradient of a finite-exponent weighted norm at `v ≥ 0`, `v ≠ 0`.
/// Coordinates with `v_i = 0` receive the one-sided limit (`w_i` for
/// `r = 1`, zero otherwise).
fn norm_gradient(space: &WeightedLrSpace, v: &[f64], grad: &mut [f64]) -> f64 {
    let nrm = space.norm_of_moduli(v);
    let r = space.exponent().value();
    for ((g, w), vi) in grad.iter_mut().zip(space.weights()).zip(v) {
        *g = if r == 1.0 {
            *w
        } else if nrm > 0.0 {
            w * (w * vi / nrm).powf(r - 1.0)
        } else {
            0.0
        };
    }
    nrm
}

/// `K` when `X1` is a weighted `ℓ^∞`. For a fixed level `s = ‖x1‖_{X1}` the
/// smallest admissible `X0` part is `a_i = (m_i - s / w1_i)_+`, and `X0` is a
/// lattice norm, so `K = min_s N0(a(s)) + t s`, a convex problem in one
/// variable solved by bisection on the sign of a subgradient.
fn sup_endpoint(x0: &WeightedLrSpace, w1: &[f64], m: &[f64], t: f64) -> KSolution {
    let n = m.len();
    let levels = |s: f64, a: &mut [f64]| {
        for i in 0..n {
            a[i] = (m[i] - s / w1[i]).max(0.0);
        }
    };
    let top = (0..n).map(|i| m[i] * w1[i]).fold(0.0, f64::max);
    let mut a = vec![0.0; n];
    let mut g = vec![0.0; n];
    let w0 = x0.weights();
    let sup0 = x0.exponent().is_infinite();
    let slope = |s: f64, a: &mut [f64], g: &mut [f64]| -> f64 {
        levels(s, a);
        if sup0 {
            // Right derivative of the max of the decreasing pieces.
            let v = (0..n).map(|i| w0[i] * a[i]).fold(0.0, f64::max);
            if v == 0.0 {
                return t;
            }
            let rate = (0..n)
                .filter(|&i| w0[i] * a[i] >= v * (1.0 - 1e-15))
                .map(|i| w0[i] / w1[i])
                .fold(f64::INFINITY, f64::min);
            t - rate
        } else {
            if a.iter().all(|v| *v == 0.0) {
                return t;
            }
            norm_gradient(x0, a, g);
            t - (0..n).filter(|&i| a[i] > 0.0).map(|i| g[i] / w1[i]).sum::<f64>()
        }
    };
    let (mut lo, mut hi) = (0.0, top);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid, &mut a, &mut g) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let value_at = |s: f64, a: &mut [f64]| {
        levels(s, a);
        x0.norm_of_moduli(a) + t * s
    };
    let (s, value) = [0.0, lo, hi, top]
        .into_iter()
        .map(|s| (s, value_at(s, &mut a)))
        .fold((0.0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
    levels(s, &mut a);

    let lower_bound = if sup0 {
        two_sup_dual(w0, w1, m, t)
    } else {
        sup_endpoint_dual(x0, w1, m, &a, t)
    };
    let split = a
        .iter()
        .zip(m)
        .map(|(a, m)| if *m > 0.0 { (a / m).clamp(0.0, 1.0) } else { 1.0 })
        .collect();
    KSolution {
        split,
        value,
        lower_bound: lower_bound.min(value),
    }
}

/// Dual certificate for `sup_endpoint` with a finite-exponent `X0`: the
/// gradient of `N0` on the support of `a`, topped up on kink coordinates so
/// that `Σ y_i / w1_i` reaches `t`.
fn sup_endpoint_dual(x0: &WeightedLrSpace, w1: &[f64], m: &[f64], a: &[f64], t: f64) -> f64 {
    let n = m.len();
    let mut g = vec![0.0; n];
    norm_gradient(x0, a, &mut g);
    let mut best = 0.0_f64;
    for rel in [0.0, 1e-12, 1e-9] {
        let mut y = vec![0.0; n];
        let mut kinks = Vec::new();
        for i in 0..n {
            if a[i] > rel * m[i] {
                y[i] = g[i];
            } else if m[i] > 0.0 {
                kinks.push(i);
            }
        }
        let mut budget = t - (0..n).map(|i| y[i] / w1[i]).sum::<f64>();
        kinks.sort_by(|&i, &k| (m[k] * w1[k]).total_cmp(&(m[i] * w1[i])));
        // At an exact kink the gradient can vanish while the optimal dual
        // entry does not, so also search the leading kink's share of the
        // remaining budget.
        if let (Some(&k), true) = (kinks.first(), budget > 0.0) {
            let with = |lambda: f64| {
                let mut z = y.clone();
                z[k] = lambda * budget * w1[k];
                scaled_pairing(x0, w1, m, &z, t)
            };
            best = best.max(golden_max(with, 0.0, 1.0, 80)).max(with(1.0));
        }
        for k in kinks {
            if budget <= 0.0 {
                break;
            }
            y[k] = g[k].min(budget * w1[k]);
            budget -= y[k] / w1[k];
        }
        best = best.max(scaled_pairing(x0, w1, m, &y, t));
    }
    // Everything in X1: a multiple of a coordinate functional.
    for k in 0..n {
        let mut y = vec![0.0; n];
        y[k] = t * w1[k];
        best = best.max(scaled_pairing(x0, w1, m, &y, t));
    }
    best
}

/// Largest value of a unimodal `f` on `[lo, hi]` seen by golden-section
/// search, endpoints included.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut best = f(lo).max(f(hi));
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..iters {
        best = best.max(fa).max(fb);
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        }
    }
    best.max(fa).max(fb)
}

/// `⟨m, y⟩` after scaling `y ≥ 0` into `B_{X0*} ∩ t B_{X1*}` with `X1` a
/// weighted `ℓ^∞`.
fn scaled_pairing(x0: &WeightedLrSpace, w1: &[f64], m: &[f64], y: &[f64], t: f64) -> f64 {
    let d0 = x0.dual_norm_of_moduli(y);
    let d1 = y.iter().zip(w1).map(|(y, w)| y / w).sum::<f64>() / t;
    let c = d0.max(d1);
    if !(c > 0.0 && c.is_finite()) {
        return 0.0;
    }
    m.iter().zip(y).map(|(m, y)| m * y).sum::<f64>() / c
}

/// Exact dual value for the `ℓ^∞/ℓ^∞` couple: a linear program with two
/// constraints, maximized over its vertices (at most two nonzero entries).
fn two_sup_dual(w0: &[f64], w1: &[f64], m: &[f64], t: f64) -> f64 {
    let n = m.len();
    let mut best = 0.0_f64;
    for i in 0..n {
        best = best.max(m[i] * w0[i].min(t * w1[i]));
        for j in i + 1..n {
            // y_i / w0_i + y_j / w0_j = 1, y_i / w1_i + y_j / w1_j = t.
            let (a11, a12, a21, a22) = (1.0 / w0[i], 1.0 / w0[j], 1.0 / w1[i], 1.0 / w1[j]);
            let det = a11 * a22 - a12 * a21;
            if det.abs() <= 1e-14 * (a11 * a22).abs().max((a12 * a21).abs()) {
                continue;
            }
            let yi = (a22 - a12 * t) / det;
            let yj = (a11 * t - a21) / det;
            if yi >= 0.0 && yj >= 0.0 {
                let y = [yi, yj];
                let d0 = y[0] * a11 + y[1] * a12;
                let d1 = (y[0] * a21 + y[1] * a22) / t;
                let c = d0.max(d1).max(1.0);
                best = best.max((m[i] * yi + m[j] * yj) / c);
            }
        }
    }
    best
}

/// Smoothed weighted `ℓ^r` norm (`r` finite) on the nonnegative orthant.
struct SmoothNorm<'a> {
    w: &'a [f64],
    r: f64,
}

impl SmoothNorm<'_> {
    /// Value, gradient and (optionally) Hessian at `v ≥ 0` with each
    /// coordinate modulus replaced by `sqrt((w v)² + mu²)`. With `mu = 0` the
    /// exact norm is used.
    fn eval(&self, v: &[f64], mu: f64, grad: &mut [f64], hess: Option<&mut [f64]>) -> f64 {
        let n = v.len();
        let mut u = vec![0.0; n];
        let mut du = vec![0.0; n];
        let mut ddu = vec![0.0; n];
        for i in 0..n {
            let wv = self.w[i] * v[i].max(0.0);
            if mu > 0.0 {
                let ui = wv.hypot(mu);
                u[i] = ui;
                du[i] = self.w[i] * wv / ui;
                ddu[i] = self.w[i] * self.w[i] * mu * mu / (ui * ui * ui);
            } else {
                u[i] = wv;
                du[i] = self.w[i];
            }
        }
        let umax = u.iter().fold(0.0_f64, |a, b| a.max(*b));
        if umax == 0.0 {
            grad.iter_mut().for_each(|g| *g = 0.0);
            if let Some(h) = hess {
                h.iter_mut().for_each(|x| *x = 0.0);
            }
            return 0.0;
        }
        let r = self.r;
        let s: f64 = u.iter().map(|ui| (ui / umax).powf(r)).sum();
        let nrm = umax * s.powf(1.0 / r);
        // c_i = (u_i / N)^{r-1}
        let c: Vec<f64> = u
            .iter()
            .map(|ui| if r == 1.0 { 1.0 } else { (ui / nrm).powf(r - 1.0) })
            .collect();
        for i in 0..n {
            grad[i] = c[i] * du[i];
        }
        if let Some(h) = hess {
            for i in 0..n {
                for k in 0..n {
                    let mut huk = -c[i] * c[k];
                    if i == k && u[i] > 0.0 {
                        huk += c[i] * nrm / u[i];
                    }
                    let mut val = (r - 1.0) / nrm * huk * du[i] * du[k];
                    if i == k {
                        val += c[i] * ddu[i];
                    }
                    h[i * n + k] = val;
                }
            }
        }
        nrm
    }
}

/// The reduced box problem for two finite exponents, moduli normalized to
/// `max m_i = 1`.
struct ReducedProblem<'a> {
    n0: SmoothNorm<'a>,
    n1: SmoothNorm<'a>,
    x0: &'a WeightedLrSpace,
    x1: &'a WeightedLrSpace,
    m: &'a [f64],
    t: f64,
}

/// Work buffers for one objective evaluation.
struct Work {
    b: Vec<f64>,
    g0: Vec<f64>,
    g1: Vec<f64>,
    h0: Vec<f64>,
    h1: Vec<f64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Work {
            b: vec![0.0; n],
            g0: vec![0.0; n],
            g1: vec![0.0; n],
            h0: vec![0.0; n * n],
            h1: vec![0.0; n * n],
        }
    }
}

impl<'a> ReducedProblem<'a> {
    fn new(x0: &'a WeightedLrSpace, x1: &'a WeightedLrSpace, m: &'a [f64], t: f64) -> Self {
        ReducedProblem {
            n0: SmoothNorm {
                w: x0.weights(),
                r: x0.exponent().value(),
            },
            n1: SmoothNorm {
                w: x1.weights(),
                r: x1.exponent().value(),
            },
            x0,
            x1,
            m,
            t,
        }
    }

    fn exact_value(&self, a: &[f64]) -> f64 {
        let b: Vec<f64> = self.m.iter().zip(a).map(|(m, a)| (m - a).max(0.0)).collect();
        self.x0.norm_of_moduli(a) + self.t * self.x1.norm_of_moduli(&b)
    }

    /// Smoothed objective; fills gradient and Hessian when requested.
    fn objective(&self, a: &[f64], mu: (f64, f64), work: &mut Work, grad: &mut [f64], hess: Option<&mut [f64]>) -> f64 {
        let n = a.len();
        for i in 0..n {
            work.b[i] = (self.m[i] - a[i]).max(0.0);
        }
        let want_hess = hess.is_some();
        let f0 = self
            .n0
            .eval(a, mu.0, &mut work.g0, want_hess.then_some(&mut work.h0[..]));
        let f1 = self
            .n1
            .eval(&work.b, mu.1, &mut work.g1, want_hess.then_some(&mut work.h1[..]));
        for i in 0..n {
            grad[i] = work.g0[i] - self.t * work.g1[i];
        }
        if let Some(h) = hess {
            for k in 0..n * n {
                h[k] = work.h0[k] + self.t * work.h1[k];
            }
        }
        f0 + self.t * f1
    }

    /// Dual lower bound from the endpoint gradients at `a`: `min(g0, t g1)`
    /// lies in both dual balls and pairs with `m` to the primal value at a
    /// stationary point.
    fn dual_bound(&self, a: &[f64], mu: (f64, f64), work: &mut Work) -> f64 {
        let n = a.len();
        let mut grad = vec![0.0; n];
        self.objective(a, mu, work, &mut grad, None);
        let mut best = 0.0_f64;
        for (g0, g1) in [(&work.g0, &work.g1)] {
            let mixed: Vec<f64> = (0..n).map(|i| g0[i].min(self.t * g1[i]).max(0.0)).collect();
            let only0: Vec<f64> = g0.iter().map(|v| v.max(0.0)).collect();
            let only1: Vec<f64> = g1.iter().map(|v| (self.t * v).max(0.0)).collect();
            for y in [mixed, only0, only1] {
                best = best.max(self.pair_feasible(&y));
            }
        }
        best
    }

    /// `⟨m, y⟩` after scaling `y` into `B_{X0*} ∩ t B_{X1*}`.
    fn pair_feasible(&self, y: &[f64]) -> f64 {
        let d0 = self.x0.dual_norm_of_moduli(y);
        let d1 = self.x1.dual_norm_of_moduli(y) / self.t;
        let c = d0.max(d1);
        if !(c > 0.0 && c.is_finite()) {
            return 0.0;
        }
        let pairing: f64 = self.m.iter().zip(y).map(|(m, y)| m * y).sum();
        pairing / c
    }

    fn initial_point(&self, warm: Option<&[f64]>) -> Vec<f64> {
        let n = self.m.len();
        let mut best: Vec<f64> = self.m.to_vec();
        let mut best_val = self.exact_value(&best);
        let zero = vec![0.0; n];
        let v = self.exact_value(&zero);
        if v < best_val {
            best = zero;
            best_val = v;
        }
        if let Some(s) = warm {
            let a: Vec<f64> = s.iter().zip(self.m).map(|(s, m)| s.clamp(0.0, 1.0) * m).collect();
            let v = self.exact_value(&a);
            if v < best_val {
                best = a;
                best_val = v;
            }
        }
        // Coarse colinear sweep, one coordinate at a time.
        const STEPS: usize = 8;
        for _ in 0..2 {
            for i in 0..n {
                let mut local_best = (best[i], best_val);
                for k in 0..=STEPS {
                    best[i] = self.m[i] * k as f64 / STEPS as f64;
                    let v = self.exact_value(&best);
                    if v < local_best.1 {
                        local_best = (best[i], v);
                    }
                }
                best[i] = local_best.0;
                best_val = local_best.1;
            }
        }
        best
    }

    fn minimize(&self, warm: Option<&[f64]>, opts: &KOptions) -> Result<KSolution> {
        let n = self.m.len();
        let mut a = self.initial_point(warm);
        let mut work = Work::new(n);
        let scale0 = self.n0.w.iter().zip(self.m).map(|(w, m)| w * m).fold(0.0, f64::max);
        let scale1 = self.n1.w.iter().zip(self.m).map(|(w, m)| w * m).fold(0.0, f64::max);

        let mut best_a = a.clone();
        let mut best_val = self.exact_value(&a);
        let mut lower = 0.0_f64;
        let mut iters = 0;
        // The last stage is unsmoothed: for finite exponents the only kinks
        // sit on the box faces, which projected Newton handles directly.
        const STAGES: [f64; 5] = [1e-2, 1e-4, 1e-6, 1e-8, 0.0];
        for &rel in STAGES.iter() {
            let mu = (rel * scale0, rel * scale1);
            iters += self.newton_stage(&mut a, mu, &mut work, opts.max_iters.saturating_sub(iters));
            let val = self.exact_value(&a);
            if val < best_val {
                best_val = val;
                best_a.copy_from_slice(&a);
            }
            lower = lower.max(self.dual_bound(&a, mu, &mut work));
            if iters >= opts.max_iters {
                break;
            }
        }
        lower = lower.max(self.dual_bound(&best_a, (0.0, 0.0), &mut work));
        let split = best_a
            .iter()
            .zip(self.m)
            .map(|(a, m)| if *m > 0.0 { (a / m).clamp(0.0, 1.0) } else { 1.0 })
            .collect();
        Ok(KSolution {
            split,
            value: best_val,
            lower_bound: lower.min(best_val),
        })
    }

    /// Projected Newton on the box `[0, m]` for a fixed smoothing level.
    /// Returns the number of iterations used.
    fn newton_stage(&self, a: &mut [f64], mu: (f64, f64), work: &mut Work, budget: usize) -> usize {
        let n = a.len();
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n * n];
        let mut trial = vec![0.0; n];
        let mut trial_grad = vec![0.0; n];
        let mut dir = vec![0.0; n];
        let mut free = vec![false; n];
        let mut iters = 0;
        let mut f = self.objective(a, mu, work, &mut grad, Some(&mut hess));
        while iters < budget {
            iters += 1;
            let mut pg = 0.0_f64;
            for i in 0..n {
                let moved = (a[i] - grad[i]).clamp(0.0, self.m[i]);
                pg = pg.max((a[i] - moved).abs());
            }
            if pg <= 1e-15 {
                break;
            }
            let eps = pg.min(1e-9);
            for i in 0..n {
                let at_low = a[i] <= eps && grad[i] > 0.0;
                let at_high = a[i] >= self.m[i] - eps && grad[i] < 0.0;
                free[i] = !(at_low || at_high) && self.m[i] > 0.0;
            }
            newton_direction(&hess, &grad, &free, &mut dir);
            // Armijo search along the projection arc.
            let mut step = 1.0;
            let mut accepted = false;
            while step > 1e-20 {
                for i in 0..n {
                    trial[i] = (a[i] + step * dir[i]).clamp(0.0, self.m[i]);
                }
                let ft = self.objective(&trial, mu, work, &mut trial_grad, None);
                let decrease: f64 = (0..n).map(|i| grad[i] * (a[i] - trial[i])).sum();
                if ft <= f - 1e-4 * decrease.max(0.0) && ft <= f {
                    accepted = ft < f;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            let moved = trial
                .iter()
                .zip(a.iter())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            a.copy_from_slice(&trial);
            f = self.objective(a, mu, work, &mut grad, Some(&mut hess));
            if moved <= 1e-16 {
                break;
            }
        }
        iters
    }
}

/// Newton step on the free coordinates, diagonally scaled gradient step on
/// the rest.
fn newton_direction(hess: &[f64], grad: &[f64], free: &[bool], dir: &mut [f64]) {
    let n = grad.len();
    let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
    for i in 0..n {
        if !free[i] {
            let d = hess[i * n + i];
            dir[i] = -grad[i] / if d > 1e-12 { d } else { 1.0 };
        }
    }
    let k = idx.len();
    if k == 0 {
        return;
    }
    let mut h = nalgebra::DMatrix::<f64>::zeros(k, k);
    let mut rhs = nalgebra::DVector::<f64>::zeros(k);
    let mut diag_max = 0.0_f64;
    for (a, &i) in idx.iter().enumerate() {
        rhs[a] = -grad[i];
        for (b, &j) in idx.iter().enumerate() {
            h[(a, b)] = hess[i * n + j];
        }
        diag_max = diag_max.max(hess[i * n + i].abs());
    }
    if !diag_max.is_finite() {
        for &i in &idx {
            dir[i] = -grad[i];
        }
        return;
    }
    let mut reg = 1e-14 * diag_max.max(1e-300);
    loop {
        let mut hr = h.clone();
        for d in 0..k {
            hr[(d, d)] += reg;
        }
        if let Some(ch) = hr.cholesky() {
            let sol = ch.solve(&rhs);
            if sol.iter().all(|v| v.is_finite()) {
                for (a, &i) in idx.iter().enumerate() {
                    dir[i] = sol[a];
                }
                return;
            }
        }
        reg *= 100.0;
        if reg > 1e12 * diag_max.max(1.0) {
            for &i in &idx {
                dir[i] = -grad[i];
            }
            return;
        }
    }
}

/// Brute-force reference value of `K(t, x)`.
///
/// Supported inputs are real vectors of dimension at most 2 (the components
/// of `x0` are gridded over `[-2‖x‖_∞, 2‖x‖_∞]`) and complex scalars (the
/// complex plane is gridded over the disc-enclosing square of radius
/// `2|x|`). After the initial grid of spacing `grid_density · 4‖x‖_∞`, the
/// search zooms around the best cell until the spacing drops below
/// `1e-12 ‖x‖_∞`. The returned value is attained by a decomposition, so it
/// upper-bounds `K`.
pub fn k_functional_oracle(couple: &BanachCouple, x: &[C64], t: f64, grid_density: f64) -> Result<f64> {
    check_dim(couple.dim(), x.len())?;
    if !(grid_density > 0.0 && grid_density < 1.0) {
        return Err(invalid("grid_density must lie in (0, 1)"));
    }
    if !(t > 0.0) {
        return Err(invalid("t must be positive"));
    }
    let n = x.len();
    let real = x.iter().all(|v| v.im == 0.0);
    let radius = 2.0 * x.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if radius == 0.0 {
        return Ok(0.0);
    }
    let objective = |x0: &[C64]| -> f64 {
        let x1: Vec<C64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
        couple.x0().norm_unchecked(x0) + t * couple.x1().norm_unchecked(&x1)
    };
    let points = (2.0 / grid_density).ceil() as usize;
    if real && n <= 2 {
        let eval = |p: &[f64]| -> f64 {
            let x0: Vec<C64> = p.iter().map(|v| C64::new(*v, 0.0)).collect();
            objective(&x0)
        };
        Ok(zoom_search(n, radius, points, &eval))
    } else if n == 1 {
        let eval = |p: &[f64]| -> f64 { objective(&[C64::new(p[0], p[1])]) };
        Ok(zoom_search(2, radius, points, &eval))
    } else {
        Err(Error::Unsupported(format!(
            "grid oracle handles real vectors of dimension <= 2 or complex scalars, got dimension {n} (real: {real})"
        )))
    }
}

/// Brute-force minimum over colinear splits `x0 = s x` of a scalar, `s ∈ [0, 1]`.
pub fn k_functional_oracle_colinear(couple: &BanachCouple, x: &[C64], t: f64, grid_density: f64) -> Result<f64> {
    check_dim(couple.dim(), x.len())?;
    if x.len() != 1 {
        return Err(Error::Unsupported("colinear oracle is one-dimensional".into()));
    }
    let eval = |p: &[f64]| -> f64 {
        let s = p[0].clamp(0.0, 1.0);
        let x0 = [x[0] * s];
        let x1 = [x[0] * (1.0 - s)];
        couple.x0().norm_unchecked(&x0) + t * couple.x1().norm_unchecked(&x1)
    };
    let points = (1.0 / grid_density).ceil() as usize;
    // Grid over [0, 1] is the box centered at 1/2 with half-width 1/2.
    let shifted = |p: &[f64]| eval(&[p[0] + 0.5]);
    Ok(zoom_search(1, 0.5, points, &shifted))
}

/// Grid search over `[-radius, radius]^dim` with repeated zooming.
fn zoom_search(dim: usize, radius: f64, points: usize, eval: &dyn Fn(&[f64]) -> f64) -> f64 {
    let mut lo = vec![-radius; dim];
    let mut hi = vec![radius; dim];
    let mut best = f64::INFINITY;
    let mut best_p = vec![0.0; dim];
    let mut pts = points.max(4);
    let mut p = vec![0.0; dim];
    loop {
        let steps: Vec<f64> = (0..dim).map(|d| (hi[d] - lo[d]) / pts as f64).collect();
        let total = (pts + 1).pow(dim as u32);
        for idx in 0..total {
            let mut rem = idx;
            for d in 0..dim {
                let k = rem % (pts + 1);
                rem /= pts + 1;
                p[d] = lo[d] + k as f64 * steps[d];
            }
            let v = eval(&p);
            if v < best {
                best = v;
                best_p.copy_from_slice(&p);
            }
        }
        let step = steps.iter().fold(0.0, |a: f64, b| a.max(*b));
        if step <= 1e-12 * radius {
            break;
        }
        for d in 0..dim {
            lo[d] = best_p[d] - 3.0 * steps[d];
            hi[d] = best_p[d] + 3.0 * steps[d];
        }
        pts = 60;
    }
    best
}
