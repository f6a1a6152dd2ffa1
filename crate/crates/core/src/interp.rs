//! The real interpolation norm `‖t ↦ t^{-θ} K(t, x)‖_{L^p(dt/t)}` on `(0, ∞)`.
//!
//! Outside the couple's breakpoints `[c_lo, c_hi]` the K-functional is exactly
//! `t‖x‖_{X1}` or `‖x‖_{X0}`, so those pieces are integrated in closed form.
//! The middle piece is sampled at `t = e^u` on a uniform `u` grid and
//! integrated by the trapezoid rule. Any part of the middle piece beyond the
//! window `|u| ≤ U` is replaced by the majorant `min(‖x‖_{X0}, t‖x‖_{X1})`
//! and reported separately as `tail_bound`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::kfunc::{KOptions, KSolver};
use crate::space::{BanachCouple, Exponent, InterpParams};
use crate::C64;

/// Quadrature options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadOptions {
    /// Half-width of the `u = log t` window; `None` selects
    /// `40 / min(θ, 1-θ) · (1 + |log(‖x‖_{X0} / ‖x‖_{X1})|)`.
    pub u_max: Option<f64>,
    /// Trapezoid step in `u`.
    pub du: f64,
    /// Relative size of the tail majorant above which the window is doubled.
    pub tail_tol: f64,
    pub k: KOptionsSer,
}

/// Serializable mirror of [`KOptions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KOptionsSer {
    pub tol: f64,
    pub max_iters: usize,
}

impl From<KOptionsSer> for KOptions {
    fn from(k: KOptionsSer) -> Self {
        KOptions {
            tol: k.tol,
            max_iters: k.max_iters,
        }
    }
}

impl From<KOptions> for KOptionsSer {
    fn from(k: KOptions) -> Self {
        KOptionsSer {
            tol: k.tol,
            max_iters: k.max_iters,
        }
    }
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            u_max: None,
            du: 0.05,
            tail_tol: 1e-9,
            k: KOptions::default().into(),
        }
    }
}

/// Result of [`real_interp_norm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpNorm {
    /// The norm, including the tail majorant.
    pub value: f64,
    /// Trapezoid contribution to `value^p` (to `value` itself for `p = ∞`).
    pub quadrature: f64,
    /// Closed-form contribution to `value^p` from the exact regions.
    pub analytic: f64,
    /// Majorant for the part of the middle region left outside the window.
    pub tail_bound: f64,
    /// Final window half-width.
    pub u_max: f64,
    /// Number of K-functional evaluations.
    pub nodes: usize,
}

/// Real interpolation norm with exponent `params.p()`.
pub fn real_interp_norm(
    couple: &BanachCouple,
    params: &InterpParams,
    x: &[C64],
    opts: &QuadOptions,
) -> Result<InterpNorm> {
    real_interp_norm_with(couple, params.theta, params.p(), x, opts)
}

/// Real interpolation norm `(X0, X1)_{θ, p}` for an explicit exponent.
pub fn real_interp_norm_with(
    couple: &BanachCouple,
    theta: f64,
    p: Exponent,
    x: &[C64],
    opts: &QuadOptions,
) -> Result<InterpNorm> {
    check_dim(couple.dim(), x.len())?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid(format!("theta must lie in (0, 1), got {theta}")));
    }
    if !(opts.du > 0.0 && opts.du.is_finite()) || !(opts.tail_tol > 0.0) {
        return Err(invalid("quadrature step and tail tolerance must be positive"));
    }
    let moduli: Vec<f64> = x.iter().map(|v| v.norm()).collect();
    let n0 = couple.x0().norm_of_moduli(&moduli);
    let n1 = couple.x1().norm_of_moduli(&moduli);
    if n0 == 0.0 {
        return Ok(InterpNorm {
            value: 0.0,
            quadrature: 0.0,
            analytic: 0.0,
            tail_bound: 0.0,
            u_max: 0.0,
            nodes: 0,
        });
    }
    let solver = KSolver::new(couple);
    let (c_lo, c_hi) = couple.k_breakpoints();
    let (l_lo, l_hi) = (c_lo.ln(), c_hi.ln());
    let mut u_max = opts
        .u_max
        .unwrap_or_else(|| 40.0 / theta.min(1.0 - theta) * (1.0 + (n0 / n1).ln().abs()));
    let kopts: KOptions = opts.k.into();
    let profile = Profile { theta, n0, n1 };
    for _ in 0..8 {
        let a = l_lo.max(-u_max);
        let b = l_hi.min(u_max);
        let mut out = if p.is_infinite() {
            sup_norm(&solver, &moduli, &profile, (l_lo, l_hi), (a, b), opts.du, &kopts)?
        } else {
            lp_norm(
                &solver,
                &moduli,
                &profile,
                p.value(),
                (l_lo, l_hi),
                (a, b),
                opts.du,
                &kopts,
            )?
        };
        out.u_max = u_max;
        let reference = if p.is_infinite() {
            out.value
        } else {
            out.value.powf(p.value())
        };
        if out.tail_bound <= opts.tail_tol * reference {
            return Ok(out);
        }
        u_max *= 2.0;
    }
    Err(Error::Internal(
        "tail majorant did not fall below tolerance after enlarging the window".into(),
    ))
}

/// Closed-form pieces of `t^{-θ} min(‖x‖_{X0}, t‖x‖_{X1})`.
struct Profile {
    theta: f64,
    n0: f64,
    n1: f64,
}

impl Profile {
    /// `∫_{e^a}^{e^b} (t^{1-θ} n1)^p dt/t`.
    fn linear_part(&self, p: f64, a: f64, b: f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        let k = (1.0 - self.theta) * p;
        self.n1.powf(p) * (exp_diff(k * b, k * a)) / k
    }

    /// `∫_{e^a}^{e^b} (t^{-θ} n0)^p dt/t`.
    fn constant_part(&self, p: f64, a: f64, b: f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        let k = self.theta * p;
        self.n0.powf(p) * exp_diff(-k * a, -k * b) / k
    }

    /// Integral of the majorant to the `p`-th power over `[a, b]` in `u`.
    fn majorant_part(&self, p: f64, a: f64, b: f64) -> f64 {
        // Rounding can leave an empty interval with `b` an ulp below `a`.
        if b <= a {
            return 0.0;
        }
        let cross = (self.n0 / self.n1).ln();
        let mid = cross.clamp(a, b);
        self.linear_part(p, a, mid) + self.constant_part(p, mid, b)
    }

    fn majorant_sup(&self, u: f64) -> f64 {
        let t = u.exp();
        t.powf(-self.theta) * self.n0.min(t * self.n1)
    }
}

/// `e^x - e^y` for `x ≥ y`, accepting `x = +∞`-free arguments including
/// `y = -∞`.
fn exp_diff(x: f64, y: f64) -> f64 {
    if y == f64::NEG_INFINITY {
        return x.exp();
    }
    y.exp() * (x - y).exp_m1()
}

#[allow(clippy::too_many_arguments)]
fn lp_norm(
    solver: &KSolver,
    m: &[f64],
    profile: &Profile,
    p: f64,
    (l_lo, l_hi): (f64, f64),
    (a, b): (f64, f64),
    du: f64,
    kopts: &KOptions,
) -> Result<InterpNorm> {
    let theta = profile.theta;
    // Exact regions: (0, c_lo] and [c_hi, ∞).
    let mut analytic = profile.linear_part(p, f64::NEG_INFINITY, l_lo);
    if l_hi.is_finite() {
        analytic += profile.constant_part(p, l_hi, f64::INFINITY);
    }
    let mut quadrature = 0.0;
    let mut nodes = 0;
    if b > a {
        let cells = ((b - a) / du).ceil().max(1.0) as usize;
        let h = (b - a) / cells as f64;
        let mut warm: Option<Vec<f64>> = None;
        for k in 0..=cells {
            let u = a + k as f64 * h;
            let sol = solver.solve(m, u.exp(), warm.as_deref(), kopts)?;
            let f = ((-theta * u).exp() * sol.value).powf(p);
            let weight = if k == 0 || k == cells { 0.5 } else { 1.0 };
            quadrature += weight * h * f;
            warm = Some(sol.split);
            nodes += 1;
        }
    }
    let tail_bound = if b > a {
        profile.majorant_part(p, l_lo, a) + profile.majorant_part(p, b, l_hi)
    } else {
        // Window misses the middle region entirely.
        profile.majorant_part(p, l_lo, l_hi)
    };
    Ok(InterpNorm {
        value: (analytic + quadrature + tail_bound).powf(1.0 / p),
        quadrature,
        analytic,
        tail_bound,
        u_max: 0.0,
        nodes,
    })
}

fn sup_norm(
    solver: &KSolver,
    m: &[f64],
    profile: &Profile,
    (l_lo, l_hi): (f64, f64),
    (a, b): (f64, f64),
    du: f64,
    kopts: &KOptions,
) -> Result<InterpNorm> {
    let theta = profile.theta;
    // t^{1-θ} n1 increases up to c_lo, t^{-θ} n0 decreases past c_hi.
    let mut analytic = 0.0_f64;
    if l_lo.is_finite() {
        analytic = analytic.max((l_lo * (1.0 - theta)).exp() * profile.n1);
    }
    if l_hi.is_finite() {
        analytic = analytic.max((-theta * l_hi).exp() * profile.n0);
    }
    let mut nodes = 0;
    let mut quadrature = 0.0_f64;
    if b > a {
        let cells = ((b - a) / du).ceil().max(1.0) as usize;
        let h = (b - a) / cells as f64;
        let mut warm: Option<Vec<f64>> = None;
        let mut best = (a, 0.0_f64);
        for k in 0..=cells {
            let u = a + k as f64 * h;
            let sol = solver.solve(m, u.exp(), warm.as_deref(), kopts)?;
            let f = (-theta * u).exp() * sol.value;
            if f > best.1 {
                best = (u, f);
            }
            warm = Some(sol.split);
            nodes += 1;
        }
        quadrature = best.1;
        // Golden-section polish around the best node.
        let eval = |u: f64| -> Result<f64> { Ok((-theta * u).exp() * solver.solve(m, u.exp(), None, kopts)?.value) };
        let (mut lo, mut hi) = ((best.0 - h).max(a), (best.0 + h).min(b));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut c, mut d) = (hi - g * (hi - lo), lo + g * (hi - lo));
        let (mut fc, mut fd) = (eval(c)?, eval(d)?);
        nodes += 2;
        for _ in 0..60 {
            if fc > fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - g * (hi - lo);
                fc = eval(c)?;
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + g * (hi - lo);
                fd = eval(d)?;
            }
            nodes += 1;
            if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
                break;
            }
        }
        quadrature = quadrature.max(fc).max(fd);
    }
    let grid_sup = analytic.max(quadrature);
    // Unresolved pieces of the middle region are bounded by the majorant
    // evaluated at their closest point to the crossing.
    let cross = (profile.n0 / profile.n1).ln();
    let mut tail = 0.0_f64;
    for (lo, hi) in [(l_lo, a.min(l_hi)), (b.max(l_lo), l_hi)] {
        if hi > lo {
            tail = tail.max(profile.majorant_sup(cross.clamp(lo, hi)));
        }
    }
    let tail_bound = (tail - grid_sup).max(0.0);
    Ok(InterpNorm {
        value: grid_sup + tail_bound,
        quadrature,
        analytic,
        tail_bound,
        u_max: 0.0,
        nodes,
    })
}

/// Samples `K(t, x)` along `ts`, reusing each split as the next warm start.
pub fn k_curve(couple: &BanachCouple, x: &[C64], ts: &[f64], opts: &KOptions) -> Result<Vec<f64>> {
    check_dim(couple.dim(), x.len())?;
    if let Some(t) = ts.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(invalid(format!("t must be positive and finite, got {t}")));
    }
    let solver = KSolver::new(couple);
    let m: Vec<f64> = x.iter().map(|v| v.norm()).collect();
    let mut warm: Option<Vec<f64>> = None;
    let mut out = Vec::with_capacity(ts.len());
    for &t in ts {
        let sol = solver.solve(&m, t, warm.as_deref(), opts)?;
        out.push(sol.value);
        warm = Some(sol.split);
    }
    Ok(out)
}

/// The closed form for a one-dimensional couple with weights `(a, b)` and
/// `x = 1`: `a^{1-θ} b^θ (1/((1-θ)p) + 1/(θp))^{1/p}`.
pub fn scalar_interp_norm(a: f64, b: f64, theta: f64, p: Exponent) -> f64 {
    let base = a.powf(1.0 - theta) * b.powf(theta);
    if p.is_infinite() {
        base
    } else {
        let p = p.value();
        base * (1.0 / ((1.0 - theta) * p) + 1.0 / (theta * p)).powf(1.0 / p)
    }
}
