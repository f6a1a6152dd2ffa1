//! Analytic operator families on the strip, their boundary Fourier
//! multipliers, and the Stein interpolation bound
//! `‖T(θ)‖ ≲ M0^{1-θ} M1^θ`.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::fourier::{dual_step, fourier_forward, fourier_forward_onto, fourier_inverse, FourierPath, Spectrum};
use crate::grid::GridFunction;
use crate::interp::{real_interp_norm_with, QuadOptions};
use crate::mean::{minimize_mean_norm, MeanGrid, MeanOptions};
use crate::opnorm::{operator_norm_upper, random_vector, CMatrix, NormSampler};
use crate::space::{BanachCouple, Exponent, InterpParams, WeightedLrSpace};
use crate::strip::{grid_lp_norm, strip_eval, StripFunction};
use crate::C64;

/// How `T(z)` is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyKind {
    /// `diag(w0^{1-z} w1^z)`.
    WeightedMultiplier { w0: Vec<f64>, w1: Vec<f64> },
    /// `e^{(z-θ)²} λ R(λ, A)` with `λ = s e^{i(σ0 + (σ1-σ0) z)}`.
    Resolvent {
        a: CMatrix,
        s: f64,
        sigma0: f64,
        sigma1: f64,
    },
    /// Polynomial through `(nodes[k], values[k])` in barycentric form.
    Tabulated {
        nodes: Vec<C64>,
        values: Vec<CMatrix>,
        bary: Vec<C64>,
    },
}

/// An analytic family `z ↦ T(z)` of `rows × cols` matrices on the closed
/// strip, anchored at `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorFamily {
    kind: FamilyKind,
    theta: f64,
    factor: C64,
    rows: usize,
    cols: usize,
}

/// Residual allowed in the Cauchy check of tabulated families.
pub const CAUCHY_TOL: f64 = 1e-6;

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("θ must lie in (0,1), got {theta}")))
    }
}

impl OperatorFamily {
    pub fn weighted(w0: Vec<f64>, w1: Vec<f64>, theta: f64) -> Result<Self> {
        check_theta(theta)?;
        check_dim(w0.len(), w1.len())?;
        if w0.is_empty() || w0.iter().chain(&w1).any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(invalid("weights must be finite and positive"));
        }
        let n = w0.len();
        Ok(OperatorFamily {
            kind: FamilyKind::WeightedMultiplier { w0, w1 },
            theta,
            factor: C64::new(1.0, 0.0),
            rows: n,
            cols: n,
        })
    }

    pub fn resolvent(a: CMatrix, s: f64, sigma0: f64, sigma1: f64, theta: f64) -> Result<Self> {
        check_theta(theta)?;
        if !a.is_square() || a.nrows() == 0 {
            return Err(invalid("resolvent family needs a nonempty square matrix"));
        }
        if !(s > 0.0 && s.is_finite()) || !sigma0.is_finite() || !sigma1.is_finite() {
            return Err(invalid("resolvent family needs s > 0 and finite angles"));
        }
        let n = a.nrows();
        Ok(OperatorFamily {
            kind: FamilyKind::Resolvent { a, s, sigma0, sigma1 },
            theta,
            factor: C64::new(1.0, 0.0),
            rows: n,
            cols: n,
        })
    }

    /// Interpolating polynomial through the table. Fails unless the mean
    /// value over a circle around the nodes reproduces the center value to
    /// [`CAUCHY_TOL`] relative.
    pub fn tabulated(nodes: Vec<C64>, values: Vec<CMatrix>, theta: f64) -> Result<Self> {
        check_theta(theta)?;
        if nodes.is_empty() || nodes.len() != values.len() {
            return Err(invalid("table needs matching nonempty node and value lists"));
        }
        let (rows, cols) = values[0].shape();
        if values.iter().any(|v| v.shape() != (rows, cols)) || rows == 0 || cols == 0 {
            return Err(invalid("table values must share one nonempty shape"));
        }
        for (i, a) in nodes.iter().enumerate() {
            if nodes[..i].iter().any(|b| (a - b).norm() == 0.0) {
                return Err(invalid("table nodes must be distinct"));
            }
        }
        let bary: Vec<C64> = (0..nodes.len())
            .map(|k| {
                let mut p = C64::new(1.0, 0.0);
                for (i, z) in nodes.iter().enumerate() {
                    if i != k {
                        p *= nodes[k] - z;
                    }
                }
                1.0 / p
            })
            .collect();
        let fam = OperatorFamily {
            kind: FamilyKind::Tabulated { nodes, values, bary },
            theta,
            factor: C64::new(1.0, 0.0),
            rows,
            cols,
        };
        let residual = fam.cauchy_residual();
        if !(residual <= CAUCHY_TOL) {
            return Err(invalid(format!(
                "tabulated family fails the Cauchy check: residual {residual:e} > {CAUCHY_TOL:e}"
            )));
        }
        Ok(fam)
    }

    /// `λ T`.
    pub fn scaled(&self, lambda: C64) -> Self {
        OperatorFamily {
            factor: self.factor * lambda,
            ..self.clone()
        }
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn eval_unchecked(&self, z: C64) -> Result<CMatrix> {
        let out = match &self.kind {
            FamilyKind::WeightedMultiplier { w0, w1 } => {
                let d: Vec<C64> = w0
                    .iter()
                    .zip(w1)
                    .map(|(a, b)| ((1.0 - z) * a.ln() + z * b.ln()).exp())
                    .collect();
                CMatrix::from_diagonal(&DVector::from_vec(d))
            }
            FamilyKind::Resolvent { a, s, sigma0, sigma1 } => {
                let lambda = C64::from_polar(*s, 0.0) * (C64::i() * (sigma0 + (sigma1 - sigma0) * z)).exp();
                let damp = ((z - self.theta) * (z - self.theta)).exp();
                resolvent(a, lambda)? * (damp * lambda)
            }
            FamilyKind::Tabulated { nodes, values, bary } => {
                if let Some(k) = nodes.iter().position(|n| *n == z) {
                    values[k].clone()
                } else {
                    let mut num = CMatrix::zeros(self.rows, self.cols);
                    let mut den = C64::new(0.0, 0.0);
                    for ((n, v), b) in nodes.iter().zip(values).zip(bary) {
                        let c = b / (z - n);
                        num += v * c;
                        den += c;
                    }
                    num / den
                }
            }
        };
        Ok(out * self.factor)
    }

    /// `max |T(c) - mean_φ T(c + ρ e^{iφ})| / max |T|` on the circle through
    /// the outermost node, with 64 trapezoid nodes.
    fn cauchy_residual(&self) -> f64 {
        let FamilyKind::Tabulated { nodes, .. } = &self.kind else {
            return 0.0;
        };
        let c = nodes.iter().sum::<C64>() / nodes.len() as f64;
        let rho = nodes.iter().map(|z| (z - c).norm()).fold(0.0, f64::max).max(0.25);
        let n = 64;
        let mut mean = CMatrix::zeros(self.rows, self.cols);
        let mut scale: f64 = 0.0;
        for k in 0..n {
            let z = c + C64::from_polar(rho, 2.0 * PI * k as f64 / n as f64);
            let Ok(v) = self.eval_unchecked(z) else {
                return f64::INFINITY;
            };
            scale = scale.max(v.iter().map(|e| e.norm()).fold(0.0, f64::max));
            mean += v * C64::new(1.0 / n as f64, 0.0);
        }
        let Ok(center) = self.eval_unchecked(c) else {
            return f64::INFINITY;
        };
        (center - mean).iter().map(|e| e.norm()).fold(0.0, f64::max) / scale.max(f64::MIN_POSITIVE)
    }
}

/// `(λ - A)^{-1}`, rejecting spectral points.
pub fn resolvent(a: &CMatrix, lambda: C64) -> Result<CMatrix> {
    let n = a.nrows();
    let shifted = CMatrix::identity(n, n) * lambda - a;
    let scale = shifted.iter().map(|e| e.norm()).fold(0.0, f64::max);
    let inv = shifted
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("λ = {lambda} is an eigenvalue")))?;
    let growth = inv.iter().map(|e| e.norm()).fold(0.0, f64::max) * scale;
    if !growth.is_finite() || growth > 1e14 {
        return Err(Error::Singular(format!(
            "λ = {lambda} is numerically an eigenvalue (condition {growth:.3e})"
        )));
    }
    Ok(inv)
}

/// `T(z)` for `z` in the closed strip.
pub fn family_eval(fam: &OperatorFamily, z: C64) -> Result<CMatrix> {
    if !(-1e-12..=1.0 + 1e-12).contains(&z.re) {
        return Err(invalid(format!("Re z = {} lies outside the closed strip", z.re)));
    }
    fam.eval_unchecked(z)
}

/// `T_j(ξ) = T(j + iξ)` on the nodes of `xi`.
fn symbol(fam: &OperatorFamily, j: usize, xi: &GridFunction) -> Result<Vec<CMatrix>> {
    (0..xi.len())
        .into_par_iter()
        .map(|l| family_eval(fam, C64::new(j as f64, xi.t(l))))
        .collect()
}

fn check_side(j: usize) -> Result<()> {
    if j <= 1 {
        Ok(())
    } else {
        Err(invalid(format!("boundary index must be 0 or 1, got {j}")))
    }
}

/// `(T_j ĝ)^∨ / 2π` on the grid of `gf`: forward transform, pointwise
/// symbol, inverse transform.
pub fn multiplier_apply(fam: &OperatorFamily, j: usize, gf: &GridFunction) -> Result<GridFunction> {
    check_side(j)?;
    check_dim(fam.cols, gf.dim())?;
    let spec = fourier_forward(gf)?;
    let sym = symbol(fam, j, &spec.xi)?;
    let mut out = vec![C64::new(0.0, 0.0); spec.xi.len() * fam.rows];
    for (l, t) in sym.iter().enumerate() {
        let y = t * DVector::from_column_slice(spec.xi.row(l));
        out[l * fam.rows..(l + 1) * fam.rows].copy_from_slice(y.as_slice());
    }
    let applied = Spectrum {
        xi: GridFunction::from_values(spec.xi.t0(), spec.xi.h(), fam.rows, out)?,
        t0: spec.t0,
    };
    Ok(fourier_inverse(&applied)?.scale(C64::new(1.0 / (2.0 * PI), 0.0)))
}

/// Grid and sampling for [`multiplier_norm_bounds`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierOptions {
    /// The time grid is `[-half_width, half_width)` with `m` nodes.
    pub half_width: f64,
    pub m: usize,
    /// Random smooth test inputs for the lower bound.
    pub samples: usize,
    pub seed: u64,
    /// Largest symbol norm allowed on the outer twentieth of the frequency
    /// window, relative to its maximum.
    pub tail_tol: f64,
}

impl Default for MultiplierOptions {
    fn default() -> Self {
        MultiplierOptions {
            half_width: 20.0,
            m: 1024,
            samples: 12,
            seed: 0,
            tail_tol: 1e-8,
        }
    }
}

/// Output of [`multiplier_norm_bounds`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierBounds {
    /// Largest sampled `‖(T_j ĝ)^∨/2π‖ / ‖g‖`.
    pub lower: f64,
    /// `h Σ ‖k(t_d)‖` for the discrete kernel; bounds the discrete operator
    /// by Young's inequality.
    pub upper: f64,
    /// `∫ ‖T_j‖ dξ` on the frequency grid.
    pub symbol_l1: f64,
    /// `∫ ‖T_j''‖ dξ` with Richardson-extrapolated differences.
    pub symbol_dd_l1: f64,
    /// `π · (symbol_l1 + symbol_dd_l1) / 2π`, the analytic majorant of the
    /// kernel norm.
    pub chain_bound: f64,
}

/// Finite-difference step for symbol second derivatives.
pub const SYMBOL_FD_STEP: f64 = 1e-4;

fn second_difference(fam: &OperatorFamily, j: usize, xi: f64, d: f64, center: &CMatrix) -> Result<CMatrix> {
    let plus = family_eval(fam, C64::new(j as f64, xi + d))?;
    let minus = family_eval(fam, C64::new(j as f64, xi - d))?;
    Ok((plus + minus - center * C64::new(2.0, 0.0)) * C64::new(1.0 / (d * d), 0.0))
}

/// Lower and upper bounds for the norm of `g ↦ (T_j ĝ)^∨ / 2π` from
/// `ℓ^p_h(X)` to `ℓ^q_h(Y)` on the grid of `opts`. The upper bound needs
/// `p = q`.
pub fn multiplier_norm_bounds(
    fam: &OperatorFamily,
    j: usize,
    from: &WeightedLrSpace,
    to: &WeightedLrSpace,
    p: Exponent,
    q: Exponent,
    opts: &MultiplierOptions,
) -> Result<MultiplierBounds> {
    check_side(j)?;
    check_dim(fam.cols, from.dim())?;
    check_dim(fam.rows, to.dim())?;
    if p != q {
        return Err(Error::Unsupported(format!(
            "the kernel bound needs equal exponents, got p={p}, q={q}; supply the multiplier norms directly"
        )));
    }
    if opts.m < 8 || !(opts.half_width > 0.0) {
        return Err(invalid(
            "multiplier grid needs at least 8 nodes and a positive half-width",
        ));
    }
    let m = opts.m;
    let h = 2.0 * opts.half_width / m as f64;
    let dxi = dual_step(m, h);
    let xi0 = -((m / 2) as f64) * dxi;
    let xi = GridFunction::zeros(xi0, dxi, m, 1)?;
    let sym = symbol(fam, j, &xi)?;
    let sym_norms: Vec<f64> = sym
        .iter()
        .map(|t| operator_norm_upper(t, from, to))
        .collect::<Result<_>>()?;
    let peak = sym_norms.iter().copied().fold(0.0, f64::max);
    if !matches!(fam.kind, FamilyKind::WeightedMultiplier { .. }) {
        let edge = (m / 20).max(1);
        let tail = sym_norms[..edge]
            .iter()
            .chain(&sym_norms[m - edge..])
            .copied()
            .fold(0.0, f64::max);
        if tail > opts.tail_tol * peak {
            return Err(Error::Accuracy(format!(
                "symbol norm at the edge of the frequency window is {:.3e} of its peak (limit {:e}); \
                 damp the family with e^{{(z-θ)²}} or refine the time grid",
                tail / peak,
                opts.tail_tol
            )));
        }
    }
    let symbol_l1 = dxi * sym_norms.iter().sum::<f64>();

    let d = SYMBOL_FD_STEP;
    let dd_norms: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|l| -> Result<f64> {
            let x = xi.t(l);
            let coarse = second_difference(fam, j, x, d, &sym[l])?;
            let fine = second_difference(fam, j, x, d / 2.0, &sym[l])?;
            let rich = (fine * C64::new(4.0, 0.0) - coarse) * C64::new(1.0 / 3.0, 0.0);
            operator_norm_upper(&rich, from, to)
        })
        .collect::<Result<_>>()?;
    let symbol_dd_l1 = dxi * dd_norms.iter().sum::<f64>();
    let chain_bound = PI * (symbol_l1 + symbol_dd_l1) / (2.0 * PI);

    // Kernel at lags d·h: (Δξ / 2π) Σ_l T_l e^{i d h ξ_l}.
    let (rows, cols) = (fam.rows, fam.cols);
    let mut flat = Vec::with_capacity(m * rows * cols);
    for t in &sym {
        for r in 0..rows {
            for c in 0..cols {
                flat.push(t[(r, c)]);
            }
        }
    }
    let kernel = fourier_inverse(&Spectrum {
        xi: GridFunction::from_values(xi0, dxi, rows * cols, flat)?,
        t0: 0.0,
    })?;
    let mut upper = 0.0;
    for k in 0..m {
        let mat = CMatrix::from_row_slice(rows, cols, kernel.row(k)) * C64::new(1.0 / (2.0 * PI), 0.0);
        upper += h * operator_norm_upper(&mat, from, to)?;
    }

    let mut rng = NormSampler {
        seed: opts.seed,
        ..Default::default()
    }
    .rng();
    let mut lower: f64 = 0.0;
    for _ in 0..opts.samples {
        let bumps: Vec<(Vec<C64>, f64, f64)> = (0..3)
            .map(|_| {
                let c = random_vector(&mut rng, cols);
                let mu = rng.random_range(-0.5..0.5) * opts.half_width;
                let width = rng.random_range(0.5..3.0);
                (c, mu, width)
            })
            .collect();
        let g = GridFunction::from_fn(-opts.half_width, h, m, cols, |t| {
            let mut v = vec![C64::new(0.0, 0.0); cols];
            for (c, mu, w) in &bumps {
                let e = (-(t - mu) * (t - mu) / (2.0 * w * w)).exp();
                for (a, b) in v.iter_mut().zip(c) {
                    *a += b * e;
                }
            }
            v
        })?;
        let out = multiplier_apply(fam, j, &g)?;
        let den = grid_lp_norm(&g, from, p)?;
        if den > 0.0 {
            lower = lower.max(grid_lp_norm(&out, to, q)? / den);
        }
    }
    Ok(MultiplierBounds {
        lower,
        upper,
        symbol_l1,
        symbol_dd_l1,
        chain_bound,
    })
}

/// Search controls for interpolation-space norm ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AscentOptions {
    /// Random starts besides the coordinate vectors.
    pub starts: usize,
    /// Coordinate-ascent sweeps from the best start; the step halves after
    /// each sweep.
    pub sweeps: usize,
    pub seed: u64,
    pub quad: QuadOptions,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions {
            starts: 6,
            sweeps: 3,
            seed: 0,
            quad: QuadOptions {
                du: 0.1,
                ..QuadOptions::default()
            },
        }
    }
}

/// `‖Tx‖_{(Y, θ, q)} / ‖x‖_{(X, θ, p)}`.
fn interp_ratio(
    cx: &BanachCouple,
    cy: &BanachCouple,
    params: &InterpParams,
    t: &CMatrix,
    x: &[C64],
    quad: &QuadOptions,
) -> Result<f64> {
    let den = real_interp_norm_with(cx, params.theta, params.p(), x, quad)?.value;
    if den == 0.0 {
        return Ok(0.0);
    }
    let y: Vec<C64> = (t * DVector::from_column_slice(x)).iter().copied().collect();
    if y.iter().all(|v| v.norm() == 0.0) {
        return Ok(0.0);
    }
    Ok(real_interp_norm_with(cy, params.theta, params.q(), &y, quad)?.value / den)
}

/// Coordinate ascent on `ratio` from `x`, trying `x ± δ‖x‖_∞ e_i` and
/// `x ± iδ‖x‖_∞ e_i`.
fn ascend(
    mut x: Vec<C64>,
    mut best: f64,
    sweeps: usize,
    ratio: &dyn Fn(&[C64]) -> Result<f64>,
) -> Result<(Vec<C64>, f64)> {
    let mut delta = 0.5;
    for _ in 0..sweeps {
        let scale = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for i in 0..x.len() {
            for dir in [
                C64::new(1.0, 0.0),
                C64::new(-1.0, 0.0),
                C64::new(0.0, 1.0),
                C64::new(0.0, -1.0),
            ] {
                let mut trial = x.clone();
                trial[i] += dir * (delta * scale);
                let r = ratio(&trial)?;
                if r > best {
                    best = r;
                    x = trial;
                }
            }
        }
        delta /= 2.0;
    }
    Ok((x, best))
}

fn coordinate_vectors(n: usize) -> Vec<Vec<C64>> {
    (0..n)
        .map(|i| {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[i] = C64::new(1.0, 0.0);
            e
        })
        .collect()
}

/// A lower bound for `‖T : (X0,X1)_{θ,p} → (Y0,Y1)_{θ,q}‖` from the best
/// norm ratio over coordinate vectors and random starts, refined by
/// coordinate ascent.
pub fn interp_operator_norm_lower(
    cx: &BanachCouple,
    cy: &BanachCouple,
    params: &InterpParams,
    t: &CMatrix,
    opts: &AscentOptions,
) -> Result<f64> {
    check_dim(cx.dim(), t.ncols())?;
    check_dim(cy.dim(), t.nrows())?;
    let mut rng = NormSampler {
        seed: opts.seed,
        ..Default::default()
    }
    .rng();
    let mut starts = coordinate_vectors(cx.dim());
    for _ in 0..opts.starts {
        starts.push(random_vector(&mut rng, cx.dim()));
    }
    let ratio = |x: &[C64]| interp_ratio(cx, cy, params, t, x, &opts.quad);
    let scores: Vec<f64> = starts.par_iter().map(|x| ratio(x)).collect::<Result<_>>()?;
    let (k, best) = scores.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, s)| if *s > acc.1 { (i, *s) } else { acc },
    );
    let (_, best) = ascend(starts.swap_remove(k), best, opts.sweeps, &ratio)?;
    Ok(best)
}

/// Multiplier bounds and the measured Stein constant. Serializes with
/// exactly these fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteinReport {
    pub m0_lower: f64,
    pub m0_upper: f64,
    pub m1_lower: f64,
    pub m1_upper: f64,
    /// `max_x ‖T(θ)x‖ / (M0^{1-θ} M1^θ ‖x‖)` with the lower multiplier
    /// bounds, so it never understates the constant.
    pub c_empirical: f64,
    pub samples: usize,
    pub violations: usize,
}

impl SteinReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report fields are plain numbers")
    }

    /// Parses a report, rejecting unknown or missing fields and negative or
    /// non-finite bounds.
    pub fn from_json(text: &str) -> Result<Self> {
        let r: SteinReport = serde_json::from_str(text).map_err(|e| invalid(format!("bad report: {e}")))?;
        let bounds = [r.m0_lower, r.m0_upper, r.m1_lower, r.m1_upper, r.c_empirical];
        if bounds.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("report bounds must be finite and nonnegative"));
        }
        if r.violations > r.samples {
            return Err(invalid("more violations than samples"));
        }
        Ok(r)
    }
}

/// Options for [`stein_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteinOptions {
    /// Number of sampled inputs, coordinate vectors included.
    pub samples: usize,
    pub seed: u64,
    /// Declared bound on `c_empirical` per sample.
    pub constant: f64,
    pub multiplier: MultiplierOptions,
    pub ascent: AscentOptions,
    /// Known multiplier norms, used for both bounds instead of computing
    /// them.
    pub multiplier_norms: Option<[f64; 2]>,
    /// Grid and budget for the representation used by the boundary-identity
    /// check.
    pub identity_grid: Option<MeanGrid>,
    pub identity_mean: MeanOptions,
}

impl Default for SteinOptions {
    fn default() -> Self {
        SteinOptions {
            samples: 200,
            seed: 0,
            constant: 10.0,
            multiplier: MultiplierOptions::default(),
            ascent: AscentOptions::default(),
            multiplier_norms: None,
            identity_grid: None,
            identity_mean: MeanOptions {
                max_iters: 200,
                smooth_iters: 100,
                ..MeanOptions::default()
            },
        }
    }
}

/// Output of [`stein_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct SteinOutcome {
    pub report: SteinReport,
    /// Largest `‖T(θ)x‖ / ‖x‖` before normalization by the multiplier norms.
    pub max_ratio: f64,
    /// Relative deviation in `ĥ_j(ξ) = (M0/M1)^{j-θ} (T_j f_j)^(ξ - log(M0/M1))`.
    pub boundary_identity_error: f64,
}

/// Samples `‖T(θ)x‖_{(Y,θ,q)} / ‖x‖_{(X,θ,p)}` and compares with
/// `M0^{1-θ} M1^θ`; also checks the boundary identity of
/// `h(z) = (M0/M1)^{z-θ} T(z) f(z)` on a representation of the first
/// sampled input.
pub fn stein_check(
    fam: &OperatorFamily,
    cx: &BanachCouple,
    cy: &BanachCouple,
    params: &InterpParams,
    opts: &SteinOptions,
) -> Result<SteinOutcome> {
    check_dim(cx.dim(), fam.cols)?;
    check_dim(cy.dim(), fam.rows)?;
    if (params.theta - fam.theta).abs() > 1e-12 {
        return Err(invalid(format!(
            "family anchor {} differs from params.theta {}",
            fam.theta, params.theta
        )));
    }
    if opts.samples == 0 {
        return Err(invalid("stein check needs at least one sample"));
    }
    let theta = params.theta;
    let bounds: [(f64, f64); 2] = match opts.multiplier_norms {
        Some([a, b]) => {
            if !(a > 0.0 && b > 0.0) {
                return Err(invalid("supplied multiplier norms must be positive"));
            }
            [(a, a), (b, b)]
        }
        None => {
            let mut out = [(0.0, 0.0); 2];
            for (j, o) in out.iter_mut().enumerate() {
                let b = multiplier_norm_bounds(
                    fam,
                    j,
                    cx.endpoint(j),
                    cy.endpoint(j),
                    params.p_endpoint(j),
                    params.q_endpoint(j),
                    &opts.multiplier,
                )?;
                *o = (b.lower, b.upper);
            }
            out
        }
    };
    let (m0, m1) = (bounds[0].0, bounds[1].0);
    if !(m0 > 0.0 && m1 > 0.0) {
        return Err(Error::Accuracy(
            "a multiplier lower bound vanished; add test inputs".into(),
        ));
    }
    let norm = m0.powf(1.0 - theta) * m1.powf(theta);
    let t = family_eval(fam, C64::new(theta, 0.0))?;

    let n = cx.dim();
    let mut rng = NormSampler {
        seed: opts.seed,
        ..Default::default()
    }
    .rng();
    let mut xs = coordinate_vectors(n);
    xs.truncate(opts.samples);
    while xs.len() < opts.samples {
        xs.push(random_vector(&mut rng, n));
    }
    let quad = opts.ascent.quad;
    let ratio = |x: &[C64]| interp_ratio(cx, cy, params, &t, x, &quad);
    let mut ratios: Vec<f64> = xs.par_iter().map(|x| ratio(x)).collect::<Result<_>>()?;
    let (k, best) = ratios.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, s)| if *s > acc.1 { (i, *s) } else { acc },
    );
    let (_, ascended) = ascend(xs[k].clone(), best, opts.ascent.sweeps, &ratio)?;
    ratios[k] = ascended;
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let violations = ratios.iter().filter(|r| **r / norm > opts.constant).count();

    let boundary_identity_error = boundary_identity(fam, cx, params, &xs[0], m0 / m1, opts)?;
    Ok(SteinOutcome {
        report: SteinReport {
            m0_lower: bounds[0].0,
            m0_upper: bounds[0].1,
            m1_lower: bounds[1].0,
            m1_upper: bounds[1].1,
            c_empirical: max_ratio / norm,
            samples: ratios.len(),
            violations,
        },
        max_ratio,
        boundary_identity_error,
    })
}

/// Builds `f` from a minimizing generator of `x`, samples
/// `h_j(t) = ρ^{j+it-θ} T(j+it) f(j+it)` over a full period, and compares
/// its transform with `ρ^{j-θ}` times the transform of `T_j f_j` shifted by
/// `log ρ`.
fn boundary_identity(
    fam: &OperatorFamily,
    cx: &BanachCouple,
    params: &InterpParams,
    x: &[C64],
    rho: f64,
    opts: &SteinOptions,
) -> Result<f64> {
    let theta = params.theta;
    let grid = opts.identity_grid.unwrap_or(MeanGrid {
        half_width: 10.0 / theta.min(1.0 - theta),
        h: 0.1,
    });
    let rep = minimize_mean_norm(cx, params, x, &grid, &opts.identity_mean)?;
    let g = rep.rep.gf;
    let sf = StripFunction::new(theta, g.clone())?;
    let m = g.len();
    let dt = dual_step(m, g.h());
    let t0 = -((m / 2) as f64) * dt;
    let log_rho = rho.ln();
    let mut worst: f64 = 0.0;
    for j in 0..2 {
        let rows: Vec<(Vec<C64>, Vec<C64>)> = (0..m)
            .into_par_iter()
            .map(|k| -> Result<(Vec<C64>, Vec<C64>)> {
                let z = C64::new(j as f64, t0 + k as f64 * dt);
                let f = strip_eval(&sf, z)?;
                let u: Vec<C64> = (family_eval(fam, z)? * DVector::from_vec(f)).iter().copied().collect();
                let w = ((z - theta) * log_rho).exp();
                let h: Vec<C64> = u.iter().map(|v| v * w).collect();
                Ok((h, u))
            })
            .collect::<Result<_>>()?;
        let (hs, us): (Vec<Vec<C64>>, Vec<Vec<C64>>) = rows.into_iter().unzip();
        let hg = GridFunction::from_values(t0, dt, fam.rows, hs.concat())?;
        let ug = GridFunction::from_values(t0, dt, fam.rows, us.concat())?;
        let lhs = fourier_forward_onto(&hg, g.t0(), FourierPath::Fft)?.xi;
        let rhs = fourier_forward_onto(&ug, g.t0() - log_rho, FourierPath::Fft)?.xi;
        let factor = rho.powf(j as f64 - theta);
        let scale = lhs.max_abs().max(f64::MIN_POSITIVE);
        for (a, b) in lhs.values().iter().zip(rhs.values()) {
            worst = worst.max((a - b * factor).norm() / scale);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&DVector::from_vec(d.iter().map(|v| C64::new(*v, 0.0)).collect()))
    }

    #[test]
    fn weighted_family_values() {
        let fam = OperatorFamily::weighted(vec![1.0, 4.0], vec![9.0, 1.0], 0.5).unwrap();
        let t = family_eval(&fam, C64::new(0.5, 0.0)).unwrap();
        assert!((t[(0, 0)] - 3.0).norm() < 1e-14 && (t[(1, 1)] - 2.0).norm() < 1e-14);
        let same = OperatorFamily::weighted(vec![2.0], vec![2.0], 0.3).unwrap();
        assert!((family_eval(&same, C64::new(0.7, -3.0)).unwrap()[(0, 0)] - 2.0).norm() < 1e-14);
        assert!(family_eval(&fam, C64::new(1.5, 0.0)).is_err());
    }

    #[test]
    fn resolvent_family_values() {
        let sigma = 0.9;
        let fam = OperatorFamily::resolvent(diag(&[1.0, 2.0]), 1.0, sigma, sigma, 0.5).unwrap();
        let t = family_eval(&fam, C64::new(0.5, 0.0)).unwrap();
        let l = C64::from_polar(1.0, sigma);
        for (i, a) in [1.0, 2.0].iter().enumerate() {
            assert!((t[(i, i)] - l / (l - a)).norm() < 1e-14);
        }
        let on_spectrum = OperatorFamily::resolvent(diag(&[1.0]), 1.0, 0.0, 0.0, 0.5).unwrap();
        assert!(matches!(
            family_eval(&on_spectrum, C64::new(0.5, 0.0)),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn tabulated_family_is_checked() {
        let nodes: Vec<C64> = (0..5).map(|k| C64::new(0.5, k as f64 - 2.0)).collect();
        let values: Vec<CMatrix> = nodes.iter().map(|z| CMatrix::from_element(1, 1, z * z + 1.0)).collect();
        let fam = OperatorFamily::tabulated(nodes, values, 0.5).unwrap();
        let z = C64::new(0.2, 0.3);
        assert!((family_eval(&fam, z).unwrap()[(0, 0)] - (z * z + 1.0)).norm() < 1e-12);
        assert!(OperatorFamily::tabulated(vec![C64::new(0.5, 0.0); 2], vec![CMatrix::zeros(1, 1); 2], 0.5).is_err());
    }

    #[test]
    fn identity_multiplier_round_trip() {
        let fam = OperatorFamily::weighted(vec![1.0, 1.0], vec![1.0, 1.0], 0.5).unwrap();
        let g = GridFunction::from_fn(-10.0, 0.05, 400, 2, |t| {
            vec![C64::new((-t * t).exp(), 0.0), C64::new(0.0, t.sin() / (1.0 + t * t))]
        })
        .unwrap();
        let out = multiplier_apply(&fam, 0, &g).unwrap();
        for (a, b) in out.values().iter().zip(g.values()) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn aligned_weighted_multiplier_translates() {
        let h: f64 = 0.05;
        let shift = 7.0 * h;
        // a = log(w0/w1) = 7h.
        let fam = OperatorFamily::weighted(vec![shift.exp()], vec![1.0], 0.5).unwrap();
        let g = GridFunction::from_fn(-10.0, h, 400, 1, |t| vec![C64::new((-t * t).exp(), 0.0)]).unwrap();
        for j in 0..2 {
            let out = multiplier_apply(&fam, j, &g).unwrap();
            let w = if j == 0 { shift.exp() } else { 1.0 };
            for k in 0..g.len() {
                let src = (k + g.len() - 7) % g.len();
                assert!((out.row(k)[0] - g.row(src)[0] * w).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn identity_multiplier_bounds() {
        let fam = OperatorFamily::weighted(vec![1.0], vec![1.0], 0.5).unwrap();
        let s = WeightedLrSpace::unweighted(1, Exponent::TWO).unwrap();
        let b = multiplier_norm_bounds(
            &fam,
            0,
            &s,
            &s,
            Exponent::TWO,
            Exponent::TWO,
            &MultiplierOptions::default(),
        )
        .unwrap();
        assert!((b.lower - 1.0).abs() < 1e-3 && (b.upper - 1.0).abs() < 1e-3);
    }

    #[test]
    fn weighted_isometry_lower_bound() {
        let h: f64 = 40.0 / 1024.0;
        let w0 = (5.0 * h).exp();
        let fam = OperatorFamily::weighted(vec![w0], vec![1.0], 0.5).unwrap();
        for (j, w) in [(0, w0), (1, 1.0)] {
            let from = WeightedLrSpace::new(Exponent::ONE, vec![w]).unwrap();
            let to = WeightedLrSpace::unweighted(1, Exponent::ONE).unwrap();
            let b = multiplier_norm_bounds(
                &fam,
                j,
                &from,
                &to,
                Exponent::ONE,
                Exponent::ONE,
                &MultiplierOptions::default(),
            )
            .unwrap();
            assert!((b.lower - 1.0).abs() < 1e-6, "{b:?}");
            assert!(b.lower <= b.upper * (1.0 + 1e-9));
        }
    }

    #[test]
    fn resolvent_kernel_chain() {
        let fam = OperatorFamily::resolvent(diag(&[1.0, 2.0]), 1.0, 0.6, 1.2, 0.5).unwrap();
        let s = WeightedLrSpace::unweighted(2, Exponent::TWO).unwrap();
        for j in 0..2 {
            let b = multiplier_norm_bounds(
                &fam,
                j,
                &s,
                &s,
                Exponent::TWO,
                Exponent::TWO,
                &MultiplierOptions::default(),
            )
            .unwrap();
            assert!(b.upper.is_finite() && b.lower <= b.upper * (1.0 + 1e-9), "{b:?}");
            assert!(b.upper <= b.chain_bound * (1.0 + 1e-3), "{b:?}");
        }
    }

    #[test]
    fn undamped_symbol_is_rejected() {
        // A tabulated constant family never decays.
        let nodes: Vec<C64> = (0..3).map(|k| C64::new(0.5, k as f64)).collect();
        let fam = OperatorFamily::tabulated(nodes, vec![CMatrix::identity(1, 1); 3], 0.5).unwrap();
        let s = WeightedLrSpace::unweighted(1, Exponent::TWO).unwrap();
        let r = multiplier_norm_bounds(
            &fam,
            0,
            &s,
            &s,
            Exponent::TWO,
            Exponent::TWO,
            &MultiplierOptions::default(),
        );
        assert!(matches!(r, Err(Error::Accuracy(_))));
    }

    #[test]
    fn scalar_interp_operator_ratio() {
        let (a, b, a2, b2, theta) = (1.0, 3.0, 2.0, 0.5, 0.4);
        let cx = BanachCouple::new(
            WeightedLrSpace::new(Exponent::ONE, vec![a]).unwrap(),
            WeightedLrSpace::new(Exponent::ONE, vec![b]).unwrap(),
        )
        .unwrap();
        let cy = BanachCouple::new(
            WeightedLrSpace::new(Exponent::ONE, vec![a2]).unwrap(),
            WeightedLrSpace::new(Exponent::ONE, vec![b2]).unwrap(),
        )
        .unwrap();
        let params = InterpParams::new(theta, Exponent::TWO, Exponent::TWO).unwrap();
        let d = 1.7;
        let v = interp_operator_norm_lower(&cx, &cy, &params, &diag(&[d]), &AscentOptions::default()).unwrap();
        let want = d * (a2 / a).powf(1.0 - theta) * (b2 / b).powf(theta);
        assert!((v - want).abs() < 1e-6 * want);
    }

    #[test]
    fn scalar_family_has_unit_constant() {
        let m = 2.5;
        let s = WeightedLrSpace::unweighted(2, Exponent::ONE).unwrap();
        let couple =
            BanachCouple::new(s.clone(), WeightedLrSpace::new(Exponent::TWO, vec![1.0, 3.0]).unwrap()).unwrap();
        let params = InterpParams::new(0.5, Exponent::TWO, Exponent::TWO).unwrap();
        let fam = OperatorFamily::weighted(vec![m, m], vec![m, m], 0.5).unwrap();
        let opts = SteinOptions {
            samples: 10,
            ..SteinOptions::default()
        };
        let out = stein_check(&fam, &couple, &couple, &params, &opts).unwrap();
        assert!((out.report.c_empirical - 1.0).abs() < 1e-6, "{:?}", out.report);
        assert!(out.boundary_identity_error < 1e-6);
        let scaled = stein_check(&fam.scaled(C64::new(3.0, 0.0)), &couple, &couple, &params, &opts).unwrap();
        assert!((scaled.report.c_empirical - out.report.c_empirical).abs() < 1e-9);
    }

    #[test]
    fn report_json_round_trip() {
        let r = SteinReport {
            m0_lower: 1.0,
            m0_upper: 2.0,
            m1_lower: 0.5,
            m1_upper: 0.75,
            c_empirical: 1.25,
            samples: 10,
            violations: 0,
        };
        assert_eq!(SteinReport::from_json(&r.to_json()).unwrap(), r);
        assert!(SteinReport::from_json(r#"{"m0_lower":1}"#).is_err());
        let extra = r.to_json().replace('}', r#","extra":1}"#);
        assert!(SteinReport::from_json(&extra).is_err());
    }
}
