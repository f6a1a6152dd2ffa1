//! Experiments built on the interpolation machinery: weighted `L^p`
//! identities, sectoriality angles and their interpolation, Rademacher
//! averages and analytic semigroup scans.

use std::f64::consts::PI;

use nalgebra::linalg::Schur;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::grid::GridFunction;
use crate::interp::{real_interp_norm_with, QuadOptions};
use crate::opnorm::{
    operator_norm_exact, operator_norm_lower, operator_norm_upper, random_vector, CMatrix, NormSampler,
};
use crate::space::{lr_norm, BanachCouple, Exponent, InterpParams, WeightedLrSpace};
use crate::stein::{
    family_eval, interp_operator_norm_lower, multiplier_apply, multiplier_norm_bounds, resolvent, AscentOptions,
    MultiplierOptions, OperatorFamily,
};
use crate::strip::grid_lp_norm;
use crate::C64;

/// Output of [`weighted_equivalence_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEquivalence {
    /// `‖x‖_{(ℓ^{p0}_{w0}, ℓ^{p1}_{w1})_{θ,p}} / ‖x‖_{ℓ^p_w}` per sample.
    pub ratios: Vec<f64>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `max_ratio / min_ratio`.
    pub spread: f64,
}

/// Compares the real interpolation norm of `(ℓ^{p0}_{w0}, ℓ^{p1}_{w1})` with
/// the `ℓ^p_w` norm, `w = w0^{1-θ} w1^θ`, on coordinate vectors followed by
/// random vectors.
#[allow(clippy::too_many_arguments)]
pub fn weighted_equivalence_check(
    p0: Exponent,
    p1: Exponent,
    w0: &[f64],
    w1: &[f64],
    theta: f64,
    samples: usize,
    seed: u64,
    quad: &QuadOptions,
) -> Result<WeightedEquivalence> {
    if p0.is_infinite() && p1.is_infinite() {
        return Err(invalid("the weighted identity needs (p0, p1) != (inf, inf)"));
    }
    check_dim(w0.len(), w1.len())?;
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let couple = BanachCouple::new(
        WeightedLrSpace::new(p0, w0.to_vec())?,
        WeightedLrSpace::new(p1, w1.to_vec())?,
    )?;
    let params = InterpParams::new(theta, p0, p1)?;
    let p = params.p();
    let w: Vec<f64> = w0
        .iter()
        .zip(w1)
        .map(|(a, b)| a.powf(1.0 - theta) * b.powf(theta))
        .collect();
    let target = WeightedLrSpace::new(p, w)?;
    let n = w0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec<C64>> = (0..samples)
        .map(|k| {
            if k < n {
                let mut e = vec![C64::new(0.0, 0.0); n];
                e[k] = C64::new(1.0, 0.0);
                e
            } else {
                random_vector(&mut rng, n)
            }
        })
        .collect();
    let ratios: Vec<f64> = xs
        .par_iter()
        .map(|x| Ok(real_interp_norm_with(&couple, theta, p, x, quad)?.value / target.norm(x)?))
        .collect::<Result<_>>()?;
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(WeightedEquivalence {
        spread: max_ratio / min_ratio,
        ratios,
        min_ratio,
        max_ratio,
    })
}

/// `max_j |‖(T_j f̂)^∨/2π‖_{L^{p_j}(ℓ^{p_j})} - ‖f‖_{L^{p_j}(ℓ^{p_j}_{w_j})}|`
/// relative to the right side, for the weighted family built from `w0, w1`.
/// Every `log(w0_i / w1_i)` must be a multiple of the grid step, so the
/// multiplier is an exact cyclic translation.
pub fn translation_identity_check(p: [Exponent; 2], w0: &[f64], w1: &[f64], f: &GridFunction) -> Result<f64> {
    check_dim(w0.len(), f.dim())?;
    let h = f.h();
    for (i, (a, b)) in w0.iter().zip(w1).enumerate() {
        let shift = (a / b).ln() / h;
        if (shift - shift.round()).abs() > 1e-9 {
            return Err(invalid(format!(
                "log(w0/w1) at coordinate {i} is {shift} grid steps; choose weights with w0/w1 = e^(k h) for integer k"
            )));
        }
    }
    let fam = OperatorFamily::weighted(w0.to_vec(), w1.to_vec(), 0.5)?;
    let mut worst: f64 = 0.0;
    for (j, w) in [w0, w1].into_iter().enumerate() {
        let out = multiplier_apply(&fam, j, f)?;
        let lhs = grid_lp_norm(&out, &WeightedLrSpace::unweighted(f.dim(), p[j])?, p[j])?;
        let rhs = grid_lp_norm(f, &WeightedLrSpace::new(p[j], w.to_vec())?, p[j])?;
        if rhs > 0.0 {
            worst = worst.max((lhs - rhs).abs() / rhs);
        }
    }
    Ok(worst)
}

/// Eigenvalues from the complex Schur form.
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<C64>> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(invalid("eigenvalues need a nonempty square matrix"));
    }
    let schur = Schur::try_new(a.clone(), 1e-14, 10_000).ok_or(Error::NotConverged {
        iterations: 10_000,
        best_value: f64::NAN,
        gap: f64::NAN,
    })?;
    let (_, t) = schur.unpack();
    Ok(t.diagonal().iter().copied().collect())
}

/// `max_i |arg λ_i|`, the sectoriality angle of an invertible matrix.
pub fn spectral_angle(a: &CMatrix) -> Result<f64> {
    let ev = eigenvalues(a)?;
    let scale = a.iter().map(|e| e.norm()).fold(0.0, f64::max);
    if ev.iter().any(|l| l.norm() <= 1e-13 * scale.max(f64::MIN_POSITIVE)) {
        return Err(invalid("sectoriality needs an invertible matrix; 0 is in the spectrum"));
    }
    Ok(ev.iter().map(|l| l.arg().abs()).fold(0.0, f64::max))
}

/// Radii and angles scanned by [`resolvent_sup`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub per_decade: usize,
    /// Extra rays strictly between `σ` and `π` on each side.
    pub extra_rays: usize,
    /// Values above this count as unbounded.
    pub cap: f64,
}

impl Default for SectorSpec {
    fn default() -> Self {
        SectorSpec {
            r_min: 1e-4,
            r_max: 1e4,
            per_decade: 16,
            extra_rays: 0,
            cap: 1e12,
        }
    }
}

impl SectorSpec {
    fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_max > self.r_min && self.per_decade > 0 && self.cap > 1.0) {
            return Err(invalid("sector scan needs 0 < r_min < r_max, per_decade > 0, cap > 1"));
        }
        Ok(())
    }
}

/// Result of [`resolvent_sup`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorSup {
    /// Largest `‖zR(z,A)‖` found, at least the limit 1 at infinity;
    /// infinite when the spectrum is not inside the open sector.
    pub value: f64,
    pub finite: bool,
    pub argmax_radius: f64,
    pub argmax_angle: f64,
}

/// Operator norm on `space`, exact where available and otherwise the
/// sampled lower estimate, matching the lower-bound reading of scans.
fn scan_norm(t: &CMatrix, space: &WeightedLrSpace) -> Result<f64> {
    match operator_norm_exact(t, space, space)? {
        Some(v) => Ok(v),
        None => operator_norm_lower(
            t,
            space,
            space,
            &NormSampler {
                random: 4,
                iters: 10,
                seed: 0,
            },
        ),
    }
}

fn z_resolvent_norm(a: &CMatrix, space: &WeightedLrSpace, z: C64) -> Result<f64> {
    scan_norm(&(resolvent(a, z)? * z), space)
}

/// Scan estimate of `sup_{|arg z| ≥ σ} ‖zR(z,A)‖` over the rays
/// `arg z = ±σ` (and `spec.extra_rays` further rays), on a logarithmic
/// radius grid with golden-section refinement of the best cell. By the
/// maximum principle the supremum over the excluded sector is attained on
/// its boundary or approached at infinity, where the limit is 1; the limit
/// at 0 is 0.
pub fn resolvent_sup(a: &CMatrix, space: &WeightedLrSpace, sigma: f64, spec: &SectorSpec) -> Result<SectorSup> {
    spec.validate()?;
    check_dim(space.dim(), a.nrows())?;
    if !(sigma > 0.0 && sigma < PI) {
        return Err(invalid(format!("σ must lie in (0, π), got {sigma}")));
    }
    let omega = spectral_angle(a)?;
    if omega >= sigma {
        return Ok(SectorSup {
            value: f64::INFINITY,
            finite: false,
            argmax_radius: f64::NAN,
            argmax_angle: f64::NAN,
        });
    }
    let decades = (spec.r_max / spec.r_min).log10();
    let count = (decades * spec.per_decade as f64).ceil() as usize + 1;
    let lr: Vec<f64> = (0..count)
        .map(|k| spec.r_min.log10() + decades * k as f64 / (count - 1) as f64)
        .collect();
    let mut angles = vec![sigma, -sigma];
    for k in 1..=spec.extra_rays {
        let phi = sigma + (PI - sigma) * k as f64 / (spec.extra_rays + 1) as f64;
        angles.push(phi);
        angles.push(-phi);
    }
    let mut best = SectorSup {
        value: 1.0,
        finite: true,
        argmax_radius: f64::INFINITY,
        argmax_angle: sigma,
    };
    for &phi in &angles {
        let eval = |u: f64| -> Result<f64> { z_resolvent_norm(a, space, C64::from_polar(10f64.powf(u), phi)) };
        let vals: Vec<f64> = lr.par_iter().map(|u| eval(*u)).collect::<Result<_>>()?;
        let (k, _) = vals.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc },
        );
        let lo = lr[k.saturating_sub(1)];
        let hi = lr[(k + 1).min(count - 1)];
        let (u, v) = golden_max(&eval, lo, hi, 60)?;
        let (u, v) = if vals[k] >= v { (lr[k], vals[k]) } else { (u, v) };
        if v > best.value {
            best = SectorSup {
                value: v,
                finite: v <= spec.cap,
                argmax_radius: 10f64.powf(u),
                argmax_angle: phi,
            };
        }
    }
    if best.value > spec.cap {
        best.finite = false;
    }
    Ok(best)
}

/// Golden-section search for a maximum on `[lo, hi]`.
fn golden_max(f: &dyn Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, iters: usize) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    for _ in 0..iters {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b)?;
        }
    }
    Ok(if fa >= fb { (a, fa) } else { (b, fb) })
}

/// Result of [`sectoriality_angle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorialityResult {
    /// Bisection estimate of `ω(A)`.
    pub omega: f64,
    /// `max_i |arg λ_i|`.
    pub reference: f64,
    /// `(σ, M(σ))` on a grid above `omega`.
    pub table: Vec<(f64, f64)>,
}

/// Bisection tolerance for [`sectoriality_angle`].
pub const ANGLE_TOL: f64 = 1e-4;

/// Smallest `σ` for which [`resolvent_sup`] is finite, by bisection on
/// `[0, π]`, with a table of `M(σ)` above it.
pub fn sectoriality_angle(a: &CMatrix, space: &WeightedLrSpace, spec: &SectorSpec) -> Result<SectorialityResult> {
    let reference = spectral_angle(a)?;
    if reference >= PI * (1.0 - 1e-12) {
        return Err(invalid("not sectorial: an eigenvalue lies on the negative real axis"));
    }
    let finite = |s: f64| -> Result<bool> {
        if s <= 0.0 {
            return Ok(false);
        }
        Ok(resolvent_sup(a, space, s, spec)?.finite)
    };
    let (mut lo, mut hi) = (0.0, PI * (1.0 - 1e-9));
    if !finite(hi)? {
        return Err(invalid("no sector below π gives a finite resolvent bound"));
    }
    while hi - lo > ANGLE_TOL {
        let mid = 0.5 * (lo + hi);
        if finite(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let table = (1..=8)
        .map(|k| {
            let s = hi + (PI - hi) * k as f64 / 9.0;
            Ok((s, resolvent_sup(a, space, s, spec)?.value))
        })
        .collect::<Result<_>>()?;
    Ok(SectorialityResult {
        omega: hi,
        reference,
        table,
    })
}

/// Options for [`interp_sectoriality_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorialityCheckOptions {
    pub constant: f64,
    pub multiplier: MultiplierOptions,
    pub ascent: AscentOptions,
    pub sector: SectorSpec,
}

impl Default for SectorialityCheckOptions {
    fn default() -> Self {
        SectorialityCheckOptions {
            constant: 10.0,
            multiplier: MultiplierOptions {
                half_width: 20.0,
                m: 512,
                samples: 4,
                ..MultiplierOptions::default()
            },
            ascent: AscentOptions {
                starts: 4,
                sweeps: 2,
                ..AscentOptions::default()
            },
            sector: SectorSpec::default(),
        }
    }
}

/// One row of [`InterpSectoriality`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorialityRow {
    pub s: f64,
    /// `+1` for angles `(σ0, σ1)`, `-1` for `(-σ0, -σ1)`.
    pub sign: f64,
    /// Lower bound for `‖s e^{iσ_θ} R(s e^{iσ_θ}, A)‖` on the interpolation
    /// space.
    pub lower: f64,
    pub m0: f64,
    pub m1: f64,
}

/// Result of [`interp_sectoriality_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpSectoriality {
    /// `sup_s` of the multiplier upper bounds on each boundary line.
    pub c0: f64,
    pub c1: f64,
    /// `max lower / (c0^{1-θ} c1^θ)`.
    pub max_ratio: f64,
    pub violations: usize,
    pub rows: Vec<SectorialityRow>,
}

/// Checks `‖λR(λ, A)‖_{θ} ≤ C · C0^{1-θ} C1^θ` at `λ = s e^{±iσ_θ}`,
/// `σ_θ = (1-θ)σ0 + θσ1`, where `C_j` bounds the boundary multipliers of
/// `e^{(z-θ)²} s e^{i(σ0 + (σ1-σ0)z)} R(…, A)` uniformly in `s`.
pub fn interp_sectoriality_check(
    a: &CMatrix,
    couple: &BanachCouple,
    params: &InterpParams,
    sigma0: f64,
    sigma1: f64,
    s_grid: &[f64],
    opts: &SectorialityCheckOptions,
) -> Result<InterpSectoriality> {
    check_dim(couple.dim(), a.nrows())?;
    if s_grid.is_empty() || s_grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(invalid("s_grid must be a nonempty list of positive numbers"));
    }
    for (j, sigma) in [sigma0, sigma1].into_iter().enumerate() {
        if !(sigma > 0.0 && sigma < PI) {
            return Err(invalid(format!("sigma{j} = {sigma} must lie in (0, π)")));
        }
        let sup = resolvent_sup(a, couple.endpoint(j), sigma, &opts.sector)?;
        if !sup.finite {
            return Err(invalid(format!(
                "sigma{j} = {sigma} does not exceed the sectoriality angle of A on X{j}"
            )));
        }
    }
    let theta = params.theta;
    let cases: Vec<(f64, f64)> = s_grid.iter().flat_map(|&s| [(s, 1.0), (s, -1.0)]).collect();
    let rows: Vec<SectorialityRow> = cases
        .par_iter()
        .map(|&(s, sign)| -> Result<SectorialityRow> {
            let fam = OperatorFamily::resolvent(a.clone(), s, sign * sigma0, sign * sigma1, theta)?;
            let mut m = [0.0; 2];
            for (j, mj) in m.iter_mut().enumerate() {
                let x = couple.endpoint(j);
                let p = params.p_endpoint(j);
                *mj = multiplier_norm_bounds(&fam, j, x, x, p, p, &opts.multiplier)?.upper;
            }
            let t = family_eval(&fam, C64::new(theta, 0.0))?;
            let lower = interp_operator_norm_lower(couple, couple, params, &t, &opts.ascent)?;
            Ok(SectorialityRow {
                s,
                sign,
                lower,
                m0: m[0],
                m1: m[1],
            })
        })
        .collect::<Result<_>>()?;
    let c0 = rows.iter().map(|r| r.m0).fold(0.0, f64::max);
    let c1 = rows.iter().map(|r| r.m1).fold(0.0, f64::max);
    let bound = c0.powf(1.0 - theta) * c1.powf(theta);
    let max_ratio = rows.iter().map(|r| r.lower / bound).fold(0.0, f64::max);
    let violations = rows.iter().filter(|r| r.lower > opts.constant * bound).count();
    Ok(InterpSectoriality {
        c0,
        c1,
        max_ratio,
        violations,
        rows,
    })
}

/// Largest `k` accepted by [`rademacher_average`].
pub const RADEMACHER_MAX: usize = 20;

/// `(2^{-k} Σ_ε ‖Σ_i ε_i x_i‖²)^{1/2}` by enumerating all sign patterns.
/// Pattern sums are formed in index order and their squared norms summed in
/// increasing order, so flipping the sign of any `x_i` permutes the summands
/// and leaves the result bit-for-bit unchanged.
pub fn rademacher_average(space: &WeightedLrSpace, xs: &[Vec<C64>]) -> Result<f64> {
    let k = xs.len();
    if k > RADEMACHER_MAX {
        return Err(Error::Unsupported(format!(
            "exact enumeration supports at most {RADEMACHER_MAX} vectors, got {k}"
        )));
    }
    for x in xs {
        check_dim(space.dim(), x.len())?;
    }
    match k {
        0 => return Ok(0.0),
        1 => return space.norm(&xs[0]),
        _ => {}
    }
    let n = space.dim();
    let mut squares: Vec<f64> = (0..1u32 << k)
        .into_par_iter()
        .map(|pattern| {
            let mut y = vec![C64::new(0.0, 0.0); n];
            for (i, x) in xs.iter().enumerate() {
                if pattern >> i & 1 == 1 {
                    y.iter_mut().zip(x).for_each(|(a, b)| *a -= b);
                } else {
                    y.iter_mut().zip(x).for_each(|(a, b)| *a += b);
                }
            }
            let v = lr_norm(
                y.iter().zip(space.weights()).map(|(a, w)| w * a.norm()),
                space.exponent(),
            );
            v * v
        })
        .collect();
    squares.sort_by(f64::total_cmp);
    let total: f64 = squares.iter().sum();
    Ok((total / (1u64 << k) as f64).sqrt())
}

/// Largest `k` accepted by [`r_bound_lower`].
pub const R_BOUND_MAX: usize = 12;

/// Lower bound for the R-bound of `{T_1, …, T_k}` on `space`: the best
/// single-operator ratio from [`operator_norm_lower`] with the same sampler,
/// and for `k ≥ 2` also `sampler.random` random tuples.
pub fn r_bound_lower(ops: &[CMatrix], space: &WeightedLrSpace, sampler: &NormSampler) -> Result<f64> {
    let k = ops.len();
    if k == 0 || k > R_BOUND_MAX {
        return Err(Error::Unsupported(format!(
            "R-bound estimates need 1 to {R_BOUND_MAX} operators, got {k}"
        )));
    }
    let mut best: f64 = 0.0;
    for t in ops {
        best = best.max(operator_norm_lower(t, space, space, sampler)?);
    }
    if k >= 2 {
        let mut rng = sampler.rng();
        for _ in 0..sampler.random {
            let xs: Vec<Vec<C64>> = (0..k).map(|_| random_vector(&mut rng, space.dim())).collect();
            let ys: Vec<Vec<C64>> = ops
                .iter()
                .zip(&xs)
                .map(|(t, x)| (t * nalgebra::DVector::from_column_slice(x)).iter().copied().collect())
                .collect();
            let den = rademacher_average(space, &xs)?;
            if den > 0.0 {
                best = best.max(rademacher_average(space, &ys)? / den);
            }
        }
    }
    Ok(best)
}

/// Options for [`semigroup_scan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupSpec {
    /// Moduli of the scanned `z`.
    pub radii: Vec<f64>,
    /// Rays per side between `0` and the tested angle.
    pub rays: usize,
    /// The tested angle is `(1-θ)σ(1 - margin)`.
    pub margin: f64,
    /// Norm bounds above this count as blow-up.
    pub cap: f64,
    pub ascent: AscentOptions,
}

impl Default for SemigroupSpec {
    fn default() -> Self {
        SemigroupSpec {
            radii: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            rays: 3,
            margin: 0.05,
            cap: 1e6,
            ascent: AscentOptions {
                starts: 2,
                sweeps: 1,
                ..AscentOptions::default()
            },
        }
    }
}

/// One scanned `z` of [`SemigroupRow`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub abs_z: f64,
    pub arg: f64,
    pub value: f64,
}

/// One `θ` of [`SemigroupReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupRow {
    pub theta: f64,
    pub angle: f64,
    /// Largest interpolation-norm lower bound of `e^{-zA}` found.
    pub sup: f64,
    pub bounded: bool,
    pub points: Vec<ScanPoint>,
}

/// Result of [`semigroup_scan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupReport {
    /// Analyticity angle on `X0`, `π/2 - ω(A)`.
    pub sigma: f64,
    /// `sup_{t ∈ (0,1)} ‖e^{-tA}‖_{X1}` upper bound on a grid.
    pub x1_bound: f64,
    pub rows: Vec<SemigroupRow>,
}

/// For each `θ`, scans `e^{-zA}` over `|arg z| ≤ (1-θ)σ(1 - margin)` and
/// the given radii, bounding its norm on `(X0, X1)_{θ, p}` from below.
/// Boundedness below the cap is consistent with an analytic extension of
/// angle at least `(1-θ)σ` on the interpolation space.
pub fn semigroup_scan(
    a: &CMatrix,
    couple: &BanachCouple,
    p0: Exponent,
    p1: Exponent,
    thetas: &[f64],
    spec: &SemigroupSpec,
) -> Result<SemigroupReport> {
    check_dim(couple.dim(), a.nrows())?;
    if spec.radii.is_empty() || spec.radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(invalid("radii must be a nonempty list of positive numbers"));
    }
    if !(0.0..1.0).contains(&spec.margin) {
        return Err(invalid("margin must lie in [0, 1)"));
    }
    let omega = spectral_angle(a)?;
    if omega >= PI / 2.0 {
        return Err(invalid(format!(
            "e^(-zA) is not analytic on a sector: ω(A) = {omega} is not below π/2"
        )));
    }
    let sigma = PI / 2.0 - omega;
    let mut x1_bound: f64 = 0.0;
    for k in 1..=32 {
        let t = k as f64 / 32.0;
        let e = (a * C64::new(-t, 0.0)).exp();
        x1_bound = x1_bound.max(operator_norm_upper(&e, couple.x1(), couple.x1())?);
    }
    if !(x1_bound <= spec.cap) {
        return Err(invalid(format!(
            "e^(-tA) is not bounded on X1 for t in (0,1): {x1_bound:e}"
        )));
    }
    let mut rows = Vec::with_capacity(thetas.len());
    for &theta in thetas {
        let params = InterpParams::new(theta, p0, p1)?;
        let angle = (1.0 - theta) * sigma * (1.0 - spec.margin);
        let mut zs = Vec::new();
        for &r in &spec.radii {
            zs.push(C64::new(r, 0.0));
            for k in 1..=spec.rays {
                let phi = angle * k as f64 / spec.rays as f64;
                zs.push(C64::from_polar(r, phi));
                zs.push(C64::from_polar(r, -phi));
            }
        }
        let sups: Vec<f64> = zs
            .par_iter()
            .map(|z| interp_operator_norm_lower(couple, couple, &params, &(a * (-z)).exp(), &spec.ascent))
            .collect::<Result<_>>()?;
        let sup = sups.iter().copied().fold(0.0, f64::max);
        let points = zs
            .iter()
            .zip(&sups)
            .map(|(z, v)| ScanPoint {
                abs_z: z.norm(),
                arg: z.arg(),
                value: *v,
            })
            .collect();
        rows.push(SemigroupRow {
            theta,
            angle,
            sup,
            bounded: sup <= spec.cap,
            points,
        });
    }
    Ok(SemigroupReport { sigma, x1_bound, rows })
}
