//! Analytic functions on the strip `0 ≤ Re z ≤ 1` given by a Fourier-side
//! generator, `f(z) = ∫ e^{τ(z-θ)} g(τ) dτ`, and the complex formulation of
//! the mean-method norm.
//!
//! With `f_s(t) = f(s + it)`, the boundary transforms are
//! `f̂_s(ξ) = 2π e^{(s-θ)ξ} g(ξ)`. On the grid this holds exactly: sampling
//! `f_s` over one full period `[-π/h, π/h)` of the generator grid and
//! transforming lands back on the generator nodes.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{check_dim, invalid, Error, Result};
use crate::fourier::{dual_step, fourier_forward_onto, FourierPath};
use crate::grid::GridFunction;
use crate::mean::{mean_objective, minimize_mean_norm, MeanGrid, MeanMinimum, MeanOptions};
use crate::space::{lr_norm, BanachCouple, Exponent, InterpParams, WeightedLrSpace};
use crate::C64;

/// `f(z) = h Σ_k e^{τ_k (z-θ)} g(τ_k)` for a generator `g` sampled on `τ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StripFunction {
    theta: f64,
    generator: GridFunction,
}

impl StripFunction {
    pub fn new(theta: f64, generator: GridFunction) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(invalid(format!("anchor θ must lie in (0,1), got {theta}")));
        }
        if generator
            .values()
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(invalid("generator has non-finite samples"));
        }
        Ok(StripFunction { theta, generator })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn generator(&self) -> &GridFunction {
        &self.generator
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }
}

fn check_strip(re: f64) -> Result<()> {
    if (-1e-12..=1.0 + 1e-12).contains(&re) {
        Ok(())
    } else {
        Err(invalid(format!("Re z = {re} lies outside the closed strip [0,1]")))
    }
}

/// Rectangle-rule value of the generator integral at `z`.
pub fn strip_eval(sf: &StripFunction, z: C64) -> Result<Vec<C64>> {
    check_strip(z.re)?;
    let g = &sf.generator;
    let mut out = vec![C64::new(0.0, 0.0); g.dim()];
    let w = z - sf.theta;
    for k in 0..g.len() {
        let e = (w * g.t(k)).exp() * g.h();
        for (o, v) in out.iter_mut().zip(g.row(k)) {
            *o += v * e;
        }
    }
    Ok(out)
}

/// How [`boundary_fourier`] obtains `f̂_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryMode {
    /// `2π e^{(s-θ)ξ} g(ξ)` on the generator grid.
    Algebraic,
    /// Sample `f_s` with [`strip_eval`] and transform.
    Direct(DirectWindow),
}

/// Sampling window for direct mode.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DirectWindow {
    /// One full period `[-π/h, π/h)` with as many nodes as the generator; the
    /// transform is exact up to rounding.
    #[default]
    FullPeriod,
    /// `[-half_width, half_width]` with `m` nodes. The transform lands on a
    /// grid with a different step and truncation is an approximation, so
    /// the sampled tail mass must stay below `1e-8` of the total.
    Truncated { half_width: f64, m: usize },
}

/// Share of the sampled `L¹` mass allowed in the outer twentieth of a
/// truncated window.
pub const BOUNDARY_MASS_TOL: f64 = 1e-8;

/// Samples of `t ↦ f(s + it)`.
pub fn boundary_trace(sf: &StripFunction, s: f64, t0: f64, h: f64, m: usize) -> Result<GridFunction> {
    check_strip(s)?;
    let rows: Vec<Vec<C64>> = (0..m)
        .into_par_iter()
        .map(|k| strip_eval(sf, C64::new(s, t0 + k as f64 * h)))
        .collect::<Result<_>>()?;
    GridFunction::from_values(t0, h, sf.dim(), rows.concat())
}

/// The boundary Fourier transform `f̂_s`.
pub fn boundary_fourier(sf: &StripFunction, s: f64, mode: BoundaryMode) -> Result<GridFunction> {
    check_strip(s)?;
    let g = &sf.generator;
    match mode {
        BoundaryMode::Algebraic => {
            let mut out = g.clone();
            for k in 0..g.len() {
                let e = 2.0 * PI * ((s - sf.theta) * g.t(k)).exp();
                out.row_mut(k).iter_mut().for_each(|v| *v *= e);
            }
            Ok(out)
        }
        BoundaryMode::Direct(DirectWindow::FullPeriod) => {
            let m = g.len();
            let dt = dual_step(m, g.h());
            let t0 = -((m / 2) as f64) * dt;
            let trace = boundary_trace(sf, s, t0, dt, m)?;
            Ok(fourier_forward_onto(&trace, g.t0(), FourierPath::Fft)?.xi)
        }
        BoundaryMode::Direct(DirectWindow::Truncated { half_width, m }) => {
            if !(half_width > 0.0) || m < 2 {
                return Err(invalid(
                    "truncated window needs positive half-width and at least 2 nodes",
                ));
            }
            let dt = 2.0 * half_width / (m - 1) as f64;
            let trace = boundary_trace(sf, s, -half_width, dt, m)?;
            let edge = (m / 20).max(1);
            let mass = |k: usize| trace.row(k).iter().map(|v| v.norm()).sum::<f64>();
            let total: f64 = (0..m).map(mass).sum();
            let outer: f64 = (0..edge).chain(m - edge..m).map(mass).sum();
            if outer > BOUNDARY_MASS_TOL * total {
                return Err(Error::Accuracy(format!(
                    "f_s at s={s} keeps {:.3e} of its mass in the outer window (limit {BOUNDARY_MASS_TOL:e}); widen half_width beyond {half_width}",
                    outer / total
                )));
            }
            let xi0 = -((m / 2) as f64) * dual_step(m, dt);
            Ok(fourier_forward_onto(&trace, xi0, FourierPath::Fft)?.xi)
        }
    }
}

/// Nodes where some coordinate of `g` reaches `delta · max|g|`.
pub fn energetic_support(g: &GridFunction, delta: f64) -> Vec<usize> {
    let cut = delta * g.max_abs();
    (0..g.len())
        .filter(|&k| g.row(k).iter().any(|v| v.norm() >= cut && v.norm() > 0.0))
        .collect()
}

/// Default energetic-support threshold for [`vertical_invariance_check`].
pub const ENERGETIC_DELTA: f64 = 1e-10;

/// `max |e^{-s1 ξ} f̂_{s1}(ξ) - e^{-s2 ξ} f̂_{s2}(ξ)|` over the energetic
/// support of the generator, both sides computed in direct mode. Outside
/// that support the weights `e^{-sξ}` only amplify rounding.
pub fn vertical_invariance_check(sf: &StripFunction, s1: f64, s2: f64) -> Result<f64> {
    for s in [s1, s2] {
        if !(s > 0.0 && s < 1.0) {
            return Err(invalid(format!("vertical invariance needs s in (0,1), got {s}")));
        }
    }
    if s1 == s2 {
        return Ok(0.0);
    }
    let a = boundary_fourier(sf, s1, BoundaryMode::Direct(DirectWindow::FullPeriod))?;
    let b = boundary_fourier(sf, s2, BoundaryMode::Direct(DirectWindow::FullPeriod))?;
    Ok(invariance_deviation(
        &a,
        &b,
        s1,
        s2,
        &energetic_support(&sf.generator, ENERGETIC_DELTA),
    ))
}

/// Deviation between two precomputed direct-mode boundary transforms.
pub fn invariance_deviation(a: &GridFunction, b: &GridFunction, s1: f64, s2: f64, support: &[usize]) -> f64 {
    let mut dev: f64 = 0.0;
    for &k in support {
        let xi = a.t(k);
        let (e1, e2) = ((-s1 * xi).exp(), (-s2 * xi).exp());
        for (x, y) in a.row(k).iter().zip(b.row(k)) {
            dev = dev.max((x * e1 - y * e2).norm());
        }
    }
    dev
}

/// `(Δ Σ_l ‖F(ξ_l)‖_{X}^p)^{1/p}` on the grid of `F`.
pub fn grid_lp_norm(gf: &GridFunction, space: &WeightedLrSpace, p: Exponent) -> Result<f64> {
    check_dim(space.dim(), gf.dim())?;
    let nrm = lr_norm((0..gf.len()).map(|k| space.norm_unchecked(gf.row(k))), p);
    Ok(if p.is_infinite() {
        nrm
    } else {
        nrm * gf.h().powf(1.0 / p.value())
    })
}

/// Output of [`complex_norm_upper`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexNorm {
    /// `2π` times the minimized mean cost.
    pub value: f64,
    pub minimum: MeanMinimum,
    /// `max_j ‖f̂_j‖_{L^{p_j}(X_j)}` with `f̂_j` from direct mode.
    pub direct_value: f64,
    pub cross_check_error: f64,
}

/// Upper bound for the complex-formulation norm over generator-represented
/// strip functions with `f(θ) = x`: the minimizing representation is used as
/// the generator, so the value is `2π` times the mean-method minimum.
pub fn complex_norm_upper(
    couple: &BanachCouple,
    params: &InterpParams,
    x: &[C64],
    grid: &MeanGrid,
    opts: &MeanOptions,
) -> Result<ComplexNorm> {
    let minimum = minimize_mean_norm(couple, params, x, grid, opts)?;
    let value = 2.0 * PI * minimum.value;
    let sf = StripFunction::new(params.theta, minimum.rep.gf.clone())?;
    let f0 = boundary_fourier(&sf, 0.0, BoundaryMode::Direct(DirectWindow::FullPeriod))?;
    let f1 = boundary_fourier(&sf, 1.0, BoundaryMode::Direct(DirectWindow::FullPeriod))?;
    let direct_value = grid_lp_norm(&f0, couple.x0(), params.p0)?.max(grid_lp_norm(&f1, couple.x1(), params.p1)?);
    let reference = 2.0 * PI * mean_objective(&minimum.rep.gf, couple, params)?;
    let cross_check_error = (direct_value - reference).abs() / reference;
    Ok(ComplexNorm {
        value,
        minimum,
        direct_value,
        cross_check_error,
    })
}

/// Sup norms of a function sampled on the lines `Re z = 0, θ, 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeLines {
    pub sup0: f64,
    pub sup_theta: f64,
    pub sup1: f64,
    /// `sup0^{1-θ} sup1^θ`.
    pub bound: f64,
    pub passed: bool,
}

/// Checks `sup_{Re z=θ} |f| ≤ sup_{Re z=0}^{1-θ} sup_{Re z=1}^θ (1 + tol)` on
/// samples from the three lines.
pub fn three_lines_check(line0: &[C64], line_theta: &[C64], line1: &[C64], theta: f64, tol: f64) -> Result<ThreeLines> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid(format!("θ must lie in (0,1), got {theta}")));
    }
    let sup = |v: &[C64]| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let (sup0, sup_theta, sup1) = (sup(line0), sup(line_theta), sup(line1));
    let bound = sup0.powf(1.0 - theta) * sup1.powf(theta);
    Ok(ThreeLines {
        sup0,
        sup_theta,
        sup1,
        bound,
        passed: sup_theta <= bound * (1.0 + tol),
    })
}

/// Runs [`three_lines_check`] on every coordinate of a strip function
/// sampled at heights `ts`; returns the first failing report, or the last
/// one when all pass.
pub fn strip_three_lines(sf: &StripFunction, ts: &[f64], tol: f64) -> Result<ThreeLines> {
    let sample = |s: f64| -> Result<Vec<Vec<C64>>> { ts.iter().map(|&t| strip_eval(sf, C64::new(s, t))).collect() };
    let (a, b, c) = (sample(0.0)?, sample(sf.theta)?, sample(1.0)?);
    let column = |rows: &[Vec<C64>], d: usize| rows.iter().map(|r| r[d]).collect::<Vec<_>>();
    let mut last = None;
    for d in 0..sf.dim() {
        let rep = three_lines_check(&column(&a, d), &column(&b, d), &column(&c, d), sf.theta, tol)?;
        if !rep.passed {
            return Ok(rep);
        }
        last = Some(rep);
    }
    last.ok_or_else(|| invalid("no samples"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_generator(x: &[C64], half: f64, m: usize) -> GridFunction {
        let h = 2.0 * half / (m - 1) as f64;
        GridFunction::from_fn(-half, h, m, x.len(), |t| {
            let e = (-t * t / 2.0).exp();
            x.iter().map(|v| v * e).collect()
        })
        .unwrap()
    }

    #[test]
    fn value_at_anchor() {
        let x = [C64::new(1.0, -0.5), C64::new(2.0, 0.0)];
        let sf = StripFunction::new(0.4, gaussian_generator(&x, 20.0, 2049)).unwrap();
        let v = strip_eval(&sf, C64::new(0.4, 0.0)).unwrap();
        for (a, b) in v.iter().zip(&x) {
            assert!((a - b * (2.0 * PI).sqrt()).norm() < 1e-8);
        }
        assert!(strip_eval(&sf, C64::new(1.5, 0.0)).is_err());
    }

    #[test]
    fn cauchy_riemann() {
        let x = [C64::new(1.0, 0.0)];
        let sf = StripFunction::new(0.5, gaussian_generator(&x, 12.0, 801)).unwrap();
        let z = C64::new(0.3, 0.7);
        let d = 1e-5;
        let f = |z: C64| strip_eval(&sf, z).unwrap()[0];
        let dx = (f(z + d) - f(z - d)) / (2.0 * d);
        let dy = (f(z + C64::new(0.0, d)) - f(z - C64::new(0.0, d))) / (2.0 * d);
        assert!((dx - dy / C64::new(0.0, 1.0)).norm() < 1e-6);
    }

    #[test]
    fn algebraic_matches_direct() {
        let x = [C64::new(1.0, 0.0), C64::new(0.0, 1.0)];
        let sf = StripFunction::new(0.5, gaussian_generator(&x, 15.0, 1001)).unwrap();
        for s in [0.0, 0.3, 0.5, 1.0] {
            let a = boundary_fourier(&sf, s, BoundaryMode::Algebraic).unwrap();
            let b = boundary_fourier(&sf, s, BoundaryMode::Direct(DirectWindow::FullPeriod)).unwrap();
            let scale = a.max_abs();
            for k in energetic_support(sf.generator(), 1e-10) {
                for (u, v) in a.row(k).iter().zip(b.row(k)) {
                    assert!((u - v).norm() <= 1e-6 * scale);
                }
            }
        }
        let theta_line = boundary_fourier(&sf, 0.5, BoundaryMode::Algebraic).unwrap();
        assert_eq!(theta_line, sf.generator().scale(C64::new(2.0 * PI, 0.0)));
    }

    #[test]
    fn truncated_window_reports_heavy_tails() {
        let x = [C64::new(1.0, 0.0)];
        let sf = StripFunction::new(0.5, gaussian_generator(&x, 10.0, 401)).unwrap();
        let ok = boundary_fourier(
            &sf,
            0.2,
            BoundaryMode::Direct(DirectWindow::Truncated {
                half_width: 12.0,
                m: 400,
            }),
        );
        assert!(ok.is_ok());
        let narrow = boundary_fourier(
            &sf,
            0.2,
            BoundaryMode::Direct(DirectWindow::Truncated {
                half_width: 1.0,
                m: 400,
            }),
        );
        assert!(matches!(narrow, Err(Error::Accuracy(_))));
    }

    #[test]
    fn vertical_invariance() {
        let x = [C64::new(1.0, 0.0)];
        let sf = StripFunction::new(0.5, gaussian_generator(&x, 20.0, 2049)).unwrap();
        let scale = 2.0 * PI * sf.generator().max_abs();
        assert_eq!(vertical_invariance_check(&sf, 0.3, 0.3).unwrap(), 0.0);
        let dev = vertical_invariance_check(&sf, 0.2, 0.8).unwrap();
        assert!(dev <= 1e-6 * scale, "{dev}");
    }

    #[test]
    fn three_lines_examples() {
        let c = vec![C64::new(2.0, 0.0); 5];
        assert!(three_lines_check(&c, &c, &c, 0.3, 0.0).unwrap().passed);
        let ts: Vec<f64> = (-40..=40).map(|k| k as f64 * 0.1).collect();
        let f = |s: f64| {
            ts.iter()
                .map(|&t| (C64::new(s, t) * C64::new(s, t)).exp())
                .collect::<Vec<_>>()
        };
        assert!(three_lines_check(&f(0.0), &f(0.6), &f(1.0), 0.6, 1e-12).unwrap().passed);
        let sf = StripFunction::new(0.4, gaussian_generator(&[C64::new(1.0, 2.0)], 10.0, 401)).unwrap();
        assert!(strip_three_lines(&sf, &ts, 1e-9).unwrap().passed);
    }

    #[test]
    fn bathtub_complex_norm() {
        let s = WeightedLrSpace::unweighted(1, Exponent::TWO).unwrap();
        let couple = BanachCouple::new(s.clone(), s).unwrap();
        let params = InterpParams::new(0.5, Exponent::INFINITY, Exponent::INFINITY).unwrap();
        let grid = MeanGrid {
            half_width: 60.0,
            h: 0.05,
        };
        let out = complex_norm_upper(&couple, &params, &[C64::new(1.0, 0.0)], &grid, &MeanOptions::default()).unwrap();
        assert!((out.value - PI / 2.0).abs() <= 0.02 * PI / 2.0);
        assert!(out.cross_check_error <= 1e-4, "{}", out.cross_check_error);
    }
}
