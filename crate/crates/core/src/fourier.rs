//! Discretized Fourier transforms with `ĝ(ξ) = ∫ g(t) e^{-itξ} dt` and no
//! normalization on the inverse, so inversion carries a factor `2π`.
//!
//! For a time grid `t_k = t0 + k h` (`k < m`) the frequency grid is
//! `ξ_l = ξ0 + l Δξ` with `Δξ = 2π / (m h)`; by default
//! `ξ0 = -⌊m/2⌋ Δξ`, which covers `[-π/h, π/h)`. The products `t_k ξ_l`
//! split into a phase linear in `l`, a phase linear in `k`, and
//! `2π k l / m`, which is reduced modulo `m` in integer arithmetic.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::error::{invalid, Result};
use crate::grid::GridFunction;
use crate::C64;

/// A frequency-side function together with the time origin its inverse
/// transform lands on.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub xi: GridFunction,
    pub t0: f64,
}

/// Evaluation strategy; both give the same sums to rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FourierPath {
    /// `O(m²)` sums, the reference.
    Direct,
    #[default]
    Fft,
}

/// Step of the dual grid.
pub fn dual_step(m: usize, h: f64) -> f64 {
    2.0 * PI / (m as f64 * h)
}

/// `-⌊m/2⌋ · step`.
pub fn centered_start(m: usize, step: f64) -> f64 {
    -((m / 2) as f64) * step
}

/// `ξ0 / Δξ = -(c + f)` with integer `c` and `f ∈ [0, 1)`.
fn split_offset(xi0: f64, dxi: f64) -> (i64, f64) {
    let r = -xi0 / dxi;
    let rounded = r.round();
    if (r - rounded).abs() <= 1e-9 * r.abs().max(1.0) {
        (rounded as i64, 0.0)
    } else {
        let c = r.floor();
        (c as i64, r - c)
    }
}

/// `e^{2πi (a + frac) / m}` with `a` reduced mod `m`.
fn unit_phase(a: i64, frac: f64, m: usize) -> C64 {
    let a = a.rem_euclid(m as i64) as f64;
    C64::from_polar(1.0, 2.0 * PI * (a + frac) / m as f64)
}

/// `h Σ_k g(t_k) e^{-i t_k ξ_l}` on the centered dual grid.
pub fn fourier_forward(gf: &GridFunction) -> Result<Spectrum> {
    fourier_forward_with(gf, FourierPath::Fft)
}

pub fn fourier_forward_with(gf: &GridFunction, path: FourierPath) -> Result<Spectrum> {
    let dxi = dual_step(gf.len(), gf.h());
    fourier_forward_onto(gf, centered_start(gf.len(), dxi), path)
}

/// Forward transform on the dual grid starting at `xi0`.
pub fn fourier_forward_onto(gf: &GridFunction, xi0: f64, path: FourierPath) -> Result<Spectrum> {
    if gf.is_empty() {
        return Err(invalid("cannot transform an empty grid"));
    }
    if !xi0.is_finite() {
        return Err(invalid("frequency origin must be finite"));
    }
    let m = gf.len();
    let h = gf.h();
    let t0 = gf.t0();
    let dim = gf.dim();
    let dxi = dual_step(m, h);
    let (c, frac) = split_offset(xi0, dxi);
    // e^{-i t_k ξ_l} = e^{-i t0 ξ_l} · e^{2πi (k c + k f - k l) / m}.
    let outer: Vec<C64> = (0..m)
        .map(|l| C64::from_polar(h, -t0 * (xi0 + l as f64 * dxi)))
        .collect();
    let mut out = vec![C64::new(0.0, 0.0); m * dim];
    match path {
        FourierPath::Direct => {
            for l in 0..m {
                for k in 0..m {
                    let ph = unit_phase(k as i64 * (c - l as i64), k as f64 * frac, m);
                    let row = gf.row(k);
                    for d in 0..dim {
                        out[l * dim + d] += row[d] * ph;
                    }
                }
                for d in 0..dim {
                    out[l * dim + d] *= outer[l];
                }
            }
        }
        FourierPath::Fft => {
            let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
            let twist: Vec<C64> = (0..m).map(|k| unit_phase(k as i64 * c, k as f64 * frac, m)).collect();
            let mut buf = vec![C64::new(0.0, 0.0); m];
            for d in 0..dim {
                for k in 0..m {
                    buf[k] = gf.row(k)[d] * twist[k];
                }
                fft.process(&mut buf);
                for l in 0..m {
                    out[l * dim + d] = buf[l] * outer[l];
                }
            }
        }
    }
    Ok(Spectrum {
        xi: GridFunction::from_values(xi0, dxi, dim, out)?,
        t0,
    })
}

/// `Δξ Σ_l G(ξ_l) e^{i t_k ξ_l}` on `t_k = spec.t0 + k · 2π/(m Δξ)`.
pub fn fourier_inverse(spec: &Spectrum) -> Result<GridFunction> {
    fourier_inverse_with(spec, FourierPath::Fft)
}

pub fn fourier_inverse_with(spec: &Spectrum, path: FourierPath) -> Result<GridFunction> {
    let g = &spec.xi;
    if g.is_empty() {
        return Err(invalid("cannot transform an empty grid"));
    }
    if !spec.t0.is_finite() {
        return Err(invalid("time origin must be finite"));
    }
    let m = g.len();
    let dxi = g.h();
    let xi0 = g.t0();
    let t0 = spec.t0;
    let h = dual_step(m, dxi);
    let dim = g.dim();
    let (c, frac) = split_offset(xi0, dxi);
    // e^{i t_k ξ_l} = e^{i t0 ξ_l} · e^{-2πi (k c + k f - k l) / m}.
    let inner: Vec<C64> = (0..m)
        .map(|l| C64::from_polar(1.0, t0 * (xi0 + l as f64 * dxi)))
        .collect();
    let mut out = vec![C64::new(0.0, 0.0); m * dim];
    match path {
        FourierPath::Direct => {
            for k in 0..m {
                for l in 0..m {
                    let ph = unit_phase(k as i64 * (l as i64 - c), -(k as f64) * frac, m) * inner[l];
                    let row = g.row(l);
                    for d in 0..dim {
                        out[k * dim + d] += row[d] * ph;
                    }
                }
                for d in 0..dim {
                    out[k * dim + d] *= dxi;
                }
            }
        }
        FourierPath::Fft => {
            let fft = FftPlanner::<f64>::new().plan_fft_inverse(m);
            let twist: Vec<C64> = (0..m)
                .map(|k| unit_phase(-(k as i64) * c, -(k as f64) * frac, m) * dxi)
                .collect();
            let mut buf = vec![C64::new(0.0, 0.0); m];
            for d in 0..dim {
                for l in 0..m {
                    buf[l] = g.row(l)[d] * inner[l];
                }
                fft.process(&mut buf);
                for k in 0..m {
                    out[k * dim + d] = buf[k] * twist[k];
                }
            }
        }
    }
    GridFunction::from_values(t0, h, dim, out)
}

/// `(step Σ ‖v_k‖_2²)^{1/2}` over all coordinates.
pub fn l2_norm(gf: &GridFunction) -> f64 {
    (gf.h() * gf.values().iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(m: usize, half: f64) -> GridFunction {
        let h = 2.0 * half / m as f64;
        GridFunction::from_fn(-half, h, m, 1, |t| vec![C64::new((-t * t / 2.0).exp(), 0.0)]).unwrap()
    }

    #[test]
    fn gaussian_transform() {
        let g = gaussian(2048, 20.0);
        let spec = fourier_forward(&g).unwrap();
        let mut err: f64 = 0.0;
        for l in 0..spec.xi.len() {
            let xi = spec.xi.t(l);
            let want = (2.0 * PI).sqrt() * (-xi * xi / 2.0).exp();
            err = err.max((spec.xi.row(l)[0] - want).norm());
        }
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn inversion_factor_two_pi() {
        let g = gaussian(2048, 20.0);
        let back = fourier_inverse(&fourier_forward(&g).unwrap()).unwrap();
        assert!((back.t0() - g.t0()).abs() < 1e-12 && (back.h() - g.h()).abs() < 1e-15);
        for (a, b) in back.values().iter().zip(g.values()) {
            assert!((a - b * (2.0 * PI)).norm() < 1e-8);
        }
    }

    #[test]
    fn plancherel() {
        let g = gaussian(1024, 15.0);
        let spec = fourier_forward(&g).unwrap();
        let ratio = l2_norm(&spec.xi) / l2_norm(&g);
        assert!((ratio - (2.0 * PI).sqrt()).abs() < 1e-8);
    }

    #[test]
    fn fft_matches_direct() {
        let g = GridFunction::from_fn(-3.7, 0.05, 150, 2, |t| {
            vec![C64::new((-t * t).exp(), t.sin() * 0.1), C64::new((t * 3.0).cos(), 0.0)]
        })
        .unwrap();
        for xi0 in [centered_start(150, dual_step(150, 0.05)), 0.37, -11.0] {
            let a = fourier_forward_onto(&g, xi0, FourierPath::Direct).unwrap();
            let b = fourier_forward_onto(&g, xi0, FourierPath::Fft).unwrap();
            let scale = a.xi.max_abs();
            for (x, y) in a.xi.values().iter().zip(b.xi.values()) {
                assert!((x - y).norm() <= 1e-12 * scale);
            }
            let ia = fourier_inverse_with(&a, FourierPath::Direct).unwrap();
            let ib = fourier_inverse_with(&a, FourierPath::Fft).unwrap();
            for ((x, y), z) in ia.values().iter().zip(ib.values()).zip(g.values()) {
                assert!((x - y).norm() <= 1e-12 * ia.max_abs());
                assert!((x - z * (2.0 * PI)).norm() <= 1e-11 * ia.max_abs());
            }
        }
    }

    #[test]
    fn indicator_transform() {
        let h = 1e-3;
        let g = GridFunction::from_fn(-1.0 + h / 2.0, h, 2000, 1, |_| vec![C64::new(1.0, 0.0)]).unwrap();
        let spec = fourier_forward(&g).unwrap();
        for l in (0..spec.xi.len()).step_by(97) {
            let xi = spec.xi.t(l);
            if xi.abs() > 50.0 {
                continue;
            }
            let want = if xi == 0.0 { 2.0 } else { 2.0 * xi.sin() / xi };
            assert!((spec.xi.row(l)[0] - want).norm() < 1e-3);
        }
    }

    #[test]
    fn empty_or_bad_origin_rejected() {
        let g = gaussian(16, 2.0);
        assert!(fourier_forward_onto(&g, f64::NAN, FourierPath::Fft).is_err());
    }
}
