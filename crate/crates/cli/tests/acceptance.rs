//! Acceptance suite: one PASS/FAIL line per criterion. Reference values are
//! computed here from closed forms or independent code paths.

use std::f64::consts::PI;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::Instant;

use interplab::{
    complex_norm_upper, fourier_forward, fourier_forward_with, fourier_inverse, interp_sectoriality_check,
    k_functional, k_functional_oracle, minimize_mean_norm, multiplier_norm_bounds, operator_norm_lower, r_bound_lower,
    rademacher_average, real_interp_norm, resolvent_sup, sectoriality_angle, stein_check, translation_identity_check,
    vertical_invariance_check, weighted_equivalence_check, BanachCouple, CMatrix, Exponent, FourierPath, GridFunction,
    InterpParams, KOptions, MeanGrid, MeanOptions, MultiplierOptions, NormSampler, OperatorFamily, QuadOptions,
    SectorSpec, SectorialityCheckOptions, SteinOptions, StripFunction, WeightedLrSpace, C64,
};
use interplab_cli::commands::{equivalence_band, BandSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

const EXPONENTS: [Exponent; 3] = [Exponent::ONE, Exponent::TWO, Exponent::INFINITY];

fn main() {
    let checks: [Check; 11] = [
        ("scalar_closed_forms", scalar_closed_forms),
        ("k_solver_certification", k_solver_certification),
        ("equivalence_band", equivalence_band_suite),
        ("bathtub_value", bathtub_value),
        ("fourier_convention", fourier_convention),
        ("vertical_invariance", vertical_invariance),
        ("weighted_identity", weighted_identity),
        ("kernel_chain", kernel_chain),
        ("sectoriality", sectoriality),
        ("rademacher", rademacher),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn space(r: Exponent, w: &[f64]) -> WeightedLrSpace {
    WeightedLrSpace::new(r, w.to_vec()).expect("valid space")
}

fn couple(r0: Exponent, w0: &[f64], r1: Exponent, w1: &[f64]) -> BanachCouple {
    BanachCouple::new(space(r0, w0), space(r1, w1)).expect("valid couple")
}

fn real(v: &[f64]) -> Vec<C64> {
    v.iter().map(|x| C64::new(*x, 0.0)).collect()
}

fn scalar_reference(a: f64, b: f64, theta: f64, p: Exponent) -> f64 {
    let base = a.powf(1.0 - theta) * b.powf(theta);
    if p.is_infinite() {
        base
    } else {
        let p = p.value();
        base * (1.0 / ((1.0 - theta) * p) + 1.0 / (theta * p)).powf(1.0 / p)
    }
}

fn scalar_closed_forms() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for (a, b) in [(1.0, 1.0), (2.0, 3.0)] {
        let c = couple(Exponent::ONE, &[a], Exponent::ONE, &[b]);
        for theta in [0.25, 0.5, 0.75] {
            for p in EXPONENTS {
                let params = InterpParams::new(theta, p, p).map_err(fail)?;
                let start = Instant::now();
                let got = real_interp_norm(&c, &params, &real(&[1.0]), &QuadOptions::default()).map_err(fail)?;
                let secs = start.elapsed().as_secs_f64();
                slowest = slowest.max(secs);
                let want = scalar_reference(a, b, theta, p);
                let rel = (got.value - want).abs() / want;
                worst = worst.max(rel);
                ensure(rel <= 1e-6, || {
                    format!("(a,b)=({a},{b}) θ={theta} p={p}: {} vs {want}", got.value)
                })?;
                ensure(secs < 1.0, || {
                    format!("(a,b)=({a},{b}) θ={theta} p={p} took {secs:.2}s")
                })?;
            }
        }
    }
    Ok(format!("18 cases, max rel error {worst:.2e}, slowest {slowest:.3}s"))
}

fn k_solver_certification() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b73);
    let kopts = KOptions::default();
    let ts: Vec<f64> = (0..25).map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / 24.0)).collect();
    let mut worst: f64 = 0.0;
    for inst in 0..30 {
        let n = rng.random_range(1..=2);
        let r0 = EXPONENTS[rng.random_range(0..3)];
        let r1 = EXPONENTS[rng.random_range(0..3)];
        let w0: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
        let w1: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = 10f64.powf(rng.random_range(-1.5..1.5));
        let c = couple(r0, &w0, r1, &w1);
        let x = real(&x);
        let oracle = k_functional_oracle(&c, &x, t, 1e-3).map_err(fail)?;
        let k = k_functional(&c, &x, t, &kopts).map_err(fail)?.value;
        let rel = (k - oracle).abs() / oracle;
        worst = worst.max(rel);
        ensure(rel <= 1e-4, || {
            format!("instance {inst}: K={k} oracle={oracle} at t={t}")
        })?;
        let ks: Vec<f64> = ts
            .iter()
            .map(|t| k_functional(&c, &x, *t, &kopts).map(|d| d.value))
            .collect::<interplab::Result<_>>()
            .map_err(fail)?;
        let n0 = c.x0().norm(&x).map_err(fail)?;
        let n1 = c.x1().norm(&x).map_err(fail)?;
        let tol = 1e-8 * n0.max(n1);
        for w in 0..ts.len() - 2 {
            let (t0, t1, t2) = (ts[w], ts[w + 1], ts[w + 2]);
            let (k0, k1, k2) = (ks[w], ks[w + 1], ks[w + 2]);
            ensure(k1 >= k0 - tol && k2 >= k1 - tol, || {
                format!("instance {inst}: not monotone near t={t1}")
            })?;
            let chord = k0 + (k2 - k0) * (t1 - t0) / (t2 - t0);
            ensure(k1 >= chord - tol, || {
                format!("instance {inst}: not concave near t={t1}")
            })?;
            ensure(k1 <= n0.min(t1 * n1) + tol, || {
                format!("instance {inst}: exceeds majorant at t={t1}")
            })?;
        }
    }
    Ok(format!(
        "30 instances, max rel error {worst:.2e}, invariants on 23 t-triples each"
    ))
}

fn equivalence_band_suite() -> Outcome {
    let spec = BandSpec {
        seed: 20240601,
        ..BandSpec::default()
    };
    let (rows, summaries) = equivalence_band(&spec).map_err(fail)?;
    let finite = rows.iter().all(|r| r.ratio.is_finite() && r.ratio > 0.0);
    let scale = rows.iter().map(|r| r.scale_deviation).fold(0.0, f64::max);
    let bands: Vec<String> = summaries
        .iter()
        .map(|s| {
            format!(
                "θ={} [{:.3}, {:.3}] spread {:.2}",
                s.theta, s.min_ratio, s.max_ratio, s.spread
            )
        })
        .collect();
    let detail = format!(
        "{} instances, max scale deviation {scale:.2e}; {}",
        rows.len(),
        bands.join("; ")
    );
    ensure(finite, || format!("non-finite ratio; {detail}"))?;
    ensure(scale <= 1e-9, || format!("scale invariance violated; {detail}"))?;
    ensure(summaries.iter().all(|s| s.spread <= spec.band), || {
        format!("band exceeded; {detail}")
    })?;
    Ok(detail)
}

fn bathtub_value() -> Outcome {
    let inf = Exponent::INFINITY;
    let c = couple(inf, &[1.0], inf, &[1.0]);
    let params = InterpParams::new(0.5, inf, inf).map_err(fail)?;
    let grid = MeanGrid {
        half_width: 60.0,
        h: 0.05,
    };
    let x = real(&[1.0]);
    let opts = MeanOptions::default();
    let m = minimize_mean_norm(&c, &params, &x, &grid, &opts).map_err(fail)?;
    let rel = (m.value - 0.25).abs() / 0.25;
    ensure(rel <= 0.02, || format!("mean value {} is not 0.25 ± 2%", m.value))?;
    let cn = complex_norm_upper(&c, &params, &x, &grid, &opts).map_err(fail)?;
    let factor = (cn.value - 2.0 * PI * m.value).abs() / (2.0 * PI * m.value);
    ensure(factor <= 1e-12, || {
        format!("complex bound {} is not 2π·{}", cn.value, m.value)
    })?;
    ensure(cn.cross_check_error <= 1e-4, || {
        format!("direct cross-check error {:.2e}", cn.cross_check_error)
    })?;
    Ok(format!(
        "value {:.6} (rel error {rel:.2e}), complex {:.6}, cross-check {:.2e}",
        m.value, cn.value, cn.cross_check_error
    ))
}

fn gaussian(t0: f64, h: f64, m: usize, x: &[C64]) -> GridFunction {
    GridFunction::from_fn(t0, h, m, x.len(), |t| {
        let e = (-t * t / 2.0).exp();
        x.iter().map(|v| v * e).collect()
    })
    .expect("valid grid")
}

fn fourier_convention() -> Outcome {
    let m = 2048;
    let h = 40.0 / m as f64;
    let x = [C64::new(1.0, 0.0)];
    let g = gaussian(-20.0, h, m, &x);
    let spec = fourier_forward(&g).map_err(fail)?;
    let analytic = (0..spec.xi.len())
        .map(|k| {
            let xi = spec.xi.t(k);
            (spec.xi.row(k)[0] - (2.0 * PI).sqrt() * (-xi * xi / 2.0).exp()).norm()
        })
        .fold(0.0, f64::max);
    ensure(analytic <= 1e-8, || {
        format!("transform misses √(2π)e^(-ξ²/2) by {analytic:.2e}")
    })?;
    let back = fourier_inverse(&spec).map_err(fail)?;
    let round_trip = g
        .values()
        .iter()
        .zip(back.values())
        .map(|(a, b)| (b - a * (2.0 * PI)).norm())
        .fold(0.0, f64::max);
    ensure(round_trip <= 1e-8, || {
        format!("inverse∘forward deviates from 2π·id by {round_trip:.2e}")
    })?;
    let l2 = |gf: &GridFunction| (gf.h() * gf.values().iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt();
    let plancherel = (l2(&spec.xi) / l2(&g) - (2.0 * PI).sqrt()).abs();
    ensure(plancherel <= 1e-8, || {
        format!("Plancherel factor off by {plancherel:.2e}")
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noisy = GridFunction::from_fn(-20.0, h, m, 2, |_| {
        (0..2)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    })
    .map_err(fail)?;
    let mut path_gap: f64 = 0.0;
    for f in [&g, &noisy] {
        let a = fourier_forward_with(f, FourierPath::Fft).map_err(fail)?;
        let b = fourier_forward_with(f, FourierPath::Direct).map_err(fail)?;
        let size = b.xi.max_abs();
        let gap =
            a.xi.values()
                .iter()
                .zip(b.xi.values())
                .map(|(u, v)| (u - v).norm())
                .fold(0.0, f64::max);
        path_gap = path_gap.max(gap / size);
    }
    ensure(path_gap <= 1e-12, || {
        format!("FFT and direct paths differ by {path_gap:.2e} relative")
    })?;
    Ok(format!(
        "analytic {analytic:.2e}, round trip {round_trip:.2e}, Plancherel {plancherel:.2e}, FFT vs direct {path_gap:.2e}"
    ))
}

fn vertical_invariance() -> Outcome {
    let s_values: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let cases: [(f64, Vec<C64>); 3] = [
        (0.5, vec![C64::new(1.0, 0.0)]),
        (0.3, vec![C64::new(1.0, -0.5), C64::new(2.0, 0.0)]),
        (0.75, vec![C64::new(0.2, 0.1), C64::new(-3.0, 1.0), C64::new(0.0, 5.0)]),
    ];
    let mut worst: f64 = 0.0;
    for (theta, x) in &cases {
        let g = gaussian(-20.0, 40.0 / 2048.0, 2049, x);
        let sf = StripFunction::new(*theta, g).map_err(fail)?;
        // Size of the invariant transform: |ĝ| peaks at √(2π)·max|x_c|.
        let scale = (2.0 * PI).sqrt() * x.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (i, a) in s_values.iter().enumerate() {
            for b in &s_values[i + 1..] {
                let dev = vertical_invariance_check(&sf, *a, *b).map_err(fail)? / scale;
                worst = worst.max(dev);
                ensure(dev <= 1e-6, || {
                    format!("θ={theta}, s=({a},{b}): relative deviation {dev:.2e}")
                })?;
            }
        }
    }
    Ok(format!("3 generators × 36 pairs, max relative deviation {worst:.2e}"))
}

fn weighted_identity() -> Outcome {
    let h = 0.05;
    let w1 = [1.0, 2.0, 0.5, 3.0];
    let shifts = [5, -3, 0, 12];
    let w0: Vec<f64> = w1.iter().zip(shifts).map(|(w, k)| w * (k as f64 * h).exp()).collect();
    let m = 800;
    let f = GridFunction::from_fn(-20.0, h, m, 4, |t| {
        (0..4)
            .map(|c| C64::from_polar((-(t - c as f64 + 1.5).powi(2)).exp(), 0.7 * c as f64))
            .collect()
    })
    .map_err(fail)?;
    let mut translation: f64 = 0.0;
    for p in [[Exponent::ONE, Exponent::TWO], [Exponent::TWO, Exponent::INFINITY]] {
        translation = translation.max(translation_identity_check(p, &w0, &w1, &f).map_err(fail)?);
    }
    ensure(translation <= 1e-10, || {
        format!("translation identity deviates by {translation:.2e}")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5157);
    let (lo, hi) = (0.1f64.ln(), 10f64.ln());
    let ww0: Vec<f64> = (0..4).map(|_| rng.random_range(lo..hi).exp()).collect();
    let ww1: Vec<f64> = (0..4).map(|_| rng.random_range(lo..hi).exp()).collect();
    let eq = weighted_equivalence_check(
        Exponent::ONE,
        Exponent::TWO,
        &ww0,
        &ww1,
        0.5,
        100,
        17,
        &QuadOptions::default(),
    )
    .map_err(fail)?;
    ensure(eq.ratios.len() == 100 && eq.spread <= 10.0, || {
        format!("{} samples, max/min ratio {:.3}", eq.ratios.len(), eq.spread)
    })?;

    let fam = OperatorFamily::weighted(ww0.clone(), ww1.clone(), 0.5).map_err(fail)?;
    let cx = couple(Exponent::ONE, &ww0, Exponent::TWO, &ww1);
    let params = InterpParams::new(0.5, Exponent::ONE, Exponent::TWO).map_err(fail)?;
    let opts = SteinOptions {
        samples: 200,
        constant: 10.0,
        seed: 23,
        ..SteinOptions::default()
    };
    let out = stein_check(&fam, &cx, &cx, &params, &opts).map_err(fail)?;
    let r = &out.report;
    ensure(r.samples == 200 && r.violations == 0, || {
        format!(
            "{} violations over {} samples, C_empirical {:.3}",
            r.violations, r.samples, r.c_empirical
        )
    })?;
    Ok(format!(
        "translation {translation:.2e}; equivalence spread {:.3}; stein C_empirical {:.3}, 0/200 violations",
        eq.spread, r.c_empirical
    ))
}

fn kernel_chain() -> Outcome {
    let a = diag(&[C64::new(1.0, 0.0), C64::new(2.0, 0.0)]);
    let opts = MultiplierOptions::default();
    let spaces = [
        space(Exponent::TWO, &[1.0, 1.0]),
        space(Exponent::ONE, &[1.0, 3.0]),
        space(Exponent::INFINITY, &[2.0, 0.5]),
    ];
    let mut worst_chain: f64 = 0.0;
    let mut worst_order = f64::NEG_INFINITY;
    let mut count = 0;
    for (s, sigma0, sigma1) in [(1.0, 1.0, 1.0), (0.5, 0.8, 1.2), (3.0, 1.5, 0.9)] {
        let fam = OperatorFamily::resolvent(a.clone(), s, sigma0, sigma1, 0.5).map_err(fail)?;
        for sp in &spaces {
            for j in 0..2 {
                let p = sp.exponent();
                let b = multiplier_norm_bounds(&fam, j, sp, sp, p, p, &opts).map_err(fail)?;
                let chain = b.upper / (b.chain_bound * (1.0 + 1e-3));
                worst_chain = worst_chain.max(chain);
                worst_order = worst_order.max(b.lower - b.upper);
                count += 1;
                ensure(chain <= 1.0, || {
                    format!(
                        "s={s} σ=({sigma0},{sigma1}) j={j}: kernel {} exceeds chain {}",
                        b.upper, b.chain_bound
                    )
                })?;
                ensure(b.lower <= b.upper, || {
                    format!("s={s} j={j}: lower {} > upper {}", b.lower, b.upper)
                })?;
            }
        }
    }
    Ok(format!(
        "{count} instances, max kernel/chain {worst_chain:.4}, max lower-upper {worst_order:.2e}"
    ))
}

fn diag(d: &[C64]) -> CMatrix {
    CMatrix::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { C64::new(0.0, 0.0) })
}

fn sectoriality() -> Outcome {
    let spec = SectorSpec::default();
    let l2 = space(Exponent::TWO, &[1.0, 1.0]);
    let id = diag(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
    let at_30 = resolvent_sup(&id, &l2, PI / 6.0, &spec).map_err(fail)?.value;
    let at_90 = resolvent_sup(&id, &l2, PI / 2.0, &spec).map_err(fail)?.value;
    ensure((at_30 - 2.0).abs() <= 1e-3, || format!("sup at π/6 is {at_30}"))?;
    ensure((at_90 - 1.0).abs() <= 1e-3, || format!("sup at π/2 is {at_90}"))?;

    let jordan = CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
        ],
    );
    let set: [(CMatrix, f64); 5] = [
        (diag(&[C64::new(1.0, 0.0), C64::from_polar(1.0, PI / 4.0)]), PI / 4.0),
        (diag(&[C64::from_polar(2.0, -PI / 6.0), C64::new(0.5, 0.0)]), PI / 6.0),
        (diag(&[C64::from_polar(1.0, 1.2), C64::from_polar(3.0, -0.4)]), 1.2),
        (diag(&[C64::new(1.0, 0.0), C64::new(2.0, 0.0)]), 0.0),
        (jordan, 0.0),
    ];
    let mut worst_angle: f64 = 0.0;
    for (a, want) in &set {
        let got = sectoriality_angle(a, &l2, &spec).map_err(fail)?.omega;
        worst_angle = worst_angle.max((got - want).abs());
        ensure((got - want).abs() <= 1e-3, || format!("angle {got} vs {want}"))?;
    }

    let a = diag(&[C64::new(1.0, 0.0), C64::new(4.0, 0.0)]);
    let c = couple(Exponent::ONE, &[1.0, 1.0], Exponent::ONE, &[4.0, 1.0]);
    let params = InterpParams::new(0.5, Exponent::ONE, Exponent::ONE).map_err(fail)?;
    let s_grid: Vec<f64> = (0..61).map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / 60.0)).collect();
    let opts = SectorialityCheckOptions {
        constant: 10.0,
        ..SectorialityCheckOptions::default()
    };
    let rep = interp_sectoriality_check(&a, &c, &params, PI / 4.0, PI / 3.0, &s_grid, &opts).map_err(fail)?;
    let signs = rep.rows.iter().filter(|r| r.sign < 0.0).count();
    ensure(rep.rows.len() == 122 && signs == 61, || {
        format!("{} rows, {signs} negative", rep.rows.len())
    })?;
    ensure(rep.violations == 0, || {
        format!("{} violations, max ratio {:.3}", rep.violations, rep.max_ratio)
    })?;
    Ok(format!(
        "sup(π/6) {at_30:.6}, sup(π/2) {at_90:.6}, max angle error {worst_angle:.2e}, interp max ratio {:.3} over 122 points",
        rep.max_ratio
    ))
}

fn rademacher() -> Outcome {
    let scalar = space(Exponent::TWO, &[1.0]);
    let v = |x: f64| vec![C64::new(x, 0.0)];
    let avg = rademacher_average(&scalar, &[v(3.0), v(4.0)]).map_err(fail)?;
    ensure(avg == 5.0, || format!("(3,4) gives {avg}"))?;

    let sp = space(Exponent::ONE, &[1.0, 2.5, 0.5]);
    let xs: Vec<Vec<C64>> = vec![
        vec![C64::new(1.0, 0.5), C64::new(-2.0, 0.0), C64::new(0.25, 1.0)],
        vec![C64::new(0.0, 3.0), C64::new(1.5, -1.0), C64::new(2.0, 0.0)],
        vec![C64::new(-1.0, 0.0), C64::new(0.5, 0.5), C64::new(0.0, -4.0)],
    ];
    let base = rademacher_average(&sp, &xs).map_err(fail)?;
    for lambda in [C64::new(2.0, 0.0), C64::new(-0.5, 0.0), C64::new(0.0, 4.0)] {
        let scaled: Vec<Vec<C64>> = xs.iter().map(|x| x.iter().map(|c| c * lambda).collect()).collect();
        let got = rademacher_average(&sp, &scaled).map_err(fail)?;
        ensure(got == lambda.norm() * base, || {
            format!("λ={lambda}: {got} vs {}", lambda.norm() * base)
        })?;
    }
    for i in 0..xs.len() {
        let mut flipped = xs.clone();
        flipped[i] = flipped[i].iter().map(|c| -c).collect();
        let got = rademacher_average(&sp, &flipped).map_err(fail)?;
        ensure(got == base, || format!("flipping vector {i}: {got} vs {base}"))?;
    }

    let t = CMatrix::from_row_slice(
        3,
        3,
        &[
            C64::new(1.0, 0.0),
            C64::new(-2.0, 1.0),
            C64::new(0.0, 0.5),
            C64::new(0.3, 0.0),
            C64::new(1.0, 0.0),
            C64::new(-1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(2.0, -1.0),
            C64::new(0.5, 0.0),
        ],
    );
    let sampler = NormSampler {
        seed: 31,
        ..NormSampler::default()
    };
    let mut worst: f64 = 0.0;
    for r in EXPONENTS {
        let s = space(r, &[1.0, 2.5, 0.5]);
        let rb = r_bound_lower(std::slice::from_ref(&t), &s, &sampler).map_err(fail)?;
        let op = operator_norm_lower(&t, &s, &s, &sampler).map_err(fail)?;
        worst = worst.max((rb - op).abs());
        ensure(rb == op, || format!("r={r}: R-bound {rb} vs operator norm {op}"))?;
    }
    Ok(format!(
        "(3,4) → {avg}; homogeneity and sign flips exact; single-operator R-bound matches ({worst:.1e})"
    ))
}

/// Runs every example config twice, plus a reduced equivalence suite, and
/// compares the artifacts byte for byte.
fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_interplab");
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let scratch = tempfile::tempdir().map_err(fail)?;
    let mut jobs: Vec<(String, PathBuf)> = Vec::new();
    for entry in fs::read_dir(&configs).map_err(fail)? {
        let path = entry.map_err(fail)?.path();
        if path.file_name().is_some_and(|n| n == "complex_check_suite.json") {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(fail)?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(fail)?;
        let cmd = v["command"]
            .as_str()
            .ok_or_else(|| format!("{} lacks a command", path.display()))?;
        jobs.push((cmd.to_string(), path));
    }
    let small_suite = scratch.path().join("small_suite.json");
    fs::write(
        &small_suite,
        r#"{"command": "complex-check", "seed": 4, "suite": {"couples": 2, "max_dim": 2, "thetas": [0.5], "ps": [2]}}"#,
    )
    .map_err(fail)?;
    jobs.push(("complex-check".into(), small_suite));
    jobs.sort();
    let mut commands: Vec<String> = jobs.iter().map(|(c, _)| c.clone()).collect();
    commands.dedup();
    ensure(commands.len() == 9, || format!("configs cover only {commands:?}"))?;
    let mut files = 0;
    for (k, (cmd, path)) in jobs.iter().enumerate() {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let dir = scratch.path().join(format!("{k}_{run}"));
            let status = Process::new(bin)
                .args([cmd.as_str(), "--config"])
                .arg(path)
                .arg("--out-dir")
                .arg(&dir)
                .env("INTERPLAB_THREADS", "1")
                .output()
                .map_err(fail)?;
            ensure(status.status.code().is_some_and(|c| c <= 1), || {
                format!("{} exited with {:?}", path.display(), status.status.code())
            })?;
            let mut names: Vec<_> = fs::read_dir(&dir)
                .map_err(fail)?
                .map(|e| e.map(|e| e.file_name()))
                .collect::<Result<_, _>>()
                .map_err(fail)?;
            names.sort();
            let contents: Vec<(std::ffi::OsString, Vec<u8>)> = names
                .into_iter()
                .map(|n| fs::read(dir.join(&n)).map(|b| (n, b)))
                .collect::<Result<_, _>>()
                .map_err(fail)?;
            outputs.push(contents);
        }
        ensure(outputs[0] == outputs[1], || {
            format!("{} produced different artifacts", path.display())
        })?;
        files += outputs[0].len();
    }
    Ok(format!(
        "{} configs over 9 subcommands, {files} artifacts identical on rerun",
        jobs.len()
    ))
}
