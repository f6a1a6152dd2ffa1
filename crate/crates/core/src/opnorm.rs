//! Norms of complex matrices between weighted `ℓ^r` spaces.
//!
//! `‖T : ℓ^r_w → ℓ^s_v‖ = ‖diag(v) T diag(w)^{-1} : ℓ^r → ℓ^s‖`. The cases
//! `r = 1`, `s = ∞` and `r = s = 2` are computed exactly; otherwise an upper
//! bound comes from embeddings and Riesz–Thorin, and a lower bound from
//! sampled vectors refined by the nonlinear power method.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::space::{lr_norm, Exponent, WeightedLrSpace};
use crate::C64;

pub type CMatrix = DMatrix<C64>;

/// Lower and upper estimates; equal when the norm is computed exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpNormBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Controls the sampled lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSampler {
    /// Random unit-box vectors tried besides the coordinate vectors.
    pub random: usize,
    /// Power-method iterations from each of the three best candidates.
    pub iters: usize,
    pub seed: u64,
}

impl Default for NormSampler {
    fn default() -> Self {
        NormSampler {
            random: 16,
            iters: 30,
            seed: 0,
        }
    }
}

impl NormSampler {
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Components with real and imaginary parts uniform in `[-1, 1)`.
pub fn random_vector(rng: &mut impl Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// `diag(v) T diag(w)^{-1}`.
fn unweighted(t: &CMatrix, from: &WeightedLrSpace, to: &WeightedLrSpace) -> CMatrix {
    let mut b = t.clone();
    for i in 0..b.nrows() {
        for j in 0..b.ncols() {
            b[(i, j)] *= to.weights()[i] / from.weights()[j];
        }
    }
    b
}

fn check_shape(t: &CMatrix, from: &WeightedLrSpace, to: &WeightedLrSpace) -> Result<()> {
    check_dim(from.dim(), t.ncols())?;
    check_dim(to.dim(), t.nrows())
}

fn column_norm(b: &CMatrix, j: usize, s: Exponent) -> f64 {
    lr_norm(b.column(j).iter().map(|z| z.norm()), s)
}

fn row_norm(b: &CMatrix, i: usize, s: Exponent) -> f64 {
    lr_norm(b.row(i).iter().map(|z| z.norm()), s)
}

fn norm_1_to(b: &CMatrix, s: Exponent) -> f64 {
    (0..b.ncols()).map(|j| column_norm(b, j, s)).fold(0.0, f64::max)
}

fn norm_to_inf(b: &CMatrix, r: Exponent) -> f64 {
    (0..b.nrows())
        .map(|i| row_norm(b, i, r.conjugate()))
        .fold(0.0, f64::max)
}

fn spectral_norm(b: &CMatrix) -> f64 {
    b.singular_values().iter().copied().fold(0.0, f64::max)
}

fn exact_unweighted(b: &CMatrix, r: Exponent, s: Exponent) -> Option<f64> {
    if r == Exponent::ONE {
        Some(norm_1_to(b, s))
    } else if s.is_infinite() {
        Some(norm_to_inf(b, r))
    } else if r == Exponent::TWO && s == Exponent::TWO {
        Some(spectral_norm(b))
    } else {
        None
    }
}

/// The exact norm when `r = 1`, `s = ∞` or `r = s = 2`.
pub fn operator_norm_exact(t: &CMatrix, from: &WeightedLrSpace, to: &WeightedLrSpace) -> Result<Option<f64>> {
    check_shape(t, from, to)?;
    Ok(exact_unweighted(
        &unweighted(t, from, to),
        from.exponent(),
        to.exponent(),
    ))
}

/// `‖x‖_b ≤ n^{max(0, 1/b - 1/a)} ‖x‖_a` on `ℂ^n`.
fn inclusion(n: usize, a: Exponent, b: Exponent) -> f64 {
    (n as f64).powf((b.recip() - a.recip()).max(0.0))
}

fn upper_unweighted(b: &CMatrix, r: Exponent, s: Exponent) -> f64 {
    if let Some(v) = exact_unweighted(b, r, s) {
        return v;
    }
    let (m, n) = (b.nrows(), b.ncols());
    let mut best = inclusion(n, r, Exponent::ONE) * norm_1_to(b, s);
    best = best.min(norm_to_inf(b, r) * inclusion(m, Exponent::INFINITY, s));
    best = best.min(inclusion(n, r, Exponent::TWO) * spectral_norm(b) * inclusion(m, Exponent::TWO, s));
    if r == s {
        let one = norm_1_to(b, Exponent::ONE);
        let inf = norm_to_inf(b, Exponent::INFINITY);
        best = best.min(one.powf(r.recip()) * inf.powf(1.0 - r.recip()));
    }
    best
}

/// A guaranteed upper bound (exact where available).
pub fn operator_norm_upper(t: &CMatrix, from: &WeightedLrSpace, to: &WeightedLrSpace) -> Result<f64> {
    check_shape(t, from, to)?;
    Ok(upper_unweighted(
        &unweighted(t, from, to),
        from.exponent(),
        to.exponent(),
    ))
}

fn unit_phase(z: C64) -> C64 {
    let a = z.norm();
    if a > 0.0 {
        z / a
    } else {
        C64::new(0.0, 0.0)
    }
}

/// A norming functional for `y` in `ℓ^s`, with unit `ℓ^{s'}` norm.
fn dual_vector(y: &[C64], s: Exponent) -> Vec<C64> {
    let nrm = lr_norm(y.iter().map(|z| z.norm()), s);
    if nrm == 0.0 {
        return vec![C64::new(0.0, 0.0); y.len()];
    }
    if s.is_infinite() {
        let k = (0..y.len()).fold(0, |b, i| if y[i].norm() > y[b].norm() { i } else { b });
        let mut z = vec![C64::new(0.0, 0.0); y.len()];
        z[k] = unit_phase(y[k]);
        return z;
    }
    let sv = s.value();
    y.iter()
        .map(|v| unit_phase(*v) * (v.norm() / nrm).powf(sv - 1.0))
        .collect()
}

fn ratio(b: &CMatrix, x: &[C64], r: Exponent, s: Exponent) -> f64 {
    let xn = lr_norm(x.iter().map(|z| z.norm()), r);
    if xn == 0.0 {
        return 0.0;
    }
    let y = b * nalgebra::DVector::from_column_slice(x);
    lr_norm(y.iter().map(|z| z.norm()), s) / xn
}

/// Candidate inputs in sampler order: coordinate vectors, the all-ones
/// vector, then `sampler.random` random vectors.
pub fn sample_candidates(n: usize, sampler: &NormSampler) -> Vec<Vec<C64>> {
    let mut out = Vec::with_capacity(n + 1 + sampler.random);
    for i in 0..n {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[i] = C64::new(1.0, 0.0);
        out.push(e);
    }
    out.push(vec![C64::new(1.0, 0.0); n]);
    let mut rng = sampler.rng();
    for _ in 0..sampler.random {
        out.push(random_vector(&mut rng, n));
    }
    out
}

/// `max ‖Tx‖ / ‖x‖` over [`sample_candidates`], each of the three best
/// refined by the power method `x ← J_{r'}(T^* J_s(Tx))`, which never
/// decreases the ratio.
pub fn operator_norm_lower(
    t: &CMatrix,
    from: &WeightedLrSpace,
    to: &WeightedLrSpace,
    sampler: &NormSampler,
) -> Result<f64> {
    check_shape(t, from, to)?;
    let b = unweighted(t, from, to);
    let (r, s) = (from.exponent(), to.exponent());
    let mut scored: Vec<(f64, Vec<C64>)> = sample_candidates(b.ncols(), sampler)
        .into_iter()
        .map(|x| (ratio(&b, &x, r, s), x))
        .collect();
    let mut best = scored.iter().map(|c| c.0).fold(0.0, f64::max);
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let bh = b.adjoint();
    for (_, start) in scored.into_iter().take(3) {
        let mut x = start;
        for _ in 0..sampler.iters {
            let y: Vec<C64> = (&b * nalgebra::DVector::from_column_slice(&x))
                .iter()
                .copied()
                .collect();
            let z = dual_vector(&y, s);
            let u: Vec<C64> = (&bh * nalgebra::DVector::from_column_slice(&z))
                .iter()
                .copied()
                .collect();
            if u.iter().all(|v| v.norm() == 0.0) {
                break;
            }
            x = dual_vector(&u, r.conjugate());
            best = best.max(ratio(&b, &x, r, s));
        }
    }
    Ok(best)
}

/// Exact value when available, otherwise the sampled and guaranteed bounds.
pub fn operator_norm_bounds(
    t: &CMatrix,
    from: &WeightedLrSpace,
    to: &WeightedLrSpace,
    sampler: &NormSampler,
) -> Result<OpNormBounds> {
    if let Some(v) = operator_norm_exact(t, from, to)? {
        return Ok(OpNormBounds { lower: v, upper: v });
    }
    let lower = operator_norm_lower(t, from, to, sampler)?;
    let upper = operator_norm_upper(t, from, to)?;
    Ok(OpNormBounds {
        lower: lower.min(upper),
        upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(r: f64, w: &[f64]) -> WeightedLrSpace {
        WeightedLrSpace::new(Exponent::new(r).unwrap(), w.to_vec()).unwrap()
    }

    fn mat(rows: &[&[f64]]) -> CMatrix {
        CMatrix::from_fn(rows.len(), rows[0].len(), |i, j| C64::new(rows[i][j], 0.0))
    }

    #[test]
    fn exact_cases() {
        let t = mat(&[&[1.0, -2.0], &[3.0, 4.0]]);
        let l1 = space(1.0, &[1.0, 1.0]);
        let linf = space(f64::INFINITY, &[1.0, 1.0]);
        let l2 = space(2.0, &[1.0, 1.0]);
        assert_eq!(operator_norm_exact(&t, &l1, &l1).unwrap(), Some(6.0));
        assert_eq!(operator_norm_exact(&t, &linf, &linf).unwrap(), Some(7.0));
        let s = operator_norm_exact(&t, &l2, &l2).unwrap().unwrap();
        // Largest singular value of [[1,-2],[3,4]] is sqrt(15 + sqrt(125)).
        assert!((s - (15.0 + 125f64.sqrt()).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn weights_conjugate_the_matrix() {
        let t = mat(&[&[2.0]]);
        let from = space(1.0, &[4.0]);
        let to = space(1.0, &[3.0]);
        assert_eq!(operator_norm_exact(&t, &from, &to).unwrap(), Some(1.5));
    }

    #[test]
    fn lower_below_upper_and_close_for_general_exponents() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let t = CMatrix::from_fn(3, 3, |_, _| {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let from = space(3.0, &[1.0, 2.0, 0.5]);
            let to = space(1.5, &[1.0, 1.0, 3.0]);
            let b = operator_norm_bounds(&t, &from, &to, &NormSampler::default()).unwrap();
            assert!(b.lower <= b.upper * (1.0 + 1e-12));
            assert!(b.lower > 0.3 * b.upper);
        }
    }

    #[test]
    fn power_method_recovers_exact_norms() {
        let t = mat(&[&[1.0, 2.0, 0.0], &[0.5, -1.0, 3.0]]);
        let l2a = space(2.0, &[1.0, 1.0, 1.0]);
        let l2b = space(2.0, &[1.0, 2.0]);
        let exact = operator_norm_exact(&t, &l2a, &l2b).unwrap().unwrap();
        let lower = operator_norm_lower(&t, &l2a, &l2b, &NormSampler::default()).unwrap();
        assert!((lower - exact).abs() < 1e-8 * exact);
    }
}
