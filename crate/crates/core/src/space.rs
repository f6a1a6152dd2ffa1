//! Weighted `ℓ^r` spaces over a finite coordinate set, Banach couples built
//! from them, and the exponent bookkeeping shared by every interpolation
//! routine.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::C64;

/// An integrability exponent `r ∈ [1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Exponent(f64);

impl Exponent {
    pub const ONE: Exponent = Exponent(1.0);
    pub const TWO: Exponent = Exponent(2.0);
    pub const INFINITY: Exponent = Exponent(f64::INFINITY);

    pub fn new(r: f64) -> Result<Self> {
        if r.is_nan() || r < 1.0 {
            return Err(invalid(format!("exponent must lie in [1, inf], got {r}")));
        }
        Ok(Exponent(r))
    }

    /// Builds the exponent from its reciprocal `1/r ∈ [0, 1]`.
    pub fn from_recip(s: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) {
            return Err(invalid(format!("reciprocal exponent must lie in [0, 1], got {s}")));
        }
        if s == 0.0 {
            Ok(Exponent::INFINITY)
        } else {
            Ok(Exponent((1.0 / s).max(1.0)))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// `1/r`, with `1/∞ = 0`.
    pub fn recip(self) -> f64 {
        if self.is_infinite() {
            0.0
        } else {
            1.0 / self.0
        }
    }

    /// Hölder conjugate `r'` with `1/r + 1/r' = 1`.
    pub fn conjugate(self) -> Exponent {
        if self.is_infinite() {
            Exponent::ONE
        } else if self.0 == 1.0 {
            Exponent::INFINITY
        } else {
            Exponent(self.0 / (self.0 - 1.0))
        }
    }
}

impl TryFrom<f64> for Exponent {
    type Error = crate::Error;

    fn try_from(r: f64) -> Result<Self> {
        Exponent::new(r)
    }
}

impl From<Exponent> for f64 {
    fn from(r: Exponent) -> f64 {
        r.0
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// `ℓ^r` norm of a sequence of nonnegative reals, scaled to avoid overflow.
pub(crate) fn lr_norm<I>(values: I, r: Exponent) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    let max = values.clone().fold(0.0_f64, f64::max);
    if r.is_infinite() || max == 0.0 || !max.is_finite() {
        return max;
    }
    let rv = r.value();
    if rv == 1.0 {
        return values.sum();
    }
    let s: f64 = values.map(|v| (v / max).powf(rv)).sum();
    max * s.powf(1.0 / rv)
}

/// A finite-dimensional space with norm `‖x‖ = ‖(w_i x_i)‖_{ℓ^r}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedLrSpace {
    exponent: Exponent,
    weights: Vec<f64>,
}

impl WeightedLrSpace {
    pub fn new(exponent: Exponent, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("space dimension must be at least 1"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(invalid(format!("weights must be finite and positive, got {w}")));
        }
        Ok(WeightedLrSpace { exponent, weights })
    }

    /// Unit-weight `ℓ^r` of dimension `dim`.
    pub fn unweighted(dim: usize, exponent: Exponent) -> Result<Self> {
        Self::new(exponent, vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn exponent(&self) -> Exponent {
        self.exponent
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn norm(&self, x: &[C64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.norm_unchecked(x))
    }

    pub(crate) fn norm_unchecked(&self, x: &[C64]) -> f64 {
        lr_norm(x.iter().zip(&self.weights).map(|(xi, w)| w * xi.norm()), self.exponent)
    }

    /// Norm of the vector with the given moduli.
    pub(crate) fn norm_of_moduli(&self, m: &[f64]) -> f64 {
        lr_norm(m.iter().zip(&self.weights).map(|(mi, w)| w * mi.abs()), self.exponent)
    }

    /// Dual norm `‖(y_i / w_i)‖_{r'}` of a functional given by its moduli.
    pub(crate) fn dual_norm_of_moduli(&self, y: &[f64]) -> f64 {
        lr_norm(
            y.iter().zip(&self.weights).map(|(yi, w)| yi.abs() / w),
            self.exponent.conjugate(),
        )
    }

    /// Norm of the identity map `self → target`, i.e. the smallest `C` with
    /// `‖y‖_target ≤ C‖y‖_self` for every `y`.
    pub fn embedding_norm(&self, target: &WeightedLrSpace) -> Result<f64> {
        check_dim(self.dim(), target.dim())?;
        let ratios = target.weights.iter().zip(&self.weights).map(|(a, b)| a / b);
        let (from, to) = (self.exponent, target.exponent);
        if to.recip() <= from.recip() {
            Ok(ratios.fold(0.0, f64::max))
        } else {
            let s = Exponent::from_recip(to.recip() - from.recip())?;
            Ok(lr_norm(ratios, s))
        }
    }
}

/// Two weighted spaces over the same coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanachCouple {
    x0: WeightedLrSpace,
    x1: WeightedLrSpace,
}

impl BanachCouple {
    pub fn new(x0: WeightedLrSpace, x1: WeightedLrSpace) -> Result<Self> {
        check_dim(x0.dim(), x1.dim())?;
        Ok(BanachCouple { x0, x1 })
    }

    pub fn dim(&self) -> usize {
        self.x0.dim()
    }

    pub fn x0(&self) -> &WeightedLrSpace {
        &self.x0
    }

    pub fn x1(&self) -> &WeightedLrSpace {
        &self.x1
    }

    pub fn endpoint(&self, j: usize) -> &WeightedLrSpace {
        if j == 0 {
            &self.x0
        } else {
            &self.x1
        }
    }

    /// `max(‖x‖_{X0}, ‖x‖_{X1})`.
    pub fn intersection_norm(&self, x: &[C64]) -> Result<f64> {
        Ok(self.x0.norm(x)?.max(self.x1.norm(x)?))
    }

    /// `K(1, x)`.
    pub fn sum_norm(&self, x: &[C64]) -> Result<f64> {
        Ok(crate::kfunc::k_functional(self, x, 1.0, &Default::default())?.value)
    }

    /// Parameters `t` beyond which the K-functional is exactly linear
    /// (`t ≤ lower`, `K = t‖x‖_{X1}`) or exactly constant (`t ≥ upper`,
    /// `K = ‖x‖_{X0}`), uniformly in `x`.
    pub fn k_breakpoints(&self) -> (f64, f64) {
        // Dimensions agree by construction.
        let up = self.x1.embedding_norm(&self.x0).unwrap_or(f64::INFINITY);
        let down = self.x0.embedding_norm(&self.x1).unwrap_or(f64::INFINITY);
        (1.0 / down, up)
    }
}

/// Interpolation parameter `θ` with source exponents `(p0, p1)` and target
/// exponents `(q0, q1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpParams {
    pub theta: f64,
    pub p0: Exponent,
    pub p1: Exponent,
    pub q0: Exponent,
    pub q1: Exponent,
}

impl InterpParams {
    /// Parameters with `q_j = p_j`.
    pub fn new(theta: f64, p0: Exponent, p1: Exponent) -> Result<Self> {
        Self::with_target(theta, p0, p1, p0, p1)
    }

    pub fn with_target(theta: f64, p0: Exponent, p1: Exponent, q0: Exponent, q1: Exponent) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(invalid(format!("theta must lie in (0, 1), got {theta}")));
        }
        Ok(InterpParams { theta, p0, p1, q0, q1 })
    }

    /// `1/p = (1-θ)/p0 + θ/p1`.
    pub fn p(&self) -> Exponent {
        mix(self.theta, self.p0, self.p1)
    }

    /// `1/q = (1-θ)/q0 + θ/q1`.
    pub fn q(&self) -> Exponent {
        mix(self.theta, self.q0, self.q1)
    }

    pub fn p_endpoint(&self, j: usize) -> Exponent {
        if j == 0 {
            self.p0
        } else {
            self.p1
        }
    }

    pub fn q_endpoint(&self, j: usize) -> Exponent {
        if j == 0 {
            self.q0
        } else {
            self.q1
        }
    }
}

fn mix(theta: f64, a: Exponent, b: Exponent) -> Exponent {
    let s = (1.0 - theta) * a.recip() + theta * b.recip();
    Exponent::from_recip(s.clamp(0.0, 1.0)).unwrap_or(Exponent::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn norm_examples() {
        let l2 = WeightedLrSpace::unweighted(2, Exponent::TWO).unwrap();
        assert!((l2.norm(&[c(3.0), c(4.0)]).unwrap() - 5.0).abs() < 1e-15);

        let linf = WeightedLrSpace::new(Exponent::INFINITY, vec![2.0, 1.0]).unwrap();
        assert_eq!(linf.norm(&[c(1.0), c(5.0)]).unwrap(), 5.0);

        let l1 = WeightedLrSpace::new(Exponent::ONE, vec![1.0, 3.0]).unwrap();
        assert_eq!(l1.norm(&[c(1.0), c(-1.0)]).unwrap(), 4.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let l2 = WeightedLrSpace::unweighted(2, Exponent::TWO).unwrap();
        assert!(matches!(
            l2.norm(&[c(1.0)]),
            Err(crate::Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        let l3 = WeightedLrSpace::unweighted(3, Exponent::TWO).unwrap();
        assert!(BanachCouple::new(l2, l3).is_err());
    }

    #[test]
    fn invalid_spaces_rejected() {
        assert!(Exponent::new(0.5).is_err());
        assert!(Exponent::new(f64::NAN).is_err());
        assert!(WeightedLrSpace::new(Exponent::ONE, vec![]).is_err());
        assert!(WeightedLrSpace::new(Exponent::ONE, vec![1.0, 0.0]).is_err());
        assert!(WeightedLrSpace::new(Exponent::ONE, vec![-1.0]).is_err());
    }

    #[test]
    fn derived_exponents() {
        let params = InterpParams::new(0.5, Exponent::ONE, Exponent::TWO).unwrap();
        assert!((params.p().value() - 4.0 / 3.0).abs() < 1e-14);
        let params = InterpParams::new(0.25, Exponent::INFINITY, Exponent::INFINITY).unwrap();
        assert!(params.p().is_infinite());
        let params = InterpParams::new(0.5, Exponent::INFINITY, Exponent::ONE).unwrap();
        assert!((params.p().value() - 2.0).abs() < 1e-14);
        assert!(InterpParams::new(1.5, Exponent::ONE, Exponent::ONE).is_err());
        assert!(InterpParams::new(0.0, Exponent::ONE, Exponent::ONE).is_err());
    }

    #[test]
    fn conjugates() {
        assert_eq!(Exponent::ONE.conjugate(), Exponent::INFINITY);
        assert_eq!(Exponent::INFINITY.conjugate(), Exponent::ONE);
        assert!((Exponent::new(3.0).unwrap().conjugate().value() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn embedding_norms_match_brute_force() {
        // ℓ^2 (weights 1,2) into ℓ^1 (weights 3,1): ‖(3, 1/2)‖_2.
        let from = WeightedLrSpace::new(Exponent::TWO, vec![1.0, 2.0]).unwrap();
        let to = WeightedLrSpace::new(Exponent::ONE, vec![3.0, 1.0]).unwrap();
        let c = from.embedding_norm(&to).unwrap();
        assert!((c - (9.0f64 + 0.25).sqrt()).abs() < 1e-14);
        let mut best = 0.0f64;
        for k in 0..=2000 {
            let a = std::f64::consts::FRAC_PI_2 * k as f64 / 2000.0;
            let y = [c64(a.cos()), c64(a.sin() / 2.0)];
            best = best.max(to.norm(&y).unwrap() / from.norm(&y).unwrap());
        }
        assert!(best <= c * (1.0 + 1e-12) && best >= c * (1.0 - 1e-5));
        // ℓ^1 into ℓ^2: max of weight ratios.
        let c = to.embedding_norm(&from).unwrap();
        assert!((c - 2.0).abs() < 1e-15);
    }

    fn c64(re: f64) -> C64 {
        C64::new(re, 0.0)
    }
}
