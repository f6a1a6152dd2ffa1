//! Numerical real and complex interpolation on finite-dimensional weighted
//! sequence-space couples.

// `!(x > 0.0)` guards deliberately reject NaN; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod applications;
pub mod error;
pub mod fourier;
pub mod grid;
pub mod interp;
pub mod kfunc;
pub mod mean;
pub mod opnorm;
pub mod space;
pub mod stein;
pub mod strip;

pub use applications::{
    eigenvalues, interp_sectoriality_check, r_bound_lower, rademacher_average, resolvent_sup, sectoriality_angle,
    semigroup_scan, spectral_angle, translation_identity_check, weighted_equivalence_check, InterpSectoriality,
    ScanPoint, SectorSpec, SectorSup, SectorialityCheckOptions, SectorialityResult, SectorialityRow, SemigroupReport,
    SemigroupRow, SemigroupSpec, WeightedEquivalence,
};
pub use error::{Error, Result};
pub use fourier::{
    fourier_forward, fourier_forward_with, fourier_inverse, fourier_inverse_with, FourierPath, Spectrum,
};
pub use grid::GridFunction;
pub use interp::{k_curve, real_interp_norm, real_interp_norm_with, scalar_interp_norm, InterpNorm, QuadOptions};
pub use kfunc::{k_functional, k_functional_oracle, k_functional_oracle_colinear, Decomposition, KOptions};
pub use mean::{
    boundary_weighted_norm, construct_mean_representation, mean_objective, minimize_mean_norm, smooth_representation,
    truncate_representation, BumpOptions, ConstructOptions, MeanGrid, MeanMinimum, MeanOptions, MeanRepresentation,
    Truncation,
};
pub use opnorm::{
    operator_norm_bounds, operator_norm_exact, operator_norm_lower, operator_norm_upper, CMatrix, NormSampler,
    OpNormBounds,
};
pub use space::{BanachCouple, Exponent, InterpParams, WeightedLrSpace};
pub use stein::{
    family_eval, interp_operator_norm_lower, multiplier_apply, multiplier_norm_bounds, stein_check, AscentOptions,
    FamilyKind, MultiplierBounds, MultiplierOptions, OperatorFamily, SteinOptions, SteinOutcome, SteinReport,
};
pub use strip::{
    boundary_fourier, complex_norm_upper, strip_eval, three_lines_check, vertical_invariance_check, BoundaryMode,
    ComplexNorm, DirectWindow, StripFunction, ThreeLines,
};

/// Complex scalars used throughout.
pub type C64 = num_complex::Complex64;
