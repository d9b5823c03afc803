//! Weighted norms and shape measures.
//!
//! All weighted quantities are norms of the rescaled matrix Γ = √R Θ √C:
//! weighted Frobenius, weighted nuclear (sum of singular values of Γ) and
//! weighted ℓ∞ (max |Γ_jk|). On top of those sit two scale-invariant
//! ratios:
//!
//! - spikiness  α(Θ) = √(d_r d_c) · ‖Θ‖_w∞ / ‖Θ‖_wF, in [1, √(d_r d_c)];
//!   1 for perfectly flat matrices, maximal for a single-spike matrix.
//! - rank measure β(Θ) = ‖Θ‖_w1 / ‖Θ‖_wF, in [1, √min(d_r,d_c)], with
//!   β² ≤ rank(Θ).
//!
//! The constraint set used by the restricted-curvature analysis is
//! `α(Δ)·β(Δ) ≤ (1/c0)·√(n/(d·ln d))` with d the mean dimension; natural
//! logarithms are used throughout the crate.

use crate::error::{Error, Result};
use crate::mat::{numerical_rank_of, DenseMatrix};
use crate::weights::WeightPair;

/// Absolute slack when testing membership at the constraint-set boundary,
/// scaled by the size of the compared quantities; keeps exact-boundary
/// inputs inside under floating-point roundoff.
const BOUNDARY_TOL: f64 = 1e-12;

/// Γ = √R · Θ · √C, entrywise Γ_jk = √(R_j) Θ_jk √(C_k).
pub fn to_gamma(theta: &DenseMatrix, w: &WeightPair) -> Result<DenseMatrix> {
    w.check_matches(theta)?;
    Ok(DenseMatrix::from_fn(theta.n_rows(), theta.n_cols(), |j, k| {
        w.sqrt_row(j) * theta.get(j, k) * w.sqrt_col(k)
    }))
}

/// Inverse of [`to_gamma`]: Θ_jk = Γ_jk / (√(R_j) √(C_k)).
pub fn from_gamma(gamma: &DenseMatrix, w: &WeightPair) -> Result<DenseMatrix> {
    w.check_matches(gamma)?;
    Ok(DenseMatrix::from_fn(gamma.n_rows(), gamma.n_cols(), |j, k| {
        gamma.get(j, k) / (w.sqrt_row(j) * w.sqrt_col(k))
    }))
}

#[derive(Debug, Clone)]
pub struct MeasureReport {
    pub weighted_frobenius: f64,
    pub weighted_nuclear: f64,
    pub weighted_linf: f64,
    /// `None` for the zero matrix, where the ratio is undefined.
    pub spikiness: Option<f64>,
    /// `None` for the zero matrix.
    pub rank_measure: Option<f64>,
}

/// All weighted norms and both shape ratios in one pass (one SVD).
pub fn measures(theta: &DenseMatrix, w: &WeightPair) -> Result<MeasureReport> {
    let gamma = to_gamma(theta, w)?;
    let weighted_frobenius = gamma.frobenius_norm();
    let weighted_linf = gamma.max_abs();
    let weighted_nuclear = gamma.nuclear_norm()?;
    let (spikiness, rank_measure) = if weighted_frobenius > 0.0 {
        let root_dims = ((theta.n_rows() * theta.n_cols()) as f64).sqrt();
        (
            Some(root_dims * weighted_linf / weighted_frobenius),
            Some(weighted_nuclear / weighted_frobenius),
        )
    } else {
        (None, None)
    };
    Ok(MeasureReport {
        weighted_frobenius,
        weighted_nuclear,
        weighted_linf,
        spikiness,
        rank_measure,
    })
}

/// Spikiness ratio alone; errors on the zero matrix.
pub fn spikiness(theta: &DenseMatrix, w: &WeightPair) -> Result<f64> {
    measures(theta, w)?
        .spikiness
        .ok_or(Error::ZeroMatrix("spikiness"))
}

#[derive(Debug, Clone, Copy)]
pub struct ConstraintCheck {
    pub member: bool,
    /// threshold − spikiness·rank_measure; ≥ 0 means inside (boundary
    /// counts as inside).
    pub margin: f64,
    pub product: f64,
    pub threshold: f64,
}

/// Membership of Δ in the low-spikiness constraint set
/// `α(Δ)·β(Δ) ≤ (1/c0)·√(n/(d·ln d))`, d = (d_r+d_c)/2, natural log.
pub fn constraint_membership(
    delta: &DenseMatrix,
    w: &WeightPair,
    n: usize,
    c0: f64,
) -> Result<ConstraintCheck> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if !(c0 > 0.0) {
        return Err(Error::InvalidArgument(format!("c0 must be positive, got {c0}")));
    }
    let d = w.mean_dim();
    if d <= 1.0 {
        return Err(Error::InvalidArgument(
            "constraint set needs mean dimension > 1 (ln d must be positive)".into(),
        ));
    }
    let report = measures(delta, w)?;
    let (Some(alpha), Some(beta)) = (report.spikiness, report.rank_measure) else {
        return Err(Error::ZeroMatrix("constraint membership"));
    };
    let product = alpha * beta;
    let threshold = (n as f64 / (d * d.ln())).sqrt() / c0;
    let margin = threshold - product;
    Ok(ConstraintCheck {
        member: margin >= -BOUNDARY_TOL * (1.0 + product.abs()),
        margin,
        product,
        threshold,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct LqCheck {
    pub member: bool,
    /// Σ_j σ_j(Γ)^q with the 0⁰ = 0 convention.
    pub value: f64,
}

/// Membership of Θ in the ball Σ_j σ_j(√RΘ√C)^q ≤ rho_q for q ∈ [0,1].
/// q = 0 counts singular values above the numerical-rank cutoff, i.e. the
/// rank.
pub fn lq_membership(theta: &DenseMatrix, w: &WeightPair, q: f64, rho_q: f64) -> Result<LqCheck> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("q must lie in [0,1], got {q}")));
    }
    let gamma = to_gamma(theta, w)?;
    let sv = gamma.singular_values()?;
    let value = if q == 0.0 {
        numerical_rank_of(&sv) as f64
    } else {
        sv.iter().map(|s| s.powf(q)).sum()
    };
    Ok(LqCheck {
        member: value <= rho_q,
        value,
    })
}
