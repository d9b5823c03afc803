//! Theoretical predictions and their empirical spot checks: the error
//! bound for the box-constrained nuclear-norm estimator, predicted decay
//! rates for exact-rank and ℓ_q classes, the minimax lower-bound floor,
//! the low-rank/residual error decomposition, restricted strong convexity
//! margins, and the operator norm of the sampled noise matrix.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mat::DenseMatrix;
use crate::measures::{constraint_membership, measures, spikiness, to_gamma};
use crate::packing::random_direction;
use crate::sampling::{
    apply_operator, draw_noise, sample_indices, GammaOperator, NoiseModel, SampleIndex,
};
use crate::seed::{derive_seed, seeded_rng};
use crate::weights::WeightPair;

/// Default leading constant of [`error_bound`]; the empirical dominance
/// checks use this value.
pub const DEFAULT_C1: f64 = 50.0;
/// Default leading constant of [`minimax_floor`].
pub const DEFAULT_C5: f64 = 1.0;
/// Default constraint-set constant for the restricted-convexity checks.
pub const DEFAULT_C0: f64 = 1.0;
/// Attempt cap for rejection sampling inside the Monte-Carlo drivers.
const REJECTION_ATTEMPTS: usize = 1000;

// ─── Error bound ────────────────────────────────────────────────────────

/// Right-hand side of the estimation error bound, split into its two
/// additive parts.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorBound {
    /// estimation + approximation.
    pub value: f64,
    /// c₁·α*·λ*·√r·‖Δ̃‖ in the weighted Frobenius norm.
    pub estimation: f64,
    /// c₁·α*·λ*·(sum of weighted singular values of Θ* beyond the first r).
    pub approximation: f64,
}

/// Sum of singular values of `m` beyond the first `r`.
pub fn singular_tail(m: &DenseMatrix, r: usize) -> Result<f64> {
    let values = m.singular_values()?;
    Ok(values.iter().skip(r).sum())
}

/// Bound on ‖Δ̃‖²_w(F) for the error Δ̃ = Θ̂ − Θ*:
/// c₁·α*·λ*·(√r·‖Δ̃‖_w(F) + tail_r(√RΘ*√C)). The caller compares the
/// squared weighted Frobenius error against `value`.
pub fn error_bound(
    delta_tilde: &DenseMatrix,
    theta_star: &DenseMatrix,
    w: &WeightPair,
    lambda_star: f64,
    r: usize,
    alpha_star: f64,
    c1: f64,
) -> Result<ErrorBound> {
    if !delta_tilde.same_dims(theta_star) {
        return Err(Error::DimensionMismatch(format!(
            "error is {:?} but target is {:?}",
            delta_tilde.dims(),
            theta_star.dims()
        )));
    }
    w.check_matches(theta_star)?;
    let (d_r, d_c) = theta_star.dims();
    if r == 0 || r > d_r.min(d_c) {
        return Err(Error::InvalidArgument(format!(
            "rank parameter {r} out of range for {d_r}x{d_c}"
        )));
    }
    if !(lambda_star > 0.0) || !(alpha_star > 0.0) || !(c1 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda_star, alpha_star, c1 must be positive, got {lambda_star}, {alpha_star}, {c1}"
        )));
    }
    let front = c1 * alpha_star * lambda_star;
    let err_norm = to_gamma(delta_tilde, w)?.frobenius_norm();
    let estimation = front * (r as f64).sqrt() * err_norm;
    let approximation = front * singular_tail(&to_gamma(theta_star, w)?, r)?;
    Ok(ErrorBound {
        value: estimation + approximation,
        estimation,
        approximation,
    })
}

// ─── Rate predictions ───────────────────────────────────────────────────

/// Matrix class a decay rate is predicted for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateClass {
    ExactRank { r: usize },
    LqBall { q: f64, rho_q: f64 },
}

/// Predicted squared-error decay: c·max(ν²,1)·(α*)²·r·d·ln d/n for the
/// exact-rank class and c·ρ_q·(max(ν²,1)·(α*)²·d·ln d/n)^(1−q/2) for the
/// ℓ_q ball; the latter reduces to the former at q = 0 with ρ₀ = r.
///
/// `d` and `n` are real-valued so exact grid points like n = c·r·d·ln d
/// can be passed without rounding.
pub fn predicted_rate(
    class: &RateClass,
    nu: f64,
    alpha_star: f64,
    d: f64,
    n: f64,
    c: f64,
) -> Result<f64> {
    if !(d > 1.0) || !(n > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need d > 1 and n > 0, got d = {d}, n = {n}"
        )));
    }
    if !(nu >= 0.0) || !(alpha_star > 0.0) || !(c >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need nu >= 0, alpha_star > 0, c >= 0, got {nu}, {alpha_star}, {c}"
        )));
    }
    let noise = nu * nu;
    let base = noise.max(1.0) * alpha_star * alpha_star * d * d.ln() / n;
    match *class {
        RateClass::ExactRank { r } => {
            if r == 0 {
                return Err(Error::InvalidArgument("rank must be positive".into()));
            }
            Ok(c * r as f64 * base)
        }
        RateClass::LqBall { q, rho_q } => {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::InvalidArgument(format!(
                    "q must lie in [0, 1], got {q}"
                )));
            }
            if !(rho_q >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "rho_q must be nonnegative, got {rho_q}"
                )));
            }
            Ok(c * rho_q * base.powf(1.0 - q / 2.0))
        }
    }
}

// ─── Minimax floor ──────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FloorBranch {
    /// ρ_q·(ν²·d/n)^(1−q/2) is the smaller branch.
    RankLimited,
    /// ν²·d²/n is the smaller branch.
    DimensionLimited,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FloorPrediction {
    /// c₅·min of the two branches.
    pub value: f64,
    pub branch: FloorBranch,
    /// Whether ρ_q ≤ (ν²·d/n)^(q/2)·d, the radius regime the floor
    /// assumes; at q = 0 this reduces to ρ₀ ≤ d.
    pub radius_ok: bool,
}

/// Lower bound on the achievable squared weighted Frobenius error over
/// the ℓ_q ball: c₅·min{ρ_q·(ν²d/n)^(1−q/2), ν²d²/n}.
pub fn minimax_floor(rho_q: f64, q: f64, nu: f64, d: f64, n: f64, c5: f64) -> Result<FloorPrediction> {
    if !(d > 0.0) || !(n > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need positive d and n, got d = {d}, n = {n}"
        )));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!(
            "q must lie in [0, 1], got {q}"
        )));
    }
    if !(rho_q >= 0.0) || !(nu >= 0.0) || !(c5 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need rho_q >= 0, nu >= 0, c5 > 0, got {rho_q}, {nu}, {c5}"
        )));
    }
    let snr = nu * nu * d / n;
    let rank_limited = rho_q * snr.powf(1.0 - q / 2.0);
    let dim_limited = nu * nu * d * d / n;
    let (value, branch) = if rank_limited <= dim_limited {
        (rank_limited, FloorBranch::RankLimited)
    } else {
        (dim_limited, FloorBranch::DimensionLimited)
    };
    Ok(FloorPrediction {
        value: c5 * value,
        branch,
        radius_ok: rho_q <= snr.powf(q / 2.0) * d,
    })
}

// ─── Error decomposition ────────────────────────────────────────────────

/// Split of an error matrix against the top-r singular subspaces of a
/// reference matrix.
#[derive(Debug, Clone)]
pub struct ErrorSplit {
    /// Part overlapping the subspace pair; rank at most 2r.
    pub low_rank: DenseMatrix,
    /// (I − P_U)·Δ·(I − P_V), the doubly orthogonal remainder.
    pub residual: DenseMatrix,
    /// True when σ_r ≈ σ_{r+1} of the reference, in which case the
    /// subspace pair was fixed by descending index order.
    pub degenerate: bool,
}

/// Decompose `delta_hat` = low_rank + residual against the top-r left and
/// right singular subspaces of `gamma_star`. The low-rank part always has
/// rank ≤ 2r.
pub fn decompose_error(
    delta_hat: &DenseMatrix,
    gamma_star: &DenseMatrix,
    r: usize,
) -> Result<ErrorSplit> {
    if !delta_hat.same_dims(gamma_star) {
        return Err(Error::DimensionMismatch(format!(
            "error is {:?} but reference is {:?}",
            delta_hat.dims(),
            gamma_star.dims()
        )));
    }
    let (d_r, d_c) = gamma_star.dims();
    if r == 0 || r > d_r.min(d_c) {
        return Err(Error::InvalidArgument(format!(
            "rank parameter {r} out of range for {d_r}x{d_c}"
        )));
    }
    let svd = gamma_star.svd()?;
    let k = svd.values.len();
    let degenerate = r < k && {
        let gap = svd.values[r - 1] - svd.values[r];
        gap.abs() <= 1e-10 * svd.values[0].max(f64::MIN_POSITIVE)
    };
    let u_r = DenseMatrix::from_fn(d_r, r, |i, j| svd.u.get(i, j));
    let v_r = DenseMatrix::from_fn(d_c, r, |i, j| svd.vt.get(j, i));
    // (I − U_r U_rᵀ)·Δ
    let left = delta_hat.sub(&u_r.matmul(&u_r.transpose().matmul(delta_hat)?)?)?;
    // …·(I − V_r V_rᵀ)
    let residual = left.sub(&left.matmul(&v_r)?.matmul(&v_r.transpose())?)?;
    let low_rank = delta_hat.sub(&residual)?;
    Ok(ErrorSplit {
        low_rank,
        residual,
        degenerate,
    })
}

/// Slack of the cone inequality ‖residual‖_* ≤ 3‖low_rank‖_* + 4·tail_r:
/// nonnegative means it holds for this split.
pub fn cone_slack(split: &ErrorSplit, gamma_star: &DenseMatrix, r: usize) -> Result<f64> {
    let tail = singular_tail(gamma_star, r)?;
    Ok(3.0 * split.low_rank.nuclear_norm()? + 4.0 * tail - split.residual.nuclear_norm()?)
}

// ─── Restricted strong convexity ────────────────────────────────────────

/// lhs − rhs of the restricted strong convexity inequality for one error
/// direction: ‖X(Δ)‖₂/√n − (1/8)·‖Δ‖_w(F)·(1 − 128·α_sp(Δ)/√n).
/// Nonnegative means the inequality holds for this Δ.
pub fn rsc_margin(
    indices: &[SampleIndex],
    delta: &DenseMatrix,
    w: &WeightPair,
    n: usize,
) -> Result<f64> {
    if n != indices.len() {
        return Err(Error::DimensionMismatch(format!(
            "n = {n} but {} indices were supplied",
            indices.len()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    w.check_matches(delta)?;
    let rep = measures(delta, w)?;
    let alpha = rep
        .spikiness
        .ok_or(Error::ZeroMatrix("restricted convexity margin"))?;
    let root_n = (n as f64).sqrt();
    let lhs = {
        let image = apply_operator(indices, delta)?;
        (image.iter().map(|v| v * v).sum::<f64>()).sqrt() / root_n
    };
    let rhs = rep.weighted_frobenius / 8.0 * (1.0 - 128.0 * alpha / root_n);
    Ok(lhs - rhs)
}

/// Outcome of a restricted strong convexity Monte-Carlo run.
#[derive(Debug, Clone, Serialize)]
pub struct RscReport {
    pub n_samples_tested: usize,
    /// count of margins < 0.
    pub violations: usize,
    pub margins: Vec<f64>,
}

/// Test the restricted strong convexity inequality on random unit-norm
/// rank-`rank` directions rejection-filtered to spikiness ≤ `spike_cap`
/// and membership in the constraint set for (n, c0); each draw uses its
/// own derived seed and a fresh index sample, so draws are independent of
/// execution order.
pub fn rsc_monte_carlo(
    w: &WeightPair,
    n: usize,
    draws: usize,
    rank: usize,
    c0: f64,
    spike_cap: f64,
    master_seed: u64,
) -> Result<RscReport> {
    let (d_r, d_c) = w.dims();
    if d_r != d_c {
        return Err(Error::InvalidArgument(format!(
            "direction sampler needs square dimensions, got {d_r}x{d_c}"
        )));
    }
    if draws == 0 {
        return Err(Error::InvalidArgument("need at least one draw".into()));
    }
    let mut margins = Vec::with_capacity(draws);
    for t in 0..draws {
        let mut rng = seeded_rng(derive_seed(master_seed, &[1, t as u64]));
        let mut accepted = None;
        for _ in 0..REJECTION_ATTEMPTS {
            let dir = random_direction(d_r, rank, &mut rng)?;
            if spikiness(&dir, w)? <= spike_cap
                && constraint_membership(&dir, w, n, c0)?.member
            {
                accepted = Some(dir);
                break;
            }
        }
        let dir = accepted.ok_or_else(|| Error::RejectionExhausted {
            attempts: REJECTION_ATTEMPTS,
            context: format!(
                "no rank-{rank} direction with spikiness <= {spike_cap} inside the \
                 constraint set for n = {n}, c0 = {c0}"
            ),
        })?;
        let indices = sample_indices(w, n, &mut rng)?;
        margins.push(rsc_margin(&indices, &dir, w, n)?);
    }
    let violations = margins.iter().filter(|m| **m < 0.0).count();
    Ok(RscReport {
        n_samples_tested: margins.len(),
        violations,
        margins,
    })
}

// ─── Noise operator norm ────────────────────────────────────────────────

/// Operator norm of (1/n)·Σ ξ_i·√(d_r·d_c)/(√R_j·√C_k)·sign_i·e_j e_kᵀ,
/// the sampled noise matrix whose size calibrates the regularization
/// weight.
pub fn noise_opnorm(
    indices: &[SampleIndex],
    xi: &[f64],
    w: &WeightPair,
    n: usize,
) -> Result<f64> {
    if xi.len() != indices.len() || n != indices.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} indices, {} noise values, n = {n}",
            indices.len(),
            xi.len()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let op = GammaOperator::new(indices, w)?;
    op.adjoint(xi)?.scale(1.0 / n as f64).operator_norm()
}

/// Draw `reps` independent noise matrices at noise level `nu` and return
/// their operator norms, one derived seed per repetition.
pub fn noise_norm_samples(
    w: &WeightPair,
    n: usize,
    nu: f64,
    model: NoiseModel,
    reps: usize,
    master_seed: u64,
) -> Result<Vec<f64>> {
    if reps == 0 {
        return Err(Error::InvalidArgument(
            "need at least one repetition".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if !(nu >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise level must be nonnegative, got {nu}"
        )));
    }
    let mut out = Vec::with_capacity(reps);
    for t in 0..reps {
        let mut rng = seeded_rng(derive_seed(master_seed, &[2, t as u64]));
        let indices = sample_indices(w, n, &mut rng)?;
        let xi: Vec<f64> = (0..n).map(|_| nu * draw_noise(model, &mut rng)).collect();
        out.push(noise_opnorm(&indices, &xi, w, n)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::random_low_rank;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn random_matrix(d_r: usize, d_c: usize, seed: u64) -> DenseMatrix {
        let mut rng = seeded_rng(seed);
        DenseMatrix::from_fn(d_r, d_c, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn tail_vanishes_at_exact_rank() {
        let w = WeightPair::uniform(8, 8);
        let theta = random_low_rank(8, 8, 2, 20.0, &w, &mut seeded_rng(1)).unwrap();
        let delta = random_matrix(8, 8, 2);
        let bound = error_bound(&delta, &theta, &w, 0.3, 2, 2.0, 50.0).unwrap();
        assert!(bound.approximation < 1e-10);
        assert_abs_diff_eq!(bound.value, bound.estimation, epsilon = 1e-10);
    }

    #[test]
    fn zero_error_leaves_only_the_tail() {
        let w = WeightPair::uniform(8, 8);
        let theta = random_low_rank(8, 8, 4, 20.0, &w, &mut seeded_rng(3)).unwrap();
        let zero = DenseMatrix::zeros(8, 8);
        let bound = error_bound(&zero, &theta, &w, 0.3, 2, 2.0, 50.0).unwrap();
        assert_eq!(bound.estimation, 0.0);
        assert_abs_diff_eq!(bound.value, bound.approximation, epsilon = 1e-12);
        assert!(bound.approximation > 0.0);
    }

    #[test]
    fn tail_matches_eigen_oracle() {
        // independent path: singular values via the symmetric eigensolver
        let w = WeightPair::new(
            vec![0.5, 1.5, 1.0, 1.0, 0.75, 1.25, 1.0, 1.0],
            vec![2.0, 0.5, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0],
        )
        .unwrap();
        let theta = random_low_rank(8, 8, 4, 40.0, &w, &mut seeded_rng(4)).unwrap();
        let gamma = to_gamma(&theta, &w).unwrap();
        let g = gamma.to_dmatrix();
        let eig = (g.transpose() * &g).symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let oracle_tail: f64 = vals.iter().skip(2).sum();
        let tail = singular_tail(&gamma, 2).unwrap();
        // the Gram-matrix route squares the conditioning, so expect ~1e-8
        assert_abs_diff_eq!(tail, oracle_tail, epsilon = 1e-6 * oracle_tail.max(1.0));
        // and the bound uses exactly this tail
        let delta = random_matrix(8, 8, 5);
        let b = error_bound(&delta, &theta, &w, 0.3, 2, 2.0, 50.0).unwrap();
        let front = 50.0 * 2.0 * 0.3;
        assert_abs_diff_eq!(b.approximation, front * tail, epsilon = 1e-10);
        let err_norm = to_gamma(&delta, &w).unwrap().frobenius_norm();
        assert_abs_diff_eq!(
            b.estimation,
            front * 2.0f64.sqrt() * err_norm,
            epsilon = 1e-10
        );
    }

    #[test]
    fn error_bound_rejects_bad_rank() {
        let w = WeightPair::uniform(4, 4);
        let m = random_matrix(4, 4, 6);
        assert!(error_bound(&m, &m, &w, 0.3, 0, 2.0, 50.0).is_err());
        assert!(error_bound(&m, &m, &w, 0.3, 5, 2.0, 50.0).is_err());
    }

    #[test]
    fn exact_rate_plugin_is_one() {
        let d: f64 = 100.0;
        let n = 100.0 * 5.0 * d.ln();
        let rate = predicted_rate(&RateClass::ExactRank { r: 5 }, 1.0, 1.0, d, n, 1.0).unwrap();
        assert_abs_diff_eq!(rate, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn lq_rate_at_q_zero_reduces_to_exact() {
        let exact =
            predicted_rate(&RateClass::ExactRank { r: 5 }, 0.5, 2.0, 60.0, 4000.0, 3.0).unwrap();
        let lq = predicted_rate(
            &RateClass::LqBall { q: 0.0, rho_q: 5.0 },
            0.5,
            2.0,
            60.0,
            4000.0,
            3.0,
        )
        .unwrap();
        assert_abs_diff_eq!(exact, lq, epsilon = 1e-12);
    }

    #[test]
    fn doubling_n_halves_the_exact_rate() {
        let class = RateClass::ExactRank { r: 3 };
        let a = predicted_rate(&class, 0.5, 2.0, 40.0, 1000.0, 1.0).unwrap();
        let b = predicted_rate(&class, 0.5, 2.0, 40.0, 2000.0, 1.0).unwrap();
        assert_abs_diff_eq!(a, 2.0 * b, epsilon = 1e-12);
    }

    #[test]
    fn lq_rate_uses_the_shrunk_exponent() {
        // q = 1: exponent 1/2
        let rate = predicted_rate(
            &RateClass::LqBall { q: 1.0, rho_q: 2.0 },
            1.0,
            1.0,
            f64::exp(1.0),
            f64::exp(1.0) * 4.0,
            1.0,
        )
        .unwrap();
        // base = e·1/(4e) = 0.25, so rate = 2·0.5 = 1
        assert_abs_diff_eq!(rate, 1.0, epsilon = 1e-12);
        assert!(predicted_rate(
            &RateClass::LqBall { q: 1.5, rho_q: 2.0 },
            1.0,
            1.0,
            40.0,
            100.0,
            1.0
        )
        .is_err());
    }

    #[test]
    fn floor_first_branch_example() {
        let f = minimax_floor(5.0, 0.0, 1.0, 100.0, 1e4, 1.0).unwrap();
        assert_abs_diff_eq!(f.value, 0.05, epsilon = 1e-12);
        assert_eq!(f.branch, FloorBranch::RankLimited);
        assert!(f.radius_ok);
    }

    #[test]
    fn floor_saturates_for_huge_radius() {
        let f = minimax_floor(1e9, 0.0, 1.0, 100.0, 1e4, 1.0).unwrap();
        assert_abs_diff_eq!(f.value, 1.0, epsilon = 1e-12);
        assert_eq!(f.branch, FloorBranch::DimensionLimited);
        assert!(!f.radius_ok);
    }

    #[test]
    fn floor_radius_check_reduces_to_rank_at_q_zero() {
        assert!(minimax_floor(100.0, 0.0, 1.0, 100.0, 1e4, 1.0)
            .unwrap()
            .radius_ok);
        assert!(!minimax_floor(100.1, 0.0, 1.0, 100.0, 1e4, 1.0)
            .unwrap()
            .radius_ok);
    }

    #[test]
    fn floor_fractional_q_branch_values() {
        let f = minimax_floor(2.0, 0.5, 0.5, 40.0, 1000.0, 1.0).unwrap();
        let b1 = 2.0 * (0.25 * 40.0 / 1000.0f64).powf(0.75);
        assert_abs_diff_eq!(f.value, b1, epsilon = 1e-12);
        assert_eq!(f.branch, FloorBranch::RankLimited);
        // c5 scales the value linearly
        let f2 = minimax_floor(2.0, 0.5, 0.5, 40.0, 1000.0, 2.5).unwrap();
        assert_abs_diff_eq!(f2.value, 2.5 * b1, epsilon = 1e-12);
    }

    #[test]
    fn decomposition_reconstructs_and_bounds_rank() {
        let gamma_star = random_matrix(8, 8, 7);
        let delta = random_matrix(8, 8, 8);
        let split = decompose_error(&delta, &gamma_star, 2).unwrap();
        let sum = split.low_rank.add(&split.residual).unwrap();
        assert!(sum.sub(&delta).unwrap().max_abs() < 1e-12);
        assert!(split.low_rank.numerical_rank().unwrap() <= 4);
        assert!(!split.degenerate);
    }

    #[test]
    fn error_inside_the_subspaces_has_no_residual() {
        let gamma_star = random_matrix(8, 8, 9);
        let svd = gamma_star.svd().unwrap();
        let r = 3;
        let u_r = DenseMatrix::from_fn(8, r, |i, j| svd.u.get(i, j));
        let v_r = DenseMatrix::from_fn(8, r, |i, j| svd.vt.get(j, i));
        let core = random_matrix(r, r, 10);
        let delta = u_r.matmul(&core).unwrap().matmul(&v_r.transpose()).unwrap();
        let split = decompose_error(&delta, &gamma_star, r).unwrap();
        assert!(split.residual.max_abs() < 1e-10);
    }

    #[test]
    fn doubly_orthogonal_error_is_pure_residual() {
        let gamma_star = random_matrix(8, 8, 11);
        let m = random_matrix(8, 8, 12);
        let r = 2;
        // project m to the orthogonal complements on both sides
        let pre = decompose_error(&m, &gamma_star, r).unwrap();
        let delta = pre.residual.clone();
        let split = decompose_error(&delta, &gamma_star, r).unwrap();
        assert!(split.low_rank.max_abs() < 1e-10);
        assert!(split.residual.sub(&delta).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn degenerate_spectrum_is_flagged() {
        let gamma_star = DenseMatrix::identity(5);
        let delta = random_matrix(5, 5, 13);
        let split = decompose_error(&delta, &gamma_star, 2).unwrap();
        assert!(split.degenerate);
        let spread = DenseMatrix::from_fn(5, 5, |i, j| if i == j { 5.0 - i as f64 } else { 0.0 });
        assert!(!decompose_error(&delta, &spread, 2).unwrap().degenerate);
    }

    #[test]
    fn cone_slack_is_nonnegative_without_residual() {
        let w = WeightPair::uniform(8, 8);
        let gamma_star = to_gamma(
            &random_low_rank(8, 8, 2, 20.0, &w, &mut seeded_rng(14)).unwrap(),
            &w,
        )
        .unwrap();
        let svd = gamma_star.svd().unwrap();
        let u_r = DenseMatrix::from_fn(8, 2, |i, j| svd.u.get(i, j));
        let v_r = DenseMatrix::from_fn(8, 2, |i, j| svd.vt.get(j, i));
        let delta = u_r
            .matmul(&random_matrix(2, 2, 15))
            .unwrap()
            .matmul(&v_r.transpose())
            .unwrap();
        let split = decompose_error(&delta, &gamma_star, 2).unwrap();
        assert!(cone_slack(&split, &gamma_star, 2).unwrap() >= 0.0);
    }

    #[test]
    fn margin_is_trivially_nonnegative_when_rhs_dies() {
        // at n = 100 the penalty factor 1 − 128·α/√n is negative for any
        // matrix, since spikiness is at least 1
        let w = WeightPair::uniform(10, 10);
        let delta = random_matrix(10, 10, 16);
        let mut rng = seeded_rng(17);
        let indices = sample_indices(&w, 100, &mut rng).unwrap();
        let margin = rsc_margin(&indices, &delta, &w, 100).unwrap();
        assert!(margin >= 0.0);
    }

    #[test]
    fn unsampled_spike_violates_the_inequality() {
        // spiky single-entry matrix that the sample never touches: lhs = 0
        // while n is large enough to make the rhs positive
        let w = WeightPair::uniform(4, 4);
        let mut delta = DenseMatrix::zeros(4, 4);
        delta.set(0, 0, 1.0);
        let n = 280_000;
        let indices = vec![SampleIndex::new(1, 2, 1).unwrap(); n];
        let margin = rsc_margin(&indices, &delta, &w, n).unwrap();
        assert!(margin < 0.0, "margin {margin} should be negative");
    }

    #[test]
    fn margin_rejects_bad_input() {
        let w = WeightPair::uniform(4, 4);
        let delta = random_matrix(4, 4, 18);
        let mut rng = seeded_rng(19);
        let indices = sample_indices(&w, 10, &mut rng).unwrap();
        assert!(rsc_margin(&indices, &delta, &w, 11).is_err());
        let zero = DenseMatrix::zeros(4, 4);
        assert!(rsc_margin(&indices, &zero, &w, 10).is_err());
    }

    #[test]
    fn monte_carlo_margins_hold_at_scale() {
        let d = 50;
        let w = WeightPair::uniform(d, d);
        let n = (5.0 * d as f64 * (d as f64).ln()).round() as usize;
        let cap = (32.0 * (d as f64).ln()).sqrt();
        let report = rsc_monte_carlo(&w, n, 50, 1, 1.0, cap, 20).unwrap();
        assert_eq!(report.n_samples_tested, 50);
        assert_eq!(report.margins.len(), 50);
        assert_eq!(
            report.violations,
            report.margins.iter().filter(|m| **m < 0.0).count()
        );
        assert!(
            report.violations <= 1,
            "unexpected violation count {}",
            report.violations
        );
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let w = WeightPair::uniform(30, 30);
        let n = 600;
        let a = rsc_monte_carlo(&w, n, 5, 1, 1.0, 12.0, 21).unwrap();
        let b = rsc_monte_carlo(&w, n, 5, 1, 1.0, 12.0, 21).unwrap();
        assert_eq!(a.margins, b.margins);
    }

    #[test]
    fn noise_norm_of_zero_noise_is_zero() {
        let w = WeightPair::uniform(5, 5);
        let mut rng = seeded_rng(22);
        let indices = sample_indices(&w, 20, &mut rng).unwrap();
        let xi = vec![0.0; 20];
        assert_eq!(noise_opnorm(&indices, &xi, &w, 20).unwrap(), 0.0);
    }

    #[test]
    fn single_observation_norm_is_the_rescaling_root() {
        let w = WeightPair::uniform(2, 2);
        let indices = vec![SampleIndex::new(0, 1, 1).unwrap()];
        let xi = vec![1.0];
        assert_abs_diff_eq!(
            noise_opnorm(&indices, &xi, &w, 1).unwrap(),
            2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn noise_norm_matches_direct_assembly() {
        let w = WeightPair::new(
            vec![0.5, 1.5, 1.0, 1.0, 0.75, 1.25],
            vec![2.0, 0.5, 0.5, 1.0, 1.0, 1.0],
        )
        .unwrap();
        let mut rng = seeded_rng(23);
        let n = 40;
        let indices = sample_indices(&w, n, &mut rng).unwrap();
        let xi: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let ours = noise_opnorm(&indices, &xi, &w, n).unwrap();
        let mut direct = DenseMatrix::zeros(6, 6);
        let root = 6.0;
        for (ix, x) in indices.iter().zip(&xi) {
            let coef = root * f64::from(ix.sign)
                / (w.row_weights()[ix.row].sqrt() * w.col_weights()[ix.col].sqrt());
            direct.add_assign_at(ix.row, ix.col, x * coef / n as f64);
        }
        assert_abs_diff_eq!(
            ours,
            direct.operator_norm().unwrap(),
            epsilon = 1e-12
        );
        // opnorm is homogeneous in the noise
        let tripled: Vec<f64> = xi.iter().map(|x| 3.0 * x).collect();
        assert_abs_diff_eq!(
            noise_opnorm(&indices, &tripled, &w, n).unwrap(),
            3.0 * ours,
            epsilon = 1e-10
        );
    }

    #[test]
    fn noise_norm_rejects_mismatched_lengths() {
        let w = WeightPair::uniform(4, 4);
        let mut rng = seeded_rng(24);
        let indices = sample_indices(&w, 10, &mut rng).unwrap();
        assert!(noise_opnorm(&indices, &vec![0.0; 9], &w, 10).is_err());
        assert!(noise_opnorm(&indices, &vec![0.0; 10], &w, 9).is_err());
    }

    #[test]
    fn mean_noise_norm_sits_in_the_predicted_window() {
        let d = 30;
        let w = WeightPair::uniform(d, d);
        let n = (10.0 * d as f64 * (d as f64).ln()).round() as usize;
        let nu = 0.5;
        let samples = noise_norm_samples(&w, n, nu, NoiseModel::Gaussian, 20, 25).unwrap();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let target = nu * (d as f64 * (d as f64).ln() / n as f64).sqrt();
        assert!(
            mean <= 4.0 * target && mean >= 0.25 * target,
            "mean {mean} outside [{}, {}]",
            0.25 * target,
            4.0 * target
        );
    }
}
