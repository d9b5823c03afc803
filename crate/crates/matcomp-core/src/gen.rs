//! Random test-problem generators: Haar orthogonal matrices, low-rank
//! targets with a spikiness cap, and matrices whose weighted singular
//! values sit exactly on an ℓ_q-ball boundary.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::mat::DenseMatrix;
use crate::measures::{from_gamma, measures};
use crate::weights::WeightPair;

/// Attempt cap for rejection-sampled generators.
pub const REJECTION_ATTEMPTS: usize = 1000;

/// A Haar-distributed d×d real orthogonal matrix: QR of a standard
/// Gaussian matrix with the R diagonal signs folded into Q, which makes
/// the distribution exactly rotation invariant.
pub fn haar_orthogonal(d: usize, rng: &mut impl Rng) -> Result<DenseMatrix> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let g = DenseMatrix::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let qr = g.to_dmatrix().qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(DenseMatrix::from_dmatrix(&q))
}

/// A·Bᵀ with standard Gaussian factors, rescaled to unit weighted
/// Frobenius norm and rejection-sampled until the spikiness does not
/// exceed `spike_cap`.
pub fn random_low_rank(
    d_r: usize,
    d_c: usize,
    r: usize,
    spike_cap: f64,
    w: &WeightPair,
    rng: &mut impl Rng,
) -> Result<DenseMatrix> {
    if r == 0 || r > d_r.min(d_c) {
        return Err(Error::InvalidArgument(format!(
            "rank {r} out of range for a {d_r}x{d_c} matrix"
        )));
    }
    if w.dims() != (d_r, d_c) {
        return Err(Error::DimensionMismatch(format!(
            "weights are for {:?}, requested {d_r}x{d_c}",
            w.dims()
        )));
    }
    if !(spike_cap >= 1.0) {
        // spikiness is never below 1, so smaller caps cannot be met
        return Err(Error::InvalidArgument(format!(
            "spike_cap must be at least 1, got {spike_cap}"
        )));
    }
    for _ in 0..REJECTION_ATTEMPTS {
        let a = DenseMatrix::from_fn(d_r, r, |_, _| rng.sample(StandardNormal));
        let b = DenseMatrix::from_fn(d_c, r, |_, _| rng.sample(StandardNormal));
        let theta = a.matmul(&b.transpose())?;
        let rep = measures(&theta, w)?;
        let (alpha, norm) = match (rep.spikiness, rep.weighted_frobenius) {
            (Some(alpha), norm) if norm > 0.0 => (alpha, norm),
            _ => continue,
        };
        if alpha <= spike_cap {
            return Ok(theta.scale(1.0 / norm));
        }
    }
    Err(Error::RejectionExhausted {
        attempts: REJECTION_ATTEMPTS,
        context: format!(
            "no rank-{r} draw with spikiness <= {spike_cap} in a {d_r}x{d_c} matrix"
        ),
    })
}

/// A d×d matrix whose weighted singular values are σ_j = s·j^(−2/q) with
/// s chosen so Σ_j σ_j^q = rho_q exactly; built as U·diag(σ)·Vᵀ in
/// weighted coordinates with independent Haar factors, then mapped back.
pub fn random_lq(
    d: usize,
    q: f64,
    rho_q: f64,
    w: &WeightPair,
    rng: &mut impl Rng,
) -> Result<DenseMatrix> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "q must lie in (0, 1], got {q}"
        )));
    }
    if !(rho_q > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rho_q must be positive, got {rho_q}"
        )));
    }
    if w.dims() != (d, d) {
        return Err(Error::DimensionMismatch(format!(
            "weights are for {:?}, requested {d}x{d}",
            w.dims()
        )));
    }
    let u = haar_orthogonal(d, rng)?;
    let v = haar_orthogonal(d, rng)?;
    // Σ (s·j^(−2/q))^q = s^q·Σ j^(−2), so s = (rho_q / Σ j^(−2))^(1/q).
    let sum_inv_sq: f64 = (1..=d).map(|j| (j as f64).powi(-2)).sum();
    let s = (rho_q / sum_inv_sq).powf(1.0 / q);
    let sigma: Vec<f64> = (1..=d).map(|j| s * (j as f64).powf(-2.0 / q)).collect();
    // U·diag(σ)·Vᵀ via column scaling
    let scaled = DenseMatrix::from_fn(d, d, |i, j| u.get(i, j) * sigma[j]);
    let gamma = scaled.matmul(&v.transpose())?;
    from_gamma(&gamma, w)
}
