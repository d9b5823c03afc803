//! Randomized packing sets: collections of d×d rank-r matrices with
//! common Frobenius norm δ, pairwise separation ≥ δ, bounded spikiness
//! and bounded operator norm.
//!
//! Construction: fill rows 1..r with independent ±1 entries, leave the
//! rest zero, scale by δ/√(rd), and rotate every candidate by one shared
//! Haar orthogonal matrix. Each attempt draws round(exp(rd/128))
//! candidates and greedily keeps those meeting the spikiness, operator
//! norm and separation thresholds until ⌊exp(rd/128)/4⌋ survive; failed
//! attempts retry with fresh randomness.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gen::haar_orthogonal;
use crate::mat::DenseMatrix;
use crate::measures::spikiness;
use crate::weights::WeightPair;

/// Relative tolerance for the Frobenius-norm property.
pub const FROBENIUS_REL_TOL: f64 = 1e-8;
/// Relative slack on the pairwise separation threshold.
pub const SEPARATION_REL_SLACK: f64 = 1e-8;
/// Hard cap on per-attempt candidate count; beyond this the requested
/// regime is out of desk scale.
pub const MAX_CANDIDATES: usize = 20_000;

/// ⌊exp(r·d/128)/4⌋, the guaranteed cardinality for dimension d ≥ 10.
pub fn packing_size(d: usize, r: usize) -> Result<usize> {
    if d < 10 {
        return Err(Error::InvalidArgument(format!(
            "packing construction requires d >= 10, got {d}"
        )));
    }
    if r == 0 || r > d {
        return Err(Error::InvalidArgument(format!(
            "rank {r} out of range for dimension {d}"
        )));
    }
    let value = ((r * d) as f64 / 128.0).exp() / 4.0;
    if !value.is_finite() || value >= 9.0e18 {
        return Err(Error::InvalidArgument(format!(
            "packing size for r*d = {} exceeds the representable range",
            r * d
        )));
    }
    Ok(value.floor() as usize)
}

/// round(exp(r·d/128)), the number of candidates drawn per attempt.
fn candidate_count(d: usize, r: usize) -> Result<usize> {
    let value = ((r * d) as f64 / 128.0).exp().round();
    if !value.is_finite() || value as usize > MAX_CANDIDATES {
        return Err(Error::InvalidArgument(format!(
            "candidate count {value:.0} for r*d = {} exceeds the cap of {MAX_CANDIDATES}; \
             reduce r or d",
            r * d
        )));
    }
    Ok(value as usize)
}

/// Pre-rotation candidate: rows 0..r filled with ±1, remaining rows zero.
/// Its Frobenius norm is exactly √(r·d).
fn raw_candidate(d: usize, r: usize, rng: &mut impl Rng) -> DenseMatrix {
    DenseMatrix::from_fn(d, d, |i, _| {
        if i < r {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        } else {
            0.0
        }
    })
}

/// One rotated, unit-Frobenius candidate: Q·Θ̃/√(rd) with a fresh Haar Q.
/// Rank ≤ r with spikiness concentrating near a small multiple of √(ln d);
/// used as the random direction for restricted-convexity spot checks.
pub fn random_direction(d: usize, r: usize, rng: &mut impl Rng) -> Result<DenseMatrix> {
    if d == 0 || r == 0 || r > d {
        return Err(Error::InvalidArgument(format!(
            "rank {r} out of range for dimension {d}"
        )));
    }
    let q = haar_orthogonal(d, rng)?;
    let tilde = raw_candidate(d, r, rng);
    Ok(q.matmul(&tilde)?.scale(1.0 / ((r * d) as f64).sqrt()))
}

/// Mean of ‖Θ̃^a − Θ̃^b‖²_F/(r·d) over fresh random candidate pairs.
/// Each of the r·d active entry differences is 0 or 4 with equal
/// probability, so the statistic concentrates around 2.
pub fn hoeffding_pair_statistic(
    d: usize,
    r: usize,
    pairs: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    if d == 0 || r == 0 || r > d {
        return Err(Error::InvalidArgument(format!(
            "rank {r} out of range for dimension {d}"
        )));
    }
    if pairs == 0 {
        return Err(Error::InvalidArgument("need at least one pair".into()));
    }
    let mut acc = 0.0;
    for _ in 0..pairs {
        let a = raw_candidate(d, r, rng);
        let b = raw_candidate(d, r, rng);
        acc += a.sub(&b)?.frobenius_norm().powi(2) / ((r * d) as f64);
    }
    Ok(acc / pairs as f64)
}

/// One verified property: the measured extreme against its threshold.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PropertyCheck {
    pub ok: bool,
    pub measured: f64,
    pub threshold: f64,
}

/// Per-property outcome for a packing set.
#[derive(Debug, Clone, Serialize)]
pub struct PackingReport {
    /// Max relative deviation of ‖Θ‖_F from δ, against [`FROBENIUS_REL_TOL`].
    pub frobenius: PropertyCheck,
    /// Min pairwise Frobenius distance, against δ·(1 − slack); infinite
    /// for singleton sets.
    pub separation: PropertyCheck,
    /// Max spikiness under uniform weights, against √(32·ln d).
    pub spikiness: PropertyCheck,
    /// Max operator norm, against 4δ/√r.
    pub operator: PropertyCheck,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct PackingSet {
    pub matrices: Vec<DenseMatrix>,
    pub delta: f64,
    pub rank: usize,
    pub attempts_used: usize,
    pub report: PackingReport,
}

/// Measure the four packing properties on an arbitrary list of matrices.
/// Tolerant of an empty list (everything fails with NaN extremes) so the
/// exhaustion error path can still report.
fn measure_matrices(matrices: &[DenseMatrix], delta: f64, rank: usize) -> Result<PackingReport> {
    let spike_threshold = match matrices.first() {
        Some(first) => {
            let d = first.n_rows();
            (32.0 * (d as f64).ln()).sqrt()
        }
        None => f64::NAN,
    };
    let op_threshold = 4.0 * delta / (rank as f64).sqrt();
    let sep_threshold = delta * (1.0 - SEPARATION_REL_SLACK);

    if matrices.is_empty() {
        let fail = |threshold| PropertyCheck {
            ok: false,
            measured: f64::NAN,
            threshold,
        };
        return Ok(PackingReport {
            frobenius: fail(FROBENIUS_REL_TOL),
            separation: fail(sep_threshold),
            spikiness: fail(spike_threshold),
            operator: fail(op_threshold),
            pass: false,
        });
    }

    let d = matrices[0].n_rows();
    for m in matrices {
        if m.dims() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "packing matrices must all be {d}x{d}, found {:?}",
                m.dims()
            )));
        }
    }
    let uniform = WeightPair::uniform(d, d);

    let mut frob_dev: f64 = 0.0;
    let mut spike_max: f64 = 0.0;
    let mut op_max: f64 = 0.0;
    for m in matrices {
        frob_dev = frob_dev.max((m.frobenius_norm() - delta).abs() / delta);
        spike_max = spike_max.max(spikiness(m, &uniform)?);
        op_max = op_max.max(m.operator_norm()?);
    }
    let mut sep_min = f64::INFINITY;
    for (i, a) in matrices.iter().enumerate() {
        for b in &matrices[i + 1..] {
            sep_min = sep_min.min(a.sub(b)?.frobenius_norm());
        }
    }

    let frobenius = PropertyCheck {
        ok: frob_dev <= FROBENIUS_REL_TOL,
        measured: frob_dev,
        threshold: FROBENIUS_REL_TOL,
    };
    let separation = PropertyCheck {
        ok: sep_min >= sep_threshold,
        measured: sep_min,
        threshold: sep_threshold,
    };
    let spike = PropertyCheck {
        ok: spike_max <= spike_threshold,
        measured: spike_max,
        threshold: spike_threshold,
    };
    let operator = PropertyCheck {
        ok: op_max <= op_threshold,
        measured: op_max,
        threshold: op_threshold,
    };
    let pass = frobenius.ok && separation.ok && spike.ok && operator.ok;
    Ok(PackingReport {
        frobenius,
        separation,
        spikiness: spike,
        operator,
        pass,
    })
}

/// Re-measure all four properties of a set. Report-only: never fails on a
/// property violation, only on malformed input.
pub fn verify_packing(set: &PackingSet) -> Result<PackingReport> {
    if set.matrices.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot verify an empty packing set".into(),
        ));
    }
    if !(set.delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "packing delta must be positive, got {}",
            set.delta
        )));
    }
    measure_matrices(&set.matrices, set.delta, set.rank)
}

/// Draw packing sets until one passes all four properties.
///
/// Per attempt: one shared Haar rotation, round(exp(rd/128)) candidates,
/// greedy retention of candidates that meet the spikiness and operator
/// norm thresholds and keep their distance from everything already
/// retained. Succeeds when ⌊exp(rd/128)/4⌋ survive; otherwise retries up
/// to `max_attempts` and errors carrying the best attempt's report.
pub fn generate_packing(
    d: usize,
    r: usize,
    delta: f64,
    rng: &mut impl Rng,
    max_attempts: usize,
) -> Result<PackingSet> {
    let wanted = packing_size(d, r)?;
    if wanted < 2 {
        return Err(Error::InvalidArgument(format!(
            "packing cardinality {wanted} is below 2 for d = {d}, r = {r}; \
             pairwise separation is untestable, increase r*d"
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must be positive, got {delta}"
        )));
    }
    if max_attempts == 0 {
        return Err(Error::InvalidArgument(
            "max_attempts must be positive".into(),
        ));
    }
    let n_candidates = candidate_count(d, r)?;
    let spike_threshold = (32.0 * (d as f64).ln()).sqrt();
    let op_threshold = 4.0 * delta / (r as f64).sqrt();
    let sep_threshold = delta * (1.0 - SEPARATION_REL_SLACK);
    let scale = delta / ((r * d) as f64).sqrt();
    let uniform = WeightPair::uniform(d, d);

    let mut best: Option<(usize, PackingReport)> = None;
    for attempt in 1..=max_attempts {
        let q = haar_orthogonal(d, rng)?;
        let mut kept: Vec<DenseMatrix> = Vec::with_capacity(wanted);
        for _ in 0..n_candidates {
            if kept.len() == wanted {
                break;
            }
            let theta = q.matmul(&raw_candidate(d, r, rng))?.scale(scale);
            if spikiness(&theta, &uniform)? > spike_threshold {
                continue;
            }
            if theta.operator_norm()? > op_threshold {
                continue;
            }
            let mut separated = true;
            for other in &kept {
                if theta.sub(other)?.frobenius_norm() < sep_threshold {
                    separated = false;
                    break;
                }
            }
            if separated {
                kept.push(theta);
            }
        }
        let report = measure_matrices(&kept, delta, r)?;
        if kept.len() == wanted && report.pass {
            for m in &kept {
                debug_assert!(m.numerical_rank()? <= r);
            }
            return Ok(PackingSet {
                matrices: kept,
                delta,
                rank: r,
                attempts_used: attempt,
                report,
            });
        }
        if best.as_ref().map_or(true, |(k, _)| kept.len() > *k) {
            best = Some((kept.len(), report));
        }
    }
    let (best_kept, report) = best.expect("at least one attempt ran");
    Err(Error::PackingExhausted {
        attempts: max_attempts,
        best_kept,
        wanted,
        report: Box::new(report),
    })
}
